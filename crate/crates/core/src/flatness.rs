//! Flat-output tracking: PID on position error, coordinated-flight command
//! extraction, wind triangle and constant-airspeed time warping.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::Airframe;
use crate::bernstein::CompositeTrajectory;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatnessError {
    #[error("airspeed {va:.3} m/s below singularity guard {eps:.3} m/s")]
    Singular { va: f64, eps: f64 },
    #[error("gains ({k0}, {k1}, {k2}) do not give a stable closed loop")]
    Unstable { k0: f64, k1: f64, k2: f64 },
    #[error("time parameterization failed: {0}")]
    Parameterization(String),
}

pub type Result<T> = std::result::Result<T, FlatnessError>;

/// Position and its first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatState {
    pub x: Vec3,
    pub x_dot: Vec3,
    pub x_ddot: Vec3,
    pub x_dddot: Vec3,
}

impl FlatState {
    pub fn from_trajectory(traj: &CompositeTrajectory, t: f64) -> Self {
        let v = |k| {
            let p = traj.eval_derivative(t, k);
            Vec3::new(p[0], p[1], p.get(2).copied().unwrap_or(0.0))
        };
        FlatState { x: v(0), x_dot: v(1), x_ddot: v(2), x_dddot: v(3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for PidGains {
    /// Triple closed-loop pole at -2.
    fn default() -> Self {
        PidGains { k0: 8.0, k1: 12.0, k2: 6.0 }
    }
}

impl PidGains {
    /// Checks the Routh conditions for `s³ + k2 s² + k1 s + k0`.
    pub fn new(k0: f64, k1: f64, k2: f64) -> Result<Self> {
        let g = PidGains { k0, k1, k2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let PidGains { k0, k1, k2 } = *self;
        if k0 > 0.0 && k1 > 0.0 && k2 > 0.0 && k2 * k1 > k0 {
            Ok(())
        } else {
            Err(FlatnessError::Unstable { k0, k1, k2 })
        }
    }
}

/// Commanded jerk `x_r⁽³⁾ + k2 ë + k1 ė + k0 e` with `e = x_r − x`.
pub fn track_pid(reference: &FlatState, measured: &FlatState, gains: &PidGains) -> Vec3 {
    let e = reference.x - measured.x;
    let de = reference.x_dot - measured.x_dot;
    let dde = reference.x_ddot - measured.x_ddot;
    reference.x_dddot + dde * gains.k2 + de * gains.k1 + e * gains.k0
}

/// Stateful form of [`track_pid`] integrated once, so it outputs an
/// acceleration command: `ẍ_r + k2 ė + k1 e + k0 ∫e`.
#[derive(Debug, Clone, Default)]
pub struct TrackingController {
    pub gains: PidGains,
    integral: Vec3,
    /// Anti-windup bound on each component of `∫e`, m·s.
    pub integral_limit: f64,
}

impl TrackingController {
    pub fn new(gains: PidGains) -> Self {
        TrackingController { gains, integral: Vec3::zeros(), integral_limit: 20.0 }
    }

    pub fn reset(&mut self) {
        self.integral = Vec3::zeros();
    }

    /// Returns (commanded acceleration, commanded jerk).
    pub fn update(&mut self, reference: &FlatState, measured: &FlatState, dt: f64) -> (Vec3, Vec3) {
        let e = reference.x - measured.x;
        let de = reference.x_dot - measured.x_dot;
        self.integral += e * dt;
        let lim = self.integral_limit;
        self.integral = self.integral.map(|v| v.clamp(-lim, lim));
        let g = &self.gains;
        let acc = reference.x_ddot + de * g.k2 + e * g.k1 + self.integral * g.k0;
        let jerk = track_pid(reference, measured, g);
        (acc, jerk)
    }
}

/// Airspeed vector from ground velocity and wind.
pub fn wind_triangle(vg: &Vec3, wind: &Vec3) -> Vec3 {
    vg - wind
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeCommand {
    pub theta_c: f64,
    pub phi_c: f64,
    pub psi_c: f64,
    /// Body-axis angular rates of the commanded attitude, rad/s.
    pub omega_v: Vec3,
    /// Commanded Euler-angle rates `(φ̇, θ̇, ψ̇)` used as feedforward.
    pub euler_rates: Vec3,
    /// Normalized throttle in `[0, 1]`.
    pub thrust: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandLimits {
    pub phi_max: f64,
    /// Heading-singularity guard on airspeed, m/s.
    pub eps_v: f64,
    /// Step used for the directional difference giving command rates, s.
    pub rate_step: f64,
}

impl Default for CommandLimits {
    fn default() -> Self {
        CommandLimits { phi_max: 50f64.to_radians(), eps_v: 0.5, rate_step: 1e-3 }
    }
}

/// Air-relative velocity-frame axes: forward, right wing, lift-up.
pub fn velocity_frame(va: &Vec3) -> (Vec3, Vec3, Vec3) {
    let fwd = va.normalize();
    let z = Vec3::z();
    let mut right = fwd.cross(&z);
    if right.norm() < 1e-9 {
        // vertical flight path: any horizontal right axis works
        right = Vec3::new(0.0, -1.0, 0.0);
    }
    let right = right.normalize();
    let up = right.cross(&fwd);
    (fwd, right, up)
}

fn attitude_only(
    v: &Vec3,
    acc: &Vec3,
    wind: &Vec3,
    af: &Airframe,
    limits: &CommandLimits,
) -> Result<(f64, f64, f64, f64)> {
    let va_vec = wind_triangle(v, wind);
    let va = va_vec.norm();
    if va < limits.eps_v {
        return Err(FlatnessError::Singular { va, eps: limits.eps_v });
    }
    let (fwd, right, up) = velocity_frame(&va_vec);
    let gamma = fwd.z.clamp(-1.0, 1.0).asin();
    let psi = va_vec.y.atan2(va_vec.x);
    // specific force the airframe must produce (everything but gravity)
    let f = acc + Vec3::new(0.0, 0.0, af.g);
    let f_right = f.dot(&right);
    let f_up = f.dot(&up);
    let phi = f_right.atan2(f_up).clamp(-limits.phi_max, limits.phi_max);
    let normal = (f_right * f_right + f_up * f_up).sqrt();
    let cl = af.mass * normal / (af.dynamic_pressure(va) * af.wing_area);
    let alpha = cl / af.lift_slope();
    let drag = af.dynamic_pressure(va) * af.wing_area * af.drag_coefficient(cl);
    let thrust = af.mass * f.dot(&fwd) + drag;
    Ok((gamma + alpha, phi, psi, thrust))
}

/// Coordinated-flight extraction of attitude and throttle commands from the
/// velocity (measured), acceleration and jerk (commanded) of a flat state.
pub fn flat_to_commands(
    state: &FlatState,
    wind: &Vec3,
    af: &Airframe,
    limits: &CommandLimits,
    powered: bool,
) -> Result<AttitudeCommand> {
    let (theta, phi, psi, thrust_n) = attitude_only(&state.x_dot, &state.x_ddot, wind, af, limits)?;
    let h = limits.rate_step;
    let v1 = state.x_dot + state.x_ddot * h;
    let a1 = state.x_ddot + state.x_dddot * h;
    let euler_rates = match attitude_only(&v1, &a1, wind, af, limits) {
        Ok((th1, ph1, ps1, _)) => Vec3::new(
            (ph1 - phi) / h,
            (th1 - theta) / h,
            wrap_angle(ps1 - psi) / h,
        ),
        Err(_) => Vec3::zeros(),
    };
    let (dphi, dtheta, dpsi) = (euler_rates.x, euler_rates.y, euler_rates.z);
    let omega_v = Vec3::new(
        dphi - dpsi * theta.sin(),
        dtheta * phi.cos() + dpsi * theta.cos() * phi.sin(),
        -dtheta * phi.sin() + dpsi * theta.cos() * phi.cos(),
    );
    let thrust = if powered { (thrust_n / af.max_thrust).clamp(0.0, 1.0) } else { 0.0 };
    Ok(AttitudeCommand { theta_c: theta, phi_c: phi, psi_c: psi, omega_v, euler_rates, thrust })
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Ground-speed multiplier `λ` such that `|λ u − W| = V` for path tangent `u`.
fn ground_scale(u: &Vec3, wind: &Vec3, v_ref: f64) -> Option<f64> {
    let uu = u.norm_squared();
    if uu < 1e-18 {
        return None;
    }
    let uw = u.dot(wind);
    let disc = uw * uw - uu * (wind.norm_squared() - v_ref * v_ref);
    if disc < 0.0 {
        return None;
    }
    let lambda = (uw + disc.sqrt()) / uu;
    (lambda > 0.0).then_some(lambda)
}

/// Monotone time warp flying a fixed path at constant airspeed in a
/// uniform wind. Built once as a lookup table and shareable across threads.
#[derive(Debug, Clone)]
pub struct ArcLengthParam {
    traj: CompositeTrajectory,
    // (original time, warped time), both strictly increasing
    table: Vec<(f64, f64)>,
}

impl ArcLengthParam {
    pub fn new(traj: &CompositeTrajectory, v_ref: f64, wind: &Vec3) -> Result<Self> {
        if !(v_ref > 0.0) {
            return Err(FlatnessError::Parameterization(format!("V_ref must be positive, got {v_ref}")));
        }
        let per_segment = 512;
        let mut table = vec![(0.0, 0.0)];
        let rate = |t: f64| -> Result<f64> {
            let d = traj.eval_derivative(t, 1);
            let u = Vec3::new(d[0], d[1], d.get(2).copied().unwrap_or(0.0));
            ground_scale(&u, wind, v_ref).map(|l| 1.0 / l).ok_or_else(|| {
                FlatnessError::Parameterization(format!("vanishing speed or excessive wind at t={t:.3}"))
            })
        };
        let mut warped = 0.0;
        for seg in traj.segments() {
            let h = seg.duration() / per_segment as f64;
            let mut f0 = rate(seg.t0())?;
            for i in 0..per_segment {
                let a = seg.t0() + i as f64 * h;
                let fm = rate(a + 0.5 * h)?;
                let f1 = rate(a + h)?;
                warped += h / 6.0 * (f0 + 4.0 * fm + f1);
                table.push((a + h, warped));
                f0 = f1;
            }
        }
        Ok(ArcLengthParam { traj: traj.clone(), table })
    }

    pub fn total_time(&self) -> f64 {
        self.table.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Original trajectory time reached at warped time `s`.
    pub fn original_time(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.total_time());
        let i = self.table.partition_point(|p| p.1 < s).clamp(1, self.table.len() - 1);
        let (t0, s0) = self.table[i - 1];
        let (t1, s1) = self.table[i];
        t0 + (t1 - t0) * (s - s0) / (s1 - s0)
    }

    pub fn position(&self, s: f64) -> Vec3 {
        let p = self.traj.eval_derivative(self.original_time(s), 0);
        Vec3::new(p[0], p[1], p.get(2).copied().unwrap_or(0.0))
    }
}
