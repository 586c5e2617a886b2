//! Point-mass closed-loop flight simulation with wind, sensor noise and the
//! onboard netto variometer.

mod closed_loop;
mod log;
mod sensors;
mod wind;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::Airframe;
use crate::flatness::{velocity_frame, wrap_angle, AttitudeCommand, Vec3};
use crate::planner::PlannerError;

pub use closed_loop::{run_closed_loop, LegRecord, SimOptions, SimRun};
pub use log::{LogRow, SimLog, LOG_HEADER};
pub use sensors::{SensorModel, SensorSamples, Sensors, Variometer};
pub use wind::{wind_at, Column, Gust, WindField, WindRamp};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("integration produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("time step {0} outside (0, 0.05]")]
    TimeStep(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("planning failed on leg {leg}: {source}")]
    Plan {
        leg: usize,
        #[source]
        source: PlannerError,
    },
    #[error("log: {0}")]
    Log(String),
    #[error("log file: {0}")]
    Csv(#[from] csv::Error),
    #[error("log file: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Aircraft state: position, inertial velocity and realized attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl SimState {
    /// Air-relative velocity in wind `w`.
    pub fn air_velocity(&self, w: &Vec3) -> Vec3 {
        self.v - w
    }

    /// Wings-level state flying `va_air` (air-relative velocity) in wind
    /// `w`, pitched for steady lift at the flight-path angle.
    pub fn trimmed(t: f64, x: Vec3, va_air: Vec3, w: Vec3, af: &Airframe) -> Self {
        let va = va_air.norm();
        let gamma = (va_air.z / va).clamp(-1.0, 1.0).asin();
        SimState {
            t,
            x,
            v: va_air + w,
            phi: 0.0,
            theta: gamma + af.trim_alpha(va) * gamma.cos(),
            psi: va_air.y.atan2(va_air.x),
        }
    }
}

/// First-order attitude response time constants, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeLags {
    pub tau_phi: f64,
    pub tau_theta: f64,
}

impl Default for AttitudeLags {
    fn default() -> Self {
        AttitudeLags { tau_phi: 0.3, tau_theta: 0.25 }
    }
}

/// Lift coefficient bound standing in for stall.
const CL_MAX: f64 = 1.5;

type Y = SVector<f64, 8>;

fn pack(s: &SimState) -> Y {
    Y::from_column_slice(&[s.x.x, s.x.y, s.x.z, s.v.x, s.v.y, s.v.z, s.phi, s.theta])
}

/// Specific aerodynamic plus thrust force at the given state, m/s².
pub fn specific_force(v_air: &Vec3, phi: f64, theta: f64, throttle: f64, af: &Airframe) -> Vec3 {
    let va = v_air.norm().max(1e-6);
    let (fwd, right, up) = velocity_frame(v_air);
    let gamma = fwd.z.clamp(-1.0, 1.0).asin();
    let cl = (af.lift_slope() * (theta - gamma)).clamp(-CL_MAX, CL_MAX);
    let qs = af.dynamic_pressure(va) * af.wing_area;
    let lift = qs * cl;
    let drag = qs * af.drag_coefficient(cl);
    let thrust = throttle.clamp(0.0, 1.0) * af.max_thrust;
    ((up * phi.cos() + right * phi.sin()) * lift + fwd * (thrust - drag)) / af.mass
}

fn derivative(
    t: f64,
    y: &Y,
    cmd: &AttitudeCommand,
    field: &WindField,
    af: &Airframe,
    lags: &AttitudeLags,
) -> Y {
    let x = Vec3::new(y[0], y[1], y[2]);
    let v = Vec3::new(y[3], y[4], y[5]);
    let (phi, theta) = (y[6], y[7]);
    let w = wind_at(field, t, &x);
    let a = specific_force(&(v - w), phi, theta, cmd.thrust, af) - Vec3::new(0.0, 0.0, af.g);
    let dphi = (cmd.phi_c - phi) / lags.tau_phi + cmd.euler_rates.x;
    let dtheta = (cmd.theta_c - theta) / lags.tau_theta + cmd.euler_rates.y;
    Y::from_column_slice(&[v.x, v.y, v.z, a.x, a.y, a.z, dphi, dtheta])
}

/// One RK4 step of the point-mass model with the command held constant.
pub fn step(
    state: &SimState,
    cmd: &AttitudeCommand,
    field: &WindField,
    af: &Airframe,
    lags: &AttitudeLags,
    dt: f64,
) -> Result<SimState> {
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(SimError::TimeStep(dt));
    }
    let t = state.t;
    let y = pack(state);
    let k1 = derivative(t, &y, cmd, field, af, lags);
    let k2 = derivative(t + 0.5 * dt, &(y + k1 * (0.5 * dt)), cmd, field, af, lags);
    let k3 = derivative(t + 0.5 * dt, &(y + k2 * (0.5 * dt)), cmd, field, af, lags);
    let k4 = derivative(t + dt, &(y + k3 * dt), cmd, field, af, lags);
    let yn = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if yn.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite { t: t + dt });
    }
    let x = Vec3::new(yn[0], yn[1], yn[2]);
    let v = Vec3::new(yn[3], yn[4], yn[5]);
    let va = v - wind_at(field, t + dt, &x);
    Ok(SimState {
        t: t + dt,
        x,
        v,
        phi: wrap_angle(yn[6]),
        theta: wrap_angle(yn[7]),
        psi: va.y.atan2(va.x),
    })
}
