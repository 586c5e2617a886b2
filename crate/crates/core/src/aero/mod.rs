//! Steady-glide aerodynamics, sink polars and total-energy variometry.
//!
//! Conventions: inertial `z` points up, so a descending aircraft has
//! `ż < 0`. Sink rates are returned as positive-down magnitudes, which makes
//! the netto signal `Ė + V_z` vanish in a nominal still-air glide.

mod io;
pub mod savgol;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_polar_csv, write_polar_csv};
pub use savgol::{sg_derivative, SgFilter, StreamingDerivative};

#[derive(Debug, Error)]
pub enum AeroError {
    #[error("airspeed {va} m/s is outside the steady-glide envelope")]
    Envelope { va: f64 },
    #[error("bank angle {phi} rad must satisfy |phi| < pi/2")]
    Bank { phi: f64 },
    #[error("airspeed must be positive, got {0}")]
    Airspeed(f64),
    #[error("invalid airframe: {0}")]
    Airframe(String),
    #[error("invalid polar: {0}")]
    Polar(String),
    #[error("polar fit failed: {0}")]
    Fit(String),
    #[error("invalid filter parameters: {0}")]
    Parameter(String),
    #[error("polar file: {0}")]
    Csv(#[from] csv::Error),
    #[error("polar file: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AeroError>;

fn default_gravity() -> f64 {
    9.81
}

fn default_max_thrust() -> f64 {
    6.0
}

/// Physical constants of the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Airframe {
    /// kg
    pub mass: f64,
    /// m²
    pub wing_area: f64,
    pub aspect_ratio: f64,
    pub oswald: f64,
    pub cd0: f64,
    /// kg/m³
    pub rho: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
    /// Static thrust at full throttle, N.
    #[serde(default = "default_max_thrust")]
    pub max_thrust: f64,
}

impl Default for Airframe {
    /// A 1.5 kg foam glider used as the repository's reference fixture.
    fn default() -> Self {
        Airframe {
            mass: 1.5,
            wing_area: 0.4,
            aspect_ratio: 6.0,
            oswald: 0.9,
            cd0: 0.03,
            rho: 1.225,
            g: 9.81,
            max_thrust: default_max_thrust(),
        }
    }
}

impl Airframe {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("wing_area", self.wing_area),
            ("aspect_ratio", self.aspect_ratio),
            ("oswald", self.oswald),
            ("cd0", self.cd0),
            ("rho", self.rho),
            ("g", self.g),
            ("max_thrust", self.max_thrust),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(AeroError::Airframe(format!("{name} must be positive, got {v}")));
            }
        }
        if self.oswald > 1.0 {
            return Err(AeroError::Airframe(format!("oswald must be <= 1, got {}", self.oswald)));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.g
    }

    /// `π·AR·e`
    pub fn span_efficiency(&self) -> f64 {
        PI * self.aspect_ratio * self.oswald
    }

    /// Induced-drag factor `k = 1/(π AR e)`.
    pub fn induced_factor(&self) -> f64 {
        1.0 / self.span_efficiency()
    }

    pub fn dynamic_pressure(&self, va: f64) -> f64 {
        0.5 * self.rho * va * va
    }

    /// Lift coefficient that carries the weight in straight flight.
    pub fn lift_coefficient(&self, va: f64) -> f64 {
        self.weight() / (self.dynamic_pressure(va) * self.wing_area)
    }

    /// Finite-wing lift slope per radian, `2π AR/(AR + 2)`.
    pub fn lift_slope(&self) -> f64 {
        2.0 * PI * self.aspect_ratio / (self.aspect_ratio + 2.0)
    }

    pub fn drag_coefficient(&self, cl: f64) -> f64 {
        self.cd0 + cl * cl * self.induced_factor()
    }

    /// Angle of attack for wings-level trim, `a0 + a1/Va²`.
    pub fn trim_alpha(&self, va: f64) -> f64 {
        let (a0, a1) = self.trim_alpha_coefficients();
        a0 + a1 / (va * va)
    }

    /// Coefficients of the affine-in-`1/Va²` trim angle of attack.
    pub fn trim_alpha_coefficients(&self) -> (f64, f64) {
        let a1 = 2.0 * self.weight() / (self.rho * self.wing_area * self.lift_slope());
        (0.0, a1)
    }

    /// Steady-glide relative flight-path angle as `sin γ_a` (negative when
    /// descending), the physical root of the lift/drag balance quadratic.
    pub fn glide_sin_gamma(&self, va: f64) -> Result<f64> {
        if !(va > 0.0) {
            return Err(AeroError::Airspeed(va));
        }
        let qs = self.dynamic_pressure(va) * self.wing_area;
        let pe = self.span_efficiency();
        let mg = self.weight();
        let upsilon = (qs * qs * pe * (pe + 4.0 * self.cd0) + 4.0 * mg * mg).sqrt();
        let s = (qs * pe - upsilon) / (2.0 * mg);
        if !(s.abs() < 1.0) {
            return Err(AeroError::Envelope { va });
        }
        Ok(s)
    }

    /// Airspeed minimizing the glide angle.
    pub fn optimal_airspeed(&self) -> f64 {
        let mg = self.weight();
        let num = 4.0 * mg * mg;
        let den = self.rho.powi(2)
            * self.wing_area.powi(2)
            * self.cd0
            * (self.span_efficiency() + 4.0 * self.cd0);
        (num / den).powf(0.25)
    }

    /// `(L/D)_max = ½ √(π AR e / C_D0)`.
    pub fn max_glide_ratio(&self) -> f64 {
        0.5 * (self.span_efficiency() / self.cd0).sqrt()
    }
}

/// Regression constants of the sink polar `V_z = Va (P/C_L + B C_L/cos²φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkPolar {
    pub p: f64,
    pub b: f64,
}

impl SinkPolar {
    pub fn new(p: f64, b: f64) -> Result<Self> {
        if !(p > 0.0 && b > 0.0 && p.is_finite() && b.is_finite()) {
            return Err(AeroError::Polar(format!("P and B must be positive, got P={p}, B={b}")));
        }
        Ok(SinkPolar { p, b })
    }

    /// Polar implied by the parabolic drag model of the airframe.
    pub fn from_airframe(af: &Airframe) -> Self {
        SinkPolar { p: af.cd0, b: af.induced_factor() }
    }

    /// Polar whose tangent from the origin touches at `(va_star, vz_star)`.
    pub fn from_best_glide(af: &Airframe, va_star: f64, vz_star: f64) -> Result<Self> {
        if !(va_star > 0.0 && vz_star > 0.0) {
            return Err(AeroError::Polar(format!(
                "best-glide point must be positive, got ({va_star}, {vz_star})"
            )));
        }
        let ratio = vz_star / va_star;
        let cl = af.lift_coefficient(va_star);
        Self::new(0.5 * ratio * cl, 0.5 * ratio / cl)
    }

    /// Positive-down sink rate at airspeed `va` and bank `phi`.
    pub fn sink_rate(&self, af: &Airframe, va: f64, phi: f64) -> Result<f64> {
        if !(va > 0.0) {
            return Err(AeroError::Airspeed(va));
        }
        if !(phi.abs() < PI / 2.0) {
            return Err(AeroError::Bank { phi });
        }
        let cl = af.lift_coefficient(va);
        Ok(va * (self.p / cl + self.b * cl / phi.cos().powi(2)))
    }

    /// Same quantity written with `1 + tan²φ`, the form used in planning.
    pub fn sink_rate_tan(&self, af: &Airframe, va: f64, tan_phi: f64) -> f64 {
        let cl = af.lift_coefficient(va);
        va * (self.p / cl + self.b * cl * (1.0 + tan_phi * tan_phi))
    }

    /// Airspeed minimizing `V_z / Va` (the origin-tangent point).
    pub fn best_glide_airspeed(&self, af: &Airframe) -> f64 {
        let cl = (self.p / self.b).sqrt();
        (2.0 * af.weight() / (af.rho * af.wing_area * cl)).sqrt()
    }

    pub fn best_glide_ratio(&self) -> f64 {
        1.0 / (2.0 * (self.p * self.b).sqrt())
    }
}

/// One polar measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    #[serde(rename = "va_mps")]
    pub va: f64,
    #[serde(rename = "phi_rad")]
    pub phi: f64,
    #[serde(rename = "vz_mps")]
    pub vz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarFit {
    pub polar: SinkPolar,
    /// RMS of the sink-rate residuals, m/s.
    pub rms: f64,
}

/// Least-squares fit of `(P, B)`; the model is linear in both after
/// dividing the sink rate by the airspeed.
pub fn fit_polar(af: &Airframe, samples: &[PolarSample]) -> Result<PolarFit> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.va).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    if distinct.len() < 2 {
        return Err(AeroError::Fit("need samples at two or more distinct airspeeds".into()));
    }
    let n = samples.len();
    let mut a = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        if !(s.va > 0.0) || !(s.phi.abs() < PI / 2.0) || !s.vz.is_finite() {
            return Err(AeroError::Fit(format!("invalid sample {i}: {s:?}")));
        }
        let cl = af.lift_coefficient(s.va);
        a[(i, 0)] = 1.0 / cl;
        a[(i, 1)] = cl / s.phi.cos().powi(2);
        y[i] = s.vz / s.va;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(AeroError::Fit("sample set is rank deficient".into()));
    }
    let coef = svd
        .solve(&y, 1e-14 * smax)
        .map_err(|e| AeroError::Fit(e.to_string()))?;
    let polar = SinkPolar::new(coef[0], coef[1])
        .map_err(|e| AeroError::Fit(format!("non-physical fit: {e}")))?;
    let rms = (samples
        .iter()
        .map(|s| {
            let r = polar.sink_rate(af, s.va, s.phi).expect("validated sample") - s.vz;
            r * r
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(PolarFit { polar, rms })
}

/// Inputs to the total-energy computation at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    /// Vertical inertial velocity, positive up.
    pub xz_dot: f64,
    pub va: f64,
    /// Filtered airspeed derivative.
    pub va_dot: f64,
    pub phi: f64,
}

/// Total specific energy rate `ż + Va V̇a / g`, m/s.
pub fn energy_rate(s: &EnergySample, g: f64) -> f64 {
    s.xz_dot + s.va * s.va_dot / g
}

/// Netto variometer: energy rate corrected by the polar sink.
pub fn netto(s: &EnergySample, polar: &SinkPolar, af: &Airframe) -> Result<f64> {
    Ok(energy_rate(s, af.g) + polar.sink_rate(af, s.va, s.phi)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_airframe_values() {
        let af = Airframe::default();
        af.validate().unwrap();
        assert!((af.optimal_airspeed() - 9.16).abs() < 0.01);
        assert!((af.max_glide_ratio() - 11.9).abs() < 0.05);
    }

    #[test]
    fn glide_angle_is_descending() {
        let af = Airframe::default();
        for va in [6.0, 9.0, 14.0, 25.0] {
            let s = af.glide_sin_gamma(va).unwrap();
            assert!(s < 0.0 && s > -1.0);
        }
        assert!(af.glide_sin_gamma(0.0).is_err());
    }

    #[test]
    fn mass_and_drag_scaling() {
        let af = Airframe::default();
        let heavy = Airframe { mass: 2.0 * af.mass, ..af };
        let ratio = heavy.optimal_airspeed() / af.optimal_airspeed();
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 1e-9);
        let draggy = Airframe { cd0: 4.0 * af.cd0, ..af };
        assert!((draggy.max_glide_ratio() / af.max_glide_ratio() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bank_increases_sink() {
        let af = Airframe::default();
        let polar = SinkPolar::from_airframe(&af);
        let level = polar.sink_rate(&af, 10.0, 0.0).unwrap();
        let banked = polar.sink_rate(&af, 10.0, 30f64.to_radians()).unwrap();
        assert!(banked > level);
        assert!(matches!(polar.sink_rate(&af, 10.0, PI / 2.0), Err(AeroError::Bank { .. })));
    }

    #[test]
    fn tan_and_cos_forms_agree() {
        let af = Airframe::default();
        let polar = SinkPolar::from_airframe(&af);
        for phi in [-0.6, -0.1, 0.0, 0.3, 0.9] {
            let a = polar.sink_rate(&af, 11.0, phi).unwrap();
            let b = polar.sink_rate_tan(&af, 11.0, f64::tan(phi));
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn best_glide_polar_reproduces_its_tangent_point() {
        let af = Airframe::default();
        let polar = SinkPolar::from_best_glide(&af, 12.0, 1.51).unwrap();
        assert!((polar.best_glide_airspeed(&af) - 12.0).abs() < 1e-9);
        assert!((polar.sink_rate(&af, 12.0, 0.0).unwrap() - 1.51).abs() < 1e-9);
        assert!((polar.best_glide_ratio() - 12.0 / 1.51).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_single_airspeed() {
        let af = Airframe::default();
        let s = [
            PolarSample { va: 10.0, phi: 0.0, vz: 0.9 },
            PolarSample { va: 10.0, phi: 0.0, vz: 0.91 },
        ];
        assert!(matches!(fit_polar(&af, &s), Err(AeroError::Fit(_))));
    }

    #[test]
    fn energy_rate_bookkeeping() {
        let level = EnergySample { t: 0.0, xz_dot: 0.0, va: 12.0, va_dot: 0.0, phi: 0.0 };
        assert_eq!(energy_rate(&level, 9.81), 0.0);
        // climbing at 2 m/s while losing speed at the matching rate
        let zoom = EnergySample { t: 0.0, xz_dot: 2.0, va: 9.81, va_dot: -2.0, phi: 0.0 };
        assert!(energy_rate(&zoom, 9.81).abs() < 1e-12);
    }
}
