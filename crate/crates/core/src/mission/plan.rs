use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MissionError, Result};
use crate::aero::{Airframe, SinkPolar};
use crate::flatness::Vec3;
use crate::dubins::Pose2D;
use crate::flatness::FlatState;
use crate::planner::{
    ground_speed_along, ConstraintSet, CostWeights, Environment, FlightMode, GaussianObstacle, PlanProblem,
    PlannerError,
};
use crate::simulator::{SensorModel, WindField};

/// Cruise reference airspeed used when a cruise waypoint gives none, m/s.
pub const DEFAULT_CRUISE_VA: f64 = 15.0;

/// Waypoint in local ENU meters. Its `mode` and `va_ref` describe the leg
/// that ends here; on the first waypoint they are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default = "default_mode")]
    pub mode: FlightMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va_ref: Option<f64>,
}

fn default_mode() -> FlightMode {
    FlightMode::Cruise
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeWeights {
    #[serde(default)]
    pub cruise: CostWeights,
    #[serde(default)]
    pub glide: CostWeights,
}

impl Default for ModeWeights {
    fn default() -> Self {
        ModeWeights { cruise: CostWeights::default(), glide: CostWeights::default() }
    }
}

/// Optional replacements for the per-mode constraint defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vz_band: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_safe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl ConstraintOverrides {
    pub fn apply(&self, mut c: ConstraintSet) -> ConstraintSet {
        if let Some(v) = self.omega_max {
            c.omega_max = v;
        }
        if let Some(v) = self.xi {
            c.xi = v;
        }
        if let Some(v) = self.vz_band {
            c.vz_band = v;
        }
        if let Some(v) = self.d_safe {
            c.d_safe = v;
        }
        if let Some(v) = self.margin {
            c.margin = v;
        }
        c
    }
}

/// Sink polar with the airspeed range its fit covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub p: f64,
    pub b: f64,
    pub va_range: [f64; 2],
}

impl PolarSpec {
    /// Polar from the airframe's drag model, valid from 0.8 to 2 times the
    /// best-glide airspeed.
    pub fn from_airframe(af: &Airframe) -> Self {
        let polar = SinkPolar::from_airframe(af);
        let v = polar.best_glide_airspeed(af);
        PolarSpec { p: polar.p, b: polar.b, va_range: [0.8 * v, 2.0 * v] }
    }

    pub fn polar(&self) -> Result<SinkPolar> {
        SinkPolar::new(self.p, self.b).map_err(|e| MissionError::invalid(None, "polar", e.to_string()))
    }
}

/// One flight leg between consecutive waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub index: usize,
    pub mode: FlightMode,
    pub va_ref: f64,
    pub from: Vec3,
    pub to: Vec3,
    /// Heading to arrive with: toward the following waypoint, or along the
    /// leg for the last one.
    pub goal_heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionPlan {
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub weights: ModeWeights,
    #[serde(default)]
    pub constraints: ConstraintOverrides,
    #[serde(default)]
    pub obstacles: Vec<GaussianObstacle>,
    #[serde(default)]
    pub wind: WindField,
    /// Seconds between replans; 0 disables replanning.
    #[serde(default = "default_replan")]
    pub replan_interval: f64,
    /// Waypoints sampled from the Dubins path seeding each cruise leg.
    #[serde(default = "default_dubins")]
    pub dubins_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub airframe: Option<Airframe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<PolarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensors: Option<SensorModel>,
    /// Geodetic reference (lat, lon in degrees) of the local frame origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
}

fn default_replan() -> f64 {
    1.0
}

fn default_dubins() -> usize {
    8
}

#[derive(Deserialize)]
struct WaypointSpans {
    #[serde(default)]
    waypoints: Vec<toml::Spanned<toml::Value>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl MissionPlan {
    /// Parses and validates mission text. Errors name the offending field
    /// and its line.
    pub fn parse(text: &str) -> Result<Self> {
        let plan: MissionPlan = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            MissionError::Parse { line, message: e.message().to_string() }
        })?;
        let lines: Vec<usize> = toml::from_str::<WaypointSpans>(text)
            .map(|w| w.waypoints.iter().map(|s| line_of(text, s.span().start)).collect())
            .unwrap_or_default();
        plan.validate_with_lines(&lines)?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MissionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MissionError::invalid(None, "mission", e.to_string()))
    }

    pub fn airframe(&self) -> Airframe {
        self.airframe.unwrap_or_default()
    }

    pub fn polar_spec(&self) -> PolarSpec {
        self.polar.unwrap_or_else(|| PolarSpec::from_airframe(&self.airframe()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_lines(&[])
    }

    fn validate_with_lines(&self, lines: &[usize]) -> Result<()> {
        let line = |i: usize| lines.get(i).copied();
        if self.waypoints.len() < 2 {
            return Err(MissionError::invalid(line(0), "waypoints", "need at least 2 waypoints".into()));
        }
        let af = self.airframe();
        af.validate().map_err(|e| MissionError::invalid(None, "airframe", e.to_string()))?;
        let spec = self.polar_spec();
        spec.polar()?;
        if !(spec.va_range[0] > 0.0 && spec.va_range[1] > spec.va_range[0]) {
            return Err(MissionError::invalid(None, "polar.va_range", format!("bad range {:?}", spec.va_range)));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            let field = format!("waypoints[{i}]");
            if ![w.x, w.y, w.z].iter().all(|v| v.is_finite()) {
                return Err(MissionError::invalid(line(i), &field, "coordinates must be finite".into()));
            }
            if i == 0 {
                continue;
            }
            match (w.mode, w.va_ref) {
                (FlightMode::Glide, None) => {
                    return Err(MissionError::invalid(
                        line(i),
                        &format!("{field}.va_ref"),
                        format!("glide segment {i} is missing va_ref"),
                    ));
                }
                (FlightMode::Glide, Some(v)) if !(spec.va_range[0]..=spec.va_range[1]).contains(&v) => {
                    return Err(MissionError::invalid(
                        line(i),
                        &format!("{field}.va_ref"),
                        format!(
                            "glide segment {i}: va_ref {v} outside the polar range [{:.2}, {:.2}]",
                            spec.va_range[0], spec.va_range[1]
                        ),
                    ));
                }
                (_, Some(v)) if !(v > 0.0 && v.is_finite()) => {
                    return Err(MissionError::invalid(line(i), &format!("{field}.va_ref"), format!("must be positive, got {v}")));
                }
                _ => {}
            }
            let prev = &self.waypoints[i - 1];
            if (w.x - prev.x).hypot(w.y - prev.y) < 1.0 {
                return Err(MissionError::invalid(line(i), &field, "coincides with the previous waypoint".into()));
            }
        }
        self.weights.cruise.validate().map_err(|e| MissionError::invalid(None, "weights.cruise", e.to_string()))?;
        self.weights.glide.validate().map_err(|e| MissionError::invalid(None, "weights.glide", e.to_string()))?;
        for mode in [FlightMode::Cruise, FlightMode::Glide] {
            self.constraint_set(mode, 12.0, af.g)
                .validate()
                .map_err(|e| MissionError::invalid(None, "constraints", e.to_string()))?;
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.sigma_x > 0.0 && o.sigma_y > 0.0 && o.x.is_finite() && o.y.is_finite()) {
                return Err(MissionError::invalid(None, &format!("obstacles[{i}]"), "spreads must be positive".into()));
            }
        }
        self.wind.validate().map_err(|e| MissionError::invalid(None, "wind", e.to_string()))?;
        if let Some(s) = &self.sensors {
            s.validate().map_err(|e| MissionError::invalid(None, "sensors", e.to_string()))?;
        }
        if !(self.replan_interval >= 0.0 && self.replan_interval.is_finite()) {
            return Err(MissionError::invalid(None, "replan_interval", "must be nonnegative".into()));
        }
        if self.dubins_samples < 2 {
            return Err(MissionError::invalid(None, "dubins_samples", "need at least 2".into()));
        }
        Ok(())
    }

    /// Constraint set for `mode` at `va_ref` with overrides applied.
    pub fn constraint_set(&self, mode: FlightMode, va_ref: f64, g: f64) -> ConstraintSet {
        self.constraints.apply(ConstraintSet::for_mode(mode, va_ref, g))
    }

    pub fn weights_for(&self, mode: FlightMode) -> CostWeights {
        match mode {
            FlightMode::Cruise => self.weights.cruise,
            FlightMode::Glide => self.weights.glide,
        }
    }

    /// Planning environment for wind `w`.
    pub fn environment(&self, wind: Vec3) -> Result<Environment> {
        Ok(Environment {
            airframe: self.airframe(),
            polar: self.polar_spec().polar()?,
            wind,
            obstacles: self.obstacles.clone(),
        })
    }

    /// Trimmed inertial velocity at the start of `leg` in wind `w`: along the
    /// leg at `va_ref`, descending at the polar sink when gliding.
    pub fn start_velocity(&self, leg: &Leg, w: &Vec3) -> Result<Vec3> {
        let af = self.airframe();
        let d = (leg.to - leg.from).xy();
        let u = d / d.norm();
        let vz_air = match leg.mode {
            FlightMode::Glide => -self
                .polar_spec()
                .polar()?
                .sink_rate(&af, leg.va_ref, 0.0)
                .map_err(|e| MissionError::invalid(None, "va_ref", e.to_string()))?,
            FlightMode::Cruise => 0.0,
        };
        let va_h = (leg.va_ref.powi(2) - vz_air * vz_air).sqrt();
        let vg = ground_speed_along([u.x, u.y], w, va_h).ok_or_else(|| {
            MissionError::invalid(None, "wind", format!("wind exceeds airspeed on leg {}", leg.index))
        })?;
        Ok(Vec3::new(u.x * vg, u.y * vg, vz_air + w.z))
    }

    /// Planning problem for `leg` from `start`.
    pub fn leg_problem(
        &self,
        leg: &Leg,
        start: FlatState,
        env: Environment,
    ) -> std::result::Result<PlanProblem, PlannerError> {
        let c = self.constraint_set(leg.mode, leg.va_ref, env.airframe.g);
        let w = self.weights_for(leg.mode);
        match leg.mode {
            FlightMode::Glide => PlanProblem::glide(start, leg.to, leg.va_ref, env, w, c),
            FlightMode::Cruise => PlanProblem::cruise_dubins(
                start,
                Pose2D::new(leg.to.x, leg.to.y, leg.goal_heading),
                leg.to.z,
                self.dubins_samples,
                leg.va_ref,
                env,
                w,
                c,
            ),
        }
    }

    pub fn legs(&self) -> Vec<Leg> {
        let pos = |w: &Waypoint| Vec3::new(w.x, w.y, w.z);
        let n = self.waypoints.len();
        (1..n)
            .map(|i| {
                let a = &self.waypoints[i - 1];
                let b = &self.waypoints[i];
                let next = if i + 1 < n { &self.waypoints[i + 1] } else { b };
                let goal_heading = if i + 1 < n {
                    (next.y - b.y).atan2(next.x - b.x)
                } else {
                    (b.y - a.y).atan2(b.x - a.x)
                };
                Leg {
                    index: i - 1,
                    mode: b.mode,
                    va_ref: b.va_ref.unwrap_or(DEFAULT_CRUISE_VA),
                    from: pos(a),
                    to: pos(b),
                    goal_heading,
                }
            })
            .collect()
    }
}
