//! Constrained trajectory optimization over composite Bernstein curves.
//!
//! The decision vector holds the states (position through jerk) at every
//! knot, the free interior control points of each segment and the segment
//! durations. The first and last four control points of a segment are
//! functions of its two knot states, so endpoint conditions and C³
//! continuity hold by construction; everything else is an inequality on
//! control points of derived Bernstein curves.

mod costs;
mod nlp;
mod replan;
pub mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{Airframe, SinkPolar};
use crate::bernstein::CompositeTrajectory;
use crate::dubins::{self, Pose2D};
use crate::flatness::{FlatState, Vec3};

pub use costs::{jerk_cost, time_cost, wind_cost};
pub use nlp::{DenseCheck, Family, NlpSummary, TrajectoryNlp};
pub use replan::{ReplanOutcome, Replanner};
pub use solver::{Nlp, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver stopped with violations in: {families}")]
    NotConverged { families: String, report: Box<SolveReport> },
}

pub type Result<T> = std::result::Result<T, PlannerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlightMode {
    Cruise,
    Glide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// jerk
    pub sigma0: f64,
    /// time
    pub sigma1: f64,
    /// wind
    pub sigma2: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { sigma0: 10.0, sigma1: 0.1, sigma2: 0.1 }
    }
}

impl CostWeights {
    pub fn min_jerk() -> Self {
        CostWeights { sigma0: 10.0, sigma1: 0.1, sigma2: 0.0 }
    }

    pub fn min_time() -> Self {
        CostWeights { sigma0: 0.1, sigma1: 10.0, sigma2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.sigma0, self.sigma1, self.sigma2];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
            return Err(PlannerError::Invalid(format!("bad cost weights {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Heading-rate bound, rad/s.
    pub omega_max: f64,
    /// Half-width of the squared ground-speed band, m²/s².
    pub xi: f64,
    /// Half-width of the sink-rate band, m/s.
    pub vz_band: f64,
    pub d_safe: f64,
    pub continuity_order: usize,
    /// Segment durations are bounded below by chord/(factor·Va_ref).
    pub t_min_factor: f64,
    /// Relative tightening applied to every bound inside the solver so that
    /// small residual violations stay within the nominal bound.
    pub margin: f64,
}

impl ConstraintSet {
    /// Defaults for `mode` at reference airspeed `va_ref`.
    pub fn for_mode(mode: FlightMode, va_ref: f64, g: f64) -> Self {
        let phi_plan = 30f64.to_radians();
        ConstraintSet {
            omega_max: g * phi_plan.tan() / va_ref,
            xi: match mode {
                FlightMode::Glide => 0.04 * va_ref * va_ref,
                FlightMode::Cruise => 0.2 * va_ref * va_ref,
            },
            vz_band: 0.1,
            d_safe: 20.0,
            continuity_order: 3,
            t_min_factor: 1.5,
            margin: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > 0.0 && self.xi > 0.0 && self.d_safe >= 0.0 && self.vz_band > 0.0) {
            return Err(PlannerError::Invalid(format!("bad constraint set {self:?}")));
        }
        if self.continuity_order > 3 {
            return Err(PlannerError::Invalid(format!(
                "continuity order {} exceeds the supported 3",
                self.continuity_order
            )));
        }
        if !(self.t_min_factor > 0.0) || !(0.0..0.5).contains(&self.margin) {
            return Err(PlannerError::Invalid("bad duration factor or margin".into()));
        }
        Ok(())
    }
}

/// Gaussian-shaped obstacle `[x_o, y_o, h, σ_x, σ_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianObstacle {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Inflate the safety distance by two spreads.
    #[serde(default)]
    pub hard: bool,
}

impl GaussianObstacle {
    pub fn clearance_radius(&self, d_safe: f64) -> f64 {
        if self.hard {
            d_safe + 2.0 * self.sigma_x.max(self.sigma_y)
        } else {
            d_safe
        }
    }

    /// Planar distance from `p` to the obstacle center.
    pub fn distance(&self, p: &Vec3) -> f64 {
        (p.x - self.x).hypot(p.y - self.y)
    }

    /// Terrain-like height field at `(x, y)`.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.x) / self.sigma_x;
        let dy = (y - self.y) / self.sigma_y;
        self.height * (-0.5 * (dx * dx + dy * dy)).exp()
    }
}

/// Airframe, polar, wind estimate and obstacles shared by planning calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub airframe: Airframe,
    pub polar: SinkPolar,
    pub wind: Vec3,
    pub obstacles: Vec<GaussianObstacle>,
}

/// Initial guess in knot-state form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub knots: Vec<FlatState>,
    /// Free interior control points of each segment.
    pub interior: Vec<Vec<Vec3>>,
    pub durations: Vec<f64>,
}

impl Seed {
    /// Knot states, interior control points and durations of a solved
    /// trajectory, for restarting a related problem from it.
    pub fn from_trajectory(traj: &CompositeTrajectory) -> Self {
        let mut knots = vec![FlatState::from_trajectory(traj, 0.0)];
        knots.extend(traj.knot_times().into_iter().map(|t| FlatState::from_trajectory(traj, t)));
        let interior = traj
            .segments()
            .iter()
            .map(|seg| {
                let n = seg.degree();
                (4..=n - 4).map(|i| {
                    let p = seg.point(i);
                    Vec3::new(p[0], p[1], p[2])
                })
                .collect()
            })
            .collect();
        let durations = traj.segments().iter().map(|s| s.duration()).collect();
        Seed { knots, interior, durations }
    }
}

/// Which knot-state components the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotFreedom {
    pub position: [bool; 3],
    pub velocity: bool,
    pub acceleration: bool,
    pub jerk: bool,
}

impl KnotFreedom {
    pub const FIXED: KnotFreedom =
        KnotFreedom { position: [false; 3], velocity: false, acceleration: false, jerk: false };
    pub const FREE: KnotFreedom =
        KnotFreedom { position: [true; 3], velocity: true, acceleration: true, jerk: true };
    pub const PASS_THROUGH: KnotFreedom =
        KnotFreedom { position: [false; 3], velocity: true, acceleration: true, jerk: true };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProblem {
    pub mode: FlightMode,
    pub degree: usize,
    pub va_ref: f64,
    pub env: Environment,
    pub weights: CostWeights,
    pub constraints: ConstraintSet,
    pub seed: Seed,
    /// One entry per knot, including start and end.
    pub freedom: Vec<KnotFreedom>,
    /// Let the first segment's bands include the start state (used when
    /// replanning from a measured state that sits slightly outside them).
    pub widen_first: bool,
}

pub const DEFAULT_DEGREE: usize = 9;
/// Target chord of a glide segment, m.
pub const GLIDE_SEGMENT_LENGTH: f64 = 100.0;

/// Horizontal ground speed reaching horizontal airspeed `va_h` along the unit
/// direction `u` in wind `w`.
pub fn ground_speed_along(u: [f64; 2], w: &Vec3, va_h: f64) -> Option<f64> {
    let uw = u[0] * w.x + u[1] * w.y;
    let disc = uw * uw - (w.x * w.x + w.y * w.y - va_h * va_h);
    if disc < 0.0 {
        return None;
    }
    let vg = uw + disc.sqrt();
    (vg > 0.0).then_some(vg)
}

fn straight_interior(a: &Vec3, b: &Vec3, degree: usize) -> Vec<Vec3> {
    (4..=degree - 4)
        .map(|i| a + (b - a) * (i as f64 / degree as f64))
        .collect()
}

impl PlanProblem {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.constraints.validate()?;
        self.env.airframe.validate().map_err(|e| PlannerError::Invalid(e.to_string()))?;
        if self.degree < 7 {
            return Err(PlannerError::Invalid(format!("degree {} < 7", self.degree)));
        }
        let m = self.seed.durations.len();
        if m == 0
            || self.seed.knots.len() != m + 1
            || self.seed.interior.len() != m
            || self.freedom.len() != m + 1
            || self.seed.interior.iter().any(|v| v.len() != self.degree - 7)
        {
            return Err(PlannerError::Invalid("seed shape does not match segment count".into()));
        }
        if !(self.va_ref > 0.0) {
            return Err(PlannerError::Invalid(format!("va_ref must be positive, got {}", self.va_ref)));
        }
        if self.seed.durations.iter().any(|t| !(*t > 0.0)) {
            return Err(PlannerError::Invalid("seed durations must be positive".into()));
        }
        if self.freedom[0] != KnotFreedom::FIXED {
            return Err(PlannerError::Invalid("start state must be fixed".into()));
        }
        Ok(())
    }

    /// Horizontal airspeed for the mode: the glide descends at the polar
    /// sink, cruise is level.
    pub fn horizontal_airspeed(&self) -> f64 {
        match self.mode {
            FlightMode::Glide => {
                let vz = self.sink_nominal();
                (self.va_ref * self.va_ref - vz * vz).sqrt()
            }
            FlightMode::Cruise => self.va_ref,
        }
    }

    /// Still-air straight-flight sink at `va_ref`.
    pub fn sink_nominal(&self) -> f64 {
        self.env
            .polar
            .sink_rate(&self.env.airframe, self.va_ref, 0.0)
            .expect("positive airspeed, level wings")
    }

    /// Glide from `start` to the planar goal `(goal.x, goal.y)`; the goal
    /// altitude is left to the optimizer.
    pub fn glide(
        start: FlatState,
        goal: Vec3,
        va_ref: f64,
        env: Environment,
        weights: CostWeights,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        let degree = DEFAULT_DEGREE;
        let chord = (goal - start.x).xy().norm();
        if chord < 1.0 {
            return Err(PlannerError::Invalid("glide goal coincides with start".into()));
        }
        let m = ((chord / GLIDE_SEGMENT_LENGTH).ceil() as usize).max(1);
        let mut p = PlanProblem {
            mode: FlightMode::Glide,
            degree,
            va_ref,
            env,
            weights,
            constraints,
            seed: Seed { knots: vec![], interior: vec![], durations: vec![] },
            freedom: vec![],
            widen_first: true,
        };
        let dir = (goal - start.x).xy() / chord;
        let vh = p.horizontal_airspeed();
        let vg = ground_speed_along([dir.x, dir.y], &p.env.wind, vh).ok_or_else(|| {
            PlannerError::Infeasible("wind exceeds airspeed along the glide track".into())
        })?;
        // still-air polar slope for the altitude seed
        let slope = p.sink_nominal() / vh;
        let end = Vec3::new(goal.x, goal.y, start.x.z - slope * chord);
        let vel = Vec3::new(dir.x * vg, dir.y * vg, -slope * vg);
        let mut knots = vec![start];
        for k in 1..=m {
            let f = k as f64 / m as f64;
            knots.push(FlatState { x: start.x + (end - start.x) * f, x_dot: vel, ..Default::default() });
        }
        let dt = chord / m as f64 / vg;
        p.seed.durations = vec![dt; m];
        p.seed.interior = (0..m)
            .map(|j| straight_interior(&knots[j].x, &knots[j + 1].x, degree))
            .collect();
        p.seed.knots = knots;
        let mut freedom = vec![KnotFreedom::FREE; m + 1];
        freedom[0] = KnotFreedom::FIXED;
        freedom[m] = KnotFreedom {
            position: [false, false, true],
            velocity: true,
            acceleration: false,
            jerk: false,
        };
        p.freedom = freedom;
        p.validate()?;
        Ok(p)
    }

    /// Cruise through planar waypoints (first = start position) with linearly
    /// interpolated altitudes ending at `goal_z`. Waypoint positions are
    /// hard pass-through knots.
    pub fn cruise(
        start: FlatState,
        waypoints: &[Pose2D],
        goal_z: f64,
        va_ref: f64,
        env: Environment,
        weights: CostWeights,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(PlannerError::Invalid("cruise needs at least two waypoints".into()));
        }
        let degree = DEFAULT_DEGREE;
        let m = waypoints.len() - 1;
        let mut knots = vec![start];
        let mut durations = Vec::with_capacity(m);
        let z0 = start.x.z;
        let pos = |k: usize| {
            let w = waypoints[k];
            let z = z0 + (goal_z - z0) * k as f64 / m as f64;
            if k == 0 {
                start.x
            } else {
                Vec3::new(w.x, w.y, z)
            }
        };
        for k in 1..=m {
            let a = pos(k - 1);
            let b = pos(k);
            let h = waypoints[k].heading;
            let u = [h.cos(), h.sin()];
            let vg = ground_speed_along(u, &env.wind, va_ref).ok_or_else(|| {
                PlannerError::Infeasible("wind exceeds cruise airspeed".into())
            })?;
            let seg_len = (b - a).xy().norm().max(1.0);
            let dt = seg_len / vg;
            durations.push(dt);
            let vz = (b.z - a.z) / dt;
            knots.push(FlatState { x: b, x_dot: Vec3::new(u[0] * vg, u[1] * vg, vz), ..Default::default() });
        }
        let interior = (0..m)
            .map(|j| {
                // cubic Hermite positions at the interior parameters
                let a = &knots[j];
                let b = &knots[j + 1];
                let t = durations[j];
                (4..=degree - 4)
                    .map(|i| {
                        let s = i as f64 / degree as f64;
                        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                        let h10 = s.powi(3) - 2.0 * s * s + s;
                        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                        let h11 = s.powi(3) - s * s;
                        a.x * h00 + a.x_dot * (h10 * t) + b.x * h01 + b.x_dot * (h11 * t)
                    })
                    .collect()
            })
            .collect();
        let mut freedom = vec![KnotFreedom::PASS_THROUGH; m + 1];
        freedom[0] = KnotFreedom::FIXED;
        freedom[m] = KnotFreedom { acceleration: false, jerk: false, ..KnotFreedom::PASS_THROUGH };
        let p = PlanProblem {
            mode: FlightMode::Cruise,
            degree,
            va_ref,
            env,
            weights,
            constraints,
            seed: Seed { knots, interior, durations },
            freedom,
            widen_first: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Cruise seeded by `n` waypoints sampled on the shortest Dubins path
    /// from the start pose (heading of the start velocity) to `goal`.
    pub fn cruise_dubins(
        start: FlatState,
        goal: Pose2D,
        goal_z: f64,
        n: usize,
        va_ref: f64,
        env: Environment,
        weights: CostWeights,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        let heading = start.x_dot.y.atan2(start.x_dot.x);
        let from = Pose2D::new(start.x.x, start.x.y, heading);
        let r = Self::seed_turn_radius(va_ref, &env, &constraints);
        let path = dubins::shortest_path(from, goal, r).map_err(|e| PlannerError::Invalid(e.to_string()))?;
        let samples = path.sample(n).map_err(|e| PlannerError::Invalid(e.to_string()))?;
        Self::cruise(start, &samples, goal_z, va_ref, env, weights, constraints)
    }

    /// Dubins radius keeping the seed's heading rate within the planner's
    /// bound at the fastest ground speed the wind allows.
    pub fn seed_turn_radius(va_ref: f64, env: &Environment, c: &ConstraintSet) -> f64 {
        let vg_max = va_ref + env.wind.xy().norm();
        1.1 * vg_max / c.omega_max
    }
}

/// Per-family cost terms of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub jerk: f64,
    pub time: f64,
    pub wind: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub feasible: bool,
    pub cost: CostBreakdown,
    /// Largest scaled violation per constraint family.
    pub violations: Vec<(Family, f64)>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
    /// Post-solve check on dense samples against the nominal bounds.
    pub dense: DenseCheck,
}

/// Samples per segment used by the post-solve check.
pub const DENSE_SAMPLES: usize = 40;

impl SolveReport {
    pub fn violated_families(&self, tol: f64) -> Vec<Family> {
        self.violations.iter().filter(|(_, v)| *v >= tol).map(|(f, _)| *f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub trajectory: CompositeTrajectory,
    pub report: SolveReport,
    pub decision: Vec<f64>,
}

/// Assembles and solves `problem`, returning the best iterate whether or not
/// it satisfies the constraints; check `report.feasible`.
pub fn solve_problem(problem: &PlanProblem, opts: &SolverOptions) -> Result<Plan> {
    let nlp = TrajectoryNlp::new(problem)?;
    let z0 = nlp.initial_point();
    let out = solver::solve(&nlp, &z0, opts);
    let trajectory = nlp.decode(&out.z);
    let report = SolveReport {
        converged: out.converged,
        feasible: out.max_violation < opts.tol_violation,
        cost: nlp.costs(&out.z),
        violations: nlp.family_violations(&out.z),
        outer_iterations: out.outer_iterations,
        inner_iterations: out.inner_iterations,
        evaluations: out.evaluations,
        wall_time_s: out.wall_time_s,
        dense: nlp.dense_check(&trajectory, DENSE_SAMPLES),
    };
    Ok(Plan { trajectory, report, decision: out.z })
}

pub(crate) fn require_feasible(plan: Plan, tol: f64) -> Result<Plan> {
    if plan.report.feasible {
        return Ok(plan);
    }
    let families = plan
        .report
        .violated_families(tol)
        .iter()
        .map(|f| format!("{f:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    Err(PlannerError::NotConverged { families, report: Box::new(plan.report) })
}

pub fn plan_glide(problem: &PlanProblem, opts: &SolverOptions) -> Result<Plan> {
    if problem.mode != FlightMode::Glide {
        return Err(PlannerError::Invalid("plan_glide needs a glide problem".into()));
    }
    require_feasible(solve_problem(problem, opts)?, opts.tol_violation)
}

pub fn plan_cruise(problem: &PlanProblem, opts: &SolverOptions) -> Result<Plan> {
    if problem.mode != FlightMode::Cruise {
        return Err(PlannerError::Invalid("plan_cruise needs a cruise problem".into()));
    }
    require_feasible(solve_problem(problem, opts)?, opts.tol_violation)
}
