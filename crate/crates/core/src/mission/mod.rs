//! Mission files, closed-loop runs and glide metrics.

mod metrics;
mod output;
mod plan;

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

pub use metrics::{compute_glide_metrics, compute_metrics, predicted_glide_ratio, GlideMetrics, Metrics};
pub use output::{plot_tables, write_plot_data};
pub use plan::*;

use crate::flatness::{FlatState, Vec3};
use crate::planner::{solve_problem, Plan, PlanProblem, PlannerError, SolverOptions};
use crate::simulator::{run_closed_loop, wind_at, SimError, SimOptions, SimRun};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("{}parse error: {message}", line_prefix(*line))]
    Parse { line: Option<usize>, message: String },
    #[error("{}invalid `{field}`: {message}", line_prefix(*line))]
    Invalid { line: Option<usize>, field: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Plan(#[from] PlannerError),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("tracking failure: {0}")]
    Tracking(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl MissionError {
    pub fn invalid(line: Option<usize>, field: &str, message: String) -> Self {
        MissionError::Invalid { line, field: field.to_string(), message }
    }
}

pub type Result<T> = std::result::Result<T, MissionError>;

/// A completed closed-loop run and its metrics.
#[derive(Debug, Clone)]
pub struct MissionOutput {
    pub run: SimRun,
    pub metrics: Metrics,
    pub glides: Vec<GlideMetrics>,
}

/// Flies `plan` with its own wind, airframe and sensors. `seed` overrides the
/// sensor noise seed. A tracking failure is an error.
pub fn run_mission(plan: &MissionPlan, opts: &SimOptions, seed: Option<u64>) -> Result<MissionOutput> {
    plan.validate()?;
    let af = plan.airframe();
    let polar = plan.polar_spec().polar()?;
    let mut sensors = plan.sensors.unwrap_or_default();
    if let Some(s) = seed {
        sensors.seed = s;
    }
    let run = run_closed_loop(plan, &af, &polar, &plan.wind, &sensors, opts)?;
    if let Some(msg) = &run.tracking_failure {
        return Err(MissionError::Tracking(msg.clone()));
    }
    let (metrics, glides) = compute_glide_metrics(&run.log, plan)?;
    Ok(MissionOutput { run, metrics, glides })
}

/// Open-loop plan of one leg.
#[derive(Debug, Clone)]
pub struct LegPlan {
    pub leg: Leg,
    pub problem: PlanProblem,
    pub plan: Plan,
}

/// Plans every leg open loop, each starting from the end state of the
/// previous plan, in the wind at the leg's start point at t = 0. Fails on
/// the first leg whose solve is infeasible.
pub fn plan_mission(plan: &MissionPlan, opts: &SolverOptions) -> Result<Vec<LegPlan>> {
    plan.validate()?;
    let legs = plan.legs();
    let mut out: Vec<LegPlan> = Vec::with_capacity(legs.len());
    for leg in legs {
        let w = wind_at(&plan.wind, 0.0, &leg.from);
        let start = match out.last() {
            Some(prev) => FlatState::from_trajectory(&prev.plan.trajectory, prev.plan.trajectory.duration()),
            None => FlatState { x: leg.from, x_dot: plan.start_velocity(&leg, &w)?, ..Default::default() },
        };
        let problem = plan.leg_problem(&leg, start, plan.environment(w)?)?;
        let solved = solve_problem(&problem, opts)?;
        if !solved.report.feasible {
            let families = solved
                .report
                .violated_families(opts.tol_violation)
                .iter()
                .map(|f| format!("{f:?}"))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(PlannerError::NotConverged { families, report: Box::new(solved.report) }.into());
        }
        out.push(LegPlan { leg, problem, plan: solved });
    }
    Ok(out)
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCase {
    /// Wind-cost weight applied to both modes.
    pub sigma2: f64,
    /// Steady wind replacing the mission's steady component.
    pub wind: Vec3,
    pub seed: u64,
}

impl SweepCase {
    pub const CSV_HEADER: &'static str = "sigma2,wind_x,wind_y,wind_z,seed";

    pub fn csv_prefix(&self) -> String {
        format!("{},{},{},{},{}", self.sigma2, self.wind.x, self.wind.y, self.wind.z, self.seed)
    }

    pub fn apply(&self, plan: &MissionPlan) -> MissionPlan {
        let mut p = plan.clone();
        p.weights.cruise.sigma2 = self.sigma2;
        p.weights.glide.sigma2 = self.sigma2;
        p.wind.steady = self.wind;
        p
    }
}

/// Runs every case in parallel; results keep the order of `cases`.
pub fn sweep(plan: &MissionPlan, cases: &[SweepCase], opts: &SimOptions) -> Vec<Result<Metrics>> {
    cases
        .par_iter()
        .map(|c| run_mission(&c.apply(plan), opts, Some(c.seed)).map(|o| o.metrics))
        .collect()
}
