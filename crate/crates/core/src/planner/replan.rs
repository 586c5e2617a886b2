use super::{
    require_feasible, solve_problem, KnotFreedom, Nlp, PlanProblem, Result, Seed, SolveReport,
    SolverOptions, TrajectoryNlp, DENSE_SAMPLES,
};
use crate::bernstein::{BernsteinCurve, CompositeTrajectory};
use crate::flatness::{FlatState, Vec3};

/// What a replanning call did.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplanOutcome {
    /// New trajectory adopted.
    Replanned(Box<SolveReport>),
    /// Solve failed; the previous trajectory stays active.
    Kept(Box<SolveReport>),
    /// Too little of the trajectory remains to be worth replanning.
    Skipped,
}

/// Receding-horizon wrapper: holds the active trajectory and re-solves from
/// the measured state, warm-started from what is left of it.
#[derive(Debug, Clone)]
pub struct Replanner {
    problem: PlanProblem,
    opts: SolverOptions,
    trajectory: CompositeTrajectory,
    /// Simulation time at which the active trajectory starts.
    origin: f64,
    pub min_remaining: f64,
    /// Merge the first remaining piece into the next segment when it is
    /// shorter than this fraction of the original segment.
    pub merge_fraction: f64,
    pub merge_time: f64,
    /// Scaled-objective decrease a new solve must achieve over the warm
    /// start (the remainder of the active trajectory) to replace it.
    pub min_improvement: f64,
    last_report: Option<SolveReport>,
}

impl Replanner {
    /// Solves `problem` once and starts tracking the result at time `t0`.
    pub fn new(problem: PlanProblem, opts: SolverOptions, t0: f64) -> Result<Self> {
        let plan = require_feasible(solve_problem(&problem, &opts)?, opts.tol_violation)?;
        let mut r = Self::with_trajectory(problem, opts, plan.trajectory, t0);
        r.last_report = Some(plan.report);
        Ok(r)
    }

    /// Starts from an already solved trajectory whose knots match
    /// `problem.freedom`.
    pub fn with_trajectory(
        problem: PlanProblem,
        opts: SolverOptions,
        trajectory: CompositeTrajectory,
        t0: f64,
    ) -> Self {
        Replanner {
            problem,
            opts,
            trajectory,
            origin: t0,
            min_remaining: 2.0,
            merge_fraction: 0.35,
            merge_time: 1.0,
            min_improvement: 1e-3,
            last_report: None,
        }
    }

    pub fn trajectory(&self) -> &CompositeTrajectory {
        &self.trajectory
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Report of the most recent solve, if this replanner ran one.
    pub fn last_report(&self) -> Option<&SolveReport> {
        self.last_report.as_ref()
    }

    pub fn problem(&self) -> &PlanProblem {
        &self.problem
    }

    /// Time remaining on the active trajectory at simulation time `t`.
    pub fn remaining(&self, t: f64) -> f64 {
        self.trajectory.duration() - (t - self.origin)
    }

    /// Reference flat state at simulation time `t`.
    pub fn reference(&self, t: f64) -> FlatState {
        FlatState::from_trajectory(&self.trajectory, t - self.origin)
    }

    /// Warm-start problem for a replan at simulation time `t` from the
    /// measured position and velocity.
    pub fn warm_problem(&self, t: f64, position: Vec3, velocity: Vec3, wind: Vec3) -> PlanProblem {
        let tau = (t - self.origin).clamp(0.0, self.trajectory.duration());
        let knots_t: Vec<f64> = std::iter::once(0.0).chain(self.trajectory.knot_times()).collect();
        let segs = self.trajectory.segments();
        let m = segs.len();
        let j = self.trajectory.segment_index(tau);
        let reference = FlatState::from_trajectory(&self.trajectory, tau);
        let start = FlatState {
            x: position,
            x_dot: velocity,
            x_ddot: reference.x_ddot,
            x_dddot: reference.x_dddot,
        };
        let left = knots_t[j + 1] - tau;
        let merge = j + 1 < m
            && (left < self.merge_fraction * segs[j].duration() || left < self.merge_time);
        let first_end = if merge { j + 2 } else { j + 1 };
        let degree = self.problem.degree;

        let mut knots = vec![start];
        let mut freedom = vec![KnotFreedom::FIXED];
        let mut interior = Vec::new();
        let mut durations = Vec::new();
        // first piece
        let t_end = knots_t[first_end];
        if merge {
            interior.push(
                (4..=degree - 4)
                    .map(|i| {
                        let s = tau + (t_end - tau) * i as f64 / degree as f64;
                        let v = self.trajectory.eval(s).expect("time within trajectory");
                        Vec3::new(v[0], v[1], v[2])
                    })
                    .collect::<Vec<_>>(),
            );
        } else {
            let piece = right_piece(&segs[j], tau);
            interior.push((4..=degree - 4).map(|i| as_vec3(piece.point(i))).collect());
        }
        durations.push(t_end - tau);
        knots.push(FlatState::from_trajectory(&self.trajectory, t_end));
        freedom.push(self.problem.freedom[first_end]);
        for (k, seg) in segs.iter().enumerate().skip(first_end) {
            interior.push((4..=degree - 4).map(|i| as_vec3(seg.point(i))).collect());
            durations.push(seg.duration());
            knots.push(FlatState::from_trajectory(&self.trajectory, knots_t[k + 1]));
            freedom.push(self.problem.freedom[k + 1]);
        }
        let mut p = self.problem.clone();
        p.env.wind = wind;
        p.seed = Seed { knots, interior, durations };
        p.freedom = freedom;
        p.widen_first = true;
        p
    }

    /// Re-solves at simulation time `t`. The previous trajectory is kept if
    /// the new solve is not feasible.
    pub fn replan(&mut self, t: f64, position: Vec3, velocity: Vec3, wind: Vec3) -> Result<ReplanOutcome> {
        if self.remaining(t) < self.min_remaining {
            return Ok(ReplanOutcome::Skipped);
        }
        let p = self.warm_problem(t, position, velocity, wind);
        let mut plan = solve_problem(&p, &self.opts)?;
        let nlp = TrajectoryNlp::new(&p)?;
        let z0 = nlp.initial_point();
        let (f0, _, g0) = nlp.evaluate(&z0);
        let warm_feasible = g0.iter().all(|v| *v < self.opts.tol_violation);
        if warm_feasible && (!plan.report.feasible || nlp.evaluate(&plan.decision).0 > f0 - self.min_improvement) {
            // nothing worth switching for: continue along the old path from
            // the measured state
            plan.trajectory = nlp.decode(&z0);
            plan.report.feasible = true;
            plan.report.cost = nlp.costs(&z0);
            plan.report.violations = nlp.family_violations(&z0);
            plan.report.dense = nlp.dense_check(&plan.trajectory, DENSE_SAMPLES);
            plan.decision = z0;
        }
        self.last_report = Some(plan.report.clone());
        if !plan.report.feasible {
            return Ok(ReplanOutcome::Kept(Box::new(plan.report)));
        }
        self.trajectory = plan.trajectory;
        self.origin = t;
        self.problem = p;
        Ok(ReplanOutcome::Replanned(Box::new(plan.report)))
    }
}

/// Part of `seg` after absolute time `tau`, with its own time origin.
fn right_piece(seg: &BernsteinCurve, tau: f64) -> BernsteinCurve {
    if tau <= seg.t0() {
        return seg.clone();
    }
    match seg.split(tau) {
        Ok((_, right)) => right,
        Err(_) => seg.clone(),
    }
}

fn as_vec3(p: &[f64]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}
