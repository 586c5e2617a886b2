mod common;

use glideplan::aero::{Airframe, SinkPolar};
use glideplan::bernstein::{BernsteinCurve, CompositeTrajectory};
use glideplan::dubins::Pose2D;
use glideplan::flatness::{FlatState, Vec3};
use glideplan::mission::plan_mission;
use glideplan::planner::*;
use proptest::prelude::*;

use common::scenario;

fn env(wind: Vec3, obstacles: Vec<GaussianObstacle>) -> Environment {
    let af = Airframe::default();
    Environment { airframe: af, polar: SinkPolar::from_airframe(&af), wind, obstacles }
}

/// Glide from (0, 0, 120) along +x, starting on the trimmed glide velocity.
fn glide(length: f64, va: f64, e: Environment, weights: CostWeights) -> Result<PlanProblem> {
    let sink = e.polar.sink_rate(&e.airframe, va, 0.0).unwrap();
    let vh = (va * va - sink * sink).sqrt();
    let vg = ground_speed_along([1.0, 0.0], &e.wind, vh).ok_or_else(|| PlannerError::Infeasible("wind".into()))?;
    let start = FlatState { x: Vec3::new(0.0, 0.0, 120.0), x_dot: Vec3::new(vg, 0.0, -sink + e.wind.z), ..Default::default() };
    let c = ConstraintSet::for_mode(FlightMode::Glide, va, e.airframe.g);
    PlanProblem::glide(start, Vec3::new(length, 0.0, 0.0), va, e, weights, c)
}

fn end_altitude(plan: &Plan) -> f64 {
    let t = plan.trajectory.duration();
    plan.trajectory.eval(t).unwrap()[2]
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

/// Budget large enough for the solver to reach its convergence test, for
/// properties that only hold at an optimum.
fn converged_opts() -> SolverOptions {
    SolverOptions { max_total_inner: 5000, max_outer: 60, ..Default::default() }
}

#[test]
fn still_air_glide_follows_polar_slope() {
    let e = env(Vec3::zeros(), vec![]);
    let va = e.polar.best_glide_airspeed(&e.airframe);
    let sink = e.polar.sink_rate(&e.airframe, va, 0.0).unwrap();
    let plan = plan_glide(&glide(400.0, va, e, CostWeights::default()).unwrap(), &opts()).unwrap();
    let expected = 400.0 * sink / (va * va - sink * sink).sqrt();
    let loss = 120.0 - end_altitude(&plan);
    assert!((loss / expected - 1.0).abs() < 0.02, "loss {loss} vs {expected}");
}

#[test]
fn tailwind_glide_spends_less_altitude() {
    let calm = plan_glide(&glide(400.0, 10.0, env(Vec3::zeros(), vec![]), CostWeights::default()).unwrap(), &opts()).unwrap();
    let tail =
        plan_glide(&glide(400.0, 10.0, env(Vec3::new(5.0, 0.0, 0.0), vec![]), CostWeights::default()).unwrap(), &opts())
            .unwrap();
    assert!(end_altitude(&tail) > end_altitude(&calm));
}

#[test]
fn headwind_beyond_airspeed_is_infeasible() {
    let err = glide(400.0, 10.0, env(Vec3::new(-12.0, 0.0, 0.0), vec![]), CostWeights::default()).unwrap_err();
    assert!(matches!(err, PlannerError::Infeasible(_)), "{err}");
}

#[test]
fn glide_sink_band_holds_on_dense_samples() {
    let p = glide(400.0, 10.0, env(Vec3::new(5.0, 0.0, 0.0), vec![]), CostWeights::default()).unwrap();
    let plan = plan_glide(&p, &opts()).unwrap();
    let nlp = TrajectoryNlp::new(&p).unwrap();
    let dense = nlp.dense_check(&plan.trajectory, 1000 / plan.trajectory.segments().len());
    assert!(dense.sink_excess.unwrap() <= 1e-2, "{dense:?}");
    assert!(dense.satisfied(1e-2), "{dense:?}");
}

#[test]
fn planned_glide_is_energy_balanced() {
    // netto implied by the plan: vertical speed corrected by the polar sink
    // at the planned airspeed and bank
    let p = glide(400.0, 10.0, env(Vec3::new(3.0, 1.0, 0.0), vec![]), CostWeights::default()).unwrap();
    let plan = plan_glide(&p, &opts()).unwrap();
    let (af, polar, w) = (p.env.airframe, p.env.polar, p.env.wind);
    let traj = &plan.trajectory;
    let mut worst: f64 = 0.0;
    for i in 0..=1000 {
        let t = traj.duration() * i as f64 / 1000.0;
        let v = traj.eval_derivative(t, 1);
        let a = traj.eval_derivative(t, 2);
        let air = Vec3::new(v[0] - w.x, v[1] - w.y, v[2] - w.z);
        let va = air.norm();
        let vh2 = air.x * air.x + air.y * air.y;
        let turn = (air.x * a[1] - air.y * a[0]) / vh2;
        let tan_phi = va * turn / af.g;
        let va_dot = (air.x * a[0] + air.y * a[1] + air.z * a[2]) / va;
        let netto = v[2] + va * va_dot / af.g + polar.sink_rate_tan(&af, va, tan_phi);
        worst = worst.max(netto.abs());
    }
    assert!(worst <= p.constraints.vz_band + 0.05, "worst planned netto {worst}");
}

#[test]
fn obstacle_clearance_on_dense_samples() {
    let o = GaussianObstacle { x: 100.0, y: -10.0, height: 150.0, sigma_x: 50.0, sigma_y: 50.0, hard: false };
    let p = glide(400.0, 10.0, env(Vec3::zeros(), vec![o]), CostWeights::default()).unwrap();
    let plan = plan_glide(&p, &opts()).unwrap();
    let d = plan
        .trajectory
        .sample(2000)
        .iter()
        .map(|(_, q)| (q[0] - o.x).hypot(q[1] - o.y))
        .fold(f64::INFINITY, f64::min);
    assert!(d >= p.constraints.d_safe - 1e-6, "min clearance {d}");
}

#[test]
fn row_counts_match_hand_count() {
    // degree 9: velocity degree 8, acceleration 7. Heading numerator has
    // degree 15, denominator (squared speed) degree 16 → 17 points, bounded
    // on both sides. Sink rows live on den²·vz, degree 40 → 41 points. The
    // squared distance to an obstacle has degree 18 → 19 points.
    let o = GaussianObstacle { x: 100.0, y: 80.0, height: 50.0, sigma_x: 20.0, sigma_y: 20.0, hard: false };
    let p = glide(200.0, 10.0, env(Vec3::zeros(), vec![o]), CostWeights::default()).unwrap();
    let s = TrajectoryNlp::new(&p).unwrap().summary();
    assert_eq!((s.n_segments, s.degree), (2, 9));
    let count = |f: Family| s.rows.iter().find(|r| r.family == f).map_or(0, |r| r.count);
    assert_eq!(count(Family::HeadingRate), 2 * 2 * 17);
    assert_eq!(count(Family::GroundSpeed), 2 * 2 * 17);
    assert_eq!(count(Family::SinkRate), 2 * 2 * 41);
    assert_eq!(count(Family::Obstacle), 2 * 19);
    // free knot (12) + end altitude and velocity (4) + 2 interior points per
    // segment (6 each) + 2 durations
    assert_eq!(s.n_vars, 12 + 4 + 12 + 2);
}

#[test]
fn straight_min_jerk_seed_is_a_fixed_point() {
    let e = env(Vec3::zeros(), vec![]);
    let start = FlatState { x: Vec3::new(0.0, 0.0, 100.0), x_dot: Vec3::new(15.0, 0.0, 0.0), ..Default::default() };
    let wps = [Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(300.0, 0.0, 0.0)];
    let w = CostWeights { sigma0: 1.0, sigma1: 0.0, sigma2: 0.0 };
    let p = PlanProblem::cruise(start, &wps, 100.0, 15.0, e, w, ConstraintSet::for_mode(FlightMode::Cruise, 15.0, 9.81))
        .unwrap();
    let nlp = TrajectoryNlp::new(&p).unwrap();
    let z0 = nlp.initial_point();
    let plan = plan_cruise(&p, &opts()).unwrap();
    assert!(plan.report.outer_iterations <= 2, "{:?}", plan.report);
    let before = nlp.decode(&z0);
    for i in 0..=100 {
        let t = before.duration() * i as f64 / 100.0;
        let (a, b) = (before.eval(t).unwrap(), plan.trajectory.eval(t).unwrap());
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6);
        }
    }
    assert!(jerk_cost(&plan.trajectory) < 1e-12);
}

#[test]
fn jerk_cost_of_a_quintic() {
    // x = (t/2)^5 on [0, 2]: x''' = 60 t²/32, ∫ x'''² dt = 22.5
    let mut pts = vec![vec![0.0, 0.0, 0.0]; 6];
    pts[5][0] = 1.0;
    let seg = BernsteinCurve::new(pts, 0.0, 2.0).unwrap();
    let traj = CompositeTrajectory::new(vec![seg]).unwrap();
    assert!((jerk_cost(&traj) - 22.5).abs() < 1e-9);
    assert!((time_cost(&traj) - 2.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jerk_cost_matches_quadrature(coef in prop::collection::vec(-3.0f64..3.0, 8), dur in 0.5f64..4.0) {
        let seg = BernsteinCurve::scalar(coef.clone(), 0.0, dur).unwrap();
        let traj = CompositeTrajectory::new(vec![seg.clone()]).unwrap();
        let jerk = seg.derivative(3).unwrap();
        // Gauss-Legendre, 8 nodes: exact for the degree-8 integrand
        let nodes = [
            (-0.9602898564975363, 0.1012285362903763),
            (-0.7966664774136267, 0.2223810344533745),
            (-0.5255324099163290, 0.3137066458778873),
            (-0.1834346424956498, 0.3626837833783620),
            (0.1834346424956498, 0.3626837833783620),
            (0.5255324099163290, 0.3137066458778873),
            (0.7966664774136267, 0.2223810344533745),
            (0.9602898564975363, 0.1012285362903763),
        ];
        let q: f64 = nodes.iter().map(|(x, w)| {
            let t = 0.5 * dur * (x + 1.0);
            w * jerk.eval(t).unwrap()[0].powi(2)
        }).sum::<f64>() * 0.5 * dur;
        prop_assert!((jerk_cost(&traj) - q).abs() <= 1e-9 * q.max(1.0));
    }

    #[test]
    fn wind_cost_is_colinear_projection(w in 0.0f64..10.0, len in 10.0f64..500.0, dur in 1.0f64..60.0) {
        let seg = BernsteinCurve::new(vec![vec![0.0, 0.0, 0.0], vec![len, 0.0, 0.0]], 0.0, dur).unwrap();
        let traj = CompositeTrajectory::new(vec![seg.elevate(8)]).unwrap();
        // nine velocity control points, each len/dur along x
        let expected = -w * 9.0 * len / dur;
        prop_assert!((wind_cost(&traj, &Vec3::new(w, 0.0, 0.0)) - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }
}

fn circuit_cruise(weights: CostWeights) -> PlanProblem {
    let mut m = scenario("circuit");
    m.weights.cruise = weights;
    plan_mission(&m, &opts()).unwrap().into_iter().find(|l| l.leg.mode == FlightMode::Cruise).unwrap().problem
}

#[test]
fn raising_time_weight_never_lengthens_the_plan() {
    let base = circuit_cruise(CostWeights::default());
    let mut last = f64::INFINITY;
    for s1 in [0.1, 1.0, 10.0] {
        let mut p = base.clone();
        p.weights = CostWeights { sigma0: 10.0, sigma1: s1, sigma2: 0.0 };
        let plan = plan_cruise(&p, &converged_opts()).unwrap();
        let t = time_cost(&plan.trajectory);
        assert!(t <= last * (1.0 + 1e-6), "sigma1 {s1}: T {t} after {last}");
        last = t;
    }
}

#[test]
fn raising_jerk_weight_never_raises_jerk() {
    // Continuation: each solve starts from the previous optimum so the sweep
    // stays on one local branch of this non-convex problem. Still air keeps
    // the speed band independent of the seed headings, so reseeding leaves
    // the problem unchanged.
    let mut p = circuit_cruise(CostWeights::default());
    p.env.wind = Vec3::zeros();
    let mut last = f64::INFINITY;
    for s0 in [1.0, 10.0, 100.0] {
        p.weights = CostWeights { sigma0: s0, sigma1: 0.1, sigma2: 0.0 };
        let plan = plan_cruise(&p, &converged_opts()).unwrap();
        let j = jerk_cost(&plan.trajectory);
        assert!(j <= last * (1.0 + 1e-6), "sigma0 {s0}: J {j} after {last}");
        last = j;
        p.seed = Seed::from_trajectory(&plan.trajectory);
    }
}

#[test]
fn cruise_passes_through_seed_waypoints() {
    let p = circuit_cruise(CostWeights::default());
    let plan = plan_cruise(&p, &opts()).unwrap();
    let mut t = 0.0;
    for (k, seg) in plan.trajectory.segments().iter().enumerate() {
        t += seg.duration();
        let q = plan.trajectory.eval(t.min(plan.trajectory.duration())).unwrap();
        let w = p.seed.knots[k + 1].x;
        assert!((q[0] - w.x).hypot(q[1] - w.y) < 5.0);
    }
}

#[test]
fn replan_from_the_reference_is_idempotent() {
    let p = glide(400.0, 10.0, env(Vec3::new(3.0, 0.0, 0.0), vec![]), CostWeights::default()).unwrap();
    let mut r = Replanner::new(p, opts(), 0.0).unwrap();
    let before = r.trajectory().clone();
    let t = 10.0;
    let s = r.reference(t);
    let out = r.replan(t, s.x, s.x_dot, Vec3::new(3.0, 0.0, 0.0)).unwrap();
    assert!(matches!(out, ReplanOutcome::Replanned(_)), "{out:?}");
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let tt = t + (before.duration() - t) * i as f64 / 200.0;
        let a = before.eval(tt).unwrap();
        let b = r.reference(tt).x;
        worst = worst.max((a[0] - b.x).abs()).max((a[1] - b.y).abs()).max((a[2] - b.z).abs());
    }
    assert!(worst < 1e-3, "replan moved the plan by {worst} m");
}

/// Terminal altitude after a mid-glide replan in wind `w_new`.
fn terminal_after_wind_change(w_new: Vec3) -> (f64, f64) {
    let p = glide(400.0, 10.0, env(Vec3::zeros(), vec![]), CostWeights::default()).unwrap();
    let mut r = Replanner::new(p, opts(), 0.0).unwrap();
    let before = r.trajectory().eval(r.trajectory().duration()).unwrap()[2];
    let t = 15.0;
    let s = r.reference(t);
    let out = r.replan(t, s.x, s.x_dot, w_new).unwrap();
    assert!(matches!(out, ReplanOutcome::Replanned(_)), "{out:?}");
    let tr = r.trajectory();
    (before, tr.eval(tr.duration()).unwrap()[2])
}

#[test]
fn tailwind_step_raises_terminal_altitude() {
    let (before, after) = terminal_after_wind_change(Vec3::new(5.0, 0.0, 0.0));
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn headwind_step_lowers_terminal_altitude() {
    let (before, after) = terminal_after_wind_change(Vec3::new(-4.0, 0.0, 0.0));
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn solves_are_bitwise_deterministic() {
    let o = GaussianObstacle { x: 150.0, y: 20.0, height: 100.0, sigma_x: 40.0, sigma_y: 40.0, hard: false };
    let p = glide(300.0, 10.0, env(Vec3::new(2.0, -3.0, 0.0), vec![o]), CostWeights::default()).unwrap();
    let a = solve_problem(&p, &opts()).unwrap();
    let b = solve_problem(&p, &opts()).unwrap();
    assert_eq!(a.decision.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.decision.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn durations_respect_their_floor() {
    let p = circuit_cruise(CostWeights::min_time());
    let nlp = TrajectoryNlp::new(&p).unwrap();
    let plan = plan_cruise(&p, &opts()).unwrap();
    for (seg, s) in plan.trajectory.segments().iter().zip(nlp.summary().segments) {
        assert!(seg.duration() >= s.t_min * (1.0 - 1e-12), "{} < {}", seg.duration(), s.t_min);
    }
}
