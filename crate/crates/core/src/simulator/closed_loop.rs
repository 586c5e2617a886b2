use serde::{Deserialize, Serialize};

use super::{
    step, wind_at, AttitudeLags, LogRow, Result, SensorModel, Sensors, SimError, SimLog, SimState,
    Variometer, WindField,
};
use crate::aero::{Airframe, SinkPolar};
use crate::bernstein::CompositeTrajectory;
use crate::flatness::{flat_to_commands, AttitudeCommand, CommandLimits, FlatState, PidGains, TrackingController, Vec3};
use crate::mission::{Leg, MissionPlan};
use crate::planner::{Environment, FlightMode, ReplanOutcome, Replanner, SolveReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Integration and control step, s.
    pub dt: f64,
    /// Overrides the mission's replan interval; `Some(0.0)` disables.
    pub replan_interval: Option<f64>,
    pub lags: AttitudeLags,
    pub limits: CommandLimits,
    pub gains: PidGains,
    pub solver: SolverOptions,
    /// Time constant of the planner's low-pass wind estimate, s.
    pub wind_filter_tau: f64,
    /// Constant error added to the wind estimate given to the planner.
    pub wind_bias: Vec3,
    /// Spacing of log rows, s.
    pub log_interval: f64,
    /// Position error that counts as a tracking failure, m.
    pub max_tracking_error: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 0.01,
            replan_interval: None,
            lags: AttitudeLags::default(),
            limits: CommandLimits::default(),
            gains: PidGains::default(),
            solver: SolverOptions::default(),
            wind_filter_tau: 2.0,
            wind_bias: Vec3::zeros(),
            log_interval: 0.05,
            max_tracking_error: 200.0,
        }
    }
}

/// What happened on one leg.
#[derive(Debug, Clone, PartialEq)]
pub struct LegRecord {
    pub leg: Leg,
    pub t_start: f64,
    pub t_end: f64,
    /// Every solve on this leg, initial plan first.
    pub solves: Vec<SolveReport>,
    pub replans: usize,
    /// Replans whose result was rejected.
    pub kept: usize,
    pub initial_plan: CompositeTrajectory,
    pub final_plan: CompositeTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub log: SimLog,
    pub legs: Vec<LegRecord>,
    /// Set when the aircraft strayed beyond the tracking bound; the run
    /// stops there.
    pub tracking_failure: Option<String>,
    pub final_state: SimState,
}

/// Flies `mission` leg by leg: plan, track with the flatness controller,
/// replan at the configured interval, and log the onboard netto estimate.
pub fn run_closed_loop(
    mission: &MissionPlan,
    af: &Airframe,
    polar: &SinkPolar,
    field: &WindField,
    sensors: &SensorModel,
    opts: &SimOptions,
) -> Result<SimRun> {
    mission.validate().map_err(|e| SimError::Config(e.to_string()))?;
    field.validate()?;
    opts.gains.validate().map_err(|e| SimError::Config(e.to_string()))?;
    if !(opts.dt > 0.0 && opts.dt <= 0.05) {
        return Err(SimError::TimeStep(opts.dt));
    }
    let interval = opts.replan_interval.unwrap_or(mission.replan_interval);
    let legs = mission.legs();
    let w0 = wind_at(field, 0.0, &legs[0].from);
    let v0 = mission.start_velocity(&legs[0], &w0).map_err(|e| SimError::Config(e.to_string()))?;
    let mut s = SimState::trimmed(0.0, legs[0].from, v0 - w0, w0, af);
    let mut sens = Sensors::new(*sensors)?;
    let mut vario = Variometer::new(sensors, *polar, *af)?;
    let mut wind_est = wind_at(field, 0.0, &s.x);
    let mut log = SimLog::default();
    let mut records = Vec::with_capacity(legs.len());
    let mut controller = TrackingController::new(opts.gains);
    let mut tracking_failure = None;
    let mut next_log = 0.0;
    let mut replan_flag;
    let mut carry = FlatState::default();
    let dt = opts.dt;

    'legs: for leg in &legs {
        let env = Environment {
            airframe: *af,
            polar: *polar,
            wind: wind_est + opts.wind_bias,
            obstacles: mission.obstacles.clone(),
        };
        let start = FlatState { x: s.x, x_dot: s.v, x_ddot: carry.x_ddot, x_dddot: carry.x_dddot };
        let problem =
            mission.leg_problem(leg, start, env).map_err(|e| SimError::Plan { leg: leg.index, source: e })?;
        let mut replanner = Replanner::new(problem, opts.solver, s.t)
            .map_err(|e| SimError::Plan { leg: leg.index, source: e })?;
        let initial_plan = replanner.trajectory().clone();
        let mut solves: Vec<SolveReport> = replanner.last_report().cloned().into_iter().collect();
        let (mut replans, mut kept) = (0, 0);
        let t_start = s.t;
        let mut last_replan = s.t;
        controller.reset();
        replan_flag = 1;
        let powered = leg.mode == FlightMode::Cruise;
        let mut cmd = AttitudeCommand {
            theta_c: s.theta,
            phi_c: s.phi,
            psi_c: s.psi,
            omega_v: Vec3::zeros(),
            euler_rates: Vec3::zeros(),
            thrust: 0.0,
        };
        while replanner.remaining(s.t) > 1e-9 {
            if interval > 0.0 && s.t - last_replan >= interval - 1e-9 {
                last_replan = s.t;
                match replanner
                    .replan(s.t, s.x, s.v, wind_est + opts.wind_bias)
                    .map_err(|e| SimError::Plan { leg: leg.index, source: e })?
                {
                    ReplanOutcome::Replanned(r) => {
                        solves.push(*r);
                        replans += 1;
                        replan_flag = 1;
                    }
                    ReplanOutcome::Kept(r) => {
                        solves.push(*r);
                        kept += 1;
                    }
                    ReplanOutcome::Skipped => {}
                }
            }
            let r = replanner.reference(s.t);
            carry = r;
            let meas = FlatState { x: s.x, x_dot: s.v, ..Default::default() };
            if (r.x - s.x).norm() > opts.max_tracking_error {
                tracking_failure = Some(format!(
                    "leg {}: position error {:.1} m at t = {:.2} s",
                    leg.index,
                    (r.x - s.x).norm(),
                    s.t
                ));
                break 'legs;
            }
            let (acc, jerk) = controller.update(&r, &meas, dt);
            let cmd_state = FlatState { x: s.x, x_dot: s.v, x_ddot: acc, x_dddot: jerk };
            if let Ok(c) = flat_to_commands(&cmd_state, &wind_est, af, &opts.limits, powered) {
                cmd = c;
            }

            let w_true = wind_at(field, s.t, &s.x);
            let va = (s.v - w_true).norm();
            let samples = sens.poll(s.t, va, &s.x);
            if let Some(a) = samples.airspeed {
                vario.push_airspeed(a, s.phi);
            }
            if let Some(p) = samples.position {
                vario.push_altitude(p.z);
            }
            if s.t + 1e-9 >= next_log {
                log.push(LogRow {
                    t: s.t,
                    x: s.x.x,
                    y: s.x.y,
                    z: s.x.z,
                    va,
                    vg: s.v.xy().norm(),
                    vz: s.v.z,
                    enet: vario.netto(),
                    phi: s.phi,
                    theta: s.theta,
                    psi: s.psi,
                    thrust: cmd.thrust,
                    mode: leg.mode,
                    replan: replan_flag,
                    leg: leg.index,
                });
                replan_flag = 0;
                next_log += opts.log_interval;
            }

            s = step(&s, &cmd, field, af, &opts.lags, dt)?;
            let w_new = wind_at(field, s.t, &s.x);
            wind_est += (w_new - wind_est) * (dt / opts.wind_filter_tau).min(1.0);
        }
        records.push(LegRecord {
            leg: *leg,
            t_start,
            t_end: s.t,
            solves,
            replans,
            kept,
            initial_plan,
            final_plan: replanner.trajectory().clone(),
        });
    }
    Ok(SimRun { log, legs: records, tracking_failure, final_state: s })
}
