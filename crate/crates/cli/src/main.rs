use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use glideplan::aero::{fit_polar, read_polar_csv, Airframe};
use glideplan::bernstein::CompositeRecord;
use glideplan::flatness::Vec3;
use glideplan::mission::{
    compute_glide_metrics, plan_mission, plot_tables, run_mission, sweep, GlideMetrics, Metrics,
    MissionPlan, SweepCase,
};
use glideplan::planner::{NlpSummary, SolveReport, SolverOptions, TrajectoryNlp};
use glideplan::simulator::{SimLog, SimOptions};

mod staging;

use staging::Staged;

/// Energy-aware glider trajectory planning and closed-loop simulation.
#[derive(Parser)]
#[command(name = "glideplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit sink-polar constants P and B to a CSV of (va_mps, phi_rad, vz_mps).
    FitPolar {
        csv: PathBuf,
        /// Airframe TOML; defaults to the reference airframe.
        #[arg(long)]
        airframe: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan every leg of a mission open loop and dump the trajectories.
    Plan {
        mission: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit constraint dimensions and bounds of every leg.
        #[arg(long)]
        dump_nlp: bool,
    },
    /// Fly a mission in closed loop and report glide metrics.
    Simulate {
        mission: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_nlp: bool,
    },
    /// Compute metrics of a recorded log against its mission.
    Evaluate {
        log: PathBuf,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of wind-weight and steady-wind cases in parallel.
    Sweep {
        mission: PathBuf,
        /// Wind-cost weights, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 5.0])]
        sigma2: Vec<f64>,
        /// Steady wind speeds, m/s, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0])]
        wind_speed: Vec<f64>,
        /// Direction the wind blows toward, degrees counter-clockwise from +x.
        #[arg(long, default_value_t = 0.0)]
        wind_dir: f64,
        /// Sensor seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
        seeds: Vec<u64>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Sensor noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration and control step, s.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Seconds between replans; 0 disables. Defaults to the mission value.
    #[arg(long)]
    replan_interval: Option<f64>,
}

impl SimArgs {
    fn options(&self) -> Result<SimOptions> {
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            bail!("--dt must be in (0, 0.05], got {}", self.dt);
        }
        if let Some(r) = self.replan_interval {
            if !(r >= 0.0 && r.is_finite()) {
                bail!("--replan-interval must be nonnegative, got {r}");
            }
        }
        Ok(SimOptions { dt: self.dt, replan_interval: self.replan_interval, ..Default::default() })
    }
}

fn load_mission(path: &Path) -> Result<MissionPlan> {
    MissionPlan::from_file(path).with_context(|| format!("mission {}", path.display()))
}

#[derive(Serialize)]
struct PolarOut {
    airframe: Airframe,
    polar: PolarSummary,
}

#[derive(Serialize)]
struct PolarSummary {
    p: f64,
    b: f64,
    rms_mps: f64,
    samples: usize,
    best_glide_airspeed_mps: f64,
    best_glide_ratio: f64,
}

fn fit_polar_cmd(csv: &Path, airframe: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let af = match airframe {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("airframe {}", p.display()))?;
            let af: Airframe = toml::from_str(&text).with_context(|| format!("airframe {}", p.display()))?;
            af.validate()?;
            af
        }
        None => Airframe::default(),
    };
    let samples = read_polar_csv(csv).with_context(|| format!("polar data {}", csv.display()))?;
    let fit = fit_polar(&af, &samples)?;
    let summary = PolarOut {
        airframe: af,
        polar: PolarSummary {
            p: fit.polar.p,
            b: fit.polar.b,
            rms_mps: fit.rms,
            samples: samples.len(),
            best_glide_airspeed_mps: fit.polar.best_glide_airspeed(&af),
            best_glide_ratio: fit.polar.best_glide_ratio(),
        },
    };
    let text = toml::to_string(&summary)?;
    print!("{text}");
    if let Some(dir) = out {
        let mut s = Staged::new();
        s.add("polar.toml", text);
        s.commit(dir)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LegDump {
    leg: usize,
    mode: glideplan::planner::FlightMode,
    report: SolveReport,
    trajectory: CompositeRecord,
}

fn nlp_dump(problems: &[(usize, &glideplan::planner::PlanProblem)]) -> Result<String> {
    let mut out: Vec<(usize, NlpSummary)> = Vec::new();
    for (leg, p) in problems {
        out.push((*leg, TrajectoryNlp::new(p)?.summary()));
    }
    Ok(serde_json::to_string_pretty(&out)?)
}

fn plan_cmd(mission: &Path, out: Option<&Path>, dump_nlp: bool) -> Result<()> {
    let plan = load_mission(mission)?;
    let legs = plan_mission(&plan, &SolverOptions::default())?;
    for l in &legs {
        let r = &l.plan.report;
        println!(
            "leg {} {:?}: {} segments, {:.1} s, cost {:.4} (jerk {:.4}), solve {:.3} s, {} iterations",
            l.leg.index,
            l.leg.mode,
            l.plan.trajectory.segments().len(),
            l.plan.trajectory.duration(),
            r.cost.weighted,
            r.cost.jerk,
            r.wall_time_s,
            r.inner_iterations
        );
    }
    if let Some(dir) = out {
        let dump: Vec<LegDump> = legs
            .iter()
            .map(|l| LegDump {
                leg: l.leg.index,
                mode: l.leg.mode,
                report: l.plan.report.clone(),
                trajectory: l.plan.trajectory.clone().into(),
            })
            .collect();
        let mut s = Staged::new();
        s.add("plan.json", serde_json::to_string_pretty(&dump)?);
        if dump_nlp {
            let problems: Vec<_> = legs.iter().map(|l| (l.leg.index, &l.problem)).collect();
            s.add("nlp.json", nlp_dump(&problems)?);
        }
        s.commit(dir)?;
    } else if dump_nlp {
        let problems: Vec<_> = legs.iter().map(|l| (l.leg.index, &l.problem)).collect();
        println!("{}", nlp_dump(&problems)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsOut<'a> {
    metrics: &'a Metrics,
    glides: &'a [GlideMetrics],
}

fn metrics_text(metrics: &Metrics, glides: &[GlideMetrics]) -> Result<String> {
    Ok(toml::to_string(&MetricsOut { metrics, glides })?)
}

fn metrics_csv(metrics: &Metrics) -> String {
    format!("{}\n{}\n", Metrics::CSV_HEADER, metrics.csv_line())
}

#[derive(Serialize)]
struct SolveDump<'a> {
    leg: usize,
    t_start: f64,
    t_end: f64,
    replans: usize,
    kept: usize,
    solves: &'a [SolveReport],
}

fn simulate_cmd(mission: &Path, sim: &SimArgs, out: Option<&Path>, dump_nlp: bool) -> Result<()> {
    let plan = load_mission(mission)?;
    let opts = sim.options()?;
    let output = run_mission(&plan, &opts, sim.seed)?;
    let text = metrics_text(&output.metrics, &output.glides)?;
    print!("{text}");
    if let Some(dir) = out {
        let mut s = Staged::new();
        s.add("log.csv", output.run.log.to_csv_string()?);
        s.add("metrics.toml", text);
        s.add("metrics.csv", metrics_csv(&output.metrics));
        let solves: Vec<SolveDump> = output
            .run
            .legs
            .iter()
            .map(|l| SolveDump {
                leg: l.leg.index,
                t_start: l.t_start,
                t_end: l.t_end,
                replans: l.replans,
                kept: l.kept,
                solves: &l.solves,
            })
            .collect();
        s.add("solves.json", serde_json::to_string_pretty(&solves)?);
        for (name, body) in plot_tables(&plan, &output.run) {
            s.add(&format!("plot/{name}"), body);
        }
        if dump_nlp {
            let legs = plan_mission(&plan, &SolverOptions::default())?;
            let problems: Vec<_> = legs.iter().map(|l| (l.leg.index, &l.problem)).collect();
            s.add("nlp.json", nlp_dump(&problems)?);
        }
        s.commit(dir)?;
    }
    Ok(())
}

fn evaluate_cmd(log: &Path, mission: &Path, out: Option<&Path>) -> Result<()> {
    let plan = load_mission(mission)?;
    let log = SimLog::read_file(log).with_context(|| format!("log {}", log.display()))?;
    let (metrics, glides) = compute_glide_metrics(&log, &plan)?;
    let text = metrics_text(&metrics, &glides)?;
    print!("{text}");
    if let Some(dir) = out {
        let mut s = Staged::new();
        s.add("metrics.toml", text);
        s.add("metrics.csv", metrics_csv(&metrics));
        s.commit(dir)?;
    }
    Ok(())
}

fn sweep_cmd(
    mission: &Path,
    sigma2: &[f64],
    wind_speed: &[f64],
    wind_dir: f64,
    seeds: &[u64],
    sim: &SimArgs,
    out: Option<&Path>,
) -> Result<()> {
    let plan = load_mission(mission)?;
    let opts = sim.options()?;
    if sigma2.iter().any(|s| !(*s >= 0.0)) {
        bail!("--sigma2 values must be nonnegative");
    }
    if wind_speed.iter().any(|w| !(*w >= 0.0)) {
        bail!("--wind-speed values must be nonnegative");
    }
    let (sd, cd) = wind_dir.to_radians().sin_cos();
    let mut cases = Vec::new();
    for &s2 in sigma2 {
        for &w in wind_speed {
            for &seed in seeds {
                cases.push(SweepCase { sigma2: s2, wind: Vec3::new(w * cd, w * sd, 0.0), seed });
            }
        }
    }
    let results = sweep(&plan, &cases, &opts);
    let mut table = format!("{},{}\n", SweepCase::CSV_HEADER, Metrics::CSV_HEADER);
    for (c, r) in cases.iter().zip(results) {
        let m = r.with_context(|| format!("sweep case {}", c.csv_prefix()))?;
        table += &format!("{},{}\n", c.csv_prefix(), m.csv_line());
    }
    print!("{table}");
    if let Some(dir) = out {
        let mut s = Staged::new();
        s.add("sweep.csv", table);
        s.commit(dir)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitPolar { csv, airframe, out } => fit_polar_cmd(&csv, airframe.as_deref(), out.as_deref()),
        Command::Plan { mission, out, dump_nlp } => plan_cmd(&mission, out.as_deref(), dump_nlp),
        Command::Simulate { mission, sim, out, dump_nlp } => simulate_cmd(&mission, &sim, out.as_deref(), dump_nlp),
        Command::Evaluate { log, mission, out } => evaluate_cmd(&log, &mission, out.as_deref()),
        Command::Sweep { mission, sigma2, wind_speed, wind_dir, seeds, sim, out } => {
            sweep_cmd(&mission, &sigma2, &wind_speed, wind_dir, &seeds, &sim, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
