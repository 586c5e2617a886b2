use std::io::Write;
use std::path::{Path, PathBuf};

use super::{MissionError, MissionPlan, Result};
use crate::planner::FlightMode;
use crate::simulator::SimRun;

fn mode_str(m: FlightMode) -> &'static str {
    match m {
        FlightMode::Glide => "glide",
        FlightMode::Cruise => "cruise",
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> MissionError + '_ {
    move |source| MissionError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io(path))?;
    f.write_all(body.as_bytes()).map_err(io(path))
}

/// Samples per obstacle contour.
const CONTOUR_POINTS: usize = 72;

/// Writes [`plot_tables`] into `dir` and returns the file paths.
pub fn write_plot_data(dir: &Path, plan: &MissionPlan, run: &SimRun) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::new();
    for (name, body) in plot_tables(plan, run) {
        let path = dir.join(name);
        write_file(&path, &body)?;
        files.push(path);
    }
    Ok(files)
}

/// Plot-ready CSV tables for `run` as `(file name, contents)`: altitude
/// against distance flown, airspeed and ground speed, netto, the planar
/// track, planned trajectories and obstacle contours.
pub fn plot_tables(plan: &MissionPlan, run: &SimRun) -> Vec<(&'static str, String)> {
    let legs = plan.legs();
    let rows = &run.log.rows;

    let mut profile = String::from("t,distance,z,mode\n");
    let mut dist = 0.0;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            dist += (r.x - rows[i - 1].x).hypot(r.y - rows[i - 1].y);
        }
        profile += &format!("{:.3},{:.3},{:.3},{}\n", r.t, dist, r.z, mode_str(r.mode));
    }

    let mut speeds = String::from("t,va,vg,va_ref\n");
    let mut netto = String::from("t,enet\n");
    let mut track = String::from("t,x,y,mode\n");
    for r in rows {
        let va_ref = legs.get(r.leg).map(|l| l.va_ref).unwrap_or(f64::NAN);
        speeds += &format!("{:.3},{:.4},{:.4},{:.4}\n", r.t, r.va, r.vg, va_ref);
        if let Some(e) = r.enet {
            netto += &format!("{:.3},{:.4}\n", r.t, e);
        }
        track += &format!("{:.3},{:.3},{:.3},{}\n", r.t, r.x, r.y, mode_str(r.mode));
    }

    let mut planned = String::from("leg,plan,t,x,y,z\n");
    for rec in &run.legs {
        for (name, traj) in [("initial", &rec.initial_plan), ("final", &rec.final_plan)] {
            for (t, p) in traj.sample(200) {
                planned += &format!("{},{},{:.3},{:.3},{:.3},{:.3}\n", rec.leg.index, name, t, p[0], p[1], p[2]);
            }
        }
    }

    // Safety ring at the glide clearance radius plus 1σ and 2σ ellipses.
    let mut obstacles = String::from("obstacle,contour,x,y\n");
    let va = legs.first().map(|l| l.va_ref).unwrap_or(10.0);
    let d_safe = plan.constraint_set(FlightMode::Glide, va, plan.airframe().g).d_safe;
    for (i, o) in plan.obstacles.iter().enumerate() {
        let r = o.clearance_radius(d_safe);
        for k in 0..=CONTOUR_POINTS {
            let a = std::f64::consts::TAU * k as f64 / CONTOUR_POINTS as f64;
            let (s, c) = a.sin_cos();
            obstacles += &format!("{i},safety,{:.3},{:.3}\n", o.x + r * c, o.y + r * s);
            for n in [1.0, 2.0] {
                obstacles += &format!("{i},{n}sigma,{:.3},{:.3}\n", o.x + n * o.sigma_x * c, o.y + n * o.sigma_y * s);
            }
        }
    }

    vec![
        ("glide_profile.csv", profile),
        ("speeds.csv", speeds),
        ("netto.csv", netto),
        ("track.csv", track),
        ("planned.csv", planned),
        ("obstacles.csv", obstacles),
    ]
}
