use serde::{Deserialize, Serialize};

use super::{MissionError, MissionPlan, Result};
use crate::aero::{Airframe, SinkPolar};
use crate::flatness::Vec3;
use crate::planner::{ground_speed_along, FlightMode};
use crate::simulator::{LogRow, SimLog};

/// Glide performance summary. RMSEs are taken over glide rows against the
/// leg's reference airspeed, the polar sink at that airspeed and zero netto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse_va: f64,
    pub rmse_vz: f64,
    pub rmse_enet: f64,
    /// Planar path length flown in glide, m.
    #[serde(rename = "glide_distance_m")]
    pub glide_distance: f64,
    #[serde(rename = "altitude_loss_m")]
    pub altitude_loss: f64,
    /// `glide_distance / altitude_loss`; absent without altitude loss.
    pub glide_ratio: Option<f64>,
    /// Smallest planar distance to an obstacle center; absent without
    /// obstacles.
    #[serde(rename = "min_obstacle_clearance_m")]
    pub min_clearance: Option<f64>,
}

impl Metrics {
    pub const CSV_HEADER: &'static str =
        "rmse_va,rmse_vz,rmse_enet,glide_distance_m,altitude_loss_m,glide_ratio,min_obstacle_clearance_m";

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.rmse_va,
            self.rmse_vz,
            self.rmse_enet,
            self.glide_distance,
            self.altitude_loss,
            opt(self.glide_ratio),
            opt(self.min_clearance)
        )
    }
}

/// Metrics of one glide leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlideMetrics {
    pub leg: usize,
    pub metrics: Metrics,
}

#[derive(Default)]
struct Acc {
    va: (f64, usize),
    vz: (f64, usize),
    enet: (f64, usize),
    distance: f64,
    loss: f64,
}

impl Acc {
    fn finish(&self, min_clearance: Option<f64>) -> Metrics {
        let rms = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { (s / n as f64).sqrt() };
        let loss = self.loss.max(0.0);
        Metrics {
            rmse_va: rms(self.va),
            rmse_vz: rms(self.vz),
            rmse_enet: rms(self.enet),
            glide_distance: self.distance,
            altitude_loss: loss,
            glide_ratio: (loss > 0.0).then(|| self.distance / loss),
            min_clearance,
        }
    }
}

fn min_clearance(rows: &[LogRow], plan: &MissionPlan) -> Option<f64> {
    plan.obstacles
        .iter()
        .flat_map(|o| rows.iter().map(move |r| (r.x - o.x).hypot(r.y - o.y)))
        .reduce(f64::min)
}

/// Aggregate and per-glide metrics of `log` flown against `plan`.
pub fn compute_glide_metrics(log: &SimLog, plan: &MissionPlan) -> Result<(Metrics, Vec<GlideMetrics>)> {
    let af = plan.airframe();
    let polar = plan.polar_spec().polar()?;
    let legs = plan.legs();
    let resolve = |r: &LogRow| {
        legs.get(r.leg)
            .filter(|l| l.mode == r.mode)
            .or_else(|| legs.iter().find(|l| l.mode == r.mode))
            .copied()
    };
    let mut total = Acc::default();
    let mut per: Vec<(usize, Acc, Vec<LogRow>)> = Vec::new();
    let glide_rows: Vec<&LogRow> = log.rows.iter().filter(|r| r.mode == FlightMode::Glide).collect();
    if glide_rows.is_empty() {
        return Err(MissionError::Metrics("log has no glide rows".into()));
    }
    for r in &glide_rows {
        let leg = resolve(r).ok_or_else(|| MissionError::Metrics(format!("row at t = {} matches no glide leg", r.t)))?;
        let sink = polar.sink_rate(&af, leg.va_ref, 0.0).map_err(|e| MissionError::Metrics(e.to_string()))?;
        if per.last().is_none_or(|p| p.0 != r.leg) {
            per.push((r.leg, Acc::default(), Vec::new()));
        }
        let (_, acc, rows) = per.last_mut().expect("pushed above");
        let ev = r.va - leg.va_ref;
        let ez = r.vz + sink;
        for a in [&mut total, &mut *acc] {
            a.va.0 += ev * ev;
            a.va.1 += 1;
            a.vz.0 += ez * ez;
            a.vz.1 += 1;
            if let Some(e) = r.enet {
                a.enet.0 += e * e;
                a.enet.1 += 1;
            }
        }
        if let Some(prev) = rows.last() {
            let d = (r.x - prev.x).hypot(r.y - prev.y);
            acc.distance += d;
            total.distance += d;
        }
        rows.push(**r);
    }
    let mut out = Vec::with_capacity(per.len());
    for (leg, mut acc, rows) in per {
        let loss = rows.first().expect("nonempty").z - rows.last().expect("nonempty").z;
        acc.loss = loss;
        total.loss += loss;
        out.push(GlideMetrics { leg, metrics: acc.finish(min_clearance(&rows, plan)) });
    }
    Ok((total.finish(min_clearance(&log.rows, plan)), out))
}

pub fn compute_metrics(log: &SimLog, plan: &MissionPlan) -> Result<Metrics> {
    compute_glide_metrics(log, plan).map(|(m, _)| m)
}

/// Steady straight-glide ratio over ground at `va_ref` along unit
/// direction `dir` in wind `w`.
pub fn predicted_glide_ratio(af: &Airframe, polar: &SinkPolar, va_ref: f64, w: &Vec3, dir: [f64; 2]) -> Option<f64> {
    let sink = polar.sink_rate(af, va_ref, 0.0).ok()?;
    let va_h = (va_ref * va_ref - sink * sink).sqrt();
    let vg = ground_speed_along(dir, w, va_h)?;
    let descent = sink - w.z;
    (descent > 0.0).then(|| vg / descent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> MissionPlan {
        MissionPlan::parse(
            r#"
[[waypoints]]
x = 0.0
y = 0.0
z = 120.0
[[waypoints]]
x = 500.0
y = 0.0
z = 0.0
mode = "glide"
va_ref = 10.0
"#,
        )
        .unwrap()
    }

    fn synthetic(plan: &MissionPlan, va_offset: f64, distance: f64, ratio: f64) -> SimLog {
        let af = plan.airframe();
        let polar = plan.polar_spec().polar().unwrap();
        let sink = polar.sink_rate(&af, 10.0, 0.0).unwrap();
        let n = 1001;
        let rows = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                LogRow {
                    t: 0.1 * i as f64,
                    x: distance * f,
                    y: 0.0,
                    z: 120.0 - distance / ratio * f,
                    va: 10.0 + va_offset,
                    vg: 10.0,
                    vz: -sink,
                    enet: Some(0.0),
                    phi: 0.0,
                    theta: 0.0,
                    psi: 0.0,
                    thrust: 0.0,
                    mode: FlightMode::Glide,
                    replan: 0,
                    leg: 0,
                }
            })
            .collect();
        SimLog { rows }
    }

    #[test]
    fn reference_log_has_zero_error() {
        let p = plan();
        let m = compute_metrics(&synthetic(&p, 0.0, 400.0, 8.0), &p).unwrap();
        assert_eq!((m.rmse_va, m.rmse_enet), (0.0, 0.0));
        assert!(m.rmse_vz < 1e-12);
    }

    #[test]
    fn constant_airspeed_offset() {
        let p = plan();
        let m = compute_metrics(&synthetic(&p, 1.0, 400.0, 8.0), &p).unwrap();
        assert!((m.rmse_va - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glide_ratio_from_distance_and_loss() {
        let p = plan();
        let m = compute_metrics(&synthetic(&p, 0.0, 489.77, 9.83), &p).unwrap();
        assert!((m.glide_distance - 489.77).abs() < 1e-9);
        assert!((m.altitude_loss - 489.77 / 9.83).abs() < 1e-9);
        assert!((m.altitude_loss - 49.8).abs() < 0.1);
        assert!((m.glide_ratio.unwrap() - 9.83).abs() < 1e-9);
        assert!(m.min_clearance.is_none());
    }

    #[test]
    fn no_glide_rows_is_an_error() {
        let p = plan();
        let mut log = synthetic(&p, 0.0, 100.0, 8.0);
        for r in &mut log.rows {
            r.mode = FlightMode::Cruise;
        }
        assert!(compute_metrics(&log, &p).is_err());
    }

    #[test]
    fn still_air_prediction_is_polar_ratio() {
        let af = Airframe::default();
        let polar = SinkPolar::from_airframe(&af);
        let v = polar.best_glide_airspeed(&af);
        let r = predicted_glide_ratio(&af, &polar, v, &Vec3::zeros(), [1.0, 0.0]).unwrap();
        let sink = polar.sink_rate(&af, v, 0.0).unwrap();
        assert!((r - (v * v - sink * sink).sqrt() / sink).abs() < 1e-12);
        let tail = predicted_glide_ratio(&af, &polar, v, &Vec3::new(5.0, 0.0, 0.0), [1.0, 0.0]).unwrap();
        assert!(tail > r);
    }
}
