use serde::{Deserialize, Serialize};

use super::costs::{gram, segment_jerk, segment_wind};
use super::solver::{Multipliers, Nlp};
use super::{
    ground_speed_along, CostBreakdown, FlightMode, PlanProblem, PlannerError, Result,
};
use crate::autodiff::{gradient, Real, Var};
use crate::bernstein::{kernel, BernsteinCurve, CompositeTrajectory};
use crate::flatness::{FlatState, Vec3};

/// Constraint families. Endpoint and continuity conditions are satisfied
/// by construction and only appear in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Endpoint,
    Continuity,
    HeadingRate,
    GroundSpeed,
    SinkRate,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SinkBand {
    c0: f64,
    c1: f64,
    wz: f64,
    band: f64,
    band_nominal: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct SegmentBounds {
    omega: f64,
    omega_nominal: f64,
    lo2: f64,
    hi2: f64,
    lo2_nominal: f64,
    hi2_nominal: f64,
    speed_scale: f64,
    heading_scale: f64,
    sink: Option<SinkBand>,
    t_min: f64,
    t_nom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ObstacleRow {
    x: f64,
    y: f64,
    radius: f64,
    radius_tight: f64,
}

/// Problem dimensions and row bounds, as emitted for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSummary {
    pub mode: FlightMode,
    pub n_vars: usize,
    pub n_segments: usize,
    pub degree: usize,
    pub rows: Vec<FamilyRows>,
    pub segments: Vec<SegmentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRows {
    pub family: Family,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub omega_max: f64,
    pub speed_sq_lower: f64,
    pub speed_sq_upper: f64,
    pub sink_center: Option<f64>,
    pub sink_band: Option<f64>,
    pub t_min: f64,
}

/// Post-solve check of every family on dense samples against the nominal
/// (untightened) bounds. Positive excess values are violations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseCheck {
    pub heading_excess: f64,
    pub speed_sq_excess: f64,
    /// Glide problems only.
    pub sink_excess: Option<f64>,
    /// Problems with obstacles only.
    pub clearance_excess: Option<f64>,
    pub min_clearance: Option<f64>,
    pub junction_mismatch: f64,
}

impl DenseCheck {
    pub fn satisfied(&self, tol: f64) -> bool {
        self.heading_excess <= tol
            && self.speed_sq_excess <= tol
            && self.sink_excess.is_none_or(|v| v <= tol)
            && self.clearance_excess.is_none_or(|v| v <= tol)
            && self.junction_mismatch <= 1e-6
    }
}

const POS: usize = 0;
const VEL: usize = 3;
const ACC: usize = 6;
const JERK: usize = 9;

/// The assembled optimization problem.
#[derive(Debug, Clone)]
pub struct TrajectoryNlp {
    degree: usize,
    mode: FlightMode,
    knot_base: Vec<[f64; 12]>,
    knot_index: Vec<[Option<usize>; 12]>,
    interior_base: Vec<Vec<Vec3>>,
    interior_index: Vec<usize>,
    duration_index: Vec<usize>,
    scales: [f64; 4],
    bounds: Vec<SegmentBounds>,
    obstacles: Vec<ObstacleRow>,
    wind: Vec3,
    weights: [f64; 3],
    f_scale: f64,
    gram: Vec<Vec<f64>>,
    families: Vec<Family>,
    n_vars: usize,
    start: FlatState,
}

fn state_array(s: &FlatState) -> [f64; 12] {
    let mut a = [0.0; 12];
    for k in 0..3 {
        a[POS + k] = s.x[k];
        a[VEL + k] = s.x_dot[k];
        a[ACC + k] = s.x_ddot[k];
        a[JERK + k] = s.x_dddot[k];
    }
    a
}

fn planar_turn_rate(v: &Vec3, a: &Vec3) -> f64 {
    let den = v.x * v.x + v.y * v.y;
    if den < 1e-9 {
        0.0
    } else {
        (v.x * a.y - a.x * v.y) / den
    }
}

fn scaled<S: Real>(v: &[S], s: S) -> Vec<S> {
    v.iter().map(|x| *x * s).collect()
}

impl TrajectoryNlp {
    pub fn new(p: &PlanProblem) -> Result<Self> {
        p.validate()?;
        let m = p.seed.durations.len();
        let degree = p.degree;
        let seed = &p.seed;
        let c = &p.constraints;

        // scaling by chord length and nominal duration
        let chords: Vec<f64> = (0..m)
            .map(|j| (seed.knots[j + 1].x - seed.knots[j].x).xy().norm())
            .collect();
        let l_ref = (chords.iter().sum::<f64>() / m as f64).max(10.0);
        let t_ref = (seed.durations.iter().sum::<f64>() / m as f64).max(0.5);
        let scales = [l_ref, l_ref / t_ref, l_ref / t_ref.powi(2), l_ref / t_ref.powi(3)];

        let mut n_vars = 0;
        let mut knot_index = Vec::with_capacity(m + 1);
        for f in &p.freedom {
            let mut idx = [None; 12];
            let mut free = [false; 12];
            for k in 0..3 {
                free[POS + k] = f.position[k];
                free[VEL + k] = f.velocity;
                free[ACC + k] = f.acceleration;
                free[JERK + k] = f.jerk;
            }
            for (slot, fr) in idx.iter_mut().zip(free) {
                if fr {
                    *slot = Some(n_vars);
                    n_vars += 1;
                }
            }
            knot_index.push(idx);
        }
        let mut interior_index = Vec::with_capacity(m);
        for _ in 0..m {
            interior_index.push(n_vars);
            n_vars += 3 * (degree - 7);
        }
        let mut duration_index = Vec::with_capacity(m);
        for _ in 0..m {
            duration_index.push(n_vars);
            n_vars += 1;
        }

        let wind = p.env.wind;
        let vh = p.horizontal_airspeed();
        let margin = c.margin;
        let mut bounds = Vec::with_capacity(m);
        for j in 0..m {
            let a = &seed.knots[j];
            let b = &seed.knots[j + 1];
            let chord = (b.x - a.x).xy();
            let mut headings = Vec::new();
            if chord.norm() > 1e-6 {
                headings.push(chord / chord.norm());
            }
            for v in [a.x_dot.xy(), b.x_dot.xy()] {
                if v.norm() > 1e-6 {
                    headings.push(v / v.norm());
                }
            }
            if headings.is_empty() {
                return Err(PlannerError::Invalid(format!("segment {j} has no direction")));
            }
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for u in &headings {
                let vg = ground_speed_along([u.x, u.y], &wind, vh).ok_or_else(|| {
                    PlannerError::Infeasible(format!("segment {j}: wind exceeds airspeed"))
                })?;
                lo = lo.min(vg);
                hi = hi.max(vg);
            }
            let lo2_nominal = (lo * lo - c.xi).max(0.0);
            let hi2_nominal = hi * hi + c.xi;
            let shrink = margin * (hi2_nominal - lo2_nominal) / 2.0;
            let vg_mid = 0.5 * (lo + hi);
            let sink = (p.mode == FlightMode::Glide).then(|| {
                let af = &p.env.airframe;
                let cl = af.lift_coefficient(p.va_ref);
                SinkBand {
                    c0: p.sink_nominal(),
                    c1: p.va_ref.powi(3) * p.env.polar.b * cl / (af.g * af.g),
                    wz: wind.z,
                    band: c.vz_band * (1.0 - margin),
                    band_nominal: c.vz_band,
                }
            });
            let t_min = chord.norm() / (c.t_min_factor * (p.va_ref + wind.xy().norm()));
            bounds.push(SegmentBounds {
                omega: c.omega_max * (1.0 - margin),
                omega_nominal: c.omega_max,
                lo2: lo2_nominal + shrink,
                hi2: hi2_nominal - shrink,
                lo2_nominal,
                hi2_nominal,
                speed_scale: 1.0 / (2.0 * vg_mid),
                heading_scale: 1.0 / (vg_mid * vg_mid),
                sink,
                t_min,
                t_nom: seed.durations[j].max(t_min).max(0.1),
            });
        }
        if p.widen_first {
            let s = &seed.knots[0];
            let b = &mut bounds[0];
            let w0 = planar_turn_rate(&s.x_dot, &s.x_ddot).abs();
            if w0 * 1.05 + 0.01 > b.omega {
                b.omega = w0 * 1.05 + 0.01;
                b.omega_nominal = b.omega_nominal.max(b.omega);
            }
            let s0 = s.x_dot.xy().norm_squared();
            if s0 * 0.98 < b.lo2 {
                b.lo2 = s0 * 0.98;
                b.lo2_nominal = b.lo2_nominal.min(b.lo2);
            }
            if s0 * 1.02 > b.hi2 {
                b.hi2 = s0 * 1.02;
                b.hi2_nominal = b.hi2_nominal.max(b.hi2);
            }
            if let Some(sb) = b.sink.as_mut() {
                let dev = ((-s.x_dot.z + sb.wz) - (sb.c0 + sb.c1 * w0 * w0)).abs();
                if dev * 1.05 + 0.01 > sb.band {
                    sb.band = dev * 1.05 + 0.01;
                    sb.band_nominal = sb.band_nominal.max(sb.band);
                }
            }
        }

        let obstacles = p
            .env
            .obstacles
            .iter()
            .map(|o| {
                let r = o.clearance_radius(c.d_safe);
                ObstacleRow { x: o.x, y: o.y, radius: r, radius_tight: r * (1.0 + margin) }
            })
            .collect();

        let mut nlp = TrajectoryNlp {
            degree,
            mode: p.mode,
            knot_base: seed.knots.iter().map(state_array).collect(),
            knot_index,
            interior_base: seed.interior.clone(),
            interior_index,
            duration_index,
            scales,
            bounds,
            obstacles,
            wind,
            weights: [p.weights.sigma0, p.weights.sigma1, p.weights.sigma2],
            f_scale: 1.0,
            gram: gram(degree - 3),
            families: Vec::new(),
            n_vars,
            start: seed.knots[0],
        };
        let z0 = nlp.initial_point();
        let (_, rows, costs) = nlp.eval_generic::<f64>(&z0, true);
        nlp.families = rows.into_iter().map(|(f, _)| f).collect();
        let w = nlp.weights;
        nlp.f_scale = (w[0] * costs[0].abs() + w[1] * costs[1] + w[2] * costs[2].abs()).max(1.0);
        Ok(nlp)
    }

    pub fn n_rows(&self) -> usize {
        self.families.len()
    }

    pub fn row_families(&self) -> &[Family] {
        &self.families
    }

    pub fn initial_point(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_vars];
        for (j, b) in self.bounds.iter().enumerate() {
            let t = (self.seed_duration(j) - b.t_min) / b.t_nom;
            z[self.duration_index[j]] = t.max(0.01).sqrt();
        }
        z
    }

    fn seed_duration(&self, j: usize) -> f64 {
        // t_nom holds the seed duration unless it was below t_min
        self.bounds[j].t_nom
    }

    fn knot<S: Real>(&self, z: &[S], k: usize) -> [S; 12] {
        let mut out = [S::zero(); 12];
        for c in 0..12 {
            let base = self.knot_base[k][c];
            out[c] = match self.knot_index[k][c] {
                Some(i) => z[i] * self.scales[c / 3] + base,
                None => S::from_f64(base),
            };
        }
        out
    }

    fn duration<S: Real>(&self, z: &[S], j: usize) -> S {
        let b = &self.bounds[j];
        let s = z[self.duration_index[j]];
        s * s * b.t_nom + b.t_min
    }

    /// Control points per axis of segment `j`.
    fn segment_axes<S: Real>(&self, z: &[S], j: usize, t: S) -> [Vec<S>; 3] {
        let n = self.degree;
        let nf = n as f64;
        let a = self.knot(z, j);
        let b = self.knot(z, j + 1);
        let c1 = t / nf;
        let c2 = t * t / (nf * (nf - 1.0));
        let c3 = t * t * t / (nf * (nf - 1.0) * (nf - 2.0));
        let base = self.interior_index[j];
        std::array::from_fn(|k| {
            let (x, v, ac, jk) = (a[POS + k], a[VEL + k], a[ACC + k], a[JERK + k]);
            let (xe, ve, ae, je) = (b[POS + k], b[VEL + k], b[ACC + k], b[JERK + k]);
            let mut pts = Vec::with_capacity(n + 1);
            pts.push(x);
            pts.push(x + v * c1);
            pts.push(x + v * c1 * 2.0 + ac * c2);
            pts.push(x + v * c1 * 3.0 + ac * c2 * 3.0 + jk * c3);
            for (i, p) in self.interior_base[j].iter().enumerate() {
                pts.push(z[base + 3 * i + k] * self.scales[0] + p[k]);
            }
            pts.push(xe - ve * c1 * 3.0 + ae * c2 * 3.0 - je * c3);
            pts.push(xe - ve * c1 * 2.0 + ae * c2);
            pts.push(xe - ve * c1);
            pts.push(xe);
            pts
        })
    }

    /// Scaled objective, rows tagged by family, and raw costs `[J, T, W]`.
    #[allow(clippy::type_complexity)]
    fn eval_generic<S: Real>(&self, z: &[S], with_obj: bool) -> (S, Vec<(Family, S)>, [S; 3]) {
        let m = self.bounds.len();
        let nf = self.degree as f64;
        let mut rows = Vec::new();
        let (mut jerk, mut time, mut wind) = (S::zero(), S::zero(), S::zero());
        for j in 0..m {
            let b = &self.bounds[j];
            let t = self.duration(z, j);
            let axes = self.segment_axes(z, j, t);
            if with_obj {
                if self.weights[0] != 0.0 {
                    jerk = jerk + segment_jerk(&axes, t, &self.gram);
                }
                time = time + t;
                wind = wind + segment_wind(&axes, t, &self.wind);
            }
            let r = t.recip();
            let d1: Vec<Vec<S>> = axes.iter().map(|a| kernel::difference(a)).collect();
            let d2: Vec<Vec<S>> = d1.iter().map(|a| kernel::difference(a)).collect();
            let vs = r * nf;
            let as_ = r * r * (nf * (nf - 1.0));
            let v: Vec<Vec<S>> = d1.iter().map(|d| scaled(d, vs)).collect();
            let a: Vec<Vec<S>> = d2.iter().map(|d| scaled(d, as_)).collect();
            let num: Vec<S> = {
                let p = kernel::multiply(&v[0], &a[1]);
                let q = kernel::multiply(&a[0], &v[1]);
                p.into_iter().zip(q).map(|(x, y)| x - y).collect()
            };
            let den: Vec<S> = {
                let p = kernel::multiply(&v[0], &v[0]);
                let q = kernel::multiply(&v[1], &v[1]);
                p.into_iter().zip(q).map(|(x, y)| x + y).collect()
            };
            let num_e = kernel::elevate(&num, den.len() - num.len());
            for (nu, de) in num_e.iter().zip(&den) {
                let bound = *de * b.omega;
                rows.push((Family::HeadingRate, (*nu - bound) * b.heading_scale));
                rows.push((Family::HeadingRate, (-*nu - bound) * b.heading_scale));
            }
            for de in &den {
                rows.push((Family::GroundSpeed, (*de - b.hi2) * b.speed_scale));
                rows.push((Family::GroundSpeed, (-*de + b.lo2) * b.speed_scale));
            }
            if let Some(sb) = &b.sink {
                let den2 = kernel::multiply(&den, &den);
                let pz = kernel::multiply(&den2, &v[2]);
                let den2e = kernel::elevate(&den2, pz.len() - den2.len());
                let num2 = kernel::multiply(&num, &num);
                let num2e = kernel::elevate(&num2, pz.len() - num2.len());
                let s = b.heading_scale * b.heading_scale;
                for i in 0..pz.len() {
                    let upper = -pz[i] + den2e[i] * (sb.wz - sb.c0 - sb.band) - num2e[i] * sb.c1;
                    let lower = pz[i] + den2e[i] * (sb.c0 - sb.wz - sb.band) + num2e[i] * sb.c1;
                    rows.push((Family::SinkRate, upper * s));
                    rows.push((Family::SinkRate, lower * s));
                }
            }
            for o in &self.obstacles {
                let dx: Vec<S> = axes[0].iter().map(|p| *p - o.x).collect();
                let dy: Vec<S> = axes[1].iter().map(|p| *p - o.y).collect();
                let d2 = kernel::add(&kernel::multiply(&dx, &dx), &kernel::multiply(&dy, &dy));
                let s = 1.0 / (2.0 * o.radius);
                for d in d2 {
                    rows.push((Family::Obstacle, (-d + o.radius_tight * o.radius_tight) * s));
                }
            }
        }
        let w = self.weights;
        let obj = (jerk * w[0] + time * w[1] + wind * w[2]) / self.f_scale;
        (obj, rows, [jerk, time, wind])
    }

    /// Trajectory encoded by decision vector `z`.
    pub fn decode(&self, z: &[f64]) -> CompositeTrajectory {
        let mut t0 = 0.0;
        let mut segs = Vec::with_capacity(self.bounds.len());
        for j in 0..self.bounds.len() {
            let t = self.duration(z, j);
            let axes = self.segment_axes(z, j, t);
            segs.push(BernsteinCurve::from_axes(&axes, t0, t0 + t).expect("positive duration"));
            t0 += t;
        }
        CompositeTrajectory::new(segs).expect("contiguous segments")
    }

    pub fn costs(&self, z: &[f64]) -> CostBreakdown {
        let (obj, _, c) = self.eval_generic::<f64>(z, true);
        CostBreakdown { jerk: c[0], time: c[1], wind: c[2], weighted: obj * self.f_scale }
    }

    /// Largest scaled row value per family (negative means slack).
    pub fn family_violations(&self, z: &[f64]) -> Vec<(Family, f64)> {
        let (_, rows, _) = self.eval_generic::<f64>(z, false);
        let mut out: Vec<(Family, f64)> = Vec::new();
        for (f, v) in rows {
            match out.iter_mut().find(|(g, _)| *g == f) {
                Some(e) => e.1 = e.1.max(v),
                None => out.push((f, v)),
            }
        }
        let traj = self.decode(z);
        let s = FlatState::from_trajectory(&traj, 0.0);
        let endpoint = [
            (s.x - self.start.x).norm(),
            (s.x_dot - self.start.x_dot).norm(),
            (s.x_ddot - self.start.x_ddot).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        out.insert(0, (Family::Continuity, traj.junction_mismatch(3)));
        out.insert(0, (Family::Endpoint, endpoint));
        out
    }

    pub fn summary(&self) -> NlpSummary {
        let mut rows: Vec<FamilyRows> = Vec::new();
        for f in &self.families {
            match rows.iter_mut().find(|r| r.family == *f) {
                Some(r) => r.count += 1,
                None => rows.push(FamilyRows { family: *f, count: 1 }),
            }
        }
        NlpSummary {
            mode: self.mode,
            n_vars: self.n_vars,
            n_segments: self.bounds.len(),
            degree: self.degree,
            rows,
            segments: self
                .bounds
                .iter()
                .map(|b| SegmentSummary {
                    omega_max: b.omega,
                    speed_sq_lower: b.lo2,
                    speed_sq_upper: b.hi2,
                    sink_center: b.sink.map(|s| s.c0),
                    sink_band: b.sink.map(|s| s.band),
                    t_min: b.t_min,
                })
                .collect(),
        }
    }

    /// Checks every family at `samples` points per segment.
    pub fn dense_check(&self, traj: &CompositeTrajectory, samples: usize) -> DenseCheck {
        let mut out = DenseCheck {
            heading_excess: f64::NEG_INFINITY,
            speed_sq_excess: f64::NEG_INFINITY,
            sink_excess: None,
            clearance_excess: None,
            min_clearance: None,
            junction_mismatch: traj.junction_mismatch(3),
        };
        for (j, seg) in traj.segments().iter().enumerate() {
            let b = &self.bounds[j];
            for i in 0..samples {
                let t = seg.t0() + seg.duration() * i as f64 / (samples - 1) as f64;
                let s = FlatState::from_trajectory(traj, t);
                let w = planar_turn_rate(&s.x_dot, &s.x_ddot);
                out.heading_excess = out.heading_excess.max(w.abs() - b.omega_nominal);
                let v2 = s.x_dot.xy().norm_squared();
                out.speed_sq_excess =
                    out.speed_sq_excess.max(v2 - b.hi2_nominal).max(b.lo2_nominal - v2);
                if let Some(sb) = &b.sink {
                    let sink = -s.x_dot.z + sb.wz;
                    let nominal = sb.c0 + sb.c1 * w * w;
                    let e = (sink - nominal).abs() - sb.band_nominal;
                    out.sink_excess = Some(out.sink_excess.map_or(e, |m| m.max(e)));
                }
                for o in &self.obstacles {
                    let d = (s.x.x - o.x).hypot(s.x.y - o.y);
                    let e = o.radius - d;
                    out.clearance_excess = Some(out.clearance_excess.map_or(e, |m| m.max(e)));
                    out.min_clearance = Some(out.min_clearance.map_or(d, |m: f64| m.min(d)));
                }
            }
        }
        out
    }
}

impl Nlp for TrajectoryNlp {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (f, rows, _) = self.eval_generic::<f64>(z, true);
        (f, Vec::new(), rows.into_iter().map(|(_, v)| v).collect())
    }

    fn merit_gradient(&self, z: &[f64], mult: &Multipliers) -> (f64, Vec<f64>) {
        let mut constant = 0.0;
        let (val, grad) = gradient(z, |v: &[Var]| {
            let (f, rows, _) = self.eval_generic(v, true);
            let mut acc = f;
            for ((_, g), l) in rows.iter().zip(&mult.ineq) {
                constant -= 0.5 * l * l / mult.rho;
                let s = *g + l / mult.rho;
                if s.value() > 0.0 {
                    acc = acc + s * s * (0.5 * mult.rho);
                }
            }
            acc
        });
        (val + constant, grad)
    }
}
