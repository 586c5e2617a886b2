//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use glideplan::aero::Airframe;
use glideplan::dubins::{DubinsWord, Pose2D};
use glideplan::mission::MissionPlan;
use nalgebra::{DMatrix, DVector};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> MissionPlan {
    let path = scenario_dir().join(format!("{name}.toml"));
    MissionPlan::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .expect("scenario directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            if p.extension()? != "toml" {
                return None;
            }
            Some(p.file_stem()?.to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ c_k C(n,k) τ^k (1−τ)^(n−k)` evaluated term by term.
pub fn basis_sum(coeffs: &[f64], tau: f64) -> f64 {
    let n = coeffs.len() - 1;
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * binomial(n, k) * tau.powi(k as i32) * (1.0 - tau).powi((n - k) as i32))
        .sum()
}

/// Steady-glide balance quadratic in `s = sin γ` with the constant term
/// written out: `mg s² − q S πARe s − ((qS)² πARe C_D0 + (mg)²)/mg`.
pub fn glide_quadratic(af: &Airframe, va: f64, s: f64) -> f64 {
    let mg = af.mass * af.g;
    let qs = 0.5 * af.rho * va * va * af.wing_area;
    let pe = PI * af.aspect_ratio * af.oswald;
    let eta = (qs * qs * pe * af.cd0 + mg * mg) / mg;
    mg * s * s - qs * pe * s - eta
}

/// `sin γ` of the steady glide at `va` found by bisecting the force balance
/// `D = −mg sin γ` with `C_L = mg cos γ / (qS)`.
pub fn glide_sin_bisect(af: &Airframe, va: f64) -> f64 {
    let mg = af.mass * af.g;
    let qs = 0.5 * af.rho * va * va * af.wing_area;
    let k = 1.0 / (PI * af.aspect_ratio * af.oswald);
    let f = |s: f64| {
        let cl = mg * (1.0 - s * s).sqrt() / qs;
        qs * (af.cd0 + k * cl * cl) + mg * s
    };
    // f(−1) < 0 < f(0) for any positive drag
    let (mut lo, mut hi) = (-1.0 + 1e-15, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn angle(v: (f64, f64)) -> f64 {
    v.1.atan2(v.0)
}

fn ccw(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(TAU)
}

fn left_center(p: &Pose2D, r: f64) -> (f64, f64) {
    (p.x - r * p.heading.sin(), p.y + r * p.heading.cos())
}

fn right_center(p: &Pose2D, r: f64) -> (f64, f64) {
    (p.x + r * p.heading.sin(), p.y - r * p.heading.cos())
}

/// Every feasible Dubins candidate between two poses built from turning
/// circles and their tangents. CCC words appear once per middle-circle
/// choice.
pub fn dubins_candidates(start: &Pose2D, goal: &Pose2D, r: f64) -> Vec<(DubinsWord, f64)> {
    let mut out = Vec::new();
    let arc = |left: bool, a: f64, b: f64| r * if left { ccw(a, b) } else { ccw(b, a) };
    for (word, l1, l3) in [
        (DubinsWord::LSL, true, true),
        (DubinsWord::RSR, false, false),
        (DubinsWord::LSR, true, false),
        (DubinsWord::RSL, false, true),
    ] {
        let c1 = if l1 { left_center(start, r) } else { right_center(start, r) };
        let c2 = if l3 { left_center(goal, r) } else { right_center(goal, r) };
        let d = (c2.0 - c1.0, c2.1 - c1.1);
        let dist = d.0.hypot(d.1);
        let theta = angle(d);
        let (straight, psi) = if l1 == l3 {
            (dist, theta)
        } else {
            if dist < 2.0 * r {
                continue;
            }
            let l = (dist * dist - 4.0 * r * r).sqrt();
            let off = (2.0 * r).atan2(l);
            (l, if l1 { theta + off } else { theta - off })
        };
        out.push((word, arc(l1, start.heading, psi) + straight + arc(l3, psi, goal.heading)));
    }
    for (word, outer_left) in [(DubinsWord::LRL, true), (DubinsWord::RLR, false)] {
        let (c1, c3) = if outer_left {
            (left_center(start, r), left_center(goal, r))
        } else {
            (right_center(start, r), right_center(goal, r))
        };
        let d = (c3.0 - c1.0, c3.1 - c1.1);
        let dist = d.0.hypot(d.1);
        if dist > 4.0 * r || dist < 1e-12 {
            continue;
        }
        let base = angle(d);
        let spread = (dist / (4.0 * r)).acos();
        for sign in [1.0, -1.0] {
            let a = base + sign * spread;
            let c2 = (c1.0 + 2.0 * r * a.cos(), c1.1 + 2.0 * r * a.sin());
            // heading at the tangent point between a circle centered at `c`
            // and the middle circle
            let tangent_heading = |c: (f64, f64)| {
                let v = (c2.0 - c.0, c2.1 - c.1);
                if outer_left {
                    angle(v) + PI / 2.0
                } else {
                    angle(v) - PI / 2.0
                }
            };
            let psi1 = tangent_heading(c1);
            let psi2 = tangent_heading(c3);
            let len = arc(outer_left, start.heading, psi1)
                + arc(!outer_left, psi1, psi2)
                + arc(outer_left, psi2, goal.heading);
            out.push((word, len));
        }
    }
    out
}

/// First derivative at sample `at` of a degree-`order` least-squares
/// polynomial through `window`, solved by QR.
pub fn lsq_derivative(window: &[f64], at: usize, order: usize, dt: f64) -> f64 {
    let a = DMatrix::from_fn(window.len(), order + 1, |k, m| ((k as f64 - at as f64) * dt).powi(m as i32));
    let y = DVector::from_column_slice(window);
    let qr = a.qr();
    let qty = qr.q().transpose() * y;
    let c = qr.r().solve_upper_triangular(&qty).expect("full-rank Vandermonde");
    c[1]
}
