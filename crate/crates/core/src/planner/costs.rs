use crate::autodiff::Real;
use crate::bernstein::{kernel, CompositeTrajectory};
use crate::flatness::Vec3;

/// Gram matrix `∫₀¹ β_i^m β_k^m dτ` of the degree-`m` Bernstein basis.
pub(crate) fn gram(m: usize) -> Vec<Vec<f64>> {
    (0..=m)
        .map(|i| {
            (0..=m)
                .map(|k| {
                    kernel::binomial(m, i) * kernel::binomial(m, k)
                        / (kernel::binomial(2 * m, i + k) * (2 * m + 1) as f64)
                })
                .collect()
        })
        .collect()
}

/// `∫‖x⁽³⁾‖² dt` of one segment from raw position coefficients per axis.
pub(crate) fn segment_jerk<S: Real>(axes: &[Vec<S>], duration: S, g: &[Vec<f64>]) -> S {
    let n = axes[0].len() - 1;
    if n < 3 {
        return S::zero();
    }
    let mut acc = S::zero();
    for coeffs in axes {
        let d3 = kernel::difference(&kernel::difference(&kernel::difference(coeffs)));
        for (i, gi) in g.iter().enumerate() {
            let mut row = S::zero();
            for (k, gik) in gi.iter().enumerate() {
                row = row + d3[k] * *gik;
            }
            acc = acc + d3[i] * row;
        }
    }
    let c = (n * (n - 1) * (n - 2)) as f64;
    let r = duration.recip();
    let r2 = r * r;
    acc * r2 * r2 * r * (c * c)
}

/// `−Σ W·ṗ` over the planar velocity control points of one segment.
pub(crate) fn segment_wind<S: Real>(axes: &[Vec<S>], duration: S, wind: &Vec3) -> S {
    let n = axes[0].len() - 1;
    let mut acc = S::zero();
    for (axis, w) in [(0, wind.x), (1, wind.y)] {
        if w == 0.0 {
            continue;
        }
        for d in kernel::difference(&axes[axis]) {
            acc = acc + d * w;
        }
    }
    -(acc * duration.recip() * n as f64)
}

/// Integral of the squared jerk, computed exactly in Bernstein form.
pub fn jerk_cost(traj: &CompositeTrajectory) -> f64 {
    traj.segments()
        .iter()
        .map(|seg| {
            let axes: Vec<Vec<f64>> = (0..seg.dim()).map(|k| seg.axis(k)).collect();
            let m = seg.degree().saturating_sub(3);
            segment_jerk(&axes, seg.duration(), &gram(m))
        })
        .sum()
}

/// Total traversal time.
pub fn time_cost(traj: &CompositeTrajectory) -> f64 {
    traj.segments().iter().map(|s| s.duration()).sum()
}

/// Negative wind projection on the planar velocity control points.
pub fn wind_cost(traj: &CompositeTrajectory, wind: &Vec3) -> f64 {
    traj.segments()
        .iter()
        .map(|seg| {
            let axes: Vec<Vec<f64>> = (0..seg.dim()).map(|k| seg.axis(k)).collect();
            segment_wind(&axes, seg.duration(), wind)
        })
        .sum()
}
