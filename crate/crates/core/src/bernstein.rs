//! Bernstein-polynomial curves and piecewise composite trajectories.
//!
//! A [`BernsteinCurve`] stores its control points together with an absolute
//! time domain `[t0, tf]`. All algebra (derivative, product, elevation) is
//! exact in control-point form, so bounds derived from control points are
//! guaranteed bounds on the curve (convex hull property).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BernsteinError {
    #[error("time {t} outside curve domain [{t0}, {tf}]")]
    Domain { t: f64, t0: f64, tf: f64 },
    #[error("derivative order {k} exceeds degree {degree}")]
    Degree { k: usize, degree: usize },
    #[error("curves have mismatched domains [{a0}, {a1}] vs [{b0}, {b1}]")]
    DomainMismatch { a0: f64, a1: f64, b0: f64, b1: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("curve needs at least one control point")]
    Empty,
    #[error("invalid time interval [{t0}, {tf}]")]
    Interval { t0: f64, tf: f64 },
    #[error("composite trajectory: {0}")]
    Composite(String),
}

pub type Result<T> = std::result::Result<T, BernsteinError>;

/// Coefficient-level kernels shared by [`BernsteinCurve`] and the planner.
///
/// These operate on the coefficients of a single scalar polynomial over the
/// normalized parameter `τ ∈ [0, 1]` and are generic over [`Real`] so the
/// same code path produces values and exact gradients.
pub mod kernel {
    use crate::autodiff::Real;

    pub fn binomial(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        let k = k.min(n - k);
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc.round()
    }

    /// de Casteljau evaluation at normalized parameter `tau`.
    pub fn de_casteljau<S: Real>(coeffs: &[S], tau: f64) -> S {
        let mut work = coeffs.to_vec();
        let n = work.len();
        for r in 1..n {
            for i in 0..n - r {
                work[i] = work[i] * (1.0 - tau) + work[i + 1] * tau;
            }
        }
        work[0]
    }

    /// Forward difference `c[i+1] - c[i]`, i.e. the pure kernel `[-1, 1]`.
    pub fn difference<S: Real>(coeffs: &[S]) -> Vec<S> {
        coeffs.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Normalized `k`-th derivative: `n!/(n-k)!` times the `k`-fold difference.
    pub fn derivative<S: Real>(coeffs: &[S], k: usize) -> Vec<S> {
        let n = coeffs.len() - 1;
        let mut out = coeffs.to_vec();
        for _ in 0..k {
            out = difference(&out);
        }
        let falling: f64 = (0..k).map(|i| (n - i) as f64).product();
        out.into_iter().map(|c| c * falling).collect()
    }

    /// Coefficients of the pointwise product of two polynomials.
    pub fn multiply<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
        let m = a.len() - 1;
        let n = b.len() - 1;
        let bm: Vec<f64> = (0..=m).map(|i| binomial(m, i)).collect();
        let bn: Vec<f64> = (0..=n).map(|j| binomial(n, j)).collect();
        let mut out = Vec::with_capacity(m + n + 1);
        for k in 0..=m + n {
            let denom = binomial(m + n, k);
            let lo = k.saturating_sub(n);
            let hi = k.min(m);
            let mut acc = S::zero();
            for i in lo..=hi {
                let j = k - i;
                acc = acc + a[i] * b[j] * (bm[i] * bn[j] / denom);
            }
            out.push(acc);
        }
        out
    }

    /// Degree elevation by `r`.
    pub fn elevate<S: Real>(coeffs: &[S], r: usize) -> Vec<S> {
        let mut out = coeffs.to_vec();
        for _ in 0..r {
            let n = out.len() - 1;
            let np1 = (n + 1) as f64;
            let mut next = Vec::with_capacity(n + 2);
            next.push(out[0]);
            for i in 1..=n {
                let w = i as f64 / np1;
                next.push(out[i - 1] * w + out[i] * (1.0 - w));
            }
            next.push(out[n]);
            out = next;
        }
        out
    }

    /// Elevate the lower-degree operand and add.
    pub fn add<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
        let (a, b) = match a.len().cmp(&b.len()) {
            std::cmp::Ordering::Less => (elevate(a, b.len() - a.len()), b.to_vec()),
            std::cmp::Ordering::Greater => (a.to_vec(), elevate(b, a.len() - b.len())),
            std::cmp::Ordering::Equal => (a.to_vec(), b.to_vec()),
        };
        a.into_iter().zip(b).map(|(x, y)| x + y).collect()
    }

    /// Integral over the normalized parameter: the mean of the coefficients.
    pub fn integral<S: Real>(coeffs: &[S]) -> S {
        let mut acc = S::zero();
        for &c in coeffs {
            acc = acc + c;
        }
        acc / coeffs.len() as f64
    }
}

/// Polynomial curve in Bernstein form over an absolute time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRecord", into = "CurveRecord")]
pub struct BernsteinCurve {
    dim: usize,
    // row-major: point i occupies [i*dim, (i+1)*dim)
    coords: Vec<f64>,
    t0: f64,
    tf: f64,
}

/// Serialized form of a curve: `{degree, t0, tf, control_points}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub degree: usize,
    pub t0: f64,
    pub tf: f64,
    pub control_points: Vec<Vec<f64>>,
}

impl TryFrom<CurveRecord> for BernsteinCurve {
    type Error = BernsteinError;
    fn try_from(r: CurveRecord) -> Result<Self> {
        if r.control_points.len() != r.degree + 1 {
            return Err(BernsteinError::Dimension {
                expected: r.degree + 1,
                got: r.control_points.len(),
            });
        }
        BernsteinCurve::new(r.control_points, r.t0, r.tf)
    }
}

impl From<BernsteinCurve> for CurveRecord {
    fn from(c: BernsteinCurve) -> Self {
        CurveRecord {
            degree: c.degree(),
            t0: c.t0,
            tf: c.tf,
            control_points: c.points().map(|p| p.to_vec()).collect(),
        }
    }
}

impl BernsteinCurve {
    pub fn new(points: Vec<Vec<f64>>, t0: f64, tf: f64) -> Result<Self> {
        let first = points.first().ok_or(BernsteinError::Empty)?;
        let dim = first.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(BernsteinError::Dimension { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, t0, tf)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>, t0: f64, tf: f64) -> Result<Self> {
        if dim == 0 || coords.is_empty() {
            return Err(BernsteinError::Empty);
        }
        if coords.len() % dim != 0 {
            return Err(BernsteinError::Dimension { expected: dim, got: coords.len() % dim });
        }
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(BernsteinError::Interval { t0, tf });
        }
        Ok(BernsteinCurve { dim, coords, t0, tf })
    }

    /// One-dimensional curve from scalar coefficients.
    pub fn scalar(coeffs: Vec<f64>, t0: f64, tf: f64) -> Result<Self> {
        Self::from_flat(1, coeffs, t0, tf)
    }

    /// Assemble a curve from per-axis coefficient lists of equal length.
    pub fn from_axes(axes: &[Vec<f64>], t0: f64, tf: f64) -> Result<Self> {
        let dim = axes.len();
        let len = axes.first().map(Vec::len).ok_or(BernsteinError::Empty)?;
        if let Some(bad) = axes.iter().find(|a| a.len() != len) {
            return Err(BernsteinError::Dimension { expected: len, got: bad.len() });
        }
        let mut coords = Vec::with_capacity(dim * len);
        for i in 0..len {
            for axis in axes {
                coords.push(axis[i]);
            }
        }
        Self::from_flat(dim, coords, t0, tf)
    }

    pub fn constant(value: &[f64], degree: usize, t0: f64, tf: f64) -> Result<Self> {
        let coords = value.iter().copied().cycle().take(value.len() * (degree + 1)).collect();
        Self::from_flat(value.len(), coords, t0, tf)
    }

    pub fn degree(&self) -> usize {
        self.coords.len() / self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn duration(&self) -> f64 {
        self.tf - self.t0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Coefficients of a single axis.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        self.points().map(|p| p[k]).collect()
    }

    pub fn component(&self, k: usize) -> Result<Self> {
        if k >= self.dim {
            return Err(BernsteinError::Dimension { expected: self.dim, got: k + 1 });
        }
        Self::scalar(self.axis(k), self.t0, self.tf)
    }

    fn tau(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * (1.0 + self.tf.abs().max(self.t0.abs()));
        if !(t >= self.t0 - slack && t <= self.tf + slack) {
            return Err(BernsteinError::Domain { t, t0: self.t0, tf: self.tf });
        }
        Ok(((t - self.t0) / self.duration()).clamp(0.0, 1.0))
    }

    /// Value at time `t` by de Casteljau recursion.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let tau = self.tau(t)?;
        Ok(self.eval_normalized(tau))
    }

    /// Value at normalized parameter `tau ∈ [0, 1]`, no domain check.
    pub fn eval_normalized(&self, tau: f64) -> Vec<f64> {
        // exact endpoint interpolation
        if tau <= 0.0 {
            return self.point(0).to_vec();
        }
        if tau >= 1.0 {
            return self.point(self.degree()).to_vec();
        }
        let mut work = self.coords.clone();
        let n = self.degree() + 1;
        let d = self.dim;
        for r in 1..n {
            for i in 0..n - r {
                for k in 0..d {
                    work[i * d + k] = work[i * d + k] * (1.0 - tau) + work[(i + 1) * d + k] * tau;
                }
            }
        }
        work.truncate(d);
        work
    }

    fn map_axes(&self, f: impl Fn(&[f64]) -> Vec<f64>, t0: f64, tf: f64) -> Result<Self> {
        let axes: Vec<Vec<f64>> = (0..self.dim).map(|k| f(&self.axis(k))).collect();
        Self::from_axes(&axes, t0, tf)
    }

    /// `k`-th time derivative as a degree `n - k` curve on the same domain.
    pub fn derivative(&self, k: usize) -> Result<Self> {
        let n = self.degree();
        if k > n {
            return Err(BernsteinError::Degree { k, degree: n });
        }
        if k == 0 {
            return Ok(self.clone());
        }
        DifferentiationMatrix::new(n, k, self.t0, self.tf).apply(self)
    }

    /// Like [`derivative`](Self::derivative) but returns a zero constant when
    /// `k` exceeds the degree.
    pub fn derivative_or_zero(&self, k: usize) -> Self {
        match self.derivative(k) {
            Ok(c) => c,
            Err(_) => Self::constant(&vec![0.0; self.dim], 0, self.t0, self.tf)
                .expect("valid domain"),
        }
    }

    fn check_same_domain(&self, other: &Self) -> Result<()> {
        let tol = 1e-12 * (1.0 + self.tf.abs());
        if (self.t0 - other.t0).abs() > tol || (self.tf - other.tf).abs() > tol {
            return Err(BernsteinError::DomainMismatch {
                a0: self.t0,
                a1: self.tf,
                b0: other.t0,
                b1: other.tf,
            });
        }
        Ok(())
    }

    /// Pointwise product of two scalar curves.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        if self.dim != 1 || other.dim != 1 {
            return Err(BernsteinError::Dimension { expected: 1, got: self.dim.max(other.dim) });
        }
        Self::scalar(kernel::multiply(&self.coords, &other.coords), self.t0, self.tf)
    }

    /// Pointwise sum; the lower-degree operand is elevated first.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        if self.dim != other.dim {
            return Err(BernsteinError::Dimension { expected: self.dim, got: other.dim });
        }
        let axes: Vec<Vec<f64>> =
            (0..self.dim).map(|k| kernel::add(&self.axis(k), &other.axis(k))).collect();
        Self::from_axes(&axes, self.t0, self.tf)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        BernsteinCurve {
            coords: self.coords.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }

    /// Same curve represented with `r` additional degrees.
    pub fn elevate(&self, r: usize) -> Self {
        self.map_axes(|a| kernel::elevate(a, r), self.t0, self.tf)
            .expect("elevation preserves shape")
    }

    /// Per-axis (min, max) over the control points.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.points() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// `ẋ² + ẏ²` as a scalar curve (uses the first two axes).
    pub fn squared_speed(&self) -> Result<Self> {
        if self.dim < 2 {
            return Err(BernsteinError::Dimension { expected: 2, got: self.dim });
        }
        let vel = self.derivative_or_zero(1);
        let vx = vel.component(0)?;
        let vy = vel.component(1)?;
        vx.product(&vx)?.add(&vy.product(&vy)?)
    }

    /// Numerator and denominator of the planar heading rate
    /// `ω = (ẋ ÿ − ẍ ẏ) / (ẋ² + ẏ²)`.
    pub fn heading_rate_fraction(&self) -> Result<(Self, Self)> {
        if self.dim < 2 {
            return Err(BernsteinError::Dimension { expected: 2, got: self.dim });
        }
        let vel = self.derivative_or_zero(1);
        let acc = self.derivative_or_zero(2);
        let (vx, vy) = (vel.component(0)?, vel.component(1)?);
        let (ax, ay) = (acc.component(0)?, acc.component(1)?);
        let num = vx.product(&ay)?.sub(&ax.product(&vy)?)?;
        let den = vx.product(&vx)?.add(&vy.product(&vy)?)?;
        Ok((num, den))
    }

    /// Length of the curve by adaptive Simpson quadrature of `|ẋ(t)|`.
    pub fn arc_length(&self, tol: f64) -> f64 {
        let vel = self.derivative_or_zero(1);
        let speed = |t: f64| -> f64 {
            let tau = ((t - self.t0) / self.duration()).clamp(0.0, 1.0);
            vel.eval_normalized(tau).iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        // split first so that the recursion sees smooth pieces
        let pieces = 8;
        let h = self.duration() / pieces as f64;
        (0..pieces)
            .map(|i| {
                let a = self.t0 + i as f64 * h;
                adaptive_simpson(&speed, a, a + h, tol / pieces as f64, 40)
            })
            .sum()
    }

    /// Integral of each axis over the time domain.
    pub fn integral(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| kernel::integral(&self.axis(k)) * self.duration())
            .collect()
    }

    /// Split at time `t` into curves on `[t0, t]` and `[t, tf]`.
    pub fn split(&self, t: f64) -> Result<(Self, Self)> {
        let tau = self.tau(t)?;
        if tau <= 0.0 || tau >= 1.0 {
            return Err(BernsteinError::Interval { t0: self.t0, tf: t });
        }
        let n = self.degree() + 1;
        let d = self.dim;
        let mut work = self.coords.clone();
        let mut left = Vec::with_capacity(n * d);
        let mut right = vec![0.0; n * d];
        left.extend_from_slice(&work[..d]);
        right[(n - 1) * d..].copy_from_slice(&work[(n - 1) * d..]);
        for r in 1..n {
            for i in 0..n - r {
                for k in 0..d {
                    work[i * d + k] = work[i * d + k] * (1.0 - tau) + work[(i + 1) * d + k] * tau;
                }
            }
            left.extend_from_slice(&work[..d]);
            let idx = n - 1 - r;
            right[idx * d..(idx + 1) * d].copy_from_slice(&work[(n - 1 - r) * d..(n - r) * d]);
        }
        Ok((
            Self::from_flat(d, left, self.t0, t)?,
            Self::from_flat(d, right, t, self.tf)?,
        ))
    }

    /// Same control points on a shifted domain.
    pub fn shifted(&self, dt: f64) -> Self {
        BernsteinCurve { t0: self.t0 + dt, tf: self.tf + dt, ..self.clone() }
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Linear map from degree-`n` control points to the control points of the
/// `k`-th derivative.
///
/// `rows` hold the pure `k`-fold difference kernel (`[-1, 1]` convolved `k`
/// times); `scale = n!/((n-k)! (tf-t0)^k)` is applied separately.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiationMatrix {
    pub order: usize,
    pub degree: usize,
    pub scale: f64,
    pub rows: Vec<Vec<f64>>,
}

impl DifferentiationMatrix {
    pub fn new(degree: usize, order: usize, t0: f64, tf: f64) -> Self {
        assert!(order <= degree, "derivative order exceeds degree");
        let mut stencil = vec![1.0];
        for _ in 0..order {
            let mut next = vec![0.0; stencil.len() + 1];
            for (i, s) in stencil.iter().enumerate() {
                next[i] -= s;
                next[i + 1] += s;
            }
            stencil = next;
        }
        let rows = (0..=degree - order)
            .map(|i| {
                let mut row = vec![0.0; degree + 1];
                row[i..i + stencil.len()].copy_from_slice(&stencil);
                row
            })
            .collect();
        let falling: f64 = (0..order).map(|i| (degree - i) as f64).product();
        let scale = falling / (tf - t0).powi(order as i32);
        DifferentiationMatrix { order, degree, scale, rows }
    }

    pub fn apply(&self, curve: &BernsteinCurve) -> Result<BernsteinCurve> {
        if curve.degree() != self.degree {
            return Err(BernsteinError::Dimension { expected: self.degree, got: curve.degree() });
        }
        let d = curve.dim();
        let mut coords = Vec::with_capacity(self.rows.len() * d);
        for row in &self.rows {
            for k in 0..d {
                let mut acc = 0.0;
                for (i, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        acc += w * curve.point(i)[k];
                    }
                }
                coords.push(acc * self.scale);
            }
        }
        BernsteinCurve::from_flat(d, coords, curve.t0(), curve.tf())
    }
}

/// Piecewise trajectory of Bernstein segments stitched at knot times.
///
/// Segment `j` covers `[T_{j-1}, T_j]` with `T_0 = 0`. Derivative curves up
/// to order three are cached since trackers sample them at high rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompositeRecord", into = "CompositeRecord")]
pub struct CompositeTrajectory {
    segments: Vec<BernsteinCurve>,
    derivs: Vec<Vec<BernsteinCurve>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeRecord {
    pub knot_times: Vec<f64>,
    pub segments: Vec<BernsteinCurve>,
}

impl TryFrom<CompositeRecord> for CompositeTrajectory {
    type Error = BernsteinError;
    fn try_from(r: CompositeRecord) -> Result<Self> {
        let traj = CompositeTrajectory::new(r.segments)?;
        let knots = traj.knot_times();
        if knots.len() != r.knot_times.len()
            || knots.iter().zip(&r.knot_times).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
        {
            return Err(BernsteinError::Composite("knot times disagree with segments".into()));
        }
        Ok(traj)
    }
}

impl From<CompositeTrajectory> for CompositeRecord {
    fn from(c: CompositeTrajectory) -> Self {
        CompositeRecord { knot_times: c.knot_times(), segments: c.segments }
    }
}

impl CompositeTrajectory {
    pub fn new(segments: Vec<BernsteinCurve>) -> Result<Self> {
        let first = segments.first().ok_or(BernsteinError::Empty)?;
        if first.t0().abs() > 1e-12 {
            return Err(BernsteinError::Composite(format!(
                "first segment starts at {} instead of 0",
                first.t0()
            )));
        }
        let dim = first.dim();
        for w in segments.windows(2) {
            if w[1].dim() != dim {
                return Err(BernsteinError::Dimension { expected: dim, got: w[1].dim() });
            }
            if (w[1].t0() - w[0].tf()).abs() > 1e-9 * (1.0 + w[0].tf().abs()) {
                return Err(BernsteinError::Composite(format!(
                    "gap between segments at {} and {}",
                    w[0].tf(),
                    w[1].t0()
                )));
            }
        }
        let derivs = segments
            .iter()
            .map(|s| (1..=3).map(|k| s.derivative_or_zero(k)).collect())
            .collect();
        Ok(CompositeTrajectory { segments, derivs })
    }

    pub fn segments(&self) -> &[BernsteinCurve] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    /// `T_1 … T_M`.
    pub fn knot_times(&self) -> Vec<f64> {
        self.segments.iter().map(BernsteinCurve::tf).collect()
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map(BernsteinCurve::tf).unwrap_or(0.0)
    }

    pub fn segment_index(&self, t: f64) -> usize {
        let knots = self.knot_times();
        knots.partition_point(|&k| k <= t).min(self.segments.len() - 1)
    }

    /// `k`-th derivative (0..=3) at time `t`, clamped to the trajectory domain.
    pub fn eval_derivative(&self, t: f64, k: usize) -> Vec<f64> {
        let t = t.clamp(0.0, self.duration());
        let j = self.segment_index(t);
        let seg = &self.segments[j];
        let tau = ((t - seg.t0()) / seg.duration()).clamp(0.0, 1.0);
        match k {
            0 => seg.eval_normalized(tau),
            1..=3 => self.derivs[j][k - 1].eval_normalized(tau),
            _ => seg.derivative_or_zero(k).eval_normalized(tau),
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let slack = 1e-12 * (1.0 + self.duration());
        if t < -slack || t > self.duration() + slack {
            return Err(BernsteinError::Domain { t, t0: 0.0, tf: self.duration() });
        }
        Ok(self.eval_derivative(t, 0))
    }

    /// Largest disagreement between adjacent segments at the knots over
    /// derivative orders `0..=order`.
    pub fn junction_mismatch(&self, order: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.segments.windows(2) {
            for k in 0..=order {
                let left = w[0].derivative_or_zero(k).eval_normalized(1.0);
                let right = w[1].derivative_or_zero(k).eval_normalized(0.0);
                for (a, b) in left.iter().zip(&right) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Uniform samples `(t, position)` over the whole duration.
    pub fn sample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let n = n.max(2);
        let d = self.duration();
        (0..n)
            .map(|i| {
                let t = d * i as f64 / (n - 1) as f64;
                (t, self.eval_derivative(t, 0))
            })
            .collect()
    }

    pub fn arc_length(&self, tol: f64) -> f64 {
        let per = tol / self.segments.len() as f64;
        self.segments.iter().map(|s| s.arc_length(per)).sum()
    }
}

/// Generic helper: evaluate scalar coefficients at a time inside `[t0, tf]`.
pub fn eval_coeffs<S: Real>(coeffs: &[S], t0: f64, tf: f64, t: f64) -> S {
    kernel::de_casteljau(coeffs, ((t - t0) / (tf - t0)).clamp(0.0, 1.0))
}
