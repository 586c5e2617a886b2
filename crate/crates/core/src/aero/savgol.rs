//! Savitzky-Golay derivative filters.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::{AeroError, Result};

/// Least-squares polynomial derivative filter over a sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct SgFilter {
    pub window: usize,
    pub order: usize,
}

impl Default for SgFilter {
    fn default() -> Self {
        SgFilter { window: 11, order: 3 }
    }
}

impl SgFilter {
    pub fn new(window: usize, order: usize) -> Result<Self> {
        if window % 2 == 0 || window < 3 {
            return Err(AeroError::Parameter(format!("window must be odd and >= 3, got {window}")));
        }
        if order == 0 || order >= window {
            return Err(AeroError::Parameter(format!(
                "order must be in 1..{window}, got {order}"
            )));
        }
        Ok(SgFilter { window, order })
    }

    /// Weights giving the first derivative (per sample) at window index `at`.
    pub fn weights(&self, at: usize) -> Vec<f64> {
        let h = (self.window / 2) as f64;
        self.fit_row(at, 1).into_iter().map(|c| c / h).collect()
    }

    /// Row `row` of the least-squares pseudo-inverse for a fit centred at
    /// window index `at` (row 0 smooths, row 1 differentiates).
    fn fit_row(&self, at: usize, row: usize) -> Vec<f64> {
        let w = self.window;
        let h = (w / 2) as f64;
        let a = DMatrix::from_fn(w, self.order + 1, |k, m| ((k as f64 - at as f64) / h).powi(m as i32));
        // QR keeps the one-sided edge fits accurate; the normal equations
        // square an already poor conditioning there
        let qr = a.qr();
        let pinv = qr
            .r()
            .solve_upper_triangular(&qr.q().transpose())
            .expect("Vandermonde matrix has full column rank");
        (0..w).map(|k| pinv[(row, k)]).collect()
    }

    /// Derivative of a uniformly sampled series with spacing `dt`; edges use
    /// one-sided fits over the first/last full window.
    pub fn derivative(&self, series: &[f64], dt: f64) -> Result<Vec<f64>> {
        let w = self.window;
        if series.len() < w {
            return Err(AeroError::Parameter(format!(
                "series of length {} shorter than window {w}",
                series.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(AeroError::Parameter(format!("sample spacing must be positive, got {dt}")));
        }
        let half = w / 2;
        let n = series.len();
        let center = self.weights(half);
        let apply = |weights: &[f64], start: usize| -> f64 {
            weights.iter().zip(&series[start..start + w]).map(|(c, y)| c * y).sum::<f64>() / dt
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..half {
            out.push(apply(&self.weights(i), 0));
        }
        for i in half..n - half {
            out.push(apply(&center, i - half));
        }
        for i in n - half..n {
            out.push(apply(&self.weights(i - (n - w)), n - w));
        }
        Ok(out)
    }
}

/// Savitzky-Golay first derivative with the given window and order.
pub fn sg_derivative(series: &[f64], dt: f64, window: usize, order: usize) -> Result<Vec<f64>> {
    SgFilter::new(window, order)?.derivative(series, dt)
}

/// Single-owner streaming derivative estimator.
///
/// Once the buffer is full each pushed sample yields the derivative at the
/// window center, i.e. delayed by half a window.
#[derive(Debug, Clone)]
pub struct StreamingDerivative {
    weights: Vec<f64>,
    smooth: Vec<f64>,
    buf: VecDeque<f64>,
    dt: f64,
}

impl StreamingDerivative {
    pub fn new(filter: &SgFilter, dt: f64) -> Self {
        let half = filter.window / 2;
        let smooth = filter.fit_row(half, 0);
        StreamingDerivative {
            weights: filter.weights(half),
            smooth,
            buf: VecDeque::with_capacity(filter.window),
            dt,
        }
    }

    pub fn delay(&self) -> f64 {
        (self.weights.len() / 2) as f64 * self.dt
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }

    /// Pushes a sample; returns `(smoothed value, derivative)` at the window
    /// center once enough samples are buffered.
    pub fn push(&mut self, x: f64) -> Option<(f64, f64)> {
        if self.buf.len() == self.weights.len() {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        if self.buf.len() < self.weights.len() {
            return None;
        }
        let d = self.weights.iter().zip(&self.buf).map(|(c, y)| c * y).sum::<f64>() / self.dt;
        let s = self.smooth.iter().zip(&self.buf).map(|(c, y)| c * y).sum::<f64>();
        Some((s, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_differentiated_exactly() {
        let dt = 0.1;
        let ys: Vec<f64> = (0..40).map(|i| (i as f64 * dt).powi(2)).collect();
        let d = sg_derivative(&ys, dt, 7, 2).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((v - 2.0 * i as f64 * dt).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let d = sg_derivative(&[4.2; 30], 0.01, 11, 3).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn parameter_errors() {
        assert!(SgFilter::new(10, 2).is_err());
        assert!(SgFilter::new(5, 5).is_err());
        assert!(sg_derivative(&[1.0; 4], 0.1, 5, 2).is_err());
    }

    #[test]
    fn streaming_matches_batch_center() {
        let f = SgFilter::new(9, 3).unwrap();
        let dt = 0.05;
        let ys: Vec<f64> = (0..60).map(|i| (0.3 * i as f64).sin()).collect();
        let batch = f.derivative(&ys, dt).unwrap();
        let mut s = StreamingDerivative::new(&f, dt);
        for (i, y) in ys.iter().enumerate() {
            if let Some((_, d)) = s.push(*y) {
                assert!((d - batch[i - 4]).abs() < 1e-9);
            }
        }
        assert!((s.delay() - 0.2).abs() < 1e-12);
    }
}
