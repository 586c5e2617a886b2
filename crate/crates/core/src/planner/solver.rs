//! Augmented-Lagrangian outer loop around an L-BFGS inner minimizer.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Smooth problem `min f(z)` s.t. `h(z) = 0`, `g(z) ≤ 0`.
pub trait Nlp {
    fn n_vars(&self) -> usize;

    /// Objective, equality rows, inequality rows.
    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>);

    /// Augmented-Lagrangian merit and its gradient. The default uses
    /// central finite differences; implementations may override with
    /// analytic gradients.
    fn merit_gradient(&self, z: &[f64], mult: &Multipliers) -> (f64, Vec<f64>) {
        let eval = |z: &[f64]| {
            let (f, h, g) = self.evaluate(z);
            merit(f, &h, &g, mult)
        };
        let f0 = eval(z);
        let mut grad = vec![0.0; z.len()];
        let mut x = z.to_vec();
        for i in 0..z.len() {
            let step = 1e-6 * z[i].abs().max(1.0);
            x[i] = z[i] + step;
            let fp = eval(&x);
            x[i] = z[i] - step;
            let fm = eval(&x);
            x[i] = z[i];
            grad[i] = (fp - fm) / (2.0 * step);
        }
        (f0, grad)
    }
}

/// Multiplier estimates and penalty parameter of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub rho: f64,
}

/// Powell-Hestenes-Rockafellar merit function.
pub fn merit(f: f64, h: &[f64], g: &[f64], m: &Multipliers) -> f64 {
    let mut acc = f;
    for (hi, li) in h.iter().zip(&m.eq) {
        acc += li * hi + 0.5 * m.rho * hi * hi;
    }
    for (gi, li) in g.iter().zip(&m.ineq) {
        let s = (gi + li / m.rho).max(0.0);
        acc += 0.5 * m.rho * s * s - 0.5 * li * li / m.rho;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_total_inner: usize,
    /// Constraint violation tolerance in the rows' natural units.
    pub tol_violation: f64,
    pub tol_gradient: f64,
    /// Relative change of the objective between feasible outer iterations
    /// below which the solve counts as converged.
    pub tol_objective: f64,
    pub rho_initial: f64,
    pub rho_max: f64,
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer: 25,
            max_inner: 100,
            max_total_inner: 600,
            tol_violation: 1e-3,
            tol_gradient: 1e-4,
            tol_objective: 1e-5,
            rho_initial: 10.0,
            rho_max: 1e8,
            memory: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub z: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
    pub multipliers: Multipliers,
}

fn violation(h: &[f64], g: &[f64]) -> f64 {
    let a = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g.iter().fold(a, |m, v| m.max(*v))
}

/// Solves `nlp` from `z0`. Deterministic: no clocks or threads influence
/// the iterates.
pub fn solve(nlp: &dyn Nlp, z0: &[f64], opts: &SolverOptions) -> SolverOutput {
    let start = Instant::now();
    let (f0, h0, g0) = nlp.evaluate(z0);
    let mut mult = Multipliers {
        eq: vec![0.0; h0.len()],
        ineq: vec![0.0; g0.len()],
        rho: opts.rho_initial,
    };
    let mut z = z0.to_vec();
    let mut prev_viol = violation(&h0, &g0);
    let mut prev_f = f64::NAN;
    let mut inner_total = 0;
    let mut evals = 1;
    let mut converged = false;
    let mut outer = 0;
    let mut grad_norm = f64::INFINITY;
    let mut inner_tol = 1e-2f64.max(opts.tol_gradient);
    // best iterate so far: least violation until one is feasible, then
    // lowest objective among the feasible ones
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let consider = |best: &mut Option<(f64, f64, Vec<f64>)>, f: f64, viol: f64, z: &[f64]| {
        let better = match best {
            None => true,
            Some((bv, bf, _)) => {
                if viol < opts.tol_violation {
                    *bv >= opts.tol_violation || f < *bf
                } else {
                    viol < *bv
                }
            }
        };
        if better {
            *best = Some((viol, f, z.to_vec()));
        }
    };
    consider(&mut best, f0, prev_viol, z0);
    while outer < opts.max_outer && inner_total < opts.max_total_inner {
        outer += 1;
        let budget = opts.max_inner.min(opts.max_total_inner - inner_total);
        let res = lbfgs(
            |x| nlp.merit_gradient(x, &mult),
            &z,
            inner_tol,
            budget,
            opts.memory,
        );
        inner_total += res.iterations;
        evals += res.evaluations;
        z = res.x;
        grad_norm = res.grad_norm;
        let (f, h, g) = nlp.evaluate(&z);
        evals += 1;
        let viol = violation(&h, &g);
        let stalled = inner_tol <= opts.tol_gradient
            && prev_viol < opts.tol_violation
            && (f - prev_f).abs() <= opts.tol_objective * f.abs().max(1.0);
        consider(&mut best, f, viol, &z);
        for (l, hi) in mult.eq.iter_mut().zip(&h) {
            *l += mult.rho * hi;
        }
        for (l, gi) in mult.ineq.iter_mut().zip(&g) {
            *l = (*l + mult.rho * gi).max(0.0);
        }
        if viol < opts.tol_violation && (grad_norm <= opts.tol_gradient || stalled) {
            converged = true;
            break;
        }
        if viol > 0.25 * prev_viol && viol >= opts.tol_violation {
            mult.rho = (mult.rho * 10.0).min(opts.rho_max);
        }
        prev_viol = viol;
        prev_f = f;
        inner_tol = (inner_tol * 0.1).max(opts.tol_gradient);
    }
    if let Some((_, _, zb)) = best {
        z = zb;
    }
    let (f, h, g) = nlp.evaluate(&z);
    SolverOutput {
        max_violation: violation(&h, &g),
        z,
        objective: f,
        gradient_norm: grad_norm,
        converged,
        outer_iterations: outer,
        inner_iterations: inner_total,
        evaluations: evals,
        wall_time_s: start.elapsed().as_secs_f64(),
        multipliers: mult,
    }
}

struct LbfgsResult {
    x: Vec<f64>,
    grad_norm: f64,
    iterations: usize,
    evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs<F>(mut fg: F, x0: &[f64], gtol: f64, max_iter: usize, memory: usize) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut evals = 1;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut iters = 0;
    while iters < max_iter && inf_norm(&g) > gtol {
        iters += 1;
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = hist
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / inf_norm(&g).max(1.0));
        for di in d.iter_mut() {
            *di *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hist.clear();
            d = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = fg(&xn);
            evals += 1;
            if fn_.is_finite() && fn_ <= f + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let progress = (f - fn_).abs();
        x = xn;
        f = fn_;
        g = gn;
        if progress <= f64::EPSILON * f.abs() {
            break;
        }
    }
    LbfgsResult { grad_norm: inf_norm(&g), x, iterations: iters, evaluations: evals }
}
