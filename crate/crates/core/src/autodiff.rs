//! Scalar abstraction plus a small reverse-mode differentiation tape.
//!
//! Planner constraint curves are written once, generically over [`Real`].
//! Evaluating them with `f64` gives values; evaluating them with [`Var`]
//! records a tape from which [`gradient`] extracts exact vector-Jacobian
//! products.

use std::cell::RefCell;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type usable by the generic Bernstein kernels.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn recip(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    b: u32,
    da: f64,
    db: f64,
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
}

fn push(a: u32, da: f64, b: u32, db: f64) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        t.push(Node { a, b, da, db });
        (t.len() - 1) as u32
    })
}

/// A value recorded on the thread-local tape.
///
/// Constants carry no tape index and cost nothing to combine.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    idx: u32,
}

impl Var {
    pub fn constant(val: f64) -> Self {
        Var { val, idx: NO_PARENT }
    }

    fn is_const(self) -> bool {
        self.idx == NO_PARENT
    }

    fn unary(val: f64, x: Var, dx: f64) -> Var {
        if x.is_const() {
            Var::constant(val)
        } else {
            Var { val, idx: push(x.idx, dx, NO_PARENT, 0.0) }
        }
    }

    fn binary(val: f64, x: Var, dx: f64, y: Var, dy: f64) -> Var {
        match (x.is_const(), y.is_const()) {
            (true, true) => Var::constant(val),
            (false, true) => Var::unary(val, x, dx),
            (true, false) => Var::unary(val, y, dy),
            (false, false) => Var { val, idx: push(x.idx, dx, y.idx, dy) },
        }
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        Var::binary(self.val + rhs.val, self, 1.0, rhs, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        Var::binary(self.val - rhs.val, self, 1.0, rhs, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        Var::binary(self.val * rhs.val, self, rhs.val, rhs, self.val)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        Var::unary(-self.val, self, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    fn add(self, rhs: f64) -> Var {
        Var::unary(self.val + rhs, self, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    fn sub(self, rhs: f64) -> Var {
        Var::unary(self.val - rhs, self, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    fn mul(self, rhs: f64) -> Var {
        Var::unary(self.val * rhs, self, rhs)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    fn div(self, rhs: f64) -> Var {
        Var::unary(self.val / rhs, self, 1.0 / rhs)
    }
}

impl Real for Var {
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        Var::unary(r, self, -r * r)
    }
}

/// Evaluates `f` at `x` and returns `(f(x), ∇f(x))` by reverse accumulation.
///
/// Not re-entrant: `f` must not call `gradient` itself.
pub fn gradient<F>(x: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: FnOnce(&[Var]) -> Var,
{
    TAPE.with(|t| t.borrow_mut().clear());
    let inputs: Vec<Var> = x
        .iter()
        .map(|&v| Var { val: v, idx: push(NO_PARENT, 0.0, NO_PARENT, 0.0) })
        .collect();
    let out = f(&inputs);
    let mut grad = vec![0.0; x.len()];
    if out.is_const() {
        return (out.val, grad);
    }
    TAPE.with(|t| {
        let tape = t.borrow();
        let mut adj = vec![0.0; tape.len()];
        adj[out.idx as usize] = 1.0;
        for i in (0..=out.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = tape[i];
            if node.a != NO_PARENT {
                adj[node.a as usize] += a * node.da;
            }
            if node.b != NO_PARENT {
                adj[node.b as usize] += a * node.db;
            }
        }
        // inputs occupy the first tape slots in order
        grad.copy_from_slice(&adj[..x.len()]);
    });
    TAPE.with(|t| t.borrow_mut().clear());
    (out.val, grad)
}
