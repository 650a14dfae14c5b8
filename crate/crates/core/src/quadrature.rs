//! Adaptive Gauss-Legendre quadrature on graded meshes, with an exact change
//! of variables for integrable power singularities at an endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::scalar::{compensated_sum, Scalar};

/// Nodes and weights of the 8-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_8() -> &'static ([f64; 8], [f64; 8]) {
    static RULE: OnceLock<([f64; 8], [f64; 8])> = OnceLock::new();
    RULE.get_or_init(gauss_legendre::<8>)
}

/// Roots of `P_N` by Newton iteration from the Chebyshev guesses.
fn gauss_legendre<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let n = N as f64;
    for i in 0..N {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let legendre = |x: f64| {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=N {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            (p1, n * (x * p1 - p0) / (x * x - 1.0))
        };
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(x).1;
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Target relative error of the whole integral.
    pub rel_tol: f64,
    /// Maximum number of cells before giving up.
    pub max_cells: usize,
    /// Number of geometric (ratio 1/2) cells toward the graded endpoint.
    pub graded_levels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_cells: 20_000, graded_levels: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error_estimate: T,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: Scalar> QuadratureResult<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), error_estimate: T::zero(), evaluations: 0, converged: true }
    }

    pub fn relative_error(&self) -> T {
        if self.value.is_zero() {
            self.error_estimate
        } else {
            self.error_estimate / self.value.abs()
        }
    }

    /// Sum of independent pieces.
    pub fn combine(parts: &[Self]) -> Self {
        Self {
            value: compensated_sum(parts.iter().map(|p| p.value)),
            error_estimate: compensated_sum(parts.iter().map(|p| p.error_estimate)),
            evaluations: parts.iter().map(|p| p.evaluations).sum(),
            converged: parts.iter().all(|p| p.converged),
        }
    }
}

fn gl_cell<T: Scalar>(g: &impl Fn(T) -> T, a: T, b: T) -> T {
    let (x, w) = gauss_legendre_8();
    let half = (b - a) * T::lit(0.5);
    let mid = a + half;
    let s = compensated_sum(x.iter().zip(w).map(|(&xi, &wi)| T::lit(wi) * g(mid + half * T::lit(xi))));
    s * half
}

struct Cell<T> {
    lo: T,
    hi: T,
    value: T,
    error: T,
}

impl<T: Scalar> PartialEq for Cell<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl<T: Scalar> Eq for Cell<T> {}

impl<T: Scalar> PartialOrd for Cell<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Cell<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn make_cell<T: Scalar>(g: &impl Fn(T) -> T, lo: T, hi: T) -> Cell<T> {
    let mid = lo + (hi - lo) * T::lit(0.5);
    let whole = gl_cell(g, lo, hi);
    let value = gl_cell(g, lo, mid) + gl_cell(g, mid, hi);
    let error = (value - whole).abs();
    Cell { lo, hi, value, error: if error.is_nan() { T::infinity() } else { error } }
}

/// Globally adaptive quadrature of `g` on `[a, b]`: the cell with the largest
/// error estimate is bisected until the total estimate meets the tolerance.
/// The initial mesh is graded geometrically toward `a`.
pub fn integrate<T: Scalar>(g: impl Fn(T) -> T, a: T, b: T, opts: &QuadratureOptions) -> QuadratureResult<T> {
    if a == b {
        return QuadratureResult::zero();
    }
    let mut heap = BinaryHeap::new();
    let mut hi = b;
    for _ in 0..opts.graded_levels {
        let lo = a + (hi - a) * T::lit(0.5);
        heap.push(make_cell(&g, lo, hi));
        hi = lo;
    }
    heap.push(make_cell(&g, a, hi));
    let mut evaluations = 24 * heap.len();
    let roundoff = T::epsilon() * T::lit(64.0);
    let totals = |heap: &BinaryHeap<Cell<T>>| {
        let value = compensated_sum(heap.iter().map(|c| c.value));
        let error = compensated_sum(heap.iter().map(|c| c.error));
        let scale = compensated_sum(heap.iter().map(|c| c.value.abs()));
        (value, error, scale)
    };
    let (mut value, mut error, mut scale) = totals(&heap);
    let tol = T::lit(opts.rel_tol);
    let mut converged = false;
    loop {
        if error <= tol * value.abs() || error <= roundoff * scale {
            converged = true;
            break;
        }
        if heap.len() >= opts.max_cells {
            break;
        }
        let worst = heap.pop().expect("nonempty mesh");
        let mid = worst.lo + (worst.hi - worst.lo) * T::lit(0.5);
        let children = if mid <= worst.lo || mid >= worst.hi {
            // cannot split further in this precision
            vec![Cell { error: T::zero(), ..worst }]
        } else {
            evaluations += 48;
            vec![make_cell(&g, worst.lo, mid), make_cell(&g, mid, worst.hi)]
        };
        value = value - worst.value;
        error = error - worst.error;
        scale = scale - worst.value.abs();
        for c in children {
            value = value + c.value;
            error = error + c.error;
            scale = scale + c.value.abs();
            heap.push(c);
        }
        // the running totals drift, so refresh them now and then
        if heap.len() % 256 == 0 || !error.is_finite() {
            (value, error, scale) = totals(&heap);
        }
    }
    let (value, error, _) = totals(&heap);
    QuadratureResult { value, error_estimate: error, evaluations, converged }
}

/// Which endpoint carries the singular factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// `int_a^b |t - e|^(-mu) h(t) dt` with `e` the chosen endpoint, `mu < 1`,
/// and `h` smooth on `[a, b]`.
///
/// For `mu > 0` the substitution `|t - e| = (b - a) u^(1/(1-mu))` turns the
/// integrand into `(b - a)^(1-mu) h(t(u)) / (1 - mu)`, which is bounded.
pub fn integrate_power_singular<T: Scalar>(
    h: impl Fn(T) -> T,
    a: T,
    b: T,
    mu: T,
    side: Endpoint,
    opts: &QuadratureOptions,
) -> QuadratureResult<T> {
    let len = b - a;
    if len.is_zero() {
        return QuadratureResult::zero();
    }
    let at = |d: T| match side {
        Endpoint::Left => a + d,
        Endpoint::Right => b - d,
    };
    if mu > T::zero() {
        let p = (T::one() - mu).recip();
        let scale = len.powf(T::one() - mu) * p;
        integrate(|u: T| scale * h(at(len * u.powf(p))), T::zero(), T::one(), opts)
    } else {
        integrate(
            |d: T| if d.is_zero() && mu < T::zero() { T::zero() } else { d.powf(-mu) * h(at(d)) },
            T::zero(),
            len,
            opts,
        )
    }
}
