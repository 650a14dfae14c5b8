//! Energies, Wiener capacity and equilibrium measures.
//!
//! The equilibrium problem `max 2 lambda(K) - E(lambda)` over `lambda >= 0`
//! on `K` is solved by projected gradient followed by an active-set polish.
//! `capacity_via_normalized_energy` is an independent route through the
//! minimum energy over probability measures on `K`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::linalg::{solve_dense, SquareMatrix};
use crate::potential::{potential_of_space, pow_ext};
use crate::scalar::{compensated_sum, Scalar};
use crate::space::{DiscreteMeasure, FiniteSpace};

/// Largest face count enumerated exactly by [`capacity_via_normalized_energy`].
pub const EXACT_ENUMERATION_MAX: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue<T> {
    pub s: T,
    pub value: T,
}

impl<T: Scalar> EnergyValue<T> {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `sum_i (G sigma)(x_i)^s sigma_i`; `+inf` when some potential is infinite.
pub fn energy<T: Scalar>(g: &KernelMatrix<T>, sigma: &FiniteSpace<T>, s: T) -> Result<EnergyValue<T>> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(invalid(format!("energy exponent must be positive and finite, got {s}")));
    }
    let pot = potential_of_space(g, sigma)?;
    let value = if pot.values().iter().any(|v| v.is_infinite()) {
        T::infinity()
    } else {
        compensated_sum(pot.values().iter().zip(sigma.weights()).map(|(&v, &w)| pow_ext(v, s) * w))
    };
    Ok(EnergyValue { s, value })
}

/// Residuals of the three equilibrium properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumDiagnostics<T> {
    /// `max over K of (1 - G lambda)_+`, exempt atoms excluded.
    pub below_one_on_k: T,
    /// `max over supp lambda of (G lambda - 1)_+`.
    pub above_one_on_support: T,
    /// `max over supp lambda of |G lambda - 1|`.
    pub deviation_on_support: T,
}

impl<T: Scalar> EquilibriumDiagnostics<T> {
    pub fn max_residual(&self) -> T {
        self.below_one_on_k.max(self.above_one_on_support).max(self.deviation_on_support)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult<T> {
    pub k: Vec<usize>,
    pub lambda: DiscreteMeasure<T>,
    pub capacity: T,
    pub energy: T,
    pub support: Vec<usize>,
    /// Atoms of `K` with infinite self-energy; they carry no mass and are
    /// not held to `G lambda >= 1`.
    pub exempt: Vec<usize>,
    pub diagnostics: EquilibriumDiagnostics<T>,
}

impl<T: Scalar> EquilibriumResult<T> {
    pub fn total_mass(&self) -> T {
        self.lambda.total()
    }
}

fn validate_subset<T: Scalar>(g: &KernelMatrix<T>, k: &[usize]) -> Result<Vec<usize>> {
    if k.is_empty() {
        return Err(invalid("compact set K must be nonempty"));
    }
    let mut k = k.to_vec();
    k.sort_unstable();
    k.dedup();
    if let Some(&bad) = k.iter().find(|&&i| i >= g.len()) {
        return Err(invalid(format!("atom {bad} out of range for {} atoms", g.len())));
    }
    let m = g.matrix();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            if m.get(i, j) != m.get(j, i) {
                return Err(Error::NotSymmetric { i, j });
            }
        }
    }
    Ok(k)
}

/// Splits `K` into atoms with finite self-energy and exempt ones.
fn split_finite<T: Scalar>(g: &KernelMatrix<T>, k: &[usize]) -> (Vec<usize>, Vec<usize>) {
    k.iter().partition(|&&i| g.get(i, i).is_finite())
}

/// Equilibrium measure and capacity of `K`.
pub fn equilibrium<T: Scalar>(g: &KernelMatrix<T>, k: &[usize]) -> Result<EquilibriumResult<T>> {
    let k = validate_subset(g, k)?;
    let (finite, exempt) = split_finite(g, &k);
    let mut mass = vec![T::zero(); g.len()];
    if !finite.is_empty() {
        let a = g.matrix().principal(&finite);
        let x = solve_equilibrium_qp(&a);
        for (slot, &i) in finite.iter().enumerate() {
            mass[i] = x[slot];
        }
    }
    let lambda = DiscreteMeasure::new(mass)?;
    let total = lambda.total();
    let threshold = T::lit(1e-12) * total;
    let support: Vec<usize> = lambda.support_above(threshold);
    let pot = g.matrix().mul_vec(lambda.mass());
    let energy = compensated_sum(pot.iter().zip(lambda.mass()).map(|(&v, &m)| v.mul_ext(m)));
    let one = T::one();
    let mut diag = EquilibriumDiagnostics {
        below_one_on_k: T::zero(),
        above_one_on_support: T::zero(),
        deviation_on_support: T::zero(),
    };
    for &i in &finite {
        diag.below_one_on_k = diag.below_one_on_k.max(one - pot[i]);
    }
    for &i in &support {
        diag.above_one_on_support = diag.above_one_on_support.max(pot[i] - one);
        diag.deviation_on_support = diag.deviation_on_support.max((pot[i] - one).abs());
    }
    let capacity = (total + total - energy).max(T::zero());
    Ok(EquilibriumResult { k, lambda, capacity, energy, support, exempt, diagnostics: diag })
}

/// Maximizes `2 1'x - x'Ax` over `x >= 0`.
fn solve_equilibrium_qp<T: Scalar>(a: &SquareMatrix<T>) -> Vec<T> {
    let n = a.dim();
    let x = projected_gradient(a, 500);
    let largest = x.iter().fold(T::zero(), |m, &v| m.max(v));
    let guess: Vec<usize> = (0..n).filter(|&i| x[i] > T::lit(1e-8) * largest).collect();
    if let Some(polished) = polish(a, &guess) {
        return polished;
    }
    active_set(a).unwrap_or(x)
}

fn kkt_tol<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::lit(1e-4)
}

/// Solves `A_PP z = 1` and accepts it when `z > 0` and `(Az)_i >= 1` off `P`.
fn polish<T: Scalar>(a: &SquareMatrix<T>, p: &[usize]) -> Option<Vec<T>> {
    if p.is_empty() {
        return None;
    }
    let z = solve_dense(&a.principal(p), &vec![T::one(); p.len()], T::epsilon() * T::lit(16.0))?;
    if z.iter().any(|&v| !(v > T::zero())) {
        return None;
    }
    let mut x = vec![T::zero(); a.dim()];
    for (slot, &i) in p.iter().enumerate() {
        x[i] = z[slot];
    }
    let ax = a.mul_vec(&x);
    let ok = (0..a.dim()).all(|i| p.contains(&i) || ax[i] >= T::one() - kkt_tol::<T>());
    ok.then_some(x)
}

/// Projected steepest descent on `x'Ax - 2 1'x` with exact line search,
/// truncated at the first bound hit.
fn projected_gradient<T: Scalar>(a: &SquareMatrix<T>, iterations: usize) -> Vec<T> {
    let n = a.dim();
    let mut x: Vec<T> = (0..n)
        .map(|i| {
            let row = compensated_sum(a.row(i).iter().copied());
            T::one() / row.max(T::min_positive_value())
        })
        .collect();
    // scale to the best multiple along the ray
    let ax = a.mul_vec(&x);
    let (lin, quad) = (compensated_sum(x.iter().copied()), compensated_sum(x.iter().zip(&ax).map(|(&u, &v)| u * v)));
    let t = lin / quad;
    x.iter_mut().for_each(|v| *v = *v * t);
    for _ in 0..iterations {
        let ax = a.mul_vec(&x);
        let d: Vec<T> = (0..n)
            .map(|i| {
                let r = T::one() - ax[i];
                if x[i].is_zero() && r < T::zero() {
                    T::zero()
                } else {
                    r
                }
            })
            .collect();
        let dd = compensated_sum(d.iter().map(|&v| v * v));
        if dd.sqrt() <= T::epsilon() * T::from_count(n) {
            break;
        }
        let ad = a.mul_vec(&d);
        let curv = compensated_sum(d.iter().zip(&ad).map(|(&u, &v)| u * v));
        let mut step = if curv > T::zero() { dd / curv } else { T::infinity() };
        for i in 0..n {
            if d[i] < T::zero() {
                step = step.min(-x[i] / d[i]);
            }
        }
        if !step.is_finite() {
            break;
        }
        for i in 0..n {
            x[i] = (x[i] + step * d[i]).max(T::zero());
        }
    }
    x
}

/// Primal active-set method in the style of Lawson and Hanson.
fn active_set<T: Scalar>(a: &SquareMatrix<T>) -> Option<Vec<T>> {
    let n = a.dim();
    let tol = kkt_tol::<T>();
    let mut x = vec![T::zero(); n];
    let mut passive: Vec<usize> = Vec::new();
    for _ in 0..(4 * n + 10) {
        let ax = a.mul_vec(&x);
        let candidate = (0..n)
            .filter(|i| !passive.contains(i))
            .max_by(|&i, &j| (T::one() - ax[i]).partial_cmp(&(T::one() - ax[j])).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = candidate else { return Some(x) };
        if T::one() - ax[j] <= tol {
            return Some(x);
        }
        passive.push(j);
        passive.sort_unstable();
        for _ in 0..(n + 5) {
            let z = solve_dense(&a.principal(&passive), &vec![T::one(); passive.len()], T::epsilon() * T::lit(16.0))?;
            if z.iter().all(|&v| v > T::zero()) {
                for (slot, &i) in passive.iter().enumerate() {
                    x[i] = z[slot];
                }
                break;
            }
            let mut alpha = T::one();
            for (slot, &i) in passive.iter().enumerate() {
                if z[slot] <= T::zero() {
                    alpha = alpha.min(x[i] / (x[i] - z[slot]));
                }
            }
            for (slot, &i) in passive.iter().enumerate() {
                x[i] = x[i] + alpha * (z[slot] - x[i]);
            }
            let before = passive.len();
            passive.retain(|&i| x[i] > T::zero() && x[i] > T::epsilon() * T::lit(1e-3));
            for i in 0..n {
                if !passive.contains(&i) {
                    x[i] = T::zero();
                }
            }
            if passive.is_empty() || passive.len() == before {
                return None;
            }
        }
    }
    None
}

/// `cap(K) = 1 / min { mu' G mu : mu a probability measure on K }`.
///
/// Up to [`EXACT_ENUMERATION_MAX`] finite-diagonal atoms the minimum is found
/// exactly by enumerating faces of the simplex: on a face `P` the only
/// interior critical point is `z / sum z` with `G_PP z = 1`, of energy
/// `1 / sum z`. This holds for indefinite kernels as well. Larger sets fall
/// back to projected gradient on the simplex.
pub fn capacity_via_normalized_energy<T: Scalar>(g: &KernelMatrix<T>, k: &[usize]) -> Result<T> {
    let k = validate_subset(g, k)?;
    let (finite, _) = split_finite(g, &k);
    if finite.is_empty() {
        return Ok(T::zero());
    }
    let a = g.matrix().principal(&finite);
    let m = finite.len();
    if m > EXACT_ENUMERATION_MAX {
        let e = simplex_min_energy(&a, 20_000);
        return Ok(T::one() / e);
    }
    let best = (1u32..(1u32 << m))
        .filter_map(|mask| {
            let face: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
            let z = solve_dense(&a.principal(&face), &vec![T::one(); face.len()], T::epsilon() * T::lit(16.0))?;
            z.iter().all(|&v| v > T::zero()).then(|| compensated_sum(z))
        })
        .fold(T::zero(), |m, v| m.max(v));
    Ok(best)
}

fn simplex_min_energy<T: Scalar>(a: &SquareMatrix<T>, iterations: usize) -> T {
    let n = a.dim();
    let lip = (0..n).map(|i| compensated_sum(a.row(i).iter().map(|v| v.abs()))).fold(T::zero(), |m, v| m.max(v));
    let step = T::one() / (lip + lip);
    let mut mu = vec![T::one() / T::from_count(n); n];
    for _ in 0..iterations {
        let grad = a.mul_vec(&mu);
        let y: Vec<T> = (0..n).map(|i| mu[i] - step * (grad[i] + grad[i])).collect();
        mu = project_to_simplex(&y);
    }
    a.quadratic_form(&mu)
}

/// Euclidean projection onto the probability simplex (sort-based).
fn project_to_simplex<T: Scalar>(y: &[T]) -> Vec<T> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (i, &v) in sorted.iter().enumerate() {
        cum = cum + v;
        let t = (cum - T::one()) / T::from_count(i + 1);
        if v - t > T::zero() {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(T::zero())).collect()
}
