//! The `(p, r)` weighted norm inequality `||G(f sigma)||_{L^r} <= C ||f||_{L^p}`
//! for `0 < r < p`: best-constant search and the two-sided energy bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::energy;
use crate::error::{invalid, Result};
use crate::kernel::{quasi_symmetry_constant, symmetrize, wmp_constant, KernelMatrix, DEFAULT_WMP_MAX_SIZE};
use crate::linalg::SquareMatrix;
use crate::potential::potential_of_space;
use crate::scalar::Scalar;
use crate::space::{weighted_power_norm, FiniteSpace};

pub const DEFAULT_RESTARTS: usize = 32;

/// Relative slack allowed in `C_lower <= C_empirical <= C_upper`.
pub const SANDWICH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop a start once the relative gain per step falls below this.
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restarts: DEFAULT_RESTARTS, seed: 0, max_iter: 2000, tol: 1e-14 }
    }
}

/// Best value found by the ascent and where it was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome<T> {
    pub value: T,
    /// Maximizer normalized to unit `L^p(sigma)` norm (empty if the value is infinite).
    pub argmax: Vec<T>,
    /// Value reached from the deterministic test-function start.
    pub test_function_value: T,
    /// Number of starting points tried.
    pub starts: usize,
    /// Whether every start stopped on the tolerance rather than `max_iter`.
    pub converged: bool,
}

fn check_exponents<T: Scalar>(p: T, r: T) -> Result<()> {
    if !(p > T::one()) || !p.is_finite() {
        return Err(invalid(format!("p must be finite and > 1, got {p}")));
    }
    if !(r > T::zero() && r < p) {
        return Err(invalid(format!("r must lie in (0, p), got r = {r}, p = {p}")));
    }
    Ok(())
}

/// Maximizes `||A f||_{L^r(w)} / ||f||_{L^p(w)}` over `f >= 0` for a
/// nonnegative matrix `A` with finite entries.
struct Ascent<'a, T> {
    a: &'a SquareMatrix<T>,
    w: &'a [T],
    p: T,
    r: T,
    max_iter: usize,
    tol: T,
}

impl<T: Scalar> Ascent<'_, T> {
    fn normalize(&self, f: &mut [T]) {
        let norm = weighted_power_norm(f, self.w, self.p);
        if norm > T::zero() && norm.is_finite() {
            f.iter_mut().for_each(|v| *v = *v / norm);
        }
    }

    fn value(&self, f: &[T]) -> T {
        let num = weighted_power_norm(&self.a.mul_vec(f), self.w, self.r);
        num / weighted_power_norm(f, self.w, self.p)
    }

    /// `f_j <- [ (1/w_j) sum_i A_ij (Af)_i^(r-1) w_i ]^(1/(p-1))`, the
    /// stationarity condition of the Lagrangian.
    fn update(&self, f: &[T]) -> Vec<T> {
        let af = self.a.mul_vec(f);
        let top = af.iter().fold(T::zero(), |m, &v| m.max(v));
        let floor = top * T::epsilon().powi(4);
        let y: Vec<T> = af.iter().zip(self.w).map(|(&v, &w)| v.max(floor).powf(self.r - T::one()) * w).collect();
        let g = self.a.tr_mul_vec(&y);
        let e = (self.p - T::one()).recip();
        let mut next: Vec<T> = g.iter().zip(self.w).map(|(&gj, &wj)| (gj / wj).powf(e)).collect();
        self.normalize(&mut next);
        next
    }

    /// Runs from `f`, accepting only non-decreasing steps; returns the value,
    /// the final point and whether the tolerance was met.
    fn run(&self, mut f: Vec<T>) -> (T, Vec<T>, bool) {
        self.normalize(&mut f);
        let mut value = self.value(&f);
        for _ in 0..self.max_iter {
            let mut cand = self.update(&f);
            let mut cand_value = self.value(&cand);
            // for r < 1 the update need not ascend; back off geometrically
            let mut tries = 0;
            while !(cand_value >= value) && tries < 30 {
                cand = f.iter().zip(&cand).map(|(&u, &v)| (u * v).sqrt()).collect();
                self.normalize(&mut cand);
                cand_value = self.value(&cand);
                tries += 1;
            }
            if !(cand_value >= value) {
                return (value, f, true);
            }
            let gain = cand_value - value;
            f = cand;
            value = cand_value;
            if gain <= self.tol * value {
                return (value, f, true);
            }
        }
        (value, f, false)
    }
}

/// Unit-`L^p` random start: `f^p w` is uniform on the simplex.
fn dirichlet_start<T: Scalar>(w: &[T], p: T, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..w.len()).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = e.iter().sum();
    e.iter().zip(w).map(|(&x, &wi)| (T::lit(x / total) / wi).powf(p.recip())).collect()
}

fn run_starts<T: Scalar>(ascent: &Ascent<'_, T>, deterministic: Vec<Vec<T>>, opts: &SearchOptions) -> SearchOutcome<T> {
    let n = ascent.w.len();
    let fixed = deterministic.len();
    let starts: Vec<Vec<T>> = deterministic
        .into_iter()
        .chain((0..opts.restarts).map(|k| dirichlet_start(ascent.w, ascent.p, opts.seed.wrapping_add(k as u64))))
        .collect();
    let results: Vec<(T, Vec<T>, bool)> = starts.into_par_iter().map(|f| ascent.run(f)).collect();
    let test_function_value = results.first().map(|r| r.0).unwrap_or(T::zero());
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
    }
    let converged = results.iter().all(|r| r.2);
    let (value, argmax, _) = results.into_iter().nth(best).unwrap_or((T::zero(), vec![T::zero(); n], true));
    SearchOutcome { value, argmax, test_function_value, starts: fixed + opts.restarts, converged }
}

fn infinite_outcome<T: Scalar>() -> SearchOutcome<T> {
    SearchOutcome {
        value: T::infinity(),
        argmax: vec![],
        test_function_value: T::infinity(),
        starts: 0,
        converged: true,
    }
}

/// Best found `||G(f sigma)||_{L^r(sigma)} / ||f||_{L^p(sigma)}` over `f >= 0`.
///
/// Starts: the test function `(G sigma)^(r/(p-r))`, the constant function,
/// every indicator, and `opts.restarts` random points. The result is a
/// certified lower bound for the best constant, not the exact supremum.
pub fn embedding_constant_search<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    p: T,
    r: T,
    opts: &SearchOptions,
) -> Result<SearchOutcome<T>> {
    check_exponents(p, r)?;
    sigma.check_len(g.len())?;
    if g.has_infinite_diagonal() {
        // an indicator of a singular atom already has an infinite image
        return Ok(infinite_outcome());
    }
    let w = sigma.weights();
    let a = SquareMatrix::from_fn(g.len(), |i, j| g.get(i, j) * w[j]);
    let ascent = Ascent { a: &a, w, p, r, max_iter: opts.max_iter, tol: T::lit(opts.tol) };
    let g_sigma = potential_of_space(g, sigma)?;
    let test: Vec<T> = g_sigma.values().iter().map(|&v| v.powf(r / (p - r))).collect();
    Ok(run_starts(&ascent, standard_starts(test, g.len()), opts))
}

fn standard_starts<T: Scalar>(test: Vec<T>, n: usize) -> Vec<Vec<T>> {
    let mut starts = vec![test, vec![T::one(); n]];
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        starts.push(e);
    }
    starts
}

/// Empirical `(p, p)` norm of `f -> G(f sigma) / G sigma`.
pub fn strong_type_ratio_norm<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    p: T,
    opts: &SearchOptions,
) -> Result<SearchOutcome<T>> {
    if !(p > T::one()) || !p.is_finite() {
        return Err(invalid(format!("p must be finite and > 1, got {p}")));
    }
    sigma.check_len(g.len())?;
    let g_sigma = potential_of_space(g, sigma)?;
    if let Some(i) = g_sigma.values().iter().position(|v| !(*v > T::zero()) || v.is_infinite()) {
        return Err(crate::error::Error::UndefinedRatio { atom: i, value: g_sigma.values()[i].to_f64_lossy() });
    }
    let w = sigma.weights();
    let a = SquareMatrix::from_fn(g.len(), |i, j| g.get(i, j) * w[j] / g_sigma.values()[i]);
    let ascent = Ascent { a: &a, w, p, r: p, max_iter: opts.max_iter, tol: T::lit(opts.tol) };
    Ok(run_starts(&ascent, standard_starts(vec![T::one(); g.len()], g.len()), opts))
}

/// `pr / (p - r)`, the energy exponent of the inequality.
pub fn energy_exponent<T: Scalar>(p: T, r: T) -> T {
    p * r / (p - r)
}

/// `((p - r)/p) h^(-r/(p-r)) E^((p-r)/(pr))`, with `E = int (G sigma)^(pr/(p-r)) d sigma`.
pub fn necessity_lower_bound<T: Scalar>(g: &KernelMatrix<T>, sigma: &FiniteSpace<T>, p: T, r: T, h: T) -> Result<T> {
    check_exponents(p, r)?;
    check_h(h)?;
    let e = energy(g, sigma, energy_exponent(p, r))?.value;
    Ok(lower_from_energy(e, p, r, h))
}

fn lower_from_energy<T: Scalar>(e: T, p: T, r: T, h: T) -> T {
    if e.is_infinite() {
        return T::infinity();
    }
    (p - r) / p * h.powf(-r / (p - r)) * e.powf((p - r) / (p * r))
}

/// `M(p, h') = 2 (p/(p-1))^(1/p) h'^(1/p)`: strong `(p, p)` bound for an
/// operator of weak type `(1, 1)` with constant `h'` bounded on `L^inf` by 1.
pub fn interpolation_constant<T: Scalar>(p: T, h_prime: T) -> T {
    let two = T::lit(2.0);
    two * (p / (p - T::one())).powf(p.recip()) * h_prime.powf(p.recip())
}

/// `M(p, a h) E^((p-r)/(pr))`, where `h` is the WMP constant of the
/// symmetrized kernel and `a` the quasi-symmetry constant.
pub fn sufficiency_upper_bound<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    p: T,
    r: T,
    h_sym: T,
    a: T,
) -> Result<T> {
    check_exponents(p, r)?;
    check_h(h_sym)?;
    check_h(a)?;
    let e = energy(g, sigma, energy_exponent(p, r))?.value;
    Ok(upper_from_energy(e, p, r, a * h_sym))
}

fn upper_from_energy<T: Scalar>(e: T, p: T, r: T, h_prime: T) -> T {
    if e.is_infinite() {
        return T::infinity();
    }
    interpolation_constant(p, h_prime) * e.powf((p - r) / (p * r))
}

fn check_h<T: Scalar>(h: T) -> Result<()> {
    if h >= T::one() {
        Ok(())
    } else {
        Err(invalid(format!("structural constant must be >= 1 (and not NaN), got {h}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport<T> {
    pub p: T,
    pub r: T,
    /// WMP constant of `G` itself (used for the lower bound).
    pub h: T,
    /// WMP constant of the symmetrized kernel.
    pub h_sym: T,
    pub a: T,
    /// `a * h_sym`, the weak-type constant fed to the interpolation.
    pub h_inflated: T,
    pub interpolation: T,
    pub energy: T,
    pub c_lower: T,
    pub c_empirical: T,
    pub c_upper: T,
    pub converged: bool,
    pub sandwich_ok: bool,
    /// Infinite energy exactly when the empirical constant is infinite.
    pub finiteness_ok: bool,
}

/// Computes every constant of the two-sided characterization and checks
/// `C_lower <= C_empirical <= C_upper`.
pub fn verify_theorem_1_1_i<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    p: T,
    r: T,
    opts: &SearchOptions,
) -> Result<EmbeddingReport<T>> {
    check_exponents(p, r)?;
    let h = wmp_constant(g, DEFAULT_WMP_MAX_SIZE.max(g.len().min(16)))?.h;
    let h_sym =
        if g.is_symmetric() { h } else { wmp_constant(&symmetrize(g), DEFAULT_WMP_MAX_SIZE.max(g.len().min(16)))?.h };
    let a = quasi_symmetry_constant(g)?;
    verify_with_constants(g, sigma, p, r, h, h_sym, a, opts)
}

/// As [`verify_theorem_1_1_i`] with precomputed structural constants.
#[allow(clippy::too_many_arguments)]
pub fn verify_with_constants<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    p: T,
    r: T,
    h: T,
    h_sym: T,
    a: T,
    opts: &SearchOptions,
) -> Result<EmbeddingReport<T>> {
    check_exponents(p, r)?;
    check_h(h)?;
    check_h(h_sym)?;
    check_h(a)?;
    let e = energy(g, sigma, energy_exponent(p, r))?.value;
    let h_inflated = a * h_sym;
    let c_lower = lower_from_energy(e, p, r, h);
    let c_upper = upper_from_energy(e, p, r, h_inflated);
    let search = embedding_constant_search(g, sigma, p, r, opts)?;
    let slack = T::lit(SANDWICH_SLACK);
    let le = |x: T, y: T| x.is_infinite() && y.is_infinite() || x <= y + slack * y.abs().max(T::one());
    let sandwich_ok = le(c_lower, search.value) && le(search.value, c_upper);
    let finiteness_ok = e.is_finite() == search.value.is_finite();
    Ok(EmbeddingReport {
        p,
        r,
        h,
        h_sym,
        a,
        h_inflated,
        interpolation: interpolation_constant(p, h_inflated),
        energy: e,
        c_lower,
        c_empirical: search.value,
        c_upper,
        converged: search.converged,
        sandwich_ok,
        finiteness_ok,
    })
}
