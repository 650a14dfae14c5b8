//! Positive solutions and supersolutions of `u = G(u^q sigma)`, `0 < q < 1`.

use serde::{Deserialize, Serialize};

use crate::capacity::energy;
use crate::embedding::sufficiency_upper_bound;
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::potential::potential_of_space;
use crate::scalar::{compensated_sum, Scalar};
use crate::space::{weighted_power_norm, weighted_power_sum, FiniteSpace, FunctionOnSpace};

/// Maximum number of times the starting constant is halved.
pub const MAX_HALVINGS: usize = 40;

/// Pointwise relative slack when testing `G(u^q sigma) <= u`.
pub const SUPERSOLUTION_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Target for the relative sup-norm residual of the fixed-point equation.
    pub tol: f64,
    pub record_iterates: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, tol: 1e-12, record_iterates: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace<T> {
    pub q: T,
    pub r: T,
    /// Starting constant actually used.
    pub c: T,
    pub halvings: usize,
    pub u: FunctionOnSpace<T>,
    /// Recorded only with `record_iterates`.
    pub iterates: Vec<FunctionOnSpace<T>>,
    /// `||u_j||_{L^r(sigma)}` for every iterate, starting with `u_0`.
    pub norms: Vec<T>,
    /// Relative residual of `u_j` for every iterate.
    pub residuals: Vec<T>,
    pub monotone: Vec<bool>,
    pub converged: bool,
    /// Residual of the returned `u`.
    pub residual: T,
    /// `sup_j ||u_j||_r`.
    pub norm_bound: T,
    /// `C^(1/(1-q))` with `C` the upper embedding constant for `(r/q, r)`;
    /// absent when `r <= q`.
    pub uniform_bound: Option<T>,
    pub diverged: bool,
    /// Geometric mean of successive residual ratios over the last steps.
    pub rate: Option<T>,
}

impl<T: Scalar> PicardTrace<T> {
    pub fn all_monotone(&self) -> bool {
        self.monotone.iter().all(|&m| m)
    }
}

fn check_q<T: Scalar>(q: T) -> Result<()> {
    if q > T::zero() && q < T::one() {
        Ok(())
    } else {
        Err(invalid(format!("q must lie in (0, 1), got {q}")))
    }
}

/// `G(u^q sigma)`.
fn sublinear_map<T: Scalar>(g: &KernelMatrix<T>, w: &[T], u: &[T], q: T) -> Vec<T> {
    let y: Vec<T> = u.iter().zip(w).map(|(&v, &wi)| v.powf(q) * wi).collect();
    g.matrix().mul_vec(&y)
}

fn sup<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn rel_residual<T: Scalar>(u: &[T], gu: &[T]) -> T {
    let d = u.iter().zip(gu).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    d / sup(u).max(T::min_positive_value())
}

/// Starting constant `(1-q)^(1/(1-q)) h^(-q/(1-q)) a^(-1/(1-q))`.
pub fn picard_start_constant<T: Scalar>(q: T, h: T, a: T) -> T {
    let e = (T::one() - q).recip();
    (T::one() - q).powf(e) * h.powf(-q * e) * a.powf(-e)
}

/// Picard iteration `u_{j+1} = G(u_j^q sigma)` from `u_0 = c (G sigma)^(1/(1-q))`.
///
/// `h` must be a WMP constant valid for `G` and for its symmetrization
/// (the larger of the two works); `a` is the quasi-symmetry constant.
/// A decreasing step halves `c` and restarts.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
    r: T,
    h: T,
    a: T,
    opts: &PicardOptions,
) -> Result<PicardTrace<T>> {
    check_q(q)?;
    if !(r > T::zero()) || !r.is_finite() {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    if !(h >= T::one()) || !(a >= T::one()) {
        return Err(invalid(format!("structural constants must be >= 1, got h = {h}, a = {a}")));
    }
    let e = energy(g, sigma, r / (T::one() - q))?;
    if !e.is_finite() {
        return Err(invalid("energy of order r/(1-q) is infinite; no L^r solution exists"));
    }
    let uniform_bound = if r > q {
        Some(sufficiency_upper_bound(g, sigma, r / q, r, h, a)?.powf((T::one() - q).recip()))
    } else {
        None
    };
    let g_sigma = potential_of_space(g, sigma)?;
    let w = sigma.weights();
    let base: Vec<T> = g_sigma.values().iter().map(|&v| v.powf((T::one() - q).recip())).collect();
    let slack = T::one() - T::epsilon() * T::lit(64.0);
    let tol = T::lit(opts.tol);
    let mut c = picard_start_constant(q, h, a);
    let mut first_failure = (0, 0);
    'restart: for halvings in 0..=MAX_HALVINGS {
        let mut u: Vec<T> = base.iter().map(|&v| c * v).collect();
        let mut trace = PicardTrace {
            q,
            r,
            c,
            halvings,
            u: FunctionOnSpace::new(u.clone())?,
            iterates: vec![],
            norms: vec![],
            residuals: vec![],
            monotone: vec![],
            converged: false,
            residual: T::infinity(),
            norm_bound: T::zero(),
            uniform_bound,
            diverged: false,
            rate: None,
        };
        for step in 0..opts.max_iter {
            let next = sublinear_map(g, w, &u, q);
            if let Some(i) = (0..u.len()).find(|&i| !(next[i] >= u[i] * slack)) {
                first_failure = (step, i);
                c = c * T::lit(0.5);
                continue 'restart;
            }
            let norm = weighted_power_norm(&u, w, r);
            trace.norms.push(norm);
            trace.residuals.push(rel_residual(&u, &next));
            trace.monotone.push(true);
            if opts.record_iterates {
                trace.iterates.push(FunctionOnSpace::new(u.clone())?);
            }
            if let Some(b) = uniform_bound {
                if norm > b * (T::one() + T::lit(1e-9)) {
                    trace.diverged = true;
                }
            }
            let done = *trace.residuals.last().expect("pushed above") <= tol;
            u = next;
            if done {
                trace.converged = true;
                break;
            }
        }
        let after = sublinear_map(g, w, &u, q);
        trace.residual = rel_residual(&u, &after);
        trace.norm_bound = trace.norms.iter().fold(weighted_power_norm(&u, w, r), |m, &v| m.max(v));
        trace.rate = residual_rate(&trace.residuals);
        trace.u = FunctionOnSpace::new(u)?;
        return Ok(trace);
    }
    Err(Error::NotMonotone { halvings: MAX_HALVINGS, step: first_failure.0, atom: first_failure.1 })
}

fn residual_rate<T: Scalar>(res: &[T]) -> Option<T> {
    let tail: Vec<T> = res.iter().rev().take(10).copied().filter(|v| *v > T::zero()).collect();
    if tail.len() < 2 {
        return None;
    }
    let k = T::from_count(tail.len() - 1);
    Some((tail[0] / tail[tail.len() - 1]).powf(k.recip()))
}

/// Largest `G(u^q sigma) / u - 1` over atoms; positive means not a supersolution.
pub fn supersolution_defect<T: Scalar>(
    u: &FunctionOnSpace<T>,
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
) -> Result<(T, usize)> {
    sigma.check_len(u.len())?;
    let gu = sublinear_map(g, sigma.weights(), u.values(), q);
    let mut worst = (T::neg_infinity(), 0);
    for (i, (&l, &v)) in gu.iter().zip(u.values()).enumerate() {
        let d = l / v - T::one();
        if d > worst.0 {
            worst = (d, i);
        }
    }
    Ok(worst)
}

fn require_supersolution<T: Scalar>(
    u: &FunctionOnSpace<T>,
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
) -> Result<T> {
    if let Some(i) = u.values().iter().position(|v| !(*v > T::zero()) || v.is_infinite()) {
        return Err(invalid(format!("u must be positive and finite, got {} at atom {i}", u.values()[i])));
    }
    let (defect, atom) = supersolution_defect(u, g, sigma, q)?;
    if defect > T::lit(SUPERSOLUTION_RTOL) {
        let lhs = (defect + T::one()) * u.values()[atom];
        return Err(Error::NotSupersolution { atom, lhs: lhs.to_f64_lossy(), rhs: u.values()[atom].to_f64_lossy() });
    }
    Ok(defect)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport<T> {
    /// `(1-q)^(1/(1-q)) h^(-q/(1-q))`.
    pub constant: T,
    pub supersolution_defect: T,
    /// Largest relative shortfall `(bound - u)_+ / u`.
    pub max_violation: T,
    pub witness: usize,
}

impl<T: Scalar> LowerBoundReport<T> {
    pub fn holds(&self, rel_tol: T) -> bool {
        self.max_violation <= rel_tol
    }
}

/// Checks `u >= (1-q)^(1/(1-q)) h^(-q/(1-q)) (G sigma)^(1/(1-q))` for a supersolution `u`.
pub fn check_lower_bound<T: Scalar>(
    u: &FunctionOnSpace<T>,
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
    h: T,
) -> Result<LowerBoundReport<T>> {
    check_q(q)?;
    let defect = require_supersolution(u, g, sigma, q)?;
    let constant = picard_start_constant(q, h, T::one());
    let g_sigma = potential_of_space(g, sigma)?;
    let mut report = LowerBoundReport { constant, supersolution_defect: defect, max_violation: T::zero(), witness: 0 };
    for (i, (&gs, &v)) in g_sigma.values().iter().zip(u.values()).enumerate() {
        let bound = constant * gs.powf((T::one() - q).recip());
        let shortfall = ((bound - v) / v).max(T::zero());
        if shortfall > report.max_violation {
            report.max_violation = shortfall;
            report.witness = i;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LemmaGate {
    InRange,
    /// `r > 1 - q^2`.
    RTooLarge,
    /// `q > 1 - r^2`.
    QTooLarge,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison<T> {
    pub lhs: T,
    pub rhs: T,
    pub ratio: T,
}

impl<T: Scalar> EnergyComparison<T> {
    fn new(lhs: T, rhs: T) -> Self {
        Self { lhs, rhs, ratio: lhs / rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Report<T> {
    pub gate: LemmaGate,
    /// Present only when `gate` is `InRange`.
    pub comparison: Option<EnergyComparison<T>>,
}

pub fn lemma_gate<T: Scalar>(q: T, r: T) -> LemmaGate {
    let r_ok = r <= T::one() - q * q;
    let q_ok = q <= T::one() - r * r;
    match (r_ok, q_ok) {
        (true, true) => LemmaGate::InRange,
        (false, true) => LemmaGate::RTooLarge,
        (true, false) => LemmaGate::QTooLarge,
        (false, false) => LemmaGate::Both,
    }
}

/// `int (G sigma)^(r/(1-q)) d sigma <= a^(rq/((1-q)(1-r+q))) int u^r d sigma`
/// for a supersolution `u`, evaluated only when both range gates pass.
pub fn check_lemma_3_2<T: Scalar>(
    u: &FunctionOnSpace<T>,
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
    r: T,
    a: T,
) -> Result<Lemma32Report<T>> {
    check_q(q)?;
    if !(r > T::zero()) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    let gate = lemma_gate(q, r);
    if gate != LemmaGate::InRange {
        return Ok(Lemma32Report { gate, comparison: None });
    }
    require_supersolution(u, g, sigma, q)?;
    let one = T::one();
    let lhs = energy(g, sigma, r / (one - q))?.value;
    let rhs = a.powf(r * q / ((one - q) * (one - r + q))) * weighted_power_sum(u.values(), sigma.weights(), r);
    Ok(Lemma32Report { gate, comparison: Some(EnergyComparison::new(lhs, rhs)) })
}

/// `int (G sigma)^(r/(1-q)) <= (1-q)^(-r/(1-q)) h^(rq/(1-q)) int u^r`, the
/// integrated form of the pointwise lower bound.
pub fn check_energy_from_lower_bound<T: Scalar>(
    u: &FunctionOnSpace<T>,
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
    r: T,
    h: T,
) -> Result<EnergyComparison<T>> {
    check_q(q)?;
    let one = T::one();
    let lhs = energy(g, sigma, r / (one - q))?.value;
    let factor = (one - q).powf(-r / (one - q)) * h.powf(r * q / (one - q));
    Ok(EnergyComparison::new(lhs, factor * weighted_power_sum(u.values(), sigma.weights(), r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GagliardoOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GagliardoOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GagliardoResult<T> {
    /// The rescaled `phi_0` with `phi_0 >= [G(phi_0 sigma)]^q`.
    pub phi: FunctionOnSpace<T>,
    /// `u = phi_0^(1/q)`, a supersolution in `L^(pq)`.
    pub u: FunctionOnSpace<T>,
    pub lambda: T,
    pub kappa: T,
    pub p: T,
    pub q: T,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm increments of the fixed-point iteration.
    pub increments: Vec<T>,
    pub norm: T,
    pub norm_bound: T,
    pub bound_ok: bool,
    /// Largest `[G(phi_0 sigma)]^q / phi_0 - 1`.
    pub defect: T,
}

/// Constant `psi` with `||psi||_p = lambda / (2 (1 + lambda))`.
pub fn default_psi<T: Scalar>(sigma: &FiniteSpace<T>, p: T, lambda: T) -> FunctionOnSpace<T> {
    let target = lambda / (T::lit(2.0) * (T::one() + lambda));
    FunctionOnSpace::constant(sigma.len(), target / sigma.total_mass().powf(p.recip()))
}

/// Builds `phi` with `phi = psi + S phi / (1 + lambda)`, `S phi = kappa^(-q) [G(phi sigma)]^q`,
/// by monotone iteration from `psi`, then rescales by `[(1 + lambda) kappa^q]^(1/(1-q))`.
///
/// `kappa` must be a valid embedding constant for the pair `(p, pq)`.
#[allow(clippy::too_many_arguments)]
pub fn gagliardo_construct<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    q: T,
    p: T,
    kappa: T,
    lambda: T,
    psi: &FunctionOnSpace<T>,
    opts: &GagliardoOptions,
) -> Result<GagliardoResult<T>> {
    check_q(q)?;
    if !(p >= T::one()) || !p.is_finite() {
        return Err(invalid(format!("p must be finite and >= 1, got {p}")));
    }
    if !(kappa > T::zero()) || !kappa.is_finite() {
        return Err(invalid(format!("kappa must be positive and finite, got {kappa}")));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    sigma.check_len(psi.len())?;
    if psi.values().iter().any(|v| !(*v > T::zero()) || v.is_infinite()) {
        return Err(invalid("psi must be positive and finite"));
    }
    let one = T::one();
    let psi_norm = weighted_power_norm(psi.values(), sigma.weights(), p);
    if psi_norm > lambda / (one + lambda) {
        return Err(invalid(format!("||psi||_p = {psi_norm} exceeds lambda/(1+lambda)")));
    }
    let w = sigma.weights();
    let damp = (one + lambda).recip();
    let scale = kappa.powf(-q);
    let s_map = |phi: &[T]| -> Vec<T> {
        let gp = g.matrix().mul_vec(&phi.iter().zip(w).map(|(&f, &wi)| f * wi).collect::<Vec<_>>());
        gp.iter().map(|&v| scale * v.powf(q)).collect()
    };
    let tol = T::lit(opts.tol);
    let mut phi = psi.values().to_vec();
    let mut increments = vec![];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let s = s_map(&phi);
        let next: Vec<T> = psi.values().iter().zip(&s).map(|(&a, &b)| a + damp * b).collect();
        let inc = next.iter().zip(&phi).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        phi = next;
        increments.push(inc);
        if inc <= tol * sup(&phi) {
            converged = true;
            break;
        }
    }
    let c = ((one + lambda) * kappa.powf(q)).powf((one - q).recip());
    let phi0: Vec<T> = phi.iter().map(|&v| c * v).collect();
    let gp = g.matrix().mul_vec(&phi0.iter().zip(w).map(|(&f, &wi)| f * wi).collect::<Vec<_>>());
    let defect = gp.iter().zip(&phi0).fold(T::neg_infinity(), |m, (&gv, &f)| m.max(gv.powf(q) / f - one));
    let norm = weighted_power_norm(&phi0, w, p);
    let norm_bound = (one + lambda).powf((one - q).recip()) * kappa.powf(q / (one - q));
    let u: Vec<T> = phi0.iter().map(|&v| v.powf(q.recip())).collect();
    Ok(GagliardoResult {
        phi: FunctionOnSpace::new(phi0)?,
        u: FunctionOnSpace::new(u)?,
        lambda,
        kappa,
        p,
        q,
        iterations,
        converged,
        increments,
        norm,
        norm_bound,
        bound_ok: norm <= norm_bound * (one + T::lit(1e-12)),
        defect,
    })
}

/// `sum u_i^r sigma_i`.
pub fn lr_integral<T: Scalar>(u: &FunctionOnSpace<T>, sigma: &FiniteSpace<T>, r: T) -> Result<T> {
    sigma.check_len(u.len())?;
    Ok(compensated_sum(u.values().iter().zip(sigma.weights()).map(|(&v, &w)| v.powf(r) * w)))
}
