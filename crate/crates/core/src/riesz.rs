//! Riesz potentials of radial power densities in `R^n` and the truncated
//! counterexample: a measure with finite energy and bounded pointwise
//! functional whose measure-data embedding constant is infinite.
//!
//! `phi(x) = int_{|t|<R} |x - t|^-beta |t|^-gamma dt` with `eps = n - beta - gamma`
//! is the basic profile. Pieces `c_k |t - x_k|^-gamma_k` on `B(x_k, k)` are
//! summed with coefficients chosen so the energy and the pointwise functional
//! stay bounded in the truncation `N` while the lower bound for the embedding
//! constant grows like `log log N`.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::make_riesz_kernel;
use crate::potential::apply;
use crate::quadrature::{integrate, integrate_power_singular, Endpoint, QuadratureOptions, QuadratureResult};
use crate::scalar::{compensated_sum, Scalar};
use crate::space::{lp_norm, DiscreteMeasure, Exponent, FiniteSpace};

/// Relative error a profile evaluation must reach to be accepted.
pub const PHI_REL_TOL: f64 = 1e-4;

/// Surface measure of the unit sphere `S^(n-1)`; `omega_1 = 2`.
pub fn omega_n<T: Scalar>(n: usize) -> Result<T> {
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let (mut w, mut k) = if n % 2 == 1 { (T::lit(2.0), 1) } else { (two_pi, 2) };
    while k < n {
        w = w * two_pi / T::from_count(k);
        k += 2;
    }
    Ok(w)
}

fn check_profile<T: Scalar>(r: T, gamma: T, beta: T, n: usize) -> Result<T> {
    let nn = T::from_count(n);
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(r > T::zero()) || !r.is_finite() {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    if !(beta > T::zero() && beta < nn) {
        return Err(invalid(format!("need 0 < beta < n, got beta = {beta}")));
    }
    if !(gamma >= T::zero()) {
        return Err(invalid(format!("need gamma >= 0, got {gamma}")));
    }
    let eps = nn - beta - gamma;
    if !(eps > T::zero()) {
        return Err(invalid(format!("need n - beta - gamma > 0, got {eps}")));
    }
    Ok(eps)
}

fn two_regime<T: Scalar>(r: T, eps: T, beta: T, d: T) -> T {
    if d + d <= r {
        (r.powf(eps) - d.powf(eps)) / eps
    } else {
        r.powf(eps) * (r / d).powf(beta)
    }
}

/// Two-regime comparison value: `(R^eps - |x|^eps)/eps` for `|x| <= R/2`,
/// `R^eps (R/|x|)^beta` beyond.
pub fn phi_two_regime<T: Scalar>(r: T, gamma: T, beta: T, x: &[T]) -> Result<T> {
    let eps = check_profile(r, gamma, beta, x.len())?;
    Ok(two_regime(r, eps, beta, norm(x)))
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
}

/// Integrates `f` over `[a, b]`, splitting at the listed singular points and
/// removing each power singularity `|t - s|^-mu` by substitution.
fn integrate_piecewise<T: Scalar>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    singular: &[(T, T)],
    opts: &QuadratureOptions,
) -> QuadratureResult<T> {
    let mut cuts = vec![a, b];
    cuts.extend(singular.iter().map(|&(s, _)| s).filter(|&s| s > a && s < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut points"));
    cuts.dedup();
    let mu_at = |p: T| singular.iter().filter(|(s, _)| *s == p).fold(T::zero(), |m, &(_, e)| m + e);
    let mut parts = Vec::with_capacity(2 * cuts.len());
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let m = p + (q - p) * T::lit(0.5);
        for (lo, hi, e, side) in [(p, m, p, Endpoint::Left), (m, q, q, Endpoint::Right)] {
            let mu = mu_at(e);
            let part = if mu > T::zero() {
                // below a few ulps of |e| the distance to e is lost to rounding;
                // the regular part is continuous there, so evaluate it just inside
                let floor = T::epsilon() * T::lit(8.0) * (e.abs() + (hi - lo));
                let inward = if side == Endpoint::Left { floor } else { -floor };
                let reg = |t: T| {
                    let d = (t - e).abs();
                    if d < floor {
                        f(e + inward) * floor.powf(mu)
                    } else {
                        f(t) * d.powf(mu)
                    }
                };
                integrate_power_singular(reg, lo, hi, mu, side, opts)
            } else {
                integrate_power_singular(f, lo, hi, T::zero(), side, opts)
            };
            parts.push(part);
        }
    }
    QuadratureResult::combine(&parts)
}

fn accept<T: Scalar>(res: QuadratureResult<T>, rel_tol: f64) -> Result<QuadratureResult<T>> {
    let achieved = res.relative_error().to_f64_lossy();
    if res.converged && res.value.is_finite() && achieved <= rel_tol {
        Ok(res)
    } else {
        Err(Error::NoConvergence { iterations: res.evaluations, achieved })
    }
}

/// `phi_{R,gamma}(x)` by adaptive quadrature; `n = x.len()` must be 1, 2 or 3.
///
/// In `n = 1` the integral is taken directly. In `n = 3` the angular mean
/// has a closed form and only the radial integral is numerical; in `n = 2`
/// both are numerical.
pub fn phi_quadrature<T: Scalar>(
    r: T,
    gamma: T,
    beta: T,
    x: &[T],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult<T>> {
    let n = x.len();
    check_profile(r, gamma, beta, n)?;
    let res = match n {
        1 => phi_line(r, gamma, beta, x[0], opts),
        2 => phi_plane(r, gamma, beta, norm(x), opts),
        3 => phi_space(r, gamma, beta, norm(x), opts),
        _ => return Err(invalid(format!("profile quadrature supports n = 1, 2, 3, got {n}"))),
    };
    accept(res, PHI_REL_TOL.max(opts.rel_tol))
}

fn phi_line<T: Scalar>(r: T, gamma: T, beta: T, x: T, opts: &QuadratureOptions) -> QuadratureResult<T> {
    let f = |t: T| (x - t).abs().powf(-beta) * t.abs().powf(-gamma);
    integrate_piecewise(&f, -r, r, &[(T::zero(), gamma), (x, beta)], opts)
}

/// Radial singular points: the origin, plus the sphere `rho = |x|` whose
/// angular mean is singular with the given exponent (or log-singular,
/// handled with a mild substitution).
fn radial_singularities<T: Scalar>(gamma: T, beta: T, s: T, dim_minus_one: T) -> Vec<(T, T)> {
    if s.is_zero() {
        return vec![(T::zero(), gamma + beta - dim_minus_one)];
    }
    let mut out = vec![(T::zero(), gamma - dim_minus_one)];
    if beta > dim_minus_one {
        out.push((s, beta - dim_minus_one));
    } else if beta == dim_minus_one {
        out.push((s, T::lit(0.5)));
    }
    out
}

fn phi_space<T: Scalar>(r: T, gamma: T, beta: T, s: T, opts: &QuadratureOptions) -> QuadratureResult<T> {
    let four_pi = T::lit(4.0) * T::PI();
    let k = T::lit(2.0) - beta;
    let series = |big: T, small: T| {
        let u = small / big;
        four_pi * big.powf(-beta) * (T::one() + (k - T::one()) * (k - T::lit(2.0)) / T::lit(6.0) * u * u)
    };
    let angular = |rho: T| {
        if s.is_zero() {
            four_pi * rho.powf(-beta)
        } else if rho < s * T::lit(1e-3) {
            series(s, rho)
        } else if s < rho * T::lit(1e-3) {
            series(rho, s)
        } else if k.is_zero() {
            T::lit(2.0) * T::PI() / (s * rho) * ((s + rho) / (s - rho).abs()).ln()
        } else {
            T::lit(2.0) * T::PI() * ((s + rho).powf(k) - (s - rho).abs().powf(k)) / (k * s * rho)
        }
    };
    let f = |rho: T| rho.powf(T::lit(2.0) - gamma) * angular(rho);
    integrate_piecewise(&f, T::zero(), r, &radial_singularities(gamma, beta, s, T::lit(2.0)), opts)
}

fn phi_plane<T: Scalar>(r: T, gamma: T, beta: T, s: T, opts: &QuadratureOptions) -> QuadratureResult<T> {
    let inner_ok = Cell::new(true);
    let inner_opts = QuadratureOptions { graded_levels: 60, ..*opts };
    let angular = |rho: T| {
        if s.is_zero() {
            return T::lit(2.0) * T::PI() * rho.powf(-beta);
        }
        let d2 = (rho - s) * (rho - s);
        let g = |theta: T| {
            let h = (theta * T::lit(0.5)).sin();
            (d2 + T::lit(4.0) * s * rho * h * h).powf(-beta * T::lit(0.5))
        };
        let res = integrate(g, T::zero(), T::PI(), &inner_opts);
        if !res.converged {
            inner_ok.set(false);
        }
        T::lit(2.0) * res.value
    };
    let f = |rho: T| rho.powf(T::one() - gamma) * angular(rho);
    let mut res = integrate_piecewise(&f, T::zero(), r, &radial_singularities(gamma, beta, s, T::one()), opts);
    res.converged &= inner_ok.get();
    res
}

/// `phi_quadrature / phi_two_regime`.
pub fn ratio_envelope<T: Scalar>(r: T, gamma: T, beta: T, x: &[T], opts: &QuadratureOptions) -> Result<T> {
    let q = phi_quadrature(r, gamma, beta, x, opts)?;
    Ok(q.value / phi_two_regime(r, gamma, beta, x)?)
}

/// Closed form `omega_n R^e / e` of the pointwise functional of the radial
/// density `|t|^-gamma` on `B(0, R)`, with `e = n - gamma - q (n - 2 alpha)`.
pub fn radial_k_functional<T: Scalar>(r: T, gamma: T, q: T, alpha: T, n: usize) -> Result<T> {
    let nn = T::from_count(n);
    let e = nn - gamma - q * (nn - alpha - alpha);
    if !(r > T::zero()) || !(gamma >= T::zero()) {
        return Err(invalid("need R > 0 and gamma >= 0"));
    }
    if !(e > T::zero()) {
        return Err(invalid(format!("pointwise functional diverges: exponent {e} <= 0")));
    }
    Ok(omega_n::<T>(n)? * r.powf(e) / e)
}

fn check_semigroup<T: Scalar>(alpha: T, gamma: T, n: usize) -> Result<T> {
    if n != 1 {
        return Err(invalid(format!("semigroup constants are measured in n = 1 only, got n = {n}")));
    }
    let two_alpha = alpha + alpha;
    if !(two_alpha > T::zero() && two_alpha < T::one()) {
        return Err(invalid(format!("need 0 < 2 alpha < n, got alpha = {alpha}")));
    }
    if !(gamma > two_alpha && gamma < T::one()) {
        return Err(invalid(format!(
            "the integral over the whole line converges only for 2 alpha < gamma < n, got gamma = {gamma}"
        )));
    }
    Ok(T::one() - two_alpha)
}

/// `int_R |x - t|^-(1 - 2 alpha) |t|^-gamma dt` over the whole line.
///
/// The part beyond `|t| = L` is integrated exactly after the inversion
/// `t = L/s`, which leaves a power singularity at `s = 0`.
pub fn semigroup_value<T: Scalar>(alpha: T, gamma: T, x: T, opts: &QuadratureOptions) -> Result<QuadratureResult<T>> {
    let a = check_semigroup(alpha, gamma, 1)?;
    if x.is_zero() || !x.is_finite() {
        return Err(invalid("semigroup value needs x != 0"));
    }
    let big = T::lit(2.0) * x.abs() + T::one();
    let f = |t: T| (x - t).abs().powf(-a) * t.abs().powf(-gamma);
    let core = integrate_piecewise(&f, -big, big, &[(T::zero(), gamma), (x, a)], opts);
    let mu = T::lit(2.0) - a - gamma;
    let scale = big.powf(T::one() - a - gamma);
    let tail = |sign: T| {
        let h = |u: T| scale * (T::one() - sign * x * u / big).abs().powf(-a);
        integrate_power_singular(h, T::zero(), T::one(), mu, Endpoint::Left, opts)
    };
    let res = QuadratureResult::combine(&[core, tail(T::one()), tail(-T::one())]);
    accept(res, PHI_REL_TOL.max(opts.rel_tol))
}

/// The same integral truncated to `|t| < L`; defined for every `0 <= gamma < 1`,
/// so it can expose the logarithmic divergence at `gamma = 2 alpha`.
pub fn semigroup_truncated<T: Scalar>(alpha: T, gamma: T, x: T, big: T, opts: &QuadratureOptions) -> Result<T> {
    let two_alpha = alpha + alpha;
    if !(two_alpha > T::zero() && two_alpha < T::one()) || !(gamma >= T::zero() && gamma < T::one()) {
        return Err(invalid("need 0 < 2 alpha < 1 and 0 <= gamma < 1"));
    }
    if !(big > x.abs()) || x.is_zero() {
        return Err(invalid("need 0 < |x| < L"));
    }
    let a = T::one() - two_alpha;
    let f = |t: T| (x - t).abs().powf(-a) * t.abs().powf(-gamma);
    let res = integrate_piecewise(&f, -big, big, &[(T::zero(), gamma), (x, a)], opts);
    Ok(accept(res, PHI_REL_TOL.max(opts.rel_tol))?.value)
}

/// Measured constant `c` in `int |x - t|^-(n - 2 alpha) |t|^-gamma dt = c |x|^(2 alpha - gamma)`.
pub fn semigroup_constant<T: Scalar>(alpha: T, gamma: T, n: usize, opts: &QuadratureOptions) -> Result<T> {
    check_semigroup(alpha, gamma, n)?;
    Ok(semigroup_value(alpha, gamma, T::one(), opts)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport<T> {
    pub alpha: T,
    pub gamma: T,
    pub xs: Vec<T>,
    pub values: Vec<T>,
    pub expected_exponent: T,
    pub fitted_exponent: T,
    /// Measured `c`, the mean of `value / |x|^(2 alpha - gamma)` over the grid.
    pub constant: T,
    /// Largest relative deviation of `value / |x|^(2 alpha - gamma)` from `constant`.
    pub spread: T,
}

/// Evaluates the whole-line integral on `xs` and fits the power law on a log-log scale.
pub fn riesz_semigroup_check<T: Scalar>(
    alpha: T,
    gamma: T,
    n: usize,
    xs: &[T],
    opts: &QuadratureOptions,
) -> Result<SemigroupReport<T>> {
    check_semigroup(alpha, gamma, n)?;
    if xs.len() < 2 {
        return Err(invalid("need at least two |x| values to fit an exponent"));
    }
    let values =
        xs.iter().map(|&x| semigroup_value(alpha, gamma, x, opts).map(|r| r.value)).collect::<Result<Vec<T>>>()?;
    let lx: Vec<T> = xs.iter().map(|x| x.abs().ln()).collect();
    let ly: Vec<T> = values.iter().map(|v| v.ln()).collect();
    let m = T::from_count(xs.len());
    let mx = compensated_sum(lx.iter().copied()) / m;
    let my = compensated_sum(ly.iter().copied()) / m;
    let sxy = compensated_sum(lx.iter().zip(&ly).map(|(&a, &b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(lx.iter().map(|&a| (a - mx) * (a - mx)));
    if sxx.is_zero() {
        return Err(invalid("|x| values must not all coincide"));
    }
    let expected = alpha + alpha - gamma;
    let scaled: Vec<T> = xs.iter().zip(&values).map(|(x, v)| *v / x.abs().powf(expected)).collect();
    let constant = compensated_sum(scaled.iter().copied()) / m;
    let spread = scaled.iter().fold(T::zero(), |s, v| s.max((*v / constant - T::one()).abs()));
    Ok(SemigroupReport {
        alpha,
        gamma,
        xs: xs.to_vec(),
        values,
        expected_exponent: expected,
        fitted_exponent: sxy / sxx,
        constant,
        spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample<T> {
    pub radius: T,
    pub eps: T,
    pub x_ratio: T,
    pub quadrature: T,
    pub two_regime: T,
    pub ratio: T,
}

/// Worst two-sided ratio on one `(eps, R)` slice of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSlice<T> {
    pub eps: T,
    pub radius: T,
    pub constant: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport<T> {
    pub beta: T,
    pub n: usize,
    pub samples: Vec<EnvelopeSample<T>>,
    pub slices: Vec<EnvelopeSlice<T>>,
    /// `C*`: every sampled ratio lies in `[1/C*, C*]`.
    pub constant: T,
    /// Largest over smallest slice constant.
    pub drift: T,
}

impl<T: Scalar> EnvelopeReport<T> {
    pub fn within(&self, c: T) -> bool {
        self.samples.iter().all(|s| s.ratio <= c && s.ratio * c >= T::one())
    }
}

/// Compares the profile with its two-regime model on a grid of radii,
/// `eps` values and `|x|/R` ratios (points on the first axis).
pub fn envelope_constant<T: Scalar>(
    beta: T,
    n: usize,
    eps_values: &[T],
    radii: &[T],
    x_ratios: &[T],
    opts: &QuadratureOptions,
) -> Result<EnvelopeReport<T>> {
    let mut jobs = Vec::new();
    for &eps in eps_values {
        for &r in radii {
            for &xr in x_ratios {
                jobs.push((eps, r, xr));
            }
        }
    }
    if jobs.is_empty() {
        return Err(invalid("empty envelope grid"));
    }
    let nn = T::from_count(n);
    let samples = jobs
        .par_iter()
        .map(|&(eps, r, xr)| {
            let gamma = nn - beta - eps;
            let mut x = vec![T::zero(); n];
            x[0] = xr * r;
            let quadrature = phi_quadrature(r, gamma, beta, &x, opts)?.value;
            let model = phi_two_regime(r, gamma, beta, &x)?;
            Ok(EnvelopeSample { radius: r, eps, x_ratio: xr, quadrature, two_regime: model, ratio: quadrature / model })
        })
        .collect::<Result<Vec<_>>>()?;
    let two_sided = |s: &EnvelopeSample<T>| s.ratio.max(s.ratio.recip());
    let mut slices = Vec::new();
    for &eps in eps_values {
        for &r in radii {
            let c = samples.iter().filter(|s| s.eps == eps && s.radius == r).fold(T::one(), |m, s| m.max(two_sided(s)));
            slices.push(EnvelopeSlice { eps, radius: r, constant: c });
        }
    }
    let constant = slices.iter().fold(T::one(), |m, s| m.max(s.constant));
    let smallest = slices.iter().fold(T::infinity(), |m, s| m.min(s.constant));
    Ok(EnvelopeReport { beta, n, samples, slices, constant, drift: constant / smallest })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig<T> {
    pub n: usize,
    /// Half the Riesz order: the kernel is `|x - y|^(2 alpha - n)`.
    pub alpha: T,
    pub q: T,
    pub delta: T,
    /// Truncation `N`.
    pub pieces: usize,
}

impl Default for CounterexampleConfig<f64> {
    fn default() -> Self {
        Self { n: 1, alpha: 0.25, q: 0.5, delta: 1.0, pieces: 1000 }
    }
}

/// Largest truncation accepted.
pub const MAX_PIECES: usize = 1_000_000;

impl<T: Scalar> CounterexampleConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let nn = T::from_count(self.n);
        let two_alpha = self.alpha + self.alpha;
        if self.n == 0 || !(two_alpha > T::zero() && two_alpha < nn) {
            return Err(invalid("need n >= 1 and 0 < 2 alpha < n"));
        }
        if !(self.q > T::zero() && self.q < T::one()) {
            return Err(invalid(format!("need 0 < q < 1, got {}", self.q)));
        }
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(invalid(format!("need delta > 0, got {}", self.delta)));
        }
        if self.pieces == 0 || self.pieces > MAX_PIECES {
            return Err(invalid(format!("need 1 <= N <= {MAX_PIECES}, got {}", self.pieces)));
        }
        Ok(())
    }

    /// `beta = q (n - 2 alpha)`.
    pub fn beta(&self) -> T {
        self.q * (T::from_count(self.n) - self.alpha - self.alpha)
    }

    pub fn a(&self, k: usize) -> T {
        let k = T::from_count(k);
        (k * (k + T::one()).ln().powf(self.q.recip())).recip()
    }

    pub fn c(&self, k: usize) -> T {
        T::from_count(k).powf(-(T::lit(2.0) - self.q + self.delta))
    }

    pub fn eps(&self, k: usize) -> T {
        T::from_count(k).powf(-(T::one() + self.delta))
    }

    pub fn gamma(&self, k: usize) -> T {
        T::from_count(self.n) - self.beta() - self.eps(k)
    }

    /// First index with `max(0, 2 alpha) < gamma_k`, which the whole-space
    /// semigroup bound needs; `gamma_k` increases to `n - beta > 2 alpha`.
    pub fn first_index(&self) -> Result<usize> {
        self.validate()?;
        let floor = (self.alpha + self.alpha).max(T::zero());
        (1..=MAX_PIECES)
            .find(|&k| self.gamma(k) > floor)
            .ok_or_else(|| invalid("gamma_k never exceeds 2 alpha within the truncation limit"))
    }
}

/// One piece `c_k |t - x_k|^-gamma_k dt` on `B(x_k, R_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPieceMeasure<T> {
    pub index: usize,
    pub center: Vec<T>,
    pub radius: T,
    pub gamma: T,
    pub eps: T,
    pub coefficient: T,
}

/// Partial sums of the four sequence conditions, with analytic ceilings for
/// the three convergent ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSums<T> {
    pub sum_a: T,
    pub sum_a_ceiling: T,
    pub sup_c_over_eps: T,
    pub sup_c_over_eps_ceiling: T,
    pub sum_c_over_eps_pow: T,
    pub sum_c_over_eps_pow_ceiling: T,
    /// `sum c_k a_k^q / eps_k`, which must diverge.
    pub divergent_sum: T,
    /// Direct summation of `sum 1/(k log(k+1))` over the same range.
    pub harmonic_log_sum: T,
}

impl<T: Scalar> ConditionSums<T> {
    pub fn convergent_within_ceilings(&self) -> bool {
        self.sum_a <= self.sum_a_ceiling
            && self.sup_c_over_eps <= self.sup_c_over_eps_ceiling
            && self.sum_c_over_eps_pow <= self.sum_c_over_eps_pow_ceiling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample<T> {
    pub config: CounterexampleConfig<T>,
    pub first_index: usize,
    pub pieces: Vec<RadialPieceMeasure<T>>,
    pub conditions: ConditionSums<T>,
}

/// Builds pieces `k = k0..=N` with centers `-k e_1` and radii `k`.
pub fn build_counterexample<T: Scalar>(config: &CounterexampleConfig<T>) -> Result<Counterexample<T>> {
    let k0 = config.first_index()?;
    if k0 > config.pieces {
        return Err(invalid(format!("truncation N = {} is below the first admissible index {k0}", config.pieces)));
    }
    let ks = k0..=config.pieces;
    let pieces = ks
        .clone()
        .map(|k| {
            let mut center = vec![T::zero(); config.n];
            center[0] = -T::from_count(k);
            RadialPieceMeasure {
                index: k,
                center,
                radius: T::from_count(k),
                gamma: config.gamma(k),
                eps: config.eps(k),
                coefficient: config.c(k),
            }
        })
        .collect();
    Ok(Counterexample {
        config: *config,
        first_index: k0,
        pieces,
        conditions: condition_sums(config, k0, config.pieces),
    })
}

fn condition_sums<T: Scalar>(cfg: &CounterexampleConfig<T>, k0: usize, n: usize) -> ConditionSums<T> {
    let ks = k0..=n;
    let q = cfg.q;
    let sum_a = compensated_sum(ks.clone().map(|k| cfg.a(k)));
    let sup = ks.clone().fold(T::zero(), |m, k| m.max(cfg.c(k) / cfg.eps(k)));
    let sum_pow = compensated_sum(ks.clone().map(|k| cfg.c(k) / cfg.eps(k).powf(T::one() - q)));
    let divergent = compensated_sum(ks.clone().map(|k| cfg.c(k) * cfg.a(k).powf(q) / cfg.eps(k)));
    let harmonic_log = compensated_sum(ks.map(|k| {
        let kk = T::from_count(k);
        (kk * (kk + T::one()).ln()).recip()
    }));
    // a_k <= 1/(k (ln k)^(1/q)), decreasing for k >= 2, so the tail from m is
    // at most a_m plus the integral from m.
    let m = k0.max(2);
    let head = compensated_sum((k0..m).map(|k| cfg.a(k)));
    let lm = T::from_count(m).ln();
    let expo = q.recip() - T::one();
    let sum_a_ceiling = head + cfg.a(m) + lm.powf(-expo) / expo;
    // c_k / eps_k = k^(q - 1) and c_k / eps_k^(1 - q) = k^(-1 - delta q).
    let sup_ceiling = T::from_count(k0).powf(q - T::one());
    let s = cfg.delta * q;
    let kk0 = T::from_count(k0);
    let sum_pow_ceiling = kk0.powf(-T::one() - s) + kk0.powf(-s) / s;
    ConditionSums {
        sum_a,
        sum_a_ceiling,
        sup_c_over_eps: sup,
        sup_c_over_eps_ceiling: sup_ceiling,
        sum_c_over_eps_pow: sum_pow,
        sum_c_over_eps_pow_ceiling: sum_pow_ceiling,
        divergent_sum: divergent,
        harmonic_log_sum: harmonic_log,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedFunctionals<T> {
    pub pieces: usize,
    pub first_index: usize,
    /// `sum_k c_k (C_k R_k^(eps_k/(1-q)) / eps_k)^(1-q)` with measured
    /// `C_k = c_k^sg^(q/(1-q)) omega_n (1 - q)`; bounds `E(sigma_N)^(1-q)`
    /// up to the norm-equivalence constant of the energy.
    pub energy_bound: T,
    /// Sampled sup of `sum_k c_k phi_two_regime(x - x_k)`.
    pub k_value: T,
    pub k_argmax: T,
    /// Largest sum of `c_k R_k^eps_k / eps_k` over four consecutive pieces.
    pub k_ceiling_near: T,
    /// `sum c_k (R_k^eps_k - 1) / eps_k`.
    pub k_ceiling_middle: T,
    /// `sum c_k R_k^eps_k`.
    pub k_ceiling_far: T,
    /// `omega_n sum_k c_k a_k^q R_k^eps_k / eps_k`.
    pub kappa_lower: T,
    /// `omega_n sum_k 1 / (k log(k+1))` over the same range.
    pub kappa_oracle: T,
    pub semigroup_min: T,
    pub semigroup_max: T,
}

struct PieceTerms<T> {
    energy: T,
    kappa: T,
    near: T,
    middle: T,
    far: T,
    semigroup: T,
}

fn piece_terms<T: Scalar>(
    cfg: &CounterexampleConfig<T>,
    k: usize,
    omega: T,
    opts: &QuadratureOptions,
) -> Result<PieceTerms<T>> {
    let q = cfg.q;
    let (c, eps, gamma) = (cfg.c(k), cfg.eps(k), cfg.gamma(k));
    let r = T::from_count(k);
    let sg = semigroup_constant(cfg.alpha, gamma, cfg.n, opts)?;
    let one_q = T::one() - q;
    let piece_energy = sg.powf(q / one_q) * omega * one_q * r.powf(eps / one_q) / eps;
    let r_eps = r.powf(eps);
    Ok(PieceTerms {
        energy: c * piece_energy.powf(one_q),
        kappa: omega * c * cfg.a(k).powf(q) * r_eps / eps,
        near: c * r_eps / eps,
        middle: c * (r_eps - T::one()) / eps,
        far: c * r_eps,
        semigroup: sg,
    })
}

/// Truncated functionals at `config.pieces`.
pub fn counterexample_functionals<T: Scalar>(
    config: &CounterexampleConfig<T>,
    opts: &QuadratureOptions,
) -> Result<TruncatedFunctionals<T>> {
    Ok(counterexample_sweep(config, &[config.pieces], opts)?.remove(0))
}

/// Truncated functionals at several `N`, sharing the per-piece terms.
pub fn counterexample_sweep<T: Scalar>(
    config: &CounterexampleConfig<T>,
    truncations: &[usize],
    opts: &QuadratureOptions,
) -> Result<Vec<TruncatedFunctionals<T>>> {
    config.validate()?;
    let k0 = config.first_index()?;
    let n_max = truncations.iter().copied().max().ok_or_else(|| invalid("no truncations given"))?;
    for &n in truncations {
        CounterexampleConfig { pieces: n, ..*config }.validate()?;
        if n < k0 {
            return Err(invalid(format!("truncation N = {n} is below the first admissible index {k0}")));
        }
    }
    let omega = omega_n::<T>(config.n)?;
    let terms =
        (k0..=n_max).into_par_iter().map(|k| piece_terms(config, k, omega, opts)).collect::<Result<Vec<_>>>()?;
    let beta = config.beta();
    truncations
        .iter()
        .map(|&n| {
            let t = &terms[..=n - k0];
            let near = t
                .iter()
                .enumerate()
                .map(|(i, _)| compensated_sum(t[i.saturating_sub(1)..(i + 3).min(t.len())].iter().map(|p| p.near)))
                .fold(T::zero(), T::max);
            let (k_value, k_argmax) = sampled_sup(config, k0, n, beta);
            let oracle = compensated_sum((k0..=n).map(|k| {
                let kk = T::from_count(k);
                (kk * (kk + T::one()).ln()).recip()
            }));
            Ok(TruncatedFunctionals {
                pieces: n,
                first_index: k0,
                energy_bound: compensated_sum(t.iter().map(|p| p.energy)),
                k_value,
                k_argmax,
                k_ceiling_near: near,
                k_ceiling_middle: compensated_sum(t.iter().map(|p| p.middle)),
                k_ceiling_far: compensated_sum(t.iter().map(|p| p.far)),
                kappa_lower: compensated_sum(t.iter().map(|p| p.kappa)),
                kappa_oracle: omega * oracle,
                semigroup_min: t.iter().fold(T::infinity(), |m, p| m.min(p.semigroup)),
                semigroup_max: t.iter().fold(T::zero(), |m, p| m.max(p.semigroup)),
            })
        })
        .collect()
}

/// Points on the first axis where the pointwise functional is sampled:
/// centers, midpoints of consecutive centers, the origin and `+-2^m` up to `2N`.
pub fn sample_grid<T: Scalar>(k0: usize, n: usize) -> Vec<T> {
    let mut xs: Vec<T> = (k0..=n).map(|k| -T::from_count(k)).collect();
    xs.extend((k0..n).map(|k| -T::from_count(k) - T::lit(0.5)));
    xs.push(T::zero());
    let mut m = T::one();
    while m <= T::from_count(2 * n) {
        xs.push(m);
        xs.push(-m);
        m = m + m;
    }
    xs
}

fn sampled_sup<T: Scalar>(cfg: &CounterexampleConfig<T>, k0: usize, n: usize, beta: T) -> (T, T) {
    let pieces: Vec<(T, T, T)> = (k0..=n).map(|k| (T::from_count(k), cfg.eps(k), cfg.c(k))).collect();
    let xs = sample_grid::<T>(k0, n);
    let values: Vec<T> = xs
        .par_iter()
        .map(|&x| compensated_sum(pieces.iter().map(|&(r, eps, c)| c * two_regime(r, eps, beta, (x + r).abs()))))
        .collect();
    xs.iter()
        .zip(&values)
        .fold((T::zero(), T::zero()), |(best, at), (&x, &v)| if v > best { (v, x) } else { (best, at) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationCheck<T> {
    pub atoms: usize,
    /// `||I_{2 alpha} nu||_{L^q(sigma_N)}^q` on the discretized measure.
    pub discrete: T,
    /// Partial sum of `kappa_lower` over the same pieces.
    pub kappa_partial: T,
}

impl<T: Scalar> DiscretizationCheck<T> {
    pub fn holds(&self, rel_tol: T) -> bool {
        self.discrete >= self.kappa_partial * (T::one() - rel_tol)
    }
}

/// Discretizes `sigma_N` (n = 1) onto cells graded toward each center and
/// evaluates the measure-data functional of `nu = sum a_k delta_{center_k}`.
///
/// Each cell's atom sits at the mean-value distance for which the cell mass
/// times `a_k^q s^-beta` equals the exact integral of the own-piece term, so
/// the discrete value dominates the partial sum up to rounding.
pub fn discretization_check<T: Scalar>(
    config: &CounterexampleConfig<T>,
    levels: usize,
) -> Result<DiscretizationCheck<T>> {
    config.validate()?;
    if config.n != 1 {
        return Err(invalid("the discretization check is implemented in n = 1"));
    }
    if config.pieces > 20 {
        return Err(invalid("the discretization check is meant for at most 20 pieces"));
    }
    let ce = build_counterexample(config)?;
    let beta = config.beta();
    let one = T::one();
    let mut coords: Vec<Vec<T>> = Vec::new();
    let mut weights: Vec<T> = Vec::new();
    let mut kappa_terms = Vec::new();
    let omega = omega_n::<T>(1)?;
    for p in &ce.pieces {
        let (g, eps) = (p.gamma, p.eps);
        let mass = |d0: T, d1: T| (d1.powf(one - g) - d0.powf(one - g)) / (one - g);
        let own = |d0: T, d1: T| (d1.powf(eps) - d0.powf(eps)) / eps;
        let mut edges = vec![T::zero()];
        edges.extend((0..=levels).rev().map(|j| p.radius * T::lit(0.5).powi(j as i32)));
        for w in edges.windows(2) {
            let (m, o) = (mass(w[0], w[1]), own(w[0], w[1]));
            let s = (m / o).powf(beta.recip());
            for sign in [-one, one] {
                coords.push(vec![p.center[0] + sign * s]);
                weights.push(p.coefficient * m);
            }
        }
        kappa_terms.push(omega * p.coefficient * config.a(p.index).powf(config.q) * p.radius.powf(eps) / eps);
    }
    let atoms = coords.len();
    let sigma = FiniteSpace::from_coordinates(coords.clone(), weights)?;
    let mut all = coords;
    all.extend(ce.pieces.iter().map(|p| p.center.clone()));
    let g = make_riesz_kernel(&all, config.alpha, 1)?;
    let mut mass = vec![T::zero(); atoms];
    mass.extend(ce.pieces.iter().map(|p| config.a(p.index)));
    let pot = apply(&g, &DiscreteMeasure::new(mass)?)?;
    let on_sigma = crate::space::FunctionOnSpace::new(pot.values()[..atoms].to_vec())?;
    let norm = lp_norm(&on_sigma, Exponent::Finite(config.q), &sigma)?;
    Ok(DiscretizationCheck { atoms, discrete: norm.powf(config.q), kappa_partial: compensated_sum(kappa_terms) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn opts() -> QuadratureOptions {
        QuadratureOptions::default()
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(omega_n::<f64>(1).unwrap(), 2.0);
        assert_relative_eq!(omega_n::<f64>(2).unwrap(), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(omega_n::<f64>(3).unwrap(), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(omega_n::<f64>(4).unwrap(), 2.0 * std::f64::consts::PI.powi(2), max_relative = 1e-15);
        assert!(omega_n::<f64>(0).is_err());
    }

    #[test]
    fn profile_at_origin_line() {
        for &(r, gamma, beta) in &[(1.0, 0.3, 0.5), (10.0, 0.0, 0.9), (3.0, 0.48, 0.5)] {
            let eps: f64 = 1.0 - beta - gamma;
            let v = phi_quadrature(r, gamma, beta, &[0.0], &opts()).unwrap().value;
            assert_relative_eq!(v, 2.0 * r.powf(eps) / eps, max_relative = 1e-8);
        }
    }

    #[test]
    fn profile_at_origin_higher_dims() {
        let (r, gamma, beta) = (2.0f64, 0.7, 1.5);
        let v3 = phi_quadrature(r, gamma, beta, &[0.0, 0.0, 0.0], &opts()).unwrap().value;
        let e3 = 3.0 - beta - gamma;
        assert_relative_eq!(v3, 4.0 * std::f64::consts::PI * r.powf(e3) / e3, max_relative = 1e-8);
        let v2 = phi_quadrature(r, 0.2, 1.2, &[0.0, 0.0], &opts()).unwrap().value;
        let e2: f64 = 2.0 - 1.2 - 0.2;
        assert_relative_eq!(v2, 2.0 * std::f64::consts::PI * r.powf(e2) / e2, max_relative = 1e-8);
    }

    #[test]
    fn profile_far_field() {
        // phi(x) |x|^beta -> int_{|t|<R} |t|^-gamma dt as |x| -> inf
        let (r, gamma, beta) = (1.0f64, 0.4, 0.3);
        let mass = 2.0 / (1.0 - gamma);
        let mut prev = f64::INFINITY;
        for &x in &[4.0, 16.0, 64.0, 256.0] {
            let v = phi_quadrature(r, gamma, beta, &[x], &opts()).unwrap().value;
            let dev = (v * x.powf(beta) / mass - 1.0).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
        let s = 3.0f64.sqrt();
        let v3 = phi_quadrature(1.0, 0.5, 1.5, &[100.0 / s, 100.0 / s, 100.0 / s], &opts()).unwrap().value;
        let m3 = 4.0 * std::f64::consts::PI / 2.5;
        assert_relative_eq!(v3 * 100f64.powf(1.5), m3, max_relative = 1e-3);
        let v2 = phi_quadrature(1.0, 0.5, 1.2, &[0.0, 100.0], &opts()).unwrap().value;
        let m2 = 2.0 * std::f64::consts::PI / 1.5;
        assert_relative_eq!(v2 * 100f64.powf(1.2), m2, max_relative = 1e-3);
    }

    #[test]
    fn profile_reflection_symmetry() {
        for &x in &[0.1, 0.5, 1.0, 2.5] {
            let a = phi_quadrature(1.0, 0.3, 0.6, &[x], &opts()).unwrap().value;
            let b = phi_quadrature(1.0, 0.3, 0.6, &[-x], &opts()).unwrap().value;
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn profile_rotation_invariance() {
        let a = phi_quadrature(1.0, 0.5, 1.3, &[0.6, 0.0], &opts()).unwrap().value;
        let b = phi_quadrature(1.0, 0.5, 1.3, &[0.6 * 0.6, 0.6 * 0.8], &opts()).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-6);
        let a = phi_quadrature(1.0, 0.5, 2.2, &[0.0, 0.0, 0.7], &opts()).unwrap().value;
        let b = phi_quadrature(1.0, 0.5, 2.2, &[0.7, 0.0, 0.0], &opts()).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn line_profile_matches_direct_antiderivative() {
        // gamma = 0: int_{-R}^{R} |x - t|^-beta dt in closed form.
        let (r, beta) = (1.0f64, 0.6);
        for &x in &[0.0, 0.3, 1.0, 3.0] {
            let f = |a: f64, b: f64| (b.powf(1.0 - beta) - a.powf(1.0 - beta)) / (1.0 - beta);
            let exact: f64 = if x <= r { f(0.0, r - x) + f(0.0, r + x) } else { f(x - r, x + r) };
            let v = phi_quadrature(r, 0.0, beta, &[x], &opts()).unwrap().value;
            assert_relative_eq!(v, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn two_regime_values() {
        let (r, gamma, beta) = (4.0f64, 0.2, 0.5);
        let eps = 1.0 - beta - gamma;
        assert_relative_eq!(phi_two_regime(r, gamma, beta, &[0.0]).unwrap(), r.powf(eps) / eps);
        assert_relative_eq!(phi_two_regime(r, gamma, beta, &[r]).unwrap(), r.powf(eps));
        let inner = phi_two_regime(r, gamma, beta, &[r / 2.0]).unwrap();
        let outer = r.powf(eps) * 2f64.powf(beta);
        let ratio = inner / outer;
        assert!(ratio > 0.1 && ratio < 10.0 && (ratio - 1.0).abs() > 1e-3);
    }

    #[test]
    fn profile_domain_errors() {
        assert!(phi_quadrature(1.0, 0.5, 0.5, &[0.0], &opts()).is_err());
        assert!(phi_quadrature(1.0, 0.2, 0.0, &[0.0], &opts()).is_err());
        assert!(phi_quadrature(-1.0, 0.2, 0.5, &[0.0], &opts()).is_err());
        assert!(phi_quadrature(1.0, 0.2, 0.5, &[0.0; 4], &opts()).is_err());
        assert!(phi_two_regime(1.0, 0.6, 0.5, &[0.0]).is_err());
    }

    #[test]
    fn k_functional_closed_form() {
        // eps = 1 - gamma - q (1 - 2 alpha) = 1/4 with q = 1/2, 2 alpha = 1/2.
        let k = radial_k_functional(1.0f64, 0.5, 0.5, 0.25, 1).unwrap();
        assert_relative_eq!(k, 8.0);
        let k2 = radial_k_functional(2.0f64, 0.5, 0.5, 0.25, 1).unwrap();
        assert_relative_eq!(k2 / k, 2f64.powf(0.25), max_relative = 1e-15);
        let quad = phi_quadrature(1.0f64, 0.5, 0.25, &[0.0], &opts()).unwrap().value;
        assert_relative_eq!(quad, k, max_relative = 1e-8);
        assert!(radial_k_functional(1.0f64, 0.75, 0.5, 0.25, 1).is_err());
    }

    #[test]
    fn semigroup_power_law() {
        let rep = riesz_semigroup_check(0.25f64, 0.75, 1, &[2.0, 4.0, 8.0, 16.0], &opts()).unwrap();
        assert!((rep.fitted_exponent + 0.25).abs() < 1e-6, "{}", rep.fitted_exponent);
        assert!(rep.spread < 1e-6);
        let v1 = semigroup_value(0.25f64, 0.75, 3.0, &opts()).unwrap().value;
        let v2 = semigroup_value(0.25f64, 0.75, 6.0, &opts()).unwrap().value;
        assert_relative_eq!(v2 / v1, 2f64.powf(-0.25), max_relative = 1e-7);
        let vm = semigroup_value(0.25f64, 0.75, -3.0, &opts()).unwrap().value;
        assert_relative_eq!(vm, v1, max_relative = 1e-9);
    }

    #[test]
    fn semigroup_domain() {
        assert!(semigroup_constant(0.25f64, 0.5, 1, &opts()).is_err());
        assert!(semigroup_constant(0.25f64, 1.0, 1, &opts()).is_err());
        assert!(semigroup_constant(0.25f64, 0.75, 2, &opts()).is_err());
    }

    #[test]
    fn semigroup_blows_up_near_threshold() {
        let far = semigroup_constant(0.25f64, 0.75, 1, &opts()).unwrap();
        let near = semigroup_constant(0.25f64, 0.5 + 1e-3, 1, &opts()).unwrap();
        assert!(near > 100.0 * far);
        // at gamma = 2 alpha the truncated integrals grow like 2 log L
        let a = semigroup_truncated(0.25f64, 0.5, 1.0, 1e2, &opts()).unwrap();
        let b = semigroup_truncated(0.25f64, 0.5, 1.0, 1e4, &opts()).unwrap();
        assert_relative_eq!(b - a, 2.0 * 100f64.ln(), max_relative = 1e-2);
    }

    #[test]
    fn sequences_at_first_index() {
        let cfg = CounterexampleConfig::default();
        assert_relative_eq!(cfg.a(1), 1.0 / 2f64.ln().powi(2), max_relative = 1e-15);
        assert_relative_eq!(cfg.c(1), 1.0);
        assert_relative_eq!(cfg.eps(1), 1.0);
        assert!(cfg.gamma(1) < 0.0);
        assert_eq!(cfg.first_index().unwrap(), 3);
        assert!((cfg.gamma(100_000) - 0.75).abs() < 1e-9);
    }

    #[test]
    fn counterexample_pieces() {
        let cfg = CounterexampleConfig { pieces: 50, ..Default::default() };
        let ce = build_counterexample(&cfg).unwrap();
        assert_eq!(ce.pieces.len(), 48);
        let p = &ce.pieces[0];
        assert_eq!(p.index, 3);
        assert_eq!(p.center, vec![-3.0]);
        assert_eq!(p.radius, 3.0);
        assert!(ce.conditions.convergent_within_ceilings());
        assert_relative_eq!(ce.conditions.divergent_sum, ce.conditions.harmonic_log_sum, max_relative = 1e-12);
        assert!(build_counterexample(&CounterexampleConfig { pieces: 2, ..cfg }).is_err());
        assert!(build_counterexample(&CounterexampleConfig { q: 1.0, ..cfg }).is_err());
    }

    #[test]
    fn functionals_are_monotone() {
        let cfg = CounterexampleConfig { pieces: 200, ..Default::default() };
        let s = counterexample_sweep(&cfg, &[10, 50, 200], &opts()).unwrap();
        for w in s.windows(2) {
            assert!(w[1].kappa_lower > w[0].kappa_lower);
            assert!(w[1].energy_bound > w[0].energy_bound);
            assert!(w[1].k_value >= w[0].k_value);
        }
        for f in &s {
            assert!(f.kappa_lower >= f.kappa_oracle);
            assert!(f.semigroup_min > 0.0 && f.semigroup_max.is_finite());
        }
    }

    #[test]
    fn discretization_dominates_partial_sum() {
        let cfg = CounterexampleConfig { pieces: 8, ..Default::default() };
        let chk = discretization_check(&cfg, 24).unwrap();
        assert!(chk.holds(1e-10), "{chk:?}");
        assert!(chk.discrete < 10.0 * chk.kappa_partial);
    }
}

#[cfg(test)]
mod oracle {
    use super::*;
    use approx::assert_relative_eq;

    /// `int_R |1 - t|^-a |t|^-b dt = B(1-a, a+b-1) + B(1-b, a+b-1) + B(1-a, 1-b)`
    /// from splitting at 0 and 1 and inverting the unbounded pieces.
    fn line_semigroup(a: f64, b: f64) -> f64 {
        let beta = |x: f64, y: f64| libm::tgamma(x) * libm::tgamma(y) / libm::tgamma(x + y);
        beta(1.0 - a, a + b - 1.0) + beta(1.0 - b, a + b - 1.0) + beta(1.0 - a, 1.0 - b)
    }

    #[test]
    fn semigroup_constant_matches_beta_functions() {
        let o = QuadratureOptions::default();
        for &(alpha, gamma) in &[(0.25, 0.75), (0.25, 0.6), (0.1, 0.5), (0.4, 0.9), (0.3, 0.61), (0.05, 0.2)] {
            let c = semigroup_constant(alpha, gamma, 1, &o).unwrap();
            assert_relative_eq!(c, line_semigroup(1.0 - 2.0 * alpha, gamma), max_relative = 1e-8);
        }
    }
}
