//! Randomized instance families and the checks run over them.
//!
//! Every instance is generated from its own ChaCha8 stream seeded with
//! `seed + index`, and every runner returns rows in instance order, so a
//! suite produces identical output for identical seeds regardless of the
//! thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_via_normalized_energy, equilibrium};
use crate::embedding::{sufficiency_upper_bound, verify_with_constants, SearchOptions};
use crate::error::{invalid, Error, Result};
use crate::kernel::{
    make_quasimetric_kernel, make_riesz_cell_kernel, quasi_symmetry_constant, symmetrize, wmp_constant, KernelMatrix,
    DEFAULT_WMP_MAX_SIZE,
};
use crate::linalg::SquareMatrix;
use crate::potential::{check_pointwise_iteration, check_weak_type};
use crate::quadrature::QuadratureOptions;
use crate::riesz::riesz_semigroup_check;
use crate::scalar::Scalar;
use crate::solver::{
    check_lemma_3_2, check_lower_bound, default_psi, gagliardo_construct, lemma_gate, lr_integral, picard_solve,
    supersolution_defect, GagliardoOptions, LemmaGate, PicardOptions, SUPERSOLUTION_RTOL,
};
use crate::space::{FiniteSpace, FunctionOnSpace};

/// Instance families of the theorem suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Inverse multiquadrics on random points of the unit square.
    Quasimetric,
    /// Riesz cell kernels on random points of a segment.
    RieszLine,
    /// Riesz cell kernels on random points of the unit cube.
    RieszSpace,
    /// Random positive symmetric matrices.
    RandomSymmetric,
    /// Positive Gram matrices `B B^T + d I`, positive definite by construction.
    Gram,
    /// A kernel supplied by the caller; never generated.
    Explicit,
}

impl Family {
    pub const THEOREM: [Family; 4] =
        [Family::Quasimetric, Family::RieszLine, Family::RieszSpace, Family::RandomSymmetric];
    pub const CAPACITY: [Family; 3] = [Family::Quasimetric, Family::Gram, Family::RandomSymmetric];

    pub fn name(self) -> &'static str {
        match self {
            Family::Quasimetric => "quasimetric",
            Family::RieszLine => "riesz-line",
            Family::RieszSpace => "riesz-space",
            Family::RandomSymmetric => "random-symmetric",
            Family::Gram => "gram",
            Family::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub per_family: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 20_240_501, per_family: 60, min_atoms: 4, max_atoms: 10 }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_atoms == 0 || self.min_atoms > self.max_atoms {
            return Err(invalid("need 1 <= min_atoms <= max_atoms"));
        }
        if self.max_atoms > DEFAULT_WMP_MAX_SIZE {
            return Err(Error::SpaceTooLarge { size: self.max_atoms, max: DEFAULT_WMP_MAX_SIZE });
        }
        Ok(())
    }
}

/// A kernel with its measure and structural constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    pub id: usize,
    pub family: Family,
    pub kernel: KernelMatrix<T>,
    pub sigma: FiniteSpace<T>,
    /// WMP constant of the kernel.
    pub h: T,
    /// WMP constant of the symmetrized kernel.
    pub h_sym: T,
    /// Quasi-symmetry constant.
    pub a: T,
}

impl<T: Scalar> Instance<T> {
    pub fn atoms(&self) -> usize {
        self.kernel.len()
    }

    /// A constant valid for both the kernel and its symmetrization.
    pub fn h_max(&self) -> T {
        self.h.max(self.h_sym)
    }
}

/// Largest accepted WMP constant; random matrices above it are redrawn.
const H_CAP: f64 = 1e6;

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64))
}

fn lits<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn random_points(rng: &mut ChaCha8Rng, m: usize, dim: usize, side: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..dim).map(|_| rng.random_range(0.0..side)).collect()).collect()
}

/// Half the distance to the nearest other point.
fn cell_radii(points: &[Vec<f64>]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
                * 0.5
        })
        .collect()
}

fn random_kernel<T: Scalar>(family: Family, rng: &mut ChaCha8Rng, m: usize) -> Result<KernelMatrix<T>> {
    match family {
        Family::Quasimetric => {
            let pts = random_points(rng, m, 2, 1.0);
            let s = rng.random_range(0.5..3.0);
            let rho = rng.random_range(0.05..0.5);
            let pts: Vec<Vec<T>> = pts.iter().map(|p| lits(p)).collect();
            make_quasimetric_kernel(&pts, T::lit(s), T::lit(rho))
        }
        Family::RieszLine | Family::RieszSpace => {
            let (dim, side, amax) = if family == Family::RieszLine { (1, 10.0, 0.45) } else { (3, 1.0, 1.3) };
            let pts = random_points(rng, m, dim, side);
            let alpha = rng.random_range(0.1..amax);
            let radii = cell_radii(&pts);
            if radii.iter().any(|&r| !(r > 1e-6)) {
                return Err(invalid("random points too close"));
            }
            let pts: Vec<Vec<T>> = pts.iter().map(|p| lits(p)).collect();
            make_riesz_cell_kernel(&pts, &lits(&radii), T::lit(alpha), dim)
        }
        Family::RandomSymmetric => {
            let mut values = SquareMatrix::zeros(m);
            for i in 0..m {
                values.set(i, i, T::lit(rng.random_range(0.5..2.0)));
                for j in 0..i {
                    let v = T::lit(rng.random_range(0.05..1.0));
                    values.set(i, j, v);
                    values.set(j, i, v);
                }
            }
            KernelMatrix::from_matrix(values)
        }
        Family::Gram => {
            let rank = m + 2;
            let b: Vec<Vec<f64>> = (0..m).map(|_| (0..rank).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            let d = rng.random_range(0.01..0.5);
            let values = SquareMatrix::from_fn(m, |i, j| {
                let dot: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
                T::lit(dot / rank as f64 + if i == j { d } else { 0.0 })
            });
            KernelMatrix::from_matrix(values)
        }
        Family::Explicit => unreachable!("explicit kernels are rejected before drawing"),
    }
}

fn random_sigma<T: Scalar>(rng: &mut ChaCha8Rng, m: usize) -> Result<FiniteSpace<T>> {
    FiniteSpace::from_weights((0..m).map(|_| T::lit(rng.random_range(0.1..1.0))).collect())
}

/// Draws one instance; redraws (within the same stream) until the WMP
/// constant is finite and below the cap.
pub fn generate_instance<T: Scalar>(family: Family, seed: u64, id: usize, cfg: &SuiteConfig) -> Result<Instance<T>> {
    if family == Family::Explicit {
        return Err(invalid("explicit kernels are not generated"));
    }
    let mut rng = rng_for(seed, id);
    for _ in 0..100 {
        let m = rng.random_range(cfg.min_atoms..=cfg.max_atoms);
        let kernel = match random_kernel::<T>(family, &mut rng, m) {
            Ok(k) => k,
            Err(Error::InvalidParameter(_)) => continue,
            Err(e) => return Err(e),
        };
        let sigma = random_sigma(&mut rng, m)?;
        let h = wmp_constant(&kernel, DEFAULT_WMP_MAX_SIZE)?.h;
        if !(h.to_f64_lossy() <= H_CAP) {
            continue;
        }
        let h_sym = if kernel.is_symmetric() { h } else { wmp_constant(&symmetrize(&kernel), DEFAULT_WMP_MAX_SIZE)?.h };
        let a = quasi_symmetry_constant(&kernel)?;
        return Ok(Instance { id, family, kernel, sigma, h, h_sym, a });
    }
    Err(invalid(format!("could not draw an admissible {} instance", family.name())))
}

impl<T: Scalar> Instance<T> {
    /// Wraps a given kernel, computing its constants. Fails with
    /// [`Error::WmpFails`] when the kernel has no finite WMP constant.
    pub fn explicit(kernel: KernelMatrix<T>, sigma: FiniteSpace<T>) -> Result<Self> {
        sigma.check_len(kernel.len())?;
        let w = wmp_constant(&kernel, DEFAULT_WMP_MAX_SIZE)?;
        if w.fails {
            return Err(Error::WmpFails(
                w.witness.map(|w| format!("subset {:?}, point {}", w.subset, w.point)).unwrap_or_default(),
            ));
        }
        let h_sym =
            if kernel.is_symmetric() { w.h } else { wmp_constant(&symmetrize(&kernel), DEFAULT_WMP_MAX_SIZE)?.h };
        let a = quasi_symmetry_constant(&kernel)?;
        Ok(Instance { id: 0, family: Family::Explicit, kernel, sigma, h: w.h, h_sym, a })
    }
}

/// `per_family` instances of each family, ids running across families.
pub fn generate_suite<T: Scalar>(families: &[Family], cfg: &SuiteConfig) -> Result<Vec<Instance<T>>> {
    cfg.validate()?;
    let jobs: Vec<(usize, Family)> =
        families.iter().flat_map(|&f| std::iter::repeat_n(f, cfg.per_family)).enumerate().collect();
    jobs.par_iter().map(|&(id, f)| generate_instance(f, cfg.seed, id, cfg)).collect()
}

/// A positive definite kernel with a random nonempty subset `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityInstance<T> {
    pub id: usize,
    pub family: Family,
    pub kernel: KernelMatrix<T>,
    pub k: Vec<usize>,
}

/// Capacity suite: only positive definite kernels are kept, since the
/// equilibrium problem is then a strictly convex quadratic program.
pub fn generate_capacity_suite<T: Scalar>(families: &[Family], cfg: &SuiteConfig) -> Result<Vec<CapacityInstance<T>>> {
    cfg.validate()?;
    if families.contains(&Family::Explicit) {
        return Err(invalid("explicit kernels are not generated"));
    }
    let jobs: Vec<(usize, Family)> =
        families.iter().flat_map(|&f| std::iter::repeat_n(f, cfg.per_family)).enumerate().collect();
    jobs.par_iter()
        .map(|&(id, family)| {
            let mut rng = rng_for(cfg.seed, id);
            for _ in 0..1000 {
                let m = rng.random_range(cfg.min_atoms..=cfg.max_atoms);
                let kernel = match random_kernel::<T>(family, &mut rng, m) {
                    Ok(k) => k,
                    Err(Error::InvalidParameter(_)) => continue,
                    Err(e) => return Err(e),
                };
                if !kernel.matrix().is_positive_definite() {
                    continue;
                }
                let mut k: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.6)).collect();
                if k.is_empty() {
                    k.push(rng.random_range(0..m));
                }
                return Ok(CapacityInstance { id, family, kernel, k });
            }
            Err(invalid(format!("could not draw a positive definite {} kernel", family.name())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub id: usize,
    pub family: Family,
    pub atoms: usize,
    pub p: f64,
    pub r: f64,
    pub h: f64,
    pub h_sym: f64,
    pub a: f64,
    pub energy: f64,
    pub c_lower: f64,
    pub c_empirical: f64,
    pub c_upper: f64,
    pub converged: bool,
    pub ok: bool,
}

/// Two-sided embedding bounds for every instance and `(p, r)` pair.
pub fn run_sandwich<T: Scalar>(
    instances: &[Instance<T>],
    pairs: &[(T, T)],
    opts: &SearchOptions,
) -> Result<Vec<SandwichRow>> {
    let jobs: Vec<(&Instance<T>, (T, T))> =
        instances.iter().flat_map(|i| pairs.iter().map(move |&pr| (i, pr))).collect();
    jobs.par_iter()
        .map(|&(inst, (p, r))| {
            let o = SearchOptions { seed: opts.seed.wrapping_add(inst.id as u64), ..*opts };
            let rep = verify_with_constants(&inst.kernel, &inst.sigma, p, r, inst.h, inst.h_sym, inst.a, &o)?;
            Ok(SandwichRow {
                id: inst.id,
                family: inst.family,
                atoms: inst.atoms(),
                p: p.to_f64_lossy(),
                r: r.to_f64_lossy(),
                h: rep.h.to_f64_lossy(),
                h_sym: rep.h_sym.to_f64_lossy(),
                a: rep.a.to_f64_lossy(),
                energy: rep.energy.to_f64_lossy(),
                c_lower: rep.c_lower.to_f64_lossy(),
                c_empirical: rep.c_empirical.to_f64_lossy(),
                c_upper: rep.c_upper.to_f64_lossy(),
                converged: rep.converged,
                ok: rep.sandwich_ok && rep.finiteness_ok,
            })
        })
        .collect()
}

/// Tolerances of the solver checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverChecks {
    pub residual: f64,
    pub lower_bound: f64,
    pub lemma: f64,
    pub gagliardo: f64,
    pub lambda: f64,
}

impl Default for SolverChecks {
    fn default() -> Self {
        Self { residual: 1e-10, lower_bound: 1e-10, lemma: 1e-10, gagliardo: 1e-10, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub id: usize,
    pub family: Family,
    pub atoms: usize,
    pub q: f64,
    pub r: f64,
    pub start_constant: f64,
    pub halvings: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub monotone: bool,
    pub lower_bound_violation: f64,
    pub lower_bound_ok: bool,
    pub lr_integral: f64,
    pub norm_bound: f64,
    pub uniform_bound: f64,
    pub uniform_ok: bool,
    /// `in-range`, or which of the two conditions fails.
    pub lemma_gate: String,
    pub lemma_ratio: f64,
    pub lemma_ok: bool,
    pub kappa: f64,
    pub gagliardo_defect: f64,
    pub gagliardo_norm: f64,
    pub gagliardo_bound: f64,
    pub gagliardo_supersolution_defect: f64,
    pub gagliardo_ok: bool,
}

impl SolverRow {
    pub fn picard_ok(&self) -> bool {
        self.converged && self.monotone && self.lower_bound_ok && self.uniform_ok && self.lr_integral.is_finite()
    }
}

fn gate_name(g: LemmaGate) -> &'static str {
    match g {
        LemmaGate::InRange => "in-range",
        LemmaGate::RTooLarge => "r-too-large",
        LemmaGate::QTooLarge => "q-too-large",
        LemmaGate::Both => "both",
    }
}

/// Picard iteration, the pointwise lower bound, the energy comparison and
/// the supersolution construction for every instance and `(q, r)` pair.
pub fn run_solver<T: Scalar>(
    instances: &[Instance<T>],
    pairs: &[(T, T)],
    opts: &PicardOptions,
    checks: &SolverChecks,
) -> Result<Vec<SolverRow>> {
    let jobs: Vec<(&Instance<T>, (T, T))> =
        instances.iter().flat_map(|i| pairs.iter().map(move |&qr| (i, qr))).collect();
    jobs.par_iter().map(|&(inst, (q, r))| solver_row(inst, q, r, opts, checks)).collect()
}

fn solver_row<T: Scalar>(
    inst: &Instance<T>,
    q: T,
    r: T,
    opts: &PicardOptions,
    checks: &SolverChecks,
) -> Result<SolverRow> {
    let (g, sigma) = (&inst.kernel, &inst.sigma);
    let h = inst.h_max();
    let trace = picard_solve(g, sigma, q, r, h, inst.a, opts)?;
    let lower = check_lower_bound(&trace.u, g, sigma, q, inst.h)?;
    let lr = lr_integral(&trace.u, sigma, r)?;
    let uniform = trace.uniform_bound.unwrap_or(T::infinity());
    let slack = T::one() + T::lit(1e-9);
    let gate = lemma_gate(q, r);
    let (lemma_ratio, lemma_ok) = match check_lemma_3_2(&trace.u, g, sigma, q, r, inst.a)?.comparison {
        Some(c) => (c.ratio.to_f64_lossy(), c.ratio <= T::one() + T::lit(checks.lemma)),
        None => (f64::NAN, true),
    };
    // the construction needs an embedding constant for (p, pq) = (r/q, r)
    let p = r / q;
    let (kappa, gd, gn, gb, gs, gok) = if p > T::one() {
        let kappa = sufficiency_upper_bound(g, sigma, p, r, inst.h_sym, inst.a)?;
        let lambda = T::lit(checks.lambda);
        let psi = default_psi(sigma, p, lambda);
        let res = gagliardo_construct(g, sigma, q, p, kappa, lambda, &psi, &GagliardoOptions::default())?;
        let (sd, _) = supersolution_defect(&res.u, g, sigma, q)?;
        let ok =
            res.converged && res.defect <= T::lit(checks.gagliardo) && res.bound_ok && sd <= T::lit(SUPERSOLUTION_RTOL);
        (kappa, res.defect, res.norm, res.norm_bound, sd, ok)
    } else {
        let nan = T::nan();
        (nan, nan, nan, nan, nan, true)
    };
    Ok(SolverRow {
        id: inst.id,
        family: inst.family,
        atoms: inst.atoms(),
        q: q.to_f64_lossy(),
        r: r.to_f64_lossy(),
        start_constant: trace.c.to_f64_lossy(),
        halvings: trace.halvings,
        iterations: trace.residuals.len().saturating_sub(1),
        residual: trace.residual.to_f64_lossy(),
        converged: trace.residual <= T::lit(checks.residual),
        monotone: trace.all_monotone(),
        lower_bound_violation: lower.max_violation.to_f64_lossy(),
        lower_bound_ok: lower.holds(T::lit(checks.lower_bound)),
        lr_integral: lr.to_f64_lossy(),
        norm_bound: trace.norm_bound.to_f64_lossy(),
        uniform_bound: uniform.to_f64_lossy(),
        uniform_ok: trace.norm_bound <= uniform * slack,
        lemma_gate: gate_name(gate).to_string(),
        lemma_ratio,
        lemma_ok,
        kappa: kappa.to_f64_lossy(),
        gagliardo_defect: gd.to_f64_lossy(),
        gagliardo_norm: gn.to_f64_lossy(),
        gagliardo_bound: gb.to_f64_lossy(),
        gagliardo_supersolution_defect: gs.to_f64_lossy(),
        gagliardo_ok: gok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub id: usize,
    pub family: Family,
    pub atoms: usize,
    pub k_size: usize,
    pub capacity: f64,
    pub dual: f64,
    pub relative_gap: f64,
    pub residual: f64,
    pub energy: f64,
    pub mass: f64,
    pub identity_gap: f64,
    pub ok: bool,
}

/// Equilibrium measure against the normalized-energy formulation.
pub fn run_capacity<T: Scalar>(instances: &[CapacityInstance<T>], tol: f64) -> Result<Vec<CapacityRow>> {
    instances
        .par_iter()
        .map(|inst| {
            let eq = equilibrium(&inst.kernel, &inst.k)?;
            let dual = capacity_via_normalized_energy(&inst.kernel, &inst.k)?;
            let cap = eq.capacity;
            let gap = ((cap - dual) / cap.abs().max(T::min_positive_value())).abs();
            let mass = eq.total_mass();
            let scale = cap.abs().max(T::one());
            let identity = (eq.energy - mass).abs().max((mass - cap).abs()) / scale;
            let residual = eq.diagnostics.max_residual();
            let t = T::lit(tol);
            Ok(CapacityRow {
                id: inst.id,
                family: inst.family,
                atoms: inst.kernel.len(),
                k_size: eq.k.len(),
                capacity: cap.to_f64_lossy(),
                dual: dual.to_f64_lossy(),
                relative_gap: gap.to_f64_lossy(),
                residual: residual.to_f64_lossy(),
                energy: eq.energy.to_f64_lossy(),
                mass: mass.to_f64_lossy(),
                identity_gap: identity.to_f64_lossy(),
                ok: gap <= t && residual <= t && identity <= t,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub id: usize,
    pub family: Family,
    pub s: f64,
    pub max_ratio: f64,
    pub skipped: usize,
    pub ok: bool,
}

/// The iterated-potential inequality for every instance and exponent `s`.
pub fn run_pointwise<T: Scalar>(instances: &[Instance<T>], exponents: &[T], rel_tol: f64) -> Result<Vec<PointwiseRow>> {
    let jobs: Vec<(&Instance<T>, T)> = instances.iter().flat_map(|i| exponents.iter().map(move |&s| (i, s))).collect();
    jobs.par_iter()
        .map(|&(inst, s)| {
            let rep = check_pointwise_iteration(&inst.kernel, &inst.sigma, s, inst.h)?;
            Ok(PointwiseRow {
                id: inst.id,
                family: inst.family,
                s: s.to_f64_lossy(),
                max_ratio: rep.max_ratio.to_f64_lossy(),
                skipped: rep.skipped.len(),
                ok: rep.holds(T::lit(rel_tol)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeRow {
    pub id: usize,
    pub family: Family,
    pub trial: usize,
    pub weak_norm: f64,
    pub l1_norm: f64,
    pub h: f64,
    pub ratio: f64,
    pub ok: bool,
}

/// Weak-type estimate of the ratio operator for random positive densities,
/// one indicator per atom and the constant one.
pub fn run_weak_type<T: Scalar>(instances: &[Instance<T>], seed: u64, trials: usize) -> Result<Vec<WeakTypeRow>> {
    let per: Vec<Vec<WeakTypeRow>> = instances
        .par_iter()
        .map(|inst| {
            let m = inst.atoms();
            let mut rng = rng_for(seed, inst.id);
            let mut fs: Vec<Vec<T>> =
                (0..trials).map(|_| (0..m).map(|_| T::lit(rng.random_range(0.0..1.0))).collect()).collect();
            fs.extend((0..m).map(|j| (0..m).map(|i| if i == j { T::one() } else { T::zero() }).collect()));
            fs.push(vec![T::one(); m]);
            let h = inst.a * inst.h_sym;
            fs.into_iter()
                .enumerate()
                .map(|(trial, f)| {
                    let rep = check_weak_type(&inst.kernel, &inst.sigma, &FunctionOnSpace::new(f)?, h)?;
                    Ok(WeakTypeRow {
                        id: inst.id,
                        family: inst.family,
                        trial,
                        weak_norm: rep.weak_norm.to_f64_lossy(),
                        l1_norm: rep.l1_norm.to_f64_lossy(),
                        h: h.to_f64_lossy(),
                        ratio: rep.ratio.to_f64_lossy(),
                        ok: rep.ratio <= T::one() + T::lit(1e-12),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupRow {
    pub alpha: f64,
    pub gamma: f64,
    pub expected_exponent: f64,
    pub fitted_exponent: f64,
    pub constant: f64,
    pub ok: bool,
}

/// Power-law fits of the whole-line semigroup integral on `|x| in {2, 4, 8, 16}`.
pub fn run_semigroup<T: Scalar>(params: &[(T, T)], tol: f64, opts: &QuadratureOptions) -> Result<Vec<SemigroupRow>> {
    let xs: Vec<T> = [2.0, 4.0, 8.0, 16.0].iter().map(|&x| T::lit(x)).collect();
    params
        .par_iter()
        .map(|&(alpha, gamma)| {
            let rep = riesz_semigroup_check(alpha, gamma, 1, &xs, opts)?;
            let dev = (rep.fitted_exponent - rep.expected_exponent).abs();
            Ok(SemigroupRow {
                alpha: alpha.to_f64_lossy(),
                gamma: gamma.to_f64_lossy(),
                expected_exponent: rep.expected_exponent.to_f64_lossy(),
                fitted_exponent: rep.fitted_exponent.to_f64_lossy(),
                constant: rep.constant.to_f64_lossy(),
                ok: dev <= T::lit(tol),
            })
        })
        .collect()
}

/// Writes rows as CSV with a header line.
pub fn write_csv<R: Serialize>(rows: &[R], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// CSV text of the rows.
pub fn csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig { seed: 7, per_family: 3, min_atoms: 3, max_atoms: 6 }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_suite::<f64>(&Family::THEOREM, &small()).unwrap();
        let b = generate_suite::<f64>(&Family::THEOREM, &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|i| i.h >= 1.0 && i.h.is_finite() && i.a == 1.0));
        let c = generate_suite::<f64>(&Family::THEOREM, &SuiteConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn capacity_suite_is_positive_definite() {
        let s = generate_capacity_suite::<f64>(&Family::CAPACITY, &small()).unwrap();
        assert!(s.iter().all(|i| i.kernel.matrix().is_positive_definite() && !i.k.is_empty()));
        let rows = run_capacity(&s, 1e-8).unwrap();
        assert!(rows.iter().all(|r| r.ok), "{rows:?}");
    }

    #[test]
    fn small_suite_passes_all_checks() {
        let inst = generate_suite::<f64>(&Family::THEOREM, &small()).unwrap();
        let o = SearchOptions { restarts: 4, ..Default::default() };
        assert!(run_sandwich(&inst, &[(2.0, 1.0)], &o).unwrap().iter().all(|r| r.ok));
        let rows =
            run_solver(&inst, &[(0.5, 1.0), (0.3, 0.5)], &PicardOptions::default(), &SolverChecks::default()).unwrap();
        for r in &rows {
            assert!(r.picard_ok() && r.lemma_ok && r.gagliardo_ok, "{r:?}");
        }
        assert!(run_pointwise(&inst, &[1.0, 2.5], 1e-12).unwrap().iter().all(|r| r.ok));
        assert!(run_weak_type(&inst, 1, 2).unwrap().iter().all(|r| r.ok));
    }

    #[test]
    fn csv_is_stable() {
        let rows = run_semigroup(&[(0.25f64, 0.75), (0.1, 0.5)], 1e-2, &QuadratureOptions::default()).unwrap();
        let a = csv_string(&rows).unwrap();
        assert!(a.starts_with("alpha,gamma,expected_exponent,fitted_exponent,constant,ok\n"));
        assert_eq!(a, csv_string(&rows).unwrap());
    }
}
