//! Potentials `G nu`, `G* nu`, the pointwise iteration inequality for
//! `(G sigma)^s`, and the weak-type estimate for the ratio `G(f sigma) / G sigma`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::scalar::Scalar;
use crate::space::{lp_norm, weak_lp_norm, DiscreteMeasure, Exponent, FiniteSpace, FunctionOnSpace};

/// Values of a potential at the atoms; entries may be `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential<T> {
    values: Vec<T>,
}

impl<T: Scalar> Potential<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_infinite_at(&self, i: usize) -> bool {
        self.values[i].is_infinite()
    }

    pub fn infinite_atoms(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].is_infinite()).collect()
    }

    pub fn into_function(self) -> FunctionOnSpace<T> {
        FunctionOnSpace::new(self.values).expect("potentials are never NaN")
    }
}

fn check_shape<T: Scalar>(g: &KernelMatrix<T>, n: usize) -> Result<()> {
    if g.len() == n {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected: g.len(), found: n })
    }
}

/// `(G nu)(x_i) = sum_j G[i][j] nu_j`.
pub fn apply<T: Scalar>(g: &KernelMatrix<T>, nu: &DiscreteMeasure<T>) -> Result<Potential<T>> {
    check_shape(g, nu.len())?;
    Ok(Potential { values: g.matrix().mul_vec(nu.mass()) })
}

/// `(G* nu)(x_j) = sum_i G[i][j] nu_i`.
pub fn apply_adjoint<T: Scalar>(g: &KernelMatrix<T>, nu: &DiscreteMeasure<T>) -> Result<Potential<T>> {
    check_shape(g, nu.len())?;
    Ok(Potential { values: g.matrix().tr_mul_vec(nu.mass()) })
}

/// `G sigma`.
pub fn potential_of_space<T: Scalar>(g: &KernelMatrix<T>, sigma: &FiniteSpace<T>) -> Result<Potential<T>> {
    check_shape(g, sigma.len())?;
    Ok(Potential { values: g.matrix().mul_vec(sigma.weights()) })
}

/// `G(f sigma)`.
pub fn apply_density<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    f: &FunctionOnSpace<T>,
) -> Result<Potential<T>> {
    check_shape(g, sigma.len())?;
    apply(g, &sigma.weighted_measure(f)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport<T> {
    pub s: T,
    pub h: T,
    /// Largest `LHS / RHS` over atoms where both sides are finite.
    pub max_ratio: T,
    pub witness: Option<usize>,
    /// Atoms skipped because one side is infinite.
    pub skipped: Vec<usize>,
}

impl<T: Scalar> PointwiseReport<T> {
    pub fn holds(&self, rel_tol: T) -> bool {
        self.max_ratio <= T::one() + rel_tol
    }
}

/// Evaluates `(G sigma)^s <= s h^(s-1) G((G sigma)^(s-1) sigma)` at every atom.
pub fn check_pointwise_iteration<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    s: T,
    h: T,
) -> Result<PointwiseReport<T>> {
    if !(s >= T::one()) || !s.is_finite() {
        return Err(invalid(format!("pointwise iteration needs s >= 1, got {s}")));
    }
    if !(h >= T::one()) {
        return Err(invalid(format!("WMP constant must be >= 1, got {h}")));
    }
    let g_sigma = potential_of_space(g, sigma)?;
    // the density may be infinite at singular atoms, so skip measure validation
    let density: Vec<T> =
        g_sigma.values().iter().zip(sigma.weights()).map(|(&v, &w)| pow_ext(v, s - T::one()).mul_ext(w)).collect();
    let inner = g.matrix().mul_vec(&density);
    let factor = s * h.powf(s - T::one());
    let floor = T::lit(1e-300).max(T::min_positive_value());
    let mut report = PointwiseReport { s, h, max_ratio: T::zero(), witness: None, skipped: vec![] };
    for i in 0..g.len() {
        let lhs = pow_ext(g_sigma.values()[i], s);
        let rhs = factor * inner[i];
        if lhs.is_infinite() || rhs.is_infinite() {
            report.skipped.push(i);
            continue;
        }
        let ratio = lhs / rhs.max(floor);
        if report.witness.is_none() || ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.witness = Some(i);
        }
    }
    Ok(report)
}

/// `v^e` with `0^0 = 1` and `inf^e = inf` for `e > 0`.
pub(crate) fn pow_ext<T: Scalar>(v: T, e: T) -> T {
    if e.is_zero() {
        T::one()
    } else {
        v.powf(e)
    }
}

/// The ratio `G(f sigma) / G sigma`; requires `G sigma` positive and finite.
pub fn ratio_operator<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    f: &FunctionOnSpace<T>,
) -> Result<FunctionOnSpace<T>> {
    let g_sigma = potential_of_space(g, sigma)?;
    if let Some(i) = g_sigma.values().iter().position(|v| !(*v > T::zero()) || v.is_infinite()) {
        return Err(Error::UndefinedRatio { atom: i, value: g_sigma.values()[i].to_f64_lossy() });
    }
    let abs_f = f.map(|v| v.abs());
    let num = apply_density(g, sigma, &abs_f)?;
    FunctionOnSpace::new(num.values().iter().zip(g_sigma.values()).map(|(&a, &b)| a / b).collect())
}

/// `|| G(f sigma) / G sigma ||_{L^{1,inf}(sigma)}`.
pub fn weak_type_ratio_norm<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    f: &FunctionOnSpace<T>,
) -> Result<T> {
    let ratio = ratio_operator(g, sigma, f)?;
    weak_lp_norm(&ratio, Exponent::Finite(T::one()), sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeReport<T> {
    pub weak_norm: T,
    pub l1_norm: T,
    pub h: T,
    /// `weak_norm / (h ||f||_1)`; the estimate holds when this is at most one.
    pub ratio: T,
}

/// Checks `sigma(E_t) <= (h / t) ||f||_1` for every threshold `t` at once,
/// via the exact weak norm of the ratio operator.
pub fn check_weak_type<T: Scalar>(
    g: &KernelMatrix<T>,
    sigma: &FiniteSpace<T>,
    f: &FunctionOnSpace<T>,
    h: T,
) -> Result<WeakTypeReport<T>> {
    let weak_norm = weak_type_ratio_norm(g, sigma, f)?;
    let l1_norm = lp_norm(f, Exponent::Finite(T::one()), sigma)?;
    let bound = h * l1_norm;
    let ratio = if bound.is_zero() { T::zero() } else { weak_norm / bound };
    Ok(WeakTypeReport { weak_norm, l1_norm, h, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_riesz_kernel, wmp_constant};
    use crate::linalg::SquareMatrix;
    use proptest::prelude::*;

    fn k(rows: &[&[f64]]) -> KernelMatrix<f64> {
        KernelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn m(v: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = k(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(apply(&g, &m(&[1.0, 1.0])).unwrap().values(), &[3.0, 3.0]);
        assert_eq!(apply(&g, &m(&[0.0, 0.0])).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(apply(&g, &m(&[1.0, 0.0])).unwrap().values(), &[2.0, 1.0]);
    }

    #[test]
    fn adjoint_examples() {
        let g = k(&[&[1.0, 2.0], &[3.0, 1.0]]);
        assert_eq!(apply_adjoint(&g, &m(&[1.0, 0.0])).unwrap().values(), &[1.0, 2.0]);
        assert_eq!(apply_adjoint(&g, &m(&[0.0, 0.0])).unwrap().values(), &[0.0, 0.0]);
        let s = k(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(apply_adjoint(&s, &m(&[0.3, 0.7])).unwrap(), apply(&s, &m(&[0.3, 0.7])).unwrap());
    }

    #[test]
    fn shape_mismatch_reported() {
        let g = k(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(apply(&g, &m(&[1.0])).unwrap_err(), Error::ShapeMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn infinite_diagonal_propagates() {
        let g = make_riesz_kernel(&[vec![0.0], vec![1.0]], 0.25, 1).unwrap();
        let p = apply(&g, &m(&[1.0, 0.0])).unwrap();
        assert!(p.is_infinite_at(0));
        assert_eq!(p.values()[1], 1.0);
        assert_eq!(p.infinite_atoms(), vec![0]);
    }

    #[test]
    fn pointwise_s_equal_one_is_identity() {
        let g = k(&[&[2.0, 0.5, 1.0], &[0.5, 1.0, 0.3], &[1.0, 0.3, 4.0]]);
        let sigma = FiniteSpace::from_weights(vec![0.2, 1.0, 3.0]).unwrap();
        let r = check_pointwise_iteration(&g, &sigma, 1.0, 1.7).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pointwise_single_atom_has_slack_s() {
        let (gv, w, s) = (1.7, 0.6, 2.5);
        let g = k(&[&[gv]]);
        let sigma = FiniteSpace::from_weights(vec![w]).unwrap();
        let r = check_pointwise_iteration(&g, &sigma, s, 1.0).unwrap();
        assert!((r.max_ratio - 1.0 / s).abs() < 1e-14);
        assert!(check_pointwise_iteration(&g, &sigma, 0.5, 1.0).is_err());
    }

    #[test]
    fn pointwise_skips_infinite_atoms() {
        let g = make_riesz_kernel(&[vec![0.0], vec![1.0]], 0.25, 1).unwrap();
        let sigma = FiniteSpace::uniform(2).unwrap();
        let r = check_pointwise_iteration(&g, &sigma, 2.0, 1.0).unwrap();
        assert_eq!(r.skipped, vec![0, 1]);
        assert!(r.witness.is_none());
    }

    #[test]
    fn weak_ratio_examples() {
        let g = k(&[&[2.0]]);
        let sigma = FiniteSpace::from_weights(vec![0.5]).unwrap();
        let f = FunctionOnSpace::new(vec![3.0]).unwrap();
        assert!((weak_type_ratio_norm(&g, &sigma, &f).unwrap() - 1.5).abs() < 1e-15);

        let g = k(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let sigma = FiniteSpace::from_weights(vec![0.5, 1.5]).unwrap();
        let c = FunctionOnSpace::constant(2, 4.0);
        assert!((weak_type_ratio_norm(&g, &sigma, &c).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn undefined_ratio_reported() {
        let g = k(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let sigma = FiniteSpace::uniform(2).unwrap();
        let f = FunctionOnSpace::constant(2, 1.0);
        assert!(matches!(weak_type_ratio_norm(&g, &sigma, &f), Err(Error::UndefinedRatio { atom: 0, .. })));
    }

    fn sym_positive(n: usize) -> impl Strategy<Value = (KernelMatrix<f64>, FiniteSpace<f64>, Vec<f64>)> {
        (
            proptest::collection::vec(0.05f64..2.0, n * n),
            proptest::collection::vec(0.1f64..2.0, n),
            proptest::collection::vec(0.0f64..3.0, n),
        )
            .prop_map(move |(v, w, f)| {
                let g = KernelMatrix::from_matrix(SquareMatrix::from_fn(n, |i, j| {
                    if i <= j {
                        v[i * n + j]
                    } else {
                        v[j * n + i]
                    }
                }))
                .unwrap();
                (g, FiniteSpace::from_weights(w).unwrap(), f)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pointwise_inequality_holds_on_random_kernels((g, sigma, _) in sym_positive(6), s in 1.0f64..3.0) {
            let h = wmp_constant(&g, 12).unwrap().h;
            let r = check_pointwise_iteration(&g, &sigma, s, h).unwrap();
            prop_assert!(r.holds(1e-12), "ratio {}", r.max_ratio);
        }

        #[test]
        fn weak_type_holds_on_random_kernels((g, sigma, f) in sym_positive(5)) {
            let h = wmp_constant(&g, 12).unwrap().h;
            let f = FunctionOnSpace::new(f).unwrap();
            let r = check_weak_type(&g, &sigma, &f, h).unwrap();
            prop_assert!(r.ratio <= 1.0 + 1e-12, "ratio {}", r.ratio);
        }

        #[test]
        fn apply_is_linear_and_reproduces_columns((g, _, f) in sym_positive(4), c in 0.0f64..5.0, j in 0usize..4) {
            let a = m(&f);
            let b = DiscreteMeasure::new(f.iter().rev().copied().collect()).unwrap();
            let sum = DiscreteMeasure::new(a.mass().iter().zip(b.mass()).map(|(x, y)| c * x + y).collect()).unwrap();
            let lhs = apply(&g, &sum).unwrap();
            let (pa, pb) = (apply(&g, &a).unwrap(), apply(&g, &b).unwrap());
            for i in 0..4 {
                let rhs = c * pa.values()[i] + pb.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
            let col = apply(&g, &DiscreteMeasure::dirac(4, j, 1.0).unwrap()).unwrap();
            for i in 0..4 {
                prop_assert_eq!(col.values()[i], g.get(i, j));
            }
        }
    }
}
