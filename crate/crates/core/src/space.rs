//! Finite measure spaces, discrete measures and functions on them, and the
//! `L^p` / weak-`L^p` norms every other module consumes.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Atom labels: either opaque ids or coordinates in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points<T> {
    Coordinates(Vec<Vec<T>>),
    Ids(Vec<String>),
}

impl<T> Points<T> {
    pub fn len(&self) -> usize {
        match self {
            Points::Coordinates(c) => c.len(),
            Points::Ids(ids) => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Deserialize)]
struct RawSpace<T> {
    points: Points<T>,
    weights: Vec<T>,
}

/// A finite atomic measure space `(Omega, sigma)`; every atom carries positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace<T>", bound(deserialize = "T: Scalar"))]
pub struct FiniteSpace<T> {
    points: Points<T>,
    weights: Vec<T>,
}

impl<T: Scalar> TryFrom<RawSpace<T>> for FiniteSpace<T> {
    type Error = Error;

    fn try_from(raw: RawSpace<T>) -> Result<Self> {
        Self::new(raw.points, raw.weights)
    }
}

impl<T: Scalar> FiniteSpace<T> {
    pub fn new(points: Points<T>, weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("a space needs at least one atom"));
        }
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch { expected: weights.len(), found: points.len() });
        }
        if let Some(i) = weights.iter().position(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(invalid(format!("atom {i} has non-positive or non-finite weight {}", weights[i])));
        }
        match &points {
            Points::Ids(ids) => {
                let mut seen = HashSet::new();
                if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                    return Err(invalid(format!("duplicate point id {dup:?}")));
                }
            }
            Points::Coordinates(coords) => {
                let dim = coords[0].len();
                if dim == 0 {
                    return Err(invalid("coordinates must have dimension >= 1"));
                }
                for (i, c) in coords.iter().enumerate() {
                    if c.len() != dim {
                        return Err(Error::ShapeMismatch { expected: dim, found: c.len() });
                    }
                    if c.iter().any(|v| !v.is_finite()) {
                        return Err(invalid(format!("point {i} has non-finite coordinates")));
                    }
                    if coords[..i].iter().any(|prev| prev == c) {
                        return Err(invalid(format!("point {i} duplicates an earlier point")));
                    }
                }
            }
        }
        Ok(Self { points, weights })
    }

    /// Space with ids `x0, x1, ...`.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let ids = (0..weights.len()).map(|i| format!("x{i}")).collect();
        Self::new(Points::Ids(ids), weights)
    }

    pub fn from_coordinates(coords: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        Self::new(Points::Coordinates(coords), weights)
    }

    /// `n` atoms of unit mass.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(vec![T::one(); n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn points(&self) -> &Points<T> {
        &self.points
    }

    pub fn coordinates(&self) -> Option<&[Vec<T>]> {
        match &self.points {
            Points::Coordinates(c) => Some(c),
            Points::Ids(_) => None,
        }
    }

    pub fn total_mass(&self) -> T {
        crate::scalar::compensated_sum(self.weights.iter().copied())
    }

    /// Same atoms with every weight multiplied by `t > 0`.
    pub fn scaled(&self, t: T) -> Result<Self> {
        Self::new(self.points.clone(), self.weights.iter().map(|&w| w * t).collect())
    }

    /// `sigma` itself viewed as a discrete measure.
    pub fn as_measure(&self) -> DiscreteMeasure<T> {
        DiscreteMeasure { mass: self.weights.clone() }
    }

    /// The measure `f sigma` for a nonnegative function `f`.
    pub fn weighted_measure(&self, f: &FunctionOnSpace<T>) -> Result<DiscreteMeasure<T>> {
        self.check_len(f.len())?;
        DiscreteMeasure::new(f.values.iter().zip(&self.weights).map(|(&v, &w)| v.mul_ext(w)).collect())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected: self.len(), found: len })
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// A nonnegative finite measure on the atoms of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure<T> {
    mass: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(mass: Vec<T>) -> Result<Self> {
        if let Some(i) = mass.iter().position(|m| !(*m >= T::zero()) || !m.is_finite()) {
            return Err(invalid(format!("mass at atom {i} must be finite and nonnegative, got {}", mass[i])));
        }
        Ok(Self { mass })
    }

    pub fn on(space: &FiniteSpace<T>, mass: Vec<T>) -> Result<Self> {
        space.check_len(mass.len())?;
        Self::new(mass)
    }

    pub fn zero(n: usize) -> Self {
        Self { mass: vec![T::zero(); n] }
    }

    /// Point mass `w` at atom `j` of an `n`-atom space.
    pub fn dirac(n: usize, j: usize, w: T) -> Result<Self> {
        if j >= n {
            return Err(invalid(format!("atom {j} out of range for {n} atoms")));
        }
        let mut m = Self::zero(n);
        m.mass[j] = w;
        Self::new(m.mass)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn total(&self) -> T {
        crate::scalar::compensated_sum(self.mass.iter().copied())
    }

    /// Atoms carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.support_above(T::zero())
    }

    /// Atoms with mass strictly above `threshold`.
    pub fn support_above(&self, threshold: T) -> Vec<usize> {
        (0..self.mass.len()).filter(|&i| self.mass[i] > threshold).collect()
    }
}

/// Extended-real valued function on the atoms of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionOnSpace<T> {
    values: Vec<T>,
}

impl<T: Scalar> FunctionOnSpace<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(invalid(format!("function value at atom {i} is NaN")));
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn is_finite_everywhere(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Integrability exponent; `Infinity` is a distinguished value rather than a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent<T> {
    Finite(T),
    Infinity,
}

impl<T: Scalar> Exponent<T> {
    /// Checked constructor: `p` must be positive; `+inf` maps to `Infinity`.
    pub fn new(p: T) -> Result<Self> {
        if p.is_infinite() && p > T::zero() {
            Ok(Exponent::Infinity)
        } else if p > T::zero() {
            Ok(Exponent::Finite(p))
        } else {
            Err(invalid(format!("exponent must be positive, got {p}")))
        }
    }

    fn validated(self) -> Result<Self> {
        match self {
            Exponent::Finite(p) => Self::new(p),
            Exponent::Infinity => Ok(self),
        }
    }
}

/// `(sum |f_i|^p sigma_i)^(1/p)`, or `max |f_i|` for `p = inf`.
pub fn lp_norm<T: Scalar>(f: &FunctionOnSpace<T>, p: Exponent<T>, space: &FiniteSpace<T>) -> Result<T> {
    space.check_len(f.len())?;
    match p.validated()? {
        Exponent::Infinity => Ok(f.sup()),
        Exponent::Finite(p) => Ok(weighted_power_norm(f.values(), space.weights(), p)),
    }
}

/// `(sum |v_i|^p w_i)^(1/p)` rescaled by the sup to avoid overflow.
pub(crate) fn weighted_power_norm<T: Scalar>(values: &[T], weights: &[T], p: T) -> T {
    let m = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if m.is_zero() {
        return T::zero();
    }
    if m.is_infinite() {
        return T::infinity();
    }
    let s = crate::scalar::compensated_sum(values.iter().zip(weights).map(|(&v, &w)| (v.abs() / m).powf(p) * w));
    m * s.powf(p.recip())
}

/// `sum |v_i|^p w_i` (the `p`-th power of the norm, no root taken).
pub(crate) fn weighted_power_sum<T: Scalar>(values: &[T], weights: &[T], p: T) -> T {
    if values.iter().zip(weights).any(|(v, w)| v.is_infinite() && *w > T::zero()) {
        return T::infinity();
    }
    crate::scalar::compensated_sum(values.iter().zip(weights).map(|(&v, &w)| {
        if v.is_zero() {
            T::zero()
        } else {
            v.abs().powf(p) * w
        }
    }))
}

/// Weak-`L^p` quasi-norm `sup_t t sigma({|f| > t})^(1/p)`, computed exactly.
///
/// On a finite space the supremum is attained as `t` approaches one of the
/// atom values from below, so it suffices to scan the values in decreasing
/// order with cumulative masses (ties grouped).
pub fn weak_lp_norm<T: Scalar>(f: &FunctionOnSpace<T>, p: Exponent<T>, space: &FiniteSpace<T>) -> Result<T> {
    space.check_len(f.len())?;
    let p = match p.validated()? {
        Exponent::Infinity => return Ok(f.sup()),
        Exponent::Finite(p) => p,
    };
    let mut order: Vec<usize> = (0..f.len()).filter(|&i| !f.values()[i].is_zero()).collect();
    order.sort_by(|&a, &b| f.values()[b].abs().partial_cmp(&f.values()[a].abs()).unwrap_or(Ordering::Equal));
    let mut best = T::zero();
    let mut cum = T::zero();
    let mut k = 0;
    while k < order.len() {
        let v = f.values()[order[k]].abs();
        while k < order.len() && f.values()[order[k]].abs() == v {
            cum = cum + space.weights()[order[k]];
            k += 1;
        }
        if v.is_infinite() {
            return Ok(T::infinity());
        }
        best = best.max(v * cum.powf(p.recip()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn f(v: &[f64]) -> FunctionOnSpace<f64> {
        FunctionOnSpace::new(v.to_vec()).unwrap()
    }

    fn sp(w: &[f64]) -> FiniteSpace<f64> {
        FiniteSpace::from_weights(w.to_vec()).unwrap()
    }

    /// Brute-force weak norm: evaluate `t sigma(|f| > t)^(1/p)` just below every atom value.
    fn weak_norm_scan(values: &[f64], weights: &[f64], p: f64) -> f64 {
        let mut best: f64 = 0.0;
        for &v in values {
            let v = v.abs();
            if v == 0.0 {
                continue;
            }
            for t in [v * (1.0 - 1e-12), v] {
                let mass: f64 = values.iter().zip(weights).filter(|(x, _)| x.abs() > t).map(|(_, w)| w).sum();
                best = best.max(t * mass.powf(1.0 / p));
            }
        }
        best
    }

    #[test]
    fn lp_norm_examples() {
        assert_relative_eq!(lp_norm(&f(&[1.0, 1.0]), Exponent::Finite(2.0), &sp(&[1.0, 1.0])).unwrap(), 2f64.sqrt());
        assert_relative_eq!(
            lp_norm(&f(&[3.0]), Exponent::Finite(0.5), &sp(&[2.0])).unwrap(),
            12.0,
            max_relative = 1e-14
        );
        assert_eq!(lp_norm(&f(&[0.0, 5.0]), Exponent::Infinity, &sp(&[1.0, 1.0])).unwrap(), 5.0);
    }

    #[test]
    fn weak_norm_examples() {
        assert_eq!(weak_lp_norm(&f(&[1.0, 1.0]), Exponent::Finite(1.0), &sp(&[1.0, 1.0])).unwrap(), 2.0);
        assert_eq!(weak_lp_norm(&f(&[0.0, 0.0]), Exponent::Finite(3.0), &sp(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(weak_lp_norm(&f(&[4.0]), Exponent::Finite(1.0), &sp(&[3.0])).unwrap(), 12.0);
    }

    #[test]
    fn nonpositive_exponent_rejected() {
        let err = lp_norm(&f(&[1.0]), Exponent::Finite(0.0), &sp(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(weak_lp_norm(&f(&[1.0]), Exponent::Finite(-1.0), &sp(&[1.0])).is_err());
        assert!(Exponent::new(-2.0f64).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
    }

    #[test]
    fn zero_weight_atoms_forbidden() {
        assert!(FiniteSpace::from_weights(vec![1.0, 0.0]).is_err());
        assert!(FiniteSpace::<f64>::from_weights(vec![]).is_err());
        assert!(FiniteSpace::from_coordinates(vec![vec![0.0], vec![0.0]], vec![1.0, 1.0]).is_err());
        assert!(FiniteSpace::new(Points::Ids(vec!["a".into(), "a".into()]), vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let err = lp_norm(&f(&[1.0, 2.0]), Exponent::Finite(1.0), &sp(&[1.0])).unwrap_err();
        assert_eq!(err, Error::ShapeMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn measure_support() {
        let m = DiscreteMeasure::new(vec![0.0, 2.0, 0.0, 1e-20]).unwrap();
        assert_eq!(m.support(), vec![1, 3]);
        assert_eq!(m.support_above(1e-12), vec![1]);
        assert!(DiscreteMeasure::new(vec![-1.0]).is_err());
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let s = FiniteSpace::from_coordinates(vec![vec![0.1, -2.5e-7], vec![1.0 / 3.0, 7.0]], vec![0.7, 1.0 / 7.0])
            .unwrap();
        let text = s.to_toml().unwrap();
        assert_eq!(FiniteSpace::<f64>::from_toml(&text).unwrap(), s);
        let ids = sp(&[1.5, 2.5]);
        assert_eq!(FiniteSpace::<f64>::from_toml(&ids.to_toml().unwrap()).unwrap(), ids);
    }

    #[test]
    fn invalid_toml_rejected() {
        let text = "points = [\"a\", \"b\"]\nweights = [1.0, 0.0]\n";
        assert!(FiniteSpace::<f64>::from_toml(text).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let v = lp_norm(
            &FunctionOnSpace::new(vec![3.0f32, 4.0]).unwrap(),
            Exponent::Finite(2.0),
            &FiniteSpace::uniform(2).unwrap(),
        )
        .unwrap();
        assert!((v - 5.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn chebyshev_weak_below_strong(
            vals in proptest::collection::vec(0.0f64..10.0, 1..8),
            seed_w in proptest::collection::vec(0.05f64..3.0, 8),
            p in 0.3f64..4.0,
        ) {
            let w = &seed_w[..vals.len()];
            let space = sp(w);
            let func = f(&vals);
            let weak = weak_lp_norm(&func, Exponent::Finite(p), &space).unwrap();
            let strong = lp_norm(&func, Exponent::Finite(p), &space).unwrap();
            prop_assert!(weak <= strong * (1.0 + 1e-12));
        }

        #[test]
        fn weak_norm_matches_threshold_scan(
            vals in proptest::collection::vec(prop_oneof![Just(1.0f64), Just(2.0), 0.0f64..5.0], 1..8),
            seed_w in proptest::collection::vec(0.05f64..3.0, 8),
            p in 0.3f64..4.0,
        ) {
            let w = &seed_w[..vals.len()];
            let fast = weak_lp_norm(&f(&vals), Exponent::Finite(p), &sp(w)).unwrap();
            let scan = weak_norm_scan(&vals, w, p);
            prop_assert!((fast - scan).abs() <= 1e-9 * fast.max(1.0));
        }

        #[test]
        fn lp_norm_is_homogeneous(
            vals in proptest::collection::vec(0.0f64..10.0, 1..8),
            c in 0.0f64..100.0,
            p in 0.3f64..4.0,
        ) {
            let space = FiniteSpace::uniform(vals.len()).unwrap();
            let base = lp_norm(&f(&vals), Exponent::Finite(p), &space).unwrap();
            let scaled = lp_norm(&f(&vals).scaled(c), Exponent::Finite(p), &space).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (c * base).max(1e-300));
        }
    }
}
