//! Kernel matrices on finite spaces and exact computation of their
//! structural constants: quasi-symmetry `a`, weak-maximum-principle `h`,
//! and quasimetric `kappa`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::SquareMatrix;
use crate::lp::{maximize, LpOutcome};
use crate::scalar::Scalar;

/// Default cap on the number of atoms for the exponential WMP enumeration.
pub const DEFAULT_WMP_MAX_SIZE: usize = 12;

/// How a kernel matrix was produced; kept for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelKind<T> {
    Matrix,
    /// `|x - y|^(2 alpha - n)`; the diagonal is `+inf` unless cell radii are
    /// given, in which case it is the mean self-interaction of a ball.
    Riesz {
        alpha: T,
        dimension: usize,
        points: Vec<Vec<T>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cell_radii: Option<Vec<T>>,
    },
    /// `(|x - y|^2 + offset^2)^(-exponent / 2)`.
    Quasimetric {
        points: Vec<Vec<T>>,
        exponent: T,
        offset: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StructuralConstants<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct KernelDocument<T> {
    #[serde(flatten)]
    kind: KernelKind<T>,
    #[serde(default)]
    values: Option<Vec<Vec<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constants: Option<StructuralConstants<T>>,
}

/// Dense nonnegative kernel `G[i][j] = G(x_i, x_j)`.
///
/// Off-diagonal entries are finite; diagonal entries may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    kind: KernelKind<T>,
    values: SquareMatrix<T>,
    constants: Option<StructuralConstants<T>>,
}

impl<T: Scalar> KernelMatrix<T> {
    /// Validates and wraps a user-supplied matrix.
    pub fn from_matrix(values: SquareMatrix<T>) -> Result<Self> {
        Self::with_kind(KernelKind::Matrix, values)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::from_matrix(SquareMatrix::from_rows(rows)?)
    }

    fn with_kind(kind: KernelKind<T>, values: SquareMatrix<T>) -> Result<Self> {
        let n = values.dim();
        if n == 0 {
            return Err(invalid("kernel needs at least one atom"));
        }
        for i in 0..n {
            for j in 0..n {
                let g = values.get(i, j);
                if g.is_nan() || g < T::zero() {
                    return Err(invalid(format!("G[{i}][{j}] = {g} is not a nonnegative number")));
                }
                if i != j && g.is_infinite() {
                    return Err(invalid(format!("off-diagonal entry G[{i}][{j}] is infinite")));
                }
            }
        }
        Ok(Self { kind, values, constants: None })
    }

    pub fn len(&self) -> usize {
        self.values.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.dim() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.values
    }

    pub fn kind(&self) -> &KernelKind<T> {
        &self.kind
    }

    pub fn constants(&self) -> Option<&StructuralConstants<T>> {
        self.constants.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.values.is_symmetric()
    }

    /// Every entry strictly positive.
    pub fn is_positive(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) > T::zero()))
    }

    pub fn has_infinite_diagonal(&self) -> bool {
        (0..self.len()).any(|i| self.get(i, i).is_infinite())
    }

    /// `c G` for `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(invalid(format!("scale factor must be positive and finite, got {c}")));
        }
        Self::with_kind(KernelKind::Matrix, self.values.scaled(c))
    }

    pub fn transpose(&self) -> Self {
        Self { kind: KernelKind::Matrix, values: self.values.transpose(), constants: None }
    }

    /// Computes and caches `a`, `kappa` (when defined) and `h`.
    pub fn cache_constants(&mut self, max_size: usize) -> Result<StructuralConstants<T>> {
        let a = quasi_symmetry_constant(self).ok();
        let kappa = if self.is_symmetric() { quasimetric_constant(self).ok() } else { None };
        let h = Some(wmp_constant(self, max_size)?.h);
        let c = StructuralConstants { a, h, kappa };
        self.constants = Some(c);
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        let doc =
            KernelDocument { kind: self.kind.clone(), values: Some(self.values.to_rows()), constants: self.constants };
        toml::to_string(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Parses a kernel document. Parametric kernels without a `values`
    /// table are rebuilt from their parameters.
    pub fn from_toml(s: &str) -> Result<Self> {
        let doc: KernelDocument<T> = toml::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let mut kernel = match (&doc.kind, doc.values) {
            (_, Some(rows)) => Self::with_kind(doc.kind.clone(), SquareMatrix::from_rows(&rows)?)?,
            (KernelKind::Matrix, None) => return Err(Error::Serialization("matrix kernel without values".into())),
            (KernelKind::Riesz { alpha, dimension, points, cell_radii }, None) => match cell_radii {
                Some(r) => make_riesz_cell_kernel(points, r, *alpha, *dimension)?,
                None => make_riesz_kernel(points, *alpha, *dimension)?,
            },
            (KernelKind::Quasimetric { points, exponent, offset }, None) => {
                make_quasimetric_kernel(points, *exponent, *offset)?
            }
        };
        kernel.constants = doc.constants;
        Ok(kernel)
    }
}

/// Least `a >= 1` with `a^-1 G[j][i] <= G[i][j] <= a G[j][i]` over off-diagonal pairs.
pub fn quasi_symmetry_constant<T: Scalar>(g: &KernelMatrix<T>) -> Result<T> {
    let n = g.len();
    let mut a = T::one();
    for i in 0..n {
        for j in 0..i {
            let (gij, gji) = (g.get(i, j), g.get(j, i));
            match (gij.is_zero(), gji.is_zero()) {
                (true, true) => {}
                (true, false) => return Err(Error::NotQuasiSymmetric { i, j }),
                (false, true) => return Err(Error::NotQuasiSymmetric { i: j, j: i }),
                (false, false) => a = a.max(gij / gji).max(gji / gij),
            }
        }
    }
    Ok(a)
}

/// `(G + G^T) / 2`.
pub fn symmetrize<T: Scalar>(g: &KernelMatrix<T>) -> KernelMatrix<T> {
    if g.is_symmetric() {
        return g.clone();
    }
    let half = T::lit(0.5);
    let values = SquareMatrix::from_fn(g.len(), |i, j| half * (g.get(i, j) + g.get(j, i)));
    KernelMatrix { kind: KernelKind::Matrix, values, constants: None }
}

/// Where the WMP constant is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmpWitness {
    /// Candidate support set of the extremal measure.
    pub subset: Vec<usize>,
    /// Exterior atom where the potential is largest.
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmpConstant<T> {
    /// Least valid `h`, floored at 1; `+inf` when the principle fails.
    pub h: T,
    /// Largest LP value before flooring.
    pub raw: T,
    pub fails: bool,
    pub witness: Option<WmpWitness>,
}

/// Exact weak-maximum-principle constant by subset enumeration.
///
/// For each nonempty proper subset `S` and exterior atom `x`, solves
/// `max (G nu)(x)` over `nu >= 0` supported on `S` with `G nu <= 1` on `S`.
/// Atoms of `S` with infinite self-interaction cannot carry mass.
pub fn wmp_constant<T: Scalar>(g: &KernelMatrix<T>, max_size: usize) -> Result<WmpConstant<T>> {
    let n = g.len();
    if n > max_size || n > 24 {
        return Err(Error::SpaceTooLarge { size: n, max: max_size.min(24) });
    }
    if n == 1 {
        return Ok(WmpConstant { h: T::one(), raw: T::zero(), fails: false, witness: None });
    }
    let full: u32 = (1u32 << n) - 1;
    let best = (1..full)
        .into_par_iter()
        .map(|mask| subset_wmp(g, mask))
        .reduce(|| (T::neg_infinity(), 0u32, usize::MAX), |a, b| if prefer(&b, &a) { b } else { a });
    let (raw, mask, point) = best;
    let subset: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
    let fails = raw.is_infinite();
    Ok(WmpConstant { h: raw.max(T::one()), raw, fails, witness: Some(WmpWitness { subset, point }) })
}

// Deterministic total preference: larger value, then smaller mask, then smaller point.
fn prefer<T: Scalar>(b: &(T, u32, usize), a: &(T, u32, usize)) -> bool {
    b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2))
}

fn subset_wmp<T: Scalar>(g: &KernelMatrix<T>, mask: u32) -> (T, u32, usize) {
    let n = g.len();
    let inside: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
    let vars: Vec<usize> = inside.iter().copied().filter(|&s| g.get(s, s).is_finite()).collect();
    let a: Vec<Vec<T>> = inside.iter().map(|&y| vars.iter().map(|&s| g.get(y, s)).collect()).collect();
    let b = vec![T::one(); inside.len()];
    let mut best = (T::neg_infinity(), mask, usize::MAX);
    for x in (0..n).filter(|&x| mask & (1 << x) == 0) {
        let c: Vec<T> = vars.iter().map(|&s| g.get(x, s)).collect();
        let value = match maximize(&c, &a, &b) {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Unbounded => T::infinity(),
        };
        let cand = (value, mask, x);
        if prefer(&cand, &best) {
            best = cand;
        }
    }
    best
}

/// Least `kappa` with `d(x,y) <= kappa (d(x,z) + d(z,y))` for `d = 1/G`, over all triples.
pub fn quasimetric_constant<T: Scalar>(g: &KernelMatrix<T>) -> Result<T> {
    let n = g.len();
    for i in 0..n {
        for j in 0..i {
            if g.get(i, j) != g.get(j, i) {
                return Err(Error::NotSymmetric { i, j });
            }
            if !(g.get(i, j) > T::zero()) {
                return Err(invalid(format!("quasimetric kernel needs G[{i}][{j}] > 0")));
            }
        }
        if g.get(i, i).is_zero() {
            return Err(invalid(format!("quasimetric kernel needs G[{i}][{i}] > 0")));
        }
    }
    let d = |i: usize, j: usize| g.get(i, j).recip();
    let mut kappa: Option<T> = None;
    for x in 0..n {
        for y in 0..n {
            let dxy = d(x, y);
            if dxy.is_zero() {
                continue;
            }
            for z in 0..n {
                let ratio = dxy / (d(x, z) + d(z, y));
                kappa = Some(kappa.map_or(ratio, |k| k.max(ratio)));
            }
        }
    }
    Ok(kappa.unwrap_or_else(T::one))
}

fn check_points<T: Scalar>(points: &[Vec<T>], dimension: usize) -> Result<()> {
    if points.is_empty() {
        return Err(invalid("kernel needs at least one point"));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dimension {
            return Err(Error::ShapeMismatch { expected: dimension, found: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("point {i} has non-finite coordinates")));
        }
        if points[..i].iter().any(|q| q == p) {
            return Err(invalid(format!("point {i} duplicates an earlier point")));
        }
    }
    Ok(())
}

pub(crate) fn distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b)).sqrt()
}

fn check_riesz_params<T: Scalar>(alpha: T, dimension: usize) -> Result<()> {
    let two_alpha = alpha + alpha;
    if dimension == 0 || !(two_alpha > T::zero()) || !(two_alpha < T::from_count(dimension)) {
        return Err(invalid(format!("Riesz kernel needs 0 < 2 alpha < n, got alpha = {alpha}, n = {dimension}")));
    }
    Ok(())
}

/// Riesz point kernel `|x_i - x_j|^(2 alpha - n)` with `+inf` on the diagonal.
pub fn make_riesz_kernel<T: Scalar>(points: &[Vec<T>], alpha: T, dimension: usize) -> Result<KernelMatrix<T>> {
    check_riesz_params(alpha, dimension)?;
    check_points(points, dimension)?;
    let expo = alpha + alpha - T::from_count(dimension);
    let values = SquareMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            T::infinity()
        } else {
            distance(&points[i], &points[j]).powf(expo)
        }
    });
    let kind = KernelKind::Riesz { alpha, dimension, points: points.to_vec(), cell_radii: None };
    KernelMatrix::with_kind(kind, values)
}

/// Riesz kernel on quadrature cells: off-diagonal point values, diagonal the
/// mean of `|t|^(2 alpha - n)` over a ball of radius `rho_i`, which is
/// `n / (2 alpha) * rho_i^(2 alpha - n)`.
pub fn make_riesz_cell_kernel<T: Scalar>(
    points: &[Vec<T>],
    radii: &[T],
    alpha: T,
    dimension: usize,
) -> Result<KernelMatrix<T>> {
    check_riesz_params(alpha, dimension)?;
    check_points(points, dimension)?;
    if radii.len() != points.len() {
        return Err(Error::ShapeMismatch { expected: points.len(), found: radii.len() });
    }
    if let Some(i) = radii.iter().position(|r| !(*r > T::zero()) || !r.is_finite()) {
        return Err(invalid(format!("cell radius {i} must be positive and finite")));
    }
    let nn = T::from_count(dimension);
    let expo = alpha + alpha - nn;
    let values = SquareMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            nn / (alpha + alpha) * radii[i].powf(expo)
        } else {
            distance(&points[i], &points[j]).powf(expo)
        }
    });
    let kind = KernelKind::Riesz { alpha, dimension, points: points.to_vec(), cell_radii: Some(radii.to_vec()) };
    KernelMatrix::with_kind(kind, values)
}

/// Inverse-multiquadric kernel `(|x - y|^2 + offset^2)^(-exponent / 2)`.
///
/// `1/G` is a power of a metric, hence a quasimetric; `offset = 0` gives the
/// pure power `|x - y|^(-exponent)` with an infinite diagonal.
pub fn make_quasimetric_kernel<T: Scalar>(points: &[Vec<T>], exponent: T, offset: T) -> Result<KernelMatrix<T>> {
    if points.is_empty() {
        return Err(invalid("kernel needs at least one point"));
    }
    check_points(points, points[0].len())?;
    if !(exponent > T::zero()) || !exponent.is_finite() {
        return Err(invalid(format!("quasimetric exponent must be positive, got {exponent}")));
    }
    if !(offset >= T::zero()) || !offset.is_finite() {
        return Err(invalid(format!("quasimetric offset must be nonnegative, got {offset}")));
    }
    let half = T::lit(0.5);
    let values = SquareMatrix::from_fn(points.len(), |i, j| {
        let d = distance(&points[i], &points[j]);
        let base = d * d + offset * offset;
        if base.is_zero() {
            T::infinity()
        } else {
            base.powf(-exponent * half)
        }
    });
    let kind = KernelKind::Quasimetric { points: points.to_vec(), exponent, offset };
    KernelMatrix::with_kind(kind, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(rows: &[&[f64]]) -> KernelMatrix<f64> {
        KernelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn quasi_symmetry_examples() {
        assert_eq!(quasi_symmetry_constant(&k(&[&[1.0, 3.0], &[3.0, 1.0]])).unwrap(), 1.0);
        assert_eq!(quasi_symmetry_constant(&k(&[&[1.0, 2.0], &[1.0, 1.0]])).unwrap(), 2.0);
        assert_eq!(
            quasi_symmetry_constant(&k(&[&[1.0, 0.0], &[1.0, 1.0]])).unwrap_err(),
            Error::NotQuasiSymmetric { i: 0, j: 1 }
        );
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(&k(&[&[1.0, 2.0], &[4.0, 1.0]])), k(&[&[1.0, 3.0], &[3.0, 1.0]]));
        let s = k(&[&[5.0, 1.5], &[1.5, 2.0]]);
        assert_eq!(symmetrize(&s), s);
        assert_eq!(symmetrize(&k(&[&[0.0, 1.0], &[3.0, 0.0]])), k(&[&[0.0, 2.0], &[2.0, 0.0]]));
    }

    #[test]
    fn wmp_examples() {
        assert_eq!(wmp_constant(&k(&[&[2.0, 1.0], &[1.0, 2.0]]), 12).unwrap().h, 1.0);
        let w = wmp_constant(&k(&[&[1.0, 2.0], &[2.0, 1.0]]), 12).unwrap();
        assert!((w.h - 2.0).abs() < 1e-14);
        assert!(!w.fails);
        assert_eq!(wmp_constant(&k(&[&[3.0]]), 12).unwrap().h, 1.0);
    }

    #[test]
    fn wmp_failure_and_size_limit() {
        // mass on atom 0 is invisible to the constraint at 0 but seen at 1
        let w = wmp_constant(&k(&[&[0.0, 1.0], &[1.0, 1.0]]), 12).unwrap();
        assert!(w.fails);
        assert!(w.h.is_infinite());
        let big = KernelMatrix::from_matrix(SquareMatrix::from_fn(13, |_, _| 1.0)).unwrap();
        assert_eq!(wmp_constant(&big, 12).unwrap_err(), Error::SpaceTooLarge { size: 13, max: 12 });
    }

    #[test]
    fn wmp_three_point_hand_computed() {
        // S = {0}: nu_0 <= 1/g00 ; value at x is G[x][0] / G[0][0]
        // S = {0,1}: LP by hand below; G chosen so the 2-atom set wins.
        let g = k(&[&[1.0, 0.2, 0.9], &[0.2, 1.0, 0.9], &[0.9, 0.9, 1.0]]);
        // nu = (t, t) with t (1 + 0.2) = 1 -> potential at 2 is 1.8 t = 1.5
        let w = wmp_constant(&g, 12).unwrap();
        assert!((w.h - 1.5).abs() < 1e-14, "h = {}", w.h);
        assert_eq!(w.witness.unwrap(), WmpWitness { subset: vec![0, 1], point: 2 });
    }

    #[test]
    fn riesz_point_kernel_has_trivial_wmp() {
        let g = make_riesz_kernel(&[vec![0.0], vec![1.0], vec![3.0]], 0.25, 1).unwrap();
        assert_eq!(wmp_constant(&g, 12).unwrap().h, 1.0);
    }

    #[test]
    fn quasimetric_examples() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        // d = Euclidean distance via G = 1/d with infinite diagonal
        let metric = make_quasimetric_kernel(&pts, 1.0, 0.0).unwrap();
        assert_eq!(quasimetric_constant(&metric).unwrap(), 1.0);
        let two = make_quasimetric_kernel(&[vec![0.0, 0.0], vec![3.0, 4.0]], 1.0, 0.0).unwrap();
        assert_eq!(quasimetric_constant(&two).unwrap(), 1.0);
        let asym = k(&[&[1.0, 2.0], &[1.0, 1.0]]);
        assert_eq!(quasimetric_constant(&asym).unwrap_err(), Error::NotSymmetric { i: 1, j: 0 });
    }

    #[test]
    fn squared_distance_is_two_quasimetric() {
        // d = |x-y|^2 on collinear points 0,1,2: d(0,2) = 4 = 2 (1 + 1)
        let g = make_quasimetric_kernel::<f64>(&[vec![0.0], vec![1.0], vec![2.0]], 2.0, 0.0).unwrap();
        assert!((quasimetric_constant(&g).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn riesz_examples() {
        let g = make_riesz_kernel::<f64>(&[vec![0.0], vec![1.0]], 0.25, 1).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        assert!(g.get(0, 0).is_infinite());
        let g3 = make_riesz_kernel::<f64>(&[vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]], 1.0, 3).unwrap();
        assert!((g3.get(0, 1) - 0.5).abs() < 1e-15);
        let g2 = make_riesz_kernel::<f64>(&[vec![0.0, 0.0], vec![0.0, 4.0]], 0.5, 2).unwrap();
        assert!((g2.get(1, 0) - 0.25).abs() < 1e-15);
        assert!(make_riesz_kernel(&[vec![0.0], vec![1.0]], 0.5, 1).is_err());
        assert!(make_riesz_kernel(&[vec![0.0], vec![0.0]], 0.25, 1).is_err());
    }

    #[test]
    fn riesz_cell_diagonal_is_ball_average() {
        // n = 1, 2 alpha = 1/2, rho = 0.5: mean of |t|^(-1/2) over (-1/2, 1/2) = 2 sqrt(2)
        let g = make_riesz_cell_kernel(&[vec![0.0], vec![1.0]], &[0.5, 0.5], 0.25, 1).unwrap();
        assert!((g.get(0, 0) - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(g.get(0, 1), 1.0);
    }

    #[test]
    fn toml_round_trip_matrix_is_bit_exact() {
        let mut g = k(&[&[f64::INFINITY, 0.1 + 0.2, 1e-310], &[1.0 / 3.0, 2.5, 7e300], &[0.0, 1.0, f64::INFINITY]]);
        g.constants = Some(StructuralConstants { a: Some(1.5), h: None, kappa: None });
        let text = g.to_toml().unwrap();
        let back = KernelMatrix::<f64>::from_toml(&text).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(back.get(i, j).to_bits(), g.get(i, j).to_bits());
            }
        }
        assert_eq!(back, g);
    }

    #[test]
    fn parametric_kernels_rebuild_from_parameters() {
        let text = "type = \"riesz\"\nalpha = 0.25\ndimension = 1\npoints = [[0.0], [2.0]]\n";
        let g = KernelMatrix::<f64>::from_toml(text).unwrap();
        assert!((g.get(0, 1) - 2f64.powf(-0.5)).abs() < 1e-15);
        let q = make_quasimetric_kernel(&[vec![0.0, 1.0], vec![1.0, 1.0]], 1.5, 0.1).unwrap();
        assert_eq!(KernelMatrix::<f64>::from_toml(&q.to_toml().unwrap()).unwrap(), q);
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(KernelMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).is_err());
        assert!(KernelMatrix::from_rows(&[vec![1.0, f64::INFINITY], vec![1.0, 1.0]]).is_err());
    }

    fn random_kernel(n: usize) -> impl Strategy<Value = KernelMatrix<f64>> {
        proptest::collection::vec(0.05f64..2.0, n * n).prop_map(move |v| {
            let m = SquareMatrix::from_fn(n, |i, j| if i <= j { v[i * n + j] } else { v[j * n + i] });
            KernelMatrix::from_matrix(m).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn wmp_invariant_under_scaling_and_relabeling(g in random_kernel(5), c in 0.1f64..10.0, shift in 1usize..5) {
            let h = wmp_constant(&g, 12).unwrap().h;
            let hc = wmp_constant(&g.scaled(c).unwrap(), 12).unwrap().h;
            prop_assert!((h - hc).abs() <= 1e-12 * h);
            let n = g.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let gp = KernelMatrix::from_matrix(SquareMatrix::from_fn(n, |i, j| g.get(perm[i], perm[j]))).unwrap();
            let hp = wmp_constant(&gp, 12).unwrap().h;
            prop_assert!((h - hp).abs() <= 1e-12 * h);
        }

        #[test]
        fn symmetrized_kernel_is_symmetric(v in proptest::collection::vec(0.05f64..2.0, 16)) {
            let g = KernelMatrix::from_matrix(SquareMatrix::from_fn(4, |i, j| v[i * 4 + j])).unwrap();
            prop_assert_eq!(quasi_symmetry_constant(&symmetrize(&g)).unwrap(), 1.0);
            prop_assert!(quasi_symmetry_constant(&g).unwrap() >= 1.0);
        }

        #[test]
        fn quasimetric_kernels_have_finite_wmp(
            coords in proptest::collection::vec(-1.0f64..1.0, 12),
            s in 0.5f64..3.0,
        ) {
            let pts: Vec<Vec<f64>> = coords.chunks(2).map(|c| c.to_vec()).collect();
            prop_assume!((0..pts.len()).all(|i| (0..i).all(|j| distance(&pts[i], &pts[j]) > 1e-3)));
            let g = make_quasimetric_kernel(&pts, s, 0.1).unwrap();
            let kappa = quasimetric_constant(&g).unwrap();
            prop_assert!(kappa <= 2f64.powf((s - 1.0).max(0.0)) + 1e-12);
            let w = wmp_constant(&g, 12).unwrap();
            prop_assert!(!w.fails && w.h.is_finite());
        }
    }
}
