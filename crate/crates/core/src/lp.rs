//! Dense primal simplex for tiny linear programs of the form
//! `max c^T x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible at the start, so no phase one is needed.
//! Bland's rule guards against cycling on the degenerate vertices that the
//! WMP subproblems produce (every right-hand side equals one).

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { value: T, x: Vec<T> },
    Unbounded,
}

impl<T: Scalar> LpOutcome<T> {
    pub fn value(&self) -> T {
        match self {
            LpOutcome::Optimal { value, .. } => *value,
            LpOutcome::Unbounded => T::infinity(),
        }
    }
}

/// Solves `max c^T x` subject to `a x <= b`, `x >= 0`. Requires `b >= 0` and finite data.
pub fn maximize<T: Scalar>(c: &[T], a: &[Vec<T>], b: &[T]) -> LpOutcome<T> {
    let n = c.len();
    let m = a.len();
    debug_assert_eq!(b.len(), m);
    debug_assert!(b.iter().all(|&v| v >= T::zero()));
    let width = n + m + 1;
    let mut tab: Vec<Vec<T>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = Vec::with_capacity(width);
            r.extend_from_slice(row);
            r.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
            r.push(b[i]);
            r
        })
        .collect();
    // objective row holds reduced costs c_j - z_j
    let mut obj: Vec<T> = c.iter().copied().chain(std::iter::repeat_n(T::zero(), m + 1)).collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let scale = c.iter().chain(a.iter().flatten()).fold(T::one(), |s, v| s.max(v.abs()));
    let eps = T::epsilon() * T::lit(64.0) * scale;
    let max_pivots = 50 * (n + m + 1);

    for _ in 0..max_pivots {
        let Some(enter) = (0..n + m).find(|&j| obj[j] > eps) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = T::infinity();
        for (i, row) in tab.iter().enumerate() {
            if row[enter] > eps {
                let ratio = row[width - 1] / row[enter];
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best || (ratio == best && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return LpOutcome::Unbounded;
        };
        let piv = tab[r][enter];
        for v in tab[r].iter_mut() {
            *v = *v / piv;
        }
        let pivot_row = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if !f.is_zero() {
                    for (v, &p) in row.iter_mut().zip(&pivot_row) {
                        *v = *v - f * p;
                    }
                }
            }
        }
        let f = obj[enter];
        for (v, &p) in obj.iter_mut().zip(&pivot_row) {
            *v = *v - f * p;
        }
        basis[r] = enter;
    }

    let mut x = vec![T::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab[i][width - 1].max(T::zero());
        }
    }
    let value = c.iter().zip(&x).fold(T::zero(), |s, (&ci, &xi)| s + ci * xi);
    LpOutcome::Optimal { value, x }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let out = maximize::<f64>(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0]);
        match out {
            LpOutcome::Optimal { value, x } => {
                assert!((value - 36.0).abs() < 1e-12);
                assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
            }
            LpOutcome::Unbounded => panic!("bounded problem reported unbounded"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let out = maximize(&[1.0, 1.0], &[vec![1.0, 0.0]], &[1.0]);
        assert_eq!(out, LpOutcome::Unbounded);
        assert_eq!(out.value(), f64::INFINITY);
    }

    #[test]
    fn empty_problem_has_zero_value() {
        let out = maximize::<f64>(&[], &[vec![], vec![]], &[1.0, 1.0]);
        assert_eq!(out.value(), 0.0);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // many constraints active at the optimum
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]];
        let out = maximize::<f64>(&[1.0, 1.0], &a, &[1.0, 1.0, 2.0, 1.0]);
        assert!((out.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_vertex_enumeration_on_two_variables() {
        // brute force over the intersection points of constraint lines
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0], vec![1.0, 1.0]];
        let b = [1.0, 1.0, 1.0];
        let c = [1.0, 2.0];
        let mut best: f64 = 0.0;
        let mut lines: Vec<([f64; 2], f64)> = a.iter().zip(b).map(|(r, bi)| ([r[0], r[1]], bi)).collect();
        lines.push(([1.0, 0.0], 0.0));
        lines.push(([0.0, 1.0], 0.0));
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (l1, b1) = lines[i];
                let (l2, b2) = lines[j];
                let det = l1[0] * l2[1] - l1[1] * l2[0];
                if det.abs() < 1e-14 {
                    continue;
                }
                let x = (b1 * l2[1] - l1[1] * b2) / det;
                let y = (l1[0] * b2 - b1 * l2[0]) / det;
                let feasible =
                    x >= -1e-12 && y >= -1e-12 && a.iter().zip(b).all(|(r, bi)| r[0] * x + r[1] * y <= bi + 1e-12);
                if feasible {
                    best = best.max(c[0] * x + c[1] * y);
                }
            }
        }
        assert!((maximize(&c, &a, &b).value() - best).abs() < 1e-12);
    }
}
