//! Symmetric eigendecomposition of the covariance matrix.
//!
//! Cyclic Jacobi rotations. Eigenpairs come back sorted by decreasing
//! eigenvalue, each eigenvector sign-normalised so that its entry of
//! largest magnitude is positive (lowest index wins a tie). Within a group
//! of numerically equal eigenvalues the columns are ordered lexicographically
//! (descending), which pins down the output for matrices such as
//! `a I + b J` that have a highly degenerate spectrum.

use std::cmp::Ordering;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 50;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
/// Relative gap below which two eigenvalues are treated as equal when ordering.
const DEGENERATE_TOL: f64 = 1e-10;
/// Threshold separating genuine zeros from rounding noise in unit eigenvectors.
pub const SIGN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnClass {
    /// Every entry strictly positive.
    AllPositive,
    /// At least one strictly positive and one strictly negative entry.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted in decreasing order, tiny negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// Row-major orthogonal matrix; column `k` pairs with `eigenvalues[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.vectors.iter().map(|row| row[k]).collect()
    }

    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                out[i][j] = (0..d)
                    .map(|k| self.vectors[i][k] * self.eigenvalues[k] * self.vectors[j][k])
                    .sum();
            }
        }
        out
    }

    /// `Q^T v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|k| (0..d).map(|i| self.vectors[i][k] * v[i]).sum()).collect()
    }
}

/// Raw Jacobi iteration: unsorted eigenvalues and the accumulated rotation
/// (row-major, columns are eigenvectors).
pub(crate) fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let norm = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |a: &[Vec<f64>]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= OFF_DIAGONAL_TOL * norm {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[i][i]).collect(), v))
}

/// Eigendecomposition `Sigma = Q Lambda Q^T` of a symmetric matrix.
pub fn eigendecompose(cov: &[Vec<f64>]) -> Result<Spectrum> {
    let d = cov.len();
    let (values, v) = jacobi_eigenvalues(cov)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|k| {
            let mut col: Vec<f64> = v.iter().map(|row| row[k]).collect();
            normalise_sign(&mut col);
            (values[k], col)
        })
        .collect();

    let top = values.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    let tie = DEGENERATE_TOL * top;
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    // Reorder runs of (numerically) equal eigenvalues by column content.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        let mean = pairs[start..end].iter().map(|p| p.0).sum::<f64>() / (end - start) as f64;
        pairs[start..end].iter_mut().for_each(|p| p.0 = mean);
        start = end;
    }

    let mut eigenvalues = Vec::with_capacity(d);
    let mut vectors = vec![vec![0.0; d]; d];
    for (k, (lambda, col)) in pairs.into_iter().enumerate() {
        let lambda = if lambda < 0.0 && lambda >= -DEGENERATE_TOL * top {
            0.0
        } else {
            lambda
        };
        eigenvalues.push(lambda);
        for i in 0..d {
            vectors[i][k] = col[i];
        }
    }
    Ok(Spectrum { eigenvalues, vectors })
}

fn normalise_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Classifies each eigenvector column for the boundary-condition rule.
pub fn classify_columns(vectors: &[Vec<f64>], tau: f64) -> Result<Vec<ColumnClass>> {
    let columns = vectors.first().map_or(0, |row| row.len());
    (0..columns)
        .map(|k| {
            let col = vectors.iter().map(|row| row[k]);
            let all_positive = col.clone().all(|x| x > tau);
            let has_pos = col.clone().any(|x| x > tau);
            let has_neg = col.clone().any(|x| x < -tau);
            if all_positive {
                Ok(ColumnClass::AllPositive)
            } else if has_pos && has_neg {
                Ok(ColumnClass::Mixed)
            } else {
                Err(Error::AssumptionViolation { column: k })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExerciseStyle;
    use crate::presets;

    fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    fn check_invariants(cov: &[Vec<f64>], s: &Spectrum) {
        let d = cov.len();
        for w in s.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let scale = cov.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max_abs_diff(&s.reconstruct(), cov) <= 1e-10 * scale);
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = (0..d).map(|i| s.vectors[i][a] * s.vectors[i][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-12, "Q^T Q off at ({a},{b}): {dot}");
            }
        }
    }

    #[test]
    fn identity() {
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let s = eigendecompose(&id).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 1.0]);
        for k in 0..3 {
            let col = s.column(k);
            assert_eq!(col.iter().filter(|x| x.abs() == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|x| **x == 0.0).count(), 2);
        }
    }

    #[test]
    fn set_a_eigenvalues() {
        let cov = presets::set_a(ExerciseStyle::European).covariance();
        let s = eigendecompose(&cov).unwrap();
        let want = [1.4089, 0.1124, 0.1006, 0.0388, 0.0213];
        for (got, want) in s.eigenvalues.iter().zip(want) {
            assert!((got - want).abs() < 5e-5, "{got} vs {want}");
        }
        check_invariants(&cov, &s);
        let classes = classify_columns(&s.vectors, SIGN_TOL).unwrap();
        assert_eq!(classes[0], ColumnClass::AllPositive);
        assert!(classes[1..].iter().all(|c| *c == ColumnClass::Mixed));
    }

    #[test]
    fn set_b_eigenvalues() {
        let cov = presets::set_b(ExerciseStyle::European).covariance();
        let s = eigendecompose(&cov).unwrap();
        assert!((s.eigenvalues[0] - 0.13).abs() < 1e-12);
        for l in &s.eigenvalues[1..] {
            assert!((l - 0.03).abs() < 1e-12);
        }
        check_invariants(&cov, &s);
        classify_columns(&s.vectors, SIGN_TOL).unwrap();
    }

    #[test]
    fn matches_nalgebra_eigenvalues() {
        for spec in presets::all_presets(ExerciseStyle::European) {
            let cov = spec.1.covariance();
            let s = eigendecompose(&cov).unwrap();
            let d = cov.len();
            let m = nalgebra::DMatrix::from_fn(d, d, |i, j| cov[i][j]);
            let mut oracle: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
            oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in s.eigenvalues.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", spec.0);
            }
            check_invariants(&cov, &s);
            let classes = classify_columns(&s.vectors, SIGN_TOL).unwrap();
            assert_eq!(classes[0], ColumnClass::AllPositive, "{}", spec.0);
        }
    }

    #[test]
    fn preset_eigenvalues_quoted_values() {
        let cases: [(&str, &[f64]); 5] = [
            ("C", &[0.18, 0.03]),
            ("D", &[0.4218, 0.0180, 0.0053]),
            ("E", &[0.7897, 0.0647, 0.0187]),
            ("F", &[1.1126, 0.1337, 0.0402]),
            ("HL-1-40-0.3", &[2.1398, 0.1461, 0.1101, 0.0796]),
        ];
        for (id, want) in cases {
            let spec = presets::lookup(id, ExerciseStyle::European).unwrap();
            let s = eigendecompose(&spec.covariance()).unwrap();
            for (got, w) in s.eigenvalues.iter().zip(want.iter()) {
                assert!((got - w).abs() < 5e-5, "{id}: {got} vs {w}");
            }
        }
        let spec = presets::lookup("HL-1-40-0.9", ExerciseStyle::European).unwrap();
        let s = eigendecompose(&spec.covariance()).unwrap();
        for (got, w) in s.eigenvalues.iter().zip([2.7299, 0.1620, 0.1396, 0.1076]) {
            assert!((got - w).abs() < 5e-5, "HL 0.9: {got} vs {w}");
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_columns(&[vec![1.0]], SIGN_TOL).unwrap(), vec![ColumnClass::AllPositive]);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            classify_columns(&id, SIGN_TOL),
            Err(Error::AssumptionViolation { column: 0 })
        ));
        let mixed_with_zero = vec![vec![0.5, 0.7], vec![0.5, 0.0], vec![0.7, -0.7]];
        let c = classify_columns(&mixed_with_zero, SIGN_TOL).unwrap();
        assert_eq!(c, vec![ColumnClass::AllPositive, ColumnClass::Mixed]);
    }

    #[test]
    fn reordering_is_idempotent() {
        let cov = presets::set_a(ExerciseStyle::European).covariance();
        let s = eigendecompose(&cov).unwrap();
        let again = eigendecompose(&s.reconstruct()).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&again.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest::proptest! {
        #[test]
        fn random_psd_reconstructs(entries in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let d = 6;
            let b: Vec<Vec<f64>> = (0..d).map(|i| entries[i * d..(i + 1) * d].to_vec()).collect();
            let cov: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| (0..d).map(|k| b[i][k] * b[j][k]).sum()).collect())
                .collect();
            let s = eigendecompose(&cov).unwrap();
            check_invariants(&cov, &s);
            proptest::prop_assert!(*s.eigenvalues.last().unwrap() >= 0.0 || s.eigenvalues.last().unwrap().abs() < 1e-12);
        }
    }
}
