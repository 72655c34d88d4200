//! Tridiagonal matrices and their LU factorisation (Thomas algorithm).

use crate::error::{Error, Result};

/// Square tridiagonal matrix. `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal { sub: vec![0.0; n], diag: vec![0.0; n], sup: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        Tridiagonal { sub: vec![0.0; n], diag: vec![1.0; n], sup: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `I + scale * self`.
    pub fn identity_plus(&self, scale: f64) -> Self {
        Tridiagonal {
            sub: self.sub.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 + scale * v).collect(),
            sup: self.sup.iter().map(|v| scale * v).collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut v = self.diag[j] * x[j];
                if j > 0 {
                    v += self.sub[j] * x[j - 1];
                }
                if j + 1 < n {
                    v += self.sup[j] * x[j + 1];
                }
                v
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| {
                let sub = if j > 0 { self.sub[j].abs() } else { 0.0 };
                let sup = if j + 1 < n { self.sup[j].abs() } else { 0.0 };
                sub + self.diag[j].abs() + sup
            })
            .fold(0.0, f64::max)
    }
}

/// `LU` factors of a tridiagonal matrix, computed without pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLu {
    /// Elimination multipliers, `lower[0] = 0`.
    pub(crate) lower: Vec<f64>,
    pub(crate) inv_pivot: Vec<f64>,
    pub(crate) upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn factor(m: &Tridiagonal) -> Result<Self> {
        let n = m.len();
        let mut lower = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut upper = m.sup.clone();
        if n > 0 {
            upper[n - 1] = 0.0;
        }
        let mut prev = 0.0;
        for j in 0..n {
            let pivot = if j == 0 {
                m.diag[0]
            } else {
                lower[j] = m.sub[j] / prev;
                m.diag[j] - lower[j] * m.sup[j - 1]
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix { row: j });
            }
            inv_pivot[j] = 1.0 / pivot;
            prev = pivot;
        }
        Ok(TridiagonalLu { lower, inv_pivot, upper })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.len();
        for j in 1..n {
            x[j] -= self.lower[j] * x[j - 1];
        }
        x[n - 1] *= self.inv_pivot[n - 1];
        for j in (0..n - 1).rev() {
            x[j] = (x[j] - self.upper[j] * x[j + 1]) * self.inv_pivot[j];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves along the slow index of a row-major `len() x width` array,
    /// i.e. for every column at once.
    pub fn solve_columns(&self, data: &mut [f64], width: usize) {
        let n = self.len();
        for j in 1..n {
            let l = self.lower[j];
            let (prev, cur) = data[(j - 1) * width..(j + 1) * width].split_at_mut(width);
            cur.iter_mut().zip(prev.iter()).for_each(|(c, p)| *c -= l * p);
        }
        let ip = self.inv_pivot[n - 1];
        data[(n - 1) * width..].iter_mut().for_each(|v| *v *= ip);
        for j in (0..n - 1).rev() {
            let (u, ip) = (self.upper[j], self.inv_pivot[j]);
            let (cur, next) = data[j * width..(j + 2) * width].split_at_mut(width);
            cur.iter_mut().zip(next.iter()).for_each(|(c, nx)| *c = (*c - u * nx) * ip);
        }
    }
}
