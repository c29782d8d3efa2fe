//! Small dense complex matrices: just enough for eigenvector bases and their adjoints.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wide::Wide;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Matrices with a 1-norm condition number above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Empty("matrix"));
        }
        let mut m = CMatrix::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        CMatrix::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self[(r, c)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        let n = self.dim;
        let mut m = CMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self[(r, k)] * other[(k, c)];
                }
                m[(r, c)] = acc;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|r| (0..self.dim).fold(ZERO, |acc, c| acc + self[(r, c)] * x[c]))
            .collect()
    }

    /// Matrix-vector product in extended-exponent arithmetic; exact zeros are skipped.
    pub fn mul_wide(&self, x: &[Wide]) -> Vec<Wide> {
        (0..self.dim)
            .map(|r| {
                (0..self.dim).fold(Wide::ZERO, |acc, c| {
                    let a = self[(r, c)];
                    if a == ZERO {
                        acc
                    } else {
                        acc + x[c] * a
                    }
                })
            })
            .collect()
    }

    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|c| (0..self.dim).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Inverse via partially pivoted LU followed by one step of iterative refinement.
    ///
    /// Fails with [`Error::Singular`] when the 1-norm condition number exceeds
    /// [`SINGULAR_CONDITION`].
    pub fn inverse(&self) -> Result<CMatrix> {
        let lu = Lu::factor(self)?;
        let mut inv = lu.solve_identity();
        // X <- X + X (I - A X)
        let resid = {
            let ax = self.matmul(&inv);
            let mut r = CMatrix::identity(self.dim);
            for (d, v) in r.data.iter_mut().zip(&ax.data) {
                *d -= v;
            }
            r
        };
        let corr = inv.matmul(&resid);
        for (d, v) in inv.data.iter_mut().zip(&corr.data) {
            *d += v;
        }
        let condition = self.norm1() * inv.norm1();
        if !condition.is_finite() || condition > SINGULAR_CONDITION {
            return Err(Error::Singular { condition });
        }
        Ok(inv)
    }

    pub fn condition(&self) -> f64 {
        match Lu::factor(self) {
            Ok(lu) => self.norm1() * lu.solve_identity().norm1(),
            Err(_) => f64::INFINITY,
        }
    }
}

struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &CMatrix) -> Result<Lu> {
        let n = a.dim;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm()))
                .unwrap_or(k);
            if lu[(p, k)].norm() == 0.0 {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for c in 0..n {
                    let t = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                for c in k + 1..n {
                    let v = lu[(k, c)];
                    lu[(r, c)] -= factor * v;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.dim;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let v = y[c];
                y[r] -= self.lu[(r, c)] * v;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let v = y[c];
                y[r] -= self.lu[(r, c)] * v;
            }
            y[r] /= self.lu[(r, r)];
        }
        y
    }

    fn solve_identity(&self) -> CMatrix {
        let n = self.lu.dim;
        let mut inv = CMatrix::zeros(n);
        for c in 0..n {
            let mut e = vec![ZERO; n];
            e[c] = ONE;
            for (r, v) in self.solve(&e).into_iter().enumerate() {
                inv[(r, c)] = v;
            }
        }
        inv
    }
}
