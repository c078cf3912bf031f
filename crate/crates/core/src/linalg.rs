//! Dense square matrices and a cyclic Jacobi eigensolver, enough for the
//! `|R| x |R|` covariance blocks used in joint inference.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Matrix { n, data: rows.concat() }
    }

    /// `I - 11ᵀ/p`: projection onto vectors with zero sum.
    pub fn centering(p: usize) -> Self {
        let mut m = Matrix::identity(p);
        for x in &mut m.data {
            *x -= 1.0 / p as f64;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self[(i, k)];
                if x == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += x * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len());
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Eigenvalues (ascending) and eigenvectors (as columns) of a symmetric matrix.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Matrix) {
        jacobi(self)
    }

    /// A factor `B` with `B Bᵀ = self` for a positive semidefinite matrix.
    ///
    /// Eigenvalues down to `-tol · max|entry|` are treated as rounding error and
    /// clipped to zero; anything more negative is rejected.
    pub fn psd_factor(&self, tol: f64) -> Result<Matrix> {
        let (vals, vecs) = self.symmetric_eigen();
        let scale = self.max_abs();
        let mut out = Matrix::zeros(self.n);
        for (j, &lam) in vals.iter().enumerate() {
            if lam < -tol * scale {
                return Err(Error::NotPsd(lam));
            }
            let s = libm::sqrt(lam.max(0.0));
            for i in 0..self.n {
                out[(i, j)] = vecs[(i, j)] * s;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

fn jacobi(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.n;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|ij| a[ij] * a[ij]).sum();
        if off <= 1e-30 * (1.0 + a.data.iter().map(|x| x * x).sum::<f64>()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, col)] = v[(k, i)];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centering_is_projection() {
        let g = Matrix::centering(4);
        let gg = g.mul(&g);
        assert!(gg.sub(&g).max_abs() < 1e-15);
        assert!(g.mul_vec(&[1.0; 4]).iter().all(|x| x.abs() < 1e-15));
        let two = Matrix::centering(2);
        assert_eq!(two.rows(), [[0.5, -0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn eigen_reconstructs() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]]);
        let (vals, vecs) = m.symmetric_eigen();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = vecs.mul(&Matrix::diag(&vals)).mul(&transpose(&vecs));
        assert!(back.sub(&m).max_abs() < 1e-12);
    }

    #[test]
    fn factor_of_singular_psd() {
        let g = Matrix::centering(3);
        let cov = g.mul(&Matrix::diag(&[1.0, 2.0, 3.0])).mul(&g);
        let b = cov.psd_factor(1e-8).unwrap();
        assert!(b.mul(&transpose(&b)).sub(&cov).max_abs() < 1e-12);
        let bad = Matrix::diag(&[1.0, -0.5]);
        assert!(matches!(bad.psd_factor(1e-8), Err(Error::NotPsd(_))));
    }

    fn transpose(m: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(m.dim());
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                t[(j, i)] = m[(i, j)];
            }
        }
        t
    }
}
