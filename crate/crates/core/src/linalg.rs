//! Row-major dense matrices and a Cholesky factorization that reports the
//! failing pivot.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            m.row_mut(i).copy_from_slice(r);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// Largest `|A_ij - A_ji| / max|A|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators keep the loop vectorizable.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular factor `L` with `A + shift*I = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix, shift: f64) -> Result<Self> {
        let n = a.size();
        let mut l = DenseMatrix::zeros(n);
        // Row-by-row (Cholesky-Banachiewicz) so every inner product is contiguous.
        for i in 0..n {
            let (done, rest) = l.data.split_at_mut(i * n);
            let li = &mut rest[..n];
            for j in 0..i {
                let lj = &done[j * n..j * n + j + 1];
                li[j] = (a.get(i, j) - dot(&li[..j], &lj[..j])) / lj[j];
            }
            let d = a.get(i, i) + shift - dot(&li[..i], &li[..i]);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::IllConditioned { pivot: i, value: d });
            }
            li[i] = d.sqrt();
        }
        Ok(Self { l })
    }

    pub fn size(&self) -> usize {
        self.l.size()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            y[i] = (y[i] - dot(&row[..i], &y[..i])) / row[i];
        }
        y
    }

    /// Solves `L^T x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l.get(i, i);
            let xi = x[i];
            let row = self.l.row(i);
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    /// Solves `(A + shift*I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn bytes(&self) -> usize {
        self.l.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_system() {
        let a = DenseMatrix::from_rows(&[vec![2.0]]);
        let c = Cholesky::factor(&a, 0.0).unwrap();
        assert_relative_eq!(c.solve(&[4.0])[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn solves_spd_system() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ]);
        let c = Cholesky::factor(&a, 0.5).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let mut ax = a.matvec(&x);
        for (v, xi) in ax.iter_mut().zip(&x) {
            *v += 0.5 * xi;
        }
        for (u, v) in ax.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-13);
        }
    }

    #[test]
    fn reports_failing_pivot() {
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ]);
        match Cholesky::factor(&a, 0.0) {
            Err(Error::IllConditioned { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_relative_eq!(dot(&a, &b), naive, epsilon = 1e-12);
    }
}
