//! Dense lower-triangular Cholesky factorization on row-major storage.
//!
//! Only what the GP needs: factorize, forward/back substitution and the
//! log-determinant.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lower Cholesky factor `L` with `L Lᵀ = A`, stored row-major (upper part zero).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes the symmetric matrix `a` (row-major, `n × n`); only the lower
    /// triangle is read. Returns `None` if a pivot is not strictly positive.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        for i in 0..n {
            let (done, rest) = a.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + n];
                let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            row_i[i] = d.sqrt();
            for v in row_i[i + 1..].iter_mut() {
                *v = 0.0;
            }
        }
        Some(Cholesky { n, l: a })
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// Solves `L z = b` in place.
    pub(crate) fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub(crate) fn backward(&self, z: &mut [f64]) {
        for i in (0..self.n).rev() {
            let row = self.row(i);
            z[i] /= row[i];
            let xi = z[i];
            for k in 0..i {
                z[k] -= row[k] * xi;
            }
        }
    }

    /// Solves `(L Lᵀ) x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }

    /// Entry `(i, j)` of `L`.
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_small_spd() {
        // A = [[4, 2], [2, 3]] -> L = [[2, 0], [1, sqrt(2)]]
        let c = Cholesky::factor(vec![4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert!((c.get(1, 1) - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.log_det() - 8f64.ln()).abs() < 1e-14);
        let mut b = vec![1.0, 2.0];
        c.solve(&mut b);
        // inverse of A is [[3, -2], [-2, 4]] / 8
        assert!((b[0] - (3.0 - 4.0) / 8.0).abs() < 1e-15);
        assert!((b[1] - (-2.0 + 8.0) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(Cholesky::factor(vec![1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(Cholesky::factor(vec![1.0, 1.0, 1.0, 1.0], 2).is_none());
        assert!(Cholesky::factor(vec![f64::NAN], 1).is_none());
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 91.0);
    }
}
