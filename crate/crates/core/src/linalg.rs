//! Symmetric banded matrices and their Cholesky factors.
//!
//! Every operator in this crate comes from a structured mesh with a natural
//! node ordering, so the bandwidth is small (1 in 1D, `n + 1` on an `n x n`
//! grid of the unit square). Principal submatrices of a banded matrix are
//! banded with no larger bandwidth, which the active-set solvers rely on.

use crate::error::LinalgError;

/// Symmetric matrix stored by its lower band.
///
/// `band[i * (bw + 1) + k]` holds `A[i][i - k]` for `k = 0..=bw`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut a = Self::zeros(d.len(), 0);
        for (i, &v) in d.iter().enumerate() {
            a.band[i] = v;
        }
        a
    }

    /// Builds a matrix from a dense row-major square array, reading only the
    /// lower triangle. Entries outside the detected band must be zero.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n * n);
        let mut bw = 0;
        for i in 0..n {
            for j in 0..i {
                if dense[i * n + j] != 0.0 {
                    bw = bw.max(i - j);
                }
            }
        }
        let mut a = Self::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                a.set(i, j, dense[i * n + j]);
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        (k <= self.bw).then(|| hi * (self.bw + 1) + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.band[s])
    }

    /// Sets `A[i][j]` and `A[j][i]`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bw));
        self.band[s] = v;
    }

    /// Adds `v` to `A[i][j]` (and therefore to `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bw));
        self.band[s] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.band[i * (self.bw + 1)]).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                let a = row[k];
                if a != 0.0 {
                    y[i] += a * x[i - k];
                    y[i - k] += a * x[i];
                }
            }
        }
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// `self + other`, widening the band if needed.
    pub fn sum(&self, other: &SymBanded) -> SymBanded {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBanded::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                out.set(i, j, self.get(i, j) + other.get(i, j));
            }
        }
        out
    }

    /// Principal submatrix on the sorted index list `idx`.
    pub fn principal(&self, idx: &[usize]) -> SymBanded {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let m = idx.len();
        let mut bw = 0;
        for a in 0..m {
            let mut b = a;
            while b > 0 && idx[a] - idx[b - 1] <= self.bw {
                b -= 1;
            }
            bw = bw.max(a - b);
        }
        let mut sub = SymBanded::zeros(m, bw);
        for a in 0..m {
            for b in a.saturating_sub(bw)..=a {
                let v = self.get(idx[a], idx[b]);
                if v != 0.0 {
                    sub.set(a, b, v);
                }
            }
        }
        sub
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(self.bw)..=i {
                let v = self.get(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Banded Cholesky factorization `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandCholesky, LinalgError> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.band.clone();
        let scale = self
            .diagonal()
            .iter()
            .fold(0.0_f64, |acc, &d| acc.max(d.abs()));
        for i in 0..n {
            // Off-diagonal entries L[i][j], j = i - k.
            for k in (1..=bw.min(i)).rev() {
                let j = i - k;
                let mut s = l[i * w + k];
                // sum over p < j with both L[i][p], L[j][p] inside the band
                let p_lo = i.saturating_sub(bw);
                for p in p_lo..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                l[i * w + k] = s / l[j * w];
            }
            let mut d = l[i * w];
            for p in i.saturating_sub(bw)..i {
                let v = l[i * w + (i - p)];
                d -= v * v;
            }
            if !d.is_finite() || d <= scale * 1e-15 {
                return Err(LinalgError::NotPositiveDefinite { pivot: i, value: d });
            }
            l[i * w] = d.sqrt();
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Lower-band Cholesky factor of a [`SymBanded`] matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.bw + 1;
        // L z = b
        for i in 0..self.n {
            let mut s = x[i];
            for k in 1..=self.bw.min(i) {
                s -= self.l[i * w + k] * x[i - k];
            }
            x[i] = s / self.l[i * w];
        }
        // Lᵀ x = z
        for i in (0..self.n).rev() {
            let xi = x[i] / self.l[i * w];
            x[i] = xi;
            for k in 1..=self.bw.min(i) {
                x[i - k] -= self.l[i * w + k] * xi;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64, o: f64) -> SymBanded {
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.set(i, i, d);
            if i > 0 {
                a.set(i, i - 1, o);
            }
        }
        a
    }

    #[test]
    fn matvec_matches_dense() {
        let a = tridiag(4, 2.0, -1.0);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(a.matvec(&x), vec![0.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn cholesky_solves_wide_band() {
        // 5-point Laplacian on a 4x4 grid: bandwidth 4
        let m = 4;
        let n = m * m;
        let mut a = SymBanded::zeros(n, m);
        for j in 0..m {
            for i in 0..m {
                let p = j * m + i;
                a.set(p, p, 4.0);
                if i > 0 {
                    a.set(p, p - 1, -1.0);
                }
                if j > 0 {
                    a.set(p, p - m, -1.0);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x);
        let sol = a.cholesky().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-13);
        }
    }

    #[test]
    fn principal_keeps_entries() {
        let a = tridiag(6, 2.0, -1.0);
        let sub = a.principal(&[1, 2, 4]);
        assert_eq!(sub.dim(), 3);
        assert_eq!(sub.get(0, 1), -1.0);
        assert_eq!(sub.get(1, 2), 0.0);
        assert_eq!(sub.get(2, 2), 2.0);
        assert!(sub.bandwidth() <= 1);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = tridiag(3, 1.0, -2.0);
        assert!(matches!(
            a.cholesky(),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }
}
