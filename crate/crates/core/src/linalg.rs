//! Dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Householder QR with column pivoting, `A P = Q R`.
///
/// Reflectors are kept in compact form so `Qᵀ M Q` can be formed in
/// `O(n² k)` for `k` columns instead of materialising `Q`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Householder vectors (column `j` holds `v_j`, with `v_j[j] = 1` implicit).
    reflectors: Mat,
    tau: Vec<f64>,
    r: Mat,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factor `a`; columns whose pivot falls below `rel_tol * ‖a‖_F` are rank deficient.
    pub fn new(a: &Mat, rel_tol: f64) -> Self {
        let (n, m) = a.shape();
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut tau = Vec::with_capacity(m.min(n));
        let mut reflectors = Mat::zeros(n, m.min(n));
        let norm_a = work.norm();
        let threshold = rel_tol * norm_a.max(f64::MIN_POSITIVE);
        let steps = m.min(n);
        let mut rank = steps;
        for k in 0..steps {
            // pivot: column of largest remaining norm
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..m {
                let s: f64 = (k..n).map(|i| work[(i, j)] * work[(i, j)]).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                work.swap_columns(k, best);
                perm.swap(k, best);
            }
            let alpha_norm = math::sqrt(best_norm.max(0.0));
            if alpha_norm <= threshold && rank == steps {
                rank = k;
            }
            let x0 = work[(k, k)];
            let beta = if x0 >= 0.0 { -alpha_norm } else { alpha_norm };
            let mut v = Vector::zeros(n - k);
            let t = if alpha_norm == 0.0 {
                v[0] = 1.0;
                0.0
            } else {
                let scale = x0 - beta;
                v[0] = 1.0;
                for i in (k + 1)..n {
                    v[i - k] = work[(i, k)] / scale;
                }
                (beta - x0) / beta
            };
            // apply H = I - t v vᵀ to trailing block
            for j in k..m {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i - k] * work[(i, j)];
                }
                let s = t * dot;
                for i in k..n {
                    work[(i, j)] -= s * v[i - k];
                }
            }
            for i in k..n {
                reflectors[(i, k)] = v[i - k];
            }
            tau.push(t);
        }
        let mut r = Mat::zeros(steps, m);
        for i in 0..steps {
            for j in i..m {
                r[(i, j)] = work[(i, j)];
            }
        }
        PivotedQr { reflectors, tau, r, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column permutation: position `k` of the factorization holds original column `perm[k]`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn nrows(&self) -> usize {
        self.reflectors.nrows()
    }

    fn apply_reflector_left(&self, k: usize, m: &mut Mat) {
        let n = self.nrows();
        let t = self.tau[k];
        if t == 0.0 {
            return;
        }
        for j in 0..m.ncols() {
            let mut dot = 0.0;
            for i in k..n {
                dot += self.reflectors[(i, k)] * m[(i, j)];
            }
            let s = t * dot;
            if s != 0.0 {
                for i in k..n {
                    m[(i, j)] -= s * self.reflectors[(i, k)];
                }
            }
        }
    }

    fn apply_reflector_right(&self, k: usize, m: &mut Mat) {
        let n = self.nrows();
        let t = self.tau[k];
        if t == 0.0 {
            return;
        }
        for r in 0..m.nrows() {
            let mut dot = 0.0;
            for i in k..n {
                dot += m[(r, i)] * self.reflectors[(i, k)];
            }
            let s = t * dot;
            if s != 0.0 {
                for i in k..n {
                    m[(r, i)] -= s * self.reflectors[(i, k)];
                }
            }
        }
    }

    /// `Qᵀ m` in place.
    pub fn qt_mul(&self, m: &mut Mat) {
        for k in 0..self.tau.len() {
            self.apply_reflector_left(k, m);
        }
    }

    /// `Q m` in place.
    pub fn q_mul(&self, m: &mut Mat) {
        for k in (0..self.tau.len()).rev() {
            self.apply_reflector_left(k, m);
        }
    }

    /// `Qᵀ v`.
    pub fn qt_vec(&self, v: &Vector) -> Vector {
        let mut m = Mat::from_column_slice(v.len(), 1, v.as_slice());
        self.qt_mul(&mut m);
        m.column(0).into_owned()
    }

    /// `Q v`.
    pub fn q_vec(&self, v: &Vector) -> Vector {
        let mut m = Mat::from_column_slice(v.len(), 1, v.as_slice());
        self.q_mul(&mut m);
        m.column(0).into_owned()
    }

    /// `Qᵀ s Q` for symmetric `s`.
    pub fn congruence(&self, s: &Mat) -> Mat {
        let mut m = s.clone();
        self.qt_mul(&mut m);
        for k in 0..self.tau.len() {
            self.apply_reflector_right(k, &mut m);
        }
        symmetrize(&mut m);
        m
    }

    /// Solve `R₁ x = b` for the leading `rank × rank` triangle and undo the permutation.
    ///
    /// `b` holds the first `rank` entries of `Qᵀ y`.
    pub fn solve_r(&self, b: &[f64]) -> Vector {
        let k = self.rank;
        let mut x = alloc::vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = b[i];
            for j in (i + 1)..k {
                s -= self.r[(i, j)] * x[j];
            }
            x[i] = s / self.r[(i, i)];
        }
        let m = self.perm.len();
        let mut out = Vector::zeros(m);
        for (pos, &col) in self.perm.iter().enumerate().take(k) {
            out[col] = x[pos];
        }
        out
    }
}

pub fn symmetrize(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn sym_eigen(m: &Mat) -> (Vector, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vector::zeros(0), Mat::zeros(0, 0));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix.
pub fn sym_pinv(m: &Mat, rel_tol: f64) -> Mat {
    let (vals, vecs) = sym_eigen(m);
    let max = vals.iter().fold(0.0f64, |a, &v| a.max(math::abs(v)));
    let n = m.nrows();
    let mut out = Mat::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if math::abs(lam) > rel_tol * max {
            let v = vecs.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    symmetrize(&mut out);
    out
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &Mat) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::Solver(alloc::string::String::from("matrix is not positive definite")))
}

/// Minimum and maximum eigenvalues of a symmetric matrix.
pub fn eig_range(m: &Mat) -> (f64, f64) {
    let (vals, _) = sym_eigen(m);
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    (vals[vals.len() - 1], vals[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, m: usize) -> Mat {
        Mat::from_fn(n, m, |i, j| math::sin((i * 7 + j * 3) as f64 + 0.3 * j as f64) + (i as f64) * 0.1)
    }

    #[test]
    fn qr_reconstructs_input() {
        let a = sample(7, 3);
        let qr = PivotedQr::new(&a, 1e-12);
        assert_eq!(qr.rank(), 3);
        let mut rfull = Mat::zeros(7, 3);
        for i in 0..3 {
            for j in 0..3 {
                rfull[(i, j)] = qr.r[(i, j)];
            }
        }
        qr.q_mul(&mut rfull);
        for (pos, &col) in qr.permutation().iter().enumerate() {
            for i in 0..7 {
                assert!((rfull[(i, pos)] - a[(i, col)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_detects_collinear_column() {
        let mut a = sample(6, 3);
        for i in 0..6 {
            a[(i, 2)] = 2.0 * a[(i, 0)] - a[(i, 1)];
        }
        let qr = PivotedQr::new(&a, 1e-10);
        assert_eq!(qr.rank(), 2);
    }

    #[test]
    fn congruence_matches_explicit_q() {
        let a = sample(5, 2);
        let qr = PivotedQr::new(&a, 1e-12);
        let mut q = Mat::identity(5, 5);
        qr.q_mul(&mut q);
        let b = sample(5, 5);
        let s = &b * b.transpose();
        let direct = q.transpose() * &s * &q;
        let fast = qr.congruence(&s);
        assert!((direct - fast).amax() < 1e-12);
        // Q orthogonal, trailing columns annihilate a
        assert!((q.transpose() * &q - Mat::identity(5, 5)).amax() < 1e-13);
        let tail = q.columns(2, 3).transpose() * &a;
        assert!(tail.amax() < 1e-12);
    }

    #[test]
    fn pinv_of_projector_is_itself() {
        let v = Vector::from_vec(alloc::vec![1.0, 2.0, 2.0]) / 3.0;
        let p = &v * v.transpose();
        assert!((sym_pinv(&p, 1e-12) - &p).amax() < 1e-12);
    }
}
