//! Multicategory support vector machine.
//!
//! Category `j` (zero-based here) is coded as the `k`-vector with `1` in slot
//! `j` and `−1/(k−1)` elsewhere. The decision functions `f^j = Σ_i c_ij K(t_i, ·) + d_j`
//! minimize
//!
//! ```text
//! (1/n) Σ_i Σ_{r ≠ cat(i)} (f^r(t_i) + 1/(k−1))₊ + λ Σ_j ‖h^j‖²
//! ```
//!
//! under `Σ_j f^j ≡ 0`, enforced through `Σ_j c_ij = 0` and `Σ_j d_j = 0`.

use alloc::format;
use alloc::vec::Vec;

use crate::anova::{Basis, Design, GramSet};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::qp::{solve_hinge_qp, HingeQp, QpConfig};

/// Coded vector for category `cat` out of `k`.
pub fn coded_label(cat: usize, k: usize) -> Vec<f64> {
    let off = -1.0 / (k as f64 - 1.0);
    (0..k).map(|j| if j == cat { 1.0 } else { off }).collect()
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config("the MSVM needs k >= 2 categories".into()));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::Data(format!("label {c} out of range for k = {k}")));
    }
    Ok(())
}

/// `(1/n) Σ_i Σ_r L_{cat(i) r} (f_ir − y_ir)₊ + λ Σ_j h_sq_norms[j]`, with `L` the 0/1 cost.
pub fn msvm_objective(f: &[Vec<f64>], labels: &[usize], lambda: f64, h_sq_norms: &[f64]) -> f64 {
    let n = labels.len();
    let k = h_sq_norms.len();
    let mut loss = 0.0;
    for (row, &cat) in f.iter().zip(labels) {
        let y = coded_label(cat, k);
        for r in (0..k).filter(|&r| r != cat) {
            loss += (row[r] - y[r]).max(0.0);
        }
    }
    loss / n as f64 + lambda * h_sq_norms.iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsvmModel {
    /// `n × k` coefficients; rows sum to zero.
    pub c: Mat,
    pub d: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Duality-gap bound on the objective's suboptimality.
    pub duality_gap: f64,
    pub converged: bool,
}

impl MsvmModel {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// Decision values at points whose kernel against the training set is `cross` (`m × n`).
    pub fn decision(&self, cross: &Mat) -> Vec<Vec<f64>> {
        let f = cross * &self.c;
        (0..f.nrows())
            .map(|i| (0..self.k()).map(|j| f[(i, j)] + self.d[j]).collect())
            .collect()
    }

    /// `‖h^j‖² = c_jᵀ K c_j`.
    pub fn h_sq_norms(&self, gram: &Mat) -> Vec<f64> {
        (0..self.k())
            .map(|j| {
                let cj = self.c.column(j);
                cj.dot(&(gram * cj))
            })
            .collect()
    }
}

/// Train on an `n × n` positive semidefinite Gram matrix.
pub fn fit_msvm(gram: &Mat, labels: &[usize], k: usize, lambda: f64, cfg: &QpConfig) -> Result<MsvmModel> {
    check_labels(labels, k)?;
    let n = labels.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::Data(format!("Gram is {}×{}, expected {n}×{n}", gram.nrows(), gram.ncols())));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config("the MSVM needs λ > 0".into()));
    }
    let nc = n * k;
    let nx = nc + k;
    let m = n * (k - 1);
    let mut p = Mat::zeros(nx, nx);
    for j in 0..k {
        p.view_mut((j * n, j * n), (n, n)).copy_from(&(gram * (2.0 * lambda)));
    }
    let q = Vector::zeros(nx);
    let mut a = Mat::zeros(n + 1, nx);
    for i in 0..n {
        for j in 0..k {
            a[(i, j * n + i)] = 1.0;
        }
    }
    for j in 0..k {
        a[(n, nc + j)] = 1.0;
    }
    let b = Vector::zeros(n + 1);
    // ξ_ir ≥ f^r(t_i) + 1/(k−1) for every r ≠ cat(i)
    let off = 1.0 / (k as f64 - 1.0);
    let mut g = Mat::zeros(m, nx);
    let mut row = 0;
    for (i, &cat) in labels.iter().enumerate() {
        for r in (0..k).filter(|&r| r != cat) {
            g.view_mut((row, r * n), (1, n)).copy_from(&gram.row(i));
            g[(row, nc + r)] = 1.0;
            row += 1;
        }
    }
    let h = Vector::from_element(m, off);
    let w = Vector::from_element(m, 1.0 / n as f64);
    let sol = solve_hinge_qp(&HingeQp { p: &p, q: &q, a: &a, b: &b, g: &g, h: &h, w: &w }, cfg)?;
    let c = Mat::from_fn(n, k, |i, j| sol.x[j * n + i]);
    let d: Vec<f64> = (0..k).map(|j| sol.x[nc + j]).collect();
    let model = MsvmModel {
        c,
        d,
        lambda,
        objective: 0.0,
        iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
        duality_gap: sol.duality_gap,
        converged: sol.converged,
    };
    let f = model.decision(gram);
    let objective = msvm_objective(&f, labels, lambda, &model.h_sq_norms(gram));
    Ok(MsvmModel { objective, ..model })
}

/// Kernel of an SS-ANOVA model for MSVM use: `Σ_θ` plus the non-constant `H⁰`
/// columns as a linear kernel.
pub fn anova_kernel(grams: &GramSet, theta: &[f64]) -> Mat {
    let t = non_constant(&grams.t, &grams.null_labels);
    grams.weighted_sigma(theta) + &t * t.transpose()
}

/// Cross kernel `m × n` between new points and the training design of `basis`.
pub fn anova_cross_kernel(basis: &Basis, theta: &[f64], pts: &Design) -> Result<Mat> {
    let labels = basis.model().null_labels();
    let t_new = non_constant(&basis.null_matrix(pts)?, &labels);
    let t_train = non_constant(&basis.null_matrix(basis.train())?, &labels);
    let mut out = t_new * t_train.transpose();
    for (b, g) in basis.cross_grams(pts)?.into_iter().enumerate() {
        out += g * theta[b];
    }
    Ok(out)
}

fn non_constant(t: &Mat, labels: &[alloc::string::String]) -> Mat {
    let keep: Vec<usize> = (0..t.ncols()).filter(|&j| labels.get(j).is_none_or(|l| l != "1")).collect();
    t.select_columns(&keep)
}

/// `argmax_j f^j`, ties to the lowest index.
pub fn classify(f: &[Vec<f64>]) -> Vec<usize> {
    f.iter()
        .map(|row| row.iter().enumerate().fold(0, |best, (j, &v)| if v > row[best] { j } else { best }))
        .collect()
}

/// Coded vector of the most probable category (ties to the lowest index).
pub fn bayes_target(p: &[f64]) -> Result<Vec<f64>> {
    if p.len() < 2 || p.iter().any(|&v| !(v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("bayes_target needs a probability vector of length >= 2".into()));
    }
    let j = classify(&[p.to_vec()])[0];
    Ok(coded_label(j, p.len()))
}

/// `E L(Y, v) = Σ_j p_j Σ_{r ≠ j} (v_r + 1/(k−1))₊`.
pub fn expected_loss(p: &[f64], v: &[f64]) -> f64 {
    let k = p.len();
    let off = 1.0 / (k as f64 - 1.0);
    (0..k)
        .map(|j| p[j] * (0..k).filter(|&r| r != j).map(|r| (v[r] + off).max(0.0)).sum::<f64>())
        .sum()
}
