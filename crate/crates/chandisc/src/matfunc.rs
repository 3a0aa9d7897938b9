//! Spectral functions of Hermitian matrices: powers, weighted geometric
//! means, operator relative entropy and the Gauss-Legendre log approximation.
//!
//! Everything goes through a Hermitian eigendecomposition. Eigenvalues at or
//! below `EIGEN_FLOOR_REL * lambda_max` are treated as zero.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::{c, CMat, HermitianMatrix};

pub const EIGEN_FLOOR_REL: f64 = 1e-12;

/// Weight above which a kernel direction of `y` is considered to meet `supp(x)`.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportInfo {
    pub rank: usize,
    pub projector: HermitianMatrix,
    pub eigen_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub m: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Eigenpairs above the relative floor.
struct Spectrum {
    vals: Vec<f64>,
    vecs: CMat,
    floor: f64,
}

fn spectrum(x: &HermitianMatrix) -> Spectrum {
    let (w, v) = x.eigh();
    let top = w.iter().cloned().fold(0.0, f64::max);
    let floor = EIGEN_FLOOR_REL * top;
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > floor).collect();
    let vecs = CMat::from_fn(x.dim(), keep.len(), |r, k| v[(r, keep[k])]);
    Spectrum { vals: keep.iter().map(|&i| w[i]).collect(), vecs, floor }
}

fn recompose(vecs: &CMat, vals: &[f64]) -> HermitianMatrix {
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |r, k| vecs[(r, k)] * c(vals[k]));
    HermitianMatrix::symmetrized(&scaled * vecs.adjoint())
}

pub fn support_info(x: &HermitianMatrix) -> SupportInfo {
    let s = spectrum(x);
    let ones = vec![1.0; s.vals.len()];
    SupportInfo { rank: s.vals.len(), projector: recompose(&s.vecs, &ones), eigen_floor: s.floor }
}

/// Applies `f` to the eigenvalues of a PSD matrix on its support; the kernel maps to 0.
pub fn apply_on_support(x: &HermitianMatrix, f: impl Fn(f64) -> f64) -> HermitianMatrix {
    let s = spectrum(x);
    let vals: Vec<f64> = s.vals.iter().map(|&w| f(w)).collect();
    recompose(&s.vecs, &vals)
}

pub fn matrix_power(x: &HermitianMatrix, p: f64) -> HermitianMatrix {
    if p == 0.0 {
        return support_info(x).projector;
    }
    apply_on_support(x, |w| w.powf(p))
}

pub fn sqrtm(x: &HermitianMatrix) -> HermitianMatrix {
    apply_on_support(x, f64::sqrt)
}

/// Moore-Penrose inverse of a PSD matrix.
pub fn pinv(x: &HermitianMatrix) -> HermitianMatrix {
    apply_on_support(x, |w| 1.0 / w)
}

/// Natural log of a positive definite matrix.
pub fn logm(x: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (w, v) = x.eigh();
    if w[0] <= 0.0 {
        return Err(Error::InvalidInput(format!("logarithm of matrix with eigenvalue {}", w[0])));
    }
    let vals: Vec<f64> = w.iter().map(|x| x.ln()).collect();
    Ok(recompose(&v, &vals))
}

/// Checks `supp(x) ⊆ supp(y)`.
pub fn support_contained(x: &HermitianMatrix, y: &HermitianMatrix) -> bool {
    let (w, v) = y.eigh();
    let top = w.iter().cloned().fold(0.0, f64::max);
    let xmax = x.max_eigenvalue().max(0.0);
    if xmax == 0.0 {
        return true;
    }
    let xm = x.matrix();
    for (k, &wk) in w.iter().enumerate() {
        if wk > EIGEN_FLOOR_REL * top {
            continue;
        }
        let col = v.column(k);
        let weight = (col.adjoint() * xm * col)[(0, 0)].re;
        if weight > SUPPORT_TOL * xmax {
            return false;
        }
    }
    true
}

/// `x^{1/2} y^+ x^{1/2}` compressed to `supp(x)`, together with the map
/// `B = V diag(sqrt x)` back to the full space.
fn compressed_ratio(x: &HermitianMatrix, y: &HermitianMatrix) -> Result<(HermitianMatrix, CMat)> {
    if !support_contained(x, y) {
        return Err(Error::SupportViolation("supp(x) is not contained in supp(y)".into()));
    }
    let s = spectrum(x);
    let b = CMat::from_fn(x.dim(), s.vals.len(), |r, k| s.vecs[(r, k)] * c(s.vals[k].sqrt()));
    let yp = pinv(y);
    let m = HermitianMatrix::symmetrized(b.adjoint() * yp.matrix() * &b);
    Ok((m, b))
}

/// Power of a positive definite matrix with tiny negative round-off clamped.
fn pd_power(m: &HermitianMatrix, p: f64) -> HermitianMatrix {
    let (w, v) = m.eigh();
    let vals: Vec<f64> = w.iter().map(|&x| x.max(f64::MIN_POSITIVE).powf(p)).collect();
    recompose(&v, &vals)
}

/// `G_t(x, y) = x^{1/2} (x^{-1/2} y x^{-1/2})^t x^{1/2}` for `t` in `[-1, 2]`.
///
/// For `t >= 0` the inverse of `x` is taken on its support. For `t < 0` the
/// middle factor is read as the inverse of `x^{1/2} y^+ x^{1/2}` on `supp(x)`,
/// which needs `supp(x) ⊆ supp(y)`; this is the form that makes
/// `Tr G_{1-a}(rho, sigma)` the geometric Renyi quantity for singular states.
pub fn weighted_geometric_mean(x: &HermitianMatrix, y: &HermitianMatrix, t: f64) -> Result<HermitianMatrix> {
    if !(-1.0..=2.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("geometric mean weight {t} outside [-1, 2]")));
    }
    if x.dim() != y.dim() {
        return Err(Error::InvalidDimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    if t < 0.0 {
        let (m, b) = compressed_ratio(x, y)?;
        if m.dim() == 0 {
            return Ok(HermitianMatrix::zeros(x.dim()));
        }
        let mid = pd_power(&m, -t);
        return Ok(HermitianMatrix::symmetrized(&b * mid.matrix() * b.adjoint()));
    }
    let s = spectrum(x);
    if s.vals.is_empty() {
        return Ok(HermitianMatrix::zeros(x.dim()));
    }
    let b = CMat::from_fn(x.dim(), s.vals.len(), |r, k| s.vecs[(r, k)] * c(s.vals[k].sqrt()));
    let binv = CMat::from_fn(x.dim(), s.vals.len(), |r, k| s.vecs[(r, k)] * c(1.0 / s.vals[k].sqrt()));
    let k = HermitianMatrix::symmetrized(binv.adjoint() * y.matrix() * &binv);
    let mid = matrix_power(&k, t);
    Ok(HermitianMatrix::symmetrized(&b * mid.matrix() * b.adjoint()))
}

/// `D_op(x||y) = x^{1/2} ln(x^{1/2} y^+ x^{1/2}) x^{1/2}` on `supp(x)`.
pub fn operator_relative_entropy(x: &HermitianMatrix, y: &HermitianMatrix) -> Result<HermitianMatrix> {
    if x.dim() != y.dim() {
        return Err(Error::InvalidDimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    let (m, b) = compressed_ratio(x, y)?;
    if m.dim() == 0 {
        return Ok(HermitianMatrix::zeros(x.dim()));
    }
    let (w, v) = m.eigh();
    let vals: Vec<f64> = w.iter().map(|&x| x.max(f64::MIN_POSITIVE).ln()).collect();
    let lg = recompose(&v, &vals);
    Ok(HermitianMatrix::symmetrized(&b * lg.matrix() * b.adjoint()))
}

/// Golub-Welsch nodes and weights shifted to `[0, 1]`.
pub fn gauss_legendre(m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::InvalidParameter("quadrature needs m >= 1".into()));
    }
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let beta = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = beta;
        jac[(k, k - 1)] = beta;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| ((eig.eigenvalues[i] + 1.0) / 2.0, eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(QuadratureRule {
        m,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    })
}

/// Scalar `2^k sum_j w_j f_{t_j}(z^{2^-k})` with `f_t(u) = (u-1)/(t(u-1)+1)`.
pub fn rational_log_scalar(z: f64, rule: &QuadratureRule, k: u32) -> f64 {
    let u = z.powf((0.5f64).powi(k as i32));
    let r: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| w * (u - 1.0) / (t * (u - 1.0) + 1.0))
        .sum();
    (2.0f64).powi(k as i32) * r
}

pub fn rational_log_approx(z: &HermitianMatrix, m: usize, k: u32) -> Result<HermitianMatrix> {
    let rule = gauss_legendre(m)?;
    let (w, v) = z.eigh();
    if w[0] <= 0.0 {
        return Err(Error::InvalidInput(format!("rational log of matrix with eigenvalue {}", w[0])));
    }
    let vals: Vec<f64> = w.iter().map(|&x| rational_log_scalar(x, &rule, k)).collect();
    Ok(recompose(&v, &vals))
}
