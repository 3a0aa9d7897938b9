//! Dense operators on truncated Fock spaces.
//!
//! Bipartite operators use the flat index `r * dim_b + b`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense complex matrix, Hermitian by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMat,
}

impl HermitianMatrix {
    /// Symmetrizes `(m + m†) / 2`.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension("empty matrix".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: CMat) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj) * c(0.5) }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(c))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidDimension("empty diagonal".into()));
        }
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| c(x)));
        Ok(Self { m: CMat::from_diagonal(&v) })
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMat::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMat::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    /// `Re Tr[self · other]`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.m.zip_fold(&other.m.transpose(), 0.0, |acc, a, b| acc + (a * b).re)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.m.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.m.map(|z| z.re)
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, CMat) {
        let eig = SymmetricEigen::new(self.m.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = CMat::from_fn(self.dim(), self.dim(), |r, k| eig.eigenvectors[(r, order[k])]);
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    /// `a · self · a†`.
    pub fn congruence(&self, a: &CMat) -> HermitianMatrix {
        Self::symmetrized(a * &self.m * a.adjoint())
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        Self { m: &self.m * c(s) }
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        (&self.m - &other.m).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> HermitianMatrix {
        Self { m: CMat::from_fn(idx.len(), idx.len(), |i, j| self.m[(idx[i], idx[j])]) }
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteIndex {
    pub dim_r: usize,
    pub dim_b: usize,
}

impl BipartiteIndex {
    pub fn new(dim_r: usize, dim_b: usize) -> Result<Self> {
        if dim_r == 0 || dim_b == 0 {
            return Err(Error::InvalidDimension("bipartite factor of dimension 0".into()));
        }
        Ok(Self { dim_r, dim_b })
    }

    pub fn square(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn dim(&self) -> usize {
        self.dim_r * self.dim_b
    }

    pub fn flat(&self, r: usize, b: usize) -> usize {
        r * self.dim_b + b
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "operator dim {} does not match {}x{}",
                dim, self.dim_r, self.dim_b
            )));
        }
        Ok(())
    }
}

/// Photon-number Hamiltonian and mean-photon bound.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBudget {
    pub hamiltonian: HermitianMatrix,
    pub budget: f64,
}

impl EnergyBudget {
    /// `dim` Fock levels, so the Hamiltonian is `diag(0, ..., dim-1)`.
    pub fn new(dim: usize, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::InvalidParameter(format!("energy budget {budget}")));
        }
        Ok(Self { hamiltonian: number_operator(dim)?, budget })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.hamiltonian.diagonal()
    }
}

/// `diag(0, 1, ..., dim-1)`.
pub fn number_operator(dim: usize) -> Result<HermitianMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("number operator needs dim >= 1".into()));
    }
    let d: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    HermitianMatrix::from_diagonal(&d)
}

pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix { m: a.m.kronecker(&b.m) }
}

pub fn partial_trace_b_mat(m: &CMat, idx: BipartiteIndex) -> Result<CMat> {
    idx.check(m.nrows())?;
    let mut out = CMat::zeros(idx.dim_r, idx.dim_r);
    for r in 0..idx.dim_r {
        for s in 0..idx.dim_r {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..idx.dim_b {
                acc += m[(idx.flat(r, b), idx.flat(s, b))];
            }
            out[(r, s)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace_r_mat(m: &CMat, idx: BipartiteIndex) -> Result<CMat> {
    idx.check(m.nrows())?;
    let mut out = CMat::zeros(idx.dim_b, idx.dim_b);
    for a in 0..idx.dim_b {
        for b in 0..idx.dim_b {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..idx.dim_r {
                acc += m[(idx.flat(r, a), idx.flat(r, b))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace_b(m: &HermitianMatrix, idx: BipartiteIndex) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::symmetrized(partial_trace_b_mat(&m.m, idx)?))
}

pub fn partial_trace_r(m: &HermitianMatrix, idx: BipartiteIndex) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::symmetrized(partial_trace_r_mat(&m.m, idx)?))
}

/// Projector onto `sum_i sqrt(p_i) |ii>`.
pub fn purify_diagonal(spectrum: &[f64]) -> Result<HermitianMatrix> {
    if spectrum.is_empty() {
        return Err(Error::InvalidDimension("empty spectrum".into()));
    }
    if let Some(x) = spectrum.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("entry {x} is negative")));
    }
    let total: f64 = spectrum.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    let d = spectrum.len();
    let mut psi = DVector::<Complex64>::zeros(d * d);
    for (i, &p) in spectrum.iter().enumerate() {
        psi[i * d + i] = c(p.sqrt());
    }
    Ok(HermitianMatrix::symmetrized(&psi * psi.adjoint()))
}
