//! Bosonic dephasing, pure-loss and loss-dephasing channels and their
//! Choi operators truncated at Fock index `N` on both legs.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hilbert::{c, BipartiteIndex, CMat, HermitianMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Dephasing,
    Loss,
    LossDephasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub gamma: f64,
    pub eta: f64,
    /// Largest Fock index kept; the single-mode dimension is `cutoff + 1`.
    pub cutoff: usize,
}

impl ChannelModel {
    pub fn dephasing(gamma: f64, cutoff: usize) -> Result<Self> {
        Self::new(ChannelKind::Dephasing, gamma, 1.0, cutoff)
    }

    pub fn loss(eta: f64, cutoff: usize) -> Result<Self> {
        Self::new(ChannelKind::Loss, 0.0, eta, cutoff)
    }

    pub fn loss_dephasing(eta: f64, gamma: f64, cutoff: usize) -> Result<Self> {
        Self::new(ChannelKind::LossDephasing, gamma, eta, cutoff)
    }

    pub fn new(kind: ChannelKind, gamma: f64, eta: f64, cutoff: usize) -> Result<Self> {
        check_gamma(gamma)?;
        check_eta(eta)?;
        Ok(Self { kind, gamma, eta, cutoff })
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self { cutoff, ..*self }
    }

    pub fn choi(&self) -> ChoiMatrix {
        match self.kind {
            ChannelKind::Dephasing => build_choi(1.0, self.gamma, self.cutoff),
            ChannelKind::Loss => build_choi(self.eta, 0.0, self.cutoff),
            ChannelKind::LossDephasing => build_choi(self.eta, self.gamma, self.cutoff),
        }
    }
}

/// Choi operator `sum_ij |i><j| (x) N(|i><j|)` with the input leg first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    pub matrix: HermitianMatrix,
    pub idx: BipartiteIndex,
}

impl ChoiMatrix {
    pub fn new(matrix: HermitianMatrix, idx: BipartiteIndex) -> Result<Self> {
        if matrix.dim() != idx.dim() {
            return Err(Error::InvalidDimension(format!(
                "Choi of dim {} with index {}x{}",
                matrix.dim(),
                idx.dim_r,
                idx.dim_b
            )));
        }
        Ok(Self { matrix, idx })
    }

    pub fn dim_in(&self) -> usize {
        self.idx.dim_r
    }

    pub fn scale(&self, s: f64) -> ChoiMatrix {
        Self { matrix: self.matrix.scale(s), idx: self.idx }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("dephasing variance {gamma}")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0,1]")));
    }
    Ok(())
}

fn check_positive_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("wrapped normal needs gamma > 0, got {gamma}")));
    }
    Ok(())
}

/// `ln p_gamma(phi)` by log-sum-exp over the images `phi + 2 pi k`.
pub fn wrapped_normal_log_pdf(gamma: f64, phi: f64) -> Result<f64> {
    check_positive_gamma(gamma)?;
    // shift phi into [-pi, pi] so that k = 0 is the leading image
    let phi = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    let expo = |k: i64| {
        let x = phi + 2.0 * PI * k as f64;
        -x * x / (2.0 * gamma)
    };
    let lead = expo(0);
    let cut = lead + (1e-16f64).ln();
    let mut sum = 1.0;
    let mut k = 1i64;
    loop {
        let (a, b) = (expo(k), expo(-k));
        sum += (a - lead).exp() + (b - lead).exp();
        if a.max(b) < cut {
            break;
        }
        k += 1;
    }
    Ok(lead + sum.ln() - 0.5 * (2.0 * PI * gamma).ln())
}

pub fn wrapped_normal_pdf(gamma: f64, phi: f64) -> Result<f64> {
    Ok(wrapped_normal_log_pdf(gamma, phi)?.exp())
}

fn ln_binom(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64)
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn build_choi(eta: f64, gamma: f64, cutoff: usize) -> ChoiMatrix {
    let d = cutoff + 1;
    let idx = BipartiteIndex { dim_r: d, dim_b: d };
    let mut j = CMat::zeros(d * d, d * d);
    for m in 0..d {
        for n in 0..d {
            let damp = (-gamma * ((m as f64 - n as f64).powi(2)) / 2.0).exp();
            for k in 0..=m.min(n) {
                let ln_coef = 0.5 * (ln_binom(m, k) + ln_binom(n, k))
                    + xlny((m + n) as f64 / 2.0 - k as f64, eta)
                    + xlny(k as f64, 1.0 - eta);
                let v = ln_coef.exp() * damp;
                if v != 0.0 {
                    j[(idx.flat(m, m - k), idx.flat(n, n - k))] = c(v);
                }
            }
        }
    }
    ChoiMatrix { matrix: HermitianMatrix::symmetrized(j), idx }
}

pub fn dephasing_choi(gamma: f64, cutoff: usize) -> Result<ChoiMatrix> {
    check_gamma(gamma)?;
    Ok(build_choi(1.0, gamma, cutoff))
}

pub fn loss_choi(eta: f64, cutoff: usize) -> Result<ChoiMatrix> {
    check_eta(eta)?;
    Ok(build_choi(eta, 0.0, cutoff))
}

pub fn loss_dephasing_choi(eta: f64, gamma: f64, cutoff: usize) -> Result<ChoiMatrix> {
    check_eta(eta)?;
    check_gamma(gamma)?;
    Ok(build_choi(eta, gamma, cutoff))
}

/// Damps `<m|rho|n>` by `exp(-gamma (m-n)^2 / 2)`.
pub fn apply_dephasing(gamma: f64, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    check_gamma(gamma)?;
    let m = CMat::from_fn(rho.dim(), rho.dim(), |i, j| {
        let d = i as f64 - j as f64;
        rho.get(i, j) * Complex64::new((-gamma * d * d / 2.0).exp(), 0.0)
    });
    HermitianMatrix::new(m)
}

/// Relative entropy of two wrapped normal phase densities.
pub fn classical_kl_wrapped_normal(gamma1: f64, gamma2: f64) -> Result<f64> {
    check_positive_gamma(gamma1)?;
    check_positive_gamma(gamma2)?;
    if gamma1 == gamma2 {
        return Ok(0.0);
    }
    let f = |phi: f64| {
        let lp = wrapped_normal_log_pdf(gamma1, phi).unwrap();
        let lq = wrapped_normal_log_pdf(gamma2, phi).unwrap();
        lp.exp() * (lp - lq)
    };
    // the integrand is even in phi
    let out = quadrature::double_exponential::integrate(f, 0.0, PI, 1e-11);
    Ok((2.0 * out.integral).max(0.0))
}
