//! Fock-space truncation: certified error for dephasing pairs and
//! stabilization sweeps for everything else.

use crate::channels::{classical_kl_wrapped_normal, ChannelKind, ChannelModel};
use crate::divergences::{channel_divergence, DivergenceResult, Method, SdpParams, SolveOptions};
use crate::error::{Error, Result};
use crate::hilbert::EnergyBudget;

/// Successive-cutoff change below which a curve counts as settled.
pub const STABILIZATION_TOL: f64 = 1e-3;
/// Allowed decrease between successive cutoffs before a sequence is flagged.
pub const MONOTONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationCertificate {
    pub cutoff: usize,
    pub budget_e: f64,
    pub kl_pq: f64,
    /// `2E/(N+1) D(p||q)`.
    pub bound: f64,
    /// Truncated BS channel divergence, when it has been computed.
    pub truncated_value: Option<f64>,
}

impl TruncationCertificate {
    /// Interval holding the untruncated value.
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.truncated_value.map(|v| (v, v + self.bound))
    }
}

pub fn bs_truncation_bound(gamma1: f64, gamma2: f64, budget_e: f64, cutoff: usize) -> Result<TruncationCertificate> {
    if cutoff == 0 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    if !(budget_e >= 0.0 && budget_e.is_finite()) {
        return Err(Error::InvalidParameter(format!("energy budget {budget_e}")));
    }
    let kl_pq = classical_kl_wrapped_normal(gamma1, gamma2)?;
    Ok(TruncationCertificate {
        cutoff,
        budget_e,
        kl_pq,
        bound: 2.0 * budget_e / (cutoff as f64 + 1.0) * kl_pq,
        truncated_value: None,
    })
}

/// Certificate with the truncated BS value filled in.
pub fn certify_bs(
    gamma1: f64,
    gamma2: f64,
    budget_e: f64,
    cutoff: usize,
    opts: &SolveOptions,
) -> Result<TruncationCertificate> {
    let mut cert = bs_truncation_bound(gamma1, gamma2, budget_e, cutoff)?;
    let jn = ChannelModel::dephasing(gamma1, cutoff)?.choi();
    let jm = ChannelModel::dephasing(gamma2, cutoff)?.choi();
    let budget = EnergyBudget::new(cutoff + 1, budget_e)?;
    let r = crate::divergences::ec_bs_channel(&jn, &jm, &budget, opts)?;
    cert.truncated_value = r.value.finite();
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Analytic(TruncationCertificate),
    /// No analytic bound applies; only the sweep itself speaks.
    EmpiricalOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodTrace {
    pub method: Method,
    pub results: Vec<DivergenceResult>,
    /// First cutoff from which every later successive change is below
    /// `STABILIZATION_TOL`.
    pub stabilized_from: Option<usize>,
    pub non_monotone: bool,
}

impl MethodTrace {
    pub fn values(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.value.as_f64()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSweep {
    pub cutoffs: Vec<usize>,
    pub traces: Vec<MethodTrace>,
    /// Certificate at the largest cutoff.
    pub certification: Certification,
}

/// First cutoff from which every successive change in `v` stays below
/// `STABILIZATION_TOL`, or `None` if the last step still moves.
pub fn stabilized_from(cutoffs: &[usize], v: &[f64]) -> Option<usize> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut first = cutoffs.len() - 1;
    for i in (1..v.len()).rev() {
        if (v[i] - v[i - 1]).abs() < STABILIZATION_TOL {
            first = i - 1;
        } else {
            break;
        }
    }
    if v.len() > 1 && first == cutoffs.len() - 1 {
        return None;
    }
    Some(cutoffs[first])
}

/// Per-method values of the energy-constrained divergence at each cutoff.
pub fn truncation_sweep(
    model1: &ChannelModel,
    model2: &ChannelModel,
    budget_e: f64,
    cutoffs: &[usize],
    methods: &[Method],
    sdp: SdpParams,
    opts: &SolveOptions,
) -> Result<TruncationSweep> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("cutoffs must be non-empty and strictly ascending".into()));
    }
    let mut traces: Vec<MethodTrace> = methods
        .iter()
        .map(|&method| MethodTrace { method, results: Vec::new(), stabilized_from: None, non_monotone: false })
        .collect();
    for &n in cutoffs {
        let jn = model1.with_cutoff(n).choi();
        let jm = model2.with_cutoff(n).choi();
        let budget = EnergyBudget::new(n + 1, budget_e)?;
        for t in traces.iter_mut() {
            t.results.push(channel_divergence(t.method, &jn, &jm, &budget, sdp, opts)?);
        }
    }
    for t in traces.iter_mut() {
        let v = t.values();
        t.non_monotone = v.windows(2).any(|w| w[1] < w[0] - MONOTONE_TOL);
        t.stabilized_from = stabilized_from(cutoffs, &v);
    }
    let dephasing = model1.kind == ChannelKind::Dephasing && model2.kind == ChannelKind::Dephasing;
    let certification = if dephasing {
        let top = *cutoffs.last().unwrap();
        let mut cert = bs_truncation_bound(model1.gamma, model2.gamma, budget_e, top)?;
        cert.truncated_value = traces
            .iter()
            .find(|t| t.method == Method::BsClosedForm)
            .and_then(|t| t.results.last())
            .and_then(|r| r.value.finite());
        Certification::Analytic(cert)
    } else {
        Certification::EmpiricalOnly
    };
    Ok(TruncationSweep { cutoffs: cutoffs.to_vec(), traces, certification })
}
