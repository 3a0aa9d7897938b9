use std::path::PathBuf;
use std::time::Instant;

use chandisc::channels::{classical_kl_wrapped_normal, ChannelKind};
use chandisc::conic::{ConicProgram, SolveStatus};
use chandisc::divergences::{channel_divergence, DivergenceValue, Method, SolveOptions};
use chandisc::hilbert::{EnergyBudget, HermitianMatrix};
use chandisc::truncation::{bs_truncation_bound, stabilized_from, MONOTONE_TOL};
use rayon::prelude::*;

use crate::config::{Experiment, RunConfig};

/// Slack allowed between adjacent members of the divergence hierarchy.
pub const AUDIT_SLACK: f64 = 2e-5;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver backend unavailable: {0}")]
    Backend(String),
}

#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: Experiment,
    pub method: String,
    pub x: f64,
    pub value: DivergenceValue,
    pub status: SolveStatus,
    pub wall_ms: f64,
    pub spectrum: Option<Vec<f64>>,
    pub gamma2: f64,
    pub cutoff: usize,
    pub energy: f64,
}

#[derive(Debug, Default)]
pub struct Report {
    pub rows: Vec<Row>,
    pub summary: Vec<String>,
    pub audit_violations: usize,
}

pub struct RunOptions {
    pub jobs: Option<usize>,
    pub dump_sdp: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    method: Method,
    x: f64,
    gamma2: f64,
    cutoff: usize,
    energy: f64,
}

fn points(cfg: &RunConfig) -> Vec<Point> {
    let mut out = Vec::new();
    let mut push = |x: f64, gamma2: f64, cutoff: usize, energy: f64| {
        for &method in &cfg.methods {
            out.push(Point { method, x, gamma2, cutoff, energy });
        }
    };
    match cfg.experiment {
        Experiment::SweepEnergy | Experiment::HierarchyAudit => {
            for &e in &cfg.energy_grid {
                push(e, cfg.gamma2, cfg.cutoff, e);
            }
        }
        Experiment::SweepGamma => {
            for &g in &cfg.gamma_grid {
                push(g, g, cfg.cutoff, cfg.energy);
            }
        }
        Experiment::SweepTruncation => {
            for &n in &cfg.cutoff_grid {
                push(n as f64, cfg.gamma2, n, cfg.energy);
            }
        }
        Experiment::ProbeReport => push(cfg.energy, cfg.gamma2, cfg.cutoff, cfg.energy),
    }
    out
}

/// Solves a one-variable program so a broken backend fails fast.
fn probe_backend(opts: &SolveOptions) -> Result<(), RunError> {
    let mut p = ConicProgram::new();
    let rho = p.psd_matrix("rho", 2, false);
    p.eq(rho.trace().add_const(-1.0));
    p.maximize(rho.inner(&HermitianMatrix::identity(2)));
    match opts.solver.solve(&p, opts.tol) {
        Ok(s) if s.status.is_solved() => Ok(()),
        Ok(s) => Err(RunError::Backend(format!("{} returned {} on a trivial program", opts.solver.name(), s.status))),
        Err(e) => Err(RunError::Backend(e.to_string())),
    }
}

fn evaluate(cfg: &RunConfig, p: &Point, idx: usize, base: &SolveOptions) -> (Row, Option<chandisc::Error>) {
    let start = Instant::now();
    let mut opts = base.clone();
    if let Some((dir, _)) = &base.dump {
        opts.dump = Some((dir.clone(), format!("{}_{}_{idx:04}", cfg.experiment.as_str(), p.method)));
    }
    let res = (|| {
        let jn = cfg.model1(p.cutoff)?.choi();
        let jm = cfg.model2(p.cutoff, p.gamma2)?.choi();
        let budget = EnergyBudget::new(p.cutoff + 1, p.energy)?;
        channel_divergence(p.method, &jn, &jm, &budget, cfg.sdp, &opts)
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = Row {
        experiment: cfg.experiment,
        method: p.method.to_string(),
        x: p.x,
        value: DivergenceValue::NotApplicable,
        status: SolveStatus::NumericalFailure,
        wall_ms,
        spectrum: None,
        gamma2: p.gamma2,
        cutoff: p.cutoff,
        energy: p.energy,
    };
    match res {
        Ok(r) => {
            row.value = r.value;
            row.status = r.status;
            row.spectrum = r.optimal_probe_spectrum;
            (row, None)
        }
        Err(e) => (row, Some(e)),
    }
}

pub fn run(cfg: &RunConfig, ro: &RunOptions) -> Result<Report, RunError> {
    let mut base = SolveOptions::default();
    if let Some(dir) = &ro.dump_sdp {
        base.dump = Some((dir.clone(), String::new()));
    }
    probe_backend(&base)?;

    let pts = points(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = ro.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| RunError::Config(format!("worker pool: {e}")))?;
    let results: Vec<(Row, Option<chandisc::Error>)> =
        pool.install(|| pts.par_iter().enumerate().map(|(i, p)| evaluate(cfg, p, i, &base)).collect());

    let mut report = Report::default();
    let mut backend_errors = 0;
    for (row, err) in results {
        if let Some(e) = err {
            if matches!(e, chandisc::Error::Backend(_)) {
                backend_errors += 1;
            }
            report.summary.push(format!("{} at x={}: {e}", row.method, row.x));
        }
        report.rows.push(row);
    }
    if backend_errors > 0 && backend_errors == report.rows.len() {
        return Err(RunError::Backend(format!("all {backend_errors} points failed in the solver backend")));
    }

    match cfg.experiment {
        Experiment::SweepEnergy => summarize_monotone(cfg, &mut report),
        Experiment::SweepGamma => add_ceiling(cfg, &mut report)?,
        Experiment::SweepTruncation => summarize_truncation(cfg, &mut report)?,
        Experiment::ProbeReport => summarize_probe(cfg, &mut report),
        Experiment::HierarchyAudit => audit(cfg, &mut report),
    }
    Ok(report)
}

fn series<'a>(rows: &'a [Row], method: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
    rows.iter().filter(move |r| r.method == method)
}

fn summarize_monotone(cfg: &RunConfig, report: &mut Report) {
    for m in &cfg.methods {
        let v: Vec<f64> = series(&report.rows, m.as_str()).map(|r| r.value.as_f64()).collect();
        let drops = v.windows(2).filter(|w| w[1] < w[0] - MONOTONE_TOL).count();
        let tag = if drops == 0 { "non-decreasing in E".to_string() } else { format!("{drops} decreasing step(s)") };
        report.summary.push(format!("{m}: {tag}"));
    }
}

fn add_ceiling(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    if cfg.channel != ChannelKind::Dephasing {
        return Ok(());
    }
    let mut above = 0;
    for &g in &cfg.gamma_grid {
        let start = Instant::now();
        let kl = classical_kl_wrapped_normal(cfg.gamma1, g).map_err(|e| RunError::Config(e.to_string()))?;
        above += report.rows.iter().filter(|r| r.gamma2 == g && r.value.as_f64() > kl + AUDIT_SLACK).count();
        report.rows.push(Row {
            experiment: cfg.experiment,
            method: "kl_ceiling".into(),
            x: g,
            value: DivergenceValue::Finite(kl),
            status: SolveStatus::Optimal,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            spectrum: None,
            gamma2: g,
            cutoff: cfg.cutoff,
            energy: cfg.energy,
        });
    }
    report.rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    report.summary.push(format!("{above} value(s) above the classical ceiling"));
    Ok(())
}

fn summarize_truncation(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    for m in &cfg.methods {
        let v: Vec<f64> = series(&report.rows, m.as_str()).map(|r| r.value.as_f64()).collect();
        let non_monotone = v.windows(2).any(|w| w[1] < w[0] - MONOTONE_TOL);
        let stab = match stabilized_from(&cfg.cutoff_grid, &v) {
            Some(n) => format!("stabilized from N={n}"),
            None => "not stabilized".into(),
        };
        let flag = if non_monotone { ", non-monotone" } else { "" };
        report.summary.push(format!("{m}: {stab}{flag}"));
    }
    if cfg.channel == ChannelKind::Dephasing {
        let top = *cfg.cutoff_grid.last().unwrap();
        let cert = bs_truncation_bound(cfg.gamma1, cfg.gamma2, cfg.energy, top).map_err(|e| RunError::Config(e.to_string()))?;
        let bs = series(&report.rows, Method::BsClosedForm.as_str()).last().and_then(|r| r.value.finite());
        match bs {
            Some(b) => report.summary.push(format!(
                "certificate at N={top}: bs in [{b:.6}, {:.6}] (bound {:.3e})",
                b + cert.bound,
                cert.bound
            )),
            None => report.summary.push(format!("certificate at N={top}: bound {:.3e}", cert.bound)),
        }
    } else {
        report.summary.push("no analytic truncation certificate for this channel family".into());
    }
    Ok(())
}

fn summarize_probe(cfg: &RunConfig, report: &mut Report) {
    let degenerate = report.rows.iter().all(|r| r.value.finite().is_some_and(|v| v.abs() <= 1e-9));
    if degenerate {
        report.summary.push("degenerate: the objective is flat in the probe, any feasible spectrum is optimal".into());
    }
    for r in &report.rows {
        let Some(p) = &r.spectrum else {
            report.summary.push(format!("{}: no probe spectrum", r.method));
            continue;
        };
        let comps: Vec<String> = p
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= 0.01)
            .map(|(n, &x)| format!("|{n}>: p={x:.4} sqrt(p)={:.4}", x.max(0.0).sqrt()))
            .collect();
        report.summary.push(format!("{} (E={}): {}", r.method, cfg.energy, comps.join(", ")));
    }
}

/// Hierarchy order, weakest to strongest.
const CHAIN: [Method; 5] = [Method::MeasuredRe, Method::ReLower, Method::ReUpper, Method::BsClosedForm, Method::GrdDirect];

fn excess(lo: &DivergenceValue, hi: &DivergenceValue) -> f64 {
    match (lo, hi) {
        (_, DivergenceValue::Infinite) => f64::NEG_INFINITY,
        (DivergenceValue::Infinite, DivergenceValue::Finite(_)) => f64::INFINITY,
        (DivergenceValue::Finite(a), DivergenceValue::Finite(b)) => a - b,
        _ => f64::NEG_INFINITY,
    }
}

fn audit(cfg: &RunConfig, report: &mut Report) {
    let mut worst = f64::NEG_INFINITY;
    for &e in &cfg.energy_grid {
        let at = |m: Method| report.rows.iter().find(|r| r.x == e && r.method == m.as_str() && r.status.is_solved());
        let chain: Vec<&Row> = CHAIN.iter().filter_map(|&m| at(m)).collect();
        let mut pairs: Vec<(&Row, &Row)> = chain.windows(2).map(|w| (w[0], w[1])).collect();
        if let (Some(bs), Some(g)) = (at(Method::BsClosedForm), at(Method::GrdSdp)) {
            pairs.push((bs, g));
        }
        for (lo, hi) in pairs {
            let d = excess(&lo.value, &hi.value);
            worst = worst.max(d);
            if d > AUDIT_SLACK {
                report.audit_violations += 1;
                report.summary.push(format!("violation at E={e}: {} exceeds {} by {d:.3e}", lo.method, hi.method));
            }
        }
    }
    report.summary.push(format!(
        "hierarchy audit: {} violation(s), largest excess {}",
        report.audit_violations,
        if worst.is_finite() { format!("{worst:.3e}") } else { "n/a".into() }
    ));
}
