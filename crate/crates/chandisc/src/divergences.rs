//! Energy-constrained channel divergences and their state counterparts.
//!
//! Channel quantities take the two Choi operators and an energy budget on the
//! input. For phase-covariant pairs (every channel in `channels`) the Choi
//! operators split into blocks of fixed charge `r - b`, the optimal input can
//! be taken diagonal in the Fock basis, and every program below is solved
//! block by block with a spectrum `p` in place of the input state.

use std::path::PathBuf;
use std::sync::Arc;

use crate::channels::ChoiMatrix;
use crate::conic::{Affine, ClarabelBackend, ConicProgram, ConicSolver, MatExpr, SolveStatus, VarKind, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace_b, BipartiteIndex, CMat, EnergyBudget, HermitianMatrix};
use crate::matfunc::{
    gauss_legendre, operator_relative_entropy, pinv, sqrtm, support_contained, support_info,
    weighted_geometric_mean, EIGEN_FLOOR_REL,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
    /// The method does not apply to this pair, e.g. a discretization that
    /// needs a finite max-relative entropy.
    NotApplicable,
}

impl DivergenceValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            DivergenceValue::Finite(v) => *v,
            DivergenceValue::Infinite => f64::INFINITY,
            DivergenceValue::NotApplicable => f64::NAN,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            DivergenceValue::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    MeasuredRe,
    ReLower,
    ReUpper,
    GrdDirect,
    GrdSdp,
    BsClosedForm,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::MeasuredRe, Method::ReLower, Method::ReUpper, Method::BsClosedForm, Method::GrdDirect, Method::GrdSdp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MeasuredRe => "measured_re",
            Method::ReLower => "re_lower",
            Method::ReUpper => "re_upper",
            Method::GrdDirect => "grd_direct",
            Method::GrdSdp => "grd_sdp",
            Method::BsClosedForm => "bs_closed_form",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Parameters {
    pub energy: Option<f64>,
    pub alpha: Option<f64>,
    pub ell: Option<u32>,
    pub m: Option<usize>,
    pub k: Option<u32>,
    pub r: Option<usize>,
    /// Largest Fock index of the input leg.
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceResult {
    pub value: DivergenceValue,
    pub optimal_probe_spectrum: Option<Vec<f64>>,
    pub status: SolveStatus,
    pub method: Method,
    pub parameters: Parameters,
    pub solver_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrdSchedule {
    pub ell: u32,
    pub alpha: f64,
}

impl GrdSchedule {
    /// `alpha = 1 + 2^-ell`.
    pub fn new(ell: u32) -> Result<Self> {
        if ell == 0 || ell > 40 {
            return Err(Error::InvalidParameter(format!("ell = {ell}")));
        }
        Ok(Self { ell, alpha: 1.0 + (0.5f64).powi(ell as i32) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Fock-diagonal when the Choi pair is phase covariant, full otherwise.
    #[default]
    Auto,
    FockDiagonal,
    Full,
}

/// Knobs shared by every solve.
#[derive(Clone)]
pub struct SolveOptions {
    pub reduction: Reduction,
    pub tol: f64,
    pub solver: Arc<dyn ConicSolver>,
    /// Directory and file stem for SDPA dumps of each program.
    pub dump: Option<(PathBuf, String)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { reduction: Reduction::Auto, tol: DEFAULT_TOL, solver: Arc::new(ClarabelBackend::default()), dump: None }
    }
}

impl std::fmt::Debug for SolveOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolveOptions")
            .field("reduction", &self.reduction)
            .field("tol", &self.tol)
            .field("solver", &self.solver.name())
            .field("dump", &self.dump)
            .finish()
    }
}

impl SolveOptions {
    pub fn with_reduction(mut self, r: Reduction) -> Self {
        self.reduction = r;
        self
    }

    fn run(&self, p: &ConicProgram, label: &str) -> Result<crate::conic::Solution> {
        if let Some((dir, stem)) = &self.dump {
            std::fs::create_dir_all(dir).map_err(|e| Error::Backend(format!("{}: {e}", dir.display())))?;
            p.write_sdpa(&dir.join(format!("{stem}_{label}.dat-s")))?;
        }
        self.solver.solve(p, self.tol)
    }
}

// ---------------------------------------------------------------------------
// block layout

#[derive(Debug, Clone)]
struct Block {
    jn: HermitianMatrix,
    jm: HermitianMatrix,
    /// Input Fock index of each basis vector, for charge blocks.
    r_of: Vec<usize>,
}

impl Block {
    fn complex(&self) -> bool {
        !(self.jn.is_real(1e-15) && self.jm.is_real(1e-15))
    }
}

#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<Block>,
    diagonal: bool,
    idx: BipartiteIndex,
}

fn charge(idx: BipartiteIndex, flat: usize) -> i64 {
    (flat / idx.dim_b) as i64 - (flat % idx.dim_b) as i64
}

/// True when both operators only couple basis states of equal charge `r - b`.
pub fn is_phase_covariant(jn: &ChoiMatrix, jm: &ChoiMatrix) -> bool {
    let idx = jn.idx;
    if idx.dim_r != idx.dim_b || jm.idx != idx {
        return false;
    }
    [&jn.matrix, &jm.matrix].iter().all(|m| {
        let top = m.matrix().iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let n = m.dim();
        (0..n).all(|i| (0..n).all(|j| m.get(i, j).norm() <= 1e-14 * top || charge(idx, i) == charge(idx, j)))
    })
}

fn check_pair(jn: &ChoiMatrix, jm: &ChoiMatrix) -> Result<()> {
    if jn.idx != jm.idx {
        return Err(Error::InvalidDimension(format!("Choi indices {:?} vs {:?}", jn.idx, jm.idx)));
    }
    Ok(())
}

fn layout(jn: &ChoiMatrix, jm: &ChoiMatrix, reduction: Reduction) -> Result<Layout> {
    check_pair(jn, jm)?;
    let covariant = is_phase_covariant(jn, jm);
    let diagonal = match reduction {
        Reduction::Auto => covariant,
        Reduction::FockDiagonal if !covariant => {
            return Err(Error::InvalidInput("Fock-diagonal reduction needs a phase-covariant pair".into()))
        }
        Reduction::FockDiagonal => true,
        Reduction::Full => false,
    };
    let idx = jn.idx;
    if !diagonal {
        let block = Block { jn: jn.matrix.clone(), jm: jm.matrix.clone(), r_of: (0..idx.dim()).map(|f| f / idx.dim_b).collect() };
        return Ok(Layout { blocks: vec![block], diagonal, idx });
    }
    let d = idx.dim_r as i64;
    let mut blocks = Vec::new();
    for q in -(d - 1)..d {
        let flat: Vec<usize> = (0..idx.dim()).filter(|&f| charge(idx, f) == q).collect();
        let bn = jn.matrix.submatrix(&flat);
        let bm = jm.matrix.submatrix(&flat);
        let zero = |m: &HermitianMatrix| m.matrix().iter().all(|z| z.norm() == 0.0);
        if zero(&bn) && zero(&bm) {
            continue;
        }
        blocks.push(Block { jn: bn, jm: bm, r_of: flat.iter().map(|f| f / idx.dim_b).collect() });
    }
    Ok(Layout { blocks, diagonal, idx })
}

impl Layout {
    fn supports_ok(&self) -> bool {
        self.blocks.iter().all(|b| support_contained(&b.jn, &b.jm))
    }

    fn complex(&self) -> bool {
        self.blocks.iter().any(Block::complex)
    }

    /// `Tr_B` of a block-diagonal operator given per block.
    fn partial_trace_b(&self, per_block: &[MatExpr]) -> Result<MatExpr> {
        if !self.diagonal {
            return per_block[0].partial_trace_b(self.idx);
        }
        let mut diag = vec![Affine::zero(); self.idx.dim_r];
        for (b, e) in self.blocks.iter().zip(per_block) {
            for (i, &r) in b.r_of.iter().enumerate() {
                diag[r] = diag[r].add(&e.at(i, i).re);
            }
        }
        Ok(MatExpr::diag(&diag))
    }

    /// `Tr_B` of a constant block-diagonal operator.
    fn partial_trace_b_const(&self, per_block: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        if !self.diagonal {
            return partial_trace_b(&per_block[0], self.idx);
        }
        let mut diag = vec![0.0; self.idx.dim_r];
        for (b, m) in self.blocks.iter().zip(per_block) {
            for (i, &r) in b.r_of.iter().enumerate() {
                diag[r] += m.get(i, i).re;
            }
        }
        HermitianMatrix::from_diagonal(&diag)
    }

    fn var_kind(&self, b: &Block) -> (VarKind, bool) {
        let complex = if self.diagonal { b.complex() } else { self.complex() };
        (if complex { VarKind::Hermitian } else { VarKind::Symmetric }, complex)
    }
}

/// Input state variable: a spectrum or a full density matrix.
struct Probe {
    diag: Vec<Affine>,
    full: Option<MatExpr>,
}

impl Probe {
    fn new(p: &mut ConicProgram, lay: &Layout, budget: &EnergyBudget) -> Result<Probe> {
        let d = lay.idx.dim_r;
        if budget.dim() != d {
            return Err(Error::InvalidDimension(format!("Hamiltonian dim {} vs input dim {d}", budget.dim())));
        }
        let probe = if lay.diagonal {
            let diag: Vec<Affine> = (0..d).map(|n| p.nonneg_scalar(&format!("p[{n}]"))).collect();
            Probe { diag, full: None }
        } else {
            let rho = p.psd_matrix("rho", d, lay.complex());
            Probe { diag: rho.diagonal(), full: Some(rho) }
        };
        p.eq(Affine::sum(&probe.diag).add_const(-1.0));
        let energy = match &probe.full {
            Some(rho) => rho.inner(&budget.hamiltonian),
            None => probe.diag.iter().zip(budget.levels()).fold(Affine::zero(), |acc, (a, h)| acc.axpy(h, a)),
        };
        p.le(&energy, &Affine::constant(budget.budget));
        Ok(probe)
    }

    /// `rho (x) I` restricted to a block.
    fn x(&self, lay: &Layout, b: &Block) -> MatExpr {
        match &self.full {
            Some(rho) => rho.kron_identity(lay.idx.dim_b),
            None => MatExpr::diag(&b.r_of.iter().map(|&r| self.diag[r].clone()).collect::<Vec<_>>()),
        }
    }

    fn spectrum(&self, sol: &crate::conic::Solution) -> Vec<f64> {
        let raw: Vec<f64> = self.diag.iter().map(|a| sol.value(a).max(0.0)).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter().map(|v| v / total).collect()
        } else {
            raw
        }
    }
}

fn label(method: &str, budget: Option<&EnergyBudget>) -> String {
    match budget {
        Some(b) => format!("{method}_E{}", b.budget),
        None => method.to_string(),
    }
}

// ---------------------------------------------------------------------------
// linear program over spectra

/// `max sum c_n p_n` over the simplex with `sum h_n p_n <= E`, by vertex
/// enumeration. Returns the optimum and a maximizing spectrum.
pub fn energy_constrained_max(c: &[f64], levels: &[f64], e: f64) -> (f64, Vec<f64>) {
    let d = c.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    let mut consider = |v: f64, p: Vec<f64>| {
        if v > best.0 + 1e-15 {
            best = (v, p);
        }
    };
    for i in 0..d {
        if levels[i] <= e {
            let mut p = vec![0.0; d];
            p[i] = 1.0;
            consider(c[i], p);
        }
    }
    for i in 0..d {
        for j in 0..d {
            if levels[i] < e && levels[j] > e {
                let w = (levels[j] - e) / (levels[j] - levels[i]);
                let mut p = vec![0.0; d];
                p[i] = w;
                p[j] = 1.0 - w;
                consider(w * c[i] + (1.0 - w) * c[j], p);
            }
        }
    }
    best
}

/// `max Tr[rho c]` over states with `Tr[H rho] <= E`, as an SDP.
fn state_max_sdp(c: &HermitianMatrix, budget: &EnergyBudget, opts: &SolveOptions, tag: &str) -> Result<(f64, Vec<f64>, SolveStatus, f64)> {
    let mut p = ConicProgram::new();
    let d = c.dim();
    let rho = p.psd_matrix("rho", d, !c.is_real(1e-15));
    p.eq(rho.trace().add_const(-1.0));
    p.le(&rho.inner(&budget.hamiltonian), &Affine::constant(budget.budget));
    p.maximize(rho.inner(c));
    let sol = opts.run(&p, tag)?;
    let spec = sol.hermitian(&rho).diagonal();
    Ok((sol.objective_value, spec, sol.status, sol.solver_gap))
}

/// At zero energy the vacuum is the only feasible input and no full-rank
/// probe exists, so the closed forms (which rely on an invertible input
/// marginal) are evaluated on the vacuum row of the Choi operators instead.
fn vacuum_only(budget: &EnergyBudget) -> bool {
    budget.budget <= budget.levels()[0]
}

fn vacuum_restrict(j: &ChoiMatrix) -> Result<ChoiMatrix> {
    let keep: Vec<usize> = (0..j.idx.dim_b).map(|b| j.idx.flat(0, b)).collect();
    ChoiMatrix::new(j.matrix.submatrix(&keep), BipartiteIndex::new(1, j.idx.dim_b)?)
}

fn closed_form(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    opts: &SolveOptions,
    method: Method,
    per_block: impl Fn(&Block) -> Result<HermitianMatrix>,
    finish: impl Fn(f64) -> f64,
    parameters: Parameters,
) -> Result<DivergenceResult> {
    let lay = layout(jn, jm, opts.reduction)?;
    if budget.dim() != lay.idx.dim_r {
        return Err(Error::InvalidDimension(format!("Hamiltonian dim {} vs input dim {}", budget.dim(), lay.idx.dim_r)));
    }
    let infinite = || DivergenceResult {
        value: DivergenceValue::Infinite,
        optimal_probe_spectrum: None,
        status: SolveStatus::Optimal,
        method,
        parameters,
        solver_gap: None,
    };
    if vacuum_only(budget) {
        let (vn, vm) = (vacuum_restrict(jn)?, vacuum_restrict(jm)?);
        let block = Block { jn: vn.matrix, jm: vm.matrix, r_of: vec![0; vn.idx.dim()] };
        let c = match per_block(&block) {
            Ok(m) => m.trace(),
            Err(Error::SupportViolation(_)) => return Ok(infinite()),
            Err(e) => return Err(e),
        };
        let mut spec = vec![0.0; lay.idx.dim_r];
        spec[0] = 1.0;
        return Ok(DivergenceResult {
            value: DivergenceValue::Finite(finish(c)),
            optimal_probe_spectrum: Some(spec),
            status: SolveStatus::Optimal,
            method,
            parameters,
            solver_gap: None,
        });
    }
    let mut mats = Vec::with_capacity(lay.blocks.len());
    for b in &lay.blocks {
        match per_block(b) {
            Ok(m) => mats.push(m),
            Err(Error::SupportViolation(_)) => return Ok(infinite()),
            Err(e) => return Err(e),
        }
    }
    let c = lay.partial_trace_b_const(&mats)?;
    let (opt, spec, status, gap) = if lay.diagonal {
        let (v, s) = energy_constrained_max(&c.diagonal(), &budget.levels(), budget.budget);
        (v, s, SolveStatus::Optimal, None)
    } else {
        let (v, s, st, g) = state_max_sdp(&c, budget, opts, &label(method.as_str(), Some(budget)))?;
        (v, s, st, Some(g))
    };
    Ok(DivergenceResult {
        value: DivergenceValue::Finite(finish(opt)),
        optimal_probe_spectrum: Some(spec),
        status,
        method,
        parameters,
        solver_gap: gap,
    })
}

/// The operator `C = Tr_B[G_{1-alpha}(jn, jm)]`, `None` on a support violation.
pub fn grd_operator(jn: &ChoiMatrix, jm: &ChoiMatrix, alpha: f64) -> Result<Option<HermitianMatrix>> {
    check_pair(jn, jm)?;
    match weighted_geometric_mean(&jn.matrix, &jm.matrix, 1.0 - alpha) {
        Ok(g) => Ok(Some(partial_trace_b(&g, jn.idx)?)),
        Err(Error::SupportViolation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn ec_grd_channel(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    sched: GrdSchedule,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let a = sched.alpha;
    let params = Parameters {
        energy: Some(budget.budget),
        alpha: Some(a),
        ell: Some(sched.ell),
        cutoff: jn.idx.dim_r - 1,
        ..Default::default()
    };
    closed_form(
        jn,
        jm,
        budget,
        opts,
        Method::GrdDirect,
        |b| weighted_geometric_mean(&b.jn, &b.jm, 1.0 - a),
        |opt| opt.ln() / (a - 1.0),
        params,
    )
}

pub fn ec_bs_channel(jn: &ChoiMatrix, jm: &ChoiMatrix, budget: &EnergyBudget, opts: &SolveOptions) -> Result<DivergenceResult> {
    let params = Parameters { energy: Some(budget.budget), cutoff: jn.idx.dim_r - 1, ..Default::default() };
    closed_form(
        jn,
        jm,
        budget,
        opts,
        Method::BsClosedForm,
        |b| operator_relative_entropy(&b.jn, &b.jm),
        |opt| opt,
        params,
    )
}

// ---------------------------------------------------------------------------
// max-relative entropy and the discretization of the relative entropy

/// Largest generalized eigenvalue `max eig(jm^{+1/2} jn jm^{+1/2})`, or
/// infinity when `supp(jn)` is not inside `supp(jm)`.
pub fn dmax_eigen(jn: &ChoiMatrix, jm: &ChoiMatrix) -> Result<f64> {
    Ok(generalized_range(jn, jm)?.1)
}

/// `(mu, lambda)` with `mu jm <= jn <= lambda jm`; `mu` is taken on `supp(jm)`.
pub fn generalized_range(jn: &ChoiMatrix, jm: &ChoiMatrix) -> Result<(f64, f64)> {
    let lay = layout(jn, jm, Reduction::Auto)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for b in &lay.blocks {
        if !support_contained(&b.jn, &b.jm) {
            return Ok((0.0, f64::INFINITY));
        }
        let s = sqrtm(&pinv(&b.jm));
        let k = b.jn.congruence(s.matrix());
        let info = support_info(&b.jm);
        let (w, v) = info.projector.eigh();
        let basis: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.5).collect();
        let vb = CMat::from_fn(k.dim(), basis.len(), |r, c| v[(r, basis[c])]);
        let kc = HermitianMatrix::symmetrized(vb.adjoint() * k.matrix() * &vb);
        if kc.dim() == 0 {
            continue;
        }
        let ev = kc.eigenvalues();
        lo = lo.min(ev[0].max(0.0));
        hi = hi.max(*ev.last().unwrap());
    }
    if !lo.is_finite() {
        lo = 0.0;
    }
    Ok((lo, hi))
}

/// `inf { lambda : jn <= lambda jm }` as an SDP; infinity on a support violation.
pub fn dmax_channel(jn: &ChoiMatrix, jm: &ChoiMatrix, opts: &SolveOptions) -> Result<f64> {
    let lay = layout(jn, jm, opts.reduction)?;
    if !lay.supports_ok() {
        return Ok(f64::INFINITY);
    }
    let mut p = ConicProgram::new();
    let lam = p.scalar("lambda");
    for b in &lay.blocks {
        let m = MatExpr::from_fn(b.jm.dim(), |i, j| {
            let z = b.jm.get(i, j);
            let w = b.jn.get(i, j);
            crate::conic::CAffine {
                re: lam.scale(z.re).add_const(-w.re),
                im: lam.scale(z.im).add_const(-w.im),
            }
        });
        p.psd(m)?;
    }
    p.minimize(lam.clone());
    let sol = opts.run(&p, "dmax")?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => Ok(sol.objective_value),
        SolveStatus::Infeasible => Ok(f64::INFINITY),
        s => Err(Error::Backend(format!("dmax solve ended with {s}"))),
    }
}

/// Knots `mu = s_0 < s_1 < ... < s_r = lambda`, uniform in `t` above `mu`.
pub fn re_knots(mu: f64, lambda: f64, r: usize) -> Vec<f64> {
    let mut t = vec![mu];
    for k in 1..=r {
        let v = lambda * k as f64 / r as f64;
        if v > mu * (1.0 + 1e-12) {
            t.push(v);
        }
    }
    if t.len() == 1 {
        t.push(lambda.max(mu));
    }
    t
}

/// Weights of `g(s_k)` in the chord bound of `int g(t)/t dt` for convex `g`
/// with `g(s_0) = 0`.
pub fn chord_weights(t: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; t.len()];
    for k in 0..t.len() - 1 {
        let (a, b) = (t[k], t[k + 1]);
        if b <= a {
            continue;
        }
        if a == 0.0 {
            c[k + 1] += 1.0;
        } else {
            let l = (b / a).ln() / (b - a);
            c[k] += b * l - 1.0;
            c[k + 1] += 1.0 - a * l;
        }
    }
    c[0] = 0.0;
    c
}

fn not_applicable(method: Method, parameters: Parameters) -> DivergenceResult {
    DivergenceResult {
        value: DivergenceValue::NotApplicable,
        optimal_probe_spectrum: None,
        status: SolveStatus::Optimal,
        method,
        parameters,
        solver_gap: None,
    }
}

fn from_solution(
    sol: &crate::conic::Solution,
    value: f64,
    spectrum: Option<Vec<f64>>,
    method: Method,
    parameters: Parameters,
    maximize: bool,
) -> DivergenceResult {
    let v = match sol.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => DivergenceValue::Finite(value),
        SolveStatus::Unbounded if maximize => DivergenceValue::Infinite,
        SolveStatus::Infeasible if !maximize => DivergenceValue::Infinite,
        _ => DivergenceValue::NotApplicable,
    };
    DivergenceResult {
        value: v,
        optimal_probe_spectrum: if sol.status.is_solved() { spectrum } else { None },
        status: sol.status,
        method,
        parameters,
        solver_gap: Some(sol.solver_gap),
    }
}

pub fn ec_channel_re_lower(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    r: usize,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let params = Parameters { energy: Some(budget.budget), r: Some(r), cutoff: jn.idx.dim_r - 1, ..Default::default() };
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let (mu, lambda) = generalized_range(jn, jm)?;
    if !lambda.is_finite() {
        return Ok(not_applicable(Method::ReLower, params));
    }
    let lay = layout(jn, jm, opts.reduction)?;
    let t = re_knots(mu, lambda, r);
    let mut p = ConicProgram::new();
    let probe = Probe::new(&mut p, &lay, budget)?;
    let mut obj = Affine::constant(lambda.ln() + 1.0 - lambda);
    for (bi, b) in lay.blocks.iter().enumerate() {
        let x = probe.x(&lay, b);
        let (kind, _) = lay.var_kind(b);
        for k in 0..t.len() - 1 {
            if t[k] <= 0.0 {
                continue;
            }
            let coef_n = (t[k] / t[k + 1]).ln();
            let coef_m = t[k + 1] - t[k];
            let c = &(&b.jn * coef_n) + &(&b.jm * coef_m);
            let q = p.matrix(&format!("Q{bi}_{k}"), b.jn.dim(), kind);
            p.psd(q.clone())?;
            p.psd(x.sub(&q)?)?;
            obj = obj.add(&q.inner(&c));
        }
    }
    p.maximize(obj);
    let sol = opts.run(&p, &label("re_lower", Some(budget)))?;
    let spec = probe.spectrum(&sol);
    Ok(from_solution(&sol, sol.objective_value, Some(spec), Method::ReLower, params, true))
}

pub fn ec_channel_re_upper(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    r: usize,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let params = Parameters { energy: Some(budget.budget), r: Some(r), cutoff: jn.idx.dim_r - 1, ..Default::default() };
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let (mu, lambda) = generalized_range(jn, jm)?;
    if !lambda.is_finite() {
        return Ok(not_applicable(Method::ReUpper, params));
    }
    let lay = layout(jn, jm, opts.reduction)?;
    if budget.dim() != lay.idx.dim_r {
        return Err(Error::InvalidDimension(format!("Hamiltonian dim {} vs input dim {}", budget.dim(), lay.idx.dim_r)));
    }
    let t = re_knots(mu, lambda, r);
    let w = chord_weights(&t);
    let mut p = ConicProgram::new();
    let x = p.scalar("x");
    let y = p.nonneg_scalar("y");
    let mut sums = Vec::with_capacity(lay.blocks.len());
    for (bi, b) in lay.blocks.iter().enumerate() {
        let (kind, _) = lay.var_kind(b);
        let mut total = MatExpr::zeros(b.jn.dim());
        for (k, (&tk, &ck)) in t.iter().zip(&w).enumerate() {
            if ck <= 0.0 {
                continue;
            }
            // N_k >= gamma_k jn + delta_k jm with (gamma_k, delta_k) = (-c_k, c_k t_k)
            let rhs = &(&b.jm * (ck * tk)) - &(&b.jn * ck);
            let n = p.matrix(&format!("N{bi}_{k}"), b.jn.dim(), kind);
            p.psd(n.clone())?;
            p.psd(n.sub(&MatExpr::from_hermitian(&rhs))?)?;
            total = total.add(&n)?;
        }
        sums.push(total);
    }
    let trb = lay.partial_trace_b(&sums)?;
    let d = lay.idx.dim_r;
    let levels = budget.levels();
    let bound = MatExpr::diag(&(0..d).map(|n| x.add(&y.scale(levels[n]))).collect::<Vec<_>>());
    p.psd(bound.sub(&trb)?)?;
    p.minimize(x.add(&y.scale(budget.budget)).add_const(lambda.ln() + 1.0 - lambda));
    let sol = opts.run(&p, &label("re_upper", Some(budget)))?;
    Ok(from_solution(&sol, sol.objective_value, None, Method::ReUpper, params, false))
}

/// Both discretizations of the channel relative entropy together with a
/// check that they bracket each other.
pub fn ec_channel_re_bracket(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    r: usize,
    opts: &SolveOptions,
) -> Result<(DivergenceResult, DivergenceResult)> {
    let mut lo = ec_channel_re_lower(jn, jm, budget, r, opts)?;
    let mut up = ec_channel_re_upper(jn, jm, budget, r, opts)?;
    if let (Some(a), Some(b)) = (lo.value.finite(), up.value.finite()) {
        if a > b + 2e-5 {
            lo.status = SolveStatus::NumericalFailure;
            up.status = SolveStatus::NumericalFailure;
        }
    }
    Ok((lo, up))
}

// ---------------------------------------------------------------------------
// measured relative entropy

pub fn ec_measured_re_channel(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    m: usize,
    k: u32,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let params = Parameters {
        energy: Some(budget.budget),
        m: Some(m),
        k: Some(k),
        cutoff: jn.idx.dim_r - 1,
        ..Default::default()
    };
    let rule = gauss_legendre(m)?;
    let lay = layout(jn, jm, opts.reduction)?;
    let mut p = ConicProgram::new();
    let probe = Probe::new(&mut p, &lay, budget)?;
    let scale = (2.0f64).powi(k as i32);
    let mut obj = Affine::constant(1.0);
    for (bi, b) in lay.blocks.iter().enumerate() {
        let dim = b.jn.dim();
        let x = probe.x(&lay, b);
        let (kind, complex) = lay.var_kind(b);
        let omega = p.psd_matrix(&format!("Omega{bi}"), dim, complex);
        let mut z = vec![omega.clone()];
        for i in 1..=k {
            z.push(p.matrix(&format!("Z{bi}_{i}"), dim, kind));
        }
        for i in 0..k as usize {
            p.add_psd_block_2x2(&z[i], &z[i + 1], &x)?;
        }
        let zk = &z[k as usize];
        let mut theta = MatExpr::zeros(dim);
        for (j, (&tj, &wj)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let tm = p.matrix(&format!("T{bi}_{j}"), dim, kind);
            let a = zk.sub(&x)?.sub(&tm)?;
            let off = tm.scale(-tj.sqrt());
            let c = x.sub(&tm.scale(tj))?;
            p.add_psd_block_2x2(&a, &off, &c)?;
            theta = theta.add(&tm.scale(scale * wj))?;
        }
        obj = obj.add(&theta.inner(&b.jn)).sub(&omega.inner(&b.jm));
    }
    p.maximize(obj);
    let sol = opts.run(&p, &label("measured_re", Some(budget)))?;
    let spec = probe.spectrum(&sol);
    Ok(from_solution(&sol, sol.objective_value, Some(spec), Method::MeasuredRe, params, true))
}

// ---------------------------------------------------------------------------
// geometric Renyi SDPs

/// Adds the cascade `[[jn, N_i], [N_i, N_{i-1}]] >= 0`, `N_0 = jm`, and
/// `[[L, jn], [jn, N_ell]] >= 0` for one block; returns `L`.
///
/// With `whiten` the cascade is posed on `supp(jm)` after the congruence
/// `jm -> I`, and `L` is mapped back. Loss-dephasing blocks span ten orders
/// of magnitude, and without this the solver's feasibility tolerance leaks
/// into the optimum.
fn grd_cascade(p: &mut ConicProgram, b: &Block, kind: VarKind, ell: u32, bi: usize, whiten: bool) -> Result<MatExpr> {
    let (jn, mut prev, back) = if whiten {
        let (w, v) = b.jm.eigh();
        let top = w.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > EIGEN_FLOOR_REL * top).collect();
        let n = b.jm.dim();
        let inv = CMat::from_fn(n, keep.len(), |r, c| v[(r, keep[c])] / w[keep[c]].sqrt());
        let fwd = CMat::from_fn(n, keep.len(), |r, c| v[(r, keep[c])] * w[keep[c]].sqrt());
        let a = HermitianMatrix::symmetrized(inv.adjoint() * b.jn.matrix() * &inv);
        (MatExpr::from_hermitian(&a), MatExpr::identity(keep.len()), Some(fwd))
    } else {
        (MatExpr::from_hermitian(&b.jn), MatExpr::from_hermitian(&b.jm), None)
    };
    let dim = jn.dim();
    for i in 1..=ell {
        let ni = p.matrix(&format!("N{bi}_{i}"), dim, kind);
        p.add_psd_block_2x2(&jn, &ni, &prev)?;
        prev = ni;
    }
    let l = p.matrix(&format!("L{bi}"), dim, kind);
    p.add_psd_block_2x2(&l, &jn, &prev)?;
    match back {
        Some(s) => l.congruence(&s),
        None => Ok(l),
    }
}

/// `2^ell ln min { y : y I >= Tr_B L }` over the cascade; equals
/// `2^ell ln || Tr_B G_{-2^-ell}(jn, jm) ||_inf`.
pub fn grd_sdp_unconstrained(jn: &ChoiMatrix, jm: &ChoiMatrix, ell: u32, opts: &SolveOptions) -> Result<DivergenceValue> {
    let lay = layout(jn, jm, opts.reduction)?;
    if !lay.supports_ok() {
        return Ok(DivergenceValue::Infinite);
    }
    let mut p = ConicProgram::new();
    let y = p.scalar("y");
    let mut ls = Vec::new();
    for (bi, b) in lay.blocks.iter().enumerate() {
        let (kind, _) = lay.var_kind(b);
        ls.push(grd_cascade(&mut p, b, kind, ell, bi, lay.diagonal)?);
    }
    let trb = lay.partial_trace_b(&ls)?;
    let bound = MatExpr::diag(&vec![y.clone(); trb.dim()]);
    p.psd(bound.sub(&trb)?)?;
    p.minimize(y);
    let sol = opts.run(&p, &format!("grd_unconstrained_l{ell}"))?;
    if !sol.status.is_solved() {
        return Err(Error::Backend(format!("unconstrained GRD solve ended with {}", sol.status)));
    }
    Ok(DivergenceValue::Finite((2.0f64).powi(ell as i32) * sol.objective_value.ln()))
}

/// Closed form `2^ell ln || Tr_B G_{-2^-ell}(jn, jm) ||_inf`.
pub fn grd_unconstrained_closed_form(jn: &ChoiMatrix, jm: &ChoiMatrix, ell: u32) -> Result<DivergenceValue> {
    let sched = GrdSchedule::new(ell)?;
    match grd_operator(jn, jm, sched.alpha)? {
        None => Ok(DivergenceValue::Infinite),
        Some(c) => Ok(DivergenceValue::Finite((2.0f64).powi(ell as i32) * c.max_eigenvalue().ln())),
    }
}

/// Energy-constrained GRD through the primal cascade:
/// `min lambda + mu E  s.t.  Tr_B L <= lambda I + mu H`.
pub fn grd_sdp_energy_primal(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    ell: u32,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let sched = GrdSchedule::new(ell)?;
    let params = Parameters {
        energy: Some(budget.budget),
        alpha: Some(sched.alpha),
        ell: Some(ell),
        cutoff: jn.idx.dim_r - 1,
        ..Default::default()
    };
    if vacuum_only(budget) && jn.idx.dim_r > 1 {
        let o = opts.clone().with_reduction(Reduction::Auto);
        let mut r = grd_sdp_energy_primal(&vacuum_restrict(jn)?, &vacuum_restrict(jm)?, &EnergyBudget::new(1, 0.0)?, ell, &o)?;
        r.parameters = params;
        return Ok(r);
    }
    let lay = layout(jn, jm, opts.reduction)?;
    if !lay.supports_ok() {
        return Ok(DivergenceResult {
            value: DivergenceValue::Infinite,
            optimal_probe_spectrum: None,
            status: SolveStatus::Optimal,
            method: Method::GrdSdp,
            parameters: params,
            solver_gap: None,
        });
    }
    let mut p = ConicProgram::new();
    let lam = p.scalar("lambda");
    let mu = p.nonneg_scalar("mu");
    let mut ls = Vec::new();
    for (bi, b) in lay.blocks.iter().enumerate() {
        let (kind, _) = lay.var_kind(b);
        ls.push(grd_cascade(&mut p, b, kind, ell, bi, lay.diagonal)?);
    }
    let trb = lay.partial_trace_b(&ls)?;
    let levels = budget.levels();
    let bound = MatExpr::diag(&levels.iter().map(|&h| lam.add(&mu.scale(h))).collect::<Vec<_>>());
    p.psd(bound.sub(&trb)?)?;
    p.minimize(lam.add(&mu.scale(budget.budget)));
    let sol = opts.run(&p, &label(&format!("grd_primal_l{ell}"), Some(budget)))?;
    let v = (2.0f64).powi(ell as i32) * sol.objective_value.ln();
    Ok(from_solution(&sol, v, None, Method::GrdSdp, params, false))
}

/// Dual of the energy-constrained cascade; a lower bound on the GRD at
/// `alpha = 1 + 2^-ell`.
pub fn grd_sdp_dual_lower(
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    ell: u32,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    let sched = GrdSchedule::new(ell)?;
    let params = Parameters {
        energy: Some(budget.budget),
        alpha: Some(sched.alpha),
        ell: Some(ell),
        cutoff: jn.idx.dim_r - 1,
        ..Default::default()
    };
    let lay = layout(jn, jm, opts.reduction)?;
    let mut p = ConicProgram::new();
    let probe = Probe::new(&mut p, &lay, budget)?;
    let mut obj = Affine::zero();
    for (bi, b) in lay.blocks.iter().enumerate() {
        let dim = b.jn.dim();
        let (kind, complex) = lay.var_kind(b);
        let x = probe.x(&lay, b);
        let mut w_prev: Option<MatExpr> = None;
        for i in 0..=ell {
            let y = if i == ell { x.clone() } else { p.matrix(&format!("Y{bi}_{i}"), dim, kind) };
            let z = match &w_prev {
                None => p.matrix(&format!("Z{bi}_0"), dim, kind),
                Some(w) => w.add(&w.adjoint())?,
            };
            let w = p.matrix(&format!("W{bi}_{i}"), dim, VarKind::General { complex });
            p.add_psd_block_2x2(&y, &w.adjoint(), &z)?;
            if i == 0 {
                obj = obj.sub(&z.inner(&b.jm));
            }
            if i < ell {
                obj = obj.sub(&y.inner(&b.jn));
            } else {
                obj = obj.add(&w.add(&w.adjoint())?.inner(&b.jn));
            }
            w_prev = Some(w);
        }
    }
    p.maximize(obj);
    let sol = opts.run(&p, &label(&format!("grd_dual_l{ell}"), Some(budget)))?;
    let spec = probe.spectrum(&sol);
    let opt = sol.objective_value;
    let v = if opt > 0.0 { (2.0f64).powi(ell as i32) * opt.ln() } else { f64::NEG_INFINITY };
    Ok(from_solution(&sol, v, Some(spec), Method::GrdSdp, params, true))
}

// ---------------------------------------------------------------------------
// state divergences

fn check_states(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidDimension(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    Ok(())
}

/// `Tr[rho (ln rho - ln sigma)]`.
pub fn state_umegaki(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<DivergenceValue> {
    check_states(rho, sigma)?;
    if !support_contained(rho, sigma) {
        return Ok(DivergenceValue::Infinite);
    }
    let (wr, _) = rho.eigh();
    let top = wr.iter().cloned().fold(0.0, f64::max);
    let neg_entropy: f64 = wr.iter().filter(|&&w| w > EIGEN_FLOOR_REL * top).map(|w| w * w.ln()).sum();
    let (ws, vs) = sigma.eigh();
    let stop = ws.iter().cloned().fold(0.0, f64::max);
    let mut cross = 0.0;
    for (k, &w) in ws.iter().enumerate() {
        if w <= EIGEN_FLOOR_REL * stop {
            continue;
        }
        let col = vs.column(k);
        let weight = (col.adjoint() * rho.matrix() * col)[(0, 0)].re;
        cross += weight * w.ln();
    }
    Ok(DivergenceValue::Finite(neg_entropy - cross))
}

/// `(alpha - 1)^-1 ln Tr G_{1-alpha}(rho, sigma)`.
pub fn state_grd(rho: &HermitianMatrix, sigma: &HermitianMatrix, alpha: f64) -> Result<DivergenceValue> {
    check_states(rho, sigma)?;
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (1, 2]")));
    }
    match weighted_geometric_mean(rho, sigma, 1.0 - alpha) {
        Ok(g) => Ok(DivergenceValue::Finite(g.trace().ln() / (alpha - 1.0))),
        Err(Error::SupportViolation(_)) => Ok(DivergenceValue::Infinite),
        Err(e) => Err(e),
    }
}

/// `Tr[rho ln(rho^{1/2} sigma^{-1} rho^{1/2})]`.
pub fn state_bs(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<DivergenceValue> {
    check_states(rho, sigma)?;
    match operator_relative_entropy(rho, sigma) {
        Ok(d) => Ok(DivergenceValue::Finite(d.trace())),
        Err(Error::SupportViolation(_)) => Ok(DivergenceValue::Infinite),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredState {
    pub value: DivergenceValue,
    pub status: SolveStatus,
    pub iterations: usize,
    pub stationarity: f64,
}

pub const MEASURED_MAX_ITER: usize = 10_000;
pub const MEASURED_STATIONARITY: f64 = 1e-8;

/// `sup_{w > 0} Tr[rho ln w] - Tr[w sigma] + 1` by Riemannian ascent with
/// Armijo backtracking.
pub fn state_measured_re(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<MeasuredState> {
    check_states(rho, sigma)?;
    if !support_contained(rho, sigma) {
        return Ok(MeasuredState { value: DivergenceValue::Infinite, status: SolveStatus::Optimal, iterations: 0, stationarity: 0.0 });
    }
    // work on supp(sigma)
    let info = support_info(sigma);
    let (w, v) = info.projector.eigh();
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.5).collect();
    let vb = CMat::from_fn(sigma.dim(), keep.len(), |r, c| v[(r, keep[c])]);
    let r = HermitianMatrix::symmetrized(vb.adjoint() * rho.matrix() * &vb);
    let s = HermitianMatrix::symmetrized(vb.adjoint() * sigma.matrix() * &vb);
    let n = r.dim();

    let objective = |wv: &[f64], u: &CMat| -> f64 {
        let rr = u.adjoint() * r.matrix() * u;
        let ss = u.adjoint() * s.matrix() * u;
        (0..n).map(|i| rr[(i, i)].re * wv[i].ln() - ss[(i, i)].re * wv[i]).sum::<f64>() + 1.0
    };

    // xi = w^{1/2} G w^{1/2} in the eigenbasis of w, G the Euclidean gradient
    let gradient = |wv: &[f64], u: &CMat| -> (HermitianMatrix, f64) {
        let rr = u.adjoint() * r.matrix() * u;
        let ss = u.adjoint() * s.matrix() * u;
        let xi = CMat::from_fn(n, n, |i, j| {
            let l = if (wv[i] - wv[j]).abs() <= 1e-12 * wv[i].max(wv[j]) {
                2.0 / (wv[i] + wv[j])
            } else {
                (wv[i].ln() - wv[j].ln()) / (wv[i] - wv[j])
            };
            (rr[(i, j)] * l - ss[(i, j)]) * (wv[i] * wv[j]).sqrt()
        });
        let xi = HermitianMatrix::symmetrized(xi);
        let norm = xi.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (xi, norm)
    };
    let diag = |v: &mut dyn Iterator<Item = f64>| {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, v.map(|x| num_complex::Complex64::new(x, 0.0))))
    };

    let (mut wv, mut u) = HermitianMatrix::identity(n).eigh();
    let mut f = objective(&wv, &u);
    let (mut xi, mut grad_norm) = gradient(&wv, &u);
    let mut step = 1.0;
    for it in 0..MEASURED_MAX_ITER {
        if grad_norm <= MEASURED_STATIONARITY {
            return Ok(MeasuredState {
                value: DivergenceValue::Finite(f),
                status: SolveStatus::Optimal,
                iterations: it,
                stationarity: grad_norm,
            });
        }
        let sqrt_w = diag(&mut wv.iter().map(|x| x.sqrt()));
        let (xe, xv) = xi.eigh();
        step *= 2.0;
        loop {
            let inner = &xv * diag(&mut xe.iter().map(|e| (step * e).exp())) * xv.adjoint();
            let cand = HermitianMatrix::symmetrized(&u * &sqrt_w * inner * &sqrt_w * u.adjoint());
            let (cw, cu) = cand.eigh();
            if cw[0] > 0.0 {
                let fc = objective(&cw, &cu);
                let armijo = fc >= f + 1e-4 * step * grad_norm * grad_norm;
                // near the optimum the Armijo gain drops below rounding in f;
                // a smaller gradient with f unchanged to rounding is accepted then
                let flat = fc >= f - 1e-14 * f.abs().max(1.0);
                let (cxi, cnorm) = if armijo || flat { gradient(&cw, &cu) } else { (xi.clone(), f64::INFINITY) };
                if armijo || (flat && cnorm < grad_norm) {
                    wv = cw;
                    u = cu;
                    f = fc.max(f);
                    xi = cxi;
                    grad_norm = cnorm;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-20 {
                return Ok(MeasuredState {
                    value: DivergenceValue::Finite(f),
                    status: SolveStatus::NearOptimal,
                    iterations: it,
                    stationarity: grad_norm,
                });
            }
        }
    }
    Ok(MeasuredState {
        value: DivergenceValue::Finite(f),
        status: SolveStatus::NumericalFailure,
        iterations: MEASURED_MAX_ITER,
        stationarity: grad_norm,
    })
}

// ---------------------------------------------------------------------------
// dispatch

/// Discretization parameters for the SDP methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpParams {
    pub m: usize,
    pub k: u32,
    pub r: usize,
    pub ell: u32,
}

impl Default for SdpParams {
    fn default() -> Self {
        Self { m: 3, k: 3, r: 13, ell: 8 }
    }
}

pub fn channel_divergence(
    method: Method,
    jn: &ChoiMatrix,
    jm: &ChoiMatrix,
    budget: &EnergyBudget,
    sdp: SdpParams,
    opts: &SolveOptions,
) -> Result<DivergenceResult> {
    match method {
        Method::MeasuredRe => ec_measured_re_channel(jn, jm, budget, sdp.m, sdp.k, opts),
        Method::ReLower => ec_channel_re_lower(jn, jm, budget, sdp.r, opts),
        Method::ReUpper => ec_channel_re_upper(jn, jm, budget, sdp.r, opts),
        Method::BsClosedForm => ec_bs_channel(jn, jm, budget, opts),
        Method::GrdDirect => ec_grd_channel(jn, jm, budget, GrdSchedule::new(sdp.ell)?, opts),
        Method::GrdSdp => grd_sdp_energy_primal(jn, jm, budget, sdp.ell, opts),
    }
}
