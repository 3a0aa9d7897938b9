//! Solver-agnostic SDP model builder.
//!
//! A program is a set of real scalar decision variables, linear matrix
//! inequalities over affine matrix expressions, affine equalities, scalar
//! non-negativity constraints and a linear objective. Complex Hermitian
//! inequalities are lowered to real ones through `[[Re, -Im], [Im, Re]]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{BipartiteIndex, CMat, HermitianMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Affine function of the scalar variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: f64) -> Self {
        Self { terms: Vec::new(), constant: v }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|&(i, v)| (i, v * s)).collect(), constant: self.constant * s }
    }

    pub fn add(&self, o: &Affine) -> Self {
        self.axpy(1.0, o)
    }

    pub fn sub(&self, o: &Affine) -> Self {
        self.axpy(-1.0, o)
    }

    /// `self + s * o`
    pub fn axpy(&self, s: f64, o: &Affine) -> Self {
        if s == 0.0 || o.is_zero() {
            return self.clone();
        }
        let mut terms = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < o.terms.len() {
            let a = self.terms.get(i);
            let b = o.terms.get(j);
            match (a, b) {
                (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                    let v = va + s * vb;
                    if v != 0.0 {
                        terms.push((ia, v));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    terms.push((ia, va));
                    i += 1;
                }
                (Some(&(ia, va)), None) => {
                    terms.push((ia, va));
                    i += 1;
                }
                (_, Some(&(ib, vb))) => {
                    terms.push((ib, s * vb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Self { terms, constant: self.constant + s * o.constant }
    }

    pub fn add_const(&self, v: f64) -> Self {
        Self { terms: self.terms.clone(), constant: self.constant + v }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, v)| v * x[i]).sum::<f64>()
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Affine>) -> Affine {
        items.into_iter().fold(Affine::zero(), |acc, a| acc.add(a))
    }
}

/// Complex affine entry `re + i im`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CAffine {
    pub re: Affine,
    pub im: Affine,
}

impl CAffine {
    pub fn real(re: Affine) -> Self {
        Self { re, im: Affine::zero() }
    }

    fn constant(z: Complex64) -> Self {
        Self { re: Affine::constant(z.re), im: Affine::constant(z.im) }
    }

    fn add(&self, o: &CAffine) -> Self {
        Self { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    fn scale(&self, s: f64) -> Self {
        Self { re: self.re.scale(s), im: self.im.scale(s) }
    }

    /// `self + z * o`
    fn axpy(&self, z: Complex64, o: &CAffine) -> Self {
        Self {
            re: self.re.axpy(z.re, &o.re).axpy(-z.im, &o.im),
            im: self.im.axpy(z.re, &o.im).axpy(z.im, &o.re),
        }
    }

    fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scale(-1.0) }
    }


    fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Square matrix of affine entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    n: usize,
    e: Vec<CAffine>,
}

impl MatExpr {
    pub fn zeros(n: usize) -> Self {
        Self { n, e: vec![CAffine::default(); n * n] }
    }

    pub fn constant(m: &CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        Self { n, e: (0..n * n).map(|k| CAffine::constant(m[(k / n, k % n)])).collect() }
    }

    pub fn from_hermitian(h: &HermitianMatrix) -> Self {
        Self::constant(h.matrix())
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![Affine::constant(1.0); n])
    }

    pub fn diag(d: &[Affine]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, a) in d.iter().enumerate() {
            m.e[i * n + i] = CAffine::real(a.clone());
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> CAffine) -> Self {
        Self { n, e: (0..n * n).map(|k| f(k / n, k % n)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &CAffine {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: CAffine) {
        self.e[i * self.n + j] = v;
    }

    pub fn is_real(&self) -> bool {
        self.e.iter().all(|z| z.im.is_zero())
    }

    fn check_same(&self, o: &MatExpr) -> Result<()> {
        if self.n != o.n {
            return Err(Error::ModelConstruction(format!("dimension {} vs {}", self.n, o.n)));
        }
        Ok(())
    }

    pub fn add(&self, o: &MatExpr) -> Result<Self> {
        self.check_same(o)?;
        Ok(Self { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a.add(b)).collect() })
    }

    pub fn sub(&self, o: &MatExpr) -> Result<Self> {
        self.check_same(o)?;
        Ok(Self { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a.axpy(Complex64::new(-1.0, 0.0), b)).collect() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, e: self.e.iter().map(|a| a.scale(s)).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.at(j, i).conj())
    }

    /// `self + s * (constant matrix)`
    pub fn add_constant(&self, m: &CMat, s: f64) -> Result<Self> {
        self.add(&MatExpr::constant(m).scale(s))
    }

    /// `a * self` for a constant matrix `a`.
    pub fn left_mul(&self, a: &CMat) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let z = a[(i, k)];
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let cur = &out.e[i * n + j];
                    out.e[i * n + j] = cur.axpy(z, &self.e[k * n + j]);
                }
            }
        }
        out
    }

    /// `s * self * s^dagger` for a constant `m x n` matrix `s`.
    pub fn congruence(&self, s: &CMat) -> Result<Self> {
        let (m, n) = (s.nrows(), s.ncols());
        if n != self.n {
            return Err(Error::ModelConstruction(format!("congruence by {m}x{n} on dim {}", self.n)));
        }
        let mut t = vec![CAffine::default(); m * n];
        for i in 0..m {
            for k in 0..n {
                let z = s[(i, k)];
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    t[i * n + j] = t[i * n + j].axpy(z, &self.e[k * n + j]);
                }
            }
        }
        let mut out = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = CAffine::default();
                for k in 0..n {
                    let z = s[(j, k)].conj();
                    if z != Complex64::new(0.0, 0.0) {
                        acc = acc.axpy(z, &t[i * n + k]);
                    }
                }
                out.e[i * m + j] = acc;
            }
        }
        Ok(out)
    }

    /// `self (x) I_d`
    pub fn kron_identity(&self, d: usize) -> Self {
        let n = self.n * d;
        let mut out = Self::zeros(n);
        for r in 0..self.n {
            for s in 0..self.n {
                for b in 0..d {
                    out.e[(r * d + b) * n + s * d + b] = self.at(r, s).clone();
                }
            }
        }
        out
    }

    pub fn partial_trace_b(&self, idx: BipartiteIndex) -> Result<Self> {
        if idx.dim() != self.n {
            return Err(Error::ModelConstruction(format!("partial trace of dim {} over {:?}", self.n, idx)));
        }
        Ok(Self::from_fn(idx.dim_r, |r, s| {
            (0..idx.dim_b).fold(CAffine::default(), |acc, b| acc.add(self.at(idx.flat(r, b), idx.flat(s, b))))
        }))
    }

    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self.at(idx[i], idx[j]).clone())
    }

    pub fn diagonal(&self) -> Vec<Affine> {
        (0..self.n).map(|i| self.at(i, i).re.clone()).collect()
    }

    pub fn trace(&self) -> Affine {
        Affine::sum((0..self.n).map(|i| &self.at(i, i).re))
    }

    /// `Re Tr[c · self]`
    pub fn inner(&self, c: &HermitianMatrix) -> Affine {
        let cm = c.matrix();
        let mut acc = Affine::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let z = cm[(j, i)];
                let e = self.at(i, j);
                if z.re != 0.0 {
                    acc = acc.axpy(z.re, &e.re);
                }
                if z.im != 0.0 {
                    acc = acc.axpy(-z.im, &e.im);
                }
            }
        }
        acc
    }

    /// `[[a, b], [b†, c]]`
    pub fn block2(a: &MatExpr, b: &MatExpr, c: &MatExpr) -> Result<Self> {
        if a.n != b.n || b.n != c.n {
            return Err(Error::ModelConstruction(format!("block dims {}, {}, {}", a.n, b.n, c.n)));
        }
        let n = a.n;
        let bd = b.adjoint();
        Ok(Self::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, true) => a.at(i, j).clone(),
            (true, false) => b.at(i, j - n).clone(),
            (false, true) => bd.at(i - n, j).clone(),
            (false, false) => c.at(i - n, j - n).clone(),
        }))
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.at(i, j).eval(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric,
    Hermitian,
    General { complex: bool },
}

#[derive(Debug, Clone)]
struct VarBlock {
    name: String,
    expr: MatExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintHandle(pub usize);

#[derive(Debug, Clone)]
enum Constraint {
    Eq(Affine),
    Nonneg(Affine),
    Psd(MatExpr),
}

#[derive(Debug, Clone)]
pub struct ConicProgram {
    names: Vec<String>,
    blocks: Vec<VarBlock>,
    constraints: Vec<Constraint>,
    objective: Affine,
    sense: Sense,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            blocks: Vec::new(),
            constraints: Vec::new(),
            objective: Affine::zero(),
            sense: Sense::Minimize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn fresh(&mut self, name: String) -> Affine {
        self.names.push(name);
        Affine::var(self.names.len() - 1)
    }

    pub fn scalar(&mut self, name: &str) -> Affine {
        let v = self.fresh(name.to_string());
        self.blocks.push(VarBlock { name: name.to_string(), expr: MatExpr::diag(std::slice::from_ref(&v)) });
        v
    }

    pub fn nonneg_scalar(&mut self, name: &str) -> Affine {
        let v = self.scalar(name);
        self.nonneg(v.clone());
        v
    }

    pub fn matrix(&mut self, name: &str, dim: usize, kind: VarKind) -> MatExpr {
        let mut m = MatExpr::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let entry = match kind {
                    VarKind::Symmetric | VarKind::Hermitian if j < i => continue,
                    VarKind::Symmetric => CAffine::real(self.fresh(format!("{name}[{i},{j}]"))),
                    VarKind::Hermitian => {
                        let re = self.fresh(format!("{name}.re[{i},{j}]"));
                        let im = if i == j { Affine::zero() } else { self.fresh(format!("{name}.im[{i},{j}]")) };
                        CAffine { re, im }
                    }
                    VarKind::General { complex } => {
                        let re = self.fresh(format!("{name}.re[{i},{j}]"));
                        let im = if complex { self.fresh(format!("{name}.im[{i},{j}]")) } else { Affine::zero() };
                        CAffine { re, im }
                    }
                };
                if matches!(kind, VarKind::Symmetric | VarKind::Hermitian) && i != j {
                    m.set(j, i, entry.conj());
                }
                m.set(i, j, entry);
            }
        }
        self.blocks.push(VarBlock { name: name.to_string(), expr: m.clone() });
        m
    }

    /// Symmetric (real) or Hermitian (complex) matrix variable constrained PSD.
    pub fn psd_matrix(&mut self, name: &str, dim: usize, complex: bool) -> MatExpr {
        let kind = if complex { VarKind::Hermitian } else { VarKind::Symmetric };
        let m = self.matrix(name, dim, kind);
        self.psd(m.clone()).expect("square by construction");
        m
    }

    fn push(&mut self, c: Constraint) -> ConstraintHandle {
        self.constraints.push(c);
        ConstraintHandle(self.constraints.len() - 1)
    }

    pub fn eq(&mut self, a: Affine) -> ConstraintHandle {
        self.push(Constraint::Eq(a))
    }

    /// Entrywise `a == b` on the upper triangle (both expressions Hermitian).
    pub fn eq_hermitian(&mut self, a: &MatExpr, b: &MatExpr) -> Result<()> {
        let d = a.sub(b)?;
        for i in 0..d.n {
            for j in i..d.n {
                let z = d.at(i, j);
                if !z.re.is_zero() {
                    self.eq(z.re.clone());
                }
                if i != j && !z.im.is_zero() {
                    self.eq(z.im.clone());
                }
            }
        }
        Ok(())
    }

    pub fn nonneg(&mut self, a: Affine) -> ConstraintHandle {
        self.push(Constraint::Nonneg(a))
    }

    /// `a <= b`
    pub fn le(&mut self, a: &Affine, b: &Affine) -> ConstraintHandle {
        self.nonneg(b.sub(a))
    }

    pub fn psd(&mut self, m: MatExpr) -> Result<ConstraintHandle> {
        if m.n == 0 {
            return Err(Error::ModelConstruction("empty PSD block".into()));
        }
        Ok(self.push(Constraint::Psd(m)))
    }

    /// Registers `[[a, b], [b†, c]] >= 0`.
    pub fn add_psd_block_2x2(&mut self, a: &MatExpr, b: &MatExpr, c: &MatExpr) -> Result<ConstraintHandle> {
        let m = MatExpr::block2(a, b, c)?;
        self.psd(m)
    }

    pub fn maximize(&mut self, obj: Affine) {
        self.objective = obj;
        self.sense = Sense::Maximize;
    }

    pub fn minimize(&mut self, obj: Affine) {
        self.objective = obj;
        self.sense = Sense::Minimize;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    /// Lowers to `min q'x  s.t.  b - A x in K`.
    pub fn standard_form(&self) -> StandardForm {
        let n = self.num_vars();
        let sign = if self.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let mut q = vec![0.0; n];
        for &(i, v) in self.objective.terms() {
            q[i] += sign * v;
        }
        let mut sf = StandardForm {
            n,
            q,
            objective_constant: self.objective.constant,
            objective_sign: sign,
            rows: 0,
            a_i: Vec::new(),
            a_j: Vec::new(),
            a_v: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        };
        for c in &self.constraints {
            match c {
                Constraint::Eq(a) => {
                    sf.push_row(a);
                    sf.push_cone(Cone::Zero(1));
                }
                Constraint::Nonneg(a) => {
                    sf.push_row(a);
                    sf.push_cone(Cone::Nonneg(1));
                }
                Constraint::Psd(m) => {
                    let real = if m.is_real() { real_part(m) } else { embed(m) };
                    let k = real.len();
                    for j in 0..k {
                        for i in 0..=j {
                            let v = if i == j {
                                real[i][i].clone()
                            } else {
                                real[i][j].add(&real[j][i]).scale(std::f64::consts::FRAC_1_SQRT_2)
                            };
                            sf.push_row(&v);
                        }
                    }
                    sf.push_cone(Cone::Psd(k));
                }
            }
        }
        sf
    }

    fn value_map(&self, x: &[f64]) -> BTreeMap<String, CMat> {
        self.blocks.iter().map(|b| (b.name.clone(), b.expr.eval(x))).collect()
    }

    /// Re-checks a candidate point against every constraint.
    pub fn audit(&self, x: &[f64]) -> Audit {
        let mut a = Audit { max_equality_residual: 0.0, max_nonneg_violation: 0.0, min_psd_eigenvalue: f64::INFINITY };
        for c in &self.constraints {
            match c {
                Constraint::Eq(e) => a.max_equality_residual = a.max_equality_residual.max(e.eval(x).abs()),
                Constraint::Nonneg(e) => a.max_nonneg_violation = a.max_nonneg_violation.max(-e.eval(x)),
                Constraint::Psd(m) => {
                    let h = HermitianMatrix::symmetrized(m.eval(x));
                    a.min_psd_eigenvalue = a.min_psd_eigenvalue.min(h.min_eigenvalue());
                }
            }
        }
        a
    }

    /// SDPA sparse text: `min c'x s.t. sum_i F_i x_i - F_0 >= 0`. Equalities
    /// become pairs of diagonal entries.
    pub fn to_sdpa(&self) -> String {
        let sf = self.standard_form();
        // group rows back into blocks; diagonal block collects scalar cones
        let mut psd_blocks: Vec<(usize, usize)> = Vec::new();
        let mut lp_rows: Vec<(usize, f64)> = Vec::new();
        let mut row = 0;
        for cone in &sf.cones {
            match *cone {
                Cone::Zero(k) => {
                    for r in row..row + k {
                        lp_rows.push((r, 1.0));
                        lp_rows.push((r, -1.0));
                    }
                    row += k;
                }
                Cone::Nonneg(k) => {
                    for r in row..row + k {
                        lp_rows.push((r, 1.0));
                    }
                    row += k;
                }
                Cone::Psd(k) => {
                    psd_blocks.push((row, k));
                    row += k * (k + 1) / 2;
                }
            }
        }
        // column-wise view of A
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sf.rows];
        for ((&i, &j), &v) in sf.a_i.iter().zip(&sf.a_j).zip(&sf.a_v) {
            by_row[i].push((j, v));
        }
        let mut out = String::new();
        let _ = writeln!(out, "\"chandisc conic program: {} vars, {} constraints\"", sf.n, self.constraints.len());
        let _ = writeln!(out, "{}", sf.n);
        let nblocks = psd_blocks.len() + usize::from(!lp_rows.is_empty());
        let _ = writeln!(out, "{}", nblocks);
        let mut sizes: Vec<String> = psd_blocks.iter().map(|&(_, k)| k.to_string()).collect();
        if !lp_rows.is_empty() {
            sizes.push(format!("-{}", lp_rows.len()));
        }
        let _ = writeln!(out, "{}", sizes.join(" "));
        let c: Vec<String> = sf.q.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", c.join(" "));
        // slack s = b - A x; F_0 = -b, F_i = -A[:, i]
        let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        for (bi, &(start, k)) in psd_blocks.iter().enumerate() {
            let mut r = start;
            for j in 0..k {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                    if sf.b[r] != 0.0 {
                        entries.push((0, bi + 1, i + 1, j + 1, -sf.b[r] * scale));
                    }
                    for &(var, v) in &by_row[r] {
                        entries.push((var + 1, bi + 1, i + 1, j + 1, -v * scale));
                    }
                    r += 1;
                }
            }
        }
        let lp_block = psd_blocks.len() + 1;
        for (pos, &(r, s)) in lp_rows.iter().enumerate() {
            if sf.b[r] != 0.0 {
                entries.push((0, lp_block, pos + 1, pos + 1, -s * sf.b[r]));
            }
            for &(var, v) in &by_row[r] {
                entries.push((var + 1, lp_block, pos + 1, pos + 1, -s * v));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1, a.2, a.3));
        for (m, blk, i, j, v) in entries {
            let _ = writeln!(out, "{m} {blk} {i} {j} {v:.17e}");
        }
        out
    }

    pub fn write_sdpa(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_sdpa().as_bytes()).map_err(|e| Error::Backend(e.to_string()))
    }

    pub fn solve(&self, tol: f64) -> Result<Solution> {
        ClarabelBackend::default().solve(self, tol)
    }

    pub fn solve_with(&self, solver: &dyn ConicSolver, tol: f64) -> Result<Solution> {
        solver.solve(self, tol)
    }

    /// Assembles a `Solution` from a raw primal point.
    pub fn solution_from(&self, status: SolveStatus, x: Vec<f64>, solver_gap: f64, iterations: u32) -> Solution {
        Solution {
            status,
            objective_value: self.objective.eval(&x),
            variable_values: self.value_map(&x),
            solver_gap,
            iterations,
            x,
        }
    }
}

fn real_part(m: &MatExpr) -> Vec<Vec<Affine>> {
    (0..m.n).map(|i| (0..m.n).map(|j| m.at(i, j).re.clone()).collect()).collect()
}

fn embed(m: &MatExpr) -> Vec<Vec<Affine>> {
    let n = m.n;
    (0..2 * n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    let z = m.at(i % n, j % n);
                    match (i < n, j < n) {
                        (true, true) | (false, false) => z.re.clone(),
                        (true, false) => z.im.scale(-1.0),
                        (false, true) => z.im.clone(),
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// Real symmetric PSD cone of the given side length, stored as a scaled triangle.
    Psd(usize),
}

#[derive(Debug, Clone)]
pub struct StandardForm {
    pub n: usize,
    pub q: Vec<f64>,
    pub objective_constant: f64,
    /// `-1` when the original program maximizes.
    pub objective_sign: f64,
    pub rows: usize,
    pub a_i: Vec<usize>,
    pub a_j: Vec<usize>,
    pub a_v: Vec<f64>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl StandardForm {
    fn push_row(&mut self, a: &Affine) {
        for &(j, v) in a.terms() {
            self.a_i.push(self.rows);
            self.a_j.push(j);
            self.a_v.push(-v);
        }
        self.b.push(a.constant);
        self.rows += 1;
    }

    fn push_cone(&mut self, c: Cone) {
        match (self.cones.last_mut(), c) {
            (Some(Cone::Zero(k)), Cone::Zero(m)) => *k += m,
            (Some(Cone::Nonneg(k)), Cone::Nonneg(m)) => *k += m,
            _ => self.cones.push(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub variable_values: BTreeMap<String, CMat>,
    pub solver_gap: f64,
    pub iterations: u32,
    pub x: Vec<f64>,
}

impl Solution {
    pub fn value(&self, a: &Affine) -> f64 {
        a.eval(&self.x)
    }

    pub fn matrix(&self, m: &MatExpr) -> CMat {
        m.eval(&self.x)
    }

    pub fn hermitian(&self, m: &MatExpr) -> HermitianMatrix {
        HermitianMatrix::symmetrized(m.eval(&self.x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    pub max_equality_residual: f64,
    pub max_nonneg_violation: f64,
    pub min_psd_eigenvalue: f64,
}

impl Audit {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_equality_residual <= tol && self.max_nonneg_violation <= tol && self.min_psd_eigenvalue >= -tol
    }
}

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, p: &ConicProgram, tol: f64) -> Result<Solution>;
}

/// Interior-point backend.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 400 }
    }
}

impl ConicSolver for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, p: &ConicProgram, tol: f64) -> Result<Solution> {
        let sf = p.standard_form();
        let pmat = CscMatrix::<f64>::zeros((sf.n, sf.n));
        let amat = CscMatrix::new_from_triplets(sf.rows, sf.n, sf.a_i.clone(), sf.a_j.clone(), sf.a_v.clone());
        let cones: Vec<SupportedConeT<f64>> = sf
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => ZeroConeT(k),
                Cone::Nonneg(k) => NonnegativeConeT(k),
                Cone::Psd(k) => PSDTriangleConeT(k),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .presolve_enable(false)
            .build()
            .map_err(|e| Error::Backend(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&pmat, &sf.q, &amat, &sf.b, &cones, settings)
            .map_err(|e| Error::Backend(format!("setup: {e:?}")))?;
        solver.solve();
        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        let info = &solver.info;
        Ok(p.solution_from(status, solver.solution.x.clone(), info.gap_abs, info.iterations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::c;

    fn solve(p: &ConicProgram) -> Solution {
        let s = p.solve(DEFAULT_TOL).unwrap();
        assert!(p.audit(&s.x).is_feasible(1e-6), "{:?}", p.audit(&s.x));
        s
    }

    #[test]
    fn affine_merge() {
        let a = Affine::var(0).add(&Affine::var(2).scale(3.0)).add_const(1.0);
        let b = Affine::var(1).sub(&Affine::var(2).scale(3.0));
        let s = a.add(&b);
        assert_eq!(s.terms(), &[(0, 1.0), (1, 1.0)]);
        assert_eq!(s.eval(&[2.0, 5.0, 7.0]), 8.0);
    }

    #[test]
    fn max_eigenvalue_program() {
        let mut p = ConicProgram::new();
        let rho = p.psd_matrix("rho", 2, false);
        p.eq(rho.trace().add_const(-1.0));
        p.maximize(rho.inner(&HermitianMatrix::from_diagonal(&[1.0, 2.0]).unwrap()));
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-7);
        let r = &s.variable_values["rho"];
        assert!((r[(1, 1)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn energy_constraint_active() {
        let h = HermitianMatrix::from_diagonal(&[0.0, 1.0, 2.0]).unwrap();
        let mut p = ConicProgram::new();
        let rho = p.psd_matrix("rho", 3, true);
        p.eq(rho.trace().add_const(-1.0));
        p.le(&rho.inner(&h), &Affine::constant(0.5));
        p.maximize(rho.inner(&h));
        let s = solve(&p);
        assert!((s.objective_value - 0.5).abs() < 1e-7);
    }

    #[test]
    fn block_feasibility() {
        let i = MatExpr::identity(2);
        let z = MatExpr::zeros(2);
        let mut p = ConicProgram::new();
        let t = p.scalar("t");
        p.add_psd_block_2x2(&i, &z, &i).unwrap();
        p.le(&t, &Affine::constant(1.0));
        p.maximize(t.clone());
        assert_eq!(solve(&p).status, SolveStatus::Optimal);

        let mut p = ConicProgram::new();
        let t = p.scalar("t");
        p.add_psd_block_2x2(&i, &i.scale(2.0), &i).unwrap();
        p.le(&t, &Affine::constant(1.0));
        p.maximize(t);
        assert_eq!(p.solve(DEFAULT_TOL).unwrap().status, SolveStatus::Infeasible);
        assert!(p.add_psd_block_2x2(&i, &MatExpr::zeros(3), &i).is_err());
    }

    #[test]
    fn complex_embedding_roundtrip() {
        // max Re Tr[C rho] with C Hermitian complex has value lambda_max(C)
        let cm = CMat::from_row_slice(2, 2, &[c(1.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), c(1.0)]);
        let ch = HermitianMatrix::new(cm).unwrap();
        let mut p = ConicProgram::new();
        let rho = p.psd_matrix("rho", 2, true);
        p.eq(rho.trace().add_const(-1.0));
        p.maximize(rho.inner(&ch));
        let s = solve(&p);
        assert!((s.objective_value - 2.0).abs() < 1e-7);
        let r = s.hermitian(&rho);
        assert!((r.inner(&ch) - 2.0).abs() < 1e-6);
        assert!(r.get(0, 1).im.abs() > 0.4);
    }

    #[test]
    fn geometric_mean_cascade() {
        // max Tr[G]  s.t. [[A, G], [G, B]] >= 0  gives Tr G_{1/2}(A, B)
        let a = HermitianMatrix::from_real(&nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let b = HermitianMatrix::from_real(&nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0])).unwrap();
        let mut p = ConicProgram::new();
        let g = p.matrix("g", 2, VarKind::Symmetric);
        p.add_psd_block_2x2(&MatExpr::from_hermitian(&a), &g, &MatExpr::from_hermitian(&b)).unwrap();
        p.maximize(g.trace());
        let s = solve(&p);
        let want = crate::matfunc::weighted_geometric_mean(&a, &b, 0.5).unwrap();
        assert!(s.hermitian(&g).max_abs_diff(&want) < 1e-6);
    }

    #[test]
    fn deterministic_resolve() {
        let mut p = ConicProgram::new();
        let rho = p.psd_matrix("rho", 3, false);
        p.eq(rho.trace().add_const(-1.0));
        p.maximize(rho.inner(&HermitianMatrix::from_diagonal(&[0.3, 0.1, 0.7]).unwrap()));
        let a = p.solve(DEFAULT_TOL).unwrap().objective_value;
        let b = p.solve(DEFAULT_TOL).unwrap().objective_value;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn kron_and_partial_trace() {
        let mut p = ConicProgram::new();
        let r = p.matrix("r", 2, VarKind::Hermitian);
        let x = r.kron_identity(3);
        let back = x.partial_trace_b(BipartiteIndex::new(2, 3).unwrap()).unwrap();
        assert_eq!(back, r.scale(3.0));
    }

    #[test]
    fn sdpa_text_layout() {
        let mut p = ConicProgram::new();
        let rho = p.psd_matrix("rho", 2, false);
        p.eq(rho.trace().add_const(-1.0));
        p.maximize(rho.inner(&HermitianMatrix::from_diagonal(&[1.0, 2.0]).unwrap()));
        let text = p.to_sdpa();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "3");
        assert_eq!(lines[2], "2");
        assert_eq!(lines[3], "2 -2");
        assert!(lines.iter().any(|l| l.starts_with("0 2 1 1")));
    }
}
