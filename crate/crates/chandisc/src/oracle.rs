//! Slow reference implementations used to cross-check the fast paths.
//! Every maximizing oracle here returns a value attained by a feasible point,
//! so it can only undershoot the true optimum.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::channels::ChoiMatrix;
use crate::error::{Error, Result};
use crate::hilbert::{BipartiteIndex, CMat, HermitianMatrix};

/// Seeded source of random states, PD matrices, unitaries and parameters.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub dim: usize,
    rng: ChaCha8Rng,
}

impl RandomInstance {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn gaussian(&mut self, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            let re: f64 = self.rng.sample(StandardNormal);
            let im: f64 = self.rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
    }

    /// Haar unitary: QR of a Ginibre matrix with the phases of `R` fixed.
    pub fn unitary(&mut self, dim: usize) -> CMat {
        let qr = self.gaussian(dim, dim).qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..dim {
            let d = r[(j, j)];
            let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
            for i in 0..dim {
                q[(i, j)] *= ph;
            }
        }
        q
    }

    /// Spectrum drawn uniformly from the simplex.
    pub fn spectrum(&mut self, dim: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..dim).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    /// Full-rank density matrix of dimension `self.dim`.
    pub fn state(&mut self) -> HermitianMatrix {
        self.state_of_dim(self.dim)
    }

    pub fn state_of_dim(&mut self, dim: usize) -> HermitianMatrix {
        let p = self.spectrum(dim);
        self.with_spectrum(&p)
    }

    pub fn with_spectrum(&mut self, p: &[f64]) -> HermitianMatrix {
        let u = self.unitary(p.len());
        let d = CMat::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| Complex64::new(x, 0.0))));
        HermitianMatrix::symmetrized(&u * d * u.adjoint())
    }

    /// Positive definite matrix with eigenvalues in `[0.05, 2.05)`, not normalized.
    pub fn pd_matrix(&mut self, dim: usize) -> HermitianMatrix {
        let p: Vec<f64> = (0..dim).map(|_| 0.05 + 2.0 * self.rng.gen::<f64>()).collect();
        self.with_spectrum(&p)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}

/// Exhaustive search over spectra on the grid `{k / resolution}` with
/// `sum_n h_n p_n <= budget`, `h_n = n`.
pub fn grid_probe_maximize(
    objective: impl Fn(&[f64]) -> f64,
    budget: f64,
    cutoff: usize,
    resolution: usize,
) -> Result<(f64, Vec<f64>)> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let d = cutoff + 1;
    let mut counts = vec![0usize; d];
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    // energy bound in grid units, with slack for rounding
    let cap = budget * resolution as f64 + 1e-9;
    fn rec(
        n: usize,
        left: usize,
        energy: f64,
        cap: f64,
        counts: &mut Vec<usize>,
        res: usize,
        f: &dyn Fn(&[f64]) -> f64,
        best: &mut (f64, Vec<f64>),
    ) {
        if n == 0 {
            counts[0] = left;
            let p: Vec<f64> = counts.iter().map(|&c| c as f64 / res as f64).collect();
            let v = f(&p);
            if v > best.0 {
                *best = (v, p);
            }
            return;
        }
        for c in 0..=left {
            let e = energy + (n * c) as f64;
            if e > cap {
                break;
            }
            counts[n] = c;
            rec(n - 1, left - c, e, cap, counts, res, f, best);
        }
        counts[n] = 0;
    }
    rec(d - 1, resolution, 0.0, cap, &mut counts, resolution, &objective, &mut best);
    Ok(best)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        s += a * (a / b).ln();
    }
    s
}

fn outcome(u: &CMat, m: &HermitianMatrix) -> Vec<f64> {
    (0..u.ncols())
        .map(|j| {
            let col = u.column(j);
            (col.adjoint() * m.matrix() * col)[(0, 0)].re.max(0.0)
        })
        .collect()
}

/// Best classical KL over the eigenbases of both states and
/// `basis_samples` Haar-random orthonormal bases.
pub fn measurement_bruteforce_mre(
    rho: &HermitianMatrix,
    sigma: &HermitianMatrix,
    basis_samples: usize,
    rng: &mut RandomInstance,
) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidDimension(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    let d = rho.dim();
    let mut best = 0.0f64;
    let mut try_basis = |u: &CMat| {
        let v = kl(&outcome(u, rho), &outcome(u, sigma));
        if v > best {
            best = v;
        }
    };
    try_basis(&rho.eigh().1);
    try_basis(&sigma.eigh().1);
    for _ in 0..basis_samples {
        let u = rng.unitary(d);
        try_basis(&u);
    }
    Ok(best)
}

/// Channel action from the Choi operator on an `R (x) A` input:
/// `N(rho)[(r,b),(r',b')] = sum_{a,a'} rho[(r,a),(r',a')] J[(a,b),(a',b')]`.
pub fn choi_contraction_apply(choi: &ChoiMatrix, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    let da = choi.idx.dim_r;
    let db = choi.idx.dim_b;
    if !rho.dim().is_multiple_of(da) {
        return Err(Error::InvalidDimension(format!("input dim {} not a multiple of {da}", rho.dim())));
    }
    let dr = rho.dim() / da;
    let inp = BipartiteIndex::new(dr, da)?;
    let out = BipartiteIndex::new(dr, db)?;
    let j = choi.matrix.matrix();
    let x = rho.matrix();
    let mut m = CMat::zeros(out.dim(), out.dim());
    for r in 0..dr {
        for rp in 0..dr {
            for a in 0..da {
                for ap in 0..da {
                    let w = x[(inp.flat(r, a), inp.flat(rp, ap))];
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for b in 0..db {
                        for bp in 0..db {
                            m[(out.flat(r, b), out.flat(rp, bp))] += w * j[(choi.idx.flat(a, b), choi.idx.flat(ap, bp))];
                        }
                    }
                }
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_reproduce() {
        let a = RandomInstance::new(7, 3).state();
        let b = RandomInstance::new(7, 3).state();
        assert_eq!(a, b);
        assert!((a.trace() - 1.0).abs() < 1e-12);
        assert!(a.min_eigenvalue() > 0.0);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = RandomInstance::new(1, 4).unitary(4);
        let e = (u.adjoint() * &u - CMat::identity(4, 4)).norm();
        assert!(e < 1e-12);
    }

    #[test]
    fn constant_objective() {
        let (v, p) = grid_probe_maximize(|_| 2.5, 0.5, 3, 10).unwrap();
        assert_eq!(v, 2.5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slack_energy_picks_largest_entry() {
        let c = [0.1, 0.7, 0.3];
        let (v, _) = grid_probe_maximize(|p| p.iter().zip(&c).map(|(a, b)| a * b).sum(), 5.0, 2, 20).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn equal_states_measure_zero() {
        let mut g = RandomInstance::new(3, 3);
        let r = g.state();
        assert!(measurement_bruteforce_mre(&r, &r, 50, &mut g).unwrap().abs() < 1e-12);
    }
}
