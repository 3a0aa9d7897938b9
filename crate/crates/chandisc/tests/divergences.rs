use chandisc::channels::{classical_kl_wrapped_normal, dephasing_choi, loss_choi, loss_dephasing_choi, ChoiMatrix};
use chandisc::conic::SolveStatus;
use chandisc::divergences::*;
use chandisc::hilbert::{EnergyBudget, HermitianMatrix};
use chandisc::oracle::RandomInstance;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn fin(r: &DivergenceResult) -> f64 {
    r.value.finite().unwrap_or_else(|| panic!("{:?} not finite: {:?}", r.method, r.value))
}

fn deph(g1: f64, g2: f64, n: usize) -> (ChoiMatrix, ChoiMatrix) {
    (dephasing_choi(g1, n).unwrap(), dephasing_choi(g2, n).unwrap())
}

fn classical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

fn commuting_pair(seed: u64, d: usize) -> (HermitianMatrix, HermitianMatrix, Vec<f64>, Vec<f64>) {
    let mut g = RandomInstance::new(seed, d);
    let p = g.spectrum(d);
    let q = g.spectrum(d);
    let u = g.unitary(d);
    let mk = |s: &[f64]| {
        let dm = chandisc::hilbert::CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            s.iter().map(|&x| num_complex::Complex64::new(x, 0.0)),
        ));
        HermitianMatrix::new(&u * dm * u.adjoint()).unwrap()
    };
    (mk(&p), mk(&q), p, q)
}

// ----- state divergences

#[test]
fn state_divergences_vanish_on_equal_states() {
    let mut g = RandomInstance::new(11, 3);
    let r = g.state();
    assert!(state_umegaki(&r, &r).unwrap().as_f64().abs() < 1e-10);
    assert!(state_bs(&r, &r).unwrap().as_f64().abs() < 1e-10);
    for a in [1.5, 1.125, 2.0] {
        assert!(state_grd(&r, &r, a).unwrap().as_f64().abs() < 1e-10);
    }
    let m = state_measured_re(&r, &r).unwrap();
    assert!(m.value.as_f64().abs() < 1e-10);
    assert_eq!(m.status, SolveStatus::Optimal);
}

#[test]
fn classical_umegaki_is_ln2() {
    let r = HermitianMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
    let s = HermitianMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
    assert!((state_umegaki(&r, &s).unwrap().as_f64() - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn support_violation_is_infinite() {
    let r = HermitianMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
    let s = HermitianMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
    assert_eq!(state_umegaki(&r, &s).unwrap(), DivergenceValue::Infinite);
    assert_eq!(state_bs(&r, &s).unwrap(), DivergenceValue::Infinite);
    assert_eq!(state_grd(&r, &s, 1.5).unwrap(), DivergenceValue::Infinite);
    assert_eq!(state_measured_re(&r, &s).unwrap().value, DivergenceValue::Infinite);
}

#[test]
fn commuting_pairs_reduce_to_classical() {
    for seed in 0..10 {
        let (r, s, p, q) = commuting_pair(100 + seed, 3);
        let kl = classical_kl(&p, &q);
        assert!((state_umegaki(&r, &s).unwrap().as_f64() - kl).abs() < 1e-10);
        assert!((state_bs(&r, &s).unwrap().as_f64() - kl).abs() < 1e-9);
        let m = state_measured_re(&r, &s).unwrap();
        assert!((m.value.as_f64() - kl).abs() < 1e-7, "{:?} vs {kl}", m);
        let renyi2: f64 = p.iter().zip(&q).map(|(a, b)| a * a / b).sum::<f64>().ln();
        assert!((state_grd(&r, &s, 2.0).unwrap().as_f64() - renyi2).abs() < 1e-9);
    }
}

#[test]
fn state_hierarchy_on_random_pairs() {
    for seed in 0..20 {
        let d = 2 + seed as usize % 3;
        let mut g = RandomInstance::new(200 + seed, d);
        let r = g.state();
        let s = g.state();
        let um = state_umegaki(&r, &s).unwrap().as_f64();
        let bs = state_bs(&r, &s).unwrap().as_f64();
        let m = state_measured_re(&r, &s).unwrap();
        assert_eq!(m.status, SolveStatus::Optimal, "{m:?}");
        assert!(m.value.as_f64() <= um + 1e-7);
        assert!(um <= bs + 1e-7);
        let g10 = state_grd(&r, &s, 1.0 + 2f64.powi(-10)).unwrap().as_f64();
        let g14 = state_grd(&r, &s, 1.0 + 2f64.powi(-14)).unwrap().as_f64();
        // first-order convergence from above
        assert!(g14 - bs >= -1e-9 && g14 - bs <= (g10 - bs) / 8.0);
        // the first-order coefficient grows as sigma nears singularity
        if r.min_eigenvalue() >= 0.05 && s.min_eigenvalue() >= 0.05 {
            assert!((g10 - bs).abs() <= 1e-3, "seed {seed}: {}", g10 - bs);
        }
    }
}

#[test]
fn state_grd_increases_with_alpha() {
    let mut g = RandomInstance::new(300, 3);
    let r = g.state();
    let s = g.state();
    let vals: Vec<f64> = (1..=8).map(|l| state_grd(&r, &s, 1.0 + 2f64.powi(-l)).unwrap().as_f64()).collect();
    // alpha decreases along the list
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{vals:?}");
    }
}

#[test]
fn state_grd_rejects_alpha_outside_range() {
    let r = HermitianMatrix::identity(2).scale(0.5);
    assert!(state_grd(&r, &r, 1.0).is_err());
    assert!(state_grd(&r, &r, 2.5).is_err());
}

// ----- channel divergences

#[test]
fn every_method_vanishes_on_identical_channels() {
    let (jn, _) = deph(0.3, 0.3, 4);
    let b = EnergyBudget::new(5, 1.0).unwrap();
    for m in Method::ALL {
        let r = channel_divergence(m, &jn, &jn, &b, SdpParams::default(), &opts()).unwrap();
        assert!(fin(&r).abs() <= 1e-5, "{m}: {:?}", r.value);
    }
    let d = grd_sdp_dual_lower(&jn, &jn, &b, 3, &opts()).unwrap();
    assert!(fin(&d).abs() <= 1e-5);
    assert!(grd_sdp_unconstrained(&jn, &jn, 3, &opts()).unwrap().as_f64().abs() <= 1e-5);
}

#[test]
fn zero_energy_gives_zero_for_dephasing() {
    let (jn, jm) = deph(0.1, 0.4, 4);
    let b = EnergyBudget::new(5, 0.0).unwrap();
    assert!(fin(&ec_bs_channel(&jn, &jm, &b, &opts()).unwrap()).abs() < 1e-12);
    let g = ec_grd_channel(&jn, &jm, &b, GrdSchedule::new(4).unwrap(), &opts()).unwrap();
    assert!(fin(&g).abs() < 1e-12);
    assert_eq!(g.optimal_probe_spectrum.unwrap()[0], 1.0);
    assert!(fin(&grd_sdp_energy_primal(&jn, &jm, &b, 3, &opts()).unwrap()).abs() < 1e-6);
    // any positive energy admits full-rank probes, and the closed form jumps
    let tiny = EnergyBudget::new(5, 1e-9).unwrap();
    assert!(fin(&ec_bs_channel(&jn, &jm, &tiny, &opts()).unwrap()) > 0.1);
}

#[test]
fn full_and_fock_diagonal_agree() {
    let (jn, jm) = deph(0.1, 0.4, 8);
    let b = EnergyBudget::new(9, 1.0).unwrap();
    let full = opts().with_reduction(Reduction::Full);
    let diag = opts().with_reduction(Reduction::FockDiagonal);
    let s = GrdSchedule::new(8).unwrap();
    let a = fin(&ec_grd_channel(&jn, &jm, &b, s, &full).unwrap());
    let c = fin(&ec_grd_channel(&jn, &jm, &b, s, &diag).unwrap());
    assert!((a - c).abs() <= 1e-6, "{a} vs {c}");
    let a = fin(&ec_bs_channel(&jn, &jm, &b, &full).unwrap());
    let c = fin(&ec_bs_channel(&jn, &jm, &b, &diag).unwrap());
    assert!((a - c).abs() <= 1e-6, "{a} vs {c}");
}

#[test]
fn full_and_reduced_sdps_agree_at_small_cutoff() {
    let (jn, jm) = deph(0.1, 0.4, 2);
    let b = EnergyBudget::new(3, 0.7).unwrap();
    let full = opts().with_reduction(Reduction::Full);
    for m in [Method::MeasuredRe, Method::ReLower, Method::ReUpper, Method::GrdSdp] {
        let p = SdpParams { r: 6, ell: 3, ..SdpParams::default() };
        let a = fin(&channel_divergence(m, &jn, &jm, &b, p, &full).unwrap());
        let c = fin(&channel_divergence(m, &jn, &jm, &b, p, &opts()).unwrap());
        assert!((a - c).abs() <= 1e-6, "{m}: {a} vs {c}");
    }
}

#[test]
fn fock_diagonal_needs_covariance() {
    let mut g = RandomInstance::new(5, 4);
    let idx = chandisc::hilbert::BipartiteIndex::square(2).unwrap();
    let j = ChoiMatrix::new(g.state().scale(2.0), idx).unwrap();
    let b = EnergyBudget::new(2, 0.5).unwrap();
    let o = opts().with_reduction(Reduction::FockDiagonal);
    assert!(matches!(ec_bs_channel(&j, &j, &b, &o), Err(chandisc::Error::InvalidInput(_))));
    assert!(ec_bs_channel(&j, &j, &b, &opts()).is_ok());
}

#[test]
fn energy_monotonicity() {
    let (jn, jm) = deph(0.1, 0.4, 6);
    let grid = [0.0, 0.3, 0.6, 1.0, 1.5, 2.5];
    let p = SdpParams { r: 8, ..SdpParams::default() };
    for m in Method::ALL {
        let mut prev = f64::NEG_INFINITY;
        for &e in &grid {
            let b = EnergyBudget::new(7, e).unwrap();
            let v = fin(&channel_divergence(m, &jn, &jm, &b, p, &opts()).unwrap());
            assert!(v >= prev - 1e-6, "{m} at E={e}: {v} < {prev}");
            prev = v;
        }
    }
}

#[test]
fn grd_decreases_toward_bs() {
    let (jn, jm) = deph(0.1, 0.4, 8);
    let b = EnergyBudget::new(9, 1.0).unwrap();
    let bs = fin(&ec_bs_channel(&jn, &jm, &b, &opts()).unwrap());
    let mut prev = f64::INFINITY;
    for l in 1..=10 {
        let g = fin(&ec_grd_channel(&jn, &jm, &b, GrdSchedule::new(l).unwrap(), &opts()).unwrap());
        assert!(g <= prev + 1e-9);
        prev = g;
    }
    let diff = prev - bs;
    assert!((-1e-4..=0.01).contains(&diff), "{diff}");
}

#[test]
fn large_energy_approaches_classical_kl_from_below() {
    let (jn, jm) = deph(0.1, 0.4, 8);
    let kl = classical_kl_wrapped_normal(0.1, 0.4).unwrap();
    let small = fin(&ec_bs_channel(&jn, &jm, &EnergyBudget::new(9, 1.0).unwrap(), &opts()).unwrap());
    let big = fin(&ec_bs_channel(&jn, &jm, &EnergyBudget::new(9, 50.0).unwrap(), &opts()).unwrap());
    assert!(big <= kl + 1e-9, "{big} vs {kl}");
    assert!(big > small);
}

#[test]
fn dmax_sdp_matches_eigenvalues_and_scales() {
    let jn = dephasing_choi(0.4, 4).unwrap();
    let jm = dephasing_choi(0.1, 4).unwrap();
    let s = dmax_channel(&jn, &jm, &opts()).unwrap();
    let e = dmax_eigen(&jn, &jm).unwrap();
    assert!(s.is_finite() && (s - e).abs() <= 1e-6 * e, "{s} vs {e}");
    let half = dmax_channel(&jn, &jm.scale(2.0), &opts()).unwrap();
    assert!((half - s / 2.0).abs() <= 1e-6 * s);
    assert!((dmax_channel(&jn, &jn, &opts()).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn distinct_pure_loss_channels() {
    let jn = loss_choi(0.9, 3).unwrap();
    let jm = loss_choi(0.6, 3).unwrap();
    assert_eq!(dmax_eigen(&jn, &jm).unwrap(), f64::INFINITY);
    assert_eq!(dmax_channel(&jn, &jm, &opts()).unwrap(), f64::INFINITY);
    let b = EnergyBudget::new(4, 1.0).unwrap();
    assert_eq!(ec_bs_channel(&jn, &jm, &b, &opts()).unwrap().value, DivergenceValue::Infinite);
    assert_eq!(ec_channel_re_lower(&jn, &jm, &b, 5, &opts()).unwrap().value, DivergenceValue::NotApplicable);
    assert_eq!(ec_channel_re_upper(&jn, &jm, &b, 5, &opts()).unwrap().value, DivergenceValue::NotApplicable);
}

#[test]
fn re_bounds_sandwich_and_refine() {
    for (jn, jm) in [deph(0.1, 0.4, 6), deph(0.1, 0.15, 6)] {
        for e in [0.25, 1.0] {
            let b = EnergyBudget::new(7, e).unwrap();
            let (lo4, up4) = ec_channel_re_bracket(&jn, &jm, &b, 4, &opts()).unwrap();
            let (lo13, up13) = ec_channel_re_bracket(&jn, &jm, &b, 13, &opts()).unwrap();
            let bs = fin(&ec_bs_channel(&jn, &jm, &b, &opts()).unwrap());
            let me = fin(&ec_measured_re_channel(&jn, &jm, &b, 3, 3, &opts()).unwrap());
            assert!(fin(&lo13) <= fin(&up13) + 1e-5);
            assert!(fin(&lo4) <= fin(&up4) + 1e-5);
            assert!(fin(&lo4) <= fin(&lo13) + 1e-6);
            assert!(fin(&up13) <= fin(&up4) + 1e-6);
            assert!(fin(&up13) <= bs + 1e-5);
            assert!(me <= fin(&lo13) + 2e-5);
        }
    }
}

#[test]
fn loss_dephasing_hierarchy() {
    let jn = loss_dephasing_choi(0.95, 0.01, 4).unwrap();
    let jm = loss_dephasing_choi(0.85, 0.01, 4).unwrap();
    let b = EnergyBudget::new(5, 1.0).unwrap();
    let bs = fin(&ec_bs_channel(&jn, &jm, &b, &opts()).unwrap());
    let g = fin(&ec_grd_channel(&jn, &jm, &b, GrdSchedule::new(8).unwrap(), &opts()).unwrap());
    let me = ec_measured_re_channel(&jn, &jm, &b, 3, 3, &opts()).unwrap();
    assert!(bs <= g + 2e-5);
    if let Some(v) = me.value.finite() {
        assert!(v <= bs + 2e-5);
    }
}

#[test]
fn grd_primal_dual_pair() {
    let (jn, jm) = deph(0.1, 0.4, 4);
    for e in [0.3, 1.0, 2.0] {
        let b = EnergyBudget::new(5, e).unwrap();
        let primal = fin(&grd_sdp_energy_primal(&jn, &jm, &b, 3, &opts()).unwrap());
        let dual = fin(&grd_sdp_dual_lower(&jn, &jm, &b, 3, &opts()).unwrap());
        let direct = fin(&ec_grd_channel(&jn, &jm, &b, GrdSchedule::new(3).unwrap(), &opts()).unwrap());
        assert!(dual <= primal + 1e-5, "{dual} > {primal}");
        assert!(primal - dual <= 1e-4);
        assert!((primal - direct).abs() <= 1e-5);
    }
}

#[test]
fn unconstrained_grd_sdp_matches_closed_form() {
    for (jn, jm) in [deph(0.1, 0.4, 4), deph(0.2, 0.9, 3)] {
        for l in [1, 3, 5] {
            let s = grd_sdp_unconstrained(&jn, &jm, l, &opts()).unwrap().as_f64();
            let c = grd_unconstrained_closed_form(&jn, &jm, l).unwrap().as_f64();
            assert!((s - c).abs() <= 1e-5, "l={l}: {s} vs {c}");
        }
    }
}

#[test]
fn energy_constrained_lp_vertices() {
    let (v, p) = energy_constrained_max(&[0.0, 1.0, 5.0], &[0.0, 1.0, 2.0], 1.0);
    // mixing vacuum and two photons at energy 1 beats the single photon
    assert!((v - 2.5).abs() < 1e-12);
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    let (v, _) = energy_constrained_max(&[3.0, 1.0, 0.0], &[0.0, 1.0, 2.0], 0.5);
    assert_eq!(v, 3.0);
}

#[test]
fn knots_and_chord_weights() {
    let t = re_knots(0.0, 2.0, 4);
    assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let c = chord_weights(&t);
    assert_eq!(c[0], 0.0);
    assert!(c.iter().all(|&x| x >= 0.0));
    // g(t) = t - 1 + ... : chord bound of the integral of (t-mu)/t over [mu, lambda] is exact for affine g vanishing at mu
    let t = re_knots(0.5, 2.0, 3);
    let c = chord_weights(&t);
    let approx: f64 = t.iter().zip(&c).map(|(tk, ck)| ck * (tk - 0.5)).sum();
    let exact = 1.5 - 0.5 * (2.0f64 / 0.5).ln();
    assert!((approx - exact).abs() < 1e-12);
}

#[test]
fn sdpa_dumps_are_written() {
    let dir = std::env::temp_dir().join(format!("chandisc-dump-{}", std::process::id()));
    let (jn, jm) = deph(0.1, 0.4, 2);
    let b = EnergyBudget::new(3, 0.5).unwrap();
    let mut o = opts();
    o.dump = Some((dir.clone(), "t".into()));
    ec_measured_re_channel(&jn, &jm, &b, 2, 2, &o).unwrap();
    let files: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert_eq!(files.len(), 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mismatched_dimensions_error() {
    let a = dephasing_choi(0.1, 3).unwrap();
    let b = dephasing_choi(0.1, 4).unwrap();
    let e = EnergyBudget::new(4, 1.0).unwrap();
    assert!(ec_bs_channel(&a, &b, &e, &opts()).is_err());
    let wrong = EnergyBudget::new(7, 1.0).unwrap();
    assert!(ec_bs_channel(&a, &a, &wrong, &opts()).is_err());
    assert!(ec_measured_re_channel(&a, &a, &wrong, 2, 2, &opts()).is_err());
}
