use chandisc::channels::{classical_kl_wrapped_normal, ChannelModel};
use chandisc::divergences::{ec_bs_channel, Method, SdpParams, SolveOptions};
use chandisc::hilbert::EnergyBudget;
use chandisc::truncation::*;

#[test]
fn bound_formula() {
    let c = bs_truncation_bound(0.1, 0.4, 1.0, 8).unwrap();
    let kl = classical_kl_wrapped_normal(0.1, 0.4).unwrap();
    assert!((c.bound - 2.0 / 9.0 * kl).abs() < 1e-15);
    assert_eq!(c.kl_pq, kl);
    assert!(bs_truncation_bound(-0.1, 0.4, 1.0, 8).is_err());
}

#[test]
fn certified_interval_holds() {
    let o = SolveOptions::default();
    for n in [3usize, 5] {
        let cert = certify_bs(0.1, 0.4, 1.0, n, &o).unwrap();
        let (lo, hi) = cert.interval().unwrap();
        let j1 = ChannelModel::dephasing(0.1, 2 * n).unwrap().choi();
        let j2 = ChannelModel::dephasing(0.4, 2 * n).unwrap().choi();
        let v = ec_bs_channel(&j1, &j2, &EnergyBudget::new(2 * n + 1, 1.0).unwrap(), &o).unwrap().value.as_f64();
        assert!(v >= lo - 1e-5 && v <= hi + 1e-5);
    }
}

#[test]
fn bs_grows_with_cutoff() {
    let o = SolveOptions::default();
    let mut prev = f64::NEG_INFINITY;
    for n in 1..=10 {
        let j1 = ChannelModel::dephasing(0.1, n).unwrap().choi();
        let j2 = ChannelModel::dephasing(0.4, n).unwrap().choi();
        let v = ec_bs_channel(&j1, &j2, &EnergyBudget::new(n + 1, 1.0).unwrap(), &o).unwrap().value.as_f64();
        assert!(v >= prev - 1e-6);
        prev = v;
    }
}

#[test]
fn identical_channels_give_flat_zero() {
    let m = ChannelModel::dephasing(0.2, 2).unwrap();
    let s = truncation_sweep(&m, &m, 1.0, &[2, 3, 4], &[Method::BsClosedForm, Method::MeasuredRe], SdpParams::default(), &SolveOptions::default())
        .unwrap();
    for t in &s.traces {
        assert!(t.values().iter().all(|v| v.abs() < 1e-5));
        assert_eq!(t.stabilized_from, Some(2));
        assert!(!t.non_monotone);
    }
    match s.certification {
        Certification::Analytic(c) => assert!(c.bound.abs() < 1e-12),
        Certification::EmpiricalOnly => panic!("dephasing pair should be certified"),
    }
}

#[test]
fn loss_dephasing_is_empirical_and_settles() {
    let a = ChannelModel::loss_dephasing(0.95, 0.01, 2).unwrap();
    let b = ChannelModel::loss_dephasing(0.85, 0.01, 2).unwrap();
    let cutoffs = [2, 3, 4, 5, 6];
    let s = truncation_sweep(&a, &b, 1.0, &cutoffs, &[Method::BsClosedForm, Method::GrdDirect], SdpParams::default(), &SolveOptions::default())
        .unwrap();
    assert_eq!(s.certification, Certification::EmpiricalOnly);
    for t in &s.traces {
        let v = t.values();
        assert!(!t.non_monotone, "{:?}: {v:?}", t.method);
        let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.last().unwrap() < &steps[0], "{:?}: {v:?}", t.method);
    }
}

#[test]
fn sweep_rejects_unsorted_cutoffs() {
    let m = ChannelModel::dephasing(0.2, 2).unwrap();
    assert!(truncation_sweep(&m, &m, 1.0, &[4, 3], &[Method::BsClosedForm], SdpParams::default(), &SolveOptions::default()).is_err());
    assert!(truncation_sweep(&m, &m, 1.0, &[], &[Method::BsClosedForm], SdpParams::default(), &SolveOptions::default()).is_err());
}
