use std::fmt::Write;

use chandisc::divergences::DivergenceValue;

use crate::config::{channel_name, RunConfig};
use crate::run::Row;

pub const HEADER: &str =
    "experiment,method,x,value,status,wall_ms,spectrum,channel,gamma1,gamma2,eta1,eta2,cutoff,energy,m,k,r,ell,seed";

/// Twelve significant digits.
pub fn sig12(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn value(v: &DivergenceValue) -> String {
    match v {
        DivergenceValue::Finite(x) => sig12(*x),
        DivergenceValue::Infinite => "inf".into(),
        DivergenceValue::NotApplicable => "nan".into(),
    }
}

/// Wall times are left blank unless `timing` is set, so that reruns of the
/// same config stay byte-identical.
pub fn to_csv(cfg: &RunConfig, rows: &[Row], timing: bool) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let spectrum = r.spectrum.as_ref().map(|p| p.iter().map(|&x| sig12(x)).collect::<Vec<_>>().join(";")).unwrap_or_default();
        let wall = if timing { format!("{:.3}", r.wall_ms) } else { String::new() };
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment.as_str(),
            r.method,
            r.x,
            value(&r.value),
            r.status,
            wall,
            spectrum,
            channel_name(cfg.channel),
            cfg.gamma1,
            r.gamma2,
            cfg.eta1,
            cfg.eta2,
            r.cutoff,
            r.energy,
            cfg.sdp.m,
            cfg.sdp.k,
            cfg.sdp.r,
            cfg.sdp.ell,
            cfg.seed
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.1), "1.00000000000e-1");
        assert_eq!(sig12(-123.456), "-1.23456000000e2");
        assert_eq!(sig12(f64::INFINITY), "inf");
        assert_eq!(sig12(0.0).len(), "0.00000000000e0".len());
    }
}
