//! Flat `key = value` run configs.
//!
//! ```text
//! # sweep_energy | sweep_gamma | sweep_truncation | probe_report | hierarchy_audit
//! experiment = sweep_energy
//! # dephasing | loss | loss_dephasing
//! channel = dephasing
//! gamma1 = 0.1          # dephasing variance [rad^2]
//! gamma2 = 0.4
//! eta1 = 1.0            # transmissivity [dimensionless, 0..1]
//! eta2 = 1.0
//! cutoff = 8            # largest Fock index kept
//! energy = 1.0          # mean photon number for fixed-E experiments [photons]
//! energy_grid = 0.1:2.0:0.1
//! gamma_grid = 0.2,0.5,1.0,2.0    # values of gamma2 [rad^2]
//! cutoff_grid = 3:10:1
//! methods = all         # or a comma list, e.g. bs_closed_form,grd_direct
//! m = 3                 # quadrature nodes
//! k = 3                 # square-root levels
//! r = 13                # knots of the relative-entropy discretization
//! ell = 8               # alpha = 1 + 2^-ell
//! seed = 0
//! out = results.csv
//! ```
//!
//! Grids are either comma lists or `start:stop:step`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chandisc::channels::{ChannelKind, ChannelModel};
use chandisc::divergences::{Method, SdpParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SweepEnergy,
    SweepGamma,
    SweepTruncation,
    ProbeReport,
    HierarchyAudit,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::SweepEnergy => "sweep_energy",
            Experiment::SweepGamma => "sweep_gamma",
            Experiment::SweepTruncation => "sweep_truncation",
            Experiment::ProbeReport => "probe_report",
            Experiment::HierarchyAudit => "hierarchy_audit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Experiment::SweepEnergy,
            Experiment::SweepGamma,
            Experiment::SweepTruncation,
            Experiment::ProbeReport,
            Experiment::HierarchyAudit,
        ]
        .into_iter()
        .find(|e| e.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub channel: ChannelKind,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub cutoff: usize,
    pub energy: f64,
    pub energy_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub cutoff_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub sdp: SdpParams,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn channel_name(k: ChannelKind) -> &'static str {
    match k {
        ChannelKind::Dephasing => "dephasing",
        ChannelKind::Loss => "loss",
        ChannelKind::LossDephasing => "loss_dephasing",
    }
}

const KEYS: [&str; 18] = [
    "experiment",
    "channel",
    "gamma1",
    "gamma2",
    "eta1",
    "eta2",
    "cutoff",
    "energy",
    "energy_grid",
    "gamma_grid",
    "cutoff_grid",
    "methods",
    "m",
    "k",
    "r",
    "ell",
    "seed",
    "out",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| bad(key, format!("cannot parse {v:?}")))
}

/// `a:b:step` (inclusive of `b` up to rounding) or `x, y, z`.
fn grid(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let g = if parts.len() == 3 {
        let (a, b, h): (f64, f64, f64) = (num(key, parts[0])?, num(key, parts[1])?, num(key, parts[2])?);
        if !(h > 0.0) || !(b >= a) {
            return Err(bad(key, "range needs start <= stop and step > 0"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        // round away the accumulated binary noise so grid points print cleanly
        (0..=n).map(|i| format!("{:.12}", a + i as f64 * h).parse::<f64>().unwrap()).collect()
    } else if parts.len() == 1 {
        v.split(',').map(|s| num::<f64>(key, s.trim())).collect::<Result<Vec<_>, _>>()?
    } else {
        return Err(bad(key, "expected a comma list or start:stop:step"));
    };
    if g.is_empty() {
        return Err(bad(key, "empty grid"));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(bad(key, "non-finite grid point"));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, "grid must be strictly ascending"));
    }
    Ok(g)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax(i + 1, format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::Syntax(i + 1, format!("unknown key {k:?}")));
            }
            if kv.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Syntax(i + 1, format!("duplicate key {k:?}")));
            }
        }
        let get = |k: &str| kv.get(k).map(String::as_str);

        let experiment = get("experiment").ok_or_else(|| bad("experiment", "missing"))?;
        let experiment = Experiment::parse(experiment).ok_or_else(|| bad("experiment", format!("unknown {experiment:?}")))?;
        let channel = match get("channel").unwrap_or("dephasing") {
            "dephasing" => ChannelKind::Dephasing,
            "loss" => ChannelKind::Loss,
            "loss_dephasing" => ChannelKind::LossDephasing,
            other => return Err(bad("channel", format!("unknown {other:?}"))),
        };
        let needs_gamma = channel != ChannelKind::Loss;
        let needs_eta = channel != ChannelKind::Dephasing;
        let gamma1 = match get("gamma1") {
            Some(v) => num("gamma1", v)?,
            None if needs_gamma => return Err(bad("gamma1", "missing")),
            None => 0.0,
        };
        let gamma2 = match get("gamma2") {
            Some(v) => num("gamma2", v)?,
            None if needs_gamma && experiment != Experiment::SweepGamma => return Err(bad("gamma2", "missing")),
            None => gamma1,
        };
        let eta = |k: &str| -> Result<f64, ConfigError> {
            match get(k) {
                Some(v) => num(k, v),
                None if needs_eta => Err(bad(k, "missing")),
                None => Ok(1.0),
            }
        };
        let (eta1, eta2) = (eta("eta1")?, eta("eta2")?);

        let methods = match get("methods").unwrap_or("all") {
            "all" => Method::ALL.to_vec(),
            list => list
                .split(',')
                .map(|s| Method::parse(s.trim()).ok_or_else(|| bad("methods", format!("unknown method {:?}", s.trim()))))
                .collect::<Result<Vec<_>, _>>()?,
        };
        if methods.is_empty() {
            return Err(bad("methods", "empty"));
        }
        let cutoff_grid: Vec<usize> = match get("cutoff_grid") {
            Some(v) => grid("cutoff_grid", v)?
                .into_iter()
                .map(|x| if x.fract() == 0.0 && x >= 1.0 { Ok(x as usize) } else { Err(bad("cutoff_grid", format!("{x} is not a positive integer"))) })
                .collect::<Result<_, _>>()?,
            None => (3..=10).collect(),
        };
        let d = SdpParams::default();
        let sdp = SdpParams {
            m: get("m").map(|v| num("m", v)).transpose()?.unwrap_or(d.m),
            k: get("k").map(|v| num("k", v)).transpose()?.unwrap_or(d.k),
            r: get("r").map(|v| num("r", v)).transpose()?.unwrap_or(d.r),
            ell: get("ell").map(|v| num("ell", v)).transpose()?.unwrap_or(d.ell),
        };
        let cfg = RunConfig {
            experiment,
            channel,
            gamma1,
            gamma2,
            eta1,
            eta2,
            cutoff: get("cutoff").map(|v| num("cutoff", v)).transpose()?.unwrap_or(8),
            energy: get("energy").map(|v| num("energy", v)).transpose()?.unwrap_or(1.0),
            energy_grid: get("energy_grid").map(|v| grid("energy_grid", v)).transpose()?.unwrap_or_else(|| {
                (1..=20).map(|i| i as f64 / 10.0).collect()
            }),
            gamma_grid: match get("gamma_grid") {
                Some(v) => grid("gamma_grid", v)?,
                None if experiment == Experiment::SweepGamma => return Err(bad("gamma_grid", "missing")),
                None => vec![],
            },
            cutoff_grid,
            methods,
            sdp,
            seed: get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0),
            out: get("out").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: chandisc::Error| ConfigError::Invalid(e.to_string());
        self.model1(self.cutoff).map_err(invalid)?;
        self.model2(self.cutoff, self.gamma2).map_err(invalid)?;
        for &g in &self.gamma_grid {
            self.model2(self.cutoff, g).map_err(invalid)?;
        }
        if self.cutoff == 0 {
            return Err(bad("cutoff", "must be at least 1"));
        }
        if !(self.energy >= 0.0) || !self.energy.is_finite() {
            return Err(bad("energy", "must be finite and >= 0"));
        }
        if self.energy_grid[0] < 0.0 {
            return Err(bad("energy_grid", "energies must be >= 0"));
        }
        if self.gamma_grid.first().is_some_and(|&g| g < 0.0) {
            return Err(bad("gamma_grid", "variances must be >= 0"));
        }
        if !(1..=40).contains(&self.sdp.ell) {
            return Err(bad("ell", "must be in 1..=40"));
        }
        if self.sdp.m == 0 || self.sdp.k == 0 || self.sdp.r == 0 {
            return Err(ConfigError::Invalid("m, k and r must be positive".into()));
        }
        Ok(())
    }

    pub fn model1(&self, cutoff: usize) -> chandisc::Result<ChannelModel> {
        ChannelModel::new(self.channel, self.gamma1, self.eta1, cutoff)
    }

    pub fn model2(&self, cutoff: usize, gamma2: f64) -> chandisc::Result<ChannelModel> {
        ChannelModel::new(self.channel, gamma2, self.eta2, cutoff)
    }
}
