use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chandisc"))
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(p: &Path) -> Self {
        let text = std::fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Csv { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap()
    }

    fn value(&self, method: &str, x: &str) -> f64 {
        let (m, xc, v) = (self.col("method"), self.col("x"), self.col("value"));
        self.rows.iter().find(|r| r[m] == method && r[xc] == x).unwrap()[v].parse().unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn energy_sweep_is_ordered_and_monotone() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.conf",
        "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 4\nenergy_grid = 0.5,1.0\n\
         methods = re_lower,re_upper,bs_closed_form,grd_direct\n",
    );
    let out = dir.path().join("e.csv");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::read(&out);
    assert_eq!(csv.header[..7], ["experiment", "method", "x", "value", "status", "wall_ms", "spectrum"]);
    assert_eq!(csv.rows.len(), 8);
    for x in ["0.5", "1"] {
        let chain: Vec<f64> = ["re_lower", "re_upper", "bs_closed_form", "grd_direct"].iter().map(|m| csv.value(m, x)).collect();
        assert!(chain.windows(2).all(|w| w[0] <= w[1] + 2e-5), "{chain:?}");
    }
    for m in ["re_lower", "bs_closed_form"] {
        assert!(csv.value(m, "0.5") <= csv.value(m, "1") + 1e-6);
    }
    let wall = csv.col("wall_ms");
    assert!(csv.rows.iter().all(|r| r[wall].is_empty()));
}

#[test]
fn output_is_byte_identical_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "d.conf",
        "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 3\nenergy_grid = 0.2:1.0:0.2\n\
         methods = measured_re,bs_closed_form,grd_direct\n",
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&cfg, &a, &["--jobs", "1"]).status.success());
    assert!(run(&cfg, &b, &["--jobs", "3"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn probe_report_finds_two_photon_investment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "p.conf",
        "experiment = probe_report\ngamma1 = 0.1\ngamma2 = 0.5\nenergy = 0.5\ncutoff = 8\nmethods = measured_re\n",
    );
    let out = dir.path().join("p.csv");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::read(&out);
    let p: Vec<f64> = csv.rows[0][csv.col("spectrum")].split(';').map(|s| s.parse().unwrap()).collect();
    assert_eq!(p.len(), 9);
    assert!((p[0] - 0.77).abs() < 0.02 && (p[2] - 0.22).abs() < 0.03, "{p:?}");
    assert!(stderr(&o).contains("sqrt(p)"));
}

#[test]
fn identical_channels_flag_degenerate_probe() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "i.conf",
        "experiment = probe_report\ngamma1 = 0.3\ngamma2 = 0.3\nenergy = 0.5\ncutoff = 4\nmethods = bs_closed_form,grd_direct\n",
    );
    let o = run(&cfg, &dir.path().join("i.csv"), &[]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn truncation_sweep_reports_stabilization() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "t.conf",
        "experiment = sweep_truncation\ngamma1 = 0.1\ngamma2 = 0.4\nenergy = 1.0\ncutoff_grid = 3:10:1\nmethods = bs_closed_form\n",
    );
    let out = dir.path().join("t.csv");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(err.contains("bs_closed_form: stabilized from N="), "{err}");
    assert!(err.contains("certificate at N=10"), "{err}");
    assert_eq!(Csv::read(&out).rows.len(), 8);
}

#[test]
fn gamma_sweep_stays_below_classical_ceiling() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "g.conf",
        "experiment = sweep_gamma\ngamma1 = 1\ngamma_grid = 0.5,2.0\nenergy = 0.5\ncutoff = 6\nmethods = bs_closed_form,grd_direct\n",
    );
    let out = dir.path().join("g.csv");
    assert!(run(&cfg, &out, &[]).status.success());
    let csv = Csv::read(&out);
    assert_eq!(csv.rows.len(), 6);
    for x in ["0.5", "2"] {
        let ceil = csv.value("kl_ceiling", x);
        assert!(csv.value("grd_direct", x) <= ceil + 2e-5);
        assert!(csv.value("bs_closed_form", x) <= ceil + 2e-5);
    }
}

#[test]
fn audit_passes_on_consistent_methods() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "a.conf",
        "experiment = hierarchy_audit\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 3\nenergy_grid = 0.5,1.0\n\
         methods = measured_re,re_lower,re_upper,bs_closed_form,grd_direct\n",
    );
    let o = run(&cfg, &dir.path().join("a.csv"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("0 violation(s)"));
}

#[test]
fn audit_fails_on_coarse_discretization() {
    // a single knot makes the relative-entropy lower bound too loose to
    // dominate the measured relative entropy
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "v.conf",
        "experiment = hierarchy_audit\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 3\nenergy_grid = 0.5\nmethods = measured_re,re_lower\nr = 1\n",
    );
    let o = run(&cfg, &dir.path().join("v.csv"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(run(&dir.path().join("missing.conf"), &out, &[]).status.code(), Some(2));
    let bad = write_config(&dir, "b.conf", "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\nenergy_grid = 1,0.5\n");
    assert_eq!(run(&bad, &out, &[]).status.code(), Some(2));
    let unknown = write_config(&dir, "u.conf", "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\nwidth = 3\n");
    assert_eq!(run(&unknown, &out, &[]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn dump_sdp_writes_sdpa_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "s.conf",
        "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 2\nenergy_grid = 0.5\nmethods = re_lower\n",
    );
    let dumps = dir.path().join("sdp");
    let o = run(&cfg, &dir.path().join("s.csv"), &["--dump-sdp", dumps.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<_> = std::fs::read_dir(&dumps).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(!files.is_empty());
    assert!(files.iter().all(|f| f.starts_with("sweep_energy_re_lower_0000") && f.ends_with(".dat-s")), "{files:?}");
}

#[test]
fn plot_renders_svg() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.conf",
        "experiment = sweep_energy\ngamma1 = 0.1\ngamma2 = 0.4\ncutoff = 3\nenergy_grid = 0.5,1.0\nmethods = bs_closed_form,grd_direct\n",
    );
    let csv = dir.path().join("e.csv");
    assert!(run(&cfg, &csv, &[]).status.success());
    let svg = dir.path().join("e.svg");
    let o = bin().arg("plot").arg("--csv").arg(&csv).arg("--out").arg(&svg).output().unwrap();
    assert!(o.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 2);
}
