use std::path::Path;
use std::process::{Command, Output};

fn skewreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_potential_exits_cleanly_with_zero_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        "experiment = \"gauge\"\nresolution = 33\n[gauge]\nomega = \"zero\"\n",
    );
    let out = dir.path().join("out");
    let o = skewreg(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let table = std::fs::read_to_string(out.join("gauge.tsv")).unwrap();
    assert!(table.contains("# metric.max_relative_residual=0.0\n"), "{table}");
    assert!(table.contains("# seed=0\n"));
    assert!(table.contains("# config_hash="));
    assert!(table.contains("# tol.gauge_residual="));
    assert!(out.join("gauge_summary.txt").exists());
    assert!(out.join("gauge_p.snap").exists());
    assert!(out.join("gauge_xi.snap").exists());
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "experiment = \"gauge\"\nresolution = = 33\n");
    let o = skewreg(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn out_of_range_and_missing_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "even.toml", "experiment = \"gauge\"\nresolution = 64\n");
    assert_eq!(skewreg(&["validate-config", "--config", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        skewreg(&["run", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn empty_sweep_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "experiment = \"sweep\"\nresolution = 33\n[sweep]\ntarget = \"boundary-delta\"\nvalues = []\n",
    );
    let o = skewreg(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn failed_invariant_exits_1_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    // A 1e-30 budget on the Hodge reconstruction cannot be met in floating point.
    let cfg = write(
        dir.path(),
        "h.toml",
        "experiment = \"hodge\"\nresolution = 33\n[tolerances]\nharmonic = 1e-30\n[hodge]\ncases = 2\n",
    );
    let o = skewreg(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed invariant: harmonic"), "{}", stderr(&o));
}

#[test]
fn overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "w.toml",
        "experiment = \"wente\"\nresolution = 65\nseed = 1\n[wente]\ncases = 3\nresolutions = [33, 65]\n",
    );
    let out = dir.path().join("o");
    let o = skewreg(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--resolution",
        "33",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("wente.tsv")).unwrap();
    assert!(table.contains("# seed=9\n"));
    assert!(table.contains("# resolution=33\n"));
    assert_eq!(table.lines().filter(|l| l.starts_with("33\t")).count(), 3);
}

#[test]
fn sweep_subcommand_needs_sweep_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", "experiment = \"hodge\"\nresolution = 33\n");
    assert_eq!(skewreg(&["sweep", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn delta_sweep_has_monotone_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        "experiment = \"sweep\"\nresolution = 65\nseed = 7\n[sweep]\ntarget = \"boundary-delta\"\nvalues = [0.2, 0.1, 0.05]\n",
    );
    let out = dir.path().join("o");
    let o = skewreg(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("sweep.tsv")).unwrap();
    assert!(table.contains("# check.gaps_decrease=pass"), "{table}");
}

#[test]
fn version_prints() {
    let o = skewreg(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("skewreg "));
}
