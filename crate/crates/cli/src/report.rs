//! Report tables and summaries.
//!
//! The machine-readable file `<kind>.tsv` starts with `# key=value` header lines
//! (experiment, config hash, seed, resolution, tolerances, metrics, checks),
//! followed by one tab-separated table with a fixed header row per experiment.
//! Numbers use Rust's shortest round-trip formatting, so identical runs give
//! identical bytes.

use crate::config::{ExperimentConfig, Kind};
use skewreg_core::snapshot::write_snapshot;
use skewreg_core::Field;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Flag(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:?}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Flag(b) => f.write_str(if *b { "true" } else { "false" }),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text("-".into()), Cell::Num)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub kind: Kind,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub metrics: Vec<(String, Cell)>,
    pub checks: Vec<Check>,
    pub snapshots: Vec<(String, Field)>,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, columns: &[&'static str]) -> Self {
        let mut meta = vec![
            ("experiment".to_string(), cfg.experiment.to_string()),
            ("config_hash".to_string(), cfg.hash()),
            ("seed".to_string(), cfg.seed.to_string()),
            ("resolution".to_string(), cfg.resolution.to_string()),
        ];
        let tol = toml::Value::try_from(&cfg.tolerances).expect("tolerances serialize");
        if let toml::Value::Table(t) = tol {
            for (k, v) in t {
                meta.push((format!("tol.{k}"), v.to_string()));
            }
        }
        Self {
            kind: cfg.experiment,
            meta,
            columns: columns.to_vec(),
            rows: Vec::new(),
            metrics: Vec::new(),
            checks: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: impl Into<Cell>) {
        self.metrics.push((name.into(), value.into()));
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn snapshot(&mut self, name: impl Into<String>, field: Field) {
        self.snapshots.push((name.into(), field));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).and_then(|(_, c)| match c {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        })
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.columns.iter().position(|c| *c == name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| match &r[i] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                _ => None,
            })
            .collect()
    }

    pub fn table(&self) -> String {
        let mut s = String::from("# skewreg report\n");
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "# metric.{k}={v}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "# check.{}={}", c.name, if c.passed { "pass" } else { "fail" });
        }
        s.push_str(&self.columns.join("\t"));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.to_string()).collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} experiment\n", self.kind);
        for (k, v) in &self.meta {
            if k == "experiment" || k.starts_with("tol.") {
                continue;
            }
            let _ = writeln!(s, "  {k}: {v}");
        }
        if !self.metrics.is_empty() {
            s.push_str("metrics\n");
            for (k, v) in &self.metrics {
                let _ = writeln!(s, "  {k} = {v}");
            }
        }
        s.push_str("checks\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  [{}] {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "{} of {} checks passed, {} table rows",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len(),
            self.rows.len()
        );
        s
    }

    /// Writes `<kind>.tsv`, `<kind>_summary.txt` and one `.snap` per snapshot.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.kind.as_str();
        let mut written = Vec::new();
        let table = dir.join(format!("{stem}.tsv"));
        std::fs::write(&table, self.table())?;
        written.push(table);
        let summary = dir.join(format!("{stem}_summary.txt"));
        std::fs::write(&summary, self.summary())?;
        written.push(summary);
        for (name, field) in &self.snapshots {
            let path = dir.join(format!("{stem}_{name}.snap"));
            let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_snapshot(field, &mut out)?;
            out.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let cfg = ExperimentConfig::parse("experiment = \"hodge\"\nresolution = 17\nseed = 4\n").unwrap();
        let mut r = Report::new(&cfg, &["case", "value"]);
        r.row(vec![0usize.into(), 0.1.into()]);
        r.metric("max", 0.1);
        r.check("bounded", true, "0.1 ≤ 1");
        let t = r.table();
        assert!(t.contains("# seed=4\n"));
        assert!(t.contains(&format!("# config_hash={}\n", cfg.hash())));
        assert!(
            t.contains("# tol.harmonic=1e-6\n") || t.contains("# tol.harmonic=0.000001\n"),
            "{t}"
        );
        assert!(t.ends_with("case\tvalue\n0\t0.1\n"));
        assert_eq!(r.column("value"), vec![0.1]);
        assert!(r.passed());
    }
}
