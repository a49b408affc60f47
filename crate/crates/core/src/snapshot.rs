//! Plain-text field snapshots: a header line, then one tab-separated row per node.
//!
//! ```text
//! # resolution=33 shape=3x3x2 structure=skew
//! index  x1  x2  class  c_0_0_0  c_0_0_1  ...
//! 0  -0.25  -0.9375  interior  0  0.125  ...
//! ```
//!
//! Components follow the row-major `(row, col, spatial)` order of [`Field`]. Values
//! are written with Rust's shortest round-trip formatting, so reading a snapshot
//! back reproduces the field bit for bit. The grid is rebuilt from the resolution.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{DiscGrid, NodeClass};
use std::io::{BufRead, Write};
use std::sync::Arc;

pub fn write_snapshot<W: Write>(field: &Field, mut out: W) -> std::io::Result<()> {
    let sh = field.shape();
    writeln!(
        out,
        "# resolution={} shape={} structure={}",
        field.grid().resolution(),
        sh,
        field.structure().as_str()
    )?;
    write!(out, "index\tx1\tx2\tclass")?;
    for r in 0..sh.rows {
        for c in 0..sh.cols {
            for s in 0..sh.spatial {
                write!(out, "\tc_{r}_{c}_{s}")?;
            }
        }
    }
    writeln!(out)?;
    for (k, node) in field.grid().nodes().iter().enumerate() {
        write!(out, "{k}\t{}\t{}\t{}", node.x[0], node.x[1], node.class.as_str())?;
        for v in field.at(k) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a snapshot; `grid` is reused when its resolution matches, otherwise a new
/// grid is built.
pub fn read_snapshot<R: BufRead>(input: R, grid: Option<Arc<DiscGrid>>) -> Result<Field> {
    let mut lines = input.lines().enumerate();
    let io = |e: std::io::Error| Error::Snapshot(e.to_string());
    let (_, meta) = lines.next().ok_or_else(|| Error::Snapshot("empty snapshot".into()))?;
    let meta = meta.map_err(io)?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| Error::Snapshot("line 1: missing metadata comment".into()))?;
    let mut resolution = None;
    let mut shape = None;
    let mut structure = None;
    for item in meta.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Snapshot(format!("line 1: malformed metadata item '{item}'")))?;
        match key {
            "resolution" => {
                resolution = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| Error::Snapshot(format!("line 1: {e}")))?,
                )
            }
            "shape" => {
                let dims: Vec<usize> = value
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Snapshot(format!("line 1: shape: {e}")))?;
                if dims.len() != 3 {
                    return Err(Error::Snapshot(format!(
                        "line 1: shape '{value}' needs three dimensions"
                    )));
                }
                shape = Some(Shape::new(dims[0], dims[1], dims[2]));
            }
            "structure" => structure = Some(value.parse::<Structure>()?),
            _ => {}
        }
    }
    let resolution = resolution.ok_or_else(|| Error::Snapshot("line 1: missing resolution".into()))?;
    let shape = shape.ok_or_else(|| Error::Snapshot("line 1: missing shape".into()))?;
    let structure = structure.unwrap_or(Structure::General);
    let grid = match grid {
        Some(g) if g.resolution() == resolution => g,
        _ => Arc::new(DiscGrid::new(resolution)?),
    };

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header = header.map_err(io)?;
    let ncol = header.split('\t').count();
    if ncol != 4 + shape.ncomp() {
        return Err(Error::Snapshot(format!(
            "line 2: header has {ncol} columns, expected {}",
            4 + shape.ncomp()
        )));
    }

    let nc = shape.ncomp();
    let mut data = vec![f64::NAN; grid.len() * nc];
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let at = |msg: String| Error::Snapshot(format!("line {}: {msg}", lineno + 1));
        if cols.len() != 4 + nc {
            return Err(at(format!("{} columns, expected {}", cols.len(), 4 + nc)));
        }
        let k: usize = cols[0].parse().map_err(|e| at(format!("index: {e}")))?;
        if k >= grid.len() {
            return Err(at(format!("node index {k} out of range")));
        }
        let class: NodeClass = cols[3].parse()?;
        if class != grid.node(k).class {
            return Err(at(format!("node {k} class {} does not match the grid", cols[3])));
        }
        for c in 0..nc {
            data[k * nc + c] = cols[4 + c].parse().map_err(|e| at(format!("value: {e}")))?;
        }
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Snapshot(format!("{seen} node rows, expected {}", grid.len())));
    }
    Field::new(grid, shape, structure, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn round_trip_is_exact() {
        let g = Arc::new(build_grid(17).unwrap());
        let f = Field::from_fn(g.clone(), Shape::matrix_form(2), Structure::Skew, |x| {
            let a = (x[0] * 3.1).sin() / 7.0;
            let b = x[1].exp() * 0.1;
            vec![0.0, 0.0, -a, -b, a, b, 0.0, 0.0]
        })
        .unwrap();
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice(), Some(g)).unwrap();
        assert_eq!(back, f);
        let rebuilt = read_snapshot(buf.as_slice(), None).unwrap();
        assert_eq!(rebuilt, f);
    }

    #[test]
    fn truncated_snapshot_rejected() {
        let g = Arc::new(build_grid(17).unwrap());
        let f = Field::scalar_fn(g, |x| x[0]);
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_snapshot(cut.as_bytes(), None), Err(Error::Snapshot(_))));
    }
}
