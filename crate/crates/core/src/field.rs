//! Sampled fields on a [`DiscGrid`].
//!
//! Samples are node-major; within a node the components are ordered row-major in
//! `(row, col, spatial)`, so a skew 1-form `Ω` stores `Ω_i[p][q]` at
//! `(p * m + q) * 2 + i`.

use crate::error::{Error, Result};
use crate::grid::DiscGrid;
use std::sync::Arc;

const SKEW_TOL: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub spatial: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape::new(1, 1, 1);

    pub const fn new(rows: usize, cols: usize, spatial: usize) -> Self {
        Self { rows, cols, spatial }
    }

    /// `ℝᵐ`-valued field.
    pub const fn vector(m: usize) -> Self {
        Self::new(m, 1, 1)
    }

    /// `m×m` matrix per node (rotations, skew 0-forms).
    pub const fn matrix(m: usize) -> Self {
        Self::new(m, m, 1)
    }

    /// `m×m` matrix per node and spatial direction (skew 1-forms).
    pub const fn matrix_form(m: usize) -> Self {
        Self::new(m, m, 2)
    }

    /// `ℝᵐ ⊗ ℝ²`, e.g. the gradient of an `ℝᵐ`-valued field.
    pub const fn vector_form(m: usize) -> Self {
        Self::new(m, 1, 2)
    }

    pub const fn ncomp(&self) -> usize {
        self.rows * self.cols * self.spatial
    }

    pub const fn index(&self, row: usize, col: usize, s: usize) -> usize {
        (row * self.cols + col) * self.spatial + s
    }

    pub fn with_spatial(&self, spatial: usize) -> Self {
        Self::new(self.rows, self.cols, spatial)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.spatial)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    General,
    /// `Aᵀ = −A` in every spatial slot.
    Skew,
    /// `PᵀP = I`, `det P = 1`.
    Rotation,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::General => "general",
            Structure::Skew => "skew",
            Structure::Rotation => "rotation",
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Structure::General),
            "skew" => Ok(Structure::Skew),
            "rotation" => Ok(Structure::Rotation),
            other => Err(Error::Snapshot(format!("unknown structure '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<DiscGrid>,
    shape: Shape,
    structure: Structure,
    data: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.resolution() == other.grid.resolution()
            && self.shape == other.shape
            && self.structure == other.structure
            && self.data == other.data
    }
}

impl Field {
    pub fn new(grid: Arc<DiscGrid>, shape: Shape, structure: Structure, data: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * shape.ncomp();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} samples ({shape} on {} nodes)", grid.len()),
                found: format!("{} samples", data.len()),
            });
        }
        let field = Self {
            grid,
            shape,
            structure,
            data,
        };
        field.validate()?;
        Ok(field)
    }

    /// Builds a field without structural checks; callers guarantee the structure
    /// (used after skew projection or exponentiation).
    pub(crate) fn from_parts(grid: Arc<DiscGrid>, shape: Shape, structure: Structure, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * shape.ncomp());
        Self {
            grid,
            shape,
            structure,
            data,
        }
    }

    pub fn zeros(grid: Arc<DiscGrid>, shape: Shape, structure: Structure) -> Self {
        let n = grid.len() * shape.ncomp();
        Self::from_parts(grid, shape, structure, vec![0.0; n])
    }

    /// Field of identity matrices.
    pub fn identity(grid: Arc<DiscGrid>, m: usize) -> Self {
        let shape = Shape::matrix(m);
        let mut data = vec![0.0; grid.len() * m * m];
        for node in data.chunks_mut(m * m) {
            for p in 0..m {
                node[p * m + p] = 1.0;
            }
        }
        Self::from_parts(grid, shape, Structure::Rotation, data)
    }

    /// Samples `f` at every node, including exterior lattice nodes.
    pub fn from_fn(
        grid: Arc<DiscGrid>,
        shape: Shape,
        structure: Structure,
        f: impl Fn([f64; 2]) -> Vec<f64>,
    ) -> Result<Self> {
        let nc = shape.ncomp();
        let mut data = Vec::with_capacity(grid.len() * nc);
        for node in grid.nodes() {
            let v = f(node.x);
            if v.len() != nc {
                return Err(Error::ShapeMismatch {
                    expected: format!("{nc} components"),
                    found: format!("{} components", v.len()),
                });
            }
            data.extend(v);
        }
        Self::new(grid, shape, structure, data)
    }

    pub fn scalar_fn(grid: Arc<DiscGrid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = grid.nodes().iter().map(|n| f(n.x)).collect();
        Self::from_parts(grid, Shape::SCALAR, Structure::General, data)
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn ncomp(&self) -> usize {
        self.shape.ncomp()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Components at node `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[k * nc..(k + 1) * nc]
    }

    /// One component across all nodes.
    pub fn component(&self, c: usize) -> Vec<f64> {
        let nc = self.ncomp();
        self.data.iter().skip(c).step_by(nc).copied().collect()
    }

    pub fn map(&self, structure: Structure, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.shape,
            structure,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        let structure = if self.structure == Structure::Rotation {
            Structure::General
        } else {
            self.structure
        };
        Self::from_parts(
            self.grid.clone(),
            self.shape,
            structure,
            self.data.iter().map(|v| s * v).collect(),
        )
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.grid.resolution() != other.grid.resolution() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} at resolution {}", self.shape, self.grid.resolution()),
                found: format!("{} at resolution {}", other.shape, other.grid.resolution()),
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let structure = match (self.structure, other.structure) {
            (Structure::Skew, Structure::Skew) => Structure::Skew,
            _ => Structure::General,
        };
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_parts(self.grid.clone(), self.shape, structure, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    /// Re-tags the field, validating the new structure.
    pub fn with_structure(self, structure: Structure) -> Result<Self> {
        Self::new(self.grid, self.shape, structure, self.data)
    }

    /// Stacks scalar fields into one field of the given shape.
    pub fn stack(grid: Arc<DiscGrid>, shape: Shape, structure: Structure, parts: &[Vec<f64>]) -> Result<Self> {
        let nc = shape.ncomp();
        if parts.len() != nc {
            return Err(Error::ShapeMismatch {
                expected: format!("{nc} components"),
                found: format!("{} components", parts.len()),
            });
        }
        let n = grid.len();
        let mut data = vec![0.0; n * nc];
        for (c, part) in parts.iter().enumerate() {
            for (k, v) in part.iter().enumerate() {
                data[k * nc + c] = *v;
            }
        }
        Self::new(grid, shape, structure, data)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Structure(format!("non-finite sample at flat index {bad}")));
        }
        match self.structure {
            Structure::General => Ok(()),
            Structure::Skew => {
                let dev = self.skew_defect()?;
                if dev > SKEW_TOL {
                    return Err(Error::Structure(format!("skew field has |A + Aᵀ| = {dev:e}")));
                }
                Ok(())
            }
            Structure::Rotation => {
                let dev = self.rotation_defect()?;
                if dev > ROTATION_TOL {
                    return Err(Error::Structure(format!("rotation field has defect {dev:e}")));
                }
                Ok(())
            }
        }
    }

    fn require_square(&self) -> Result<usize> {
        if self.shape.rows != self.shape.cols {
            return Err(Error::ShapeMismatch {
                expected: "square matrix components".into(),
                found: self.shape.to_string(),
            });
        }
        Ok(self.shape.rows)
    }

    /// Largest `|A_pq + A_qp|` over nodes and spatial slots.
    pub fn skew_defect(&self) -> Result<f64> {
        let m = self.require_square()?;
        let sh = self.shape;
        let mut worst = 0.0f64;
        for k in 0..self.grid.len() {
            let a = self.at(k);
            for s in 0..sh.spatial {
                for p in 0..m {
                    for q in p..m {
                        worst = worst.max((a[sh.index(p, q, s)] + a[sh.index(q, p, s)]).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Largest of `max |PᵀP − I|` and `|det P − 1|` over nodes.
    pub fn rotation_defect(&self) -> Result<f64> {
        let m = self.require_square()?;
        if self.shape.spatial != 1 {
            return Err(Error::ShapeMismatch {
                expected: format!("{m}x{m}x1"),
                found: self.shape.to_string(),
            });
        }
        let mut worst = 0.0f64;
        for k in 0..self.grid.len() {
            let p = nalgebra::DMatrix::from_row_slice(m, m, self.at(k));
            let g = p.transpose() * &p - nalgebra::DMatrix::<f64>::identity(m, m);
            worst = worst.max(g.amax()).max((p.determinant() - 1.0).abs());
        }
        Ok(worst)
    }

    /// Replaces every matrix slot by its skew part `(A − Aᵀ)/2`.
    pub fn skew_part(&self) -> Result<Self> {
        let m = self.require_square()?;
        let sh = self.shape;
        let mut data = self.data.clone();
        let nc = sh.ncomp();
        for node in data.chunks_mut(nc) {
            for s in 0..sh.spatial {
                for p in 0..m {
                    node[sh.index(p, p, s)] = 0.0;
                    for q in p + 1..m {
                        let v = 0.5 * (node[sh.index(p, q, s)] - node[sh.index(q, p, s)]);
                        node[sh.index(p, q, s)] = v;
                        node[sh.index(q, p, s)] = -v;
                    }
                }
            }
        }
        Ok(Self::from_parts(self.grid.clone(), sh, Structure::Skew, data))
    }

    /// One spatial slot of a field with `spatial = 2`, as a field with `spatial = 1`.
    pub fn spatial_slot(&self, s: usize) -> Self {
        let sh = self.shape;
        let out = sh.with_spatial(1);
        let nc = sh.ncomp();
        let mut data = Vec::with_capacity(self.grid.len() * out.ncomp());
        for node in self.data.chunks(nc) {
            for r in 0..sh.rows {
                for c in 0..sh.cols {
                    data.push(node[sh.index(r, c, s)]);
                }
            }
        }
        let structure = if self.structure == Structure::Skew {
            Structure::Skew
        } else {
            Structure::General
        };
        Self::from_parts(self.grid.clone(), out, structure, data)
    }

    /// Interleaves two single-slot fields into a 1-form (`spatial = 2`).
    pub fn from_slots(first: &Self, second: &Self) -> Result<Self> {
        first.check_compatible(second)?;
        let sh = first.shape;
        if sh.spatial != 1 {
            return Err(Error::ShapeMismatch {
                expected: "single spatial slot".into(),
                found: sh.to_string(),
            });
        }
        let out = sh.with_spatial(2);
        let nc = sh.ncomp();
        let mut data = Vec::with_capacity(first.data.len() * 2);
        for (a, b) in first.data.chunks(nc).zip(second.data.chunks(nc)) {
            for c in 0..nc {
                data.push(a[c]);
                data.push(b[c]);
            }
        }
        let structure = if first.structure == Structure::Skew && second.structure == Structure::Skew {
            Structure::Skew
        } else {
            Structure::General
        };
        Ok(Self::from_parts(first.grid.clone(), out, structure, data))
    }
}
