//! Recovery of a stream function `ξ` with `∇⊥ξ ≈ w` for a divergence-free `w`.
//!
//! `ξ` minimizes `Σ_S w_k |∇⊥ξ − w|²` over the working nodes `S`, with all nodes
//! reached by the derivative stencils of `S` left free. This is the discrete form
//! of the Neumann problem `Δξ = curl w`, `∂ξ/∂n = w·τ`. The additive constant is
//! fixed by pinning one node and then subtracting the mean.

use super::operator::derive;
use crate::error::{Error, Result};
use crate::field::{Field, Structure};
use crate::grid::{Disc, DiscGrid};
use crate::sparse::{CsrMatrix, LuSolver};
use std::sync::Arc;

pub const DEFAULT_DIVERGENCE_TOL: f64 = 1e-2;

const ODD_EVEN_PENALTY: f64 = 1e-6;

/// Factorized least-squares operator for one grid and disc.
pub struct PotentialSolver {
    grid: Arc<DiscGrid>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    bx: CsrMatrix,
    by: CsrMatrix,
    lu: LuSolver,
    pin: usize,
}

impl PotentialSolver {
    pub fn new(grid: &Arc<DiscGrid>, d: &Disc) -> Result<Self> {
        let rows = grid.resolved_nodes(d)?;
        let mut touched = vec![false; grid.len()];
        for &r in &rows {
            for axis in 0..2 {
                for (c, _) in grid.derivative(axis).row(r) {
                    touched[c] = true;
                }
            }
        }
        let cols: Vec<usize> = (0..grid.len()).filter(|&k| touched[k]).collect();
        let bx = grid.derivative(0).select(&rows, &cols);
        let by = grid.derivative(1).select(&rows, &cols);
        let w = grid.weights();
        let ws: Vec<(usize, usize, f64)> = rows.iter().enumerate().map(|(i, &k)| (i, i, w[k])).collect();
        let wm = CsrMatrix::from_triplets(rows.len(), rows.len(), &ws);
        let mut k = bx
            .transpose()
            .matmul(&wm)
            .matmul(&bx)
            .add(&by.transpose().matmul(&wm).matmul(&by));

        // Centered differences do not see odd-even modes. Penalize them through the
        // gap between the compact and the wide Laplacian, which vanishes to O(h²)
        // on smooth data, at rows whose stencil stays inside the free nodes.
        let (dx, dy) = (grid.derivative(0), grid.derivative(1));
        let gap = grid.laplacian().add(&dx.matmul(dx).add(&dy.matmul(dy)).scale(-1.0));
        let inside: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&r| gap.row(r).all(|(c, _)| touched[c]))
            .collect();
        let hm = gap.select(&inside, &cols);
        let h2 = grid.spacing().powi(2);
        let hw: Vec<(usize, usize, f64)> = inside
            .iter()
            .enumerate()
            .map(|(i, &r)| (i, i, ODD_EVEN_PENALTY * h2 * w[r]))
            .collect();
        let hw = CsrMatrix::from_triplets(inside.len(), inside.len(), &hw);
        k = k.add(&hm.transpose().matmul(&hw).matmul(&hm));

        // Pin the first working node; the zero mean is restored after each solve.
        let pin = cols
            .iter()
            .position(|&c| c == rows[0])
            .expect("working nodes are stencil columns");
        let mut trip: Vec<_> = k
            .triplets()
            .into_iter()
            .filter(|&(r, c, _)| r != pin && c != pin)
            .collect();
        trip.push((pin, pin, 1.0));
        let lu = LuSolver::new(&CsrMatrix::from_triplets(cols.len(), cols.len(), &trip))?;
        Ok(Self {
            grid: grid.clone(),
            rows,
            cols,
            bx,
            by,
            lu,
            pin,
        })
    }

    /// Working nodes `S`.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Scalar stream function for the node-major pair `(w₁, w₂)`; zero off the
    /// stencil support.
    pub fn solve_scalar(&self, w1: &[f64], w2: &[f64]) -> Result<Vec<f64>> {
        let wt = self.grid.weights();
        let a: Vec<f64> = self.rows.iter().map(|&r| -wt[r] * w1[r]).collect();
        let b: Vec<f64> = self.rows.iter().map(|&r| wt[r] * w2[r]).collect();
        let mut rhs = self.by.transpose().matvec(&a);
        for (x, y) in rhs.iter_mut().zip(self.bx.transpose().matvec(&b)) {
            *x += y;
        }
        rhs[self.pin] = 0.0;
        let sol = self.lu.solve(&rhs, 1e-8)?;
        let mass: f64 = self.rows.iter().map(|&r| wt[r]).sum();
        let mut out = vec![0.0; self.grid.len()];
        for (i, &c) in self.cols.iter().enumerate() {
            out[c] = sol[i];
        }
        let mean = self.rows.iter().map(|&r| wt[r] * out[r]).sum::<f64>() / mass;
        for &c in &self.cols {
            out[c] -= mean;
        }
        Ok(out)
    }

    /// `‖div w‖ / ‖∇w‖` in `L²` over the working nodes, for node-major `1`-form
    /// data with `ncomp` components per slot.
    pub fn divergence_ratio(&self, w: &[Vec<f64>; 2], ncomp: usize) -> f64 {
        let g = &*self.grid;
        let mut div = derive(g, 0, &w[0], ncomp);
        for (x, y) in div.iter_mut().zip(derive(g, 1, &w[1], ncomp)) {
            *x += y;
        }
        let num = l2(g, &div, ncomp, &self.rows);
        let den = (0..2)
            .flat_map(|s| (0..2).map(move |axis| (s, axis)))
            .map(|(s, axis)| l2(g, &derive(g, axis, &w[s], ncomp), ncomp, &self.rows).powi(2))
            .sum::<f64>()
            .sqrt();
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Componentwise recovery for a `(rows, cols, 2)` field. Skew input gives skew
    /// output, solved on the upper triangle and mirrored.
    pub fn recover(&self, w: &Field, divergence_tol: f64) -> Result<Field> {
        let sh = w.shape();
        if sh.spatial != 2 {
            return Err(Error::ShapeMismatch {
                expected: "spatial arity 2".into(),
                found: sh.to_string(),
            });
        }
        if !Arc::ptr_eq(w.grid(), &self.grid) && w.grid().resolution() != self.grid.resolution() {
            return Err(Error::ShapeMismatch {
                expected: format!("grid of resolution {}", self.grid.resolution()),
                found: format!("grid of resolution {}", w.grid().resolution()),
            });
        }
        let out_shape = sh.with_spatial(1);
        let nc = out_shape.ncomp();
        let slots = [w.spatial_slot(0).into_data(), w.spatial_slot(1).into_data()];
        let ratio = self.divergence_ratio(&slots, nc);
        if ratio > divergence_tol {
            return Err(Error::DivergenceTooLarge {
                measured: ratio,
                tolerance: divergence_tol,
            });
        }
        let skew = w.structure() == Structure::Skew && sh.rows == sh.cols;
        let n = self.grid.len();
        let mut data = vec![0.0; n * nc];
        let comp = |s: usize, c: usize| -> Vec<f64> { (0..n).map(|k| slots[s][k * nc + c]).collect() };
        for r in 0..sh.rows {
            for c in 0..sh.cols {
                if skew && c <= r {
                    continue;
                }
                let idx = r * sh.cols + c;
                let xi = self.solve_scalar(&comp(0, idx), &comp(1, idx))?;
                for k in 0..n {
                    data[k * nc + idx] = xi[k];
                    if skew {
                        data[k * nc + c * sh.cols + r] = -xi[k];
                    }
                }
            }
        }
        let structure = if skew { Structure::Skew } else { Structure::General };
        Ok(Field::from_parts(self.grid.clone(), out_shape, structure, data))
    }
}

pub(crate) fn l2(g: &DiscGrid, data: &[f64], ncomp: usize, nodes: &[usize]) -> f64 {
    super::operator::l2_matrix(g, data, ncomp, nodes)
}

/// `ξ` with `∇⊥ξ ≈ w` and zero mean over `d`; rejects `w` whose relative
/// divergence exceeds `divergence_tol`.
pub fn vector_potential(w: &Field, d: &Disc, divergence_tol: f64) -> Result<Field> {
    PotentialSolver::new(w.grid(), d)?.recover(w, divergence_tol)
}
