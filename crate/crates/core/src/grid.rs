//! Uniform lattice over `[−1,1]²` with the unit disc embedded.
//!
//! Nodes come in three classes, stored in this order:
//! interior lattice nodes (`|x| < 1`), cut points on the unit circle where a lattice
//! arm from an interior node leaves the disc, and the remaining lattice nodes outside.
//! First derivatives are second-order nonuniform three-point differences at interior
//! nodes and weighted quadratic least-squares fits at cut points and at interior
//! nodes whose cut arm is very short.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

const INSIDE_EPS: f64 = 1e-10;
pub(crate) const MEMBER_EPS: f64 = 1e-12;
/// Interior nodes with a cut arm shorter than this fraction of the spacing take
/// their first derivatives from the least-squares fit instead of the three-point rule.
const SHORT_ARM: f64 = 0.5;
/// Minimum number of nodes for a disc to count as resolved.
pub const MIN_DISC_NODES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }
}

impl std::str::FromStr for NodeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(NodeClass::Interior),
            "boundary" => Ok(NodeClass::Boundary),
            "exterior" => Ok(NodeClass::Exterior),
            other => Err(Error::Snapshot(format!("unknown node class '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub x: [f64; 2],
    pub class: NodeClass,
    /// Polar angle, set for boundary nodes only.
    pub theta: Option<f64>,
}

/// One lattice arm of an interior node: the neighbouring node and the arm length
/// as a fraction of the spacing (`< 1` when the arm is cut by the circle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub node: usize,
    pub frac: f64,
}

/// Closed disc `B_r(a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disc {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disc radius must be positive (got {radius})"
            )));
        }
        if norm(center) >= 1.0 + radius {
            return Err(Error::DiscOutsideDomain {
                cx: center[0],
                cy: center[1],
                radius,
            });
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        dist(x, self.center) <= self.radius + MEMBER_EPS
    }

    /// Whether the disc lies in the closed unit disc.
    pub fn inside_unit(&self) -> bool {
        norm(self.center) + self.radius <= 1.0 + MEMBER_EPS
    }

    pub fn is_unit(&self) -> bool {
        self.center == [0.0, 0.0] && (self.radius - 1.0).abs() <= MEMBER_EPS
    }
}

pub(crate) fn norm(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug)]
pub struct DiscGrid {
    resolution: usize,
    spacing: f64,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    n_interior: usize,
    n_boundary: usize,
    /// Node index of lattice point `(i, j)` at `i * N + j`, `i` along x¹.
    lattice: Vec<usize>,
    lattice_of: Vec<Option<(usize, usize)>>,
    /// Arms of interior nodes in the order +x¹, −x¹, +x², −x².
    arms: Vec<[Arm; 4]>,
    dx: CsrMatrix,
    dy: CsrMatrix,
    laplacian: CsrMatrix,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl DiscGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 17 || resolution % 2 == 0 {
            return Err(Error::InvalidResolution(resolution));
        }
        let n = resolution;
        let h = 2.0 / (n - 1) as f64;
        let coord = |i: usize| -1.0 + h * i as f64;
        let is_inside = |i: usize, j: usize| coord(i).hypot(coord(j)) < 1.0 - INSIDE_EPS;

        let mut nodes = Vec::new();
        let mut lattice = vec![usize::MAX; n * n];
        let mut lattice_of = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if is_inside(i, j) {
                    lattice[i * n + j] = nodes.len();
                    nodes.push(Node {
                        x: [coord(i), coord(j)],
                        class: NodeClass::Interior,
                        theta: None,
                    });
                    lattice_of.push(Some((i, j)));
                }
            }
        }
        let n_interior = nodes.len();

        let mut cut_key: HashMap<(i64, i64), usize> = HashMap::new();
        let mut arms = Vec::with_capacity(n_interior);
        for k in 0..n_interior {
            let (i, j) = lattice_of[k].unwrap();
            let x0 = nodes[k].x;
            let mut node_arms = [Arm { node: 0, frac: 1.0 }; 4];
            for (d, &(di, dj)) in DIRS.iter().enumerate() {
                let ii = i as i64 + di;
                let jj = j as i64 + dj;
                let inside_nb =
                    ii >= 0 && jj >= 0 && (ii as usize) < n && (jj as usize) < n && is_inside(ii as usize, jj as usize);
                if inside_nb {
                    node_arms[d] = Arm {
                        node: lattice[ii as usize * n + jj as usize],
                        frac: 1.0,
                    };
                    continue;
                }
                // |x0 + t e| = 1 with t > 0.
                let e = [di as f64, dj as f64];
                let b = x0[0] * e[0] + x0[1] * e[1];
                let c = x0[0] * x0[0] + x0[1] * x0[1] - 1.0;
                let t = -b + (b * b - c).sqrt();
                let frac = (t / h).min(1.0);
                let p = [x0[0] + frac * h * e[0], x0[1] + frac * h * e[1]];
                let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
                let idx = *cut_key.entry(key).or_insert_with(|| {
                    nodes.push(Node {
                        x: p,
                        class: NodeClass::Boundary,
                        theta: Some(p[1].atan2(p[0])),
                    });
                    lattice_of.push(None);
                    nodes.len() - 1
                });
                node_arms[d] = Arm { node: idx, frac };
            }
            arms.push(node_arms);
        }
        let n_boundary = nodes.len() - n_interior;

        for i in 0..n {
            for j in 0..n {
                if !is_inside(i, j) {
                    lattice[i * n + j] = nodes.len();
                    nodes.push(Node {
                        x: [coord(i), coord(j)],
                        class: NodeClass::Exterior,
                        theta: None,
                    });
                    lattice_of.push(Some((i, j)));
                }
            }
        }

        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, node) in nodes.iter().enumerate().take(n_interior + n_boundary) {
            buckets.entry(bucket_of(node.x, h)).or_default().push(k);
        }

        let mut grid = DiscGrid {
            resolution,
            spacing: h,
            nodes,
            weights: Vec::new(),
            n_interior,
            n_boundary,
            lattice,
            lattice_of,
            arms,
            dx: CsrMatrix::zeros(0, 0),
            dy: CsrMatrix::zeros(0, 0),
            laplacian: CsrMatrix::zeros(0, 0),
            buckets,
        };
        grid.weights = grid.build_weights();
        grid.build_operators();
        Ok(grid)
    }

    fn build_weights(&self) -> Vec<f64> {
        let n = self.resolution;
        let h = self.spacing;
        let mut w = vec![0.0; self.nodes.len()];
        const SUB: usize = 4;
        for i in 0..n {
            for j in 0..n {
                let k = self.lattice[i * n + j];
                let c = self.nodes[k].x;
                if norm(c) > 1.0 + h {
                    continue;
                }
                let mut inside = 0usize;
                for a in 0..SUB {
                    for b in 0..SUB {
                        let px = c[0] + h * ((a as f64 + 0.5) / SUB as f64 - 0.5);
                        let py = c[1] + h * ((b as f64 + 0.5) / SUB as f64 - 0.5);
                        if px.hypot(py) < 1.0 {
                            inside += 1;
                        }
                    }
                }
                if inside == 0 {
                    continue;
                }
                let area = h * h * inside as f64 / (SUB * SUB) as f64;
                if self.nodes[k].class == NodeClass::Interior {
                    w[k] += area;
                } else if let Some(target) = self.nearest_interior_lattice(i, j) {
                    w[target] += area;
                }
            }
        }
        w
    }

    fn nearest_interior_lattice(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.resolution as i64;
        let c = self.nodes[self.lattice[i * self.resolution + j]].x;
        let mut best: Option<(f64, usize)> = None;
        for reach in 1..=3i64 {
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= n || jj >= n {
                        continue;
                    }
                    let k = self.lattice[(ii * n + jj) as usize];
                    if self.nodes[k].class != NodeClass::Interior {
                        continue;
                    }
                    let d = dist(self.nodes[k].x, c);
                    if best.map_or(true, |(bd, bk)| d < bd - 1e-14 || (d <= bd + 1e-14 && k < bk)) {
                        best = Some((d, k));
                    }
                }
            }
            if best.is_some() {
                break;
            }
        }
        best.map(|(_, k)| k)
    }

    fn build_operators(&mut self) {
        let h = self.spacing;
        let total = self.nodes.len();
        let mut tx = Vec::new();
        let mut ty = Vec::new();
        let mut tl = Vec::new();
        let mut fitted = Vec::new();
        for k in 0..self.n_interior {
            let arms = self.arms[k];
            if arms.iter().any(|a| a.frac < SHORT_ARM) {
                fitted.push(k);
            }
            for axis in 0..2 {
                let right = arms[2 * axis];
                let left = arms[2 * axis + 1];
                let (hr, hl) = (right.frac * h, left.frac * h);
                let den = hl * hr * (hl + hr);
                if arms.iter().all(|a| a.frac >= SHORT_ARM) {
                    let t = if axis == 0 { &mut tx } else { &mut ty };
                    t.push((k, left.node, -hr * hr / den));
                    t.push((k, k, (hr * hr - hl * hl) / den));
                    t.push((k, right.node, hl * hl / den));
                }
                tl.push((k, left.node, 2.0 / (hl * (hl + hr))));
                tl.push((k, k, -2.0 / (hl * hr)));
                tl.push((k, right.node, 2.0 / (hr * (hl + hr))));
            }
        }
        for b in fitted
            .into_iter()
            .chain(self.n_interior..self.n_interior + self.n_boundary)
        {
            let (idx, cx, cy) = self.gradient_fit(self.nodes[b].x, 2.2 * h);
            for (q, (vx, vy)) in idx.iter().zip(cx.iter().zip(cy.iter())) {
                tx.push((b, *q, *vx));
                ty.push((b, *q, *vy));
            }
        }
        self.dx = CsrMatrix::from_triplets(total, total, &tx);
        self.dy = CsrMatrix::from_triplets(total, total, &ty);
        self.laplacian = CsrMatrix::from_triplets(total, total, &tl);
    }

    /// Interior and boundary nodes within `radius` of `p`.
    pub(crate) fn nearby(&self, p: [f64; 2], radius: f64) -> Vec<usize> {
        let (bi, bj) = bucket_of(p, self.spacing);
        let reach = (radius / self.spacing).ceil() as i64 + 1;
        let mut out = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if let Some(list) = self.buckets.get(&(bi + di, bj + dj)) {
                    out.extend(list.iter().copied().filter(|&q| dist(self.nodes[q].x, p) <= radius));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Weighted quadratic least-squares fit around `p`; returns the node indices and
    /// the weights producing the fitted `(∂₁, ∂₂)` at `p`.
    fn gradient_fit(&self, p: [f64; 2], radius: f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        let idx = self.nearby(p, radius);
        let coef = self.fit_coefficients(p, &idx, true);
        let cx = (0..idx.len()).map(|q| coef[(1, q)]).collect();
        let cy = (0..idx.len()).map(|q| coef[(2, q)]).collect();
        (idx, cx, cy)
    }

    /// Rows of the pseudo-inverse of the Gaussian-weighted Vandermonde system
    /// (basis `1, dx, dy[, dx², dx dy, dy²]`), so that `coef · u` are the fitted
    /// polynomial coefficients.
    fn fit_coefficients(&self, p: [f64; 2], idx: &[usize], quadratic: bool) -> DMatrix<f64> {
        let h = self.spacing;
        let nb = if quadratic { 6 } else { 3 };
        let mut a = DMatrix::zeros(idx.len(), nb);
        let mut sw = DVector::zeros(idx.len());
        for (r, &q) in idx.iter().enumerate() {
            let dx = (self.nodes[q].x[0] - p[0]) / h;
            let dy = (self.nodes[q].x[1] - p[1]) / h;
            let w = (-(dx * dx + dy * dy)).exp().sqrt();
            sw[r] = w;
            let basis = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
            for c in 0..nb {
                a[(r, c)] = w * basis[c];
            }
        }
        let pinv = a.pseudo_inverse(1e-12).expect("pseudo-inverse of a small dense matrix");
        let mut coef = pinv;
        for r in 0..coef.nrows() {
            for c in 0..coef.ncols() {
                coef[(r, c)] *= sw[c];
            }
        }
        // Undo the 1/h scaling of the monomials.
        for c in 0..coef.ncols() {
            coef[(1, c)] /= h;
            coef[(2, c)] /= h;
        }
        coef
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        0..self.n_interior
    }

    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.n_interior..self.n_interior + self.n_boundary
    }

    pub fn arms(&self, k: usize) -> &[Arm; 4] {
        &self.arms[k]
    }

    pub fn lattice_node(&self, i: usize, j: usize) -> usize {
        self.lattice[i * self.resolution + j]
    }

    pub fn lattice_position(&self, k: usize) -> Option<(usize, usize)> {
        self.lattice_of[k]
    }

    /// First-derivative operator along `x¹` (`axis = 0`) or `x²` (`axis = 1`).
    pub fn derivative(&self, axis: usize) -> &CsrMatrix {
        match axis {
            0 => &self.dx,
            1 => &self.dy,
            _ => panic!("axis must be 0 or 1"),
        }
    }

    /// Compact Shortley–Weller Laplacian; rows are nonzero at interior nodes only.
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Interior nodes whose centers lie in the closed disc.
    pub fn nodes_in(&self, d: &Disc) -> Vec<usize> {
        let h = self.spacing;
        let n = self.resolution as i64;
        let lo = |c: f64| (((c - d.radius + 1.0) / h).floor() as i64).clamp(0, n - 1);
        let hi = |c: f64| (((c + d.radius + 1.0) / h).ceil() as i64).clamp(0, n - 1);
        let mut out = Vec::new();
        for i in lo(d.center[0])..=hi(d.center[0]) {
            for j in lo(d.center[1])..=hi(d.center[1]) {
                let k = self.lattice[(i * n + j) as usize];
                if k < self.n_interior && d.contains(self.nodes[k].x) {
                    out.push(k);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Like [`DiscGrid::nodes_in`] but rejects discs with fewer than
    /// [`MIN_DISC_NODES`] nodes.
    pub fn resolved_nodes(&self, d: &Disc) -> Result<Vec<usize>> {
        let nodes = self.nodes_in(d);
        if nodes.len() < MIN_DISC_NODES {
            return Err(Error::DiscUnresolved {
                cx: d.center[0],
                cy: d.center[1],
                radius: d.radius,
                nodes: nodes.len(),
                min: MIN_DISC_NODES,
            });
        }
        Ok(nodes)
    }

    /// Interpolates node data with `ncomp` interleaved components at `p`.
    ///
    /// Bilinear when the four surrounding lattice nodes are interior; otherwise a
    /// Gaussian-weighted linear fit over interior and boundary nodes nearby.
    pub fn interpolate(&self, data: &[f64], ncomp: usize, p: [f64; 2]) -> Vec<f64> {
        let h = self.spacing;
        let n = self.resolution;
        let fi = ((p[0] + 1.0) / h).floor();
        let fj = ((p[1] + 1.0) / h).floor();
        if fi >= 0.0 && fj >= 0.0 && (fi as usize) + 1 < n && (fj as usize) + 1 < n {
            let (i, j) = (fi as usize, fj as usize);
            let corners = [
                self.lattice_node(i, j),
                self.lattice_node(i + 1, j),
                self.lattice_node(i, j + 1),
                self.lattice_node(i + 1, j + 1),
            ];
            if corners.iter().all(|&k| k < self.n_interior) {
                let s = (p[0] - self.nodes[corners[0]].x[0]) / h;
                let t = (p[1] - self.nodes[corners[0]].x[1]) / h;
                let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
                return (0..ncomp)
                    .map(|c| corners.iter().zip(w).map(|(&k, w)| w * data[k * ncomp + c]).sum())
                    .collect();
            }
        }
        let idx = self.nearby(p, 2.2 * h);
        let coef = self.fit_coefficients(p, &idx, false);
        (0..ncomp)
            .map(|c| {
                idx.iter()
                    .enumerate()
                    .map(|(q, &k)| coef[(0, q)] * data[k * ncomp + c])
                    .sum()
            })
            .collect()
    }

    /// Interpolated value and gradient at `p` from a local linear fit; used where
    /// slices cross the lattice at arbitrary angles.
    pub fn interpolate_gradient(&self, data: &[f64], ncomp: usize, p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let idx = self.nearby(p, 2.2 * self.spacing);
        let coef = self.fit_coefficients(p, &idx, true);
        let mut val = vec![0.0; ncomp];
        let mut grad = vec![[0.0; 2]; ncomp];
        for (q, &k) in idx.iter().enumerate() {
            for c in 0..ncomp {
                let v = data[k * ncomp + c];
                val[c] += coef[(0, q)] * v;
                grad[c][0] += coef[(1, q)] * v;
                grad[c][1] += coef[(2, q)] * v;
            }
        }
        (val, grad)
    }
}

fn bucket_of(x: [f64; 2], h: f64) -> (i64, i64) {
    (((x[0] + 1.0) / h).round() as i64, ((x[1] + 1.0) / h).round() as i64)
}

/// Builds the disc grid at the given resolution.
pub fn build_grid(resolution: usize) -> Result<DiscGrid> {
    DiscGrid::new(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolutions() {
        for n in [15, 16, 18] {
            let err = build_grid(n).unwrap_err();
            assert!(err.to_string().contains("resolution must be odd ≥ 17"));
        }
    }

    #[test]
    fn classification_and_theta() {
        let g = build_grid(33).unwrap();
        let h = g.spacing();
        for (k, node) in g.nodes().iter().enumerate() {
            match node.class {
                NodeClass::Interior => assert!(norm(node.x) < 1.0 && k < g.n_interior()),
                NodeClass::Boundary => {
                    assert!((norm(node.x) - 1.0).abs() <= h);
                    let th = node.theta.unwrap();
                    assert!((th.cos() - node.x[0]).abs() < 1e-12 && (th.sin() - node.x[1]).abs() < 1e-12);
                }
                NodeClass::Exterior => assert!(norm(node.x) >= 1.0 - 1e-10),
            }
        }
        let origin = g.lattice_node(16, 16);
        assert_eq!(g.node(origin).x, [0.0, 0.0]);
    }

    #[test]
    fn interior_count_matches_area_ratio() {
        let g = build_grid(65).unwrap();
        let expect = std::f64::consts::FRAC_PI_4 * 65.0 * 65.0;
        assert!((g.n_interior() as f64 - expect).abs() / expect < 0.05);
    }

    #[test]
    fn total_weight_approximates_pi() {
        let pi = std::f64::consts::PI;
        let g = build_grid(17).unwrap();
        assert!((g.total_weight() - pi).abs() / pi < 0.12);
        for n in [33, 65, 129] {
            let g = build_grid(n).unwrap();
            assert!((g.total_weight() - pi).abs() / pi <= 2.0 / n as f64, "n = {n}");
        }
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let g = build_grid(33).unwrap();
        let u: Vec<f64> = g
            .nodes()
            .iter()
            .map(|n| 1.0 + 2.0 * n.x[0] - n.x[1] + n.x[0] * n.x[1] + n.x[1] * n.x[1])
            .collect();
        let ux = g.derivative(0).matvec(&u);
        let uy = g.derivative(1).matvec(&u);
        let lap = g.laplacian().matvec(&u);
        for k in 0..g.n_interior() + g.n_boundary() {
            let [x, y] = g.node(k).x;
            assert!((ux[k] - (2.0 + y)).abs() < 1e-9, "dx at {k}");
            assert!((uy[k] - (-1.0 + x + 2.0 * y)).abs() < 1e-9, "dy at {k}");
            if k < g.n_interior() {
                assert!((lap[k] - 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = build_grid(33).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|n| 3.0 * n.x[0] - n.x[1]).collect();
        for p in [[0.1, 0.2], [0.0, 0.97], [-0.6, -0.75]] {
            let v = g.interpolate(&u, 1, p)[0];
            assert!((v - (3.0 * p[0] - p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn nodes_in_uses_center_inclusion() {
        let g = build_grid(33).unwrap();
        let d = Disc::new([0.0, 0.0], 0.25).unwrap();
        for k in g.nodes_in(&d) {
            assert!(norm(g.node(k).x) <= 0.25 + 1e-12);
        }
        assert!(g.resolved_nodes(&Disc::new([0.0, 0.0], 0.01).unwrap()).is_err());
    }
}
