//! Uniform grids over the rectangular mid-surface, thickness quadrature and nodal fields.

mod dofs;
mod ops;
pub mod snapshot;

pub use dofs::*;
pub use ops::*;

use crate::tensor::Sym2;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Quadrature in x₃ on (−½, ½).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThicknessRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ThicknessRule {
    /// n-point Gauss–Legendre rule, 2 ≤ n ≤ 8.
    pub fn gauss(n: usize) -> Result<Self> {
        if !(2..=8).contains(&n) {
            return Err(Error::validation("layers-count", "geometry.layers", format!("{n} layers requested, expected 2..=8")));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes.push(-x / 2.0);
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        Self::custom(nodes, weights)
    }

    pub fn custom(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let loc = "geometry.layers";
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::validation("layers-shape", loc, "nodes and weights must be non-empty and of equal length"));
        }
        if nodes.iter().any(|x| !(x.abs() < 0.5)) || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::validation("layers-range", loc, "nodes must lie in (-1/2, 1/2) with positive weights"));
        }
        let s0: f64 = weights.iter().sum();
        let s2: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let s1: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x).sum();
        if (s0 - 1.0).abs() > 1e-12 || (s2 - 1.0 / 12.0).abs() > 1e-12 || s1.abs() > 1e-12 {
            return Err(Error::validation(
                "moment-exactness",
                loc,
                format!("need sum w = 1, sum w x = 0, sum w x^2 = 1/12; got {s0}, {s1}, {s2}"),
            ));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
        Ok(ThicknessRule {
            nodes: order.iter().map(|&k| nodes[k]).collect(),
            weights: order.iter().map(|&k| weights[k]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// x₁ = 0
    Left,
    /// x₁ = Lx
    Right,
    /// x₂ = 0
    Bottom,
    /// x₂ = Ly
    Top,
}

/// Which edges belong to γ_d.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMask {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl EdgeMask {
    pub fn all() -> Self {
        EdgeMask { left: true, right: true, bottom: true, top: true }
    }

    pub fn from_edges(edges: &[Edge]) -> Self {
        let mut m = EdgeMask::default();
        for e in edges {
            match e {
                Edge::Left => m.left = true,
                Edge::Right => m.right = true,
                Edge::Bottom => m.bottom = true,
                Edge::Top => m.top = true,
            }
        }
        m
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut v = Vec::new();
        if self.left {
            v.push(Edge::Left);
        }
        if self.right {
            v.push(Edge::Right);
        }
        if self.bottom {
            v.push(Edge::Bottom);
        }
        if self.top {
            v.push(Edge::Top);
        }
        v
    }

    pub fn any(&self) -> bool {
        self.left || self.right || self.bottom || self.top
    }
}

/// Uniform node grid on [0, Lx] × [0, Ly] with `nx × ny` interior nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateGrid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    layers: ThicknessRule,
    dirichlet: EdgeMask,
}

impl PlateGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, layers: ThicknessRule, dirichlet: EdgeMask) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::validation("geometry-size", "geometry", format!("side lengths must be positive, got {lx} x {ly}")));
        }
        if nx < 1 || ny < 1 {
            return Err(Error::validation("geometry-nodes", "geometry", "at least one interior node per direction"));
        }
        if !dirichlet.any() {
            return Err(Error::validation("gamma_d-nonempty", "geometry.dirichlet", "at least one clamped edge is required"));
        }
        Ok(PlateGrid { lx, ly, nx, ny, layers, dirichlet })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn layers(&self) -> &ThicknessRule {
        &self.layers
    }
    pub fn nlayers(&self) -> usize {
        self.layers.len()
    }
    pub fn dirichlet(&self) -> EdgeMask {
        self.dirichlet
    }

    pub fn with_layers(&self, layers: ThicknessRule) -> Self {
        PlateGrid { layers, ..self.clone() }
    }

    pub fn with_nodes(&self, nx: usize, ny: usize) -> Result<Self> {
        PlateGrid::new(self.lx, self.ly, nx, ny, self.layers.clone(), self.dirichlet)
    }

    /// Node counts per direction, boundary included.
    pub fn mx(&self) -> usize {
        self.nx + 2
    }
    pub fn my(&self) -> usize {
        self.ny + 2
    }
    pub fn n_nodes(&self) -> usize {
        self.mx() * self.my()
    }
    pub fn hx(&self) -> f64 {
        self.lx / (self.nx + 1) as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / (self.ny + 1) as f64
    }
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.mx() + i
    }
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.mx(), n / self.mx())
    }
    pub fn x(&self, i: isize) -> f64 {
        i as f64 * self.hx()
    }
    pub fn y(&self, j: isize) -> f64 {
        j as f64 * self.hy()
    }
    pub fn point(&self, n: usize) -> (f64, f64) {
        let (i, j) = self.coords(n);
        (self.x(i as isize), self.y(j as isize))
    }

    /// Padded grid with one ghost ring.
    pub fn pmx(&self) -> usize {
        self.mx() + 2
    }
    pub fn pmy(&self) -> usize {
        self.my() + 2
    }
    pub fn n_padded(&self) -> usize {
        self.pmx() * self.pmy()
    }
    /// Padded index of physical-grid position (i, j), with −1 ≤ i ≤ mx.
    pub fn padded(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * self.pmx() + (i + 1) as usize
    }
    pub fn padded_coords(&self, k: usize) -> (isize, isize) {
        ((k % self.pmx()) as isize - 1, (k / self.pmx()) as isize - 1)
    }
    pub fn is_physical(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.mx() && (j as usize) < self.my()
    }

    /// Trapezoidal weight in one direction.
    fn w1(i: usize, m: usize, h: f64) -> f64 {
        if i == 0 || i + 1 == m {
            0.5 * h
        } else {
            h
        }
    }

    pub fn node_weight(&self, n: usize) -> f64 {
        let (i, j) = self.coords(n);
        Self::w1(i, self.mx(), self.hx()) * Self::w1(j, self.my(), self.hy())
    }

    pub fn node_weights(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|n| self.node_weight(n)).collect()
    }

    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.mx() || j + 1 == self.my()
    }

    /// Boundary distance in grid steps.
    pub fn depth(&self, i: usize, j: usize) -> usize {
        i.min(j).min(self.mx() - 1 - i).min(self.my() - 1 - j)
    }

    /// Whether the physical node lies on a clamped edge.
    pub fn is_clamped(&self, i: usize, j: usize) -> bool {
        let d = self.dirichlet;
        (d.left && i == 0) || (d.right && i + 1 == self.mx()) || (d.bottom && j == 0) || (d.top && j + 1 == self.my())
    }

    pub fn check_len(&self, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::ShapeMismatch { expected, got });
        }
        Ok(())
    }
}

/// Values at the physical nodes of a grid, node index `j*mx + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeField<T> {
    pub values: Vec<T>,
}

pub type ScalarField = NodeField<f64>;
pub type VecField = NodeField<[f64; 2]>;
pub type Sym2Field = NodeField<Sym2>;

impl<T: Clone + Default> NodeField<T> {
    pub fn zeros(grid: &PlateGrid) -> Self {
        NodeField { values: vec![T::default(); grid.n_nodes()] }
    }

    pub fn from_fn(grid: &PlateGrid, f: impl Fn(f64, f64) -> T) -> Self {
        NodeField { values: (0..grid.n_nodes()).map(|n| {
            let (x, y) = grid.point(n);
            f(x, y)
        }).collect() }
    }

    pub fn check(&self, grid: &PlateGrid) -> Result<()> {
        grid.check_len(grid.n_nodes(), self.values.len())
    }
}

/// Scalar values on the padded grid (physical nodes plus one ghost ring).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaddedField {
    pub values: Vec<f64>,
}

impl PaddedField {
    pub fn zeros(grid: &PlateGrid) -> Self {
        PaddedField { values: vec![0.0; grid.n_padded()] }
    }

    pub fn from_fn(grid: &PlateGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        PaddedField { values: (0..grid.n_padded()).map(|k| {
            let (i, j) = grid.padded_coords(k);
            f(grid.x(i), grid.y(j))
        }).collect() }
    }

    pub fn at(&self, grid: &PlateGrid, i: isize, j: isize) -> f64 {
        self.values[grid.padded(i, j)]
    }

    pub fn physical(&self, grid: &PlateGrid) -> ScalarField {
        NodeField { values: (0..grid.n_nodes()).map(|n| {
            let (i, j) = grid.coords(n);
            self.at(grid, i as isize, j as isize)
        }).collect() }
    }

    pub fn check(&self, grid: &PlateGrid) -> Result<()> {
        grid.check_len(grid.n_padded(), self.values.len())
    }
}

/// Sym2 values per (node, layer), index `node*nlayers + layer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredField {
    pub nlayers: usize,
    pub values: Vec<Sym2>,
}

impl LayeredField {
    pub fn zeros(grid: &PlateGrid) -> Self {
        LayeredField { nlayers: grid.nlayers(), values: vec![Sym2::ZERO; grid.n_nodes() * grid.nlayers()] }
    }

    pub fn from_fn(grid: &PlateGrid, f: impl Fn(f64, f64, f64) -> Sym2) -> Self {
        let nl = grid.nlayers();
        let mut values = Vec::with_capacity(grid.n_nodes() * nl);
        for n in 0..grid.n_nodes() {
            let (x, y) = grid.point(n);
            for &z in grid.layers().nodes() {
                values.push(f(x, y, z));
            }
        }
        LayeredField { nlayers: nl, values }
    }

    pub fn at(&self, node: usize, layer: usize) -> Sym2 {
        self.values[node * self.nlayers + layer]
    }

    pub fn check(&self, grid: &PlateGrid) -> Result<()> {
        grid.check_len(grid.nlayers(), self.nlayers)?;
        grid.check_len(grid.n_nodes() * grid.nlayers(), self.values.len())
    }

    pub fn max_norm_r(&self) -> f64 {
        self.values.iter().map(crate::tensor::norm_r).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|s| s.is_finite())
    }

    pub fn zip_map(&self, other: &LayeredField, f: impl Fn(&Sym2, &Sym2) -> Sym2) -> LayeredField {
        LayeredField { nlayers: self.nlayers, values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn map(&self, f: impl Fn(&Sym2) -> Sym2) -> LayeredField {
        LayeredField { nlayers: self.nlayers, values: self.values.iter().map(f).collect() }
    }
}

/// Kirchhoff–Love displacement (ū, u₃); u₃ carries its ghost ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KLDisplacement {
    pub ubar: VecField,
    pub u3: PaddedField,
}

impl KLDisplacement {
    pub fn zeros(grid: &PlateGrid) -> Self {
        KLDisplacement { ubar: VecField::zeros(grid), u3: PaddedField::zeros(grid) }
    }

    pub fn from_fns(grid: &PlateGrid, ubar: impl Fn(f64, f64) -> [f64; 2], u3: impl Fn(f64, f64) -> f64) -> Self {
        KLDisplacement { ubar: VecField::from_fn(grid, ubar), u3: PaddedField::from_fn(grid, u3) }
    }

    pub fn check(&self, grid: &PlateGrid) -> Result<()> {
        self.ubar.check(grid)?;
        self.u3.check(grid)
    }

    pub fn is_finite(&self) -> bool {
        self.ubar.values.iter().all(|v| v[0].is_finite() && v[1].is_finite()) && self.u3.values.iter().all(|v| v.is_finite())
    }
}
