//! Implicit-Euler incremental minimization with the two-step inertial quotient for u₃.

mod evolve;
mod stepper;

pub use evolve::*;
pub use stepper::*;

use crate::grid::{pad_by_extrapolation, KLDisplacement, LayeredField, PaddedField, PlateGrid, ScalarField, VecField};
use crate::grid::snapshot::{Block, Snapshot};
use crate::material::{apply_a, Elasticity, RETURN_TOL};
use crate::potentials::TruncationParams;
use crate::tensor::Sym2;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::validation("T>0", "time.T", format!("horizon {horizon}")));
        }
        if steps < 2 {
            return Err(Error::validation("k>=2", "time.k", format!("{steps} steps")));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }
    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.delta()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    Cholesky,
    Cg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// last converged displacement
    #[default]
    Previous,
    /// linear extrapolation of u₃ from the last two slices
    Extrapolated,
    Zero,
    /// previous displacement, with the first Newton step taken on the elastic tangent
    ElasticPredictor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// residual tolerance, relative to the load scale
    pub tol: f64,
    /// increment tolerance, relative to 1 + ‖u‖∞
    pub inc_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub linear: LinearSolverKind,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub guess: InitialGuess,
    pub reverse_ordering: bool,
    pub return_tol: f64,
    /// snapshot stride for stored trajectories (0 keeps only the endpoints)
    pub stride: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            inc_tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            linear: LinearSolverKind::Cholesky,
            cg_tol: 1e-14,
            cg_max_iter: 20_000,
            guess: InitialGuess::Previous,
            reverse_ordering: false,
            return_tol: RETURN_TOL,
            stride: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let loc = "solver";
        if !(self.tol > 0.0 && self.inc_tol > 0.0 && self.return_tol > 0.0 && self.cg_tol > 0.0) {
            return Err(Error::validation("tol>0", loc, "tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter>0", loc, "at least one Newton iteration"));
        }
        Ok(())
    }
}

/// Time-sampled data: loads f, g, boundary datum w and safe-load stress ϱ.
pub trait Forcing: Send + Sync {
    fn f(&self, grid: &PlateGrid, i: usize, t: f64) -> VecField;
    fn g(&self, grid: &PlateGrid, i: usize, t: f64) -> ScalarField;
    /// w on the padded grid; only its values on γ_d and the clamped ghost ring enter the scheme.
    fn w(&self, grid: &PlateGrid, i: usize, t: f64) -> KLDisplacement;
    fn rho(&self, grid: &PlateGrid, i: usize, t: f64) -> LayeredField;
}

pub type VecFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type StressFn = Arc<dyn Fn(f64, f64, f64, f64) -> Sym2 + Send + Sync>;

/// Closed-form data in (x₁, x₂, t), with ϱ in (x₁, x₂, x₃, t).
#[derive(Clone)]
pub struct AnalyticForcing {
    pub f: VecFn,
    pub g: ScalarFn,
    pub wbar: VecFn,
    pub w3: ScalarFn,
    pub rho: StressFn,
}

impl AnalyticForcing {
    pub fn zero() -> Self {
        AnalyticForcing {
            f: Arc::new(|_, _, _| [0.0, 0.0]),
            g: Arc::new(|_, _, _| 0.0),
            wbar: Arc::new(|_, _, _| [0.0, 0.0]),
            w3: Arc::new(|_, _, _| 0.0),
            rho: Arc::new(|_, _, _, _| Sym2::ZERO),
        }
    }
}

impl Forcing for AnalyticForcing {
    fn f(&self, grid: &PlateGrid, _i: usize, t: f64) -> VecField {
        VecField::from_fn(grid, |x, y| (self.f)(x, y, t))
    }
    fn g(&self, grid: &PlateGrid, _i: usize, t: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| (self.g)(x, y, t))
    }
    fn w(&self, grid: &PlateGrid, _i: usize, t: f64) -> KLDisplacement {
        KLDisplacement::from_fns(grid, |x, y| (self.wbar)(x, y, t), |x, y| (self.w3)(x, y, t))
    }
    fn rho(&self, grid: &PlateGrid, _i: usize, t: f64) -> LayeredField {
        LayeredField::from_fn(grid, |x, y, z| (self.rho)(x, y, z, t))
    }
}

/// Per-step sampled data; step `i` uses entry `min(i, len − 1)`.
#[derive(Clone, Debug)]
pub struct TabulatedForcing {
    pub f: Vec<VecField>,
    pub g: Vec<ScalarField>,
    pub w: Vec<KLDisplacement>,
    pub rho: Vec<LayeredField>,
}

fn pick<T: Clone>(v: &[T], i: usize) -> T {
    v[i.min(v.len() - 1)].clone()
}

impl Forcing for TabulatedForcing {
    fn f(&self, _grid: &PlateGrid, i: usize, _t: f64) -> VecField {
        pick(&self.f, i)
    }
    fn g(&self, _grid: &PlateGrid, i: usize, _t: f64) -> ScalarField {
        pick(&self.g, i)
    }
    fn w(&self, _grid: &PlateGrid, i: usize, _t: f64) -> KLDisplacement {
        pick(&self.w, i)
    }
    fn rho(&self, _grid: &PlateGrid, i: usize, _t: f64) -> LayeredField {
        pick(&self.rho, i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub u0: KLDisplacement,
    pub sigma0: LayeredField,
    pub v0: ScalarField,
}

impl InitialData {
    pub fn rest(grid: &PlateGrid, w0: &KLDisplacement) -> Self {
        InitialData { u0: w0.clone(), sigma0: LayeredField::zeros(grid), v0: ScalarField::zeros(grid) }
    }
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: PlateGrid,
    pub elasticity: Elasticity,
    pub trunc: TruncationParams,
    pub time: TimeGrid,
    pub gamma_safe: f64,
    pub forcing: Arc<dyn Forcing>,
    pub init: InitialData,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("elasticity", &self.elasticity)
            .field("trunc", &self.trunc)
            .field("time", &self.time)
            .field("gamma_safe", &self.gamma_safe)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn with_trunc(&self, trunc: TruncationParams) -> Self {
        Scenario { trunc, ..self.clone() }
    }

    pub fn with_time(&self, time: TimeGrid) -> Self {
        Scenario { time, ..self.clone() }
    }

    pub fn alpha0(&self) -> f64 {
        self.trunc.alpha0()
    }
}

/// One time slice and the two u₃ history slices feeding the inertial quotient.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateState {
    pub step: usize,
    pub time: f64,
    pub u: KLDisplacement,
    pub p: LayeredField,
    pub sigma: LayeredField,
    pub e: LayeredField,
    pub u3_prev: PaddedField,
    pub u3_prev2: PaddedField,
}

impl PlateState {
    /// (u₃ⁱ − u₃ⁱ⁻¹)/δ at physical nodes.
    pub fn velocity(&self, grid: &PlateGrid, dt: f64) -> ScalarField {
        let a = self.u.u3.physical(grid);
        let b = self.u3_prev.physical(grid);
        ScalarField { values: a.values.iter().zip(&b.values).map(|(x, y)| (x - y) / dt).collect() }
    }

    /// (u₃ⁱ − 2u₃ⁱ⁻¹ + u₃ⁱ⁻²)/δ² at physical nodes.
    pub fn acceleration(&self, grid: &PlateGrid, dt: f64) -> ScalarField {
        let a = self.u.u3.physical(grid);
        let b = self.u3_prev.physical(grid);
        let c = self.u3_prev2.physical(grid);
        ScalarField {
            values: (0..a.values.len()).map(|n| (a.values[n] - 2.0 * b.values[n] + c.values[n]) / (dt * dt)).collect(),
        }
    }
}

impl PlateState {
    /// Blocks ubar, u3, u3_prev, u3_prv2, sigma, p and e.
    pub fn snapshot(&self, grid: &PlateGrid) -> Snapshot {
        let (t, i) = (self.time, self.step as u64);
        Snapshot {
            blocks: vec![
                Block::vector(grid, "ubar", &self.u.ubar, t, i),
                Block::padded_scalar(grid, "u3", &self.u.u3, t, i),
                Block::padded_scalar(grid, "u3_prev", &self.u3_prev, t, i),
                Block::padded_scalar(grid, "u3_prv2", &self.u3_prev2, t, i),
                Block::layered(grid, "sigma", &self.sigma, t, i),
                Block::layered(grid, "p", &self.p, t, i),
                Block::layered(grid, "e", &self.e, t, i),
            ],
        }
    }
}

/// The i = 0 state with the synthetic slices u₃⁻¹ = u₃⁰ − δv₀ and u₃⁻² = u₃⁻¹ − δv₀.
pub fn seed_history(s: &Scenario) -> Result<PlateState> {
    let g = &s.grid;
    s.init.u0.check(g)?;
    s.init.sigma0.check(g)?;
    s.init.v0.check(g)?;
    if !s.init.u0.is_finite() || !s.init.sigma0.is_finite() || s.init.v0.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("init-finite", "init", "initial data must be finite"));
    }
    let dt = s.time.delta();
    let eu = crate::grid::kl_strain(&s.init.u0, g)?;
    let e = s.init.sigma0.map(|x| apply_a(x, &s.elasticity));
    let p = eu.zip_map(&e, |a, b| *a - *b);
    let vpad = pad_by_extrapolation(&s.init.v0, g)?;
    let shift = |u: &PaddedField| PaddedField { values: u.values.iter().zip(&vpad.values).map(|(a, v)| a - dt * v).collect() };
    let u3_prev = shift(&s.init.u0.u3);
    let u3_prev2 = shift(&u3_prev);
    Ok(PlateState { step: 0, time: 0.0, u: s.init.u0.clone(), p, sigma: s.init.sigma0.clone(), e, u3_prev, u3_prev2 })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::{Edge, EdgeMask, ThicknessRule};
    use crate::material::apply_c;

    pub(crate) fn small_scenario() -> Scenario {
        let grid = PlateGrid::new(1.0, 1.0, 3, 3, ThicknessRule::gauss(2).unwrap(), EdgeMask::from_edges(&[Edge::Left])).unwrap();
        let w0 = KLDisplacement::zeros(&grid);
        Scenario {
            name: "t".into(),
            init: InitialData::rest(&grid, &w0),
            grid,
            elasticity: Elasticity::new(1.0, 0.5).unwrap(),
            trunc: TruncationParams::from_parts(4, 1.0, 2.0).unwrap(),
            time: TimeGrid::new(1.0, 10).unwrap(),
            gamma_safe: 0.1,
            forcing: Arc::new(AnalyticForcing::zero()),
        }
    }

    #[test]
    fn time_grid() {
        let t = TimeGrid::new(2.0, 8).unwrap();
        assert_eq!(t.delta(), 0.25);
        assert_eq!(t.t(3), 0.75);
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn seeding_examples() {
        let mut s = small_scenario();
        let h = seed_history(&s).unwrap();
        assert_eq!(h.u3_prev, h.u.u3);
        assert_eq!(h.u3_prev2, h.u.u3);
        s.init.v0 = ScalarField::from_fn(&s.grid, |_, _| 0.7);
        let h = seed_history(&s).unwrap();
        let acc = h.acceleration(&s.grid, s.time.delta());
        assert!(acc.values.iter().all(|a| a.abs() < 1e-10));
        let v = h.velocity(&s.grid, s.time.delta());
        assert!(v.values.iter().all(|a| (a - 0.7).abs() < 1e-12));
        // σ₀ = C E u₀ gives p₀ = 0
        s.init.u0 = KLDisplacement::from_fns(&s.grid, |x, y| [0.1 * x * y, -0.2 * x], |x, y| 0.05 * x * x - 0.1 * y * y);
        let eu = crate::grid::kl_strain(&s.init.u0, &s.grid).unwrap();
        s.init.sigma0 = eu.map(|x| apply_c(x, &s.elasticity));
        let h = seed_history(&s).unwrap();
        assert!(h.p.values.iter().all(|p| p.max_abs() < 1e-14));
    }
}
