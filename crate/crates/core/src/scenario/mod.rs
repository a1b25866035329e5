//! JSON configuration, analytic load presets, validation and the builtin scenarios.

mod presets;

pub use presets::*;

use crate::diagnostics::{static_equilibrium, RegularityProbe};
use crate::grid::{
    hessian_transpose, snapshot::Snapshot, DofMap, Edge, EdgeMask, KLDisplacement, LayeredField, PaddedField, PlateGrid, ScalarField, Sym2Field, ThicknessRule, VecField,
};
use crate::material::Elasticity;
use crate::potentials::TruncationParams;
use crate::solver::{AnalyticForcing, Forcing, InitialData, Scenario, SolverOptions, StepData, TabulatedForcing, TimeGrid};
use crate::tensor::Sym2;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::sync::Arc;

/// Scalar time factor multiplying a spatial load pattern.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    #[default]
    Constant,
    /// smoothstep from 0 to 1 over [0, duration], then held
    Ramp { duration: f64 },
    Harmonic { omega: f64, #[serde(default)] phase: f64 },
    /// sin²(πt/duration) on [0, duration], zero afterwards
    Pulse { duration: f64 },
    Linear { rate: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Ramp { duration } => {
                let s = (t / duration).clamp(0.0, 1.0);
                s * s * (3.0 - 2.0 * s)
            }
            TimeProfile::Harmonic { omega, phase } => (omega * t + phase).sin(),
            TimeProfile::Pulse { duration } => {
                if (0.0..=duration).contains(&t) {
                    (std::f64::consts::PI * t / duration).sin().powi(2)
                } else {
                    0.0
                }
            }
            TimeProfile::Linear { rate } => rate * t,
        }
    }

    fn validate(&self, loc: &str) -> Result<()> {
        let bad = match *self {
            TimeProfile::Ramp { duration } | TimeProfile::Pulse { duration } => !(duration > 0.0 && duration.is_finite()),
            TimeProfile::Harmonic { omega, phase } => !(omega.is_finite() && phase.is_finite()),
            TimeProfile::Linear { rate } => !rate.is_finite(),
            TimeProfile::Constant => false,
        };
        if bad {
            return Err(Error::validation("profile-params", loc, format!("invalid time profile {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FPreset {
    #[default]
    Zero,
    Uniform { f1: f64, #[serde(default)] f2: f64, #[serde(default)] profile: TimeProfile },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GPreset {
    #[default]
    Zero,
    Uniform { g0: f64, #[serde(default)] profile: TimeProfile },
    /// g = discrete amp·Δφ with φ = exp(−|x − center|²/width²): zero net force, ring-shaped
    Ring { amp: f64, center: [f64; 2], width: f64, #[serde(default)] profile: TimeProfile },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WPreset {
    #[default]
    Zero,
    /// w̄ = G·x, w₃ = ½(k₁₁x₁² + k₂₂x₂²) + k₁₂x₁x₂, both times the profile
    Linear {
        #[serde(default)]
        grad: [[f64; 2]; 2],
        #[serde(default)]
        curvature: [f64; 3],
        #[serde(default)]
        profile: TimeProfile,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoPreset {
    /// closed-form equilibrated field for the f and g presets and the clamp layout
    #[default]
    Auto,
    Zero,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitPreset {
    /// u₀ = w(0), σ₀ = 0, v₀ = 0
    #[default]
    Rest,
    /// u₀ = w(0), σ₀ = ϱ(0), v₀ = 0
    Prestress,
    /// u₀ = w(0), σ₀ = 0, v₀ = amp·sin(πx₁/L₁)sin(πx₂/L₂)
    Velocity { amp: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayersConfig {
    Gauss(usize),
    Custom { nodes: Vec<f64>, weights: Vec<f64> },
}

impl Default for LayersConfig {
    fn default() -> Self {
        LayersConfig::Gauss(4)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub lx: f64,
    pub ly: f64,
    /// interior node counts
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub layers: LayersConfig,
    pub clamped: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub mu: f64,
    #[serde(default)]
    pub ell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldConfig {
    pub alpha0: f64,
    pub n: u32,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub k: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadsConfig {
    pub f: FPreset,
    pub g: GPreset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// fraction of each side covered by the centered probe rectangle
    pub fraction: f64,
    pub offsets: Vec<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { fraction: 0.5, offsets: vec![4, 2, 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// snapshot stride in steps; 0 writes only the first and last slices
    pub stride: usize,
    pub dir: Option<String>,
    pub probe: Option<ProbeConfig>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { stride: 10, dir: None, probe: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub n: Vec<u32>,
    /// truncation levels in units of α₀
    pub lambda: Vec<f64>,
    /// interior-interval multipliers for mesh refinement
    pub mesh: Vec<usize>,
    /// step-count multipliers for time refinement
    pub steps: Vec<usize>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig { n: vec![4, 8, 16], lambda: vec![2.0, 10.0], mesh: vec![1], steps: vec![1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    #[serde(rename = "yield")]
    pub yield_: YieldConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub loads: LoadsConfig,
    #[serde(default)]
    pub w: WPreset,
    #[serde(default)]
    pub rho: RhoPreset,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub init: InitPreset,
    /// PLP1 file with per-step blocks f, g, wbar, w3, rho; replaces the load, datum and ϱ presets
    #[serde(default)]
    pub tabulated: Option<String>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
}

fn default_gamma() -> f64 {
    0.1
}

/// Recursive object merge; `over` wins.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl Config {
    /// Parses JSON text. A top-level `"preset": "<builtin>"` is expanded first and the
    /// remaining keys are merged over it.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        if let Some(obj) = v.as_object_mut() {
            if let Some(p) = obj.remove("preset") {
                let name = p.as_str().ok_or_else(|| Error::validation("preset-name", "preset", "preset must be a string"))?;
                let base = builtin_config(name).ok_or_else(|| Error::validation("preset-name", "preset", format!("unknown preset {name:?}")))?;
                let mut b = serde_json::to_value(base)?;
                merge(&mut b, v);
                v = b;
            }
        }
        let c: Config = serde_json::from_value(v).map_err(|e| Error::Config(format!("schema error: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parameter-level checks; data-level checks run in [`validate_scenario`].
    pub fn validate(&self) -> Result<()> {
        if self.yield_.n < 4 {
            return Err(Error::validation("N>=4", "yield.n", format!("N = {} but the Norton–Hoff exponent must satisfy N ≥ 4", self.yield_.n)));
        }
        if !(self.yield_.lambda > 0.0 && self.yield_.lambda.is_finite()) {
            return Err(Error::validation("lambda>0", "yield.lambda", format!("λ = {}", self.yield_.lambda)));
        }
        if !(self.yield_.alpha0 > 0.0 && self.yield_.alpha0.is_finite()) {
            return Err(Error::validation("alpha0>0", "yield.alpha0", format!("α₀ = {}", self.yield_.alpha0)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma-range", "gamma", format!("γ = {} not in (0, 1)", self.gamma)));
        }
        if self.ladder.n.iter().any(|&n| n < 4) {
            return Err(Error::validation("N>=4", "ladder.n", "every ladder exponent must be ≥ 4"));
        }
        if self.ladder.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::validation("lambda>0", "ladder.lambda", "ladder truncation levels must be positive"));
        }
        if self.ladder.mesh.contains(&0) || self.ladder.steps.contains(&0) {
            return Err(Error::validation("refine>0", "ladder", "refinement multipliers must be positive"));
        }
        if self.geometry.clamped.is_empty() {
            return Err(Error::validation("gamma_d-nonempty", "geometry.clamped", "at least one edge must be clamped"));
        }
        self.layers()?;
        Elasticity::new(self.material.mu, self.material.ell)
            .map_err(|e| Error::validation("material-range", "material", e.to_string()))?;
        TimeGrid::new(self.time.horizon, self.time.k)?;
        self.solver.validate()?;
        let profiles: Vec<(&str, TimeProfile)> = [
            match &self.loads.f {
                FPreset::Uniform { profile, .. } => Some(("loads.f.profile", *profile)),
                FPreset::Zero => None,
            },
            match &self.loads.g {
                GPreset::Uniform { profile, .. } | GPreset::Ring { profile, .. } => Some(("loads.g.profile", *profile)),
                GPreset::Zero => None,
            },
            match &self.w {
                WPreset::Linear { profile, .. } => Some(("w.profile", *profile)),
                WPreset::Zero => None,
            },
        ]
        .into_iter()
        .flatten()
        .collect();
        for (loc, p) in profiles {
            p.validate(loc)?;
        }
        if let GPreset::Ring { width, .. } = self.loads.g {
            if !(width > 0.0) {
                return Err(Error::validation("ring-width", "loads.g.width", "width must be positive"));
            }
        }
        if let Some(p) = &self.output.probe {
            if !(p.fraction > 0.0 && p.fraction <= 1.0) || p.offsets.is_empty() {
                return Err(Error::validation("probe-params", "output.probe", "fraction in (0, 1] and at least one offset"));
            }
        }
        Ok(())
    }

    fn layers(&self) -> Result<ThicknessRule> {
        match &self.geometry.layers {
            LayersConfig::Gauss(n) => ThicknessRule::gauss(*n),
            LayersConfig::Custom { nodes, weights } => ThicknessRule::custom(nodes.clone(), weights.clone()),
        }
    }

    pub fn grid(&self) -> Result<PlateGrid> {
        let g = &self.geometry;
        PlateGrid::new(g.lx, g.ly, g.nx, g.ny, self.layers()?, EdgeMask::from_edges(&g.clamped))
    }

    pub fn trunc(&self) -> Result<TruncationParams> {
        TruncationParams::from_parts(self.yield_.n, self.yield_.alpha0, self.yield_.lambda)
    }

    /// Builds the scenario and runs every data-level validation rule.
    pub fn build(&self) -> Result<Scenario> {
        let s = self.build_unchecked()?;
        validate_scenario(&s)?;
        Ok(s)
    }

    pub fn build_unchecked(&self) -> Result<Scenario> {
        self.validate()?;
        let grid = self.grid()?;
        let elasticity = Elasticity::new(self.material.mu, self.material.ell)?;
        let time = TimeGrid::new(self.time.horizon, self.time.k)?;
        let forcing: Arc<dyn Forcing> = match &self.tabulated {
            Some(path) => Arc::new(load_tabulated(Path::new(path), &grid, time.steps())?),
            None => Arc::new(self.analytic_forcing(&grid)?),
        };
        let w0 = forcing.w(&grid, 0, 0.0);
        let init = match self.init {
            InitPreset::Rest => InitialData::rest(&grid, &w0),
            InitPreset::Prestress => InitialData { u0: w0.clone(), sigma0: forcing.rho(&grid, 0, 0.0), v0: ScalarField::zeros(&grid) },
            InitPreset::Velocity { amp } => {
                let (lx, ly) = (grid.lx(), grid.ly());
                let pi = std::f64::consts::PI;
                InitialData {
                    u0: w0.clone(),
                    sigma0: LayeredField::zeros(&grid),
                    v0: ScalarField::from_fn(&grid, |x, y| amp * (pi * x / lx).sin() * (pi * y / ly).sin()),
                }
            }
        };
        Ok(Scenario { name: self.name.clone(), grid, elasticity, trunc: self.trunc()?, time, gamma_safe: self.gamma, forcing, init })
    }

    pub fn analytic_forcing(&self, grid: &PlateGrid) -> Result<AnalyticForcing> {
        let mut out = AnalyticForcing::zero();
        let (lx, ly) = (grid.lx(), grid.ly());
        let d = grid.dirichlet();
        let moment_factor = {
            let (z, w) = (grid.layers().nodes(), grid.layers().weights());
            12.0 * z.iter().zip(w).map(|(z, w)| z.abs() * w).sum::<f64>()
        };
        // ϱ̄ and ϱ̂ as closures of (x, y) scaled by the profiles
        let mut rbar: Arc<dyn Fn(f64, f64, f64) -> Sym2 + Send + Sync> = Arc::new(|_, _, _| Sym2::ZERO);
        let mut rhat: Arc<dyn Fn(f64, f64, f64) -> Sym2 + Send + Sync> = Arc::new(|_, _, _| Sym2::ZERO);
        let auto = self.rho == RhoPreset::Auto;
        match self.loads.f {
            FPreset::Zero => {}
            FPreset::Uniform { f1, f2, profile } => {
                out.f = Arc::new(move |_, _, t| {
                    let a = profile.value(t);
                    [a * f1, a * f2]
                });
                if auto {
                    // −Div ϱ̄ = f with ϱ̄ν = 0 on the far edge
                    let lever: Arc<dyn Fn(f64) -> f64 + Send + Sync> = if d.left && !d.right {
                        Arc::new(move |x| lx - x)
                    } else if d.right && !d.left {
                        Arc::new(move |x| -x)
                    } else if d.left && d.right {
                        Arc::new(move |x| 0.5 * lx - x)
                    } else {
                        return Err(Error::validation("rho-auto", "rho", "uniform f needs a clamped left or right edge for the closed-form ϱ"));
                    };
                    if f2 != 0.0 && !(d.bottom && d.top) {
                        return Err(Error::validation("rho-auto", "rho", "uniform f₂ needs clamped top and bottom edges for the closed-form ϱ"));
                    }
                    rbar = Arc::new(move |x, _, t| {
                        let a = profile.value(t) * lever(x);
                        Sym2::new(a * f1, 0.0, a * f2)
                    });
                }
            }
        }
        match self.loads.g {
            GPreset::Zero => {}
            GPreset::Uniform { g0, profile } => {
                out.g = Arc::new(move |_, _, t| g0 * profile.value(t));
                if auto {
                    // −(1/12) DivDiv ϱ̂ = g through a one-directional beam moment with free-edge conditions
                    let (axis, m): (usize, Arc<dyn Fn(f64) -> f64 + Send + Sync>) = if d.left && d.right {
                        (0, Arc::new(move |x| -6.0 * g0 * ((x - 0.5 * lx).powi(2) - lx * lx / 8.0)))
                    } else if d.bottom && d.top {
                        (1, Arc::new(move |y| -6.0 * g0 * ((y - 0.5 * ly).powi(2) - ly * ly / 8.0)))
                    } else if d.left {
                        (0, Arc::new(move |x| -6.0 * g0 * (lx - x).powi(2)))
                    } else if d.right {
                        (0, Arc::new(move |x| -6.0 * g0 * x * x))
                    } else if d.bottom {
                        (1, Arc::new(move |y| -6.0 * g0 * (ly - y).powi(2)))
                    } else {
                        (1, Arc::new(move |y| -6.0 * g0 * y * y))
                    };
                    rhat = Arc::new(move |x, y, t| {
                        let a = profile.value(t);
                        if axis == 0 {
                            Sym2::new(a * m(x), 0.0, 0.0)
                        } else {
                            Sym2::new(0.0, a * m(y), 0.0)
                        }
                    });
                }
            }
            GPreset::Ring { amp, center, width, profile } => {
                let w2 = width * width;
                let phi = move |x: f64, y: f64| (-((x - center[0]).powi(2) + (y - center[1]).powi(2)) / w2).exp();
                // g = −(1/12) DivDiv ϱ̂ through the discrete adjoint, so ϱ equilibrates on the grid; g → amp·Δφ as h → 0
                let pattern = Sym2Field { values: (0..grid.n_nodes()).map(|n| {
                    let (x, y) = grid.point(n);
                    Sym2::IDENTITY * (-12.0 * amp * phi(x, y) * grid.node_weight(n))
                }).collect() };
                let ht = hessian_transpose(&pattern, grid)?;
                let dofs = DofMap::new(grid);
                let mut acc = vec![0.0; dofs.n_free()];
                for k in 0..grid.n_padded() {
                    if let Some(d) = dofs.u3_dof(k) {
                        acc[d] -= ht.values[k] / 12.0;
                    }
                }
                let table: Vec<f64> = (0..grid.n_nodes())
                    .map(|n| {
                        let (i, j) = grid.coords(n);
                        let k = grid.padded(i as isize, j as isize);
                        let r = dofs.u3_dof(k).map_or(-ht.values[k] / 12.0, |d| acc[d]);
                        r / grid.node_weight(n)
                    })
                    .collect();
                let (hx, hy, mx) = (grid.hx(), grid.hy(), grid.mx());
                out.g = Arc::new(move |x, y, t| {
                    let n = (y / hy).round() as usize * mx + (x / hx).round() as usize;
                    profile.value(t) * table[n]
                });
                if auto {
                    rhat = Arc::new(move |x, y, t| Sym2::IDENTITY * (-12.0 * amp * profile.value(t) * phi(x, y)));
                }
            }
        }
        if let WPreset::Linear { grad, curvature, profile } = self.w {
            out.wbar = Arc::new(move |x, y, t| {
                let a = profile.value(t);
                [a * (grad[0][0] * x + grad[0][1] * y), a * (grad[1][0] * x + grad[1][1] * y)]
            });
            out.w3 = Arc::new(move |x, y, t| {
                profile.value(t) * (0.5 * (curvature[0] * x * x + curvature[1] * y * y) + curvature[2] * x * y)
            });
        }
        out.rho = Arc::new(move |x, y, z, t| {
            let s = if z > 0.0 {
                1.0
            } else if z < 0.0 {
                -1.0
            } else {
                0.0
            };
            rbar(x, y, t) + rhat(x, y, t) * (s / moment_factor)
        });
        Ok(out)
    }

    pub fn probe(&self, grid: &PlateGrid) -> Result<Option<RegularityProbe>> {
        self.output.probe.as_ref().map(|p| RegularityProbe::centered(grid, p.fraction, p.offsets.clone())).transpose()
    }

    /// Same configuration on a refined mesh and time grid.
    pub fn refined(&self, mesh: usize, steps: usize) -> Config {
        let mut c = self.clone();
        c.geometry.nx = (c.geometry.nx + 1) * mesh - 1;
        c.geometry.ny = (c.geometry.ny + 1) * mesh - 1;
        c.time.k *= steps;
        if mesh > 1 {
            c.name = format!("{}_m{mesh}", c.name);
        }
        if steps > 1 {
            c.name = format!("{}_k{steps}", c.name);
        }
        c
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Config::from_json(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_tabulated(path: &Path, grid: &PlateGrid, steps: usize) -> Result<TabulatedForcing> {
    let snap = Snapshot::read(path)?;
    let series = |name: &str| -> Vec<&crate::grid::snapshot::Block> {
        let mut v: Vec<_> = snap.blocks.iter().filter(|b| b.name == name).collect();
        v.sort_by_key(|b| b.step);
        v
    };
    let need = |name: &str| -> Result<Vec<&crate::grid::snapshot::Block>> {
        let v = series(name);
        if v.is_empty() {
            return Err(Error::validation("tabulated-blocks", format!("tabulated.{name}"), "missing block"));
        }
        if v.len() != 1 && v.len() != steps + 1 {
            return Err(Error::validation("tabulated-steps", format!("tabulated.{name}"), format!("{} samples for {} steps", v.len(), steps)));
        }
        Ok(v)
    };
    let f = need("f")?
        .iter()
        .map(|b| {
            grid.check_len(2 * grid.n_nodes(), b.data.len())?;
            Ok(VecField { values: b.data.chunks(2).map(|c| [c[0], c[1]]).collect() })
        })
        .collect::<Result<Vec<_>>>()?;
    let g = need("g")?
        .iter()
        .map(|b| {
            grid.check_len(grid.n_nodes(), b.data.len())?;
            Ok(ScalarField { values: b.data.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let wb = need("wbar")?;
    let w3 = need("w3")?;
    if wb.len() != w3.len() {
        return Err(Error::validation("tabulated-steps", "tabulated.w3", "wbar and w3 sample counts differ"));
    }
    let w = wb
        .iter()
        .zip(&w3)
        .map(|(a, b)| {
            grid.check_len(2 * grid.n_nodes(), a.data.len())?;
            grid.check_len(grid.n_padded(), b.data.len())?;
            Ok(KLDisplacement { ubar: VecField { values: a.data.chunks(2).map(|c| [c[0], c[1]]).collect() }, u3: PaddedField { values: b.data.clone() } })
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = need("rho")?
        .iter()
        .map(|b| {
            let l = b.to_layered()?;
            l.check(grid)?;
            Ok(l)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TabulatedForcing { f, g, w, rho })
}

/// Relative tolerance of the ϱ-equilibrium check on the sampled data.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Data-level hypotheses checkable on the sampled data.
pub fn validate_scenario(s: &Scenario) -> Result<()> {
    let g = &s.grid;
    let dofs = DofMap::new(g);
    let k = s.trunc.base().yield_surface();
    let bound = s.alpha0() * (1.0 - s.gamma_safe);
    let eq_tol = EQUILIBRIUM_TOL;
    for i in 0..=s.time.steps() {
        let d = StepData::at(s, i);
        d.f.check(g)?;
        d.g.check(g)?;
        d.w.check(g)?;
        d.rho.check(g)?;
        let loc = format!("step {i}");
        let finite = d.f.values.iter().all(|v| v[0].is_finite() && v[1].is_finite())
            && d.g.values.iter().all(|v| v.is_finite())
            && d.rho.is_finite();
        if !finite {
            return Err(Error::validation("data-finite", loc, "loads or ϱ not finite"));
        }
        if !d.w.is_finite() {
            return Err(Error::validation("w-kl", loc, "boundary datum not finite"));
        }
        let top = d.rho.max_norm_r();
        if top > bound * (1.0 + 1e-12) {
            return Err(Error::validation("safe-load", format!("rho, {loc}"), format!("max |ϱ|_r = {top:.6} exceeds α₀(1 − γ) = {bound:.6}")));
        }
        let (m, b) = static_equilibrium(g, &dofs, &d.rho, &d.f, &d.g)?;
        let scale = 1.0 + d.load_scale() + top;
        if m > eq_tol * scale || b > eq_tol * scale {
            return Err(Error::validation(
                "rho-equilibrium",
                format!("rho, {loc}"),
                format!("weak residuals {m:.3e} (membrane) and {b:.3e} (bending) exceed {:.3e}", eq_tol * scale),
            ));
        }
    }
    let d0 = StepData::at(s, 0);
    let top0 = s.init.sigma0.max_norm_r();
    if top0 > k.alpha0() * (1.0 + 1e-12) {
        return Err(Error::validation("sigma0-admissible", "init.sigma0", format!("max |σ₀|_r = {top0:.6} exceeds α₀")));
    }
    let (m, b) = static_equilibrium(g, &dofs, &s.init.sigma0, &d0.f, &d0.g)?;
    let scale = 1.0 + d0.load_scale() + top0;
    if m > eq_tol * scale || b > eq_tol * scale {
        return Err(Error::validation("initial-equilibrium", "init.sigma0", format!("weak residuals {m:.3e}, {b:.3e} at t = 0")));
    }
    let viol = dofs.constraint_violation(&s.init.u0, &d0.w);
    if viol > 1e-12 * (1.0 + d0.w.u3.values.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
        return Err(Error::validation("initial-bc", "init.u0", format!("u₀ differs from w(0) on γ_d by {viol:.3e}")));
    }
    if !s.init.u0.is_finite() || !s.init.sigma0.is_finite() || s.init.v0.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("init-finite", "init", "initial data must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
