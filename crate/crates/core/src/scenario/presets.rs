use super::*;

pub const BUILTIN_NAMES: &[&str] = &["quiescent", "elastic_bend", "plastic_bend", "inertial_ring", "static_f"];

fn base(name: &str, lx: f64, ly: f64, nx: usize, ny: usize, clamped: Vec<Edge>) -> Config {
    Config {
        name: name.into(),
        geometry: GeometryConfig { lx, ly, nx, ny, layers: LayersConfig::Gauss(4), clamped },
        material: MaterialConfig { mu: 1.0, ell: 0.5 },
        yield_: YieldConfig { alpha0: 1.0, n: 8, lambda: 2.0 },
        time: TimeConfig { horizon: 1.0, k: 10 },
        loads: LoadsConfig::default(),
        w: WPreset::Zero,
        rho: RhoPreset::Auto,
        gamma: 0.1,
        init: InitPreset::Rest,
        tabulated: None,
        solver: SolverOptions::default(),
        output: OutputConfig::default(),
        ladder: LadderConfig::default(),
    }
}

/// Configuration of a builtin scenario by name.
pub fn builtin_config(name: &str) -> Option<Config> {
    let c = match name {
        "quiescent" => base(name, 1.0, 1.0, 7, 7, vec![Edge::Left, Edge::Right, Edge::Bottom, Edge::Top]),
        "elastic_bend" => Config {
            yield_: YieldConfig { alpha0: 1.0, n: 16, lambda: 2.0 },
            time: TimeConfig { horizon: 4.0, k: 40 },
            loads: LoadsConfig { f: FPreset::Zero, g: GPreset::Uniform { g0: 0.03, profile: TimeProfile::Ramp { duration: 2.0 } } },
            ..base(name, 4.0, 2.0, 15, 7, vec![Edge::Left, Edge::Right])
        },
        "plastic_bend" => Config {
            yield_: YieldConfig { alpha0: 1.0, n: 16, lambda: 2.0 },
            time: TimeConfig { horizon: 8.0, k: 80 },
            loads: LoadsConfig { f: FPreset::Zero, g: GPreset::Uniform { g0: 0.26, profile: TimeProfile::Ramp { duration: 4.0 } } },
            output: OutputConfig { probe: Some(ProbeConfig::default()), ..OutputConfig::default() },
            ..base(name, 4.0, 2.0, 31, 15, vec![Edge::Left, Edge::Right])
        },
        "inertial_ring" => Config {
            time: TimeConfig { horizon: 3.0, k: 60 },
            loads: LoadsConfig {
                f: FPreset::Zero,
                g: GPreset::Ring { amp: 0.25, center: [1.0, 1.0], width: 0.4, profile: TimeProfile::Pulse { duration: 0.5 } },
            },
            ..base(name, 2.0, 2.0, 15, 15, vec![Edge::Left, Edge::Right, Edge::Bottom, Edge::Top])
        },
        "static_f" => Config {
            time: TimeConfig { horizon: 4.0, k: 80 },
            loads: LoadsConfig {
                f: FPreset::Uniform { f1: 0.2, f2: 0.0, profile: TimeProfile::Constant },
                g: GPreset::Uniform { g0: 0.01, profile: TimeProfile::Harmonic { omega: 1.0, phase: 0.0 } },
            },
            init: InitPreset::Prestress,
            ..base(name, 2.0, 1.0, 15, 7, vec![Edge::Left])
        },
        _ => return None,
    };
    Some(c)
}

/// Every builtin scenario, built and validated.
pub fn builtin_scenarios() -> Result<Vec<(String, Scenario)>> {
    BUILTIN_NAMES.iter().map(|n| Ok((n.to_string(), builtin_config(n).expect("builtin").build()?))).collect()
}

/// Smooth elastic solution on the fully clamped unit square: u(x, t) = a(t)·U(x) with U = (sin πx₂·sin πx₁/10, −…, sin πx₁ sin πx₂).
///
/// Loads are the exact residuals of the continuous equations, w equals the exact solution and
/// α₀ is large enough that the Norton–Hoff flow stays below rounding.
pub fn manufactured_elastic(n: usize, k: usize, horizon: f64, profile: TimeProfile) -> Result<(Scenario, ManufacturedExact)> {
    let grid = PlateGrid::new(1.0, 1.0, n, n, ThicknessRule::gauss(2)?, EdgeMask::all())?;
    let elasticity = Elasticity::new(1.0, 0.5)?;
    let trunc = TruncationParams::from_parts(16, 1e3, 2e3)?;
    let exact = ManufacturedExact { profile, mu: elasticity.mu(), ell: elasticity.ell() };
    let e = exact;
    let forcing = AnalyticForcing {
        f: Arc::new(move |x, y, t| e.f(x, y, t)),
        g: Arc::new(move |x, y, t| e.g(x, y, t)),
        wbar: Arc::new(move |x, y, t| e.ubar(x, y, t)),
        w3: Arc::new(move |x, y, t| e.u3(x, y, t)),
        rho: Arc::new(|_, _, _, _| Sym2::ZERO),
    };
    let time = TimeGrid::new(horizon, k)?;
    let w0 = forcing.w(&grid, 0, 0.0);
    let dt = 1e-7;
    let init = InitialData {
        u0: w0.clone(),
        sigma0: LayeredField::from_fn(&grid, |x, y, z| e.sigma(x, y, z, 0.0)),
        v0: ScalarField::from_fn(&grid, |x, y| (e.u3(x, y, dt) - e.u3(x, y, -dt)) / (2.0 * dt)),
    };
    let s = Scenario { name: "manufactured".into(), grid, elasticity, trunc, time, gamma_safe: 0.5, forcing: Arc::new(forcing), init };
    Ok((s, exact))
}

/// Closed forms of the manufactured elastic solution.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedExact {
    pub profile: TimeProfile,
    mu: f64,
    ell: f64,
}

const PI: f64 = std::f64::consts::PI;
const MB: f64 = 0.1;

impl ManufacturedExact {
    fn a(&self, t: f64) -> f64 {
        self.profile.value(t)
    }

    fn a_dd(&self, t: f64) -> f64 {
        match self.profile {
            TimeProfile::Constant | TimeProfile::Linear { .. } => 0.0,
            TimeProfile::Harmonic { omega, phase } => -omega * omega * (omega * t + phase).sin(),
            TimeProfile::Ramp { .. } | TimeProfile::Pulse { .. } => {
                let h = 1e-4;
                (self.a(t + h) - 2.0 * self.a(t) + self.a(t - h)) / (h * h)
            }
        }
    }

    pub fn ubar(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.a(t) * MB;
        [a * (PI * x).sin() * (PI * y).sin(), -a * (PI * x).sin() * (PI * y).sin()]
    }

    pub fn u3(&self, x: f64, y: f64, t: f64) -> f64 {
        self.a(t) * (PI * x).sin() * (PI * y).sin()
    }

    fn membrane_strain(&self, x: f64, y: f64, t: f64) -> Sym2 {
        let a = self.a(t) * MB;
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        // u₁ = a sx sy, u₂ = −a sx sy
        Sym2::new(a * PI * cx * sy, -a * PI * sx * cy, 0.5 * a * PI * (sx * cy - cx * sy))
    }

    fn hess(&self, x: f64, y: f64, t: f64) -> Sym2 {
        let a = self.a(t);
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        Sym2::new(-a * PI * PI * sx * sy, -a * PI * PI * sx * sy, a * PI * PI * cx * cy)
    }

    fn c(&self, e: Sym2) -> Sym2 {
        crate::material::apply_c(&e, &Elasticity::new(self.mu, self.ell).expect("valid"))
    }

    pub fn sigma(&self, x: f64, y: f64, z: f64, t: f64) -> Sym2 {
        self.c(self.membrane_strain(x, y, t) - self.hess(x, y, t) * z)
    }

    /// f = −Div σ̄ with σ̄ = C Eū
    pub fn f(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.a(t) * MB * PI * PI;
        let (ss, cc) = ((PI * x).sin() * (PI * y).sin(), (PI * x).cos() * (PI * y).cos());
        let (mu, ell) = (self.mu, self.ell);
        let d1 = a * (-2.0 * mu * ss - (ell + mu) * (ss + cc));
        let d2 = a * (2.0 * mu * ss + (ell + mu) * (ss + cc));
        [-d1, -d2]
    }

    /// g = ü₃ − (1/12) DivDiv σ̂ with σ̂ = −C∇²u₃, so DivDiv σ̂ = −(2μ + ℓ)Δ²u₃
    pub fn g(&self, x: f64, y: f64, t: f64) -> f64 {
        let ss = (PI * x).sin() * (PI * y).sin();
        let bih = 4.0 * PI.powi(4) * self.a(t) * ss;
        self.a_dd(t) * ss + (2.0 * self.mu + self.ell) * bih / 12.0
    }
}
