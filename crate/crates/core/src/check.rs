//! Randomized property suite run by `plastiplate check` and the acceptance binary.

use crate::grid::{compose_layers, moment_first, moment_zero, Edge, EdgeMask, LayeredField, PlateGrid, Sym2Field, ThicknessRule};
use crate::material::Elasticity;
use crate::oracle::{conjugate_sup, DenseIncrementalProblem};
use crate::potentials::{
    df_lambda, dphi_n, dpsi_lambda, dpsi_lambda_dot, f_lambda, phi_n, psi_lambda, NortonHoffParams, TruncationParams,
};
use crate::solver::{seed_history, AnalyticForcing, InitialData, Scenario, SolverOptions, Stepper, TimeGrid};
use crate::tensor::{dev_r, lift_dual, norm_dual, norm_r, support_hr, Sym2, YieldSurface};
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    /// multiplies every tolerance
    pub tol_scale: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { seed: 20240917, tol_scale: 1.0 }
    }
}

/// `worst` is the largest observed error measure, compared against `tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, samples: usize, worst: f64, tol: f64) -> Self {
        CheckOutcome { name: name.into(), samples, worst, tol, passed: worst <= tol }
    }

    fn flag(name: &str, samples: usize, failures: usize) -> Self {
        CheckOutcome { name: name.into(), samples, worst: failures as f64, tol: 0.0, passed: failures == 0 }
    }
}

const NS: [u32; 3] = [4, 6, 8];
const LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

fn rng(cfg: &CheckConfig, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.set_stream(stream);
    r
}

/// Random direction with |ξ|_r spread over [0, 3λ] so both branches of ψ_λ are hit.
fn sample_xi(r: &mut ChaCha8Rng, lambda: f64) -> Sym2 {
    let d = Sym2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let n = norm_r(&d);
    if n < 1e-6 {
        return Sym2::ZERO;
    }
    d * (r.random_range(0.0..3.0) * lambda / n)
}

fn sample_params(r: &mut ChaCha8Rng) -> TruncationParams {
    let n = NS[r.random_range(0..NS.len())];
    let l = LAMBDAS[r.random_range(0..LAMBDAS.len())];
    TruncationParams::from_parts(n, r.random_range(0.5..2.0), l).expect("valid sampled parameters")
}

/// Fenchel–Young equality, conjugate against brute-force sup, DF∘Dψ round trip, derivative checks.
pub fn convex_suite(cfg: &CheckConfig) -> Vec<CheckOutcome> {
    let ts = cfg.tol_scale;
    let mut r = rng(cfg, 1);
    let (mut fy, mut rt, mut rt2, mut dot) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let n_fy = 10_000;
    for _ in 0..n_fy {
        let p = sample_params(&mut r);
        let xi = sample_xi(&mut r, p.lambda());
        let y = dpsi_lambda(&xi, &p);
        let lhs = psi_lambda(&xi, &p) + f_lambda(&y, &p);
        let rhs = y.ddot(&xi);
        fy = fy.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
        rt = rt.max((df_lambda(&y, &p) - xi).frob() / (1.0 + xi.frob()));
        let yy = sample_xi(&mut r, 1.0) * r.random_range(0.0..4.0);
        rt2 = rt2.max((dpsi_lambda(&df_lambda(&yy, &p), &p) - yy).frob() / (1.0 + yy.frob()));
        let zeta = sample_xi(&mut r, 1.0);
        let a = dpsi_lambda_dot(&xi, &zeta, &p);
        let b = dpsi_lambda(&xi, &p).ddot(&zeta);
        dot = dot.max((a - b).abs() / (1e-300 + y.frob() * zeta.frob()));
    }
    let mut out = vec![
        CheckOutcome::new("fenchel_young_equality", n_fy, fy, 1e-10 * ts),
        CheckOutcome::new("dF_after_dpsi_round_trip", n_fy, rt, 1e-10 * ts),
        CheckOutcome::new("dpsi_after_dF_round_trip", n_fy, rt2, 1e-10 * ts),
        CheckOutcome::new("dpsi_reduced_product_form", n_fy, dot, 1e-13 * ts),
    ];

    let n_sup = 100;
    let mut sup = 0.0f64;
    let mut sup_fail = 0;
    for _ in 0..n_sup {
        let p = sample_params(&mut r);
        let y = dpsi_lambda(&sample_xi(&mut r, p.lambda()), &p);
        let radius = 2.0 * df_lambda(&y, &p).frob() + 1.0;
        match conjugate_sup(&y, &p, radius, 21) {
            Ok(v) => {
                let f = f_lambda(&y, &p);
                sup = sup.max((v - f).abs() / (1.0 + f.abs()));
            }
            Err(_) => sup_fail += 1,
        }
    }
    out.push(CheckOutcome::new("conjugate_vs_brute_sup", n_sup, if sup_fail > 0 { f64::INFINITY } else { sup }, 1e-4 * ts));

    let mut fd = 0.0f64;
    let n_fd = 1000;
    for _ in 0..n_fd {
        let np = NortonHoffParams::new(NS[r.random_range(0..NS.len())], r.random_range(0.5..2.0)).expect("valid");
        let xi = sample_xi(&mut r, np.alpha0());
        let eta = sample_xi(&mut r, 1.0);
        let h = 1e-5;
        let num = (phi_n(&(xi + eta * h), &np) - phi_n(&(xi - eta * h), &np)) / (2.0 * h);
        let ex = dphi_n(&xi, &np).ddot(&eta);
        fd = fd.max((num - ex).abs() / (1e-8 + ex.abs().max(num.abs())).max(1.0));
    }
    out.push(CheckOutcome::new("dphi_central_difference", n_fd, fd, 1e-6 * ts));

    let mut collisions = 0;
    for _ in 0..n_fy {
        let p = sample_params(&mut r);
        let (a, b) = (sample_xi(&mut r, p.lambda()), sample_xi(&mut r, p.lambda()));
        if (a - b).frob() > 1e-9 && (dpsi_lambda(&a, &p) - dpsi_lambda(&b, &p)).frob() == 0.0 {
            collisions += 1;
        }
    }
    out.push(CheckOutcome::flag("dpsi_injective", n_fy, collisions));
    out
}

/// Norm conversion identities and the sublinearity of the support function.
pub fn norm_suite(cfg: &CheckConfig) -> Vec<CheckOutcome> {
    let ts = cfg.tol_scale;
    let mut r = rng(cfg, 2);
    let n = 10_000;
    let (mut a, mut b, mut inv, mut hom, mut tri) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let k = YieldSurface::new(1.3).expect("valid");
    for _ in 0..n {
        let x = sample_xi(&mut r, 5.0);
        let y = sample_xi(&mut r, 5.0);
        let s = 1.0 + x.frob();
        a = a.max((norm_dual(&dev_r(&x)) - norm_r(&x)).abs() / s);
        b = b.max((norm_r(&lift_dual(&x)) - norm_dual(&x)).abs() / s);
        inv = inv.max((dev_r(&lift_dual(&x)) - x).max_abs().max((lift_dual(&dev_r(&x)) - x).max_abs()) / s);
        let t = r.random_range(0.0..10.0);
        hom = hom.max((support_hr(&(x * t), &k) - t * support_hr(&x, &k)).abs() / (s * (1.0 + t)));
        tri = tri.max((support_hr(&(x + y), &k) - support_hr(&x, &k) - support_hr(&y, &k)) / (s + y.frob()));
    }
    vec![
        CheckOutcome::new("norm_dual_of_dev_r_equals_norm_r", n, a, 1e-12 * ts),
        CheckOutcome::new("norm_r_of_lift_dual_equals_norm_dual", n, b, 1e-12 * ts),
        CheckOutcome::new("dev_r_lift_dual_inverse", n, inv, 1e-12 * ts),
        CheckOutcome::new("support_homogeneity", n, hom, 1e-12 * ts),
        CheckOutcome::new("support_triangle", n, tri.max(0.0), 1e-12 * ts),
    ]
}

/// Moment exactness of the thickness rules and the affine compose/moment round trip.
pub fn moment_suite(cfg: &CheckConfig) -> Result<Vec<CheckOutcome>> {
    let ts = cfg.tol_scale;
    let mut worst = 0.0f64;
    for n in 2..=8 {
        let t = ThicknessRule::gauss(n)?;
        let (z, w) = (t.nodes(), t.weights());
        let m = |k: i32| z.iter().zip(w).map(|(z, w)| w * z.powi(k)).sum::<f64>();
        worst = worst.max((m(0) - 1.0).abs()).max(m(1).abs()).max((m(2) - 1.0 / 12.0).abs());
    }
    let mut r = rng(cfg, 3);
    let g = PlateGrid::new(1.0, 1.0, 3, 2, ThicknessRule::gauss(4)?, EdgeMask::all())?;
    let mut sym = || Sym2::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
    let bar = Sym2Field { values: (0..g.n_nodes()).map(|_| sym()).collect() };
    let hat = Sym2Field { values: (0..g.n_nodes()).map(|_| sym()).collect() };
    let f = compose_layers(&bar, &hat, &g, 1.0);
    let (b2, h2) = (moment_zero(&f, &g)?, moment_first(&f, &g)?);
    let mut rt = 0.0f64;
    for n in 0..g.n_nodes() {
        rt = rt.max((b2.values[n] - bar.values[n]).max_abs()).max((h2.values[n] - hat.values[n]).max_abs());
    }
    Ok(vec![
        CheckOutcome::new("gauss_moment_exactness", 7, worst, 1e-13 * ts),
        CheckOutcome::new("affine_layer_moments", g.n_nodes(), rt, 1e-13 * ts),
    ])
}

/// Random tiny scenario: 3×3 interior nodes, 2 layers, random material, yield and loads.
pub fn random_tiny_scenario(r: &mut impl Rng) -> Result<Scenario> {
    let edges = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];
    let mut clamped: Vec<Edge> = edges.iter().copied().filter(|_| r.random_bool(0.5)).collect();
    if clamped.is_empty() {
        clamped.push(edges[r.random_range(0..4)]);
    }
    let grid = PlateGrid::new(1.0, 1.0, 3, 3, ThicknessRule::gauss(2)?, EdgeMask::from_edges(&clamped))?;
    let elasticity = Elasticity::new(r.random_range(0.5..2.0), r.random_range(0.0..1.0))?;
    let alpha0 = r.random_range(0.5..1.5);
    let trunc = TruncationParams::from_parts(NS[r.random_range(0..NS.len())], alpha0, 2.0 * alpha0)?;
    let (f1, f2, g0, gx) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
    let forcing = AnalyticForcing {
        f: Arc::new(move |_, y, t| [f1 * t, f2 * t * y]),
        g: Arc::new(move |x, _, t| t * (g0 + gx * x)),
        ..AnalyticForcing::zero()
    };
    let w0 = crate::solver::Forcing::w(&forcing, &grid, 0, 0.0);
    let init = InitialData::rest(&grid, &w0);
    Ok(Scenario {
        name: "tiny".into(),
        grid,
        elasticity,
        trunc,
        time: TimeGrid::new(1.0, 4)?,
        gamma_safe: 0.5,
        forcing: Arc::new(forcing),
        init,
    })
}

/// Largest per-field sup-norm disagreement between the Newton step and the dense minimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub u3: f64,
    pub ubar: f64,
    pub sigma: f64,
    pub p: f64,
    /// objective(Newton) − objective(oracle), relative to 1 + |objective|
    pub objective_gap: f64,
    pub sweeps: usize,
}

impl OracleComparison {
    pub fn field_max(&self) -> f64 {
        self.u3.max(self.ubar).max(self.sigma).max(self.p)
    }
}

/// Steps 1 and 2 with the Newton solver, then step 2 again with the dense oracle from the same history.
pub fn compare_with_oracle(s: &Scenario) -> Result<OracleComparison> {
    let h = seed_history(s)?;
    let mut st = Stepper::new(s, &SolverOptions { tol: 1e-12, inc_tol: 1e-13, ..SolverOptions::default() })?;
    let (n1, _) = st.step(&h, 1)?;
    let (n2, stats) = st.step(&n1, 2)?;
    let o = DenseIncrementalProblem::new(s, &n1, 2)?.brute_minimize(400_000, 1e-12)?;
    let sup = |a: &LayeredField, b: &LayeredField| a.values.iter().zip(&b.values).map(|(x, y)| (*x - *y).max_abs()).fold(0.0, f64::max);
    let d3 = o.u.u3.values.iter().zip(&n2.u.u3.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let db = o.u.ubar.values.iter().zip(&n2.u.ubar.values).map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs())).fold(0.0, f64::max);
    Ok(OracleComparison {
        u3: d3,
        ubar: db,
        sigma: sup(&o.sigma, &n2.sigma),
        p: sup(&o.p, &n2.p),
        objective_gap: (stats.objective - o.objective) / (1.0 + o.objective.abs()),
        sweeps: o.sweeps,
    })
}

/// One Newton step against the dense brute-force minimizer on randomized tiny scenarios.
pub fn oracle_suite(cfg: &CheckConfig, cases: usize) -> Result<Vec<CheckOutcome>> {
    let mut r = rng(cfg, 4);
    let mut fields = 0.0f64;
    let mut gap = 0.0f64;
    for _ in 0..cases {
        let s = random_tiny_scenario(&mut r)?;
        let c = compare_with_oracle(&s)?;
        fields = fields.max(c.field_max());
        gap = gap.max(c.objective_gap.abs());
    }
    Ok(vec![
        CheckOutcome::new("oracle_field_agreement", cases, fields, 1e-6 * cfg.tol_scale),
        CheckOutcome::new("oracle_mutual_optimality", cases, gap, 1e-10 * cfg.tol_scale),
    ])
}

pub fn run_all(cfg: &CheckConfig) -> Result<Vec<CheckOutcome>> {
    let mut out = convex_suite(cfg);
    out.extend(norm_suite(cfg));
    out.extend(moment_suite(cfg)?);
    out.extend(oracle_suite(cfg, 5)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_with_default_seed() {
        let cfg = CheckConfig::default();
        for o in norm_suite(&cfg).into_iter().chain(moment_suite(&cfg).unwrap()) {
            assert!(o.passed, "{o:?}");
        }
    }

    #[test]
    fn oracle_agrees_on_random_tiny_scenarios() {
        for o in oracle_suite(&CheckConfig { seed: 3, tol_scale: 1.0 }, 2).unwrap() {
            assert!(o.passed, "{o:?}");
        }
    }

    #[test]
    fn tolerances_scale() {
        let o = CheckOutcome::new("x", 1, 2e-10, 1e-10);
        assert!(!o.passed);
        let cfg = CheckConfig { seed: 1, tol_scale: 0.0 };
        assert!(norm_suite(&cfg).iter().any(|o| !o.passed));
    }
}
