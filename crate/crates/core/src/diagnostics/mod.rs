//! Runtime checks of the structural identities along a trajectory.

mod regularity;

pub use regularity::*;

use crate::grid::{
    div_strong, divdiv_strong, hessian_transpose, kl_strain, moment_first, moment_zero, perp_part, sym_grad_transpose, DofMap,
    KLDisplacement, LayeredField, PlateGrid, ScalarField, Sym2Field,
};
use crate::material::apply_a;
use crate::potentials::{dpsi_lambda, flow_gap_bound, flow_gap_density, TruncationParams};
use crate::solver::{PlateState, Scenario, StepData, StepStats};
use crate::tensor::{lift_dual, norm_r, support_hr, YieldSurface};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Terms of the discrete energy inequality at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub kinetic: f64,
    pub elastic: f64,
    pub dissipation_cum: f64,
    pub external_work_cum: f64,
    pub seed_energy: f64,
}

impl EnergyLedger {
    /// seed + work − (kinetic + elastic + dissipation), non-negative up to solver tolerance.
    pub fn slack(&self) -> f64 {
        self.seed_energy + self.external_work_cum - (self.kinetic + self.elastic + self.dissipation_cum)
    }

    pub fn scale(&self) -> f64 {
        1.0 + self.kinetic.abs().max(self.elastic.abs()).max(self.dissipation_cum.abs()).max(self.external_work_cum.abs()).max(self.seed_energy.abs())
    }
}

pub fn kinetic_energy(v: &ScalarField, grid: &PlateGrid) -> f64 {
    0.5 * crate::grid::weighted_dot(&v.values, &v.values, grid)
}

pub fn elastic_energy(sigma: &LayeredField, grid: &PlateGrid, s: &Scenario) -> f64 {
    let a = sigma.map(|x| apply_a(x, &s.elasticity));
    0.5 * crate::grid::layered_inner(&a, sigma, grid)
}

/// δ⟨σ, Dψ_λ(σ)⟩ and the pointwise minimum of σ:Dψ_λ(σ).
pub fn dissipation(sigma: &LayeredField, grid: &PlateGrid, trunc: &TruncationParams, dt: f64) -> (f64, f64) {
    let d = sigma.map(|x| dpsi_lambda(x, trunc));
    let min = sigma.values.iter().zip(&d.values).map(|(a, b)| a.ddot(b)).fold(f64::INFINITY, f64::min);
    (dt * crate::grid::layered_inner(&d, sigma, grid), min)
}

/// Right-hand side of the per-step inequality: work of the datum w and of the loads.
pub fn step_work(s: &Scenario, prev: &PlateState, cur: &PlateState, prev_data: &StepData, data: &StepData) -> Result<f64> {
    let g = &s.grid;
    let dt = s.time.delta();
    let v1 = cur.velocity(g, dt);
    let v0 = prev.velocity(g, dt);
    let acc: Vec<f64> = v1.values.iter().zip(&v0.values).map(|(a, b)| (a - b) / dt).collect();
    let dw = KLDisplacement {
        ubar: crate::grid::VecField {
            values: data.w.ubar.values.iter().zip(&prev_data.w.ubar.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        },
        u3: crate::grid::PaddedField { values: data.w.u3.values.iter().zip(&prev_data.w.u3.values).map(|(a, b)| a - b).collect() },
    };
    let dw3 = dw.u3.physical(g);
    let ew = kl_strain(&dw, g)?;
    let u3c = cur.u.u3.physical(g);
    let u3p = prev.u.u3.physical(g);
    let mut work = crate::grid::weighted_dot(&acc, &dw3.values, g) + crate::grid::layered_inner(&cur.sigma, &ew, g);
    for n in 0..g.n_nodes() {
        let w = g.node_weight(n);
        let f = data.f.values[n];
        let du = [cur.u.ubar.values[n][0] - prev.u.ubar.values[n][0], cur.u.ubar.values[n][1] - prev.u.ubar.values[n][1]];
        let dwb = dw.ubar.values[n];
        work += w * (f[0] * (du[0] - dwb[0]) + f[1] * (du[1] - dwb[1]));
        work += w * data.g.values[n] * ((u3c.values[n] - u3p.values[n]) - dw3.values[n]);
    }
    Ok(work)
}

/// Energy ledger along consecutive states `traj[0..]` starting at the seed.
pub fn energy_report(traj: &[PlateState], s: &Scenario) -> Result<Vec<EnergyLedger>> {
    let g = &s.grid;
    let dt = s.time.delta();
    let mut out = Vec::with_capacity(traj.len());
    let Some(first) = traj.first() else { return Ok(out) };
    let seed = kinetic_energy(&first.velocity(g, dt), g) + elastic_energy(&first.sigma, g, s);
    let mut led = EnergyLedger { kinetic: kinetic_energy(&first.velocity(g, dt), g), elastic: elastic_energy(&first.sigma, g, s), seed_energy: seed, ..Default::default() };
    out.push(led);
    let mut prev_data = StepData::at(s, first.step);
    for w in traj.windows(2) {
        let data = StepData::at(s, w[1].step);
        led.external_work_cum += step_work(s, &w[0], &w[1], &prev_data, &data)?;
        led.dissipation_cum += dissipation(&w[1].sigma, g, &s.trunc, dt).0;
        led.kinetic = kinetic_energy(&w[1].velocity(g, dt), g);
        led.elastic = elastic_energy(&w[1].sigma, g, s);
        out.push(led);
        prev_data = data;
    }
    Ok(out)
}

/// max over (x, layer) of (|σ|_r − α₀)⁺.
pub fn constraint_excess(sigma: &LayeredField, k: &YieldSurface) -> f64 {
    (sigma.max_norm_r() - k.alpha0()).max(0.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowGap {
    /// ∫ H_r(ṗ) − σ:ṗ
    pub signed: f64,
    pub absolute: f64,
    /// largest deviation from the closed-form density where |σ|_r < λ, relative to |H_r(ṗ)| + |σ:ṗ|
    pub identity_error: f64,
    /// largest pointwise density minus the closed-form bound (α₀/N)((N−1)/N)^{N−1}, where |σ|_r < λ
    pub bound_excess: f64,
}

/// Flow-rule gap with ṗ = (pⁱ − pⁱ⁻¹)/δ.
pub fn flow_rule_gap(prev: &LayeredField, cur: &LayeredField, sigma: &LayeredField, grid: &PlateGrid, trunc: &TruncationParams, dt: f64) -> FlowGap {
    let k = trunc.base().yield_surface();
    let bound = flow_gap_bound(&trunc.base());
    let w = grid.layers().weights();
    let nl = grid.nlayers();
    let mut out = FlowGap { bound_excess: f64::NEG_INFINITY, ..Default::default() };
    for n in 0..grid.n_nodes() {
        let wn = grid.node_weight(n);
        for l in 0..nl {
            let idx = n * nl + l;
            let pd = (cur.values[idx] - prev.values[idx]) * (1.0 / dt);
            let sg = sigma.values[idx];
            let h = support_hr(&pd, &k);
            let sp = sg.ddot(&pd);
            let gap = h - sp;
            out.signed += wn * w[l] * gap;
            out.absolute += wn * w[l] * gap.abs();
            if norm_r(&sg) < trunc.lambda() {
                let exact = flow_gap_density(&sg, &trunc.base());
                let rel = (gap - exact).abs() / (1e-300 + h.abs() + sp.abs());
                if h.abs() + sp.abs() > 0.0 {
                    out.identity_error = out.identity_error.max(rel);
                }
                out.bound_excess = out.bound_excess.max(gap - bound);
            }
        }
    }
    if out.bound_excess == f64::NEG_INFINITY {
        out.bound_excess = 0.0;
    }
    out
}

/// Same gap evaluated with ṗ = Dψ_λ(σ) directly.
pub fn flow_gap_pointwise(sigma: &LayeredField, trunc: &TruncationParams) -> f64 {
    let k = trunc.base().yield_surface();
    let mut worst: f64 = 0.0;
    for sg in &sigma.values {
        if norm_r(sg) >= trunc.lambda() {
            continue;
        }
        let pd = dpsi_lambda(sg, trunc);
        let h = support_hr(&pd, &k);
        let sp = sg.ddot(&pd);
        if h.abs() + sp.abs() == 0.0 {
            continue;
        }
        let err = ((h - sp) - flow_gap_density(sg, &trunc.base())).abs() / (h.abs() + sp.abs());
        worst = worst.max(err);
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualityMode {
    /// H-adjoint discrete operators; exact for discrete states
    Weak,
    /// central stencils at depth ≥ 2; for u − w supported away from the boundary
    Strong,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the integration-by-parts identity with unit cutoff.
///
/// LHS = ⟨σ̄, p̄⟩ + ⟨σ̂, p̂⟩/12 − ∫σ_⊥:e_⊥ + ∫σ:(e − Ew);
/// RHS = −⟨Div σ̄, ū − w̄⟩ − ⟨DivDiv σ̂, u₃ − w₃⟩/12.
#[allow(clippy::too_many_arguments)]
pub fn duality_residual(
    grid: &PlateGrid,
    sigma: &LayeredField,
    u: &KLDisplacement,
    e: &LayeredField,
    p: &LayeredField,
    w: &KLDisplacement,
    dofs: Option<&DofMap>,
    mode: DualityMode,
) -> Result<DualityReport> {
    let sb = moment_zero(sigma, grid)?;
    let sh = moment_first(sigma, grid)?;
    let pb = moment_zero(p, grid)?;
    let ph = moment_first(p, grid)?;
    let sp = perp_part(sigma, grid)?;
    let ep = perp_part(e, grid)?;
    let ew = kl_strain(w, grid)?;
    let wdot = |a: &Sym2Field, b: &Sym2Field| -> f64 { (0..grid.n_nodes()).map(|n| grid.node_weight(n) * a.values[n].ddot(&b.values[n])).sum() };
    let emw = e.zip_map(&ew, |a, b| *a - *b);
    let lhs = wdot(&sb, &pb) + wdot(&sh, &ph) / 12.0 - crate::grid::layered_inner(&sp, &ep, grid) + crate::grid::layered_inner(sigma, &emw, grid);
    let vb: Vec<[f64; 2]> = u.ubar.values.iter().zip(&w.ubar.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
    let v3: Vec<f64> = u.u3.values.iter().zip(&w.u3.values).map(|(a, b)| a - b).collect();
    let rhs = match mode {
        DualityMode::Weak => {
            let weight = |f: &Sym2Field| Sym2Field { values: f.values.iter().enumerate().map(|(n, s)| *s * grid.node_weight(n)).collect() };
            let gt = sym_grad_transpose(&weight(&sb), grid)?;
            let ht = hessian_transpose(&weight(&sh), grid)?;
            let a: f64 = gt.values.iter().zip(&vb).map(|(g, v)| g[0] * v[0] + g[1] * v[1]).sum();
            let b: f64 = (0..grid.n_padded())
                .filter(|&k| !dofs.is_some_and(|d| d.is_free_ghost(grid, k)))
                .map(|k| ht.values[k] * v3[k])
                .sum();
            a - b / 12.0
        }
        DualityMode::Strong => {
            let d = div_strong(&sb, grid)?;
            let dd = divdiv_strong(&sh, grid)?;
            let phys = u.u3.physical(grid);
            let wphys = w.u3.physical(grid);
            let mut r = 0.0;
            for n in 0..grid.n_nodes() {
                let (i, j) = grid.coords(n);
                if grid.depth(i, j) < 2 {
                    continue;
                }
                let wn = grid.node_weight(n);
                r -= wn * (d.values[n][0] * vb[n][0] + d.values[n][1] * vb[n][1]);
                r -= wn * dd.values[n] * (phys.values[n] - wphys.values[n]) / 12.0;
            }
            r
        }
    };
    Ok(DualityReport { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// Largest weak residuals of ⟨τ, Ev⟩ = ⟨f, v̄⟩ + ⟨g, v₃⟩ over admissible variations, per unit dof weight.
///
/// Returns (membrane, bending). The Neumann conditions on γ_n are part of the weak form.
pub fn static_equilibrium(grid: &PlateGrid, dofs: &DofMap, tau: &LayeredField, f: &crate::grid::VecField, g: &ScalarField) -> Result<(f64, f64)> {
    let tb = moment_zero(tau, grid)?;
    let th = moment_first(tau, grid)?;
    let weight = |t: &Sym2Field| Sym2Field { values: t.values.iter().enumerate().map(|(n, s)| *s * grid.node_weight(n)).collect() };
    let rb = sym_grad_transpose(&weight(&tb), grid)?;
    let rh = hessian_transpose(&weight(&th), grid)?;
    let mut mem: f64 = 0.0;
    for n in 0..grid.n_nodes() {
        for c in 0..2 {
            if dofs.ubar_dof(n, c).is_some() {
                let w = grid.node_weight(n);
                mem = mem.max(((rb.values[n][c] - w * f.values[n][c]) / w).abs());
            }
        }
    }
    let mut r3 = vec![0.0; dofs.n_free()];
    for k in 0..grid.n_padded() {
        if let Some(d) = dofs.u3_dof(k) {
            r3[d] -= rh.values[k] / 12.0;
        }
    }
    let mut bend: f64 = 0.0;
    for (d, r) in r3.iter_mut().enumerate() {
        let (is_u3, k, _) = dofs.owner(d);
        if !is_u3 {
            continue;
        }
        let (i, j) = grid.padded_coords(k);
        let w = if grid.is_physical(i, j) {
            let n = grid.node(i as usize, j as usize);
            *r -= grid.node_weight(n) * g.values[n];
            grid.node_weight(n)
        } else {
            0.5 * grid.hx() * grid.hy()
        };
        bend = bend.max((*r / w).abs());
    }
    Ok((mem, bend))
}

/// Per-step record written to diagnostics.csv.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub dissipation: f64,
    pub work: f64,
    pub slack: f64,
    pub slack_step: f64,
    pub energy_scale: f64,
    pub excess: f64,
    pub max_norm_r: f64,
    pub flowgap: f64,
    pub flowgap_abs: f64,
    pub flowgap_identity: f64,
    pub flowgap_bound_excess: f64,
    pub dissipation_min: f64,
    pub kinematic_residual: f64,
    pub flow_residual: f64,
    pub alignment_residual: f64,
    pub membrane_residual: f64,
    pub bending_residual: f64,
    pub duality_residual: f64,
    pub rho_pairing: f64,
    pub sigma_rate: f64,
    pub accel_norm: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

pub const CSV_COLUMNS: &[&str] = &[
    "step", "time", "kinetic", "elastic", "dissipation", "work", "slack", "slack_step", "excess", "max_norm_r", "flowgap",
    "flowgap_abs", "flowgap_identity", "dissipation_min", "kinematic_residual", "flow_residual", "alignment_residual",
    "membrane_residual", "bending_residual", "duality_residual", "rho_pairing", "sigma_rate", "accel_norm", "newton_iterations",
    "newton_residual",
];

impl StepRecord {
    fn csv_row(&self) -> String {
        let v = [
            self.step as f64, self.time, self.kinetic, self.elastic, self.dissipation, self.work, self.slack, self.slack_step,
            self.excess, self.max_norm_r, self.flowgap, self.flowgap_abs, self.flowgap_identity, self.dissipation_min,
            self.kinematic_residual, self.flow_residual, self.alignment_residual, self.membrane_residual, self.bending_residual,
            self.duality_residual, self.rho_pairing, self.sigma_rate, self.accel_norm, self.newton_iterations as f64,
            self.newton_residual,
        ];
        let mut s = format!("{},{}", self.step, self.time);
        for x in &v[2..23] {
            s.push_str(&format!(",{x:e}"));
        }
        s.push_str(&format!(",{},{:e}", self.newton_iterations, self.newton_residual));
        s
    }
}

pub fn write_csv(path: &Path, log: &[StepRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", CSV_COLUMNS.join(","))?;
    for r in log {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Per-step evaluation of every monitor; keeps the running energy ledger.
pub struct Monitor<'s> {
    scen: &'s Scenario,
    dofs: DofMap,
    ledger: EnergyLedger,
    prev_data: StepData,
    probe: Option<RegularityProbe>,
    regularity: Option<RegularityReport>,
}

impl<'s> Monitor<'s> {
    pub fn new(scen: &'s Scenario, seed: &PlateState, probe: Option<RegularityProbe>) -> Result<Self> {
        let g = &scen.grid;
        let dt = scen.time.delta();
        let kinetic = kinetic_energy(&seed.velocity(g, dt), g);
        let elastic = elastic_energy(&seed.sigma, g, scen);
        let ledger = EnergyLedger { kinetic, elastic, seed_energy: kinetic + elastic, ..Default::default() };
        if let Some(p) = &probe {
            p.validate(g)?;
        }
        let regularity = probe.as_ref().map(|p| RegularityReport::empty(p, g));
        Ok(Monitor { scen, dofs: DofMap::new(g), ledger, prev_data: StepData::at(scen, seed.step), probe, regularity })
    }

    pub fn ledger(&self) -> EnergyLedger {
        self.ledger
    }

    pub fn regularity(&self) -> Option<&RegularityReport> {
        self.regularity.as_ref()
    }

    pub fn seed_record(&self, seed: &PlateState) -> StepRecord {
        let k = self.scen.trunc.base().yield_surface();
        StepRecord {
            step: seed.step,
            time: seed.time,
            kinetic: self.ledger.kinetic,
            elastic: self.ledger.elastic,
            energy_scale: self.ledger.scale(),
            excess: constraint_excess(&seed.sigma, &k),
            max_norm_r: seed.sigma.max_norm_r(),
            ..Default::default()
        }
    }

    pub fn record(&mut self, prev: &PlateState, cur: &PlateState, stats: &StepStats) -> Result<StepRecord> {
        let s = self.scen;
        let g = &s.grid;
        let dt = s.time.delta();
        let data = StepData::at(s, cur.step);
        let k = s.trunc.base().yield_surface();
        let work = step_work(s, prev, cur, &self.prev_data, &data)?;
        let (diss, dmin) = dissipation(&cur.sigma, g, &s.trunc, dt);
        let kinetic = kinetic_energy(&cur.velocity(g, dt), g);
        let elastic = elastic_energy(&cur.sigma, g, s);
        let before = self.ledger;
        self.ledger.external_work_cum += work;
        self.ledger.dissipation_cum += diss;
        self.ledger.kinetic = kinetic;
        self.ledger.elastic = elastic;
        let slack_step = work - (kinetic - before.kinetic + elastic - before.elastic + diss);

        let eu = kl_strain(&cur.u, g)?;
        let mut kin: f64 = 0.0;
        let mut flow: f64 = 0.0;
        let mut align: f64 = 0.0;
        for idx in 0..eu.values.len() {
            kin = kin.max((eu.values[idx] - cur.e.values[idx] - cur.p.values[idx]).max_abs());
            let sg = cur.sigma.values[idx];
            let dp = cur.p.values[idx] - prev.p.values[idx];
            flow = flow.max((dp * (1.0 / dt) - dpsi_lambda(&sg, &s.trunc)).max_abs());
            align = align.max((lift_dual(&dp) - sg * (dt * s.trunc.factor(norm_r(&sg)))).max_abs());
        }
        let gap = flow_rule_gap(&prev.p, &cur.p, &cur.sigma, g, &s.trunc, dt);

        let sb = moment_zero(&cur.sigma, g)?;
        let sh = moment_first(&cur.sigma, g)?;
        let div = div_strong(&sb, g)?;
        let dd = divdiv_strong(&sh, g)?;
        let v1 = cur.velocity(g, dt);
        let v0 = prev.velocity(g, dt);
        let acc: Vec<f64> = v1.values.iter().zip(&v0.values).map(|(a, b)| (a - b) / dt).collect();
        let (mut mres, mut bres): (f64, f64) = (0.0, 0.0);
        for n in 0..g.n_nodes() {
            let (i, j) = g.coords(n);
            if g.depth(i, j) < 2 {
                continue;
            }
            let f = data.f.values[n];
            mres = mres.max((div.values[n][0] + f[0]).abs()).max((div.values[n][1] + f[1]).abs());
            bres = bres.max((acc[n] - dd.values[n] / 12.0 - data.g.values[n]).abs());
        }
        let dual = duality_residual(g, &cur.sigma, &cur.u, &cur.e, &cur.p, &data.w, Some(&self.dofs), DualityMode::Weak)?;
        let dpsi = cur.sigma.map(|x| dpsi_lambda(x, &s.trunc));
        let rho_pairing = crate::grid::layered_inner(&data.rho, &dpsi, g);
        let ds = cur.sigma.zip_map(&prev.sigma, |a, b| (*a - *b) * (1.0 / dt));
        let sigma_rate = crate::grid::layered_inner(&ds, &ds, g).sqrt();
        let accel_norm = crate::grid::weighted_dot(&acc, &acc, g).sqrt();
        if let (Some(p), Some(r)) = (&self.probe, self.regularity.as_mut()) {
            r.update(p, g, cur, &v1)?;
        }
        self.prev_data = data;
        Ok(StepRecord {
            step: cur.step,
            time: cur.time,
            kinetic,
            elastic,
            dissipation: self.ledger.dissipation_cum,
            work: self.ledger.external_work_cum,
            slack: self.ledger.slack(),
            slack_step,
            energy_scale: self.ledger.scale(),
            excess: constraint_excess(&cur.sigma, &k),
            max_norm_r: cur.sigma.max_norm_r(),
            flowgap: gap.signed,
            flowgap_abs: gap.absolute,
            flowgap_identity: flow_gap_pointwise(&cur.sigma, &s.trunc),
            flowgap_bound_excess: gap.bound_excess,
            dissipation_min: dmin,
            kinematic_residual: kin,
            flow_residual: flow,
            alignment_residual: align,
            membrane_residual: mres,
            bending_residual: bres,
            duality_residual: dual.residual,
            rho_pairing,
            sigma_rate,
            accel_norm,
            newton_iterations: stats.iterations,
            newton_residual: stats.residual,
        })
    }
}

/// Run-level scalars for summary.json.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub n: u32,
    pub lambda: f64,
    pub alpha0: f64,
    pub steps: usize,
    pub h: f64,
    pub dt: f64,
    pub max_excess: f64,
    pub max_norm_r: f64,
    pub max_flowgap_density_excess: f64,
    pub flowgap_total: f64,
    pub flowgap_bound_total: f64,
    pub min_slack: f64,
    pub min_slack_step: f64,
    pub energy_scale: f64,
    pub dissipation_total: f64,
    pub max_kinematic_residual: f64,
    pub max_flow_residual: f64,
    pub max_membrane_residual: f64,
    pub max_bending_residual: f64,
    pub max_duality_residual: f64,
    pub sup_kinetic: f64,
    pub sup_elastic: f64,
    pub max_newton_iterations: usize,
    pub regularity: Option<RegularityReport>,
}

impl RunSummary {
    pub fn from_log(s: &Scenario, log: &[StepRecord], regularity: Option<RegularityReport>) -> Self {
        let dt = s.time.delta();
        let fold = |f: &dyn Fn(&StepRecord) -> f64| log.iter().skip(1).map(f).fold(0.0, f64::max);
        let area = s.grid.lx() * s.grid.ly();
        RunSummary {
            scenario: s.name.clone(),
            n: s.trunc.n(),
            lambda: s.trunc.lambda(),
            alpha0: s.alpha0(),
            steps: s.time.steps(),
            h: s.grid.hx().max(s.grid.hy()),
            dt,
            max_excess: log.iter().map(|r| r.excess).fold(0.0, f64::max),
            max_norm_r: log.iter().map(|r| r.max_norm_r).fold(0.0, f64::max),
            max_flowgap_density_excess: log.iter().skip(1).map(|r| r.flowgap_bound_excess).fold(f64::NEG_INFINITY, f64::max).max(-f64::MAX),
            flowgap_total: log.iter().skip(1).map(|r| dt * r.flowgap).sum(),
            flowgap_bound_total: flow_gap_bound(&s.trunc.base()) * area * s.time.horizon(),
            min_slack: log.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
            min_slack_step: log.iter().skip(1).map(|r| r.slack_step).fold(f64::INFINITY, f64::min),
            energy_scale: log.iter().map(|r| r.energy_scale).fold(1.0, f64::max),
            dissipation_total: log.last().map(|r| r.dissipation).unwrap_or(0.0),
            max_kinematic_residual: fold(&|r| r.kinematic_residual),
            max_flow_residual: fold(&|r| r.flow_residual),
            max_membrane_residual: fold(&|r| r.membrane_residual),
            max_bending_residual: fold(&|r| r.bending_residual),
            max_duality_residual: fold(&|r| r.duality_residual),
            sup_kinetic: log.iter().map(|r| r.kinetic).fold(0.0, f64::max),
            sup_elastic: log.iter().map(|r| r.elastic).fold(0.0, f64::max),
            max_newton_iterations: log.iter().map(|r| r.newton_iterations).max().unwrap_or(0),
            regularity,
        }
    }
}

/// One per-run assertion: `value` must not exceed `limit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl RunSummary {
    /// Energy slack, kinematic split and flow relation, with every limit multiplied by `tol_scale`.
    pub fn invariant_checks(&self, tol_scale: f64) -> Vec<InvariantCheck> {
        let scale = 1.0 + self.max_norm_r;
        let rows = [
            ("energy_slack_deficit", (-self.min_slack).max(0.0), 1e-8 * self.energy_scale),
            ("kinematic_split", self.max_kinematic_residual, 1e-9 * scale),
            ("flow_relation", self.max_flow_residual, 1e-9 * scale),
        ];
        rows.iter()
            .map(|&(name, value, limit)| {
                let limit = limit * tol_scale;
                InvariantCheck { name: name.into(), value, limit, passed: value <= limit }
            })
            .collect()
    }
}

/// Result of comparing two solver paths on one scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// sup over steps of ‖σ₁ − σ₂‖_{L²}
    pub sigma_diff: f64,
    /// sup over steps and nodes of |u₃,₁ − u₃,₂|
    pub u3_diff: f64,
    pub ubar_diff: f64,
    pub p_diff: f64,
    pub scale: f64,
}

impl UniquenessReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.sigma_diff <= tol * self.scale && self.u3_diff <= tol * self.scale
    }
}

pub fn compare_trajectories(grid: &PlateGrid, a: &[PlateState], b: &[PlateState]) -> UniquenessReport {
    let mut r = UniquenessReport { scale: 1.0, ..Default::default() };
    for (x, y) in a.iter().zip(b) {
        let d = x.sigma.zip_map(&y.sigma, |p, q| *p - *q);
        r.sigma_diff = r.sigma_diff.max(crate::grid::layered_inner(&d, &d, grid).sqrt());
        let phys = |s: &PlateState| s.u.u3.physical(grid).values;
        let (ua, ub) = (phys(x), phys(y));
        r.u3_diff = ua.iter().zip(&ub).map(|(p, q)| (p - q).abs()).fold(r.u3_diff, f64::max);
        r.ubar_diff = x.u.ubar.values.iter().zip(&y.u.ubar.values).map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs())).fold(r.ubar_diff, f64::max);
        r.p_diff = x.p.values.iter().zip(&y.p.values).map(|(p, q)| (*p - *q).max_abs()).fold(r.p_diff, f64::max);
        let sc = crate::grid::layered_inner(&x.sigma, &x.sigma, grid).sqrt().max(ua.iter().map(|v| v.abs()).fold(0.0, f64::max));
        r.scale = r.scale.max(1.0 + sc);
    }
    r
}

#[cfg(test)]
mod tests;
