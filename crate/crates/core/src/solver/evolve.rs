use super::{seed_history, PlateState, Scenario, SolverOptions, StepStats, Stepper};
use crate::diagnostics::{compare_trajectories, Monitor, RegularityProbe, RunSummary, StepRecord, UniquenessReport};
use crate::potentials::TruncationParams;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// States at the snapshot stride (always the seed and the final slice), with the per-step log.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<PlateState>,
    pub log: Vec<StepRecord>,
    pub stats: Vec<StepStats>,
    pub summary: RunSummary,
}

impl Trajectory {
    pub fn last(&self) -> &PlateState {
        self.states.last().expect("trajectory holds the seed")
    }
}

pub fn evolve(scen: &Scenario, opts: &SolverOptions) -> Result<Trajectory> {
    evolve_with(scen, opts, None, |_| Ok(()))
}

/// Runs all k steps; `on_state` sees every slice, stored or not.
pub fn evolve_with(
    scen: &Scenario,
    opts: &SolverOptions,
    probe: Option<RegularityProbe>,
    mut on_state: impl FnMut(&PlateState) -> Result<()>,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(scen, opts)?;
    let seed = seed_history(scen)?;
    let mut monitor = Monitor::new(scen, &seed, probe)?;
    let mut log = vec![monitor.seed_record(&seed)];
    let mut stats = Vec::with_capacity(scen.time.steps());
    on_state(&seed)?;
    let mut states = vec![seed.clone()];
    let mut cur = seed;
    let k = scen.time.steps();
    for i in 1..=k {
        let (next, st) = stepper.step(&cur, i)?;
        log.push(monitor.record(&cur, &next, &st)?);
        stats.push(st);
        on_state(&next)?;
        if i == k || (opts.stride > 0 && i % opts.stride == 0) {
            states.push(next.clone());
        }
        cur = next;
    }
    let summary = RunSummary::from_log(scen, &log, monitor.regularity().cloned());
    Ok(Trajectory { states, log, stats, summary })
}

/// Runs two solver paths on the same scenario and compares σ and u₃ (ū and p are reported, not asserted).
pub fn uniqueness_check(scen: &Scenario, a: &SolverOptions, b: &SolverOptions) -> Result<UniquenessReport> {
    let stride = SolverOptions { stride: 1, ..a.clone() };
    let ta = evolve(scen, &stride)?;
    let tb = evolve(scen, &SolverOptions { stride: 1, ..b.clone() })?;
    Ok(compare_trajectories(&scen.grid, &ta.states, &tb.states))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub lambda: f64,
    pub n: u32,
    pub summary: RunSummary,
}

/// ‖σ^{λ₁} − σ^{λ₂}‖ at fixed N, and whether truncation stayed inactive for both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaAgreement {
    pub n: u32,
    pub lambdas: [f64; 2],
    pub sigma_diff: f64,
    pub u3_diff: f64,
    pub inactive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: String,
    pub entries: Vec<LadderEntry>,
    /// per λ: max excess in the order of the N list
    pub excess_by_n: Vec<(f64, Vec<f64>)>,
    pub monotone_slack: f64,
    pub excess_monotone: bool,
    pub lambda_agreement: Vec<LambdaAgreement>,
    /// largest pointwise flow-gap density above its closed-form bound, over all runs
    pub flowgap_bound_excess: f64,
}

impl SweepReport {
    pub fn entry(&self, lambda: f64, n: u32) -> Option<&LadderEntry> {
        self.entries.iter().find(|e| e.lambda == lambda && e.n == n)
    }
}

fn sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Independent evolutions over every (λ, N), run concurrently.
pub fn ladder(scen: &Scenario, lambdas: &[f64], ns: &[u32], opts: &SolverOptions, probe: Option<RegularityProbe>) -> Result<SweepReport> {
    if lambdas.is_empty() || ns.is_empty() || !sorted(lambdas) || !ns.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::validation("ladder-sorted", "ladder", "λ and N lists must be non-empty and strictly ascending"));
    }
    let alpha0 = scen.alpha0();
    let jobs: Vec<(f64, u32)> = lambdas.iter().flat_map(|&l| ns.iter().map(move |&n| (l, n))).collect();
    let runs: Vec<Result<Trajectory>> = jobs
        .par_iter()
        .map(|&(l, n)| {
            let s = scen.with_trunc(TruncationParams::from_parts(n, alpha0, l)?);
            evolve_with(&s, opts, probe.clone(), |_| Ok(()))
        })
        .collect();
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
    let slack = 1e-3 * alpha0;
    let mut excess_by_n = Vec::new();
    let mut monotone = true;
    for (a, &l) in lambdas.iter().enumerate() {
        let ex: Vec<f64> = (0..ns.len()).map(|b| runs[a * ns.len() + b].summary.max_excess).collect();
        monotone &= ex.windows(2).all(|w| w[1] <= w[0] + slack);
        excess_by_n.push((l, ex));
    }
    let mut agreement = Vec::new();
    for (b, &n) in ns.iter().enumerate() {
        for a in 1..lambdas.len() {
            let (r0, r1) = (&runs[(a - 1) * ns.len() + b], &runs[a * ns.len() + b]);
            let u = compare_trajectories(&scen.grid, &r0.states, &r1.states);
            let attained = r0.summary.max_norm_r.max(r1.summary.max_norm_r);
            agreement.push(LambdaAgreement {
                n,
                lambdas: [lambdas[a - 1], lambdas[a]],
                sigma_diff: u.sigma_diff,
                u3_diff: u.u3_diff,
                inactive: attained < lambdas[a - 1],
            });
        }
    }
    let flowgap_bound_excess = runs.iter().map(|r| r.summary.max_flowgap_density_excess).fold(f64::NEG_INFINITY, f64::max);
    let entries = jobs.iter().zip(runs).map(|(&(lambda, n), r)| LadderEntry { lambda, n, summary: r.summary }).collect();
    Ok(SweepReport {
        scenario: scen.name.clone(),
        entries,
        excess_by_n,
        monotone_slack: slack,
        excess_monotone: monotone,
        lambda_agreement: agreement,
        flowgap_bound_excess,
    })
}
