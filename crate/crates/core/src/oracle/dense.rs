use super::minimize_pointwise;
use crate::grid::{kl_strain, DofMap, KLDisplacement, LayeredField};
use crate::material::{apply_a, apply_c};
use crate::potentials::{dpsi_lambda, f_lambda, psi_lambda};
use crate::solver::{PlateState, Scenario, StepData};
use crate::tensor::Sym2;
use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

/// One incremental problem in the unknowns (free displacement values, p) with σ = C(Eu − p).
pub struct DenseIncrementalProblem<'s> {
    scen: &'s Scenario,
    dofs: DofMap,
    data: StepData,
    hist: PlateState,
    /// E u at z = 0, then the columns ∂(Eu)/∂z_f, all in (node, layer) order
    e0: LayeredField,
    cols: Vec<LayeredField>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub u: KLDisplacement,
    pub p: LayeredField,
    pub sigma: LayeredField,
    pub objective: f64,
    pub sweeps: usize,
}

impl<'s> DenseIncrementalProblem<'s> {
    pub fn new(scen: &'s Scenario, hist: &PlateState, i: usize) -> Result<Self> {
        let g = &scen.grid;
        let dofs = DofMap::new(g);
        let data = StepData::at(scen, i);
        let nf = dofs.n_free();
        let zero = vec![0.0; nf];
        let e0 = kl_strain(&dofs.expand(&zero, &data.w), g)?;
        let mut cols = Vec::with_capacity(nf);
        for f in 0..nf {
            let mut z = zero.clone();
            z[f] = 1.0;
            let ef = kl_strain(&dofs.expand(&z, &data.w), g)?;
            cols.push(ef.zip_map(&e0, |a, b| *a - *b));
        }
        Ok(DenseIncrementalProblem { scen, dofs, data, hist: hist.clone(), e0, cols, weights: g.node_weights() })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    fn strain(&self, z: &[f64]) -> LayeredField {
        let mut e = self.e0.clone();
        for (f, c) in self.cols.iter().enumerate() {
            if z[f] != 0.0 {
                for (a, b) in e.values.iter_mut().zip(&c.values) {
                    *a += *b * z[f];
                }
            }
        }
        e
    }

    /// 𝓕ᵢ(u, p) = Σ W w_l [½ C(Eu − p):(Eu − p) + δ F_λ((p − p′)/δ)] + inertia − loads.
    pub fn objective(&self, z: &[f64], p: &LayeredField) -> f64 {
        let s = self.scen;
        let g = &s.grid;
        let dt = s.time.delta();
        let nl = g.nlayers();
        let wl = g.layers().weights();
        let eu = self.strain(z);
        let mut total = 0.0;
        for n in 0..g.n_nodes() {
            for l in 0..nl {
                let k = n * nl + l;
                let el = eu.values[k] - p.values[k];
                let rate = (p.values[k] - self.hist.p.values[k]) * (1.0 / dt);
                total += self.weights[n] * wl[l] * (0.5 * apply_c(&el, &s.elasticity).ddot(&el) + dt * f_lambda(&rate, &s.trunc));
            }
        }
        total + self.outer(z)
    }

    fn outer(&self, z: &[f64]) -> f64 {
        let g = &self.scen.grid;
        let dt = self.scen.time.delta();
        let u = self.dofs.expand(z, &self.data.w);
        let mut total = 0.0;
        for n in 0..g.n_nodes() {
            let (i, j) = g.coords(n);
            let k = g.padded(i as isize, j as isize);
            let q = (u.u3.values[k] - 2.0 * self.hist.u.u3.values[k] + self.hist.u3_prev.values[k]) / dt;
            let f = self.data.f.values[n];
            let ub = u.ubar.values[n];
            total += self.weights[n] * (0.5 * q * q - f[0] * ub[0] - f[1] * ub[1] - self.data.g.values[n] * u.u3.values[k]);
        }
        total
    }

    /// Block coordinate descent: exact quadratic solve in z, then the pointwise convex problems in p.
    pub fn brute_minimize(&self, max_sweeps: usize, tol: f64) -> Result<OracleSolution> {
        let s = self.scen;
        let g = &s.grid;
        let dt = s.time.delta();
        let nl = g.nlayers();
        let wl = g.layers().weights();
        let nf = self.dofs.n_free();
        let nq = g.n_nodes() * nl;
        let w = |k: usize| self.weights[k / nl] * wl[k % nl];
        // quadratic part in z: K = Σ W Lᵀ C L + inertia, constant over sweeps
        let cl: Vec<Vec<Sym2>> = self.cols.iter().map(|c| c.values.iter().map(|x| apply_c(x, &s.elasticity)).collect()).collect();
        let mut kmat = Mat::<f64>::zeros(nf, nf);
        for a in 0..nf {
            for b in 0..=a {
                let v: f64 = (0..nq).map(|k| w(k) * cl[a][k].ddot(&self.cols[b].values[k])).sum();
                kmat[(a, b)] = v;
                kmat[(b, a)] = v;
            }
        }
        let inv = 1.0 / (dt * dt);
        let mut lin_outer = vec![0.0; nf];
        for n in 0..g.n_nodes() {
            let (i, j) = g.coords(n);
            let k = g.padded(i as isize, j as isize);
            if let crate::grid::Dof::Free(f) = self.dofs.u3_dof_kind(k) {
                kmat[(f, f)] += self.weights[n] * inv;
                let hist = -2.0 * self.hist.u.u3.values[k] + self.hist.u3_prev.values[k];
                lin_outer[f] += self.weights[n] * (hist * inv - self.data.g.values[n]);
            }
            for c in 0..2 {
                if let Some(f) = self.dofs.ubar_dof(n, c) {
                    lin_outer[f] -= self.weights[n] * self.data.f.values[n][c];
                }
            }
        }
        let llt = kmat.llt(Side::Lower).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        let mut z = self.dofs.restrict(&self.hist.u);
        let mut p = self.hist.p.clone();
        let mut sigma = LayeredField { nlayers: nl, values: vec![Sym2::ZERO; nq] };
        for sweep in 1..=max_sweeps {
            // z-step: K z = Σ W Lᵀ C (p − E₀) − lin_outer
            let rhs = Mat::from_fn(nf, 1, |a, _| {
                let v: f64 = (0..nq).map(|k| w(k) * cl[a][k].ddot(&(p.values[k] - self.e0.values[k]))).sum();
                v - lin_outer[a]
            });
            let znew = llt.solve(&rhs);
            let znew: Vec<f64> = (0..nf).map(|a| znew[(a, 0)]).collect();
            let eu = self.strain(&znew);
            // p-step through the pointwise dual: σ = argmin ½Aσ:σ + δψ_λ(σ) − η:σ, p = p′ + δDψ_λ(σ)
            let mut dmax: f64 = 0.0;
            for k in 0..nq {
                let eta = eu.values[k] - self.hist.p.values[k];
                let f = |x: Sym2| 0.5 * apply_a(&x, &s.elasticity).ddot(&x) + dt * psi_lambda(&x, &s.trunc) - eta.ddot(&x);
                let gr = |x: Sym2| apply_a(&x, &s.elasticity) + dpsi_lambda(&x, &s.trunc) * dt - eta;
                let x0 = apply_c(&(eu.values[k] - p.values[k]), &s.elasticity);
                let sg = minimize_pointwise(&f, &gr, x0, 1e-12 * (1.0 + eta.frob()), 200)?;
                let pn = self.hist.p.values[k] + dpsi_lambda(&sg, &s.trunc) * dt;
                dmax = dmax.max((pn - p.values[k]).max_abs());
                p.values[k] = pn;
                sigma.values[k] = sg;
            }
            let dz = z.iter().zip(&znew).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = znew;
            if dz.max(dmax) <= tol {
                let u = self.dofs.expand(&z, &self.data.w);
                let objective = self.objective(&z, &p);
                return Ok(OracleSolution { u, p, sigma, objective, sweeps: sweep });
            }
        }
        Err(Error::OracleCap(max_sweeps, tol))
    }
}

pub fn brute_minimize(scen: &Scenario, hist: &PlateState, i: usize) -> Result<OracleSolution> {
    DenseIncrementalProblem::new(scen, hist, i)?.brute_minimize(200_000, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::small_scenario;
    use crate::solver::{seed_history, AnalyticForcing, SolverOptions, Stepper};
    use std::sync::Arc;

    #[test]
    fn matches_incremental_step() {
        let mut s = small_scenario();
        s.forcing = Arc::new(AnalyticForcing {
            f: Arc::new(|x, _, t| [0.8 * t, -0.3 * t * x]),
            g: Arc::new(|x, y, t| 2.0 * t * (x + 0.5 * y)),
            ..AnalyticForcing::zero()
        });
        let h = seed_history(&s).unwrap();
        let mut st = Stepper::new(&s, &SolverOptions::default()).unwrap();
        let (n1, _) = st.step(&h, 1).unwrap();
        let (n2, stats) = st.step(&n1, 2).unwrap();
        let dense = DenseIncrementalProblem::new(&s, &n1, 2).unwrap();
        let z = dense.dofs().restrict(&n2.u);
        let reduced = st.objective(&n1, 2, &n2.u).unwrap();
        assert!((dense.objective(&z, &n2.p) - reduced).abs() < 1e-12 * (1.0 + reduced.abs()));
        assert!((stats.objective - reduced).abs() < 1e-12 * (1.0 + reduced.abs()));
        let o = dense.brute_minimize(100_000, 1e-13).unwrap();
        assert!(o.objective >= reduced - 1e-12);
        let d3 = o.u.u3.values.iter().zip(&n2.u.u3.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ds = o.sigma.values.iter().zip(&n2.sigma.values).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
        assert!(d3 < 1e-8 && ds < 1e-8, "u3 {d3:e} sigma {ds:e} after {} sweeps", o.sweeps);
    }
}
