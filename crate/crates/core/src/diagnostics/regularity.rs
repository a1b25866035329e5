use crate::grid::{LayeredField, PlateGrid, ScalarField};
use crate::solver::PlateState;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Interior node rectangle ω′ = [i0, i1] × [j0, j1] and forward-quotient offsets in grid steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityProbe {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub offsets: Vec<usize>,
}

impl RegularityProbe {
    /// Centered rectangle covering `frac` of each side, with room for the largest offset.
    pub fn centered(grid: &PlateGrid, frac: f64, offsets: Vec<usize>) -> Result<Self> {
        let q = offsets.iter().copied().max().unwrap_or(1);
        let span = |m: usize| -> (usize, usize) {
            let half = ((m - 1) as f64 * frac * 0.5).round() as usize;
            let c = (m - 1) / 2;
            let lo = c.saturating_sub(half).max(q);
            let hi = (c + half).min(m - 1 - q);
            (lo, hi)
        };
        let (i0, i1) = span(grid.mx());
        let (j0, j1) = span(grid.my());
        let p = RegularityProbe { i0, i1, j0, j1, offsets };
        p.validate(grid)?;
        Ok(p)
    }

    pub fn validate(&self, grid: &PlateGrid) -> Result<()> {
        let q = self.offsets.iter().copied().max().ok_or_else(|| Error::Probe("no offsets".into()))?;
        if self.offsets.contains(&0) {
            return Err(Error::Probe("offsets must be positive".into()));
        }
        if self.i0 > self.i1 || self.j0 > self.j1 {
            return Err(Error::Probe("empty probe rectangle".into()));
        }
        let (mx, my) = (grid.mx(), grid.my());
        if self.i0 < q || self.j0 < q || self.i1 + q > mx - 1 || self.j1 + q > my - 1 {
            return Err(Error::Probe(format!(
                "rectangle [{}, {}]x[{}, {}] is closer than {q} steps to the boundary of the {mx}x{my} grid",
                self.i0, self.i1, self.j0, self.j1
            )));
        }
        Ok(())
    }

    fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j0..=self.j1).flat_map(move |j| (self.i0..=self.i1).map(move |i| (i, j)))
    }
}

/// ‖D_α σ‖ over ω′ × (−½, ½) for α = 1, 2 at offset q.
pub fn sigma_quotients(grid: &PlateGrid, probe: &RegularityProbe, sigma: &LayeredField, q: usize) -> [f64; 2] {
    let nl = grid.nlayers();
    let wl = grid.layers().weights();
    let cell = grid.hx() * grid.hy();
    let mut acc = [0.0; 2];
    for (i, j) in probe.nodes() {
        let n = grid.node(i, j);
        let nb = [grid.node(i + q, j), grid.node(i, j + q)];
        let hq = [q as f64 * grid.hx(), q as f64 * grid.hy()];
        for a in 0..2 {
            for l in 0..nl {
                let d = (sigma.at(nb[a], l) - sigma.at(n, l)) * (1.0 / hq[a]);
                acc[a] += cell * wl[l] * d.frob2();
            }
        }
    }
    [acc[0].sqrt(), acc[1].sqrt()]
}

/// Inter-layer quotients over interior layer pairs; None with fewer than four layers.
pub fn sigma_dz(grid: &PlateGrid, probe: &RegularityProbe, sigma: &LayeredField) -> Option<f64> {
    let nl = grid.nlayers();
    if nl < 4 {
        return None;
    }
    let z = grid.layers().nodes();
    let cell = grid.hx() * grid.hy();
    let mut acc = 0.0;
    for (i, j) in probe.nodes() {
        let n = grid.node(i, j);
        for l in 1..nl - 2 {
            let dz = z[l + 1] - z[l];
            let d = (sigma.at(n, l + 1) - sigma.at(n, l)) * (1.0 / dz);
            acc += cell * dz * d.frob2();
        }
    }
    Some(acc.sqrt())
}

pub fn scalar_quotients(grid: &PlateGrid, probe: &RegularityProbe, v: &ScalarField, q: usize) -> [f64; 2] {
    let cell = grid.hx() * grid.hy();
    let mut acc = [0.0; 2];
    for (i, j) in probe.nodes() {
        let n = grid.node(i, j);
        let nb = [grid.node(i + q, j), grid.node(i, j + q)];
        let hq = [q as f64 * grid.hx(), q as f64 * grid.hy()];
        for a in 0..2 {
            let d = (v.values[nb[a]] - v.values[n]) / hq[a];
            acc[a] += cell * d * d;
        }
    }
    [acc[0].sqrt(), acc[1].sqrt()]
}

/// Sup over steps of each monitored norm, one entry per offset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub offsets: Vec<usize>,
    pub h: Vec<f64>,
    pub sigma_dx: Vec<f64>,
    pub sigma_dy: Vec<f64>,
    pub sigma_dz: Option<f64>,
    pub velocity_dx: Vec<f64>,
    pub velocity_dy: Vec<f64>,
}

impl RegularityReport {
    pub fn empty(probe: &RegularityProbe, grid: &PlateGrid) -> Self {
        let k = probe.offsets.len();
        RegularityReport {
            offsets: probe.offsets.clone(),
            h: probe.offsets.iter().map(|&q| q as f64 * grid.hx().max(grid.hy())).collect(),
            sigma_dx: vec![0.0; k],
            sigma_dy: vec![0.0; k],
            sigma_dz: if grid.nlayers() >= 4 { Some(0.0) } else { None },
            velocity_dx: vec![0.0; k],
            velocity_dy: vec![0.0; k],
        }
    }

    pub fn update(&mut self, probe: &RegularityProbe, grid: &PlateGrid, state: &PlateState, v: &ScalarField) -> Result<()> {
        for (k, &q) in probe.offsets.iter().enumerate() {
            let [a, b] = sigma_quotients(grid, probe, &state.sigma, q);
            self.sigma_dx[k] = self.sigma_dx[k].max(a);
            self.sigma_dy[k] = self.sigma_dy[k].max(b);
            let [c, d] = scalar_quotients(grid, probe, v, q);
            self.velocity_dx[k] = self.velocity_dx[k].max(c);
            self.velocity_dy[k] = self.velocity_dy[k].max(d);
        }
        if let (Some(cur), Some(new)) = (self.sigma_dz, sigma_dz(grid, probe, &state.sigma)) {
            self.sigma_dz = Some(cur.max(new));
        }
        Ok(())
    }

    /// Named monitored series, each indexed by offset.
    pub fn series(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("sigma_dx", &self.sigma_dx[..]),
            ("sigma_dy", &self.sigma_dy[..]),
            ("velocity_dx", &self.velocity_dx[..]),
            ("velocity_dy", &self.velocity_dy[..]),
        ]
    }

    /// Largest (max − min)/max over offsets among the series whose max exceeds `floor`.
    pub fn offset_variation(&self, floor: f64) -> f64 {
        self.series().iter().map(|(_, s)| variation(s, floor)).fold(0.0, f64::max)
    }
}

/// (max − min)/max of a series, 0 when max ≤ floor.
pub fn variation(s: &[f64], floor: f64) -> f64 {
    let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mn = s.iter().copied().fold(f64::INFINITY, f64::min);
    if !(mx > floor) {
        return 0.0;
    }
    (mx - mn) / mx
}

/// Re-evaluates the probe along a stored trajectory; velocities come from consecutive slices.
pub fn regularity_monitor(traj: &[PlateState], grid: &PlateGrid, dt: f64, probe: &RegularityProbe) -> Result<RegularityReport> {
    probe.validate(grid)?;
    let mut r = RegularityReport::empty(probe, grid);
    for s in traj.iter().skip(1) {
        r.update(probe, grid, s, &s.velocity(grid, dt))?;
    }
    Ok(r)
}
