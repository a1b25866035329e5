//! Unknowns of the admissible set: u = w on clamped edges, with the clamped
//! ghost ring mirrored so that the normal slope of u₃ matches that of w₃.

use super::{KLDisplacement, PlateGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dof {
    Free(usize),
    Fixed,
    /// u₃[g] = u₃[t] + w₃[g] − w₃[t] with `t` the padded index of a Free or Fixed point.
    Mirror(usize),
}

#[derive(Clone, Debug)]
pub struct DofMap {
    ubar: Vec<[Option<usize>; 2]>,
    u3: Vec<Dof>,
    n_free: usize,
    /// padded index or node of every free unknown: (is_u3, index, component)
    owners: Vec<(bool, usize, usize)>,
}

impl DofMap {
    pub fn new(grid: &PlateGrid) -> Self {
        Self::with_order(grid, false)
    }

    /// `reverse` numbers the unknowns from the last node backwards.
    pub fn with_order(grid: &PlateGrid, reverse: bool) -> Self {
        let (mx, my) = (grid.mx() as isize, grid.my() as isize);
        let d = grid.dirichlet();
        let mirror = |i: isize, j: isize| -> (isize, isize) {
            let (mut i, mut j) = (i, j);
            if i == -1 && d.left {
                i = 1;
            }
            if i == mx && d.right {
                i = mx - 2;
            }
            if j == -1 && d.bottom {
                j = 1;
            }
            if j == my && d.top {
                j = my - 2;
            }
            (i, j)
        };
        let np = grid.n_padded();
        let mut u3 = vec![Dof::Fixed; np];
        let mut ubar = vec![[None, None]; grid.n_nodes()];
        let mut owners = Vec::new();
        let mut order: Vec<usize> = (0..np).collect();
        if reverse {
            order.reverse();
        }
        // first pass: classify non-mirror points
        let mut is_free = vec![false; np];
        for k in 0..np {
            let (i, j) = grid.padded_coords(k);
            if grid.is_physical(i, j) {
                is_free[k] = !grid.is_clamped(i as usize, j as usize);
            } else {
                is_free[k] = mirror(i, j) == (i, j);
            }
        }
        let mut n_free = 0;
        for &k in &order {
            let (i, j) = grid.padded_coords(k);
            if grid.is_physical(i, j) {
                let n = grid.node(i as usize, j as usize);
                if is_free[k] {
                    ubar[n] = [Some(n_free), Some(n_free + 1)];
                    owners.push((false, n, 0));
                    owners.push((false, n, 1));
                    n_free += 2;
                }
            }
            if is_free[k] {
                u3[k] = Dof::Free(n_free);
                owners.push((true, k, 0));
                n_free += 1;
            }
        }
        for k in 0..np {
            let (i, j) = grid.padded_coords(k);
            if grid.is_physical(i, j) || is_free[k] {
                continue;
            }
            let (mut a, mut b) = (i, j);
            loop {
                let (c, e) = mirror(a, b);
                if (c, e) == (a, b) {
                    break;
                }
                a = c;
                b = e;
            }
            u3[k] = Dof::Mirror(grid.padded(a, b));
        }
        DofMap { ubar, u3, n_free, owners }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn ubar_dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.ubar[node][comp]
    }

    pub fn u3_dof_kind(&self, k: usize) -> Dof {
        self.u3[k]
    }

    /// Free unknown driving u₃ at padded index `k`, following mirrors.
    pub fn u3_dof(&self, k: usize) -> Option<usize> {
        match self.u3[k] {
            Dof::Free(f) => Some(f),
            Dof::Fixed => None,
            Dof::Mirror(t) => match self.u3[t] {
                Dof::Free(f) => Some(f),
                _ => None,
            },
        }
    }

    /// (is_u3, index, component) of each free unknown.
    pub fn owner(&self, f: usize) -> (bool, usize, usize) {
        self.owners[f]
    }

    pub fn is_free_ghost(&self, grid: &PlateGrid, k: usize) -> bool {
        let (i, j) = grid.padded_coords(k);
        !grid.is_physical(i, j) && matches!(self.u3[k], Dof::Free(_))
    }

    /// Admissible displacement with free values `z` and boundary datum `w`.
    pub fn expand(&self, z: &[f64], w: &KLDisplacement) -> KLDisplacement {
        let mut u = w.clone();
        for (n, d) in self.ubar.iter().enumerate() {
            for c in 0..2 {
                if let Some(f) = d[c] {
                    u.ubar.values[n][c] = z[f];
                }
            }
        }
        for (k, d) in self.u3.iter().enumerate() {
            if let Dof::Free(f) = d {
                u.u3.values[k] = z[*f];
            }
        }
        for (k, d) in self.u3.iter().enumerate() {
            if let Dof::Mirror(t) = d {
                u.u3.values[k] = u.u3.values[*t] + w.u3.values[k] - w.u3.values[*t];
            }
        }
        u
    }

    pub fn restrict(&self, u: &KLDisplacement) -> Vec<f64> {
        let mut z = vec![0.0; self.n_free];
        for (n, d) in self.ubar.iter().enumerate() {
            for c in 0..2 {
                if let Some(f) = d[c] {
                    z[f] = u.ubar.values[n][c];
                }
            }
        }
        for (k, d) in self.u3.iter().enumerate() {
            if let Dof::Free(f) = d {
                z[*f] = u.u3.values[k];
            }
        }
        z
    }

    /// Replaces the constrained values of `u` so that it becomes admissible for `w`.
    pub fn project(&self, u: &KLDisplacement, w: &KLDisplacement) -> KLDisplacement {
        self.expand(&self.restrict(u), w)
    }

    /// Largest violation of the admissibility constraints.
    pub fn constraint_violation(&self, u: &KLDisplacement, w: &KLDisplacement) -> f64 {
        let p = self.project(u, w);
        let a = u.ubar.values.iter().zip(&p.ubar.values).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()));
        let b = u.u3.values.iter().zip(&p.u3.values).map(|(x, y)| (x - y).abs());
        a.chain(b).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{hessian, Edge, EdgeMask, PaddedField, ThicknessRule};
    use super::*;

    fn grid(edges: &[Edge]) -> PlateGrid {
        PlateGrid::new(1.0, 1.0, 4, 3, ThicknessRule::gauss(2).unwrap(), EdgeMask::from_edges(edges)).unwrap()
    }

    #[test]
    fn counts_and_round_trip() {
        let g = grid(&[Edge::Left]);
        let m = DofMap::new(&g);
        // ū: all nodes but the left column; u₃: those plus the free ghosts
        let free_nodes = g.n_nodes() - g.my();
        let free_ghosts = g.n_padded() - g.n_nodes() - g.pmy();
        assert_eq!(m.n_free(), 3 * free_nodes + free_ghosts);
        let w = KLDisplacement::from_fns(&g, |x, y| [x + y, x * y], |x, y| x * x + y);
        let z: Vec<f64> = (0..m.n_free()).map(|k| k as f64 * 0.1).collect();
        let u = m.expand(&z, &w);
        assert_eq!(m.restrict(&u), z);
        assert!(m.constraint_violation(&u, &w) < 1e-15);
        let r = DofMap::with_order(&g, true);
        assert_eq!(r.n_free(), m.n_free());
    }

    #[test]
    fn clamped_ghosts_match_datum_slope() {
        let g = grid(&[Edge::Left, Edge::Bottom]);
        let m = DofMap::new(&g);
        let wf = |x: f64, y: f64| 0.3 * x - 0.2 * y + x * y;
        let w = KLDisplacement { ubar: super::super::VecField::zeros(&g), u3: PaddedField::from_fn(&g, wf) };
        let z = vec![0.0; m.n_free()];
        let mut u = m.expand(&z, &w);
        // u − w is even across each clamped edge, including the shared corner
        for j in -1..g.my() as isize {
            let d = |i: isize| u.u3.at(&g, i, j) - w.u3.at(&g, i, j);
            if j >= 1 {
                assert!((d(-1) - d(1)).abs() < 1e-14);
            }
        }
        assert!((u.u3.at(&g, -1, -1) - w.u3.at(&g, -1, -1) - (u.u3.at(&g, 1, 1) - w.u3.at(&g, 1, 1))).abs() < 1e-14);
        // with u = w everywhere admissible, the Hessian equals that of w
        u = m.project(&w, &w);
        let hu = hessian(&u.u3, &g).unwrap();
        let hw = hessian(&w.u3, &g).unwrap();
        assert_eq!(hu, hw);
    }
}
