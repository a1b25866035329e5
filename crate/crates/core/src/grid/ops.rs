use super::{KLDisplacement, LayeredField, NodeField, PaddedField, PlateGrid, ScalarField, Sym2Field, VecField};
use crate::tensor::Sym2;
use crate::Result;

/// First-derivative coefficients at index `i` of an `m`-point line with spacing `h`.
/// Central in the interior, one-sided at both ends.
pub(crate) fn d1(i: usize, m: usize, h: f64) -> [(usize, f64); 2] {
    if i == 0 {
        [(1, 1.0 / h), (0, -1.0 / h)]
    } else if i + 1 == m {
        [(i, 1.0 / h), (i - 1, -1.0 / h)]
    } else {
        [(i + 1, 0.5 / h), (i - 1, -0.5 / h)]
    }
}

/// Strain stencil at one node: the Sym2 coefficient of every scalar unknown it touches.
#[derive(Clone, Debug, Default)]
pub struct NodeStencil {
    /// (node, component, coefficient of E(ū))
    pub ubar: Vec<(usize, usize, Sym2)>,
    /// (padded index, coefficient of D²u₃)
    pub u3: Vec<(usize, Sym2)>,
}

fn push_merge<K: PartialEq>(v: &mut Vec<(K, Sym2)>, k: K, c: Sym2) {
    if let Some(e) = v.iter_mut().find(|e| e.0 == k) {
        e.1 += c;
    } else {
        v.push((k, c));
    }
}

pub fn node_stencil(grid: &PlateGrid, n: usize) -> NodeStencil {
    let (i, j) = grid.coords(n);
    let (mx, my) = (grid.mx(), grid.my());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut ub: Vec<((usize, usize), Sym2)> = Vec::with_capacity(10);
    for (ii, c) in d1(i, mx, hx) {
        let nn = grid.node(ii, j);
        push_merge(&mut ub, (nn, 0), Sym2::new(c, 0.0, 0.0));
        push_merge(&mut ub, (nn, 1), Sym2::new(0.0, 0.0, 0.5 * c));
    }
    for (jj, c) in d1(j, my, hy) {
        let nn = grid.node(i, jj);
        push_merge(&mut ub, (nn, 1), Sym2::new(0.0, c, 0.0));
        push_merge(&mut ub, (nn, 0), Sym2::new(0.0, 0.0, 0.5 * c));
    }
    let (pi, pj) = (i as isize, j as isize);
    let mut u3 = Vec::with_capacity(9);
    let (cx, cy, cxy) = (1.0 / (hx * hx), 1.0 / (hy * hy), 0.25 / (hx * hy));
    push_merge(&mut u3, grid.padded(pi, pj), Sym2::new(-2.0 * cx, -2.0 * cy, 0.0));
    for s in [-1isize, 1] {
        push_merge(&mut u3, grid.padded(pi + s, pj), Sym2::new(cx, 0.0, 0.0));
        push_merge(&mut u3, grid.padded(pi, pj + s), Sym2::new(0.0, cy, 0.0));
        for t in [-1isize, 1] {
            push_merge(&mut u3, grid.padded(pi + s, pj + t), Sym2::new(0.0, 0.0, (s * t) as f64 * cxy));
        }
    }
    NodeStencil { ubar: ub.into_iter().map(|((nn, c), s)| (nn, c, s)).collect(), u3 }
}

pub fn stencils(grid: &PlateGrid) -> Vec<NodeStencil> {
    (0..grid.n_nodes()).map(|n| node_stencil(grid, n)).collect()
}

/// Symmetric gradient of ū.
pub fn sym_grad(ubar: &VecField, grid: &PlateGrid) -> Result<Sym2Field> {
    ubar.check(grid)?;
    let (mx, my) = (grid.mx(), grid.my());
    let (hx, hy) = (grid.hx(), grid.hy());
    let u = &ubar.values;
    let values = (0..grid.n_nodes())
        .map(|n| {
            let (i, j) = grid.coords(n);
            let mut dx = [0.0; 2];
            let mut dy = [0.0; 2];
            for (ii, c) in d1(i, mx, hx) {
                let v = u[grid.node(ii, j)];
                dx[0] += c * v[0];
                dx[1] += c * v[1];
            }
            for (jj, c) in d1(j, my, hy) {
                let v = u[grid.node(i, jj)];
                dy[0] += c * v[0];
                dy[1] += c * v[1];
            }
            Sym2::new(dx[0], dy[1], 0.5 * (dy[0] + dx[1]))
        })
        .collect();
    Ok(NodeField { values })
}

/// Compact second differences of the padded u₃ at every physical node.
pub fn hessian(u3: &PaddedField, grid: &PlateGrid) -> Result<Sym2Field> {
    u3.check(grid)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let values = (0..grid.n_nodes())
        .map(|n| {
            let (i, j) = grid.coords(n);
            let (i, j) = (i as isize, j as isize);
            let u = |a: isize, b: isize| u3.at(grid, i + a, j + b);
            let c = u(0, 0);
            Sym2::new(
                (u(1, 0) - 2.0 * c + u(-1, 0)) / (hx * hx),
                (u(0, 1) - 2.0 * c + u(0, -1)) / (hy * hy),
                (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4.0 * hx * hy),
            )
        })
        .collect();
    Ok(NodeField { values })
}

/// Transpose of [`sym_grad`] with respect to the Frobenius pairing summed over nodes.
pub fn sym_grad_transpose(tau: &Sym2Field, grid: &PlateGrid) -> Result<VecField> {
    tau.check(grid)?;
    let mut out = VecField::zeros(grid);
    for n in 0..grid.n_nodes() {
        let t = tau.values[n];
        let (i, j) = grid.coords(n);
        for (ii, c) in d1(i, grid.mx(), grid.hx()) {
            let g = &mut out.values[grid.node(ii, j)];
            g[0] += c * t.a11;
            g[1] += c * t.a12;
        }
        for (jj, c) in d1(j, grid.my(), grid.hy()) {
            let g = &mut out.values[grid.node(i, jj)];
            g[0] += c * t.a12;
            g[1] += c * t.a22;
        }
    }
    Ok(out)
}

/// Transpose of [`hessian`] with respect to the Frobenius pairing summed over nodes.
pub fn hessian_transpose(tau: &Sym2Field, grid: &PlateGrid) -> Result<PaddedField> {
    tau.check(grid)?;
    let mut out = PaddedField::zeros(grid);
    for n in 0..grid.n_nodes() {
        let st = node_stencil(grid, n);
        for (k, c) in st.u3 {
            out.values[k] += c.ddot(&tau.values[n]);
        }
    }
    Ok(out)
}

/// Weak divergence: −W⁻¹ Eᵀ W τ, the H-adjoint of −sym_grad.
pub fn div_weak(tau: &Sym2Field, grid: &PlateGrid) -> Result<VecField> {
    let w = grid.node_weights();
    let wt = NodeField { values: tau.values.iter().zip(&w).map(|(t, w)| *t * *w).collect() };
    let mut g = sym_grad_transpose(&wt, grid)?;
    for (v, w) in g.values.iter_mut().zip(&w) {
        v[0] = -v[0] / w;
        v[1] = -v[1] / w;
    }
    Ok(g)
}

/// Weak double divergence on physical nodes: W⁻¹ Hᵀ W τ.
pub fn divdiv_weak(tau: &Sym2Field, grid: &PlateGrid) -> Result<ScalarField> {
    let w = grid.node_weights();
    let wt = NodeField { values: tau.values.iter().zip(&w).map(|(t, w)| *t * *w).collect() };
    let g = hessian_transpose(&wt, grid)?.physical(grid);
    Ok(NodeField { values: g.values.iter().zip(&w).map(|(v, w)| v / w).collect() })
}

/// Central-difference divergence at nodes away from the boundary; boundary entries are zero.
pub fn div_strong(tau: &Sym2Field, grid: &PlateGrid) -> Result<VecField> {
    tau.check(grid)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut out = VecField::zeros(grid);
    for n in 0..grid.n_nodes() {
        let (i, j) = grid.coords(n);
        if grid.on_boundary(i, j) {
            continue;
        }
        let t = |a: usize, b: usize| tau.values[grid.node(a, b)];
        let dx = (t(i + 1, j) - t(i - 1, j)) * (0.5 / hx);
        let dy = (t(i, j + 1) - t(i, j - 1)) * (0.5 / hy);
        out.values[n] = [dx.a11 + dy.a12, dx.a12 + dy.a22];
    }
    Ok(out)
}

/// ∂₁₁τ₁₁ + 2∂₁₂τ₁₂ + ∂₂₂τ₂₂ at nodes at depth ≥ 1; boundary entries are zero.
pub fn divdiv_strong(tau: &Sym2Field, grid: &PlateGrid) -> Result<ScalarField> {
    tau.check(grid)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut out = ScalarField::zeros(grid);
    for n in 0..grid.n_nodes() {
        let (i, j) = grid.coords(n);
        if grid.on_boundary(i, j) {
            continue;
        }
        let t = |a: usize, b: usize| tau.values[grid.node(a, b)];
        let c = t(i, j);
        let d11 = (t(i + 1, j).a11 - 2.0 * c.a11 + t(i - 1, j).a11) / (hx * hx);
        let d22 = (t(i, j + 1).a22 - 2.0 * c.a22 + t(i, j - 1).a22) / (hy * hy);
        let d12 = (t(i + 1, j + 1).a12 - t(i + 1, j - 1).a12 - t(i - 1, j + 1).a12 + t(i - 1, j - 1).a12) / (4.0 * hx * hy);
        out.values[n] = d11 + 2.0 * d12 + d22;
    }
    Ok(out)
}

/// Fill the ghost ring by quadratic extrapolation along each axis.
pub fn pad_by_extrapolation(u: &ScalarField, grid: &PlateGrid) -> Result<PaddedField> {
    u.check(grid)?;
    let (mx, my) = (grid.mx() as isize, grid.my() as isize);
    let mut p = PaddedField::zeros(grid);
    for n in 0..grid.n_nodes() {
        let (i, j) = grid.coords(n);
        p.values[grid.padded(i as isize, j as isize)] = u.values[n];
    }
    let ex = |a: f64, b: f64, c: f64| 3.0 * a - 3.0 * b + c;
    for j in 0..my {
        let v = |i: isize| p.values[grid.padded(i, j)];
        let (l, r) = (ex(v(0), v(1), v(2)), ex(v(mx - 1), v(mx - 2), v(mx - 3)));
        p.values[grid.padded(-1, j)] = l;
        p.values[grid.padded(mx, j)] = r;
    }
    for i in -1..=mx {
        let v = |j: isize| p.values[grid.padded(i, j)];
        let (b, t) = (ex(v(0), v(1), v(2)), ex(v(my - 1), v(my - 2), v(my - 3)));
        p.values[grid.padded(i, -1)] = b;
        p.values[grid.padded(i, my)] = t;
    }
    Ok(p)
}

/// Central-difference gradient of the padded u₃ at physical nodes.
pub fn grad_u3(u3: &PaddedField, grid: &PlateGrid) -> Result<VecField> {
    u3.check(grid)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let values = (0..grid.n_nodes())
        .map(|n| {
            let (i, j) = grid.coords(n);
            let (i, j) = (i as isize, j as isize);
            [
                (u3.at(grid, i + 1, j) - u3.at(grid, i - 1, j)) / (2.0 * hx),
                (u3.at(grid, i, j + 1) - u3.at(grid, i, j - 1)) / (2.0 * hy),
            ]
        })
        .collect();
    Ok(NodeField { values })
}

/// E u(x′, x₃) = E ū(x′) − x₃ D²u₃(x′) at each thickness layer.
pub fn kl_strain(u: &KLDisplacement, grid: &PlateGrid) -> Result<LayeredField> {
    let e = sym_grad(&u.ubar, grid)?;
    let h = hessian(&u.u3, grid)?;
    Ok(compose_layers(&e, &h, grid, -1.0))
}

/// f(x′, x₃) = a(x′) + s·x₃·b(x′).
pub fn compose_layers(a: &Sym2Field, b: &Sym2Field, grid: &PlateGrid, s: f64) -> LayeredField {
    let nl = grid.nlayers();
    let mut values = Vec::with_capacity(grid.n_nodes() * nl);
    for n in 0..grid.n_nodes() {
        for &z in grid.layers().nodes() {
            values.push(a.values[n] + b.values[n] * (s * z));
        }
    }
    LayeredField { nlayers: nl, values }
}

pub fn moment_zero(f: &LayeredField, grid: &PlateGrid) -> Result<Sym2Field> {
    f.check(grid)?;
    let w = grid.layers().weights();
    let values = f.values.chunks(f.nlayers).map(|c| c.iter().zip(w).fold(Sym2::ZERO, |acc, (v, w)| acc + *v * *w)).collect();
    Ok(NodeField { values })
}

pub fn moment_first(f: &LayeredField, grid: &PlateGrid) -> Result<Sym2Field> {
    f.check(grid)?;
    let (z, w) = (grid.layers().nodes(), grid.layers().weights());
    let values = f
        .values
        .chunks(f.nlayers)
        .map(|c| c.iter().zip(z.iter().zip(w)).fold(Sym2::ZERO, |acc, (v, (z, w))| acc + *v * (12.0 * w * z)))
        .collect();
    Ok(NodeField { values })
}

pub fn perp_part(f: &LayeredField, grid: &PlateGrid) -> Result<LayeredField> {
    let bar = moment_zero(f, grid)?;
    let hat = moment_first(f, grid)?;
    let aff = compose_layers(&bar, &hat, grid, 1.0);
    Ok(f.zip_map(&aff, |a, b| *a - *b))
}

/// Full 3D displacement (u₁, u₂, u₃) at each (node, layer).
pub fn reconstruct_3d(u: &KLDisplacement, grid: &PlateGrid) -> Result<Vec<[f64; 3]>> {
    u.check(grid)?;
    let g = grad_u3(&u.u3, grid)?;
    let phys = u.u3.physical(grid);
    let mut out = Vec::with_capacity(grid.n_nodes() * grid.nlayers());
    for n in 0..grid.n_nodes() {
        let ub = u.ubar.values[n];
        for &z in grid.layers().nodes() {
            out.push([ub[0] - z * g.values[n][0], ub[1] - z * g.values[n][1], phys.values[n]]);
        }
    }
    Ok(out)
}

/// Σ_n W_n Σ_l w_l a:b over the plate.
pub fn layered_inner(a: &LayeredField, b: &LayeredField, grid: &PlateGrid) -> f64 {
    let w = grid.layers().weights();
    let mut s = 0.0;
    for n in 0..grid.n_nodes() {
        let wn = grid.node_weight(n);
        let nl = a.nlayers;
        for l in 0..nl {
            s += wn * w[l] * a.values[n * nl + l].ddot(&b.values[n * nl + l]);
        }
    }
    s
}

/// Σ_n W_n a_n b_n.
pub fn weighted_dot(a: &[f64], b: &[f64], grid: &PlateGrid) -> f64 {
    (0..grid.n_nodes()).map(|n| grid.node_weight(n) * a[n] * b[n]).sum()
}

#[cfg(test)]
mod tests {
    use super::super::{Edge, EdgeMask, ThicknessRule};
    use super::*;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize, layers: usize) -> PlateGrid {
        PlateGrid::new(2.0, 1.5, nx, ny, ThicknessRule::gauss(layers).unwrap(), EdgeMask::from_edges(&[Edge::Left])).unwrap()
    }

    fn close(a: Sym2, b: Sym2, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn sym_grad_examples() {
        let g = grid(5, 4, 2);
        let c = VecField::from_fn(&g, |_, _| [3.0, -1.0]);
        assert!(sym_grad(&c, &g).unwrap().values.iter().all(|s| s.max_abs() < 1e-14));
        let a = VecField::from_fn(&g, |x, _| [x, 0.0]);
        assert!(sym_grad(&a, &g).unwrap().values.iter().all(|s| close(*s, Sym2::diag(1.0, 0.0), 1e-13)));
        let b = VecField::from_fn(&g, |x, y| [y, x]);
        assert!(sym_grad(&b, &g).unwrap().values.iter().all(|s| close(*s, Sym2::new(0.0, 0.0, 1.0), 1e-13)));
    }

    #[test]
    fn hessian_examples() {
        let g = grid(5, 4, 2);
        let aff = PaddedField::from_fn(&g, |x, y| 1.0 + 2.0 * x - y);
        assert!(hessian(&aff, &g).unwrap().values.iter().all(|s| s.max_abs() < 1e-12));
        let q = PaddedField::from_fn(&g, |x, _| 0.5 * x * x);
        assert!(hessian(&q, &g).unwrap().values.iter().all(|s| close(*s, Sym2::diag(1.0, 0.0), 1e-12)));
        let m = PaddedField::from_fn(&g, |x, y| x * y);
        assert!(hessian(&m, &g).unwrap().values.iter().all(|s| close(*s, Sym2::new(0.0, 0.0, 1.0), 1e-12)));
        let bad = PaddedField { values: vec![0.0; 3] };
        assert!(hessian(&bad, &g).is_err());
    }

    #[test]
    fn kl_strain_layer_example() {
        let g = grid(4, 4, 2);
        let u = KLDisplacement::from_fns(&g, |_, _| [0.0, 0.0], |x, _| 0.5 * x * x);
        let e = kl_strain(&u, &g).unwrap();
        let z = 1.0 / (2.0 * 3f64.sqrt());
        for n in 0..g.n_nodes() {
            assert!(close(e.at(n, 0), Sym2::diag(z, 0.0), 1e-12));
            assert!(close(e.at(n, 1), Sym2::diag(-z, 0.0), 1e-12));
        }
    }

    #[test]
    fn moment_examples() {
        let g = grid(3, 3, 4);
        let a = Sym2::new(1.0, -2.0, 0.5);
        let c = LayeredField::from_fn(&g, |_, _, _| a);
        let lin = LayeredField::from_fn(&g, |_, _, z| a * z);
        let quad = LayeredField::from_fn(&g, |_, _, z| a * (z * z));
        let cub = LayeredField::from_fn(&g, |_, _, z| a * (z * z * z));
        let m0 = |f: &LayeredField| moment_zero(f, &g).unwrap().values[4];
        let m1 = |f: &LayeredField| moment_first(f, &g).unwrap().values[4];
        assert!(close(m0(&c), a, 1e-14));
        assert!(close(m0(&lin), Sym2::ZERO, 1e-14));
        assert!(close(m0(&quad), a * (1.0 / 12.0), 1e-14));
        assert!(close(m1(&c), Sym2::ZERO, 1e-14));
        assert!(close(m1(&lin), a, 1e-14));
        assert!(close(m1(&cub), a * (12.0 / 80.0), 1e-14));
        let pq = perp_part(&quad, &g).unwrap();
        for (k, &z) in g.layers().nodes().iter().enumerate() {
            assert!(close(pq.at(4, k), a * (z * z - 1.0 / 12.0), 1e-14));
        }
        let aff = LayeredField::from_fn(&g, |x, _, z| a * (x + 3.0 * z));
        assert!(perp_part(&aff, &g).unwrap().values.iter().all(|s| s.max_abs() < 1e-14));
    }

    #[test]
    fn transposes_match_forward_operators() {
        let g = grid(4, 3, 2);
        let u = KLDisplacement::from_fns(&g, |x, y| [(x * y).sin(), x - y * y], |x, y| (x + 2.0 * y).cos());
        let tau = Sym2Field::from_fn(&g, |x, y| Sym2::new(x.exp(), y * x, (x - y).sin()));
        let e = sym_grad(&u.ubar, &g).unwrap();
        let h = hessian(&u.u3, &g).unwrap();
        let lhs1: f64 = e.values.iter().zip(&tau.values).map(|(a, b)| a.ddot(b)).sum();
        let gt = sym_grad_transpose(&tau, &g).unwrap();
        let rhs1: f64 = gt.values.iter().zip(&u.ubar.values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        assert!((lhs1 - rhs1).abs() < 1e-10 * lhs1.abs().max(1.0));
        let lhs2: f64 = h.values.iter().zip(&tau.values).map(|(a, b)| a.ddot(b)).sum();
        let ht = hessian_transpose(&tau, &g).unwrap();
        let rhs2: f64 = ht.values.iter().zip(&u.u3.values).map(|(a, b)| a * b).sum();
        assert!((lhs2 - rhs2).abs() < 1e-10 * lhs2.abs().max(1.0));
    }

    #[test]
    fn stencils_reproduce_operators() {
        let g = grid(3, 4, 2);
        let u = KLDisplacement::from_fns(&g, |x, y| [x * x * y, y.sin()], |x, y| x.powi(3) - x * y);
        let e = sym_grad(&u.ubar, &g).unwrap();
        let h = hessian(&u.u3, &g).unwrap();
        for (n, st) in stencils(&g).iter().enumerate() {
            assert!(st.ubar.len() + st.u3.len() <= 19);
            let es = st.ubar.iter().fold(Sym2::ZERO, |a, (m, c, s)| a + *s * u.ubar.values[*m][*c]);
            let hs = st.u3.iter().fold(Sym2::ZERO, |a, (k, s)| a + *s * u.u3.values[*k]);
            assert!(close(es, e.values[n], 1e-12));
            assert!(close(hs, h.values[n], 1e-10));
        }
    }

    #[test]
    fn extrapolation_is_exact_on_quadratics() {
        let g = grid(4, 3, 2);
        let f = |x: f64, y: f64| 1.0 + x - 2.0 * y + x * x - 0.5 * x * y + y * y;
        let p = pad_by_extrapolation(&ScalarField::from_fn(&g, f), &g).unwrap();
        let exact = PaddedField::from_fn(&g, f);
        for (a, b) in p.values.iter().zip(&exact.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let gr = grad_u3(&exact, &g).unwrap();
        let (x, y) = g.point(7);
        assert!((gr.values[7][0] - (1.0 + 2.0 * x - 0.5 * y)).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_dense_evaluation() {
        let g = grid(4, 4, 3);
        let u = KLDisplacement::from_fns(&g, |x, y| [x * y, -x], |x, y| 0.5 * x * x + x * y);
        let r = reconstruct_3d(&u, &g).unwrap();
        for n in 0..g.n_nodes() {
            let (x, y) = g.point(n);
            for (l, &z) in g.layers().nodes().iter().enumerate() {
                let v = r[n * 3 + l];
                assert!((v[0] - (x * y - z * (x + y))).abs() < 1e-12);
                assert!((v[1] - (-x - z * x)).abs() < 1e-12);
                assert!((v[2] - (0.5 * x * x + x * y)).abs() < 1e-12);
            }
        }
    }

    fn interior_error(n: usize) -> (f64, f64) {
        let g = grid(n, n, 2);
        let u = KLDisplacement::from_fns(&g, |x, y| [(x + 0.3 * y).sin(), (0.7 * x * y).cos()], |x, y| (0.8 * x).sin() * (1.1 * y).cos());
        let e = sym_grad(&u.ubar, &g).unwrap();
        let h = hessian(&u.u3, &g).unwrap();
        let (mut ee, mut eh) = (0.0f64, 0.0f64);
        for m in 0..g.n_nodes() {
            let (i, j) = g.coords(m);
            if g.on_boundary(i, j) {
                continue;
            }
            let (x, y) = g.point(m);
            let ex = Sym2::new((x + 0.3 * y).cos(), -0.7 * x * (0.7 * x * y).sin(), 0.5 * (0.3 * (x + 0.3 * y).cos() - 0.7 * y * (0.7 * x * y).sin()));
            let hx = Sym2::new(
                -0.64 * (0.8 * x).sin() * (1.1 * y).cos(),
                -1.21 * (0.8 * x).sin() * (1.1 * y).cos(),
                -0.88 * (0.8 * x).cos() * (1.1 * y).sin(),
            );
            ee = ee.max((e.values[m] - ex).max_abs());
            eh = eh.max((h.values[m] - hx).max_abs());
        }
        (ee, eh)
    }

    #[test]
    fn interior_stencils_are_second_order() {
        let a = interior_error(15);
        let b = interior_error(31);
        let c = interior_error(63);
        let s1 = ((a.0 / b.0).log2() + (b.0 / c.0).log2()) / 2.0;
        let s2 = ((a.1 / b.1).log2() + (b.1 / c.1).log2()) / 2.0;
        assert!((s1 - 2.0).abs() < 0.2, "sym_grad slope {s1}");
        assert!((s2 - 2.0).abs() < 0.2, "hessian slope {s2}");
    }

    proptest! {
        #[test]
        fn kl_moments_recover_kinematics(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, nl in 2usize..6) {
            let g = grid(4, 3, nl);
            let u = KLDisplacement::from_fns(&g, |x, y| [a * x * y, b * x.sin()], |x, y| c * x * x * y + a * y);
            let e = kl_strain(&u, &g).unwrap();
            let m0 = moment_zero(&e, &g).unwrap();
            let m1 = moment_first(&e, &g).unwrap();
            let sg = sym_grad(&u.ubar, &g).unwrap();
            let hs = hessian(&u.u3, &g).unwrap();
            for n in 0..g.n_nodes() {
                prop_assert!(close(m0.values[n], sg.values[n], 1e-13 * (1.0 + sg.values[n].max_abs())));
                prop_assert!(close(m1.values[n], -hs.values[n], 1e-13 * (1.0 + hs.values[n].max_abs())));
            }
            let pp = perp_part(&e, &g).unwrap();
            prop_assert!(pp.values.iter().all(|s| s.max_abs() < 1e-12 * (1.0 + hs.values.iter().map(|h| h.max_abs()).fold(0.0, f64::max))));
        }

        #[test]
        fn perp_part_is_orthogonal_to_affine(c0 in -1.0..1.0f64, c1 in -1.0..1.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let g = grid(3, 3, 5);
            let f = LayeredField::from_fn(&g, |x, y, z| Sym2::new(c0 * z * z * z + x, c1 * (4.0 * z).sin(), z * z * y));
            let p = perp_part(&f, &g).unwrap();
            let w = g.layers().weights();
            for n in 0..g.n_nodes() {
                let s = (0..5).fold(Sym2::ZERO, |acc, l| acc + p.at(n, l) * (w[l] * (a + b * g.layers().nodes()[l])));
                prop_assert!(s.max_abs() < 1e-14);
            }
        }
    }
}
