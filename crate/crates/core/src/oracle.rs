//! Brute-force reference solvers for tiny instances.

use crate::potentials::{psi_lambda, TruncationParams};
use crate::tensor::Sym2;
use crate::{Error, Result};

mod dense;
pub use dense::{brute_minimize, DenseIncrementalProblem, OracleSolution};

/// sup_ξ {y:ξ − ψ_λ(ξ)} over the Frobenius ball of radius `radius` by grid search with zooming.
pub fn conjugate_sup(y: &Sym2, p: &TruncationParams, radius: f64, n: usize) -> Result<f64> {
    let n = n.max(10);
    let target = |x: [f64; 3]| {
        let xi = Sym2::from_ortho(x);
        y.ddot(&xi) - psi_lambda(&xi, p)
    };
    let mut center = [0.0; 3];
    let mut half = radius;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    let mut first = true;
    while half > 1e-12 * radius {
        let h = 2.0 * half / (n - 1) as f64;
        best = (f64::NEG_INFINITY, center);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let x = [
                        center[0] - half + a as f64 * h,
                        center[1] - half + b as f64 * h,
                        center[2] - half + c as f64 * h,
                    ];
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    if r2 > radius * radius {
                        continue;
                    }
                    let v = target(x);
                    if v > best.0 {
                        best = (v, x);
                    }
                }
            }
        }
        if first {
            let r = (best.1[0].powi(2) + best.1[1].powi(2) + best.1[2].powi(2)).sqrt();
            if r > radius - 1.5 * h {
                return Err(Error::BoundaryTouch { at: best.1, radius });
            }
            first = false;
        }
        center = best.1;
        half = 2.0 * h;
    }
    Ok(best.0.max(0.0))
}

/// Damped Newton for a smooth convex function of one Sym2 argument, with a
/// finite-difference Hessian of the supplied gradient.
pub fn minimize_pointwise(
    f: &dyn Fn(Sym2) -> f64,
    grad: &dyn Fn(Sym2) -> Sym2,
    x0: Sym2,
    tol: f64,
    max_iter: usize,
) -> Result<Sym2> {
    let mut x = x0.to_ortho();
    let ev = |x: [f64; 3]| f(Sym2::from_ortho(x));
    let gv = |x: [f64; 3]| grad(Sym2::from_ortho(x)).to_ortho();
    let mut fx = ev(x);
    for _ in 0..max_iter {
        let g = gv(x);
        let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if gn <= tol {
            return Ok(Sym2::from_ortho(x));
        }
        let xn = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let eps = 1e-7 * (xn + 1e-6);
        let mut hm = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += eps;
            xm[k] -= eps;
            let (gp, gm) = (gv(xp), gv(xm));
            for r in 0..3 {
                hm[r][k] = (gp[r] - gm[r]) / (2.0 * eps);
            }
        }
        for r in 0..3 {
            for c in 0..r {
                let s = 0.5 * (hm[r][c] + hm[c][r]);
                hm[r][c] = s;
                hm[c][r] = s;
            }
        }
        let mut d = solve3(&hm, &[-g[0], -g[1], -g[2]]).filter(|d| d[0] * g[0] + d[1] * g[1] + d[2] * g[2] < 0.0);
        if d.is_none() {
            d = Some([-g[0], -g[1], -g[2]]);
        }
        let d = d.unwrap();
        let slope = d[0] * g[0] + d[1] * g[1] + d[2] * g[2];
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xt = [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]];
            let ft = ev(xt);
            if ft <= fx + 1e-4 * t * slope || (ft <= fx + 1e-14 * (1.0 + fx.abs()) && gnorm(&gv(xt)) < 0.5 * gn) {
                x = xt;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // objective is flat to rounding; accept if the gradient is small relative to scale
            if gn <= 1e3 * tol {
                return Ok(Sym2::from_ortho(x));
            }
            return Err(Error::OracleCap(max_iter, gn));
        }
    }
    let g = gv(x);
    Err(Error::OracleCap(max_iter, gnorm(&g)))
}

fn gnorm(g: &[f64; 3]) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for k in 0..3 {
        let mut mk = *m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        x[k] = det(&mk) / d;
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
