//! Isotropic reduced elasticity and the implicit visco-plastic return map.

use crate::potentials::TruncationParams;
use crate::tensor::{norm_r, Sym2};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elasticity {
    mu: f64,
    ell: f64,
}

impl Elasticity {
    pub fn new(mu: f64, ell: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::validation("mu>0", "material.mu", format!("mu = {mu}")));
        }
        if !(mu + ell > 0.0 && ell.is_finite()) {
            return Err(Error::validation("mu+ell>0", "material.ell", format!("2mu + 2ell = {}", 2.0 * (mu + ell))));
        }
        Ok(Elasticity { mu, ell })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Eigenvalues of A_r on the trace-free and spherical subspaces.
    pub fn compliance_eigen(&self) -> (f64, f64) {
        (1.0 / (2.0 * self.mu), 1.0 / (2.0 * self.mu + 2.0 * self.ell))
    }

    pub fn coercivity_constants(&self) -> (f64, f64) {
        let (ad, as_) = self.compliance_eigen();
        // ½Aξ:ξ = ad/2·|ξ_d|² + as/2·|ξ_s|² while |ξ|_r² = |ξ_d|² + |ξ_s|²/3
        let dev = ad / 2.0;
        let sph = 3.0 * as_ / 2.0;
        (dev.min(sph), dev.max(sph))
    }
}

pub fn apply_c(xi: &Sym2, e: &Elasticity) -> Sym2 {
    let t = e.ell * xi.trace();
    Sym2 {
        a11: 2.0 * e.mu * xi.a11 + t,
        a22: 2.0 * e.mu * xi.a22 + t,
        a12: 2.0 * e.mu * xi.a12,
    }
}

pub fn apply_a(sigma: &Sym2, e: &Elasticity) -> Sym2 {
    let c = 1.0 / (2.0 * e.mu);
    let t = e.ell / (2.0 * e.mu * (2.0 * e.mu + 2.0 * e.ell)) * sigma.trace();
    Sym2 {
        a11: c * sigma.a11 - t,
        a22: c * sigma.a22 - t,
        a12: c * sigma.a12,
    }
}

pub fn coercivity_constants(e: &Elasticity) -> (f64, f64) {
    e.coercivity_constants()
}

/// Pointwise solution of A_r σ + dt·Dψ_λ(σ) = η with its consistent tangent.
#[derive(Clone, Copy, Debug)]
pub struct ReturnMap {
    pub sigma: Sym2,
    /// |σ|_r
    pub s: f64,
    /// dσ/dη in orthonormal coordinates (see [`Sym2::to_ortho`]).
    pub tangent: [[f64; 3]; 3],
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

/// Solves A_r σ + dt·Dψ_λ(σ) = η.
///
/// Both A_r and Dψ_λ act diagonally on the trace-free / spherical split, so
/// σ = M(s)η with s = |σ|_r the root of a monotone scalar equation.
pub fn return_map_full(eta: &Sym2, dt: f64, e: &Elasticity, p: &TruncationParams, tol: f64) -> Result<ReturnMap> {
    let x = eta.to_ortho();
    let (ad, as_) = e.compliance_eigen();
    let qd = x[0] * x[0] + x[1] * x[1];
    let qs = x[2] * x[2];
    let md = |c: f64| 1.0 / (ad + dt * c);
    let ms = |c: f64| 1.0 / (as_ + dt * c / 3.0);
    // g(s) = s² − |M(s)η|_r², increasing in s
    let g = |s: f64| {
        let c = p.factor(s);
        let (a, b) = (md(c), ms(c));
        s * s - (a * a * qd + b * b * qs / 3.0)
    };
    let s_hi = (qd / (ad * ad) + qs / (3.0 * as_ * as_)).sqrt();
    let mut iterations = 0;
    let s = if s_hi == 0.0 || g(s_hi) <= 0.0 {
        s_hi
    } else {
        let (mut lo, mut hi) = (0.0f64, s_hi);
        let mut s = s_hi;
        let stol = tol * s_hi;
        let mut converged = false;
        while iterations < MAX_ITER {
            iterations += 1;
            let c = p.factor(s);
            let dc = p.factor_derivative(s);
            let (a, b) = (md(c), ms(c));
            let gv = s * s - (a * a * qd + b * b * qs / 3.0);
            if gv > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            // d/ds of a² = −2a³·dt·c', of b² = −2b³·dt·c'/3
            let dg = 2.0 * s + 2.0 * dt * dc * (a * a * a * qd + b * b * b * qs / 9.0);
            let mut next = s - gv / dg;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - s).abs();
            s = next;
            if step <= stol || hi - lo <= stol {
                let c = p.factor(s);
                let sig = Sym2::from_ortho([md(c) * x[0], md(c) * x[1], ms(c) * x[2]]);
                if residual(&sig, eta, dt, e, p) <= tol * (1.0 + eta.frob()) || hi - lo <= 4.0 * f64::EPSILON * s {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::ReturnMap { residual: g(s).abs() });
        }
        s
    };
    let c = p.factor(s);
    let (a, b) = (md(c), ms(c));
    let y = [a * x[0], a * x[1], b * x[2]];
    let sigma = Sym2::from_ortho(y);
    let mut t = [[0.0; 3]; 3];
    t[0][0] = a;
    t[1][1] = a;
    t[2][2] = b;
    let dc = p.factor_derivative(s);
    if s > 0.0 && dc > 0.0 {
        // dσ/dη = M − β vvᵀ with v = P M σ... expressed through y = σ coordinates
        let v = [a * y[0], a * y[1], b * y[2] / 3.0];
        let q = y[0] * v[0] + y[1] * v[1] + y[2] * v[2] / 3.0;
        let beta = dt * dc / (s + dt * dc * q);
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] -= beta * v[i] * v[j];
            }
        }
    }
    let out = ReturnMap { sigma, s, tangent: t, iterations };
    let res = residual(&out.sigma, eta, dt, e, p);
    if !(res <= 1e3 * tol * (1.0 + eta.frob()) + 1e-300) {
        return Err(Error::ReturnMap { residual: res });
    }
    Ok(out)
}

pub fn return_map(eta: &Sym2, dt: f64, e: &Elasticity, p: &TruncationParams, tol: f64) -> Result<Sym2> {
    return_map_full(eta, dt, e, p, tol).map(|r| r.sigma)
}

/// Frobenius norm of A_r σ + dt·Dψ_λ(σ) − η.
pub fn residual(sigma: &Sym2, eta: &Sym2, dt: f64, e: &Elasticity, p: &TruncationParams) -> f64 {
    let lhs = apply_a(sigma, e) + crate::potentials::dpsi_lambda(sigma, p).scale(dt);
    (lhs - *eta).frob()
}

/// Default relative tolerance of the scalar solve.
pub const RETURN_TOL: f64 = 1e-13;

/// |σ|_r at the elastic predictor, an upper bound for the converged s.
pub fn elastic_predictor_norm(eta: &Sym2, e: &Elasticity) -> f64 {
    norm_r(&apply_c(eta, e))
}
