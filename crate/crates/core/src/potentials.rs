//! Norton–Hoff and truncated dissipation potentials and the conjugate of the latter.

use crate::tensor::{dev_r, inner_r, lift_dual, norm_dual, norm_r, Sym2, YieldSurface};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NortonHoffParams {
    n: u32,
    alpha0: f64,
}

impl NortonHoffParams {
    pub fn new(n: u32, alpha0: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::validation("N>=4", "yield.n", format!("N = {n} but N must be at least 4")));
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::validation("alpha0>0", "yield.alpha0", format!("alpha0 = {alpha0}")));
        }
        Ok(NortonHoffParams { n, alpha0 })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn yield_surface(&self) -> YieldSurface {
        YieldSurface::new(self.alpha0).expect("alpha0 validated")
    }

    /// α₀^{N−1}
    fn scale(&self) -> f64 {
        self.alpha0.powi(self.n as i32 - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    base: NortonHoffParams,
    lambda: f64,
}

impl TruncationParams {
    pub fn new(base: NortonHoffParams, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::validation("lambda>0", "yield.lambda", format!("lambda = {lambda}")));
        }
        Ok(TruncationParams { base, lambda })
    }

    pub fn from_parts(n: u32, alpha0: f64, lambda: f64) -> Result<Self> {
        Self::new(NortonHoffParams::new(n, alpha0)?, lambda)
    }

    pub fn base(&self) -> NortonHoffParams {
        self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> u32 {
        self.base.n
    }

    pub fn alpha0(&self) -> f64 {
        self.base.alpha0
    }

    /// (|ξ|_r^{N−2} ∧ λ^{N−2}) / α₀^{N−1} as a function of s = |ξ|_r.
    pub fn factor(&self, s: f64) -> f64 {
        let m = self.n() as i32 - 2;
        s.min(self.lambda).powi(m) / self.base.scale()
    }

    /// One-sided derivative of [`Self::factor`] in s, taken from the left at the cap.
    pub fn factor_derivative(&self, s: f64) -> f64 {
        if s >= self.lambda {
            return 0.0;
        }
        let m = self.n() as i32 - 2;
        m as f64 * s.powi(m - 1) / self.base.scale()
    }

    /// Threshold on |y|_* separating the two branches of the conjugate.
    pub fn dual_threshold(&self) -> f64 {
        (self.lambda / self.alpha0()).powi(self.n() as i32 - 1)
    }
}

pub fn phi_n(xi: &Sym2, p: &NortonHoffParams) -> f64 {
    norm_r(xi).powi(p.n as i32) / (p.n as f64 * p.scale())
}

pub fn dphi_n(xi: &Sym2, p: &NortonHoffParams) -> Sym2 {
    let s = norm_r(xi);
    dev_r(xi).scale(s.powi(p.n as i32 - 2) / p.scale())
}

pub fn psi_lambda(xi: &Sym2, p: &TruncationParams) -> f64 {
    let s = norm_r(xi);
    let n = p.n() as i32;
    let l = p.lambda;
    let sc = p.base.scale();
    let head = s.powi(n).min(l.powi(n)) / (n as f64 * sc);
    let tail = l.powi(n - 2) * (s * s - l * l).max(0.0) / (2.0 * sc);
    head + tail
}

pub fn dpsi_lambda(xi: &Sym2, p: &TruncationParams) -> Sym2 {
    dev_r(xi).scale(p.factor(norm_r(xi)))
}

/// Dψ_λ(ξ):ζ written through the reduced scalar product.
pub fn dpsi_lambda_dot(xi: &Sym2, zeta: &Sym2, p: &TruncationParams) -> f64 {
    p.factor(norm_r(xi)) * inner_r(xi, zeta)
}

/// The conjugate F_λ = ψ_λ*.
pub fn f_lambda(y: &Sym2, p: &TruncationParams) -> f64 {
    let t = norm_dual(y);
    let n = p.n() as f64;
    let a = p.alpha0();
    let l = p.lambda;
    let thr = p.dual_threshold();
    let head = (n - 1.0) / n * a * t.powf(n / (n - 1.0)).min((l / a).powi(p.n() as i32));
    let tail = a.powi(p.n() as i32 - 1) / (2.0 * l.powi(p.n() as i32 - 2)) * (t * t - thr * thr).max(0.0);
    head + tail
}

/// DF_λ, the inverse of Dψ_λ. DF_λ(0) = 0.
pub fn df_lambda(y: &Sym2, p: &TruncationParams) -> Sym2 {
    let t = norm_dual(y);
    if t == 0.0 {
        return Sym2::ZERO;
    }
    let n = p.n() as f64;
    let a = p.alpha0();
    let c = if t <= p.dual_threshold() {
        a * t.powf((2.0 - n) / (n - 1.0))
    } else {
        a.powi(p.n() as i32 - 1) / p.lambda.powi(p.n() as i32 - 2)
    };
    lift_dual(y).scale(c)
}

/// Brute-force sup_ξ {y:ξ − ψ_λ(ξ)} over the Frobenius ball of radius `radius`.
pub fn conjugate_numeric(y: &Sym2, p: &TruncationParams, radius: f64, n: usize) -> Result<f64> {
    crate::oracle::conjugate_sup(y, p, radius, n)
}

/// H_r(Dφ_N(σ)) − σ:Dφ_N(σ) in closed form: (|σ|_r/α₀)^{N−1}(α₀ − |σ|_r).
pub fn flow_gap_density(sigma: &Sym2, p: &NortonHoffParams) -> f64 {
    let s = norm_r(sigma);
    (s / p.alpha0).powi(p.n as i32 - 1) * (p.alpha0 - s)
}

/// max_s (s/α₀)^{N−1}(α₀ − s) = (α₀/N)((N−1)/N)^{N−1}.
pub fn flow_gap_bound(p: &NortonHoffParams) -> f64 {
    let n = p.n as f64;
    p.alpha0 / n * ((n - 1.0) / n).powi(p.n as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::support_hr;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tp(n: u32, a: f64, l: f64) -> TruncationParams {
        TruncationParams::from_parts(n, a, l).unwrap()
    }

    fn sym(r: f64) -> impl Strategy<Value = Sym2> {
        (-r..r, -r..r, -r..r).prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    fn params() -> impl Strategy<Value = TruncationParams> {
        (prop::sample::select(vec![4u32, 5, 6, 8]), 0.5..2.0f64, prop::sample::select(vec![0.5, 1.0, 2.0, 10.0]))
            .prop_map(|(n, a, l)| tp(n, a, l))
    }

    #[test]
    fn parameter_validation() {
        assert!(NortonHoffParams::new(3, 1.0).is_err());
        assert!(NortonHoffParams::new(4, 0.0).is_err());
        assert!(TruncationParams::from_parts(4, 1.0, 0.0).is_err());
        assert!(TruncationParams::from_parts(4, 1.0, -1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        let x = Sym2::diag(1.0, -1.0);
        assert_eq!(phi_n(&Sym2::ZERO, &NortonHoffParams::new(4, 1.0).unwrap()), 0.0);
        assert!((phi_n(&x, &NortonHoffParams::new(4, 1.0).unwrap()) - 1.0).abs() < 1e-14);
        assert!((phi_n(&x, &NortonHoffParams::new(4, 2.0).unwrap()) - 0.125).abs() < 1e-14);
        let d = dphi_n(&x, &NortonHoffParams::new(4, 1.0).unwrap());
        assert!((d - Sym2::diag(2.0, -2.0)).max_abs() < 1e-14);
        assert!((psi_lambda(&x, &tp(4, 1.0, 1.0)) - 0.75).abs() < 1e-14);
        assert!((psi_lambda(&x, &tp(4, 1.0, 2.0)) - 1.0).abs() < 1e-14);
        assert_eq!(psi_lambda(&Sym2::ZERO, &tp(4, 1.0, 1.0)), 0.0);
        assert!((dpsi_lambda(&x, &tp(4, 1.0, 1.0)) - x).max_abs() < 1e-14);
        assert_eq!(dpsi_lambda(&Sym2::ZERO, &tp(4, 1.0, 1.0)), Sym2::ZERO);
    }

    #[test]
    fn conjugate_examples() {
        let p = tp(4, 1.0, 1.0);
        let y = Sym2::diag(1.0, -1.0);
        assert_eq!(f_lambda(&Sym2::ZERO, &p), 0.0);
        assert!((f_lambda(&y, &p) - 1.25).abs() < 1e-14);
        let x = Sym2::diag(1.0, -1.0);
        let fy = psi_lambda(&x, &p) + f_lambda(&dpsi_lambda(&x, &p), &p);
        assert!((fy - 2.0).abs() < 1e-14);
        assert!((df_lambda(&y, &p) - x).max_abs() < 1e-14);
        assert_eq!(df_lambda(&Sym2::ZERO, &p), Sym2::ZERO);
    }

    #[test]
    fn conjugate_carries_alpha0_factor() {
        // with α₀ ≠ 1 the smooth branch of F_λ must be (N−1)/N·α₀·|y|_*^{N/(N−1)}
        let p = tp(4, 2.0, 100.0);
        let x = Sym2::new(0.3, -0.7, 0.2);
        let y = dpsi_lambda(&x, &p);
        let lhs = psi_lambda(&x, &p) + f_lambda(&y, &p);
        assert!((lhs - y.ddot(&x)).abs() < 1e-14 * (1.0 + lhs.abs()));
        let brute = conjugate_numeric(&y, &p, 4.0, 12).unwrap();
        assert!((brute - f_lambda(&y, &p)).abs() < 1e-8);
    }

    #[test]
    fn branch_threshold_is_continuous() {
        for &(n, a, l) in &[(4u32, 1.0, 1.0), (6, 0.7, 2.0), (8, 1.3, 0.5)] {
            let p = tp(n, a, l);
            let dir = Sym2::new(0.4, -0.1, 0.3);
            let y = dir.scale(p.dual_threshold() / norm_dual(&dir));
            let below = y.scale(1.0 - 1e-12);
            let above = y.scale(1.0 + 1e-12);
            let s = 1.0 + f_lambda(&y, &p);
            assert!((f_lambda(&below, &p) - f_lambda(&above, &p)).abs() < 1e-9 * s);
            assert!((df_lambda(&below, &p) - df_lambda(&above, &p)).max_abs() < 1e-9 * s);
        }
    }

    #[test]
    fn flow_gap_examples() {
        let p = NortonHoffParams::new(4, 1.0).unwrap();
        let sigma = Sym2::diag(0.5 / 2f64.sqrt(), -0.5 / 2f64.sqrt());
        assert!((norm_r(&sigma) - 0.5).abs() < 1e-15);
        assert!((flow_gap_density(&sigma, &p) - 0.0625).abs() < 1e-15);
        assert!(flow_gap_bound(&p) <= p.alpha0() / 4.0);
    }

    #[test]
    fn monotone_in_lambda() {
        let y = Sym2::new(3.0, -1.0, 2.0);
        let mut prev = f64::INFINITY;
        for &l in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let f = f_lambda(&y, &tp(4, 1.0, l));
            assert!(f <= prev + 1e-12);
            prev = f;
        }
    }

    #[test]
    fn injectivity_spot_check() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = tp(6, 1.0, 1.5);
        for _ in 0..10_000 {
            let a = Sym2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let b = Sym2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if (a - b).max_abs() > 1e-9 {
                assert!((dpsi_lambda(&a, &p) - dpsi_lambda(&b, &p)).max_abs() > 0.0);
            }
        }
    }

    #[test]
    fn lipschitz_constant_sampled() {
        // sampled ratio stays below (N−1)·λ^{N−2}/α₀^{N−1}
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for &(n, a, l) in &[(4u32, 1.0, 1.0), (6, 0.8, 1.5), (8, 1.0, 2.0)] {
            let p = tp(n, a, l);
            let bound = (n as f64 - 1.0) * l.powi(n as i32 - 2) / a.powi(n as i32 - 1);
            let mut worst: f64 = 0.0;
            for _ in 0..20_000 {
                let x = Sym2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let d = Sym2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let z = x + d.scale(1e-3);
                let r = (dpsi_lambda(&x, &p) - dpsi_lambda(&z, &p)).frob() / (x - z).frob();
                worst = worst.max(r);
            }
            assert!(worst <= bound * (1.0 + 1e-6), "{worst} > {bound}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fenchel_young(x in sym(3.0), z in sym(3.0), p in params()) {
            let y = dpsi_lambda(&x, &p);
            let lhs = psi_lambda(&x, &p) + f_lambda(&y, &p);
            let rhs = y.ddot(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            prop_assert!(psi_lambda(&z, &p) + f_lambda(&y, &p) >= y.ddot(&z) - 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn round_trips(x in sym(3.0), p in params()) {
            let back = df_lambda(&dpsi_lambda(&x, &p), &p);
            prop_assert!((back - x).frob() <= 1e-10 * (1.0 + x.frob()));
            let y = x;
            let fwd = dpsi_lambda(&df_lambda(&y, &p), &p);
            prop_assert!((fwd - y).frob() <= 1e-10 * (1.0 + y.frob()));
        }

        #[test]
        fn gradient_matches_finite_differences(x in sym(2.0), e in sym(1.0), p in params()) {
            let h = 1e-5;
            let fd = (psi_lambda(&(x + e.scale(h)), &p) - psi_lambda(&(x - e.scale(h)), &p)) / (2.0 * h);
            let an = dpsi_lambda(&x, &p).ddot(&e);
            prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()));
            let fd = (f_lambda(&(x + e.scale(h)), &p) - f_lambda(&(x - e.scale(h)), &p)) / (2.0 * h);
            let an = df_lambda(&x, &p).ddot(&e);
            prop_assume!(norm_dual(&x) > 1e-2);
            prop_assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()));
        }

        #[test]
        fn dphi_matches_finite_differences(x in sym(2.0), e in sym(1.0), n in 4u32..9) {
            let p = NortonHoffParams::new(n, 1.1).unwrap();
            let h = 1e-5;
            let fd = (phi_n(&(x + e.scale(h)), &p) - phi_n(&(x - e.scale(h)), &p)) / (2.0 * h);
            let an = dphi_n(&x, &p).ddot(&e);
            prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()));
            let s = norm_r(&x);
            let full = dphi_n(&x, &p).ddot(&x);
            prop_assert!((full - s.powi(n as i32) / p.alpha0().powi(n as i32 - 1)).abs() <= 1e-12 * (1.0 + full));
        }

        #[test]
        fn convexity(a in sym(3.0), b in sym(3.0), t in 0.0..1.0f64, p in params()) {
            let m = a.scale(t) + b.scale(1.0 - t);
            let sc = 1.0 + psi_lambda(&a, &p) + psi_lambda(&b, &p);
            prop_assert!(psi_lambda(&m, &p) <= t * psi_lambda(&a, &p) + (1.0 - t) * psi_lambda(&b, &p) + 1e-12 * sc);
            let q = p.base();
            let sc = 1.0 + phi_n(&a, &q) + phi_n(&b, &q);
            prop_assert!(phi_n(&m, &q) <= t * phi_n(&a, &q) + (1.0 - t) * phi_n(&b, &q) + 1e-12 * sc);
            let sc = 1.0 + f_lambda(&a, &p) + f_lambda(&b, &p);
            prop_assert!(f_lambda(&m, &p) <= t * f_lambda(&a, &p) + (1.0 - t) * f_lambda(&b, &p) + 1e-12 * sc);
        }

        #[test]
        fn monotone_gradient(a in sym(3.0), b in sym(3.0), p in params()) {
            let g = (dpsi_lambda(&a, &p) - dpsi_lambda(&b, &p)).ddot(&(a - b));
            prop_assert!(g >= -1e-13 * (1.0 + a.frob() + b.frob()));
        }

        #[test]
        fn reduced_product_form(x in sym(3.0), z in sym(3.0), p in params()) {
            let a = dpsi_lambda(&x, &p).ddot(&z);
            let b = dpsi_lambda_dot(&x, &z, &p);
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs() + p.factor(norm_r(&x)) * x.frob() * z.frob()));
        }

        #[test]
        fn power_bound(x in sym(3.0), p in params()) {
            let r = norm_r(&x);
            let x = if r > p.lambda() { x.scale(0.99 * p.lambda() / r) } else { x };
            let d = dpsi_lambda(&x, &p);
            let n = p.n() as f64;
            let lhs = d.frob().powf(n / (n - 1.0));
            let rhs = d.ddot(&x) / p.alpha0();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn flow_gap_identity(x in sym(3.0), n in 4u32..12, a in 0.5..2.0f64) {
            let p = NortonHoffParams::new(n, a).unwrap();
            let k = p.yield_surface();
            let d = dphi_n(&x, &p);
            let h = support_hr(&d, &k);
            let w = x.ddot(&d);
            let gap = h - w;
            prop_assert!((gap - flow_gap_density(&x, &p)).abs() <= 1e-12 * (h.abs() + w.abs() + 1e-300));
            prop_assert!(flow_gap_density(&x, &p) <= flow_gap_bound(&p) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn large_lambda_matches_norton_hoff_conjugate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = Sym2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p = tp(4, 1.0, 1e3);
            let exact = 0.75 * norm_dual(&y).powf(4.0 / 3.0);
            let brute = conjugate_numeric(&y, &p, 3.0, 12).unwrap();
            assert!((brute - exact).abs() < 1e-4, "{brute} {exact}");
        }
    }
}
