//! Algebra of 2×2 symmetric matrices in the reduced (plate) setting.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A 2×2 symmetric matrix stored by its three independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { a11: 0.0, a22: 0.0, a12: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { a11: 1.0, a22: 1.0, a12: 0.0 };

    pub const fn new(a11: f64, a22: f64, a12: f64) -> Self {
        Sym2 { a11, a22, a12 }
    }

    pub const fn diag(a11: f64, a22: f64) -> Self {
        Sym2 { a11, a22, a12: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Frobenius contraction ξ:ζ.
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.a11 * other.a11 + self.a22 * other.a22 + 2.0 * self.a12 * other.a12
    }

    pub fn frob2(&self) -> f64 {
        self.ddot(self)
    }

    pub fn frob(&self) -> f64 {
        self.frob2().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a22.abs()).max(self.a12.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a22.is_finite() && self.a12.is_finite()
    }

    /// Coordinates in an orthonormal basis of Sym2 for the Frobenius product:
    /// two trace-free directions followed by the spherical one.
    pub fn to_ortho(&self) -> [f64; 3] {
        [
            (self.a11 - self.a22) / SQRT2,
            SQRT2 * self.a12,
            (self.a11 + self.a22) / SQRT2,
        ]
    }

    pub fn from_ortho(x: [f64; 3]) -> Self {
        Sym2 {
            a11: (x[2] + x[0]) / SQRT2,
            a22: (x[2] - x[0]) / SQRT2,
            a12: x[1] / SQRT2,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Sym2 { a11: c * self.a11, a22: c * self.a22, a12: c * self.a12 }
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2 { a11: self.a11 + o.a11, a22: self.a22 + o.a22, a12: self.a12 + o.a12 }
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { a11: self.a11 - o.a11, a22: self.a22 - o.a22, a12: self.a12 - o.a12 }
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        self.a11 += o.a11;
        self.a22 += o.a22;
        self.a12 += o.a12;
    }
}

impl SubAssign for Sym2 {
    fn sub_assign(&mut self, o: Sym2) {
        self.a11 -= o.a11;
        self.a22 -= o.a22;
        self.a12 -= o.a12;
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        self.scale(-1.0)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, s: Sym2) -> Sym2 {
        s.scale(self)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, c: f64) -> Sym2 {
        self.scale(c)
    }
}

/// Reduced norm |ξ|_r = √(|ξ|² − (tr ξ)²/3).
pub fn norm_r(xi: &Sym2) -> f64 {
    inner_r(xi, xi).max(0.0).sqrt()
}

/// Dual norm |ξ|_* = √(|ξ|² + (tr ξ)²).
pub fn norm_dual(xi: &Sym2) -> f64 {
    let t = xi.trace();
    (xi.frob2() + t * t).sqrt()
}

/// Reduced scalar product ξ:ζ − (1/3) tr ξ tr ζ.
pub fn inner_r(xi: &Sym2, zeta: &Sym2) -> f64 {
    xi.ddot(zeta) - xi.trace() * zeta.trace() / 3.0
}

/// ξ − (1/3)(tr ξ) I.
pub fn dev_r(xi: &Sym2) -> Sym2 {
    let t = xi.trace() / 3.0;
    Sym2 { a11: xi.a11 - t, a22: xi.a22 - t, a12: xi.a12 }
}

/// ξ + (tr ξ) I, the inverse of [`dev_r`].
pub fn lift_dual(xi: &Sym2) -> Sym2 {
    let t = xi.trace();
    Sym2 { a11: xi.a11 + t, a22: xi.a22 + t, a12: xi.a12 }
}

/// The ball {|ξ|_r ≤ α₀}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldSurface {
    alpha0: f64,
}

impl YieldSurface {
    pub fn new(alpha0: f64) -> crate::Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(crate::Error::InvalidParameter(format!("alpha0 must be positive, got {alpha0}")));
        }
        Ok(YieldSurface { alpha0 })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn default_tol(&self) -> f64 {
        1e-9 * self.alpha0
    }

    pub fn contains(&self, xi: &Sym2) -> bool {
        in_yield_set(xi, self, self.default_tol())
    }
}

pub fn in_yield_set(xi: &Sym2, k: &YieldSurface, tol: f64) -> bool {
    norm_r(xi) <= k.alpha0 + tol
}

/// Support function of K_r: α₀ |ξ|_*.
pub fn support_hr(xi: &Sym2, k: &YieldSurface) -> f64 {
    k.alpha0 * norm_dual(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym() -> impl Strategy<Value = Sym2> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_r(&Sym2::ZERO), 0.0);
        assert!((norm_r(&Sym2::diag(1.0, -1.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((norm_r(&Sym2::IDENTITY) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((norm_dual(&Sym2::IDENTITY) - 6f64.sqrt()).abs() < 1e-15);
        assert!((norm_dual(&Sym2::diag(1.0, -1.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((inner_r(&Sym2::IDENTITY, &Sym2::IDENTITY) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(inner_r(&Sym2::diag(1.0, -1.0), &Sym2::IDENTITY), 0.0);
    }

    #[test]
    fn projection_examples() {
        let d = dev_r(&Sym2::IDENTITY);
        assert!((d.a11 - 1.0 / 3.0).abs() < 1e-15 && (d.a22 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(lift_dual(&Sym2::IDENTITY), Sym2::diag(3.0, 3.0));
        let tf = Sym2::new(2.0, -2.0, 0.5);
        assert_eq!(dev_r(&tf), tf);
        assert_eq!(lift_dual(&tf), tf);
        let x = Sym2::new(2.0, 0.0, 1.0);
        let back = dev_r(&lift_dual(&x));
        assert!((back - x).max_abs() < 1e-15);
    }

    #[test]
    fn yield_examples() {
        let k = YieldSurface::new(2f64.sqrt()).unwrap();
        assert!(in_yield_set(&Sym2::diag(1.0, -1.0), &k, 0.0));
        let k1 = YieldSurface::new(1.0).unwrap();
        assert!(in_yield_set(&Sym2::ZERO, &k1, 0.0));
        assert!(!in_yield_set(&Sym2::diag(2.0, -2.0), &k1, 0.0));
        let k2 = YieldSurface::new(2.0).unwrap();
        assert!((support_hr(&Sym2::IDENTITY, &k2) - 2.0 * 6f64.sqrt()).abs() < 1e-14);
        assert!(YieldSurface::new(0.0).is_err());
    }

    #[test]
    fn ortho_coordinates_preserve_contraction() {
        let a = Sym2::new(1.0, -2.0, 0.7);
        let b = Sym2::new(0.3, 4.0, -1.1);
        let (x, y) = (a.to_ortho(), b.to_ortho());
        let dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        assert!((dot - a.ddot(&b)).abs() < 1e-14);
        assert!((Sym2::from_ortho(x) - a).max_abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn norm_chain(x in sym()) {
            let r = norm_r(&x);
            let f = x.frob();
            prop_assert!(r <= f * (1.0 + 1e-12) + 1e-300);
            prop_assert!(f <= 3f64.sqrt() * r * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn conversions(x in sym()) {
            let s = 1.0 + x.frob();
            prop_assert!((norm_dual(&dev_r(&x)) - norm_r(&x)).abs() <= 1e-12 * s);
            prop_assert!((norm_r(&lift_dual(&x)) - norm_dual(&x)).abs() <= 1e-12 * s);
            prop_assert!(norm_r(&dev_r(&x)) <= norm_r(&x) * (1.0 + 1e-12) + 1e-300);
            prop_assert!((dev_r(&lift_dual(&x)) - x).max_abs() <= 1e-14 * s);
            prop_assert!((lift_dual(&dev_r(&x)) - x).max_abs() <= 1e-14 * s);
            prop_assert_eq!(inner_r(&x, &x).max(0.0).sqrt(), norm_r(&x));
        }

        #[test]
        fn support_is_sublinear(x in sym(), y in sym(), t in 0.0..10.0f64) {
            let k = YieldSurface::new(1.7).unwrap();
            let s = 1.0 + x.frob() + y.frob();
            prop_assert!(support_hr(&(x + y), &k) <= support_hr(&x, &k) + support_hr(&y, &k) + 1e-12 * s);
            prop_assert!((support_hr(&(t * x), &k) - t * support_hr(&x, &k)).abs() <= 1e-12 * s * (1.0 + t));
        }

        #[test]
        fn dual_norm_is_sup_over_unit_ball(x in sym()) {
            // the maximiser of ξ:η over |η|_r = 1 is lift_dual(ξ)/|ξ|_*
            let d = norm_dual(&x);
            prop_assume!(d > 1e-9);
            let eta = lift_dual(&x).scale(1.0 / d);
            prop_assert!((norm_r(&eta) - 1.0).abs() < 1e-12);
            prop_assert!((x.ddot(&eta) - d).abs() <= 1e-12 * (1.0 + d));
        }
    }

    #[test]
    fn dual_norm_sampling_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // boundary of the unit r-ball in orthonormal coordinates: x1² + x2² + x3²/3 = 1
        let (nt, np) = (300, 600);
        let mut boundary = Vec::with_capacity(nt * np);
        for i in 0..nt {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / nt as f64;
            for j in 0..np {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / np as f64;
                let e = [th.sin() * ph.cos(), th.sin() * ph.sin(), 3f64.sqrt() * th.cos()];
                boundary.push(Sym2::from_ortho(e));
            }
        }
        for _ in 0..50 {
            let x = Sym2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let best = boundary.iter().map(|e| x.ddot(e)).fold(f64::NEG_INFINITY, f64::max);
            let d = norm_dual(&x);
            assert!(best <= d * (1.0 + 1e-12));
            assert!(d - best < 1e-3 * (1.0 + d), "{d} {best}");
        }
    }
}
