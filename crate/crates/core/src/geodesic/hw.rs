//! Semi-analytic geodesics of `dx² + (1 − |x|^λ) dy²` through the origin.
//!
//! With the first integral `(1 − |x|^λ) y' = c`, `c² = 1 − ε`, the arclength
//! geodesic leaving the origin into `x > 0` reaches `x* = ε^{1/λ}` with
//! vertical velocity at
//!
//! ```text
//! s0 = ∫_0^{x*} √((1 − x^λ) / (ε − x^λ)) dx,
//! y1 = ∫_0^{x*} c / √((1 − x^λ)(ε − x^λ)) dx,
//! ```
//!
//! then reflects in `y = y1`. Both integrands blow up like `(x* − x)^{-1/2}`;
//! the substitution `x = x* − u²` removes the singularity.

use serde_json::json;

use super::GeodesicError;
use crate::quadrature::integrate;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwFamily<T> {
    pub lambda: T,
    pub eps: T,
    /// `√(1 − ε)`; the mirror geodesic has `−c`.
    pub c: T,
    pub s0: T,
    pub y1: T,
    pub turning_point: (T, T),
    /// Quadrature error estimates for `(s0, y1)`.
    pub error: (T, T),
}

impl<T: Scalar> HwFamily<T> {
    pub fn x_star(&self) -> T {
        self.turning_point.0
    }

    /// Unit initial velocity `(√ε, c)` at the origin.
    pub fn initial_velocity(&self) -> [T; 2] {
        [self.eps.sqrt(), self.c]
    }

    /// Velocity at the turning point, `(0, 1/c)`.
    pub fn turning_velocity(&self) -> [T; 2] {
        [T::zero(), T::one() / self.c]
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "lambda": self.lambda.as_f64(),
            "eps": self.eps.as_f64(),
            "c": self.c.as_f64(),
            "s0": self.s0.as_f64(),
            "y1": self.y1.as_f64(),
        })
    }
}

pub fn hw_geodesic_family<T: Scalar>(lambda: T, eps: T) -> Result<HwFamily<T>, GeodesicError> {
    if !(lambda > T::one() && lambda < T::lit(2.0)) {
        return Err(GeodesicError::BadParameter {
            name: "lambda",
            value: lambda.as_f64(),
            reason: "needs 1 < λ < 2",
        });
    }
    if !(eps > T::zero() && eps < T::one()) {
        return Err(GeodesicError::BadParameter {
            name: "eps",
            value: eps.as_f64(),
            reason: "needs 0 < ε < 1",
        });
    }
    let x_star = eps.powf(T::one() / lambda);
    let c = (T::one() - eps).sqrt();
    let two = T::lit(2.0);
    // (x, ε − x^λ) at x = x* − u², with ε − x^λ = −ε·expm1(λ·ln(1 − u²/x*))
    let point = move |u: T| -> (T, T) {
        let r = (u * u / x_star).min(T::one());
        let x = x_star * (T::one() - r);
        let gap = -eps * (lambda * (-r).ln_1p()).exp_m1();
        (x, gap)
    };
    let tol = T::lit(1e-14).max(T::lit(64.0) * T::epsilon());
    let u_max = x_star.sqrt();
    let s0 = integrate(
        |u: T| {
            let (_, gap) = point(u);
            two * u * ((T::one() - eps + gap) / gap).sqrt()
        },
        T::zero(),
        u_max,
        T::zero(),
        tol,
        4000,
    )?;
    let y1 = integrate(
        |u: T| {
            let (_, gap) = point(u);
            two * u * c / ((T::one() - eps + gap) * gap).sqrt()
        },
        T::zero(),
        u_max,
        T::zero(),
        tol,
        4000,
    )?;
    Ok(HwFamily {
        lambda,
        eps,
        c,
        s0: s0.value,
        y1: y1.value,
        turning_point: (x_star, y1.value),
        error: (s0.error, y1.error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{shoot_geodesic, ShootOptions};
    use crate::metric::hw_riemannian;

    // mpmath at 30 digits
    const S0_025: f64 = 1.265_869;
    const Y1_025: f64 = 1.285_081;

    #[test]
    fn reference_values() {
        let f = hw_geodesic_family(1.5f64, 0.25).unwrap();
        assert!((f.x_star() - 0.396_850_262_992_049_9).abs() < 1e-15);
        assert!((f.s0 - S0_025).abs() < 1e-6);
        assert!((f.y1 - Y1_025).abs() < 1e-6);
        assert!(f.error.0 < 1e-12 && f.error.1 < 1e-12);
    }

    #[test]
    fn upper_bound_holds_on_grid() {
        for lambda in [1.1, 1.5, 1.9] {
            for eps in [0.01, 0.1, 0.25, 0.5, 0.9, 0.99] {
                let f = hw_geodesic_family(lambda, eps).unwrap();
                assert!(f.y1 < 2.0 * f.s0, "λ = {lambda}, ε = {eps}");
            }
        }
    }

    #[test]
    fn lower_bound_holds_for_small_eps() {
        // y1 = s0 near ε ≈ 0.88, 0.66, 0.18 for λ = 1.1, 1.5, 1.9
        for (lambda, eps_max) in [(1.1, 0.85), (1.5, 0.6), (1.9, 0.15)] {
            for eps in [0.001, 0.01, 0.05, 0.1, eps_max] {
                let f = hw_geodesic_family(lambda, eps).unwrap();
                assert!(f.s0 < f.y1, "λ = {lambda}, ε = {eps}");
            }
        }
        let f = hw_geodesic_family(1.9f64, 0.25).unwrap();
        assert!(f.y1 < f.s0);
        assert!((f.y1 / f.s0 - 0.998_454_612_270_135_8).abs() < 1e-9);
        let f = hw_geodesic_family(1.5f64, 0.9).unwrap();
        assert!((f.y1 / f.s0 - 0.841_933_370_250_680_5).abs() < 1e-9);
    }

    #[test]
    fn parameters_checked() {
        assert!(hw_geodesic_family(1.5, 1.0).is_err());
        assert!(hw_geodesic_family(1.5, 0.0).is_err());
        assert!(hw_geodesic_family(2.0, 0.5).is_err());
    }

    #[test]
    fn single_precision() {
        let f = hw_geodesic_family(1.5f32, 0.25).unwrap();
        assert!((f.s0 as f64 - S0_025).abs() < 1e-5);
    }

    #[test]
    fn integrated_geodesic_reaches_turning_point() {
        let fam = hw_geodesic_family(1.5f64, 0.25).unwrap();
        let m = hw_riemannian(1.5f64).unwrap();
        let v = fam.initial_velocity();
        let rec = shoot_geodesic(&m, &[0.0, 0.0], &v, (0.0, 2.0 * fam.s0), &ShootOptions::default()).unwrap();
        let (s, st) = rec.first_velocity_zero(0).unwrap();
        assert!((s - fam.s0).abs() < 1e-6);
        assert!((st.x[0] - fam.x_star()).abs() < 1e-6);
        assert!((st.x[1] - fam.y1).abs() < 1e-6);
        assert!((st.v[1] - fam.turning_velocity()[1]).abs() < 1e-6);
        let end = rec.final_state();
        assert!(end.x[0].abs() < 1e-8);
        assert!((end.x[1] - 2.0 * fam.y1).abs() < 1e-7);
    }
}
