//! Example metrics: the Hartman–Wintner pair, the causal bubble, a Lipschitz
//! toy metric matched across `x = 0`, and flat references.
//!
//! All partials are analytic. Branches clamp the interface coordinate to
//! their own half so that they stay evaluable a little past the interface.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Level, MetricDescriptor, MetricError, MetricParts, PiecewiseMetric, Signature};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

fn descriptor(name: &str, params: &[(&str, f64)], dim: usize, signature: Signature, regularity: String) -> MetricDescriptor {
    MetricDescriptor {
        name: name.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        dim,
        signature,
        regularity,
    }
}

fn check_open<T: Scalar>(name: &'static str, value: T, lo: f64, hi: f64, reason: &'static str) -> Result<(), MetricError> {
    let v = value.as_f64();
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(MetricError::BadParameter { name, value: v, reason })
    }
}

/// `h(s) = s^λ` for `s ≥ 0` together with `h'(s)`; `s` is the clamped
/// one-sided distance to the interface.
fn power_and_slope<T: Scalar>(s: T, lambda: T) -> (T, T) {
    if s <= T::zero() {
        let slope = if lambda > T::one() {
            T::zero()
        } else if lambda == T::one() {
            T::one()
        } else {
            T::infinity()
        };
        (T::zero(), slope)
    } else {
        (s.powf(lambda), lambda * s.powf(lambda - T::one()))
    }
}

/// `dx² + (1 − |x|^λ) dy²` on `(−1, 1) × ℝ`, `1 < λ < 2`, interface `x = 0`.
pub fn hw_riemannian<T: Scalar>(lambda: T) -> Result<PiecewiseMetric<T>, MetricError> {
    check_open("lambda", lambda, 1.0, 2.0, "the Hartman-Wintner metric needs 1 < λ < 2")?;
    let branch = move |sign: T| -> super::BranchFn<T> {
        Arc::new(move |x: &[T]| {
            let s = (sign * x[0]).max(T::zero());
            let (a, da) = power_and_slope(s, lambda);
            let g = SquareMatrix::diagonal(&[T::one(), T::one() - a]);
            let mut dx = SquareMatrix::zeros(2);
            dx[(1, 1)] = -sign * da;
            (g, vec![dx, SquareMatrix::zeros(2)])
        })
    };
    Ok(PiecewiseMetric::from_parts(MetricParts {
        descriptor: descriptor(
            "hw",
            &[("lambda", lambda.as_f64())],
            2,
            Signature::Riemannian,
            format!("C^{{1,{}}}", (lambda - T::one()).as_f64()),
        ),
        minus: branch(-T::one()),
        plus: branch(T::one()),
        level: Level::coordinate(0, 2),
        domain: Arc::new(|x: &[T]| x[0].abs() < T::one()),
        lipschitz_constant_hint: Some(lambda),
        time_orientation: None,
        c1_across_interface: true,
    }))
}

/// `−dt² + dx² + (1 − |x|^λ) dy²` on `ℝ × (−1, 1) × ℝ`, time-oriented by `∂_t`.
pub fn hw_lorentzian<T: Scalar>(lambda: T) -> Result<PiecewiseMetric<T>, MetricError> {
    check_open("lambda", lambda, 1.0, 2.0, "the Hartman-Wintner metric needs 1 < λ < 2")?;
    let branch = move |sign: T| -> super::BranchFn<T> {
        Arc::new(move |x: &[T]| {
            let s = (sign * x[1]).max(T::zero());
            let (a, da) = power_and_slope(s, lambda);
            let g = SquareMatrix::diagonal(&[-T::one(), T::one(), T::one() - a]);
            let mut dx = SquareMatrix::zeros(3);
            dx[(2, 2)] = -sign * da;
            (g, vec![SquareMatrix::zeros(3), dx, SquareMatrix::zeros(3)])
        })
    };
    Ok(PiecewiseMetric::from_parts(MetricParts {
        descriptor: descriptor(
            "hw-lorentzian",
            &[("lambda", lambda.as_f64())],
            3,
            Signature::Lorentzian,
            format!("C^{{1,{}}}", (lambda - T::one()).as_f64()),
        ),
        minus: branch(-T::one()),
        plus: branch(T::one()),
        level: Level::coordinate(1, 3),
        domain: Arc::new(|x: &[T]| x[1].abs() < T::one()),
        lipschitz_constant_hint: Some(lambda),
        time_orientation: Some(vec![T::one(), T::zero(), T::zero()]),
        c1_across_interface: true,
    }))
}

/// `−du² + 2(|u|^λ − 1) du dx + |u|^λ(2 − |u|^λ) dx²` on `(−1, 1) × ℝ`,
/// `0 < λ < 1`, time-oriented by `∂_u`, interface `u = 0`.
pub fn bubble<T: Scalar>(lambda: T) -> Result<PiecewiseMetric<T>, MetricError> {
    check_open("lambda", lambda, 0.0, 1.0, "the bubble metric needs 0 < λ < 1")?;
    let two = T::lit(2.0);
    let branch = move |sign: T| -> super::BranchFn<T> {
        Arc::new(move |x: &[T]| {
            let s = (sign * x[0]).max(T::zero());
            let (a, da_ds) = power_and_slope(s, lambda);
            let da = sign * da_ds;
            let g = SquareMatrix::from_rows(&[&[-T::one(), a - T::one()], &[a - T::one(), a * (two - a)]]);
            let du = SquareMatrix::from_rows(&[&[T::zero(), da], &[da, (two - two * a) * da]]);
            (g, vec![du, SquareMatrix::zeros(2)])
        })
    };
    Ok(PiecewiseMetric::from_parts(MetricParts {
        descriptor: descriptor(
            "bubble",
            &[("lambda", lambda.as_f64())],
            2,
            Signature::Lorentzian,
            format!("C^{{0,{}}}", lambda.as_f64()),
        ),
        minus: branch(-T::one()),
        plus: branch(T::one()),
        level: Level::coordinate(0, 2),
        domain: Arc::new(|x: &[T]| x[0].abs() < T::one()),
        lipschitz_constant_hint: None,
        time_orientation: Some(vec![T::one(), T::zero()]),
        c1_across_interface: false,
    }))
}

/// `dx² + (1 + |x|) dy²`: Lipschitz, smooth off `x = 0`, with a jump in
/// `∂_x g_yy` across the interface.
pub fn lipschitz_toy<T: Scalar>() -> PiecewiseMetric<T> {
    let branch = move |sign: T| -> super::BranchFn<T> {
        Arc::new(move |x: &[T]| {
            let g = SquareMatrix::diagonal(&[T::one(), T::one() + sign * x[0]]);
            let mut dx = SquareMatrix::zeros(2);
            dx[(1, 1)] = sign;
            (g, vec![dx, SquareMatrix::zeros(2)])
        })
    };
    PiecewiseMetric::from_parts(MetricParts {
        descriptor: descriptor("lipschitz-toy", &[], 2, Signature::Riemannian, "C^{0,1}".into()),
        minus: branch(-T::one()),
        plus: branch(T::one()),
        level: Level::coordinate(0, 2),
        domain: Arc::new(|x: &[T]| x[0].abs() < T::lit(100.0)),
        lipschitz_constant_hint: Some(T::one()),
        time_orientation: None,
        c1_across_interface: false,
    })
}

fn flat<T: Scalar>(name: &str, diag: Vec<T>, signature: Signature, level_coord: usize) -> PiecewiseMetric<T> {
    let n = diag.len();
    let branch: super::BranchFn<T> = Arc::new(move |_x: &[T]| {
        (SquareMatrix::diagonal(&diag), vec![SquareMatrix::zeros(n); n])
    });
    let time_orientation = (signature == Signature::Lorentzian).then(|| {
        let mut t = vec![T::zero(); n];
        t[0] = T::one();
        t
    });
    PiecewiseMetric::from_parts(MetricParts {
        descriptor: descriptor(name, &[], n, signature, "C^inf".into()),
        minus: branch.clone(),
        plus: branch,
        level: Level::coordinate(level_coord, n),
        domain: Arc::new(|_x: &[T]| true),
        lipschitz_constant_hint: Some(T::zero()),
        time_orientation,
        c1_across_interface: true,
    })
}

/// Euclidean metric; the (trivial) interface is `x⁰ = 0`.
pub fn euclidean<T: Scalar>(n: usize) -> PiecewiseMetric<T> {
    flat("euclidean", vec![T::one(); n], Signature::Riemannian, 0)
}

/// Minkowski metric `−dt² + Σ dxᵢ²`, time-oriented by `∂_t`; the (trivial)
/// interface is `x¹ = 0`.
pub fn minkowski<T: Scalar>(n: usize) -> PiecewiseMetric<T> {
    let mut d = vec![T::one(); n];
    d[0] = -T::one();
    flat("minkowski", d, Signature::Lorentzian, 1.min(n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_ranges() {
        assert!(hw_riemannian(1.0f64).is_err());
        assert!(hw_riemannian(2.0f64).is_err());
        assert!(hw_riemannian(1.5f64).is_ok());
        assert!(matches!(hw_lorentzian(0.5f64), Err(MetricError::BadParameter { .. })));
        assert!(bubble(1.0f64).is_err());
        assert!(bubble(0.0f64).is_err());
        assert!(bubble(0.5f64).is_ok());
    }

    #[test]
    fn regularity_metadata() {
        assert_eq!(hw_riemannian(1.5f64).unwrap().descriptor().regularity, "C^{1,0.5}");
        assert_eq!(bubble(0.5f64).unwrap().descriptor().regularity, "C^{0,0.5}");
    }

    #[test]
    fn hw_glue_at_axis() {
        let m = hw_riemannian(1.5f64).unwrap();
        let (gm, _) = m.sample(&[0.0, 1.0], super::super::Side::Minus);
        let (gp, _) = m.sample(&[0.0, 1.0], super::super::Side::Plus);
        assert_eq!(gm[(1, 1)], 1.0);
        assert_eq!(gp[(1, 1)], 1.0);
    }
}
