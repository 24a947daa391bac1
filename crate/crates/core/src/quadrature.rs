//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e}) within {intervals} intervals")]
    NotConverged { tol: f64, estimate: f64, intervals: usize },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

fn gk15<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T) -> Result<(T, T), QuadratureError> {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: c.as_f64() });
    }
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        if !f1.is_finite() || !f2.is_finite() {
            let at = if f1.is_finite() { c + dx } else { c - dx };
            return Err(QuadratureError::NonFinite { at: at.as_f64() });
        }
        kron += T::lit(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

/// `∫_a^b f` to `max(abs_tol, rel_tol·|I|)`. The integrand is never
/// evaluated at the endpoints.
pub fn integrate<T: Scalar>(
    f: impl Fn(T) -> T,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Result<QuadResult<T>, QuadratureError> {
    let (v, e) = gk15(&f, a, b)?;
    let mut parts: Vec<(T, T, T, T)> = vec![(a, b, v, e)];
    loop {
        let total: T = parts.iter().map(|p| p.2).sum();
        let err: T = parts.iter().map(|p| p.3).sum();
        let tol = abs_tol.max(rel_tol * total.abs());
        if err <= tol {
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: parts.len(),
            });
        }
        if parts.len() >= max_intervals {
            return Err(QuadratureError::NotConverged {
                tol: tol.as_f64(),
                estimate: err.as_f64(),
                intervals: parts.len(),
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -T::one()), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = T::lit(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(QuadratureError::NotConverged {
                tol: tol.as_f64(),
                estimate: err.as_f64(),
                intervals: parts.len() + 1,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid)?;
        let (v2, e2) = gk15(&f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let r = integrate(|x: f64| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-14, 1e-14, 50).unwrap();
        assert!((r.value - 10.0).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10, 2000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_reported() {
        let e = integrate(|x: f64| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-12, 1e-12, 10);
        assert!(matches!(e, Err(QuadratureError::NonFinite { .. })));
    }

    #[test]
    fn oscillatory() {
        let r = integrate(|x: f64| (20.0 * x).sin(), 0.0, 3.0, 1e-13, 1e-13, 500).unwrap();
        let exact = (1.0 - (60.0f64).cos()) / 20.0;
        assert!((r.value - exact).abs() < 1e-12);
    }
}
