//! Du Bois-Reymond residual `R_i(s) = F_{v^i}(s) − ∫_0^s F_{x^i}` along a
//! polyline reparametrized by arclength, with `F(x, v) = √|g_x(v, v)|`.
//! For a minimizer each `R_i` is constant.

use super::{curve_length, ExtremalError, Polyline};
use crate::metric::{PiecewiseMetric, Signature, TAU_ONSURFACE};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DbrResidual<T> {
    /// Uniform arclength grid.
    pub s: Vec<T>,
    /// `residual[i][k] = R_i(s_k)`.
    pub residual: Vec<Vec<T>>,
    /// Standard deviation of each `R_i`.
    pub deviation: Vec<T>,
    /// Largest entry of `deviation`.
    pub statistic: T,
}

/// Cumulative arclength at the nodes (midpoint rule per segment).
fn cumulative_length<T: Scalar>(m: &PiecewiseMetric<T>, c: &Polyline<T>) -> Result<Vec<T>, ExtremalError> {
    let mut out = vec![T::zero()];
    let mut acc = T::zero();
    for k in 0..c.segments() {
        let piece = Polyline::new(vec![c.nodes[k].clone(), c.nodes[k + 1].clone()]);
        acc += curve_length(m, &piece)?;
        out.push(acc);
    }
    Ok(out)
}

/// Four-point Lagrange interpolation of the nodes at arclength `s`.
fn interpolate<T: Scalar>(knots: &[T], nodes: &[Vec<T>], s: T) -> Vec<T> {
    let n = knots.len();
    let mut k = knots.partition_point(|&x| x <= s).saturating_sub(1);
    k = k.min(n - 2);
    let lo = k.saturating_sub(1).min(n.saturating_sub(4));
    let idx: Vec<usize> = (lo..(lo + 4).min(n)).collect();
    let dim = nodes[0].len();
    let mut out = vec![T::zero(); dim];
    for &i in &idx {
        let mut w = T::one();
        for &j in &idx {
            if j != i {
                w = w * (s - knots[j]) / (knots[i] - knots[j]);
            }
        }
        for d in 0..dim {
            out[d] += w * nodes[i][d];
        }
    }
    out
}

/// Fourth-order first derivative of uniformly spaced samples.
fn derivative<T: Scalar>(f: &[T], h: T) -> Vec<T> {
    let n = f.len();
    let c = |v: f64| T::lit(v);
    let twelve_h = c(12.0) * h;
    (0..n)
        .map(|k| {
            if k >= 2 && k + 2 < n {
                (f[k - 2] - c(8.0) * f[k - 1] + c(8.0) * f[k + 1] - f[k + 2]) / twelve_h
            } else if k < 2 {
                let g = |i: usize| f[i];
                if k == 0 {
                    (c(-25.0) * g(0) + c(48.0) * g(1) - c(36.0) * g(2) + c(16.0) * g(3) - c(3.0) * g(4)) / twelve_h
                } else {
                    (c(-3.0) * g(0) - c(10.0) * g(1) + c(18.0) * g(2) - c(6.0) * g(3) + g(4)) / twelve_h
                }
            } else {
                let g = |i: usize| f[n - 1 - i];
                if k == n - 1 {
                    -(c(-25.0) * g(0) + c(48.0) * g(1) - c(36.0) * g(2) + c(16.0) * g(3) - c(3.0) * g(4)) / twelve_h
                } else {
                    -(c(-3.0) * g(0) - c(10.0) * g(1) + c(18.0) * g(2) - c(6.0) * g(3) + g(4)) / twelve_h
                }
            }
        })
        .collect()
}

/// Cumulative composite Simpson integral on a uniform grid; odd nodes use
/// the three-point rule on the last interval.
fn cumulative_simpson<T: Scalar>(f: &[T], h: T) -> Vec<T> {
    let n = f.len();
    let mut out = vec![T::zero(); n];
    let c = |v: f64| T::lit(v);
    for k in 1..n {
        out[k] = if k % 2 == 0 {
            out[k - 2] + h / c(3.0) * (f[k - 2] + c(4.0) * f[k - 1] + f[k])
        } else if k == 1 {
            h / c(12.0) * (c(5.0) * f[0] + c(8.0) * f[1] - f[2])
        } else {
            out[k - 1] + h / c(12.0) * (-f[k - 2] + c(8.0) * f[k - 1] + c(5.0) * f[k])
        };
    }
    out
}

fn std_dev<T: Scalar>(v: &[T]) -> T {
    let n = T::from_count(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    (v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n).sqrt()
}

pub fn dbr_residual<T: Scalar>(m: &PiecewiseMetric<T>, c: &Polyline<T>) -> Result<DbrResidual<T>, ExtremalError> {
    if c.segments() < 4 {
        return Err(ExtremalError::InvalidInput("need at least four segments"));
    }
    if !m.is_c1_across_interface() {
        let tau = T::lit(TAU_ONSURFACE);
        let phi: Vec<T> = c.nodes.iter().map(|x| m.level().value(x)).collect();
        for k in 0..phi.len() {
            let touches = phi[k].abs() <= tau || (k + 1 < phi.len() && phi[k] * phi[k + 1] < T::zero());
            if touches {
                return Err(ExtremalError::InterfaceOnCurve { index: k });
            }
        }
    }
    let knots = cumulative_length(m, c)?;
    let total = knots[knots.len() - 1];
    if !(total > T::zero()) {
        return Err(ExtremalError::InvalidInput("curve has zero length"));
    }
    let n = c.segments();
    let h = total / T::from_count(n);
    let s: Vec<T> = (0..=n).map(|k| h * T::from_count(k)).collect();
    let xs: Vec<Vec<T>> = s
        .iter()
        .enumerate()
        .map(|(k, &sk)| if k == 0 || k == n { c.nodes[k].clone() } else { interpolate(&knots, &c.nodes, sk) })
        .collect();
    let dim = m.dim();
    let vs: Vec<Vec<T>> = {
        let cols: Vec<Vec<T>> = (0..dim)
            .map(|i| derivative(&xs.iter().map(|x| x[i]).collect::<Vec<_>>(), h))
            .collect();
        (0..=n).map(|k| cols.iter().map(|col| col[k]).collect()).collect()
    };
    let sign = match m.signature() {
        Signature::Riemannian => T::one(),
        Signature::Lorentzian => -T::one(),
    };
    let half = T::lit(0.5);
    let mut f_v = vec![vec![T::zero(); n + 1]; dim];
    let mut f_x = vec![vec![T::zero(); n + 1]; dim];
    for k in 0..=n {
        let x = &xs[k];
        if !m.in_domain(x) {
            return Err(crate::metric::MetricError::OutsideDomain {
                point: crate::metric::to_f64(x),
            }
            .into());
        }
        let (g, dg) = m.sample(x, m.side_at(x, None));
        let v = &vs[k];
        let f = (sign * g.quad(v)).max(T::min_positive_value()).sqrt();
        let gv = g.mul_vec(v);
        for i in 0..dim {
            f_v[i][k] = sign * gv[i] / f;
            f_x[i][k] = sign * half * dg[i].quad(v) / f;
        }
    }
    let residual: Vec<Vec<T>> = (0..dim)
        .map(|i| {
            let integral = cumulative_simpson(&f_x[i], h);
            f_v[i].iter().zip(&integral).map(|(&a, &b)| a - b).collect()
        })
        .collect();
    let deviation: Vec<T> = residual.iter().map(|r| std_dev(r)).collect();
    let statistic = deviation.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(DbrResidual {
        s,
        residual,
        deviation,
        statistic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{minimize_bvp, MinimizeOptions, Seed};
    use crate::geodesic::hw_geodesic_family;
    use crate::metric::{bubble, euclidean, hw_riemannian, lipschitz_toy};

    #[test]
    fn derivative_and_integral_orders() {
        let h = 0.01;
        let f: Vec<f64> = (0..=100).map(|k| (k as f64 * h).sin()).collect();
        let d = derivative(&f, h);
        for (k, dk) in d.iter().enumerate() {
            assert!((dk - (k as f64 * h).cos()).abs() < 1e-8);
        }
        let i = cumulative_simpson(&d, h);
        for (k, ik) in i.iter().enumerate() {
            assert!((ik - f[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn flat_line_has_constant_residual() {
        let m = euclidean::<f64>(2);
        let c = Polyline::straight(&[0.0, 0.0], &[1.0, 2.0], 40);
        let r = dbr_residual(&m, &c).unwrap();
        assert!(r.statistic < 1e-10);
        let u = 1.0 / 5f64.sqrt();
        assert!((r.residual[0][7] - u).abs() < 1e-12);
        assert!((r.residual[1][7] - 2.0 * u).abs() < 1e-12);
    }

    #[test]
    fn nonuniform_nodes_are_resampled() {
        let m = euclidean::<f64>(2);
        let nodes = (0..=30).map(|k| {
            let t = (k as f64 / 30.0).powi(2);
            vec![t, -t]
        });
        let r = dbr_residual(&m, &Polyline::new(nodes.collect())).unwrap();
        assert!(r.statistic < 1e-10);
    }

    #[test]
    fn interface_on_non_c1_metric() {
        let c = Polyline::straight(&[-0.5, 0.0], &[0.5, 1.0], 10);
        assert!(matches!(
            dbr_residual(&lipschitz_toy::<f64>(), &c),
            Err(ExtremalError::InterfaceOnCurve { .. })
        ));
        let c = Polyline::straight(&[0.1, 0.0], &[0.5, 1.0], 10);
        assert!(dbr_residual(&lipschitz_toy::<f64>(), &c).is_ok());
        let c = Polyline::straight(&[0.0, 0.0], &[0.5, 0.5], 10);
        assert!(dbr_residual(&bubble::<f64>(0.5).unwrap(), &c).is_err());
    }

    #[test]
    fn hw_minimizer_residual_and_perturbation() {
        let fam = hw_geodesic_family(1.5f64, 0.25).unwrap();
        let m = hw_riemannian(1.5).unwrap();
        let opts = MinimizeOptions {
            seeds: vec![Seed::Arc {
                sagitta: -0.3,
                normal: None,
            }],
            ..Default::default()
        };
        let mz = minimize_bvp(&m, &[0.0, 0.0], &[0.0, 2.0 * fam.y1], 256, &opts).unwrap();
        let r = dbr_residual(&m, &mz.polyline).unwrap();
        assert!(r.statistic < 1e-4, "{}", r.statistic);
        let mut bent = mz.polyline.clone();
        bent.nodes[100][0] += 0.05;
        let rb = dbr_residual(&m, &bent).unwrap();
        assert!(rb.statistic > 10.0 * r.statistic);
    }
}
