//! Discrete length and energy of polylines, minimizers of the energy,
//! multi-solution geodesic shooting and the du Bois-Reymond residual.

mod dbr;
mod minimize;
mod shooting;

use std::fmt::Write as _;

use thiserror::Error;

use crate::geodesic::{GeodesicError, NULL_TOL};
use crate::metric::{MetricError, PiecewiseMetric, Signature};
use crate::scalar::{dist, Scalar};

pub use dbr::{dbr_residual, DbrResidual};
pub(crate) use minimize::build_seed;
pub use minimize::{minimize_bvp, minimize_bvp_all, MinimizeOptions, Minimizer, Seed};
pub use shooting::{geodesic_bvp_shooting, geodesic_bvp_shooting_with, BvpOptions, BvpSolution, BvpSolutionSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error("segment {index} is not future-directed causal (g(Δ, Δ) = {norm:e})")]
    NonCausalSegment { index: usize, norm: f64 },
    #[error("descent stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("node {index} lies on the interface of a metric that is not C^1 there")]
    InterfaceOnCurve { index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Polyline with nodes at the uniform parameters `a + k (b − a) / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<T> {
    pub nodes: Vec<Vec<T>>,
    pub a: T,
    pub b: T,
}

impl<T: Scalar> Polyline<T> {
    /// Parameter interval `[0, 1]`.
    pub fn new(nodes: Vec<Vec<T>>) -> Self {
        Self {
            nodes,
            a: T::zero(),
            b: T::one(),
        }
    }

    /// `n` segments on the chord from `p` to `q`.
    pub fn straight(p: &[T], q: &[T], n: usize) -> Self {
        let n = n.max(1);
        let nodes = (0..=n)
            .map(|k| {
                let t = T::from_count(k) / T::from_count(n);
                p.iter().zip(q).map(|(&a, &b)| a + t * (b - a)).collect()
            })
            .collect();
        Self::new(nodes)
    }

    pub fn segments(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    pub fn param(&self, k: usize) -> T {
        let n = T::from_count(self.segments().max(1));
        self.a + (self.b - self.a) * T::from_count(k) / n
    }

    pub fn start(&self) -> &[T] {
        &self.nodes[0]
    }

    pub fn end(&self) -> &[T] {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn delta(&self, k: usize) -> Vec<T> {
        self.nodes[k + 1].iter().zip(&self.nodes[k]).map(|(&b, &a)| b - a).collect()
    }

    pub fn midpoint(&self, k: usize) -> Vec<T> {
        let h = T::lit(0.5);
        self.nodes[k + 1].iter().zip(&self.nodes[k]).map(|(&b, &a)| h * (a + b)).collect()
    }

    /// Largest Euclidean distance between corresponding nodes.
    pub fn max_node_distance(&self, other: &Self) -> T {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .fold(T::zero(), |m, (a, b)| m.max(dist(a, b)))
    }

    /// CSV with columns `t, x1..xn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim() {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        for (k, node) in self.nodes.iter().enumerate() {
            let _ = write!(out, "{:e}", self.param(k).as_f64());
            for c in node {
                let _ = write!(out, ",{:e}", c.as_f64());
            }
            out.push('\n');
        }
        out
    }
}

/// `g(Δ, Δ)` with `g` taken at the segment midpoint.
pub fn segment_norm<T: Scalar>(m: &PiecewiseMetric<T>, c: &Polyline<T>, k: usize) -> Result<T, MetricError> {
    let mid = c.midpoint(k);
    if !m.in_domain(&mid) {
        return Err(MetricError::OutsideDomain {
            point: crate::metric::to_f64(&mid),
        });
    }
    Ok(m.g_at(&mid).quad(&c.delta(k)))
}

/// Per-segment `g(Δ, Δ)` and `g(Δ, T)` for a Lorentzian metric, midpoint rule.
pub(crate) fn segment_cone<T: Scalar>(m: &PiecewiseMetric<T>, a: &[T], b: &[T]) -> Option<(T, T)> {
    let h = T::lit(0.5);
    let mid: Vec<T> = a.iter().zip(b).map(|(&x, &y)| h * (x + y)).collect();
    if !m.in_domain(&mid) {
        return None;
    }
    let d: Vec<T> = b.iter().zip(a).map(|(&x, &y)| x - y).collect();
    let g = m.g_at(&mid);
    let orient = m.time_orientation().map_or(T::zero(), |t| g.bilinear(&d, t));
    Some((g.quad(&d), orient))
}

/// Whether a Lorentzian chord from `a` to `b` is future-directed causal:
/// `g(Δ, Δ) ≤ NULL_TOL·|Δ|²` and `g(Δ, T) ≤ 0`. A zero chord counts.
pub(crate) fn chord_is_causal<T: Scalar>(m: &PiecewiseMetric<T>, a: &[T], b: &[T]) -> bool {
    let e2: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    if e2 == T::zero() {
        return true;
    }
    match segment_cone(m, a, b) {
        Some((g, orient)) => g <= T::lit(NULL_TOL) * e2 && orient <= T::zero(),
        None => false,
    }
}

/// Composite midpoint length. Lorentzian polylines must be future-directed
/// causal segment by segment and get `Σ √(−g(Δ, Δ))`.
pub fn curve_length<T: Scalar>(m: &PiecewiseMetric<T>, c: &Polyline<T>) -> Result<T, ExtremalError> {
    let mut total = T::zero();
    for k in 0..c.segments() {
        let g = segment_norm(m, c, k)?;
        match m.signature() {
            Signature::Riemannian => total += g.max(T::zero()).sqrt(),
            Signature::Lorentzian => {
                if !chord_is_causal(m, &c.nodes[k], &c.nodes[k + 1]) {
                    return Err(ExtremalError::NonCausalSegment { index: k, norm: g.as_f64() });
                }
                total += (-g).max(T::zero()).sqrt();
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{hw_geodesic_family, shoot_geodesic, ShootOptions};
    use crate::metric::{euclidean, hw_riemannian, minkowski};

    #[test]
    fn trivial_lengths() {
        let hw = hw_riemannian(1.5f64).unwrap();
        let c = Polyline::straight(&[0.0, 0.0], &[0.0, 1.0], 7);
        assert!((curve_length(&hw, &c).unwrap() - 1.0).abs() < 1e-15);
        let flat = euclidean::<f64>(2);
        let c = Polyline::straight(&[0.0, 0.0], &[1.0, 0.0], 3);
        assert!((curve_length(&flat, &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_lengths_and_causality() {
        let m = minkowski::<f64>(2);
        let c = Polyline::straight(&[0.0, 0.0], &[2.0, 0.0], 4);
        assert!((curve_length(&m, &c).unwrap() - 2.0).abs() < 1e-15);
        let null = Polyline::straight(&[0.0, 0.0], &[1.0, 1.0], 4);
        assert_eq!(curve_length(&m, &null).unwrap(), 0.0);
        let space = Polyline::straight(&[0.0, 0.0], &[1.0, 2.0], 4);
        assert!(matches!(curve_length(&m, &space), Err(ExtremalError::NonCausalSegment { index: 0, .. })));
        let past = Polyline::straight(&[0.0, 0.0], &[-1.0, 0.0], 4);
        assert!(matches!(curve_length(&m, &past), Err(ExtremalError::NonCausalSegment { .. })));
    }

    fn sampled_hw_curve(n: usize) -> (f64, Polyline<f64>) {
        let fam = hw_geodesic_family(1.5f64, 0.25).unwrap();
        let m = hw_riemannian(1.5f64).unwrap();
        let rec = shoot_geodesic(&m, &[0.0, 0.0], &fam.initial_velocity(), (0.0, 2.0 * fam.s0), &ShootOptions::default())
            .unwrap();
        let nodes = (0..=n)
            .map(|k| rec.state(2.0 * fam.s0 * k as f64 / n as f64).unwrap().x)
            .collect();
        (2.0 * fam.s0, Polyline::new(nodes))
    }

    #[test]
    fn hw_polyline_length_converges_to_parameter_length() {
        let m = hw_riemannian(1.5f64).unwrap();
        let mut errs = Vec::new();
        for n in [32, 64, 128, 256] {
            let (exact, c) = sampled_hw_curve(n);
            errs.push((curve_length(&m, &c).unwrap() - exact).abs());
        }
        assert!(errs[3] < 1e-5, "{errs:?}");
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "order below 2: {errs:?}");
        }
    }

    #[test]
    fn refinement_order_on_smooth_curve() {
        // quarter circle of radius 1 in the plane: length π/2
        let m = euclidean::<f64>(2);
        let arc = |n: usize| {
            Polyline::new(
                (0..=n)
                    .map(|k| {
                        let t = std::f64::consts::FRAC_PI_2 * k as f64 / n as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect(),
            )
        };
        let e1 = (curve_length(&m, &arc(16)).unwrap() - std::f64::consts::FRAC_PI_2).abs();
        let e2 = (curve_length(&m, &arc(32)).unwrap() - std::f64::consts::FRAC_PI_2).abs();
        assert!(e1 / e2 > 3.9);
    }

    #[test]
    fn csv_export() {
        let c = Polyline::straight(&[0.0f64, 0.0], &[1.0, 2.0], 2);
        let csv = c.to_csv();
        assert!(csv.starts_with("t,x1,x2\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
