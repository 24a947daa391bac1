//! Piecewise-smooth semi-Riemannian metrics glued along a level-set hypersurface.
//!
//! A [`PiecewiseMetric`] carries two smooth branches, each evaluable on the
//! closure of its half-domain, plus a level function whose zero set is the
//! interface. The branches agree on the interface (the metric is continuous)
//! but their first derivatives may jump, which is exactly the situation in
//! which the geodesic equation has a discontinuous right-hand side.

mod zoo;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

pub use zoo::{bubble, euclidean, hw_lorentzian, hw_riemannian, lipschitz_toy, minkowski};

/// Distance from the interface (in level-function units) below which a point
/// counts as lying on it.
pub const TAU_ONSURFACE: f64 = 1e-10;

/// Maximum disagreement of the two branches on the interface for the zoo metrics.
pub const TAU_GLUE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point {point:?} lies outside the metric domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("metric at {point:?} has eigenvalues {eigenvalues:?}, expected {expected} signature")]
    SignatureViolation {
        point: Vec<f64>,
        eigenvalues: Vec<f64>,
        expected: Signature,
    },
    #[error("parameter {name} = {value} is invalid: {reason}")]
    BadParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("metric is not invertible at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("metric derivatives are not finite at {point:?}")]
    NotDifferentiable { point: Vec<f64> },
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::Riemannian => f.write_str("riemannian"),
            Signature::Lorentzian => f.write_str("lorentzian"),
        }
    }
}

/// Which smooth branch a value was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
    /// On the interface; the two branches are averaged.
    Interface,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Minus => f.write_str("minus"),
            Side::Plus => f.write_str("plus"),
            Side::Interface => f.write_str("interface"),
        }
    }
}

/// `g` and its first partials `dg[k] = ∂_k g` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample<T> {
    pub g: SquareMatrix<T>,
    pub dg: Vec<SquareMatrix<T>>,
    pub side: Side,
}

pub type BranchFn<T> = Arc<dyn Fn(&[T]) -> (SquareMatrix<T>, Vec<SquareMatrix<T>>) + Send + Sync>;
type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type Predicate<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;

/// Smooth scalar function whose zero set is the interface.
#[derive(Clone)]
pub struct Level<T> {
    value: ScalarFn<T>,
    gradient: VectorFn<T>,
}

impl<T: Scalar> Level<T> {
    pub fn new(
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// `φ(x) = x^k` in an `n`-dimensional chart.
    pub fn coordinate(k: usize, n: usize) -> Self {
        Self::new(
            move |x: &[T]| x[k],
            move |_x: &[T]| {
                let mut g = vec![T::zero(); n];
                g[k] = T::one();
                g
            },
        )
    }

    /// `φ(x) = a·x + b`.
    pub fn affine(normal: Vec<T>, offset: T) -> Self {
        let grad = normal.clone();
        Self::new(
            move |x: &[T]| crate::scalar::dot(&normal, x) + offset,
            move |_x: &[T]| grad.clone(),
        )
    }

    pub fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }
}

/// Serializable identity of a metric, used in experiment manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub signature: Signature,
    pub regularity: String,
}

impl MetricDescriptor {
    /// Reconstructs the zoo metric this descriptor names.
    pub fn build<T: Scalar>(&self) -> Result<PiecewiseMetric<T>, MetricError> {
        let param = |k: &'static str| {
            self.params.get(k).copied().ok_or(MetricError::BadParameter {
                name: k,
                value: f64::NAN,
                reason: "missing",
            })
        };
        match self.name.as_str() {
            "hw" => hw_riemannian(T::lit(param("lambda")?)),
            "hw-lorentzian" => hw_lorentzian(T::lit(param("lambda")?)),
            "bubble" => bubble(T::lit(param("lambda")?)),
            "lipschitz-toy" => Ok(lipschitz_toy()),
            "euclidean" => Ok(euclidean(self.dim)),
            "minkowski" => Ok(minkowski(self.dim)),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

/// Semi-Riemannian metric given by two smooth branches glued along `{φ = 0}`.
#[derive(Clone)]
pub struct PiecewiseMetric<T: Scalar> {
    pub(crate) descriptor: MetricDescriptor,
    pub(crate) dim: usize,
    pub(crate) signature: Signature,
    pub(crate) minus: BranchFn<T>,
    pub(crate) plus: BranchFn<T>,
    pub(crate) level: Level<T>,
    pub(crate) domain: Predicate<T>,
    pub(crate) lipschitz_constant_hint: Option<T>,
    pub(crate) time_orientation: Option<Vec<T>>,
    pub(crate) c1_across_interface: bool,
}

impl<T: Scalar> fmt::Debug for PiecewiseMetric<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseMetric")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

/// Builder-style constructor arguments for a custom [`PiecewiseMetric`].
pub struct MetricParts<T: Scalar> {
    pub descriptor: MetricDescriptor,
    pub minus: BranchFn<T>,
    pub plus: BranchFn<T>,
    pub level: Level<T>,
    pub domain: Predicate<T>,
    pub lipschitz_constant_hint: Option<T>,
    pub time_orientation: Option<Vec<T>>,
    pub c1_across_interface: bool,
}

impl<T: Scalar> PiecewiseMetric<T> {
    pub fn from_parts(parts: MetricParts<T>) -> Self {
        Self {
            dim: parts.descriptor.dim,
            signature: parts.descriptor.signature,
            descriptor: parts.descriptor,
            minus: parts.minus,
            plus: parts.plus,
            level: parts.level,
            domain: parts.domain,
            lipschitz_constant_hint: parts.lipschitz_constant_hint,
            time_orientation: parts.time_orientation,
            c1_across_interface: parts.c1_across_interface,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    pub fn level(&self) -> &Level<T> {
        &self.level
    }

    pub fn lipschitz_constant_hint(&self) -> Option<T> {
        self.lipschitz_constant_hint
    }

    /// Constant future-pointing timelike vector field, Lorentzian metrics only.
    pub fn time_orientation(&self) -> Option<&[T]> {
        self.time_orientation.as_deref()
    }

    /// Whether the first derivatives of `g` are continuous across the interface.
    pub fn is_c1_across_interface(&self) -> bool {
        self.c1_across_interface
    }

    pub fn in_domain(&self, x: &[T]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite()) && (self.domain)(x)
    }

    /// Side selected by the sign of the level function, falling back to
    /// `hint` (or [`Side::Interface`]) within [`TAU_ONSURFACE`] of the interface.
    pub fn side_at(&self, x: &[T], hint: Option<Side>) -> Side {
        let phi = self.level.value(x);
        let tau = T::lit(TAU_ONSURFACE);
        if phi > tau {
            Side::Plus
        } else if phi < -tau {
            Side::Minus
        } else {
            hint.unwrap_or(Side::Interface)
        }
    }

    /// Unchecked branch evaluation. `Side::Interface` averages both branches.
    pub fn sample(&self, x: &[T], side: Side) -> (SquareMatrix<T>, Vec<SquareMatrix<T>>) {
        match side {
            Side::Minus => (self.minus)(x),
            Side::Plus => (self.plus)(x),
            Side::Interface => {
                let (gm, dgm) = (self.minus)(x);
                let (gp, dgp) = (self.plus)(x);
                let h = T::lit(0.5);
                (
                    gm.add(&gp).scale(h),
                    dgm.iter().zip(&dgp).map(|(a, b)| a.add(b).scale(h)).collect(),
                )
            }
        }
    }

    /// Metric components only, side chosen by the sign of the level function.
    pub fn g_at(&self, x: &[T]) -> SquareMatrix<T> {
        self.sample(x, self.side_at(x, None)).0
    }

    /// Largest componentwise gap between the branches at `x`.
    pub fn glue_defect(&self, x: &[T]) -> T {
        let (gm, _) = (self.minus)(x);
        let (gp, _) = (self.plus)(x);
        gm.max_abs_diff(&gp)
    }

    fn check_point(&self, x: &[T]) -> Result<(), MetricError> {
        if x.len() != self.dim {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(MetricError::OutsideDomain { point: to_f64(x) });
        }
        Ok(())
    }

    /// Checked evaluation of `g` and `∂g`, including a signature test.
    pub fn eval_metric(&self, x: &[T], side_hint: Option<Side>) -> Result<MetricSample<T>, MetricError> {
        self.check_point(x)?;
        let side = self.side_at(x, side_hint);
        let (g, dg) = self.sample(x, side);
        let ev = g.symmetric_eigenvalues();
        let negatives = ev.iter().filter(|&&e| e < T::zero()).count();
        let zeros = ev.iter().filter(|&&e| e == T::zero()).count();
        let expected_neg = match self.signature {
            Signature::Riemannian => 0,
            Signature::Lorentzian => 1,
        };
        let sym_tol = T::lit(1e-12) * (T::one() + crate::scalar::max_abs(g.as_slice()));
        if negatives != expected_neg || zeros > 0 || g.max_asymmetry() > sym_tol || !g.is_finite() {
            return Err(MetricError::SignatureViolation {
                point: to_f64(x),
                eigenvalues: to_f64(&ev),
                expected: self.signature,
            });
        }
        Ok(MetricSample { g, dg, side })
    }

    /// Christoffel symbols of the selected branch.
    pub fn christoffel(&self, x: &[T], side: Side) -> Result<Christoffel<T>, MetricError> {
        self.check_point(x)?;
        let (g, dg) = self.sample(x, side);
        christoffel_from(&g, &dg).map_err(|e| match e {
            ChristoffelFailure::Singular => MetricError::SingularMetric { point: to_f64(x) },
            ChristoffelFailure::NonFinite => MetricError::NotDifferentiable { point: to_f64(x) },
        })
    }

    /// `-Γ^i_{jk} v^j v^k` without materializing the full symbol array.
    pub fn geodesic_acceleration(&self, x: &[T], side: Side, v: &[T]) -> Option<Vec<T>> {
        let n = self.dim;
        let (g, dg) = self.sample(x, side);
        let ginv = g.inverse(T::lit(1e-13))?;
        let half = T::lit(0.5);
        let mut w = vec![T::zero(); n];
        for (j, dgj) in dg.iter().enumerate() {
            if v[j] == T::zero() {
                continue;
            }
            let dv = dgj.mul_vec(v);
            for l in 0..n {
                w[l] += v[j] * dv[l];
            }
        }
        for (l, dgl) in dg.iter().enumerate() {
            w[l] -= half * dgl.quad(v);
        }
        let acc: Vec<T> = ginv.mul_vec(&w).into_iter().map(|a| -a).collect();
        if acc.iter().all(|a| a.is_finite()) {
            Some(acc)
        } else {
            None
        }
    }

    /// `g(v, v)` at `x`, side chosen by the level function.
    pub fn norm2(&self, x: &[T], v: &[T]) -> T {
        self.g_at(x).quad(v)
    }
}

/// `Γ^i_{jk}` stored as `data[(i * n + j) * n + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Christoffel<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// `-Γ^i_{jk} v^j v^k`.
    pub fn contract(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..n {
                    for k in 0..n {
                        acc += self.get(i, j, k) * v[j] * v[k];
                    }
                }
                -acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChristoffelFailure {
    Singular,
    NonFinite,
}

/// `Γ^i_{jk} = ½ g^{il}(∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})`.
pub fn christoffel_from<T: Scalar>(
    g: &SquareMatrix<T>,
    dg: &[SquareMatrix<T>],
) -> Result<Christoffel<T>, ChristoffelFailure> {
    let n = g.dim();
    if !g.is_finite() || dg.iter().any(|d| !d.is_finite()) {
        return Err(ChristoffelFailure::NonFinite);
    }
    let ginv = g.inverse(T::lit(1e-13)).ok_or(ChristoffelFailure::Singular)?;
    let half = T::lit(0.5);
    let mut lower = vec![T::zero(); n * n * n];
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = half * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                lower[(l * n + j) * n + k] = v;
                lower[(l * n + k) * n + j] = v;
            }
        }
    }
    let mut data = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut acc = T::zero();
                for l in 0..n {
                    acc += ginv[(i, l)] * lower[(l * n + j) * n + k];
                }
                data[(i * n + j) * n + k] = acc;
                data[(i * n + k) * n + j] = acc;
            }
        }
    }
    Ok(Christoffel { n, data })
}

pub(crate) fn to_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Christoffel symbols from central differences of `g` only; shares no
    /// code with the analytic partials of the zoo.
    fn fd_christoffel(m: &PiecewiseMetric<f64>, x: &[f64], side: Side, h: f64) -> Christoffel<f64> {
        let n = m.dim();
        let g = m.sample(x, side).0;
        let dg: Vec<_> = (0..n)
            .map(|k| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                m.sample(&xp, side).0.add(&m.sample(&xm, side).0.scale(-1.0)).scale(0.5 / h)
            })
            .collect();
        christoffel_from(&g, &dg).unwrap()
    }

    #[test]
    fn hw_sample_off_axis() {
        let m = hw_riemannian(1.5).unwrap();
        let s = m.eval_metric(&[0.5, 0.0], None).unwrap();
        assert_eq!(s.side, Side::Plus);
        assert_relative_eq!(s.g[(0, 0)], 1.0);
        assert_relative_eq!(s.g[(1, 1)], 1.0 - 0.5f64.powf(1.5), epsilon = 1e-15);
        assert_relative_eq!(s.g[(1, 1)], 0.646_446_609_406_726_2, epsilon = 1e-15);
    }

    #[test]
    fn hw_axis_from_either_side() {
        let m = hw_riemannian(1.5).unwrap();
        for hint in [Side::Minus, Side::Plus] {
            let s = m.eval_metric(&[0.0, 3.0], Some(hint)).unwrap();
            assert_eq!(s.side, hint);
            assert_eq!(s.g, SquareMatrix::identity(2));
        }
    }

    #[test]
    fn bubble_on_axis() {
        let m = bubble(0.5).unwrap();
        let s = m.eval_metric(&[0.0, 0.7], Some(Side::Plus)).unwrap();
        assert_eq!(s.g, SquareMatrix::from_rows(&[&[-1.0, -1.0], &[-1.0, 0.0]]));
        assert_eq!(s.g.quad(&[0.0, 1.0]), 0.0);
    }

    #[test]
    fn bubble_off_axis_values() {
        let m = bubble(0.5).unwrap();
        let s = m.eval_metric(&[0.25, 0.0], None).unwrap();
        // |u|^λ = 0.5
        assert_relative_eq!(s.g.quad(&[0.0, 1.0]), 0.5 * (2.0 - 0.5), epsilon = 1e-15);
        assert_relative_eq!(s.g.determinant(), -0.75 - 0.25, epsilon = 1e-15);
    }

    #[test]
    fn lorentzian_hw_values() {
        let m = hw_lorentzian(1.5).unwrap();
        let s = m.eval_metric(&[0.0, 0.0, 0.0], None).unwrap();
        assert_eq!(s.g, SquareMatrix::diagonal(&[-1.0, 1.0, 1.0]));
        let s = m.eval_metric(&[0.0, 0.5, 0.0], None).unwrap();
        let expect = 1.0 - 0.5 * 0.5f64.sqrt();
        assert_eq!(s.g, SquareMatrix::diagonal(&[-1.0, 1.0, expect]));
    }

    #[test]
    fn outside_domain_rejected() {
        let m = hw_riemannian(1.5).unwrap();
        assert!(matches!(
            m.eval_metric(&[1.0, 0.0], None),
            Err(MetricError::OutsideDomain { .. })
        ));
        assert!(matches!(
            m.eval_metric(&[0.0], None),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn signature_violation_reported() {
        // a Riemannian label on a Lorentzian matrix
        let mut d = minkowski::<f64>(2).descriptor().clone();
        d.signature = Signature::Riemannian;
        let flat = minkowski::<f64>(2);
        let bad = PiecewiseMetric::from_parts(MetricParts {
            descriptor: d,
            minus: flat.minus.clone(),
            plus: flat.plus.clone(),
            level: Level::coordinate(1, 2),
            domain: Arc::new(|_| true),
            lipschitz_constant_hint: None,
            time_orientation: None,
            c1_across_interface: true,
        });
        assert!(matches!(
            bad.eval_metric(&[0.0, 0.3], None),
            Err(MetricError::SignatureViolation { .. })
        ));
    }

    #[test]
    fn hw_christoffel_matches_geodesic_equation() {
        let lambda = 1.5;
        let m = hw_riemannian(lambda).unwrap();
        for &x in &[0.5, -0.3, 0.01] {
            let side = if x > 0.0 { Side::Plus } else { Side::Minus };
            let c = m.christoffel(&[x, 0.2], side).unwrap();
            let expect = lambda / 2.0 * f64::abs(x).powf(lambda - 1.0) * x.signum();
            assert_relative_eq!(c.get(0, 1, 1), expect, epsilon = 1e-14);
            let expect_y = -lambda / 2.0 * f64::abs(x).powf(lambda - 1.0) * x.signum() / (1.0 - f64::abs(x).powf(lambda));
            assert_relative_eq!(c.get(1, 0, 1), expect_y, epsilon = 1e-14);
            assert_eq!(c.get(1, 0, 1), c.get(1, 1, 0));
        }
    }

    #[test]
    fn hw_christoffel_against_finite_differences() {
        let m = hw_riemannian(1.5).unwrap();
        let x = [0.5, 0.0];
        let a = m.christoffel(&x, Side::Plus).unwrap();
        let fd = fd_christoffel(&m, &x, Side::Plus, 1e-6);
        assert!(a.max_abs_diff(&fd) < 1e-6, "diff {}", a.max_abs_diff(&fd));
        // -(λ/2)|x|^{λ-1}/(1-|x|^λ) at x = 0.5
        assert_relative_eq!(a.get(1, 0, 1), -0.820_377_241_017_040_7, epsilon = 1e-12);
    }

    #[test]
    fn flat_christoffel_vanishes() {
        let m = euclidean::<f64>(2);
        assert_eq!(m.christoffel(&[0.3, -0.7], Side::Plus).unwrap().max_abs(), 0.0);
        let m = minkowski::<f64>(3);
        assert_eq!(m.christoffel(&[0.3, -0.7, 2.0], Side::Minus).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bubble_axis_not_differentiable() {
        let m = bubble(0.5).unwrap();
        assert!(matches!(
            m.christoffel(&[0.0, 0.3], Side::Plus),
            Err(MetricError::NotDifferentiable { .. })
        ));
    }

    #[test]
    fn acceleration_matches_contracted_symbols() {
        let m = hw_lorentzian(1.5).unwrap();
        let x = [0.1, -0.4, 0.3];
        let v = [1.3, 0.2, -0.7];
        let side = Side::Minus;
        let a = m.geodesic_acceleration(&x, side, &v).unwrap();
        let b = m.christoffel(&x, side).unwrap().contract(&v);
        for (p, q) in a.iter().zip(&b) {
            assert_relative_eq!(*p, *q, epsilon = 1e-14);
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, m: &PiecewiseMetric<f64>, iface: Option<usize>) -> Vec<f64> {
        loop {
            let mut x: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-0.99..0.99)).collect();
            if let Some(k) = iface {
                x[k] = 0.0;
            }
            if m.in_domain(&x) {
                return x;
            }
        }
    }

    fn zoo() -> Vec<(PiecewiseMetric<f64>, usize)> {
        vec![
            (hw_riemannian(1.5).unwrap(), 0),
            (hw_riemannian(1.1).unwrap(), 0),
            (hw_lorentzian(1.7).unwrap(), 1),
            (bubble(0.5).unwrap(), 0),
            (bubble(0.2).unwrap(), 0),
            (lipschitz_toy(), 0),
        ]
    }

    #[test]
    fn glue_continuity_on_zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, k) in zoo() {
            for _ in 0..1000 {
                let x = random_point(&mut rng, &m, Some(k));
                assert!(m.glue_defect(&x) < TAU_GLUE, "{:?} at {x:?}", m.descriptor().name);
            }
        }
    }

    #[test]
    fn signature_stable_on_zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, _) in zoo() {
            for _ in 0..1000 {
                let x = random_point(&mut rng, &m, None);
                m.eval_metric(&x, None).unwrap();
            }
        }
    }

    #[test]
    fn christoffel_fd_agreement_random_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (m, k) in zoo() {
            for _ in 0..200 {
                let mut x = random_point(&mut rng, &m, None);
                // keep away from the interface and the domain wall so that the
                // stencil stays on one branch and |x|^λ stays smooth
                x[k] = x[k].signum() * x[k].abs().clamp(0.05, 0.9);
                let side = m.side_at(&x, None);
                let a = m.christoffel(&x, side).unwrap();
                let fd = fd_christoffel(&m, &x, side, 1e-6);
                let scale = 1.0 + a.max_abs();
                assert!(a.max_abs_diff(&fd) < 1e-5 * scale, "{} at {x:?}", m.descriptor().name);
            }
        }
    }

    #[test]
    fn descriptor_roundtrip_builds_same_metric() {
        let m = hw_lorentzian::<f64>(1.5).unwrap();
        let json = serde_json::to_string(m.descriptor()).unwrap();
        let d: MetricDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(&d, m.descriptor());
        let rebuilt: PiecewiseMetric<f64> = d.build().unwrap();
        let x = [0.2, 0.3, -1.0];
        assert_eq!(rebuilt.g_at(&x), m.g_at(&x));
        assert!(json.contains("\"regularity\":\"C^{1,0.5}\""));
    }

    #[test]
    fn works_in_single_precision() {
        let m = hw_riemannian::<f32>(1.5).unwrap();
        let s = m.eval_metric(&[0.5, 0.0], None).unwrap();
        assert!((s.g[(1, 1)] - 0.646_446_6).abs() < 1e-6);
    }
}
