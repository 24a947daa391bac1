//! Geodesics of piecewise metrics as Filippov solutions of the first-order
//! system `ẋ = v`, `v̇ = −Γ(x)(v, v)`.

mod hw;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filippov::{integrate_filippov, FilippovError, FilippovOptions, PiecewiseField, SegmentMode, Trajectory};
use crate::metric::{MetricError, PiecewiseMetric, Side, Signature};
use crate::quadrature::QuadratureError;
use crate::scalar::Scalar;

pub use hw::{hw_geodesic_family, HwFamily};

/// `|g(γ̇, γ̇)|` below this counts as null.
pub const NULL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesicError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Filippov(#[from] FilippovError),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("cannot normalize a null initial velocity")]
    NullNormalization,
    #[error("parameter {name} = {value} out of range: {reason}")]
    BadParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    pub x: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> PhaseState<T> {
    pub fn new(x: Vec<T>, v: Vec<T>) -> Self {
        assert_eq!(x.len(), v.len(), "position and velocity dimensions differ");
        Self { x, v }
    }

    /// Splits a phase vector `(x, v)` of length `2n`.
    pub fn from_phase(s: &[T]) -> Self {
        let n = s.len() / 2;
        Self {
            x: s[..n].to_vec(),
            v: s[n..].to_vec(),
        }
    }

    pub fn to_phase(&self) -> Vec<T> {
        self.x.iter().chain(&self.v).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }
}

/// The geodesic system as a piecewise field on phase space, switching
/// where the metric's level function changes sign.
pub struct GeodesicField<'m, T: Scalar> {
    metric: &'m PiecewiseMetric<T>,
}

impl<'m, T: Scalar> GeodesicField<'m, T> {
    pub fn new(metric: &'m PiecewiseMetric<T>) -> Self {
        Self { metric }
    }
}

impl<T: Scalar> PiecewiseField<T> for GeodesicField<'_, T> {
    fn dim(&self) -> usize {
        2 * self.metric.dim()
    }

    fn eval_branch(&self, side: Side, s: &[T], out: &mut [T]) -> bool {
        let n = self.metric.dim();
        let (x, v) = s.split_at(n);
        out[..n].copy_from_slice(v);
        match self.metric.geodesic_acceleration(x, side, v) {
            Some(a) => {
                out[n..].copy_from_slice(&a);
                true
            }
            None => false,
        }
    }

    fn level(&self, s: &[T]) -> T {
        self.metric.level().value(&s[..self.metric.dim()])
    }

    fn level_gradient(&self, s: &[T]) -> Vec<T> {
        let n = self.metric.dim();
        let mut g = self.metric.level().gradient(&s[..n]);
        g.resize(2 * n, T::zero());
        g
    }

    fn in_domain(&self, s: &[T]) -> bool {
        self.metric.in_domain(&s[..self.metric.dim()])
    }
}

/// `(v, −Γ(x)(v, v))` from the Christoffel symbols of the chosen branch.
pub fn geodesic_rhs<T: Scalar>(m: &PiecewiseMetric<T>, s: &PhaseState<T>, side: Side) -> Result<Vec<T>, MetricError> {
    let gamma = m.christoffel(&s.x, side)?;
    let mut out = s.v.clone();
    out.extend(gamma.contract(&s.v));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
    Mixed,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::fmt::Display for CausalCharacter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CausalCharacter::Timelike => "timelike",
            CausalCharacter::Null => "null",
            CausalCharacter::Spacelike => "spacelike",
            CausalCharacter::Mixed => "mixed",
            CausalCharacter::NotApplicable => "n/a",
        })
    }
}

/// Pointwise class of one value of `g(γ̇, γ̇)`.
pub fn pointwise_character<T: Scalar>(norm: T, null_tol: T) -> CausalCharacter {
    if norm.abs() <= null_tol {
        CausalCharacter::Null
    } else if norm < T::zero() {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Spacelike
    }
}

/// Overall character of a sampled curve: the common class if every sample
/// agrees, [`CausalCharacter::Mixed`] otherwise.
pub fn character_of_series<T: Scalar>(norms: &[T], null_tol: T) -> CausalCharacter {
    let mut seen: Option<CausalCharacter> = None;
    for &n in norms {
        let c = pointwise_character(n, null_tol);
        match seen {
            None => seen = Some(c),
            Some(s) if s != c => return CausalCharacter::Mixed,
            _ => {}
        }
    }
    seen.unwrap_or(CausalCharacter::NotApplicable)
}

/// Initial-velocity convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Use `v` as given.
    #[default]
    Affine,
    /// Rescale `v` at the start so that `|g(v, v)| = 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOptions<T> {
    pub integrator: FilippovOptions<T>,
    pub normalization: Normalization,
    /// Uniform samples for the norm trace (step nodes are added).
    pub norm_samples: usize,
    pub null_tol: T,
}

impl<T: Scalar> Default for ShootOptions<T> {
    fn default() -> Self {
        Self {
            integrator: FilippovOptions::default().with_tolerances(T::lit(1e-10), T::lit(1e-12)),
            normalization: Normalization::Affine,
            norm_samples: 200,
            null_tol: T::lit(NULL_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicRecord<T> {
    pub dim: usize,
    pub trajectory: Trajectory<T>,
    /// `(s, g(γ̇, γ̇))` samples.
    pub norm_trace: Vec<(T, T)>,
    pub causal_character: CausalCharacter,
}

impl<T: Scalar> GeodesicRecord<T> {
    pub fn state(&self, s: T) -> Option<PhaseState<T>> {
        self.trajectory.eval(s).map(|p| PhaseState::from_phase(&p))
    }

    pub fn final_state(&self) -> PhaseState<T> {
        PhaseState::from_phase(&self.trajectory.x_final)
    }

    pub fn s_final(&self) -> T {
        self.trajectory.t_final
    }

    /// First parameter at which velocity component `k` changes sign from
    /// its initial sign, localized by bisection on the dense output.
    pub fn first_velocity_zero(&self, k: usize) -> Option<(T, PhaseState<T>)> {
        let idx = self.dim + k;
        let sign0 = self.trajectory.x0[idx].signum();
        for seg in &self.trajectory.segments {
            for piece in &seg.pieces {
                let a = piece.t0.max(seg.t_start);
                let b = piece.t_end().min(seg.t_end);
                if b <= a {
                    continue;
                }
                if piece.eval(b)[idx] * sign0 > T::zero() {
                    continue;
                }
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = T::lit(0.5) * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if piece.eval(mid)[idx] * sign0 > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = T::lit(0.5) * (lo + hi);
                return Some((s, PhaseState::from_phase(&piece.eval(s))));
            }
        }
        None
    }

    /// CSV with columns `s, x1..xn, v1..vn, norm`.
    pub fn to_csv(&self, metric: &PiecewiseMetric<T>, n_samples: usize) -> String {
        let mut out = String::from("s");
        for k in 1..=self.dim {
            let _ = write!(out, ",x{k}");
        }
        for k in 1..=self.dim {
            let _ = write!(out, ",v{k}");
        }
        out.push_str(",norm\n");
        for (s, state, _) in self.trajectory.sample_uniform(n_samples) {
            let p = PhaseState::from_phase(&state);
            let _ = write!(out, "{:e}", s.as_f64());
            for c in p.x.iter().chain(&p.v) {
                let _ = write!(out, ",{:e}", c.as_f64());
            }
            let _ = writeln!(out, ",{:e}", metric.norm2(&p.x, &p.v).as_f64());
        }
        out
    }
}

/// Integrates the geodesic from `(p, v)` over `s_span`.
///
/// Transversal interface hits restart on the other branch with identical
/// position and velocity (C¹-matching).
pub fn shoot_geodesic<T: Scalar>(
    m: &PiecewiseMetric<T>,
    p: &[T],
    v: &[T],
    s_span: (T, T),
    opts: &ShootOptions<T>,
) -> Result<GeodesicRecord<T>, GeodesicError> {
    let n = m.dim();
    if p.len() != n || v.len() != n {
        return Err(MetricError::DimensionMismatch {
            expected: n,
            got: if p.len() != n { p.len() } else { v.len() },
        }
        .into());
    }
    if !m.in_domain(p) {
        return Err(MetricError::OutsideDomain { point: crate::metric::to_f64(p) }.into());
    }
    let mut v = v.to_vec();
    if opts.normalization == Normalization::Unit {
        let g2 = m.norm2(p, &v);
        if g2.abs() <= opts.null_tol {
            return Err(GeodesicError::NullNormalization);
        }
        let scale = T::one() / g2.abs().sqrt();
        v.iter_mut().for_each(|c| *c *= scale);
    }
    let field = GeodesicField::new(m);
    let s0: Vec<T> = p.iter().chain(&v).copied().collect();
    let trajectory = integrate_filippov(&field, &s0, s_span, &opts.integrator)?;
    let norm_trace = norm_trace(m, &trajectory, opts.norm_samples);
    let causal_character = match m.signature() {
        Signature::Riemannian => CausalCharacter::NotApplicable,
        Signature::Lorentzian => {
            let norms: Vec<T> = norm_trace.iter().map(|&(_, g)| g).collect();
            character_of_series(&norms, opts.null_tol)
        }
    };
    Ok(GeodesicRecord {
        dim: n,
        trajectory,
        norm_trace,
        causal_character,
    })
}

fn norm_trace<T: Scalar>(m: &PiecewiseMetric<T>, tr: &Trajectory<T>, samples: usize) -> Vec<(T, T)> {
    let n = m.dim();
    let mut ts: Vec<T> = tr.sample_uniform(samples).into_iter().map(|(t, _, _)| t).collect();
    ts.extend(tr.nodes());
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ts.dedup();
    ts.into_iter()
        .filter_map(|t| {
            let s = tr.eval(t)?;
            let side = match tr.mode_at(t) {
                Some(SegmentMode::Minus) => Side::Minus,
                Some(SegmentMode::Plus) => Side::Plus,
                _ => m.side_at(&s[..n], None),
            };
            let (g, _) = m.sample(&s[..n], side);
            Some((t, g.quad(&s[n..])))
        })
        .collect()
}

/// Norm samples along a record and the largest deviation from the first.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries<T> {
    pub samples: Vec<(T, T)>,
    pub max_drift: T,
}

pub fn tangent_norm<T: Scalar>(_m: &PiecewiseMetric<T>, rec: &GeodesicRecord<T>) -> NormSeries<T> {
    let first = rec.norm_trace.first().map(|p| p.1).unwrap_or_else(T::zero);
    let max_drift = rec
        .norm_trace
        .iter()
        .fold(T::zero(), |m, &(_, g)| m.max((g - first).abs()));
    NormSeries {
        samples: rec.norm_trace.clone(),
        max_drift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filippov::{HitKind, Termination};
    use crate::metric::{euclidean, hw_riemannian, lipschitz_toy};

    #[test]
    fn flat_rhs_is_free_motion() {
        let m = euclidean::<f64>(3);
        let s = PhaseState::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5]);
        let r = geodesic_rhs(&m, &s, Side::Plus).unwrap();
        assert_eq!(r, vec![1.0, -2.0, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn hw_rhs_values() {
        let m = hw_riemannian(1.5f64).unwrap();
        let r = geodesic_rhs(&m, &PhaseState::new(vec![0.5, 0.0], vec![0.0, 1.0]), Side::Plus).unwrap();
        // -(λ/2)|x|^{λ-1} = -0.75 √0.5
        assert!((r[2] + 0.75 * 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r[2] + 0.530_330_085_889_910_6).abs() < 1e-12);
        let r = geodesic_rhs(&m, &PhaseState::new(vec![0.5, 0.0], vec![1.0, 0.0]), Side::Plus).unwrap();
        assert_eq!(r[3], 0.0);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn axis_geodesic_stays_on_axis() {
        let m = hw_riemannian(1.5f64).unwrap();
        let rec = shoot_geodesic(&m, &[0.0, 0.0], &[0.0, 1.0], (0.0, 3.0), &ShootOptions::default()).unwrap();
        assert_eq!(rec.trajectory.termination, Termination::Completed);
        let end = rec.final_state();
        assert_eq!(end.x[0], 0.0);
        assert!((end.x[1] - 3.0).abs() < 1e-12);
        assert!(tangent_norm(&m, &rec).max_drift < 1e-12);
        assert_eq!(rec.causal_character, CausalCharacter::NotApplicable);
    }

    #[test]
    fn flat_norm_constant() {
        let m = euclidean::<f64>(2);
        let rec = shoot_geodesic(&m, &[0.3, 0.1], &[1.0, 2.0], (0.0, 2.0), &ShootOptions::default()).unwrap();
        assert!(tangent_norm(&m, &rec).max_drift < 1e-13);
    }

    #[test]
    fn lipschitz_toy_single_transversal_crossing() {
        let m = lipschitz_toy::<f64>();
        let rec = shoot_geodesic(&m, &[-0.5, 0.0], &[1.0, 0.5], (0.0, 2.0), &ShootOptions::default()).unwrap();
        let tr = &rec.trajectory;
        assert_eq!(tr.termination, Termination::Completed);
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].kind, HitKind::CrossUp);
        assert!(tr.max_state_jump() < 1e-10);
        assert!(tangent_norm(&m, &rec).max_drift < 1e-8);
    }

    #[test]
    fn unit_normalization() {
        let m = hw_riemannian(1.5f64).unwrap();
        let opts = ShootOptions {
            normalization: Normalization::Unit,
            ..ShootOptions::default()
        };
        let rec = shoot_geodesic(&m, &[0.2, 0.0], &[3.0, 4.0], (0.0, 0.5), &opts).unwrap();
        assert!((rec.norm_trace[0].1 - 1.0).abs() < 1e-14);
        let null = crate::metric::minkowski::<f64>(2);
        assert_eq!(
            shoot_geodesic(&null, &[0.0, 0.0], &[1.0, 1.0], (0.0, 1.0), &opts),
            Err(GeodesicError::NullNormalization)
        );
    }

    #[test]
    fn series_character() {
        assert_eq!(character_of_series(&[-1.0, -0.5], 1e-8), CausalCharacter::Timelike);
        assert_eq!(character_of_series(&[0.0, 1e-9], 1e-8), CausalCharacter::Null);
        assert_eq!(character_of_series(&[0.0, -0.5], 1e-8), CausalCharacter::Mixed);
        assert_eq!(character_of_series::<f64>(&[], 1e-8), CausalCharacter::NotApplicable);
    }

    #[test]
    fn phase_roundtrip() {
        let s = PhaseState::new(vec![1.0, 2.0], vec![3.0, 4.0]);
        assert_eq!(PhaseState::from_phase(&s.to_phase()), s);
    }
}
