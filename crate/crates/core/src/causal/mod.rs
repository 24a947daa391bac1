//! Lorentzian diagnostics: causal cones, causal character of curves,
//! reachability on grids and maximizers of the Lorentzian length.

mod maximize;
mod reach;

use serde_json::json;
use thiserror::Error;

use crate::extremal::{ExtremalError, Polyline};
use crate::geodesic::{character_of_series, hw_geodesic_family, CausalCharacter, GeodesicError, GeodesicRecord};
use crate::linalg::SquareMatrix;
use crate::metric::{MetricError, PiecewiseMetric, Signature};
use crate::scalar::Scalar;

pub use maximize::{maximize_causal_bvp, MaximizeOptions, Maximizer};
pub use reach::{
    grid_reachability, stencil, GridSpec, ReachMode, ReachabilitySet, MIN_DIRECTIONS, SLACK_K, STENCIL_RADIUS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
    #[error("cone under-resolved: only {directions} admissible stencil directions at {point:?}")]
    ResolutionTooCoarse { directions: usize, point: Vec<f64> },
    #[error("source is not a grid vertex")]
    SourceOffGrid,
    #[error("endpoints are not causally related at the tested resolution")]
    NotCausallyRelated,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// The metric and time orientation at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample<T> {
    pub point: Vec<T>,
    pub g: SquareMatrix<T>,
    pub time_orientation: Vec<T>,
    /// `g(T, T)`; negative unless the point is degenerate.
    pub t_norm: T,
}

impl<T: Scalar> ConeSample<T> {
    pub fn at(m: &PiecewiseMetric<T>, x: &[T]) -> Result<Self, CausalError> {
        let t = m
            .time_orientation()
            .ok_or(CausalError::InvalidInput("metric has no time orientation"))?
            .to_vec();
        let sample = m.eval_metric(x, None)?;
        let t_norm = sample.g.quad(&t);
        Ok(Self {
            point: x.to_vec(),
            g: sample.g,
            time_orientation: t,
            t_norm,
        })
    }

    /// `(g(v, v), sign g(v, T))`.
    pub fn test(&self, v: &[T]) -> (T, T) {
        (self.g.quad(v), self.g.bilinear(v, &self.time_orientation).sgn())
    }

    /// Future-directed causal with `g(v, v) ≤ null_tol`.
    pub fn is_future_causal(&self, v: &[T], null_tol: T) -> bool {
        let (n, o) = self.test(v);
        n <= null_tol && o < T::zero()
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.t_norm < T::zero())
    }
}

/// Curve handed to [`causal_character`].
#[derive(Debug, Clone, Copy)]
pub enum Curve<'a, T> {
    Record(&'a GeodesicRecord<T>),
    /// Velocity per segment is `N Δ_k` (parameter interval `[0, 1]`),
    /// with `g` at the segment midpoint. Zero-length segments are skipped.
    Polyline(&'a Polyline<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterReport<T> {
    pub character: CausalCharacter,
    /// `(parameter, g(γ̇, γ̇))` samples.
    pub series: Vec<(T, T)>,
}

pub fn causal_character<T: Scalar>(m: &PiecewiseMetric<T>, curve: Curve<'_, T>, null_tol: T) -> CharacterReport<T> {
    let series: Vec<(T, T)> = match curve {
        Curve::Record(rec) => rec.norm_trace.clone(),
        Curve::Polyline(c) => {
            let n = T::from_count(c.segments());
            (0..c.segments())
                .filter_map(|k| {
                    let d = c.delta(k);
                    if d.iter().all(|&v| v == T::zero()) {
                        return None;
                    }
                    let mid = c.midpoint(k);
                    let t = T::lit(0.5) * (c.param(k) + c.param(k + 1));
                    Some((t, m.g_at(&mid).quad(&d) * n * n))
                })
                .collect()
        }
    };
    let character = match m.signature() {
        Signature::Riemannian => CausalCharacter::NotApplicable,
        Signature::Lorentzian => {
            let norms: Vec<T> = series.iter().map(|&(_, g)| g).collect();
            character_of_series(&norms, null_tol)
        }
    };
    CharacterReport { character, series }
}

/// Lengths in `−dt² + dx² + (1 − |x|^λ) dy²` between the origin and
/// `(2√2 s0, 0, 2y1)`: `Γ_{±ε}` has `2 s0`, the straight `Γ₀` has
/// `√(8 s0² − 4 y1²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwLorentzianLengths<T> {
    pub lambda: T,
    pub eps: T,
    pub l_gamma0: T,
    pub l_gamma_pm: T,
    pub s0: T,
    pub y1: T,
}

impl<T: Scalar> HwLorentzianLengths<T> {
    /// `L(Γ₀) < L(Γ_{±ε})`, equivalent to `s0 < y1`.
    pub fn gamma0_is_shorter(&self) -> bool {
        self.l_gamma0 < self.l_gamma_pm
    }

    pub fn endpoint(&self) -> [T; 3] {
        let two = T::lit(2.0);
        [two * two.sqrt() * self.s0, T::zero(), two * self.y1]
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "lambda": self.lambda.as_f64(),
            "eps": self.eps.as_f64(),
            "L_gamma0": self.l_gamma0.as_f64(),
            "L_gamma_pm": self.l_gamma_pm.as_f64(),
            "s0": self.s0.as_f64(),
            "y1": self.y1.as_f64(),
        })
    }
}

pub fn hw_lorentzian_lengths<T: Scalar>(lambda: T, eps: T) -> Result<HwLorentzianLengths<T>, GeodesicError> {
    let fam = hw_geodesic_family(lambda, eps)?;
    let (s0, y1) = (fam.s0, fam.y1);
    Ok(HwLorentzianLengths {
        lambda,
        eps,
        l_gamma0: (T::lit(8.0) * s0 * s0 - T::lit(4.0) * y1 * y1).sqrt(),
        l_gamma_pm: T::lit(2.0) * s0,
        s0,
        y1,
    })
}
