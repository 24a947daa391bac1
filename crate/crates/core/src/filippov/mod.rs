//! Filippov machinery for vector fields that are smooth off a hypersurface.
//!
//! The field is given by two smooth branches `f⁻`, `f⁺` and a level function
//! `φ` with `φ < 0` on `D⁻`, `φ > 0` on `D⁺`. Trajectories meeting `N = {φ = 0}`
//! are classified from the one-sided normal components
//! `f±_N = ⟨f±, ∇φ/|∇φ|⟩`:
//!
//! | `f⁻_N` | `f⁺_N` | kind |
//! |--------|--------|------|
//! | `> 0`  | `> 0`  | [`HitKind::CrossUp`] |
//! | `< 0`  | `< 0`  | [`HitKind::CrossDown`] |
//! | `< 0`  | `> 0`  | [`HitKind::Repulsive`] |
//! | `> 0`  | `< 0`  | [`HitKind::Sliding`] |
//! | either within `tol` of 0 | | [`HitKind::Tangential`] |

mod dopri;
mod hull;
mod integrate;
mod trajectory;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::Side;
use crate::scalar::{dot, norm, Scalar};

pub use dopri::{DenseStep, Dopri5};
pub use hull::{filippov_hull, HullApproximation, HullShape};
pub use integrate::{integrate_filippov, FilippovOptions};
pub use trajectory::{Continuation, InterfaceEvent, Segment, SegmentMode, Termination, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilippovError {
    #[error("point {point:?} is not in a sliding configuration (f-_N = {fn_minus}, f+_N = {fn_plus})")]
    NotSliding {
        point: Vec<f64>,
        fn_minus: f64,
        fn_plus: f64,
    },
    #[error("initial point {0:?} lies outside the field domain")]
    OutsideDomain(Vec<f64>),
    #[error("invalid integration input: {0}")]
    InvalidInput(&'static str),
}

/// Interface-hit classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HitKind {
    CrossUp,
    CrossDown,
    Sliding,
    Repulsive,
    Tangential,
}

impl fmt::Display for HitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HitKind::CrossUp => "CrossUp",
            HitKind::CrossDown => "CrossDown",
            HitKind::Sliding => "Sliding",
            HitKind::Repulsive => "Repulsive",
            HitKind::Tangential => "Tangential",
        };
        f.write_str(s)
    }
}

/// Total classification of a hit from the one-sided normal components.
/// Non-finite input is reported as [`HitKind::Tangential`].
pub fn classify_interface_hit<T: Scalar>(fn_minus: T, fn_plus: T, tol: T) -> HitKind {
    if !(fn_minus.abs() > tol) || !(fn_plus.abs() > tol) {
        return HitKind::Tangential;
    }
    match (fn_minus > T::zero(), fn_plus > T::zero()) {
        (true, true) => HitKind::CrossUp,
        (false, false) => HitKind::CrossDown,
        (false, true) => HitKind::Repulsive,
        (true, false) => HitKind::Sliding,
    }
}

/// A vector field on `ℝ^d` that is smooth off `{φ = 0}`.
pub trait PiecewiseField<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    /// Evaluates the branch selected by `side` into `out`. Returns `false`
    /// when the branch cannot be evaluated at `x`.
    fn eval_branch(&self, side: Side, x: &[T], out: &mut [T]) -> bool;

    fn level(&self, x: &[T]) -> T;

    fn level_gradient(&self, x: &[T]) -> Vec<T>;

    fn in_domain(&self, _x: &[T]) -> bool {
        true
    }

    /// Branch value; `Side::Interface` averages the two branches.
    fn eval(&self, side: Side, x: &[T]) -> Option<Vec<T>> {
        let d = self.dim();
        match side {
            Side::Minus | Side::Plus => {
                let mut out = vec![T::zero(); d];
                self.eval_branch(side, x, &mut out).then_some(out)
            }
            Side::Interface => {
                let m = self.eval(Side::Minus, x)?;
                let p = self.eval(Side::Plus, x)?;
                let h = T::lit(0.5);
                Some(m.iter().zip(&p).map(|(&a, &b)| h * (a + b)).collect())
            }
        }
    }

    /// Value of `f` with the branch picked by the sign of `φ`; exactly on
    /// the interface the branches are averaged.
    fn eval_auto(&self, x: &[T]) -> Option<Vec<T>> {
        let phi = self.level(x);
        let side = if phi > T::zero() {
            Side::Plus
        } else if phi < T::zero() {
            Side::Minus
        } else {
            Side::Interface
        };
        self.eval(side, x)
    }

    /// Unit normal `∇φ/|∇φ|` pointing from `D⁻` to `D⁺`.
    fn unit_normal(&self, x: &[T]) -> Vec<T> {
        let g = self.level_gradient(x);
        let n = norm(&g);
        g.into_iter().map(|v| v / n).collect()
    }

    /// `(f⁻_N, f⁺_N)` at `x`; `None` if a branch is not evaluable.
    fn normal_components(&self, x: &[T]) -> Option<(T, T)> {
        let n = self.unit_normal(x);
        let fm = self.eval(Side::Minus, x)?;
        let fp = self.eval(Side::Plus, x)?;
        Some((dot(&n, &fm), dot(&n, &fp)))
    }
}

/// Filippov convex combination `α f⁺ + (1 − α) f⁻` with
/// `α = f⁻_N / (f⁻_N − f⁺_N)`, tangent to the interface.
pub fn sliding_field<T: Scalar, F: PiecewiseField<T> + ?Sized>(
    field: &F,
    x: &[T],
    tol: T,
) -> Result<Vec<T>, FilippovError> {
    let not_sliding = |a: T, b: T| FilippovError::NotSliding {
        point: crate::metric::to_f64(x),
        fn_minus: a.as_f64(),
        fn_plus: b.as_f64(),
    };
    let (fm_n, fp_n) = field
        .normal_components(x)
        .ok_or_else(|| not_sliding(T::nan(), T::nan()))?;
    if classify_interface_hit(fm_n, fp_n, tol) != HitKind::Sliding {
        return Err(not_sliding(fm_n, fp_n));
    }
    Ok(sliding_combination(field, x, fm_n, fp_n).expect("branches evaluable"))
}

pub(crate) fn sliding_combination<T: Scalar, F: PiecewiseField<T> + ?Sized>(
    field: &F,
    x: &[T],
    fm_n: T,
    fp_n: T,
) -> Option<Vec<T>> {
    let alpha = fm_n / (fm_n - fp_n);
    let fm = field.eval(Side::Minus, x)?;
    let fp = field.eval(Side::Plus, x)?;
    let n = field.unit_normal(x);
    let mut out: Vec<T> = fm
        .iter()
        .zip(&fp)
        .map(|(&a, &b)| alpha * b + (T::one() - alpha) * a)
        .collect();
    // remove the rounding residue of the normal component
    let r = dot(&n, &out);
    for (o, ni) in out.iter_mut().zip(&n) {
        *o -= r * *ni;
    }
    Some(out)
}

type BranchClosure<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// [`PiecewiseField`] assembled from closures.
#[derive(Clone)]
pub struct FnField<T: Scalar> {
    dim: usize,
    minus: BranchClosure<T>,
    plus: BranchClosure<T>,
    level: crate::metric::Level<T>,
}

impl<T: Scalar> FnField<T> {
    pub fn new(
        dim: usize,
        minus: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        plus: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        level: crate::metric::Level<T>,
    ) -> Self {
        Self {
            dim,
            minus: Arc::new(minus),
            plus: Arc::new(plus),
            level,
        }
    }
}

impl<T: Scalar> PiecewiseField<T> for FnField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_branch(&self, side: Side, x: &[T], out: &mut [T]) -> bool {
        match side {
            Side::Minus => (self.minus)(x, out),
            Side::Plus => (self.plus)(x, out),
            Side::Interface => unreachable!("handled by eval"),
        }
        out.iter().all(|v| v.is_finite())
    }

    fn level(&self, x: &[T]) -> T {
        self.level.value(x)
    }

    fn level_gradient(&self, x: &[T]) -> Vec<T> {
        self.level.gradient(x)
    }
}

/// One-dimensional demonstration fields `ẋ = a + b·sgn(x)`.
pub mod demos {
    use super::FnField;
    use crate::metric::Level;
    use crate::scalar::Scalar;

    fn affine_sign<T: Scalar>(a: f64, b: f64) -> FnField<T> {
        let (a, b) = (T::lit(a), T::lit(b));
        FnField::new(
            1,
            move |_x: &[T], out: &mut [T]| out[0] = a - b,
            move |_x: &[T], out: &mut [T]| out[0] = a + b,
            Level::coordinate(0, 1),
        )
    }

    /// `ẋ = 1 + ½ sgn(x)`: crosses upward.
    pub fn crossing<T: Scalar>() -> FnField<T> {
        affine_sign(1.0, 0.5)
    }

    /// `ẋ = −sgn(x)`: slides on `x = 0`.
    pub fn sliding<T: Scalar>() -> FnField<T> {
        affine_sign(0.0, -1.0)
    }

    /// `ẋ = sgn(x)`: repels from `x = 0`.
    pub fn repulsive<T: Scalar>() -> FnField<T> {
        affine_sign(0.0, 1.0)
    }

    /// `ẋ = sgn(x)` viewed as a field; same as [`repulsive`].
    pub fn sign<T: Scalar>() -> FnField<T> {
        affine_sign(0.0, 1.0)
    }
}
