//! Geodesics, extremal curves and causal structure for semi-Riemannian
//! metrics that are smooth off a hypersurface.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod causal;
pub mod extremal;
pub mod filippov;
pub mod geodesic;
pub mod linalg;
pub mod metric;
pub mod quadrature;
pub mod scalar;

pub use causal::{
    causal_character, grid_reachability, hw_lorentzian_lengths, maximize_causal_bvp, CausalError, GridSpec,
    MaximizeOptions, ReachMode,
};
pub use extremal::{
    curve_length, dbr_residual, geodesic_bvp_shooting, minimize_bvp, ExtremalError, MinimizeOptions, Seed,
};
pub use filippov::{
    classify_interface_hit, filippov_hull, integrate_filippov, sliding_field, FilippovError, FilippovOptions, FnField,
    HitKind, PiecewiseField, SegmentMode, Termination,
};
pub use geodesic::{hw_geodesic_family, shoot_geodesic, CausalCharacter, GeodesicError, Normalization, ShootOptions};
pub use metric::{MetricDescriptor, MetricError, Side, Signature};
pub use scalar::Scalar;

pub type Metric = metric::PiecewiseMetric<f64>;
pub type Trajectory = filippov::Trajectory<f64>;
pub type InterfaceEvent = filippov::InterfaceEvent<f64>;
pub type HullApproximation = filippov::HullApproximation<f64>;
pub type GeodesicRecord = geodesic::GeodesicRecord<f64>;
pub type HwFamily = geodesic::HwFamily<f64>;
pub type PhaseState = geodesic::PhaseState<f64>;
pub type Polyline = extremal::Polyline<f64>;
pub type BvpSolutionSet = extremal::BvpSolutionSet<f64>;
pub type Minimizer = extremal::Minimizer<f64>;
pub type DbrResidual = extremal::DbrResidual<f64>;
pub type ReachabilitySet = causal::ReachabilitySet<f64>;
pub type HwLorentzianLengths = causal::HwLorentzianLengths<f64>;
pub type Maximizer = causal::Maximizer<f64>;
