use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::dopri::DenseStep;
use super::HitKind;
use crate::metric::Side;
use crate::scalar::Scalar;

/// Which dynamics a segment follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    Minus,
    Plus,
    /// Filippov sliding field on the interface.
    Sliding,
    /// On the interface with a field that is continuous there.
    Interface,
}

impl SegmentMode {
    pub fn side(self) -> Side {
        match self {
            SegmentMode::Minus => Side::Minus,
            SegmentMode::Plus => Side::Plus,
            SegmentMode::Sliding | SegmentMode::Interface => Side::Interface,
        }
    }

    pub fn from_side(side: Side) -> Self {
        match side {
            Side::Minus => SegmentMode::Minus,
            Side::Plus => SegmentMode::Plus,
            Side::Interface => SegmentMode::Interface,
        }
    }
}

impl fmt::Display for SegmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentMode::Minus => "minus",
            SegmentMode::Plus => "plus",
            SegmentMode::Sliding => "sliding",
            SegmentMode::Interface => "interface",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    DomainExit,
    RepulsiveStop,
    SlidingExit,
    StepFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A piece of the solution following one smooth law.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub mode: SegmentMode,
    pub t_start: T,
    pub t_end: T,
    pub pieces: Vec<DenseStep<T>>,
}

impl<T: Scalar> Segment<T> {
    pub fn contains(&self, t: T) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    /// State at `t` (clamped to the segment).
    pub fn eval(&self, t: T) -> Option<Vec<T>> {
        let t = t.max(self.t_start).min(self.t_end);
        let idx = self.pieces.partition_point(|p| p.t0 <= t);
        let piece = self.pieces.get(idx.saturating_sub(1))?;
        Some(piece.eval(t))
    }

    pub fn start_state(&self) -> Option<Vec<T>> {
        self.eval(self.t_start)
    }

    pub fn end_state(&self) -> Option<Vec<T>> {
        self.eval(self.t_end)
    }

    /// Step boundaries inside the segment, both ends included.
    pub fn nodes(&self) -> Vec<T> {
        let mut ts: Vec<T> = self.pieces.iter().map(|p| p.t0).collect();
        ts.push(self.t_end);
        ts.dedup();
        ts
    }
}

/// A hit of the interface together with the decision taken there.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceEvent<T> {
    pub t: T,
    pub point: Vec<T>,
    pub fn_minus: T,
    pub fn_plus: T,
    pub kind: HitKind,
    /// Mode the integration continued in; `None` when it stopped.
    pub continued_as: Option<SegmentMode>,
}

impl<T: Scalar> InterfaceEvent<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "t": self.t.as_f64(),
            "point": self.point.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "fN_minus": finite_or_null(self.fn_minus),
            "fN_plus": finite_or_null(self.fn_plus),
            "kind": self.kind,
        })
    }
}

fn finite_or_null<T: Scalar>(v: T) -> serde_json::Value {
    let v = v.as_f64();
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// One admissible way to leave a repulsive (or doubly admissible) point.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuation<T> {
    pub side: Side,
    /// Branch value at the hit point.
    pub initial_velocity: Vec<T>,
    pub segment: Segment<T>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dim: usize,
    pub t_span: (T, T),
    pub x0: Vec<T>,
    pub segments: Vec<Segment<T>>,
    pub events: Vec<InterfaceEvent<T>>,
    pub termination: Termination,
    pub continuations: Vec<Continuation<T>>,
    pub t_final: T,
    pub x_final: Vec<T>,
    pub stats: StepStats,
}

impl<T: Scalar> Trajectory<T> {
    /// State at `t`; at a segment boundary the later segment wins.
    pub fn eval(&self, t: T) -> Option<Vec<T>> {
        if t < self.t_span.0 || t > self.t_final {
            return None;
        }
        match self.segment_at(t) {
            Some(s) => s.eval(t),
            None => Some(self.x0.clone()),
        }
    }

    pub fn segment_at(&self, t: T) -> Option<&Segment<T>> {
        self.segments.iter().rev().find(|s| s.contains(t))
    }

    pub fn mode_at(&self, t: T) -> Option<SegmentMode> {
        self.segment_at(t).map(|s| s.mode)
    }

    /// Largest state discontinuity between consecutive segments.
    pub fn max_state_jump(&self) -> T {
        self.segments
            .windows(2)
            .filter_map(|w| {
                let a = w[0].end_state()?;
                let b = w[1].start_state()?;
                Some(a.iter().zip(&b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs())))
            })
            .fold(T::zero(), T::max)
    }

    /// All step boundaries, in order, without duplicates.
    pub fn nodes(&self) -> Vec<T> {
        let mut ts: Vec<T> = self.segments.iter().flat_map(|s| s.nodes()).collect();
        ts.dedup();
        ts
    }

    /// `n + 1` uniformly spaced samples over the integrated interval.
    pub fn sample_uniform(&self, n: usize) -> Vec<(T, Vec<T>, Option<SegmentMode>)> {
        let (a, b) = (self.t_span.0, self.t_final);
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = if i == n { b } else { a + (b - a) * T::from_count(i) / T::from_count(n) };
                (t, self.eval(t).unwrap_or_else(|| self.x_final.clone()), self.mode_at(t))
            })
            .collect()
    }

    /// CSV with columns `t, x1..xd, side`.
    pub fn to_csv(&self, n_samples: usize) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim {
            let _ = write!(out, ",x{k}");
        }
        out.push_str(",side\n");
        for (t, x, mode) in self.sample_uniform(n_samples) {
            let _ = write!(out, "{:e}", t.as_f64());
            for v in &x {
                let _ = write!(out, ",{:e}", v.as_f64());
            }
            let side = mode.map(|m| m.to_string()).unwrap_or_else(|| "none".into());
            let _ = writeln!(out, ",{side}");
        }
        out
    }

    pub fn events_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.events.iter().map(InterfaceEvent::to_json).collect())
    }

    pub fn continuations_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.continuations
                .iter()
                .map(|c| {
                    json!({
                        "side": c.side,
                        "initial_velocity": c.initial_velocity.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                        "t_end": c.segment.t_end.as_f64(),
                        "end_state": c.segment.end_state().map(|s| s.iter().map(|v| v.as_f64()).collect::<Vec<_>>()),
                        "termination": c.termination,
                    })
                })
                .collect(),
        )
    }
}
