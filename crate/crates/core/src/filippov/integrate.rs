//! Event-driven integration of Filippov solutions.
//!
//! Each smooth branch is integrated with [`Dopri5`]. A sign change of `φ`
//! over an accepted step is localized by bisection on the dense output and
//! classified from the one-sided normal components. Transversal crossings
//! restart on the other branch from the identical state, so position and
//! velocity-level components are continuous by construction.

use std::cell::Cell;

use super::dopri::{DenseStep, Dopri5, StepFail, StepperState};
use super::trajectory::{Continuation, InterfaceEvent, Segment, SegmentMode, StepStats, Termination, Trajectory};
use super::{classify_interface_hit, sliding_combination, FilippovError, HitKind, PiecewiseField};
use crate::metric::{to_f64, Side, TAU_ONSURFACE};
use crate::scalar::{dot, max_abs, norm, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FilippovOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Width of the parameter bracket returned by event localization.
    pub event_tol: T,
    pub max_step: T,
    /// Threshold below which a normal component counts as zero.
    pub classify_tol: T,
    /// Threshold for the second-order (curvature) test at tangential hits.
    pub curvature_tol: T,
    pub max_steps: usize,
    /// Events within one `max_step` window that trigger the chattering guard.
    pub chatter_limit: usize,
}

impl<T: Scalar> Default for FilippovOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            event_tol: T::lit(1e-10),
            max_step: T::lit(0.1),
            classify_tol: T::lit(1e-9),
            curvature_tol: T::lit(1e-6),
            max_steps: 2_000_000,
            chatter_limit: 50,
        }
    }
}

impl<T: Scalar> FilippovOptions<T> {
    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_max_step(mut self, max_step: T) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_event_tol(mut self, event_tol: T) -> Self {
        self.event_tol = event_tol;
        self
    }

    fn validate(&self) -> Result<(), FilippovError> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(FilippovError::InvalidInput("tolerances must be positive"));
        }
        if !positive(self.event_tol) {
            return Err(FilippovError::InvalidInput("event tolerance must be positive"));
        }
        if !(self.max_step > T::zero()) {
            return Err(FilippovError::InvalidInput("max_step must be positive"));
        }
        if !(self.classify_tol >= T::zero()) || !(self.curvature_tol >= T::zero()) {
            return Err(FilippovError::InvalidInput("classification tolerances must be nonnegative"));
        }
        Ok(())
    }
}

/// Integrates the Filippov solution of `f` from `x0` over `t_span`.
///
/// Stops of the dynamics (domain exit, repulsive points, unresolved
/// tangential hits, step-size collapse) are reported through
/// [`Trajectory::termination`]; `Err` is reserved for invalid input.
pub fn integrate_filippov<T: Scalar, F: PiecewiseField<T> + ?Sized>(
    f: &F,
    x0: &[T],
    t_span: (T, T),
    opts: &FilippovOptions<T>,
) -> Result<Trajectory<T>, FilippovError> {
    opts.validate()?;
    if x0.len() != f.dim() {
        return Err(FilippovError::InvalidInput("initial point has the wrong dimension"));
    }
    if !(t_span.1 >= t_span.0) {
        return Err(FilippovError::InvalidInput("t_span must be increasing"));
    }
    if !f.in_domain(x0) || x0.iter().any(|v| !v.is_finite()) {
        return Err(FilippovError::OutsideDomain(to_f64(x0)));
    }
    let mut run = Run {
        f,
        opts,
        solver: Dopri5::new(opts.rtol, opts.atol).with_max_step(opts.max_step),
        t_end: t_span.1,
        traj: Trajectory {
            dim: f.dim(),
            t_span,
            x0: x0.to_vec(),
            segments: Vec::new(),
            events: Vec::new(),
            termination: Termination::Completed,
            continuations: Vec::new(),
            t_final: t_span.0,
            x_final: x0.to_vec(),
            stats: StepStats::default(),
        },
        domain_hit: Cell::new(false),
        h_hint: None,
    };
    run.go(t_span.0, x0.to_vec());
    Ok(run.traj)
}

enum Outcome {
    Go(SegmentMode),
    Stop(Termination),
}

enum SegEnd<T> {
    Done(Termination),
    /// Left the mode's region; bracket `[lo, hi]` around the exit.
    Hit { t_lo: T, x_lo: Vec<T>, t_hi: T, x_hi: Vec<T> },
    /// Interface mode drifted off the interface.
    Off { t: T, x: Vec<T> },
}

struct Run<'a, T: Scalar, F: PiecewiseField<T> + ?Sized> {
    f: &'a F,
    opts: &'a FilippovOptions<T>,
    solver: Dopri5<T>,
    t_end: T,
    traj: Trajectory<T>,
    domain_hit: Cell<bool>,
    h_hint: Option<T>,
}

impl<'a, T: Scalar, F: PiecewiseField<T> + ?Sized> Run<'a, T, F> {
    fn tau(&self) -> T {
        T::lit(TAU_ONSURFACE)
    }

    fn go(&mut self, t0: T, x0: Vec<T>) {
        let phi = self.f.level(&x0);
        let (mut mode, mut t, mut x) = if phi > self.tau() {
            (SegmentMode::Plus, t0, x0)
        } else if phi < -self.tau() {
            (SegmentMode::Minus, t0, x0)
        } else {
            match self.decide(t0, &x0, None) {
                Outcome::Go(m) => {
                    let x = if m == SegmentMode::Sliding { self.project(&x0) } else { x0 };
                    (m, t0, x)
                }
                Outcome::Stop(term) => {
                    self.finish(term, t0, x0);
                    return;
                }
            }
        };
        let mut event_times: Vec<T> = Vec::new();
        loop {
            match self.run_segment(mode, t, &x) {
                SegEnd::Done(term) => {
                    let (tf, xf) = self.last_state(t, &x);
                    self.finish(term, tf, xf);
                    return;
                }
                SegEnd::Off { t: t1, x: x1 } => {
                    mode = if self.f.level(&x1) > T::zero() { SegmentMode::Plus } else { SegmentMode::Minus };
                    t = t1;
                    x = x1;
                }
                SegEnd::Hit { t_lo, x_lo, t_hi, x_hi } => {
                    event_times.push(t_hi);
                    let window_start = t_hi - self.opts.max_step;
                    let recent = event_times.iter().rev().take_while(|&&te| te > window_start).count();
                    let outcome = if recent > self.opts.chatter_limit {
                        self.chatter_guard(t_hi, &x_hi)
                    } else {
                        self.decide(t_hi, &x_hi, Some(mode))
                    };
                    match outcome {
                        Outcome::Go(next) => {
                            let (tn, xn) = if next == mode {
                                (t_lo, x_lo)
                            } else if next == SegmentMode::Sliding {
                                (t_hi, self.project(&x_hi))
                            } else {
                                (t_hi, x_hi)
                            };
                            if let Some(seg) = self.traj.segments.last_mut() {
                                seg.t_end = tn;
                            }
                            if let Some(ev) = self.traj.events.last_mut() {
                                ev.t = tn;
                                ev.point = xn.clone();
                            }
                            mode = next;
                            t = tn;
                            x = xn;
                        }
                        Outcome::Stop(term) => {
                            self.finish(term, t_hi, x_hi);
                            return;
                        }
                    }
                }
            }
        }
    }

    fn last_state(&self, t: T, x: &[T]) -> (T, Vec<T>) {
        match self.traj.segments.last() {
            Some(seg) if seg.t_end >= t => (seg.t_end, seg.end_state().unwrap_or_else(|| x.to_vec())),
            _ => (t, x.to_vec()),
        }
    }

    fn finish(&mut self, term: Termination, t: T, x: Vec<T>) {
        self.traj.termination = term;
        self.traj.t_final = t;
        self.traj.x_final = x;
    }

    fn branch_ok(&self, side: Side, y: &[T], out: &mut [T]) -> bool {
        if !self.f.in_domain(y) {
            self.domain_hit.set(true);
            return false;
        }
        self.f.eval_branch(side, y, out) && out.iter().all(|v| v.is_finite())
    }

    fn rhs_value(&self, mode: SegmentMode, y: &[T], out: &mut [T]) -> bool {
        match mode {
            SegmentMode::Minus => self.branch_ok(Side::Minus, y, out),
            SegmentMode::Plus => self.branch_ok(Side::Plus, y, out),
            SegmentMode::Interface => {
                if !self.f.in_domain(y) {
                    self.domain_hit.set(true);
                    return false;
                }
                match self.f.eval_auto(y) {
                    Some(v) if v.iter().all(|c| c.is_finite()) => {
                        out.copy_from_slice(&v);
                        true
                    }
                    _ => false,
                }
            }
            SegmentMode::Sliding => {
                if !self.f.in_domain(y) {
                    self.domain_hit.set(true);
                    return false;
                }
                let Some((a, b)) = self.f.normal_components(y) else {
                    return false;
                };
                match sliding_combination(self.f, y, a, b) {
                    Some(v) if v.iter().all(|c| c.is_finite()) => {
                        out.copy_from_slice(&v);
                        true
                    }
                    _ => false,
                }
            }
        }
    }

    /// Positive while the state stays in the region of `mode`.
    fn inside(&self, mode: SegmentMode, y: &[T]) -> T {
        match mode {
            SegmentMode::Plus => self.f.level(y),
            SegmentMode::Minus => -self.f.level(y),
            SegmentMode::Interface => self.tau() - self.f.level(y).abs(),
            SegmentMode::Sliding => match self.f.normal_components(y) {
                Some((a, b)) => a.min(-b) - self.opts.classify_tol,
                None => -T::one(),
            },
        }
    }

    fn run_segment(&mut self, mode: SegmentMode, t0: T, x0: &[T]) -> SegEnd<T> {
        let rhs = |y: &[T], out: &mut [T]| self.rhs_value(mode, y, out);
        let mut seg = Segment {
            mode,
            t_start: t0,
            t_end: t0,
            pieces: Vec::new(),
        };
        if t0 >= self.t_end {
            self.traj.segments.push(seg);
            return SegEnd::Done(Termination::Completed);
        }
        self.domain_hit.set(false);
        let Some(mut st) = self.solver.start(&rhs, t0, x0, self.h_hint) else {
            let term = if self.domain_hit.get() { Termination::DomainExit } else { Termination::StepFailure };
            return SegEnd::Done(term);
        };
        let mut stats = (0usize, 0usize, 0usize);
        let result = loop {
            if st.t >= self.t_end {
                break SegEnd::Done(Termination::Completed);
            }
            if self.traj.stats.accepted + self.traj.stats.rejected + st.accepted + st.rejected > self.opts.max_steps {
                break SegEnd::Done(Termination::StepFailure);
            }
            self.domain_hit.set(false);
            let piece = match self.solver.advance(&rhs, &mut st, self.t_end) {
                Ok(p) => p,
                Err(e) => {
                    let term = if e == StepFail::Unavailable && self.domain_hit.get() {
                        Termination::DomainExit
                    } else {
                        Termination::StepFailure
                    };
                    break SegEnd::Done(term);
                }
            };
            let t_piece_end = st.t;
            if self.inside(mode, &st.y) > T::zero() {
                seg.t_end = t_piece_end;
                seg.pieces.push(piece);
                if mode == SegmentMode::Sliding {
                    self.reproject(&mut st, &rhs);
                }
                continue;
            }
            if mode == SegmentMode::Interface {
                seg.t_end = t_piece_end;
                seg.pieces.push(piece);
                break SegEnd::Off { t: st.t, x: st.y.clone() };
            }
            let (t_lo, t_hi) = self.bisect(mode, &piece, t_piece_end);
            let x_lo = piece.eval(t_lo);
            let x_hi = piece.eval(t_hi);
            seg.t_end = t_hi;
            seg.pieces.push(piece);
            break SegEnd::Hit { t_lo, x_lo, t_hi, x_hi };
        };
        stats.0 += st.accepted;
        stats.1 += st.rejected;
        stats.2 += st.evals;
        self.traj.stats.accepted += stats.0;
        self.traj.stats.rejected += stats.1;
        self.traj.stats.evals += stats.2;
        self.h_hint = Some(st.h);
        self.traj.segments.push(seg);
        result
    }

    /// Shrinks `[t0, t1]` of `piece` around the first exit from `mode`.
    fn bisect(&self, mode: SegmentMode, piece: &DenseStep<T>, t1: T) -> (T, T) {
        let mut lo = piece.t0;
        let mut hi = t1;
        let half = T::lit(0.5);
        let mut y = vec![T::zero(); piece.dim()];
        while hi - lo > self.opts.event_tol {
            let mid = lo + half * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            piece.eval_into(mid, &mut y);
            if self.inside(mode, &y) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }

    /// Newton step back onto `φ = 0`.
    fn project(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        for _ in 0..3 {
            let phi = self.f.level(&y);
            if phi == T::zero() {
                break;
            }
            let g = self.f.level_gradient(&y);
            let g2 = dot(&g, &g);
            if !(g2 > T::zero()) {
                break;
            }
            for (yi, gi) in y.iter_mut().zip(&g) {
                *yi -= phi * *gi / g2;
            }
        }
        y
    }

    fn reproject(&self, st: &mut StepperState<T>, rhs: &dyn Fn(&[T], &mut [T]) -> bool) {
        let phi = self.f.level(&st.y);
        if phi.abs() > T::lit(1e-3) * self.tau() {
            let y = self.project(&st.y);
            let mut k = vec![T::zero(); y.len()];
            if rhs(&y, &mut k) {
                st.y = y;
                st.k1 = k;
            }
        }
    }

    fn branches_close(&self, x: &[T]) -> bool {
        match (self.f.eval(Side::Minus, x), self.f.eval(Side::Plus, x)) {
            (Some(m), Some(p)) => {
                let scale = T::one() + max_abs(&m).max(max_abs(&p));
                m.iter().zip(&p).all(|(&a, &b)| (a - b).abs() <= self.opts.classify_tol * scale)
            }
            _ => false,
        }
    }

    /// Forward-difference derivative of `⟨n, f^s⟩` along the flow of `f^s`.
    fn normal_acceleration(&self, side: Side, x: &[T]) -> T {
        let Some(fx) = self.f.eval(side, x) else {
            return T::nan();
        };
        let n0 = dot(&self.f.unit_normal(x), &fx);
        let eta = T::lit(1e-7) / norm(&fx).max(T::one());
        let y: Vec<T> = x.iter().zip(&fx).map(|(&a, &b)| a + eta * b).collect();
        match self.f.eval(side, &y) {
            Some(fy) => (dot(&self.f.unit_normal(&y), &fy) - n0) / eta,
            None => T::nan(),
        }
    }

    fn record(&mut self, t: T, x: &[T], fm: T, fp: T, kind: HitKind, next: Option<SegmentMode>) {
        self.traj.events.push(InterfaceEvent {
            t,
            point: x.to_vec(),
            fn_minus: fm,
            fn_plus: fp,
            kind,
            continued_as: next,
        });
    }

    fn decide(&mut self, t: T, x: &[T], _from: Option<SegmentMode>) -> Outcome {
        let tol = self.opts.classify_tol;
        let Some((fm, fp)) = self.f.normal_components(x) else {
            self.record(t, x, T::nan(), T::nan(), HitKind::Tangential, None);
            return Outcome::Stop(Termination::StepFailure);
        };
        let kind = classify_interface_hit(fm, fp, tol);
        let outcome = match kind {
            HitKind::CrossUp => Outcome::Go(SegmentMode::Plus),
            HitKind::CrossDown => Outcome::Go(SegmentMode::Minus),
            HitKind::Sliding => Outcome::Go(SegmentMode::Sliding),
            HitKind::Repulsive => Outcome::Stop(Termination::RepulsiveStop),
            HitKind::Tangential => {
                let ctol = self.opts.curvature_tol;
                let plus_ok = fp > tol || (fp.abs() <= tol && self.normal_acceleration(Side::Plus, x) > ctol);
                let minus_ok = fm < -tol || (fm.abs() <= tol && self.normal_acceleration(Side::Minus, x) < -ctol);
                match (minus_ok, plus_ok) {
                    (true, false) => Outcome::Go(SegmentMode::Minus),
                    (false, true) => Outcome::Go(SegmentMode::Plus),
                    (true, true) => Outcome::Stop(Termination::RepulsiveStop),
                    (false, false) if self.branches_close(x) => Outcome::Go(SegmentMode::Interface),
                    (false, false) => Outcome::Stop(Termination::SlidingExit),
                }
            }
        };
        let next = match outcome {
            Outcome::Go(m) => Some(m),
            Outcome::Stop(_) => None,
        };
        self.record(t, x, fm, fp, kind, next);
        if let Outcome::Stop(Termination::RepulsiveStop) = outcome {
            self.continuations(t, x);
        }
        outcome
    }

    /// Too many events in one window: accept sliding if the sign pattern
    /// allows it, treat a continuous field as lying on the interface, and
    /// give up otherwise.
    fn chatter_guard(&mut self, t: T, x: &[T]) -> Outcome {
        let (fm, fp) = self.f.normal_components(x).unwrap_or((T::nan(), T::nan()));
        let outcome = if fm >= T::zero() && fp <= T::zero() && fm - fp > T::zero() {
            Outcome::Go(SegmentMode::Sliding)
        } else if self.branches_close(x) {
            Outcome::Go(SegmentMode::Interface)
        } else {
            Outcome::Stop(Termination::StepFailure)
        };
        let next = match outcome {
            Outcome::Go(m) => Some(m),
            Outcome::Stop(_) => None,
        };
        let kind = classify_interface_hit(fm, fp, T::zero());
        self.record(t, x, fm, fp, kind, next);
        outcome
    }

    /// Smooth integration of each branch away from a point where both are
    /// admissible, up to the end of the span or the next return to the
    /// interface.
    fn continuations(&mut self, t0: T, x0: &[T]) {
        for side in [Side::Minus, Side::Plus] {
            let Some(v0) = self.f.eval(side, x0) else {
                continue;
            };
            let sign = if side == Side::Plus { T::one() } else { -T::one() };
            let rhs = |y: &[T], out: &mut [T]| self.branch_ok(side, y, out);
            let mut seg = Segment {
                mode: SegmentMode::from_side(side),
                t_start: t0,
                t_end: t0,
                pieces: Vec::new(),
            };
            let mut term = Termination::Completed;
            self.domain_hit.set(false);
            match self.solver.start(&rhs, t0, x0, None) {
                None => term = Termination::DomainExit,
                Some(mut st) => {
                    let mut steps = 0usize;
                    while st.t < self.t_end {
                        steps += 1;
                        if steps > self.opts.max_steps {
                            term = Termination::StepFailure;
                            break;
                        }
                        match self.solver.advance(&rhs, &mut st, self.t_end) {
                            Ok(p) => {
                                // stop where the branch would re-enter the interface
                                if sign * self.f.level(&st.y) < -self.tau() {
                                    break;
                                }
                                seg.t_end = st.t;
                                seg.pieces.push(p);
                            }
                            Err(e) => {
                                term = if e == StepFail::Unavailable && self.domain_hit.get() {
                                    Termination::DomainExit
                                } else {
                                    Termination::StepFailure
                                };
                                break;
                            }
                        }
                    }
                }
            }
            self.traj.continuations.push(Continuation {
                side,
                initial_velocity: v0,
                segment: seg,
                termination: term,
            });
        }
    }
}
