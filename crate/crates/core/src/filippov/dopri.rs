//! Dormand–Prince 5(4) with the standard continuous extension of order 4.

use crate::scalar::Scalar;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Autonomous right-hand side; returns `false` where it cannot be evaluated.
pub type Rhs<'a, T> = dyn Fn(&[T], &mut [T]) -> bool + 'a;

/// One accepted step with its interpolating polynomial on `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<T> {
    pub t0: T,
    pub h: T,
    rcont: [Vec<T>; 5],
}

impl<T: Scalar> DenseStep<T> {
    pub fn t_end(&self) -> T {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[T] {
        &self.rcont[0]
    }

    pub fn dim(&self) -> usize {
        self.rcont[0].len()
    }

    /// Interpolated state; `t` is clamped to the step.
    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let theta = if self.h > T::zero() {
            ((t - self.t0) / self.h).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let theta1 = T::one() - theta;
        let [r0, r1, r2, r3, r4] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r0[i] + theta * (r1[i] + theta1 * (r2[i] + theta * (r3[i] + theta1 * r4[i])));
        }
    }

    /// Time derivative of the interpolant.
    pub fn eval_derivative(&self, t: T) -> Vec<T> {
        let theta = if self.h > T::zero() {
            ((t - self.t0) / self.h).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let th1 = T::one() - theta;
        let [_, r1, r2, r3, r4] = &self.rcont;
        (0..self.dim())
            .map(|i| {
                // d/dθ of θ(r1 + θ1(r2 + θ(r3 + θ1 r4)))
                let inner = r3[i] + th1 * r4[i];
                let mid = r2[i] + theta * inner;
                let d_inner = -r4[i];
                let d_mid = inner + theta * d_inner;
                let outer = r1[i] + th1 * mid;
                let d_outer = -mid + th1 * d_mid;
                (outer + theta * d_outer) / self.h
            })
            .collect()
    }
}

/// Why the stepper gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepFail {
    /// The error estimate demanded a step below the minimum.
    TooSmall,
    /// A stage could not be evaluated even for the minimum step.
    Unavailable,
}

#[derive(Debug, Clone)]
pub(crate) struct StepperState<T> {
    pub t: T,
    pub y: Vec<T>,
    pub k1: Vec<T>,
    pub h: T,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Step-size controller settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub max_step: T,
    pub min_step: T,
}

impl<T: Scalar> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            max_step: T::infinity(),
            min_step: T::lit(1e-14),
        }
    }

    pub fn with_max_step(mut self, max_step: T) -> Self {
        self.max_step = max_step;
        self
    }

    fn err_norm(&self, y0: &[T], y1: &[T], err: &[T]) -> T {
        let n = y0.len();
        let mut acc = T::zero();
        for i in 0..n {
            let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            acc += e * e;
        }
        (acc / T::from_count(n.max(1))).sqrt()
    }

    /// Initial state with `k1` and a starting step; `None` if `f` fails at `y0`.
    pub(crate) fn start(&self, f: &Rhs<'_, T>, t: T, y0: &[T], hint: Option<T>) -> Option<StepperState<T>> {
        let n = y0.len();
        let mut k1 = vec![T::zero(); n];
        if !f(y0, &mut k1) {
            return None;
        }
        let h = match hint {
            Some(h) if h > T::zero() => h.min(self.max_step),
            _ => self.initial_step(f, y0, &k1),
        };
        Some(StepperState {
            t,
            y: y0.to_vec(),
            k1,
            h,
            accepted: 0,
            rejected: 0,
            evals: 1,
        })
    }

    fn initial_step(&self, f: &Rhs<'_, T>, y0: &[T], f0: &[T]) -> T {
        let n = y0.len();
        let sc: Vec<T> = y0.iter().map(|&y| self.atol + self.rtol * y.abs()).collect();
        let rms = |v: &[T]| -> T {
            (v.iter().zip(&sc).map(|(&a, &s)| (a / s) * (a / s)).sum::<T>() / T::from_count(n)).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let tiny = T::lit(1e-10);
        let mut h0 = if d0 < tiny || d1 < tiny { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
        h0 = h0.min(self.max_step);
        let y1: Vec<T> = y0.iter().zip(f0).map(|(&y, &k)| y + h0 * k).collect();
        let mut f1 = vec![T::zero(); n];
        if !f(&y1, &mut f1) {
            return h0.max(self.min_step);
        }
        let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / dm).powf(T::lit(0.2))
        };
        (T::lit(100.0) * h0).min(h1).min(self.max_step).max(self.min_step)
    }

    /// Takes one accepted step of size at most `t_limit - st.t`.
    pub(crate) fn advance(&self, f: &Rhs<'_, T>, st: &mut StepperState<T>, t_limit: T) -> Result<DenseStep<T>, StepFail> {
        let n = st.y.len();
        let lit = |v: f64| T::lit(v);
        let mut k2 = vec![T::zero(); n];
        let mut k3 = vec![T::zero(); n];
        let mut k4 = vec![T::zero(); n];
        let mut k5 = vec![T::zero(); n];
        let mut k6 = vec![T::zero(); n];
        let mut k7 = vec![T::zero(); n];
        let mut ys = vec![T::zero(); n];
        let mut y1 = vec![T::zero(); n];
        let mut last_rejected = false;
        loop {
            let remaining = t_limit - st.t;
            let mut h = st.h.min(self.max_step);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let y = &st.y;
            let k1 = &st.k1;
            let mut ok = true;
            macro_rules! stage {
                ($out:expr, $($a:expr, $k:expr),+) => {
                    if ok {
                        for i in 0..n {
                            ys[i] = y[i] + h * (T::zero() $(+ lit($a) * $k[i])+);
                        }
                        ok = f(&ys, &mut $out);
                        st.evals += 1;
                    }
                };
            }
            stage!(k2, A21, k1);
            stage!(k3, A31, k1, A32, k2);
            stage!(k4, A41, k1, A42, k2, A43, k3);
            stage!(k5, A51, k1, A52, k2, A53, k3, A54, k4);
            stage!(k6, A61, k1, A62, k2, A63, k3, A64, k4, A65, k5);
            if ok {
                for i in 0..n {
                    y1[i] = y[i] + h * (lit(A71) * k1[i] + lit(A73) * k3[i] + lit(A74) * k4[i] + lit(A75) * k5[i] + lit(A76) * k6[i]);
                }
                ok = y1.iter().all(|v| v.is_finite()) && f(&y1, &mut k7);
                st.evals += 1;
            }
            if !ok {
                st.rejected += 1;
                last_rejected = true;
                st.h = h * lit(0.25);
                if st.h < self.min_step {
                    return Err(StepFail::Unavailable);
                }
                continue;
            }
            let err: Vec<T> = (0..n)
                .map(|i| {
                    h * (lit(E1) * k1[i] + lit(E3) * k3[i] + lit(E4) * k4[i] + lit(E5) * k5[i] + lit(E6) * k6[i] + lit(E7) * k7[i])
                })
                .collect();
            let e = self.err_norm(y, &y1, &err);
            if !e.is_finite() {
                st.rejected += 1;
                last_rejected = true;
                st.h = h * lit(0.25);
                if st.h < self.min_step {
                    return Err(StepFail::TooSmall);
                }
                continue;
            }
            let fac = if e == T::zero() {
                lit(5.0)
            } else {
                (lit(0.9) * e.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
            };
            if e <= T::one() {
                let ydiff: Vec<T> = (0..n).map(|i| y1[i] - y[i]).collect();
                let bspl: Vec<T> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
                let r3: Vec<T> = (0..n).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
                let r4: Vec<T> = (0..n)
                    .map(|i| {
                        h * (lit(D1) * k1[i] + lit(D3) * k3[i] + lit(D4) * k4[i] + lit(D5) * k5[i] + lit(D6) * k6[i] + lit(D7) * k7[i])
                    })
                    .collect();
                let dense = DenseStep {
                    t0: st.t,
                    h,
                    rcont: [y.clone(), ydiff, bspl, r3, r4],
                };
                st.t = if last { t_limit } else { st.t + h };
                st.y.copy_from_slice(&y1);
                st.k1.copy_from_slice(&k7);
                st.accepted += 1;
                let grow = if last_rejected { fac.min(T::one()) } else { fac };
                // keep the controller's step when the step was cut by t_limit
                st.h = if last { st.h.max(h * grow) } else { h * grow };
                return Ok(dense);
            }
            st.rejected += 1;
            last_rejected = true;
            st.h = h * fac.min(T::one());
            if st.h < self.min_step {
                return Err(StepFail::TooSmall);
            }
        }
    }

    /// Integrates a smooth autonomous system over `[t0, t1]`.
    pub fn integrate(&self, f: &Rhs<'_, T>, t0: T, y0: &[T], t1: T) -> Option<Vec<DenseStep<T>>> {
        let mut st = self.start(f, t0, y0, None)?;
        let mut out = Vec::new();
        while st.t < t1 {
            out.push(self.advance(f, &mut st, t1).ok()?);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let solver = Dopri5::new(1e-10, 1e-12);
        let f = |y: &[f64], o: &mut [f64]| {
            o[0] = -y[0];
            true
        };
        let steps = solver.integrate(&f, 0.0, &[1.0], 2.0).unwrap();
        let last = steps.last().unwrap();
        assert!((last.eval(2.0)[0] - (-2.0f64).exp()).abs() < 1e-9);
        // dense output in the interior
        for s in &steps {
            let tm = s.t0 + 0.5 * s.h;
            assert!((s.eval(tm)[0] - (-tm).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_oscillator_dense_derivative() {
        let solver = Dopri5::new(1e-10, 1e-12).with_max_step(0.3);
        let f = |y: &[f64], o: &mut [f64]| {
            o[0] = y[1];
            o[1] = -y[0];
            true
        };
        let steps = solver.integrate(&f, 0.0, &[0.0, 1.0], 6.0).unwrap();
        assert!(steps.iter().all(|s| s.h <= 0.3 + 1e-15));
        for s in &steps {
            let tm = s.t0 + 0.37 * s.h;
            let d = s.eval_derivative(tm);
            assert!((d[0] - tm.cos()).abs() < 1e-6);
            assert!((d[1] + tm.sin()).abs() < 1e-6);
        }
        let end = steps.last().unwrap().eval(6.0);
        assert!((end[0] - 6f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn polynomial_exact_at_nodes() {
        let solver = Dopri5::new(1e-8, 1e-8);
        let f = |_y: &[f64], o: &mut [f64]| {
            o[0] = 2.0;
            true
        };
        let steps = solver.integrate(&f, 1.0, &[0.5], 3.0).unwrap();
        for s in &steps {
            assert!((s.eval(s.t_end())[0] - (0.5 + 2.0 * (s.t_end() - 1.0))).abs() < 1e-13);
        }
    }

    #[test]
    fn unavailable_region_stops() {
        let solver = Dopri5::new(1e-8, 1e-8);
        let f = |y: &[f64], o: &mut [f64]| {
            o[0] = 1.0;
            y[0] < 1.0
        };
        assert!(solver.integrate(&f, 0.0, &[0.0], 5.0).is_none());
    }
}
