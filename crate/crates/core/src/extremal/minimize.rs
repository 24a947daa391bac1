//! Minimizers of the discrete energy `E = N Σ g_mid(Δ_k, Δ_k)` with fixed
//! endpoints, by preconditioned Polak–Ribière conjugate gradients.

use rayon::prelude::*;

use super::{curve_length, ExtremalError, Polyline};
use crate::metric::{PiecewiseMetric, Signature};
use crate::scalar::{dot, norm, Scalar};

/// Initial polyline for the descent.
#[derive(Debug, Clone, PartialEq)]
pub enum Seed<T> {
    Straight,
    /// Circular arc through the endpoints bulging by `sagitta` along
    /// `normal` (default: the chord rotated by +90° in the first two axes).
    Arc { sagitta: T, normal: Option<Vec<T>> },
    /// Explicit nodes; must have `N + 1` entries matching the endpoints.
    Nodes(Vec<Vec<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions<T> {
    pub max_iters: usize,
    /// Bound on `N · max |∂E/∂x|`, a discrete Euler–Lagrange residual.
    pub grad_tol: T,
    pub seeds: Vec<Seed<T>>,
}

impl<T: Scalar> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: T::lit(1e-8),
            seeds: vec![Seed::Straight],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer<T> {
    pub polyline: Polyline<T>,
    pub length: T,
    pub energy: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub seed_index: usize,
}

/// Energy and, if requested, its gradient at every node (endpoint rows
/// included but ignored by the descent). `None` when a midpoint leaves
/// the domain or a value is not finite.
pub(crate) fn energy<T: Scalar>(m: &PiecewiseMetric<T>, nodes: &[Vec<T>], mut grad: Option<&mut [Vec<T>]>) -> Option<T> {
    let n_seg = nodes.len() - 1;
    let scale = T::from_count(n_seg);
    let dim = m.dim();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v = T::zero()));
    }
    let mut e = T::zero();
    for k in 0..n_seg {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        let mid: Vec<T> = a.iter().zip(b).map(|(&x, &y)| half * (x + y)).collect();
        if !m.in_domain(&mid) {
            return None;
        }
        let d: Vec<T> = b.iter().zip(a).map(|(&x, &y)| x - y).collect();
        let (g, dg) = m.sample(&mid, m.side_at(&mid, None));
        e += g.quad(&d);
        if let Some(grad) = grad.as_deref_mut() {
            let gd = g.mul_vec(&d);
            for j in 0..dim {
                let dmid = half * dg[j].quad(&d);
                grad[k + 1][j] += scale * (two * gd[j] + dmid);
                grad[k][j] += scale * (dmid - two * gd[j]);
            }
        }
    }
    let e = e * scale;
    e.is_finite().then_some(e)
}

/// `N · max |∂E/∂x_j|` over interior nodes.
fn residual<T: Scalar>(grad: &[Vec<T>]) -> T {
    let n = T::from_count(grad.len() - 1);
    grad[1..grad.len() - 1]
        .iter()
        .flatten()
        .fold(T::zero(), |m, &v| m.max(v.abs()))
        * n
}

/// Solves `(2N) tridiag(−1, 2, −1) z = r` on interior nodes, coordinatewise.
fn precondition<T: Scalar>(r: &[Vec<T>]) -> Vec<Vec<T>> {
    let n_int = r.len() - 2;
    let dim = r[0].len();
    let scale = T::lit(2.0) * T::from_count(r.len() - 1);
    let mut z = vec![vec![T::zero(); dim]; r.len()];
    if n_int == 0 {
        return z;
    }
    let two = T::lit(2.0);
    let mut c = vec![T::zero(); n_int];
    let mut w = vec![T::zero(); n_int];
    for j in 0..dim {
        // Thomas algorithm with sub/super-diagonal −1
        let mut denom = two;
        c[0] = -T::one() / denom;
        w[0] = r[1][j] / scale / denom;
        for i in 1..n_int {
            denom = two + c[i - 1];
            c[i] = -T::one() / denom;
            w[i] = (r[i + 1][j] / scale + w[i - 1]) / denom;
        }
        z[n_int][j] = w[n_int - 1];
        for i in (0..n_int - 1).rev() {
            z[i + 1][j] = w[i] - c[i] * z[i + 2][j];
        }
    }
    z
}

fn flat_dot<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    a[1..a.len() - 1].iter().zip(&b[1..b.len() - 1]).map(|(x, y)| dot(x, y)).sum()
}

fn axpy<T: Scalar>(x: &[Vec<T>], alpha: T, d: &[Vec<T>]) -> Vec<Vec<T>> {
    let last = x.len() - 1;
    x.iter()
        .zip(d)
        .enumerate()
        .map(|(k, (xi, di))| {
            if k == 0 || k == last {
                xi.clone()
            } else {
                xi.iter().zip(di).map(|(&a, &b)| a + alpha * b).collect()
            }
        })
        .collect()
}

fn descend<T: Scalar>(
    m: &PiecewiseMetric<T>,
    seed: Polyline<T>,
    opts: &MinimizeOptions<T>,
    seed_index: usize,
) -> Result<Minimizer<T>, ExtremalError> {
    let mut x = seed.nodes;
    let mut grad = vec![vec![T::zero(); m.dim()]; x.len()];
    let mut e = energy(m, &x, Some(&mut grad)).ok_or(ExtremalError::InvalidInput("seed leaves the metric domain"))?;
    let mut z = precondition(&grad);
    let mut d: Vec<Vec<T>> = z.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
    let mut gz = flat_dot(&grad, &z);
    let mut res = residual(&grad);
    let armijo = T::lit(1e-4);
    let wolfe = T::lit(0.4);
    let mut iterations = 0;
    let mut new_grad = grad.clone();
    while res > opts.grad_tol && iterations < opts.max_iters {
        iterations += 1;
        let mut slope = flat_dot(&grad, &d);
        if !(slope < T::zero()) {
            d = z.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
            slope = -gz;
        }
        // strong Wolfe by bisection; the energy test is relaxed to roundoff
        // level once the slope is too small for it to resolve a decrease
        let mut alpha = T::one();
        let (mut lo, mut hi) = (T::zero(), T::infinity());
        let mut accepted = None;
        let e_noise = T::lit(1e-12) * e.abs();
        for _ in 0..60 {
            let trial = axpy(&x, alpha, &d);
            let Some(et) = energy(m, &trial, Some(&mut new_grad)) else {
                hi = alpha;
                alpha = T::lit(0.5) * (lo + hi);
                continue;
            };
            let dphi = flat_dot(&new_grad, &d);
            let decrease = et <= e + armijo * alpha * slope || (et <= e + e_noise && dphi <= -slope);
            if decrease && dphi.abs() <= wolfe * slope.abs() {
                accepted = Some((trial, et));
                break;
            }
            if !decrease || dphi > T::zero() {
                hi = alpha;
            } else {
                lo = alpha;
            }
            alpha = if hi.is_finite() { T::lit(0.5) * (lo + hi) } else { T::lit(2.0) * alpha };
        }
        let Some((trial, et)) = accepted else {
            break;
        };
        x = trial;
        e = et;
        let new_z = precondition(&new_grad);
        let new_gz = flat_dot(&new_grad, &new_z);
        let beta = ((new_gz - flat_dot(&grad, &new_z)) / gz).max(T::zero());
        d = new_z
            .iter()
            .zip(&d)
            .map(|(zr, dr)| zr.iter().zip(dr).map(|(&a, &b)| beta * b - a).collect())
            .collect();
        std::mem::swap(&mut grad, &mut new_grad);
        z = new_z;
        gz = new_gz;
        res = residual(&grad);
    }
    if !(res <= opts.grad_tol) {
        return Err(ExtremalError::NoConvergence {
            iterations,
            grad_norm: res.as_f64(),
        });
    }
    let polyline = Polyline::new(x);
    Ok(Minimizer {
        length: curve_length(m, &polyline)?,
        polyline,
        energy: e,
        grad_norm: res,
        iterations,
        seed_index,
    })
}

fn arc_seed<T: Scalar>(p: &[T], q: &[T], n: usize, sagitta: T, normal: Option<&[T]>) -> Result<Polyline<T>, ExtremalError> {
    let chord: Vec<T> = q.iter().zip(p).map(|(&a, &b)| a - b).collect();
    let d = norm(&chord);
    let e: Vec<T> = chord.iter().map(|&c| c / d).collect();
    let raw: Vec<T> = match normal {
        Some(v) => v.to_vec(),
        None if p.len() >= 2 => {
            let mut v = vec![T::zero(); p.len()];
            v[0] = -e[1];
            v[1] = e[0];
            if norm(&v) < T::lit(1e-3) {
                v = vec![T::zero(); p.len()];
                let k = (0..p.len())
                    .min_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap_or(0);
                v[k] = T::one();
            }
            v
        }
        None => return Err(ExtremalError::InvalidInput("an arc seed needs at least two dimensions")),
    };
    let proj = dot(&raw, &e);
    let mut nrm: Vec<T> = raw.iter().zip(&e).map(|(&r, &ei)| r - proj * ei).collect();
    let len = norm(&nrm);
    if !(len > T::lit(1e-12)) {
        return Err(ExtremalError::InvalidInput("arc normal is parallel to the chord"));
    }
    let sign = if sagitta < T::zero() { -T::one() } else { T::one() };
    nrm.iter_mut().for_each(|v| *v = sign * *v / len);
    let b = sagitta.abs();
    let half = T::lit(0.5);
    let radius = (d * d / T::lit(4.0) + b * b) / (T::lit(2.0) * b);
    let theta = (half * d).atan2(radius - b);
    let mid: Vec<T> = p.iter().zip(q).map(|(&a, &c)| half * (a + c)).collect();
    let nodes = (0..=n)
        .map(|k| {
            if k == 0 {
                return p.to_vec();
            }
            if k == n {
                return q.to_vec();
            }
            let phi = -theta + T::lit(2.0) * theta * T::from_count(k) / T::from_count(n);
            (0..p.len())
                .map(|i| mid[i] + (b - radius) * nrm[i] + radius * (phi.sin() * e[i] + phi.cos() * nrm[i]))
                .collect()
        })
        .collect();
    Ok(Polyline::new(nodes))
}

pub(crate) fn build_seed<T: Scalar>(p: &[T], q: &[T], n: usize, seed: &Seed<T>) -> Result<Polyline<T>, ExtremalError> {
    match seed {
        Seed::Straight => Ok(Polyline::straight(p, q, n)),
        Seed::Arc { sagitta, .. } if *sagitta == T::zero() => Ok(Polyline::straight(p, q, n)),
        Seed::Arc { sagitta, normal } => arc_seed(p, q, n, *sagitta, normal.as_deref()),
        Seed::Nodes(nodes) => {
            if nodes.len() != n + 1 || nodes[0].as_slice() != p || nodes[n].as_slice() != q {
                return Err(ExtremalError::InvalidInput("seed nodes must have N + 1 entries and the BVP endpoints"));
            }
            Ok(Polyline::new(nodes.clone()))
        }
    }
}

fn check_input<T: Scalar>(m: &PiecewiseMetric<T>, p: &[T], q: &[T], n: usize) -> Result<(), ExtremalError> {
    if m.signature() != Signature::Riemannian {
        return Err(ExtremalError::InvalidInput("energy descent needs a Riemannian metric"));
    }
    if p.len() != m.dim() || q.len() != m.dim() {
        return Err(ExtremalError::InvalidInput("endpoint dimension does not match the metric"));
    }
    if n < 2 {
        return Err(ExtremalError::InvalidInput("need at least two segments"));
    }
    if !m.in_domain(p) || !m.in_domain(q) {
        return Err(ExtremalError::InvalidInput("endpoints outside the metric domain"));
    }
    Ok(())
}

/// Runs the descent from every seed in `opts.seeds` (in parallel) and
/// returns the per-seed outcomes in seed order.
pub fn minimize_bvp_all<T: Scalar>(
    m: &PiecewiseMetric<T>,
    p: &[T],
    q: &[T],
    n: usize,
    opts: &MinimizeOptions<T>,
) -> Result<Vec<Result<Minimizer<T>, ExtremalError>>, ExtremalError> {
    check_input(m, p, q, n)?;
    if p == q {
        let polyline = Polyline::new(vec![p.to_vec(); n + 1]);
        return Ok(vec![Ok(Minimizer {
            polyline,
            length: T::zero(),
            energy: T::zero(),
            grad_norm: T::zero(),
            iterations: 0,
            seed_index: 0,
        })]);
    }
    let seeds = opts
        .seeds
        .iter()
        .map(|s| build_seed(p, q, n, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(seeds
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| descend(m, s, opts, i))
        .collect())
}

/// Shortest converged local minimizer over all seeds.
pub fn minimize_bvp<T: Scalar>(
    m: &PiecewiseMetric<T>,
    p: &[T],
    q: &[T],
    n: usize,
    opts: &MinimizeOptions<T>,
) -> Result<Minimizer<T>, ExtremalError> {
    let mut best: Option<Minimizer<T>> = None;
    let mut last_err = None;
    for r in minimize_bvp_all(m, p, q, n, opts)? {
        match r {
            Ok(mz) => {
                if best.as_ref().is_none_or(|b| mz.length < b.length) {
                    best = Some(mz);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(ExtremalError::InvalidInput("no seeds given")))
}
