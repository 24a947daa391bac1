//! Boundary value problems for geodesics by shooting over a grid of initial
//! directions, followed by Levenberg–Marquardt refinement of the direction
//! and the arrival parameter.

use rayon::prelude::*;
use serde_json::json;

use crate::filippov::Termination;
use crate::geodesic::{shoot_geodesic, GeodesicRecord, Normalization, ShootOptions};
use crate::linalg::SquareMatrix;
use crate::metric::{PiecewiseMetric, Signature};
use crate::scalar::{dist, norm, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct BvpOptions<T> {
    pub shoot: ShootOptions<T>,
    /// Minimum Euclidean distance between kept initial velocities.
    pub dedup_radius: T,
    /// Half-width of the spatial-velocity box scanned for Lorentzian metrics.
    pub lorentz_box: T,
    pub max_refine: usize,
    pub fd_step: T,
    /// Samples per trajectory when locating the closest approach to `q`.
    pub scan_samples: usize,
    /// Besides local minima of the scanned miss, this fraction of the grid
    /// with the smallest miss is refined.
    pub refine_fraction: T,
}

impl<T: Scalar> Default for BvpOptions<T> {
    fn default() -> Self {
        Self {
            shoot: ShootOptions::default(),
            dedup_radius: T::lit(1e-3),
            lorentz_box: T::lit(2.0),
            max_refine: 40,
            fd_step: T::lit(1e-7),
            scan_samples: 400,
            refine_fraction: T::lit(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution<T> {
    /// Unit initial velocity (`|g(v, v)| = 1`).
    pub initial_velocity: Vec<T>,
    pub record: GeodesicRecord<T>,
    /// Euclidean distance from the endpoint to `q`.
    pub miss: T,
    /// Arclength (Riemannian) or proper time (Lorentzian) to the endpoint.
    pub length: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolutionSet<T> {
    pub solutions: Vec<BvpSolution<T>>,
    pub dedup_radius: T,
}

impl<T: Scalar> BvpSolutionSet<T> {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Solution whose initial velocity is closest to `v`.
    pub fn nearest(&self, v: &[T]) -> Option<&BvpSolution<T>> {
        self.solutions.iter().min_by(|a, b| {
            dist(&a.initial_velocity, v)
                .partial_cmp(&dist(&b.initial_velocity, v))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "dedup_radius": self.dedup_radius.as_f64(),
            "solutions": self.solutions.iter().map(|s| json!({
                "direction": s.initial_velocity.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                "length": s.length.as_f64(),
                "miss": s.miss.as_f64(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Maps direction parameters to a unit initial velocity at `p`.
struct Directions<'m, T: Scalar> {
    m: &'m PiecewiseMetric<T>,
    p: Vec<T>,
}

impl<T: Scalar> Directions<'_, T> {
    fn velocity(&self, z: &[T]) -> Option<Vec<T>> {
        let n = self.m.dim();
        let g = self.m.g_at(&self.p);
        match self.m.signature() {
            Signature::Riemannian => {
                // hyperspherical coordinates
                let mut u = vec![T::zero(); n];
                let mut prod = T::one();
                for i in 0..n - 1 {
                    u[i] = prod * z[i].cos();
                    prod *= z[i].sin();
                }
                u[n - 1] = prod;
                let g2 = g.quad(&u);
                (g2 > T::zero()).then(|| u.iter().map(|&c| c / g2.sqrt()).collect())
            }
            Signature::Lorentzian => {
                let t = self.m.time_orientation()?;
                let k0 = (0..n)
                    .max_by(|&a, &b| t[a].abs().partial_cmp(&t[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap_or(0);
                let mut v = vec![T::zero(); n];
                let mut it = z.iter();
                for (i, vi) in v.iter_mut().enumerate() {
                    if i != k0 {
                        *vi = *it.next()?;
                    }
                }
                // g(v, v) = −1 as a quadratic in v[k0]
                let a = g[(k0, k0)];
                let mut b = T::zero();
                for i in 0..n {
                    if i != k0 {
                        b += T::lit(2.0) * g[(k0, i)] * v[i];
                    }
                }
                let c = g.quad(&v) + T::one();
                let disc = b * b - T::lit(4.0) * a * c;
                if !(disc >= T::zero()) || a == T::zero() {
                    return None;
                }
                let two_a = T::lit(2.0) * a;
                for root in [(-b + disc.sqrt()) / two_a, (-b - disc.sqrt()) / two_a] {
                    let mut cand = v.clone();
                    cand[k0] = root;
                    if g.bilinear(&cand, t) < T::zero() {
                        return Some(cand);
                    }
                }
                None
            }
        }
    }

    /// Per-axis grid values and whether the axis is periodic. The Lorentzian
    /// box has an odd count so that zero spatial components are on the grid.
    fn axes(&self, m_grid: usize, lorentz_box: T) -> Vec<(Vec<T>, bool)> {
        let n = self.m.dim();
        match self.m.signature() {
            Signature::Riemannian => {
                let full: Vec<T> = (0..m_grid)
                    .map(|j| T::lit(2.0) * T::PI() * T::from_count(j) / T::from_count(m_grid))
                    .collect();
                let half_count = (m_grid / 2).max(1);
                let half: Vec<T> = (0..half_count)
                    .map(|j| T::PI() * (T::from_count(j) + T::lit(0.5)) / T::from_count(half_count))
                    .collect();
                (0..n - 1)
                    .map(|i| if i + 2 == n { (full.clone(), true) } else { (half.clone(), false) })
                    .collect()
            }
            Signature::Lorentzian => {
                let count = 2 * (m_grid / 2) + 1;
                let pts: Vec<T> = (0..count)
                    .map(|j| -lorentz_box + T::lit(2.0) * lorentz_box * T::from_count(j) / T::from_count(count - 1))
                    .collect();
                vec![(pts, false); n - 1]
            }
        }
    }
}

/// Cartesian product of the axes in row-major order.
fn product<T: Scalar>(axes: &[(Vec<T>, bool)]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for (axis, _) in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Grid points whose value is not larger than at any neighbour
/// (including diagonals).
fn local_minima<T: Scalar>(values: &[T], axes: &[(Vec<T>, bool)]) -> Vec<bool> {
    let dims: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
    let d = dims.len();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect::<Vec<i64>>()
        })
        .filter(|o| o.iter().any(|&v| v != 0))
        .collect();
    (0..values.len())
        .map(|flat| {
            let mut idx = vec![0usize; d];
            let mut rem = flat;
            for k in (0..d).rev() {
                idx[k] = rem % dims[k];
                rem /= dims[k];
            }
            offsets.iter().all(|o| {
                let mut nb = 0usize;
                for k in 0..d {
                    let mut j = idx[k] as i64 + o[k];
                    let len = dims[k] as i64;
                    if axes[k].1 {
                        j = j.rem_euclid(len);
                    } else if j < 0 || j >= len {
                        return true;
                    }
                    nb = nb * dims[k] + j as usize;
                }
                !(values[nb] < values[flat])
            })
        })
        .collect()
}

struct Problem<'a, T: Scalar> {
    dirs: Directions<'a, T>,
    q: Vec<T>,
    total_s: T,
    opts: &'a BvpOptions<T>,
}

impl<T: Scalar> Problem<'_, T> {
    fn shoot(&self, z: &[T], s: T) -> Option<GeodesicRecord<T>> {
        let v = self.dirs.velocity(z)?;
        let mut so = self.opts.shoot.clone();
        so.normalization = Normalization::Affine;
        let rec = shoot_geodesic(self.dirs.m, &self.dirs.p, &v, (T::zero(), s), &so).ok()?;
        (rec.trajectory.termination == Termination::Completed).then_some(rec)
    }

    /// End position and velocity after parameter `s`.
    fn endpoint(&self, z: &[T], s: T) -> Option<(Vec<T>, Vec<T>)> {
        let rec = self.shoot(z, s)?;
        let st = rec.final_state();
        Some((st.x, st.v))
    }

    /// Parameter of closest approach to `q` along the full-span shot.
    fn closest_approach(&self, z: &[T]) -> Option<(T, T)> {
        let v = self.dirs.velocity(z)?;
        let mut so = self.opts.shoot.clone();
        so.normalization = Normalization::Affine;
        so.norm_samples = 2;
        let rec = shoot_geodesic(self.dirs.m, &self.dirs.p, &v, (T::zero(), self.total_s), &so).ok()?;
        let s_end = rec.trajectory.t_final;
        let n = self.dirs.m.dim();
        let miss = |s: T| -> T {
            rec.trajectory
                .eval(s)
                .map_or(T::infinity(), |st| dist(&st[..n], &self.q))
        };
        let k_max = self.opts.scan_samples.max(4);
        let ds = s_end / T::from_count(k_max);
        let (mut best_k, mut best) = (1, T::infinity());
        for k in 1..=k_max {
            let d = miss(ds * T::from_count(k));
            if d < best {
                best = d;
                best_k = k;
            }
        }
        // golden section on the bracketing samples
        let (mut lo, mut hi) = (ds * T::from_count(best_k - 1), (ds * T::from_count(best_k + 1)).min(s_end));
        let r = T::lit(0.618_033_988_749_894_8);
        let mut a = hi - r * (hi - lo);
        let mut b = lo + r * (hi - lo);
        let (mut fa, mut fb) = (miss(a), miss(b));
        for _ in 0..80 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - r * (hi - lo);
                fa = miss(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + r * (hi - lo);
                fb = miss(b);
            }
        }
        let s = T::lit(0.5) * (lo + hi);
        let d = miss(s);
        if d < best {
            Some((s, d))
        } else {
            Some((ds * T::from_count(best_k), best))
        }
    }

    /// Levenberg–Marquardt on `x(s; z) − q` in the unknowns `(z, s)`.
    fn refine(&self, z0: &[T], s0: T) -> Option<(Vec<T>, T, T)> {
        let n = self.dirs.m.dim();
        let k = n; // (n − 1) direction parameters plus s
        let mut z = z0.to_vec();
        let mut s = s0;
        let (x, mut v) = self.endpoint(&z, s)?;
        let mut r: Vec<T> = x.iter().zip(&self.q).map(|(&a, &b)| a - b).collect();
        let mut cost = norm(&r);
        let mut mu = T::lit(1e-3);
        let target = T::lit(1e-13).max(T::epsilon() * T::lit(64.0));
        for _ in 0..self.opts.max_refine {
            if cost <= target {
                break;
            }
            // Jacobian columns
            let mut jac = vec![vec![T::zero(); k]; n];
            for c in 0..n - 1 {
                let h = self.opts.fd_step * (T::one() + z[c].abs());
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += h;
                zm[c] -= h;
                let (xp, _) = self.endpoint(&zp, s)?;
                let (xm, _) = self.endpoint(&zm, s)?;
                for i in 0..n {
                    jac[i][c] = (xp[i] - xm[i]) / (h + h);
                }
            }
            for i in 0..n {
                jac[i][n - 1] = v[i];
            }
            let mut jtj = SquareMatrix::zeros(k);
            let mut jtr = vec![T::zero(); k];
            for a in 0..k {
                for b in 0..k {
                    jtj[(a, b)] = (0..n).map(|i| jac[i][a] * jac[i][b]).sum();
                }
                jtr[a] = (0..n).map(|i| jac[i][a] * r[i]).sum();
            }
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for d in 0..k {
                    a[(d, d)] = jtj[(d, d)] * (T::one() + mu) + T::lit(1e-14);
                }
                let Some(inv) = a.inverse(T::lit(1e-14)) else {
                    mu *= T::lit(10.0);
                    continue;
                };
                let step: Vec<T> = inv.mul_vec(&jtr).into_iter().map(|c| -c).collect();
                let zt: Vec<T> = z.iter().zip(&step).map(|(&a, &b)| a + b).collect();
                let st = s + step[n - 1];
                if st > T::zero() && st <= self.total_s {
                    if let Some((xt, vt)) = self.endpoint(&zt, st) {
                        let rt: Vec<T> = xt.iter().zip(&self.q).map(|(&a, &b)| a - b).collect();
                        let ct = norm(&rt);
                        if ct < cost {
                            z = zt;
                            s = st;
                            v = vt;
                            r = rt;
                            cost = ct;
                            mu = (mu / T::lit(3.0)).max(T::lit(1e-12));
                            improved = true;
                            break;
                        }
                    }
                }
                mu *= T::lit(4.0);
            }
            if !improved {
                break;
            }
        }
        Some((z, s, cost))
    }
}

/// Shooting with default options and `dedup_radius = 1e−3`.
pub fn geodesic_bvp_shooting<T: Scalar>(
    m: &PiecewiseMetric<T>,
    p: &[T],
    q: &[T],
    total_s: T,
    angle_grid: usize,
    bvp_tol: T,
) -> BvpSolutionSet<T> {
    geodesic_bvp_shooting_with(m, p, q, total_s, angle_grid, bvp_tol, &BvpOptions::default())
}

/// Scans unit geodesics from `p` over `angle_grid` directions per angular
/// axis (Riemannian) or a box of `angle_grid` spatial velocities per axis
/// (Lorentzian, timelike only), each integrated up to `total_s`. Directions
/// whose closest approach to `q` is already within `bvp_tol` are kept as
/// they are; the rest are refined. Solutions are deduplicated in grid order.
pub fn geodesic_bvp_shooting_with<T: Scalar>(
    m: &PiecewiseMetric<T>,
    p: &[T],
    q: &[T],
    total_s: T,
    angle_grid: usize,
    bvp_tol: T,
    opts: &BvpOptions<T>,
) -> BvpSolutionSet<T> {
    let empty = BvpSolutionSet {
        solutions: Vec::new(),
        dedup_radius: opts.dedup_radius,
    };
    if p.len() != m.dim() || q.len() != m.dim() || m.dim() < 2 || !(total_s > T::zero()) || !m.in_domain(p) {
        return empty;
    }
    let problem = Problem {
        dirs: Directions { m, p: p.to_vec() },
        q: q.to_vec(),
        total_s,
        opts,
    };
    let axes = problem.dirs.axes(angle_grid.max(1), opts.lorentz_box);
    let grid = product(&axes);
    let scans: Vec<Option<(T, T)>> = grid.par_iter().map(|z| problem.closest_approach(z)).collect();
    let misses: Vec<T> = scans.iter().map(|c| c.map_or(T::infinity(), |(_, d)| d)).collect();
    let mut promising = local_minima(&misses, &axes);
    let mut order: Vec<usize> = (0..misses.len()).filter(|&i| misses[i].is_finite()).collect();
    order.sort_by(|&a, &b| misses[a].partial_cmp(&misses[b]).unwrap_or(std::cmp::Ordering::Equal));
    let take = (opts.refine_fraction * T::from_count(grid.len())).ceil().to_usize().unwrap_or(0);
    order.into_iter().take(take).for_each(|i| promising[i] = true);
    let candidates: Vec<Option<(Vec<T>, T, T)>> = grid
        .par_iter()
        .zip(&scans)
        .zip(&promising)
        .map(|((z, scan), &promising)| {
            let (s, d) = (*scan)?;
            if d <= bvp_tol {
                return Some((z.clone(), s, d));
            }
            if !promising {
                return None;
            }
            let (zr, sr, miss) = problem.refine(z, s)?;
            (miss <= bvp_tol).then_some((zr, sr, miss))
        })
        .collect();
    let mut kept: Vec<(Vec<T>, Vec<T>, T, T)> = Vec::new();
    for (z, s, miss) in candidates.into_iter().flatten() {
        let Some(v) = problem.dirs.velocity(&z) else {
            continue;
        };
        if kept.iter().all(|(kv, ..)| dist(kv, &v) >= opts.dedup_radius) {
            kept.push((v, z, s, miss));
        }
    }
    let solutions = kept
        .into_iter()
        .filter_map(|(v, z, s, miss)| {
            let record = problem.shoot(&z, s)?;
            Some(BvpSolution {
                initial_velocity: v,
                record,
                miss,
                length: s,
            })
        })
        .collect();
    BvpSolutionSet {
        solutions,
        dedup_radius: opts.dedup_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{hw_geodesic_family, CausalCharacter};
    use crate::metric::{euclidean, hw_lorentzian, hw_riemannian, minkowski};

    #[test]
    fn flat_has_one_solution() {
        let m = euclidean::<f64>(2);
        let set = geodesic_bvp_shooting(&m, &[0.0, 0.0], &[1.0, 1.0], 3.0, 32, 1e-9);
        assert_eq!(set.len(), 1);
        let s = &set.solutions[0];
        let u = 0.5f64.sqrt();
        assert!((s.initial_velocity[0] - u).abs() < 1e-9 && (s.initial_velocity[1] - u).abs() < 1e-9);
        assert!((s.length - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn minkowski_has_one_timelike_solution() {
        let m = minkowski::<f64>(2);
        let set = geodesic_bvp_shooting(&m, &[0.0, 0.0], &[2.0, 1.0], 4.0, 16, 1e-9);
        assert_eq!(set.len(), 1);
        assert!((set.solutions[0].length - 3f64.sqrt()).abs() < 1e-9);
        assert_eq!(set.solutions[0].record.causal_character, CausalCharacter::Timelike);
    }

    #[test]
    fn velocity_parametrizations_are_unit() {
        let m = hw_lorentzian(1.5f64).unwrap();
        let d = Directions { m: &m, p: vec![0.0, 0.3, 0.0] };
        let v = d.velocity(&[0.4, -0.7]).unwrap();
        assert!((m.norm2(&[0.0, 0.3, 0.0], &v) + 1.0).abs() < 1e-14);
        assert!(v[0] > 0.0);
        let e = euclidean::<f64>(3);
        let d = Directions { m: &e, p: vec![0.0; 3] };
        let v = d.velocity(&[0.3, 1.1]).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        assert_eq!(product(&d.axes(8, 1.0)).len(), 32);
    }

    fn hw_directions(eps: f64) -> [[f64; 2]; 3] {
        let (a, b) = (eps.sqrt(), (1.0 - eps).sqrt());
        [[a, b], [-a, b], [0.0, 1.0]]
    }

    #[test]
    fn grid_minima() {
        let axes = vec![(vec![0.0f64, 1.0, 2.0, 3.0], true)];
        assert_eq!(local_minima(&[1.0, 2.0, 0.5, 3.0], &axes), vec![true, false, true, false]);
        let axes = vec![(vec![0.0f64, 1.0, 2.0], false), (vec![0.0, 1.0], false)];
        let v = [3.0, 2.0, 1.0, 4.0, 5.0, 0.0];
        assert_eq!(local_minima(&v, &axes), vec![false, false, false, false, false, true]);
    }

    #[test]
    fn hw_three_geodesics() {
        let fam = hw_geodesic_family(1.5f64, 0.25).unwrap();
        let m = hw_riemannian(1.5).unwrap();
        let q = [0.0, 2.0 * fam.y1];
        for grid in [32, 64] {
            let set = geodesic_bvp_shooting(&m, &[0.0, 0.0], &q, 2.5 * fam.y1, grid, 1e-8);
            assert!(set.len() >= 3, "grid {grid}: {}", set.len());
            for (i, dir) in hw_directions(0.25).iter().enumerate() {
                let s = set.nearest(dir).unwrap();
                assert!(dist(&s.initial_velocity, dir) < 1e-4, "grid {grid} dir {i}");
                let expect = if i == 2 { 2.0 * fam.y1 } else { 2.0 * fam.s0 };
                assert!((s.length - expect).abs() < 1e-6);
            }
            for a in &set.solutions {
                for b in &set.solutions {
                    if !std::ptr::eq(a, b) {
                        assert!(dist(&a.initial_velocity, &b.initial_velocity) >= 1e-3);
                    }
                }
            }
        }
    }

    #[test]
    fn hw_lorentzian_three_geodesics() {
        let fam = hw_geodesic_family(1.5f64, 0.25).unwrap();
        let m = hw_lorentzian(1.5).unwrap();
        let q = [2.0 * 2f64.sqrt() * fam.s0, 0.0, 2.0 * fam.y1];
        let set = geodesic_bvp_shooting(&m, &[0.0, 0.0, 0.0], &q, 3.0 * fam.s0, 16, 1e-8);
        assert!(set.len() >= 3, "{}", set.len());
        let l0 = (8.0 * fam.s0 * fam.s0 - 4.0 * fam.y1 * fam.y1).sqrt();
        let r2 = 2f64.sqrt();
        let targets = [
            ([r2, 0.5, 0.75f64.sqrt()], 2.0 * fam.s0),
            ([r2, -0.5, 0.75f64.sqrt()], 2.0 * fam.s0),
            ([2.0 * r2 * fam.s0 / l0, 0.0, 2.0 * fam.y1 / l0], l0),
        ];
        for (v, len) in targets {
            let s = set.nearest(&v).unwrap();
            assert!(dist(&s.initial_velocity, &v) < 1e-4);
            assert!((s.length - len).abs() < 1e-6);
            assert_eq!(s.record.causal_character, CausalCharacter::Timelike);
        }
    }

    #[test]
    fn unreachable_target_gives_empty_set() {
        let m = hw_riemannian(1.5f64).unwrap();
        let set = geodesic_bvp_shooting(&m, &[0.0, 0.0], &[0.0, 50.0], 2.0, 16, 1e-8);
        assert!(set.is_empty());
        assert_eq!(set.to_json()["solutions"].as_array().unwrap().len(), 0);
    }
}
