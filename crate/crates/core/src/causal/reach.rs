//! Causal and timelike reachability on a uniform 2-d grid.
//!
//! Vertex `p` links to `p + h (i, j)` for primitive `(i, j)` with
//! `|i|, |j| ≤ R` when the chord `Δ` is future-directed (`g(Δ, T) < 0`) and
//! `g(Δ, Δ) ≤ σ` (causal) or `≤ −σ` (timelike), where `g` is taken at the
//! chord midpoint and `σ = K h²`. Verdicts are resolution dependent and
//! carry `h` and `K`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::CausalError;
use crate::metric::{PiecewiseMetric, Signature};
use crate::scalar::Scalar;

/// Stencil radius.
pub const STENCIL_RADIUS: i64 = 4;
/// Slack constant `K` in `σ = K h²`.
pub const SLACK_K: f64 = 0.05;
/// Fewer admissible causal directions than this at some vertex is an error.
pub const MIN_DIRECTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReachMode {
    Causal,
    Timelike,
}

impl std::fmt::Display for ReachMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReachMode::Causal => "causal",
            ReachMode::Timelike => "timelike",
        })
    }
}

/// Vertices `lo + h (i, j)`, `0 ≤ i < nx`, `0 ≤ j < ny`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub lo: [T; 2],
    pub h: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Scalar> GridSpec<T> {
    /// Smallest grid with spacing `h` that has `anchor` as a vertex and
    /// covers `[lo, hi]`.
    pub fn covering(anchor: [T; 2], lo: [T; 2], hi: [T; 2], h: T) -> Self {
        let below = |a: T, l: T| ((a - l) / h).max(T::zero()).ceil();
        let above = |a: T, u: T| ((u - a) / h).max(T::zero()).ceil();
        let (bx, by) = (below(anchor[0], lo[0]), below(anchor[1], lo[1]));
        let (ax, ay) = (above(anchor[0], hi[0]), above(anchor[1], hi[1]));
        Self {
            lo: [anchor[0] - bx * h, anchor[1] - by * h],
            h,
            nx: (bx + ax).to_usize().unwrap_or(0) + 1,
            ny: (by + ay).to_usize().unwrap_or(0) + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.ny, idx % self.ny)
    }

    pub fn point(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.coords(idx);
        [
            self.lo[0] + self.h * T::from_count(i),
            self.lo[1] + self.h * T::from_count(j),
        ]
    }

    /// Nearest vertex to `x`, if inside the grid.
    pub fn nearest(&self, x: &[T]) -> Option<usize> {
        let fi = ((x[0] - self.lo[0]) / self.h).round();
        let fj = ((x[1] - self.lo[1]) / self.h).round();
        if fi < T::zero() || fj < T::zero() {
            return None;
        }
        let (i, j) = (fi.to_usize()?, fj.to_usize()?);
        (i < self.nx && j < self.ny).then(|| self.index(i, j))
    }

    fn offset(&self, idx: usize, d: (i64, i64)) -> Option<usize> {
        let (i, j) = self.coords(idx);
        let ni = i as i64 + d.0;
        let nj = j as i64 + d.1;
        (ni >= 0 && nj >= 0 && (ni as usize) < self.nx && (nj as usize) < self.ny)
            .then(|| self.index(ni as usize, nj as usize))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive stencil directions.
pub fn stencil() -> Vec<(i64, i64)> {
    let r = STENCIL_RADIUS;
    let mut out = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            if (i, j) != (0, 0) && gcd(i, j) == 1 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Chord classification shared by the reachability search and the
/// longest-path seed: `(g(Δ, Δ), g(Δ, T))` at the midpoint.
pub(crate) fn chord<T: Scalar>(m: &PiecewiseMetric<T>, a: &[T; 2], d: (i64, i64), h: T) -> Option<(T, T)> {
    let delta = [h * T::lit(d.0 as f64), h * T::lit(d.1 as f64)];
    let half = T::lit(0.5);
    let mid = [a[0] + half * delta[0], a[1] + half * delta[1]];
    let end = [a[0] + delta[0], a[1] + delta[1]];
    if !m.in_domain(&mid) || !m.in_domain(&end) {
        return None;
    }
    let g = m.g_at(&mid);
    let t = m.time_orientation()?;
    Some((g.quad(&delta), g.bilinear(&delta, t)))
}

pub(crate) fn admissible<T: Scalar>(cone: (T, T), sigma: T, mode: ReachMode) -> bool {
    let (norm, orient) = cone;
    orient < T::zero()
        && match mode {
            ReachMode::Causal => norm <= sigma,
            ReachMode::Timelike => norm <= -sigma,
        }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilitySet<T> {
    pub grid: GridSpec<T>,
    pub source: usize,
    pub mode: ReachMode,
    pub causal_reachable: Vec<bool>,
    pub timelike_reachable: Vec<bool>,
    pub slack_k: T,
    pub stencil_radius: i64,
    /// Reachable vertices (in `mode`) with an unreachable 4-neighbour.
    pub frontier: Vec<usize>,
    /// Smallest number of admissible causal stencil directions at a vertex.
    pub min_directions: usize,
}

impl<T: Scalar> ReachabilitySet<T> {
    pub fn reachable(&self, mode: ReachMode) -> &[bool] {
        match mode {
            ReachMode::Causal => &self.causal_reachable,
            ReachMode::Timelike => &self.timelike_reachable,
        }
    }

    /// Verdict at the vertex nearest to `x`.
    pub fn at(&self, x: &[T], mode: ReachMode) -> Option<bool> {
        self.grid.nearest(x).map(|i| self.reachable(mode)[i])
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        let src = self.grid.point(self.source);
        json!({
            "h": self.grid.h.as_f64(),
            "K": self.slack_k.as_f64(),
            "source": [src[0].as_f64(), src[1].as_f64()],
            "mode": self.mode,
            "stencil_radius": self.stencil_radius,
            "nx": self.grid.nx,
            "ny": self.grid.ny,
            "lo": [self.grid.lo[0].as_f64(), self.grid.lo[1].as_f64()],
            "causal_count": self.causal_reachable.iter().filter(|&&b| b).count(),
            "timelike_count": self.timelike_reachable.iter().filter(|&&b| b).count(),
        })
    }

    /// Columns `i, j, x1, x2, causal, timelike`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,x1,x2,causal,timelike\n");
        for idx in 0..self.grid.len() {
            let (i, j) = self.grid.coords(idx);
            let p = self.grid.point(idx);
            let _ = writeln!(
                out,
                "{i},{j},{:e},{:e},{},{}",
                p[0].as_f64(),
                p[1].as_f64(),
                u8::from(self.causal_reachable[idx]),
                u8::from(self.timelike_reachable[idx])
            );
        }
        out
    }

    /// Plain PGM raster of `mode`: rows follow the second coordinate
    /// (top row largest), columns the first; 255 = reachable.
    pub fn to_pgm(&self, mode: ReachMode) -> String {
        let set = self.reachable(mode);
        let mut out = format!("P2\n{} {}\n255\n", self.grid.nx, self.grid.ny);
        for j in (0..self.grid.ny).rev() {
            let row: Vec<&str> = (0..self.grid.nx)
                .map(|i| if set[self.grid.index(i, j)] { "255" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn search<T: Scalar>(
    m: &PiecewiseMetric<T>,
    grid: &GridSpec<T>,
    source: usize,
    dirs: &[(i64, i64)],
    sigma: T,
    mode: ReachMode,
) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let p = grid.point(v);
        for &d in dirs {
            let Some(w) = grid.offset(v, d) else { continue };
            if seen[w] {
                continue;
            }
            if chord(m, &p, d, grid.h).is_some_and(|c| admissible(c, sigma, mode)) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

pub fn grid_reachability<T: Scalar>(
    m: &PiecewiseMetric<T>,
    source: &[T],
    grid: &GridSpec<T>,
    mode: ReachMode,
) -> Result<ReachabilitySet<T>, CausalError> {
    if m.signature() != Signature::Lorentzian || m.dim() != 2 || m.time_orientation().is_none() {
        return Err(CausalError::InvalidInput("grid reachability needs a time-oriented 2-d Lorentzian metric"));
    }
    if grid.is_empty() || !(grid.h > T::zero()) {
        return Err(CausalError::InvalidInput("empty grid"));
    }
    let src = grid.nearest(source).ok_or(CausalError::SourceOffGrid)?;
    let sp = grid.point(src);
    let tol = T::lit(1e-9) * grid.h;
    if (sp[0] - source[0]).abs() > tol || (sp[1] - source[1]).abs() > tol {
        return Err(CausalError::SourceOffGrid);
    }
    let dirs = stencil();
    let sigma = T::lit(SLACK_K) * grid.h * grid.h;
    let mut min_directions = usize::MAX;
    let mut worst = sp;
    for idx in 0..grid.len() {
        let p = grid.point(idx);
        if !m.in_domain(&p) {
            continue;
        }
        let count = dirs
            .iter()
            .filter(|&&d| chord(m, &p, d, grid.h).is_some_and(|c| admissible(c, sigma, ReachMode::Causal)))
            .count();
        if count < min_directions {
            min_directions = count;
            worst = p;
        }
    }
    if min_directions < MIN_DIRECTIONS {
        return Err(CausalError::ResolutionTooCoarse {
            directions: min_directions,
            point: vec![worst[0].as_f64(), worst[1].as_f64()],
        });
    }
    let causal_reachable = search(m, grid, src, &dirs, sigma, ReachMode::Causal);
    let timelike_reachable = search(m, grid, src, &dirs, sigma, ReachMode::Timelike);
    let primary = match mode {
        ReachMode::Causal => &causal_reachable,
        ReachMode::Timelike => &timelike_reachable,
    };
    let frontier = (0..grid.len())
        .filter(|&v| {
            primary[v]
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|&d| grid.offset(v, d).is_some_and(|w| !primary[w]))
        })
        .collect();
    Ok(ReachabilitySet {
        grid: grid.clone(),
        source: src,
        mode,
        causal_reachable,
        timelike_reachable,
        slack_k: T::lit(SLACK_K),
        stencil_radius: STENCIL_RADIUS,
        frontier,
        min_directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{bubble, euclidean, minkowski};

    fn minkowski_set(h: f64, n: usize) -> ReachabilitySet<f64> {
        let m = minkowski::<f64>(2);
        let grid = GridSpec::covering([0.0, 0.0], [0.0, -(n as f64) * h], [n as f64 * h, n as f64 * h], h);
        grid_reachability(&m, &[0.0, 0.0], &grid, ReachMode::Causal).unwrap()
    }

    #[test]
    fn stencil_size() {
        assert_eq!(stencil().len(), 48);
    }

    #[test]
    fn minkowski_causal_set_is_the_cone() {
        let set = minkowski_set(0.125, 24);
        for idx in 0..set.grid.len() {
            let (i, j) = set.grid.coords(idx);
            let (t, x) = (i as i64, j as i64 - 24);
            assert_eq!(set.causal_reachable[idx], x.abs() <= t, "t={t} x={x}");
        }
        assert_eq!(set.min_directions, 13);
    }

    #[test]
    fn minkowski_push_up() {
        // the stencil resolves timelike directions up to slope (R−1)/R
        let set = minkowski_set(0.125, 24);
        let r = STENCIL_RADIUS;
        for idx in 0..set.grid.len() {
            let (i, j) = set.grid.coords(idx);
            let (t, x) = (i as i64, j as i64 - 24);
            if set.timelike_reachable[idx] {
                assert!(set.causal_reachable[idx]);
            }
            if t > 0 && r * x.abs() <= (r - 1) * t {
                assert!(set.timelike_reachable[idx], "t={t} x={x}");
            }
        }
    }

    #[test]
    fn bubble_point_is_causal_not_timelike() {
        let m = bubble(0.5f64).unwrap();
        for h in [1.0 / 64.0, 1.0 / 128.0] {
            let grid = GridSpec::covering([0.0, 0.0], [-0.125, -0.25], [0.25, 1.0], h);
            let set = grid_reachability(&m, &[0.0, 0.0], &grid, ReachMode::Timelike).unwrap();
            assert_eq!(set.at(&[0.1, 0.8], ReachMode::Causal), Some(true), "h={h}");
            assert_eq!(set.at(&[0.1, 0.8], ReachMode::Timelike), Some(false), "h={h}");
            assert!(set.timelike_reachable.iter().zip(&set.causal_reachable).all(|(&t, &c)| !t || c));
        }
    }

    #[test]
    fn timelike_set_grows_under_refinement() {
        let m = bubble(0.5f64).unwrap();
        let coarse_grid = GridSpec::covering([0.0, 0.0], [-0.125, -0.25], [0.25, 1.0], 1.0 / 32.0);
        let fine_grid = GridSpec::covering([0.0, 0.0], [-0.125, -0.25], [0.25, 1.0], 1.0 / 64.0);
        let coarse = grid_reachability(&m, &[0.0, 0.0], &coarse_grid, ReachMode::Timelike).unwrap();
        let fine = grid_reachability(&m, &[0.0, 0.0], &fine_grid, ReachMode::Timelike).unwrap();
        let mut checked = 0;
        for idx in 0..coarse.grid.len() {
            if !coarse.timelike_reachable[idx] {
                continue;
            }
            let (i, j) = coarse.grid.coords(idx);
            let interior = (-1..=1).all(|a| {
                (-1..=1).all(|b| coarse.grid.offset(idx, (a, b)).is_some_and(|w| coarse.timelike_reachable[w]))
            });
            if interior {
                checked += 1;
                assert!(fine.timelike_reachable[fine.grid.index(2 * i, 2 * j)], "({i}, {j})");
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn exports() {
        let set = minkowski_set(0.25, 4);
        assert!(set.to_pgm(ReachMode::Causal).starts_with("P2\n5 9\n255\n"));
        assert_eq!(set.to_csv().lines().count(), 46);
        let meta = set.metadata_json();
        assert_eq!(meta["K"], 0.05);
        assert_eq!(meta["mode"], "causal");
    }

    #[test]
    fn errors() {
        let grid = GridSpec::covering([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], 0.25);
        assert!(matches!(
            grid_reachability(&euclidean::<f64>(2), &[0.0, 0.0], &grid, ReachMode::Causal),
            Err(CausalError::InvalidInput(_))
        ));
        assert!(matches!(
            grid_reachability(&minkowski::<f64>(2), &[0.1, 0.0], &grid, ReachMode::Causal),
            Err(CausalError::SourceOffGrid)
        ));
    }
}
