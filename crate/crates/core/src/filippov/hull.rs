//! Sampled approximation of the Filippov set-valued map at a point.
//!
//! Values of `f` are sampled on the closed ball `B(x, δ)` with every sample
//! lying on the interface discarded (the interface has measure zero, so it
//! cannot contribute to the essential hull). For fields that are smooth off
//! the interface the result converges to `co{f⁻(x), f⁺(x)}` on `N` and to
//! `{f(x)}` off it as `δ → 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PiecewiseField;
use crate::metric::TAU_ONSURFACE;
use crate::scalar::{dist, dot, norm, Scalar};

/// Geometric description of the hull of the sampled values.
#[derive(Debug, Clone, PartialEq)]
pub enum HullShape<T> {
    Interval { lo: T, hi: T },
    /// Counter-clockwise vertices; one or two vertices for degenerate hulls.
    Polygon { vertices: Vec<Vec<T>> },
    /// Outward facet planes `⟨n, v⟩ ≤ offset`.
    Polytope { vertices: Vec<Vec<T>>, facets: Vec<(Vec<T>, T)> },
    /// Support-function samples `h(u) = max ⟨u, v⟩` over the sampled values.
    Support { directions: Vec<Vec<T>>, values: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullApproximation<T> {
    pub center: Vec<T>,
    pub radius: T,
    /// Sampled field values.
    pub samples: Vec<Vec<T>>,
    pub shape: HullShape<T>,
}

impl<T: Scalar> HullApproximation<T> {
    /// Support function of the sampled set (exact for its convex hull).
    pub fn support(&self, u: &[T]) -> T {
        self.samples
            .iter()
            .map(|v| dot(u, v))
            .fold(T::neg_infinity(), T::max)
    }

    /// Extent of the hull along coordinate `k`.
    pub fn coordinate_range(&self, k: usize) -> (T, T) {
        let lo = self.samples.iter().map(|v| v[k]).fold(T::infinity(), T::min);
        let hi = self.samples.iter().map(|v| v[k]).fold(T::neg_infinity(), T::max);
        (lo, hi)
    }

    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for (i, a) in self.samples.iter().enumerate() {
            for b in &self.samples[i + 1..] {
                d = d.max(dist(a, b));
            }
        }
        d
    }

    /// Membership test against the reported shape. For the support-function
    /// representation this is the outer approximation.
    pub fn contains(&self, p: &[T], tol: T) -> bool {
        match &self.shape {
            HullShape::Interval { lo, hi } => p[0] >= *lo - tol && p[0] <= *hi + tol,
            HullShape::Polygon { vertices } => polygon_contains(vertices, p, tol),
            HullShape::Polytope { facets, .. } => facets.iter().all(|(n, off)| dot(n, p) <= *off + tol),
            HullShape::Support { directions, values } => directions
                .iter()
                .zip(values)
                .all(|(u, &h)| dot(u, p) <= h + tol),
        }
    }
}

/// Samples `f` on `B(x, δ)` minus the interface and returns the convex hull
/// of the values. Deterministic for a given `seed`.
pub fn filippov_hull<T: Scalar, F: PiecewiseField<T> + ?Sized>(
    field: &F,
    x: &[T],
    delta: T,
    n_samples: usize,
    seed: u64,
) -> HullApproximation<T> {
    let d = field.dim();
    assert!(delta > T::zero(), "radius must be positive");
    assert!(n_samples > d, "need at least d + 1 samples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a sample counts as on the interface within τ, shrunk for tiny balls
    let tau = T::lit(TAU_ONSURFACE).min(delta * T::lit(1e-3));
    let mut points: Vec<Vec<T>> = Vec::with_capacity(n_samples + 2 * d);
    // the axis extremes guarantee both sides of a hypersurface through x
    for k in 0..d {
        for s in [T::one(), -T::one()] {
            let mut p = x.to_vec();
            p[k] += s * delta;
            points.push(p);
        }
    }
    while points.len() < n_samples + 2 * d {
        let dir: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let r = rng.gen::<f64>().powf(1.0 / d as f64);
        points.push(
            x.iter()
                .zip(&dir)
                .map(|(&xi, &u)| xi + delta * T::lit(r * u / len))
                .collect(),
        );
    }
    let samples: Vec<Vec<T>> = points
        .into_iter()
        .filter(|p| field.in_domain(p) && field.level(p).abs() > tau)
        .filter_map(|p| field.eval_auto(&p))
        .collect();
    let shape = hull_shape(&samples, d, &mut rng);
    HullApproximation {
        center: x.to_vec(),
        radius: delta,
        samples,
        shape,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1]
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn hull_shape<T: Scalar>(samples: &[Vec<T>], d: usize, rng: &mut ChaCha8Rng) -> HullShape<T> {
    match d {
        1 => HullShape::Interval {
            lo: samples.iter().map(|v| v[0]).fold(T::infinity(), T::min),
            hi: samples.iter().map(|v| v[0]).fold(T::neg_infinity(), T::max),
        },
        2 => HullShape::Polygon {
            vertices: monotone_chain(samples),
        },
        3 => match quickhull3(samples) {
            Some((vertices, facets)) => HullShape::Polytope { vertices, facets },
            None => support_shape(samples, d, rng),
        },
        _ => support_shape(samples, d, rng),
    }
}

fn support_shape<T: Scalar>(samples: &[Vec<T>], d: usize, rng: &mut ChaCha8Rng) -> HullShape<T> {
    let mut directions: Vec<Vec<T>> = Vec::new();
    for k in 0..d {
        for s in [T::one(), -T::one()] {
            let mut u = vec![T::zero(); d];
            u[k] = s;
            directions.push(u);
        }
    }
    for _ in 0..(32 * d) {
        let u: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
        let l = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        directions.push(u.iter().map(|v| T::lit(v / l)).collect());
    }
    let values = directions
        .iter()
        .map(|u| samples.iter().map(|v| dot(u, v)).fold(T::neg_infinity(), T::max))
        .collect();
    HullShape::Support { directions, values }
}

fn cross2<T: Scalar>(o: &[T], a: &[T], b: &[T]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear points dropped.
fn monotone_chain<T: Scalar>(samples: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut pts: Vec<Vec<T>> = samples.to_vec();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a[1].partial_cmp(&b[1]).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Vec<T>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= T::zero() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<T>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= T::zero() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_contains<T: Scalar>(vertices: &[Vec<T>], p: &[T], tol: T) -> bool {
    match vertices.len() {
        0 => false,
        1 => dist(&vertices[0], p) <= tol,
        2 => segment_distance(&vertices[0], &vertices[1], p) <= tol,
        n => (0..n).all(|i| {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            let edge = dist(a, b).max(T::min_positive_value());
            cross2(a, b, p) >= -tol * edge
        }),
    }
}

fn segment_distance<T: Scalar>(a: &[T], b: &[T], p: &[T]) -> T {
    let ab: Vec<T> = b.iter().zip(a).map(|(&x, &y)| x - y).collect();
    let ap: Vec<T> = p.iter().zip(a).map(|(&x, &y)| x - y).collect();
    let l2 = dot(&ab, &ab);
    let t = if l2 > T::zero() {
        (dot(&ap, &ab) / l2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let proj: Vec<T> = a.iter().zip(&ab).map(|(&x, &y)| x + t * y).collect();
    dist(&proj, p)
}

fn sub3<T: Scalar>(a: &[T], b: &[T]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

struct Face<T> {
    v: [usize; 3],
    normal: Vec<T>,
    offset: T,
    alive: bool,
}

/// Incremental 3-d hull. `None` when the samples are (nearly) coplanar.
#[allow(clippy::type_complexity)]
fn quickhull3<T: Scalar>(samples: &[Vec<T>]) -> Option<(Vec<Vec<T>>, Vec<(Vec<T>, T)>)> {
    let pts = samples;
    if pts.len() < 4 {
        return None;
    }
    let scale = pts.iter().fold(T::zero(), |m, p| m.max(norm(p))).max(T::one());
    let eps = T::lit(1e-10) * scale;
    let i0 = 0;
    let i1 = (0..pts.len()).max_by(|&a, &b| cmp(dist(&pts[a], &pts[i0]), dist(&pts[b], &pts[i0])))?;
    if dist(&pts[i1], &pts[i0]) <= eps {
        return None;
    }
    let line = sub3(&pts[i1], &pts[i0]);
    let i2 = (0..pts.len()).max_by(|&a, &b| {
        cmp(
            norm(&cross3(line, sub3(&pts[a], &pts[i0]))),
            norm(&cross3(line, sub3(&pts[b], &pts[i0]))),
        )
    })?;
    let plane = cross3(line, sub3(&pts[i2], &pts[i0]));
    if norm(&plane) <= eps * eps.max(norm(&line)) {
        return None;
    }
    let i3 = (0..pts.len())
        .max_by(|&a, &b| cmp(dot(&plane, &sub3(&pts[a], &pts[i0])).abs(), dot(&plane, &sub3(&pts[b], &pts[i0])).abs()))?;
    if dot(&plane, &sub3(&pts[i3], &pts[i0])).abs() <= eps * norm(&plane) {
        return None;
    }
    let quarter = T::lit(0.25);
    let interior: Vec<T> = (0..3)
        .map(|k| (pts[i0][k] + pts[i1][k] + pts[i2][k] + pts[i3][k]) * quarter)
        .collect();
    let make_face = |a: usize, b: usize, c: usize| -> Face<T> {
        let n = cross3(sub3(&pts[b], &pts[a]), sub3(&pts[c], &pts[a]));
        let l = norm(&n);
        let mut normal: Vec<T> = n.iter().map(|&v| v / l).collect();
        let mut offset = dot(&normal, &pts[a]);
        let mut v = [a, b, c];
        if dot(&normal, &interior) > offset {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
            v = [a, c, b];
        }
        Face { v, normal, offset, alive: true }
    };
    let mut faces = vec![
        make_face(i0, i1, i2),
        make_face(i0, i1, i3),
        make_face(i0, i2, i3),
        make_face(i1, i2, i3),
    ];
    for (pi, p) in pts.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && dot(&f.normal, p) - f.offset > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            edges.extend([(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]);
            faces[fi].alive = false;
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .filter(|&&(a, b)| !edges.contains(&(b, a)))
            .copied()
            .collect();
        for (a, b) in horizon {
            let n = cross3(sub3(&pts[b], &pts[a]), sub3(p, &pts[a]));
            if norm(&n) <= eps * eps {
                continue;
            }
            faces.push(make_face(a, b, pi));
        }
    }
    let alive: Vec<&Face<T>> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = alive.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    Some((
        used.iter().map(|&i| pts[i].clone()).collect(),
        alive.iter().map(|f| (f.normal.clone(), f.offset)).collect(),
    ))
}

fn cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}
