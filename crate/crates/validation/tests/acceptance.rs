//! Acceptance criteria A1 to A9. Prints one line per criterion and exits
//! non-zero when any of them fails.

use std::path::PathBuf;
use std::time::Instant;

use filigeo::causal::{causal_character, Curve, GridSpec, MaximizeOptions, ReachMode, STENCIL_RADIUS};
use filigeo::extremal::minimize_bvp_all;
use filigeo::filippov::demos;
use filigeo::geodesic::{tangent_norm, ShootOptions, NULL_TOL};
use filigeo::metric::{bubble, hw_lorentzian, hw_riemannian, lipschitz_toy, minkowski};
use filigeo::{
    classify_interface_hit, dbr_residual, filippov_hull, geodesic_bvp_shooting, grid_reachability, hw_geodesic_family,
    hw_lorentzian_lengths, integrate_filippov, maximize_causal_bvp, shoot_geodesic, CausalCharacter, FilippovOptions,
    HitKind, MinimizeOptions, Seed, Termination,
};
use filigeo_validation::{summary, Outcome};
use filigeo_oracle::Golden;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 1.5;
const EPS: f64 = 0.25;
const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-12;
const EVENT_TOL: f64 = 1e-10;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden.json")
}

fn integrator() -> FilippovOptions<f64> {
    FilippovOptions::default()
        .with_tolerances(RTOL, ATOL)
        .with_event_tol(EVENT_TOL)
}

fn shoot_options() -> ShootOptions<f64> {
    ShootOptions {
        integrator: integrator(),
        ..ShootOptions::default()
    }
}

fn a1(golden: &Golden) -> Outcome {
    let g = golden.entry(LAMBDA, EPS).expect("golden entry");
    let fam = hw_geodesic_family(LAMBDA, EPS).unwrap();
    let m = hw_riemannian(LAMBDA).unwrap();
    let start = Instant::now();
    let rec = shoot_geodesic(&m, &[0.0, 0.0], &fam.initial_velocity(), (0.0, 2.0 * fam.s0), &shoot_options()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let Some((_, st)) = rec.first_velocity_zero(0) else {
        return Outcome::new("A1", false, "no turning point");
    };
    let (ex, ey) = ((st.x[0] - g.x_star).abs(), (st.x[1] - g.y1).abs());
    let drift = rec
        .trajectory
        .sample_uniform(400)
        .iter()
        .map(|(_, s, _)| ((1.0 - s[0].abs().powf(LAMBDA)) * s[3] - g.c).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        "A1",
        ex < 1e-6 && ey < 1e-6 && drift < 1e-7 && elapsed < 1.0,
        format!("turning point error ({ex:.1e}, {ey:.1e}), first integral drift {drift:.1e}, {elapsed:.3} s"),
    )
}

fn a2(golden: &Golden) -> Outcome {
    let g = golden.entry(LAMBDA, EPS).unwrap();
    let m = hw_riemannian(LAMBDA).unwrap();
    let set = geodesic_bvp_shooting(&m, &[0.0, 0.0], &[0.0, 2.0 * g.y1], 2.5 * g.y1, 32, 1e-8);
    let (a, b) = (EPS.sqrt(), (1.0 - EPS).sqrt());
    let mut worst: f64 = 0.0;
    let mut lengths = Vec::new();
    for v in [[a, b], [-a, b], [0.0, 1.0]] {
        match set.nearest(&v) {
            Some(s) => {
                let d = s.initial_velocity.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst = worst.max(d);
                lengths.push(s.length);
            }
            None => return Outcome::new("A2", false, "missing solution"),
        }
    }
    let margin = lengths[2] - lengths[0].max(lengths[1]);
    let oracle_margin = 2.0 * g.y1 - 2.0 * g.s0;
    Outcome::new(
        "A2",
        set.len() >= 3 && worst < 1e-4 && margin > 1e-6 && oracle_margin > 1e-6,
        format!("{} solutions, direction error {worst:.1e}, length margin {margin:.3e}", set.len()),
    )
}

fn a3(golden: &Golden) -> Outcome {
    let g = golden.entry(LAMBDA, EPS).unwrap();
    let m = hw_riemannian(LAMBDA).unwrap();
    let opts = MinimizeOptions {
        seeds: [0.3, -0.3].iter().map(|&s| Seed::Arc { sagitta: s, normal: None }).collect(),
        ..MinimizeOptions::default()
    };
    let runs = minimize_bvp_all(&m, &[0.0, 0.0], &[0.0, 2.0 * g.y1], 256, &opts).unwrap();
    let found: Vec<_> = runs.into_iter().filter_map(Result::ok).collect();
    if found.len() != 2 {
        return Outcome::new("A3", false, format!("{} minimizers", found.len()));
    }
    let distinct = found[0].polyline.max_node_distance(&found[1].polyline) > 0.1;
    let err = found.iter().map(|mz| (mz.length - 2.0 * g.s0).abs()).fold(0.0, f64::max);
    let shorter = found.iter().all(|mz| mz.length < 2.0 * g.y1);
    let dev = found
        .iter()
        .map(|mz| dbr_residual(&m, &mz.polyline).map_or(f64::INFINITY, |d| d.statistic))
        .fold(0.0, f64::max);
    Outcome::new(
        "A3",
        distinct && err < 1e-4 && shorter && dev < 1e-4,
        format!("distinct {distinct}, |L - 2 s0| {err:.1e}, du Bois-Reymond deviation {dev:.1e}"),
    )
}

fn a4(golden: &Golden) -> Outcome {
    let eps = [0.4, 0.2, 0.1, 0.05, 0.01];
    let y1: Vec<f64> = eps.iter().map(|&e| hw_geodesic_family(LAMBDA, e).unwrap().y1).collect();
    let oracle_agrees = eps
        .iter()
        .zip(&y1)
        .all(|(&e, y)| golden.entry(LAMBDA, e).is_some_and(|g| (g.y1 - y).abs() < 1e-6));
    let decreasing = y1.windows(2).all(|w| w[1] < w[0]);
    let ratio = y1[4] / y1[0];
    Outcome::new(
        "A4",
        oracle_agrees && decreasing && ratio < 1.0 / 3.0,
        format!("y1 = {y1:.4?}, decreasing {decreasing}, y1(0.01)/y1(0.4) = {ratio:.4} (needs < 1/3)"),
    )
}

fn a5(golden: &Golden) -> Outcome {
    let g = golden.entry(LAMBDA, EPS).unwrap();
    let l = hw_lorentzian_lengths(LAMBDA, EPS).unwrap();
    let m = hw_lorentzian(LAMBDA).unwrap();
    let q = l.endpoint();
    let v: Vec<f64> = q.iter().map(|c| c / 2.0).collect();
    let rec = shoot_geodesic(&m, &[0.0; 3], &v, (0.0, 2.0), &shoot_options()).unwrap();
    let expected = (8.0 * g.s0 * g.s0 - 4.0 * g.y1 * g.y1).sqrt();
    let against_oracle = (l.l_gamma0 - expected).abs().max((l.l_gamma_pm - 2.0 * g.s0).abs());
    let margin = l.l_gamma_pm - l.l_gamma0;
    let timelike = rec.causal_character == CausalCharacter::Timelike;
    let ordered = g.s0 < g.y1 && g.y1 < 2.0 * g.s0;
    Outcome::new(
        "A5",
        against_oracle < 1e-6 && margin > 1e-6 && timelike && ordered,
        format!("L(G0) {:.6}, L(G±) {:.6}, oracle error {against_oracle:.1e}, G0 {:?}", l.l_gamma0, l.l_gamma_pm, rec.causal_character),
    )
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut wrong = 0;
    let mut seen = [0usize; 4];
    for _ in 0..10_000 {
        let mut draw = || rng.gen_range(1e-6..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (a, b) = (draw(), draw());
        let (expect, k) = match (a > 0.0, b > 0.0) {
            (true, true) => (HitKind::CrossUp, 0),
            (false, false) => (HitKind::CrossDown, 1),
            (true, false) => (HitKind::Sliding, 2),
            (false, true) => (HitKind::Repulsive, 3),
        };
        seen[k] += 1;
        wrong += usize::from(classify_interface_hit(a, b, 1e-9) != expect);
    }

    let cross = integrate_filippov(&demos::crossing::<f64>(), &[-1.0], (0.0, 3.0), &integrator()).unwrap();
    let closed = |t: f64| if t <= 2.0 { -1.0 + 0.5 * t } else { 1.5 * (t - 2.0) };
    let cross_err = cross
        .sample_uniform(300)
        .iter()
        .map(|(t, x, _)| (x[0] - closed(*t)).abs())
        .fold(0.0, f64::max);

    let slide = integrate_filippov(&demos::sliding::<f64>(), &[1.0], (0.0, 3.0), &integrator()).unwrap();
    let drift = slide
        .sample_uniform(300)
        .iter()
        .filter(|(t, _, _)| *t > 1.0 + 1e-6)
        .map(|(_, x, _)| x[0].abs())
        .fold(0.0, f64::max);

    let (lo, hi) = filippov_hull(&demos::sign::<f64>(), &[0.0], 1e-3, 64, 0).coordinate_range(0);
    let hull_err = (lo + 1.0).abs().max((hi - 1.0).abs());
    Outcome::new(
        "A6",
        wrong == 0
            && seen.iter().all(|&c| c > 0)
            && cross_err < 1e-8
            && slide.termination == Termination::Completed
            && drift < 1e-9
            && hull_err < 1e-12,
        format!("{wrong} misclassified, crossing error {cross_err:.1e}, sliding drift {drift:.1e}, hull error {hull_err:.1e}"),
    )
}

fn a7() -> Outcome {
    let h = 1.0 / 128.0;
    let m = bubble(0.5).unwrap();
    let q = [0.1, 0.8];
    let grid = GridSpec::covering([0.0, 0.0], [-0.125, -0.25], [0.25, 1.0], h);
    let set = grid_reachability(&m, &[0.0, 0.0], &grid, ReachMode::Timelike).unwrap();
    let causal = set.at(&q, ReachMode::Causal) == Some(true);
    let timelike = set.at(&q, ReachMode::Timelike) == Some(true);

    let opts = MaximizeOptions {
        grid_h: Some(h),
        ..MaximizeOptions::default()
    };
    let mx = maximize_causal_bvp(&m, &[0.0, 0.0], &q, 64, &opts).unwrap();
    let report = causal_character(&m, Curve::Polyline(&mx.polyline), 1e-8);
    // null segments lie on the axis u = 0, every other segment is timelike
    let c = &mx.polyline;
    let n2 = (c.segments() * c.segments()) as f64;
    let null_on_axis = (0..c.segments()).all(|k| {
        let g = m.g_at(&c.midpoint(k)).quad(&c.delta(k)) * n2;
        let on_axis = c.nodes[k][0] == 0.0 && c.nodes[k + 1][0] == 0.0;
        if g.abs() < NULL_TOL { on_axis } else { g < 0.0 }
    });
    let mixed = report.character == CausalCharacter::Mixed;

    // flat control: timelike ⊆ causal and the resolved cone is filled
    let n = 32i64;
    let hm = 1.0 / 64.0;
    let span = n as f64 * hm;
    let g2 = GridSpec::covering([0.0, 0.0], [0.0, -span], [span, span], hm);
    let flat = grid_reachability(&minkowski::<f64>(2), &[0.0, 0.0], &g2, ReachMode::Causal).unwrap();
    let r = STENCIL_RADIUS;
    let push_up = (0..flat.grid.len()).all(|idx| {
        let (i, j) = flat.grid.coords(idx);
        let (t, x) = (i as i64, j as i64 - n);
        let inside = t > 0 && r * x.abs() <= (r - 1) * t;
        (!flat.timelike_reachable[idx] || flat.causal_reachable[idx]) && (!inside || flat.timelike_reachable[idx])
    });
    Outcome::new(
        "A7",
        causal && !timelike && mixed && null_on_axis && push_up,
        format!("causal {causal}, timelike {timelike}, maximizer {:?}, null on axis {null_on_axis}, Minkowski push-up {push_up}", report.character),
    )
}

fn a8() -> Outcome {
    let m = lipschitz_toy::<f64>();
    let (x0, v0, span) = ([-0.5, 0.0], [1.0, 0.5], (0.0, 2.0));
    let rec = shoot_geodesic(&m, &x0, &v0, span, &shoot_options()).unwrap();
    let crossings = rec.trajectory.events.iter().filter(|e| e.kind == HitKind::CrossUp).count();
    let jump = rec.trajectory.max_state_jump();
    let drift = tangent_norm(&m, &rec).max_drift / (span.1 - span.0);
    let halved = ShootOptions {
        integrator: FilippovOptions::default()
            .with_tolerances(RTOL / 2.0, ATOL / 2.0)
            .with_event_tol(EVENT_TOL / 2.0),
        ..ShootOptions::default()
    };
    let rec2 = shoot_geodesic(&m, &x0, &v0, span, &halved).unwrap();
    let (e1, e2) = (rec.final_state().x, rec2.final_state().x);
    let shift = e1.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bound = 10.0 * RTOL * e1.iter().map(|v| v * v).sum::<f64>().sqrt();
    Outcome::new(
        "A8",
        crossings == 1 && jump < 1e-10 && drift < 1e-6 && shift < bound,
        format!("velocity jump {jump:.1e}, norm drift {drift:.1e}/unit, endpoint shift {shift:.1e} (bound {bound:.1e})"),
    )
}

fn a9(text: &str, golden: &Golden) -> Outcome {
    let regenerated = filigeo_oracle::generate(&golden.settings).map(|g| g.to_json());
    let same = regenerated.as_deref() == Ok(text);
    Outcome::new("A9", same, format!("{} bytes regenerated, identical {same}", text.len()))
}

fn main() {
    let text = std::fs::read_to_string(golden_path()).expect("fixtures/golden.json");
    let golden = Golden::from_json(&text).expect("golden fixtures parse");
    let outcomes = vec![
        a1(&golden),
        a2(&golden),
        a3(&golden),
        a4(&golden),
        a5(&golden),
        a6(),
        a7(),
        a8(),
        a9(&text, &golden),
    ];
    println!("{}", summary(&outcomes));
    if outcomes.iter().any(|o| !o.pass) {
        std::process::exit(1);
    }
}
