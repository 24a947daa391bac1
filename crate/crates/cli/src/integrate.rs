use filigeo::filippov::demos;
use filigeo::geodesic::ShootOptions;
use filigeo::{hw_geodesic_family, integrate_filippov, shoot_geodesic, FilippovOptions, Termination};
use serde_json::json;

use crate::args::{Demo, IntegrateArgs};
use crate::manifest::{metric_from_flags, ExperimentManifest};
use crate::report::{Output, Report};
use crate::CliError;

/// Process exit code for a termination reason.
pub fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Completed => 0,
        Termination::RepulsiveStop => 3,
        Termination::DomainExit => 4,
        Termination::StepFailure => 5,
        Termination::SlidingExit => 6,
    }
}

fn integrator(man: &ExperimentManifest) -> FilippovOptions<f64> {
    let p = &man.params;
    FilippovOptions::default()
        .with_tolerances(p.rtol, p.atol)
        .with_event_tol(p.event_tol)
}

fn check_span(s_end: f64) -> Result<f64, CliError> {
    if s_end > 0.0 && s_end.is_finite() {
        Ok(s_end)
    } else {
        Err(CliError::Validation(format!("--s-end must be positive, got {s_end}")))
    }
}

pub fn run(args: &IntegrateArgs) -> Result<(Report, i32), CliError> {
    match args.demo {
        Some(demo) => run_demo(args, demo),
        None => run_geodesic(args),
    }
}

fn run_demo(args: &IntegrateArgs, demo: Demo) -> Result<(Report, i32), CliError> {
    let name = format!("integrate-demo-{}", serde_json::to_value(demo).expect("enum").as_str().unwrap_or(""));
    let man = ExperimentManifest::new(&name, &args.common, None)?;
    let (field, x0, s_end) = match demo {
        Demo::Crossing => (demos::crossing::<f64>(), -1.0, 3.0),
        Demo::Sliding => (demos::sliding::<f64>(), 1.0, 3.0),
        Demo::Repulsive => (demos::repulsive::<f64>(), 0.0, 1.0),
    };
    let x0 = match &args.x0 {
        Some(v) if v.len() == 1 => v[0],
        Some(_) => return Err(CliError::Validation("demo fields are 1-d: --x0 takes one value".into())),
        None => x0,
    };
    let s_end = check_span(args.s_end.unwrap_or(s_end))?;
    let traj = integrate_filippov(&field, &[x0], (0.0, s_end), &integrator(&man))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut out = Output::new(&man)?;
    out.table("trajectory", &traj.to_csv(args.samples))?;
    let run = json!({
        "termination": traj.termination,
        "exit_code": exit_code(traj.termination),
        "t_final": traj.t_final,
        "x_final": traj.x_final,
        "events": traj.events_json(),
        "continuations": traj.continuations_json(),
    });
    out.json("events", &run)?;
    finish(out, man, run, traj.termination)
}

fn run_geodesic(args: &IntegrateArgs) -> Result<(Report, i32), CliError> {
    let c = &args.common;
    let name = c
        .metric
        .as_deref()
        .ok_or_else(|| CliError::Validation("integrate needs --metric or --demo".into()))?;
    let m = metric_from_flags(name, c.lambda, args.dim)?;
    let man = ExperimentManifest::new("integrate", c, Some(m.descriptor().clone()))?;
    let n = m.dim();
    let family = |c: &crate::args::Common| -> Result<Option<filigeo::HwFamily>, CliError> {
        match (c.lambda, c.eps) {
            (Some(l), Some(e)) => hw_geodesic_family(l, e)
                .map(Some)
                .map_err(|e| CliError::Validation(e.to_string())),
            _ => Ok(None),
        }
    };
    // default initial data per metric
    let (x0, v0, s_end): (Vec<f64>, Option<Vec<f64>>, f64) = match name {
        "hw" => match family(c)? {
            Some(f) => (vec![0.0, 0.0], Some(f.initial_velocity().to_vec()), 2.0 * f.s0),
            None => (vec![0.0, 0.0], None, 1.0),
        },
        "hw-lorentzian" => match family(c)? {
            // the straight timelike geodesic Γ₀ over [0, 2]
            Some(f) => (vec![0.0; 3], Some(vec![2f64.sqrt() * f.s0, 0.0, f.y1]), 2.0),
            None => (vec![0.0; 3], None, 1.0),
        },
        "bubble" => (vec![0.1, 0.0], Some(vec![1.0, 0.0]), 0.5),
        "lipschitz-toy" => (vec![-0.5, 0.0], Some(vec![1.0, 0.5]), 1.0),
        _ => {
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            (vec![0.0; n], Some(e1), 1.0)
        }
    };
    let x0 = args.x0.clone().unwrap_or(x0);
    let v0 = args
        .v0
        .clone()
        .or(v0)
        .ok_or_else(|| CliError::Validation(format!("--metric {name} needs --eps or --v0")))?;
    if x0.len() != n || v0.len() != n {
        return Err(CliError::Validation(format!("--x0 and --v0 need {n} components")));
    }
    let s_end = check_span(args.s_end.unwrap_or(s_end))?;
    let opts = ShootOptions {
        integrator: integrator(&man),
        ..ShootOptions::default()
    };
    let rec = shoot_geodesic(&m, &x0, &v0, (0.0, s_end), &opts).map_err(|e| CliError::Validation(e.to_string()))?;
    let traj = &rec.trajectory;
    let mut out = Output::new(&man)?;
    out.table("trajectory", &rec.to_csv(&m, args.samples))?;
    let norms: Vec<f64> = rec.norm_trace.iter().map(|&(_, g)| g).collect();
    let drift = norms.iter().fold(0.0f64, |d, g| d.max((g - norms[0]).abs()));
    let run = json!({
        "termination": traj.termination,
        "exit_code": exit_code(traj.termination),
        "t_final": traj.t_final,
        "x_final": traj.x_final,
        "causal_character": rec.causal_character,
        "norm_drift": drift,
        "events": traj.events_json(),
        "continuations": traj.continuations_json(),
    });
    out.json("events", &run)?;
    finish(out, man, run, traj.termination)
}

fn finish(mut out: Output, man: ExperimentManifest, run: serde_json::Value, t: Termination) -> Result<(Report, i32), CliError> {
    let mut artifacts = out.artifacts.clone();
    artifacts.push("report.json".into());
    let mut report = Report::new("integrate", man, Vec::new(), artifacts);
    report.run = Some(run);
    out.report(&report)?;
    Ok((report, exit_code(t)))
}
