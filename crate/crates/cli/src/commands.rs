//! The four subcommands. Each returns an [`Outcome`]; nothing here prints.

use std::fmt::Write as _;

use kkgeom_core::algebroid::{validate_anchor_compatibility, validate_antisymmetry, validate_jacobi};
use kkgeom_core::curvature::{
    check_bianchi, check_ricci_commutation, curvature_components, energy_momentum, oracle_equivalence, ricci, s_block_check,
    scalar_curvature, torsion_components,
};
use kkgeom_core::dconnection::check_dconnection_transformation;
use kkgeom_core::lift::{
    horizontality_residual, integrate_horizontal_parallel, integrate_parallel_lift, integrate_vertical_parallel, BaseCurve,
    LiftProblem, Trajectory,
};
use kkgeom_core::metric::compatibility_families;
use kkgeom_core::nlconnection::{check_nlc_transformation, nlc_curvature};
use kkgeom_core::report::ResidualReport;
use kkgeom_core::sampling::DEFAULT_SAMPLES;
use kkgeom_core::{EPoint, EvalError, JetPoint, LiftError, SampleError};
use serde_json::{json, Map, Value};

use crate::output::{block, point, Entry};
use crate::scenario::{Model, DEFAULT_CHECK_SAMPLES};
use crate::{CliError, Outcome};

pub const VALIDATE_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const CHART_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-8;
pub const S_BLOCK_TOL: f64 = 1e-12;
pub const RICCI_TOL: f64 = 1e-6;
pub const BIANCHI_TOL: f64 = 1e-5;
pub const COMPATIBILITY_TOL: f64 = 1e-9;
pub const TRANSFORMATION_TOL: f64 = 1e-8;

pub const SUITES: [&str; 5] = ["oracle", "ricci-commutation", "bianchi", "compatibility", "transformation"];
pub const QUANTITIES: [&str; 7] = ["frame", "nlc-curvature", "torsion", "curvature", "ricci", "scalar", "einstein"];
pub const LIFT_MODES: [&str; 3] = ["parallel", "horizontal", "vertical"];

fn reports(r: Result<Vec<ResidualReport>, SampleError>, name: &str, tol: f64) -> Vec<Entry> {
    match r {
        Ok(v) => v.into_iter().map(|report| Entry::Report { report, tol }).collect(),
        Err(e) => vec![Entry::Failed { name: name.into(), error: e.to_string() }],
    }
}

fn report(r: Result<ResidualReport, SampleError>, name: &str, tol: f64) -> Entry {
    match r {
        Ok(report) => Entry::Report { report, tol },
        Err(e) => Entry::Failed { name: name.into(), error: e.to_string() },
    }
}

fn finish(mut doc: Map<String, Value>, title: &str, entries: &[Entry]) -> Outcome {
    let pass = entries.iter().all(Entry::passes);
    doc.insert("checks".into(), Value::Array(entries.iter().map(Entry::to_json).collect()));
    doc.insert("pass".into(), json!(pass));
    let mut summary = format!("{title}\n");
    for e in entries {
        let _ = writeln!(summary, "  {}", e.summary_line());
    }
    let _ = write!(summary, "{}", if pass { "all checks passed" } else { "some checks failed" });
    Outcome { json: Value::Object(doc), summary, code: if pass { 0 } else { 1 } }
}

fn header(model: &Model, command: &str) -> Map<String, Value> {
    let mut doc = Map::new();
    doc.insert("command".into(), json!(command));
    doc.insert("scenario".into(), json!(model.name));
    doc.insert("connection".into(), json!(model.geometry.conn_kind));
    doc
}

/// Algebroid axioms, metric sanity, chart-change sanity and the lift
/// morphism's left inverse.
pub fn validate(model: &Model) -> Outcome {
    let n = model.samples.unwrap_or(DEFAULT_SAMPLES);
    let samples = model.sample_box.sample(n, model.seed);
    let alg = model.frame().algebroid();
    let mut entries = vec![
        report(validate_antisymmetry(alg, &samples), "antisymmetry", VALIDATE_TOL),
        report(validate_anchor_compatibility(alg, &samples), "anchor-compatibility", VALIDATE_TOL),
        report(validate_jacobi(alg, &samples), "jacobi", VALIDATE_TOL),
    ];
    match &model.geometry.metric {
        Some(g) => {
            entries.push(report(g.symmetry_residual(&samples), "metric-symmetry", SYMMETRY_TOL));
            entries.push(match g.check_nondegenerate(&samples) {
                Ok(()) => Entry::Report { report: ResidualReport { samples: samples.len(), ..ResidualReport::empty("metric-nondegenerate") }, tol: 0.0 },
                Err(e) => Entry::Failed { name: "metric-nondegenerate".into(), error: e.to_string() },
            });
        }
        None => entries.push(Entry::Skipped { name: "metric".into(), reason: "scenario has no metric".into() }),
    }
    if let Some(t) = &model.transformation {
        entries.extend(reports(t.change.validate(&samples), "chart", CHART_TOL));
    }
    match model.lift.as_ref().map(|l| l.morphism.local_invertibility(&samples)) {
        Some(Some(r)) => entries.push(report(r, "local-invertibility", VALIDATE_TOL)),
        Some(None) => entries.push(Entry::Skipped { name: "local-invertibility".into(), reason: "no gtilde given".into() }),
        None => {}
    }
    let mut doc = header(model, "validate");
    doc.insert("seed".into(), json!(model.seed));
    doc.insert("samples".into(), json!(n));
    finish(doc, &format!("validate {}", model.name), &entries)
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

fn suite_entries(model: &Model, suite: &str, samples: &[EPoint], tol: &dyn Fn(f64) -> f64) -> Vec<Entry> {
    let (frame, conn) = (model.frame(), model.conn());
    match suite {
        "oracle" => {
            let mut e = reports(oracle_equivalence(conn, frame, samples), "oracle", tol(ORACLE_TOL));
            e.push(report(s_block_check(conn, frame, samples), "s-blocks", tol(S_BLOCK_TOL)));
            e
        }
        "ricci-commutation" => {
            let mut out = Vec::new();
            for (k, z) in model.test_fields.iter().enumerate() {
                for mut e in reports(check_ricci_commutation(z, conn, frame, samples), "ricci-commutation", tol(RICCI_TOL)) {
                    match &mut e {
                        Entry::Report { report, .. } => report.name = format!("field {}: {}", k + 1, report.name),
                        Entry::Failed { name, .. } | Entry::Skipped { name, .. } => *name = format!("field {}: {name}", k + 1),
                    }
                    out.push(e);
                }
            }
            out
        }
        "bianchi" => reports(check_bianchi(conn, frame, samples), "bianchi", tol(BIANCHI_TOL)),
        "compatibility" => match &model.geometry.metric {
            Some(g) => reports(compatibility_families(g, conn, frame, samples), "compatibility", tol(COMPATIBILITY_TOL)),
            None => vec![Entry::Skipped { name: "compatibility".into(), reason: "scenario has no metric".into() }],
        },
        "transformation" => match &model.transformation {
            Some(t) => {
                let mut e = reports(t.change.validate(samples), "chart", tol(CHART_TOL));
                e.push(report(
                    check_nlc_transformation(frame, t.primed.frame.connection(), &t.change, samples),
                    "nlc-transformation",
                    tol(TRANSFORMATION_TOL),
                ));
                e.push(report(
                    check_dconnection_transformation(conn, &t.primed.conn, &t.change, frame, samples),
                    "dconnection-transformation",
                    tol(TRANSFORMATION_TOL),
                ));
                e
            }
            None => vec![Entry::Skipped { name: "transformation".into(), reason: "scenario has no transformation section".into() }],
        },
        _ => unreachable!("suite names are checked by the caller"),
    }
}

pub fn check(model: &Model, suite: &str, opts: &CheckOptions) -> Result<Outcome, CliError> {
    let suites: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => return Err(CliError::Input(format!("unknown suite {other:?}; expected one of {SUITES:?} or \"all\""))),
    };
    if let Some(t) = opts.tol {
        if !(t >= 0.0) {
            return Err(CliError::Input(format!("--tol must be non-negative, got {t}")));
        }
    }
    let seed = opts.seed.unwrap_or(model.seed);
    let n = opts.samples.or(model.samples).unwrap_or(DEFAULT_CHECK_SAMPLES);
    let samples = model.sample_box.sample(n, seed);
    let tol = |default: f64| opts.tol.unwrap_or(default);
    let mut all = Vec::new();
    let mut per_suite = Vec::new();
    for s in &suites {
        let entries = suite_entries(model, s, &samples, &tol);
        per_suite.push(json!({
            "suite": s,
            "pass": entries.iter().all(Entry::passes),
            "checks": entries.iter().map(Entry::to_json).collect::<Vec<_>>(),
        }));
        all.extend(entries);
    }
    let mut doc = header(model, "check");
    doc.insert("suite".into(), json!(suite));
    doc.insert("seed".into(), json!(seed));
    doc.insert("samples".into(), json!(n));
    doc.insert("suites".into(), Value::Array(per_suite));
    let mut out = finish(doc, &format!("check {} --suite {suite} (seed {seed}, {n} samples)", model.name), &all);
    if let Value::Object(o) = &mut out.json {
        o.remove("checks");
    }
    Ok(out)
}

/// Parses `x1=..,x2=..,y0=..`; every coordinate must be given exactly once.
pub fn parse_point(spec: &str, m: usize) -> Result<EPoint, CliError> {
    let mut x = vec![None; m];
    let mut y = None;
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| CliError::Input(format!("--at: expected name=value, got {part:?}")))?;
        let value: f64 = value.trim().parse().map_err(|_| CliError::Input(format!("--at: {value:?} is not a number")))?;
        let slot = match name.trim() {
            "y0" => &mut y,
            n => match n.strip_prefix('x').and_then(|i| i.parse::<usize>().ok()) {
                Some(i) if (1..=m).contains(&i) => &mut x[i - 1],
                _ => return Err(CliError::Input(format!("--at: unknown coordinate {n:?} (base dimension {m})"))),
            },
        };
        if slot.replace(value).is_some() {
            return Err(CliError::Input(format!("--at: {} given twice", name.trim())));
        }
    }
    let x: Option<Vec<f64>> = x.into_iter().collect();
    match (x, y) {
        (Some(x), Some(y)) => Ok(EPoint::new(x, y)),
        _ => Err(CliError::Input(format!("--at: need all of x1..x{m} and y0"))),
    }
}

fn eval_err(p: &EPoint) -> impl Fn(EvalError) -> CliError + '_ {
    move |e| CliError::Runtime(format!("at {p}: {e}"))
}

pub fn compute(model: &Model, what: &str, at: &str) -> Result<Outcome, CliError> {
    if !QUANTITIES.contains(&what) {
        return Err(CliError::Input(format!("unknown quantity {what:?}; expected one of {QUANTITIES:?}")));
    }
    let pt = parse_point(at, model.m)?;
    if !model.sample_box.contains(&pt) {
        return Err(CliError::Input(format!("point {pt} lies outside the scenario box")));
    }
    let (frame, conn, p, m) = (model.frame(), model.conn(), model.p, model.m);
    let err = eval_err(&pt);
    let metric = || {
        model.geometry.metric.as_ref().ok_or_else(|| CliError::Input(format!("--what {what} needs a metric in the scenario")))
    };
    let mut values = Map::new();
    match what {
        "frame" => {
            let jp = JetPoint::from(&pt);
            let rho: Vec<f64> = frame.algebroid().rho_at(&jp).map_err(&err)?.iter().map(|j| j.value()).collect();
            let gamma: Vec<f64> = frame.connection().gamma_at(&jp).map_err(&err)?.iter().map(|j| j.value()).collect();
            let delta: Vec<f64> = (0..p).flat_map(|a| rho[a * m..(a + 1) * m].iter().copied().chain([-gamma[a]])).collect();
            values.insert("rho".into(), block("alpha,i", &rho, &[p, m]));
            values.insert("gamma".into(), block("alpha", &gamma, &[p]));
            values.insert("delta".into(), block("alpha,(d/dx^1..d/dx^m,d/dy)", &delta, &[p, m + 1]));
        }
        "nlc-curvature" => {
            let r = nlc_curvature(frame, &pt).map_err(&err)?;
            values.insert("R0".into(), block("alpha,beta", r.data(), &[p, p]));
        }
        "torsion" => {
            let t = torsion_components(conn, frame, &pt).map_err(&err)?;
            values.insert("T_hh".into(), block("alpha,beta,gamma", &t.thh, &[p, p, p]));
            values.insert("T_v".into(), block("beta,gamma", &t.tv, &[p, p]));
            values.insert("P_h".into(), block("alpha,beta", &t.ph, &[p, p]));
            values.insert("P_v".into(), block("beta", &t.pv, &[p]));
            values.insert("S".into(), json!(t.s));
        }
        "curvature" => {
            let r = curvature_components(conn, frame, &pt).map_err(&err)?;
            values.insert("R_h".into(), block("alpha,beta,gamma,epsilon", &r.rh, &[p, p, p, p]));
            values.insert("R_v".into(), block("gamma,epsilon", &r.rv, &[p, p]));
            values.insert("P_h".into(), block("alpha,epsilon,gamma", &r.ph, &[p, p, p]));
            values.insert("P_v".into(), block("gamma", &r.pv, &[p]));
            values.insert("S_h".into(), block("alpha,beta", &r.sh, &[p, p]));
            values.insert("S_v".into(), json!(r.sv));
        }
        "ricci" | "scalar" | "einstein" => {
            let ric = ricci(&curvature_components(conn, frame, &pt).map_err(&err)?);
            if what == "ricci" {
                values.insert("R_ab".into(), block("alpha,beta", &ric.rab, &[p, p]));
                values.insert("P_a0".into(), block("alpha", &ric.pa0, &[p]));
                values.insert("P_0b".into(), block("beta", &ric.p0b, &[p]));
                values.insert("S_00".into(), json!(ric.s00));
            } else {
                let g = metric()?;
                let scalar = scalar_curvature(&ric, g, &pt).map_err(&err)?;
                values.insert("scalar".into(), json!(scalar));
                if what == "einstein" {
                    let em = energy_momentum(&ric, scalar, g, model.kappa, &pt).map_err(|e| match e {
                        EvalError::ZeroKappa => CliError::Input("kappa must be nonzero".into()),
                        e => err(e),
                    })?;
                    values.insert("kappa".into(), json!(em.kappa));
                    values.insert("T_ab".into(), block("alpha,beta", &em.tab, &[p, p]));
                    values.insert("T_a0".into(), block("alpha", &em.ta0, &[p]));
                    values.insert("T_0b".into(), block("beta", &em.t0b, &[p]));
                    values.insert("T_00".into(), json!(em.t00));
                }
            }
        }
        _ => unreachable!(),
    }
    let mut doc = header(model, "compute");
    doc.insert("what".into(), json!(what));
    doc.insert("point".into(), point(&pt));
    doc.insert("values".into(), Value::Object(values));
    let summary = format!("compute {what} for {} at {pt}", model.name);
    Ok(Outcome { json: Value::Object(doc), summary, code: 0 })
}

#[derive(Debug, Clone, Default)]
pub struct LiftOptions {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub steps: Option<usize>,
}

pub fn lift(model: &Model, mode: &str, opts: &LiftOptions) -> Result<Outcome, CliError> {
    if !LIFT_MODES.contains(&mode) {
        return Err(CliError::Input(format!("unknown mode {mode:?}; expected one of {LIFT_MODES:?}")));
    }
    let spec = model.lift.as_ref().ok_or_else(|| CliError::Input("scenario has no lift section".into()))?;
    let (t0, t1) = (opts.t0.unwrap_or(spec.t0), opts.t1.unwrap_or(spec.t1));
    let steps = opts.steps.unwrap_or(spec.steps);
    if steps == 0 {
        return Err(CliError::Input("--steps must be positive".into()));
    }
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(CliError::Input("--t0 and --t1 must be finite".into()));
    }
    let curve = BaseCurve::new(spec.curve.clone(), t0, t1);
    let lp = LiftProblem::new(curve, spec.morphism.clone(), model.frame().clone()).map_err(|e| CliError::Input(e.to_string()))?;
    let p = model.p;
    let (result, labels) = match mode {
        "parallel" => (integrate_parallel_lift(&lp, spec.y0, steps), vec!["y0".to_string()]),
        "vertical" => (integrate_vertical_parallel(&lp, model.conn(), spec.y0, steps), vec!["y0".to_string()]),
        _ => {
            let z0 = match &spec.z0 {
                Some(z) => z.clone(),
                // the horizontal part of the lift at t0
                None => {
                    let x = lp.curve.point(t0).map_err(|e| CliError::Runtime(format!("curve at t0: {e}")))?;
                    let g = spec.morphism.g_at(&x, spec.y0).map_err(|e| CliError::Runtime(format!("lift morphism at t0: {e}")))?;
                    g.iter().map(|v| v * spec.y0).collect()
                }
            };
            let labels = (1..=p).map(|a| format!("z{a}")).chain(["y0".to_string()]).collect();
            (integrate_horizontal_parallel(&lp, model.conn(), &z0, spec.y0, steps), labels)
        }
    };
    let mut doc = header(model, "lift");
    doc.insert("mode".into(), json!(mode));
    doc.insert("t0".into(), json!(t0));
    doc.insert("t1".into(), json!(t1));
    doc.insert("steps".into(), json!(steps));
    doc.insert("state".into(), json!(labels));
    match result {
        Ok(tr) => {
            let (t_end, last) = tr.last();
            let summary = format!("lift {mode} for {}: {steps} RK4 steps, state at t = {t_end}: {last:?}", model.name);
            doc.insert("status".into(), json!("ok"));
            doc.insert("final".into(), json!({ "t": t_end, "state": last }));
            if mode == "parallel" {
                let e = report(horizontality_residual(&lp, &tr), "horizontality", TRANSFORMATION_TOL);
                doc.insert("horizontality".into(), e.to_json());
            }
            doc.insert("trajectory".into(), trajectory_json(&tr));
            Ok(Outcome { json: Value::Object(doc), summary, code: 0 })
        }
        Err(LiftError::BlowUp { last_t, singularity }) => {
            doc.insert("status".into(), json!("blow-up"));
            doc.insert("last_t".into(), json!(last_t));
            doc.insert("singularity".into(), json!(singularity));
            let summary = match singularity {
                Some(s) => format!("lift {mode} for {}: blow-up after t = {last_t}, singularity near t = {s}", model.name),
                None => format!("lift {mode} for {}: blow-up after t = {last_t}", model.name),
            };
            Ok(Outcome { json: Value::Object(doc), summary, code: 1 })
        }
        Err(e) => {
            doc.insert("status".into(), json!("error"));
            doc.insert("error".into(), json!(e.to_string()));
            Ok(Outcome { json: Value::Object(doc), summary: format!("lift {mode} for {}: {e}", model.name), code: 1 })
        }
    }
}

fn trajectory_json(tr: &Trajectory) -> Value {
    Value::Array(tr.t.iter().zip(&tr.states).map(|(t, s)| json!([t, s])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points() {
        let p = parse_point("x1=1, x2=-0.5,y0=2", 2).unwrap();
        assert_eq!(p, EPoint::new(vec![1.0, -0.5], 2.0));
        for bad in ["x1=1,y0=2", "x1=1,x2=2,x3=0,y0=1", "x1=1,x1=2,x2=0,y0=1", "x1=a,x2=0,y0=1", "x1"] {
            assert!(matches!(parse_point(bad, 2), Err(CliError::Input(_))), "{bad}");
        }
    }
}
