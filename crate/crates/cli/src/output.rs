use kkgeom_core::report::ResidualReport;
use kkgeom_core::EPoint;
use serde_json::{json, Value};

pub fn point(p: &EPoint) -> Value {
    json!({ "x": p.x, "y": p.y })
}

/// Row-major `values` of the given shape as nested arrays.
pub fn nested(values: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => json!(values[0]),
        Some((_, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array(values.chunks(stride.max(1)).map(|c| nested(c, rest)).collect())
        }
    }
}

/// A labelled component block: index names in storage order plus values.
pub fn block(indices: &str, values: &[f64], shape: &[usize]) -> Value {
    json!({ "indices": indices, "values": nested(values, shape) })
}

/// One row of a check report.
#[derive(Debug, Clone)]
pub enum Entry {
    Report { report: ResidualReport, tol: f64 },
    Failed { name: String, error: String },
    Skipped { name: String, reason: String },
}

impl Entry {
    pub fn passes(&self) -> bool {
        match self {
            Entry::Report { report, tol } => report.passes(*tol),
            Entry::Failed { .. } => false,
            Entry::Skipped { .. } => true,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Entry::Report { report, .. } => &report.name,
            Entry::Failed { name, .. } | Entry::Skipped { name, .. } => name,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Entry::Report { report, tol } => json!({
                "name": report.name,
                "max_residual": report.max_residual,
                "worst_point": report.worst_point.as_ref().map(point),
                "samples": report.samples,
                "tol": tol,
                "pass": report.passes(*tol),
            }),
            Entry::Failed { name, error } => json!({ "name": name, "error": error, "pass": false }),
            Entry::Skipped { name, reason } => json!({ "name": name, "skipped": reason, "pass": true }),
        }
    }

    pub fn summary_line(&self) -> String {
        match self {
            Entry::Report { report, tol } => format!(
                "{} {:<28} max residual {:.3e} (tol {:.0e}, {} samples)",
                if report.passes(*tol) { "PASS" } else { "FAIL" },
                report.name,
                report.max_residual,
                tol,
                report.samples
            ),
            Entry::Failed { name, error } => format!("FAIL {name:<28} {error}"),
            Entry::Skipped { name, reason } => format!("SKIP {name:<28} {reason}"),
        }
    }
}
