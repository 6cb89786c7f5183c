//! Pseudometrics `G = g_{αβ} δz^α δz^β + g_{°°} δy δy` and the
//! distinguished connections compatible with them.

use std::sync::Arc;

use crate::calculus::{EPoint, Field, Jet, JetPoint};
use crate::dconnection::{
    berwald, h_cov_deriv, v_cov_deriv, CoefficientSource, ConnectionValues, DConnectionCoeffs, DTensorField, Valence,
};
use crate::error::{EvalError, SampleError, ShapeError};
use crate::linalg;
use crate::nlconnection::AdaptedFrame;
use crate::report::{max_abs, sweep, sweep_many, ResidualReport};
use crate::tensor::Tensor;

/// Threshold for the y-independence flags.
pub const RIEMANNIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct MetricStructure {
    p: usize,
    g: Vec<Field>,
    g00: Field,
}

impl MetricStructure {
    /// `g` is p x p row-major. Symmetry is a numerical property of the
    /// fields and is checked separately by [`MetricStructure::symmetry_residual`].
    pub fn new(p: usize, g: Vec<Field>, g00: Field) -> Result<Self, ShapeError> {
        if g.len() != p * p {
            return Err(ShapeError::Count { what: "g", expected: p * p, found: g.len() });
        }
        Ok(MetricStructure { p, g, g00 })
    }

    pub fn rank(&self) -> usize {
        self.p
    }

    pub fn g(&self, a: usize, b: usize) -> &Field {
        &self.g[a * self.p + b]
    }

    pub fn g00(&self) -> &Field {
        &self.g00
    }

    pub fn g_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.g.iter().map(|f| f.eval(p)).collect()
    }

    pub fn g00_at(&self, p: &JetPoint) -> Result<Jet, EvalError> {
        let v = self.g00.eval(p)?;
        if v.value() == 0.0 {
            return Err(EvalError::Singular { what: "g00", condition: f64::INFINITY });
        }
        Ok(v)
    }

    pub fn inverse_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        linalg::invert(&self.g_at(p)?, self.p, "g")
    }

    /// The horizontal block as a d-tensor of valence (0,2,0,0).
    pub fn h_tensor(&self) -> DTensorField {
        let m = self.clone();
        DTensorField::new(Valence::new(0, 2, 0, 0), self.p, move |q| m.g_at(q))
    }

    /// The vertical block as a d-tensor of valence (0,0,0,2).
    pub fn v_tensor(&self) -> DTensorField {
        let g00 = self.g00.clone();
        DTensorField::new(Valence::new(0, 0, 0, 2), self.p, move |q| Ok(vec![g00.eval(q)?]))
    }

    pub fn symmetry_residual(&self, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
        let n = self.p;
        sweep("metric-symmetry", samples, |pt| {
            let g = self.g_at(&JetPoint::from(pt))?;
            Ok(max_abs((0..n * n).map(|k| (g[k] - g[(k % n) * n + k / n]).value())))
        })
    }

    /// Fails with the first sample at which either block is singular.
    pub fn check_nondegenerate(&self, samples: &[EPoint]) -> Result<(), SampleError> {
        for pt in samples {
            let jp = JetPoint::from(pt);
            self.inverse_at(&jp).map_err(|e| SampleError::new(pt, e))?;
            self.g00_at(&jp).map_err(|e| SampleError::new(pt, e))?;
        }
        Ok(())
    }
}

/// g̃^{αβ} at `p`.
pub fn inverse_h(g: &MetricStructure, p: &EPoint) -> Result<Tensor<f64>, EvalError> {
    let inv = g.inverse_at(&JetPoint::from(p))?;
    Ok(Tensor::new(vec![g.p, g.p], inv.iter().map(|j| j.value()).collect()))
}

#[derive(Debug)]
struct MetricConnection {
    metric: MetricStructure,
    frame: AdaptedFrame,
    baseline: DConnectionCoeffs,
}

impl CoefficientSource for MetricConnection {
    fn rank(&self) -> usize {
        self.metric.p
    }

    fn eval(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError> {
        let n = self.metric.p;
        let g = self.metric.g_at(p)?;
        let gi = linalg::invert(&g, n, "g")?;
        let g00 = self.metric.g00_at(p)?;
        let gi00 = Jet::constant(1.0) / g00;
        let dg = self.frame.h_derivatives(p, |q| self.metric.g_at(q))?;
        let dg00 = self.frame.h_derivatives(p, |q| self.metric.g00.eval(q))?;
        let vg = self.frame.v_derivative(p, |q| self.metric.g_at(q))?;
        let vg00 = self.frame.v_derivative(p, |q| self.metric.g00.eval(q))?;
        let l = self.frame.algebroid().l_at(p)?;
        let base = self.baseline.at(p)?;
        let gg = |a: usize, b: usize| g[a * n + b];
        let ll = |c: usize, a: usize, b: usize| l[(c * n + a) * n + b];
        let zero = Jet::constant(0.0);

        let mut out = ConnectionValues::zero(n);
        for b in 0..n {
            for c in 0..n {
                let lowered: Vec<Jet> = (0..n)
                    .map(|e| {
                        let mut s = dg[c][e * n + b] + dg[b][e * n + c] - dg[e][b * n + c];
                        for t in 0..n {
                            s += gg(t, e) * ll(t, c, b) - gg(b, t) * ll(t, c, e) - gg(t, c) * ll(t, b, e);
                        }
                        s * 0.5
                    })
                    .collect();
                for a in 0..n {
                    out.hh[(a * n + b) * n + c] = (0..n).fold(zero, |acc, e| acc + gi[a * n + e] * lowered[e]);
                }
            }
        }
        for c in 0..n {
            out.hv[c] = base.hv[c] + gi00 * (dg00[c] - base.hv[c] * g00 * 2.0) * 0.5;
        }
        for b in 0..n {
            let lowered: Vec<Jet> = (0..n)
                .map(|e| {
                    let mut s = vg[b * n + e];
                    for t in 0..n {
                        s -= base.v(t, b) * gg(t, e) + base.v(t, e) * gg(b, t);
                    }
                    s
                })
                .collect();
            for a in 0..n {
                let corr = (0..n).fold(zero, |acc, e| acc + gi[a * n + e] * lowered[e]);
                out.vh[a * n + b] = base.v(a, b) + corr * 0.5;
            }
        }
        out.vv = gi00 * vg00 * 0.5;
        Ok(out)
    }
}

/// The connection of the construction theorem built over `baseline`.
pub fn metric_dconnection(g: &MetricStructure, baseline: &DConnectionCoeffs, frame: &AdaptedFrame) -> DConnectionCoeffs {
    DConnectionCoeffs::from_source(Arc::new(MetricConnection {
        metric: g.clone(),
        frame: frame.clone(),
        baseline: baseline.clone(),
    }))
}

/// Metric connection over the Berwald baseline.
pub fn canonical_metric_dconnection(g: &MetricStructure, frame: &AdaptedFrame) -> DConnectionCoeffs {
    metric_dconnection(g, &berwald(frame.connection()), frame)
}

pub const COMPATIBILITY_FAMILIES: [&str; 4] = ["g_ab|c", "g_00|c", "g_ab|0", "g_00|0"];

/// The four families `g_{αβ|γ}`, `g_{°°|γ}`, `g_{αβ}|_°`, `g_{°°}|_°`.
pub fn compatibility_families(
    g: &MetricStructure,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    samples: &[EPoint],
) -> Result<Vec<ResidualReport>, SampleError> {
    let (gh, gv) = (g.h_tensor(), g.v_tensor());
    let derived = [
        h_cov_deriv(&gh, frame, conn),
        h_cov_deriv(&gv, frame, conn),
        v_cov_deriv(&gh, frame, conn),
        v_cov_deriv(&gv, frame, conn),
    ];
    sweep_many(&COMPATIBILITY_FAMILIES, samples, |pt| {
        let jp = JetPoint::from(pt);
        derived.iter().map(|d| Ok(max_abs(d.eval(&jp)?.iter().map(|j| j.value())))).collect()
    })
}

/// Max over the four compatibility families.
pub fn compatibility_check(
    g: &MetricStructure,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    samples: &[EPoint],
) -> Result<ResidualReport, SampleError> {
    let fams = compatibility_families(g, conn, frame, samples)?;
    Ok(ResidualReport::combine("metric-compatibility", &fams))
}

/// `(is_H_riemannian, is_V_riemannian)`: whether g_{αβ}, resp. g_{°°}, are
/// independent of the fiber coordinate over the samples.
pub fn riemannian_flags(g: &MetricStructure, samples: &[EPoint]) -> Result<(bool, bool), SampleError> {
    let frame_free = crate::calculus::Tangent::axis(samples.first().map_or(0, |p| p.dim()), crate::calculus::Axis::Fiber);
    let r = sweep_many(&["h", "v"], samples, |pt| {
        let jp = JetPoint::from(pt);
        let (dg, dg00) = crate::calculus::derivative_along(&jp, &frame_free, |q| Ok((g.g_at(q)?, g.g00.eval(q)?)))?;
        Ok(vec![max_abs(dg.iter().map(|j| j.value())), dg00.value().abs()])
    })?;
    Ok((r[0].max_residual <= RIEMANNIAN_TOL, r[1].max_residual <= RIEMANNIAN_TOL))
}
