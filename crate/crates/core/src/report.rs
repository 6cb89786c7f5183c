//! Max-reduced residual reports over sample sets.

use rayon::prelude::*;

use crate::calculus::EPoint;
use crate::error::{EvalError, SampleError};

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub max_residual: f64,
    pub worst_point: Option<EPoint>,
    pub samples: usize,
}

impl ResidualReport {
    pub fn empty(name: impl Into<String>) -> Self {
        ResidualReport { name: name.into(), max_residual: 0.0, worst_point: None, samples: 0 }
    }

    /// Fold one residual in; NaN is treated as infinitely bad.
    pub fn record(&mut self, r: f64, p: &EPoint) {
        let r = if r.is_nan() { f64::INFINITY } else { r.abs() };
        self.samples += 1;
        if self.worst_point.is_none() || r > self.max_residual {
            self.max_residual = r;
            self.worst_point = Some(p.clone());
        }
    }

    pub fn merge(mut self, other: &ResidualReport) -> Self {
        if other.worst_point.is_some() && (self.worst_point.is_none() || other.max_residual > self.max_residual) {
            self.max_residual = other.max_residual;
            self.worst_point = other.worst_point.clone();
        }
        self.samples = self.samples.max(other.samples);
        self
    }

    /// Max-merge several reports under a new name.
    pub fn combine<'a>(name: impl Into<String>, parts: impl IntoIterator<Item = &'a ResidualReport>) -> Self {
        parts.into_iter().fold(ResidualReport::empty(name), |acc, r| acc.merge(r))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Evaluate `f` at every sample and max-reduce each of its outputs into a
/// report named by `names`. Samples run in parallel; the reduction walks them
/// in order, so the result does not depend on scheduling.
pub fn sweep_many<F>(names: &[&str], samples: &[EPoint], f: F) -> Result<Vec<ResidualReport>, SampleError>
where
    F: Fn(&EPoint) -> Result<Vec<f64>, EvalError> + Sync,
{
    let results: Vec<_> = samples.par_iter().map(|p| f(p).map_err(|e| SampleError::new(p, e))).collect();
    let mut reports: Vec<_> = names.iter().map(|n| ResidualReport::empty(*n)).collect();
    for (p, r) in samples.iter().zip(results) {
        let r = r?;
        assert_eq!(r.len(), names.len(), "residual family count mismatch");
        for (rep, v) in reports.iter_mut().zip(r) {
            rep.record(v, p);
        }
    }
    Ok(reports)
}

pub fn sweep<F>(name: &str, samples: &[EPoint], f: F) -> Result<ResidualReport, SampleError>
where
    F: Fn(&EPoint) -> Result<f64, EvalError> + Sync,
{
    let mut v = sweep_many(&[name], samples, |p| f(p).map(|r| vec![r]))?;
    Ok(v.remove(0))
}

/// Largest absolute entry of an iterator of residuals.
pub fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_first_worst_sample() {
        let pts: Vec<_> = (0..4).map(|i| EPoint::new(vec![i as f64], 1.0)).collect();
        let r = sweep("r", &pts, |p| Ok(if p.x[0] >= 2.0 { 3.0 } else { 1.0 })).unwrap();
        assert_eq!(r.max_residual, 3.0);
        assert_eq!(r.worst_point.unwrap().x[0], 2.0);
        assert_eq!(r.samples, 4);
    }

    #[test]
    fn error_carries_sample() {
        let pts = vec![EPoint::new(vec![0.0], 1.0), EPoint::new(vec![5.0], 1.0)];
        let e = sweep("r", &pts, |p| if p.x[0] > 1.0 { Err(EvalError::DivisionByZero) } else { Ok(0.0) })
            .unwrap_err();
        assert_eq!(e.point.x[0], 5.0);
    }

    #[test]
    fn nan_is_worst() {
        assert_eq!(max_abs([1.0, f64::NAN, 2.0]), f64::INFINITY);
    }
}
