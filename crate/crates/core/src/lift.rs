//! Lifts of base curves into E and their parallelism ODEs.
//!
//! Under the pulled-back representation the curve `η∘h∘c` is just `c`, so
//! everything is evaluated at `(c(t), y°(t))`.

use crate::calculus::{derivative_along, Axis, EPoint, Field, Jet, JetPoint, Tangent};
use crate::dconnection::DConnectionCoeffs;
use crate::error::{EvalError, LiftError, SampleError, ShapeError};
use crate::expr::{parse_in, Env, Expr, ParseError, Scope};
use crate::nlconnection::AdaptedFrame;
use crate::report::{max_abs, sweep, ResidualReport};
use crate::sections::DVector;

pub const DEFAULT_STEPS: usize = 1000;
/// States larger than this are treated as a finite-time blow-up.
pub const BLOW_UP: f64 = 1e12;

/// A curve `t -> c(t)` in M given by coordinate expressions in `t`.
#[derive(Debug, Clone)]
pub struct BaseCurve {
    coords: Vec<Expr>,
    pub t0: f64,
    pub t1: f64,
}

impl BaseCurve {
    pub fn new(coords: Vec<Expr>, t0: f64, t1: f64) -> Self {
        BaseCurve { coords, t0, t1 }
    }

    pub fn parse(srcs: &[&str], t0: f64, t1: f64) -> Result<Self, ParseError> {
        let coords = srcs.iter().map(|s| parse_in(s, Scope::curve())).collect::<Result<_, _>>()?;
        Ok(BaseCurve { coords, t0, t1 })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn eval_jet(&self, t: Jet) -> Result<Vec<Jet>, EvalError> {
        let env = Env { x: &[], y: None, t: Some(t) };
        self.coords.iter().map(|e| e.eval(&env)).collect()
    }

    pub fn point(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        let env = Env { x: &[], y: None, t: Some(t) };
        self.coords.iter().map(|e| e.eval(&env)).collect()
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        let p = JetPoint::from(&EPoint::new(vec![t], 0.0));
        let v = derivative_along(&p, &Tangent::axis(1, Axis::X(0)), |q| self.eval_jet(q.x[0]))?;
        Ok(v.iter().map(|j| j.value()).collect())
    }
}

/// The lift morphism components `g^α_°` on M and an optional left inverse.
#[derive(Debug, Clone)]
pub struct LiftMorphism {
    pub g: Vec<Field>,
    pub gtilde: Option<Vec<Field>>,
}

impl LiftMorphism {
    pub fn new(g: Vec<Field>, gtilde: Option<Vec<Field>>) -> Result<Self, ShapeError> {
        if let Some(gt) = &gtilde {
            if gt.len() != g.len() {
                return Err(ShapeError::Count { what: "gtilde", expected: g.len(), found: gt.len() });
            }
        }
        Ok(LiftMorphism { g, gtilde })
    }

    pub fn rank(&self) -> usize {
        self.g.len()
    }

    pub fn g_at(&self, x: &[f64], y: f64) -> Result<Vec<f64>, EvalError> {
        let p = EPoint::new(x.to_vec(), y);
        self.g.iter().map(|f| f.value(&p)).collect()
    }

    /// max |g̃°_β g^α_° − δ^α_β| over the samples, read literally for every
    /// pair (α, β). `None` when no inverse was supplied.
    pub fn local_invertibility(&self, samples: &[EPoint]) -> Option<Result<ResidualReport, SampleError>> {
        let gt = self.gtilde.as_ref()?;
        let p = self.rank();
        Some(sweep("local-invertibility", samples, |pt| {
            let g: Vec<f64> = self.g.iter().map(|f| f.value(pt)).collect::<Result<_, _>>()?;
            let h: Vec<f64> = gt.iter().map(|f| f.value(pt)).collect::<Result<_, _>>()?;
            Ok(max_abs((0..p * p).map(|k| {
                let (a, b) = (k / p, k % p);
                h[b] * g[a] - if a == b { 1.0 } else { 0.0 }
            })))
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftState {
    pub t: f64,
    pub y: f64,
}

/// Sampled solution of an ODE; `states[k]` belongs to `t[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        let k = self.t.len() - 1;
        (self.t[k], &self.states[k])
    }

    /// The trajectory of a scalar state as lift states.
    pub fn lift_states(&self) -> Vec<LiftState> {
        self.t.iter().zip(&self.states).map(|(t, s)| LiftState { t: *t, y: s[s.len() - 1] }).collect()
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

fn too_big(s: &[f64]) -> bool {
    s.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP)
}

/// Classic fixed-step fourth-order Runge-Kutta on `[t0, t1]`.
pub fn rk4<F>(f: F, t0: f64, t1: f64, y0: &[f64], steps: usize) -> Result<Trajectory, LiftError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, EvalError>,
{
    if steps == 0 {
        return Err(LiftError::NoSteps);
    }
    let h = (t1 - t0) / steps as f64;
    let mut tr = Trajectory { t: vec![t0], states: vec![y0.to_vec()] };
    let mut y = y0.to_vec();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let ev = |t: f64, y: &[f64]| f(t, y).map_err(|source| LiftError::Eval { t, source });
        let blown = |y: &[f64]| LiftError::BlowUp { last_t: t, singularity: singularity_estimate(&f, t, y) };
        let stage = |t: f64, y: Vec<f64>| if too_big(&y) { Err(blown(&y)) } else { ev(t, &y) };
        let k1 = ev(t, &y)?;
        let k2 = stage(t + h / 2.0, axpy(h / 2.0, &k1, &y)).map_err(|_| blown(&y))?;
        let k3 = stage(t + h / 2.0, axpy(h / 2.0, &k2, &y)).map_err(|_| blown(&y))?;
        let k4 = stage(t + h, axpy(h, &k3, &y)).map_err(|_| blown(&y))?;
        let next: Vec<f64> = (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        if too_big(&next) {
            return Err(blown(&y));
        }
        y = next;
        tr.t.push(if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h });
        tr.states.push(y.clone());
    }
    Ok(tr)
}

/// `t + u/u'` on the largest component: exact for a Riccati pole.
fn singularity_estimate<F>(f: &F, t: f64, y: &[f64]) -> Option<f64>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, EvalError>,
{
    let d = f(t, y).ok()?;
    let i = (0..y.len()).max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()))?;
    let est = t + y[i] / d[i];
    (d[i] != 0.0 && est.is_finite() && est >= t).then_some(est)
}

/// Everything the lift ODEs need.
#[derive(Debug, Clone)]
pub struct LiftProblem {
    pub curve: BaseCurve,
    pub morphism: LiftMorphism,
    pub frame: AdaptedFrame,
}

impl LiftProblem {
    pub fn new(curve: BaseCurve, morphism: LiftMorphism, frame: AdaptedFrame) -> Result<Self, ShapeError> {
        if curve.dim() != frame.base_dim() {
            return Err(ShapeError::Count { what: "curve coordinates", expected: frame.base_dim(), found: curve.dim() });
        }
        if morphism.rank() != frame.rank() {
            return Err(ShapeError::Count { what: "lift morphism", expected: frame.rank(), found: morphism.rank() });
        }
        Ok(LiftProblem { curve, morphism, frame })
    }

    fn lifted(&self, t: f64, y: f64) -> Result<EPoint, EvalError> {
        Ok(EPoint::new(self.curve.point(t)?, y))
    }

    /// Σ_α Γ_α(c(t), y) g^α(c(t)).
    fn gamma_g(&self, t: f64, y: f64) -> Result<f64, EvalError> {
        let p = self.lifted(t, y)?;
        let g = self.morphism.g_at(&p.x, y)?;
        let gamma = self.frame.connection().gamma_at(&JetPoint::from(&p))?;
        Ok(gamma.iter().zip(&g).map(|(a, b)| a.value() * b).sum())
    }

    fn parallel_rhs(&self, t: f64, y: f64) -> Result<f64, EvalError> {
        Ok(-self.gamma_g(t, y)? * y)
    }
}

/// ρ̄ⁱ_α(c(t)) g^α(c(t)) y − dcⁱ/dt.
pub fn lift_condition_residual(lp: &LiftProblem, y: f64, t: f64) -> Result<Vec<f64>, EvalError> {
    let p = lp.lifted(t, y)?;
    let rho = lp.frame.algebroid().rho_at(&JetPoint::from(&p))?;
    let g = lp.morphism.g_at(&p.x, y)?;
    let v = lp.curve.velocity(t)?;
    let m = lp.frame.base_dim();
    Ok((0..m).map(|i| (0..g.len()).map(|a| rho[a * m + i].value() * g[a]).sum::<f64>() * y - v[i]).collect())
}

/// du/dt + Γ_α(c, u) g^α(c) u = 0.
pub fn integrate_parallel_lift(lp: &LiftProblem, y0: f64, steps: usize) -> Result<Trajectory, LiftError> {
    rk4(|t, s| Ok(vec![lp.parallel_rhs(t, s[0])?]), lp.curve.t0, lp.curve.t1, &[y0], steps)
}

/// dz^α/dt + H^α_{βγ}(c, y) z^β z^γ = 0, with `y` carried along by the
/// parallel-lift equation from `y0`. States are `[z^1..z^p, y]`.
pub fn integrate_horizontal_parallel(
    lp: &LiftProblem,
    conn: &DConnectionCoeffs,
    z0: &[f64],
    y0: f64,
    steps: usize,
) -> Result<Trajectory, LiftError> {
    let n = lp.frame.rank();
    let mut init = z0.to_vec();
    init.push(y0);
    rk4(
        |t, s| {
            let y = s[n];
            let c = conn.values(&lp.lifted(t, y)?)?;
            let mut out: Vec<f64> = (0..n)
                .map(|a| {
                    let mut v = 0.0;
                    for b in 0..n {
                        for g in 0..n {
                            v -= c.h(a, b, g) * s[b] * s[g];
                        }
                    }
                    v
                })
                .collect();
            out.push(lp.parallel_rhs(t, y)?);
            Ok(out)
        },
        lp.curve.t0,
        lp.curve.t1,
        &init,
        steps,
    )
}

/// du/dt + V°(c, u) u u = 0.
pub fn integrate_vertical_parallel(lp: &LiftProblem, conn: &DConnectionCoeffs, y0: f64, steps: usize) -> Result<Trajectory, LiftError> {
    rk4(
        |t, s| {
            let c = conn.values(&lp.lifted(t, s[0])?)?;
            Ok(vec![-c.vv * s[0] * s[0]])
        },
        lp.curve.t0,
        lp.curve.t1,
        &[y0],
        steps,
    )
}

/// Adapted components of the acceleration lift:
/// `(g^α y, dy/dt + Γ_α g^α y)`.
pub fn acceleration_lift(lp: &LiftProblem, y: f64, dy: f64, t: f64) -> Result<DVector<f64>, EvalError> {
    let p = lp.lifted(t, y)?;
    let g = lp.morphism.g_at(&p.x, y)?;
    let h: Vec<f64> = g.iter().map(|ga| ga * y).collect();
    Ok(DVector { v: dy + lp.gamma_g(t, y)? * y, h })
}

/// max |v-component of the acceleration lift| along a scalar trajectory,
/// with dy/dt from a five-point stencil on interior nodes.
pub fn horizontality_residual(lp: &LiftProblem, tr: &Trajectory) -> Result<ResidualReport, SampleError> {
    let ys: Vec<f64> = tr.states.iter().map(|s| s[s.len() - 1]).collect();
    let n = ys.len();
    let mut rep = ResidualReport::empty("horizontality");
    if n < 5 {
        return Ok(rep);
    }
    let h = tr.t[1] - tr.t[0];
    for k in 2..n - 2 {
        let dy = (ys[k - 2] - 8.0 * ys[k - 1] + 8.0 * ys[k + 1] - ys[k + 2]) / (12.0 * h);
        let pt = EPoint::new(vec![tr.t[k]], ys[k]);
        let a = acceleration_lift(lp, ys[k], dy, tr.t[k]).map_err(|e| SampleError::new(&pt, e))?;
        rep.record(a.v, &pt);
    }
    Ok(rep)
}

/// Observed order from errors at successively halved step sizes.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::AlgebroidData;
    use crate::calculus::constant;
    use crate::dconnection::ConnectionValues;
    use crate::expr::field;
    use crate::nlconnection::NonlinearConnection;

    fn frame(m: usize, gamma: &[&str]) -> AdaptedFrame {
        AdaptedFrame::new(AlgebroidData::tangent(m), NonlinearConnection::new(gamma.iter().map(|s| field(s, m).unwrap()).collect())).unwrap()
    }

    fn problem(curve: &[&str], t1: f64, g: &[&str], gamma: &[&str]) -> LiftProblem {
        let m = curve.len();
        let c = BaseCurve::parse(curve, 0.0, t1).unwrap();
        let g = LiftMorphism::new(g.iter().map(|s| field(s, m).unwrap()).collect(), None).unwrap();
        LiftProblem::new(c, g, frame(m, gamma)).unwrap()
    }

    fn const_conn(p: usize, h111: f64, vv: f64) -> DConnectionCoeffs {
        DConnectionCoeffs::from_fn(p, move |_| {
            let mut v = ConnectionValues::zero(p);
            v.hh[0] = Jet::constant(h111);
            v.vv = Jet::constant(vv);
            Ok(v)
        })
    }

    #[test]
    fn curve_velocity() {
        let c = BaseCurve::parse(&["sin(t)", "t^2"], 0.0, 1.0).unwrap();
        let v = c.velocity(0.3).unwrap();
        assert!((v[0] - 0.3f64.cos()).abs() < 1e-15);
        assert!((v[1] - 0.6).abs() < 1e-15);
        assert!(BaseCurve::parse(&["x1"], 0.0, 1.0).is_err());
    }

    #[test]
    fn lift_condition_examples() {
        let lp = problem(&["0.5*t", "-2*t"], 1.0, &["0.5", "-2"], &["0", "0"]);
        assert!(lift_condition_residual(&lp, 1.0, 0.4).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(lift_condition_residual(&lp, 0.0, 0.4).unwrap(), vec![-0.5, 2.0]);
        let lp = problem(&["1", "2"], 1.0, &["0", "0"], &["0", "0"]);
        assert!(lift_condition_residual(&lp, 3.7, 0.4).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parallel_with_zero_connection_is_constant() {
        let lp = problem(&["cos(t)", "t"], 2.0, &["1", "x1"], &["0", "0"]);
        let tr = integrate_parallel_lift(&lp, 1.3, DEFAULT_STEPS).unwrap();
        assert_eq!(tr.t.len(), DEFAULT_STEPS + 1);
        assert!(tr.states.iter().all(|s| (s[0] - 1.3).abs() <= 1e-12));
    }

    #[test]
    fn parallel_linear_closed_form() {
        let k = 0.7;
        let lp = problem(&["t", "0"], 2.0, &["1", "0"], &["0.7", "0"]);
        let tr = integrate_parallel_lift(&lp, 1.5, DEFAULT_STEPS).unwrap();
        for (t, s) in tr.t.iter().zip(&tr.states) {
            assert!((s[0] - 1.5 * (-k * t).exp()).abs() < 1e-9);
        }
    }

    fn linear_error(steps: usize) -> f64 {
        let lp = problem(&["t", "0"], 2.0, &["1", "0"], &["0.7", "0"]);
        let tr = integrate_parallel_lift(&lp, 1.5, steps).unwrap();
        (tr.last().1[0] - 1.5 * (-1.4f64).exp()).abs()
    }

    fn riccati_error(steps: usize) -> f64 {
        let lp = problem(&["t"], 2.0, &["1"], &["0"]);
        let tr = integrate_vertical_parallel(&lp, &const_conn(1, 0.0, 0.8), 1.2, steps).unwrap();
        (tr.last().1[0] - 1.2 / (1.0 + 0.8 * 1.2 * 2.0)).abs()
    }

    #[test]
    fn rk4_order() {
        for err in [linear_error as fn(usize) -> f64, riccati_error] {
            let e: Vec<f64> = [8, 16, 32].iter().map(|&n| err(n)).collect();
            for o in observed_orders(&e) {
                assert!((3.7..=4.3).contains(&o), "order {o}");
            }
        }
    }

    #[test]
    fn horizontal_riccati() {
        let (k, z0) = (0.6, 1.1);
        let lp = problem(&["t"], 3.0, &["1"], &["0"]);
        let tr = integrate_horizontal_parallel(&lp, &const_conn(1, k, 0.0), &[z0], 0.5, DEFAULT_STEPS).unwrap();
        for (t, s) in tr.t.iter().zip(&tr.states) {
            assert!((s[0] - z0 / (1.0 + k * z0 * t)).abs() < 1e-8);
            assert_eq!(s[1], 0.5);
        }
        let tr = integrate_horizontal_parallel(&lp, &DConnectionCoeffs::zero(1), &[z0], 0.5, 10).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == z0));
    }

    #[test]
    fn vertical_riccati_and_blow_up() {
        let lp = problem(&["t"], 2.0, &["1"], &["0"]);
        let tr = integrate_vertical_parallel(&lp, &const_conn(1, 0.0, 0.0), 0.9, 50).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 0.9));
        let tr = integrate_vertical_parallel(&lp, &const_conn(1, 0.0, 0.5), 0.9, DEFAULT_STEPS).unwrap();
        for (t, s) in tr.t.iter().zip(&tr.states) {
            assert!((s[0] - 0.9 / (1.0 + 0.5 * 0.9 * t)).abs() < 1e-8);
        }
        // pole at t = -1/(k y0) = 1
        match integrate_vertical_parallel(&lp, &const_conn(1, 0.0, 1.0), -1.0, DEFAULT_STEPS) {
            Err(LiftError::BlowUp { last_t, singularity }) => {
                assert!(last_t > 0.9 && last_t <= 1.01, "{last_t} {singularity:?}");
                assert!((singularity.unwrap() - 1.0).abs() < 1e-2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn acceleration_lift_examples() {
        let lp = problem(&["t", "t^2"], 1.0, &["1", "x1"], &["0", "0"]);
        let a = acceleration_lift(&lp, 2.0, 0.0, 0.5).unwrap();
        assert_eq!(a.v, 0.0);
        assert_eq!(a.h, vec![2.0, 1.0]);
        // y(t) = t
        assert_eq!(acceleration_lift(&lp, 0.5, 1.0, 0.5).unwrap().v, 1.0);
    }

    #[test]
    fn parallel_lift_is_horizontal() {
        let lp = problem(&["cos(t)", "sin(t)"], 2.0, &["-x2", "x1"], &["x2*y0", "x1^2*y0"]);
        let tr = integrate_parallel_lift(&lp, 0.8, DEFAULT_STEPS).unwrap();
        let r = horizontality_residual(&lp, &tr).unwrap();
        assert!(r.max_residual < 1e-8, "{}", r.max_residual);
        assert_eq!(r.samples, DEFAULT_STEPS - 3);
        // a perturbed trajectory is not horizontal
        let mut bad = tr.clone();
        for (t, s) in bad.t.iter().zip(bad.states.iter_mut()) {
            s[0] += 0.01 * t;
        }
        assert!(horizontality_residual(&lp, &bad).unwrap().max_residual > 1e-3);
    }

    #[test]
    fn local_invertibility_is_literal() {
        let s = crate::sampling::SampleBox::default_for(1).sample(5, 1);
        let one = LiftMorphism::new(vec![field("exp(x1)", 1).unwrap()], Some(vec![field("exp(-x1)", 1).unwrap()])).unwrap();
        assert!(one.local_invertibility(&s).unwrap().unwrap().max_residual < 1e-15);
        assert!(LiftMorphism::new(vec![constant(1.0)], None).unwrap().local_invertibility(&s).is_none());
        let two = LiftMorphism::new(vec![constant(1.0), constant(0.0)], Some(vec![constant(1.0), constant(0.0)])).unwrap();
        assert_eq!(two.local_invertibility(&s).unwrap().unwrap().max_residual, 1.0);
    }
}
