//! Nonlinear connection, adapted frame, and chart changes.
//!
//! The adapted frame is `delta_γ = rho^i_γ ∂_i - Γ_γ ∂_y` together with
//! `dot = ∂_y`. Tensor components everywhere else in the crate are taken in
//! this frame.

use crate::algebroid::AlgebroidData;
use crate::calculus::{constant, derivative_along, Axis, EPoint, Field, Jet, JetMap, JetPoint, SmoothField, Tangent};
use crate::error::{EvalError, SampleError, ShapeError};
use crate::linalg;
use crate::report::{max_abs, sweep, sweep_many, ResidualReport};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct NonlinearConnection {
    gamma: Vec<Field>,
}

impl NonlinearConnection {
    pub fn new(gamma: Vec<Field>) -> Self {
        NonlinearConnection { gamma }
    }

    pub fn zero(p: usize) -> Self {
        NonlinearConnection { gamma: (0..p).map(|_| constant(0.0)).collect() }
    }

    pub fn rank(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self, alpha: usize) -> &Field {
        &self.gamma[alpha]
    }

    pub fn gamma_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.gamma.iter().map(|f| f.eval(p)).collect()
    }
}

/// Algebroid data plus a nonlinear connection: everything needed to move
/// along the adapted frame.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    alg: AlgebroidData,
    nlc: NonlinearConnection,
}

impl AdaptedFrame {
    pub fn new(alg: AlgebroidData, nlc: NonlinearConnection) -> Result<Self, ShapeError> {
        if nlc.rank() != alg.rank() {
            return Err(ShapeError::Count { what: "Gamma", expected: alg.rank(), found: nlc.rank() });
        }
        Ok(AdaptedFrame { alg, nlc })
    }

    pub fn algebroid(&self) -> &AlgebroidData {
        &self.alg
    }

    pub fn connection(&self) -> &NonlinearConnection {
        &self.nlc
    }

    pub fn base_dim(&self) -> usize {
        self.alg.base_dim()
    }

    pub fn rank(&self) -> usize {
        self.alg.rank()
    }

    /// Anchor images of delta_1..delta_p at `p` as tangent vectors on E.
    pub fn directions(&self, p: &JetPoint) -> Result<Vec<Tangent>, EvalError> {
        let m = self.base_dim();
        let rho = self.alg.rho_at(p)?;
        let gamma = self.nlc.gamma_at(p)?;
        Ok((0..self.rank())
            .map(|a| Tangent { x: rho[a * m..(a + 1) * m].to_vec(), y: -gamma[a] })
            .collect())
    }

    pub fn vertical(&self) -> Tangent {
        Tangent::axis(self.base_dim(), Axis::Fiber)
    }

    /// delta_γ of whatever `f` computes, for every γ.
    pub fn h_derivatives<T, F>(&self, p: &JetPoint, f: F) -> Result<Vec<T>, EvalError>
    where
        T: JetMap,
        F: Fn(&JetPoint) -> Result<T, EvalError>,
    {
        self.directions(p)?.iter().map(|d| derivative_along(p, d, &f)).collect()
    }

    /// ∂_y of whatever `f` computes.
    pub fn v_derivative<T, F>(&self, p: &JetPoint, f: F) -> Result<T, EvalError>
    where
        T: JetMap,
        F: FnOnce(&JetPoint) -> Result<T, EvalError>,
    {
        derivative_along(p, &self.vertical(), f)
    }

    /// ∂Γ_α/∂y for every α.
    pub fn gamma_y_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.v_derivative(p, |q| self.nlc.gamma_at(q))
    }

    /// R°_{αβ} = delta_β(Γ_α) - delta_α(Γ_β) + L^γ_{αβ} Γ_γ, row-major p x p.
    pub fn curvature_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        let n = self.rank();
        let gamma = self.nlc.gamma_at(p)?;
        let dg = self.h_derivatives(p, |q| self.nlc.gamma_at(q))?;
        let l = self.alg.l_at(p)?;
        let mut out = vec![Jet::constant(0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut v = dg[b][a] - dg[a][b];
                for g in 0..n {
                    v += l[(g * n + a) * n + b] * gamma[g];
                }
                out[a * n + b] = v;
            }
        }
        Ok(out)
    }
}

/// rho^i_γ ∂f/∂x^i - Γ_γ ∂f/∂y at `p`.
pub fn h_derivative(f: &dyn SmoothField, gamma: usize, frame: &AdaptedFrame, p: &EPoint) -> Result<f64, EvalError> {
    let jp = JetPoint::from(p);
    let dir = frame.directions(&jp)?.swap_remove(gamma);
    derivative_along(&jp, &dir, |q| f.eval(q)).map(|j| j.value())
}

/// The bracket curvature R°_{αβ} at `p`.
pub fn nlc_curvature(frame: &AdaptedFrame, p: &EPoint) -> Result<Tensor<f64>, EvalError> {
    let n = frame.rank();
    let r = frame.curvature_at(&JetPoint::from(p))?;
    Ok(Tensor::new(vec![n, n], r.iter().map(|j| j.value()).collect()))
}

/// Residuals of the adapted-frame bracket relations, with the brackets taken
/// by composing the anchor images as first-order operators on the coordinate
/// functions x^k and y:
///
/// `[delta_α, delta_β] = L^γ_{αβ} delta_γ + R°_{αβ} dot` and
/// `[delta_α, dot] = (∂Γ_α/∂y) dot`.
pub fn frame_bracket_residual(frame: &AdaptedFrame, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let (m, n) = (frame.base_dim(), frame.rank());
    sweep("frame-brackets", samples, |pt| {
        let jp = JetPoint::from(pt);
        let coords = |q: &JetPoint| -> Result<Vec<Jet>, EvalError> {
            let mut v = q.x.clone();
            v.push(q.y);
            Ok(v)
        };
        // second[a][b] = U_a(U_b(coords)), U_n = dot
        let mut second = Vec::with_capacity(n + 1);
        for a in 0..=n {
            let dir = if a < n { frame.directions(&jp)?.swap_remove(a) } else { frame.vertical() };
            let inner = derivative_along(&jp, &dir, |q| {
                let mut dirs = frame.directions(q)?;
                dirs.push(frame.vertical());
                dirs.iter().map(|d| derivative_along(q, d, coords)).collect::<Result<Vec<_>, _>>()
            })?;
            second.push(inner);
        }
        let dirs = frame.directions(&jp)?;
        let l = frame.algebroid().l_at(&jp)?;
        let r = frame.curvature_at(&jp)?;
        let gy = frame.gamma_y_at(&jp)?;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..=n {
                let comm: Vec<f64> = (0..=m).map(|k| second[a][b][k].value() - second[b][a][k].value()).collect();
                let mut expect = vec![0.0; m + 1];
                if b < n {
                    for g in 0..n {
                        let c = l[(g * n + a) * n + b].value();
                        for i in 0..m {
                            expect[i] += c * dirs[g].x[i].value();
                        }
                        expect[m] += c * dirs[g].y.value();
                    }
                    expect[m] += r[a * n + b].value();
                } else {
                    expect[m] = gy[a].value();
                }
                worst = worst.max(max_abs(comm.iter().zip(&expect).map(|(c, e)| c - e)));
            }
        }
        Ok(worst)
    })
}

/// A fibred chart change `(x, y) -> (x'(x), y'(x, y))` with a frame change
/// `z^{α'} = Λ^{α'}_α z^α` on the algebroid.
#[derive(Clone, Debug)]
pub struct CoordinateChange {
    /// x'^i as fields of x.
    pub base_map: Vec<Field>,
    /// x^i as fields of x' (evaluated with the primed coordinates in the x slots).
    pub base_inverse: Vec<Field>,
    /// y' as a field of (x, y).
    pub fiber_map: Field,
    /// Λ^{α'}_α, row α', as fields of x.
    pub lambda: Vec<Field>,
    /// Optional closed form of Λ^α_{α'}; computed pointwise when absent.
    pub lambda_inverse: Option<Vec<Field>>,
}

/// ∂y'/∂y and ∂y/∂x^k at fixed y', at one point.
pub struct FiberJacobian {
    pub dy_dy: Jet,
    pub dy_dx: Vec<Jet>,
}

impl CoordinateChange {
    pub fn identity(m: usize, p: usize) -> Self {
        let coord = |i: usize| crate::calculus::from_fn(move |q| Ok(q.x[i]));
        CoordinateChange {
            base_map: (0..m).map(coord).collect(),
            base_inverse: (0..m).map(coord).collect(),
            fiber_map: crate::calculus::from_fn(|q| Ok(q.y)),
            lambda: (0..p * p).map(|k| constant(if k / p == k % p { 1.0 } else { 0.0 })).collect(),
            lambda_inverse: None,
        }
    }

    pub fn rank(&self) -> usize {
        (self.lambda.len() as f64).sqrt().round() as usize
    }

    /// Image of a point in the primed chart.
    pub fn push(&self, p: &EPoint) -> Result<EPoint, EvalError> {
        let x = self.base_map.iter().map(|f| f.value(p)).collect::<Result<_, _>>()?;
        Ok(EPoint { x, y: self.fiber_map.value(p)? })
    }

    pub fn lambda_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.lambda.iter().map(|f| f.eval(p)).collect()
    }

    /// Λ^α_{α'}, row α.
    pub fn lambda_inverse_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        match &self.lambda_inverse {
            Some(inv) => inv.iter().map(|f| f.eval(p)).collect(),
            None => linalg::invert(&self.lambda_at(p)?, self.rank(), "frame change"),
        }
    }

    pub fn fiber_jacobian(&self, p: &JetPoint) -> Result<FiberJacobian, EvalError> {
        let m = p.dim();
        let dy_dy = derivative_along(p, &Tangent::axis(m, Axis::Fiber), |q| self.fiber_map.eval(q))?;
        if dy_dy.value() == 0.0 {
            return Err(EvalError::Singular { what: "fiber map", condition: f64::INFINITY });
        }
        let dy_dx = (0..m)
            .map(|k| {
                derivative_along(p, &Tangent::axis(m, Axis::X(k)), |q| self.fiber_map.eval(q)).map(|d| -(d / dy_dy))
            })
            .collect::<Result<_, _>>()?;
        Ok(FiberJacobian { dy_dy, dy_dx })
    }

    /// Round-trip of the base map, Λ·Λ⁻¹ = I, and nonvanishing ∂y'/∂y.
    pub fn validate(&self, samples: &[EPoint]) -> Result<Vec<ResidualReport>, SampleError> {
        let n = self.rank();
        sweep_many(&["chart-roundtrip", "frame-inverse", "fiber-jacobian"], samples, |pt| {
            let q = self.push(pt)?;
            let back: Vec<f64> = self.base_inverse.iter().map(|f| f.value(&q)).collect::<Result<_, _>>()?;
            let rt = max_abs(back.iter().zip(&pt.x).map(|(a, b)| a - b));
            let jp = JetPoint::from(pt);
            let lam: Vec<f64> = self.lambda_at(&jp)?.iter().map(|j| j.value()).collect();
            let inv: Vec<f64> = self.lambda_inverse_at(&jp)?.iter().map(|j| j.value()).collect();
            let prod = linalg::matmul(&lam, &inv, n);
            let id = linalg::identity::<f64>(n);
            let fi = max_abs(prod.iter().zip(&id).map(|(a, b)| a - b));
            let fj = match self.fiber_jacobian(&jp) {
                Ok(_) => 0.0,
                Err(_) => f64::INFINITY,
            };
            Ok(vec![rt, fi, fj])
        })
    }
}

/// max |Γ'_{γ'}(x', y') - (∂y'/∂y)[rho^k_γ ∂y/∂x^k + Γ_γ] Λ^γ_{γ'}|.
pub fn check_nlc_transformation(
    frame: &AdaptedFrame,
    primed: &NonlinearConnection,
    change: &CoordinateChange,
    samples: &[EPoint],
) -> Result<ResidualReport, SampleError> {
    let (m, n) = (frame.base_dim(), frame.rank());
    sweep("nlc-transformation", samples, |pt| {
        let jp = JetPoint::from(pt);
        let q = JetPoint::from(&change.push(pt)?);
        let lhs = primed.gamma_at(&q)?;
        let rho = frame.algebroid().rho_at(&jp)?;
        let gamma = frame.connection().gamma_at(&jp)?;
        let inv = change.lambda_inverse_at(&jp)?;
        let fj = change.fiber_jacobian(&jp)?;
        let mut worst = 0.0f64;
        for gp in 0..n {
            let mut rhs = Jet::constant(0.0);
            for g in 0..n {
                let mut bracket = gamma[g];
                for k in 0..m {
                    bracket += rho[g * m + k] * fj.dy_dx[k];
                }
                rhs += fj.dy_dy * bracket * inv[g * n + gp];
            }
            worst = worst.max(max_abs([lhs[gp].value() - rhs.value()]));
        }
        Ok(worst)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::fd_partial;
    use crate::expr::field;
    use crate::sampling::SampleBox;

    fn frame(gamma: [&str; 2]) -> AdaptedFrame {
        let nlc = NonlinearConnection::new(gamma.iter().map(|s| field(s, 2).unwrap()).collect());
        AdaptedFrame::new(AlgebroidData::tangent(2), nlc).unwrap()
    }

    fn nonabelian(gamma: [&str; 2]) -> AdaptedFrame {
        let rho = ["1", "0", "0", "exp(x1)"].iter().map(|s| field(s, 2).unwrap()).collect();
        let mut l: Vec<Field> = (0..8).map(|_| constant(0.0)).collect();
        l[5] = constant(1.0);
        l[6] = constant(-1.0);
        let alg = AlgebroidData::new(2, 2, rho, l).unwrap();
        let nlc = NonlinearConnection::new(gamma.iter().map(|s| field(s, 2).unwrap()).collect());
        AdaptedFrame::new(alg, nlc).unwrap()
    }

    #[test]
    fn h_derivative_examples() {
        let f = field("x1*y0", 2).unwrap();
        let fr = frame(["0", "0"]);
        let p = EPoint::new(vec![1.0, 2.0], 3.0);
        assert_eq!(h_derivative(f.as_ref(), 0, &fr, &p).unwrap(), 3.0);
        let fr = frame(["x2*y0", "0"]);
        assert_eq!(h_derivative(f.as_ref(), 0, &fr, &p).unwrap(), -3.0);
        // fd cross-check of the same number
        let h = 1e-6;
        let fx = fd_partial(f.as_ref(), &p, Axis::X(0), h).unwrap();
        let fy = fd_partial(f.as_ref(), &p, Axis::Fiber, h).unwrap();
        assert!((fx - 6.0 * fy - (-3.0)).abs() < 1e-7);
        let y = field("y0", 2).unwrap();
        assert_eq!(h_derivative(y.as_ref(), 0, &fr, &p).unwrap(), -6.0);
    }

    #[test]
    fn curvature_examples() {
        let p = EPoint::new(vec![0.3, -0.4], 1.7);
        let r = nlc_curvature(&frame(["x2*y0", "0"]), &p).unwrap();
        assert_eq!(r.get(&[0, 1]), 1.7);
        assert_eq!(r.get(&[1, 0]), -1.7);
        let r = nlc_curvature(&frame(["0.5*y0", "-1.5*y0"]), &p).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        let r = nlc_curvature(&frame(["0", "0"]), &p).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn curvature_is_antisymmetric() {
        let fr = nonabelian(["x2*y0^2 + sin(x1)", "cos(x2)*y0"]);
        for p in SampleBox::default_for(2).sample(16, 3) {
            let r = nlc_curvature(&fr, &p).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(r.get(&[a, b]), -r.get(&[b, a]));
                }
            }
        }
    }

    #[test]
    fn bracket_oracle_agrees() {
        let s = SampleBox::default_for(2).sample(20, 11);
        for fr in [
            frame(["x2*y0", "0"]),
            frame(["x2*y0^2 + sin(x1)*y0", "exp(x1)*y0"]),
            nonabelian(["x2*y0^2 + sin(x1)", "cos(x2)*y0"]),
        ] {
            let r = frame_bracket_residual(&fr, &s).unwrap();
            assert!(r.max_residual < 1e-12, "{}", r.max_residual);
        }
    }

    #[test]
    fn transformation_examples() {
        let s = SampleBox::default_for(2).sample(16, 5);
        let fr = nonabelian(["x2*y0^2 + sin(x1)", "cos(x2)*y0"]);
        let id = CoordinateChange::identity(2, 2);
        let r = check_nlc_transformation(&fr, fr.connection(), &id, &s).unwrap();
        assert_eq!(r.max_residual, 0.0);

        // Λ = [[2, 1], [0, 1]] with inverse [[0.5, -0.5], [0, 1]]
        let mut ch = CoordinateChange::identity(2, 2);
        ch.lambda = ["2", "1", "0", "1"].iter().map(|s| field(s, 2).unwrap()).collect();
        let primed = NonlinearConnection::new(
            ["0.5*(x2*y0^2 + sin(x1))", "-0.5*(x2*y0^2 + sin(x1)) + cos(x2)*y0"]
                .iter()
                .map(|s| field(s, 2).unwrap())
                .collect(),
        );
        let r = check_nlc_transformation(&fr, &primed, &ch, &s).unwrap();
        assert!(r.max_residual < 1e-14, "{}", r.max_residual);

        // y' = 2y: Γ'(x, y') = 2 Γ(x, y'/2)
        let fr = frame(["x2*y0", "x1*y0^2"]);
        let mut ch = CoordinateChange::identity(2, 2);
        ch.fiber_map = field("2*y0", 2).unwrap();
        let primed = NonlinearConnection::new(
            ["x2*y0", "2*x1*(y0/2)^2"].iter().map(|s| field(s, 2).unwrap()).collect(),
        );
        let r = check_nlc_transformation(&fr, &primed, &ch, &s).unwrap();
        assert!(r.max_residual < 1e-14, "{}", r.max_residual);
        assert!(check_nlc_transformation(&fr, fr.connection(), &ch, &s).unwrap().max_residual > 0.1);
    }

    #[test]
    fn fiber_map_mixing_base_coordinates() {
        // y' = y e^{x1}: Γ' = Λ[Γ a - rho^i ∂_i φ] with a = e^{x1}, ∂_1 φ = y e^{x1}
        let fr = frame(["x2*y0", "0"]);
        let mut ch = CoordinateChange::identity(2, 2);
        ch.fiber_map = field("y0*exp(x1)", 2).unwrap();
        // in primed coordinates y = y' e^{-x1}
        let primed = NonlinearConnection::new(
            ["x2*y0 - y0", "0"].iter().map(|s| field(s, 2).unwrap()).collect(),
        );
        let s = SampleBox::default_for(2).sample(16, 9);
        let r = check_nlc_transformation(&fr, &primed, &ch, &s).unwrap();
        assert!(r.max_residual < 1e-13, "{}", r.max_residual);
        let v = ch.validate(&s).unwrap();
        assert!(v.iter().all(|r| r.max_residual < 1e-12));
    }
}
