//! Sections of the generalized tangent bundle in adapted components.
//!
//! A d-vector field is `X = X^α delta_α + X° dot`. Its bracket is formed
//! from the anchor images on E: the horizontal part uses the structure
//! functions and derivations along the anchor image, the vertical part is
//! read off the commutator of the anchor images.

use std::fmt;
use std::sync::Arc;

use crate::calculus::{derivative_along, Field, Jet, JetMap, JetPoint, Tangent};
use crate::error::EvalError;
use crate::nlconnection::AdaptedFrame;

#[derive(Clone, Debug, PartialEq)]
pub struct DVector<S> {
    pub h: Vec<S>,
    pub v: S,
}

impl JetMap for DVector<Jet> {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self {
        DVector { h: self.h.into_iter().map(&mut *f).collect(), v: f(self.v) }
    }
}

impl DVector<Jet> {
    pub fn values(&self) -> DVector<f64> {
        DVector { h: self.h.iter().map(|j| j.value()).collect(), v: self.v.value() }
    }
}

pub trait DVectorField: Send + Sync + fmt::Debug {
    fn eval(&self, p: &JetPoint) -> Result<DVector<Jet>, EvalError>;
}

pub type VectorField = Arc<dyn DVectorField>;

/// `delta_β` (`Some(β)`) or `dot` (`None`), with constant components.
#[derive(Debug, Clone, Copy)]
pub struct FrameField {
    rank: usize,
    which: Option<usize>,
}

impl DVectorField for FrameField {
    fn eval(&self, _: &JetPoint) -> Result<DVector<Jet>, EvalError> {
        let mut h = vec![Jet::constant(0.0); self.rank];
        let mut v = Jet::constant(0.0);
        match self.which {
            Some(b) => h[b] = Jet::constant(1.0),
            None => v = Jet::constant(1.0),
        }
        Ok(DVector { h, v })
    }
}

pub fn horizontal_frame(rank: usize, beta: usize) -> VectorField {
    Arc::new(FrameField { rank, which: Some(beta) })
}

pub fn vertical_frame(rank: usize) -> VectorField {
    Arc::new(FrameField { rank, which: None })
}

/// A d-vector field from component fields.
#[derive(Debug, Clone)]
pub struct ComponentField {
    pub h: Vec<Field>,
    pub v: Field,
}

impl DVectorField for ComponentField {
    fn eval(&self, p: &JetPoint) -> Result<DVector<Jet>, EvalError> {
        Ok(DVector { h: self.h.iter().map(|f| f.eval(p)).collect::<Result<_, _>>()?, v: self.v.eval(p)? })
    }
}

pub fn from_components(h: Vec<Field>, v: Field) -> VectorField {
    Arc::new(ComponentField { h, v })
}

/// Anchor image of `x` at `p` as a tangent vector on E.
pub fn anchor_image(frame: &AdaptedFrame, x: &DVector<Jet>, p: &JetPoint) -> Result<Tangent, EvalError> {
    let dirs = frame.directions(p)?;
    let m = frame.base_dim();
    let mut t = Tangent { x: vec![Jet::constant(0.0); m], y: x.v };
    for (a, d) in dirs.iter().enumerate() {
        for i in 0..m {
            t.x[i] += x.h[a] * d.x[i];
        }
        t.y += x.h[a] * d.y;
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct Bracket {
    frame: AdaptedFrame,
    x: VectorField,
    y: VectorField,
}

impl DVectorField for Bracket {
    fn eval(&self, p: &JetPoint) -> Result<DVector<Jet>, EvalError> {
        let frame = &self.frame;
        let n = frame.rank();
        let x0 = self.x.eval(p)?;
        let y0 = self.y.eval(p)?;
        let u = anchor_image(frame, &x0, p)?;
        let w = anchor_image(frame, &y0, p)?;
        let probe = |f: &VectorField, q: &JetPoint| -> Result<(Vec<Jet>, Jet), EvalError> {
            let comps = f.eval(q)?;
            let img = anchor_image(frame, &comps, q)?;
            Ok((comps.h, img.y))
        };
        let (u_yh, u_wy) = derivative_along(p, &u, |q| probe(&self.y, q))?;
        let (w_xh, w_uy) = derivative_along(p, &w, |q| probe(&self.x, q))?;
        let l = frame.algebroid().l_at(p)?;
        let gamma = frame.connection().gamma_at(p)?;
        let mut h = vec![Jet::constant(0.0); n];
        for g in 0..n {
            let mut v = u_yh[g] - w_xh[g];
            for a in 0..n {
                for b in 0..n {
                    v += x0.h[a] * y0.h[b] * l[(g * n + a) * n + b];
                }
            }
            h[g] = v;
        }
        let mut v = u_wy - w_uy;
        for g in 0..n {
            v += gamma[g] * h[g];
        }
        Ok(DVector { h, v })
    }
}

pub fn bracket(frame: &AdaptedFrame, x: VectorField, y: VectorField) -> VectorField {
    Arc::new(Bracket { frame: frame.clone(), x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::AlgebroidData;
    use crate::calculus::{constant, EPoint};
    use crate::expr::field;
    use crate::nlconnection::NonlinearConnection;
    use crate::sampling::SampleBox;

    fn nonabelian() -> AdaptedFrame {
        let rho = ["1", "0", "0", "exp(x1)"].iter().map(|s| field(s, 2).unwrap()).collect();
        let mut l: Vec<Field> = (0..8).map(|_| constant(0.0)).collect();
        l[5] = constant(1.0);
        l[6] = constant(-1.0);
        let alg = AlgebroidData::new(2, 2, rho, l).unwrap();
        let g = ["x2*y0^2 + sin(x1)", "cos(x2)*y0"].iter().map(|s| field(s, 2).unwrap()).collect();
        AdaptedFrame::new(alg, NonlinearConnection::new(g)).unwrap()
    }

    #[test]
    fn frame_brackets_match_structure() {
        let fr = nonabelian();
        for pt in SampleBox::default_for(2).sample(8, 2) {
            let jp = JetPoint::from(&pt);
            let r = fr.curvature_at(&jp).unwrap();
            let gy = fr.gamma_y_at(&jp).unwrap();
            let b = bracket(&fr, horizontal_frame(2, 0), horizontal_frame(2, 1)).eval(&jp).unwrap().values();
            assert!((b.h[0]).abs() < 1e-14);
            assert!((b.h[1] - 1.0).abs() < 1e-14);
            assert!((b.v - r[1].value()).abs() < 1e-12);
            let b = bracket(&fr, horizontal_frame(2, 1), vertical_frame(2)).eval(&jp).unwrap().values();
            assert!(b.h.iter().all(|v| v.abs() < 1e-14));
            assert!((b.v - gy[1].value()).abs() < 1e-12);
        }
    }

    #[test]
    fn leibniz_in_second_slot() {
        // [X, fY] = f[X, Y] + anchor(X)(f) Y
        let fr = nonabelian();
        let x = from_components(vec![field("x2", 2).unwrap(), field("y0", 2).unwrap()], field("x1*y0", 2).unwrap());
        let y = from_components(vec![field("1", 2).unwrap(), field("x1", 2).unwrap()], field("y0^2", 2).unwrap());
        let fy = from_components(
            vec![field("sin(x1)*y0", 2).unwrap(), field("sin(x1)*y0*x1", 2).unwrap()],
            field("sin(x1)*y0*y0^2", 2).unwrap(),
        );
        let f = field("sin(x1)*y0", 2).unwrap();
        let lhs = bracket(&fr, x.clone(), fy);
        let rhs = bracket(&fr, x.clone(), y.clone());
        for pt in SampleBox::default_for(2).sample(8, 4) {
            let jp = JetPoint::from(&pt);
            let l = lhs.eval(&jp).unwrap().values();
            let r = rhs.eval(&jp).unwrap().values();
            let fv = f.value(&pt).unwrap();
            let x0 = x.eval(&jp).unwrap();
            let u = anchor_image(&fr, &x0, &jp).unwrap();
            let uf = derivative_along(&jp, &u, |q| f.eval(q)).unwrap().value();
            let y0 = y.eval(&jp).unwrap().values();
            for g in 0..2 {
                assert!((l.h[g] - (fv * r.h[g] + uf * y0.h[g])).abs() < 1e-12);
            }
            assert!((l.v - (fv * r.v + uf * y0.v)).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let fr = nonabelian();
        let x = from_components(vec![field("x2", 2).unwrap(), field("y0", 2).unwrap()], field("x1", 2).unwrap());
        let y = from_components(vec![field("y0^2", 2).unwrap(), field("x1", 2).unwrap()], field("1", 2).unwrap());
        let pt = EPoint::new(vec![0.2, -0.5], 0.9);
        let jp = JetPoint::from(&pt);
        let a = bracket(&fr, x.clone(), y.clone()).eval(&jp).unwrap().values();
        let b = bracket(&fr, y, x).eval(&jp).unwrap().values();
        assert!((a.v + b.v).abs() < 1e-14);
        assert!(a.h.iter().zip(&b.h).all(|(p, q)| (p + q).abs() < 1e-14));
    }
}
