//! Distinguished linear connections and covariant derivatives of d-tensors.
//!
//! Coefficient conventions:
//!
//! ```text
//! D_{delta_γ} delta_β = H^α_{βγ} delta_α     D_{delta_γ} dot = H°_γ dot
//! D_{dot}     delta_β = V^α_β   delta_α     D_{dot}     dot = V°   dot
//! ```

use std::fmt;
use std::sync::Arc;

use crate::calculus::{derivative_along, EPoint, Field, Jet, JetMap, JetPoint};
use crate::error::{EvalError, SampleError, ShapeError};
use crate::nlconnection::{AdaptedFrame, CoordinateChange, NonlinearConnection};
use crate::report::{max_abs, sweep, ResidualReport};
use crate::sections::{anchor_image, DVector, DVectorField, VectorField};
use crate::tensor::Tensor;

/// The four coefficient families at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionValues<S> {
    /// H^α_{βγ} at `(α * p + β) * p + γ`.
    pub hh: Vec<S>,
    /// H°_γ.
    pub hv: Vec<S>,
    /// V^α_β at `α * p + β`.
    pub vh: Vec<S>,
    /// V°.
    pub vv: S,
}

impl<S: Copy> ConnectionValues<S> {
    pub fn rank(&self) -> usize {
        self.hv.len()
    }

    pub fn h(&self, a: usize, b: usize, c: usize) -> S {
        let p = self.rank();
        self.hh[(a * p + b) * p + c]
    }

    pub fn v(&self, a: usize, b: usize) -> S {
        self.vh[a * self.rank() + b]
    }
}

impl ConnectionValues<Jet> {
    pub fn zero(p: usize) -> Self {
        let z = Jet::constant(0.0);
        ConnectionValues { hh: vec![z; p * p * p], hv: vec![z; p], vh: vec![z; p * p], vv: z }
    }

    pub fn values(&self) -> ConnectionValues<f64> {
        let v = |s: &[Jet]| s.iter().map(|j| j.value()).collect();
        ConnectionValues { hh: v(&self.hh), hv: v(&self.hv), vh: v(&self.vh), vv: self.vv.value() }
    }
}

impl JetMap for ConnectionValues<Jet> {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self {
        ConnectionValues {
            hh: self.hh.into_iter().map(&mut *f).collect(),
            hv: self.hv.into_iter().map(&mut *f).collect(),
            vh: self.vh.into_iter().map(&mut *f).collect(),
            vv: f(self.vv),
        }
    }
}

/// Anything that can produce all connection coefficients at a point.
pub trait CoefficientSource: Send + Sync + fmt::Debug {
    fn rank(&self) -> usize;
    fn eval(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError>;
}

#[derive(Clone, Debug)]
pub struct DConnectionCoeffs {
    source: Arc<dyn CoefficientSource>,
}

impl DConnectionCoeffs {
    pub fn from_source(source: Arc<dyn CoefficientSource>) -> Self {
        DConnectionCoeffs { source }
    }

    /// Explicit coefficient tables: `hh` is p³, `hv` p, `vh` p².
    pub fn explicit(p: usize, hh: Vec<Field>, hv: Vec<Field>, vh: Vec<Field>, vv: Field) -> Result<Self, ShapeError> {
        if hh.len() != p * p * p {
            return Err(ShapeError::Count { what: "H (horizontal)", expected: p * p * p, found: hh.len() });
        }
        if hv.len() != p {
            return Err(ShapeError::Count { what: "H (vertical)", expected: p, found: hv.len() });
        }
        if vh.len() != p * p {
            return Err(ShapeError::Count { what: "V (horizontal)", expected: p * p, found: vh.len() });
        }
        Ok(Self::from_source(Arc::new(Explicit { p, hh, hv, vh, vv })))
    }

    pub fn zero(p: usize) -> Self {
        Self::from_fn(p, move |_| Ok(ConnectionValues::zero(p)))
    }

    pub fn from_fn<F>(p: usize, f: F) -> Self
    where
        F: Fn(&JetPoint) -> Result<ConnectionValues<Jet>, EvalError> + Send + Sync + 'static,
    {
        Self::from_source(Arc::new(FnSource { p, f }))
    }

    pub fn rank(&self) -> usize {
        self.source.rank()
    }

    pub fn at(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError> {
        self.source.eval(p)
    }

    pub fn values(&self, p: &EPoint) -> Result<ConnectionValues<f64>, EvalError> {
        Ok(self.at(&JetPoint::from(p))?.values())
    }
}

#[derive(Debug)]
struct Explicit {
    p: usize,
    hh: Vec<Field>,
    hv: Vec<Field>,
    vh: Vec<Field>,
    vv: Field,
}

impl CoefficientSource for Explicit {
    fn rank(&self) -> usize {
        self.p
    }

    fn eval(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError> {
        let ev = |fs: &[Field]| fs.iter().map(|f| f.eval(p)).collect::<Result<Vec<_>, _>>();
        Ok(ConnectionValues { hh: ev(&self.hh)?, hv: ev(&self.hv)?, vh: ev(&self.vh)?, vv: self.vv.eval(p)? })
    }
}

struct FnSource<F> {
    p: usize,
    f: F,
}

impl<F> fmt::Debug for FnSource<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSource").field("p", &self.p).finish()
    }
}

impl<F> CoefficientSource for FnSource<F>
where
    F: Fn(&JetPoint) -> Result<ConnectionValues<Jet>, EvalError> + Send + Sync,
{
    fn rank(&self) -> usize {
        self.p
    }

    fn eval(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError> {
        (self.f)(p)
    }
}

#[derive(Debug)]
struct Berwald {
    nlc: NonlinearConnection,
}

impl CoefficientSource for Berwald {
    fn rank(&self) -> usize {
        self.nlc.rank()
    }

    fn eval(&self, p: &JetPoint) -> Result<ConnectionValues<Jet>, EvalError> {
        let mut out = ConnectionValues::zero(self.nlc.rank());
        let dir = crate::calculus::Tangent::axis(p.dim(), crate::calculus::Axis::Fiber);
        out.hv = derivative_along(p, &dir, |q| self.nlc.gamma_at(q))?;
        Ok(out)
    }
}

/// The Berwald connection: H°_γ = ∂Γ_γ/∂y, every other family zero.
pub fn berwald(nlc: &NonlinearConnection) -> DConnectionCoeffs {
    DConnectionCoeffs::from_source(Arc::new(Berwald { nlc: nlc.clone() }))
}

/// Horizontal and vertical valences of a d-tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Valence {
    pub h_up: usize,
    pub h_down: usize,
    pub v_up: usize,
    pub v_down: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence { h_up: 0, h_down: 0, v_up: 0, v_down: 0 };

    pub fn new(h_up: usize, h_down: usize, v_up: usize, v_down: usize) -> Self {
        Valence { h_up, h_down, v_up, v_down }
    }

    pub fn h_slots(&self) -> usize {
        self.h_up + self.h_down
    }
}

type ComponentFn = dyn Fn(&JetPoint) -> Result<Vec<Jet>, EvalError> + Send + Sync;

/// A d-tensor field: components in the adapted frame, indexed row-major by
/// the horizontal indices (upper first, then lower). Vertical slots have
/// dimension one and only enter through their correction terms.
#[derive(Clone)]
pub struct DTensorField {
    valence: Valence,
    dim: usize,
    eval: Arc<ComponentFn>,
}

impl fmt::Debug for DTensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DTensorField").field("valence", &self.valence).field("dim", &self.dim).finish()
    }
}

impl DTensorField {
    pub fn new<F>(valence: Valence, dim: usize, f: F) -> Self
    where
        F: Fn(&JetPoint) -> Result<Vec<Jet>, EvalError> + Send + Sync + 'static,
    {
        DTensorField { valence, dim, eval: Arc::new(f) }
    }

    pub fn from_fields(valence: Valence, dim: usize, fields: Vec<Field>) -> Result<Self, ShapeError> {
        let expected = dim.pow(valence.h_slots() as u32);
        if fields.len() != expected {
            return Err(ShapeError::Count { what: "d-tensor components", expected, found: fields.len() });
        }
        Ok(Self::new(valence, dim, move |p| fields.iter().map(|f| f.eval(p)).collect()))
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.dim; self.valence.h_slots()]
    }

    pub fn len(&self) -> usize {
        self.dim.pow(self.valence.h_slots() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        (self.eval)(p)
    }

    pub fn values(&self, p: &EPoint) -> Result<Tensor<f64>, EvalError> {
        let v = self.eval(&JetPoint::from(p))?;
        Ok(Tensor::new(self.shape(), v.iter().map(|j| j.value()).collect()))
    }

    /// Outer product; upper indices of `self` then `other`, then the lower ones.
    pub fn tensor_product(&self, other: &DTensorField) -> DTensorField {
        assert_eq!(self.dim, other.dim, "index dimension mismatch");
        let (a, b) = (self.clone(), other.clone());
        let (va, vb) = (a.valence, b.valence);
        let valence = Valence {
            h_up: va.h_up + vb.h_up,
            h_down: va.h_down + vb.h_down,
            v_up: va.v_up + vb.v_up,
            v_down: va.v_down + vb.v_down,
        };
        let n = self.dim;
        DTensorField::new(valence, n, move |p| {
            let ta = a.eval(p)?;
            let tb = b.eval(p)?;
            let shape = vec![n; valence.h_slots()];
            let out = Tensor::from_fn(shape, |idx| {
                let (up, down) = idx.split_at(valence.h_up);
                let ia: Vec<usize> = up[..va.h_up].iter().chain(&down[..va.h_down]).copied().collect();
                let ib: Vec<usize> = up[va.h_up..].iter().chain(&down[va.h_down..]).copied().collect();
                ta[flat(&ia, n)] * tb[flat(&ib, n)]
            });
            Ok(out.into_data())
        })
    }
}

fn flat(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Apply the connection corrections shared by both covariant derivatives.
/// `mat(a, b)` is the coefficient that maps slot value `b` into `a`
/// (H^a_{bγ} or V^a_b), `vert` the vertical coefficient.
fn corrected(
    valence: Valence,
    n: usize,
    t: &[Jet],
    d: &[Jet],
    mat: impl Fn(usize, usize) -> Jet,
    vert: Jet,
) -> Vec<Jet> {
    let slots = valence.h_slots();
    let vshift = valence.v_up as f64 - valence.v_down as f64;
    let mut out = Vec::with_capacity(t.len());
    let mut idx = vec![0usize; slots];
    for (k, dk) in d.iter().enumerate() {
        let mut r = k;
        for s in (0..slots).rev() {
            idx[s] = r % n;
            r /= n;
        }
        let mut v = *dk;
        let mut probe = idx.clone();
        for s in 0..slots {
            let orig = idx[s];
            for a in 0..n {
                probe[s] = a;
                let other = t[flat(&probe, n)];
                if s < valence.h_up {
                    v += mat(orig, a) * other;
                } else {
                    v -= mat(a, orig) * other;
                }
            }
            probe[s] = orig;
        }
        if vshift != 0.0 {
            v += vert * t[k] * vshift;
        }
        out.push(v);
    }
    out
}

/// `T_{...|γ}` for every γ, appended as a trailing lower horizontal index.
pub fn h_cov_deriv(t: &DTensorField, frame: &AdaptedFrame, conn: &DConnectionCoeffs) -> DTensorField {
    let (t, frame, conn) = (t.clone(), frame.clone(), conn.clone());
    let n = t.dim;
    let valence = t.valence;
    let out_valence = Valence { h_down: valence.h_down + 1, ..valence };
    DTensorField::new(out_valence, n, move |p| {
        let base = t.eval(p)?;
        let dt = frame.h_derivatives(p, |q| t.eval(q))?;
        let c = conn.at(p)?;
        let per_gamma: Vec<Vec<Jet>> = (0..n)
            .map(|g| corrected(valence, n, &base, &dt[g], |a, b| c.h(a, b, g), c.hv[g]))
            .collect();
        let mut out = Vec::with_capacity(base.len() * n);
        for k in 0..base.len() {
            for pg in &per_gamma {
                out.push(pg[k]);
            }
        }
        Ok(out)
    })
}

/// `T...|_°`, recorded as one more lower vertical slot.
pub fn v_cov_deriv(t: &DTensorField, frame: &AdaptedFrame, conn: &DConnectionCoeffs) -> DTensorField {
    let (t, frame, conn) = (t.clone(), frame.clone(), conn.clone());
    let n = t.dim;
    let valence = t.valence;
    let out_valence = Valence { v_down: valence.v_down + 1, ..valence };
    DTensorField::new(out_valence, n, move |p| {
        let base = t.eval(p)?;
        let dt = frame.v_derivative(p, |q| t.eval(q))?;
        let c = conn.at(p)?;
        Ok(corrected(valence, n, &base, &dt, |a, b| c.v(a, b), c.vv))
    })
}

/// `D_X Y` for d-vector fields, straight from the coefficient conventions.
#[derive(Debug, Clone)]
pub struct CovariantDerivative {
    frame: AdaptedFrame,
    conn: DConnectionCoeffs,
    x: VectorField,
    y: VectorField,
}

impl DVectorField for CovariantDerivative {
    fn eval(&self, p: &JetPoint) -> Result<DVector<Jet>, EvalError> {
        let n = self.frame.rank();
        let x = self.x.eval(p)?;
        let y = self.y.eval(p)?;
        let u = anchor_image(&self.frame, &x, p)?;
        let dy = derivative_along(p, &u, |q| self.y.eval(q))?;
        let c = self.conn.at(p)?;
        let mut h = dy.h;
        for a in 0..n {
            for b in 0..n {
                let mut coeff = x.v * c.v(a, b);
                for g in 0..n {
                    coeff += x.h[g] * c.h(a, b, g);
                }
                h[a] += coeff * y.h[b];
            }
        }
        let mut vc = x.v * c.vv;
        for g in 0..n {
            vc += x.h[g] * c.hv[g];
        }
        Ok(DVector { h, v: dy.v + vc * y.v })
    }
}

pub fn covariant_derivative(frame: &AdaptedFrame, conn: &DConnectionCoeffs, x: VectorField, y: VectorField) -> VectorField {
    Arc::new(CovariantDerivative { frame: frame.clone(), conn: conn.clone(), x, y })
}

/// Residual of the four change relations between `conn` and `primed`.
///
/// ```text
/// H'^{α'}_{β'γ'} = Λ^{α'}_α [delta_γ(Λ^α_{β'}) + H^α_{βγ} Λ^β_{β'}] Λ^γ_{γ'}
/// H'°_{γ'}      = a [delta_γ(1/a) + H°_γ / a] Λ^γ_{γ'}
/// V'^{α'}_{β'}  = Λ^{α'}_α V^α_β Λ^β_{β'} / a
/// V'°           = V° / a + ∂_y(1/a)
/// ```
///
/// with `a = ∂y'/∂y`; the last term vanishes for fibrewise linear maps.
pub fn check_dconnection_transformation(
    conn: &DConnectionCoeffs,
    primed: &DConnectionCoeffs,
    change: &CoordinateChange,
    frame: &AdaptedFrame,
    samples: &[EPoint],
) -> Result<ResidualReport, SampleError> {
    let n = frame.rank();
    sweep("dconnection-transformation", samples, |pt| {
        let jp = JetPoint::from(pt);
        let q = JetPoint::from(&change.push(pt)?);
        let c = conn.at(&jp)?;
        let cp = primed.at(&q)?.values();
        let lam = change.lambda_at(&jp)?;
        let inv = change.lambda_inverse_at(&jp)?;
        let dinv = frame.h_derivatives(&jp, |r| change.lambda_inverse_at(r))?;
        let recip_a = |r: &JetPoint| change.fiber_jacobian(r).map(|f| Jet::constant(1.0) / f.dy_dy);
        let ra = recip_a(&jp)?;
        let a = Jet::constant(1.0) / ra;
        let dra = frame.h_derivatives(&jp, recip_a)?;
        let vra = frame.v_derivative(&jp, recip_a)?;

        let mut res = Vec::new();
        for ap in 0..n {
            for bp in 0..n {
                for gp in 0..n {
                    let mut rhs = Jet::constant(0.0);
                    for al in 0..n {
                        for ga in 0..n {
                            let mut inner = dinv[ga][al * n + bp];
                            for be in 0..n {
                                inner += c.h(al, be, ga) * inv[be * n + bp];
                            }
                            rhs += lam[ap * n + al] * inner * inv[ga * n + gp];
                        }
                    }
                    res.push(cp.h(ap, bp, gp) - rhs.value());
                }
                let mut rhs = Jet::constant(0.0);
                for al in 0..n {
                    for be in 0..n {
                        rhs += lam[ap * n + al] * c.v(al, be) * inv[be * n + bp];
                    }
                }
                res.push(cp.v(ap, bp) - (rhs * ra).value());
            }
        }
        for gp in 0..n {
            let mut rhs = Jet::constant(0.0);
            for ga in 0..n {
                rhs += a * (dra[ga] + c.hv[ga] * ra) * inv[ga * n + gp];
            }
            res.push(cp.hv[gp] - rhs.value());
        }
        res.push(cp.vv - (c.vv * ra + vra).value());
        Ok(max_abs(res))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::AlgebroidData;
    use crate::calculus::{constant, partial, Axis};
    use crate::expr::field;
    use crate::sampling::SampleBox;

    fn f(s: &str) -> Field {
        field(s, 2).unwrap()
    }

    fn flat_frame() -> AdaptedFrame {
        AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::zero(2)).unwrap()
    }

    #[test]
    fn berwald_examples() {
        let nlc = NonlinearConnection::new(vec![f("0.5*y0"), f("-2*y0")]);
        let c = berwald(&nlc).values(&EPoint::new(vec![0.1, 0.2], 1.3)).unwrap();
        assert_eq!(c.hv, vec![0.5, -2.0]);
        assert!(c.hh.iter().chain(&c.vh).all(|v| *v == 0.0) && c.vv == 0.0);
        let c = berwald(&NonlinearConnection::zero(2)).values(&EPoint::new(vec![0.1, 0.2], 1.3)).unwrap();
        assert!(c.hv.iter().all(|v| *v == 0.0));
        let nlc = NonlinearConnection::new(vec![f("x2*y0^2"), f("0")]);
        let c = berwald(&nlc).values(&EPoint::new(vec![0.1, 0.7], 3.0)).unwrap();
        assert!((c.hv[0] - 6.0 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn scalar_h_derivative_is_frame_derivative() {
        let fr = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(vec![f("x2*y0"), f("0")])).unwrap();
        let s = DTensorField::from_fields(Valence::SCALAR, 2, vec![f("x1*y0")]).unwrap();
        let conn = berwald(fr.connection());
        let d = h_cov_deriv(&s, &fr, &conn).values(&EPoint::new(vec![1.0, 2.0], 3.0)).unwrap();
        assert_eq!(d.data(), &[-3.0, 0.0]);
    }

    #[test]
    fn constant_vector_picks_up_connection() {
        let mut hh: Vec<Field> = (0..8).map(|_| constant(0.0)).collect();
        hh[0] = constant(0.75);
        let conn = DConnectionCoeffs::explicit(2, hh, vec![constant(0.0); 2], vec![constant(0.0); 4], constant(0.0)).unwrap();
        let z = DTensorField::from_fields(Valence::new(1, 0, 0, 0), 2, vec![constant(1.0), constant(0.0)]).unwrap();
        let d = h_cov_deriv(&z, &flat_frame(), &conn).values(&EPoint::new(vec![0.3, 0.1], 1.0)).unwrap();
        // (Z^α)_{|γ} at [α][γ]
        assert_eq!(d.get(&[0, 0]), 0.75);
        assert_eq!(d.get(&[1, 0]), 0.0);
        assert_eq!(d.get(&[0, 1]), 0.0);
    }

    #[test]
    fn vertical_metric_slot_cancels() {
        // g00 = e^{2y} with V° = 1: two lower vertical slots subtract 2 V° g00
        let conn = DConnectionCoeffs::explicit(
            2,
            (0..8).map(|_| constant(0.0)).collect(),
            vec![constant(0.0); 2],
            vec![constant(0.0); 4],
            constant(1.0),
        )
        .unwrap();
        let g00 = DTensorField::from_fields(Valence::new(0, 0, 0, 2), 2, vec![f("exp(2*y0)")]).unwrap();
        let d = v_cov_deriv(&g00, &flat_frame(), &conn).values(&EPoint::new(vec![0.3, 0.1], 0.8)).unwrap();
        assert!(d.data()[0].abs() < 1e-15);
        let plain = DTensorField::from_fields(Valence::SCALAR, 2, vec![f("exp(2*y0)")]).unwrap();
        let d = v_cov_deriv(&plain, &flat_frame(), &conn).values(&EPoint::new(vec![0.3, 0.1], 0.8)).unwrap();
        assert!((d.data()[0] - 2.0 * 1.6f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn flat_reduction_is_partial_derivative() {
        let fr = flat_frame();
        let conn = DConnectionCoeffs::zero(2);
        let comps = ["x1*x2", "sin(y0)", "exp(x2)", "y0*x1^2"];
        let t = DTensorField::from_fields(Valence::new(1, 1, 1, 0), 2, comps.iter().map(|s| f(s)).collect()).unwrap();
        let dh = h_cov_deriv(&t, &fr, &conn);
        let dv = v_cov_deriv(&t, &fr, &conn);
        for p in SampleBox::default_for(2).sample(10, 1) {
            let h = dh.values(&p).unwrap();
            let v = dv.values(&p).unwrap();
            for (k, s) in comps.iter().enumerate() {
                let fld = f(s);
                for g in 0..2 {
                    let exact = partial(fld.as_ref(), &p, Axis::X(g)).unwrap();
                    assert!((h.data()[k * 2 + g] - exact).abs() < 1e-12);
                }
                let exact = partial(fld.as_ref(), &p, Axis::Fiber).unwrap();
                assert!((v.data()[k] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariant_derivative_of_frame_fields_reads_coefficients() {
        use crate::sections::{horizontal_frame, vertical_frame};
        let fr = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(vec![f("x2*y0"), f("y0^2")])).unwrap();
        let hh: Vec<Field> = (0..8).map(|k| f(&format!("{}*x1 + y0", k + 1))).collect();
        let conn = DConnectionCoeffs::explicit(2, hh, vec![f("x2"), f("2*y0")], vec![f("1"), f("x1"), f("x2"), f("y0")], f("3*x1")).unwrap();
        let p = EPoint::new(vec![0.4, -0.3], 1.2);
        let jp = JetPoint::from(&p);
        let c = conn.values(&p).unwrap();
        for g in 0..2 {
            for b in 0..2 {
                let d = covariant_derivative(&fr, &conn, horizontal_frame(2, g), horizontal_frame(2, b)).eval(&jp).unwrap().values();
                for a in 0..2 {
                    assert!((d.h[a] - c.h(a, b, g)).abs() < 1e-14);
                }
                assert_eq!(d.v, 0.0);
            }
            let d = covariant_derivative(&fr, &conn, horizontal_frame(2, g), vertical_frame(2)).eval(&jp).unwrap().values();
            assert!((d.v - c.hv[g]).abs() < 1e-14);
        }
        let d = covariant_derivative(&fr, &conn, vertical_frame(2), vertical_frame(2)).eval(&jp).unwrap().values();
        assert!((d.v - c.vv).abs() < 1e-14);
    }

    #[test]
    fn transformation_examples() {
        let fr = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(vec![f("x2*y0"), f("0")])).unwrap();
        let hh: Vec<Field> = (0..8).map(|k| f(&format!("{}*x1 + y0*x2", k + 1))).collect();
        let conn = DConnectionCoeffs::explicit(2, hh, vec![f("x2"), f("2*y0")], vec![f("1"), f("x1"), f("x2"), f("y0")], f("3*x1")).unwrap();
        let s = SampleBox::default_for(2).sample(12, 3);
        let id = CoordinateChange::identity(2, 2);
        assert_eq!(check_dconnection_transformation(&conn, &conn, &id, &fr, &s).unwrap().max_residual, 0.0);

        // y' = 2y: H and H° unchanged, V and V° halved, all evaluated at y = y'/2
        let mut ch = CoordinateChange::identity(2, 2);
        ch.fiber_map = f("2*y0");
        let hh: Vec<Field> = (0..8).map(|k| f(&format!("{}*x1 + (y0/2)*x2", k + 1))).collect();
        let primed = DConnectionCoeffs::explicit(
            2,
            hh,
            vec![f("x2"), f("y0")],
            vec![f("0.5"), f("x1/2"), f("x2/2"), f("y0/4")],
            f("1.5*x1"),
        )
        .unwrap();
        let r = check_dconnection_transformation(&conn, &primed, &ch, &fr, &s).unwrap();
        assert!(r.max_residual < 1e-14, "{}", r.max_residual);
        assert!(check_dconnection_transformation(&conn, &conn, &ch, &fr, &s).unwrap().max_residual > 0.1);
    }
}
