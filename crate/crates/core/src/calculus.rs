//! Forward-mode differentiation on E = M x K.
//!
//! A [`Jet`] is a truncated multivariate dual number: a polynomial in up to
//! [`MAX_ORDER`] nilpotent infinitesimals with `eps_i^2 = 0`. Coefficients are
//! indexed by subsets of the infinitesimals, so a jet that has seen `n`
//! directional bumps carries every mixed derivative along those directions.
//! Taking a derivative of something that is itself a derivative just spends
//! one more infinitesimal; no symbolic work happens anywhere.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use crate::error::EvalError;

/// Number of infinitesimals a jet can carry, i.e. the deepest derivative nesting.
pub const MAX_ORDER: usize = 4;
const WIDTH: usize = 1 << MAX_ORDER;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: u8,
    c: [f64; WIDTH],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &&self.c[..1 << self.order])
            .finish()
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Jet {
    pub const fn constant(v: f64) -> Jet {
        let mut c = [0.0; WIDTH];
        c[0] = v;
        Jet { order: 0, c }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    /// Coefficient of the monomial whose infinitesimals are the set bits of `mask`.
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c.get(mask).copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..1 << self.order].iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c[..1 << self.order].iter().all(|v| v.is_finite())
    }

    #[inline]
    fn width(&self) -> usize {
        1 << self.order
    }

    /// Attach `dir` as the coefficient of infinitesimal number `level`.
    fn attach(self, level: usize, dir: Jet) -> Jet {
        let mut out = Jet { order: (level + 1) as u8, c: [0.0; WIDTH] };
        let half = 1 << level;
        out.c[..half].copy_from_slice(&self.c[..half]);
        out.c[half..2 * half].copy_from_slice(&dir.c[..half]);
        out
    }

    /// Coefficient of infinitesimal number `level`, as a jet in the lower ones.
    pub fn extract(self, level: usize) -> Jet {
        if self.order as usize <= level {
            return Jet::constant(0.0);
        }
        let half = 1 << level;
        let mut out = Jet { order: level as u8, c: [0.0; WIDTH] };
        out.c[..half].copy_from_slice(&self.c[half..2 * half]);
        out
    }

    /// Drop every infinitesimal from `level` upward.
    pub fn truncate(self, level: usize) -> Jet {
        if self.order as usize <= level {
            return self;
        }
        let mut out = Jet { order: level as u8, c: [0.0; WIDTH] };
        out.c[..1 << level].copy_from_slice(&self.c[..1 << level]);
        out
    }

    /// `f(self)` given `d[k] = f^(k)(value)` for k up to the jet order.
    fn compose(self, d: &[f64]) -> Jet {
        let n = self.order as usize;
        if n == 0 {
            return Jet::constant(d[0]);
        }
        let mut delta = self;
        delta.c[0] = 0.0;
        let mut fact = 1.0;
        for k in 1..=n {
            fact *= k as f64;
        }
        // Horner in the nilpotent part; delta^(n+1) vanishes.
        let mut acc = Jet::constant(d[n] / fact);
        for k in (0..n).rev() {
            fact /= (k + 1) as f64;
            acc = acc * delta;
            acc.c[0] = d[k] / fact;
        }
        acc
    }

    pub fn exp(self) -> Jet {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn tan(self) -> Jet {
        let mut out = self.sin() * self.cos().recip();
        out.c[0] = self.c[0].tan();
        out
    }

    pub fn ln(self) -> Jet {
        let a = self.c[0];
        let mut d = [a.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut term = 1.0 / a;
        for (k, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = term;
            term *= -(k as f64) / a;
        }
        self.compose(&d)
    }

    pub fn recip(self) -> Jet {
        self.powf(-1.0).with_value(1.0 / self.c[0])
    }

    pub fn sqrt(self) -> Jet {
        self.powf(0.5).with_value(self.c[0].sqrt())
    }

    pub fn abs(self) -> Jet {
        if self.c[0] < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Power with a constant exponent.
    pub fn powf(self, b: f64) -> Jet {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut ff = 1.0;
        for (k, slot) in d.iter_mut().enumerate().take(self.order as usize + 1) {
            *slot = if ff == 0.0 { 0.0 } else { ff * a.powf(b - k as f64) };
            ff *= b - k as f64;
        }
        self.compose(&d)
    }

    /// Power with a jet exponent; constant exponents take the real-power path.
    pub fn pow(self, b: Jet) -> Jet {
        if b.is_constant() {
            return self.powf(b.c[0]);
        }
        (b * self.ln()).exp().with_value(self.c[0].powf(b.c[0]))
    }

    fn with_value(mut self, v: f64) -> Jet {
        self.c[0] = v;
        self
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, rhs: Jet) -> Jet {
        let (mut out, other) = if self.order >= rhs.order { (self, rhs) } else { (rhs, self) };
        for i in 0..other.width() {
            out.c[i] += other.c[i];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.max(rhs.order);
        let mut out = Jet { order, c: [0.0; WIDTH] };
        for i in 0..1usize << order {
            out.c[i] = self.c[i] - rhs.c[i];
        }
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(mut self) -> Jet {
        for i in 0..self.width() {
            self.c[i] = -self.c[i];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.max(rhs.order);
        let mut out = Jet { order, c: [0.0; WIDTH] };
        if order == 0 {
            out.c[0] = self.c[0] * rhs.c[0];
            return out;
        }
        if rhs.order == 0 {
            return self * rhs.c[0];
        }
        if self.order == 0 {
            return rhs * self.c[0];
        }
        for s in 0..1usize << order {
            let mut acc = 0.0;
            let mut t = s;
            loop {
                acc += self.c[t] * rhs.c[s ^ t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(mut self, rhs: f64) -> Jet {
        for i in 0..self.width() {
            self.c[i] *= rhs;
        }
        self
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.order == 0 {
            let mut out = self;
            for i in 0..out.width() {
                out.c[i] /= rhs.c[0];
            }
            return out;
        }
        (self * rhs.recip()).with_value(self.c[0] / rhs.c[0])
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::constant(0.0), |a, b| a + b)
    }
}

/// Arithmetic shared by plain reals and jets, so one evaluator serves both.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    fn is_constant(&self) -> bool;
    fn all_finite(&self) -> bool;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn pow(self, e: Self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn pow(self, e: Self) -> Self {
        self.powf(e)
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn is_constant(&self) -> bool {
        Jet::is_constant(self)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn exp(self) -> Self {
        Jet::exp(self)
    }
    fn ln(self) -> Self {
        Jet::ln(self)
    }
    fn sin(self) -> Self {
        Jet::sin(self)
    }
    fn cos(self) -> Self {
        Jet::cos(self)
    }
    fn tan(self) -> Self {
        Jet::tan(self)
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(self)
    }
    fn abs(self) -> Self {
        Jet::abs(self)
    }
    fn pow(self, e: Self) -> Self {
        Jet::pow(self, e)
    }
}

/// A point of E in coordinates (x^1..x^m, y).
#[derive(Clone, Debug, PartialEq)]
pub struct EPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl EPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        EPoint { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

impl fmt::Display for EPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.x.iter().enumerate() {
            write!(f, "x{}={}, ", i + 1, v)?;
        }
        write!(f, "y0={})", self.y)
    }
}

/// A tangent vector on E with jet-valued components.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub x: Vec<Jet>,
    pub y: Jet,
}

impl Tangent {
    pub fn axis(m: usize, axis: Axis) -> Tangent {
        let mut x = vec![Jet::constant(0.0); m];
        let mut y = Jet::constant(0.0);
        match axis {
            Axis::X(i) => x[i] = Jet::constant(1.0),
            Axis::Fiber => y = Jet::constant(1.0),
        }
        Tangent { x, y }
    }
}

/// A point of E whose coordinates carry `order` infinitesimals.
#[derive(Clone, Debug)]
pub struct JetPoint {
    pub x: Vec<Jet>,
    pub y: Jet,
    order: usize,
}

impl From<&EPoint> for JetPoint {
    fn from(p: &EPoint) -> Self {
        JetPoint {
            x: p.x.iter().map(|&v| Jet::constant(v)).collect(),
            y: Jet::constant(p.y),
            order: 0,
        }
    }
}

impl JetPoint {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn values(&self) -> EPoint {
        EPoint { x: self.x.iter().map(|j| j.value()).collect(), y: self.y.value() }
    }

    /// `self + eps * dir` with a fresh infinitesimal `eps`.
    pub fn bump(&self, dir: &Tangent) -> Result<JetPoint, EvalError> {
        let level = self.order;
        if level >= MAX_ORDER {
            return Err(EvalError::OrderExceeded { max: MAX_ORDER });
        }
        Ok(JetPoint {
            x: self.x.iter().zip(&dir.x).map(|(a, d)| a.attach(level, d.truncate(level))).collect(),
            y: self.y.attach(level, dir.y.truncate(level)),
            order: level + 1,
        })
    }
}

/// Containers of jets that can be differentiated as a unit.
pub trait JetMap: Sized {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self;
}

impl JetMap for Jet {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self {
        f(self)
    }
}

impl<T: JetMap> JetMap for Vec<T> {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self {
        self.into_iter().map(|t| t.map_jets(f)).collect()
    }
}

impl<A: JetMap, B: JetMap> JetMap for (A, B) {
    fn map_jets<F: FnMut(Jet) -> Jet>(self, f: &mut F) -> Self {
        (self.0.map_jets(f), self.1.map_jets(f))
    }
}

/// Directional derivative of whatever `f` computes, taken at `p` along `dir`.
pub fn derivative_along<T, F>(p: &JetPoint, dir: &Tangent, f: F) -> Result<T, EvalError>
where
    T: JetMap,
    F: FnOnce(&JetPoint) -> Result<T, EvalError>,
{
    let level = p.order();
    let q = p.bump(dir)?;
    let out = f(&q)?;
    Ok(out.map_jets(&mut |j| j.extract(level)))
}

/// A smooth scalar field on E.
pub trait SmoothField: Send + Sync + fmt::Debug {
    fn eval(&self, p: &JetPoint) -> Result<Jet, EvalError>;

    fn value(&self, p: &EPoint) -> Result<f64, EvalError> {
        self.eval(&JetPoint::from(p)).map(|j| j.value())
    }
}

pub type Field = Arc<dyn SmoothField>;

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SmoothField for Constant {
    fn eval(&self, _: &JetPoint) -> Result<Jet, EvalError> {
        Ok(Jet::constant(self.0))
    }
    fn value(&self, _: &EPoint) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}

pub fn constant(v: f64) -> Field {
    Arc::new(Constant(v))
}

pub struct FnField<F>(F);

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnField")
    }
}

impl<F> SmoothField for FnField<F>
where
    F: Fn(&JetPoint) -> Result<Jet, EvalError> + Send + Sync,
{
    fn eval(&self, p: &JetPoint) -> Result<Jet, EvalError> {
        (self.0)(p)
    }
}

pub fn from_fn<F>(f: F) -> Field
where
    F: Fn(&JetPoint) -> Result<Jet, EvalError> + Send + Sync + 'static,
{
    Arc::new(FnField(f))
}

/// A coordinate direction on E: `X(i)` is the (0-based) base coordinate x^(i+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X(usize),
    Fiber,
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op: "partial" })
    }
}

pub fn partial(f: &dyn SmoothField, p: &EPoint, axis: Axis) -> Result<f64, EvalError> {
    let jp = JetPoint::from(p);
    let d = derivative_along(&jp, &Tangent::axis(p.dim(), axis), |q| f.eval(q))?;
    finite(d.value())
}

/// Central difference `(f(p + h e) - f(p - h e)) / 2h`.
pub fn fd_partial(f: &dyn SmoothField, p: &EPoint, axis: Axis, h: f64) -> Result<f64, EvalError> {
    let shift = |s: f64| {
        let mut q = p.clone();
        match axis {
            Axis::X(i) => q.x[i] += s,
            Axis::Fiber => q.y += s,
        }
        q
    };
    let hi = f.value(&shift(h))?;
    let lo = f.value(&shift(-h))?;
    finite((hi - lo) / (2.0 * h))
}

/// Mixed second partial, differentiating along `a` first and then `b`.
pub fn second_partial(f: &dyn SmoothField, p: &EPoint, a: Axis, b: Axis) -> Result<f64, EvalError> {
    let jp = JetPoint::from(p);
    let m = p.dim();
    let d = derivative_along(&jp, &Tangent::axis(m, b), |q| {
        derivative_along(q, &Tangent::axis(m, a), |r| f.eval(r))
    })?;
    finite(d.value())
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;
