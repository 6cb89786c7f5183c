//! Lie algebroid data pulled back to the base M.
//!
//! `rho[α][i]` is the anchor component and `L[γ][α][β]` the structure
//! function, both already composed with the base map. They are stored as
//! fields on E that simply ignore the fiber coordinate.

use crate::calculus::{constant, derivative_along, EPoint, Field, Jet, JetPoint, Tangent};
use crate::error::{EvalError, SampleError, ShapeError};
use crate::report::{max_abs, sweep, ResidualReport};

#[derive(Clone, Debug)]
pub struct AlgebroidData {
    m: usize,
    p: usize,
    rho: Vec<Field>,
    l: Vec<Field>,
}

impl AlgebroidData {
    /// `rho` is p x m row-major (`rho[α * m + i]`), `l` is p x p x p (`l[(γ * p + α) * p + β]`).
    pub fn new(m: usize, p: usize, rho: Vec<Field>, l: Vec<Field>) -> Result<Self, ShapeError> {
        if m == 0 || p == 0 {
            return Err(ShapeError::Invalid("base dimension and rank must be positive".into()));
        }
        if rho.len() != p * m {
            return Err(ShapeError::Count { what: "rho", expected: p * m, found: rho.len() });
        }
        if l.len() != p * p * p {
            return Err(ShapeError::Count { what: "L", expected: p * p * p, found: l.len() });
        }
        Ok(AlgebroidData { m, p, rho, l })
    }

    /// The tangent bundle itself: identity anchor, vanishing structure functions.
    pub fn tangent(m: usize) -> Self {
        let rho = (0..m * m).map(|k| constant(if k / m == k % m { 1.0 } else { 0.0 })).collect();
        let l = (0..m * m * m).map(|_| constant(0.0)).collect();
        AlgebroidData { m, p: m, rho, l }
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.p
    }

    pub fn rho(&self, alpha: usize, i: usize) -> &Field {
        &self.rho[alpha * self.m + i]
    }

    pub fn l(&self, gamma: usize, alpha: usize, beta: usize) -> &Field {
        &self.l[(gamma * self.p + alpha) * self.p + beta]
    }

    pub fn rho_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.rho.iter().map(|f| f.eval(p)).collect()
    }

    pub fn l_at(&self, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
        self.l.iter().map(|f| f.eval(p)).collect()
    }

    /// The vector field X_α = rho^i_α ∂_i on E, given the anchor values.
    pub fn anchor_tangent(&self, rho: &[Jet], alpha: usize) -> Tangent {
        Tangent { x: rho[alpha * self.m..(alpha + 1) * self.m].to_vec(), y: Jet::constant(0.0) }
    }

    /// X_α applied to whatever `f` computes, for every α.
    pub fn anchor_derivatives<T, F>(&self, p: &JetPoint, f: F) -> Result<Vec<T>, EvalError>
    where
        T: crate::calculus::JetMap,
        F: Fn(&JetPoint) -> Result<T, EvalError>,
    {
        let rho = self.rho_at(p)?;
        (0..self.p).map(|a| derivative_along(p, &self.anchor_tangent(&rho, a), &f)).collect()
    }
}

/// max |L^γ_{αβ} + L^γ_{βα}|.
pub fn validate_antisymmetry(a: &AlgebroidData, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let p = a.rank();
    sweep("antisymmetry", samples, |pt| {
        let l = a.l_at(&JetPoint::from(pt))?;
        let idx = |g: usize, x: usize, y: usize| (g * p + x) * p + y;
        Ok(max_abs((0..p * p * p).map(|k| {
            let (g, x, y) = (k / (p * p), (k / p) % p, k % p);
            (l[idx(g, x, y)] + l[idx(g, y, x)]).value()
        })))
    })
}

/// max |L^γ_{αβ} rho^k_γ - (X_α(rho^k_β) - X_β(rho^k_α))|.
pub fn validate_anchor_compatibility(a: &AlgebroidData, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let (m, p) = (a.base_dim(), a.rank());
    sweep("anchor-compatibility", samples, |pt| {
        let jp = JetPoint::from(pt);
        let rho = a.rho_at(&jp)?;
        let l = a.l_at(&jp)?;
        let drho = a.anchor_derivatives(&jp, |q| a.rho_at(q))?;
        let mut worst = 0.0f64;
        for al in 0..p {
            for be in 0..p {
                for k in 0..m {
                    let lhs: f64 = (0..p).map(|g| l[(g * p + al) * p + be].value() * rho[g * m + k].value()).sum();
                    let rhs = drho[al][be * m + k].value() - drho[be][al * m + k].value();
                    worst = worst.max(max_abs([lhs - rhs]));
                }
            }
        }
        Ok(worst)
    })
}

/// max over δ of |Σ_cyc(αβγ) (X_α(L^δ_{βγ}) + L^δ_{αε} L^ε_{βγ})|.
pub fn validate_jacobi(a: &AlgebroidData, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let p = a.rank();
    sweep("jacobi", samples, |pt| {
        let jp = JetPoint::from(pt);
        let l = a.l_at(&jp)?;
        let dl = a.anchor_derivatives(&jp, |q| a.l_at(q))?;
        let at = |d: usize, x: usize, y: usize| l[(d * p + x) * p + y].value();
        let mut worst = 0.0f64;
        for al in 0..p {
            for be in 0..p {
                for ga in 0..p {
                    for de in 0..p {
                        let mut s = 0.0;
                        for (x, y, z) in [(al, be, ga), (be, ga, al), (ga, al, be)] {
                            s += dl[x][(de * p + y) * p + z].value();
                            s += (0..p).map(|e| at(de, x, e) * at(e, y, z)).sum::<f64>();
                        }
                        worst = worst.max(max_abs([s]));
                    }
                }
            }
        }
        Ok(worst)
    })
}

/// max |[X_α, X_β] x^k - L^γ_{αβ} X_γ x^k| with the commutator formed by
/// composing the first-order operators, i.e. through second-order jets.
pub fn commutator_residual(a: &AlgebroidData, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let (m, p) = (a.base_dim(), a.rank());
    sweep("anchor-commutator", samples, |pt| {
        let jp = JetPoint::from(pt);
        let rho = a.rho_at(&jp)?;
        let l = a.l_at(&jp)?;
        let apply = |outer: usize, inner: usize| -> Result<Vec<Jet>, EvalError> {
            let dir = a.anchor_tangent(&rho, outer);
            derivative_along(&jp, &dir, |q| {
                let rq = a.rho_at(q)?;
                derivative_along(q, &a.anchor_tangent(&rq, inner), |r| Ok(r.x.clone()))
            })
        };
        let mut worst = 0.0f64;
        for al in 0..p {
            for be in 0..p {
                let ab = apply(al, be)?;
                let ba = apply(be, al)?;
                for k in 0..m {
                    let expect: f64 = (0..p).map(|g| l[(g * p + al) * p + be].value() * rho[g * m + k].value()).sum();
                    worst = worst.max(max_abs([ab[k].value() - ba[k].value() - expect]));
                }
            }
        }
        Ok(worst)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::field;
    use crate::sampling::SampleBox;

    fn build(rho: [&str; 4], l212: &str, l221: &str) -> AlgebroidData {
        let rho = rho.iter().map(|s| field(s, 2).unwrap()).collect();
        let mut l: Vec<Field> = (0..8).map(|_| constant(0.0)).collect();
        l[(1 * 2 + 0) * 2 + 1] = field(l212, 2).unwrap();
        l[(1 * 2 + 1) * 2 + 0] = field(l221, 2).unwrap();
        AlgebroidData::new(2, 2, rho, l).unwrap()
    }

    fn samples() -> Vec<EPoint> {
        SampleBox::default_for(2).sample(64, crate::sampling::DEFAULT_SEED)
    }

    #[test]
    fn antisymmetry_examples() {
        let s = samples();
        let flat = AlgebroidData::tangent(2);
        assert_eq!(validate_antisymmetry(&flat, &s).unwrap().max_residual, 0.0);
        let good = build(["1", "0", "0", "1"], "1", "-1");
        assert_eq!(validate_antisymmetry(&good, &s).unwrap().max_residual, 0.0);
        let bad = build(["1", "0", "0", "1"], "1", "0");
        assert_eq!(validate_antisymmetry(&bad, &s).unwrap().max_residual, 1.0);
    }

    #[test]
    fn anchor_compatibility_examples() {
        let s = samples();
        assert_eq!(validate_anchor_compatibility(&AlgebroidData::tangent(2), &s).unwrap().max_residual, 0.0);
        let good = build(["1", "0", "0", "exp(x1)"], "1", "-1");
        assert!(validate_anchor_compatibility(&good, &s).unwrap().max_residual < 1e-15);
        let bad = build(["1", "0", "0", "exp(x1)"], "0", "0");
        let r = validate_anchor_compatibility(&bad, &s).unwrap();
        let worst = r.worst_point.unwrap();
        let expect = s.iter().map(|p| p.x[0].exp()).fold(0.0, f64::max);
        assert!((r.max_residual - expect).abs() < 1e-15);
        assert!((r.max_residual - worst.x[0].exp()).abs() < 1e-15);
    }

    #[test]
    fn jacobi_examples() {
        let s = samples();
        assert_eq!(validate_jacobi(&AlgebroidData::tangent(2), &s).unwrap().max_residual, 0.0);
        let good = build(["1", "0", "0", "exp(x1)"], "1", "-1");
        assert!(validate_jacobi(&good, &s).unwrap().max_residual < 1e-15);
        let solvable = build(["0", "0", "0", "0"], "1", "-1");
        assert_eq!(validate_jacobi(&solvable, &s).unwrap().max_residual, 0.0);
    }

    #[test]
    fn jacobi_detects_inconsistent_structure_functions() {
        // [e1,e2] = e1, [e2,e3] = e2: the cyclic sum of double brackets is -e1.
        let m = 1;
        let p = 3;
        let rho = (0..p * m).map(|_| constant(0.0)).collect();
        let mut l: Vec<Field> = (0..27).map(|_| constant(0.0)).collect();
        let set = |l: &mut Vec<Field>, g: usize, a: usize, b: usize, v: f64| {
            l[(g * 3 + a) * 3 + b] = constant(v);
            l[(g * 3 + b) * 3 + a] = constant(-v);
        };
        set(&mut l, 0, 0, 1, 1.0);
        set(&mut l, 1, 1, 2, 1.0);
        let a = AlgebroidData::new(m, p, rho, l).unwrap();
        let s = SampleBox::default_for(1).sample(4, 1);
        assert!(validate_jacobi(&a, &s).unwrap().max_residual > 0.5);
    }

    #[test]
    fn commutator_agrees_with_structure_functions() {
        let s = samples();
        let good = build(["1", "0", "0", "exp(x1)"], "1", "-1");
        assert!(commutator_residual(&good, &s).unwrap().max_residual < 1e-14);
        let bad = build(["1", "0", "0", "exp(x1)"], "0", "0");
        assert!(commutator_residual(&bad, &s).unwrap().max_residual > 0.3);
    }

    #[test]
    fn shape_is_checked() {
        let e = AlgebroidData::new(2, 2, vec![constant(1.0)], vec![]).unwrap_err();
        assert!(matches!(e, ShapeError::Count { what: "rho", .. }));
    }
}
