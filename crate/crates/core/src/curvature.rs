//! Torsion and curvature of a distinguished connection, their contractions,
//! and identity suites.
//!
//! Component conventions follow the frame action:
//!
//! ```text
//! T(delta_γ, delta_β) = T^α_{βγ} delta_α + T°_{βγ} dot
//! T(dot, delta_β)     = P^α_{β°} delta_α + P°_{β°} dot
//! R(delta_ε, delta_γ) delta_β = R^α_{βγε} delta_α
//! R(delta_ε, delta_γ) dot     = R°_{°γε} dot
//! R(dot, delta_γ) delta_ε     = P^α_{εγ°} delta_α
//! R(dot, delta_γ) dot         = P°_{°γ°} dot
//! ```
//!
//! The "natural" arrays index the frame `e_0..e_{p-1} = delta`, `e_p = dot`
//! and store `Tn[A][b][c] = T(e_b, e_c)^A`, `Rn[A][u][b][c] = (R(e_b, e_c) e_u)^A`.

use crate::calculus::{EPoint, Jet, JetMap, JetPoint};
use crate::dconnection::{covariant_derivative, h_cov_deriv, v_cov_deriv, ConnectionValues, DConnectionCoeffs, DTensorField, Valence};
use crate::error::{EvalError, SampleError};
use crate::metric::MetricStructure;
use crate::nlconnection::AdaptedFrame;
use crate::report::{max_abs, sweep, sweep_many, ResidualReport};
use crate::sections::{bracket, horizontal_frame, vertical_frame, DVector, VectorField};

#[derive(Clone, Debug, PartialEq)]
pub struct TorsionComponents<S> {
    /// T^α_{βγ} at `(α * p + β) * p + γ`.
    pub thh: Vec<S>,
    /// T°_{βγ} = R°_{βγ}.
    pub tv: Vec<S>,
    /// P^α_{β°} = V^α_β.
    pub ph: Vec<S>,
    /// P°_{β°}.
    pub pv: Vec<S>,
    pub s: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureComponents<S> {
    /// R^α_{βγε} at `((α * p + β) * p + γ) * p + ε`.
    pub rh: Vec<S>,
    /// R°_{°γε}.
    pub rv: Vec<S>,
    /// P^α_{εγ°} at `(α * p + ε) * p + γ`.
    pub ph: Vec<S>,
    /// P°_{°γ°}.
    pub pv: Vec<S>,
    /// S^α_{β°°}.
    pub sh: Vec<S>,
    /// S°_{°°°}.
    pub sv: S,
}

fn vals(v: &[Jet]) -> Vec<f64> {
    v.iter().map(|j| j.value()).collect()
}

impl TorsionComponents<Jet> {
    pub fn values(&self) -> TorsionComponents<f64> {
        TorsionComponents { thh: vals(&self.thh), tv: vals(&self.tv), ph: vals(&self.ph), pv: vals(&self.pv), s: self.s.value() }
    }
}

impl CurvatureComponents<Jet> {
    pub fn values(&self) -> CurvatureComponents<f64> {
        CurvatureComponents {
            rh: vals(&self.rh),
            rv: vals(&self.rv),
            ph: vals(&self.ph),
            pv: vals(&self.pv),
            sh: vals(&self.sh),
            sv: self.sv.value(),
        }
    }
}

impl<S: Copy> CurvatureComponents<S> {
    pub fn rank(&self) -> usize {
        self.pv.len()
    }

    pub fn r(&self, a: usize, b: usize, c: usize, e: usize) -> S {
        let p = self.rank();
        self.rh[((a * p + b) * p + c) * p + e]
    }
}

struct Ingredients {
    c: ConnectionValues<Jet>,
    l: Vec<Jet>,
    r0: Vec<Jet>,
    gy: Vec<Jet>,
}

fn ingredients(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &JetPoint) -> Result<Ingredients, EvalError> {
    Ok(Ingredients {
        c: conn.at(p)?,
        l: frame.algebroid().l_at(p)?,
        r0: frame.curvature_at(p)?,
        gy: frame.gamma_y_at(p)?,
    })
}

pub fn torsion_at(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &JetPoint) -> Result<TorsionComponents<Jet>, EvalError> {
    let n = frame.rank();
    let Ingredients { c, l, r0, gy } = ingredients(conn, frame, p)?;
    let mut thh = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                thh.push(c.h(a, b, g) - c.h(a, g, b) - l[(a * n + g) * n + b]);
            }
        }
    }
    let pv = (0..n).map(|b| gy[b] - c.hv[b]).collect();
    Ok(TorsionComponents { thh, tv: r0, ph: c.vh.clone(), pv, s: c.vv - c.vv })
}

pub fn curvature_at(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &JetPoint) -> Result<CurvatureComponents<Jet>, EvalError> {
    let n = frame.rank();
    let Ingredients { c, l, r0, gy } = ingredients(conn, frame, p)?;
    let dc = frame.h_derivatives(p, |q| conn.at(q))?;
    let vc = frame.v_derivative(p, |q| conn.at(q))?;
    let ll = |t: usize, a: usize, b: usize| l[(t * n + a) * n + b];
    let zero = Jet::constant(0.0);

    let mut rh = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                for e in 0..n {
                    let mut v = dc[e].h(a, b, g) - dc[g].h(a, b, e);
                    for t in 0..n {
                        v += c.h(a, t, e) * c.h(t, b, g) - c.h(a, t, g) * c.h(t, b, e) - ll(t, e, g) * c.h(a, b, t);
                    }
                    rh.push(v - r0[e * n + g] * c.v(a, b));
                }
            }
        }
    }
    let mut rv = Vec::with_capacity(n * n);
    for g in 0..n {
        for e in 0..n {
            let mut v = dc[e].hv[g] - dc[g].hv[e] + c.hv[e] * c.hv[g] - c.hv[g] * c.hv[e];
            for t in 0..n {
                v -= ll(t, e, g) * c.hv[t];
            }
            rv.push(v - r0[e * n + g] * c.vv);
        }
    }
    let mut ph = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for e in 0..n {
            for g in 0..n {
                let mut v = vc.h(a, e, g) - dc[g].v(a, e) + gy[g] * c.v(a, e);
                for t in 0..n {
                    v += c.v(a, t) * c.h(t, e, g) - c.h(a, t, g) * c.v(t, e);
                }
                ph.push(v);
            }
        }
    }
    let pv = (0..n).map(|g| vc.hv[g] - dc[g].vv + c.vv * c.hv[g] - c.hv[g] * c.vv + gy[g] * c.vv).collect();
    let mut sh = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let mut v = vc.v(a, b) - vc.v(a, b);
            for t in 0..n {
                v += c.v(a, t) * c.v(t, b) - c.v(a, t) * c.v(t, b);
            }
            sh.push(v);
        }
    }
    let sv = vc.vv - vc.vv + c.vv * c.vv - c.vv * c.vv + zero;
    Ok(CurvatureComponents { rh, rv, ph, pv, sh, sv })
}

pub fn torsion_components(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &EPoint) -> Result<TorsionComponents<f64>, EvalError> {
    Ok(torsion_at(conn, frame, &JetPoint::from(p))?.values())
}

pub fn curvature_components(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &EPoint) -> Result<CurvatureComponents<f64>, EvalError> {
    Ok(curvature_at(conn, frame, &JetPoint::from(p))?.values())
}

/// `Tn[A][b][c]`, flat over `(p + 1)^3`.
pub fn natural_torsion_at(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
    let n = frame.rank();
    let t = torsion_at(conn, frame, p)?;
    let big = n + 1;
    let mut out = vec![Jet::constant(0.0); big.pow(3)];
    let at = |a: usize, b: usize, c: usize| (a * big + b) * big + c;
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                out[at(a, b, c)] = t.thh[(a * n + c) * n + b];
            }
            out[at(n, b, c)] = t.tv[c * n + b];
        }
    }
    for c in 0..n {
        for a in 0..n {
            out[at(a, n, c)] = t.ph[a * n + c];
            out[at(a, c, n)] = -t.ph[a * n + c];
        }
        out[at(n, n, c)] = t.pv[c];
        out[at(n, c, n)] = -t.pv[c];
    }
    out[at(n, n, n)] = t.s;
    Ok(out)
}

/// `Rn[A][u][b][c]`, flat over `(p + 1)^4`.
pub fn natural_curvature_at(conn: &DConnectionCoeffs, frame: &AdaptedFrame, p: &JetPoint) -> Result<Vec<Jet>, EvalError> {
    let n = frame.rank();
    let r = curvature_at(conn, frame, p)?;
    let big = n + 1;
    let mut out = vec![Jet::constant(0.0); big.pow(4)];
    let at = |a: usize, u: usize, b: usize, c: usize| ((a * big + u) * big + b) * big + c;
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                for u in 0..n {
                    out[at(a, u, b, c)] = r.r(a, u, c, b);
                }
            }
            out[at(n, n, b, c)] = r.rv[c * n + b];
        }
    }
    for c in 0..n {
        for a in 0..n {
            for u in 0..n {
                out[at(a, u, n, c)] = r.ph[(a * n + u) * n + c];
                out[at(a, u, c, n)] = -r.ph[(a * n + u) * n + c];
            }
        }
        out[at(n, n, n, c)] = r.pv[c];
        out[at(n, n, c, n)] = -r.pv[c];
    }
    for a in 0..n {
        for u in 0..n {
            out[at(a, u, n, n)] = r.sh[a * n + u];
        }
    }
    out[at(n, n, n, n)] = r.sv;
    Ok(out)
}

/// `e_k` of the natural frame.
pub fn natural_frame(rank: usize, k: usize) -> VectorField {
    if k < rank {
        horizontal_frame(rank, k)
    } else {
        vertical_frame(rank)
    }
}

fn sub(a: DVector<Jet>, b: DVector<Jet>) -> DVector<Jet> {
    DVector { h: a.h.iter().zip(&b.h).map(|(x, y)| *x - *y).collect(), v: a.v - b.v }
}

/// `D_X Y - D_Y X - [X, Y]` at `p`.
pub fn torsion_from_definition_at(
    x: &VectorField,
    y: &VectorField,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    p: &JetPoint,
) -> Result<DVector<Jet>, EvalError> {
    let dxy = covariant_derivative(frame, conn, x.clone(), y.clone()).eval(p)?;
    let dyx = covariant_derivative(frame, conn, y.clone(), x.clone()).eval(p)?;
    let br = bracket(frame, x.clone(), y.clone()).eval(p)?;
    Ok(sub(sub(dxy, dyx), br))
}

pub fn torsion_from_definition(
    x: &VectorField,
    y: &VectorField,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    p: &EPoint,
) -> Result<DVector<f64>, EvalError> {
    Ok(torsion_from_definition_at(x, y, conn, frame, &JetPoint::from(p))?.values())
}

/// `D_Y D_Z X - D_Z D_Y X - D_{[Y,Z]} X` at `p`.
pub fn curvature_from_definition_at(
    y: &VectorField,
    z: &VectorField,
    x: &VectorField,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    p: &JetPoint,
) -> Result<DVector<Jet>, EvalError> {
    let cd = |a: &VectorField, b: VectorField| covariant_derivative(frame, conn, a.clone(), b);
    let yzx = cd(y, cd(z, x.clone())).eval(p)?;
    let zyx = cd(z, cd(y, x.clone())).eval(p)?;
    let brx = covariant_derivative(frame, conn, bracket(frame, y.clone(), z.clone()), x.clone()).eval(p)?;
    Ok(sub(sub(yzx, zyx), brx))
}

pub fn curvature_from_definition(
    y: &VectorField,
    z: &VectorField,
    x: &VectorField,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    p: &EPoint,
) -> Result<DVector<f64>, EvalError> {
    Ok(curvature_from_definition_at(y, z, x, conn, frame, &JetPoint::from(p))?.values())
}

pub const ORACLE_FAMILIES: [&str; 2] = ["torsion-oracle", "curvature-oracle"];

/// Closed-form components against the definitions over every frame
/// pair and triple.
pub fn oracle_equivalence(conn: &DConnectionCoeffs, frame: &AdaptedFrame, samples: &[EPoint]) -> Result<Vec<ResidualReport>, SampleError> {
    let n = frame.rank();
    let big = n + 1;
    let e: Vec<VectorField> = (0..big).map(|k| natural_frame(n, k)).collect();
    sweep_many(&ORACLE_FAMILIES, samples, |pt| {
        let jp = JetPoint::from(pt);
        let tn = natural_torsion_at(conn, frame, &jp)?;
        let rn = natural_curvature_at(conn, frame, &jp)?;
        let comp = |d: &DVector<Jet>, a: usize| if a < n { d.h[a].value() } else { d.v.value() };
        let mut tres = 0.0f64;
        let mut rres = 0.0f64;
        for b in 0..big {
            for c in 0..big {
                let t = torsion_from_definition_at(&e[b], &e[c], conn, frame, &jp)?;
                for a in 0..big {
                    tres = tres.max(max_abs([comp(&t, a) - tn[(a * big + b) * big + c].value()]));
                }
                for u in 0..big {
                    let r = curvature_from_definition_at(&e[b], &e[c], &e[u], conn, frame, &jp)?;
                    for a in 0..big {
                        rres = rres.max(max_abs([comp(&r, a) - rn[((a * big + u) * big + b) * big + c].value()]));
                    }
                }
            }
        }
        Ok(vec![tres, rres])
    })
}

/// Every S-block, from the closed forms and from the definitions.
pub fn s_block_check(conn: &DConnectionCoeffs, frame: &AdaptedFrame, samples: &[EPoint]) -> Result<ResidualReport, SampleError> {
    let n = frame.rank();
    let dot = vertical_frame(n);
    sweep("s-blocks", samples, |pt| {
        let jp = JetPoint::from(pt);
        let t = torsion_at(conn, frame, &jp)?;
        let r = curvature_at(conn, frame, &jp)?;
        let mut worst = max_abs(r.sh.iter().map(|j| j.value()).chain([t.s.value(), r.sv.value()]));
        let td = torsion_from_definition_at(&dot, &dot, conn, frame, &jp)?;
        worst = worst.max(max_abs(td.values().h.into_iter().chain([td.v.value()])));
        for u in 0..=n {
            let rd = curvature_from_definition_at(&dot, &dot, &natural_frame(n, u), conn, frame, &jp)?;
            worst = worst.max(max_abs(rd.values().h.into_iter().chain([rd.v.value()])));
        }
        Ok(worst)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RicciTensor {
    /// R_{αβ} = R^γ_{αβγ}.
    pub rab: Vec<f64>,
    /// P_{α°} = P^β_{αβ°}.
    pub pa0: Vec<f64>,
    /// P_{°β} = P°_{°β°}.
    pub p0b: Vec<f64>,
    pub s00: f64,
}

pub fn ricci(curv: &CurvatureComponents<f64>) -> RicciTensor {
    let n = curv.rank();
    let rab = (0..n * n).map(|k| (0..n).map(|g| curv.r(g, k / n, k % n, g)).sum()).collect();
    let pa0 = (0..n).map(|a| (0..n).map(|b| curv.ph[(b * n + a) * n + b]).sum()).collect();
    RicciTensor { rab, pa0, p0b: curv.pv.clone(), s00: curv.sv }
}

/// `R_{αβ} g̃^{αβ} + S_{°°} g̃^{°°}`.
pub fn scalar_curvature(ric: &RicciTensor, g: &MetricStructure, p: &EPoint) -> Result<f64, EvalError> {
    let n = g.rank();
    let jp = JetPoint::from(p);
    let inv = g.inverse_at(&jp)?;
    let g00 = g.g00_at(&jp)?.value();
    let h: f64 = (0..n * n).map(|k| ric.rab[k] * inv[k].value()).sum();
    Ok(h + ric.s00 / g00)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMomentum {
    pub tab: Vec<f64>,
    pub ta0: Vec<f64>,
    pub t0b: Vec<f64>,
    pub t00: f64,
    pub kappa: f64,
}

/// Solve the Einstein equations for the energy-momentum blocks.
pub fn energy_momentum(ric: &RicciTensor, scalar: f64, g: &MetricStructure, kappa: f64, p: &EPoint) -> Result<EnergyMomentum, EvalError> {
    if kappa == 0.0 {
        return Err(EvalError::ZeroKappa);
    }
    let jp = JetPoint::from(p);
    let gv = g.g_at(&jp)?;
    let g00 = g.g00_at(&jp)?.value();
    Ok(EnergyMomentum {
        tab: ric.rab.iter().zip(&gv).map(|(r, gk)| (r - 0.5 * scalar * gk.value()) / kappa).collect(),
        ta0: ric.pa0.iter().map(|v| -v / kappa).collect(),
        t0b: ric.p0b.iter().map(|v| v / kappa).collect(),
        t00: (ric.s00 - 0.5 * scalar * g00) / kappa,
        kappa,
    })
}

pub const RICCI_FAMILIES: [&str; 6] = ["Z h-h", "Z h-v", "Z v-v", "Y h-h", "Y h-v", "Y v-v"];

/// Commutation formulas for second covariant derivatives of the h part
/// `Z^α` and the v part `Y°` of `z`:
///
/// ```text
/// Z^α_{|γ|β} - Z^α_{|β|γ} = R^α_{θγβ} Z^θ + T^θ_{βγ} Z^α_{|θ} + T°_{βγ} Z^α|_°
/// Z^α_{|γ}|_° - Z^α|_°_{|γ} = P^α_{θγ°} Z^θ - P^θ_{γ°} Z^α_{|θ} - P°_{γ°} Z^α|_°
/// ```
///
/// and the same with `R°_{°γβ}`, `P°_{°γ°}` for `Y°`. The v-v family is
/// trivially zero in a one-dimensional fiber.
pub fn check_ricci_commutation(
    z: &VectorField,
    conn: &DConnectionCoeffs,
    frame: &AdaptedFrame,
    samples: &[EPoint],
) -> Result<Vec<ResidualReport>, SampleError> {
    let n = frame.rank();
    let (zf, yf) = (z.clone(), z.clone());
    let zh = DTensorField::new(Valence::new(1, 0, 0, 0), n, move |q| Ok(zf.eval(q)?.h));
    let yv = DTensorField::new(Valence::new(0, 0, 1, 0), n, move |q| Ok(vec![yf.eval(q)?.v]));
    let hd = |t: &DTensorField| h_cov_deriv(t, frame, conn);
    let vd = |t: &DTensorField| v_cov_deriv(t, frame, conn);
    let (zg, zv) = (hd(&zh), vd(&zh));
    let (zgb, zgv, zvg, zvv) = (hd(&zg), vd(&zg), hd(&zv), vd(&zv));
    let (yg, yvd) = (hd(&yv), vd(&yv));
    let (ygb, ygv, yvg, yvv) = (hd(&yg), vd(&yg), hd(&yvd), vd(&yvd));

    sweep_many(&RICCI_FAMILIES, samples, |pt| {
        let jp = JetPoint::from(pt);
        let ev = |t: &DTensorField| t.eval(&jp).map(|v| vals(&v));
        let t = torsion_at(conn, frame, &jp)?.values();
        let r = curvature_at(conn, frame, &jp)?.values();
        let (z0, zg, zv, zgb, zgv, zvg, zvv) = (ev(&zh)?, ev(&zg)?, ev(&zv)?, ev(&zgb)?, ev(&zgv)?, ev(&zvg)?, ev(&zvv)?);
        let (y0, yg, yv1, ygb, ygv, yvg, yvv) = (ev(&yv)?, ev(&yg)?, ev(&yvd)?, ev(&ygb)?, ev(&ygv)?, ev(&yvg)?, ev(&yvv)?);
        let th = |a: usize, b: usize, c: usize| t.thh[(a * n + b) * n + c];

        let mut out = [0.0f64; 6];
        for g in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let lhs = zgb[(a * n + g) * n + b] - zgb[(a * n + b) * n + g];
                    let mut rhs = t.tv[b * n + g] * zv[a];
                    for q in 0..n {
                        rhs += r.r(a, q, g, b) * z0[q] + th(q, b, g) * zg[a * n + q];
                    }
                    out[0] = out[0].max(max_abs([lhs - rhs]));
                }
                let lhs = ygb[g * n + b] - ygb[b * n + g];
                let mut rhs = r.rv[g * n + b] * y0[0] + t.tv[b * n + g] * yv1[0];
                for q in 0..n {
                    rhs += th(q, b, g) * yg[q];
                }
                out[3] = out[3].max(max_abs([lhs - rhs]));
            }
            for a in 0..n {
                let lhs = zgv[a * n + g] - zvg[a * n + g];
                let mut rhs = -t.pv[g] * zv[a];
                for q in 0..n {
                    rhs += r.ph[(a * n + q) * n + g] * z0[q] - t.ph[q * n + g] * zg[a * n + q];
                }
                out[1] = out[1].max(max_abs([lhs - rhs]));
            }
            let lhs = ygv[g] - yvg[g];
            let mut rhs = r.pv[g] * y0[0] - t.pv[g] * yv1[0];
            for q in 0..n {
                rhs -= t.ph[q * n + g] * yg[q];
            }
            out[4] = out[4].max(max_abs([lhs - rhs]));
        }
        out[2] = max_abs(zvv.iter().zip(&zvv).map(|(a, b)| a - b));
        out[5] = max_abs([yvv[0] - yvv[0]]);
        Ok(out.to_vec())
    })
}

fn all_derivatives<T, F>(frame: &AdaptedFrame, p: &JetPoint, f: F) -> Result<Vec<T>, EvalError>
where
    T: JetMap,
    F: Fn(&JetPoint) -> Result<T, EvalError>,
{
    let mut out = frame.h_derivatives(p, &f)?;
    out.push(frame.v_derivative(p, &f)?);
    Ok(out)
}

/// `C[A][B][a]` with `D_{e_a} e_B = C^A_{Ba} e_A`.
fn natural_coefficients(c: &ConnectionValues<Jet>, n: usize) -> Vec<Jet> {
    let big = n + 1;
    let mut out = vec![Jet::constant(0.0); big.pow(3)];
    let at = |a: usize, b: usize, k: usize| (a * big + b) * big + k;
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                out[at(a, b, g)] = c.h(a, b, g);
            }
            out[at(a, b, n)] = c.v(a, b);
        }
    }
    for g in 0..n {
        out[at(n, n, g)] = c.hv[g];
    }
    out[at(n, n, n)] = c.vv;
    out
}

/// Covariant derivative of a natural array with one upper index followed by
/// `lower` lower indices; the derivative index is appended last.
fn natural_cov_deriv(t: &[f64], dt: &[Vec<f64>], coef: &[f64], big: usize, lower: usize) -> Vec<f64> {
    let slots = lower + 1;
    let len = big.pow(slots as u32);
    let cf = |a: usize, b: usize, k: usize| coef[(a * big + b) * big + k];
    let mut out = vec![0.0; len * big];
    let mut idx = vec![0usize; slots];
    for flat in 0..len {
        let mut r = flat;
        for s in (0..slots).rev() {
            idx[s] = r % big;
            r /= big;
        }
        for k in 0..big {
            let mut v = dt[k][flat];
            let mut probe = idx.clone();
            for s in 0..slots {
                let orig = idx[s];
                for d in 0..big {
                    probe[s] = d;
                    let other = t[probe.iter().fold(0, |acc, &i| acc * big + i)];
                    if s == 0 {
                        v += cf(orig, d, k) * other;
                    } else {
                        v -= cf(d, orig, k) * other;
                    }
                }
                probe[s] = orig;
            }
            out[flat * big + k] = v;
        }
    }
    out
}

pub const BIANCHI_FAMILIES: [&str; 2] = ["first-bianchi", "second-bianchi"];

/// Both Bianchi identities with torsion, in natural components:
///
/// ```text
/// Σ_(abc) Rn^A_{cab} = Σ_(abc) [ Tn^A_{bc;a} + Tn^D_{ab} Tn^A_{Dc} ]
/// Σ_(abc) [ Rn^A_{ubc;a} + Tn^D_{ab} Rn^A_{uDc} ] = 0
/// ```
///
/// Restricted to horizontal and vertical targets these are the component
/// identities for the T, P, R and P blocks.
pub fn check_bianchi(conn: &DConnectionCoeffs, frame: &AdaptedFrame, samples: &[EPoint]) -> Result<Vec<ResidualReport>, SampleError> {
    let n = frame.rank();
    let big = n + 1;
    sweep_many(&BIANCHI_FAMILIES, samples, |pt| {
        let jp = JetPoint::from(pt);
        let tn = vals(&natural_torsion_at(conn, frame, &jp)?);
        let rn = vals(&natural_curvature_at(conn, frame, &jp)?);
        let dtn: Vec<Vec<f64>> = all_derivatives(frame, &jp, |q| natural_torsion_at(conn, frame, q))?.iter().map(|v| vals(v)).collect();
        let drn: Vec<Vec<f64>> = all_derivatives(frame, &jp, |q| natural_curvature_at(conn, frame, q))?.iter().map(|v| vals(v)).collect();
        let coef = vals(&natural_coefficients(&conn.at(&jp)?, n));
        // ∇R as a (1 + 3)-slot array: the lower slot u is treated like b, c
        let ntn = natural_cov_deriv(&tn, &dtn, &coef, big, 2);
        let nrn = natural_cov_deriv(&rn, &drn, &coef, big, 3);
        let t = |a: usize, b: usize, c: usize| tn[(a * big + b) * big + c];
        let r = |a: usize, u: usize, b: usize, c: usize| rn[((a * big + u) * big + b) * big + c];
        let dt = |a: usize, b: usize, c: usize, k: usize| ntn[((a * big + b) * big + c) * big + k];
        let dr = |a: usize, u: usize, b: usize, c: usize, k: usize| nrn[(((a * big + u) * big + b) * big + c) * big + k];

        let mut first = 0.0f64;
        let mut second = 0.0f64;
        for a in 0..big {
            for x in 0..big {
                for y in 0..big {
                    for z in 0..big {
                        let mut s = 0.0;
                        for (i, j, k) in [(x, y, z), (y, z, x), (z, x, y)] {
                            s += r(a, k, i, j) - dt(a, j, k, i);
                            for d in 0..big {
                                s -= t(d, i, j) * t(a, d, k);
                            }
                        }
                        first = first.max(max_abs([s]));
                        for u in 0..big {
                            let mut s = 0.0;
                            for (i, j, k) in [(x, y, z), (y, z, x), (z, x, y)] {
                                s += dr(a, u, j, k, i);
                                for d in 0..big {
                                    s += t(d, i, j) * r(a, u, d, k);
                                }
                            }
                            second = second.max(max_abs([s]));
                        }
                    }
                }
            }
        }
        Ok(vec![first, second])
    })
}

/// A d-vector field with constant frame components.
pub fn constant_field(h: Vec<f64>, v: f64) -> VectorField {
    use crate::calculus::constant;
    crate::sections::from_components(h.into_iter().map(constant).collect(), constant(v))
}
