//! Scenario files: JSON with expression strings, checked for shape before
//! anything is evaluated.

use std::path::Path;

use kkgeom_core::algebroid::AlgebroidData;
use kkgeom_core::calculus::constant;
use kkgeom_core::dconnection::{berwald, DConnectionCoeffs};
use kkgeom_core::expr::{field, parse_in, Expr, Scope};
use kkgeom_core::lift::{LiftMorphism, DEFAULT_STEPS};
use kkgeom_core::metric::{metric_dconnection, MetricStructure};
use kkgeom_core::nlconnection::{AdaptedFrame, CoordinateChange, NonlinearConnection};
use kkgeom_core::sampling::DEFAULT_SEED;
use kkgeom_core::sections::{from_components, VectorField};
use kkgeom_core::{Field, SampleBox};
use serde::Deserialize;

use crate::CliError;

/// Samples per check suite unless the scenario or `--samples` says otherwise.
pub const DEFAULT_CHECK_SAMPLES: usize = 20;

/// An expression given either as a string or as a bare number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Src {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub x: Vec<(f64, f64)>,
    pub y: (f64, f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebroidSpec {
    /// rho[α][i] = ρ̄ⁱ_α
    pub rho: Vec<Vec<Src>>,
    /// L[γ][α][β]; all zero when absent.
    #[serde(rename = "L", default)]
    pub l: Option<Vec<Vec<Vec<Src>>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub gamma: Vec<Src>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    /// hh[α][β][γ] = H^α_{βγ}
    pub hh: Vec<Vec<Vec<Src>>>,
    /// hv[γ] = H°_γ
    pub hv: Vec<Src>,
    /// vh[α][β] = V^α_β
    pub vh: Vec<Vec<Src>>,
    pub vv: Src,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DConnectionSpec {
    Named(String),
    Table(TableSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub g: Vec<Vec<Src>>,
    pub g00: Src,
    #[serde(default)]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GeometrySpec {
    #[serde(default)]
    pub algebroid: Option<AlgebroidSpec>,
    #[serde(default)]
    pub connection: Option<ConnectionSpec>,
    #[serde(default)]
    pub dconnection: Option<DConnectionSpec>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub curve: Vec<String>,
    pub g: Vec<Src>,
    #[serde(default)]
    pub gtilde: Option<Vec<Src>>,
    pub y0: f64,
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub base_map: Vec<Src>,
    pub base_inverse: Vec<Src>,
    pub fiber_map: Src,
    /// lambda[α'][α] = Λ^{α'}_α
    pub lambda: Vec<Vec<Src>>,
    #[serde(default)]
    pub lambda_inverse: Option<Vec<Vec<Src>>>,
    /// The same geometry written in the primed chart.
    pub primed: GeometrySpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub h: Vec<Src>,
    pub v: Src,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub base_dim: usize,
    pub rank: usize,
    #[serde(rename = "box", default)]
    pub sample_box: Option<BoxSpec>,
    #[serde(flatten)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub lift: Option<LiftSpec>,
    #[serde(default)]
    pub transformation: Option<TransformSpec>,
    #[serde(default)]
    pub test_fields: Option<Vec<FieldSpec>>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

pub struct LiftModel {
    pub curve: Vec<Expr>,
    pub morphism: LiftMorphism,
    pub y0: f64,
    pub z0: Option<Vec<f64>>,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

pub struct Geometry {
    pub frame: AdaptedFrame,
    pub conn: DConnectionCoeffs,
    /// How `conn` was obtained.
    pub conn_kind: String,
    pub metric: Option<MetricStructure>,
}

pub struct TransformModel {
    pub change: CoordinateChange,
    pub primed: Geometry,
}

pub struct Model {
    pub name: String,
    pub m: usize,
    pub p: usize,
    pub sample_box: SampleBox,
    pub geometry: Geometry,
    pub lift: Option<LiftModel>,
    pub transformation: Option<TransformModel>,
    pub test_fields: Vec<VectorField>,
    pub kappa: f64,
    pub seed: u64,
    /// Scenario override of the per-command sample count.
    pub samples: Option<usize>,
}

impl Model {
    pub fn frame(&self) -> &AdaptedFrame {
        &self.geometry.frame
    }

    pub fn conn(&self) -> &DConnectionCoeffs {
        &self.geometry.conn
    }
}

fn shape(path: &str, expected: usize, found: usize) -> Result<(), CliError> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::Input(format!("{path}: expected {expected} entries, found {found}")))
    }
}

/// Shape checks for every table, run before any expression is parsed.
fn check_shapes(s: &ScenarioFile) -> Result<(), CliError> {
    let (m, p) = (s.base_dim, s.rank);
    if m == 0 || p == 0 {
        return Err(CliError::Input("base_dim and rank must be positive".into()));
    }
    if let Some(b) = &s.sample_box {
        shape("box.x", m, b.x.len())?;
        for (i, (lo, hi)) in b.x.iter().chain([&b.y]).enumerate() {
            if !(lo <= hi) {
                return Err(CliError::Input(format!("box range {i}: lower bound {lo} exceeds upper bound {hi}")));
            }
        }
    }
    geometry_shapes(&s.geometry, m, p, "")?;
    if let Some(l) = &s.lift {
        shape("lift.curve", m, l.curve.len())?;
        shape("lift.g", p, l.g.len())?;
        if let Some(gt) = &l.gtilde {
            shape("lift.gtilde", p, gt.len())?;
        }
        if let Some(z) = &l.z0 {
            shape("lift.z0", p, z.len())?;
        }
    }
    if let Some(t) = &s.transformation {
        shape("transformation.base_map", m, t.base_map.len())?;
        shape("transformation.base_inverse", m, t.base_inverse.len())?;
        matrix_shape("transformation.lambda", &t.lambda, p, p)?;
        if let Some(inv) = &t.lambda_inverse {
            matrix_shape("transformation.lambda_inverse", inv, p, p)?;
        }
        geometry_shapes(&t.primed, m, p, "transformation.primed.")?;
    }
    for (k, f) in s.test_fields.iter().flatten().enumerate() {
        shape(&format!("test_fields[{k}].h"), p, f.h.len())?;
    }
    Ok(())
}

fn matrix_shape<T>(path: &str, rows: &[Vec<T>], n: usize, k: usize) -> Result<(), CliError> {
    shape(path, n, rows.len())?;
    for (i, r) in rows.iter().enumerate() {
        shape(&format!("{path}[{i}]"), k, r.len())?;
    }
    Ok(())
}

fn cube_shape<T>(path: &str, c: &[Vec<Vec<T>>], p: usize) -> Result<(), CliError> {
    shape(path, p, c.len())?;
    for (i, rows) in c.iter().enumerate() {
        matrix_shape(&format!("{path}[{i}]"), rows, p, p)?;
    }
    Ok(())
}

fn geometry_shapes(g: &GeometrySpec, m: usize, p: usize, prefix: &str) -> Result<(), CliError> {
    if let Some(a) = &g.algebroid {
        matrix_shape(&format!("{prefix}algebroid.rho"), &a.rho, p, m)?;
        if let Some(l) = &a.l {
            cube_shape(&format!("{prefix}algebroid.L"), l, p)?;
        }
    } else if m != p {
        return Err(CliError::Input(format!("{prefix}algebroid: required when base_dim != rank")));
    }
    if let Some(c) = &g.connection {
        shape(&format!("{prefix}connection.gamma"), p, c.gamma.len())?;
    }
    if let Some(DConnectionSpec::Table(t)) = &g.dconnection {
        cube_shape(&format!("{prefix}dconnection.hh"), &t.hh, p)?;
        shape(&format!("{prefix}dconnection.hv"), p, t.hv.len())?;
        matrix_shape(&format!("{prefix}dconnection.vh"), &t.vh, p, p)?;
    }
    if let Some(mt) = &g.metric {
        matrix_shape(&format!("{prefix}metric.g"), &mt.g, p, p)?;
    }
    Ok(())
}

fn expr_field(path: &str, src: &Src, m: usize) -> Result<Field, CliError> {
    match src {
        Src::Num(v) => Ok(constant(*v)),
        Src::Text(s) => field(s, m).map_err(|e| CliError::Input(format!("{path}: {e} in {s:?}"))),
    }
}

fn fields<'a>(path: &str, it: impl IntoIterator<Item = &'a Src>, m: usize) -> Result<Vec<Field>, CliError> {
    it.into_iter().enumerate().map(|(k, s)| expr_field(&format!("{path}[{k}]"), s, m)).collect()
}

fn flat_matrix(path: &str, rows: &[Vec<Src>], m: usize) -> Result<Vec<Field>, CliError> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        out.extend(fields(&format!("{path}[{i}]"), r, m)?);
    }
    Ok(out)
}

fn flat_cube(path: &str, c: &[Vec<Vec<Src>>], m: usize) -> Result<Vec<Field>, CliError> {
    let mut out = Vec::new();
    for (i, rows) in c.iter().enumerate() {
        out.extend(flat_matrix(&format!("{path}[{i}]"), rows, m)?);
    }
    Ok(out)
}

fn shape_err(e: kkgeom_core::ShapeError) -> CliError {
    CliError::Input(e.to_string())
}

fn build_geometry(g: &GeometrySpec, m: usize, p: usize, prefix: &str) -> Result<Geometry, CliError> {
    let alg = match &g.algebroid {
        None => AlgebroidData::tangent(m),
        Some(a) => {
            let rho = flat_matrix(&format!("{prefix}algebroid.rho"), &a.rho, m)?;
            let l = match &a.l {
                Some(l) => flat_cube(&format!("{prefix}algebroid.L"), l, m)?,
                None => (0..p * p * p).map(|_| constant(0.0)).collect(),
            };
            AlgebroidData::new(m, p, rho, l).map_err(shape_err)?
        }
    };
    let nlc = match &g.connection {
        Some(c) => NonlinearConnection::new(fields(&format!("{prefix}connection.gamma"), &c.gamma, m)?),
        None => NonlinearConnection::zero(p),
    };
    let frame = AdaptedFrame::new(alg, nlc).map_err(shape_err)?;
    let metric = match &g.metric {
        Some(mt) => {
            let gs = flat_matrix(&format!("{prefix}metric.g"), &mt.g, m)?;
            let g00 = expr_field(&format!("{prefix}metric.g00"), &mt.g00, m)?;
            Some(MetricStructure::new(p, gs, g00).map_err(shape_err)?)
        }
        None => None,
    };
    let named = |name: &str| -> Result<(DConnectionCoeffs, String), CliError> {
        match name {
            "zero" => Ok((DConnectionCoeffs::zero(p), "zero".into())),
            "berwald" => Ok((berwald(frame.connection()), "berwald".into())),
            other => Err(CliError::Input(format!("{prefix}dconnection: unknown connection {other:?} (expected \"zero\" or \"berwald\")"))),
        }
    };
    let (conn, conn_kind) = match (&g.dconnection, &metric) {
        (Some(DConnectionSpec::Table(t)), _) => {
            let path = format!("{prefix}dconnection");
            let c = DConnectionCoeffs::explicit(
                p,
                flat_cube(&format!("{path}.hh"), &t.hh, m)?,
                fields(&format!("{path}.hv"), &t.hv, m)?,
                flat_matrix(&format!("{path}.vh"), &t.vh, m)?,
                expr_field(&format!("{path}.vv"), &t.vv, m)?,
            )
            .map_err(shape_err)?;
            (c, "explicit".to_string())
        }
        (Some(DConnectionSpec::Named(n)), _) => named(n)?,
        (None, Some(mt)) => {
            let base = g.metric.as_ref().and_then(|s| s.baseline.clone()).unwrap_or_else(|| "zero".into());
            let (b, kind) = named(&base)?;
            (metric_dconnection(mt, &b, &frame), format!("metric ({kind} baseline)"))
        }
        (None, None) => named("berwald")?,
    };
    Ok(Geometry { frame, conn, conn_kind, metric })
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario: {e}")))
    }

    pub fn build(&self) -> Result<Model, CliError> {
        check_shapes(self)?;
        let (m, p) = (self.base_dim, self.rank);
        let geometry = build_geometry(&self.geometry, m, p, "")?;
        let lift = match &self.lift {
            None => None,
            Some(l) => {
                let curve = l
                    .curve
                    .iter()
                    .enumerate()
                    .map(|(k, s)| parse_in(s, Scope::curve()).map_err(|e| CliError::Input(format!("lift.curve[{k}]: {e} in {s:?}"))))
                    .collect::<Result<_, _>>()?;
                let g = fields("lift.g", &l.g, m)?;
                let gtilde = l.gtilde.as_ref().map(|gt| fields("lift.gtilde", gt, m)).transpose()?;
                Some(LiftModel {
                    curve,
                    morphism: LiftMorphism::new(g, gtilde).map_err(shape_err)?,
                    y0: l.y0,
                    z0: l.z0.clone(),
                    t0: l.t0.unwrap_or(0.0),
                    t1: l.t1.unwrap_or(1.0),
                    steps: l.steps.unwrap_or(DEFAULT_STEPS),
                })
            }
        };
        let transformation = match &self.transformation {
            None => None,
            Some(t) => Some(TransformModel {
                change: CoordinateChange {
                    base_map: fields("transformation.base_map", &t.base_map, m)?,
                    base_inverse: fields("transformation.base_inverse", &t.base_inverse, m)?,
                    fiber_map: expr_field("transformation.fiber_map", &t.fiber_map, m)?,
                    lambda: flat_matrix("transformation.lambda", &t.lambda, m)?,
                    lambda_inverse: t.lambda_inverse.as_ref().map(|inv| flat_matrix("transformation.lambda_inverse", inv, m)).transpose()?,
                },
                primed: build_geometry(&t.primed, m, p, "transformation.primed.")?,
            }),
        };
        let test_fields = match &self.test_fields {
            Some(fs) => fs
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let h = fields(&format!("test_fields[{k}].h"), &f.h, m)?;
                    Ok(from_components(h, expr_field(&format!("test_fields[{k}].v"), &f.v, m)?))
                })
                .collect::<Result<_, CliError>>()?,
            None => default_test_fields(m, p),
        };
        Ok(Model {
            name: self.name.clone().unwrap_or_else(|| "unnamed".into()),
            m,
            p,
            sample_box: match &self.sample_box {
                Some(b) => SampleBox { x: b.x.clone(), y: b.y },
                None => SampleBox::default_for(m),
            },
            geometry,
            lift,
            transformation,
            test_fields,
            kappa: self.kappa.unwrap_or(1.0),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            samples: self.samples,
        })
    }
}

/// `Z = (x2, sin(x1), 0...) + (x1 y0) dot` and the constant first frame field.
fn default_test_fields(m: usize, p: usize) -> Vec<VectorField> {
    let src = |s: &str| field(s, m).expect("built-in test field");
    let first = if m > 1 { "x2" } else { "x1" };
    let h = (0..p)
        .map(|a| match a {
            0 => src(first),
            1 => src("sin(x1)"),
            _ => constant(0.0),
        })
        .collect();
    let e1 = (0..p).map(|a| constant(if a == 0 { 1.0 } else { 0.0 })).collect();
    vec![from_components(h, src("x1*y0")), from_components(e1, constant(0.0))]
}

pub fn load(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    ScenarioFile::from_json(&text)?.build()
}
