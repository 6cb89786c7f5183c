//! Fixtures shared by the benchmarks: the desk scenario D1 and a
//! nonabelian variant, built directly from the core API.

use kkgeom_core::algebroid::AlgebroidData;
use kkgeom_core::calculus::constant;
use kkgeom_core::dconnection::DConnectionCoeffs;
use kkgeom_core::expr::field;
use kkgeom_core::metric::{metric_dconnection, MetricStructure};
use kkgeom_core::nlconnection::{AdaptedFrame, NonlinearConnection};
use kkgeom_core::{EPoint, Field, SampleBox};

pub struct Fixture {
    pub frame: AdaptedFrame,
    pub metric: MetricStructure,
    pub conn: DConnectionCoeffs,
}

fn f(s: &str) -> Field {
    field(s, 2).expect("fixture expression")
}

fn desk_metric() -> MetricStructure {
    MetricStructure::new(2, vec![f("1 + x1^2"), constant(0.0), constant(0.0), constant(1.0)], f("exp(2*x1)")).unwrap()
}

/// rho = Id, L = 0, Gamma = (x2 y0, 0), metric connection with zero baseline.
pub fn d1() -> Fixture {
    let frame = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(vec![f("x2*y0"), constant(0.0)])).unwrap();
    let metric = desk_metric();
    let conn = metric_dconnection(&metric, &DConnectionCoeffs::zero(2), &frame);
    Fixture { frame, metric, conn }
}

/// rho = diag(1, e^x1), L^2_12 = 1, a y-dependent nonlinear connection.
pub fn nonabelian() -> Fixture {
    let rho = vec![constant(1.0), constant(0.0), constant(0.0), f("exp(x1)")];
    let mut l: Vec<Field> = (0..8).map(|_| constant(0.0)).collect();
    l[5] = constant(1.0);
    l[6] = constant(-1.0);
    let alg = AlgebroidData::new(2, 2, rho, l).unwrap();
    let frame = AdaptedFrame::new(alg, NonlinearConnection::new(vec![f("x2*y0^2 + sin(x1)"), f("cos(x2)*y0")])).unwrap();
    let metric = desk_metric();
    let conn = metric_dconnection(&metric, &DConnectionCoeffs::zero(2), &frame);
    Fixture { frame, metric, conn }
}

pub fn points(n: usize) -> Vec<EPoint> {
    SampleBox::default_for(2).sample(n, 42)
}
