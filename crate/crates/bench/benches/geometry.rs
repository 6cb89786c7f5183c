use criterion::{black_box, criterion_group, criterion_main, Criterion};
use kkgeom_bench::{d1, nonabelian, points};
use kkgeom_core::curvature::{check_bianchi, curvature_components, oracle_equivalence, torsion_components};
use kkgeom_core::expr::field;
use kkgeom_core::lift::{integrate_parallel_lift, BaseCurve, LiftMorphism, LiftProblem, DEFAULT_STEPS};
use kkgeom_core::metric::compatibility_check;
use kkgeom_core::JetPoint;

fn expressions(c: &mut Criterion) {
    let f = field("sin(x1)*exp(x2*y0) + x1^3/(2 + y0^2)", 2).unwrap();
    let p = points(1).remove(0);
    let jp = JetPoint::from(&p);
    c.bench_function("expr/value", |b| b.iter(|| f.value(black_box(&p)).unwrap()));
    c.bench_function("expr/jet", |b| b.iter(|| f.eval(black_box(&jp)).unwrap()));
}

fn components(c: &mut Criterion) {
    let p = points(1).remove(0);
    for (name, fx) in [("d1", d1()), ("nonabelian", nonabelian())] {
        c.bench_function(&format!("connection/{name}"), |b| b.iter(|| fx.conn.values(black_box(&p)).unwrap()));
        c.bench_function(&format!("torsion/{name}"), |b| b.iter(|| torsion_components(&fx.conn, &fx.frame, black_box(&p)).unwrap()));
        c.bench_function(&format!("curvature/{name}"), |b| b.iter(|| curvature_components(&fx.conn, &fx.frame, black_box(&p)).unwrap()));
    }
}

fn suites(c: &mut Criterion) {
    let fx = d1();
    let s = points(4);
    let mut g = c.benchmark_group("suites");
    g.sample_size(10);
    g.bench_function("compatibility/4pts", |b| b.iter(|| compatibility_check(&fx.metric, &fx.conn, &fx.frame, &s).unwrap()));
    g.bench_function("oracle/4pts", |b| b.iter(|| oracle_equivalence(&fx.conn, &fx.frame, &s).unwrap()));
    g.bench_function("bianchi/4pts", |b| b.iter(|| check_bianchi(&fx.conn, &fx.frame, &s).unwrap()));
    g.finish();
}

fn lifts(c: &mut Criterion) {
    let fx = d1();
    let f = |s: &str| field(s, 2).unwrap();
    let lp = LiftProblem::new(
        BaseCurve::parse(&["cos(t)", "sin(t)"], 0.0, 2.0).unwrap(),
        LiftMorphism::new(vec![f("-x2"), f("x1")], None).unwrap(),
        fx.frame.clone(),
    )
    .unwrap();
    c.bench_function("lift/parallel-1000", |b| b.iter(|| integrate_parallel_lift(&lp, black_box(0.3), DEFAULT_STEPS).unwrap()));
}

criterion_group!(benches, expressions, components, suites, lifts);
criterion_main!(benches);
