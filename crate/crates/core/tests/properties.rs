use kkgeom_core::algebroid::AlgebroidData;
use kkgeom_core::calculus::{constant, fd_partial, partial, second_partial, Axis, DEFAULT_FD_STEP};
use kkgeom_core::curvature::{curvature_components, ricci, torsion_components};
use kkgeom_core::dconnection::DConnectionCoeffs;
use kkgeom_core::expr::{field, parse, BinOp, Constant, Env, Expr, Func, Var};
use kkgeom_core::metric::{compatibility_check, metric_dconnection, MetricStructure};
use kkgeom_core::nlconnection::{AdaptedFrame, NonlinearConnection};
use kkgeom_core::{EPoint, Field, Jet, JetPoint, SampleBox};
use proptest::prelude::*;

const SMOOTH: [&str; 5] = ["sin(x1)*exp(x2*y0)", "x1^3 - 2*x2*y0^2", "cos(x1 + y0)/(2 + x2^2)", "log(3 + x1*x2)", "sqrt(4 + y0^2)*x1"];

fn point() -> impl Strategy<Value = EPoint> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, y)| EPoint::new(vec![a, b], y))
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X(0)), Just(Axis::X(1)), Just(Axis::Fiber)]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..10.0f64).prop_map(Expr::Num),
        Just(Expr::Const(Constant::Pi)),
        Just(Expr::Const(Constant::E)),
        Just(Expr::Var(Var::X(0))),
        Just(Expr::Var(Var::X(1))),
        Just(Expr::Var(Var::Y)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Abs), Just(Func::Sqrt)], inner.clone())
                .prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Pow, vec![a, b])),
        ]
    })
}

fn eval_both(e: &Expr, p: &EPoint) -> (Result<f64, String>, Result<Jet, String>) {
    let r = e.eval(&Env { x: &p.x, y: Some(p.y), t: None }).map_err(|e| e.to_string());
    let jp = JetPoint::from(p);
    let j = e.eval(&Env { x: &jp.x, y: Some(jp.y), t: None }).map_err(|e| e.to_string());
    (r, j)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_partial_matches_central_difference(k in 0..SMOOTH.len(), p in point(), a in axis()) {
        let f = field(SMOOTH[k], 2).unwrap();
        let exact = partial(f.as_ref(), &p, a).unwrap();
        let fd = fd_partial(f.as_ref(), &p, a, DEFAULT_FD_STEP).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "{} vs {}", exact, fd);
    }

    #[test]
    fn mixed_partials_commute(k in 0..SMOOTH.len(), p in point(), a in axis(), b in axis()) {
        let f = field(SMOOTH[k], 2).unwrap();
        let ab = second_partial(f.as_ref(), &p, a, b).unwrap();
        let ba = second_partial(f.as_ref(), &p, b, a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab.abs()));
    }

    #[test]
    fn pretty_print_round_trips(e in expr(), p in point()) {
        let text = e.to_string();
        let back = parse(&text, 2).unwrap();
        prop_assert_eq!(&back, &e);
        let (a, _) = eval_both(&e, &p);
        let (b, _) = eval_both(&back, &p);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())),
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn real_and_jet_values_agree_bitwise(e in expr(), p in point()) {
        match eval_both(&e, &p) {
            (Ok(r), Ok(j)) => prop_assert_eq!(r.to_bits(), j.value().to_bits()),
            // a jet may carry a derivative through a point where only the value exists
            (Ok(_), Err(_)) | (Err(_), Err(_)) => {}
            (Err(r), Ok(j)) => prop_assert!(false, "real failed ({}) but jet gave {:?}", r, j.value()),
        }
    }

    #[test]
    fn metric_connection_compatible_for_random_constant_metrics(
        a in 0.5..3.0f64, b in -0.4..0.4f64, d in 0.5..3.0f64, s in 0.1..2.0f64, k in -1.0..1.0f64,
    ) {
        let g: Vec<Field> = vec![
            field(&format!("{a} + {s}*x1^2"), 2).unwrap(),
            constant(b),
            constant(b),
            field(&format!("{d}*exp({k}*x2)"), 2).unwrap(),
        ];
        let g = MetricStructure::new(2, g, field(&format!("exp({k}*x1*y0)"), 2).unwrap()).unwrap();
        let gamma = vec![field(&format!("{k}*x2*y0"), 2).unwrap(), field("0", 2).unwrap()];
        let fr = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(gamma)).unwrap();
        let c = metric_dconnection(&g, &DConnectionCoeffs::zero(2), &fr);
        let r = compatibility_check(&g, &c, &fr, &SampleBox::default_for(2).sample(6, 3)).unwrap();
        prop_assert!(r.max_residual < 1e-9, "{}", r.max_residual);
    }

    #[test]
    fn torsion_and_curvature_antisymmetric(cs in proptest::collection::vec(-2.0..2.0f64, 8), p in point()) {
        let hh: Vec<Field> = cs.iter().enumerate().map(|(i, c)| field(&format!("{c}*x{}*y0 + {c}", i % 2 + 1), 2).unwrap()).collect();
        let conn = DConnectionCoeffs::explicit(2, hh, vec![constant(cs[0]); 2], vec![constant(cs[1]); 4], constant(cs[2])).unwrap();
        let fr = AdaptedFrame::new(AlgebroidData::tangent(2), NonlinearConnection::new(vec![field("x2*y0", 2).unwrap(), constant(0.0)])).unwrap();
        let t = torsion_components(&conn, &fr, &p).unwrap();
        let r = curvature_components(&conn, &fr, &p).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    prop_assert_eq!(t.thh[(a * 2 + b) * 2 + c], -t.thh[(a * 2 + c) * 2 + b]);
                    for e in 0..2 {
                        prop_assert!((r.r(a, b, c, e) + r.r(a, b, e, c)).abs() <= 1e-12);
                    }
                }
            }
        }
        prop_assert_eq!(t.s, 0.0);
        prop_assert_eq!(ricci(&r).s00, 0.0);
    }
}
