use flowcalc_core::chrono::{simplex_integral_term, simplex_integral_term_quadrature};
use flowcalc_core::flow::fd_jacobian;
use flowcalc_core::liealg::{lie_bracket, lie_bracket_field, FlowBracketProgram};
use flowcalc_core::linalg::{distance, norm};
use flowcalc_core::paramflow::{param_derivative, Mode, PerturbedSystem};
use flowcalc_core::reach::{bracket_rank, simulate_schedule, DEFAULT_RANK_TOL};
use flowcalc_core::{
    AffineControlSystem, BracketExpression, ChartPoint, ControlSchedule, FlowMap, FlowSolver, Observable, Polynomial,
    PolynomialMap, Segment, Sign, TimePiece, VectorField,
};
use proptest::prelude::*;

fn pt(c: &[f64]) -> ChartPoint {
    ChartPoint::new(c.to_vec()).unwrap()
}

fn poly(n: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((-2.0f64..2.0, prop::collection::vec(0..=max_deg, n)), 0..4)
        .prop_map(move |terms| Polynomial::from_terms(n, terms).unwrap())
}

fn poly_map(n: usize, max_deg: u32) -> impl Strategy<Value = PolynomialMap> {
    prop::collection::vec(poly(n, max_deg), n).prop_map(move |c| PolynomialMap::new(n, c).unwrap())
}

fn field(n: usize, max_deg: u32) -> impl Strategy<Value = VectorField> {
    poly_map(n, max_deg).prop_map(|m| VectorField::autonomous(m).unwrap())
}

fn point(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

fn expr(num_fields: usize) -> impl Strategy<Value = BracketExpression> {
    let leaf = (0..num_fields).prop_map(BracketExpression::Leaf);
    leaf.prop_recursive(3, 8, 2, |inner| (inner.clone(), inner).prop_map(|(l, r)| BracketExpression::pair(l, r)))
}

fn piecewise_1d() -> VectorField {
    // x' = x on [0, 0.5), x' = 1 - x on [0.5, 2]
    let one = Polynomial::constant(1, 1.0);
    let x = Polynomial::variable(1, 0);
    VectorField::piecewise(vec![
        TimePiece { start: 0.0, end: 0.5, map: PolynomialMap::new(1, vec![x.clone()]).unwrap() },
        TimePiece { start: 0.5, end: 2.0, map: PolynomialMap::new(1, vec![one.sub(&x)]).unwrap() },
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lift_is_linear_in_field(v in field(2, 2), w in field(2, 2), a in -2.0f64..2.0, b in -2.0f64..2.0, q in point(2, 1.0)) {
        let obs = Observable::new(
            PolynomialMap::new(2, vec![Polynomial::variable(2, 0).mul(&Polynomial::variable(2, 1)), Polynomial::variable(2, 1)]).unwrap(),
            3,
        );
        let combo = v.scaled(a).sum(&w.scaled(b)).unwrap();
        let lhs = combo.lift(0.0, &obs).unwrap().eval(&pt(&q)).unwrap();
        let lv = v.lift(0.0, &obs).unwrap().eval(&pt(&q)).unwrap();
        let lw = w.lift(0.0, &obs).unwrap().eval(&pt(&q)).unwrap();
        let rhs: Vec<f64> = lv.iter().zip(&lw).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(distance(&lhs, &rhs) <= 1e-10 * (1.0 + norm(&rhs)));
    }

    #[test]
    fn exact_jacobian_matches_central_differences(v in field(3, 3), q in point(3, 1.5)) {
        let exact = v.jacobian(0.0, &pt(&q)).unwrap();
        let fd = fd_jacobian(&v, 0.0, &q).unwrap();
        prop_assert!(exact.sub(&fd).max_abs() <= 1e-6 * (1.0 + exact.max_abs()));
    }

    #[test]
    fn bracket_antisymmetry_and_jacobi(u in field(2, 2), v in field(2, 2), w in field(2, 2), q in point(2, 1.0)) {
        let uv = lie_bracket_field(&u, &v).unwrap();
        let vu = lie_bracket_field(&v, &u).unwrap();
        let q = pt(&q);
        let s: Vec<f64> = uv.eval(0.0, &q).unwrap().iter().zip(vu.eval(0.0, &q).unwrap()).map(|(a, b)| a + b).collect();
        prop_assert!(norm(&s) <= 1e-9);
        let j1 = lie_bracket_field(&u, &lie_bracket_field(&v, &w).unwrap()).unwrap();
        let j2 = lie_bracket_field(&v, &lie_bracket_field(&w, &u).unwrap()).unwrap();
        let j3 = lie_bracket_field(&w, &uv).unwrap();
        let total = j1.sum(&j2).unwrap().sum(&j3).unwrap();
        prop_assert!(norm(&total.eval(0.0, &q).unwrap()) <= 1e-8);
        let pointwise = lie_bracket(&u, &v, 0.0, &q).unwrap();
        prop_assert!(distance(&pointwise, &uv.eval(0.0, &q).unwrap()) <= 1e-10 * (1.0 + norm(&pointwise)));
    }

    #[test]
    fn expression_text_round_trips(e in expr(12)) {
        let back: BracketExpression = e.to_string().parse().unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn programs_have_zero_net_time(e in expr(3)) {
        let prog = FlowBracketProgram::compile(&e);
        if e.degree() > 1 {
            prop_assert!(prog.net_time(3).iter().all(|&n| n == 0));
        }
        prop_assert_eq!(prog.inverse().inverse(), prog);
    }

    #[test]
    fn heisenberg_semigroup_and_inverse(q in point(3, 1.0), s in 0.0f64..0.7, t in 0.0f64..0.7) {
        let v = VectorField::heisenberg()[0].clone();
        let solver = FlowSolver::default();
        let q = pt(&q);
        let once = FlowMap::new(&v, 0.0, s + t, solver).apply(&q).unwrap();
        let mid = FlowMap::new(&v, 0.0, s, solver).apply(&q).unwrap();
        let twice = FlowMap::new(&v, s, s + t, solver).apply(&mid).unwrap();
        prop_assert!(once.distance(&twice) <= 1e-8);
        let back = FlowMap::new(&v, 0.0, s, solver).inverse(&mid).unwrap();
        prop_assert!(back.distance(&q) <= 1e-8);
    }

    #[test]
    fn piecewise_semigroup(q in -2.0f64..2.0, s in 0.0f64..2.0, u in 0.0f64..2.0) {
        let f = piecewise_1d();
        let solver = FlowSolver::default();
        let q = pt(&[q]);
        let (a, b) = if s < u { (s, u) } else { (u, s) };
        let direct = FlowMap::new(&f, 0.0, b, solver).apply(&q).unwrap();
        let split = FlowMap::new(&f, a, b, solver).apply(&FlowMap::new(&f, 0.0, a, solver).apply(&q).unwrap()).unwrap();
        prop_assert!(direct.distance(&split) <= 1e-8);
        let back = FlowMap::new(&f, 0.0, b, solver).inverse(&direct).unwrap();
        prop_assert!(back.distance(&q) <= 1e-8);
    }

    #[test]
    fn pushforward_obeys_chain_rule(q in point(3, 1.0), s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let h = VectorField::heisenberg();
        let v = h[0].sum(&h[1].scaled(0.5)).unwrap();
        let solver = FlowSolver::default();
        let q = pt(&q);
        let (mid, j1) = FlowMap::new(&v, 0.0, s, solver).apply_with_pushforward(&q).unwrap();
        let j2 = FlowMap::new(&v, s, s + t, solver).pushforward(&mid).unwrap();
        let whole = FlowMap::new(&v, 0.0, s + t, solver).pushforward(&q).unwrap();
        prop_assert!(whole.sub(&j2.matmul(&j1)).max_abs() <= 1e-8);
    }

    #[test]
    fn autonomous_simplex_terms_match_quadrature(v in field(2, 1), q in point(2, 1.0), t in 0.05f64..0.6, k in 1usize..4) {
        let obs = Observable::coordinate(2, 0, 4);
        let fields = vec![&v; k];
        let fast = simplex_integral_term(&fields, &obs, &pt(&q), 0.0, t, 16).unwrap();
        let slow = simplex_integral_term_quadrature(&fields, &obs, &pt(&q), 0.0, t, 16).unwrap();
        prop_assert!(distance(&fast, &slow) <= 1e-9 * (1.0 + norm(&fast)));
    }

    #[test]
    fn concatenated_schedules_compose(
        a in prop::collection::vec((0usize..2, any::<bool>(), 0.01f64..0.4), 0..5),
        b in prop::collection::vec((0usize..2, any::<bool>(), 0.01f64..0.4), 0..5),
        q in point(3, 0.5),
    ) {
        let sys = AffineControlSystem::new(VectorField::heisenberg().to_vec()).unwrap();
        let mk = |v: &[(usize, bool, f64)]| ControlSchedule::new(
            v.iter().map(|&(i, s, d)| Segment::new(i, if s { Sign::Plus } else { Sign::Minus }, d).unwrap()).collect()
        ).unwrap();
        let (s1, s2) = (mk(&a), mk(&b));
        let solver = FlowSolver::default();
        let q = pt(&q);
        let whole = simulate_schedule(&sys, &q, &s1.concat(&s2), &solver).unwrap();
        let staged = simulate_schedule(&sys, &simulate_schedule(&sys, &q, &s1, &solver).unwrap(), &s2, &solver).unwrap();
        prop_assert!(whole.distance(&staged) <= 1e-9);
        prop_assert!((s1.concat(&s2).total_duration() - s1.total_duration() - s2.total_duration()).abs() <= 1e-12);
    }

    #[test]
    fn constant_systems_stay_in_their_span(
        segs in prop::collection::vec((0usize..2, any::<bool>(), 0.01f64..1.0), 1..8),
        q in point(3, 1.0),
    ) {
        let sys = AffineControlSystem::new(vec![VectorField::constant(&[1.0, 2.0, 0.0]), VectorField::constant(&[0.0, 1.0, 0.0])]).unwrap();
        let sched = ControlSchedule::new(
            segs.iter().map(|&(i, s, d)| Segment::new(i, if s { Sign::Plus } else { Sign::Minus }, d).unwrap()).collect()
        ).unwrap();
        let end = simulate_schedule(&sys, &pt(&q), &sched, &FlowSolver::default()).unwrap();
        prop_assert!((end.coords()[2] - q[2]).abs() <= 1e-12);
    }

    #[test]
    fn rank_is_monotone_in_degree(q in point(4, 1.0)) {
        let uni = AffineControlSystem::new(VectorField::unicycle().to_vec()).unwrap();
        let heis = AffineControlSystem::new(VectorField::heisenberg().to_vec()).unwrap();
        let mut last = (0, 0);
        for d in 1..=3 {
            let a = bracket_rank(&uni, &pt(&q), d, DEFAULT_RANK_TOL).unwrap().numerical_rank;
            let b = bracket_rank(&heis, &pt(&q[..3]), d, DEFAULT_RANK_TOL).unwrap().numerical_rank;
            prop_assert!(a >= last.0 && b >= last.1);
            last = (a, b);
        }
        prop_assert_eq!(last.1, 3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn param_derivative_is_additive_in_perturbation(q in point(2, 1.0)) {
        let v = VectorField::rotation2d();
        let w1 = VectorField::constant(&[1.0, 0.5]);
        let w2 = VectorField::linear(&flowcalc_core::Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]])).unwrap();
        let solver = FlowSolver::default();
        let d = |w: VectorField| param_derivative(&PerturbedSystem::new(v.clone(), w, 0.0, 0.8).unwrap(), &pt(&q), Mode::In, &solver, 32).unwrap();
        let sum = d(w1.sum(&w2).unwrap());
        let parts: Vec<f64> = d(w1).iter().zip(d(w2)).map(|(a, b)| a + b).collect();
        prop_assert!(distance(&sum, &parts) <= 1e-9);
    }
}

#[test]
fn rk4_error_falls_sixteenfold_per_halving() {
    let rot = VectorField::rotation2d();
    let q = pt(&[1.0, 0.0]);
    let t: f64 = 1.0;
    let exact = pt(&[t.cos(), t.sin()]);
    let coarse = FlowMap::new(&rot, 0.0, t, FlowSolver::with_density(20)).apply(&q).unwrap().distance(&exact);
    let fine = FlowMap::new(&rot, 0.0, t, FlowSolver::with_density(40)).apply(&q).unwrap().distance(&exact);
    assert!(coarse / fine >= 8.0, "ratio {}", coarse / fine);
}
