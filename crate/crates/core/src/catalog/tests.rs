use super::*;
use crate::geometry::{Point, Rational};
use crate::solver::{qopt_gap, solve_qep, solve_qopt};

fn pt(v: f64) -> Point {
    Point::new(vec![v]).unwrap()
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn h_of(inst: &ProblemInstance) -> &ObjectiveFunction {
    match &inst.payload {
        Payload::Objective(h) => h,
        other => panic!("expected an objective, got {}", other.kind_name()),
    }
}

#[test]
fn figure1_formulas() {
    let inst = figure1_instance();
    let h = h_of(&inst);
    assert_eq!(h.eval(&pt(0.0)).unwrap(), 0.5);
    assert_eq!(h.eval(&pt(0.5)).unwrap(), 0.0);
    assert_eq!(h.eval(&pt(2.0)).unwrap(), 0.5);
    // left branch at the junction
    assert_eq!(h.eval_exact(&[q(1, 1)]), Some(q(1, 2)));
    let k1 = inst.map.evaluate_exact(&[q(1, 1)]).unwrap();
    assert_eq!((k1.lower()[0].clone(), k1.upper()[0].clone()), (q(0, 1), q(2, 1)));
}

#[test]
fn figure1_fixed_points_are_the_closed_interval() {
    let inst = figure1_instance();
    let grid = inst.grid().unwrap();
    let fixed = inst.map.fixed_point_set(&grid, 0.0).unwrap();
    let first = fixed.first().unwrap().coords()[0];
    let last = fixed.last().unwrap().coords()[0];
    assert_eq!((first, last), (0.6, 1.4));
    // 0.6 = 600/1000 and 1.4 = 1400/1000 on the 2001-point grid
    assert_eq!(fixed.len(), 801);
}

#[test]
fn figure1_gap_examples() {
    let inst = figure1_instance();
    let cfg = inst.solver_config().unwrap();
    let h = h_of(&inst);
    for x in [0.6, 1.4] {
        let gap = qopt_gap(h, &inst.map, &pt(x), &cfg).unwrap();
        assert!((gap - 0.1).abs() < 1e-12, "gap at {x} = {gap}");
    }
    let report = solve_qopt(h, &inst.map, &cfg).unwrap();
    assert_eq!(report.solution_count(), 0);
    let floor = report.min_gap_over_fixed_points.unwrap();
    assert!((floor - inst.known_facts.gap_floor.unwrap()).abs() < 1e-12);
}

#[test]
fn quasiconvex_variant_has_the_recorded_solution() {
    let inst = quasiconvex_variant_instance();
    let cfg = inst.solver_config().unwrap();
    let h = h_of(&inst);
    let report = solve_qopt(h, &inst.map, &cfg).unwrap();
    assert_eq!(Some(report.solution_points()), inst.known_facts.solutions);
    assert_eq!(qopt_gap(h, &inst.map, &pt(1.0), &cfg).unwrap(), 0.0);
}

#[test]
fn remark_values() {
    let inst = remark_bifunction_instance();
    let Payload::Bifunction(f) = &inst.payload else {
        panic!("remark payload is a bifunction");
    };
    let x = Point::new(vec![ExactScalar::from(0)]).unwrap();
    let half = Point::new(vec![ExactScalar::from_parts(1, 2, 0, 1)]).unwrap();
    let irr = Point::new(vec![ExactScalar::from_parts(0, 1, 1, 4)]).unwrap();
    assert_eq!(f.eval(&x, &half).unwrap(), ExactScalar::from(1));
    assert_eq!(f.eval(&x, &irr).unwrap(), ExactScalar::from(0));
    assert_eq!(inst.scalar_kind(), ScalarKind::Exact);
}

#[test]
fn generators_are_reproducible() {
    for seed in [0, 7, 123] {
        for dim in [1, 2] {
            let a = random_instance(seed, dim).unwrap();
            let b = random_instance(seed, dim).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(qvi_instance(seed).unwrap(), qvi_instance(seed).unwrap());
    }
    assert_ne!(random_instance(1, 1).unwrap(), random_instance(2, 1).unwrap());
}

#[test]
fn random_instance_rejects_other_dimensions() {
    assert!(random_instance(0, 3).is_err());
    assert!(random_instance(0, 0).is_err());
}

#[test]
fn random_instances_have_solutions_at_the_recommended_eps() {
    for seed in 0..6 {
        let inst = random_instance(seed, 1).unwrap();
        let cfg = inst.solver_config().unwrap();
        let report = solve_qopt(h_of(&inst), &inst.map, &cfg).unwrap();
        assert!(report.solution_count() > 0, "seed {seed}");
    }
}

#[test]
fn qvi_instances_match_their_oracle() {
    for seed in 0..6 {
        let inst = qvi_instance(seed).unwrap();
        let cfg = inst.solver_config().unwrap();
        let report = solve_qep(&inst.bifunction().unwrap(), &inst.map, &cfg).unwrap();
        assert_eq!(report.problem_kind, ProblemKind::Qvi);
        assert_eq!(
            Some(report.solution_points()),
            inst.known_facts.solutions,
            "seed {seed}"
        );
    }
}

#[test]
fn oracle_examples() {
    let dom = interval(0.0, 1.0);
    let map = SetValuedMap::whole_domain(&dom).unwrap();
    let grid = Grid::uniform(&dom, 11).unwrap();
    let one = |_: &[Rational]| vec![vec![q(1, 1)]];
    let minus = |_: &[Rational]| vec![vec![q(-1, 1)]];
    let zero = |_: &[Rational]| vec![vec![q(0, 1)]];
    assert_eq!(qvi_oracle(&one, &map, &grid, 0.0, 0.0).unwrap(), vec![vec![0.0]]);
    assert_eq!(qvi_oracle(&minus, &map, &grid, 0.0, 0.0).unwrap(), vec![vec![1.0]]);
    assert_eq!(qvi_oracle(&zero, &map, &grid, 0.0, 0.0).unwrap().len(), 11);
}

#[test]
fn lookup_names() {
    for entry in ENTRIES {
        let inst = lookup(entry.name, Some(3)).unwrap();
        assert!(inst.name().starts_with(entry.name.split('-').next().unwrap()));
    }
    assert!(matches!(lookup("nope", None), Err(Error::Argument(_))));
}
