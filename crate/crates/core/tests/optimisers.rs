use sigmin::optim::{chain, minimize, penalty_wrap, Method, ObjectiveProblem, OptimiserSpec, RunReport};

const ALL: [Method; 5] = [Method::DirectL, Method::Isres, Method::Praxis, Method::Lbfgs, Method::Cobyla];

fn shifted_bowl() -> ObjectiveProblem {
    ObjectiveProblem::new(3, |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2) + 0.5 * (x[2] - 0.7).powi(2))
        .unwrap()
        .with_bounds(vec![[-1.0, 1.0]; 3])
        .unwrap()
}

fn check_report(r: &RunReport, budget: usize) {
    assert!(r.functional_count <= budget + 1, "{}: {} > {}", r.method, r.functional_count, budget);
    assert!(r.trace.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1), "{}", r.method);
    if let Some(last) = r.trace.last() {
        assert_eq!(last.1.to_bits(), r.best_f.to_bits(), "{}", r.method);
    }
}

#[test]
fn every_method_respects_budget_and_trace_order() {
    for m in ALL {
        for budget in [1, 7, 60, 400] {
            let r = minimize(&OptimiserSpec::new(m, budget).with_seed(3), &shifted_bowl()).unwrap();
            check_report(&r, budget);
            assert!(r.feasible);
        }
    }
}

#[test]
fn every_method_finds_the_bowl_minimum() {
    for m in ALL {
        let r = minimize(&OptimiserSpec::new(m, 4000).with_seed(1), &shifted_bowl()).unwrap();
        // the evolution strategy only gets ~50 generations here
        let tol = if m == Method::Isres { 1e-2 } else { 1e-6 };
        assert!(r.best_f <= tol, "{m}: {}", r.best_f);
    }
}

#[test]
fn seeded_runs_repeat_exactly() {
    for m in ALL {
        let spec = OptimiserSpec::new(m, 300).with_seed(42);
        let a = minimize(&spec, &shifted_bowl()).unwrap();
        let b = minimize(&spec, &shifted_bowl()).unwrap();
        assert!(a.same_outcome(&b), "{m}");
    }
}

#[test]
fn reported_count_matches_problem_counter() {
    for m in ALL {
        let p = shifted_bowl();
        let r = minimize(&OptimiserSpec::new(m, 250), &p).unwrap();
        assert_eq!(r.functional_count, p.evaluations(), "{m}");
    }
}

#[test]
fn chain_adds_counts_and_never_loses_ground() {
    let p = shifted_bowl();
    let g = OptimiserSpec::new(Method::DirectL, 40);
    let l = OptimiserSpec::new(Method::Praxis, 200);
    let alone = minimize(&g, &p).unwrap();
    let both = chain(&g, &l, &p).unwrap();
    assert_eq!(both.method, "direct_l+praxis");
    assert!(both.best_f <= alone.best_f);
    assert!(both.functional_count > alone.functional_count && both.functional_count <= 241);
    check_report(&both, 240);
}

#[test]
fn penalty_wrapped_equality_runs_with_any_method() {
    let p = ObjectiveProblem::new(2, |x| x[0] + x[1])
        .unwrap()
        .with_bounds(vec![[-2.0, 2.0]; 2])
        .unwrap()
        .with_equality(1, 1e-6, |x| vec![x[0] * x[0] + x[1] * x[1] - 1.0])
        .unwrap();
    assert!(minimize(&OptimiserSpec::new(Method::Praxis, 10), &p).is_err());
    assert_eq!(p.evaluations(), 0);
    let w = penalty_wrap(&p, 1e2).unwrap();
    let r = minimize(&OptimiserSpec::new(Method::Praxis, 3000), &w).unwrap();
    let target = -std::f64::consts::SQRT_2;
    assert!((r.best_x[0] + r.best_x[1] - target).abs() <= 1e-2, "{:?}", r.best_x);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(minimize(&OptimiserSpec::new(Method::Praxis, 0), &shifted_bowl()).is_err());
    let unbounded = ObjectiveProblem::new(1, |x| x[0] * x[0]).unwrap();
    assert!(minimize(&OptimiserSpec::new(Method::DirectL, 10), &unbounded).is_err());
    assert!(minimize(&OptimiserSpec::new(Method::Lbfgs, 200), &unbounded).unwrap().best_f <= 1e-10);
}
