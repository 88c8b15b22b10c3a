use proptest::prelude::*;
use rmfs_milp::{
    lp_relaxation_bound, solve, LinearConstraint, MilpModel, ObjectiveSense, RelaxationError, Sense,
    SolveParams, SolveStatus, VarRef, Variable,
};

#[derive(Debug, Clone)]
struct Problem {
    maximize: bool,
    upper: Vec<i64>,
    cost: Vec<i64>,
    rows: Vec<(Vec<i64>, Sense, i64)>,
}

fn build(p: &Problem) -> MilpModel {
    let sense = if p.maximize {
        ObjectiveSense::Maximize
    } else {
        ObjectiveSense::Minimize
    };
    let mut m = MilpModel::new(sense);
    let vars: Vec<VarRef> = p
        .upper
        .iter()
        .enumerate()
        .map(|(j, &u)| {
            let v = if u == 1 {
                Variable::binary(format!("x{j}"))
            } else {
                Variable::integer(format!("x{j}"), 0.0, u as f64)
            };
            m.add_variable(v).unwrap()
        })
        .collect();
    for (i, (coefs, sense, rhs)) in p.rows.iter().enumerate() {
        let terms = vars
            .iter()
            .zip(coefs)
            .filter(|(_, &a)| a != 0)
            .map(|(&v, &a)| (v, a as f64))
            .collect();
        m.add_constraint(LinearConstraint::new(format!("r{i}"), terms, *sense, *rhs as f64))
            .unwrap();
    }
    m.set_objective(vars.iter().zip(&p.cost).map(|(&v, &c)| (v, c as f64)).collect())
        .unwrap();
    m
}

/// Exhaustive search over the integer box.
fn enumerate(p: &Problem) -> Option<i64> {
    let n = p.upper.len();
    let mut x = vec![0i64; n];
    let mut best: Option<i64> = None;
    loop {
        let feasible = p.rows.iter().all(|(a, s, b)| {
            let lhs: i64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
            match s {
                Sense::Le => lhs <= *b,
                Sense::Ge => lhs >= *b,
                Sense::Eq => lhs == *b,
            }
        });
        if feasible {
            let obj: i64 = p.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
            best = Some(match best {
                None => obj,
                Some(b) if p.maximize => b.max(obj),
                Some(b) => b.min(obj),
            });
        }
        let mut j = 0;
        while j < n && x[j] == p.upper[j] {
            x[j] = 0;
            j += 1;
        }
        if j == n {
            return best;
        }
        x[j] += 1;
    }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// LP optimum by enumerating every basic solution of the bounded relaxation.
fn vertex_oracle(p: &Problem) -> Option<f64> {
    let n = p.upper.len();
    let mut planes: Vec<(Vec<f64>, f64)> = p
        .rows
        .iter()
        .map(|(a, _, b)| (a.iter().map(|&v| v as f64).collect(), *b as f64))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, p.upper[j] as f64));
    }
    let feasible = |x: &[f64]| {
        x.iter().zip(&p.upper).all(|(&v, &u)| v >= -1e-7 && v <= u as f64 + 1e-7)
            && p.rows.iter().all(|(a, s, b)| {
                let lhs: f64 = a.iter().zip(x).map(|(&a, &x)| a as f64 * x).sum();
                let b = *b as f64;
                match s {
                    Sense::Le => lhs <= b + 1e-7,
                    Sense::Ge => lhs >= b - 1e-7,
                    Sense::Eq => (lhs - b).abs() <= 1e-7,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn recurse(
        start: usize,
        depth: usize,
        pick: &mut Vec<usize>,
        planes: &[(Vec<f64>, f64)],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == pick.len() {
            visit(pick);
            return;
        }
        for i in start..planes.len() {
            pick[depth] = i;
            recurse(i + 1, depth + 1, pick, planes, visit);
        }
    }
    let mut visit = |sel: &[usize]| {
        let a = sel.iter().map(|&i| planes[i].0.clone()).collect();
        let b = sel.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let obj: f64 = p.cost.iter().zip(&x).map(|(&c, &x)| c as f64 * x).sum();
                best = Some(match best {
                    None => obj,
                    Some(b) if p.maximize => b.max(obj),
                    Some(b) => b.min(obj),
                });
            }
        }
    };
    recurse(0, 0, &mut pick, &planes, &mut visit);
    best
}

fn sense_strategy() -> impl Strategy<Value = Sense> {
    prop_oneof![Just(Sense::Le), Just(Sense::Ge), Just(Sense::Eq)]
}

fn problem(max_vars: usize, max_upper: i64) -> impl Strategy<Value = Problem> {
    (1..=max_vars, 0..=4usize).prop_flat_map(move |(n, m)| {
        (
            any::<bool>(),
            prop::collection::vec(1..=max_upper, n),
            prop::collection::vec(-5i64..=5, n),
            prop::collection::vec(
                (prop::collection::vec(-4i64..=4, n), sense_strategy(), -6i64..=10),
                m,
            ),
        )
            .prop_map(|(maximize, upper, cost, rows)| Problem {
                maximize,
                upper,
                cost,
                rows,
            })
    })
}

fn quick() -> SolveParams {
    SolveParams::with_time_limit(30.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binary_programs_match_enumeration(p in problem(8, 1)) {
        let out = solve(&build(&p), &quick()).unwrap();
        match enumerate(&p) {
            None => prop_assert_eq!(out.status, SolveStatus::ProvenInfeasible),
            Some(best) => {
                prop_assert_eq!(out.status, SolveStatus::Optimal);
                prop_assert!((out.objective().unwrap() - best as f64).abs() < 1e-6);
                prop_assert!((out.best_bound.unwrap() - best as f64).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn general_integers_match_enumeration(p in problem(4, 3)) {
        let out = solve(&build(&p), &quick()).unwrap();
        match enumerate(&p) {
            None => prop_assert_eq!(out.status, SolveStatus::ProvenInfeasible),
            Some(best) => prop_assert!((out.objective().unwrap() - best as f64).abs() < 1e-6),
        }
    }

    #[test]
    fn relaxation_matches_vertex_enumeration(p in problem(3, 3)) {
        let lp = lp_relaxation_bound(&build(&p));
        match vertex_oracle(&p) {
            None => prop_assert_eq!(lp, Err(RelaxationError::Infeasible)),
            Some(v) => prop_assert!((lp.clone().unwrap() - v).abs() < 1e-6, "{:?} vs {}", lp, v),
        }
    }

    #[test]
    fn relaxation_dominates_and_incumbent_is_feasible(p in problem(6, 2)) {
        let model = build(&p);
        let out = solve(&model, &quick()).unwrap();
        if let Some(inc) = &out.incumbent {
            let (feas, integ) = model.max_violation(&inc.values);
            prop_assert!(feas <= 1e-6 && integ <= 1e-6);
            prop_assert!((model.objective_value(&inc.values) - inc.objective).abs() < 1e-6);
            let lp = lp_relaxation_bound(&model).unwrap();
            let root = out.root_bound.unwrap();
            prop_assert!((lp - root).abs() < 1e-6);
            if p.maximize {
                prop_assert!(lp >= inc.objective - 1e-6);
            } else {
                prop_assert!(lp <= inc.objective + 1e-6);
            }
        }
    }

    #[test]
    fn repeated_solves_are_identical(p in problem(6, 2)) {
        let model = build(&p);
        let a = solve(&model, &quick()).unwrap();
        let b = solve(&model, &quick()).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.incumbent, b.incumbent);
        prop_assert_eq!(a.nodes, b.nodes);
    }
}

#[test]
fn knapsack_with_saturated_capacity() {
    let p = Problem {
        maximize: true,
        upper: vec![1, 1, 1],
        cost: vec![3, 4, 5],
        rows: vec![(vec![2, 3, 4], Sense::Le, 5)],
    };
    let model = build(&p);
    let out = solve(&model, &SolveParams::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert_eq!(out.objective(), Some(7.0));
    assert_eq!(out.incumbent.unwrap().values, vec![1.0, 1.0, 0.0]);
    assert!((lp_relaxation_bound(&model).unwrap() - vertex_oracle(&p).unwrap()).abs() < 1e-9);
}

#[test]
fn larger_cover_problem_closes_gap() {
    // 30 sets over 40 elements, deterministic pattern
    let mut m = MilpModel::new(ObjectiveSense::Minimize);
    let sets: Vec<VarRef> = (0..30)
        .map(|s| m.add_variable(Variable::binary(format!("s{s}"))).unwrap())
        .collect();
    for e in 0..40usize {
        let terms: Vec<_> = sets
            .iter()
            .enumerate()
            .filter(|(s, _)| (s * 7 + e * 3) % 11 < 3)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        if !terms.is_empty() {
            m.add_constraint_terms(format!("e{e}"), terms, Sense::Ge, 1.0).unwrap();
        }
    }
    m.set_objective(sets.iter().map(|&v| (v, 1.0)).collect()).unwrap();
    let out = solve(&m, &SolveParams::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert_eq!(out.best_bound, out.objective());
    assert!(out.incumbent_time_s.unwrap() <= out.total_time_s);
}

#[test]
fn time_limit_is_respected() {
    let mut m = MilpModel::new(ObjectiveSense::Maximize);
    let vars: Vec<VarRef> = (0..60)
        .map(|j| m.add_variable(Variable::binary(format!("x{j}"))).unwrap())
        .collect();
    m.add_constraint_terms("cap", vars.iter().map(|&v| (v, 2.0)).collect(), Sense::Le, 61.0)
        .unwrap();
    m.set_objective(vars.iter().map(|&v| (v, 1.0)).collect()).unwrap();
    let out = solve(&m, &SolveParams::with_time_limit(0.5)).unwrap();
    assert!(out.total_time_s < 2.0);
    if out.status == SolveStatus::Optimal {
        assert_eq!(out.objective(), Some(30.0));
    } else {
        assert_eq!(out.status, SolveStatus::FeasibleTimeLimit);
    }
}
