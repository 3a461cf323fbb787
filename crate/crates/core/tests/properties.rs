use l0fit::constrained::{fit_constrained, fit_constrained_enumerate, fit_constrained_exact};
use l0fit::instances::{gen_planted, planted_labels, random_hierarchy, random_tree, rng_from_seed};
use l0fit::matrix::{l0_distance, DistanceMatrix};
use l0fit::problem::ConstrainedInstance;
use l0fit::tree::{dendrogram_of, matrix_to_tree, parse_newick_with_labels, serialize_newick};
use l0fit::treefit::{alpha_restrict, centroid_quasimetric, constrained_to_tree, fit_tree_with, tree_to_constrained};
use l0fit::ultrafit::{
    fit_ultrametric_exact, fit_ultrametric_exact_with_extra, fit_ultrametric_heuristic, UltraSolverSpec,
};
use l0fit::value::{half, int, Value};
use l0fit::verify::{check_tree_metric, check_ultrametric, WitnessKind};
use l0fit::{Execution, TreeMetricMatrix, UltrametricMatrix};
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("e{i}")).collect()
}

/// Matrices on 2..=max_n elements with entries in `0..=max_value`, halves
/// included when `halves` is set.
fn matrix(max_n: usize, max_value: i64, halves: bool) -> impl Strategy<Value = DistanceMatrix> {
    (2..=max_n).prop_flat_map(move |n| {
        let scale = if halves { 2 } else { 1 };
        prop::collection::vec(0..=max_value * scale, n * (n - 1) / 2).prop_map(move |raw| {
            let upper = raw.into_iter().map(|v| int(v) / int(scale)).collect();
            DistanceMatrix::from_upper(names(n), upper).unwrap()
        })
    })
}

fn relabel(m: &DistanceMatrix) -> DistanceMatrix {
    DistanceMatrix::from_upper(names(m.n()), m.upper().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn l0_is_a_metric(a in matrix(5, 3, false), seed in any::<u64>()) {
        let n = a.n();
        let mut rng = rng_from_seed(seed);
        let mut other = || {
            use rand::Rng;
            let upper = (0..a.pair_count()).map(|_| int(rng.gen_range(0..=3))).collect();
            DistanceMatrix::from_upper(names(n), upper).unwrap()
        };
        let (b, c) = (other(), other());
        prop_assert_eq!(l0_distance(&a, &a).unwrap(), 0);
        prop_assert_eq!(l0_distance(&a, &b).unwrap() == 0, a == b);
        prop_assert_eq!(l0_distance(&a, &b).unwrap(), l0_distance(&b, &a).unwrap());
        prop_assert!(l0_distance(&a, &c).unwrap() <= l0_distance(&a, &b).unwrap() + l0_distance(&b, &c).unwrap());
    }

    #[test]
    fn pointwise_clamp_bound(a in 0i64..6, b in 0i64..6, t in 0i64..=10) {
        let (lo, hi) = (a.min(b), a.max(b));
        let s = Value::from_integer((lo * 10 + (hi - lo) * t).into()) / int(10);
        let ne = |x: &Value, y: &Value| usize::from(x != y);
        let (a, b) = (int(a), int(b));
        prop_assert!(ne(&a, &s) + ne(&s, &b) <= 2 * ne(&a, &b));
    }

    #[test]
    fn witnesses_reverify(m in matrix(6, 4, true)) {
        if let Err(w) = check_ultrametric(&m) {
            prop_assert!(w.reverify(&m, None));
        }
        if let Err(w) = check_tree_metric(&m) {
            prop_assert!(w.reverify(&m, None));
        }
    }

    #[test]
    fn ultrametrics_are_tree_metrics(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = rng_from_seed(seed);
        let like = DistanceMatrix::zeros(planted_labels(n).unwrap());
        let u = random_hierarchy(n, 3, &mut rng).to_matrix(&like).unwrap();
        prop_assert!(check_tree_metric(&u).is_ok());
        let tree = dendrogram_of(&u);
        prop_assert_eq!(&tree.induced_matrix().unwrap(), u.as_matrix());
        prop_assert_eq!(&matrix_to_tree(&u).unwrap().induced_matrix().unwrap(), u.as_matrix());
    }

    #[test]
    fn solver_outputs_are_ultrametrics(m in matrix(5, 3, false)) {
        let h = fit_ultrametric_heuristic(&m);
        prop_assert!(check_ultrametric(&h).is_ok());
        let e = fit_ultrametric_exact(&m, 6, Execution::Sequential).unwrap();
        prop_assert!(check_ultrametric(&e).is_ok());
        prop_assert!(l0_distance(&m, &e).unwrap() <= l0_distance(&m, &h).unwrap());
    }

    #[test]
    fn heuristic_is_identity_on_ultrametrics(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = rng_from_seed(seed);
        let like = DistanceMatrix::zeros(planted_labels(n).unwrap());
        let u = random_hierarchy(n, 2, &mut rng).to_matrix(&like).unwrap();
        let h = fit_ultrametric_heuristic(&u);
        prop_assert_eq!(h.as_matrix(), u.as_matrix());
    }

    #[test]
    fn exact_modes_agree(m in matrix(5, 3, false)) {
        let s = fit_ultrametric_exact(&m, 6, Execution::Sequential).unwrap();
        let p = fit_ultrametric_exact(&m, 6, Execution::Parallel).unwrap();
        prop_assert_eq!(s.as_matrix(), p.as_matrix());
    }

    #[test]
    fn planted_flip_count(n in 2usize..12, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let k = ((n * (n - 1) / 2) as f64 * frac) as usize;
        let p = gen_planted(n, k, seed).unwrap();
        prop_assert_eq!(l0_distance(&p.matrix, &p.planted).unwrap(), k);
    }

    #[test]
    fn newick_round_trip(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = rng_from_seed(seed);
        let t = random_tree(planted_labels(n).unwrap(), 7, &mut rng);
        let m = t.induced_matrix().unwrap();
        let rebuilt = matrix_to_tree(&m).unwrap();
        prop_assert_eq!(&rebuilt.induced_matrix().unwrap(), &m);
        let back = parse_newick_with_labels(&serialize_newick(&rebuilt), m.labels()).unwrap();
        prop_assert_eq!(back.induced_matrix().unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn midpoint_heights_never_help(m in matrix(5, 4, false)) {
        let mut values = m.distinct_values();
        values.push(int(0));
        values.sort();
        values.dedup();
        let mids: Vec<Value> = values.windows(2).map(|w| half(&(&w[0] + &w[1]))).collect();
        let base = fit_ultrametric_exact(&m, 6, Execution::Sequential).unwrap();
        let wider = fit_ultrametric_exact_with_extra(&m, &mids, 6, Execution::Sequential).unwrap();
        prop_assert_eq!(l0_distance(&m, &base).unwrap(), l0_distance(&m, &wider).unwrap());
    }

    #[test]
    fn restricted_tree_iff_shifted_ultrametric(t in matrix(6, 4, true), a in 0usize..6) {
        // any metric is restricted to itself; the equivalence needs the
        // triangle inequality
        prop_assume!(!matches!(check_tree_metric(&t), Err(w) if w.kind == WitnessKind::TriangleViolation));
        let a = a % t.n();
        let c = centroid_quasimetric(&t, t.label(a)).unwrap();
        let shifted = t.map(|u, v, x| x + c.entry(u, v)).unwrap();
        prop_assert_eq!(check_tree_metric(&t).is_ok(), check_ultrametric(&shifted).is_ok());
        if check_tree_metric(&t).is_ok() && *c.m_alpha() > int(0) {
            let u = tree_to_constrained(&t, &c).unwrap();
            prop_assert_eq!(u.as_matrix(), &shifted);
            let back = constrained_to_tree(&u, &c).unwrap();
            prop_assert_eq!(back.as_matrix(), &t);
        }
    }

    #[test]
    fn restriction_keeps_good_pairs(seed in any::<u64>(), n in 2usize..9, a in 0usize..9) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let t = random_tree(planted_labels(n).unwrap(), 5, &mut rng);
        let induced = t.induced_matrix().unwrap();
        let d = induced.map(|_, _, v| if rng.gen_bool(0.3) { int(rng.gen_range(0..=10)) } else { v.clone() }).unwrap();
        let a = a % n;
        let r = alpha_restrict(&t, &d, d.label(a)).unwrap().induced_matrix().unwrap();
        let good = |u: usize| u == a || induced.get(a, u) == d.get(a, u);
        for (u, v) in d.pairs() {
            prop_assert_eq!(r.get(a, u), d.get(a, u));
            if good(u) && good(v) {
                prop_assert_eq!(r.get(u, v), induced.get(u, v));
            }
        }
    }

    #[test]
    fn bijection_outputs_are_nonnegative(d in matrix(5, 5, true), a in 0usize..5) {
        let a = a % d.n();
        let c = centroid_quasimetric(&d, d.label(a)).unwrap();
        prop_assert!(c.to_matrix().unwrap().upper().iter().all(|x| *x >= int(0)));
        if let Ok(inst) = l0fit::treefit::restricted_instance(&d, d.label(a)) {
            let (u, _) = fit_constrained(&inst, &UltraSolverSpec::heuristic()).unwrap();
            let t = constrained_to_tree(&u, &c).unwrap();
            prop_assert!(t.upper().iter().all(|x| *x >= int(0)));
            prop_assert_eq!(l0_distance(&u, inst.matrix()).unwrap(), l0_distance(&t, &d).unwrap());
        }
    }

    #[test]
    fn constrained_strategies_agree(d in matrix(4, 4, false), h in 1i64..5, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let n = d.n();
        let lower = (0..n).map(|u| if u == 0 { int(h) } else { int(rng.gen_range(1..=h)) }).collect();
        let inst = ConstrainedInstance::new(d.clone(), "e0", int(h), lower).unwrap();
        let dp = fit_constrained_exact(&inst, Execution::Sequential).unwrap();
        let en = fit_constrained_enumerate(&inst).unwrap();
        let opt = l0_distance(&d, &dp).unwrap();
        prop_assert_eq!(opt, l0_distance(&d, &en).unwrap());
        let (_, report) = fit_constrained(&inst, &UltraSolverSpec::exact()).unwrap();
        prop_assert!(report.cost <= 2 * opt);
    }

    #[test]
    fn fit_tree_is_schedule_independent(d in matrix(5, 3, false)) {
        let spec = UltraSolverSpec::exact();
        let (a, ra) = fit_tree_with(&d, &spec, Execution::Sequential).unwrap();
        let (b, rb) = fit_tree_with(&d, &spec, Execution::Parallel).unwrap();
        prop_assert_eq!(a.as_matrix(), b.as_matrix());
        prop_assert_eq!(ra.to_text(), rb.to_text());
        prop_assert_eq!(ra.cost, l0_distance(&d, &a).unwrap());
        prop_assert!(check_tree_metric(&a).is_ok());
    }
}

#[test]
fn certified_wrappers_reject_bad_matrices() {
    let bad = relabel(&DistanceMatrix::from_upper(["a", "b", "c"], vec![int(3), int(2), int(1)]).unwrap());
    assert!(UltrametricMatrix::new(bad.clone()).is_err());
    assert!(TreeMetricMatrix::new(bad).is_ok());
    let c4 = DistanceMatrix::from_upper(names(4), [1, 2, 1, 1, 2, 1].iter().map(|&v| int(v)).collect()).unwrap();
    assert!(TreeMetricMatrix::new(c4).is_err());
}
