mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use sdca_topk::prox::*;

#[test]
fn knapsack_matches_sort_scan() {
    let mut rng = rng(1);
    for i in 0..1000 {
        let b = random_vec(&mut rng, 8, 3.0);
        let (lo, hi, r) = match i % 3 {
            0 => (0.0, f64::INFINITY, rng.gen_range(0.1..4.0)),
            1 => (0.0, 0.7, rng.gen_range(0.1..5.0)),
            _ => (-0.5, 1.0, rng.gen_range(0.0..7.0)),
        };
        let equality = i % 2 == 0;
        let p = KnapsackProblem {
            b: &b,
            r,
            lo: Bound::Const(lo),
            hi: Bound::Const(hi),
            equality,
        };
        let x = solve_knapsack(&p).unwrap();
        let want = knapsack_sort_scan(&b, lo, hi, r, equality);
        assert!(
            max_abs_diff(&x, &want) <= 1e-10,
            "{b:?} {lo} {hi} {r}\n{x:?}\n{want:?}"
        );
    }
}

#[test]
fn topk_alpha_matches_enumeration() {
    let mut rng = rng(2);
    for _ in 0..200 {
        let d = rng.gen_range(2..=6);
        let k = rng.gen_range(2..=3);
        let rho = if rng.gen::<bool>() { 0.0 } else { 0.5 };
        let r = rng.gen_range(0.3..3.0);
        let b = random_vec(&mut rng, d, 2.0);
        let x = project_topk_alpha(&b, k, r, rho).unwrap();
        let want = topk_enumerate(&b, k, r, rho, true);
        assert!(
            max_abs_diff(&x, &want) <= 1e-8,
            "{b:?} k={k} r={r} rho={rho}\n{x:?}\n{want:?}"
        );
    }
}

#[test]
fn topk_beta_matches_enumeration() {
    let mut rng = rng(3);
    for _ in 0..200 {
        let d = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let rho = if rng.gen::<bool>() { 0.0 } else { 0.5 };
        let r = rng.gen_range(0.3..3.0);
        let b = random_vec(&mut rng, d, 2.0);
        let x = project_topk_beta(&b, k, r, rho).unwrap();
        let want = topk_enumerate(&b, k, r, rho, false);
        assert!(
            max_abs_diff(&x, &want) <= 1e-8,
            "{b:?} k={k} r={r} rho={rho}\n{x:?}\n{want:?}"
        );
    }
}

#[test]
fn bipartite_matches_both_oracles() {
    let mut rng = rng(4);
    for &m in &[4usize, 50, 500] {
        for _ in 0..50 {
            let b = random_vec(&mut rng, m, 1.0);
            let bb = random_vec(&mut rng, m, 1.0);
            let r = rng.gen_range(0.1..(m as f64 / 4.0));
            let (p, q) = project_bipartite(&b, &bb, r).unwrap();
            let (pw, qw) = bipartite_sort(&b, &bb, r);
            assert!(max_abs_diff(&p, &pw) <= 1e-10 && max_abs_diff(&q, &qw) <= 1e-10);
            if m == 4 {
                let (pe, qe) = bipartite_enumerate(&b, &bb, r);
                assert!(max_abs_diff(&p, &pe) <= 1e-8 && max_abs_diff(&q, &qe) <= 1e-8);
            }
        }
    }
}

#[test]
fn bipartite_unequal_blocks() {
    let mut rng = rng(5);
    for _ in 0..300 {
        let m = rng.gen_range(1..8);
        let n = rng.gen_range(1..8);
        let b = random_vec(&mut rng, m, 2.0);
        let bb = random_vec(&mut rng, n, 2.0);
        let r = rng.gen_range(0.01..3.0);
        let (p, q) = project_bipartite(&b, &bb, r).unwrap();
        let (pw, qw) = bipartite_sort(&b, &bb, r);
        assert!(max_abs_diff(&p, &pw) <= 1e-10, "{b:?} {bb:?} {r}");
        assert!(max_abs_diff(&q, &qw) <= 1e-10);
    }
}

#[test]
fn entropy_dual_matches_nested_search() {
    let mut rng = rng(6);
    for &alpha in &[0.1, 1.0, 10.0] {
        for k in 1..=3 {
            for _ in 0..15 {
                let b = random_vec(&mut rng, 5, 3.0);
                let r = prox_topk_entropy_dual(&b, alpha, k).unwrap();
                assert!(r.x.iter().all(|&x| x > 0.0));
                assert!(entropy_dual_residual(&b, alpha, k, &r) <= 1e-8);
                let (fo, _) = entropy_nested(&b, alpha, k);
                let f = entropy_objective(&b, alpha, &r.x);
                assert!((f - fo).abs() <= 1e-6, "{b:?} a={alpha} k={k}: {f} vs {fo}");
            }
        }
    }
}

#[test]
fn entropy_dual_large_scores_hit_cap() {
    let b = [12.0, 11.5, 0.0, -2.0, 1.0, 0.3];
    for &alpha in &[0.01, 1.0, 100.0] {
        let r = prox_topk_entropy_dual(&b, alpha, 3).unwrap();
        assert!(entropy_dual_residual(&b, alpha, 3, &r) <= 1e-8);
        let (fo, _) = entropy_nested(&b, alpha, 3);
        assert!((entropy_objective(&b, alpha, &r.x) - fo).abs() <= 1e-6);
    }
}

#[test]
fn entropy_primal_matches_nested_search() {
    let mut rng = rng(7);
    for k in 1..=3 {
        for _ in 0..40 {
            let a = random_vec(&mut rng, 6, 3.0);
            let ws = solve_topk_entropy_primal(&a, k).unwrap();
            let (fo, _) = entropy_nested(&a, 0.0, k);
            assert!(
                (ws.loss + fo).abs() <= 1e-6,
                "{a:?} k={k}: {} vs {}",
                ws.loss,
                -fo
            );
            let x = ws.x(&a, k);
            assert!((entropy_objective(&a, 0.0, &x) + ws.loss).abs() <= 1e-9);
        }
    }
}

#[test]
fn ml_entropy_matches_bisection() {
    let mut rng = rng(8);
    for _ in 0..100 {
        let ny = rng.gen_range(1..4);
        let nn = rng.gen_range(0..6);
        let alpha = 10f64.powf(rng.gen_range(-2.0..2.0));
        let b = random_vec(&mut rng, ny, 2.0);
        let bb = random_vec(&mut rng, nn, 2.0);
        let (p, q) = prox_ml_entropy(&b, &bb, alpha).unwrap();
        let s: f64 = p.iter().chain(&q).sum();
        assert!((s - 1.0).abs() <= 1e-8);
        let (po, qo) = ml_entropy_bisect(&b, &bb, alpha);
        let f = ml_entropy_objective(&b, &bb, alpha, &p, &q);
        let fo = ml_entropy_objective(&b, &bb, alpha, &po, &qo);
        assert!((f - fo).abs() <= 1e-6);
        assert!(max_abs_diff(&p, &po) <= 1e-7 && max_abs_diff(&q, &qo) <= 1e-7);
    }
}

#[test]
fn ml_entropy_symmetric_blocks() {
    let b = [0.3, -0.1];
    let (p, q) = prox_ml_entropy(&b, &b, 1.7).unwrap();
    assert!(max_abs_diff(&p, &q) <= 1e-15);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #[test]
    fn projections_are_feasible_and_idempotent(
        b in prop::collection::vec(-3.0f64..3.0, 1..10),
        k in 1usize..4,
        r in 0.1f64..3.0,
    ) {
        for variant in [TopkVariant::Alpha, TopkVariant::Beta] {
            let set = TopkSimplex { k, r, variant };
            let x = set.project(&b, 0.0).unwrap();
            prop_assert!(set.contains(&x, 1e-10));
            let y = set.project(&x, 0.0).unwrap();
            prop_assert!(max_abs_diff(&x, &y) <= 1e-10);
        }
    }

    #[test]
    fn projections_are_nonexpansive(
        pair in (1usize..9).prop_flat_map(|d| (
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
        )),
        k in 1usize..4,
    ) {
        let (b1, b2) = pair;
        for variant in [TopkVariant::Alpha, TopkVariant::Beta] {
            let set = TopkSimplex { k, r: 1.0, variant };
            let x1 = set.project(&b1, 0.0).unwrap();
            let x2 = set.project(&b2, 0.0).unwrap();
            prop_assert!(sq_dist(&x1, &x2) <= sq_dist(&b1, &b2) * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn larger_sets_are_closer(
        b in prop::collection::vec(-3.0f64..3.0, 1..10),
        k in 1usize..4,
        r in 0.1f64..3.0,
    ) {
        let xa = project_topk_alpha(&b, k, r, 0.0).unwrap();
        let xb = project_topk_beta(&b, k, r, 0.0).unwrap();
        let xs = solve_knapsack(&KnapsackProblem {
            equality: false,
            ..KnapsackProblem::simplex(&b, r)
        }).unwrap();
        let (da, db, ds) = (sq_dist(&xa, &b), sq_dist(&xb, &b), sq_dist(&xs, &b));
        prop_assert!(da >= db - 1e-12 && db >= ds - 1e-12);
    }

    #[test]
    fn bipartite_is_feasible(
        b in prop::collection::vec(-3.0f64..3.0, 1..10),
        bb in prop::collection::vec(-3.0f64..3.0, 1..10),
        r in 0.0f64..3.0,
    ) {
        let (p, q) = project_bipartite(&b, &bb, r).unwrap();
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        prop_assert!(p.iter().chain(&q).all(|&v| v >= 0.0));
        prop_assert!((sp - sq).abs() <= 1e-10 && sp <= r + 1e-10);
        let (p2, q2) = project_bipartite(&p, &q, r).unwrap();
        prop_assert!(max_abs_diff(&p, &p2) <= 1e-10 && max_abs_diff(&q, &q2) <= 1e-10);
    }

    #[test]
    fn entropy_outputs_positive(
        b in prop::collection::vec(-20.0f64..20.0, 4..10),
        k in 1usize..4,
        la in -2.0f64..2.0,
    ) {
        let alpha = 10f64.powf(la);
        let r = prox_topk_entropy_dual(&b, alpha, k).unwrap();
        prop_assert!(r.x.iter().all(|&x| x > 0.0));
        prop_assert!(r.s < 1.0);
        let cap = r.s / k as f64;
        prop_assert!(r.x.iter().all(|&x| x <= cap * (1.0 + 1e-12)));
    }
}
