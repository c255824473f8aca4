mod common;

use common::*;
use rand::Rng;
use sdca_topk::data::Labels;
use sdca_topk::metrics::*;
use sdca_topk::solver::Scores;

#[test]
fn ranking_metrics_match_oracles() {
    let mut rng = rng(31);
    for trial in 0..300 {
        let n = rng.gen_range(1..50);
        let m = rng.gen_range(2..9);
        let s = random_scores(&mut rng, n, m, trial % 2 == 0);
        let sets = random_sets(&mut rng, n, m);
        let ks: Vec<usize> = (1..=m).collect();
        let r = ranking_metrics(&s, &sets, &ks).unwrap();
        if sets.iter().any(|y| y.len() < m) {
            assert!((r.rank_loss - oracle_rank_loss(&s, &sets)).abs() <= 1e-12);
        }
        for (t, &k) in ks.iter().enumerate() {
            let (p, rc) = oracle_prec_rec(&s, &sets, k);
            assert!((r.precision_at_k[t].1 - p).abs() <= 1e-12);
            assert!((r.recall_at_k[t].1 - rc).abs() <= 1e-12);
        }
        assert!((r.recall_at_k[m - 1].1 - 1.0).abs() <= 1e-12);
        assert!((r.map - oracle_map(&s, &sets)).abs() <= 1e-12);
    }
}

#[test]
fn partition_metrics_match_oracle() {
    let mut rng = rng(32);
    for trial in 0..300 {
        let n = rng.gen_range(1..50);
        let m = rng.gen_range(2..9);
        let s = random_scores(&mut rng, n, m, trial % 2 == 0);
        let sets = random_sets(&mut rng, n, m);
        let delta = rng.gen_range(-1..2) as f64 * 0.5;
        let got = partition_metrics(&s, &sets, delta).unwrap();
        let want = oracle_partition(&s, &sets, delta);
        for (a, b) in [
            (got.f1_instance, want.f1_instance),
            (got.f1_macro, want.f1_macro),
            (got.f1_micro, want.f1_micro),
            (got.accuracy, want.accuracy),
            (got.subset_accuracy, want.subset_accuracy),
            (got.hamming_loss, want.hamming_loss),
        ] {
            assert!((a - b).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn topk_accuracy_equals_recall_on_singletons() {
    let mut rng = rng(33);
    for _ in 0..200 {
        let n = rng.gen_range(1..40);
        let m = rng.gen_range(2..8);
        let s = random_scores(&mut rng, n, m, false);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let sets: Vec<Vec<usize>> = y.iter().map(|&c| vec![c]).collect();
        let ks: Vec<usize> = (1..=m).collect();
        let r = ranking_metrics(&s, &sets, &ks).unwrap();
        let mut prev = 0.0;
        for (t, &k) in ks.iter().enumerate() {
            let acc = topk_accuracy(&s, &y, k);
            assert!((acc - r.recall_at_k[t].1).abs() <= 1e-12);
            assert!(acc >= prev);
            prev = acc;
            // precision·k = recall·|Y| on singletons
            assert!((r.precision_at_k[t].1 * k as f64 - r.recall_at_k[t].1).abs() <= 1e-12);
        }
    }
}

#[test]
fn rank_loss_invariant_under_monotone_maps() {
    let mut rng = rng(34);
    for _ in 0..100 {
        let (n, m) = (20, 6);
        let s = random_scores(&mut rng, n, m, true);
        let t = Scores {
            values: s.values.iter().map(|v| (3.0 * v).exp() - 7.0).collect(),
            ..s.clone()
        };
        let sets = random_sets(&mut rng, n, m);
        let a = ranking_metrics(&s, &sets, &[2]).unwrap();
        let b = ranking_metrics(&t, &sets, &[2]).unwrap();
        assert_eq!(a.rank_loss, b.rank_loss);
    }
}

#[test]
fn bayes_error_matches_subset_enumeration() {
    let mut rng = rng(35);
    for _ in 0..500 {
        let m = rng.gen_range(1..9);
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / total).collect();
        for k in 1..=m {
            let want = bayes_enumerate(&p, k);
            if let Ok(got) = bayes_topk_error(&p, k) {
                assert_eq!(got, want, "p = {p:?}, k = {k}");
            }
        }
    }
}

#[test]
fn tuned_threshold_is_grid_optimal() {
    let mut rng = rng(36);
    let grid = default_threshold_grid();
    for _ in 0..30 {
        let (n, m) = (30, 5);
        let s = random_scores(&mut rng, n, m, false);
        let sets = random_sets(&mut rng, n, m);
        for metric in [PartitionMetric::F1Instance, PartitionMetric::HammingLoss, PartitionMetric::SubsetAccuracy] {
            let (d, v) = tune_threshold(&s, &sets, metric, &grid).unwrap();
            assert!(grid.contains(&d));
            let re = metric.value(&partition_metrics(&s, &sets, d).unwrap());
            assert_eq!(re, v);
            for &g in &grid {
                let w = metric.value(&partition_metrics(&s, &sets, g).unwrap());
                if metric.is_loss() {
                    assert!(v <= w);
                } else {
                    assert!(v >= w);
                }
            }
            let card: f64 = sets.iter().map(|s| s.len() as f64).sum::<f64>() / n as f64;
            let dc = cardinality_threshold(&s, card, &grid).unwrap();
            let wc = metric.value(&partition_metrics(&s, &sets, dc).unwrap());
            if metric.is_loss() {
                assert!(v <= wc);
            } else {
                assert!(v >= wc);
            }
        }
    }
}

#[test]
fn report_keys_are_fixed() {
    let mut rng = rng(37);
    for m in [2, 3, 12] {
        let s = random_scores(&mut rng, 10, m, false);
        let y: Vec<usize> = (0..10).map(|i| i % m).collect();
        let r = MetricsReport::compute(&s, &Labels::Multiclass(y), 0.0).unwrap();
        let kv = parse_report(&r.to_string()).unwrap();
        assert_eq!(kv.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), MetricsReport::keys());
        for (k, v) in kv {
            if k != "threshold" && k != "n" && k != "m" && k != "rank_loss_excluded" {
                assert!((0.0..=1.0).contains(&v), "{k} = {v}");
            }
        }
    }
}
