//! Reproduces the circle benchmark: each method is trained over the C grid,
//! the C maximizing validation top-k accuracy is chosen per k, and test
//! top-1/top-2 accuracy is printed.
//!
//! Usage: `cargo run --release --example circle -- [seed]`

use sdca_topk::data::{gen_circle, CircleSpec, Dataset, Labels};
use sdca_topk::losses::{LossFamily, LossSpec};
use sdca_topk::metrics::topk_accuracy;
use sdca_topk::solver::{
    finetune_truncated_entropy, predict_scores, sdca_train, FinetuneConfig, Model, Regularization,
    TrainConfig, TrainMode,
};

fn accuracies(model: &Model, ds: &Dataset) -> [f64; 2] {
    let s = predict_scores(model, &ds.features).unwrap();
    let Labels::Multiclass(y) = &ds.labels else { unreachable!() };
    [topk_accuracy(&s, y, 1), topk_accuracy(&s, y, 2)]
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().unwrap());
    let (train, val, test) = gen_circle(&CircleSpec { seed, ..CircleSpec::default() }).unwrap();
    let methods: Vec<(&str, LossFamily, usize, f64)> = vec![
        ("ova-hinge", LossFamily::OvaHinge, 1, 0.0),
        ("ova-logistic", LossFamily::OvaLogistic, 1, 0.0),
        ("multi-svm", LossFamily::MultiSvm, 1, 0.0),
        ("softmax", LossFamily::Softmax, 1, 0.0),
        ("smooth top-1 svm", LossFamily::TopkSvmAlpha, 1, 1.0),
        ("top-2 svm", LossFamily::TopkSvmAlpha, 2, 0.0),
        ("smooth top-2 svm", LossFamily::TopkSvmAlpha, 2, 1.0),
        ("top-2 entropy", LossFamily::TopkEntropy, 2, 0.0),
        ("truncated top-2 entropy", LossFamily::TopkEntropyTruncated, 2, 0.0),
    ];
    for (name, family, k, gamma) in methods {
        let mut best = [(f64::NEG_INFINITY, 0.0, 0.0); 2];
        for e in -18..=18 {
            let c = 2f64.powi(e);
            let cfg = TrainConfig {
                reg: Regularization::C(c),
                epsilon: 1e-3,
                max_epochs: 2000,
                seed,
                gap_check_period: 1,
            };
            let model = if family == LossFamily::TopkEntropyTruncated {
                let spec = LossSpec::new(LossFamily::Softmax, 1, 0.0).unwrap();
                let init = sdca_train(&train, &spec, &cfg, &TrainMode::Linear).unwrap().model;
                let lambda = cfg.reg.lambda(train.n());
                finetune_truncated_entropy(&train, k, lambda, &init, &FinetuneConfig::default())
                    .unwrap()
                    .model
            } else {
                let spec = LossSpec::new(family, k, gamma).unwrap();
                sdca_train(&train, &spec, &cfg, &TrainMode::Linear).unwrap().model
            };
            let v = accuracies(&model, &val);
            let t = accuracies(&model, &test);
            for j in 0..2 {
                if v[j] > best[j].0 {
                    best[j] = (v[j], t[j], c);
                }
            }
        }
        println!(
            "{name:>24}: top-1 {:5.1} (C={:e})  top-2 {:5.1} (C={:e})",
            100.0 * best[0].1,
            best[0].2,
            100.0 * best[1].1,
            best[1].2
        );
    }
}
