use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Features, Labels};
use crate::error::{Error, Result};

/// Segment boundaries on `[0, 7]`.
pub const CIRCLE_SEGMENTS: [(f64, f64); 5] =
    [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 6.0), (6.0, 7.0)];

/// Per-class sampling weights over the segments.
pub const CIRCLE_CLASSES: [[f64; 5]; 3] = [
    [0.0, 1.0, 0.4, 0.3, 0.0],
    [1.0, 0.0, 0.1, 0.7, 0.0],
    [0.0, 0.0, 0.5, 0.0, 1.0],
];

const SPAN: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircleSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for CircleSpec {
    fn default() -> Self {
        CircleSpec {
            n_train: 200,
            n_val: 200,
            n_test: 200_000,
            seed: 0,
        }
    }
}

fn sample(n: usize, seed: u64, stream: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let pick: Vec<WeightedIndex<f64>> = CIRCLE_CLASSES
        .iter()
        .map(|w| WeightedIndex::new(w).expect("valid weights"))
        .collect();
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        let (lo, hi) = CIRCLE_SEGMENTS[pick[c].sample(&mut rng)];
        let v = rng.gen_range(lo..hi) / SPAN;
        let angle = 2.0 * PI * v;
        values.push(angle.cos());
        values.push(angle.sin());
        labels.push(c);
    }
    Dataset {
        features: Features::Dense { n, d: 2, values },
        labels: Labels::Multiclass(labels),
        classes: vec!["1".into(), "2".into(), "3".into()],
    }
}

/// Generates the three-class circle benchmark: a point of class `c` falls in
/// a segment of `[0, 7]` drawn with the class's normalized weights, uniformly
/// within it, and is mapped to `(cos 2πv/7, sin 2πv/7)`. Classes alternate so
/// each split is balanced. Train, validation and test use ChaCha8 streams 0,
/// 1 and 2 of the seed.
pub fn gen_circle(spec: &CircleSpec) -> Result<(Dataset, Dataset, Dataset)> {
    if spec.n_train == 0 {
        return Err(Error::Config("the training split must be nonempty".into()));
    }
    Ok((
        sample(spec.n_train, spec.seed, 0),
        sample(spec.n_val, spec.seed, 1),
        sample(spec.n_test, spec.seed, 2),
    ))
}

/// Segment index of a point on the circle.
pub fn circle_segment(x: &[f64]) -> usize {
    let mut turn = x[1].atan2(x[0]) / (2.0 * PI);
    if turn < 0.0 {
        turn += 1.0;
    }
    let v = turn * SPAN;
    CIRCLE_SEGMENTS
        .iter()
        .position(|&(_, hi)| v < hi)
        .unwrap_or(CIRCLE_SEGMENTS.len() - 1)
}

fn segment_posterior(s: usize) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (c, w) in CIRCLE_CLASSES.iter().enumerate() {
        p[c] = w[s] / w.iter().sum::<f64>();
    }
    let z: f64 = p.iter().sum();
    p.map(|v| v / z)
}

/// Class posterior `p_y(x)` of the generating distribution under equal class
/// priors.
pub fn circle_posterior(x: &[f64]) -> [f64; 3] {
    segment_posterior(circle_segment(x))
}

/// Exact Bayes top-k error of the generating distribution.
pub fn circle_bayes_topk_error(k: usize) -> f64 {
    (0..CIRCLE_SEGMENTS.len())
        .map(|s| {
            let mass: f64 = CIRCLE_CLASSES
                .iter()
                .map(|w| w[s] / w.iter().sum::<f64>() / 3.0)
                .sum();
            let mut p = segment_posterior(s);
            p.sort_by(|a, b| b.total_cmp(a));
            mass * (1.0 - p.iter().take(k).sum::<f64>()).max(0.0)
        })
        .sum()
}
