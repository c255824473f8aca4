//! Top-k, ranking and partition metrics, the Bayes top-k error, and
//! threshold selection.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::data::Labels;
use crate::error::{Error, Result};
use crate::solver::Scores;

/// `k` values reported by [`MetricsReport`].
pub const REPORT_KS: [usize; 5] = [1, 2, 3, 5, 10];

/// 1 if at least `k` classes score strictly above the true class.
pub fn topk_error(scores: &[f64], y: usize, k: usize) -> f64 {
    let sy = scores[y];
    let above = scores.iter().filter(|&&s| s > sy).count();
    if above >= k {
        1.0
    } else {
        0.0
    }
}

pub fn topk_accuracy(scores: &Scores, labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let err: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| topk_error(scores.row(i), y, k))
        .sum();
    1.0 - err / n as f64
}

/// `1 − Σ_{j≤k} p_{τ_j}` with `τ` sorting `p` in decreasing order.
pub fn bayes_topk_error(p: &[f64], k: usize) -> Result<f64> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 * p.len().max(1) as f64 {
        return Err(Error::Domain(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let mut s = p.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((1.0 - s.iter().take(k).sum::<f64>()).max(0.0))
}

/// Classes ordered by decreasing score, ties by index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingMetrics {
    pub rank_loss: f64,
    /// Examples left out of the rank loss because `Y` is empty or full.
    pub rank_loss_excluded: usize,
    pub precision_at_k: Vec<(usize, f64)>,
    pub recall_at_k: Vec<(usize, f64)>,
    pub map: f64,
}

/// Rank loss, precision/recall at each `k`, and mean average precision.
///
/// A pair `(y, ȳ)` counts as reversed when `f_y ≤ f_ȳ`. AP is the mean
/// precision at the rank of each positive, without interpolation; classes
/// without positives are left out of the mean.
pub fn ranking_metrics(
    scores: &Scores,
    sets: &[Vec<usize>],
    ks: &[usize],
) -> Result<RankingMetrics> {
    let (n, m) = (scores.n, scores.m);
    if sets.len() != n {
        return Err(Error::Dimension(format!(
            "{} label sets for {n} score rows",
            sets.len()
        )));
    }
    let mut member = vec![false; n * m];
    for (i, s) in sets.iter().enumerate() {
        for &j in s {
            if j >= m {
                return Err(Error::Label(format!(
                    "label {j} out of range for {m} classes"
                )));
            }
            member[i * m + j] = true;
        }
    }
    let (mut rl, mut rl_count, mut excluded) = (0.0, 0usize, 0usize);
    let mut prec = vec![0.0; ks.len()];
    let mut rec = vec![0.0; ks.len()];
    let mut rec_count = 0usize;
    for i in 0..n {
        let f = scores.row(i);
        let mem = &member[i * m..(i + 1) * m];
        let npos = sets[i].len();
        if npos == 0 || npos == m {
            excluded += 1;
        } else {
            let mut bad = 0usize;
            for y in (0..m).filter(|&j| mem[j]) {
                bad += (0..m).filter(|&j| !mem[j] && f[y] <= f[j]).count();
            }
            rl += bad as f64 / (npos * (m - npos)) as f64;
            rl_count += 1;
        }
        let order = ranking(f);
        for (t, &k) in ks.iter().enumerate() {
            let hits = order.iter().take(k).filter(|&&j| mem[j]).count() as f64;
            prec[t] += hits / k as f64;
            if npos > 0 {
                rec[t] += hits / npos as f64;
            }
        }
        if npos > 0 {
            rec_count += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} examples with empty or full label sets left out of the rank loss");
    }
    let mut ap_sum = 0.0;
    let mut ap_count = 0usize;
    for j in 0..m {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            scores.row(b)[j]
                .total_cmp(&scores.row(a)[j])
                .then(a.cmp(&b))
        });
        let (mut hits, mut sum) = (0usize, 0.0);
        for (r, &i) in idx.iter().enumerate() {
            if member[i * m + j] {
                hits += 1;
                sum += hits as f64 / (r + 1) as f64;
            }
        }
        if hits > 0 {
            ap_sum += sum / hits as f64;
            ap_count += 1;
        }
    }
    let mean = |s: f64, c: usize| if c > 0 { s / c as f64 } else { 0.0 };
    Ok(RankingMetrics {
        rank_loss: mean(rl, rl_count),
        rank_loss_excluded: excluded,
        precision_at_k: ks
            .iter()
            .zip(&prec)
            .map(|(&k, &p)| (k, mean(p, n)))
            .collect(),
        recall_at_k: ks
            .iter()
            .zip(&rec)
            .map(|(&k, &r)| (k, mean(r, rec_count)))
            .collect(),
        map: mean(ap_sum, ap_count),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionMetrics {
    pub f1_instance: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub accuracy: f64,
    pub subset_accuracy: f64,
    pub hamming_loss: f64,
}

fn f1(tp: f64, fp: f64, fn_: f64) -> f64 {
    let den = 2.0 * tp + fp + fn_;
    if den > 0.0 {
        2.0 * tp / den
    } else {
        0.0
    }
}

/// Metrics of the prediction `h(x) = {y : f_y(x) ≥ δ}`.
pub fn partition_metrics(
    scores: &Scores,
    sets: &[Vec<usize>],
    delta: f64,
) -> Result<PartitionMetrics> {
    let (n, m) = (scores.n, scores.m);
    if sets.len() != n {
        return Err(Error::Dimension(format!(
            "{} label sets for {n} score rows",
            sets.len()
        )));
    }
    if n == 0 {
        return Err(Error::Config("no examples to evaluate".into()));
    }
    let mut col = vec![[0.0f64; 3]; m];
    let mut total = [0.0f64; 3];
    let (mut f1i, mut acc, mut sacc, mut ham) = (0.0, 0.0, 0.0, 0.0);
    for (i, set) in sets.iter().enumerate() {
        let f = scores.row(i);
        let mut mem = vec![false; m];
        for &j in set {
            if j >= m {
                return Err(Error::Label(format!(
                    "label {j} out of range for {m} classes"
                )));
            }
            mem[j] = true;
        }
        let mut row = [0.0f64; 3];
        for j in 0..m {
            let pred = f[j] >= delta;
            let cell = match (pred, mem[j]) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => continue,
            };
            row[cell] += 1.0;
            col[j][cell] += 1.0;
            total[cell] += 1.0;
        }
        let [tp, fp, fn_] = row;
        f1i += f1(tp, fp, fn_);
        let union = tp + fp + fn_;
        acc += if union > 0.0 { tp / union } else { 1.0 };
        if fp == 0.0 && fn_ == 0.0 {
            sacc += 1.0;
        }
        ham += fp + fn_;
    }
    let nf = n as f64;
    Ok(PartitionMetrics {
        f1_instance: f1i / nf,
        f1_macro: col.iter().map(|c| f1(c[0], c[1], c[2])).sum::<f64>() / m as f64,
        f1_micro: f1(total[0], total[1], total[2]),
        accuracy: acc / nf,
        subset_accuracy: sacc / nf,
        hamming_loss: ham / (nf * m as f64),
    })
}

/// A partition metric to optimize when choosing `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionMetric {
    F1Instance,
    F1Macro,
    F1Micro,
    Accuracy,
    SubsetAccuracy,
    HammingLoss,
}

impl PartitionMetric {
    pub fn value(self, p: &PartitionMetrics) -> f64 {
        match self {
            PartitionMetric::F1Instance => p.f1_instance,
            PartitionMetric::F1Macro => p.f1_macro,
            PartitionMetric::F1Micro => p.f1_micro,
            PartitionMetric::Accuracy => p.accuracy,
            PartitionMetric::SubsetAccuracy => p.subset_accuracy,
            PartitionMetric::HammingLoss => p.hamming_loss,
        }
    }

    pub fn is_loss(self) -> bool {
        self == PartitionMetric::HammingLoss
    }
}

impl FromStr for PartitionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "f1_instance" => PartitionMetric::F1Instance,
            "f1_macro" => PartitionMetric::F1Macro,
            "f1_micro" => PartitionMetric::F1Micro,
            "accuracy" => PartitionMetric::Accuracy,
            "subset_accuracy" => PartitionMetric::SubsetAccuracy,
            "hamming_loss" => PartitionMetric::HammingLoss,
            other => return Err(Error::Config(format!("unknown partition metric '{other}'"))),
        })
    }
}

/// `{−10^e} ∪ {0} ∪ {10^e}` for `e = −5.9, −5.7, …, 0.9`: 71 thresholds in
/// increasing order.
pub fn default_threshold_grid() -> Vec<f64> {
    let pos: Vec<f64> = (0..35).map(|t| 10f64.powf(-5.9 + 0.2 * t as f64)).collect();
    let mut g: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    g.push(0.0);
    g.extend(pos);
    g
}

/// Picks the grid threshold with the best metric value; ties go to the
/// smaller `|δ|`, then the smaller `δ`.
pub fn tune_threshold(
    scores: &Scores,
    sets: &[Vec<usize>],
    metric: PartitionMetric,
    grid: &[f64],
) -> Result<(f64, f64)> {
    if grid.is_empty() || scores.n == 0 {
        return Err(Error::Config(
            "threshold tuning needs a grid and examples".into(),
        ));
    }
    let mut best: Option<(f64, f64)> = None;
    for &d in grid {
        let v = metric.value(&partition_metrics(scores, sets, d)?);
        let better = match best {
            None => true,
            Some((bd, bv)) => {
                let gain = if metric.is_loss() { bv - v } else { v - bv };
                gain > 0.0 || (gain == 0.0 && (d.abs(), d) < (bd.abs(), bd))
            }
        };
        if better {
            best = Some((d, v));
        }
    }
    Ok(best.expect("nonempty grid"))
}

/// Grid threshold whose mean predicted label count is closest to
/// `cardinality`; ties go to the smaller `|δ|`.
pub fn cardinality_threshold(scores: &Scores, cardinality: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() || scores.n == 0 {
        return Err(Error::Config(
            "cardinality matching needs a grid and examples".into(),
        ));
    }
    let mut best: (f64, f64) = (f64::INFINITY, 0.0);
    for &d in grid {
        let count = scores.values.iter().filter(|&&s| s >= d).count() as f64 / scores.n as f64;
        let dev = (count - cardinality).abs();
        if dev < best.0 || (dev == best.0 && d.abs() < best.1.abs()) {
            best = (dev, d);
        }
    }
    Ok(best.1)
}

/// Every metric of one evaluation, printed as `key value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub n: usize,
    pub m: usize,
    pub topk_accuracy: Vec<(usize, f64)>,
    pub ranking: RankingMetrics,
    pub partition: PartitionMetrics,
    pub threshold: f64,
}

impl MetricsReport {
    /// Evaluates everything at threshold `delta`. Top-k accuracy is the
    /// recall at k, which equals it for single-label data.
    pub fn compute(scores: &Scores, labels: &Labels, delta: f64) -> Result<Self> {
        let sets: Vec<Vec<usize>> = (0..labels.len()).map(|i| labels.set(i).to_vec()).collect();
        let ranking = ranking_metrics(scores, &sets, &REPORT_KS)?;
        let topk_accuracy = match labels {
            Labels::Multiclass(y) => REPORT_KS
                .iter()
                .map(|&k| (k, topk_accuracy(scores, y, k)))
                .collect(),
            Labels::Multilabel(_) => ranking.recall_at_k.clone(),
        };
        Ok(MetricsReport {
            n: scores.n,
            m: scores.m,
            topk_accuracy,
            partition: partition_metrics(scores, &sets, delta)?,
            ranking,
            threshold: delta,
        })
    }

    /// Keys in output order.
    pub fn keys() -> Vec<String> {
        let mut k = vec!["n".to_string(), "m".to_string()];
        k.extend(REPORT_KS.iter().map(|k| format!("top{k}_accuracy")));
        k.push("rank_loss".into());
        k.push("rank_loss_excluded".into());
        k.extend(REPORT_KS.iter().map(|k| format!("precision_at_{k}")));
        k.extend(REPORT_KS.iter().map(|k| format!("recall_at_{k}")));
        for s in [
            "map",
            "f1_instance",
            "f1_macro",
            "f1_micro",
            "accuracy",
            "subset_accuracy",
            "hamming_loss",
            "threshold",
        ] {
            k.push(s.into());
        }
        k
    }

    fn values(&self) -> Vec<String> {
        let r = &self.ranking;
        let p = &self.partition;
        let mut v = vec![self.n.to_string(), self.m.to_string()];
        v.extend(self.topk_accuracy.iter().map(|x| x.1.to_string()));
        v.push(r.rank_loss.to_string());
        v.push(r.rank_loss_excluded.to_string());
        v.extend(r.precision_at_k.iter().map(|x| x.1.to_string()));
        v.extend(r.recall_at_k.iter().map(|x| x.1.to_string()));
        for x in [
            r.map,
            p.f1_instance,
            p.f1_macro,
            p.f1_micro,
            p.accuracy,
            p.subset_accuracy,
            p.hamming_loss,
            self.threshold,
        ] {
            v.push(x.to_string());
        }
        v
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (k, v) in Self::keys().iter().zip(self.values()) {
            writeln!(s, "{k} {v}")?;
        }
        f.write_str(&s)
    }
}

/// Parses a report written by `Display` into `(key, value)` pairs.
pub fn parse_report(text: &str) -> Result<Vec<(String, f64)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| {
            let (k, v) = l
                .split_once(' ')
                .ok_or_else(|| Error::parse(no + 1, "expected 'key value'"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(no + 1, format!("bad value '{v}'")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}
