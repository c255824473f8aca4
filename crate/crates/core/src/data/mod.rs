//! Datasets, file formats, the circle benchmark, kernels and splits.

mod circle;
mod csv_io;
mod gram;
mod libsvm;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::Target;

pub use circle::{
    circle_bayes_topk_error, circle_posterior, circle_segment, gen_circle, CircleSpec,
    CIRCLE_CLASSES, CIRCLE_SEGMENTS,
};
pub use csv_io::{parse_csv, read_csv, write_csv};
pub use gram::{
    decode_gram, gram_checksum, linear_cross_gram, linear_gram, parse_gram_sidecar, rbf_cross_gram,
    rbf_gram, read_gram, write_gram, Gram, GramMeta,
};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};

/// Feature matrix, stored row-wise.
#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    Dense {
        n: usize,
        d: usize,
        values: Vec<f64>,
    },
    /// Compressed sparse rows with sorted column indexes.
    Sparse {
        n: usize,
        d: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// One row of a feature matrix.
#[derive(Clone, Copy, Debug)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse(&'a [usize], &'a [f64]),
}

impl<'a> Row<'a> {
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Row::Dense(v) => v.iter().enumerate().for_each(|(j, &x)| f(j, x)),
            Row::Sparse(idx, v) => idx.iter().zip(v).for_each(|(&j, &x)| f(j, x)),
        }
    }

    pub fn sq_norm(&self) -> f64 {
        let mut s = 0.0;
        self.for_each(|_, x| s += x * x);
        s
    }

    pub fn dot(&self, other: &Row) -> f64 {
        match (*self, *other) {
            (Row::Dense(a), Row::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Row::Dense(a), r @ Row::Sparse(..)) | (r @ Row::Sparse(..), Row::Dense(a)) => {
                let mut s = 0.0;
                r.for_each(|j, x| {
                    if j < a.len() {
                        s += a[j] * x
                    }
                });
                s
            }
            (Row::Sparse(ia, va), Row::Sparse(ib, vb)) => {
                let (mut p, mut q, mut s) = (0, 0, 0.0);
                while p < ia.len() && q < ib.len() {
                    match ia[p].cmp(&ib[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s += va[p] * vb[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                s
            }
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.for_each(|j, x| out[j] = x);
        out
    }
}

impl Features {
    pub fn dense(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::Dimension(format!(
                "{} values for a {n}x{d} matrix",
                values.len()
            )));
        }
        Ok(Features::Dense { n, d, values })
    }

    pub fn n(&self) -> usize {
        match self {
            Features::Dense { n, .. } | Features::Sparse { n, .. } => *n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Features::Dense { d, .. } | Features::Sparse { d, .. } => *d,
        }
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match self {
            Features::Dense { d, values, .. } => Row::Dense(&values[i * d..(i + 1) * d]),
            Features::Sparse {
                indptr,
                indices,
                values,
                ..
            } => {
                let (a, b) = (indptr[i], indptr[i + 1]);
                Row::Sparse(&indices[a..b], &values[a..b])
            }
        }
    }

    /// Widens the feature space to `d` columns.
    pub fn with_dim(self, d: usize) -> Result<Self> {
        if d < self.d() {
            return Err(Error::Dimension(format!(
                "data has {} features, expected at most {d}",
                self.d()
            )));
        }
        Ok(match self {
            Features::Dense { n, d: old, values } if old != d => {
                let mut out = vec![0.0; n * d];
                for i in 0..n {
                    out[i * d..i * d + old].copy_from_slice(&values[i * old..(i + 1) * old]);
                }
                Features::Dense { n, d, values: out }
            }
            Features::Dense { n, values, .. } => Features::Dense { n, d, values },
            Features::Sparse {
                n,
                indptr,
                indices,
                values,
                ..
            } => Features::Sparse {
                n,
                d,
                indptr,
                indices,
                values,
            },
        })
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Features::Dense { values, .. } => values.clone(),
            _ => (0..self.n())
                .flat_map(|i| self.row(i).to_dense(self.d()))
                .collect(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Features {
        match self {
            Features::Dense { d, values, .. } => Features::Dense {
                n: rows.len(),
                d: *d,
                values: rows
                    .iter()
                    .flat_map(|&i| values[i * d..(i + 1) * d].iter().copied())
                    .collect(),
            },
            Features::Sparse { d, .. } => {
                let mut indptr = vec![0];
                let (mut indices, mut vals) = (Vec::new(), Vec::new());
                for &i in rows {
                    self.row(i).for_each(|j, x| {
                        indices.push(j);
                        vals.push(x);
                    });
                    indptr.push(indices.len());
                }
                Features::Sparse {
                    n: rows.len(),
                    d: *d,
                    indptr,
                    indices,
                    values: vals,
                }
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        let vals = match self {
            Features::Dense { values, .. } | Features::Sparse { values, .. } => values,
        };
        if let Some(p) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite feature value at entry {p}"
            )));
        }
        Ok(())
    }
}

/// Ground truth for a whole dataset, in internal class indexes.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Multiclass(Vec<usize>),
    /// Sorted, duplicate-free, nonempty label sets.
    Multilabel(Vec<Vec<usize>>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Multiclass(v) => v.len(),
            Labels::Multilabel(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_multilabel(&self) -> bool {
        matches!(self, Labels::Multilabel(_))
    }

    pub fn target(&self, i: usize) -> Target<'_> {
        match self {
            Labels::Multiclass(v) => Target::Class(v[i]),
            Labels::Multilabel(v) => Target::Set(&v[i]),
        }
    }

    /// Label set of example `i` (a singleton for multiclass data).
    pub fn set(&self, i: usize) -> &[usize] {
        match self {
            Labels::Multiclass(v) => std::slice::from_ref(&v[i]),
            Labels::Multilabel(v) => &v[i],
        }
    }

    pub fn select(&self, rows: &[usize]) -> Labels {
        match self {
            Labels::Multiclass(v) => Labels::Multiclass(rows.iter().map(|&i| v[i]).collect()),
            Labels::Multilabel(v) => {
                Labels::Multilabel(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Features, labels and the map from internal class index to external name.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Features,
    pub labels: Labels,
    pub classes: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks its invariants.
    pub fn new(features: Features, labels: Labels, classes: Vec<String>) -> Result<Self> {
        let ds = Dataset {
            features,
            labels,
            classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    pub fn m(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for {n} feature rows",
                self.labels.len()
            )));
        }
        self.features.check_finite()?;
        for i in 0..n {
            let set = self.labels.set(i);
            if set.is_empty() {
                return Err(Error::Label(format!("example {i} has an empty label set")));
            }
            if set.iter().any(|&c| c >= m) {
                return Err(Error::Label(format!(
                    "example {i} has a label outside [0, {m})"
                )));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Label(format!(
                    "example {i} has an unsorted or repeated label set"
                )));
            }
        }
        Ok(())
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(rows),
            labels: self.labels.select(rows),
            classes: self.classes.clone(),
        }
    }

    /// Re-expresses the labels in another class map, e.g. a trained model's.
    /// Unknown class names are an error; the feature space may widen to `d`.
    pub fn align(self, classes: &[String], d: usize) -> Result<Dataset> {
        let map: Vec<usize> =
            self.classes
                .iter()
                .map(|c| {
                    classes.iter().position(|x| x == c).ok_or_else(|| {
                        Error::Label(format!("class '{c}' is not known to the model"))
                    })
                })
                .collect::<Result<_>>()?;
        let labels = match self.labels {
            Labels::Multiclass(v) => Labels::Multiclass(v.into_iter().map(|c| map[c]).collect()),
            Labels::Multilabel(v) => Labels::Multilabel(
                v.into_iter()
                    .map(|s| {
                        let mut s: Vec<usize> = s.into_iter().map(|c| map[c]).collect();
                        s.sort_unstable();
                        s
                    })
                    .collect(),
            ),
        };
        Dataset::new(self.features.with_dim(d)?, labels, classes.to_vec())
    }
}

/// Orders raw class names: numerically when all parse as numbers, otherwise
/// lexicographically.
pub(crate) fn sorted_class_names(mut names: Vec<String>) -> Vec<String> {
    names.sort();
    names.dedup();
    let nums: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = nums {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(names).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        pairs.into_iter().map(|p| p.1).collect()
    } else {
        names
    }
}

/// Builds dense internal labels from per-example raw name lists.
pub(crate) fn index_labels(raw: Vec<Vec<String>>, multilabel: bool) -> (Labels, Vec<String>) {
    let classes = sorted_class_names(raw.iter().flatten().cloned().collect());
    let lookup: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let index = |s: &String| lookup[s.as_str()];
    let sets: Vec<Vec<usize>> = raw
        .iter()
        .map(|r| {
            let mut v: Vec<usize> = r.iter().map(index).collect();
            v.sort_unstable();
            v
        })
        .collect();
    let labels = if multilabel {
        Labels::Multilabel(sets)
    } else {
        Labels::Multiclass(sets.into_iter().map(|s| s[0]).collect())
    };
    (labels, classes)
}

/// Assigns each of `n` examples to one of `folds` folds.
///
/// With `classes`, folds are stratified: each class is shuffled and dealt
/// round-robin. If some class has fewer members than folds, falls back to a
/// plain shuffle and logs a warning.
pub fn make_folds(
    n: usize,
    folds: usize,
    seed: u64,
    classes: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::Config(format!(
            "need 2 <= folds <= n, got folds = {folds}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; n];
    if let Some(cls) = classes {
        if cls.len() != n {
            return Err(Error::Dimension(format!(
                "{} class labels for {n} examples",
                cls.len()
            )));
        }
        let m = cls.iter().max().map_or(0, |&c| c + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (i, &c) in cls.iter().enumerate() {
            members[c].push(i);
        }
        if members.iter().all(|v| v.is_empty() || v.len() >= folds) {
            let mut next = 0;
            for group in &mut members {
                group.shuffle(&mut rng);
                for &i in group.iter() {
                    assign[i] = next % folds;
                    next += 1;
                }
            }
            return Ok(assign);
        }
        log::warn!("a class has fewer than {folds} members; folds are not stratified");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    for (pos, &i) in idx.iter().enumerate() {
        assign[i] = pos % folds;
    }
    Ok(assign)
}

/// Keeps only the label with the largest size annotation per example; ties go
/// to the smaller class index.
pub fn largest_label_filter(ds: &Dataset, sizes: &[Vec<f64>]) -> Result<Dataset> {
    if sizes.len() != ds.n() {
        return Err(Error::Dimension(format!(
            "{} size annotations for {} examples",
            sizes.len(),
            ds.n()
        )));
    }
    let labels = (0..ds.n())
        .map(|i| {
            let set = ds.labels.set(i);
            if sizes[i].len() != set.len() {
                return Err(Error::Dimension(format!(
                    "example {i}: {} sizes for {} labels",
                    sizes[i].len(),
                    set.len()
                )));
            }
            let mut best = 0;
            for p in 1..set.len() {
                if sizes[i][p] > sizes[i][best] {
                    best = p;
                }
            }
            Ok(set[best])
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        ds.features.clone(),
        Labels::Multiclass(labels),
        ds.classes.clone(),
    )
}
