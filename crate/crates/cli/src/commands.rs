use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use sdca_topk::data::{
    gen_circle, make_folds, read_csv, read_gram, read_libsvm, write_csv, write_libsvm, CircleSpec,
    Dataset, Labels,
};
use sdca_topk::losses::{LossFamily, LossSpec};
use sdca_topk::metrics::{
    default_threshold_grid, ranking, ranking_metrics, topk_accuracy, tune_threshold,
    MetricsReport, PartitionMetric,
};
use sdca_topk::solver::{
    finetune_truncated_entropy, predict_scores, predict_scores_gram, sdca_train, FinetuneConfig,
    GapRecord, Kernel, Model, ModelKind, Regularization, Scores, TrainConfig, TrainMode,
};
use sdca_topk::Error;

use crate::args::{CvArgs, EvaluateArgs, GenArgs, LossArgs, PredictArgs, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    /// 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e {
                Error::Config(_) | Error::Unsupported(_) | Error::Domain(_) => 1,
                Error::Parse { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Label(_)
                | Error::Dimension(_) => 2,
                Error::Numeric(_) | Error::Infeasible(_) => 3,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// CSV when the extension is `.csv`, LibSVM otherwise.
pub fn load_data(path: &Path, multilabel: bool) -> Result<Dataset> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let ds = if is_csv {
        read_csv(path, multilabel)?
    } else {
        read_libsvm(path, multilabel)?
    };
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelChoice {
    None,
    Linear,
    Rbf(f64),
    Precomputed(PathBuf),
}

pub fn parse_kernel(s: &str) -> Result<KernelChoice> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    match (name.to_ascii_lowercase().as_str(), arg) {
        ("none", None) => Ok(KernelChoice::None),
        ("linear", None) => Ok(KernelChoice::Linear),
        ("rbf", Some(t)) => {
            let theta: f64 = t
                .parse()
                .map_err(|_| usage(format!("bad RBF parameter '{t}'")))?;
            if !(theta > 0.0) || !theta.is_finite() {
                return Err(usage(format!("RBF parameter {theta} must be positive")));
            }
            Ok(KernelChoice::Rbf(theta))
        }
        ("precomputed", Some(p)) if !p.is_empty() => Ok(KernelChoice::Precomputed(p.into())),
        _ => Err(usage(format!(
            "bad kernel '{s}'; expected none, linear, rbf:THETA or precomputed:PATH"
        ))),
    }
}

fn loss_spec(a: &LossArgs) -> Result<LossSpec> {
    let family: LossFamily = a.loss.parse()?;
    if !(a.gamma >= 0.0) || !a.gamma.is_finite() {
        return Err(usage(format!("gamma {} must be nonnegative", a.gamma)));
    }
    Ok(LossSpec::new(family, a.k, a.gamma)?)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| usage(format!("bad {what} value '{t}'")))
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(usage(format!("empty {what}")));
    }
    Ok(v)
}

struct Fitted {
    model: Model,
    history: Vec<GapRecord>,
    converged: bool,
    epochs: usize,
}

/// Trains one model. The truncated top-k entropy is fitted by fine-tuning a
/// softmax solution with the same `λ`.
fn fit(ds: &Dataset, spec: &LossSpec, cfg: &TrainConfig, kernel: &KernelChoice) -> Result<Fitted> {
    if spec.family == LossFamily::TopkEntropyTruncated {
        if *kernel != KernelChoice::None {
            return Err(CliError::Lib(Error::Unsupported(
                "the truncated top-k entropy is trained with linear features only (--kernel none)"
                    .into(),
            )));
        }
        let base = LossSpec::new(LossFamily::Softmax, 1, 0.0)?;
        let t = sdca_train(ds, &base, cfg, &TrainMode::Linear)?;
        let lambda = cfg.reg.lambda(ds.n());
        let ft = finetune_truncated_entropy(ds, spec.k, lambda, &t.model, &FinetuneConfig::default())?;
        log::info!(
            "fine-tuning: objective {:.9e} -> {:.9e} in {} steps",
            ft.objectives[0],
            ft.objectives[ft.objectives.len() - 1],
            ft.objectives.len() - 1
        );
        return Ok(Fitted {
            model: ft.model,
            history: t.history,
            converged: t.converged,
            epochs: t.epochs,
        });
    }
    let t = match kernel {
        KernelChoice::None => sdca_train(ds, spec, cfg, &TrainMode::Linear)?,
        KernelChoice::Linear => sdca_train(ds, spec, cfg, &TrainMode::Kernel(Kernel::Linear))?,
        KernelChoice::Rbf(theta) => sdca_train(
            ds,
            spec,
            cfg,
            &TrainMode::Kernel(Kernel::Rbf { theta: *theta }),
        )?,
        KernelChoice::Precomputed(p) => {
            let g = read_gram(p)?;
            sdca_train(ds, spec, cfg, &TrainMode::Precomputed(&g))?
        }
    };
    Ok(Fitted {
        model: t.model,
        history: t.history,
        converged: t.converged,
        epochs: t.epochs,
    })
}

/// Scores `ds` with `model`, from a cross-Gram matrix when one is given.
fn score(model: &Model, ds: &Dataset, gram: Option<&Path>) -> Result<Scores> {
    if let Some(p) = gram {
        let g = read_gram(p)?;
        if g.rows != ds.n() {
            return Err(CliError::Lib(Error::Dimension(format!(
                "cross-Gram matrix has {} rows, data has {} examples",
                g.rows,
                ds.n()
            ))));
        }
        return Ok(predict_scores_gram(model, &g)?);
    }
    if matches!(model.kind, ModelKind::Precomputed { .. }) {
        return Err(usage("a precomputed-kernel model needs --gram"));
    }
    if ds.d() > model.d {
        return Err(CliError::Lib(Error::Dimension(format!(
            "data has {} features, model expects {}",
            ds.d(),
            model.d
        ))));
    }
    let x = ds.features.clone().with_dim(model.d)?;
    Ok(predict_scores(model, &x)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let ext = match a.format.as_str() {
        "libsvm" => "libsvm",
        "csv" => "csv",
        other => return Err(usage(format!("unknown format '{other}'; expected libsvm or csv"))),
    };
    let (tr, va, te) = gen_circle(&CircleSpec {
        n_train: a.n_train,
        n_val: a.n_val,
        n_test: a.n_test,
        seed: a.seed,
    })?;
    fs::create_dir_all(&a.out_dir)?;
    for (name, ds) in [("train", &tr), ("val", &va), ("test", &te)] {
        let path = a.out_dir.join(format!("circle.{name}.{ext}"));
        let w = BufWriter::new(File::create(&path)?);
        if ext == "csv" {
            write_csv(ds, w)?;
        } else {
            write_libsvm(ds, w)?;
        }
    }
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let spec = loss_spec(&a.loss)?;
    let kernel = parse_kernel(&a.solver.kernel)?;
    let reg = match (a.solver.c, a.solver.lambda) {
        (Some(_), Some(_)) => return Err(usage("--c and --lambda are mutually exclusive")),
        (Some(c), None) => Regularization::C(c),
        (None, Some(l)) => Regularization::Lambda(l),
        (None, None) => Regularization::C(1.0),
    };
    let cfg = TrainConfig {
        reg,
        epsilon: a.solver.eps,
        max_epochs: a.solver.max_epochs,
        seed: a.solver.seed,
        gap_check_period: a.solver.gap_check_period,
    };
    cfg.validate()?;
    let ds = load_data(&a.train, a.multilabel)?;
    let f = fit(&ds, &spec, &cfg, &kernel)?;
    f.model.save(&a.model)?;
    if let Some(p) = &a.gap_log {
        let mut w = BufWriter::new(File::create(p)?);
        for r in &f.history {
            writeln!(w, "{} {:e} {:e} {:e}", r.epoch, r.primal, r.dual, r.relative_gap)?;
        }
        w.flush()?;
    }
    let last = f.history.last();
    if !f.converged {
        log::warn!(
            "gap target {} not reached after {} epochs",
            cfg.epsilon,
            f.epochs
        );
    }
    println!(
        "epochs {} relative_gap {:e} converged {}",
        f.epochs,
        last.map_or(f64::NAN, |r| r.relative_gap),
        f.converged
    );
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    if a.top == 0 {
        return Err(usage("--top must be at least 1"));
    }
    let model = Model::load(&a.model)?;
    let ds = load_data(&a.data, a.multilabel)?;
    let s = score(&model, &ds, a.gram.as_deref())?;
    let mut w = output(Some(&a.out))?;
    for i in 0..s.n {
        let row = s.row(i);
        let top: Vec<&str> = ranking(row)
            .into_iter()
            .take(a.top)
            .map(|c| model.classes[c].as_str())
            .collect();
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}\t{}", top.join(","), vals.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn aligned(model: &Model, ds: Dataset) -> Result<Dataset> {
    let d = model.d.max(ds.d());
    Ok(ds.align(&model.classes, d)?)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let ds = aligned(&model, load_data(&a.data, a.multilabel)?)?;
    let delta = match &a.tune_threshold {
        Some(metric) => {
            let metric: PartitionMetric = metric.parse()?;
            let vp = a.val.as_ref().ok_or_else(|| usage("--tune-threshold needs --val"))?;
            let val = aligned(&model, load_data(vp, a.multilabel)?)?;
            let vs = score(&model, &val, a.val_gram.as_deref())?;
            let sets: Vec<Vec<usize>> = (0..val.n()).map(|i| val.labels.set(i).to_vec()).collect();
            let (d, v) = tune_threshold(&vs, &sets, metric, &default_threshold_grid())?;
            log::info!("tuned threshold {d} ({v} on validation)");
            d
        }
        None => a.threshold,
    };
    let s = score(&model, &ds, a.gram.as_deref())?;
    let report = MetricsReport::compute(&s, &ds.labels, delta)?;
    let mut w = output(a.report.as_deref())?;
    write!(w, "{report}")?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum CvMetric {
    TopK(usize),
    RankLoss,
    Map,
}

impl CvMetric {
    fn parse(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        match s.as_str() {
            "rank_loss" => Ok(CvMetric::RankLoss),
            "map" => Ok(CvMetric::Map),
            _ => match s.strip_prefix("top").and_then(|k| k.parse().ok()) {
                Some(k) if k >= 1 => Ok(CvMetric::TopK(k)),
                _ => Err(usage(format!(
                    "unknown metric '{s}'; expected topK, rank_loss or map"
                ))),
            },
        }
    }

    fn lower_is_better(self) -> bool {
        self == CvMetric::RankLoss
    }

    fn eval(self, s: &Scores, labels: &Labels) -> Result<f64> {
        if let (CvMetric::TopK(k), Labels::Multiclass(y)) = (self, labels) {
            return Ok(topk_accuracy(s, y, k));
        }
        let sets: Vec<Vec<usize>> = (0..labels.len()).map(|i| labels.set(i).to_vec()).collect();
        let ks = match self {
            CvMetric::TopK(k) => vec![k],
            _ => vec![1],
        };
        let r = ranking_metrics(s, &sets, &ks)?;
        Ok(match self {
            CvMetric::TopK(_) => r.recall_at_k[0].1,
            CvMetric::RankLoss => r.rank_loss,
            CvMetric::Map => r.map,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct GridPoint {
    c: f64,
    k: usize,
    theta: Option<f64>,
}

pub fn cv(a: &CvArgs) -> Result<()> {
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let metric = CvMetric::parse(&a.metric)?;
    let cs: Vec<f64> = parse_list(&a.c_grid, "C grid")?;
    let ks: Vec<usize> = match &a.k_grid {
        Some(s) => parse_list(s, "k grid")?,
        None => vec![a.loss.k],
    };
    let thetas: Vec<Option<f64>> = match &a.theta_grid {
        Some(s) => parse_list::<f64>(s, "theta grid")?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut grid = Vec::new();
    for &theta in &thetas {
        for &k in &ks {
            for &c in &cs {
                grid.push(GridPoint { c, k, theta });
            }
        }
    }
    let specs: Vec<LossSpec> = grid
        .iter()
        .map(|g| loss_spec(&LossArgs { k: g.k, ..a.loss.clone() }))
        .collect::<Result<_>>()?;
    for g in &grid {
        TrainConfig {
            reg: Regularization::C(g.c),
            epsilon: a.eps,
            ..TrainConfig::default()
        }
        .validate()?;
        if let Some(t) = g.theta {
            parse_kernel(&format!("rbf:{t}"))?;
        }
    }

    let ds = load_data(&a.train, a.multilabel)?;
    let strata = match &ds.labels {
        Labels::Multiclass(y) => Some(y.as_slice()),
        Labels::Multilabel(_) => None,
    };
    let assign = make_folds(ds.n(), a.folds, a.seed, strata)?;
    let splits: Vec<(Dataset, Dataset)> = (0..a.folds)
        .map(|f| {
            let (te, tr): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| assign[i] == f);
            (ds.select(&tr), ds.select(&te))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| usage(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..a.folds).map(move |f| (g, f)))
        .collect();
    let results: Vec<Result<f64>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, f)| {
                let cfg = TrainConfig {
                    reg: Regularization::C(grid[g].c),
                    epsilon: a.eps,
                    max_epochs: a.max_epochs,
                    seed: a.seed.wrapping_add(f as u64),
                    gap_check_period: 1,
                };
                let kernel = match grid[g].theta {
                    Some(t) => KernelChoice::Rbf(t),
                    None => KernelChoice::None,
                };
                let (tr, te) = &splits[f];
                let fit = fit(tr, &specs[g], &cfg, &kernel)?;
                let s = predict_scores(&fit.model, &te.features)?;
                metric.eval(&s, &te.labels)
            })
            .collect()
    });
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;

    let mut w = output(a.out.as_deref())?;
    writeln!(w, "c k theta mean std")?;
    let mut best: Option<(usize, f64)> = None;
    for (g, p) in grid.iter().enumerate() {
        let v = &results[g * a.folds..(g + 1) * a.folds];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        let theta = p.theta.map_or("none".to_string(), |t| t.to_string());
        writeln!(w, "{} {} {} {} {}", p.c, p.k, theta, mean, var.sqrt())?;
        let better = match best {
            None => true,
            Some((_, b)) => {
                if metric.lower_is_better() {
                    mean < b
                } else {
                    mean > b
                }
            }
        };
        if better {
            best = Some((g, mean));
        }
    }
    let (g, v) = best.expect("nonempty grid");
    let p = grid[g];
    let theta = p.theta.map_or("none".to_string(), |t| t.to_string());
    writeln!(w, "best {} {} {} {}", p.c, p.k, theta, v)?;
    w.flush()?;
    Ok(())
}
