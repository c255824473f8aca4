//! SDCA training, duality-gap certification, prediction and model files.
//!
//! The primal problem is `P(W) = (1/n) Σ L(y_i, Wᵀx_i) + (λ/2)‖W‖²` and the
//! dual `D(A) = −(1/n) Σ L*(y_i, −λn a_i) − (λ/2) tr(A K Aᵀ)`, with `W = XAᵀ`.
//! There is no bias term; append a constant feature if one is needed.

use std::borrow::Cow;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    linear_cross_gram, linear_gram, rbf_cross_gram, rbf_gram, Dataset, Features, Gram, Labels,
};
use crate::error::{Error, Result};
use crate::losses::{
    conjugate_value, dual_update, loss_and_grad, loss_value, LabelKind, LossFamily, LossSpec,
    ScoreContext, UpdateInput,
};

/// Regularization strength, given either directly or as `C = 1/(λn)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization {
    C(f64),
    Lambda(f64),
}

impl Regularization {
    /// `λ` for a training set of `n` examples.
    pub fn lambda(self, n: usize) -> f64 {
        match self {
            Regularization::C(c) => 1.0 / (c * n as f64),
            Regularization::Lambda(l) => l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub reg: Regularization,
    /// Target relative duality gap `(P − D)/P`.
    pub epsilon: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub gap_check_period: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            reg: Regularization::C(1.0),
            epsilon: 1e-3,
            max_epochs: 1000,
            seed: 0,
            gap_check_period: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let v = match self.reg {
            Regularization::C(c) => c,
            Regularization::Lambda(l) => l,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!(
                "regularization {v} must be positive"
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.gap_check_period == 0 {
            return Err(Error::Config("gap check period must be at least 1".into()));
        }
        Ok(())
    }
}

/// Kernel used by a kernel-mode model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { theta: f64 },
}

/// How the scores `f(x_i)` are represented during training.
#[derive(Clone, Debug)]
pub enum TrainMode<'a> {
    /// Primal weights `W = XAᵀ`.
    Linear,
    /// Gram matrix computed from the training features.
    Kernel(Kernel),
    /// Gram matrix supplied by the caller.
    Precomputed(&'a Gram),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// Row-major `d × m` weights.
    Linear { w: Vec<f64> },
    /// Row-major `n × m` dual variables and the `n` training points.
    Kernel {
        kernel: Kernel,
        a: Vec<f64>,
        support: Features,
    },
    /// Row-major `n × m` dual variables; scoring needs a cross-Gram matrix.
    Precomputed { n: usize, a: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: LossSpec,
    pub lambda: f64,
    pub classes: Vec<String>,
    /// Feature dimension (0 for a precomputed kernel).
    pub d: usize,
    pub kind: ModelKind,
}

impl Model {
    pub fn m(&self) -> usize {
        self.classes.len()
    }
}

/// One duality-gap evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRecord {
    pub epoch: usize,
    pub primal: f64,
    pub dual: f64,
    /// `(P − D)/P`
    pub relative_gap: f64,
}

#[derive(Clone, Debug)]
pub struct Training {
    pub model: Model,
    pub history: Vec<GapRecord>,
    pub converged: bool,
    pub epochs: usize,
    /// Examples with zero norm, whose updates were skipped.
    pub skipped: Vec<usize>,
}

enum Store<'a> {
    Linear { x: &'a Features, w: Vec<f64> },
    Kernel { k: Cow<'a, Gram>, f: Vec<f64> },
}

/// Training state: dual variables plus the cached scores.
pub struct SdcaState<'a> {
    spec: LossSpec,
    labels: &'a Labels,
    lambda: f64,
    lambda_n: f64,
    n: usize,
    m: usize,
    kii: Vec<f64>,
    a: Vec<f64>,
    store: Store<'a>,
    q: Vec<f64>,
}

fn check_labels(spec: &LossSpec, labels: &Labels) -> Result<()> {
    match (spec.family.label_kind(), labels.is_multilabel()) {
        (LabelKind::Multiclass, true) => Err(Error::Label(format!(
            "{} needs single-label data, got label sets",
            spec.family
        ))),
        (LabelKind::Multilabel, false) => Err(Error::Label(format!(
            "{} needs multilabel data, got single class labels",
            spec.family
        ))),
        _ => Ok(()),
    }
}

impl<'a> SdcaState<'a> {
    /// Zero dual variables, feasible for every loss.
    pub fn new(
        data: &'a Dataset,
        spec: &LossSpec,
        lambda: f64,
        mode: &TrainMode<'a>,
    ) -> Result<Self> {
        let (n, m) = (data.n(), data.m());
        if n == 0 {
            return Err(Error::Config("empty training set".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda {lambda} must be positive")));
        }
        if !spec.family.is_convex() {
            return Err(Error::Unsupported(format!(
                "{} is nonconvex; train softmax and fine-tune instead",
                spec.family
            )));
        }
        spec.validate(m)?;
        check_labels(spec, &data.labels)?;
        let store = match mode {
            TrainMode::Linear => Store::Linear {
                x: &data.features,
                w: vec![0.0; data.d() * m],
            },
            TrainMode::Kernel(Kernel::Linear) => Store::Kernel {
                k: Cow::Owned(linear_gram(&data.features)),
                f: vec![0.0; n * m],
            },
            TrainMode::Kernel(Kernel::Rbf { theta }) => Store::Kernel {
                k: Cow::Owned(rbf_gram(&data.features, *theta)?),
                f: vec![0.0; n * m],
            },
            TrainMode::Precomputed(g) => {
                if g.rows != n || g.cols != n {
                    return Err(Error::Dimension(format!(
                        "Gram matrix is {}x{}, expected {n}x{n}",
                        g.rows, g.cols
                    )));
                }
                Store::Kernel {
                    k: Cow::Borrowed(*g),
                    f: vec![0.0; n * m],
                }
            }
        };
        let kii = match &store {
            Store::Linear { x, .. } => (0..n).map(|i| x.row(i).sq_norm()).collect(),
            Store::Kernel { k, .. } => (0..n).map(|i| k.get(i, i)).collect(),
        };
        Ok(SdcaState {
            spec: *spec,
            labels: &data.labels,
            lambda,
            lambda_n: lambda * n as f64,
            n,
            m,
            kii,
            a: vec![0.0; n * m],
            store,
            q: vec![0.0; m],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dual column of example `i`.
    pub fn a(&self, i: usize) -> &[f64] {
        &self.a[i * self.m..(i + 1) * self.m]
    }

    /// Current scores `f(x_i)`.
    pub fn scores(&self, i: usize, out: &mut [f64]) {
        match &self.store {
            Store::Linear { x, w } => {
                out.fill(0.0);
                let m = self.m;
                x.row(i).for_each(|j, v| {
                    for (o, wj) in out.iter_mut().zip(&w[j * m..(j + 1) * m]) {
                        *o += v * wj;
                    }
                });
            }
            Store::Kernel { f, .. } => out.copy_from_slice(&f[i * self.m..(i + 1) * self.m]),
        }
    }

    /// Primal weights; `None` in kernel mode.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.store {
            Store::Linear { w, .. } => Some(w),
            Store::Kernel { .. } => None,
        }
    }

    /// Recomputes `XAᵀ` from scratch (linear mode).
    pub fn recompute_weights(&self) -> Option<Vec<f64>> {
        let Store::Linear { x, w } = &self.store else {
            return None;
        };
        let m = self.m;
        let mut out = vec![0.0; w.len()];
        for i in 0..self.n {
            let a = self.a(i);
            x.row(i).for_each(|j, v| {
                for (o, aj) in out[j * m..(j + 1) * m].iter_mut().zip(a) {
                    *o += v * aj;
                }
            });
        }
        Some(out)
    }

    /// Maximizes the dual over `a_i`. Returns `false` for zero-norm examples.
    pub fn update(&mut self, i: usize) -> Result<bool> {
        let m = self.m;
        let kii = self.kii[i];
        if !(kii > 0.0) {
            return Ok(false);
        }
        let mut q = std::mem::take(&mut self.q);
        self.scores(i, &mut q);
        let old: Vec<f64> = self.a(i).to_vec();
        for (qj, aj) in q.iter_mut().zip(&old) {
            *qj -= kii * aj;
        }
        let inp = UpdateInput {
            target: self.labels.target(i),
            q: &q,
            kii,
            lambda_n: self.lambda_n,
        };
        let col = &mut self.a[i * m..(i + 1) * m];
        dual_update(&self.spec, &inp, col)?;
        if col.iter().any(|v| !v.is_finite()) {
            col.copy_from_slice(&old);
            return Err(Error::Numeric(format!(
                "non-finite dual update at example {i}"
            )));
        }
        let delta: Vec<f64> = col.iter().zip(&old).map(|(a, b)| a - b).collect();
        self.q = q;
        if delta.iter().all(|&v| v == 0.0) {
            return Ok(true);
        }
        match &mut self.store {
            Store::Linear { x, w } => {
                x.row(i).for_each(|j, v| {
                    for (wj, dj) in w[j * m..(j + 1) * m].iter_mut().zip(&delta) {
                        *wj += v * dj;
                    }
                });
            }
            Store::Kernel { k, f } => {
                let krow = k.row(i);
                for (l, &kil) in krow.iter().enumerate() {
                    if kil != 0.0 {
                        for (fj, dj) in f[l * m..(l + 1) * m].iter_mut().zip(&delta) {
                            *fj += kil * dj;
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// `tr(A K Aᵀ) = ‖W‖²`
    fn reg_term(&self) -> f64 {
        match &self.store {
            Store::Linear { w, .. } => w.iter().map(|v| v * v).sum(),
            Store::Kernel { f, .. } => self.a.iter().zip(f).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn primal(&self) -> Result<f64> {
        let mut u = vec![0.0; self.m];
        let mut total = 0.0;
        for i in 0..self.n {
            self.scores(i, &mut u);
            total += loss_value(
                &self.spec,
                &ScoreContext {
                    u: &u,
                    target: self.labels.target(i),
                },
            )?;
        }
        Ok(total / self.n as f64 + 0.5 * self.lambda * self.reg_term())
    }

    /// Dual objective; `−∞` if some column left the conjugate domain.
    pub fn dual(&self) -> Result<f64> {
        let mut total = 0.0;
        let mut v = vec![0.0; self.m];
        for i in 0..self.n {
            for (vj, aj) in v.iter_mut().zip(self.a(i)) {
                *vj = -self.lambda_n * aj;
            }
            total += conjugate_value(&self.spec, &v, self.labels.target(i))?;
        }
        Ok(-total / self.n as f64 - 0.5 * self.lambda * self.reg_term())
    }

    /// One pass over a fresh random permutation.
    pub fn epoch(&mut self, rng: &mut ChaCha8Rng, skipped: &mut Vec<usize>) -> Result<()> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(rng);
        for i in order {
            if !self.update(i)? && !skipped.contains(&i) {
                log::warn!("example {i} has zero norm; its dual variables stay at 0");
                skipped.push(i);
            }
        }
        Ok(())
    }

    pub fn gap(&self, epoch: usize) -> Result<GapRecord> {
        let primal = self.primal()?;
        let dual = self.dual()?;
        if !primal.is_finite() {
            return Err(Error::Numeric(format!("primal objective is {primal}")));
        }
        if !dual.is_finite() {
            return Err(Error::Numeric(
                "dual objective is not finite: a dual column left its feasible set".into(),
            ));
        }
        let gap = primal - dual;
        let relative_gap = if primal > 0.0 {
            gap / primal
        } else {
            gap.max(0.0)
        };
        Ok(GapRecord {
            epoch,
            primal,
            dual,
            relative_gap,
        })
    }

    fn into_model(self, data: &Dataset, mode: &TrainMode) -> Model {
        let kind = match (self.store, mode) {
            (Store::Linear { w, .. }, _) => ModelKind::Linear { w },
            (Store::Kernel { .. }, TrainMode::Kernel(kernel)) => ModelKind::Kernel {
                kernel: *kernel,
                a: self.a,
                support: Features::Dense {
                    n: data.n(),
                    d: data.d(),
                    values: data.features.to_dense(),
                },
            },
            (Store::Kernel { .. }, _) => ModelKind::Precomputed {
                n: self.n,
                a: self.a,
            },
        };
        Model {
            spec: self.spec,
            lambda: self.lambda,
            classes: data.classes.clone(),
            d: match kind {
                ModelKind::Precomputed { .. } => 0,
                _ => data.d(),
            },
            kind,
        }
    }
}

/// Runs SDCA until the relative duality gap reaches `cfg.epsilon` or the
/// epoch budget runs out.
pub fn sdca_train(
    data: &Dataset,
    spec: &LossSpec,
    cfg: &TrainConfig,
    mode: &TrainMode,
) -> Result<Training> {
    cfg.validate()?;
    let lambda = cfg.reg.lambda(data.n());
    let mut state = SdcaState::new(data, spec, lambda, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut skipped = Vec::new();
    let mut converged = false;
    let mut epochs = 0;
    while epochs < cfg.max_epochs {
        state.epoch(&mut rng, &mut skipped)?;
        epochs += 1;
        if epochs % cfg.gap_check_period == 0 || epochs == cfg.max_epochs {
            let rec = state.gap(epochs)?;
            log::debug!(
                "epoch {epochs}: primal {:.9e} dual {:.9e} gap {:.3e}",
                rec.primal,
                rec.dual,
                rec.relative_gap
            );
            history.push(rec);
            if rec.relative_gap <= cfg.epsilon {
                converged = true;
                break;
            }
        }
    }
    Ok(Training {
        model: state.into_model(data, mode),
        history,
        converged,
        epochs,
        skipped,
    })
}

/// Row-major `n × m` score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
}

impl Scores {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }
}

fn kernel_scores(a: &[f64], m: usize, k: &Gram) -> Scores {
    let mut values = vec![0.0; k.rows * m];
    for t in 0..k.rows {
        let out = &mut values[t * m..(t + 1) * m];
        for (i, &kv) in k.row(t).iter().enumerate() {
            if kv != 0.0 {
                for (o, ai) in out.iter_mut().zip(&a[i * m..(i + 1) * m]) {
                    *o += kv * ai;
                }
            }
        }
    }
    Scores {
        n: k.rows,
        m,
        values,
    }
}

/// `f(x) = Wᵀx` for linear models, `Σ_i a_i k(x_i, x)` for kernel models.
pub fn predict_scores(model: &Model, x: &Features) -> Result<Scores> {
    let m = model.m();
    if x.d() > model.d {
        return Err(Error::Dimension(format!(
            "data has {} features, model expects {}",
            x.d(),
            model.d
        )));
    }
    match &model.kind {
        ModelKind::Linear { w } => {
            let mut values = vec![0.0; x.n() * m];
            for i in 0..x.n() {
                let out = &mut values[i * m..(i + 1) * m];
                x.row(i).for_each(|j, v| {
                    for (o, wj) in out.iter_mut().zip(&w[j * m..(j + 1) * m]) {
                        *o += v * wj;
                    }
                });
            }
            Ok(Scores {
                n: x.n(),
                m,
                values,
            })
        }
        ModelKind::Kernel { kernel, a, support } => {
            let k = match kernel {
                Kernel::Linear => linear_cross_gram(x, support),
                Kernel::Rbf { theta } => rbf_cross_gram(x, support, *theta)?,
            };
            Ok(kernel_scores(a, m, &k))
        }
        ModelKind::Precomputed { .. } => Err(Error::Unsupported(
            "a precomputed-kernel model scores from a cross-Gram matrix".into(),
        )),
    }
}

/// Scores from a cross-Gram matrix `K(test, train)` for kernel models.
pub fn predict_scores_gram(model: &Model, k: &Gram) -> Result<Scores> {
    let (n, a) = match &model.kind {
        ModelKind::Kernel { a, support, .. } => (support.n(), a),
        ModelKind::Precomputed { n, a } => (*n, a),
        ModelKind::Linear { .. } => {
            return Err(Error::Unsupported(
                "linear models score from features".into(),
            ))
        }
    };
    if k.cols != n {
        return Err(Error::Dimension(format!(
            "cross-Gram matrix has {} columns, model has {n} training points",
            k.cols
        )));
    }
    Ok(kernel_scores(a, model.m(), k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub max_iter: usize,
    /// Stop once `‖∇F‖ ≤ grad_tol · (1 + |F|)`.
    pub grad_tol: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            max_iter: 1000,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Finetuned {
    pub model: Model,
    /// Objective after each accepted step, starting with the initial value.
    pub objectives: Vec<f64>,
}

/// `(1/n) Σ L(Wᵀx_i) + (λ/2)‖W‖²` and its gradient for a linear model.
pub fn linear_objective(
    data: &Dataset,
    spec: &LossSpec,
    lambda: f64,
    w: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let m = data.m();
    let n = data.n() as f64;
    let mut grad: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut total = 0.0;
    let mut u = vec![0.0; m];
    for i in 0..data.n() {
        u.fill(0.0);
        let row = data.features.row(i);
        row.for_each(|j, v| {
            for (o, wj) in u.iter_mut().zip(&w[j * m..(j + 1) * m]) {
                *o += v * wj;
            }
        });
        let (l, g) = loss_and_grad(
            spec,
            &ScoreContext {
                u: &u,
                target: data.labels.target(i),
            },
        )?;
        total += l;
        row.for_each(|j, v| {
            for (gw, gj) in grad[j * m..(j + 1) * m].iter_mut().zip(&g) {
                *gw += v * gj / n;
            }
        });
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    Ok((total / n + 0.5 * lambda * reg, grad))
}

/// Minimizes the truncated top-k entropy objective by gradient descent with
/// Armijo backtracking, starting from a linear model (normally a softmax
/// solution). The objective is nonconvex, so the result is a local solution.
pub fn finetune_truncated_entropy(
    data: &Dataset,
    k: usize,
    lambda: f64,
    init: &Model,
    cfg: &FinetuneConfig,
) -> Result<Finetuned> {
    let ModelKind::Linear { w } = &init.kind else {
        return Err(Error::Unsupported(
            "fine-tuning needs a linear model".into(),
        ));
    };
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda {lambda} must be positive")));
    }
    if init.classes != data.classes || init.d < data.d() {
        return Err(Error::Dimension(
            "model and data class maps or dimensions differ".into(),
        ));
    }
    if !matches!(init.spec.family, LossFamily::Softmax) {
        log::warn!(
            "fine-tuning starts from a {} model, not softmax",
            init.spec.family
        );
    }
    let spec = LossSpec::new(LossFamily::TopkEntropyTruncated, k, 0.0)?;
    spec.validate(data.m())?;
    check_labels(&spec, &data.labels)?;
    let data = Dataset {
        features: data.features.clone().with_dim(init.d)?,
        labels: data.labels.clone(),
        classes: data.classes.clone(),
    };
    let mut w = w.clone();
    let (mut f, mut g) = linear_objective(&data, &spec, lambda, &w)?;
    let mut objectives = vec![f];
    let mut step = 1.0;
    for _ in 0..cfg.max_iter {
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() <= cfg.grad_tol * (1.0 + f.abs()) {
            break;
        }
        let mut accepted = None;
        while step > 1e-20 {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let (fc, gc) = linear_objective(&data, &spec, lambda, &cand)?;
            if fc <= f - 1e-4 * step * gn2 {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        w = cand;
        f = fc;
        g = gc;
        objectives.push(f);
        step *= 2.0;
    }
    Ok(Finetuned {
        model: Model {
            spec,
            lambda,
            classes: init.classes.clone(),
            d: init.d,
            kind: ModelKind::Linear { w },
        },
        objectives,
    })
}

const MAGIC: &str = "SDCATOPK-MODEL 1";

impl Model {
    /// Text header terminated by `END\n`, then little-endian `f64` payload:
    /// `W` (`d × m`) for linear models, `A` (`n × m`) followed by the
    /// training points (`n × d`) for kernel models, `A` alone for
    /// precomputed kernels.
    pub fn encode(&self) -> Vec<u8> {
        let mut h = format!(
            "{MAGIC}\nloss {}\nk {}\ngamma {}\nlambda {}\nclasses {}\n",
            self.spec.family,
            self.spec.k,
            self.spec.gamma,
            self.lambda,
            self.m()
        );
        for c in &self.classes {
            h.push_str(&format!("class {c}\n"));
        }
        h.push_str(&format!("d {}\n", self.d));
        let mut payload: Vec<f64> = Vec::new();
        match &self.kind {
            ModelKind::Linear { w } => {
                h.push_str("kind linear\n");
                payload.extend(w);
            }
            ModelKind::Kernel { kernel, a, support } => {
                match kernel {
                    Kernel::Linear => h.push_str("kind linear-kernel\n"),
                    Kernel::Rbf { theta } => h.push_str(&format!("kind rbf\ntheta {theta}\n")),
                }
                h.push_str(&format!("n {}\n", support.n()));
                payload.extend(a);
                payload.extend(support.to_dense());
            }
            ModelKind::Precomputed { n, a } => {
                h.push_str(&format!("kind precomputed\nn {n}\n"));
                payload.extend(a);
            }
        }
        h.push_str("END\n");
        let mut out = h.into_bytes();
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Model> {
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("model header is not terminated by END".into()))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end])
                .map_err(|_| Error::Format("model header is not UTF-8".into()))?;
            pos += end + 1;
            if line == "END" {
                break;
            }
            lines.push(line);
        }
        let mut it = lines.into_iter();
        if it.next() != Some(MAGIC) {
            return Err(Error::Format("not a model file (bad magic line)".into()));
        }
        let mut field = |key: &str| -> Result<&str> {
            let line = it
                .next()
                .ok_or_else(|| Error::Format(format!("missing header field '{key}'")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v),
                _ => Err(Error::Format(format!("expected '{key}', got '{line}'"))),
            }
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Format(format!("bad value '{v}' for '{key}'")))
        }
        let family: LossFamily = field("loss")?.parse()?;
        let k: usize = num("k", field("k")?)?;
        let gamma: f64 = num("gamma", field("gamma")?)?;
        let lambda: f64 = num("lambda", field("lambda")?)?;
        let m: usize = num("classes", field("classes")?)?;
        let mut classes = Vec::new();
        for _ in 0..m.min(1 << 20) {
            classes.push(field("class")?.to_string());
        }
        if classes.len() != m {
            return Err(Error::Format(format!("too many classes: {m}")));
        }
        let d: usize = num("d", field("d")?)?;
        let kind = field("kind")?.to_string();
        let theta: Option<f64> = if kind == "rbf" {
            Some(num("theta", field("theta")?)?)
        } else {
            None
        };
        let n: usize = if kind == "linear" {
            0
        } else {
            num("n", field("n")?)?
        };
        if let Some(extra) = it.next() {
            return Err(Error::Format(format!("unexpected header line '{extra}'")));
        }
        let spec = LossSpec::new(family, k, gamma).map_err(|e| Error::Format(e.to_string()))?;
        if spec.family != family || spec.k != k {
            return Err(Error::Format("loss parameters are not canonical".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Format(format!("lambda {lambda} must be positive")));
        }
        if m < 2 {
            return Err(Error::Format("a model needs at least two classes".into()));
        }
        let cells = |a: usize, b: usize| {
            a.checked_mul(b)
                .ok_or_else(|| Error::Format("payload size overflows".into()))
        };
        let count = match kind.as_str() {
            "linear" => cells(d, m)?,
            "rbf" | "linear-kernel" => cells(n, m)?
                .checked_add(cells(n, d)?)
                .ok_or_else(|| Error::Format("payload size overflows".into()))?,
            "precomputed" => cells(n, m)?,
            other => return Err(Error::Format(format!("unknown model kind '{other}'"))),
        };
        let body = &bytes[pos..];
        if Some(body.len()) != count.checked_mul(8) {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {count} values",
                body.len()
            )));
        }
        let vals: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite model entry".into()));
        }
        let kind = match kind.as_str() {
            "linear" => ModelKind::Linear { w: vals },
            "precomputed" => ModelKind::Precomputed { n, a: vals },
            _ => {
                let kernel = match theta {
                    Some(theta) if theta > 0.0 && theta.is_finite() => Kernel::Rbf { theta },
                    Some(theta) => {
                        return Err(Error::Format(format!(
                            "RBF parameter {theta} must be positive"
                        )))
                    }
                    None => Kernel::Linear,
                };
                let (a, x) = vals.split_at(n * m);
                ModelKind::Kernel {
                    kernel,
                    a: a.to_vec(),
                    support: Features::Dense {
                        n,
                        d,
                        values: x.to_vec(),
                    },
                }
            }
        };
        Ok(Model {
            spec,
            lambda,
            classes,
            d,
            kind,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::decode(&fs::read(path)?)
    }
}
