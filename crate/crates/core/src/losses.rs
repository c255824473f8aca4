//! Loss values, conjugates, gradients, and SDCA dual updates.
//!
//! Every loss is a function of the raw score vector `u = f(x) ∈ ℝ^m`.
//! Multiclass losses see it through `a = u − u_y 1` and the margin vector
//! `c = 1 − e_y`; multilabel losses split the classes into `Y` and `Ȳ`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::prox::{
    project_bipartite, project_topk_alpha, project_topk_beta, prox_ml_entropy,
    prox_topk_entropy_dual, solve_topk_entropy_primal,
};

/// Slack allowed in conjugate domain membership.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossFamily {
    OvaHinge,
    OvaLogistic,
    MultiSvm,
    Softmax,
    TopkSvmAlpha,
    TopkSvmBeta,
    TopkSvmAlphaSmooth,
    TopkSvmBetaSmooth,
    TopkEntropy,
    TopkEntropyTruncated,
    MlSvm,
    MlSvmSmooth,
    MlEntropy,
}

/// Which kind of targets a loss accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    Multiclass,
    Multilabel,
    Either,
}

impl LossFamily {
    pub const ALL: [LossFamily; 13] = [
        LossFamily::OvaHinge,
        LossFamily::OvaLogistic,
        LossFamily::MultiSvm,
        LossFamily::Softmax,
        LossFamily::TopkSvmAlpha,
        LossFamily::TopkSvmBeta,
        LossFamily::TopkSvmAlphaSmooth,
        LossFamily::TopkSvmBetaSmooth,
        LossFamily::TopkEntropy,
        LossFamily::TopkEntropyTruncated,
        LossFamily::MlSvm,
        LossFamily::MlSvmSmooth,
        LossFamily::MlEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::OvaHinge => "ova-hinge",
            LossFamily::OvaLogistic => "ova-logistic",
            LossFamily::MultiSvm => "multi-svm",
            LossFamily::Softmax => "softmax",
            LossFamily::TopkSvmAlpha => "topk-svm-a",
            LossFamily::TopkSvmBeta => "topk-svm-b",
            LossFamily::TopkSvmAlphaSmooth => "topk-svm-a-smooth",
            LossFamily::TopkSvmBetaSmooth => "topk-svm-b-smooth",
            LossFamily::TopkEntropy => "topk-entropy",
            LossFamily::TopkEntropyTruncated => "topk-entropy-truncated",
            LossFamily::MlSvm => "ml-svm",
            LossFamily::MlSvmSmooth => "ml-svm-smooth",
            LossFamily::MlEntropy => "ml-entropy",
        }
    }

    pub fn label_kind(self) -> LabelKind {
        match self {
            LossFamily::OvaHinge | LossFamily::OvaLogistic => LabelKind::Either,
            LossFamily::MlSvm | LossFamily::MlSvmSmooth | LossFamily::MlEntropy => {
                LabelKind::Multilabel
            }
            _ => LabelKind::Multiclass,
        }
    }

    /// Whether the loss is convex and therefore trainable by SDCA.
    pub fn is_convex(self) -> bool {
        self != LossFamily::TopkEntropyTruncated
    }

    fn uses_k(self) -> bool {
        matches!(
            self,
            LossFamily::TopkSvmAlpha
                | LossFamily::TopkSvmBeta
                | LossFamily::TopkSvmAlphaSmooth
                | LossFamily::TopkSvmBetaSmooth
                | LossFamily::TopkEntropy
                | LossFamily::TopkEntropyTruncated
        )
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('_', "-");
        let fam = match s.as_str() {
            "ova-hinge" | "svm-ova" => LossFamily::OvaHinge,
            "ova-logistic" | "lr-ova" => LossFamily::OvaLogistic,
            "multi-svm" | "svm-multi" => LossFamily::MultiSvm,
            "softmax" | "lr-multi" => LossFamily::Softmax,
            "topk-svm-a" | "topk-svm-alpha" => LossFamily::TopkSvmAlpha,
            "topk-svm-b" | "topk-svm-beta" => LossFamily::TopkSvmBeta,
            "topk-svm-a-smooth" | "topk-svm-alpha-smooth" => LossFamily::TopkSvmAlphaSmooth,
            "topk-svm-b-smooth" | "topk-svm-beta-smooth" => LossFamily::TopkSvmBetaSmooth,
            "topk-entropy" => LossFamily::TopkEntropy,
            "topk-entropy-truncated" => LossFamily::TopkEntropyTruncated,
            "ml-svm" => LossFamily::MlSvm,
            "ml-svm-smooth" => LossFamily::MlSvmSmooth,
            "ml-entropy" => LossFamily::MlEntropy,
            _ => return Err(Error::Config(format!("unknown loss '{s}'"))),
        };
        Ok(fam)
    }
}

/// A loss family with its parameters.
///
/// Hinge families carry their smoothing in `gamma`; [`LossSpec::new`] maps
/// a hinge family with `γ > 0` to its smooth variant and a smooth family with
/// `γ = 0` back to the nonsmooth one, so `multi-svm` with `γ = 1` is the
/// smooth top-1 hinge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub family: LossFamily,
    pub k: usize,
    pub gamma: f64,
}

impl LossSpec {
    pub fn new(family: LossFamily, k: usize, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma {gamma} must be finite and >= 0"
            )));
        }
        use LossFamily::*;
        let smooth = gamma > 0.0;
        let k = if family == MultiSvm { 1 } else { k };
        let family = match (family, smooth) {
            (MultiSvm, true) => TopkSvmAlphaSmooth,
            (TopkSvmAlpha, true) => TopkSvmAlphaSmooth,
            (TopkSvmBeta, true) => TopkSvmBetaSmooth,
            (TopkSvmAlphaSmooth, false) => TopkSvmAlpha,
            (TopkSvmBetaSmooth, false) => TopkSvmBeta,
            (MlSvm, true) => MlSvmSmooth,
            (MlSvmSmooth, false) => MlSvm,
            (f, _) => f,
        };
        let k = if family.uses_k() { k } else { 1 };
        let gamma = match family {
            TopkSvmAlphaSmooth | TopkSvmBetaSmooth | MlSvmSmooth => gamma,
            _ => 0.0,
        };
        Ok(LossSpec { family, k, gamma })
    }

    /// Checks the spec against the number of classes.
    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {m}")));
        }
        if self.family.uses_k() && self.k >= m {
            return Err(Error::Config(format!(
                "k = {} must be smaller than the number of classes {m}",
                self.k
            )));
        }
        Ok(())
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (k={}, gamma={})", self.family, self.k, self.gamma)
    }
}

/// Ground truth of one example.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Class(usize),
    /// Sorted, duplicate-free class indexes.
    Set(&'a [usize]),
}

/// Scores of one example together with its ground truth.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a> {
    pub u: &'a [f64],
    pub target: Target<'a>,
}

impl<'a> ScoreContext<'a> {
    pub fn multiclass(u: &'a [f64], y: usize) -> Self {
        ScoreContext {
            u,
            target: Target::Class(y),
        }
    }

    pub fn multilabel(u: &'a [f64], labels: &'a [usize]) -> Self {
        ScoreContext {
            u,
            target: Target::Set(labels),
        }
    }

    fn class(&self, family: LossFamily) -> Result<usize> {
        match self.target {
            Target::Class(y) if y < self.u.len() => Ok(y),
            Target::Class(y) => Err(Error::Label(format!(
                "class {y} out of range for {} scores",
                self.u.len()
            ))),
            Target::Set(_) => Err(Error::Label(format!(
                "{family} expects a single class label, got a label set"
            ))),
        }
    }

    /// Membership mask of the label set; rejects empty and full sets.
    fn label_mask(&self, family: LossFamily) -> Result<Vec<bool>> {
        let m = self.u.len();
        let set = match self.target {
            Target::Set(s) => s,
            Target::Class(_) => {
                return Err(Error::Label(format!(
                    "{family} expects a label set, got a single class label"
                )))
            }
        };
        let mask = set_mask(set, m)?;
        if set.is_empty() || set.len() == m {
            return Err(Error::Label(format!(
                "{family} needs a label set that is neither empty nor all {m} classes"
            )));
        }
        Ok(mask)
    }

    /// `ỹ_j = ±1` for the one-vs-all losses.
    fn signs(&self) -> Result<Vec<f64>> {
        let m = self.u.len();
        let mask = match self.target {
            Target::Class(y) if y < m => {
                let mut v = vec![false; m];
                v[y] = true;
                v
            }
            Target::Class(y) => {
                return Err(Error::Label(format!(
                    "class {y} out of range for {m} scores"
                )))
            }
            Target::Set(s) => set_mask(s, m)?,
        };
        Ok(mask.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect())
    }
}

fn set_mask(set: &[usize], m: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; m];
    for &j in set {
        if j >= m {
            return Err(Error::Label(format!(
                "label {j} out of range for {m} classes"
            )));
        }
        if mask[j] {
            return Err(Error::Label(format!("label {j} repeated in label set")));
        }
        mask[j] = true;
    }
    Ok(mask)
}

fn check_scores(u: &[f64]) -> Result<()> {
    if let Some(j) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("score {j} is not finite")));
    }
    Ok(())
}

/// `(a + c)` with the ground-truth coordinate removed.
fn margins_wo_y(u: &[f64], y: usize) -> Vec<f64> {
    let uy = u[y];
    u.iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &uj)| uj - uy + 1.0)
        .collect()
}

fn diffs_wo_y(u: &[f64], y: usize) -> Vec<f64> {
    let uy = u[y];
    u.iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &uj)| uj - uy)
        .collect()
}

/// Embeds `x` over the non-ground-truth coordinates with `−Σx` at `y`.
fn embed(x: &[f64], y: usize, scale: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len() + 1);
    g.extend_from_slice(&x[..y]);
    g.push(0.0);
    g.extend_from_slice(&x[y..]);
    let s: f64 = x.iter().sum();
    for v in &mut g {
        *v *= scale;
    }
    g[y] = -s * scale;
    g
}

fn log_sum_exp(a: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = a.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sum of the `k` largest entries of `b`, each passed through `f`.
fn top_k_sum(b: &[f64], k: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut s = b.to_vec();
    s.sort_by(|x, y| y.total_cmp(x));
    s.iter().take(k).map(|&v| f(v)).sum()
}

/// Indexes of the `k` largest entries, ties by index.
fn top_k_indices(b: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| b[j].total_cmp(&b[i]).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Loss value `L(u)`.
pub fn loss_value(spec: &LossSpec, ctx: &ScoreContext) -> Result<f64> {
    check_scores(ctx.u)?;
    let m = ctx.u.len();
    use LossFamily::*;
    let k = spec.k;
    Ok(match spec.family {
        OvaHinge => {
            let s = ctx.signs()?;
            ctx.u
                .iter()
                .zip(&s)
                .map(|(&u, &y)| (1.0 - y * u).max(0.0))
                .sum()
        }
        OvaLogistic => {
            let s = ctx.signs()?;
            ctx.u.iter().zip(&s).map(|(&u, &y)| softplus(-y * u)).sum()
        }
        MultiSvm | TopkSvmAlpha => {
            spec.validate(m)?;
            let b = margins_wo_y(ctx.u, ctx.class(spec.family)?);
            (top_k_sum(&b, k, |v| v) / k as f64).max(0.0)
        }
        TopkSvmBeta => {
            spec.validate(m)?;
            let b = margins_wo_y(ctx.u, ctx.class(spec.family)?);
            top_k_sum(&b, k, |v| v.max(0.0)) / k as f64
        }
        TopkSvmAlphaSmooth | TopkSvmBetaSmooth => smooth_topk_hinge(spec, ctx)?.0,
        Softmax => {
            let y = ctx.class(spec.family)?;
            let uy = ctx.u[y];
            log_sum_exp(ctx.u.iter().map(|&v| v - uy))
        }
        TopkEntropy => {
            spec.validate(m)?;
            let y = ctx.class(spec.family)?;
            solve_topk_entropy_primal(&diffs_wo_y(ctx.u, y), k)?.loss
        }
        TopkEntropyTruncated => truncated_entropy(ctx, k)?.0,
        MlSvm => {
            let mask = ctx.label_mask(spec.family)?;
            let (mut max_neg, mut min_pos) = (f64::NEG_INFINITY, f64::INFINITY);
            for (j, &u) in ctx.u.iter().enumerate() {
                if mask[j] {
                    min_pos = min_pos.min(u);
                } else {
                    max_neg = max_neg.max(u);
                }
            }
            (1.0 + max_neg - min_pos).max(0.0)
        }
        MlSvmSmooth => smooth_ml_svm(spec.gamma, ctx)?.0,
        MlEntropy => {
            let mask = ctx.label_mask(spec.family)?;
            let lse = log_sum_exp(ctx.u.iter().copied());
            let (mut sum, mut cnt) = (0.0, 0.0);
            for (j, &u) in ctx.u.iter().enumerate() {
                if mask[j] {
                    sum += u;
                    cnt += 1.0;
                }
            }
            lse - sum / cnt
        }
    })
}

fn smooth_topk_hinge(spec: &LossSpec, ctx: &ScoreContext) -> Result<(f64, Vec<f64>)> {
    let m = ctx.u.len();
    spec.validate(m)?;
    let y = ctx.class(spec.family)?;
    let gamma = spec.gamma;
    if !(gamma > 0.0) {
        return Err(Error::Unsupported(
            "the top-k hinge is not differentiable without smoothing".into(),
        ));
    }
    let b = margins_wo_y(ctx.u, y);
    let p = match spec.family {
        LossFamily::TopkSvmBetaSmooth => project_topk_beta(&b, spec.k, gamma, 0.0)?,
        _ => project_topk_alpha(&b, spec.k, gamma, 0.0)?,
    };
    let val = (b.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>()
        - 0.5 * p.iter().map(|v| v * v).sum::<f64>())
        / gamma;
    Ok((val, embed(&p, y, 1.0 / gamma)))
}

fn smooth_ml_svm(gamma: f64, ctx: &ScoreContext) -> Result<(f64, Vec<f64>)> {
    let mask = ctx.label_mask(LossFamily::MlSvmSmooth)?;
    if !(gamma > 0.0) {
        return Err(Error::Unsupported(
            "ml-svm-smooth requires gamma > 0".into(),
        ));
    }
    let (pos, neg) = split(ctx.u, &mask);
    let b: Vec<f64> = pos.iter().map(|&j| 0.5 - ctx.u[j]).collect();
    let bb: Vec<f64> = neg.iter().map(|&j| 0.5 + ctx.u[j]).collect();
    let (p, pb) = project_bipartite(&b, &bb, gamma)?;
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>();
    let val = (dot(&b, &p) - 0.5 * dot(&p, &p) + dot(&bb, &pb) - 0.5 * dot(&pb, &pb)) / gamma;
    let mut g = vec![0.0; ctx.u.len()];
    for (i, &j) in pos.iter().enumerate() {
        g[j] = -p[i] / gamma;
    }
    for (i, &j) in neg.iter().enumerate() {
        g[j] = pb[i] / gamma;
    }
    Ok((val, g))
}

fn split(u: &[f64], mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    (0..u.len()).partition(|&j| mask[j])
}

/// The `m − k` smallest non-ground-truth coordinates, ordered by
/// `(score, index)`.
fn truncated_support(u: &[f64], y: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).filter(|&j| j != y).collect();
    idx.sort_by(|&i, &j| u[i].total_cmp(&u[j]).then(i.cmp(&j)));
    idx.truncate(u.len() - k);
    idx
}

fn truncated_entropy(ctx: &ScoreContext, k: usize) -> Result<(f64, Vec<f64>)> {
    let m = ctx.u.len();
    let y = ctx.class(LossFamily::TopkEntropyTruncated)?;
    if k == 0 || k >= m {
        return Err(Error::Config(format!(
            "truncated top-k entropy needs 1 <= k < m, got k = {k}, m = {m}"
        )));
    }
    let uy = ctx.u[y];
    let support = truncated_support(ctx.u, y, k);
    // log(1 + Σ_J e^{a_j}) with the 1 as e^{a_y}
    let terms = support
        .iter()
        .map(|&j| ctx.u[j] - uy)
        .chain(std::iter::once(0.0));
    let lse = log_sum_exp(terms);
    let mut g = vec![0.0; m];
    let mut mass = 0.0;
    for &j in &support {
        let w = (ctx.u[j] - uy - lse).exp();
        g[j] = w;
        mass += w;
    }
    g[y] = -mass;
    Ok((lse, g))
}

/// Gradient of the smooth top-k hinge (`α` or `β` per `spec.family`) with
/// respect to the raw scores.
pub fn grad_smooth_topk_hinge(spec: &LossSpec, ctx: &ScoreContext) -> Result<Vec<f64>> {
    match spec.family {
        LossFamily::TopkSvmAlphaSmooth | LossFamily::TopkSvmBetaSmooth => {}
        _ => {
            return Err(Error::Unsupported(format!(
                "{} is not a smooth top-k hinge loss",
                spec.family
            )))
        }
    }
    Ok(smooth_topk_hinge(spec, ctx)?.1)
}

/// Gradient of the truncated top-k entropy on its current support.
pub fn grad_truncated_topk_entropy(ctx: &ScoreContext, k: usize) -> Result<Vec<f64>> {
    check_scores(ctx.u)?;
    Ok(truncated_entropy(ctx, k)?.1)
}

/// Loss value and a (sub)gradient with respect to the scores.
///
/// For smooth losses this is the gradient; for the hinge families it is the
/// maximizer of the conjugate representation, which is a subgradient.
pub fn loss_and_grad(spec: &LossSpec, ctx: &ScoreContext) -> Result<(f64, Vec<f64>)> {
    check_scores(ctx.u)?;
    let m = ctx.u.len();
    use LossFamily::*;
    let k = spec.k;
    match spec.family {
        OvaHinge => {
            let s = ctx.signs()?;
            let mut val = 0.0;
            let g = ctx
                .u
                .iter()
                .zip(&s)
                .map(|(&u, &y)| {
                    let h = 1.0 - y * u;
                    if h > 0.0 {
                        val += h;
                        -y
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((val, g))
        }
        OvaLogistic => {
            let s = ctx.signs()?;
            let val = ctx.u.iter().zip(&s).map(|(&u, &y)| softplus(-y * u)).sum();
            let g = ctx
                .u
                .iter()
                .zip(&s)
                .map(|(&u, &y)| -y * sigmoid(-y * u))
                .collect();
            Ok((val, g))
        }
        MultiSvm | TopkSvmAlpha | TopkSvmBeta => {
            spec.validate(m)?;
            let y = ctx.class(spec.family)?;
            let b = margins_wo_y(ctx.u, y);
            let top = top_k_indices(&b, k);
            let mut x = vec![0.0; b.len()];
            let kf = k as f64;
            let val = if spec.family == TopkSvmBeta {
                for &j in &top {
                    if b[j] > 0.0 {
                        x[j] = 1.0 / kf;
                    }
                }
                top.iter().map(|&j| b[j].max(0.0)).sum::<f64>() / kf
            } else {
                let mean = top.iter().map(|&j| b[j]).sum::<f64>() / kf;
                if mean > 0.0 {
                    for &j in &top {
                        x[j] = 1.0 / kf;
                    }
                }
                mean.max(0.0)
            };
            Ok((val, embed(&x, y, 1.0)))
        }
        TopkSvmAlphaSmooth | TopkSvmBetaSmooth => smooth_topk_hinge(spec, ctx),
        Softmax | TopkEntropy => {
            let k = if spec.family == Softmax { 1 } else { k };
            if spec.family == TopkEntropy {
                spec.validate(m)?;
            }
            let y = ctx.class(spec.family)?;
            let a = diffs_wo_y(ctx.u, y);
            let ws = solve_topk_entropy_primal(&a, k)?;
            Ok((ws.loss, embed(&ws.x(&a, k), y, 1.0)))
        }
        TopkEntropyTruncated => truncated_entropy(ctx, k),
        MlSvm => {
            let mask = ctx.label_mask(spec.family)?;
            let (pos, neg) = split(ctx.u, &mask);
            let jn = *neg
                .iter()
                .max_by(|&&i, &&j| ctx.u[i].total_cmp(&ctx.u[j]).then(j.cmp(&i)))
                .expect("nonempty");
            let jp = *pos
                .iter()
                .min_by(|&&i, &&j| ctx.u[i].total_cmp(&ctx.u[j]).then(i.cmp(&j)))
                .expect("nonempty");
            let h = 1.0 + ctx.u[jn] - ctx.u[jp];
            let mut g = vec![0.0; m];
            if h > 0.0 {
                g[jn] = 1.0;
                g[jp] = -1.0;
            }
            Ok((h.max(0.0), g))
        }
        MlSvmSmooth => smooth_ml_svm(spec.gamma, ctx),
        MlEntropy => {
            let mask = ctx.label_mask(spec.family)?;
            let lse = log_sum_exp(ctx.u.iter().copied());
            let cnt = mask.iter().filter(|&&b| b).count() as f64;
            let mut sum = 0.0;
            let g = ctx
                .u
                .iter()
                .zip(&mask)
                .map(|(&u, &pos)| {
                    let p = (u - lse).exp();
                    if pos {
                        sum += u;
                        p - 1.0 / cnt
                    } else {
                        p
                    }
                })
                .collect();
            Ok((lse - sum / cnt, g))
        }
    }
}

/// Convex conjugate `L*(v)`; `+∞` outside its domain.
///
/// Returns an error only for malformed targets or for the nonconvex
/// truncated loss, which has no conjugate in this framework.
pub fn conjugate_value(spec: &LossSpec, v: &[f64], target: Target) -> Result<f64> {
    let m = v.len();
    let tol = FEASIBILITY_TOL;
    let ctx = ScoreContext { u: v, target };
    use LossFamily::*;
    let inf = f64::INFINITY;
    if v.iter().any(|x| !x.is_finite()) {
        return Ok(inf);
    }
    Ok(match spec.family {
        OvaHinge | OvaLogistic => {
            let s = ctx.signs()?;
            let mut val = 0.0;
            for (&vj, &yj) in v.iter().zip(&s) {
                let beta = -yj * vj;
                if beta < -tol || beta > 1.0 + tol {
                    return Ok(inf);
                }
                let beta = beta.clamp(0.0, 1.0);
                val += if spec.family == OvaHinge {
                    -beta
                } else {
                    xlogx(beta) + xlogx(1.0 - beta)
                };
            }
            val
        }
        MultiSvm | TopkSvmAlpha | TopkSvmBeta | TopkSvmAlphaSmooth | TopkSvmBetaSmooth
        | Softmax | TopkEntropy => {
            let y = ctx.class(spec.family)?;
            let k = if spec.family == Softmax { 1 } else { spec.k };
            let total: f64 = v.iter().sum();
            if total.abs() > tol * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()) {
                return Ok(inf);
            }
            let x: Vec<f64> = (0..m).filter(|&j| j != y).map(|j| v[j]).collect();
            let s: f64 = x.iter().sum();
            let beta = matches!(spec.family, TopkSvmBeta | TopkSvmBetaSmooth);
            let cap = if beta { 1.0 / k as f64 } else { s / k as f64 };
            if s > 1.0 + tol || x.iter().any(|&xj| xj < -tol || xj > cap + tol) {
                return Ok(inf);
            }
            match spec.family {
                Softmax | TopkEntropy => {
                    x.iter().map(|&xj| xlogx(xj.max(0.0))).sum::<f64>()
                        + xlogx((1.0 + v[y]).max(0.0))
                }
                _ => 0.5 * spec.gamma * x.iter().map(|xj| xj * xj).sum::<f64>() - s,
            }
        }
        TopkEntropyTruncated => {
            return Err(Error::Unsupported(
                "the truncated top-k entropy is nonconvex and has no conjugate here".into(),
            ))
        }
        MlSvm | MlSvmSmooth => {
            let mask = ctx.label_mask(spec.family)?;
            let (mut sp, mut sn) = (0.0, 0.0);
            for (j, &vj) in v.iter().enumerate() {
                if mask[j] {
                    if vj > tol {
                        return Ok(inf);
                    }
                    sp += vj;
                } else {
                    if vj < -tol {
                        return Ok(inf);
                    }
                    sn += vj;
                }
            }
            if (sp + sn).abs() > tol || sn > 1.0 + tol {
                return Ok(inf);
            }
            0.5 * (sp - sn) + 0.5 * spec.gamma * v.iter().map(|x| x * x).sum::<f64>()
        }
        MlEntropy => {
            let mask = ctx.label_mask(spec.family)?;
            let k = mask.iter().filter(|&&b| b).count() as f64;
            let mut total = 0.0;
            let mut val = 0.0;
            for (j, &vj) in v.iter().enumerate() {
                let w = if mask[j] { vj + 1.0 / k } else { vj };
                if w < -tol {
                    return Ok(inf);
                }
                total += w;
                val += xlogx(w.max(0.0));
            }
            if (total - 1.0).abs() > tol {
                return Ok(inf);
            }
            val
        }
    })
}

/// Inputs to one dual coordinate update.
#[derive(Clone, Copy, Debug)]
pub struct UpdateInput<'a> {
    pub target: Target<'a>,
    /// `q = f(x_i) − K_ii a_i`, the scores without the example's own
    /// contribution.
    pub q: &'a [f64],
    /// `K_ii = ⟨x_i, x_i⟩`
    pub kii: f64,
    /// `λn = 1/C`
    pub lambda_n: f64,
}

/// Maximizes the dual objective over the dual column `a_i` of one example
/// with the others fixed. Returns `false` and leaves `a_i` untouched when the
/// example has zero norm.
pub fn dual_update(spec: &LossSpec, inp: &UpdateInput, a_i: &mut [f64]) -> Result<bool> {
    let m = a_i.len();
    if inp.q.len() != m {
        return Err(Error::Dimension(format!(
            "dual update: {} scores for {m} classes",
            inp.q.len()
        )));
    }
    if !(inp.kii > 0.0) {
        return Ok(false);
    }
    check_scores(inp.q)?;
    let (kii, ln) = (inp.kii, inp.lambda_n);
    let ctx = ScoreContext {
        u: inp.q,
        target: inp.target,
    };
    use LossFamily::*;
    match spec.family {
        OvaHinge => {
            let s = ctx.signs()?;
            for j in 0..m {
                let beta = ((1.0 - s[j] * inp.q[j]) * ln / kii).clamp(0.0, 1.0);
                a_i[j] = s[j] * beta / ln;
            }
        }
        OvaLogistic => {
            let s = ctx.signs()?;
            let alpha = kii / ln;
            for j in 0..m {
                let beta = logistic_dual(alpha, s[j] * inp.q[j]);
                a_i[j] = s[j] * beta / ln;
            }
        }
        MultiSvm | TopkSvmAlpha | TopkSvmBeta | TopkSvmAlphaSmooth | TopkSvmBetaSmooth => {
            spec.validate(m)?;
            let y = ctx.class(spec.family)?;
            let denom = kii + spec.gamma * ln;
            let qy = inp.q[y];
            let b: Vec<f64> = (0..m)
                .filter(|&j| j != y)
                .map(|j| (inp.q[j] + 1.0 - qy) / denom)
                .collect();
            let rho = kii / denom;
            let x = match spec.family {
                TopkSvmBeta | TopkSvmBetaSmooth => project_topk_beta(&b, spec.k, 1.0 / ln, rho)?,
                _ => project_topk_alpha(&b, spec.k, 1.0 / ln, rho)?,
            };
            a_i.copy_from_slice(&embed(&x, y, -1.0));
        }
        Softmax | TopkEntropy => {
            let k = if spec.family == Softmax { 1 } else { spec.k };
            if spec.family == TopkEntropy {
                spec.validate(m)?;
            }
            let y = ctx.class(spec.family)?;
            let qy = inp.q[y];
            let b: Vec<f64> = (0..m).filter(|&j| j != y).map(|j| inp.q[j] - qy).collect();
            let r = prox_topk_entropy_dual(&b, kii / ln, k)?;
            a_i.copy_from_slice(&embed(&r.x, y, -1.0 / ln));
        }
        TopkEntropyTruncated => {
            return Err(Error::Unsupported(
                "the truncated top-k entropy is trained by gradient descent, not SDCA".into(),
            ))
        }
        MlSvm | MlSvmSmooth => {
            let mask = ctx.label_mask(spec.family)?;
            let (pos, neg) = split(inp.q, &mask);
            let denom = kii + spec.gamma * ln;
            let b: Vec<f64> = pos.iter().map(|&j| (0.5 - inp.q[j]) / denom).collect();
            let bb: Vec<f64> = neg.iter().map(|&j| (0.5 + inp.q[j]) / denom).collect();
            let (p, pb) = project_bipartite(&b, &bb, 1.0 / ln)?;
            for (i, &j) in pos.iter().enumerate() {
                a_i[j] = p[i];
            }
            for (i, &j) in neg.iter().enumerate() {
                a_i[j] = -pb[i];
            }
        }
        MlEntropy => {
            let mask = ctx.label_mask(spec.family)?;
            let (pos, neg) = split(inp.q, &mask);
            let alpha = kii / ln;
            let kf = pos.len() as f64;
            let b: Vec<f64> = pos.iter().map(|&j| inp.q[j] / alpha + 1.0 / kf).collect();
            let bb: Vec<f64> = neg.iter().map(|&j| inp.q[j] / alpha).collect();
            let (p, pb) = prox_ml_entropy(&b, &bb, alpha)?;
            for (i, &j) in pos.iter().enumerate() {
                a_i[j] = -(p[i] - 1.0 / kf) / ln;
            }
            for (i, &j) in neg.iter().enumerate() {
                a_i[j] = -pb[i] / ln;
            }
        }
    }
    Ok(true)
}

/// Root of `log(β/(1−β)) + αβ + c = 0` on `(0, 1)` by safeguarded Newton in
/// the logit `z`.
fn logistic_dual(alpha: f64, c: f64) -> f64 {
    // z + ασ(z) + c = 0 with z ∈ [−c − α, −c]
    let (mut lo, mut hi) = (-c - alpha, -c);
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let s = sigmoid(z);
        let h = z + alpha * s + c;
        if h.abs() <= 1e-12 * (1.0 + c.abs()) {
            break;
        }
        if h > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let next = z - h / (1.0 + alpha * s * (1.0 - s));
        z = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            break;
        }
    }
    sigmoid(z)
}
