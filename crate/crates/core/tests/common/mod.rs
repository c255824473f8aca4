//! Independent reference implementations used by the integration tests.
//!
//! None of these call into the library's solvers; they only share its
//! public data types.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdca_topk::data::{Dataset, Features, Labels};
use sdca_topk::lambert::{lambert_v, lambert_v_inverse};
use sdca_topk::losses::{LossFamily, LossSpec};
use sdca_topk::metrics::PartitionMetrics;
use sdca_topk::prox::EntropyProx;
use sdca_topk::solver::Scores;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0))
        .collect()
}

// ---------------------------------------------------------------------------
// Knapsack and simplex projections by sorting breakpoints.

/// Projection onto `{lo ≤ x ≤ hi, Σx = r}` (or `≤ r`) with constant bounds,
/// by scanning the sorted breakpoints of `φ(t) = Σ clamp(b − t, lo, hi)`.
pub fn knapsack_sort_scan(b: &[f64], lo: f64, hi: f64, r: f64, equality: bool) -> Vec<f64> {
    let phi = |t: f64| b.iter().map(|&v| (v - t).clamp(lo, hi)).sum::<f64>();
    if !equality && b.iter().map(|&v| v.clamp(lo, hi)).sum::<f64>() <= r {
        return b.iter().map(|&v| v.clamp(lo, hi)).collect();
    }
    let mut bps: Vec<f64> = b.iter().map(|&v| v - lo).collect();
    if hi.is_finite() {
        bps.extend(b.iter().map(|&v| v - hi));
    }
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let vals: Vec<f64> = bps.iter().map(|&t| phi(t)).collect();
    let t = if r >= vals[0] {
        // Left of every breakpoint only an infinite upper bound lets φ grow.
        bps[0] - (r - vals[0]) / b.len() as f64
    } else {
        let mut t = *bps.last().unwrap();
        for w in 0..bps.len() - 1 {
            let (fa, fb) = (vals[w], vals[w + 1]);
            if fa >= r && r >= fb {
                t = if fa == fb {
                    bps[w]
                } else {
                    bps[w] + (fa - r) * (bps[w + 1] - bps[w]) / (fa - fb)
                };
                break;
            }
        }
        t
    };
    b.iter().map(|&v| (v - t).clamp(lo, hi)).collect()
}

/// Sorting-based projection onto `{x ≥ 0, Σx = r}`; returns `(x, t)`.
pub fn simplex_sort(b: &[f64], r: f64) -> (Vec<f64>, f64) {
    let mut u = b.to_vec();
    u.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let th = (cum - r) / (j + 1) as f64;
        if uj - th > 0.0 {
            theta = th;
        }
    }
    (b.iter().map(|&v| (v - theta).max(0.0)).collect(), theta)
}

/// Breakpoint search for the bipartite projection.
pub fn bipartite_sort(b: &[f64], bbar: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
    if r == 0.0 || b.is_empty() || bbar.is_empty() {
        return (vec![0.0; b.len()], vec![0.0; bbar.len()]);
    }
    let (p, t1) = simplex_sort(b, r);
    let (q, s1) = simplex_sort(bbar, r);
    if t1 + s1 >= 0.0 {
        return (p, q);
    }
    let phi = |t: f64| {
        b.iter().map(|&v| (v - t).max(0.0)).sum::<f64>()
            - bbar.iter().map(|&v| (v + t).max(0.0)).sum::<f64>()
    };
    let mut bps: Vec<f64> = b.iter().copied().chain(bbar.iter().map(|&v| -v)).collect();
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let vals: Vec<f64> = bps.iter().map(|&t| phi(t)).collect();
    let mut t = bps[0];
    for w in 0..bps.len() - 1 {
        let (fa, fb) = (vals[w], vals[w + 1]);
        if fa >= 0.0 && fb <= 0.0 {
            t = if fa == fb {
                bps[w]
            } else {
                bps[w] + fa * (bps[w + 1] - bps[w]) / (fa - fb)
            };
            break;
        }
    }
    (
        b.iter().map(|&v| (v - t).max(0.0)).collect(),
        bbar.iter().map(|&v| (v + t).max(0.0)).collect(),
    )
}

// ---------------------------------------------------------------------------
// Active-set enumeration for small quadratic programs.

/// A linear equality `⟨row, x⟩ = rhs`.
pub type Eq = (Vec<f64>, f64);

/// Minimizes `½‖x − b‖² + (ρ/2)⟨1,x⟩²` subject to each candidate set of
/// equalities, keeps the feasible stationary points, and returns the one
/// with the smallest objective.
pub fn qp_enumerate(
    b: &[f64],
    rho: f64,
    patterns: impl Iterator<Item = Vec<Eq>>,
    feasible: impl Fn(&[f64]) -> bool,
) -> Vec<f64> {
    let d = b.len();
    let obj = |x: &[f64]| {
        let s: f64 = x.iter().sum();
        0.5 * x.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() + 0.5 * rho * s * s
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for eqs in patterns {
        let q = eqs.len();
        let mut kkt = DMatrix::<f64>::zeros(d + q, d + q);
        let mut rhs = DVector::<f64>::zeros(d + q);
        for i in 0..d {
            for j in 0..d {
                kkt[(i, j)] = rho + if i == j { 1.0 } else { 0.0 };
            }
            rhs[i] = b[i];
        }
        for (e, (row, val)) in eqs.iter().enumerate() {
            for j in 0..d {
                kkt[(d + e, j)] = row[j];
                kkt[(j, d + e)] = row[j];
            }
            rhs[d + e] = *val;
        }
        // LU is accurate on regular systems; the SVD handles redundant
        // equations. Solutions that do not satisfy the system are dropped.
        let sol = match kkt.clone().full_piv_lu().solve(&rhs) {
            Some(s) => s,
            None => match kkt.clone().svd(true, true).solve(&rhs, 1e-12) {
                Ok(s) => s,
                Err(_) => continue,
            },
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let x: Vec<f64> = (0..d).map(|j| sol[j]).collect();
        if !x.iter().all(|v| v.is_finite()) || !feasible(&x) {
            continue;
        }
        let f = obj(&x);
        if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    best.expect("no feasible pattern").1
}

fn unit(d: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[j] = 1.0;
    e
}

/// Every assignment of {at zero, at cap, free} per coordinate, with the
/// budget either active or not.
fn topk_patterns(d: usize, k: usize, r: f64, alpha: bool) -> impl Iterator<Item = Vec<Eq>> {
    let total = 3usize.pow(d as u32);
    (0..total * 2).map(move |code| {
        let mut c = code / 2;
        let mut eqs = Vec::new();
        for j in 0..d {
            match c % 3 {
                0 => eqs.push((unit(d, j), 0.0)),
                1 => {
                    if alpha {
                        let mut row = vec![-1.0 / k as f64; d];
                        row[j] += 1.0;
                        eqs.push((row, 0.0));
                    } else {
                        eqs.push((unit(d, j), r / k as f64));
                    }
                }
                _ => {}
            }
            c /= 3;
        }
        if code % 2 == 1 {
            eqs.push((vec![1.0; d], r));
        }
        eqs
    })
}

pub fn topk_enumerate(b: &[f64], k: usize, r: f64, rho: f64, alpha: bool) -> Vec<f64> {
    let tol = 1e-9;
    let feasible = move |x: &[f64]| {
        let s: f64 = x.iter().sum();
        let cap = if alpha { s / k as f64 } else { r / k as f64 };
        s <= r + tol && x.iter().all(|&v| v >= -tol && v <= cap + tol)
    };
    qp_enumerate(b, rho, topk_patterns(b.len(), k, r, alpha), feasible)
}

/// Bipartite projection by enumerating which coordinates sit at zero.
pub fn bipartite_enumerate(b: &[f64], bbar: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (b.len(), bbar.len());
    let d = m + n;
    let z: Vec<f64> = b.iter().chain(bbar).copied().collect();
    let mut balance = vec![1.0; d];
    for v in &mut balance[m..] {
        *v = -1.0;
    }
    let mut budget = vec![0.0; d];
    for v in &mut budget[..m] {
        *v = 1.0;
    }
    let patterns = (0..(1usize << d) * 2).map(move |code| {
        let mut eqs = vec![(balance.clone(), 0.0)];
        for j in 0..d {
            if (code >> (j + 1)) & 1 == 1 {
                eqs.push((unit(d, j), 0.0));
            }
        }
        if code & 1 == 1 {
            eqs.push((budget.clone(), r));
        }
        eqs
    });
    let tol = 1e-9;
    let feasible = move |x: &[f64]| {
        let sx: f64 = x[..m].iter().sum();
        let sy: f64 = x[m..].iter().sum();
        x.iter().all(|&v| v >= -tol) && (sx - sy).abs() <= tol && sx <= r + tol
    };
    let x = qp_enumerate(&z, 0.0, patterns, feasible);
    (x[..m].to_vec(), x[m..].to_vec())
}

// ---------------------------------------------------------------------------
// Entropic problems by nested one-dimensional searches (no Lambert W).

/// Solves `α e^y + y = c` for `y`, i.e. `x = e^y` with `αx + ln x = c`.
pub fn solve_log_scalar(alpha: f64, c: f64) -> f64 {
    let mut y = if c > 1.0 && alpha > 0.0 {
        c.min((c / alpha).ln() + 1.0)
    } else {
        c
    };
    for _ in 0..200 {
        let e = alpha * y.exp();
        let g = e + y - c;
        let step = g / (e + 1.0);
        y -= step;
        if step.abs() <= 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    y
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `(α/2)(‖x‖² + s²) − ⟨b,x⟩ + ⟨x, log x⟩ + (1 − s) log(1 − s)`.
pub fn entropy_objective(b: &[f64], alpha: f64, x: &[f64]) -> f64 {
    let s: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    0.5 * alpha * (sq + s * s) - x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()
        + x.iter().map(|&v| xlogx(v)).sum::<f64>()
        + xlogx(1.0 - s)
}

/// For fixed mass `s`, minimizes the separable part over
/// `{Σx = s, 0 ≤ x ≤ s/k}` by bisection on the multiplier.
fn entropy_inner(b: &[f64], alpha: f64, k: usize, s: f64) -> Vec<f64> {
    let d = b.len();
    if s <= 0.0 {
        return vec![0.0; d];
    }
    let cap = s / k as f64;
    let x_of = |tau: f64| -> Vec<f64> {
        b.iter()
            .map(|&bj| solve_log_scalar(alpha, bj - 1.0 - tau).exp().min(cap))
            .collect()
    };
    let bmin = b.iter().cloned().fold(f64::INFINITY, f64::min);
    let bmax = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = bmin - 1.0 - (alpha * cap + cap.ln()) - 1.0;
    let sd = s / d as f64;
    let mut hi = bmax - 1.0 - (alpha * sd + sd.ln()) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let sum: f64 = x_of(mid).iter().sum();
        if sum > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut x = x_of(0.5 * (lo + hi));
    // Remove the bisection residue from the free coordinates.
    let sum: f64 = x.iter().sum();
    let free: Vec<usize> = (0..d).filter(|&j| x[j] < cap).collect();
    if !free.is_empty() {
        let w: f64 = free.iter().map(|&j| x[j]).sum();
        if w > 0.0 {
            for &j in &free {
                x[j] += (s - sum) * x[j] / w;
            }
        }
    }
    x
}

/// Minimizes the top-k entropy prox objective over the top-k simplex by a
/// golden-section search on the mass `s` around [`entropy_inner`].
pub fn entropy_nested(b: &[f64], alpha: f64, k: usize) -> (f64, Vec<f64>) {
    let d = b.len();
    if d < k {
        return (0.0, vec![0.0; d]);
    }
    let f = |s: f64| {
        let x = entropy_inner(b, alpha, k, s);
        (entropy_objective(b, alpha, &x), x)
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut c = hi - g * (hi - lo);
    let mut e = lo + g * (hi - lo);
    let mut fc = f(c).0;
    let mut fe = f(e).0;
    for _ in 0..200 {
        if fc < fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - g * (hi - lo);
            fc = f(c).0;
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + g * (hi - lo);
            fe = f(e).0;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mut best = f(0.5 * (lo + hi));
    for s in [0.0, 1.0] {
        let cand = f(s);
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best
}

/// `⟨x, log x⟩ + (α/2)‖x − b‖²` summed over both blocks.
pub fn ml_entropy_objective(b: &[f64], bbar: &[f64], alpha: f64, p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(b)
        .chain(q.iter().zip(bbar))
        .map(|(&x, &c)| xlogx(x) + 0.5 * alpha * (x - c) * (x - c))
        .sum()
}

/// Bisection on the multiplier of `Σx + Σy = 1`.
pub fn ml_entropy_bisect(b: &[f64], bbar: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let all: Vec<f64> = b.iter().chain(bbar).copied().collect();
    let n = all.len() as f64;
    let x_of = |tau: f64| -> Vec<f64> {
        all.iter()
            .map(|&c| solve_log_scalar(alpha, alpha * c - 1.0 - tau).exp())
            .collect()
    };
    let cmax = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = alpha * cmax - 1.0 - alpha - 1.0;
    let mut hi = alpha * cmax - 1.0 - (alpha / n + (1.0 / n).ln()) + 1.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if x_of(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let x = x_of(0.5 * (lo + hi));
    (x[..b.len()].to_vec(), x[b.len()..].to_vec())
}

/// Residuals of the full optimality system of the top-k entropy prox.
pub fn entropy_dual_residual(b: &[f64], alpha: f64, k: usize, r: &EntropyProx) -> f64 {
    let s: f64 = r.x.iter().sum();
    let cap = r.s / k as f64;
    let mut res = (s - r.s).abs();
    let mut nu_sum = 0.0;
    for (j, &x) in r.x.iter().enumerate() {
        let free = lambert_v(b[j] - r.t).unwrap() / alpha;
        if free < cap {
            res = res.max((x - free).abs());
        } else {
            res = res.max((x - cap).abs());
            nu_sum += b[j] - r.t - lambert_v_inverse(alpha * cap).unwrap();
        }
    }
    let slack = lambert_v(alpha - r.t - nu_sum / k as f64).unwrap() / alpha;
    res.max(((1.0 - r.s) - slack).abs())
}

// ---------------------------------------------------------------------------
// Finite differences.

pub fn central_diff(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; u.len()];
    let mut w = u.to_vec();
    for j in 0..u.len() {
        w[j] = u[j] + h;
        let fp = f(&w);
        w[j] = u[j] - h;
        let fm = f(&w);
        w[j] = u[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

// ---------------------------------------------------------------------------
// Random problems and an independent primal solver.

pub fn random_data(rng: &mut impl Rng, n: usize, m: usize, d: usize, multilabel: bool) -> Dataset {
    let values = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels = if multilabel {
        Labels::Multilabel(
            (0..n)
                .map(|_| loop {
                    let s: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
                    if !s.is_empty() && s.len() < m {
                        break s;
                    }
                })
                .collect(),
        )
    } else {
        Labels::Multiclass((0..n).map(|_| rng.gen_range(0..m)).collect())
    };
    Dataset::new(
        Features::dense(n, d, values).unwrap(),
        labels,
        (0..m).map(|c| c.to_string()).collect(),
    )
    .unwrap()
}

// Independent primal solver: gradient descent with Armijo backtracking on
// P(W), with loss gradients built from the oracles in `common`.

pub fn oracle_loss_grad(s: &LossSpec, u: &[f64], target: &[usize]) -> (f64, Vec<f64>) {
    let m = u.len();
    match s.family {
        LossFamily::Softmax => {
            let y = target[0];
            let mx = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = u.iter().map(|v| (v - mx).exp()).sum();
            let mut g: Vec<f64> = u.iter().map(|v| (v - mx).exp() / z).collect();
            g[y] -= 1.0;
            (mx + z.ln() - u[y], g)
        }
        LossFamily::MlEntropy => {
            let mx = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = u.iter().map(|v| (v - mx).exp()).sum();
            let k = target.len() as f64;
            let mut g: Vec<f64> = u.iter().map(|v| (v - mx).exp() / z).collect();
            let mut mean = 0.0;
            for &y in target {
                g[y] -= 1.0 / k;
                mean += u[y] / k;
            }
            (mx + z.ln() - mean, g)
        }
        LossFamily::TopkSvmAlphaSmooth | LossFamily::TopkEntropy => {
            let y = target[0];
            let others: Vec<usize> = (0..m).filter(|&j| j != y).collect();
            let (val, x) = if s.family == LossFamily::TopkEntropy {
                let a: Vec<f64> = others.iter().map(|&j| u[j] - u[y]).collect();
                let (f, x) = entropy_nested(&a, 0.0, s.k);
                (-f, x)
            } else {
                let b: Vec<f64> = others.iter().map(|&j| u[j] - u[y] + 1.0).collect();
                let scaled: Vec<f64> = b.iter().map(|v| v / s.gamma).collect();
                let x = topk_enumerate(&scaled, s.k, 1.0, 0.0, true);
                let v = b.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>()
                    - 0.5 * s.gamma * x.iter().map(|v| v * v).sum::<f64>();
                (v, x)
            };
            let mut g = vec![0.0; m];
            for (t, &j) in others.iter().enumerate() {
                g[j] = x[t];
                g[y] -= x[t];
            }
            (val, g)
        }
        _ => unreachable!(),
    }
}

pub fn oracle_primal(ds: &Dataset, s: &LossSpec, lambda: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let (n, m, d) = (ds.n(), ds.m(), ds.d());
    let x = ds.features.to_dense();
    let mut g: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut f = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        let u: Vec<f64> = (0..m).map(|j| (0..d).map(|l| xi[l] * w[l * m + j]).sum()).collect();
        let (l, gu) = oracle_loss_grad(s, &u, ds.labels.set(i));
        f += l / n as f64;
        for l in 0..d {
            for j in 0..m {
                g[l * m + j] += xi[l] * gu[j] / n as f64;
            }
        }
    }
    (f, g)
}

pub fn oracle_minimize(ds: &Dataset, s: &LossSpec, lambda: f64) -> f64 {
    let mut w = vec![0.0; ds.d() * ds.m()];
    let (mut f, mut g) = oracle_primal(ds, s, lambda, &w);
    let mut t = 1.0;
    for _ in 0..5000 {
        let gn: f64 = g.iter().map(|v| v * v).sum();
        // f − f* ≤ ‖∇f‖²/(2λ)
        if gn < 1e-14 * lambda {
            break;
        }
        loop {
            let c: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let (fc, gc) = oracle_primal(ds, s, lambda, &c);
            if fc <= f - 1e-4 * t * gn || t < 1e-16 {
                w = c;
                f = fc;
                g = gc;
                break;
            }
            t *= 0.5;
        }
        t *= 2.0;
    }
    f
}


// ---------------------------------------------------------------------------
// Metrics.

pub fn random_scores(rng: &mut impl Rng, n: usize, m: usize, ties: bool) -> Scores {
    let values = (0..n * m)
        .map(|_| {
            if ties {
                rng.gen_range(-2..3) as f64 * 0.5
            } else {
                rng.gen_range(-2.0..2.0)
            }
        })
        .collect();
    Scores { n, m, values }
}

pub fn random_sets(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| loop {
            let s: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.35)).collect();
            if !s.is_empty() {
                break s;
            }
        })
        .collect()
}

// Definitional oracles written over sets and explicit pairs.

pub fn oracle_rank_loss(s: &Scores, sets: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for (i, y) in sets.iter().enumerate() {
        let y: BTreeSet<usize> = y.iter().copied().collect();
        let ybar: Vec<usize> = (0..s.m).filter(|j| !y.contains(j)).collect();
        if ybar.is_empty() {
            continue;
        }
        let mut d = 0;
        for &a in &y {
            for &b in &ybar {
                if s.row(i)[a] <= s.row(i)[b] {
                    d += 1;
                }
            }
        }
        total += d as f64 / (y.len() * ybar.len()) as f64;
        count += 1;
    }
    total / count as f64
}

pub fn top_set(row: &[f64], k: usize) -> BTreeSet<usize> {
    // position of class j = number of classes ahead of it
    (0..row.len())
        .filter(|&j| {
            let ahead = (0..row.len())
                .filter(|&l| row[l] > row[j] || (row[l] == row[j] && l < j))
                .count();
            ahead < k
        })
        .collect()
}

pub fn oracle_prec_rec(s: &Scores, sets: &[Vec<usize>], k: usize) -> (f64, f64) {
    let (mut p, mut r) = (0.0, 0.0);
    for (i, y) in sets.iter().enumerate() {
        let top = top_set(s.row(i), k);
        let hits = y.iter().filter(|j| top.contains(j)).count() as f64;
        p += hits / k as f64;
        r += hits / y.len() as f64;
    }
    (p / s.n as f64, r / s.n as f64)
}

pub fn oracle_map(s: &Scores, sets: &[Vec<usize>]) -> f64 {
    let mut aps = Vec::new();
    for j in 0..s.m {
        let pos: Vec<usize> = (0..s.n).filter(|&i| sets[i].contains(&j)).collect();
        if pos.is_empty() {
            continue;
        }
        let rank = |i: usize| {
            1 + (0..s.n)
                .filter(|&l| s.row(l)[j] > s.row(i)[j] || (s.row(l)[j] == s.row(i)[j] && l < i))
                .count()
        };
        let ap: f64 = pos
            .iter()
            .map(|&i| {
                let r = rank(i);
                let better = pos.iter().filter(|&&l| rank(l) <= r).count();
                better as f64 / r as f64
            })
            .sum::<f64>()
            / pos.len() as f64;
        aps.push(ap);
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

pub fn f1(tp: f64, fp: f64, fn_: f64) -> f64 {
    if tp + fp + fn_ == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

pub fn oracle_partition(s: &Scores, sets: &[Vec<usize>], delta: f64) -> PartitionMetrics {
    let (n, m) = (s.n as f64, s.m as f64);
    let h: Vec<BTreeSet<usize>> = (0..s.n)
        .map(|i| (0..s.m).filter(|&j| s.row(i)[j] >= delta).collect())
        .collect();
    let y: Vec<BTreeSet<usize>> = sets.iter().map(|v| v.iter().copied().collect()).collect();
    let prim = |i: usize, j: usize| {
        let (a, b) = (h[i].contains(&j), y[i].contains(&j));
        [(a && b) as u8 as f64, (a && !b) as u8 as f64, (!a && b) as u8 as f64]
    };
    let mut inst = 0.0;
    for i in 0..s.n {
        let mut c = [0.0; 3];
        for j in 0..s.m {
            let p = prim(i, j);
            for t in 0..3 {
                c[t] += p[t] / m;
            }
        }
        inst += f1(c[0], c[1], c[2]) / n;
    }
    let mut mac = 0.0;
    for j in 0..s.m {
        let mut c = [0.0; 3];
        for i in 0..s.n {
            let p = prim(i, j);
            for t in 0..3 {
                c[t] += p[t] / n;
            }
        }
        mac += f1(c[0], c[1], c[2]) / m;
    }
    let mut c = [0.0; 3];
    for i in 0..s.n {
        for j in 0..s.m {
            let p = prim(i, j);
            for t in 0..3 {
                c[t] += p[t] / (n * m);
            }
        }
    }
    let mut acc = 0.0;
    let mut sacc = 0.0;
    let mut ham = 0.0;
    for i in 0..s.n {
        let inter = h[i].intersection(&y[i]).count() as f64;
        let union = h[i].union(&y[i]).count() as f64;
        acc += inter / union / n;
        sacc += (h[i] == y[i]) as u8 as f64 / n;
        ham += h[i].symmetric_difference(&y[i]).count() as f64 / (n * m);
    }
    PartitionMetrics {
        f1_instance: inst,
        f1_macro: mac,
        f1_micro: f1(c[0], c[1], c[2]),
        accuracy: acc,
        subset_accuracy: sacc,
        hamming_loss: ham,
    }
}

/// Smallest `1 − Σ_{j∈S} p_j` over all `k`-subsets `S`, by enumeration.
pub fn bayes_enumerate(p: &[f64], k: usize) -> f64 {
    let m = p.len();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let covered: f64 = (0..m).filter(|&j| mask >> j & 1 == 1).map(|j| p[j]).sum();
        if 1.0 - covered < best.0 {
            best = (1.0 - covered, mask);
        }
    }
    // re-sum the winning subset from its largest member down so the
    // comparison with a sorted sum is exact
    let mut chosen: Vec<f64> = (0..m).filter(|&j| best.1 >> j & 1 == 1).map(|j| p[j]).collect();
    chosen.sort_by(|a, b| b.total_cmp(a));
    (1.0 - chosen.iter().sum::<f64>()).max(0.0)
}
