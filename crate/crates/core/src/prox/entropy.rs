use crate::error::{Error, Result};
use crate::lambert::{v, v_derivs, v_inv};

use super::{argsort_desc, check_finite};

/// Target residual of the scalar root finders, relative to the equation scale.
const ROOT_TOL: f64 = 1e-13;
/// Residual above which a solve is reported as failed.
const ACCEPT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;

/// Solution of the top-k entropy proximal problem: `x`, its mass `s`, and
/// the threshold `t` with `x_j = min(V(b_j − t)/α, s/k)`.
#[derive(Clone, Debug)]
pub struct EntropyProx {
    pub x: Vec<f64>,
    pub s: f64,
    pub t: f64,
}

/// The partition and auxiliary scalars found by
/// [`solve_topk_entropy_primal`].
///
/// `Z` and `Q` are kept as logarithms since they overflow for large scores.
#[derive(Clone, Debug, Default)]
pub struct ProxWorkspace {
    /// Coordinates at the cap `x_j = s/k`, largest scores first.
    pub upper: Vec<usize>,
    /// Coordinates strictly below the cap.
    pub free: Vec<usize>,
    pub rho: f64,
    /// `(1/k) Σ_U a_j`
    pub a_mean: f64,
    pub log_z: f64,
    pub log_q: f64,
    pub s: f64,
    pub t: f64,
    /// Optimal value, i.e. the top-k entropy loss.
    pub loss: f64,
}

impl ProxWorkspace {
    /// The maximizer `x_j = min(exp(a_j − t), s/k)`.
    pub fn x(&self, a: &[f64], k: usize) -> Vec<f64> {
        let cap = self.s / k as f64;
        let mut x = vec![0.0; a.len()];
        for &j in &self.upper {
            x[j] = cap;
        }
        for &j in &self.free {
            x[j] = (a[j] - self.t).exp().min(cap);
        }
        x
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Start of each run of equal values in a descending sequence, below `limit`.
fn group_starts(sorted: &[f64], limit: usize) -> impl Iterator<Item = usize> + '_ {
    (0..limit.min(sorted.len())).filter(move |&u| u == 0 || sorted[u - 1] > sorted[u])
}

/// Finds `t` with `Σ_j V(c_j − t) = target` for `target > 0`.
///
/// Fourth-order Householder iteration inside a shrinking bracket, with
/// bisection whenever a step leaves it.
pub(crate) fn solve_sum_v(c: &[f64], target: f64) -> Result<f64> {
    debug_assert!(target > 0.0 && !c.is_empty());
    let cmax = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = cmax - v_inv(target);
    let mut hi = cmax - v_inv(target / c.len() as f64);
    let eval = |t: f64| {
        let (mut g, mut g1, mut g2, mut g3) = (-target, 0.0, 0.0, 0.0);
        for &cj in c {
            let (x, d1, d2, d3) = v_derivs(cj - t);
            g += x;
            g1 -= d1;
            g2 += d2;
            g3 -= d3;
        }
        (g, g1, g2, g3)
    };
    let mut t = 0.5 * (lo + hi);
    let mut g = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let (gv, g1, g2, g3) = eval(t);
        g = gv;
        if g.abs() <= ROOT_TOL * target {
            return Ok(t);
        }
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let num = -3.0 * g * (2.0 * g1 * g1 - g * g2);
        let den = 6.0 * g1 * g1 * g1 - 6.0 * g * g1 * g2 + g * g * g3;
        let next = t + num / den;
        t = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            g = eval(t).0;
            break;
        }
    }
    if g.abs() <= ACCEPT_TOL * target {
        Ok(t)
    } else {
        Err(Error::Numeric(format!(
            "entropic prox: root residual {g:e} exceeds tolerance"
        )))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "entropic prox: alpha {alpha} must be positive and finite"
        )));
    }
    Ok(())
}

/// Solves
/// `min (α/2)(⟨x,x⟩ + s²) − ⟨b,x⟩ + ⟨x, log x⟩ + (1 − s) log(1 − s)`
/// over `x ≥ 0, x_j ≤ s/k, s = ⟨1,x⟩ ≤ 1`.
///
/// If `b` has fewer than `k` entries the feasible set is `{0}`; then `x = 0`
/// and `t = ∞`.
pub fn prox_topk_entropy_dual(b: &[f64], alpha: f64, k: usize) -> Result<EntropyProx> {
    check_finite("top-k entropy prox", b)?;
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::Domain(
            "top-k entropy prox: k must be at least 1".into(),
        ));
    }
    let d = b.len();
    let kf = k as f64;
    if d < k {
        return Ok(EntropyProx {
            x: vec![0.0; d],
            s: 0.0,
            t: f64::INFINITY,
        });
    }
    if d == k {
        return Ok(equal_split(b, alpha, k));
    }

    let order = argsort_desc(b);
    let sorted: Vec<f64> = order.iter().map(|&j| b[j]).collect();
    let bscale = 1e-9 * sorted[0].abs().max(sorted[d - 1].abs()).max(1.0);
    let mut best: Option<(f64, f64, f64, usize)> = None;
    let mut last_err = None;
    let mut a_sum = 0.0;
    let mut prev_u = 0;
    for u in group_starts(&sorted, k) {
        a_sum += sorted[prev_u..u].iter().sum::<f64>();
        prev_u = u;
        let solved = if u == 0 {
            let mut c = Vec::with_capacity(d + 1);
            c.push(alpha);
            c.extend_from_slice(b);
            solve_sum_v(&c, alpha).map(|t| {
                let s = b.iter().map(|&bj| v(bj - t)).sum::<f64>() / alpha;
                (s, t)
            })
        } else {
            solve_partition(&sorted[u..], alpha, u as f64 / kf, a_sum / kf, k)
        };
        let (s, t) = match solved {
            Ok(st) => st,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let cap = s / kf;
        let mut viol = 0.0;
        if u > 0 {
            viol += (v_inv(alpha * cap) - (sorted[u - 1] - t)).max(0.0) / bscale;
        }
        if k > 1 {
            viol += (v(sorted[u] - t) / alpha - cap).max(0.0) / (1e-9 * cap.max(1e-300));
        }
        if best.map_or(true, |(bv, ..)| viol < bv) {
            best = Some((viol, s, t, u));
        }
        if viol <= 1.0 {
            break;
        }
    }
    let Some((_, s, t, u)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Numeric("top-k entropy prox failed".into())));
    };
    let cap = s / kf;
    let mut x = vec![0.0; d];
    for (pos, &j) in order.iter().enumerate() {
        x[j] = if pos < u {
            cap
        } else {
            (v(b[j] - t) / alpha).min(cap)
        };
    }
    Ok(EntropyProx { x, s, t })
}

/// `d == k`: every coordinate equals `s/k` and `s` solves
/// `αs(1 + 1/k) − mean(b) + log(s/k) − log(1 − s) = 0`, solved in
/// `z = logit(s)`.
fn equal_split(b: &[f64], alpha: f64, k: usize) -> EntropyProx {
    let kf = k as f64;
    let mean = b.iter().sum::<f64>() / kf;
    let c = alpha * (1.0 + 1.0 / kf);
    let base = kf.ln() + mean;
    let h = |z: f64| z + c * sigmoid(z) - base;
    let (mut lo, mut hi) = (base - c, base);
    let mut z = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let hz = h(z);
        if hz == 0.0 {
            break;
        }
        if hz > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let sg = sigmoid(z);
        let next = z - hz / (1.0 + c * sg * (1.0 - sg));
        z = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            break;
        }
    }
    let s = sigmoid(z);
    let cap = s / kf;
    let min_b = b.iter().cloned().fold(f64::INFINITY, f64::min);
    EntropyProx {
        x: vec![cap; b.len()],
        s,
        t: min_b - v_inv(alpha * cap),
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Solves the two-equation system for a fixed nonempty `U`:
///
/// `α(1 − ρ)s − Σ_M V(b_j − t) = 0`
/// `(1 − ρ)t + V⁻¹(α(1 − s)) − ρV⁻¹(αs/k) + A − α = 0`
///
/// Damped Newton on both unknowns first, then a safeguarded scalar solve on
/// `t` with `s` eliminated through the first equation.
fn solve_partition(bm: &[f64], alpha: f64, rho: f64, a: f64, k: usize) -> Result<(f64, f64)> {
    let kf = k as f64;
    let om = 1.0 - rho;
    let f2 = |s: f64, t: f64| {
        om * t + v_inv(alpha * (1.0 - s)) - rho * v_inv(alpha * s / kf) + a - alpha
    };
    let resid = |s: f64, t: f64| {
        let sv: f64 = bm.iter().map(|&bj| v(bj - t)).sum();
        (alpha * om * s - sv, f2(s, t))
    };
    let scale1 = alpha.max(1e-300);
    let scale2 = 1.0 + alpha + a.abs();

    // s(t) hits 1 at t_lo and decreases afterwards.
    let t_lo = solve_sum_v(bm, alpha * om)?;
    let s_of = |t: f64| bm.iter().map(|&bj| v(bj - t)).sum::<f64>() / (alpha * om);
    let g = |t: f64| {
        let s = s_of(t);
        if s >= 1.0 {
            f64::NEG_INFINITY
        } else if s <= 0.0 {
            f64::INFINITY
        } else {
            f2(s, t)
        }
    };
    let mut width = 1.0;
    let mut t_hi = t_lo + width;
    let mut tries = 0;
    while !(g(t_hi) > 0.0) {
        width *= 2.0;
        t_hi = t_lo + width;
        tries += 1;
        if tries > 2000 {
            return Err(Error::Numeric("top-k entropy prox: no bracket".into()));
        }
    }

    let converged = |s: f64, t: f64| {
        let (r1, r2) = resid(s, t);
        r1.abs() <= ROOT_TOL * scale1 * 1e2 && r2.abs() <= ROOT_TOL * (scale2 + t.abs()) * 1e2
    };

    // Damped Newton on (s, t), Armijo on the squared residual.
    let mut t = 0.5 * (t_lo + t_hi);
    let mut s = s_of(t).clamp(1e-300, 1.0 - 1e-16);
    let merit = |s: f64, t: f64| {
        let (r1, r2) = resid(s, t);
        (r1 / scale1).powi(2) + (r2 / scale2).powi(2)
    };
    let mut newton_ok = false;
    for _ in 0..50 {
        if converged(s, t) {
            newton_ok = true;
            break;
        }
        let (r1, r2) = resid(s, t);
        let dv: f64 = bm.iter().map(|&bj| v_derivs(bj - t).1).sum();
        let j11 = alpha * om;
        let j12 = dv;
        let j21 = -alpha - 1.0 / (1.0 - s) - rho * (alpha / kf + 1.0 / s);
        let j22 = om;
        let det = j11 * j22 - j12 * j21;
        if !(det.abs() > 0.0) || !det.is_finite() {
            break;
        }
        let ds = -(j22 * r1 - j12 * r2) / det;
        let dt = -(-j21 * r1 + j11 * r2) / det;
        let m0 = merit(s, t);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (sn, tn) = (s + step * ds, t + step * dt);
            if sn > 0.0 && sn < 1.0 {
                let mn = merit(sn, tn);
                if mn.is_finite() && mn <= (1.0 - 1e-4 * step) * m0 {
                    s = sn;
                    t = tn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if newton_ok {
        return Ok((s, t));
    }

    // Safeguarded Newton on t alone; g is increasing.
    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let s = s_of(t);
        let gt = g(t);
        if gt.is_finite() && gt.abs() <= ROOT_TOL * (scale2 + t.abs()) {
            break;
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = f64::NAN;
        if gt.is_finite() && s > 0.0 && s < 1.0 {
            let dv: f64 = bm.iter().map(|&bj| v_derivs(bj - t).1).sum();
            let ds = -dv / (alpha * om);
            let dg = om + (-alpha - 1.0 / (1.0 - s) - rho * (alpha / kf + 1.0 / s)) * ds;
            next = t - gt / dg;
        }
        t = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            break;
        }
    }
    let s = s_of(t);
    let (_, r2) = resid(s, t);
    if s > 0.0 && s < 1.0 && r2.abs() <= ACCEPT_TOL * (scale2 + t.abs()) {
        Ok((s, t))
    } else {
        Err(Error::Numeric(format!(
            "top-k entropy prox: residual {r2:e} exceeds tolerance"
        )))
    }
}

/// Maximizes `⟨a, x⟩ − (1 − s) log(1 − s) − ⟨x, log x⟩` over
/// `x ≥ 0, x_j ≤ s/k, s = ⟨1,x⟩ ≤ 1` in closed form per partition.
///
/// The optimal value is the top-k entropy loss of the score differences `a`.
pub fn solve_topk_entropy_primal(a: &[f64], k: usize) -> Result<ProxWorkspace> {
    check_finite("top-k entropy", a)?;
    if k == 0 {
        return Err(Error::Domain("top-k entropy: k must be at least 1".into()));
    }
    let d = a.len();
    let kf = k as f64;
    if d < k {
        return Ok(ProxWorkspace {
            free: (0..d).collect(),
            t: f64::INFINITY,
            log_z: f64::NEG_INFINITY,
            ..Default::default()
        });
    }
    let order = argsort_desc(a);
    let sorted: Vec<f64> = order.iter().map(|&j| a[j]).collect();

    if d == k {
        let mean = sorted.iter().sum::<f64>() / kf;
        let log_q = -mean - kf.ln();
        let sp = softplus(log_q);
        let s = (-sp).exp();
        let log_1ms = log_q - sp;
        let loss = (mean - (-sp - kf.ln())) * s - log_1ms.exp() * log_1ms;
        return Ok(ProxWorkspace {
            upper: order,
            free: Vec::new(),
            rho: 1.0,
            a_mean: mean,
            log_z: f64::NEG_INFINITY,
            log_q,
            s,
            t: sorted[d - 1] - (s / kf).ln(),
            loss,
        });
    }

    let tol = 1e-12 * sorted[0].abs().max(sorted[d - 1].abs()).max(1.0);
    let mut best: Option<(f64, ProxWorkspace)> = None;
    let mut a_sum = 0.0;
    let mut prev_u = 0;
    for u in group_starts(&sorted, k) {
        a_sum += sorted[prev_u..u].iter().sum::<f64>();
        prev_u = u;
        let rho = u as f64 / kf;
        let om = 1.0 - rho;
        let am = a_sum / kf;
        let log_z = log_sum_exp(&sorted[u..]);
        let log_q = om * om.ln() - rho * kf.ln() - om * log_z - am;
        let sp = softplus(log_q);
        let log_s = -sp;
        let s = log_s.exp();
        let t = log_z + sp - om.ln();
        let thr = log_s - kf.ln() + t;
        let mut viol = (sorted[u] - thr).max(0.0);
        if u > 0 {
            viol += (thr - sorted[u - 1]).max(0.0);
        }
        let log_1ms = log_q - sp;
        let loss = (am + om * t - rho * (log_s - kf.ln())) * s - log_1ms.exp() * log_1ms;
        let ws = ProxWorkspace {
            upper: order[..u].to_vec(),
            free: order[u..].to_vec(),
            rho,
            a_mean: am,
            log_z,
            log_q,
            s,
            t,
            loss,
        };
        let done = viol <= tol;
        if best.as_ref().map_or(true, |(bv, _)| viol < *bv) {
            best = Some((viol, ws));
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one partition").1)
}

/// Solves
/// `min ⟨x, log x⟩ + (α/2)‖x − b‖² + ⟨y, log y⟩ + (α/2)‖y − b̄‖²`
/// over `x, y ≥ 0` with `⟨1,x⟩ + ⟨1,y⟩ = 1`.
///
/// The solution is `x_j = V(αb_j − t)/α`, `y_j = V(αb̄_j − t)/α`.
pub fn prox_ml_entropy(b: &[f64], bbar: &[f64], alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_finite("multilabel entropy prox", b)?;
    check_finite("multilabel entropy prox", bbar)?;
    check_alpha(alpha)?;
    if b.is_empty() {
        return Err(Error::Domain(
            "multilabel entropy prox: the positive block must be nonempty".into(),
        ));
    }
    let c: Vec<f64> = b.iter().chain(bbar).map(|&v| alpha * v).collect();
    let t = solve_sum_v(&c, alpha)?;
    let p = b.iter().map(|&bj| v(alpha * bj - t) / alpha).collect();
    let pbar = bbar.iter().map(|&bj| v(alpha * bj - t) / alpha).collect();
    Ok((p, pbar))
}
