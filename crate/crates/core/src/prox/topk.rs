use crate::error::{Error, Result};

use super::knapsack::{kiwiel, Bound};
use super::{argsort_desc, check_finite};

/// Which top-k simplex a projection targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopkVariant {
    /// `{x : ⟨1,x⟩ ≤ r, 0 ≤ x_i ≤ ⟨1,x⟩/k}`
    Alpha,
    /// `{x : ⟨1,x⟩ ≤ r, 0 ≤ x_i ≤ r/k}`
    Beta,
}

/// A top-k simplex of radius `r`.
#[derive(Clone, Copy, Debug)]
pub struct TopkSimplex {
    pub k: usize,
    pub r: f64,
    pub variant: TopkVariant,
}

impl TopkSimplex {
    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let s: f64 = x.iter().sum();
        let cap = match self.variant {
            TopkVariant::Alpha => s / self.k as f64,
            TopkVariant::Beta => self.r / self.k as f64,
        };
        s <= self.r + tol && x.iter().all(|&v| v >= -tol && v <= cap + tol)
    }

    /// Biased projection `argmin ½‖x − b‖² + (ρ/2)⟨1,x⟩²` over the set.
    pub fn project(&self, b: &[f64], rho: f64) -> Result<Vec<f64>> {
        match self.variant {
            TopkVariant::Alpha => project_topk_alpha(b, self.k, self.r, rho),
            TopkVariant::Beta => project_topk_beta(b, self.k, self.r, rho),
        }
    }
}

fn check_args(b: &[f64], k: usize, r: f64, rho: f64) -> Result<()> {
    check_finite("top-k projection", b)?;
    if k == 0 {
        return Err(Error::Domain(
            "top-k projection: k must be at least 1".into(),
        ));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "top-k projection: radius {r} must be finite and non-negative"
        )));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "top-k projection: bias {rho} must be finite and non-negative"
        )));
    }
    Ok(())
}

fn tolerance(b: &[f64], r: f64) -> f64 {
    1e-12 * b.iter().fold(r.max(1.0), |m, v| m.max(v.abs()))
}

/// Equality-budget solve shared by both variants: `x = clamp(b − t, 0, r/k)`
/// with `⟨1,x⟩ = r`. Requires `d ≥ k`.
fn equality_budget(b: &[f64], k: usize, r: f64, x: &mut [f64]) -> f64 {
    kiwiel(b, Bound::Const(0.0), Bound::Const(r / k as f64), r, 0.0, x)
}

/// Biased projection onto `{x : ⟨1,x⟩ ≤ r, 0 ≤ x_i ≤ ⟨1,x⟩/k}`.
///
/// Minimizes `½‖x − b‖² + (ρ/2)⟨1,x⟩²`; `ρ = 0` is the Euclidean projection.
pub fn project_topk_alpha(b: &[f64], k: usize, r: f64, rho: f64) -> Result<Vec<f64>> {
    check_args(b, k, r, rho)?;
    let d = b.len();
    let mut x = vec![0.0; d];
    if k > d || r == 0.0 {
        return Ok(x);
    }
    let order = argsort_desc(b);
    let sorted: Vec<f64> = order.iter().map(|&j| b[j]).collect();
    if sorted[..k].iter().sum::<f64>() <= 0.0 {
        return Ok(x);
    }
    let tol = tolerance(b, r);
    let kf = k as f64;

    // The budget is usually active.
    let t = equality_budget(b, k, r, &mut x);
    let cap = r / kf;
    let nu: f64 = sorted
        .iter()
        .take_while(|&&v| v - t >= cap)
        .map(|&v| v - t - cap)
        .sum();
    let lambda = t - rho * r + nu / kf;
    if lambda >= -tol {
        return Ok(x);
    }

    // Inactive budget: enumerate |U| = u and |M| = mm over the sorted order.
    let mut prefix = vec![0.0; d + 1];
    for j in 0..d {
        prefix[j + 1] = prefix[j] + sorted[j];
    }
    let mut best: Option<(f64, f64, f64, usize, usize)> = None;
    fn consider(
        best: &mut Option<(f64, f64, f64, usize, usize)>,
        cand: (f64, f64, f64, usize, usize),
    ) {
        if best.map_or(true, |(bv, ..)| cand.0 < bv) {
            *best = Some(cand);
        }
    }
    'outer: for u in 0..k.min(d) {
        let uf = u as f64;
        let a = 1.0 - uf / kf;
        let c = rho + uf / (kf * kf);
        let su = prefix[u];
        for mm in 1..=(d - u) {
            let sm = prefix[u + mm] - prefix[u];
            let mf = mm as f64;
            let det = a * a + mf * c;
            let s = (a * sm + mf * su / kf) / det;
            let t = (c * sm - a * su / kf) / det;
            let cap = s / kf;
            let mut viol = (-s).max(0.0) + (s - r).max(0.0);
            if u > 0 {
                viol += (cap - (sorted[u - 1] - t)).max(0.0);
            }
            viol += (sorted[u] - t - cap).max(0.0);
            viol += (t - sorted[u + mm - 1]).max(0.0);
            if u + mm < d {
                viol += (sorted[u + mm] - t).max(0.0);
            }
            consider(&mut best, (viol, s, t, u, mm));
            if viol <= tol {
                break 'outer;
            }
        }
    }
    if best.map_or(true, |(v, ..)| v > tol) {
        // |U| = k: the top-k entries share s/k, the rest vanish.
        let s = (prefix[k] / (1.0 + rho * kf)).clamp(0.0, r);
        let mut viol = 0.0;
        if k < d {
            viol += (sorted[k] - (sorted[k - 1] - s / kf)).max(0.0);
        }
        let t = if k < d {
            sorted[k]
        } else {
            sorted[k - 1] - s / kf
        };
        consider(&mut best, (viol, s, t, k, 0));
    }
    let (_, s, t, u, mm) = best.expect("at least one candidate");
    let cap = s / kf;
    for (pos, &j) in order.iter().enumerate() {
        x[j] = if pos < u {
            cap
        } else if pos < u + mm {
            (b[j] - t).clamp(0.0, cap)
        } else {
            0.0
        };
    }
    Ok(x)
}

/// Biased projection onto `{x : ⟨1,x⟩ ≤ r, 0 ≤ x_i ≤ r/k}`.
pub fn project_topk_beta(b: &[f64], k: usize, r: f64, rho: f64) -> Result<Vec<f64>> {
    check_args(b, k, r, rho)?;
    let d = b.len();
    let mut x = vec![0.0; d];
    if r == 0.0 || d == 0 {
        return Ok(x);
    }
    let cap = r / k as f64;
    if d >= k {
        let t = equality_budget(b, k, r, &mut x);
        if t - rho * r >= -tolerance(b, r) {
            return Ok(x);
        }
    }
    if rho == 0.0 {
        for (xj, &bj) in x.iter_mut().zip(b) {
            *xj = bj.clamp(0.0, cap);
        }
    } else {
        // Σ clamp(b − t, 0, r/k) = t/ρ
        kiwiel(
            b,
            Bound::Const(0.0),
            Bound::Const(cap),
            0.0,
            1.0 / rho,
            &mut x,
        );
    }
    Ok(x)
}
