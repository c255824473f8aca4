use crate::error::{Error, Result};

use super::check_finite;
use super::knapsack::{kiwiel, Bound};

/// Projection of `(b, b̄)` onto `{x ≥ 0, y ≥ 0 : ⟨1,x⟩ = ⟨1,y⟩ ≤ r}`.
pub fn project_bipartite(b: &[f64], bbar: &[f64], r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_finite("bipartite projection", b)?;
    check_finite("bipartite projection", bbar)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "bipartite projection: radius {r} must be finite and non-negative"
        )));
    }
    let (m, n) = (b.len(), bbar.len());
    let mut p = vec![0.0; m];
    let mut pbar = vec![0.0; n];
    if r == 0.0 || m == 0 || n == 0 {
        return Ok((p, pbar));
    }

    // Independent projections at the full budget.
    let lo = Bound::Const(0.0);
    let hi = Bound::Const(f64::INFINITY);
    let t1 = kiwiel(b, lo, hi, r, 0.0, &mut p);
    let s1 = kiwiel(bbar, lo, hi, r, 0.0, &mut pbar);
    if t1 + s1 >= 0.0 {
        return Ok((p, pbar));
    }

    // Budget inactive: find t with Σ max(0, b − t) = Σ max(0, b̄ + t).
    let scale = b
        .iter()
        .chain(bbar)
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-14 * scale * (m + n) as f64;
    let mut ix: Vec<usize> = (0..m).collect();
    let mut iy: Vec<usize> = (0..n).collect();
    let mut t;
    loop {
        if ix.is_empty() || iy.is_empty() {
            p.fill(0.0);
            pbar.fill(0.0);
            return Ok((p, pbar));
        }
        let sx: f64 = ix.iter().map(|&j| b[j]).sum();
        let sy: f64 = iy.iter().map(|&j| bbar[j]).sum();
        t = (sx - sy) / (ix.len() + iy.len()) as f64;
        let dx: f64 = ix.iter().map(|&j| (b[j] - t).min(0.0)).sum();
        let dy: f64 = iy.iter().map(|&j| (bbar[j] + t).min(0.0)).sum();
        if (dx - dy).abs() <= tol {
            break;
        }
        // The side with the larger deficit keeps its violators at zero.
        if dx.abs() > dy.abs() {
            ix.retain(|&j| b[j] - t > 0.0);
        } else {
            iy.retain(|&j| bbar[j] + t > 0.0);
        }
    }
    for (pj, &bj) in p.iter_mut().zip(b) {
        *pj = (bj - t).max(0.0);
    }
    for (pj, &bj) in pbar.iter_mut().zip(bbar) {
        *pj = (bj + t).max(0.0);
    }
    Ok((p, pbar))
}
