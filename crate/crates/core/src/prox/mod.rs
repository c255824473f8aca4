//! Exact projection and proximal operators used by the dual updates and by
//! the smoothed losses.
//!
//! * [`solve_knapsack`]: continuous quadratic knapsack by variable fixing.
//! * [`project_topk_alpha`], [`project_topk_beta`]: (biased) projections
//!   onto the two top-k simplices.
//! * [`project_bipartite`]: projection onto `{x, y ≥ 0 : Σx = Σy ≤ r}`.
//! * [`prox_topk_entropy_dual`], [`solve_topk_entropy_primal`],
//!   [`prox_ml_entropy`]: the entropic maps built on [`crate::lambert`].

mod bipartite;
mod entropy;
mod knapsack;
mod topk;

pub use bipartite::project_bipartite;
pub use entropy::{
    prox_ml_entropy, prox_topk_entropy_dual, solve_topk_entropy_primal, EntropyProx, ProxWorkspace,
};
pub use knapsack::{solve_knapsack, solve_knapsack_threshold, Bound, KnapsackProblem};
pub use topk::{project_topk_alpha, project_topk_beta, TopkSimplex, TopkVariant};

use crate::error::{Error, Result};

/// Indices of `b` sorted by decreasing value, ties by index.
pub(crate) fn argsort_desc(b: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| b[j].total_cmp(&b[i]).then(i.cmp(&j)));
    idx
}

pub(crate) fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(j) => Err(Error::Domain(format!(
            "{name}: coordinate {j} is not finite ({})",
            v[j]
        ))),
        None => Ok(()),
    }
}
