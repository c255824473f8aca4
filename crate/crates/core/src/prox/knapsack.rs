use crate::error::{Error, Result};

use super::check_finite;

/// A lower or upper bound, either shared by all coordinates or given per
/// coordinate.
#[derive(Clone, Copy, Debug)]
pub enum Bound<'a> {
    Const(f64),
    Each(&'a [f64]),
}

impl Bound<'_> {
    #[inline]
    fn at(&self, j: usize) -> f64 {
        match self {
            Bound::Const(v) => *v,
            Bound::Each(v) => v[j],
        }
    }

    fn sum(&self, d: usize) -> f64 {
        match self {
            Bound::Const(v) => {
                if d == 0 {
                    0.0
                } else {
                    v * d as f64
                }
            }
            Bound::Each(v) => v.iter().sum(),
        }
    }
}

/// Projection of `b` onto `{x : lo ≤ x ≤ hi, ⟨1,x⟩ = r}` (or `≤ r`).
#[derive(Clone, Copy, Debug)]
pub struct KnapsackProblem<'a> {
    pub b: &'a [f64],
    pub r: f64,
    pub lo: Bound<'a>,
    pub hi: Bound<'a>,
    pub equality: bool,
}

impl<'a> KnapsackProblem<'a> {
    /// Equality-constrained projection onto the simplex of radius `r`.
    pub fn simplex(b: &'a [f64], r: f64) -> Self {
        KnapsackProblem {
            b,
            r,
            lo: Bound::Const(0.0),
            hi: Bound::Const(f64::INFINITY),
            equality: true,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.b.len();
        check_finite("knapsack", self.b)?;
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::Domain(format!(
                "knapsack: budget {} must be finite and non-negative",
                self.r
            )));
        }
        if let Bound::Each(v) = self.lo {
            if v.len() != d {
                return Err(Error::Dimension(format!(
                    "knapsack: {} lower bounds for {d} coordinates",
                    v.len()
                )));
            }
        }
        if let Bound::Each(v) = self.hi {
            if v.len() != d {
                return Err(Error::Dimension(format!(
                    "knapsack: {} upper bounds for {d} coordinates",
                    v.len()
                )));
            }
        }
        for j in 0..d {
            let (lo, hi) = (self.lo.at(j), self.hi.at(j));
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("knapsack: invalid bounds at {j}")));
            }
            if lo > hi {
                return Err(Error::Infeasible(format!(
                    "knapsack: lower bound {lo} exceeds upper bound {hi} at coordinate {j}"
                )));
            }
        }
        let slo = self.lo.sum(d);
        if slo > self.r * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Infeasible(format!(
                "knapsack: sum of lower bounds {slo} exceeds budget {}",
                self.r
            )));
        }
        if self.equality {
            let shi = self.hi.sum(d);
            if shi < self.r * (1.0 - 1e-12) - 1e-12 {
                return Err(Error::Infeasible(format!(
                    "knapsack: sum of upper bounds {shi} is below budget {}",
                    self.r
                )));
            }
        }
        Ok(())
    }
}

/// Solves the knapsack problem and returns the projection.
pub fn solve_knapsack(p: &KnapsackProblem) -> Result<Vec<f64>> {
    let mut x = vec![0.0; p.b.len()];
    solve_knapsack_threshold(p, &mut x)?;
    Ok(x)
}

/// Solves the knapsack problem into `x` and returns the threshold `t` with
/// `x = clamp(b − t, lo, hi)`. For an inactive inequality budget `t = 0`.
pub fn solve_knapsack_threshold(p: &KnapsackProblem, x: &mut [f64]) -> Result<f64> {
    p.validate()?;
    if x.len() != p.b.len() {
        return Err(Error::Dimension(format!(
            "knapsack: output of length {} for {} coordinates",
            x.len(),
            p.b.len()
        )));
    }
    if !p.equality {
        let mut sum = 0.0;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = p.b[j].clamp(p.lo.at(j), p.hi.at(j));
            sum += *xj;
        }
        if sum <= p.r {
            return Ok(0.0);
        }
    }
    Ok(kiwiel(p.b, p.lo, p.hi, p.r, 0.0, x))
}

/// Variable fixing for `Σ clamp(b_j − t, lo_j, hi_j) = r + κ t`, `κ ≥ 0`.
///
/// Writes the solution to `x` and returns `t`. Bounds are assumed
/// consistent and the equation solvable.
pub(crate) fn kiwiel(b: &[f64], lo: Bound, hi: Bound, r: f64, kappa: f64, x: &mut [f64]) -> f64 {
    let d = b.len();
    let mut free: Vec<usize> = (0..d).collect();
    let mut fixed = 0.0;
    let mut t = 0.0;
    let scale = b.iter().fold(r.abs(), |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-14 * scale * (d as f64 + 1.0);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    loop {
        let denom = free.len() as f64 + kappa;
        if denom == 0.0 {
            break;
        }
        let sb: f64 = free.iter().map(|&j| b[j]).sum();
        t = (sb + fixed - r) / denom;
        let (mut nabla, mut delta) = (0.0, 0.0);
        lower.clear();
        upper.clear();
        for &j in &free {
            let v = b[j] - t;
            let (l, h) = (lo.at(j), hi.at(j));
            if v < l {
                nabla += l - v;
                lower.push(j);
            } else if v > h {
                delta += v - h;
                upper.push(j);
            }
        }
        if (nabla - delta).abs() <= tol || (lower.is_empty() && upper.is_empty()) {
            break;
        }
        let fix = if nabla > delta { &lower } else { &upper };
        for &j in fix.iter() {
            let bound = if nabla > delta { lo.at(j) } else { hi.at(j) };
            x[j] = bound;
            fixed += bound;
        }
        free.retain(|j| !fix.contains(j));
    }
    for j in 0..d {
        x[j] = (b[j] - t).clamp(lo.at(j), hi.at(j));
    }
    t
}
