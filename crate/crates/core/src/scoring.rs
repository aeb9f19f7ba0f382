//! Fractional marginal pseudo-likelihood (FMPL) scores.
//!
//! The local score of node `j` with blanket `mb` (size `k`) on `n`
//! observations is the fractional marginal likelihood of the Gaussian DAG
//! family `mb -> j`:
//!
//! ```text
//! log p(X_j | X_mb) = -(n-1)/2 log π + lnΓ((n+k)/2) - lnΓ((k+1)/2)
//!                     - (2k+1)/2 log n - (n-1)/2 (log|S_fa| - log|S_mb|)
//! ```
//!
//! with `fa = mb ∪ {j}`. Summing the same expression over parent sets gives
//! the marginal likelihood of a whole DAG, and summing it over blankets gives
//! the global pseudo-likelihood of an undirected graph.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{FmplError, Result};
use crate::graph::MarkovBlanketFamily;
use crate::model::ScatterMatrix;

/// Sparsity prior settings. The prior on a blanket of size `k` is
/// `B(a + k, b + m - k) / B(a, b)` with `m = k(k+1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreParams {
    pub use_prior: bool,
    pub prior_a: f64,
    pub prior_b: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { use_prior: true, prior_a: 0.5, prior_b: 0.5 }
    }
}

impl ScoreParams {
    pub fn without_prior() -> Self {
        Self { use_prior: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("prior_a", self.prior_a), ("prior_b", self.prior_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FmplError::InvalidParameter(format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Per-node data scores and prior terms of one graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCard {
    pub local_log_scores: Vec<f64>,
    pub local_log_priors: Vec<f64>,
    pub total: f64,
}

/// Local FMPL log-score `log p(X_j | X_mb)`.
pub fn local_fmpl_log_score(scatter: &ScatterMatrix, j: usize, mb: &[usize]) -> Result<f64> {
    let n = scatter.n();
    let k = mb.len();
    if n < k + 2 {
        return Err(FmplError::BlanketTooLarge { node: j, size: k, n });
    }
    if mb.contains(&j) {
        return Err(FmplError::InvalidParameter(format!("node {j} is in its own blanket")));
    }
    let log_ratio = scatter.log_det_ratio(j, mb)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(-0.5 * (nf - 1.0) * PI.ln() + ln_gamma(0.5 * (nf + kf))
        - ln_gamma(0.5 * (kf + 1.0))
        - 0.5 * (2.0 * kf + 1.0) * nf.ln()
        - 0.5 * (nf - 1.0) * log_ratio)
}

/// Log prior of a blanket of size `k`; 0 when the prior is disabled.
pub fn log_prior_mb(k: usize, params: &ScoreParams) -> f64 {
    if !params.use_prior {
        return 0.0;
    }
    let kf = k as f64;
    let m = kf * (kf + 1.0) / 2.0;
    let (a, b) = (params.prior_a, params.prior_b);
    ln_beta(a + kf, b + m - kf) - ln_beta(a, b)
}

/// Local score plus prior term for one node, the objective of the blanket
/// search.
pub fn local_objective(scatter: &ScatterMatrix, j: usize, mb: &[usize], params: &ScoreParams) -> Result<f64> {
    Ok(local_fmpl_log_score(scatter, j, mb)? + log_prior_mb(mb.len(), params))
}

/// Global log FMPL (plus priors) of a blanket family. An undirected graph is
/// scored through [`crate::graph::UndirectedGraph::blankets`].
pub fn global_fmpl_score(
    scatter: &ScatterMatrix,
    family: &MarkovBlanketFamily,
    params: &ScoreParams,
) -> Result<ScoreCard> {
    if family.p() != scatter.p() {
        return Err(FmplError::DimensionMismatch { expected: scatter.p(), found: family.p() });
    }
    let p = family.p();
    let mut local_log_scores = Vec::with_capacity(p);
    let mut local_log_priors = Vec::with_capacity(p);
    let mut total = 0.0;
    for j in 0..p {
        let mb = family.blanket(j);
        let s = local_fmpl_log_score(scatter, j, mb).map_err(|e| e.at_node(j))?;
        let pr = log_prior_mb(mb.len(), params);
        total += s + pr;
        local_log_scores.push(s);
        local_log_priors.push(pr);
    }
    Ok(ScoreCard { local_log_scores, local_log_priors, total })
}

/// Fractional log marginal likelihood of a Gaussian DAG given as parent sets.
pub fn dag_log_marginal_likelihood(scatter: &ScatterMatrix, parent_sets: &[Vec<usize>]) -> Result<f64> {
    let p = scatter.p();
    if parent_sets.len() != p {
        return Err(FmplError::DimensionMismatch { expected: p, found: parent_sets.len() });
    }
    if let Some(node) = find_cycle(parent_sets)? {
        return Err(FmplError::Cycle { node });
    }
    let mut total = 0.0;
    for (j, pa) in parent_sets.iter().enumerate() {
        total += local_fmpl_log_score(scatter, j, pa).map_err(|e| e.at_node(j))?;
    }
    Ok(total)
}

/// Returns a node on a directed cycle, if any. Edges run parent -> child.
fn find_cycle(parent_sets: &[Vec<usize>]) -> Result<Option<usize>> {
    let p = parent_sets.len();
    let mut indeg = vec![0usize; p];
    let mut children = vec![Vec::new(); p];
    for (j, pa) in parent_sets.iter().enumerate() {
        for &i in pa {
            if i >= p {
                return Err(FmplError::InvalidParameter(format!("parent {i} out of range")));
            }
            children[i].push(j);
            indeg[j] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..p).filter(|&j| indeg[j] == 0).collect();
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        seen += 1;
        for &c in &children[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                stack.push(c);
            }
        }
    }
    Ok(if seen == p { None } else { (0..p).find(|&j| indeg[j] > 0) })
}
