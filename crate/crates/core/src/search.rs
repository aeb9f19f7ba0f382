//! Greedy Markov blanket search and assembly of blanket families into
//! undirected graphs.
//!
//! Each node's blanket is optimized independently by best-improvement hill
//! climbing over single-node additions and deletions, starting from the empty
//! set. The resulting family is symmetrized by the OR rule (union of claims),
//! the AND rule (mutual claims), or by a further global hill climb (HC) over
//! the subgraphs of the OR graph.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FmplError, Result};
use crate::graph::{MarkovBlanketFamily, UndirectedGraph};
use crate::model::ScatterMatrix;
use crate::scoring::{local_objective, ScoreParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Or,
    And,
    Hc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Or, Method::And, Method::Hc];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Or => "or",
            Method::And => "and",
            Method::Hc => "hc",
        })
    }
}

impl FromStr for Method {
    type Err = FmplError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "or" => Ok(Method::Or),
            "and" => Ok(Method::And),
            "hc" => Ok(Method::Hc),
            other => Err(FmplError::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Largest blanket the search may propose; `None` means `min(p-1, n-2)`.
    pub max_mb_size: Option<usize>,
    pub method: Method,
    pub score_params: ScoreParams,
    /// Worker threads for the per-node searches; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { max_mb_size: None, method: Method::And, score_params: ScoreParams::default(), threads: 0 }
    }
}

impl SearchConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn blanket_cap(&self, scatter: &ScatterMatrix) -> usize {
        let p = scatter.p();
        let limit = p.saturating_sub(1);
        match self.max_mb_size {
            Some(m) => m.min(limit),
            None => limit.min(scatter.n().saturating_sub(2)),
        }
    }
}

/// Outcome of one node's search: the blanket, its objective value, and the
/// objective after each accepted move (starting with the empty set).
#[derive(Debug, Clone, PartialEq)]
pub struct BlanketSearch {
    pub blanket: Vec<usize>,
    pub score: f64,
    pub trace: Vec<f64>,
}

fn objective_or_neg_inf(scatter: &ScatterMatrix, j: usize, mb: &[usize], params: &ScoreParams) -> f64 {
    local_objective(scatter, j, mb, params).unwrap_or(f64::NEG_INFINITY)
}

/// Runs the greedy search for node `j` and returns the full trace.
pub fn search_markov_blanket_traced(scatter: &ScatterMatrix, j: usize, config: &SearchConfig) -> Result<BlanketSearch> {
    let p = scatter.p();
    if scatter.n() < 3 {
        return Err(FmplError::Input(format!("need n >= 3, have {}", scatter.n())));
    }
    if j >= p {
        return Err(FmplError::InvalidParameter(format!("node {j} out of range")));
    }
    let params = &config.score_params;
    let cap = config.blanket_cap(scatter);
    let mut mb: Vec<usize> = Vec::new();
    let mut current = local_objective(scatter, j, &mb, params).map_err(|e| e.at_node(j))?;
    let mut trace = vec![current];
    let mut cand = Vec::with_capacity(cap + 1);

    loop {
        // deletions first, then additions, each by ascending node index;
        // strict improvement keeps the earliest candidate on ties
        let mut best: Option<(f64, Vec<usize>)> = None;
        for pos in 0..mb.len() {
            cand.clear();
            cand.extend(mb.iter().enumerate().filter(|&(k, _)| k != pos).map(|(_, &v)| v));
            let s = objective_or_neg_inf(scatter, j, &cand, params);
            if s > current && best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, cand.clone()));
            }
        }
        if mb.len() < cap {
            for i in (0..p).filter(|&i| i != j) {
                let Err(at) = mb.binary_search(&i) else { continue };
                cand.clear();
                cand.extend_from_slice(&mb[..at]);
                cand.push(i);
                cand.extend_from_slice(&mb[at..]);
                let s = objective_or_neg_inf(scatter, j, &cand, params);
                if s > current && best.as_ref().is_none_or(|(b, _)| s > *b) {
                    best = Some((s, cand.clone()));
                }
            }
        }
        match best {
            Some((s, next)) => {
                current = s;
                mb = next;
                trace.push(s);
            }
            None => break,
        }
    }
    Ok(BlanketSearch { blanket: mb, score: current, trace })
}

pub fn search_markov_blanket(scatter: &ScatterMatrix, j: usize, config: &SearchConfig) -> Result<Vec<usize>> {
    search_markov_blanket_traced(scatter, j, config).map(|r| r.blanket)
}

/// Searches every node's blanket, in parallel over `config.threads` workers.
/// Results are gathered by node index, so the output does not depend on the
/// worker count.
pub fn search_all_blankets(scatter: &ScatterMatrix, config: &SearchConfig) -> Result<MarkovBlanketFamily> {
    config.score_params.validate()?;
    let p = scatter.p();
    let run = || -> Vec<Result<Vec<usize>>> {
        (0..p).into_par_iter().map(|j| search_markov_blanket(scatter, j, config)).collect()
    };
    let results = if config.threads == 1 {
        (0..p).map(|j| search_markov_blanket(scatter, j, config)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| FmplError::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(run)
    };
    let mut blankets = Vec::with_capacity(p);
    let mut errors = Vec::new();
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(b) => blankets.push(b),
            Err(e) => errors.push(e.at_node(j)),
        }
    }
    if !errors.is_empty() {
        return Err(FmplError::Nodes { errors });
    }
    MarkovBlanketFamily::new(blankets)
}

/// Edge `(i, j)` iff `i ∈ mb(j)` or `j ∈ mb(i)`.
pub fn assemble_or(family: &MarkovBlanketFamily) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(family.p());
    for j in 0..family.p() {
        for &i in family.blanket(j) {
            g.add_edge(i, j).expect("family indices are validated");
        }
    }
    g
}

/// Edge `(i, j)` iff `i ∈ mb(j)` and `j ∈ mb(i)`.
pub fn assemble_and(family: &MarkovBlanketFamily) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(family.p());
    for j in 0..family.p() {
        for &i in family.blanket(j).iter().filter(|&&i| i < j) {
            if family.contains(i, j) {
                g.add_edge(i, j).expect("family indices are validated");
            }
        }
    }
    g
}

/// Result of the HC refinement with the global objective after each accepted
/// toggle (starting with the OR graph).
#[derive(Debug, Clone, PartialEq)]
pub struct HcResult {
    pub graph: UndirectedGraph,
    pub trace: Vec<f64>,
}

fn toggled(mb: &[usize], node: usize) -> Vec<usize> {
    match mb.binary_search(&node) {
        Ok(pos) => {
            let mut v = mb.to_vec();
            v.remove(pos);
            v
        }
        Err(pos) => {
            let mut v = mb.to_vec();
            v.insert(pos, node);
            v
        }
    }
}

/// Greedy edge toggling within the OR graph's edge set. Per step every edge
/// of `E_OR` is toggled tentatively and the largest strict improvement of the
/// global objective is applied; only the two incident local terms change.
/// Exact ties prefer removals, then lexicographic edge order.
pub fn refine_hc_traced(
    scatter: &ScatterMatrix,
    family: &MarkovBlanketFamily,
    config: &SearchConfig,
) -> Result<HcResult> {
    config.score_params.validate()?;
    if family.p() != scatter.p() {
        return Err(FmplError::DimensionMismatch { expected: scatter.p(), found: family.p() });
    }
    let params = &config.score_params;
    let mut graph = assemble_or(family);
    let candidates: Vec<(usize, usize)> = graph.edges().collect();
    let mut blankets: Vec<Vec<usize>> = graph.blankets().blankets().to_vec();
    let mut local: Vec<f64> = (0..family.p()).map(|j| objective_or_neg_inf(scatter, j, &blankets[j], params)).collect();
    let mut trace = vec![local.iter().sum::<f64>()];

    loop {
        let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>, f64, f64)> = None;
        for removal in [true, false] {
            for (idx, &(i, j)) in candidates.iter().enumerate() {
                if graph.has_edge(i, j) != removal {
                    continue;
                }
                let mb_i = toggled(&blankets[i], j);
                let mb_j = toggled(&blankets[j], i);
                let si = objective_or_neg_inf(scatter, i, &mb_i, params);
                let sj = objective_or_neg_inf(scatter, j, &mb_j, params);
                let gain = (si + sj) - (local[i] + local[j]);
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.0) {
                    best = Some((gain, idx, mb_i, mb_j, si, sj));
                }
            }
        }
        let Some((_, idx, mb_i, mb_j, si, sj)) = best else { break };
        let (i, j) = candidates[idx];
        if !graph.remove_edge(i, j) {
            graph.add_edge(i, j)?;
        }
        blankets[i] = mb_i;
        blankets[j] = mb_j;
        local[i] = si;
        local[j] = sj;
        trace.push(local.iter().sum());
    }
    Ok(HcResult { graph, trace })
}

pub fn refine_hc(
    scatter: &ScatterMatrix,
    family: &MarkovBlanketFamily,
    config: &SearchConfig,
) -> Result<UndirectedGraph> {
    refine_hc_traced(scatter, family, config).map(|r| r.graph)
}

/// Blanket search followed by the assembly rule in `config.method`.
pub fn learn_graph(scatter: &ScatterMatrix, config: &SearchConfig) -> Result<(MarkovBlanketFamily, UndirectedGraph)> {
    let family = search_all_blankets(scatter, config)?;
    let graph = assemble(scatter, &family, config)?;
    Ok((family, graph))
}

/// Assembles an already searched family with the rule in `config.method`.
pub fn assemble(
    scatter: &ScatterMatrix,
    family: &MarkovBlanketFamily,
    config: &SearchConfig,
) -> Result<UndirectedGraph> {
    Ok(match config.method {
        Method::Or => assemble_or(family),
        Method::And => assemble_and(family),
        Method::Hc => refine_hc(scatter, family, config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::global_fmpl_score;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn family(b: Vec<Vec<usize>>) -> MarkovBlanketFamily {
        MarkovBlanketFamily::new(b).unwrap()
    }

    /// Scatter of a strongly dependent chain 0 - 1 - 2 plus an isolated node 3.
    fn chain_scatter(n: usize) -> ScatterMatrix {
        let sigma = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.8, 0.64, 0.0, 0.8, 1.0, 0.8, 0.0, 0.64, 0.8, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        );
        ScatterMatrix::from_matrix(&(sigma * n as f64), n).unwrap()
    }

    #[test]
    fn method_parsing() {
        assert_eq!("AND".parse::<Method>().unwrap(), Method::And);
        assert_eq!(Method::Hc.to_string(), "hc");
        assert!("xor".parse::<Method>().is_err());
    }

    #[test]
    fn population_chain_recovers_blankets() {
        let s = chain_scatter(2000);
        let cfg = SearchConfig::default();
        assert_eq!(search_markov_blanket(&s, 0, &cfg).unwrap(), vec![1]);
        assert_eq!(search_markov_blanket(&s, 1, &cfg).unwrap(), vec![0, 2]);
        assert_eq!(search_markov_blanket(&s, 3, &cfg).unwrap(), Vec::<usize>::new());
        let fam = search_all_blankets(&s, &cfg).unwrap();
        assert!(fam.is_symmetric());
        let g = assemble_and(&fam);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn trace_strictly_increases_and_cap_holds() {
        let s = chain_scatter(2000);
        let r = search_markov_blanket_traced(&s, 1, &SearchConfig::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*r.trace.last().unwrap(), r.score);
        let capped = SearchConfig { max_mb_size: Some(1), ..Default::default() };
        assert_eq!(search_markov_blanket(&s, 1, &capped).unwrap().len(), 1);
        let zero = SearchConfig { max_mb_size: Some(0), ..Default::default() };
        assert!(search_markov_blanket(&s, 1, &zero).unwrap().is_empty());
    }

    #[test]
    fn single_node() {
        let s = ScatterMatrix::from_matrix(&DMatrix::from_element(1, 1, 5.0), 10).unwrap();
        let fam = search_all_blankets(&s, &SearchConfig::default()).unwrap();
        assert_eq!(fam.blankets(), &[Vec::<usize>::new()]);
    }

    #[test]
    fn requires_three_observations() {
        let s = ScatterMatrix::from_matrix(&DMatrix::identity(2, 2), 2).unwrap();
        assert!(search_markov_blanket(&s, 0, &SearchConfig::default()).is_err());
    }

    #[test]
    fn failures_surface_with_node_index() {
        let mut m = DMatrix::identity(2, 2);
        m[(1, 1)] = 0.0;
        let s = ScatterMatrix::from_matrix(&m, 10).unwrap();
        match search_all_blankets(&s, &SearchConfig::default()) {
            Err(FmplError::Nodes { errors }) => {
                assert_eq!(errors.len(), 1);
                assert!(matches!(errors[0], FmplError::Node { node: 1, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn or_and_definitions() {
        let f = family(vec![vec![1], vec![]]);
        assert_eq!(assemble_or(&f).edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(assemble_and(&f).edge_count(), 0);
        let sym = UndirectedGraph::from_edges(4, [(0, 1), (1, 3), (2, 3)]).unwrap();
        assert_eq!(assemble_or(&sym.blankets()), sym);
        assert_eq!(assemble_and(&sym.blankets()), sym);
    }

    #[test]
    fn hc_keeps_optimal_or_graph() {
        let s = chain_scatter(2000);
        let truth = UndirectedGraph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let g = refine_hc(&s, &truth.blankets(), &SearchConfig::default()).unwrap();
        assert_eq!(g, truth);
    }

    #[test]
    fn hc_prunes_spurious_or_edges() {
        let s = chain_scatter(2000);
        let cfg = SearchConfig::default();
        let noisy = family(vec![vec![1, 2, 3], vec![0, 2], vec![1], vec![]]);
        let r = refine_hc_traced(&s, &noisy, &cfg).unwrap();
        assert!(r.graph.is_subgraph_of(&assemble_or(&noisy)));
        assert_eq!(r.graph.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(r.trace.windows(2).all(|w| w[1] > w[0]));
        let start = global_fmpl_score(&s, &assemble_or(&noisy).blankets(), &cfg.score_params).unwrap();
        let end = global_fmpl_score(&s, &r.graph.blankets(), &cfg.score_params).unwrap();
        assert!(end.total >= start.total);
        assert!((end.total - r.trace.last().unwrap()).abs() < 1e-9 * end.total.abs());
    }

    fn random_family(p: usize, bits: &[bool]) -> MarkovBlanketFamily {
        let mut b = vec![Vec::new(); p];
        let mut k = 0;
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    if bits[k] {
                        b[j].push(i);
                    }
                    k += 1;
                }
            }
        }
        family(b)
    }

    proptest! {
        #[test]
        fn and_is_contained_in_or(bits in proptest::collection::vec(any::<bool>(), 30)) {
            let f = random_family(6, &bits);
            let and = assemble_and(&f);
            let or = assemble_or(&f);
            prop_assert!(and.is_subgraph_of(&or));
            for j in 0..6 {
                for &i in f.blanket(j) {
                    prop_assert!(or.has_edge(i, j));
                    prop_assert_eq!(and.has_edge(i, j), f.contains(i, j) && f.contains(j, i));
                }
            }
        }
    }
}
