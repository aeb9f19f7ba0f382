//! Synthetic graphs, graph-constrained precision matrices and multivariate
//! normal samples.
//!
//! All randomness comes from [`SimRng`], ChaCha with 8 rounds
//! (`rand_chacha::ChaCha8Rng`) seeded through `seed_from_u64`. Its output
//! stream is fixed by the ChaCha specification and does not change across
//! platforms or crate versions, so a seed identifies a simulation exactly.
//! Standard normal draws use the ziggurat sampler of `rand_distr`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FmplError, Result};
use crate::graph::UndirectedGraph;
use crate::linalg;
use crate::model::Dataset;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockKind {
    Cycle,
    Path,
    Star,
    Grid,
    /// Erdős–Rényi block with the given edge probability.
    Random(f64),
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::Cycle => f.write_str("cycle"),
            BlockKind::Path => f.write_str("path"),
            BlockKind::Star => f.write_str("star"),
            BlockKind::Grid => f.write_str("grid"),
            BlockKind::Random(p) => write!(f, "random:{p}"),
        }
    }
}

impl FromStr for BlockKind {
    type Err = FmplError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || FmplError::InvalidParameter(format!("unknown block kind {s:?}"));
        match s.as_str() {
            "cycle" => Ok(BlockKind::Cycle),
            "path" => Ok(BlockKind::Path),
            "star" => Ok(BlockKind::Star),
            "grid" => Ok(BlockKind::Grid),
            other => {
                let prob = other.strip_prefix("random:").ok_or_else(bad)?;
                let prob: f64 = prob.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&prob) {
                    return Err(FmplError::InvalidParameter(format!("edge probability {prob} not in [0, 1]")));
                }
                Ok(BlockKind::Random(prob))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub block_kinds: Vec<BlockKind>,
    pub block_size: usize,
    pub replication: usize,
    pub seed: u64,
    pub offdiag_range: (f64, f64),
    pub negative_fraction: f64,
    pub pd_margin: f64,
}

impl Default for GeneratorSpec {
    /// The 64-node composite: cycle, path, star and grid blocks of 8 nodes,
    /// each used twice.
    fn default() -> Self {
        Self {
            block_kinds: vec![BlockKind::Cycle, BlockKind::Path, BlockKind::Star, BlockKind::Grid],
            block_size: 8,
            replication: 2,
            seed: 0,
            offdiag_range: (0.1, 0.9),
            negative_fraction: 0.5,
            pd_margin: 0.1,
        }
    }
}

impl GeneratorSpec {
    pub fn node_count(&self) -> usize {
        self.block_size * self.replication * self.block_kinds.len()
    }

    /// Sets `replication` so that the composite has exactly `p` nodes.
    pub fn with_node_count(mut self, p: usize) -> Result<Self> {
        let per_copy = self.block_size * self.block_kinds.len();
        if per_copy == 0 || !p.is_multiple_of(per_copy) || p == 0 {
            return Err(FmplError::InvalidParameter(format!(
                "p = {p} is not a positive multiple of block_size x kinds = {per_copy}"
            )));
        }
        self.replication = p / per_copy;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.offdiag_range;
        let err = |m: &str| Err(FmplError::InvalidParameter(m.to_string()));
        if self.block_kinds.is_empty() {
            return err("at least one block kind is required");
        }
        if self.block_size < 2 {
            return err("block_size must be >= 2");
        }
        if self.replication < 1 {
            return err("replication must be >= 1");
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return err("offdiag_range must satisfy 0 < lo < hi");
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return err("negative_fraction must lie in [0, 1]");
        }
        if !(self.pd_margin > 0.0 && self.pd_margin.is_finite()) {
            return err("pd_margin must be > 0");
        }
        Ok(())
    }
}

fn add_block<R: Rng>(g: &mut UndirectedGraph, kind: BlockKind, offset: usize, m: usize, rng: &mut R) {
    let mut edge = |a: usize, b: usize| g.add_edge(offset + a, offset + b).expect("block edge in range");
    match kind {
        BlockKind::Path => (1..m).for_each(|k| edge(k - 1, k)),
        BlockKind::Cycle => {
            (1..m).for_each(|k| edge(k - 1, k));
            if m > 2 {
                edge(m - 1, 0);
            }
        }
        BlockKind::Star => (1..m).for_each(|k| edge(0, k)),
        BlockKind::Grid => {
            let w = (m as f64).sqrt().ceil() as usize;
            for k in 0..m {
                if (k + 1) % w != 0 && k + 1 < m {
                    edge(k, k + 1);
                }
                if k + w < m {
                    edge(k, k + w);
                }
            }
        }
        BlockKind::Random(prob) => {
            for a in 0..m {
                for b in (a + 1)..m {
                    if rng.random::<f64>() < prob {
                        edge(a, b);
                    }
                }
            }
        }
    }
}

/// Disjoint union of `replication` copies of the block sequence, drawing any
/// random blocks from `rng`.
pub fn generate_graph_with<R: Rng>(spec: &GeneratorSpec, rng: &mut R) -> Result<UndirectedGraph> {
    spec.validate()?;
    let mut g = UndirectedGraph::empty(spec.node_count());
    let mut offset = 0;
    for _ in 0..spec.replication {
        for &kind in &spec.block_kinds {
            add_block(&mut g, kind, offset, spec.block_size, rng);
            offset += spec.block_size;
        }
    }
    Ok(g)
}

/// [`generate_graph_with`] using a generator seeded from `spec.seed`.
pub fn generate_graph(spec: &GeneratorSpec) -> Result<UndirectedGraph> {
    generate_graph_with(spec, &mut rng_from_seed(spec.seed))
}

/// Symmetric positive-definite precision matrix whose off-diagonal zero
/// pattern is exactly the complement of a graph's edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionModel {
    pub omega: DMatrix<f64>,
    pub graph: UndirectedGraph,
}

impl PrecisionModel {
    /// Checks the zero pattern against the graph and positive definiteness.
    pub fn new(omega: DMatrix<f64>, graph: UndirectedGraph) -> Result<Self> {
        let model = Self { omega, graph };
        if !model.pattern_matches() {
            return Err(FmplError::InvalidParameter("precision zero pattern does not match graph".into()));
        }
        if !model.is_positive_definite() {
            return Err(FmplError::NotPositiveDefinite { subset: (0..model.p()).collect() });
        }
        Ok(model)
    }

    pub fn p(&self) -> usize {
        self.omega.nrows()
    }

    pub fn pattern_matches(&self) -> bool {
        let p = self.p();
        if self.graph.p() != p || self.omega.ncols() != p {
            return false;
        }
        for i in 0..p {
            for j in 0..p {
                if i != j && ((self.omega[(i, j)] != 0.0) != self.graph.has_edge(i, j)) {
                    return false;
                }
                if self.omega[(i, j)] != self.omega[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_positive_definite(&self) -> bool {
        let p = self.p();
        let mut a: Vec<f64> = (0..p * p).map(|k| self.omega[(k / p, k % p)]).collect();
        linalg::cholesky_in_place(&mut a, p)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.omega.clone().cholesky().expect("precision is positive definite").inverse()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.omega.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Random precision matrix for `graph`: diagonal entries uniform on the
/// off-diagonal range, edge entries with magnitude uniform on that range and
/// a negative sign with probability `negative_fraction`. If the smallest
/// eigenvalue is below `pd_margin`, the constant `pd_margin - λ_min` is added
/// to every diagonal entry.
pub fn generate_precision<R: Rng>(
    graph: &UndirectedGraph,
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<PrecisionModel> {
    spec.validate()?;
    let p = graph.p();
    let (lo, hi) = spec.offdiag_range;
    let mut omega = DMatrix::zeros(p, p);
    for i in 0..p {
        omega[(i, i)] = rng.random_range(lo..=hi);
    }
    for (i, j) in graph.edges() {
        let magnitude: f64 = rng.random_range(lo..=hi);
        let v = if rng.random::<f64>() < spec.negative_fraction { -magnitude } else { magnitude };
        omega[(i, j)] = v;
        omega[(j, i)] = v;
    }
    if p > 0 {
        let lambda_min = SymmetricEigen::new(omega.clone()).eigenvalues.min();
        if lambda_min < spec.pd_margin {
            let shift = spec.pd_margin - lambda_min;
            for i in 0..p {
                omega[(i, i)] += shift;
            }
        }
    }
    PrecisionModel::new(omega, graph.clone())
}

/// `n` draws from `N(0, Ω⁻¹)`: with `Ω = L Lᵀ`, each row solves `Lᵀ x = z`
/// for a standard normal `z`.
pub fn sample_mvn<R: Rng>(model: &PrecisionModel, n: usize, rng: &mut R) -> Result<Dataset> {
    let p = model.p();
    let mut l: Vec<f64> = (0..p * p).map(|k| model.omega[(k / p, k % p)]).collect();
    if !linalg::cholesky_in_place(&mut l, p) {
        return Err(FmplError::NotPositiveDefinite { subset: (0..p).collect() });
    }
    let mut values = DMatrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for r in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        linalg::solve_lower_transpose(&l, p, &mut z);
        for (c, &v) in z.iter().enumerate() {
            values[(r, c)] = v;
        }
    }
    Dataset::new(values)
}

/// One complete synthetic instance.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub graph: UndirectedGraph,
    pub model: PrecisionModel,
    pub data: Dataset,
}

/// Graph, precision and `n` samples, all drawn from one generator seeded
/// with `spec.seed`.
pub fn simulate(spec: &GeneratorSpec, n: usize) -> Result<Simulation> {
    let mut rng = rng_from_seed(spec.seed);
    let graph = generate_graph_with(spec, &mut rng)?;
    let model = generate_precision(&graph, spec, &mut rng)?;
    let data = sample_mvn(&model, n, &mut rng)?;
    Ok(Simulation { graph, model, data })
}

/// Samples from a fixed precision model with a generator seeded by `seed`.
pub fn sample_with_seed(model: &PrecisionModel, n: usize, seed: u64) -> Result<Dataset> {
    sample_mvn(model, n, &mut rng_from_seed(seed))
}
