//! Structure recovery metrics, the Gaussian MLE under a fixed graph,
//! component-wise prediction, and likelihood-ratio diagnostics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FmplError, Result};
use crate::graph::UndirectedGraph;
use crate::linalg;
use crate::model::{Dataset, ScatterMatrix};
use crate::synthgen::PrecisionModel;

pub const DEFAULT_MLE_TOL: f64 = 1e-8;
pub const DEFAULT_MLE_MAX_ITER: usize = 500;
pub const DEFAULT_EBIC_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub hamming: usize,
    /// Fraction of true edges recovered (1 when there are no true edges).
    pub tp_rate: f64,
    /// False edges over true non-edges (0 when every pair is a true edge).
    pub fp_rate: f64,
    pub edges_true: usize,
    pub edges_learned: usize,
}

pub fn recovery_report(truth: &UndirectedGraph, learned: &UndirectedGraph) -> Result<RecoveryReport> {
    if truth.p() != learned.p() {
        return Err(FmplError::DimensionMismatch { expected: truth.p(), found: learned.p() });
    }
    let p = truth.p();
    let hits = learned.edges().filter(|&(i, j)| truth.has_edge(i, j)).count();
    let false_edges = learned.edge_count() - hits;
    let missed = truth.edge_count() - hits;
    let non_edges = p * p.saturating_sub(1) / 2 - truth.edge_count();
    Ok(RecoveryReport {
        hamming: false_edges + missed,
        tp_rate: if truth.edge_count() == 0 { 1.0 } else { hits as f64 / truth.edge_count() as f64 },
        fp_rate: if non_edges == 0 { 0.0 } else { false_edges as f64 / non_edges as f64 },
        edges_true: truth.edge_count(),
        edges_learned: learned.edge_count(),
    })
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

fn spd_log_det(m: &DMatrix<f64>) -> Option<f64> {
    let p = m.nrows();
    linalg::log_det_spd((0..p * p).map(|k| m[(k / p, k % p)]).collect(), p)
}

/// Largest `|(Ω⁻¹)_ij - C_ij|` over the diagonal and the edges of `graph`;
/// infinite if `Ω` is not positive definite.
pub fn mle_residual(omega: &DMatrix<f64>, c: &DMatrix<f64>, graph: &UndirectedGraph) -> f64 {
    let Some(sigma) = spd_inverse(omega) else { return f64::INFINITY };
    let mut worst: f64 = 0.0;
    for i in 0..c.nrows() {
        worst = worst.max((sigma[(i, i)] - c[(i, i)]).abs());
    }
    for (i, j) in graph.edges() {
        worst = worst.max((sigma[(i, j)] - c[(i, j)]).abs());
    }
    worst
}

/// Maximum likelihood precision matrix with zeros off the graph, by cyclic
/// nodewise regression: each node is regressed on its neighbours under the
/// current working covariance `W`, which has that node's row and column
/// replaced by the fitted cross-covariances. Sweeps repeat until the implied
/// `Ω̂⁻¹` reproduces `C = S/n` on the diagonal and on every edge to `tol`.
pub fn mle_precision_given_graph(
    data: &Dataset,
    graph: &UndirectedGraph,
    tol: f64,
    max_iter: usize,
) -> Result<PrecisionModel> {
    let scatter = ScatterMatrix::from_dataset(data);
    mle_precision_from_scatter(&scatter, graph, tol, max_iter)
}

pub fn mle_precision_from_scatter(
    scatter: &ScatterMatrix,
    graph: &UndirectedGraph,
    tol: f64,
    max_iter: usize,
) -> Result<PrecisionModel> {
    let p = scatter.p();
    if graph.p() != p {
        return Err(FmplError::DimensionMismatch { expected: p, found: graph.p() });
    }
    let c = scatter.to_matrix() / scatter.n() as f64;
    let neighbours: Vec<Vec<usize>> = (0..p).map(|j| graph.markov_blanket(j)).collect();
    let mut w = c.clone();
    let mut residual = f64::INFINITY;

    for _ in 0..max_iter {
        for j in 0..p {
            let nb = &neighbours[j];
            let beta = regress(&w, &c, j, nb)?;
            for i in (0..p).filter(|&i| i != j) {
                let v: f64 = nb.iter().zip(&beta).map(|(&k, b)| w[(i, k)] * b).sum();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        let omega = precision_from_working(&w, &c, &neighbours)?;
        residual = mle_residual(&omega, &c, graph);
        if residual <= tol {
            return PrecisionModel::new(omega, graph.clone());
        }
    }
    Err(FmplError::NotConverged { max_iter, residual })
}

/// Solves `W[nb, nb] β = C[nb, j]`.
fn regress(w: &DMatrix<f64>, c: &DMatrix<f64>, j: usize, nb: &[usize]) -> Result<Vec<f64>> {
    let k = nb.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut l: Vec<f64> = nb.iter().flat_map(|&a| nb.iter().map(move |&b| w[(a, b)])).collect();
    if !linalg::cholesky_in_place(&mut l, k) {
        return Err(FmplError::NotPositiveDefinite { subset: nb.to_vec() });
    }
    let mut beta: Vec<f64> = nb.iter().map(|&a| c[(a, j)]).collect();
    linalg::cholesky_solve(&l, k, &mut beta);
    Ok(beta)
}

fn precision_from_working(w: &DMatrix<f64>, c: &DMatrix<f64>, neighbours: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let p = w.nrows();
    let mut omega = DMatrix::zeros(p, p);
    for j in 0..p {
        let nb = &neighbours[j];
        let beta = regress(w, c, j, nb)?;
        let explained: f64 = nb.iter().zip(&beta).map(|(&k, b)| w[(j, k)] * b).sum();
        let residual_var = c[(j, j)] - explained;
        if !(residual_var > 0.0) {
            let mut fa = nb.clone();
            fa.push(j);
            fa.sort_unstable();
            return Err(FmplError::NotPositiveDefinite { subset: fa });
        }
        let wjj = 1.0 / residual_var;
        omega[(j, j)] = wjj;
        for (&k, b) in nb.iter().zip(&beta) {
            omega[(k, j)] = -b * wjj;
        }
    }
    Ok((&omega + omega.transpose()) * 0.5)
}

/// Gaussian log-likelihood of `Ω` up to its additive constant:
/// `n/2 (log|Ω| - tr(ΩC))`.
pub fn gaussian_log_likelihood(omega: &DMatrix<f64>, scatter: &ScatterMatrix) -> Result<f64> {
    let n = scatter.n() as f64;
    let c = scatter.to_matrix() / n;
    let ld =
        spd_log_det(omega).ok_or_else(|| FmplError::NotPositiveDefinite { subset: (0..omega.nrows()).collect() })?;
    Ok(0.5 * n * (ld - (omega * c).trace()))
}

/// Mean squared error of predicting every component of every test row from
/// the other components, `x̂_i = -Σ_{j≠i} (ω_ij / ω_ii) x_j`, pooled over all
/// (row, component) pairs.
pub fn predict_components(model: &PrecisionModel, test: &Dataset) -> Result<f64> {
    let omega = &model.omega;
    let p = omega.nrows();
    if test.p() != p {
        return Err(FmplError::DimensionMismatch { expected: p, found: test.p() });
    }
    if let Some(i) = (0..p).find(|&i| omega[(i, i)] == 0.0) {
        return Err(FmplError::InvalidParameter(format!("zero diagonal entry at {i}")));
    }
    let x = test.values();
    let mut sse = 0.0;
    for r in 0..test.n() {
        for i in 0..p {
            let pred: f64 = -(0..p).filter(|&j| j != i).map(|j| omega[(i, j)] * x[(r, j)]).sum::<f64>() / omega[(i, i)];
            sse += (pred - x[(r, i)]).powi(2);
        }
    }
    Ok(sse / (test.n() * p) as f64)
}

/// Deviance `-n log(|S_{A∪B∪C}| |S_A| / (|S_{A∪B}| |S_{A∪C}|))` for
/// `x_B ⊥ x_C | x_A`; asymptotically χ² with `|B|·|C|` degrees of freedom
/// under the null. An empty `A` contributes `|S_∅| = 1`.
pub fn deviance_statistic(scatter: &ScatterMatrix, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    for (x, y) in [(a, b), (a, c), (b, c)] {
        if x.iter().any(|v| y.contains(v)) {
            return Err(FmplError::InvalidParameter("conditioning sets must be disjoint".into()));
        }
    }
    let join = |sets: &[&[usize]]| sets.iter().flat_map(|s| s.iter().copied()).collect::<Vec<_>>();
    let abc = scatter.logdet_submatrix(&join(&[a, b, c]))?;
    let la = scatter.logdet_submatrix(a)?;
    let ab = scatter.logdet_submatrix(&join(&[a, b]))?;
    let ac = scatter.logdet_submatrix(&join(&[a, c]))?;
    Ok(-(scatter.n() as f64) * (abc + la - ab - ac))
}

/// `n tr(Ω̂C) - n log|Ω̂| + K log n + 4Kγ log p` with `C = S/n` and `K` the
/// number of nonzero upper off-diagonal entries of `Ω̂`.
pub fn ebic(omega_hat: &PrecisionModel, scatter: &ScatterMatrix, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(FmplError::InvalidParameter(format!("gamma = {gamma} not in [0, 1]")));
    }
    let omega = &omega_hat.omega;
    let p = omega.nrows();
    if p != scatter.p() {
        return Err(FmplError::DimensionMismatch { expected: scatter.p(), found: p });
    }
    let n = scatter.n() as f64;
    let c = scatter.to_matrix() / n;
    let ld = spd_log_det(omega).ok_or_else(|| FmplError::NotPositiveDefinite { subset: (0..p).collect() })?;
    let k =
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| omega[(i, j)] != 0.0).count() as f64;
    Ok(n * (omega * c).trace() - n * ld + k * n.ln() + 4.0 * k * gamma * (p as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_precision, rng_from_seed, sample_mvn, GeneratorSpec};

    fn g(p: usize, e: &[(usize, usize)]) -> UndirectedGraph {
        UndirectedGraph::from_edges(p, e.iter().copied()).unwrap()
    }

    #[test]
    fn recovery_examples() {
        let t = g(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let r = recovery_report(&t, &t).unwrap();
        assert_eq!((r.hamming, r.tp_rate, r.fp_rate), (0, 1.0, 0.0));

        let l = g(5, &[(0, 1), (1, 2), (2, 3), (0, 4)]);
        let r = recovery_report(&t, &l).unwrap();
        assert_eq!(r.hamming, 2);
        assert_eq!(r.tp_rate, 0.75);
        assert!((r.fp_rate - 1.0 / 6.0).abs() < 1e-15);

        let r = recovery_report(&UndirectedGraph::complete(4), &UndirectedGraph::empty(4)).unwrap();
        assert_eq!((r.hamming, r.tp_rate, r.fp_rate), (6, 0.0, 0.0));

        let r = recovery_report(&UndirectedGraph::empty(3), &UndirectedGraph::empty(3)).unwrap();
        assert_eq!(r.tp_rate, 1.0);
        assert!(recovery_report(&UndirectedGraph::empty(3), &UndirectedGraph::empty(4)).is_err());
    }

    fn sample(p: usize, edges: &[(usize, usize)], n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let m = generate_precision(&g(p, edges), &GeneratorSpec::default(), &mut rng).unwrap();
        sample_mvn(&m, n, &mut rng).unwrap()
    }

    #[test]
    fn mle_complete_graph_is_inverse_covariance() {
        let d = sample(4, &[(0, 1), (1, 2)], 200, 1);
        let s = ScatterMatrix::from_dataset(&d);
        let m = mle_precision_given_graph(&d, &UndirectedGraph::complete(4), 1e-10, 100).unwrap();
        let expected = spd_inverse(&(s.to_matrix() / 200.0)).unwrap();
        assert!((m.omega - expected).amax() < 1e-8);
    }

    #[test]
    fn mle_empty_graph_is_diagonal() {
        let d = sample(3, &[(0, 1)], 100, 2);
        let s = ScatterMatrix::from_dataset(&d);
        let m = mle_precision_given_graph(&d, &UndirectedGraph::empty(3), 1e-10, 100).unwrap();
        for i in 0..3 {
            assert!((m.omega[(i, i)] - 100.0 / s.get(i, i)).abs() < 1e-12);
        }
        assert_eq!(m.omega[(0, 1)], 0.0);
    }

    #[test]
    fn mle_fixed_point_on_a_cycle() {
        // a chordless 4-cycle has no closed form
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let d = sample(4, &edges, 300, 3);
        let graph = g(4, &edges);
        let m = mle_precision_given_graph(&d, &graph, 1e-8, 500).unwrap();
        let c = ScatterMatrix::from_dataset(&d).to_matrix() / 300.0;
        assert!(mle_residual(&m.omega, &c, &graph) <= 1e-8);
        assert_eq!(m.omega[(0, 2)], 0.0);
        assert_eq!(m.omega[(1, 3)], 0.0);

        let s = ScatterMatrix::from_dataset(&d);
        let diag = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 / c[(i, i)] } else { 0.0 });
        assert!(gaussian_log_likelihood(&m.omega, &s).unwrap() >= gaussian_log_likelihood(&diag, &s).unwrap());
    }

    #[test]
    fn mle_reports_non_convergence() {
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let d = sample(4, &edges, 300, 3);
        let r = mle_precision_given_graph(&d, &g(4, &edges), 1e-14, 1);
        assert!(matches!(r, Err(FmplError::NotConverged { max_iter: 1, .. })));
    }

    #[test]
    fn prediction_examples() {
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        let m = PrecisionModel::new(omega, g(2, &[(0, 1)])).unwrap();
        let test = Dataset::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((predict_components(&m, &test).unwrap() - 0.25).abs() < 1e-15);

        let diag = PrecisionModel::new(DMatrix::from_diagonal_element(2, 2, 3.0), g(2, &[])).unwrap();
        let test = Dataset::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let mean_sq = (1.0 + 4.0 + 9.0 + 0.25) / 4.0;
        assert!((predict_components(&diag, &test).unwrap() - mean_sq).abs() < 1e-15);
    }

    #[test]
    fn partial_correlation_form_agrees() {
        let mut rng = rng_from_seed(9);
        let m = generate_precision(&UndirectedGraph::complete(5), &GeneratorSpec::default(), &mut rng).unwrap();
        let test = sample_mvn(&m, 7, &mut rng).unwrap();
        let o = &m.omega;
        let x = test.values();
        for r in 0..7 {
            for i in 0..5 {
                let direct: f64 = -(0..5).filter(|&j| j != i).map(|j| o[(i, j)] / o[(i, i)] * x[(r, j)]).sum::<f64>();
                let partial: f64 = (0..5)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let rho = -o[(i, j)] / (o[(i, i)] * o[(j, j)]).sqrt();
                        rho * (o[(j, j)] / o[(i, i)]).sqrt() * x[(r, j)]
                    })
                    .sum();
                assert!((direct - partial).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deviance_identity_and_errors() {
        let s = ScatterMatrix::from_matrix(&DMatrix::identity(4, 4), 50).unwrap();
        assert_eq!(deviance_statistic(&s, &[0], &[1], &[2, 3]).unwrap(), 0.0);
        assert_eq!(deviance_statistic(&s, &[], &[1], &[2]).unwrap(), 0.0);
        assert!(deviance_statistic(&s, &[0], &[0], &[2]).is_err());
    }

    #[test]
    fn ebic_examples() {
        let id = PrecisionModel::new(DMatrix::identity(3, 3), UndirectedGraph::empty(3)).unwrap();
        let s = ScatterMatrix::from_matrix(&(DMatrix::identity(3, 3) * 40.0), 40).unwrap();
        assert!((ebic(&id, &s, 0.5).unwrap() - 120.0).abs() < 1e-12);
        assert!(ebic(&id, &s, 1.5).is_err());

        // Ω = [[2, -1], [-1, 2]], C = [[1, 0.5], [0.5, 2]], n = 10:
        // tr(ΩC) = 2 - 0.5 - 0.5 + 4 = 5, log|Ω| = log 3, K = 1
        let omega =
            PrecisionModel::new(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]), g(2, &[(0, 1)])).unwrap();
        let s = ScatterMatrix::from_matrix(&DMatrix::from_row_slice(2, 2, &[10.0, 5.0, 5.0, 20.0]), 10).unwrap();
        let expected = 10.0 * 5.0 - 10.0 * 3f64.ln() + 10f64.ln() + 4.0 * 0.5 * 2f64.ln();
        assert!((ebic(&omega, &s, 0.5).unwrap() - expected).abs() < 1e-12);
        let bic = 10.0 * 5.0 - 10.0 * 3f64.ln() + 10f64.ln();
        assert!((ebic(&omega, &s, 0.0).unwrap() - bic).abs() < 1e-12);
    }
}
