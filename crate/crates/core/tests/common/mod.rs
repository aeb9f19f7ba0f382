#![allow(dead_code)]

use fmpl::graph::UndirectedGraph;
use fmpl::model::{Dataset, ScatterMatrix};
use fmpl::scoring::{local_objective, ScoreParams};
use fmpl::synthgen::{rng_from_seed, PrecisionModel, SimRng};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> SimRng {
    rng_from_seed(seed)
}

pub fn normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Precision model whose graph is read off the nonzero pattern.
pub fn model_from_precision(omega: DMatrix<f64>) -> PrecisionModel {
    let p = omega.nrows();
    let edges = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j)));
    let edges: Vec<_> = edges.filter(|&(i, j)| omega[(i, j)] != 0.0).collect();
    let graph = UndirectedGraph::from_edges(p, edges).unwrap();
    PrecisionModel::new(omega, graph).unwrap()
}

/// Rows generated one at a time by `row`, which fills a length-`p` buffer.
pub fn dataset_from<F: FnMut(&mut SimRng, &mut [f64])>(n: usize, p: usize, rng: &mut SimRng, mut row: F) -> Dataset {
    let mut m = DMatrix::zeros(n, p);
    let mut buf = vec![0.0; p];
    for r in 0..n {
        row(rng, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    Dataset::new(m).unwrap()
}

/// Scatter matrix of `m` standard normal rows mixed by a random `p × p`
/// matrix: dense, SPD and well away from singular.
pub fn random_scatter(p: usize, m: usize, rng: &mut SimRng) -> ScatterMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| normal(rng));
    let data = dataset_from(m, p, rng, |r, buf| {
        let z: Vec<f64> = (0..p).map(|_| normal(r)).collect();
        for (j, b) in buf.iter_mut().enumerate() {
            *b = (0..p).map(|k| z[k] * a[(k, j)]).sum::<f64>() + 0.3 * normal(r);
        }
    });
    ScatterMatrix::from_dataset(&data)
}

/// All subsets of `items`, each in increasing order.
pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0u64..1 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i).collect())
        .collect()
}

/// Exhaustive maximiser of the local objective over every candidate blanket.
/// Ties keep the first subset in mask order.
pub fn exhaustive_blanket(scatter: &ScatterMatrix, j: usize, params: &ScoreParams) -> (Vec<usize>, f64) {
    let others: Vec<usize> = (0..scatter.p()).filter(|&i| i != j).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mb in subsets(&others) {
        if let Ok(s) = local_objective(scatter, j, &mb, params) {
            if s > best.1 {
                best = (mb, s);
            }
        }
    }
    best
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
