mod common;

use fmpl::graph::UndirectedGraph;
use fmpl::model::ScatterMatrix;
use fmpl::scoring::{global_fmpl_score, ScoreParams};
use fmpl::search::{assemble_and, assemble_or, refine_hc, search_all_blankets, search_markov_blanket, SearchConfig};
use fmpl::synthgen::{generate_graph_with, generate_precision, sample_mvn, simulate, BlockKind, GeneratorSpec};

use common::*;

#[test]
fn independent_node_gets_empty_blanket() {
    let config = SearchConfig::default();
    let hits = (0..100u64)
        .filter(|&seed| {
            let mut r = rng(seed);
            let data = dataset_from(5000, 4, &mut r, |r, b| {
                b[0] = normal(r);
                b[1] = 0.7 * b[0] + normal(r);
                b[2] = 0.7 * b[1] + normal(r);
                b[3] = normal(r);
            });
            let scatter = ScatterMatrix::from_dataset(&data.standardize().unwrap());
            search_markov_blanket(&scatter, 3, &config).unwrap().is_empty()
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn strong_pair_is_found() {
    let config = SearchConfig::default();
    let rho: f64 = 0.9;
    let hits = (0..100u64)
        .filter(|&seed| {
            let mut r = rng(100 + seed);
            let data = dataset_from(1000, 2, &mut r, |r, b| {
                b[0] = normal(r);
                b[1] = rho * b[0] + (1.0 - rho * rho).sqrt() * normal(r);
            });
            let scatter = ScatterMatrix::from_dataset(&data.standardize().unwrap());
            search_markov_blanket(&scatter, 0, &config).unwrap() == vec![1]
        })
        .count();
    assert!(hits >= 99, "{hits}/100");
}

fn graph_score(scatter: &ScatterMatrix, g: &UndirectedGraph, params: &ScoreParams) -> f64 {
    global_fmpl_score(scatter, &g.blankets(), params).unwrap().total
}

#[test]
fn hc_reaches_best_subgraph_of_or() {
    let params = ScoreParams::default();
    let config = SearchConfig::default();
    let mut hits = 0;
    for seed in 0..100u64 {
        let spec = GeneratorSpec {
            block_kinds: vec![BlockKind::Random(0.4)],
            block_size: 6,
            replication: 1,
            ..GeneratorSpec::default()
        };
        let mut r = rng(200 + seed);
        let truth = generate_graph_with(&spec, &mut r).unwrap();
        let model = generate_precision(&truth, &spec, &mut r).unwrap();
        let data = sample_mvn(&model, 60, &mut r).unwrap().standardize().unwrap();
        let scatter = ScatterMatrix::from_dataset(&data);
        let family = search_all_blankets(&scatter, &config).unwrap();
        let or = assemble_or(&family);
        let hc = refine_hc(&scatter, &family, &config).unwrap();
        assert!(hc.is_subgraph_of(&or));
        let hc_score = graph_score(&scatter, &hc, &params);
        assert!(hc_score >= graph_score(&scatter, &or, &params));

        let edges: Vec<(usize, usize)> = or.edges().collect();
        let idx: Vec<usize> = (0..edges.len()).collect();
        let best = subsets(&idx)
            .into_iter()
            .map(|s| {
                graph_score(&scatter, &UndirectedGraph::from_edges(6, s.iter().map(|&k| edges[k])).unwrap(), &params)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(hc_score <= best + 1e-9 * best.abs());
        if (best - hc_score).abs() <= 1e-9 * best.abs() {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let sim = simulate(&GeneratorSpec { block_size: 4, seed: 77, ..GeneratorSpec::default() }, 300).unwrap();
    let scatter = ScatterMatrix::from_dataset(&sim.data.standardize().unwrap());
    let reference = search_all_blankets(&scatter, &SearchConfig { threads: 1, ..SearchConfig::default() }).unwrap();
    let hc_ref = refine_hc(&scatter, &reference, &SearchConfig::default()).unwrap();
    for run in 0..10 {
        let threads = [1, 2, 4, 8, 0][run % 5];
        let config = SearchConfig { threads, ..SearchConfig::default() };
        let family = search_all_blankets(&scatter, &config).unwrap();
        assert_eq!(family, reference);
        assert_eq!(refine_hc(&scatter, &family, &config).unwrap(), hc_ref);
    }
}

#[test]
fn prior_promotes_sparsity() {
    let mut sparser = 0;
    for seed in 0..20u64 {
        let sim = simulate(&GeneratorSpec { seed: 300 + seed, ..GeneratorSpec::default() }, 250).unwrap();
        let scatter = ScatterMatrix::from_dataset(&sim.data.standardize().unwrap());
        let with = SearchConfig { threads: 1, ..SearchConfig::default() };
        let without = SearchConfig { score_params: ScoreParams::without_prior(), ..with.clone() };
        let on = assemble_and(&search_all_blankets(&scatter, &with).unwrap());
        let off = assemble_and(&search_all_blankets(&scatter, &without).unwrap());
        if on.edge_count() <= off.edge_count() {
            sparser += 1;
        }
    }
    assert!(sparser >= 18, "{sparser}/20");
}

#[test]
fn blanket_cap_is_respected() {
    let sim = simulate(&GeneratorSpec { block_size: 4, seed: 5, ..GeneratorSpec::default() }, 500).unwrap();
    let scatter = ScatterMatrix::from_dataset(&sim.data.standardize().unwrap());
    for cap in [0, 1, 2] {
        let family =
            search_all_blankets(&scatter, &SearchConfig { max_mb_size: Some(cap), ..SearchConfig::default() }).unwrap();
        assert!(family.blankets().iter().all(|b| b.len() <= cap));
    }
}
