//! Simulate → learn → evaluate grids over `(p, n, method)` cells.
//!
//! For each `p` and seed one composite graph and precision matrix are drawn
//! and `max(n)` observations sampled; each `n` uses the leading `n` rows, so
//! sample sizes within a seed share the same underlying model. Data are
//! standardized before learning.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FmplError, Result};
use crate::eval::recovery_report;
use crate::model::ScatterMatrix;
use crate::scoring::ScoreParams;
use crate::search::{assemble, search_all_blankets, Method, SearchConfig};
use crate::synthgen::{simulate, BlockKind, GeneratorSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkConfig {
    pub p_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub seeds: usize,
    pub seed_base: u64,
    pub methods: Vec<Method>,
    #[serde(serialize_with = "kinds_as_strings")]
    pub block_kinds: Vec<BlockKind>,
    pub block_size: usize,
    pub use_prior: bool,
    pub pd_margin: f64,
    /// Workers across seeds; each seed's search is single-threaded.
    pub threads: usize,
}

fn kinds_as_strings<S: serde::Serializer>(kinds: &[BlockKind], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(kinds.iter().map(|k| k.to_string()))
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let g = GeneratorSpec::default();
        Self {
            p_values: vec![64],
            n_values: vec![250, 1000, 4000],
            seeds: 25,
            seed_base: 0,
            methods: Method::ALL.to_vec(),
            block_kinds: g.block_kinds,
            block_size: g.block_size,
            use_prior: true,
            pd_margin: g.pd_margin,
            threads: 0,
        }
    }
}

fn list<T, F>(value: &str, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    let items: Vec<T> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(FmplError::Input(format!("empty list {value:?}")));
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| FmplError::Input(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_switch(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(FmplError::Input(format!("{key}: expected on/off, got {v:?}"))),
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| FmplError::Input(format!("line {}: expected key=value", lineno + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

impl BenchmarkConfig {
    /// Reads a config of `key=value` lines with comma-separated lists. Keys:
    /// `p`, `n`, `seeds`, `seed_base`, `methods`, `blocks`, `block_size`,
    /// `prior`, `pd_margin`, `threads`. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text)? {
            match k.as_str() {
                "p" => cfg.p_values = list(&v, |s| number("p", s))?,
                "n" => cfg.n_values = list(&v, |s| number("n", s))?,
                "seeds" => cfg.seeds = number(&k, &v)?,
                "seed_base" => cfg.seed_base = number(&k, &v)?,
                "methods" => cfg.methods = list(&v, str::parse)?,
                "blocks" => cfg.block_kinds = list(&v, str::parse)?,
                "block_size" => cfg.block_size = number(&k, &v)?,
                "prior" => cfg.use_prior = parse_switch(&k, &v)?,
                "pd_margin" => cfg.pd_margin = number(&k, &v)?,
                "threads" => cfg.threads = number(&k, &v)?,
                other => return Err(FmplError::Input(format!("unknown benchmark key {other:?}"))),
            }
        }
        if cfg.seeds == 0 {
            return Err(FmplError::Input("seeds must be >= 1".into()));
        }
        if let Some(&n) = cfg.n_values.iter().find(|&&n| n < 3) {
            return Err(FmplError::Input(format!("n = {n} is below the minimum of 3")));
        }
        Ok(cfg)
    }

    fn generator(&self, p: usize, seed: u64) -> Result<GeneratorSpec> {
        GeneratorSpec {
            block_kinds: self.block_kinds.clone(),
            block_size: self.block_size,
            replication: 1,
            seed,
            pd_margin: self.pd_margin,
            ..GeneratorSpec::default()
        }
        .with_node_count(p)
    }
}

/// One cell averaged over its successful seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub hamming: f64,
    pub tp: f64,
    pub fp: f64,
    pub seconds: f64,
    pub failed: usize,
}

#[derive(Debug, Clone)]
struct SeedOutcome {
    hamming: usize,
    tp: f64,
    fp: f64,
    seconds: f64,
}

fn run_seed(cfg: &BenchmarkConfig, p: usize, seed: u64) -> Result<Vec<Vec<SeedOutcome>>> {
    let n_max = *cfg.n_values.iter().max().expect("non-empty n list");
    let sim = simulate(&cfg.generator(p, seed)?, n_max)?;
    let params = if cfg.use_prior { ScoreParams::default() } else { ScoreParams::without_prior() };
    let mut per_n = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        let data = sim.data.rows(0..n)?.standardize()?;
        let scatter = ScatterMatrix::from_dataset(&data);
        let base = SearchConfig { score_params: params, threads: 1, ..SearchConfig::default() };
        let t0 = Instant::now();
        let family = search_all_blankets(&scatter, &base)?;
        let search_secs = t0.elapsed().as_secs_f64();
        let mut per_method = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let t1 = Instant::now();
            let graph = assemble(&scatter, &family, &SearchConfig { method, ..base.clone() })?;
            let seconds = search_secs + t1.elapsed().as_secs_f64();
            let r = recovery_report(&sim.graph, &graph)?;
            per_method.push(SeedOutcome { hamming: r.hamming, tp: r.tp_rate, fp: r.fp_rate, seconds });
        }
        per_n.push(per_method);
    }
    Ok(per_n)
}

/// Runs the full grid; rows are ordered by `p`, then `n`, then method as
/// listed in the config.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| FmplError::InvalidParameter(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &p in &cfg.p_values {
        cfg.generator(p, 0)?;
        let outcomes: Vec<Result<Vec<Vec<SeedOutcome>>>> = pool
            .install(|| (0..cfg.seeds as u64).into_par_iter().map(|s| run_seed(cfg, p, cfg.seed_base + s)).collect());
        for (ni, &n) in cfg.n_values.iter().enumerate() {
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let ok: Vec<&SeedOutcome> =
                    outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|o| &o[ni][mi]).collect();
                let failed = outcomes.len() - ok.len();
                let mean = |f: &dyn Fn(&SeedOutcome) -> f64| {
                    if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
                    }
                };
                rows.push(BenchRow {
                    p,
                    n,
                    method,
                    hamming: mean(&|o| o.hamming as f64),
                    tp: mean(&|o| o.tp),
                    fp: mean(&|o| o.fp),
                    seconds: mean(&|o| o.seconds),
                    failed,
                });
            }
        }
    }
    Ok(rows)
}

pub const BENCH_CSV_HEADER: &str = "p,n,method,hamming,tp,fp,seconds,failed";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{}\n",
            r.p, r.n, r.method, r.hamming, r.tp, r.fp, r.seconds, r.failed
        ));
    }
    out
}
