use std::path::Path;

use clap::{Args, Subcommand, ValueEnum};
use fmpl::bench::{parse_key_values, rows_to_csv, run_benchmark, BenchmarkConfig};
use fmpl::error::{FmplError, Result};
use fmpl::eval::{
    mle_precision_given_graph, predict_components, recovery_report, RecoveryReport, DEFAULT_MLE_MAX_ITER,
    DEFAULT_MLE_TOL,
};
use fmpl::graph::UndirectedGraph;
use fmpl::model::{load_dataset, ScatterMatrix};
use fmpl::scoring::{global_fmpl_score, ScoreParams};
use fmpl::search::{assemble, search_all_blankets, Method, SearchConfig};
use fmpl::synthgen::{simulate, BlockKind, GeneratorSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::manifest::{read_text, to_json, write_text, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Learn an undirected graph from a CSV of observations.
    Learn(LearnArgs),
    /// Draw a composite graph, a precision matrix and Gaussian samples.
    Simulate(SimulateArgs),
    /// Compare a learned graph against the true one.
    Evaluate(EvaluateArgs),
    /// Out-of-sample MSE of predicting each variable from the others.
    Predict(PredictArgs),
    /// Run a simulate/learn/evaluate grid and write a CSV table.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    pub input: String,
    #[arg(long, default_value = "and")]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub prior: Switch,
    #[arg(long, default_value_t = 0.5)]
    pub prior_a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub prior_b: f64,
    /// Largest blanket considered; defaults to min(p-1, n-2).
    #[arg(long)]
    pub max_mb: Option<usize>,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub standardize: Switch,
    /// Worker threads for the blanket searches; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output prefix: writes PREFIX.graph.json, PREFIX.scores.json and PREFIX.manifest.json.
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// key=value file with any of p, n, seed, blocks, block_size, pd_margin.
    /// Flags take precedence.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma list of cycle, path, star, grid, random:PROB.
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<String>>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub pd_margin: Option<f64>,
    /// Output prefix: writes PREFIX.data.csv, PREFIX.truth.json, PREFIX.precision.csv and PREFIX.manifest.json.
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    pub truth: String,
    pub learned: String,
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    pub train: String,
    pub test: String,
    pub graph: String,
    #[arg(long, default_value_t = DEFAULT_MLE_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MLE_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    pub config: String,
    /// Overrides the config's `threads`.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: String,
}

/// What a finished command reports for its manifest.
pub struct Outcome {
    pub params: Command,
    pub resolved: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub manifest_path: String,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Learn(_) => "learn",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
            Command::Predict(_) => "predict",
            Command::Benchmark(_) => "benchmark",
        }
    }

    pub fn set_out(&mut self, out: String) {
        match self {
            Command::Learn(a) => a.out = out,
            Command::Simulate(a) => a.out = out,
            Command::Evaluate(a) => a.out = out,
            Command::Predict(a) => a.out = out,
            Command::Benchmark(a) => a.out = out,
        }
    }

    pub fn run(&self) -> Result<Outcome> {
        match self {
            Command::Learn(a) => learn(a),
            Command::Simulate(a) => simulate_cmd(a),
            Command::Evaluate(a) => evaluate(a),
            Command::Predict(a) => predict(a),
            Command::Benchmark(a) => benchmark(a),
        }
    }
}

/// `report.json` -> `report.manifest.json`.
fn manifest_beside(out: &str) -> String {
    Path::new(out).with_extension("manifest.json").to_string_lossy().into_owned()
}

fn load_graph(path: &str) -> Result<UndirectedGraph> {
    UndirectedGraph::from_json(&read_text(path)?).map_err(|e| FmplError::Input(format!("{path}: {e}")))
}

#[derive(Serialize)]
struct LearnScores<'a> {
    version: &'a str,
    method: Method,
    n: usize,
    p: usize,
    /// Blankets found by the per-node searches, before assembly.
    blankets: &'a [Vec<usize>],
    local_log_scores: &'a [f64],
    local_log_priors: &'a [f64],
    total: f64,
    /// Score of the assembled graph's own blankets; null if it cannot be
    /// evaluated at this sample size.
    graph_total: Option<f64>,
    edge_count: usize,
}

fn learn(a: &LearnArgs) -> Result<Outcome> {
    let data = load_dataset(&read_text(&a.input)?, a.standardize.on())?;
    if data.n() < 3 {
        return Err(FmplError::Input(format!("need n >= 3 observations, have {}", data.n())));
    }
    let score_params = ScoreParams { use_prior: a.prior.on(), prior_a: a.prior_a, prior_b: a.prior_b };
    score_params.validate()?;
    let config = SearchConfig { max_mb_size: a.max_mb, method: a.method, score_params, threads: a.threads };
    let scatter = ScatterMatrix::from_dataset(&data);
    let family = search_all_blankets(&scatter, &config)?;
    let graph = assemble(&scatter, &family, &config)?;
    let card = global_fmpl_score(&scatter, &family, &score_params)?;
    let graph_total = global_fmpl_score(&scatter, &graph.blankets(), &score_params).ok().map(|c| c.total);

    let graph_path = format!("{}.graph.json", a.out);
    let scores_path = format!("{}.scores.json", a.out);
    write_text(&graph_path, &format!("{}\n", graph.to_json()))?;
    let scores = LearnScores {
        version: VERSION,
        method: a.method,
        n: data.n(),
        p: data.p(),
        blankets: family.blankets(),
        local_log_scores: &card.local_log_scores,
        local_log_priors: &card.local_log_priors,
        total: card.total,
        graph_total,
        edge_count: graph.edge_count(),
    };
    write_text(&scores_path, &to_json(&scores))?;
    Ok(Outcome {
        params: Command::Learn(a.clone()),
        resolved: json!({
            "search": config,
            "blanket_cap": config.blanket_cap(&scatter),
            "standardize": a.standardize.on(),
        }),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs: vec![graph_path, scores_path],
        manifest_path: format!("{}.manifest.json", a.out),
    })
}

fn simulate_cmd(a: &SimulateArgs) -> Result<Outcome> {
    let mut resolved = SimulateArgs { config: None, ..a.clone() };
    if let Some(path) = &a.config {
        for (k, v) in parse_key_values(&read_text(path)?)? {
            let bad = || FmplError::Input(format!("{path}: cannot parse {k} = {v:?}"));
            match k.as_str() {
                "p" => resolved.p = resolved.p.or(Some(v.parse().map_err(|_| bad())?)),
                "n" => resolved.n = resolved.n.or(Some(v.parse().map_err(|_| bad())?)),
                "seed" => resolved.seed = resolved.seed.or(Some(v.parse().map_err(|_| bad())?)),
                "blocks" => {
                    let list = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    resolved.blocks = resolved.blocks.or(Some(list));
                }
                "block_size" => resolved.block_size = resolved.block_size.or(Some(v.parse().map_err(|_| bad())?)),
                "pd_margin" => resolved.pd_margin = resolved.pd_margin.or(Some(v.parse().map_err(|_| bad())?)),
                other => return Err(FmplError::Input(format!("{path}: unknown simulate key {other:?}"))),
            }
        }
    }
    let defaults = GeneratorSpec::default();
    let p = *resolved.p.get_or_insert(defaults.node_count());
    let n = *resolved.n.get_or_insert(4000);
    let seed = *resolved.seed.get_or_insert(0);
    let blocks =
        resolved.blocks.get_or_insert_with(|| defaults.block_kinds.iter().map(|b| b.to_string()).collect()).clone();
    let block_size = *resolved.block_size.get_or_insert(defaults.block_size);
    let pd_margin = *resolved.pd_margin.get_or_insert(defaults.pd_margin);

    let block_kinds = blocks.iter().map(|s| s.parse()).collect::<Result<Vec<BlockKind>>>()?;
    let spec =
        GeneratorSpec { block_kinds, block_size, replication: 1, seed, pd_margin, ..defaults }.with_node_count(p)?;
    let sim = simulate(&spec, n)?;

    let data_path = format!("{}.data.csv", a.out);
    let truth_path = format!("{}.truth.json", a.out);
    let precision_path = format!("{}.precision.csv", a.out);
    write_text(&data_path, &sim.data.to_csv())?;
    write_text(&truth_path, &format!("{}\n", sim.graph.to_json()))?;
    write_text(&precision_path, &sim.model.to_csv())?;
    Ok(Outcome {
        params: Command::Simulate(resolved),
        resolved: json!({
            "p": p,
            "n": n,
            "seed": seed,
            "blocks": blocks,
            "block_size": block_size,
            "replication": spec.replication,
            "offdiag_range": [spec.offdiag_range.0, spec.offdiag_range.1],
            "negative_fraction": spec.negative_fraction,
            "pd_margin": pd_margin,
            "rng": "chacha8",
        }),
        seed: Some(seed),
        inputs: a.config.iter().cloned().collect(),
        outputs: vec![data_path, truth_path, precision_path],
        manifest_path: format!("{}.manifest.json", a.out),
    })
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    version: &'a str,
    #[serde(flatten)]
    report: RecoveryReport,
}

fn evaluate(a: &EvaluateArgs) -> Result<Outcome> {
    let truth = load_graph(&a.truth)?;
    let learned = load_graph(&a.learned)?;
    let report = recovery_report(&truth, &learned)?;
    write_text(&a.out, &to_json(&EvaluateReport { version: VERSION, report }))?;
    Ok(Outcome {
        params: Command::Evaluate(a.clone()),
        resolved: Value::Null,
        seed: None,
        inputs: vec![a.truth.clone(), a.learned.clone()],
        outputs: vec![a.out.clone()],
        manifest_path: manifest_beside(&a.out),
    })
}

#[derive(Serialize)]
struct PredictReport<'a> {
    version: &'a str,
    mse: f64,
    edge_density: f64,
    edge_count: usize,
    p: usize,
    n_train: usize,
    n_test: usize,
}

fn predict(a: &PredictArgs) -> Result<Outcome> {
    let train_raw = load_dataset(&read_text(&a.train)?, false)?;
    let test_raw = load_dataset(&read_text(&a.test)?, false)?;
    let graph = load_graph(&a.graph)?;
    if graph.p() != train_raw.p() {
        return Err(FmplError::DimensionMismatch { expected: train_raw.p(), found: graph.p() });
    }
    let train = train_raw.standardize()?;
    let test = test_raw.scaled_with(train.column_means().unwrap(), train.column_sds().unwrap())?;
    let model = mle_precision_given_graph(&train, &graph, a.tol, a.max_iter)?;
    let report = PredictReport {
        version: VERSION,
        mse: predict_components(&model, &test)?,
        edge_density: graph.density(),
        edge_count: graph.edge_count(),
        p: graph.p(),
        n_train: train.n(),
        n_test: test.n(),
    };
    write_text(&a.out, &to_json(&report))?;
    Ok(Outcome {
        params: Command::Predict(a.clone()),
        resolved: json!({ "train_standardized": true, "test_scaled_by": "train", "mle_tol": a.tol, "mle_max_iter": a.max_iter }),
        seed: None,
        inputs: vec![a.train.clone(), a.test.clone(), a.graph.clone()],
        outputs: vec![a.out.clone()],
        manifest_path: manifest_beside(&a.out),
    })
}

fn benchmark(a: &BenchmarkArgs) -> Result<Outcome> {
    let mut cfg = BenchmarkConfig::parse(&read_text(&a.config)?)?;
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    let rows = run_benchmark(&cfg)?;
    write_text(&a.out, &rows_to_csv(&rows))?;
    Ok(Outcome {
        params: Command::Benchmark(a.clone()),
        resolved: serde_json::to_value(&cfg).unwrap(),
        seed: Some(cfg.seed_base),
        inputs: vec![a.config.clone()],
        outputs: vec![a.out.clone()],
        manifest_path: manifest_beside(&a.out),
    })
}
