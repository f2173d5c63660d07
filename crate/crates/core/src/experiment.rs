//! Parameter sweeps over seeds with CSV output.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::clustering::{pivot_offline, pruned_pivot_clustering};
use crate::error::{Error, Result};
use crate::estimators::{matched_pairs, run_c4approx, run_simple_sampling, EstimatorParams, SampleSizes, SpaceMode};
use crate::exact::pivot_cost;
use crate::rank::RankFunction;
use crate::similarity::{EmbeddingOracle, ExplicitGraph, SimilarityOracle};
use crate::stream::{NodeStream, RunOptions};

pub const COLUMNS: [&str; 14] = [
    "algorithm",
    "k",
    "alpha",
    "epsilon",
    "space_mode",
    "space_param",
    "seed",
    "estimate",
    "baseline",
    "rel_error",
    "passes",
    "peak_words",
    "oracle_calls",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    C4Approx,
    SimpleSampling,
    /// Exact cost of the PrunedPivot clustering, computed offline.
    PrunedPivot,
    /// Exact cost of the Pivot clustering, computed offline.
    Pivot,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::C4Approx => "c4approx",
            Algorithm::SimpleSampling => "simple_sampling",
            Algorithm::PrunedPivot => "pruned_pivot",
            Algorithm::Pivot => "pivot",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "c4approx" => Ok(Algorithm::C4Approx),
            "simple_sampling" => Ok(Algorithm::SimpleSampling),
            "pruned_pivot" => Ok(Algorithm::PrunedPivot),
            "pivot" => Ok(Algorithm::Pivot),
            _ => Err(Error::arg(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Axis varied across runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    Single,
    /// Budget fractions.
    Space(Vec<f64>),
    K(Vec<usize>),
    Theta(Vec<f64>),
}

impl Sweep {
    fn len(&self) -> usize {
        match self {
            Sweep::Single => 1,
            Sweep::Space(v) | Sweep::Theta(v) => v.len(),
            Sweep::K(v) => v.len(),
        }
    }
}

/// `space=0.02,0.04`, `k=2,4,8` or `theta=0.1,0.2`.
impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("sweep `{s}`: expected space=F,.. k=K,.. or theta=T,.."));
        let (axis, values) = s.split_once('=').ok_or_else(bad)?;
        let reals = || -> Result<Vec<f64>> { values.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect() };
        let sweep = match axis {
            "space" => Sweep::Space(reals()?),
            "theta" => Sweep::Theta(reals()?),
            "k" => Sweep::K(values.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?),
            _ => return Err(bad()),
        };
        if sweep.len() == 0 {
            return Err(bad());
        }
        Ok(sweep)
    }
}

pub enum Dataset {
    Graph(ExplicitGraph),
    Embeddings(EmbeddingOracle),
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Dataset::Graph(g) => g.n(),
            Dataset::Embeddings(e) => e.n(),
        }
    }

    pub fn oracle(&self) -> &dyn SimilarityOracle {
        match self {
            Dataset::Graph(g) => g,
            Dataset::Embeddings(e) => e,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub base: EstimatorParams,
    pub sweep: Sweep,
    pub algorithms: Vec<Algorithm>,
    /// Runs use seeds `base.seed .. base.seed + seeds`.
    pub seeds: usize,
    pub workers: usize,
    pub timing: bool,
    pub count_pass: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base: EstimatorParams::default(),
            sweep: Sweep::Single,
            algorithms: vec![Algorithm::C4Approx],
            seeds: 1,
            workers: 1,
            timing: false,
            count_pass: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub space: SpaceMode,
    pub seed: u64,
    /// Error code when the run failed.
    pub estimate: std::result::Result<f64, String>,
    pub baseline: Option<f64>,
    pub rel_error: Option<f64>,
    pub passes: Option<usize>,
    pub peak_words: Option<u64>,
    pub oracle_calls: Option<u64>,
    pub wall_ms: Option<f64>,
}

fn opt<T: fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl RunRecord {
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.k.to_string(),
            self.alpha.to_string(),
            self.epsilon.to_string(),
            self.space.label().to_string(),
            opt(self.space.param()),
            self.seed.to_string(),
            match &self.estimate {
                Ok(v) => v.to_string(),
                Err(code) => format!("error:{code}"),
            },
            opt(self.baseline),
            opt(self.rel_error),
            opt(self.passes),
            opt(self.peak_words),
            opt(self.oracle_calls),
            opt(self.wall_ms),
        ]
    }
}

pub fn relative_error(estimate: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| (estimate - baseline).abs() / baseline)
}

/// Short code for an error row.
pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::Argument(_) => "argument",
        Error::Parameter(_) => "parameter",
        Error::Capacity(_) => "capacity",
        Error::Parse { .. } => "parse",
        Error::Format(_) => "format",
        Error::Consumer { source, .. } => error_code(source),
        Error::Accounting(_) => "accounting",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    }
}

struct Task {
    point: usize,
    algorithm: Algorithm,
    seed: u64,
}

/// Parameters and oracle of one sweep point.
fn point_params(config: &ExperimentConfig, point: usize) -> (EstimatorParams, Option<f64>) {
    let mut p = config.base.clone();
    let mut theta = None;
    match &config.sweep {
        Sweep::Single => {}
        Sweep::Space(v) => p.space = SpaceMode::Budget(v[point]),
        Sweep::K(v) => p.k = v[point],
        Sweep::Theta(v) => theta = Some(v[point]),
    }
    (p, theta)
}

/// Runs every (sweep point, algorithm, seed) combination. Rows come back in
/// that nesting order regardless of worker count.
pub fn run_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<RunRecord>> {
    if config.algorithms.is_empty() {
        return Err(Error::arg("no algorithms selected"));
    }
    if config.seeds == 0 {
        return Err(Error::arg("at least one seed is needed"));
    }
    let thetas: Vec<Option<f64>> = match &config.sweep {
        Sweep::Theta(v) => {
            let Dataset::Embeddings(_) = data else {
                return Err(Error::arg("a theta sweep needs embedding input"));
            };
            v.iter().copied().map(Some).collect()
        }
        _ => vec![None],
    };
    let oracles: Vec<Box<dyn SimilarityOracle>> = thetas
        .iter()
        .map(|t| -> Box<dyn SimilarityOracle> {
            match (t, data) {
                (Some(theta), Dataset::Embeddings(e)) => Box::new(e.with_theta(*theta)),
                (_, Dataset::Graph(g)) => Box::new(g),
                (None, Dataset::Embeddings(e)) => Box::new(e),
            }
        })
        .collect();
    let seeds: Vec<u64> = (0..config.seeds as u64).map(|i| config.base.seed.wrapping_add(i)).collect();
    let n = data.n();
    let stream = NodeStream::sequential(n);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::arg(format!("worker pool: {e}")))?;

    pool.install(|| {
        let baseline_keys: Vec<(usize, u64)> = (0..oracles.len())
            .flat_map(|o| seeds.iter().map(move |&s| (o, s)))
            .collect();
        let baselines: HashMap<(usize, u64), f64> = baseline_keys
            .par_iter()
            .map(|&(o, s)| {
                let oracle = &*oracles[o];
                let cost = pivot_cost(oracle, &pivot_offline(oracle, &RankFunction::new(s)));
                ((o, s), cost as f64)
            })
            .collect();

        let mut tasks = Vec::new();
        for point in 0..config.sweep.len() {
            for &algorithm in &config.algorithms {
                tasks.extend(seeds.iter().map(|&seed| Task { point, algorithm, seed }));
            }
        }

        let records = tasks
            .par_iter()
            .map(|task| {
                let (mut params, theta) = point_params(config, task.point);
                params.seed = task.seed;
                let o = if theta.is_some() { task.point } else { 0 };
                let oracle = &*oracles[o];
                let baseline = baselines[&(o, task.seed)];
                let start = Instant::now();
                let outcome = run_one(task.algorithm, &params, &stream, oracle, baseline, config.count_pass);
                let wall = start.elapsed().as_secs_f64() * 1000.0;
                let algorithm = match theta {
                    Some(t) => format!("{}[theta={t}]", task.algorithm.name()),
                    None => task.algorithm.name().to_string(),
                };
                let mut record = RunRecord {
                    algorithm,
                    k: params.k,
                    alpha: params.alpha,
                    epsilon: params.epsilon,
                    space: params.space,
                    seed: task.seed,
                    estimate: Err(String::new()),
                    baseline: Some(baseline),
                    rel_error: None,
                    passes: None,
                    peak_words: None,
                    oracle_calls: None,
                    wall_ms: config.timing.then_some(wall),
                };
                match outcome {
                    Ok(out) => {
                        record.estimate = Ok(out.value);
                        record.rel_error = relative_error(out.value, baseline);
                        record.passes = out.passes;
                        record.peak_words = out.peak_words;
                        record.oracle_calls = out.oracle_calls;
                    }
                    Err(e) => record.estimate = Err(error_code(&e).to_string()),
                }
                record
            })
            .collect();
        Ok(records)
    })
}

struct Outcome {
    value: f64,
    passes: Option<usize>,
    peak_words: Option<u64>,
    oracle_calls: Option<u64>,
}

fn run_one(
    algorithm: Algorithm,
    params: &EstimatorParams,
    stream: &NodeStream,
    oracle: &dyn SimilarityOracle,
    baseline: f64,
    count_pass: bool,
) -> Result<Outcome> {
    let options = RunOptions { count_pass };
    let streamed = |value: f64, acc: crate::stream::Accounting| Outcome {
        value,
        passes: Some(acc.passes_used),
        peak_words: Some(acc.peak_words),
        oracle_calls: Some(acc.oracle_calls),
    };
    let offline = |value: f64| Outcome {
        value,
        passes: None,
        peak_words: None,
        oracle_calls: None,
    };
    match algorithm {
        Algorithm::C4Approx => {
            let est = run_c4approx(stream, params, oracle, options)?;
            Ok(streamed(est.value, est.accounting))
        }
        Algorithm::SimpleSampling => {
            params.validate()?;
            let q = matched_pairs(&SampleSizes::for_params(stream.n(), params)?);
            let est = run_simple_sampling(stream, q, params.k, params.seed, oracle, options)?;
            Ok(streamed(est.value, est.accounting))
        }
        Algorithm::PrunedPivot => {
            if params.k == 0 {
                return Err(Error::param("k must be at least 1"));
            }
            let rf = RankFunction::new(params.seed);
            let c = pruned_pivot_clustering(oracle, &rf, params.k);
            Ok(offline(pivot_cost(oracle, &c) as f64))
        }
        Algorithm::Pivot => Ok(offline(baseline)),
    }
}

/// Mean and sample standard deviation; `None` when empty.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

/// Mean and SD rows per group of runs that differ only in seed.
pub fn summary_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<&RunRecord>> = HashMap::new();
    for r in records {
        let key = r.to_row()[..6].to_vec();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::new();
    for key in order {
        let runs = &groups[&key];
        let column = |f: &dyn Fn(&RunRecord) -> Option<f64>| -> Option<(f64, f64)> {
            let v: Vec<f64> = runs.iter().filter_map(|r| f(r)).collect();
            mean_sd(&v)
        };
        let stats = [
            column(&|r| r.estimate.as_ref().ok().copied()),
            column(&|r| r.baseline),
            column(&|r| r.rel_error),
            column(&|r| r.passes.map(|p| p as f64)),
            column(&|r| r.peak_words.map(|p| p as f64)),
            column(&|r| r.oracle_calls.map(|p| p as f64)),
            column(&|r| r.wall_ms),
        ];
        for (label, pick) in [("mean", 0usize), ("sd", 1)] {
            let mut row = key.clone();
            row.push(label.to_string());
            for s in &stats {
                row.push(opt(s.map(|m| if pick == 0 { m.0 } else { m.1 })));
            }
            rows.push(row);
        }
    }
    rows
}

/// Header, one row per run, then the summary rows.
pub fn write_csv(records: &[RunRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    for row in summary_rows(records) {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::planted;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            base: EstimatorParams {
                k: 4,
                space: SpaceMode::Budget(0.5),
                seed: 10,
                ..Default::default()
            },
            sweep: "space=0.3,0.6".parse().unwrap(),
            algorithms: vec![Algorithm::C4Approx, Algorithm::PrunedPivot],
            seeds: 3,
            workers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let data = Dataset::Graph(planted(400, 4, 0.5, 0.05, 1));
        let records = run_experiment(&small_config(), &data).unwrap();
        assert_eq!(records.len(), 2 * 2 * 3);
        assert_eq!(records[0].algorithm, "c4approx");
        assert_eq!(records[0].seed, 10);
        assert_eq!(records[2].seed, 12);
        assert_eq!(records[3].algorithm, "pruned_pivot");
        assert_eq!(records[6].space, SpaceMode::Budget(0.6));
        assert_eq!(summary_rows(&records).len(), 2 * 2 * 2);
        for r in &records {
            assert!(r.baseline.unwrap() > 0.0);
            assert!(r.rel_error.is_some(), "{r:?}");
        }
    }

    #[test]
    fn csv_is_deterministic_across_worker_counts() {
        let data = Dataset::Graph(planted(400, 4, 0.5, 0.05, 1));
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&run_experiment(&small_config(), &data).unwrap(), &mut a).unwrap();
        let one = ExperimentConfig { workers: 1, ..small_config() };
        write_csv(&run_experiment(&one, &data).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
    }

    #[test]
    fn infeasible_rows_are_marked() {
        let data = Dataset::Graph(planted(400, 4, 0.5, 0.05, 1));
        let config = ExperimentConfig {
            sweep: Sweep::K(vec![1, 3]),
            algorithms: vec![Algorithm::C4Approx],
            ..small_config()
        };
        let records = run_experiment(&config, &data).unwrap();
        assert_eq!(records[0].estimate, Err("parameter".into()));
        assert!(records[3].estimate.is_ok(), "{:?}", records[3]);
    }

    #[test]
    fn theta_sweep_needs_embeddings() {
        let data = Dataset::Graph(planted(10, 2, 0.5, 0.0, 1));
        let config = ExperimentConfig {
            sweep: Sweep::Theta(vec![0.5]),
            ..small_config()
        };
        assert!(run_experiment(&config, &data).is_err());
        let rows: Vec<Vec<f32>> = (0..20).map(|i| vec![(i as f32).cos(), (i as f32).sin()]).collect();
        let data = Dataset::Embeddings(EmbeddingOracle::from_rows(&rows, 0.0).unwrap());
        let config = ExperimentConfig {
            sweep: Sweep::Theta(vec![-1.0, 1.0]),
            algorithms: vec![Algorithm::PrunedPivot],
            seeds: 1,
            ..small_config()
        };
        let records = run_experiment(&config, &data).unwrap();
        assert_eq!(records[0].algorithm, "pruned_pivot[theta=-1]");
        // theta = 1 leaves no edges: all singletons, cost 0.
        assert_eq!(records[1].estimate, Ok(0.0));
    }

    #[test]
    fn parsing() {
        assert_eq!("k=2,4".parse::<Sweep>().unwrap(), Sweep::K(vec![2, 4]));
        assert!("z=1".parse::<Sweep>().is_err());
        assert_eq!("pruned-pivot".parse::<Algorithm>().unwrap(), Algorithm::PrunedPivot);
        assert!("louvain".parse::<Algorithm>().is_err());
    }

    #[test]
    fn stats() {
        let (m, sd) = mean_sd(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((sd - 1.0).abs() < 1e-12);
        assert_eq!(relative_error(5.0, 0.0), None);
        assert_eq!(relative_error(6.0, 4.0), Some(0.5));
    }
}
