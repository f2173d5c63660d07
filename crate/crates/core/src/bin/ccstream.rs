use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ccstream::clustering::{pivot_offline, pruned_pivot_clustering, pruned_pivot_stream};
use ccstream::estimators::{matched_pairs, run_c4approx, run_simple_sampling, EstimatorParams, SampleSizes, SpaceMode};
use ccstream::exact::{opt_cost, pivot_cost};
use ccstream::experiment::{relative_error, run_experiment, write_csv, Algorithm, Dataset, ExperimentConfig, RunRecord, Sweep};
use ccstream::gadgets::{disj_gadget, index_gadget, parse_bits};
use ccstream::generate::SyntheticSpec;
use ccstream::io::{output, read_edge_list, read_embeddings, write_edge_list, write_points};
use ccstream::stream::RunOptions;
use ccstream::{Error, NodeId, NodeStream, RankFunction, Result, SimilarityOracle};

/// Correlation clustering cost estimation over node-arrival streams.
#[derive(Parser)]
#[command(name = "ccstream", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force optimal clustering cost (n <= 13).
    Exact(Plain),
    /// Offline Pivot clustering cost.
    Pivot(Plain),
    /// PrunedPivot clustering cost, or one node's pivot with --node.
    PrunedPivot {
        #[command(flatten)]
        common: Common,
        /// Resolve this node by streaming PrunedPivot.
        #[arg(long)]
        node: Option<usize>,
    },
    /// Streaming cost estimate.
    C4approx(Common),
    /// Pair-sampling baseline.
    SimpleSampling {
        #[command(flatten)]
        common: Common,
        /// Sampled pairs; defaults to the words C4Approx would budget.
        #[arg(long)]
        q: Option<usize>,
    },
    /// Lower-bound point sets.
    Gadget {
        #[command(subcommand)]
        kind: GadgetKind,
    },
    /// Sweep over seeds and one parameter axis; writes CSV.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// space=F,.. | k=K,.. | theta=T,..
        #[arg(long)]
        sweep: Option<String>,
        /// Comma-separated: c4approx, simple-sampling, pruned-pivot, pivot.
        #[arg(long, default_value = "c4approx")]
        algorithms: String,
        /// Seeds per configuration, starting at --seed.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Write a synthetic graph as an edge list.
    Generate {
        /// gnp:N,P or planted:N,C,PIN,POUT
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GadgetKind {
    /// INDEX instance: Alice's bits and Bob's 1-based index.
    Index {
        #[arg(long)]
        x: String,
        #[arg(long)]
        b: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DISJ instance.
    Disj {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Edgelist,
    Embeddings,
}

#[derive(Args)]
struct Source {
    /// Edge list or embedding file.
    #[arg(long, conflicts_with = "graph")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edgelist")]
    format: Format,
    /// Similarity threshold for embeddings.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Synthetic graph instead of a file: gnp:N,P or planted:N,C,PIN,POUT.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

impl Source {
    fn load(&self) -> Result<Dataset> {
        match (&self.input, &self.graph) {
            (Some(path), _) => Ok(match self.format {
                Format::Edgelist => Dataset::Graph(read_edge_list(path)?),
                Format::Embeddings => Dataset::Embeddings(read_embeddings(path, self.theta)?),
            }),
            (None, Some(spec)) => Ok(Dataset::Graph(spec.parse::<SyntheticSpec>()?.generate(self.graph_seed)?)),
            (None, None) => Err(Error::Argument("give --input or --graph".into())),
        }
    }
}

#[derive(Args)]
struct Plain {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 15)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// theory | budget=F | test=C
    #[arg(long, default_value = "theory")]
    space: String,
    /// Report the normalized output instead of m_A + m_B.
    #[arg(long)]
    normalize: bool,
    /// Repetitions over shared passes; the median is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Prepend a pass that counts the stream.
    #[arg(long)]
    count_pass: bool,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn params(&self) -> Result<EstimatorParams> {
        Ok(EstimatorParams {
            k: self.k,
            alpha: self.alpha,
            epsilon: self.epsilon,
            seed: self.seed,
            space: self.space.parse::<SpaceMode>()?,
            normalize: self.normalize,
            reps: self.reps,
        })
    }

    fn record(&self, algorithm: &str, params: &EstimatorParams, estimate: f64, baseline: f64) -> RunRecord {
        RunRecord {
            algorithm: algorithm.into(),
            k: params.k,
            alpha: params.alpha,
            epsilon: params.epsilon,
            space: params.space,
            seed: params.seed,
            estimate: Ok(estimate),
            baseline: Some(baseline),
            rel_error: relative_error(estimate, baseline),
            passes: None,
            peak_words: None,
            oracle_calls: None,
            wall_ms: None,
        }
    }
}

fn baseline(oracle: &dyn SimilarityOracle, seed: u64) -> f64 {
    pivot_cost(oracle, &pivot_offline(oracle, &RankFunction::new(seed))) as f64
}

fn emit(records: &[RunRecord], out: Option<&PathBuf>) -> Result<()> {
    write_csv(records, output(out.map(PathBuf::as_path))?)
}

fn plain_record(algorithm: &str, seed: u64, estimate: f64, baseline: f64) -> RunRecord {
    RunRecord {
        algorithm: algorithm.into(),
        k: 0,
        alpha: 0.0,
        epsilon: 0.0,
        space: SpaceMode::Theory,
        seed,
        estimate: Ok(estimate),
        baseline: Some(baseline),
        rel_error: relative_error(estimate, baseline),
        passes: None,
        peak_words: None,
        oracle_calls: None,
        wall_ms: None,
    }
}

fn streamed(
    common: &Common,
    algorithm: &str,
    run: impl FnOnce(&EstimatorParams, &NodeStream, &dyn SimilarityOracle) -> Result<ccstream::estimators::Estimate>,
) -> Result<()> {
    let params = common.params()?;
    let data = common.source.load()?;
    let oracle = data.oracle();
    let stream = NodeStream::sequential(oracle.n());
    let start = Instant::now();
    let est = run(&params, &stream, oracle)?;
    let wall = start.elapsed().as_secs_f64() * 1000.0;
    if est.cap_warnings > 0 {
        eprintln!("warning: {} sampled neighbourhoods exceeded the degree cap", est.cap_warnings);
    }
    let mut record = common.record(algorithm, &params, est.value, baseline(oracle, params.seed));
    record.passes = Some(est.accounting.passes_used);
    record.peak_words = Some(est.accounting.peak_words);
    record.oracle_calls = Some(est.accounting.oracle_calls);
    record.wall_ms = common.timing.then_some(wall);
    emit(&[record], common.out.as_ref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Exact(p) => {
            let data = p.source.load()?;
            let (cost, _) = opt_cost(data.oracle())?;
            let base = baseline(data.oracle(), p.seed);
            emit(&[plain_record("exact", p.seed, cost as f64, base)], p.out.as_ref())
        }
        Command::Pivot(p) => {
            let data = p.source.load()?;
            let base = baseline(data.oracle(), p.seed);
            emit(&[plain_record("pivot", p.seed, base, base)], p.out.as_ref())
        }
        Command::PrunedPivot { common, node } => {
            let data = common.source.load()?;
            let oracle = data.oracle();
            let rf = RankFunction::new(common.seed);
            if let Some(u) = node {
                if u >= oracle.n() {
                    return Err(Error::Argument(format!("node {u} out of range for n = {}", oracle.n())));
                }
                let stream = NodeStream::sequential(oracle.n());
                let (p, acc) = pruned_pivot_stream(&stream, NodeId::from(u), &rf, common.k, oracle)?;
                println!(
                    "node {u} pivot {p} passes {} peak_words {} oracle_calls {}",
                    acc.passes_used,
                    acc.peak_words,
                    oracle.query_count()
                );
                return Ok(());
            }
            let params = common.params()?;
            let cost = pivot_cost(oracle, &pruned_pivot_clustering(oracle, &rf, common.k)) as f64;
            let record = common.record("pruned_pivot", &params, cost, baseline(oracle, common.seed));
            emit(&[record], common.out.as_ref())
        }
        Command::C4approx(common) => streamed(&common, "c4approx", |params, stream, oracle| {
            run_c4approx(stream, params, oracle, RunOptions { count_pass: common.count_pass })
        }),
        Command::SimpleSampling { common, q } => streamed(&common, "simple_sampling", |params, stream, oracle| {
            params.validate()?;
            let q = match q {
                Some(q) => q,
                None => matched_pairs(&SampleSizes::for_params(stream.n(), params)?),
            };
            run_simple_sampling(stream, q, params.k, params.seed, oracle, RunOptions { count_pass: common.count_pass })
        }),
        Command::Gadget { kind } => {
            let (oracle, opt, out) = match kind {
                GadgetKind::Index { x, b, out } => {
                    let (g, opt) = index_gadget(&parse_bits(&x)?, b)?;
                    (g, opt, out)
                }
                GadgetKind::Disj { x, y, out } => {
                    let (g, opt) = disj_gadget(&parse_bits(&x)?, &parse_bits(&y)?)?;
                    (g, opt, out)
                }
            };
            let mut w = output(out.as_deref())?;
            writeln!(w, "# n={} expected_opt={opt}", oracle.n())?;
            write_points(oracle.points(), w)
        }
        Command::Experiment {
            common,
            sweep,
            algorithms,
            seeds,
            workers,
        } => {
            let config = ExperimentConfig {
                base: common.params()?,
                sweep: match sweep {
                    Some(s) => s.parse()?,
                    None => Sweep::Single,
                },
                algorithms: algorithms.split(',').map(|a| a.trim().parse::<Algorithm>()).collect::<Result<_>>()?,
                seeds,
                workers,
                timing: common.timing,
                count_pass: common.count_pass,
            };
            let data = common.source.load()?;
            let records = run_experiment(&config, &data)?;
            emit(&records, common.out.as_ref())
        }
        Command::Generate { spec, seed, out } => {
            let g = spec.parse::<SyntheticSpec>()?.generate(seed)?;
            write_edge_list(&g, output(out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
