//! `qseer` command-line front end.
//!
//! Results go to files or standard output; logs go to standard error. Any
//! failure is reported as a single line `error: <kind>: <message>` with exit
//! status 1. Usage errors exit with status 2.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use qseer_core::bench::{emit_param_histograms, TransferKey};
use qseer_core::dataset::{self, DatasetRecord, Split, SplitSpec, P_MAX};
use qseer_core::gnn::{self, GnnModel, ModelMeta, TrainConfig};
use qseer_core::graph::{self, gen_random, Graph, GraphKind, WeightDist};
use qseer_core::pipeline::{self, PipelineConfig};
use qseer_core::qaoa::{multistart_optimize, AdamSettings};
use qseer_core::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qseer", version, about = "Learned QAOA angle initialization for Max-Cut")]
struct Cli {
    /// Only log errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More log output; repeat for trace level.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "QSEER_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Er,
    Regular,
    Enum,
}

#[derive(Subcommand)]
enum Command {
    /// Generate graphs as JSON lines.
    GenGraphs {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        /// Number of random graphs; ignored for `enum`.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        prob: f64,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// `none`, `uniform:LO,HI` or `exp:RATE`.
        #[arg(long, default_value = "none")]
        weights: String,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize angles for every graph in a file by multistart Adam.
    Optimize {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label graphs with optimal angles at each depth.
    BuildDataset {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        depths: Vec<usize>,
        /// Multistart count per depth.
        #[arg(long, value_delimiter = ',', default_value = "20,40,50")]
        starts: Vec<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Keep the start interpolated from depth p-1 when it is within this
        /// fraction of the optimal cut of the best random start.
        #[arg(long, default_value_t = 0.01)]
        warm_tol: f64,
        /// Use random starts only.
        #[arg(long)]
        no_warm_start: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Canonicalize stored angles and report range compliance.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Assign train/val/test splits by graph.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
        ratios: Vec<f64>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on the train split (or every record if none is split).
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = gnn::DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = P_MAX)]
        pmax: usize,
        /// Train the unweighted single-depth baseline on raw angles instead.
        #[arg(long)]
        plain_depth: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch losses as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Predict initial angles for every graph in a file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        p: usize,
    },
    /// Benchmark initialization schemes on a dataset split.
    Eval {
        #[arg(long, value_delimiter = ',', default_value = "random,transfer,labeled")]
        schemes: Vec<String>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[command(flatten)]
        seed: SeedArg,
        /// Grouping for the transfer baseline: `depth` or `degree`.
        #[arg(long, default_value = "depth")]
        key: TransferKey,
        /// Depth-conditioned model for the `qseer` scheme.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Single-depth models for the `plain_gnn` scheme.
        #[arg(long, value_delimiter = ',')]
        plain_models: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.75)]
        ramp_dt: f64,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run every stage from a TOML config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes JSON lines to `out`, or to standard output when absent.
fn emit_lines<T: serde::Serialize>(out: Option<&Path>, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).map_err(json_err)?);
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn write_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(json_err)?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn gen_graphs(
    kind: Kind,
    n: usize,
    count: usize,
    prob: f64,
    degree: usize,
    weights: &str,
    seed: u64,
) -> Result<Vec<Graph>> {
    let weights: WeightDist = weights.parse()?;
    match kind {
        Kind::Enum => graph::enumerate_connected_nonisomorphic(n)?
            .iter()
            .enumerate()
            .map(|(i, g)| graph::with_random_weights(g, weights, qseer_core::seed::derive(seed, i as u64)))
            .collect(),
        Kind::Er | Kind::Regular => {
            let kind = match kind {
                Kind::Er => GraphKind::ErdosRenyi { prob },
                _ => GraphKind::Regular { degree },
            };
            (0..count)
                .map(|k| gen_random(kind, n, weights, qseer_core::seed::derive(seed, k as u64)))
                .collect()
        }
    }
}

fn train(
    records: &[DatasetRecord],
    cfg: &TrainConfig,
    meta: ModelMeta,
    out: &Path,
    history: Option<&Path>,
) -> Result<()> {
    let (train_recs, val_recs) = if records.iter().any(|r| r.split.is_some()) {
        (
            dataset::with_split(records, Split::Train),
            dataset::with_split(records, Split::Val),
        )
    } else {
        (records.to_vec(), Vec::new())
    };
    let raw = meta.fixed_depth.is_some();
    let keep: Vec<DatasetRecord> = train_recs
        .into_iter()
        .filter(|r| meta.fixed_depth.is_none_or(|p| r.depth == p))
        .collect();
    let val: Vec<DatasetRecord> = val_recs
        .into_iter()
        .filter(|r| meta.fixed_depth.is_none_or(|p| r.depth == p))
        .collect();
    if keep.is_empty() {
        return Err(Error::Precondition("no training records".into()));
    }
    let init = GnnModel::new(meta)?;
    info!("training on {} records, validating on {}", keep.len(), val.len());
    let (model, losses) = gnn::train(
        &init,
        &pipeline::samples(&init, &keep, raw)?,
        &pipeline::samples(&init, &val, raw)?,
        cfg,
    )?;
    gnn::save(&model, out)?;
    if let Some(path) = history {
        write_pretty(path, &losses)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraphs {
            kind,
            n,
            count,
            prob,
            degree,
            weights,
            seed,
            out,
        } => {
            let graphs = gen_graphs(kind, n, count, prob, degree, &weights, seed.seed)?;
            info!("generated {} graphs", graphs.len());
            emit_lines(out.as_deref(), &graphs)
        }
        Command::Optimize {
            graph,
            p,
            starts,
            seed,
            lr,
            iters,
            out,
        } => {
            let settings = AdamSettings { lr, iters };
            let results = graph::read_graphs(&graph)?
                .iter()
                .map(|g| {
                    let r = multistart_optimize(g, p, starts, dataset::record_seed(seed.seed, g.id(), p), settings)?;
                    let mut v = serde_json::to_value(&r).map_err(json_err)?;
                    v["graph_id"] = json!(g.id());
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            emit_lines(out.as_deref(), &results)
        }
        Command::BuildDataset {
            graphs,
            depths,
            starts,
            seed,
            lr,
            iters,
            warm_tol,
            no_warm_start,
            out,
        } => {
            let warm_tol = (!no_warm_start).then_some(warm_tol);
            let cfg = pipeline::DatasetStage {
                depths,
                starts,
                lr,
                iters,
                warm_tol,
            };
            let graphs = graph::read_graphs(&graphs)?;
            info!("labelling {} graphs", graphs.len());
            let records = pipeline::build_dataset(&cfg, &graphs, seed.seed)?;
            dataset::write_records(&out, &records)
        }
        Command::Normalize { input, out, report } => {
            let (records, rep) = dataset::normalize_all(&dataset::read_records(&input)?)?;
            info!("in-range fraction {:.4}", rep.in_range_fraction());
            dataset::write_records(&out, &records)?;
            match report {
                Some(path) => write_pretty(&path, &rep),
                None => Ok(()),
            }
        }
        Command::Split {
            input,
            ratios,
            seed,
            out,
        } => {
            let ratios: [f64; 3] = ratios
                .try_into()
                .map_err(|v: Vec<f64>| Error::Parameter(format!("expected 3 ratios, got {}", v.len())))?;
            let records = dataset::split(&dataset::read_records(&input)?, &SplitSpec::new(ratios, seed.seed)?)?;
            match out {
                Some(path) => dataset::write_records(&path, &records),
                None => emit_lines(None, &records),
            }
        }
        Command::Train {
            dataset: path,
            epochs,
            lr,
            batch,
            hidden,
            pmax,
            plain_depth,
            seed,
            out,
            history,
        } => {
            let s = seed.seed;
            let cfg = TrainConfig {
                epochs,
                lr0: lr,
                batch,
                seed: qseer_core::seed::derive_str(s, "order"),
            };
            let base = match plain_depth {
                Some(p) => ModelMeta::plain(p, pmax, s),
                None => ModelMeta::qseer(pmax, s),
            };
            let meta = ModelMeta { hidden, ..base };
            train(&dataset::read_records(&path)?, &cfg, meta, &out, history.as_deref())
        }
        Command::Predict { model, graph, p } => {
            let model = gnn::load(&model)?;
            let lines = graph::read_graphs(&graph)?
                .iter()
                .map(|g| {
                    let params = model.predict(g, p)?;
                    Ok(json!({"graph_id": g.id(), "p": p, "gamma": params.gamma, "beta": params.beta}))
                })
                .collect::<Result<Vec<_>>>()?;
            emit_lines(None, &lines)
        }
        Command::Eval {
            schemes,
            dataset: path,
            split,
            iters,
            lr,
            seed,
            key,
            model,
            plain_models,
            ramp_dt,
            bins,
            out_dir,
        } => {
            let records = dataset::read_records(&path)?;
            let qseer = model.as_deref().map(gnn::load).transpose()?;
            let mut plain = BTreeMap::new();
            for path in &plain_models {
                let m = gnn::load(path)?;
                let p = m
                    .meta()
                    .fixed_depth
                    .ok_or_else(|| Error::Precondition(format!("{} is not a single-depth model", path.display())))?;
                plain.insert(p, m);
            }
            let schemes = pipeline::make_schemes(&schemes, &records, qseer.as_ref(), &plain, key, ramp_dt, seed.seed)?;
            let eval_recs = dataset::with_split(&records, split);
            if eval_recs.is_empty() {
                return Err(Error::Precondition(format!("no records in split {split}")));
            }
            info!("evaluating {} schemes on {} records", schemes.len(), eval_recs.len());
            pipeline::evaluate(&schemes, &eval_recs, AdamSettings { lr, iters }, &out_dir)?;
            emit_param_histograms(&records, bins, &out_dir)?;
            Ok(())
        }
        Command::Pipeline { config, seed, out_dir } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            let digests = pipeline::run(&cfg)?;
            let text = serde_json::to_string_pretty(&digests).map_err(json_err)?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: parameter: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
