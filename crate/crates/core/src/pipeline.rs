//! End-to-end run driven by a TOML file: generate graphs, label them,
//! canonicalize, split, train, and evaluate.
//!
//! Each stage gets its own seed derived from the global seed and the stage
//! name, and writes into its own files under `out_dir`. A final
//! `digests.json` lists the SHA-256 of every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{
    self, emit_param_histograms, eval_convergence, eval_initial_ar, median_stability, Scheme, SchemeKind, TransferKey,
    TransferTable,
};
use crate::dataset::{self, DatasetRecord, Split, SplitSpec, P_MAX};
use crate::error::{Error, Result};
use crate::gnn::{self, EpochLoss, GnnModel, ModelMeta, Sample, TrainConfig};
use crate::graph::{
    enumerate_connected_nonisomorphic, gen_random, with_random_weights, write_graphs, Graph, GraphKind, WeightDist,
};
use crate::qaoa::AdamSettings;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub graphs: GraphsStage,
    #[serde(default)]
    pub dataset: DatasetStage,
    #[serde(default)]
    pub split: SplitStage,
    #[serde(default)]
    pub train: TrainStage,
    #[serde(default)]
    pub eval: EvalStage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphsStage {
    /// Every connected graph on `2..=enumerate_up_to` nodes; 0 disables.
    pub enumerate_up_to: usize,
    pub erdos_renyi: usize,
    pub er_nodes: [usize; 2],
    pub er_prob: [f64; 2],
    pub regular: usize,
    pub regular_nodes: [usize; 2],
    pub regular_degrees: Vec<usize>,
    /// `none`, `uniform:LO,HI` or `exp:RATE`, applied to every graph.
    pub weights: String,
}

impl Default for GraphsStage {
    fn default() -> Self {
        GraphsStage {
            enumerate_up_to: 7,
            erdos_renyi: 0,
            er_nodes: [8, 10],
            er_prob: [0.1, 0.9],
            regular: 0,
            regular_nodes: [8, 12],
            regular_degrees: vec![3],
            weights: "none".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetStage {
    pub depths: Vec<usize>,
    /// Multistart count per entry of `depths`.
    pub starts: Vec<usize>,
    pub lr: f64,
    pub iters: usize,
    /// Tolerance for preferring the start interpolated from the shallower
    /// label; `None` labels with random starts only.
    pub warm_tol: Option<f64>,
}

impl Default for DatasetStage {
    fn default() -> Self {
        DatasetStage {
            depths: vec![1, 2, 3],
            starts: vec![20, 40, 50],
            lr: 0.05,
            iters: 200,
            warm_tol: Some(0.01),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitStage {
    pub ratios: [f64; 3],
}

impl Default for SplitStage {
    fn default() -> Self {
        SplitStage {
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainStage {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub hidden: usize,
    pub p_max: usize,
    /// Also train the per-depth raw-label baseline models.
    pub plain: bool,
}

impl Default for TrainStage {
    fn default() -> Self {
        TrainStage {
            epochs: 20,
            lr: 0.01,
            batch: 32,
            hidden: gnn::DEFAULT_HIDDEN,
            p_max: P_MAX,
            plain: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalStage {
    pub schemes: Vec<String>,
    pub split: String,
    pub iters: usize,
    pub lr: f64,
    pub transfer_key: String,
    pub ramp_dt: f64,
    pub histogram_bins: usize,
}

impl Default for EvalStage {
    fn default() -> Self {
        EvalStage {
            schemes: ["random", "transfer", "labeled", "plain_gnn", "qseer"]
                .map(String::from)
                .to_vec(),
            split: "test".into(),
            iters: 100,
            lr: 0.01,
            transfer_key: "depth".into(),
            ramp_dt: 0.75,
            histogram_bins: 32,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("pipeline config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.out_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive_str(self.seed, stage)
    }
}

/// Seeded graph corpus for the `graphs` stage.
pub fn generate_graphs(cfg: &GraphsStage, seed: u64) -> Result<Vec<Graph>> {
    let weights: WeightDist = cfg.weights.parse()?;
    let mut out = Vec::new();
    if cfg.enumerate_up_to > 0 {
        for n in 2..=cfg.enumerate_up_to {
            out.extend(enumerate_connected_nonisomorphic(n)?);
        }
    }
    let span = |[lo, hi]: [usize; 2], rng: &mut seed::Rng| -> Result<usize> {
        if lo == 0 || lo > hi {
            return Err(Error::Parameter(format!("bad node range [{lo}, {hi}]")));
        }
        Ok(rand::Rng::random_range(rng, lo..=hi))
    };
    let mut rng = seed::rng(seed::derive_str(seed, "erdos_renyi"));
    for k in 0..cfg.erdos_renyi {
        let n = span(cfg.er_nodes, &mut rng)?;
        let [plo, phi] = cfg.er_prob;
        let prob = plo + (phi - plo) * rand::Rng::random::<f64>(&mut rng);
        out.push(gen_random(
            GraphKind::ErdosRenyi { prob },
            n,
            WeightDist::None,
            seed::derive(seed, k as u64),
        )?);
    }
    let mut rng = seed::rng(seed::derive_str(seed, "regular"));
    for k in 0..cfg.regular {
        if cfg.regular_degrees.is_empty() {
            return Err(Error::Parameter("regular graphs need at least one degree".into()));
        }
        let degree = cfg.regular_degrees[rand::Rng::random_range(&mut rng, 0..cfg.regular_degrees.len())];
        let mut n = span(cfg.regular_nodes, &mut rng)?;
        if n * degree % 2 == 1 {
            n += 1;
        }
        let s = seed::derive(seed::derive_str(seed, "regular-topology"), k as u64);
        out.push(gen_random(GraphKind::Regular { degree }, n, WeightDist::None, s)?);
    }
    if weights != WeightDist::None {
        let wseed = seed::derive_str(seed, "weights");
        out = out
            .iter()
            .enumerate()
            .map(|(i, g)| with_random_weights(g, weights, seed::derive(wseed, i as u64)))
            .collect::<Result<_>>()?;
    }
    Ok(out)
}

/// Labels `graphs` per the `dataset` stage.
pub fn build_dataset(cfg: &DatasetStage, graphs: &[Graph], seed: u64) -> Result<Vec<DatasetRecord>> {
    if cfg.starts.len() != cfg.depths.len() {
        return Err(Error::Parameter(format!(
            "{} depths but {} start counts",
            cfg.depths.len(),
            cfg.starts.len()
        )));
    }
    let starts: BTreeMap<usize, usize> = cfg.depths.iter().copied().zip(cfg.starts.iter().copied()).collect();
    let settings = AdamSettings {
        lr: cfg.lr,
        iters: cfg.iters,
    };
    dataset::build_with_warm_start(graphs, &cfg.depths, &starts, seed, settings, cfg.warm_tol)
}

/// Training pairs over stored angles (`raw = false`) or optimizer output.
///
/// Records whose angles the model cannot emit are left out.
pub fn samples(model: &GnnModel, records: &[DatasetRecord], raw: bool) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let target = if raw { r.raw_params() } else { r.params() };
        if model.representable(&r.graph, &target)? {
            out.push(model.sample(&r.graph, target)?);
        }
    }
    Ok(out)
}

pub struct TrainedModels {
    pub qseer: GnnModel,
    pub history: Vec<EpochLoss>,
    pub plain: BTreeMap<usize, GnnModel>,
    pub plain_history: BTreeMap<usize, Vec<EpochLoss>>,
}

/// Trains the depth-conditioned model and, if asked, one raw-label model per depth.
pub fn train_models(cfg: &TrainStage, records: &[DatasetRecord], seed: u64) -> Result<TrainedModels> {
    let train_recs = dataset::with_split(records, Split::Train);
    let val_recs = dataset::with_split(records, Split::Val);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        lr0: cfg.lr,
        batch: cfg.batch,
        seed: seed::derive_str(seed, "order"),
    };
    let meta = ModelMeta {
        hidden: cfg.hidden,
        ..ModelMeta::qseer(cfg.p_max, seed::derive_str(seed, "qseer"))
    };
    let init = GnnModel::new(meta)?;
    let (qseer, history) = gnn::train(
        &init,
        &samples(&init, &train_recs, false)?,
        &samples(&init, &val_recs, false)?,
        &tc,
    )?;

    let mut plain = BTreeMap::new();
    let mut plain_history = BTreeMap::new();
    if cfg.plain {
        let depths: std::collections::BTreeSet<usize> = train_recs.iter().map(|r| r.depth).collect();
        for p in depths {
            let at =
                |rs: &[DatasetRecord]| -> Vec<DatasetRecord> { rs.iter().filter(|r| r.depth == p).cloned().collect() };
            let meta = ModelMeta {
                hidden: cfg.hidden,
                ..ModelMeta::plain(p, cfg.p_max, seed::derive_str(seed, &format!("plain-{p}")))
            };
            let init = GnnModel::new(meta)?;
            let (m, h) = gnn::train(
                &init,
                &samples(&init, &at(&train_recs), true)?,
                &samples(&init, &at(&val_recs), true)?,
                &tc,
            )?;
            plain.insert(p, m);
            plain_history.insert(p, h);
        }
    }
    Ok(TrainedModels {
        qseer,
        history,
        plain,
        plain_history,
    })
}

/// Builds the requested schemes. Models are only needed for the GNN schemes.
pub fn make_schemes(
    names: &[String],
    records: &[DatasetRecord],
    qseer: Option<&GnnModel>,
    plain: &BTreeMap<usize, GnnModel>,
    key: TransferKey,
    ramp_dt: f64,
    seed: u64,
) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for name in names {
        let kind: SchemeKind = name.parse()?;
        out.push(match kind {
            SchemeKind::Random => Scheme::Random {
                seed: seed::derive_str(seed, "random"),
            },
            SchemeKind::Transfer => {
                Scheme::Transfer(TransferTable::build(&dataset::with_split(records, Split::Train), key)?)
            }
            SchemeKind::Labeled => Scheme::labeled(records),
            SchemeKind::PlainGnn if plain.is_empty() => {
                return Err(Error::Unavailable(format!(
                    "scheme {kind} needs per-depth plain models"
                )));
            }
            SchemeKind::PlainGnn => Scheme::PlainGnn(plain.clone()),
            SchemeKind::Qseer => Scheme::Qseer(
                qseer
                    .ok_or_else(|| Error::Unavailable(format!("scheme {kind} needs a trained model")))?
                    .clone(),
            ),
            SchemeKind::LinearRamp => Scheme::LinearRamp { dt: ramp_dt },
        });
    }
    Ok(out)
}

/// Evaluates `schemes` on `records` and writes the report files into `dir`.
pub fn evaluate(schemes: &[Scheme], records: &[DatasetRecord], settings: AdamSettings, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut initial = Vec::new();
    let mut runs = Vec::new();
    for s in schemes {
        initial.extend(eval_initial_ar(s, records)?);
        runs.extend(eval_convergence(s, records, settings)?);
    }
    bench::write_initial_ar_csv(&dir.join("initial_ar.csv"), &initial)?;
    bench::write_convergence_csv(&dir.join("convergence.csv"), &runs)?;
    bench::write_aggregates_csv(&dir.join("aggregates.csv"), &bench::aggregate(&initial))?;
    bench::write_stability_csv(&dir.join("stability.csv"), &median_stability(&runs))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// SHA-256 of every file under `dir` except `digests.json`, keyed by
/// relative path with `/` separators.
pub fn digest_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
                continue;
            }
            let rel = path.strip_prefix(root).expect("under root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if key == "digests.json" {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            out.insert(key, hex::encode(Sha256::digest(&bytes)));
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

/// Runs every stage and returns the output digests.
pub fn run(cfg: &PipelineConfig) -> Result<BTreeMap<String, String>> {
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    log::info!("generating graphs");
    let graphs = generate_graphs(&cfg.graphs, cfg.stage_seed("gen-graphs"))?;
    write_graphs(&out.join("graphs.jsonl"), &graphs)?;

    log::info!("labelling {} graphs", graphs.len());
    let records = build_dataset(&cfg.dataset, &graphs, cfg.stage_seed("build-dataset"))?;
    dataset::write_records(&out.join("dataset.jsonl"), &records)?;

    log::info!("canonicalizing {} records", records.len());
    let (records, report) = dataset::normalize_all(&records)?;
    dataset::write_records(&out.join("normalized.jsonl"), &records)?;
    write_json(&out.join("report.json"), &report)?;

    let spec = SplitSpec::new(cfg.split.ratios, cfg.stage_seed("split"))?;
    let records = dataset::split(&records, &spec)?;
    dataset::write_records(&out.join("split.jsonl"), &records)?;

    log::info!("training");
    let models = train_models(&cfg.train, &records, cfg.stage_seed("train"))?;
    gnn::save(&models.qseer, &out.join("model.bin"))?;
    for (p, m) in &models.plain {
        gnn::save(m, &out.join(format!("plain_p{p}.bin")))?;
    }
    let histories: BTreeMap<String, &Vec<EpochLoss>> = std::iter::once(("qseer".to_string(), &models.history))
        .chain(models.plain_history.iter().map(|(p, h)| (format!("plain_p{p}"), h)))
        .collect();
    write_json(&out.join("history.json"), &histories)?;

    log::info!("evaluating");
    let which: Split = cfg.eval.split.parse()?;
    let eval_recs = dataset::with_split(&records, which);
    let key: TransferKey = cfg.eval.transfer_key.parse()?;
    let schemes = make_schemes(
        &cfg.eval.schemes,
        &records,
        Some(&models.qseer),
        &models.plain,
        key,
        cfg.eval.ramp_dt,
        cfg.stage_seed("eval"),
    )?;
    let settings = AdamSettings {
        lr: cfg.eval.lr,
        iters: cfg.eval.iters,
    };
    let eval_dir = out.join("eval");
    evaluate(&schemes, &eval_recs, settings, &eval_dir)?;
    emit_param_histograms(&records, cfg.eval.histogram_bins, &eval_dir)?;

    let digests = digest_tree(out)?;
    write_json(&out.join("digests.json"), &digests)?;
    Ok(digests)
}
