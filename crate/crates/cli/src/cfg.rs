//! Config-file schemas for each subcommand, plus the key listings printed by
//! `--help`. All schemas reject unknown keys so typos fail loudly instead of
//! silently falling back to defaults.

use std::path::PathBuf;

use noisy_distill_core::datagen::SyntheticSpec;
use noisy_distill_core::eval::benchmark::DEFAULT_TEMPERATURES;
use noisy_distill_core::eval::{BenchConfig, LambdaChoice, Method};
use noisy_distill_core::labels::Strategy;
use noisy_distill_core::model::TrainConfig;
use noisy_distill_core::risk::Prop1Config;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub spec: SyntheticSpec,
    pub dataset_out: PathBuf,
    pub graph_out: PathBuf,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            spec: SyntheticSpec::default(),
            dataset_out: PathBuf::from("dataset.jsonl"),
            graph_out: PathBuf::from("graph.tsv"),
        }
    }
}

pub const GEN_DATA_KEYS: &str = "\
Config keys (JSON):
  spec.label_count            classes in the two-level hierarchy (default 16)
  spec.feature_dim            feature dimension (default 16)
  spec.children_per_parent    hierarchy fan-out (default 2)
  spec.labels_per_sample      {\"min\", \"max\"} true positives per record (default 1..3)
  spec.samples                record count (default 2000)
  spec.cluster_spread         per-record scatter around the class center (default 0.5)
  spec.parent_scale           scatter of parent-group centers (default 2.5)
  spec.child_scale            scatter of class centers within a group (default 1.4)
  spec.noise.flip_rate        chance each true positive is flipped (default 0)
  spec.noise.sibling_bias     chance a flip lands on a sibling class (default 0)
  spec.noise.background_fraction  background-record rate (default 0)
  spec.noise.seed             generator seed (default 0)
  spec.split_ratios           [train, dev, test] weights (default [6, 3, 1])
  spec.clean_fraction         verified share of the train block (default 0.2)
  dataset_out                 JSONL output path (default dataset.jsonl)
  graph_out                   TSV triples output path (default graph.tsv)";

fn default_split() -> String {
    "train".into()
}

fn default_strategy() -> Strategy {
    Strategy::Noisy
}

fn default_temperature() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.4
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub dataset: PathBuf,
    /// Teacher model JSON, needed by the distill strategies.
    #[serde(default)]
    pub teacher: Option<PathBuf>,
    /// Triples TSV, needed by guided-distill.
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default = "default_split")]
    pub split: String,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub lambda: Option<LambdaChoice>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    pub model_out: PathBuf,
    #[serde(default)]
    pub history_out: Option<PathBuf>,
}

pub const TRAIN_KEYS: &str = "\
Config keys (JSON):
  dataset                 dataset JSONL path (required)
  teacher                 teacher model JSON (required by distill strategies)
  graph                   triples TSV (required by guided-distill)
  split                   records to train on: clean-train, noisy-train, train,
                          dev, or test (default train = both train splits)
  strategy                noisy, distill, guided-distill, smooth, bootstrap,
                          or clean-truth (default noisy)
  lambda                  blend weight in [0, 1]; required by strategies that
                          blend (\"auto\" is only supported by benchmark)
  temperature             softening divisor for teacher logits (default 1)
  beta                    sibling weight of the relation matrix (default 0.4)
  hidden                  hidden layer widths (default [64])
  train.epochs            optimization epochs (default 250)
  train.initial_lr        Adam learning rate (default 0.001)
  train.lr_decay          multiplicative decay factor (default 0.9)
  train.decay_every       epochs between decays (default 5)
  train.batch_size        minibatch size (default 64)
  train.seed              init and shuffle seed (default 0)
  train.select_best_dev   return the best-dev-mAP checkpoint (default true)
  model_out               model JSON output path (required)
  history_out             per-epoch loss/mAP JSON output path (optional)";

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("report")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCmdConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    /// Subset of methods to run; defaults to all nine.
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

pub const BENCHMARK_KEYS: &str = "\
Config keys (JSON):
  dataset                 dataset JSONL path (required)
  graph                   triples TSV (required by guided-distillation)
  methods                 methods to run, any of: baseline-clean, baseline-noisy,
                          baseline-ensemble, bootstrap, label-smooth, finetune,
                          distillation, guided-distillation, upper-bound
                          (default all nine)
  bench.seeds             seed list, one full run each (default [1])
  bench.hidden            hidden layer widths (default [64])
  bench.train.epochs      optimization epochs (default 250)
  bench.train.initial_lr  Adam learning rate (default 0.001)
  bench.train.lr_decay    multiplicative decay factor (default 0.9)
  bench.train.decay_every epochs between decays (default 5)
  bench.train.batch_size  minibatch size (default 64)
  bench.train.seed        base seed, further mixed per method (default 0)
  bench.train.select_best_dev  return best-dev-mAP checkpoints (default true)
  bench.lambda            blend weight in [0, 1], or \"auto\" to derive it from
                          the clean and noisy baselines' dev mAPs (default auto)
  bench.temperature       distillation softening divisor (default 1)
  bench.beta              sibling weight of the relation matrix (default 0.4)
  bench.lambda_grid       dev-mAP grid for bootstrap and label-smooth
                          (default [0.5, 0.6, 0.7, 0.8, 0.9])
  out_dir                 report directory (default report)";

/// Outputs default next to the working directory so a bare run is useful.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyCmdConfig {
    pub check: Prop1Config,
    pub report_out: PathBuf,
    pub curve_out: PathBuf,
}

impl Default for VerifyCmdConfig {
    fn default() -> Self {
        VerifyCmdConfig {
            check: Prop1Config::default(),
            report_out: PathBuf::from("risk_report.json"),
            curve_out: PathBuf::from("risk_curve.csv"),
        }
    }
}

pub const VERIFY_KEYS: &str = "\
Config keys (JSON):
  check.mode              synthetic-noise, correlated, or trained-auxiliary
                          (default synthetic-noise)
  check.n                 sample count for the synthetic modes (default 10000)
  check.label_count       label vector length (default 10)
  check.flip_rate         per-coordinate flip probability for y (default 0.3)
  check.noise_sigma       additive noise scale producing s (default 0.35)
  check.seed              Monte-Carlo seed (default 0)
  check.grid_points       lambda grid resolution (default 101)
  check.ensemble          predictors in the bias/variance split (default 5)
  check.aux.samples       dataset size for trained-auxiliary mode (default 1500)
  check.aux.epochs        teacher training epochs (default 30)
  check.aux.hidden        teacher hidden widths (default [32])
  report_out              report JSON path (default risk_report.json)
  curve_out               lambda/risk CSV path (default risk_curve.csv)";

fn default_temperatures() -> Vec<f64> {
    DEFAULT_TEMPERATURES.to_vec()
}

fn default_sweep_out() -> PathBuf {
    PathBuf::from("sweep.csv")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempSweepCmdConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default = "default_sweep_out")]
    pub out: PathBuf,
}

pub const TEMP_SWEEP_KEYS: &str = "\
Config keys (JSON):
  dataset                 dataset JSONL path (required)
  graph                   triples TSV (optional; unused by plain distillation)
  temperatures            softening divisors to sweep (default [1, 2, 5, 10])
  bench.seeds             seed list, one sweep per seed (default [1])
  bench.hidden            hidden layer widths (default [64])
  bench.train.epochs      optimization epochs (default 250)
  bench.train.initial_lr  Adam learning rate (default 0.001)
  bench.train.lr_decay    multiplicative decay factor (default 0.9)
  bench.train.decay_every epochs between decays (default 5)
  bench.train.batch_size  minibatch size (default 64)
  bench.train.seed        base seed, further mixed per method (default 0)
  bench.train.select_best_dev  return best-dev-mAP checkpoints (default true)
  bench.lambda            blend weight in [0, 1], or \"auto\" (default auto)
  bench.temperature       ignored here; the sweep list takes over
  bench.beta              sibling weight of the relation matrix (default 0.4)
  bench.lambda_grid       unused by the sweep's distillation runs
  out                     sweep CSV path (default sweep.csv)";

fn default_rank_prefix() -> PathBuf {
    PathBuf::from("ranking")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankCmdConfig {
    pub dataset: PathBuf,
    /// Teacher model JSON supplying the soft predictions.
    pub model: PathBuf,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_rank_prefix")]
    pub out_prefix: PathBuf,
}

pub const RANK_KEYS: &str = "\
Config keys (JSON):
  dataset                 dataset JSONL path (required)
  model                   teacher model JSON path (required)
  graph                   triples TSV; enables the guided ranking
  class                   label name to rank (required here or via --class)
  lambda                  blend weight in [0, 1] (required here or via --lambda)
  temperature             softening divisor for teacher logits (default 1)
  beta                    sibling weight of the relation matrix (default 0.4)
  out_prefix              output prefix; writes <prefix>.distill.csv and,
                          with a graph, <prefix>.guided.csv (default ranking)";
