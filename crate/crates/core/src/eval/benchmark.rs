//! The multi-method comparison experiment and the temperature sweep.
//!
//! Nine methods share one protocol: train (or combine) models on the
//! training pool, pick checkpoints by dev mAP, report dev and test mAP.
//! The clean-only baseline doubles as the auxiliary teacher for the
//! distillation variants, and the blend weight defaults to the reliability
//! heuristic computed from the two baselines' dev mAPs. Per-seed method
//! runs draw their RNG streams from `seed ^ method index`, so adding or
//! removing methods never shifts another method's results.

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, SplitSelector};
use crate::error::{Error, Result};
use crate::eval::metrics::{self, ScoreMatrix};
use crate::kgraph::{build_relation_matrix, KnowledgeGraph};
use crate::labels::{lambda_heuristic, PseudoLabelSpec, Strategy};
use crate::model::{finetune, train, MLPClassifier, TrainConfig, TrainHistory};

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_TEMPERATURES: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

/// The comparison methods, in canonical order. The position in [`Method::ALL`]
/// is the method's stable index for seed-stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Trained on the clean subset only; also the distillation teacher.
    BaselineClean,
    /// Trained on the full training pool with observed labels.
    BaselineNoisy,
    /// Elementwise geometric mean of the two baselines' probabilities.
    BaselineEnsemble,
    /// Targets blend observed labels with the student's own predictions.
    Bootstrap,
    /// Targets blend observed labels with the uniform prior.
    LabelSmooth,
    /// Clean-baseline weights, then further training on the noisy subset.
    Finetune,
    /// Targets blend observed labels with the teacher's soft predictions.
    Distillation,
    /// Distillation with teacher outputs propagated through the label graph.
    GuidedDistillation,
    /// Trained on the pool with ground-truth labels (diagnostic ceiling).
    UpperBound,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::BaselineClean,
        Method::BaselineNoisy,
        Method::BaselineEnsemble,
        Method::Bootstrap,
        Method::LabelSmooth,
        Method::Finetune,
        Method::Distillation,
        Method::GuidedDistillation,
        Method::UpperBound,
    ];

    /// Stable position used to derive per-method seed streams.
    pub fn index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    pub fn id(self) -> &'static str {
        match self {
            Method::BaselineClean => "baseline-clean",
            Method::BaselineNoisy => "baseline-noisy",
            Method::BaselineEnsemble => "baseline-ensemble",
            Method::Bootstrap => "bootstrap",
            Method::LabelSmooth => "label-smooth",
            Method::Finetune => "finetune",
            Method::Distillation => "distillation",
            Method::GuidedDistillation => "guided-distillation",
            Method::UpperBound => "upper-bound",
        }
    }

    pub fn from_id(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.id()).collect();
                Error::Config(format!("unknown method {s:?}; known: {}", known.join(", ")))
            })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Blend weight selection: the reliability heuristic, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Auto,
    Fixed(f64),
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Auto
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Value(f64),
    Text(String),
}

impl Serialize for LambdaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaChoice::Auto => LambdaRepr::Text("auto".into()).serialize(s),
            LambdaChoice::Fixed(v) => LambdaRepr::Value(*v).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match LambdaRepr::deserialize(d)? {
            LambdaRepr::Value(v) => Ok(LambdaChoice::Fixed(v)),
            LambdaRepr::Text(t) if t == "auto" => Ok(LambdaChoice::Auto),
            LambdaRepr::Text(t) => Err(serde::de::Error::custom(format!(
                "lambda must be a number in [0, 1] or \"auto\", got {t:?}"
            ))),
        }
    }
}

/// Experiment-level knobs shared by every method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub lambda: LambdaChoice,
    pub temperature: f64,
    /// Relation-matrix off-diagonal weight for guided distillation.
    pub beta: f64,
    /// Dev-mAP grid searched by the smooth and bootstrap baselines.
    pub lambda_grid: Vec<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seeds: vec![1],
            hidden: vec![64],
            train: TrainConfig::default(),
            lambda: LambdaChoice::Auto,
            temperature: 1.0,
            beta: 0.4,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature = {} must be positive",
                self.temperature
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta = {} must be non-negative", self.beta)));
        }
        if let LambdaChoice::Fixed(v) = self.lambda {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("lambda = {v} must be in [0, 1]")));
            }
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda_grid must not be empty".into()));
        }
        if self.lambda_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("lambda_grid entries must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One method's result under one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub dev_map: f64,
    pub test_map: f64,
    pub seed: u64,
}

/// Provenance stamps, filled in by the caller that owns the files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset_hash: String,
    pub config_hash: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<MethodRow>,
    pub metadata: ReportMeta,
}

/// Median aggregate of one method across seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub dev_map: f64,
    pub test_map: f64,
    pub seeds: usize,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn new(rows: Vec<MethodRow>) -> Self {
        ExperimentReport { rows, metadata: ReportMeta::default() }
    }

    /// CSV with one row per (method, seed).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,lambda,T,dev_map,test_map,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                csv_opt(r.lambda),
                csv_opt(r.temperature),
                r.dev_map,
                r.test_map,
                r.seed
            ));
        }
        out
    }

    /// Per-method medians across seeds, in canonical method order.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for method in Method::ALL {
            let rows: Vec<&MethodRow> =
                self.rows.iter().filter(|r| r.method == method).collect();
            if rows.is_empty() {
                continue;
            }
            let mut dev: Vec<f64> = rows.iter().map(|r| r.dev_map).collect();
            let mut test: Vec<f64> = rows.iter().map(|r| r.test_map).collect();
            let mut lambdas: Vec<f64> = rows.iter().filter_map(|r| r.lambda).collect();
            let lambda = if lambdas.len() == rows.len() {
                Some(median(&mut lambdas))
            } else {
                None
            };
            let mut temps: Vec<f64> = rows.iter().filter_map(|r| r.temperature).collect();
            let temperature =
                if temps.len() == rows.len() { Some(median(&mut temps)) } else { None };
            out.push(AggregateRow {
                method,
                lambda,
                temperature,
                dev_map: median(&mut dev),
                test_map: median(&mut test),
                seeds: rows.len(),
            });
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("method,lambda,T,dev_map,test_map,seeds\n");
        for r in self.aggregate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                csv_opt(r.lambda),
                csv_opt(r.temperature),
                r.dev_map,
                r.test_map,
                r.seeds
            ));
        }
        out
    }
}

/// Elementwise geometric mean of two probability matrices over the same
/// records: `sqrt(a * b)`, no renormalization (rank metrics are unaffected
/// by global monotone rescaling anyway).
pub fn geometric_mean_scores(a: &ScoreMatrix, b: &ScoreMatrix) -> Result<ScoreMatrix> {
    if a.record_count() != b.record_count() || a.label_count() != b.label_count() {
        return Err(Error::Dimension("score matrices have different shapes".into()));
    }
    if a.truth() != b.truth() {
        return Err(Error::Data("score matrices disagree on relevance labels".into()));
    }
    let combined: Vec<Vec<f64>> = a
        .scores()
        .iter()
        .zip(b.scores())
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x * y).sqrt()).collect())
        .collect();
    ScoreMatrix::new(combined, a.truth().to_vec())
}

/// Trained baselines shared across the methods of one seed run.
struct SeedContext<'a> {
    data: &'a Dataset,
    graph: Option<&'a KnowledgeGraph>,
    cfg: &'a BenchConfig,
    seed: u64,
    clean: Option<(MLPClassifier, f64)>,
    noisy: Option<(MLPClassifier, f64)>,
}

impl<'a> SeedContext<'a> {
    fn new(
        data: &'a Dataset,
        graph: Option<&'a KnowledgeGraph>,
        cfg: &'a BenchConfig,
        seed: u64,
    ) -> Self {
        SeedContext { data, graph, cfg, seed, clean: None, noisy: None }
    }

    fn train_cfg(&self, method: Method) -> TrainConfig {
        TrainConfig { seed: self.seed ^ method.index(), ..self.cfg.train.clone() }
    }

    fn train_with(
        &self,
        sel: SplitSelector,
        spec: &PseudoLabelSpec,
        teacher: Option<&MLPClassifier>,
        cfg: &TrainConfig,
        init: Option<MLPClassifier>,
    ) -> Result<(MLPClassifier, TrainHistory)> {
        let mut provider =
            crate::labels::build_target_provider(spec, self.data, sel, teacher)?;
        match init {
            Some(model) => finetune(model, self.data, sel, provider.as_mut(), cfg),
            None => train(self.data, sel, &self.cfg.hidden, provider.as_mut(), cfg),
        }
    }

    fn ensure_clean(&mut self) -> Result<(MLPClassifier, f64)> {
        if self.clean.is_none() {
            let cfg = self.train_cfg(Method::BaselineClean);
            let spec = PseudoLabelSpec::new(Strategy::Noisy, 1.0);
            let (model, _) =
                self.train_with(SplitSelector::CleanTrain, &spec, None, &cfg, None)?;
            let dev = metrics::split_map(&model, self.data, SplitSelector::Dev)?;
            self.clean = Some((model, dev));
        }
        Ok(self.clean.clone().unwrap())
    }

    fn ensure_noisy(&mut self) -> Result<(MLPClassifier, f64)> {
        if self.noisy.is_none() {
            let cfg = self.train_cfg(Method::BaselineNoisy);
            let spec = PseudoLabelSpec::new(Strategy::Noisy, 1.0);
            let (model, _) =
                self.train_with(SplitSelector::TrainPool, &spec, None, &cfg, None)?;
            let dev = metrics::split_map(&model, self.data, SplitSelector::Dev)?;
            self.noisy = Some((model, dev));
        }
        Ok(self.noisy.clone().unwrap())
    }

    /// Reliability-heuristic blend weight from the two baselines' dev mAPs,
    /// or the configured fixed value.
    fn resolve_lambda(&mut self) -> Result<f64> {
        match self.cfg.lambda {
            LambdaChoice::Fixed(v) => Ok(v),
            LambdaChoice::Auto => {
                let (_, clean_dev) = self.ensure_clean()?;
                let (_, noisy_dev) = self.ensure_noisy()?;
                lambda_heuristic(clean_dev, noisy_dev)
            }
        }
    }

    fn eval_row(
        &self,
        method: Method,
        model: &MLPClassifier,
        lambda: Option<f64>,
        temperature: Option<f64>,
    ) -> Result<MethodRow> {
        Ok(MethodRow {
            method,
            lambda,
            temperature,
            dev_map: metrics::split_map(model, self.data, SplitSelector::Dev)?,
            test_map: metrics::split_map(model, self.data, SplitSelector::Test)?,
            seed: self.seed,
        })
    }

    /// Grid-searches the blend weight by dev mAP (first grid value wins ties).
    fn grid_search(
        &self,
        method: Method,
        strategy: Strategy,
    ) -> Result<(MLPClassifier, f64)> {
        let cfg = self.train_cfg(method);
        let mut best: Option<(f64, MLPClassifier, f64)> = None;
        for &lambda in &self.cfg.lambda_grid {
            let spec = PseudoLabelSpec::new(strategy, lambda);
            let (model, _) =
                self.train_with(SplitSelector::TrainPool, &spec, None, &cfg, None)?;
            let dev = metrics::split_map(&model, self.data, SplitSelector::Dev)?;
            if best.as_ref().map_or(true, |(b, _, _)| dev > *b) {
                best = Some((dev, model, lambda));
            }
        }
        let (_, model, lambda) = best.expect("grid is non-empty");
        Ok((model, lambda))
    }

    fn distillation_row(&mut self, method: Method) -> Result<MethodRow> {
        let lambda = self.resolve_lambda()?;
        let (teacher, _) = self.ensure_clean()?;
        let mut spec = PseudoLabelSpec::new(
            match method {
                Method::GuidedDistillation => Strategy::GuidedDistill,
                _ => Strategy::Distill,
            },
            lambda,
        )
        .with_temperature(self.cfg.temperature);
        if method == Method::GuidedDistillation {
            let graph = self.graph.ok_or_else(|| {
                Error::Config("guided-distillation requires a knowledge graph".into())
            })?;
            let matrix = build_relation_matrix(graph, &self.data.labels, self.cfg.beta)?;
            spec = spec.with_relation_matrix(matrix);
        }
        let cfg = self.train_cfg(method);
        let (model, _) =
            self.train_with(SplitSelector::TrainPool, &spec, Some(&teacher), &cfg, None)?;
        self.eval_row(method, &model, Some(lambda), Some(self.cfg.temperature))
    }

    fn run_method(&mut self, method: Method) -> Result<MethodRow> {
        match method {
            Method::BaselineClean => {
                let (model, _) = self.ensure_clean()?;
                self.eval_row(method, &model, None, None)
            }
            Method::BaselineNoisy => {
                let (model, _) = self.ensure_noisy()?;
                self.eval_row(method, &model, None, None)
            }
            Method::BaselineEnsemble => {
                let (clean, _) = self.ensure_clean()?;
                let (noisy, _) = self.ensure_noisy()?;
                let combine = |sel| -> Result<f64> {
                    let a = metrics::model_scores(&clean, self.data, sel)?;
                    let b = metrics::model_scores(&noisy, self.data, sel)?;
                    metrics::mean_average_precision(&geometric_mean_scores(&a, &b)?)
                };
                Ok(MethodRow {
                    method,
                    lambda: None,
                    temperature: None,
                    dev_map: combine(SplitSelector::Dev)?,
                    test_map: combine(SplitSelector::Test)?,
                    seed: self.seed,
                })
            }
            Method::Bootstrap => {
                let (model, lambda) = self.grid_search(method, Strategy::Bootstrap)?;
                self.eval_row(method, &model, Some(lambda), None)
            }
            Method::LabelSmooth => {
                let (model, lambda) = self.grid_search(method, Strategy::Smooth)?;
                self.eval_row(method, &model, Some(lambda), None)
            }
            Method::Finetune => {
                let (init, _) = self.ensure_clean()?;
                let cfg = self.train_cfg(method);
                let spec = PseudoLabelSpec::new(Strategy::Noisy, 1.0);
                let (model, _) = self.train_with(
                    SplitSelector::NoisyTrain,
                    &spec,
                    None,
                    &cfg,
                    Some(init),
                )?;
                self.eval_row(method, &model, None, None)
            }
            Method::Distillation | Method::GuidedDistillation => {
                self.distillation_row(method)
            }
            Method::UpperBound => {
                let pool = self.data.indices(SplitSelector::TrainPool);
                if pool.iter().any(|&i| self.data.records[i].y_true.is_none()) {
                    return Err(Error::Config(
                        "upper-bound requires ground-truth labels on every training record"
                            .into(),
                    ));
                }
                let cfg = self.train_cfg(method);
                let spec = PseudoLabelSpec::new(Strategy::CleanTruth, 1.0);
                let (model, _) =
                    self.train_with(SplitSelector::TrainPool, &spec, None, &cfg, None)?;
                self.eval_row(method, &model, None, None)
            }
        }
    }
}

fn dedup_methods(methods: &[Method]) -> Result<Vec<Method>> {
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let mut seen = Vec::new();
    for &m in methods {
        if !seen.contains(&m) {
            seen.push(m);
        }
    }
    Ok(seen)
}

/// Runs the requested methods under one seed. Exposed so callers can spread
/// seeds across threads; rows come back in request order.
pub fn run_benchmark_seed(
    data: &Dataset,
    graph: Option<&KnowledgeGraph>,
    methods: &[Method],
    cfg: &BenchConfig,
    seed: u64,
) -> Result<Vec<MethodRow>> {
    cfg.validate()?;
    let methods = dedup_methods(methods)?;
    let mut ctx = SeedContext::new(data, graph, cfg, seed);
    methods.into_iter().map(|m| ctx.run_method(m)).collect()
}

/// Runs every requested method under every configured seed, serially.
/// Metadata stamps are left empty for the caller to fill.
pub fn run_benchmark(
    data: &Dataset,
    graph: Option<&KnowledgeGraph>,
    methods: &[Method],
    cfg: &BenchConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        rows.extend(run_benchmark_seed(data, graph, methods, cfg, seed)?);
    }
    Ok(ExperimentReport::new(rows))
}

/// Reruns distillation across softening temperatures, reusing the seed
/// streams of the main experiment: the `t = 1` row is bit-identical to the
/// distillation row [`run_benchmark`] produces for the same seed.
pub fn temperature_sweep(
    data: &Dataset,
    graph: Option<&KnowledgeGraph>,
    temperatures: &[f64],
    cfg: &BenchConfig,
) -> Result<Vec<MethodRow>> {
    cfg.validate()?;
    if temperatures.is_empty() {
        return Err(Error::Config("no temperatures requested".into()));
    }
    let mut grid: Vec<f64> = Vec::new();
    for &t in temperatures {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("temperature = {t} must be positive")));
        }
        if !grid.contains(&t) {
            grid.push(t);
        }
    }
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        // The teacher and the blend weight do not depend on the temperature;
        // train the baselines once per seed and share them across the grid.
        let mut ctx = SeedContext::new(data, graph, cfg, seed);
        let clean = ctx.ensure_clean()?;
        let noisy = match cfg.lambda {
            LambdaChoice::Auto => Some(ctx.ensure_noisy()?),
            LambdaChoice::Fixed(_) => None,
        };
        for &t in &grid {
            let sweep_cfg = BenchConfig { temperature: t, ..cfg.clone() };
            let mut sub = SeedContext::new(data, graph, &sweep_cfg, seed);
            sub.clean = Some(clean.clone());
            sub.noisy = noisy.clone();
            rows.push(sub.distillation_row(Method::Distillation)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, NoiseConfig, SyntheticSpec};
    use crate::labels::FixedTargetProvider;

    fn small_setup() -> (Dataset, KnowledgeGraph, BenchConfig) {
        let spec = SyntheticSpec {
            label_count: 6,
            feature_dim: 6,
            samples: 240,
            noise: NoiseConfig {
                flip_rate: 0.4,
                sibling_bias: 0.7,
                background_fraction: 0.1,
                seed: 11,
            },
            ..Default::default()
        };
        let (data, graph) = generate(&spec).unwrap();
        let cfg = BenchConfig {
            seeds: vec![5],
            hidden: vec![8],
            train: TrainConfig { epochs: 3, batch_size: 32, ..Default::default() },
            ..Default::default()
        };
        (data, graph, cfg)
    }

    #[test]
    fn method_ids_roundtrip_and_indices_are_stable() {
        for (i, m) in Method::ALL.into_iter().enumerate() {
            assert_eq!(m.index(), i as u64);
            assert_eq!(Method::from_id(m.id()).unwrap(), m);
        }
        assert!(Method::from_id("nope").is_err());
        assert_eq!(Method::Distillation.index(), 6);
    }

    #[test]
    fn lambda_choice_serde_accepts_auto_and_numbers() {
        assert_eq!(
            serde_json::from_str::<LambdaChoice>("\"auto\"").unwrap(),
            LambdaChoice::Auto
        );
        assert_eq!(
            serde_json::from_str::<LambdaChoice>("0.35").unwrap(),
            LambdaChoice::Fixed(0.35)
        );
        assert!(serde_json::from_str::<LambdaChoice>("\"half\"").is_err());
        assert_eq!(serde_json::to_string(&LambdaChoice::Auto).unwrap(), "\"auto\"");
        assert_eq!(serde_json::to_string(&LambdaChoice::Fixed(0.5)).unwrap(), "0.5");
    }

    #[test]
    fn single_clean_method_equals_direct_training() {
        let (data, _, cfg) = small_setup();
        let report =
            run_benchmark(&data, None, &[Method::BaselineClean], &cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];

        // BaselineClean has stream index 0, so its seed is the base seed.
        let mut provider = FixedTargetProvider::from_observed(&data, SplitSelector::CleanTrain);
        let tc = TrainConfig { seed: 5, ..cfg.train.clone() };
        let (model, _) =
            train(&data, SplitSelector::CleanTrain, &cfg.hidden, &mut provider, &tc).unwrap();
        let dev = metrics::split_map(&model, &data, SplitSelector::Dev).unwrap();
        let test = metrics::split_map(&model, &data, SplitSelector::Test).unwrap();
        assert_eq!(row.dev_map.to_bits(), dev.to_bits());
        assert_eq!(row.test_map.to_bits(), test.to_bits());
    }

    #[test]
    fn report_is_deterministic_for_same_config() {
        let (data, graph, cfg) = small_setup();
        let methods = [Method::BaselineClean, Method::Distillation, Method::Finetune];
        let a = run_benchmark(&data, Some(&graph), &methods, &cfg).unwrap();
        let b = run_benchmark(&data, Some(&graph), &methods, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn full_method_list_yields_one_row_per_method_per_seed() {
        let (data, graph, mut cfg) = small_setup();
        cfg.seeds = vec![5, 6];
        cfg.lambda_grid = vec![0.5, 0.9];
        let report = run_benchmark(&data, Some(&graph), &Method::ALL, &cfg).unwrap();
        assert_eq!(report.rows.len(), Method::ALL.len() * 2);
        for seed in [5, 6] {
            for method in Method::ALL {
                let n = report
                    .rows
                    .iter()
                    .filter(|r| r.method == method && r.seed == seed)
                    .count();
                assert_eq!(n, 1, "{method} under seed {seed}");
            }
        }
        for r in &report.rows {
            assert!((0.0..=1.0).contains(&r.dev_map));
            assert!((0.0..=1.0).contains(&r.test_map));
        }
        // Duplicate method requests collapse to one row.
        let dup = run_benchmark_seed(
            &data,
            None,
            &[Method::BaselineClean, Method::BaselineClean],
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(dup.len(), 1);
    }

    #[test]
    fn auto_lambda_matches_heuristic_of_reported_baselines() {
        let (data, _, cfg) = small_setup();
        let methods = [Method::BaselineClean, Method::BaselineNoisy, Method::Distillation];
        let report = run_benchmark(&data, None, &methods, &cfg).unwrap();
        let by = |m: Method| report.rows.iter().find(|r| r.method == m).unwrap();
        let want =
            lambda_heuristic(by(Method::BaselineClean).dev_map, by(Method::BaselineNoisy).dev_map)
                .unwrap();
        assert_eq!(by(Method::Distillation).lambda, Some(want));
    }

    #[test]
    fn ensemble_scores_sit_between_the_baselines() {
        let (data, _, cfg) = small_setup();
        let mut ctx = SeedContext::new(&data, None, &cfg, 5);
        let (clean, _) = ctx.ensure_clean().unwrap();
        let (noisy, _) = ctx.ensure_noisy().unwrap();
        let a = metrics::model_scores(&clean, &data, SplitSelector::Test).unwrap();
        let b = metrics::model_scores(&noisy, &data, SplitSelector::Test).unwrap();
        let g = geometric_mean_scores(&a, &b).unwrap();
        for (ra, (rb, rg)) in a.scores().iter().zip(b.scores().iter().zip(g.scores())) {
            for ((x, y), z) in ra.iter().zip(rb).zip(rg) {
                assert!(*z >= x.min(*y) - 1e-15 && *z <= x.max(*y) + 1e-15);
            }
        }
    }

    #[test]
    fn guided_distillation_without_graph_is_a_config_error() {
        let (data, _, cfg) = small_setup();
        let err = run_benchmark(&data, None, &[Method::GuidedDistillation], &cfg)
            .unwrap_err()
            .to_string();
        assert!(err.contains("guided-distillation"), "{err}");
    }

    #[test]
    fn upper_bound_without_truth_is_a_config_error() {
        let (mut data, _, cfg) = small_setup();
        for r in &mut data.records {
            r.y_true = None;
        }
        let err = run_benchmark(&data, None, &[Method::UpperBound], &cfg)
            .unwrap_err()
            .to_string();
        assert!(err.contains("upper-bound"), "{err}");
    }

    #[test]
    fn sweep_dedups_and_matches_benchmark_at_unit_temperature() {
        let (data, graph, cfg) = small_setup();
        let rows = temperature_sweep(&data, Some(&graph), &[2.0, 2.0, 1.0], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].temperature, Some(2.0));
        assert_eq!(rows[1].temperature, Some(1.0));

        let report = run_benchmark(&data, Some(&graph), &[Method::Distillation], &cfg).unwrap();
        let bench = &report.rows[0];
        let swept = &rows[1];
        assert_eq!(swept.dev_map.to_bits(), bench.dev_map.to_bits());
        assert_eq!(swept.test_map.to_bits(), bench.test_map.to_bits());
        assert_eq!(swept.lambda, bench.lambda);
    }

    #[test]
    fn aggregate_takes_medians_across_seeds() {
        let row = |seed, dev, test| MethodRow {
            method: Method::BaselineClean,
            lambda: None,
            temperature: None,
            dev_map: dev,
            test_map: test,
            seed,
        };
        let report =
            ExperimentReport::new(vec![row(1, 0.3, 0.6), row(2, 0.5, 0.2), row(3, 0.4, 0.4)]);
        let agg = report.aggregate();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].dev_map, 0.4);
        assert_eq!(agg[0].test_map, 0.4);
        assert_eq!(agg[0].seeds, 3);

        let even = ExperimentReport::new(vec![row(1, 0.3, 0.6), row(2, 0.5, 0.2)]);
        assert_eq!(even.aggregate()[0].dev_map, 0.4);
        assert_eq!(even.aggregate()[0].test_map, 0.4);
    }

    #[test]
    fn csv_has_expected_header_and_blank_optionals() {
        let report = ExperimentReport::new(vec![MethodRow {
            method: Method::BaselineEnsemble,
            lambda: None,
            temperature: None,
            dev_map: 0.5,
            test_map: 0.25,
            seed: 9,
        }]);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "method,lambda,T,dev_map,test_map,seed");
        assert_eq!(lines.next().unwrap(), "baseline-ensemble,,,0.5,0.25,9");
    }

    #[test]
    fn config_validation_rejects_bad_knobs() {
        let mut cfg = BenchConfig::default();
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.lambda = LambdaChoice::Fixed(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.lambda_grid = vec![0.5, 2.0];
        assert!(cfg.validate().is_err());
    }
}
