//! Synthetic multi-label corpora with a controllable noise taxonomy, plus the
//! JSON-lines persistence format shared with the CLI.
//!
//! Records live in four splits: a small verified `clean-train` subset, the
//! bulk `noisy-train` subset whose observed labels are corrupted, and clean
//! `dev` / `test` splits used for checkpoint selection and reporting.
//!
//! Noise comes in two flavors. Label flips remove a true positive and add a
//! replacement positive that is sibling-directed with probability
//! `sibling_bias` (confusable classes) and otherwise uniform over non-true
//! labels. Background records replace the features with a wide unrelated
//! Gaussian: in noisy-train they keep one spurious observed positive, in
//! dev/test they are pure negatives with all-zero labels.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, Triple};

/// File format tag written in the dataset header line.
pub const FORMAT_TAG: &str = "noisy-distill-v1";

/// Standard deviation of background feature draws, relative to the unit-scale
/// class clusters.
const BACKGROUND_SCALE: f64 = 6.0;

/// Relation type used by the generated two-level hierarchy.
const HIERARCHY_RELATION: &str = "class";

// Distinct sub-stream salts so independently specified stages cannot alias.
const SPLIT_STREAM: u64 = 0x73706c6974; // "split"
const NOISE_STREAM: u64 = 0x6e6f697365; // "noise"

/// Which of the four record pools a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "clean-train")]
    CleanTrain,
    #[serde(rename = "noisy-train")]
    NoisyTrain,
    #[serde(rename = "dev")]
    Dev,
    #[serde(rename = "test")]
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::CleanTrain => "clean-train",
            Split::NoisyTrain => "noisy-train",
            Split::Dev => "dev",
            Split::Test => "test",
        };
        f.write_str(s)
    }
}

/// Record selector used by training and evaluation entry points.
/// `TrainPool` is the union of clean-train and noisy-train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSelector {
    CleanTrain,
    NoisyTrain,
    TrainPool,
    Dev,
    Test,
}

impl SplitSelector {
    pub fn matches(self, split: Split) -> bool {
        match self {
            SplitSelector::CleanTrain => split == Split::CleanTrain,
            SplitSelector::NoisyTrain => split == Split::NoisyTrain,
            SplitSelector::TrainPool => {
                split == Split::CleanTrain || split == Split::NoisyTrain
            }
            SplitSelector::Dev => split == Split::Dev,
            SplitSelector::Test => split == Split::Test,
        }
    }

    /// Parses the selector names accepted in config files.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "clean-train" => Ok(SplitSelector::CleanTrain),
            "noisy-train" => Ok(SplitSelector::NoisyTrain),
            "train" => Ok(SplitSelector::TrainPool),
            "dev" => Ok(SplitSelector::Dev),
            "test" => Ok(SplitSelector::Test),
            other => Err(Error::Lookup(format!(
                "unknown split selector {other:?} (expected clean-train, noisy-train, train, dev, or test)"
            ))),
        }
    }
}

impl fmt::Display for SplitSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SplitSelector::CleanTrain => "clean-train",
            SplitSelector::NoisyTrain => "noisy-train",
            SplitSelector::TrainPool => "train",
            SplitSelector::Dev => "dev",
            SplitSelector::Test => "test",
        };
        f.write_str(s)
    }
}

/// One sample: features, observed labels, and (when known) true labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub x: Vec<f64>,
    /// Observed (possibly corrupted) multi-hot labels.
    #[serde(rename = "y")]
    pub y_observed: Vec<u8>,
    /// Ground truth; absent for real-world corpora.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_true: Option<Vec<u8>>,
    pub split: Split,
}

impl Record {
    pub fn y_observed_f64(&self) -> Vec<f64> {
        self.y_observed.iter().map(|&v| v as f64).collect()
    }

    pub fn y_true_f64(&self) -> Option<Vec<f64>> {
        self.y_true.as_ref().map(|y| y.iter().map(|&v| v as f64).collect())
    }

    /// Truth when present, observed labels otherwise; evaluation labels for
    /// dev/test are clean by construction either way.
    pub fn eval_labels(&self) -> &[u8] {
        self.y_true.as_deref().unwrap_or(&self.y_observed)
    }

    pub fn eval_labels_f64(&self) -> Vec<f64> {
        self.eval_labels().iter().map(|&v| v as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    #[serde(rename = "L")]
    label_count: usize,
    d: usize,
    labels: Vec<String>,
}

/// An ordered label vocabulary plus records. Record ids are unique; every
/// `x` has length `d` and every label vector length `L`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub d: usize,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Record positions matching a selector, in file order.
    pub fn indices(&self, sel: SplitSelector) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| sel.matches(r.split))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn label_index(&self, name: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == name).ok_or_else(|| {
            Error::Lookup(format!(
                "unknown class {name:?}; known classes: {}",
                self.labels.join(", ")
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Data("dataset has no labels".into()));
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.id.is_empty() {
                return Err(Error::Data(format!("record {i} has an empty id")));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Data(format!("duplicate record id {:?}", r.id)));
            }
            if r.x.len() != self.d {
                return Err(Error::Data(format!(
                    "record {:?}: x has {} entries, expected {}",
                    r.id,
                    r.x.len(),
                    self.d
                )));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("record {:?}: non-finite feature", r.id)));
            }
            for (name, y) in [("y", Some(&r.y_observed)), ("y_true", r.y_true.as_ref())] {
                if let Some(y) = y {
                    if y.len() != self.labels.len() {
                        return Err(Error::Data(format!(
                            "record {:?}: {name} has {} entries, expected {}",
                            r.id,
                            y.len(),
                            self.labels.len()
                        )));
                    }
                    if y.iter().any(|&v| v > 1) {
                        return Err(Error::Data(format!(
                            "record {:?}: {name} must be 0/1",
                            r.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the header line followed by one JSON record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let header = Header {
            format: FORMAT_TAG.to_string(),
            label_count: self.labels.len(),
            d: self.d,
            labels: self.labels.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty dataset file".into() })?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| Error::Parse { line: 1, message: format!("bad header: {e}") })?;
        if header.format != FORMAT_TAG {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported format {:?}, expected {FORMAT_TAG:?}", header.format),
            });
        }
        if header.label_count != header.labels.len() {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header L = {} but {} labels listed",
                    header.label_count,
                    header.labels.len()
                ),
            });
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let r: Record = serde_json::from_str(line)
                .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
            records.push(r);
        }
        let ds = Dataset { labels: header.labels, d: header.d, records };
        ds.validate().map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{msg} (while loading dataset)")),
            other => other,
        })?;
        Ok(ds)
    }
}

/// Label-corruption and background-noise knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Probability that each true positive is flipped to a wrong class.
    pub flip_rate: f64,
    /// Probability that a flip lands on a sibling class rather than a
    /// uniformly random non-true class.
    pub sibling_bias: f64,
    /// Fraction of noisy-train/dev/test records replaced by background draws.
    pub background_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { flip_rate: 0.0, sibling_bias: 0.0, background_fraction: 0.0, seed: 0 }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("flip_rate", self.flip_rate),
            ("sibling_bias", self.sibling_bias),
            ("background_fraction", self.background_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} = {v} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Inclusive range of true positives per sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRange {
    pub min: usize,
    pub max: usize,
}

impl Default for LabelRange {
    fn default() -> Self {
        LabelRange { min: 1, max: 3 }
    }
}

/// Generator configuration: a two-level class hierarchy, Gaussian feature
/// clusters per class, and the noise taxonomy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub label_count: usize,
    pub feature_dim: usize,
    /// Children per parent in the generated hierarchy; parents are
    /// `ceil(label_count / children_per_parent)` group entities.
    pub children_per_parent: usize,
    pub labels_per_sample: LabelRange,
    pub samples: usize,
    /// Feature scatter around the class-mean center.
    pub cluster_spread: f64,
    /// Scatter of parent-group centers (controls between-group separation).
    pub parent_scale: f64,
    /// Scatter of class centers around their parent (controls how confusable
    /// siblings are).
    pub child_scale: f64,
    pub noise: NoiseConfig,
    /// Relative train/dev/test weights.
    pub split_ratios: (f64, f64, f64),
    /// Fraction of the train block that is verified clean.
    pub clean_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            label_count: 16,
            feature_dim: 16,
            children_per_parent: 2,
            labels_per_sample: LabelRange::default(),
            samples: 2000,
            cluster_spread: 0.5,
            parent_scale: 2.5,
            child_scale: 1.4,
            noise: NoiseConfig::default(),
            split_ratios: (6.0, 3.0, 1.0),
            clean_fraction: 0.2,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.label_count < 2 {
            return Err(Error::Parameter("label_count must be >= 2".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Parameter("feature_dim must be >= 1".into()));
        }
        if self.children_per_parent == 0 {
            return Err(Error::Parameter("children_per_parent must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("samples must be >= 1".into()));
        }
        let LabelRange { min, max } = self.labels_per_sample;
        if min == 0 || min > max || max >= self.label_count {
            return Err(Error::Parameter(format!(
                "labels_per_sample {min}..={max} must satisfy 1 <= min <= max < label_count"
            )));
        }
        let (a, b, c) = self.split_ratios;
        if !(a > 0.0 && b >= 0.0 && c >= 0.0) || !(a + b + c).is_finite() {
            return Err(Error::Parameter(format!("split_ratios {:?} must be non-negative with a positive train share", self.split_ratios)));
        }
        if !(0.0..=1.0).contains(&self.clean_fraction) {
            return Err(Error::Parameter(format!(
                "clean_fraction = {} must be in [0, 1]",
                self.clean_fraction
            )));
        }
        for (name, v) in [
            ("cluster_spread", self.cluster_spread),
            ("parent_scale", self.parent_scale),
            ("child_scale", self.child_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        self.noise.validate()
    }
}

/// Standard normal via Box-Muller on the given stream.
pub(crate) fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Assigns splits: floor(n * dev_ratio) dev, floor(n * test_ratio) test,
/// remainder train; the train block is further cut into clean/noisy with
/// floor(train * clean_fraction) clean. Assignment is a seeded shuffle.
pub fn split_records(
    n: usize,
    ratios: (f64, f64, f64),
    clean_fraction: f64,
    seed: u64,
) -> Vec<Split> {
    let total = ratios.0 + ratios.1 + ratios.2;
    let dev_n = (n as f64 * ratios.1 / total).floor() as usize;
    let test_n = (n as f64 * ratios.2 / total).floor() as usize;
    let train_n = n - dev_n - test_n;
    let clean_n = (train_n as f64 * clean_fraction).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM);
    order.shuffle(&mut rng);

    let mut out = vec![Split::Test; n];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = if pos < clean_n {
            Split::CleanTrain
        } else if pos < train_n {
            Split::NoisyTrain
        } else if pos < train_n + dev_n {
            Split::Dev
        } else {
            Split::Test
        };
    }
    out
}

/// Corrupts a true label vector: each positive flips with `flip_rate`; a flip
/// removes the positive and adds a replacement, sibling-directed with
/// probability `sibling_bias`, otherwise uniform over non-true labels.
/// The output is never all-zero because every flip adds a replacement.
pub fn corrupt(
    y_true: &[u8],
    noise: &NoiseConfig,
    graph: &KnowledgeGraph,
    labels: &[String],
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let mut y = y_true.to_vec();
    for m in 0..y_true.len() {
        if y_true[m] != 1 || rng.gen::<f64>() >= noise.flip_rate {
            continue;
        }
        let sibling_directed = rng.gen::<f64>() < noise.sibling_bias;
        let pool: Vec<usize> = if sibling_directed {
            let sibs = graph
                .siblings(&labels[m])
                .unwrap_or_default();
            labels
                .iter()
                .enumerate()
                .filter(|(_, name)| sibs.contains(*name))
                .map(|(i, _)| i)
                .collect()
        } else {
            Vec::new()
        };
        let pool = if pool.is_empty() {
            // Uniform over non-true labels (also the fallback when the class
            // has no siblings).
            (0..y_true.len()).filter(|&i| y_true[i] == 0).collect()
        } else {
            pool
        };
        if pool.is_empty() {
            continue; // every label is true; nothing sensible to add
        }
        y[m] = 0;
        let replacement = pool[rng.gen_range(0..pool.len())];
        y[replacement] = 1;
    }
    y
}

/// Generates the dataset and its class hierarchy. Fully deterministic per
/// `spec.noise.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, KnowledgeGraph)> {
    spec.validate()?;
    let l = spec.label_count;
    let d = spec.feature_dim;

    let labels: Vec<String> = (0..l).map(|i| format!("class_{i:02}")).collect();
    let parents = l.div_ceil(spec.children_per_parent);
    let mut triples = Vec::with_capacity(l);
    for (i, label) in labels.iter().enumerate() {
        let parent = format!("group_{:02}", i / spec.children_per_parent);
        triples.push(Triple::new(parent, label.clone(), HIERARCHY_RELATION));
    }
    let graph = KnowledgeGraph::new(triples);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise.seed);

    let mut parent_centers = Vec::with_capacity(parents);
    for _ in 0..parents {
        let c: Vec<f64> = (0..d).map(|_| gauss(&mut rng) * spec.parent_scale).collect();
        parent_centers.push(c);
    }
    let mut class_centers = Vec::with_capacity(l);
    for i in 0..l {
        let p = &parent_centers[i / spec.children_per_parent];
        let c: Vec<f64> = (0..d).map(|j| p[j] + gauss(&mut rng) * spec.child_scale).collect();
        class_centers.push(c);
    }

    let mut records = Vec::with_capacity(spec.samples);
    let id_width = spec.samples.to_string().len().max(6);
    for i in 0..spec.samples {
        let k = rng.gen_range(spec.labels_per_sample.min..=spec.labels_per_sample.max);
        let chosen = rand::seq::index::sample(&mut rng, l, k);
        let mut y_true = vec![0u8; l];
        let mut x = vec![0.0; d];
        for idx in chosen.iter() {
            y_true[idx] = 1;
            for j in 0..d {
                x[j] += class_centers[idx][j] / k as f64;
            }
        }
        for v in x.iter_mut() {
            *v += gauss(&mut rng) * spec.cluster_spread;
        }
        records.push(Record {
            id: format!("r{i:0id_width$}"),
            x,
            y_observed: y_true.clone(),
            y_true: Some(y_true),
            split: Split::Test, // overwritten below
        });
    }

    let assignment =
        split_records(spec.samples, spec.split_ratios, spec.clean_fraction, spec.noise.seed);
    for (r, s) in records.iter_mut().zip(&assignment) {
        r.split = *s;
    }

    // Noise pass over records in file order, on its own stream.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.noise.seed ^ NOISE_STREAM);
    for r in records.iter_mut() {
        match r.split {
            Split::CleanTrain => {}
            Split::NoisyTrain => {
                if noise_rng.gen::<f64>() < spec.noise.background_fraction {
                    make_background(r, d, l, &mut noise_rng, true);
                } else {
                    let y_true = r.y_true.as_ref().expect("generated records carry truth");
                    r.y_observed = corrupt(y_true, &spec.noise, &graph, &labels, &mut noise_rng);
                }
            }
            Split::Dev | Split::Test => {
                if noise_rng.gen::<f64>() < spec.noise.background_fraction {
                    make_background(r, d, l, &mut noise_rng, false);
                }
            }
        }
    }

    let dataset = Dataset { labels, d, records };
    dataset.validate()?;
    Ok((dataset, graph))
}

fn make_background(r: &mut Record, d: usize, l: usize, rng: &mut ChaCha8Rng, spurious: bool) {
    r.x = (0..d).map(|_| gauss(rng) * BACKGROUND_SCALE).collect();
    r.y_true = Some(vec![0u8; l]);
    let mut y = vec![0u8; l];
    if spurious {
        y[rng.gen_range(0..l)] = 1;
    }
    r.y_observed = y;
}

/// Per-split counts and observed-vs-truth noise statistics.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub clean_train: usize,
    pub noisy_train: usize,
    pub dev: usize,
    pub test: usize,
    /// Fraction of noisy-train records whose observed labels differ from the
    /// truth (requires y_true; 0 when absent).
    pub corrupted_fraction: f64,
    /// Mean squared label distance between observed and true labels on
    /// noisy-train.
    pub mean_label_distance: f64,
}

pub fn summarize(data: &Dataset) -> DatasetSummary {
    let mut counts = [0usize; 4];
    let mut corrupted = 0usize;
    let mut dist = 0.0;
    let mut noisy = 0usize;
    for r in &data.records {
        let slot = match r.split {
            Split::CleanTrain => 0,
            Split::NoisyTrain => 1,
            Split::Dev => 2,
            Split::Test => 3,
        };
        counts[slot] += 1;
        if r.split == Split::NoisyTrain {
            noisy += 1;
            if let Some(t) = &r.y_true {
                let diff: usize = t
                    .iter()
                    .zip(&r.y_observed)
                    .map(|(a, b)| usize::from(a != b))
                    .sum();
                if diff > 0 {
                    corrupted += 1;
                }
                dist += diff as f64;
            }
        }
    }
    DatasetSummary {
        clean_train: counts[0],
        noisy_train: counts[1],
        dev: counts[2],
        test: counts[3],
        corrupted_fraction: if noisy > 0 { corrupted as f64 / noisy as f64 } else { 0.0 },
        mean_label_distance: if noisy > 0 { dist / noisy as f64 } else { 0.0 },
    }
}
