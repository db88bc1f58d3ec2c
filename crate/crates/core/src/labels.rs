//! Pseudo-label construction for training on noisy annotations.
//!
//! The core recipe blends observed labels with an auxiliary signal:
//! `target = lambda * y + (1 - lambda) * s`, where `s` comes from a model
//! trained on trusted annotations (optionally softened by a temperature and
//! propagated through a label-relation matrix), from a uniform prior, or
//! from the student's own predictions refreshed every epoch.

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, SplitSelector};
use crate::error::{Error, Result};
use crate::kgraph::RelationMatrix;
use crate::model::MLPClassifier;
use crate::numerics::Matrix;

/// How training targets are assembled for each record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Observed labels as-is.
    Noisy,
    /// Blend of observed labels and a fixed teacher's soft predictions.
    Distill,
    /// Distillation with the soft predictions propagated through a
    /// label-relation matrix first.
    GuidedDistill,
    /// Blend of observed labels and the uniform prior `1/L`.
    Smooth,
    /// Blend of observed labels and the student's own current predictions,
    /// recomputed at every epoch.
    Bootstrap,
    /// Ground-truth labels (diagnostic upper bound).
    CleanTruth,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Strategy::Noisy => "noisy",
            Strategy::Distill => "distill",
            Strategy::GuidedDistill => "guided-distill",
            Strategy::Smooth => "smooth",
            Strategy::Bootstrap => "bootstrap",
            Strategy::CleanTruth => "clean-truth",
        };
        f.write_str(name)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda = {lambda} must be in [0, 1]")));
    }
    Ok(())
}

fn check_same_len(y: &[f64], s: &[f64]) -> Result<()> {
    if y.len() != s.len() {
        return Err(Error::Dimension(format!(
            "label vector has {} entries but soft vector has {}",
            y.len(),
            s.len()
        )));
    }
    Ok(())
}

/// `lambda * y + (1 - lambda) * s`.
pub fn pseudo_distill(y: &[f64], s: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_same_len(y, s)?;
    Ok(y.iter().zip(s).map(|(yi, si)| lambda * yi + (1.0 - lambda) * si).collect())
}

/// `lambda * y + (1 - lambda) / L`: the degenerate blend with a flat prior.
pub fn pseudo_smooth(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if y.is_empty() {
        return Err(Error::Dimension("label vector is empty".into()));
    }
    let u = 1.0 / y.len() as f64;
    Ok(y.iter().map(|yi| lambda * yi + (1.0 - lambda) * u).collect())
}

/// Blend with the model's own prediction for the same input.
pub fn pseudo_bootstrap(y: &[f64], own_pred: &[f64], lambda: f64) -> Result<Vec<f64>> {
    pseudo_distill(y, own_pred, lambda)
}

/// Propagates soft predictions through the relation matrix: `s_hat = G s`.
pub fn guided_soft(matrix: &RelationMatrix, s: &[f64]) -> Result<Vec<f64>> {
    matrix.apply(s)
}

/// Balances the two target sources by the relative dev-set quality of the
/// models trained on them: `lambda = map_clean / (map_clean + map_noisy)`.
///
/// The weaker the teacher relative to the noisy baseline, the smaller the
/// lambda, shifting weight onto the observed labels' counterpart term.
pub fn lambda_heuristic(map_clean: f64, map_noisy: f64) -> Result<f64> {
    if !map_clean.is_finite() || !map_noisy.is_finite() {
        return Err(Error::Numeric("quality scores must be finite".into()));
    }
    if map_clean < 0.0 || map_noisy < 0.0 {
        return Err(Error::Parameter("quality scores must be non-negative".into()));
    }
    let denom = map_clean + map_noisy;
    if denom <= 0.0 {
        return Err(Error::Parameter(
            "quality scores sum to zero; lambda is undefined".into(),
        ));
    }
    Ok(map_clean / denom)
}

/// Declarative recipe for a target provider.
#[derive(Debug, Clone)]
pub struct PseudoLabelSpec {
    pub strategy: Strategy,
    pub lambda: f64,
    pub temperature: f64,
    /// Required by [`Strategy::GuidedDistill`], ignored otherwise.
    pub relation_matrix: Option<RelationMatrix>,
}

impl PseudoLabelSpec {
    pub fn new(strategy: Strategy, lambda: f64) -> Self {
        PseudoLabelSpec { strategy, lambda, temperature: 1.0, relation_matrix: None }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_relation_matrix(mut self, m: RelationMatrix) -> Self {
        self.relation_matrix = Some(m);
        self
    }
}

/// Supplies the training target for each record index of a dataset.
///
/// `epoch_refresh` runs once per epoch (including the evaluation-only epoch
/// 0) with the current model, letting self-referential schemes update.
pub trait TargetProvider {
    fn label_count(&self) -> usize;
    fn target(&self, record_idx: usize) -> Result<&[f64]>;
    fn epoch_refresh(&mut self, _model: &MLPClassifier) -> Result<()> {
        Ok(())
    }
}

/// Precomputed targets, stored sparsely by record index.
pub struct FixedTargetProvider {
    label_count: usize,
    targets: Vec<Option<Vec<f64>>>,
}

impl FixedTargetProvider {
    pub fn new(label_count: usize, record_count: usize) -> Self {
        FixedTargetProvider { label_count, targets: vec![None; record_count] }
    }

    pub fn set(&mut self, record_idx: usize, target: Vec<f64>) -> Result<()> {
        if target.len() != self.label_count {
            return Err(Error::Dimension(format!(
                "target has {} entries, expected {}",
                target.len(),
                self.label_count
            )));
        }
        if record_idx >= self.targets.len() {
            return Err(Error::Lookup(format!("record index {record_idx} out of range")));
        }
        self.targets[record_idx] = Some(target);
        Ok(())
    }

    /// Observed labels of the selected records, unchanged.
    pub fn from_observed(data: &Dataset, sel: SplitSelector) -> Self {
        let mut p = FixedTargetProvider::new(data.label_count(), data.records.len());
        for i in data.indices(sel) {
            p.targets[i] = Some(data.records[i].y_observed_f64());
        }
        p
    }

    /// Ground-truth labels where present, observed labels otherwise.
    pub fn from_truth(data: &Dataset, sel: SplitSelector) -> Self {
        let mut p = FixedTargetProvider::new(data.label_count(), data.records.len());
        for i in data.indices(sel) {
            p.targets[i] = Some(data.records[i].eval_labels_f64());
        }
        p
    }
}

impl TargetProvider for FixedTargetProvider {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn target(&self, record_idx: usize) -> Result<&[f64]> {
        self.targets
            .get(record_idx)
            .and_then(|t| t.as_deref())
            .ok_or_else(|| Error::Lookup(format!("no target stored for record {record_idx}")))
    }
}

/// Self-referential targets: `lambda * y + (1 - lambda) * student(x)`,
/// recomputed from the current model at every epoch.
pub struct BootstrapProvider {
    label_count: usize,
    lambda: f64,
    /// (record index, input, observed labels) for the training selection.
    rows: Vec<(usize, Vec<f64>, Vec<f64>)>,
    targets: Vec<Option<Vec<f64>>>,
}

impl BootstrapProvider {
    pub fn new(data: &Dataset, sel: SplitSelector, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let rows: Vec<_> = data
            .indices(sel)
            .into_iter()
            .map(|i| (i, data.records[i].x.clone(), data.records[i].y_observed_f64()))
            .collect();
        if rows.is_empty() {
            return Err(Error::Data(format!("selected split {sel} has no records")));
        }
        Ok(BootstrapProvider {
            label_count: data.label_count(),
            lambda,
            rows,
            targets: vec![None; data.records.len()],
        })
    }
}

impl TargetProvider for BootstrapProvider {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn target(&self, record_idx: usize) -> Result<&[f64]> {
        self.targets
            .get(record_idx)
            .and_then(|t| t.as_deref())
            .ok_or_else(|| Error::Lookup(format!("no target stored for record {record_idx}")))
    }

    fn epoch_refresh(&mut self, model: &MLPClassifier) -> Result<()> {
        for (idx, x, y) in &self.rows {
            let pred = model.predict_proba(x)?;
            self.targets[*idx] = Some(pseudo_bootstrap(y, &pred, self.lambda)?);
        }
        Ok(())
    }
}

/// Materializes the provider for a strategy over the selected records.
///
/// `teacher` is required for the distillation strategies and ignored
/// otherwise; its soft predictions use `spec.temperature`.
pub fn build_target_provider(
    spec: &PseudoLabelSpec,
    data: &Dataset,
    sel: SplitSelector,
    teacher: Option<&MLPClassifier>,
) -> Result<Box<dyn TargetProvider>> {
    check_lambda(spec.lambda)?;
    let indices = data.indices(sel);
    if indices.is_empty() {
        return Err(Error::Data(format!("selected split {sel} has no records")));
    }
    match spec.strategy {
        Strategy::Noisy => Ok(Box::new(FixedTargetProvider::from_observed(data, sel))),
        Strategy::CleanTruth => {
            for &i in &indices {
                if data.records[i].y_true.is_none() {
                    return Err(Error::Data(format!(
                        "record {} has no ground-truth labels",
                        data.records[i].id
                    )));
                }
            }
            Ok(Box::new(FixedTargetProvider::from_truth(data, sel)))
        }
        Strategy::Smooth => {
            let mut p = FixedTargetProvider::new(data.label_count(), data.records.len());
            for i in indices {
                let y = data.records[i].y_observed_f64();
                p.set(i, pseudo_smooth(&y, spec.lambda)?)?;
            }
            Ok(Box::new(p))
        }
        Strategy::Bootstrap => Ok(Box::new(BootstrapProvider::new(data, sel, spec.lambda)?)),
        Strategy::Distill | Strategy::GuidedDistill => {
            let teacher = teacher.ok_or_else(|| {
                Error::Config(format!("strategy {} needs a teacher model", spec.strategy))
            })?;
            let matrix = match spec.strategy {
                Strategy::GuidedDistill => Some(spec.relation_matrix.as_ref().ok_or_else(|| {
                    Error::Config("guided-distill needs a relation matrix".into())
                })?),
                _ => None,
            };
            if let Some(m) = matrix {
                if m.labels() != data.labels.as_slice() {
                    return Err(Error::Config(
                        "relation matrix labels do not match the dataset".into(),
                    ));
                }
            }
            let mut p = FixedTargetProvider::new(data.label_count(), data.records.len());
            for i in indices {
                let rec = &data.records[i];
                let mut s = teacher.soft_predict(&rec.x, spec.temperature)?;
                if let Some(m) = matrix {
                    s = m.apply(&s)?;
                }
                p.set(i, pseudo_distill(&rec.y_observed_f64(), &s, spec.lambda)?)?;
            }
            Ok(Box::new(p))
        }
    }
}

/// Dense pseudo-label matrix (records x labels) for the selected records,
/// row order following `data.indices(sel)`. Handy for risk analysis.
pub fn pseudo_label_matrix(
    spec: &PseudoLabelSpec,
    data: &Dataset,
    sel: SplitSelector,
    teacher: Option<&MLPClassifier>,
) -> Result<Matrix> {
    let provider = build_target_provider(spec, data, sel, teacher)?;
    let indices = data.indices(sel);
    let mut m = Matrix::zeros(indices.len(), data.label_count());
    for (r, &i) in indices.iter().enumerate() {
        m.row_mut(r).copy_from_slice(provider.target(i)?);
    }
    Ok(m)
}
