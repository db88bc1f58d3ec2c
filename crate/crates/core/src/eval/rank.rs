//! Ranking a class's observed positives by their pseudo-label value.
//!
//! With noisy annotations, an "observed positive" may be wrong. Sorting
//! those records by the blended target for that class surfaces the likely
//! true positives at the top and the likely annotation mistakes at the
//! bottom, where they can be audited.

use crate::datagen::{Dataset, SplitSelector};
use crate::error::{Error, Result};
use crate::labels::{build_target_provider, PseudoLabelSpec, Strategy};
use crate::model::MLPClassifier;

/// One record in a ranking, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    /// 1-based position.
    pub rank: usize,
    pub id: String,
    /// Pseudo-label value for the ranked class.
    pub pseudo: f64,
    /// Ground truth for the class, when the dataset stores it.
    pub truth: Option<u8>,
    /// Observed annotation (1 for every ranked record, by construction).
    pub observed: u8,
}

/// Ranks the training-pool records observed positive for `class_index` by
/// descending pseudo-label value (ties by ascending record id).
///
/// Only the distillation strategies make sense here; the auxiliary model
/// supplies the signal that can disagree with the observed annotation.
pub fn rank_by_pseudo(
    data: &Dataset,
    class_index: usize,
    spec: &PseudoLabelSpec,
    teacher: &MLPClassifier,
) -> Result<Vec<RankEntry>> {
    if !matches!(spec.strategy, Strategy::Distill | Strategy::GuidedDistill) {
        return Err(Error::Parameter(format!(
            "ranking requires the distill or guided-distill strategy, got {}",
            spec.strategy
        )));
    }
    if class_index >= data.label_count() {
        return Err(Error::Lookup(format!(
            "class index {class_index} out of range for {} classes",
            data.label_count()
        )));
    }
    let provider = build_target_provider(spec, data, SplitSelector::TrainPool, Some(teacher))?;
    let mut entries = Vec::new();
    for i in data.indices(SplitSelector::TrainPool) {
        let rec = &data.records[i];
        if rec.y_observed[class_index] != 1 {
            continue;
        }
        entries.push(RankEntry {
            rank: 0,
            id: rec.id.clone(),
            pseudo: provider.target(i)?[class_index],
            truth: rec.y_true.as_ref().map(|y| y[class_index]),
            observed: 1,
        });
    }
    if entries.is_empty() {
        return Err(Error::Data(format!(
            "class {:?} has no observed positives in the training pool",
            data.labels[class_index]
        )));
    }
    entries.sort_by(|a, b| {
        b.pseudo.partial_cmp(&a.pseudo).expect("finite pseudo values").then(a.id.cmp(&b.id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(entries)
}

/// CSV rendering: `rank,id,pseudo,true,observed` (truth blank if unknown).
pub fn ranking_csv(entries: &[RankEntry]) -> String {
    let mut out = String::from("rank,id,pseudo,true,observed\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.rank,
            e.id,
            e.pseudo,
            e.truth.map(|t| t.to_string()).unwrap_or_default(),
            e.observed
        ));
    }
    out
}
