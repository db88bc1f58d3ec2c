//! Average precision per class and its mean over classes.
//!
//! AP ranks records by descending score (ties broken by ascending record
//! index so results are reproducible) and averages precision at every
//! positive hit. The mean skips classes without a single positive, so
//! all-negative background records still count against every class without
//! making any class undefined.

use crate::datagen::{Dataset, SplitSelector};
use crate::error::{Error, Result};
use crate::model::MLPClassifier;

/// Scores aligned with binary relevance, records by classes.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    scores: Vec<Vec<f64>>,
    truth: Vec<Vec<u8>>,
}

impl ScoreMatrix {
    pub fn new(scores: Vec<Vec<f64>>, truth: Vec<Vec<u8>>) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "{} score rows vs {} truth rows",
                scores.len(),
                truth.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Data("score matrix has no rows".into()));
        }
        let l = scores[0].len();
        if l == 0 {
            return Err(Error::Data("score matrix has no classes".into()));
        }
        for (i, (s, t)) in scores.iter().zip(&truth).enumerate() {
            if s.len() != l || t.len() != l {
                return Err(Error::Dimension(format!("row {i} is not {l} wide")));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("row {i} has a non-finite score")));
            }
            if t.iter().any(|&v| v > 1) {
                return Err(Error::Data(format!("row {i} has a non-binary truth entry")));
            }
        }
        Ok(ScoreMatrix { scores, truth })
    }

    pub fn record_count(&self) -> usize {
        self.scores.len()
    }

    pub fn label_count(&self) -> usize {
        self.scores[0].len()
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn truth(&self) -> &[Vec<u8>] {
        &self.truth
    }

    fn class_column(&self, class: usize) -> (Vec<f64>, Vec<u8>) {
        let s = self.scores.iter().map(|row| row[class]).collect();
        let t = self.truth.iter().map(|row| row[class]).collect();
        (s, t)
    }
}

/// Precision averaged over the positive hits of one ranked list.
pub fn average_precision(scores: &[f64], truth: &[u8]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} truth entries",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("scores must be finite".into()));
    }
    if truth.iter().any(|&v| v > 1) {
        return Err(Error::Data("truth entries must be 0 or 1".into()));
    }
    let positives = truth.iter().filter(|&&v| v == 1).count();
    if positives == 0 {
        return Err(Error::Data("no positives; average precision is undefined".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if truth[idx] == 1 {
            hits += 1;
            total += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

/// Mean AP over the classes that have at least one positive.
pub fn mean_average_precision(sm: &ScoreMatrix) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for class in 0..sm.label_count() {
        let (s, t) = sm.class_column(class);
        if t.iter().all(|&v| v == 0) {
            continue;
        }
        total += average_precision(&s, &t)?;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Data("no class has a positive; mAP is undefined".into()));
    }
    Ok(total / counted as f64)
}

/// Model probabilities over a split, paired with evaluation labels
/// (ground truth when stored, observed labels otherwise).
pub fn model_scores(
    model: &MLPClassifier,
    data: &Dataset,
    sel: SplitSelector,
) -> Result<ScoreMatrix> {
    let indices = data.indices(sel);
    if indices.is_empty() {
        return Err(Error::Data(format!("split {sel} has no records to evaluate")));
    }
    let mut scores = Vec::with_capacity(indices.len());
    let mut truth = Vec::with_capacity(indices.len());
    for i in indices {
        let rec = &data.records[i];
        scores.push(model.predict_proba(&rec.x)?);
        truth.push(rec.eval_labels().to_vec());
    }
    ScoreMatrix::new(scores, truth)
}

/// mAP of a model over one split.
pub fn split_map(model: &MLPClassifier, data: &Dataset, sel: SplitSelector) -> Result<f64> {
    mean_average_precision(&model_scores(model, data, sel)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Definitional AP without sorting: for every positive, count how many
    // items outrank it, then count positives at or above that rank.
    fn oracle_ap(scores: &[f64], truth: &[u8]) -> f64 {
        let n = scores.len();
        let rank_of = |i: usize| -> usize {
            let mut r = 1;
            for j in 0..n {
                if j != i && (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) {
                    r += 1;
                }
            }
            r
        };
        let mut total = 0.0;
        let mut positives = 0;
        for i in 0..n {
            if truth[i] != 1 {
                continue;
            }
            positives += 1;
            let ri = rank_of(i);
            let hits = (0..n).filter(|&p| truth[p] == 1 && rank_of(p) <= ri).count();
            total += hits as f64 / ri as f64;
        }
        total / positives as f64
    }

    #[test]
    fn ap_matches_hand_worked_example() {
        // Hits at ranks 1 and 3: (1/1 + 2/3) / 2.
        let ap = average_precision(&[0.9, 0.8, 0.7], &[1, 0, 1]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_and_worst_rankings() {
        let ap = average_precision(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(ap, 1.0);
        let ap = average_precision(&[0.1, 0.5, 0.6, 0.9], &[1, 0, 0, 0]).unwrap();
        assert_eq!(ap, 0.25);
    }

    #[test]
    fn ap_breaks_ties_by_ascending_index() {
        // Tied scores: index 0 ranks first. Positive at index 1 lands rank 2.
        let ap = average_precision(&[0.5, 0.5], &[0, 1]).unwrap();
        assert_eq!(ap, 0.5);
        let ap = average_precision(&[0.5, 0.5], &[1, 0]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_rejects_degenerate_inputs() {
        assert!(average_precision(&[0.1, 0.2], &[0, 0]).is_err());
        assert!(average_precision(&[0.1], &[0, 1]).is_err());
        assert!(average_precision(&[f64::NAN, 0.2], &[1, 0]).is_err());
        assert!(average_precision(&[0.1, 0.2], &[1, 2]).is_err());
    }

    #[test]
    fn ap_agrees_with_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n = rng.gen_range(1..=50);
            let mut truth: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
            if truth.iter().all(|&v| v == 0) {
                truth[rng.gen_range(0..n)] = 1;
            }
            // Coarse scores force plenty of ties.
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.gen_range(0..8) as f64) / 8.0).collect();
            let got = average_precision(&scores, &truth).unwrap();
            let want = oracle_ap(&scores, &truth);
            assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
        }
    }

    #[test]
    fn ap_is_invariant_under_monotone_score_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(2..=30);
            let mut truth: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            truth[0] = 1;
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
            let a = average_precision(&logits, &truth).unwrap();
            let b = average_precision(&probs, &truth).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn map_excludes_classes_without_positives() {
        let scores = vec![vec![0.9, 0.4, 0.3], vec![0.1, 0.6, 0.2]];
        let truth = vec![vec![1, 0, 0], vec![0, 0, 0]];
        let sm = ScoreMatrix::new(scores, truth).unwrap();
        // Classes 1 and 2 have no positives; mAP is class 0's AP alone.
        assert_eq!(mean_average_precision(&sm).unwrap(), 1.0);
    }

    #[test]
    fn map_of_perfect_scores_is_one() {
        let truth = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]];
        let scores: Vec<Vec<f64>> =
            truth.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let sm = ScoreMatrix::new(scores, truth).unwrap();
        assert_eq!(mean_average_precision(&sm).unwrap(), 1.0);
    }

    #[test]
    fn map_of_reversed_scores_matches_oracle() {
        let truth = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]];
        let scores: Vec<Vec<f64>> =
            truth.iter().map(|r| r.iter().map(|&v| 1.0 - v as f64).collect()).collect();
        let sm = ScoreMatrix::new(scores.clone(), truth.clone()).unwrap();
        let mut want = 0.0;
        for c in 0..2 {
            let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let t: Vec<u8> = truth.iter().map(|r| r[c]).collect();
            want += oracle_ap(&s, &t);
        }
        want /= 2.0;
        assert!((mean_average_precision(&sm).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn map_with_no_positives_anywhere_is_an_error() {
        let sm = ScoreMatrix::new(vec![vec![0.5, 0.5]], vec![vec![0, 0]]).unwrap();
        assert!(mean_average_precision(&sm).is_err());
    }

    #[test]
    fn score_matrix_validates_shapes_and_truth() {
        assert!(ScoreMatrix::new(vec![vec![0.5]], vec![vec![0], vec![1]]).is_err());
        assert!(ScoreMatrix::new(vec![vec![0.5, 0.1]], vec![vec![0]]).is_err());
        assert!(ScoreMatrix::new(vec![vec![0.5]], vec![vec![2]]).is_err());
        assert!(ScoreMatrix::new(vec![], vec![]).is_err());
        assert!(ScoreMatrix::new(vec![vec![f64::INFINITY]], vec![vec![1]]).is_err());
    }
}
