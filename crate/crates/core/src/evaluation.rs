//! Metrics: average class accuracy, average precision, tube overlap, and
//! AUC-versus-overlap-threshold curves.
//!
//! Conventions, chosen once and kept behind this module so they can be
//! swapped:
//!
//! - Spatio-temporal overlap between two tubes is the per-frame box IoU
//!   averaged over the union of their frame index sets, counting zero on
//!   frames where either tube is absent.
//! - Average precision is the non-interpolated variant: the mean over all
//!   positives of the precision at each positive's rank, with positives
//!   missing from the ranking contributing zero.
//! - The localization ROC at an overlap threshold is built by walking
//!   detections in descending score order with greedy matching to
//!   unmatched ground-truth tubes of the same class. True positive rate is
//!   the fraction of ground-truth tubes matched; the false positive count
//!   is normalized by the total number of detections (a threshold-
//!   independent denominator, so curves at different thresholds are
//!   comparable and the resulting AUC is non-increasing in the threshold).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{validate_tube, Prediction, TubeFrame};
use crate::{Error, Result};

/// Reference labels: one true action per video, optionally one
/// ground-truth tube per video.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    labels: BTreeMap<String, String>,
    tubes: BTreeMap<String, Vec<TubeFrame>>,
}

impl GroundTruth {
    /// Builds ground truth, validating every action name against
    /// `actions`.
    pub fn new(
        labels: impl IntoIterator<Item = (String, String)>,
        actions: &[String],
    ) -> Result<Self> {
        let known: BTreeSet<&String> = actions.iter().collect();
        let mut map = BTreeMap::new();
        for (video, action) in labels {
            if !known.contains(&action) {
                return Err(Error::invalid(format!(
                    "ground truth references unknown action {action:?} for video {video:?}"
                )));
            }
            map.insert(video, action);
        }
        Ok(GroundTruth {
            labels: map,
            tubes: BTreeMap::new(),
        })
    }

    /// Attaches a ground-truth tube to a labeled video.
    pub fn set_tube(&mut self, video: &str, frames: Vec<TubeFrame>) -> Result<()> {
        if !self.labels.contains_key(video) {
            return Err(Error::invalid(format!(
                "ground-truth tube for unlabeled video {video:?}"
            )));
        }
        validate_tube(&frames)?;
        self.tubes.insert(video.to_string(), frames);
        Ok(())
    }

    pub fn action_of(&self, video: &str) -> Option<&str> {
        self.labels.get(video).map(String::as_str)
    }

    pub fn tube_of(&self, video: &str) -> Option<&[TubeFrame]> {
        self.tubes.get(video).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels.iter().map(|(v, a)| (v.as_str(), a.as_str()))
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_tubes(&self) -> usize {
        self.tubes.len()
    }

    /// Video ids labeled with `action`.
    pub fn videos_of_action(&self, action: &str) -> BTreeSet<String> {
        self.labels
            .iter()
            .filter(|(_, a)| a.as_str() == action)
            .map(|(v, _)| v.clone())
            .collect()
    }
}

/// A named metric value with optional per-class breakdown and curve
/// points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Mean over classes of the per-class accuracy (not pooled accuracy), so
/// small classes weigh as much as large ones.
pub fn average_class_accuracy(
    predictions: &[Prediction],
    truth: &GroundTruth,
) -> Result<MetricReport> {
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    let missing: Vec<&str> = predictions
        .iter()
        .filter(|p| truth.action_of(&p.video_id).is_none())
        .map(|p| p.video_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "{} predicted video(s) have no ground truth (first: {:?})",
            missing.len(),
            missing[0]
        )));
    }
    let mut totals: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for prediction in predictions {
        let truth_action = truth.action_of(&prediction.video_id).expect("checked above");
        let entry = totals.entry(truth_action).or_insert((0, 0));
        entry.1 += 1;
        if prediction.chosen().0 == truth_action {
            entry.0 += 1;
        }
    }
    let per_class: Vec<(String, f64)> = totals
        .iter()
        .map(|(action, (correct, total))| (action.to_string(), *correct as f64 / *total as f64))
        .collect();
    let value = per_class.iter().map(|(_, a)| a).sum::<f64>() / per_class.len() as f64;
    Ok(MetricReport {
        metric: "average-class-accuracy".into(),
        value,
        per_class,
        curve: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Outcome of a single average-precision computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApOutcome {
    pub value: f64,
    /// Set when the positives set was empty; the value is then 0 by
    /// definition.
    pub no_positives: bool,
}

/// Non-interpolated average precision of a ranking against a positive
/// set.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], positives: &BTreeSet<String>) -> Result<ApOutcome> {
    if ranked.is_empty() {
        return Err(Error::invalid("cannot score an empty ranking"));
    }
    if positives.is_empty() {
        return Ok(ApOutcome {
            value: 0.0,
            no_positives: true,
        });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if positives.contains(item.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(ApOutcome {
        value: sum / positives.len() as f64,
        no_positives: false,
    })
}

/// Mean average precision over per-action rankings.
///
/// Videos not labeled with the action count as negatives. Actions whose
/// positive set is empty contribute AP 0 and a warning.
pub fn mean_average_precision(
    rankings: &[(String, Vec<String>)],
    truth: &GroundTruth,
) -> Result<MetricReport> {
    if rankings.is_empty() {
        return Err(Error::invalid("no rankings to evaluate"));
    }
    let mut per_class = Vec::with_capacity(rankings.len());
    let mut warnings = Vec::new();
    for (action, ranked) in rankings {
        let positives = truth.videos_of_action(action);
        let outcome = average_precision(ranked, &positives)?;
        if outcome.no_positives {
            warnings.push(format!("action {action:?} has no positive videos"));
        }
        per_class.push((action.clone(), outcome.value));
    }
    let value = per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64;
    Ok(MetricReport {
        metric: "mean-average-precision".into(),
        value,
        per_class,
        curve: Vec::new(),
        warnings,
    })
}

/// Mean per-frame box IoU over the union of the two tubes' frame index
/// sets, zero on frames where either tube is absent.
pub fn tube_overlap(a: &[TubeFrame], b: &[TubeFrame]) -> Result<f64> {
    validate_tube(a)?;
    validate_tube(b)?;
    let mut i = 0;
    let mut j = 0;
    let mut union_frames = 0usize;
    let mut iou_sum = 0.0;
    while i < a.len() || j < b.len() {
        union_frames += 1;
        match (a.get(i), b.get(j)) {
            (Some(fa), Some(fb)) if fa.frame == fb.frame => {
                iou_sum += box_iou(fa, fb);
                i += 1;
                j += 1;
            }
            (Some(fa), Some(fb)) if fa.frame < fb.frame => i += 1,
            (Some(_), Some(_)) => j += 1,
            (Some(_), None) => i += 1,
            (None, Some(_)) => j += 1,
            (None, None) => unreachable!("loop condition"),
        }
    }
    Ok(iou_sum / union_frames as f64)
}

fn box_iou(a: &TubeFrame, b: &TubeFrame) -> f64 {
    let ix = (a.x + a.width).min(b.x + b.width) - a.x.max(b.x);
    let iy = (a.y + a.height).min(b.y + b.height) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let intersection = ix * iy;
    let union = a.width * a.height + b.width * b.height - intersection;
    intersection / union
}

/// A localized detection ready for evaluation: predicted action, score,
/// and tube geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub video_id: String,
    pub action: String,
    pub score: f64,
    pub frames: Vec<TubeFrame>,
}

/// AUC of the localization ROC at each overlap threshold.
///
/// See the module documentation for the exact ROC construction. The
/// report's curve holds one `(threshold, auc)` point per input threshold;
/// its scalar value is the mean AUC over the thresholds.
pub fn auc_vs_threshold(
    detections: &[Detection],
    truth: &GroundTruth,
    thresholds: &[f64],
) -> Result<MetricReport> {
    if thresholds.is_empty() {
        return Err(Error::invalid("no overlap thresholds given"));
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("overlap thresholds must lie in [0, 1]"));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("overlap thresholds must be sorted ascending"));
    }
    let total_truth = truth.num_tubes();
    if total_truth == 0 {
        return Err(Error::invalid("ground truth has no tubes"));
    }
    for d in detections {
        validate_tube(&d.frames)?;
    }

    // Deterministic processing order: score desc, then video id, then
    // action name.
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .total_cmp(&detections[a].score)
            .then_with(|| detections[a].video_id.cmp(&detections[b].video_id))
            .then_with(|| detections[a].action.cmp(&detections[b].action))
            .then(a.cmp(&b))
    });

    let mut curve = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut matched: BTreeSet<&str> = BTreeSet::new();
        let mut outcomes = Vec::with_capacity(order.len());
        for &idx in &order {
            let d = &detections[idx];
            let hit = match (truth.tube_of(&d.video_id), truth.action_of(&d.video_id)) {
                (Some(gt_frames), Some(gt_action)) => {
                    gt_action == d.action
                        && !matched.contains(d.video_id.as_str())
                        && tube_overlap(&d.frames, gt_frames)? >= threshold
                }
                _ => false,
            };
            if hit {
                matched.insert(d.video_id.as_str());
            }
            outcomes.push(hit);
        }
        curve.push((threshold, roc_auc(&outcomes, total_truth)));
    }

    let value = curve.iter().map(|(_, v)| v).sum::<f64>() / curve.len() as f64;
    Ok(MetricReport {
        metric: "auc-vs-overlap-threshold".into(),
        value,
        per_class: Vec::new(),
        curve,
        warnings: Vec::new(),
    })
}

/// Area under the staircase ROC of a detection outcome sequence.
///
/// `outcomes` is ordered by descending score; x steps by 1/len per false
/// positive, y by 1/total_truth per true positive, and the curve is
/// extended horizontally to x = 1.
fn roc_auc(outcomes: &[bool], total_truth: usize) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let fp_step = 1.0 / outcomes.len() as f64;
    let tp_step = 1.0 / total_truth as f64;
    let mut tpr = 0.0;
    let mut fpr = 0.0;
    let mut area = 0.0;
    for &hit in outcomes {
        if hit {
            tpr += tp_step;
        } else {
            area += tpr * fp_step;
            fpr += fp_step;
        }
    }
    area + tpr * (1.0 - fpr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn actions(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn truth_of(pairs: &[(&str, &str)], action_list: &[&str]) -> GroundTruth {
        GroundTruth::new(
            pairs.iter().map(|(v, a)| (v.to_string(), a.to_string())),
            &actions(action_list),
        )
        .unwrap()
    }

    fn prediction(video: &str, action: &str) -> Prediction {
        Prediction {
            video_id: video.to_string(),
            ranked: vec![(action.to_string(), 1.0)],
            tube_id: None,
        }
    }

    fn strip(frames: &[(u64, f64)]) -> Vec<TubeFrame> {
        frames
            .iter()
            .map(|&(f, x)| TubeFrame::new(f, x, 0.0, 10.0, 10.0).unwrap())
            .collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = truth_of(&[("v1", "a"), ("v2", "b")], &["a", "b"]);
        let predictions = vec![prediction("v1", "a"), prediction("v2", "b")];
        let report = average_class_accuracy(&predictions, &truth).unwrap();
        assert_eq!(report.value, 1.0);
    }

    #[test]
    fn class_accuracy_ignores_class_sizes() {
        // Class a: 4 correct of 4; class b: 0 correct of 1. Mean = 0.5
        // regardless of supports.
        let truth = truth_of(
            &[("v1", "a"), ("v2", "a"), ("v3", "a"), ("v4", "a"), ("v5", "b")],
            &["a", "b"],
        );
        let predictions = vec![
            prediction("v1", "a"),
            prediction("v2", "a"),
            prediction("v3", "a"),
            prediction("v4", "a"),
            prediction("v5", "a"),
        ];
        let report = average_class_accuracy(&predictions, &truth).unwrap();
        assert_eq!(report.value, 0.5);
    }

    #[test]
    fn class_accuracy_matches_hand_tally_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let classes = ["a", "b", "c"];
        for _ in 0..20 {
            let pairs: Vec<(String, String)> = (0..30)
                .map(|i| {
                    (
                        format!("v{i}"),
                        classes[rng.random_range(0..3)].to_string(),
                    )
                })
                .collect();
            let truth = GroundTruth::new(pairs.clone(), &actions(&classes)).unwrap();
            let predictions: Vec<Prediction> = pairs
                .iter()
                .map(|(v, _)| prediction(v, classes[rng.random_range(0..3)]))
                .collect();
            let report = average_class_accuracy(&predictions, &truth).unwrap();

            // Oracle: explicit per-class tally.
            let mut expected = 0.0;
            let mut class_count = 0;
            for class in classes {
                let members: Vec<&(String, String)> =
                    pairs.iter().filter(|(_, a)| a == class).collect();
                if members.is_empty() {
                    continue;
                }
                class_count += 1;
                let correct = members
                    .iter()
                    .filter(|(v, a)| {
                        predictions
                            .iter()
                            .find(|p| &p.video_id == v)
                            .map(|p| &p.chosen().0 == a)
                            .unwrap_or(false)
                    })
                    .count();
                expected += correct as f64 / members.len() as f64;
            }
            expected /= class_count as f64;
            assert!((report.value - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn class_accuracy_equals_pooled_accuracy_on_equal_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let classes = ["a", "b", "c"];
        let pairs: Vec<(String, String)> = (0..30)
            .map(|i| (format!("v{i}"), classes[i % 3].to_string()))
            .collect();
        let truth = GroundTruth::new(pairs.clone(), &actions(&classes)).unwrap();
        let predictions: Vec<Prediction> = pairs
            .iter()
            .map(|(v, _)| prediction(v, classes[rng.random_range(0..3)]))
            .collect();
        let report = average_class_accuracy(&predictions, &truth).unwrap();
        let pooled = predictions
            .iter()
            .filter(|p| truth.action_of(&p.video_id) == Some(p.chosen().0.as_str()))
            .count() as f64
            / predictions.len() as f64;
        assert!((report.value - pooled).abs() < 1e-12);
    }

    #[test]
    fn ap_is_a_function_of_the_induced_ranking_only() {
        // Scoring items and ranking them yields the same AP regardless of
        // the order the scored items arrived in.
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        for _ in 0..20 {
            let mut scored: Vec<(String, f64)> = (0..12)
                .map(|i| (format!("v{i}"), rng.random::<f64>()))
                .collect();
            let pos = positives(&["v0", "v3", "v7"]);
            let rank = |items: &[(String, f64)]| {
                let mut sorted = items.to_vec();
                sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let ids: Vec<String> = sorted.into_iter().map(|(id, _)| id).collect();
                average_precision(&ids, &pos).unwrap().value
            };
            let forward = rank(&scored);
            scored.reverse();
            assert_eq!(rank(&scored), forward);
        }
    }

    #[test]
    fn class_accuracy_requires_ground_truth_for_every_prediction() {
        let truth = truth_of(&[("v1", "a")], &["a"]);
        let err =
            average_class_accuracy(&[prediction("v1", "a"), prediction("vX", "a")], &truth)
                .unwrap_err();
        assert!(err.to_string().contains("vX"), "{err}");
    }

    fn positives(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ap_is_one_when_positives_lead() {
        let ranked = ["p1", "p2", "n1", "n2"];
        let outcome = average_precision(&ranked, &positives(&["p1", "p2"])).unwrap();
        assert_eq!(outcome.value, 1.0);
    }

    #[test]
    fn ap_single_positive_at_rank_two_is_half() {
        let ranked = ["n1", "p1"];
        let outcome = average_precision(&ranked, &positives(&["p1"])).unwrap();
        assert_eq!(outcome.value, 0.5);
    }

    #[test]
    fn ap_zero_positives_flags_a_warning() {
        let ranked = ["n1", "n2"];
        let outcome = average_precision(&ranked, &positives(&[])).unwrap();
        assert_eq!(outcome.value, 0.0);
        assert!(outcome.no_positives);
    }

    #[test]
    fn ap_matches_definition_on_random_rankings() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..50 {
            let mut items: Vec<String> = (0..10).map(|i| format!("v{i}")).collect();
            // Fisher-Yates with the seeded stream.
            for i in (1..items.len()).rev() {
                let j = rng.random_range(0..=i);
                items.swap(i, j);
            }
            let pos = positives(&["v0", "v1", "v2"]);
            let outcome = average_precision(&items, &pos).unwrap();
            // Oracle: direct summation over positive ranks.
            let mut hits = 0;
            let mut sum = 0.0;
            for (rank0, item) in items.iter().enumerate() {
                if pos.contains(item) {
                    hits += 1;
                    sum += hits as f64 / (rank0 + 1) as f64;
                }
            }
            assert!((outcome.value - sum / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_tubes_overlap_fully() {
        let a = strip(&[(0, 0.0), (1, 0.0), (2, 0.0)]);
        assert_eq!(tube_overlap(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn temporally_disjoint_tubes_do_not_overlap() {
        let a = strip(&[(0, 0.0), (1, 0.0)]);
        let b = strip(&[(5, 0.0), (6, 0.0)]);
        assert_eq!(tube_overlap(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn half_span_overlap_is_one_third() {
        // Equal length L = 10, overlapping L/2 = 5 frames with identical
        // boxes; union is 15 frames, so the overlap is 5/15 = 1/3.
        let a = strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>());
        let b = strip(&(5..15).map(|f| (f, 0.0)).collect::<Vec<_>>());
        let overlap = tube_overlap(&a, &b).unwrap();
        assert!((overlap - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for _ in 0..20 {
            let a = strip(
                &(0..rng.random_range(1..8))
                    .map(|f| (f * 2, rng.random_range(0.0..15.0)))
                    .collect::<Vec<_>>(),
            );
            let b = strip(
                &(0..rng.random_range(1..8))
                    .map(|f| (f * 3, rng.random_range(0.0..15.0)))
                    .collect::<Vec<_>>(),
            );
            let ab = tube_overlap(&a, &b).unwrap();
            let ba = tube_overlap(&b, &a).unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn only_identical_tubes_reach_full_overlap() {
        let a = strip(&[(0, 0.0), (1, 0.0)]);
        let shifted = strip(&[(0, 0.0), (1, 2.0)]);
        assert!(tube_overlap(&a, &shifted).unwrap() < 1.0);
        let longer = strip(&[(0, 0.0), (1, 0.0), (2, 0.0)]);
        assert!(tube_overlap(&a, &longer).unwrap() < 1.0);
    }

    #[test]
    fn overlap_rejects_degenerate_boxes() {
        let good = strip(&[(0, 0.0)]);
        let bad = vec![TubeFrame {
            frame: 0,
            x: 0.0,
            y: 0.0,
            width: 0.0,
            height: 5.0,
        }];
        assert!(tube_overlap(&good, &bad).is_err());
    }

    fn detection(video: &str, action: &str, score: f64, frames: Vec<TubeFrame>) -> Detection {
        Detection {
            video_id: video.to_string(),
            action: action.to_string(),
            score,
            frames,
        }
    }

    fn localization_truth() -> GroundTruth {
        let mut truth = truth_of(
            &[("v1", "run"), ("v2", "swim"), ("v3", "run")],
            &["run", "swim"],
        );
        truth
            .set_tube("v1", strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>()))
            .unwrap();
        truth
            .set_tube("v2", strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>()))
            .unwrap();
        truth
            .set_tube("v3", strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>()))
            .unwrap();
        truth
    }

    #[test]
    fn perfect_detections_give_constant_maximal_curve() {
        let truth = localization_truth();
        let detections = vec![
            detection("v1", "run", 0.9, strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>())),
            detection("v2", "swim", 0.8, strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>())),
            detection("v3", "run", 0.7, strip(&(0..10).map(|f| (f, 0.0)).collect::<Vec<_>>())),
        ];
        let report =
            auc_vs_threshold(&detections, &truth, &[0.1, 0.3, 0.5, 0.9]).unwrap();
        for (theta, auc) in &report.curve {
            assert_eq!(*auc, 1.0, "theta {theta}");
        }
    }

    #[test]
    fn hopeless_detections_give_a_zero_curve() {
        let truth = localization_truth();
        let detections = vec![
            detection("v1", "run", 0.9, strip(&[(500, 0.0)])),
            detection("v2", "run", 0.8, strip(&[(500, 0.0)])),
        ];
        let report = auc_vs_threshold(&detections, &truth, &[0.1, 0.5]).unwrap();
        for (_, auc) in &report.curve {
            assert_eq!(*auc, 0.0);
        }
    }

    #[test]
    fn auc_curve_matches_reimplementation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let truth = localization_truth();
        let thresholds = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        for _ in 0..20 {
            let mut detections = Vec::new();
            for v in ["v1", "v2", "v3"] {
                for d in 0..2 {
                    let start = rng.random_range(0..12u64);
                    let frames = strip(
                        &(start..start + 5)
                            .map(|f| (f, rng.random_range(0.0..6.0)))
                            .collect::<Vec<_>>(),
                    );
                    let action = if rng.random::<bool>() { "run" } else { "swim" };
                    detections.push(detection(v, action, rng.random::<f64>(), frames));
                    let _ = d;
                }
            }
            let report = auc_vs_threshold(&detections, &truth, &thresholds).unwrap();

            // Oracle: independent pass with explicit loops.
            let mut order: Vec<usize> = (0..detections.len()).collect();
            order.sort_by(|&a, &b| {
                detections[b]
                    .score
                    .total_cmp(&detections[a].score)
                    .then_with(|| detections[a].video_id.cmp(&detections[b].video_id))
                    .then_with(|| detections[a].action.cmp(&detections[b].action))
                    .then(a.cmp(&b))
            });
            for (ti, &theta) in thresholds.iter().enumerate() {
                let mut used: BTreeSet<String> = BTreeSet::new();
                let mut tp = 0.0;
                let mut fp = 0.0;
                let mut area = 0.0;
                for &i in &order {
                    let d = &detections[i];
                    let ok = truth.action_of(&d.video_id) == Some(d.action.as_str())
                        && !used.contains(&d.video_id)
                        && tube_overlap(&d.frames, truth.tube_of(&d.video_id).unwrap()).unwrap()
                            >= theta;
                    if ok {
                        used.insert(d.video_id.clone());
                        tp += 1.0 / truth.num_tubes() as f64;
                    } else {
                        area += tp / detections.len() as f64;
                        fp += 1.0 / detections.len() as f64;
                    }
                }
                area += tp * (1.0 - fp);
                let got = report.curve[ti].1;
                assert!((got - area).abs() < 1e-12, "theta {theta}: {got} vs {area}");
            }

            // Monotone non-increasing in the threshold.
            for pair in report.curve.windows(2) {
                assert!(pair[1].1 <= pair[0].1 + 1e-12, "{:?}", report.curve);
            }
        }
    }

    #[test]
    fn thresholds_are_validated() {
        let truth = localization_truth();
        let d = vec![detection("v1", "run", 1.0, strip(&[(0, 0.0)]))];
        assert!(auc_vs_threshold(&d, &truth, &[]).is_err());
        assert!(auc_vs_threshold(&d, &truth, &[0.5, 0.1]).is_err());
        assert!(auc_vs_threshold(&d, &truth, &[1.5]).is_err());
    }
}
