//! Scoring and decision rules: classification, retrieval ranking, and
//! spatio-temporal localization.
//!
//! The action score of a score vector p under affinity matrix g is the
//! affinity-weighted sum over objects, `score_z = sum_y p_y * g_yz`; the
//! predicted action is the argmax over z. Localization extends the same
//! rule to tube proposals by maximizing jointly over actions and tubes.
//! Every ranking here is total and deterministic: ties break toward the
//! lower action index, lower tube index, or lexicographically smaller
//! video id.

use serde::{Deserialize, Serialize};

use crate::evaluation;
use crate::translation::{AffinityMatrix, ObjectScores};
use crate::{Error, Result};

/// One frame of a spatio-temporal tube: frame index plus a pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeFrame {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl TubeFrame {
    pub fn new(frame: u64, x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::invalid(format!(
                "frame {frame}: box must have positive width and height, got {width}x{height}"
            )));
        }
        if ![x, y, width, height].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("frame {frame}: box has non-finite coordinates")));
        }
        Ok(TubeFrame {
            frame,
            x,
            y,
            width,
            height,
        })
    }
}

/// Checks that `frames` is a valid tube: nonempty, strictly increasing
/// frame indices, positive boxes.
pub fn validate_tube(frames: &[TubeFrame]) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::invalid("tube has no frames"));
    }
    for pair in frames.windows(2) {
        if pair[1].frame <= pair[0].frame {
            return Err(Error::invalid(format!(
                "tube frame indices must be strictly increasing ({} then {})",
                pair[0].frame, pair[1].frame
            )));
        }
    }
    for f in frames {
        TubeFrame::new(f.frame, f.x, f.y, f.width, f.height)?;
    }
    Ok(())
}

/// A sampled action proposal: a box sequence plus its object scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeProposal {
    video_id: String,
    tube_id: String,
    frames: Vec<TubeFrame>,
    scores: ObjectScores,
}

impl TubeProposal {
    pub fn new(
        video_id: impl Into<String>,
        tube_id: impl Into<String>,
        frames: Vec<TubeFrame>,
        scores: ObjectScores,
    ) -> Result<Self> {
        validate_tube(&frames)?;
        Ok(TubeProposal {
            video_id: video_id.into(),
            tube_id: tube_id.into(),
            frames,
            scores,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn tube_id(&self) -> &str {
        &self.tube_id
    }

    pub fn frames(&self) -> &[TubeFrame] {
        &self.frames
    }

    pub fn scores(&self) -> &ObjectScores {
        &self.scores
    }

    /// Replaces the scores, keeping geometry; used when the score
    /// preparation pipeline runs over proposals.
    pub fn with_scores(&self, scores: ObjectScores) -> Self {
        TubeProposal {
            video_id: self.video_id.clone(),
            tube_id: self.tube_id.clone(),
            frames: self.frames.clone(),
            scores,
        }
    }
}

/// A ranked decision for one video.
///
/// `ranked` is sorted by descending score, ties by ascending action index;
/// the chosen action is the first entry. Localization predictions also
/// carry the chosen tube id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub ranked: Vec<(String, f64)>,
    pub tube_id: Option<String>,
}

impl Prediction {
    /// The winning (action, score) pair.
    pub fn chosen(&self) -> &(String, f64) {
        &self.ranked[0]
    }
}

/// Action scores for one score vector: the matrix-vector product
/// `p^T g`.
pub fn score_actions(scores: &ObjectScores, affinity: &AffinityMatrix) -> Result<Vec<f64>> {
    if scores.len() != affinity.num_objects() {
        return Err(Error::invalid(format!(
            "score vector has {} objects, affinity matrix has {}",
            scores.len(),
            affinity.num_objects()
        )));
    }
    let n = affinity.num_actions();
    let mut totals = vec![0.0; n];
    for (object, &p) in scores.values().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = affinity.object_row(object);
        for (total, &g) in totals.iter_mut().zip(row) {
            *total += p * g;
        }
    }
    Ok(totals)
}

/// Ranks `action_scores` by descending value, ties toward the lower index.
fn rank_actions(action_scores: &[f64], affinity: &AffinityMatrix) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..action_scores.len()).collect();
    order.sort_by(|&a, &b| action_scores[b].total_cmp(&action_scores[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .map(|i| (affinity.actions()[i].clone(), action_scores[i]))
        .collect()
}

/// Classifies one video: full action ranking with the argmax first.
pub fn classify(
    video_id: &str,
    scores: &ObjectScores,
    affinity: &AffinityMatrix,
) -> Result<Prediction> {
    let action_scores = score_actions(scores, affinity)?;
    Ok(Prediction {
        video_id: video_id.to_string(),
        ranked: rank_actions(&action_scores, affinity),
        tube_id: None,
    })
}

/// Ranks videos by their score for one action, descending; ties by
/// ascending video id.
pub fn retrieve(
    videos: &[(String, ObjectScores)],
    action: &str,
    affinity: &AffinityMatrix,
) -> Result<Vec<(String, f64)>> {
    if videos.is_empty() {
        return Err(Error::invalid("cannot rank an empty video list"));
    }
    let index = affinity
        .action_index(action)
        .ok_or_else(|| Error::invalid(format!("unknown action {action:?}")))?;
    let mut ranked: Vec<(String, f64)> = videos
        .iter()
        .map(|(id, scores)| {
            let s = score_actions(scores, affinity)?;
            Ok((id.clone(), s[index]))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Localizes by maximizing jointly over actions and tube proposals of one
/// video.
///
/// All tubes must belong to the same video. The returned prediction holds
/// the winning tube's full action ranking, winning pair first.
pub fn localize(tubes: &[TubeProposal], affinity: &AffinityMatrix) -> Result<Prediction> {
    let first = tubes
        .first()
        .ok_or_else(|| Error::invalid("cannot localize with an empty tube list"))?;
    if tubes.iter().any(|t| t.video_id() != first.video_id()) {
        return Err(Error::invalid("localize expects tubes from a single video"));
    }
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for (tube_index, tube) in tubes.iter().enumerate() {
        let action_scores = score_actions(tube.scores(), affinity)?;
        let top = action_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let replace = match &best {
            None => true,
            Some((score, ..)) => top > *score,
        };
        if replace {
            best = Some((top, tube_index, action_scores));
        }
    }
    let (_, tube_index, action_scores) = best.expect("tube list is nonempty");
    let tube = &tubes[tube_index];
    Ok(Prediction {
        video_id: tube.video_id().to_string(),
        ranked: rank_actions(&action_scores, affinity),
        tube_id: Some(tube.tube_id().to_string()),
    })
}

/// Greedy non-maximum suppression over a video's tube proposals.
///
/// Tubes are visited in descending best-action score order (ties toward
/// the lower tube index); a tube is kept when its overlap with every kept
/// tube stays below `nms_overlap`. At most `limit` detections are
/// returned, each with the surviving tube's full action ranking.
pub fn top_detections(
    tubes: &[TubeProposal],
    affinity: &AffinityMatrix,
    limit: usize,
    nms_overlap: f64,
) -> Result<Vec<Prediction>> {
    if limit == 0 {
        return Err(Error::invalid("detection limit must be >= 1"));
    }
    if !(0.0..=1.0).contains(&nms_overlap) {
        return Err(Error::invalid(format!(
            "suppression overlap must be in [0, 1], got {nms_overlap}"
        )));
    }
    let mut scored: Vec<(usize, f64, Vec<f64>)> = Vec::with_capacity(tubes.len());
    for (index, tube) in tubes.iter().enumerate() {
        let action_scores = score_actions(tube.scores(), affinity)?;
        let top = action_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        scored.push((index, top, action_scores));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut kept: Vec<usize> = Vec::new();
    let mut detections = Vec::new();
    for (index, _, action_scores) in scored {
        if detections.len() == limit {
            break;
        }
        let candidate = &tubes[index];
        let mut suppressed = false;
        for &keeper in &kept {
            let overlap = evaluation::tube_overlap(candidate.frames(), tubes[keeper].frames())?;
            if overlap >= nms_overlap {
                suppressed = true;
                break;
            }
        }
        if suppressed {
            continue;
        }
        kept.push(index);
        detections.push(Prediction {
            video_id: candidate.video_id().to_string(),
            ranked: rank_actions(&action_scores, affinity),
            tube_id: Some(candidate.tube_id().to_string()),
        });
    }
    Ok(detections)
}
