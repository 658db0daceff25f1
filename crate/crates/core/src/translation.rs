//! Object-to-action translation: affinity construction, top-T
//! sparsification, and video score normalization.
//!
//! The affinity between object y and action z is the inner product of their
//! label encodings. Scores for a test video are translated into action
//! scores by the affinity-weighted sum over objects; both sides can be
//! sparsified first — per action, keep only the T_z most responsive
//! objects; per video, keep only the T_v most prominent objects. The masks
//! are pure indicator masks: surviving entries are never renormalized, and
//! ties always break toward the lower index so results are reproducible.

use crate::encoding::EncodedLabels;
use crate::numeric;
use crate::{Error, Result};

/// Provenance of a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    Video,
    Tube,
    FrameAverage,
}

impl std::fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreSource::Video => write!(f, "video"),
            ScoreSource::Tube => write!(f, "tube"),
            ScoreSource::FrameAverage => write!(f, "frame-average"),
        }
    }
}

/// Normalization state of a score vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreNorm {
    Raw,
    PowerL2 { alpha: f64 },
}

/// Per-video (or per-tube) object classifier responses.
///
/// Raw scores are nonnegative probabilities; after power + l2
/// normalization the vector has unit norm and carries the alpha used.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScores {
    values: Vec<f64>,
    source: ScoreSource,
    norm: ScoreNorm,
}

impl ObjectScores {
    /// Wraps raw classifier responses, validating nonnegativity and
    /// finiteness.
    pub fn raw(values: Vec<f64>, source: ScoreSource) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("score vector is empty"));
        }
        if !numeric::all_finite(&values) {
            return Err(Error::invalid("score vector has non-finite entries"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("raw scores must be nonnegative"));
        }
        Ok(ObjectScores {
            values,
            source,
            norm: ScoreNorm::Raw,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source(&self) -> ScoreSource {
        self.source
    }

    pub fn norm(&self) -> ScoreNorm {
        self.norm
    }
}

/// Elementwise mean of per-frame score vectors.
pub fn average_frame_scores(frames: &[ObjectScores]) -> Result<ObjectScores> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("cannot average an empty frame list"))?;
    let len = first.len();
    for (i, frame) in frames.iter().enumerate() {
        if frame.len() != len {
            return Err(Error::invalid(format!(
                "frame {i} has {} scores, expected {len}",
                frame.len()
            )));
        }
        if frame.norm != ScoreNorm::Raw {
            return Err(Error::invalid("frame averaging expects raw scores"));
        }
    }
    let count = frames.len() as f64;
    let mut values = vec![0.0; len];
    for frame in frames {
        for (v, x) in values.iter_mut().zip(&frame.values) {
            *v += x;
        }
    }
    for v in values.iter_mut() {
        *v /= count;
    }
    Ok(ObjectScores {
        values,
        source: ScoreSource::FrameAverage,
        norm: ScoreNorm::Raw,
    })
}

/// Power normalization (`sign(x) * |x|^alpha`) followed by l2
/// normalization.
///
/// Requires raw scores and `alpha` in (0, 1]. Both steps preserve the
/// argsort of a nonnegative vector, so top-T selection commutes with this
/// transform.
pub fn power_l2_normalize(scores: &ObjectScores, alpha: f64) -> Result<ObjectScores> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    if scores.norm != ScoreNorm::Raw {
        return Err(Error::invalid("scores are already normalized"));
    }
    let mut values = scores.values.clone();
    numeric::signed_power(&mut values, alpha);
    if !numeric::l2_normalize(&mut values) {
        return Err(Error::Numerical(
            "cannot normalize an all-zero score vector".into(),
        ));
    }
    Ok(ObjectScores {
        values,
        source: scores.source,
        norm: ScoreNorm::PowerL2 { alpha },
    })
}

/// Keeps the `t_v` largest scores and zeroes the rest.
pub fn sparsify_video(scores: &ObjectScores, t_v: usize) -> Result<ObjectScores> {
    if t_v == 0 {
        return Err(Error::invalid("video sparsity must keep at least one object"));
    }
    Ok(ObjectScores {
        values: mask_top_t(&scores.values, t_v),
        source: scores.source,
        norm: scores.norm,
    })
}

fn mask_top_t(values: &[f64], t: usize) -> Vec<f64> {
    let mut masked = vec![0.0; values.len()];
    for idx in numeric::top_t_indices(values, t) {
        masked[idx] = values[idx];
    }
    masked
}

/// Sparsity state of an affinity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sparsity {
    /// No mask applied.
    Dense,
    /// Per-action column mask keeping the top `t_z` objects.
    ActionTop { t_z: usize },
    /// Left dense on purpose; sparsification happens on the video side.
    VideoSideDeferred,
}

impl std::fmt::Display for Sparsity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sparsity::Dense => write!(f, "dense"),
            Sparsity::ActionTop { t_z } => write!(f, "action-top-{t_z}"),
            Sparsity::VideoSideDeferred => write!(f, "video-side-deferred"),
        }
    }
}

/// The m x n object-to-action affinity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    objects: Vec<String>,
    actions: Vec<String>,
    /// Row-major, `objects.len() * actions.len()`.
    values: Vec<f64>,
    sparsity: Sparsity,
}

impl AffinityMatrix {
    pub fn from_parts(
        objects: Vec<String>,
        actions: Vec<String>,
        values: Vec<f64>,
        sparsity: Sparsity,
    ) -> Result<Self> {
        if objects.is_empty() || actions.is_empty() {
            return Err(Error::invalid("affinity matrix must be nonempty"));
        }
        if values.len() != objects.len() * actions.len() {
            return Err(Error::invalid(format!(
                "affinity matrix has {} values, expected {}x{}",
                values.len(),
                objects.len(),
                actions.len()
            )));
        }
        if !numeric::all_finite(&values) {
            return Err(Error::invalid("affinity matrix has non-finite entries"));
        }
        Ok(AffinityMatrix {
            objects,
            actions,
            values,
            sparsity,
        })
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn sparsity(&self) -> Sparsity {
        self.sparsity
    }

    pub fn get(&self, object: usize, action: usize) -> f64 {
        self.values[object * self.actions.len() + action]
    }

    /// Row of affinities for one object, in action order.
    pub fn object_row(&self, object: usize) -> &[f64] {
        let n = self.actions.len();
        &self.values[object * n..(object + 1) * n]
    }

    /// Column of affinities for one action, in object order.
    pub fn action_column(&self, action: usize) -> Vec<f64> {
        (0..self.objects.len()).map(|o| self.get(o, action)).collect()
    }

    pub fn action_index(&self, action: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    /// Row-major backing slice, `num_objects * num_actions` entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Retags the matrix, leaving the values untouched.
    pub fn with_sparsity(mut self, sparsity: Sparsity) -> Self {
        self.sparsity = sparsity;
        self
    }
}

/// Builds the dense affinity matrix from encoded object and action labels.
pub fn build_affinity(
    object_encodings: &EncodedLabels,
    action_encodings: &EncodedLabels,
) -> Result<AffinityMatrix> {
    if object_encodings.is_empty() || action_encodings.is_empty() {
        return Err(Error::invalid("affinity needs both object and action encodings"));
    }
    if object_encodings.dim != action_encodings.dim {
        return Err(Error::invalid(format!(
            "encoding dimensionality mismatch: objects {}, actions {}",
            object_encodings.dim, action_encodings.dim
        )));
    }
    let m = object_encodings.len();
    let n = action_encodings.len();
    let mut values = Vec::with_capacity(m * n);
    for obj in &object_encodings.vectors {
        for act in &action_encodings.vectors {
            values.push(numeric::dot(obj, act));
        }
    }
    AffinityMatrix::from_parts(
        object_encodings.names.clone(),
        action_encodings.names.clone(),
        values,
        Sparsity::Dense,
    )
}

/// Per-action column mask: keep the `t_z` largest affinities, zero the
/// rest.
///
/// Negative affinities compete by value, not magnitude.
pub fn sparsify_action(matrix: &AffinityMatrix, t_z: usize) -> Result<AffinityMatrix> {
    if t_z == 0 {
        return Err(Error::invalid("action sparsity must keep at least one object"));
    }
    if let Sparsity::ActionTop { .. } = matrix.sparsity {
        return Err(Error::invalid("affinity matrix is already action-sparsified"));
    }
    let m = matrix.num_objects();
    let n = matrix.num_actions();
    let mut values = vec![0.0; m * n];
    for action in 0..n {
        let column = matrix.action_column(action);
        for idx in numeric::top_t_indices(&column, t_z) {
            values[idx * n + action] = column[idx];
        }
    }
    AffinityMatrix::from_parts(
        matrix.objects.clone(),
        matrix.actions.clone(),
        values,
        Sparsity::ActionTop { t_z },
    )
}
