//! Python bindings for the recognition engine.
//!
//! The module mirrors the core pipeline with plain Python types: vectors
//! are lists of floats, rankings are lists of `(name, score)` tuples, and
//! tube frames are `(frame, x, y, width, height)` tuples.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use semaction::embedding;
use semaction::encoding;
use semaction::engine;
use semaction::evaluation;
use semaction::gmm;
use semaction::pca;
use semaction::translation;

fn err(e: semaction::Error) -> PyErr {
    match e {
        semaction::Error::Io(inner) => PyIOError::new_err(inner.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type Frame = (u64, f64, f64, f64, f64);

fn frames_from(py_frames: Vec<Frame>) -> PyResult<Vec<engine::TubeFrame>> {
    py_frames
        .into_iter()
        .map(|(frame, x, y, w, h)| engine::TubeFrame::new(frame, x, y, w, h).map_err(err))
        .collect()
}

/// Immutable word vector table.
#[pyclass(name = "EmbeddingTable")]
struct PyEmbeddingTable {
    inner: embedding::EmbeddingTable,
}

#[pymethods]
impl PyEmbeddingTable {
    /// Loads the text interchange format.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyEmbeddingTable {
            inner: embedding::EmbeddingTable::load(path).map_err(err)?,
        })
    }

    /// Builds a table from `(token, vector)` pairs.
    #[staticmethod]
    fn from_entries(dim: usize, entries: Vec<(String, Vec<f64>)>) -> PyResult<Self> {
        Ok(PyEmbeddingTable {
            inner: embedding::EmbeddingTable::new(dim, entries).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn lookup(&self, token: &str) -> Option<Vec<f64>> {
        self.inner.lookup(token).map(|v| v.to_vec())
    }

    fn contains(&self, token: &str) -> bool {
        self.inner.contains(token)
    }

    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }
}

/// A tokenized class name resolved against a vocabulary.
#[pyclass(name = "Label")]
struct PyLabel {
    inner: embedding::LabelDescription,
}

#[pymethods]
impl PyLabel {
    #[getter]
    fn raw(&self) -> String {
        self.inner.raw().to_string()
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    #[getter]
    fn resolved(&self) -> Vec<String> {
        self.inner.resolved().to_vec()
    }

    #[getter]
    fn encodable(&self) -> bool {
        self.inner.is_encodable()
    }

    fn __repr__(&self) -> String {
        format!(
            "Label(raw={:?}, resolved={:?})",
            self.inner.raw(),
            self.inner.resolved()
        )
    }
}

/// Splits a class name into lowercase word tokens.
#[pyfunction]
fn tokenize(raw: &str) -> PyResult<Vec<String>> {
    embedding::tokenize(raw).map_err(err)
}

/// Tokenizes `raw` and resolves it against the table.
#[pyfunction]
fn describe(raw: &str, table: &PyEmbeddingTable) -> PyResult<PyLabel> {
    Ok(PyLabel {
        inner: embedding::LabelDescription::new(raw, &table.inner).map_err(err)?,
    })
}

/// A fitted PCA projection.
#[pyclass(name = "PcaTransform")]
struct PyPcaTransform {
    inner: pca::PcaTransform,
}

#[pymethods]
impl PyPcaTransform {
    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&x).map_err(err)
    }

    fn project_all(&self, data: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.project_all(&data).map_err(err)
    }
}

/// Fits a PCA with `output_dim` axes.
#[pyfunction]
fn fit_pca(data: Vec<Vec<f64>>, output_dim: usize) -> PyResult<PyPcaTransform> {
    Ok(PyPcaTransform {
        inner: pca::fit(&data, output_dim).map_err(err)?,
    })
}

/// A fitted diagonal Gaussian mixture.
#[pyclass(name = "GmmModel")]
struct PyGmmModel {
    inner: gmm::GmmModel,
}

#[pymethods]
impl PyGmmModel {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.inner.means().to_vec()
    }

    #[getter]
    fn stddevs(&self) -> Vec<Vec<f64>> {
        self.inner.stddevs().to_vec()
    }

    fn responsibilities(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.responsibilities(&x).map_err(err)
    }

    fn log_likelihood(&self, data: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.log_likelihood(&data).map_err(err)
    }
}

/// Fits a mixture with EM. Returns `(model, log_likelihood_trace,
/// converged)`.
#[pyfunction]
fn fit_gmm(data: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<(PyGmmModel, Vec<f64>, bool)> {
    let fit = gmm::fit(&data, k, seed).map_err(err)?;
    Ok((
        PyGmmModel { inner: fit.model },
        fit.log_likelihood_trace,
        fit.converged,
    ))
}

/// Raw Fisher gradient blocks of a word set: `(mean, variance)`,
/// component-major.
#[pyfunction]
fn fisher_blocks(words: Vec<Vec<f64>>, model: &PyGmmModel) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let blocks = encoding::fisher_blocks(&words, &model.inner).map_err(err)?;
    Ok((blocks.mean, blocks.variance))
}

/// Average-word-vector encoding of a label.
#[pyfunction]
#[pyo3(signature = (label, table, normalize = true))]
fn encode_awv(label: &PyLabel, table: &PyEmbeddingTable, normalize: bool) -> PyResult<Vec<f64>> {
    Ok(encoding::encode_awv(&label.inner, &table.inner, normalize)
        .map_err(err)?
        .values)
}

/// Fisher-word-vector encoding of a label. `blocks` is "mean" or
/// "mean-variance".
#[pyfunction]
#[pyo3(signature = (label, table, pca, model, blocks = "mean", normalize = true))]
fn encode_fwv(
    label: &PyLabel,
    table: &PyEmbeddingTable,
    pca: &PyPcaTransform,
    model: &PyGmmModel,
    blocks: &str,
    normalize: bool,
) -> PyResult<Vec<f64>> {
    let blocks: encoding::FwvBlocks = blocks.parse().map_err(err)?;
    Ok(encoding::encode_fwv(
        &label.inner,
        &table.inner,
        &pca.inner,
        &model.inner,
        blocks,
        normalize,
    )
    .map_err(err)?
    .values)
}

/// The object-to-action affinity matrix.
#[pyclass(name = "AffinityMatrix")]
struct PyAffinityMatrix {
    inner: translation::AffinityMatrix,
}

#[pymethods]
impl PyAffinityMatrix {
    #[getter]
    fn objects(&self) -> Vec<String> {
        self.inner.objects().to_vec()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.actions().to_vec()
    }

    #[getter]
    fn sparsity(&self) -> String {
        self.inner.sparsity().to_string()
    }

    fn get(&self, object: usize, action: usize) -> PyResult<f64> {
        if object >= self.inner.num_objects() || action >= self.inner.num_actions() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(object, action))
    }

    /// Per-action top-T mask; returns a new matrix.
    fn sparsify_action(&self, t_z: usize) -> PyResult<Self> {
        Ok(PyAffinityMatrix {
            inner: translation::sparsify_action(&self.inner, t_z).map_err(err)?,
        })
    }
}

/// Inner-product affinities between encoded objects and actions.
#[pyfunction]
fn build_affinity(
    object_names: Vec<String>,
    object_vectors: Vec<Vec<f64>>,
    action_names: Vec<String>,
    action_vectors: Vec<Vec<f64>>,
) -> PyResult<PyAffinityMatrix> {
    if object_names.len() != object_vectors.len() || action_names.len() != action_vectors.len() {
        return Err(PyValueError::new_err("names and vectors must align"));
    }
    let dim = object_vectors.first().map(Vec::len).unwrap_or(0);
    let objects = encoding::EncodedLabels {
        encoder: encoding::EncoderKind::Awv,
        dim,
        names: object_names,
        vectors: object_vectors,
    };
    let actions = encoding::EncodedLabels {
        encoder: encoding::EncoderKind::Awv,
        dim,
        names: action_names,
        vectors: action_vectors,
    };
    Ok(PyAffinityMatrix {
        inner: translation::build_affinity(&objects, &actions).map_err(err)?,
    })
}

fn raw_scores(values: Vec<f64>, source: translation::ScoreSource) -> PyResult<translation::ObjectScores> {
    translation::ObjectScores::raw(values, source).map_err(err)
}

/// Elementwise mean of per-frame score vectors.
#[pyfunction]
fn average_frame_scores(frames: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let frames: Vec<translation::ObjectScores> = frames
        .into_iter()
        .map(|f| raw_scores(f, translation::ScoreSource::Video))
        .collect::<PyResult<_>>()?;
    Ok(translation::average_frame_scores(&frames)
        .map_err(err)?
        .values()
        .to_vec())
}

/// Power normalization followed by l2 normalization.
#[pyfunction]
#[pyo3(signature = (values, alpha = 0.5))]
fn power_l2_normalize(values: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    let scores = raw_scores(values, translation::ScoreSource::Video)?;
    Ok(translation::power_l2_normalize(&scores, alpha)
        .map_err(err)?
        .values()
        .to_vec())
}

/// Keeps the `t_v` largest scores and zeroes the rest.
#[pyfunction]
fn sparsify_video(values: Vec<f64>, t_v: usize) -> PyResult<Vec<f64>> {
    let scores = raw_scores(values, translation::ScoreSource::Video)?;
    Ok(translation::sparsify_video(&scores, t_v)
        .map_err(err)?
        .values()
        .to_vec())
}

/// Action scores of one score vector: `p^T g`.
#[pyfunction]
fn score_actions(values: Vec<f64>, affinity: &PyAffinityMatrix) -> PyResult<Vec<f64>> {
    let scores = raw_scores(values, translation::ScoreSource::Video)?;
    engine::score_actions(&scores, &affinity.inner).map_err(err)
}

/// Full action ranking for one video, best first.
#[pyfunction]
fn classify(values: Vec<f64>, affinity: &PyAffinityMatrix) -> PyResult<Vec<(String, f64)>> {
    let scores = raw_scores(values, translation::ScoreSource::Video)?;
    Ok(engine::classify("video", &scores, &affinity.inner)
        .map_err(err)?
        .ranked)
}

/// Ranks `(id, scores)` videos for one action, best first.
#[pyfunction]
fn retrieve(
    videos: Vec<(String, Vec<f64>)>,
    action: &str,
    affinity: &PyAffinityMatrix,
) -> PyResult<Vec<(String, f64)>> {
    let videos: Vec<(String, translation::ObjectScores)> = videos
        .into_iter()
        .map(|(id, values)| Ok((id, raw_scores(values, translation::ScoreSource::Video)?)))
        .collect::<PyResult<_>>()?;
    engine::retrieve(&videos, action, &affinity.inner).map_err(err)
}

fn proposals_from(
    video_id: &str,
    tubes: Vec<(String, Vec<Frame>, Vec<f64>)>,
) -> PyResult<Vec<engine::TubeProposal>> {
    tubes
        .into_iter()
        .map(|(tube_id, frames, values)| {
            engine::TubeProposal::new(
                video_id,
                tube_id,
                frames_from(frames)?,
                raw_scores(values, translation::ScoreSource::Tube)?,
            )
            .map_err(err)
        })
        .collect()
}

/// Joint argmax over `(tube_id, frames, scores)` proposals and actions.
/// Returns `(tube_id, action, score)`.
#[pyfunction]
fn localize(
    video_id: &str,
    tubes: Vec<(String, Vec<Frame>, Vec<f64>)>,
    affinity: &PyAffinityMatrix,
) -> PyResult<(String, String, f64)> {
    let proposals = proposals_from(video_id, tubes)?;
    let prediction = engine::localize(&proposals, &affinity.inner).map_err(err)?;
    let (action, score) = prediction.chosen().clone();
    Ok((prediction.tube_id.expect("localization picks a tube"), action, score))
}

/// Greedy non-maximum suppression over proposals; returns up to `limit`
/// `(tube_id, action, score)` detections, best first.
#[pyfunction]
#[pyo3(signature = (video_id, tubes, affinity, limit = 5, nms_overlap = 0.3))]
fn top_detections(
    video_id: &str,
    tubes: Vec<(String, Vec<Frame>, Vec<f64>)>,
    affinity: &PyAffinityMatrix,
    limit: usize,
    nms_overlap: f64,
) -> PyResult<Vec<(String, String, f64)>> {
    let proposals = proposals_from(video_id, tubes)?;
    let detections = engine::top_detections(&proposals, &affinity.inner, limit, nms_overlap)
        .map_err(err)?;
    Ok(detections
        .into_iter()
        .map(|d| {
            let (action, score) = d.chosen().clone();
            (d.tube_id.expect("detections carry tubes"), action, score)
        })
        .collect())
}

/// Mean per-frame IoU over the union of two tubes' frame spans.
#[pyfunction]
fn tube_overlap(a: Vec<Frame>, b: Vec<Frame>) -> PyResult<f64> {
    evaluation::tube_overlap(&frames_from(a)?, &frames_from(b)?).map_err(err)
}

/// Non-interpolated average precision of a ranking.
#[pyfunction]
fn average_precision(ranked: Vec<String>, positives: Vec<String>) -> PyResult<f64> {
    let positives: std::collections::BTreeSet<String> = positives.into_iter().collect();
    Ok(evaluation::average_precision(&ranked, &positives)
        .map_err(err)?
        .value)
}

/// Mean over classes of per-class accuracy for `(video, action)` pairs.
#[pyfunction]
fn average_class_accuracy(
    predictions: Vec<(String, String)>,
    truth: Vec<(String, String)>,
) -> PyResult<f64> {
    let actions: Vec<String> = {
        let distinct: std::collections::BTreeSet<String> =
            truth.iter().map(|(_, a)| a.clone()).collect();
        distinct.into_iter().collect()
    };
    let truth = evaluation::GroundTruth::new(truth, &actions).map_err(err)?;
    let predictions: Vec<engine::Prediction> = predictions
        .into_iter()
        .map(|(video_id, action)| engine::Prediction {
            video_id,
            ranked: vec![(action, 1.0)],
            tube_id: None,
        })
        .collect();
    Ok(evaluation::average_class_accuracy(&predictions, &truth)
        .map_err(err)?
        .value)
}

#[pymodule]
fn semaction_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingTable>()?;
    m.add_class::<PyLabel>()?;
    m.add_class::<PyPcaTransform>()?;
    m.add_class::<PyGmmModel>()?;
    m.add_class::<PyAffinityMatrix>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gmm, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(encode_awv, m)?)?;
    m.add_function(wrap_pyfunction!(encode_fwv, m)?)?;
    m.add_function(wrap_pyfunction!(build_affinity, m)?)?;
    m.add_function(wrap_pyfunction!(average_frame_scores, m)?)?;
    m.add_function(wrap_pyfunction!(power_l2_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify_video, m)?)?;
    m.add_function(wrap_pyfunction!(score_actions, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(retrieve, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(top_detections, m)?)?;
    m.add_function(wrap_pyfunction!(tube_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(average_class_accuracy, m)?)?;
    Ok(())
}
