//! One function per subcommand. Every command loads and validates all of
//! its inputs before writing any output file.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use semaction::embedding::{EmbeddingTable, LabelDescription};
use semaction::encoding::{encode_all, Encoder, EncoderKind};
use semaction::engine::{self, Prediction, TubeProposal};
use semaction::evaluation::{self, Detection, GroundTruth, MetricReport};
use semaction::gmm;
use semaction::io::{self, DetectionRow, ScoreTable, SemanticModel};
use semaction::pca;
use semaction::translation::{
    self, AffinityMatrix, ObjectScores, ScoreSource, Sparsity,
};

use crate::config::{ConfigPath, RunConfig, SparsityMode};

/// Fits the encoder prior: PCA on the object-word vectors, then the
/// Gaussian mixture in PCA space. Writes the model artifact.
pub fn fit_gmm(config: &RunConfig) -> Result<()> {
    let table = EmbeddingTable::load(config.require(ConfigPath::Embeddings)?)?;
    let object_labels = io::load_labels(config.require(ConfigPath::Objects)?)?;
    let model_path = config.require(ConfigPath::Model)?;

    let (data, distinct) = object_word_vectors(&object_labels, &table)?;
    if config.k > distinct {
        bail!(
            "k = {} exceeds the {distinct} distinct word vectors resolved from the object labels",
            config.k
        );
    }
    let output_dim = (table.dim() / config.pca_factor).max(1);
    let pca = pca::fit(&data, output_dim)?;
    let projected = pca.project_all(&data)?;
    let fit = gmm::fit(&projected, config.k, config.seed)?;

    io::save_semantic_model(
        model_path,
        &SemanticModel {
            embedding_dim: table.dim(),
            pca,
            gmm: fit.model,
            config_hash: config.hash(),
        },
    )?;
    eprintln!(
        "fitted mixture: k={} dim={} on {} word vectors ({} iterations, converged={})",
        config.k,
        output_dim,
        data.len(),
        fit.log_likelihood_trace.len(),
        fit.converged
    );
    Ok(())
}

/// The multiset of resolved word vectors across all object labels
/// (duplicates retained), plus the count of distinct tokens.
fn object_word_vectors(
    labels: &[String],
    table: &EmbeddingTable,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut data = Vec::new();
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    for raw in labels {
        let label = LabelDescription::new(raw, table)?;
        for token in label.resolved() {
            data.push(table.lookup(token).expect("resolved token").to_vec());
            distinct.insert(token.clone());
        }
    }
    if data.is_empty() {
        bail!("none of the object labels has a token in the embedding vocabulary");
    }
    Ok((data, distinct.len()))
}

/// Encodes a label list and writes the encoded matrix.
pub fn encode(config: &RunConfig) -> Result<()> {
    let table = EmbeddingTable::load(config.require(ConfigPath::Embeddings)?)?;
    let raw_labels = io::load_labels(config.require(ConfigPath::Labels)?)?;
    let out = config.require(ConfigPath::Encoded)?;

    let labels = describe_all(&raw_labels, &table)?;
    let encoded = match config.encoder {
        EncoderKind::Awv => encode_all(&labels, &table, Encoder::Awv, config.normalize_labels)?,
        EncoderKind::Fwv => {
            let model = load_model(config, &table)?;
            encode_all(
                &labels,
                &table,
                Encoder::Fwv {
                    pca: &model.pca,
                    model: &model.gmm,
                    blocks: config.fwv_blocks,
                },
                config.normalize_labels,
            )?
        }
    };
    io::save_encoded_labels(out, &encoded, &config.hash())?;
    Ok(())
}

/// Builds the affinity matrix between object and action labels, applies
/// action sparsity per the configured mode, and writes it.
pub fn translate(config: &RunConfig) -> Result<()> {
    let table = EmbeddingTable::load(config.require(ConfigPath::Embeddings)?)?;
    let object_labels = io::load_labels(config.require(ConfigPath::Objects)?)?;
    let action_labels = io::load_labels(config.require(ConfigPath::Actions)?)?;
    let out = config.require(ConfigPath::Affinity)?;

    let objects = describe_all(&object_labels, &table)?;
    let actions = describe_all(&action_labels, &table)?;

    let model;
    let encoder = match config.encoder {
        EncoderKind::Awv => Encoder::Awv,
        EncoderKind::Fwv => {
            model = load_model(config, &table)?;
            Encoder::Fwv {
                pca: &model.pca,
                model: &model.gmm,
                blocks: config.fwv_blocks,
            }
        }
    };
    let object_enc = encode_all(&objects, &table, encoder, config.normalize_labels)?;
    let action_enc = encode_all(&actions, &table, encoder, config.normalize_labels)?;
    let dense = translation::build_affinity(&object_enc, &action_enc)?;
    let matrix = match config.sparsity {
        SparsityMode::Action | SparsityMode::Both => {
            translation::sparsify_action(&dense, config.t_z)?
        }
        SparsityMode::Video => dense.with_sparsity(Sparsity::VideoSideDeferred),
        SparsityMode::None => dense,
    };
    io::save_affinity(out, &matrix, &config.hash())?;
    Ok(())
}

/// Classifies every video in the score table and writes predictions.
pub fn classify(config: &RunConfig) -> Result<()> {
    let (affinity, scores) = load_affinity_and_scores(config)?;
    let out = config.require(ConfigPath::Predictions)?;

    let videos = prepare_videos(&scores, config)?;
    if videos.is_empty() {
        eprintln!("warning: score table has no rows; writing empty predictions");
    }
    let mut predictions = Vec::with_capacity(videos.len());
    for (id, prepared) in &videos {
        predictions.push(engine::classify(id, prepared, &affinity)?);
    }
    io::save_predictions(out, &predictions, &config.hash())?;
    io::save_predictions_json(json_variant(out), &predictions, &config.hash())?;
    Ok(())
}

/// Ranks videos per action (one action when named, otherwise all) and
/// writes the rankings.
pub fn retrieve(config: &RunConfig, action: Option<&str>) -> Result<()> {
    let (affinity, scores) = load_affinity_and_scores(config)?;
    let out = config.require(ConfigPath::Rankings)?;

    let videos = prepare_videos(&scores, config)?;
    if videos.is_empty() {
        eprintln!("warning: score table has no rows; writing empty rankings");
    }
    let selected: Vec<String> = match action {
        Some(name) => {
            if affinity.action_index(name).is_none() {
                bail!("unknown action {name:?}; the affinity matrix lists {} actions", affinity.num_actions());
            }
            vec![name.to_string()]
        }
        None => affinity.actions().to_vec(),
    };
    let mut rankings = Vec::with_capacity(selected.len());
    for name in &selected {
        let ranking = if videos.is_empty() {
            Vec::new()
        } else {
            engine::retrieve(&videos, name, &affinity)?
        };
        rankings.push((name.clone(), ranking));
    }
    io::save_rankings(out, &rankings, &config.hash())?;
    Ok(())
}

/// Localizes actions in tube proposals and writes the surviving
/// detections.
pub fn localize(config: &RunConfig) -> Result<()> {
    let (affinity, hash) = io::load_affinity(config.require(ConfigPath::Affinity)?)?;
    warn_on_hash_mismatch("affinity matrix", &hash, config);
    let tube_file = io::load_tube_file(config.require(ConfigPath::Tubes)?)?;
    let out = config.require(ConfigPath::Detections)?;

    let names = tube_file
        .object_names
        .as_ref()
        .ok_or_else(|| anyhow!("tube file carries no object score header"))?;
    check_object_names(names, &affinity)?;

    // Group proposals by video, preserving first appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::BTreeMap<String, Vec<TubeProposal>> = Default::default();
    for record in &tube_file.tubes {
        let raw = record
            .scores
            .clone()
            .ok_or_else(|| anyhow!("tube {:?} has no scores", record.tube_id))?;
        let raw = ObjectScores::raw(raw, ScoreSource::Tube)?;
        let prepared = prepare_scores(raw, config, config.normalize_tubes)?;
        let proposal = TubeProposal::new(
            record.video_id.clone(),
            record.tube_id.clone(),
            record.frames.clone(),
            prepared,
        )?;
        if !grouped.contains_key(&record.video_id) {
            order.push(record.video_id.clone());
        }
        grouped.entry(record.video_id.clone()).or_default().push(proposal);
    }
    if order.is_empty() {
        eprintln!("warning: tube file has no tubes; writing empty detections");
    }

    let mut rows: Vec<DetectionRow> = Vec::new();
    let mut best: Vec<Prediction> = Vec::new();
    for video in &order {
        let tubes = &grouped[video];
        let detections =
            engine::top_detections(tubes, &affinity, config.detection_limit, config.nms_overlap)?;
        for (rank0, detection) in detections.iter().enumerate() {
            let (action, score) = detection.chosen();
            rows.push(DetectionRow {
                video_id: video.clone(),
                rank: rank0 + 1,
                action: action.clone(),
                score: *score,
                tube_id: detection.tube_id.clone().expect("detections carry tubes"),
            });
        }
        best.push(detections[0].clone());
    }
    io::save_detections(out, &rows, &config.hash())?;
    io::save_predictions_json(json_variant(out), &best, &config.hash())?;
    Ok(())
}

/// Metric selection for the eval command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Accuracy,
    Map,
    Auc,
}

/// Evaluates predictions against ground truth and writes the metric
/// report.
pub fn eval(config: &RunConfig, metric: Metric) -> Result<()> {
    let out = config.require(ConfigPath::Report)?;
    let report = match metric {
        Metric::Accuracy => eval_accuracy(config)?,
        Metric::Map => eval_map(config)?,
        Metric::Auc => eval_auc(config)?,
    };
    io::save_metric_report(out, &report, &config.hash())?;
    io::save_metric_report_json(json_variant(out), &report, &config.hash())?;
    println!("{}\t{}", report.metric, report.value);
    Ok(())
}

fn eval_accuracy(config: &RunConfig) -> Result<MetricReport> {
    let predictions = io::load_predictions(config.require(ConfigPath::Predictions)?)?;
    let truth = load_truth(config)?;
    check_video_coverage(predictions.iter().map(|p| p.video_id.as_str()), &truth)?;
    Ok(evaluation::average_class_accuracy(&predictions, &truth)?)
}

fn eval_map(config: &RunConfig) -> Result<MetricReport> {
    let rankings = io::load_rankings(config.require(ConfigPath::Rankings)?)?;
    let truth = load_truth(config)?;
    let id_rankings: Vec<(String, Vec<String>)> = rankings
        .into_iter()
        .map(|(action, ranked)| (action, ranked.into_iter().map(|(id, _)| id).collect()))
        .collect();
    Ok(evaluation::mean_average_precision(&id_rankings, &truth)?)
}

fn eval_auc(config: &RunConfig) -> Result<MetricReport> {
    let detections = io::load_detections(config.require(ConfigPath::Detections)?)?;
    let tube_file = io::load_tube_file(config.require(ConfigPath::Tubes)?)?;
    let truth_tubes = io::load_tube_file(config.require(ConfigPath::TruthTubes)?)?;
    let mut truth = load_truth(config)?;

    for record in &truth_tubes.tubes {
        if truth.tube_of(&record.video_id).is_some() {
            bail!("duplicate ground-truth tube for video {:?}", record.video_id);
        }
        truth.set_tube(&record.video_id, record.frames.clone())?;
    }

    // Join detections with their tube geometry.
    let mut geometry: std::collections::BTreeMap<(&str, &str), &[_]> = Default::default();
    for record in &tube_file.tubes {
        geometry.insert(
            (record.video_id.as_str(), record.tube_id.as_str()),
            record.frames.as_slice(),
        );
    }
    let mut resolved = Vec::with_capacity(detections.len());
    for row in &detections {
        let frames = geometry
            .get(&(row.video_id.as_str(), row.tube_id.as_str()))
            .ok_or_else(|| {
                anyhow!(
                    "detection references unknown tube {:?} of video {:?}",
                    row.tube_id,
                    row.video_id
                )
            })?;
        resolved.push(Detection {
            video_id: row.video_id.clone(),
            action: row.action.clone(),
            score: row.score,
            frames: frames.to_vec(),
        });
    }
    Ok(evaluation::auc_vs_threshold(&resolved, &truth, &config.thresholds)?)
}

/// Emits the curve points of a metric report as `threshold<TAB>value`
/// rows.
pub fn plot_data(report_path: &Path, out: Option<&Path>) -> Result<()> {
    let report = io::load_metric_report_json(report_path)?;
    if report.curve.is_empty() {
        bail!("report {:?} has no curve points", report_path.display());
    }
    let mut text = String::new();
    for (threshold, value) in &report.curve {
        text.push_str(&format!("{threshold}\t{value}\n"));
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn describe_all(raws: &[String], table: &EmbeddingTable) -> Result<Vec<LabelDescription>> {
    raws.iter()
        .map(|raw| Ok(LabelDescription::new(raw, table)?))
        .collect()
}

fn load_model(config: &RunConfig, table: &EmbeddingTable) -> Result<SemanticModel> {
    let model = io::load_semantic_model(config.require(ConfigPath::Model)?)?;
    warn_on_hash_mismatch("semantic model", &model.config_hash, config);
    if model.embedding_dim != table.dim() {
        bail!(
            "model was fitted on {}-dimensional embeddings, table has {}",
            model.embedding_dim,
            table.dim()
        );
    }
    Ok(model)
}

fn warn_on_hash_mismatch(what: &str, artifact_hash: &str, config: &RunConfig) {
    let current = config.hash();
    if artifact_hash != current {
        eprintln!(
            "warning: {what} was produced under config {artifact_hash}, current config is {current}"
        );
    }
}

fn load_affinity_and_scores(config: &RunConfig) -> Result<(AffinityMatrix, ScoreTable)> {
    let (affinity, hash) = io::load_affinity(config.require(ConfigPath::Affinity)?)?;
    warn_on_hash_mismatch("affinity matrix", &hash, config);
    let scores = io::load_score_table(config.require(ConfigPath::Scores)?)?;
    check_object_names(&scores.object_names, &affinity)?;
    Ok((affinity, scores))
}

fn check_object_names(names: &[String], affinity: &AffinityMatrix) -> Result<()> {
    if names == affinity.objects() {
        return Ok(());
    }
    let mismatches = names
        .iter()
        .zip(affinity.objects())
        .filter(|(a, b)| a != b)
        .count()
        + names.len().abs_diff(affinity.num_objects());
    let first = names
        .iter()
        .zip(affinity.objects())
        .find(|(a, b)| a != b)
        .map(|(a, b)| format!("{a:?} vs {b:?}"))
        .unwrap_or_else(|| "length mismatch".into());
    bail!(
        "object names disagree between the score columns ({}) and the affinity matrix ({}): {mismatches} mismatch(es), first {first}",
        names.len(),
        affinity.num_objects()
    );
}

/// Averages per-frame rows, then normalizes and sparsifies per config.
fn prepare_videos(
    table: &ScoreTable,
    config: &RunConfig,
) -> Result<Vec<(String, ObjectScores)>> {
    let mut videos = Vec::new();
    for (id, frames) in table.grouped() {
        let raw = if frames.len() == 1 {
            ObjectScores::raw(frames[0].to_vec(), ScoreSource::Video)?
        } else {
            let per_frame: Vec<ObjectScores> = frames
                .iter()
                .map(|f| ObjectScores::raw(f.to_vec(), ScoreSource::Video))
                .collect::<semaction::Result<_>>()?;
            translation::average_frame_scores(&per_frame)?
        };
        let prepared = prepare_scores(raw, config, config.normalize_videos)?;
        videos.push((id, prepared));
    }
    Ok(videos)
}

/// Normalization and video-side sparsification in the configured order.
fn prepare_scores(
    raw: ObjectScores,
    config: &RunConfig,
    normalize: bool,
) -> Result<ObjectScores> {
    let sparsify = matches!(config.sparsity, SparsityMode::Video | SparsityMode::Both);
    let mut scores = raw;
    if config.sparsify_before_normalize {
        if sparsify {
            scores = translation::sparsify_video(&scores, config.t_v)?;
        }
        if normalize {
            scores = translation::power_l2_normalize(&scores, config.alpha)?;
        }
    } else {
        if normalize {
            scores = translation::power_l2_normalize(&scores, config.alpha)?;
        }
        if sparsify {
            scores = translation::sparsify_video(&scores, config.t_v)?;
        }
    }
    Ok(scores)
}

fn json_variant(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}

fn load_truth(config: &RunConfig) -> Result<GroundTruth> {
    let labels = io::load_ground_truth_labels(config.require(ConfigPath::Truth)?)?;
    let actions: Vec<String> = match &config.actions {
        Some(path) => io::load_labels(path)?,
        None => {
            let distinct: BTreeSet<String> = labels.iter().map(|(_, a)| a.clone()).collect();
            distinct.into_iter().collect()
        }
    };
    Ok(GroundTruth::new(labels, &actions)?)
}

fn check_video_coverage<'a>(
    predicted: impl Iterator<Item = &'a str>,
    truth: &GroundTruth,
) -> Result<()> {
    let missing: Vec<&str> = predicted
        .filter(|id| truth.action_of(id).is_none())
        .collect();
    if !missing.is_empty() {
        bail!(
            "{} predicted video(s) missing from the ground truth (first: {:?}); ground truth covers {} videos",
            missing.len(),
            missing[0],
            truth.num_labels()
        );
    }
    Ok(())
}
