//! Run configuration: a TOML file plus command-line overrides.
//!
//! The hyperparameter defaults are the recommended operating point:
//! Fisher encoding with a 2-component mixture on PCA-halved embeddings,
//! mean-derivative blocks only, action sparsity T_z = 10 combined with
//! video sparsity T_v = 100, and power (alpha = 0.5) + l2 normalization of
//! score vectors. Every output file embeds a hash of the resolved
//! hyperparameters so artifacts produced under different settings are
//! distinguishable.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use semaction::encoding::{EncoderKind, FwvBlocks};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which side of the translation is sparsified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SparsityMode {
    None,
    Action,
    Video,
    Both,
}

/// All pipeline settings. Field names match the TOML keys and the
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Input paths.
    pub embeddings: Option<PathBuf>,
    pub objects: Option<PathBuf>,
    pub actions: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub tubes: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub truth_tubes: Option<PathBuf>,

    // Artifact paths (outputs of one stage, inputs of the next).
    pub model: Option<PathBuf>,
    pub encoded: Option<PathBuf>,
    pub affinity: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub rankings: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub report: Option<PathBuf>,

    // Hyperparameters.
    pub encoder: EncoderKind,
    pub k: usize,
    pub pca_factor: usize,
    pub t_z: usize,
    pub t_v: usize,
    pub alpha: f64,
    pub normalize_labels: bool,
    pub fwv_blocks: FwvBlocks,
    pub seed: u64,
    pub sparsity: SparsityMode,
    pub normalize_videos: bool,
    pub normalize_tubes: bool,
    pub sparsify_before_normalize: bool,
    pub nms_overlap: f64,
    pub detection_limit: usize,
    pub thresholds: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            embeddings: None,
            objects: None,
            actions: None,
            labels: None,
            scores: None,
            tubes: None,
            truth: None,
            truth_tubes: None,
            model: None,
            encoded: None,
            affinity: None,
            predictions: None,
            rankings: None,
            detections: None,
            report: None,
            encoder: EncoderKind::Fwv,
            k: 2,
            pca_factor: 2,
            t_z: 10,
            t_v: 100,
            alpha: 0.5,
            normalize_labels: true,
            fwv_blocks: FwvBlocks::MeanOnly,
            seed: 0,
            sparsity: SparsityMode::Both,
            normalize_videos: true,
            normalize_tubes: true,
            sparsify_before_normalize: false,
            nms_overlap: 0.3,
            detection_limit: 5,
            thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

/// Hyperparameter subset covered by the configuration hash. Paths are
/// excluded so the hash is stable across pipeline stages run from the same
/// settings.
#[derive(Serialize)]
struct Hyperparameters<'c> {
    encoder: &'c EncoderKind,
    k: usize,
    pca_factor: usize,
    t_z: usize,
    t_v: usize,
    alpha: f64,
    normalize_labels: bool,
    fwv_blocks: &'c FwvBlocks,
    seed: u64,
    sparsity: &'c SparsityMode,
    normalize_videos: bool,
    normalize_tubes: bool,
    sparsify_before_normalize: bool,
    nms_overlap: f64,
    detection_limit: usize,
    thresholds: &'c [f64],
}

impl RunConfig {
    /// Loads a TOML config file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    /// Validates ranges that no command accepts.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            bail!("k must be >= 1");
        }
        if self.pca_factor == 0 {
            bail!("pca_factor must be >= 1");
        }
        if self.t_z == 0 || self.t_v == 0 {
            bail!("t_z and t_v must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bail!("alpha must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.nms_overlap) {
            bail!("nms_overlap must be in [0, 1]");
        }
        if self.detection_limit == 0 {
            bail!("detection_limit must be >= 1");
        }
        Ok(())
    }

    /// Hex digest over the hyperparameters (not the paths).
    pub fn hash(&self) -> String {
        let hyper = Hyperparameters {
            encoder: &self.encoder,
            k: self.k,
            pca_factor: self.pca_factor,
            t_z: self.t_z,
            t_v: self.t_v,
            alpha: self.alpha,
            normalize_labels: self.normalize_labels,
            fwv_blocks: &self.fwv_blocks,
            seed: self.seed,
            sparsity: &self.sparsity,
            normalize_videos: self.normalize_videos,
            normalize_tubes: self.normalize_tubes,
            sparsify_before_normalize: self.sparsify_before_normalize,
            nms_overlap: self.nms_overlap,
            detection_limit: self.detection_limit,
            thresholds: &self.thresholds,
        };
        let canonical = toml::to_string(&hyper).expect("hyperparameters serialize to TOML");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// A required path, with a helpful message naming the flag.
    pub fn require(&self, field: ConfigPath) -> Result<&PathBuf> {
        let (value, name) = self.path_field(field);
        value.as_ref().ok_or_else(|| {
            anyhow::anyhow!("missing {name} path: pass --{name} or set `{name}` in the config file")
        })
    }

    fn path_field(&self, field: ConfigPath) -> (&Option<PathBuf>, &'static str) {
        match field {
            ConfigPath::Embeddings => (&self.embeddings, "embeddings"),
            ConfigPath::Objects => (&self.objects, "objects"),
            ConfigPath::Actions => (&self.actions, "actions"),
            ConfigPath::Labels => (&self.labels, "labels"),
            ConfigPath::Scores => (&self.scores, "scores"),
            ConfigPath::Tubes => (&self.tubes, "tubes"),
            ConfigPath::Truth => (&self.truth, "truth"),
            ConfigPath::TruthTubes => (&self.truth_tubes, "truth-tubes"),
            ConfigPath::Model => (&self.model, "model"),
            ConfigPath::Encoded => (&self.encoded, "encoded"),
            ConfigPath::Affinity => (&self.affinity, "affinity"),
            ConfigPath::Predictions => (&self.predictions, "predictions"),
            ConfigPath::Rankings => (&self.rankings, "rankings"),
            ConfigPath::Detections => (&self.detections, "detections"),
            ConfigPath::Report => (&self.report, "report"),
        }
    }
}

/// Path fields addressable through [`RunConfig::require`].
#[derive(Debug, Clone, Copy)]
pub enum ConfigPath {
    Embeddings,
    Objects,
    Actions,
    Labels,
    Scores,
    Tubes,
    Truth,
    TruthTubes,
    Model,
    Encoded,
    Affinity,
    Predictions,
    Rankings,
    Detections,
    Report,
}

/// Command-line overrides shared by every subcommand. Unset flags leave
/// the config file (or default) value in place.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file (TOML); flags below override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Word embedding file (text interchange format).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Object label list, one class name per line.
    #[arg(long)]
    pub objects: Option<PathBuf>,
    /// Action label list, one class name per line.
    #[arg(long)]
    pub actions: Option<PathBuf>,
    /// Label list for the encode command.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Object score table (TSV).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Tube proposal file.
    #[arg(long)]
    pub tubes: Option<PathBuf>,
    /// Ground-truth labels (video<TAB>action).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Ground-truth tube file.
    #[arg(long = "truth-tubes")]
    pub truth_tubes: Option<PathBuf>,

    /// Semantic model artifact (PCA + mixture).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Encoded label matrix file.
    #[arg(long)]
    pub encoded: Option<PathBuf>,
    /// Affinity matrix file.
    #[arg(long)]
    pub affinity: Option<PathBuf>,
    /// Predictions output (TSV; a .json variant is written alongside).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Retrieval rankings output.
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    /// Detections output.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Metric report output (TSV; a .json variant is written alongside).
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Label encoder: awv or fwv.
    #[arg(long)]
    pub encoder: Option<EncoderKind>,
    /// Mixture components.
    #[arg(long)]
    pub k: Option<usize>,
    /// PCA reduction factor (output dim = embedding dim / factor).
    #[arg(long = "pca-factor")]
    pub pca_factor: Option<usize>,
    /// Objects kept per action column.
    #[arg(long = "t-z")]
    pub t_z: Option<usize>,
    /// Objects kept per video score vector.
    #[arg(long = "t-v")]
    pub t_v: Option<usize>,
    /// Power normalization exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Disable l2 normalization of label encodings.
    #[arg(long = "no-normalize-labels")]
    pub no_normalize_labels: bool,
    /// Fisher blocks: mean or mean-variance.
    #[arg(long = "fwv-blocks")]
    pub fwv_blocks: Option<FwvBlocks>,
    /// Seed for mixture fitting.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sparsity mode: none, action, video, or both.
    #[arg(long)]
    pub sparsity: Option<SparsityMode>,
    /// Disable power + l2 normalization of video scores.
    #[arg(long = "no-normalize-videos")]
    pub no_normalize_videos: bool,
    /// Disable power + l2 normalization of tube scores.
    #[arg(long = "no-normalize-tubes")]
    pub no_normalize_tubes: bool,
    /// Apply video sparsity before score normalization.
    #[arg(long = "sparsify-before-normalize")]
    pub sparsify_before_normalize: bool,
    /// Suppression overlap for localization detections.
    #[arg(long = "nms-overlap")]
    pub nms_overlap: Option<f64>,
    /// Detections kept per video.
    #[arg(long = "detection-limit")]
    pub detection_limit: Option<usize>,
    /// Overlap thresholds for the AUC curve, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

impl ConfigArgs {
    /// Resolves defaults <- config file <- command-line flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };

        macro_rules! override_path {
            ($field:ident) => {
                if let Some(value) = &self.$field {
                    config.$field = Some(value.clone());
                }
            };
        }
        override_path!(embeddings);
        override_path!(objects);
        override_path!(actions);
        override_path!(labels);
        override_path!(scores);
        override_path!(tubes);
        override_path!(truth);
        override_path!(truth_tubes);
        override_path!(model);
        override_path!(encoded);
        override_path!(affinity);
        override_path!(predictions);
        override_path!(rankings);
        override_path!(detections);
        override_path!(report);

        macro_rules! override_value {
            ($field:ident) => {
                if let Some(value) = self.$field {
                    config.$field = value;
                }
            };
        }
        override_value!(encoder);
        override_value!(k);
        override_value!(pca_factor);
        override_value!(t_z);
        override_value!(t_v);
        override_value!(alpha);
        override_value!(fwv_blocks);
        override_value!(seed);
        override_value!(sparsity);
        override_value!(nms_overlap);
        override_value!(detection_limit);
        if let Some(thresholds) = &self.thresholds {
            config.thresholds = thresholds.clone();
        }
        if self.no_normalize_labels {
            config.normalize_labels = false;
        }
        if self.no_normalize_videos {
            config.normalize_videos = false;
        }
        if self.no_normalize_tubes {
            config.normalize_tubes = false;
        }
        if self.sparsify_before_normalize {
            config.sparsify_before_normalize = true;
        }

        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_recommended_operating_point() {
        let config = RunConfig::default();
        assert_eq!(config.encoder, EncoderKind::Fwv);
        assert_eq!(config.k, 2);
        assert_eq!(config.pca_factor, 2);
        assert_eq!(config.t_z, 10);
        assert_eq!(config.t_v, 100);
        assert_eq!(config.alpha, 0.5);
        assert!(config.normalize_labels);
        assert_eq!(config.fwv_blocks, FwvBlocks::MeanOnly);
        assert_eq!(config.sparsity, SparsityMode::Both);
        assert_eq!(config.nms_overlap, 0.3);
        assert_eq!(config.detection_limit, 5);
    }

    #[test]
    fn hash_depends_on_hyperparameters_not_paths() {
        let b = RunConfig {
            embeddings: Some(PathBuf::from("/elsewhere.vec")),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::default().hash(), b.hash());
        let a = RunConfig {
            t_z: 11,
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn cli_flags_override_file_values() {
        let args = ConfigArgs {
            k: Some(4),
            no_normalize_labels: true,
            ..ConfigArgs::default()
        };
        let config = args.resolve().unwrap();
        assert_eq!(config.k, 4);
        assert!(!config.normalize_labels);
        assert_eq!(config.t_z, 10);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let args = ConfigArgs {
            alpha: Some(1.5),
            ..ConfigArgs::default()
        };
        assert!(args.resolve().is_err());
    }
}
