//! Label encoders: average word vectors and Fisher word vectors.
//!
//! Both encoders turn a multi-word class name into a single vector so the
//! inner product between an object encoding and an action encoding measures
//! semantic affinity. The average encoder takes the mean of the label's
//! word vectors. The Fisher encoder instead describes the label's words by
//! the gradient of a diagonal Gaussian mixture's log-likelihood, which lets
//! a label cover several distinct semantic topics at once; per mixture
//! component k with weight pi_k the blocks are
//!
//! ```text
//! G_mean_k  = 1/sqrt(pi_k)   * sum_w gamma_w(k) * (x_w - mu_k) / sigma_k
//! G_sigma_k = 1/sqrt(2 pi_k) * sum_w gamma_w(k) * ((x_w - mu_k)^2 / sigma_k^2 - 1)
//! ```
//!
//! elementwise per dimension, where gamma_w(k) is the responsibility of
//! component k for word w. Words are PCA-projected before the mixture is
//! evaluated, so the mixture lives in the reduced space.
//!
//! Every finished encoding is power-normalized (signed square root) where
//! applicable and l2-normalized, so affinities are cosine-like; the
//! normalization can be disabled. An exactly zero encoding (for example two
//! words with opposite vectors under averaging) is an error, never a
//! silently normalized zero.

use crate::embedding::{EmbeddingTable, LabelDescription};
use crate::gmm::GmmModel;
use crate::numeric;
use crate::pca::PcaTransform;
use crate::{Error, Result};

/// Which encoder produced a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EncoderKind {
    #[serde(rename = "awv")]
    Awv,
    #[serde(rename = "fwv")]
    Fwv,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncoderKind::Awv => write!(f, "awv"),
            EncoderKind::Fwv => write!(f, "fwv"),
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awv" => Ok(EncoderKind::Awv),
            "fwv" => Ok(EncoderKind::Fwv),
            other => Err(Error::invalid(format!("unknown encoder {other:?}"))),
        }
    }
}

/// Which gradient blocks the Fisher encoder keeps.
///
/// Mean-only is the default operating point; the variance derivatives are
/// defined as well and available behind this switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum FwvBlocks {
    #[default]
    #[serde(rename = "mean")]
    MeanOnly,
    #[serde(rename = "mean-variance")]
    MeanAndVariance,
}

impl std::fmt::Display for FwvBlocks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FwvBlocks::MeanOnly => write!(f, "mean"),
            FwvBlocks::MeanAndVariance => write!(f, "mean-variance"),
        }
    }
}

impl std::str::FromStr for FwvBlocks {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(FwvBlocks::MeanOnly),
            "mean-variance" => Ok(FwvBlocks::MeanAndVariance),
            other => Err(Error::invalid(format!(
                "unknown block selection {other:?}, expected \"mean\" or \"mean-variance\""
            ))),
        }
    }
}

/// An encoded label.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    pub encoder: EncoderKind,
    pub values: Vec<f64>,
}

/// Unnormalized Fisher gradient blocks, component-major: entry
/// `k * dim + d` belongs to component `k`, dimension `d`.
#[derive(Debug, Clone)]
pub struct FisherBlocks {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Computes the raw Fisher blocks of a word set under `model`.
///
/// `words` must already live in the model's space (PCA-projected).
pub fn fisher_blocks(words: &[Vec<f64>], model: &GmmModel) -> Result<FisherBlocks> {
    if words.is_empty() {
        return Err(Error::invalid("Fisher blocks of an empty word set"));
    }
    let k = model.k();
    let dim = model.dim();
    let mut mean = vec![0.0; k * dim];
    let mut variance = vec![0.0; k * dim];
    for x in words {
        let gamma = model.responsibilities(x)?;
        for comp in 0..k {
            let g = gamma[comp];
            let mu = &model.means()[comp];
            let sigma = &model.stddevs()[comp];
            for d in 0..dim {
                let z = (x[d] - mu[d]) / sigma[d];
                mean[comp * dim + d] += g * z;
                variance[comp * dim + d] += g * (z * z - 1.0);
            }
        }
    }
    for comp in 0..k {
        let w_mean = 1.0 / model.weights()[comp].sqrt();
        let w_var = 1.0 / (2.0 * model.weights()[comp]).sqrt();
        for d in 0..dim {
            mean[comp * dim + d] *= w_mean;
            variance[comp * dim + d] *= w_var;
        }
    }
    Ok(FisherBlocks { mean, variance })
}

/// Encodes a label as the mean of its resolved word vectors.
pub fn encode_awv(
    label: &LabelDescription,
    table: &EmbeddingTable,
    normalize: bool,
) -> Result<SemanticVector> {
    let words = encodable_vectors(label, table, None)?;
    let dim = table.dim();
    let mut values = vec![0.0; dim];
    for w in &words {
        for (v, x) in values.iter_mut().zip(w.iter()) {
            *v += x;
        }
    }
    let count = words.len() as f64;
    for v in values.iter_mut() {
        *v /= count;
    }
    finish(values, EncoderKind::Awv, label, normalize, false)
}

/// Encodes a label as the Fisher gradient of its PCA-projected words.
pub fn encode_fwv(
    label: &LabelDescription,
    table: &EmbeddingTable,
    pca: &PcaTransform,
    model: &GmmModel,
    blocks: FwvBlocks,
    normalize: bool,
) -> Result<SemanticVector> {
    if model.dim() != pca.output_dim() {
        return Err(Error::invalid(format!(
            "mixture dimensionality {} does not match PCA output {}",
            model.dim(),
            pca.output_dim()
        )));
    }
    let words = encodable_vectors(label, table, None)?;
    let projected: Vec<Vec<f64>> = words
        .iter()
        .map(|w| pca.project(w))
        .collect::<Result<_>>()?;
    let raw = fisher_blocks(&projected, model)?;
    let values = concatenate_blocks(&raw, blocks, model.k(), model.dim());
    finish(values, EncoderKind::Fwv, label, normalize, normalize)
}

fn concatenate_blocks(raw: &FisherBlocks, blocks: FwvBlocks, k: usize, dim: usize) -> Vec<f64> {
    match blocks {
        FwvBlocks::MeanOnly => raw.mean.clone(),
        FwvBlocks::MeanAndVariance => {
            // Per-component concatenation: mean block then variance block.
            let mut out = Vec::with_capacity(2 * k * dim);
            for comp in 0..k {
                out.extend_from_slice(&raw.mean[comp * dim..(comp + 1) * dim]);
                out.extend_from_slice(&raw.variance[comp * dim..(comp + 1) * dim]);
            }
            out
        }
    }
}

fn encodable_vectors<'t>(
    label: &LabelDescription,
    table: &'t EmbeddingTable,
    index: Option<usize>,
) -> Result<Vec<&'t [f64]>> {
    if !label.is_encodable() {
        return Err(Error::UnencodableLabel {
            label: label.raw().to_string(),
            index,
        });
    }
    Ok(label.resolved_vectors(table))
}

fn finish(
    mut values: Vec<f64>,
    encoder: EncoderKind,
    label: &LabelDescription,
    normalize: bool,
    power: bool,
) -> Result<SemanticVector> {
    if numeric::l2_norm(&values) == 0.0 {
        return Err(Error::DegenerateEncoding {
            label: label.raw().to_string(),
        });
    }
    if power {
        numeric::signed_power(&mut values, 0.5);
    }
    if normalize {
        let ok = numeric::l2_normalize(&mut values);
        debug_assert!(ok, "zero norm was ruled out above");
    }
    Ok(SemanticVector { encoder, values })
}

/// Encoder selection for batch encoding.
#[derive(Debug, Clone, Copy)]
pub enum Encoder<'a> {
    Awv,
    Fwv {
        pca: &'a PcaTransform,
        model: &'a GmmModel,
        blocks: FwvBlocks,
    },
}

impl Encoder<'_> {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Awv => EncoderKind::Awv,
            Encoder::Fwv { .. } => EncoderKind::Fwv,
        }
    }

    /// Output dimensionality for a table of dimensionality `table_dim`.
    pub fn output_dim(&self, table_dim: usize) -> usize {
        match self {
            Encoder::Awv => table_dim,
            Encoder::Fwv { model, blocks, .. } => {
                let per_block = model.k() * model.dim();
                match blocks {
                    FwvBlocks::MeanOnly => per_block,
                    FwvBlocks::MeanAndVariance => 2 * per_block,
                }
            }
        }
    }
}

/// A batch of encoded labels, one row per label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedLabels {
    pub encoder: EncoderKind,
    pub dim: usize,
    pub names: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl EncodedLabels {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Encodes every label, failing on the first unencodable one with its
/// index.
pub fn encode_all(
    labels: &[LabelDescription],
    table: &EmbeddingTable,
    encoder: Encoder<'_>,
    normalize: bool,
) -> Result<EncodedLabels> {
    let dim = encoder.output_dim(table.dim());
    let mut names = Vec::with_capacity(labels.len());
    let mut vectors = Vec::with_capacity(labels.len());
    for (index, label) in labels.iter().enumerate() {
        if !label.is_encodable() {
            return Err(Error::UnencodableLabel {
                label: label.raw().to_string(),
                index: Some(index),
            });
        }
        let encoded = match encoder {
            Encoder::Awv => encode_awv(label, table, normalize)?,
            Encoder::Fwv { pca, model, blocks } => {
                encode_fwv(label, table, pca, model, blocks, normalize)?
            }
        };
        names.push(label.raw().to_string());
        vectors.push(encoded.values);
    }
    Ok(EncodedLabels {
        encoder: encoder.kind(),
        dim,
        names,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_from(rows: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        let dim = rows[0].1.len();
        EmbeddingTable::new(
            dim,
            rows.iter().map(|(t, v)| (t.to_string(), v.clone())).collect(),
        )
        .unwrap()
    }

    fn label(raw: &str, table: &EmbeddingTable) -> LabelDescription {
        LabelDescription::new(raw, table).unwrap()
    }

    #[test]
    fn awv_of_single_word_is_the_normalized_vector() {
        let table = table_from(&[("kayak", vec![3.0, 4.0])]);
        let encoded = encode_awv(&label("kayak", &table), &table, true).unwrap();
        assert_eq!(encoded.values, vec![0.6, 0.8]);
    }

    #[test]
    fn awv_cancellation_is_a_degenerate_encoding() {
        let table = table_from(&[("up", vec![1.0, -2.0]), ("down", vec![-1.0, 2.0])]);
        let err = encode_awv(&label("up down", &table), &table, true).unwrap_err();
        assert!(matches!(err, Error::DegenerateEncoding { .. }));
    }

    #[test]
    fn awv_matches_direct_mean_of_three_words() {
        let table = table_from(&[
            ("a", vec![0.3, -1.2, 0.7, 2.0]),
            ("b", vec![-0.5, 0.1, 1.3, -0.4]),
            ("c", vec![2.2, 0.9, -0.6, 0.5]),
        ]);
        let encoded = encode_awv(&label("a b c", &table), &table, true).unwrap();
        let mut expected = vec![0.0; 4];
        for token in ["a", "b", "c"] {
            for (e, v) in expected.iter_mut().zip(table.lookup(token).unwrap()) {
                *e += v / 3.0;
            }
        }
        let norm: f64 = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (got, want) in encoded.values.iter().zip(&expected) {
            assert!((got - want / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn awv_is_word_order_invariant() {
        let table = table_from(&[("a", vec![1.0, 2.0]), ("b", vec![-0.5, 0.3])]);
        let ab = encode_awv(&label("a b", &table), &table, true).unwrap();
        let ba = encode_awv(&label("b a", &table), &table, true).unwrap();
        assert_eq!(ab.values, ba.values);
    }

    #[test]
    fn unencodable_label_is_rejected_by_name() {
        let table = table_from(&[("water", vec![1.0])]);
        let err = encode_awv(&label("kayaking", &table), &table, true).unwrap_err();
        match err {
            Error::UnencodableLabel { label, .. } => assert_eq!(label, "kayaking"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fisher_blocks_at_the_mode_are_analytic() {
        // Single component, single word exactly at the mean: mean block is
        // zero and each variance entry is -1/sqrt(2) before normalization.
        let model =
            GmmModel::new(vec![1.0], vec![vec![0.5, -0.25]], vec![vec![1.0, 1.0]]).unwrap();
        let blocks = fisher_blocks(&[vec![0.5, -0.25]], &model).unwrap();
        assert_eq!(blocks.mean, vec![0.0, 0.0]);
        for v in &blocks.variance {
            assert!((v - (-1.0 / 2.0f64.sqrt())).abs() < 1e-15);
        }
    }

    #[test]
    fn fisher_mean_block_cancels_for_symmetric_words() {
        let model = GmmModel::new(vec![1.0], vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let blocks = fisher_blocks(&[vec![1.5], vec![-1.5]], &model).unwrap();
        assert!(blocks.mean[0].abs() < 1e-15);
    }

    fn random_model(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> GmmModel {
        let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let means = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let stddevs = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(0.4..1.3)).collect())
            .collect();
        GmmModel::new(weights, means, stddevs).unwrap()
    }

    /// Finite-difference gradient of the mixture log-likelihood with
    /// respect to one mean coordinate.
    fn fd_mean_gradient(model: &GmmModel, words: &[Vec<f64>], comp: usize, d: usize, h: f64) -> f64 {
        let perturb = |delta: f64| {
            let mut means = model.means().to_vec();
            means[comp][d] += delta;
            GmmModel::new(model.weights().to_vec(), means, model.stddevs().to_vec())
                .unwrap()
                .log_likelihood(words)
                .unwrap()
        };
        (perturb(h) - perturb(-h)) / (2.0 * h)
    }

    fn fd_sigma_gradient(model: &GmmModel, words: &[Vec<f64>], comp: usize, d: usize, h: f64) -> f64 {
        let perturb = |delta: f64| {
            let mut stddevs = model.stddevs().to_vec();
            stddevs[comp][d] += delta;
            GmmModel::new(model.weights().to_vec(), model.means().to_vec(), stddevs)
                .unwrap()
                .log_likelihood(words)
                .unwrap()
        };
        (perturb(h) - perturb(-h)) / (2.0 * h)
    }

    #[test]
    fn fisher_blocks_match_finite_difference_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let h = 1e-5;
        for _ in 0..20 {
            let k = rng.random_range(1..=3);
            let dim = if rng.random::<bool>() { 4 } else { 8 };
            let model = random_model(&mut rng, k, dim);
            let words: Vec<Vec<f64>> = (0..rng.random_range(1..=6))
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let blocks = fisher_blocks(&words, &model).unwrap();
            for comp in 0..k {
                for d in 0..dim {
                    let sigma = model.stddevs()[comp][d];
                    let pi = model.weights()[comp];
                    let expected_mean = fd_mean_gradient(&model, &words, comp, d, h) * sigma / pi.sqrt();
                    let got_mean = blocks.mean[comp * dim + d];
                    let tol = 1e-4 * expected_mean.abs().max(1.0);
                    assert!(
                        (got_mean - expected_mean).abs() <= tol,
                        "mean block ({comp},{d}): {got_mean} vs {expected_mean}"
                    );
                    let expected_var =
                        fd_sigma_gradient(&model, &words, comp, d, h) * sigma / (2.0 * pi).sqrt();
                    let got_var = blocks.variance[comp * dim + d];
                    let tol = 1e-4 * expected_var.abs().max(1.0);
                    assert!(
                        (got_var - expected_var).abs() <= tol,
                        "variance block ({comp},{d}): {got_var} vs {expected_var}"
                    );
                }
            }
        }
    }

    fn toy_fwv_setup() -> (EmbeddingTable, PcaTransform, GmmModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<(String, Vec<f64>)> = (0..12)
            .map(|i| {
                (
                    format!("w{i}"),
                    (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let table = EmbeddingTable::new(6, rows).unwrap();
        let data: Vec<Vec<f64>> = table.iter().map(|(_, v)| v.to_vec()).collect();
        let pca = crate::pca::fit(&data, 3).unwrap();
        let projected = pca.project_all(&data).unwrap();
        let model = gmm::fit(&projected, 2, 17).unwrap().model;
        (table, pca, model)
    }

    #[test]
    fn fwv_is_word_order_invariant_and_unit_norm() {
        let (table, pca, model) = toy_fwv_setup();
        let a = encode_fwv(
            &label("w1 w4 w7", &table),
            &table,
            &pca,
            &model,
            FwvBlocks::MeanOnly,
            true,
        )
        .unwrap();
        let b = encode_fwv(
            &label("w7 w1 w4", &table),
            &table,
            &pca,
            &model,
            FwvBlocks::MeanOnly,
            true,
        )
        .unwrap();
        // Order-invariant as a sum over words; summation order may differ
        // in the last bits.
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
        assert_eq!(a.values.len(), model.k() * model.dim());
    }

    #[test]
    fn fwv_mean_and_variance_doubles_the_dimensionality() {
        let (table, pca, model) = toy_fwv_setup();
        let enc = encode_fwv(
            &label("w2 w3", &table),
            &table,
            &pca,
            &model,
            FwvBlocks::MeanAndVariance,
            true,
        )
        .unwrap();
        assert_eq!(enc.values.len(), 2 * model.k() * model.dim());
    }

    #[test]
    fn encode_all_reports_the_failing_index() {
        let table = table_from(&[("water", vec![1.0, 0.0])]);
        let labels = vec![
            label("water", &table),
            label("xyzzy", &table),
        ];
        let err = encode_all(&labels, &table, Encoder::Awv, true).unwrap_err();
        match err {
            Error::UnencodableLabel { label, index } => {
                assert_eq!(label, "xyzzy");
                assert_eq!(index, Some(1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn encode_all_empty_list_yields_empty_matrix() {
        let table = table_from(&[("water", vec![1.0, 0.0])]);
        let encoded = encode_all(&[], &table, Encoder::Awv, true).unwrap();
        assert!(encoded.is_empty());
        assert_eq!(encoded.dim, 2);
    }

    #[test]
    fn encode_all_rows_match_single_label_encodings() {
        let (table, pca, model) = toy_fwv_setup();
        let raws = ["w0 w5", "w3", "w8 w2 w11"];
        let labels: Vec<LabelDescription> =
            raws.iter().map(|r| label(r, &table)).collect();
        let encoder = Encoder::Fwv {
            pca: &pca,
            model: &model,
            blocks: FwvBlocks::MeanOnly,
        };
        let batch = encode_all(&labels, &table, encoder, true).unwrap();
        for (i, l) in labels.iter().enumerate() {
            let single =
                encode_fwv(l, &table, &pca, &model, FwvBlocks::MeanOnly, true).unwrap();
            assert_eq!(batch.vectors[i], single.values, "row {i}");
        }
        assert_eq!(batch.names, raws.map(String::from).to_vec());
    }

    #[test]
    fn tokenize_then_encode_is_deterministic() {
        let (table, pca, model) = toy_fwv_setup();
        let l = label("w1 w2", &table);
        let a = encode_fwv(&l, &table, &pca, &model, FwvBlocks::MeanOnly, true).unwrap();
        let b = encode_fwv(&l, &table, &pca, &model, FwvBlocks::MeanOnly, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unnormalized_awv_keeps_the_raw_mean() {
        let table = table_from(&[("a", vec![2.0, 0.0]), ("b", vec![0.0, 4.0])]);
        let enc = encode_awv(&label("a b", &table), &table, false).unwrap();
        assert_eq!(enc.values, vec![1.0, 2.0]);
    }
}
