//! Text file formats for the pipeline handoffs.
//!
//! Everything is line-oriented text. Model artifacts (PCA + mixture,
//! encoded label matrices, affinity matrices) print floats at 17
//! significant digits so a save/load round trip is exact. Tabular files
//! (scores, ground truth, predictions, detections, metric reports) are
//! tab-separated; lines starting with `#` are comments and readers skip
//! them, which is where output files carry their configuration hash.
//!
//! Formats:
//!
//! - score table: header `id<TAB>obj1<TAB>...`, then one row per video or
//!   tube: id followed by the object scores. Several rows may share an id,
//!   in which case they are that video's per-frame scores.
//! - tube file: `objects<TAB>...` header (when scores are carried), then
//!   per tube a `tube<TAB>video<TAB>id<TAB>nframes` line, `nframes` lines
//!   `frame<TAB>index<TAB>x<TAB>y<TAB>width<TAB>height`, and an optional
//!   `scores<TAB>...` line. Ground-truth tubes omit objects and scores.
//! - ground-truth labels: `video<TAB>action` rows.
//! - predictions: `video<TAB>rank<TAB>action<TAB>score` rows; detections
//!   append a fifth `tube` column.
//! - metric report: `metric`, `value`, `class`, `curve`, and `warning`
//!   rows; a JSON rendering of [`MetricReport`] serves as the structured
//!   variant for tooling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::encoding::{EncodedLabels, EncoderKind};
use crate::engine::{Prediction, TubeFrame};
use crate::evaluation::MetricReport;
use crate::gmm::GmmModel;
use crate::pca::PcaTransform;
use crate::translation::{AffinityMatrix, Sparsity};
use crate::{Error, Result};

/// Formats a float at 17 significant digits; parsing the result recovers
/// the identical value.
fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_full(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&full(*v));
    }
    out
}

/// Line reader that tracks positions for error reporting.
struct Lines<R> {
    inner: std::io::Lines<R>,
    path: PathBuf,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R, path: &Path) -> Self {
        Lines {
            inner: reader.lines(),
            path: path.to_path_buf(),
            line: 0,
        }
    }

    fn next_raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            Some(line) => {
                self.line += 1;
                Ok(Some(line?))
            }
            None => Ok(None),
        }
    }

    /// Next non-comment, non-blank line.
    fn next_content(&mut self) -> Result<Option<String>> {
        while let Some(line) = self.next_raw()? {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(Some(line));
        }
        Ok(None)
    }

    fn expect_content(&mut self, what: &str) -> Result<String> {
        self.next_content()?
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(&self.path, self.line, message)
    }

    fn parse_floats(&self, text: &str) -> Result<Vec<f64>> {
        text.split_whitespace()
            .map(|field| {
                let v: f64 = field
                    .parse()
                    .map_err(|_| self.err(format!("bad float {field:?}")))?;
                if !v.is_finite() {
                    return Err(self.err(format!("non-finite value {field:?}")));
                }
                Ok(v)
            })
            .collect()
    }

    /// Splits `line` as `prefix<TAB>rest`, requiring the given prefix.
    fn expect_prefixed<'l>(&self, line: &'l str, prefix: &str) -> Result<&'l str> {
        match line.split_once('\t') {
            Some((head, rest)) if head == prefix => Ok(rest),
            _ => Err(self.err(format!("expected a {prefix:?} line, got {line:?}"))),
        }
    }
}

fn open(path: &Path) -> Result<Lines<BufReader<std::fs::File>>> {
    let file = std::fs::File::open(path)?;
    Ok(Lines::new(BufReader::new(file), path))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

// ---------------------------------------------------------------------------
// Label lists

/// Reads a label list: one raw class name per line, `#` comments and blank
/// lines skipped.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut lines = open(path.as_ref())?;
    let mut labels = Vec::new();
    while let Some(line) = lines.next_content()? {
        labels.push(line.trim().to_string());
    }
    if labels.is_empty() {
        return Err(lines.err("label file has no labels"));
    }
    Ok(labels)
}

// ---------------------------------------------------------------------------
// Semantic model artifact (PCA + GMM)

/// The fitted encoder prior: PCA transform plus the Gaussian mixture in
/// PCA space, with the configuration hash it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticModel {
    pub embedding_dim: usize,
    pub pca: PcaTransform,
    pub gmm: GmmModel,
    pub config_hash: String,
}

pub fn write_semantic_model(writer: &mut impl Write, model: &SemanticModel) -> Result<()> {
    writeln!(writer, "semantic-model 1")?;
    writeln!(writer, "config-hash\t{}", model.config_hash)?;
    writeln!(writer, "embedding-dim\t{}", model.embedding_dim)?;
    writeln!(
        writer,
        "pca\t{}\t{}",
        model.pca.input_dim(),
        model.pca.output_dim()
    )?;
    writeln!(writer, "pca-mean\t{}", join_full(model.pca.mean()))?;
    for row in model.pca.components() {
        writeln!(writer, "pca-component\t{}", join_full(row))?;
    }
    writeln!(writer, "gmm\t{}\t{}", model.gmm.k(), model.gmm.dim())?;
    writeln!(writer, "gmm-weights\t{}", join_full(model.gmm.weights()))?;
    for mean in model.gmm.means() {
        writeln!(writer, "gmm-mean\t{}", join_full(mean))?;
    }
    for stddev in model.gmm.stddevs() {
        writeln!(writer, "gmm-stddev\t{}", join_full(stddev))?;
    }
    Ok(())
}

pub fn read_semantic_model(reader: impl BufRead, path: impl AsRef<Path>) -> Result<SemanticModel> {
    let mut lines = Lines::new(reader, path.as_ref());
    let header = lines.expect_content("a semantic-model header")?;
    if header.trim() != "semantic-model 1" {
        return Err(lines.err(format!("unsupported header {header:?}")));
    }
    let config_hash = {
        let line = lines.expect_content("config-hash")?;
        lines.expect_prefixed(&line, "config-hash")?.to_string()
    };
    let embedding_dim: usize = {
        let line = lines.expect_content("embedding-dim")?;
        let rest = lines.expect_prefixed(&line, "embedding-dim")?;
        rest.trim()
            .parse()
            .map_err(|_| lines.err(format!("bad embedding-dim {rest:?}")))?
    };

    let (input_dim, output_dim) = {
        let line = lines.expect_content("pca")?;
        let rest = lines.expect_prefixed(&line, "pca")?;
        let mut parts = rest.split('\t');
        let parse = |p: Option<&str>, what: &str| -> Result<usize> {
            p.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| lines.err(format!("bad pca {what}")))
        };
        (
            parse(parts.next(), "input dimension")?,
            parse(parts.next(), "output dimension")?,
        )
    };
    let mean = {
        let line = lines.expect_content("pca-mean")?;
        lines.parse_floats(lines.expect_prefixed(&line, "pca-mean")?)?
    };
    if mean.len() != input_dim {
        return Err(lines.err(format!(
            "pca-mean has {} values, expected {input_dim}",
            mean.len()
        )));
    }
    let mut components = Vec::with_capacity(output_dim);
    for _ in 0..output_dim {
        let line = lines.expect_content("pca-component")?;
        let row = lines.parse_floats(lines.expect_prefixed(&line, "pca-component")?)?;
        if row.len() != input_dim {
            return Err(lines.err(format!(
                "pca-component has {} values, expected {input_dim}",
                row.len()
            )));
        }
        components.push(row);
    }
    let pca = PcaTransform::new(mean, components)?;

    let (k, gmm_dim) = {
        let line = lines.expect_content("gmm")?;
        let rest = lines.expect_prefixed(&line, "gmm")?;
        let mut parts = rest.split('\t');
        let parse = |p: Option<&str>, what: &str| -> Result<usize> {
            p.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| lines.err(format!("bad gmm {what}")))
        };
        (parse(parts.next(), "component count")?, parse(parts.next(), "dimension")?)
    };
    let weights = {
        let line = lines.expect_content("gmm-weights")?;
        lines.parse_floats(lines.expect_prefixed(&line, "gmm-weights")?)?
    };
    if weights.len() != k {
        return Err(lines.err(format!("gmm-weights has {} values, expected {k}", weights.len())));
    }
    let mut read_rows = |prefix: &str| -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::with_capacity(k);
        for _ in 0..k {
            let line = lines.expect_content(prefix)?;
            let row = lines.parse_floats(lines.expect_prefixed(&line, prefix)?)?;
            if row.len() != gmm_dim {
                return Err(lines.err(format!(
                    "{prefix} has {} values, expected {gmm_dim}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(rows)
    };
    let means = read_rows("gmm-mean")?;
    let stddevs = read_rows("gmm-stddev")?;
    let gmm = GmmModel::new(weights, means, stddevs)?;
    if gmm.dim() != pca.output_dim() {
        return Err(Error::invalid(format!(
            "mixture dimensionality {} does not match PCA output {}",
            gmm.dim(),
            pca.output_dim()
        )));
    }
    Ok(SemanticModel {
        embedding_dim,
        pca,
        gmm,
        config_hash,
    })
}

pub fn save_semantic_model(path: impl AsRef<Path>, model: &SemanticModel) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_semantic_model(&mut writer, model)
}

pub fn load_semantic_model(path: impl AsRef<Path>) -> Result<SemanticModel> {
    let path = path.as_ref();
    read_semantic_model(BufReader::new(std::fs::File::open(path)?), path)
}

// ---------------------------------------------------------------------------
// Encoded label matrices

pub fn write_encoded_labels(
    writer: &mut impl Write,
    encoded: &EncodedLabels,
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "encoded-labels 1")?;
    writeln!(writer, "config-hash\t{config_hash}")?;
    writeln!(writer, "encoder\t{}", encoded.encoder)?;
    writeln!(writer, "dim\t{}", encoded.dim)?;
    writeln!(writer, "count\t{}", encoded.len())?;
    for (name, vector) in encoded.names.iter().zip(&encoded.vectors) {
        writeln!(writer, "{name}\t{}", join_full(vector))?;
    }
    Ok(())
}

pub fn read_encoded_labels(
    reader: impl BufRead,
    path: impl AsRef<Path>,
) -> Result<(EncodedLabels, String)> {
    let mut lines = Lines::new(reader, path.as_ref());
    let header = lines.expect_content("an encoded-labels header")?;
    if header.trim() != "encoded-labels 1" {
        return Err(lines.err(format!("unsupported header {header:?}")));
    }
    let config_hash = {
        let line = lines.expect_content("config-hash")?;
        lines.expect_prefixed(&line, "config-hash")?.to_string()
    };
    let encoder: EncoderKind = {
        let line = lines.expect_content("encoder")?;
        lines.expect_prefixed(&line, "encoder")?.trim().parse()?
    };
    let dim: usize = {
        let line = lines.expect_content("dim")?;
        let rest = lines.expect_prefixed(&line, "dim")?;
        rest.trim()
            .parse()
            .map_err(|_| lines.err(format!("bad dim {rest:?}")))?
    };
    let count: usize = {
        let line = lines.expect_content("count")?;
        let rest = lines.expect_prefixed(&line, "count")?;
        rest.trim()
            .parse()
            .map_err(|_| lines.err(format!("bad count {rest:?}")))?
    };
    let mut names = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.expect_content("a label row")?;
        let (name, values) = line
            .split_once('\t')
            .ok_or_else(|| lines.err("label row is missing its tab separator"))?;
        let vector = lines.parse_floats(values)?;
        if vector.len() != dim {
            return Err(lines.err(format!(
                "label {name:?} has {} values, expected {dim}",
                vector.len()
            )));
        }
        names.push(name.to_string());
        vectors.push(vector);
    }
    Ok((
        EncodedLabels {
            encoder,
            dim,
            names,
            vectors,
        },
        config_hash,
    ))
}

pub fn save_encoded_labels(
    path: impl AsRef<Path>,
    encoded: &EncodedLabels,
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_encoded_labels(&mut writer, encoded, config_hash)
}

pub fn load_encoded_labels(path: impl AsRef<Path>) -> Result<(EncodedLabels, String)> {
    let path = path.as_ref();
    read_encoded_labels(BufReader::new(std::fs::File::open(path)?), path)
}

// ---------------------------------------------------------------------------
// Affinity matrices

pub fn write_affinity(
    writer: &mut impl Write,
    matrix: &AffinityMatrix,
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "affinity-matrix 1")?;
    writeln!(writer, "config-hash\t{config_hash}")?;
    writeln!(writer, "sparsity\t{}", matrix.sparsity())?;
    writeln!(writer, "actions\t{}", matrix.actions().join("\t"))?;
    for (i, object) in matrix.objects().iter().enumerate() {
        writeln!(writer, "{object}\t{}", join_full(matrix.object_row(i)))?;
    }
    Ok(())
}

fn parse_sparsity(text: &str) -> Option<Sparsity> {
    match text {
        "dense" => Some(Sparsity::Dense),
        "video-side-deferred" => Some(Sparsity::VideoSideDeferred),
        other => other
            .strip_prefix("action-top-")
            .and_then(|t| t.parse().ok())
            .map(|t_z| Sparsity::ActionTop { t_z }),
    }
}

pub fn read_affinity(
    reader: impl BufRead,
    path: impl AsRef<Path>,
) -> Result<(AffinityMatrix, String)> {
    let mut lines = Lines::new(reader, path.as_ref());
    let header = lines.expect_content("an affinity-matrix header")?;
    if header.trim() != "affinity-matrix 1" {
        return Err(lines.err(format!("unsupported header {header:?}")));
    }
    let config_hash = {
        let line = lines.expect_content("config-hash")?;
        lines.expect_prefixed(&line, "config-hash")?.to_string()
    };
    let sparsity = {
        let line = lines.expect_content("sparsity")?;
        let rest = lines.expect_prefixed(&line, "sparsity")?;
        parse_sparsity(rest.trim())
            .ok_or_else(|| lines.err(format!("unknown sparsity tag {rest:?}")))?
    };
    let actions: Vec<String> = {
        let line = lines.expect_content("actions")?;
        lines
            .expect_prefixed(&line, "actions")?
            .split('\t')
            .map(str::to_string)
            .collect()
    };
    let mut objects = Vec::new();
    let mut values = Vec::new();
    while let Some(line) = lines.next_content()? {
        let (object, row) = line
            .split_once('\t')
            .ok_or_else(|| lines.err("object row is missing its tab separator"))?;
        let row = lines.parse_floats(row)?;
        if row.len() != actions.len() {
            return Err(lines.err(format!(
                "object {object:?} has {} affinities, expected {}",
                row.len(),
                actions.len()
            )));
        }
        objects.push(object.to_string());
        values.extend(row);
    }
    let matrix = AffinityMatrix::from_parts(objects, actions, values, sparsity)?;
    Ok((matrix, config_hash))
}

pub fn save_affinity(
    path: impl AsRef<Path>,
    matrix: &AffinityMatrix,
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_affinity(&mut writer, matrix, config_hash)
}

pub fn load_affinity(path: impl AsRef<Path>) -> Result<(AffinityMatrix, String)> {
    let path = path.as_ref();
    read_affinity(BufReader::new(std::fs::File::open(path)?), path)
}

// ---------------------------------------------------------------------------
// Score tables

/// Raw object scores for a batch of videos or tubes: the object name
/// header plus one row of scores per id. Rows sharing an id are per-frame
/// scores for that id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub object_names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ScoreTable {
    /// Groups rows by id, preserving first-appearance order.
    pub fn grouped(&self) -> Vec<(String, Vec<&[f64]>)> {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
        for (id, values) in &self.rows {
            if !groups.contains_key(id.as_str()) {
                order.push(id.clone());
            }
            groups.entry(id).or_default().push(values.as_slice());
        }
        order
            .into_iter()
            .map(|id| {
                let frames = groups.remove(id.as_str()).expect("id was inserted");
                (id, frames)
            })
            .collect()
    }
}

pub fn read_score_table(reader: impl BufRead, path: impl AsRef<Path>) -> Result<ScoreTable> {
    let mut lines = Lines::new(reader, path.as_ref());
    let header = lines.expect_content("a score table header")?;
    let mut fields = header.split('\t');
    match fields.next() {
        Some("id") => {}
        _ => return Err(lines.err("score table header must start with \"id\"")),
    }
    let object_names: Vec<String> = fields.map(str::to_string).collect();
    if object_names.is_empty() {
        return Err(lines.err("score table header lists no objects"));
    }
    let mut rows = Vec::new();
    while let Some(line) = lines.next_content()? {
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| lines.err("score row is missing its tab separator"))?;
        let values = lines.parse_floats(values)?;
        if values.len() != object_names.len() {
            return Err(lines.err(format!(
                "row {id:?} has {} scores, expected {}",
                values.len(),
                object_names.len()
            )));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(lines.err(format!("row {id:?} has negative scores")));
        }
        rows.push((id.to_string(), values));
    }
    Ok(ScoreTable { object_names, rows })
}

pub fn write_score_table(writer: &mut impl Write, table: &ScoreTable) -> Result<()> {
    let mut header = String::from("id");
    for name in &table.object_names {
        write!(header, "\t{name}").expect("writing to String cannot fail");
    }
    writeln!(writer, "{header}")?;
    for (id, values) in &table.rows {
        let mut line = id.clone();
        for v in values {
            write!(line, "\t{v}").expect("writing to String cannot fail");
        }
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    read_score_table(BufReader::new(std::fs::File::open(path)?), path)
}

pub fn save_score_table(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_score_table(&mut writer, table)
}

// ---------------------------------------------------------------------------
// Tube files

/// One tube record: geometry plus optional object scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeRecord {
    pub video_id: String,
    pub tube_id: String,
    pub frames: Vec<TubeFrame>,
    pub scores: Option<Vec<f64>>,
}

/// A parsed tube file. `object_names` is present when the file carries
/// scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeFile {
    pub object_names: Option<Vec<String>>,
    pub tubes: Vec<TubeRecord>,
}

pub fn read_tube_file(reader: impl BufRead, path: impl AsRef<Path>) -> Result<TubeFile> {
    let mut lines = Lines::new(reader, path.as_ref());
    let header = lines.expect_content("a tube-file header")?;
    if header.trim() != "tube-file 1" {
        return Err(lines.err(format!("unsupported header {header:?}")));
    }

    let mut object_names: Option<Vec<String>> = None;
    let mut tubes: Vec<TubeRecord> = Vec::new();
    let mut pending = lines.next_content()?;
    if let Some(line) = &pending {
        if let Some(rest) = line.strip_prefix("objects\t") {
            object_names = Some(rest.split('\t').map(str::to_string).collect());
            pending = lines.next_content()?;
        }
    }

    while let Some(line) = pending {
        let rest = lines.expect_prefixed(&line, "tube")?;
        let mut parts = rest.split('\t');
        let video_id = parts
            .next()
            .ok_or_else(|| lines.err("tube line is missing the video id"))?
            .to_string();
        let tube_id = parts
            .next()
            .ok_or_else(|| lines.err("tube line is missing the tube id"))?
            .to_string();
        let frame_count: usize = parts
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| lines.err("tube line is missing a valid frame count"))?;
        if frame_count == 0 {
            return Err(lines.err(format!("tube {tube_id:?} declares zero frames")));
        }

        let mut frames = Vec::with_capacity(frame_count);
        for _ in 0..frame_count {
            let line = lines.expect_content("a frame line")?;
            let rest = lines.expect_prefixed(&line, "frame")?;
            let fields: Vec<&str> = rest.split('\t').collect();
            if fields.len() != 5 {
                return Err(lines.err(format!(
                    "frame line has {} fields, expected index, x, y, width, height",
                    fields.len()
                )));
            }
            let index: u64 = fields[0]
                .trim()
                .parse()
                .map_err(|_| lines.err(format!("bad frame index {:?}", fields[0])))?;
            let coords = lines.parse_floats(&fields[1..].join(" "))?;
            let frame = TubeFrame::new(index, coords[0], coords[1], coords[2], coords[3])
                .map_err(|e| lines.err(e.to_string()))?;
            frames.push(frame);
        }

        pending = lines.next_content()?;
        let mut scores = None;
        if let Some(line) = &pending {
            if let Some(rest) = line.strip_prefix("scores\t") {
                let values = lines.parse_floats(rest)?;
                if let Some(names) = &object_names {
                    if values.len() != names.len() {
                        return Err(lines.err(format!(
                            "tube {tube_id:?} has {} scores, header lists {} objects",
                            values.len(),
                            names.len()
                        )));
                    }
                } else {
                    return Err(lines.err("scores line requires an objects header"));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(lines.err(format!("tube {tube_id:?} has negative scores")));
                }
                scores = Some(values);
                pending = lines.next_content()?;
            }
        }

        crate::engine::validate_tube(&frames).map_err(|e| lines.err(e.to_string()))?;
        tubes.push(TubeRecord {
            video_id,
            tube_id,
            frames,
            scores,
        });
    }
    Ok(TubeFile { object_names, tubes })
}

pub fn write_tube_file(writer: &mut impl Write, file: &TubeFile) -> Result<()> {
    writeln!(writer, "tube-file 1")?;
    if let Some(names) = &file.object_names {
        writeln!(writer, "objects\t{}", names.join("\t"))?;
    }
    for tube in &file.tubes {
        writeln!(
            writer,
            "tube\t{}\t{}\t{}",
            tube.video_id,
            tube.tube_id,
            tube.frames.len()
        )?;
        for f in &tube.frames {
            writeln!(
                writer,
                "frame\t{}\t{}\t{}\t{}\t{}",
                f.frame, f.x, f.y, f.width, f.height
            )?;
        }
        if let Some(scores) = &tube.scores {
            let joined: Vec<String> = scores.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "scores\t{}", joined.join(" "))?;
        }
    }
    Ok(())
}

pub fn load_tube_file(path: impl AsRef<Path>) -> Result<TubeFile> {
    let path = path.as_ref();
    read_tube_file(BufReader::new(std::fs::File::open(path)?), path)
}

pub fn save_tube_file(path: impl AsRef<Path>, file: &TubeFile) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_tube_file(&mut writer, file)
}

// ---------------------------------------------------------------------------
// Ground-truth labels

/// Reads `video<TAB>action` rows.
pub fn load_ground_truth_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let mut lines = open(path.as_ref())?;
    let mut labels = Vec::new();
    while let Some(line) = lines.next_content()? {
        let (video, action) = line
            .split_once('\t')
            .ok_or_else(|| lines.err("ground-truth row is missing its tab separator"))?;
        labels.push((video.to_string(), action.to_string()));
    }
    if labels.is_empty() {
        return Err(lines.err("ground-truth file has no rows"));
    }
    Ok(labels)
}

pub fn save_ground_truth_labels(
    path: impl AsRef<Path>,
    labels: &[(String, String)],
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    for (video, action) in labels {
        writeln!(writer, "{video}\t{action}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Predictions and detections

pub fn write_predictions(
    writer: &mut impl Write,
    predictions: &[Prediction],
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "# config-hash {config_hash}")?;
    writeln!(writer, "# video\trank\taction\tscore")?;
    for prediction in predictions {
        for (rank0, (action, score)) in prediction.ranked.iter().enumerate() {
            match &prediction.tube_id {
                Some(tube) => writeln!(
                    writer,
                    "{}\t{}\t{action}\t{score}\t{tube}",
                    prediction.video_id,
                    rank0 + 1
                )?,
                None => writeln!(
                    writer,
                    "{}\t{}\t{action}\t{score}",
                    prediction.video_id,
                    rank0 + 1
                )?,
            }
        }
    }
    Ok(())
}

/// One parsed prediction row: rank, action, score, optional tube id.
type PredictionRow = (usize, String, f64, Option<String>);

/// Reads a predictions (or detections) file back into per-video
/// predictions, file order preserved.
pub fn read_predictions(reader: impl BufRead, path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let mut lines = Lines::new(reader, path.as_ref());
    let mut order: Vec<String> = Vec::new();
    let mut by_video: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
    while let Some(line) = lines.next_content()? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(lines.err(format!(
                "prediction row has {} fields, expected video, rank, action, score[, tube]",
                fields.len()
            )));
        }
        let video = fields[0].to_string();
        let rank: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad rank {:?}", fields[1])))?;
        let score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad score {:?}", fields[3])))?;
        let tube = fields.get(4).map(|t| t.to_string());
        if !by_video.contains_key(&video) {
            order.push(video.clone());
        }
        by_video
            .entry(video)
            .or_default()
            .push((rank, fields[2].to_string(), score, tube));
    }
    let mut predictions = Vec::with_capacity(order.len());
    for video in order {
        let mut rows = by_video.remove(&video).expect("video was inserted");
        rows.sort_by_key(|(rank, ..)| *rank);
        let tube_id = rows[0].3.clone();
        predictions.push(Prediction {
            video_id: video,
            ranked: rows
                .into_iter()
                .map(|(_, action, score, _)| (action, score))
                .collect(),
            tube_id,
        });
    }
    Ok(predictions)
}

pub fn save_predictions(
    path: impl AsRef<Path>,
    predictions: &[Prediction],
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_predictions(&mut writer, predictions, config_hash)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    read_predictions(BufReader::new(std::fs::File::open(path)?), path)
}

/// Structured (JSON) variant of a prediction batch, for tooling.
pub fn save_predictions_json(
    path: impl AsRef<Path>,
    predictions: &[Prediction],
    config_hash: &str,
) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Document<'a> {
        config_hash: &'a str,
        predictions: &'a [Prediction],
    }
    let mut writer = create(path.as_ref())?;
    serde_json::to_writer_pretty(
        &mut writer,
        &Document {
            config_hash,
            predictions,
        },
    )
    .map_err(|e| Error::invalid(format!("cannot serialize predictions: {e}")))?;
    writeln!(writer)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Detections

/// One localized detection row: the chosen action and score of one
/// surviving tube.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub video_id: String,
    pub rank: usize,
    pub action: String,
    pub score: f64,
    pub tube_id: String,
}

pub fn write_detections(
    writer: &mut impl Write,
    rows: &[DetectionRow],
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "# config-hash {config_hash}")?;
    writeln!(writer, "# video\trank\taction\tscore\ttube")?;
    for row in rows {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}",
            row.video_id, row.rank, row.action, row.score, row.tube_id
        )?;
    }
    Ok(())
}

pub fn read_detections(reader: impl BufRead, path: impl AsRef<Path>) -> Result<Vec<DetectionRow>> {
    let mut lines = Lines::new(reader, path.as_ref());
    let mut rows = Vec::new();
    while let Some(line) = lines.next_content()? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(lines.err(format!(
                "detection row has {} fields, expected video, rank, action, score, tube",
                fields.len()
            )));
        }
        let rank: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad rank {:?}", fields[1])))?;
        let score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad score {:?}", fields[3])))?;
        rows.push(DetectionRow {
            video_id: fields[0].to_string(),
            rank,
            action: fields[2].to_string(),
            score,
            tube_id: fields[4].to_string(),
        });
    }
    Ok(rows)
}

pub fn save_detections(
    path: impl AsRef<Path>,
    rows: &[DetectionRow],
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_detections(&mut writer, rows, config_hash)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRow>> {
    let path = path.as_ref();
    read_detections(BufReader::new(std::fs::File::open(path)?), path)
}

// ---------------------------------------------------------------------------
// Retrieval rankings

pub fn write_rankings(
    writer: &mut impl Write,
    rankings: &[(String, Vec<(String, f64)>)],
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "# config-hash {config_hash}")?;
    writeln!(writer, "# action\trank\tvideo\tscore")?;
    for (action, ranking) in rankings {
        for (rank0, (video, score)) in ranking.iter().enumerate() {
            writeln!(writer, "{action}\t{}\t{video}\t{score}", rank0 + 1)?;
        }
    }
    Ok(())
}

/// Per-action video rankings: `(action, [(video id, score)])`.
pub type ActionRankings = Vec<(String, Vec<(String, f64)>)>;

/// Reads per-action rankings, preserving action and rank order.
pub fn read_rankings(reader: impl BufRead, path: impl AsRef<Path>) -> Result<ActionRankings> {
    let mut lines = Lines::new(reader, path.as_ref());
    let mut order: Vec<String> = Vec::new();
    let mut by_action: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    while let Some(line) = lines.next_content()? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(lines.err(format!(
                "ranking row has {} fields, expected action, rank, video, score",
                fields.len()
            )));
        }
        let action = fields[0].to_string();
        let rank: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad rank {:?}", fields[1])))?;
        let score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad score {:?}", fields[3])))?;
        if !by_action.contains_key(&action) {
            order.push(action.clone());
        }
        by_action
            .entry(action)
            .or_default()
            .push((rank, fields[2].to_string(), score));
    }
    let mut rankings = Vec::with_capacity(order.len());
    for action in order {
        let mut rows = by_action.remove(&action).expect("action was inserted");
        rows.sort_by_key(|(rank, ..)| *rank);
        rankings.push((
            action,
            rows.into_iter().map(|(_, video, score)| (video, score)).collect(),
        ));
    }
    Ok(rankings)
}

pub fn save_rankings(
    path: impl AsRef<Path>,
    rankings: &[(String, Vec<(String, f64)>)],
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_rankings(&mut writer, rankings, config_hash)
}

pub fn load_rankings(path: impl AsRef<Path>) -> Result<ActionRankings> {
    let path = path.as_ref();
    read_rankings(BufReader::new(std::fs::File::open(path)?), path)
}

// ---------------------------------------------------------------------------
// Metric reports

pub fn write_metric_report(
    writer: &mut impl Write,
    report: &MetricReport,
    config_hash: &str,
) -> Result<()> {
    writeln!(writer, "# config-hash {config_hash}")?;
    writeln!(writer, "metric\t{}", report.metric)?;
    writeln!(writer, "value\t{}", report.value)?;
    for (class, value) in &report.per_class {
        writeln!(writer, "class\t{class}\t{value}")?;
    }
    for (threshold, value) in &report.curve {
        writeln!(writer, "curve\t{threshold}\t{value}")?;
    }
    for warning in &report.warnings {
        writeln!(writer, "warning\t{warning}")?;
    }
    Ok(())
}

pub fn save_metric_report(
    path: impl AsRef<Path>,
    report: &MetricReport,
    config_hash: &str,
) -> Result<()> {
    let mut writer = create(path.as_ref())?;
    write_metric_report(&mut writer, report, config_hash)
}

/// Structured (JSON) variant of a metric report.
pub fn save_metric_report_json(
    path: impl AsRef<Path>,
    report: &MetricReport,
    config_hash: &str,
) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Document<'a> {
        config_hash: &'a str,
        #[serde(flatten)]
        report: &'a MetricReport,
    }
    let mut writer = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut writer, &Document { config_hash, report })
        .map_err(|e| Error::invalid(format!("cannot serialize metric report: {e}")))?;
    writeln!(writer)?;
    Ok(())
}

/// Loads the JSON variant of a metric report.
pub fn load_metric_report_json(path: impl AsRef<Path>) -> Result<MetricReport> {
    let text = std::fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| {
        Error::invalid(format!(
            "cannot parse metric report {}: {e}",
            path.as_ref().display()
        ))
    })
}
