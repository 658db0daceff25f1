//! Word vector storage and label tokenization.
//!
//! Word vectors are served from an immutable [`EmbeddingTable`] loaded from
//! the plain-text interchange format (`"<vocab_size> <dim>"` header followed
//! by one `"<token> <v1> ... <v_dim>"` row per word). Multi-word class names
//! are broken into embeddable tokens by [`tokenize`]: the splitting rule is
//! whitespace, underscores, hyphens, and commas, with lowercase folding and
//! no stemming, so corpora can be pre-normalized against it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::numeric;
use crate::{Error, Result};

/// Immutable vocabulary of d-dimensional word vectors.
///
/// Tokens are folded to lowercase on load and on lookup. The table never
/// fabricates a vector: absent tokens are reported as `None`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    /// Builds a table from (token, vector) pairs.
    ///
    /// Tokens are lowercased; duplicates after folding, dimension
    /// mismatches, and non-finite components are rejected.
    pub fn new(dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimensionality must be >= 1"));
        }
        let mut table = EmbeddingTable {
            dim,
            tokens: Vec::with_capacity(entries.len()),
            vectors: Vec::with_capacity(entries.len()),
            index: HashMap::with_capacity(entries.len()),
        };
        for (token, vector) in entries {
            table.insert(token, vector)?;
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        let token = token.to_lowercase();
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for token {:?} has {} components, expected {}",
                token,
                vector.len(),
                self.dim
            )));
        }
        if !numeric::all_finite(&vector) {
            return Err(Error::invalid(format!(
                "vector for token {token:?} has non-finite components"
            )));
        }
        if self.index.contains_key(&token) {
            return Err(Error::invalid(format!("duplicate token {token:?}")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.push(vector);
        Ok(())
    }

    /// Parses the text interchange format from a reader.
    ///
    /// `path` is only used to name the source in errors.
    pub fn read_from(reader: impl BufRead, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file, expected \"<vocab_size> <dim>\" header"))??;
        let mut parts = header.split_whitespace();
        let (vocab_size, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(d), None) => {
                let v: usize = v
                    .parse()
                    .map_err(|_| Error::parse(path, 1, format!("bad vocabulary size {v:?}")))?;
                let d: usize = d
                    .parse()
                    .map_err(|_| Error::parse(path, 1, format!("bad dimensionality {d:?}")))?;
                (v, d)
            }
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("malformed header {header:?}, expected \"<vocab_size> <dim>\""),
                ))
            }
        };
        if dim == 0 {
            return Err(Error::parse(path, 1, "dimensionality must be >= 1"));
        }

        let mut table = EmbeddingTable {
            dim,
            tokens: Vec::with_capacity(vocab_size),
            vectors: Vec::with_capacity(vocab_size),
            index: HashMap::with_capacity(vocab_size),
        };
        let mut line_no = 1;
        for line in lines {
            let line = line?;
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a first field");
            let mut vector = Vec::with_capacity(dim);
            for field in fields {
                let value: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad float {field:?}")))?;
                if !value.is_finite() {
                    return Err(Error::parse(path, line_no, format!("non-finite value {field:?}")));
                }
                vector.push(value);
            }
            if vector.len() != dim {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "token {:?} has {} components, header declares {}",
                        token,
                        vector.len(),
                        dim
                    ),
                ));
            }
            let folded = token.to_lowercase();
            if table.index.contains_key(&folded) {
                return Err(Error::parse(path, line_no, format!("duplicate token {folded:?}")));
            }
            table.insert(folded, vector).expect("validated entry");
        }
        if table.len() != vocab_size {
            return Err(Error::parse(
                path,
                line_no,
                format!("header declares {} rows, found {}", vocab_size, table.len()),
            ));
        }
        Ok(table)
    }

    /// Loads a table from a file in the text interchange format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file), path)
    }

    /// Writes the table in the text interchange format.
    ///
    /// Floats are printed with the shortest decimal representation that
    /// parses back to the identical value, so a save/load round trip is
    /// exact.
    pub fn write_to(&self, writer: &mut impl Write) -> Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (token, vector) in self.tokens.iter().zip(&self.vectors) {
            line.clear();
            line.push_str(token);
            for v in vector {
                write!(line, " {v}").expect("writing to String cannot fail");
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The stored vector for `token`, or `None` when absent.
    ///
    /// Lookup folds case, so a query differing only in case from a stored
    /// token resolves to the stored vector.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        let folded = token.to_lowercase();
        self.index.get(&folded).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token).is_some()
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(&self.vectors)
            .map(|(t, v)| (t.as_str(), v.as_slice()))
    }
}

/// A class name broken into embeddable word tokens.
///
/// `tokens` is the full tokenization of the raw name; `resolved` keeps only
/// the tokens present in the embedding vocabulary, order preserved. A label
/// with no resolved tokens cannot be encoded; downstream encoders reject it
/// rather than emit a zero vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDescription {
    raw: String,
    tokens: Vec<String>,
    resolved: Vec<String>,
}

impl LabelDescription {
    /// Tokenizes `raw` and resolves the tokens against `table`.
    pub fn new(raw: &str, table: &EmbeddingTable) -> Result<Self> {
        let tokens = tokenize(raw)?;
        let resolved = tokens
            .iter()
            .filter(|t| table.contains(t))
            .cloned()
            .collect();
        Ok(LabelDescription {
            raw: raw.to_string(),
            tokens,
            resolved,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens found in the embedding vocabulary, in label order.
    pub fn resolved(&self) -> &[String] {
        &self.resolved
    }

    /// True when at least one token resolved against the vocabulary.
    pub fn is_encodable(&self) -> bool {
        !self.resolved.is_empty()
    }

    /// Stored vectors of the resolved tokens.
    pub fn resolved_vectors<'t>(&self, table: &'t EmbeddingTable) -> Vec<&'t [f64]> {
        self.resolved
            .iter()
            .map(|t| table.lookup(t).expect("resolved tokens are in the table"))
            .collect()
    }
}

/// Splits a class name into lowercase word tokens.
///
/// Separators are whitespace, `_`, `-`, and `,`; empty fragments are
/// dropped. Applying `tokenize` to its own output joined by spaces returns
/// the same tokens.
pub fn tokenize(raw: &str) -> Result<Vec<String>> {
    if raw.trim().is_empty() {
        return Err(Error::invalid("label is empty or whitespace-only"));
    }
    let tokens: Vec<String> = raw
        .split(|c: char| c.is_whitespace() || c == '_' || c == '-' || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect();
    if tokens.is_empty() {
        return Err(Error::invalid(format!(
            "label {raw:?} contains no word tokens"
        )));
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = rows[0].1.len();
        EmbeddingTable::new(
            dim,
            rows.iter()
                .map(|(t, v)| (t.to_string(), v.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_header_and_rows() {
        let text = "3 4\nkayak 0.1 0.2 0.3 0.4\nwater -1 0 1 2\nsea 4 3 2 1\n";
        let table = EmbeddingTable::read_from(text.as_bytes(), "test.vec").unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.dim(), 4);
        assert_eq!(table.lookup("kayak").unwrap(), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(table.lookup("water").unwrap(), &[-1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_row_with_wrong_dimension() {
        let text = "2 4\nkayak 0.1 0.2 0.3 0.4\nwater 1 2 3\n";
        let err = EmbeddingTable::read_from(text.as_bytes(), "test.vec").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_token_naming_line() {
        let text = "2 2\nkayak 1 2\nKayak 3 4\n";
        let err = EmbeddingTable::read_from(text.as_bytes(), "test.vec").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let text = "3 2\nkayak 1 2\nwater 3 4\n";
        assert!(EmbeddingTable::read_from(text.as_bytes(), "test.vec").is_err());
    }

    #[test]
    fn lookup_folds_case_and_reports_absent_tokens() {
        let table = table_from(&[("kayak", &[1.0, 2.0]), ("water", &[3.0, 4.0])]);
        assert_eq!(table.lookup("KAYAK").unwrap(), &[1.0, 2.0]);
        assert!(table.lookup("surfboard").is_none());
    }

    #[test]
    fn tokenize_splits_on_all_separators() {
        assert_eq!(tokenize("Swing Baseball").unwrap(), ["swing", "baseball"]);
        assert_eq!(tokenize("blow_dry_hair").unwrap(), ["blow", "dry", "hair"]);
        assert_eq!(tokenize("kayak, kayaks").unwrap(), ["kayak", "kayaks"]);
        assert_eq!(tokenize("horse-riding").unwrap(), ["horse", "riding"]);
    }

    #[test]
    fn tokenize_rejects_empty_input() {
        assert!(tokenize("").is_err());
        assert!(tokenize("   ").is_err());
    }

    #[test]
    fn out_of_vocabulary_label_is_flagged_unencodable() {
        let table = table_from(&[("water", &[1.0, 0.0])]);
        let label = LabelDescription::new("kayaking", &table).unwrap();
        assert_eq!(label.tokens(), ["kayaking"]);
        assert!(label.resolved().is_empty());
        assert!(!label.is_encodable());
    }

    #[test]
    fn resolved_preserves_token_order() {
        let table = table_from(&[("hair", &[1.0]), ("blow", &[2.0])]);
        let label = LabelDescription::new("blow_dry_hair", &table).unwrap();
        assert_eq!(label.resolved(), ["blow", "hair"]);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let table = table_from(&[
            ("kayak", &[0.1, -2.5e-17, 3.0]),
            ("water", &[1.0 / 3.0, f64::MIN_POSITIVE, -0.0]),
        ]);
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let reloaded = EmbeddingTable::read_from(buf.as_slice(), "roundtrip.vec").unwrap();
        assert_eq!(reloaded.dim(), table.dim());
        assert_eq!(reloaded.tokens(), table.tokens());
        for (token, vector) in table.iter() {
            let got = reloaded.lookup(token).unwrap();
            assert_eq!(got.len(), vector.len());
            for (a, b) in got.iter().zip(vector) {
                assert_eq!(a.to_bits(), b.to_bits(), "token {token}");
            }
        }
    }
}
