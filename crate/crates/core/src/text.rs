//! Tokenization, vocabularies, and pretrained embedding ingestion.
//!
//! Embedding files use the common text layout of public pretrained vectors:
//! one `token v1 v2 ... vd` line per token, space separated.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const PAD: &str = "<pad>";
pub const OOV: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;

/// Lowercases `text`, splits on whitespace, and emits every non-alphanumeric
/// character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_lowercase().collect());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token/id bijection with two reserved ids: [`PAD_ID`] and [`OOV_ID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary directly from an ordered token list (reserved
    /// tokens excluded). Used when restoring a checkpoint.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut vocab = Self::empty();
        for (token, count) in tokens {
            let token = token.into();
            if token == PAD || token == OOV {
                return Err(Error::InvalidArgument(format!(
                    "reserved token `{token}` in vocabulary list"
                )));
            }
            if vocab.index.contains_key(&token) {
                return Err(Error::InvalidArgument(format!("duplicate token `{token}`")));
            }
            vocab.push(token, count);
        }
        Ok(vocab)
    }

    fn empty() -> Self {
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            tokens: Vec::new(),
            counts: Vec::new(),
        };
        vocab.push(PAD.to_string(), 0);
        vocab.push(OOV.to_string(), 0);
        vocab
    }

    fn push(&mut self, token: String, count: u64) {
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.counts.push(count);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> Option<u64> {
        self.counts.get(id).copied()
    }

    /// Corpus tokens with their counts, in id order, reserved entries skipped.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .skip(2)
            .map(|(t, &c)| (t.as_str(), c))
    }

    /// `id<TAB>token<TAB>count` per line, reserved ids included.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, (token, count)) in self.tokens.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{id}\t{token}\t{count}");
        }
        out
    }
}

/// Collects every token with frequency `>= min_count`. Ids are assigned by
/// descending frequency, ties broken lexicographically.
pub fn build_vocab<I, S>(token_streams: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    if min_count < 1 {
        return Err(Error::InvalidArgument("min_count must be >= 1".into()));
    }
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    let streams: Vec<S> = token_streams.into_iter().collect();
    for stream in &streams {
        for token in stream.as_ref() {
            *freq.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != PAD && t != OOV)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, c)| (t.to_string(), c)))
}

pub fn encode(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.id(t).unwrap_or(OOV_ID))
        .collect()
}

pub fn decode(ids: &[usize], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .map(|&id| vocab.token(id).unwrap_or(OOV).to_string())
        .collect()
}

/// Dense `|V| x d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingMatrix {
            dim,
            values: vec![0.0; rows * dim],
        })
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding component".into()));
        }
        Ok(EmbeddingMatrix { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Loads pretrained vectors for the tokens of `vocab`. Tokens missing from the
/// file, OOV, and PAD get zero rows.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, vocab, dim)
}

pub fn parse_embeddings(text: &str, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
    let mut matrix = EmbeddingMatrix::zeros(vocab.len(), dim)?;
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().ok_or_else(|| Error::syntax(line_no, "missing token"))?;
        let mut vector = Vec::with_capacity(dim);
        for part in parts {
            let value: f64 = part
                .parse()
                .map_err(|_| Error::syntax(line_no, format!("unparsable float `{part}`")))?;
            if !value.is_finite() {
                return Err(Error::syntax(line_no, format!("non-finite component `{part}`")));
            }
            vector.push(value);
        }
        if vector.len() != dim {
            return Err(Error::syntax(
                line_no,
                format!("expected {dim} components, found {}", vector.len()),
            ));
        }
        if let Some(first) = seen.insert(token, line_no) {
            return Err(Error::syntax(
                line_no,
                format!("token `{token}` already defined on line {first}"),
            ));
        }
        if token == PAD || token == OOV {
            continue;
        }
        if let Some(id) = vocab.id(token) {
            matrix.values[id * dim..(id + 1) * dim].copy_from_slice(&vector);
        }
    }
    Ok(matrix)
}
