//! Topic curation over a knowledge graph.
//!
//! Controversial topics arrive as Wikipedia article URLs and are mapped to
//! DBpedia resources. Entities typed as places, people or organisations are
//! dropped, the rest are ranked by their number of unique outbound edges
//! (distinct `(predicate, object)` pairs, literals included) and the top K
//! kept. Popular and political topics are merged in afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::corpus::{find_mention, Article};
use crate::{Error, Result};

pub const DBPEDIA_RESOURCE: &str = "http://dbpedia.org/resource/";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const DBO_PLACE: &str = "http://dbpedia.org/ontology/Place";
pub const DBO_PERSON: &str = "http://dbpedia.org/ontology/Person";
pub const DBO_ORGANISATION: &str = "http://dbpedia.org/ontology/Organisation";

/// The three entity types the curation filters act on.
pub fn named_entity_types() -> BTreeSet<String> {
    [DBO_PLACE, DBO_PERSON, DBO_ORGANISATION].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    /// Lexical form plus any `@lang` or `^^<datatype>` suffix, verbatim.
    Literal(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal(lit) => write!(f, "\"{lit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
}

/// Immutable set of triples with a subject index.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    out_degree: HashMap<String, usize>,
}

impl TripleStore {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        let mut out_degree = HashMap::new();
        for t in &triples {
            *out_degree.entry(t.subject.clone()).or_default() += 1;
        }
        TripleStore { triples, out_degree }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Distinct `(predicate, object)` pairs with `subject` as subject.
    pub fn out_degree(&self, subject: &str) -> usize {
        self.out_degree.get(subject).copied().unwrap_or(0)
    }

    /// Objects of `rdf:type` triples for `subject`.
    pub fn types_of(&self, subject: &str) -> BTreeSet<String> {
        let lo = Triple {
            subject: subject.to_string(),
            predicate: RDF_TYPE.to_string(),
            object: Term::Iri(String::new()),
        };
        self.triples
            .range(lo..)
            .take_while(|t| t.subject == subject && t.predicate == RDF_TYPE)
            .filter_map(|t| match &t.object {
                Term::Iri(iri) => Some(iri.clone()),
                Term::Literal(_) => None,
            })
            .collect()
    }
}

pub fn load_triples(path: &Path) -> Result<TripleStore> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triples(&text)
}

/// Parses `<s> <p> <o> .` / `<s> <p> "literal" .` lines. Blank lines and
/// `#` comments are skipped; duplicates collapse.
pub fn parse_triples(text: &str) -> Result<TripleStore> {
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        triples.push(parse_triple_line(trimmed).map_err(|m| Error::syntax(i + 1, m))?);
    }
    Ok(TripleStore::from_triples(triples))
}

fn parse_triple_line(line: &str) -> std::result::Result<Triple, String> {
    let mut rest = line;
    let subject = take_iri(&mut rest, "subject")?;
    let predicate = take_iri(&mut rest, "predicate")?;
    rest = rest.trim_start();
    let object = if rest.starts_with('<') {
        Term::Iri(take_iri(&mut rest, "object")?)
    } else if let Some(body) = rest.strip_prefix('"') {
        let mut escaped = false;
        let mut end = None;
        for (i, ch) in body.char_indices() {
            match ch {
                '\\' if !escaped => escaped = true,
                '"' if !escaped => {
                    end = Some(i);
                    break;
                }
                _ => escaped = false,
            }
        }
        let end = end.ok_or("unterminated literal")?;
        let mut literal = body[..end].to_string();
        rest = &body[end + 1..];
        let suffix_len = rest.find(|c: char| c.is_whitespace()).unwrap_or(rest.len());
        let suffix = &rest[..suffix_len];
        if !(suffix.is_empty() || suffix.starts_with('@') || suffix.starts_with("^^<")) {
            return Err(format!("unexpected literal suffix `{suffix}`"));
        }
        literal.push('"');
        literal.push_str(suffix);
        rest = &rest[suffix_len..];
        Term::Literal(literal)
    } else {
        return Err("object must be an IRI or a quoted literal".into());
    };
    if rest.trim() != "." {
        return Err("expected terminating ` .`".into());
    }
    Ok(Triple { subject, predicate, object })
}

fn take_iri(rest: &mut &str, role: &str) -> std::result::Result<String, String> {
    let s = rest.trim_start();
    let body = s.strip_prefix('<').ok_or_else(|| format!("{role} must be an <IRI>"))?;
    let end = body.find('>').ok_or_else(|| format!("unterminated {role} IRI"))?;
    let iri = &body[..end];
    if !is_absolute_iri(iri) {
        return Err(format!("{role} `{iri}` is not an absolute IRI"));
    }
    *rest = &body[end + 1..];
    Ok(iri.to_string())
}

fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    !rest.is_empty()
        && !s.contains(char::is_whitespace)
        && scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && scheme.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

/// `https?://en.wikipedia.org/wiki/<Title>` to `http://dbpedia.org/resource/<Title>`.
/// The title is kept byte for byte (underscores, percent-escapes).
pub fn wiki_url_to_dbpedia_uri(url: &str) -> Result<String> {
    let rest = url
        .strip_prefix("http://")
        .or_else(|| url.strip_prefix("https://"))
        .ok_or_else(|| Error::InvalidArgument(format!("`{url}` is not an http(s) URL")))?;
    let (host, path) = rest.split_once('/').unwrap_or((rest, ""));
    if !host.eq_ignore_ascii_case("en.wikipedia.org") {
        return Err(Error::InvalidArgument(format!("`{url}` is not an English Wikipedia URL")));
    }
    let title = path
        .strip_prefix("wiki/")
        .ok_or_else(|| Error::InvalidArgument(format!("`{url}` is not a /wiki/ article URL")))?;
    let title = title.split(['#', '?']).next().unwrap_or("");
    if title.is_empty() {
        return Err(Error::InvalidArgument(format!("`{url}` has no article title")));
    }
    Ok(format!("{DBPEDIA_RESOURCE}{title}"))
}

/// Title component of a DBpedia resource URI.
pub fn dbpedia_title(uri: &str) -> Option<&str> {
    uri.strip_prefix(DBPEDIA_RESOURCE).filter(|t| !t.is_empty())
}

/// Human-readable name: last path segment, percent-decoded, `_` as space.
pub fn display_name(uri: &str) -> String {
    let segment = uri.rsplit('/').next().unwrap_or(uri);
    let bytes = segment.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&segment[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(if bytes[i] == b'_' { b' ' } else { bytes[i] });
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicSource {
    Popular,
    Controversial,
    Political,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicCandidate {
    pub uri: String,
    pub display_name: String,
    pub types: BTreeSet<String>,
    pub out_degree: usize,
    pub source: TopicSource,
}

impl TopicCandidate {
    /// Candidate for `uri` with its types looked up in `store`.
    pub fn from_store(uri: &str, source: TopicSource, store: &TripleStore) -> Self {
        TopicCandidate {
            uri: uri.to_string(),
            display_name: display_name(uri),
            types: store.types_of(uri),
            out_degree: store.out_degree(uri),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Keep,
    Drop,
}

/// Keeps (or drops) candidates whose types intersect `types`, preserving order.
pub fn filter_by_type(candidates: Vec<TopicCandidate>, types: &BTreeSet<String>, mode: FilterMode) -> Vec<TopicCandidate> {
    candidates
        .into_iter()
        .filter(|c| {
            let hit = c.types.iter().any(|t| types.contains(t));
            match mode {
                FilterMode::Keep => hit,
                FilterMode::Drop => !hit,
            }
        })
        .collect()
}

/// Drops candidates whose URI is in `excluded`, preserving order.
pub fn exclude_uris(candidates: Vec<TopicCandidate>, excluded: &BTreeSet<String>) -> Vec<TopicCandidate> {
    candidates.into_iter().filter(|c| !excluded.contains(&c.uri)).collect()
}

/// Sets each candidate's out-degree from `store` and sorts descending, ties
/// by URI.
pub fn rank_by_outdegree(store: &TripleStore, mut candidates: Vec<TopicCandidate>) -> Vec<TopicCandidate> {
    for c in &mut candidates {
        c.out_degree = store.out_degree(&c.uri);
    }
    candidates.sort_by(|a, b| b.out_degree.cmp(&a.out_degree).then_with(|| a.uri.cmp(&b.uri)));
    candidates
}

pub fn select_top_k(mut ranked: Vec<TopicCandidate>, k: usize) -> Result<Vec<TopicCandidate>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    ranked.truncate(k);
    Ok(ranked)
}

/// Concatenates the three lists, keeping the first occurrence of each URI.
pub fn compose_topic_list(
    popular: Vec<TopicCandidate>,
    controversial: Vec<TopicCandidate>,
    political: Vec<TopicCandidate>,
) -> Vec<TopicCandidate> {
    let mut seen = HashSet::new();
    popular
        .into_iter()
        .chain(controversial)
        .chain(political)
        .filter(|c| seen.insert(c.uri.clone()))
        .collect()
}

/// For every calendar month, the `per_month` candidates mentioned in the most
/// articles (ties by URI); returns the union in first-selected order.
pub fn top_entities_by_month(articles: &[Article], candidates: &[TopicCandidate], per_month: usize) -> Vec<TopicCandidate> {
    let mut months: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for a in articles {
        let mut text = vec![a.headline.clone()];
        text.extend(a.sentences());
        let counts = months
            .entry((a.published_at.year(), a.published_at.month()))
            .or_insert_with(|| vec![0; candidates.len()]);
        for (i, c) in candidates.iter().enumerate() {
            if find_mention(&text, &c.display_name).is_some() {
                counts[i] += 1;
            }
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for counts in months.values() {
        let mut ranked: Vec<usize> = (0..candidates.len()).filter(|&i| counts[i] > 0).collect();
        ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| candidates[a].uri.cmp(&candidates[b].uri)));
        for i in ranked.into_iter().take(per_month) {
            if seen.insert(i) {
                out.push(candidates[i].clone());
            }
        }
    }
    out
}

/// Topic list records: `{uri, display_name, source, out_degree}` per line.
pub fn topic_records(topics: &[TopicCandidate]) -> String {
    topics
        .iter()
        .map(|t| {
            serde_json::json!({
                "uri": t.uri,
                "display_name": t.display_name,
                "source": t.source,
                "out_degree": t.out_degree,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

pub fn parse_topic_records(text: &str) -> Result<Vec<TopicCandidate>> {
    #[derive(Deserialize)]
    struct Record {
        uri: String,
        display_name: String,
        source: TopicSource,
        out_degree: usize,
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: Record = serde_json::from_str(l).map_err(|e| Error::syntax(i + 1, e.to_string()))?;
            Ok(TopicCandidate {
                uri: r.uri,
                display_name: r.display_name,
                types: BTreeSet::new(),
                out_degree: r.out_degree,
                source: r.source,
            })
        })
        .collect()
}
