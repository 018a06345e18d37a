//! Article retrieval, boolean queries and outlet prominence.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{io::parse_date, load_articles, Article};
use crate::text::tokenize;
use crate::{Error, Result};

/// Upper bound on articles per search.
pub const MAX_LIMIT: usize = 50;
pub const MIN_RANK: u32 = 1;
pub const MAX_RANK: u32 = 1_000_000;

/// Boolean query tree. Binary nodes are built left-associatively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    /// A bare word, kept as typed.
    Term(String),
    /// The text between double quotes, kept as typed.
    Phrase(String),
    And(Box<Query>, Box<Query>),
    Or(Box<Query>, Box<Query>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query error at offset {position}: {message}")]
pub struct QueryError {
    /// Character offset into the query string.
    pub position: usize,
    pub message: String,
}

fn query_error(position: usize, message: impl Into<String>) -> QueryError {
    QueryError { position, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Phrase(String),
    And,
    Or,
    Open,
    Close,
}

fn lex(s: &str) -> std::result::Result<Vec<(usize, Lexeme)>, QueryError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' {
            out.push((i, if c == '(' { Lexeme::Open } else { Lexeme::Close }));
            i += 1;
        } else if c == '"' {
            let start = i;
            let end = (i + 1..chars.len())
                .find(|&j| chars[j] == '"')
                .ok_or_else(|| query_error(start, "unclosed quote"))?;
            let inner: String = chars[i + 1..end].iter().collect();
            if tokenize(&inner).is_empty() {
                return Err(query_error(start, "empty phrase"));
            }
            out.push((start, Lexeme::Phrase(inner)));
            i = end + 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | ')' | '"') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let lexeme = match word.as_str() {
                "AND" => Lexeme::And,
                "OR" => Lexeme::Or,
                _ => Lexeme::Word(word),
            };
            out.push((start, lexeme));
        }
    }
    Ok(out)
}

struct Parser {
    lexemes: Vec<(usize, Lexeme)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(usize, Lexeme)> {
        self.lexemes.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |(p, _)| *p)
    }

    fn expr(&mut self) -> std::result::Result<Query, QueryError> {
        let mut left = self.conj()?;
        while matches!(self.peek(), Some((_, Lexeme::Or))) {
            self.pos += 1;
            let right = self.conj()?;
            left = Query::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conj(&mut self) -> std::result::Result<Query, QueryError> {
        let mut left = self.leaf()?;
        while matches!(self.peek(), Some((_, Lexeme::And))) {
            self.pos += 1;
            let right = self.leaf()?;
            left = Query::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn leaf(&mut self) -> std::result::Result<Query, QueryError> {
        let offset = self.offset();
        let Some((_, lexeme)) = self.lexemes.get(self.pos).cloned() else {
            let msg = match self.pos.checked_sub(1).map(|p| &self.lexemes[p].1) {
                Some(Lexeme::And) => "dangling AND",
                Some(Lexeme::Or) => "dangling OR",
                _ => "expected a term",
            };
            return Err(query_error(offset, msg));
        };
        self.pos += 1;
        match lexeme {
            Lexeme::Word(w) => Ok(Query::Term(w)),
            Lexeme::Phrase(p) => Ok(Query::Phrase(p)),
            Lexeme::Open => {
                let inner = self.expr()?;
                match self.peek() {
                    Some((_, Lexeme::Close)) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some((p, _)) => Err(query_error(*p, "expected AND, OR or `)`")),
                    None => Err(query_error(offset, "unclosed parenthesis")),
                }
            }
            Lexeme::Close => Err(query_error(offset, "unexpected `)`")),
            Lexeme::And => Err(query_error(offset, "AND without a left operand")),
            Lexeme::Or => Err(query_error(offset, "OR without a left operand")),
        }
    }
}

/// Grammar: `expr := conj (OR conj)*`, `conj := leaf (AND leaf)*`,
/// `leaf := "phrase" | term | ( expr )`. Operators are uppercase only.
pub fn parse_query(s: &str) -> std::result::Result<Query, QueryError> {
    let lexemes = lex(s)?;
    if lexemes.is_empty() {
        return Err(query_error(0, "empty query"));
    }
    let mut parser = Parser { lexemes, pos: 0, end: s.chars().count() };
    let query = parser.expr()?;
    match parser.peek() {
        None => Ok(query),
        Some((p, Lexeme::Close)) => Err(query_error(*p, "unmatched `)`")),
        Some((p, _)) => Err(query_error(*p, "expected AND or OR between terms")),
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Term(t) => f.write_str(t),
            Query::Phrase(p) => write!(f, "\"{p}\""),
            Query::And(l, r) => {
                let wrap_l = matches!(**l, Query::Or(..));
                let wrap_r = matches!(**r, Query::Or(..) | Query::And(..));
                write_operand(f, l, wrap_l)?;
                f.write_str(" AND ")?;
                write_operand(f, r, wrap_r)
            }
            Query::Or(l, r) => {
                write_operand(f, l, false)?;
                f.write_str(" OR ")?;
                write_operand(f, r, matches!(**r, Query::Or(..)))
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, q: &Query, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({q})")
    } else {
        write!(f, "{q}")
    }
}

impl Query {
    /// A phrase query for a multi-word topic, a term for a single word.
    pub fn for_topic(topic: &str) -> Result<Query> {
        let topic = topic.trim();
        if tokenize(topic).is_empty() || topic.contains('"') {
            return Err(Error::InvalidArgument(format!("cannot build a query for topic `{topic}`")));
        }
        let single_word = matches!(lex(topic).as_deref(), Ok([(_, Lexeme::Word(_))]));
        Ok(if single_word { Query::Term(topic.to_string()) } else { Query::Phrase(topic.to_string()) })
    }

    fn matches_tokens(&self, fields: &[Vec<String>]) -> bool {
        match self {
            Query::Term(t) | Query::Phrase(t) => {
                let needle = tokenize(t);
                fields.iter().any(|hay| contains_run(hay, &needle))
            }
            Query::And(l, r) => l.matches_tokens(fields) && r.matches_tokens(fields),
            Query::Or(l, r) => l.matches_tokens(fields) || r.matches_tokens(fields),
        }
    }
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Case-insensitive token matching against the headline or the body. A
/// phrase must appear as a contiguous token run within one of them.
pub fn matches(query: &Query, article: &Article) -> bool {
    query.matches_tokens(&[tokenize(&article.headline), tokenize(&article.body)])
}

/// Inclusive date bounds; `None` is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl DateRange {
    pub fn new(from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<Self> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(Error::InvalidArgument(format!("date range {f}..{t} is reversed")));
            }
        }
        Ok(DateRange { from, to })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from.is_none_or(|f| date >= f) && self.to.is_none_or(|t| date <= t)
    }
}

fn check_limit(limit: usize) -> Result<()> {
    if !(1..=MAX_LIMIT).contains(&limit) {
        return Err(Error::InvalidArgument(format!("limit must be in 1..={MAX_LIMIT}, got {limit}")));
    }
    Ok(())
}

fn newest_first(articles: &mut [Article]) {
    articles.sort_by(|a, b| b.published_at.cmp(&a.published_at).then_with(|| a.id.cmp(&b.id)));
}

/// Matching articles in range, newest first (ties by id), at most `limit`.
pub fn fixture_search(corpus: &[Article], query: &Query, range: &DateRange, limit: usize) -> Result<Vec<Article>> {
    check_limit(limit)?;
    let mut hits: Vec<Article> = corpus
        .iter()
        .filter(|a| range.contains(a.published_at) && matches(query, a))
        .cloned()
        .collect();
    newest_first(&mut hits);
    hits.truncate(limit);
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider rejected the credential (HTTP {status})")]
    Auth { status: u16 },
    #[error("provider request timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider unreachable: {0}")]
    Network(String),
    #[error("provider response does not match the field mapping: {0}")]
    Schema(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
    #[error("invalid provider request: {0}")]
    Request(String),
}

#[async_trait]
pub trait NewsProvider: Send + Sync {
    /// `fixture` or `http`.
    fn mode(&self) -> &'static str;

    /// At most `limit` (1..=50) matching articles in `range`.
    async fn search(&self, query: &Query, range: &DateRange, limit: usize) -> std::result::Result<Vec<Article>, ProviderError>;

    /// Every matching article of one outlet in `range`, newest first. Not
    /// subject to the 50-article cap.
    async fn archive(&self, query: &Query, range: &DateRange, outlet: &str) -> std::result::Result<Vec<Article>, ProviderError>;

    /// Cheap configuration check, no network traffic.
    fn check(&self) -> std::result::Result<(), ProviderError>;
}

/// Serves an in-memory article corpus.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    articles: Arc<Vec<Article>>,
}

impl FixtureProvider {
    pub fn new(articles: Vec<Article>) -> Self {
        FixtureProvider { articles: Arc::new(articles) }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(load_articles(path)?))
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }
}

#[async_trait]
impl NewsProvider for FixtureProvider {
    fn mode(&self) -> &'static str {
        "fixture"
    }

    async fn search(&self, query: &Query, range: &DateRange, limit: usize) -> std::result::Result<Vec<Article>, ProviderError> {
        fixture_search(&self.articles, query, range, limit).map_err(|e| ProviderError::Request(e.to_string()))
    }

    async fn archive(&self, query: &Query, range: &DateRange, outlet: &str) -> std::result::Result<Vec<Article>, ProviderError> {
        let outlet = normalize_host(outlet);
        let mut hits: Vec<Article> = self
            .articles
            .iter()
            .filter(|a| normalize_host(&a.outlet) == outlet && range.contains(a.published_at) && matches(query, a))
            .cloned()
            .collect();
        newest_first(&mut hits);
        Ok(hits)
    }

    fn check(&self) -> std::result::Result<(), ProviderError> {
        Ok(())
    }
}

/// JSON pointers locating each article field in a provider response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    /// Pointer to the array of items in the response body.
    pub items: String,
    pub id: String,
    pub headline: String,
    pub body: String,
    pub outlet: String,
    pub url: String,
    pub published_at: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            items: "/stories".into(),
            id: "/id".into(),
            headline: "/title".into(),
            body: "/body".into(),
            outlet: "/source/domain".into(),
            url: "/links/permalink".into(),
            published_at: "/published_at".into(),
        }
    }
}

/// Request parameter names sent to the provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    pub text: String,
    pub from: String,
    pub to: String,
    pub limit: String,
    pub outlet: String,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams {
            text: "text".into(),
            from: "published_at.start".into(),
            to: "published_at.end".into(),
            limit: "per_page".into(),
            outlet: "source.domain[]".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    /// Environment variable holding the credential; `None` sends none.
    pub credential_env: Option<String>,
    pub credential_header: String,
    /// Prepended to the credential value.
    pub credential_prefix: String,
    pub timeout_secs: f64,
    /// Page size for outlet archive requests.
    pub archive_limit: usize,
    pub params: QueryParams,
    pub fields: FieldMapping,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            endpoint: String::new(),
            credential_env: None,
            credential_header: "Authorization".into(),
            credential_prefix: "Bearer ".into(),
            timeout_secs: 10.0,
            archive_limit: 100,
            params: QueryParams::default(),
            fields: FieldMapping::default(),
        }
    }
}

impl HttpProviderConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::syntax(e.line(), e.to_string()))
    }
}

/// Generic JSON news API client. One GET per call.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::Client,
    timeout: Duration,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> std::result::Result<Self, ProviderError> {
        if !(config.timeout_secs.is_finite() && config.timeout_secs > 0.0) {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        let timeout = Duration::from_secs_f64(config.timeout_secs);
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider { config, client, timeout })
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }

    fn credential(&self) -> std::result::Result<Option<String>, ProviderError> {
        match &self.config.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .ok()
                .filter(|v| !v.is_empty())
                .map(|v| Some(format!("{}{v}", self.config.credential_prefix)))
                .ok_or_else(|| ProviderError::Config(format!("credential variable `{var}` is not set"))),
        }
    }

    async fn fetch(
        &self,
        query: &Query,
        range: &DateRange,
        limit: usize,
        outlet: Option<&str>,
    ) -> std::result::Result<Vec<Article>, ProviderError> {
        self.check()?;
        let p = &self.config.params;
        let mut params = vec![(p.text.clone(), query.to_string()), (p.limit.clone(), limit.to_string())];
        if let Some(from) = range.from {
            params.push((p.from.clone(), from.to_string()));
        }
        if let Some(to) = range.to {
            params.push((p.to.clone(), to.to_string()));
        }
        if let Some(outlet) = outlet {
            params.push((p.outlet.clone(), outlet.to_string()));
        }
        let mut request = self.client.get(&self.config.endpoint).query(&params);
        if let Some(credential) = self.credential()? {
            request = request.header(self.config.credential_header.as_str(), credential);
        }
        let response = request.send().await.map_err(|e| self.transport_error(e))?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth { status: status.as_u16() });
        }
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: body.chars().take(200).collect(),
            });
        }
        let body: Value = response.json().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout(self.timeout)
            } else {
                ProviderError::Schema(format!("body is not JSON: {e}"))
            }
        })?;
        let mut articles = map_response(&body, &self.config.fields)?;
        articles.truncate(limit);
        Ok(articles)
    }

    fn transport_error(&self, e: reqwest::Error) -> ProviderError {
        if e.is_timeout() {
            ProviderError::Timeout(self.timeout)
        } else {
            ProviderError::Network(e.to_string())
        }
    }
}

#[async_trait]
impl NewsProvider for HttpProvider {
    fn mode(&self) -> &'static str {
        "http"
    }

    async fn search(&self, query: &Query, range: &DateRange, limit: usize) -> std::result::Result<Vec<Article>, ProviderError> {
        check_limit(limit).map_err(|e| ProviderError::Request(e.to_string()))?;
        self.fetch(query, range, limit, None).await
    }

    async fn archive(&self, query: &Query, range: &DateRange, outlet: &str) -> std::result::Result<Vec<Article>, ProviderError> {
        let mut articles = self.fetch(query, range, self.config.archive_limit, Some(outlet)).await?;
        articles.retain(|a| range.contains(a.published_at));
        newest_first(&mut articles);
        Ok(articles)
    }

    fn check(&self) -> std::result::Result<(), ProviderError> {
        let endpoint = &self.config.endpoint;
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(ProviderError::Config(format!("endpoint `{endpoint}` is not an http(s) URL")));
        }
        if self.config.archive_limit == 0 {
            return Err(ProviderError::Config("archive_limit must be positive".into()));
        }
        self.credential().map(|_| ())
    }
}

/// Maps a provider response onto articles using `fields`.
pub fn map_response(body: &Value, fields: &FieldMapping) -> std::result::Result<Vec<Article>, ProviderError> {
    let items = body
        .pointer(&fields.items)
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Schema(format!("no array at `{}`", fields.items)))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let get = |pointer: &str| -> std::result::Result<String, ProviderError> {
                match item.pointer(pointer) {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Number(n)) => Ok(n.to_string()),
                    _ => Err(ProviderError::Schema(format!("item {i}: no string at `{pointer}`"))),
                }
            };
            let date = get(&fields.published_at)?;
            let published_at = parse_date(&date)
                .ok_or_else(|| ProviderError::Schema(format!("item {i}: invalid date `{date}`")))?;
            Ok(Article {
                id: get(&fields.id)?,
                headline: get(&fields.headline)?,
                body: get(&fields.body)?,
                outlet: get(&fields.outlet)?,
                url: get(&fields.url)?,
                published_at,
            })
        })
        .collect()
}

/// Lowercased host without scheme, `www.` prefix, port or path.
pub fn normalize_host(outlet: &str) -> String {
    let s = outlet.trim();
    let s = s.split_once("://").map_or(s, |(_, rest)| rest);
    let s = s.split(['/', '?', '#']).next().unwrap_or("");
    let s = s.split(':').next().unwrap_or("");
    let s = s.to_ascii_lowercase();
    s.strip_prefix("www.").map(str::to_string).unwrap_or(s)
}

/// Outlet hostname to prominence rank (1 is most prominent).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProminenceIndex {
    ranks: HashMap<String, u32>,
}

impl ProminenceIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// `hostname<TAB>rank` lines; ranks are clamped into [1, 1000000].
    pub fn parse(text: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (host, rank) = trimmed
                .split_once('\t')
                .ok_or_else(|| Error::syntax(i + 1, "expected `hostname<TAB>rank`"))?;
            let rank: i64 = rank
                .trim()
                .parse()
                .map_err(|_| Error::syntax(i + 1, format!("rank `{}` is not an integer", rank.trim())))?;
            let host = normalize_host(host);
            if host.is_empty() {
                return Err(Error::syntax(i + 1, "empty hostname"));
            }
            let rank = rank.clamp(MIN_RANK as i64, MAX_RANK as i64) as u32;
            if ranks.insert(host.clone(), rank).is_some() {
                return Err(Error::syntax(i + 1, format!("duplicate hostname `{host}`")));
            }
        }
        Ok(ProminenceIndex { ranks })
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Table rank, or 1000000 for unknown outlets.
    pub fn rank(&self, outlet: &str) -> u32 {
        self.ranks.get(&normalize_host(outlet)).copied().unwrap_or(MAX_RANK)
    }
}
