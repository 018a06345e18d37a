//! HTTP API over the stance model and a news provider.
//!
//! ```text
//! GET /api/health
//! GET /api/analyze?q=<query>&topic=<topic>&limit=<1..50>
//! GET /api/timeline?outlet=<host>&topic=<topic>&from=<YYYY-MM>&to=<YYYY-MM>
//! ```
//!
//! The model is held behind a lock as an `Arc` snapshot: every request clones
//! the snapshot once and a new checkpoint can be swapped in between requests.

mod error;

use std::collections::HashMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::{Query as QueryParams, State};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{Datelike, NaiveDate};
use serde::Serialize;
use serde_json::{json, Value};
use stance_scope::corpus::{extract_context_window, Article, StanceLabel, DEFAULT_WINDOW};
use stance_scope::ingest::{parse_query, DateRange, NewsProvider, ProminenceIndex, Query, MAX_LIMIT};
use stance_scope::model::StanceModel;
use stance_scope::nn::Checkpoint;

pub use error::ApiError;

pub const DEFAULT_PORT: u16 = 8360;
/// Longest timeline, in months, a single request may ask for.
pub const MAX_TIMELINE_MONTHS: usize = 1200;

/// A model snapshot and the SHA-256 of its checkpoint bytes.
#[derive(Debug)]
pub struct LoadedModel {
    pub model: StanceModel,
    pub digest: String,
}

pub struct AppState {
    model: RwLock<Option<Arc<LoadedModel>>>,
    provider: Arc<dyn NewsProvider>,
    ranks: Arc<ProminenceIndex>,
    started: Instant,
}

impl AppState {
    pub fn new(provider: Arc<dyn NewsProvider>, ranks: ProminenceIndex) -> Self {
        AppState {
            model: RwLock::new(None),
            provider,
            ranks: Arc::new(ranks),
            started: Instant::now(),
        }
    }

    pub fn with_model(self, model: StanceModel) -> Self {
        self.set_model(model);
        self
    }

    /// Atomically replaces the served model.
    pub fn set_model(&self, model: StanceModel) {
        let digest = model.to_checkpoint().digest();
        *self.model.write().expect("model lock poisoned") = Some(Arc::new(LoadedModel { model, digest }));
    }

    pub fn load_model(&self, path: &Path) -> stance_scope::Result<()> {
        let model = StanceModel::from_checkpoint(&Checkpoint::load(path)?)?;
        self.set_model(model);
        Ok(())
    }

    pub fn model(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().expect("model lock poisoned").clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/analyze", get(analyze))
        .route("/api/timeline", get(timeline))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

/// Horizontal plot position: `p(favour) - p(against)`.
pub fn stance_x(p: &[f64; 3]) -> stance_scope::Result<f64> {
    let valid = p.iter().all(|v| v.is_finite() && *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-6;
    if !valid {
        return Err(stance_scope::Error::InvalidArgument(format!("{p:?} is not a probability distribution")));
    }
    Ok((p[0] - p[1]).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlottedArticle {
    pub outlet: String,
    pub url: String,
    pub headline: String,
    /// The context window the model read, without the headline.
    pub excerpt: String,
    pub label: StanceLabel,
    pub probability: f64,
    pub x: f64,
    pub y: u32,
    pub published_at: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub query: String,
    pub topic: String,
    pub count: usize,
    pub articles: Vec<PlottedArticle>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineBucket {
    pub month: Month,
    pub favour: usize,
    pub against: usize,
    pub neutral: usize,
    pub total: usize,
}

/// A calendar month, serialized as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn parse(s: &str) -> Option<Month> {
        let (y, m) = s.split_once('-')?;
        if y.len() != 4 || m.len() != 2 {
            return None;
        }
        let month = Month { year: y.parse().ok()?, month: m.parse().ok()? };
        month.first_day().map(|_| month)
    }

    pub fn of(date: NaiveDate) -> Month {
        Month { year: date.year(), month: date.month() }
    }

    pub fn first_day(self) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
    }

    pub fn next(self) -> Month {
        if self.month == 12 {
            Month { year: self.year + 1, month: 1 }
        } else {
            Month { year: self.year, month: self.month + 1 }
        }
    }

    pub fn last_day(self) -> Option<NaiveDate> {
        self.next().first_day().and_then(|d| d.pred_opt())
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl Serialize for Month {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

type Params = QueryParams<HashMap<String, String>>;

fn required(params: &HashMap<String, String>, name: &str) -> Result<String, ApiError> {
    match params.get(name).map(|v| v.trim()) {
        Some(v) if !v.is_empty() => Ok(v.to_string()),
        _ => Err(ApiError::bad_request(format!("`{name}` must not be empty"))),
    }
}

fn loaded_model(state: &AppState) -> Result<Arc<LoadedModel>, ApiError> {
    state.model().ok_or_else(ApiError::model_unavailable)
}

/// Classifies one article; `None` for articles with neither headline nor body.
fn plot(model: &StanceModel, ranks: &ProminenceIndex, article: &Article, topic: &str) -> stance_scope::Result<Option<PlottedArticle>> {
    let Ok(context) = extract_context_window(article, topic, DEFAULT_WINDOW) else {
        return Ok(None);
    };
    let prediction = model.predict(topic, &context.text())?;
    Ok(Some(PlottedArticle {
        outlet: article.outlet.clone(),
        url: article.url.clone(),
        headline: article.headline.clone(),
        excerpt: context.excerpt,
        label: prediction.label,
        probability: prediction.probability,
        x: stance_x(&prediction.distribution)?,
        y: ranks.rank(&article.outlet),
        published_at: article.published_at,
    }))
}

/// Runs `f` on the blocking pool; inference is CPU-bound.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> stance_scope::Result<T> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn analyze(State(state): State<Arc<AppState>>, QueryParams(params): Params) -> Result<Json<AnalysisResult>, ApiError> {
    let q = required(&params, "q")?;
    let topic = required(&params, "topic")?;
    let limit = match params.get("limit") {
        None => MAX_LIMIT,
        Some(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|l| (1..=MAX_LIMIT).contains(l))
            .ok_or_else(|| ApiError::bad_request(format!("`limit` must be an integer in 1..={MAX_LIMIT}")))?,
    };
    let query = parse_query(&q)?;
    let loaded = loaded_model(&state)?;
    let articles = state.provider.search(&query, &DateRange::default(), limit).await?;

    let ranks = state.ranks.clone();
    let analysis_topic = topic.clone();
    let mut plotted = blocking(move || {
        let mut out = Vec::with_capacity(articles.len());
        for article in &articles {
            out.extend(plot(&loaded.model, &ranks, article, &analysis_topic)?);
        }
        Ok(out)
    })
    .await?;
    plotted.sort_by(|a, b| b.x.abs().total_cmp(&a.x.abs()));
    Ok(Json(AnalysisResult { query: q, topic, count: plotted.len(), articles: plotted }))
}

async fn timeline(State(state): State<Arc<AppState>>, QueryParams(params): Params) -> Result<Json<Value>, ApiError> {
    let outlet = required(&params, "outlet")?;
    let topic = required(&params, "topic")?;
    let month = |name: &str| -> Result<Month, ApiError> {
        let raw = required(&params, name)?;
        Month::parse(&raw).ok_or_else(|| ApiError::bad_request(format!("`{name}` must be a YYYY-MM month, got `{raw}`")))
    };
    let (from, to) = (month("from")?, month("to")?);
    if from > to {
        return Err(ApiError::bad_request(format!("`from` {from} is after `to` {to}")));
    }
    let months: Vec<Month> = std::iter::successors(Some(from), |m| Some(m.next()))
        .take_while(|m| *m <= to)
        .take(MAX_TIMELINE_MONTHS + 1)
        .collect();
    if months.len() > MAX_TIMELINE_MONTHS {
        return Err(ApiError::bad_request(format!("ranges are limited to {MAX_TIMELINE_MONTHS} months")));
    }
    let query = Query::for_topic(&topic).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let loaded = loaded_model(&state)?;
    let range = DateRange { from: from.first_day(), to: to.last_day() };
    let articles = state.provider.archive(&query, &range, &outlet).await?;

    let ranks = state.ranks.clone();
    let plotted = blocking(move || {
        let mut out = Vec::with_capacity(articles.len());
        for article in &articles {
            out.extend(plot(&loaded.model, &ranks, article, &topic)?);
        }
        Ok(out)
    })
    .await?;
    let mut buckets: Vec<TimelineBucket> = months
        .iter()
        .map(|&month| TimelineBucket { month, favour: 0, against: 0, neutral: 0, total: 0 })
        .collect();
    for p in plotted {
        let Some(bucket) = buckets.iter_mut().find(|b| b.month == Month::of(p.published_at)) else {
            continue;
        };
        match p.label {
            StanceLabel::Favour => bucket.favour += 1,
            StanceLabel::Against => bucket.against += 1,
            _ => bucket.neutral += 1,
        }
        bucket.total += 1;
    }
    Ok(Json(json!({ "buckets": buckets })))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let model = state.model().map(|m| m.digest.clone());
    let provider = state.provider.check();
    let status = if model.is_some() && provider.is_ok() { "ok" } else { "degraded" };
    let mut body = json!({
        "status": status,
        "model": model,
        "provider": if provider.is_ok() { "ok" } else { "error" },
        "provider_mode": state.provider.mode(),
        "uptime_seconds": state.started.elapsed().as_secs_f64(),
    });
    if let Err(e) = provider {
        body["provider_error"] = json!(e.to_string());
    }
    Json(body)
}
