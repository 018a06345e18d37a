//! Line-delimited record files for datasets and article corpora.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::{json, Map, Value};

use super::{aggregate_votes, AnnotatedExample, AnnotationContext, Article, StanceLabel};
use crate::{Error, Result};

/// Writes one record per example: `{id, article_id, topic, headline, excerpt,
/// votes, label, retained}`. Discarded examples carry a `null` label.
pub fn write_dataset<W: Write>(mut out: W, examples: &[AnnotatedExample]) -> std::io::Result<()> {
    for ex in examples {
        let record = json!({
            "id": ex.id,
            "article_id": ex.article_id,
            "topic": ex.topic,
            "headline": ex.context.headline,
            "excerpt": ex.context.excerpt,
            "votes": ex.votes.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
            "label": ex.label.map(StanceLabel::as_str),
            "retained": ex.retained,
        });
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, examples: &[AnnotatedExample]) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, examples).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<AnnotatedExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<AnnotatedExample>> {
    records(text)
        .map(|(line, obj)| {
            let obj = obj?;
            let fields = Fields { line, obj: &obj };
            let votes_raw = fields.array("votes")?;
            if votes_raw.len() != 3 {
                return Err(Error::record(
                    line,
                    "votes",
                    format!("expected 3 votes, found {}", votes_raw.len()),
                ));
            }
            let mut votes = [StanceLabel::Neutral; 3];
            for (slot, v) in votes.iter_mut().zip(votes_raw) {
                *slot = v
                    .as_str()
                    .ok_or_else(|| Error::record(line, "votes", "vote is not a string"))?
                    .parse()
                    .map_err(|e: Error| Error::record(line, "votes", e.to_string()))?;
            }
            let label = match obj.get("label") {
                None => return Err(Error::record(line, "label", "missing")),
                Some(Value::Null) => None,
                Some(Value::String(s)) => Some(
                    s.parse()
                        .map_err(|e: Error| Error::record(line, "label", e.to_string()))?,
                ),
                Some(_) => return Err(Error::record(line, "label", "expected string or null")),
            };
            let retained = fields.bool("retained")?;
            let agg = aggregate_votes(&votes).expect("three votes");
            if agg.retained != retained {
                return Err(Error::record(line, "retained", "inconsistent with votes"));
            }
            if agg.label != label {
                return Err(Error::record(line, "label", "does not match the vote majority"));
            }
            Ok(AnnotatedExample {
                id: fields.string("id")?,
                article_id: fields.string("article_id")?,
                topic: fields.string("topic")?,
                context: AnnotationContext {
                    headline: fields.string("headline")?,
                    excerpt: fields.string("excerpt")?,
                    source_sentence_range: None,
                },
                votes,
                label,
                retained,
            })
        })
        .collect()
}

/// Loads a fixture article corpus: `{id, headline, body, outlet, url,
/// published_at}` per line, dates as ISO-8601 (`YYYY-MM-DD`, an optional time
/// part is ignored).
pub fn load_articles(path: &Path) -> Result<Vec<Article>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_articles(&text)
}

pub fn parse_articles(text: &str) -> Result<Vec<Article>> {
    let articles: Vec<Article> = records(text)
        .map(|(line, obj)| {
            let obj = obj?;
            let f = Fields { line, obj: &obj };
            let date = f.string("published_at")?;
            let published_at = parse_date(&date)
                .ok_or_else(|| Error::record(line, "published_at", format!("invalid date `{date}`")))?;
            Ok(Article {
                id: f.string("id")?,
                headline: f.string("headline")?,
                body: f.string("body")?,
                outlet: f.string("outlet")?,
                url: f.string("url")?,
                published_at,
            })
        })
        .collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    for a in &articles {
        if !seen.insert(a.id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate article id `{}`", a.id)));
        }
    }
    Ok(articles)
}

/// Accepts `YYYY-MM-DD` optionally followed by a time part.
pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    let day = s.get(..10)?;
    let rest = &s[10..];
    if !(rest.is_empty() || rest.starts_with('T') || rest.starts_with(' ')) {
        return None;
    }
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn records(text: &str) -> impl Iterator<Item = (usize, Result<Map<String, Value>>)> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let parsed = match serde_json::from_str::<Value>(l) {
                Ok(Value::Object(obj)) => Ok(obj),
                Ok(_) => Err(Error::record(line, "<record>", "expected a JSON object")),
                Err(e) => Err(Error::record(line, "<record>", e.to_string())),
            };
            (line, parsed)
        })
}

struct Fields<'a> {
    line: usize,
    obj: &'a Map<String, Value>,
}

impl Fields<'_> {
    fn get(&self, field: &str) -> Result<&Value> {
        self.obj
            .get(field)
            .ok_or_else(|| Error::record(self.line, field, "missing"))
    }

    fn string(&self, field: &str) -> Result<String> {
        match self.get(field)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(Error::record(self.line, field, "expected a string")),
        }
    }

    fn bool(&self, field: &str) -> Result<bool> {
        self.get(field)?
            .as_bool()
            .ok_or_else(|| Error::record(self.line, field, "expected a boolean"))
    }

    fn array(&self, field: &str) -> Result<&Vec<Value>> {
        self.get(field)?
            .as_array()
            .ok_or_else(|| Error::record(self.line, field, "expected an array"))
    }
}
