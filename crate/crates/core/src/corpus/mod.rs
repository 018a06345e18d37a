//! Stance dataset construction.
//!
//! Articles are reduced to short annotation contexts (headline plus a few
//! sentences around the topic mention), labelled by three annotators, and kept
//! only when two of them agree. Retained examples are split so that no topic
//! appears in more than one of train/validation/test.

mod context;
pub(crate) mod io;
mod split;
mod synth;
mod votes;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::Error;

pub use context::{extract_context_window, DEFAULT_WINDOW, first_paragraph, find_mention, split_sentences};
pub use io::{load_articles, load_dataset, parse_articles, parse_dataset, save_dataset, write_dataset};
pub use split::{stratified_entity_split, DatasetSplit, SplitRatios, SplitWarning};
pub use synth::{contrastive_triples, synthesize_corpus, synthesize_with, SynthConfig, CAMPS};
pub use votes::{aggregate_votes, Aggregate};

/// Annotation outcome. The model only predicts the first three; `Unrelated`
/// exists at annotation time and is filtered before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Favour,
    Against,
    Neutral,
    Unrelated,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 4] = [
        StanceLabel::Favour,
        StanceLabel::Against,
        StanceLabel::Neutral,
        StanceLabel::Unrelated,
    ];

    /// The three classes the model predicts, in output-layer order.
    pub const CLASSES: [StanceLabel; 3] =
        [StanceLabel::Favour, StanceLabel::Against, StanceLabel::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Favour => "favour",
            StanceLabel::Against => "against",
            StanceLabel::Neutral => "neutral",
            StanceLabel::Unrelated => "unrelated",
        }
    }

    /// Output-layer index, `None` for `Unrelated`.
    pub fn class_index(self) -> Option<usize> {
        match self {
            StanceLabel::Favour => Some(0),
            StanceLabel::Against => Some(1),
            StanceLabel::Neutral => Some(2),
            StanceLabel::Unrelated => None,
        }
    }

    pub fn from_class_index(index: usize) -> Option<StanceLabel> {
        StanceLabel::CLASSES.get(index).copied()
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "favour" => Ok(StanceLabel::Favour),
            "against" => Ok(StanceLabel::Against),
            "neutral" => Ok(StanceLabel::Neutral),
            "unrelated" => Ok(StanceLabel::Unrelated),
            other => Err(Error::InvalidArgument(format!("unknown stance label `{other}`"))),
        }
    }
}

/// A news document as retrieved from a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub headline: String,
    pub body: String,
    /// Outlet hostname, e.g. `cnn.com`.
    pub outlet: String,
    pub url: String,
    pub published_at: NaiveDate,
}

impl Article {
    pub fn sentences(&self) -> Vec<String> {
        split_sentences(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationContext {
    pub headline: String,
    pub excerpt: String,
    /// Inclusive sentence indices into the source article body, when the
    /// excerpt is a run of whole sentences.
    pub source_sentence_range: Option<(usize, usize)>,
}

impl AnnotationContext {
    /// Headline and excerpt as one string; this is the model's article input.
    pub fn text(&self) -> String {
        if self.headline.is_empty() {
            self.excerpt.clone()
        } else {
            format!("{} {}", self.headline, self.excerpt)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedExample {
    pub id: String,
    pub article_id: String,
    pub topic: String,
    pub context: AnnotationContext,
    pub votes: [StanceLabel; 3],
    /// The majority label; `None` when the example was discarded.
    pub label: Option<StanceLabel>,
    pub retained: bool,
}

impl AnnotatedExample {
    /// Builds an example and resolves its label from the votes.
    pub fn from_votes(
        id: impl Into<String>,
        article_id: impl Into<String>,
        topic: impl Into<String>,
        context: AnnotationContext,
        votes: [StanceLabel; 3],
    ) -> Self {
        let agg = aggregate_votes(&votes).expect("three votes");
        AnnotatedExample {
            id: id.into(),
            article_id: article_id.into(),
            topic: topic.into(),
            context,
            votes,
            label: agg.label,
            retained: agg.retained,
        }
    }

    /// The 3-class training target, if this example is usable by the model.
    pub fn class_index(&self) -> Option<usize> {
        if !self.retained {
            return None;
        }
        self.label.and_then(StanceLabel::class_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_strings_round_trip() {
        for label in StanceLabel::ALL {
            assert_eq!(label.as_str().parse::<StanceLabel>().unwrap(), label);
            assert_eq!(
                serde_json::to_string(&label).unwrap(),
                format!("\"{}\"", label.as_str())
            );
        }
        assert!("in favour".parse::<StanceLabel>().is_err());
    }

    #[test]
    fn class_indices_cover_three_labels() {
        for (i, label) in StanceLabel::CLASSES.iter().enumerate() {
            assert_eq!(label.class_index(), Some(i));
            assert_eq!(StanceLabel::from_class_index(i), Some(*label));
        }
        assert_eq!(StanceLabel::Unrelated.class_index(), None);
        assert_eq!(StanceLabel::from_class_index(3), None);
    }
}
