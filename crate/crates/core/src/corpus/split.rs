use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::AnnotatedExample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            validation: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitWarning {
    /// Fewer distinct topics than parts; everything went to train.
    TooFewTopics { topics: usize, parts: usize },
}

impl std::fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitWarning::TooFewTopics { topics, parts } => write!(
                f,
                "only {topics} distinct topic(s) for {parts} parts; all examples assigned to train"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<AnnotatedExample>,
    pub validation: Vec<AnnotatedExample>,
    pub test: Vec<AnnotatedExample>,
    pub seed: u64,
    pub warnings: Vec<SplitWarning>,
}

impl DatasetSplit {
    pub fn parts(&self) -> [&[AnnotatedExample]; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Partitions retained examples by topic so that no topic occurs in two parts.
///
/// Topics are visited in descending order of example count (equal counts in a
/// seed-determined order) and each goes to the part whose size is furthest
/// below its target. Non-retained examples are ignored.
pub fn stratified_entity_split(
    examples: &[AnnotatedExample],
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit> {
    let ratio = ratios.as_array();
    if ratio.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratio.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be non-negative and sum to 1, got {ratio:?}"
        )));
    }
    let retained: Vec<&AnnotatedExample> = examples.iter().filter(|e| e.retained).collect();
    if retained.is_empty() {
        return Err(Error::InvalidArgument("no retained examples to split".into()));
    }

    let mut by_topic: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in &retained {
        *by_topic.entry(ex.topic.as_str()).or_default() += 1;
    }

    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        warnings: Vec::new(),
    };

    if by_topic.len() < 3 {
        split.warnings.push(SplitWarning::TooFewTopics {
            topics: by_topic.len(),
            parts: 3,
        });
        split.train = retained.into_iter().cloned().collect();
        return Ok(split);
    }

    let mut topics: Vec<(&str, usize)> = by_topic.into_iter().collect();
    topics.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    topics.sort_by_key(|t| std::cmp::Reverse(t.1));

    let total = retained.len() as f64;
    let targets = ratio.map(|r| r * total);
    let mut sizes = [0usize; 3];
    let mut assignment: HashMap<&str, usize> = HashMap::new();
    for (topic, count) in topics {
        let mut part = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, (&target, &size)) in targets.iter().zip(&sizes).enumerate() {
            let deficit = target - size as f64;
            if deficit > best {
                best = deficit;
                part = i;
            }
        }
        sizes[part] += count;
        assignment.insert(topic, part);
    }

    for ex in retained {
        let part = match assignment[ex.topic.as_str()] {
            0 => &mut split.train,
            1 => &mut split.validation,
            _ => &mut split.test,
        };
        part.push(ex.clone());
    }
    Ok(split)
}
