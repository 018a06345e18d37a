//! Synthetic topic-conditional stance corpus.
//!
//! Every generated text contains three clauses, one expressing support, one
//! opposition and one neutral mention, each about a different *camp* (the
//! first word of a topic such as `harbor league`). The clause carrying the
//! gold label names the example's topic; the other clauses name entities of
//! other camps and other nouns. The same text therefore carries a different
//! label under a different topic, and the text alone says nothing about the
//! label. Topics whose camp does not occur are `unrelated`.
//!
//! Annotator votes are simulated: with probability `retention` at least two of
//! three votes equal the gold label, otherwise all three differ.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedExample, AnnotationContext, StanceLabel};
use crate::{Error, Result};

pub const CAMPS: [&str; 24] = [
    "harbor", "orchard", "granite", "meadow", "lantern", "falcon", "copper", "willow", "cedar", "summit",
    "river", "beacon", "marble", "thistle", "ember", "glacier", "prairie", "canyon", "juniper", "harvest",
    "quarry", "spruce", "tundra", "delta",
];
const NOUNS: [&str; 6] = ["alliance", "council", "league", "coalition", "bloc", "movement"];
const ISSUES: [&str; 6] = ["budget", "tariff", "pipeline", "ruling", "referendum", "reform"];
const SUBJECTS: [&str; 4] = ["Analysts", "Voters", "Editors", "Residents"];
const SUPPORT: [&str; 4] = ["praised", "backed", "applauded", "welcomed"];
const OPPOSE: [&str; 4] = ["condemned", "rejected", "criticized", "attacked"];
const MENTION: [&str; 4] = [
    "met on tuesday",
    "issued a statement",
    "held a meeting",
    "released a schedule",
];
const HEADLINES: [&str; 4] = [
    "{} debate heats up",
    "New twist in {} talks",
    "What the {} means",
    "Week in review : the {}",
];
const FILLERS: [&str; 2] = [
    "The {} vote is expected next month.",
    "Officials declined to comment further.",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of distinct topics drawn from the camp x noun grid (at most 144).
    pub topics: usize,
    /// Target share of examples where at least two annotators agree.
    pub retention: f64,
    /// Gold-label shares in `StanceLabel::ALL` order.
    pub label_mix: [f64; 4],
    /// Probability that a majority is unanimous rather than 2-1.
    pub unanimous: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: CAMPS.len() * NOUNS.len(),
            retention: 0.705,
            label_mix: [0.1905, 0.219, 0.4767, 0.1138],
            unanimous: 0.5,
        }
    }
}

pub fn synthesize_corpus(n: usize, seed: u64) -> Result<Vec<AnnotatedExample>> {
    synthesize_with(&SynthConfig::default(), n, seed)
}

pub fn synthesize_with(config: &SynthConfig, n: usize, seed: u64) -> Result<Vec<AnnotatedExample>> {
    if n == 0 {
        return Err(Error::InvalidArgument("corpus size must be >= 1".into()));
    }
    let grid = CAMPS.len() * NOUNS.len();
    if config.topics < 1 || config.topics > grid {
        return Err(Error::InvalidArgument(format!(
            "topic count must be in 1..={grid}, got {}",
            config.topics
        )));
    }
    if !(0.0..=1.0).contains(&config.retention) || !(0.0..=1.0).contains(&config.unanimous) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
    }
    let mix_total: f64 = config.label_mix.iter().sum();
    if config.label_mix.iter().any(|p| *p < 0.0) || mix_total <= 0.0 {
        return Err(Error::InvalidArgument("label mix must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topics: Vec<(usize, usize)> = (0..CAMPS.len())
        .flat_map(|c| (0..NOUNS.len()).map(move |n| (c, n)))
        .collect();
    topics.shuffle(&mut rng);
    topics.truncate(config.topics);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let gold = sample_label(&mut rng, &config.label_mix, mix_total);
        let (camp, noun) = topics[rng.gen_range(0..topics.len())];
        let mut others: Vec<usize> = (0..CAMPS.len()).filter(|&c| c != camp).collect();
        others.shuffle(&mut rng);

        let other_nouns: Vec<usize> = (0..NOUNS.len()).filter(|&k| k != noun).collect();
        let mut slots = StanceLabel::CLASSES;
        slots.shuffle(&mut rng);
        let mut entities = [0, 1, 2].map(|k| (others[k], other_nouns[rng.gen_range(0..other_nouns.len())]));
        if let Some(pos) = slots.iter().position(|&s| s == gold) {
            entities[pos] = (camp, noun);
        }
        let clauses: Vec<(StanceLabel, (usize, usize))> = slots.into_iter().zip(entities).collect();
        let context = render(&mut rng, &clauses);
        let votes = simulate_votes(&mut rng, gold, config);
        out.push(AnnotatedExample::from_votes(
            format!("ex{i:06}"),
            format!("art{i:06}"),
            format!("{} {}", CAMPS[camp], NOUNS[noun]),
            context,
            votes,
        ));
    }
    Ok(out)
}

/// Builds a contrastive evaluation set: each generated text appears three
/// times, paired with topics whose camps sit in its favour, against and
/// neutral clauses. All examples are unanimous and retained.
pub fn contrastive_triples(topics: &[String], texts: usize, seed: u64) -> Result<Vec<AnnotatedExample>> {
    let mut by_camp: Vec<(usize, Vec<usize>)> = Vec::new();
    for topic in topics {
        let words: Vec<&str> = topic.split_whitespace().collect();
        let parsed = match words.as_slice() {
            [c, n] => CAMPS.iter().position(|x| x == c).zip(NOUNS.iter().position(|x| x == n)),
            _ => None,
        };
        let Some((camp, noun)) = parsed else {
            return Err(Error::InvalidArgument(format!(
                "topic `{topic}` is not a synthetic topic"
            )));
        };
        match by_camp.iter_mut().find(|(c, _)| *c == camp) {
            Some((_, list)) => {
                if !list.contains(&noun) {
                    list.push(noun)
                }
            }
            None => by_camp.push((camp, vec![noun])),
        }
    }
    if by_camp.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "contrastive triples need topics from 3 camps, got {}",
            by_camp.len()
        )));
    }
    by_camp.sort_by_key(|(c, _)| *c);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(texts * 3);
    for j in 0..texts {
        let picked: Vec<(usize, usize)> = by_camp
            .choose_multiple(&mut rng, 3)
            .map(|(c, nouns)| (*c, nouns[rng.gen_range(0..nouns.len())]))
            .collect();
        let mut slots = StanceLabel::CLASSES;
        slots.shuffle(&mut rng);
        let clauses: Vec<(StanceLabel, (usize, usize))> = slots.into_iter().zip(picked.iter().copied()).collect();
        let context = render(&mut rng, &clauses);
        for (label, (camp, noun)) in clauses {
            out.push(AnnotatedExample::from_votes(
                format!("pair{j:05}-{label}"),
                format!("pair{j:05}"),
                format!("{} {}", CAMPS[camp], NOUNS[noun]),
                context.clone(),
                [label; 3],
            ));
        }
    }
    Ok(out)
}

fn sample_label(rng: &mut ChaCha8Rng, mix: &[f64; 4], total: f64) -> StanceLabel {
    let mut u = rng.gen::<f64>() * total;
    for (label, &p) in StanceLabel::ALL.iter().zip(mix) {
        if u < p {
            return *label;
        }
        u -= p;
    }
    StanceLabel::ALL[3]
}

fn simulate_votes(rng: &mut ChaCha8Rng, gold: StanceLabel, config: &SynthConfig) -> [StanceLabel; 3] {
    let mut others: Vec<StanceLabel> = StanceLabel::ALL.into_iter().filter(|&l| l != gold).collect();
    others.shuffle(rng);
    let mut votes = if rng.gen::<f64>() < config.retention {
        if rng.gen::<f64>() < config.unanimous {
            [gold; 3]
        } else {
            [gold, gold, others[0]]
        }
    } else {
        [gold, others[0], others[1]]
    };
    votes.shuffle(rng);
    votes
}

/// One sentence per `(label, (camp, noun))` clause, in order.
fn render(rng: &mut ChaCha8Rng, clauses: &[(StanceLabel, (usize, usize))]) -> AnnotationContext {
    let issue = ISSUES[rng.gen_range(0..ISSUES.len())];
    let headline = capitalize(&HEADLINES[rng.gen_range(0..HEADLINES.len())].replace("{}", issue));
    let mut sentences: Vec<String> = clauses
        .iter()
        .map(|&(label, (camp, noun))| {
            let (camp, noun) = (CAMPS[camp], NOUNS[noun]);
            match label {
                StanceLabel::Favour | StanceLabel::Against => {
                    let subject = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
                    let verbs = if label == StanceLabel::Favour { &SUPPORT } else { &OPPOSE };
                    let verb = verbs[rng.gen_range(0..verbs.len())];
                    format!("{subject} {verb} the {camp} {noun}.")
                }
                _ => {
                    let predicate = MENTION[rng.gen_range(0..MENTION.len())];
                    format!("The {camp} {noun} {predicate}.")
                }
            }
        })
        .collect();
    if rng.gen_bool(0.5) {
        let filler = FILLERS[rng.gen_range(0..FILLERS.len())].replace("{}", issue);
        let at = rng.gen_range(0..=sentences.len());
        sentences.insert(at, filler);
    }
    AnnotationContext {
        headline,
        excerpt: sentences.join(" "),
        source_sentence_range: None,
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn single_example_and_zero_rejected() {
        assert_eq!(synthesize_corpus(1, 3).unwrap().len(), 1);
        assert!(synthesize_corpus(0, 3).is_err());
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(synthesize_corpus(200, 5).unwrap(), synthesize_corpus(200, 5).unwrap());
        assert_ne!(synthesize_corpus(200, 5).unwrap(), synthesize_corpus(200, 6).unwrap());
    }

    #[test]
    fn topic_count_is_configurable() {
        let config = SynthConfig { topics: 40, ..SynthConfig::default() };
        let corpus = synthesize_with(&config, 2000, 11).unwrap();
        let topics: HashSet<_> = corpus.iter().map(|e| e.topic.as_str()).collect();
        assert_eq!(topics.len(), 40);
    }

    #[test]
    fn gold_label_follows_topic_camp() {
        for ex in synthesize_corpus(500, 2).unwrap().iter().filter(|e| e.retained) {
            let camp = ex.topic.split(' ').next().unwrap();
            let clause = ex
                .context
                .excerpt
                .split(". ")
                .find(|s| s.split(' ').any(|w| w == camp));
            let expected = match clause {
                None => StanceLabel::Unrelated,
                Some(c) if SUPPORT.iter().any(|v| c.contains(v)) => StanceLabel::Favour,
                Some(c) if OPPOSE.iter().any(|v| c.contains(v)) => StanceLabel::Against,
                Some(_) => StanceLabel::Neutral,
            };
            assert_eq!(ex.label, Some(expected), "{ex:?}");
        }
    }

    #[test]
    fn contrastive_triples_share_text() {
        let topics: Vec<String> = ["harbor league", "copper bloc", "willow council", "willow bloc"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let set = contrastive_triples(&topics, 10, 4).unwrap();
        assert_eq!(set.len(), 30);
        for triple in set.chunks(3) {
            assert!(triple.iter().all(|e| e.context == triple[0].context));
            let labels: HashSet<_> = triple.iter().map(|e| e.label.unwrap()).collect();
            assert_eq!(labels.len(), 3);
            let camps: HashSet<_> = triple.iter().map(|e| e.topic.split(' ').next().unwrap()).collect();
            assert_eq!(camps.len(), 3);
        }
        assert!(contrastive_triples(&topics[..2], 1, 0).is_err());
    }
}
