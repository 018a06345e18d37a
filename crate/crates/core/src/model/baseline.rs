//! Bag-of-n-grams baseline: multinomial logistic regression over hashed
//! 1..n-gram counts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::StancePrediction;
use crate::corpus::AnnotatedExample;
use crate::metrics::{ConfusionMatrix, EvaluationReport};
use crate::nn::{softmax, AdamConfig, AdamState, ParamTensor};
use crate::text::tokenize;
use crate::{Error, Result};

/// Feature hashing space, 2^18 buckets.
pub const HASH_SPACE: usize = 1 << 18;

/// Sorted `(bucket, count)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseFeatures(pub Vec<(usize, f64)>);

impl SparseFeatures {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub(crate) fn feature_bucket(feature: &str) -> usize {
    (fnv1a(feature.as_bytes()) % HASH_SPACE as u64) as usize
}

/// Counts every 1..=`n_max`-gram of `tokens` (joined with `_`) and hashes
/// them into [`HASH_SPACE`] buckets.
pub fn featurize_ngrams(tokens: &[String], n_max: usize) -> Result<SparseFeatures> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for n in 1..=n_max.min(tokens.len()) {
        for gram in tokens.windows(n) {
            *counts.entry(feature_bucket(&gram.join("_"))).or_default() += 1.0;
        }
    }
    Ok(SparseFeatures(counts.into_iter().collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub n_max: usize,
    /// Append the topic's tokens as `topic=` marked features.
    pub use_topic: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_max: 3,
            use_topic: false,
            lr: 0.05,
            batch_size: 32,
            max_epochs: 20,
            patience: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub weights: ParamTensor,
    pub bias: ParamTensor,
}

impl BaselineModel {
    pub fn new(config: BaselineConfig) -> Self {
        BaselineModel {
            config,
            weights: ParamTensor::zeros(&[3, HASH_SPACE]),
            bias: ParamTensor::zeros(&[3]),
        }
    }

    pub fn features(&self, topic: &str, text: &str) -> Result<SparseFeatures> {
        let mut features = featurize_ngrams(&tokenize(text), self.config.n_max)?;
        if self.config.use_topic {
            let mut merged: BTreeMap<usize, f64> = features.0.into_iter().collect();
            let topic_tokens = tokenize(topic);
            for t in &topic_tokens {
                *merged.entry(feature_bucket(&format!("topic={t}"))).or_default() += 1.0;
            }
            *merged
                .entry(feature_bucket(&format!("topic={}", topic_tokens.join("_"))))
                .or_default() += 1.0;
            features = SparseFeatures(merged.into_iter().collect());
        }
        Ok(features)
    }

    fn distribution(&self, x: &SparseFeatures) -> [f64; 3] {
        let mut logits = [self.bias.values[0], self.bias.values[1], self.bias.values[2]];
        for (k, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights.values[k * HASH_SPACE..(k + 1) * HASH_SPACE];
            *logit += x.0.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        let p = softmax(&logits);
        [p[0], p[1], p[2]]
    }

    pub fn predict_features(&self, x: &SparseFeatures) -> StancePrediction {
        StancePrediction::from_distribution(self.distribution(x))
    }

    pub fn predict(&self, topic: &str, text: &str) -> Result<StancePrediction> {
        Ok(self.predict_features(&self.features(topic, text)?))
    }

    fn encode(&self, examples: &[AnnotatedExample]) -> Result<Vec<(SparseFeatures, usize)>> {
        examples
            .iter()
            .filter_map(|ex| ex.class_index().map(|gold| (ex, gold)))
            .map(|(ex, gold)| Ok((self.features(&ex.topic, &ex.context.text())?, gold)))
            .collect()
    }

    pub fn evaluate(&self, examples: &[AnnotatedExample]) -> Result<EvaluationReport> {
        let mut cm = ConfusionMatrix::default();
        for (x, gold) in self.encode(examples)? {
            cm.add(gold, self.predict_features(&x).class_index());
        }
        EvaluationReport::from_confusion(cm)
    }

    /// Trains with the same Adam optimizer and early-stopping rule as the
    /// conditional model. With an empty `validation`, training accuracy is
    /// used for model selection.
    pub fn train(config: BaselineConfig, train: &[AnnotatedExample], validation: &[AnnotatedExample]) -> Result<Self> {
        if config.n_max < 1 || config.batch_size < 1 || config.max_epochs < 1 {
            return Err(Error::InvalidArgument("baseline sizes must be positive".into()));
        }
        let mut model = BaselineModel::new(config.clone());
        let train_set = model.encode(train)?;
        if train_set.is_empty() {
            return Err(Error::InvalidArgument("no usable training examples".into()));
        }
        let val_set = if validation.is_empty() { train_set.clone() } else { model.encode(validation)? };
        if val_set.is_empty() {
            return Err(Error::InvalidArgument("no usable validation examples".into()));
        }
        let mut adam = AdamState::new(AdamConfig { lr: config.lr, ..AdamConfig::default() }, [&model.weights, &model.bias]);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut best: Option<(f64, BaselineModel)> = None;
        let mut stale = 0;
        for _ in 0..config.max_epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut touched = Vec::new();
                for &i in batch {
                    let (x, gold) = &train_set[i];
                    let mut d = model.distribution(x);
                    d[*gold] -= 1.0;
                    for (k, dk) in d.iter().enumerate() {
                        let g = dk * scale;
                        model.bias.grad[k] += g;
                        for &(j, v) in &x.0 {
                            model.weights.grad[k * HASH_SPACE + j] += g * v;
                        }
                    }
                    touched.extend(x.0.iter().map(|&(j, _)| j));
                }
                adam.step(&mut [&mut model.weights, &mut model.bias])?;
                for j in touched {
                    for k in 0..3 {
                        model.weights.grad[k * HASH_SPACE + j] = 0.0;
                    }
                }
                model.bias.zero_grad();
            }
            let correct = val_set
                .iter()
                .filter(|(x, gold)| model.predict_features(x).class_index() == *gold)
                .count();
            let acc = correct as f64 / val_set.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            if stale >= config.patience {
                break;
            }
        }
        Ok(best.expect("at least one epoch").1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotationContext, StanceLabel};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bigram_enumeration() {
        let f = featurize_ngrams(&toks("a b"), 2).unwrap();
        let mut expected: Vec<(usize, f64)> =
            ["a", "b", "a_b"].iter().map(|s| (feature_bucket(s), 1.0)).collect();
        expected.sort_by_key(|e| e.0);
        assert_eq!(f.0, expected);
        assert!(featurize_ngrams(&[], 3).unwrap().is_empty());
        assert!(featurize_ngrams(&toks("a"), 0).is_err());
        assert_eq!(featurize_ngrams(&toks("x y z x"), 3).unwrap(), featurize_ngrams(&toks("x y z x"), 3).unwrap());
    }

    #[test]
    fn repeated_ngrams_are_counted() {
        let f = featurize_ngrams(&toks("a a a"), 1).unwrap();
        assert_eq!(f.0, vec![(feature_bucket("a"), 3.0)]);
    }

    fn example(i: usize, text: &str, label: StanceLabel) -> AnnotatedExample {
        AnnotatedExample::from_votes(
            format!("e{i}"),
            format!("a{i}"),
            "topic",
            AnnotationContext { headline: String::new(), excerpt: text.into(), source_sentence_range: None },
            [label; 3],
        )
    }

    #[test]
    fn separable_toy_set_is_fit() {
        let data: Vec<_> = (0..30)
            .map(|i| match i % 3 {
                0 => example(i, "good", StanceLabel::Favour),
                1 => example(i, "bad", StanceLabel::Against),
                _ => example(i, "meh", StanceLabel::Neutral),
            })
            .collect();
        let config = BaselineConfig { n_max: 1, max_epochs: 30, patience: 30, ..BaselineConfig::default() };
        let model = BaselineModel::train(config.clone(), &data, &[]).unwrap();
        assert_eq!(model.evaluate(&data).unwrap().accuracy, 1.0);
        let again = BaselineModel::train(config, &data, &[]).unwrap();
        assert_eq!(again, model);
    }
}
