use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::StanceModel;
use crate::corpus::AnnotatedExample;
use crate::metrics::{ConfusionMatrix, EvaluationReport};
use crate::nn::{clip_global_norm, AdamConfig, AdamState};
use crate::{Error, Result};

/// An example reduced to model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub id: String,
    pub topic: Vec<usize>,
    pub article: Vec<usize>,
    pub gold: usize,
}

/// Encodes the retained 3-class examples; discarded and `unrelated` ones are
/// dropped.
pub fn encode_examples(model: &StanceModel, examples: &[AnnotatedExample]) -> Vec<EncodedExample> {
    examples
        .iter()
        .filter_map(|ex| {
            let gold = ex.class_index()?;
            Some(EncodedExample {
                id: ex.id.clone(),
                topic: model.encode_text(&ex.topic),
                article: model.encode_text(&ex.context.text()),
                gold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingHistory {
    /// One `{epoch, train_loss, val_accuracy, val_macro_f1}` record per line.
    pub fn to_records(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

pub fn evaluate(model: &StanceModel, examples: &[EncodedExample]) -> Result<EvaluationReport> {
    let mut cm = ConfusionMatrix::default();
    for ex in examples {
        let p = model.conditional_forward(&ex.topic, &ex.article)?;
        cm.add(ex.gold, p.class_index());
    }
    EvaluationReport::from_confusion(cm)
}

/// Mini-batch Adam with seeded shuffling. After every epoch the validation
/// accuracy decides whether the parameters become the new best snapshot;
/// training stops once `patience` epochs in a row fail to improve on it.
/// Returns the best snapshot.
pub fn train(
    mut model: StanceModel,
    train: &[AnnotatedExample],
    validation: &[AnnotatedExample],
) -> Result<(StanceModel, TrainingHistory)> {
    let config = model.config.clone();
    config.validate()?;
    let train_set = encode_examples(&model, train);
    let val_set = encode_examples(&model, validation);
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("no usable training examples".into()));
    }
    if val_set.is_empty() {
        return Err(Error::InvalidArgument("no usable validation examples".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_5a4d);
    let adam_config = AdamConfig { lr: config.lr, ..AdamConfig::default() };
    let mut adam = AdamState::new(adam_config, model.trainable_mut().into_iter().map(|p| &*p));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, StanceModel)> = None;
    let mut stale = 0usize;

    model.zero_grad();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            for &i in batch {
                let ex = &train_set[i];
                let trace = model.forward(&ex.topic, &ex.article)?;
                let loss = model.backward(&trace, ex.gold)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "training loss {loss} at epoch {epoch} on example `{}`",
                        ex.id
                    )));
                }
                total_loss += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.trainable_mut();
            for p in params.iter_mut() {
                p.grad.iter_mut().for_each(|g| *g *= scale);
            }
            clip_global_norm(&mut params, config.clip_norm);
            adam.step(&mut params)?;
            model.zero_grad();
        }
        let report = evaluate(&model, &val_set)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total_loss / train_set.len() as f64,
            val_accuracy: report.accuracy,
            val_macro_f1: report.macro_f1,
        });
        if best.as_ref().is_none_or(|(acc, _)| report.accuracy > *acc) {
            best = Some((report.accuracy, model.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience {
            break;
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}
