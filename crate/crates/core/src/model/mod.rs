//! Conditional BiLSTM stance classifier.
//!
//! The topic is read by its own bidirectional LSTM. Each direction's final
//! `(h, c)` becomes the initial state of the same direction of a second
//! BiLSTM that reads the article context, so the article is encoded "given"
//! the topic. The final forward and backward hidden states of the article
//! encoder feed a softmax over favour/against/neutral.

mod baseline;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::StanceLabel;
use crate::nn::{
    affine_backward, affine_softmax, bilstm_backward, bilstm_encode, cross_entropy, cross_entropy_grad,
    BiLstmTrace, Checkpoint, EncoderStates, GradCheckReport, LstmParams, NamedTensor, ParamTensor,
    gradient_check,
};
use crate::text::{encode, tokenize, EmbeddingMatrix, Vocabulary, PAD_ID};
use crate::{Error, Result};

pub use baseline::{featurize_ngrams, BaselineConfig, BaselineModel, SparseFeatures, HASH_SPACE};
pub use train::{encode_examples, evaluate, train, EncodedExample, EpochRecord, TrainingHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceModelConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving epochs tolerated before stopping; 0 stops after the
    /// first epoch.
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub max_tokens: usize,
    pub init_bound: f64,
    pub train_embeddings: bool,
}

impl Default for StanceModelConfig {
    fn default() -> Self {
        StanceModelConfig {
            embedding_dim: 100,
            hidden: 64,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            clip_norm: 5.0,
            max_tokens: 128,
            init_bound: 0.1,
            train_embeddings: true,
        }
    }
}

impl StanceModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("max_tokens", self.max_tokens),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidArgument("patience exceeds max_epochs".into()));
        }
        for (name, v) in [("lr", self.lr), ("clip_norm", self.clip_norm), ("init_bound", self.init_bound)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Class distribution with its argmax. Ties resolve to the earlier class in
/// favour, against, neutral order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StancePrediction {
    pub distribution: [f64; 3],
    pub label: StanceLabel,
    pub probability: f64,
}

impl StancePrediction {
    pub fn from_distribution(distribution: [f64; 3]) -> Self {
        let mut best = 0;
        for k in 1..3 {
            if distribution[k] > distribution[best] {
                best = k;
            }
        }
        StancePrediction {
            distribution,
            label: StanceLabel::CLASSES[best],
            probability: distribution[best],
        }
    }

    pub fn class_index(&self) -> usize {
        self.label.class_index().expect("predictions are 3-class")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StanceModel {
    pub config: StanceModelConfig,
    pub vocab: Vocabulary,
    pub embedding: ParamTensor,
    pub topic_fwd: LstmParams,
    pub topic_bwd: LstmParams,
    pub article_fwd: LstmParams,
    pub article_bwd: LstmParams,
    /// `3 x 2h`, applied to `[h_fwd; h_bwd]` of the article encoder.
    pub out_w: ParamTensor,
    pub out_b: ParamTensor,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub topic: BiLstmTrace,
    pub article: BiLstmTrace,
    pub features: Vec<f64>,
    pub probs: [f64; 3],
}

const PARAM_NAMES: [&str; 15] = [
    "embedding",
    "topic.fwd.w",
    "topic.fwd.u",
    "topic.fwd.b",
    "topic.bwd.w",
    "topic.bwd.u",
    "topic.bwd.b",
    "article.fwd.w",
    "article.fwd.u",
    "article.fwd.b",
    "article.bwd.w",
    "article.bwd.u",
    "article.bwd.b",
    "output.w",
    "output.b",
];

impl StanceModel {
    /// Fresh model. With `pretrained`, embedding rows are copied from it;
    /// otherwise non-reserved rows are drawn like the other weights.
    pub fn new(config: StanceModelConfig, vocab: Vocabulary, pretrained: Option<&EmbeddingMatrix>) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.embedding_dim, config.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embedding = match pretrained {
            Some(m) => {
                if m.dim() != d || m.rows() != vocab.len() {
                    return Err(Error::Shape(format!(
                        "pretrained matrix {}x{} does not match vocabulary {} and dimension {d}",
                        m.rows(),
                        m.dim(),
                        vocab.len()
                    )));
                }
                ParamTensor::from_values(&[vocab.len(), d], m.values().to_vec())?
            }
            None => {
                let mut t = ParamTensor::zeros(&[vocab.len(), d]);
                for v in &mut t.values[d..] {
                    *v = rng.gen_range(-config.init_bound..config.init_bound);
                }
                t
            }
        };
        let bound = config.init_bound;
        let topic_fwd = LstmParams::init(d, h, bound, &mut rng);
        let topic_bwd = LstmParams::init(d, h, bound, &mut rng);
        let article_fwd = LstmParams::init(d, h, bound, &mut rng);
        let article_bwd = LstmParams::init(d, h, bound, &mut rng);
        let out_w = ParamTensor::uniform(&[3, 2 * h], bound, &mut rng);
        let out_b = ParamTensor::zeros(&[3]);
        Ok(StanceModel {
            config,
            vocab,
            embedding,
            topic_fwd,
            topic_bwd,
            article_fwd,
            article_bwd,
            out_w,
            out_b,
        })
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = vec![&self.embedding];
        for lstm in [&self.topic_fwd, &self.topic_bwd, &self.article_fwd, &self.article_bwd] {
            out.extend(lstm.tensors());
        }
        out.push(&self.out_w);
        out.push(&self.out_b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = vec![&mut self.embedding];
        for lstm in [
            &mut self.topic_fwd,
            &mut self.topic_bwd,
            &mut self.article_fwd,
            &mut self.article_bwd,
        ] {
            out.extend(lstm.tensors_mut());
        }
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    /// Parameters updated during training (embedding excluded when frozen).
    pub fn trainable_mut(&mut self) -> Vec<&mut ParamTensor> {
        let skip = usize::from(!self.config.train_embeddings);
        self.params_mut().into_iter().skip(skip).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.values.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.values.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Tokenizes, encodes, and truncates text to the model's input length.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        let mut ids = encode(&tokenize(text), &self.vocab);
        ids.truncate(self.config.max_tokens);
        ids
    }

    pub fn forward(&self, topic_ids: &[usize], article_ids: &[usize]) -> Result<ForwardTrace> {
        if topic_ids.is_empty() {
            return Err(Error::InvalidArgument("empty topic".into()));
        }
        if article_ids.is_empty() {
            return Err(Error::InvalidArgument("empty article".into()));
        }
        let topic = bilstm_encode(topic_ids, &self.embedding, &self.topic_fwd, &self.topic_bwd, None)?;
        let article = bilstm_encode(
            article_ids,
            &self.embedding,
            &self.article_fwd,
            &self.article_bwd,
            Some(&topic.final_states),
        )?;
        let mut features = article.final_states.h_fwd.clone();
        features.extend_from_slice(&article.final_states.h_bwd);
        let p = affine_softmax(&features, &self.out_w, &self.out_b)?;
        Ok(ForwardTrace {
            topic,
            article,
            features,
            probs: [p[0], p[1], p[2]],
        })
    }

    /// Cross-entropy loss of `gold` under `trace`; accumulates all gradients.
    pub fn backward(&mut self, trace: &ForwardTrace, gold: usize) -> Result<f64> {
        let loss = cross_entropy(&trace.probs, gold)?;
        let d_logits = cross_entropy_grad(&trace.probs, gold);
        let d_features = affine_backward(&trace.features, &d_logits, &mut self.out_w, &mut self.out_b);
        let h = self.config.hidden;
        let d_article = EncoderStates {
            h_fwd: d_features[..h].to_vec(),
            c_fwd: vec![0.0; h],
            h_bwd: d_features[h..].to_vec(),
            c_bwd: vec![0.0; h],
        };
        let d_init = bilstm_backward(
            &trace.article,
            &d_article,
            &mut self.article_fwd,
            &mut self.article_bwd,
            &mut self.embedding,
        );
        bilstm_backward(
            &trace.topic,
            &d_init,
            &mut self.topic_fwd,
            &mut self.topic_bwd,
            &mut self.embedding,
        );
        let d = self.config.embedding_dim;
        self.embedding.grad[PAD_ID * d..(PAD_ID + 1) * d]
            .iter_mut()
            .for_each(|g| *g = 0.0);
        Ok(loss)
    }

    pub fn loss(&self, topic_ids: &[usize], article_ids: &[usize], gold: usize) -> Result<f64> {
        let trace = self.forward(topic_ids, article_ids)?;
        cross_entropy(&trace.probs, gold)
    }

    pub fn conditional_forward(&self, topic_ids: &[usize], article_ids: &[usize]) -> Result<StancePrediction> {
        Ok(StancePrediction::from_distribution(self.forward(topic_ids, article_ids)?.probs))
    }

    /// Predicts from raw strings: `article` is the annotation context text.
    pub fn predict(&self, topic: &str, article: &str) -> Result<StancePrediction> {
        self.conditional_forward(&self.encode_text(topic), &self.encode_text(article))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let metadata = json!({
            "format": "stance-scope/conditional-bilstm",
            "config": self.config,
            "vocab": self.vocab.entries().map(|(t, c)| json!([t, c])).collect::<Vec<_>>(),
        });
        let tensors = PARAM_NAMES
            .iter()
            .zip(self.params())
            .map(|(name, p)| NamedTensor {
                name: name.to_string(),
                shape: p.shape().to_vec(),
                values: p.values.clone(),
            })
            .collect();
        Checkpoint { metadata, tensors }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let meta = &ckpt.metadata;
        if meta["format"] != "stance-scope/conditional-bilstm" {
            return Err(Error::Checkpoint("not a conditional BiLSTM checkpoint".into()));
        }
        let config: StanceModelConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        let entries = meta["vocab"]
            .as_array()
            .ok_or_else(|| Error::Checkpoint("missing vocabulary".into()))?
            .iter()
            .map(|e| match (e[0].as_str(), e[1].as_u64()) {
                (Some(t), Some(c)) => Ok((t.to_string(), c)),
                _ => Err(Error::Checkpoint("malformed vocabulary entry".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_tokens(entries)?;
        let mut model = StanceModel::new(config, vocab, None)?;
        for (name, p) in PARAM_NAMES.iter().zip(model.params_mut()) {
            let t = ckpt.tensor(name)?;
            if t.shape != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.shape,
                    p.shape()
                )));
            }
            p.values.copy_from_slice(&t.values);
        }
        Ok(model)
    }
}

/// Shape of a full-model gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    /// Length of both the topic and the article sequence.
    pub tokens: usize,
    pub vocab: usize,
    pub init_bound: f64,
    /// Finite-difference step. At 1e-5 the roundoff in a loss near ln 3 is
    /// about 1e-11, which swamps components below 1e-7.
    pub eps: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            embedding_dim: 8,
            hidden: 8,
            tokens: 5,
            vocab: 12,
            init_bound: StanceModelConfig::default().init_bound,
            eps: 5e-4,
        }
    }
}

/// Compares the analytic gradient of a freshly initialised conditional model
/// with central differences over every parameter, on one seeded random
/// (topic, article, gold) instance.
pub fn check_gradients(shape: GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    if shape.tokens == 0 || shape.vocab < 3 {
        return Err(Error::InvalidArgument("gradient check needs tokens >= 1 and vocab >= 3".into()));
    }
    let words: Vec<(String, u64)> = (0..shape.vocab - 2).map(|i| (format!("w{i}"), 1)).collect();
    let vocab = Vocabulary::from_tokens(words)?;
    let config = StanceModelConfig {
        embedding_dim: shape.embedding_dim,
        hidden: shape.hidden,
        seed,
        init_bound: shape.init_bound,
        ..StanceModelConfig::default()
    };
    let mut model = StanceModel::new(config, vocab, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let vocab_len = model.vocab.len();
    let mut sample = |n: usize| -> Vec<usize> { (0..n).map(|_| rng.gen_range(PAD_ID + 1..vocab_len)).collect() };
    let topic = sample(shape.tokens);
    let article = sample(shape.tokens);
    let gold = rng.gen_range(0..3);

    model.zero_grad();
    let trace = model.forward(&topic, &article)?;
    model.backward(&trace, gold)?;
    let theta = model.flat_params();
    let analytic = model.flat_grads();
    let mut probe = model.clone();
    gradient_check(&theta, &analytic, shape.eps, |point| {
        probe.set_flat_params(point).expect("same parameter count");
        probe.loss(&topic, &article, gold).unwrap_or(f64::NAN)
    })
}
