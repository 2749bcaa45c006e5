//! Statement / question classifier.
//!
//! Text is encoded character by character behind a leading `[CLS]` slot.
//! The token vectors `h_t` are pooled with additive self-attention
//!
//! ```text
//! e_t = v . tanh(W h_t + b)
//! alpha = softmax(e)
//! s = sum_t alpha_t h_t
//! ```
//!
//! and `s` feeds a 3-way softmax head trained with class-weighted
//! cross-entropy. Gradients are derived by hand; [`gradient_check`] compares
//! them with central differences of the forward loss.
//!
//! The params also carry the intonation table: one vector per sentence type,
//! looked up from either the predicted or a given label.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceType;

pub const CLS: &str = "[CLS]";
pub const UNK: &str = "[UNK]";
pub const NUM_CLASSES: usize = 3;
pub const CHECKPOINT_VERSION: &str = "1";

/// Half-width of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty text")]
    EmptyText,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("embedding file line {line}: {message}")]
    EmbeddingFile { line: usize, message: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Character-level token table with `[CLS]` at index 0 and `[UNK]` at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbedder {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub embeddings: Array2<f64>,
    pub trainable: bool,
}

impl TokenEmbedder {
    /// `tokens` must start with `[CLS]`, `[UNK]` and match the row count.
    pub fn new(
        tokens: Vec<String>,
        embeddings: Array2<f64>,
        trainable: bool,
    ) -> Result<Self, ClassifierError> {
        if tokens.len() < 2 || tokens[0] != CLS || tokens[1] != UNK {
            return Err(ClassifierError::Dimension(
                "vocabulary must start with [CLS], [UNK]".into(),
            ));
        }
        if tokens.len() != embeddings.nrows() || embeddings.ncols() == 0 {
            return Err(ClassifierError::Dimension(format!(
                "{} tokens but embedding matrix is {:?}",
                tokens.len(),
                embeddings.dim()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(ClassifierError::Dimension(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            embeddings,
            trainable,
        })
    }

    /// Vocabulary of the distinct characters in `texts`, sorted, behind the
    /// two special tokens.
    pub fn vocabulary<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut chars: Vec<char> = texts.into_iter().flat_map(str::chars).collect();
        chars.sort_unstable();
        chars.dedup();
        let mut tokens = vec![CLS.to_string(), UNK.to_string()];
        tokens.extend(chars.into_iter().map(String::from));
        tokens
    }

    /// Reads `token<TAB>x_1<TAB>...<TAB>x_d` lines. Tokens are single
    /// characters or the special tokens; specials that are absent get zero
    /// vectors.
    pub fn from_tsv(text: &str) -> Result<Self, ClassifierError> {
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut dim = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ClassifierError::EmbeddingFile {
                line: idx + 1,
                message,
            };
            let mut fields = line.split('\t');
            let token = fields.next().unwrap_or_default().to_string();
            if token != CLS && token != UNK && token.chars().count() != 1 {
                return Err(bad(format!("token {token:?} is not a single character")));
            }
            let values = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(format!("{f:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(bad("expected finite vector components".into()));
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(bad(format!(
                        "expected {d} components, found {}",
                        values.len()
                    )))
                }
                _ => {}
            }
            rows.push((token, values));
        }
        let dim = dim.ok_or_else(|| ClassifierError::EmbeddingFile {
            line: 0,
            message: "no embeddings".into(),
        })?;
        let take = |name: &str, rows: &mut Vec<(String, Vec<f64>)>| {
            rows.iter()
                .position(|(t, _)| t == name)
                .map(|p| rows.remove(p).1)
                .unwrap_or_else(|| vec![0.0; dim])
        };
        let cls = take(CLS, &mut rows);
        let unk = take(UNK, &mut rows);
        let mut tokens = vec![CLS.to_string(), UNK.to_string()];
        let mut data = cls;
        data.extend(unk);
        for (t, v) in rows {
            tokens.push(t);
            data.extend(v);
        }
        let n = tokens.len();
        let embeddings = Array2::from_shape_vec((n, dim), data)
            .map_err(|e| ClassifierError::Dimension(e.to_string()))?;
        Self::new(tokens, embeddings, true)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Token ids: `[CLS]` followed by one id per character.
    pub fn token_ids(&self, text: &str) -> Result<Vec<usize>, ClassifierError> {
        if text.is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        let mut buf = [0u8; 4];
        let mut ids = vec![0];
        ids.extend(text.chars().map(|c| {
            self.index
                .get(&*c.encode_utf8(&mut buf))
                .copied()
                .unwrap_or(1)
        }));
        Ok(ids)
    }
}

/// `T x d` token representations of `text`; row 0 is `[CLS]`.
pub fn encode_tokens(text: &str, embedder: &TokenEmbedder) -> Result<Array2<f64>, ClassifierError> {
    let ids = embedder.token_ids(text)?;
    Ok(embedder.embeddings.select(Axis(0), &ids))
}

/// Attention parameters: `w` is `d_a x d`, `b` and `v` have length `d_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub v: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// Pooled sentence vector.
    pub s: Array1<f64>,
    pub alpha: Array1<f64>,
    /// Unnormalized scores `e_t`.
    pub scores: Array1<f64>,
}

pub fn softmax(x: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = x.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn log_sum_exp(x: ArrayView1<'_, f64>) -> f64 {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn attention_hidden(h: &Array2<f64>, pooling: &PoolingParams) -> Array2<f64> {
    let mut u = h.dot(&pooling.w.t());
    u += &pooling.b;
    u.mapv_inplace(f64::tanh);
    u
}

pub fn attention_pool(
    h: &Array2<f64>,
    pooling: &PoolingParams,
) -> Result<AttentionOutput, ClassifierError> {
    if h.nrows() == 0 {
        return Err(ClassifierError::EmptyText);
    }
    let (d_a, d) = pooling.w.dim();
    if h.ncols() != d || pooling.b.len() != d_a || pooling.v.len() != d_a {
        return Err(ClassifierError::Dimension(format!(
            "tokens have {} dims, pooling expects W {:?}, b {}, v {}",
            h.ncols(),
            pooling.w.dim(),
            pooling.b.len(),
            pooling.v.len()
        )));
    }
    let scores = attention_hidden(h, pooling).dot(&pooling.v);
    let alpha = softmax(scores.view());
    let s = alpha.dot(h);
    Ok(AttentionOutput { s, alpha, scores })
}

/// Affine classification layer, `w` is `3 x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Head {
    pub fn logits(&self, s: ArrayView1<'_, f64>) -> Result<Array1<f64>, ClassifierError> {
        if self.w.ncols() != s.len() {
            return Err(ClassifierError::Dimension(format!(
                "head expects {} inputs, got {}",
                self.w.ncols(),
                s.len()
            )));
        }
        Ok(self.w.dot(&s) + &self.b)
    }
}

pub fn classify(s: ArrayView1<'_, f64>, head: &Head) -> Result<Array1<f64>, ClassifierError> {
    Ok(softmax(head.logits(s)?.view()))
}

/// `-class_weights[label] * ln(probs[label])`.
pub fn weighted_cross_entropy(
    probs: ArrayView1<'_, f64>,
    label: SentenceType,
    class_weights: &[f64; 3],
) -> f64 {
    -class_weights[label.code()] * probs[label.code()].ln()
}

/// The same loss computed from logits, finite even when the softmax
/// probability underflows.
pub fn weighted_cross_entropy_logits(
    logits: ArrayView1<'_, f64>,
    label: SentenceType,
    class_weights: &[f64; 3],
) -> f64 {
    class_weights[label.code()] * (log_sum_exp(logits) - logits[label.code()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub embedder: TokenEmbedder,
    pub pooling: PoolingParams,
    pub head: Head,
    /// One row per sentence type, indexed by [`SentenceType::code`].
    pub intonation_table: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub class_weights: [f64; 3],
    pub seed: u64,
    pub freeze_embedder: bool,
    /// Token embedding size `d` (ignored when an embedder is supplied).
    pub dim: usize,
    /// Attention hidden size `d_a`.
    pub attn_dim: usize,
    /// Intonation table width.
    pub intonation_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 200,
            class_weights: [1.0, 10.0, 20.0],
            seed: 0,
            freeze_embedder: false,
            dim: 64,
            attn_dim: 64,
            intonation_dim: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let fail = |m: &str| Err(ClassifierError::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self
            .class_weights
            .iter()
            .any(|w| !(*w > 0.0 && w.is_finite()))
        {
            return fail("class weights must be positive");
        }
        if self.batch_size == 0 || self.dim == 0 || self.attn_dim == 0 || self.intonation_dim == 0 {
            return fail("batch size and dimensions must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.gen_range(-INIT_SCALE..=INIT_SCALE))
}

fn uniform1(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.gen_range(-INIT_SCALE..=INIT_SCALE))
}

impl ClassifierParams {
    /// Seeded uniform initialization. With `embedder` given, its vectors are
    /// kept and only the remaining blocks are drawn.
    pub fn init(
        tokens: Vec<String>,
        embedder: Option<TokenEmbedder>,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ClassifierError> {
        let mut embedder = match embedder {
            Some(e) => e,
            None => {
                let emb = uniform(rng, (tokens.len(), cfg.dim));
                TokenEmbedder::new(tokens, emb, true)?
            }
        };
        embedder.trainable = !cfg.freeze_embedder;
        let d = embedder.dim();
        let pooling = PoolingParams {
            w: uniform(rng, (cfg.attn_dim, d)),
            b: uniform1(rng, cfg.attn_dim),
            v: uniform1(rng, cfg.attn_dim),
        };
        let head = Head {
            w: uniform(rng, (NUM_CLASSES, d)),
            b: uniform1(rng, NUM_CLASSES),
        };
        let intonation_table = uniform(rng, (NUM_CLASSES, cfg.intonation_dim));
        Ok(Self {
            embedder,
            pooling,
            head,
            intonation_table,
        })
    }

    /// Trainable blocks as flat slices, in [`Gradients::blocks`] order.
    pub fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.embedder
                .embeddings
                .as_slice_mut()
                .expect("standard layout"),
            self.pooling.w.as_slice_mut().expect("standard layout"),
            self.pooling.b.as_slice_mut().expect("standard layout"),
            self.pooling.v.as_slice_mut().expect("standard layout"),
            self.head.w.as_slice_mut().expect("standard layout"),
            self.head.b.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn forward(&self, text: &str) -> Result<(AttentionOutput, Array1<f64>), ClassifierError> {
        let h = encode_tokens(text, &self.embedder)?;
        let att = attention_pool(&h, &self.pooling)?;
        let logits = self.head.logits(att.s.view())?;
        Ok((att, logits))
    }

    /// Weighted loss of one example, evaluated from logits.
    pub fn example_loss(
        &self,
        text: &str,
        label: SentenceType,
        class_weights: &[f64; 3],
    ) -> Result<f64, ClassifierError> {
        let (_, logits) = self.forward(text)?;
        Ok(weighted_cross_entropy_logits(
            logits.view(),
            label,
            class_weights,
        ))
    }

    /// Mean weighted loss over `data`.
    pub fn dataset_loss(
        &self,
        data: &[(String, SentenceType)],
        class_weights: &[f64; 3],
    ) -> Result<f64, ClassifierError> {
        if data.is_empty() {
            return Err(ClassifierError::EmptyDataset);
        }
        let mut total = 0.0;
        for (text, label) in data {
            total += self.example_loss(text, *label, class_weights)?;
        }
        Ok(total / data.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: SentenceType,
    pub probs: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Argmax of the logits; ties go to the lowest class index.
pub fn argmax_class(logits: ArrayView1<'_, f64>) -> SentenceType {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    SentenceType::from_code(best).expect("three logits")
}

pub fn predict(text: &str, params: &ClassifierParams) -> Result<Prediction, ClassifierError> {
    let (att, logits) = params.forward(text)?;
    Ok(Prediction {
        label: argmax_class(logits.view()),
        probs: softmax(logits.view()).to_vec(),
        alpha: att.alpha.to_vec(),
    })
}

/// Row of the intonation table for `t`.
pub fn intonation_lookup(t: SentenceType, params: &ClassifierParams) -> ArrayView1<'_, f64> {
    params.intonation_table.row(t.code())
}

/// Sentence type whose intonation row is closest (Euclidean) to `v`.
pub fn nearest_intonation(v: ArrayView1<'_, f64>, params: &ClassifierParams) -> SentenceType {
    let dist = |row: ArrayView1<'_, f64>| {
        row.iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    };
    let mut best = 0;
    for (i, row) in params.intonation_table.outer_iter().enumerate() {
        if dist(row) < dist(params.intonation_table.row(best)) {
            best = i;
        }
    }
    SentenceType::from_code(best).expect("three rows")
}

/// Gradient of the mean batch loss, shaped like [`ClassifierParams`]
/// (the intonation table gets none).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Array2<f64>,
    pub pool_w: Array2<f64>,
    pub pool_b: Array1<f64>,
    pub pool_v: Array1<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl Gradients {
    fn zeros(params: &ClassifierParams) -> Self {
        Self {
            embeddings: Array2::zeros(params.embedder.embeddings.dim()),
            pool_w: Array2::zeros(params.pooling.w.dim()),
            pool_b: Array1::zeros(params.pooling.b.len()),
            pool_v: Array1::zeros(params.pooling.v.len()),
            head_w: Array2::zeros(params.head.w.dim()),
            head_b: Array1::zeros(params.head.b.len()),
        }
    }

    /// Embeddings, attention `W`, `b`, `v`, head weights, head bias.
    pub fn blocks(&self) -> [&[f64]; 6] {
        [
            self.embeddings.as_slice().expect("standard layout"),
            self.pool_w.as_slice().expect("standard layout"),
            self.pool_b.as_slice().expect("standard layout"),
            self.pool_v.as_slice().expect("standard layout"),
            self.head_w.as_slice().expect("standard layout"),
            self.head_b.as_slice().expect("standard layout"),
        ]
    }

    /// Largest absolute entry across all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-example gradient; embedding rows are kept sparse.
struct ExampleGrad {
    loss: f64,
    token_rows: Vec<(usize, Array1<f64>)>,
    pool_w: Array2<f64>,
    pool_b: Array1<f64>,
    pool_v: Array1<f64>,
    head_w: Array2<f64>,
    head_b: Array1<f64>,
}

fn example_gradient(
    params: &ClassifierParams,
    text: &str,
    label: SentenceType,
    class_weights: &[f64; 3],
) -> Result<ExampleGrad, ClassifierError> {
    let ids = params.embedder.token_ids(text)?;
    let h = params.embedder.embeddings.select(Axis(0), &ids);
    let a = attention_hidden(&h, &params.pooling);
    let scores = a.dot(&params.pooling.v);
    let alpha = softmax(scores.view());
    let s = alpha.dot(&h);
    let logits = params.head.logits(s.view())?;
    let probs = softmax(logits.view());
    let y = label.code();
    let weight = class_weights[y];
    let loss = weighted_cross_entropy_logits(logits.view(), label, class_weights);

    let mut d_logits = probs * weight;
    d_logits[y] -= weight;
    let head_w = outer(&d_logits, &s);
    let d_s = params.head.w.t().dot(&d_logits);

    let d_alpha = h.dot(&d_s);
    let mean = alpha.dot(&d_alpha);
    let d_scores = &alpha * &(d_alpha - mean);

    let mut d_h = outer(&alpha, &d_s);
    let pool_v = a.t().dot(&d_scores);
    // d tanh = 1 - tanh^2
    let mut d_u = outer(&d_scores, &params.pooling.v);
    d_u.zip_mut_with(&a, |g, &act| *g *= 1.0 - act * act);
    let pool_w = d_u.t().dot(&h);
    let pool_b = d_u.sum_axis(Axis(0));
    d_h += &d_u.dot(&params.pooling.w);

    let token_rows = if params.embedder.trainable {
        ids.into_iter()
            .zip(d_h.outer_iter().map(|r| r.to_owned()))
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExampleGrad {
        loss,
        token_rows,
        pool_w,
        pool_b,
        pool_v,
        head_w,
        head_b: d_logits,
    })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Mean gradient and mean loss over `batch`. Per-example gradients are
/// computed in parallel and summed in batch order.
pub fn gradients_with_loss(
    params: &ClassifierParams,
    batch: &[(&str, SentenceType)],
    class_weights: &[f64; 3],
) -> Result<(Gradients, f64), ClassifierError> {
    if batch.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let per_example = batch
        .par_iter()
        .map(|(text, label)| example_gradient(params, text, *label, class_weights))
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = Gradients::zeros(params);
    let mut loss = 0.0;
    for ex in &per_example {
        loss += ex.loss;
        for (id, row) in &ex.token_rows {
            let mut dst = g.embeddings.row_mut(*id);
            dst += row;
        }
        g.pool_w += &ex.pool_w;
        g.pool_b += &ex.pool_b;
        g.pool_v += &ex.pool_v;
        g.head_w += &ex.head_w;
        g.head_b += &ex.head_b;
    }
    let scale = 1.0 / batch.len() as f64;
    g.embeddings *= scale;
    g.pool_w *= scale;
    g.pool_b *= scale;
    g.pool_v *= scale;
    g.head_w *= scale;
    g.head_b *= scale;
    Ok((g, loss * scale))
}

pub fn gradients(
    params: &ClassifierParams,
    batch: &[(&str, SentenceType)],
    class_weights: &[f64; 3],
) -> Result<Gradients, ClassifierError> {
    gradients_with_loss(params, batch, class_weights).map(|(g, _)| g)
}

fn apply(params: &mut ClassifierParams, g: &Gradients, lr: f64) {
    if params.embedder.trainable {
        params.embedder.embeddings.scaled_add(-lr, &g.embeddings);
    }
    params.pooling.w.scaled_add(-lr, &g.pool_w);
    params.pooling.b.scaled_add(-lr, &g.pool_b);
    params.pooling.v.scaled_add(-lr, &g.pool_v);
    params.head.w.scaled_add(-lr, &g.head_w);
    params.head.b.scaled_add(-lr, &g.head_b);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean weighted loss over the full training set after the epoch.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: ClassifierParams,
    pub history: Vec<EpochStats>,
}

pub fn accuracy(
    params: &ClassifierParams,
    data: &[(String, SentenceType)],
) -> Result<f64, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut correct = 0;
    for (text, label) in data {
        if predict(text, params)?.label == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mini-batch gradient descent with a seeded shuffle each epoch. The
/// vocabulary comes from the training texts unless `embedder` is given.
pub fn train(
    dataset: &[(String, SentenceType)],
    cfg: &TrainConfig,
    embedder: Option<TokenEmbedder>,
) -> Result<Trained, ClassifierError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if dataset.iter().any(|(t, _)| t.is_empty()) {
        return Err(ClassifierError::EmptyText);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tokens = TokenEmbedder::vocabulary(dataset.iter().map(|(t, _)| t.as_str()));
    let mut params = ClassifierParams::init(tokens, embedder, cfg, &mut rng)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&str, SentenceType)> = chunk
                .iter()
                .map(|&i| (dataset[i].0.as_str(), dataset[i].1))
                .collect();
            let g = gradients(&params, &batch, &cfg.class_weights)?;
            apply(&mut params, &g, cfg.learning_rate);
        }
        history.push(EpochStats {
            epoch,
            loss: params.dataset_loss(dataset, &cfg.class_weights)?,
            accuracy: accuracy(&params, dataset)?,
        });
    }
    Ok(Trained { params, history })
}

/// History as CSV: `epoch,loss,accuracy`.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for h in history {
        out.push_str(&format!("{},{:.9},{:.6}\n", h.epoch, h.loss, h.accuracy));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub configurations: usize,
    pub checked_entries: usize,
    pub max_relative_error: f64,
    pub step: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps entries that are zero
/// on both sides from dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares [`gradients`] with central differences of the forward loss on
/// `configurations` random small models (`d = 4`, `d_a = 3`, up to 4
/// characters plus `[CLS]`).
pub fn gradient_check(
    configurations: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport, ClassifierError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = "他去学校吗不？。".chars().collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..configurations {
        let cfg = TrainConfig {
            dim: 4,
            attn_dim: 3,
            intonation_dim: 2,
            class_weights: [
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..10.0),
                rng.gen_range(0.5..20.0),
            ],
            ..TrainConfig::default()
        };
        let tokens = TokenEmbedder::vocabulary(["他去学校吗不？。"]);
        let mut params = ClassifierParams::init(tokens, None, &cfg, &mut rng)?;
        // Wider than the training init so tanh and softmax leave their
        // linear regimes.
        let widen = |a: &mut Array2<f64>, rng: &mut ChaCha8Rng| {
            a.mapv_inplace(|_| rng.gen_range(-1.0..1.0))
        };
        widen(&mut params.embedder.embeddings, &mut rng);
        widen(&mut params.pooling.w, &mut rng);
        widen(&mut params.head.w, &mut rng);
        params.pooling.v.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
        let batch_len = rng.gen_range(1..=3);
        let batch: Vec<(String, SentenceType)> = (0..batch_len)
            .map(|_| {
                let len = rng.gen_range(1..=4);
                let text: String = (0..len)
                    .map(|_| *alphabet.choose(&mut rng).expect("nonempty"))
                    .collect();
                (
                    text,
                    SentenceType::from_code(rng.gen_range(0..3)).expect("code"),
                )
            })
            .collect();
        let borrowed: Vec<(&str, SentenceType)> =
            batch.iter().map(|(t, l)| (t.as_str(), *l)).collect();
        let analytic = gradients(&params, &borrowed, &cfg.class_weights)?;
        let loss = |p: &ClassifierParams| -> f64 {
            batch
                .iter()
                .map(|(t, l)| {
                    p.example_loss(t, *l, &cfg.class_weights)
                        .expect("valid example")
                })
                .sum::<f64>()
                / batch.len() as f64
        };

        for block in 0..6 {
            let n = params.blocks_mut()[block].len();
            for k in 0..n {
                let original = params.blocks_mut()[block][k];
                params.blocks_mut()[block][k] = original + step;
                let plus = loss(&params);
                params.blocks_mut()[block][k] = original - step;
                let minus = loss(&params);
                params.blocks_mut()[block][k] = original;
                let numeric = (plus - minus) / (2.0 * step);
                worst = worst.max(relative_error(analytic.blocks()[block][k], numeric));
                checked += 1;
            }
        }
    }
    Ok(GradCheckReport {
        configurations,
        checked_entries: checked,
        max_relative_error: worst,
        step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixJson {
    shape: [usize; 2],
    data: Vec<f64>,
}

impl From<&Array2<f64>> for MatrixJson {
    fn from(a: &Array2<f64>) -> Self {
        Self {
            shape: [a.nrows(), a.ncols()],
            data: a.iter().copied().collect(),
        }
    }
}

impl MatrixJson {
    fn into_array(self, what: &str) -> Result<Array2<f64>, ClassifierError> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data)
            .map_err(|e| ClassifierError::Checkpoint(format!("{what}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointJson {
    version: String,
    config: Option<serde_json::Value>,
    tokens: Vec<String>,
    trainable: bool,
    embeddings: MatrixJson,
    attention_w: MatrixJson,
    attention_b: Vec<f64>,
    attention_v: Vec<f64>,
    head_w: MatrixJson,
    head_b: Vec<f64>,
    intonation_table: MatrixJson,
}

/// Serializes `params` as the version-1 checkpoint JSON. `config` is stored
/// verbatim so runs are self-describing.
pub fn checkpoint_json(
    params: &ClassifierParams,
    config: Option<serde_json::Value>,
) -> Result<String, ClassifierError> {
    let ck = CheckpointJson {
        version: CHECKPOINT_VERSION.into(),
        config,
        tokens: params.embedder.tokens.clone(),
        trainable: params.embedder.trainable,
        embeddings: (&params.embedder.embeddings).into(),
        attention_w: (&params.pooling.w).into(),
        attention_b: params.pooling.b.to_vec(),
        attention_v: params.pooling.v.to_vec(),
        head_w: (&params.head.w).into(),
        head_b: params.head.b.to_vec(),
        intonation_table: (&params.intonation_table).into(),
    };
    let mut s = serde_json::to_string_pretty(&ck)?;
    s.push('\n');
    Ok(s)
}

pub fn params_from_checkpoint(text: &str) -> Result<ClassifierParams, ClassifierError> {
    let ck: CheckpointJson = serde_json::from_str(text)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(ClassifierError::Checkpoint(format!(
            "unsupported version {:?}",
            ck.version
        )));
    }
    let embedder = TokenEmbedder::new(
        ck.tokens,
        ck.embeddings.into_array("embeddings")?,
        ck.trainable,
    )?;
    let params = ClassifierParams {
        embedder,
        pooling: PoolingParams {
            w: ck.attention_w.into_array("attention_w")?,
            b: Array1::from(ck.attention_b),
            v: Array1::from(ck.attention_v),
        },
        head: Head {
            w: ck.head_w.into_array("head_w")?,
            b: Array1::from(ck.head_b),
        },
        intonation_table: ck.intonation_table.into_array("intonation_table")?,
    };
    let d = params.embedder.dim();
    let (d_a, wd) = params.pooling.w.dim();
    if wd != d
        || params.pooling.b.len() != d_a
        || params.pooling.v.len() != d_a
        || params.head.w.dim() != (NUM_CLASSES, d)
        || params.head.b.len() != NUM_CLASSES
        || params.intonation_table.nrows() != NUM_CLASSES
    {
        return Err(ClassifierError::Checkpoint(
            "inconsistent parameter shapes".into(),
        ));
    }
    Ok(params)
}

pub fn load_checkpoint(path: &Path) -> Result<ClassifierParams, ClassifierError> {
    params_from_checkpoint(&fs::read_to_string(path)?)
}
