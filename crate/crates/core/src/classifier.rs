//! Occupation classifier over frozen embeddings and the gender probe on its
//! sentence representation.
//!
//! Encoder: attention pooling `alpha = softmax(<a, w_i>)`, `p = sum alpha_i w_i`,
//! then `r = relu(p W + b)` and `logits = r V + c`. Embeddings are inputs,
//! never parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, Biography, Split};
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub momentum: f64,
    /// Epochs without dev-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub probe_learning_rate: f64,
    pub probe_epochs: usize,
    pub probe_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            batch_size: 32,
            epochs: 30,
            hidden: 32,
            momentum: 0.9,
            patience: 6,
            seed: 0,
            probe_learning_rate: 0.1,
            probe_epochs: 30,
            probe_batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.hidden > 0
            && (0.0..1.0).contains(&self.momentum)
            && self.probe_learning_rate > 0.0
            && self.probe_batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// A biography reduced to in-vocabulary row indices and a label index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: usize,
}

/// Row indices of the in-vocabulary tokens, in order. OOV tokens are skipped.
pub fn encode_tokens<T: Scalar, S: AsRef<str>>(e: &EmbeddingSet<T>, tokens: &[S]) -> Vec<usize> {
    tokens.iter().filter_map(|t| e.index_of(t.as_ref())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel<T> {
    pub dim: usize,
    pub hidden: usize,
    pub labels: Vec<String>,
    pub attention: Vec<T>,
    /// `dim x hidden`, row-major.
    pub hidden_weights: Vec<T>,
    pub hidden_bias: Vec<T>,
    /// `hidden x classes`, row-major.
    pub output_weights: Vec<T>,
    pub output_bias: Vec<T>,
    /// Predicted for inputs with no in-vocabulary token.
    pub fallback_label: usize,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub attention: Vec<T>,
    pub hidden_weights: Vec<T>,
    pub hidden_bias: Vec<T>,
    pub output_weights: Vec<T>,
    pub output_bias: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(m: &ClassifierModel<T>) -> Self {
        Gradients {
            attention: vec![T::zero(); m.attention.len()],
            hidden_weights: vec![T::zero(); m.hidden_weights.len()],
            hidden_bias: vec![T::zero(); m.hidden_bias.len()],
            output_weights: vec![T::zero(); m.output_weights.len()],
            output_bias: vec![T::zero(); m.output_bias.len()],
        }
    }

    pub fn groups(&self) -> [(&'static str, &[T]); 5] {
        [
            ("attention", &self.attention),
            ("hidden_weights", &self.hidden_weights),
            ("hidden_bias", &self.hidden_bias),
            ("output_weights", &self.output_weights),
            ("output_bias", &self.output_bias),
        ]
    }

    fn groups_mut(&mut self) -> [&mut Vec<T>; 5] {
        [
            &mut self.attention,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }
}

struct Forward<T> {
    alpha: Vec<T>,
    pooled: Vec<T>,
    pre: Vec<T>,
    rep: Vec<T>,
    probs: Vec<T>,
}

pub(crate) fn softmax_in_place<T: Scalar>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in x.iter_mut() {
        *v = *v / sum;
    }
}

fn uniform_init<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect()
}

impl<T: Scalar> ClassifierModel<T> {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init(dim: usize, hidden: usize, labels: Vec<String>, seed: u64) -> Self {
        let classes = labels.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "classifier-init"));
        ClassifierModel {
            dim,
            hidden,
            attention: uniform_init(&mut rng, dim, dim),
            hidden_weights: uniform_init(&mut rng, dim * hidden, dim),
            hidden_bias: vec![T::zero(); hidden],
            output_weights: uniform_init(&mut rng, hidden * classes, hidden),
            output_bias: vec![T::zero(); classes],
            labels,
            fallback_label: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.labels.len()
    }

    pub fn groups(&self) -> [(&'static str, &[T]); 5] {
        [
            ("attention", &self.attention),
            ("hidden_weights", &self.hidden_weights),
            ("hidden_bias", &self.hidden_bias),
            ("output_weights", &self.output_weights),
            ("output_bias", &self.output_bias),
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<T>; 5] {
        [
            &mut self.attention,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }

    /// Softmax attention weights over the given rows.
    pub fn attention_weights(&self, e: &EmbeddingSet<T>, tokens: &[usize]) -> Result<Vec<T>> {
        if tokens.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut alpha: Vec<T> = tokens.iter().map(|&t| dot(&self.attention, e.row(t))).collect();
        softmax_in_place(&mut alpha);
        Ok(alpha)
    }

    fn forward(&self, e: &EmbeddingSet<T>, tokens: &[usize]) -> Result<Forward<T>> {
        let alpha = self.attention_weights(e, tokens)?;
        let mut pooled = vec![T::zero(); self.dim];
        for (&t, &a) in tokens.iter().zip(&alpha) {
            for (p, &w) in pooled.iter_mut().zip(e.row(t)) {
                *p = *p + a * w;
            }
        }
        let h = self.hidden;
        let mut pre = self.hidden_bias.clone();
        for (i, &p) in pooled.iter().enumerate() {
            let row = &self.hidden_weights[i * h..(i + 1) * h];
            for (z, &w) in pre.iter_mut().zip(row) {
                *z = *z + p * w;
            }
        }
        let rep: Vec<T> = pre.iter().map(|&z| z.max(T::zero())).collect();
        let c = self.classes();
        let mut probs = self.output_bias.clone();
        for (j, &r) in rep.iter().enumerate() {
            if r == T::zero() {
                continue;
            }
            let row = &self.output_weights[j * c..(j + 1) * c];
            for (l, &v) in probs.iter_mut().zip(row) {
                *l = *l + r * v;
            }
        }
        softmax_in_place(&mut probs);
        Ok(Forward {
            alpha,
            pooled,
            pre,
            rep,
            probs,
        })
    }

    /// The activation of the last hidden layer (before the logits).
    pub fn sentence_representation(&self, e: &EmbeddingSet<T>, tokens: &[usize]) -> Result<Vec<T>> {
        Ok(self.forward(e, tokens)?.rep)
    }

    /// Most probable label (lowest index on ties) and the class probabilities.
    pub fn predict(&self, e: &EmbeddingSet<T>, tokens: &[usize]) -> Result<(usize, Vec<T>)> {
        let probs = self.forward(e, tokens)?.probs;
        Ok((argmax(&probs), probs))
    }

    /// Like [`predict`](Self::predict) but empty inputs get the fallback label.
    pub fn predict_label(&self, e: &EmbeddingSet<T>, tokens: &[usize]) -> usize {
        self.predict(e, tokens).map_or(self.fallback_label, |(l, _)| l)
    }

    /// Adds the gradient of one example's cross-entropy into `g` and returns
    /// its loss.
    #[allow(clippy::needless_range_loop)]
    fn accumulate(&self, e: &EmbeddingSet<T>, ex: &Example, g: &mut Gradients<T>) -> Result<T> {
        let f = self.forward(e, &ex.tokens)?;
        let c = self.classes();
        let h = self.hidden;
        let loss = -f.probs[ex.label].max(T::min_positive_value()).ln();

        let mut dlogits = f.probs.clone();
        dlogits[ex.label] = dlogits[ex.label] - T::one();
        for (gb, &dl) in g.output_bias.iter_mut().zip(&dlogits) {
            *gb = *gb + dl;
        }
        let mut dpre = vec![T::zero(); h];
        for j in 0..h {
            let row = &self.output_weights[j * c..(j + 1) * c];
            if f.rep[j] != T::zero() {
                let grow = &mut g.output_weights[j * c..(j + 1) * c];
                for (gw, &dl) in grow.iter_mut().zip(&dlogits) {
                    *gw = *gw + f.rep[j] * dl;
                }
            }
            if f.pre[j] > T::zero() {
                dpre[j] = dot(row, &dlogits);
            }
        }
        for (gb, &dz) in g.hidden_bias.iter_mut().zip(&dpre) {
            *gb = *gb + dz;
        }
        let mut dpooled = vec![T::zero(); self.dim];
        for (i, &p) in f.pooled.iter().enumerate() {
            let row = &self.hidden_weights[i * h..(i + 1) * h];
            let grow = &mut g.hidden_weights[i * h..(i + 1) * h];
            for (gw, &dz) in grow.iter_mut().zip(&dpre) {
                *gw = *gw + p * dz;
            }
            dpooled[i] = dot(row, &dpre);
        }
        // d alpha_i = <dp, w_i>; d score_i = alpha_i (d alpha_i - sum_j alpha_j d alpha_j)
        let dalpha: Vec<T> = ex.tokens.iter().map(|&t| dot(&dpooled, e.row(t))).collect();
        let mean = dot(&f.alpha, &dalpha);
        for ((&t, &a), &da) in ex.tokens.iter().zip(&f.alpha).zip(&dalpha) {
            let ds = a * (da - mean);
            for (ga, &w) in g.attention.iter_mut().zip(e.row(t)) {
                *ga = *ga + ds * w;
            }
        }
        Ok(loss)
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradient(&self, e: &EmbeddingSet<T>, batch: &[Example]) -> Result<(T, Gradients<T>)> {
        let mut g = Gradients::zeros_like(self);
        let mut loss = T::zero();
        for ex in batch {
            loss = loss + self.accumulate(e, ex, &mut g)?;
        }
        let inv = T::one() / T::of(batch.len().max(1) as f64);
        for group in g.groups_mut() {
            group.iter_mut().for_each(|x| *x = *x * inv);
        }
        Ok((loss * inv, g))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, e: &EmbeddingSet<T>, batch: &[Example]) -> Result<T> {
        let mut total = T::zero();
        for ex in batch {
            let f = self.forward(e, &ex.tokens)?;
            total = total - f.probs[ex.label].max(T::min_positive_value()).ln();
        }
        Ok(total / T::of(batch.len().max(1) as f64))
    }

    pub fn accuracy(&self, e: &EmbeddingSet<T>, examples: &[Example]) -> f64 {
        if examples.is_empty() {
            return f64::NAN;
        }
        let correct = examples
            .iter()
            .filter(|ex| self.predict_label(e, &ex.tokens) == ex.label)
            .count();
        correct as f64 / examples.len() as f64
    }
}

fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Classical momentum: `v <- mu v - lr g; theta <- theta + v`.
struct Momentum<T> {
    velocity: [Vec<T>; 5],
    lr: T,
    mu: T,
}

impl<T: Scalar> Momentum<T> {
    fn new(m: &ClassifierModel<T>, lr: f64, mu: f64) -> Self {
        let velocity = m.groups().map(|(_, g)| vec![T::zero(); g.len()]);
        Momentum {
            velocity,
            lr: T::of(lr),
            mu: T::of(mu),
        }
    }

    fn step(&mut self, m: &mut ClassifierModel<T>, g: &Gradients<T>) {
        for ((params, (_, grad)), vel) in m.groups_mut().into_iter().zip(g.groups()).zip(&mut self.velocity) {
            for ((p, &gi), v) in params.iter_mut().zip(grad).zip(vel.iter_mut()) {
                *v = self.mu * *v - self.lr * gi;
                *p = *p + *v;
            }
        }
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: ClassifierModel<T>,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// Mini-batch training with momentum. Returns the parameters of the epoch
/// with the best dev accuracy (the initial model counts as epoch 0).
pub fn train_examples<T: Scalar>(
    e: &EmbeddingSet<T>,
    train: &[Example],
    dev: &[Example],
    labels: Vec<String>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if labels.len() < 2 {
        return Err(Error::Data("need at least two classes".into()));
    }
    let mut model = ClassifierModel::init(e.dim(), cfg.hidden, labels, cfg.seed);
    let mut counts = vec![0usize; model.classes()];
    for ex in train {
        counts[ex.label] += 1;
    }
    model.fallback_label = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "batch-order"));
    let mut opt = Momentum::new(&model, cfg.learning_rate, cfg.momentum);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    let mut best = model.clone();
    let mut best_acc = if dev.is_empty() { f64::NAN } else { model.accuracy(e, dev) };
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (loss, grad) = model.loss_and_gradient(e, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss.as_f64() * chunk.len() as f64;
            opt.step(&mut model, &grad);
        }
        if !model.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let dev_accuracy = if dev.is_empty() { f64::NAN } else { model.accuracy(e, dev) };
        history.push(EpochLog {
            epoch,
            train_loss: total / train.len() as f64,
            dev_accuracy,
        });
        if dev.is_empty() {
            best = model.clone();
            best_epoch = epoch;
            continue;
        }
        if dev_accuracy > best_acc {
            best_acc = dev_accuracy;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        history,
    })
}

/// Sorted distinct occupations.
pub fn label_inventory(bios: &[Biography]) -> Vec<String> {
    let mut labels: Vec<String> = bios.iter().map(|b| b.occupation.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
}

/// Encodes the biographies of one split; empty ones are dropped and counted.
pub fn examples_for_split<T: Scalar>(
    e: &EmbeddingSet<T>,
    bios: &[Biography],
    labels: &[String],
    split: Split,
) -> (Vec<Example>, usize) {
    let mut out = Vec::new();
    let mut empty = 0;
    for b in bios.iter().filter(|b| b.split == Some(split)) {
        let tokens = encode_tokens(e, &b.tokens);
        if tokens.is_empty() {
            empty += 1;
            continue;
        }
        let label = labels.binary_search(&b.occupation).expect("label inventory covers every biography");
        out.push(Example { tokens, label });
    }
    (out, empty)
}

/// Trains on the train split with early stopping on the dev split.
/// Biographies must already carry split assignments.
pub fn train_classifier<T: Scalar>(
    bios: &[Biography],
    e: &EmbeddingSet<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if bios.iter().any(|b| b.split.is_none()) {
        return Err(Error::Data("biographies have no split assignment".into()));
    }
    let labels = label_inventory(bios);
    let (train, dropped) = examples_for_split(e, bios, &labels, Split::Train);
    if dropped > 0 {
        log::warn!("{dropped} training biographies have no in-vocabulary tokens and were dropped");
    }
    let (dev, _) = examples_for_split(e, bios, &labels, Split::Dev);
    train_examples(e, &train, &dev, labels, cfg)
}

/// Logistic regression on standardized frozen representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub feature_mean: Vec<T>,
    pub feature_scale: Vec<T>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (T::one() + ez)
    }
}

impl<T: Scalar> ProbeModel<T> {
    fn standardize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((&v, &m), &s)| (v - m) * s)
            .collect()
    }

    /// Probability that the subject is female.
    pub fn probability(&self, representation: &[T]) -> T {
        sigmoid(dot(&self.weights, &self.standardize(representation)) + self.bias)
    }

    /// Mean sigmoid cross-entropy over standardized features and its
    /// gradient with respect to `(weights, bias)`.
    pub fn loss_and_gradient(&self, xs: &[Vec<T>], ys: &[bool]) -> (T, Vec<T>, T) {
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut gb = T::zero();
        let mut loss = T::zero();
        for (x, &y) in xs.iter().zip(ys) {
            let z = dot(&self.weights, x) + self.bias;
            let p = sigmoid(z);
            let target = if y { T::one() } else { T::zero() };
            // log(1 + e^z) - y z, computed stably
            let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
            loss = loss + softplus - target * z;
            let r = p - target;
            for (g, &xi) in gw.iter_mut().zip(x) {
                *g = *g + r * xi;
            }
            gb = gb + r;
        }
        let inv = T::one() / T::of(xs.len().max(1) as f64);
        gw.iter_mut().for_each(|g| *g = *g * inv);
        (loss * inv, gw, gb * inv)
    }
}

/// Trains a gender probe on the train-split representations of a frozen
/// classifier and reports its accuracy on the test split.
pub fn train_gender_probe<T: Scalar>(
    model: &ClassifierModel<T>,
    e: &EmbeddingSet<T>,
    bios: &[Biography],
    cfg: &TrainConfig,
) -> Result<(ProbeModel<T>, f64)> {
    cfg.validate()?;
    let reps = |split: Split| -> Result<(Vec<Vec<T>>, Vec<bool>)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in bios.iter().filter(|b| b.split == Some(split)) {
            let tokens = encode_tokens(e, &b.tokens);
            match model.sentence_representation(e, &tokens) {
                Ok(r) => {
                    xs.push(r);
                    ys.push(b.gender.is_female());
                }
                Err(Error::EmptySelection) => {}
                Err(other) => return Err(other),
            }
        }
        Ok((xs, ys))
    };
    let (train_x, train_y) = reps(Split::Train)?;
    let (test_x, test_y) = reps(Split::Test)?;
    let females = train_y.iter().filter(|&&y| y).count();
    if females == 0 || females == train_y.len() {
        return Err(Error::Data("gender probe needs both genders in the training split".into()));
    }

    let h = model.hidden;
    let n = T::of(train_x.len() as f64);
    let mut mean = vec![T::zero(); h];
    for x in &train_x {
        for (m, &v) in mean.iter_mut().zip(x) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![T::zero(); h];
    for x in &train_x {
        for ((s, &v), &m) in var.iter_mut().zip(x).zip(&mean) {
            *s = *s + (v - m) * (v - m);
        }
    }
    let scale: Vec<T> = var
        .iter()
        .map(|&s| {
            let sd = (s / n).sqrt();
            if sd > T::of(1e-12) {
                T::one() / sd
            } else {
                T::zero()
            }
        })
        .collect();
    let mut probe = ProbeModel {
        weights: vec![T::zero(); h],
        bias: T::zero(),
        feature_mean: mean,
        feature_scale: scale,
    };
    let train_z: Vec<Vec<T>> = train_x.iter().map(|x| probe.standardize(x)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "probe-order"));
    let mut order: Vec<usize> = (0..train_z.len()).collect();
    let lr = T::of(cfg.probe_learning_rate);
    let mu = T::of(cfg.momentum);
    let mut vw = vec![T::zero(); h];
    let mut vb = T::zero();
    let mut xb = Vec::with_capacity(cfg.probe_batch_size);
    let mut yb = Vec::with_capacity(cfg.probe_batch_size);
    for epoch in 1..=cfg.probe_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.probe_batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.push(train_z[i].clone());
                yb.push(train_y[i]);
            }
            let (loss, gw, gb) = probe.loss_and_gradient(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            for ((w, v), &g) in probe.weights.iter_mut().zip(vw.iter_mut()).zip(&gw) {
                *v = mu * *v - lr * g;
                *w = *w + *v;
            }
            vb = mu * vb - lr * gb;
            probe.bias = probe.bias + vb;
        }
    }

    let accuracy = if test_x.is_empty() {
        f64::NAN
    } else {
        let half = T::of(0.5);
        let correct = test_x
            .iter()
            .zip(&test_y)
            .filter(|(x, &y)| (probe.probability(x) > half) == y)
            .count();
        correct as f64 / test_x.len() as f64
    };
    Ok((probe, accuracy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_set() -> EmbeddingSet<f64> {
        EmbeddingSet::from_rows(
            2,
            vec![("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![0.6, 0.8])],
        )
        .unwrap()
        .0
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn single_token_representation() {
        let e = tiny_set();
        let m = ClassifierModel::<f64>::init(2, 3, labels(2), 7);
        let rep = m.sentence_representation(&e, &[2]).unwrap();
        for j in 0..3 {
            let z = 0.6 * m.hidden_weights[j] + 0.8 * m.hidden_weights[3 + j] + m.hidden_bias[j];
            assert!((rep[j] - z.max(0.0)).abs() < 1e-15);
        }
        assert_eq!(m.attention_weights(&e, &[2]).unwrap(), vec![1.0]);
    }

    #[test]
    fn zero_hidden_layer_gives_zero_representation() {
        let e = tiny_set();
        let mut m = ClassifierModel::<f64>::init(2, 3, labels(2), 7);
        m.hidden_weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.sentence_representation(&e, &[0, 1, 2]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn attention_sums_to_one_and_empty_is_error() {
        let e = tiny_set();
        let m = ClassifierModel::<f64>::init(2, 3, labels(2), 1);
        let a = m.attention_weights(&e, &[0, 1, 2, 2]).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(m.sentence_representation(&e, &[]), Err(Error::EmptySelection)));
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let e = tiny_set();
        let mut m = ClassifierModel::<f64>::init(2, 3, labels(3), 1);
        m.output_weights.iter_mut().for_each(|w| *w = 0.0);
        let (label, probs) = m.predict(&e, &[0, 1]).unwrap();
        assert_eq!(label, 0);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let e = tiny_set();
        let train = vec![Example { tokens: vec![0], label: 0 }, Example { tokens: vec![1], label: 1 }];
        let cfg = TrainConfig { epochs: 0, hidden: 4, ..TrainConfig::default() };
        let out = train_examples(&e, &train, &train, labels(2), &cfg).unwrap();
        let mut init = ClassifierModel::init(2, 4, labels(2), cfg.seed);
        init.fallback_label = out.model.fallback_label;
        assert_eq!(out.model, init);
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let e = tiny_set();
        let train: Vec<Example> = (0..64)
            .map(|i| Example { tokens: vec![i % 3], label: i % 2 })
            .collect();
        let cfg = TrainConfig { learning_rate: 1e300, hidden: 4, epochs: 5, ..TrainConfig::default() };
        assert!(matches!(train_examples(&e, &train, &[], labels(2), &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let e = tiny_set();
        let cfg = TrainConfig::default();
        assert!(train_examples(&e, &[], &[], labels(2), &cfg).is_err());
        let one = vec![Example { tokens: vec![0], label: 0 }];
        assert!(train_examples(&e, &one, &[], labels(1), &cfg).is_err());
    }
}
