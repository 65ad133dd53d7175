//! Two-layer plausibility classifier over concatenated triple embeddings.
//!
//! `p = sigmoid(w2 · act(W1 x + b1) + b2)` with `act` = tanh (or ReLU),
//! trained on mean binary cross-entropy with hand-derived gradients.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::sampling::Label;
use crate::triple::Triple;

/// Row-major feature matrix with one 0/1 label per row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    features: Vec<f64>,
    labels: Vec<f64>,
    width: usize,
}

impl Samples {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, width: usize) -> Self {
        assert_eq!(features.len(), labels.len() * width, "feature/label shape mismatch");
        Samples {
            features,
            labels,
            width,
        }
    }

    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Self {
        let width = rows.first().map_or(0, |r| r.0.len());
        let mut features = Vec::with_capacity(rows.len() * width);
        for (x, _) in rows {
            assert_eq!(x.len(), width, "ragged rows");
            features.extend_from_slice(x);
        }
        Samples::new(features, rows.iter().map(|r| r.1).collect(), width)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        let mut features = Vec::with_capacity(indices.len() * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Samples::new(features, labels, self.width)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `h`.
    fn derivative(self, a: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn code(self) -> u64 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Classifier weights. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    hidden: usize,
    dim: usize,
    activation: Activation,
    /// `hidden × 3·dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const LOG_FLOOR: f64 = 1e-12;

fn bce(p: f64, y: f64) -> f64 {
    -(y * p.max(LOG_FLOOR).ln() + (1.0 - y) * (1.0 - p).max(LOG_FLOOR).ln())
}

impl MlpParams {
    pub fn zeros(hidden: usize, dim: usize, activation: Activation) -> Self {
        let input = 3 * dim;
        MlpParams {
            hidden,
            dim,
            activation,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_width(&self) -> usize {
        3 * self.dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All parameters in checkpoint order: W1, b1, w2, b2.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(std::iter::once(&mut self.b2))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    /// Hidden activations for `x` written into `pre` and `out`.
    fn hidden_layer(&self, x: &[f64], pre: &mut [f64], out: &mut [f64]) {
        let width = self.input_width();
        for j in 0..self.hidden {
            let row = &self.w1[j * width..(j + 1) * width];
            let a = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            pre[j] = a;
            out[j] = self.activation.apply(a);
        }
    }

    /// Plausibility probability for one feature vector of length `3·dim`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_width(), "input width mismatch");
        let mut pre = vec![0.0; self.hidden];
        let mut h = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut pre, &mut h);
        let z = self.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + self.b2;
        sigmoid(z)
    }

    /// Probabilities for every row of `samples`.
    pub fn forward_all(&self, samples: &Samples) -> Vec<f64> {
        (0..samples.len())
            .into_par_iter()
            .map(|i| self.forward(samples.row(i)))
            .collect()
    }

    /// Label (plausible iff `p >= 0.5`) and probability, or `None` if the
    /// table drops the triple.
    pub fn predict(&self, table: &EmbeddingTable, triple: &Triple) -> Option<(Label, f64)> {
        let x = table.embed_triple(triple)?;
        let p = self.forward(&x);
        Some((Label::from_bool(p >= 0.5), p))
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(seed: u64, hidden: usize, dim: usize, activation: Activation) -> MlpParams {
    assert!(hidden >= 1 && dim >= 1, "hidden and dim must be positive");
    let mut params = MlpParams::zeros(hidden, dim, activation);
    let mut rng = substream(seed, domain::INIT, 0);
    let bound1 = (6.0 / (3 * dim + hidden) as f64).sqrt();
    let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
    for w in &mut params.w1 {
        *w = rng.random_range(-bound1..=bound1);
    }
    for w in &mut params.w2 {
        *w = rng.random_range(-bound2..=bound2);
    }
    params
}

/// Mean cross-entropy over the rows of `samples` selected by `batch`, and its
/// exact gradient.
pub fn loss_and_gradients(
    params: &MlpParams,
    samples: &Samples,
    batch: &[usize],
) -> Result<(f64, MlpParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    assert_eq!(samples.width(), params.input_width(), "input width mismatch");

    let width = params.input_width();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = MlpParams::zeros(params.hidden, params.dim, params.activation);
    let mut pre = vec![0.0; params.hidden];
    let mut h = vec![0.0; params.hidden];
    let mut loss = 0.0;

    for &i in batch {
        let x = samples.row(i);
        let y = samples.label(i);
        params.hidden_layer(x, &mut pre, &mut h);
        let z = params.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + params.b2;
        let p = sigmoid(z);
        loss += bce(p, y);

        let dz = (p - y) * scale;
        grad.b2 += dz;
        for j in 0..params.hidden {
            grad.w2[j] += dz * h[j];
            let da = dz * params.w2[j] * params.activation.derivative(pre[j], h[j]);
            if da == 0.0 {
                continue;
            }
            grad.b1[j] += da;
            let row = &mut grad.w1[j * width..(j + 1) * width];
            for (g, v) in row.iter_mut().zip(x) {
                *g += da * v;
            }
        }
    }

    let loss = loss * scale;
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::NonFiniteLoss { batch: 0 });
    }
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fractional values train on a prefix of one extra shuffled epoch.
    pub epochs: f64,
    pub seed: u64,
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20.0,
            seed: 0,
            hidden: 100,
            optimizer: OptimizerKind::Adam,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.epochs.is_finite() && self.epochs > 0.0) {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be positive".into()));
        }
        Ok(())
    }

    /// Batch count per epoch-slice: full epochs, then the rounded fractional tail.
    pub fn schedule(&self, n_examples: usize) -> Vec<usize> {
        let n_batches = n_examples.div_ceil(self.batch_size);
        let full = self.epochs.floor() as usize;
        let tail = ((self.epochs - self.epochs.floor()) * n_batches as f64).round() as usize;
        let mut schedule = vec![n_batches; full];
        if tail > 0 {
            schedule.push(tail);
        }
        schedule
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad.iter()) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (((p, g), m), v) in params.iter_mut().zip(grad.iter()).zip(m).zip(v) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= *lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Mean loss of each batch before its update.
    pub losses: Vec<f64>,
}

/// Train from a fresh initialization derived from `cfg.seed`.
pub fn train(samples: &Samples, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if samples.width() == 0 || !samples.width().is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "feature width {} is not 3·dim",
            samples.width()
        )));
    }
    let params = init_params(cfg.seed, cfg.hidden, samples.width() / 3, cfg.activation);
    train_from(params, samples, cfg)
}

/// Continue training `params`.
pub fn train_from(mut params: MlpParams, samples: &Samples, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for (epoch, &n_batches) in cfg.schedule(samples.len()).iter().enumerate() {
        order.sort_unstable();
        order.shuffle(&mut substream(cfg.seed, domain::EPOCH_SHUFFLE, epoch as u64));
        for batch in order.chunks(cfg.batch_size).take(n_batches) {
            let (loss, grad) = loss_and_gradients(&params, samples, batch).map_err(|e| match e {
                Error::NonFiniteLoss { .. } => Error::NonFiniteLoss {
                    batch: losses.len(),
                },
                other => other,
            })?;
            losses.push(loss);
            optimizer.step(&mut params, &grad);
        }
    }

    if !params.is_finite() {
        return Err(Error::NonFiniteLoss {
            batch: losses.len().saturating_sub(1),
        });
    }
    Ok(TrainOutcome { params, losses })
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"SVOMLP";
const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

/// Layout: magic `SVOMLP`, u16 version, u64 hidden, u64 dim, u64 activation
/// code, then W1 (row-major), b1, w2, b2 as f64. All little-endian.
pub fn write_checkpoint<W: Write>(params: &MlpParams, mut writer: W) -> std::io::Result<()> {
    writer.write_all(CHECKPOINT_MAGIC)?;
    writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    writer.write_all(&(params.hidden as u64).to_le_bytes())?;
    writer.write_all(&(params.dim as u64).to_le_bytes())?;
    writer.write_all(&params.activation.code().to_le_bytes())?;
    for x in params.iter() {
        writer.write_all(&x.to_le_bytes())?;
    }
    writer.flush()
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<MlpParams> {
    let corrupt = |msg: &str| Error::CorruptCheckpoint(msg.to_owned());
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != CHECKPOINT_VERSION {
        return Err(corrupt("unsupported version"));
    }
    let hidden = u64_at(8) as usize;
    let dim = u64_at(16) as usize;
    let activation = Activation::from_code(u64_at(24)).ok_or_else(|| corrupt("bad activation"))?;
    if hidden == 0 || dim == 0 {
        return Err(corrupt("zero shape"));
    }

    let mut params = MlpParams::zeros(hidden, dim, activation);
    let expected = HEADER_LEN + 8 * params.len();
    if bytes.len() != expected {
        return Err(corrupt("length does not match shape"));
    }
    for (i, p) in params.iter_mut().enumerate() {
        let off = HEADER_LEN + 8 * i;
        *p = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    }
    if !params.is_finite() {
        return Err(corrupt("non-finite parameter"));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    write_checkpoint(params, BufWriter::new(file))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    read_checkpoint(std::io::BufReader::new(file))
}

/// `batch_index,loss` CSV with a header row.
pub fn write_loss_curve<W: Write>(losses: &[f64], mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "batch_index,loss")?;
    for (i, loss) in losses.iter().enumerate() {
        writeln!(writer, "{i},{loss}")?;
    }
    writer.flush()
}
