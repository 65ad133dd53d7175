//! Glue between the embedding table, the MLP and the evaluation harness.

use std::sync::Arc;

use crate::embeddings::{vectorize, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{report, EvalReport, Predictor, Trainer};
use crate::mlp::{train, MlpParams, TrainConfig, TrainOutcome};
use crate::sampling::{Label, LabeledExample};
use crate::triple::Triple;

pub struct MlpPredictor {
    pub params: MlpParams,
    pub table: Arc<EmbeddingTable>,
}

impl Predictor for MlpPredictor {
    fn predict(&self, triple: &Triple) -> Option<Label> {
        self.params.predict(&self.table, triple).map(|(label, _)| label)
    }
}

/// Trains the MLP on embedded examples; the seed overrides `config.seed`.
pub struct MlpTrainer {
    pub table: Arc<EmbeddingTable>,
    pub config: TrainConfig,
}

impl MlpTrainer {
    pub fn fit_params(&self, train_set: &[LabeledExample], seed: u64) -> Result<TrainOutcome> {
        let data = vectorize(&self.table, train_set);
        if data.samples.is_empty() {
            return Err(Error::InvalidArgument(
                "no training example has embeddings for all three words".into(),
            ));
        }
        let cfg = TrainConfig {
            seed,
            ..self.config.clone()
        };
        train(&data.samples, &cfg)
    }
}

impl Trainer for MlpTrainer {
    fn fit(&self, train_set: &[LabeledExample], seed: u64) -> Result<Box<dyn Predictor>> {
        let outcome = self.fit_params(train_set, seed)?;
        Ok(Box::new(MlpPredictor {
            params: outcome.params,
            table: Arc::clone(&self.table),
        }))
    }
}

/// Score `examples`, skipping those the table cannot embed. Returns the
/// report (with per-example probabilities) and the number skipped.
pub fn evaluate(
    params: &MlpParams,
    table: &EmbeddingTable,
    examples: &[LabeledExample],
) -> Result<(EvalReport, usize)> {
    let data = vectorize(table, examples);
    let probs = params.forward_all(&data.samples);
    let preds: Vec<Label> = probs.iter().map(|&p| Label::from_bool(p >= 0.5)).collect();
    let labels: Vec<Label> = data.kept.iter().map(|&i| examples[i].label).collect();
    let mut rep = report(&preds, &labels)?;
    rep.per_example_scores = Some(probs);
    Ok((rep, data.dropped))
}

/// Accuracy over the scorable subset of `examples`.
pub fn accuracy(params: &MlpParams, table: &EmbeddingTable, examples: &[LabeledExample]) -> Result<f64> {
    evaluate(params, table, examples).map(|(r, _)| r.accuracy)
}
