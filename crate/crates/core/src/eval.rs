//! Evaluation protocols: repeated k-fold cross-validation, the equal-halves
//! validation/test split, grid search, and accuracy reporting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::TrainConfig;
use crate::rng::{derive_seed, domain, substream};
use crate::sampling::{Label, LabeledExample};
use crate::triple::Triple;

/// Per-repeat assignment of example indices to folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the fold holding out example `i` in repeat `r`.
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Shuffle by (seed, repeat) and deal the permutation round-robin into `k`
    /// folds, so fold sizes differ by at most one.
    pub fn new(n: usize, k: usize, repeats: usize, seed: u64) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::InsufficientData { have: n, k });
        }
        let assignments = (0..repeats)
            .map(|r| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut substream(seed, domain::FOLDS, r as u64));
                let mut fold_of = vec![0; n];
                for (pos, &idx) in perm.iter().enumerate() {
                    fold_of[idx] = pos % k;
                }
                fold_of
            })
            .collect();
        Ok(FoldPlan {
            k,
            repeats,
            seed,
            assignments,
        })
    }

    pub fn fold_sizes(&self, repeat: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments[repeat] {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn held_out(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.indices(repeat, |f| f == fold)
    }

    pub fn training(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.indices(repeat, |f| f != fold)
    }

    fn indices(&self, repeat: usize, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter(|(_, &f)| keep(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// A trained classifier. `None` means the example cannot be scored
/// (for instance an out-of-vocabulary word under the drop policy).
pub trait Predictor: Send + Sync {
    fn predict(&self, triple: &Triple) -> Option<Label>;

    fn predict_all(&self, triples: &[&Triple]) -> Vec<Option<Label>> {
        triples.iter().map(|t| self.predict(t)).collect()
    }
}

/// Fits a [`Predictor`] on labeled examples.
pub trait Trainer: Sync {
    fn fit(&self, train: &[LabeledExample], seed: u64) -> Result<Box<dyn Predictor>>;
}

/// Debug trainer that answers from the full gold labeling, ignoring its
/// training data.
pub struct OracleTrainer {
    labels: HashMap<Triple, Label>,
}

impl OracleTrainer {
    pub fn new(gold: &[LabeledExample]) -> Self {
        OracleTrainer {
            labels: gold.iter().map(|e| (e.triple.clone(), e.label)).collect(),
        }
    }
}

struct LookupPredictor(HashMap<Triple, Label>);

impl Predictor for LookupPredictor {
    fn predict(&self, triple: &Triple) -> Option<Label> {
        self.0.get(triple).copied()
    }
}

impl Trainer for OracleTrainer {
    fn fit(&self, _train: &[LabeledExample], _seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(LookupPredictor(self.labels.clone())))
    }
}

/// Always predicts one label.
pub struct ConstantTrainer(pub Label);

struct ConstantPredictor(Label);

impl Predictor for ConstantPredictor {
    fn predict(&self, _triple: &Triple) -> Option<Label> {
        Some(self.0)
    }
}

impl Trainer for ConstantTrainer {
    fn fit(&self, _train: &[LabeledExample], _seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(ConstantPredictor(self.0)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Every fold of every repeat trains from the same seed.
    #[default]
    Fixed,
    /// Each repeat derives its own training seed.
    PerRepeat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub init: InitMode,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            repeats: 20,
            seed: 0,
            init: InitMode::Fixed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    /// Mean over repeats of pooled repeat accuracy.
    pub mean_accuracy: f64,
    pub repeat_accuracies: Vec<f64>,
    /// Mean over all folds of per-fold accuracy, for comparison with pooling.
    pub mean_fold_accuracy: f64,
    /// Confusion counts summed over every repeat.
    pub pooled: EvalReport,
    /// Held-out examples the predictor declined to score, over all repeats.
    pub unscored: usize,
}

/// Repeated k-fold cross-validation. Each repeat's accuracy pools the
/// predictions of all its folds; unscored examples are excluded.
pub fn kfold_cv(gold: &[LabeledExample], trainer: &dyn Trainer, opts: &CvOptions) -> Result<CvResult> {
    let plan = FoldPlan::new(gold.len(), opts.k, opts.repeats, opts.seed)?;
    if opts.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }

    let cells: Vec<(usize, usize)> = (0..opts.repeats)
        .flat_map(|r| (0..opts.k).map(move |f| (r, f)))
        .collect();

    let outcomes: Vec<Vec<(Label, Label)>> = cells
        .par_iter()
        .map(|&(r, f)| {
            let train: Vec<LabeledExample> =
                plan.training(r, f).into_iter().map(|i| gold[i].clone()).collect();
            let seed = match opts.init {
                InitMode::Fixed => opts.seed,
                InitMode::PerRepeat => derive_seed(opts.seed, r as u64),
            };
            let predictor = trainer.fit(&train, seed)?;
            let held = plan.held_out(r, f);
            let triples: Vec<&Triple> = held.iter().map(|&i| &gold[i].triple).collect();
            let preds = predictor.predict_all(&triples);
            Ok(held
                .iter()
                .zip(preds)
                .filter_map(|(&i, p)| p.map(|p| (p, gold[i].label)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut repeat_accuracies = Vec::with_capacity(opts.repeats);
    let mut fold_accuracies = Vec::with_capacity(cells.len());
    let mut all_preds = Vec::new();
    let mut all_labels = Vec::new();
    for r in 0..opts.repeats {
        let (mut correct, mut scored) = (0usize, 0usize);
        for f in 0..opts.k {
            let pairs = &outcomes[r * opts.k + f];
            let c = pairs.iter().filter(|(p, y)| p == y).count();
            correct += c;
            scored += pairs.len();
            if !pairs.is_empty() {
                fold_accuracies.push(c as f64 / pairs.len() as f64);
            }
            for &(p, y) in pairs {
                all_preds.push(p);
                all_labels.push(y);
            }
        }
        if scored == 0 {
            return Err(Error::InvalidArgument(format!(
                "no held-out example was scored in repeat {r}"
            )));
        }
        repeat_accuracies.push(correct as f64 / scored as f64);
    }

    let pooled = report(&all_preds, &all_labels)?;
    Ok(CvResult {
        mean_accuracy: mean(&repeat_accuracies),
        mean_fold_accuracy: mean(&fold_accuracies),
        unscored: gold.len() * opts.repeats - all_preds.len(),
        repeat_accuracies,
        pooled,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Shuffle by `seed`; the first half validates, the second half tests.
pub fn split_valid_test(
    gold: &[LabeledExample],
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    if !gold.len().is_multiple_of(2) {
        return Err(Error::OddSize(gold.len()));
    }
    let mut order: Vec<usize> = (0..gold.len()).collect();
    order.shuffle(&mut substream(seed, domain::SPLIT, 0));
    let half = gold.len() / 2;
    let pick = |idx: &[usize]| idx.iter().map(|&i| gold[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..half]), pick(&order[half..])))
}

/// Hyperparameter axes searched exhaustively, learning rate outermost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: f64,
}

impl Grid {
    /// Axes used for the self-supervised two-layer network.
    pub fn nn() -> Self {
        Grid {
            learning_rates: vec![1e-3, 1e-4, 1e-5, 2e-5],
            batch_sizes: vec![16, 32, 64, 128],
            epochs: vec![0.5, 1.0, 2.0],
        }
    }

    /// Axes used for transformer fine-tuning.
    pub fn transformer() -> Self {
        Grid {
            learning_rates: vec![1e-5, 2e-5, 3e-5],
            batch_sizes: vec![8, 16],
            epochs: vec![0.5, 1.0, 2.0],
        }
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.batch_sizes.len() * self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::with_capacity(self.len());
        for &learning_rate in &self.learning_rates {
            for &batch_size in &self.batch_sizes {
                for &epochs in &self.epochs {
                    cells.push(GridCell {
                        index: cells.len(),
                        learning_rate,
                        batch_size,
                        epochs,
                    });
                }
            }
        }
        cells
    }

    /// `base` with the cell's axes and a seed derived from (base seed, index).
    pub fn config_for(&self, base: &TrainConfig, cell: &GridCell) -> TrainConfig {
        TrainConfig {
            learning_rate: cell.learning_rate,
            batch_size: cell.batch_size,
            epochs: cell.epochs,
            seed: derive_seed(base.seed, cell.index as u64),
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub cell: GridCell,
    /// Validation accuracy, or the trainer's error message.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index of the best successful cell; earlier cells win ties.
    pub best: Option<usize>,
}

impl GridResult {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// Run one cell in isolation.
pub fn run_cell<F>(grid: &Grid, base: &TrainConfig, index: usize, evaluate: F) -> Result<GridRow>
where
    F: Fn(&TrainConfig) -> Result<f64>,
{
    let cell = *grid
        .cells()
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("grid has no cell {index}")))?;
    let outcome = evaluate(&grid.config_for(base, &cell)).map_err(|e| e.to_string());
    Ok(GridRow { cell, outcome })
}

/// Exhaustive search. `evaluate` trains with the given config and returns
/// validation accuracy; its errors are recorded per cell.
pub fn grid_search<F>(grid: &Grid, base: &TrainConfig, evaluate: F) -> Result<GridResult>
where
    F: Fn(&TrainConfig) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid has an empty axis".into()));
    }
    let rows: Vec<GridRow> = grid
        .cells()
        .into_par_iter()
        .map(|cell| GridRow {
            cell,
            outcome: evaluate(&grid.config_for(base, &cell)).map_err(|e| e.to_string()),
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Ok(acc) = row.outcome {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((i, acc));
            }
        }
    }
    Ok(GridResult {
        rows,
        best: best.map(|(i, _)| i),
    })
}

pub const GRID_CSV_HEADER: &str = "cell_index,lr,batch,epochs,valid_accuracy";

pub fn grid_csv_row(row: &GridRow) -> String {
    let acc = match &row.outcome {
        Ok(a) => a.to_string(),
        Err(_) => "error".to_owned(),
    };
    format!(
        "{},{},{},{},{}",
        row.cell.index, row.cell.learning_rate, row.cell.batch_size, row.cell.epochs, acc
    )
}

pub fn write_grid_csv<W: Write>(rows: &[GridRow], mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "{GRID_CSV_HEADER}")?;
    for row in rows {
        writeln!(writer, "{}", grid_csv_row(row))?;
    }
    writer.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// `FP / (FP + FN)`; `None` without errors.
    pub fp_share_of_errors: Option<f64>,
    pub per_example_scores: Option<Vec<f64>>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn errors(&self) -> usize {
        self.fp + self.fn_
    }
}

/// Confusion counts with plausible as the positive class.
pub fn report(predictions: &[Label], labels: &[Label]) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("nothing to report".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, y) in predictions.iter().zip(labels) {
        match (p, y) {
            (Label::Plausible, Label::Plausible) => tp += 1,
            (Label::Plausible, Label::Implausible) => fp += 1,
            (Label::Implausible, Label::Implausible) => tn += 1,
            (Label::Implausible, Label::Plausible) => fn_ += 1,
        }
    }
    let errors = fp + fn_;
    Ok(EvalReport {
        accuracy: (tp + tn) as f64 / predictions.len() as f64,
        tp,
        fp,
        tn,
        fn_,
        fp_share_of_errors: (errors > 0).then(|| fp as f64 / errors as f64),
        per_example_scores: None,
    })
}

/// `key=value` lines. Keys appear in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportFile {
    pub entries: Vec<(String, String)>,
}

impl ReportFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Append the report's metrics under `prefix` (empty for none).
    pub fn push_report(&mut self, prefix: &str, report: &EvalReport) -> &mut Self {
        let key = |k: &str| format!("{prefix}{k}");
        self.push(key("n"), report.total())
            .push(key("accuracy"), report.accuracy)
            .push(key("tp"), report.tp)
            .push(key("fp"), report.fp)
            .push(key("tn"), report.tn)
            .push(key("fn"), report.fn_);
        let share = report
            .fp_share_of_errors
            .map_or_else(|| "NA".to_owned(), |s| s.to_string());
        self.push(key("fp_share"), share)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Rebuild the metrics written by [`ReportFile::push_report`].
    pub fn report(&self, prefix: &str) -> Result<EvalReport> {
        let field = |k: &str| {
            let key = format!("{prefix}{k}");
            self.get(&key)
                .ok_or_else(|| Error::InvalidArgument(format!("report lacks {key}")))
        };
        let count = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad count for {prefix}{k}")))
        };
        let accuracy = field("accuracy")?
            .parse()
            .map_err(|_| Error::InvalidArgument("bad accuracy".into()))?;
        let fp_share_of_errors = match field("fp_share")? {
            "NA" => None,
            s => Some(
                s.parse()
                    .map_err(|_| Error::InvalidArgument("bad fp_share".into()))?,
            ),
        };
        Ok(EvalReport {
            accuracy,
            tp: count("tp")?,
            fp: count("fp")?,
            tn: count("tn")?,
            fn_: count("fn")?,
            fp_share_of_errors,
            per_example_scores: None,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writer.write_all(self.render().as_bytes())?;
        writer.flush()
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut file = ReportFile::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedRow {
                line: idx + 1,
                reason: "expected key=value".into(),
            })?;
            file.push(k, v);
        }
        Ok(file)
    }
}
