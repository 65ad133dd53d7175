//! Command-line driver.
//!
//! Each subcommand reads a [`RunConfig`] (file plus flag overrides), writes its
//! outputs and the resolved config into the output directory, and reports
//! diagnostics on stderr only.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::classifier::{self, MlpTrainer};
use crate::config::{GridPreset, InputFormat, RunConfig, TrainerKind};
use crate::conllu::ErrorPolicy;
use crate::embeddings::{vocabulary, vectorize, EmbeddingTable};
use crate::eval::{
    grid_search, kfold_cv, run_cell, split_valid_test, write_grid_csv, ConstantTrainer,
    CvOptions, OracleTrainer, ReportFile, Trainer,
};
use crate::extract::{extract_files, ExtractStats};
use crate::mlp::{save_checkpoint, train, write_loss_curve, load_checkpoint};
use crate::sampling::{build_selfsupervised_dataset, load_labeled, save_labeled, Label, LabeledExample};
use crate::store::{ingest_external_triples, IngestStats, TripleStore};

#[derive(Debug, Parser)]
#[command(name = "plausible", version, about = "Learn s-v-o plausibility from parsed text")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Abort on malformed input instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a triple count file from CoNLL-U (or pre-extracted triple) files.
    Extract(ExtractArgs),
    /// Build a balanced self-supervised dataset from a triple count file.
    BuildDataset(BuildDatasetArgs),
    /// Train the classifier on a labeled dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled set.
    Eval(EvalArgs),
    /// Repeated k-fold cross-validation on a gold set.
    Cv(CvArgs),
    /// Grid search on a validation split, reporting test accuracy.
    Grid(GridArgs),
    /// Print the most frequent triples.
    Topk(TopkArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub include_passive: bool,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub n_positive: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub trainer: Option<TrainerKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Self-supervised training set.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Gold set split into validation and test halves.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<GridPreset>,
    /// Run a single cell.
    #[arg(long)]
    pub cell: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TopkArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

impl Cli {
    /// Load the config file (if any) and apply flag overrides.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out, self.out.clone());
        set(&mut cfg.threads, self.threads);
        cfg.strict |= self.strict;

        let inputs = &mut cfg.inputs;
        match &self.command {
            Command::Extract(a) => {
                if !a.inputs.is_empty() {
                    inputs.corpus.clone_from(&a.inputs);
                }
                set(&mut inputs.format, a.format);
                set(&mut inputs.min_count, a.min_count);
                cfg.extraction.include_passive |= a.include_passive;
            }
            Command::BuildDataset(a) => {
                set_path(&mut inputs.store, &a.store);
                set(&mut cfg.sampler.n_positive, a.n_positive);
            }
            Command::Train(a) => {
                set_path(&mut inputs.dataset, &a.dataset);
                set_path(&mut inputs.vectors, &a.vectors);
            }
            Command::Eval(a) => {
                set_path(&mut inputs.model, &a.model);
                set_path(&mut inputs.vectors, &a.vectors);
                set_path(&mut inputs.gold, &a.gold);
            }
            Command::Cv(a) => {
                set_path(&mut inputs.gold, &a.gold);
                set_path(&mut inputs.vectors, &a.vectors);
                set(&mut cfg.cv.trainer, a.trainer);
                set(&mut cfg.cv.k, a.k);
                set(&mut cfg.cv.repeats, a.repeats);
            }
            Command::Grid(a) => {
                set_path(&mut inputs.dataset, &a.dataset);
                set_path(&mut inputs.gold, &a.gold);
                set_path(&mut inputs.vectors, &a.vectors);
                if let Some(preset) = a.preset {
                    cfg.grid.preset = preset;
                    cfg.grid.axes = None;
                }
                if a.cell.is_some() {
                    cfg.grid.cell = a.cell;
                }
            }
            Command::Topk(a) => {
                set_path(&mut inputs.store, &a.store);
                set(&mut cfg.topk, a.k);
            }
        }
        Ok(cfg.resolve())
    }
}

/// Run a parsed command line. `stdout` receives data output (only `topk`
/// writes any).
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = cli.resolve_config()?;
    if cfg.threads > 0 {
        // A second initialization in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }

    if let Command::Topk(_) = cli.command {
        return cmd_topk(&cfg, stdout);
    }

    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create output directory {}", cfg.out.display()))?;
    match cli.command {
        Command::Extract(_) => cmd_extract(&cfg)?,
        Command::BuildDataset(_) => cmd_build_dataset(&cfg)?,
        Command::Train(_) => cmd_train(&cfg)?,
        Command::Eval(_) => cmd_eval(&cfg)?,
        Command::Cv(_) => cmd_cv(&cfg)?,
        Command::Grid(_) => cmd_grid(&cfg)?,
        Command::Topk(_) => unreachable!(),
    }
    fs::write(cfg.out.join("run_config.toml"), cfg.to_toml())?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn policy(cfg: &RunConfig) -> ErrorPolicy {
    if cfg.strict {
        ErrorPolicy::Strict
    } else {
        ErrorPolicy::Lenient
    }
}

fn load_vectors(cfg: &RunConfig, vocab: &HashSet<String>) -> Result<EmbeddingTable> {
    let path = cfg.require(&cfg.inputs.vectors, "vectors")?;
    let (table, stats) = EmbeddingTable::load(path, Some(vocab), cfg.oov_policy, cfg.strict)
        .with_context(|| format!("loading vectors from {}", path.display()))?;
    log::info!(
        "loaded {} of {} needed vectors (dim {}), {} bad rows",
        stats.retained,
        vocab.len(),
        table.dim(),
        stats.bad_rows
    );
    Ok(table)
}

fn load_examples(path: &Path) -> Result<Vec<LabeledExample>> {
    load_labeled(path).with_context(|| format!("reading labeled file {}", path.display()))
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<()> {
    let inputs = &cfg.inputs.corpus;
    if inputs.is_empty() {
        bail!("extract needs at least one input file");
    }
    cfg.extraction.validate()?;

    let mut stats = ReportFile::new();
    let store = match cfg.inputs.format {
        InputFormat::Conllu => {
            let (store, ExtractStats { sentences, skipped_sentences, triples_emitted }) =
                extract_files(inputs, &cfg.extraction, policy(cfg))?;
            stats
                .push("sentences", sentences)
                .push("skipped_sentences", skipped_sentences)
                .push("triples_emitted", triples_emitted);
            store
        }
        InputFormat::Triples => {
            let mut store = TripleStore::new();
            let mut total = IngestStats::default();
            for path in inputs {
                let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                let (shard, s) = ingest_external_triples(BufReader::new(file), cfg.inputs.min_count)?;
                if cfg.strict && s.malformed > 0 {
                    bail!("{} malformed rows in {}", s.malformed, path.display());
                }
                store.absorb(&shard);
                total.rows += s.rows;
                total.accepted += s.accepted;
                total.malformed += s.malformed;
                total.non_alphabetic += s.non_alphabetic;
                total.below_min_count += s.below_min_count;
            }
            stats
                .push("rows", total.rows)
                .push("accepted_rows", total.accepted)
                .push("malformed_rows", total.malformed)
                .push("non_alphabetic_rows", total.non_alphabetic)
                .push("below_min_count_rows", total.below_min_count);
            store
        }
    };
    stats
        .push("unique_triples", store.len())
        .push("cumulative_occurrences", store.total());

    store.save(cfg.out.join("triples.tsv"))?;
    stats.write_to(create(&cfg.out.join("extract_stats.txt"))?)?;
    log::info!("extracted {} unique triples", store.len());
    Ok(())
}

pub fn cmd_build_dataset(cfg: &RunConfig) -> Result<()> {
    let path = cfg.require(&cfg.inputs.store, "store")?;
    let store = TripleStore::load(path).with_context(|| format!("reading store {}", path.display()))?;
    let examples = build_selfsupervised_dataset(
        &store,
        cfg.sampler.n_positive,
        cfg.seed,
        &cfg.sampler.options(),
    )?;
    let collisions = examples.iter().filter(|e| e.collision).count();
    if collisions > 0 {
        log::warn!("{collisions} sampled negatives coincide with attested triples");
    }

    save_labeled(&examples, cfg.out.join("dataset.tsv"))?;
    let mut stats = ReportFile::new();
    stats
        .push("positives", cfg.sampler.n_positive)
        .push("negatives", cfg.sampler.n_positive)
        .push("flagged_collisions", collisions)
        .push("store_unique_triples", store.len());
    stats.write_to(create(&cfg.out.join("dataset_stats.txt"))?)?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let examples = load_examples(cfg.require(&cfg.inputs.dataset, "dataset")?)?;
    let table = load_vectors(cfg, &vocabulary(&examples))?;
    let data = vectorize(&table, &examples);
    if data.samples.is_empty() {
        bail!("no training example is covered by the vectors");
    }
    let outcome = train(&data.samples, &cfg.model)?;

    save_checkpoint(&outcome.params, cfg.out.join("model.bin"))?;
    write_loss_curve(&outcome.losses, create(&cfg.out.join("loss.csv"))?)?;
    let (train_report, _) = classifier::evaluate(&outcome.params, &table, &examples)?;
    let mut stats = ReportFile::new();
    stats
        .push("examples", examples.len())
        .push("oov_dropped", data.dropped)
        .push("batches", outcome.losses.len())
        .push("final_loss", outcome.losses.last().copied().unwrap_or(f64::NAN))
        .push_report("train.", &train_report);
    stats.write_to(create(&cfg.out.join("train_stats.txt"))?)?;
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let params = load_checkpoint(cfg.require(&cfg.inputs.model, "model")?)?;
    let gold = load_examples(cfg.require(&cfg.inputs.gold, "gold")?)?;
    let table = load_vectors(cfg, &vocabulary(&gold))?;
    if table.dim() != params.dim() {
        bail!(
            "model expects {}-dimensional vectors, file has {}",
            params.dim(),
            table.dim()
        );
    }
    let (rep, dropped) = classifier::evaluate(&params, &table, &gold)?;
    let mut out = ReportFile::new();
    out.push("seed", cfg.seed)
        .push("examples", gold.len())
        .push("oov_dropped", dropped)
        .push_report("", &rep);
    out.write_to(create(&cfg.out.join("report.txt"))?)?;
    Ok(())
}

pub fn cmd_cv(cfg: &RunConfig) -> Result<()> {
    let gold = load_examples(cfg.require(&cfg.inputs.gold, "gold")?)?;
    let trainer: Box<dyn Trainer> = match cfg.cv.trainer {
        TrainerKind::Oracle => Box::new(OracleTrainer::new(&gold)),
        TrainerKind::Constant => Box::new(ConstantTrainer(Label::Plausible)),
        TrainerKind::Mlp => Box::new(MlpTrainer {
            table: Arc::new(load_vectors(cfg, &vocabulary(&gold))?),
            config: cfg.model.clone(),
        }),
    };
    let opts = CvOptions {
        k: cfg.cv.k,
        repeats: cfg.cv.repeats,
        seed: cfg.seed,
        init: cfg.cv.init,
    };
    let result = kfold_cv(&gold, trainer.as_ref(), &opts)?;

    let mut out = ReportFile::new();
    out.push("seed", cfg.seed)
        .push("k", opts.k)
        .push("repeats", opts.repeats)
        .push("examples", gold.len())
        .push("mean_accuracy", result.mean_accuracy)
        .push("mean_fold_accuracy", result.mean_fold_accuracy)
        .push("unscored", result.unscored);
    for (r, acc) in result.repeat_accuracies.iter().enumerate() {
        out.push(format!("repeat.{r}.accuracy"), acc);
    }
    out.push_report("pooled.", &result.pooled);
    out.write_to(create(&cfg.out.join("cv_report.txt"))?)?;
    Ok(())
}

pub fn cmd_grid(cfg: &RunConfig) -> Result<()> {
    let train_set = load_examples(cfg.require(&cfg.inputs.dataset, "dataset")?)?;
    let gold = load_examples(cfg.require(&cfg.inputs.gold, "gold")?)?;
    let (valid, test) = split_valid_test(&gold, cfg.grid.split_seed.unwrap_or(cfg.seed))?;

    let mut vocab = vocabulary(&train_set);
    vocab.extend(vocabulary(&gold));
    let table = load_vectors(cfg, &vocab)?;
    let data = vectorize(&table, &train_set);
    if data.samples.is_empty() {
        bail!("no training example is covered by the vectors");
    }

    let grid = cfg.grid.grid();
    let evaluate = |c: &crate::mlp::TrainConfig| {
        let outcome = train(&data.samples, c)?;
        classifier::accuracy(&outcome.params, &table, &valid)
    };

    if let Some(index) = cfg.grid.cell {
        let row = run_cell(&grid, &cfg.model, index, evaluate)?;
        write_grid_csv(
            std::slice::from_ref(&row),
            create(&cfg.out.join(format!("grid_cell_{index}.csv")))?,
        )?;
        return Ok(());
    }

    let result = grid_search(&grid, &cfg.model, evaluate)?;
    write_grid_csv(&result.rows, create(&cfg.out.join("grid.csv"))?)?;

    let mut out = ReportFile::new();
    out.push("seed", cfg.seed)
        .push("cells", result.rows.len())
        .push("failed_cells", result.rows.iter().filter(|r| r.outcome.is_err()).count())
        .push("train_examples", train_set.len())
        .push("train_oov_dropped", data.dropped)
        .push("valid_examples", valid.len())
        .push("test_examples", test.len());
    if let Some(best) = result.best_row() {
        let best_cfg = grid.config_for(&cfg.model, &best.cell);
        let outcome = train(&data.samples, &best_cfg)?;
        let (valid_rep, _) = classifier::evaluate(&outcome.params, &table, &valid)?;
        let (test_rep, test_dropped) = classifier::evaluate(&outcome.params, &table, &test)?;
        out.push("best_cell", best.cell.index)
            .push("best_lr", best.cell.learning_rate)
            .push("best_batch", best.cell.batch_size)
            .push("best_epochs", best.cell.epochs)
            .push("test_oov_dropped", test_dropped)
            .push_report("valid.", &valid_rep)
            .push_report("test.", &test_rep);
        save_checkpoint(&outcome.params, cfg.out.join("model.bin"))?;
    } else {
        log::warn!("every grid cell failed");
    }
    out.write_to(create(&cfg.out.join("grid_report.txt"))?)?;
    Ok(())
}

pub fn cmd_topk(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let path = cfg.require(&cfg.inputs.store, "store")?;
    let store = TripleStore::load(path).with_context(|| format!("reading store {}", path.display()))?;
    for (triple, count) in store.top_k(cfg.topk) {
        writeln!(stdout, "{triple}\t{count}")?;
    }
    stdout.flush()?;
    Ok(())
}

