//! File-first run configuration. Command-line flags override the file, and
//! every run writes the resolved result next to its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embeddings::OovPolicy;
use crate::error::{Error, Result};
use crate::eval::{Grid, InitMode};
use crate::extract::ExtractionConfig;
use crate::mlp::TrainConfig;
use crate::sampling::{DatasetOptions, PositiveMode};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// Dependency parses to extract from.
    #[default]
    Conllu,
    /// Pre-extracted `subject\tverb\tobject\tcount` rows.
    Triples,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    #[default]
    Mlp,
    /// Answers from the gold labels; checks the harness plumbing.
    Oracle,
    /// Always predicts plausible.
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    #[default]
    Nn,
    Transformer,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Corpus shards for `extract`.
    pub corpus: Vec<PathBuf>,
    pub format: InputFormat,
    /// Minimum count for `triples` input rows.
    pub min_count: u64,
    /// Triple count file.
    pub store: Option<PathBuf>,
    /// Labeled training set.
    pub dataset: Option<PathBuf>,
    /// Labeled gold evaluation set.
    pub gold: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_positive: usize,
    pub positive_mode: PositiveMode,
    pub max_resample: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let opts = DatasetOptions::default();
        SamplerSection {
            n_positive: 1000,
            positive_mode: opts.positive_mode,
            max_resample: opts.max_resample,
        }
    }
}

impl SamplerSection {
    pub fn options(&self) -> DatasetOptions {
        DatasetOptions {
            positive_mode: self.positive_mode,
            max_resample: self.max_resample,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub repeats: usize,
    pub init: InitMode,
    pub trainer: TrainerKind,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            k: 10,
            repeats: 20,
            init: InitMode::Fixed,
            trainer: TrainerKind::Mlp,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub preset: GridPreset,
    /// Overrides the preset axes.
    pub axes: Option<Grid>,
    /// Seed for the validation/test split; the run seed when absent.
    pub split_seed: Option<u64>,
    /// Run only this cell.
    pub cell: Option<usize>,
}

impl GridSection {
    pub fn grid(&self) -> Grid {
        self.axes.clone().unwrap_or_else(|| match self.preset {
            GridPreset::Nn => Grid::nn(),
            GridPreset::Transformer => Grid::transformer(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Abort on malformed input instead of skipping it.
    pub strict: bool,
    pub oov_policy: OovPolicy,
    pub topk: usize,
    pub inputs: Inputs,
    pub extraction: ExtractionConfig,
    pub sampler: SamplerSection,
    pub model: TrainConfig,
    pub cv: CvSection,
    pub grid: GridSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            threads: 0,
            strict: false,
            oov_policy: OovPolicy::Drop,
            topk: 10,
            inputs: Inputs {
                min_count: 1,
                ..Default::default()
            },
            extraction: ExtractionConfig::default(),
            sampler: SamplerSection::default(),
            model: TrainConfig::default(),
            cv: CvSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Open {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Propagate the run seed into the model config.
    pub fn resolve(mut self) -> Self {
        self.model.seed = self.seed;
        self
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing input path `{name}`")))
    }
}
