//! Static word vectors in the plain text format (`token v1 v2 ... vd`).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Samples;
use crate::sampling::LabeledExample;
use crate::triple::Triple;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// A triple with any unknown slot has no embedding.
    #[default]
    Drop,
    /// Unknown slots use the mean of all loaded vectors.
    MeanVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    mean: Vec<f64>,
    oov_policy: OovPolicy,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub rows: usize,
    pub retained: usize,
    pub filtered: usize,
    pub bad_rows: usize,
    pub duplicates: usize,
    pub header_skipped: bool,
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

impl EmbeddingTable {
    /// Build a table directly from vectors. All vectors must share one length.
    pub fn from_vectors(vectors: HashMap<String, Vec<f64>>, oov_policy: OovPolicy) -> Result<Self> {
        let dim = vectors.values().next().map(Vec::len).ok_or(Error::EmptyTable)?;
        if dim == 0 {
            return Err(Error::EmptyTable);
        }
        if let Some(bad) = vectors.values().find(|v| v.len() != dim) {
            return Err(Error::InconsistentDim {
                line: 0,
                expected: dim,
                found: bad.len(),
            });
        }
        let mean = mean_of(&vectors, dim);
        Ok(EmbeddingTable {
            dim,
            vectors,
            mean,
            oov_policy,
        })
    }

    /// Read vectors, keeping only tokens in `vocab_filter` when given.
    ///
    /// A leading `count dim` line is skipped. Rows whose length disagrees with
    /// the first row, or that fail to parse, are skipped and counted unless
    /// `strict` is set. Later duplicates of a token are ignored.
    pub fn read<R: BufRead>(
        reader: R,
        vocab_filter: Option<&HashSet<String>>,
        oov_policy: OovPolicy,
        strict: bool,
    ) -> Result<(Self, LoadStats)> {
        let mut stats = LoadStats::default();
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        let mut dim: Option<usize> = None;
        let mut seen_first = false;

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches([' ', '\r']);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if !seen_first {
                seen_first = true;
                if is_header(&fields) {
                    stats.header_skipped = true;
                    continue;
                }
            }
            stats.rows += 1;

            let row_dim = fields.len() - 1;
            let expected = *dim.get_or_insert(row_dim);
            if row_dim != expected || row_dim == 0 {
                if strict {
                    return Err(Error::InconsistentDim {
                        line: idx + 1,
                        expected,
                        found: row_dim,
                    });
                }
                stats.bad_rows += 1;
                continue;
            }

            let token = fields[0];
            if vocab_filter.is_some_and(|vocab| !vocab.contains(token)) {
                stats.filtered += 1;
                continue;
            }
            if vectors.contains_key(token) {
                stats.duplicates += 1;
                continue;
            }

            let parsed: std::result::Result<Vec<f64>, _> =
                fields[1..].iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.iter().all(|x| x.is_finite()) => {
                    vectors.insert(token.to_owned(), v);
                    stats.retained += 1;
                }
                _ if strict => {
                    return Err(Error::MalformedRow {
                        line: idx + 1,
                        reason: "unparseable vector component".into(),
                    })
                }
                _ => stats.bad_rows += 1,
            }
        }

        if vectors.is_empty() {
            return Err(Error::EmptyTable);
        }
        let table = Self::from_vectors(vectors, oov_policy)?;
        Ok((table, stats))
    }

    pub fn load(
        path: impl AsRef<Path>,
        vocab_filter: Option<&HashSet<String>>,
        oov_policy: OovPolicy,
        strict: bool,
    ) -> Result<(Self, LoadStats)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Open {
            path: path.to_owned(),
            source,
        })?;
        Self::read(BufReader::new(file), vocab_filter, oov_policy, strict)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn with_oov_policy(mut self, policy: OovPolicy) -> Self {
        self.oov_policy = policy;
        self
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    fn slot(&self, token: &str) -> Option<&[f64]> {
        match (self.get(token), self.oov_policy) {
            (Some(v), _) => Some(v),
            (None, OovPolicy::MeanVector) => Some(&self.mean),
            (None, OovPolicy::Drop) => None,
        }
    }

    /// Append `[subject; verb; object]` to `out`. Returns false (leaving `out`
    /// untouched) when the triple is dropped.
    pub fn embed_into(&self, triple: &Triple, out: &mut Vec<f64>) -> bool {
        let slots = triple.slots().map(|s| self.slot(s));
        if slots.iter().any(Option::is_none) {
            return false;
        }
        for v in slots.into_iter().flatten() {
            out.extend_from_slice(v);
        }
        true
    }

    /// Concatenated `[subject; verb; object]`, length `3 * dim`.
    pub fn embed_triple(&self, triple: &Triple) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.dim);
        self.embed_into(triple, &mut out).then_some(out)
    }
}

fn mean_of(vectors: &HashMap<String, Vec<f64>>, dim: usize) -> Vec<f64> {
    // Sum in token order so the mean does not depend on hash iteration order.
    let mut keys: Vec<&String> = vectors.keys().collect();
    keys.sort_unstable();
    let mut mean = vec![0.0; dim];
    for key in &keys {
        for (m, x) in mean.iter_mut().zip(&vectors[*key]) {
            *m += x;
        }
    }
    let n = keys.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// All lemmas that occur in any slot of `examples`.
pub fn vocabulary<'a>(examples: impl IntoIterator<Item = &'a LabeledExample>) -> HashSet<String> {
    let mut vocab = HashSet::new();
    for ex in examples {
        for slot in ex.triple.slots() {
            if !vocab.contains(slot) {
                vocab.insert(slot.to_owned());
            }
        }
    }
    vocab
}

/// Feature matrix for `examples`, plus the indices of examples that were kept.
#[derive(Clone, Debug)]
pub struct Vectorized {
    pub samples: Samples,
    pub kept: Vec<usize>,
    pub dropped: usize,
}

pub fn vectorize(table: &EmbeddingTable, examples: &[LabeledExample]) -> Vectorized {
    let width = 3 * table.dim();
    let mut features = Vec::with_capacity(examples.len() * width);
    let mut labels = Vec::with_capacity(examples.len());
    let mut kept = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        if table.embed_into(&ex.triple, &mut features) {
            labels.push(ex.label.as_f64());
            kept.push(i);
        }
    }
    Vectorized {
        dropped: examples.len() - kept.len(),
        samples: Samples::new(features, labels, width),
        kept,
    }
}
