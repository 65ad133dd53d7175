//! Subject-verb-object extraction from dependency trees.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::ops::AddAssign;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{ConlluReader, DepTree, ErrorPolicy, Token};
use crate::error::{Error, Result};
use crate::store::TripleStore;
use crate::triple::{normalize_lemma, Triple};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// UPOS tags accepted for subjects and objects.
    pub allowed_arg_upos: BTreeSet<String>,
    /// Only tokens tagged VERB head a triple.
    pub require_verb_upos: bool,
    /// Treat `nsubj:pass` dependents as subjects.
    pub include_passive: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            allowed_arg_upos: ["NOUN", "PROPN"].iter().map(|s| s.to_string()).collect(),
            require_verb_upos: true,
            include_passive: false,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.allowed_arg_upos.is_empty() {
            return Err(Error::Config("allowed_arg_upos must not be empty".into()));
        }
        Ok(())
    }

    fn is_subject(&self, token: &Token) -> bool {
        token.deprel == "nsubj" || (self.include_passive && token.deprel == "nsubj:pass")
    }
}

fn argument_lemma(cfg: &ExtractionConfig, token: &Token) -> Option<String> {
    if cfg.allowed_arg_upos.contains(&token.upos) {
        normalize_lemma(&token.lemma)
    } else {
        None
    }
}

/// All (nsubj, obj) pairs under each verb, in verb order then argument order.
pub fn extract_triples(tree: &DepTree, cfg: &ExtractionConfig) -> Vec<Triple> {
    let mut triples = Vec::new();
    for verb in &tree.tokens {
        if cfg.require_verb_upos && verb.upos != "VERB" {
            continue;
        }
        let Some(verb_lemma) = normalize_lemma(&verb.lemma) else {
            continue;
        };

        let mut subjects = Vec::new();
        let mut objects = Vec::new();
        for dep in tree.dependents(verb.id) {
            if cfg.is_subject(dep) {
                subjects.extend(argument_lemma(cfg, dep));
            } else if dep.deprel == "obj" {
                objects.extend(argument_lemma(cfg, dep));
            }
        }

        for subject in &subjects {
            for object in &objects {
                triples.push(Triple {
                    subject: subject.clone(),
                    verb: verb_lemma.clone(),
                    object: object.clone(),
                });
            }
        }
    }
    triples
}

/// Corpus-level tallies. Additive across shards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub sentences: u64,
    pub skipped_sentences: u64,
    pub triples_emitted: u64,
}

impl AddAssign for ExtractStats {
    fn add_assign(&mut self, rhs: Self) {
        self.sentences += rhs.sentences;
        self.skipped_sentences += rhs.skipped_sentences;
        self.triples_emitted += rhs.triples_emitted;
    }
}

/// Stream trees through [`extract_triples`] and accumulate counts.
pub fn extract_corpus<I>(trees: I, cfg: &ExtractionConfig) -> Result<(TripleStore, ExtractStats)>
where
    I: IntoIterator<Item = Result<DepTree>>,
{
    cfg.validate()?;
    let mut store = TripleStore::new();
    let mut stats = ExtractStats::default();
    for tree in trees {
        let tree = tree?;
        stats.sentences += 1;
        for triple in extract_triples(&tree, cfg) {
            stats.triples_emitted += 1;
            store.add(triple, 1);
        }
    }
    Ok((store, stats))
}

/// Extract from one CoNLL-U file.
pub fn extract_file(
    path: &Path,
    cfg: &ExtractionConfig,
    policy: ErrorPolicy,
) -> Result<(TripleStore, ExtractStats)> {
    let file = File::open(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = ConlluReader::with_policy(BufReader::new(file), policy);
    let (store, mut stats) = extract_corpus(&mut reader, cfg)?;
    stats.skipped_sentences = reader.skipped() as u64;
    Ok((store, stats))
}

/// Extract from several shards in parallel and merge.
pub fn extract_files(
    paths: &[PathBuf],
    cfg: &ExtractionConfig,
    policy: ErrorPolicy,
) -> Result<(TripleStore, ExtractStats)> {
    let shards: Vec<_> = paths
        .par_iter()
        .map(|p| extract_file(p, cfg, policy))
        .collect::<Result<_>>()?;
    let mut store = TripleStore::new();
    let mut stats = ExtractStats::default();
    for (shard, shard_stats) in shards {
        store = TripleStore::merge(&store, &shard);
        stats += shard_stats;
    }
    Ok((store, stats))
}
