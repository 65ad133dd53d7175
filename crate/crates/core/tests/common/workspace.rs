//! End-to-end command runs over inputs generated from a small world.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use plausible::cli::{run, Cli};
use plausible::sampling::{save_labeled, Label, LabeledExample};
use plausible::Triple;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{World, WorldSpec};

/// Run a command line in-process and return what it wrote to stdout.
pub fn cli(args: &[&str]) -> anyhow::Result<String> {
    let mut argv = vec!["plausible"];
    argv.extend_from_slice(args);
    let parsed = Cli::try_parse_from(argv)?;
    let mut stdout = Vec::new();
    run(&parsed, &mut stdout)?;
    Ok(String::from_utf8(stdout)?)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

/// Inputs for the training commands, generated from a small world.
pub struct Workspace {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub dataset: PathBuf,
    pub gold: PathBuf,
    pub vectors: PathBuf,
    pub config: PathBuf,
}

pub fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_owned();
    let world = World::new(&WorldSpec { dim: 4, verbs: 12, nouns_per_class: 6, classes: 4, ..Default::default() });

    let corpus = root.join("corpus.conllu");
    fs::write(&corpus, world.corpus(5, 0, 800)).unwrap();
    let vectors = root.join("vectors.txt");
    fs::write(&vectors, world.vectors_text()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut gold: Vec<LabeledExample> = Vec::new();
    while gold.len() < 120 {
        let t = if gold.len().is_multiple_of(2) {
            let (si, vi, oi) = world.plausible_triple(&mut rng);
            Triple::new(&world.nouns[si], &world.verbs[vi], &world.nouns[oi]).unwrap()
        } else {
            let (si, vi, _) = world.plausible_triple(&mut rng);
            let (_, _, oi) = world.plausible_triple(&mut rng);
            Triple::new(&world.nouns[si], &world.verbs[vi], &world.nouns[oi]).unwrap()
        };
        if gold.iter().any(|g| g.triple == t) {
            continue;
        }
        let label = Label::from_bool(world.is_plausible(&t));
        gold.push(LabeledExample::gold(t, label));
    }
    let gold_path = root.join("gold.tsv");
    save_labeled(&gold, &gold_path).unwrap();

    let config = root.join("run.toml");
    fs::write(
        &config,
        format!(
            "seed = 3\n\
             [inputs]\nvectors = {vectors:?}\ngold = {gold_path:?}\n\
             [model]\nhidden = 6\nepochs = 2.0\nbatch_size = 16\nlearning_rate = 0.01\n\
             [sampler]\nn_positive = 150\n\
             [cv]\nk = 3\nrepeats = 2\n"
        ),
    )
    .unwrap();

    let ex = root.join("ex");
    cli(&["extract", s(&corpus), "--out", s(&ex)]).unwrap();
    cli(&["--config", s(&config), "build-dataset", "--store", s(&ex.join("triples.tsv")), "--out", s(&ex)]).unwrap();
    Workspace { dataset: ex.join("dataset.tsv"), _dir: dir, root, gold: gold_path, vectors, config }
}

