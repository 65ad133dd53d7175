//! Synthetic worlds shared by the integration tests.
//!
//! A world has nouns grouped into semantic classes and verbs that select one
//! set of classes for their subject and another for their object. It renders
//! dependency-parsed sentences in CoNLL-U and class-clustered word vectors.
#![allow(dead_code)]

pub mod workspace;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use plausible::sampling::{Label, LabeledExample};
use plausible::Triple;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Alphabetic name for index `i` with a one-letter prefix.
pub fn word(prefix: char, mut i: usize) -> String {
    let mut s = String::new();
    s.push(prefix);
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub struct WorldSpec {
    pub classes: usize,
    pub nouns_per_class: usize,
    pub verbs: usize,
    /// Classes each verb accepts per argument slot.
    pub selectivity: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            classes: 8,
            nouns_per_class: 30,
            verbs: 60,
            selectivity: 2,
            dim: 16,
            seed: 7,
        }
    }
}

pub struct World {
    pub nouns: Vec<String>,
    pub noun_class: Vec<usize>,
    pub verbs: Vec<String>,
    pub subject_classes: Vec<Vec<usize>>,
    pub object_classes: Vec<Vec<usize>>,
    pub vectors: HashMap<String, Vec<f64>>,
    spec_classes: usize,
    nouns_per_class: usize,
}

fn zipf_pick(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let norm: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.random_range(0.0..norm);
    for r in 0..n {
        u -= 1.0 / (r + 1) as f64;
        if u < 0.0 {
            return r;
        }
    }
    n - 1
}

impl World {
    pub fn new(spec: &WorldSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n_nouns = spec.classes * spec.nouns_per_class;
        let nouns: Vec<String> = (0..n_nouns).map(|i| word('n', i)).collect();
        let noun_class: Vec<usize> = (0..n_nouns).map(|i| i / spec.nouns_per_class).collect();
        let verbs: Vec<String> = (0..spec.verbs).map(|i| word('v', i)).collect();
        let all: Vec<usize> = (0..spec.classes).collect();
        let pick_classes = |rng: &mut ChaCha8Rng| {
            let mut c: Vec<usize> = all.choose_multiple(rng, spec.selectivity).copied().collect();
            c.sort_unstable();
            c
        };
        let subject_classes = (0..spec.verbs).map(|_| pick_classes(&mut rng)).collect();
        let object_classes = (0..spec.verbs).map(|_| pick_classes(&mut rng)).collect();

        let centroids: Vec<Vec<f64>> = (0..spec.classes)
            .map(|_| (0..spec.dim).map(|_| gaussian(&mut rng)).collect())
            .collect();
        let mut vectors = HashMap::new();
        for (i, noun) in nouns.iter().enumerate() {
            let c = &centroids[noun_class[i]];
            let v = c.iter().map(|m| m + 0.3 * gaussian(&mut rng)).collect();
            vectors.insert(noun.clone(), v);
        }
        for verb in &verbs {
            let v = (0..spec.dim).map(|_| gaussian(&mut rng)).collect();
            vectors.insert(verb.clone(), v);
        }
        World {
            nouns,
            noun_class,
            verbs,
            subject_classes,
            object_classes,
            vectors,
            spec_classes: spec.classes,
            nouns_per_class: spec.nouns_per_class,
        }
    }

    fn noun_in(&self, rng: &mut ChaCha8Rng, classes: &[usize]) -> usize {
        let class = *classes.choose(rng).unwrap();
        class * self.nouns_per_class + zipf_pick(rng, self.nouns_per_class)
    }

    /// A triple the world considers plausible: Zipfian verbs and nouns.
    pub fn plausible_triple(&self, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
        let v = zipf_pick(rng, self.verbs.len());
        let s = self.noun_in(rng, &self.subject_classes[v]);
        let o = self.noun_in(rng, &self.object_classes[v]);
        (s, v, o)
    }

    pub fn is_plausible(&self, t: &Triple) -> bool {
        let find = |xs: &[String], w: &str| xs.iter().position(|x| x == w);
        match (find(&self.nouns, &t.subject), find(&self.verbs, &t.verb), find(&self.nouns, &t.object)) {
            (Some(s), Some(v), Some(o)) => {
                self.subject_classes[v].contains(&self.noun_class[s])
                    && self.object_classes[v].contains(&self.noun_class[o])
            }
            _ => false,
        }
    }

    pub fn classes(&self) -> usize {
        self.spec_classes
    }

    /// One parsed sentence. Most are active transitive clauses; the rest are
    /// passives, pronoun subjects, coordinations and intransitives.
    pub fn sentence(&self, rng: &mut ChaCha8Rng, id: usize, out: &mut String) {
        let (s, v, o) = self.plausible_triple(rng);
        let (sn, vn, on) = (&self.nouns[s], &self.verbs[v], &self.nouns[o]);
        let mut rows: Vec<(String, String, &str, usize, &str)> = Vec::new();
        let kind = rng.random_range(0..20);
        match kind {
            0..=9 => {
                rows.push(("The".into(), "the".into(), "DET", 2, "det"));
                rows.push((sn.clone(), sn.clone(), "NOUN", 3, "nsubj"));
                rows.push((format!("{vn}s"), vn.clone(), "VERB", 0, "root"));
                rows.push(("the".into(), "the".into(), "DET", 5, "det"));
                rows.push((on.clone(), on.clone(), "NOUN", 3, "obj"));
                rows.push((".".into(), ".".into(), "PUNCT", 3, "punct"));
            }
            10..=12 => {
                rows.push(("A".into(), "a".into(), "DET", 3, "det"));
                rows.push(("big".into(), "big".into(), "ADJ", 3, "amod"));
                rows.push((sn.clone(), sn.clone(), "NOUN", 4, "nsubj"));
                rows.push((format!("{vn}ed"), vn.clone(), "VERB", 0, "root"));
                rows.push((format!("{on}s"), on.clone(), "NOUN", 4, "obj"));
                rows.push((".".into(), ".".into(), "PUNCT", 4, "punct"));
            }
            13..=14 => {
                rows.push(("The".into(), "the".into(), "DET", 2, "det"));
                rows.push((on.clone(), on.clone(), "NOUN", 4, "nsubj:pass"));
                rows.push(("was".into(), "be".into(), "AUX", 4, "aux:pass"));
                rows.push((format!("{vn}ed"), vn.clone(), "VERB", 0, "root"));
                rows.push(("by".into(), "by".into(), "ADP", 6, "case"));
                rows.push((sn.clone(), sn.clone(), "NOUN", 4, "obl"));
            }
            15..=16 => {
                rows.push(("It".into(), "it".into(), "PRON", 2, "nsubj"));
                rows.push((format!("{vn}s"), vn.clone(), "VERB", 0, "root"));
                rows.push((on.clone(), on.clone(), "NOUN", 2, "obj"));
            }
            17..=18 => {
                let (s2, _, _) = self.plausible_triple(rng);
                let s2n = &self.nouns[s2];
                rows.push((sn.clone(), sn.clone(), "NOUN", 4, "nsubj"));
                rows.push(("and".into(), "and".into(), "CCONJ", 3, "cc"));
                rows.push((s2n.clone(), s2n.clone(), "NOUN", 1, "conj"));
                rows.push((vn.to_string(), vn.clone(), "VERB", 0, "root"));
                rows.push((on.clone(), on.clone(), "NOUN", 4, "obj"));
            }
            _ => {
                rows.push((sn.clone(), sn.clone(), "NOUN", 2, "nsubj"));
                rows.push(("sleeps".into(), "sleep".into(), "VERB", 0, "root"));
            }
        }
        let _ = writeln!(out, "# sent_id = s{id}");
        for (i, (form, lemma, upos, head, rel)) in rows.iter().enumerate() {
            let _ = writeln!(out, "{}\t{form}\t{lemma}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_", i + 1);
        }
        out.push('\n');
    }

    /// `n` sentences with ids starting at `first_id`.
    pub fn corpus(&self, seed: u64, first_id: usize, n: usize) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = String::with_capacity(n * 180);
        for id in first_id..first_id + n {
            self.sentence(&mut rng, id, &mut out);
        }
        out
    }

    pub fn vectors_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        vectors_text(words.into_iter().map(|w| (w.as_str(), self.vectors[w].as_slice())))
    }
}

pub fn vectors_text<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut out = String::new();
    for (w, v) in rows {
        out.push_str(w);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

/// A gold set labeled by a hidden linear rule over random word vectors,
/// balanced by thresholding at the median score.
pub struct PlantedGold {
    pub examples: Vec<LabeledExample>,
    pub vectors: HashMap<String, Vec<f64>>,
}

pub fn planted_gold(n: usize, verbs: usize, nouns: usize, dim: usize, seed: u64) -> PlantedGold {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verb_names: Vec<String> = (0..verbs).map(|i| word('v', i)).collect();
    let noun_names: Vec<String> = (0..nouns).map(|i| word('n', i)).collect();
    let mut vectors = HashMap::new();
    for w in verb_names.iter().chain(&noun_names) {
        vectors.insert(w.clone(), (0..dim).map(|_| gaussian(&mut rng)).collect::<Vec<f64>>());
    }
    let rule: Vec<f64> = (0..3 * dim).map(|_| gaussian(&mut rng)).collect();

    let mut seen = BTreeSet::new();
    let mut scored = Vec::with_capacity(n);
    while scored.len() < n {
        let t = Triple::new(
            noun_names.choose(&mut rng).unwrap(),
            verb_names.choose(&mut rng).unwrap(),
            noun_names.choose(&mut rng).unwrap(),
        )
        .unwrap();
        if !seen.insert(t.clone()) {
            continue;
        }
        let x: Vec<f64> = t.slots().iter().flat_map(|w| vectors[*w].iter().copied()).collect();
        let score: f64 = x.iter().zip(&rule).map(|(a, b)| a * b).sum();
        scored.push((t, score));
    }
    let mut sorted: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let examples = scored
        .into_iter()
        .map(|(t, s)| LabeledExample::gold(t, Label::from_bool(s >= median)))
        .collect();
    PlantedGold { examples, vectors }
}

pub fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Parse a `s\tv\to\tcount` file into a map, in any row order.
pub fn read_counts(text: &str) -> HashMap<Triple, u64> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 4, "bad row {l:?}");
            (Triple::new(f[0], f[1], f[2]).unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Pearson statistic of `observed` counts against `probs` (which sum to 1).
pub fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n as f64 * p;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper critical value of the chi-square distribution at level `alpha`.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

/// A 5x5x5-vocabulary store with uneven counts, every lemma attested.
pub fn skewed_store(seed: u64) -> plausible::store::TripleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = ["ant", "bee", "cow", "dog", "eel"];
    let verbs = ["eat", "see", "hit", "own", "pet"];
    let objects = ["fig", "hay", "ink", "jam", "kit"];
    let mut store = plausible::store::TripleStore::new();
    for i in 0..5 {
        let t = Triple::new(subjects[i], verbs[(i + 1) % 5], objects[(i + 2) % 5]).unwrap();
        store.add(t, (i as u64 + 1) * 3);
    }
    for _ in 0..30 {
        let t = Triple::new(
            subjects.choose(&mut rng).unwrap(),
            verbs.choose(&mut rng).unwrap(),
            objects.choose(&mut rng).unwrap(),
        )
        .unwrap();
        store.add(t, rng.random_range(1..20));
    }
    store
}

/// Relative error between an analytic and a numeric derivative. The floor
/// keeps near-zero gradients from amplifying finite-difference round-off.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error of the analytic gradient against central
/// differences (step 1e-5) on one random small network and batch.
pub fn gradient_check(seed: u64, activation: plausible::mlp::Activation) -> f64 {
    use plausible::mlp::{loss_and_gradients, MlpParams, Samples};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=4);
    let dim = rng.random_range(1..=3);
    let n = rng.random_range(1..=6);
    let mut params = MlpParams::zeros(hidden, dim, activation);
    for p in params.iter_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    let features: Vec<f64> = (0..n * 3 * dim).map(|_| 1.5 * gaussian(&mut rng)).collect();
    let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
    let samples = Samples::new(features, labels, 3 * dim);
    let batch: Vec<usize> = (0..n).collect();

    let (_, grad) = loss_and_gradients(&params, &samples, &batch).unwrap();
    let analytic: Vec<f64> = grad.iter().copied().collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        *plus.iter_mut().nth(i).unwrap() += h;
        let mut minus = params.clone();
        *minus.iter_mut().nth(i).unwrap() -= h;
        let lp = loss_and_gradients(&plus, &samples, &batch).unwrap().0;
        let lm = loss_and_gradients(&minus, &samples, &batch).unwrap().0;
        worst = worst.max(relative_error(g, (lp - lm) / (2.0 * h)));
    }
    worst
}
