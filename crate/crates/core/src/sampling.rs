//! Pseudo-negative sampling and self-supervised dataset assembly.
//!
//! A pseudo-implausible triple draws its subject, verb and object
//! independently, each from the occurrence-weighted frequency table of its
//! role. Draws that reproduce an attested triple are rejected and redrawn up
//! to `max_resample` times.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, substream, Rng};
use crate::store::{Role, TripleStore};
use crate::triple::{normalize_lemma, Triple};

/// Walker/Vose alias table for O(1) weighted draws.
#[derive(Clone, Debug)]
pub struct AliasTable<T> {
    items: Vec<T>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl<T> AliasTable<T> {
    /// Build from `(item, weight)` pairs. Item order is preserved.
    pub fn new(entries: Vec<(T, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDistribution("no entries"));
        }
        if entries.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(
                "alias weights must be positive and finite".into(),
            ));
        }

        let n = entries.len();
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        let (items, weights): (Vec<T>, Vec<f64>) = entries.into_iter().unzip();

        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();

        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers on either side are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i;
        }

        Ok(AliasTable { items, prob, alias })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn alias(&self) -> &[usize] {
        &self.alias
    }

    pub fn sample_index(&self, rng: &mut Rng) -> usize {
        let i = rng.random_range(0..self.items.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }

    pub fn sample<'a>(&'a self, rng: &mut Rng) -> &'a T {
        &self.items[self.sample_index(rng)]
    }

    /// Exact probability of each index under [`AliasTable::sample_index`].
    pub fn induced_distribution(&self) -> Vec<f64> {
        let n = self.items.len() as f64;
        let mut p: Vec<f64> = self.prob.iter().map(|&q| q / n).collect();
        for (i, &a) in self.alias.iter().enumerate() {
            p[a] += (1.0 - self.prob[i]) / n;
        }
        p
    }
}

/// Alias table over a lemma-count map, items in lexicographic order.
pub fn build_alias(weights: &HashMap<String, u64>) -> Result<AliasTable<String>> {
    if weights.is_empty() {
        return Err(Error::EmptyDistribution("no lemmas"));
    }
    let mut entries: Vec<(String, f64)> = weights
        .iter()
        .map(|(lemma, &count)| (lemma.clone(), count as f64))
        .collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    AliasTable::new(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Implausible = 0,
    Plausible = 1,
}

impl Label {
    pub fn from_bool(plausible: bool) -> Self {
        if plausible {
            Label::Plausible
        } else {
            Label::Implausible
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Gold,
    Attested,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledExample {
    pub triple: Triple,
    pub label: Label,
    pub provenance: Provenance,
    /// Sampled negative that still coincides with an attested triple.
    pub collision: bool,
}

impl LabeledExample {
    pub fn gold(triple: Triple, label: Label) -> Self {
        LabeledExample {
            triple,
            label,
            provenance: Provenance::Gold,
            collision: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeDraw {
    pub triple: Triple,
    /// Number of triples drawn, including the returned one.
    pub draws: usize,
    /// The returned triple is attested in the store.
    pub collision: bool,
}

/// Draws pseudo-implausible triples from a store's role frequencies. The
/// store may be borrowed or owned.
pub struct NegativeSampler<S> {
    store: S,
    tables: [AliasTable<String>; 3],
    max_resample: usize,
}

pub const DEFAULT_MAX_RESAMPLE: usize = 100;

impl<S: Borrow<TripleStore>> NegativeSampler<S> {
    /// `max_resample = 0` disables rejection of attested draws.
    pub fn new(store: S, max_resample: usize) -> Result<Self> {
        let st = store.borrow();
        if st.is_empty() {
            return Err(Error::EmptyDistribution("triple store is empty"));
        }
        let tables = [
            build_alias(st.role_freq(Role::Subject))?,
            build_alias(st.role_freq(Role::Verb))?,
            build_alias(st.role_freq(Role::Object))?,
        ];
        Ok(NegativeSampler {
            store,
            tables,
            max_resample,
        })
    }

    pub fn store(&self) -> &TripleStore {
        self.store.borrow()
    }

    pub fn table(&self, role: Role) -> &AliasTable<String> {
        match role {
            Role::Subject => &self.tables[0],
            Role::Verb => &self.tables[1],
            Role::Object => &self.tables[2],
        }
    }

    /// One independent draw per slot, returned as indices into each role table.
    pub fn draw_indices(&self, rng: &mut Rng) -> [usize; 3] {
        [
            self.tables[0].sample_index(rng),
            self.tables[1].sample_index(rng),
            self.tables[2].sample_index(rng),
        ]
    }

    fn draw(&self, rng: &mut Rng) -> Triple {
        let [s, v, o] = self.draw_indices(rng);
        Triple {
            subject: self.tables[0].items()[s].clone(),
            verb: self.tables[1].items()[v].clone(),
            object: self.tables[2].items()[o].clone(),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> NegativeDraw {
        let mut triple = self.draw(rng);
        let mut draws = 1;
        let store = self.store.borrow();
        while store.contains(&triple) && draws <= self.max_resample {
            triple = self.draw(rng);
            draws += 1;
        }
        let collision = store.contains(&triple);
        NegativeDraw {
            triple,
            draws,
            collision,
        }
    }
}

/// One pseudo-negative from a fresh sampler.
pub fn sample_negative(store: &TripleStore, rng: &mut Rng) -> Result<NegativeDraw> {
    Ok(NegativeSampler::new(store, DEFAULT_MAX_RESAMPLE)?.sample(rng))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveMode {
    /// Unique triples drawn with replacement, weighted by occurrence count.
    #[default]
    Weighted,
    /// Unique triples drawn with replacement, uniformly.
    Unique,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    pub positive_mode: PositiveMode,
    pub max_resample: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            positive_mode: PositiveMode::Weighted,
            max_resample: DEFAULT_MAX_RESAMPLE,
        }
    }
}

/// `n_positive` attested positives plus `n_positive` sampled negatives,
/// shuffled by `seed`.
pub fn build_selfsupervised_dataset(
    store: &TripleStore,
    n_positive: usize,
    seed: u64,
    opts: &DatasetOptions,
) -> Result<Vec<LabeledExample>> {
    if n_positive == 0 {
        return Err(Error::InvalidArgument("n_positive must be at least 1".into()));
    }
    let sampler = NegativeSampler::new(store, opts.max_resample)?;

    let mut attested: Vec<(&Triple, f64)> = store
        .iter()
        .map(|(t, c)| {
            let w = match opts.positive_mode {
                PositiveMode::Weighted => c as f64,
                PositiveMode::Unique => 1.0,
            };
            (t, w)
        })
        .collect();
    attested.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let positives = AliasTable::new(attested)?;

    let mut examples = Vec::with_capacity(2 * n_positive);
    let mut rng = substream(seed, domain::POSITIVES, 0);
    for _ in 0..n_positive {
        examples.push(LabeledExample {
            triple: (*positives.sample(&mut rng)).clone(),
            label: Label::Plausible,
            provenance: Provenance::Attested,
            collision: false,
        });
    }

    let mut rng = substream(seed, domain::NEGATIVES, 0);
    for _ in 0..n_positive {
        let draw = sampler.sample(&mut rng);
        examples.push(LabeledExample {
            triple: draw.triple,
            label: Label::Implausible,
            provenance: Provenance::Sampled,
            collision: draw.collision,
        });
    }

    examples.shuffle(&mut substream(seed, domain::DATASET_SHUFFLE, 0));
    Ok(examples)
}

/// Write `subject\tverb\tobject\tlabel` rows.
pub fn write_labeled<W: Write>(examples: &[LabeledExample], mut writer: W) -> std::io::Result<()> {
    for ex in examples {
        let t = &ex.triple;
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            t.subject,
            t.verb,
            t.object,
            ex.label.as_u8()
        )?;
    }
    writer.flush()
}

pub fn save_labeled(examples: &[LabeledExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    write_labeled(examples, BufWriter::new(file))?;
    Ok(())
}

/// Read a labeled TSV. Rows come back with [`Provenance::Gold`].
pub fn read_labeled<R: BufRead>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedRow {
            line: idx + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let label = match cols[3].trim() {
            "1" => Label::Plausible,
            "0" => Label::Implausible,
            other => return Err(bad(format!("label must be 0 or 1, found {other:?}"))),
        };
        let mut slots = cols[..3].iter().map(|raw| {
            normalize_lemma(raw.trim()).ok_or_else(|| bad(format!("non-alphabetic word {raw:?}")))
        });
        let triple = Triple {
            subject: slots.next().unwrap()?,
            verb: slots.next().unwrap()?,
            object: slots.next().unwrap()?,
        };
        examples.push(LabeledExample::gold(triple, label));
    }
    Ok(examples)
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    read_labeled(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn t(s: &str, v: &str, o: &str) -> Triple {
        Triple::new(s, v, o).unwrap()
    }

    fn weights(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn alias_distribution_is_normalized_weights() {
        let table = build_alias(&weights(&[("a", 1), ("b", 3)])).unwrap();
        let p = table.induced_distribution();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn alias_single_item_is_certain() {
        let table = build_alias(&weights(&[("a", 1)])).unwrap();
        let mut rng = seeded(3);
        assert!((0..1000).all(|_| table.sample(&mut rng) == "a"));
    }

    #[test]
    fn alias_rejects_empty_and_bad_weights() {
        assert!(matches!(
            build_alias(&HashMap::new()),
            Err(Error::EmptyDistribution(_))
        ));
        assert!(AliasTable::new(vec![("a", 0.0)]).is_err());
        assert!(AliasTable::new(vec![("a", f64::NAN)]).is_err());
    }

    #[test]
    fn single_triple_store_always_collides() {
        let store: TripleStore = [(t("a", "v", "x"), 1)].into_iter().collect();
        let sampler = NegativeSampler::new(&store, 100).unwrap();
        let draw = sampler.sample(&mut seeded(0));
        assert_eq!(draw.triple, t("a", "v", "x"));
        assert!(draw.collision);
        assert_eq!(draw.draws, 101);
    }

    #[test]
    fn rejection_forces_the_unattested_triple() {
        let store: TripleStore = [(t("a", "v", "x"), 1), (t("b", "w", "y"), 1)]
            .into_iter()
            .collect();
        // Only (a,v,x) and (b,w,y) are attested among the eight composable triples.
        let sampler = NegativeSampler::new(&store, 100).unwrap();
        let mut rng = seeded(1);
        for _ in 0..1000 {
            let draw = sampler.sample(&mut rng);
            assert!(!draw.collision);
            assert!(!store.contains(&draw.triple));
        }
    }

    #[test]
    fn rejection_converges_to_only_free_object() {
        // Subjects {a}, verbs {v}, objects {x, y} with only (a,v,x) attested.
        let store: TripleStore = [(t("a", "v", "x"), 1)].into_iter().collect();
        let sampler = NegativeSampler {
            store: &store,
            tables: [
                build_alias(&weights(&[("a", 1)])).unwrap(),
                build_alias(&weights(&[("v", 1)])).unwrap(),
                build_alias(&weights(&[("x", 1), ("y", 1)])).unwrap(),
            ],
            max_resample: 100,
        };
        let mut rng = seeded(5);
        for _ in 0..1000 {
            assert_eq!(sampler.sample(&mut rng).triple, t("a", "v", "y"));
        }
    }

    #[test]
    fn zero_positives_rejected() {
        let store: TripleStore = [(t("a", "v", "x"), 1)].into_iter().collect();
        assert!(build_selfsupervised_dataset(&store, 0, 0, &DatasetOptions::default()).is_err());
    }

    #[test]
    fn empty_store_is_empty_distribution() {
        let err = build_selfsupervised_dataset(&TripleStore::new(), 3, 0, &DatasetOptions::default());
        assert!(matches!(err, Err(Error::EmptyDistribution(_))));
    }

    #[test]
    fn degenerate_store_dataset() {
        let store: TripleStore = [(t("a", "v", "x"), 1)].into_iter().collect();
        let data = build_selfsupervised_dataset(&store, 2, 9, &DatasetOptions::default()).unwrap();
        assert_eq!(data.len(), 4);
        let pos: Vec<_> = data.iter().filter(|e| e.label == Label::Plausible).collect();
        let neg: Vec<_> = data.iter().filter(|e| e.label == Label::Implausible).collect();
        assert_eq!(pos.len(), 2);
        assert_eq!(neg.len(), 2);
        assert!(pos.iter().all(|e| e.triple == t("a", "v", "x")));
        assert!(neg.iter().all(|e| e.collision && e.provenance == Provenance::Sampled));
    }

    #[test]
    fn labeled_tsv_round_trip() {
        let data = vec![
            LabeledExample::gold(t("bird", "construct", "nest"), Label::Plausible),
            LabeledExample::gold(t("lake", "fuse", "tie"), Label::Implausible),
        ];
        let mut buf = Vec::new();
        write_labeled(&data, &mut buf).unwrap();
        assert_eq!(buf, b"bird\tconstruct\tnest\t1\nlake\tfuse\ttie\t0\n");
        assert_eq!(read_labeled(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn labeled_reader_rejects_bad_rows() {
        assert!(read_labeled("a\tb\tc\t2\n".as_bytes()).is_err());
        assert!(read_labeled("a\tb\tc\n".as_bytes()).is_err());
        assert!(read_labeled("a b\tb\tc\t1\n".as_bytes()).is_err());
    }
}
