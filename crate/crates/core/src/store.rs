//! Counted multiset of triples with per-role lemma frequencies.
//!
//! On disk a store is a headerless TSV, one row per unique triple:
//! `subject\tverb\tobject\tcount\n`, sorted by count descending and then
//! lexicographically.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::triple::{normalize_lemma, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Subject,
    Verb,
    Object,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Subject, Role::Verb, Role::Object];

    pub fn of(self, triple: &Triple) -> &str {
        match self {
            Role::Subject => &triple.subject,
            Role::Verb => &triple.verb,
            Role::Object => &triple.object,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleStore {
    counts: HashMap<Triple, u64>,
    role_freq: [HashMap<String, u64>; 3],
}

fn role_index(role: Role) -> usize {
    match role {
        Role::Subject => 0,
        Role::Verb => 1,
        Role::Object => 2,
    }
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `count` occurrences of `triple`. Zero counts are ignored.
    pub fn add(&mut self, triple: Triple, count: u64) {
        if count == 0 {
            return;
        }
        for role in Role::ALL {
            *self.role_freq[role_index(role)]
                .entry(role.of(&triple).to_owned())
                .or_insert(0) += count;
        }
        *self.counts.entry(triple).or_insert(0) += count;
    }

    pub fn count(&self, triple: &Triple) -> u64 {
        self.counts.get(triple).copied().unwrap_or(0)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.counts.contains_key(triple)
    }

    /// Number of unique triples.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Cumulative occurrences over all triples.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Triple, u64)> {
        self.counts.iter().map(|(t, &c)| (t, c))
    }

    /// Occurrence-weighted lemma frequencies for one role.
    pub fn role_freq(&self, role: Role) -> &HashMap<String, u64> {
        &self.role_freq[role_index(role)]
    }

    /// Fold `other` into `self`.
    pub fn absorb(&mut self, other: &TripleStore) {
        for (triple, count) in other.iter() {
            self.add(triple.clone(), count);
        }
    }

    /// Pointwise sum of two stores.
    pub fn merge(a: &TripleStore, b: &TripleStore) -> TripleStore {
        let (mut big, small) = if a.len() >= b.len() { (a.clone(), b) } else { (b.clone(), a) };
        big.absorb(small);
        big
    }

    /// Entries sorted by count descending, then lexicographically.
    pub fn sorted_entries(&self) -> Vec<(&Triple, u64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_unstable_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        entries
    }

    /// The `k` most frequent triples, ties broken lexicographically.
    pub fn top_k(&self, k: usize) -> Vec<(Triple, u64)> {
        let mut entries = self.sorted_entries();
        entries.truncate(k);
        entries.into_iter().map(|(t, c)| (t.clone(), c)).collect()
    }

    /// Recompute role frequencies from the counts and compare.
    pub fn is_consistent(&self) -> bool {
        let mut fresh = TripleStore::new();
        for (triple, count) in self.iter() {
            if count == 0 {
                return false;
            }
            fresh.add(triple.clone(), count);
        }
        fresh.role_freq == self.role_freq
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (t, count) in self.sorted_entries() {
            writeln!(writer, "{}\t{}\t{}\t{}", t.subject, t.verb, t.object, count)?;
        }
        writer.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Open {
            path: path.to_owned(),
            source,
        })?;
        self.write_to(BufWriter::new(file))?;
        Ok(())
    }

    /// Read a store file. Any malformed row is an error.
    pub fn read_from<R: BufRead>(reader: R) -> Result<TripleStore> {
        let mut store = TripleStore::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            match parse_row(&line, idx + 1)? {
                Row::Valid(triple, count) if count > 0 => store.add(triple, count),
                Row::Valid(..) => {
                    return Err(Error::MalformedRow {
                        line: idx + 1,
                        reason: "zero count".to_owned(),
                    })
                }
                Row::Rejected(slot) => {
                    return Err(Error::MalformedRow {
                        line: idx + 1,
                        reason: format!("non-normalized lemma {slot:?}"),
                    })
                }
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TripleStore> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Open {
            path: path.to_owned(),
            source,
        })?;
        Self::read_from(BufReader::new(file))
    }
}

impl FromIterator<(Triple, u64)> for TripleStore {
    fn from_iter<I: IntoIterator<Item = (Triple, u64)>>(iter: I) -> Self {
        let mut store = TripleStore::new();
        for (t, c) in iter {
            store.add(t, c);
        }
        store
    }
}

enum Row {
    Valid(Triple, u64),
    /// Well-formed row with a slot that fails normalization.
    Rejected(String),
}

fn parse_row(line: &str, line_no: usize) -> Result<Row> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        return Err(Error::MalformedRow {
            line: line_no,
            reason: format!("expected 4 columns, found {}", cols.len()),
        });
    }
    let count: u64 = cols[3].trim().parse().map_err(|_| Error::MalformedRow {
        line: line_no,
        reason: format!("non-integer count {:?}", cols[3]),
    })?;
    let mut slots = Vec::with_capacity(3);
    for raw in &cols[..3] {
        match normalize_lemma(raw) {
            Some(lemma) => slots.push(lemma),
            None => return Ok(Row::Rejected((*raw).to_owned())),
        }
    }
    let object = slots.pop().unwrap();
    let verb = slots.pop().unwrap();
    let subject = slots.pop().unwrap();
    Ok(Row::Valid(
        Triple {
            subject,
            verb,
            object,
        },
        count,
    ))
}

/// Row tallies from [`ingest_external_triples`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub non_alphabetic: usize,
    pub below_min_count: usize,
}

/// Ingest a pre-extracted `subject\tverb\tobject\tcount` corpus.
///
/// Rows with a non-alphabetic slot or a count below `min_count` are dropped;
/// malformed rows are skipped and counted. Duplicate rows sum.
pub fn ingest_external_triples<R: BufRead>(
    reader: R,
    min_count: u64,
) -> Result<(TripleStore, IngestStats)> {
    let mut store = TripleStore::new();
    let mut stats = IngestStats::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.rows += 1;
        match parse_row(&line, idx + 1) {
            Err(e) => {
                log::debug!("{e}");
                stats.malformed += 1;
            }
            Ok(Row::Rejected(_)) => stats.non_alphabetic += 1,
            Ok(Row::Valid(_, count)) if count < min_count.max(1) => stats.below_min_count += 1,
            Ok(Row::Valid(triple, count)) => {
                stats.accepted += 1;
                store.add(triple, count);
            }
        }
    }
    Ok((store, stats))
}
