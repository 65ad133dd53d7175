use std::fmt;

/// A normalized subject-verb-object event.
///
/// Every slot is a non-empty lowercase ASCII-alphabetic lemma. Field order
/// gives the lexicographic (subject, verb, object) ordering used for
/// tie-breaking throughout the crate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub verb: String,
    pub object: String,
}

/// Lowercase `raw`; `None` if the result is empty or contains anything
/// outside `a-z`.
pub fn normalize_lemma(raw: &str) -> Option<String> {
    let lemma = raw.to_lowercase();
    if !lemma.is_empty() && lemma.bytes().all(|b| b.is_ascii_lowercase()) {
        Some(lemma)
    } else {
        None
    }
}

impl Triple {
    /// Build a triple, normalizing each slot. `None` if any slot is rejected.
    pub fn new(subject: &str, verb: &str, object: &str) -> Option<Self> {
        Some(Triple {
            subject: normalize_lemma(subject)?,
            verb: normalize_lemma(verb)?,
            object: normalize_lemma(object)?,
        })
    }

    pub fn slots(&self) -> [&str; 3] {
        [&self.subject, &self.verb, &self.object]
    }

    /// Whether the slots satisfy the normalization invariant.
    pub fn is_normalized(&self) -> bool {
        self.slots()
            .iter()
            .all(|s| normalize_lemma(s).as_deref() == Some(*s))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.subject, self.verb, self.object)
    }
}
