//! Streaming reader for CoNLL-U dependency parses.
//!
//! Only the ID, FORM, LEMMA, UPOS, HEAD and DEPREL columns are consumed.
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped, so a
//! [`DepTree`] always holds the syntactic words of one sentence.
//!
//! The reader holds one sentence in memory at a time.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Governing token id, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepTree {
    pub tokens: Vec<Token>,
    pub sentence_id: Option<String>,
}

impl DepTree {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token with the given 1-based id. Assumes contiguous ids.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|idx| self.tokens.get(idx))
    }

    /// Tokens whose head is `id`, in sentence order.
    pub fn dependents(&self, id: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == id)
    }
}

/// A broken tree invariant reported by [`validate_tree`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The token at `position` (0-based) carries `id` instead of `position + 1`.
    NonContiguousIds { position: usize, id: usize },
    DanglingHead { id: usize, head: usize },
    SelfHead { id: usize },
    EmptyField { id: usize, field: &'static str },
    NoRoot,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonContiguousIds { position, id } => {
                write!(f, "token at position {} has id {id}", position + 1)
            }
            Violation::DanglingHead { id, head } => {
                write!(f, "token {id} points to missing head {head}")
            }
            Violation::SelfHead { id } => write!(f, "token {id} is its own head"),
            Violation::EmptyField { id, field } => write!(f, "token {id} has empty {field}"),
            Violation::NoRoot => write!(f, "sentence has no root"),
        }
    }
}

/// Check the structural invariants of a tree. An empty list means the tree is valid.
pub fn validate_tree(tree: &DepTree) -> Vec<Violation> {
    let mut violations = Vec::new();
    let n = tree.tokens.len();

    for (position, token) in tree.tokens.iter().enumerate() {
        if token.id != position + 1 {
            violations.push(Violation::NonContiguousIds {
                position,
                id: token.id,
            });
        }
        if token.head == token.id {
            violations.push(Violation::SelfHead { id: token.id });
        } else if token.head > n {
            violations.push(Violation::DanglingHead {
                id: token.id,
                head: token.head,
            });
        }
        if token.form.is_empty() {
            violations.push(Violation::EmptyField {
                id: token.id,
                field: "form",
            });
        }
        if token.lemma.is_empty() {
            violations.push(Violation::EmptyField {
                id: token.id,
                field: "lemma",
            });
        }
    }

    if !tree.tokens.iter().any(|t| t.head == 0) {
        violations.push(Violation::NoRoot);
    }

    violations
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorPolicy {
    /// Abort on the first malformed line or invalid tree.
    Strict,
    /// Drop the offending sentence and count it.
    #[default]
    Lenient,
}

enum Line {
    Token(Token),
    Skipped,
}

fn parse_token_line(line: &str, line_no: usize) -> Result<Line> {
    let malformed = |reason: String| Error::MalformedLine {
        line: line_no,
        reason,
    };

    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(malformed(format!("expected 10 columns, found {}", cols.len())));
    }

    let id_field = cols[0];
    if id_field.contains('-') || id_field.contains('.') {
        return Ok(Line::Skipped);
    }
    let id: usize = id_field
        .parse()
        .map_err(|_| malformed(format!("unparseable id {id_field:?}")))?;
    if id == 0 {
        return Err(malformed("token id 0".to_owned()));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(format!("unparseable head {:?}", cols[6])))?;
    if head == id {
        return Err(malformed(format!("token {id} is its own head")));
    }

    let form = cols[1];
    if form.is_empty() {
        return Err(malformed("empty form".to_owned()));
    }
    let lemma = match cols[2] {
        "_" | "" => form.to_lowercase(),
        lemma => lemma.to_owned(),
    };

    Ok(Line::Token(Token {
        id,
        form: form.to_owned(),
        lemma,
        upos: cols[3].to_owned(),
        head,
        deprel: cols[7].to_owned(),
    }))
}

/// Lazily yields one [`DepTree`] per non-empty sentence block.
pub struct ConlluReader<R> {
    reader: R,
    policy: ErrorPolicy,
    buf: String,
    line_no: usize,
    skipped: usize,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> Self {
        Self::with_policy(reader, ErrorPolicy::default())
    }

    pub fn with_policy(reader: R, policy: ErrorPolicy) -> Self {
        ConlluReader {
            reader,
            policy,
            buf: String::new(),
            line_no: 0,
            skipped: 0,
            done: false,
        }
    }

    /// Number of sentences dropped under the lenient policy so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Read one sentence block. `Ok(None)` at end of input.
    fn read_block(&mut self) -> Result<Option<DepTree>> {
        loop {
            let mut tree = DepTree::default();
            let mut error: Option<Error> = None;
            let mut saw_line = false;

            loop {
                self.buf.clear();
                if self.reader.read_line(&mut self.buf)? == 0 {
                    break;
                }
                self.line_no += 1;
                let line = self.buf.trim_end_matches(['\n', '\r']);

                if line.trim().is_empty() {
                    if saw_line {
                        break;
                    }
                    continue;
                }
                saw_line = true;

                if let Some(comment) = line.strip_prefix('#') {
                    if let Some((key, value)) = comment.split_once('=') {
                        if key.trim() == "sent_id" {
                            tree.sentence_id = Some(value.trim().to_owned());
                        }
                    }
                    continue;
                }

                // Keep consuming the block after an error so the next call
                // starts at a sentence boundary.
                if error.is_some() {
                    continue;
                }
                match parse_token_line(line, self.line_no) {
                    Ok(Line::Token(token)) => tree.tokens.push(token),
                    Ok(Line::Skipped) => {}
                    Err(e) => error = Some(e),
                }
            }

            if !saw_line {
                return Ok(None);
            }

            let error = error.or_else(|| {
                if tree.tokens.is_empty() {
                    return None;
                }
                let violations = validate_tree(&tree);
                if violations.is_empty() {
                    None
                } else {
                    let reason = violations
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("; ");
                    Some(Error::InvalidTree {
                        line: self.line_no,
                        reason,
                    })
                }
            });

            match (error, self.policy) {
                (Some(e), ErrorPolicy::Strict) => return Err(e),
                (Some(e), ErrorPolicy::Lenient) => {
                    log::debug!("skipping sentence: {e}");
                    self.skipped += 1;
                }
                (None, _) if tree.tokens.is_empty() => {}
                (None, _) => return Ok(Some(tree)),
            }
        }
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<DepTree>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_block() {
            Ok(Some(tree)) => Some(Ok(tree)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Parse a CoNLL-U stream with the default (lenient) policy.
pub fn parse_conllu<R: BufRead>(reader: R) -> ConlluReader<R> {
    ConlluReader::new(reader)
}

/// Serialize the consumed columns of `tree` as a CoNLL-U block. Unconsumed
/// columns are written as `_`.
pub fn write_tree<W: Write>(tree: &DepTree, mut writer: W) -> std::io::Result<()> {
    if let Some(id) = &tree.sentence_id {
        writeln!(writer, "# sent_id = {id}")?;
    }
    for t in &tree.tokens {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
            t.id, t.form, t.lemma, t.upos, t.head, t.deprel
        )?;
    }
    writeln!(writer)
}
