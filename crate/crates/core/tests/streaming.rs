//! Runs alone in its own binary so the peak-memory reading is not shared
//! with other tests.

use std::io::{self, BufReader, Read};

use plausible::conllu::parse_conllu;
use plausible::extract::{extract_corpus, ExtractionConfig};

/// Produces `remaining` numbered sentences on demand.
struct SentenceSource {
    remaining: usize,
    next_id: usize,
    pending: Vec<u8>,
    pos: usize,
}

impl Read for SentenceSource {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.pending.len() {
            if self.remaining == 0 {
                return Ok(0);
            }
            self.remaining -= 1;
            self.next_id += 1;
            let id = self.next_id;
            let subject = ["dog", "cat", "bird"][id % 3];
            let object = ["bone", "fish", "seed", "ball"][id % 4];
            self.pending = format!(
                "# sent_id = {id}\n1\t{subject}\t{subject}\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
                 2\teats\teat\tVERB\t_\t_\t0\troot\t_\t_\n\
                 3\t{object}\t{object}\tNOUN\t_\t_\t2\tobj\t_\t_\n\n"
            )
            .into_bytes();
            self.pos = 0;
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

#[cfg(target_os = "linux")]
fn peak_rss_kib() -> u64 {
    let status = std::fs::read_to_string("/proc/self/status").unwrap();
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
        .unwrap()
}

#[test]
fn million_sentences_stream_in_bounded_memory() {
    const N: usize = 1_000_000;
    let source = SentenceSource {
        remaining: N,
        next_id: 0,
        pending: Vec::new(),
        pos: 0,
    };
    let (store, stats) =
        extract_corpus(parse_conllu(BufReader::new(source)), &ExtractionConfig::default()).unwrap();
    assert_eq!(stats.sentences, N as u64);
    assert_eq!(store.total(), N as u64);
    assert_eq!(store.len(), 12);

    // The input is ~120 MB; a reader that buffered it would blow past this.
    #[cfg(target_os = "linux")]
    assert!(peak_rss_kib() < 64 * 1024, "peak RSS {} KiB", peak_rss_kib());
}
