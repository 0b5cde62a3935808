//! Record splitting, term extraction, and ranked vocabularies.
//!
//! Terms are maximal runs of characters between whitespace and punctuation.
//! A run survives only if it is made of ASCII letters alone: runs containing
//! digits or non-ASCII characters (accented letters, control bytes) are
//! dropped whole. Surviving runs are lowercased. Single-letter terms are
//! kept, and no stemming or stop-word removal is applied.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How raw input bytes are decoded before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    /// Every byte maps to the Unicode code point of the same value.
    /// Total: cannot fail, which suits legacy corpora with stray control bytes.
    #[default]
    Latin1,
    /// Strict UTF-8; undecodable bytes are an error naming the byte offset.
    Utf8,
}

/// How a byte stream is cut into records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelimiterRule {
    /// A line whose content equals this string (ignoring the line ending)
    /// separates records.
    Literal(String),
    /// Every run of this many lines forms one record.
    LineCount(usize),
}

/// One ingested document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
}

/// An ordered set of records plus the inter-record text needed to
/// reconstruct the original input byte-for-byte.
#[derive(Debug, Clone, Default)]
pub struct RecordSet {
    pub records: Vec<Record>,
    /// Optional collection tag per record, parallel to `records`.
    pub source_labels: Option<Vec<String>>,
    /// Text before the first record (leading delimiter lines).
    prefix: String,
    /// Text between record `i` and record `i + 1` (delimiter lines).
    gaps: Vec<String>,
    /// Text after the last record (trailing delimiter lines).
    suffix: String,
}

impl RecordSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Build a set from bare records, with empty inter-record text.
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashMap::new();
        for record in &records {
            if record.id.is_empty() {
                return Err(Error::EmptyInput("record id".into()));
            }
            if seen.insert(record.id.clone(), ()).is_some() {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        let gaps = vec![String::new(); records.len().saturating_sub(1)];
        Ok(RecordSet {
            records,
            source_labels: None,
            prefix: String::new(),
            gaps,
            suffix: String::new(),
        })
    }

    /// Tag every record with the same collection label.
    pub fn with_source_label(mut self, label: &str) -> Self {
        self.source_labels = Some(vec![label.to_string(); self.records.len()]);
        self
    }

    /// Reassemble the exact text the set was split from: records interleaved
    /// with the delimiter text that separated them.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(
            self.prefix.len()
                + self.suffix.len()
                + self.records.iter().map(|r| r.raw_text.len()).sum::<usize>()
                + self.gaps.iter().map(|g| g.len()).sum::<usize>(),
        );
        out.push_str(&self.prefix);
        for (i, record) in self.records.iter().enumerate() {
            out.push_str(&record.raw_text);
            if let Some(gap) = self.gaps.get(i) {
                out.push_str(gap);
            }
        }
        out.push_str(&self.suffix);
        out
    }
}

/// Terms extracted from one record, in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub record_id: String,
    pub tokens: Vec<String>,
}

/// One vocabulary entry: a term, its total frequency, and its 1-based rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub term: String,
    pub frequency: u64,
    pub rank: usize,
}

/// A ranked term list. Entries are ordered by rank: non-increasing frequency,
/// ties broken by ascending term.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    pub entries: Vec<VocabEntry>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.frequency).sum()
    }

    /// Terms in rank order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    /// Keep only terms of at least `min_len` characters, re-ranked 1..k.
    pub fn retain_min_length(&self, min_len: usize) -> Result<Vocabulary> {
        let mut entries: Vec<VocabEntry> = self
            .entries
            .iter()
            .filter(|e| e.term.chars().count() >= min_len)
            .cloned()
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyInput(format!(
                "no terms of length >= {min_len}"
            )));
        }
        for (i, entry) in entries.iter_mut().enumerate() {
            entry.rank = i + 1;
        }
        Ok(Vocabulary { entries })
    }
}

fn decode(raw: &[u8], encoding: Encoding) -> Result<String> {
    match encoding {
        Encoding::Latin1 => Ok(raw.iter().map(|&b| b as char).collect()),
        Encoding::Utf8 => std::str::from_utf8(raw)
            .map(str::to_string)
            .map_err(|e| Error::Decode {
                offset: e.valid_up_to(),
                byte: raw[e.valid_up_to()],
            }),
    }
}

/// Lines including their terminators; the final line may lack one.
fn lines_with_endings(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let line = match rest.find('\n') {
            Some(i) => {
                let (line, tail) = rest.split_at(i + 1);
                rest = tail;
                line
            }
            None => std::mem::take(&mut rest),
        };
        Some(line)
    })
}

fn line_matches(line: &str, delimiter: &str) -> bool {
    let content = line.strip_suffix('\n').unwrap_or(line);
    let content = content.strip_suffix('\r').unwrap_or(content);
    content == delimiter
}

fn record_id(index: usize) -> String {
    format!("r{:06}", index + 1)
}

/// Cut a byte stream into records.
///
/// Records are numbered `r000001`, `r000002`, ... in ingestion order. The
/// returned set remembers the delimiter text between records, so
/// [`RecordSet::reconstruct`] returns the input byte-for-byte.
pub fn split_records(
    raw: &[u8],
    rule: &DelimiterRule,
    encoding: Encoding,
) -> Result<RecordSet> {
    let text = decode(raw, encoding)?;
    let mut set = RecordSet::default();
    match rule {
        DelimiterRule::Literal(delimiter) => {
            let mut gap_acc = String::new();
            let mut current = String::new();
            let flush =
                |current: &mut String, gap_acc: &mut String, set: &mut RecordSet| {
                    if current.is_empty() {
                        return;
                    }
                    let between = std::mem::take(gap_acc);
                    if set.records.is_empty() {
                        set.prefix = between;
                    } else {
                        set.gaps.push(between);
                    }
                    set.records.push(Record {
                        id: record_id(set.records.len()),
                        raw_text: std::mem::take(current),
                    });
                };
            for line in lines_with_endings(&text) {
                if line_matches(line, delimiter) {
                    flush(&mut current, &mut gap_acc, &mut set);
                    gap_acc.push_str(line);
                } else {
                    current.push_str(line);
                }
            }
            flush(&mut current, &mut gap_acc, &mut set);
            set.suffix = gap_acc;
        }
        DelimiterRule::LineCount(n) => {
            if *n == 0 {
                return Err(Error::Bounds {
                    what: "line count",
                    value: 0,
                    min: 1,
                    max: usize::MAX,
                });
            }
            let mut current = String::new();
            let mut lines_in_current = 0usize;
            for line in lines_with_endings(&text) {
                current.push_str(line);
                lines_in_current += 1;
                if lines_in_current == *n {
                    set.gaps.push(String::new());
                    set.records.push(Record {
                        id: record_id(set.records.len()),
                        raw_text: std::mem::take(&mut current),
                    });
                    lines_in_current = 0;
                }
            }
            if !current.is_empty() {
                set.gaps.push(String::new());
                set.records.push(Record {
                    id: record_id(set.records.len()),
                    raw_text: current,
                });
            }
            set.gaps.pop();
        }
    }
    if set.records.is_empty() {
        return Err(Error::EmptyInput("no records found in input".into()));
    }
    Ok(set)
}

/// Extract terms from a text: maximal alphanumeric runs, keeping only runs
/// of pure ASCII letters, lowercased. Runs containing digits or non-ASCII
/// characters are dropped whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    let mut run_ok = true;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            run_ok &= ch.is_ascii_alphabetic();
            run.push(ch.to_ascii_lowercase());
        } else if !run.is_empty() {
            if run_ok {
                tokens.push(std::mem::take(&mut run));
            } else {
                run.clear();
            }
            run_ok = true;
        }
    }
    if !run.is_empty() && run_ok {
        tokens.push(run);
    }
    tokens
}

/// Tokenize every record. Per-record work runs in parallel; output order
/// follows record order, so results do not depend on the thread count.
pub fn tokenize_records(records: &RecordSet) -> Vec<TokenStream> {
    records
        .records
        .par_iter()
        .map(|r| TokenStream {
            record_id: r.id.clone(),
            tokens: tokenize(&r.raw_text),
        })
        .collect()
}

/// Count term occurrences across all streams and rank by decreasing
/// frequency, ties broken by ascending term.
pub fn build_vocabulary(streams: &[TokenStream]) -> Result<Vocabulary> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for stream in streams {
        for token in &stream.tokens {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyInput("no terms in any stream".into()));
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary {
        entries: entries
            .into_iter()
            .enumerate()
            .map(|(i, (term, frequency))| VocabEntry {
                term: term.to_string(),
                frequency,
                rank: i + 1,
            })
            .collect(),
    })
}

/// The `k` most frequent terms, re-ranked 1..k.
pub fn top_terms(vocab: &Vocabulary, k: usize) -> Result<Vocabulary> {
    if k == 0 || k > vocab.len() {
        return Err(Error::Bounds {
            what: "top-k",
            value: k,
            min: 1,
            max: vocab.len(),
        });
    }
    Ok(Vocabulary {
        entries: vocab.entries[..k]
            .iter()
            .enumerate()
            .map(|(i, e)| VocabEntry {
                term: e.term.clone(),
                frequency: e.frequency,
                rank: i + 1,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(id: &str, tokens: &[&str]) -> TokenStream {
        TokenStream {
            record_id: id.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn split_two_records_on_literal_line() {
        let raw = b"first text\n-----\nsecond text\n";
        let set =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
                .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.records[0].raw_text, "first text\n");
        assert_eq!(set.records[1].raw_text, "second text\n");
        assert_eq!(set.records[0].id, "r000001");
    }

    #[test]
    fn split_without_delimiter_gives_one_record() {
        let raw = b"just one\nblock of text\n";
        let set =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
                .unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.records[0].raw_text, "just one\nblock of text\n");
    }

    #[test]
    fn split_round_trips_three_record_file() {
        // Trailing delimiter, as collection files end each record with one.
        let raw = b"alpha\nbeta\n-----\ngamma\n-----\ndelta\nepsilon\n-----\n";
        let set =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
                .unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.reconstruct().as_bytes(), raw);
    }

    #[test]
    fn split_round_trips_leading_and_doubled_delimiters() {
        let raw = b"-----\na\n-----\n-----\nb";
        let set =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
                .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.reconstruct().as_bytes(), raw);
    }

    #[test]
    fn split_by_line_count() {
        let raw = b"a\nb\nc\nd\ne\n";
        let set = split_records(raw, &DelimiterRule::LineCount(2), Encoding::Latin1).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.records[0].raw_text, "a\nb\n");
        assert_eq!(set.records[2].raw_text, "e\n");
        assert_eq!(set.reconstruct().as_bytes(), raw);
    }

    #[test]
    fn split_empty_input_is_an_error() {
        let err = split_records(b"", &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn split_delimiter_only_input_is_an_error() {
        let err = split_records(
            b"-----\n-----\n",
            &DelimiterRule::Literal("-----".into()),
            Encoding::Latin1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn utf8_decode_error_names_offset() {
        let raw = b"ok\n\xffbad";
        let err =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Utf8)
                .unwrap_err();
        match err {
            Error::Decode { offset, byte } => {
                assert_eq!(offset, 3);
                assert_eq!(byte, 0xff);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn latin1_accepts_any_bytes() {
        let raw = b"caf\xe9 and a \xa9 sign\n";
        let set =
            split_records(raw, &DelimiterRule::Literal("-----".into()), Encoding::Latin1)
                .unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn tokenize_sentence() {
        assert_eq!(
            tokenize("Add zzzucchini, peppers and onion."),
            vec!["add", "zzzucchini", "peppers", "and", "onion"]
        );
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_measure_line() {
        // Digit runs vanish; single letters survive.
        assert_eq!(tokenize("1/4 c  Olive oil"), vec!["c", "olive", "oil"]);
    }

    #[test]
    fn tokenize_drops_runs_with_digits_or_accents() {
        assert_eq!(tokenize("b12 vitamin caf\u{e9} ok"), vec!["vitamin", "ok"]);
        assert_eq!(tokenize("x2y"), Vec::<String>::new());
    }

    #[test]
    fn tokenize_splits_on_hyphen_and_apostrophe() {
        assert_eq!(tokenize("flat-leaf don't"), vec!["flat", "leaf", "don", "t"]);
    }

    #[test]
    fn vocabulary_counts_and_ranks() {
        let streams = [stream("a", &["a", "b", "a"]), stream("b", &["b", "a"])];
        let vocab = build_vocabulary(&streams).unwrap();
        assert_eq!(
            vocab.entries,
            vec![
                VocabEntry { term: "a".into(), frequency: 3, rank: 1 },
                VocabEntry { term: "b".into(), frequency: 2, rank: 2 },
            ]
        );
    }

    #[test]
    fn vocabulary_tie_broken_lexicographically() {
        let streams = [stream("a", &["x"]), stream("b", &["y"])];
        let vocab = build_vocabulary(&streams).unwrap();
        assert_eq!(vocab.entries[0].term, "x");
        assert_eq!(vocab.entries[0].rank, 1);
        assert_eq!(vocab.entries[1].term, "y");
        assert_eq!(vocab.entries[1].rank, 2);
    }

    #[test]
    fn vocabulary_of_empty_streams_is_an_error() {
        let streams = [stream("a", &[]), stream("b", &[])];
        assert!(matches!(
            build_vocabulary(&streams).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    #[test]
    fn vocabulary_matches_multinomial_generator_tally() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;

        // Draw 10,000 tokens from a known distribution and compare the
        // vocabulary against the generator's own tally.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let terms = ["salt", "sugar", "flour", "egg", "milk", "b", "yeast"];
        let weights = [30u32, 25, 20, 10, 8, 5, 2];
        let total: u32 = weights.iter().sum();
        let mut tally: HashMap<&str, u64> = HashMap::new();
        let mut tokens = Vec::new();
        for _ in 0..10_000 {
            let mut pick = rng.random_range(0..total);
            for (term, w) in terms.iter().zip(weights) {
                if pick < w {
                    *tally.entry(term).or_insert(0) += 1;
                    tokens.push(*term);
                    break;
                }
                pick -= w;
            }
        }
        let streams = [TokenStream {
            record_id: "gen".into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }];
        let vocab = build_vocabulary(&streams).unwrap();
        assert_eq!(vocab.total_frequency(), 10_000);
        for entry in &vocab.entries {
            assert_eq!(entry.frequency, tally[entry.term.as_str()]);
        }
    }

    #[test]
    fn top_terms_identity_when_k_is_full_size() {
        let streams = [stream("a", &["a", "b", "a", "c"])];
        let vocab = build_vocabulary(&streams).unwrap();
        assert_eq!(top_terms(&vocab, vocab.len()).unwrap(), vocab);
    }

    #[test]
    fn top_terms_takes_most_frequent() {
        let streams = [stream(
            "a",
            &["e", "d", "d", "c", "c", "c", "b", "b", "b", "b", "a", "a", "a", "a", "a"],
        )];
        let vocab = build_vocabulary(&streams).unwrap();
        let top = top_terms(&vocab, 2).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top.entries[0].term, "a");
        assert_eq!(top.entries[1].term, "b");
        assert_eq!(top.entries[1].rank, 2);
    }

    #[test]
    fn top_terms_bounds_errors() {
        let streams = [stream("a", &["a", "b"])];
        let vocab = build_vocabulary(&streams).unwrap();
        assert!(top_terms(&vocab, 0).is_err());
        assert!(top_terms(&vocab, 3).is_err());
    }

    #[test]
    fn top_terms_zipf_boundary_monotone() {
        // Synthetic Zipf frequencies; entry k must be at least as frequent
        // as entry k+1 of the parent vocabulary.
        let mut tokens = Vec::new();
        for rank in 1usize..=1200 {
            let freq = (20_000 / rank).max(1);
            let term = format!("t{rank:04}");
            for _ in 0..freq {
                tokens.push(term.clone());
            }
        }
        let streams = [TokenStream { record_id: "z".into(), tokens }];
        let vocab = build_vocabulary(&streams).unwrap();
        let k = 1000;
        let top = top_terms(&vocab, k).unwrap();
        assert_eq!(top.len(), k);
        assert!(top.entries[k - 1].frequency >= vocab.entries[k].frequency);
    }

    #[test]
    fn frequencies_sum_to_token_count() {
        let streams = [
            stream("a", &["x", "y", "x"]),
            stream("b", &[]),
            stream("c", &["z", "x"]),
        ];
        let vocab = build_vocabulary(&streams).unwrap();
        let token_count: usize = streams.iter().map(|s| s.tokens.len()).sum();
        assert_eq!(vocab.total_frequency(), token_count as u64);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_ascii_letter_runs(text in "\\PC*") {
            for token in tokenize(&text) {
                prop_assert!(!token.is_empty());
                prop_assert!(token.chars().all(|c| c.is_ascii_lowercase()));
            }
        }

        #[test]
        fn tokenize_is_idempotent_on_joined_output(text in "\\PC*") {
            let tokens = tokenize(&text);
            let rejoined = tokens.join(" ");
            prop_assert_eq!(tokenize(&rejoined), tokens);
        }

        #[test]
        fn top_terms_frequencies_non_increasing(
            words in proptest::collection::vec("[a-e]{1,3}", 1..60),
            k_frac in 0.0f64..1.0,
        ) {
            let streams = [TokenStream { record_id: "p".into(), tokens: words }];
            let vocab = build_vocabulary(&streams).unwrap();
            let k = ((vocab.len() as f64 * k_frac) as usize).clamp(1, vocab.len());
            let top = top_terms(&vocab, k).unwrap();
            for pair in top.entries.windows(2) {
                prop_assert!(pair[0].frequency >= pair[1].frequency);
            }
        }
    }
}
