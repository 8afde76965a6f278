//! Corpus ingestion: inline concept markup parsing, the cui2vec/NLM
//! transformations, and vocabulary construction.
//!
//! Input is UTF-8 text, one sentence per line. Concepts are tagged inline as
//! `[surface|CUI]`; untagged text is valid and yields word tokens only.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// One token of a tagged sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Word(String),
    Concept { id: String, surface: String },
}

impl Token {
    pub fn is_concept(&self) -> bool {
        matches!(self, Token::Concept { .. })
    }
}

/// A sentence as an ordered, non-empty token list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<Token>,
}

/// Which training stream to derive from a tagged sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Concepts as ids interleaved with all surrounding words.
    Cui2vec,
    /// Concept ids only; everything else dropped.
    Nlm,
    /// Plain words; concept tags dissolved back into their surface words.
    Words,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cui2vec => "cui2vec",
            Mode::Nlm => "nlm",
            Mode::Words => "words",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cui2vec" => Ok(Mode::Cui2vec),
            "nlm" => Ok(Mode::Nlm),
            "words" => Ok(Mode::Words),
            other => Err(format!("unknown mode `{other}` (expected cui2vec, nlm or words)")),
        }
    }
}

/// Parses one line of `[surface|CUI]`-tagged text.
///
/// Returns `None` for blank lines. Words are lowercased; concept ids are kept
/// verbatim. `line_no` is 1-based and only used in error messages.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<TaggedSentence>> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut chars = line.char_indices();

    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token::Word(word.to_lowercase()));
            word.clear();
        }
    };

    while let Some((i, c)) = chars.next() {
        match c {
            '[' => {
                flush(&mut word, &mut tokens);
                let rest = &line[i + 1..];
                let close = rest.find(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: "unclosed `[` in concept markup".into(),
                })?;
                let inner = &rest[..close];
                let (surface, id) = match inner.rfind('|') {
                    Some(p) => (&inner[..p], &inner[p + 1..]),
                    // No separator: the bracketed text is both surface and id,
                    // accepting pre-normalized corpora like `[calcium_carbonate]`.
                    None => (inner, inner),
                };
                if id.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "empty concept id in concept markup".into(),
                    });
                }
                tokens.push(Token::Concept { id: id.to_string(), surface: surface.to_string() });
                // Skip past the `]`.
                while let Some((j, _)) = chars.next() {
                    if j == i + 1 + close {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => flush(&mut word, &mut tokens),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut tokens);

    if tokens.is_empty() {
        Ok(None)
    } else {
        Ok(Some(TaggedSentence { tokens }))
    }
}

/// Parses a whole reader; blank lines are skipped.
pub fn parse_tagged_text<R: BufRead>(reader: R) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        if let Some(s) = parse_line(&line, idx + 1)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// cui2vec transformation: concept ids interleaved with all words.
/// Output length always equals the input token count.
pub fn transform_cui2vec(sentence: &TaggedSentence) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .map(|t| match t {
            Token::Word(w) => w.clone(),
            Token::Concept { id, .. } => id.clone(),
        })
        .collect()
}

/// NLM transformation: concept ids only, in order. May be empty.
pub fn transform_nlm(sentence: &TaggedSentence) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .filter_map(|t| match t {
            Token::Concept { id, .. } => Some(id.clone()),
            Token::Word(_) => None,
        })
        .collect()
}

/// Word transformation: concept tags dissolve into their lowercased surface
/// words; nothing is dropped except empty surfaces.
pub fn transform_words(sentence: &TaggedSentence) -> Vec<String> {
    let mut out = Vec::new();
    for t in &sentence.tokens {
        match t {
            Token::Word(w) => out.push(w.clone()),
            Token::Concept { surface, id } => {
                let src = if surface.is_empty() { id } else { surface };
                out.extend(src.split_whitespace().map(|w| w.to_lowercase()));
            }
        }
    }
    out
}

/// Applies the transformation for `mode`, dropping sentences that end up empty.
pub fn transform(sentence: &TaggedSentence, mode: Mode) -> Option<Vec<String>> {
    let toks = match mode {
        Mode::Cui2vec => transform_cui2vec(sentence),
        Mode::Nlm => transform_nlm(sentence),
        Mode::Words => transform_words(sentence),
    };
    if toks.is_empty() {
        None
    } else {
        Some(toks)
    }
}

/// Token ↔ index map with frequencies, filtered by a minimum count.
///
/// Indices are dense `0..len` and assigned deterministically: descending
/// frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, usize>,
    pub min_count: u64,
    /// Total token occurrences in the stream, including filtered-out tokens.
    pub total_tokens: u64,
    /// Set where the token originated from a Concept tag at least once.
    concept_flags: Vec<bool>,
}

/// Raw pre-filtering corpus statistics.
#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    pub raw_freqs: HashMap<String, u64>,
    pub sentence_count: u64,
    pub document_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary and raw stats from a stream of token sequences.
    ///
    /// `concept_tokens` marks which token strings are concept ids, so neighbor
    /// search can later be restricted to the concept class; pass an empty set
    /// for plain-word corpora.
    pub fn build<I, S>(
        sentences: I,
        min_count: u64,
        concept_tokens: &std::collections::HashSet<String>,
    ) -> Result<(Vocabulary, CorpusStats)>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        assert!(min_count >= 1, "min_count must be >= 1");
        let mut raw: HashMap<String, u64> = HashMap::new();
        let mut total: u64 = 0;
        let mut sentence_count: u64 = 0;
        for sent in sentences {
            let sent = sent.as_ref();
            if sent.is_empty() {
                continue;
            }
            sentence_count += 1;
            for tok in sent {
                *raw.entry(tok.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }

        let mut retained: Vec<(String, u64)> =
            raw.iter().filter(|(_, &f)| f >= min_count).map(|(t, &f)| (t.clone(), f)).collect();
        retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut index = HashMap::with_capacity(retained.len());
        let mut tokens = Vec::with_capacity(retained.len());
        let mut freqs = Vec::with_capacity(retained.len());
        let mut concept_flags = Vec::with_capacity(retained.len());
        for (i, (tok, f)) in retained.into_iter().enumerate() {
            index.insert(tok.clone(), i);
            concept_flags.push(concept_tokens.contains(&tok));
            tokens.push(tok);
            freqs.push(f);
        }

        let stats = CorpusStats {
            raw_freqs: raw,
            sentence_count,
            document_count: 1,
        };
        Ok((
            Vocabulary { tokens, freqs, index, min_count, total_tokens: total, concept_flags },
            stats,
        ))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn freq(&self, idx: usize) -> u64 {
        self.freqs[idx]
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    /// Sum of retained frequencies (the training-stream token count before
    /// subsampling).
    pub fn retained_total(&self) -> u64 {
        self.freqs.iter().sum()
    }

    pub fn is_concept(&self, idx: usize) -> bool {
        self.concept_flags[idx]
    }

    pub fn concept_mask(&self) -> &[bool] {
        &self.concept_flags
    }

    /// Maps a raw sentence to vocabulary indices, dropping out-of-vocab tokens.
    pub fn encode(&self, sentence: &[String]) -> Vec<usize> {
        sentence.iter().filter_map(|t| self.index_of(t)).collect()
    }

    /// Canonical text serialization: `token<TAB>index<TAB>frequency` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\t');
            out.push_str(&self.freqs[i].to_string());
            if self.concept_flags[i] {
                out.push_str("\tC");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        let mut freqs = Vec::new();
        let mut concept_flags = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let tok = parts
                .next()
                .ok_or_else(|| Error::format(path, format!("line {}: missing token", lineno + 1)))?;
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(path, format!("line {}: bad index", lineno + 1)))?;
            let freq: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(path, format!("line {}: bad frequency", lineno + 1)))?;
            if idx != tokens.len() {
                return Err(Error::format(path, format!("line {}: indices not dense", lineno + 1)));
            }
            index.insert(tok.to_string(), idx);
            tokens.push(tok.to_string());
            freqs.push(freq);
            concept_flags.push(parts.next() == Some("C"));
        }
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let total = freqs.iter().sum();
        Ok(Vocabulary {
            tokens,
            freqs,
            index,
            min_count: 0,
            total_tokens: total,
            concept_flags,
        })
    }

    /// SHA-256 of the canonical serialization, hex-encoded. Spaces trained on
    /// different vocabularies are never comparable.
    pub fn fingerprint(&self) -> String {
        use sha2::Digest;
        let mut h = sha2::Sha256::new();
        h.update(self.to_text().as_bytes());
        hex_string(&h.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Reads a transformed token file (one sentence per line, space-separated).
pub fn read_token_file(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|t| t.to_string()).collect())
        .collect())
}

/// Concept ids seen in a tagged corpus, for class-restricted neighbor search.
pub fn concept_ids(sentences: &[TaggedSentence]) -> std::collections::HashSet<String> {
    let mut set = std::collections::HashSet::new();
    for s in sentences {
        for t in &s.tokens {
            if let Token::Concept { id, .. } = t {
                set.insert(id.clone());
            }
        }
    }
    set
}
