//! Corpus ingestion and preparation.
//!
//! A corpus is described by a line-delimited JSON manifest, one document per
//! line. Each record carries `id`, `author` and either an inline `text` or a
//! `path` to a UTF-8 text file (resolved relative to the manifest). Optional
//! fields: `genre`, `platform`, `date_start`, `date_end`, `order_key`.
//!
//! ```text
//! {"id":"d1","author":"alice","genre":"tweet","text":"Hello there."}
//! {"id":"d2","author":"bob","genre":"book","path":"texts/bob.txt","order_key":7}
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genre {
    Tweet,
    ForumPost,
    Article,
    Book,
    Chat,
    Letter,
    Transcript,
    #[default]
    Other,
}

impl Genre {
    pub const ALL: [Genre; 8] = [
        Genre::Tweet,
        Genre::ForumPost,
        Genre::Article,
        Genre::Book,
        Genre::Chat,
        Genre::Letter,
        Genre::Transcript,
        Genre::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Tweet => "tweet",
            Genre::ForumPost => "forum_post",
            Genre::Article => "article",
            Genre::Book => "book",
            Genre::Chat => "chat",
            Genre::Letter => "letter",
            Genre::Transcript => "transcript",
            Genre::Other => "other",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Genre::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown genre {s:?}")))
    }
}

/// One source text with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub author: String,
    pub raw_text: String,
    #[serde(default)]
    pub genre: Genre,
    #[serde(default)]
    pub platform: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_end: Option<String>,
    pub order_key: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRecord {
    id: Option<String>,
    author: Option<String>,
    text: Option<String>,
    path: Option<String>,
    #[serde(default)]
    genre: Option<Genre>,
    #[serde(default)]
    platform: Option<String>,
    date_start: Option<String>,
    date_end: Option<String>,
    order_key: Option<i64>,
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    id: &'a str,
    author: &'a str,
    text: &'a str,
    genre: Genre,
    platform: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    date_start: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    date_end: Option<&'a str>,
    order_key: i64,
}

fn check_date(record: &str, field: &str, value: &str) -> Result<()> {
    let b = value.as_bytes();
    let digits = |r: Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    let ok = b.len() >= 10
        && digits(0..4)
        && b[4] == b'-'
        && digits(5..7)
        && b[7] == b'-'
        && digits(8..10)
        && (b.len() == 10 || b[10] == b'T' || b[10] == b' ');
    if ok {
        Ok(())
    } else {
        Err(Error::Record {
            record: record.to_string(),
            message: format!("{field} {value:?} is not an ISO-8601 date"),
        })
    }
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
            if d.author.is_empty() {
                return Err(Error::Record {
                    record: d.id.clone(),
                    message: "empty author".into(),
                });
            }
        }
        Ok(Corpus { documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Distinct author labels in sorted order.
    pub fn authors(&self) -> Vec<String> {
        self.documents
            .iter()
            .map(|d| d.author.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Load a corpus from a manifest file.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_manifest(&content, base)
    }

    /// Parse manifest content; `path` fields resolve against `base`.
    pub fn parse_manifest(content: &str, base: &Path) -> Result<Self> {
        let mut documents = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = lineno + 1;
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| Error::Manifest {
                line: lineno,
                message: e.to_string(),
            })?;
            let id = rec.id.filter(|s| !s.is_empty()).ok_or(Error::Manifest {
                line: lineno,
                message: "record has no id".into(),
            })?;
            let missing = |what: &str| Error::Record {
                record: id.clone(),
                message: format!("missing {what}"),
            };
            let author = rec
                .author
                .filter(|s| !s.is_empty())
                .ok_or_else(|| missing("author"))?;
            let raw_text = match (rec.text, rec.path) {
                (Some(t), None) => t,
                (None, Some(p)) => {
                    let p = base.join(p);
                    fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?
                }
                (Some(_), Some(_)) => {
                    return Err(Error::Record {
                        record: id,
                        message: "both text and path given".into(),
                    })
                }
                (None, None) => return Err(missing("text or path")),
            };
            if raw_text.trim().is_empty() {
                return Err(Error::Record {
                    record: id,
                    message: "empty text".into(),
                });
            }
            for (field, value) in [("date_start", &rec.date_start), ("date_end", &rec.date_end)] {
                if let Some(v) = value {
                    check_date(&id, field, v)?;
                }
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            let order_key = rec.order_key.unwrap_or(documents.len() as i64);
            documents.push(Document {
                id,
                author,
                raw_text,
                genre: rec.genre.unwrap_or_default(),
                platform: rec.platform.unwrap_or_default(),
                date_start: rec.date_start,
                date_end: rec.date_end,
                order_key,
            });
        }
        Ok(Corpus { documents })
    }

    /// Write the corpus as a manifest with inline texts.
    pub fn write_manifest(&self, mut out: impl Write) -> std::io::Result<()> {
        for d in &self.documents {
            let rec = ManifestOut {
                id: &d.id,
                author: &d.author,
                text: &d.raw_text,
                genre: d.genre,
                platform: &d.platform,
                date_start: d.date_start.as_deref(),
                date_end: d.date_end.as_deref(),
                order_key: d.order_key,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Documents in chronological order: `order_key`, then start date,
    /// then manifest position.
    pub fn chronological(&self) -> Vec<&Document> {
        let mut docs: Vec<(usize, &Document)> = self.documents.iter().enumerate().collect();
        docs.sort_by(|(ia, a), (ib, b)| {
            a.order_key
                .cmp(&b.order_key)
                .then_with(|| a.date_start.cmp(&b.date_start))
                .then(ia.cmp(ib))
        });
        docs.into_iter().map(|(_, d)| d).collect()
    }
}

/// Text normalization settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub whitespace_token: char,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            lowercase: true,
            strip_punctuation: true,
            whitespace_token: '_',
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.whitespace_token;
        if t.is_alphanumeric() || t.is_whitespace() {
            return Err(Error::Param(format!(
                "whitespace_token {t:?} must not be a letter, digit or whitespace"
            )));
        }
        Ok(())
    }
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Lowercase, strip punctuation, and join whitespace-separated words with
/// the separator character.
///
/// A literal separator character in the input counts as whitespace, which
/// keeps the transformation idempotent.
pub fn normalize_text(raw: &str, cfg: &NormConfig) -> String {
    let sep = cfg.whitespace_token;
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.chars() {
        if c.is_whitespace() || c == sep {
            pending_sep = !out.is_empty();
            continue;
        }
        if cfg.strip_punctuation && is_punctuation(c) {
            continue;
        }
        if pending_sep {
            out.push(sep);
            pending_sep = false;
        }
        if cfg.lowercase {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Split normalized text into words on the separator character.
pub fn tokenize_words(normalized: &str, cfg: &NormConfig) -> Vec<String> {
    normalized
        .split(cfg.whitespace_token)
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Byte spans of the sentences of raw text, trimmed of surrounding
/// whitespace. A sentence ends after a run of `.`, `!` or `?`, or at a
/// line break.
pub fn sentence_spans(raw: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut push = |start: usize, end: usize| {
        let seg = &raw[start..end];
        let lead = seg.len() - seg.trim_start().len();
        let trimmed = seg.trim();
        if !trimmed.is_empty() {
            spans.push(start + lead..start + lead + trimmed.len());
        }
    };
    let mut start = 0;
    let mut chars = raw.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' {
            push(start, i);
            start = i + 1;
        } else if is_terminal(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if !is_terminal(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            push(start, end);
            start = end;
        }
    }
    push(start, raw.len());
    spans
}

pub fn split_sentences(raw: &str) -> Vec<String> {
    sentence_spans(raw)
        .into_iter()
        .map(|r| raw[r].to_string())
        .collect()
}

/// Where a token came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSource {
    pub doc_id: String,
    pub order_key: i64,
    pub date_start: Option<String>,
    pub date_end: Option<String>,
}

impl TokenSource {
    pub fn of(doc: &Document) -> Self {
        TokenSource {
            doc_id: doc.id.clone(),
            order_key: doc.order_key,
            date_start: doc.date_start.clone(),
            date_end: doc.date_end.clone(),
        }
    }
}

/// Words with per-token provenance. `provenance[i]` indexes `sources`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub provenance: Vec<u32>,
    pub sources: Vec<TokenSource>,
}

impl TokenSeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_document(doc: &Document, cfg: &NormConfig) -> Self {
        let mut seq = TokenSeq::new();
        seq.push_document(doc, cfg);
        seq
    }

    /// Concatenate documents in the given order.
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>, cfg: &NormConfig) -> Self {
        let mut seq = TokenSeq::new();
        for d in docs {
            seq.push_document(d, cfg);
        }
        seq
    }

    pub fn push_document(&mut self, doc: &Document, cfg: &NormConfig) {
        let tokens = tokenize_words(&normalize_text(&doc.raw_text, cfg), cfg);
        if tokens.is_empty() {
            return;
        }
        let src = self.sources.len() as u32;
        self.sources.push(TokenSource::of(doc));
        self.provenance.extend(std::iter::repeat_n(src, tokens.len()));
        self.tokens.extend(tokens);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_of(&self, token: usize) -> &TokenSource {
        &self.sources[self.provenance[token] as usize]
    }

    /// Copy of tokens `range`, with only the sources it references.
    pub fn slice(&self, range: Range<usize>) -> TokenSeq {
        let mut out = TokenSeq::new();
        let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
        for i in range {
            let old = self.provenance[i];
            let new = *remap.entry(old).or_insert_with(|| {
                out.sources.push(self.sources[old as usize].clone());
                (out.sources.len() - 1) as u32
            });
            out.tokens.push(self.tokens[i].clone());
            out.provenance.push(new);
        }
        out
    }

    /// Tokens `range` joined by the separator.
    pub fn joined(&self, range: Range<usize>, sep: char) -> String {
        let mut s = String::new();
        for (k, t) in self.tokens[range].iter().enumerate() {
            if k > 0 {
                s.push(sep);
            }
            s.push_str(t);
        }
        s
    }
}

/// Fixed-length training unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub author: String,
    pub genre: Genre,
    pub tokens: TokenSeq,
    pub doc_ids: BTreeSet<String>,
}

impl Sample {
    pub fn text(&self, sep: char) -> String {
        self.tokens.joined(0..self.tokens.len(), sep)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub sample_len: usize,
    /// Keep a trailing short sample when it has at least this many tokens.
    /// `None` drops every short remainder.
    pub min_keep: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            sample_len: 1000,
            min_keep: None,
        }
    }
}

/// Cut one author/genre stream into consecutive non-overlapping samples.
pub fn segment_samples(
    seq: &TokenSeq,
    author: &str,
    genre: Genre,
    cfg: &SamplingConfig,
) -> Result<Vec<Sample>> {
    if cfg.sample_len == 0 {
        return Err(Error::Param("sample_len must be at least 1".into()));
    }
    let n = seq.len();
    let mut bounds: Vec<Range<usize>> = (0..n / cfg.sample_len)
        .map(|k| k * cfg.sample_len..(k + 1) * cfg.sample_len)
        .collect();
    let tail = n % cfg.sample_len;
    if tail > 0 && cfg.min_keep.is_some_and(|m| tail >= m.max(1)) {
        bounds.push(n - tail..n);
    }
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let tokens = seq.slice(r);
            let doc_ids = tokens.sources.iter().map(|s| s.doc_id.clone()).collect();
            Sample {
                id: format!("{author}/{genre}/{k}"),
                author: author.to_string(),
                genre,
                tokens,
                doc_ids,
            }
        })
        .collect())
}

/// Build samples for the whole corpus. Documents of the same author and
/// genre are concatenated chronologically; samples never mix genres.
pub fn build_samples(corpus: &Corpus, norm: &NormConfig, cfg: &SamplingConfig) -> Result<Vec<Sample>> {
    let mut groups: BTreeMap<(&str, Genre), Vec<&Document>> = BTreeMap::new();
    for d in corpus.chronological() {
        groups.entry((d.author.as_str(), d.genre)).or_default().push(d);
    }
    let mut out = Vec::new();
    for ((author, genre), docs) in groups {
        let seq = TokenSeq::from_documents(docs, norm);
        out.extend(segment_samples(&seq, author, genre, cfg)?);
    }
    Ok(out)
}

/// Documents and authors to exclude when deriving a subcorpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub excluded_genres: BTreeSet<Genre>,
    pub excluded_authors: BTreeSet<String>,
    pub min_author_tokens: usize,
}

pub fn filter_corpus(corpus: &Corpus, spec: &FilterSpec, norm: &NormConfig) -> Corpus {
    let kept: Vec<&Document> = corpus
        .documents
        .iter()
        .filter(|d| !spec.excluded_genres.contains(&d.genre) && !spec.excluded_authors.contains(&d.author))
        .collect();
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    if spec.min_author_tokens > 0 {
        for d in &kept {
            let n = tokenize_words(&normalize_text(&d.raw_text, norm), norm).len();
            *totals.entry(d.author.as_str()).or_default() += n;
        }
    }
    let documents = kept
        .into_iter()
        .filter(|d| spec.min_author_tokens == 0 || totals[d.author.as_str()] >= spec.min_author_tokens)
        .cloned()
        .collect();
    Corpus { documents }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, author: &str, genre: Genre, text: &str, order_key: i64) -> Document {
        Document {
            id: id.into(),
            author: author.into(),
            raw_text: text.into(),
            genre,
            platform: String::new(),
            date_start: None,
            date_end: None,
            order_key,
        }
    }

    fn words(n: usize, w: &str) -> String {
        vec![w; n].join(" ")
    }

    #[test]
    fn normalize_examples() {
        let cfg = NormConfig::default();
        assert_eq!(normalize_text("Fight, fight, fight!", &cfg), "fight_fight_fight");
        assert_eq!(normalize_text("", &cfg), "");
        assert_eq!(normalize_text("FAKE  News", &cfg), "fake_news");
        assert_eq!(normalize_text("  «Don't» — stop \n\t now… ", &cfg), "dont_stop_now");
        assert_eq!(normalize_text("snake_case", &cfg), "snake_case");
    }

    #[test]
    fn normalize_keeps_punctuation_when_asked() {
        let cfg = NormConfig {
            strip_punctuation: false,
            lowercase: false,
            ..NormConfig::default()
        };
        assert_eq!(normalize_text("Hi,  you!", &cfg), "Hi,_you!");
    }

    #[test]
    fn separator_must_not_be_alphanumeric() {
        for t in ['a', '7', ' '] {
            let cfg = NormConfig {
                whitespace_token: t,
                ..NormConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
        assert!(NormConfig::default().validate().is_ok());
    }

    #[test]
    fn tokenize_examples() {
        let cfg = NormConfig::default();
        assert_eq!(tokenize_words("fight_fight_fight", &cfg).len(), 3);
        assert!(tokenize_words("", &cfg).is_empty());
        assert_eq!(tokenize_words("a_b_c_d", &cfg), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn sentence_examples() {
        assert_eq!(split_sentences("A b. C d!"), vec!["A b.", "C d!"]);
        assert_eq!(split_sentences("one line\ntwo line").len(), 2);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("Really?! Yes...\n\nNo"), vec!["Really?!", "Yes...", "No"]);
    }

    #[test]
    fn sentence_spans_index_raw_bytes() {
        let raw = "  Été là. Ça va?\r\nfin";
        for r in sentence_spans(raw) {
            assert!(!raw[r].trim().is_empty());
        }
        assert_eq!(split_sentences(raw), vec!["Été là.", "Ça va?", "fin"]);
    }

    #[test]
    fn segment_counts() {
        let cfg = NormConfig::default();
        let sc = SamplingConfig::default();
        for (n, expect) in [(2500, 2), (999, 0), (1000, 1)] {
            let d = doc("d", "a", Genre::Tweet, &words(n, "w"), 0);
            let seq = TokenSeq::from_document(&d, &cfg);
            let s = segment_samples(&seq, "a", Genre::Tweet, &sc).unwrap();
            assert_eq!(s.len(), expect, "{n} tokens");
            assert!(s.iter().all(|s| s.tokens.len() == 1000));
        }
        let seq = TokenSeq::from_document(&doc("d", "a", Genre::Tweet, "x y", 0), &cfg);
        let bad = SamplingConfig {
            sample_len: 0,
            min_keep: None,
        };
        assert!(segment_samples(&seq, "a", Genre::Tweet, &bad).is_err());
    }

    #[test]
    fn segment_keeps_tail_above_threshold() {
        let cfg = NormConfig::default();
        let d = doc("d", "a", Genre::Tweet, &words(25, "w"), 0);
        let seq = TokenSeq::from_document(&d, &cfg);
        let keep = SamplingConfig {
            sample_len: 10,
            min_keep: Some(5),
        };
        let s = segment_samples(&seq, "a", Genre::Tweet, &keep).unwrap();
        assert_eq!(s.iter().map(|s| s.tokens.len()).collect::<Vec<_>>(), vec![10, 10, 5]);
    }

    #[test]
    fn samples_pool_documents_but_not_genres() {
        let cfg = NormConfig::default();
        let corpus = Corpus::new(vec![
            doc("t2", "a", Genre::Tweet, &words(6, "later"), 2),
            doc("t1", "a", Genre::Tweet, &words(6, "early"), 1),
            doc("b1", "a", Genre::Book, &words(6, "book"), 0),
        ])
        .unwrap();
        let sc = SamplingConfig {
            sample_len: 10,
            min_keep: None,
        };
        let samples = build_samples(&corpus, &cfg, &sc).unwrap();
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert_eq!(s.genre, Genre::Tweet);
        assert_eq!(s.tokens.tokens[0], "early");
        assert_eq!(s.tokens.tokens[9], "later");
        assert_eq!(s.doc_ids.iter().collect::<Vec<_>>(), vec!["t1", "t2"]);
        assert_eq!(s.tokens.source_of(9).doc_id, "t2");
    }

    #[test]
    fn manifest_parsing() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "Bob wrote this.").unwrap();
        let ok = r#"{"id":"d1","author":"alice","text":"Hi there.","genre":"tweet"}
# comment

{"id":"d2","author":"bob","path":"b.txt","date_start":"2020-01-02"}"#;
        let c = Corpus::parse_manifest(ok, dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents[1].raw_text, "Bob wrote this.");
        assert_eq!(c.documents[0].order_key, 0);
        assert_eq!(c.documents[1].order_key, 1);
        assert_eq!(c.documents[1].genre, Genre::Other);

        let dup = r#"{"id":"d1","author":"a","text":"x"}
{"id":"d1","author":"b","text":"y"}"#;
        let err = Corpus::parse_manifest(dup, dir.path()).unwrap_err();
        assert!(err.to_string().contains("d1"), "{err}");

        let missing = r#"{"id":"d3","author":"a","path":"nope.txt"}"#;
        let err = Corpus::parse_manifest(missing, dir.path()).unwrap_err();
        assert!(err.to_string().contains("nope.txt"), "{err}");

        let no_author = r#"{"id":"d4","text":"x"}"#;
        let err = Corpus::parse_manifest(no_author, dir.path()).unwrap_err();
        assert!(err.to_string().contains("d4"), "{err}");

        let bad_date = r#"{"id":"d5","author":"a","text":"x","date_end":"May 2"}"#;
        assert!(Corpus::parse_manifest(bad_date, dir.path()).is_err());
    }

    #[test]
    fn manifest_write_roundtrip() {
        let c = Corpus::new(vec![
            doc("a1", "a", Genre::Book, "Some \"quoted\" text.\nLine two.", 4),
            doc("b1", "b", Genre::Chat, "hey", 9),
        ])
        .unwrap();
        let mut buf = Vec::new();
        c.write_manifest(&mut buf).unwrap();
        let back = Corpus::parse_manifest(std::str::from_utf8(&buf).unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn filter_examples() {
        let cfg = NormConfig::default();
        let c = Corpus::new(vec![
            doc("p_book", "paul", Genre::Book, &words(50, "x"), 0),
            doc("p_tw", "paul", Genre::Tweet, &words(20, "x"), 1),
            doc("r_tw", "ron", Genre::Tweet, &words(30, "x"), 2),
        ])
        .unwrap();
        let no_books = FilterSpec {
            excluded_genres: [Genre::Book].into(),
            ..FilterSpec::default()
        };
        let f = filter_corpus(&c, &no_books, &cfg);
        assert!(f.get("p_book").is_none());
        assert_eq!(f.len(), 2);

        assert_eq!(filter_corpus(&c, &FilterSpec::default(), &cfg), c);

        let huge = FilterSpec {
            min_author_tokens: 1000,
            ..FilterSpec::default()
        };
        assert!(filter_corpus(&c, &huge, &cfg).is_empty());

        let both = FilterSpec {
            excluded_genres: [Genre::Book].into(),
            min_author_tokens: 25,
            ..FilterSpec::default()
        };
        let f = filter_corpus(&c, &both, &cfg);
        assert_eq!(f.authors(), vec!["ron".to_string()]);
    }
}
