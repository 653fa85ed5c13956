//! Text-reuse detection between sentences.
//!
//! Sentences are shingled into skip-bigrams (ordered word pairs at distance
//! one or two), sketched with MinHash, bucketed by banded LSH, and the
//! surviving candidate pairs are confirmed with the exact Jaccard score.
//! Confirmed pairs go to a CSV review file; a human fills in the verdict
//! column and the file is fed back to [`apply_redactions`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, sentence_spans, tokenize_words, Corpus, Document, NormConfig};
use crate::error::{Error, Result};

pub type Shingle = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc_id: String,
    pub sentence: usize,
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.sentence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub shingles: BTreeSet<Shingle>,
    pub sentence_ref: SentenceRef,
}

/// All ordered pairs `(t[i], t[i+1])` and `(t[i], t[i+2])`.
pub fn skip_bigrams<S: AsRef<str>>(tokens: &[S]) -> BTreeSet<Shingle> {
    let mut out = BTreeSet::new();
    for i in 0..tokens.len() {
        for gap in 1..=2 {
            if let Some(t) = tokens.get(i + gap) {
                out.insert((tokens[i].as_ref().to_string(), t.as_ref().to_string()));
            }
        }
    }
    out
}

/// `|A ∩ B| / |A ∪ B|`, or 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

// FNV-1a over the two words with a unit separator between them.
fn shingle_key(s: &Shingle) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = s.0.bytes().chain(std::iter::once(0x1f)).chain(s.1.bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// murmur3 finalizer
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
    pub k: usize,
}

impl MinHashSignature {
    /// Fraction of positions where two signatures agree.
    pub fn match_rate(&self, other: &MinHashSignature) -> f64 {
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.k.max(1) as f64
    }
}

/// A family of `k` seeded hash functions.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    salts: Vec<u64>,
}

impl MinHasher {
    pub fn new(seed: u64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Param("MinHash length k must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let salts = (0..k).map(|_| rng.next_u64()).collect();
        Ok(MinHasher { seed, salts })
    }

    pub fn k(&self) -> usize {
        self.salts.len()
    }

    pub fn signature(&self, shingles: &BTreeSet<Shingle>) -> Result<MinHashSignature> {
        if shingles.is_empty() {
            return Err(Error::Param("cannot sketch an empty shingle set".into()));
        }
        let mut values = vec![u64::MAX; self.salts.len()];
        for s in shingles {
            let key = shingle_key(s);
            for (v, salt) in values.iter_mut().zip(&self.salts) {
                *v = (*v).min(fmix64(key ^ salt));
            }
        }
        Ok(MinHashSignature {
            values,
            seed: self.seed,
            k: self.salts.len(),
        })
    }
}

pub fn minhash_signature(shingles: &BTreeSet<Shingle>, seed: u64, k: usize) -> Result<MinHashSignature> {
    MinHasher::new(seed, k)?.signature(shingles)
}

/// Index pairs `(i, j)`, `i < j`, whose signatures agree on every row of at
/// least one band. Sorted, without duplicates.
pub fn lsh_candidates(signatures: &[MinHashSignature], bands: usize, rows: usize) -> Result<Vec<(usize, usize)>> {
    if bands == 0 || rows == 0 {
        return Err(Error::Param("bands and rows must be at least 1".into()));
    }
    let k = bands * rows;
    if let Some(bad) = signatures.iter().find(|s| s.values.len() != k) {
        return Err(Error::Param(format!(
            "bands x rows = {k} does not match signature length {}",
            bad.values.len()
        )));
    }
    let mut pairs = BTreeSet::new();
    for band in 0..bands {
        let cols = band * rows..(band + 1) * rows;
        let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for (i, s) in signatures.iter().enumerate() {
            buckets.entry(&s.values[cols.clone()]).or_default().push(i);
        }
        for members in buckets.values() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    pairs.insert((i, j));
                }
            }
        }
    }
    Ok(pairs.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Keep,
    /// Remove both sentences.
    Redact,
    RedactA,
    RedactB,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pending => "pending",
            Verdict::Keep => "keep",
            Verdict::Redact => "redact",
            Verdict::RedactA => "redact_a",
            Verdict::RedactB => "redact_b",
        }
    }

    fn redacts(self) -> (bool, bool) {
        match self {
            Verdict::Pending | Verdict::Keep => (false, false),
            Verdict::Redact => (true, true),
            Verdict::RedactA => (true, false),
            Verdict::RedactB => (false, true),
        }
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "" | "pending" => Verdict::Pending,
            "keep" => Verdict::Keep,
            "redact" => Verdict::Redact,
            "redact_a" => Verdict::RedactA,
            "redact_b" => Verdict::RedactB,
            other => return Err(Error::Param(format!("unknown verdict {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReusePair {
    pub ref_a: SentenceRef,
    pub ref_b: SentenceRef,
    pub author_a: String,
    pub author_b: String,
    pub jaccard: f64,
    pub text_a: String,
    pub text_b: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReuseConfig {
    pub num_hashes: usize,
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ReuseConfig {
    fn default() -> Self {
        ReuseConfig {
            num_hashes: 200,
            bands: 50,
            rows: 4,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl ReuseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands * self.rows != self.num_hashes {
            return Err(Error::Param(format!(
                "bands ({}) x rows ({}) must equal num_hashes ({})",
                self.bands, self.rows, self.num_hashes
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Param(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

struct SentenceEntry<'a> {
    doc: &'a Document,
    sref: SentenceRef,
    text: &'a str,
    shingles: BTreeSet<Shingle>,
}

fn shingle_tokens(sentence: &str) -> Vec<String> {
    let norm = NormConfig::default();
    tokenize_words(&normalize_text(sentence, &norm), &norm)
}

fn corpus_sentences(corpus: &Corpus) -> Vec<SentenceEntry<'_>> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        for (idx, span) in sentence_spans(&doc.raw_text).into_iter().enumerate() {
            let text = &doc.raw_text[span];
            let shingles = skip_bigrams(&shingle_tokens(text));
            if shingles.is_empty() {
                continue;
            }
            out.push(SentenceEntry {
                doc,
                sref: SentenceRef {
                    doc_id: doc.id.clone(),
                    sentence: idx,
                },
                text,
                shingles,
            });
        }
    }
    out
}

/// Candidate reuse pairs at or above the threshold, best first.
///
/// Pairs between sentences of the same author default to `keep`; all
/// others are left `pending` for review.
pub fn reuse_report(corpus: &Corpus, cfg: &ReuseConfig) -> Result<Vec<ReusePair>> {
    cfg.validate()?;
    let sentences = corpus_sentences(corpus);
    let hasher = MinHasher::new(cfg.seed, cfg.num_hashes)?;
    let signatures = sentences
        .par_iter()
        .map(|s| hasher.signature(&s.shingles))
        .collect::<Result<Vec<_>>>()?;
    let candidates = lsh_candidates(&signatures, cfg.bands, cfg.rows)?;
    log::info!(
        "reuse: {} sentences, {} LSH candidate pairs",
        sentences.len(),
        candidates.len()
    );
    let mut pairs: Vec<ReusePair> = candidates
        .into_iter()
        .filter_map(|(i, j)| {
            let (a, b) = (&sentences[i], &sentences[j]);
            let score = jaccard(&a.shingles, &b.shingles);
            (score >= cfg.threshold).then(|| ReusePair {
                ref_a: a.sref.clone(),
                ref_b: b.sref.clone(),
                author_a: a.doc.author.clone(),
                author_b: b.doc.author.clone(),
                jaccard: score,
                text_a: a.text.to_string(),
                text_b: b.text.to_string(),
                verdict: if a.doc.author == b.doc.author {
                    Verdict::Keep
                } else {
                    Verdict::Pending
                },
            })
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.jaccard
            .total_cmp(&x.jaccard)
            .then_with(|| x.ref_a.cmp(&y.ref_a))
            .then_with(|| x.ref_b.cmp(&y.ref_b))
    });
    Ok(pairs)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReviewRow {
    pair_id: usize,
    doc_a: String,
    sent_a: usize,
    doc_b: String,
    sent_b: usize,
    jaccard: f64,
    text_a: String,
    text_b: String,
    verdict: String,
}

pub fn write_review<W: Write>(pairs: &[ReusePair], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if pairs.is_empty() {
        w.write_record([
            "pair_id", "doc_a", "sent_a", "doc_b", "sent_b", "jaccard", "text_a", "text_b", "verdict",
        ])?;
    }
    for (i, p) in pairs.iter().enumerate() {
        w.serialize(ReviewRow {
            pair_id: i + 1,
            doc_a: p.ref_a.doc_id.clone(),
            sent_a: p.ref_a.sentence,
            doc_b: p.ref_b.doc_id.clone(),
            sent_b: p.ref_b.sentence,
            jaccard: p.jaccard,
            text_a: p.text_a.clone(),
            text_b: p.text_b.clone(),
            verdict: p.verdict.as_str().to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub ref_a: SentenceRef,
    pub ref_b: SentenceRef,
    pub verdict: Verdict,
}

/// Read a reviewed file. Lines starting with `#` are ignored.
pub fn read_decisions<R: Read>(input: R) -> Result<Vec<Decision>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<ReviewRow>() {
        let row = row?;
        out.push(Decision {
            ref_a: SentenceRef {
                doc_id: row.doc_a,
                sentence: row.sent_a,
            },
            ref_b: SentenceRef {
                doc_id: row.doc_b,
                sentence: row.sent_b,
            },
            verdict: row.verdict.parse()?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RedactionSummary {
    pub sentences_removed: usize,
    pub dropped_documents: Vec<String>,
    pub pending: usize,
}

/// Delete redacted sentences from the raw texts.
///
/// Only the sides a verdict redacts must exist in `corpus`, so a decision
/// can remove a sentence from a candidate while the other side lives in a
/// separate target corpus. Documents left without words are dropped.
pub fn apply_redactions(corpus: &Corpus, decisions: &[Decision]) -> Result<(Corpus, RedactionSummary)> {
    let mut summary = RedactionSummary::default();
    let mut cut: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for d in decisions {
        if d.verdict == Verdict::Pending {
            summary.pending += 1;
        }
        let (ra, rb) = d.verdict.redacts();
        for (flag, r) in [(ra, &d.ref_a), (rb, &d.ref_b)] {
            if flag {
                let doc = corpus.get(&r.doc_id).ok_or_else(|| Error::UnknownSentence {
                    doc: r.doc_id.clone(),
                    sentence: r.sentence,
                })?;
                if r.sentence >= sentence_spans(&doc.raw_text).len() {
                    return Err(Error::UnknownSentence {
                        doc: r.doc_id.clone(),
                        sentence: r.sentence,
                    });
                }
                cut.entry(doc.id.as_str()).or_default().insert(r.sentence);
            }
        }
    }
    if summary.pending > 0 {
        log::warn!("{} reuse pairs still pending review; treated as keep", summary.pending);
    }
    let norm = NormConfig::default();
    let mut documents = Vec::with_capacity(corpus.len());
    for doc in &corpus.documents {
        let Some(idx) = cut.get(doc.id.as_str()) else {
            documents.push(doc.clone());
            continue;
        };
        let spans = sentence_spans(&doc.raw_text);
        let mut text = String::with_capacity(doc.raw_text.len());
        let mut pos = 0;
        for &i in idx {
            text.push_str(&doc.raw_text[pos..spans[i].start]);
            pos = spans[i].end;
        }
        text.push_str(&doc.raw_text[pos..]);
        summary.sentences_removed += idx.len();
        if tokenize_words(&normalize_text(&text, &norm), &norm).is_empty() {
            log::warn!("document {} is empty after redaction; dropped", doc.id);
            summary.dropped_documents.push(doc.id.clone());
            continue;
        }
        documents.push(Document {
            raw_text: text,
            ..doc.clone()
        });
    }
    Ok((Corpus { documents }, summary))
}
