//! Synthetic authors for tests, demos and the bundled example corpus.
//!
//! Each author is an order-2 character Markov chain over a 23-letter
//! alphabet plus space. Chains share a common base table and differ by an
//! author-specific component whose share is `distinctness`. The letters
//! `q`, `x` and `z` never occur, so grams built from them can be planted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Genre};

pub const ALPHABET: &[u8] = b"abcdefghijklmnoprstuvwy ";
const SPACE: usize = ALPHABET.len() - 1;
const SYMBOLS: usize = ALPHABET.len();

type Table = Vec<[f64; SYMBOLS]>;

fn random_table(rng: &mut impl Rng) -> Table {
    (0..SYMBOLS * SYMBOLS)
        .map(|_| {
            let mut row = [0.0; SYMBOLS];
            for p in row.iter_mut() {
                *p = rng.random::<f64>().powi(3);
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MarkovAuthor {
    pub name: String,
    // cumulative distributions per context
    cdf: Table,
}

impl MarkovAuthor {
    fn from_mix(name: &str, base: &Table, own: &Table, distinctness: f64) -> Self {
        let cdf = base
            .iter()
            .zip(own)
            .enumerate()
            .map(|(ctx, (b, o))| {
                let prev = ctx % SYMBOLS;
                let bsum: f64 = b.iter().sum();
                let osum: f64 = o.iter().sum();
                let mut row = [0.0; SYMBOLS];
                for s in 0..SYMBOLS {
                    row[s] = (1.0 - distinctness) * b[s] / bsum + distinctness * o[s] / osum;
                }
                // words average about five letters; never two spaces in a row
                row[SPACE] = if prev == SPACE { 0.0 } else { 0.2 };
                let total: f64 = row.iter().sum();
                let mut acc = 0.0;
                for p in row.iter_mut() {
                    acc += *p / total;
                    *p = acc;
                }
                row[SYMBOLS - 1] = 1.0;
                row
            })
            .collect();
        MarkovAuthor {
            name: name.to_string(),
            cdf,
        }
    }

    fn next(&self, a: usize, b: usize, rng: &mut impl Rng) -> usize {
        let row = &self.cdf[a * SYMBOLS + b];
        let u: f64 = rng.random();
        row.iter().position(|&c| u < c).unwrap_or(SYMBOLS - 1)
    }

    /// Generate `n` words.
    pub fn words(&self, n: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        let mut word = String::new();
        let (mut a, mut b) = (SPACE, SPACE);
        while out.len() < n {
            let c = self.next(a, b, rng);
            if c == SPACE {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
            } else {
                word.push(ALPHABET[c] as char);
                if word.len() > 14 {
                    out.push(std::mem::take(&mut word));
                    a = c;
                    b = SPACE;
                    continue;
                }
            }
            a = b;
            b = c;
        }
        out
    }

    /// `n` words as prose: sentences of 6 to 16 words ending in a period.
    pub fn text(&self, n: usize, rng: &mut impl Rng) -> String {
        let words = self.words(n, rng);
        sentences(&words, rng)
    }
}

/// Join words into period-terminated sentences.
pub fn sentences(words: &[String], rng: &mut impl Rng) -> String {
    let mut s = String::new();
    let mut left = rng.random_range(6..=16);
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(w);
        left -= 1;
        if left == 0 || i + 1 == words.len() {
            s.push('.');
            left = rng.random_range(6..=16);
        }
    }
    s
}

/// A family of synthetic authors built from one seed.
#[derive(Debug, Clone)]
pub struct SyntheticAuthors {
    pub authors: Vec<MarkovAuthor>,
}

impl SyntheticAuthors {
    /// Authors named `author0`, `author1`, ...
    pub fn new(count: usize, distinctness: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_table(&mut rng);
        let authors = (0..count)
            .map(|i| {
                let own = random_table(&mut rng);
                MarkovAuthor::from_mix(&format!("author{i}"), &base, &own, distinctness)
            })
            .collect();
        SyntheticAuthors { authors }
    }

    pub fn get(&self, name: &str) -> Option<&MarkovAuthor> {
        self.authors.iter().find(|a| a.name == name)
    }
}

/// One document per author with `words` words of prose.
pub fn author_documents(authors: &SyntheticAuthors, words: usize, genre: Genre, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    authors
        .authors
        .iter()
        .enumerate()
        .map(|(i, a)| Document {
            id: format!("{}-{}", a.name, genre),
            author: a.name.clone(),
            raw_text: a.text(words, &mut rng),
            genre,
            platform: "synthetic".into(),
            date_start: None,
            date_end: None,
            order_key: i as i64,
        })
        .collect()
}

/// Insert `token` as a standalone word every `every` words.
pub fn salt_words(words: &mut Vec<String>, token: &str, every: usize) {
    let mut i = every.min(words.len());
    while i <= words.len() {
        words.insert(i, token.to_string());
        i += every + 1;
    }
}

/// Small demonstration corpora: a five-author training corpus with mixed
/// genres and planted cross-author copies, and a dated target whose first
/// half is written by `author0` and second half by `author1`.
pub fn demo_corpora(seed: u64) -> (Corpus, Corpus) {
    let fam = SyntheticAuthors::new(5, 0.3, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut docs = Vec::new();
    let mut push = |author: &MarkovAuthor, genre: Genre, k: usize, text: String, month: usize| {
        let date = format!("2015-{month:02}-01");
        docs.push(Document {
            id: format!("{}-{}-{k}", author.name, genre),
            author: author.name.clone(),
            raw_text: text,
            genre,
            platform: "synthetic".into(),
            date_start: Some(date.clone()),
            date_end: Some(date),
            order_key: docs.len() as i64,
        });
    };
    let mut copied = Vec::new();
    for (i, a) in fam.authors.iter().enumerate() {
        for k in 0..3 {
            let mut text = a.text(1500, &mut rng);
            if i == 0 && k == 0 {
                copied = text.split_inclusive(". ").skip(2).step_by(4).take(3).map(str::to_string).collect();
            }
            if i == 2 && k == 1 {
                for s in &copied {
                    text.push(' ');
                    text.push_str(s.trim_end());
                }
            }
            push(a, Genre::Article, k, text, k + 1);
        }
        let extra = match i {
            3 => Genre::Book,
            4 => Genre::Transcript,
            _ => Genre::Letter,
        };
        push(a, extra, 0, a.text(2200, &mut rng), 6);
    }
    let mut target = Vec::new();
    for k in 0..6 {
        let a = &fam.authors[k / 3];
        let date = format!("2016-{:02}-15", k + 1);
        target.push(Document {
            id: format!("drop-{k}"),
            author: "unknown".into(),
            raw_text: a.text(1200, &mut rng),
            genre: Genre::Other,
            platform: "synthetic".into(),
            date_start: Some(date.clone()),
            date_end: Some(date),
            order_key: k as i64,
        });
    }
    (Corpus { documents: docs }, Corpus { documents: target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_alphabet_bound() {
        let fam = SyntheticAuthors::new(2, 0.5, 3);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let a = fam.authors[0].words(500, &mut r1);
        assert_eq!(a, fam.authors[0].words(500, &mut r2));
        assert_eq!(a.len(), 500);
        assert!(a.iter().all(|w| !w.is_empty() && w.len() <= 15));
        assert!(a.iter().all(|w| !w.contains(['q', 'x', 'z'])));
        let mean = a.iter().map(String::len).sum::<usize>() as f64 / a.len() as f64;
        assert!((2.0..9.0).contains(&mean), "mean word length {mean}");
    }

    #[test]
    fn salting() {
        let mut w: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        salt_words(&mut w, "qzx", 4);
        assert_eq!(w.iter().filter(|t| *t == "qzx").count(), 2);
        assert_eq!(w[4], "qzx");
    }
}
