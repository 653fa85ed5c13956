//! Character n-gram features.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Counts of every contiguous `n`-character substring.
pub fn char_ngram_counts(text: &str, n: usize) -> Result<BTreeMap<String, u32>> {
    if n == 0 {
        return Err(Error::Param("n-gram length must be at least 1".into()));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut counts = BTreeMap::new();
    for w in chars.windows(n) {
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Gram counts of one text, with the total number of grams in it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GramProfile {
    pub counts: BTreeMap<String, u32>,
    pub total: u64,
}

impl GramProfile {
    pub fn from_text(text: &str, n: usize) -> Result<Self> {
        let counts = char_ngram_counts(text, n)?;
        let total = counts.values().map(|&c| c as u64).sum();
        Ok(GramProfile { counts, total })
    }
}

/// Ordered set of grams, each mapped to a column.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    grams: Vec<String>,
    n: usize,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    n: usize,
    grams: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_sorted(r.grams, r.n)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { n: v.n, grams: v.grams }
    }
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vocabulary")
            .field("n", &self.n)
            .field("len", &self.grams.len())
            .finish()
    }
}

impl Vocabulary {
    fn from_sorted(grams: Vec<String>, n: usize) -> Self {
        let index = grams.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
        Vocabulary { grams, n, index }
    }

    /// Build from any grams; duplicates collapse and order is lexicographic.
    pub fn from_grams<I: IntoIterator<Item = String>>(grams: I, n: usize) -> Self {
        let set: BTreeSet<String> = grams.into_iter().collect();
        Self::from_sorted(set.into_iter().collect(), n)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grams(&self) -> &[String] {
        &self.grams
    }

    pub fn gram(&self, col: usize) -> &str {
        &self.grams[col]
    }

    pub fn column(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).map(|&c| c as usize)
    }
}

/// Grams present in at least `min_df` of the profiles.
pub fn build_vocabulary(profiles: &[&GramProfile], n: usize, min_df: usize) -> Result<Vocabulary> {
    if profiles.is_empty() {
        return Err(Error::Param("cannot build a vocabulary from zero samples".into()));
    }
    let df = document_frequencies(profiles);
    Ok(vocabulary_from_df(&df, n, min_df))
}

pub(crate) fn document_frequencies(profiles: &[&GramProfile]) -> BTreeMap<String, usize> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for p in profiles {
        for g in p.counts.keys() {
            *df.entry(g.clone()).or_insert(0) += 1;
        }
    }
    df
}

pub(crate) fn vocabulary_from_df(df: &BTreeMap<String, usize>, n: usize, min_df: usize) -> Vocabulary {
    let grams = df
        .iter()
        .filter(|(_, &c)| c >= min_df)
        .map(|(g, _)| g.clone())
        .collect();
    Vocabulary::from_sorted(grams, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Counts,
    Relfreq,
    Zscored,
}

/// Sparse row: `(column, value)` pairs in increasing column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<(u32, f64)>,
    pub norm: Norm,
}

impl FeatureVector {
    pub fn get(&self, col: usize) -> f64 {
        self.values
            .binary_search_by_key(&(col as u32), |&(c, _)| c)
            .map(|i| self.values[i].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for &(c, v) in &self.values {
            d[c as usize] = v;
        }
        d
    }

    pub fn from_dense(values: &[f64], norm: Norm) -> Self {
        FeatureVector {
            values: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, &v)| (c as u32, v))
                .collect(),
            norm,
        }
    }
}

/// Map a profile onto the vocabulary as raw counts or relative frequencies.
/// Out-of-vocabulary grams still count toward the relative-frequency total.
pub fn vectorize(profile: &GramProfile, vocab: &Vocabulary, norm: Norm) -> Result<FeatureVector> {
    let denom = match norm {
        Norm::Counts => 1.0,
        Norm::Relfreq => profile.total.max(1) as f64,
        Norm::Zscored => {
            return Err(Error::Param(
                "z-scores need a fitted scaler; vectorize to relfreq first".into(),
            ))
        }
    };
    let mut values: Vec<(u32, f64)> = profile
        .counts
        .iter()
        .filter_map(|(g, &c)| vocab.column(g).map(|col| (col as u32, c as f64 / denom)))
        .collect();
    values.sort_unstable_by_key(|&(c, _)| c);
    Ok(FeatureVector { values, norm })
}

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation per column. A column whose
    /// values are all identical gets std 0.
    pub fn fit(rows: &[&FeatureVector], dim: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut sum = vec![0.0; dim];
        let mut nnz = vec![0usize; dim];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            for &(c, v) in &r.values {
                let c = c as usize;
                sum[c] += v;
                nnz[c] += 1;
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut ss = vec![0.0; dim];
        for r in rows {
            for &(c, v) in &r.values {
                let d = v - means[c as usize];
                ss[c as usize] += d * d;
            }
        }
        let stds = (0..dim)
            .map(|c| {
                let zeros = rows.len() - nnz[c];
                if zeros > 0 {
                    lo[c] = lo[c].min(0.0);
                    hi[c] = hi[c].max(0.0);
                }
                if rows.is_empty() || lo[c] == hi[c] {
                    return 0.0;
                }
                let total = ss[c] + zeros as f64 * means[c] * means[c];
                (total / n).sqrt()
            })
            .collect();
        Scaler { means, stds }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn is_constant(&self, col: usize) -> bool {
        self.stds[col] == 0.0
    }

    pub fn constant_columns(&self) -> usize {
        self.stds.iter().filter(|&&s| s == 0.0).count()
    }

    pub fn apply(&self, x: &FeatureVector) -> Result<FeatureVector> {
        if let Some(&(c, _)) = x.values.last() {
            if c as usize >= self.dim() {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: c as usize + 1,
                });
            }
        }
        let dense = x.to_dense(self.dim());
        let z: Vec<f64> = dense
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                if self.stds[c] == 0.0 {
                    0.0
                } else {
                    (v - self.means[c]) / self.stds[c]
                }
            })
            .collect();
        Ok(FeatureVector::from_dense(&z, Norm::Zscored))
    }
}

/// How profiles become classifier inputs.
pub trait ScalingStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn base_norm(&self) -> Norm;
    fn standardize(&self) -> bool {
        false
    }
}

#[derive(Debug)]
pub struct RawCounts;

#[derive(Debug)]
pub struct RelativeFrequency;

/// Relative frequencies standardized per column.
#[derive(Debug)]
pub struct ZScore;

impl ScalingStrategy for RawCounts {
    fn name(&self) -> &'static str {
        "counts"
    }
    fn base_norm(&self) -> Norm {
        Norm::Counts
    }
}

impl ScalingStrategy for RelativeFrequency {
    fn name(&self) -> &'static str {
        "relfreq"
    }
    fn base_norm(&self) -> Norm {
        Norm::Relfreq
    }
}

impl ScalingStrategy for ZScore {
    fn name(&self) -> &'static str {
        "zscore"
    }
    fn base_norm(&self) -> Norm {
        Norm::Relfreq
    }
    fn standardize(&self) -> bool {
        true
    }
}

pub fn scaling_registry() -> Registry<dyn ScalingStrategy> {
    let mut r: Registry<dyn ScalingStrategy> = Registry::new("scaling");
    r.register("counts", Arc::new(RawCounts));
    r.register("relfreq", Arc::new(RelativeFrequency));
    r.register("zscore", Arc::new(ZScore));
    r
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n: usize,
    pub min_df: usize,
    pub scaling: String,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            n: 3,
            min_df: 2,
            scaling: "zscore".into(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Param("feature n must be at least 1".into()));
        }
        scaling_registry().get(&self.scaling)?;
        Ok(())
    }
}

/// A fitted vocabulary plus scaling, able to turn profiles into rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub vocab: Vocabulary,
    pub scaling: String,
    pub base_norm: Norm,
    pub scaler: Option<Scaler>,
}

impl FeatureSpace {
    /// Fit on training profiles and return the space with the training rows.
    pub fn fit(profiles: &[&GramProfile], cfg: &FeatureConfig) -> Result<(Self, Vec<FeatureVector>)> {
        let vocab = build_vocabulary(profiles, cfg.n, cfg.min_df)?;
        Self::fit_with_vocab(profiles, vocab, cfg)
    }

    pub fn fit_with_vocab(
        profiles: &[&GramProfile],
        vocab: Vocabulary,
        cfg: &FeatureConfig,
    ) -> Result<(Self, Vec<FeatureVector>)> {
        let strategy = scaling_registry().get(&cfg.scaling)?;
        let base_norm = strategy.base_norm();
        let mut rows = profiles
            .iter()
            .map(|p| vectorize(p, &vocab, base_norm))
            .collect::<Result<Vec<_>>>()?;
        let scaler = if strategy.standardize() {
            let refs: Vec<&FeatureVector> = rows.iter().collect();
            let s = Scaler::fit(&refs, vocab.len());
            rows = rows.iter().map(|r| s.apply(r)).collect::<Result<_>>()?;
            Some(s)
        } else {
            None
        };
        Ok((
            FeatureSpace {
                vocab,
                scaling: strategy.name().to_string(),
                base_norm,
                scaler,
            },
            rows,
        ))
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn transform(&self, profile: &GramProfile) -> Result<FeatureVector> {
        let v = vectorize(profile, &self.vocab, self.base_norm)?;
        match &self.scaler {
            Some(s) => {
                if s.dim() != self.vocab.len() {
                    return Err(Error::Dimension {
                        expected: self.vocab.len(),
                        got: s.dim(),
                    });
                }
                s.apply(&v)
            }
            None => Ok(v),
        }
    }
}

/// Grams for a two-class correspondence analysis: total count at least
/// `min_total_count`, optionally present in both classes.
pub fn select_ca_features(
    samples: &[(&str, &GramProfile)],
    n: usize,
    min_total_count: u64,
    require_both_classes: bool,
) -> Result<Vocabulary> {
    let classes: BTreeSet<&str> = samples.iter().map(|(c, _)| *c).collect();
    if classes.len() != 2 {
        return Err(Error::Param(format!(
            "feature selection needs exactly two classes, got {}",
            classes.len()
        )));
    }
    let mut total: BTreeMap<&str, u64> = BTreeMap::new();
    let mut seen_in: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (class, p) in samples {
        for (g, &c) in &p.counts {
            *total.entry(g.as_str()).or_insert(0) += c as u64;
            seen_in.entry(g.as_str()).or_default().insert(class);
        }
    }
    let grams = total
        .into_iter()
        .filter(|(g, t)| *t >= min_total_count && (!require_both_classes || seen_in[g].len() == 2))
        .map(|(g, _)| g.to_string());
    Ok(Vocabulary::from_grams(grams, n))
}

/// Sparse triplets `row,gram,value` for every nonzero cell.
pub fn write_triplets<W: Write>(rows: &[(&str, &FeatureVector)], vocab: &Vocabulary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "gram", "value"])?;
    for (id, fv) in rows {
        for &(c, v) in &fv.values {
            w.write_record([*id, vocab.gram(c as usize), &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn write_vocabulary<W: Write>(vocab: &Vocabulary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["column", "gram"])?;
    for (i, g) in vocab.grams().iter().enumerate() {
        w.write_record([i.to_string().as_str(), g])?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(g, c)| (g.to_string(), *c)).collect()
    }

    fn profile(text: &str) -> GramProfile {
        GramProfile::from_text(text, 3).unwrap()
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(
            char_ngram_counts("the_cat", 3).unwrap(),
            counts(&[("the", 1), ("he_", 1), ("e_c", 1), ("_ca", 1), ("cat", 1)])
        );
        assert!(char_ngram_counts("ab", 3).unwrap().is_empty());
        assert_eq!(char_ngram_counts("aaaa", 3).unwrap(), counts(&[("aaa", 2)]));
        assert!(char_ngram_counts("abc", 0).is_err());
        // grams are over characters, not bytes
        assert_eq!(char_ngram_counts("été", 3).unwrap(), counts(&[("été", 1)]));
    }

    #[test]
    fn vocabulary_min_df() {
        let a = profile("abcd");
        let b = profile("abcx");
        let v = build_vocabulary(&[&a, &b], 3, 2).unwrap();
        assert_eq!(v.grams(), ["abc"]);
        let v1 = build_vocabulary(&[&a, &b], 3, 1).unwrap();
        assert_eq!(v1.grams(), ["abc", "bcd", "bcx"]);
        assert_eq!(v1.column("bcx"), Some(2));
        let twin = build_vocabulary(&[&a, &a], 3, 2).unwrap();
        assert_eq!(twin.grams(), ["abc", "bcd"]);
        assert!(build_vocabulary(&[], 3, 2).is_err());
    }

    #[test]
    fn vocabulary_serde_rebuilds_index() {
        let v = Vocabulary::from_grams(["zzz".to_string(), "aaa".to_string()], 3);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.column("zzz"), Some(1));
    }

    #[test]
    fn vectorize_examples() {
        let vocab = Vocabulary::from_grams(["the".to_string(), "cat".to_string()], 3);
        let p = GramProfile {
            counts: counts(&[("the", 2), ("cat", 2)]),
            total: 4,
        };
        let v = vectorize(&p, &vocab, Norm::Relfreq).unwrap();
        assert_eq!(v.to_dense(2), vec![0.5, 0.5]);

        let oov = GramProfile {
            counts: counts(&[("dog", 3)]),
            total: 3,
        };
        assert!(vectorize(&oov, &vocab, Norm::Relfreq).unwrap().values.is_empty());

        let mixed = GramProfile {
            counts: counts(&[("the", 1), ("dog", 3)]),
            total: 4,
        };
        let v = vectorize(&mixed, &vocab, Norm::Relfreq).unwrap();
        assert_eq!(v.get(vocab.column("the").unwrap()), 0.25);

        let rep = profile("aaaaaaaaaa");
        let vocab = Vocabulary::from_grams(["aaa".to_string()], 3);
        assert_eq!(vectorize(&rep, &vocab, Norm::Relfreq).unwrap().get(0), 1.0);
        assert_eq!(vectorize(&rep, &vocab, Norm::Counts).unwrap().get(0), 8.0);
    }

    #[test]
    fn scaler_examples() {
        let rows: Vec<FeatureVector> = [[1.0, 5.0, 0.3], [3.0, 5.0, 0.1], [5.0, 5.0, 0.2]]
            .iter()
            .map(|r| FeatureVector::from_dense(r, Norm::Relfreq))
            .collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let s = Scaler::fit(&refs, 3);
        assert!(s.is_constant(1));
        assert_eq!(s.constant_columns(), 1);
        let at_mean = FeatureVector::from_dense(&[3.0, 1.0, 0.2], Norm::Relfreq);
        let z = s.apply(&at_mean).unwrap().to_dense(3);
        assert!(z[0].abs() < 1e-12);
        assert_eq!(z[1], 0.0);

        let one = Scaler::fit(&refs[..1], 3);
        let z = one.apply(&rows[2]).unwrap();
        assert!(z.values.is_empty());

        let wide = FeatureVector::from_dense(&[0.0, 0.0, 0.0, 1.0], Norm::Relfreq);
        assert!(s.apply(&wide).is_err());
    }

    #[test]
    fn scaler_constant_column_with_inexact_mean() {
        let rows: Vec<FeatureVector> = (0..3).map(|_| FeatureVector::from_dense(&[0.1], Norm::Relfreq)).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let s = Scaler::fit(&refs, 1);
        assert!(s.is_constant(0));
        assert!(s.apply(&rows[0]).unwrap().values.is_empty());
    }

    #[test]
    fn feature_space_zscore() {
        let texts = ["abcabcabd", "abdabdabc", "xbcabcxbd"];
        let profiles: Vec<GramProfile> = texts.iter().map(|t| profile(t)).collect();
        let refs: Vec<&GramProfile> = profiles.iter().collect();
        let cfg = FeatureConfig {
            scaling: "zscore".into(),
            ..FeatureConfig::default()
        };
        let (space, rows) = FeatureSpace::fit(&refs, &cfg).unwrap();
        assert!(space.scaler.is_some());
        assert_eq!(rows[1], space.transform(&profiles[1]).unwrap());
        let bad = FeatureConfig {
            scaling: "tfidf".into(),
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ca_selection() {
        let a = profile("aaaa_bbb");
        let b = profile("bbb_cccc");
        let both = select_ca_features(&[("A", &a), ("B", &b)], 3, 1, true).unwrap();
        assert_eq!(both.grams(), ["bbb"]);
        let all = select_ca_features(&[("A", &a), ("B", &b)], 3, 1, false).unwrap();
        let union: BTreeSet<&String> = a.counts.keys().chain(b.counts.keys()).collect();
        assert_eq!(all.len(), union.len());
        let freq = select_ca_features(&[("A", &a), ("B", &b)], 3, 2, false).unwrap();
        assert_eq!(freq.grams(), ["aaa", "bbb", "ccc"]);
        assert!(select_ca_features(&[("A", &a), ("A", &b)], 3, 1, false).is_err());
    }

    #[test]
    fn triplet_export() {
        let vocab = Vocabulary::from_grams(["a,b".to_string(), "cat".to_string()], 3);
        let fv = FeatureVector::from_dense(&[0.25, 0.0], Norm::Relfreq);
        let mut buf = Vec::new();
        write_triplets(&[("s1", &fv)], &vocab, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,gram,value\ns1,\"a,b\",0.25\n");
        let mut buf = Vec::new();
        write_vocabulary(&vocab, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "column,gram\n0,\"a,b\"\n1,cat\n");
    }
}
