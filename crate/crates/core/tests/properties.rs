use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use stylo::ca::{correspondence_analysis, ContingencyTable};
use stylo::corpus::{normalize_text, segment_samples, tokenize_words, Document, Genre, NormConfig, SamplingConfig, TokenSeq};
use stylo::features::{char_ngram_counts, vectorize, FeatureVector, GramProfile, Norm, Scaler, Vocabulary};
use stylo::reuse::{jaccard, skip_bigrams};
use stylo::rolling::{rolling_windows, RollingConfig};

fn doc(text: &str) -> Document {
    Document {
        id: "d".into(),
        author: "a".into(),
        raw_text: text.into(),
        genre: Genre::Other,
        platform: String::new(),
        date_start: None,
        date_end: None,
        order_key: 0,
    }
}

proptest! {
    #[test]
    fn normalization_is_idempotent(raw in "\\PC{0,80}") {
        let cfg = NormConfig::default();
        let once = normalize_text(&raw, &cfg);
        prop_assert_eq!(normalize_text(&once, &cfg), once.clone());
        prop_assert!(!once.starts_with('_') && !once.ends_with('_'));
        prop_assert!(!once.contains("__"));
    }

    #[test]
    fn segmentation_conserves_tokens(words in prop::collection::vec("[a-z]{1,6}", 0..300), len in 1usize..60) {
        let norm = NormConfig::default();
        let seq = TokenSeq::from_document(&doc(&words.join(" ")), &norm);
        prop_assert_eq!(seq.len(), words.len());
        let drop = SamplingConfig { sample_len: len, min_keep: None };
        let samples = segment_samples(&seq, "a", Genre::Other, &drop).unwrap();
        prop_assert_eq!(samples.len(), words.len() / len);
        prop_assert!(samples.iter().all(|s| s.tokens.len() == len));
        let keep = SamplingConfig { sample_len: len, min_keep: Some(1) };
        let all = segment_samples(&seq, "a", Genre::Other, &keep).unwrap();
        let joined: Vec<String> = all.iter().flat_map(|s| s.tokens.tokens.clone()).collect();
        prop_assert_eq!(joined, words);
    }

    #[test]
    fn jaccard_symmetric_and_bounded(a in prop::collection::vec("[a-d]", 0..12), b in prop::collection::vec("[a-d]", 0..12)) {
        let (sa, sb) = (skip_bigrams(&a), skip_bigrams(&b));
        let j = jaccard(&sa, &sb);
        prop_assert_eq!(j, jaccard(&sb, &sa));
        prop_assert!((0.0..=1.0).contains(&j));
        if !sa.is_empty() {
            prop_assert_eq!(jaccard(&sa, &sa), 1.0);
        }
    }

    #[test]
    fn gram_counts_are_conserved(text in "[a-c_]{0,60}", n in 1usize..5) {
        let counts = char_ngram_counts(&text, n).unwrap();
        let total: u64 = counts.values().map(|&c| c as u64).sum();
        prop_assert_eq!(total as usize, (text.chars().count() + 1).saturating_sub(n));
    }

    #[test]
    fn relfreq_sums_to_at_most_one(text in "[a-c_]{3,60}", keep in prop::collection::vec(any::<bool>(), 27)) {
        let profile = GramProfile::from_text(&text, 3).unwrap();
        let grams: Vec<String> = profile.counts.keys().zip(keep.iter().cycle()).filter(|(_, k)| **k).map(|(g, _)| g.clone()).collect();
        let vocab = Vocabulary::from_grams(grams, 3);
        let v = vectorize(&profile, &vocab, Norm::Relfreq).unwrap();
        let sum: f64 = v.values.iter().map(|(_, x)| x).sum();
        prop_assert!(sum <= 1.0 + 1e-12);
        prop_assert!(v.values.iter().all(|(_, x)| *x > 0.0));
    }

    #[test]
    fn scaler_standardizes(rows in prop::collection::vec(prop::collection::vec(-5i32..5, 4), 2..20)) {
        let fvs: Vec<FeatureVector> = rows
            .iter()
            .map(|r| FeatureVector::from_dense(&r.iter().map(|&x| x as f64).collect::<Vec<_>>(), Norm::Counts))
            .collect();
        let refs: Vec<&FeatureVector> = fvs.iter().collect();
        let s = Scaler::fit(&refs, 4);
        let scaled: Vec<Vec<f64>> = fvs.iter().map(|f| s.apply(f).unwrap().to_dense(4)).collect();
        let n = rows.len() as f64;
        for c in 0..4 {
            let mean = scaled.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = scaled.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if s.is_constant(c) {
                prop_assert!(var < 1e-18);
            } else {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn window_count_formula(len in 0usize..5000, window in 1usize..600, step_frac in 0.01f64..1.0) {
        let step = ((window as f64 * step_frac).ceil() as usize).clamp(1, window);
        let cfg = RollingConfig { window, step, min_final: None };
        match rolling_windows(len, &cfg) {
            Ok(spans) => {
                prop_assert_eq!(spans.len(), (len - window) / step + 1);
                let covered: BTreeSet<usize> = spans.iter().flat_map(|s| s.clone()).collect();
                prop_assert_eq!(covered.len(), spans.last().unwrap().end);
                for t in 0..spans.last().unwrap().end {
                    let k = spans.iter().filter(|s| s.contains(&t)).count();
                    prop_assert!(k >= 1 && k <= window.div_ceil(step));
                }
            }
            Err(_) => prop_assert!(len < window),
        }
    }

    #[test]
    fn ca_barycenter(cells in prop::collection::vec(1u32..30, 24)) {
        let m = DMatrix::from_fn(4, 6, |i, j| cells[i * 6 + j] as f64);
        let t = ContingencyTable::new(
            (0..4).map(|i| i.to_string()).collect(),
            (0..6).map(|j| j.to_string()).collect(),
            m,
        ).unwrap();
        let r = correspondence_analysis(&t).unwrap();
        prop_assert!(r.axes() <= 3);
        prop_assert!(r.inertias.windows(2).all(|w| w[0] >= w[1]));
        for a in 0..r.axes() {
            let rows: f64 = (0..4).map(|i| r.row_masses[i] * r.row_principal[(i, a)]).sum();
            let cols: f64 = (0..6).map(|j| r.col_masses[j] * r.col_principal[(j, a)]).sum();
            prop_assert!(rows.abs() < 1e-9 && cols.abs() < 1e-9);
        }
    }
}

#[test]
fn tokenize_matches_normalized_words() {
    let cfg = NormConfig::default();
    let n = normalize_text("  Hello,  WORLD!  it's   fine ", &cfg);
    assert_eq!(n, "hello_world_its_fine");
    assert_eq!(tokenize_words(&n, &cfg), ["hello", "world", "its", "fine"]);
}
