//! Leave-one-out evaluation and classification metrics.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{document_frequencies, vocabulary_from_df, FeatureConfig, FeatureSpace, FeatureVector, GramProfile};
use crate::svm::{train_ovr, HyperParams};

/// Rows are expected classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if k == 0 {
            return Err(Error::Param("confusion matrix needs at least one class".into()));
        }
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Param(format!("confusion counts must be {k}x{k}")));
        }
        if classes.iter().collect::<BTreeSet<_>>().len() != k {
            return Err(Error::Param("duplicate class in confusion matrix".into()));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Table layout: header of predicted classes, one row per expected class.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["expected\\predicted".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for (c, row) in self.classes.iter().zip(&self.counts) {
            let mut rec = vec![c.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}

pub fn confusion_matrix<S: AsRef<str>, T: AsRef<str>>(
    classes: &[S],
    expected: &[T],
    predicted: &[T],
) -> Result<ConfusionMatrix> {
    if expected.len() != predicted.len() {
        return Err(Error::Param(format!(
            "{} expected labels but {} predictions",
            expected.len(),
            predicted.len()
        )));
    }
    if expected.is_empty() || classes.is_empty() {
        return Err(Error::Param("confusion matrix of empty input".into()));
    }
    let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
    let k = classes.len();
    let index = |l: &str| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::UnknownClass(l.to_string()))
    };
    let mut counts = vec![vec![0u64; k]; k];
    for (e, p) in expected.iter().zip(predicted) {
        counts[index(e.as_ref())?][index(p.as_ref())?] += 1;
    }
    ConfusionMatrix::from_counts(classes, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
    /// Classes with an empty predicted column, whose precision is set to 0.
    pub never_predicted: Vec<String>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> MetricsTable {
    let total = cm.total();
    let mut never_predicted = Vec::new();
    let classes: Vec<ClassMetrics> = (0..cm.len())
        .map(|i| {
            let tp = cm.counts[i][i];
            let col = cm.col_sum(i);
            let support = cm.row_sum(i);
            if col == 0 {
                never_predicted.push(cm.classes[i].clone());
            }
            let precision = ratio(tp, col);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                class: cm.classes[i].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let k = classes.len().max(1) as f64;
    let macro_avg = Averages {
        precision: classes.iter().map(|c| c.precision).sum::<f64>() / k,
        recall: classes.iter().map(|c| c.recall).sum::<f64>() / k,
        f1: classes.iter().map(|c| c.f1).sum::<f64>() / k,
    };
    let wsum = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let weighted_avg = Averages {
        precision: wsum(|c| c.precision),
        recall: wsum(|c| c.recall),
        f1: wsum(|c| c.f1),
    };
    MetricsTable {
        accuracy: ratio(cm.trace(), total),
        classes,
        macro_avg,
        weighted_avg,
        total,
        never_predicted,
    }
}

impl MetricsTable {
    /// Table layout: `class,precision,recall,f1-score,support`, then the
    /// accuracy, macro and weighted rows. `decimals` rounds the metrics.
    pub fn write_csv<W: Write>(&self, out: W, decimals: Option<usize>) -> Result<()> {
        let fmt = |v: f64| match decimals {
            Some(d) => format!("{v:.d$}"),
            None => v.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "precision", "recall", "f1-score", "support"])?;
        for c in &self.classes {
            w.write_record([
                c.class.clone(),
                fmt(c.precision),
                fmt(c.recall),
                fmt(c.f1),
                c.support.to_string(),
            ])?;
        }
        let total = self.total.to_string();
        w.write_record(["accuracy", "", "", &fmt(self.accuracy), &total])?;
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            w.write_record([name, &fmt(a.precision), &fmt(a.recall), &fmt(a.f1), &total])?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooResult {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsTable,
    /// Prediction per sample; `None` for skipped folds.
    pub predictions: Vec<Option<String>>,
    pub folds: usize,
}

/// Leave-one-out over samples. Each fold refits the vocabulary, scaling,
/// class weights and classifiers on the remaining samples.
pub fn loo_evaluate<S: AsRef<str> + Sync>(
    profiles: &[&GramProfile],
    labels: &[S],
    features: &FeatureConfig,
    hp: &HyperParams,
) -> Result<LooResult> {
    if profiles.len() != labels.len() {
        return Err(Error::Param(format!(
            "{} profiles but {} labels",
            profiles.len(),
            labels.len()
        )));
    }
    features.validate()?;
    hp.validate()?;
    let classes: Vec<String> = labels
        .iter()
        .map(|l| l.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::Param(format!(
            "leave-one-out needs at least two classes, got {}",
            classes.len()
        )));
    }
    let skip: BTreeSet<&str> = classes
        .iter()
        .map(String::as_str)
        .filter(|c| labels.iter().filter(|l| l.as_ref() == *c).count() < 2)
        .collect();
    for c in &skip {
        log::warn!("class {c} has fewer than two samples; its folds are skipped");
    }
    let df = document_frequencies(profiles);

    let predictions = (0..profiles.len())
        .into_par_iter()
        .map(|held| -> Result<Option<String>> {
            if skip.contains(labels[held].as_ref()) {
                return Ok(None);
            }
            let mut fold_df = df.clone();
            for g in profiles[held].counts.keys() {
                if let Some(c) = fold_df.get_mut(g) {
                    *c -= 1;
                }
            }
            let vocab = vocabulary_from_df(&fold_df, features.n, features.min_df);
            let train_idx: Vec<usize> = (0..profiles.len()).filter(|&i| i != held).collect();
            let train_profiles: Vec<&GramProfile> = train_idx.iter().map(|&i| profiles[i]).collect();
            let train_labels: Vec<&str> = train_idx.iter().map(|&i| labels[i].as_ref()).collect();
            let (space, rows) = FeatureSpace::fit_with_vocab(&train_profiles, vocab, features)?;
            let refs: Vec<&FeatureVector> = rows.iter().collect();
            let ovr = train_ovr(&refs, &train_labels, space.dim(), hp)?;
            let x = space.transform(profiles[held])?;
            Ok(Some(ovr.predict(&x)?.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let (expected, predicted): (Vec<&str>, Vec<&str>) = labels
        .iter()
        .zip(&predictions)
        .filter_map(|(l, p)| p.as_deref().map(|p| (l.as_ref(), p)))
        .unzip();
    let folds = expected.len();
    let confusion = confusion_matrix(&classes, &expected, &predicted)?;
    let metrics = classification_metrics(&confusion);
    Ok(LooResult {
        confusion,
        metrics,
        predictions,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_scores_one() {
        let cm = confusion_matrix(&["a", "b"], &["a", "b", "b"], &["a", "b", "b"]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0], vec![0, 2]]);
        let m = classification_metrics(&cm);
        for c in &m.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_avg.f1, 1.0);
        assert_eq!(m.weighted_avg.precision, 1.0);
    }

    #[test]
    fn confusion_errors() {
        assert!(confusion_matrix::<&str, &str>(&["a"], &[], &[]).is_err());
        assert!(matches!(
            confusion_matrix(&["a"], &["a"], &["z"]),
            Err(Error::UnknownClass(_))
        ));
        assert!(confusion_matrix(&["a"], &["a", "a"], &["a"]).is_err());
    }

    #[test]
    fn never_predicted_class_gets_zero_precision() {
        let cm = confusion_matrix(&["a", "b"], &["a", "b"], &["a", "a"]).unwrap();
        let m = classification_metrics(&cm);
        assert_eq!(m.never_predicted, vec!["b".to_string()]);
        assert_eq!(m.classes[1].precision, 0.0);
        assert_eq!(m.classes[1].f1, 0.0);
        assert_eq!(m.classes[0].precision, 0.5);
    }

    #[test]
    fn metrics_csv_layout() {
        let cm = confusion_matrix(&["a", "b"], &["a", "b"], &["a", "a"]).unwrap();
        let mut buf = Vec::new();
        classification_metrics(&cm).write_csv(&mut buf, Some(2)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "class,precision,recall,f1-score,support\n\
             a,0.50,1.00,0.67,1\n\
             b,0.00,0.00,0.00,1\n\
             accuracy,,,0.50,2\n\
             macro avg,0.25,0.50,0.33,2\n\
             weighted avg,0.25,0.50,0.33,2\n"
        );
        let mut buf = Vec::new();
        cm.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "expected\\predicted,a,b\na,1,0\nb,1,0\n");
    }

    #[test]
    fn loo_needs_two_classes() {
        let p = GramProfile::from_text("abcdef", 3).unwrap();
        let r = loo_evaluate(&[&p, &p], &["a", "a"], &FeatureConfig::default(), &HyperParams::default());
        assert!(r.is_err());
    }
}
