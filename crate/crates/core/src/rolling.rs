//! Rolling-window attribution of a chronologically ordered target text.

use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenSeq};
use crate::error::{Error, Result};
use crate::features::GramProfile;
use crate::svm::{argmax, MulticlassLinearModel};
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub window: usize,
    pub step: usize,
    /// Minimum length of a truncated last window; `None` means `window`,
    /// so a short tail never forms its own window.
    pub min_final: Option<usize>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            window: 1000,
            step: 200,
            min_final: None,
        }
    }
}

impl RollingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step > self.window {
            return Err(Error::Param(format!(
                "rolling step must satisfy 1 <= step <= window, got step={} window={}",
                self.step, self.window
            )));
        }
        if self.min_final == Some(0) {
            return Err(Error::Param("min_final must be at least 1".into()));
        }
        Ok(())
    }

    fn min_final(&self) -> usize {
        self.min_final.unwrap_or(self.window).min(self.window)
    }
}

/// Spans `[k*step, k*step + window)` that fit in `len` tokens, plus one
/// truncated span ending at `len` when it reaches `min_final` tokens.
pub fn rolling_windows(len: usize, cfg: &RollingConfig) -> Result<Vec<Range<usize>>> {
    cfg.validate()?;
    let min_final = cfg.min_final();
    if len < min_final {
        return Err(Error::TargetTooShort { len, min: min_final });
    }
    let mut spans = Vec::new();
    let mut start = 0;
    while start + cfg.window <= len {
        spans.push(start..start + cfg.window);
        start += cfg.step;
    }
    let covered = spans.last().map_or(0, |s| s.end);
    if covered < len && len - start >= min_final {
        spans.push(start..len);
    }
    Ok(spans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub first_drop: String,
    pub last_drop: String,
    pub first_date: String,
    pub last_date: String,
    /// Aligned with the trace's classes.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingTrace {
    pub classes: Vec<String>,
    pub windows: Vec<WindowScore>,
    pub model_hash: String,
}

impl RollingTrace {
    /// Index of the winning class per window.
    pub fn winners(&self) -> Vec<usize> {
        self.windows.iter().map(|w| argmax(&w.scores)).collect()
    }
}

/// Score every window of the target with the model's decision functions.
pub fn rolling_attribution(
    model: &MulticlassLinearModel,
    target: &Corpus,
    cfg: &RollingConfig,
) -> Result<RollingTrace> {
    let dim = model.space.vocab.len();
    if let Some(w) = model.ovr.weights.iter().find(|w| w.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: w.len(),
        });
    }
    if let Some(s) = &model.space.scaler {
        if s.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: s.dim(),
            });
        }
    }
    let seq = TokenSeq::from_documents(target.chronological(), &model.norm);
    let spans = rolling_windows(seq.len(), cfg)?;
    let sep = model.norm.whitespace_token;
    let n = model.space.vocab.n();
    let windows = spans
        .par_iter()
        .enumerate()
        .map(|(index, span)| {
            let text = seq.joined(span.clone(), sep);
            let scores = model.score_profile(&GramProfile::from_text(&text, n)?)?;
            let first = seq.source_of(span.start);
            let last = seq.source_of(span.end - 1);
            Ok(WindowScore {
                index,
                start: span.start,
                end: span.end,
                first_drop: first.doc_id.clone(),
                last_drop: last.doc_id.clone(),
                first_date: first.date_start.clone().or(first.date_end.clone()).unwrap_or_default(),
                last_date: last.date_end.clone().or(last.date_start.clone()).unwrap_or_default(),
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RollingTrace {
        classes: model.classes().to_vec(),
        windows,
        model_hash: sha256_hex(model.to_json()?.as_bytes()),
    })
}

const TRACE_HEADER: [&str; 9] = [
    "window_idx",
    "start",
    "end",
    "first_drop",
    "last_drop",
    "first_date",
    "last_date",
    "class",
    "score",
];

/// Long format: one row per (window, class).
pub fn write_trace<W: Write>(trace: &RollingTrace, mut out: W) -> Result<()> {
    writeln!(out, "# model_hash={}", trace.model_hash).map_err(|e| Error::Data(e.to_string()))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for win in &trace.windows {
        for (class, score) in trace.classes.iter().zip(&win.scores) {
            w.write_record([
                win.index.to_string().as_str(),
                &win.start.to_string(),
                &win.end.to_string(),
                &win.first_drop,
                &win.last_drop,
                &win.first_date,
                &win.last_date,
                class,
                &score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[derive(Deserialize)]
struct TraceRow {
    window_idx: usize,
    start: usize,
    end: usize,
    first_drop: String,
    last_drop: String,
    first_date: String,
    last_date: String,
    class: String,
    score: f64,
}

pub fn read_trace<R: Read>(input: R) -> Result<RollingTrace> {
    let mut reader = BufReader::new(input);
    let mut model_hash = String::new();
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line).map_err(|e| Error::Data(e.to_string()))? > 0 {
        match line.strip_prefix('#') {
            Some(c) => {
                if let Some(h) = c.trim().strip_prefix("model_hash=") {
                    model_hash = h.to_string();
                }
            }
            None => body.push_str(&line),
        }
        line.clear();
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut classes: Vec<String> = Vec::new();
    let mut windows: Vec<WindowScore> = Vec::new();
    for row in r.deserialize::<TraceRow>() {
        let row = row?;
        let ci = match classes.iter().position(|c| *c == row.class) {
            Some(i) => i,
            None => {
                if windows.len() > 1 {
                    return Err(Error::Data(format!("class {} appears late in trace", row.class)));
                }
                classes.push(row.class.clone());
                classes.len() - 1
            }
        };
        if windows.last().is_none_or(|w| w.index != row.window_idx) {
            windows.push(WindowScore {
                index: row.window_idx,
                start: row.start,
                end: row.end,
                first_drop: row.first_drop,
                last_drop: row.last_drop,
                first_date: row.first_date,
                last_date: row.last_date,
                scores: Vec::new(),
            });
        }
        let w = windows.last_mut().expect("pushed above");
        if w.scores.len() != ci {
            return Err(Error::Data(format!("window {} has classes out of order", w.index)));
        }
        w.scores.push(row.score);
    }
    if windows.iter().any(|w| w.scores.len() != classes.len()) {
        return Err(Error::Data("trace has windows with missing classes".into()));
    }
    Ok(RollingTrace {
        classes,
        windows,
        model_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(window: usize, step: usize, min_final: Option<usize>) -> RollingConfig {
        RollingConfig {
            window,
            step,
            min_final,
        }
    }

    #[test]
    fn window_examples() {
        let d = RollingConfig::default();
        let w = rolling_windows(2600, &d).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(w.iter().map(|s| s.start).collect::<Vec<_>>(), (0..=1600).step_by(200).collect::<Vec<_>>());
        assert_eq!(rolling_windows(1000, &d).unwrap(), vec![0..1000]);
        assert!(matches!(
            rolling_windows(999, &d),
            Err(Error::TargetTooShort { len: 999, min: 1000 })
        ));
    }

    #[test]
    fn truncated_final_window() {
        // full windows at 0 and 4 cover up to 14; tail start 8 has 7 tokens
        let w = rolling_windows(15, &cfg(10, 4, Some(5))).unwrap();
        assert_eq!(w, vec![0..10, 4..14, 8..15]);
        let w = rolling_windows(15, &cfg(10, 4, Some(8))).unwrap();
        assert_eq!(w, vec![0..10, 4..14]);
        assert_eq!(rolling_windows(6, &cfg(10, 4, Some(5))).unwrap(), vec![0..6]);
        assert!(rolling_windows(4, &cfg(10, 4, Some(5))).is_err());
    }

    #[test]
    fn invalid_config() {
        assert!(rolling_windows(100, &cfg(10, 0, None)).is_err());
        assert!(rolling_windows(100, &cfg(10, 11, None)).is_err());
    }

    fn sample_trace(windows: usize, classes: usize) -> RollingTrace {
        RollingTrace {
            classes: (0..classes).map(|c| format!("author{c}")).collect(),
            windows: (0..windows)
                .map(|i| WindowScore {
                    index: i,
                    start: i * 200,
                    end: i * 200 + 1000,
                    first_drop: format!("q{i}"),
                    last_drop: format!("q{}", i + 3),
                    first_date: "2017-10-28".into(),
                    last_date: String::new(),
                    scores: (0..classes).map(|c| (c as f64 - i as f64) / 3.0).collect(),
                })
                .collect(),
            model_hash: "abc123".into(),
        }
    }

    #[test]
    fn trace_export_rows_and_roundtrip() {
        let t = sample_trace(9, 13);
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2 + 117);
        assert_eq!(read_trace(buf.as_slice()).unwrap(), t);

        let empty = RollingTrace {
            classes: vec![],
            windows: vec![],
            model_hash: "h".into(),
        };
        let mut buf = Vec::new();
        write_trace(&empty, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), TRACE_HEADER.join(","));
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_trace(buf.as_slice()).unwrap(), empty);
    }
}
