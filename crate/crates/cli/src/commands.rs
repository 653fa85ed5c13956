use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stylo::ca::{correspondence_analysis, project_profile, write_coordinates, ContingencyTable};
use stylo::corpus::{build_samples, filter_corpus, Corpus, Sample, TokenSeq};
use stylo::eval::loo_evaluate;
use stylo::features::{select_ca_features, GramProfile};
use stylo::reuse::{apply_redactions, read_decisions, reuse_report, write_review};
use stylo::rolling::{rolling_attribution, rolling_windows, write_trace};
use stylo::svm::MulticlassLinearModel;
use stylo::util::sha256_hex;

use crate::config::{LoadedConfig, RunConfig};
use crate::{CliError, Command};

/// Everything a subcommand needs: validated config and output location.
pub struct Context {
    pub cfg: RunConfig,
    pub base: PathBuf,
    pub hash: String,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(loaded: LoadedConfig, out: Option<PathBuf>) -> Result<Self, CliError> {
        let out_dir = out.unwrap_or_else(|| loaded.base.join(&loaded.cfg.output_dir));
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Context {
            cfg: loaded.cfg,
            base: loaded.base,
            hash: loaded.hash,
            out_dir,
        })
    }

    pub fn header(&self) -> String {
        format!(
            "# config_hash={} seed_minhash={} seed_solver={}\n",
            self.hash, self.cfg.seeds.minhash, self.cfg.seeds.solver
        )
    }

    fn write(&self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Header line followed by whatever `fill` writes.
    fn write_with_header(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = self.header().into_bytes();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    /// Training corpus with the configured decisions applied.
    pub fn training_corpus(&self) -> Result<Corpus, CliError> {
        let corpus = Corpus::load_manifest(self.base.join(&self.cfg.corpus))?;
        match &self.cfg.decisions {
            None => Ok(corpus),
            Some(p) => {
                let decisions = read_decisions(open(&self.base.join(p))?)?;
                let (redacted, summary) = apply_redactions(&corpus, &decisions)?;
                log::info!(
                    "applied {} decisions: {} sentences removed, {} pending",
                    decisions.len(),
                    summary.sentences_removed,
                    summary.pending
                );
                Ok(redacted)
            }
        }
    }

    pub fn subcorpus(&self, name: &str) -> Result<Corpus, CliError> {
        let spec = self.cfg.subcorpus(name)?;
        let corpus = self.training_corpus()?;
        let filtered = filter_corpus(&corpus, spec, &self.cfg.norm);
        log::info!(
            "subcorpus {name}: {} of {} documents",
            filtered.len(),
            corpus.len()
        );
        if filtered.is_empty() {
            return Err(CliError::Runtime(format!("subcorpus {name} is empty")));
        }
        Ok(filtered)
    }

    /// Samples with their gram profiles.
    pub fn profiled_samples(&self, corpus: &Corpus) -> Result<Vec<(Sample, GramProfile)>, CliError> {
        let samples = build_samples(corpus, &self.cfg.norm, &self.cfg.sampling)?;
        let sep = self.cfg.norm.whitespace_token;
        let n = self.cfg.features.n;
        let out = samples
            .into_par_iter()
            .map(|s| {
                let p = GramProfile::from_text(&s.text(sep), n)?;
                Ok((s, p))
            })
            .collect::<Result<Vec<_>, stylo::Error>>()?;
        log::info!("{} samples", out.len());
        Ok(out)
    }
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))
}

fn manifest_hash(corpus: &Corpus) -> Result<String, CliError> {
    let mut buf = Vec::new();
    corpus
        .write_manifest(&mut buf)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(sha256_hex(&buf))
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn dispatch(ctx: &Context, cmd: &Command) -> Result<Vec<PathBuf>, CliError> {
    match cmd {
        Command::Reuse { target } => cmd_reuse(ctx, target.as_deref()),
        Command::Redact { decisions } => cmd_redact(ctx, decisions),
        Command::Evaluate { subcorpus } => cmd_evaluate(ctx, subcorpus),
        Command::Train { subcorpus } => cmd_train(ctx, subcorpus),
        Command::Roll { model, target } => cmd_roll(ctx, model, target),
        Command::Coef { model, class, k } => cmd_coef(ctx, model, class, *k),
        Command::Ca {
            classes,
            target,
            subcorpus,
        } => cmd_ca(ctx, classes, target.as_deref(), subcorpus.as_deref()),
    }
}

pub fn cmd_reuse(ctx: &Context, target: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let mut docs = ctx.training_corpus()?.documents;
    if let Some(t) = target {
        docs.extend(Corpus::load_manifest(t)?.documents);
    }
    let corpus = Corpus::new(docs)?;
    let pairs = reuse_report(&corpus, &ctx.cfg.reuse_config())?;
    log::info!("{} candidate pairs", pairs.len());
    let path = ctx.write_with_header("reuse_review.csv", |buf| Ok(write_review(&pairs, buf)?))?;
    Ok(vec![path])
}

pub fn cmd_redact(ctx: &Context, decisions: &Path) -> Result<Vec<PathBuf>, CliError> {
    let corpus = ctx.training_corpus()?;
    let decisions = read_decisions(open(decisions)?)?;
    let (redacted, summary) = apply_redactions(&corpus, &decisions)?;
    log::info!(
        "{} sentences removed, {} documents dropped, {} pairs still pending",
        summary.sentences_removed,
        summary.dropped_documents.len(),
        summary.pending
    );
    let path = ctx.write_with_header("redacted_manifest.jsonl", |buf| {
        redacted
            .write_manifest(buf)
            .map_err(|e| CliError::Runtime(e.to_string()))
    })?;
    Ok(vec![path])
}

pub fn cmd_evaluate(ctx: &Context, subcorpus: &str) -> Result<Vec<PathBuf>, CliError> {
    let corpus = ctx.subcorpus(subcorpus)?;
    let samples = ctx.profiled_samples(&corpus)?;
    let profiles: Vec<&GramProfile> = samples.iter().map(|(_, p)| p).collect();
    let labels: Vec<&str> = samples.iter().map(|(s, _)| s.author.as_str()).collect();
    let res = loo_evaluate(&profiles, &labels, &ctx.cfg.features, &ctx.cfg.hyper())?;
    log::info!(
        "{subcorpus}: accuracy {:.4} over {} folds",
        res.metrics.accuracy,
        res.folds
    );
    let stem = format!("evaluate_{}", file_safe(subcorpus));
    let metrics = ctx.write_with_header(&format!("{stem}_metrics.csv"), |buf| {
        Ok(res.metrics.write_csv(buf, None)?)
    })?;
    let confusion = ctx.write_with_header(&format!("{stem}_confusion.csv"), |buf| {
        Ok(res.confusion.write_csv(buf)?)
    })?;
    Ok(vec![metrics, confusion])
}

pub fn cmd_train(ctx: &Context, subcorpus: &str) -> Result<Vec<PathBuf>, CliError> {
    let corpus = ctx.subcorpus(subcorpus)?;
    let samples = ctx.profiled_samples(&corpus)?;
    let profiles: Vec<&GramProfile> = samples.iter().map(|(_, p)| p).collect();
    let labels: Vec<&str> = samples.iter().map(|(s, _)| s.author.as_str()).collect();
    let mut model =
        MulticlassLinearModel::train(&profiles, &labels, &ctx.cfg.features, &ctx.cfg.norm, &ctx.cfg.hyper())?;
    model.corpus_hash = manifest_hash(&corpus)?;
    model.config_hash = ctx.hash.clone();
    for r in model.ovr.reports.iter().filter(|r| !r.converged) {
        log::warn!("class {} did not converge in {} iterations", r.class, r.iterations);
    }
    let json = model.to_json()?;
    let path = ctx.write(&format!("model_{}.json", file_safe(subcorpus)), json.as_bytes())?;
    Ok(vec![path])
}

fn load_model(path: &Path) -> Result<MulticlassLinearModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read model {}: {e}", path.display())))?;
    Ok(MulticlassLinearModel::from_json(&text)?)
}

pub fn cmd_roll(ctx: &Context, model: &Path, target: &Path) -> Result<Vec<PathBuf>, CliError> {
    let m = load_model(model)?;
    let target_corpus = Corpus::load_manifest(target)?;
    let trace = rolling_attribution(&m, &target_corpus, &ctx.cfg.rolling)?;
    log::info!("{} windows over {} classes", trace.windows.len(), trace.classes.len());
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let path = ctx.write_with_header(&format!("trace_{}.csv", file_safe(stem)), |buf| {
        Ok(write_trace(&trace, buf)?)
    })?;
    Ok(vec![path])
}

pub fn cmd_coef(ctx: &Context, model: &Path, class: &str, k: usize) -> Result<Vec<PathBuf>, CliError> {
    let m = load_model(model)?;
    let (pos, neg) = m.top_coefficients(class, k)?;
    let path = ctx.write_with_header(&format!("coef_{}.csv", file_safe(class)), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["class", "sign", "rank", "gram", "weight"])
            .map_err(stylo::Error::from)?;
        for (sign, list) in [("positive", &pos), ("negative", &neg)] {
            for (rank, (gram, weight)) in list.iter().enumerate() {
                w.write_record([class, sign, &(rank + 1).to_string(), gram, &weight.to_string()])
                    .map_err(stylo::Error::from)?;
            }
        }
        w.flush().map_err(|e| CliError::Runtime(e.to_string()))
    })?;
    Ok(vec![path])
}

pub fn cmd_ca(
    ctx: &Context,
    classes: &[String],
    target: Option<&Path>,
    subcorpus: Option<&str>,
) -> Result<Vec<PathBuf>, CliError> {
    if classes.len() != 2 || classes[0] == classes[1] {
        return Err(CliError::Config(format!(
            "--classes: expected two distinct classes, got {classes:?}"
        )));
    }
    let sub = subcorpus.unwrap_or(&ctx.cfg.ca.subcorpus);
    let corpus = ctx.subcorpus(sub)?;
    let samples: Vec<(Sample, GramProfile)> = ctx
        .profiled_samples(&corpus)?
        .into_iter()
        .filter(|(s, _)| classes.contains(&s.author))
        .collect();
    for c in classes {
        if !samples.iter().any(|(s, _)| &s.author == c) {
            return Err(stylo::Error::UnknownClass(c.clone()).into());
        }
    }
    let labelled: Vec<(&str, &GramProfile)> = samples.iter().map(|(s, p)| (s.author.as_str(), p)).collect();
    let vocab = select_ca_features(
        &labelled,
        ctx.cfg.features.n,
        ctx.cfg.ca.min_total_count,
        ctx.cfg.ca.require_both_classes,
    )?;
    log::info!("{} grams selected", vocab.len());
    let rows: Vec<(String, &GramProfile)> = samples.iter().map(|(s, p)| (s.id.clone(), p)).collect();
    let table = ContingencyTable::from_profiles(&rows, vocab.grams())?;
    let result = correspondence_analysis(&table)?;
    log::info!(
        "{} axes, explained {:?}",
        result.axes(),
        result.explained.iter().take(2).collect::<Vec<_>>()
    );

    let mut supplementary = Vec::new();
    if let Some(t) = target {
        let target_corpus = Corpus::load_manifest(t)?;
        let norm = &ctx.cfg.norm;
        let seq = TokenSeq::from_documents(target_corpus.chronological(), norm);
        let spans = rolling_windows(seq.len(), &ctx.cfg.rolling)?;
        let projected: Vec<Option<(String, Vec<f64>)>> = spans
            .par_iter()
            .enumerate()
            .map(|(i, span)| {
                let text = seq.joined(span.clone(), norm.whitespace_token);
                let profile = GramProfile::from_text(&text, ctx.cfg.features.n)?;
                match project_profile(&result, &profile) {
                    Ok(coords) => Ok(Some((format!("window_{i}"), coords))),
                    Err(stylo::Error::Param(msg)) => {
                        log::warn!("window {i} skipped: {msg}");
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_, stylo::Error>>()?;
        supplementary.extend(projected.into_iter().flatten());
    }

    let name = format!("ca_{}_{}.csv", file_safe(&classes[0]), file_safe(&classes[1]));
    let path = ctx.write_with_header(&name, |buf| {
        buf.extend_from_slice(format!("# selected_grams={}\n", vocab.len()).as_bytes());
        Ok(write_coordinates(&result, &supplementary, buf)?)
    })?;
    Ok(vec![path])
}
