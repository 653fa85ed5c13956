use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stylo::corpus::{FilterSpec, NormConfig, SamplingConfig};
use stylo::features::FeatureConfig;
use stylo::reuse::ReuseConfig;
use stylo::rolling::RollingConfig;
use stylo::svm::HyperParams;
use stylo::util::sha256_hex;

use crate::CliError;

/// Seeds for every stochastic stage. Required in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub minhash: u64,
    pub solver: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c_reg: f64,
    pub loss: String,
    pub tol: f64,
    pub max_iter: usize,
    pub bias_scale: f64,
}

impl Default for SvmSection {
    fn default() -> Self {
        let hp = HyperParams::default();
        SvmSection {
            c_reg: hp.c_reg,
            loss: hp.loss,
            tol: hp.tol,
            max_iter: hp.max_iter,
            bias_scale: hp.bias_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReuseSection {
    pub num_hashes: usize,
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
}

impl Default for ReuseSection {
    fn default() -> Self {
        let r = ReuseConfig::default();
        ReuseSection {
            num_hashes: r.num_hashes,
            bands: r.bands,
            rows: r.rows,
            threshold: r.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaSection {
    pub min_total_count: u64,
    pub require_both_classes: bool,
    /// Subcorpus whose samples form the active rows.
    pub subcorpus: String,
}

impl Default for CaSection {
    fn default() -> Self {
        CaSection {
            min_total_count: 5,
            require_both_classes: true,
            subcorpus: "large".into(),
        }
    }
}

/// One run configuration, read from TOML. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub seeds: Seeds,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub rolling: RollingConfig,
    #[serde(default)]
    pub reuse: ReuseSection,
    #[serde(default)]
    pub ca: CaSection,
    /// Named corpus filters. `large` defaults to no filtering.
    #[serde(default)]
    pub subcorpora: BTreeMap<String, FilterSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.subcorpora.entry("large".into()).or_default();
        Ok(cfg)
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            c_reg: self.svm.c_reg,
            loss: self.svm.loss.clone(),
            tol: self.svm.tol,
            max_iter: self.svm.max_iter,
            seed: self.seeds.solver,
            bias_scale: self.svm.bias_scale,
        }
    }

    pub fn reuse_config(&self) -> ReuseConfig {
        ReuseConfig {
            num_hashes: self.reuse.num_hashes,
            bands: self.reuse.bands,
            rows: self.reuse.rows,
            threshold: self.reuse.threshold,
            seed: self.seeds.minhash,
        }
    }

    pub fn subcorpus(&self, name: &str) -> Result<&FilterSpec, CliError> {
        self.subcorpora.get(name).ok_or_else(|| {
            CliError::Config(format!(
                "subcorpora.{name}: not defined (known: {})",
                self.subcorpora.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// Check every field; the message names the offending field.
    pub fn validate(&self, base: &Path) -> Result<(), CliError> {
        let field = |name: &str, e: stylo::Error| CliError::Config(format!("{name}: {e}"));
        self.norm.validate().map_err(|e| field("norm", e))?;
        if self.sampling.sample_len == 0 {
            return Err(CliError::Config("sampling.sample_len: must be at least 1".into()));
        }
        self.features.validate().map_err(|e| field("features", e))?;
        self.hyper().validate().map_err(|e| field("svm", e))?;
        self.rolling.validate().map_err(|e| field("rolling", e))?;
        self.reuse_config().validate().map_err(|e| field("reuse", e))?;
        for (key, path) in [("corpus", Some(&self.corpus)), ("decisions", self.decisions.as_ref())] {
            if let Some(p) = path {
                if !base.join(p).is_file() {
                    return Err(CliError::Config(format!(
                        "{key}: file {} does not exist",
                        base.join(p).display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hash of the settings that determine outputs. The output directory
    /// does not take part.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

pub struct LoadedConfig {
    pub cfg: RunConfig,
    pub base: PathBuf,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate(&base)?;
    let hash = cfg.hash();
    Ok(LoadedConfig { cfg, base, hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
corpus = "manifest.jsonl"
[seeds]
minhash = 1
solver = 2
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.sampling.sample_len, 1000);
        assert_eq!(c.rolling.step, 200);
        assert_eq!(c.hyper().seed, 2);
        assert_eq!(c.reuse_config().seed, 1);
        assert!(c.subcorpora.contains_key("large"));
        assert_eq!(c.norm.whitespace_token, '_');
    }

    #[test]
    fn seeds_are_mandatory() {
        let err = RunConfig::parse("corpus = \"m.jsonl\"\n").err().unwrap();
        assert!(err.to_string().contains("seeds"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = format!("{MINIMAL}\n[svm]\nseed = 4\n");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn subcorpus_filters_parse() {
        let text = format!(
            "{MINIMAL}\n[subcorpora.controlled]\nexcluded_genres = [\"book\", \"transcript\"]\nexcluded_authors = [\"x\"]\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let f = c.subcorpus("controlled").unwrap();
        assert_eq!(f.excluded_genres.len(), 2);
        assert!(c.subcorpus("nope").is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seeds.solver = 3;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.jsonl"), "").unwrap();
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.validate(dir.path()).unwrap();
        c.rolling.step = 0;
        let err = c.validate(dir.path()).err().unwrap().to_string();
        assert!(err.starts_with("rolling"), "{err}");
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert!(c.validate(Path::new("/nonexistent")).is_err());
    }
}
