use std::path::{Path, PathBuf};

use anyhow::Context;
use convrewrite_core::model::ModelConfig;
use serde::{Deserialize, Serialize};

/// Everything a run depends on besides its input files.
///
/// The top-level `seed` drives data generation and model initialization;
/// it overrides `model.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub datagen: DatagenSettings,
    pub model: ModelConfig,
    pub train: TrainSettings,
    pub sweep: SweepSettings,
    pub bench: BenchSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenSettings {
    /// Examples per use case before splitting.
    pub per_use_case: usize,
    /// Compositional examples before splitting.
    pub compositional: usize,
    /// Directory with `catalog.txt`, `phrases.txt` and `templates.txt`.
    /// The built-in files are used when unset.
    pub resources: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    /// word2vec text file, required when `model.embedding = "frozen"`.
    pub embeddings: Option<PathBuf>,
    /// Compositional training examples mixed into the single-task data.
    pub compositional: usize,
    /// Stop as soon as validation exact match reaches 100%.
    pub stop_at_perfect: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub sizes: Vec<usize>,
    /// Caps the single-task training examples per use case; validation is
    /// capped at an eighth of it. All are used when unset.
    pub single_per_use_case: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub warmup: usize,
    pub reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            datagen: DatagenSettings::default(),
            model: ModelConfig::default(),
            train: TrainSettings::default(),
            sweep: SweepSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

impl Default for DatagenSettings {
    fn default() -> Self {
        DatagenSettings {
            per_use_case: 10_000,
            compositional: 2_500,
            resources: None,
        }
    }
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            sizes: vec![0, 100, 500, 2000],
            single_per_use_case: None,
        }
    }
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings { warmup: 50, reps: 1400 }
    }
}

impl RunConfig {
    pub fn parse(src: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(src)?)
    }

    /// Reads `path` if given, applies the seed override and checks the
    /// model settings.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&src).with_context(|| format!("in {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.model.seed = cfg.seed;
        cfg.model.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes `config.toml` into `dir`.
    pub fn echo_into(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = RunConfig::parse("seed = 7\n[model]\nhidden_dim = 16\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.hidden_dim, 16);
        assert_eq!(cfg.model.batch_size, 64);
        assert_eq!(cfg.datagen.per_use_case, 10_000);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(RunConfig::parse("sed = 1\n").is_err());
        assert!(RunConfig::parse("[model]\nlr = 0.1\n").is_err());
        assert!(RunConfig::parse("[bench]\nrepeats = 100\n").is_err());
    }
}
