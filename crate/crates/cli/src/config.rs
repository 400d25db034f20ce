//! Run configuration: a JSON file, overridden by command-line flags, checked
//! in full before any command touches the disk.

use std::fs;
use std::path::{Path, PathBuf};

use headscope::exec::Execution;
use headscope::metrics::FilterPolicy;
use headscope::model::archive::ArchiveReader;
use headscope::model::ModelConfig;
use headscope::pipeline::AttentionStore;
use headscope::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_PIECES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// GPT-2 weights as a safetensors file.
    pub model: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    /// CoNLL-U source the sample is drawn from.
    pub corpus: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Attention store; `<output_dir>/attention.safetensors` when unset.
    pub store: Option<PathBuf>,
    pub policy: FilterPolicy,
    pub sample_size: usize,
    pub seed: u64,
    /// Worker threads for per-sentence work; 0 uses every core.
    pub workers: usize,
    pub execution: Execution,
    /// Longest input the HTTP API accepts, in pieces.
    pub max_pieces: usize,
    /// Entries in the API's per-sentence cache.
    pub cache_entries: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            vocab: None,
            merges: None,
            corpus: None,
            output_dir: PathBuf::from("headscope-out"),
            store: None,
            policy: FilterPolicy::default(),
            sample_size: 10_000,
            seed: 20190601,
            workers: 0,
            execution: Execution::Parallel,
            max_pieces: DEFAULT_MAX_PIECES,
            cache_entries: 256,
        }
    }
}

/// Flag values that replace file values when given.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    #[arg(long, global = true)]
    pub merges: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sample_size: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Run per-sentence work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[arg(long, global = true)]
    pub exclude_null_target: Option<bool>,
    #[arg(long, global = true)]
    pub entropy_renormalize: Option<bool>,
    #[arg(long, global = true)]
    pub entropy_null_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub variability_prefix_n: Option<usize>,
    #[arg(long, global = true)]
    pub max_pieces: Option<usize>,
    #[arg(long, global = true)]
    pub cache_entries: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn from_json(text: &str, source: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            message: format!("{}: {e}", source.display()),
        })
    }

    /// File values (if any) with flags applied on top.
    pub fn load(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config {
                    field: "config".into(),
                    message: format!("{}: {e}", path.display()),
                })?;
                Self::from_json(&text, path)?
            }
            None => Self::default(),
        };
        c.model = o.model.clone().or(c.model);
        c.vocab = o.vocab.clone().or(c.vocab);
        c.merges = o.merges.clone().or(c.merges);
        c.corpus = o.corpus.clone().or(c.corpus);
        c.store = o.store.clone().or(c.store);
        set(&mut c.output_dir, o.output_dir.clone());
        set(&mut c.sample_size, o.sample_size);
        set(&mut c.seed, o.seed);
        set(&mut c.workers, o.workers);
        if o.sequential {
            c.execution = Execution::Sequential;
        }
        set(&mut c.policy.exclude_null_target, o.exclude_null_target);
        set(&mut c.policy.entropy_renormalize, o.entropy_renormalize);
        set(&mut c.policy.entropy_null_threshold, o.entropy_null_threshold);
        set(&mut c.policy.variability_prefix_n, o.variability_prefix_n);
        set(&mut c.max_pieces, o.max_pieces);
        set(&mut c.cache_entries, o.cache_entries);
        Ok(c)
    }

    pub fn store_path(&self) -> PathBuf {
        self.store.clone().unwrap_or_else(|| self.output_dir.join("attention.safetensors"))
    }

    /// Checks everything `command` will need. Nothing is created or written.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.policy.validate()?;
        let file = |field: &str, p: &Option<PathBuf>| -> Result<PathBuf> {
            let p = p.as_ref().ok_or_else(|| Error::config(field, "required for this command"))?;
            if !p.is_file() {
                return Err(Error::config(field, format!("{} does not exist or is not a file", p.display())));
            }
            Ok(p.clone())
        };
        file("vocab", &self.vocab)?;
        file("merges", &self.merges)?;
        match command {
            Command::Serve => {
                file("model", &self.model)?;
            }
            Command::Extract => {
                file("model", &self.model)?;
                file("corpus", &self.corpus)?;
            }
            Command::Analyze | Command::Exemplars => {
                file("corpus", &self.corpus)?;
                let store = self.store_path();
                if self.store.is_some() && !store.is_file() && self.model.is_none() {
                    return Err(Error::config("store", format!("{} does not exist", store.display())));
                }
                if !store.is_file() {
                    file("model", &self.model).map_err(|e| match e {
                        Error::Config { message, .. } => Error::config(
                            "model",
                            format!("{message} (no attention store at {} to read instead)", store.display()),
                        ),
                        e => e,
                    })?;
                }
            }
        }
        if matches!(command, Command::Extract | Command::Analyze | Command::Exemplars) && self.sample_size == 0 {
            return Err(Error::config("sample_size", "must be at least 1"));
        }
        if command == Command::Serve {
            if self.max_pieces == 0 {
                return Err(Error::config("max_pieces", "must be at least 1"));
            }
            if self.cache_entries == 0 {
                return Err(Error::config("cache_entries", "must be at least 1"));
            }
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err(Error::config(
                "output_dir",
                format!("{} is not a directory", self.output_dir.display()),
            ));
        }
        Ok(())
    }

    /// Layer and head counts, read from the store when one exists, else from
    /// the model header. Cheap: no weights are loaded.
    pub fn shape(&self) -> Result<(usize, usize)> {
        let store = self.store_path();
        if store.is_file() {
            let s = AttentionStore::open(&store)?;
            return Ok((s.n_layers, s.n_heads));
        }
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::config("model", "required for this command"))?;
        let c = ModelConfig::infer_header(&ArchiveReader::open(model)?.header)?;
        Ok((c.n_layers, c.n_heads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Extract,
    Analyze,
    Exemplars,
    Serve,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::from_json(
            r#"{"seed": 5, "sample_size": 3, "policy": {"variability_prefix_n": 4}}"#,
            Path::new("c.json"),
        )
        .unwrap();
        assert_eq!((c.seed, c.sample_size, c.policy.variability_prefix_n), (5, 3, 4));
        assert!(c.policy.exclude_null_target);
        let o = Overrides {
            seed: Some(9),
            exclude_null_target: Some(false),
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
        c = RunConfig::load(&Overrides { config: Some(path), ..o }).unwrap();
        assert_eq!((c.seed, c.sample_size, c.policy.variability_prefix_n), (9, 3, 4));
        assert!(!c.policy.exclude_null_target);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = RunConfig::from_json(r#"{"sampel_size": 3}"#, Path::new("c.json")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, ref message } if field == "config" && message.contains("sampel_size")));
    }

    #[test]
    fn missing_inputs_are_named() {
        let c = RunConfig::default();
        let err = c.validate(Command::Extract).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "vocab"), "{err}");
    }
}
