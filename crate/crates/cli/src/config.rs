//! Run configuration: a TOML file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use actok_core::eval::ExecMode;
use actok_core::DctAxis;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_SCALE: f64 = 16.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub chunk: ChunkSection,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub demos: DemoSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkSection {
    pub n: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub scale: Option<f64>,
    pub target_error: Option<f64>,
    pub clamp: Option<u32>,
    pub max_vocab: Option<u32>,
    pub axis: Option<DctAxis>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    pub suite: Option<String>,
    pub count: Option<usize>,
    pub settle: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub suite: Option<String>,
    pub mode: Option<ExecMode>,
    pub trials: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Resolved settings written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub chunk_n: usize,
    pub stride: usize,
    pub scale: Option<f64>,
    pub target_error: Option<f64>,
    pub clamp: u32,
    pub max_vocab: u32,
    pub axis: DctAxis,
    pub bins: usize,
    pub demo_suite: String,
    pub demo_count: usize,
    pub settle: usize,
    pub eval_suite: String,
    pub mode: ExecMode,
    pub trials: usize,
}

impl Resolved {
    pub fn from_file(file: &FileConfig, out_dir: Option<PathBuf>) -> Self {
        let n = file.chunk.n.unwrap_or(5);
        Self {
            seed: file.seed,
            out_dir: out_dir
                .or_else(|| file.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            chunk_n: n,
            stride: file.chunk.stride.unwrap_or(1),
            scale: file.codec.scale,
            target_error: file.codec.target_error,
            clamp: file.codec.clamp.unwrap_or(actok_core::fast::DEFAULT_CLAMP),
            max_vocab: file
                .codec
                .max_vocab
                .unwrap_or(actok_core::bpe::DEFAULT_MAX_VOCAB),
            axis: file.codec.axis.unwrap_or_default(),
            bins: file
                .codec
                .bins
                .unwrap_or(actok_core::binning::DEFAULT_NUM_BINS),
            demo_suite: file
                .demos
                .suite
                .clone()
                .unwrap_or_else(|| "training".into()),
            demo_count: file.demos.count.unwrap_or(500),
            settle: file.demos.settle.unwrap_or(4),
            eval_suite: file.eval.suite.clone().unwrap_or_else(|| "single".into()),
            mode: file.eval.mode.unwrap_or(ExecMode::ExecuteFirst),
            trials: file.eval.trials.unwrap_or(10),
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(
                "this command is stochastic; pass --seed or set `seed` in the config".into(),
            )
        })
    }

    pub fn out(&self, name: &Path) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
