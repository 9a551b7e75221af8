//! Demonstration trajectories, action chunks and the line-per-record dataset
//! file format.
//!
//! A dataset is a UTF-8 file holding one JSON object per line:
//!
//! ```text
//! {"instruction":"put the carrot in the pot","embodiment":"tabletop-7dof","steps":[{"obs":[...],"action":[...]}, ...]}
//! ```
//!
//! next to a sidecar manifest `<dataset>.manifest.json` declaring the format
//! version, observation length, action length and record count. Reals are
//! written as shortest round-trip decimals, so save followed by load is
//! bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Action layout of a single arm: x, y, z, roll, pitch, yaw, gripper.
pub const DEFAULT_ACTION_DIM: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(rename = "obs")]
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instruction: String,
    pub embodiment: String,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.action.as_slice())
    }
}

/// Chunk length `n` (timesteps) by action dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub n: usize,
    pub d: usize,
}

impl ChunkSpec {
    pub fn new(n: usize, d: usize) -> Result<Self, ChunkError> {
        if n == 0 || d == 0 {
            return Err(ChunkError::InvalidSpec { n, d });
        }
        Ok(Self { n, d })
    }

    /// Number of scalar entries, which is also the baseline token count of
    /// one chunk under per-dimension binning.
    pub fn len(&self) -> usize {
        self.n * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChunkOrigin {
    pub trajectory: usize,
    pub start: usize,
    /// Set when the window ran past the end and was padded with the last action.
    #[serde(default)]
    pub padded: bool,
}

/// An `n x d` block of consecutive actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub values: Matrix,
    #[serde(default)]
    pub origin: ChunkOrigin,
}

impl ActionChunk {
    pub fn new(values: Matrix, origin: ChunkOrigin) -> Result<Self, ChunkError> {
        if !values.is_finite() {
            return Err(ChunkError::NonFinite);
        }
        Ok(Self { values, origin })
    }

    pub fn spec(&self) -> ChunkSpec {
        ChunkSpec {
            n: self.values.rows(),
            d: self.values.cols(),
        }
    }

    pub fn check_spec(&self, spec: ChunkSpec) -> Result<(), ChunkError> {
        if self.spec() != spec {
            return Err(ChunkError::ShapeMismatch {
                expected: spec,
                found: self.spec(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChunkError {
    #[error("invalid chunk spec n={n} d={d}: both must be >= 1")]
    InvalidSpec { n: usize, d: usize },
    #[error("chunk shape {}x{} does not match spec {}x{}", found.n, found.d, expected.n, expected.d)]
    ShapeMismatch {
        expected: ChunkSpec,
        found: ChunkSpec,
    },
    #[error("chunk contains non-finite values")]
    NonFinite,
    #[error("stride must be >= 1")]
    ZeroStride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Windows running past the end of the trajectory are dropped.
    #[default]
    Drop,
    /// The final window is padded by repeating the last action.
    PadWithLast,
}

/// Slices a trajectory into action chunks at starts `0, stride, 2*stride, ...`.
pub fn chunk_trajectory(
    traj: &Trajectory,
    trajectory_id: usize,
    spec: ChunkSpec,
    stride: usize,
) -> Result<Vec<ActionChunk>, ChunkError> {
    chunk_trajectory_with(traj, trajectory_id, spec, stride, TailPolicy::Drop)
}

pub fn chunk_trajectory_with(
    traj: &Trajectory,
    trajectory_id: usize,
    spec: ChunkSpec,
    stride: usize,
    tail: TailPolicy,
) -> Result<Vec<ActionChunk>, ChunkError> {
    if stride == 0 {
        return Err(ChunkError::ZeroStride);
    }
    let len = traj.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let end = start + spec.n;
        if end > len && tail == TailPolicy::Drop {
            break;
        }
        let mut data = Vec::with_capacity(spec.len());
        for t in start..end {
            let action = &traj.steps[t.min(len - 1)].action;
            if action.len() != spec.d {
                return Err(ChunkError::ShapeMismatch {
                    expected: spec,
                    found: ChunkSpec {
                        n: spec.n,
                        d: action.len(),
                    },
                });
            }
            data.extend_from_slice(action);
        }
        let values = Matrix::from_vec(spec.n, spec.d, data).expect("window sized from spec");
        out.push(ActionChunk::new(
            values,
            ChunkOrigin {
                trajectory: trajectory_id,
                start,
                padded: end > len,
            },
        )?);
        start += stride;
    }
    Ok(out)
}

/// Chunks every trajectory of a dataset, numbering trajectories in file order.
pub fn chunk_dataset(
    trajectories: &[Trajectory],
    spec: ChunkSpec,
    stride: usize,
) -> Result<Vec<ActionChunk>, ChunkError> {
    let mut out = Vec::new();
    for (i, t) in trajectories.iter().enumerate() {
        out.extend(chunk_trajectory(t, i, spec, stride)?);
    }
    Ok(out)
}

/// Sidecar metadata for a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub records: usize,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads the sidecar manifest, if one exists.
pub fn read_manifest(dataset: &Path) -> Result<Option<Manifest>, DatasetError> {
    let path = manifest_path(dataset);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(DatasetError::Manifest {
            path,
            message: format!(
                "unsupported format version {} (expected {DATASET_FORMAT_VERSION})",
                manifest.format_version
            ),
        });
    }
    Ok(Some(manifest))
}

/// Loads and validates a dataset in file order.
///
/// Dimensions come from the sidecar manifest. Without a manifest they are
/// taken from the first record and every later record must agree.
pub fn load_dataset(path: &Path) -> Result<Vec<Trajectory>, DatasetError> {
    let manifest = read_manifest(path)?;
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut dims = manifest.as_ref().map(|m| (m.obs_dim, m.action_dim));
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let traj: Trajectory = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let d = *dims.get_or_insert_with(|| {
            traj.steps
                .first()
                .map_or((0, 0), |s| (s.observation.len(), s.action.len()))
        });
        validate_trajectory(&traj, d.0, d.1).map_err(|message| DatasetError::Schema {
            line: line_no,
            message,
        })?;
        out.push(traj);
    }
    if let Some(m) = &manifest {
        if m.records != out.len() {
            return Err(DatasetError::Manifest {
                path: manifest_path(path),
                message: format!("declares {} records, file holds {}", m.records, out.len()),
            });
        }
    }
    Ok(out)
}

fn validate_trajectory(traj: &Trajectory, obs_dim: usize, action_dim: usize) -> Result<(), String> {
    if traj.steps.is_empty() {
        return Err("trajectory has no steps".into());
    }
    for (t, step) in traj.steps.iter().enumerate() {
        if step.observation.len() != obs_dim {
            return Err(format!(
                "step {t}: observation length {} != declared {obs_dim}",
                step.observation.len()
            ));
        }
        if step.action.len() != action_dim {
            return Err(format!(
                "step {t}: action length {} != declared {action_dim}",
                step.action.len()
            ));
        }
        if !step
            .observation
            .iter()
            .chain(&step.action)
            .all(|v| v.is_finite())
        {
            return Err(format!("step {t}: non-finite value"));
        }
    }
    Ok(())
}

/// Writes the dataset and its manifest. All trajectories must share dimensions.
pub fn save_dataset(path: &Path, trajectories: &[Trajectory]) -> Result<Manifest, DatasetError> {
    let (obs_dim, action_dim) = trajectories
        .first()
        .and_then(|t| t.steps.first())
        .map_or((0, DEFAULT_ACTION_DIM), |s| {
            (s.observation.len(), s.action.len())
        });
    for (i, t) in trajectories.iter().enumerate() {
        validate_trajectory(t, obs_dim, action_dim).map_err(|message| DatasetError::Schema {
            line: i + 1,
            message,
        })?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for t in trajectories {
        let line = serde_json::to_string(t).expect("trajectory serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        obs_dim,
        action_dim,
        records: trajectories.len(),
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, text + "\n").map_err(io_err(&mpath))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(len: usize) -> Trajectory {
        Trajectory {
            instruction: "test".into(),
            embodiment: "unit".into(),
            steps: (0..len)
                .map(|t| Step {
                    observation: vec![t as f64],
                    action: vec![t as f64, -(t as f64)],
                })
                .collect(),
        }
    }

    #[test]
    fn window_counts() {
        let t = traj(10);
        let s5 = ChunkSpec::new(5, 2).unwrap();
        let s1 = ChunkSpec::new(1, 2).unwrap();
        assert_eq!(chunk_trajectory(&t, 0, s5, 1).unwrap().len(), 6);
        assert_eq!(chunk_trajectory(&t, 0, s1, 1).unwrap().len(), 10);
        assert!(chunk_trajectory(&traj(4), 0, s5, 1).unwrap().is_empty());
        assert_eq!(chunk_trajectory(&t, 0, s5, 5).unwrap().len(), 2);
    }

    #[test]
    fn origins_are_recorded() {
        let chunks = chunk_trajectory(&traj(10), 3, ChunkSpec::new(5, 2).unwrap(), 2).unwrap();
        let starts: Vec<_> = chunks.iter().map(|c| c.origin.start).collect();
        assert_eq!(starts, vec![0, 2, 4]);
        assert!(chunks
            .iter()
            .all(|c| c.origin.trajectory == 3 && !c.origin.padded));
        assert_eq!(chunks[1].values.row(0), &[2.0, -2.0]);
    }

    #[test]
    fn padding_repeats_last_action_and_flags_origin() {
        let spec = ChunkSpec::new(5, 2).unwrap();
        let chunks = chunk_trajectory_with(&traj(7), 0, spec, 5, TailPolicy::PadWithLast).unwrap();
        assert_eq!(chunks.len(), 2);
        assert!(chunks[1].origin.padded);
        assert_eq!(chunks[1].values.row(4), &[6.0, -6.0]);
        assert_eq!(chunks[1].values.row(1), &[6.0, -6.0]);
    }

    #[test]
    fn stride_equal_to_n_reconstructs_actions() {
        let t = traj(15);
        let chunks = chunk_trajectory(&t, 0, ChunkSpec::new(5, 2).unwrap(), 5).unwrap();
        let flat: Vec<f64> = chunks
            .iter()
            .flat_map(|c| c.values.as_slice().to_vec())
            .collect();
        let orig: Vec<f64> = t.actions().flatten().copied().collect();
        assert_eq!(flat, orig);
    }

    #[test]
    fn zero_stride_rejected() {
        let err = chunk_trajectory(&traj(3), 0, ChunkSpec::new(1, 2).unwrap(), 0).unwrap_err();
        assert_eq!(err, ChunkError::ZeroStride);
        assert!(ChunkSpec::new(0, 7).is_err());
    }
}
