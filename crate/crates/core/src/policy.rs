//! Token-emitting policies.
//!
//! A policy maps an observation to a token sequence that the bound
//! [`FastModel`] decodes into one action chunk. [`KnnPolicy`] retrieves the
//! tokens of the nearest demonstrated state; [`ExpertChunkPolicy`] and
//! [`MaxDeltaPolicy`] are scripted references that read the privileged scene.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fast::{FastError, FastModel};
use crate::matrix::Matrix;
use crate::sim::{self, params, EnvAction, EnvState, TaskSpec};
use crate::suites;
use crate::trajectory::{chunk_trajectory, ActionChunk, ChunkOrigin, ChunkSpec, Step, Trajectory};

/// Object slots in the feature vector. Unused slots are zero.
pub const OBJECT_SLOTS: usize = 4;
/// `[gripper z, closed, holding]`, then `[present, dx, dy]` per object slot,
/// then `[dx, dy]` to the first goal's target region center.
pub const FEATURE_LEN: usize = 3 + 3 * OBJECT_SLOTS + 2;

pub const POLICY_FORMAT: &str = "actok-knn-policy";
pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub instruction: String,
    pub features: Vec<f64>,
}

/// Features are gripper-relative: object and region positions are offsets
/// from the gripper, in scene order.
pub fn observe(state: &EnvState, task: &TaskSpec) -> Observation {
    let [gx, gy, gz] = state.gripper;
    let mut f = Vec::with_capacity(FEATURE_LEN);
    f.push(gz);
    f.push(f64::from(u8::from(state.gripper_closed)));
    f.push(f64::from(u8::from(state.held.is_some())));
    for slot in 0..OBJECT_SLOTS {
        match state.objects.get(slot) {
            Some(o) => f.extend([1.0, o.pos[0] - gx, o.pos[1] - gy]),
            None => f.extend([0.0, 0.0, 0.0]),
        }
    }
    let region = task
        .goals
        .first()
        .and_then(|g| task.target_region(g, state))
        .map(|r| r.center());
    match region {
        Some(c) => f.extend([c[0] - gx, c[1] - gy]),
        None => f.extend([0.0, 0.0]),
    }
    Observation {
        instruction: instruction_key(&task.instruction),
        features: f,
    }
}

/// Canonical instruction text: lowercase, punctuation and articles dropped,
/// and known object and container kinds replaced by placeholders.
pub fn instruction_key(instruction: &str) -> String {
    let cleaned: String = instruction
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    let words: Vec<&str> = cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "the" | "a" | "an"))
        .collect();

    let mut phrases: Vec<(Vec<&str>, &str)> = suites::object_vocabulary()
        .into_iter()
        .map(|k| (k.split_whitespace().collect(), "<object>"))
        .chain(
            suites::CONTAINER_KINDS
                .iter()
                .map(|k| (k.split_whitespace().collect(), "<container>")),
        )
        .collect();
    phrases.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));

    let mut out: Vec<&str> = Vec::with_capacity(words.len());
    let mut i = 0;
    'outer: while i < words.len() {
        for (phrase, tag) in &phrases {
            if words[i..].starts_with(phrase) {
                out.push(tag);
                i += phrase.len();
                continue 'outer;
            }
        }
        out.push(words[i]);
        i += 1;
    }
    out.join(" ")
}

/// Privileged scene access for scripted policies. Learned policies ignore it.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub state: &'a EnvState,
    pub task: &'a TaskSpec,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no demonstrations for instruction '{0}'")]
    NoMemory(String),
    #[error("no demonstrations to build a policy from")]
    Empty,
    #[error("observation has {found} features, memory holds {expected}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("policy chunk spec {}x{} does not match codec {}x{}", policy.n, policy.d, codec.n, codec.d)]
    SpecMismatch { policy: ChunkSpec, codec: ChunkSpec },
    #[error("policy was built for codec {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Codec(#[from] FastError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid policy file: {0}")]
    Format(String),
}

/// Maps an observation to the token sequence of one action chunk.
///
/// Every sequence returned must decode under [`PolicyModel::codec`].
pub trait PolicyModel: Sync {
    fn codec(&self) -> &FastModel;

    fn predict(&self, obs: &Observation, scene: &Scene<'_>) -> Result<Vec<u32>, PolicyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub key: String,
    pub features: Vec<f64>,
    pub tokens: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    codec_fingerprint: String,
    chunk: ChunkSpec,
    entries: Vec<MemoryEntry>,
}

/// 1-nearest-neighbour retrieval over demonstrated states.
#[derive(Debug, Clone)]
pub struct KnnPolicy {
    codec: FastModel,
    entries: Vec<MemoryEntry>,
    by_key: HashMap<String, Vec<usize>>,
}

impl KnnPolicy {
    fn from_entries(codec: FastModel, entries: Vec<MemoryEntry>) -> Self {
        let mut by_key: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_key.entry(e.key.clone()).or_default().push(i);
        }
        Self {
            codec,
            entries,
            by_key,
        }
    }

    /// Stores `(instruction key, observation at chunk start, tokens)` for every
    /// stride-1 chunk of every demonstration.
    pub fn build(
        demos: &[Trajectory],
        codec: FastModel,
        spec: ChunkSpec,
    ) -> Result<Self, PolicyError> {
        if demos.is_empty() {
            return Err(PolicyError::Empty);
        }
        if spec != codec.chunk_spec() {
            return Err(PolicyError::SpecMismatch {
                policy: spec,
                codec: codec.chunk_spec(),
            });
        }
        let mut entries = Vec::new();
        for (i, demo) in demos.iter().enumerate() {
            let key = instruction_key(&demo.instruction);
            for chunk in chunk_trajectory(demo, i, spec, 1).map_err(FastError::from)? {
                entries.push(MemoryEntry {
                    key: key.clone(),
                    features: demo.steps[chunk.origin.start].observation.clone(),
                    tokens: codec.encode(&chunk)?,
                });
            }
        }
        if entries.is_empty() {
            return Err(PolicyError::Empty);
        }
        Ok(Self::from_entries(codec, entries))
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the nearest entry with the same key; ties go to the earliest.
    pub fn nearest(&self, obs: &Observation) -> Result<usize, PolicyError> {
        let candidates = self
            .by_key
            .get(&obs.instruction)
            .ok_or_else(|| PolicyError::NoMemory(obs.instruction.clone()))?;
        let mut best: Option<(usize, f64)> = None;
        for &i in candidates {
            let f = &self.entries[i].features;
            if f.len() != obs.features.len() {
                return Err(PolicyError::FeatureMismatch {
                    expected: f.len(),
                    found: obs.features.len(),
                });
            }
            let d: f64 = f
                .iter()
                .zip(&obs.features)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| PolicyError::NoMemory(obs.instruction.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let file = PolicyFile {
            format: POLICY_FORMAT.into(),
            version: POLICY_FORMAT_VERSION,
            codec_fingerprint: self.codec.fingerprint(),
            chunk: self.codec.chunk_spec(),
            entries: self.entries.clone(),
        };
        fs::write(
            path,
            serde_json::to_string(&file).expect("policy serializes") + "\n",
        )?;
        Ok(())
    }

    /// Loads a memory file; the codec must be the one it was built with.
    pub fn load(path: &Path, codec: FastModel) -> Result<Self, PolicyError> {
        let text = fs::read_to_string(path)?;
        let file: PolicyFile =
            serde_json::from_str(&text).map_err(|e| PolicyError::Format(e.to_string()))?;
        if file.format != POLICY_FORMAT || file.version != POLICY_FORMAT_VERSION {
            return Err(PolicyError::Format(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        let found = codec.fingerprint();
        if file.codec_fingerprint != found {
            return Err(PolicyError::FingerprintMismatch {
                expected: file.codec_fingerprint,
                found,
            });
        }
        for (i, e) in file.entries.iter().enumerate() {
            codec
                .decode(&e.tokens)
                .map_err(|err| PolicyError::Format(format!("entry {i}: {err}")))?;
        }
        Ok(Self::from_entries(codec, file.entries))
    }
}

impl PolicyModel for KnnPolicy {
    fn codec(&self) -> &FastModel {
        &self.codec
    }

    fn predict(&self, obs: &Observation, _scene: &Scene<'_>) -> Result<Vec<u32>, PolicyError> {
        let i = self.nearest(obs)?;
        Ok(self.entries[i].tokens.clone())
    }
}

fn chunk_from_actions(actions: &[EnvAction], spec: ChunkSpec) -> ActionChunk {
    let rows: Vec<&[f64]> = actions.iter().map(|a| &a.as_slice()[..spec.d]).collect();
    let values = Matrix::from_rows(&rows).expect("equal-length rows");
    ActionChunk::new(values, ChunkOrigin::default()).expect("finite actions")
}

/// Emits the tokens of the next `n` expert actions, simulated from the true state.
#[derive(Debug, Clone)]
pub struct ExpertChunkPolicy {
    pub codec: FastModel,
}

impl PolicyModel for ExpertChunkPolicy {
    fn codec(&self) -> &FastModel {
        &self.codec
    }

    fn predict(&self, _obs: &Observation, scene: &Scene<'_>) -> Result<Vec<u32>, PolicyError> {
        let spec = self.codec.chunk_spec();
        let mut state = scene.state.clone();
        let mut actions = Vec::with_capacity(spec.n);
        for _ in 0..spec.n {
            let a = sim::scripted_expert(&state, scene.task);
            state = sim::step(&state, &a);
            actions.push(a);
        }
        Ok(self.codec.encode(&chunk_from_actions(&actions, spec))?)
    }
}

/// Height the max-delta policy heads for above its goal object.
pub const MAX_DELTA_TARGET_Z: f64 = 0.1;

/// Heads straight for the point above the first goal object at full speed:
/// the translation is scaled so its largest component is the delta clip, and
/// the same action fills every row of the chunk.
#[derive(Debug, Clone)]
pub struct MaxDeltaPolicy {
    pub codec: FastModel,
}

impl MaxDeltaPolicy {
    pub fn action(state: &EnvState, task: &TaskSpec) -> EnvAction {
        let target = task
            .goals
            .first()
            .and_then(|g| state.object(g.object))
            .map_or([0.5, 0.5], |o| o.pos);
        let [gx, gy, gz] = state.gripper;
        let d = [target[0] - gx, target[1] - gy, MAX_DELTA_TARGET_Z - gz];
        let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak <= params::DELTA_CLIP {
            return EnvAction::translation(d[0], d[1], d[2], 0.0);
        }
        let s = params::DELTA_CLIP / peak;
        EnvAction::translation(d[0] * s, d[1] * s, d[2] * s, 0.0)
    }
}

impl PolicyModel for MaxDeltaPolicy {
    fn codec(&self) -> &FastModel {
        &self.codec
    }

    fn predict(&self, _obs: &Observation, scene: &Scene<'_>) -> Result<Vec<u32>, PolicyError> {
        let spec = self.codec.chunk_spec();
        let a = Self::action(scene.state, scene.task);
        Ok(self
            .codec
            .encode(&chunk_from_actions(&vec![a; spec.n], spec))?)
    }
}

pub const DEMO_EMBODIMENT: &str = "tabletop-7dof";

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("demo count must be positive")]
    ZeroCount,
    #[error("suite is empty")]
    EmptySuite,
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error("expert failed task {task} with seed {seed}")]
    ExpertFailed { task: String, seed: u64 },
}

/// Expert demonstrations over a suite, round-robin over tasks.
///
/// Demo `i` uses task `i % suite.len()` with seed `trial_seed(seed, task id, i)`.
/// Each trajectory ends with `settle` idle steps at the solved state so that
/// the final approach states also start full-length chunks.
pub fn generate_demos(
    suite: &[TaskSpec],
    count: usize,
    seed: u64,
    settle: usize,
) -> Result<Vec<Trajectory>, DemoError> {
    if count == 0 {
        return Err(DemoError::ZeroCount);
    }
    if suite.is_empty() {
        return Err(DemoError::EmptySuite);
    }
    (0..count)
        .map(|i| {
            let base = &suite[i % suite.len()];
            let task = base.with_seed(crate::eval::trial_seed(seed, &base.id, i as u64));
            let roll = sim::expert_rollout(&task, params::MAX_STEPS)?;
            let (last, _) = roll.last().expect("rollout holds the final state");
            if !sim::is_success(last, &task) {
                return Err(DemoError::ExpertFailed {
                    task: task.id.clone(),
                    seed: task.seed,
                });
            }
            let mut steps: Vec<Step> = roll[..roll.len() - 1]
                .iter()
                .map(|(s, a)| Step {
                    observation: observe(s, &task).features,
                    action: a.as_slice().to_vec(),
                })
                .collect();
            let idle = observe(last, &task).features;
            steps.extend((0..settle).map(|_| Step {
                observation: idle.clone(),
                action: EnvAction::ZERO.as_slice().to_vec(),
            }));
            Ok(Trajectory {
                instruction: task.instruction.clone(),
                embodiment: DEMO_EMBODIMENT.into(),
                steps,
            })
        })
        .collect()
}
