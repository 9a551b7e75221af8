//! Chunk executors, trial runner and success-rate reports.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::policy::{observe, PolicyModel, Scene};
use crate::sim::{self, params, EnvAction, StepLog, TaskSpec};
use crate::suites;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    /// Run every row of a predicted chunk before re-planning.
    ExecuteAll,
    /// Run row 0 only, then re-plan.
    ExecuteFirst,
}

impl ExecMode {
    pub fn label(self) -> &'static str {
        match self {
            ExecMode::ExecuteAll => "execute-all",
            ExecMode::ExecuteFirst => "execute-first",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "execute-all" | "all" => Ok(ExecMode::ExecuteAll),
            "execute-first" | "first" => Ok(ExecMode::ExecuteFirst),
            _ => Err(format!("unknown execution mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStrategy {
    pub mode: ExecMode,
    pub n: usize,
}

impl ExecStrategy {
    pub fn new(mode: ExecMode, n: usize) -> Self {
        Self { mode, n }
    }

    fn rows_per_plan(&self) -> usize {
        match self.mode {
            ExecMode::ExecuteAll => self.n,
            ExecMode::ExecuteFirst => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("strategy chunk size {strategy} does not match codec chunk size {codec}")]
    ChunkSize { strategy: usize, codec: usize },
    #[error("no episodes to score")]
    NoEpisodes,
    #[error("suite is empty")]
    EmptySuite,
    #[error("trials per task must be positive")]
    ZeroTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub trial: u64,
    pub seed: u64,
    pub success: bool,
    pub steps: u32,
    pub out_of_bounds: bool,
    pub decode_error: bool,
    pub policy_error: bool,
    /// First failure message, if a decode, policy or reset error ended the episode.
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<StepLog>,
}

impl EpisodeResult {
    fn failed(task: &TaskSpec, trial: u64, message: String) -> Self {
        Self {
            task_id: task.id.clone(),
            trial,
            seed: task.seed,
            success: false,
            steps: 0,
            out_of_bounds: false,
            decode_error: false,
            policy_error: true,
            error: Some(message),
            log: Vec::new(),
        }
    }
}

/// Runs one closed-loop episode; `trial` is only recorded.
pub fn run_episode(
    policy: &dyn PolicyModel,
    task: &TaskSpec,
    strategy: ExecStrategy,
    max_steps: u32,
    trial: u64,
) -> Result<EpisodeResult, EvalError> {
    run_episode_observed(policy, task, strategy, max_steps, trial, false, |_, _| {})
}

/// Like [`run_episode`], calling `on_step` with every state and the action
/// applied to it. `keep_log` stores a [`StepLog`] per step in the result.
pub fn run_episode_observed(
    policy: &dyn PolicyModel,
    task: &TaskSpec,
    strategy: ExecStrategy,
    max_steps: u32,
    trial: u64,
    keep_log: bool,
    mut on_step: impl FnMut(&sim::EnvState, &EnvAction),
) -> Result<EpisodeResult, EvalError> {
    let codec_n = policy.codec().chunk_spec().n;
    if strategy.n != codec_n {
        return Err(EvalError::ChunkSize {
            strategy: strategy.n,
            codec: codec_n,
        });
    }
    let mut state = match sim::reset(task) {
        Ok(s) => s,
        Err(e) => return Ok(EpisodeResult::failed(task, trial, e.to_string())),
    };
    let mut result = EpisodeResult {
        task_id: task.id.clone(),
        trial,
        seed: task.seed,
        success: false,
        steps: 0,
        out_of_bounds: false,
        decode_error: false,
        policy_error: false,
        error: None,
        log: Vec::new(),
    };
    let done = |s: &sim::EnvState| {
        sim::is_success(s, task) || s.out_of_bounds || s.step_count >= max_steps
    };

    'episode: while !done(&state) {
        let obs = observe(&state, task);
        let tokens = match policy.predict(
            &obs,
            &Scene {
                state: &state,
                task,
            },
        ) {
            Ok(t) => t,
            Err(e) => {
                result.policy_error = true;
                result.error = Some(e.to_string());
                break;
            }
        };
        let chunk = match policy.codec().decode(&tokens) {
            Ok(c) => c,
            Err(e) => {
                result.decode_error = true;
                result.error = Some(e.to_string());
                break;
            }
        };
        for row in 0..strategy.rows_per_plan() {
            let action = EnvAction::from_slice(chunk.values.row(row));
            on_step(&state, &action);
            let next = sim::step(&state, &action);
            if keep_log {
                result.log.push(StepLog {
                    step: state.step_count,
                    state: state.digest(),
                    action: action.0,
                    success: sim::is_success(&next, task),
                    out_of_bounds: next.out_of_bounds,
                });
            }
            state = next;
            if done(&state) {
                break 'episode;
            }
        }
    }
    result.steps = state.step_count;
    result.out_of_bounds = state.out_of_bounds;
    result.success = !state.out_of_bounds && sim::is_success(&state, task);
    Ok(result)
}

/// Percentage of successful episodes.
pub fn success_rate(results: &[EpisodeResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoEpisodes);
    }
    let wins = results.iter().filter(|r| r.success).count();
    Ok(100.0 * wins as f64 / results.len() as f64)
}

/// Stable per-trial seed: the first 8 bytes, little endian, of
/// SHA-256 over `"{seed}:{task_id}:{trial}"`.
pub fn trial_seed(seed: u64, task_id: &str, trial: u64) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{task_id}:{trial}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: String,
    pub task: String,
    /// Zero for rows that carry a reported rate rather than counted trials.
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    #[serde(default)]
    pub out_of_bounds: usize,
    #[serde(default)]
    pub decode_errors: usize,
    #[serde(default)]
    pub policy_errors: usize,
}

impl ReportRow {
    pub fn from_rate(category: &str, task: &str, rate: f64) -> Self {
        Self {
            category: category.into(),
            task: task.into(),
            trials: 0,
            successes: 0,
            rate,
            out_of_bounds: 0,
            decode_errors: 0,
            policy_errors: 0,
        }
    }

    pub fn from_results(
        category: &str,
        task: &str,
        results: &[EpisodeResult],
    ) -> Result<Self, EvalError> {
        Ok(Self {
            category: category.into(),
            task: task.into(),
            trials: results.len(),
            successes: results.iter().filter(|r| r.success).count(),
            rate: success_rate(results)?,
            out_of_bounds: results.iter().filter(|r| r.out_of_bounds).count(),
            decode_errors: results.iter().filter(|r| r.decode_error).count(),
            policy_errors: results.iter().filter(|r| r.policy_error).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAverage {
    pub category: String,
    pub tasks: usize,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// In order of first appearance in `rows`.
    pub categories: Vec<CategoryAverage>,
    pub overall: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Unweighted means of row rates, per category and overall.
pub fn aggregate_report(rows: Vec<ReportRow>) -> EvalReport {
    let mut order: Vec<&str> = Vec::new();
    for r in &rows {
        if !order.contains(&r.category.as_str()) {
            order.push(&r.category);
        }
    }
    let categories = order
        .iter()
        .map(|c| {
            let members: Vec<f64> = rows
                .iter()
                .filter(|r| r.category == *c)
                .map(|r| r.rate)
                .collect();
            CategoryAverage {
                category: c.to_string(),
                tasks: members.len(),
                average: mean(members.into_iter()),
            }
        })
        .collect();
    let overall = mean(rows.iter().map(|r| r.rate));
    EvalReport {
        rows,
        categories,
        overall,
    }
}

impl EvalReport {
    pub fn category(&self, name: &str) -> Option<f64> {
        self.categories
            .iter()
            .find(|c| c.category == name)
            .map(|c| c.average)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tw = self
            .rows
            .iter()
            .map(|r| r.task.len())
            .chain([4, 7])
            .max()
            .unwrap_or(7);
        let cw = self
            .rows
            .iter()
            .map(|r| r.category.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        writeln!(
            f,
            "{:<cw$}  {:<tw$}  {:>6}  {:>9}  {:>6}  {:>3}",
            "category", "task", "trials", "successes", "rate", "oob"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<cw$}  {:<tw$}  {:>6}  {:>9}  {:>6.1}  {:>3}",
                r.category, r.task, r.trials, r.successes, r.rate, r.out_of_bounds
            )?;
        }
        for c in &self.categories {
            writeln!(
                f,
                "{:<cw$}  {:<tw$}  {:>6}  {:>9}  {:>6.1}",
                c.category, "average", "", "", c.average
            )?;
        }
        write!(
            f,
            "{:<cw$}  {:<tw$}  {:>6}  {:>9}  {:>6.1}",
            "overall", "average", "", "", self.overall
        )
    }
}

/// Episodes in `(task, trial)` order together with the report built from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub report: EvalReport,
    pub episodes: Vec<EpisodeResult>,
}

/// Runs `trials` episodes of every task in parallel. Trial `i` of task `t`
/// resets with `trial_seed(seed, t.id, i)`; results do not depend on thread count.
pub fn run_suite(
    policy: &dyn PolicyModel,
    suite: &[TaskSpec],
    strategy: ExecStrategy,
    trials: usize,
    seed: u64,
    keep_logs: bool,
) -> Result<SuiteRun, EvalError> {
    if suite.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    if trials == 0 {
        return Err(EvalError::ZeroTrials);
    }
    let codec_n = policy.codec().chunk_spec().n;
    if strategy.n != codec_n {
        return Err(EvalError::ChunkSize {
            strategy: strategy.n,
            codec: codec_n,
        });
    }
    let jobs: Vec<(usize, u64)> = (0..suite.len())
        .flat_map(|t| (0..trials as u64).map(move |i| (t, i)))
        .collect();
    let episodes: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(t, i)| {
            let task = suite[t].with_seed(trial_seed(seed, &suite[t].id, i));
            run_episode_observed(
                policy,
                &task,
                strategy,
                params::MAX_STEPS,
                i,
                keep_logs,
                |_, _| {},
            )
            .unwrap_or_else(|e| EpisodeResult::failed(&task, i, e.to_string()))
        })
        .collect();
    let rows = suite
        .iter()
        .zip(episodes.chunks(trials))
        .map(|(task, res)| ReportRow::from_results(&suites::report_category(task), &task.id, res))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteRun {
        report: aggregate_report(rows),
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn results(wins: usize, n: usize) -> Vec<EpisodeResult> {
        let task = suites::single_suite()[0].clone();
        (0..n)
            .map(|i| {
                let mut r = EpisodeResult::failed(&task, i as u64, String::new());
                r.policy_error = false;
                r.error = None;
                r.success = i < wins;
                r
            })
            .collect()
    }

    #[test]
    fn success_rate_arithmetic() {
        assert_eq!(success_rate(&results(9, 10)).unwrap(), 90.0);
        assert_eq!(success_rate(&results(0, 10)).unwrap(), 0.0);
        assert_eq!(success_rate(&results(10, 10)).unwrap(), 100.0);
        assert_eq!(success_rate(&[]), Err(EvalError::NoEpisodes));
    }

    #[test]
    fn aggregates_are_unweighted_row_means() {
        let rows = vec![
            ReportRow::from_rate("a", "t1", 40.0),
            ReportRow::from_rate("b", "t2", 90.0),
            ReportRow::from_rate("a", "t3", 30.0),
            ReportRow::from_rate("b", "t4", 70.0),
            ReportRow::from_rate("b", "t5", 90.0),
        ];
        let rep = aggregate_report(rows);
        assert_eq!(rep.categories[0].category, "a");
        assert!((rep.category("a").unwrap() - 35.0).abs() < 1e-12);
        assert!((rep.category("b").unwrap() - 250.0 / 3.0).abs() < 1e-12);
        assert!((rep.overall - 64.0).abs() < 1e-12);
        let shown = rep.to_string();
        assert!(shown.contains("83.3"));
        assert!(shown.lines().last().unwrap().ends_with("64.0"));
    }

    #[test]
    fn trial_seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(1, "x", 0), trial_seed(1, "x", 0));
        assert_ne!(trial_seed(1, "x", 0), trial_seed(1, "x", 1));
        assert_ne!(trial_seed(1, "x", 0), trial_seed(1, "y", 0));
        assert_ne!(trial_seed(1, "x", 0), trial_seed(2, "x", 0));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "execute-first".parse::<ExecMode>().unwrap(),
            ExecMode::ExecuteFirst
        );
        assert_eq!("all".parse::<ExecMode>().unwrap(), ExecMode::ExecuteAll);
        assert!("both".parse::<ExecMode>().is_err());
    }
}
