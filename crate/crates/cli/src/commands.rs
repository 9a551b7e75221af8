use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use actok_core::binning::{BinningScheme, BINNING_FORMAT};
use actok_core::eval::{aggregate_report, run_suite, EvalReport, ExecStrategy};
use actok_core::fast::{fit_fast, FastConfig, FastModel, ScaleChoice, FAST_FORMAT};
use actok_core::policy::{
    generate_demos, ExpertChunkPolicy, KnnPolicy, MaxDeltaPolicy, PolicyModel,
};
use actok_core::sim::TaskSpec;
use actok_core::trajectory::{
    chunk_dataset, load_dataset, save_dataset, ChunkSpec, Trajectory, DEFAULT_ACTION_DIM,
};
use actok_core::{sha256_hex, suites, tables};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{override_with, FileConfig, Resolved, DEFAULT_SCALE};
use crate::error::{policy_error, CliError};
use crate::{CodecArgs, Command, FitKind, PolicyKind};

pub struct Context {
    cfg: Resolved,
}

impl Context {
    pub fn new(
        config: Option<&Path>,
        out_dir: Option<PathBuf>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let file = FileConfig::load(config)?;
        let mut cfg = Resolved::from_file(&file, out_dir);
        if seed.is_some() {
            cfg.seed = seed;
        }
        Ok(Self { cfg })
    }
}

/// What a command read and wrote, saved as `<command>.run.json`.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a Resolved,
    inputs: Vec<InputFingerprint>,
    outputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct InputFingerprint {
    path: PathBuf,
    sha256: String,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn fingerprint(path: &Path) -> Result<InputFingerprint, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputFingerprint {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

fn record_run(
    cfg: &Resolved,
    command: &str,
    inputs: &[&Path],
    outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    let rec = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        inputs: inputs
            .iter()
            .map(|p| fingerprint(p))
            .collect::<Result<_, _>>()?,
        outputs,
    };
    let text = serde_json::to_string_pretty(&rec).expect("run record serializes") + "\n";
    write(&cfg.out(Path::new(&format!("{command}.run.json"))), &text)
}

fn load_suite(spec: &str) -> Result<(Vec<TaskSpec>, Option<PathBuf>), CliError> {
    if let Some(s) = suites::builtin(spec) {
        return Ok((s, None));
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "unknown suite '{spec}': not a built-in ({}) and no such file",
            suites::BUILTIN_SUITES.join(", ")
        )));
    }
    let tasks: Vec<TaskSpec> = serde_json::from_str(&read(&path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if tasks.is_empty() {
        return Err(CliError::Data(format!(
            "{}: suite is empty",
            path.display()
        )));
    }
    for t in &tasks {
        t.validate()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok((tasks, Some(path)))
}

enum Model {
    Fast(FastModel),
    Binning(BinningScheme),
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Data(format!("{}: {e}", path.display()));
    match value.get("format").and_then(|f| f.as_str()) {
        Some(FAST_FORMAT) => FastModel::from_json(&text)
            .map(Model::Fast)
            .map_err(|e| bad(e.to_string())),
        Some(BINNING_FORMAT) => BinningScheme::from_json(&text)
            .map(Model::Binning)
            .map_err(|e| bad(e.to_string())),
        other => Err(bad(format!("unrecognized model format {other:?}"))),
    }
}

fn load_fast(path: &Path) -> Result<FastModel, CliError> {
    match load_model(path)? {
        Model::Fast(m) => Ok(m),
        Model::Binning(_) => Err(CliError::Config(format!(
            "{}: this command needs a chunk codec, not a binning model",
            path.display()
        ))),
    }
}

fn spec_for(cfg: &Resolved, d: usize) -> Result<ChunkSpec, CliError> {
    ChunkSpec::new(cfg.chunk_n, d).map_err(|e| CliError::Config(e.to_string()))
}

fn action_dim(demos: &[Trajectory]) -> usize {
    demos
        .iter()
        .find_map(|t| t.steps.first())
        .map_or(DEFAULT_ACTION_DIM, |s| s.action.len())
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenRecord {
    trajectory: usize,
    start: usize,
    tokens: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DecodedRecord {
    trajectory: usize,
    start: usize,
    values: Vec<Vec<f64>>,
}

/// Saved report with what produced it.
#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    suite: String,
    strategy: ExecStrategy,
    trials: usize,
    seed: u64,
    codec_fingerprint: String,
    policy: String,
    policy_fingerprint: Option<String>,
    episodes: PathBuf,
    report: EvalReport,
}

fn apply_codec_args(cfg: &mut Resolved, a: CodecArgs) {
    override_with(&mut cfg.chunk_n, a.n);
    override_with(&mut cfg.stride, a.stride);
    override_with(&mut cfg.clamp, a.clamp);
    override_with(&mut cfg.max_vocab, a.max_vocab);
    override_with(&mut cfg.axis, a.axis);
    override_with(&mut cfg.bins, a.bins);
    if a.scale.is_some() {
        cfg.scale = a.scale;
        cfg.target_error = None;
    }
    if a.target_error.is_some() {
        cfg.target_error = a.target_error;
        cfg.scale = None;
    }
}

pub fn run(ctx: Context, command: Command) -> Result<(), CliError> {
    let mut cfg = ctx.cfg;
    match command {
        Command::GenDemos {
            suite,
            count,
            settle,
            output,
        } => {
            override_with(&mut cfg.demo_suite, suite);
            override_with(&mut cfg.demo_count, count);
            override_with(&mut cfg.settle, settle);
            let seed = cfg.require_seed()?;
            let (tasks, suite_file) = load_suite(&cfg.demo_suite)?;
            if cfg.demo_count == 0 {
                return Err(CliError::Config("demo count must be positive".into()));
            }
            let demos = generate_demos(&tasks, cfg.demo_count, seed, cfg.settle)
                .map_err(|e| CliError::Model(e.to_string()))?;
            let path = cfg.out(&output);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let manifest = save_dataset(&path, &demos)?;
            let steps: usize = demos.iter().map(Trajectory::len).sum();
            println!(
                "wrote {} demos ({steps} steps, obs {} / action {}) to {}",
                manifest.records,
                manifest.obs_dim,
                manifest.action_dim,
                path.display()
            );
            let inputs: Vec<&Path> = suite_file.as_deref().into_iter().collect();
            record_run(
                &cfg,
                "gen-demos",
                &inputs,
                vec![path.clone(), actok_core::trajectory::manifest_path(&path)],
            )
        }

        Command::Fit {
            dataset,
            kind,
            codec,
        } => {
            apply_codec_args(&mut cfg, codec);
            let demos = load_dataset(&dataset)?;
            let mut outputs = Vec::new();
            let mut summary = serde_json::Map::new();
            if matches!(kind, FitKind::Fast | FitKind::All) {
                let spec = spec_for(&cfg, action_dim(&demos))?;
                let chunks = chunk_dataset(&demos, spec, cfg.stride)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let scale = match (cfg.scale, cfg.target_error) {
                    (_, Some(t)) => ScaleChoice::Target(t),
                    (Some(g), None) => ScaleChoice::Fixed(g),
                    (None, None) => ScaleChoice::Fixed(DEFAULT_SCALE),
                };
                let mut fc = FastConfig::new(spec, scale);
                fc.axis = cfg.axis;
                fc.clamp = cfg.clamp;
                fc.max_vocab = cfg.max_vocab;
                let (model, s) =
                    fit_fast(&chunks, &fc).map_err(|e| CliError::Model(e.to_string()))?;
                for w in &s.warnings {
                    warn!("{w}");
                }
                let path = cfg.out(Path::new("fast.json"));
                write(&path, &model.to_json())?;
                println!(
                    "fast: {} chunks {}x{}, scale {}, clamp {}, vocab {} ({} merges), saturation {:.3}%, \
                     mean {:.2} tokens/chunk vs {} baseline, ratio {:.3}, fingerprint {}",
                    s.chunks,
                    spec.n,
                    spec.d,
                    s.scale,
                    s.clamp,
                    s.vocab_used,
                    s.merges,
                    100.0 * s.saturation_fraction,
                    s.mean_tokens_per_chunk,
                    s.baseline_tokens_per_chunk,
                    s.compression_ratio,
                    &model.fingerprint()[..16]
                );
                let mut entry = serde_json::to_value(&s).expect("summary serializes");
                entry["fingerprint"] = model.fingerprint().into();
                entry["round_trip_bound"] = model.round_trip_bound().into();
                summary.insert("fast".into(), entry);
                outputs.push(path);
            }
            if matches!(kind, FitKind::Binning | FitKind::All) {
                let actions: Vec<Vec<f64>> = demos
                    .iter()
                    .flat_map(|t| t.actions().map(<[f64]>::to_vec))
                    .collect();
                let scheme =
                    BinningScheme::fit_with(&actions, cfg.bins, actok_core::binning::DEFAULT_CLIP)
                        .map_err(|e| CliError::Model(e.to_string()))?;
                let path = cfg.out(Path::new("binning.json"));
                let json = scheme.to_json();
                write(&path, &json)?;
                let tokens_per_chunk = cfg.chunk_n * scheme.dims();
                println!(
                    "binning: {} actions, {} bins x {} dims, {tokens_per_chunk} tokens per {}-step chunk",
                    actions.len(),
                    scheme.num_bins(),
                    scheme.dims(),
                    cfg.chunk_n
                );
                summary.insert(
                    "binning".into(),
                    serde_json::json!({
                        "actions": actions.len(),
                        "bins": scheme.num_bins(),
                        "dims": scheme.dims(),
                        "tokens_per_chunk": tokens_per_chunk,
                        "fingerprint": sha256_hex(json.as_bytes()),
                    }),
                );
                outputs.push(path);
            }
            let path = cfg.out(Path::new("fit_summary.json"));
            write(
                &path,
                &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
            )?;
            outputs.push(path);
            record_run(&cfg, "fit", &[&dataset], outputs)
        }

        Command::Encode {
            model,
            input,
            stride,
            output,
        } => {
            override_with(&mut cfg.stride, stride);
            let demos = load_dataset(&input)?;
            let mut lines = String::new();
            let mut push = |r: TokenRecord| {
                lines.push_str(&serde_json::to_string(&r).expect("record serializes"));
                lines.push('\n');
            };
            let mut count = 0usize;
            match load_model(&model)? {
                Model::Fast(m) => {
                    let spec = m.chunk_spec();
                    let chunks = chunk_dataset(&demos, spec, cfg.stride)
                        .map_err(|e| CliError::Data(e.to_string()))?;
                    for c in &chunks {
                        let tokens = m.encode(c).map_err(|e| {
                            CliError::Data(format!(
                                "trajectory {} step {}: {e}",
                                c.origin.trajectory, c.origin.start
                            ))
                        })?;
                        push(TokenRecord {
                            trajectory: c.origin.trajectory,
                            start: c.origin.start,
                            tokens,
                        });
                        count += 1;
                    }
                }
                Model::Binning(b) => {
                    for (i, t) in demos.iter().enumerate() {
                        for (j, a) in t.actions().enumerate() {
                            let tokens = b.encode(a).map_err(|e| {
                                CliError::Data(format!("trajectory {i} step {j}: {e}"))
                            })?;
                            push(TokenRecord {
                                trajectory: i,
                                start: j,
                                tokens,
                            });
                            count += 1;
                        }
                    }
                }
            }
            let path = cfg.out(&output);
            write(&path, &lines)?;
            println!("wrote {count} token records to {}", path.display());
            record_run(&cfg, "encode", &[&model, &input], vec![path])
        }

        Command::Decode {
            model,
            input,
            output,
        } => {
            let m = load_model(&model)?;
            let file = fs::File::open(&input).map_err(|e| CliError::io(&input, e))?;
            let mut lines = String::new();
            let mut errors = Vec::new();
            let mut count = 0usize;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| CliError::io(&input, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: TokenRecord = match serde_json::from_str(&line) {
                    Ok(r) => r,
                    Err(e) => {
                        errors.push(format!("line {}: {e}", i + 1));
                        continue;
                    }
                };
                let values = match &m {
                    Model::Fast(f) => f
                        .decode(&rec.tokens)
                        .map(|c| c.values.iter_rows().map(<[f64]>::to_vec).collect())
                        .map_err(|e| e.to_string()),
                    Model::Binning(b) => b
                        .decode(&rec.tokens)
                        .map(|v| vec![v])
                        .map_err(|e| e.to_string()),
                };
                match values {
                    Ok(values) => {
                        let out = DecodedRecord {
                            trajectory: rec.trajectory,
                            start: rec.start,
                            values,
                        };
                        lines.push_str(&serde_json::to_string(&out).expect("record serializes"));
                        lines.push('\n');
                        count += 1;
                    }
                    Err(e) => errors.push(format!("line {}: {e}", i + 1)),
                }
            }
            let path = cfg.out(&output);
            write(&path, &lines)?;
            println!("decoded {count} records to {}", path.display());
            record_run(&cfg, "decode", &[&model, &input], vec![path])?;
            if errors.is_empty() {
                Ok(())
            } else {
                for e in &errors {
                    eprintln!("{e}");
                }
                Err(CliError::Data(format!(
                    "{} malformed records in {}",
                    errors.len(),
                    input.display()
                )))
            }
        }

        Command::BuildPolicy {
            model,
            dataset,
            output,
        } => {
            let codec = load_fast(&model)?;
            let demos = load_dataset(&dataset)?;
            let spec = codec.chunk_spec();
            let policy =
                KnnPolicy::build(&demos, codec, spec).map_err(|e| policy_error(&dataset, e))?;
            let path = cfg.out(&output);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            policy.save(&path).map_err(|e| policy_error(&path, e))?;
            println!(
                "policy memory: {} entries from {} demos -> {}",
                policy.len(),
                demos.len(),
                path.display()
            );
            record_run(&cfg, "build-policy", &[&model, &dataset], vec![path])
        }

        Command::Eval {
            model,
            policy,
            policy_kind,
            suite,
            mode,
            trials,
            logs,
            name,
        } => {
            override_with(&mut cfg.eval_suite, suite);
            override_with(&mut cfg.mode, mode);
            override_with(&mut cfg.trials, trials);
            let seed = cfg.require_seed()?;
            let codec = load_fast(&model)?;
            let codec_fingerprint = codec.fingerprint();
            let (tasks, suite_file) = load_suite(&cfg.eval_suite)?;
            let strategy = ExecStrategy::new(cfg.mode, codec.chunk_spec().n);
            let mut inputs: Vec<&Path> = vec![&model];
            let (runner, policy_fingerprint): (Box<dyn PolicyModel>, Option<String>) =
                match policy_kind {
                    PolicyKind::Knn => {
                        let path = policy.as_deref().ok_or_else(|| {
                            CliError::Config("--policy is required for the knn policy".into())
                        })?;
                        inputs.push(path);
                        let p = KnnPolicy::load(path, codec).map_err(|e| policy_error(path, e))?;
                        (Box::new(p), Some(fingerprint(path)?.sha256))
                    }
                    PolicyKind::Expert => (Box::new(ExpertChunkPolicy { codec }), None),
                    PolicyKind::MaxDelta => (Box::new(MaxDeltaPolicy { codec }), None),
                };
            if let Some(f) = &suite_file {
                inputs.push(f);
            }
            info!(
                "running {} tasks x {} trials, {}",
                tasks.len(),
                cfg.trials,
                strategy.mode
            );
            let run = run_suite(runner.as_ref(), &tasks, strategy, cfg.trials, seed, logs)
                .map_err(|e| CliError::Eval(e.to_string()))?;

            let episodes_path = cfg.out(Path::new(&format!("{name}.episodes.jsonl")));
            let mut ep = String::new();
            for e in &run.episodes {
                ep.push_str(&serde_json::to_string(e).expect("episode serializes"));
                ep.push('\n');
            }
            write(&episodes_path, &ep)?;
            let file = ReportFile {
                suite: cfg.eval_suite.clone(),
                strategy,
                trials: cfg.trials,
                seed,
                codec_fingerprint,
                policy: format!("{policy_kind:?}").to_lowercase(),
                policy_fingerprint,
                episodes: episodes_path.clone(),
                report: run.report,
            };
            let json_path = cfg.out(Path::new(&format!("{name}.json")));
            let text_path = cfg.out(Path::new(&format!("{name}.txt")));
            write(
                &json_path,
                &(serde_json::to_string_pretty(&file).expect("report serializes") + "\n"),
            )?;
            write(&text_path, &format!("{}\n", file.report))?;
            println!("{}", file.report);
            let oob: usize = file.report.rows.iter().map(|r| r.out_of_bounds).sum();
            println!("out_of_bounds episodes: {oob}");
            record_run(
                &cfg,
                "eval",
                &inputs,
                vec![json_path, text_path, episodes_path],
            )
        }

        Command::Report { input, against } => {
            let load = |p: &Path| -> Result<ReportFile, CliError> {
                let f: ReportFile = serde_json::from_str(&read(p)?)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                check_report(&f.report)
                    .map_err(|e| CliError::Check(format!("{}: {e}", p.display())))?;
                Ok(f)
            };
            let a = load(&input)?;
            println!(
                "{} ({} x {} trials, {}, seed {})",
                input.display(),
                a.suite,
                a.trials,
                a.strategy.mode,
                a.seed
            );
            println!("{}", a.report);
            if let Some(other) = against {
                let b = load(&other)?;
                println!();
                println!(
                    "{} ({} x {} trials, {}, seed {})",
                    other.display(),
                    b.suite,
                    b.trials,
                    b.strategy.mode,
                    b.seed
                );
                println!("{}", b.report);
                println!();
                println!(
                    "overall {:.1} vs {:.1} ({:+.1})",
                    a.report.overall,
                    b.report.overall,
                    b.report.overall - a.report.overall
                );
            }
            Ok(())
        }

        Command::VerifyTables { json } => {
            let checks = tables::verify();
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&checks).expect("checks serialize")
                );
            } else {
                for c in &checks {
                    println!(
                        "{} {:<40} reported {:>5.1}  computed {:>8.4}",
                        if c.ok { "ok  " } else { "FAIL" },
                        c.name,
                        c.reported,
                        c.computed
                    );
                }
            }
            let failed = checks.iter().filter(|c| !c.ok).count();
            if failed > 0 {
                return Err(CliError::Check(format!(
                    "{failed} table averages do not match"
                )));
            }
            Ok(())
        }

        Command::ExportSuite { name, output } => {
            let tasks = suites::builtin(&name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown suite '{name}' ({})",
                    suites::BUILTIN_SUITES.join(", ")
                ))
            })?;
            let path =
                cfg.out(&output.unwrap_or_else(|| PathBuf::from(format!("{name}.suite.json"))));
            write(
                &path,
                &(serde_json::to_string_pretty(&tasks).expect("suite serializes") + "\n"),
            )?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "wrote {} tasks to {}", tasks.len(), path.display()).ok();
            Ok(())
        }
    }
}

/// A stored report must agree with the averages recomputed from its rows.
fn check_report(r: &EvalReport) -> Result<(), String> {
    let fresh = aggregate_report(r.rows.clone());
    let close = |a: f64, b: f64| (a - b).abs() <= 0.05;
    for row in &r.rows {
        if row.trials > 0 && !close(row.rate, 100.0 * row.successes as f64 / row.trials as f64) {
            return Err(format!("row {} rate does not match its counts", row.task));
        }
    }
    if !close(fresh.overall, r.overall) {
        return Err(format!(
            "overall {} but rows average {}",
            r.overall, fresh.overall
        ));
    }
    for (a, b) in fresh.categories.iter().zip(&r.categories) {
        if a.category != b.category || !close(a.average, b.average) {
            return Err(format!(
                "category {} average does not match its rows",
                b.category
            ));
        }
    }
    Ok(())
}
