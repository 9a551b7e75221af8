use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn actok(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actok"))
        .current_dir(dir)
        .env_remove("ACTOK_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = actok(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn pipeline(dir: &Path) {
    ok(
        dir,
        &[
            "gen-demos",
            "--seed",
            "7",
            "--count",
            "60",
            "--suite",
            "training",
            "--out-dir",
            "o",
        ],
    );
    ok(
        dir,
        &["fit", "--dataset", "o/demos.jsonl", "--out-dir", "o"],
    );
    ok(
        dir,
        &[
            "build-policy",
            "--model",
            "o/fast.json",
            "--dataset",
            "o/demos.jsonl",
            "--out-dir",
            "o",
        ],
    );
}

#[test]
fn verify_tables_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify-tables"]);
    assert!(out.contains("56.7") && out.contains("87.9"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&actok(dir.path(), &["gen-demos", "--count", "3"])), 3);
    assert_eq!(
        code(&actok(
            dir.path(),
            &["gen-demos", "--seed", "1", "--count", "0"]
        )),
        3
    );
    assert_eq!(
        code(&actok(
            dir.path(),
            &["gen-demos", "--seed", "1", "--suite", "nope"]
        )),
        3
    );
}

#[test]
fn bad_arguments_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&actok(dir.path(), &["fit"])), 2);
    assert_eq!(
        code(&actok(dir.path(), &["fit", "--dataset", "missing.jsonl"])),
        4
    );
    fs::write(dir.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(
        code(&actok(
            dir.path(),
            &["--config", "bad.toml", "verify-tables"]
        )),
        3
    );
}

#[test]
fn demos_and_fit_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "gen-demos",
                "--seed",
                "7",
                "--count",
                "20",
                "--out-dir",
                out,
            ],
        );
        ok(
            d,
            &[
                "fit",
                "--dataset",
                &format!("{out}/demos.jsonl"),
                "--out-dir",
                out,
            ],
        );
    }
    for f in [
        "demos.jsonl",
        "fast.json",
        "binning.json",
        "fit_summary.json",
    ] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("a/fit_summary.json")).unwrap()).unwrap();
    assert!(summary["fast"]["compression_ratio"].as_f64().unwrap() < 0.5);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("a/fit.run.json")).unwrap()).unwrap();
    assert_eq!(run["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn encode_decode_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-demos",
            "--seed",
            "3",
            "--count",
            "10",
            "--suite",
            "single",
            "--out-dir",
            "o",
        ],
    );
    ok(
        d,
        &[
            "fit",
            "--dataset",
            "o/demos.jsonl",
            "--out-dir",
            "o",
            "--scale",
            "64",
        ],
    );
    ok(
        d,
        &[
            "encode",
            "--model",
            "o/fast.json",
            "--input",
            "o/demos.jsonl",
            "--stride",
            "5",
            "--out-dir",
            "o",
        ],
    );
    ok(
        d,
        &[
            "decode",
            "--model",
            "o/fast.json",
            "--input",
            "o/tokens.jsonl",
            "--out-dir",
            "o",
        ],
    );

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("o/fit_summary.json")).unwrap()).unwrap();
    let bound = summary["fast"]["round_trip_bound"].as_f64().unwrap();
    let demos: Vec<serde_json::Value> = fs::read_to_string(d.join("o/demos.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let decoded = fs::read_to_string(d.join("o/decoded.jsonl")).unwrap();
    assert!(!decoded.is_empty());
    for line in decoded.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        let steps = &demos[rec["trajectory"].as_u64().unwrap() as usize]["steps"];
        let start = rec["start"].as_u64().unwrap() as usize;
        for (r, row) in rec["values"].as_array().unwrap().iter().enumerate() {
            let want = steps[start + r]["action"].as_array().unwrap();
            for (a, b) in row.as_array().unwrap().iter().zip(want) {
                assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= bound + 1e-12);
            }
        }
    }

    // Binning round trip goes through the same commands.
    ok(
        d,
        &[
            "encode",
            "--model",
            "o/binning.json",
            "--input",
            "o/demos.jsonl",
            "--out-dir",
            "o",
            "-o",
            "bins.jsonl",
        ],
    );
    ok(
        d,
        &[
            "decode",
            "--model",
            "o/binning.json",
            "--input",
            "o/bins.jsonl",
            "--out-dir",
            "o",
            "-o",
            "unbinned.jsonl",
        ],
    );

    fs::write(
        d.join("bad.jsonl"),
        "{\"trajectory\":0,\"start\":0,\"tokens\":[99999]}\nnot json\n",
    )
    .unwrap();
    let out = actok(
        d,
        &[
            "decode",
            "--model",
            "o/fast.json",
            "--input",
            "bad.jsonl",
            "--out-dir",
            "o",
            "-o",
            "x.jsonl",
        ],
    );
    assert_eq!(code(&out), 5);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1") && err.contains("line 2"), "{err}");

    fs::write(d.join("empty.jsonl"), "").unwrap();
    ok(
        d,
        &[
            "decode",
            "--model",
            "o/fast.json",
            "--input",
            "empty.jsonl",
            "--out-dir",
            "o",
            "-o",
            "e.jsonl",
        ],
    );
    assert_eq!(fs::read_to_string(d.join("o/e.jsonl")).unwrap(), "");
}

#[test]
fn eval_is_reproducible_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let args = |name: &'static str| {
        vec![
            "eval",
            "--model",
            "o/fast.json",
            "--policy",
            "o/policy.json",
            "--suite",
            "table",
            "--trials",
            "2",
            "--seed",
            "5",
            "--out-dir",
            "o",
            "--name",
            name,
        ]
    };
    let first = ok(d, &args("r1"));
    ok(d, &args("r2"));
    assert!(first.contains("overall"));
    let strip = |name: &str| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join(format!("o/{name}.json"))).unwrap())
                .unwrap();
        v.as_object_mut().unwrap().remove("episodes");
        v
    };
    assert_eq!(strip("r1"), strip("r2"));
    let report = strip("r1");
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 9);
    assert_eq!(
        fs::read_to_string(d.join("o/r1.episodes.jsonl"))
            .unwrap()
            .lines()
            .count(),
        18
    );

    let shown = ok(d, &["report", "o/r1.json", "--against", "o/r2.json"]);
    assert!(shown.contains("(+0.0)"));

    // A doctored average is caught.
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("o/r1.json")).unwrap()).unwrap();
    v["report"]["overall"] = serde_json::json!(101.0);
    fs::write(d.join("o/bad.json"), v.to_string()).unwrap();
    assert_eq!(code(&actok(d, &["report", "o/bad.json"])), 8);

    // knn needs its memory, and the memory must match the codec.
    assert_eq!(
        code(&actok(
            d,
            &[
                "eval",
                "--model",
                "o/fast.json",
                "--seed",
                "1",
                "--out-dir",
                "o"
            ]
        )),
        3
    );
    ok(
        d,
        &[
            "fit",
            "--dataset",
            "o/demos.jsonl",
            "--out-dir",
            "o2",
            "--kind",
            "fast",
            "--n",
            "1",
        ],
    );
    let out = actok(
        d,
        &[
            "eval",
            "--model",
            "o2/fast.json",
            "--policy",
            "o/policy.json",
            "--seed",
            "1",
            "--out-dir",
            "o2",
        ],
    );
    assert_eq!(code(&out), 6);
}

#[test]
fn expert_policy_scores_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-demos",
            "--seed",
            "7",
            "--count",
            "20",
            "--out-dir",
            "o",
        ],
    );
    ok(
        d,
        &[
            "fit",
            "--dataset",
            "o/demos.jsonl",
            "--out-dir",
            "o",
            "--kind",
            "fast",
        ],
    );
    let out = ok(
        d,
        &[
            "eval",
            "--model",
            "o/fast.json",
            "--policy-kind",
            "expert",
            "--suite",
            "single",
            "--trials",
            "2",
            "--seed",
            "1",
            "--out-dir",
            "o",
        ],
    );
    assert!(
        out.lines()
            .any(|l| l.starts_with("overall") && l.trim_end().ends_with("100.0")),
        "{out}"
    );
}

#[test]
fn config_file_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "seed = 11\nout_dir = \"from-config\"\n[demos]\nsuite = \"single\"\ncount = 4\nsettle = 0\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "gen-demos"]);
    assert!(d.join("from-config/demos.jsonl").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_actok"))
        .current_dir(d)
        .env("ACTOK_OUT_DIR", "from-env")
        .args(["--config", "run.toml", "gen-demos", "--count", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(d.join("from-env/demos.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("from-env/gen-demos.run.json")).unwrap())
            .unwrap();
    assert_eq!(run["config"]["seed"], 11);
    assert_eq!(run["config"]["demo_count"], 2);
}

#[test]
fn suites_export_and_load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["export-suite", "spatial", "--out-dir", "s"]);
    ok(
        d,
        &[
            "gen-demos",
            "--seed",
            "2",
            "--count",
            "3",
            "--suite",
            "s/spatial.suite.json",
            "--out-dir",
            "s",
        ],
    );
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("s/gen-demos.run.json")).unwrap()).unwrap();
    assert_eq!(run["inputs"].as_array().unwrap().len(), 1);
}
