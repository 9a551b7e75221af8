use actok_core::eval::{run_episode, run_suite, EvalError, ExecMode, ExecStrategy};
use actok_core::fast::{fit_fast, FastConfig, FastModel, ScaleChoice};
use actok_core::policy::{
    generate_demos, ExpertChunkPolicy, KnnPolicy, Observation, PolicyError, PolicyModel, Scene,
};
use actok_core::suites;
use actok_core::trajectory::{chunk_dataset, ChunkSpec};

fn codec(n: usize) -> FastModel {
    let spec = ChunkSpec::new(n, 7).unwrap();
    let demos = generate_demos(&suites::training_suite(), 40, 11, 4).unwrap();
    let chunks = chunk_dataset(&demos, spec, 1).unwrap();
    fit_fast(&chunks, &FastConfig::new(spec, ScaleChoice::Fixed(16.0)))
        .unwrap()
        .0
}

struct Garbage(FastModel);

impl PolicyModel for Garbage {
    fn codec(&self) -> &FastModel {
        &self.0
    }
    fn predict(&self, _: &Observation, _: &Scene<'_>) -> Result<Vec<u32>, PolicyError> {
        Ok(vec![0])
    }
}

#[test]
fn expert_as_policy_solves_builtin_tasks() {
    let p = ExpertChunkPolicy { codec: codec(5) };
    for mode in [ExecMode::ExecuteFirst, ExecMode::ExecuteAll] {
        let run = run_suite(
            &p,
            &suites::training_suite(),
            ExecStrategy::new(mode, 5),
            3,
            9,
            false,
        )
        .unwrap();
        assert_eq!(run.report.overall, 100.0, "{mode}");
    }
}

#[test]
fn reports_are_deterministic_and_complete() {
    let c = codec(5);
    let demos = generate_demos(&suites::single_suite(), 60, 2, 4).unwrap();
    let p = KnnPolicy::build(&demos, c, ChunkSpec::new(5, 7).unwrap()).unwrap();
    let suite = &suites::single_suite()[..3];
    let s = ExecStrategy::new(ExecMode::ExecuteFirst, 5);
    let a = run_suite(&p, suite, s, 10, 4, true).unwrap();
    let b = run_suite(&p, suite, s, 10, 4, true).unwrap();
    assert_eq!(a.episodes.len(), 30);
    assert_eq!(a, b);
    assert_eq!(a.report.to_json(), b.report.to_json());
    for e in &a.episodes {
        assert_eq!(e.log.len(), e.steps as usize);
        assert!(!(e.success && e.out_of_bounds));
    }
    for r in &a.report.rows {
        assert_eq!(r.rate, 100.0 * r.successes as f64 / r.trials as f64);
    }
}

#[test]
fn decode_errors_are_scored_failures() {
    let p = Garbage(codec(5));
    let task = suites::single_suite()[0].clone();
    let r = run_episode(
        &p,
        &task,
        ExecStrategy::new(ExecMode::ExecuteAll, 5),
        200,
        0,
    )
    .unwrap();
    assert!(r.decode_error && !r.success);
    assert!(r.error.is_some());
    let run = run_suite(
        &p,
        &suites::single_suite(),
        ExecStrategy::new(ExecMode::ExecuteAll, 5),
        2,
        0,
        false,
    )
    .unwrap();
    assert_eq!(run.report.overall, 0.0);
    assert_eq!(run.report.rows[0].decode_errors, 2);
}

#[test]
fn unknown_instructions_fail_without_aborting() {
    let c = codec(1);
    let demos = generate_demos(&suites::single_suite(), 10, 2, 0).unwrap();
    let p = KnnPolicy::build(&demos, c, ChunkSpec::new(1, 7).unwrap()).unwrap();
    let run = run_suite(
        &p,
        &suites::spatial_suite(),
        ExecStrategy::new(ExecMode::ExecuteFirst, 1),
        2,
        0,
        false,
    )
    .unwrap();
    assert!(run.episodes.iter().all(|e| e.policy_error && !e.success));
}

#[test]
fn mismatched_strategy_is_rejected() {
    let p = ExpertChunkPolicy { codec: codec(5) };
    let task = suites::single_suite()[0].clone();
    assert_eq!(
        run_episode(
            &p,
            &task,
            ExecStrategy::new(ExecMode::ExecuteFirst, 1),
            200,
            0
        ),
        Err(EvalError::ChunkSize {
            strategy: 1,
            codec: 5
        })
    );
    assert_eq!(
        run_suite(
            &p,
            &[],
            ExecStrategy::new(ExecMode::ExecuteFirst, 5),
            1,
            0,
            false
        )
        .unwrap_err(),
        EvalError::EmptySuite
    );
}

#[test]
fn table_suite_reports_three_categories() {
    let p = ExpertChunkPolicy { codec: codec(5) };
    let run = run_suite(
        &p,
        &suites::table_suite(),
        ExecStrategy::new(ExecMode::ExecuteFirst, 5),
        2,
        1,
        false,
    )
    .unwrap();
    assert_eq!(run.report.rows.len(), 9);
    let cats: Vec<&str> = run
        .report
        .categories
        .iter()
        .map(|c| c.category.as_str())
        .collect();
    assert_eq!(cats.len(), 3);
    let mean: f64 = run.report.rows.iter().map(|r| r.rate).sum::<f64>() / 9.0;
    assert!((run.report.overall - mean).abs() < 1e-12);
}
