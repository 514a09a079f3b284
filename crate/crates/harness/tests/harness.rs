use std::process::Command;

use gridx::evaluation::{OraclePolicy, Policy};
use gridx::model::NUM_ACTIONS;
use gridx::training::{stream_rng, Stream};
use gridx::{Action, Checkpoint, GameInstance, HeadKind, Method, MetricsRow, Model, Position, Representation};
use gridx_harness::matrix::{checkpoint_path, run_one, ExperimentSpec};
use gridx_harness::results::{read_csv, write_csv, RunRecord, TEST_CSV, TRAIN_CSV};
use gridx_harness::trace::trace_with;
use gridx_harness::{emit_report, run_matrix, trace_episode, HarnessError, ResultsTable, Settings, Variant};

fn tiny_settings(n_seeds: usize) -> Settings {
    let mut s = Settings::default();
    s.apply("epochs", "2").unwrap();
    s.n_seeds = n_seeds;
    s.base_seed = 40;
    s
}

fn tiny_spec(dir: &std::path::Path, variants: &[Variant], sizes: &[usize], n_seeds: usize) -> ExperimentSpec {
    ExperimentSpec {
        variants: variants.to_vec(),
        sizes: sizes.to_vec(),
        settings: tiny_settings(n_seeds),
        out_dir: dir.to_path_buf(),
    }
}

fn row(c: f64, over: Option<f64>, tw: f64, imb: Option<f64>) -> MetricsRow {
    MetricsRow { completion_rate: c, over_minimum: over, trivially_wrong: tw, imbalance: imb }
}

#[test]
fn csv_round_trip_reproduces_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = ResultsTable::default();
    let awkward = [0.1 + 0.2, 1.0 / 3.0, 1e-17, 0.0];
    for (i, v) in Variant::ALL.into_iter().enumerate() {
        for (j, n) in [16, 1].into_iter().enumerate() {
            for seed in 0..3u64 {
                let x = awkward[(i + j + seed as usize) % awkward.len()];
                let imb = (seed != 1).then_some(x);
                table.insert_test(v, n, seed, row(x, Some(x * 7.0), x / 3.0, imb));
                table.insert_train(v, n, seed, row(1.0 - x, None, x, None));
            }
        }
    }
    table.save(dir.path()).unwrap();
    let back = ResultsTable::load(dir.path()).unwrap();
    assert_eq!(back, table);

    let header = std::fs::read_to_string(dir.path().join(TEST_CSV)).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "method,head,representation,n_train,seed,completion,over_min,trivially_wrong,imbalance"
    );
    assert!(!header.contains('\r'));
}

#[test]
fn unknown_variant_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = RunRecord::new(Variant::ReinforceEgoLinear, 4, 0, &row(1.0, None, 0.0, None));
    rec.head = "rotational".into();
    write_csv(&dir.path().join(TEST_CSV), &[rec]).unwrap();
    assert!(matches!(ResultsTable::load(dir.path()), Err(HarnessError::Config(_))));
}

#[test]
fn one_cell_spec_yields_one_aggregate_and_all_seed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec(dir.path(), &[Variant::ReinforceEgoLinear], &[2], 3);
    let out = run_matrix(&spec, |_, _, _, _| {}).unwrap();
    assert_eq!(out.computed, 3);
    assert_eq!(out.table.cells.len(), 1);
    let cell = out.table.cell(Variant::ReinforceEgoLinear, 2).unwrap();
    assert_eq!(cell.test.keys().copied().collect::<Vec<_>>(), vec![40, 41, 42]);
    assert_eq!(read_csv::<RunRecord>(&dir.path().join(TEST_CSV)).unwrap().len(), 3);
    assert_eq!(read_csv::<RunRecord>(&dir.path().join(TRAIN_CSV)).unwrap().len(), 3);
    assert_eq!(ResultsTable::load(dir.path()).unwrap(), out.table);

    // The aggregate is the mean of the persisted rows.
    let mean = cell.test_mean().unwrap();
    let by_hand = cell.test.values().map(|r| r.completion_rate).sum::<f64>() / 3.0;
    assert!((mean.completion_rate - by_hand).abs() < 1e-15);
}

#[test]
fn resume_skips_finished_runs_and_recomputes_deleted_ones() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec(dir.path(), &[Variant::QAbsoluteLinear, Variant::ReinforceEgoMirror], &[1, 2], 2);
    let first = run_matrix(&spec, |_, _, _, _| {}).unwrap();
    assert_eq!((first.computed, first.resumed), (8, 0));

    let again = run_matrix(&spec, |_, _, _, _| {}).unwrap();
    assert_eq!((again.computed, again.resumed), (0, 8));
    assert_eq!(again.table, first.table);

    // Drop one run's test row; only that run is recomputed, with identical results.
    let path = dir.path().join(TEST_CSV);
    let rows: Vec<RunRecord> = read_csv(&path).unwrap();
    let victim = rows.iter().position(|r| r.method == "reinforce" && r.n_train == 2 && r.seed == 41).unwrap();
    let kept: Vec<_> = rows.iter().enumerate().filter(|(i, _)| *i != victim).map(|(_, r)| r.clone()).collect();
    write_csv(&path, &kept).unwrap();
    let third = run_matrix(&spec, |_, _, _, _| {}).unwrap();
    assert_eq!((third.computed, third.resumed), (1, 7));
    assert_eq!(third.table, first.table);
}

#[test]
fn cells_do_not_depend_on_what_else_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let alone = run_matrix(&tiny_spec(a.path(), &[Variant::ReinforceAbsoluteLinear], &[4], 2), |_, _, _, _| {}).unwrap();
    let mut crowded = tiny_spec(b.path(), &[Variant::ReinforceEgoLinear, Variant::ReinforceAbsoluteLinear], &[8, 4], 2);
    crowded.settings.workers = 2;
    let crowded = run_matrix(&crowded, |_, _, _, _| {}).unwrap();
    assert_eq!(
        alone.table.cell(Variant::ReinforceAbsoluteLinear, 4),
        crowded.table.cell(Variant::ReinforceAbsoluteLinear, 4)
    );
}

#[test]
fn invalid_specs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = tiny_spec(dir.path(), &[Variant::ReinforceEgoMirror], &[1], 1);
    spec.settings.apply("head", "linear").unwrap();
    let err = run_matrix(&spec, |_, _, _, _| {}).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let mut spec = tiny_spec(dir.path(), &[Variant::ReinforceEgoLinear], &[0], 1);
    spec.settings.n_seeds = 1;
    assert_eq!(run_matrix(&spec, |_, _, _, _| {}).unwrap_err().exit_code(), 2);
}

#[test]
fn report_shapes_follow_the_tables() {
    let empty = ResultsTable::default();
    let t1 = emit_report(&empty, 1, 20).unwrap();
    assert_eq!(t1.headers, ["# train", "% comp. train", "# over min. train", "% comp. test"]);
    let t2 = emit_report(&empty, 2, 20).unwrap();
    assert_eq!(t2.headers, ["# train", "% comp test", "# over min. test", "% trivially wrong"]);
    let t4 = emit_report(&empty, 4, 20).unwrap();
    assert_eq!(t4.headers, ["# train", "% comp test", "# over min. test", "% trivially wrong", "imbalance"]);
    assert_eq!(t4.rows.iter().map(|r| r.0).collect::<Vec<_>>(), [16, 8, 4, 2, 1]);
    assert!(!t4.is_complete());
    assert_eq!(t4.gaps, [16, 8, 4, 2, 1]);
    assert!(t4.rows.iter().all(|(_, v)| v.iter().all(Option::is_none)));
    assert!(t4.markdown().contains("| 16 | - | - | - | - |"));
    assert!(t4.csv().lines().nth(1).unwrap() == "16,,,,");
    assert!(emit_report(&empty, 0, 20).is_err());
    assert!(emit_report(&empty, 6, 20).is_err());
}

#[test]
fn report_values_are_cell_means_rounded_to_two_places() {
    let mut table = ResultsTable::default();
    for n in [16, 8, 4, 2, 1] {
        for seed in 0..2 {
            let c = if seed == 0 { 1.0 } else { 0.8 };
            table.insert_test(Variant::ReinforceEgoMirror, n, seed, row(c, Some(0.125 + seed as f64), 0.01, Some(0.7)));
            table.insert_train(Variant::ReinforceEgoMirror, n, seed, row(1.0, Some(0.0), 0.0, None));
        }
    }
    // One short cell.
    table.cells.get_mut(&(Variant::ReinforceEgoMirror, 2)).unwrap().test.remove(&1);
    let r = emit_report(&table, 4, 2).unwrap();
    assert_eq!(r.gaps, [2]);
    assert_eq!(r.rows[0].1, vec![Some(0.9), Some(0.625), Some(0.01), Some(0.7)]);
    assert!(r.markdown().contains("| 16 | 0.90 | 0.62 | 0.01 | 0.70 |"));
    assert_eq!(r.csv().lines().nth(1).unwrap(), "16,0.90,0.62,0.01,0.70");
    assert_eq!(r.csv().lines().nth(4).unwrap(), "2,,,,");
}

fn fig1() -> GameInstance {
    GameInstance::new(Position::new(4, 4), Position::new(1, 1)).unwrap()
}

#[test]
fn oracle_trace_reaches_the_goal_in_the_minimum() {
    let mut rng = stream_rng(0, Stream::TestEval);
    let t = trace_with(&OraclePolicy, "p", |a| OraclePolicy.distribution(&fig1(), a), &fig1(), &mut rng).unwrap();
    assert!(t.completed);
    assert_eq!(t.steps.len(), 6);
    assert_eq!(t.final_agent, Position::new(1, 1));
    assert!(t.two_cycles.is_empty());
    let text = t.render().unwrap();
    assert!(text.contains("reached goal in 6 moves"));
    assert_eq!(text.matches("XXXXXXX").count(), 2 * 7);
}

/// Steps left on even columns and right on odd ones: bounces between two cells.
struct Bounce;

impl Policy for Bounce {
    fn distribution(&self, _: &GameInstance, agent: Position) -> gridx::Result<[f64; NUM_ACTIONS]> {
        let mut p = [0.0; NUM_ACTIONS];
        p[if agent.col.is_multiple_of(2) { Action::Left } else { Action::Right }.index()] = 1.0;
        Ok(p)
    }

    fn choose<R: rand::Rng + ?Sized>(&self, probs: &[f64; NUM_ACTIONS], _: &mut R) -> Action {
        Action::ALL[probs.iter().position(|&p| p == 1.0).unwrap()]
    }
}

#[test]
fn looping_policy_is_truncated_and_flagged() {
    let mut rng = stream_rng(0, Stream::TestEval);
    let t = trace_with(&Bounce, "p", |a| Bounce.distribution(&fig1(), a), &fig1(), &mut rng).unwrap();
    assert!(!t.completed);
    assert_eq!(t.steps.len(), 100);
    assert!(t.looped());
    assert_eq!(t.two_cycles.first(), Some(&2));
    assert_eq!(t.two_cycles.len(), 98);
    let text = t.render().unwrap();
    assert!(text.contains("truncated at 100 moves, loop detected"));
    assert!(text.contains("[2-cycle]"));
}

#[test]
fn checkpoint_traces_are_deterministic_and_check_the_head() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = tiny_settings(1);
    s.checkpoints = true;
    run_one(&s, Variant::ReinforceEgoMirror, 2, 7, Some(dir.path())).unwrap();
    let path = checkpoint_path(dir.path(), Variant::ReinforceEgoMirror, 2, 7);
    let ck = Checkpoint::load(&path).unwrap();
    assert!(path.with_extension("epochs.csv").exists());

    let a = trace_episode(&ck, Some(Variant::ReinforceEgoMirror), &fig1(), 3).unwrap();
    let b = trace_episode(&ck, None, &fig1(), 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.label, "p");
    for st in &a.steps {
        assert!((st.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let err = trace_episode(&ck, Some(Variant::ReinforceEgoLinear), &fig1(), 3).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert!(trace_episode(&ck, Some(Variant::ReinforceEgoMirrorEntropy), &fig1(), 3).is_ok());

    let q = Model::new(HeadKind::Linear, Representation::Absolute, &mut stream_rng(1, Stream::Init)).unwrap();
    let qck = Checkpoint { method: Method::QLearning, seed: 1, model: q };
    let t = trace_episode(&qck, Some(Variant::QAbsoluteLinear), &fig1(), 0).unwrap();
    assert_eq!(t.label, "q");
    assert!(trace_episode(&qck, Some(Variant::ReinforceAbsoluteLinear), &fig1(), 0).is_err());
}

fn gridx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridx"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let st = gridx().args(["report", "--table", "3", "--out", out]).output().unwrap();
    assert_eq!(st.status.code(), Some(1), "empty results are incomplete");
    assert!(dir.path().join("table3.md").exists());
    assert!(dir.path().join("table3.csv").exists());

    let st = gridx().args(["run", "--out", out, "--set", "epochs=lots"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = gridx().args(["run", "--out", out, "--variant", "nope"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 1\nbase_seed = 5\n").unwrap();
    let st = gridx()
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out, "--variant", "reinforce_ego_linear"])
        .args(["--n-train", "1", "--seeds", "2", "--workers", "2", "--checkpoints"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let rows: Vec<RunRecord> = read_csv(&dir.path().join(TEST_CSV)).unwrap();
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort();
    assert_eq!(seeds, [5, 6]);

    let ck = checkpoint_path(dir.path(), Variant::ReinforceEgoLinear, 1, 5);
    let st = gridx()
        .args(["trace", "--checkpoint", ck.to_str().unwrap(), "--start", "4,4", "--goal", "1,1"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).starts_with("instance"));
    let st = gridx()
        .args(["trace", "--checkpoint", ck.to_str().unwrap(), "--start", "4,4", "--goal", "1,1"])
        .args(["--variant", "reinforce_ego_mirror"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}
