//! The variant × train-size × seed experiment matrix.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use gridx::evaluation::evaluate_policy;
use gridx::gridworld::generate_instance_set;
use gridx::training::{stream_rng, EpochMetrics, ModelPolicy, Stream};
use gridx::{run_training, Checkpoint, MetricsRow};
use rayon::prelude::*;

use crate::config::Settings;
use crate::results::{append_csv, FailureRecord, ResultsTable, RunRecord, FAILURES_CSV, TEST_CSV, TRAIN_CSV};
use crate::variant::Variant;
use crate::HarnessError;

pub const TRAIN_SIZES: [usize; 5] = [16, 8, 4, 2, 1];
pub const TEST_INSTANCES: usize = 10;

/// What to run and where to put it.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub variants: Vec<Variant>,
    pub sizes: Vec<usize>,
    pub settings: Settings,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn full(settings: Settings, out_dir: impl Into<PathBuf>) -> Self {
        Self { variants: Variant::ALL.to_vec(), sizes: TRAIN_SIZES.to_vec(), settings, out_dir: out_dir.into() }
    }

    /// Every (variant, n_train, seed) run, in a fixed order.
    pub fn runs(&self) -> Vec<(Variant, usize, u64)> {
        let mut out = Vec::new();
        for &v in &self.variants {
            for &n in &self.sizes {
                for i in 0..self.settings.n_seeds {
                    out.push((v, n, self.settings.seed(i)));
                }
            }
        }
        out
    }
}

/// Metrics of one finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub test: MetricsRow,
    pub train: MetricsRow,
}

#[derive(Debug)]
pub struct RunFailure {
    pub numerical: bool,
    pub detail: String,
}

impl From<gridx::Error> for RunFailure {
    fn from(e: gridx::Error) -> Self {
        RunFailure { numerical: matches!(e, gridx::Error::NonFinite { .. }), detail: e.to_string() }
    }
}

impl From<std::io::Error> for RunFailure {
    fn from(e: std::io::Error) -> Self {
        RunFailure { numerical: false, detail: e.to_string() }
    }
}

pub fn checkpoint_path(dir: &Path, variant: Variant, n_train: usize, seed: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("{variant}_n{n_train}_s{seed}.ckpt"))
}

/// Instance generation, training and evaluation for one seed. Depends on
/// nothing but its arguments, so any run can be recomputed in isolation.
pub fn run_one(
    settings: &Settings,
    variant: Variant,
    n_train: usize,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<RunResult, RunFailure> {
    let cfg = settings.run_config(variant, seed);
    let set = generate_instance_set(n_train, TEST_INSTANCES, &mut stream_rng(seed, Stream::Instances))?;
    let mut log = vec![EpochMetrics::HEADER.to_string()];
    let outcome = run_training(&set.train, &cfg, |m| log.push(m.to_line()))?;
    let policy = ModelPolicy { model: &outcome.model, method: cfg.method };
    let test = evaluate_policy(
        &policy,
        &set.test,
        settings.test_episodes,
        settings.wrong_mass_scope,
        &mut stream_rng(seed, Stream::TestEval),
    )?;
    if let Some(dir) = checkpoint_dir {
        let path = checkpoint_path(dir, variant, n_train, seed);
        std::fs::create_dir_all(path.parent().expect("checkpoint path has a parent"))?;
        Checkpoint { method: cfg.method, seed, model: outcome.model }.save(&path)?;
        std::fs::write(path.with_extension("epochs.csv"), log.join("\n") + "\n")?;
    }
    Ok(RunResult { test, train: outcome.train_metrics })
}

#[derive(Debug, Default)]
pub struct MatrixOutcome {
    pub table: ResultsTable,
    /// Runs computed by this invocation.
    pub computed: usize,
    /// Runs found already persisted and skipped.
    pub resumed: usize,
    pub failures: Vec<FailureRecord>,
}

impl MatrixOutcome {
    pub fn numerical_failure(&self) -> bool {
        self.failures.iter().any(|f| f.kind == "numerical")
    }
}

struct Sink<'a> {
    dir: &'a Path,
    table: ResultsTable,
    failures: Vec<FailureRecord>,
    write_error: Option<HarnessError>,
}

impl Sink<'_> {
    fn record(&mut self, variant: Variant, n: usize, seed: u64, result: Result<RunResult, RunFailure>) {
        let written = match result {
            Ok(r) => {
                self.table.insert_test(variant, n, seed, r.test);
                self.table.insert_train(variant, n, seed, r.train);
                append_csv(&self.dir.join(TEST_CSV), &RunRecord::new(variant, n, seed, &r.test))
                    .and_then(|_| append_csv(&self.dir.join(TRAIN_CSV), &RunRecord::new(variant, n, seed, &r.train)))
            }
            Err(f) => {
                let rec = FailureRecord {
                    method: variant.method_label().into(),
                    head: variant.head().name().into(),
                    representation: variant.representation().name().into(),
                    n_train: n,
                    seed,
                    kind: if f.numerical { "numerical" } else { "error" }.into(),
                    detail: f.detail,
                };
                let res = append_csv(&self.dir.join(FAILURES_CSV), &rec);
                self.failures.push(rec);
                res
            }
        };
        if let Err(e) = written {
            self.write_error.get_or_insert(e);
        }
    }
}

/// Runs every missing run of `spec`, appending rows as they finish. Rows
/// already present in the output directory are kept and not recomputed.
/// `progress` is called after each computed run.
pub fn run_matrix(
    spec: &ExperimentSpec,
    progress: impl Fn(Variant, usize, u64, &Result<RunResult, RunFailure>) + Sync,
) -> Result<MatrixOutcome, HarnessError> {
    spec.settings.validate(&spec.variants)?;
    if let Some(&n) = spec.sizes.iter().find(|&&n| n == 0) {
        return Err(HarnessError::Config(format!("invalid train size {n}")));
    }
    std::fs::create_dir_all(&spec.out_dir)?;
    let existing = ResultsTable::load(&spec.out_dir)?;
    let (todo, done): (Vec<_>, Vec<_>) =
        spec.runs().into_iter().partition(|&(v, n, s)| !existing.is_done(v, n, s));

    let mut table = ResultsTable::default();
    for &(v, n, s) in &done {
        let cell = existing.cell(v, n).expect("done runs have a cell");
        table.insert_test(v, n, s, cell.test[&s]);
        table.insert_train(v, n, s, cell.train[&s]);
    }

    let sink = Mutex::new(Sink { dir: &spec.out_dir, table, failures: Vec::new(), write_error: None });
    let ck_dir = spec.settings.checkpoints.then_some(spec.out_dir.as_path());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.settings.workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| {
        todo.par_iter().with_max_len(1).for_each(|&(v, n, s)| {
            let result = run_one(&spec.settings, v, n, s, ck_dir);
            progress(v, n, s, &result);
            sink.lock().expect("result sink poisoned").record(v, n, s, result);
        })
    });

    let sink = sink.into_inner().expect("result sink poisoned");
    if let Some(e) = sink.write_error {
        return Err(e);
    }
    Ok(MatrixOutcome { table: sink.table, computed: todo.len(), resumed: done.len(), failures: sink.failures })
}
