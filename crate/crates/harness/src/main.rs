use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridx::{Checkpoint, GameInstance, Position};
use gridx_harness::matrix::ExperimentSpec;
use gridx_harness::{emit_report, run_matrix, trace_episode, HarnessError, ResultsTable, Settings, Variant};

#[derive(Parser)]
#[command(name = "gridx", about = "Gridworld extrapolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the matrix, or any slice of it. Resumes from rows already in --out.
    Run(RunArgs),
    /// Print one of tables 1 to 5 from results in --out, and save .md/.csv copies there.
    Report(ReportArgs),
    /// Play one episode from a checkpoint and print every board.
    Trace(TraceArgs),
    /// Run the symmetry, gradient, mask, oracle and determinism checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set epochs=50. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl Common {
    fn settings(&self) -> Result<Settings, HarnessError> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        for o in &self.overrides {
            s.apply_assignment(o)?;
        }
        if let Some(k) = self.seeds {
            s.n_seeds = k;
        }
        if let Some(b) = self.base_seed {
            s.base_seed = b;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Variant to run (repeatable); all five when omitted.
    #[arg(long)]
    variant: Vec<Variant>,
    /// Train size to run (repeatable); 16, 8, 4, 2 and 1 when omitted.
    #[arg(long)]
    n_train: Vec<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Save a checkpoint and epoch log per run.
    #[arg(long)]
    checkpoints: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    table: u8,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Start cell as row,col.
    #[arg(long, value_parser = parse_position)]
    start: Position,
    /// Goal cell as row,col.
    #[arg(long, value_parser = parse_position)]
    goal: Position,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reject the checkpoint unless it matches this variant.
    #[arg(long)]
    variant: Option<Variant>,
}

fn parse_position(s: &str) -> Result<Position, String> {
    let (r, c) = s.split_once(',').ok_or("expected row,col")?;
    let r = r.trim().parse().map_err(|_| format!("bad row {r:?}"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column {c:?}"))?;
    Ok(Position::new(r, c))
}

fn run(args: RunArgs) -> Result<u8, HarnessError> {
    let mut settings = args.common.settings()?;
    if let Some(w) = args.workers {
        settings.workers = w;
    }
    settings.checkpoints |= args.checkpoints;
    let mut spec = ExperimentSpec::full(settings, &args.common.out);
    if !args.variant.is_empty() {
        spec.variants = args.variant;
    }
    if !args.n_train.is_empty() {
        spec.sizes = args.n_train;
    }
    let total = spec.runs().len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let outcome = run_matrix(&spec, |v, n, seed, result| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        match result {
            Ok(r) => eprintln!("[{k}] {v} n={n} seed={seed}: test completion {:.2}", r.test.completion_rate),
            Err(f) => eprintln!("[{k}] {v} n={n} seed={seed}: FAILED {}", f.detail),
        }
    })?;
    eprintln!(
        "{} runs: {} computed, {} already present, {} failed",
        total,
        outcome.computed,
        outcome.resumed,
        outcome.failures.len()
    );
    Ok(if outcome.numerical_failure() {
        3
    } else if outcome.failures.is_empty() {
        0
    } else {
        1
    })
}

fn report(args: ReportArgs) -> Result<u8, HarnessError> {
    let settings = args.common.settings()?;
    let table = ResultsTable::load(&args.common.out)?;
    let report = emit_report(&table, args.table, settings.n_seeds)?;
    print!("{}", report.markdown());
    std::fs::write(args.common.out.join(format!("table{}.md", args.table)), report.markdown())?;
    std::fs::write(args.common.out.join(format!("table{}.csv", args.table)), report.csv())?;
    Ok(if report.is_complete() { 0 } else { 1 })
}

fn trace(args: TraceArgs) -> Result<u8, HarnessError> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let instance = GameInstance::new(args.start, args.goal).map_err(|e| HarnessError::Config(e.to_string()))?;
    let trace = trace_episode(&checkpoint, args.variant, &instance, args.seed)?;
    print!("{}", trace.render()?);
    Ok(0)
}

fn verify(seed: u64) -> u8 {
    let checks = gridx::verify::run_all(seed);
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed) {
        0
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Trace(a) => trace(a),
        Command::Verify { seed } => Ok(verify(seed)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
