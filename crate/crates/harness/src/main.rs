use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uqd_core::{AlgorithmKind, DeltaPreference, Execution};
use uqd_harness::config::{AlgorithmEntry, CampaignConfig, OUT_ENV};
use uqd_harness::{evaluate, project, report, runner, CliError, CliResult};

#[derive(Parser)]
#[command(name = "uqd", version, about = "Quality-diversity experiments under uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign file or a single inline configuration.
    Run(RunArgs),
    /// Reevaluate run archives and write metrics.csv and cells.csv.
    Evaluate(EvaluateArgs),
    /// Project a MOME-X run onto a single-elite archive.
    Project(ProjectArgs),
    /// Build score tables, significance tests and heatmaps from metrics.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for Execution {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => Execution::Sequential,
            ExecArg::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Campaign file (TOML). Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in task name or task file.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    algorithm: Option<AlgorithmKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    sampling_size: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    delta_f: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_r: Option<f64>,
    /// Output root; run directories are created inside it.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Also write every occupant's evaluation history.
    #[arg(long)]
    with_samples: bool,
    #[arg(long, value_enum)]
    execution: Option<ExecArg>,
    /// Worker threads for evaluation.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directories; pass every run of a comparison together.
    #[arg(long = "run", required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    /// Reevaluations per solution (default: the value stored with each run).
    #[arg(long)]
    reevals: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "parallel")]
    execution: ExecArg,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    delta_f: f64,
    #[arg(long, allow_negative_numbers = true)]
    delta_r: f64,
    #[arg(long)]
    rho: Option<f64>,
    /// Algorithm label for the projected run (default: the source label).
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// metrics.csv files or directories containing one.
    #[arg(long = "metrics", required = true, num_args = 1..)]
    metrics: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn campaign(args: &RunArgs) -> CliResult<CampaignConfig> {
    if args.delta_f.is_some() != args.delta_r.is_some() {
        return Err(CliError::Usage("--delta-f and --delta-r must be given together".into()));
    }
    let mut c = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => {
            let (Some(task), Some(algorithm)) = (&args.task, args.algorithm) else {
                return Err(CliError::Usage("either --config or both --task and --algorithm are required".into()));
            };
            CampaignConfig::new(vec![task.clone()], vec![AlgorithmEntry::new(algorithm)], vec![args.seed.unwrap_or(1)])
        }
    };
    if let Some(t) = &args.task {
        c.tasks = vec![t.clone()];
    }
    if let Some(a) = args.algorithm {
        c.algorithms = vec![AlgorithmEntry::new(a)];
    }
    if let Some(s) = args.seed {
        c.seeds = vec![s];
    }
    if let Some(g) = args.generations {
        c.generations = g;
    }
    if let Some(s) = args.sampling_size {
        c.sampling_size = s;
    }
    if let (Some(f), Some(r)) = (args.delta_f, args.delta_r) {
        for a in &mut c.algorithms {
            a.delta_f = Some(f);
            a.delta_r = Some(r);
        }
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if args.with_samples {
        c.with_samples = true;
    }
    if let Some(e) = args.execution {
        c.execution = e.into();
    }
    if args.threads.is_some() {
        c.threads = args.threads;
    }
    Ok(c)
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let c = campaign(&args)?;
            let runs = c.resolve()?;
            for dir in runner::run_all(&runs, &c.out_root(), c.threads)? {
                println!("{}", dir.display());
            }
        }
        Command::Evaluate(args) => {
            let results = evaluate::evaluate(&args.runs, args.reevals, &args.out, args.execution.into())?;
            println!("evaluated {} runs into {}", results.len(), args.out.display());
        }
        Command::Project(args) => {
            let pref = DeltaPreference::new(args.delta_f, args.delta_r, args.rho.unwrap_or(uqd_core::types::DEFAULT_RHO))?;
            let dir = project::project(&args.run, pref, args.label.as_deref(), &args.out)?;
            println!("{}", dir.display());
        }
        Command::Report(args) => {
            let rows = report::report(&args.metrics, &args.out)?;
            println!("reported {} rows into {}", rows.len(), args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
