use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use headprune::runner::{
    load_spec, report, write_atomic, CommandKind, Grouping, Outcome, ReportFilter, ReportFormat, ReportKind,
    ReportSpec, Workspace,
};
use headprune::{Error, Result};

#[derive(Parser)]
#[command(name = "headprune", version, about = "Attention-head ranking and pruning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec seed; the overridden spec is what gets hashed.
    #[arg(long)]
    seed: Option<u64>,
    /// Workspace directory for artifacts and logs.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Re-run a spec whose result is already recorded.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic corpora from the spec's [synth] section.
    GenData(Common),
    /// Fine-tune on the spec's training set and save the model.
    Train(Common),
    /// Compute head importance for each source language.
    Rank(Common),
    /// Spearman correlation between the source languages' importance files.
    Correlate(Common),
    /// Prune the lowest-ranked heads for k = 0..=prune_limit.
    Sweep(Common),
    /// Validity baseline: prune the highest-ranked heads first.
    BaselineMax(Common),
    /// Validity baseline: prune seeded random heads.
    BaselineRand(Common),
    /// Merge several source rankings with MD, SD or EC.
    MultiSource(Common),
    /// Pruned and unpruned scores over tenths of the target training data.
    SubsampleStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated tenths values.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9")]
        tenths: Vec<usize>,
    },
    /// Tables from the results log.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "scores")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "source")]
        group_by: GroupArg,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Score the trained model on the target test split; prints one CSV line.
    Eval(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Scores,
    Correlation,
    Subsample,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Source,
    Target,
    K,
}

fn workspace(c: &Common) -> Workspace {
    Workspace::new(&c.out).with_force(c.force)
}

fn spec_of(c: &Common) -> Result<headprune::protocol::ExperimentSpec> {
    let path = c.spec.as_ref().ok_or_else(|| Error::Validation("--spec is required".into()))?;
    load_spec(path, c.seed)
}

fn summary(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Corpora { languages } => format!("corpora: {}", languages.join(",")),
        Outcome::Trained { eval } | Outcome::Eval { eval } => eval.csv_line(),
        Outcome::Importance { languages } => format!("importance: {}", languages.join(",")),
        Outcome::Correlation { table } => table.to_csv().trim_end().to_string(),
        Outcome::Sweep { sweep } => format!(
            "{}: best_k={} best={:.6} unpruned={:.6}",
            sweep.kind,
            sweep.best_k,
            sweep.best_score,
            sweep.unpruned_score()
        ),
        Outcome::MultiSource { multi } => format!(
            "{}: best_k={} best={:.6} trainings={}",
            multi.heuristic, multi.result.best_k, multi.result.best_score, multi.trainings
        ),
        Outcome::Subsample { table } => table.to_csv().trim_end().to_string(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let simple = |kind: CommandKind, c: &Common| -> Result<()> {
        let done = workspace(c).run(kind, &spec_of(c)?)?;
        println!("{}", summary(&done.result.outcome));
        Ok(())
    };
    match cli.command {
        Command::GenData(c) => simple(CommandKind::GenData, &c),
        Command::Train(c) => simple(CommandKind::Train, &c),
        Command::Rank(c) => simple(CommandKind::Rank, &c),
        Command::Correlate(c) => simple(CommandKind::Correlate, &c),
        Command::Sweep(c) => simple(CommandKind::Sweep, &c),
        Command::BaselineMax(c) => simple(CommandKind::BaselineMax, &c),
        Command::BaselineRand(c) => simple(CommandKind::BaselineRand, &c),
        Command::MultiSource(c) => simple(CommandKind::MultiSource, &c),
        Command::Eval(c) => simple(CommandKind::Eval, &c),
        Command::SubsampleStudy { common, tenths } => {
            let done = workspace(&common).run_subsample_study(&spec_of(&common)?, &tenths)?;
            println!("{}", summary(&done.result.outcome));
            Ok(())
        }
        Command::Report { common, kind, format, group_by, source, target } => {
            let ws = workspace(&common);
            let spec = ReportSpec {
                kind: match kind {
                    KindArg::Scores => ReportKind::Scores,
                    KindArg::Correlation => ReportKind::Correlation,
                    KindArg::Subsample => ReportKind::Subsample,
                },
                filter: ReportFilter { source, target, ..Default::default() },
                format: match format {
                    FormatArg::Markdown => ReportFormat::Markdown,
                    FormatArg::Csv => ReportFormat::Csv,
                },
                grouping: match group_by {
                    GroupArg::Source => Grouping::Source,
                    GroupArg::Target => Grouping::Target,
                    GroupArg::K => Grouping::K,
                },
            };
            let text = report(&ws.results()?, &spec)?;
            let ext = if matches!(spec.format, ReportFormat::Csv) || matches!(spec.kind, ReportKind::Correlation) {
                "csv"
            } else {
                "md"
            };
            write_atomic(&ws.reports_dir().join(format!("report.{ext}")), text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
