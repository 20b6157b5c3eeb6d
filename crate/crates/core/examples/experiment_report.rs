// Drives the runner the way the command line does: generate data, rank,
// sweep in both settings, then render the pruned/unpruned table.

use headprune::protocol::{ExperimentSpec, Setting};
use headprune::runner::{report, CommandKind, ReportFormat, ReportSpec, Workspace};
use headprune::Result;

const SPEC: &str = r#"
task_kind = "pos"
source_languages = ["xa"]
target_language = "xb"
setting = "cross_lingual"
seed = 7
prune_limit = 2

[model]
num_layers = 2
num_heads = 2
model_dim = 8
feedforward_dim = 16
max_sequence_length = 32

[train]
epochs = 5
learning_rate = 5e-3

[synth]
master_seed = 21
languages = [
  { language_code = "xa", vocab_seed = 1, cognate_rate = 0.5, sizes = { train = 60, dev = 20, test = 30 } },
  { language_code = "xb", vocab_seed = 2, cognate_rate = 0.5, sizes = { train = 60, dev = 20, test = 30 } },
]
"#;

pub fn run_example() -> Result<()> {
    let dir = tempfile_dir();
    let ws = Workspace::new(&dir).with_force(true);
    let spec = ExperimentSpec::from_toml(SPEC)?;
    for command in [CommandKind::GenData, CommandKind::Rank, CommandKind::Sweep] {
        ws.run(command, &spec)?;
    }
    let mut multi = spec.clone();
    multi.setting = Setting::MultiLingual;
    ws.run(CommandKind::Sweep, &multi)?;

    let records = ws.results()?;
    print!("{}", report(&records, &ReportSpec::default())?);
    print!("{}", report(&records, &ReportSpec { format: ReportFormat::Csv, ..Default::default() })?);
    for run in ws.runs()? {
        println!("{:<10} {:>7.2}s  {} outputs", run.command.as_str(), run.wall_seconds, run.outputs.len());
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("headprune-report-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn main() -> Result<()> {
    run_example()
}
