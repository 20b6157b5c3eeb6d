// Fine-tunes on one language, accumulates |gate gradients| over its dev
// split and prints the normalized importance matrix and head ranking.

use headprune::corpus::{synth_generate, LanguageProfile, SplitSizes, TaskKind};
use headprune::encoder::ArchConfig;
use headprune::importance::rank_heads;
use headprune::protocol::{rank_pipeline, ExperimentSpec, Setting, TrainConfig};
use headprune::Result;

pub fn run_example() -> Result<()> {
    let sizes = SplitSizes { train: 80, dev: 30, test: 20 };
    let corpora = synth_generate(&[LanguageProfile::new("xa", 1, sizes), LanguageProfile::new("xb", 2, sizes)], TaskKind::Pos, 7)?;
    let mut spec = ExperimentSpec::new(TaskKind::Pos, vec!["xa".into()], "xb", Setting::CrossLingual, 3);
    spec.model = ArchConfig { num_layers: 2, num_heads: 3, model_dim: 12, feedforward_dim: 24, max_sequence_length: 32 };
    spec.train = TrainConfig { epochs: 8, learning_rate: 5e-3, ..TrainConfig::default() };

    let out = rank_pipeline(&corpora[0], &spec)?;
    for (l, row) in out.importance.scores.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("layer {l}: {}", cells.join(" "));
    }
    let order: Vec<String> = rank_heads(&out.importance).order.iter().map(|c| c.to_string()).collect();
    println!("prune order: {}", order.join(" "));
    println!("final train loss {:.4}", out.trained.stats.final_loss.unwrap_or(f64::NAN));
    println!("{}", out.importance.to_json()?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
