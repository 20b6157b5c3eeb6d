// Combines two source-language rankings with MD, SD and EC and compares
// their cost in fine-tuning runs.

use headprune::corpus::{synth_generate, LanguageProfile, SplitSizes, TaskKind};
use headprune::encoder::ArchConfig;
use headprune::protocol::*;
use headprune::Result;

pub fn run_example() -> Result<()> {
    let sizes = SplitSizes { train: 60, dev: 20, test: 30 };
    let profiles: Vec<LanguageProfile> = [("xa", 1), ("xb", 2), ("xc", 3)]
        .iter()
        .map(|&(code, seed)| {
            let mut p = LanguageProfile::new(code, seed, sizes);
            p.cognate_rate = 0.6;
            p
        })
        .collect();
    let corpora: Corpora = synth_generate(&profiles, TaskKind::Pos, 5)?
        .into_iter()
        .map(|c| (c.language_code.clone(), c))
        .collect();

    let mut spec = ExperimentSpec::new(TaskKind::Pos, vec!["xa".into(), "xb".into()], "xc", Setting::CrossLingual, 9);
    spec.model = ArchConfig { num_layers: 2, num_heads: 2, model_dim: 8, feedforward_dim: 16, max_sequence_length: 32 };
    spec.train = TrainConfig { epochs: 5, learning_rate: 5e-3, ..TrainConfig::default() };
    spec.prune_limit = 2;
    let matrices = rank_languages(&spec.source_languages, &spec, &corpora)?;

    for heuristic in [Heuristic::Md, Heuristic::Sd, Heuristic::Ec] {
        spec.heuristic = heuristic;
        let (out, _) = multi_source(&spec, &matrices, &corpora)?;
        println!(
            "{heuristic}: best {:.3} at k={} using {} fine-tunings{}",
            out.result.best_score,
            out.result.best_k,
            out.trainings,
            out.selected_language.map(|l| format!(", ranking from {l}")).unwrap_or_default()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
