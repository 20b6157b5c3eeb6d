// Low-rank prune sweep against the max-prune and random-prune baselines in
// the cross-lingual setting.

use headprune::corpus::{synth_generate, LanguageProfile, SplitSizes, TaskKind};
use headprune::encoder::ArchConfig;
use headprune::importance::rank_heads;
use headprune::protocol::*;
use headprune::Result;

pub fn run_example() -> Result<()> {
    let sizes = SplitSizes { train: 80, dev: 30, test: 40 };
    let mut xb = LanguageProfile::new("xb", 2, sizes);
    xb.word_order.swap_rate = 0.1;
    xb.cognate_rate = 0.6;
    let mut xa = LanguageProfile::new("xa", 1, sizes);
    xa.cognate_rate = 0.6;
    let corpora: Corpora = synth_generate(&[xa, xb], TaskKind::Pos, 1000)?
        .into_iter()
        .map(|c| (c.language_code.clone(), c))
        .collect();

    let mut spec = ExperimentSpec::new(TaskKind::Pos, vec!["xa".into()], "xb", Setting::CrossLingual, 7);
    spec.model = ArchConfig { num_layers: 2, num_heads: 3, model_dim: 12, feedforward_dim: 24, max_sequence_length: 32 };
    spec.train = TrainConfig { epochs: 8, learning_rate: 5e-3, ..TrainConfig::default() };
    spec.prune_limit = 4;

    let importance = rank_pipeline(&corpora["xa"], &spec)?.importance;
    let runs = [
        prune_sweep(&spec, &rank_heads(&importance), "xa", &corpora)?,
        baseline_max_prune(&spec, &importance, "xa", &corpora)?,
        baseline_random_prune(&spec, &corpora)?,
    ];
    for run in &runs {
        let r = &run.result;
        let curve: Vec<String> = r.per_k_scores.iter().map(|k| format!("{:.3}", k.f1)).collect();
        println!("{:>13}: {}  best k={} ({:.3})", r.kind.to_string(), curve.join(" "), r.best_k, r.best_score);
        if !r.skipped_candidates.is_empty() {
            println!("{:>13}  skipped {:?}", "", r.skipped_candidates);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
