// Multi-lingual training with growing tenths of the target training data,
// scored with and without head pruning.

use headprune::corpus::{partition_indices, synth_generate, LanguageProfile, SplitSizes, TaskKind};
use headprune::encoder::ArchConfig;
use headprune::importance::rank_heads;
use headprune::protocol::*;
use headprune::runner::{subsample_study, subsets_nested};
use headprune::Result;

pub fn run_example() -> Result<()> {
    let sizes = SplitSizes { train: 50, dev: 20, test: 30 };
    let corpora: Corpora = synth_generate(&[LanguageProfile::new("xa", 1, sizes), LanguageProfile::new("xb", 2, sizes)], TaskKind::Pos, 3)?
        .into_iter()
        .map(|c| (c.language_code.clone(), c))
        .collect();
    let sizes: Vec<usize> = partition_indices(50, 0).iter().map(Vec::len).collect();
    println!("subset sizes: {sizes:?}");

    let mut spec = ExperimentSpec::new(TaskKind::Pos, vec!["xa".into()], "xb", Setting::MultiLingual, 4);
    spec.model = ArchConfig { num_layers: 2, num_heads: 2, model_dim: 8, feedforward_dim: 16, max_sequence_length: 32 };
    spec.train = TrainConfig { epochs: 5, learning_rate: 5e-3, ..TrainConfig::default() };
    spec.prune_limit = 2;
    let ranking = rank_heads(&rank_pipeline(&corpora["xa"], &spec)?.importance);

    let tenths = [1, 3, 5, 7, 9];
    let (table, runs) = subsample_study(&spec, &ranking, "xa", &corpora, &tenths)?;
    print!("{}", table.to_csv());
    let logs: Vec<&LoaderLog> = runs.iter().map(|r| &r.loader_log).collect();
    println!("subsets nested: {}", subsets_nested("xb", &logs));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
