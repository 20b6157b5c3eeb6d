// Generates related synthetic languages plus an unrelated control, prints a
// parallel sentence from each and writes them as CoNLL files.

use headprune::corpus::{synth_generate, synth_language, Corpus, LanguageProfile, SplitSizes, TaskKind};
use headprune::Result;

pub fn run_example() -> Result<()> {
    let sizes = SplitSizes { train: 50, dev: 10, test: 10 };
    let profile = |code: &str, vocab_seed: u64, swap: f64| {
        let mut p = LanguageProfile::new(code, vocab_seed, sizes);
        p.cognate_rate = 0.5;
        p.word_order.swap_rate = swap;
        p
    };
    let mut corpora = synth_generate(&[profile("xa", 1, 0.0), profile("xb", 2, 0.2)], TaskKind::Span, 42)?;
    corpora.push(synth_language(&profile("xz", 3, 0.0), TaskKind::Span, 4242)?);

    for c in &corpora {
        let s = &c.train[0];
        let pairs: Vec<String> = s.tokens.iter().zip(&s.tags).map(|(w, t)| format!("{w}/{t}")).collect();
        println!("{}: {}", c.language_code, pairs.join(" "));
    }
    let dir = std::env::temp_dir().join("headprune-synthetic-corpus");
    for c in &corpora {
        c.save(&dir)?;
    }
    let back = Corpus::load(&dir, "xb")?;
    assert_eq!(back.train, corpora[1].train);
    println!("labels: {:?}", back.label_inventory);
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
