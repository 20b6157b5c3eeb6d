// Parses CoNLL text, repairs orphan I- tags and folds rare entity types
// into MISC.

use std::collections::BTreeSet;
use std::path::Path;

use headprune::corpus::{harmonize_span_labels, parse_conll, to_conll_string, Corpus, TaskKind};
use headprune::Result;

const TEXT: &str = "\
Ada\tB-PER
Lovelace\tI-PER
visited\tO
London\tB-LOC

the\tO
Royal\tI-ORG
Society\tI-ORG
on\tO
Monday\tB-DATE
";

pub fn run_example() -> Result<()> {
    let file = parse_conll(TEXT, Path::new("inline.conll"), TaskKind::Span)?;
    println!("{} sentences, {} repaired tags", file.sentences.len(), file.repairs);
    let corpus = Corpus::from_splits("en", TaskKind::Span, file.sentences, vec![], vec![], [])?;
    let keep: BTreeSet<String> = ["PER", "ORG", "LOC"].iter().map(|s| s.to_string()).collect();
    let harmonized = harmonize_span_labels(&corpus, Some(&keep))?;
    println!("labels: {:?}", harmonized.label_inventory);
    print!("{}", to_conll_string(&harmonized.train));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
