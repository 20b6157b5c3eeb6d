// Span-level F1 on BIO tags and token-level F1 on POS tags.

use headprune::corpus::{Sentence, TaskKind};
use headprune::metrics::{evaluate, extract_spans};
use headprune::Result;

fn sentence(tokens: &str, tags: &str) -> Result<Sentence> {
    Sentence::new(
        tokens.split_whitespace().map(String::from).collect(),
        tags.split_whitespace().map(String::from).collect(),
    )
}

pub fn run_example() -> Result<()> {
    let gold = vec![sentence("Ada Lovelace met Babbage in London", "B-PER I-PER O B-PER O B-LOC")?];
    let pred = vec!["B-PER I-PER O O O B-ORG".split_whitespace().collect::<Vec<_>>()];
    println!("gold spans: {:?}", extract_spans(&gold[0].tags)?);
    println!("pred spans: {:?}", extract_spans(&pred[0])?);
    println!("task,P,R,F1,support");
    println!("{}", evaluate(TaskKind::Span, &gold, &pred)?.csv_line());

    let gold = vec![sentence("the cat sat", "DET NOUN VERB")?];
    let pred = vec![vec!["DET", "NOUN", "NOUN"]];
    println!("{}", evaluate(TaskKind::Pos, &gold, &pred)?.csv_line());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
