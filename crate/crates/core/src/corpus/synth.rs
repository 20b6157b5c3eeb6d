//! Synthetic multilingual corpora.
//!
//! A master seed fixes one latent grammar that emits parallel sentences of
//! latent word ids with tags. Every language renders those sentences through
//! its own injective surface vocabulary, a bounded local reordering and an
//! optional word-level noise process. Languages that share a master seed
//! therefore share task structure, which is the property the head-ranking
//! experiments probe.

use std::collections::{BTreeSet, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Corpus, Sentence, Split, TaskKind, DEFAULT_NE_TYPES, UPOS_TAGS};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Bounded local reordering: each adjacent pair of units is swapped with
/// probability `swap_rate`, and a unit moves at most one position.
/// Units are single words, except that a whole entity span is one unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordOrder {
    #[serde(default)]
    pub swap_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageProfile {
    pub language_code: String,
    pub vocab_seed: u64,
    #[serde(default)]
    pub word_order: WordOrder,
    /// Probability that a token is replaced by a random word (tag kept).
    #[serde(default)]
    pub noise_rate: f64,
    pub sizes: SplitSizes,
    /// Fraction of latent words rendered with a form shared by every
    /// language of the same grammar. Zero keeps vocabularies disjoint.
    #[serde(default)]
    pub cognate_rate: f64,
}

impl LanguageProfile {
    pub fn new(language_code: impl Into<String>, vocab_seed: u64, sizes: SplitSizes) -> Self {
        Self {
            language_code: language_code.into(),
            vocab_seed,
            word_order: WordOrder::default(),
            noise_rate: 0.0,
            sizes,
            cognate_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let code = &self.language_code;
        if code.is_empty() || !code.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            errs.push(format!("language_code {code:?} must be non-empty [A-Za-z0-9_-]"));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            errs.push(format!("{code}: noise_rate {} not in [0, 0.5)", self.noise_rate));
        }
        if !(0.0..=1.0).contains(&self.word_order.swap_rate) {
            errs.push(format!("{code}: swap_rate {} not in [0, 1]", self.word_order.swap_rate));
        }
        if !(0.0..=1.0).contains(&self.cognate_rate) {
            errs.push(format!("{code}: cognate_rate {} not in [0, 1]", self.cognate_rate));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Generates one corpus per profile from the grammar fixed by `master_seed`.
pub fn synth_generate(
    profiles: &[LanguageProfile],
    task_kind: TaskKind,
    master_seed: u64,
) -> Result<Vec<Corpus>> {
    if profiles.len() < 2 {
        return Err(Error::Validation(format!(
            "synthetic generation needs at least 2 profiles, got {}",
            profiles.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.language_code.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate language code {}",
                p.language_code
            )));
        }
    }
    let grammar = Grammar::new(task_kind, master_seed);
    profiles
        .iter()
        .map(|p| render_language(&grammar, p, master_seed))
        .collect()
}

/// Single-language variant, used for control languages drawn from their
/// own grammar.
pub fn synth_language(profile: &LanguageProfile, task_kind: TaskKind, master_seed: u64) -> Result<Corpus> {
    render_language(&Grammar::new(task_kind, master_seed), profile, master_seed)
}

/// Number of latent word types in the grammar for `task_kind`.
pub fn latent_vocab_size(task_kind: TaskKind) -> usize {
    Grammar::new(task_kind, 0).vocab_size()
}

type Unit = Vec<(usize, String)>;

/// Word pool with Zipfian emission weights (1 / rank) in a seeded order.
struct Pool {
    words: Vec<usize>,
    weights: WeightedIndex<f64>,
}

impl Pool {
    fn new(mut words: Vec<usize>, rng: &mut Rng) -> Self {
        words.shuffle(rng);
        let weights = WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64)).expect("non-empty pool");
        Self { words, weights }
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        self.words[self.weights.sample(rng)]
    }
}

enum Grammar {
    Pos(PosGrammar),
    Span(SpanGrammar),
}

impl Grammar {
    fn new(task_kind: TaskKind, master_seed: u64) -> Self {
        match task_kind {
            TaskKind::Pos => Grammar::Pos(PosGrammar::new(master_seed)),
            TaskKind::Span => Grammar::Span(SpanGrammar::new(master_seed)),
        }
    }

    fn task_kind(&self) -> TaskKind {
        match self {
            Grammar::Pos(_) => TaskKind::Pos,
            Grammar::Span(_) => TaskKind::Span,
        }
    }

    fn vocab_size(&self) -> usize {
        match self {
            Grammar::Pos(g) => g.vocab_size,
            Grammar::Span(g) => g.vocab_size,
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Grammar::Pos(_) => UPOS_TAGS.iter().map(|t| t.to_string()).collect(),
            Grammar::Span(_) => {
                let mut out = vec!["O".to_string()];
                for t in DEFAULT_NE_TYPES {
                    out.push(format!("B-{t}"));
                    out.push(format!("I-{t}"));
                }
                out
            }
        }
    }

    fn sample(&self, rng: &mut Rng) -> Vec<Unit> {
        match self {
            Grammar::Pos(g) => g.sample(rng),
            Grammar::Span(g) => g.sample(rng),
        }
    }
}

/// Hidden Markov chain over the 17 POS tags. Each tag owns a few unique
/// words and shares ambiguous words with one other tag; every pool
/// emits with Zipfian weights, so context is
/// needed to tag ambiguous words.
struct PosGrammar {
    start: WeightedIndex<f64>,
    trans: Vec<WeightedIndex<f64>>,
    unique: Vec<Pool>,
    ambiguous: Vec<Option<Pool>>,
    vocab_size: usize,
}

const POS_UNIQUE_PER_TAG: usize = 4;
const POS_AMBIGUOUS_WORDS: usize = 20;
const POS_AMBIGUOUS_EMISSION: f64 = 0.4;
const POS_LENGTH: (usize, usize) = (5, 12);

/// Weights over `n` states: three preferred states plus uniform smoothing.
fn peaked(rng: &mut Rng, n: usize) -> WeightedIndex<f64> {
    let mut w = vec![0.05 / n as f64; n];
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    for (s, p) in states.iter().zip([0.6, 0.25, 0.1]) {
        w[*s] += p;
    }
    WeightedIndex::new(w).expect("positive weights")
}

impl PosGrammar {
    fn new(master_seed: u64) -> Self {
        let mut rng = seed::rng_for(master_seed, "grammar/pos");
        let n = UPOS_TAGS.len();
        let start = peaked(&mut rng, n);
        let trans = (0..n).map(|_| peaked(&mut rng, n)).collect();
        let mut next = 0;
        let unique = (0..n)
            .map(|_| {
                let ids: Vec<usize> = (next..next + POS_UNIQUE_PER_TAG).collect();
                next += POS_UNIQUE_PER_TAG;
                Pool::new(ids, &mut rng)
            })
            .collect();
        let mut shared = vec![Vec::new(); n];
        for _ in 0..POS_AMBIGUOUS_WORDS {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            shared[a].push(next);
            shared[b].push(next);
            next += 1;
        }
        let ambiguous = shared
            .into_iter()
            .map(|w| (!w.is_empty()).then(|| Pool::new(w, &mut rng)))
            .collect();
        Self {
            start,
            trans,
            unique,
            ambiguous,
            vocab_size: next,
        }
    }

    fn sample(&self, rng: &mut Rng) -> Vec<Unit> {
        let len = rng.random_range(POS_LENGTH.0..=POS_LENGTH.1);
        let mut tag = self.start.sample(rng);
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            if i > 0 {
                tag = self.trans[tag].sample(rng);
            }
            let word = match &self.ambiguous[tag] {
                Some(pool) if rng.random_bool(POS_AMBIGUOUS_EMISSION) => pool.draw(rng),
                _ => self.unique[tag].draw(rng),
            };
            out.push(vec![(word, UPOS_TAGS[tag].to_string())]);
        }
        out
    }
}

/// Entity grammar: plain words, per-type trigger words that usually precede
/// an entity, and entity words where some are shared between two types so
/// that the trigger decides the type.
struct SpanGrammar {
    plain: Pool,
    triggers: Vec<Pool>,
    entity_words: Vec<Pool>,
    type_weights: WeightedIndex<f64>,
    trigger_prob: Vec<f64>,
    vocab_size: usize,
}

const SPAN_PLAIN_WORDS: usize = 30;
const SPAN_TRIGGERS_PER_TYPE: usize = 3;
const SPAN_UNIQUE_PER_TYPE: usize = 5;
const SPAN_AMBIGUOUS_WORDS: usize = 8;
const SPAN_ENTITY_PROB: f64 = 0.3;
const SPAN_LENGTH: (usize, usize) = (6, 14);

impl SpanGrammar {
    fn new(master_seed: u64) -> Self {
        let mut rng = seed::rng_for(master_seed, "grammar/span");
        let types = DEFAULT_NE_TYPES.len();
        let mut next = 0;
        let mut take = |n: usize| {
            let ids: Vec<usize> = (next..next + n).collect();
            next += n;
            ids
        };
        let plain = take(SPAN_PLAIN_WORDS);
        let triggers: Vec<Vec<usize>> = (0..types).map(|_| take(SPAN_TRIGGERS_PER_TYPE)).collect();
        let mut entity_words: Vec<Vec<usize>> = (0..types).map(|_| take(SPAN_UNIQUE_PER_TYPE)).collect();
        for _ in 0..SPAN_AMBIGUOUS_WORDS {
            let id = take(1)[0];
            let a = rng.random_range(0..types);
            let b = (a + rng.random_range(1..types)) % types;
            entity_words[a].push(id);
            entity_words[b].push(id);
        }
        let plain = Pool::new(plain, &mut rng);
        let triggers = triggers.into_iter().map(|w| Pool::new(w, &mut rng)).collect();
        let entity_words = entity_words.into_iter().map(|w| Pool::new(w, &mut rng)).collect();
        let type_weights =
            WeightedIndex::new((0..types).map(|_| rng.random_range(0.5..1.5))).expect("positive weights");
        let trigger_prob = (0..types).map(|_| rng.random_range(0.6..0.9)).collect();
        Self {
            plain,
            triggers,
            entity_words,
            type_weights,
            trigger_prob,
            vocab_size: next,
        }
    }

    fn sample(&self, rng: &mut Rng) -> Vec<Unit> {
        let len = rng.random_range(SPAN_LENGTH.0..=SPAN_LENGTH.1);
        let mut out: Vec<Unit> = Vec::new();
        let mut used = 0;
        while used < len {
            let room = len - used;
            if room >= 2 && rng.random_bool(SPAN_ENTITY_PROB) {
                let ty = self.type_weights.sample(rng);
                let name = DEFAULT_NE_TYPES[ty];
                if rng.random_bool(self.trigger_prob[ty]) {
                    let w = self.triggers[ty].draw(rng);
                    out.push(vec![(w, "O".to_string())]);
                    used += 1;
                }
                let span_len = [1, 1, 1, 2, 2, 3][rng.random_range(0..6)].min(len - used).max(1);
                let unit = (0..span_len)
                    .map(|i| {
                        let w = self.entity_words[ty].draw(rng);
                        let bio = if i == 0 { "B" } else { "I" };
                        (w, format!("{bio}-{name}"))
                    })
                    .collect();
                out.push(unit);
                used += span_len;
            } else {
                let w = self.plain.draw(rng);
                out.push(vec![(w, "O".to_string())]);
                used += 1;
            }
        }
        out
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvzh";
const VOWELS: &[u8] = b"aeiou";

fn syllables(rng: &mut Rng, count: usize) -> String {
    let mut s = String::with_capacity(count * 2);
    for _ in 0..count {
        s.push(*CONSONANTS.choose(rng).expect("consonants") as char);
        s.push(*VOWELS.choose(rng).expect("vowels") as char);
    }
    s
}

/// `n` distinct forms drawn from one seeded stream.
fn distinct_forms(rng: &mut Rng, n: usize, capitalize: bool) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut f = syllables(rng, 4);
        if capitalize {
            f[..1].make_ascii_uppercase();
        }
        if seen.insert(f.clone()) {
            out.push(f);
        }
    }
    out
}

/// Uniform value in [0, 1) fixed by the grammar seed and the latent word.
fn cognate_draw(master_seed: u64, word: usize) -> f64 {
    seed::rng_for(master_seed, &format!("cognate/{word}")).random::<f64>()
}

fn surface_forms(grammar: &Grammar, profile: &LanguageProfile, master_seed: u64) -> Vec<String> {
    let v = grammar.vocab_size();
    let own = distinct_forms(&mut seed::rng_for(profile.vocab_seed, "forms"), v, false);
    if profile.cognate_rate <= 0.0 {
        return own;
    }
    let shared = distinct_forms(&mut seed::rng_for(master_seed, "cognate-forms"), v, true);
    (0..v)
        .map(|w| {
            if cognate_draw(master_seed, w) < profile.cognate_rate {
                shared[w].clone()
            } else {
                own[w].clone()
            }
        })
        .collect()
}

fn render_language(grammar: &Grammar, profile: &LanguageProfile, master_seed: u64) -> Result<Corpus> {
    profile.validate()?;
    let forms = surface_forms(grammar, profile, master_seed);
    let lang_base = seed::derive(
        master_seed,
        &format!("lang/{}/{}", profile.language_code, profile.vocab_seed),
    );
    let mut splits: Vec<Vec<Sentence>> = Vec::new();
    for split in Split::ALL {
        let mut sentences = Vec::with_capacity(profile.sizes.get(split));
        for i in 0..profile.sizes.get(split) {
            let mut latent = grammar.sample(&mut seed::rng_for(master_seed, &format!("latent/{split}/{i}")));
            let mut rng = seed::rng_for(lang_base, &format!("{split}/{i}"));
            let mut j = 0;
            while j + 1 < latent.len() {
                if rng.random_bool(profile.word_order.swap_rate) {
                    latent.swap(j, j + 1);
                    j += 2;
                } else {
                    j += 1;
                }
            }
            let mut tokens = Vec::new();
            let mut tags = Vec::new();
            for (word, tag) in latent.into_iter().flatten() {
                let word = if rng.random_bool(profile.noise_rate) {
                    rng.random_range(0..forms.len())
                } else {
                    word
                };
                tokens.push(forms[word].clone());
                tags.push(tag);
            }
            sentences.push(Sentence::new(tokens, tags)?);
        }
        splits.push(sentences);
    }
    let test = splits.pop().expect("three splits");
    let dev = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    let mut corpus = Corpus::from_splits(
        profile.language_code.clone(),
        grammar.task_kind(),
        train,
        dev,
        test,
        grammar.labels(),
    )?;
    corpus.generation_seed = Some(master_seed);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes() -> SplitSizes {
        SplitSizes { train: 40, dev: 10, test: 10 }
    }

    fn pair(task: TaskKind) -> Vec<Corpus> {
        let a = LanguageProfile::new("aa", 1, sizes());
        let b = LanguageProfile::new("bb", 2, sizes());
        synth_generate(&[a, b], task, 77).unwrap()
    }

    #[test]
    fn noise_free_tags_are_parallel() {
        for task in [TaskKind::Pos, TaskKind::Span] {
            let c = pair(task);
            for split in Split::ALL {
                let ta: Vec<_> = c[0].split(split).iter().map(|s| &s.tags).collect();
                let tb: Vec<_> = c[1].split(split).iter().map(|s| &s.tags).collect();
                assert_eq!(ta, tb);
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(pair(TaskKind::Span), pair(TaskKind::Span));
    }

    #[test]
    fn disjoint_vocab_seeds_share_no_types() {
        let c = pair(TaskKind::Pos);
        let types = |c: &Corpus| -> HashSet<String> {
            Split::ALL
                .iter()
                .flat_map(|s| c.split(*s).iter().flat_map(|x| x.tokens.clone()))
                .collect()
        };
        assert_eq!(types(&c[0]).intersection(&types(&c[1])).count(), 0);
    }

    #[test]
    fn cognates_are_shared() {
        let mut a = LanguageProfile::new("aa", 1, sizes());
        let mut b = LanguageProfile::new("bb", 2, sizes());
        a.cognate_rate = 0.5;
        b.cognate_rate = 0.5;
        let c = synth_generate(&[a, b], TaskKind::Pos, 5).unwrap();
        let shared = c[0].train[0]
            .tokens
            .iter()
            .zip(&c[1].train[0].tokens)
            .filter(|(x, y)| x == y)
            .count();
        assert!(shared > 0);
    }

    #[test]
    fn swaps_and_noise_keep_bio_valid() {
        let mut a = LanguageProfile::new("aa", 1, sizes());
        let mut b = LanguageProfile::new("bb", 2, sizes());
        b.word_order.swap_rate = 0.5;
        b.noise_rate = 0.3;
        a.noise_rate = 0.1;
        for c in synth_generate(&[a, b], TaskKind::Span, 3).unwrap() {
            c.validate().unwrap();
            assert!(c.train.iter().any(|s| s.tags.iter().any(|t| t != "O")));
        }
    }

    #[test]
    fn input_errors() {
        let a = LanguageProfile::new("aa", 1, sizes());
        assert!(synth_generate(std::slice::from_ref(&a), TaskKind::Pos, 1).is_err());
        assert!(synth_generate(&[a.clone(), a.clone()], TaskKind::Pos, 1).is_err());
        let mut bad = LanguageProfile::new("bb", 2, sizes());
        bad.noise_rate = 0.5;
        assert!(matches!(
            synth_generate(&[a, bad], TaskKind::Pos, 1),
            Err(Error::InvalidConfig(_))
        ));
    }
}
