//! Seeded two-aspect corpus: `the X is W1 but the Y is W2`, where `X` and
//! `Y` are distinct food nouns and `W1`, `W2` are sentiment words drawn
//! independently. Each sentence yields one instance per noun, so whenever
//! the two polarities differ the same token sequence carries two labels and
//! only the aspect tells them apart.

use rand::seq::SliceRandom;
use rand::Rng;

use super::embeddings::{EmbeddingTable, Vocabulary};
use super::{Aspect, LabeledInstance, Polarity};
use crate::error::{Error, Result};
use crate::tensor::seeded_rng;

pub const SYNTHETIC_DIM: usize = 32;

const NOUNS: [&str; 10] = [
    "salad", "soup", "pizza", "pasta", "steak", "sushi", "dessert", "wine", "coffee", "bread",
];
const POSITIVE: [&str; 5] = ["delicious", "great", "excellent", "amazing", "superb"];
const NEGATIVE: [&str; 5] = ["awful", "terrible", "bland", "disgusting", "horrible"];
const NEUTRAL: [&str; 5] = ["average", "ordinary", "okay", "standard", "typical"];
const FILLER: [&str; 3] = ["the", "is", "but"];

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub train: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
    pub embeddings: EmbeddingTable,
}

fn words_for(p: Polarity) -> &'static [&'static str; 5] {
    match p {
        Polarity::Positive => &POSITIVE,
        Polarity::Negative => &NEGATIVE,
        Polarity::Neutral => &NEUTRAL,
    }
}

/// Generates `n_sentences` sentences (two instances each). The last third of
/// the sentences, rounded down, becomes the test set. Embedding rows are
/// drawn from `U[-0.5, 0.5)`.
pub fn generate_synthetic(n_sentences: usize, seed: u64, dim: usize) -> Result<SyntheticCorpus> {
    if n_sentences < 20 {
        return Err(Error::arg(format!(
            "synthetic corpus needs at least 20 sentences, got {n_sentences}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let pair: Vec<&str> = NOUNS.choose_multiple(&mut rng, 2).copied().collect();
        let p1 = Polarity::ALL[rng.gen_range(0..3)];
        let p2 = Polarity::ALL[rng.gen_range(0..3)];
        let w1 = *words_for(p1).choose(&mut rng).expect("nonempty");
        let w2 = *words_for(p2).choose(&mut rng).expect("nonempty");
        let tokens: Vec<String> = ["the", pair[0], "is", w1, "but", "the", pair[1], "is", w2]
            .iter()
            .map(|s| s.to_string())
            .collect();
        sentences.push([
            LabeledInstance::new(tokens.clone(), Aspect::Term { start: 1, end: 1 }, p1)?,
            LabeledInstance::new(tokens, Aspect::Term { start: 6, end: 6 }, p2)?,
        ]);
    }
    let n_test = n_sentences / 3;
    let split = n_sentences - n_test;
    let train = sentences[..split].iter().flatten().cloned().collect();
    let test = sentences[split..].iter().flatten().cloned().collect();

    let vocab = Vocabulary::from_tokens(
        FILLER
            .iter()
            .chain(&NOUNS)
            .chain(&POSITIVE)
            .chain(&NEGATIVE)
            .chain(&NEUTRAL)
            .copied(),
    );
    let embeddings = EmbeddingTable::random(vocab, dim, -0.5, 0.5, seed ^ 0x05ee_de3b)?;
    Ok(SyntheticCorpus {
        train,
        test,
        embeddings,
    })
}
