use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{Aspect, LabeledInstance, CATEGORIES};
use crate::error::{Error, Result};
use crate::tensor::{seeded_rng, Matrix, Vector};

/// Token reserved for words never seen when the vocabulary was built.
pub const UNK: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::from_tokens(std::iter::empty::<String>())
    }
}

impl Vocabulary {
    /// Index 0 is always [`UNK`]; the rest follow first-occurrence order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(UNK.to_string());
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    pub fn from_instances<'a>(sets: impl IntoIterator<Item = &'a [LabeledInstance]>) -> Self {
        Vocabulary::from_tokens(
            sets.into_iter()
                .flat_map(|s| s.iter())
                .flat_map(|inst| inst.tokens.iter().cloned()),
        )
    }

    fn insert(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Falls back to the [`UNK`] row.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Word embeddings: one row per vocabulary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub matrix: Matrix,
    /// Rows that were not found in the pretrained file and were sampled
    /// from `U[-0.1, 0.1)` instead.
    pub oov: Vec<bool>,
}

impl EmbeddingTable {
    pub fn random(vocab: Vocabulary, dim: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        let matrix = Matrix::uniform(vocab.len(), dim, lo, hi, &mut seeded_rng(seed))?;
        let oov = vec![true; vocab.len()];
        Ok(EmbeddingTable { vocab, matrix, oov })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, token: &str) -> Option<Vector> {
        self.vocab.get(token).map(|i| self.matrix.row_vector(i))
    }

    pub fn oov_count(&self) -> usize {
        self.oov.iter().filter(|&&b| b).count()
    }
}

pub const OOV_RANGE: (f64, f64) = (-0.1, 0.1);

/// Loads GloVe-format text (`token v1 ... v_dim` per line) for the words in
/// `vocab`. Rows for words absent from the file are drawn from `U[-0.1, 0.1)`
/// with `seed`. Every line is checked for arity, including lines for words
/// outside the vocabulary.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let f = std::fs::File::open(path)?;
    read_embeddings(std::io::BufReader::new(f), &path.display().to_string(), vocab, dim, seed)
}

pub(crate) fn read_embeddings<R: BufRead>(
    reader: R,
    source: &str,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::random(vocab.clone(), dim, OOV_RANGE.0, OOV_RANGE.1, seed)?;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let loc = || format!("{source}:{}", n + 1);
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(Error::parse(
                loc(),
                format!("expected {dim} values after {word:?}, found {}", values.len()),
            ));
        }
        let Some(id) = vocab.get(word) else { continue };
        if !table.oov[id] {
            continue;
        }
        let row = table.matrix.row_mut(id);
        for (dst, v) in row.iter_mut().zip(&values) {
            *dst = v
                .parse()
                .map_err(|_| Error::parse(loc(), format!("bad number {v:?}")))?;
        }
        table.oov[id] = false;
    }
    Ok(table)
}

/// Trainable category embeddings, one row per entry of [`CATEGORIES`].
#[derive(Clone, Debug, PartialEq)]
pub struct AspectEmbeddingTable {
    pub matrix: Matrix,
}

impl AspectEmbeddingTable {
    pub fn random(dim: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        Ok(AspectEmbeddingTable {
            matrix: Matrix::uniform(CATEGORIES.len(), dim, lo, hi, &mut seeded_rng(seed))?,
        })
    }

    pub fn get(&self, category: &str) -> Option<Vector> {
        super::category_index(category).map(|i| self.matrix.row_vector(i))
    }
}

/// The aspect vector of an instance: the mean embedding of the target
/// words for term aspects, the stored category row for category aspects.
pub fn build_aspect_vector(
    instance: &LabeledInstance,
    embeddings: &EmbeddingTable,
    aspects: Option<&AspectEmbeddingTable>,
) -> Result<Vector> {
    let ids: Vec<usize> = instance.tokens.iter().map(|t| embeddings.vocab.id(t)).collect();
    aspect_vector_from_rows(
        &embeddings.matrix,
        &ids,
        instance.aspect,
        aspects.map(|a| &a.matrix),
    )
}

/// Same as [`build_aspect_vector`] over already-encoded token ids.
pub fn aspect_vector_from_rows(
    words: &Matrix,
    token_ids: &[usize],
    aspect: Aspect,
    categories: Option<&Matrix>,
) -> Result<Vector> {
    match aspect {
        Aspect::Term { start, end } => {
            if start > end || end >= token_ids.len() {
                return Err(Error::arg(format!(
                    "term span {start}-{end} is empty or outside {} tokens",
                    token_ids.len()
                )));
            }
            let n = (end - start + 1) as f64;
            let mut v = vec![0.0; words.cols()];
            for &id in &token_ids[start..=end] {
                crate::tensor::axpy(1.0, words.row(id), &mut v);
            }
            Ok(Vector::from_vec(v).scale(1.0 / n))
        }
        Aspect::Category(c) => {
            let table = categories
                .ok_or_else(|| Error::arg("category aspect needs an aspect embedding table"))?;
            if c >= table.rows() {
                return Err(Error::arg(format!("category index {c} out of range")));
            }
            Ok(table.row_vector(c))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Polarity;

    fn inst(tokens: &str, aspect: Aspect) -> LabeledInstance {
        LabeledInstance::new(
            tokens.split(' ').map(str::to_string).collect(),
            aspect,
            Polarity::Positive,
        )
        .unwrap()
    }

    #[test]
    fn vocabulary_reserves_unk() {
        let v = Vocabulary::from_tokens(["a", "b", "a"]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id(UNK), 0);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("zzz"), 0);
    }

    #[test]
    fn loads_rows_and_samples_oov() {
        let vocab = Vocabulary::from_tokens(["good", "soup", "zebra"]);
        let file = "good 0.5 -1.5\nother 1 2\nsoup 3 4\n";
        let t = read_embeddings(file.as_bytes(), "mem", &vocab, 2, 9).unwrap();
        assert_eq!(t.row("good").unwrap().as_slice(), &[0.5, -1.5]);
        assert_eq!(t.row("soup").unwrap().as_slice(), &[3.0, 4.0]);
        assert_eq!(t.oov_count(), 2);
        let z = t.row("zebra").unwrap();
        assert!(z.iter().all(|&x| (-0.1..0.1).contains(&x)));
        let again = read_embeddings(file.as_bytes(), "mem", &vocab, 2, 9).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn arity_mismatch_names_line() {
        let vocab = Vocabulary::from_tokens(["a"]);
        let file = "a 1 2 3\nb 1 2\n";
        let err = read_embeddings(file.as_bytes(), "glove.txt", &vocab, 3, 0).unwrap_err();
        assert!(err.to_string().contains("glove.txt:2"), "{err}");
    }

    #[test]
    fn term_aspect_is_mean_of_rows() {
        let vocab = Vocabulary::from_tokens(["x", "y", "is"]);
        let mut t = EmbeddingTable::random(vocab, 2, -0.1, 0.1, 0).unwrap();
        t.matrix.row_mut(1).copy_from_slice(&[1.0, 0.0]);
        t.matrix.row_mut(2).copy_from_slice(&[0.0, 1.0]);
        let a = build_aspect_vector(&inst("x y is", Aspect::Term { start: 0, end: 1 }), &t, None).unwrap();
        assert_eq!(a.as_slice(), &[0.5, 0.5]);
        let a = build_aspect_vector(&inst("x y is", Aspect::Term { start: 1, end: 1 }), &t, None).unwrap();
        assert_eq!(a.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn category_aspect_is_stored_row() {
        let vocab = Vocabulary::from_tokens(["ok"]);
        let t = EmbeddingTable::random(vocab, 4, -0.1, 0.1, 0).unwrap();
        let cats = AspectEmbeddingTable::random(4, -0.1, 0.1, 3).unwrap();
        let a = build_aspect_vector(&inst("ok", Aspect::Category(1)), &t, Some(&cats)).unwrap();
        assert_eq!(a, cats.get("service").unwrap());
        assert!(build_aspect_vector(&inst("ok", Aspect::Category(1)), &t, None).is_err());
    }

    #[test]
    fn empty_span_is_error() {
        let m = Matrix::zeros(3, 2);
        assert!(aspect_vector_from_rows(&m, &[0, 1], Aspect::Term { start: 1, end: 0 }, None).is_err());
    }
}
