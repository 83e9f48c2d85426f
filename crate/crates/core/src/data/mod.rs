//! Labeled instances and everything that produces them: SemEval-2014 Task 4
//! XML, the line-oriented instance format, and the synthetic corpus.

mod embeddings;
mod semeval;
mod split;
mod synthetic;
mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

pub use embeddings::{
    aspect_vector_from_rows, build_aspect_vector, load_embeddings, AspectEmbeddingTable,
    EmbeddingTable, Vocabulary, UNK,
};
pub use semeval::{parse_semeval_str, parse_semeval_xml};
pub use split::{dev_split, dev_size};
pub use synthetic::{generate_synthetic, SyntheticCorpus, SYNTHETIC_DIM};
pub use tokenize::{tokenize, Token};

use crate::error::{Error, Result};

/// The predefined restaurant aspect categories, in index order.
pub const CATEGORIES: [&str; 5] = [
    "food",
    "service",
    "price",
    "ambience",
    "anecdotes/miscellaneous",
];

pub fn category_index(name: &str) -> Option<usize> {
    CATEGORIES.iter().position(|c| *c == name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive = 0,
    Negative = 1,
    Neutral = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Polarity::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            other => Err(Error::arg(format!("unknown polarity {other:?}"))),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Aspect term sentiment: the aspect is a token span of the sentence.
    Atsa,
    /// Aspect category sentiment: the aspect is one of [`CATEGORIES`].
    Acsa,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Atsa => "atsa",
            Task::Acsa => "acsa",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atsa" => Ok(Task::Atsa),
            "acsa" => Ok(Task::Acsa),
            other => Err(Error::arg(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aspect {
    /// Inclusive token range.
    Term { start: usize, end: usize },
    Category(usize),
}

impl Aspect {
    pub fn task(self) -> Task {
        match self {
            Aspect::Term { .. } => Task::Atsa,
            Aspect::Category(_) => Task::Acsa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledInstance {
    pub tokens: Vec<String>,
    pub aspect: Aspect,
    pub polarity: Polarity,
}

impl LabeledInstance {
    pub fn new(tokens: Vec<String>, aspect: Aspect, polarity: Polarity) -> Result<Self> {
        let inst = LabeledInstance {
            tokens,
            aspect,
            polarity,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::arg("instance has no tokens"));
        }
        match self.aspect {
            Aspect::Term { start, end } => {
                if start > end || end >= self.tokens.len() {
                    return Err(Error::arg(format!(
                        "term span {start}-{end} outside {} tokens",
                        self.tokens.len()
                    )));
                }
            }
            Aspect::Category(c) => {
                if c >= CATEGORIES.len() {
                    return Err(Error::arg(format!("category index {c} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Tab-separated line: tokens joined by spaces, aspect spec
    /// (`term:START-END` or `category:NAME`), polarity.
    pub fn to_line(&self) -> String {
        let aspect = match self.aspect {
            Aspect::Term { start, end } => format!("term:{start}-{end}"),
            Aspect::Category(c) => format!("category:{}", CATEGORIES[c]),
        };
        format!("{}\t{}\t{}", self.tokens.join(" "), aspect, self.polarity)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [tokens, aspect, polarity] = fields[..] else {
            return Err(Error::arg(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let tokens: Vec<String> = tokens.split(' ').map(str::to_string).collect();
        let aspect = if let Some(span) = aspect.strip_prefix("term:") {
            let (s, e) = span
                .split_once('-')
                .ok_or_else(|| Error::arg(format!("bad term span {span:?}")))?;
            let parse = |x: &str| {
                x.parse::<usize>()
                    .map_err(|_| Error::arg(format!("bad term span {span:?}")))
            };
            Aspect::Term {
                start: parse(s)?,
                end: parse(e)?,
            }
        } else if let Some(name) = aspect.strip_prefix("category:") {
            Aspect::Category(
                category_index(name).ok_or_else(|| Error::arg(format!("unknown category {name:?}")))?,
            )
        } else {
            return Err(Error::arg(format!("bad aspect spec {aspect:?}")));
        };
        LabeledInstance::new(tokens, aspect, polarity.parse()?)
    }
}

pub fn write_instances<W: Write>(mut w: W, instances: &[LabeledInstance]) -> Result<()> {
    for inst in instances {
        writeln!(w, "{}", inst.to_line())?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(r: R, source: &str) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let inst = LabeledInstance::from_line(&line)
            .map_err(|e| Error::parse(format!("{source}:{}", n + 1), e.to_string()))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn save_instances(path: &Path, instances: &[LabeledInstance]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_instances(&mut w, instances)?;
    w.flush()?;
    Ok(())
}

pub fn load_instances(path: &Path) -> Result<Vec<LabeledInstance>> {
    let f = std::fs::File::open(path)?;
    read_instances(std::io::BufReader::new(f), &path.display().to_string())
}

/// Per-polarity counts in `[positive, negative, neutral]` order.
pub fn polarity_counts(instances: &[LabeledInstance]) -> [usize; 3] {
    let mut counts = [0; 3];
    for inst in instances {
        counts[inst.polarity.index()] += 1;
    }
    counts
}

/// Indices of instances whose token sequence occurs elsewhere in the set
/// with a different label. No model that ignores the aspect can get more
/// than half of these right.
pub fn disambiguation_subset(instances: &[LabeledInstance]) -> Vec<usize> {
    let mut labels: HashMap<&[String], Vec<Polarity>> = HashMap::new();
    for inst in instances {
        labels.entry(&inst.tokens).or_default().push(inst.polarity);
    }
    instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| {
            let ls = &labels[inst.tokens.as_slice()];
            ls.iter().any(|&p| p != inst.polarity)
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn instance_line_format() {
        let inst = LabeledInstance::new(
            toks("the soup is cold ."),
            Aspect::Term { start: 1, end: 1 },
            Polarity::Negative,
        )
        .unwrap();
        assert_eq!(inst.to_line(), "the soup is cold .\tterm:1-1\tnegative");
        assert_eq!(LabeledInstance::from_line(&inst.to_line()).unwrap(), inst);

        let inst = LabeledInstance::new(toks("nice"), Aspect::Category(4), Polarity::Neutral).unwrap();
        assert_eq!(inst.to_line(), "nice\tcategory:anecdotes/miscellaneous\tneutral");
    }

    #[test]
    fn bad_lines_are_rejected() {
        for line in [
            "a b\tterm:0-1",
            "a b\tterm:1-0\tpositive",
            "a b\tterm:0-2\tpositive",
            "a b\tcategory:drinks\tpositive",
            "a b\tterm:0-1\tconflict",
            "a b\tspan:0-1\tpositive",
        ] {
            assert!(LabeledInstance::from_line(line).is_err(), "{line}");
        }
        let err = read_instances("x\tterm:0-0\tpositive\nbad\n".as_bytes(), "mem").unwrap_err();
        assert!(err.to_string().contains("mem:2"), "{err}");
    }

    #[test]
    fn disambiguation_subset_finds_conflicting_pairs() {
        let s = toks("the a is good but the b is bad");
        let t = toks("the a is good but the b is good");
        let data = vec![
            LabeledInstance::new(s.clone(), Aspect::Term { start: 1, end: 1 }, Polarity::Positive).unwrap(),
            LabeledInstance::new(s, Aspect::Term { start: 6, end: 6 }, Polarity::Negative).unwrap(),
            LabeledInstance::new(t.clone(), Aspect::Term { start: 1, end: 1 }, Polarity::Positive).unwrap(),
            LabeledInstance::new(t, Aspect::Term { start: 6, end: 6 }, Polarity::Positive).unwrap(),
        ];
        assert_eq!(disambiguation_subset(&data), vec![0, 1]);
    }

    fn instance_strategy() -> impl Strategy<Value = LabeledInstance> {
        let tokens = prop::collection::vec("[a-z0-9.,!']{1,8}", 1..12);
        (tokens, any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0..3usize, 0..5usize, any::<bool>())
            .prop_map(|(tokens, a, b, pol, cat, term)| {
                let n = tokens.len();
                let (x, y) = (a.index(n), b.index(n));
                let aspect = if term {
                    Aspect::Term { start: x.min(y), end: x.max(y) }
                } else {
                    Aspect::Category(cat)
                };
                LabeledInstance::new(tokens, aspect, Polarity::from_index(pol).unwrap()).unwrap()
            })
    }

    proptest! {
        #[test]
        fn instance_format_round_trips(insts in prop::collection::vec(instance_strategy(), 0..8)) {
            let mut buf = Vec::new();
            write_instances(&mut buf, &insts).unwrap();
            let back = read_instances(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back, insts);
        }
    }
}
