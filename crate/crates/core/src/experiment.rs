//! Ready-made runs shared by the command-line tool and the test suites: the
//! synthetic two-aspect comparison and the randomized gradient check.

use rand::Rng;

use crate::cell::CellKind;
use crate::data::{
    dev_split, disambiguation_subset, generate_synthetic, Aspect, EmbeddingTable, Task, Vocabulary,
    CATEGORIES,
};
use crate::error::Result;
use crate::head::{HeadKind, NUM_CLASSES};
use crate::metrics::{accuracy, EvalReport};
use crate::model::{Encoded, Model, ModelParams, ModelSpec};
use crate::tensor::seeded_rng;
use crate::train::{evaluate, grad_check_model_with, train, EpochLog, GradCheckReport, TrainConfig};

/// Default number of synthetic sentences: 1200 train and 600 test instances.
pub const SYNTHETIC_SENTENCES: usize = 900;

/// Training settings for the synthetic corpus. The embedding and hidden
/// sizes match the generator's default dimension.
pub fn synthetic_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 16,
        dropout_p: 0.0,
        l2_coeff: 0.0,
        embedding_dim: crate::data::SYNTHETIC_DIM,
        hidden_dim: None,
        max_epochs: 40,
        early_stop_patience: 15,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticRun {
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub dev_report: EvalReport,
    pub test_report: EvalReport,
    /// Accuracy on test instances whose sentence also appears with a
    /// different label.
    pub disambiguation_accuracy: f64,
    pub disambiguation_size: usize,
    pub train_size: usize,
    pub test_size: usize,
}

/// Generates the corpus from `config.seed`, splits a dev set off the
/// training part, trains and scores the best checkpoint on the test part.
pub fn run_synthetic(cell: CellKind, head: HeadKind, n_sentences: usize, config: &TrainConfig) -> Result<SyntheticRun> {
    config.validate()?;
    let corpus = generate_synthetic(n_sentences, config.seed, config.embedding_dim)?;
    let spec = ModelSpec {
        task: Task::Atsa,
        cell,
        head,
        embedding_dim: config.embedding_dim,
        hidden_dim: config.hidden(),
    };
    let (train_part, dev_part) = dev_split(&corpus.train, config.dev_fraction, config.seed.wrapping_add(2))?;
    let model = Model::new(
        spec,
        corpus.embeddings,
        config.init_low,
        config.init_high,
        config.seed.wrapping_add(1),
    )?;
    let train_set = model.encode_all(&train_part)?;
    let dev_set = model.encode_all(&dev_part)?;
    let test_set = model.encode_all(&corpus.test)?;
    let outcome = train(config, model, &train_set, &dev_set)?;
    let test_report = evaluate(&outcome.model, &test_set)?;

    let subset = disambiguation_subset(&corpus.test);
    let preds = subset
        .iter()
        .map(|&i| outcome.model.predict(&test_set[i]))
        .collect::<Result<Vec<_>>>()?;
    let golds: Vec<usize> = subset.iter().map(|&i| test_set[i].label).collect();
    let disambiguation_accuracy = if subset.is_empty() { 0.0 } else { accuracy(&preds, &golds)? };

    Ok(SyntheticRun {
        model: outcome.model,
        log: outcome.log,
        best_epoch: outcome.best_epoch,
        dev_report: outcome.dev_report,
        test_report,
        disambiguation_accuracy,
        disambiguation_size: subset.len(),
        train_size: train_set.len(),
        test_size: test_set.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckSetup {
    pub task: Task,
    pub cell: CellKind,
    pub head: HeadKind,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub seq_len: usize,
    pub batch: usize,
    pub vocab_size: usize,
    /// Range for weights, biases and embeddings.
    pub init: (f64, f64),
    pub seed: u64,
}

impl GradCheckSetup {
    pub fn new(task: Task, cell: CellKind, head: HeadKind, seed: u64) -> Self {
        GradCheckSetup {
            task,
            cell,
            head,
            embedding_dim: 4,
            hidden_dim: 6,
            seq_len: 5,
            batch: 3,
            vocab_size: 8,
            init: GRAD_CHECK_INIT,
            seed,
        }
    }
}

/// Weight and embedding range for gradient checks. Wider than the training
/// range so that gradients are well above the finite-difference noise floor.
pub const GRAD_CHECK_INIT: (f64, f64) = (-0.5, 0.5);
pub const GRAD_CHECK_EPS: f64 = 1e-5;
pub const GRAD_CHECK_L2: f64 = 0.01;

/// A random model and a batch of random instances of length `seq_len`.
pub fn gradcheck_instance(s: &GradCheckSetup) -> Result<(Model, Vec<Encoded>)> {
    let spec = ModelSpec {
        task: s.task,
        cell: s.cell,
        head: s.head,
        embedding_dim: s.embedding_dim,
        hidden_dim: s.hidden_dim,
    };
    let (lo, hi) = s.init;
    let vocab = Vocabulary::from_tokens((1..s.vocab_size).map(|i| format!("w{i}")));
    let table = EmbeddingTable::random(vocab, s.embedding_dim, lo, hi, s.seed)?;
    let mut model = Model::new(spec, table, lo, hi, s.seed.wrapping_add(1))?;
    // Nonzero biases exercise every bias gradient path.
    let mut rng = seeded_rng(s.seed.wrapping_add(2));
    {
        use crate::params::{ParamKind, Parameters};
        for t in model.params.tensors_mut() {
            if t.kind == ParamKind::Bias {
                for v in t.data.iter_mut() {
                    *v = rng.gen_range(lo..hi);
                }
            }
        }
    }
    let n_words = model.vocab.len();
    let batch = (0..s.batch)
        .map(|_| {
            let ids: Vec<usize> = (0..s.seq_len).map(|_| rng.gen_range(0..n_words)).collect();
            let aspect = match s.task {
                Task::Atsa => {
                    let a = rng.gen_range(0..s.seq_len);
                    let b = rng.gen_range(0..s.seq_len);
                    Aspect::Term {
                        start: a.min(b),
                        end: a.max(b),
                    }
                }
                Task::Acsa => Aspect::Category(rng.gen_range(0..CATEGORIES.len())),
            };
            Encoded {
                ids,
                aspect,
                label: rng.gen_range(0..NUM_CLASSES),
            }
        })
        .collect();
    Ok((model, batch))
}

/// Finite-difference check of the full pipeline for one random setup.
/// `tamper` may corrupt the analytic gradient before comparison.
pub fn run_gradcheck(s: &GradCheckSetup, tamper: impl FnOnce(&mut ModelParams)) -> Result<GradCheckReport> {
    let (mut model, batch) = gradcheck_instance(s)?;
    grad_check_model_with(&mut model, &batch, GRAD_CHECK_L2, GRAD_CHECK_EPS, tamper)
}

/// Gradient corruption used to confirm the checker notices a wrong
/// backward pass: the first recurrent weight gradient is shifted.
pub fn corrupt_gradient(g: &mut ModelParams) {
    use crate::params::Parameters;
    if let Some(t) = g.tensors_mut().into_iter().find(|t| t.name.starts_with("cell.")) {
        t.data[0] += 1e-3 + 0.5 * t.data[0].abs();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_setup_is_deterministic() {
        let s = GradCheckSetup::new(Task::Acsa, CellKind::AspectAware, HeadKind::Attention, 3);
        let (m1, b1) = gradcheck_instance(&s).unwrap();
        let (m2, b2) = gradcheck_instance(&s).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(b1, b2);
        assert!(b1.iter().all(|x| x.ids.len() == 5));
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let s = GradCheckSetup::new(Task::Acsa, CellKind::Classic, HeadKind::Last, 0);
        assert!(run_gradcheck(&s, |_| {}).unwrap().passes(1e-4));
        assert!(!run_gradcheck(&s, corrupt_gradient).unwrap().passes(1e-4));
    }

    #[test]
    fn synthetic_config_is_valid() {
        synthetic_config().validate().unwrap();
    }
}
