use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aalstm::cell::CellKind;
use aalstm::checkpoint::{load_model, save_model};
use aalstm::config::load_config_file;
use aalstm::data::{
    dev_split, generate_synthetic, load_embeddings, load_instances, parse_semeval_xml, polarity_counts,
    save_instances, EmbeddingTable, LabeledInstance, Task, Vocabulary,
};
use aalstm::experiment::{corrupt_gradient, run_gradcheck, run_synthetic, synthetic_config, GradCheckSetup, SYNTHETIC_SENTENCES};
use aalstm::head::HeadKind;
use aalstm::metrics::EvalReport;
use aalstm::model::{Model, ModelSpec};
use aalstm::train::{evaluate, format_log, train, TrainConfig};
use aalstm::{Error, Result};

#[derive(Parser)]
#[command(name = "aalstm", version, about = "Aspect-aware LSTM sentiment classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint, the epoch log and the dev split.
    Train(TrainArgs),
    /// Score a checkpoint on a data file.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck(GradcheckArgs),
    /// Train aspect-aware and classic cells on the synthetic corpus.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    task: Option<Task>,
    #[arg(long, default_value = "aa")]
    cell: CellKind,
    #[arg(long, default_value = "attention")]
    head: HeadKind,
    /// Training data: SemEval XML (`.xml`) or the tab-separated instance format.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Word vectors in GloVe text format.
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Word embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Hidden dimension (defaults to the embedding dimension).
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Use the generated two-aspect corpus instead of data files.
    #[arg(long)]
    synthetic: bool,
    /// Number of synthetic sentences (two instances each).
    #[arg(long, default_value_t = SYNTHETIC_SENTENCES)]
    sentences: usize,
    /// Flat `key = value` file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Task used when reading XML data (defaults to the checkpoint's task).
    #[arg(long)]
    task: Option<Task>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "aa")]
    cell: CellKind,
    #[arg(long, default_value = "attention")]
    head: HeadKind,
    #[arg(long, default_value = "acsa")]
    task: Task,
    /// Hidden and aspect dimension.
    #[arg(long, default_value_t = 6)]
    dim: usize,
    /// Word embedding dimension (defaults to 4, or to `--dim` for term aspects).
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    seq: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift one analytic gradient entry before comparing.
    #[arg(long)]
    corrupt_gradient: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = SYNTHETIC_SENTENCES)]
    sentences: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value = "last")]
    head: HeadKind,
}

fn usage(cmd: &str, msg: &str) -> ! {
    use clap::CommandFactory;
    let mut c = Cli::command();
    let sub = c.find_subcommand_mut(cmd).expect("known subcommand").clone();
    sub.bin_name(format!("aalstm {cmd}"))
        .error(clap::error::ErrorKind::ArgumentConflict, msg)
        .exit()
}

fn build_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut c = if a.synthetic { synthetic_config() } else { TrainConfig::default() };
    if let Some(path) = &a.config {
        load_config_file(&mut c, path)?;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.lr {
        c.learning_rate = v;
    }
    if let Some(v) = a.batch {
        c.batch_size = v;
    }
    if let Some(v) = a.dropout {
        c.dropout_p = v;
    }
    if let Some(v) = a.l2 {
        c.l2_coeff = v;
    }
    if let Some(v) = a.dim {
        c.embedding_dim = v;
    }
    if let Some(v) = a.hidden {
        c.hidden_dim = Some(v);
    }
    if let Some(v) = a.epochs {
        c.max_epochs = v;
    }
    if let Some(v) = a.patience {
        c.early_stop_patience = v;
    }
    c.validate()?;
    Ok(c)
}

fn read_data(path: &Path, task: Task) -> Result<Vec<LabeledInstance>> {
    let is_xml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("xml"));
    let data = if is_xml {
        parse_semeval_xml(path, task)?
    } else {
        load_instances(path)?
    };
    if let Some(bad) = data.iter().find(|i| i.aspect.task() != task) {
        return Err(Error::Config(format!(
            "{} holds {} instances but the task is {}",
            path.display(),
            bad.aspect.task().as_str(),
            task.as_str()
        )));
    }
    Ok(data)
}

fn print_report(name: &str, r: &EvalReport) {
    println!("== {name} ({} instances)", r.total());
    print!("{r}");
    println!("{}", r.to_json_line());
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    if a.synthetic {
        if a.task == Some(Task::Acsa) {
            usage("train", "--synthetic generates term aspects and cannot be combined with --task acsa");
        }
        if a.data.is_some() || a.test_data.is_some() || a.emb.is_some() {
            usage("train", "--synthetic cannot be combined with --data, --test-data or --emb");
        }
    } else if a.data.is_none() || a.emb.is_none() || a.task.is_none() {
        usage("train", "--task, --data and --emb are required unless --synthetic is given");
    }
    let config = build_config(&a)?;
    let task = a.task.unwrap_or(Task::Atsa);

    let (train_all, test, table) = if a.synthetic {
        let corpus = generate_synthetic(a.sentences, config.seed, config.embedding_dim)?;
        (corpus.train, Some(corpus.test), corpus.embeddings)
    } else {
        let train_all = read_data(a.data.as_deref().expect("checked"), task)?;
        let test = a.test_data.as_deref().map(|p| read_data(p, task)).transpose()?;
        let mut sets: Vec<&[LabeledInstance]> = vec![&train_all];
        if let Some(t) = &test {
            sets.push(t);
        }
        let vocab = Vocabulary::from_instances(sets);
        let emb = a.emb.as_deref().expect("checked");
        let table: EmbeddingTable = load_embeddings(emb, &vocab, config.embedding_dim, config.seed)?;
        eprintln!(
            "vocabulary {} words, {} without pretrained vectors",
            table.vocab.len(),
            table.oov_count()
        );
        (train_all, test, table)
    };

    let (train_part, dev_part) = dev_split(&train_all, config.dev_fraction, config.seed.wrapping_add(2))?;
    let spec = ModelSpec {
        task,
        cell: a.cell,
        head: a.head,
        embedding_dim: config.embedding_dim,
        hidden_dim: config.hidden(),
    };
    let model = Model::new(spec, table, config.init_low, config.init_high, config.seed.wrapping_add(1))?;
    let train_set = model.encode_all(&train_part)?;
    let dev_set = model.encode_all(&dev_part)?;
    let [p, n, u] = polarity_counts(&train_part);
    eprintln!(
        "train {} instances ({p} positive, {n} negative, {u} neutral), dev {}",
        train_set.len(),
        dev_set.len()
    );

    let outcome = train(&config, model, &train_set, &dev_set)?;

    fs::create_dir_all(&a.out)?;
    save_model(&a.out.join("model.ckpt"), &outcome.model)?;
    let log = format!("epoch\ttrain_loss\tdev_acc\tdev_macro_f1\n{}", format_log(&outcome.log));
    fs::write(a.out.join("metrics.tsv"), log)?;
    save_instances(&a.out.join("dev.tsv"), &dev_part)?;
    let mut reports = vec![format!("dev\t{}", outcome.dev_report.to_json_line())];

    println!("best epoch {} of {}", outcome.best_epoch, outcome.log.len());
    print_report("dev", &outcome.dev_report);
    if let Some(test) = &test {
        save_instances(&a.out.join("test.tsv"), test)?;
        let report = evaluate(&outcome.model, &outcome.model.encode_all(test)?)?;
        print_report("test", &report);
        reports.push(format!("test\t{}", report.to_json_line()));
    }
    fs::write(a.out.join("reports.tsv"), reports.join("\n") + "\n")?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    if let Some(t) = a.task {
        if t != model.spec.task {
            return Err(Error::Config(format!(
                "checkpoint was trained for {} but --task is {}",
                model.spec.task.as_str(),
                t.as_str()
            )));
        }
    }
    let data = read_data(&a.data, model.spec.task)?;
    let report = evaluate(&model, &model.encode_all(&data)?)?;
    print_report(&a.data.display().to_string(), &report);
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<bool> {
    let mut s = GradCheckSetup::new(a.task, a.cell, a.head, a.seed);
    s.hidden_dim = a.dim;
    s.seq_len = a.seq;
    s.embedding_dim = a.emb_dim.unwrap_or(match a.task {
        Task::Atsa => a.dim,
        Task::Acsa => 4,
    });
    let report = if a.corrupt_gradient {
        run_gradcheck(&s, corrupt_gradient)?
    } else {
        run_gradcheck(&s, |_| {})?
    };
    let tol = 1e-4;
    let ok = report.passes(tol);
    println!(
        "{} cell, {} head, {} task: {report}",
        a.cell.as_str(),
        a.head.as_str(),
        a.task.as_str()
    );
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut config = synthetic_config();
    config.seed = a.seed;
    if let Some(e) = a.epochs {
        config.max_epochs = e;
    }
    if let Some(p) = a.patience {
        config.early_stop_patience = p;
    }
    if let Some(lr) = a.lr {
        config.learning_rate = lr;
    }
    if let Some(h) = a.hidden {
        config.hidden_dim = Some(h);
        config.embedding_dim = h;
    }
    println!("cell\thead\ttest_acc\ttest_macro_f1\tdisambiguation_acc\tbest_epoch");
    for cell in [CellKind::AspectAware, CellKind::Classic] {
        let start = std::time::Instant::now();
        let run = run_synthetic(cell, a.head, a.sentences, &config)?;
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}",
            cell.as_str(),
            a.head.as_str(),
            run.test_report.accuracy,
            run.test_report.macro_f1,
            run.disambiguation_accuracy,
            run.best_epoch,
        );
        eprintln!("{} cell: {:.1}s", cell.as_str(), start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
