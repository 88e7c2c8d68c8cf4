//! `litemul` command-line tool.

mod config;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use litemul::data::{
    build_vocab, encode_with_limits, parse_conll2003, parse_conllu_pos, synthetic, EncodedExample, Sentence, Vocab,
};
use litemul::model::count_params;
use litemul::runtime::{bench_inference, model_size_mb, Metadata, Tagger};
use litemul::train::{evaluate, train_model_with};
use serde_json::json;

use config::{CorpusFormat, RunConfig, SEED_ENV};

#[derive(Parser)]
#[command(name = "litemul", version, about = "Joint NER and POS tagging with compact BiLSTM models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train {
        /// JSON file with `model`, `train` and `data` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a field, e.g. `--set model.variant=MTL_LSTM`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
        /// Print one JSON line per epoch.
        #[arg(long)]
        verbose: bool,
        /// Leave the creation time out of the checkpoint.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Score a checkpoint on a labelled corpus.
    Eval {
        #[arg(long, short)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Tag whitespace-tokenized sentences, one per line.
    Tag {
        #[arg(long, short)]
        model: PathBuf,
        /// Input file; standard input when absent.
        #[arg(long, short)]
        input: Option<PathBuf>,
    },
    /// Measure single-sentence inference latency.
    Bench {
        #[arg(long, short)]
        model: PathBuf,
        /// Sentences to time; random full-length sentences when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Time the forward pass only, without argmax/Viterbi decoding.
        #[arg(long)]
        no_decode: bool,
    },
    /// Print parameter counts, tensor shapes and file size.
    Inspect {
        #[arg(long, short)]
        model: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Conll2003,
    Conllu,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECKPOINT: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8) -> impl Fn(litemul::Error) -> Failure {
    move |e| Failure {
        code,
        message: e.to_string(),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult = Result<(), Failure>;

fn read_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<Vec<Sentence>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    let parsed = match format.unwrap_or_else(|| CorpusFormat::for_path(path)) {
        CorpusFormat::Conll2003 => parse_conll2003(&text).map(|v| v.into_iter().map(Sentence::with_merged_pos).collect()),
        CorpusFormat::Conllu => parse_conllu_pos(&text),
    };
    parsed.map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

fn encode_all(sentences: &[Sentence], vocab: &Vocab, max_seq: usize, max_char: usize) -> Result<Vec<EncodedExample>, Failure> {
    sentences
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| encode_with_limits(s, vocab, max_seq, max_char))
        .collect::<litemul::Result<_>>()
        .map_err(fail(EXIT_DATA))
}

fn load(path: &Path) -> Result<Tagger, Failure> {
    Tagger::load(path).map_err(|e| Failure {
        code: EXIT_CHECKPOINT,
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(out: &mut impl Write, value: &impl serde::Serialize) {
    let _ = writeln!(out, "{}", serde_json::to_string(value).expect("serialisable"));
}

fn train(config: Option<PathBuf>, overrides: &[String], out_path: &Path, verbose: bool, no_timestamp: bool) -> CliResult {
    let doc = match &config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    let rc = RunConfig::resolve(doc.as_deref(), overrides, seed_env.as_deref()).map_err(usage)?;
    let train_path = rc.data.train.clone().ok_or_else(|| usage("data.train is required"))?;
    let (max_seq, max_char) = (rc.model.max_seq, rc.model.max_char);
    let corpus = read_corpus(&train_path, rc.data.format)?;
    let vocab = build_vocab(&corpus, rc.model.casing).map_err(fail(EXIT_DATA))?;
    let exs = encode_all(&corpus, &vocab, max_seq, max_char)?;
    let held_out = |p: &Option<PathBuf>| -> Result<Option<Vec<EncodedExample>>, Failure> {
        match p {
            Some(p) => Ok(Some(encode_all(&read_corpus(p, rc.data.format)?, &vocab, max_seq, max_char)?)),
            None => Ok(None),
        }
    };
    let dev = held_out(&rc.data.dev)?;
    let test = held_out(&rc.data.test)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let trained = train_model_with(&exs, &vocab, &rc.model, &rc.train, dev.as_deref(), |r| {
        if verbose {
            emit(&mut std::io::stdout(), r);
        }
    })
    .map_err(fail(EXIT_DATA))?;

    let mut tagger = Tagger::new(trained.network, trained.params, vocab);
    tagger.metadata = Metadata {
        seed: Some(rc.train.seed),
        epochs: Some(rc.train.epochs),
        ..if no_timestamp { Metadata::default() } else { Metadata::stamped() }
    };
    let bytes = tagger.save(out_path).map_err(fail(EXIT_CHECKPOINT))?;
    for (split, set) in [("dev", &dev), ("test", &test)] {
        if let Some(set) = set {
            let report = evaluate(&tagger.network, &tagger.params, set, &tagger.vocab).map_err(fail(EXIT_DATA))?;
            emit(&mut out, &json!({ "split": split, "report": report }));
        }
    }
    emit(
        &mut out,
        &json!({
            "checkpoint": out_path,
            "bytes": bytes,
            "params": count_params(&tagger.params),
            "variant": tagger.config().variant.name(),
        }),
    );
    Ok(())
}

fn eval(model: &Path, data: &Path, format: Option<FormatArg>) -> CliResult {
    let tagger = load(model)?;
    let format = format.map(|f| match f {
        FormatArg::Conll2003 => CorpusFormat::Conll2003,
        FormatArg::Conllu => CorpusFormat::Conllu,
    });
    let c = tagger.config();
    let exs = encode_all(&read_corpus(data, format)?, &tagger.vocab, c.max_seq, c.max_char)?;
    let report = evaluate(&tagger.network, &tagger.params, &exs, &tagger.vocab).map_err(fail(EXIT_DATA))?;
    emit(&mut std::io::stdout(), &report);
    Ok(())
}

fn tag(model: &Path, input: Option<PathBuf>) -> CliResult {
    let tagger = load(model)?;
    let reader: Box<dyn BufRead> = match &input {
        Some(p) => Box::new(std::io::BufReader::new(std::fs::File::open(p).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("{}: {e}", p.display()),
        })?)),
        None => Box::new(std::io::stdin().lock()),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut first = true;
    for line in reader.lines() {
        let line = line.map_err(|e| Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        })?;
        let tokens: Vec<String> = line.split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            continue;
        }
        if !first {
            let _ = writeln!(out);
        }
        first = false;
        for t in tagger.tag(&tokens).map_err(fail(EXIT_DATA))? {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                t.token,
                t.ner.as_deref().unwrap_or("-"),
                t.pos.as_deref().unwrap_or("-")
            );
        }
    }
    Ok(())
}

fn bench(model: &Path, data: Option<PathBuf>, warmup: usize, runs: usize, decode: bool) -> CliResult {
    let tagger = load(model)?;
    let c = tagger.config();
    let sentences = match &data {
        Some(p) => {
            let sents = read_corpus(p, None)?;
            sents
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| tagger.encode(&s.tokens))
                .collect::<litemul::Result<Vec<_>>>()
                .map_err(fail(EXIT_DATA))?
        }
        None => synthetic::random_sentences(&tagger.vocab, 50, c.max_seq, 0)
            .iter()
            .map(|s| tagger.encode(&s.tokens))
            .collect::<litemul::Result<Vec<_>>>()
            .map_err(fail(EXIT_DATA))?,
    };
    let report = bench_inference(&tagger, &sentences, warmup, runs, decode).map_err(|e| usage(e.to_string()))?;
    emit(&mut std::io::stdout(), &report);
    Ok(())
}

fn inspect(model: &Path) -> CliResult {
    let tagger = load(model)?;
    let tensors: Vec<_> = tagger
        .params
        .iter()
        .map(|(name, t)| json!({ "name": name, "shape": t.shape(), "elements": t.len() }))
        .collect();
    let size = model_size_mb(model).map_err(fail(EXIT_CHECKPOINT))?;
    let bytes = std::fs::metadata(model).map(|m| m.len()).unwrap_or(0);
    emit(
        &mut std::io::stdout(),
        &json!({
            "variant": tagger.config().variant.name(),
            "params": count_params(&tagger.params),
            "model_size_mb": size,
            "bytes": bytes,
            "words": tagger.vocab.word_count(),
            "chars": tagger.vocab.char_count(),
            "ner_labels": tagger.vocab.ner_labels.len(),
            "pos_labels": tagger.vocab.pos_labels.len(),
            "metadata": tagger.metadata,
            "tensors": tensors,
        }),
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train {
            config,
            overrides,
            out,
            verbose,
            no_timestamp,
        } => train(config, &overrides, &out, verbose, no_timestamp),
        Command::Eval { model, data, format } => eval(&model, &data, format),
        Command::Tag { model, input } => tag(&model, input),
        Command::Bench {
            model,
            data,
            warmup,
            runs,
            no_decode,
        } => bench(&model, data, warmup, runs, !no_decode),
        Command::Inspect { model } => inspect(&model),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("litemul: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
