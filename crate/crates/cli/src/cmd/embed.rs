use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use voltext::embedding::{
    evaluate_analogy_suite, evaluate_similarity, load_embedding, most_similar, odd_one_out, parse_analogy_file,
    parse_similarity_file, pca_project, save_embedding, train, Algorithm, EmbeddingFormat, Mode, TrainConfig,
};
use voltext::pipeline::PipelineError;
use voltext::textprep::SentenceCorpus;

use super::{ensure_parent, load_toml, require_file, user_err};
use crate::Globals;

#[derive(Debug, Subcommand)]
pub enum EmbedCommand {
    /// Train an embedding on a tokenized corpus.
    Train(TrainArgs),
    /// Accuracy on an analogy benchmark (`: section` headers, 4 tokens per line).
    EvalAnalogy {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        questions: PathBuf,
    },
    /// Spearman correlation against a word-similarity benchmark.
    EvalSim {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Nearest tokens by cosine similarity.
    Neighbors {
        #[arg(long)]
        embedding: PathBuf,
        token: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// The token least similar to the others.
    OddOne {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(required = true, num_args = 3..)]
        tokens: Vec<String>,
    },
    /// Principal-component coordinates of the given tokens.
    Pca {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(required = true, num_args = 2..)]
        tokens: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Skipgram,
    Cbow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Word2vec,
    Fasttext,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// One tokenized sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output file; `.txt`/`.vec` selects the text format, anything else binary.
    #[arg(long)]
    out: PathBuf,
    /// Training settings (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
}

fn train_config(a: &TrainArgs, g: &Globals) -> Result<TrainConfig, PipelineError> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Skipgram => Mode::SkipGram,
            ModeArg::Cbow => Mode::Cbow,
        };
    }
    if let Some(al) = a.algorithm {
        cfg.algorithm = match al {
            AlgorithmArg::Word2vec => Algorithm::Word2Vec,
            AlgorithmArg::Fasttext => Algorithm::FastText,
        };
    }
    cfg.dim = a.dim.unwrap_or(cfg.dim);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.min_count = a.min_count.unwrap_or(cfg.min_count);
    cfg.window = a.window.unwrap_or(cfg.window);
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.threads = if g.strict { 1 } else { g.jobs };
    Ok(cfg)
}

pub fn run(c: EmbedCommand, g: &Globals) -> Result<(), PipelineError> {
    match c {
        EmbedCommand::Train(a) => {
            require_file(&a.corpus)?;
            let cfg = train_config(&a, g)?;
            let corpus = SentenceCorpus::read_lines(&a.corpus)?;
            let emb = train(&corpus, &cfg)?;
            ensure_parent(&a.out)?;
            save_embedding(&emb, &a.out, EmbeddingFormat::from_path(&a.out))?;
            eprintln!("{} tokens x {} dims -> {}", emb.vocab.len(), emb.dim(), a.out.display());
        }
        EmbedCommand::EvalAnalogy { embedding, questions } => {
            require_file(&embedding)?;
            require_file(&questions)?;
            let emb = load_embedding(&embedding)?;
            let qs = parse_analogy_file(&std::fs::read_to_string(&questions)?)?;
            let rep = evaluate_analogy_suite(&emb, &qs);
            println!("section,correct,attempted,skipped,accuracy");
            for s in rep.sections.iter().chain(std::iter::once(&rep.overall)) {
                let acc = s.accuracy().map(|x| format!("{x:.4}")).unwrap_or_default();
                println!("{},{},{},{},{acc}", s.name, s.correct, s.attempted, s.skipped);
            }
        }
        EmbedCommand::EvalSim { embedding, pairs } => {
            require_file(&embedding)?;
            require_file(&pairs)?;
            let emb = load_embedding(&embedding)?;
            let ps = parse_similarity_file(&std::fs::read_to_string(&pairs)?)?;
            let rep = evaluate_similarity(&emb, &ps)?;
            println!("spearman={:.4} used={} skipped={}", rep.spearman, rep.used, rep.skipped);
        }
        EmbedCommand::Neighbors { embedding, token, top } => {
            require_file(&embedding)?;
            let emb = load_embedding(&embedding)?;
            for (t, s) in most_similar(&emb, &token, top)? {
                println!("{t}\t{s:.4}");
            }
        }
        EmbedCommand::OddOne { embedding, tokens } => {
            require_file(&embedding)?;
            let emb = load_embedding(&embedding)?;
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            println!("{}", odd_one_out(&emb, &refs)?);
        }
        EmbedCommand::Pca { embedding, dims, tokens } => {
            require_file(&embedding)?;
            if dims == 0 {
                return Err(user_err("--dims must be at least 1"));
            }
            let emb = load_embedding(&embedding)?;
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            for (t, coords) in tokens.iter().zip(pca_project(&emb, &refs, dims)?) {
                let c: Vec<String> = coords.iter().map(|x| format!("{x:.6}")).collect();
                println!("{t},{}", c.join(","));
            }
        }
    }
    Ok(())
}
