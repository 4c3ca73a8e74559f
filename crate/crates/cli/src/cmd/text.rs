use std::path::PathBuf;

use clap::Args;
use voltext::pipeline::{headline_corpus, PipelineError};
use voltext::textprep::{read_news_jsonl, HeadlineProcessor, RuleSet, SentenceCorpus, TagFilter};

use super::{ensure_parent, require_file};

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Rule catalogue; the bundled one when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// News records (`.jsonl`) or raw text, one document per line.
    #[arg(long = "in", value_name = "CORPUS")]
    input: PathBuf,
    /// Output corpus: one tokenized sentence per line.
    #[arg(long, value_name = "CORPUS")]
    out: PathBuf,
    /// Keep only news tagged `about:TICKER` (news records only).
    #[arg(long)]
    ticker: Option<String>,
}

pub fn clean(a: CleanArgs) -> Result<(), PipelineError> {
    require_file(&a.input)?;
    let rules = match &a.rules {
        Some(p) => {
            require_file(p)?;
            RuleSet::from_file(p)?
        }
        None => RuleSet::default(),
    };
    let is_jsonl = a.input.extension().is_some_and(|e| e == "jsonl");
    let corpus = if is_jsonl {
        let mut news = read_news_jsonl(&a.input)?;
        if let Some(t) = &a.ticker {
            let f = TagFilter::about(t);
            news.retain(|n| f.matches(n));
        }
        let proc = HeadlineProcessor { rules, ..HeadlineProcessor::default() };
        headline_corpus(&news, &proc)
    } else {
        let text = std::fs::read_to_string(&a.input)?;
        SentenceCorpus::from_texts(text.lines(), &rules)
    };
    ensure_parent(&a.out)?;
    corpus.write_lines(&a.out)?;
    eprintln!("{} sentences, {} tokens -> {}", corpus.sentences.len(), corpus.total_tokens(), a.out.display());
    Ok(())
}
