use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::corpus::{ngram_repeat_proportion, repeat_experiment, TokenStream};

use super::{read_corpus, sample_documents, Init, ModelSource};
use crate::config::resolve;
use crate::output::Run;
use crate::{Common, ModelArgs, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NgramConfig {
    corpus: Option<PathBuf>,
    n: Vec<usize>,
    seed: u64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            n: vec![2, 3, 4],
            seed: 0,
        }
    }
}

pub fn ngram(common: &Common, corpus: Option<PathBuf>, n: Option<Vec<usize>>) -> Result<Outcome> {
    let flags = json!({ "corpus": corpus, "n": n, "seed": common.seed });
    let cfg: NgramConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("ngram", &common.out_dir, cfg.seed, &cfg)?;
    let stream = read_corpus(&mut run, cfg.corpus.as_deref())?;
    let mut csv = String::from("n,proportion\n");
    for &n in &cfg.n {
        let p = ngram_repeat_proportion(&stream, n)?;
        let _ = writeln!(csv, "{n},{p}");
    }
    run.write("ngram.csv", csv.as_bytes())?;
    run.finish()?;
    Ok(Outcome::Pass)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepeatConfig {
    source: ModelSource,
    corpus: Option<PathBuf>,
    n: Vec<usize>,
    bos_id: u32,
    /// Documents are truncated to this many tokens.
    doc_len: usize,
    max_docs: usize,
    seed: u64,
}

impl Default for RepeatConfig {
    fn default() -> Self {
        Self {
            source: ModelSource::default(),
            corpus: None,
            n: (1..=8).collect(),
            bos_id: 0,
            doc_len: 56,
            max_docs: 32,
            seed: 0,
        }
    }
}

pub fn repeat(
    common: &Common,
    model: &ModelArgs,
    corpus: Option<PathBuf>,
    n: Option<Vec<usize>>,
) -> Result<Outcome> {
    let flags = json!({
        "source": {
            "checkpoint": model.checkpoint,
            "init": Init::parse(model.init.as_deref())?,
        },
        "corpus": corpus,
        "n": n,
        "seed": common.seed,
    });
    let cfg: RepeatConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("repeat", &common.out_dir, cfg.seed, &cfg)?;
    let weights = cfg.source.load(&mut run, cfg.seed)?;
    let docs: Vec<Vec<u32>> = match &cfg.corpus {
        Some(_) => {
            let s: TokenStream = read_corpus(&mut run, cfg.corpus.as_deref())?;
            s.documents().map(<[u32]>::to_vec).collect()
        }
        None => sample_documents(),
    };
    let docs: Vec<Vec<u32>> = docs
        .into_iter()
        .filter(|d| d.len() >= 2)
        .take(cfg.max_docs)
        .map(|mut d| {
            d.truncate(cfg.doc_len);
            d
        })
        .collect();
    let table = repeat_experiment(&weights, &docs, &cfg.n, cfg.bos_id)?;
    run.write("repeat_loss.csv", table.loss_csv().as_bytes())?;
    run.write("repeat_count.csv", table.count_csv().as_bytes())?;
    run.write_json("repeat.json", &table)?;
    run.finish()?;
    Ok(Outcome::Pass)
}
