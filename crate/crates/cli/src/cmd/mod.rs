pub mod circuit;
pub mod cone;
pub mod corpus;
pub mod inspect;
pub mod normcheck;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sinklab::corpus::{byte_tokenizer, TokenStream, SAMPLE_TEXT};
use sinklab::model::{load_checkpoint, ModelConfig, ModelWeights};
use sinklab::train::init_weights;
use sinklab::Error;

use crate::output::Run;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Random,
    Zero,
}

impl Init {
    pub fn parse(s: Option<&str>) -> Result<Option<Self>> {
        match s {
            None => Ok(None),
            Some("random") => Ok(Some(Self::Random)),
            Some("zero") => Ok(Some(Self::Zero)),
            Some(other) => Err(Error::Input(format!("unknown init `{other}`")).into()),
        }
    }
}

/// Where a command's weights come from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    pub checkpoint: Option<PathBuf>,
    pub init: Init,
    pub model: ModelConfig,
}

impl ModelSource {
    pub fn load(&self, run: &mut Run, seed: u64) -> Result<ModelWeights<f32>> {
        match &self.checkpoint {
            Some(dir) => {
                run.input(&dir.join("manifest.json"))?;
                run.input(&dir.join("tensors.bin"))?;
                Ok(load_checkpoint(dir)?.weights)
            }
            None => match self.init {
                Init::Random => Ok(init_weights(&self.model, seed)?),
                Init::Zero => Ok(ModelWeights::zeros(&self.model)?),
            },
        }
    }
}

/// NDJSON token stream, or the bundled sample as bytes.
pub fn read_corpus(run: &mut Run, path: Option<&Path>) -> Result<TokenStream> {
    match path {
        Some(p) => {
            let bytes = run.input(p)?;
            Ok(TokenStream::read_ndjson(&bytes[..])?)
        }
        None => Ok(byte_tokenizer(SAMPLE_TEXT.as_bytes())),
    }
}

/// The bundled sample split into paragraphs, one document each.
pub fn sample_documents() -> Vec<Vec<u32>> {
    SAMPLE_TEXT
        .split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.bytes().map(u32::from).collect())
        .collect()
}
