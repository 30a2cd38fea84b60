//! Token streams, repeat statistics and the first-token repeat harness.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cross_entropy_loss, forward, CaptureLevel, ModelWeights};
use crate::numerics::Real;

/// Small bundled English sample, byte-tokenized by the training tools.
pub const SAMPLE_TEXT: &str = include_str!("../data/sample.txt");

/// Concatenated documents. `doc_boundaries[d]` is the start of document `d`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub ids: Vec<u32>,
    pub doc_boundaries: Vec<usize>,
    pub has_bos: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct DocLine {
    ids: Vec<u32>,
    has_bos: bool,
}

impl TokenStream {
    pub fn from_documents<I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = (D, bool)>,
        D: AsRef<[u32]>,
    {
        let mut s = Self::default();
        for (d, bos) in docs {
            s.push_document(d.as_ref(), bos);
        }
        s
    }

    /// Appends a document. Empty documents are dropped.
    pub fn push_document(&mut self, ids: &[u32], has_bos: bool) {
        if ids.is_empty() {
            return;
        }
        self.doc_boundaries.push(self.ids.len());
        self.ids.extend_from_slice(ids);
        self.has_bos.push(has_bos);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.doc_boundaries.len()
    }

    pub fn documents(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.doc_boundaries.len()).map(move |d| {
            let start = self.doc_boundaries[d];
            let end = self.doc_boundaries.get(d + 1).copied().unwrap_or(self.ids.len());
            &self.ids[start..end]
        })
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if let Some(&t) = self.ids.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::Input(format!("token {t} outside vocab {vocab_size}")));
        }
        if self.has_bos.len() != self.doc_boundaries.len() {
            return Err(Error::Format("one has_bos flag per document".into()));
        }
        let ok = self.doc_boundaries.first().is_none_or(|&b| b == 0)
            && self.doc_boundaries.windows(2).all(|w| w[0] < w[1])
            && self.doc_boundaries.last().is_none_or(|&b| b < self.ids.len());
        if !ok {
            return Err(Error::Format("document boundaries out of order".into()));
        }
        Ok(())
    }

    /// One JSON object `{ids, has_bos}` per line.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for (d, ids) in self.documents().enumerate() {
            let line = DocLine {
                ids: ids.to_vec(),
                has_bos: self.has_bos[d],
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self> {
        let mut s = Self::default();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let d: DocLine = serde_json::from_str(&line)?;
            s.push_document(&d.ids, d.has_bos);
        }
        Ok(s)
    }
}

/// Bytes as token ids (vocabulary 256), one document.
pub fn byte_tokenizer(text: &[u8]) -> TokenStream {
    let ids: Vec<u32> = text.iter().map(|&b| b as u32).collect();
    TokenStream::from_documents([(ids, false)])
}

/// Inverse of [`byte_tokenizer`] over all documents.
pub fn decode(stream: &TokenStream) -> Result<Vec<u8>> {
    stream
        .ids
        .iter()
        .map(|&t| u8::try_from(t).map_err(|_| Error::Input(format!("token {t} is not a byte"))))
        .collect()
}

/// Share of length-`n` windows whose tokens are all equal. Windows stay
/// inside documents.
pub fn ngram_repeat_proportion(stream: &TokenStream, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Input(format!("n = {n}, need n >= 2")));
    }
    let mut windows = 0usize;
    let mut repeats = 0usize;
    for doc in stream.documents() {
        if doc.len() < n {
            continue;
        }
        windows += doc.len() - n + 1;
        let mut run = 1usize;
        for i in 1..=doc.len() {
            if i < doc.len() && doc[i] == doc[i - 1] {
                run += 1;
            } else {
                repeats += run.saturating_sub(n - 1);
                run = 1;
            }
        }
    }
    if windows == 0 {
        let longest = stream.documents().map(<[u32]>::len).max().unwrap_or(0);
        return Err(Error::InsufficientData {
            needed: n,
            have: longest,
        });
    }
    Ok(repeats as f64 / windows as f64)
}

/// Repeats the document's first token `n` times. `content` excludes any BOS.
///
/// With BOS the stream is `[bos × n] + content`; without, it is
/// `[content₀ × n] + content[1..]`. The mask marks which token positions are
/// scored. Both settings skip the first `n` positions; the BOS setting also
/// skips its final position, so each scores `content.len() − 1` tokens.
pub fn build_repeat_variants(
    content: &[u32],
    n: usize,
    with_bos: bool,
    bos_id: u32,
) -> Result<(Vec<u32>, Vec<bool>)> {
    if n < 1 {
        return Err(Error::Input("repeat count must be >= 1".into()));
    }
    if content.is_empty() {
        return Err(Error::Input("empty document".into()));
    }
    let stream: Vec<u32> = if with_bos {
        std::iter::repeat_n(bos_id, n)
            .chain(content.iter().copied())
            .collect()
    } else {
        std::iter::repeat_n(content[0], n)
            .chain(content[1..].iter().copied())
            .collect()
    };
    let last = stream.len() - 1;
    let mask = (0..stream.len())
        .map(|i| i >= n && !(with_bos && i == last))
        .collect();
    Ok((stream, mask))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatCell {
    pub with_bos: bool,
    pub n: usize,
    pub loss: f64,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatTable {
    pub n_values: Vec<usize>,
    pub cells: Vec<RepeatCell>,
}

impl RepeatTable {
    pub fn cell(&self, with_bos: bool, n: usize) -> Option<&RepeatCell> {
        self.cells.iter().find(|c| c.with_bos == with_bos && c.n == n)
    }

    /// Rows are settings, columns are repeat counts.
    pub fn loss_csv(&self) -> String {
        self.csv(|c| c.loss.to_string())
    }

    pub fn count_csv(&self) -> String {
        self.csv(|c| c.evaluated.to_string())
    }

    fn csv(&self, f: impl Fn(&RepeatCell) -> String) -> String {
        let mut s = String::from("setting");
        for n in &self.n_values {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for (label, bos) in [("w/ bos", true), ("w/o bos", false)] {
            s.push_str(label);
            for &n in &self.n_values {
                let v = self.cell(bos, n).map(&f).unwrap_or_default();
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Mean masked loss for both settings at each repeat count, pooled over
/// documents (every scored token weighs the same).
pub fn repeat_experiment<T: Real>(
    weights: &ModelWeights<T>,
    docs: &[Vec<u32>],
    n_values: &[usize],
    bos_id: u32,
) -> Result<RepeatTable> {
    let mut cells = Vec::new();
    for with_bos in [true, false] {
        for &n in n_values {
            let mut total = 0.0;
            let mut count = 0usize;
            for doc in docs {
                let (stream, mask) = build_repeat_variants(doc, n, with_bos, bos_id)?;
                let len = stream.len();
                let t = forward(weights, &stream[..len - 1], CaptureLevel::Logits)?;
                match cross_entropy_loss(&t.logits, &stream[1..], &mask[1..]) {
                    Ok(v) => {
                        total += v.mean * v.count as f64;
                        count += v.count;
                    }
                    Err(Error::EmptyEvaluation) => {}
                    Err(e) => return Err(e),
                }
            }
            if count == 0 {
                return Err(Error::EmptyEvaluation);
            }
            cells.push(RepeatCell {
                with_bos,
                n,
                loss: total / count as f64,
                evaluated: count,
            });
        }
    }
    Ok(RepeatTable {
        n_values: n_values.to_vec(),
        cells,
    })
}
