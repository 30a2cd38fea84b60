//! Sink diagnostics over forward traces.

mod attention;
mod export;
mod hidden;

use serde::{Deserialize, Serialize};

pub use attention::{ablate_head, avg_attn_to_position, emergence_layer, sink_center, sink_rate};
pub use export::{matrix_csv, pgm_p5, scaled_pgm};
pub use hidden::{cosine_to_position_mean, norm_profile, p0_pca_separation, PcaSeparation};

use crate::error::Result;
use crate::model::ForwardTrace;
use crate::numerics::{DenseMatrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    PreEmergent,
    Early,
    Transitional,
    Final,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PreEmergent => "pre-emergent",
            Self::Early => "early",
            Self::Transitional => "transitional",
            Self::Final => "final",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Layers `≤ 2` count as the first two layers.
pub const EARLY_LAYER_LIMIT: usize = 2;

/// No emergence: pre-emergent. Emergence past layer 2: early. Emergence by
/// layer 2 with the sink anywhere but position 0 (or nowhere): transitional.
/// Otherwise final.
pub fn classify_stage(emergence: Option<usize>, center: Option<usize>) -> Stage {
    match emergence {
        None => Stage::PreEmergent,
        Some(l) if l > EARLY_LAYER_LIMIT => Stage::Early,
        Some(_) if center == Some(0) => Stage::Final,
        Some(_) => Stage::Transitional,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkConfig {
    pub epsilon: f64,
    pub epsilon_emerge: f64,
    pub layer_min: usize,
    pub k_max: usize,
}

impl Default for SinkConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            epsilon_emerge: 0.3,
            layer_min: 2,
            k_max: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkReport {
    pub sink_rate: f64,
    /// `[step][position]` mean hidden-state norm.
    pub norm_profile: DenseMatrix,
    /// `[step][position]` mean cosine to the across-sample mean.
    pub cos_to_mean: DenseMatrix,
    /// `[layer][head]` mean attention to position 0.
    pub avg_attn_to_p0: DenseMatrix,
    pub emergence_layer: Option<usize>,
    pub sink_center: Option<usize>,
    pub stage: Stage,
}

/// Every diagnostic over full traces of one probe batch.
pub fn sink_report<T: Real>(traces: &[ForwardTrace<T>], cfg: &SinkConfig) -> Result<SinkReport> {
    let emergence = emergence_layer(traces, cfg.epsilon_emerge)?;
    let center = sink_center(traces, cfg.layer_min, cfg.k_max, cfg.epsilon_emerge)?;
    let steps = traces.first().map_or(0, |t| t.hidden.len());
    let mut cos = Vec::with_capacity(steps);
    for s in 0..steps {
        cos.push(cosine_to_position_mean(traces, crate::model::LayerStep(s))?);
    }
    Ok(SinkReport {
        sink_rate: sink_rate(traces, cfg.epsilon, 0)?,
        norm_profile: norm_profile(traces)?,
        cos_to_mean: DenseMatrix::from_rows(&cos)?,
        avg_attn_to_p0: avg_attn_to_position(traces, 0)?,
        emergence_layer: emergence,
        sink_center: center,
        stage: classify_stage(emergence, center),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_cases() {
        assert_eq!(classify_stage(None, Some(0)), Stage::PreEmergent);
        assert_eq!(classify_stage(None, None), Stage::PreEmergent);
        assert_eq!(classify_stage(Some(12), Some(0)), Stage::Early);
        assert_eq!(classify_stage(Some(2), Some(1)), Stage::Transitional);
        assert_eq!(classify_stage(Some(2), None), Stage::Transitional);
        assert_eq!(classify_stage(Some(2), Some(0)), Stage::Final);
        assert_eq!(classify_stage(Some(0), Some(0)), Stage::Final);
        assert_eq!(Stage::PreEmergent.to_string(), "pre-emergent");
        assert_eq!(
            serde_json::to_string(&Stage::PreEmergent).unwrap(),
            "\"pre-emergent\""
        );
    }
}
