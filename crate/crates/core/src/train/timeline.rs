use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SnapshotRecord;
use crate::metrics::{classify_stage, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub step: usize,
    pub tokens: usize,
    pub loss: f64,
    pub stage: Stage,
    pub emergence_layer: Option<usize>,
    pub sink_center: Option<usize>,
}

/// Stage of every record, reclassified from its emergence layer and sink
/// center, sorted by step.
pub fn stage_timeline(records: &[SnapshotRecord]) -> Vec<TimelineRow> {
    let mut rows: Vec<TimelineRow> = records
        .iter()
        .map(|r| {
            let e = r.sink_report.emergence_layer;
            let c = r.sink_report.sink_center;
            TimelineRow {
                step: r.step,
                tokens: r.tokens_seen,
                loss: r.train_loss,
                stage: classify_stage(e, c),
                emergence_layer: e,
                sink_center: c,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.step);
    rows
}

/// Missing layers and centers are written as empty fields.
pub fn timeline_csv(rows: &[TimelineRow]) -> String {
    let mut s = String::from("step,tokens,loss,stage,emergence_layer,sink_center\n");
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.step,
            r.tokens,
            r.loss,
            r.stage,
            opt(r.emergence_layer),
            opt(r.sink_center)
        );
    }
    s
}
