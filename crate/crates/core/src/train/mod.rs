//! Training loop, optimizer, gradient checks and stage timelines.

mod gradcheck;
mod init;
mod optim;
mod run;
mod timeline;

pub use gradcheck::{gradient_check, sample_param_subset, GradCheck, ParamIndex};
pub use init::{init_weights, INIT_STD};
pub use optim::{clip_grad_norm, AdamW, TrainConfig, WARMUP_STEPS};
pub use run::{checkpoint_dir, probe_eval, sample_batch, train_loop, SnapshotRecord, TrainOptions, TrainRun};
pub use timeline::{stage_timeline, timeline_csv, TimelineRow};
