//! Two-stage training (CoSL, then per-category CaSR), hyperparameter
//! selection and evaluation.

mod adam;
mod casr;
mod config;
mod cosl;
mod data;
mod evaluate;
mod log;
mod run;
mod run_config;
mod select;
mod train;

pub use adam::Adam;
pub use casr::{partial_iou, refine_casr, CasrOutcome};
pub use config::{Stage, TrainConfig};
pub use cosl::{mean_iou, run_cosl_inference, split_objects, train_cosl, CoslOutcome, TrainPair};
pub use data::{
    audit_access, read_access_log, AccessRecord, AuditReport, DataKind, DataStore, Phase, ACCESS_LOG_NAME,
};
pub use evaluate::{evaluate, sample_metrics, CategoryMetrics, MetricsReport, SampleMetrics, CD_SCALE};
pub use log::{RunLog, StepRecord};
pub use run::{
    casr_partials, category_banks, cosl_pairs, ground_truths, inference_inputs, run_toy_pipeline, seen_bank,
    PipelineOutcome,
};
pub use run_config::{RunConfig, RESOLVED_CONFIG_NAME};
pub use select::{select_hyperparams, EvalSet, Selection};
pub use train::Trained;
