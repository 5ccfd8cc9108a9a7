//! Evaluation harness: dataset loaders, benchmark driver, ablation sweeps,
//! the rationale-agreement study, and batch pairwise-loss evaluation.

pub mod ablate;
pub mod agreement;
pub mod bench;
pub mod dataset;
pub mod pairloss;
pub mod report;
pub mod setup;

pub use ablate::{
    ablation_csv, run_ablation, AblationAxis, AblationError, AblationOutcome, AblationPlan,
    VariantReport, VariantResult, DEFAULT_DEMO_SWEEP,
};
pub use agreement::{run_rationale_agreement, AgreementError, AgreementRecord, AgreementReport};
pub use bench::{aggregate, run_benchmark, BenchError, BenchOutcome, CHECKPOINT_EVERY};
pub use dataset::{load_dataset, load_dataset_str, DatasetError, DatasetFormat, PreferenceRecord};
pub use pairloss::{compute_pair_losses, PairLossError};
pub use report::{csv_row, report_csv, RecordOutcome, ReportTally, SliceReport, CSV_HEADER};
pub use setup::JudgeSetup;
