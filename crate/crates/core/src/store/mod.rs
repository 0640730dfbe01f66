//! Dataset ingestion, run persistence and prompt-diversity diagnostics.

mod dataset;
mod diversity;
mod jsonl;

pub use dataset::{load_dataset, DataError, DatasetSplits, Example, LoadOptions, Provenance, SplitStats};
pub use diversity::{diversity_report, write_diversity_csv, DiversityError, DiversityStats};
pub use jsonl::{append_jsonl, read_jsonl, rewrite_jsonl, write_atomic, JsonlRead, StoreError};
