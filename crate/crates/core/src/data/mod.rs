//! Dataset ingestion, the synthetic conflict-alert generator and fold plans.

mod csv_io;
mod folds;
mod synth;

pub use csv_io::{load_csv, read_table, write_csv, RawTable};
pub use folds::{make_folds, Fold, FoldPlan, FoldStrategy};
pub use synth::{generate_synthetic_stca, SynthConfig, STCA_FEATURES, STCA_LABEL};
