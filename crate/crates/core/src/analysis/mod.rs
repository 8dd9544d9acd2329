//! Metrics and statistics over trial records.

mod aggregate;
mod metrics;
mod progress;
mod stats;

pub use aggregate::{
    aggregate, metrics_for, model_label, progress_table, write_progress_csv, GroupField,
    ProgressRow, Summary, SummaryRow, SummaryTable, METRIC_COLUMNS,
};
pub use metrics::{trial_metrics, TrialMetrics};
pub use progress::{elimination_progress, normalized_progress};
pub use stats::{average_ranks, spearman, spearman_exact, stars, welch_t_test, Correlation, TTest};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("no hypothesis remains consistent with the history")]
    InconsistentHistory,
    #[error("normalization undefined for baseline progress {0}")]
    UndefinedNormalization(f64),
    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,
    #[error("t-test undefined: {0}")]
    UndefinedTest(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrupt record: {0}")]
    CorruptRecord(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for AnalysisError {
    fn from(e: csv::Error) -> Self {
        AnalysisError::Csv(e.to_string())
    }
}
