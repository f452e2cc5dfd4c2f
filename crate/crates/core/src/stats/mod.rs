//! Rank correlations and the embedding-to-sentiment linear probe.

pub mod correlation;
pub mod probe;

pub use correlation::{average_ranks, pearson, spearman, spearman_table, CorrelationTable};
pub use probe::{ols_r2_probe, probe_embeddings, random_vector_baseline, ProbeResult, RIDGE_LAMBDA};
