pub mod ingest;
pub mod pipeline;
pub mod neuro;
pub mod models;
pub mod train;
pub mod eval;
pub mod search;
