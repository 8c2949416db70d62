pub mod agent;
pub mod ingest;
pub mod provenance;
pub mod annotation;
pub mod metrics;
pub mod student;
pub mod eval;
pub mod cli;
