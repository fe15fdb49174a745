pub mod cohort;
pub mod corpus;
pub mod exec;
pub mod ivtff;
pub mod stats;
