pub mod arch;
pub mod colors;
pub mod config;
pub mod engine;
pub mod isa;
pub mod lsu;
pub mod memory;
pub mod predictors;
pub mod reference;
pub mod report;
pub mod scenarios;
pub mod trace;
