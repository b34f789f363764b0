//! Subjective Logic confidence propagation for assurance arguments.

pub mod analysis;
pub mod cli;
pub mod document;
pub mod engine;
pub mod exec;
pub mod format;
pub mod graph;
pub mod opinion;
pub mod settings;
pub mod source;
