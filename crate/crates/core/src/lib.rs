//! Agent and critic pipeline for answering questions about long videos
//! through small tool-calling programs.

pub mod domain;
pub mod dsl;
pub mod fixtures;
pub mod model;
pub mod prompts;
pub mod toolkit;
pub mod tools;
pub mod agent;
pub mod critic;
pub mod eval;

pub use domain::*;
