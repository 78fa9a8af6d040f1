//! Workshop service and analysis pipeline for interval-valued surveys.

pub mod pipeline;
pub mod service;
