//! Checking embedded C programs against temporal HAL-API dependencies
//! (THADs): specification model and language, C-subset frontend,
//! annotation generator, and a must-dataflow checker with witnesses.

pub mod annotate;
pub mod checker;
pub mod dataflow;
pub mod frontend;
pub mod model;
pub mod report;
pub mod spec;
