//! Multi-agent generation, execution and repair of OpenFOAM cases from a
//! natural-language requirement and an optional image.

pub mod config;
pub mod environment;
pub mod foamcase;
pub mod knowledge;
pub mod llm;
pub mod metrics;
pub mod paramaster;
pub mod perception;
pub mod reviewer;
pub mod runner;
pub mod writer;
