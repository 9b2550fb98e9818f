//! File formats, configuration, statistics and experiment orchestration for
//! the SSF-CNN attention detector. Numerics live in `ssf_core`.

pub mod checkpoint;
pub mod config;
pub mod dump;
pub mod error;
pub mod experiment;
pub mod io;
pub mod montage;
pub mod report;
pub mod stats;

pub use error::{Result, SsfError};
