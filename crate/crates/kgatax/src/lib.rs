//! File formats, command line and parallel evaluation around
//! [`kgatax_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod io;
pub mod parallel;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod run_config;
pub mod synth;

pub use dataset::DataBundle;
pub use error::{AppError, Result};
pub use persist::{load_model, save_model, AnyModel, ModelFileError, SavedModel};
