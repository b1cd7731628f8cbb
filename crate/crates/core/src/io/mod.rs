//! Config documents, presets, and result bundles on disk.

mod document;
mod output;

pub use document::*;
pub use output::*;
