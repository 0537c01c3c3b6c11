//! Batch front end for the optomechanics simulation core: JSON configuration,
//! deterministic CSV export, SVG figures and a built-in validation suite.

pub mod config;
pub mod csvio;
pub mod figures;
pub mod runs;
pub mod validate;
