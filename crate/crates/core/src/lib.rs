//! Tissue-mimicking phantom design.
//!
//! Tissue dielectric models, a material database of measured or synthetic
//! samples, band matching between the two, fabrication recipes and
//! multi-layer build plans.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod matching;
pub mod materials;
pub mod recipes;
pub mod reference;
pub mod stack;

pub use error::{Error, Result};
