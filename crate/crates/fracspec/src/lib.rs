#![doc = include_str!("../README.md")]

pub mod besov_analysis;
pub mod error;
pub mod experiment;
pub mod fractal_measure;
pub mod fractal_operator;
pub mod psido_engine;
pub mod s_numbers;
pub mod spectral_report;

pub use error::{Error, Result};
