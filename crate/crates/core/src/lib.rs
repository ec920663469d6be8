pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod image;
pub mod pipeline;
pub mod rti;
pub mod sim;
pub mod trace;
pub mod tracking;
pub mod uwb;

pub use error::{Error, Result};
