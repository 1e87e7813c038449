//! Command-line pipeline and JSON service for channelforge projects.

pub mod api;
pub mod commands;
pub mod error;
pub mod stages;
pub mod store;

pub use error::{AppError, AppResult};
