//! File formats, benchmark runner and command-line interface for
//! [`rootcause_core`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod manifest;

pub use error::{Error, Result};
