//! File formats, the remote scorer, the streaming annotator and the
//! `nlicur` command line built on `nlicur-core`.

pub mod annotations;
pub mod cli;
pub mod commands;
pub mod config;
pub mod corpus_io;
pub mod csvio;
pub mod error;
pub mod fsio;
pub mod manifest;
pub mod pipeline;
pub mod profiles;
pub mod remote;
pub mod render;
pub mod tables;

pub use error::{Error, ErrorKind, Result};
