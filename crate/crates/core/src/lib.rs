//! Dialectometry over phonetic atlas data.
//!
//! An [`atlas::Atlas`] holds sites, concepts and transcribed citations.
//! [`metrics`] turns it into site × site distance matrices, [`matrixlab`]
//! compares matrices, and [`cluster`] builds binary dialect divisions and
//! scores them with silhouettes. [`cli`] wires the stages together.

pub mod atlas;
pub mod cli;
pub mod cluster;
pub mod matrixlab;
pub mod metrics;
pub mod transcript;
