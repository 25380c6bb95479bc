//! Vertex matching for correlated Erdős–Rényi graph pairs via signed
//! chandelier counts.
//!
//! The pipeline: sample a correlated pair ([`model`]), build a family of
//! chandelier trees ([`trees`]), count signed copies rooted at each vertex
//! (exactly at oracle scale or by color coding, [`count`]), assemble the
//! aut-weighted inner-product similarity scores ([`score`]), threshold them
//! into a partial matching, and complete it with seeded percolation
//! ([`matching`]). [`pipeline`] wires the stages together and runs
//! reproducible sweeps; [`oracle`] holds the independent brute-force
//! cross-checks used by the test suites.

pub mod count;
pub mod error;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod score;
pub mod trees;

pub use error::{Error, Result};
