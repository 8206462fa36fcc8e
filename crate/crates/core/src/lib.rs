//! Robust rotation averaging by deep matrix factorization.

pub mod cli;
pub mod dmf;
pub mod error;
pub mod eval;
pub mod filter;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod so3;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{build_observation_matrix, is_connected, Edge, GroundTruth, ObservationMatrix, ViewGraph};
pub use so3::Rotation;
