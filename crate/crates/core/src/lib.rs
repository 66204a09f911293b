//! Exact norms, block constructions and conditionality gauges for Garling
//! sequence spaces `g(w, p)`.

pub mod cli;
pub mod conditionality;
pub mod construction;
pub mod embedding;
mod envelope;
pub mod error;
pub mod norms;
pub mod report;
pub mod seq;
pub mod sum;
pub mod weights;

pub use error::{Error, Result};
pub use norms::SpaceNorm;
pub use seq::FinSeq;
pub use weights::Weight;
