//! Real-time prediction of reach-to-grasp movements from hand tracking.
//!
//! The crate turns 12-sensor magnetic tracking streams into predictions of
//! the remaining hand-to-object distance, the time until the grasp, and the
//! identity, size or shape of the object being reached for.

pub mod capture;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geom;
pub mod neural;
pub mod preprocessing;
pub mod runtime;
pub mod synthgen;
pub mod task;

pub use error::{Error, Result};

/// Guide chapters compiled as doctests so their examples stay current.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/recordings.md")]
    mod recordings {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/realtime.md")]
    mod realtime {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
