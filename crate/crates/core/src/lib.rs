//! Net maximal functions, net-space and Morrey quasi-norms, and Peetre
//! K-functional brackets for cell-average step functions on dyadic windows
//! in one and two dimensions.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: sampled functions, integral images, average pyramids.
//! - [`nets`]: cubes, dyadic enumeration, explicit nets.
//! - [`maximal`]: the step profile `t ↦ f̄(t, M)` for each net kind.
//! - [`norms`]: closed-form `N_{p,q}` quasi-norms, the Morrey norm and
//!   interpolation parameter algebra.
//! - [`interp`]: constructive decompositions and K-functional brackets.
//! - [`harness`]: corpora, inequality verification runs and reports.

pub mod error;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod maximal;
pub mod nets;
pub mod norms;
pub mod numeric;
pub mod report;

pub use error::{Error, Result};
pub use grid::{AveragePyramid, GridFormat, PrefixSums, SampledFunction, Window};
pub use maximal::{MaximalProfile, SideSchedule, Tail};
pub use nets::{Cube, NetKind, NetSpec};
pub use norms::{NormParams, NormValue, SpacePair};
