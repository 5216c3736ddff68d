//! Geometric Lorenz maps and flows, parameter-shifted pseudo-orbits and
//! constructive shadowing.
//!
//! The crate is organised bottom-up:
//!
//! * [`map`]: the map family `L_mu`, its admissibility conditions and
//!   derived constants;
//! * [`shadow1d`]: interval chains and shadow points for the expanding
//!   coordinate;
//! * [`shadow2d`]: the planar lift and the parameter-fixed probe;
//! * [`flow`]: a hybrid flow (linear saddle box plus return tubes) whose
//!   first return map is exactly `L_mu`;
//! * [`flow_shadow`]: chains of the flow, crossing sequences, their
//!   projection to map pseudo-orbits and reparametrized shadowing.

pub mod error;
pub mod export;
pub mod flow;
pub mod flow_shadow;
pub mod interval;
pub mod map;
pub mod seeds;
pub mod shadow1d;
pub mod shadow2d;

pub use error::{Error, Result};
pub use interval::{verify_rhs_shift, Interval};
pub use map::{
    check_conditions, derive_eta0, derive_map_constants, AlphaSpec, BetaSpec, Branch,
    ConditionReport, LorenzMapSpec, MapConstants, PlanarPoint,
};
