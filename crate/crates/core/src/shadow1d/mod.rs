//! Interval chains and shadow points for the expanding coordinate.

pub mod chain;
pub mod orbit;
pub mod solve;

pub use chain::{
    build_interval_chain, check_chain_invariants, ChainInvariantReport, ChainStep, IntervalChain,
    StepKind,
};
pub use orbit::{generate_pseudo_orbit_1d, steer_to_target, OrbitMode, PseudoOrbit1D};
pub use solve::{solve_shadow_point_1d, ShadowResult1D, ShadowVariant};
