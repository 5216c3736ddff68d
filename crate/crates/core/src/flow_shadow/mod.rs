//! Shadowing for chains of the flow: crossing sequences, their projection
//! onto map pseudo-orbits, and reparametrized comparison with true orbits.

pub mod chain;
pub mod constants;
pub mod crossing;
pub mod pipeline;
pub mod reparam;
pub mod verify;

pub use chain::{
    generate_with, perturb_state, split_long_steps, FlowOrbitMode, FlowPseudoOrbit,
    GeneratorParams, TERMINAL_TAIL,
};
pub use constants::{derive_flow_constants, falsify_flow_constants, FlowConstants, PropertyCheck};
pub use crossing::{
    extract_crossing_sequence, interpolate_chain, project_crossing_to_map_orbit, Crossing,
    CrossingKind, CrossingSequence, InterpolatedChain, Projection, ProjectionCase,
};
pub use reparam::{build_reparametrization, Reparametrization, TrueOrbit};
pub use verify::{verify_flow_shadowing, FlowShadowReport};
pub use pipeline::{run_flow_shadowing, shadow_flow_chain, FlowShadowRun, CHAIN_SAMPLES};
