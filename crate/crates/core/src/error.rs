use thiserror::Error;

/// Errors raised by the map, shadowing and flow routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("no preimage: target {target} lies outside the image of the {branch} branch")]
    NoPreimage { target: f64, branch: &'static str },

    #[error("trapping radius search failed: no eta down to {floor:e} satisfies the containment")]
    TrappingRadius { floor: f64 },

    #[error("containment violated at step {step}: {detail}")]
    Containment { step: usize, detail: String },

    #[error("empty pullback from step {m} to step {n}")]
    EmptyPullback { m: usize, n: usize },

    #[error("accuracy bound violated at index {index}: {detail}")]
    Accuracy { index: usize, detail: String },

    #[error("cannot split step {index}: duration {duration} is below tau {tau}")]
    ImpossibleSplit { index: usize, duration: f64, tau: f64 },

    #[error("chain never returns to the section after its initial point")]
    NoCrossing,

    #[error("projection failed at crossing {index} ({case}): {detail}")]
    Projection { index: usize, case: &'static str, detail: String },

    #[error("reparametrization knots are not strictly increasing at knot {index}")]
    NonMonotoneKnots { index: usize },

    #[error("constant search failed for {name}: {detail}")]
    ConstantSearch { name: &'static str, detail: String },

    #[error("pseudo-orbit generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
