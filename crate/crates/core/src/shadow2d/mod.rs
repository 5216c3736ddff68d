//! Planar lift of the 1D shadowing and the parameter-fixed probe.

pub mod probe;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::map::{Branch, LorenzMapSpec, MapConstants, PlanarPoint};
use crate::seeds;
use crate::shadow1d::{
    build_interval_chain, orbit::generate_with, solve_shadow_point_1d, OrbitMode, PseudoOrbit1D,
    ShadowResult1D, ShadowVariant,
};

pub use probe::{komuro_probe, shadow_bound_1d, ProbeReport};

const STEP_SLACK: f64 = 1e-9;

/// Restart interval of the forward re-check in [`verify_shadow_2d`].
pub const VERIFY_WINDOW: usize = 8;

/// Largest accepted mismatch between a forward window and the stored orbit.
pub const VERIFY_CONTINUITY: f64 = 1e-8;

/// A `delta`-pseudo-orbit of `L_mu` in the Euclidean metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit2D {
    pub points: Vec<PlanarPoint>,
    pub delta: f64,
    pub mu: f64,
    pub terminal_gamma: bool,
}

impl PseudoOrbit2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First coordinates as a pseudo-orbit of `alpha_mu` with the same `delta`.
    pub fn project_x(&self) -> PseudoOrbit1D {
        PseudoOrbit1D {
            points: self.points.iter().map(|p| p.x).collect(),
            delta: self.delta,
            mu: self.mu,
            terminal_gamma: self.terminal_gamma,
        }
    }

    /// Step gap `|L_mu(p_n) - p_{n+1}|`; from the singular line the gap is
    /// the distance to the nearer cusp vertex.
    pub fn step_gap(&self, spec: &LorenzMapSpec, n: usize) -> f64 {
        let (p, q) = (self.points[n], self.points[n + 1]);
        if p.on_gamma() {
            let a = q.dist(&spec.vertex(Branch::Positive));
            let b = q.dist(&spec.vertex(Branch::Negative));
            a.min(b)
        } else {
            spec.map_mu(self.mu, p).dist(&q)
        }
    }

    pub fn validate(&self, spec: &LorenzMapSpec) -> Result<()> {
        let tol = self.delta * (1.0 + STEP_SLACK) + 1e-15;
        for (n, p) in self.points.iter().enumerate() {
            if !p.in_section() {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("point ({}, {}) outside the section", p.x, p.y),
                });
            }
        }
        for n in 0..self.points.len().saturating_sub(1) {
            let gap = self.step_gap(spec, n);
            if gap > tol {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("step gap {gap:e} exceeds delta {:e}", self.delta),
                });
            }
        }
        if self.terminal_gamma && !self.points.last().is_some_and(|p| p.on_gamma()) {
            return Err(Error::Accuracy {
                index: self.points.len().saturating_sub(1),
                detail: "terminal orbit does not end on the singular line".into(),
            });
        }
        Ok(())
    }
}

/// Lifts a 1D pseudo-orbit: `y_{n+1} = beta(x_n, y_n) + noise` with
/// `|noise| <= y_delta`, and the cusp offset after a point on the singular
/// line.
pub fn lift_pseudo_orbit(
    spec: &LorenzMapSpec,
    xs: &PseudoOrbit1D,
    delta: f64,
    y_delta: f64,
    seed: u64,
) -> PseudoOrbit2D {
    let mut rng = seeds::rng(seeds::derive_seed(seed, 1));
    let mut y = rng.gen_range(-1.0..=1.0);
    let mut points = Vec::with_capacity(xs.len());
    for (n, &x) in xs.points.iter().enumerate() {
        points.push(PlanarPoint::new(x, y));
        if n + 1 == xs.len() {
            break;
        }
        let branch = if x == 0.0 {
            // the vertex whose first coordinate is nearer the successor
            if xs.points[n + 1] < 0.0 {
                Branch::Positive
            } else {
                Branch::Negative
            }
        } else {
            Branch::of(x).unwrap()
        };
        let noise = if y_delta > 0.0 {
            rng.gen_range(-y_delta..=y_delta)
        } else {
            0.0
        };
        y = (spec.beta.eval_on(branch, x, y) + noise).clamp(-1.0, 1.0);
    }
    PseudoOrbit2D {
        points,
        delta,
        mu: xs.mu,
        terminal_gamma: xs.terminal_gamma,
    }
}

/// Pseudo-orbit of `L_hat = L_{mu_hat}` with Euclidean step bound
/// `delta = epsilon1 / 100`, split evenly between the axes.
pub fn generate_pseudo_orbit_2d(
    spec: &LorenzMapSpec,
    constants: &MapConstants,
    n_steps: usize,
    seed: u64,
    mode: OrbitMode,
) -> Result<PseudoOrbit2D> {
    generate_2d_with(
        spec,
        constants.mu_hat,
        constants.delta,
        constants.epsilon1,
        n_steps,
        seed,
        mode,
    )
}

pub fn generate_2d_with(
    spec: &LorenzMapSpec,
    mu: f64,
    delta: f64,
    straddle_radius: f64,
    n_steps: usize,
    seed: u64,
    mode: OrbitMode,
) -> Result<PseudoOrbit2D> {
    let axis = delta * FRAC_1_SQRT_2;
    let xs = generate_with(spec, mu, axis, straddle_radius, n_steps, seed, mode)?;
    Ok(lift_pseudo_orbit(spec, &xs, delta, axis, seed))
}

/// A true orbit `L^n(z)` shadowing a planar pseudo-orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult2D {
    pub z: PlanarPoint,
    pub orbit: Vec<PlanarPoint>,
    pub max_error: f64,
    pub max_x_error: f64,
    pub max_y_error: f64,
    pub epsilon: f64,
    /// `m` with `L^m(z)` on the singular line (terminal variant).
    pub terminal_index: Option<usize>,
    /// Indices where the true and pseudo points lie on opposite sides of the
    /// singular line.
    pub side_mismatches: Vec<usize>,
    pub shadow_1d: ShadowResult1D,
}

impl ShadowResult2D {
    pub fn errors<'a>(&'a self, pseudo: &'a PseudoOrbit2D) -> impl Iterator<Item = f64> + 'a {
        self.orbit.iter().zip(&pseudo.points).map(|(a, b)| a.dist(b))
    }
}

/// Runs the 1D solver on the first coordinates and sets `z = (z*, y_0)`.
///
/// The second coordinate of the true orbit is iterated forwards (the fibre
/// map contracts, so this is stable) and the split budget is checked:
/// horizontal error `<= epsilon/8`, vertical `<= 7 epsilon/8`, total
/// `<= epsilon`.
pub fn solve_shadow_point_2d(
    spec: &LorenzMapSpec,
    pseudo: &PseudoOrbit2D,
    constants: &MapConstants,
    variant: ShadowVariant,
) -> Result<ShadowResult2D> {
    let xs = pseudo.project_x();
    let chain = build_interval_chain(spec, &xs, constants)?;
    let s1 = solve_shadow_point_1d(spec, &chain, &xs, constants, variant)?;
    let eps = constants.epsilon;

    let mut orbit = Vec::with_capacity(pseudo.len());
    let mut y = pseudo.points[0].y;
    let (mut max_error, mut max_x, mut max_y) = (0.0f64, 0.0f64, 0.0f64);
    let mut side_mismatches = Vec::new();
    for (n, (&w, p)) in s1.orbit.iter().zip(&pseudo.points).enumerate() {
        let q = PlanarPoint::new(w, y);
        let ex = (q.x - p.x).abs();
        let ey = (q.y - p.y).abs();
        let e = q.dist(p);
        if ex > eps / 8.0 || ey > 7.0 * eps / 8.0 || e > eps {
            return Err(Error::Accuracy {
                index: n,
                detail: format!("errors x = {ex:e}, y = {ey:e}, total = {e:e} at epsilon {eps}"),
            });
        }
        max_x = max_x.max(ex);
        max_y = max_y.max(ey);
        max_error = max_error.max(e);
        if p.x != 0.0 && w != 0.0 && (p.x < 0.0) != (w < 0.0) {
            side_mismatches.push(n);
        }
        orbit.push(q);
        if w != 0.0 {
            y = spec.beta.eval_on(Branch::of(w).unwrap(), w, y);
        }
    }

    Ok(ShadowResult2D {
        z: PlanarPoint::new(s1.z, pseudo.points[0].y),
        orbit,
        max_error,
        max_x_error: max_x,
        max_y_error: max_y,
        epsilon: eps,
        terminal_index: s1.terminal_index,
        side_mismatches,
        shadow_1d: s1,
    })
}

/// Outcome of an independent re-check of a planar shadowing claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport2D {
    pub pass: bool,
    pub epsilon: f64,
    pub max_error: f64,
    pub max_x_error: f64,
    pub max_y_error: f64,
    /// First index where the distance or the continuity check fails.
    pub first_failure: Option<usize>,
    pub steps_checked: usize,
}

/// Recomputes `L^n(z)` by forward iteration and measures its distance to the
/// pseudo-orbit.
///
/// Iteration starts from `z` itself. Because the expansion amplifies rounding,
/// the iterate is re-anchored every [`VERIFY_WINDOW`] steps to the stored orbit,
/// after checking that the two agree within [`VERIFY_CONTINUITY`]; any
/// perturbation of `z` or of the stored orbit therefore shows up either as a
/// distance failure or as a continuity failure.
pub fn verify_shadow_2d(
    spec: &LorenzMapSpec,
    pseudo: &PseudoOrbit2D,
    result: &ShadowResult2D,
    epsilon: f64,
) -> ShadowReport2D {
    let mut r = ShadowReport2D {
        pass: true,
        epsilon,
        max_error: 0.0,
        max_x_error: 0.0,
        max_y_error: 0.0,
        first_failure: None,
        steps_checked: 0,
    };
    let n = pseudo.len().min(result.orbit.len());
    if pseudo.len() != result.orbit.len() {
        r.pass = false;
        r.first_failure = Some(n);
    }
    let mut q = result.z;
    for i in 0..n {
        if i > 0 && i % VERIFY_WINDOW == 0 {
            if q.dist(&result.orbit[i]) > VERIFY_CONTINUITY {
                r.pass = false;
                r.first_failure.get_or_insert(i);
                break;
            }
            q = result.orbit[i];
        }
        let p = pseudo.points[i];
        let e = q.dist(&p);
        r.max_error = r.max_error.max(e);
        r.max_x_error = r.max_x_error.max((q.x - p.x).abs());
        r.max_y_error = r.max_y_error.max((q.y - p.y).abs());
        r.steps_checked = i + 1;
        if !(e <= epsilon) {
            r.pass = false;
            r.first_failure.get_or_insert(i);
            break;
        }
        if q.on_gamma() {
            // the true orbit stops on the singular line
            if i + 1 != n {
                r.pass = false;
                r.first_failure.get_or_insert(i);
            }
            break;
        }
        q = spec.map_mu(0.0, q);
    }
    r
}
