use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{Branch, LorenzMapSpec, MapConstants};
use crate::seeds;

/// Relative slack allowed when re-validating generated steps.
const STEP_SLACK: f64 = 1e-9;

/// How a pseudo-orbit is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitMode {
    /// Every image is perturbed by uniform noise in `[-delta, delta]`.
    Noise,
    /// Noise, plus repeated steering onto (or next to) the singular point.
    GammaCrossing,
    /// A finite orbit whose last point is exactly `0`.
    GammaTerminal,
}

impl std::str::FromStr for OrbitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(OrbitMode::Noise),
            "gamma-crossing" | "gamma" => Ok(OrbitMode::GammaCrossing),
            "gamma-terminal" => Ok(OrbitMode::GammaTerminal),
            other => Err(Error::Parameter(format!("unknown orbit mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for OrbitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrbitMode::Noise => "noise",
            OrbitMode::GammaCrossing => "gamma-crossing",
            OrbitMode::GammaTerminal => "gamma-terminal",
        })
    }
}

/// A `delta`-pseudo-orbit of `alpha_mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit1D {
    pub points: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub terminal_gamma: bool,
}

impl PseudoOrbit1D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the step bound. A point on the singular line must be followed by
    /// a point within `delta` of `-1` or `+1`.
    pub fn validate(&self, spec: &LorenzMapSpec) -> Result<()> {
        let tol = self.delta * (1.0 + STEP_SLACK) + 1e-15;
        for (n, &x) in self.points.iter().enumerate() {
            if !(x.abs() <= 1.0) {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("point {x} outside [-1, 1]"),
                });
            }
        }
        for (n, w) in self.points.windows(2).enumerate() {
            let (x, next) = (w[0], w[1]);
            let gap = if x == 0.0 {
                (next - 1.0).abs().min((next + 1.0).abs())
            } else {
                (spec.alpha_mu(self.mu, x) - next).abs()
            };
            if gap > tol {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("step gap {gap:e} exceeds delta {:e}", self.delta),
                });
            }
        }
        if self.terminal_gamma && self.points.last() != Some(&0.0) {
            return Err(Error::Accuracy {
                index: self.points.len().saturating_sub(1),
                detail: "terminal orbit does not end on the singular point".into(),
            });
        }
        Ok(())
    }
}

/// Finds a true `alpha_mu`-orbit segment `p_0, …, p_k = target` with `p_0` in
/// `start` and `min_depth <= k <= max_depth`.
///
/// The forward images of `start` are tracked as intervals; whenever an image
/// straddles `0` before the target is reached, the longer half is kept. The
/// points are then recovered by inverting along the recorded branches, so the
/// returned segment is exact up to rounding.
pub fn steer_to_target(
    spec: &LorenzMapSpec,
    mu: f64,
    start: Interval,
    target: f64,
    min_depth: usize,
    max_depth: usize,
) -> Option<Vec<f64>> {
    let mut current = start;
    let mut branches: Vec<Branch> = Vec::with_capacity(max_depth);
    let mut depth = 0;
    loop {
        let hit = if current.len() > 0.0 {
            current.interior_contains(target)
        } else {
            current.lo == target
        };
        if depth >= min_depth && hit {
            break;
        }
        if depth == max_depth {
            return None;
        }
        let (domain, branch) = if current.lo < 0.0 && current.hi > 0.0 {
            if -current.lo >= current.hi {
                (Interval::new(current.lo, 0.0), Branch::Negative)
            } else {
                (Interval::new(0.0, current.hi), Branch::Positive)
            }
        } else if current.lo >= 0.0 {
            (current, Branch::Positive)
        } else {
            (current, Branch::Negative)
        };
        if domain.len() == 0.0 && domain.lo == 0.0 {
            return None;
        }
        branches.push(branch);
        current = Interval::new(
            spec.alpha_mu_on(mu, branch, domain.lo),
            spec.alpha_mu_on(mu, branch, domain.hi),
        );
        depth += 1;
    }
    let mut points = vec![target];
    let mut p = target;
    for &b in branches.iter().rev() {
        p = spec.invert_alpha_mu(mu, p, b).ok()?;
        points.push(p);
    }
    points.reverse();
    let slack = 1e-12 * (1.0 + start.len());
    (points[0] >= start.lo - slack && points[0] <= start.hi + slack).then_some(points)
}

fn noisy_image<R: Rng>(spec: &LorenzMapSpec, mu: f64, delta: f64, x: f64, rng: &mut R) -> f64 {
    if x == 0.0 {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let off = if delta > 0.0 { rng.gen_range(0.0..=delta) } else { 0.0 };
        return side * (1.0 - off);
    }
    let noise = if delta > 0.0 {
        rng.gen_range(-delta..=delta)
    } else {
        0.0
    };
    (spec.alpha_mu(mu, x) + noise).clamp(-1.0, 1.0)
}

fn random_start<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        if x != 0.0 {
            return x;
        }
    }
}

/// Generates a pseudo-orbit of `alpha_mu` with step bound `delta` and
/// `n_steps + 1` points.
pub fn generate_with(
    spec: &LorenzMapSpec,
    mu: f64,
    delta: f64,
    straddle_radius: f64,
    n_steps: usize,
    seed: u64,
    mode: OrbitMode,
) -> Result<PseudoOrbit1D> {
    if n_steps == 0 {
        return Err(Error::Parameter("n_steps must be at least 1".into()));
    }
    spec.check_mu(mu)?;
    let mut rng = seeds::rng(seed);
    let points = match mode {
        OrbitMode::Noise => {
            let mut pts = Vec::with_capacity(n_steps + 1);
            pts.push(random_start(&mut rng));
            for n in 0..n_steps {
                let next = noisy_image(spec, mu, delta, pts[n], &mut rng);
                pts.push(next);
            }
            pts
        }
        OrbitMode::GammaCrossing => {
            gamma_crossing(spec, mu, delta, straddle_radius, n_steps, &mut rng)
        }
        OrbitMode::GammaTerminal => gamma_terminal(spec, mu, delta, n_steps, &mut rng)?,
    };
    Ok(PseudoOrbit1D {
        points,
        delta,
        mu,
        terminal_gamma: mode == OrbitMode::GammaTerminal,
    })
}

/// Pseudo-orbit of `alpha_hat = alpha_{mu_hat}` with `delta = epsilon1 / 100`.
pub fn generate_pseudo_orbit_1d(
    spec: &LorenzMapSpec,
    constants: &MapConstants,
    n_steps: usize,
    seed: u64,
    mode: OrbitMode,
) -> Result<PseudoOrbit1D> {
    generate_with(
        spec,
        constants.mu_hat,
        constants.delta,
        constants.epsilon1,
        n_steps,
        seed,
        mode,
    )
}

fn gamma_crossing<R: Rng>(
    spec: &LorenzMapSpec,
    mu: f64,
    delta: f64,
    straddle_radius: f64,
    n_steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n_steps + 1);
    pts.push(random_start(rng));
    let mut next_event = rng.gen_range(0..=n_steps.min(100) / 2);
    while pts.len() <= n_steps {
        let n = pts.len() - 1;
        let x = pts[n];
        if n >= next_event && x != 0.0 && delta > 0.0 {
            let centre = spec.alpha_mu(mu, x);
            let start = Interval::new((centre - delta).max(-1.0), (centre + delta).min(1.0));
            let target = if rng.gen_bool(0.5) {
                0.0
            } else {
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                side * rng.gen_range(0.05..0.5) * straddle_radius
            };
            let remaining = n_steps - n - 1;
            if let Some(seg) = steer_to_target(spec, mu, start, target, 0, remaining.min(80)) {
                pts.extend_from_slice(&seg);
                next_event = pts.len() + rng.gen_range(50..400);
                continue;
            }
            next_event = n + 10;
        }
        let next = noisy_image(spec, mu, delta, x, rng);
        pts.push(next);
    }
    pts.truncate(n_steps + 1);
    pts
}

/// Builds the orbit backwards from `x_m = 0`: each predecessor is a preimage
/// of the successor minus a noise term, so every step gap is that noise.
fn gamma_terminal<R: Rng>(
    spec: &LorenzMapSpec,
    mu: f64,
    delta: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let top = spec.branch_top(mu);
    let mut pts = vec![0.0; n_steps + 1];
    for k in (0..n_steps).rev() {
        let succ = pts[k + 1];
        let mut found = None;
        for _ in 0..64 {
            let noise = if delta > 0.0 && k + 1 != n_steps {
                rng.gen_range(-delta..=delta)
            } else {
                0.0
            };
            let t = succ - noise;
            if !(t.abs() < 1.0) {
                continue;
            }
            let branch = if t > top {
                Branch::Negative
            } else if t < -top || rng.gen_bool(0.5) {
                Branch::Positive
            } else {
                Branch::Negative
            };
            if let Ok(x) = spec.invert_alpha_mu(mu, t, branch) {
                if x != 0.0 && x.abs() <= 1.0 {
                    found = Some(x);
                    break;
                }
            }
        }
        pts[k] = found.ok_or_else(|| {
            Error::Generation(format!("no admissible preimage at step {k}"))
        })?;
    }
    Ok(pts)
}
