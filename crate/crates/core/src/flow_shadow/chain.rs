//! `(delta, tau)`-pseudo-orbits of the flow and their generators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowSpec, FlowState};
use crate::interval::Interval;
use crate::map::PlanarPoint;
use crate::seeds;
use crate::shadow1d::steer_to_target;

/// Fraction of `delta` used by the generator's kicks, leaving room for
/// rounding in the validator.
const NOISE_FRACTION: f64 = 0.9;
/// Relative slack on `delta` and on the duration bounds when validating.
const VALIDATE_SLACK: f64 = 1e-6;
/// Crossings between two steering events in the gamma and stall modes.
const EVENT_SPACING: (usize, usize) = (100, 300);
/// Magnitude of the first coordinate the gamma mode steers onto.
const GAMMA_TARGET: f64 = 1e-30;
/// Nodes kept on the stable manifold after a finite chain reaches it.
pub const TERMINAL_TAIL: usize = 60;
/// Nodes during which the stall mode holds the first coordinate.
const STALL_NODES: usize = 40;
/// Deepest steering segment attempted.
const STEER_DEPTH: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowOrbitMode {
    /// Every flowed endpoint is kicked by at most `delta`.
    Noise,
    /// Noise, plus occasional noiseless excursions onto the stable manifold's
    /// neighbourhood, sometimes switching side next to the saddle.
    Gamma,
    /// Noise, then a noiseless approach that ends on the stable manifold.
    Finite,
    /// Noise, plus stretches held next to the saddle.
    Stall,
}

impl std::str::FromStr for FlowOrbitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(FlowOrbitMode::Noise),
            "gamma" | "gamma-crossing" => Ok(FlowOrbitMode::Gamma),
            "finite" | "gamma-terminal" => Ok(FlowOrbitMode::Finite),
            "stall" => Ok(FlowOrbitMode::Stall),
            other => Err(Error::Parameter(format!("unknown flow orbit mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for FlowOrbitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowOrbitMode::Noise => "noise",
            FlowOrbitMode::Gamma => "gamma",
            FlowOrbitMode::Finite => "finite",
            FlowOrbitMode::Stall => "stall",
        })
    }
}

/// Nodes `x_n` with durations `tau_n`; `durations.len() == states.len() - 1`
/// and the last node ends the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPseudoOrbit {
    pub states: Vec<FlowState>,
    pub durations: Vec<f64>,
    pub delta: f64,
    pub tau: f64,
    pub mu: f64,
}

impl FlowPseudoOrbit {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `T_n = tau_0 + … + tau_{n-1}` for every node.
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.states.len());
        let mut acc = 0.0;
        t.push(0.0);
        for d in &self.durations {
            acc += d;
            t.push(acc);
        }
        t
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn end_state(&self, fs: &FlowSpec, n: usize) -> FlowState {
        fs.advance(self.mu, self.states[n], self.durations[n])
    }

    /// `|phi_mu(x_n, tau_n) - x_{n+1}|` in projected coordinates.
    pub fn jump(&self, fs: &FlowSpec, n: usize) -> f64 {
        let a = fs.project(self.mu, &self.end_state(fs, n));
        a.dist(&fs.project(self.mu, &self.states[n + 1]))
    }

    /// Whether the chain ends on the stable manifold.
    pub fn terminal(&self) -> bool {
        matches!(self.states.last(), Some(FlowState::StableManifold { .. }))
    }

    pub fn validate(&self, fs: &FlowSpec) -> Result<()> {
        if self.states.is_empty() || self.durations.len() + 1 != self.states.len() {
            return Err(Error::Parameter(format!(
                "{} states need {} durations, got {}",
                self.states.len(),
                self.states.len().saturating_sub(1),
                self.durations.len()
            )));
        }
        if !self.states[0].on_sigma() {
            return Err(Error::Accuracy {
                index: 0,
                detail: "chain does not start on the section".into(),
            });
        }
        let (lo, hi) = (self.tau * (1.0 - VALIDATE_SLACK), 2.0 * self.tau * (1.0 + VALIDATE_SLACK));
        for (n, &d) in self.durations.iter().enumerate() {
            if !(lo..=hi).contains(&d) {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("duration {d} outside [tau, 2 tau] with tau = {}", self.tau),
                });
            }
        }
        for (n, s) in self.states.iter().enumerate() {
            if !fs.in_trapping_region(s) {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("{s:?} leaves the trapping region"),
                });
            }
        }
        // the jump of an exact step is itself a rounding-level difference
        let tol = self.delta * (1.0 + VALIDATE_SLACK) + 2.0 * f64::EPSILON;
        for n in 0..self.durations.len() {
            let j = self.jump(fs, n);
            if j > tol {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("jump {j:e} exceeds delta {:e}", self.delta),
                });
            }
        }
        Ok(())
    }
}

/// What the generators need besides the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub delta: f64,
    pub tau: f64,
    pub mu: f64,
    /// Radius of the box in which gamma excursions may switch side.
    pub eta2: f64,
}

fn ball<R: Rng>(rng: &mut R, r: f64) -> [f64; 3] {
    if r <= 0.0 {
        return [0.0; 3];
    }
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 <= 1.0 {
            return [v[0] * r, v[1] * r, v[2] * r];
        }
    }
}

/// Kicks a state by at most `r` in projected distance. Tube states are moved
/// in their own chart `(y_e, z_e, s)`, with the kick halved until the
/// projected displacement fits.
pub fn perturb_state<R: Rng>(
    fs: &FlowSpec,
    mu: f64,
    s: FlowState,
    r: f64,
    rng: &mut R,
) -> FlowState {
    let v = ball(rng, r);
    match s {
        FlowState::Linear { x, y, z } => {
            let nx = (x + v[0]).clamp(-1.0, 1.0);
            FlowState::linear(nx, (y + v[1]).clamp(-1.0, 1.0), (z + v[2]).clamp(0.0, 1.0))
        }
        FlowState::StableManifold { y, z } => FlowState::StableManifold {
            y: (y + v[1]).clamp(-1.0, 1.0),
            z: (z + v[2]).clamp(0.0, 1.0),
        },
        FlowState::Tube { side, y_e, z_e, s: p } => {
            let from = fs.project(mu, &s);
            let mut f = 1.0;
            for _ in 0..80 {
                let cand = FlowState::Tube {
                    side,
                    y_e: (y_e + f * v[0]).clamp(-1.0, 1.0),
                    z_e: (z_e + f * v[1]).clamp(0.0, 1.0),
                    s: (p + f * v[2]).clamp(0.0, 1.0),
                };
                if fs.project(mu, &cand).dist(&from) <= r {
                    return cand;
                }
                f *= 0.5;
            }
            s
        }
    }
}

fn random_section_point<R: Rng>(rng: &mut R) -> PlanarPoint {
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        if x != 0.0 {
            return PlanarPoint::new(x, rng.gen_range(-1.0..=1.0));
        }
    }
}

/// Landing inside a step: time offset after the landing and the Σ point.
fn landing(fs: &FlowSpec, mu: f64, s: &FlowState, tau_n: f64) -> Option<(f64, PlanarPoint)> {
    if let FlowState::Tube { side, y_e, z_e, s } = *s {
        let rest = (1.0 - s) * fs.tube_time;
        if rest <= tau_n {
            return Some((tau_n - rest, fs.tube_target(mu, side, y_e, z_e)));
        }
    }
    None
}

#[derive(Debug, Clone)]
enum Phase {
    Free,
    /// Following a steered map orbit; `points[j]` is the next landing.
    Steering { points: Vec<f64>, j: usize },
    /// Noiseless descent after landing next to the singular line.
    Descending { flip: bool },
    Holding { left: usize },
    Tail { left: usize },
}

/// Generates a pseudo-orbit with `n_steps` steps (the finite mode appends
/// the approach and the stable-manifold tail).
pub fn generate_with(
    fs: &FlowSpec,
    p: &GeneratorParams,
    n_steps: usize,
    seed: u64,
    mode: FlowOrbitMode,
) -> Result<FlowPseudoOrbit> {
    fs.validate()?;
    fs.map.check_mu(p.mu)?;
    if n_steps == 0 || !(p.tau > 0.0) || !(p.delta >= 0.0) {
        return Err(Error::Parameter("need n_steps >= 1, tau > 0 and delta >= 0".into()));
    }
    let mut rng = seeds::rng(seed);
    let kick = NOISE_FRACTION * p.delta;
    let steer_radius = 0.4 * p.delta * (-fs.lambda1 * 2.0 * p.tau).exp();
    let mut states = vec![FlowState::on_section(random_section_point(&mut rng))];
    let mut durations = Vec::with_capacity(n_steps);
    let mut phase = Phase::Free;
    let mut next_event = rng.gen_range(EVENT_SPACING.0..=EVENT_SPACING.1);
    let mut crossings = 0usize;
    let max_nodes = 4 * n_steps + 20 * STEER_DEPTH + TERMINAL_TAIL + 1000;

    loop {
        let done = match (&phase, mode) {
            (Phase::Tail { left: 0 }, _) => true,
            (Phase::Tail { .. }, _) => false,
            (_, FlowOrbitMode::Finite) => false,
            _ => durations.len() >= n_steps,
        };
        if done {
            break;
        }
        if durations.len() >= max_nodes {
            return Err(Error::Parameter(format!(
                "{mode} generator did not finish within {max_nodes} steps"
            )));
        }
        let cur = *states.last().unwrap();
        let tau_n = rng.gen_range(p.tau..=2.0 * p.tau);
        let mut end = fs.advance(p.mu, cur, tau_n);
        let landed = landing(fs, p.mu, &cur, tau_n);
        if landed.is_some() {
            crossings += 1;
        }

        // steering events start at a landing
        if let (Phase::Free, Some((u, q))) = (&phase, landed) {
            let due = match mode {
                FlowOrbitMode::Noise => false,
                FlowOrbitMode::Finite => durations.len() >= n_steps,
                _ => crossings >= next_event,
            };
            if due && matches!(end, FlowState::Linear { .. }) {
                let target = match mode {
                    FlowOrbitMode::Finite => 0.0,
                    FlowOrbitMode::Stall => {
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        sign * 0.1 * p.delta * (-2.0 * fs.lambda1 * p.tau).exp()
                    }
                    _ => {
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        sign * GAMMA_TARGET * rng.gen_range(0.5..=1.0)
                    }
                };
                let start = Interval::centered(q.x, steer_radius);
                if let Some(points) = steer_to_target(&fs.map, p.mu, start, target, 1, STEER_DEPTH) {
                    end = nudge(fs, end, points[0], u);
                    phase = Phase::Steering { points, j: 1 };
                    states.push(end);
                    durations.push(tau_n);
                    continue;
                }
                next_event = crossings + 1;
            }
        }

        phase = match phase {
            Phase::Free => {
                end = perturb_state(fs, p.mu, end, kick, &mut rng);
                Phase::Free
            }
            Phase::Steering { points, j } => match landed {
                Some((u, _)) => {
                    end = nudge(fs, end, points[j], u);
                    if j + 1 < points.len() {
                        Phase::Steering { points, j: j + 1 }
                    } else {
                        match mode {
                            FlowOrbitMode::Finite => Phase::Tail { left: TERMINAL_TAIL },
                            FlowOrbitMode::Stall => Phase::Holding { left: STALL_NODES },
                            _ => Phase::Descending { flip: rng.gen_bool(0.5) },
                        }
                    }
                }
                None => Phase::Steering { points, j },
            },
            Phase::Descending { flip } => {
                if landed.is_some() {
                    next_event = crossings + rng.gen_range(EVENT_SPACING.0..=EVENT_SPACING.1);
                    end = perturb_state(fs, p.mu, end, kick, &mut rng);
                    Phase::Free
                } else if let (true, FlowState::Linear { x, y, z }) = (flip, end) {
                    if fs.project(p.mu, &end).in_box(p.eta2) {
                        end = FlowState::Linear { x: -x, y, z };
                        Phase::Descending { flip: false }
                    } else {
                        Phase::Descending { flip }
                    }
                } else {
                    Phase::Descending { flip }
                }
            }
            Phase::Holding { left } => {
                if let (FlowState::Linear { x: prev_x, .. }, FlowState::Linear { y, z, .. }) = (cur, end) {
                    if left > 0 {
                        end = FlowState::Linear { x: prev_x, y, z };
                    }
                }
                if left > 0 {
                    Phase::Holding { left: left - 1 }
                } else if landed.is_some() {
                    next_event = crossings + rng.gen_range(EVENT_SPACING.0..=EVENT_SPACING.1);
                    Phase::Free
                } else {
                    Phase::Holding { left: 0 }
                }
            }
            Phase::Tail { left } => {
                if let FlowState::StableManifold { y, z } = end {
                    let v = ball(&mut rng, kick);
                    end = FlowState::StableManifold {
                        y: (y + v[1]).clamp(-1.0, 1.0),
                        z: (z + v[2]).clamp(0.0, 1.0),
                    };
                }
                Phase::Tail { left: left.saturating_sub(1) }
            }
        };
        states.push(end);
        durations.push(tau_n);
    }
    Ok(FlowPseudoOrbit {
        states,
        durations,
        delta: p.delta,
        tau: p.tau,
        mu: p.mu,
    })
}

/// Replaces the first coordinate of a state `u` after its landing so that
/// the landing point becomes `target_x`.
fn nudge(fs: &FlowSpec, end: FlowState, target_x: f64, u: f64) -> FlowState {
    match end {
        FlowState::Linear { y, z, .. } | FlowState::StableManifold { y, z } => {
            FlowState::linear((target_x * (fs.lambda1 * u).exp()).clamp(-1.0, 1.0), y, z)
        }
        t => t,
    }
}

/// Cuts every step longer than `2 tau` into sub-steps of duration in
/// `[tau, 2 tau]` at points of the step's own trajectory.
pub fn split_long_steps(fs: &FlowSpec, orbit: &FlowPseudoOrbit) -> Result<FlowPseudoOrbit> {
    let tau = orbit.tau;
    let tol = tau * 1e-12;
    let mut states = Vec::with_capacity(orbit.states.len());
    let mut durations = Vec::with_capacity(orbit.durations.len());
    for (n, &d) in orbit.durations.iter().enumerate() {
        if d < tau - tol {
            return Err(Error::ImpossibleSplit { index: n, duration: d, tau });
        }
        let mut pieces = Vec::new();
        let mut rest = d;
        while rest > 2.0 * tau + tol {
            pieces.push(2.0 * tau);
            rest -= 2.0 * tau;
        }
        if rest < tau - tol {
            let merged = pieces.pop().unwrap_or(0.0) + rest;
            pieces.push(0.5 * merged);
            pieces.push(0.5 * merged);
        } else {
            pieces.push(rest);
        }
        let mut s = orbit.states[n];
        for (k, &piece) in pieces.iter().enumerate() {
            states.push(s);
            durations.push(piece);
            if k + 1 < pieces.len() {
                s = fs.advance(orbit.mu, s, piece);
            }
        }
    }
    states.push(*orbit.states.last().unwrap());
    Ok(FlowPseudoOrbit {
        states,
        durations,
        ..orbit.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta: f64) -> GeneratorParams {
        GeneratorParams {
            delta,
            tau: 1.0 / 6.0,
            mu: 1e-4,
            eta2: 0.01,
        }
    }

    #[test]
    fn zero_noise_is_the_true_trajectory() {
        let fs = FlowSpec::reference();
        let o = generate_with(&fs, &params(0.0), 300, 5, FlowOrbitMode::Noise).unwrap();
        o.validate(&fs).unwrap();
        for n in 0..o.durations.len() {
            assert!(o.jump(&fs, n) < 1e-12);
        }
        let t = o.start_times();
        let direct = fs.advance(o.mu, o.states[0], t[12]);
        assert!(fs.project(o.mu, &direct).dist(&fs.project(o.mu, &o.states[12])) < 1e-9);
    }

    #[test]
    fn every_mode_validates() {
        let fs = FlowSpec::reference();
        for mode in [
            FlowOrbitMode::Noise,
            FlowOrbitMode::Gamma,
            FlowOrbitMode::Finite,
            FlowOrbitMode::Stall,
        ] {
            let o = generate_with(&fs, &params(1e-9), 3000, 9, mode).unwrap();
            o.validate(&fs).unwrap();
            assert_eq!(o.terminal(), mode == FlowOrbitMode::Finite, "{mode}");
        }
    }

    #[test]
    fn split_partitions_long_steps() {
        let fs = FlowSpec::reference();
        let tau = 0.1;
        let s0 = FlowState::on_section(PlanarPoint::new(0.3, 0.2));
        let long = FlowPseudoOrbit {
            states: vec![s0, fs.advance(0.0, s0, 5.0 * tau)],
            durations: vec![5.0 * tau],
            delta: 0.0,
            tau,
            mu: 0.0,
        };
        let s = split_long_steps(&fs, &long).unwrap();
        assert_eq!(s.durations.len(), 3);
        assert!((s.durations[0] - 2.0 * tau).abs() < 1e-15);
        assert!((s.durations[2] - tau).abs() < 1e-12);
        s.validate(&fs).unwrap();
        for n in 0..2 {
            assert!(s.jump(&fs, n) < 1e-12);
        }
        let ok = generate_with(&fs, &params(1e-9), 50, 1, FlowOrbitMode::Noise).unwrap();
        assert_eq!(split_long_steps(&fs, &ok).unwrap(), ok);
        let short = FlowPseudoOrbit {
            durations: vec![0.5 * tau],
            ..long
        };
        assert!(matches!(
            split_long_steps(&fs, &short),
            Err(Error::ImpossibleSplit { index: 0, .. })
        ));
    }
}
