//! Interpolated chains, crossing sequences and their projection onto
//! pseudo-orbits of the return map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowSpec, FlowState, Point3};
use crate::map::{LorenzMapSpec, PlanarPoint};
use crate::shadow2d::PseudoOrbit2D;

use super::chain::FlowPseudoOrbit;
use super::constants::FlowConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// The segment lands on Σ.
    Sigma,
    /// The segment leaves the box through a side face into a tube.
    SideExit,
    BoxEnter,
    BoxLeave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainEvent {
    /// Time after the segment's start.
    pub t: f64,
    pub kind: EventKind,
}

/// `Phi_n = phi_mu(x_n, [0, tau_n])`, sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSegment {
    pub index: usize,
    pub start_time: f64,
    pub duration: f64,
    pub state: FlowState,
    /// Local times and points, including every event.
    pub samples: Vec<(f64, Point3)>,
    /// First meeting with Σ, as local time and section point.
    pub sigma: Option<(f64, PlanarPoint)>,
    pub events: Vec<ChainEvent>,
    /// Length of the sampled polyline (a lower bound for the arclength).
    pub arclength: f64,
}

/// `sigma_n`: the straight jump from `phi_mu(x_n, tau_n)` to `x_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub from: Point3,
    pub to: Point3,
}

impl Connector {
    pub fn len(&self) -> f64 {
        self.from.dist(&self.to)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0.0
    }

    /// Transversal crossing of Σ; a connector touching the plane `z = 1`
    /// only at an endpoint (or lying in it) does not count.
    pub fn sigma_crossing(&self) -> Option<PlanarPoint> {
        let (a, b) = (self.from, self.to);
        if (a.z - 1.0) * (b.z - 1.0) >= 0.0 {
            return None;
        }
        let f = (1.0 - a.z) / (b.z - a.z);
        let p = PlanarPoint::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
        p.in_section().then_some(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedChain {
    pub mu: f64,
    pub delta: f64,
    /// Radius of the box whose boundary events are recorded.
    pub eta: f64,
    pub segments: Vec<ChainSegment>,
    /// `connectors[n]` joins segment `n` to segment `n + 1`.
    pub connectors: Vec<Connector>,
    /// The chain ends on the stable manifold.
    pub terminal: bool,
    pub end_time: f64,
}

impl InterpolatedChain {
    /// Whether `Phi~_n = Phi_n ∪ sigma_n` meets Σ.
    pub fn meets_sigma(&self, n: usize) -> bool {
        self.segments[n].sigma.is_some()
            || self.connectors.get(n).is_some_and(|c| c.sigma_crossing().is_some())
    }
}

/// Local event times of a single segment.
pub fn segment_events(fs: &FlowSpec, state: &FlowState, duration: f64, eta: f64) -> Vec<ChainEvent> {
    let mut ev = Vec::new();
    let mut push = |t: f64, kind| {
        if t > 0.0 && t <= duration {
            ev.push(ChainEvent { t, kind });
        }
    };
    match *state {
        FlowState::Linear { x, y, z } => {
            let exit = fs.exit_time(x);
            push(exit, EventKind::SideExit);
            let rest = exit + fs.tube_time;
            push(rest, EventKind::Sigma);
            box_events(fs, x.abs(), y.abs(), z, eta, &mut push);
        }
        FlowState::StableManifold { y, z } => box_events(fs, 0.0, y.abs(), z, eta, &mut push),
        FlowState::Tube { s, .. } => {
            let rest = (1.0 - s) * fs.tube_time;
            push(rest, EventKind::Sigma);
        }
    }
    ev.sort_by(|a, b| a.t.total_cmp(&b.t));
    ev
}

fn box_events(fs: &FlowSpec, ax: f64, ay: f64, z: f64, eta: f64, push: &mut impl FnMut(f64, EventKind)) {
    let enter = (z / eta).ln().max(0.0) / fs.lambda3;
    let enter = enter.max((ay / eta).ln().max(0.0) / fs.lambda2);
    let leave = if ax == 0.0 { f64::INFINITY } else { (eta / ax).ln() / fs.lambda1 };
    if leave >= enter {
        push(enter, EventKind::BoxEnter);
        push(leave, EventKind::BoxLeave);
    }
}

/// Samples every step with `samples_per_step` uniform points plus the exact
/// events, and joins steps by connectors.
pub fn interpolate_chain(
    fs: &FlowSpec,
    orbit: &FlowPseudoOrbit,
    eta: f64,
    samples_per_step: usize,
) -> InterpolatedChain {
    let mu = orbit.mu;
    let starts = orbit.start_times();
    let n_seg = orbit.durations.len();
    let mut segments = Vec::with_capacity(n_seg);
    let mut connectors = Vec::with_capacity(n_seg);
    for n in 0..n_seg {
        let state = orbit.states[n];
        let d = orbit.durations[n];
        let events = segment_events(fs, &state, d, eta);
        let mut times: Vec<f64> = (0..=samples_per_step.max(1))
            .map(|k| d * k as f64 / samples_per_step.max(1) as f64)
            .collect();
        times.extend(events.iter().map(|e| e.t));
        times.sort_by(f64::total_cmp);
        times.dedup();
        let samples: Vec<(f64, Point3)> = times
            .iter()
            .map(|&t| (t, fs.project(mu, &fs.advance(mu, state, t))))
            .collect();
        let arclength = samples.windows(2).map(|w| w[0].1.dist(&w[1].1)).sum();
        let sigma = if let Some(p) = state.sigma_point() {
            Some((0.0, p))
        } else if let FlowState::Tube { side, y_e, z_e, s } = state {
            let rest = (1.0 - s) * fs.tube_time;
            (rest <= d).then(|| (rest, fs.tube_target(mu, side, y_e, z_e)))
        } else {
            None
        };
        let end = fs.project(mu, &orbit.end_state(fs, n));
        connectors.push(Connector {
            from: end,
            to: fs.project(mu, &orbit.states[n + 1]),
        });
        segments.push(ChainSegment {
            index: n,
            start_time: starts[n],
            duration: d,
            state,
            samples,
            sigma,
            events,
            arclength,
        });
    }
    InterpolatedChain {
        mu,
        delta: orbit.delta,
        eta,
        segments,
        connectors,
        terminal: orbit.terminal(),
        end_time: *starts.last().unwrap(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    Initial,
    Segment,
    Connector,
}

impl CrossingKind {
    pub fn name(self) -> &'static str {
        match self {
            CrossingKind::Initial => "initial",
            CrossingKind::Segment => "segment",
            CrossingKind::Connector => "connector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Chain index `n_i`.
    pub n: usize,
    pub point: PlanarPoint,
    /// Chain time of the crossing.
    pub time: f64,
    pub kind: CrossingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSequence {
    pub crossings: Vec<Crossing>,
    /// The chain ends on the stable manifold, so the last crossing starts a
    /// terminal ray.
    pub terminal: bool,
    /// Steps meeting Σ right after another such step.
    pub skipped: usize,
    pub end_time: f64,
}

impl CrossingSequence {
    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = PlanarPoint> + '_ {
        self.crossings.iter().map(|c| c.point)
    }
}

/// Selects `n_0 = 0` and every `n` with `Phi~_n ∩ Σ ≠ ∅` and
/// `Phi~_{n-1} ∩ Σ = ∅`.
pub fn extract_crossing_sequence(chain: &InterpolatedChain) -> Result<CrossingSequence> {
    let first = chain
        .segments
        .first()
        .and_then(|s| s.state.sigma_point())
        .ok_or_else(|| Error::Parameter("chain must start on the section".into()))?;
    let mut crossings = vec![Crossing {
        n: 0,
        point: first,
        time: 0.0,
        kind: CrossingKind::Initial,
    }];
    let mut skipped = 0;
    for n in 1..chain.segments.len() {
        if !chain.meets_sigma(n) {
            continue;
        }
        if chain.meets_sigma(n - 1) {
            skipped += 1;
            continue;
        }
        let seg = &chain.segments[n];
        let c = match seg.sigma {
            Some((t, p)) => Crossing {
                n,
                point: p,
                time: seg.start_time + t,
                kind: CrossingKind::Segment,
            },
            None => Crossing {
                n,
                point: chain.connectors[n].sigma_crossing().unwrap(),
                time: seg.start_time + seg.duration,
                kind: CrossingKind::Connector,
            },
        };
        crossings.push(c);
    }
    if crossings.len() == 1 && !chain.terminal {
        return Err(Error::NoCrossing);
    }
    Ok(CrossingSequence {
        crossings,
        terminal: chain.terminal,
        skipped,
        end_time: chain.end_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionCase {
    /// `|[y_i]_x| >= xi1` and `|[y_{i+1}]_x| >= xi1`.
    One,
    /// `|[y_i]_x| < xi1`: the point is moved off the singular line towards
    /// the side the chain actually took.
    Two,
    /// `|[y_i]_x| >= xi1` and `|[y_{i+1}]_x| < xi1`.
    Three,
}

impl ProjectionCase {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionCase::One => "case 1",
            ProjectionCase::Two => "case 2",
            ProjectionCase::Three => "case 3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub w: PseudoOrbit2D,
    /// Case of each step `w_i -> w_{i+1}`.
    pub cases: Vec<ProjectionCase>,
    pub max_gap: f64,
    pub max_offset: f64,
    /// Case-2 points whose side differs from the crossing's own side.
    pub side_switches: usize,
}

impl Projection {
    pub fn count(&self, case: ProjectionCase) -> usize {
        self.cases.iter().filter(|&&c| c == case).count()
    }
}

/// Builds `w_i` from the crossings: `w_i = y_i` off the `xi1`-strip, and
/// `(±xi1/2, [y_i]_y)` inside it with the sign opposite to
/// `[y_{i+1}]_x`. A terminal last crossing is moved onto the singular line.
pub fn project_crossing_to_map_orbit(
    cs: &CrossingSequence,
    k: &FlowConstants,
    spec: &LorenzMapSpec,
) -> Result<Projection> {
    let ys: Vec<PlanarPoint> = cs.points().collect();
    let m = ys.len() - 1;
    let xi1 = k.xi1;
    let mut w = Vec::with_capacity(ys.len());
    let mut side_switches = 0;
    for (i, y) in ys.iter().enumerate() {
        let p = if cs.terminal && i == m {
            if y.x.abs() >= xi1 {
                return Err(Error::Projection {
                    index: i,
                    case: "terminal",
                    detail: format!("last crossing has |x| = {:e} >= xi1", y.x.abs()),
                });
            }
            PlanarPoint::new(0.0, y.y)
        } else if y.x.abs() < xi1 {
            let sign = match ys.get(i + 1) {
                Some(next) if next.x != 0.0 => -next.x.signum(),
                _ if y.x != 0.0 => y.x.signum(),
                _ => 1.0,
            };
            if y.x != 0.0 && sign != y.x.signum() {
                side_switches += 1;
            }
            PlanarPoint::new(sign * 0.5 * xi1, y.y)
        } else {
            *y
        };
        w.push(p);
    }

    let mut cases = Vec::with_capacity(m);
    let (mut max_gap, mut max_offset) = (0.0f64, 0.0f64);
    for i in 0..=m {
        let case = if ys[i].x.abs() < xi1 {
            ProjectionCase::Two
        } else if i < m && ys[i + 1].x.abs() < xi1 {
            ProjectionCase::Three
        } else {
            ProjectionCase::One
        };
        let off = ys[i].dist(&w[i]);
        max_offset = max_offset.max(off);
        if off >= 0.5 * k.epsilon1 {
            return Err(Error::Projection {
                index: i,
                case: case.name(),
                detail: format!("|y_i - w_i| = {off:e} is not below epsilon1/2"),
            });
        }
        if i == m {
            break;
        }
        let gap = spec.map_mu(k.mu_hat, w[i]).dist(&w[i + 1]);
        max_gap = max_gap.max(gap);
        if gap >= k.xi0 {
            return Err(Error::Projection {
                index: i,
                case: case.name(),
                detail: format!("|L(w_i) - w_(i+1)| = {gap:e} is not below xi0 = {:e}", k.xi0),
            });
        }
        cases.push(case);
    }
    Ok(Projection {
        w: PseudoOrbit2D {
            points: w,
            delta: k.xi0,
            mu: k.mu_hat,
            terminal_gamma: cs.terminal,
        },
        cases,
        max_gap,
        max_offset,
        side_switches,
    })
}
