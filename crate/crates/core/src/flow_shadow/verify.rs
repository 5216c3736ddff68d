//! Dense re-check of a flow shadowing claim.

use serde::{Deserialize, Serialize};

use crate::flow::{FlowSpec, FlowState};

use super::chain::FlowPseudoOrbit;
use super::reparam::{Reparametrization, TrueOrbit};

/// Minimum samples per chain step.
pub const MIN_SAMPLES_PER_STEP: usize = 50;
/// Cap on samples per chain step.
const MAX_SAMPLES_PER_STEP: usize = 100_000;
/// Samples on which `h` is checked for strict monotonicity.
const MONOTONE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowShadowReport {
    pub pass: bool,
    pub epsilon: f64,
    /// Largest sampled distance `|phi(z, h(t)) - psi(t)|`.
    pub sup_distance: f64,
    /// Bound on how far the distance can rise between samples.
    pub sampling_gap_bound: f64,
    pub worst_time: f64,
    pub samples: usize,
    pub time_range: f64,
    pub h_strictly_increasing: bool,
    pub min_h_slope: f64,
    pub max_h_slope: f64,
    /// Samples where both points lie in `Π(eta0)`, whose diameter alone
    /// bounds the distance.
    pub bypass_samples: usize,
    pub box_diameter: f64,
    /// Outcome of the terminal-ray check, for chains ending on the stable
    /// manifold.
    pub terminal_ray: Option<bool>,
}

/// Compares the chain `psi` with `phi(z, h(t))` on `[0, t_end]`, where
/// `t_end` is the last crossing for infinite chains and the chain's end for
/// terminal ones (whose remaining ray is checked against `Π(eta0)`).
pub fn verify_flow_shadowing(
    fs: &FlowSpec,
    orbit: &FlowPseudoOrbit,
    true_orbit: &TrueOrbit,
    h: &Reparametrization,
    last_crossing_time: f64,
    epsilon: f64,
    eta0: f64,
) -> FlowShadowReport {
    let terminal = orbit.terminal();
    let starts = orbit.start_times();
    let t_end = if terminal { orbit.total_time() } else { last_crossing_time };
    let speed = fs.speed_bound();
    let gap_target = epsilon / 20.0;

    let mut sup = 0.0f64;
    let mut worst_time = 0.0;
    let mut gap_bound = 0.0f64;
    let mut samples = 0usize;
    let mut bypass = 0usize;
    let mut times: Vec<f64> = Vec::new();
    for n in 0..orbit.durations.len() {
        let t0 = starts[n];
        if t0 > t_end {
            break;
        }
        let t1 = (t0 + orbit.durations[n]).min(t_end);
        let slope = h.max_slope(t0, t1);
        let need = ((t1 - t0) * speed * (1.0 + slope) / (2.0 * gap_target)).ceil() as usize;
        let k = need.clamp(MIN_SAMPLES_PER_STEP, MAX_SAMPLES_PER_STEP);
        times.clear();
        times.extend((0..=k).map(|j| t0 + (t1 - t0) * j as f64 / k as f64));
        let lo = h.knots_t.partition_point(|&x| x < t0);
        let hi = h.knots_t.partition_point(|&x| x <= t1);
        times.extend_from_slice(&h.knots_t[lo..hi]);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let state = orbit.states[n];
        let mut prev_t = None;
        for &t in &times {
            let a = fs.project(orbit.mu, &fs.advance(orbit.mu, state, t - t0));
            let b = fs.project(0.0, &true_orbit.state_at(fs, h.eval(t)));
            let d = a.dist(&b);
            if d > sup {
                sup = d;
                worst_time = t;
            }
            if a.in_box(eta0) && b.in_box(eta0) {
                bypass += 1;
            }
            if let Some(p) = prev_t {
                let dt: f64 = t - p;
                gap_bound = gap_bound.max(0.5 * dt * speed * (1.0 + h.max_slope(p, t)));
            }
            prev_t = Some(t);
            samples += 1;
        }
    }

    let mut monotone = true;
    let (mut min_slope, mut max_slope) = (f64::INFINITY, 0.0f64);
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=MONOTONE_SAMPLES {
        let t = t_end * k as f64 / MONOTONE_SAMPLES as f64;
        let v = h.eval(t);
        if !(v > prev) && k > 0 {
            monotone = false;
        }
        prev = v;
        let s = h.derivative(t);
        min_slope = min_slope.min(s);
        max_slope = max_slope.max(s);
    }
    if h.eval(0.0).abs() > 1e-12 {
        monotone = false;
    }

    let terminal_ray = terminal.then(|| {
        let chain_last = orbit.states.last().unwrap();
        let chain_in = matches!(chain_last, FlowState::StableManifold { .. })
            && fs.project(orbit.mu, chain_last).in_box(eta0);
        let true_last = true_orbit.state_at(fs, h.eval(t_end));
        let true_in = matches!(true_last, FlowState::StableManifold { .. })
            && fs.project(0.0, &true_last).in_box(eta0);
        chain_in && true_in
    });

    let diameter = eta0 * 3.0;
    let pass = sup + gap_bound <= epsilon && monotone && terminal_ray.unwrap_or(true);
    FlowShadowReport {
        pass,
        epsilon,
        sup_distance: sup,
        sampling_gap_bound: gap_bound,
        worst_time,
        samples,
        time_range: t_end,
        h_strictly_increasing: monotone,
        min_h_slope: min_slope,
        max_h_slope: max_slope,
        bypass_samples: bypass,
        box_diameter: diameter,
        terminal_ray,
    }
}
