use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{Branch, LorenzMapSpec, PlanarPoint};
use crate::seeds;

use super::PseudoOrbit2D;

const MAX_PIECES: usize = 64;
const BISECTION_STEPS: usize = 60;

/// Result of the parameter-fixed adversarial search.
///
/// `bound` is an empirical estimate of `min_z sup_n |[L^n(z)]_x - x_n|` for
/// the worst pseudo-orbit found; since the planar distance dominates the
/// horizontal one it also bounds the planar shadow distance from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub bound: f64,
    pub epsilon_star: f64,
    pub delta: f64,
    pub seed: u64,
    pub n_steps: usize,
    pub restarts: usize,
    /// Restart that produced `orbit`.
    pub best_restart: usize,
    pub exceeded: bool,
    pub notice: Option<String>,
    pub orbit: PseudoOrbit2D,
}

fn normalise(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out.truncate(MAX_PIECES);
    out
}

/// Preimage of `target` under `alpha` (both branches).
fn preimage(spec: &LorenzMapSpec, target: &Interval, out: &mut Vec<Interval>) {
    let top = spec.branch_top(0.0);
    for branch in [Branch::Positive, Branch::Negative] {
        let image = match branch {
            Branch::Positive => Interval::new(-1.0, top),
            Branch::Negative => Interval::new(-top, 1.0),
        };
        if let Some(c) = image.intersect(target) {
            let a = spec.invert_alpha_branch(c.lo, branch);
            let b = spec.invert_alpha_branch(c.hi, branch);
            if let (Ok(a), Ok(b)) = (a, b) {
                out.push(Interval::new(a.min(b), a.max(b)));
            }
        }
    }
}

/// Whether some `z` has `|alpha^n(z) - x_n| <= r` for every `n`.
fn feasible(spec: &LorenzMapSpec, xs: &[f64], r: f64) -> bool {
    let window = |x: f64| Interval::new((x - r).max(-1.0), (x + r).min(1.0));
    let mut sets = vec![window(*xs.last().unwrap())];
    for &x in xs.iter().rev().skip(1) {
        let w = window(x);
        let mut pre = Vec::new();
        for s in &sets {
            preimage(spec, s, &mut pre);
        }
        sets = normalise(pre.iter().filter_map(|p| p.intersect(&w)).collect());
        if sets.is_empty() {
            return false;
        }
    }
    true
}

/// `min_z sup_n |alpha^n(z) - x_n|` over true orbits of the unshifted map,
/// by bisection on the radius of backward-propagated window sets.
pub fn shadow_bound_1d(spec: &LorenzMapSpec, xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    // an exact forward orbit is shadowed by its own first point
    let exact = xs.windows(2).all(|w| w[0] != 0.0 && spec.alpha_mu(0.0, w[0]) == w[1]);
    if exact || feasible(spec, xs, 0.0) {
        return 0.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(spec, xs, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn greedy_restart(
    spec: &LorenzMapSpec,
    delta: f64,
    n_steps: usize,
    seed: u64,
) -> (f64, Vec<f64>, f64) {
    let mut rng = seeds::rng(seed);
    let mut x0: f64 = 0.0;
    while x0 == 0.0 {
        x0 = rng.gen_range(-1.0..=1.0);
    }
    let y0 = rng.gen_range(-1.0..=1.0);
    let mut xs = vec![x0];
    let mut bound = 0.0;
    for _ in 0..n_steps {
        let image = spec.alpha_mu(0.0, *xs.last().unwrap());
        let mut best: Option<(f64, f64)> = None;
        // pushing past the top of the image is what true orbits cannot follow
        let mut candidates = vec![image + delta, image - delta, image];
        candidates.push(image + rng.gen_range(-delta..=delta));
        for c in candidates {
            let c = c.clamp(-1.0, 1.0);
            if c == 0.0 {
                continue;
            }
            xs.push(c);
            let b = shadow_bound_1d(spec, &xs);
            xs.pop();
            if best.is_none_or(|(bb, _)| b > bb) {
                best = Some((b, c));
            }
        }
        let (b, c) = best.unwrap_or((bound, image));
        xs.push(c);
        bound = b;
    }
    (bound, xs, y0)
}

/// Searches for a `delta`-pseudo-orbit of `L_0` that true orbits shadow
/// badly.
///
/// Each restart starts from a random point and extends the orbit greedily,
/// choosing among the image shifted by `±delta`, the exact image and a random
/// shift the successor that maximises the current bound. Restarts run in
/// parallel with seeds derived from `seed`; the report is independent of the
/// thread count.
pub fn komuro_probe(
    spec: &LorenzMapSpec,
    epsilon_star: f64,
    delta: f64,
    n_steps: usize,
    seed: u64,
    search_budget: usize,
) -> Result<ProbeReport> {
    spec.validate()?;
    if spec.branch_top(0.0) >= 1.0 {
        return Err(Error::Parameter("the probe needs alpha(1) < 1".into()));
    }
    if !(delta >= 0.0) || search_budget == 0 || n_steps == 0 {
        return Err(Error::Parameter(
            "probe needs delta >= 0, n_steps >= 1 and a positive budget".into(),
        ));
    }
    let runs: Vec<(f64, Vec<f64>, f64)> = (0..search_budget)
        .into_par_iter()
        .map(|k| greedy_restart(spec, delta, n_steps, seeds::derive_seed(seed, k as u64)))
        .collect();
    let (best_restart, (bound, xs, y0)) = runs
        .into_iter()
        .enumerate()
        .fold(None::<(usize, (f64, Vec<f64>, f64))>, |acc, (k, run)| match acc {
            Some((_, ref best)) if best.0 >= run.0 => acc,
            _ => Some((k, run)),
        })
        .unwrap();

    let mut points = Vec::with_capacity(xs.len());
    let mut y = y0;
    for (n, &x) in xs.iter().enumerate() {
        points.push(PlanarPoint::new(x, y));
        if n + 1 < xs.len() {
            y = spec.beta.eval_on(Branch::of(x).unwrap(), x, y);
        }
    }
    let exceeded = bound > epsilon_star;
    Ok(ProbeReport {
        bound,
        epsilon_star,
        delta,
        seed,
        n_steps,
        restarts: search_budget,
        best_restart,
        exceeded,
        notice: (!exceeded).then(|| {
            format!("search budget exhausted: no pseudo-orbit with bound above {epsilon_star:e}")
        }),
        orbit: PseudoOrbit2D {
            points,
            delta,
            mu: 0.0,
            terminal_gamma: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_min(spec: &LorenzMapSpec, xs: &[f64], step: f64) -> f64 {
        let n = (2.0 / step) as usize;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let z = -1.0 + i as f64 * step;
            if z == 0.0 {
                continue;
            }
            let mut w = z;
            let mut sup = 0.0f64;
            for (k, &x) in xs.iter().enumerate() {
                if k > 0 {
                    if w == 0.0 {
                        sup = f64::INFINITY;
                        break;
                    }
                    w = spec.alpha_mu(0.0, w);
                }
                sup = sup.max((w - x).abs());
                if sup >= best {
                    break;
                }
            }
            best = best.min(sup);
        }
        best
    }

    #[test]
    fn true_orbit_has_zero_bound() {
        let s = LorenzMapSpec::reference();
        let mut xs = vec![0.3];
        for _ in 0..30 {
            xs.push(s.alpha_mu(0.0, *xs.last().unwrap()));
        }
        assert_eq!(shadow_bound_1d(&s, &xs), 0.0);
        let r = komuro_probe(&s, 1e-6, 0.0, 20, 1, 2).unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(!r.exceeded && r.notice.is_some());
    }

    #[test]
    fn bound_matches_dense_grid() {
        let s = LorenzMapSpec::reference();
        let mut rng = seeds::rng(3);
        for _ in 0..4 {
            let mut xs = vec![rng.gen_range(0.85..0.95)];
            for _ in 0..5 {
                let d: f64 = rng.gen_range(-1e-2..1e-2);
                xs.push((s.alpha_mu(0.0, *xs.last().unwrap()) + d).clamp(-1.0, 1.0));
            }
            let b = shadow_bound_1d(&s, &xs);
            let g = grid_min(&s, &xs, 1e-5);
            assert!(g >= b - 1e-12, "grid {g} below bound {b}");
            assert!(g <= b + 1e-3, "grid {g} far above bound {b}");
        }
    }

    #[test]
    fn probe_is_deterministic_and_valid() {
        let s = LorenzMapSpec::reference();
        let a = komuro_probe(&s, 1e-3, 1e-4, 25, 17, 4).unwrap();
        let b = komuro_probe(&s, 1e-3, 1e-4, 25, 17, 4).unwrap();
        assert_eq!(a, b);
        a.orbit.validate(&s).unwrap();
        assert!(a.bound > 0.0);
    }
}
