use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{LorenzMapSpec, MapConstants};

use super::chain::{IntervalChain, CONTAINMENT_SLACK};
use super::orbit::PseudoOrbit1D;

/// Pullback width at which the nested intersection is considered a point.
pub const POINT_WIDTH: f64 = 1e-12;

/// Length of the forward windows used to re-check the orbit.
pub const FORWARD_WINDOW: usize = 8;

/// Largest accepted `|alpha(w_n) - w_{n+1}|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowVariant {
    /// The orbit never meets 0.
    Infinite,
    /// The orbit lands exactly on 0 at the last index.
    GammaTerminal,
}

impl std::str::FromStr for ShadowVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infinite" => Ok(ShadowVariant::Infinite),
            "gamma-terminal" => Ok(ShadowVariant::GammaTerminal),
            other => Err(Error::Parameter(format!("unknown shadow variant {other:?}"))),
        }
    }
}

/// A true `alpha`-orbit shadowing a pseudo-orbit.
///
/// `orbit[n]` is computed backwards from the last interval of the chain,
/// `orbit[n] = alpha^{-1}(orbit[n + 1])` on the recorded branch, so every
/// entry is accurate to rounding even though forward iteration of `z` in
/// double precision loses all accuracy after a few dozen steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult1D {
    pub z: f64,
    pub orbit: Vec<f64>,
    pub max_error: f64,
    pub gamma_exact: bool,
    /// Index `m` with `alpha^m(z) = 0` in the terminal variant.
    pub terminal_index: Option<usize>,
    /// Smallest `|alpha^n(z)|` over the indices before the terminal one.
    pub min_abs_before_terminal: f64,
    /// First `N` with `|l_N^(0)| < POINT_WIDTH` (or the chain length).
    pub pullback_depth: usize,
    pub pullback_width: f64,
    pub max_residual: f64,
    /// Largest distance between forward windows started at `orbit[n]` and the
    /// pseudo-orbit.
    pub max_window_error: f64,
    pub epsilon1: f64,
}

impl ShadowResult1D {
    pub fn errors<'a>(&'a self, pseudo: &'a PseudoOrbit1D) -> impl Iterator<Item = f64> + 'a {
        self.orbit
            .iter()
            .zip(&pseudo.points)
            .map(|(w, x)| (w - x).abs())
    }
}

/// Extracts the shadow point from a chain.
///
/// `z` lies in every pullback `l_N^(0)`; the infinite variant starts the
/// backward pass at the centre of the last interval (moved off `0`), the
/// terminal variant at `0`. The orbit is then checked against the
/// `8 epsilon1` bound three ways: membership in the chain, one-step
/// residuals, and forward windows.
pub fn solve_shadow_point_1d(
    spec: &LorenzMapSpec,
    chain: &IntervalChain,
    pseudo: &PseudoOrbit1D,
    constants: &MapConstants,
    variant: ShadowVariant,
) -> Result<ShadowResult1D> {
    let n_steps = chain.len();
    if n_steps == 0 || n_steps != pseudo.len() {
        return Err(Error::Parameter(format!(
            "chain has {} steps but the pseudo-orbit has {} points",
            n_steps,
            pseudo.len()
        )));
    }
    let last = n_steps - 1;
    let terminal = variant == ShadowVariant::GammaTerminal;
    if terminal && pseudo.points[last] != 0.0 {
        return Err(Error::Parameter(
            "terminal variant needs a pseudo-orbit ending at 0".into(),
        ));
    }

    let mut w = vec![0.0; n_steps];
    w[last] = if terminal {
        0.0
    } else {
        let l = chain.interval(last);
        // a centred interval would start the orbit on the singular point
        match l.center() {
            c if c == 0.0 => 0.5 * l.hi,
            c => c,
        }
    };
    for k in (0..last).rev() {
        let step = &chain.steps[k];
        let target = w[k + 1];
        let x = if target == step.image.lo {
            step.domain.lo
        } else if target == step.image.hi {
            step.domain.hi
        } else {
            spec.invert_alpha_branch(target, step.branch)?
        };
        w[k] = x.clamp(step.domain.lo, step.domain.hi);
    }

    let bound = constants.shadow_radius();
    let mut max_error = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut min_abs = f64::INFINITY;
    for n in 0..n_steps {
        let l = chain.interval(n);
        if !(l.lo - CONTAINMENT_SLACK <= w[n] && w[n] <= l.hi + CONTAINMENT_SLACK) {
            return Err(Error::Accuracy {
                index: n,
                detail: format!("orbit point {} left l_n = [{}, {}]", w[n], l.lo, l.hi),
            });
        }
        max_error = max_error.max((w[n] - pseudo.points[n]).abs());
        if n < last {
            if w[n] == 0.0 {
                return Err(Error::Accuracy {
                    index: n,
                    detail: "orbit meets the singular point early".into(),
                });
            }
            min_abs = min_abs.min(w[n].abs());
            let r = (spec.alpha_mu(0.0, w[n]) - w[n + 1]).abs();
            max_residual = max_residual.max(r);
            if r > RESIDUAL_TOLERANCE {
                return Err(Error::Accuracy {
                    index: n,
                    detail: format!("one-step residual {r:e}"),
                });
            }
        }
    }
    if !terminal && w[last] == 0.0 {
        return Err(Error::Accuracy {
            index: last,
            detail: "orbit meets the singular point".into(),
        });
    }
    if max_error > bound {
        let index = (0..n_steps)
            .find(|&n| (w[n] - pseudo.points[n]).abs() > bound)
            .unwrap_or(0);
        return Err(Error::Accuracy {
            index,
            detail: format!("error {max_error:e} exceeds 8 eps1 = {bound:e}"),
        });
    }

    let mut max_window_error = 0.0f64;
    for n in 0..last {
        let mut y = w[n];
        for j in 1..=FORWARD_WINDOW.min(last - n) {
            if y == 0.0 {
                break;
            }
            y = spec.alpha_mu(0.0, y);
            let e = (y - pseudo.points[n + j]).abs();
            max_window_error = max_window_error.max(e);
            if e > bound {
                return Err(Error::Accuracy {
                    index: n + j,
                    detail: format!("forward window from {n} drifts to {e:e}"),
                });
            }
        }
    }

    let (pullback_depth, pullback_width) = deepest_pullback(spec, chain, w[0])?;

    Ok(ShadowResult1D {
        z: w[0],
        max_error,
        gamma_exact: terminal,
        terminal_index: terminal.then_some(last),
        min_abs_before_terminal: min_abs,
        pullback_depth,
        pullback_width,
        max_residual,
        max_window_error,
        epsilon1: constants.epsilon1,
        orbit: w,
    })
}

/// Walks `l_N^(0)` until its width drops below [`POINT_WIDTH`] and checks
/// that `z` lies inside.
fn deepest_pullback(spec: &LorenzMapSpec, chain: &IntervalChain, z: f64) -> Result<(usize, f64)> {
    let mut depth = 0;
    let mut width = chain.interval(0).len();
    for m in 1..chain.len() {
        let p = chain.pullback_interval(spec, m, 0)?;
        if !(p.lo - POINT_WIDTH <= z && z <= p.hi + POINT_WIDTH) {
            return Err(Error::Accuracy {
                index: 0,
                detail: format!("z = {z} outside l_{m}^(0) = [{}, {}]", p.lo, p.hi),
            });
        }
        depth = m;
        width = p.len();
        if width < POINT_WIDTH {
            break;
        }
    }
    Ok((depth, width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::derive_map_constants;
    use crate::shadow1d::chain::build_interval_chain;
    use crate::shadow1d::orbit::{generate_pseudo_orbit_1d, generate_with, OrbitMode};

    fn run(seed: u64, mode: OrbitMode, n: usize) -> (PseudoOrbit1D, ShadowResult1D) {
        let s = LorenzMapSpec::reference();
        let k = derive_map_constants(&s, 0.64).unwrap();
        let o = generate_pseudo_orbit_1d(&s, &k, n, seed, mode).unwrap();
        let c = build_interval_chain(&s, &o, &k).unwrap();
        let v = if mode == OrbitMode::GammaTerminal {
            ShadowVariant::GammaTerminal
        } else {
            ShadowVariant::Infinite
        };
        let r = solve_shadow_point_1d(&s, &c, &o, &k, v).unwrap();
        (o, r)
    }

    #[test]
    fn zero_noise_orbit_is_shadowed() {
        let s = LorenzMapSpec::reference();
        let k = derive_map_constants(&s, 0.64).unwrap();
        let o = generate_with(&s, k.mu_hat, 0.0, k.epsilon1, 500, 3, OrbitMode::Noise).unwrap();
        let c = build_interval_chain(&s, &o, &k).unwrap();
        let r = solve_shadow_point_1d(&s, &c, &o, &k, ShadowVariant::Infinite).unwrap();
        assert!(r.max_error <= 8.0 * k.epsilon1);
        assert!(8.0 * k.epsilon1 <= 0.64 / 8.0);
    }

    #[test]
    fn noise_and_crossing_runs_meet_the_bound() {
        for mode in [OrbitMode::Noise, OrbitMode::GammaCrossing] {
            let (o, r) = run(11, mode, 4000);
            assert!(r.max_error <= 8.0 * r.epsilon1);
            assert!(r.orbit.iter().all(|&w| w != 0.0));
            assert!(r.max_residual <= RESIDUAL_TOLERANCE);
            assert!(r.pullback_width < POINT_WIDTH && r.pullback_depth < 200);
            let direct = r.errors(&o).fold(0.0, f64::max);
            assert_eq!(direct, r.max_error);
        }
    }

    #[test]
    fn terminal_run_lands_on_zero() {
        let (_, r) = run(4, OrbitMode::GammaTerminal, 50);
        assert_eq!(r.orbit[50], 0.0);
        assert_eq!(r.terminal_index, Some(50));
        assert!(r.gamma_exact && r.min_abs_before_terminal > 0.0);
        assert!(r.max_error <= 8.0 * r.epsilon1);
    }

    #[test]
    fn wrong_variant_is_rejected() {
        let s = LorenzMapSpec::reference();
        let k = derive_map_constants(&s, 0.64).unwrap();
        let o = generate_pseudo_orbit_1d(&s, &k, 30, 1, OrbitMode::Noise).unwrap();
        let c = build_interval_chain(&s, &o, &k).unwrap();
        assert!(solve_shadow_point_1d(&s, &c, &o, &k, ShadowVariant::GammaTerminal).is_err());
    }
}
