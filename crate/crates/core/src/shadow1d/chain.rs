use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{Branch, LorenzMapSpec, MapConstants, BAND_LOW};

use super::orbit::PseudoOrbit1D;

/// Endpoint slack for every containment test.
pub const CONTAINMENT_SLACK: f64 = 1e-10;

/// Seed length factor after a straddle, `sqrt 2 - 1/100`.
pub const SEED_FACTOR: f64 = SQRT_2 - 0.01;

/// How far ahead the interior-return search looks.
const RETURN_HORIZON: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// `|l_n| = 2 epsilon1` centred on `x_n`.
    Centered,
    /// One-sided seed abutting `x_n` after the previous interval straddled 0.
    StraddleSeed,
    /// Exact image of the previous interval.
    Expansion,
}

/// One interval of the chain together with the part of it mapped forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub interval: Interval,
    pub kind: StepKind,
    /// Sub-interval on one side of 0 that is mapped to the next step.
    pub domain: Interval,
    pub branch: Branch,
    /// `alpha(domain)`, with the one-sided limit at 0.
    pub image: Interval,
    /// Whether `interval` has 0 in its interior.
    pub straddles: bool,
    /// `containment_slack(image, next interval)`; infinite on the last step.
    pub slack: f64,
}

/// Nested interval chain `l_0, l_1, …` with `alpha(l_n) ⊇ l_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalChain {
    pub steps: Vec<ChainStep>,
    pub epsilon1: f64,
}

fn side_of(interval: &Interval) -> Branch {
    if interval.lo >= 0.0 {
        Branch::Positive
    } else {
        Branch::Negative
    }
}

/// Intersection that tolerates rounding: two intervals that miss each other
/// by at most a few ulps meet in the midpoint of the gap.
fn intersect_loose(a: &Interval, b: &Interval) -> Option<Interval> {
    let lo = a.lo.max(b.lo);
    let hi = a.hi.min(b.hi);
    if lo <= hi {
        Some(Interval { lo, hi })
    } else if lo - hi <= 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        Some(Interval { lo: mid, hi: mid })
    } else {
        None
    }
}

impl IntervalChain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn interval(&self, n: usize) -> Interval {
        self.steps[n].interval
    }

    pub fn straddle_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.straddles)
            .map(|(n, _)| n)
    }

    /// Preimage of `target` under `alpha` restricted to the domain of step `k`.
    fn pull_one(&self, spec: &LorenzMapSpec, k: usize, target: &Interval) -> Option<Interval> {
        let step = &self.steps[k];
        let clipped = intersect_loose(&step.image, target)?;
        let inv = |t: f64| -> Option<f64> {
            if t == step.image.lo {
                Some(step.domain.lo)
            } else if t == step.image.hi {
                Some(step.domain.hi)
            } else {
                spec.invert_alpha_branch(t, step.branch).ok()
            }
        };
        let lo = inv(clipped.lo)?;
        let hi = inv(clipped.hi)?;
        intersect_loose(&Interval { lo: lo.min(hi), hi: lo.max(hi) }, &step.domain)
    }

    /// `l_m^(n)`: the points of `l_n` whose first `m - n` iterates follow the
    /// chain into `l_m`.
    pub fn pullback_interval(&self, spec: &LorenzMapSpec, m: usize, n: usize) -> Result<Interval> {
        if m <= n || m >= self.steps.len() {
            return Err(Error::Parameter(format!(
                "pullback needs n < m < {} (got n = {n}, m = {m})",
                self.steps.len()
            )));
        }
        let mut current = self.steps[m].interval;
        for k in (n..m).rev() {
            current = self
                .pull_one(spec, k, &current)
                .ok_or(Error::EmptyPullback { m, n })?;
        }
        Ok(current)
    }

    /// Smallest `m > n` with `l_m^(n) ⊂ Int l_n`, searched up to a fixed
    /// horizon.
    pub fn interior_return(&self, spec: &LorenzMapSpec, n: usize) -> Option<usize> {
        let l_n = self.steps[n].interval;
        for m in n + 1..self.steps.len().min(n + 1 + RETURN_HORIZON) {
            let mut j = self.steps[m].interval;
            let mut ok = true;
            for k in (n..m).rev() {
                match self.pull_one(spec, k, &j) {
                    Some(p) => j = p,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && l_n.lo < j.lo && j.hi < l_n.hi {
                return Some(m);
            }
        }
        None
    }
}

/// Builds `l_0, l_1, …` for a pseudo-orbit of `alpha_hat`.
///
/// Away from 0 the next interval is centred on the next point with length
/// `2 epsilon1`. When `l_n` straddles 0, the half whose image lies near the
/// next point is used and the next interval is the one-sided seed of length
/// `(sqrt 2 - 1/100) epsilon1`; the two following intervals are exact images,
/// after which centring resumes.
pub fn build_interval_chain(
    spec: &LorenzMapSpec,
    orbit: &PseudoOrbit1D,
    constants: &MapConstants,
) -> Result<IntervalChain> {
    let e1 = constants.epsilon1;
    let pts = &orbit.points;
    if pts.is_empty() {
        return Err(Error::Parameter("empty pseudo-orbit".into()));
    }
    let mut steps: Vec<ChainStep> = Vec::with_capacity(pts.len());
    let mut interval = Interval::centered(pts[0], e1);
    let mut kind = StepKind::Centered;
    let mut forced = 0usize;

    for n in 0..pts.len() {
        let straddles = interval.lo < 0.0 && interval.hi > 0.0;
        let last = n + 1 == pts.len();
        let (domain, branch) = if straddles {
            // choose the half whose image lands near the next point
            let next = if last { 1.0 } else { pts[n + 1] };
            if next > 0.0 {
                (Interval::new(interval.lo, 0.0), Branch::Negative)
            } else if next < 0.0 {
                (Interval::new(0.0, interval.hi), Branch::Positive)
            } else {
                return Err(Error::Containment {
                    step: n,
                    detail: "interval straddles 0 and the next point is 0 as well".into(),
                });
            }
        } else {
            (interval, side_of(&interval))
        };
        let image = Interval::new(
            spec.alpha_mu_on(0.0, branch, domain.lo),
            spec.alpha_mu_on(0.0, branch, domain.hi),
        );
        steps.push(ChainStep {
            interval,
            kind,
            domain,
            branch,
            image,
            straddles,
            slack: f64::INFINITY,
        });
        if last {
            break;
        }

        let next_x = pts[n + 1];
        let (next, next_kind) = if straddles {
            forced = 2;
            let seed = match branch {
                Branch::Negative => Interval::new(next_x - SEED_FACTOR * e1, next_x),
                Branch::Positive => Interval::new(next_x, next_x + SEED_FACTOR * e1),
            };
            (seed, StepKind::StraddleSeed)
        } else if forced > 0 {
            forced -= 1;
            (image, StepKind::Expansion)
        } else {
            (Interval::centered(next_x, e1), StepKind::Centered)
        };
        let slack = image.containment_slack(&next);
        if slack < -CONTAINMENT_SLACK {
            return Err(Error::Containment {
                step: n,
                detail: format!(
                    "alpha(l_{n}) = [{:.15}, {:.15}] does not contain l_{} = [{:.15}, {:.15}] ({:?}); slack {slack:e}",
                    image.lo,
                    image.hi,
                    n + 1,
                    next.lo,
                    next.hi,
                    next_kind
                ),
            });
        }
        steps.last_mut().unwrap().slack = slack;
        interval = next;
        kind = next_kind;
    }

    Ok(IntervalChain { steps, epsilon1: e1 })
}

/// Summary of the interval-chain invariants over one chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainInvariantReport {
    pub steps: usize,
    pub straddles: usize,
    pub violations: Vec<String>,
    pub min_length_ratio: f64,
    pub max_length_ratio: f64,
    pub max_endpoint_distance_ratio: f64,
    pub min_containment_slack: f64,
    /// Largest `m - n` needed for `l_m^(n) ⊂ Int l_n`.
    pub max_return_depth: usize,
}

impl ChainInvariantReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks the four interval-chain conditions at every step with absolute
/// tolerance `tol`.
pub fn check_chain_invariants(
    spec: &LorenzMapSpec,
    chain: &IntervalChain,
    orbit: &PseudoOrbit1D,
    tol: f64,
) -> ChainInvariantReport {
    let e1 = chain.epsilon1;
    let mut r = ChainInvariantReport {
        steps: chain.len(),
        min_length_ratio: f64::INFINITY,
        min_containment_slack: f64::INFINITY,
        ..Default::default()
    };
    let push = |r: &mut ChainInvariantReport, msg: String| {
        if r.violations.len() < 32 {
            r.violations.push(msg);
        }
    };
    let n_steps = chain.len();
    for (n, step) in chain.steps.iter().enumerate() {
        let l = step.interval;
        let x = orbit.points[n];
        let len = l.len();
        r.min_length_ratio = r.min_length_ratio.min(len / e1);
        r.max_length_ratio = r.max_length_ratio.max(len / e1);
        if len < e1 - tol || len > 6.0 * e1 + tol {
            push(&mut r, format!("(i) step {n}: |l_n| = {:.6} eps1", len / e1));
        }
        let far = l.max_distance_to(x);
        r.max_endpoint_distance_ratio = r.max_endpoint_distance_ratio.max(far / e1);
        if far > 8.0 * e1 + tol {
            push(&mut r, format!("(ii) step {n}: endpoint distance {:.6} eps1", far / e1));
        }
        let in_band = (l.lo >= BAND_LOW - tol && l.hi <= 1.0 + tol)
            || (l.lo >= -1.0 - tol && l.hi <= -BAND_LOW + tol);
        if !in_band && ((len - 2.0 * e1).abs() > tol || (l.center() - x).abs() > tol) {
            push(&mut r, format!("(iii) step {n}: off-band interval is not centred"));
        }
        if step.straddles {
            r.straddles += 1;
            if !(step.domain.lo == 0.0 || step.domain.hi == 0.0) {
                push(&mut r, format!("(iv) step {n}: straddle domain does not end at 0"));
            }
        }
        if n + 1 < n_steps {
            let next = chain.steps[n + 1].interval;
            let slack = step.image.containment_slack(&next);
            r.min_containment_slack = r.min_containment_slack.min(slack);
            if slack < -tol {
                push(&mut r, format!("(iv) step {n}: alpha(l_n) misses l_(n+1) by {slack:e}"));
            }
            match chain.pullback_interval(spec, n + 1, n) {
                Ok(p) => {
                    if step.straddles && p.lo < 0.0 && p.hi > 0.0 {
                        push(&mut r, format!("(iv) step {n}: pullback interior meets 0"));
                    }
                }
                Err(e) => push(&mut r, format!("(iv) step {n}: {e}")),
            }
            match chain.interior_return(spec, n) {
                Some(m) => r.max_return_depth = r.max_return_depth.max(m - n),
                None if n + RETURN_HORIZON < n_steps => {
                    push(&mut r, format!("(iv) step {n}: no interior return within horizon"))
                }
                None => {}
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::derive_map_constants;
    use crate::shadow1d::orbit::{generate_pseudo_orbit_1d, generate_with, OrbitMode};

    fn setup() -> (LorenzMapSpec, MapConstants) {
        let s = LorenzMapSpec::reference();
        let k = derive_map_constants(&s, 0.64).unwrap();
        (s, k)
    }

    #[test]
    fn orbit_in_upper_band_is_all_centred() {
        let (s, k) = setup();
        // the orbit of 1 under alpha_hat stays in [0.5, 1] for a few steps
        let mut pts = vec![0.99];
        for _ in 0..3 {
            let x = *pts.last().unwrap();
            pts.push(s.alpha_mu(k.mu_hat, x));
        }
        assert!(pts.iter().all(|&x| (0.5..=1.0).contains(&x)));
        let o = PseudoOrbit1D { points: pts, delta: k.delta, mu: k.mu_hat, terminal_gamma: false };
        let c = build_interval_chain(&s, &o, &k).unwrap();
        for (n, st) in c.steps.iter().enumerate() {
            assert_eq!(st.kind, StepKind::Centered);
            assert!((st.interval.len() - 2.0 * k.epsilon1).abs() < 1e-15);
            assert!((st.interval.center() - o.points[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn straddle_expands_past_3_9_eps1() {
        let (s, k) = setup();
        let mut found = 0;
        for seed in 0..20 {
            let o = generate_pseudo_orbit_1d(&s, &k, 3000, seed, OrbitMode::GammaCrossing).unwrap();
            let c = build_interval_chain(&s, &o, &k).unwrap();
            for n in c.straddle_indices().collect::<Vec<_>>() {
                if n + 4 >= c.len() {
                    continue;
                }
                found += 1;
                let seed_iv = c.interval(n + 1);
                assert_eq!(c.steps[n + 1].kind, StepKind::StraddleSeed);
                let third = c.steps[n + 3].image;
                let bound = 2.0 * SQRT_2 * SEED_FACTOR * k.epsilon1;
                assert!(bound > 3.9 * k.epsilon1);
                assert!(third.len() >= bound, "{} < {bound}", third.len());
                // alpha^3 versus alpha_hat^3 on the seed: a (1.1, 2.4) eps1 right shift,
                // mirrored on the negative side
                let hat3 = |x: f64| {
                    let mut y = x;
                    for _ in 0..3 {
                        y = s.alpha_mu(k.mu_hat, y);
                    }
                    y
                };
                let (hat, actual) = if seed_iv.lo > 0.0 {
                    (Interval::new(hat3(seed_iv.lo), hat3(seed_iv.hi)), third)
                } else {
                    (
                        Interval::new(-hat3(-seed_iv.lo), -hat3(-seed_iv.hi)).mirrored().mirrored(),
                        third,
                    )
                };
                if seed_iv.lo > 0.0 {
                    assert!(crate::interval::verify_rhs_shift(
                        &hat,
                        &actual,
                        1.1 * k.epsilon1,
                        2.4 * k.epsilon1
                    ));
                } else {
                    assert!(crate::interval::verify_rhs_shift(
                        &actual.mirrored(),
                        &Interval::new(hat3(-seed_iv.hi), hat3(-seed_iv.lo)),
                        -2.4 * k.epsilon1,
                        -1.1 * k.epsilon1
                    ) || crate::interval::verify_rhs_shift(
                        &Interval::new(hat3(-seed_iv.hi), hat3(-seed_iv.lo)),
                        &actual.mirrored(),
                        1.1 * k.epsilon1,
                        2.4 * k.epsilon1
                    ));
                }
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn rhs_shift_between_shifted_and_unshifted_images() {
        let (s, k) = setup();
        for i in 1..200 {
            let lo = i as f64 / 200.0;
            let l = Interval::new(lo, (lo + 2.0 * k.epsilon1).min(1.0));
            let hat = Interval::new(s.alpha_mu(k.mu_hat, l.lo), s.alpha_mu(k.mu_hat, l.hi));
            let act = Interval::new(s.alpha_mu(0.0, l.lo), s.alpha_mu(0.0, l.hi));
            assert!(crate::interval::verify_rhs_shift(&hat, &act, 0.0, k.epsilon1 / 3.0));
        }
    }

    #[test]
    fn pullbacks_nest_and_shrink() {
        let (s, k) = setup();
        let o = generate_pseudo_orbit_1d(&s, &k, 200, 5, OrbitMode::GammaCrossing).unwrap();
        let c = build_interval_chain(&s, &o, &k).unwrap();
        let first = c.pullback_interval(&s, 1, 0).unwrap();
        assert!(first.len() > 0.0 && c.interval(0).contains_interval(&first, 0.0));
        let mut prev = first;
        for m in 2..80 {
            let p = c.pullback_interval(&s, m, 0).unwrap();
            assert!(prev.contains_interval(&p, 1e-14), "m = {m}");
            prev = p;
        }
        assert!(prev.len() < 1e-8, "{}", prev.len());
        assert!(c.pullback_interval(&s, 0, 0).is_err());
    }

    #[test]
    fn pullback_maps_onto_target() {
        let (s, k) = setup();
        let o = generate_pseudo_orbit_1d(&s, &k, 60, 9, OrbitMode::Noise).unwrap();
        let c = build_interval_chain(&s, &o, &k).unwrap();
        for n in 0..20 {
            let m = n + 6;
            let p = c.pullback_interval(&s, m, n).unwrap();
            let (mut a, mut b) = (p.lo, p.hi);
            for j in n..m {
                a = s.alpha_mu_on(0.0, c.steps[j].branch, a);
                b = s.alpha_mu_on(0.0, c.steps[j].branch, b);
            }
            let t = c.interval(m);
            assert!((a - t.lo).abs() < 1e-9 && (b - t.hi).abs() < 1e-9);
        }
    }

    #[test]
    fn invariants_hold_on_generated_chains() {
        let (s, k) = setup();
        for mode in [OrbitMode::Noise, OrbitMode::GammaCrossing, OrbitMode::GammaTerminal] {
            let o = generate_pseudo_orbit_1d(&s, &k, 1500, 2, mode).unwrap();
            let c = build_interval_chain(&s, &o, &k).unwrap();
            let r = check_chain_invariants(&s, &c, &o, 1e-10);
            assert!(r.ok(), "{mode}: {:?}", r.violations);
        }
    }

    #[test]
    fn oversized_noise_breaks_containment() {
        let (s, k) = setup();
        let o = generate_with(&s, k.mu_hat, 200.0 * k.epsilon1, k.epsilon1, 400, 1, OrbitMode::Noise)
            .unwrap();
        assert!(matches!(
            build_interval_chain(&s, &o, &k),
            Err(Error::Containment { .. })
        ));
    }
}
