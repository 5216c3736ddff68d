//! From a chain of the flow to a verified shadowing orbit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::shadow1d::ShadowVariant;
use crate::shadow2d::{solve_shadow_point_2d, ShadowResult2D};

use super::chain::{generate_with, FlowOrbitMode, FlowPseudoOrbit};
use super::constants::FlowConstants;
use super::crossing::{
    extract_crossing_sequence, interpolate_chain, project_crossing_to_map_orbit, CrossingSequence,
    Projection,
};
use super::reparam::{build_reparametrization, Reparametrization, TrueOrbit};
use super::verify::{verify_flow_shadowing, FlowShadowReport};

/// Uniform samples per step kept in the interpolated chain.
pub const CHAIN_SAMPLES: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct FlowShadowRun {
    pub orbit: FlowPseudoOrbit,
    pub crossings: CrossingSequence,
    pub projection: Projection,
    pub map_shadow: ShadowResult2D,
    /// `max_i |y_i - L^i(z)|`.
    pub triangle_max: f64,
    pub true_orbit: TrueOrbit,
    pub reparam: Reparametrization,
    pub report: FlowShadowReport,
}

/// Shadows a given chain: crossings, projection onto a map pseudo-orbit, the
/// map-level shadow, and the dense check against the true flow.
pub fn shadow_flow_chain(fs: &FlowSpec, k: &FlowConstants, orbit: FlowPseudoOrbit) -> Result<FlowShadowRun> {
    orbit.validate(fs)?;
    let chain = interpolate_chain(fs, &orbit, k.eta0, CHAIN_SAMPLES);
    let crossings = extract_crossing_sequence(&chain)?;
    let projection = project_crossing_to_map_orbit(&crossings, k, &fs.map)?;
    projection.w.validate(&fs.map)?;
    let variant = if crossings.terminal { ShadowVariant::GammaTerminal } else { ShadowVariant::Infinite };
    let map_shadow = solve_shadow_point_2d(&fs.map, &projection.w, &k.map, variant)?;

    let mut triangle_max = 0.0f64;
    for (i, (y, q)) in crossings.points().zip(&map_shadow.orbit).enumerate() {
        let d = y.dist(q);
        if d >= k.epsilon1 {
            return Err(Error::Accuracy {
                index: i,
                detail: format!("|y_i - L^i(z)| = {d:e} is not below epsilon1 = {:e}", k.epsilon1),
            });
        }
        triangle_max = triangle_max.max(d);
    }

    let true_orbit = TrueOrbit::from_points(fs, map_shadow.orbit.clone());
    let reparam = build_reparametrization(fs, &orbit, &crossings, &true_orbit)?;
    let last = crossings.crossings.last().map_or(0.0, |c| c.time);
    let report = verify_flow_shadowing(fs, &orbit, &true_orbit, &reparam, last, k.epsilon, k.eta0);
    Ok(FlowShadowRun {
        orbit,
        crossings,
        projection,
        map_shadow,
        triangle_max,
        true_orbit,
        reparam,
        report,
    })
}

/// Generates a `(delta_hat, tau_hat)`-chain of `phi_{mu_hat}` and shadows it.
pub fn run_flow_shadowing(
    fs: &FlowSpec,
    k: &FlowConstants,
    n_steps: usize,
    seed: u64,
    mode: FlowOrbitMode,
) -> Result<FlowShadowRun> {
    let orbit = generate_with(fs, &k.generator(), n_steps, seed, mode)?;
    shadow_flow_chain(fs, k, orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowState, first_return};
    use crate::flow_shadow::constants::derive_flow_constants;
    use crate::flow_shadow::crossing::{Crossing, CrossingKind, ProjectionCase};
    use crate::flow_shadow::chain::GeneratorParams;
    use crate::map::{Branch, PlanarPoint};
    use std::sync::OnceLock;

    fn setup() -> &'static (FlowSpec, FlowConstants) {
        static K: OnceLock<(FlowSpec, FlowConstants)> = OnceLock::new();
        K.get_or_init(|| {
            let fs = FlowSpec::reference();
            let k = derive_flow_constants(&fs, 0.6).unwrap();
            (fs, k)
        })
    }

    /// Exact chain from `p` with the given node times.
    fn exact_chain(fs: &FlowSpec, mu: f64, p: PlanarPoint, times: &[f64]) -> FlowPseudoOrbit {
        let s0 = FlowState::on_section(p);
        let states = times.iter().map(|&t| fs.advance(mu, s0, t)).collect();
        let durations = times.windows(2).map(|w| w[1] - w[0]).collect();
        FlowPseudoOrbit { states, durations, delta: 0.0, tau: 1.0 / 6.0, mu }
    }

    fn zero_noise(k: &FlowConstants, n: usize, seed: u64) -> FlowPseudoOrbit {
        let (fs, _) = setup();
        let p = GeneratorParams { delta: 0.0, ..k.generator() };
        generate_with(fs, &p, n, seed, FlowOrbitMode::Noise).unwrap()
    }

    #[test]
    fn zero_noise_crossings_follow_the_return_map() {
        let (fs, k) = setup();
        let orbit = zero_noise(k, 400, 3);
        let chain = interpolate_chain(fs, &orbit, k.eta0, 4);
        assert!(chain.connectors.iter().all(|c| c.len() < 1e-12));
        let cs = extract_crossing_sequence(&chain).unwrap();
        assert!(cs.len() > 20);
        assert_eq!(cs.skipped, 0);
        let ys: Vec<PlanarPoint> = cs.points().collect();
        for w in ys.windows(2) {
            let l = fs.map.map_mu(k.mu_hat, w[0]);
            assert!(l.dist(&w[1]) < 1e-9, "{l:?} vs {:?}", w[1]);
        }
    }

    #[test]
    fn zero_noise_chain_shadows_itself_with_identity_time() {
        let (fs, k) = setup();
        let orbit = GeneratorParams { delta: 0.0, mu: 0.0, ..k.generator() };
        let orbit = generate_with(fs, &orbit, 300, 5, FlowOrbitMode::Noise).unwrap();
        let chain = interpolate_chain(fs, &orbit, k.eta0, 4);
        let cs = extract_crossing_sequence(&chain).unwrap();
        let truth = TrueOrbit::from_points(fs, cs.points().collect());
        let h = build_reparametrization(fs, &orbit, &cs, &truth).unwrap();
        let last = cs.crossings.last().unwrap().time;
        for j in 0..=1000 {
            let t = last * j as f64 / 1000.0;
            assert!((h.eval(t) - t).abs() < 1e-9, "h({t}) = {}", h.eval(t));
        }
        let r = verify_flow_shadowing(fs, &orbit, &truth, &h, last, k.epsilon, k.eta0);
        assert!(r.sup_distance < 1e-9, "{r:?}");
        assert!(r.pass && r.h_strictly_increasing);
    }

    #[test]
    fn second_meeting_segment_is_skipped() {
        let (fs, k) = setup();
        let p = PlanarPoint::new(0.3, 0.2);
        let t_ret = fs.return_time(p.x);
        let tau = k.tau_hat;
        let mut times: Vec<f64> = Vec::new();
        let mut t = 0.0;
        while t < t_ret - 0.5 * tau {
            times.push(t);
            t += tau;
        }
        // the landing step, then a step restarted just before Σ
        times.push(t_ret + 0.005);
        let mut orbit = exact_chain(fs, 0.0, p, &times);
        orbit.states.pop();
        let back = fs.advance(0.0, FlowState::on_section(p), t_ret - 0.01);
        orbit.states.push(back);
        for _ in 0..30 {
            let last = *orbit.states.last().unwrap();
            orbit.states.push(fs.advance(0.0, last, tau));
            orbit.durations.push(tau);
        }
        let chain = interpolate_chain(fs, &orbit, k.eta0, 4);
        let cs = extract_crossing_sequence(&chain).unwrap();
        assert_eq!(cs.skipped, 1);
        let n_land = times.len() - 2;
        assert_eq!(cs.crossings[1].n, n_land);
        assert!(cs.crossings[2].n > n_land + 1);
    }

    #[test]
    fn connector_straddling_sigma_gives_the_crossing() {
        let (fs, k) = setup();
        let p = PlanarPoint::new(-0.4, -0.1);
        let t_ret = fs.return_time(p.x);
        let tau = k.tau_hat;
        let mut times = vec![0.0];
        while *times.last().unwrap() < t_ret - 2.0 * tau {
            times.push(times.last().unwrap() + tau);
        }
        times.push(t_ret - 1e-3);
        let mut orbit = exact_chain(fs, 0.0, p, &times);
        orbit.states.pop();
        let before = fs.advance(0.0, FlowState::on_section(p), t_ret - 1e-3);
        let after = fs.advance(0.0, FlowState::on_section(p), t_ret + 1e-3);
        // the last step ends just before Σ and the next node sits just past it
        orbit.states.push(after);
        for _ in 0..20 {
            let last = *orbit.states.last().unwrap();
            orbit.states.push(fs.advance(0.0, last, tau));
            orbit.durations.push(tau);
        }
        let chain = interpolate_chain(fs, &orbit, k.eta0, 4);
        let cs = extract_crossing_sequence(&chain).unwrap();
        let c: &Crossing = &cs.crossings[1];
        assert_eq!(c.kind, CrossingKind::Connector);
        assert_eq!(c.n, times.len() - 2);
        let jump = fs.project(0.0, &before).dist(&fs.project(0.0, &after));
        let q = crate::flow::Point3::new(c.point.x, c.point.y, 1.0);
        assert!(q.dist(&fs.project(0.0, &before)) <= jump);
        assert!(q.dist(&fs.project(0.0, &after)) <= jump);
        let (l, _) = first_return(fs, 0.0, p).unwrap();
        assert!(c.point.dist(&l) < 1e-2);
    }

    fn sequence(points: &[PlanarPoint]) -> CrossingSequence {
        CrossingSequence {
            crossings: points
                .iter()
                .enumerate()
                .map(|(i, &point)| Crossing { n: 10 * i, point, time: i as f64, kind: CrossingKind::Segment })
                .collect(),
            terminal: false,
            skipped: 0,
            end_time: points.len() as f64,
        }
    }

    #[test]
    fn case_two_flips_to_the_side_taken() {
        let (fs, k) = setup();
        let y0 = PlanarPoint::new(-1e-13, 0.3);
        // the chain went to v_+ although L(y0) lies next to v_-
        let y1 = fs.map.map_mu(k.mu_hat, PlanarPoint::new(1e-13, 0.3));
        let y2 = fs.map.map_mu(k.mu_hat, y1);
        assert!(fs.map.map_mu(k.mu_hat, y0).dist(&y1) > 1.0);
        let proj = project_crossing_to_map_orbit(&sequence(&[y0, y1, y2]), k, &fs.map).unwrap();
        assert_eq!(proj.cases, vec![ProjectionCase::Two, ProjectionCase::One]);
        assert_eq!(proj.side_switches, 1);
        assert_eq!(proj.w.points[0], PlanarPoint::new(0.5 * k.xi1, 0.3));
        assert!(proj.max_gap < k.xi0);
        proj.w.validate(&fs.map).unwrap();
    }

    #[test]
    fn case_three_gap_stays_below_xi0() {
        let (fs, k) = setup();
        let x0 = fs.map.invert_alpha_mu(k.mu_hat, 0.0, Branch::Positive).unwrap();
        let y0 = PlanarPoint::new(x0, 0.2);
        let l0 = fs.map.map_mu(k.mu_hat, y0);
        let y1 = PlanarPoint::new(l0.x + 0.25 * k.xi1, l0.y);
        let y2 = fs.map.map_mu(k.mu_hat, PlanarPoint::new(0.5 * k.xi1, y1.y));
        let y3 = fs.map.map_mu(k.mu_hat, y2);
        let proj = project_crossing_to_map_orbit(&sequence(&[y0, y1, y2, y3]), k, &fs.map).unwrap();
        assert_eq!(proj.cases, vec![ProjectionCase::Three, ProjectionCase::Two, ProjectionCase::One]);
        let g0 = fs.map.map_mu(k.mu_hat, proj.w.points[0]).dist(&proj.w.points[1]);
        assert!(g0 < 0.5 * k.xi0 + 2.0 * k.xi1 && g0 < k.xi0);
    }

    #[test]
    fn finite_chain_ends_on_a_shadowed_ray() {
        let (fs, k) = setup();
        let r = run_flow_shadowing(fs, k, 600, 11, FlowOrbitMode::Finite).unwrap();
        assert!(r.crossings.terminal);
        assert_eq!(r.report.terminal_ray, Some(true));
        assert!(r.report.pass, "{:?}", r.report);
        assert_eq!(r.map_shadow.orbit.last().unwrap().x, 0.0);
    }

    #[test]
    fn gamma_runs_funnel_through_the_box() {
        let (fs, k) = setup();
        let r = run_flow_shadowing(fs, k, 4000, 21, FlowOrbitMode::Gamma).unwrap();
        assert!(r.report.pass, "{:?}", r.report);
        let ys: Vec<PlanarPoint> = r.crossings.points().collect();
        let mut funnels = 0;
        for (i, c) in r.projection.cases.iter().enumerate() {
            if *c == ProjectionCase::Two {
                let v = [Branch::Positive, Branch::Negative].map(|b| fs.map.vertex(b).dist(&ys[i + 1]));
                assert!(v[0].min(v[1]) < 0.5 * k.xi0, "{v:?}");
                funnels += 1;
            }
        }
        assert!(funnels > 0);
        assert!(r.triangle_max < k.epsilon1);
    }

    #[test]
    fn noisy_runs_pass_and_are_deterministic() {
        let (fs, k) = setup();
        let a = run_flow_shadowing(fs, k, 1500, 4, FlowOrbitMode::Noise).unwrap();
        let b = run_flow_shadowing(fs, k, 1500, 4, FlowOrbitMode::Noise).unwrap();
        assert!(a.report.pass);
        assert_eq!(a.report, b.report);
        assert_eq!(a.orbit, b.orbit);
    }
}
