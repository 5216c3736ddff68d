use std::sync::OnceLock;

use lorenz_pssp::flow::{first_return, FlowSpec, FlowState};
use lorenz_pssp::flow_shadow::{
    derive_flow_constants, run_flow_shadowing, FlowConstants, FlowOrbitMode, Reparametrization,
};
use lorenz_pssp::shadow1d::{
    build_interval_chain, check_chain_invariants, generate_pseudo_orbit_1d, solve_shadow_point_1d,
    OrbitMode, ShadowVariant,
};
use lorenz_pssp::shadow2d::{generate_pseudo_orbit_2d, komuro_probe, solve_shadow_point_2d, verify_shadow_2d};
use lorenz_pssp::{derive_map_constants, Branch, LorenzMapSpec, PlanarPoint};
use proptest::prelude::*;

fn spec() -> LorenzMapSpec {
    LorenzMapSpec::reference()
}

fn flow() -> &'static (FlowSpec, FlowConstants) {
    static K: OnceLock<(FlowSpec, FlowConstants)> = OnceLock::new();
    K.get_or_init(|| {
        let fs = FlowSpec::reference();
        let k = derive_flow_constants(&fs, 0.6).unwrap();
        (fs, k)
    })
}

fn nonzero_unit() -> impl Strategy<Value = f64> {
    (-1.0f64..=1.0).prop_filter("off the singular point", |x| *x != 0.0)
}

fn map_mode() -> impl Strategy<Value = OrbitMode> {
    prop_oneof![Just(OrbitMode::Noise), Just(OrbitMode::GammaCrossing)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn alpha_is_odd(x in nonzero_unit(), mu in 0.0f64..=0.02) {
        let s = spec();
        prop_assert_eq!(s.alpha_mu(mu, -x) + s.alpha_mu(mu, x), 0.0);
    }

    #[test]
    fn shift_is_the_same_expression(x in nonzero_unit(), mu in 0.0f64..=0.02) {
        let s = spec();
        prop_assert_eq!(s.alpha_mu(mu, x).to_bits(), (s.alpha.eval(x) - mu * x).to_bits());
    }

    #[test]
    fn fibre_map_contracts(x in nonzero_unit(), y1 in -1.0f64..=1.0, y2 in -1.0f64..=1.0) {
        let s = spec();
        let b = Branch::of(x).unwrap();
        let gap = (s.beta.eval_on(b, x, y1) - s.beta.eval_on(b, x, y2)).abs();
        prop_assert!(gap <= s.beta.d * (y1 - y2).abs() * (1.0 + 1e-12) + 1e-16);
        prop_assert!(s.beta.d < 1.0);
    }

    #[test]
    fn cusps_stay_apart(u in -0.9f64..0.9, y1 in -1.0f64..=1.0, y2 in -1.0f64..=1.0) {
        // preimages of the same first coordinate on both halves
        let s = spec();
        let xp = s.invert_alpha_branch(u, Branch::Positive).unwrap();
        let xm = s.invert_alpha_branch(u, Branch::Negative).unwrap();
        let p = s.map_mu(0.0, PlanarPoint::new(xp, y1));
        let m = s.map_mu(0.0, PlanarPoint::new(xm, y2));
        prop_assert!((p.x - m.x).abs() < 1e-6);
        let bound = s.beta.e_plus - s.beta.e_minus - 2.0 * s.beta.d;
        prop_assert!(bound > 0.0);
        prop_assert!((p.y - m.y).abs() >= bound - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chains_keep_their_invariants(seed in any::<u64>(), eps in 0.05f64..0.95, n in 20usize..400, mode in map_mode()) {
        let s = spec();
        let k = derive_map_constants(&s, eps).unwrap();
        let pseudo = generate_pseudo_orbit_1d(&s, &k, n, seed, mode).unwrap();
        pseudo.validate(&s).unwrap();
        let chain = build_interval_chain(&s, &pseudo, &k).unwrap();
        let inv = check_chain_invariants(&s, &chain, &pseudo, 1e-10);
        prop_assert!(inv.violations.is_empty(), "{:?}", inv.violations);
        let r = solve_shadow_point_1d(&s, &chain, &pseudo, &k, ShadowVariant::Infinite).unwrap();
        prop_assert!(r.max_error <= k.shadow_radius() && k.shadow_radius() <= eps / 8.0);
        prop_assert!(r.orbit.iter().all(|w| *w != 0.0));
    }

    #[test]
    fn terminal_orbits_end_on_the_singular_point(seed in any::<u64>(), eps in 0.05f64..0.95, n in 2usize..60) {
        let s = spec();
        let k = derive_map_constants(&s, eps).unwrap();
        let pseudo = generate_pseudo_orbit_1d(&s, &k, n, seed, OrbitMode::GammaTerminal).unwrap();
        let chain = build_interval_chain(&s, &pseudo, &k).unwrap();
        let r = solve_shadow_point_1d(&s, &chain, &pseudo, &k, ShadowVariant::GammaTerminal).unwrap();
        prop_assert!(r.gamma_exact);
        prop_assert_eq!(*r.orbit.last().unwrap(), 0.0);
        prop_assert!(r.orbit[..n - 1].iter().all(|w| *w != 0.0));
        prop_assert!(r.max_error <= k.shadow_radius());
    }

    #[test]
    fn planar_errors_split_by_axis(seed in any::<u64>(), eps in 0.05f64..0.95, n in 20usize..400, mode in map_mode()) {
        let s = spec();
        let k = derive_map_constants(&s, eps).unwrap();
        let pseudo = generate_pseudo_orbit_2d(&s, &k, n, seed, mode).unwrap();
        pseudo.validate(&s).unwrap();
        let r = solve_shadow_point_2d(&s, &pseudo, &k, ShadowVariant::Infinite).unwrap();
        let v = verify_shadow_2d(&s, &pseudo, &r, eps);
        prop_assert!(v.pass);
        prop_assert!(v.max_x_error <= eps / 8.0 && v.max_y_error <= 7.0 * eps / 8.0 && v.max_error <= eps);
        prop_assert!(r.side_mismatches.is_empty());
        prop_assert!(r.orbit.iter().all(|p| p.x != 0.0));
    }

    #[test]
    fn probe_orbits_are_pseudo_orbits(seed in any::<u64>(), delta in 0.0f64..1e-3, n in 1usize..12) {
        let s = spec();
        let r = komuro_probe(&s, 1e-3, delta, n, seed, 2).unwrap();
        prop_assert!(r.orbit.validate(&s).is_ok());
        prop_assert!(r.bound >= 0.0 && r.bound.is_finite());
        prop_assert_eq!(r.orbit.len(), n + 1);
    }

    #[test]
    fn flow_is_a_semigroup(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.0f64..=1.0, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0, mu in 0.0f64..=0.02) {
        let (fs, _) = flow();
        let s = FlowState::linear(x, y, z);
        let a = fs.project(mu, &fs.advance(mu, s, t1 + t2));
        let b = fs.project(mu, &fs.advance(mu, fs.advance(mu, s, t1), t2));
        prop_assert!(a.dist(&b) < 1e-9);
    }

    #[test]
    fn first_return_is_the_map(x in nonzero_unit(), y in -1.0f64..=1.0, mu in 0.0f64..=0.02) {
        let (fs, _) = flow();
        let p = PlanarPoint::new(x, y);
        let (q, t) = first_return(fs, mu, p).unwrap();
        prop_assert!(q.dist(&fs.map.eval_map_mu(mu, p).unwrap()) < 1e-9);
        prop_assert!(t > 0.0);
    }

    #[test]
    fn linear_mode_expands_x(x in nonzero_unit(), y in -1.0f64..1.0, z in 0.0f64..=1.0, dt in 1e-3f64..0.5) {
        let (fs, _) = flow();
        let s = FlowState::linear(x * 1e-3, y, z);
        let t_exit = fs.exit_time(x * 1e-3);
        let mut prev = (x * 1e-3).abs();
        let mut t = dt;
        while t < t_exit {
            let p = fs.project(0.0, &fs.advance(0.0, s, t));
            prop_assert!(p.x.abs() > prev);
            prev = p.x.abs();
            t += dt;
        }
    }

    #[test]
    fn reparametrization_is_monotone(steps in prop::collection::vec((1e-6f64..3.0, 1e-6f64..3.0), 1..30)) {
        let mut t = vec![0.0];
        let mut h = vec![0.0];
        for (dt, dh) in &steps {
            t.push(t.last().unwrap() + dt);
            h.push(h.last().unwrap() + dh);
        }
        let r = Reparametrization::from_knots(t.clone(), h.clone(), vec![0]).unwrap();
        for (a, b) in t.iter().zip(&h) {
            prop_assert!((r.eval(*a) - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        let end = *t.last().unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=2000 {
            let v = r.eval(end * k as f64 / 2000.0);
            prop_assert!(v > prev);
            prev = v;
        }
        prop_assert!((r.eval(end) - h.last().unwrap()).abs() <= 1e-9 * (1.0 + h.last().unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projected_sequences_are_pseudo_orbits(seed in any::<u64>(), gamma in any::<bool>()) {
        let (fs, k) = flow();
        let mode = if gamma { FlowOrbitMode::Gamma } else { FlowOrbitMode::Noise };
        let r = run_flow_shadowing(fs, k, 1500, seed, mode).unwrap();
        let w = &r.projection.w;
        prop_assert!(w.validate(&fs.map).is_ok());
        prop_assert!(w.delta <= k.xi0);
        for (y, p) in r.crossings.points().zip(&w.points) {
            prop_assert!(y.dist(p) < k.epsilon1 / 2.0);
        }
        prop_assert!(r.triangle_max < k.epsilon1);
        prop_assert!(r.report.pass && r.report.h_strictly_increasing);
    }
}
