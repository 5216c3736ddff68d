//! A hybrid geometric Lorenz flow.
//!
//! Inside the box `Π = [-1, 1]² × [0, 1]` the flow is the linear saddle
//! `(e^{λ1 t} x, e^{-λ2 t} y, e^{-λ3 t} z)`. A state leaving through a side
//! face `x = ±1` enters a return tube that carries it, in a fixed time, to
//! `L_mu` of the section point it came from, so the first return map to the
//! top face `Σ = [-1, 1]² × {1}` is exactly `L_mu`.
//!
//! A tube is a four-piece polyline: out of the side face, up above the box,
//! across to the target, and straight down onto `Σ`. The two tubes never meet
//! `Π` except at their ends and are separated by the sign of `y` on their
//! horizontal piece.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{Branch, LorenzMapSpec, PlanarPoint};

/// Horizontal distance the tube travels outside the side face.
pub const TUBE_OFFSET: f64 = 0.25;
/// Height of the tube's crossing above `Σ`.
pub const TUBE_LIFT: f64 = 0.25;
/// Fraction of the tube time within which an arrival counts as landing.
const HANDOFF_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dist(&self, o: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - o.x, self.y - o.y, self.z - o.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    fn lerp(a: Point3, b: Point3, f: f64) -> Point3 {
        Point3::new(
            a.x + (b.x - a.x) * f,
            a.y + (b.y - a.y) * f,
            a.z + (b.z - a.z) * f,
        )
    }

    /// Membership in `Π(eta) = [-eta, eta]² × [0, eta]`.
    pub fn in_box(&self, eta: f64) -> bool {
        self.x.abs() <= eta && self.y.abs() <= eta && (0.0..=eta).contains(&self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub tube_time: f64,
    pub map: LorenzMapSpec,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FlowState {
    /// Inside `Π`.
    Linear { x: f64, y: f64, z: f64 },
    /// In the tube leaving through the side face `x = side.sign()` at
    /// `(y_e, z_e)`, a fraction `s` of the way along.
    Tube { side: Branch, y_e: f64, z_e: f64, s: f64 },
    /// On the plane `x = 0` inside `Π`, flowing into the origin.
    StableManifold { y: f64, z: f64 },
}

impl FlowState {
    /// The state at a point of `Π`; `x = 0` gives the stable-manifold mode.
    pub fn linear(x: f64, y: f64, z: f64) -> Self {
        if x == 0.0 {
            FlowState::StableManifold { y, z }
        } else {
            FlowState::Linear { x, y, z }
        }
    }

    pub fn on_section(p: PlanarPoint) -> Self {
        Self::linear(p.x, p.y, 1.0)
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            FlowState::Linear { .. } => "linear",
            FlowState::Tube { side: Branch::Positive, .. } => "tube+",
            FlowState::Tube { side: Branch::Negative, .. } => "tube-",
            FlowState::StableManifold { .. } => "stable-manifold",
        }
    }

    /// Whether the state lies on `Σ` (top face of the box).
    pub fn on_sigma(&self) -> bool {
        match *self {
            FlowState::Linear { x, y, z } => z == 1.0 && x.abs() <= 1.0 && y.abs() <= 1.0,
            FlowState::StableManifold { y, z } => z == 1.0 && y.abs() <= 1.0,
            FlowState::Tube { .. } => false,
        }
    }

    /// Section coordinates of a state on `Σ`.
    pub fn sigma_point(&self) -> Option<PlanarPoint> {
        if !self.on_sigma() {
            return None;
        }
        match *self {
            FlowState::Linear { x, y, .. } => Some(PlanarPoint::new(x, y)),
            FlowState::StableManifold { y, .. } => Some(PlanarPoint::new(0.0, y)),
            FlowState::Tube { .. } => None,
        }
    }
}

impl FlowSpec {
    /// `λ1 = 2, λ2 = 5, λ3 = 1`, unit tube time, reference map.
    pub fn reference() -> Self {
        Self {
            lambda1: 2.0,
            lambda2: 5.0,
            lambda3: 1.0,
            tube_time: 1.0,
            map: LorenzMapSpec::reference(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        let l = [self.lambda1, self.lambda2, self.lambda3, self.tube_time];
        if !l.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Parameter("rates and tube time must be positive".into()));
        }
        if !(self.lambda3 < self.lambda1 && self.lambda1 < self.lambda2) {
            return Err(Error::Parameter(format!(
                "need lambda3 < lambda1 < lambda2, got {}, {}, {}",
                self.lambda3, self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }

    /// Time for a linear state with first coordinate `x != 0` to reach the
    /// side face.
    pub fn exit_time(&self, x: f64) -> f64 {
        (-x.abs().ln() / self.lambda1).max(0.0)
    }

    /// Return time `-ln|x| / λ1 + tube_time` of a section point off `Γ`.
    pub fn return_time(&self, x: f64) -> f64 {
        self.exit_time(x) + self.tube_time
    }

    /// Closed-form linear flow.
    pub fn linear_flow(&self, x: f64, y: f64, z: f64, t: f64) -> Point3 {
        Point3::new(
            x * (self.lambda1 * t).exp(),
            y * (-self.lambda2 * t).exp(),
            z * (-self.lambda3 * t).exp(),
        )
    }

    /// Side-face point `(±1, y|x|^{λ2/λ1}, |x|^{λ3/λ1})` reached from the
    /// section point `p`.
    pub fn exit_map(&self, p: PlanarPoint) -> Result<Point3> {
        let side = Branch::of(p.x)
            .ok_or_else(|| Error::Domain("the singular line never exits".into()))?;
        let a = p.x.abs();
        Ok(Point3::new(
            side.sign(),
            p.y * a.powf(self.lambda2 / self.lambda1),
            a.powf(self.lambda3 / self.lambda1),
        ))
    }

    /// The section point whose linear orbit leaves through the side-face point
    /// `p`: `x0 = ±z_e^{λ1/λ3}`, `y0 = y_e z_e^{-λ2/λ3}`.
    pub fn exit_map_inverse(&self, p: Point3) -> Result<PlanarPoint> {
        if p.x.abs() != 1.0 {
            return Err(Error::Domain(format!("x = {} is not on a side face", p.x)));
        }
        if !(p.z > 0.0 && p.z <= 1.0) {
            return Err(Error::Domain(format!(
                "z_e = {} has no section origin (stable manifold or outside the box)",
                p.z
            )));
        }
        Ok(PlanarPoint::new(
            p.x * p.z.powf(self.lambda1 / self.lambda3),
            p.y * p.z.powf(-self.lambda2 / self.lambda3),
        ))
    }

    /// Section origin of a tube entry, with `y0` clamped to `[-1, 1]`; entries
    /// with `z_e = 0` come from the unstable plane and map to `x0 = 0`.
    pub fn tube_origin(&self, side: Branch, y_e: f64, z_e: f64) -> PlanarPoint {
        if z_e <= 0.0 {
            return PlanarPoint::new(0.0, 0.0);
        }
        let x0 = side.sign() * z_e.powf(self.lambda1 / self.lambda3);
        let y0 = (y_e * z_e.powf(-self.lambda2 / self.lambda3)).clamp(-1.0, 1.0);
        PlanarPoint::new(x0, y0)
    }

    /// Where the tube lands on `Σ`: `L_mu` of the section origin (the cusp
    /// vertex when the origin is on `Γ`).
    pub fn tube_target(&self, mu: f64, side: Branch, y_e: f64, z_e: f64) -> PlanarPoint {
        let o = self.tube_origin(side, y_e, z_e);
        self.map.map_mu_on(mu, side, o)
    }

    fn tube_corners(&self, mu: f64, side: Branch, y_e: f64, z_e: f64) -> [Point3; 5] {
        let t = self.tube_target(mu, side, y_e, z_e);
        let sx = side.sign();
        let out = sx * (1.0 + TUBE_OFFSET);
        let top = 1.0 + TUBE_LIFT;
        [
            Point3::new(sx, y_e, z_e),
            Point3::new(out, y_e, z_e),
            Point3::new(out, t.y, top),
            Point3::new(t.x, t.y, top),
            Point3::new(t.x, t.y, 1.0),
        ]
    }

    /// Position at progress `s` along a tube; each quarter of `s` covers one
    /// polyline piece.
    pub fn tube_point(&self, mu: f64, side: Branch, y_e: f64, z_e: f64, s: f64) -> Point3 {
        let c = self.tube_corners(mu, side, y_e, z_e);
        let u = (s.clamp(0.0, 1.0) * 4.0).min(4.0);
        let k = (u.floor() as usize).min(3);
        Point3::lerp(c[k], c[k + 1], u - k as f64)
    }

    /// Upper bound on the speed along any tube.
    pub fn tube_speed_bound(&self) -> f64 {
        // longest piece: across the top, at most 2 + TUBE_OFFSET; the rising
        // piece spans at most 2 in y and 1 + TUBE_LIFT in z
        let rise = (4.0f64 + (1.0 + TUBE_LIFT).powi(2)).sqrt();
        let longest = (2.0 + TUBE_OFFSET).max(rise).max(TUBE_OFFSET).max(TUBE_LIFT);
        4.0 * longest / self.tube_time
    }

    /// Upper bound on the speed anywhere in the trapping region.
    pub fn speed_bound(&self) -> f64 {
        let lin = (self.lambda1.powi(2) + self.lambda2.powi(2) + self.lambda3.powi(2)).sqrt();
        lin.max(self.tube_speed_bound())
    }

    pub fn project(&self, mu: f64, s: &FlowState) -> Point3 {
        match *s {
            FlowState::Linear { x, y, z } => Point3::new(x, y, z),
            FlowState::StableManifold { y, z } => Point3::new(0.0, y, z),
            FlowState::Tube { side, y_e, z_e, s } => self.tube_point(mu, side, y_e, z_e, s),
        }
    }

    /// Time until the state next arrives on `Σ`, if it ever does.
    pub fn time_to_sigma(&self, s: &FlowState) -> Option<f64> {
        match *s {
            FlowState::Linear { x, .. } => Some(self.exit_time(x) + self.tube_time),
            FlowState::Tube { s, .. } => Some((1.0 - s) * self.tube_time),
            FlowState::StableManifold { .. } => None,
        }
    }

    /// Time until a linear state reaches the side face.
    pub fn time_to_side(&self, s: &FlowState) -> Option<f64> {
        match *s {
            FlowState::Linear { x, .. } => Some(self.exit_time(x)),
            _ => None,
        }
    }

    pub fn in_trapping_region(&self, s: &FlowState) -> bool {
        let unit = |v: f64| v.abs() <= 1.0;
        match *s {
            FlowState::Linear { x, y, z } => unit(x) && unit(y) && (0.0..=1.0).contains(&z),
            FlowState::StableManifold { y, z } => unit(y) && (0.0..=1.0).contains(&z),
            FlowState::Tube { y_e, z_e, s, .. } => {
                unit(y_e) && (0.0..=1.0).contains(&z_e) && (0.0..=1.0).contains(&s)
            }
        }
    }

    /// Flows a state for time `t` without domain checks.
    pub fn advance(&self, mu: f64, state: FlowState, t: f64) -> FlowState {
        let mut st = state;
        let mut left = t;
        loop {
            match st {
                FlowState::StableManifold { y, z } => {
                    let p = self.linear_flow(0.0, y, z, left);
                    return FlowState::StableManifold { y: p.y, z: p.z };
                }
                FlowState::Linear { x, y, z } => {
                    let te = self.exit_time(x);
                    if left < te {
                        let p = self.linear_flow(x, y, z, left);
                        return FlowState::Linear {
                            x: p.x.clamp(-1.0, 1.0),
                            y: p.y,
                            z: p.z,
                        };
                    }
                    let p = self.linear_flow(x, y, z, te);
                    let side = Branch::of(x).unwrap();
                    st = FlowState::Tube { side, y_e: p.y, z_e: p.z, s: 0.0 };
                    left -= te;
                }
                FlowState::Tube { side, y_e, z_e, s } => {
                    let rest = (1.0 - s) * self.tube_time;
                    // arrivals within rounding of the tube end snap onto Σ
                    if left < rest - HANDOFF_SNAP * self.tube_time {
                        return FlowState::Tube {
                            side,
                            y_e,
                            z_e,
                            s: s + left / self.tube_time,
                        };
                    }
                    left = (left - rest).max(0.0);
                    let target = self.tube_target(mu, side, y_e, z_e);
                    st = FlowState::on_section(target);
                    if left == 0.0 {
                        return st;
                    }
                }
            }
        }
    }
}

/// `φ_mu(state, t)` for `t >= 0`.
pub fn flow_evaluate(fs: &FlowSpec, mu: f64, state: FlowState, t: f64) -> Result<FlowState> {
    fs.map.check_mu(mu)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("flow time {t} must be finite and non-negative")));
    }
    if !fs.in_trapping_region(&state) {
        return Err(Error::Domain(format!("{state:?} is outside the trapping region")));
    }
    Ok(fs.advance(mu, state, t))
}

pub fn exit_map_inverse(fs: &FlowSpec, p: Point3) -> Result<PlanarPoint> {
    fs.exit_map_inverse(p)
}

/// First return to `Σ` of a section point off `Γ`, with its return time.
pub fn first_return(fs: &FlowSpec, mu: f64, p: PlanarPoint) -> Result<(PlanarPoint, f64)> {
    fs.map.check_mu(mu)?;
    if p.on_gamma() {
        return Err(Error::Domain("points of Γ flow into the saddle and never return".into()));
    }
    if !p.in_section() {
        return Err(Error::Domain(format!("({}, {}) is not in the section", p.x, p.y)));
    }
    let tau = fs.return_time(p.x);
    let e = fs.exit_map(p)?;
    let side = Branch::of(p.x).unwrap();
    Ok((fs.tube_target(mu, side, e.y, e.z), tau))
}

/// `τ̂`: one sixth of the smallest return time over a boundary grid of `Σ`
/// and the shifts `0` and `mu0`, so no orbit from `Σ` meets `Σ` again within
/// `5 τ̂`.
pub fn derive_tau_hat(fs: &FlowSpec, mu0: f64) -> f64 {
    const GRID: usize = 64;
    let mut min_tau = f64::INFINITY;
    for mu in [0.0, mu0] {
        for i in 0..=GRID {
            let v = -1.0 + 2.0 * i as f64 / GRID as f64;
            let boundary = [
                PlanarPoint::new(1.0, v),
                PlanarPoint::new(-1.0, v),
                PlanarPoint::new(v, 1.0),
                PlanarPoint::new(v, -1.0),
            ];
            for p in boundary {
                if let Ok((_, tau)) = first_return(fs, mu, p) {
                    min_tau = min_tau.min(tau);
                }
            }
        }
    }
    min_tau / 6.0
}

/// Projected distance between two states (possibly under different shifts).
pub fn state_distance(fs: &FlowSpec, mu_a: f64, a: &FlowState, mu_b: f64, b: &FlowState) -> f64 {
    fs.project(mu_a, a).dist(&fs.project(mu_b, b))
}

/// `Π ∪ tube+ ∪ tube-` as a region of `ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingRegion {
    pub fs: FlowSpec,
}

impl TrappingRegion {
    pub fn new(fs: FlowSpec) -> Self {
        Self { fs }
    }

    fn boxes() -> [(Point3, Point3); 4] {
        let o = 1.0 + TUBE_OFFSET;
        let t = 1.0 + TUBE_LIFT;
        [
            (Point3::new(-1.0, -1.0, 0.0), Point3::new(1.0, 1.0, 1.0)),
            (Point3::new(1.0, -1.0, 0.0), Point3::new(o, 1.0, t)),
            (Point3::new(-o, -1.0, 0.0), Point3::new(-1.0, 1.0, t)),
            (Point3::new(-o, -1.0, 1.0), Point3::new(o, 1.0, t)),
        ]
    }

    /// Distance from a point to the region (0 inside).
    pub fn distance(&self, p: &Point3) -> f64 {
        Self::boxes()
            .iter()
            .map(|(lo, hi)| {
                let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
                let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
                let dz = (lo.z - p.z).max(0.0).max(p.z - hi.z);
                (dx * dx + dy * dy + dz * dz).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_point(&self, p: &Point3) -> bool {
        self.distance(p) == 0.0
    }

    pub fn contains_state(&self, mu: f64, s: &FlowState) -> bool {
        self.fs.in_trapping_region(s) && self.contains_point(&self.fs.project(mu, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: Point3,
    pub mode: &'static str,
}

/// `n + 1` evenly spaced samples of `φ_mu(state, [0, t_max])`.
pub fn sample_trajectory(
    fs: &FlowSpec,
    mu: f64,
    state: FlowState,
    t_max: f64,
    n: usize,
) -> Result<Vec<TrajectorySample>> {
    let n = n.max(1);
    (0..=n)
        .map(|k| {
            let t = t_max * k as f64 / n as f64;
            let s = flow_evaluate(fs, mu, state, t)?;
            Ok(TrajectorySample {
                t,
                point: fs.project(mu, &s),
                mode: s.mode_name(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn fs() -> FlowSpec {
        FlowSpec::reference()
    }

    #[test]
    fn side_exit_closed_form() {
        let f = fs();
        let (x0, y0) = (0.3f64, -0.4f64);
        let t = -x0.ln() / f.lambda1;
        let s = f.advance(0.0, FlowState::linear(x0, y0, 1.0), t);
        match s {
            FlowState::Tube { side, y_e, z_e, s } => {
                assert_eq!(side, Branch::Positive);
                assert!(s.abs() < 1e-12);
                assert!((y_e - y0 * x0.powf(2.5)).abs() < 1e-14);
                assert!((z_e - x0.powf(0.5)).abs() < 1e-14);
            }
            other => {
                // rounding may stop just short of the face
                let p = f.project(0.0, &other);
                assert!((p.x - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let f = fs();
        let states = [
            FlowState::linear(0.2, 0.1, 0.7),
            FlowState::Tube { side: Branch::Negative, y_e: 0.01, z_e: 0.3, s: 0.4 },
            FlowState::StableManifold { y: 0.2, z: 0.5 },
        ];
        for s in states {
            assert_eq!(flow_evaluate(&f, 0.01, s, 0.0).unwrap(), s);
        }
    }

    #[test]
    fn stable_manifold_decays() {
        let f = fs();
        let s = FlowState::on_section(PlanarPoint::new(0.0, 0.8));
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let p = f.project(0.0, &f.advance(0.0, s, k as f64 * 0.5));
            let r = p.dist(&Point3::default());
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn exit_inverse_round_trip_and_fixtures() {
        let f = fs();
        let mut rng = seeds::rng(1);
        for _ in 0..1000 {
            let p = PlanarPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if p.x == 0.0 {
                continue;
            }
            let e = f.exit_map(p).unwrap();
            let back = f.exit_map_inverse(e).unwrap();
            assert!(back.dist(&p) < 1e-10, "{p:?} -> {back:?}");
        }
        assert_eq!(f.exit_map_inverse(Point3::new(-1.0, 0.3, 1.0)).unwrap().x, -1.0);
        let q = f.exit_map_inverse(Point3::new(1.0, 0.0, 0.25)).unwrap();
        assert!((q.x - 0.0625).abs() < 1e-15);
        assert!(f.exit_map_inverse(Point3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn first_return_is_the_map() {
        let f = fs();
        let mut rng = seeds::rng(2);
        for mu in [0.0, 0.005, f.map.mu0] {
            for _ in 0..1000 {
                let p = PlanarPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.x == 0.0 {
                    continue;
                }
                let (q, tau) = first_return(&f, mu, p).unwrap();
                let l = f.map.eval_map_mu(mu, p).unwrap();
                assert!(q.dist(&l) < 1e-9);
                assert!((tau - (-p.x.abs().ln() / 2.0 + 1.0)).abs() < 1e-12);
            }
        }
        assert!(first_return(&f, 0.0, PlanarPoint::new(0.0, 0.1)).is_err());
        let (_, tau) = first_return(&f, 0.0, PlanarPoint::new(1.0, 0.0)).unwrap();
        assert_eq!(tau, f.tube_time);
    }

    #[test]
    fn tau_hat_is_a_sixth_of_tube_time() {
        let f = fs();
        let t = derive_tau_hat(&f, f.map.mu0);
        assert!((t - f.tube_time / 6.0).abs() < 1e-15);
        assert_eq!(derive_tau_hat(&f, 0.0), t);
    }

    #[test]
    fn semigroup_across_handoffs() {
        let f = fs();
        let mut rng = seeds::rng(3);
        for _ in 0..2000 {
            let s = FlowState::linear(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..=1.0),
            );
            let (t1, t2) = (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
            let a = f.project(0.01, &f.advance(0.01, s, t1 + t2));
            let b = f.project(0.01, &f.advance(0.01, f.advance(0.01, s, t1), t2));
            assert!(a.dist(&b) < 1e-9, "{s:?} {t1} {t2}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn trapped_states_stay_trapped() {
        let f = fs();
        let region = TrappingRegion::new(f);
        let horizon = 100.0 * derive_tau_hat(&f, f.map.mu0);
        let mut rng = seeds::rng(4);
        for _ in 0..1000 {
            let s = FlowState::linear(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..=1.0),
            );
            for k in 0..=40 {
                let st = f.advance(0.0, s, horizon * k as f64 / 40.0);
                assert!(region.contains_state(0.0, &st), "{st:?}");
            }
        }
    }

    #[test]
    fn linear_mode_expands_x_and_ignores_mu() {
        let f = fs();
        let s = FlowState::linear(0.01, 0.5, 0.9);
        let mut prev = 0.01;
        for k in 1..20 {
            let st = f.advance(0.0, s, 0.1 * k as f64);
            let x = f.project(0.0, &st).x.abs();
            assert!(x > prev);
            prev = x;
            assert_eq!(f.advance(0.0, s, 0.1 * k as f64), f.advance(0.02, s, 0.1 * k as f64));
        }
    }

    #[test]
    fn validation_and_json() {
        let mut f = fs();
        f.validate().unwrap();
        let j = serde_json::to_value(f).unwrap();
        assert_eq!(j["lambda1"], 2.0);
        assert_eq!(j["map"]["alpha"]["c"], 1.95);
        f.lambda1 = 6.0;
        assert!(f.validate().is_err());
    }
}
