//! The Lorenz map family `L_mu(x, y) = (alpha(x) - mu x, beta(x, y))` on the
//! square section `[-1, 1]^2`, its admissibility conditions and the derived
//! constants used by the shadowing solvers.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on the partial derivatives of the fibre map.
pub const BETA_DERIVATIVE_BOUND: f64 = 3.0 / (4.0 * SQRT_2);

/// Lower edge of the band that the orbit of `1` must stay in.
pub const BAND_LOW: f64 = 0.8;

/// Absolute accuracy guaranteed by [`LorenzMapSpec::invert_alpha_mu`].
pub const INVERT_TOLERANCE: f64 = 1e-12;

/// Side of the singular line `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn of(x: f64) -> Option<Branch> {
        if x > 0.0 {
            Some(Branch::Positive)
        } else if x < 0.0 {
            Some(Branch::Negative)
        } else {
            None
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Branch {
        match self {
            Branch::Positive => Branch::Negative,
            Branch::Negative => Branch::Positive,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Positive => "positive",
            Branch::Negative => "negative",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expanding coordinate `alpha(x) = sign(x) (c |x|^rho - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpec {
    pub c: f64,
    pub rho: f64,
}

impl AlphaSpec {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        s * (self.c * x.abs().powf(self.rho) - 1.0)
    }

    /// Derivative, which is even in `x`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.c * self.rho * x.abs().powf(self.rho - 1.0)
    }
}

/// Contracting fibre map `beta(x, y) = e_± + d |x| y` on the two halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    pub d: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

impl BetaSpec {
    #[inline]
    pub fn offset(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Positive => self.e_plus,
            Branch::Negative => self.e_minus,
        }
    }

    /// Evaluates on the closure of the half selected by `branch`, so `x = 0`
    /// gives the cusp height.
    #[inline]
    pub fn eval_on(&self, branch: Branch, x: f64, y: f64) -> f64 {
        self.offset(branch) + self.d * x.abs() * y
    }
}

/// A point of the section. It lies on the singular line iff `x == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn on_gamma(&self) -> bool {
        self.x == 0.0
    }

    pub fn in_section(&self) -> bool {
        self.x.abs() <= 1.0 && self.y.abs() <= 1.0
    }

    pub fn dist(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The map family `L_mu` for `mu` in `[0, mu0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzMapSpec {
    pub alpha: AlphaSpec,
    pub beta: BetaSpec,
    pub mu0: f64,
}

impl Default for LorenzMapSpec {
    fn default() -> Self {
        Self::reference()
    }
}

impl LorenzMapSpec {
    /// `c = 1.95, rho = 0.75, d = 0.3, e_± = ±0.65, mu0 = 0.02`.
    pub fn reference() -> Self {
        Self {
            alpha: AlphaSpec { c: 1.95, rho: 0.75 },
            beta: BetaSpec {
                d: 0.3,
                e_plus: 0.65,
                e_minus: -0.65,
            },
            mu0: 0.02,
        }
    }

    /// Structural sanity of the parameters (not the dynamical conditions).
    pub fn validate(&self) -> Result<()> {
        let a = &self.alpha;
        let b = &self.beta;
        let finite = [a.c, a.rho, b.d, b.e_plus, b.e_minus, self.mu0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("non-finite map parameter".into()));
        }
        if !(a.rho > 0.0 && a.rho < 1.0) {
            return Err(Error::Parameter(format!("rho = {} outside (0, 1)", a.rho)));
        }
        if a.c <= 0.0 {
            return Err(Error::Parameter(format!("c = {} must be positive", a.c)));
        }
        if b.d < 0.0 {
            return Err(Error::Parameter(format!("d = {} must be non-negative", b.d)));
        }
        if !(0.0..1.0).contains(&self.mu0) {
            return Err(Error::Parameter(format!("mu0 = {} outside [0, 1)", self.mu0)));
        }
        Ok(())
    }

    pub fn check_mu(&self, mu: f64) -> Result<()> {
        if !(0.0..=self.mu0).contains(&mu) {
            return Err(Error::Parameter(format!(
                "shift {mu} outside [0, {}]",
                self.mu0
            )));
        }
        Ok(())
    }

    /// `alpha_mu(x) = alpha(x) - mu x` without domain checks. At `x = 0` this
    /// returns the positive-side limit `-1`.
    #[inline]
    pub fn alpha_mu(&self, mu: f64, x: f64) -> f64 {
        self.alpha.eval(x) - mu * x
    }

    /// `alpha_mu` on the closure of a branch: at `x = 0` it returns the
    /// one-sided limit `∓1`.
    #[inline]
    pub fn alpha_mu_on(&self, mu: f64, branch: Branch, x: f64) -> f64 {
        if x == 0.0 {
            -branch.sign()
        } else {
            self.alpha_mu(mu, x)
        }
    }

    #[inline]
    pub fn alpha_mu_derivative(&self, mu: f64, x: f64) -> f64 {
        self.alpha.derivative(x) - mu
    }

    pub fn eval_alpha_mu(&self, mu: f64, x: f64) -> Result<f64> {
        self.check_mu(mu)?;
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("alpha is undefined at x = {x}")));
        }
        Ok(self.alpha_mu(mu, x))
    }

    #[inline]
    pub fn map_mu(&self, mu: f64, p: PlanarPoint) -> PlanarPoint {
        let branch = if p.x < 0.0 {
            Branch::Negative
        } else {
            Branch::Positive
        };
        PlanarPoint::new(self.alpha_mu(mu, p.x), self.beta.eval_on(branch, p.x, p.y))
    }

    /// `L_mu` on the closure of one half; on the singular line it returns the
    /// cusp vertex of that half.
    #[inline]
    pub fn map_mu_on(&self, mu: f64, branch: Branch, p: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(
            self.alpha_mu_on(mu, branch, p.x),
            self.beta.eval_on(branch, p.x, p.y),
        )
    }

    pub fn eval_map_mu(&self, mu: f64, p: PlanarPoint) -> Result<PlanarPoint> {
        self.check_mu(mu)?;
        if p.on_gamma() {
            return Err(Error::Domain(format!(
                "the map is undefined on the singular line (y = {})",
                p.y
            )));
        }
        Ok(self.map_mu(mu, p))
    }

    /// Cusp vertex `v_+ = (-1, e_plus)` or `v_- = (1, e_minus)`: the limit of
    /// `L(p)` as `p` approaches the singular line from the given side.
    pub fn vertex(&self, branch: Branch) -> PlanarPoint {
        PlanarPoint::new(-branch.sign(), self.beta.offset(branch))
    }

    /// Upper end of the image of the positive branch, `alpha_mu(1)`.
    pub fn branch_top(&self, mu: f64) -> f64 {
        self.alpha_mu(mu, 1.0)
    }

    /// Solves `alpha(x) = target` on the given branch (unshifted map).
    pub fn invert_alpha_branch(&self, target: f64, branch: Branch) -> Result<f64> {
        self.invert_alpha_mu(0.0, target, branch)
    }

    /// Solves `alpha_mu(x) = target` on the given branch by safeguarded
    /// Newton iteration with a bisection fallback.
    ///
    /// The positive branch maps `(0, 1]` onto `(-1, alpha_mu(1)]`; a target of
    /// exactly `-1` returns the closure point `0`.
    pub fn invert_alpha_mu(&self, mu: f64, target: f64, branch: Branch) -> Result<f64> {
        match branch {
            Branch::Positive => self.invert_positive(mu, target),
            Branch::Negative => self.invert_positive(mu, -target).map(|x| -x),
        }
        .map_err(|_| Error::NoPreimage {
            target,
            branch: branch.name(),
        })
    }

    fn invert_positive(&self, mu: f64, target: f64) -> Result<f64> {
        let top = self.alpha_mu(mu, 1.0);
        if !target.is_finite() || target < -1.0 || target > top + INVERT_TOLERANCE {
            return Err(Error::Domain(String::new()));
        }
        if target == -1.0 {
            return Ok(0.0);
        }
        if target >= top {
            return Ok(1.0);
        }
        let (c, rho) = (self.alpha.c, self.alpha.rho);
        let f = |x: f64| c * x.powf(rho) - 1.0 - mu * x - target;

        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut x = ((target + 1.0) / c).powf(1.0 / rho).clamp(f64::MIN_POSITIVE, 1.0);
        let mut failures = 0;
        let mut last_residual = f64::INFINITY;
        for _ in 0..2000 {
            let r = f(x);
            if r == 0.0 {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(0.5 * (lo + hi));
            }
            let newton_ok = failures < 3;
            let mut next = f64::NAN;
            if newton_ok {
                let slope = c * rho * x.powf(rho - 1.0) - mu;
                let candidate = x - r / slope;
                if candidate > lo && candidate < hi && r.abs() < last_residual {
                    next = candidate;
                } else {
                    failures += 1;
                }
            }
            last_residual = r.abs();
            if next.is_nan() {
                next = 0.5 * (lo + hi);
            } else if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }
}

/// Derived constants for a target accuracy `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConstants {
    pub epsilon: f64,
    pub mu0: f64,
    pub eta0: f64,
    pub epsilon1: f64,
    pub delta: f64,
    /// Shift of the auxiliary map whose pseudo-orbits are shadowed.
    pub mu_hat: f64,
}

impl MapConstants {
    /// `epsilon1 = min{3 mu0, eta0 / 8, epsilon / 64}`, `delta = epsilon1 / 100`,
    /// `mu_hat = epsilon1 / 3`.
    pub fn from_parts(mu0: f64, eta0: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon = {epsilon} outside (0, 1)")));
        }
        let epsilon1 = (3.0 * mu0).min(eta0 / 8.0).min(epsilon / 64.0);
        if !(epsilon1 > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon1 = {epsilon1} is not positive (mu0 = {mu0}, eta0 = {eta0})"
            )));
        }
        Ok(Self {
            epsilon,
            mu0,
            eta0,
            epsilon1,
            delta: epsilon1 / 100.0,
            mu_hat: epsilon1 / 3.0,
        })
    }

    /// The shadowing radius in the expanding coordinate, `8 epsilon1`.
    pub fn shadow_radius(&self) -> f64 {
        8.0 * self.epsilon1
    }
}

pub fn derive_map_constants(spec: &LorenzMapSpec, epsilon: f64) -> Result<MapConstants> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    let eta0 = derive_eta0(spec)?;
    MapConstants::from_parts(spec.mu0, eta0, epsilon)
}

/// The shifts at which conditions and trapping radii are certified.
pub fn certified_shifts(spec: &LorenzMapSpec) -> [f64; 3] {
    [0.0, 0.5 * spec.mu0, spec.mu0]
}

/// Whether the first three images of `[-eta, 0)` under `alpha_mu` stay in
/// `[0.8, 1]` (and, by symmetry, those of `(0, eta]` in `[-1, -0.8]`).
///
/// On this side every image is an interval of the increasing positive
/// branch, so the endpoints decide containment.
pub fn band_containment(spec: &LorenzMapSpec, mu: f64, eta: f64) -> bool {
    // image of [-eta, 0) is [alpha_mu(-eta), 1)
    let mut lo = spec.alpha_mu(mu, -eta);
    let mut hi = 1.0;
    for i in 0..3 {
        if !(lo >= BAND_LOW && hi <= 1.0 && lo <= hi) {
            return false;
        }
        if i < 2 {
            lo = spec.alpha_mu(mu, lo);
            hi = spec.alpha_mu(mu, hi);
        }
    }
    true
}

const ETA_FLOOR: f64 = 1e-6;

/// Largest trapping radius `eta0` for which [`band_containment`] holds for all
/// `eta <= eta0` at every certified shift, found by bisection.
pub fn derive_eta0(spec: &LorenzMapSpec) -> Result<f64> {
    spec.validate()?;
    let shifts = certified_shifts(spec);
    let holds = |eta: f64| shifts.iter().all(|&mu| band_containment(spec, mu, eta));
    if !holds(ETA_FLOOR) {
        return Err(Error::TrappingRadius { floor: ETA_FLOOR });
    }
    let (mut good, mut bad) = (ETA_FLOOR, 1.0);
    if holds(bad) {
        return Ok(1.0 - f64::EPSILON);
    }
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if holds(mid) {
            good = mid;
        } else {
            bad = mid;
        }
        if bad - good <= 1e-15 * bad {
            break;
        }
    }
    // The containment is monotone in eta; confirm on a few smaller radii.
    for k in 1..=8 {
        let eta = good * (k as f64) / 8.0;
        if !holds(eta) {
            return Err(Error::TrappingRadius { floor: eta });
        }
    }
    Ok(good)
}

/// Outcome of one condition at one shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub condition: u8,
    pub mu: f64,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub pass: bool,
    pub grid_n: usize,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    /// Smallest margin of a condition across the certified shifts.
    pub fn margin(&self, condition: u8) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.condition == condition)
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn condition_passes(&self, condition: u8) -> bool {
        self.entries
            .iter()
            .filter(|e| e.condition == condition)
            .all(|e| e.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

/// Checks conditions (1)-(4) at `mu ∈ {0, mu0/2, mu0}`.
///
/// Each margin comes from the closed-form extremum (the derivative of
/// `alpha` is monotone on each branch); a grid of `grid_n` points must agree
/// in sign before a condition passes.
pub fn check_conditions(spec: &LorenzMapSpec, grid_n: usize) -> ConditionReport {
    let grid_n = grid_n.max(1000);
    let a = spec.alpha;
    let b = spec.beta;
    let grid = |i: usize| (i as f64 + 1.0) / grid_n as f64;
    let mut entries = Vec::new();

    for mu in certified_shifts(spec) {
        // (1): expansion, limits and alpha_mu(1) < 1.
        let at_one = spec.alpha_mu(mu, 1.0);
        let expansion = a.c * a.rho - mu - SQRT_2;
        let below_one = 1.0 - at_one;
        // positive branch image stays above -1 iff c x^rho > mu x on (0, 1]
        let above_minus_one = a.c - mu;
        let grid_expansion = (0..grid_n)
            .map(|i| spec.alpha_mu_derivative(mu, grid(i)) - SQRT_2)
            .fold(f64::INFINITY, f64::min);
        let grid_image = (0..grid_n)
            .map(|i| spec.alpha_mu(mu, grid(i)) + 1.0)
            .fold(f64::INFINITY, f64::min);
        let margin = expansion.min(below_one).min(above_minus_one);
        entries.push(ConditionEntry {
            condition: 1,
            mu,
            pass: margin > 0.0 && grid_expansion > 0.0 && grid_image > 0.0,
            margin,
            detail: format!(
                "α(1)={at_one:.6}, min α'−√2={expansion:.6}, 1−α(1)={below_one:.6}"
            ),
        });

        // (2): derivative bound on beta and cusp geometry; mu-independent.
        let deriv = BETA_DERIVATIVE_BOUND - b.d;
        let disjoint = b.e_plus - b.e_minus - 2.0 * b.d;
        let inside = 1.0 - (b.e_plus.abs().max(b.e_minus.abs()) + b.d);
        let side = (grid_n as f64).sqrt().ceil() as usize;
        let mut grid_deriv = f64::INFINITY;
        for i in 0..=side {
            let x = -1.0 + 2.0 * i as f64 / side as f64;
            for j in 0..=side {
                let y = -1.0 + 2.0 * j as f64 / side as f64;
                let worst = (b.d * y.abs()).max(b.d * x.abs());
                grid_deriv = grid_deriv.min(BETA_DERIVATIVE_BOUND - worst);
            }
        }
        let margin = deriv.min(disjoint).min(inside);
        entries.push(ConditionEntry {
            condition: 2,
            mu,
            pass: margin > 0.0 && grid_deriv > 0.0,
            margin,
            detail: format!(
                "d={:.6} vs 3/(4√2)={BETA_DERIVATIVE_BOUND:.6}, cusp gap={disjoint:.6}, image slack={inside:.6}",
                b.d
            ),
        });

        // (3): 0.8 < alpha^2(1) < alpha(1) < 1.
        let second = spec.alpha_mu(mu, at_one);
        let margin = (second - BAND_LOW).min(at_one - second).min(1.0 - at_one);
        entries.push(ConditionEntry {
            condition: 3,
            mu,
            pass: margin > 0.0,
            margin,
            detail: format!("α(1)={at_one:.6}, α²(1)={second:.6}"),
        });

        // (4): alpha' < 2 on (0.8, 1]; the supremum is the limit at 0.8.
        let sup = spec.alpha_mu_derivative(mu, BAND_LOW);
        let grid_max = (0..grid_n)
            .map(|i| BAND_LOW + (1.0 - BAND_LOW) * grid(i))
            .map(|x| spec.alpha_mu_derivative(mu, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = 2.0 - sup;
        entries.push(ConditionEntry {
            condition: 4,
            mu,
            pass: margin > 0.0 && grid_max < 2.0,
            margin,
            detail: format!("sup α' on (0.8,1] = {sup:.6}"),
        });
    }

    ConditionReport {
        pass: entries.iter().all(|e| e.pass),
        grid_n,
        entries,
    }
}
