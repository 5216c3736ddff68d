use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` of the expanding coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn centered(center: f64, radius: f64) -> Self {
        Self::new(center - radius, center + radius)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn interior_contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// `other ⊂ self` up to `slack`.
    pub fn contains_interval(&self, other: &Interval, slack: f64) -> bool {
        other.lo >= self.lo - slack && other.hi <= self.hi + slack
    }

    /// Smallest gap between the endpoints of `other` and those of `self`;
    /// positive when `other` sits strictly inside.
    pub fn containment_slack(&self, other: &Interval) -> f64 {
        (other.lo - self.lo).min(self.hi - other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Largest distance from `x` to a point of the interval.
    pub fn max_distance_to(&self, x: f64) -> f64 {
        (x - self.lo).abs().max((self.hi - x).abs())
    }

    pub fn mirrored(&self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

/// Whether `shifted` is obtained from `base` by a `(gamma, eta)` right-hand-side
/// shift: both endpoints move right by an amount in `[gamma, eta]`.
pub fn verify_rhs_shift(base: &Interval, shifted: &Interval, gamma: f64, eta: f64) -> bool {
    let dl = shifted.lo - base.lo;
    let dh = shifted.hi - base.hi;
    gamma <= dl && dl <= eta && gamma <= dh && dh <= eta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_is_accepted() {
        let l = Interval::new(0.2, 0.3);
        assert!(verify_rhs_shift(&l, &l, 0.0, 0.0));
        assert!(verify_rhs_shift(&l, &l, 0.0, 1.0));
    }

    #[test]
    fn shift_past_upper_bound_is_rejected() {
        let l = Interval::new(0.25, 0.375);
        let eta = 0.0625;
        let s = Interval::new(l.lo + eta + 1e-9, l.hi + eta + 1e-9);
        assert!(!verify_rhs_shift(&l, &s, 0.0, eta));
        let t = Interval::new(l.lo + eta, l.hi + 0.5 * eta);
        assert!(verify_rhs_shift(&l, &t, 0.0, eta));
        // moving left is never a right-hand shift
        let u = Interval::new(l.lo - 1e-12, l.hi);
        assert!(!verify_rhs_shift(&l, &u, 0.0, eta));
    }

    #[test]
    fn geometry() {
        let l = Interval::centered(0.5, 0.1);
        assert!((l.len() - 0.2).abs() < 1e-15);
        assert_eq!(l.center(), 0.5);
        assert!(l.contains_interval(&Interval::new(0.45, 0.55), 0.0));
        assert!(l.intersect(&Interval::new(0.7, 0.8)).is_none());
        assert_eq!(l.mirrored(), Interval::new(-0.6, -0.4));
    }
}
