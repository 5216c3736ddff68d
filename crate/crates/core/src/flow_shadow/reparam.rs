//! Time reparametrization between a chain and the true orbit shadowing it.
//!
//! Knots pair chain times with true times at matching events of each
//! passage: the crossing of Σ, the end of the descent towards the saddle,
//! the start of the ascent to the side face, and the side exit. Between
//! knots `h` is a monotone cubic (Fritsch–Carlson), so it is strictly
//! increasing and `C¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowSpec, FlowState};
use crate::map::PlanarPoint;

use super::chain::FlowPseudoOrbit;
use super::crossing::CrossingSequence;

/// Fraction of the shorter descent (ascent) matched at unit speed.
const MATCHED_FRACTION: f64 = 0.75;
/// Event knots closer than this (in t or in h) to the previous knot are
/// dropped: a near-vertical or near-flat knot interval makes the neighbouring
/// interior slopes approach three times their secants.
const MIN_KNOT_GAP: f64 = 1e-6;

/// A true orbit of the unshifted flow, restarted at its section points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueOrbit {
    /// `z_i`; the last one may lie on the singular line.
    pub points: Vec<PlanarPoint>,
    /// `S_i`, the time at which the orbit is at `z_i`.
    pub times: Vec<f64>,
}

impl TrueOrbit {
    pub fn from_points(fs: &FlowSpec, points: Vec<PlanarPoint>) -> Self {
        let mut times = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (i, p) in points.iter().enumerate() {
            times.push(s);
            if i + 1 < points.len() {
                s += fs.return_time(p.x);
            }
        }
        Self { points, times }
    }

    /// `phi(z, s)`, evaluated from the last section point before `s`.
    pub fn state_at(&self, fs: &FlowSpec, s: f64) -> FlowState {
        let i = self.times.partition_point(|&t| t <= s).saturating_sub(1);
        let start = FlowState::on_section(self.points[i]);
        fs.advance(0.0, start, (s - self.times[i]).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparametrization {
    pub knots_t: Vec<f64>,
    pub knots_h: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Knot index of every crossing.
    pub crossing_knots: Vec<usize>,
}

impl Reparametrization {
    /// Monotone C¹ cubic through strictly increasing knots.
    pub fn from_knots(t: Vec<f64>, h: Vec<f64>, crossing_knots: Vec<usize>) -> Result<Self> {
        if t.len() != h.len() || t.is_empty() {
            return Err(Error::Parameter("knot vectors must be non-empty and equal".into()));
        }
        for k in 1..t.len() {
            if !(t[k] > t[k - 1] && h[k] > h[k - 1]) {
                return Err(Error::NonMonotoneKnots { index: k });
            }
        }
        let n = t.len();
        if n == 1 {
            return Ok(Self { knots_t: t, knots_h: h, slopes: vec![1.0], crossing_knots });
        }
        let w: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (h[k + 1] - h[k]) / w[k]).collect();
        let mut d = vec![0.0; n];
        // interior slope: secant over both neighbouring intervals, so a very
        // short interval does not tilt a long neighbour; capped at 3 min(m),
        // which keeps every cubic monotone
        for k in 1..n - 1 {
            let across = (h[k + 1] - h[k - 1]) / (w[k] + w[k - 1]);
            d[k] = across.min(3.0 * m[k - 1].min(m[k]));
        }
        d[0] = m[0];
        d[n - 1] = m[n - 2];
        Ok(Self { knots_t: t, knots_h: h, slopes: d, crossing_knots })
    }

    pub fn identity(t_end: f64) -> Self {
        Self::from_knots(vec![0.0, t_end.max(1.0)], vec![0.0, t_end.max(1.0)], vec![0]).unwrap()
    }

    fn locate(&self, t: f64) -> usize {
        self.knots_t.partition_point(|&k| k <= t).saturating_sub(1).min(self.knots_t.len().saturating_sub(2))
    }

    /// `h(t)`; linear with unit slope beyond the last knot.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots_t.len();
        let last = n - 1;
        if n == 1 || t >= self.knots_t[last] {
            return self.knots_h[last] + (t - self.knots_t[last]);
        }
        let k = self.locate(t);
        let w = self.knots_t[k + 1] - self.knots_t[k];
        let s = (t - self.knots_t[k]) / w;
        let (y0, y1, d0, d1) = (self.knots_h[k], self.knots_h[k + 1], self.slopes[k], self.slopes[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * w * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * w * d1
    }

    /// Quadratic `h'` on knot interval `k` in the local variable.
    fn derivative_coeffs(&self, k: usize) -> [f64; 3] {
        let w = self.knots_t[k + 1] - self.knots_t[k];
        let m = (self.knots_h[k + 1] - self.knots_h[k]) / w;
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        [d0, 6.0 * m - 4.0 * d0 - 2.0 * d1, -6.0 * m + 3.0 * d0 + 3.0 * d1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.knots_t.len();
        if n == 1 || t >= self.knots_t[n - 1] {
            return 1.0;
        }
        let k = self.locate(t);
        let s = (t - self.knots_t[k]) / (self.knots_t[k + 1] - self.knots_t[k]);
        let [c, b, a] = self.derivative_coeffs(k);
        a * s * s + b * s + c
    }

    /// Largest `h'` on `[a, b]`.
    pub fn max_slope(&self, a: f64, b: f64) -> f64 {
        let n = self.knots_t.len();
        let mut best = self.derivative(a).max(self.derivative(b));
        if n == 1 {
            return best.max(1.0);
        }
        if b > self.knots_t[n - 1] {
            best = best.max(1.0);
        }
        let k0 = self.locate(a);
        let k1 = self.locate(b.min(self.knots_t[n - 1]));
        for k in k0..=k1 {
            let (t0, t1) = (self.knots_t[k], self.knots_t[k + 1]);
            let lo = ((a.max(t0) - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let hi = ((b.min(t1) - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let [c, bb, aa] = self.derivative_coeffs(k);
            let f = |s: f64| aa * s * s + bb * s + c;
            best = best.max(f(lo)).max(f(hi));
            if aa < 0.0 {
                let v = -bb / (2.0 * aa);
                if v > lo && v < hi {
                    best = best.max(f(v));
                }
            }
        }
        best
    }

    pub fn min_knot_slope(&self) -> f64 {
        self.slopes.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Pivot (`|x| = z`) and side-exit times of the chain between two crossings.
fn chain_passage(
    fs: &FlowSpec,
    orbit: &FlowPseudoOrbit,
    starts: &[f64],
    n_from: usize,
    n_to: usize,
    c_from: f64,
    c_to: f64,
) -> (f64, f64) {
    let mut pivot = None;
    let mut exit = None;
    let ratio = fs.lambda1 + fs.lambda3;
    for n in n_from..=n_to.min(orbit.durations.len().saturating_sub(1)) {
        if let FlowState::Linear { x, z, .. } = orbit.states[n] {
            let (t0, d) = (starts[n], orbit.durations[n]);
            let floor = (c_from - t0).max(0.0);
            if pivot.is_none() {
                let p = ((z / x.abs()).ln() / ratio).max(floor);
                if p <= d {
                    pivot = Some(t0 + p);
                }
            }
            let e = fs.exit_time(x);
            if e <= d && t0 + e >= c_from && t0 + e <= c_to {
                exit = Some(t0 + e);
            }
        }
    }
    let exit = exit.unwrap_or_else(|| (c_to - fs.tube_time).max(c_from));
    let pivot = pivot.unwrap_or(exit).min(exit);
    (pivot, exit)
}

/// Knots matching each passage of the chain with the passage of the true
/// orbit from `true_points[i]`.
pub fn build_reparametrization(
    fs: &FlowSpec,
    orbit: &FlowPseudoOrbit,
    cs: &CrossingSequence,
    true_orbit: &TrueOrbit,
) -> Result<Reparametrization> {
    if true_orbit.points.len() != cs.len() {
        return Err(Error::Parameter(format!(
            "{} crossings but {} true section points",
            cs.len(),
            true_orbit.points.len()
        )));
    }
    let starts = orbit.start_times();
    let mut kt: Vec<f64> = Vec::new();
    let mut kh: Vec<f64> = Vec::new();
    let mut is_crossing: Vec<bool> = Vec::new();
    let ratio = fs.lambda1 / (fs.lambda1 + fs.lambda3);

    let separated = |t: f64, h: f64, lt: f64, lh: f64| t - lt >= MIN_KNOT_GAP && h - lh >= MIN_KNOT_GAP;
    let mut push = |t: f64, h: f64, crossing: bool, kt: &mut Vec<f64>, kh: &mut Vec<f64>| -> Result<()> {
        if crossing {
            while let (Some(&lt), Some(&lh)) = (kt.last(), kh.last()) {
                if separated(t, h, lt, lh) {
                    break;
                }
                if *is_crossing.last().unwrap() {
                    // two crossings are both kept when merely close
                    if t > lt && h > lh {
                        break;
                    }
                    return Err(Error::NonMonotoneKnots { index: kt.len() });
                }
                kt.pop();
                kh.pop();
                is_crossing.pop();
            }
        } else if let (Some(&lt), Some(&lh)) = (kt.last(), kh.last()) {
            if !separated(t, h, lt, lh) {
                return Ok(());
            }
        }
        kt.push(t);
        kh.push(h);
        is_crossing.push(crossing);
        Ok(())
    };

    let c = &cs.crossings;
    for i in 0..c.len() {
        let s_i = true_orbit.times[i];
        push(c[i].time, s_i, true, &mut kt, &mut kh)?;
        if i + 1 == c.len() {
            break;
        }
        let z = true_orbit.points[i];
        let t_true = fs.exit_time(z.x);
        let p_true = ratio * t_true;
        let (p_c, e_c) = chain_passage(fs, orbit, &starts, c[i].n, c[i + 1].n, c[i].time, c[i + 1].time);
        let d = MATCHED_FRACTION * (p_c - c[i].time).min(p_true);
        if d > 0.0 {
            push(c[i].time + d, s_i + d, false, &mut kt, &mut kh)?;
        }
        let a = MATCHED_FRACTION * (e_c - p_c).min(t_true - p_true);
        if a > 0.0 {
            push(e_c - a, s_i + t_true - a, false, &mut kt, &mut kh)?;
        }
        push(e_c, s_i + t_true, false, &mut kt, &mut kh)?;
    }
    drop(push);
    let crossing_knots = is_crossing_indices(&kt, c.iter().map(|x| x.time));
    Reparametrization::from_knots(kt, kh, crossing_knots)
}

fn is_crossing_indices(kt: &[f64], times: impl Iterator<Item = f64>) -> Vec<usize> {
    times.filter_map(|t| kt.iter().position(|&k| k == t)).collect()
}
