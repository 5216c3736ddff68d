//! CSV and JSON exports. Floats are written with 17 significant digits so
//! they round-trip exactly.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flow::TrajectorySample;
use crate::flow_shadow::{CrossingSequence, FlowConstants, FlowShadowReport, InterpolatedChain};
use crate::map::{LorenzMapSpec, PlanarPoint};
use crate::shadow1d::{PseudoOrbit1D, ShadowResult1D};
use crate::shadow2d::PseudoOrbit2D;

/// First 16 hex digits of the SHA-256 of the JSON encoding of `v`.
pub fn json_fingerprint<T: Serialize + ?Sized>(v: &T) -> String {
    let json = serde_json::to_string(v).expect("value serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// `v` in scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `n, x_n, alpha_n_z, abs_error`.
pub fn write_orbit_1d_csv<W: Write>(w: &mut W, pseudo: &PseudoOrbit1D, shadow: &ShadowResult1D) -> io::Result<()> {
    writeln!(w, "n,x_n,alpha_n_z,abs_error")?;
    for (n, (x, a)) in pseudo.points.iter().zip(&shadow.orbit).enumerate() {
        writeln!(w, "{n},{},{},{}", fmt_f64(*x), fmt_f64(*a), fmt_f64((a - x).abs()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary1D {
    pub max_error: f64,
    pub epsilon1: f64,
    pub n_steps: usize,
    pub seed: u64,
}

/// Columns `n, x_n, y_n, Lx_n, Ly_n, err_n`, where `(Lx_n, Ly_n)` is
/// `L^n(z)`.
pub fn write_orbit_2d_csv<W: Write>(w: &mut W, pseudo: &PseudoOrbit2D, orbit: &[PlanarPoint]) -> io::Result<()> {
    writeln!(w, "n,x_n,y_n,Lx_n,Ly_n,err_n")?;
    for (n, (p, q)) in pseudo.points.iter().zip(orbit).enumerate() {
        writeln!(
            w,
            "{n},{},{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(q.x),
            fmt_f64(q.y),
            fmt_f64(p.dist(q))
        )?;
    }
    Ok(())
}

/// Columns `n, x_n, y_n, Lx_n, Ly_n, err_n` for a pseudo-orbit alone:
/// `(Lx_n, Ly_n) = L_mu(p_n)` and `err_n = |L_mu(p_n) - p_{n+1}|` (empty on
/// the last row and on the singular line).
pub fn write_steps_csv<W: Write>(w: &mut W, spec: &LorenzMapSpec, pseudo: &PseudoOrbit2D) -> io::Result<()> {
    writeln!(w, "n,x_n,y_n,Lx_n,Ly_n,err_n")?;
    for (n, p) in pseudo.points.iter().enumerate() {
        let (lx, ly, err) = match (spec.eval_map_mu(pseudo.mu, *p), pseudo.points.get(n + 1)) {
            (Ok(l), next) => (
                fmt_f64(l.x),
                fmt_f64(l.y),
                next.map(|q| fmt_f64(l.dist(q))).unwrap_or_default(),
            ),
            (Err(_), _) => Default::default(),
        };
        writeln!(w, "{n},{},{},{lx},{ly},{err}", fmt_f64(p.x), fmt_f64(p.y))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub bound: f64,
    pub delta: f64,
    pub seed: u64,
    pub orbit_file: String,
}

/// Columns `segment, t, x, y, z, is_connector`; connector rows give both
/// endpoints at the step's end time.
pub fn write_chain_csv<W: Write>(w: &mut W, chain: &InterpolatedChain) -> io::Result<()> {
    writeln!(w, "segment,t,x,y,z,is_connector")?;
    for (seg, con) in chain.segments.iter().zip(&chain.connectors) {
        for (t, p) in &seg.samples {
            writeln!(
                w,
                "{},{},{},{},{},0",
                seg.index,
                fmt_f64(seg.start_time + t),
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(p.z)
            )?;
        }
        let t = fmt_f64(seg.start_time + seg.duration);
        for p in [con.from, con.to] {
            writeln!(w, "{},{t},{},{},{},1", seg.index, fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z))?;
        }
    }
    Ok(())
}

/// Columns `i, n_i, y_x, y_y, provenance`.
pub fn write_crossings_csv<W: Write>(w: &mut W, cs: &CrossingSequence) -> io::Result<()> {
    writeln!(w, "i,n_i,y_x,y_y,provenance")?;
    for (i, c) in cs.crossings.iter().enumerate() {
        writeln!(w, "{i},{},{},{},{}", c.n, fmt_f64(c.point.x), fmt_f64(c.point.y), c.kind.name())?;
    }
    Ok(())
}

/// Columns `t, x, y, z, mode`.
pub fn write_trajectory_csv<W: Write>(w: &mut W, samples: &[TrajectorySample]) -> io::Result<()> {
    writeln!(w, "t,x,y,z,mode")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.point.x),
            fmt_f64(s.point.y),
            fmt_f64(s.point.z),
            s.mode
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReportJson {
    pub epsilon: f64,
    pub sup_distance: f64,
    pub pass: bool,
    pub constants_fingerprint: String,
}

impl FlowReportJson {
    pub fn new(report: &FlowShadowReport, constants: &FlowConstants) -> Self {
        Self {
            epsilon: report.epsilon,
            sup_distance: report.sup_distance,
            pass: report.pass,
            constants_fingerprint: constants.fingerprint(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn one_dimensional_csv_has_header_and_rows() {
        let pseudo = PseudoOrbit1D { points: vec![0.5, -0.25], delta: 0.0, mu: 0.0, terminal_gamma: false };
        let shadow = ShadowResult1D {
            z: 0.5,
            orbit: vec![0.5, -0.125],
            max_error: 0.125,
            gamma_exact: false,
            terminal_index: None,
            min_abs_before_terminal: 0.125,
            pullback_depth: 1,
            pullback_width: 0.0,
            max_residual: 0.0,
            max_window_error: 0.0,
            epsilon1: 0.01,
        };
        let mut out = Vec::new();
        write_orbit_1d_csv(&mut out, &pseudo, &shadow).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,x_n,alpha_n_z,abs_error");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",1.2500000000000000e-1"));
    }
}
