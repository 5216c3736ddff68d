//! The four subcommands. Each sweep runs its cases on the rayon pool, writes
//! one set of files per case, then writes `records.json` from the main
//! thread.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use lorenz_pssp::export::{self, FlowReportJson, ProbeSummary};
use lorenz_pssp::flow::FlowSpec;
use lorenz_pssp::flow_shadow::{
    derive_flow_constants, falsify_flow_constants, interpolate_chain, run_flow_shadowing,
    FlowConstants, FlowOrbitMode, CHAIN_SAMPLES,
};
use lorenz_pssp::shadow1d::{
    build_interval_chain, check_chain_invariants, generate_pseudo_orbit_1d, solve_shadow_point_1d,
    OrbitMode, ShadowVariant,
};
use lorenz_pssp::shadow2d::{generate_pseudo_orbit_2d, komuro_probe, solve_shadow_point_2d, verify_shadow_2d};
use lorenz_pssp::{check_conditions, derive_eta0, derive_map_constants, LorenzMapSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::Resolved;

const CONDITION_GRID: usize = 100_000;
const FALSIFY_SAMPLES: usize = 1000;
const INVARIANT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub kind: &'static str,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: String,
    pub n_steps: usize,
    pub pass: bool,
    pub max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_x_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_y_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_ray: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
    pub constants: serde_json::Value,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl RunRecord {
    fn new(kind: &'static str, epsilon: f64, seed: u64, mode: String, n_steps: usize) -> Self {
        Self {
            kind,
            epsilon,
            seed,
            mode,
            n_steps,
            pass: false,
            max_error: f64::NAN,
            max_x_error: None,
            max_y_error: None,
            gamma_exact: None,
            terminal_ray: None,
            notice: None,
            constants: serde_json::Value::Null,
            files: Vec::new(),
            error: None,
            wall_time_s: 0.0,
        }
    }

    /// Runs `body`; an error marks the record failed instead of aborting the
    /// sweep.
    fn timed(mut self, body: impl FnOnce(&mut Self) -> Result<()>) -> Self {
        let t = Instant::now();
        if let Err(e) = body(&mut self) {
            self.pass = false;
            self.error = Some(format!("{e:#}"));
        }
        self.wall_time_s = t.elapsed().as_secs_f64();
        self
    }

    fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{status} {} ε={} seed={} mode={} n={} max_error={:.3e}",
            self.kind, self.epsilon, self.seed, self.mode, self.n_steps, self.max_error
        );
        if let Some(e) = &self.error {
            s.push_str(&format!(" error: {e}"));
        }
        if let Some(n) = &self.notice {
            s.push_str(&format!(" ({n})"));
        }
        s
    }
}

#[derive(Serialize)]
struct Index<'a> {
    command: &'a str,
    config_fingerprint: &'a str,
    pass: bool,
    records: &'a [RunRecord],
}

fn finish(r: &Resolved, command: &str, records: &[RunRecord]) -> Result<bool> {
    for rec in records {
        println!("{}", rec.line());
    }
    let pass = !records.is_empty() && records.iter().all(|x| x.pass);
    let index = Index { command, config_fingerprint: &r.fingerprint, pass, records };
    let path = r.out.join("records.json");
    fs::write(&path, serde_json::to_string_pretty(&index)?).with_context(|| format!("writing {}", path.display()))?;
    println!("{} of {} runs passed; records in {}", records.iter().filter(|x| x.pass).count(), records.len(), path.display());
    Ok(pass)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn seeds(r: &Resolved) -> Vec<u64> {
    if r.cfg.seeds.is_empty() {
        vec![0]
    } else {
        r.cfg.seeds.clone()
    }
}

fn modes(r: &Resolved, default: &[&str]) -> Vec<String> {
    if r.cfg.modes.is_empty() {
        default.iter().map(|s| s.to_string()).collect()
    } else {
        r.cfg.modes.clone()
    }
}

fn epsilons(r: &Resolved, default: &[f64]) -> Vec<f64> {
    if r.cfg.epsilons.is_empty() {
        default.to_vec()
    } else {
        r.cfg.epsilons.clone()
    }
}

pub fn check(r: &Resolved) -> Result<bool> {
    let spec = r.cfg.map_spec();
    let report = check_conditions(&spec, CONDITION_GRID);
    println!("{:<4}  {:<10}  {:<13}  {:>13}  detail", "", "μ", "condition", "margin");
    for e in &report.entries {
        println!(
            "{:<4}  μ={:<8.6}  condition ({}): {}  margin={:+.6e}",
            if e.pass { "PASS" } else { "FAIL" },
            e.mu,
            e.condition,
            e.detail,
            e.margin
        );
    }
    if !report.pass {
        println!("conditions fail; constants not derived");
        return Ok(false);
    }
    let eta0 = match derive_eta0(&spec) {
        Ok(v) => v,
        Err(e) => {
            println!("FAIL  eta0: {e}");
            return Ok(false);
        }
    };
    println!("PASS  eta0 = {eta0:.6e}");
    let mut pass = true;
    for eps in epsilons(r, &[0.64, 0.32]) {
        match derive_map_constants(&spec, eps) {
            Ok(k) => println!(
                "PASS  map ε={eps}: epsilon1={:.6e} delta={:.6e} mu_hat={:.6e} 8·epsilon1={:.6e} ≤ ε/8={:.6e}",
                k.epsilon1,
                k.delta,
                k.mu_hat,
                k.shadow_radius(),
                eps / 8.0
            ),
            Err(e) => {
                pass = false;
                println!("FAIL  map ε={eps}: {e}");
            }
        }
    }
    let flow = r.cfg.flow_spec();
    let flow_eps = r.cfg.epsilons.first().copied().unwrap_or(0.6);
    let k = match derive_flow_constants(&flow, flow_eps) {
        Ok(k) => k,
        Err(e) => {
            println!("FAIL  flow constants at ε={flow_eps}: {e}");
            return Ok(false);
        }
    };
    println!("flow constants at ε={flow_eps} (fingerprint {}):", k.fingerprint());
    println!("{}", serde_json::to_string_pretty(&k)?);
    let seed = r.cfg.seeds.first().copied().unwrap_or(1);
    for c in falsify_flow_constants(&flow, &k, FALSIFY_SAMPLES, seed) {
        pass &= c.pass;
        println!(
            "{:<4}  {:<10} worst={:.6e} bound={:.6e} samples={}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.bound,
            c.samples
        );
    }
    Ok(pass)
}

fn map_case(spec: &LorenzMapSpec, eps: f64, seed: u64, mode: OrbitMode, steps: Option<usize>, dir: &Path) -> Vec<RunRecord> {
    let terminal = mode == OrbitMode::GammaTerminal;
    let n = steps.unwrap_or(if terminal { 50 } else { 10_000 });
    let variant = if terminal { ShadowVariant::GammaTerminal } else { ShadowVariant::Infinite };
    let stem = format!("map_eps{eps}_seed{seed}_{mode}");
    let one = RunRecord::new("map-1d", eps, seed, mode.to_string(), n).timed(|rec| {
        let k = derive_map_constants(spec, eps)?;
        rec.constants = serde_json::to_value(k)?;
        let pseudo = generate_pseudo_orbit_1d(spec, &k, n, seed, mode)?;
        let chain = build_interval_chain(spec, &pseudo, &k)?;
        let inv = check_chain_invariants(spec, &chain, &pseudo, INVARIANT_TOL);
        let s = solve_shadow_point_1d(spec, &chain, &pseudo, &k, variant)?;
        rec.max_error = s.max_error;
        rec.gamma_exact = Some(s.gamma_exact);
        rec.pass = inv.ok() && s.max_error <= k.shadow_radius() && k.shadow_radius() <= eps / 8.0 && (!terminal || s.gamma_exact);
        if !inv.ok() {
            rec.error = Some(format!("chain invariants: {}", inv.violations.join("; ")));
        }
        let name = format!("{stem}_1d.csv");
        let mut w = create(dir, &name)?;
        export::write_orbit_1d_csv(&mut w, &pseudo, &s)?;
        w.flush()?;
        rec.files.push(name);
        Ok(())
    });
    let two = RunRecord::new("map-2d", eps, seed, mode.to_string(), n).timed(|rec| {
        let k = derive_map_constants(spec, eps)?;
        rec.constants = serde_json::to_value(k)?;
        let pseudo = generate_pseudo_orbit_2d(spec, &k, n, seed, mode)?;
        let s = solve_shadow_point_2d(spec, &pseudo, &k, variant)?;
        let v = verify_shadow_2d(spec, &pseudo, &s, eps);
        rec.max_error = v.max_error;
        rec.max_x_error = Some(v.max_x_error);
        rec.max_y_error = Some(v.max_y_error);
        rec.gamma_exact = Some(s.shadow_1d.gamma_exact);
        rec.pass = v.pass && v.max_x_error <= eps / 8.0 && v.max_y_error <= 7.0 * eps / 8.0 && (!terminal || s.shadow_1d.gamma_exact);
        let name = format!("{stem}_2d.csv");
        let mut w = create(dir, &name)?;
        export::write_orbit_2d_csv(&mut w, &pseudo, &s.orbit)?;
        w.flush()?;
        rec.files.push(name);
        Ok(())
    });
    vec![one, two]
}

pub fn shadow_map(r: &Resolved) -> Result<bool> {
    let spec = r.cfg.map_spec();
    let modes: Vec<OrbitMode> = modes(r, &["noise", "gamma-crossing"])
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, _>>()?;
    fs::create_dir_all(&r.out)?;
    let mut cases = Vec::new();
    for eps in epsilons(r, &[0.64, 0.32]) {
        for &mode in &modes {
            for seed in seeds(r) {
                cases.push((eps, seed, mode));
            }
        }
    }
    let records: Vec<RunRecord> = cases
        .par_iter()
        .flat_map_iter(|&(eps, seed, mode)| map_case(&spec, eps, seed, mode, r.cfg.n_steps, &r.out))
        .collect();
    finish(r, "shadow-map", &records)
}

fn flow_case(flow: &FlowSpec, k: &FlowConstants, seed: u64, mode: FlowOrbitMode, n: usize, dir: &Path) -> RunRecord {
    RunRecord::new("flow", k.epsilon, seed, mode.to_string(), n).timed(|rec| {
        rec.constants = serde_json::json!({ "fingerprint": k.fingerprint() });
        let run = run_flow_shadowing(flow, k, n, seed, mode)?;
        let rep = &run.report;
        rec.max_error = rep.sup_distance;
        rec.terminal_ray = rep.terminal_ray;
        let ray_ok = match mode {
            FlowOrbitMode::Finite => rep.terminal_ray == Some(true),
            _ => rep.terminal_ray != Some(false),
        };
        rec.pass = rep.pass && rep.h_strictly_increasing && ray_ok;
        let stem = format!("flow_eps{}_seed{seed}_{mode}", k.epsilon);
        let chain = interpolate_chain(flow, &run.orbit, k.eta0, CHAIN_SAMPLES);
        let name = format!("{stem}_chain.csv");
        let mut w = create(dir, &name)?;
        export::write_chain_csv(&mut w, &chain)?;
        w.flush()?;
        rec.files.push(name);
        let name = format!("{stem}_crossings.csv");
        let mut w = create(dir, &name)?;
        export::write_crossings_csv(&mut w, &run.crossings)?;
        w.flush()?;
        rec.files.push(name);
        let name = format!("{stem}_report.json");
        fs::write(dir.join(&name), serde_json::to_string_pretty(&FlowReportJson::new(rep, k))?)?;
        rec.files.push(name);
        Ok(())
    })
}

pub fn shadow_flow(r: &Resolved) -> Result<bool> {
    let flow = r.cfg.flow_spec();
    let modes: Vec<FlowOrbitMode> = modes(r, &["noise", "gamma"])
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, _>>()?;
    let n = r.cfg.n_steps.unwrap_or(12_000);
    fs::create_dir_all(&r.out)?;
    let mut records = Vec::new();
    for eps in epsilons(r, &[0.6]) {
        let k = derive_flow_constants(&flow, eps)?;
        let name = format!("flow_eps{eps}_constants.json");
        fs::write(
            r.out.join(&name),
            serde_json::to_string_pretty(&serde_json::json!({ "fingerprint": k.fingerprint(), "constants": k }))?,
        )?;
        println!("flow constants at ε={eps}: fingerprint {}", k.fingerprint());
        let cases: Vec<(u64, FlowOrbitMode)> =
            modes.iter().flat_map(|&m| seeds(r).into_iter().map(move |s| (s, m))).collect();
        let mut batch: Vec<RunRecord> = cases.par_iter().map(|&(seed, mode)| flow_case(&flow, &k, seed, mode, n, &r.out)).collect();
        for rec in &mut batch {
            rec.constants["constants"] = serde_json::to_value(k)?;
        }
        records.extend(batch);
    }
    finish(r, "shadow-flow", &records)
}

pub fn probe(r: &Resolved, delta: f64, budget: usize) -> Result<bool> {
    let spec = r.cfg.map_spec();
    let eps_star = r.cfg.epsilons.first().copied().unwrap_or(1e-3);
    let n = r.cfg.n_steps.unwrap_or(25);
    fs::create_dir_all(&r.out)?;
    let records: Vec<RunRecord> = seeds(r)
        .par_iter()
        .map(|&seed| {
            RunRecord::new("probe", eps_star, seed, format!("delta={delta}"), n).timed(|rec| {
                let rep = komuro_probe(&spec, eps_star, delta, n, seed, budget)?;
                rec.max_error = rep.bound;
                rec.pass = true;
                rec.notice = rep.notice.clone();
                let orbit_file = format!("probe_seed{seed}_orbit.csv");
                let mut w = create(&r.out, &orbit_file)?;
                export::write_steps_csv(&mut w, &spec, &rep.orbit)?;
                w.flush()?;
                let summary = ProbeSummary { bound: rep.bound, delta, seed, orbit_file: orbit_file.clone() };
                let name = format!("probe_seed{seed}.json");
                fs::write(r.out.join(&name), serde_json::to_string_pretty(&summary)?)?;
                rec.files = vec![name, orbit_file];
                Ok(())
            })
        })
        .collect();
    finish(r, "probe", &records)
}
