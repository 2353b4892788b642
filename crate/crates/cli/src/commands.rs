use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use grwflow_core::flow::{self, FlowRecord, Verdict};
use grwflow_core::integrals::Functionals;
use grwflow_core::isoperimetric::{self, IsoStatus, IsoVerdict, IsoperimetricProfile};
use grwflow_core::verify::{
    self, EvolutionOptions, EvolutionResiduals, OracleReport, SpatialResiduals,
};
use grwflow_core::{FiberGrid, FiberKind, GraphState};
use serde::Serialize;

use crate::config::{InitialData, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_ISO_FAIL: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_TIMEOUT: i32 = 5;

const ORACLE_SAMPLES: usize = 20;
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_SYMMETRY_TOL: f64 = 1e-8;
/// Residuals below this are rounding noise; no order is required of them.
const RESIDUAL_FLOOR: f64 = 1e-11;

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    verdict: Option<Verdict>,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    abort_reason: Option<String>,
    isoperimetric: Option<IsoVerdict>,
    initial: Option<Functionals>,
    #[serde(rename = "final")]
    final_: Option<Functionals>,
    final_vs_profile: Option<f64>,
    t: f64,
    steps: usize,
    rejected_steps: usize,
    degenerate_initial_data: bool,
    initial_rho_range: Option<(f64, f64)>,
    rho_range: Option<(f64, f64)>,
    max_volume_drift: Option<f64>,
    min_area_increment: Option<f64>,
    max_u: Option<f64>,
    osc_decay_rate: Option<f64>,
    oracle: Option<OracleReport>,
    spatial_residuals: Option<SpatialResiduals>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn oracle_passes(rep: &OracleReport) -> bool {
    rep.closed_forms_agree(ORACLE_TOL)
        && rep.max_antisymmetry <= ORACLE_SYMMETRY_TOL
        && rep.max_bianchi <= ORACLE_SYMMETRY_TOL
}

/// Flow run: `trace.csv`, `summary.json` and `timing.json` in `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path, strict: bool) -> Result<i32> {
    let start = Instant::now();
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let grid = cfg.grid()?;
    let w = cfg.warping();
    let rho0 = cfg.initial_rho(&grid)?;
    let mut summary = RunSummary {
        command: "run",
        config: cfg,
        verdict: None,
        exit_code: EXIT_ABORTED,
        abort_reason: None,
        isoperimetric: None,
        initial: None,
        final_: None,
        final_vs_profile: None,
        t: 0.0,
        steps: 0,
        rejected_steps: 0,
        degenerate_initial_data: false,
        initial_rho_range: None,
        rho_range: None,
        max_volume_drift: None,
        min_area_increment: None,
        max_u: None,
        osc_decay_rate: None,
        oracle: None,
        spatial_residuals: None,
    };

    if strict || cfg.verify.strict {
        let rep = verify::oracle_self_test(&w, &grid, cfg.verify.delta, ORACLE_SAMPLES, cfg.seed)?;
        summary.oracle = Some(rep);
        if !oracle_passes(&rep) {
            log::error!("closed-form curvature disagrees with the oracle: {rep:?}");
            summary.abort_reason = Some("strict self-test failed: closed-form curvature disagrees with the oracle".into());
            write_json(&out.join("summary.json"), &summary)?;
            return Ok(EXIT_ABORTED);
        }
    }

    let initial = match GraphState::new(&grid, &w, &rho0, cfg.flow.eps_v) {
        Ok(s) => s,
        Err(e) => {
            log::error!("initial data rejected: {e}");
            summary.abort_reason = Some(format!("initial data rejected: {e}"));
            summary.exit_code = EXIT_CONFIG;
            write_json(&out.join("summary.json"), &summary)?;
            return Ok(EXIT_CONFIG);
        }
    };
    summary.initial = Some(Functionals::compute(&grid, &w, &initial)?);
    summary.spatial_residuals = Some(verify::check_spatial_identities(&grid, &w, &initial, cfg.flow.eps_v)?);
    let iso = isoperimetric::verdict(&grid, &w, &initial, cfg.iso_tol)?;
    summary.isoperimetric = Some(iso);
    if iso.status == IsoStatus::NotApplicable {
        log::warn!("null convergence condition fails (min margin {:e}); isoperimetric verdict not applicable", iso.min_ncc_margin);
    }

    let outcome = flow::run(&grid, &w, &rho0, &cfg.flow)?;
    let records = &outcome.trace.records;
    fs::write(out.join("trace.csv"), outcome.trace.to_csv()).context("cannot write trace.csv")?;

    let v0 = records[0].volume;
    summary.verdict = Some(outcome.verdict);
    summary.abort_reason = outcome.abort_reason.clone();
    summary.t = outcome.t;
    summary.steps = outcome.steps;
    summary.rejected_steps = outcome.rejected_steps;
    summary.degenerate_initial_data = outcome.degenerate_initial_data;
    summary.initial_rho_range = Some(outcome.initial_rho_range);
    summary.rho_range = Some(outcome.rho_range);
    summary.max_volume_drift = Some(records.iter().map(|r| ((r.volume - v0) / v0).abs()).fold(0.0, f64::max));
    summary.min_area_increment = Some(records.windows(2).map(|p| p[1].area - p[0].area).fold(0.0, f64::min));
    summary.max_u = Some(records.iter().map(|r: &FlowRecord| r.max_u).fold(f64::NEG_INFINITY, f64::max));
    summary.osc_decay_rate = outcome.trace.osc_decay_rate();
    let fin = Functionals::compute(&grid, &w, &outcome.final_state)?;
    summary.final_vs_profile = IsoperimetricProfile::for_grid(&w, &grid).phi(fin.volume).ok().map(|phi| phi - fin.area);
    summary.final_ = Some(fin);

    let code = match outcome.verdict {
        Verdict::Aborted => EXIT_ABORTED,
        _ if iso.status == IsoStatus::Fail => EXIT_ISO_FAIL,
        Verdict::Timeout => EXIT_TIMEOUT,
        Verdict::ConvergedToSlice => EXIT_OK,
    };
    summary.exit_code = code;
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("timing.json"), &serde_json::json!({ "wall_seconds": start.elapsed().as_secs_f64() }))?;
    Ok(code)
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
    /// Where the residual behind the check peaks, if it is a nodal one.
    #[serde(skip_serializing_if = "Option::is_none")]
    worst: Option<String>,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold, worst: None }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value >= threshold, worst: None }
    }
}

#[derive(Debug, Serialize)]
struct VerifySummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    oracle: OracleReport,
    resolutions: Vec<usize>,
    spatial: Vec<SpatialResiduals>,
    evolution: Vec<EvolutionResiduals>,
    checks: Vec<Check>,
    pass: bool,
}

const SPATIAL_NAMES: [&str; 4] = ["grad_u", "laplace_u", "sigma2_integral", "grad_theta_norm"];
const SPATIAL_ORDERS: [f64; 4] = [1.8, 1.0, 1.8, 1.8];
const EVOLUTION_NAMES: [&str; 5] = ["theta_law", "theta_graph_law", "metric_law", "normal_law", "u_law"];

fn resolution_of(kind: FiberKind, n: usize) -> [usize; 2] {
    match kind {
        FiberKind::Torus2 => [n, n],
        _ => [n, 1],
    }
}

/// Oracle self-test plus spatial and evolution identity suites under
/// refinement. Writes `verify.json`.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<i32> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    if matches!(cfg.initial, InitialData::Profile { .. }) {
        anyhow::bail!("verify needs initial data given by modes so that it can be resampled under refinement");
    }
    let w = cfg.warping();
    let base = cfg.grid()?;
    let oracle = verify::oracle_self_test(&w, &base, cfg.verify.delta, ORACLE_SAMPLES, cfg.seed)?;
    let mut checks = vec![
        Check::at_most("oracle.ncc_margin", oracle.ncc_error, ORACLE_TOL),
        Check::at_most("oracle.ric_grad_theta_nu", oracle.ric_grad_theta_nu_error, ORACLE_TOL),
        Check::at_most("oracle.ric_ww", oracle.ric_ww_error, ORACLE_TOL),
        Check::at_most("oracle.antisymmetry", oracle.max_antisymmetry, ORACLE_SYMMETRY_TOL),
        Check::at_most("oracle.bianchi", oracle.max_bianchi, ORACLE_SYMMETRY_TOL),
    ];

    let mut spatial = Vec::new();
    let mut evolution = Vec::new();
    let opts = EvolutionOptions { markers: cfg.verify.markers, delta: cfg.verify.delta, eps_v: cfg.flow.eps_v, ..Default::default() };
    for &n in &cfg.verify.resolutions {
        let grid = cfg.grid_at(resolution_of(cfg.fiber.kind, n))?;
        let rho = cfg.initial_rho(&grid)?;
        let state = GraphState::new(&grid, &w, &rho, cfg.flow.eps_v)?;
        spatial.push(verify::check_spatial_identities(&grid, &w, &state, cfg.flow.eps_v)?);
        let dt = flow::cfl_dt(&grid, &state, cfg.flow.cfl);
        evolution.push(verify::check_evolution_identities(&grid, &w, &state, dt, &opts)?);
    }

    let res = &cfg.verify.resolutions;
    for (i, name) in SPATIAL_NAMES.iter().enumerate() {
        let errs: Vec<f64> = spatial.iter().map(|r| r.as_array()[i]).collect();
        // sigma2_integral is a global residual
        let slot = [Some(0), Some(1), None, Some(2)][i];
        let worst: Vec<Option<String>> = spatial
            .iter()
            .zip(res)
            .map(|(r, n)| slot.map(|j| format!("node {} at N = {n}", r.worst_node[j])))
            .collect();
        checks.extend(order_checks(&format!("spatial.{name}"), &errs, SPATIAL_ORDERS[i], &worst));
    }
    for (i, name) in EVOLUTION_NAMES.iter().enumerate() {
        let errs: Vec<f64> = evolution.iter().map(|r| r.as_array()[i]).collect();
        let worst: Vec<Option<String>> = evolution
            .iter()
            .zip(res)
            .map(|(r, n)| {
                let what = if i == 1 { "node" } else { "marker from node" };
                Some(format!("{what} {} at N = {n}", r.worst_node[i]))
            })
            .collect();
        // evolution residuals only need to decay under joint refinement
        checks.extend(order_checks(&format!("evolution.{name}"), &errs, f64::MIN_POSITIVE, &worst));
    }
    for (r, n) in evolution.iter().zip(res) {
        checks.push(Check::at_least(format!("evolution.markers_used[N={n}]"), r.markers_used as f64, 1.0));
    }
    for c in &checks {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        let at = match (&c.worst, c.pass) {
            (Some(w), false) => format!("  worst: {w}"),
            _ => String::new(),
        };
        println!("{mark} {:<36} {:>12.4e}  (threshold {:.3e}){at}", c.name, c.value, c.threshold);
    }
    let pass = checks.iter().all(|c| c.pass);
    let summary = VerifySummary {
        command: "verify",
        config: cfg,
        oracle,
        resolutions: cfg.verify.resolutions.clone(),
        spatial,
        evolution,
        checks,
        pass,
    };
    write_json(&out.join("verify.json"), &summary)?;
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// Observed orders between successive resolutions, each required to reach
/// `min_order` unless the finer residual is already at rounding level.
fn order_checks(name: &str, errs: &[f64], min_order: f64, worst: &[Option<String>]) -> Vec<Check> {
    let orders = verify::observed_orders(errs);
    orders
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let label = format!("{name}.order[{i}]");
            let mut check = if errs[i + 1] <= RESIDUAL_FLOOR {
                Check { name: label, value: p, threshold: min_order, pass: true, worst: None }
            } else {
                Check::at_least(label, if p.is_nan() { f64::NEG_INFINITY } else { p }, min_order)
            };
            check.worst = worst[i + 1].clone();
            check
        })
        .collect()
}

/// Tabulates `R, f0(R), f1(R), phi(f0(R))` into `profile.csv`.
pub fn cmd_profile(cfg: &RunConfig, out: &Path) -> Result<i32> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let grid: FiberGrid = cfg.grid()?;
    let w = cfg.warping();
    let profile = IsoperimetricProfile::for_grid(&w, &grid);
    let m = cfg.profile_samples;
    let (a, b) = (w.a(), w.b());
    let mut csv = String::from("R,f0,f1,phi_of_f0\n");
    for i in 0..m {
        // stay strictly inside [a, b)
        let r = a + (b - a) * i as f64 / m as f64;
        let f0 = profile.f0(r);
        let phi = profile.phi(f0)?;
        csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", r, f0, profile.f1(r), phi));
    }
    fs::write(out.join("profile.csv"), csv).context("cannot write profile.csv")?;
    Ok(EXIT_OK)
}
