//! Explicit time stepping of `d_t rho = v Delta Theta`, the graphical form of
//! the normal flow `x_t = (Delta Theta) nu`: the vertical velocity
//! `rho_t d_r` has normal component `(rho_t / v) nu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fiber::FiberGrid;
use crate::geometry::{self, GraphState, InducedMetric};
use crate::integrals;
use crate::warping::WarpingFactor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Rk2,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk2" => Ok(Integrator::Rk2),
            other => Err(Error::Invalid(format!("unknown integrator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub cfl: f64,
    pub t_max: f64,
    pub tol_osc: f64,
    pub tol_speed: f64,
    pub eps_v: f64,
    pub record_every: usize,
    /// Halvings of a rejected step before the run aborts.
    pub max_halvings: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk2,
            cfl: 0.2,
            t_max: 100.0,
            tol_osc: 1e-6,
            tol_speed: 1e-8,
            eps_v: 1e-4,
            record_every: 1,
            max_halvings: 10,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("flow.cfl must lie in (0, 1)");
        }
        if !(self.t_max > 0.0) {
            return bad("flow.t_max must be positive");
        }
        if !(self.tol_osc > 0.0 && self.tol_speed > 0.0) {
            return bad("flow tolerances must be positive");
        }
        if !(self.eps_v > 0.0 && self.eps_v < 1.0) {
            return bad("flow.eps_v must lie in (0, 1)");
        }
        if self.record_every == 0 {
            return bad("flow.record_every must be at least 1");
        }
        Ok(())
    }
}

/// One row of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub area: f64,
    pub volume: f64,
    pub osc: f64,
    pub sup_speed: f64,
    pub min_v2: f64,
    pub max_u: f64,
    pub umbilicity: f64,
}

impl FlowRecord {
    pub const CSV_HEADER: &'static str = "t,area,volume,osc,sup_speed,min_v2,max_u,umbilicity";

    pub fn from_state(grid: &FiberGrid, w: &WarpingFactor, state: &GraphState, t: f64) -> Result<Self> {
        Ok(Self {
            t,
            area: integrals::area(grid, state),
            volume: integrals::enclosed_volume(grid, w, state.rho())?,
            osc: integrals::oscillation(grid, w, state.rho()),
            sup_speed: exec::max(state.lap_theta.iter().map(|x| x.abs())),
            min_v2: exec::min(state.metric.v2.iter().copied()),
            max_u: exec::max(state.metric.u.iter().copied()),
            umbilicity: integrals::umbilicity_deficit(grid, state),
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t, self.area, self.volume, self.osc, self.sup_speed, self.min_v2, self.max_u, self.umbilicity
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
}

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(FlowRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Least-squares slope of `-ln osc(t)` over the second half of the
    /// recorded time span.
    pub fn osc_decay_rate(&self) -> Option<f64> {
        let t_end = self.records.last()?.t;
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.t >= 0.5 * t_end && r.osc > 1e-300)
            .map(|r| (r.t, r.osc.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let m = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mt, my) = (st / m, sy / m);
        let (mut num, mut den) = (0.0, 0.0);
        for (t, y) in &pts {
            num += (t - mt) * (y - my);
            den += (t - mt) * (t - mt);
        }
        (den > 0.0).then(|| -num / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConvergedToSlice,
    Timeout,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub trace: FlowTrace,
    pub final_state: GraphState,
    pub verdict: Verdict,
    pub t: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub abort_reason: Option<String>,
    /// Initial data came within a factor 10 of the spacelike guard.
    pub degenerate_initial_data: bool,
    pub rho_range: (f64, f64),
    pub initial_rho_range: (f64, f64),
}

/// Normal speed `F = Delta Theta` (divergence form).
pub fn speed(state: &GraphState) -> Vec<f64> {
    state.lap_theta.clone()
}

/// Stable explicit step size
/// `cfl * min_{k,i} h_i^2 / (2 n v w g^{ii})`.
pub fn cfl_dt(grid: &FiberGrid, state: &GraphState, cfl: f64) -> f64 {
    cfl_dt_metric(grid, &state.metric, cfl)
}

/// [`cfl_dt`] times `min v^2`; this is what [`run`] steps with.
///
/// Along the gradient the linearised operator is stiffer than
/// `v w g^{ii}` by a factor `1/v^2` (for `w = 1` on a curve the principal
/// part is `rho''/v^3`), so the plain bound is only stable for nearly flat
/// graphs.
pub fn stable_dt(grid: &FiberGrid, state: &GraphState, cfl: f64) -> f64 {
    stable_dt_metric(grid, &state.metric, cfl)
}

fn stable_dt_metric(grid: &FiberGrid, m: &InducedMetric, cfl: f64) -> f64 {
    let min_v2 = exec::min(m.v2.iter().copied()).min(1.0);
    cfl_dt_metric(grid, m, cfl) * min_v2
}

fn cfl_dt_metric(grid: &FiberGrid, m: &InducedMetric, cfl: f64) -> f64 {
    let n = grid.n() as f64;
    let mut best = f64::INFINITY;
    for k in 0..grid.len() {
        for d in 0..grid.grid_dims() {
            let h = grid.spacing(d);
            let coeff = 2.0 * n * m.v[k] * m.warp[k].value * m.ginv[k][d][d];
            best = best.min(h * h / coeff);
        }
    }
    cfl * best
}

/// Metric and `Delta Theta` of a graph: everything the stepper needs.
struct Eval {
    metric: InducedMetric,
    lap: Vec<f64>,
}

impl Eval {
    fn new(grid: &FiberGrid, w: &WarpingFactor, rho: &[f64], eps_v: f64) -> Result<Self> {
        let metric = geometry::induced_metric(grid, w, rho, eps_v)?;
        let lap = geometry::laplace_theta_div(grid, w, &metric, eps_v)?;
        Ok(Self { metric, lap })
    }

    fn advanced(&self, rho: &[f64], dt: f64) -> Vec<f64> {
        exec::map_range(rho.len(), |k| rho[k] + dt * self.metric.v[k] * self.lap[k])
    }
}

fn advance(
    grid: &FiberGrid,
    w: &WarpingFactor,
    current: &Eval,
    dt: f64,
    integrator: Integrator,
    eps_v: f64,
) -> Result<Eval> {
    let rho = &current.metric.rho;
    let next = match integrator {
        Integrator::Euler => current.advanced(rho, dt),
        Integrator::Rk2 => {
            let half = Eval::new(grid, w, &current.advanced(rho, 0.5 * dt), eps_v)?;
            half.advanced(rho, dt)
        }
    };
    Eval::new(grid, w, &next, eps_v)
}

/// One explicit step of size `dt` (expected not to exceed [`cfl_dt`]).
pub fn step(
    grid: &FiberGrid,
    w: &WarpingFactor,
    state: &GraphState,
    dt: f64,
    integrator: Integrator,
    eps_v: f64,
) -> Result<GraphState> {
    let current = Eval { metric: state.metric.clone(), lap: state.lap_theta.clone() };
    let next = advance(grid, w, &current, dt, integrator, eps_v)?;
    Ok(GraphState::from_parts(grid, next.metric, next.lap))
}

fn range(rho: &[f64]) -> (f64, f64) {
    (exec::min(rho.iter().copied()), exec::max(rho.iter().copied()))
}

/// Runs the flow until `osc Theta < tol_osc` and `sup |Delta Theta| < tol_speed`
/// (converged to a slice) or `t >= t_max`. Errors only for invalid
/// configuration or initial data; guard failures later in the run end it
/// with [`Verdict::Aborted`] and keep the trace.
pub fn run(grid: &FiberGrid, w: &WarpingFactor, rho0: &[f64], config: &FlowConfig) -> Result<FlowOutcome> {
    config.validate()?;
    let eps_v = config.eps_v;
    let initial = GraphState::new(grid, w, rho0, eps_v)?;
    let degenerate = exec::min(initial.metric.v2.iter().copied()) < 10.0 * eps_v;
    if degenerate {
        log::warn!("initial data is close to the spacelike guard (eps_v = {eps_v})");
    }
    let mut trace = FlowTrace { records: vec![FlowRecord::from_state(grid, w, &initial, 0.0)?] };
    let initial_rho_range = range(rho0);
    let mut rho_range = initial_rho_range;

    let mut cur = Eval { metric: initial.metric.clone(), lap: initial.lap_theta.clone() };
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut last_recorded = 0usize;
    let mut abort_reason = None;

    let verdict = loop {
        let osc = integrals::oscillation(grid, w, &cur.metric.rho);
        let sup = exec::max(cur.lap.iter().map(|x| x.abs()));
        if osc < config.tol_osc && sup < config.tol_speed {
            break Verdict::ConvergedToSlice;
        }
        if t >= config.t_max {
            break Verdict::Timeout;
        }
        let mut dt = stable_dt_metric(grid, &cur.metric, config.cfl).min(config.t_max - t);
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=config.max_halvings {
            match advance(grid, w, &cur, dt, config.integrator, eps_v) {
                Ok(next) => {
                    accepted = Some(next);
                    break;
                }
                Err(e) => {
                    rejected += 1;
                    last_err = Some(e);
                    dt *= 0.5;
                }
            }
        }
        match accepted {
            Some(next) => {
                cur = next;
                t += dt;
                steps += 1;
                let (lo, hi) = range(&cur.metric.rho);
                rho_range = (rho_range.0.min(lo), rho_range.1.max(hi));
                if steps.is_multiple_of(config.record_every) {
                    let state = GraphState::from_parts(grid, cur.metric.clone(), cur.lap.clone());
                    trace.records.push(FlowRecord::from_state(grid, w, &state, t)?);
                    last_recorded = steps;
                }
            }
            None => {
                abort_reason = last_err.map(|e| e.to_string());
                break Verdict::Aborted;
            }
        }
    };

    let final_state = GraphState::new(grid, w, &cur.metric.rho, eps_v)
        .or_else(|_| GraphState::new(grid, w, &cur.metric.rho, 0.0))?;
    if last_recorded != steps {
        trace.records.push(FlowRecord::from_state(grid, w, &final_state, t)?);
    }
    Ok(FlowOutcome {
        trace,
        final_state,
        verdict,
        t,
        steps,
        rejected_steps: rejected,
        abort_reason,
        degenerate_initial_data: degenerate,
        rho_range,
        initial_rho_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn slice_is_fixed_point() {
        let g = FiberGrid::torus2(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let s = GraphState::new(&g, &w, &vec![0.3; g.len()], 1e-4).unwrap();
        assert!(speed(&s).iter().all(|x| x.abs() < 1e-14));
        let next = step(&g, &w, &s, cfl_dt(&g, &s, 0.2), Integrator::Rk2, 1e-4).unwrap();
        assert!(next.rho().iter().all(|&r| (r - 0.3).abs() < 1e-15));
        let out = run(&g, &w, &vec![0.3; g.len()], &FlowConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::ConvergedToSlice);
        assert_eq!(out.trace.records.len(), 1);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn cfl_on_flat_slice() {
        let g = FiberGrid::torus1(64, 2.0 * PI).unwrap();
        let w = WarpingFactor::product(-1.0, 1.0);
        let s = GraphState::new(&g, &w, &vec![0.0; 64], 1e-4).unwrap();
        let h = 2.0 * PI / 64.0;
        assert!((cfl_dt(&g, &s, 0.2) - 0.2 * h * h / 2.0).abs() < 1e-16);
        let g2 = FiberGrid::torus1(128, 2.0 * PI).unwrap();
        let s2 = GraphState::new(&g2, &w, &vec![0.0; 128], 1e-4).unwrap();
        assert!((cfl_dt(&g, &s, 0.2) / cfl_dt(&g2, &s2, 0.2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = FlowConfig { cfl: 1.5, ..FlowConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = FlowConfig { record_every: 0, ..FlowConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn timeout_keeps_trace() {
        let g = FiberGrid::torus1(32, 2.0 * PI).unwrap();
        let w = WarpingFactor::product(-1.0, 1.0);
        let rho: Vec<f64> = (0..32).map(|k| 0.1 * g.coords(k)[0].sin()).collect();
        let cfg = FlowConfig { t_max: 0.05, record_every: 5, ..FlowConfig::default() };
        let out = run(&g, &w, &rho, &cfg).unwrap();
        assert_eq!(out.verdict, Verdict::Timeout);
        assert!((out.t - 0.05).abs() < 1e-12);
        assert!(out.trace.records.len() >= 2);
        assert_eq!(out.trace.records.last().unwrap().t, out.t);
    }
}
