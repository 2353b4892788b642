//! Slice profile `f0(R) = |S0| int_a^R w^n`, `f1(R) = |S0| w(R)^n` and the
//! isoperimetric profile `phi = f1 o f0^-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fiber::FiberGrid;
use crate::geometry::GraphState;
use crate::integrals;
use crate::warping::WarpingFactor;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct IsoperimetricProfile {
    warping: WarpingFactor,
    fiber_volume: f64,
    n: usize,
}

impl IsoperimetricProfile {
    pub fn new(warping: WarpingFactor, fiber_volume: f64, n: usize) -> Self {
        Self { warping, fiber_volume, n }
    }

    pub fn for_grid(warping: &WarpingFactor, grid: &FiberGrid) -> Self {
        Self::new(warping.clone(), grid.fiber_volume(), grid.n())
    }

    pub fn warping(&self) -> &WarpingFactor {
        &self.warping
    }

    /// Volume enclosed by the slice `{r = R}`.
    pub fn f0(&self, r: f64) -> f64 {
        self.fiber_volume * self.warping.power_integral(self.n, r)
    }

    /// Area of the slice `{r = R}`.
    pub fn f1(&self, r: f64) -> f64 {
        self.fiber_volume * self.warping.value(r).powi(self.n as i32)
    }

    /// `f0(b-)`, the supremum of attainable volumes.
    pub fn max_volume(&self) -> f64 {
        self.f0(self.warping.b())
    }

    /// The slice height enclosing volume `v`: bisection on `[a, b]`, then
    /// Newton steps with `f0' = f1`.
    pub fn slice_for_volume(&self, v: f64) -> Result<f64> {
        let max = self.max_volume();
        if !(v >= 0.0 && v < max) {
            return Err(Error::VolumeRange { volume: v, max });
        }
        let tol = 1e-12 * v.max(1.0);
        let (mut lo, mut hi) = (self.warping.a(), self.warping.b());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.f0(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-6 * (self.warping.b() - self.warping.a()) {
                break;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..50 {
            let res = self.f0(r) - v;
            if res.abs() <= tol {
                return Ok(r);
            }
            let next = r - res / self.f1(r);
            r = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if self.f0(r) < v {
                lo = r;
            } else {
                hi = r;
            }
        }
        Ok(r)
    }

    /// `phi(v) = f1(f0^-1(v))`.
    pub fn phi(&self, v: f64) -> Result<f64> {
        Ok(self.f1(self.slice_for_volume(v)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoStatus {
    Pass,
    Fail,
    /// The null convergence condition fails somewhere, so the inequality is
    /// not guaranteed.
    NotApplicable,
}

/// Rigidity diagnostics attached when the slack is within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualityDiagnosis {
    pub max_ring_a2: f64,
    pub max_one_minus_v2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoVerdict {
    pub volume: f64,
    pub area: f64,
    pub phi: f64,
    /// `phi(vol) - area`
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: IsoStatus,
    pub min_ncc_margin: f64,
    pub equality: Option<EqualityDiagnosis>,
}

/// Samples of `[a, b)` used to certify the null convergence condition.
const NCC_SAMPLES: usize = 1000;

/// Evaluates `phi(vol) >= |Sigma|` for a graph. `rel_tol` scales with the
/// area (`tol_iso = rel_tol * area`).
pub fn verdict(grid: &FiberGrid, w: &WarpingFactor, state: &GraphState, rel_tol: f64) -> Result<IsoVerdict> {
    let profile = IsoperimetricProfile::for_grid(w, grid);
    let area = integrals::area(grid, state);
    let volume = integrals::enclosed_volume(grid, w, state.rho())?;
    let phi = profile.phi(volume)?;
    let slack = phi - area;
    let tolerance = rel_tol * area;
    let pass = slack >= -tolerance;

    let n = grid.n();
    let lam = grid.lambda_hat();
    let sampled = w.min_ncc_margin(lam, n, NCC_SAMPLES)?;
    let on_graph = exec::min(state.metric.warp.iter().map(|v| crate::warping::ncc_margin_from(v, lam, n)));
    let min_ncc_margin = sampled.min(on_graph);
    let status = if min_ncc_margin < -1e-12 {
        IsoStatus::NotApplicable
    } else if pass {
        IsoStatus::Pass
    } else {
        IsoStatus::Fail
    };
    let equality = (slack.abs() <= tolerance).then(|| EqualityDiagnosis {
        max_ring_a2: exec::max(state.curvature.ring_a2.iter().copied()),
        max_one_minus_v2: exec::max(state.metric.v2.iter().map(|v2| 1.0 - v2)),
    });
    Ok(IsoVerdict { volume, area, phi, slack, tolerance, pass, status, min_ncc_margin, equality })
}
