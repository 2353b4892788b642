//! Independent checks of the geometry and of the evolution laws.
//!
//! * [`CurvatureOracle`] differentiates the ambient metric `-dr^2 + w^2 g_hat`
//!   numerically (fourth-order central differences, nested once for the
//!   connection derivatives) and contracts the resulting Riemann tensor.
//!   Every closed-form curvature expression is compared against it.
//! * [`check_spatial_identities`] evaluates residuals of pointwise and
//!   integral identities on a single graph.
//! * [`check_evolution_identities`] follows markers along the purely normal
//!   motion `x_t = (Delta Theta) nu` and measures material time derivatives,
//!   since the evolution laws hold in that gauge and not in the graphical one.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fiber::{FiberGrid, FiberKind, Parity};
use crate::geometry::{self, AmbientVec, GraphState};
use crate::integrals;
use crate::tensor::{self, Tensor2, Vec2};
use crate::warping::{ncc_margin_from, WarpingFactor};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_MARKERS: usize = 64;

type Mat3 = [[f64; 3]; 3];
type Gamma3 = [[[f64; 3]; 3]; 3];
type Riemann3 = [[[[f64; 3]; 3]; 3]; 3];

/// Finite-difference curvature of the ambient chart `(r, xi)`.
#[derive(Debug, Clone)]
pub struct CurvatureOracle {
    warping: WarpingFactor,
    sphere: bool,
    n: usize,
    delta: f64,
}

impl CurvatureOracle {
    pub fn new(warping: WarpingFactor, fiber: FiberKind, delta: f64) -> Self {
        let (sphere, n) = match fiber {
            FiberKind::Torus1 => (false, 1),
            FiberKind::Torus2 => (false, 2),
            FiberKind::Sphere2Axisym => (true, 2),
        };
        Self { warping, sphere, n, delta }
    }

    pub fn for_grid(warping: &WarpingFactor, grid: &FiberGrid, delta: f64) -> Self {
        Self::new(warping.clone(), grid.kind(), delta)
    }

    /// Spacetime dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn fiber_metric(&self, xi: Vec2) -> Tensor2 {
        if self.sphere {
            let s = xi[0].sin();
            [[1.0, 0.0], [0.0, s * s]]
        } else {
            tensor::identity(self.n)
        }
    }

    pub fn metric(&self, x: &AmbientVec) -> Mat3 {
        let w = self.warping.value(x[0]);
        let gh = self.fiber_metric([x[1], x[2]]);
        let mut g = [[0.0; 3]; 3];
        g[0][0] = -1.0;
        for i in 0..self.n {
            for j in 0..self.n {
                g[1 + i][1 + j] = w * w * gh[i][j];
            }
        }
        g
    }

    fn metric_inverse(&self, x: &AmbientVec) -> Mat3 {
        let d = self.dim();
        let g = self.metric(x);
        let m = DMatrix::from_fn(d, d, |i, j| g[i][j]);
        let inv = m.try_inverse().expect("ambient metric is nondegenerate");
        let mut out = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                out[i][j] = inv[(i, j)];
            }
        }
        out
    }

    fn shifted(x: &AmbientVec, axis: usize, h: f64) -> AmbientVec {
        let mut y = *x;
        y[axis] += h;
        y
    }

    /// Fourth-order central difference of a vector-valued function.
    fn derivative<const L: usize>(&self, f: impl Fn(&AmbientVec) -> [f64; L], x: &AmbientVec, axis: usize) -> [f64; L] {
        let h = self.delta;
        let p2 = f(&Self::shifted(x, axis, 2.0 * h));
        let p1 = f(&Self::shifted(x, axis, h));
        let m1 = f(&Self::shifted(x, axis, -h));
        let m2 = f(&Self::shifted(x, axis, -2.0 * h));
        let mut out = [0.0; L];
        for l in 0..L {
            out[l] = (-p2[l] + 8.0 * p1[l] - 8.0 * m1[l] + m2[l]) / (12.0 * h);
        }
        out
    }

    /// `Gamma^a_bc`, indexed `[a][b][c]`.
    pub fn christoffel(&self, x: &AmbientVec) -> Gamma3 {
        let d = self.dim();
        let flat = |y: &AmbientVec| -> [f64; 9] {
            let g = self.metric(y);
            let mut o = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    o[3 * i + j] = g[i][j];
                }
            }
            o
        };
        let mut dg = [[[0.0; 3]; 3]; 3]; // dg[c][a][b] = d_c g_ab
        for c in 0..d {
            let v = self.derivative(flat, x, c);
            for a in 0..3 {
                for b in 0..3 {
                    dg[c][a][b] = v[3 * a + b];
                }
            }
        }
        let ginv = self.metric_inverse(x);
        let mut gam = [[[0.0; 3]; 3]; 3];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    gam[a][b][c] = 0.5
                        * (0..d).map(|e| ginv[a][e] * (dg[b][c][e] + dg[c][b][e] - dg[e][b][c])).sum::<f64>();
                }
            }
        }
        gam
    }

    /// `R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb`.
    pub fn riemann(&self, x: &AmbientVec) -> Riemann3 {
        let d = self.dim();
        let flat = |y: &AmbientVec| -> [f64; 27] {
            let g = self.christoffel(y);
            let mut o = [0.0; 27];
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        o[9 * a + 3 * b + c] = g[a][b][c];
                    }
                }
            }
            o
        };
        let mut dgam = [[0.0; 27]; 3];
        for (c, slot) in dgam.iter_mut().enumerate().take(d) {
            *slot = self.derivative(flat, x, c);
        }
        let gam = self.christoffel(x);
        let dg = |c: usize, a: usize, b: usize, e: usize| dgam[c][9 * a + 3 * b + e];
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = dg(c, a, e, b) - dg(e, a, c, b);
                        for f in 0..d {
                            v += gam[a][c][f] * gam[f][e][b] - gam[a][e][f] * gam[f][c][b];
                        }
                        r[a][b][c][e] = v;
                    }
                }
            }
        }
        r
    }

    fn lowered(&self, x: &AmbientVec, r: &Riemann3) -> Riemann3 {
        let d = self.dim();
        let g = self.metric(x);
        let mut low = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        low[a][b][c][e] = (0..d).map(|f| g[a][f] * r[f][b][c][e]).sum();
                    }
                }
            }
        }
        low
    }

    /// `Ric_bd = R^a_bad`.
    pub fn ricci_tensor(&self, x: &AmbientVec) -> Mat3 {
        let d = self.dim();
        let r = self.riemann(x);
        let mut ric = [[0.0; 3]; 3];
        for b in 0..d {
            for e in 0..d {
                ric[b][e] = (0..d).map(|a| r[a][b][a][e]).sum();
            }
        }
        ric
    }

    /// Ricci curvature `Ric(X, Y)` at a chart point.
    pub fn ricci(&self, x: &AmbientVec, xv: &AmbientVec, yv: &AmbientVec) -> f64 {
        let ric = self.ricci_tensor(x);
        let d = self.dim();
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += ric[a][b] * xv[a] * yv[b];
            }
        }
        s
    }

    /// Largest violation of `R_abcd = -R_bacd`, `R_abcd = R_cdab` and the
    /// first Bianchi identity, relative to the largest component.
    pub fn symmetry_residuals(&self, x: &AmbientVec) -> (f64, f64) {
        let d = self.dim();
        let low = self.lowered(x, &self.riemann(x));
        let mut scale: f64 = 1.0;
        let mut anti: f64 = 0.0;
        let mut bianchi: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        scale = scale.max(low[a][b][c][e].abs());
                        anti = anti
                            .max((low[a][b][c][e] + low[b][a][c][e]).abs())
                            .max((low[a][b][c][e] - low[c][e][a][b]).abs());
                        bianchi = bianchi.max((low[a][b][c][e] + low[a][c][e][b] + low[a][e][b][c]).abs());
                    }
                }
            }
        }
        (anti / scale, bianchi / scale)
    }
}

/// Agreement between closed-form curvature values and the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: usize,
    pub max_antisymmetry: f64,
    pub max_bianchi: f64,
    /// `|mu(r) - w^2 Ric(K, K)|` for null `K = d_r + e / w`.
    pub ncc_error: f64,
    pub ric_grad_theta_nu_error: f64,
    pub ric_ww_error: f64,
    /// `|g(W, W)|`: `W` must be lightlike.
    pub max_null_norm: f64,
    /// `Ric(d_r, d_r) / g(d_r, d_r)` at the first sample.
    pub einstein_constant: f64,
    /// `max |Ric_ab - c g_ab|` with `c` the constant above.
    pub einstein_residual: f64,
}

impl OracleReport {
    pub fn closed_forms_agree(&self, tol: f64) -> bool {
        self.ncc_error <= tol && self.ric_grad_theta_nu_error <= tol && self.ric_ww_error <= tol
    }
}

/// Compares every closed-form curvature quantity with the oracle at
/// `samples` random points of `(a, b) x fiber chart`.
pub fn oracle_self_test(
    w: &WarpingFactor,
    grid: &FiberGrid,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<OracleReport> {
    let oracle = CurvatureOracle::for_grid(w, grid, delta);
    let n = grid.n();
    let lam = grid.lambda_hat();
    let sphere = grid.kind() == FiberKind::Sphere2Axisym;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = w.b() - w.a();
    let points: Vec<(AmbientVec, Vec2, f64)> = (0..samples)
        .map(|_| {
            let r = w.a() + span * rng.gen_range(0.1..0.9);
            let xi = if sphere {
                [rng.gen_range(0.3..std::f64::consts::PI - 0.3), rng.gen_range(0.0..6.0)]
            } else {
                [rng.gen_range(0.0..6.0), if n == 2 { rng.gen_range(0.0..6.0) } else { 0.0 }]
            };
            let dir = [rng.gen_range(-1.0..1.0), if n == 2 { rng.gen_range(-1.0..1.0) } else { 0.0 }];
            let tilt = rng.gen_range(0.05..0.7);
            ([r, xi[0], xi[1]], dir, tilt)
        })
        .collect();

    let per_point = exec::map_items(&points, |(x, dir, tilt)| -> Result<[f64; 8]> {
        let wv = w.eval(x[0])?;
        let ghat = oracle.fiber_metric([x[1], x[2]]);
        // unit fiber direction and a spacelike gradient of prescribed tilt
        let norm = tensor::contract(n, &ghat, dir, dir).sqrt().max(1e-12);
        let e = [dir[0] / norm, dir[1] / norm];
        let k_null = [1.0, e[0] / wv.value, e[1] / wv.value];
        let ncc_oracle = wv.value * wv.value * oracle.ricci(x, &k_null, &k_null);
        let ncc_err = (ncc_margin_from(&wv, lam, n) - ncc_oracle).abs();

        let lowered = tensor::apply(n, &ghat, &e);
        let drho = [tilt * wv.value * lowered[0], tilt * wv.value * lowered[1]];
        let pm = geometry::point_metric(n, &ghat, wv.value, drho);
        let nu = geometry::normal_vector(n, &ghat, &wv, drho, pm.v);
        let grad = geometry::tangential_gradient_theta(n, &pm.ginv, &wv, drho);
        let closed = geometry::grw_ricci(&wv, lam, n, &ghat, &grad, &nu);
        let ric_err = (closed - oracle.ricci(x, &grad, &nu)).abs();
        let wn = geometry::null_vector_w(&nu, pm.u, wv.value);
        let ww_err = (closed / pm.u - oracle.ricci(x, &wn, &wn)).abs();
        let null_norm = geometry::ambient_inner(&wv, n, &ghat, &wn, &wn).abs();
        let (anti, bianchi) = oracle.symmetry_residuals(x);

        let ric = oracle.ricci_tensor(x);
        let g = oracle.metric(x);
        let c = ric[0][0] / g[0][0];
        let mut eres: f64 = 0.0;
        for a in 0..oracle.dim() {
            for b in 0..oracle.dim() {
                eres = eres.max((ric[a][b] - c * g[a][b]).abs());
            }
        }
        Ok([anti, bianchi, ncc_err, ric_err, ww_err, null_norm, c, eres])
    });
    let rows: Vec<[f64; 8]> = per_point.into_iter().collect::<Result<_>>()?;
    let col = |i: usize| exec::max(rows.iter().map(|r| r[i]));
    Ok(OracleReport {
        samples,
        max_antisymmetry: col(0),
        max_bianchi: col(1),
        ncc_error: col(2),
        ric_grad_theta_nu_error: col(3),
        ric_ww_error: col(4),
        max_null_norm: col(5),
        einstein_constant: rows.first().map_or(f64::NAN, |r| r[6]),
        einstein_residual: col(7),
    })
}

/// Sup-norm residuals of identities that hold on every spacelike graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialResiduals {
    /// `d_i u - h_i^k d_k Theta`
    pub grad_u: f64,
    /// `Delta u - (g(grad H, grad Theta) + |A|^2 u + Ric(grad Theta, nu) - w' H)`
    pub laplace_u: f64,
    /// `int (2 sigma_2 u - (n-1) w' H) - int Ric(nu, grad Theta)`
    pub sigma2_integral: f64,
    /// `|grad Theta|^2 - (u^2 - w^2)`
    pub grad_theta_norm: f64,
    /// Node where `grad_u`, `laplace_u` and `grad_theta_norm` peak.
    pub worst_node: [usize; 3],
}

impl SpatialResiduals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.grad_u, self.laplace_u, self.sigma2_integral, self.grad_theta_norm]
    }
}

pub fn check_spatial_identities(
    grid: &FiberGrid,
    w: &WarpingFactor,
    state: &GraphState,
    eps_v: f64,
) -> Result<SpatialResiduals> {
    let n = grid.n();
    let nf = n as f64;
    let m = &state.metric;
    let c = &state.curvature;
    let theta = m.theta();
    let lap_u = geometry::laplace_beltrami(grid, w, m, &m.u, Parity::Even, eps_v)?;

    let rows = exec::map_range(grid.len(), |k| {
        let wv = m.warp[k];
        let dtheta = [wv.value * m.drho[k][0], wv.value * m.drho[k][1]];
        // h_i^k = h_ij g^jk
        let hmix = tensor::matmul(n, &c.h[k], &m.ginv[k]);
        let mut grad_u: f64 = 0.0;
        let mut du = [0.0; 2];
        let mut dh = [0.0; 2];
        let mut dth = [0.0; 2];
        for i in 0..n {
            du[i] = grid.partial_at(&m.u, k, i, Parity::Even);
            dh[i] = grid.partial_at(&c.mean, k, i, Parity::Even);
            dth[i] = grid.partial_at(&theta, k, i, Parity::Even);
            let pred: f64 = (0..n).map(|l| hmix[i][l] * dtheta[l]).sum();
            grad_u = grad_u.max((du[i] - pred).abs());
        }
        let h = c.mean[k];
        let rhs = tensor::contract(n, &m.ginv[k], &dh, &dtheta) + c.norm_a2[k] * m.u[k]
            + state.ric_grad_theta_nu[k]
            - wv.d1 * h;
        let lap_res = (lap_u[k] - rhs).abs();
        let norm_res = (tensor::contract(n, &m.ginv[k], &dth, &dth) - (m.u[k] * m.u[k] - wv.value * wv.value)).abs();
        let sigma2 = 0.5 * (h * h - c.norm_a2[k]);
        let integrand = 2.0 * sigma2 * m.u[k] - (nf - 1.0) * wv.d1 * h - state.ric_grad_theta_nu[k];
        (grad_u, lap_res, norm_res, integrand)
    });
    let integrand: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (grad_u, k0) = argmax(rows.iter().map(|r| r.0));
    let (laplace_u, k1) = argmax(rows.iter().map(|r| r.1));
    let (grad_theta_norm, k2) = argmax(rows.iter().map(|r| r.2));
    Ok(SpatialResiduals {
        grad_u,
        laplace_u,
        sigma2_integral: integrals::surface_integral(grid, state, &integrand).abs(),
        grad_theta_norm,
        worst_node: [k0, k1, k2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOptions {
    pub markers: usize,
    /// Graph substeps per `dt`; marker paths are integrated on the same substeps.
    pub substeps: usize,
    pub eps_v: f64,
    pub delta: f64,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self { markers: DEFAULT_MARKERS, substeps: 4, eps_v: 1e-4, delta: DEFAULT_DELTA }
    }
}

/// Marker residuals of the normal-gauge evolution laws, sup over markers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResiduals {
    /// `d/dt Theta - u Delta Theta`
    pub theta_law: f64,
    /// Graphical gauge on the grid: `d_t Theta(rho) - (u Delta Theta + dTheta(T))`
    pub theta_graph_law: f64,
    /// `d/dt g_ij - 2 h_ij Delta Theta`
    pub metric_law: f64,
    /// `D_t nu - grad Delta Theta`
    pub normal_law: f64,
    /// `d/dt u - (u g(grad H, grad Theta) + H g(grad u, grad Theta) - n w''/w |grad Theta|^2 + w' Delta Theta)`
    pub u_law: f64,
    pub markers_used: usize,
    pub markers_dropped: usize,
    /// Largest distance `|r - rho(xi)|` of a marker from its graph.
    pub max_off_graph: f64,
    /// Grid node where each law in [`Self::as_array`] order peaks (for the
    /// marker laws, the node the marker started from).
    pub worst_node: [usize; 5],
}

impl EvolutionResiduals {
    pub fn as_array(&self) -> [f64; 5] {
        [self.theta_law, self.theta_graph_law, self.metric_law, self.normal_law, self.u_law]
    }
}

/// Nodal fields of one graph snapshot used by the marker tracker.
struct Snapshot {
    state: GraphState,
    /// velocity `F nu` components (r, xi^1, xi^2)
    vel: [Vec<f64>; 3],
    /// normal components
    nu: [Vec<f64>; 3],
    theta: Vec<f64>,
    g: [[Vec<f64>; 2]; 2],
}

impl Snapshot {
    fn new(grid: &FiberGrid, state: GraphState) -> Self {
        let n = grid.n();
        let m = &state.metric;
        let nus: Vec<AmbientVec> = (0..grid.len())
            .map(|k| geometry::normal_vector(n, grid.ghat(k), &m.warp[k], m.drho[k], m.v[k]))
            .collect();
        let comp = |f: &dyn Fn(usize) -> f64| (0..grid.len()).map(f).collect::<Vec<f64>>();
        let nu = [comp(&|k| nus[k][0]), comp(&|k| nus[k][1]), comp(&|k| nus[k][2])];
        let vel = [
            comp(&|k| state.lap_theta[k] * nus[k][0]),
            comp(&|k| state.lap_theta[k] * nus[k][1]),
            comp(&|k| state.lap_theta[k] * nus[k][2]),
        ];
        let g = [
            [comp(&|k| m.g[k][0][0]), comp(&|k| m.g[k][0][1])],
            [comp(&|k| m.g[k][1][0]), comp(&|k| m.g[k][1][1])],
        ];
        let theta = m.theta();
        Self { state, vel, nu, theta, g }
    }
}

fn parity_of_component(grid: &FiberGrid, axis: usize) -> Parity {
    // the polar component of a vector is odd under reflection through a pole
    if grid.kind() == FiberKind::Sphere2Axisym && axis == 1 {
        Parity::Odd
    } else {
        Parity::Even
    }
}

fn velocity(grid: &FiberGrid, snap: &Snapshot, x: &AmbientVec) -> Option<AmbientVec> {
    let p = [x[1], x[2]];
    let mut out = [0.0; 3];
    for (a, slot) in out.iter_mut().enumerate().take(grid.n() + 1) {
        *slot = grid.interpolate(&snap.vel[a], parity_of_component(grid, a), p)?;
    }
    if grid.kind() == FiberKind::Sphere2Axisym {
        out[2] = 0.0;
    }
    Some(out)
}

/// Heun integration of one particle from snapshot `from` to `to`.
fn track(grid: &FiberGrid, snaps: &[Snapshot], from: usize, to: usize, tau: f64, x0: AmbientVec) -> Option<AmbientVec> {
    let mut x = x0;
    let mut m = from;
    let sign = if to >= from { 1.0 } else { -1.0 };
    while m != to {
        let next = if to > m { m + 1 } else { m - 1 };
        let k1 = velocity(grid, &snaps[m], &x)?;
        let pred: AmbientVec = std::array::from_fn(|a| x[a] + sign * tau * k1[a]);
        let k2 = velocity(grid, &snaps[next], &pred)?;
        x = std::array::from_fn(|a| x[a] + 0.5 * sign * tau * (k1[a] + k2[a]));
        m = next;
    }
    Some(x)
}

/// Evolution-law residuals at markers. The input graph is the state at
/// `t0`; the graph is advanced to `t0 + dt` and `t0 + 2 dt` and the
/// centered differences are taken about `t1 = t0 + dt`.
pub fn check_evolution_identities(
    grid: &FiberGrid,
    w: &WarpingFactor,
    state: &GraphState,
    dt: f64,
    opts: &EvolutionOptions,
) -> Result<EvolutionResiduals> {
    if !(dt > 0.0) || opts.substeps == 0 || opts.markers == 0 {
        return Err(Error::Invalid("evolution check needs dt > 0, substeps >= 1 and markers >= 1".into()));
    }
    let n = grid.n();
    let kk = opts.substeps;
    let tau = dt / kk as f64;
    let mut snaps = Vec::with_capacity(2 * kk + 1);
    snaps.push(Snapshot::new(grid, state.clone()));
    for _ in 0..2 * kk {
        let prev = &snaps.last().expect("nonempty").state;
        let next = crate::flow::step(grid, w, prev, tau, crate::flow::Integrator::Rk2, opts.eps_v)?;
        snaps.push(Snapshot::new(grid, next));
    }
    let mid = &snaps[kk];
    let (s0, s2) = (&snaps[0], &snaps[2 * kk]);

    // graphical gauge, directly on the grid
    let (theta_graph_law, graph_node) = argmax((0..grid.len()).map(|k| {
        let m = &mid.state.metric;
        let f = mid.state.lap_theta[k];
        let rate = (s2.theta[k] - s0.theta[k]) / (2.0 * dt);
        let tangential = m.warp[k].value * f * (m.v[k] - 1.0 / m.v[k]);
        (rate - (m.u[k] * f + tangential)).abs()
    }));

    // marker nodes; on the sphere stay clear of the poles so satellites exist
    let nodes: Vec<usize> = {
        let len = grid.len();
        let (lo, hi) = if grid.kind() == FiberKind::Sphere2Axisym { (len / 8, len - len / 8) } else { (0, len) };
        let count = opts.markers.min(hi - lo).max(1);
        (0..count).map(|j| lo + j * (hi - lo) / count).collect()
    };
    let oracle = CurvatureOracle::for_grid(w, grid, opts.delta);
    let gd = grid.grid_dims();
    let sphere = grid.kind() == FiberKind::Sphere2Axisym;

    let results = exec::map_items(&nodes, |&k| -> Option<[f64; 5]> {
        let m = &mid.state.metric;
        let cv = &mid.state.curvature;
        let xi = grid.coords(k);
        let x1 = [m.rho[k], xi[0], xi[1]];
        let xa = track(grid, &snaps, kk, 0, tau, x1)?;
        let xb = track(grid, &snaps, kk, 2 * kk, tau, x1)?;
        let pa = [xa[1], xa[2]];
        let pb = [xb[1], xb[2]];
        let off = (xa[0] - grid.interpolate(&s0.state.metric.rho, Parity::Even, pa)?)
            .abs()
            .max((xb[0] - grid.interpolate(&s2.state.metric.rho, Parity::Even, pb)?).abs());

        let f = mid.state.lap_theta[k];
        let u = m.u[k];
        let wv = m.warp[k];

        // Theta
        let th_a = grid.interpolate(&s0.theta, Parity::Even, pa)?;
        let th_b = grid.interpolate(&s2.theta, Parity::Even, pb)?;
        let theta_res = ((th_b - th_a) / (2.0 * dt) - u * f).abs();

        // material metric from satellite markers one grid spacing away
        let mut jac_a = tensor::identity(n);
        let mut jac_b = tensor::identity(n);
        for d in 0..gd {
            let h = grid.spacing(d);
            let mut plus = x1;
            let mut minus = x1;
            let (kp, _) = grid.neighbor(k, d, true);
            let (km, _) = grid.neighbor(k, d, false);
            plus[1 + d] += h;
            minus[1 + d] -= h;
            plus[0] = m.rho[kp];
            minus[0] = m.rho[km];
            let pa_ = track(grid, &snaps, kk, 0, tau, plus)?;
            let ma_ = track(grid, &snaps, kk, 0, tau, minus)?;
            let pb_ = track(grid, &snaps, kk, 2 * kk, tau, plus)?;
            let mb_ = track(grid, &snaps, kk, 2 * kk, tau, minus)?;
            for a in 0..gd {
                jac_a[a][d] = (pa_[1 + a] - ma_[1 + a]) / (2.0 * h);
                jac_b[a][d] = (pb_[1 + a] - mb_[1 + a]) / (2.0 * h);
            }
        }
        let gmat = |s: &Snapshot, p: Vec2| -> Option<Tensor2> {
            let mut g = [[0.0; 2]; 2];
            for i in 0..n {
                for j in 0..n {
                    g[i][j] = grid.interpolate(&s.g[i][j], Parity::Even, p)?;
                }
            }
            if sphere {
                g[0][1] = 0.0;
                g[1][0] = 0.0;
            }
            Some(g)
        };
        let material = |jac: &Tensor2, g: &Tensor2| {
            let mut out = [[0.0; 2]; 2];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s += jac[a][i] * g[a][b] * jac[b][j];
                        }
                    }
                    out[i][j] = s;
                }
            }
            out
        };
        let ga = material(&jac_a, &gmat(s0, pa)?);
        let gb = material(&jac_b, &gmat(s2, pb)?);
        let mut metric_res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                metric_res = metric_res.max(((gb[i][j] - ga[i][j]) / (2.0 * dt) - 2.0 * cv.h[k][i][j] * f).abs());
            }
        }

        // normal: D_t nu = d nu/dt + Gamma(x_t, nu)
        let nu1: AmbientVec = [mid.nu[0][k], mid.nu[1][k], mid.nu[2][k]];
        let mut dnu = [0.0; 3];
        for a in 0..=n {
            let par = parity_of_component(grid, a);
            let na = grid.interpolate(&s0.nu[a], par, pa)?;
            let nb = grid.interpolate(&s2.nu[a], par, pb)?;
            dnu[a] = (nb - na) / (2.0 * dt);
        }
        if sphere {
            dnu[2] = 0.0;
        }
        let gam = oracle.christoffel(&x1);
        let mut cov = [0.0; 3];
        for a in 0..=n {
            let mut s = dnu[a];
            for b in 0..=n {
                for c in 0..=n {
                    s += gam[a][b][c] * f * nu1[b] * nu1[c];
                }
            }
            cov[a] = s;
        }
        let mut df = [0.0; 2];
        for (i, slot) in df.iter_mut().enumerate().take(n) {
            *slot = grid.partial_at(&mid.state.lap_theta, k, i, Parity::Even);
        }
        let grad_f = tensor::apply(n, &m.ginv[k], &df);
        let target: AmbientVec = [
            (0..n).map(|i| grad_f[i] * m.drho[k][i]).sum(),
            grad_f[0],
            grad_f[1],
        ];
        let normal_res = (0..=n).map(|a| (cov[a] - target[a]).abs()).fold(0.0, f64::max);

        // support function
        let ua = grid.interpolate(&s0.state.metric.u, Parity::Even, pa)?;
        let ub = grid.interpolate(&s2.state.metric.u, Parity::Even, pb)?;
        let mut dh = [0.0; 2];
        let mut du = [0.0; 2];
        for i in 0..n {
            dh[i] = grid.partial_at(&cv.mean, k, i, Parity::Even);
            du[i] = grid.partial_at(&m.u, k, i, Parity::Even);
        }
        let dtheta = [wv.value * m.drho[k][0], wv.value * m.drho[k][1]];
        let gi = &m.ginv[k];
        let hmean = cv.mean[k];
        let rhs = u * tensor::contract(n, gi, &dh, &dtheta) + hmean * tensor::contract(n, gi, &du, &dtheta)
            - n as f64 * wv.d2 / wv.value * tensor::contract(n, gi, &dtheta, &dtheta)
            + wv.d1 * f;
        let u_res = ((ub - ua) / (2.0 * dt) - rhs).abs();

        Some([theta_res, metric_res, normal_res, u_res, off])
    });
    let dropped = results.iter().filter(|r| r.is_none()).count();
    if dropped > 0 {
        log::warn!("{dropped} marker(s) left the interpolation domain and were dropped");
    }
    let kept: Vec<(usize, [f64; 5])> =
        nodes.iter().zip(results).filter_map(|(&k, r)| r.map(|r| (k, r))).collect();
    let col = |i: usize| {
        let (value, at) = argmax(kept.iter().map(|r| r.1[i]));
        (value, kept.get(at).map_or(0, |r| r.0))
    };
    let (theta_law, n0) = col(0);
    let (metric_law, n2) = col(1);
    let (normal_law, n3) = col(2);
    let (u_law, n4) = col(3);
    Ok(EvolutionResiduals {
        theta_law,
        theta_graph_law,
        metric_law,
        normal_law,
        u_law,
        markers_used: kept.len(),
        markers_dropped: dropped,
        max_off_graph: col(4).0,
        worst_node: [n0, graph_node, n2, n3, n4],
    })
}

/// Largest value and its position; NaN wins so that it is never hidden.
fn argmax(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (i, v) in values.enumerate() {
        if v.is_nan() {
            return (v, i);
        }
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// Observed convergence orders `log2(e_k / e_{k+1})` of a residual measured
/// under successive grid halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}
