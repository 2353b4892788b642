//! Induced geometry of a spacelike graph `r = rho(xi)` over the fiber.
//!
//! Conventions: `nu` is the future timelike unit normal and the second
//! fundamental form is taken with respect to `-nu`, so slices `rho = c` have
//! `h_ij = w w' g_hat_ij` and `H = n w'/w`.

use crate::error::{Error, Result};
use crate::exec;
use crate::fiber::{FiberGrid, Parity};
use crate::tensor::{self, Christoffel, Tensor2, Vec2, ZERO};
use crate::warping::{WarpValues, WarpingFactor};

/// `x^n` for the small exponents that occur (`n = 1, 2`).
#[inline]
pub(crate) fn pow_n(x: f64, n: usize) -> f64 {
    match n {
        1 => x,
        2 => x * x,
        _ => x.powi(n as i32),
    }
}

/// Ambient vector in the chart `(r, xi^1, xi^2)`.
pub type AmbientVec = [f64; 3];

/// Metric quantities of a graph at one point, from `w(rho)` and `d rho`.
#[derive(Debug, Clone, Copy)]
pub struct PointMetric {
    pub g: Tensor2,
    pub ginv: Tensor2,
    pub detg: f64,
    pub v2: f64,
    pub v: f64,
    pub u: f64,
}

/// `g_ij = -rho_i rho_j + w^2 g_hat_ij`, `v^2 = 1 - w^-2 |d rho|^2_ghat`, `u = w / v`.
#[inline]
pub fn point_metric(n: usize, ghat: &Tensor2, w: f64, drho: Vec2) -> PointMetric {
    let ghat_inv = tensor::inverse(n, ghat);
    let mut g = ZERO;
    for i in 0..n {
        for j in 0..n {
            g[i][j] = -drho[i] * drho[j] + w * w * ghat[i][j];
        }
    }
    let v2 = 1.0 - tensor::contract(n, &ghat_inv, &drho, &drho) / (w * w);
    let v = v2.max(0.0).sqrt();
    PointMetric { g, ginv: tensor::inverse(n, &g), detg: tensor::det(n, &g), v2, v, u: w / v }
}

/// `v^2` and row `d` of `g^-1` at a point, from
/// `g^-1 = w^-2 g_hat^-1 + p p^T / v^2` with `p = w^-2 g_hat^-1 d rho`.
#[inline]
fn face_inverse_row(n: usize, ghat: &Tensor2, w: f64, drho: Vec2, d: usize) -> (f64, Vec2) {
    let gi = tensor::inverse(n, ghat);
    let iw2 = 1.0 / (w * w);
    let up = tensor::apply(n, &gi, &drho);
    let p = [iw2 * up[0], iw2 * up[1]];
    let v2 = 1.0 - (0..n).map(|i| p[i] * drho[i]).sum::<f64>();
    let mut row = [0.0; 2];
    for j in 0..n {
        row[j] = iw2 * gi[d][j] + p[d] * p[j] / v2;
    }
    (v2, row)
}

/// Nodal induced metric of a graph.
#[derive(Debug, Clone)]
pub struct InducedMetric {
    pub rho: Vec<f64>,
    pub warp: Vec<WarpValues>,
    pub drho: Vec<Vec2>,
    pub g: Vec<Tensor2>,
    pub ginv: Vec<Tensor2>,
    pub detg: Vec<f64>,
    pub v2: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl InducedMetric {
    /// `Theta(rho)` at every node.
    pub fn theta(&self) -> Vec<f64> {
        self.warp.iter().map(|w| w.integral).collect()
    }

    /// Largest relative deviation from `det g = w^{2n} det(g_hat) v^2`.
    pub fn detg_identity_residual(&self, grid: &FiberGrid) -> f64 {
        let n = grid.n();
        exec::max((0..grid.len()).map(|k| {
            let w2n = self.warp[k].value.powi(2 * n as i32);
            let expect = w2n * tensor::det(n, grid.ghat(k)) * self.v2[k];
            ((self.detg[k] - expect) / expect).abs()
        }))
    }
}

fn check_rho(grid: &FiberGrid, w: &WarpingFactor, rho: &[f64]) -> Result<()> {
    if rho.len() != grid.len() {
        return Err(Error::FieldLength { expected: grid.len(), got: rho.len() });
    }
    if let Some(&r) = rho.iter().find(|r| !w.contains(**r)) {
        return Err(Error::Domain { r, a: w.a(), b: w.b() });
    }
    Ok(())
}

fn worst_spacelike(v2: impl Iterator<Item = f64>, eps_v: f64) -> Result<()> {
    let mut worst: Option<(usize, f64)> = None;
    for (k, x) in v2.enumerate() {
        if !(x > eps_v) && worst.is_none_or(|(_, y)| x < y || x.is_nan()) {
            worst = Some((k, x));
        }
    }
    match worst {
        Some((node, v2)) => Err(Error::Spacelike { node, v2, eps_v }),
        None => Ok(()),
    }
}

/// Induced metric, causal factor and support function at every node.
/// Fails if `v^2 <= eps_v` anywhere, reporting the worst node.
pub fn induced_metric(grid: &FiberGrid, w: &WarpingFactor, rho: &[f64], eps_v: f64) -> Result<InducedMetric> {
    check_rho(grid, w, rho)?;
    let n = grid.n();
    let warp = exec::map_range(grid.len(), |k| w.eval_unchecked(rho[k]));
    if let Some((k, wv)) = warp.iter().enumerate().find(|(_, v)| !(v.value > 0.0)) {
        return Err(Error::InvalidWarping { r: rho[k], value: wv.value });
    }
    let drho = exec::map_range(grid.len(), |k| {
        let mut d = [0.0; 2];
        for (i, slot) in d.iter_mut().enumerate().take(n) {
            *slot = grid.partial_at(rho, k, i, Parity::Even);
        }
        d
    });
    let pm = exec::map_range(grid.len(), |k| point_metric(n, grid.ghat(k), warp[k].value, drho[k]));
    worst_spacelike(pm.iter().map(|p| p.v2), eps_v)?;
    Ok(InducedMetric {
        rho: rho.to_vec(),
        warp,
        drho,
        g: pm.iter().map(|p| p.g).collect(),
        ginv: pm.iter().map(|p| p.ginv).collect(),
        detg: pm.iter().map(|p| p.detg).collect(),
        v2: pm.iter().map(|p| p.v2).collect(),
        v: pm.iter().map(|p| p.v).collect(),
        u: pm.iter().map(|p| p.u).collect(),
    })
}

/// Extrinsic curvature of the graph.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub christoffel: Vec<Christoffel>,
    /// `nabla_ij rho`
    pub hessian: Vec<Tensor2>,
    pub h: Vec<Tensor2>,
    /// Shape operator `h^i_j = g^ik h_kj`.
    pub shape: Vec<Tensor2>,
    pub mean: Vec<f64>,
    pub norm_a2: Vec<f64>,
    pub ring_a2: Vec<f64>,
}

/// Connection coefficients of `g` from central differences of the nodal
/// metric components.
pub fn christoffel_symbols(grid: &FiberGrid, metric: &InducedMetric) -> Vec<Christoffel> {
    let n = grid.n();
    let comps: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| metric.g.iter().map(|g| g[i][j]).collect()).collect())
        .collect();
    exec::map_range(grid.len(), |k| {
        // dg[l][i][j] = d_l g_ij
        let mut dg = [[[0.0; 2]; 2]; 2];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    dg[l][i][j] = grid.partial_at(&comps[i][j], k, l, Parity::Even);
                }
            }
        }
        let ginv = &metric.ginv[k];
        let mut gam = [[[0.0; 2]; 2]; 2];
        for kk in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gam[kk][i][j] = 0.5
                        * (0..n)
                            .map(|l| ginv[kk][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]))
                            .sum::<f64>();
                }
            }
        }
        gam
    })
}

/// `h_ij = v (nabla_ij rho + w w' g_hat_ij)` with `H`, `|A|^2` and `|A_0|^2`.
pub fn second_fundamental_form(grid: &FiberGrid, metric: &InducedMetric) -> Curvature {
    let n = grid.n();
    let christoffel = christoffel_symbols(grid, metric);
    let per_node = exec::map_range(grid.len(), |k| {
        let gam = &christoffel[k];
        let dr = metric.drho[k];
        let wv = metric.warp[k];
        let ghat = grid.ghat(k);
        let mut hess = ZERO;
        let mut h = ZERO;
        for i in 0..n {
            for j in 0..n {
                let corr: f64 = (0..n).map(|l| gam[l][i][j] * dr[l]).sum();
                hess[i][j] = grid.second_at(&metric.rho, k, i, j, Parity::Even) - corr;
                h[i][j] = metric.v[k] * (hess[i][j] + wv.value * wv.d1 * ghat[i][j]);
            }
        }
        let shape = tensor::matmul(n, &metric.ginv[k], &h);
        let mean = tensor::trace(n, &shape);
        let norm_a2 = tensor::trace(n, &tensor::matmul(n, &shape, &shape));
        (hess, h, shape, mean, norm_a2, norm_a2 - mean * mean / n as f64)
    });
    Curvature {
        christoffel,
        hessian: per_node.iter().map(|p| p.0).collect(),
        h: per_node.iter().map(|p| p.1).collect(),
        shape: per_node.iter().map(|p| p.2).collect(),
        mean: per_node.iter().map(|p| p.3).collect(),
        norm_a2: per_node.iter().map(|p| p.4).collect(),
        ring_a2: per_node.iter().map(|p| p.5).collect(),
    }
}

/// Laplace-Beltrami operator of the graph metric applied to a nodal field,
/// in conservative form
/// `Delta f = (det g)^{-1/2} d_i((det g)^{1/2} g^{ij} d_j f)`.
///
/// Fluxes live on cell faces, where the metric is rebuilt from the face
/// average of `rho` and the face difference of `rho`; tangential derivatives
/// at a face average the neighbouring central differences. The divergence
/// telescopes, so `sum_k weight_k w^n v Delta f` vanishes up to rounding on
/// every closed fiber.
pub fn laplace_beltrami(
    grid: &FiberGrid,
    w: &WarpingFactor,
    metric: &InducedMetric,
    f: &[f64],
    parity: Parity,
    eps_v: f64,
) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::FieldLength { expected: grid.len(), got: f.len() });
    }
    let n = grid.n();
    let gd = grid.grid_dims();
    let rho = &metric.rho;
    // nodal derivatives, needed for the tangential part of each face gradient
    let df_nodes: Vec<Vec2> = if gd > 1 {
        exec::map_range(grid.len(), |k| [grid.partial_at(f, k, 0, parity), grid.partial_at(f, k, 1, parity)])
    } else {
        Vec::new()
    };
    // fluxes[k][d]: flux through the forward face of node k along d, and that face's v^2
    let fluxes = exec::map_range(grid.len(), |k| {
        let mut out = [0.0; 2];
        let mut v2min = f64::INFINITY;
        for d in 0..gd {
            let s = grid.face_density(k, d);
            if s == 0.0 {
                continue;
            }
            let (kp, _) = grid.neighbor(k, d, true);
            let h = grid.spacing(d);
            let mut drho_f = [0.0; 2];
            let mut df = [0.0; 2];
            drho_f[d] = (rho[kp] - rho[k]) / h;
            df[d] = (f[kp] - f[k]) / h;
            for o in (0..gd).filter(|&o| o != d) {
                drho_f[o] = 0.5 * (metric.drho[k][o] + metric.drho[kp][o]);
                df[o] = 0.5 * (df_nodes[k][o] + df_nodes[kp][o]);
            }
            let wf = w.value(0.5 * (rho[k] + rho[kp]));
            let (v2, ginv_row) = face_inverse_row(n, &grid.face_ghat(k, d), wf, drho_f, d);
            v2min = v2min.min(v2);
            let contra: f64 = (0..n).map(|j| ginv_row[j] * df[j]).sum();
            out[d] = pow_n(wf, n) * v2.max(0.0).sqrt() * s * contra;
        }
        (out, v2min)
    });
    worst_spacelike(fluxes.iter().map(|p| p.1), eps_v)?;
    Ok(exec::map_range(grid.len(), |k| {
        let mut div = 0.0;
        for d in 0..gd {
            let (km, reflected) = grid.neighbor(k, d, false);
            let back = if reflected { 0.0 } else { fluxes[km].0[d] };
            div += (fluxes[k].0[d] - back) / grid.spacing(d);
        }
        let jac = pow_n(metric.warp[k].value, n) * metric.v[k] * grid.density(k);
        div / jac
    }))
}

/// `Delta_Sigma Theta` in divergence form (the form the flow consumes).
pub fn laplace_theta_div(grid: &FiberGrid, w: &WarpingFactor, metric: &InducedMetric, eps_v: f64) -> Result<Vec<f64>> {
    laplace_beltrami(grid, w, metric, &metric.theta(), Parity::Even, eps_v)
}

/// Closed-form ambient Ricci tensor of `-dr^2 + w^2 g_hat` over a fiber with
/// `Ric_hat = lambda_hat g_hat`:
/// `Ric(d_r, d_r) = -n w''/w`, `Ric(d_r, V) = 0`,
/// `Ric(V, Y) = (lambda_hat + w w'' + (n-1) w'^2) g_hat(V, Y)`.
pub fn grw_ricci(wv: &WarpValues, lambda_hat: f64, n: usize, ghat: &Tensor2, x: &AmbientVec, y: &AmbientVec) -> f64 {
    let nf = n as f64;
    let time = -nf * wv.d2 / wv.value * x[0] * y[0];
    let mut fiber = 0.0;
    for i in 0..n {
        for j in 0..n {
            fiber += ghat[i][j] * x[1 + i] * y[1 + j];
        }
    }
    time + (lambda_hat + wv.value * wv.d2 + (nf - 1.0) * wv.d1 * wv.d1) * fiber
}

/// Ambient metric `-dr^2 + w^2 g_hat` applied to two chart vectors.
pub fn ambient_inner(wv: &WarpValues, n: usize, ghat: &Tensor2, x: &AmbientVec, y: &AmbientVec) -> f64 {
    let mut fiber = 0.0;
    for i in 0..n {
        for j in 0..n {
            fiber += ghat[i][j] * x[1 + i] * y[1 + j];
        }
    }
    -x[0] * y[0] + wv.value * wv.value * fiber
}

/// Future unit normal `nu = v^-1 (d_r + w^-2 g_hat^{ij} rho_j d_i)`.
pub fn normal_vector(n: usize, ghat: &Tensor2, wv: &WarpValues, drho: Vec2, v: f64) -> AmbientVec {
    let up = tensor::apply(n, &tensor::inverse(n, ghat), &drho);
    let w2 = wv.value * wv.value;
    [1.0 / v, up[0] / (w2 * v), up[1] / (w2 * v)]
}

/// Tangential gradient `g^{ij} d_j Theta x_i`, with `x_i = rho_i d_r + d_i`.
pub fn tangential_gradient_theta(n: usize, ginv: &Tensor2, wv: &WarpValues, drho: Vec2) -> AmbientVec {
    let dtheta = [wv.value * drho[0], wv.value * drho[1]];
    let c = tensor::apply(n, ginv, &dtheta);
    let r: f64 = (0..n).map(|i| c[i] * drho[i]).sum();
    [r, c[0], c[1]]
}

/// The lightlike vector `W = V + sqrt(u^2/w^2 - 1) grad_bar Theta / w`, where
/// `V` is the part of `nu` orthogonal to `grad_bar Theta = -w d_r`.
pub fn null_vector_w(nu: &AmbientVec, u: f64, w: f64) -> AmbientVec {
    let s = ((u * u) / (w * w) - 1.0).max(0.0).sqrt();
    [-s, nu[1], nu[2]]
}

/// `(Ric(grad Theta, nu), Ric(W, W))` at every node from the closed-form
/// GRW Ricci tensor. `Ric(W, W) = Ric(grad Theta, nu) / u`.
pub fn ambient_ricci_terms(grid: &FiberGrid, metric: &InducedMetric) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let lam = grid.lambda_hat();
    let vals = exec::map_range(grid.len(), |k| {
        let wv = &metric.warp[k];
        let ghat = grid.ghat(k);
        let nu = normal_vector(n, ghat, wv, metric.drho[k], metric.v[k]);
        let grad = tangential_gradient_theta(n, &metric.ginv[k], wv, metric.drho[k]);
        let ric = grw_ricci(wv, lam, n, ghat, &grad, &nu);
        (ric, ric / metric.u[k])
    });
    (vals.iter().map(|p| p.0).collect(), vals.iter().map(|p| p.1).collect())
}

/// Complete geometry of a graph, immutable once built.
#[derive(Debug, Clone)]
pub struct GraphState {
    pub metric: InducedMetric,
    pub curvature: Curvature,
    /// `Delta Theta`, divergence form.
    pub lap_theta: Vec<f64>,
    /// `u H - n w'`.
    pub lap_theta_trace: Vec<f64>,
    pub ric_grad_theta_nu: Vec<f64>,
    pub ric_ww: Vec<f64>,
}

impl GraphState {
    pub fn new(grid: &FiberGrid, w: &WarpingFactor, rho: &[f64], eps_v: f64) -> Result<Self> {
        let metric = induced_metric(grid, w, rho, eps_v)?;
        let lap_theta = laplace_theta_div(grid, w, &metric, eps_v)?;
        Ok(Self::from_parts(grid, metric, lap_theta))
    }

    /// Completes a state from an already computed metric and divergence-form
    /// `Delta Theta`.
    pub(crate) fn from_parts(grid: &FiberGrid, metric: InducedMetric, lap_theta: Vec<f64>) -> Self {
        let curvature = second_fundamental_form(grid, &metric);
        let n = grid.n() as f64;
        let lap_theta_trace = (0..grid.len())
            .map(|k| metric.u[k] * curvature.mean[k] - n * metric.warp[k].d1)
            .collect();
        let (ric_grad_theta_nu, ric_ww) = ambient_ricci_terms(grid, &metric);
        Self { metric, curvature, lap_theta, lap_theta_trace, ric_grad_theta_nu, ric_ww }
    }

    pub fn len(&self) -> usize {
        self.metric.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho(&self) -> &[f64] {
        &self.metric.rho
    }

    pub fn theta(&self) -> Vec<f64> {
        self.metric.theta()
    }

    /// Principal curvatures `kappa_1 <= kappa_2` at node `k`.
    pub fn principal_curvatures(&self, n: usize, k: usize) -> Vec2 {
        tensor::eigenvalues(n, &self.curvature.shape[k])
    }

    /// `sup |Delta Theta_div - Delta Theta_trace|`.
    pub fn trace_consistency(&self) -> f64 {
        exec::max(self.lap_theta.iter().zip(&self.lap_theta_trace).map(|(a, b)| (a - b).abs()))
    }
}

/// Both forms of `Delta_Sigma Theta` for a built state: `(divergence, trace)`.
pub fn laplace_theta(state: &GraphState) -> (Vec<f64>, Vec<f64>) {
    (state.lap_theta.clone(), state.lap_theta_trace.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus2(n: usize) -> FiberGrid {
        FiberGrid::torus2(n, n, 2.0 * PI, 2.0 * PI).unwrap()
    }

    #[test]
    fn slice_has_umbilic_closed_form() {
        let g = torus2(8);
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let c = 0.7;
        let s = GraphState::new(&g, &w, &vec![c; g.len()], 1e-4).unwrap();
        let wv = w.eval(c).unwrap();
        for k in 0..g.len() {
            assert_eq!(s.metric.v[k], 1.0);
            assert!((s.metric.u[k] - wv.value).abs() < 1e-15);
            assert!((s.curvature.mean[k] - 2.0 * wv.d1 / wv.value).abs() < 1e-14);
            assert!(s.curvature.ring_a2[k].abs() < 1e-14);
            assert_eq!(s.lap_theta[k], 0.0);
        }
        assert!(s.trace_consistency() < 1e-14);
    }

    #[test]
    fn de_sitter_equator_is_maximal() {
        let g = FiberGrid::sphere2_axisym(32).unwrap();
        let w = WarpingFactor::de_sitter(-1.0, 1.0);
        let s = GraphState::new(&g, &w, &vec![0.0; g.len()], 1e-4).unwrap();
        assert!(s.curvature.mean.iter().all(|h| h.abs() < 1e-15));
        let s = GraphState::new(&g, &w, &vec![0.5; g.len()], 1e-4).unwrap();
        let expect = 2.0 * 0.5f64.tanh();
        assert!(s.curvature.mean.iter().all(|h| (h - expect).abs() < 1e-14));
    }

    fn minkowski_curve_error(n: usize) -> f64 {
        // t = eps sin x in flat 2-d Minkowski space: H = f'' / (1 - f'^2)^{3/2}
        let g = FiberGrid::torus1(n, 2.0 * PI).unwrap();
        let w = WarpingFactor::product(-1.0, 1.0);
        let eps = 0.4;
        let rho: Vec<f64> = (0..n).map(|k| eps * g.coords(k)[0].sin()).collect();
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        exec::max((0..n).map(|k| {
            let x = g.coords(k)[0];
            let (f1, f2) = (eps * x.cos(), -eps * x.sin());
            (s.curvature.mean[k] - f2 / (1.0 - f1 * f1).powf(1.5)).abs()
        }))
    }

    #[test]
    fn curve_curvature_converges_at_second_order() {
        let e1 = minkowski_curve_error(64);
        let e2 = minkowski_curve_error(128);
        assert!(e1 < 1e-2);
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn determinant_identity_holds_to_rounding() {
        let g = torus2(16);
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let rho: Vec<f64> = (0..g.len())
            .map(|k| {
                let x = g.coords(k);
                0.3 + 0.2 * (x[0] + 2.0 * x[1]).sin()
            })
            .collect();
        let m = induced_metric(&g, &w, &rho, 1e-4).unwrap();
        assert!(m.detg_identity_residual(&g) < 1e-12);
        for k in 0..g.len() {
            assert!(m.v2[k] > 0.0 && m.v2[k] <= 1.0);
            assert!(m.u[k] >= m.warp[k].value);
        }
    }

    #[test]
    fn divergence_form_integrates_to_zero() {
        let g = FiberGrid::sphere2_axisym(48).unwrap();
        let w = WarpingFactor::de_sitter(-1.0, 1.0);
        let rho: Vec<f64> = (0..g.len()).map(|k| 0.2 * g.coords(k)[0].cos().powi(2)).collect();
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        let total = exec::sum((0..g.len()).map(|k| {
            g.weights()[k] * s.metric.warp[k].value.powi(2) * s.metric.v[k] * s.lap_theta[k]
        }));
        let area = exec::sum((0..g.len()).map(|k| g.weights()[k] * s.metric.warp[k].value.powi(2) * s.metric.v[k]));
        assert!(total.abs() <= 1e-13 * area, "{total}");
    }

    #[test]
    fn both_laplacian_forms_agree_under_refinement() {
        let err = |n: usize| {
            let g = torus2(n);
            let w = WarpingFactor::gaussian(-1.0, 2.0);
            let rho: Vec<f64> = (0..g.len())
                .map(|k| {
                    let x = g.coords(k);
                    0.4 + 0.15 * x[0].sin() * x[1].cos()
                })
                .collect();
            GraphState::new(&g, &w, &rho, 1e-4).unwrap().trace_consistency()
        };
        let (e1, e2) = (err(32), err(64));
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn ricci_terms_vanish_on_flat_ambient_and_are_nonnegative_under_ncc() {
        let g = torus2(16);
        let rho: Vec<f64> = (0..g.len()).map(|k| 0.3 * g.coords(k)[0].sin()).collect();
        let flat = GraphState::new(&g, &WarpingFactor::product(-1.0, 1.0), &rho, 1e-4).unwrap();
        assert!(flat.ric_grad_theta_nu.iter().all(|x| x.abs() < 1e-15));
        let gauss = GraphState::new(&g, &WarpingFactor::gaussian(-1.0, 2.0), &rho, 1e-4).unwrap();
        assert!(gauss.ric_grad_theta_nu.iter().all(|&x| x >= -1e-10));
        assert!(gauss.ric_ww.iter().all(|&x| x >= -1e-10));
    }

    #[test]
    fn timelike_gradient_is_rejected() {
        let g = FiberGrid::torus1(32, 2.0 * PI).unwrap();
        let w = WarpingFactor::product(-2.0, 2.0);
        let rho: Vec<f64> = (0..32).map(|k| 1.5 * g.coords(k)[0].sin()).collect();
        assert!(matches!(GraphState::new(&g, &w, &rho, 1e-4), Err(Error::Spacelike { .. })));
    }
}
