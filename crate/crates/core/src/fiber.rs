//! Discrete compact fibers: flat tori `T^1`, `T^2` with uniform periodic grids
//! and the unit sphere `S^2` restricted to rotationally symmetric fields.
//!
//! Node ordering is row-major: on `T^2` node `(i, j)` (index `i` along the
//! first coordinate) has flat index `i * n2 + j`. The axisymmetric sphere uses
//! the polar angle only, with nodes at cell midpoints `theta_k = (k + 1/2) pi / N`
//! and the chart metric `diag(1, sin^2 theta)`. Fields on the sphere are
//! extended across the poles by reflection, even or odd according to their
//! [`Parity`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{identity, Tensor2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    Torus1,
    Torus2,
    Sphere2Axisym,
}

impl FiberKind {
    pub fn name(self) -> &'static str {
        match self {
            FiberKind::Torus1 => "torus1",
            FiberKind::Torus2 => "torus2",
            FiberKind::Sphere2Axisym => "sphere2_axisym",
        }
    }
}

impl std::str::FromStr for FiberKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus1" => Ok(FiberKind::Torus1),
            "torus2" => Ok(FiberKind::Torus2),
            "sphere2_axisym" => Ok(FiberKind::Sphere2Axisym),
            other => Err(Error::Invalid(format!("unknown fiber kind '{other}'"))),
        }
    }
}

/// Behaviour of a field under reflection through a pole of the sphere chart.
/// Scalars are even; polar-angle components of vectors are odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// Parity of the derivative of a field with this parity.
    pub fn derivative(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiberGrid {
    kind: FiberKind,
    shape: [usize; 2],
    spacing: [f64; 2],
    side_lengths: [f64; 2],
    ghat: Vec<Tensor2>,
    weights: Vec<f64>,
    density: Vec<f64>,
    lambda_hat: f64,
    second_scale: f64,
    /// `links[k][2 d + forward]`: neighbour of node `k` along `d`.
    links: Vec<[usize; 4]>,
}

impl FiberGrid {
    pub fn torus1(n: usize, length: f64) -> Result<Self> {
        check_resolution(n)?;
        check_length(length)?;
        let h = length / n as f64;
        Ok(Self {
            kind: FiberKind::Torus1,
            shape: [n, 1],
            spacing: [h, 1.0],
            side_lengths: [length, 0.0],
            ghat: vec![identity(1); n],
            weights: vec![h; n],
            density: vec![1.0; n],
            lambda_hat: 0.0,
            second_scale: 1.0,
            links: Vec::new(),
        }
        .linked())
    }

    pub fn torus2(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        check_resolution(n1)?;
        check_resolution(n2)?;
        check_length(l1)?;
        check_length(l2)?;
        let (h1, h2) = (l1 / n1 as f64, l2 / n2 as f64);
        let len = n1 * n2;
        Ok(Self {
            kind: FiberKind::Torus2,
            shape: [n1, n2],
            spacing: [h1, h2],
            side_lengths: [l1, l2],
            ghat: vec![identity(2); len],
            weights: vec![h1 * h2; len],
            density: vec![1.0; len],
            lambda_hat: 0.0,
            second_scale: 1.0,
            links: Vec::new(),
        }
        .linked())
    }

    /// Unit sphere, `n` cells in the polar angle. Cell weights are the exact
    /// areas `2 pi (cos theta_{k-1/2} - cos theta_{k+1/2})`.
    pub fn sphere2_axisym(n: usize) -> Result<Self> {
        check_resolution(n)?;
        let h = PI / n as f64;
        let density: Vec<f64> = (0..n)
            .map(|k| {
                let lo = k as f64 * h;
                ((lo).cos() - (lo + h).cos()) / h
            })
            .collect();
        let ghat = (0..n)
            .map(|k| {
                let s = ((k as f64 + 0.5) * h).sin();
                [[1.0, 0.0], [0.0, s * s]]
            })
            .collect();
        Ok(Self {
            kind: FiberKind::Sphere2Axisym,
            shape: [n, 1],
            spacing: [h, 1.0],
            side_lengths: [PI, 2.0 * PI],
            ghat,
            weights: density.iter().map(|m| 2.0 * PI * h * m).collect(),
            density,
            lambda_hat: 1.0,
            second_scale: 1.0,
            links: Vec::new(),
        }
        .linked())
    }

    /// Scales every compact second-difference stencil by `factor`. Only
    /// meant for fault-injection tests of the verification suite.
    #[doc(hidden)]
    pub fn with_corrupted_second_differences(mut self, factor: f64) -> Self {
        self.second_scale = factor;
        self
    }

    pub fn kind(&self) -> FiberKind {
        self.kind
    }

    /// Fiber dimension `n` (tensor rank of the chart).
    pub fn n(&self) -> usize {
        match self.kind {
            FiberKind::Torus1 => 1,
            _ => 2,
        }
    }

    /// Number of discretized directions (1 for `T^1` and the axisymmetric sphere).
    pub fn grid_dims(&self) -> usize {
        match self.kind {
            FiberKind::Torus2 => 2,
            _ => 1,
        }
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.spacing[d]
    }

    /// Smallest grid spacing over the discretized directions.
    pub fn min_spacing(&self) -> f64 {
        (0..self.grid_dims()).map(|d| self.spacing[d]).fold(f64::INFINITY, f64::min)
    }

    pub fn side_lengths(&self) -> [f64; 2] {
        self.side_lengths
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ghat(&self, k: usize) -> &Tensor2 {
        &self.ghat[k]
    }

    /// Ratio of the cell measure to `prod(spacing)` (1 on tori, about
    /// `sin theta` on the sphere). The discrete divergence divides by it.
    pub fn density(&self, k: usize) -> f64 {
        self.density[k]
    }

    pub fn fiber_volume(&self) -> f64 {
        crate::exec::sum(self.weights.iter().copied())
    }

    /// Chart coordinates of node `k`.
    pub fn coords(&self, k: usize) -> Vec2 {
        match self.kind {
            FiberKind::Torus1 => [k as f64 * self.spacing[0], 0.0],
            FiberKind::Torus2 => {
                let (i, j) = (k / self.shape[1], k % self.shape[1]);
                [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
            }
            FiberKind::Sphere2Axisym => [(k as f64 + 0.5) * self.spacing[0], 0.0],
        }
    }

    /// Neighbour of node `k` one step along direction `d`. The flag reports a
    /// reflection through a pole (sphere only), in which case the neighbour is
    /// the mirror image of a ghost node.
    #[inline]
    pub fn neighbor(&self, k: usize, d: usize, forward: bool) -> (usize, bool) {
        let m = self.links[k][2 * d + forward as usize];
        let reflected = self.kind == FiberKind::Sphere2Axisym && m == k && d == 0;
        (m, reflected)
    }

    fn linked(mut self) -> Self {
        let dims = self.grid_dims();
        self.links = (0..self.len())
            .map(|k| {
                let mut l = [k; 4];
                for d in 0..dims {
                    l[2 * d] = self.compute_neighbor(k, d, false).0;
                    l[2 * d + 1] = self.compute_neighbor(k, d, true).0;
                }
                l
            })
            .collect();
        self
    }

    fn compute_neighbor(&self, k: usize, d: usize, forward: bool) -> (usize, bool) {
        match self.kind {
            FiberKind::Torus1 => {
                let n = self.shape[0];
                (if forward { (k + 1) % n } else { (k + n - 1) % n }, false)
            }
            FiberKind::Torus2 => {
                let (n1, n2) = (self.shape[0], self.shape[1]);
                let (i, j) = (k / n2, k % n2);
                let (i, j) = match (d, forward) {
                    (0, true) => ((i + 1) % n1, j),
                    (0, false) => ((i + n1 - 1) % n1, j),
                    (_, true) => (i, (j + 1) % n2),
                    (_, false) => (i, (j + n2 - 1) % n2),
                };
                (i * n2 + j, false)
            }
            FiberKind::Sphere2Axisym => {
                let n = self.shape[0];
                if forward {
                    if k + 1 == n {
                        (k, true)
                    } else {
                        (k + 1, false)
                    }
                } else if k == 0 {
                    (0, true)
                } else {
                    (k - 1, false)
                }
            }
        }
    }

    #[inline]
    fn neighbor_value(&self, f: &[f64], k: usize, d: usize, forward: bool, parity: Parity) -> f64 {
        let (m, reflected) = self.neighbor(k, d, forward);
        if reflected {
            parity.sign() * f[m]
        } else {
            f[m]
        }
    }

    fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::FieldLength { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    fn check_direction(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::Direction { dir: i, n: self.n() });
        }
        Ok(())
    }

    /// Second-order central difference `d_i f` of an even field.
    pub fn partial(&self, f: &[f64], i: usize) -> Result<Vec<f64>> {
        self.partial_with_parity(f, i, Parity::Even)
    }

    pub fn partial_with_parity(&self, f: &[f64], i: usize, parity: Parity) -> Result<Vec<f64>> {
        self.check_field(f)?;
        self.check_direction(i)?;
        if i >= self.grid_dims() {
            // azimuthal direction of the axisymmetric sphere
            return Ok(vec![0.0; f.len()]);
        }
        let inv = 0.5 / self.spacing[i];
        Ok(crate::exec::map_range(f.len(), |k| {
            (self.neighbor_value(f, k, i, true, parity) - self.neighbor_value(f, k, i, false, parity)) * inv
        }))
    }

    /// Central difference at a single node (no allocation).
    #[inline]
    pub fn partial_at(&self, f: &[f64], k: usize, i: usize, parity: Parity) -> f64 {
        if i >= self.grid_dims() {
            return 0.0;
        }
        (self.neighbor_value(f, k, i, true, parity) - self.neighbor_value(f, k, i, false, parity))
            * (0.5 / self.spacing[i])
    }

    /// Second partial derivative `d_i d_j f` at node `k`: the compact
    /// three-point stencil on the diagonal, nested central differences for
    /// the mixed term.
    #[inline]
    pub fn second_at(&self, f: &[f64], k: usize, i: usize, j: usize, parity: Parity) -> f64 {
        let gd = self.grid_dims();
        if i >= gd || j >= gd {
            return 0.0;
        }
        if i == j {
            let h = self.spacing[i];
            let fp = self.neighbor_value(f, k, i, true, parity);
            let fm = self.neighbor_value(f, k, i, false, parity);
            return self.second_scale * (fp - 2.0 * f[k] + fm) / (h * h);
        }
        // torus2 only: reflections never occur
        let (kp, _) = self.neighbor(k, i, true);
        let (km, _) = self.neighbor(k, i, false);
        (self.partial_at(f, kp, j, parity) - self.partial_at(f, km, j, parity)) * (0.5 / self.spacing[i])
    }

    /// `g_hat` at the face between node `k` and its forward neighbour along `d`.
    pub fn face_ghat(&self, k: usize, d: usize) -> Tensor2 {
        match self.kind {
            FiberKind::Sphere2Axisym => {
                let s = self.face_sin(k, d);
                [[1.0, 0.0], [0.0, s * s]]
            }
            _ => self.ghat[k],
        }
    }

    /// Chart density `sqrt(det g_hat)` at the forward face of node `k`.
    /// Exactly zero on the polar faces.
    pub fn face_density(&self, k: usize, d: usize) -> f64 {
        match self.kind {
            FiberKind::Sphere2Axisym => self.face_sin(k, d),
            _ => 1.0,
        }
    }

    fn face_sin(&self, k: usize, _d: usize) -> f64 {
        if k + 1 == self.shape[0] {
            0.0
        } else {
            ((k + 1) as f64 * self.spacing[0]).sin()
        }
    }

    /// Cubic (tensor-product on `T^2`) Lagrange interpolation of a nodal
    /// field at chart point `p`. `None` outside the chart of the sphere.
    pub fn interpolate(&self, f: &[f64], parity: Parity, p: Vec2) -> Option<f64> {
        match self.kind {
            FiberKind::Torus1 => {
                let (idx, w) = periodic_stencil(p[0], self.spacing[0], self.shape[0]);
                Some((0..4).map(|a| w[a] * f[idx[a]]).sum())
            }
            FiberKind::Torus2 => {
                let (ix, wx) = periodic_stencil(p[0], self.spacing[0], self.shape[0]);
                let (iy, wy) = periodic_stencil(p[1], self.spacing[1], self.shape[1]);
                let n2 = self.shape[1];
                let mut s = 0.0;
                for a in 0..4 {
                    let mut row = 0.0;
                    for b in 0..4 {
                        row += wy[b] * f[ix[a] * n2 + iy[b]];
                    }
                    s += wx[a] * row;
                }
                Some(s)
            }
            FiberKind::Sphere2Axisym => {
                let theta = p[0];
                if !(0.0..=PI).contains(&theta) {
                    return None;
                }
                let n = self.shape[0] as isize;
                let s = theta / self.spacing[0] - 0.5;
                let i0 = s.floor();
                let w = lagrange4(s - i0);
                let mut acc = 0.0;
                for (a, wa) in w.iter().enumerate() {
                    let mut j = i0 as isize - 1 + a as isize;
                    let mut sign = 1.0;
                    if j < 0 {
                        j = -1 - j;
                        sign = parity.sign();
                    } else if j >= n {
                        j = 2 * n - 1 - j;
                        sign = parity.sign();
                    }
                    acc += wa * sign * f[j as usize];
                }
                Some(acc)
            }
        }
    }
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Invalid(format!("grid resolution must be at least 4, got {n}")));
    }
    Ok(())
}

fn check_length(l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Invalid(format!("side length must be positive, got {l}")));
    }
    Ok(())
}

fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn periodic_stencil(x: f64, h: f64, n: usize) -> ([usize; 4], [f64; 4]) {
    let s = x / h;
    let i0 = s.floor();
    let w = lagrange4(s - i0);
    let ni = n as i64;
    let mut idx = [0usize; 4];
    for (a, slot) in idx.iter_mut().enumerate() {
        *slot = (i0 as i64 - 1 + a as i64).rem_euclid(ni) as usize;
    }
    (idx, w)
}
