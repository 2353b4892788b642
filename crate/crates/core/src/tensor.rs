//! Small fixed-size tensors for fibers of dimension one or two. Components
//! beyond the active dimension `n` are kept at zero.

pub type Vec2 = [f64; 2];
pub type Tensor2 = [[f64; 2]; 2];
/// Connection coefficients, indexed `[k][i][j]` for `Gamma^k_ij`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

pub const ZERO: Tensor2 = [[0.0; 2]; 2];

pub fn identity(n: usize) -> Tensor2 {
    let mut m = ZERO;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn det(n: usize, m: &Tensor2) -> f64 {
    match n {
        1 => m[0][0],
        _ => m[0][0] * m[1][1] - m[0][1] * m[1][0],
    }
}

pub fn inverse(n: usize, m: &Tensor2) -> Tensor2 {
    match n {
        1 => [[1.0 / m[0][0], 0.0], [0.0, 0.0]],
        _ => {
            let r = 1.0 / det(2, m);
            [[m[1][1] * r, -m[0][1] * r], [-m[1][0] * r, m[0][0] * r]]
        }
    }
}

pub fn matmul(n: usize, a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let mut c = ZERO;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn trace(n: usize, m: &Tensor2) -> f64 {
    (0..n).map(|i| m[i][i]).sum()
}

/// `m^{ij} a_i b_j`.
pub fn contract(n: usize, m: &Tensor2, a: &Vec2, b: &Vec2) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += m[i][j] * a[i] * b[j];
        }
    }
    s
}

/// `m^i_j v^j`.
pub fn apply(n: usize, m: &Tensor2, v: &Vec2) -> Vec2 {
    let mut out = [0.0; 2];
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

/// Eigenvalues (ascending) of the mixed tensor `m`, assumed to have real
/// spectrum (the shape operator is self-adjoint with respect to `g`).
pub fn eigenvalues(n: usize, m: &Tensor2) -> Vec2 {
    match n {
        1 => [m[0][0], 0.0],
        _ => {
            let tr = m[0][0] + m[1][1];
            let d = det(2, m);
            let disc = (0.25 * tr * tr - d).max(0.0).sqrt();
            [0.5 * tr - disc, 0.5 * tr + disc]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = [[2.0, 0.3], [0.3, 1.5]];
        let p = matmul(2, &m, &inverse(2, &m));
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eigenvalues_of_symmetric() {
        let ev = eigenvalues(2, &[[3.0, 1.0], [1.0, 3.0]]);
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 4.0).abs() < 1e-14);
    }
}
