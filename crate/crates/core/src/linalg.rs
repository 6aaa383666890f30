//! Small dense linear algebra on stack arrays.
//!
//! Every chart in this crate has dimension at most [`MAX_DIM`], so hot paths
//! (Christoffel symbols, geodesic right-hand sides) work on fixed `4 × 4`
//! arrays and only touch the leading `n × n` block.

use nalgebra::{DMatrix, SymmetricEigen};

pub const MAX_DIM: usize = 4;

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

pub const ZERO_VEC: Vector = [0.0; MAX_DIM];
pub const ZERO_MAT: Matrix = [[0.0; MAX_DIM]; MAX_DIM];

pub fn identity(n: usize) -> Matrix {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn to_vector(xs: &[f64]) -> Vector {
    let mut v = ZERO_VEC;
    v[..xs.len()].copy_from_slice(xs);
    v
}

/// `xᵀ M y` over the leading block.
pub fn bilinear(m: &Matrix, n: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[i][j] * y[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub fn mat_vec(m: &Matrix, n: usize, x: &[f64]) -> Vector {
    let mut out = ZERO_VEC;
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * x[j]).sum();
    }
    out
}

pub fn dot(n: usize, x: &[f64], y: &[f64]) -> f64 {
    (0..n).map(|i| x[i] * y[i]).sum()
}

pub fn norm(n: usize, x: &[f64]) -> f64 {
    dot(n, x, x).sqrt()
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` when a pivot is
/// negligible relative to the largest entry.
pub fn inverse(m: &Matrix, n: usize) -> Option<Matrix> {
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j].abs())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let mut a = *m;
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

pub fn determinant(m: &Matrix, n: usize) -> f64 {
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for j in col..n {
                a[r][j] -= f * a[col][j];
            }
        }
    }
    det
}

/// Determinant of the matrix whose columns are `cols`.
pub fn det_columns(cols: &[Vector], n: usize) -> f64 {
    let mut m = ZERO_MAT;
    for (j, c) in cols.iter().enumerate().take(n) {
        for i in 0..n {
            m[i][j] = c[i];
        }
    }
    determinant(&m, n)
}

/// Solve `M x = b` for a small dense system.
pub fn solve(m: &Matrix, n: usize, b: &[f64]) -> Option<Vector> {
    let inv = inverse(m, n)?;
    Some(mat_vec(&inv, n, b))
}

/// Sorted eigenvalues of the symmetric leading block.
pub fn sym_eigenvalues(m: &Matrix, n: usize) -> Vec<f64> {
    let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(dm).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gram-Schmidt with respect to a (possibly indefinite) bilinear form.
/// Vectors with `|⟨v,v⟩|` below `tol` are rejected.
pub fn gram_schmidt(g: &Matrix, n: usize, vectors: &[Vector], tol: f64) -> Option<Vec<Vector>> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    let mut signs: Vec<f64> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = *v;
        for (e, s) in out.iter().zip(&signs) {
            let c = bilinear(g, n, &w, e) * s;
            for i in 0..n {
                w[i] -= c * e[i];
            }
        }
        let q = bilinear(g, n, &w, &w);
        if q.abs() < tol {
            return None;
        }
        let s = q.abs().sqrt();
        for wi in w.iter_mut().take(n) {
            *wi /= s;
        }
        out.push(w);
        signs.push(q.signum());
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let mut m = ZERO_MAT;
        let vals = [[2.0, 1.0, 0.5], [1.0, -3.0, 0.2], [0.5, 0.2, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = vals[i][j];
            }
        }
        let inv = inverse(&m, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let d = determinant(&m, 3);
        let expected = 2.0 * (-12.0 - 0.04) - 1.0 * (4.0 - 0.1) + 0.5 * (0.2 + 1.5);
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut m = ZERO_MAT;
        m[0][0] = 1.0;
        m[0][1] = 2.0;
        m[1][0] = 2.0;
        m[1][1] = 4.0;
        assert!(inverse(&m, 2).is_none());
    }

    #[test]
    fn lorentzian_gram_schmidt() {
        let mut g = identity(2);
        g[0][0] = -1.0;
        let basis = gram_schmidt(&g, 2, &[[1.0, 0.5, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]], 1e-12).unwrap();
        assert!((bilinear(&g, 2, &basis[0], &basis[0]) + 1.0).abs() < 1e-14);
        assert!((bilinear(&g, 2, &basis[1], &basis[1]) - 1.0).abs() < 1e-14);
        assert!(bilinear(&g, 2, &basis[0], &basis[1]).abs() < 1e-14);
    }
}
