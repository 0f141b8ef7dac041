//! Small dense complex matrices.
//!
//! Everything here works on `d x d` or `2d x 2d` matrices with `d <= 2` in
//! practice, so plain row-major slices are used on the hot paths and
//! `nalgebra` where allocation does not matter.

use nalgebra::DMatrix;

use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Determinant of a row-major `n x n` complex matrix by Gaussian elimination
/// with partial pivoting.
pub fn det(n: usize, a: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), n * n);
    match n {
        0 => C64::new(1.0, 0.0),
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let mut m = a.to_vec();
            let mut det = C64::new(1.0, 0.0);
            for col in 0..n {
                let pivot = (col..n)
                    .max_by(|&i, &j| m[i * n + col].norm().total_cmp(&m[j * n + col].norm()))
                    .unwrap();
                if m[pivot * n + col].norm() == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if pivot != col {
                    for k in 0..n {
                        m.swap(pivot * n + k, col * n + k);
                    }
                    det = -det;
                }
                let diag = m[col * n + col];
                det *= diag;
                for row in col + 1..n {
                    let f = m[row * n + col] / diag;
                    for k in col..n {
                        let v = m[col * n + k];
                        m[row * n + k] -= f * v;
                    }
                }
            }
            det
        }
    }
}

/// Solve `A x = b` for a small complex system. Returns `None` when `A` is
/// numerically singular.
pub fn solve(a: &CMatrix, b: &[C64]) -> Option<Vec<C64>> {
    let lu = a.clone().lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    lu.solve(&rhs).map(|x| x.as_slice().to_vec())
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    a.clone().try_inverse()
}

/// Diagonal matrix from real entries.
pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Symplectic unit `J = [[0, I], [-I, 0]]` of size `2d`.
pub fn symplectic_unit(d: usize) -> CMatrix {
    CMatrix::from_fn(2 * d, 2 * d, |i, j| {
        if j == i + d {
            C64::new(1.0, 0.0)
        } else if i == j + d {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}
