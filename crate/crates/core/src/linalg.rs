//! Dense kernels for the per-node n×n (n ≤ 3) matrices.

use crate::scalar::Real;

pub type Mat3<T> = [[T; 3]; 3];

pub fn zero<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn identity<T: Real>(n: usize) -> Mat3<T> {
    let mut m = zero();
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = T::one();
    }
    m
}

pub fn det<T: Real>(a: &Mat3<T>, n: usize) -> T {
    match n {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
    }
}

/// Inverse via the adjugate; `None` when the determinant vanishes exactly.
pub fn inverse<T: Real>(a: &Mat3<T>, n: usize) -> Option<Mat3<T>> {
    let d = det(a, n);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut out = zero();
    match n {
        1 => out[0][0] = T::one() / d,
        2 => {
            out[0][0] = a[1][1] / d;
            out[0][1] = -a[0][1] / d;
            out[1][0] = -a[1][0] / d;
            out[1][1] = a[0][0] / d;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
                }
            }
        }
    }
    Some(out)
}

pub fn matmul<T: Real>(a: &Mat3<T>, b: &Mat3<T>, n: usize) -> Mat3<T> {
    let mut out = zero();
    for i in 0..n {
        for j in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = zero();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Lower-triangular `L` with `A = L Lᵀ`; `None` if `A` is not positive definite.
pub fn cholesky<T: Real>(a: &Mat3<T>, n: usize) -> Option<Mat3<T>> {
    let mut l = zero::<T>();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > T::zero()) {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Some(l)
}

/// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues<T: Real>(a: &Mat3<T>, n: usize) -> [T; 3] {
    let mut m = *a;
    for _ in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off <= T::epsilon() * T::epsilon() * frob2(&m, n) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev = [T::zero(); 3];
    for i in 0..n {
        ev[i] = m[i][i];
    }
    ev[..n].sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

fn frob2<T: Real>(a: &Mat3<T>, n: usize) -> T {
    let mut s = T::zero();
    for row in a.iter().take(n) {
        for x in row.iter().take(n) {
            s += *x * *x;
        }
    }
    s
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm<T: Real>(a: &Mat3<T>, n: usize) -> T {
    let ev = sym_eigenvalues(a, n);
    ev[0].abs().max(ev[n - 1].abs())
}

/// Singular values (ascending) of an m×n matrix stored in the top-left block.
pub fn singular_values<T: Real>(j: &Mat3<T>, m: usize, n: usize) -> Vec<T> {
    // eigenvalues of the smaller Gram matrix
    let k = m.min(n);
    let mut gram = zero::<T>();
    for a in 0..k {
        for b in 0..k {
            let mut s = T::zero();
            if m <= n {
                for i in 0..n {
                    s += j[a][i] * j[b][i];
                }
            } else {
                for i in 0..m {
                    s += j[i][a] * j[i][b];
                }
            }
            gram[a][b] = s;
        }
    }
    sym_eigenvalues(&gram, k)[..k]
        .iter()
        .map(|x| x.max(T::zero()).sqrt())
        .collect()
}
