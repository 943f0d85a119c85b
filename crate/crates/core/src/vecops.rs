//! Small dense helpers over `&[f64]` points. Dimensions here are tiny
//! (state dimension of a single particle), so plain loops win.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = M v` for a row-major `rows × cols` matrix.
#[inline]
pub fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&m[r * cols..(r + 1) * cols], v);
    }
}

/// Frobenius norm squared.
#[inline]
pub fn frob_sq(m: &[f64]) -> f64 {
    norm_sq(m)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// `tr(A B)` for row-major square `d × d` matrices.
pub fn trace_product(a: &[f64], b: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += a[i * d + k] * b[k * d + i];
        }
    }
    acc
}

/// `σ σᵀ` for a row-major `d × m` matrix, written into `out` (`d × d`).
pub fn outer_self(sigma: &[f64], d: usize, m: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = dot(&sigma[i * m..(i + 1) * m], &sigma[j * m..(j + 1) * m]);
        }
    }
}
