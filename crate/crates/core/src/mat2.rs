//! Fixed 2×2 matrices. One-dimensional problems use only the `[0][0]` entry.

pub type Mat = [[f64; 2]; 2];
pub type Point = [f64; 2];

pub const ZERO: Mat = [[0.0; 2]; 2];
pub const IDENTITY: Mat = [[1.0, 0.0], [0.0, 1.0]];

/// Restricts `a` to its leading `d×d` block, zeroing the rest.
pub fn truncate(a: Mat, d: usize) -> Mat {
    if d == 1 {
        [[a[0][0], 0.0], [0.0, 0.0]]
    } else {
        a
    }
}

pub fn transpose(a: Mat) -> Mat {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn sub(a: Mat, b: Mat) -> Mat {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

pub fn scale(a: Mat, s: f64) -> Mat {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn mul_vec(a: Mat, v: Point) -> Point {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Smallest eigenvalue of the symmetric part, restricted to the leading d×d block.
pub fn sym_min_eig(a: Mat, d: usize) -> f64 {
    if d == 1 {
        return a[0][0];
    }
    let p = a[0][0];
    let q = a[1][1];
    let r = 0.5 * (a[0][1] + a[1][0]);
    let mean = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + r * r).sqrt();
    mean - rad
}

/// Spectral norm of the leading d×d block.
pub fn norm2(a: Mat, d: usize) -> f64 {
    if d == 1 {
        return a[0][0].abs();
    }
    let s11 = a[0][0] * a[0][0] + a[1][0] * a[1][0];
    let s22 = a[0][1] * a[0][1] + a[1][1] * a[1][1];
    let s12 = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let mean = 0.5 * (s11 + s22);
    let rad = (0.25 * (s11 - s22) * (s11 - s22) + s12 * s12).sqrt();
    (mean + rad).max(0.0).sqrt()
}

pub fn max_abs(a: Mat) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}
