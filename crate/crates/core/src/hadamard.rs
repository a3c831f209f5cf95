//! Walsh-Hadamard transform over `(Z/2)^n`.
//!
//! A matrix with entries `M[i][j] = c[i ^ j]` is diagonalized by the
//! characters `chi(delta) = (-1)^{popcount(chi & delta)}`: its eigenvalues are
//! the transform of `c`.

use num_complex::Complex64;

/// In-place unnormalized transform; `data.len()` must be a power of two.
pub fn fwht(data: &mut [Complex64]) {
    let len = data.len();
    assert!(len.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for k in block..block + h {
                let (x, y) = (data[k], data[k + h]);
                data[k] = x + y;
                data[k + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Inverse of [`fwht`].
pub fn ifwht(data: &mut [Complex64]) {
    fwht(data);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// `(-1)^{popcount(chi & delta)}`.
pub fn character(chi: usize, delta: usize) -> f64 {
    if (chi & delta).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
