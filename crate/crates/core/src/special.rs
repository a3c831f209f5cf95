//! Complex gamma function and closed-form symbols of the Cesàro family.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lanczos parameter `g`.
pub const LANCZOS_G: f64 = 7.0;

/// Lanczos coefficients for `g = 7`, nine terms (the set published with
/// Numerical Recipes / GSL and reproduced on Wikipedia). Checked against
/// reference values in the tests below.
pub const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// `ln Gamma(z)` for `Re z >= 0.5` (any branch; only its exponential is used).
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut sum = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (k, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// `ln sin(pi z)`, stable for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im.abs() < 20.0 {
        return (PI * z).sin().ln();
    }
    if z.im > 0.0 {
        // sin(pi z) = -e^{-i pi z} (1 - e^{2 i pi z}) / (2i)
        -i * PI * z + (1.0 - (2.0 * i * PI * z).exp()).ln() + (i / 2.0).ln()
    } else {
        ln_sin_pi(z.conj()).conj()
    }
}

/// Complex log-gamma (branch unspecified up to `2 pi i`).
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Domain {
            node: format!("Gamma({z})"),
            reason: "pole at a non-positive integer".into(),
        });
    }
    if z.re < 0.5 {
        Ok(PI.ln() - ln_sin_pi(z) - ln_gamma_right(1.0 - z))
    } else {
        Ok(ln_gamma_right(z))
    }
}

/// Complex gamma function: Lanczos approximation with reflection for
/// `Re z < 1/2`.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Domain {
            node: format!("Gamma({z})"),
            reason: "pole at a non-positive integer".into(),
        });
    }
    if z.re < 0.5 {
        let s = (PI * z).sin();
        return Ok(PI / (s * complex_gamma(1.0 - z)?));
    }
    Ok(ln_gamma_right(z).exp())
}

/// `gamma(t) = Gamma(alpha+1) Gamma(n/2 + i t) / Gamma(alpha + n/2 + i t)`,
/// the scalar symbol of the n-dimensional Cesàro operator of order alpha
/// evaluated at `t = s_1 + .. + s_n`.
pub fn cesaro_gamma_symbol(alpha: f64, n: usize, t: f64) -> Complex64 {
    let half = n as f64 / 2.0;
    if alpha.fract() == 0.0 && alpha <= 64.0 {
        // integer order: alpha! / prod_{k<alpha} (n/2 + k + it), no log-gamma
        // cancellation at large |t|
        let mut acc = Complex64::new(1.0, 0.0);
        for k in 0..alpha as usize {
            acc *= (k as f64 + 1.0) / Complex64::new(half + k as f64, t);
        }
        return acc;
    }
    let a = Complex64::new(alpha + 1.0, 0.0);
    let b = Complex64::new(half, t);
    let c = Complex64::new(alpha + half, t);
    let lg = ln_gamma(a).expect("alpha > 0") + ln_gamma(b).expect("n >= 1")
        - ln_gamma(c).expect("alpha + n/2 > 0");
    lg.exp()
}

/// Closed form of the q-Cesàro scalar formula:
/// `(1-q)/(1 - sqrt(q) q^{-is})` for `0<q<1`,
/// `(1-q)/(1 + sqrt(-q) (-q)^{-is})` for `-1<q<0`.
pub fn qcesaro_symbol(q: f64, s: f64) -> Complex64 {
    assert!(q != 0.0 && q.abs() < 1.0, "need 0 < |q| < 1");
    let z = qcesaro_z(q, s);
    if q > 0.0 {
        (1.0 - q) / (1.0 - z)
    } else {
        (1.0 - q) / (1.0 + z)
    }
}

/// `z = sqrt|q| |q|^{-is}`.
fn qcesaro_z(q: f64, s: f64) -> Complex64 {
    let r = q.abs();
    r.sqrt() * Complex64::new(0.0, -s * r.ln()).exp()
}

/// XOR coefficients of the q-Cesàro symbol, split by the parity of `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QCesaroBranches {
    /// Sum over nodes with positive `a(k)` (the diagonal entry).
    pub plus: Complex64,
    /// Sum over nodes with negative `a(k)` (the off-diagonal entry).
    pub minus: Complex64,
}

impl QCesaroBranches {
    /// Eigenvalue on even functions.
    pub fn phi(&self) -> Complex64 {
        self.plus + self.minus
    }

    /// Eigenvalue on odd functions.
    pub fn phi_star(&self) -> Complex64 {
        self.plus - self.minus
    }
}

pub fn qcesaro_branches(q: f64, s: f64) -> QCesaroBranches {
    assert!(q != 0.0 && q.abs() < 1.0, "need 0 < |q| < 1");
    let z = qcesaro_z(q, s);
    if q > 0.0 {
        QCesaroBranches {
            plus: (1.0 - q) / (1.0 - z),
            minus: Complex64::new(0.0, 0.0),
        }
    } else {
        let denom = 1.0 - z * z;
        QCesaroBranches {
            plus: (1.0 - q) / denom,
            minus: -(1.0 - q) * z / denom,
        }
    }
}

/// `(g(x) - q g(qx)) / (1 - q)`, the explicit inverse of the q-Cesàro operator.
pub fn qcesaro_inverse<G: Fn(f64) -> Complex64>(q: f64, g: G, x: f64) -> Complex64 {
    (g(x) - q * g(q * x)) / (1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn reference_values() {
        let sqrt_pi = PI.sqrt();
        let g = complex_gamma(c(0.5)).unwrap();
        assert!((g.re - sqrt_pi).abs() < 1e-12 * sqrt_pi && g.im.abs() < 1e-15);
        let g = complex_gamma(c(5.0)).unwrap();
        assert!((g.re - 24.0).abs() < 24e-12);
        let g = complex_gamma(c(1.5)).unwrap();
        assert!((g.re - sqrt_pi / 2.0).abs() < 1e-12);
        let g = complex_gamma(c(-0.5)).unwrap();
        assert!((g.re + 2.0 * sqrt_pi).abs() < 1e-11);
        // |Gamma(i)|^2 = pi / sinh(pi)
        let g = complex_gamma(Complex64::new(0.0, 1.0)).unwrap();
        assert!((g.norm_sqr() - PI / PI.sinh()).abs() < 1e-13);
        // Gamma(1+i) = 0.4980156681183560 - 0.1549498283018106 i
        let g = complex_gamma(Complex64::new(1.0, 1.0)).unwrap();
        assert!(
            (g - Complex64::new(0.498_015_668_118_356, -0.154_949_828_301_810_6)).norm() < 1e-13
        );
        // Gamma(10) = 362880
        let g = complex_gamma(c(10.0)).unwrap();
        assert!((g.re / 362_880.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poles_are_rejected() {
        for z in [0.0, -1.0, -7.0] {
            assert!(complex_gamma(c(z)).is_err());
            assert!(ln_gamma(c(z)).is_err());
        }
    }

    #[test]
    fn recurrence_on_random_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z = loop {
                let z =
                    Complex64::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
                if z.norm() <= 20.0 && (z.im.abs() > 1e-3 || (z.re - z.re.round()).abs() > 1e-3) {
                    break z;
                }
            };
            let g1 = complex_gamma(z + 1.0).unwrap();
            let g0 = complex_gamma(z).unwrap();
            let rel = (g1 - z * g0).norm() / g1.norm();
            assert!(rel <= 1e-11, "z = {z}: {rel:e}");
        }
    }

    #[test]
    fn log_gamma_matches_gamma_off_axis() {
        for z in [
            Complex64::new(0.5, 3.0),
            Complex64::new(2.5, -7.0),
            Complex64::new(-3.3, 25.0),
        ] {
            let direct = complex_gamma(z).unwrap();
            let via_log = ln_gamma(z).unwrap().exp();
            assert!((direct - via_log).norm() <= 1e-11 * direct.norm(), "{z}");
        }
    }

    #[test]
    fn cesaro_symbol_values() {
        assert!((cesaro_gamma_symbol(1.0, 1, 0.0) - c(2.0)).norm() < 1e-13);
        assert!((cesaro_gamma_symbol(2.0, 2, 0.0) - c(1.0)).norm() < 1e-13);
        // alpha = 1, n = 1 reduces to 1/(1/2 + it)
        for t in [-7.0, 0.3, 50.0, 1e3, 1e4] {
            let g = cesaro_gamma_symbol(1.0, 1, t);
            let exact = 1.0 / Complex64::new(0.5, t);
            assert!(
                (g - exact).norm() <= 1e-12 * exact.norm().max(1e-300),
                "t={t} rel={:e}",
                (g - exact).norm() / exact.norm()
            );
        }
        // integer shortcut agrees with the gamma ratio itself
        for t in [-4.0, 0.0, 1.5, 30.0] {
            let b = Complex64::new(1.5, t);
            let ratio = complex_gamma(c(3.0)).unwrap() * complex_gamma(b).unwrap()
                / complex_gamma(b + 2.0).unwrap();
            assert!((cesaro_gamma_symbol(2.0, 3, t) - ratio).norm() <= 1e-12 * ratio.norm());
        }
        assert!(cesaro_gamma_symbol(1.0, 1, 50.0).norm() <= 0.2);
        assert!(cesaro_gamma_symbol(1.0, 1, -50.0).norm() <= 0.2);
    }

    #[test]
    fn cesaro_modulus_peaks_at_zero() {
        for (alpha, n) in [(1.0, 1), (2.0, 2), (0.5, 3), (3.0, 1)] {
            let peak = cesaro_gamma_symbol(alpha, n, 0.0).norm();
            for k in 1..=400 {
                let t = k as f64 * 0.05;
                assert!(cesaro_gamma_symbol(alpha, n, t).norm() < peak);
                assert!(cesaro_gamma_symbol(alpha, n, -t).norm() < peak);
            }
        }
    }

    #[test]
    fn qcesaro_values() {
        assert!((qcesaro_symbol(0.25, 0.0) - c(1.5)).norm() < 1e-15);
        assert!((qcesaro_symbol(-0.25, 0.0) - c(1.25 / 1.5)).norm() < 1e-15);
        for k in 0..200 {
            let s = -20.0 + 0.2 * k as f64;
            let v = qcesaro_symbol(0.25, s);
            assert!(((v - 1.0).norm() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn qcesaro_branches_sum_to_scalar_formula() {
        for s in [-3.0, 0.0, 0.7, 11.0] {
            let b = qcesaro_branches(-0.25, s);
            assert!((b.phi() - qcesaro_symbol(-0.25, s)).norm() < 1e-14);
            // independent series evaluation of both parities
            let (mut even, mut odd) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for k in 0..80 {
                let q: f64 = -0.25;
                let term = (1.0 - q)
                    * q.powi(k)
                    * Complex64::new(-0.5, -s).scale(q.abs().powi(k).ln()).exp();
                if k % 2 == 0 {
                    even += term;
                } else {
                    odd += term;
                }
            }
            assert!((b.plus - even).norm() < 1e-14);
            assert!((b.minus - odd).norm() < 1e-14);
            let b = qcesaro_branches(0.25, s);
            assert_eq!(b.minus, Complex64::new(0.0, 0.0));
            assert!((b.phi() - qcesaro_symbol(0.25, s)).norm() < 1e-14);
        }
    }

    #[test]
    fn qcesaro_is_periodic() {
        let period = 2.0 * PI / 4f64.ln();
        for k in 0..50 {
            let s = -10.0 + 0.37 * k as f64;
            assert!((qcesaro_symbol(0.25, s) - qcesaro_symbol(0.25, s + period)).norm() < 1e-10);
        }
    }
}
