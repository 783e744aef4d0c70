//! Faddeeva function, complex `erfc`, the plasma function and Dawson's function.
//!
//! `w(z) = e^{−z²} erfc(−iz)` is evaluated with Weideman's rational
//! expansion (N = 40 terms), accurate to about `1e−14` in the closed upper
//! half-plane.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::Complex64;

const TERMS: usize = 40;

/// `|Im z|` window inside which [`plasma_f`] is documented to be accurate.
pub const PLASMA_WINDOW: f64 = 10.0;

struct Weideman {
    l: f64,
    a: [f64; TERMS],
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = TERMS as f64;
        let m = 2 * TERMS;
        let l = (n / 2f64.sqrt()).sqrt();
        let mut a = [0.0; TERMS];
        for k in -(m as i64) + 1..m as i64 {
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            let f = (-t * t).exp() * (l * l + t * t);
            for (j, aj) in a.iter_mut().enumerate() {
                *aj += f * ((j + 1) as f64 * theta).cos();
            }
        }
        for aj in a.iter_mut() {
            *aj /= 2.0 * m as f64;
        }
        Weideman { l, a }
    })
}

/// The Faddeeva function `w(z) = e^{−z²} erfc(−iz)`.
///
/// Evaluated directly for `Im z ≥ 0`; the reflection
/// `w(z) = 2e^{−z²} − w(−z)` is used below the real axis and may overflow
/// far from it.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva_upper(-z);
    }
    faddeeva_upper(z)
}

fn faddeeva_upper(z: Complex64) -> Complex64 {
    let w = weideman();
    let i = Complex64::new(0.0, 1.0);
    let denom = w.l - i * z;
    let zz = (w.l + i * z) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for &c in w.a.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
}

/// Complementary error function of a complex argument.
pub fn erfc(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    if z.re >= 0.0 {
        (-z * z).exp() * faddeeva_upper(i * z)
    } else {
        2.0 - (-z * z).exp() * faddeeva_upper(-i * z)
    }
}

/// `ln erfc(z)/2` for `Re z ≥ 0`, free of underflow.
fn ln_half_erfc_right(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    0.5f64.ln() - z * z + faddeeva_upper(i * z).ln()
}

/// A branch of `ln F(z)` with `F(z) = ½ erfc(z/√2)`, usable far outside
/// the window where `F` itself under- or overflows. The real part is exact;
/// the imaginary part is defined modulo `2π`.
pub fn ln_plasma_f(z: Complex64) -> Complex64 {
    let u = z * FRAC_1_SQRT_2;
    if u.re >= 0.0 {
        return ln_half_erfc_right(u);
    }
    // F(z) = 1 − F(−z)
    let l = ln_half_erfc_right(-u);
    if l.re > 0.0 {
        l + (-(1.0 - (-l).exp())).ln()
    } else {
        (1.0 - l.exp()).ln()
    }
}

/// The plasma function `F(z) = ½ erfc(z/√2)`.
///
/// Logs a warning outside the accuracy window `|Im z| ≤ 10`.
pub fn plasma_f(z: Complex64) -> Complex64 {
    if z.im.abs() > PLASMA_WINDOW {
        log::warn!("plasma function evaluated at {z}, outside the accuracy window |Im z| <= {PLASMA_WINDOW}");
    }
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `F` on the real line.
pub fn plasma_f_real(x: f64) -> f64 {
    plasma_f(Complex64::new(x, 0.0)).re
}

/// Scaled Dawson function `H(t) = (2π)^{−1/2} e^{−t²/2} ∫₀^t e^{x²/2} dx`.
pub fn dawson_h(t: f64) -> f64 {
    0.5 * faddeeva_upper(Complex64::new(t * FRAC_1_SQRT_2, 0.0)).im
}

/// Standard Gaussian density `γ(z) = (2π)^{−1/2} e^{−z²/2}`, extended to ℂ.
pub fn gaussian(z: Complex64) -> Complex64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Taylor series of erf, accurate for moderate |z|.
    fn erf_series(z: Complex64) -> Complex64 {
        let mut term = z;
        let mut sum = z;
        let z2 = z * z;
        for n in 1..400 {
            term = -term * z2 / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        sum * 2.0 / PI.sqrt()
    }

    #[test]
    fn erfc_matches_taylor_series() {
        for &z in &[c(0.0, 0.0), c(0.5, 0.0), c(-1.2, 0.3), c(1.0, 2.0), c(-2.0, -1.5), c(0.1, -3.0), c(2.5, 0.7)] {
            let exact = 1.0 - erf_series(z);
            let got = erfc(z);
            assert!((got - exact).norm() <= 1e-12 * exact.norm().max(1.0), "{z}: {got} vs {exact}");
        }
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(c(1.0, 0.0)).re - 0.157_299_207_050_285_13).abs() < 1e-15);
        assert!((erfc(c(3.0, 0.0)).re - 2.209_049_699_858_544e-5).abs() < 1e-19);
        assert!((erfc(c(-1.0, 0.0)).re - 1.842_700_792_949_715).abs() < 1e-14);
    }

    #[test]
    fn faddeeva_on_imaginary_axis() {
        // w(iy) = e^{y²} erfc(y)
        for y in [0.1, 1.0, 3.0, 20.0] {
            let w = faddeeva(c(0.0, y));
            let exact = if y < 10.0 {
                (y * y).exp() * erfc(c(y, 0.0)).re
            } else {
                // asymptotic series
                (1.0 - 1.0 / (2.0 * y * y) + 3.0 / (4.0 * y.powi(4)) - 15.0 / (8.0 * y.powi(6))) / (y * PI.sqrt())
            };
            let tol = if y < 10.0 { 1e-13 } else { 1e-6 * exact };
            assert!((w.re - exact).abs() < tol && w.im.abs() < 1e-14, "{y}: {w}");
        }
    }

    #[test]
    fn plasma_function() {
        assert!((plasma_f(c(0.0, 0.0)) - c(0.5, 0.0)).norm() < 1e-15);
        for x in [0.3, 1.0, 2.7, 5.0] {
            assert!((plasma_f_real(x) + plasma_f_real(-x) - 1.0).abs() < 1e-14);
        }
        assert!((plasma_f_real(2.0) - 0.022_750_131_948_179_21).abs() < 1e-15);
    }

    #[test]
    fn log_plasma_function() {
        for &z in &[c(0.3, 1.0), c(-2.0, 4.0), c(3.0, -7.0), c(-0.5, -9.0), c(8.0, 0.0)] {
            let direct = plasma_f(z);
            let via_log = ln_plasma_f(z).exp();
            assert!((direct - via_log).norm() <= 1e-12 * direct.norm(), "{z}");
        }
        // deep in the right half-plane F underflows but its logarithm does not
        let l = ln_plasma_f(c(60.0, 0.0));
        assert!((l.re - (-1800.0 - (60.0 * (2.0 * PI).sqrt()).ln())).abs() < 1e-3);
        let l = ln_plasma_f(c(1.0, 200.0));
        assert!(l.re.is_finite());
    }

    #[test]
    fn dawson() {
        assert_eq!(dawson_h(0.0), 0.0);
        for t in [0.1, 1.0, 3.0, 12.0] {
            assert!((dawson_h(-t) + dawson_h(t)).abs() < 1e-15);
        }
        // direct quadrature of the defining integral
        let t = 1.3f64;
        let n = 2000;
        let h = t / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let x = (k as f64 + 0.5) * h;
            s += (x * x / 2.0).exp() * h;
        }
        let direct = s * (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        assert!((dawson_h(t) - direct).abs() < 1e-7);
    }
}
