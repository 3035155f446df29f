//! Log-Gamma, Barnes G and Bessel J.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd::Dd;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// ζ'(−1).
const ZETA_PRIME_M1: f64 = -0.165_421_143_700_450_93;

// B_{2k} / (2k(2k-1)), k = 1..10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

// B_{2k+2} / (4k(k+1)), k = 1..9
const BARNES: [f64; 9] = [
    -1.0 / 240.0,
    1.0 / 1008.0,
    -1.0 / 1440.0,
    1.0 / 1056.0,
    -691.0 / 327_600.0,
    1.0 / 144.0,
    -3617.0 / 114_240.0,
    43867.0 / 229_824.0,
    -174_611.0 / 118_800.0,
];

fn is_nonpositive_integer(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Complex log-Gamma. Stirling series after shifting to Re z ≥ 15; the
/// reflection formula for Re z < 0.5. Returns NaN at the poles.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if is_nonpositive_integer(z) {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    if z.re < 0.5 {
        let s = (Complex64::from(PI) * z).sin();
        return Complex64::from(PI.ln()) - s.ln() - ln_gamma(Complex64::from(1.0) - z);
    }
    let mut w = z;
    let mut prod = Complex64::new(1.0, 0.0);
    while w.re < 15.0 {
        prod *= w;
        w += 1.0;
    }
    let shift = prod.ln();
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * LN_2PI + series - shift
}

/// Gamma on the positive real axis.
pub fn gamma_pos(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma(Complex64::from(x)).re.exp()
}

/// log G(1+u) for large |u| by the asymptotic series.
fn ln_barnes_asymptotic(u: Complex64) -> Complex64 {
    let lu = u.ln();
    let u2 = u * u;
    let inv2 = (u2).inv();
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv2;
    for c in BARNES {
        series += p * c;
        p *= inv2;
    }
    (u2 * 0.5 - 1.0 / 12.0) * lu - u2 * 0.75 + u * (0.5 * LN_2PI) + ZETA_PRIME_M1 + series
}

/// log G(z) for the Barnes G-function, by marching the recurrence
/// G(z+1) = Γ(z)G(z) into Re z ≥ 13 and applying the asymptotic series.
pub fn barnes_g_log(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::PoleHit(format!("{z}")));
    }
    if (z.im.abs() < 1e-14) && z.re <= 0.0 && (z.re - z.re.round()).abs() < 1e-14 {
        return Err(Error::PoleHit(format!("{z}")));
    }
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while w.re < 13.0 {
        acc += ln_gamma(w);
        w += 1.0;
    }
    Ok(ln_barnes_asymptotic(w - 1.0) - acc)
}

/// Bessel J_ν(x) for ν > −1 and x ≥ 0 via the power series summed in
/// double-double. Intended for moderate x (≲ 40).
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(nu > -1.0 && x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let h = x / 2.0;
    let q = -Dd::from_prod(h, h);
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        term = term * q / Dd::from_sum(k, nu).mul_f64(k);
        sum += term;
        if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) && k > h * 2.0 {
            break;
        }
        if k > 2000.0 {
            break;
        }
    }
    let pref = (nu * h.ln() - ln_gamma(Complex64::from(nu + 1.0)).re).exp();
    sum.to_f64() * pref
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_integers() {
        for n in 1..12 {
            let f: f64 = (1..n).map(|k| k as f64).product();
            let g = gamma_pos(n as f64);
            assert!((g - f).abs() < 1e-13 * f, "{n}: {g} vs {f}");
        }
    }

    #[test]
    fn gamma_half() {
        assert!((gamma_pos(0.5) - PI.sqrt()).abs() < 4e-15);
    }

    #[test]
    fn reflection_region() {
        // Γ(-0.5) = -2√π
        let l = ln_gamma(Complex64::from(-0.5));
        let v = l.exp();
        assert!((v.re + 2.0 * PI.sqrt()).abs() < 1e-13, "{v}");
    }

    #[test]
    fn barnes_small_integers() {
        for (z, g) in [
            (1.0, 1.0),
            (2.0, 1.0),
            (3.0, 1.0),
            (4.0, 2.0),
            (5.0, 12.0),
            (6.0, 288.0),
        ] {
            let l = barnes_g_log(Complex64::from(z)).unwrap();
            assert!((l.re - f64::ln(g)).abs() < 1e-12, "G({z}) gave {}", l.exp());
            assert!(l.im.abs() < 1e-12);
        }
    }

    #[test]
    fn barnes_pole() {
        assert!(matches!(
            barnes_g_log(Complex64::from(0.0)),
            Err(Error::PoleHit(_))
        ));
        assert!(matches!(
            barnes_g_log(Complex64::from(-3.0)),
            Err(Error::PoleHit(_))
        ));
    }

    #[test]
    fn bessel_half_orders() {
        for &x in &[0.3, 1.0, 4.5, 12.0, 25.0] {
            let s = (2.0 / (PI * x)).sqrt();
            assert!((bessel_j(0.5, x) - s * x.sin()).abs() < 1e-14);
            assert!((bessel_j(-0.5, x) - s * x.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn bessel_fractional_order_large_x() {
        // mpmath besselj at 30 digits
        let cases = [
            (0.8, 19.10551190196821, -0.037_185_255_024_134_715),
            (-0.2, 19.10551190196821, 0.178_085_147_809_449_67),
            (0.8, 18.575063533670658, -0.124_214_204_270_186_15),
            (-0.2, 18.575063533670658, 0.135_262_761_171_614_57),
        ];
        for (nu, x, want) in cases {
            assert!((bessel_j(nu, x) - want).abs() < 1e-15, "J_{nu}({x})");
        }
    }
}
