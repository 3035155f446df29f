//! The confluent hypergeometric kernel evaluated directly: Kummer's φ in
//! double-double, the A·B form of the kernel, its factorized variant, the
//! s-derivative of the scaled kernel, reference kernels, and the n = 0 constant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd::{Dd, DdComplex};
use crate::error::{Error, Result};
use crate::special::{barnes_g_log, bessel_j};
use crate::szego::KernelParams;

/// Largest |z| accepted by [`kummer_phi`].
pub const KUMMER_MAX_ABS_Z: f64 = 60.0;
/// Beyond this |z| the power series is replaced by Taylor continuation of the ODE.
const SERIES_RADIUS: f64 = 24.0;
/// Largest |2x| at which the kernel oracle is evaluated.
pub const ORACLE_RANGE: f64 = 50.0;
/// Tolerance of the reflection self-check.
pub const REFLECTION_TOL: f64 = 1e-9;

/// φ, φ′ and the reflection residual.
#[derive(Debug, Clone, Copy)]
pub struct KummerValue {
    pub value: Complex64,
    pub deriv: Complex64,
    pub reflection_residual: f64,
}

fn dd_c(z: Complex64) -> DdComplex {
    DdComplex::from_c64(z)
}

fn dd_real(x: Dd) -> DdComplex {
    DdComplex::new(x, Dd::ZERO)
}

fn series(a: DdComplex, b: Dd, z: DdComplex) -> DdComplex {
    let mut term = DdComplex::ONE;
    let mut sum = DdComplex::ONE;
    let az = z.abs_f64();
    let mut k = 0.0_f64;
    loop {
        let den = b.add_f64(k).mul_f64(k + 1.0);
        let ak = DdComplex::new(a.re.add_f64(k), a.im);
        term = (term * ak * z).div_real(den);
        sum += term;
        k += 1.0;
        let t = term.abs_f64();
        if (t <= 1e-34 * sum.abs_f64() && k > az) || t == 0.0 || k > 5000.0 {
            break;
        }
    }
    sum
}

/// Taylor step of zφ″ + (b − z)φ′ − aφ = 0 from zc to zc + h.
fn ode_step(
    a: DdComplex,
    b: Dd,
    zc: DdComplex,
    h: DdComplex,
    phi: DdComplex,
    dphi: DdComplex,
) -> (DdComplex, DdComplex) {
    let h2 = h * h;
    let bz = dd_real(b) - zc;
    let mut d0 = phi;
    let mut d1 = dphi * h;
    let mut val = d0 + d1;
    let mut der = dphi;
    let mut k = 0.0_f64;
    let mut small = 0;
    loop {
        let kk = dd_real(Dd::new(k));
        let ak = DdComplex::new(a.re.add_f64(k), a.im);
        let num = -((kk + bz) * h * d1).scale_f64(k + 1.0) + ak * h2 * d0;
        let d2 = (num / zc).div_real(Dd::new((k + 2.0) * (k + 1.0)));
        val += d2;
        der += d2.scale_f64(k + 2.0) / h;
        let t = d2.abs_f64();
        if t <= 1e-34 * val.abs_f64() {
            small += 1;
        } else {
            small = 0;
        }
        d0 = d1;
        d1 = d2;
        k += 1.0;
        if small >= 2 || k > 600.0 {
            break;
        }
    }
    (val, der)
}

/// (φ(a,b;z), φ′(a,b;z)) in double-double.
fn kummer_pair(a: DdComplex, b: Dd, z: DdComplex) -> (DdComplex, DdComplex) {
    let r = z.abs_f64();
    let a1 = DdComplex::new(a.re.add_f64(1.0), a.im);
    let b1 = b.add_f64(1.0);
    let deriv_at = |zz: DdComplex| -> DdComplex { (a * series(a1, b1, zz)).div_real(b) };
    if r <= SERIES_RADIUS {
        return (series(a, b, z), deriv_at(z));
    }
    let mut zc = z.scale_f64(SERIES_RADIUS / r);
    let mut phi = series(a, b, zc);
    let mut dphi = deriv_at(zc);
    let mut pos = SERIES_RADIUS;
    while pos < r {
        let step = (0.35 * pos).min(r - pos);
        let next = if pos + step >= r {
            z
        } else {
            z.scale_f64((pos + step) / r)
        };
        let (p, d) = ode_step(a, b, zc, next - zc, phi, dphi);
        phi = p;
        dphi = d;
        zc = next;
        pos += step;
    }
    (phi, dphi)
}

fn check_b(b: f64) -> Result<()> {
    if !b.is_finite() || (b <= 0.0 && b == b.round()) {
        return Err(Error::PoleOfB(b));
    }
    Ok(())
}

/// φ and φ′ in double-double with the reflection identity
/// φ(a,b;z) = e^z φ(b−a,b;−z) checked.
fn kummer_checked(a: DdComplex, b: Dd, z: DdComplex) -> Result<(DdComplex, DdComplex, f64)> {
    check_b(b.to_f64())?;
    let az = z.abs_f64();
    if !(az <= KUMMER_MAX_ABS_Z) {
        return Err(Error::RangeExceeded(format!(
            "|z| = {az} exceeds {KUMMER_MAX_ABS_Z}"
        )));
    }
    let (p, d) = kummer_pair(a, b, z);
    let (q, _) = kummer_pair(dd_real(b) - a, b, -z);
    let value = p.to_c64();
    let refl = z.to_c64().exp() * q.to_c64();
    let resid = (value - refl).norm() / value.norm().max(1e-300);
    if !(resid <= REFLECTION_TOL) {
        return Err(Error::SelfCheckFailed(format!(
            "reflection residual {resid:e} at a={}, b={}, z={}",
            a.to_c64(),
            b.to_f64(),
            z.to_c64()
        )));
    }
    Ok((p, d, resid))
}

/// Kummer's φ(a, b; z) = Σ (a)_k/(b)_k z^k/k! and its derivative, with the
/// reflection identity φ(a,b;z) = e^z φ(b−a,b;−z) checked on every call.
pub fn kummer_phi(a: Complex64, b: f64, z: Complex64) -> Result<KummerValue> {
    let (p, d, r) = kummer_checked(dd_c(a), Dd::new(b), dd_c(z))?;
    Ok(KummerValue {
        value: p.to_c64(),
        deriv: d.to_c64(),
        reflection_residual: r,
    })
}

/// Kernel evaluator for fixed (α, β).
#[derive(Debug, Clone)]
pub struct ChfKernel {
    kp: KernelParams,
    a: DdComplex,
    b: Dd,
    /// |Γ(1+α+β)|²/(πΓ(1+2α)²)
    g_over_pi: Dd,
    chi_half_pos: Dd,
    chi_half_neg: Dd,
}

/// Ã(x) = χ^{1/2}e^{−ix}φ(1+α+β, 1+2α; 2ix) and its derivative.
#[derive(Debug, Clone, Copy)]
pub struct ATilde {
    pub x: f64,
    pub value: Complex64,
    pub deriv: Complex64,
}

/// [`ATilde`] in double-double.
#[derive(Debug, Clone, Copy)]
pub struct ATildeDd {
    pub x: Dd,
    pub value: DdComplex,
    pub deriv: DdComplex,
}

impl ChfKernel {
    pub fn new(kp: &KernelParams) -> Result<ChfKernel> {
        let kp = KernelParams::new(kp.alpha, kp.beta_im)?;
        // 1+α and 1+2α formed exactly so that every factor sees the same α
        let a = DdComplex::new(Dd::from_sum(1.0, kp.alpha), Dd::new(kp.beta_im));
        let b = Dd::from_sum(1.0, 2.0 * kp.alpha);
        let lg =
            Dd::ln_gamma_re(a.re, a.im).mul_f64(2.0) - Dd::ln_gamma_re(b, Dd::ZERO).mul_f64(2.0);
        let half_pi_b = Dd::PI.mul_f64(0.5 * kp.beta_im);
        Ok(ChfKernel {
            kp,
            a,
            b,
            g_over_pi: lg.exp() / Dd::PI,
            chi_half_pos: half_pi_b.exp(),
            chi_half_neg: (-half_pi_b).exp(),
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.kp
    }

    fn range_check(x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if (2.0 * x).abs() > ORACLE_RANGE {
            return Err(Error::RangeExceeded(format!(
                "|2x| = {} exceeds {}",
                (2.0 * x).abs(),
                ORACLE_RANGE
            )));
        }
        Ok(())
    }

    pub fn a_tilde_dd(&self, x: Dd) -> Result<ATildeDd> {
        Self::range_check(x.hi)?;
        let z = DdComplex::new(Dd::ZERO, x.mul_f64(2.0));
        let (phi, dphi, _) = kummer_checked(self.a, self.b, z)?;
        let chi = if x.hi >= 0.0 {
            self.chi_half_pos
        } else {
            self.chi_half_neg
        };
        let (sn, cs) = x.sin_cos();
        let e = DdComplex::new(cs * chi, -(sn * chi));
        let value = e * phi;
        let deriv = e * (dphi.mul_i().scale_f64(2.0) - phi.mul_i());
        Ok(ATildeDd { x, value, deriv })
    }

    pub fn a_tilde(&self, x: f64) -> Result<ATilde> {
        let t = self.a_tilde_dd(Dd::new(x))?;
        Ok(ATilde {
            x,
            value: t.value.to_c64(),
            deriv: t.deriv.to_c64(),
        })
    }

    /// K̃ from precomputed Ã values; the diagonal uses (G/π)·Im(Ã′·conj Ã).
    pub fn factorized_from(&self, p: &ATilde, q: &ATilde) -> f64 {
        let g = self.g_over_pi.to_f64();
        if p.x == q.x {
            return g * (p.deriv * q.value.conj()).im;
        }
        g * (p.value * q.value.conj()).im / (p.x - q.x)
    }

    /// Double-double variant of [`Self::factorized_from`].
    pub fn factorized_from_dd(&self, p: &ATildeDd, q: &ATildeDd) -> Dd {
        if p.x == q.x {
            let im = p.deriv.im * p.value.re - p.deriv.re * p.value.im;
            return self.g_over_pi * im;
        }
        let im = p.value.im * q.value.re - p.value.re * q.value.im;
        self.g_over_pi * im / (p.x - q.x)
    }

    /// K̃(x,y) = K(x,y)/(|2x|^α|2y|^α).
    pub fn factorized_kernel(&self, x: f64, y: f64) -> Result<f64> {
        let p = self.a_tilde(x)?;
        let q = if x == y { p } else { self.a_tilde(y)? };
        Ok(self.factorized_from(&p, &q))
    }

    /// K(x,y) for x, y ≠ 0.
    pub fn chf_kernel(&self, x: f64, y: f64) -> Result<f64> {
        if (x == 0.0 || y == 0.0) && self.kp.alpha != 0.0 {
            return Err(Error::OriginEvaluation);
        }
        Ok(self.weight(x) * self.weight(y) * self.factorized_kernel(x, y)?)
    }

    /// |2x|^α.
    fn weight(&self, x: f64) -> f64 {
        if self.kp.alpha == 0.0 {
            1.0
        } else {
            (2.0 * x).abs().powf(self.kp.alpha)
        }
    }

    /// ∂_s[s·K(sx, sy)] = (G/π)·Re(A(sx)·conj A(sy)).
    pub fn partial_s_kernel(&self, s: f64, x: f64, y: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::NonFinite(s));
        }
        let (u, v) = (s * x, s * y);
        let p = self.a_tilde(u)?;
        let q = self.a_tilde(v)?;
        Ok(self.g_over_pi.to_f64()
            * self.weight(u)
            * self.weight(v)
            * (p.value * q.value.conj()).re)
    }
}

/// sin(x−y)/(π(x−y)), 1/π on the diagonal.
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d == 0.0 {
        1.0 / PI
    } else {
        d.sin() / (PI * d)
    }
}

/// Type-I Bessel kernel (√(xy)/2)(J_{α+½}(x)J_{α−½}(y) − J_{α+½}(y)J_{α−½}(x))/(x−y)
/// for x ≠ y, both positive.
pub fn bessel_kernel(alpha: f64, x: f64, y: f64) -> f64 {
    assert!(x > 0.0 && y > 0.0 && x != y);
    let (p, m) = (alpha + 0.5, alpha - 0.5);
    let num = bessel_j(p, x) * bessel_j(m, y) - bessel_j(p, y) * bessel_j(m, x);
    0.5 * (x * y).sqrt() * num / (x - y)
}

/// log C = log[√π G(½)² G(1+2α) / (2^{2α²} G(1+α+β) G(1+α−β))], real for β ∈ iR.
pub fn n0_log_constant(kp: &KernelParams) -> Result<f64> {
    let a = kp.alpha;
    let bp = Complex64::new(1.0 + a, kp.beta_im);
    let bm = Complex64::new(1.0 + a, -kp.beta_im);
    let v = 0.5 * PI.ln()
        + 2.0 * barnes_g_log(Complex64::new(0.5, 0.0))?
        + barnes_g_log(Complex64::new(1.0 + 2.0 * a, 0.0))?
        - 2.0 * a * a * 2f64.ln()
        - barnes_g_log(bp)?
        - barnes_g_log(bm)?;
    Ok(v.re)
}

/// −s²/2 + 2αs + (β²−α²−¼)log s + log C.
pub fn n0_expansion(kp: &KernelParams, s: f64) -> Result<f64> {
    Ok(-0.5 * s * s
        + 2.0 * kp.alpha * s
        + (kp.beta_sq() - kp.alpha * kp.alpha - 0.25) * s.ln()
        + n0_log_constant(kp)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_pos;

    #[test]
    fn phi_at_zero_is_one() {
        let v = kummer_phi(Complex64::new(1.3, 0.4), 2.1, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(v.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn phi_exponential_case() {
        // φ(a, a; z) = e^z
        for &y in &[3.0, 20.0, 30.0, 49.0] {
            let z = Complex64::new(0.0, y);
            let v = kummer_phi(Complex64::new(1.7, 0.0), 1.7, z).unwrap();
            assert!((v.value - z.exp()).norm() < 1e-13, "{y}: {}", v.value);
            assert!((v.deriv - z.exp()).norm() < 1e-13);
        }
    }

    #[test]
    fn phi_bessel_relation() {
        let al = 0.8;
        for &x in &[1.0, 7.5, 18.0] {
            let v = kummer_phi(
                Complex64::new(al, 0.0),
                2.0 * al,
                Complex64::new(0.0, 2.0 * x),
            )
            .unwrap()
            .value;
            let r = gamma_pos(al + 0.5)
                * Complex64::new(0.0, x).exp()
                * (x / 2.0).powf(0.5 - al)
                * bessel_j(al - 0.5, x);
            assert!(
                (v - r).norm() < 1e-10 * r.norm().max(1e-3),
                "{x}: {v} vs {r}"
            );
        }
    }

    #[test]
    fn two_function_form_agrees() {
        // K = (1/π)·Γ(1+α+β)Γ(1+α−β)/((1+2α)Γ(1+2α)²)·χ(x)^½χ(y)^½e^{−i(x+y)}·4^α|xy|^α
        //     ·(xP(x)Q(y) − yP(y)Q(x))/(x−y), P = φ(1+α+β, 2+2α; 2ix), Q = φ(α+β, 2α; 2ix)
        for (al, bi) in [(0.3, 0.0), (0.8, 0.4), (1.2, -0.7)] {
            let kp = KernelParams::new(al, bi).unwrap();
            let k = ChfKernel::new(&kp).unwrap();
            let beta = Complex64::new(0.0, bi);
            let lg = crate::special::ln_gamma(1.0 + al + beta)
                + crate::special::ln_gamma(1.0 + al - beta)
                - 2.0 * crate::special::ln_gamma(Complex64::from(1.0 + 2.0 * al));
            let c = lg.exp() / (PI * (1.0 + 2.0 * al));
            let chi = |x: f64| {
                if x >= 0.0 {
                    (0.5 * PI * bi).exp()
                } else {
                    (-0.5 * PI * bi).exp()
                }
            };
            let pq = |x: f64| {
                let z = Complex64::new(0.0, 2.0 * x);
                let p = kummer_phi(1.0 + al + beta, 2.0 + 2.0 * al, z)
                    .unwrap()
                    .value;
                let q = kummer_phi(al + beta, 2.0 * al, z).unwrap().value;
                (p, q)
            };
            for &(x, y) in &[(0.7, -2.3), (3.1, 5.4), (-8.0, -1.5), (11.0, -6.2)] {
                let ((px, qx), (py, qy)) = (pq(x), pq(y));
                let v = c
                    * chi(x)
                    * chi(y)
                    * Complex64::new(0.0, -(x + y)).exp()
                    * 4f64.powf(al)
                    * (x * y).abs().powf(al)
                    * (x * px * qy - y * py * qx)
                    / (x - y);
                let want = k.chf_kernel(x, y).unwrap();
                assert!(
                    v.im.abs() < 1e-11 * v.norm().max(1e-3),
                    "{al} {bi} ({x},{y}): {v}"
                );
                assert!(
                    (v.re - want).abs() < 1e-11 * want.abs().max(1e-3),
                    "{al} {bi} ({x},{y}): {v} vs {want}"
                );
            }
        }
    }

    #[test]
    fn sine_kernel_limit() {
        let k = ChfKernel::new(&KernelParams::new(0.0, 0.0).unwrap()).unwrap();
        for &(x, y) in &[(0.3, -1.7), (4.0, 9.5), (-12.0, 3.0)] {
            assert!((k.chf_kernel(x, y).unwrap() - sine_kernel(x, y)).abs() < 1e-13);
        }
        assert!((k.chf_kernel(2.0, 2.0).unwrap() - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn pole_and_range() {
        assert_eq!(
            kummer_phi(Complex64::new(1.0, 0.0), -2.0, Complex64::new(0.0, 1.0)).unwrap_err(),
            Error::PoleOfB(-2.0)
        );
        assert!(matches!(
            kummer_phi(Complex64::new(1.0, 0.0), 1.5, Complex64::new(0.0, 61.0)),
            Err(Error::RangeExceeded(_))
        ));
    }

    #[test]
    fn origin_needs_factorized_form() {
        let k = ChfKernel::new(&KernelParams::new(0.7, 0.0).unwrap()).unwrap();
        assert_eq!(k.chf_kernel(0.0, 1.0), Err(Error::OriginEvaluation));
        assert!(k.factorized_kernel(0.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn n0_constant_trivial_params() {
        let kp = KernelParams::new(0.0, 0.0).unwrap();
        let c = n0_log_constant(&kp).unwrap();
        // (1/12) log 2 + 3ζ′(−1)
        let classical = 2f64.ln() / 12.0 + 3.0 * (-0.165_421_143_700_450_93);
        assert!((c - classical).abs() < 1e-12, "{c}");
    }
}
