//! Constants of the Szegő-type function D: the moment vector F, the phases ζ,
//! and the expansion coefficients D_∞, D_{∞,1}.
//!
//! All Σ-integrals are taken against 1/√R₊ with √R₊ = i(−1)^{n−j}|R|^{1/2} on
//! band j, so for β ∈ iR the β- and α-terms below are real or imaginary as
//! documented on each quantity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    apply_rule, band_rule, graded_split_band_rules, log_band_integral, split_band_rules,
};
use crate::surface::SurfaceData;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Tolerance on the imaginary part of F and the real part of ζ.
pub const REALNESS_TOL: f64 = 1e-10;
/// Tolerance on the real part of D_{∞,1}.
pub const D1_TOL: f64 = 1e-9;

/// α > −½ and β = i·beta_im.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub beta_im: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, beta_im: f64) -> Result<KernelParams> {
        if !alpha.is_finite() || alpha <= -0.5 {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        if !beta_im.is_finite() {
            return Err(Error::NonFinite(beta_im));
        }
        Ok(KernelParams { alpha, beta_im })
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::new(0.0, self.beta_im)
    }

    /// β² = −beta_im².
    pub fn beta_sq(&self) -> f64 {
        -self.beta_im * self.beta_im
    }

    pub fn is_trivial(&self) -> bool {
        self.alpha == 0.0 && self.beta_im == 0.0
    }
}

/// The Szegő constants and their realness residues.
#[derive(Debug, Clone)]
pub struct SzegoConstants {
    pub f_vec: Vec<f64>,
    pub f_imag_residue: f64,
    pub zeta: Vec<Complex64>,
    pub zeta_real_residue: f64,
    pub d_infty: Complex64,
    pub d_infty_1: Complex64,
    pub d1_real_residue: f64,
}

#[inline]
fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Σ-moments against 1/√R₊, degrees 0..=lmax.
#[derive(Debug, Clone)]
struct Moments {
    /// ∫ ξ^l log|ξ| / √R₊
    log: Vec<Complex64>,
    /// ∫ ξ^l sign ξ / √R₊
    sign: Vec<Complex64>,
}

fn sigma_moments(sd: &SurfaceData, lmax: usize) -> Result<Moments> {
    let n = sd.n();
    let sys = &sd.sys;
    let mut log = vec![Complex64::new(0.0, 0.0); lmax + 1];
    let mut sign = vec![Complex64::new(0.0, 0.0); lmax + 1];
    for j in 0..=n {
        // 1/√R₊ = −i(−1)^{n−j}/|R|^{1/2}
        let c = -I * parity(n as i64 - j as i64);
        let (a, b) = sys.band(j);
        for l in 0..=lmax {
            log[l] += c * log_band_integral(sys, j, l as u32, sd.order)?;
        }
        if a < 0.0 && 0.0 < b {
            let (left, right) = split_band_rules(sys, j, sd.order)?;
            for l in 0..=lmax {
                let f = |x: f64| x.powi(l as i32);
                sign[l] += c * (apply_rule(&right, f)? - apply_rule(&left, f)?);
            }
        } else {
            let s = if b <= 0.0 { -1.0 } else { 1.0 };
            let rule = band_rule(sys, j, sd.order)?;
            for l in 0..=lmax {
                sign[l] += c * s * apply_rule(&rule, |x: f64| x.powi(l as i32))?;
            }
        }
    }
    Ok(Moments { log, sign })
}

fn scale(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// F_l = 2β∫ξ^l log|ξ|/√R₊ − πiα∫ξ^l sign ξ/√R₊, l = 0..n−1. Real.
pub fn f_vector(sd: &SurfaceData, kp: &KernelParams) -> Result<(Vec<f64>, f64)> {
    let n = sd.n();
    if n == 0 {
        return Ok((vec![], 0.0));
    }
    let mo = sigma_moments(sd, n - 1)?;
    let f: Vec<Complex64> = (0..n)
        .map(|l| 2.0 * kp.beta() * mo.log[l] - PI * I * kp.alpha * mo.sign[l])
        .collect();
    let resid = f.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / scale(&f);
    if resid > REALNESS_TOL {
        return Err(Error::NonRealResidue(resid));
    }
    Ok((f.iter().map(|z| z.re).collect(), resid))
}

/// ζ = 2Ã^{−T}F. Purely imaginary.
pub fn zeta_vector(sd: &SurfaceData, f_vec: &[f64]) -> Result<(Vec<Complex64>, f64)> {
    let n = sd.n();
    if n == 0 {
        return Ok((vec![], 0.0));
    }
    let inv = &sd.tilde_a_inv;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularTildeA);
    }
    let zeta: Vec<Complex64> = (0..n)
        .map(|j| 2.0 * (0..n).map(|l| inv[(l, j)] * f_vec[l]).sum::<Complex64>())
        .collect();
    let resid = zeta.iter().map(|z| z.re.abs()).fold(0.0, f64::max) / scale(&zeta);
    if resid > REALNESS_TOL {
        return Err(Error::NonRealResidue(resid));
    }
    Ok((zeta, resid))
}

/// ∫_Σ ξ^k H(ξ) dξ assembled from moments, k ≤ n+1.
fn h_moment(
    sd: &SurfaceData,
    kp: &KernelParams,
    zeta: &[Complex64],
    mo: &Moments,
    k: usize,
) -> Result<Complex64> {
    let n = sd.n();
    let beta = kp.beta();
    // ∫_{ξ<0} ξ^k/√R₊ = (∫ ξ^k/√R₊ − ∫ ξ^k sign ξ/√R₊)/2; the full integral
    // is −2πi·Res_∞ ξ^k/√R: 0 for k < n, 1 for k = n, S/2 for k = n+1.
    let s = sd.sys.endpoint_sum();
    let full = match k.cmp(&n) {
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater if k == n + 1 => 0.5 * s,
        _ => {
            return Err(Error::BadIndex {
                what: "moment degree",
                index: k,
                count: n + 2,
            })
        }
    };
    let full = -2.0 * PI * I * full;
    let neg = 0.5 * (full - mo.sign[k]);
    let mut out = -2.0 * beta * mo.log[k] - 2.0 * PI * I * beta * neg
        + (kp.alpha - beta) * PI * I * mo.sign[k];
    for j in 1..=n {
        out += zeta[j - 1] * 0.5 * sd.a_cycle_coefficient(j, k);
    }
    Ok(out)
}

/// (D_∞, D_{∞,1}) with D_{∞,1} from the reduced four-group formula.
pub fn d_infty_constants(
    sd: &SurfaceData,
    kp: &KernelParams,
    zeta: &[Complex64],
) -> Result<(Complex64, Complex64, f64)> {
    let n = sd.n();
    let mo = sigma_moments(sd, n + 1)?;
    let xn = h_moment(sd, kp, zeta, &mo, n)?;
    let d_inf = (-xn / (2.0 * PI * I)).exp();
    let s = sd.sys.endpoint_sum();
    let beta = kp.beta();
    let alpha = kp.alpha;
    let mut zs = Complex64::new(0.0, 0.0);
    for j in 1..=n {
        zs += zeta[j - 1]
            * (0.5 * s * sd.a_cycle_coefficient(j, n) - sd.a_cycle_coefficient(j, n + 1));
    }
    let d1 = zs / (4.0 * PI * I) + beta / (PI * I) * mo.log[n + 1]
        - beta * s / (2.0 * PI * I) * mo.log[n]
        - 0.5 * alpha * mo.sign[n + 1]
        + 0.25 * alpha * s * mo.sign[n];
    let resid = d1.re.abs() / d1.norm().max(1.0);
    if resid > D1_TOL {
        return Err(Error::NonImaginaryResidue(resid));
    }
    Ok((d_inf, d1, resid))
}

/// D_{∞,1} = S/(4πi)∫ξⁿH − (1/2πi)∫ξ^{n+1}H with H integrated directly on each
/// band using the principal branch of log ξ^{−2β}.
pub fn d_infty_1_unreduced(
    sd: &SurfaceData,
    kp: &KernelParams,
    zeta: &[Complex64],
) -> Result<Complex64> {
    let n = sd.n();
    let sys = &sd.sys;
    let beta = kp.beta();
    let mut x = [Complex64::new(0.0, 0.0); 2];
    for j in 0..=n {
        let c = -I * parity(n as i64 - j as i64);
        let zj = if j == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            zeta[j - 1]
        };
        let numer = |xi: f64| -> Complex64 {
            let lg = Complex64::new(xi, 0.0).ln();
            -2.0 * beta * lg + xi.signum() * (kp.alpha - beta) * PI * I + zj
        };
        let (a, b) = sys.band(j);
        let rules = if a < 0.0 && 0.0 < b {
            let (l, r) = graded_split_band_rules(sys, j, sd.order)?;
            vec![l, r]
        } else {
            vec![band_rule(sys, j, sd.order)?]
        };
        for rule in &rules {
            for &(xi, w) in rule {
                if xi == 0.0 {
                    continue;
                }
                let v = numer(xi) * c * w;
                x[0] += v * xi.powi(n as i32);
                x[1] += v * xi.powi(n as i32 + 1);
            }
        }
    }
    let s = sys.endpoint_sum();
    Ok(s / (4.0 * PI * I) * x[0] - x[1] / (2.0 * PI * I))
}

/// D_p = exp((log p^{−2β} + sign(p)(α−β)πi + ζ_j)/2) at an endpoint p of band j.
pub fn d_endpoint(sd: &SurfaceData, kp: &KernelParams, zeta: &[Complex64], i: usize) -> Complex64 {
    let p = sd.sys.endpoints()[i];
    let j = i / 2;
    let zj = if j == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        zeta[j - 1]
    };
    let beta = kp.beta();
    let e =
        -2.0 * beta * Complex64::new(p, 0.0).ln() + p.signum() * (kp.alpha - beta) * PI * I + zj;
    (0.5 * e).exp()
}

impl SzegoConstants {
    pub fn compute(sd: &SurfaceData, kp: &KernelParams) -> Result<SzegoConstants> {
        let (f_vec, f_imag_residue) = f_vector(sd, kp)?;
        let (zeta, zeta_real_residue) = zeta_vector(sd, &f_vec)?;
        let (d_infty, d_infty_1, d1_real_residue) = d_infty_constants(sd, kp, &zeta)?;
        Ok(SzegoConstants {
            f_vec,
            f_imag_residue,
            zeta,
            zeta_real_residue,
            d_infty,
            d_infty_1,
            d1_real_residue,
        })
    }

    /// Residual of Σ_j (ζ_j/2)a_{j,l} = F_l.
    pub fn linear_system_residual(&self, sd: &SurfaceData) -> f64 {
        let n = sd.n();
        (0..n)
            .map(|l| {
                let lhs: Complex64 = (1..=n)
                    .map(|j| self.zeta[j - 1] * 0.5 * sd.a_cycle_coefficient(j, l))
                    .sum();
                (lhs - self.f_vec[l]).norm()
            })
            .fold(0.0, f64::max)
    }
}
