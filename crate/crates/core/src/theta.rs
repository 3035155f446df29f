//! Riemann θ(z) = Σ_m exp(2πi mᵀz + iπ mᵀτm) with argument reduction and a
//! certified Gaussian tail bound, term-wise directional derivatives, and the
//! genus-1 odd function θ₁.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Default absolute tolerance of the reduced lattice sum.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Upper limit on the number of lattice points summed.
const MAX_POINTS: usize = 4_000_000;

/// Period matrix, truncation radius and precomputed lattice.
#[derive(Debug, Clone)]
pub struct ThetaContext {
    n: usize,
    tau: DMatrix<Complex64>,
    im_inv: DMatrix<f64>,
    lambda_min: f64,
    radius: usize,
    tol: f64,
    points: Vec<i32>,
    phases: Vec<Complex64>,
}

/// Σ_{r>m} N_r exp(−πλ(r − √n/2)²) with N_r the lattice shell size.
fn shell_tail(n: usize, lambda: f64, m: usize) -> f64 {
    let c = (n as f64).sqrt() / 2.0;
    let mut s = 0.0;
    for r in (m + 1)..(m + 200) {
        let rf = r as f64;
        let shell = (2.0 * rf + 1.0).powi(n as i32) - (2.0 * rf - 1.0).powi(n as i32);
        let d = (rf - c).max(0.0);
        let t = shell * (-PI * lambda * d * d).exp();
        s += t;
        if t < 1e-30 * s {
            break;
        }
    }
    s
}

impl ThetaContext {
    /// Chooses the smallest radius whose tail bound is below `tol`.
    pub fn new(tau: &DMatrix<Complex64>, tol: f64) -> Result<ThetaContext> {
        let n = tau.nrows();
        let (lmin, lmax) = Self::im_spectrum(tau)?;
        let pref = (PI * lmax * n as f64 / 4.0).exp();
        let mut m: usize = 1;
        loop {
            if (2 * m + 1).pow(n as u32) > MAX_POINTS {
                return Err(Error::TruncationBoundExceeded(tol));
            }
            if pref * shell_tail(n, lmin, m) < tol {
                break;
            }
            m += 1;
        }
        Self::with_radius(tau, m, tol)
    }

    /// Context with an explicit radius (used to check truncation stability).
    pub fn with_radius(tau: &DMatrix<Complex64>, radius: usize, tol: f64) -> Result<ThetaContext> {
        let n = tau.nrows();
        let (lambda_min, _) = Self::im_spectrum(tau)?;
        if n > 0 && (2 * radius + 1).pow(n as u32) > MAX_POINTS {
            return Err(Error::TruncationBoundExceeded(tol));
        }
        let im = DMatrix::from_fn(n, n, |i, j| tau[(i, j)].im);
        let im_inv = im.try_inverse().ok_or(Error::PeriodMatrixNotPositive)?;
        let side = 2 * radius as i32 + 1;
        let count = if n == 0 {
            1
        } else {
            (side as usize).pow(n as u32)
        };
        let mut points = Vec::with_capacity(count * n);
        let mut phases = Vec::with_capacity(count);
        let mut idx = vec![-(radius as i32); n];
        for _ in 0..count {
            let mut q = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    q += tau[(i, j)] * (idx[i] * idx[j]) as f64;
                }
            }
            points.extend_from_slice(&idx);
            phases.push(I * PI * q);
            for d in 0..n {
                idx[d] += 1;
                if idx[d] <= radius as i32 {
                    break;
                }
                idx[d] = -(radius as i32);
            }
        }
        Ok(ThetaContext {
            n,
            tau: tau.clone(),
            im_inv,
            lambda_min,
            radius,
            tol,
            points,
            phases,
        })
    }

    fn im_spectrum(tau: &DMatrix<Complex64>) -> Result<(f64, f64)> {
        let n = tau.nrows();
        if n == 0 {
            return Ok((1.0, 1.0));
        }
        let im = DMatrix::from_fn(n, n, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
        let eig = SymmetricEigen::new(im);
        let lmin = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let lmax = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(lmin > 0.0) {
            return Err(Error::PeriodMatrixNotPositive);
        }
        Ok((lmin, lmax))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> &DMatrix<Complex64> {
        &self.tau
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Splits z = z' + τk with Im z' in the fundamental cell, Re z' in [−½, ½).
    fn reduce(&self, z: &[Complex64]) -> (Vec<Complex64>, Vec<f64>) {
        let n = self.n;
        let mut k = vec![0.0; n];
        for i in 0..n {
            let mut c = 0.0;
            for j in 0..n {
                c += self.im_inv[(i, j)] * z[j].im;
            }
            k[i] = c.round();
        }
        let mut zr = z.to_vec();
        for i in 0..n {
            for j in 0..n {
                zr[i] -= self.tau[(i, j)] * k[j];
            }
            zr[i].re -= zr[i].re.round();
        }
        (zr, k)
    }

    /// θ, D_vθ and D_v²θ at z (derivatives along v; pass v = None for θ only).
    pub fn eval_with_derivs(&self, z: &[Complex64], v: Option<&[Complex64]>) -> [Complex64; 3] {
        let n = self.n;
        assert_eq!(z.len(), n);
        if n == 0 {
            return [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ];
        }
        let (zr, k) = self.reduce(z);
        let mut kz = Complex64::new(0.0, 0.0);
        let mut ktk = Complex64::new(0.0, 0.0);
        for i in 0..n {
            kz += zr[i] * k[i];
            for j in 0..n {
                ktk += self.tau[(i, j)] * (k[i] * k[j]);
            }
        }
        let pre = (-2.0 * PI * I * kz - I * PI * ktk).exp();
        let kv: Complex64 = match v {
            Some(v) => (0..n).map(|i| v[i] * k[i]).sum(),
            None => Complex64::new(0.0, 0.0),
        };
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (idx, &ph) in self.phases.iter().enumerate() {
            let m = &self.points[idx * n..(idx + 1) * n];
            let mut e = ph;
            for i in 0..n {
                e += 2.0 * PI * I * zr[i] * m[i] as f64;
            }
            let t = e.exp();
            s0 += t;
            if let Some(v) = v {
                let mv: Complex64 = (0..n).map(|i| v[i] * m[i] as f64).sum();
                let w = 2.0 * PI * I * (mv - kv);
                s1 += w * t;
                s2 += w * w * t;
            }
        }
        [pre * s0, pre * s1, pre * s2]
    }

    /// θ(z).
    pub fn theta(&self, z: &[Complex64]) -> Complex64 {
        self.eval_with_derivs(z, None)[0]
    }

    /// θ at a real argument.
    pub fn theta_real(&self, x: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.theta(&z)
    }

    /// Directional derivative of order 1 or 2 along v, summed term-wise.
    pub fn theta_dirderiv(&self, z: &[Complex64], v: &[Complex64], order: u8) -> Complex64 {
        let r = self.eval_with_derivs(z, Some(v));
        match order {
            1 => r[1],
            2 => r[2],
            _ => panic!("derivative order must be 1 or 2"),
        }
    }

    fn genus_one(&self) -> Result<Complex64> {
        if self.n != 1 {
            return Err(Error::WrongGenus(self.n));
        }
        Ok(self.tau[(0, 0)])
    }

    /// θ₁(z) = i·exp(−πiz + πiτ/4)·θ(z − (1+τ)/2), genus 1 only.
    pub fn theta1(&self, z: Complex64) -> Result<Complex64> {
        let t = self.genus_one()?;
        let w = z - 0.5 * (1.0 + t);
        Ok(I * (-PI * I * z + PI * I * t / 4.0).exp() * self.theta(&[w]))
    }

    /// θ₁′(z), genus 1 only.
    pub fn theta1_prime(&self, z: Complex64) -> Result<Complex64> {
        let t = self.genus_one()?;
        let w = z - 0.5 * (1.0 + t);
        let r = self.eval_with_derivs(&[w], Some(&[Complex64::new(1.0, 0.0)]));
        Ok(I * (-PI * I * z + PI * I * t / 4.0).exp() * (r[1] - PI * I * r[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx1(t: f64) -> ThetaContext {
        ThetaContext::new(
            &DMatrix::from_element(1, 1, Complex64::new(0.0, t)),
            DEFAULT_TOL,
        )
        .unwrap()
    }

    #[test]
    fn tau_i_at_zero() {
        let c = ctx1(1.0);
        let v = c.theta(&[Complex64::new(0.0, 0.0)]);
        // Σ exp(−π m²)
        assert!((v.re - 1.086_434_811_213_308_1).abs() < 1e-14, "{v}");
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn second_derivative_negative_first_zero() {
        let c = ctx1(1.0);
        let z = [Complex64::new(0.0, 0.0)];
        let v = [Complex64::new(1.0, 0.0)];
        assert!(c.theta_dirderiv(&z, &v, 1).norm() < 1e-14);
        assert!(c.theta_dirderiv(&z, &v, 2).re < 0.0);
    }

    #[test]
    fn theta1_odd_and_vanishing() {
        let c = ctx1(0.8);
        let t0 = c.theta1(Complex64::new(0.0, 0.0)).unwrap();
        assert!(t0.norm() < 1e-12, "{t0}");
        let z = Complex64::new(0.31, 0.17);
        let s = c.theta1(z).unwrap() + c.theta1(-z).unwrap();
        assert!(s.norm() < 1e-12);
        let d = c.theta1_prime(Complex64::new(0.0, 0.0)).unwrap();
        assert!(d.im.abs() < 1e-13 && d.re.abs() > 0.1);
    }

    #[test]
    fn wrong_genus() {
        let tau = DMatrix::from_diagonal_element(2, 2, Complex64::new(0.0, 1.0));
        let c = ThetaContext::new(&tau, DEFAULT_TOL).unwrap();
        assert_eq!(
            c.theta1(Complex64::new(0.0, 0.0)),
            Err(Error::WrongGenus(2))
        );
    }

    #[test]
    fn large_imaginary_argument_reduced() {
        let c = ctx1(1.3);
        let t = c.tau()[(0, 0)];
        let z = Complex64::new(0.2, 0.1);
        let shifted = z + 3.0 * t;
        let lhs = c.theta(&[shifted]);
        // θ(z + 3τ) = exp(−6πiz − 9πiτ) θ(z)
        let rhs = (-6.0 * PI * I * z - 9.0 * PI * I * t).exp() * c.theta(&[z]);
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm());
    }
}
