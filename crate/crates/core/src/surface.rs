//! Hyperelliptic data of the two-sheeted surface w² = R(z) branched at the
//! endpoints: cycle matrix, master polynomial p, frequencies Ω, period matrix
//! τ, Abel map, the divisor points z_j, Riemann constants K, d and A(∞).
//!
//! Branch bookkeeping along the real axis (first sheet): on band j the upper
//! boundary value is √R₊ = i(−1)^{n−j}|R|^{1/2} and √R₋ = −√R₊; on gap k
//! (b_k, a_{k+1}) √R = (−1)^{n−k}|R|^{1/2}; right of b_n it is |R|^{1/2}.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{
    apply_rule, band_rule, gap_rule, left_ray_rule, partial_piece_rule, right_ray_rule,
    IntervalSystem, PieceRule,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Boundary value side on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }
}

#[inline]
fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Everything derived from the endpoint configuration.
#[derive(Debug, Clone)]
pub struct SurfaceData {
    pub sys: IntervalSystem,
    pub order: usize,
    /// 𝔸, (n+1)×(n+1), entries a_{k,l}, l = 0..n.
    pub big_a: DMatrix<Complex64>,
    /// a⃗ = (a_{k,n+1})_k.
    pub a_vec: Vec<Complex64>,
    /// Rows 1..n, columns 0..n−1 of 𝔸.
    pub tilde_a: DMatrix<Complex64>,
    pub tilde_a_inv: DMatrix<Complex64>,
    /// Ascending coefficients of the monic p, length n+2.
    pub p_coeffs: Vec<f64>,
    /// Largest imaginary part met when solving for p (relative).
    pub p_imag_residue: f64,
    pub x_zeros: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub omega_big: Vec<f64>,
    pub tau: DMatrix<Complex64>,
    pub tau_asymmetry: f64,
    pub z_gap_zeros: Vec<f64>,
    pub riemann_k: Vec<Complex64>,
    pub d_vec: Vec<Complex64>,
    pub abel_infty: Vec<Complex64>,
    pub lattice_defect: f64,
    /// piece_moments[i][l] = ∫ ξ^l/|R|^{1/2} over the piece between endpoints i and i+1.
    piece_moments: Vec<Vec<f64>>,
    max_degree: usize,
}

/// Band moments ∫_{a_k}^{b_k} ξ^l/|R|^{1/2}, l = 0..=lmax, for one band.
fn moments(rule: &PieceRule, lmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    for &(xi, w) in rule {
        let mut p = w;
        for o in out.iter_mut() {
            *o += p;
            p *= xi;
        }
    }
    out
}

/// (𝔸, a⃗): a_{k,l} = 2i(−1)^{n−k+1} ∫_{a_k}^{b_k} ξ^l/|R|^{1/2} dξ.
pub fn cycle_matrix(
    sys: &IntervalSystem,
    order: usize,
) -> Result<(DMatrix<Complex64>, Vec<Complex64>)> {
    let n = sys.n();
    let mut big_a = DMatrix::zeros(n + 1, n + 1);
    let mut a_vec = vec![Complex64::new(0.0, 0.0); n + 1];
    for k in 0..=n {
        let mo = moments(&band_rule(sys, k, order)?, n + 1);
        let c = I * (2.0 * parity(n as i64 - k as i64 + 1));
        for l in 0..=n {
            big_a[(k, l)] = c * mo[l];
        }
        a_vec[k] = c * mo[n + 1];
    }
    Ok((big_a, a_vec))
}

/// Evaluates a real polynomial with ascending coefficients.
pub fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::ZeroNotBracketed(lo, hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monic p of degree n+1 from (p₀..pₙ)ᵀ = −𝔸⁻¹a⃗, and its zero in each band.
/// Returns (coefficients, zeros, relative imaginary residue).
pub fn master_polynomial(
    sys: &IntervalSystem,
    big_a: &DMatrix<Complex64>,
    a_vec: &[Complex64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = sys.n();
    let rhs = nalgebra::DVector::from_iterator(n + 1, a_vec.iter().map(|v| -v));
    let sol = big_a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularCycleMatrix)?;
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularCycleMatrix);
    }
    let scale = sol.iter().fold(1.0_f64, |m, v| m.max(v.norm()));
    let resid = sol.iter().fold(0.0_f64, |m, v| m.max(v.im.abs())) / scale;
    let mut p: Vec<f64> = sol.iter().map(|v| v.re).collect();
    p.push(1.0);
    let mut zeros = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let (a, b) = sys.band(j);
        zeros.push(bisect(|x| poly_eval(&p, x), a, b)?);
    }
    Ok((p, zeros, resid))
}

/// (Ω̂, Ω) with Ω̂_k = 2(−1)^{n−k}∫_{gap k} p/|R|^{1/2} and Ω_j = Σ_{k<j} Ω̂_k.
pub fn frequencies(sys: &IntervalSystem, p: &[f64], order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.n();
    let mut hat = Vec::with_capacity(n);
    for k in 0..n {
        let v = 2.0
            * parity(n as i64 - k as i64)
            * apply_rule(&gap_rule(sys, k, order)?, |x| poly_eval(p, x))?;
        if !(v > 0.0) {
            return Err(Error::NonPositiveFrequency(k, v));
        }
        hat.push(v);
    }
    let mut big = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &h in &hat {
        acc += h;
        big.push(acc);
    }
    Ok((hat, big))
}

/// τ_{ij} = ∮_{B_j} ω_i = Σ_{l=1}^{j} 2(−1)^{n−l} ∫_{b_{l−1}}^{a_l} ω_i/|R|^{1/2}-weighted.
/// Returns (τ symmetrised, relative asymmetry before symmetrising).
pub fn period_matrix(
    sys: &IntervalSystem,
    tilde_a_inv: &DMatrix<Complex64>,
    order: usize,
) -> Result<(DMatrix<Complex64>, f64)> {
    let n = sys.n();
    let mut tau = DMatrix::zeros(n, n);
    // cumulative B-cycle moments
    let mut cum = vec![0.0; n];
    for j in 0..n {
        let l = j + 1;
        let g = moments(&gap_rule(sys, l - 1, order)?, n.saturating_sub(1));
        let s = 2.0 * parity(n as i64 - l as i64);
        for m in 0..n {
            cum[m] += s * g[m];
        }
        for i in 0..n {
            let mut v = Complex64::new(0.0, 0.0);
            for m in 0..n {
                v += tilde_a_inv[(m, i)] * cum[m];
            }
            tau[(i, j)] = v;
        }
    }
    let norm = tau.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((tau[(i, j)] - tau[(j, i)]).norm());
        }
    }
    let rel = if norm > 0.0 { asym / norm } else { 0.0 };
    if rel > 1e-8 {
        return Err(Error::AsymmetryExceedsTolerance(rel));
    }
    let sym = (&tau + tau.transpose()) * Complex64::new(0.5, 0.0);
    let im = DMatrix::from_fn(n, n, |i, j| sym[(i, j)].im);
    if n > 0 && im.cholesky().is_none() {
        return Err(Error::PeriodMatrixNotPositive);
    }
    Ok((sym, rel))
}

/// Zeros of ς(z) = Π(z−b_i) − Π(z−a_i), one in each gap.
pub fn branch_zeros(sys: &IntervalSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    let f = |z: f64| {
        let pb: f64 = (0..=n).map(|k| z - sys.b(k)).product();
        let pa: f64 = (0..=n).map(|k| z - sys.a(k)).product();
        pb - pa
    };
    (0..n)
        .map(|k| {
            let (lo, hi) = sys.gap(k);
            bisect(f, lo, hi)
        })
        .collect()
}

/// Reduces w modulo Zⁿ + τZⁿ. Returns (integer part, τ part, residual vector, max |residual|).
pub fn lattice_reduce(
    tau: &DMatrix<Complex64>,
    w: &[Complex64],
) -> (Vec<i64>, Vec<i64>, Vec<Complex64>, f64) {
    let n = w.len();
    if n == 0 {
        return (vec![], vec![], vec![], 0.0);
    }
    // [I Re τ; 0 Im τ] (m1; m2) = (Re w; Im w)
    let mut sys = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut rhs = nalgebra::DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        sys[(i, i)] = 1.0;
        for j in 0..n {
            sys[(i, n + j)] = tau[(i, j)].re;
            sys[(n + i, n + j)] = tau[(i, j)].im;
        }
        rhs[i] = w[i].re;
        rhs[n + i] = w[i].im;
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| nalgebra::DVector::zeros(2 * n));
    let m1: Vec<i64> = (0..n).map(|i| sol[i].round() as i64).collect();
    let m2: Vec<i64> = (0..n).map(|i| sol[n + i].round() as i64).collect();
    let mut res = Vec::with_capacity(n);
    let mut defect = 0.0_f64;
    for i in 0..n {
        let mut v = w[i] - m1[i] as f64;
        for j in 0..n {
            v -= tau[(i, j)] * m2[j] as f64;
        }
        defect = defect.max(v.norm());
        res.push(v);
    }
    (m1, m2, res, defect)
}

impl SurfaceData {
    /// Builds the full surface data and runs the lattice self-check.
    pub fn build(sys: &IntervalSystem, order: usize) -> Result<SurfaceData> {
        let n = sys.n();
        let max_degree = n + 2;
        let (big_a, a_vec) = cycle_matrix(sys, order)?;
        let (p_coeffs, x_zeros, p_imag_residue) = master_polynomial(sys, &big_a, &a_vec)?;
        let (omega_hat, omega_big) = frequencies(sys, &p_coeffs, order)?;
        let tilde_a = if n > 0 {
            big_a.view((1, 0), (n, n)).into_owned()
        } else {
            DMatrix::zeros(0, 0)
        };
        let tilde_a_inv = if n > 0 {
            tilde_a.clone().try_inverse().ok_or(Error::SingularTildeA)?
        } else {
            DMatrix::zeros(0, 0)
        };
        let (tau, tau_asymmetry) = period_matrix(sys, &tilde_a_inv, order)?;
        let z_gap_zeros = branch_zeros(sys)?;
        let npieces = 2 * n + 1;
        let mut piece_moments = Vec::with_capacity(npieces);
        for i in 0..npieces {
            let rule = if i % 2 == 0 {
                band_rule(sys, i / 2, order)?
            } else {
                gap_rule(sys, i / 2, order)?
            };
            piece_moments.push(moments(&rule, max_degree));
        }
        let mut sd = SurfaceData {
            sys: sys.clone(),
            order,
            big_a,
            a_vec,
            tilde_a,
            tilde_a_inv,
            p_coeffs,
            p_imag_residue,
            x_zeros,
            omega_hat,
            omega_big,
            tau,
            tau_asymmetry,
            z_gap_zeros,
            riemann_k: vec![],
            d_vec: vec![],
            abel_infty: vec![],
            lattice_defect: 0.0,
            piece_moments,
            max_degree,
        };
        let (k, d, inf) = sd.theta_characteristics()?;
        sd.riemann_k = k;
        sd.d_vec = d;
        sd.abel_infty = inf;
        let w: Vec<Complex64> = sd
            .abel_infty
            .iter()
            .zip(&sd.d_vec)
            .map(|(a, b)| a + b)
            .collect();
        let (_, _, _, defect) = lattice_reduce(&sd.tau, &w);
        sd.lattice_defect = defect;
        if defect > 1e-8 {
            return Err(Error::LatticeRelationViolated(defect));
        }
        Ok(sd)
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// p(x).
    pub fn p(&self, x: f64) -> f64 {
        poly_eval(&self.p_coeffs, x)
    }

    /// Complex factor 1/√R relative to 1/|R|^{1/2} on piece i for the given side.
    fn piece_factor(&self, i: usize, side: Side) -> Complex64 {
        let n = self.n() as i64;
        if i.is_multiple_of(2) {
            let j = (i / 2) as i64;
            -I * (side.sign() * parity(n - j))
        } else {
            let k = (i / 2) as i64;
            Complex64::new(parity(n - k), 0.0)
        }
    }

    /// M_l(z) = ∫_{a₀}^{z} ξ^l dξ/√R on the first sheet along the real axis,
    /// l = 0..=lmax. `None` means +∞ (only l ≤ n−1 converge there).
    pub fn path_moments(&self, z: Option<f64>, side: Side, lmax: usize) -> Result<Vec<Complex64>> {
        let e = self.sys.endpoints();
        let n = self.n();
        let mut out = vec![Complex64::new(0.0, 0.0); lmax + 1];
        let add_rule = |out: &mut Vec<Complex64>, rule: &PieceRule, c: Complex64| {
            let mo = moments(rule, lmax);
            for (o, m) in out.iter_mut().zip(mo) {
                *o += c * m;
            }
        };
        let add_full = |out: &mut Vec<Complex64>, i: usize| -> Result<()> {
            let c = self.piece_factor(i, side);
            if lmax <= self.max_degree {
                for l in 0..=lmax {
                    out[l] += c * self.piece_moments[i][l];
                }
            } else {
                let rule = if i.is_multiple_of(2) {
                    band_rule(&self.sys, i / 2, self.order)?
                } else {
                    gap_rule(&self.sys, i / 2, self.order)?
                };
                add_rule(out, &rule, c);
            }
            Ok(())
        };
        let last = e.len() - 1;
        match z {
            Some(z) if z < e[0] => {
                let rule = left_ray_rule(&self.sys, Some(z), self.order)?;
                add_rule(&mut out, &rule, Complex64::new(-parity(n as i64 + 1), 0.0));
            }
            Some(z) if z <= e[last] => {
                let i = (0..=last).rev().find(|&i| e[i] <= z).unwrap_or(0);
                for piece in 0..i {
                    add_full(&mut out, piece)?;
                }
                if z > e[i] {
                    let rule = partial_piece_rule(&self.sys, i, z, self.order)?;
                    add_rule(&mut out, &rule, self.piece_factor(i, side));
                }
            }
            _ => {
                for piece in 0..last {
                    add_full(&mut out, piece)?;
                }
                let rule = right_ray_rule(&self.sys, z, self.order)?;
                add_rule(&mut out, &rule, Complex64::new(1.0, 0.0));
            }
        }
        Ok(out)
    }

    /// Abel map A(z) = ∫_{a₀}^{z} ωᵀ (first sheet, boundary value from `side`).
    /// `None` evaluates A(∞).
    pub fn abel_map(&self, z: Option<f64>, side: Side) -> Result<Vec<Complex64>> {
        let n = self.n();
        if n == 0 {
            return Ok(vec![]);
        }
        let mo = self.path_moments(z, side, n - 1)?;
        Ok(self.apply_tilde_inv(&mo))
    }

    fn apply_tilde_inv(&self, mo: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|m| mo[m] * self.tilde_a_inv[(m, j)]).sum())
            .collect()
    }

    /// Closed-form half-period value of the Abel map at endpoint index i
    /// (0-based into a₀,b₀,…), for the given side.
    pub fn abel_endpoint_closed_form(&self, i: usize, side: Side) -> Vec<Complex64> {
        let n = self.n();
        let s = side.sign();
        let half_tau = |j: usize| -> Vec<Complex64> {
            if j == 0 {
                vec![Complex64::new(0.0, 0.0); n]
            } else {
                (0..n).map(|r| -0.5 * self.tau[(r, j - 1)]).collect()
            }
        };
        let j = i / 2;
        if i == 0 {
            return vec![Complex64::new(0.0, 0.0); n];
        }
        if i == 2 * n + 1 {
            return half_tau(n);
        }
        let first = if i.is_multiple_of(2) { j } else { j + 1 };
        let mut v = half_tau(j);
        for k in first..=n {
            if k >= 1 {
                v[k - 1] += -0.5 * s;
            }
        }
        v
    }

    /// (K, d, A(∞)) with K = Σ_j A₊(a_j), d = K + Σ_j A₊(z_j).
    pub fn theta_characteristics(
        &self,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)> {
        let n = self.n();
        let mut k = vec![Complex64::new(0.0, 0.0); n];
        for j in 1..=n {
            let a = self.abel_map(Some(self.sys.a(j)), Side::Above)?;
            for (x, y) in k.iter_mut().zip(a) {
                *x += y;
            }
        }
        let mut d = k.clone();
        for &zj in &self.z_gap_zeros {
            let a = self.abel_map(Some(zj), Side::Above)?;
            for (x, y) in d.iter_mut().zip(a) {
                *x += y;
            }
        }
        let inf = self.abel_map(None, Side::Above)?;
        Ok((k, d, inf))
    }

    /// g(z) = ∫_{a₀}^{z} p(ξ)/√R dξ (first sheet).
    pub fn g_function(&self, z: f64, side: Side) -> Result<Complex64> {
        let mo = self.path_moments(Some(z), side, self.n() + 1)?;
        Ok(mo.iter().zip(&self.p_coeffs).map(|(m, c)| m * *c).sum())
    }

    /// ∮_{A_k} ξ^l dξ/√R = a_{k,l} for l ≤ n+1.
    pub fn a_cycle_coefficient(&self, k: usize, l: usize) -> Complex64 {
        if l <= self.n() {
            self.big_a[(k, l)]
        } else {
            self.a_vec[k]
        }
    }

    /// Band moment ∫_{a_j}^{b_j} ξ^l / |R|^{1/2} for l ≤ n+2.
    pub fn band_moment(&self, j: usize, l: usize) -> f64 {
        self.piece_moments[2 * j][l]
    }

    /// Gap moment ∫_{b_k}^{a_{k+1}} ξ^l / |R|^{1/2} for l ≤ n+2.
    pub fn gap_moment(&self, k: usize, l: usize) -> f64 {
        self.piece_moments[2 * k + 1][l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{validate_system, validate_system_unanchored};
    use std::f64::consts::PI;

    #[test]
    fn unit_interval() {
        let sys = validate_system(&[-1.0, 1.0]).unwrap();
        let sd = SurfaceData::build(&sys, 256).unwrap();
        assert!((sd.big_a[(0, 0)] - Complex64::new(0.0, -2.0 * PI)).norm() < 1e-13);
        assert!(sd.big_a[(0, 0)].re == 0.0);
        assert!(sd.a_vec[0].norm() < 1e-14);
        assert!(sd.p_coeffs[0].abs() < 1e-14 && (sd.p_coeffs[1] - 1.0).abs() < 1e-14);
        assert!(sd.x_zeros[0].abs() < 1e-13);
        assert!(sd.omega_big.is_empty() && sd.z_gap_zeros.is_empty() && sd.d_vec.is_empty());
    }

    #[test]
    fn symmetric_two_band() {
        let sys = validate_system_unanchored(&[-2.0, -1.0, 1.0, 2.0]).unwrap();
        let sd = SurfaceData::build(&sys, 256).unwrap();
        let t = sd.tau[(0, 0)];
        assert!(t.im > 0.0 && t.re.abs() < 1e-10, "{t}");
        assert!(sd.omega_big[0] > 0.0);
        assert!(sd.z_gap_zeros[0].abs() < 1e-14);
        for l in 0..=2 {
            let mirror = if l % 2 == 0 { -1.0 } else { 1.0 };
            let a1 = sd.a_cycle_coefficient(1, l);
            assert!((sd.a_cycle_coefficient(0, l) - a1 * mirror).norm() < 1e-12);
        }
        assert!((sd.x_zeros[0] + sd.x_zeros[1]).abs() < 1e-12);
        assert!(sd.p_coeffs[1].abs() < 1e-12);
        assert!(sd.lattice_defect < 1e-8);
    }

    #[test]
    fn bilinear_relation_fixes_b_orientation() {
        let sys = validate_system(&[-2.1, -0.7, -0.3, 0.9, 1.4, 2.6]).unwrap();
        let sd = SurfaceData::build(&sys, 256).unwrap();
        let n = sd.n();
        for j in 0..n {
            let v = Complex64::new(0.0, -4.0 * PI) * sd.tilde_a_inv[(n - 1, j)];
            assert!(
                (v.re - sd.omega_big[j]).abs() < 1e-10 * sd.omega_big[j],
                "{v} vs {}",
                sd.omega_big[j]
            );
        }
    }

    #[test]
    fn abel_closed_forms() {
        let sys = validate_system(&[-2.1, -0.7, -0.3, 0.9, 1.4, 2.6]).unwrap();
        let sd = SurfaceData::build(&sys, 256).unwrap();
        for i in 0..sys.endpoints().len() {
            for side in [Side::Above, Side::Below] {
                let num = sd.abel_map(Some(sys.endpoints()[i]), side).unwrap();
                let cf = sd.abel_endpoint_closed_form(i, side);
                for (a, b) in num.iter().zip(&cf) {
                    assert!((a - b).norm() < 1e-9, "endpoint {i} {side:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn branch_zero_example() {
        let sys = validate_system_unanchored(&[-2.0, -1.0, 1.0, 3.0]).unwrap();
        let z = branch_zeros(&sys).unwrap();
        assert!(z[0] > -1.0 && z[0] < 1.0);
        let s = (z[0] + 1.0) * (z[0] - 3.0) - (z[0] + 2.0) * (z[0] - 1.0);
        assert!(s.abs() < 1e-13);
    }
}
