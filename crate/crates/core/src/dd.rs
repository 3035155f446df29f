//! Double-double arithmetic: a value is the unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi)/2`, giving roughly 32 significant digits.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double scalar.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn from_sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Dd { hi, lo }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn from_prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, mut e) = two_prod(self.hi, b);
        e = self.lo.mul_add(b, e);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s, mut e) = two_sum(self.hi, b);
        e += self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Dd::from_prod(q1, b);
        let q2 = r.hi / b;
        let r = r - Dd::from_prod(q2, b);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add_f64(q3)
    }

    #[inline]
    pub fn sqr(self) -> Self {
        self * self
    }

    /// Square root by one Newton step on the double estimate.
    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(self.hi.sqrt());
        }
        let x = self.hi.sqrt();
        let r = self - Dd::from_prod(x, x);
        Dd::from_sum(x, r.hi / (2.0 * x))
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, mut e) = two_prod(self.hi, b.hi);
        e += self.hi * b.lo + self.lo * b.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add_f64(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

// Rational Stirling coefficients B_{2k}/(2k(2k−1)), k = 1..12.
const STIRLING_DD: [(f64, f64); 12] = [
    (1.0, 12.0),
    (-1.0, 360.0),
    (1.0, 1260.0),
    (-1.0, 1680.0),
    (1.0, 1188.0),
    (-691.0, 360_360.0),
    (1.0, 156.0),
    (-3617.0, 122_400.0),
    (43867.0, 244_188.0),
    (-174_611.0, 125_400.0),
    (77683.0, 5796.0),
    (-236_364_091.0, 1_506_960.0),
];

impl Dd {
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123_233_995_736_766e-17,
    };
    pub const LN_2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    /// Multiplication by 2^k (exact).
    fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / Dd::LN_2.hi).round();
        let r = (self - Dd::LN_2.mul_f64(k)).ldexp(-5);
        let mut sum = Dd::ONE;
        for n in (1..=16).rev() {
            sum = Dd::ONE + (r * sum).div_f64(n as f64);
        }
        for _ in 0..5 {
            sum = sum.sqr();
        }
        sum.ldexp(k as i32)
    }

    /// Natural logarithm by Newton iteration on exp.
    pub fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    /// self^p for self > 0.
    pub fn powd(self, p: Dd) -> Dd {
        (p * self.ln()).exp()
    }

    /// (sin x, cos x) for moderate |x|.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let k = (self.hi / Dd::FRAC_PI_2.hi).round();
        let t = self - Dd::FRAC_PI_2.mul_f64(k);
        let t2 = t.sqr();
        let mut s = Dd::ONE;
        let mut c = Dd::ONE;
        for m in (1..=16).rev() {
            let m = m as f64;
            s = Dd::ONE - (t2 * s).div_f64((2.0 * m) * (2.0 * m + 1.0));
            c = Dd::ONE - (t2 * c).div_f64((2.0 * m - 1.0) * (2.0 * m));
        }
        let s = s * t;
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    /// atan2(y, x) by Newton iteration on the double estimate.
    pub fn atan2(y: Dd, x: Dd) -> Dd {
        let mut t = Dd::new(y.hi.atan2(x.hi));
        for _ in 0..2 {
            let (s, c) = t.sin_cos();
            t += (y * c - x * s) / (x * c + y * s);
        }
        t
    }

    /// Re log Γ(x + iy) for x ≥ ½ (Stirling after shifting to x ≥ 60).
    pub fn ln_gamma_re(x: Dd, y: Dd) -> Dd {
        let mut w = DdComplex::new(x, y);
        let mut prod = DdComplex::ONE;
        while w.re.hi < 60.0 {
            prod = prod * w;
            w.re = w.re.add_f64(1.0);
        }
        let ln_abs = w.norm_sqr().ln().mul_f64(0.5);
        let arg = Dd::atan2(w.im, w.re);
        let half_ln_2pi = Dd::PI.mul_f64(2.0).ln().mul_f64(0.5);
        let inv = DdComplex::ONE / w;
        let inv2 = inv * inv;
        let mut p = inv;
        let mut series = Dd::ZERO;
        for &(num, den) in &STIRLING_DD {
            series += p.re * (Dd::new(num) / Dd::new(den));
            p = p * inv2;
        }
        (w.re - Dd::new(0.5)) * ln_abs - w.im * arg - w.re + half_ln_2pi + series
            - prod.norm_sqr().ln().mul_f64(0.5)
    }
}

/// Compensated accumulation of Σ a_k·b_k over double-double inputs, with
/// four independent partial sums.
pub fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    let n = a.len().min(b.len());
    let mut hi = [0.0f64; 4];
    let mut lo = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let (x, y) = (a[4 * c + l], b[4 * c + l]);
            let (p, e) = two_prod(x.hi, y.hi);
            let e = e + x.hi * y.lo + x.lo * y.hi;
            let (s, f) = two_sum(hi[l], p);
            hi[l] = s;
            lo[l] += f + e;
        }
    }
    let mut acc = Dd::ZERO;
    for l in 0..4 {
        acc += Dd::from_sum(hi[l], lo[l]);
    }
    for k in 4 * chunks..n {
        acc += a[k] * b[k];
    }
    acc
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: DdComplex = DdComplex {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    #[inline]
    pub fn new(re: Dd, im: Dd) -> Self {
        DdComplex { re, im }
    }

    #[inline]
    pub fn from_c64(z: Complex64) -> Self {
        DdComplex {
            re: Dd::new(z.re),
            im: Dd::new(z.im),
        }
    }

    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn conj(self) -> Self {
        DdComplex {
            re: self.re,
            im: -self.im,
        }
    }

    /// Multiplication by `i`.
    #[inline]
    pub fn mul_i(self) -> Self {
        DdComplex {
            re: -self.im,
            im: self.re,
        }
    }

    #[inline]
    pub fn scale(self, s: Dd) -> Self {
        DdComplex {
            re: self.re * s,
            im: self.im * s,
        }
    }

    #[inline]
    pub fn scale_f64(self, s: f64) -> Self {
        DdComplex {
            re: self.re.mul_f64(s),
            im: self.im.mul_f64(s),
        }
    }

    #[inline]
    pub fn div_real(self, s: Dd) -> Self {
        DdComplex {
            re: self.re / s,
            im: self.im / s,
        }
    }

    #[inline]
    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    /// Cheap magnitude estimate in double precision.
    #[inline]
    pub fn abs_f64(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Neg for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn neg(self) -> DdComplex {
        DdComplex {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Add for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn add(self, b: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Sub for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn sub(self, b: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re - b.re,
            im: self.im - b.im,
        }
    }
}

impl Mul for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn mul(self, b: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}

impl Div for DdComplex {
    type Output = DdComplex;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, b: DdComplex) -> DdComplex {
        let den = b.norm_sqr();
        (self * b.conj()).div_real(den)
    }
}

impl AddAssign for DdComplex {
    #[inline]
    fn add_assign(&mut self, b: DdComplex) {
        *self = *self + b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_functions() {
        let one = Dd::ONE.exp().ln();
        assert!((one - Dd::ONE).to_f64().abs() < 1e-30);
        let (s, c) = Dd::PI.mul_f64(0.25).sin_cos();
        assert!((s - c).to_f64().abs() < 1e-30);
        assert!((s * s + c * c - Dd::ONE).to_f64().abs() < 1e-30);
        let (s, _) = Dd::new(37.0).sin_cos();
        assert!((s.to_f64() - 37f64.sin()).abs() < 1e-15);
        let t = Dd::atan2(Dd::ONE, Dd::ONE);
        assert!((t - Dd::PI.mul_f64(0.25)).to_f64().abs() < 1e-30);
        // Γ(1/2) = √π
        let g = Dd::ln_gamma_re(Dd::new(0.5), Dd::ZERO);
        assert!((g - Dd::PI.ln().mul_f64(0.5)).to_f64().abs() < 1e-27);
        // |Γ(1+i)|² = π/sinh π
        let g = Dd::ln_gamma_re(Dd::ONE, Dd::ONE).mul_f64(2.0);
        let sinh = (Dd::PI.exp() - (-Dd::PI).exp()).mul_f64(0.5);
        assert!((g - (Dd::PI / sinh).ln()).to_f64().abs() < 1e-27);
    }

    #[test]
    fn compensated_dot() {
        let a: Vec<Dd> = (0..37).map(|k| Dd::ONE / Dd::new(k as f64 + 1.0)).collect();
        let b: Vec<Dd> = (0..37).map(|k| Dd::new(k as f64 + 1.0)).collect();
        assert!((dot(&a, &b) - Dd::new(37.0)).to_f64().abs() < 1e-29);
    }

    #[test]
    fn third_times_three_is_one() {
        let third = Dd::ONE / Dd::new(3.0);
        let back = third * Dd::new(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        assert!((third.lo).abs() > 0.0);
    }

    #[test]
    fn sum_recovers_lost_bits() {
        let big = Dd::new(1e16);
        let s = big + Dd::new(1.0) - big;
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn sqrt_two_squared() {
        let r = Dd::new(2.0).sqrt();
        let e = r * r - Dd::new(2.0);
        assert!(e.to_f64().abs() < 1e-30);
    }

    #[test]
    fn complex_division_roundtrip() {
        let a = DdComplex::from_c64(Complex64::new(0.3, -1.7));
        let b = DdComplex::from_c64(Complex64::new(-2.1, 0.4));
        let r = (a / b) * b - a;
        assert!(r.abs_f64() < 1e-30);
    }

    #[test]
    fn div_f64_matches_div() {
        let a = Dd::from_sum(1.0, 1e-20);
        let x = a.div_f64(7.0) - a / Dd::new(7.0);
        assert!(x.to_f64().abs() < 1e-31);
    }
}
