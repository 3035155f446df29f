//! Interval systems and the singular-endpoint quadratures built on them.
//!
//! Every integral in the crate has the form ∫ f(ξ)/|R(ξ)|^{1/2} dξ over a band,
//! a gap, a partial piece of either, or a ray to ±∞, where
//! R(ξ) = Π (ξ − a_j)(ξ − b_j). Pieces between consecutive endpoints use the
//! cosine substitution ξ = c + h·cos θ, which absorbs both inverse square-root
//! endpoint factors; the remaining factors of |R|^{-1/2} are smooth in θ.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Default node count per band or gap.
pub const DEFAULT_ORDER: usize = 256;
/// Relative tolerance (with respect to the span) below which two endpoints coincide.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Validated endpoints a₀ < b₀ < a₁ < … < aₙ < bₙ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSystem {
    endpoints: Vec<f64>,
    n: usize,
    m: Option<usize>,
}

/// Checks ordering, coincidence and that 0 is interior to exactly one band.
pub fn validate_system(raw: &[f64]) -> Result<IntervalSystem> {
    let sys = validate_system_unanchored(raw)?;
    if sys.m.is_none() {
        return Err(Error::ZeroOutsideBands);
    }
    Ok(sys)
}

/// Same checks except that 0 may lie in a gap or outside the hull. Only
/// meaningful for translation-invariant kernels (α = β = 0), where the band
/// containing the origin plays no role.
pub fn validate_system_unanchored(raw: &[f64]) -> Result<IntervalSystem> {
    if raw.len() < 2 || !raw.len().is_multiple_of(2) {
        return Err(Error::OddCount(raw.len()));
    }
    for (i, &e) in raw.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::NonFiniteEndpoint(i));
        }
    }
    for i in 1..raw.len() {
        if raw[i] <= raw[i - 1] {
            return Err(Error::NotSorted(i));
        }
    }
    let span = raw[raw.len() - 1] - raw[0];
    for i in 1..raw.len() {
        if raw[i] - raw[i - 1] < COINCIDENCE_TOL * span {
            return Err(Error::EndpointsCoincide(i - 1, i));
        }
    }
    if let Some(i) = raw.iter().position(|&e| e == 0.0) {
        return Err(Error::ZeroOnBoundary(i));
    }
    let n = raw.len() / 2 - 1;
    let m = (0..=n).find(|&j| raw[2 * j] < 0.0 && 0.0 < raw[2 * j + 1]);
    Ok(IntervalSystem {
        endpoints: raw.to_vec(),
        n,
        m,
    })
}

impl IntervalSystem {
    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// Genus (number of gaps).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Index of the band containing 0, if any.
    pub fn m(&self) -> Option<usize> {
        self.m
    }

    pub fn a(&self, j: usize) -> f64 {
        self.endpoints[2 * j]
    }

    pub fn b(&self, j: usize) -> f64 {
        self.endpoints[2 * j + 1]
    }

    pub fn band(&self, j: usize) -> (f64, f64) {
        (self.a(j), self.b(j))
    }

    pub fn gap(&self, k: usize) -> (f64, f64) {
        (self.b(k), self.a(k + 1))
    }

    pub fn span(&self) -> f64 {
        self.endpoints[2 * self.n + 1] - self.endpoints[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.endpoints.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    /// Σ (a_k + b_k).
    pub fn endpoint_sum(&self) -> f64 {
        self.endpoints.iter().sum()
    }

    /// Band index containing x, if any.
    pub fn band_of(&self, x: f64) -> Option<usize> {
        (0..=self.n).find(|&j| self.a(j) < x && x < self.b(j))
    }

    /// R(z) = Π (z − e).
    pub fn r(&self, z: Complex64) -> Complex64 {
        self.endpoints
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &e| acc * (z - e))
    }

    /// |R(x)|^{1/2} for real x.
    pub fn abs_sqrt_r(&self, x: f64) -> f64 {
        self.endpoints
            .iter()
            .fold(1.0, |acc, &e| acc * (x - e).abs())
            .sqrt()
    }

    /// h(z) = Π(z − a_k) + Π(z − b_k).
    pub fn h(&self, z: f64) -> f64 {
        let pa: f64 = (0..=self.n).map(|k| z - self.a(k)).product();
        let pb: f64 = (0..=self.n).map(|k| z - self.b(k)).product();
        pa + pb
    }

    /// Endpoints multiplied by c > 0.
    pub fn scaled(&self, c: f64) -> Result<IntervalSystem> {
        let raw: Vec<f64> = self.endpoints.iter().map(|e| e * c).collect();
        if self.m.is_some() {
            validate_system(&raw)
        } else {
            validate_system_unanchored(&raw)
        }
    }

    fn check_band(&self, j: usize) -> Result<()> {
        if j > self.n {
            return Err(Error::BadIndex {
                what: "band",
                index: j,
                count: self.n + 1,
            });
        }
        Ok(())
    }

    fn check_gap(&self, k: usize) -> Result<()> {
        if k >= self.n {
            return Err(Error::BadIndex {
                what: "gap",
                index: k,
                count: self.n,
            });
        }
        Ok(())
    }

    /// Product of |ξ − e|^{1/2} over all endpoints except indices `skip_a`, `skip_b`.
    fn other_factor(&self, xi: f64, skip_a: usize, skip_b: usize) -> f64 {
        let mut p = 1.0;
        for (i, &e) in self.endpoints.iter().enumerate() {
            if i != skip_a && i != skip_b {
                p *= (xi - e).abs();
            }
        }
        p.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleKind {
    ChebyshevBand,
    ChebyshevGap,
    Legendre,
    JacobiOrigin,
}

/// Nodes and positive weights on the reference interval [−1, 1].
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
    pub order: usize,
}

impl QuadratureRule {
    /// Nodes and weights mapped affinely onto [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }
}

type RuleCache = Mutex<HashMap<(usize, u64, u64), Arc<QuadratureRule>>>;

fn legendre_cache() -> &'static RuleCache {
    static C: OnceLock<RuleCache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn jacobi_cache() -> &'static RuleCache {
    static C: OnceLock<RuleCache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// P_n(x) and P_n'(x).
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule of the given order on [−1, 1] (cached).
pub fn gauss_legendre(order: usize) -> Arc<QuadratureRule> {
    let key = (order, 0, 0);
    if let Some(r) = legendre_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let rule = Arc::new(QuadratureRule {
        nodes,
        weights,
        kind: RuleKind::Legendre,
        order,
    });
    legendre_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Jacobi polynomial P_n^{(a,b)}(x), P_{n-1}^{(a,b)}(x).
fn jacobi_eval(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (p0, 0.0);
    }
    let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

fn jacobi_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let (pn, pm) = jacobi_eval(n, a, b, x);
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    let d = (nf * ((a - b) - s * x) * pn + 2.0 * (nf + a) * (nf + b) * pm) / (s * (1.0 - x * x));
    (pn, d)
}

/// Gauss–Jacobi rule for the weight (1 − x)^a (1 + x)^b on [−1, 1] (cached).
/// Golub–Welsch for initial nodes, Newton polish, weights from P_n' normalised
/// to the exact zeroth moment.
pub fn gauss_jacobi(order: usize, a: f64, b: f64) -> Arc<QuadratureRule> {
    assert!(a > -1.0 && b > -1.0 && order >= 1);
    if a == 0.0 && b == 0.0 {
        return gauss_legendre(order);
    }
    let key = (order, a.to_bits(), b.to_bits());
    if let Some(r) = jacobi_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let n = order;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        t[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + a + b;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            let off = (num / den).sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut raw_w = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..20 {
            let (p, dp) = jacobi_derivative(n, a, b, *x);
            let dx = p / dp;
            *x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = jacobi_derivative(n, a, b, *x);
        raw_w.push(1.0 / ((1.0 - *x * *x) * dp * dp));
    }
    let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2
        + ln_gamma(Complex64::from(a + 1.0)).re
        + ln_gamma(Complex64::from(b + 1.0)).re
        - ln_gamma(Complex64::from(a + b + 2.0)).re)
        .exp();
    let total: f64 = raw_w.iter().sum();
    let weights = raw_w.iter().map(|w| w * mu0 / total).collect();
    let rule = Arc::new(QuadratureRule {
        nodes,
        weights,
        kind: RuleKind::JacobiOrigin,
        order,
    });
    jacobi_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Gauss rule with double-double nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct DdRule {
    pub nodes: Vec<Dd>,
    pub weights: Vec<Dd>,
}

type DdRuleCache = Mutex<HashMap<(usize, u64), Arc<DdRule>>>;

fn dd_cache() -> &'static DdRuleCache {
    static C: OnceLock<DdRuleCache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// P_n^{(0,b)}(x) and its derivative in double-double; b = 0 is Legendre.
fn jacobi0_eval_dd(n: usize, b: Dd, x: Dd) -> (Dd, Dd) {
    let one = Dd::ONE;
    let two = Dd::new(2.0);
    let mut p0 = one;
    let mut p1 = ((b + two) * x - b).mul_f64(0.5);
    for k in 2..=n {
        let k = Dd::new(k as f64);
        let s = k.mul_f64(2.0) + b;
        let c1 = k.mul_f64(2.0) * (k + b) * (s - two);
        let c2 = (s - one) * (s * (s - two) * x - b * b);
        let c3 = (k - one).mul_f64(2.0) * (k + b - one) * s;
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    let nf = Dd::new(n as f64);
    let s = nf.mul_f64(2.0) + b;
    let omx2 = (one - x) * (one + x);
    let d = (nf * (-b - s * x) * p1 + nf.mul_f64(2.0) * (nf + b) * p0) / (s * omx2);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight (1 + x)^b on [−1, 1] with nodes polished
/// by Newton in double-double; w = 2^{b+1}/((1 − x²)P_n′(x)²). Cached.
pub fn gauss_jacobi0_dd(order: usize, b: f64) -> Arc<DdRule> {
    assert!(b > -1.0 && order >= 1);
    let key = (order, b.to_bits());
    if let Some(r) = dd_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let seed = if b == 0.0 {
        gauss_legendre(order)
    } else {
        gauss_jacobi(order, 0.0, b)
    };
    let bd = Dd::new(b);
    let scale = (Dd::LN_2 * (bd + Dd::ONE)).exp();
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for &x0 in &seed.nodes {
        let mut x = Dd::new(x0);
        for _ in 0..2 {
            let (p, dp) = jacobi0_eval_dd(order, bd, x);
            x -= p / dp;
        }
        let (_, dp) = jacobi0_eval_dd(order, bd, x);
        let omx2 = (Dd::ONE - x) * (Dd::ONE + x);
        nodes.push(x);
        weights.push(scale / (omx2 * dp * dp));
    }
    let rule = Arc::new(DdRule { nodes, weights });
    dd_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Gauss–Legendre rule in double-double.
pub fn gauss_legendre_dd(order: usize) -> Arc<DdRule> {
    gauss_jacobi0_dd(order, 0.0)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and |K15 − G7| on [a, b].
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_X[i]) + f(c + h * GK_X[i]);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of f over [a, b], starting from
/// `panels` equal panels and bisecting any panel whose error estimate exceeds
/// its share of `abs_tol`. Returns (integral, summed error estimate).
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
) -> Result<(f64, f64)> {
    const MAX_DEPTH: u32 = 40;
    if a == b {
        return Ok((0.0, 0.0));
    }
    let panels = panels.max(1);
    let width = (b - a).abs();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut stack: Vec<(f64, f64, u32)> = (0..panels)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / panels as f64;
            let hi = if i + 1 == panels {
                b
            } else {
                a + (b - a) * (i + 1) as f64 / panels as f64
            };
            (lo, hi, 0)
        })
        .collect();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if !v.is_finite() {
            return Err(Error::NonFinite(v));
        }
        let share = abs_tol * (hi - lo).abs() / width;
        if e <= share.max(1e-15 * v.abs()) || (depth >= MAX_DEPTH && e <= 1e-3 * abs_tol) {
            total += v;
            err += e;
        } else if depth >= MAX_DEPTH {
            return Err(Error::QuadratureFailure(format!(
                "no convergence on [{lo}, {hi}] (estimate {e:e})"
            )));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok((total, err))
}

/// Gauss–Chebyshev (first kind) rule: ∫ f(x)/√(1−x²) dx ≈ (π/N) Σ f(cos θ_k).
pub fn gauss_chebyshev(order: usize) -> QuadratureRule {
    let n = order as f64;
    let nodes = (0..order)
        .map(|k| (PI * (k as f64 + 0.5) / n).cos())
        .collect();
    QuadratureRule {
        nodes,
        weights: vec![PI / n; order],
        kind: RuleKind::ChebyshevBand,
        order,
    }
}

/// Weighted nodes (ξ_k, w_k) with ∫ f(ξ)/|R(ξ)|^{1/2} dξ ≈ Σ w_k f(ξ_k) over a piece.
pub type PieceRule = Vec<(f64, f64)>;

fn check_order(order: usize) -> Result<()> {
    if order < 4 {
        Err(Error::OrderTooSmall(order))
    } else {
        Ok(())
    }
}

/// Geometry of the piece between endpoint indices i and i+1.
struct Piece {
    i: usize,
    c: f64,
    h: f64,
}

impl Piece {
    fn new(sys: &IntervalSystem, i: usize) -> Piece {
        let lo = sys.endpoints[i];
        let hi = sys.endpoints[i + 1];
        Piece {
            i,
            c: 0.5 * (lo + hi),
            h: 0.5 * (hi - lo),
        }
    }

    fn xi(&self, theta: f64) -> f64 {
        self.c + self.h * theta.cos()
    }

    /// θ with ξ(θ) = x.
    fn theta_of(&self, x: f64) -> f64 {
        ((x - self.c) / self.h).clamp(-1.0, 1.0).acos()
    }

    /// Integration in θ over [t0, t1] with a given rule in θ.
    fn rule_from_theta<I: Iterator<Item = (f64, f64)>>(
        &self,
        sys: &IntervalSystem,
        it: I,
    ) -> PieceRule {
        it.map(|(t, w)| {
            let xi = self.xi(t);
            (xi, w / sys.other_factor(xi, self.i, self.i + 1))
        })
        .collect()
    }
}

fn chebyshev_piece(sys: &IntervalSystem, i: usize, order: usize) -> PieceRule {
    let p = Piece::new(sys, i);
    let n = order as f64;
    let thetas = (0..order).map(|k| (PI * (k as f64 + 0.5) / n, PI / n));
    p.rule_from_theta(sys, thetas)
}

/// Rule for the whole band j.
pub fn band_rule(sys: &IntervalSystem, j: usize, order: usize) -> Result<PieceRule> {
    sys.check_band(j)?;
    check_order(order)?;
    Ok(chebyshev_piece(sys, 2 * j, order))
}

/// Rule for the whole gap k = (b_k, a_{k+1}).
pub fn gap_rule(sys: &IntervalSystem, k: usize, order: usize) -> Result<PieceRule> {
    sys.check_gap(k)?;
    check_order(order)?;
    Ok(chebyshev_piece(sys, 2 * k + 1, order))
}

/// Rule for ∫ from the left end of piece i (endpoint index i) to x inside the piece.
pub fn partial_piece_rule(
    sys: &IntervalSystem,
    i: usize,
    x: f64,
    order: usize,
) -> Result<PieceRule> {
    check_order(order)?;
    if i + 1 >= sys.endpoints.len() {
        return Err(Error::BadIndex {
            what: "piece",
            index: i,
            count: sys.endpoints.len() - 1,
        });
    }
    let p = Piece::new(sys, i);
    let tx = p.theta_of(x);
    let gl = gauss_legendre(order);
    Ok(p.rule_from_theta(sys, gl.mapped(tx, PI)))
}

/// Rules for band j split at 0: (∫_{a_j}^0, ∫_0^{b_j}). Requires a_j < 0 < b_j.
pub fn split_band_rules(
    sys: &IntervalSystem,
    j: usize,
    order: usize,
) -> Result<(PieceRule, PieceRule)> {
    sys.check_band(j)?;
    check_order(order)?;
    let p = Piece::new(sys, 2 * j);
    let t0 = p.theta_of(0.0);
    let gl = gauss_legendre(order);
    Ok((
        p.rule_from_theta(sys, gl.mapped(t0, PI)),
        p.rule_from_theta(sys, gl.mapped(0.0, t0)),
    ))
}

/// Composite Gauss–Legendre on [s, e] geometrically graded toward s.
fn graded_toward(s: f64, e: f64, per_panel: usize) -> Vec<(f64, f64)> {
    const RATIO: f64 = 0.2;
    let gl = gauss_legendre(per_panel);
    let mut out = Vec::new();
    let mut outer = 1.0_f64;
    loop {
        let inner = if outer < 1e-16 { 0.0 } else { outer * RATIO };
        let (u0, u1) = (s + (e - s) * inner, s + (e - s) * outer);
        let (lo, hi) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
        out.extend(gl.mapped(lo, hi));
        if inner == 0.0 {
            break;
        }
        outer = inner;
    }
    out
}

/// Rules for band j split at 0 with nodes graded toward 0 on both halves, for
/// integrands with a logarithmic singularity at the origin.
pub fn graded_split_band_rules(
    sys: &IntervalSystem,
    j: usize,
    order: usize,
) -> Result<(PieceRule, PieceRule)> {
    sys.check_band(j)?;
    check_order(order)?;
    let p = Piece::new(sys, 2 * j);
    let t0 = p.theta_of(0.0);
    let per = (order / 12).max(12);
    let left = p.rule_from_theta(sys, graded_toward(t0, PI, per).into_iter());
    let right = p.rule_from_theta(sys, graded_toward(t0, 0.0, per).into_iter());
    Ok((left, right))
}

/// Rule for ∫_{b_n}^{x} (x = None means +∞) by the substitution
/// x − b_n = L·tan²φ, which leaves an analytic integrand in φ.
pub fn right_ray_rule(sys: &IntervalSystem, x: Option<f64>, order: usize) -> Result<PieceRule> {
    check_order(order)?;
    let last = sys.endpoints.len() - 1;
    let bn = sys.endpoints[last];
    let l = sys.span();
    let phi_max = match x {
        None => 0.5 * PI,
        Some(x) if x >= bn => ((x - bn) / l).sqrt().atan(),
        Some(_) => return Err(Error::QuadratureFailure("ray point left of b_n".into())),
    };
    let gl = gauss_legendre(order);
    Ok(gl
        .mapped(0.0, phi_max)
        .map(|(phi, w)| {
            let c = phi.cos();
            let t = phi.tan();
            let xi = bn + l * t * t;
            let other = sys.other_factor(xi, last, usize::MAX);
            (xi, w * 2.0 * l.sqrt() / (c * c) / other)
        })
        .collect())
}

/// Rule for ∫_{x}^{a_0} (x = None means −∞).
pub fn left_ray_rule(sys: &IntervalSystem, x: Option<f64>, order: usize) -> Result<PieceRule> {
    check_order(order)?;
    let a0 = sys.endpoints[0];
    let l = sys.span();
    let phi_max = match x {
        None => 0.5 * PI,
        Some(x) if x <= a0 => ((a0 - x) / l).sqrt().atan(),
        Some(_) => return Err(Error::QuadratureFailure("ray point right of a_0".into())),
    };
    let gl = gauss_legendre(order);
    Ok(gl
        .mapped(0.0, phi_max)
        .map(|(phi, w)| {
            let c = phi.cos();
            let t = phi.tan();
            let xi = a0 - l * t * t;
            let other = sys.other_factor(xi, 0, usize::MAX);
            (xi, w * 2.0 * l.sqrt() / (c * c) / other)
        })
        .collect())
}

/// Σ w_k f(ξ_k), with a finiteness check.
pub fn apply_rule<F: Fn(f64) -> f64>(rule: &PieceRule, f: F) -> Result<f64> {
    let mut s = 0.0;
    for &(xi, w) in rule {
        let v = f(xi);
        if !v.is_finite() {
            return Err(Error::NonFinite(xi));
        }
        s += w * v;
    }
    Ok(s)
}

/// ∫_{a_j}^{b_j} f(ξ)/|R(ξ)|^{1/2} dξ.
pub fn band_integral<F: Fn(f64) -> f64>(
    sys: &IntervalSystem,
    j: usize,
    f: F,
    order: usize,
) -> Result<f64> {
    apply_rule(&band_rule(sys, j, order)?, f)
}

/// ∫_{b_k}^{a_{k+1}} f(ξ)/|R(ξ)|^{1/2} dξ.
pub fn gap_integral<F: Fn(f64) -> f64>(
    sys: &IntervalSystem,
    k: usize,
    f: F,
    order: usize,
) -> Result<f64> {
    apply_rule(&gap_rule(sys, k, order)?, f)
}

/// ∫_{a_j}^{b_j} ξ^l log|ξ| / |R(ξ)|^{1/2} dξ, split and graded at 0 when the
/// band contains the origin.
pub fn log_band_integral(sys: &IntervalSystem, j: usize, l: u32, order: usize) -> Result<f64> {
    let f = |x: f64| {
        if x == 0.0 {
            0.0
        } else {
            x.powi(l as i32) * x.abs().ln()
        }
    };
    let (a, b) = {
        sys.check_band(j)?;
        sys.band(j)
    };
    if a < 0.0 && 0.0 < b {
        let (left, right) = graded_split_band_rules(sys, j, order)?;
        Ok(apply_rule(&left, f)? + apply_rule(&right, f)?)
    } else {
        band_integral(sys, j, f, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_examples() {
        let s = validate_system(&[-1.0, 1.0]).unwrap();
        assert_eq!((s.n(), s.m()), (0, Some(0)));
        let s = validate_system(&[-2.0, -1.0, -0.5, 1.5]).unwrap();
        assert_eq!((s.n(), s.m()), (1, Some(1)));
        assert_eq!(
            validate_system(&[-1.0, -0.5, 0.5, 1.0]),
            Err(Error::ZeroOutsideBands)
        );
        assert_eq!(validate_system(&[-1.0, 1.0, 2.0]), Err(Error::OddCount(3)));
        assert_eq!(
            validate_system(&[-1.0, 0.0, 1.0, 2.0]),
            Err(Error::ZeroOnBoundary(1))
        );
        assert_eq!(
            validate_system(&[-1.0, 2.0, 1.0, 3.0]),
            Err(Error::NotSorted(2))
        );
        assert!(matches!(
            validate_system(&[-1.0, 1.0, 1.0 + 1e-14, 3.0]),
            Err(Error::EndpointsCoincide(1, 2))
        ));
        assert!(validate_system_unanchored(&[-1.0, -0.5, 0.5, 1.0])
            .unwrap()
            .m()
            .is_none());
    }

    #[test]
    fn legendre_rule_exactness() {
        let r = gauss_legendre(20);
        for k in 0..40u32 {
            let s: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((s - exact).abs() < 1e-14, "k={k}: {s}");
        }
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn jacobi_rule_moments() {
        let (a, b) = (0.0, 1.4);
        let r = gauss_jacobi(24, a, b);
        // ∫ (1+x)^b x^0 and ∫ (1+x)^b (1+x) against closed forms
        let m0 = 2f64.powf(b + 1.0) / (b + 1.0);
        let m1 = 2f64.powf(b + 2.0) / (b + 2.0);
        let s0: f64 = r.weights.iter().sum();
        let s1: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * (1.0 + x))
            .sum();
        assert!((s0 - m0).abs() < 1e-13 * m0);
        assert!((s1 - m1).abs() < 1e-13 * m1, "{s1} vs {m1}");
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn band_examples() {
        let s = validate_system(&[-1.0, 1.0]).unwrap();
        assert!((band_integral(&s, 0, |_| 1.0, 64).unwrap() - PI).abs() < 1e-14);
        assert!((band_integral(&s, 0, |x| x * x, 64).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(band_integral(&s, 0, |_| 1.0, 3).is_err());
        assert!(matches!(
            band_integral(&s, 0, |_| f64::NAN, 8),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn log_band_examples() {
        let s = validate_system(&[-1.0, 1.0]).unwrap();
        assert!(log_band_integral(&s, 0, 1, 256).unwrap().abs() < 1e-13);
        let v = log_band_integral(&s, 0, 0, 256).unwrap();
        assert!((v + PI * 2f64.ln()).abs() < 1e-12, "{v}");
        let s2 = validate_system_unanchored(&[-2.0, -1.0, 1.0, 2.0]).unwrap();
        let a = log_band_integral(&s2, 0, 0, 256).unwrap();
        let b = band_integral(&s2, 0, |x| x.abs().ln(), 256).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gap_symmetric_odd_vanishes() {
        let s = validate_system_unanchored(&[-2.0, -1.0, 1.0, 2.0]).unwrap();
        assert!(gap_integral(&s, 0, |x| x, 256).unwrap().abs() < 1e-14);
        let g1 = gap_integral(&s, 0, |_| 1.0, 256).unwrap();
        let g2 = gap_integral(&s, 0, |_| 1.0, 512).unwrap();
        assert!(g1 > 0.0 && (g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn ray_matches_reflected_gap() {
        // For (−2,−1,1,2), ∫_2^∞ dx/|R|^{1/2} equals ∫_0^1 dx/|R|^{1/2} (x ↦ 2/x).
        let s = validate_system_unanchored(&[-2.0, -1.0, 1.0, 2.0]).unwrap();
        let ray = apply_rule(&right_ray_rule(&s, None, 256).unwrap(), |_| 1.0).unwrap();
        let half_gap = 0.5 * gap_integral(&s, 0, |_| 1.0, 256).unwrap();
        assert!((ray - half_gap).abs() < 1e-13, "{ray} vs {half_gap}");
        let left = apply_rule(&left_ray_rule(&s, None, 256).unwrap(), |_| 1.0).unwrap();
        assert!((left - ray).abs() < 1e-13);
    }

    #[test]
    fn partial_pieces_add_up() {
        let s = validate_system_unanchored(&[-2.0, -1.0, 1.0, 3.0]).unwrap();
        let whole = gap_integral(&s, 0, |x| 1.0 + x, 256).unwrap();
        let p = apply_rule(&partial_piece_rule(&s, 1, 0.3, 256).unwrap(), |x| 1.0 + x).unwrap();
        let q = apply_rule(&partial_piece_rule(&s, 1, 1.0, 256).unwrap(), |x| 1.0 + x).unwrap();
        assert!((q - whole).abs() < 1e-12);
        assert!(p > 0.0 && p < whole);
    }

    #[test]
    fn dd_rules_moments() {
        let r = gauss_legendre_dd(40);
        let tot = r.weights.iter().fold(Dd::ZERO, |a, &w| a + w);
        let m10 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .fold(Dd::ZERO, |a, (&x, &w)| {
                let x2 = x.sqr();
                a + w * x2 * x2 * x2 * x2 * x2
            });
        assert!((tot - Dd::new(2.0)).abs().to_f64() < 1e-28);
        assert!((m10 - Dd::new(2.0) / Dd::new(11.0)).abs().to_f64() < 1e-28);

        let b = Dd::new(0.6);
        let r = gauss_jacobi0_dd(40, 0.6);
        let pw = |e: Dd| (Dd::LN_2 * e).exp() / e;
        let tot = r.weights.iter().fold(Dd::ZERO, |a, &w| a + w);
        let m1 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .fold(Dd::ZERO, |a, (&x, &w)| a + w * x);
        assert!((tot - pw(b + Dd::ONE)).abs().to_f64() < 1e-27);
        let exact = pw(b + Dd::new(2.0)) - pw(b + Dd::ONE);
        assert!((m1 - exact).abs().to_f64() < 1e-27);
    }

    #[test]
    fn adaptive_gk_oscillatory() {
        let (v, e) = adaptive_gk(|t| (3.0 * t).cos() / t, 1.0, 40.0, 4, 1e-12).unwrap();
        // Ci(120) − Ci(3)
        let exact = -0.114_848_547_737_065_68;
        assert!((v - exact).abs() < 1e-11 && e < 1e-11, "{v} {e}");
        let (v, _) = adaptive_gk(|t| t.sqrt(), 0.0, 1.0, 1, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }
}
