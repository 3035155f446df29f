//! Terms of the large-s expansion of log det(1 − K)|_{sΣ}: γ₀, the linear
//! flow V(s) on the torus, the endpoint function L(p, μ), its averages L̂_p,
//! a heuristic flow classification, and the term-by-term evaluator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{
    adaptive_gk, gauss_legendre, validate_system, validate_system_unanchored, IntervalSystem,
};
use crate::surface::{Side, SurfaceData};
use crate::szego::{KernelParams, SzegoConstants};
use crate::theta::ThetaContext;

/// Default lower limit ŝ of the t-integral.
pub const DEFAULT_S_HAT: f64 = 1.0;
/// Default horizon of the time average, in units of 1/Ω₁.
pub const DEFAULT_HORIZON: f64 = 1e4;
/// Default coefficient bound of the integer-relation search.
pub const DEFAULT_COEFF_BOUND: i64 = 200;
/// Default threshold below which |cᵀΩ| counts as an integer relation.
pub const DEFAULT_RELATION_TOL: f64 = 1e-9;
/// Absolute tolerance of the general-mode t-integral.
const T_INTEGRAL_TOL: f64 = 1e-9;
/// Largest lattice of the space average.
const SPACE_MAX_POINTS: usize = 1 << 22;

/// γ₀ = −(1/πi)Σ_j ∫_{a_j}^{b_j} z·p(z)/√R₊ dz = (1/π)Σ_j (−1)^{n−j}∫ z·p(z)/|R|^{1/2}.
pub fn gamma0(sd: &SurfaceData) -> f64 {
    let n = sd.n();
    let mut g = 0.0;
    for j in 0..=n {
        let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let band: f64 = sd
            .p_coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * sd.band_moment(j, l + 1))
            .sum();
        g += sign * band;
    }
    g / PI
}

/// The linear flow V_j(s) = sΩ_j/2π + Im ζ_j/2π.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSpec {
    pub omega: Vec<f64>,
    /// Im ζ_j/2π.
    pub phase: Vec<f64>,
    pub s_hat: f64,
}

impl FlowSpec {
    pub fn new(omega: Vec<f64>, phase: Vec<f64>, s_hat: f64) -> Result<FlowSpec> {
        if omega.len() != phase.len() {
            return Err(Error::BadIndex {
                what: "phase",
                index: phase.len(),
                count: omega.len(),
            });
        }
        if let Some((j, &w)) = omega.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::NonPositiveFrequency(j, w));
        }
        if !(s_hat > 0.0) || !s_hat.is_finite() {
            return Err(Error::NonFinite(s_hat));
        }
        Ok(FlowSpec {
            omega,
            phase,
            s_hat,
        })
    }

    pub fn from_data(sd: &SurfaceData, sz: &SzegoConstants, s_hat: f64) -> Result<FlowSpec> {
        let phase = sz.zeta.iter().map(|z| z.im / (2.0 * PI)).collect();
        FlowSpec::new(sd.omega_big.clone(), phase, s_hat)
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// V(s).
    pub fn v_of_s(&self, s: f64) -> Vec<f64> {
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(w, p)| s * w / (2.0 * PI) + p)
            .collect()
    }

    /// Width of one period of the fastest component (the whole line when n = 0).
    pub fn oscillation_scale(&self) -> Option<f64> {
        self.omega
            .iter()
            .cloned()
            .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))))
            .map(|w| 2.0 * PI / w)
    }
}

/// Per-endpoint constants of L(p, μ) = h(p)/p(p)·η(p, μ).
#[derive(Debug, Clone)]
struct EndpointTerm {
    p: f64,
    h_over_p: f64,
    /// A(p) + d.
    shift: Vec<Complex64>,
    /// θ(0)²/θ(A(p)+d)².
    prefactor: Complex64,
}

/// L(p, μ) at every endpoint of Σ.
#[derive(Debug, Clone)]
pub struct LFunction {
    terms: Vec<EndpointTerm>,
    n: usize,
}

impl LFunction {
    pub fn new(sd: &SurfaceData, ctx: &ThetaContext) -> Result<LFunction> {
        let n = sd.n();
        let e = sd.sys.endpoints();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let theta0 = ctx.theta(&zero);
        let mut terms = Vec::with_capacity(e.len());
        for (i, &p) in e.iter().enumerate() {
            let a = sd.abel_endpoint_closed_form(i, Side::Above);
            let shift: Vec<Complex64> = a.iter().zip(&sd.d_vec).map(|(x, y)| x + y).collect();
            let th = ctx.theta(&shift);
            if th.norm() < 1e-14 * theta0.norm() {
                return Err(Error::ThetaZeroInDenominator);
            }
            terms.push(EndpointTerm {
                p,
                h_over_p: sd.sys.h(p) / sd.p(p),
                shift,
                prefactor: theta0 * theta0 / (th * th),
            });
        }
        Ok(LFunction { terms, n })
    }

    /// Number of endpoints.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn endpoint(&self, i: usize) -> f64 {
        self.terms[i].p
    }

    pub fn h_over_p(&self, i: usize) -> f64 {
        self.terms[i].h_over_p
    }

    /// η(p_i, μ).
    pub fn eta(&self, ctx: &ThetaContext, i: usize, mu: &[f64]) -> Complex64 {
        let t = &self.terms[i];
        if self.n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let plus: Vec<Complex64> = t.shift.iter().zip(mu).map(|(s, m)| s + m).collect();
        let minus: Vec<Complex64> = t.shift.iter().zip(mu).map(|(s, m)| s - m).collect();
        let tm = ctx.theta_real(mu);
        t.prefactor * ctx.theta(&plus) * ctx.theta(&minus) / (tm * tm)
    }

    /// L(p_i, μ) as a complex number; its imaginary part is a residue.
    pub fn eval_complex(&self, ctx: &ThetaContext, i: usize, mu: &[f64]) -> Complex64 {
        self.terms[i].h_over_p * self.eta(ctx, i, mu)
    }

    /// Re L(p_i, μ).
    pub fn eval(&self, ctx: &ThetaContext, i: usize, mu: &[f64]) -> f64 {
        self.eval_complex(ctx, i, mu).re
    }

    /// Σ_p L(p, μ).
    pub fn sum(&self, ctx: &ThetaContext, mu: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.eval(ctx, i, mu)).sum()
    }
}

/// L(p, μ) at the endpoint with index `i` (0-based into a₀, b₀, a₁, …).
pub fn l_function(sd: &SurfaceData, ctx: &ThetaContext, i: usize, mu: &[f64]) -> Result<f64> {
    let count = sd.sys.endpoints().len();
    if i >= count {
        return Err(Error::BadIndex {
            what: "endpoint",
            index: i,
            count,
        });
    }
    Ok(LFunction::new(sd, ctx)?.eval(ctx, i, mu))
}

/// An average with the change observed when its resolution is halved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Average {
    pub value: f64,
    pub change: f64,
}

impl Average {
    /// The value if `change ≤ tol`, otherwise [`Error::NonConvergent`].
    pub fn require(self, tol: f64) -> Result<f64> {
        if self.change <= tol {
            Ok(self.value)
        } else {
            Err(Error::NonConvergent {
                estimate: self.value,
                change: self.change,
            })
        }
    }
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

/// Bump-weighted mean of y over [0, T]: ∫w(t/T)y(t)dt / ∫w(t/T)dt with a
/// C^∞ window. For a quasi-periodic y the window removes the O(1/T) boundary
/// error of the plain mean.
fn windowed_mean<F: Fn(f64) -> f64 + Sync + Send>(y: &F, horizon: f64, panel: f64) -> f64 {
    let rule = gauss_legendre(16);
    let panels = (horizon / panel).ceil().max(8.0) as usize;
    let h = horizon / panels as f64;
    let parts: Vec<(f64, f64)> = par::map_range(panels, |k| {
        let lo = k as f64 * h;
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, w) in rule.mapped(lo, lo + h) {
            let b = w * bump(t / horizon);
            if b != 0.0 {
                num += b * y(t);
                den += b;
            }
        }
        (num, den)
    });
    let (num, den) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    num / den
}

/// L̂_p = lim (1/T)∫₀ᵀ L(p, V(t))dt, estimated by a windowed mean over
/// [0, T]; the change is the difference to the estimate over [0, T/2].
pub fn l_hat_time_average(
    lf: &LFunction,
    ctx: &ThetaContext,
    flow: &FlowSpec,
    i: usize,
    horizon: f64,
) -> Average {
    let Some(panel) = flow.oscillation_scale() else {
        let v = lf.eval(ctx, i, &[]);
        return Average {
            value: v,
            change: 0.0,
        };
    };
    let y = |t: f64| lf.eval(ctx, i, &flow.v_of_s(t));
    let panel = 0.5 * panel;
    let full = windowed_mean(&y, horizon, panel);
    let half = windowed_mean(&y, 0.5 * horizon, panel);
    Average {
        value: full,
        change: (full - half).abs(),
    }
}

/// h(p)/p(p)·∫_{[0,1)ⁿ} η(p; u)du by the tensor-product trapezoid rule, which
/// is spectrally accurate for the smooth periodic integrand. The lattice is
/// doubled until two successive values agree to 1e−13 or the point budget is
/// spent; the change is the last difference.
pub fn l_hat_space_integral(lf: &LFunction, ctx: &ThetaContext, i: usize) -> Average {
    let n = lf.n;
    if n == 0 {
        return Average {
            value: lf.eval(ctx, i, &[]),
            change: 0.0,
        };
    }
    let mean = |m: usize| -> f64 {
        let total = m.pow(n as u32);
        let vals = par::map_range(total, |mut k| {
            let mut mu = vec![0.0; n];
            for x in mu.iter_mut() {
                *x = (k % m) as f64 / m as f64;
                k /= m;
            }
            lf.eta(ctx, i, &mu).re
        });
        vals.iter().sum::<f64>() / total as f64
    };
    let mut m = 8;
    let mut prev = mean(m);
    let mut change = f64::INFINITY;
    while (2 * m).pow(n as u32) <= SPACE_MAX_POINTS {
        m *= 2;
        let cur = mean(m);
        change = (cur - prev).abs();
        prev = cur;
        if change < 1e-13 {
            break;
        }
    }
    let hp = lf.h_over_p(i);
    Average {
        value: hp * prev,
        change: hp.abs() * change,
    }
}

/// Outcome of the integer-relation search on Ω.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowClassification {
    /// No c ≠ 0 with ‖c‖∞ ≤ bound and |cᵀΩ| < tol was found.
    pub rationally_independent: bool,
    /// The c minimising |cᵀΩ| and that minimum.
    pub best_c: Vec<i64>,
    pub best_abs: f64,
    /// min |cᵀΩ|·‖c‖₂^{δ₂} over the searched c, with δ₂ = n.
    pub diophantine_profile: f64,
    pub delta2: f64,
    pub coeff_bound: i64,
    pub tol: f64,
    /// Always true: a finite search is evidence, not a decision.
    pub heuristic: bool,
}

/// Searches c ∈ Zⁿ∖{0}, ‖c‖∞ ≤ `coeff_bound`, for small |cᵀΩ|. For each
/// choice of c₁..c_{n−1} only the c_n nearest −Σc_iΩ_i/Ω_n and its two
/// neighbours are examined; no other c_n can give a smaller |cᵀΩ|.
pub fn classify_flow(omega: &[f64], coeff_bound: i64, tol: f64) -> FlowClassification {
    let n = omega.len();
    let delta2 = n as f64;
    let mut best = FlowClassification {
        rationally_independent: true,
        best_c: vec![],
        best_abs: f64::INFINITY,
        diophantine_profile: f64::INFINITY,
        delta2,
        coeff_bound,
        tol,
        heuristic: true,
    };
    if n == 0 {
        return best;
    }
    let b = coeff_bound.max(1);
    let side = (2 * b + 1) as usize;
    let heads = side.pow(n as u32 - 1);
    let wn = omega[n - 1];
    let mut c = vec![0i64; n];
    for k in 0..heads {
        let mut r = k;
        let mut partial = 0.0;
        for j in 0..n - 1 {
            c[j] = (r % side) as i64 - b;
            r /= side;
            partial += c[j] as f64 * omega[j];
        }
        let centre = (-partial / wn).round() as i64;
        for cn in [centre - 1, centre, centre + 1] {
            if cn.abs() > b {
                continue;
            }
            c[n - 1] = cn;
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            // count c and −c once
            let lead = c.iter().find(|&&x| x != 0).copied().unwrap_or(0);
            if lead < 0 {
                continue;
            }
            let v = (partial + cn as f64 * wn).abs();
            let norm = c.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            if v < best.best_abs {
                best.best_abs = v;
                best.best_c = c.clone();
            }
            best.diophantine_profile = best.diophantine_profile.min(v * norm.powf(delta2));
        }
    }
    best.rationally_independent = !(best.best_abs < tol);
    best
}

/// How the L-term of the expansion is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// −(1/16)Σ_p ∫_ŝ^s L(p, V(t))dt/t.
    General,
    /// −(1/16)ΣL̂_p·log s with L̂_p from the time average.
    Diophantine,
    /// −(1/16)ΣL̂_p·log s with L̂_p from the space integral.
    Ergodic,
    /// −½·log s (genus 1).
    N1,
    /// n1 for genus 1, ergodic when no integer relation is found, else general.
    Auto,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Mode, String> {
        match s {
            "general" => Ok(Mode::General),
            "diophantine" => Ok(Mode::Diophantine),
            "ergodic" => Ok(Mode::Ergodic),
            "n1" => Ok(Mode::N1),
            "auto" => Ok(Mode::Auto),
            _ => Err(format!("unknown mode '{s}'")),
        }
    }
}

/// Knobs of [`Model::build`] and the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub quad_order: usize,
    pub theta_tol: f64,
    pub s_hat: f64,
    /// Time-average horizon in units of 1/Ω₁.
    pub horizon: f64,
    pub coeff_bound: i64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            quad_order: crate::quadrature::DEFAULT_ORDER,
            theta_tol: crate::theta::DEFAULT_TOL,
            s_hat: DEFAULT_S_HAT,
            horizon: DEFAULT_HORIZON,
            coeff_bound: DEFAULT_COEFF_BOUND,
        }
    }
}

/// Every quantity the expansion needs, built once per (Σ, α, β).
#[derive(Debug, Clone)]
pub struct Model {
    pub sys: IntervalSystem,
    pub kp: KernelParams,
    pub surface: SurfaceData,
    pub szego: SzegoConstants,
    pub theta: ThetaContext,
    pub flow: FlowSpec,
    pub gamma0: f64,
    pub lfun: LFunction,
    pub options: ModelOptions,
}

impl Model {
    /// Validates the endpoints (0 must lie in a band unless α = β = 0) and
    /// builds the surface, Szegő constants, θ context and L.
    pub fn build(endpoints: &[f64], kp: KernelParams, options: ModelOptions) -> Result<Model> {
        let sys = if kp.is_trivial() {
            validate_system_unanchored(endpoints)?
        } else {
            validate_system(endpoints)?
        };
        let surface = SurfaceData::build(&sys, options.quad_order)?;
        let szego = SzegoConstants::compute(&surface, &kp)?;
        let theta = ThetaContext::new(&surface.tau, options.theta_tol)?;
        let flow = FlowSpec::from_data(&surface, &szego, options.s_hat)?;
        let lfun = LFunction::new(&surface, &theta)?;
        let gamma0 = gamma0(&surface);
        Ok(Model {
            sys,
            kp,
            surface,
            szego,
            theta,
            flow,
            gamma0,
            lfun,
            options,
        })
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// log θ(V(s)); θ is real and positive at real arguments when τ is
    /// purely imaginary, so the real part is taken.
    pub fn log_theta(&self, s: f64) -> Result<f64> {
        let v = self.theta.theta_real(&self.flow.v_of_s(s));
        if !(v.re > 0.0) {
            return Err(Error::ThetaZeroInDenominator);
        }
        Ok(v.re.ln())
    }

    /// Σ_p L(p, V(t)).
    pub fn l_sum(&self, t: f64) -> f64 {
        self.lfun.sum(&self.theta, &self.flow.v_of_s(t))
    }

    /// L̂_p for every endpoint, by time average or space integral.
    pub fn l_hats(&self, space: bool) -> Vec<Average> {
        (0..self.lfun.len())
            .map(|i| {
                if space {
                    l_hat_space_integral(&self.lfun, &self.theta, i)
                } else {
                    let horizon = self
                        .flow
                        .omega
                        .first()
                        .map_or(1.0, |w| self.options.horizon / w);
                    l_hat_time_average(&self.lfun, &self.theta, &self.flow, i, horizon)
                }
            })
            .collect()
    }

    /// ∫_{lo}^{hi} Σ_p L(p, V(t))dt/t by adaptive Gauss–Kronrod panels whose
    /// initial width is the fastest oscillation period.
    pub fn l_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let width = self.flow.oscillation_scale().unwrap_or(f64::INFINITY);
        let panels = ((hi - lo).abs() / width).ceil().clamp(1.0, 1e7) as usize;
        adaptive_gk(|t| self.l_sum(t) / t, lo, hi, panels, T_INTEGRAL_TOL)
            .map(|(v, _)| v)
            .map_err(|e| Error::IntegralNonConvergent(e.to_string()))
    }

    /// Resolves [`Mode::Auto`] and checks that n1 is only used at genus 1.
    pub fn resolve_mode(&self, mode: Mode) -> Result<(Mode, Option<FlowClassification>)> {
        let n = self.n();
        let class = if n >= 2 {
            Some(classify_flow(
                &self.flow.omega,
                self.options.coeff_bound,
                DEFAULT_RELATION_TOL,
            ))
        } else {
            None
        };
        let resolved = match mode {
            Mode::N1 if n != 1 => return Err(Error::ModeRequiresGenusOne(n)),
            Mode::Auto if n == 1 => Mode::N1,
            Mode::Auto if class.as_ref().is_none_or(|c| c.rationally_independent) => Mode::Ergodic,
            Mode::Auto => Mode::General,
            m => m,
        };
        Ok((resolved, class))
    }

    /// Term-by-term right-hand side of the expansion on `s_grid`, without
    /// the undetermined additive constant.
    pub fn expansion(&self, s_grid: &[f64], mode: Mode) -> Result<ExpansionReport> {
        let (mode, classification) = self.resolve_mode(mode)?;
        for &s in s_grid {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonFinite(s));
            }
        }
        let beta_sq = self.kp.beta_sq();
        let alpha_sq = self.kp.alpha * self.kp.alpha;
        let (l_hats, l_coeff) = match mode {
            Mode::Diophantine | Mode::Ergodic => {
                let l = self.l_hats(mode == Mode::Ergodic);
                let c = -l.iter().map(|a| a.value).sum::<f64>() / 16.0;
                (Some(l), Some(c))
            }
            Mode::N1 => (None, Some(-0.5)),
            _ => (None, None),
        };
        let l_terms: Vec<f64> = match l_coeff {
            Some(c) => s_grid.iter().map(|s| c * s.ln()).collect(),
            None => self.cumulative_l_term(s_grid)?,
        };
        let d1 = self.szego.d_infty_1.im;
        let rows = s_grid
            .iter()
            .zip(&l_terms)
            .map(|(&s, &l_term)| {
                let quadratic = -self.gamma0 * s * s;
                let linear = 2.0 * d1 * s;
                let theta = self.log_theta(s)?;
                let log_term = (beta_sq - alpha_sq) * s.ln();
                Ok(ExpansionRow {
                    s,
                    quadratic,
                    linear,
                    theta,
                    log_term,
                    l_term,
                    total: quadratic + linear + theta + log_term + l_term,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpansionReport {
            mode,
            rows,
            log_coefficient: l_coeff.map(|c| beta_sq - alpha_sq + c),
            l_hats,
            classification,
            s_hat: self.flow.s_hat,
            gamma0: self.gamma0,
            d_infty_1_im: d1,
        })
    }

    /// −(1/16)∫_ŝ^s Σ_p L(p, V(t))dt/t at every s, integrating between
    /// consecutive sorted grid points.
    fn cumulative_l_term(&self, s_grid: &[f64]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..s_grid.len()).collect();
        order.sort_by(|&a, &b| s_grid[a].total_cmp(&s_grid[b]));
        let s_hat = self.flow.s_hat;
        let mut knots = vec![s_hat];
        knots.extend(order.iter().map(|&i| s_grid[i]));
        let segs =
            par::try_map_range(knots.len() - 1, |k| self.l_integral(knots[k], knots[k + 1]))?;
        let mut out = vec![0.0; s_grid.len()];
        let mut acc = 0.0;
        for (k, &i) in order.iter().enumerate() {
            acc += segs[k];
            out[i] = -acc / 16.0;
        }
        Ok(out)
    }
}

/// One row of the expansion; `total` omits the undetermined constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub s: f64,
    /// −γ₀s².
    pub quadratic: f64,
    /// −2iD_{∞,1}s = 2·Im(D_{∞,1})·s.
    pub linear: f64,
    /// log θ(V(s)).
    pub theta: f64,
    /// (β² − α²)·log s.
    pub log_term: f64,
    /// Mode-dependent L contribution.
    pub l_term: f64,
    pub total: f64,
}

/// Term-by-term expansion on an s-grid. The additive constant is not known
/// in closed form and is never included.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub mode: Mode,
    pub rows: Vec<ExpansionRow>,
    /// Total coefficient of log s, except in general mode.
    pub log_coefficient: Option<f64>,
    pub l_hats: Option<Vec<Average>>,
    pub classification: Option<FlowClassification>,
    pub s_hat: f64,
    pub gamma0: f64,
    pub d_infty_1_im: f64,
}

/// Trend and spread of a residual sequence d(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flatness {
    pub mean: f64,
    /// |least-squares slope|·(s_max − s_min).
    pub drift: f64,
    /// Population standard deviation of d about its mean.
    pub std: f64,
}

/// [`Flatness`] of d over s (at least two points).
pub fn flatness(s: &[f64], d: &[f64]) -> Flatness {
    let k = s.len().min(d.len()) as f64;
    let ms = s.iter().sum::<f64>() / k;
    let md = d.iter().sum::<f64>() / k;
    let sxx: f64 = s.iter().map(|x| (x - ms) * (x - ms)).sum();
    let sxy: f64 = s.iter().zip(d).map(|(x, y)| (x - ms) * (y - md)).sum();
    let var = d.iter().map(|y| (y - md) * (y - md)).sum::<f64>() / k;
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Flatness {
        mean: md,
        drift: slope.abs() * (hi - lo),
        std: var.sqrt(),
    }
}

/// Both sides of the mean-value decomposition
/// ∫_ŝ^s Y/t dt = (1/s)∫_ŝ^s Y + ∫_ŝ^s (1/t)((1/t)∫_ŝ^t Y − Ŷ)dt + Ŷ·log(s/ŝ),
/// each side evaluated by composite Gauss–Legendre with `panels` panels; the
/// inner integral is accumulated panel by panel.
pub fn mean_value_identity<F: Fn(f64) -> f64>(
    y: F,
    s_hat: f64,
    s: f64,
    y_hat: f64,
    panels: usize,
) -> (f64, f64) {
    let rule = gauss_legendre(20);
    let h = (s - s_hat) / panels as f64;
    let mut lhs = 0.0;
    let mut whole = 0.0;
    let mut nested = 0.0;
    let mut before = 0.0;
    for k in 0..panels {
        let lo = s_hat + k as f64 * h;
        let hi = lo + h;
        let mut panel = 0.0;
        for (t, w) in rule.mapped(lo, hi) {
            let yt = y(t);
            lhs += w * yt / t;
            panel += w * yt;
            let partial: f64 = rule.mapped(lo, t).map(|(u, v)| v * y(u)).sum();
            nested += w * ((before + partial) / t - y_hat) / t;
        }
        before += panel;
        whole += panel;
    }
    let rhs = whole / s + nested + y_hat * (s / s_hat).ln();
    (lhs, rhs)
}

/// Genus-1 identities at endpoint i, each as (lhs, rhs):
/// (a) θ(0)²/θ₁′(0)²·θ₁(A(p)+d)²/θ(A(p)+d)²·h(p) = 4/a₁,₀²;
/// (b) −4θ″(0)/(a₁,₀²θ(0)) = 2p(p) − h(p).
pub fn elliptic_identities(
    sd: &SurfaceData,
    ctx: &ThetaContext,
    i: usize,
) -> Result<[(Complex64, Complex64); 2]> {
    if sd.n() != 1 {
        return Err(Error::WrongGenus(sd.n()));
    }
    let p = sd.sys.endpoints()[i];
    let a10 = sd.big_a[(1, 0)];
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let derivs = ctx.eval_with_derivs(&[zero], Some(&[one]));
    let (th0, th0pp) = (derivs[0], derivs[2]);
    let t1p = ctx.theta1_prime(zero)?;
    let w = sd.abel_endpoint_closed_form(i, Side::Above)[0] + sd.d_vec[0];
    let t1 = ctx.theta1(w)?;
    let tw = ctx.theta(&[w]);
    let h = sd.sys.h(p);
    let lhs_a = th0 * th0 / (t1p * t1p) * t1 * t1 / (tw * tw) * h;
    let rhs_a = 4.0 / (a10 * a10);
    let lhs_b = -4.0 * th0pp / (a10 * a10 * th0);
    let rhs_b = Complex64::new(2.0 * sd.p(p) - h, 0.0);
    Ok([(lhs_a, rhs_a), (lhs_b, rhs_b)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(e: &[f64], al: f64, b: f64) -> Model {
        Model::build(
            e,
            KernelParams::new(al, b).unwrap(),
            ModelOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn unit_interval_reduces_to_single_interval_terms() {
        let m = model(&[-1.0, 1.0], 0.3, 0.5);
        assert!((m.gamma0 - 0.5).abs() < 1e-12);
        let r = m.expansion(&[2.0, 5.0], Mode::General).unwrap();
        for row in &r.rows {
            assert!((row.linear - 0.6 * row.s).abs() < 1e-10);
            assert_eq!(row.theta, 0.0);
            assert!((row.log_term + row.l_term - (-0.25 - 0.09 - 0.25) * row.s.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn flow_is_linear() {
        let f = FlowSpec::new(vec![1.3, 2.9], vec![0.1, -0.2], 1.0).unwrap();
        assert_eq!(f.v_of_s(0.0), vec![0.1, -0.2]);
        let d = f.v_of_s(7.0 + 2.0 * PI / 1.3)[0] - f.v_of_s(7.0)[0];
        assert!((d - 1.0).abs() < 1e-14);
        assert!(FlowSpec::new(vec![], vec![], 1.0)
            .unwrap()
            .v_of_s(3.0)
            .is_empty());
    }

    #[test]
    fn classification_examples() {
        let c = classify_flow(&[1.0, 2.0], 10, 1e-9);
        assert!(!c.rationally_independent);
        assert_eq!(c.best_c, vec![2, -1]);
        let c = classify_flow(&[1.0, 2f64.sqrt()], 1000, 1e-9);
        assert!(c.rationally_independent && c.best_abs > 1e-9);
        assert!(classify_flow(&[0.7], 50, 1e-9).rationally_independent);
    }

    #[test]
    fn genus_one_mode_guard() {
        let m = model(&[-1.0, 1.0], 0.0, 0.0);
        assert_eq!(
            m.expansion(&[3.0], Mode::N1).unwrap_err(),
            Error::ModeRequiresGenusOne(0)
        );
    }

    #[test]
    fn genus_one_l_hat_is_two() {
        let m = model(&[-2.0, -0.9, -0.3, 1.4], 0.4, -0.3);
        for (i, a) in m.l_hats(true).iter().enumerate() {
            assert!((a.value - 2.0).abs() < 1e-8, "endpoint {i}: {a:?}");
        }
        for i in 0..4 {
            let [a, b] = elliptic_identities(&m.surface, &m.theta, i).unwrap();
            assert!((a.0 - a.1).norm() < 1e-7 * a.1.norm(), "{a:?}");
            assert!((b.0 - b.1).norm() < 1e-7 * b.1.norm(), "{b:?}");
        }
    }
}
