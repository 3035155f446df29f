//! Nyström discretization of det(1 − K)|_{sΣ}.
//!
//! The |2x|^{2α} factor of K is moved into the quadrature weights; on the two
//! sub-bands touching the origin this is a Gauss–Jacobi rule, elsewhere
//! Gauss–Legendre. The symmetric matrix δ_ij − √(W_iW_j)·K̃(x_i,x_j) is
//! factored by Cholesky, in f64 or in double-double.
//!
//! log det(1 − K) is ill-conditioned once the top eigenvalue of K approaches
//! 1: an absolute perturbation of the matrix is amplified by 1/(1 − λ₀). The
//! double-double path keeps nodes, weights, kernel entries and the
//! factorization in ~32 digits so that the doubling change reflects
//! discretization error rather than rounding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::kernel::{ATilde, ATildeDd, ChfKernel, ORACLE_RANGE};
use crate::par;
use crate::quadrature::{gauss_jacobi0_dd, gauss_legendre_dd, IntervalSystem};
use crate::szego::KernelParams;

/// Smallest accepted node count per interval.
pub const MIN_NODES: usize = 16;
/// Default doubling tolerance.
pub const DEFAULT_CERT_TOL: f64 = 1e-8;

/// Arithmetic used for the kernel matrix and its factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Double,
    #[default]
    DoubleDouble,
}

/// Nodes and effective weights on sΣ.
#[derive(Debug, Clone)]
pub struct NystromGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub nodes_dd: Vec<Dd>,
    pub weights_dd: Vec<Dd>,
    /// (lo, hi, uses Jacobi weight) for each sub-interval.
    pub pieces: Vec<(f64, f64, bool)>,
}

impl NystromGrid {
    pub fn new(
        sys: &IntervalSystem,
        kp: &KernelParams,
        s: f64,
        nodes_per_interval: usize,
    ) -> Result<NystromGrid> {
        if nodes_per_interval < MIN_NODES {
            return Err(Error::OrderTooSmall(nodes_per_interval));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonFinite(s));
        }
        if 2.0 * s * sys.max_abs() > ORACLE_RANGE {
            return Err(Error::RangeExceeded(format!(
                "2·s·max|endpoint| = {} exceeds {}",
                2.0 * s * sys.max_abs(),
                ORACLE_RANGE
            )));
        }
        let al = kp.alpha;
        let two_al = Dd::new(2.0 * al);
        let mut pieces = Vec::new();
        let mut ends = Vec::new();
        for j in 0..=sys.n() {
            let (a, b) = sys.band(j);
            let (ad, bd) = (Dd::from_prod(s, a), Dd::from_prod(s, b));
            if a < 0.0 && 0.0 < b {
                pieces.push((ad.to_f64(), 0.0, al != 0.0));
                pieces.push((0.0, bd.to_f64(), al != 0.0));
                ends.push((ad, Dd::ZERO));
                ends.push((Dd::ZERO, bd));
            } else {
                pieces.push((ad.to_f64(), bd.to_f64(), false));
                ends.push((ad, bd));
            }
        }
        let mut nodes_dd = Vec::new();
        let mut weights_dd = Vec::new();
        for (&(_, _, jac), &(lo, hi)) in pieces.iter().zip(&ends) {
            let half = (hi - lo).mul_f64(0.5);
            if jac {
                // the weight (1+t)^{2α} sits at the origin end
                let rule = gauss_jacobi0_dd(nodes_per_interval, 2.0 * al);
                let c = (Dd::LN_2 * two_al + half.ln() * (two_al + Dd::ONE)).exp();
                let sign = if lo.hi == 0.0 { 1.0 } else { -1.0 };
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    nodes_dd.push((half * (Dd::ONE + t)).mul_f64(sign));
                    weights_dd.push(c * w);
                }
            } else {
                let rule = gauss_legendre_dd(nodes_per_interval);
                let mid = (hi + lo).mul_f64(0.5);
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let x = mid + half * t;
                    let mut wx = half * w;
                    if al != 0.0 {
                        wx *= x.abs().mul_f64(2.0).powd(two_al);
                    }
                    nodes_dd.push(x);
                    weights_dd.push(wx);
                }
            }
        }
        Ok(NystromGrid {
            nodes: nodes_dd.iter().map(|x| x.to_f64()).collect(),
            weights: weights_dd.iter().map(|x| x.to_f64()).collect(),
            nodes_dd,
            weights_dd,
            pieces,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// √(W_iW_j)·K̃(x_i, x_j).
    pub fn kernel_matrix(&self, kernel: &ChfKernel) -> Result<DMatrix<f64>> {
        let n = self.len();
        let at: Vec<ATilde> = par::try_map_range(n, |i| kernel.a_tilde(self.nodes[i]))?;
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let rows: Vec<Vec<f64>> = par::map_range(n, |i| {
            (0..n)
                .map(|j| sw[i] * sw[j] * kernel.factorized_from(&at[i], &at[j]))
                .collect()
        });
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// log det(1 − K) on this grid.
    pub fn log_det(&self, kernel: &ChfKernel, precision: Precision) -> Result<f64> {
        match precision {
            Precision::Double => self.log_det_f64(kernel),
            Precision::DoubleDouble => self.log_det_dd(kernel),
        }
    }

    fn log_det_f64(&self, kernel: &ChfKernel) -> Result<f64> {
        let k = self.kernel_matrix(kernel)?;
        let m = DMatrix::identity(self.len(), self.len()) - k;
        let ch = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = ch.l_dirty();
        Ok(2.0 * (0..self.len()).map(|i| l[(i, i)].ln()).sum::<f64>())
    }

    fn log_det_dd(&self, kernel: &ChfKernel) -> Result<f64> {
        let n = self.len();
        let at: Vec<ATildeDd> = par::try_map_range(n, |i| kernel.a_tilde_dd(self.nodes_dd[i]))?;
        let sw: Vec<Dd> = self.weights_dd.iter().map(|w| w.sqrt()).collect();
        // lower triangle, row i holding columns 0..=i
        let mut rows: Vec<Vec<Dd>> = par::map_range(n, |i| {
            (0..=i)
                .map(|j| {
                    let k = sw[i] * sw[j] * kernel.factorized_from_dd(&at[i], &at[j]);
                    if i == j {
                        Dd::ONE - k
                    } else {
                        -k
                    }
                })
                .collect()
        });
        let mut log_det = Dd::ZERO;
        for j in 0..n {
            let (head, tail) = rows.split_at_mut(j + 1);
            let rj = &mut head[j];
            let d = rj[j] - dd::dot(&rj[..j], &rj[..j]);
            if !(d.hi > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = d.sqrt();
            rj[j] = ljj;
            log_det += d.ln();
            let pj = &rj[..j];
            par::for_each_mut(tail, |_, ri| {
                ri[j] = (ri[j] - dd::dot(&ri[..j], pj)) / ljj;
            });
        }
        Ok(log_det.to_f64())
    }

    /// Eigenvalues of the symmetric kernel matrix, ascending.
    pub fn kernel_eigenvalues(&self, kernel: &ChfKernel) -> Result<Vec<f64>> {
        let k = self.kernel_matrix(kernel)?;
        let mut ev: Vec<f64> = k.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }
}

/// log det with its doubling change.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FredholmResult {
    pub log_det: f64,
    pub doubling_change: f64,
    pub size: usize,
}

/// log det(1 − K|_{sΣ}) in double-double at `nodes_per_interval` and twice
/// that; the finer value is returned and the change must be below `cert_tol`.
pub fn fredholm_log_det(
    sys: &IntervalSystem,
    kp: &KernelParams,
    s: f64,
    nodes_per_interval: usize,
    cert_tol: f64,
) -> Result<FredholmResult> {
    fredholm_log_det_with(
        sys,
        kp,
        s,
        nodes_per_interval,
        cert_tol,
        Precision::DoubleDouble,
    )
}

/// [`fredholm_log_det`] with an explicit precision.
pub fn fredholm_log_det_with(
    sys: &IntervalSystem,
    kp: &KernelParams,
    s: f64,
    nodes_per_interval: usize,
    cert_tol: f64,
    precision: Precision,
) -> Result<FredholmResult> {
    let kernel = ChfKernel::new(kp)?;
    let coarse = NystromGrid::new(sys, kp, s, nodes_per_interval)?;
    let fine = NystromGrid::new(sys, kp, s, 2 * nodes_per_interval)?;
    let lc = coarse.log_det(&kernel, precision)?;
    let lf = fine.log_det(&kernel, precision)?;
    let change = (lf - lc).abs();
    if !(change <= cert_tol) {
        return Err(Error::NotConverged(change));
    }
    Ok(FredholmResult {
        log_det: lf,
        doubling_change: change,
        size: fine.len(),
    })
}

/// Single-resolution log det without certification.
pub fn fredholm_log_det_uncertified(
    sys: &IntervalSystem,
    kp: &KernelParams,
    s: f64,
    nodes_per_interval: usize,
    precision: Precision,
) -> Result<f64> {
    let kernel = ChfKernel::new(kp)?;
    NystromGrid::new(sys, kp, s, nodes_per_interval)?.log_det(&kernel, precision)
}
