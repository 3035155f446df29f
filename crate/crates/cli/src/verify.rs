//! Invariant checks on the configured system. Each check prints one line:
//! PASS, FAIL or SKIP, with the measured quantity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use chfgap::asymptotics::{elliptic_identities, Model};
use chfgap::kernel::{kummer_phi, ChfKernel};
use chfgap::surface::Side;
use chfgap::theta::ThetaContext;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::build_model;
use crate::output::{num, write_file};
use crate::{CliError, RunConfig};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn measured(name: &'static str, value: f64, tol: f64) -> Check {
    let status = if value <= tol {
        Status::Pass
    } else {
        Status::Fail
    };
    Check {
        name,
        status,
        detail: format!("{} (tol {tol:e})", num(value)),
    }
}

fn skip(name: &'static str, why: &str) -> Check {
    Check {
        name,
        status: Status::Skip,
        detail: why.to_string(),
    }
}

/// θ(z + e_j) = θ(z) and θ(z + τe_j) = exp(−2πiz_j − iπτ_jj)θ(z) at random
/// points; the θ engine may use a perturbed copy of τ (test hook).
fn theta_periodicity(m: &Model, engine: &ThetaContext, rng: &mut ChaCha8Rng) -> f64 {
    let n = m.n();
    let tau = &m.surface.tau;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)))
            .collect();
        let j = rng.gen_range(0..n);
        let base = engine.theta(&z);
        let mut zi = z.clone();
        zi[j] += 1.0;
        let mut zt = z.clone();
        for (r, x) in zt.iter_mut().enumerate() {
            *x += tau[(r, j)];
        }
        let q = (-2.0 * PI * I * z[j] - I * PI * tau[(j, j)]).exp() * base;
        worst = worst.max((engine.theta(&zi) - base).norm() / base.norm());
        worst = worst.max((engine.theta(&zt) - q).norm() / q.norm());
    }
    worst
}

fn theta_truncation(m: &Model, rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
    let n = m.n();
    let wide = ThetaContext::with_radius(&m.surface.tau, 2 * m.theta.radius(), m.theta.tol())?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)))
            .collect();
        let a = m.theta.theta(&z);
        worst = worst.max((a - wide.theta(&z)).norm() / a.norm().max(1.0));
    }
    Ok(worst)
}

fn abel_half_periods(m: &Model) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for (i, &e) in m.sys.endpoints().iter().enumerate() {
        for side in [Side::Above, Side::Below] {
            let num = m.surface.abel_map(Some(e), side)?;
            let closed = m.surface.abel_endpoint_closed_form(i, side);
            for (a, b) in num.iter().zip(&closed) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    Ok(worst)
}

/// Contiguous relation (b−a)φ(a−1) + (2a−b+z)φ(a) − aφ(a+1) = 0 and the
/// built-in reflection self-check at random arguments.
fn kummer_checks(rng: &mut ChaCha8Rng) -> Result<(f64, f64), CliError> {
    let mut contiguous: f64 = 0.0;
    let mut reflection: f64 = 0.0;
    for _ in 0..30 {
        let a = Complex64::new(rng.gen_range(0.6..2.5), rng.gen_range(-1.0..1.0));
        let b = rng.gen_range(0.6..3.0);
        let z = Complex64::new(0.0, rng.gen_range(-40.0..40.0));
        let m = kummer_phi(a - 1.0, b, z)?;
        let c = kummer_phi(a, b, z)?;
        let p = kummer_phi(a + 1.0, b, z)?;
        let terms = [(b - a) * m.value, (2.0 * a - b + z) * c.value, a * p.value];
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        contiguous = contiguous.max((terms[0] + terms[1] - terms[2]).norm() / scale);
        reflection = reflection.max(c.reflection_residual);
    }
    Ok((contiguous, reflection))
}

/// ∂_s[s·K(sx, sy)] against a central difference with step 1e−4·s.
fn partial_s_check(m: &Model, rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
    let k = ChfKernel::new(&m.kp)?;
    let f =
        |s: f64, x: f64, y: f64| -> Result<f64, CliError> { Ok(s * k.chf_kernel(s * x, s * y)?) };
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let s = rng.gen_range(0.5..4.0);
        let x = rng.gen_range(-2.0..2.0);
        let y = rng.gen_range(-2.0..2.0);
        let an = k.partial_s_kernel(s, x, y)?;
        if an.abs() < 1e-2 || x.abs() < 1e-3 || y.abs() < 1e-3 {
            continue;
        }
        let h = 1e-4 * s;
        let fd = (f(s + h, x, y)? - f(s - h, x, y)?) / (2.0 * h);
        worst = worst.max((fd - an).abs() / an.abs());
        done += 1;
    }
    Ok(worst)
}

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let m = build_model(cfg)?;
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    if n == 0 {
        out.push(skip(
            "theta quasi-periodicity",
            "genus 0: no theta function",
        ));
        out.push(skip(
            "theta truncation doubling",
            "genus 0: no theta function",
        ));
        out.push(skip("tau symmetric, Im tau positive", "genus 0"));
    } else {
        let engine = match cfg.perturb_tau {
            Some(eps) => {
                let mut t = m.surface.tau.clone();
                for j in 0..n {
                    t[(j, j)] += Complex64::new(eps, eps);
                }
                ThetaContext::new(&t, cfg.theta_tol)?
            }
            None => m.theta.clone(),
        };
        out.push(measured(
            "theta quasi-periodicity",
            theta_periodicity(&m, &engine, &mut rng),
            1e-10,
        ));
        out.push(measured(
            "theta truncation doubling",
            theta_truncation(&m, &mut rng)?,
            1e-12,
        ));
        let im = DMatrix::from_fn(n, n, |i, j| m.surface.tau[(i, j)].im);
        let pd = im.cholesky().is_some();
        let mut c = measured(
            "tau symmetric, Im tau positive",
            m.surface.tau_asymmetry,
            1e-10,
        );
        if !pd {
            c.status = Status::Fail;
            c.detail.push_str("; Im tau not positive definite");
        }
        out.push(c);
    }
    let min_omega = m.flow.omega.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(if n == 0 {
        skip("Omega positive", "genus 0")
    } else {
        let status = if min_omega > 0.0 {
            Status::Pass
        } else {
            Status::Fail
        };
        Check {
            name: "Omega positive",
            status,
            detail: format!("min {}", num(min_omega)),
        }
    });
    out.push(if n == 0 {
        skip("Abel half-period closed forms", "genus 0")
    } else {
        measured(
            "Abel half-period closed forms",
            abel_half_periods(&m)?,
            1e-9,
        )
    });
    out.push(measured(
        "A(inf) + d lattice relation",
        m.surface.lattice_defect,
        1e-8,
    ));
    out.push(measured(
        "zeta purely imaginary",
        m.szego.zeta_real_residue,
        1e-10,
    ));
    out.push(measured(
        "D_inf_1 purely imaginary",
        m.szego.d_infty_1.re.abs(),
        1e-9,
    ));
    if n == 1 {
        let mut ea: f64 = 0.0;
        let mut eb: f64 = 0.0;
        let mut consts = Vec::new();
        for i in 0..4 {
            let [a, b] = elliptic_identities(&m.surface, &m.theta, i)?;
            ea = ea.max((a.0 - a.1).norm() / a.1.norm());
            eb = eb.max((b.0 - b.1).norm() / b.1.norm());
            consts.push(b.1.re);
        }
        let spread = consts
            .iter()
            .map(|c| (c - consts[0]).abs())
            .fold(0.0, f64::max);
        out.push(measured("elliptic identity (a)", ea, 1e-7));
        out.push(measured("elliptic identity (b)", eb, 1e-7));
        out.push(measured("2p(p) - h(p) endpoint-independent", spread, 1e-10));
    } else {
        for name in [
            "elliptic identity (a)",
            "elliptic identity (b)",
            "2p(p) - h(p) endpoint-independent",
        ] {
            out.push(skip(name, "genus-1 only"));
        }
    }
    let (contiguous, reflection) = kummer_checks(&mut rng)?;
    out.push(measured("Kummer contiguous relation", contiguous, 1e-10));
    out.push(measured("Kummer reflection self-check", reflection, 1e-9));
    out.push(measured(
        "d/ds kernel vs finite differences",
        partial_s_check(&m, &mut rng)?,
        1e-6,
    ));
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<String, CliError> {
    let checks = run_checks(cfg)?;
    let mut t = String::new();
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        writeln!(t, "{tag} {}: {}", c.name, c.detail).unwrap();
    }
    write_file(&cfg.output_dir, "verify.txt", &t)?;
    if checks.iter().any(|c| c.status == Status::Fail) {
        Err(CliError::Threshold(t))
    } else {
        Ok(t)
    }
}
