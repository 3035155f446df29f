use std::f64::consts::PI;

use chfgap::asymptotics::{mean_value_identity, Model, ModelOptions};
use chfgap::dd::Dd;
use chfgap::kernel::{kummer_phi, ChfKernel};
use chfgap::szego::KernelParams;
use chfgap::theta::ThetaContext;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetric τ with Im τ = LLᵀ + 0.3·I.
fn tau_strategy(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    (
        prop::collection::vec(-0.6..0.6f64, n * n),
        prop::collection::vec(-0.5..0.5f64, n * n),
    )
        .prop_map(move |(l, re)| {
            let l = DMatrix::from_row_slice(n, n, &l);
            let im = &l * l.transpose() + DMatrix::identity(n, n) * 0.3;
            DMatrix::from_fn(n, n, |i, j| {
                let r = if i <= j { re[i * n + j] } else { re[j * n + i] };
                Complex64::new(r, im[(i, j)])
            })
        })
}

fn point(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-1.0..1.0f64, -0.4..0.4f64).prop_map(|(a, b)| Complex64::new(a, b)),
        n,
    )
}

/// Endpoints with genus n and 0 strictly inside band m.
fn system(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.2..1.0f64, 2 * n + 1),
        0..=n,
        0.2..0.8f64,
    )
        .prop_map(move |(steps, m, u)| {
            let mut e = vec![0.0];
            for s in steps {
                e.push(e.last().unwrap() + s);
            }
            let origin = e[2 * m] + u * (e[2 * m + 1] - e[2 * m]);
            e.iter().map(|x| x - origin).collect()
        })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn theta_quasi_periodic((tau, z, j) in (1usize..=3).prop_flat_map(|n| (tau_strategy(n), point(n), 0..n))) {
        let ctx = ThetaContext::new(&tau, 1e-13).unwrap();
        let base = ctx.theta(&z);
        let mut zi = z.clone();
        zi[j] += 1.0;
        prop_assert!(rel(ctx.theta(&zi), base) < 1e-10);
        let zt: Vec<Complex64> = (0..z.len()).map(|r| z[r] + tau[(r, j)]).collect();
        let want = (-2.0 * PI * I * z[j] - I * PI * tau[(j, j)]).exp() * base;
        prop_assert!(rel(ctx.theta(&zt), want) < 1e-10);
        let neg: Vec<Complex64> = z.iter().map(|w| -w).collect();
        prop_assert!(rel(ctx.theta(&neg), base) < 1e-12);
    }

    #[test]
    fn theta_derivatives_match_differences((tau, z, v) in (1usize..=2).prop_flat_map(|n| (tau_strategy(n), point(n), point(n)))) {
        let ctx = ThetaContext::new(&tau, 1e-14).unwrap();
        let h = 1e-4;
        let shift = |t: f64| -> Vec<Complex64> { z.iter().zip(&v).map(|(a, b)| a + b * t).collect() };
        let (p, c, m) = (ctx.theta(&shift(h)), ctx.theta(&z), ctx.theta(&shift(-h)));
        let d = ctx.eval_with_derivs(&z, Some(&v));
        let scale = c.norm() + d[1].norm() + d[2].norm();
        prop_assert!((d[1] - (p - m) / (2.0 * h)).norm() < 1e-6 * scale);
        prop_assert!((d[2] - (p - 2.0 * c + m) / (h * h)).norm() < 1e-4 * scale);
    }

    #[test]
    fn kummer_recurrences(ar in 0.6..2.5f64, ai in -1.0..1.0f64, b in 0.6..3.0f64, y in -45.0..45.0f64) {
        let a = Complex64::new(ar, ai);
        let z = Complex64::new(0.0, y);
        let f = |a: Complex64, b: f64| kummer_phi(a, b, z).unwrap();
        let (m, c, p) = (f(a - 1.0, b), f(a, b), f(a + 1.0, b));
        // (b−a)φ(a−1) + (2a−b+z)φ(a) − aφ(a+1) = 0
        let t = [(b - a) * m.value, (2.0 * a - b + z) * c.value, a * p.value];
        let scale = t.iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!((t[0] + t[1] - t[2]).norm() < 1e-11 * scale);
        // φ′(a, b; z) = (a/b)φ(a+1, b+1; z)
        let up = f(a + 1.0, b + 1.0);
        prop_assert!(rel(c.deriv, a / b * up.value) < 1e-11);
        // Kummer's transformation φ(a, b; z) = e^z φ(b−a, b; −z)
        let r = kummer_phi(b - a, b, -z).unwrap();
        prop_assert!(rel(c.value, z.exp() * r.value) < 1e-11);
        prop_assert!(c.reflection_residual < 1e-9);
    }

    #[test]
    fn kernel_symmetric_and_bounded(al in 0.0..1.5f64, bi in -1.0..1.0f64, x in -15.0..15.0f64, y in -15.0..15.0f64) {
        prop_assume!(x.abs() > 1e-3 && y.abs() > 1e-3);
        let k = ChfKernel::new(&KernelParams::new(al, bi).unwrap()).unwrap();
        let kxy = k.chf_kernel(x, y).unwrap();
        let kyx = k.chf_kernel(y, x).unwrap();
        prop_assert!(kxy.is_finite());
        prop_assert!((kxy - kyx).abs() < 1e-12 * kxy.abs().max(1e-3));
        // positive semidefinite 2×2 minor
        let (kxx, kyy) = (k.chf_kernel(x, x).unwrap(), k.chf_kernel(y, y).unwrap());
        prop_assert!(kxx >= -1e-12 && kyy >= -1e-12);
        prop_assert!(kxx * kyy - kxy * kyx >= -1e-9 * (kxx * kyy).abs().max(1e-6));
    }

    #[test]
    fn mean_value_identity_holds(a in -2.0..2.0f64, b in -1.0..1.0f64, w in 0.5..4.0f64, yhat in -1.0..1.0f64, s in 3.0..20.0f64) {
        let y = |t: f64| a + b * (w * t).sin() + 0.3 * (1.7 * w * t).cos();
        let (lhs, rhs) = mean_value_identity(y, 1.0, s, yhat, 120);
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn dd_arithmetic_round_trips(a in -1e3..1e3f64, b in 1e-3..1e3f64) {
        let x = Dd::from_sum(a, 1e-20 * a);
        let q = x / Dd::from(b) * Dd::from(b);
        prop_assert!((q - x).abs().to_f64() <= 1e-30 * a.abs().max(1e-300));
        let r = Dd::from(b).sqrt();
        prop_assert!((r * r - Dd::from(b)).abs().to_f64() <= 1e-30 * b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Scaling Σ by c maps log det(1 − K_s|Σ) to the same function of s/c,
    /// so γ₀ → c²γ₀, Ω → cΩ and τ is unchanged.
    #[test]
    fn scaling_covariance((e, c) in (1usize..=2).prop_flat_map(system).prop_flat_map(|e| (Just(e), 0.4..2.5f64)), al in 0.0..1.0f64, bi in -0.5..0.5f64) {
        let kp = KernelParams::new(al, bi).unwrap();
        let m = Model::build(&e, kp, ModelOptions::default()).unwrap();
        let scaled: Vec<f64> = e.iter().map(|x| c * x).collect();
        let ms = Model::build(&scaled, kp, ModelOptions::default()).unwrap();
        prop_assert!((ms.gamma0 - c * c * m.gamma0).abs() < 1e-10 * ms.gamma0.abs());
        for (a, b) in ms.flow.omega.iter().zip(&m.flow.omega) {
            prop_assert!((a - c * b).abs() < 1e-10 * a.abs());
        }
        let d = (&ms.surface.tau - &m.surface.tau).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(d < 1e-10, "tau moved by {}", d);
    }

    #[test]
    fn structural_invariants(e in (1usize..=3).prop_flat_map(system), al in 0.0..1.0f64, bi in -0.5..0.5f64) {
        let m = Model::build(&e, KernelParams::new(al, bi).unwrap(), ModelOptions::default()).unwrap();
        let n = m.n();
        prop_assert!(m.surface.tau_asymmetry < 1e-10);
        prop_assert!(DMatrix::from_fn(n, n, |i, j| m.surface.tau[(i, j)].im).cholesky().is_some());
        prop_assert!(m.flow.omega.iter().all(|&w| w > 0.0));
        prop_assert!(m.surface.lattice_defect < 1e-8);
        prop_assert!(m.szego.zeta_real_residue < 1e-10);
        prop_assert!(m.szego.d_infty_1.re.abs() < 1e-9);
        prop_assert!(m.gamma0 > 0.0);
    }
}
