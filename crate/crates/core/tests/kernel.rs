mod common;

use std::f64::consts::PI;

use common::{radial_mass, rng};
use rand::Rng;
use statrs::function::gamma::gamma;
use stripes_core::kernel::*;
use stripes_core::num::{integrate, integrate_to_infinity};
use stripes_core::{Error, Extended, KernelSpec};

fn spec(p: f64, d: usize, tau: f64) -> KernelSpec {
    KernelSpec::new(p, d, tau).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn kernel_value_examples() {
    assert_eq!(spec(5.0, 2, 0.0).value(&[2.0, 0.0]), Extended::Finite(1.0 / 32.0));
    let v = spec(5.0, 2, 0.04).value(&[0.0, 0.0]).unwrap();
    assert!(rel(v, 3125.0) < 1e-12, "{v}");
    assert_eq!(spec(5.0, 2, 0.0).value(&[0.0, 0.0]), Extended::Infinite);
    assert_eq!(kernel_value(&spec(4.0, 1, 0.0), &[0.0]), Extended::Infinite);
}

#[test]
fn kernel_is_rotation_invariant() {
    let mut r = rng(1);
    let k = spec(6.0, 3, 0.01);
    for _ in 0..100 {
        let z: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
        let (a, b) = (r.gen_range(0.0..PI), r.gen_range(0.0..2.0 * PI));
        // Rotation about e₃ then about e₁.
        let (x, y) = (a.cos() * z[0] - a.sin() * z[1], a.sin() * z[0] + a.cos() * z[1]);
        let (y2, w) = (b.cos() * y - b.sin() * z[2], b.sin() * y + b.cos() * z[2]);
        let rotated = [x, y2, w];
        assert!(rel(k.value(&z).unwrap(), k.value(&rotated).unwrap()) < 1e-12);
    }
}

#[test]
fn radial_weight_examples() {
    assert_eq!(spec(4.0, 1, 0.0).radial_weight(2.0), Extended::Finite(1.0 / 16.0));
    assert!(rel(spec(5.0, 2, 0.0).radial_weight(2.0).unwrap(), 1.0 / 16.0) < 1e-15);
    let k = spec(6.0, 3, 0.2);
    for rho in [0.01, 0.3, 1.7] {
        assert_eq!(k.radial_weight(rho), k.radial_weight(-rho));
        assert_eq!(radial_weight(&k, rho), k.radial_weight(rho));
    }
}

#[test]
fn radial_weight_tail_integral() {
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 3), (4.7, 2)] {
        let k = spec(p, d, 0.0);
        let num = integrate_to_infinity(|r| r * k.radial_weight(r).unwrap(), 1.0, 1e-300, 1e-13).value;
        assert!(rel(num, 1.0 / (p - d as f64 - 1.0)) < 1e-10, "{p} {d} {num}");
    }
}

#[test]
fn marginal_examples_and_scaling() {
    let k = spec(5.0, 2, 0.0);
    assert!(rel(k.marginal_1d(1.0).unwrap(), 4.0 / 3.0) < 1e-12);
    assert!(rel(k.marginal_1d(2.0).unwrap(), 1.0 / 12.0) < 1e-12);
    assert_eq!(k.marginal_1d(0.0), Extended::Infinite);
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 3), (7.3, 3)] {
        let k = spec(p, d, 0.0);
        for t in [0.1, 0.7, 3.0] {
            let ratio = k.marginal_1d(t).unwrap() / k.marginal_1d(2.0 * t).unwrap();
            assert!(rel(ratio, 2f64.powf(p - d as f64 + 1.0)) < 1e-10);
            assert_eq!(marginal_1d(&k, t), k.marginal_1d(-t));
        }
    }
}

#[test]
fn marginal_constant_matches_gamma_formula() {
    // ∫_{R^{d-1}} (1 + |u|²)^{-p/2} du = π^{(d-1)/2} Γ((p-d+1)/2) / Γ(p/2).
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 3), (4.5, 2), (8.25, 3)] {
        let k = spec(p, d, 0.0);
        let m = d as f64 - 1.0;
        let expected = PI.powf(m / 2.0) * gamma((p - m) / 2.0) / gamma(p / 2.0);
        assert!(rel(k.marginal_constant(), expected) < 1e-12, "{p} {d}");
    }
}

#[test]
fn capped_marginal_matches_quadrature() {
    // Direct integration of max(c, √(t² + u²))^{-p} over the transverse directions.
    for (p, d, tau) in [(5.0, 2, 0.04), (6.0, 3, 0.01), (5.5, 2, 0.3)] {
        let k = spec(p, d, tau);
        let c = k.cutoff();
        for t in [0.0, 0.3 * c, 0.9 * c, c, 1.5 * c] {
            let f = |u: f64| {
                let r = (t * t + u * u).sqrt().max(c);
                let jac = if d == 3 { 2.0 * PI * u } else { 2.0 };
                jac * r.powf(-p)
            };
            let a = (c * c - t * t).max(0.0).sqrt();
            let inner = if a > 0.0 { integrate(f, 0.0, a, 1e-300, 1e-13).value } else { 0.0 };
            let outer = integrate_to_infinity(f, a, 1e-300, 1e-13).value;
            let v = k.marginal_1d(t).unwrap();
            assert!(rel(v, inner + outer) < 1e-9, "{p} {d} {tau} {t}: {v} {}", inner + outer);
        }
    }
}

#[test]
fn surface_constants() {
    assert_eq!(surface_constant(1), 2.0);
    assert!(rel(surface_constant(2), 4.0) < 1e-15);
    assert!(rel(surface_constant(3), 2.0 * PI) < 1e-15);
    for d in 1..=3 {
        let df = d as f64;
        assert!(rel(surface_constant(d), 2.0 * PI.powf((df - 1.0) / 2.0) / gamma((df + 1.0) / 2.0)) < 1e-14);
        assert!(rel(sphere_area(d), 2.0 * PI.powf(df / 2.0) / gamma(df / 2.0)) < 1e-14);
        assert!(rel(ball_volume(d), PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0)) < 1e-14);
    }
    let circle = integrate(|t: f64| t.cos().abs(), 0.0, 2.0 * PI, 1e-15, 1e-14).value;
    assert!(rel(circle, surface_constant(2)) < 1e-12);
}

/// `∫_{R^d} |ζ₁| max(1, ‖ζ‖)^{-p} dζ`, inner ball in Cartesian coordinates.
fn critical_oracle(p: f64, d: usize) -> f64 {
    let k = |r2: f64| r2.sqrt().max(1.0).powf(-p);
    let tol = 1e-13;
    match d {
        1 => {
            2.0 * (integrate(|x| x, 0.0, 1.0, 1e-300, tol).value
                + integrate_to_infinity(|x| x * k(x * x), 1.0, 1e-300, tol).value)
        }
        2 => {
            let inside = integrate(
                |x: f64| {
                    let h = (1.0 - x * x).max(0.0).sqrt();
                    2.0 * x.abs() * integrate(|y| k(x * x + y * y), 0.0, h, 1e-300, tol).value
                },
                -1.0,
                1.0,
                1e-300,
                tol,
            )
            .value;
            let outside = integrate(
                |th: f64| {
                    th.cos().abs() * integrate_to_infinity(|r| r * r * k(r * r), 1.0, 1e-300, tol).value
                },
                0.0,
                2.0 * PI,
                1e-300,
                tol,
            )
            .value;
            inside + outside
        }
        _ => {
            // Cylindrical shells about the e₁ axis.
            let inside = integrate(
                |x: f64| 2.0 * PI * x.abs() * integrate(|s| s * k(x * x + s * s), 0.0, (1.0 - x * x).max(0.0).sqrt(), 1e-300, tol).value,
                -1.0,
                1.0,
                1e-300,
                tol,
            )
            .value;
            let outside = integrate(
                |ph: f64| {
                    2.0 * PI * ph.sin() * ph.cos().abs()
                        * integrate_to_infinity(|r| r.powi(3) * k(r * r), 1.0, 1e-300, tol).value
                },
                0.0,
                PI,
                1e-300,
                tol,
            )
            .value;
            inside + outside
        }
    }
}

#[test]
fn critical_constant_examples_and_quadrature() {
    assert!(rel(critical_constant(4.0, 1).unwrap(), 2.0) < 1e-15);
    assert!(rel(critical_constant(5.0, 2).unwrap(), 10.0 / 3.0) < 1e-15);
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 3), (5.5, 3), (3.2, 1)] {
        let jc = critical_constant(p, d).unwrap();
        let q = critical_oracle(p, d);
        assert!(rel(jc, q) < 1e-8, "{p} {d}: {jc} {q}");
    }
    assert!(matches!(critical_constant(3.0, 2), Err(Error::Config(_))));
}

#[test]
fn j_tau_examples() {
    assert!(rel(spec(4.0, 1, 0.01).j_tau().unwrap(), 199.0) < 1e-12);
    assert!(rel(j_tau(&spec(5.0, 2, 0.04)).unwrap(), 244.0 / 3.0) < 1e-12);
    assert_eq!(spec(5.0, 2, 0.0).j_tau(), Extended::Infinite);
    let a = spec(5.0, 2, 0.04).j_tau().unwrap();
    let b = spec(5.0, 2, 0.01).j_tau().unwrap();
    assert!(b > a);
}

#[test]
fn j_tau_matches_radial_quadrature() {
    for (p, d, tau) in [(4.0, 1, 0.01), (5.0, 2, 0.04), (6.0, 3, 0.2), (5.5, 2, 2.0)] {
        let k = spec(p, d, tau);
        let c = k.cutoff().min(1.0);
        let f = |r: f64| r * k.radial_weight(r).unwrap();
        let q = integrate(f, 0.0, c, 1e-300, 1e-13).value + integrate(f, c, 1.0, 1e-300, 1e-13).value;
        assert!(rel(k.j_tau().unwrap(), surface_constant(d) * q) < 1e-11, "{p} {d} {tau}");
        let mass = radial_mass(&k, 0.0, f64::INFINITY);
        assert!(rel(k.l1_norm().unwrap(), sphere_area(d) * mass) < 1e-10);
    }
}

#[test]
fn kernel_decreases_in_tau() {
    let mut r = rng(7);
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 3)] {
        let (k1, k2) = (spec(p, d, 0.001), spec(p, d, 0.1));
        for _ in 0..200 {
            let rho = r.gen_range(0.0..1.5);
            let (a, b) = (k1.at_radius(rho).unwrap(), k2.at_radius(rho).unwrap());
            assert!(a >= b);
            if rho >= k2.cutoff() {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(KernelSpec::new(2.0, 1, 0.0), Err(Error::Config(_))));
    assert!(matches!(KernelSpec::new(4.0, 3, 0.0), Err(Error::Config(_))));
    assert!(KernelSpec::new(5.0, 2, -1.0).is_err());
    assert!(KernelSpec::new(5.0, 4, 0.0).is_err());
    assert!(KernelSpec::new_strict(4.5, 2, 0.0).is_err());
    assert!(KernelSpec::new_strict(5.0, 2, 0.0).is_ok());
}

#[test]
fn cutoff_and_serde_round_trip() {
    let k = spec(5.0, 2, 0.04);
    assert!(rel(k.cutoff(), 0.2) < 1e-15);
    assert_eq!(spec(5.0, 2, 0.0).cutoff(), 0.0);
    let json = serde_json::to_string(&k).unwrap();
    let back: KernelSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(k, back);
    assert!(serde_json::from_str::<KernelSpec>(r#"{"p":2.0,"d":2,"tau":0.0}"#).is_err());
}
