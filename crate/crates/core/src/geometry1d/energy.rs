//! Per-unit-length energy of periodic profiles extended as `Ê × R^{d-1}`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::charge::{periodic_charge, ChargeMode, LineKernel};
use super::PeriodicProfile;
use crate::error::Result;
use crate::kernel::{critical_constant, sphere_area, surface_constant, KernelSpec};
use crate::num::{integrate, lattice_sum, LatticeTerm, PowerTail};

/// How the one-dimensional energy is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyRoute {
    /// `J_τ Per − ∫ K̂_τ(t) ∫|χ(s+t) − χ(s)| ds dt` with the marginal kernel.
    Direct,
    /// Direction average of summed interface charges.
    Charges,
}

/// Energy per unit volume of the stripes `Ê × R^{d-1}` with the τ-kernel.
pub fn profile_energy(profile: &PeriodicProfile, spec: &KernelSpec, route: EnergyRoute) -> f64 {
    match route {
        EnergyRoute::Direct => direct_energy(profile, spec),
        EnergyRoute::Charges => profile_energy_mode(profile, spec, ChargeMode::Tau),
    }
}

/// Charges-route energy for any charge mode (without perimeter term for
/// [`ChargeMode::Tilde`]).
pub fn profile_energy_mode(profile: &PeriodicProfile, spec: &KernelSpec, mode: ChargeMode) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let lk = LineKernel::new(spec, mode);
    let l = profile.period();
    let d = spec.d();
    let summed = |prof: &PeriodicProfile| -> f64 { (0..prof.len()).map(|i| periodic_charge(prof, i, &lk)).sum() };
    if d == 1 {
        return summed(profile) / l;
    }
    // ∫_S |θ₁| f(|θ₁|) dθ = 2|S^{d-2}| ∫_0^{π/2} cos φ f(cos φ) sin^{d-2} φ dφ.
    let integrand = |phi: f64| {
        let c = phi.cos();
        if c <= 0.0 {
            return 0.0;
        }
        c * summed(&profile.scaled(1.0 / c)) * phi.sin().powi(d as i32 - 2)
    };
    let angular = integrate(integrand, 0.0, FRAC_PI_2, 1e-14, 1e-12).value;
    sphere_area(d - 1) * angular / l
}

/// `(J − J_c)·Per/L + ½ L^{-1} ∫ |θ₁| Σ r̃`, the critical functional on stripes.
pub fn tilde_profile_energy(profile: &PeriodicProfile, p: f64, d: usize, j: f64) -> Result<f64> {
    let spec = KernelSpec::new(p, d, 0.0)?;
    let jc = critical_constant(p, d)?;
    let per = profile.len() as f64 / profile.period();
    Ok((j - jc) * per + profile_energy_mode(profile, &spec, ChargeMode::Tilde))
}

/// Overlap measure `|E ∩ (E − t)|` within one period.
fn self_overlap(intervals: &[(f64, f64)], l: f64, t: f64) -> f64 {
    let mut acc = 0.0;
    for &(a1, b1) in intervals {
        for &(a2, b2) in intervals {
            for k in [0.0, 1.0] {
                let lo = a1.max(a2 + k * l - t);
                let hi = b1.min(b2 + k * l - t);
                if hi > lo {
                    acc += hi - lo;
                }
            }
        }
    }
    acc
}

/// `∫_u^v K̂(t)(α + βt) dt`.
fn piece_integral(spec: &KernelSpec, u: f64, v: f64, alpha: f64, beta: f64) -> f64 {
    if v <= u || (alpha == 0.0 && beta == 0.0) {
        return 0.0;
    }
    let c = spec.cutoff();
    let mut total = 0.0;
    let mut u = u;
    if u < c {
        let w = v.min(c);
        total += integrate(|t| spec.marginal_1d(t).unwrap() * (alpha + beta * t), u, w, 1e-300, 1e-13).value;
        u = w;
    }
    if v > u {
        let q = spec.p() - spec.d() as f64 + 1.0;
        let cm = spec.marginal_constant();
        total += cm
            * (alpha * (v.powf(1.0 - q) - u.powf(1.0 - q)) / (1.0 - q)
                + beta * (v.powf(2.0 - q) - u.powf(2.0 - q)) / (2.0 - q));
    }
    total
}

fn direct_energy(profile: &PeriodicProfile, spec: &KernelSpec) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let l = profile.period();
    let per = profile.len() as f64;
    let b = profile.boundary();
    let c = spec.cutoff();
    let d = spec.d() as f64;
    let s = spec.gap_exponent();

    // Breakpoints of the piecewise-linear g(t) = ∫|χ(x+t) − χ(x)| dx on [0, L].
    let mut ts = vec![0.0, l];
    for &x in b {
        for &y in b {
            let t = (y - x).rem_euclid(l);
            if t > 0.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * l);
    *ts.last_mut().unwrap() = l;
    let intervals = profile.intervals();
    let vol = profile.volume();
    let mut g: Vec<f64> = ts.iter().map(|&t| 2.0 * (vol - self_overlap(&intervals, l, t))).collect();
    g[0] = 0.0;
    *g.last_mut().unwrap() = 0.0;
    let slopes: Vec<f64> = (0..ts.len() - 1).map(|k| (g[k + 1] - g[k]) / (ts[k + 1] - ts[k])).collect();

    // Perimeter coefficient J_τ − ∫_{-1}^{1} |t| K̂_τ(t) dt.
    let perimeter_coef = if c <= 1.0 {
        -(surface_constant(spec.d()) - 2.0 * spec.marginal_constant()) / s
    } else {
        let inner = integrate(|t| t * spec.marginal_1d(t).unwrap(), 0.0, 1.0, 1e-300, 1e-13).value;
        spec.j_tau().unwrap() - 2.0 * inner
    };

    // Explicit pieces of h(t) = g(t) − Per·t·1{t ≤ 1} up to n₀ periods.
    let n0 = (c.max(1.0) / l).ceil().max(1.0) as u64;
    let mut near = 0.0;
    for n in 0..n0 {
        let shift = n as f64 * l;
        for k in 0..slopes.len() {
            let (u, v) = (ts[k] + shift, ts[k + 1] + shift);
            let beta = slopes[k];
            let alpha = g[k] - beta * u;
            if n == 0 && k == 0 {
                // h ≡ 0 on [0, min(v, 1)] since g(t) = Per·t below the smallest gap.
                if v > 1.0 {
                    near += piece_integral(spec, 1.0, v, 0.0, per);
                }
                continue;
            }
            if u < 1.0 {
                let m = v.min(1.0);
                near += piece_integral(spec, u, m, alpha, beta - per);
                near += piece_integral(spec, m, v, alpha, beta);
            } else {
                near += piece_integral(spec, u, v, alpha, beta);
            }
        }
    }

    // Beyond n₀ periods, ∫ K̂ g per period telescopes to Σ_k β_k [G₂(t_k) − G₂(t_{k+1})].
    let q = spec.p() - d + 1.0;
    let g2_coef = spec.marginal_constant() / ((q - 1.0) * (q - 2.0));
    let mut terms = Vec::with_capacity(2 * slopes.len());
    for k in 0..slopes.len() {
        terms.push(LatticeTerm { weight: slopes[k], offset: ts[k] + n0 as f64 * l });
        terms.push(LatticeTerm { weight: -slopes[k], offset: ts[k + 1] + n0 as f64 * l });
    }
    let tail = PowerTail { coefficient: g2_coef, exponent: q - 2.0, threshold: 0.0 };
    let far = lattice_sum(&terms, l, 0, |t| g2_coef * t.powf(2.0 - q), tail);

    (perimeter_coef * per - 2.0 * (near + far)) / l
}
