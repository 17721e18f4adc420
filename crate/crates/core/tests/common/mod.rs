#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stripes_core::geometry1d::PeriodicProfile;
use stripes_core::num::{integrate, integrate_to_infinity};
use stripes_core::KernelSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random periodic profile with `m` interfaces and every gap ≥ `min_gap`.
pub fn random_profile(rng: &mut ChaCha8Rng, m: usize, period: f64, min_gap: f64) -> PeriodicProfile {
    let free = period - m as f64 * min_gap;
    let mut cuts: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = cuts.iter().sum();
    cuts.iter_mut().for_each(|c| *c = *c / total * free + min_gap);
    let start = rng.gen::<f64>() * cuts[m - 1];
    let mut b = Vec::with_capacity(m);
    let mut x = start;
    for c in &cuts {
        b.push(x);
        x += c;
    }
    let phase = rng.gen::<bool>();
    PeriodicProfile::new(period, b, phase).unwrap()
}

/// `∫_a^b K̄(ρ) dρ` by quadrature, split at the cutoff.
pub fn radial_mass(spec: &KernelSpec, a: f64, b: f64) -> f64 {
    let f = |r: f64| spec.radial_weight(r).unwrap();
    let c = spec.cutoff();
    let mut acc = 0.0;
    let mut lo = a;
    if lo < c {
        let hi = b.min(c);
        acc += integrate(f, lo, hi, 1e-300, 1e-13).value;
        lo = hi;
    }
    if b > lo {
        acc += if b.is_infinite() {
            integrate_to_infinity(f, lo, 1e-300, 1e-13).value
        } else {
            integrate(f, lo, b, 1e-300, 1e-13).value
        };
    }
    acc
}

/// Interface charge of a periodic profile from its defining double
/// integral, with every radial integral done by quadrature and the
/// far field (beyond `horizon` periods) replaced by the mean density.
pub fn oracle_charge(profile: &PeriodicProfile, idx: usize, spec: &KernelSpec, horizon: usize) -> f64 {
    let l = profile.period();
    let m = profile.len() as i64;
    let i = idx as i64;
    let (s, sm, sp) = (profile.point(i), profile.point(i - 1), profile.point(i + 1));
    let v = profile.volume() / l;
    let reach = horizon as f64 * l;
    // Rightward interactions from u ∈ (s⁻, s).
    let inside_left = profile.interval_inside(i - 1);
    let left = |u: f64| {
        let mut acc = 0.0;
        let mut k = i;
        loop {
            let (a, b) = (profile.point(k), profile.point(k + 1));
            if a - u > reach {
                break;
            }
            if profile.interval_inside(k) != inside_left {
                acc += radial_mass(spec, a - u, b - u);
            }
            k += 1;
        }
        let opposite = if inside_left { 1.0 - v } else { v };
        acc + opposite * radial_mass(spec, profile.point(k) - u, f64::INFINITY)
    };
    let right = |u: f64| {
        let mut acc = 0.0;
        let mut k = i - 1;
        loop {
            let (a, b) = (profile.point(k), profile.point(k + 1));
            if u - b > reach {
                break;
            }
            if profile.interval_inside(k) == inside_left {
                acc += radial_mass(spec, u - b, u - a);
            }
            k -= 1;
        }
        let opposite = if inside_left { v } else { 1.0 - v };
        acc + opposite * radial_mass(spec, u - profile.point(k + 1), f64::INFINITY)
    };
    let _ = m;
    let near = 2.0
        * integrate(|r: f64| r * spec.radial_weight(r).unwrap(), 0.0, spec.cutoff().min(1.0), 1e-300, 1e-13).value
        + 2.0 * integrate(|r: f64| r * spec.radial_weight(r).unwrap(), spec.cutoff().min(1.0), 1.0, 1e-300, 1e-13).value;
    let l_int = integrate(left, sm, s, 1e-12, 1e-11).value;
    let r_int = integrate(right, s, sp, 1e-12, 1e-11).value;
    near - l_int - r_int
}
