//! Simple periodic profiles and their optimal spacing.

use serde::{Deserialize, Serialize};

use super::energy::{profile_energy, EnergyRoute};
use super::PeriodicProfile;
use crate::kernel::KernelSpec;
use crate::num::{golden_section, least_squares};

/// Energy per unit volume of stripes of half-period `h`.
pub fn stripe_energy(h: f64, spec: &KernelSpec) -> f64 {
    let profile = PeriodicProfile::simple(h).expect("positive half-period");
    profile_energy(&profile, spec, EnergyRoute::Direct)
}

/// Fitted `a/h + b·h^{-(p-d)}` shape of the stripe energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripeModel {
    pub a: f64,
    pub b: f64,
    pub exponent: f64,
    /// Largest relative residual over the fitted half-periods.
    pub residual: f64,
}

impl StripeModel {
    pub fn eval(&self, h: f64) -> f64 {
        self.a / h + self.b * h.powf(-self.exponent)
    }

    /// Stationary point `(b(p−d)/(−a))^{1/(p−d−1)}` of the model.
    pub fn stationary_point(&self) -> f64 {
        (self.b * self.exponent / -self.a).powf(1.0 / (self.exponent - 1.0))
    }
}

/// Least-squares fit of the stripe energy over the given half-periods.
pub fn fit_stripe_model(hs: &[f64], spec: &KernelSpec) -> StripeModel {
    let exponent = spec.p() - spec.d() as f64;
    let ys: Vec<f64> = hs.iter().map(|&h| stripe_energy(h, spec)).collect();
    let inv = |h: f64| 1.0 / h;
    let pow = move |h: f64| h.powf(-exponent);
    let (coef, residual) = least_squares(hs, &ys, &[&inv, &pow]);
    StripeModel { a: coef[0], b: coef[1], exponent, residual }
}

/// Result of the optimal-spacing search in a cell of length `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPeriod {
    /// Best admissible half-period `L/(2k)`.
    pub h: f64,
    pub k: usize,
    pub energy: f64,
    /// No admissible stripe beats the empty set; `h`, `k` refer to it.
    pub trivial: bool,
    pub unconstrained_h: f64,
    pub unconstrained_energy: f64,
    /// Energies strictly increase with `h` beyond the optimum on every
    /// sampled grid.
    pub increasing_beyond: bool,
    /// `(k, h, energy)` for every scanned admissible spacing.
    pub scan: Vec<(usize, f64, f64)>,
}

/// Minimizes the stripe energy over `h = L/(2k)` and over all `h > 0`.
pub fn optimal_half_period(l: f64, spec: &KernelSpec) -> OptimalPeriod {
    let f = |h: f64| stripe_energy(h, spec);

    // Bracket the unconstrained minimum on a logarithmic grid.
    let lo = (spec.cutoff() * 0.5).max(1e-3);
    let grid: Vec<f64> = (0..=80).map(|i| lo * (1e4f64).powf(i as f64 / 80.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&h| f(h)).collect();
    let imin = (0..grid.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let (a, b) = (grid[imin.saturating_sub(1)], grid[(imin + 1).min(grid.len() - 1)]);
    let m = golden_section(|x| f(x.exp()), a.ln(), b.ln(), 1e-12);
    let unconstrained_h = m.x.exp();
    let mut increasing_beyond = vals[imin..].windows(2).all(|w| w[1] > w[0]);

    // Admissible spacings, scanned well past the unconstrained optimum.
    let k_stop = ((l / (2.0 * unconstrained_h)) * 4.0).ceil().max(4.0) as usize;
    let scan: Vec<(usize, f64, f64)> = (1..=k_stop.min(100_000))
        .map(|k| {
            let h = l / (2.0 * k as f64);
            (k, h, f(h))
        })
        .collect();
    let best = scan.iter().min_by(|x, y| x.2.total_cmp(&y.2)).copied().unwrap();
    // Larger h means smaller k.
    let best_pos = best.0 - 1;
    increasing_beyond &= scan[..=best_pos].windows(2).all(|w| w[0].2 > w[1].2);

    let trivial = best.2 >= 0.0;
    OptimalPeriod {
        h: if trivial { l } else { best.1 },
        k: if trivial { 0 } else { best.0 },
        energy: if trivial { 0.0 } else { best.2 },
        trivial,
        unconstrained_h,
        unconstrained_energy: m.value,
        increasing_beyond,
        scan,
    }
}
