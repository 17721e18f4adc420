//! Interface charges.
//!
//! The charge of an interface `s` with neighbours `s⁻ < s < s⁺` is
//!
//! ```text
//! r(s) = ∫_{-1}^{1} |ρ| K̄(ρ) dρ − ∫_{s⁻}^{s} ∫_0^∞ |χ(u+ρ) − χ(u)| K̄(ρ) dρ du
//!                               − ∫_s^{s⁺} ∫_{-∞}^0 |χ(u+ρ) − χ(u)| K̄(ρ) dρ du.
//! ```
//!
//! Each interval pair contributes a second difference of
//! `V₂(x) = ∫_x^∞ (ρ − x) K̄(ρ) dρ`, which has a closed form on both sides
//! of the cutoff.

use serde::{Deserialize, Serialize};

use super::{PeriodicProfile, WindowProfile};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::num::{lattice_sum, LatticeTerm, PowerTail};

/// Which kernel the charge is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeMode {
    /// The regularized kernel `K_τ`.
    Tau,
    /// The singular limit kernel with the near-field grouped analytically.
    Zero,
    /// The unscaled kernel `max(1, |ζ|)^{-p}` of the critical functional.
    Tilde,
}

/// Radial antiderivatives of `K̄(ρ) = ρ^{d-1} max(c, ρ)^{-p}` along a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineKernel {
    p: f64,
    d: f64,
    c: f64,
    s: f64,
    constant: f64,
}

impl LineKernel {
    pub fn new(spec: &KernelSpec, mode: ChargeMode) -> Self {
        let c = match mode {
            ChargeMode::Tau => spec.cutoff(),
            ChargeMode::Zero => 0.0,
            ChargeMode::Tilde => 1.0,
        };
        let mut lk = LineKernel { p: spec.p(), d: spec.d() as f64, c, s: spec.gap_exponent(), constant: 0.0 };
        lk.constant = match mode {
            ChargeMode::Tilde => 0.0,
            _ => -2.0 * lk.far_moment(),
        };
        lk
    }

    pub fn cutoff(&self) -> f64 {
        self.c
    }

    /// Charge of an interface with no neighbours.
    pub fn isolated_charge(&self) -> f64 {
        self.constant
    }

    /// `∫_1^∞ ρ K̄(ρ) dρ`.
    pub fn far_moment(&self) -> f64 {
        let (p, d, c, s) = (self.p, self.d, self.c, self.s);
        if c <= 1.0 {
            1.0 / s
        } else {
            c.powf(-p) * (c.powf(d + 1.0) - 1.0) / (d + 1.0) + c.powf(-s) / s
        }
    }

    /// `V₁(x) = ∫_x^∞ K̄`.
    pub fn v1(&self, x: f64) -> f64 {
        let (p, d, c) = (self.p, self.d, self.c);
        if x.is_infinite() {
            return 0.0;
        }
        if x >= c {
            x.powf(d - p) / (p - d)
        } else {
            c.powf(-p) * (c.powf(d) - x.powf(d)) / d + c.powf(d - p) / (p - d)
        }
    }

    /// `V₂(x) = ∫_x^∞ V₁`, with `V₂(∞) = 0`.
    pub fn v2(&self, x: f64) -> f64 {
        let (p, d, c, s) = (self.p, self.d, self.c, self.s);
        if x.is_infinite() {
            return 0.0;
        }
        let a = 1.0 / ((p - d) * s);
        if x >= c {
            a * x.powf(-s)
        } else {
            let cp = c.powf(-p);
            cp * (c.powf(d) * (c - x) - (c.powf(d + 1.0) - x.powf(d + 1.0)) / (d + 1.0)) / d
                + c.powf(d - p) * (c - x) / (p - d)
                + a * c.powf(-s)
        }
    }

    fn tail(&self) -> PowerTail {
        PowerTail {
            coefficient: 1.0 / ((self.p - self.d) * self.s),
            exponent: self.s,
            threshold: self.c,
        }
    }

    /// `2[V₂(δ⁻) + V₂(δ⁺) − V₂(δ⁻ + δ⁺)]`, the nearest-neighbour part.
    fn near(&self, dm: f64, dp: f64) -> f64 {
        2.0 * (self.v2(dm) + self.v2(dp) - self.v2(dm + dp))
    }
}

fn push_pair(terms: &mut Vec<LatticeTerm>, x: [f64; 4]) {
    for (w, o) in [1.0, -1.0, -1.0, 1.0].into_iter().zip(x) {
        terms.push(LatticeTerm { weight: w, offset: o });
    }
}

/// Charge of interface `idx` of a periodic profile.
pub fn interface_charge(profile: &PeriodicProfile, idx: usize, spec: &KernelSpec, mode: ChargeMode) -> Result<f64> {
    if idx >= profile.len() {
        return Err(Error::Index { index: idx, len: profile.len() });
    }
    Ok(periodic_charge(profile, idx, &LineKernel::new(spec, mode)))
}

pub(crate) fn periodic_charge(profile: &PeriodicProfile, idx: usize, lk: &LineKernel) -> f64 {
    let m = profile.len() as i64;
    let l = profile.period();
    let i = idx as i64;
    let (s, sm, sp) = (profile.point(i), profile.point(i - 1), profile.point(i + 1));
    let mut terms = Vec::with_capacity(4 * m as usize);
    for j in 0..m / 2 {
        // The nearest pair is handled in closed form; its images start one period out.
        let shift = if j == 0 { l } else { 0.0 };
        let (a, b) = (profile.point(i + 2 * j), profile.point(i + 2 * j + 1));
        push_pair(&mut terms, [a - s + shift, a - sm + shift, b - s + shift, b - sm + shift]);
        let (a, b) = (profile.point(i - 2 * j - 1), profile.point(i - 2 * j));
        push_pair(&mut terms, [s - b + shift, sp - b + shift, s - a + shift, sp - a + shift]);
    }
    let far = lattice_sum(&terms, l, 0, |x| lk.v2(x), lk.tail());
    lk.constant + lk.near(s - sm, sp - s) - far
}

/// Charge of interface `idx` of a windowed profile.
///
/// Interactions reach every interval of the profile regardless of where
/// the window of interest lies; beyond `[lo, hi]` the far-field medium of
/// `far_fraction` is used when present.
pub fn window_charge(w: &WindowProfile, idx: usize, lk: &LineKernel) -> f64 {
    let m = w.len();
    let b = &w.boundary;
    let s = b[idx];
    let sm = if idx > 0 { b[idx - 1] } else { w.lo };
    let sp = if idx + 1 < m { b[idx + 1] } else { w.hi };
    let mut r = lk.constant + lk.near(s - sm, sp - s);
    let v2 = |x: f64| lk.v2(x);

    // (s⁻, s) against opposite intervals to the right.
    let mut k = idx + 2;
    while k < m {
        let a = b[k];
        let e = if k + 1 < m { b[k + 1] } else { w.hi };
        r -= v2(a - s) - v2(a - sm) - v2(e - s) + v2(e - sm);
        k += 2;
    }
    // (s, s⁺) against opposite intervals to the left.
    let mut k = idx as i64 - 2;
    while k >= 0 {
        let e = b[k as usize];
        let a = if k >= 1 { b[k as usize - 1] } else { w.lo };
        r -= v2(s - e) - v2(sp - e) - v2(s - a) + v2(sp - a);
        k -= 2;
    }
    if let Some(v) = w.far_fraction {
        let left_inside = w.interval_inside(idx as i64 - 1);
        if w.hi.is_finite() {
            let opposite = if left_inside { 1.0 - v } else { v };
            r -= opposite * (v2(w.hi - s) - v2(w.hi - sm));
        }
        if w.lo.is_finite() {
            let opposite = if left_inside { v } else { 1.0 - v };
            r -= opposite * (v2(s - w.lo) - v2(sp - w.lo));
        }
    }
    r
}

/// The explicit minorant `V₂(δ⁻) + V₂(δ⁺) − 2∫_1^∞ ρ K̄_τ` of the τ-charge.
pub fn charge_lower_bound(profile: &PeriodicProfile, idx: usize, spec: &KernelSpec) -> Result<f64> {
    if idx >= profile.len() {
        return Err(Error::Index { index: idx, len: profile.len() });
    }
    let lk = LineKernel::new(spec, ChargeMode::Tau);
    let (dm, dp) = profile.gaps(idx);
    Ok(lk.v2(dm) + lk.v2(dp) + lk.constant)
}
