//! The power-law kernel family `K_τ(ζ) = max(c, ‖ζ‖)^{-p}` with cutoff
//! `c = τ^{1/(p-d-1)}`, its radial and one-dimensional reductions, and the
//! perimeter constants built from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::integrate;

/// A real value or the distinguished infinite result.
///
/// Kernel singularities at `τ = 0` are returned as [`Extended::Infinite`]
/// instead of an IEEE infinity so callers must handle them explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// The finite value; panics on `Infinite`.
    #[track_caller]
    pub fn unwrap(self) -> f64 {
        self.finite().expect("non-finite kernel value")
    }

    /// Reciprocal power `x^{-s}` with `x = ∞` mapped to 0.
    pub fn inverse_power(self, s: f64) -> f64 {
        match self {
            Extended::Finite(x) => x.powf(-s),
            Extended::Infinite => 0.0,
        }
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v:.17e}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

/// Gamma function at half-integers, `Γ(n/2)` for `n ≥ 1`.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n >= 1);
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        // Γ(1/2) = √π, Γ(x+1) = xΓ(x).
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface measure of the unit sphere `S^{d-1}` (counting measure for d = 1).
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1);
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// Volume of the unit ball in `R^d` (`d = 0` gives 1).
pub fn ball_volume(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    sphere_area(d) / d as f64
}

/// `C_{1,d} = ∫_{S^{d-1}} |⟨θ, e₁⟩| dθ`.
pub fn surface_constant(d: usize) -> f64 {
    assert!(d >= 1);
    2.0 * PI.powf((d as f64 - 1.0) / 2.0) / gamma_half(d + 1)
}

/// `J_c = ∫ |ζ₁| K(ζ) dζ = C_{1,d}·(1/(d+1) + 1/(p-d-1))`.
pub fn critical_constant(p: f64, d: usize) -> Result<f64> {
    check_exponent(p, d)?;
    let d_f = d as f64;
    Ok(surface_constant(d) * (1.0 / (d_f + 1.0) + 1.0 / (p - d_f - 1.0)))
}

pub(crate) fn check_exponent(p: f64, d: usize) -> Result<()> {
    if d == 0 || d > 3 {
        return Err(Error::config(format!("dimension d = {d} not in 1..=3")));
    }
    if !(p.is_finite() && p > d as f64 + 1.0) {
        return Err(Error::config(format!(
            "exponent p = {p} must exceed d + 1 = {} for a finite perimeter constant",
            d + 1
        )));
    }
    Ok(())
}

/// `∫_0^{π/2} sin^{a}φ · cos^{b}φ dφ` by adaptive quadrature.
pub(crate) fn sine_cosine_moment(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    integrate(|phi: f64| phi.sin().powf(a) * phi.cos().powf(b), lo, hi, 1e-300, 1e-14).value
}

/// The exponent triple `(p, d, τ)` with its derived cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct KernelSpec {
    p: f64,
    d: usize,
    tau: f64,
    cutoff: f64,
    marginal_constant: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    p: f64,
    d: usize,
    tau: f64,
}

impl TryFrom<RawSpec> for KernelSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        KernelSpec::new(r.p, r.d, r.tau)
    }
}

impl From<KernelSpec> for RawSpec {
    fn from(k: KernelSpec) -> Self {
        RawSpec { p: k.p, d: k.d, tau: k.tau }
    }
}

impl KernelSpec {
    /// Validates `p > d + 1`, `1 ≤ d ≤ 3` and `τ ≥ 0`.
    pub fn new(p: f64, d: usize, tau: f64) -> Result<Self> {
        check_exponent(p, d)?;
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::config(format!("tau = {tau} must be finite and ≥ 0")));
        }
        let s = p - d as f64 - 1.0;
        let cutoff = if tau > 0.0 { tau.powf(1.0 / s) } else { 0.0 };
        let marginal_constant = if d == 1 {
            1.0
        } else {
            sphere_area(d - 1) * sine_cosine_moment(d as f64 - 2.0, p - d as f64, 0.0, PI / 2.0)
        };
        Ok(KernelSpec { p, d, tau, cutoff, marginal_constant })
    }

    /// As [`KernelSpec::new`], additionally enforcing `p ≥ d + 3`.
    pub fn new_strict(p: f64, d: usize, tau: f64) -> Result<Self> {
        let spec = Self::new(p, d, tau)?;
        spec.check_strict()?;
        Ok(spec)
    }

    pub fn check_strict(&self) -> Result<()> {
        if self.p < self.d as f64 + 3.0 {
            return Err(Error::config(format!(
                "strict mode requires p ≥ d + 3 = {}, got p = {}",
                self.d + 3,
                self.p
            )));
        }
        Ok(())
    }

    /// Same exponents with another τ.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.p, self.d, tau)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `p − d − 1`, the decay exponent of interface interactions.
    pub fn gap_exponent(&self) -> f64 {
        self.p - self.d as f64 - 1.0
    }

    /// `c(p,d)` in `K̂_0(t) = c(p,d)·|t|^{d-1-p}`.
    pub fn marginal_constant(&self) -> f64 {
        self.marginal_constant
    }

    /// Kernel at radius `r ≥ 0`.
    pub fn at_radius(&self, r: f64) -> Extended {
        let m = r.abs().max(self.cutoff);
        if m == 0.0 {
            Extended::Infinite
        } else {
            Extended::Finite(m.powf(-self.p))
        }
    }

    /// Kernel at a point of `R^d`.
    pub fn value(&self, zeta: &[f64]) -> Extended {
        debug_assert_eq!(zeta.len(), self.d);
        self.at_radius(zeta.iter().map(|z| z * z).sum::<f64>().sqrt())
    }

    /// `K̄(ρ) = |ρ|^{d-1} K(ρ)`.
    pub fn radial_weight(&self, rho: f64) -> Extended {
        let r = rho.abs();
        match self.at_radius(r) {
            Extended::Finite(k) => Extended::Finite(r.powi(self.d as i32 - 1) * k),
            Extended::Infinite => Extended::Infinite,
        }
    }

    /// `K̂(t) = ∫_{R^{d-1}} K(t e₁ + u) du`.
    pub fn marginal_1d(&self, t: f64) -> Extended {
        let t = t.abs();
        let d = self.d as f64;
        if self.d == 1 {
            return self.at_radius(t);
        }
        let c = self.cutoff;
        if t >= c {
            if t == 0.0 {
                return Extended::Infinite;
            }
            return Extended::Finite(self.marginal_constant * t.powf(d - 1.0 - self.p));
        }
        // Capped disk of radius a = √(c² − t²) plus the power-law exterior.
        let a = (c * c - t * t).sqrt();
        let inner = c.powf(-self.p) * ball_volume(self.d - 1) * a.powf(d - 1.0);
        let outer = if t < 1e-8 * c {
            sphere_area(self.d - 1) * c.powf(d - 1.0 - self.p) / (self.p - d + 1.0)
        } else {
            let psi = (t / a).atan();
            sphere_area(self.d - 1)
                * t.powf(d - 1.0 - self.p)
                * sine_cosine_moment(self.p - d, d - 2.0, 0.0, psi)
        };
        Extended::Finite(inner + outer)
    }

    /// `J_τ = ∫_{‖ζ‖≤1} |ζ₁| K_τ(ζ) dζ`; infinite at `τ = 0`.
    pub fn j_tau(&self) -> Extended {
        if self.tau == 0.0 {
            return Extended::Infinite;
        }
        Extended::Finite(surface_constant(self.d) * self.radial_moment(0.0, 1.0, 1))
    }

    /// `‖K_τ‖₁`; infinite at `τ = 0`.
    pub fn l1_norm(&self) -> Extended {
        if self.tau == 0.0 {
            return Extended::Infinite;
        }
        Extended::Finite(sphere_area(self.d) * self.radial_moment(0.0, f64::INFINITY, 0))
    }

    /// `∫_a^b r^{d-1+k} K(r) dr` in closed form, `0 ≤ a ≤ b ≤ ∞`.
    ///
    /// Requires `d + k < p` when `b = ∞` and `c > 0` or `a > 0` when the
    /// integral reaches the origin.
    pub fn radial_moment(&self, a: f64, b: f64, k: i32) -> f64 {
        let e = self.d as f64 + k as f64; // power of r in the capped region
        let c = self.cutoff;
        let mut total = 0.0;
        let (ca, cb) = (a.min(c), b.min(c));
        if cb > ca {
            total += c.powf(-self.p) * (cb.powf(e) - ca.powf(e)) / e;
        }
        let (pa, pb) = (a.max(c), b.max(c));
        if pb > pa {
            let q = e - self.p; // exponent after integration
            let upper = if pb.is_infinite() { 0.0 } else { pb.powf(q) };
            total += if q.abs() < 1e-14 { pb.ln() - pa.ln() } else { (upper - pa.powf(q)) / q };
        }
        total
    }
}

/// Free-function form of [`KernelSpec::value`].
pub fn kernel_value(spec: &KernelSpec, zeta: &[f64]) -> Extended {
    spec.value(zeta)
}

/// Free-function form of [`KernelSpec::radial_weight`].
pub fn radial_weight(spec: &KernelSpec, rho: f64) -> Extended {
    spec.radial_weight(rho)
}

/// Free-function form of [`KernelSpec::marginal_1d`].
pub fn marginal_1d(spec: &KernelSpec, t: f64) -> Extended {
    spec.marginal_1d(t)
}

/// Free-function form of [`KernelSpec::j_tau`].
pub fn j_tau(spec: &KernelSpec) -> Extended {
    spec.j_tau()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_gamma() {
        assert_eq!(gamma_half(2), 1.0);
        assert_eq!(gamma_half(6), 2.0);
        assert!((gamma_half(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cutoff_matches_power() {
        let k = KernelSpec::new(5.0, 2, 0.04).unwrap();
        assert!((k.cutoff() - 0.2).abs() < 1e-15);
        assert_eq!(KernelSpec::new(5.0, 2, 0.0).unwrap().cutoff(), 0.0);
    }

    #[test]
    fn rejects_non_integrable() {
        assert!(KernelSpec::new(3.0, 2, 0.1).is_err());
        assert!(KernelSpec::new(5.0, 2, -1.0).is_err());
        assert!(KernelSpec::new_strict(4.5, 2, 0.1).is_err());
        assert!(KernelSpec::new_strict(5.0, 2, 0.1).is_ok());
    }

    #[test]
    fn marginal_continuous_across_cutoff() {
        let k = KernelSpec::new(5.0, 2, 0.04).unwrap();
        let c = k.cutoff();
        let below = k.marginal_1d(c * (1.0 - 1e-9)).unwrap();
        let above = k.marginal_1d(c * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() < 1e-6 * above);
        let zero = k.marginal_1d(0.0).unwrap();
        let tiny = k.marginal_1d(1e-6 * c).unwrap();
        assert!((zero - tiny).abs() < 1e-9 * zero);
    }
}
