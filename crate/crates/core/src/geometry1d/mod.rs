//! One-dimensional sets of finite perimeter: periodic and windowed
//! profiles, per-interface charges, the one-dimensional functional and
//! the simple-periodic (stripe) energy.

mod charge;
mod energy;
mod stripes;

pub use charge::{charge_lower_bound, interface_charge, window_charge, ChargeMode, LineKernel};
pub(crate) use charge::periodic_charge;
pub use energy::{profile_energy, profile_energy_mode, tilde_profile_energy, EnergyRoute};
pub use stripes::{fit_stripe_model, optimal_half_period, stripe_energy, OptimalPeriod, StripeModel};

use crate::error::{Error, Result};

/// An L-periodic subset of the line given by its interfaces in `[0, L)`.
///
/// `phase` records whether the set contains the interval just right of
/// `boundary[0]`; with no interfaces it distinguishes full from empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicProfile {
    period: f64,
    boundary: Vec<f64>,
    phase: bool,
}

impl PeriodicProfile {
    pub fn new(period: f64, boundary: Vec<f64>, phase: bool) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config(format!("period {period} must be positive")));
        }
        if boundary.len() % 2 != 0 {
            return Err(Error::config("periodic profile needs an even number of interfaces"));
        }
        for w in boundary.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config("interfaces must be strictly increasing"));
            }
        }
        if let (Some(&first), Some(&last)) = (boundary.first(), boundary.last()) {
            if first < 0.0 || last >= period {
                return Err(Error::config("interfaces must lie in [0, L)"));
            }
            if !(first + period - last > 0.0) {
                return Err(Error::config("wrap-around gap must be positive"));
            }
        }
        Ok(PeriodicProfile { period, boundary, phase })
    }

    /// Boundary `{0, h}` with period `2h`, containing `(0, h)`.
    pub fn simple(h: f64) -> Result<Self> {
        Self::new(2.0 * h, vec![0.0, h], true)
    }

    pub fn empty(period: f64) -> Self {
        PeriodicProfile { period, boundary: Vec::new(), phase: false }
    }

    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }
    pub fn phase(&self) -> bool {
        self.phase
    }
    pub fn len(&self) -> usize {
        self.boundary.len()
    }
    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    /// The complementary set.
    pub fn complement(&self) -> Self {
        PeriodicProfile { phase: !self.phase, ..self.clone() }
    }

    /// The same set with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PeriodicProfile {
            period: self.period * factor,
            boundary: self.boundary.iter().map(|b| b * factor).collect(),
            phase: self.phase,
        }
    }

    /// The same set described on `k` periods.
    pub fn repeated(&self, k: usize) -> Self {
        let mut boundary = Vec::with_capacity(self.len() * k);
        for j in 0..k {
            boundary.extend(self.boundary.iter().map(|b| b + j as f64 * self.period));
        }
        PeriodicProfile { period: self.period * k as f64, boundary, phase: self.phase }
    }

    /// Interface `k` of the periodic extension (any integer `k`).
    pub fn point(&self, k: i64) -> f64 {
        let m = self.len() as i64;
        let q = k.div_euclid(m);
        self.boundary[k.rem_euclid(m) as usize] + q as f64 * self.period
    }

    /// Gaps `(s − s⁻, s⁺ − s)` at interface `idx`.
    pub fn gaps(&self, idx: usize) -> (f64, f64) {
        let k = idx as i64;
        (self.point(k) - self.point(k - 1), self.point(k + 1) - self.point(k))
    }

    pub fn min_gap(&self) -> f64 {
        (0..self.len()).map(|i| self.gaps(i).1).fold(f64::INFINITY, f64::min)
    }

    /// Whether the open interval `(point(k), point(k+1))` belongs to the set.
    pub fn interval_inside(&self, k: i64) -> bool {
        self.phase ^ (k.rem_euclid(2) == 1)
    }

    /// Membership of `x` (boundary points count as outside).
    pub fn contains(&self, x: f64) -> bool {
        if self.is_empty() {
            return self.phase;
        }
        let y = x.rem_euclid(self.period);
        let k = self.boundary.partition_point(|&b| b <= y) as i64 - 1;
        if self.boundary.contains(&y) {
            return false;
        }
        self.interval_inside(k)
    }

    /// Intervals of the set inside one period, as `[a, b)` with `0 ≤ a < b ≤ L`.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let m = self.len() as i64;
        if m == 0 {
            return if self.phase { vec![(0.0, self.period)] } else { Vec::new() };
        }
        let mut out = Vec::new();
        for k in 0..m {
            if self.interval_inside(k) {
                let (a, b) = (self.point(k), self.point(k + 1));
                if b <= self.period {
                    out.push((a, b));
                } else {
                    out.push((a, self.period));
                    out.push((0.0, b - self.period));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        out
    }

    /// Measure of the set in one period.
    pub fn volume(&self) -> f64 {
        self.intervals().iter().map(|(a, b)| b - a).sum()
    }

    /// Line-oriented text: a header `L <period> phase <0|1>`, then one
    /// interface per line, all with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("L {:.16e} phase {}\n", self.period, self.phase as u8);
        for b in &self.boundary {
            s.push_str(&format!("{b:.16e}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Format("empty profile".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "L" || fields[2] != "phase" {
            return Err(Error::Format(format!("bad profile header `{header}`")));
        }
        let period = parse_f64(fields[1])?;
        let phase = match fields[3] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format(format!("bad phase `{other}`"))),
        };
        let boundary = lines.map(parse_f64).collect::<Result<Vec<_>>>()?;
        Self::new(period, boundary, phase)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("not a number: `{s}`")))
}

/// A finite stretch of a sliced line.
///
/// Outside `[lo, hi]` the line is either continued by the phase of the
/// outermost interval (`far_fraction = None`, exact for bounded shapes) or
/// replaced by a homogeneous medium of the given volume fraction
/// (horizon truncation of unbounded non-periodic slices).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProfile {
    pub boundary: Vec<f64>,
    /// Whether the set contains the interval just right of `boundary[0]`
    /// (or the whole line when `boundary` is empty).
    pub phase: bool,
    pub lo: f64,
    pub hi: f64,
    pub far_fraction: Option<f64>,
}

impl WindowProfile {
    /// A profile on the whole line with the given interfaces.
    pub fn on_line(boundary: Vec<f64>, phase: bool) -> Self {
        WindowProfile { boundary, phase, lo: f64::NEG_INFINITY, hi: f64::INFINITY, far_fraction: None }
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }
    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    /// Whether the interval right of `boundary[k]` belongs to the set
    /// (`k = -1` is the left end).
    pub fn interval_inside(&self, k: i64) -> bool {
        self.phase ^ (k.rem_euclid(2) == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(PeriodicProfile::new(4.0, vec![0.0, 1.0, 2.0], true).is_err());
        assert!(PeriodicProfile::new(4.0, vec![1.0, 1.0], true).is_err());
        assert!(PeriodicProfile::new(4.0, vec![1.0, 4.0], true).is_err());
        assert!(PeriodicProfile::new(4.0, vec![0.5, 3.0], true).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let p = PeriodicProfile::new(3.7, vec![0.1, 0.3 + 1e-13, 2.0, 3.0], false).unwrap();
        let q = PeriodicProfile::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn intervals_and_membership() {
        let p = PeriodicProfile::new(4.0, vec![1.0, 3.0], false).unwrap();
        assert_eq!(p.intervals(), vec![(0.0, 1.0), (3.0, 4.0)]);
        assert!(p.contains(0.5) && p.contains(3.5) && !p.contains(2.0));
        assert_eq!(p.volume(), 2.0);
        assert_eq!(p.complement().volume(), 2.0);
        assert_eq!(p.gaps(0), (2.0, 2.0));
        assert_eq!(p.point(-1), -1.0);
        assert_eq!(p.point(3), 7.0);
    }
}
