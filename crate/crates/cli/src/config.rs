//! Experiment configuration documents (TOML).
//!
//! Lengths (`cell.length`, half-periods, radii, meshes) are in the unit in
//! which the kernel is `max(c, r)^{-p}`; energies are per unit volume.
//! Physical parameters have no defaults: `kernel.p`, `kernel.d`,
//! `kernel.tau` and `cell.length` must be stated.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stripes_core::lattice::LatticeOptions;
use stripes_core::optimizer::{AnnealSchedule, CandidateSpec};
use stripes_core::slicing::{SamplingMode, Shape};
use stripes_core::{Error, KernelSpec, Result};

/// The experiment to run; also the subcommand name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Constants,
    StripeScan,
    SliceCheck,
    LatticeCheck,
    Compare,
    Anneal,
    Curvature,
    GammaCheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Constants => "constants",
            Kind::StripeScan => "stripe-scan",
            Kind::SliceCheck => "slice-check",
            Kind::LatticeCheck => "lattice-check",
            Kind::Compare => "compare",
            Kind::Anneal => "anneal",
            Kind::Curvature => "curvature",
            Kind::GammaCheck => "gamma-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub p: f64,
    pub d: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    /// Side `L` of the periodic cell.
    pub length: f64,
    /// Voxels per side for grid experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

/// Line-sampling plan; its seed is derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub directions: usize,
    pub offsets: usize,
    pub replicates: usize,
    pub mode: SamplingMode,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { directions: 64, offsets: 8, replicates: 8, mode: SamplingMode::LowDiscrepancy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripeScanSection {
    /// Fit range of the unconstrained curve; defaults to
    /// `[20·cutoff, 16]` (`[0.2, 16]` at `τ = 0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    pub points: usize,
}

impl Default for StripeScanSection {
    fn default() -> Self {
        StripeScanSection { h_min: None, h_max: None, points: 33 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceCheckSection {
    /// Stripe half-periods; empty means the best admissible one.
    pub half_periods: Vec<f64>,
    /// Stripe phase as a fraction of the half-period.
    pub phase: f64,
}

impl Default for SliceCheckSection {
    fn default() -> Self {
        SliceCheckSection { half_periods: Vec::new(), phase: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeCheckSection {
    /// Defaults to the best admissible half-period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_period: Option<f64>,
    pub grids: Vec<usize>,
}

impl Default for LatticeCheckSection {
    fn default() -> Self {
        LatticeCheckSection { half_period: None, grids: vec![64, 128, 256] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalChoice {
    #[default]
    Standard,
    /// The critical functional with perimeter coefficient `j`.
    Tilde,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub functional: FunctionalChoice,
    /// Perimeter coefficient of the critical functional; defaults to `J_c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSection {
    pub chains: usize,
    /// Starting field; defaults to a half-filled random field seeded from
    /// the master seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<CandidateSpec>,
    /// The schedule seed must stay 0: chains are seeded from the master seed.
    pub schedule: AnnealSchedule,
    /// Write the best field of every chain.
    pub save_fields: bool,
}

impl Default for AnnealSection {
    fn default() -> Self {
        AnnealSection { chains: 1, initial: None, schedule: AnnealSchedule::default(), save_fields: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSection {
    pub shape: Shape,
    /// Snapped to the nearest boundary point within `radius`.
    pub point: Vec<f64>,
    pub radius: f64,
    /// Starting boundary mesh, halved `halvings` times.
    pub mesh: f64,
    #[serde(default = "default_halvings")]
    pub halvings: usize,
    /// Exponent of the curvature integral; defaults to `kernel.p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Probe radii for the excess; empty means `radius·2^{-k}`, `k < 4`.
    #[serde(default)]
    pub excess_radii: Vec<f64>,
}

fn default_halvings() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaCheckSection {
    pub period: f64,
    pub boundary: Vec<f64>,
    /// Whether `[boundary[0], boundary[1])` lies inside the set.
    #[serde(default = "default_phase")]
    pub phase: bool,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
}

fn default_phase() -> bool {
    true
}

fn default_taus() -> Vec<f64> {
    (1..=5).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When present it must match the subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    /// Master seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Enforce `p ≥ d + 3`.
    #[serde(default)]
    pub strict_p: bool,
    pub kernel: KernelSection,
    pub cell: CellSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub lattice: LatticeOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stripe_scan: Option<StripeScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_check: Option<SliceCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_check: Option<LatticeCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_check: Option<GammaCheckSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("config: {e}")))
    }

    /// The kernel, after checking every field the experiment `kind` uses.
    pub fn validate(&self, kind: Kind) -> Result<KernelSpec> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::config(format!(
                    "config is for `{}` but `{}` was requested",
                    k.as_str(),
                    kind.as_str()
                )));
            }
        }
        let KernelSection { p, d, tau } = self.kernel;
        let spec = KernelSpec::new(p, d, tau)?;
        if self.strict_p {
            spec.check_strict()?;
        }
        let l = self.cell.length;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::config(format!("cell.length must be positive, got {l}")));
        }
        self.lattice.validate()?;
        let q = &self.quadrature;
        if q.directions == 0 || q.offsets == 0 || (q.replicates < 2 && q.mode != SamplingMode::Midpoint) {
            return Err(Error::config("quadrature needs directions, offsets ≥ 1 and replicates ≥ 2"));
        }
        let positive = |x: f64, what: &str| -> Result<()> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be positive, got {x}")))
            }
        };
        let need_tau = |what: &str| -> Result<()> {
            if tau > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} needs kernel.tau > 0")))
            }
        };
        match kind {
            Kind::Constants => {}
            Kind::StripeScan => {
                let s = self.stripe_scan.clone().unwrap_or_default();
                if s.points < 3 {
                    return Err(Error::config("stripe_scan.points must be at least 3"));
                }
                for x in [s.h_min, s.h_max].into_iter().flatten() {
                    positive(x, "stripe_scan range")?;
                }
                if let (Some(a), Some(b)) = (s.h_min, s.h_max) {
                    if a >= b {
                        return Err(Error::config("stripe_scan.h_min must be below h_max"));
                    }
                }
            }
            Kind::SliceCheck => {
                let s = self.slice_check.clone().unwrap_or_default();
                if !s.phase.is_finite() {
                    return Err(Error::config("slice_check.phase must be finite"));
                }
                for &h in &s.half_periods {
                    positive(h, "slice_check half-period")?;
                    whole_periods(l, h)?;
                }
            }
            Kind::LatticeCheck => {
                let s = self.lattice_check.clone().unwrap_or_default();
                need_tau("lattice-check")?;
                if let Some(h) = s.half_period {
                    positive(h, "lattice_check.half_period")?;
                    whole_periods(l, h)?;
                }
                if s.grids.len() < 2 || s.grids.iter().any(|&n| n < 8) {
                    return Err(Error::config("lattice_check.grids needs at least two grids of ≥ 8 voxels"));
                }
            }
            Kind::Compare => {
                need_tau("compare")?;
                self.grid()?;
                let c = self.compare.clone().unwrap_or_default();
                if let Some(j) = c.j {
                    if c.functional != FunctionalChoice::Tilde {
                        return Err(Error::config("compare.j only applies to the tilde functional"));
                    }
                    if !(j.is_finite() && j >= 0.0) {
                        return Err(Error::config(format!("compare.j must be finite and ≥ 0, got {j}")));
                    }
                }
                for c in &self.candidates {
                    c.validate(d, l)?;
                }
            }
            Kind::Anneal => {
                need_tau("anneal")?;
                self.grid()?;
                let a = self.anneal.clone().unwrap_or_default();
                if a.chains == 0 {
                    return Err(Error::config("anneal.chains must be at least 1"));
                }
                if a.schedule.seed != 0 {
                    return Err(Error::config("anneal.schedule.seed is derived from the master seed; set `seed` instead"));
                }
                a.schedule.validate()?;
                if let Some(c) = &a.initial {
                    c.validate(d, l)?;
                }
            }
            Kind::Curvature => {
                let Some(c) = &self.curvature else {
                    return Err(Error::config("curvature needs a [curvature] section"));
                };
                if d != 2 {
                    return Err(Error::config("curvature probes need kernel.d = 2"));
                }
                c.shape.validate(2)?;
                if c.point.len() != 2 {
                    return Err(Error::config("curvature.point needs 2 components"));
                }
                positive(c.radius, "curvature.radius")?;
                positive(c.mesh, "curvature.mesh")?;
                if c.halvings < 2 {
                    return Err(Error::config("curvature.halvings must be at least 2"));
                }
                for &r in &c.excess_radii {
                    positive(r, "curvature excess radius")?;
                }
                if let Some(q) = c.p {
                    if !(q.is_finite() && q > 3.0) {
                        return Err(Error::config(format!("curvature.p must exceed 3, got {q}")));
                    }
                }
            }
            Kind::GammaCheck => {
                let Some(g) = &self.gamma_check else {
                    return Err(Error::config("gamma-check needs a [gamma_check] section"));
                };
                stripes_core::geometry1d::PeriodicProfile::new(g.period, g.boundary.clone(), g.phase)?;
                if g.taus.is_empty() {
                    return Err(Error::config("gamma_check.taus must not be empty"));
                }
                for &t in &g.taus {
                    positive(t, "gamma_check tau")?;
                }
            }
        }
        Ok(spec)
    }

    /// `cell.grid`, required by the grid experiments.
    pub fn grid(&self) -> Result<usize> {
        match self.cell.grid {
            Some(n) if n >= 8 => Ok(n),
            Some(n) => Err(Error::config(format!("cell.grid must be at least 8, got {n}"))),
            None => Err(Error::config("cell.grid is required for this experiment")),
        }
    }
}

fn whole_periods(l: f64, h: f64) -> Result<()> {
    let k = l / (2.0 * h);
    if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
        return Err(Error::config(format!("half-period {h} does not tile the cell of length {l}")));
    }
    Ok(())
}
