//! Labeled energy records and their tabular form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// How an energy value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// One-dimensional profile formula.
    Profile,
    /// Direction/offset average of line charges.
    Slicing,
    /// Spectral evaluation on a voxel grid.
    Lattice,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Profile => "profile",
            Route::Slicing => "slicing",
            Route::Lattice => "lattice",
        }
    }
}

/// Energy per unit volume with its decomposition and error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub route: Route,
    pub energy: f64,
    /// `J_τ Per / |Ω|`, when finite.
    pub perimeter_term: Option<f64>,
    /// `−∫∫|χ(x+ζ) − χ(x)| K / |Ω|`, when finite.
    pub nonlocal_term: Option<f64>,
    /// Perimeter estimate inside the window or cell.
    pub perimeter: Option<f64>,
    /// Statistical standard error (0 for deterministic routes).
    pub stderr: f64,
    /// A-posteriori discretization error estimate, for grid routes.
    #[serde(default)]
    pub discretization: Option<f64>,
    pub samples: usize,
    pub seed: Option<u64>,
    /// Expected convergence order in the grid spacing, for grid routes.
    pub order: Option<f64>,
    /// Set when a requested tolerance was not met.
    pub flagged: bool,
}

impl EnergyReport {
    pub fn exact(route: Route, energy: f64) -> Self {
        EnergyReport {
            route,
            energy,
            perimeter_term: None,
            nonlocal_term: None,
            perimeter: None,
            stderr: 0.0,
            discretization: None,
            samples: 0,
            seed: None,
            order: None,
            flagged: false,
        }
    }

    pub const TSV_HEADER: &'static str =
        "route\tenergy\tperimeter_term\tnonlocal_term\tperimeter\tstderr\tdiscretization\tsamples\tseed\tflagged";

    /// One tab-separated row matching [`EnergyReport::TSV_HEADER`].
    pub fn tsv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt_f64);
        let mut s = String::new();
        let _ = write!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.route.as_str(),
            fmt_f64(self.energy),
            opt(self.perimeter_term),
            opt(self.nonlocal_term),
            opt(self.perimeter),
            fmt_f64(self.stderr),
            opt(self.discretization),
            self.samples,
            self.seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
            self.flagged
        );
        s
    }
}

/// Round-trip decimal form used in every table.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
