//! Energy ranking of candidate families.

use serde::{Deserialize, Serialize};

use super::candidate::{make_candidate, CandidateSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::lattice::{lattice_energy_with, tilde_lattice_energy, LatticeOptions, VoxelSet};
use crate::report::EnergyReport;

/// Which functional ranks the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "kebab-case")]
pub enum Functional {
    /// The regularized functional of the kernel spec.
    Standard,
    /// The critical functional with unregularized kernel
    /// `max(1, ‖ζ‖)^{-p}` and perimeter coefficient `j`.
    Tilde { j: f64 },
}

/// Energies closer than this (relative) count as tied.
const TIE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub label: String,
    pub spec: CandidateSpec,
    pub volume_fraction: f64,
    pub report: EnergyReport,
    /// Energy equal to a neighbouring row's within rounding.
    pub tied: bool,
}

fn evaluate(v: &VoxelSet, kspec: &KernelSpec, functional: Functional, opts: &LatticeOptions) -> Result<EnergyReport> {
    match functional {
        Functional::Standard => lattice_energy_with(v, kspec, opts),
        Functional::Tilde { j } => tilde_lattice_energy(v, kspec.p(), j, opts),
    }
}

/// Evaluates every candidate on the `n^d` grid of `[0,l)^d` and returns the
/// rows sorted by energy, ties ordered by label.
///
/// The split radius is fixed at its value for `n`; analytic kinds are also
/// evaluated at `n/2` and carry the discretization bound `2|E_n − E_{n/2}|`.
pub fn compare_candidates(
    specs: &[CandidateSpec],
    kspec: &KernelSpec,
    functional: Functional,
    n: usize,
    l: f64,
    opts: &LatticeOptions,
) -> Result<Vec<CandidateRow>> {
    if kspec.tau() <= 0.0 && functional == Functional::Standard {
        return Err(Error::config("candidate comparison needs τ > 0"));
    }
    if let Functional::Tilde { j } = functional {
        if !(j.is_finite() && j >= 0.0) {
            return Err(Error::config(format!("perimeter coefficient J must be finite and nonnegative, got {j}")));
        }
    }
    let d = kspec.d();
    let opts = LatticeOptions { near_radius: Some(opts.split_radius(n, l)?), ..*opts };
    let mut rows = specs
        .iter()
        .map(|c| {
            let v = make_candidate(c, d, n, l)?;
            let mut report = evaluate(&v, kspec, functional, &opts)?;
            if c.is_analytic() && n / 2 >= 8 {
                let coarse = evaluate(&make_candidate(c, d, n / 2, l)?, kspec, functional, &opts)?;
                report.discretization = Some(2.0 * (report.energy - coarse.energy).abs());
            }
            Ok(CandidateRow { label: c.label(), spec: c.clone(), volume_fraction: v.volume_fraction(), report, tied: false })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.report.energy.total_cmp(&b.report.energy).then_with(|| a.label.cmp(&b.label)));
    // Runs of tied energies are reordered by label.
    let mut start = 0;
    for k in 1..=rows.len() {
        let tied = k < rows.len() && {
            let (a, b) = (rows[k - 1].report.energy, rows[k].report.energy);
            (b - a).abs() <= TIE_SLACK * a.abs().max(b.abs())
        };
        if !tied {
            if k - start > 1 {
                rows[start..k].sort_by(|a, b| a.label.cmp(&b.label));
                rows[start..k].iter_mut().for_each(|r| r.tied = true);
            }
            start = k;
        }
    }
    Ok(rows)
}

/// Tab-separated header for [`CandidateRow::tsv_row`].
pub const CANDIDATE_TSV_HEADER: &str = "label\tvolume_fraction\ttied\t";

impl CandidateRow {
    pub fn tsv_header() -> String {
        format!("{CANDIDATE_TSV_HEADER}{}", EnergyReport::TSV_HEADER)
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.label,
            crate::report::fmt_f64(self.volume_fraction),
            self.tied,
            self.report.tsv_row()
        )
    }
}
