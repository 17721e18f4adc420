//! Candidate pattern families on the periodic cell.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{rasterize, VoxelSet};
use crate::slicing::Shape;

/// Relative slack when checking that a ratio is an integer.
const INTEGER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    /// Droplets on `s·Z^d`.
    Simple,
    /// Droplets on `s·Z^d` and on its translate by `s/2·(1,…,1)`.
    Centered,
}

/// A pattern family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateSpec {
    /// Stripes with integer normal `normal`: the cell is tiled when
    /// `L / (2 h ‖normal‖)` is an integer.
    Stripes {
        normal: Vec<i64>,
        half_period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Balls of radius `radius` on a lattice of spacing `spacing`
    /// (default `4·radius`), which must divide `L`.
    DropletLattice {
        lattice: LatticeKind,
        radius: f64,
        #[serde(default)]
        spacing: Option<f64>,
    },
    /// Alternating cubes of side `cell`; `L / cell` must be an even integer.
    Checkerboard { cell: f64 },
    /// Independent voxels occupied with probability `fraction`.
    Random { fraction: f64, seed: u64 },
    /// A field stored in the lattice container format.
    FromFile { path: PathBuf },
}

fn integer_ratio(x: f64, what: &str) -> Result<u64> {
    let k = x.round();
    if !(x.is_finite() && k >= 1.0 && (x - k).abs() <= INTEGER_SLACK * x.max(1.0)) {
        return Err(Error::config(format!("{what} must be a positive integer, got {x}")));
    }
    Ok(k as u64)
}

impl CandidateSpec {
    /// Short human-readable label, unique per parameter set.
    pub fn label(&self) -> String {
        match self {
            CandidateSpec::Stripes { normal, half_period, phase } => {
                let n: Vec<String> = normal.iter().map(|x| x.to_string()).collect();
                if *phase == 0.0 {
                    format!("stripes[{}] h={half_period}", n.join(","))
                } else {
                    format!("stripes[{}] h={half_period} phase={phase}", n.join(","))
                }
            }
            CandidateSpec::DropletLattice { lattice, radius, spacing } => {
                let kind = match lattice {
                    LatticeKind::Simple => "simple",
                    LatticeKind::Centered => "centered",
                };
                match spacing {
                    Some(s) => format!("droplets-{kind} r={radius} s={s}"),
                    None => format!("droplets-{kind} r={radius}"),
                }
            }
            CandidateSpec::Checkerboard { cell } => format!("checkerboard a={cell}"),
            CandidateSpec::Random { fraction, seed } => format!("random f={fraction} seed={seed}"),
            CandidateSpec::FromFile { path } => format!("file {}", path.display()),
        }
    }

    /// Checks the compatibility constraints with the cell `[0,l)^d`.
    pub fn validate(&self, d: usize, l: f64) -> Result<()> {
        match self {
            CandidateSpec::Stripes { normal, half_period, phase } => {
                if normal.len() != d {
                    return Err(Error::config(format!("stripe normal needs {d} components, got {}", normal.len())));
                }
                if normal.iter().all(|&x| x == 0) {
                    return Err(Error::config("stripe normal must be nonzero"));
                }
                if !(half_period.is_finite() && *half_period > 0.0) || !phase.is_finite() {
                    return Err(Error::config(format!("stripe half-period must be positive, got {half_period}")));
                }
                let norm = normal.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                integer_ratio(l / (2.0 * half_period * norm), "stripes: L / (2·half_period·‖normal‖)")?;
            }
            CandidateSpec::DropletLattice { lattice, radius, spacing } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::config(format!("droplet radius must be positive, got {radius}")));
                }
                let s = spacing.unwrap_or(4.0 * radius);
                integer_ratio(l / s, "droplet lattice: L / spacing")?;
                let nearest = match lattice {
                    LatticeKind::Simple => s,
                    LatticeKind::Centered => s * (d as f64).sqrt() / 2.0,
                };
                if 2.0 * radius >= nearest.min(s) {
                    return Err(Error::config(format!(
                        "droplet lattice: diameter {} must be below the nearest-neighbour distance {}",
                        2.0 * radius,
                        nearest.min(s)
                    )));
                }
            }
            CandidateSpec::Checkerboard { cell } => {
                if !(cell.is_finite() && *cell > 0.0) {
                    return Err(Error::config(format!("checkerboard cell must be positive, got {cell}")));
                }
                let k = integer_ratio(l / cell, "checkerboard: L / cell")?;
                if k % 2 != 0 {
                    return Err(Error::config(format!("checkerboard: L / cell = {k} must be even")));
                }
            }
            CandidateSpec::Random { fraction, .. } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::config(format!("random fraction must lie in [0,1], got {fraction}")));
                }
            }
            CandidateSpec::FromFile { .. } => {}
        }
        Ok(())
    }

    /// Exact shape of the deterministic analytic kinds.
    pub fn shape(&self, d: usize, l: f64) -> Result<Option<Shape>> {
        self.validate(d, l)?;
        Ok(match self {
            CandidateSpec::Stripes { normal, half_period, phase } => {
                Some(Shape::stripes(normal.iter().map(|&x| x as f64).collect(), *half_period, *phase)?)
            }
            CandidateSpec::DropletLattice { lattice, radius, spacing } => {
                let s = spacing.unwrap_or(4.0 * radius);
                let mut parts = vec![Shape::ball(vec![0.5 * s; d], *radius)];
                if *lattice == LatticeKind::Centered {
                    parts.push(Shape::ball(vec![0.0; d], *radius));
                }
                Some(Shape::periodic(s, Shape::Union { parts }))
            }
            _ => None,
        })
    }

    /// Whether the field depends on the grid only through sampling an
    /// exact set.
    pub fn is_analytic(&self) -> bool {
        matches!(
            self,
            CandidateSpec::Stripes { .. } | CandidateSpec::DropletLattice { .. } | CandidateSpec::Checkerboard { .. }
        )
    }
}

/// Voxel field of a candidate on the `n^d` grid of `[0,l)^d`, sampled at
/// cell centers.
pub fn make_candidate(c: &CandidateSpec, d: usize, n: usize, l: f64) -> Result<VoxelSet> {
    if let Some(shape) = c.shape(d, l)? {
        return rasterize(&shape, d, n, l);
    }
    match c {
        CandidateSpec::Checkerboard { cell } => {
            let h = l / n as f64;
            VoxelSet::from_fn(d, n, l, |x| {
                let s: u64 = x[..d].iter().map(|&i| (((i as f64 + 0.5) * h) / cell).floor() as u64).sum();
                s % 2 == 0
            })
        }
        CandidateSpec::Random { fraction, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let bits = (0..n.pow(d as u32)).map(|_| rng.gen::<f64>() < *fraction).collect();
            VoxelSet::from_bits(d, n, l, bits)
        }
        CandidateSpec::FromFile { path } => {
            let v = VoxelSet::load(path)?;
            if v.dim() != d || v.n() != n || (v.cell() - l).abs() > INTEGER_SLACK * l {
                return Err(Error::config(format!(
                    "{}: field is {}^{} on cell {}, expected {n}^{d} on cell {l}",
                    path.display(),
                    v.n(),
                    v.dim(),
                    v.cell()
                )));
            }
            Ok(v)
        }
        _ => unreachable!("analytic kinds handled above"),
    }
}
