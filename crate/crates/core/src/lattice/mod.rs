//! Energies of binary periodic fields on `[0,L)^d` grids.
//!
//! The energy of a field is split at the radius `R` of [`LatticeOptions`]:
//!
//! ```text
//! F = L^{-d} [ (J_τ − J_near) Per − Σ_{i,j} W(i−j) |χ_i − χ_j| ]
//! ```
//!
//! where `J_near = C_{1,d} ∫ r^d K φ` is the near part of the kernel acting on
//! a locally flat boundary and `W` are the periodized far-part pair weights.
//! The pair sum is `Σ_m W(m)·2(|E| − C(m))` with the exact integer
//! autocorrelation `C`, computed spectrally.
//!
//! Under [`LatticeModel::Voxel`] the split radius is 0, `Per` is the
//! staircase face area and the formula is the exact energy of the union of
//! the occupied voxels.

mod faces;
mod fft;
mod state;
mod tile;
mod voxel;

use serde::{Deserialize, Serialize};

pub use faces::voxel_perimeter;
pub use state::{EnergyState, Move};
pub use voxel::{sidecar_path, FieldMeta, VoxelSet};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::report::{EnergyReport, Route};
use crate::slicing::{direction, Shape};
use fft::GridFft;
use tile::{cached_tile, orbit_key, KernelTile};

/// What a voxel field stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeModel {
    /// A digitized smooth set: isotropic perimeter and the near/far split.
    #[default]
    Smooth,
    /// The union of the occupied voxels itself: staircase perimeter and
    /// exact cell-pair integrals of the whole kernel, so the energy is
    /// `F_τ` of an actual set.
    Voxel,
}

/// Discretization parameters of the grid route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeOptions {
    pub model: LatticeModel,
    /// Radius `R` of the near/far kernel split; default `max(4h, L/16)`.
    pub near_radius: Option<f64>,
    /// Width of the normal-estimation stencil, in voxels.
    pub smoothing: f64,
    /// Half-width of the normal-estimation stencil, in voxels.
    pub stencil_radius: usize,
    /// Relative bound on the truncated translate sum of the kernel.
    pub tail_tolerance: f64,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions { model: LatticeModel::Smooth, near_radius: None, smoothing: 4.0, stencil_radius: 10, tail_tolerance: 1e-9 }
    }
}

impl LatticeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(Error::config("lattice smoothing must be positive"));
        }
        if self.stencil_radius == 0 {
            return Err(Error::config("lattice stencil radius must be at least 1"));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::config("lattice tail tolerance must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Split radius for a grid of `n` voxels per side on a cell of length `l`.
    pub fn split_radius(&self, n: usize, l: f64) -> Result<f64> {
        let h = l / n as f64;
        let r = self.near_radius.unwrap_or_else(|| (4.0 * h).max(l / 16.0).min(l / 4.0));
        if !(r.is_finite() && r > 0.0 && r <= l / 4.0) {
            return Err(Error::config(format!("near radius {r} must lie in (0, L/4 = {}]", l / 4.0)));
        }
        Ok(r)
    }

    /// Split radius actually used: 0 for the voxel model.
    pub(crate) fn effective_radius(&self, n: usize, l: f64) -> Result<f64> {
        match self.model {
            LatticeModel::Smooth => self.split_radius(n, l),
            LatticeModel::Voxel => Ok(0.0),
        }
    }

    /// Normal stencil; the voxel model counts faces at full weight.
    pub(crate) fn stencil(&self) -> faces::Stencil {
        match self.model {
            LatticeModel::Smooth => faces::Stencil::new(self.smoothing, self.stencil_radius),
            LatticeModel::Voxel => faces::Stencil::new(1.0, 0),
        }
    }
}

/// Cell-center sampling of `shape` on an `n^d` grid of the cell `[0,l)^d`.
pub fn rasterize(shape: &Shape, d: usize, n: usize, l: f64) -> Result<VoxelSet> {
    shape.validate(d)?;
    let mut v = VoxelSet::new(d, n, l)?;
    for i in 0..v.len() {
        let c = v.center(i);
        v.set(i, shape.contains(&c));
    }
    Ok(v)
}

pub(crate) fn check_field(v: &VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<()> {
    opts.validate()?;
    if v.dim() != spec.d() {
        return Err(Error::config(format!("field dimension {} does not match kernel dimension {}", v.dim(), spec.d())));
    }
    if spec.tau() == 0.0 {
        return Err(Error::config(
            "the grid route needs τ > 0 (‖K_τ‖₁ is infinite at τ = 0); use the slicing route instead",
        ));
    }
    Ok(())
}

pub(crate) fn tile_for(v: &VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<std::sync::Arc<KernelTile>> {
    let r = opts.effective_radius(v.n(), v.cell())?;
    Ok(cached_tile(spec, v.n(), v.cell(), r, opts.tail_tolerance))
}

/// `Σ_{i,j} W(i−j)|χ_i − χ_j|` summed orbit by orbit.
pub(crate) fn far_pair_sum(v: &VoxelSet, tile: &KernelTile, fft: &GridFft) -> f64 {
    let (n, d) = (v.n(), v.dim());
    let occupied = v.popcount() as i64;
    let corr = fft.autocorrelation(v.bits());
    let mut counts = vec![0i64; tile.orbit_len()];
    for (i, c) in corr.iter().enumerate() {
        let m = [i % n, (i / n) % n, (i / n / n) % n];
        counts[orbit_key(n, d, m)] += 2 * (occupied - c);
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(k, &c)| tile.orbit_weight(k) * c as f64)
        .sum()
}

/// Grid-route energy with default options.
pub fn lattice_energy(v: &VoxelSet, spec: &KernelSpec) -> Result<EnergyReport> {
    lattice_energy_with(v, spec, &LatticeOptions::default())
}

pub fn lattice_energy_with(v: &VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<EnergyReport> {
    check_field(v, spec, opts)?;
    let mut report = EnergyReport::exact(Route::Lattice, 0.0);
    report.order = (opts.model == LatticeModel::Smooth).then_some(1.0);
    report.samples = v.len();
    if v.is_trivial() {
        report.perimeter = Some(0.0);
        report.perimeter_term = Some(0.0);
        report.nonlocal_term = Some(0.0);
        return Ok(report);
    }
    let tile = tile_for(v, spec, opts)?;
    let fft = GridFft::new(v.dim(), v.n());
    let st = opts.stencil();
    let per = faces::perimeter_from_faces(v, faces::face_total(v, &faces::gradient(v, &st)));
    let far = far_pair_sum(v, &tile, &fft);
    let vol = v.cell().powi(v.dim() as i32);
    report.energy = ((tile.j_tau - tile.j_near) * per - far) / vol;
    report.perimeter = Some(per);
    report.perimeter_term = Some(tile.j_tau * per / vol);
    report.nonlocal_term = Some(-(tile.j_near * per + far) / vol);
    report.flagged = tile.tail_bound > opts.tail_tolerance;
    Ok(report)
}

/// Grid-route value of the critical functional
/// `L^{-d} [ J Per − ∫∫ |χ(x+ζ) − χ(x)| max(1, ‖ζ‖)^{-p} ]`.
pub fn tilde_lattice_energy(v: &VoxelSet, p: f64, j: f64, opts: &LatticeOptions) -> Result<EnergyReport> {
    let spec = KernelSpec::new(p, v.dim(), 1.0)?;
    let mut report = lattice_energy_with(v, &spec, opts)?;
    let per = report.perimeter.unwrap_or(0.0);
    let vol = v.cell().powi(v.dim() as i32);
    let shift = if per == 0.0 { 0.0 } else { (j - spec.j_tau().unwrap()) * per / vol };
    report.energy += shift;
    report.perimeter_term = Some(j * per / vol);
    Ok(report)
}

/// Grid-route energy of an analytic shape rasterized at `n` voxels per side.
///
/// The shape is also evaluated at `n/2` with the same split radius; the
/// first-order Richardson estimate `|E_n − E_{n/2}|`, doubled, is reported
/// as the discretization bound.
pub fn shape_energy(shape: &Shape, d: usize, n: usize, l: f64, spec: &KernelSpec, opts: &LatticeOptions) -> Result<EnergyReport> {
    let fine = rasterize(shape, d, n, l)?;
    let opts = LatticeOptions { near_radius: Some(opts.split_radius(n, l)?), ..*opts };
    let mut report = lattice_energy_with(&fine, spec, &opts)?;
    if n / 2 >= 8 {
        let coarse = lattice_energy_with(&rasterize(shape, d, n / 2, l)?, spec, &opts)?;
        report.discretization = Some(2.0 * (report.energy - coarse.energy).abs());
    }
    Ok(report)
}

/// Parameters of the discretization used for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeDetails {
    pub near_radius: f64,
    pub j_tau: f64,
    pub j_near: f64,
    /// `‖K_far‖₁`.
    pub far_mass: f64,
    /// Translate shells summed explicitly around the cell.
    pub shells: usize,
    /// Relative bound on the neglected translate tail.
    pub tail_bound: f64,
}

pub fn lattice_details(v: &VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<LatticeDetails> {
    check_field(v, spec, opts)?;
    let t = tile_for(v, spec, opts)?;
    Ok(LatticeDetails {
        near_radius: t.near_radius,
        j_tau: t.j_tau,
        j_near: t.j_near,
        far_mass: t.far_mass,
        shells: t.shells,
        tail_bound: t.tail_bound,
    })
}

/// Closest stripe set along the best sampled direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stripedness {
    /// `1 − 2·(fraction of voxels differing from the nearest stripe set)`.
    pub score: f64,
    /// Unit normal of the best stripe set.
    pub direction: Vec<f64>,
}

/// Largest component of the integer stripe normals tried, per dimension.
const NORMAL_REACH: [i64; 4] = [0, 1, 8, 4];

/// Candidate stripe normals: uniformly sampled directions (uniform angles
/// for `d = 2`, coordinate axes plus a spiral for `d = 3`) together with the
/// primitive integer vectors of small height, which are the normals of all
/// stripe sets that tile the cell.
pub fn stripe_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0]],
        2 => (0..count.max(2)).map(|i| direction(2, i, count.max(2), 0.0, 0.0)).collect(),
        _ => {
            let mut dirs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
            dirs.extend((0..count.saturating_sub(3)).map(|i| direction(3, i, count - 3, 0.5, 0.5)));
            dirs
        }
    };
    if d > 1 {
        let m = NORMAL_REACH[d];
        let span = |a: usize| if a < d { -m..=m } else { 0..=0 };
        for c in span(2) {
            for b in span(1) {
                for a in span(0) {
                    let v = [a, b, c];
                    // One representative per ± pair: first nonzero component positive.
                    let lead = v.iter().find(|&&x| x != 0);
                    if lead.is_none_or(|&x| x < 0) || v[..d].iter().fold(0, |g, &x| gcd(g, x.unsigned_abs())) != 1 {
                        continue;
                    }
                    let norm = v.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                    dirs.push(v[..d].iter().map(|&x| x as f64 / norm).collect());
                }
            }
        }
    }
    dirs
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// How close the field is to a stripe set: voxels are binned by their
/// coordinate along each candidate direction of [`stripe_directions`] (bins
/// of width `h`), each bin is set to its majority value, and the mismatch
/// fraction `D ∈ [0, ½]` gives the score `1 − 2D`.
pub fn stripedness(v: &VoxelSet, directions: usize) -> Stripedness {
    let h = v.spacing();
    let dirs = stripe_directions(v.dim(), directions);
    let mut best = Stripedness { score: f64::NEG_INFINITY, direction: dirs[0].clone() };
    let centers: Vec<Vec<f64>> = (0..v.len()).map(|i| v.center(i)).collect();
    for theta in dirs {
        let s: Vec<f64> = centers.iter().map(|c| c.iter().zip(&theta).map(|(a, b)| a * b).sum()).collect();
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5 * h;
        let bins = ((s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo) / h).floor() as usize + 1;
        let mut ones = vec![0usize; bins];
        let mut all = vec![0usize; bins];
        for (i, &x) in s.iter().enumerate() {
            let b = (((x - lo) / h).floor() as usize).min(bins - 1);
            all[b] += 1;
            ones[b] += v.get(i) as usize;
        }
        let mismatch: usize = ones.iter().zip(&all).map(|(&o, &a)| o.min(a - o)).sum();
        let score = 1.0 - 2.0 * mismatch as f64 / v.len() as f64;
        if score > best.score {
            best = Stripedness { score, direction: theta };
        }
    }
    best
}
