//! Incremental energy of a field under voxel flips.

use std::sync::Arc;

use super::faces::{self, Grad, Stencil};
use super::fft::GridFft;
use super::tile::KernelTile;
use super::{check_field, far_pair_sum, lattice_energy_with, tile_for, LatticeOptions, VoxelSet};
use crate::error::Result;
use crate::kernel::KernelSpec;

/// A field together with the data needed for `O(N^d)` flip updates.
///
/// The far pair sum changes by `2 Σ_j W(i−j)(1 − 2|χ_i − χ_j|)` when voxel
/// `i` flips, read off the maintained convolution `W ⋆ χ`; the perimeter is
/// re-evaluated on the faces within reach of the normal stencil.
pub struct EnergyState {
    field: VoxelSet,
    spec: KernelSpec,
    opts: LatticeOptions,
    tile: Arc<KernelTile>,
    stencil: Stencil,
    grad: Vec<Grad>,
    conv: Vec<f64>,
    far: f64,
    faces: u64,
}

/// Effect of flipping a set of distinct voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub flips: Vec<usize>,
    d_far: f64,
    d_faces: i64,
    /// Change of the energy per unit volume.
    pub d_energy: f64,
}

impl EnergyState {
    pub fn new(field: VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<Self> {
        check_field(&field, spec, opts)?;
        let tile = tile_for(&field, spec, opts)?;
        let fft = GridFft::new(field.dim(), field.n());
        let stencil = opts.stencil();
        let grad = faces::gradient(&field, &stencil);
        let faces = faces::face_total(&field, &grad);
        let conv = fft.convolve(field.bits(), tile.spectrum(&fft));
        let far = if field.is_trivial() { 0.0 } else { far_pair_sum(&field, &tile, &fft) };
        Ok(EnergyState { field, spec: *spec, opts: *opts, tile, stencil, grad, conv, far, faces })
    }

    pub fn field(&self) -> &VoxelSet {
        &self.field
    }

    pub fn into_field(self) -> VoxelSet {
        self.field
    }

    fn volume(&self) -> f64 {
        self.field.cell().powi(self.field.dim() as i32)
    }

    fn compose(&self, far: f64, faces: f64) -> f64 {
        let per = self.field.spacing().powi(self.field.dim() as i32 - 1) * faces / faces::FACE_UNIT;
        ((self.tile.j_tau - self.tile.j_near) * per - far) / self.volume()
    }

    /// Energy per unit volume from the accumulated updates.
    pub fn energy(&self) -> f64 {
        self.compose(self.far, self.faces as f64)
    }

    /// Energy of the current field evaluated from scratch.
    pub fn recompute(&self) -> Result<f64> {
        Ok(lattice_energy_with(&self.field, &self.spec, &self.opts)?.energy)
    }

    /// Energy change of flipping the distinct voxels `flips`; the state is
    /// left unchanged.
    pub fn evaluate(&mut self, flips: Vec<usize>) -> Move {
        let w0 = self.tile.self_weight();
        let rest = self.tile.total - w0;
        let mut d_far = 0.0;
        for (t, &i) in flips.iter().enumerate() {
            let mut g = self.conv[i];
            for &j in &flips[..t] {
                let s = if self.field.get(j) { -1.0 } else { 1.0 };
                g += s * self.tile.pair(i, j);
            }
            d_far += 2.0 * if self.field.get(i) { 2.0 * (g - w0) - rest } else { rest - 2.0 * g };
        }
        let owners = faces::affected_faces(&self.field, &self.stencil, &flips);
        let before = faces::partial_faces(&self.field, &self.grad, &owners);
        self.toggle(&flips);
        let after = faces::partial_faces(&self.field, &self.grad, &owners);
        self.toggle(&flips);
        let d_faces = after as i64 - before as i64;
        let d_energy = self.compose(self.far + d_far, self.faces as f64 + d_faces as f64) - self.energy();
        Move { flips, d_far, d_faces, d_energy }
    }

    /// Flips voxels and their stencil gradients (not the convolution).
    fn toggle(&mut self, flips: &[usize]) {
        for &i in flips {
            let delta = if self.field.get(i) { -1 } else { 1 };
            self.field.flip(i);
            faces::update_gradient(&self.field, &self.stencil, &mut self.grad, i, delta);
        }
    }

    /// Commits a move produced by [`EnergyState::evaluate`] on this state.
    pub fn apply(&mut self, mv: &Move) {
        for &i in &mv.flips {
            let sign = if self.field.get(i) { -1.0 } else { 1.0 };
            self.tile.add_row(&mut self.conv, i, sign);
        }
        self.toggle(&mv.flips);
        self.far += mv.d_far;
        self.faces = (self.faces as i64 + mv.d_faces) as u64;
    }
}
