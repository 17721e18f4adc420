//! Binary periodic fields and their on-disk container.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary occupancy field on the periodic cell `[0,L)^d`, `N` voxels per axis.
///
/// Voxel `(i₀, i₁, i₂)` has center `((i + ½)·h)` and flat index
/// `i₀ + N·i₁ + N²·i₂` (axis 0 fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    d: usize,
    n: usize,
    cell: f64,
    bits: Vec<bool>,
}

/// Largest accepted voxel count.
const MAX_VOXELS: usize = 1 << 27;

impl VoxelSet {
    /// Empty field.
    pub fn new(d: usize, n: usize, cell: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::config(format!("grid dimension must be 1, 2 or 3, got {d}")));
        }
        if n < 8 {
            return Err(Error::config(format!("grid size N = {n} must be at least 8")));
        }
        if n.checked_pow(d as u32).map_or(true, |v| v > MAX_VOXELS) {
            return Err(Error::config(format!("grid {n}^{d} exceeds {MAX_VOXELS} voxels")));
        }
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::config(format!("cell length L = {cell} must be positive")));
        }
        Ok(VoxelSet { d, n, cell, bits: vec![false; n.pow(d as u32)] })
    }

    pub fn from_bits(d: usize, n: usize, cell: f64, bits: Vec<bool>) -> Result<Self> {
        let mut v = Self::new(d, n, cell)?;
        if bits.len() != v.bits.len() {
            return Err(Error::config(format!("expected {} occupancy values, got {}", v.bits.len(), bits.len())));
        }
        v.bits = bits;
        Ok(v)
    }

    /// Field with occupancy `f(coords)`.
    pub fn from_fn(d: usize, n: usize, cell: f64, f: impl Fn([usize; 3]) -> bool) -> Result<Self> {
        let mut v = Self::new(d, n, cell)?;
        for i in 0..v.bits.len() {
            v.bits[i] = f(v.coords(i));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn cell(&self) -> f64 {
        self.cell
    }
    /// Voxel side `h = L/N`.
    pub fn spacing(&self) -> f64 {
        self.cell / self.n as f64
    }
    pub fn len(&self) -> usize {
        self.bits.len()
    }
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }
    pub fn set(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }
    pub fn flip(&mut self, idx: usize) {
        self.bits[idx] = !self.bits[idx];
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.popcount() as f64 / self.len() as f64
    }

    /// True when every voxel has the same value.
    pub fn is_trivial(&self) -> bool {
        let c = self.popcount();
        c == 0 || c == self.len()
    }

    /// Flat index of `coords` (unused axes ignored).
    pub fn index(&self, coords: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.d).rev() {
            idx = idx * self.n + coords[a] % self.n;
        }
        idx
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for item in c.iter_mut().take(self.d) {
            *item = idx % self.n;
            idx /= self.n;
        }
        c
    }

    /// Index of the voxel `step` cells away along `axis`, wrapping.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let stride = self.n.pow(axis as u32);
        let i = (idx / stride) % self.n;
        let j = (i as isize + step).rem_euclid(self.n as isize) as usize;
        idx + j * stride - i * stride
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.coords(idx)[..self.d].iter().map(|&i| (i as f64 + 0.5) * h).collect()
    }

    pub fn complement(&self) -> Self {
        VoxelSet { bits: self.bits.iter().map(|b| !b).collect(), ..self.clone() }
    }

    /// Cyclic shift by `offset` voxels.
    pub fn shifted(&self, offset: &[isize]) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            let mut c = self.coords(i);
            for a in 0..self.d {
                c[a] = (c[a] as isize + offset[a]).rem_euclid(self.n as isize) as usize;
            }
            out.bits[self.index(c)] = self.bits[i];
        }
        out
    }

    /// Quarter turn in the `(a, b)` coordinate plane: `(x_a, x_b) ↦ (N−1−x_b, x_a)`.
    pub fn rotated(&self, a: usize, b: usize) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            let mut c = self.coords(i);
            let (xa, xb) = (c[a], c[b]);
            c[a] = self.n - 1 - xb;
            c[b] = xa;
            out.bits[self.index(c)] = self.bits[i];
        }
        out
    }

    /// Mirror image across the mid-plane normal to `axis`.
    pub fn reflected(&self, axis: usize) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            let mut c = self.coords(i);
            c[axis] = self.n - 1 - c[axis];
            out.bits[self.index(c)] = self.bits[i];
        }
        out
    }

    /// Header plus packed bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.d as u8);
        out.push(0); // flags
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&self.cell.to_le_bytes());
        out.extend_from_slice(&(self.popcount() as u64).to_le_bytes());
        for chunk in self.bits.chunks(8) {
            out.push(chunk.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k)));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing NLPF header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let d = bytes[6] as usize;
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let cell = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[24..32].try_into().unwrap()) as usize;
        let mut v = Self::new(d, n, cell).map_err(|e| Error::Format(e.to_string()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != v.len().div_ceil(8) {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", v.len().div_ceil(8), body.len())));
        }
        for (i, b) in v.bits.iter_mut().enumerate() {
            *b = body[i / 8] >> (i % 8) & 1 == 1;
        }
        if v.popcount() != count {
            return Err(Error::Format("occupancy count does not match header".into()));
        }
        Ok(v)
    }

    /// Writes the container and its `.meta.json` sidecar; returns the sidecar path.
    pub fn save(&self, path: &Path, label: &str) -> Result<PathBuf> {
        fs::write(path, self.to_bytes())?;
        let meta = FieldMeta {
            format: "NLPF".into(),
            version: VERSION,
            dimension: self.d,
            grid: self.n,
            cell: self.cell,
            spacing: self.spacing(),
            occupied: self.popcount(),
            volume_fraction: self.volume_fraction(),
            label: label.into(),
        };
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))? + "\n")?;
        Ok(side)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

const MAGIC: &[u8; 4] = b"NLPF";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

/// Sidecar record describing a stored field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub format: String,
    pub version: u16,
    pub dimension: usize,
    pub grid: usize,
    pub cell: f64,
    pub spacing: f64,
    pub occupied: usize,
    pub volume_fraction: f64,
    pub label: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
