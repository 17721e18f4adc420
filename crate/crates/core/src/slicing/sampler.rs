//! Randomized quadrature over the space of lines `(θ, x_θ^⊥)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shape::dot;
use crate::error::{Error, Result};
use crate::kernel::sphere_area;
use crate::num::mean_stderr;

/// Half-open box `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::config("window needs lo < hi on every axis"));
        }
        Ok(Window { lo, hi })
    }

    /// The periodic cell `[0, L)^d`.
    pub fn cell(l: f64, d: usize) -> Self {
        Window { lo: vec![0.0; d], hi: vec![l; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v < *b)
    }

    /// Parameter range of the line `o + t·dir` inside the window.
    pub fn segment(&self, o: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
        let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..o.len() {
            if dir[i] == 0.0 {
                if o[i] < self.lo[i] || o[i] >= self.hi[i] {
                    return None;
                }
            } else {
                let (u, v) = ((self.lo[i] - o[i]) / dir[i], (self.hi[i] - o[i]) / dir[i]);
                a = a.max(u.min(v));
                b = b.min(u.max(v));
            }
        }
        (b > a).then_some((a, b))
    }

    /// Whether the entry and exit points of the line belong to the
    /// half-open window: a point on a `lo` face does, one on a `hi` face
    /// does not.
    pub(crate) fn closed_ends(&self, o: &[f64], dir: &[f64]) -> (bool, bool) {
        let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut entry, mut exit) = (true, false);
        for i in 0..o.len() {
            if dir[i] == 0.0 {
                continue;
            }
            let (u, v) = ((self.lo[i] - o[i]) / dir[i], (self.hi[i] - o[i]) / dir[i]);
            if u.min(v) > a {
                a = u.min(v);
                entry = dir[i] > 0.0;
            }
            if u.max(v) < b {
                b = u.max(v);
                exit = dir[i] < 0.0;
            }
        }
        (entry, exit)
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|m| (0..d).map(|i| if m >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect())
            .collect()
    }

    /// Range of `⟨x, e⟩` over the window.
    fn projection(&self, e: &[f64]) -> (f64, f64) {
        self.corners()
            .iter()
            .map(|c| dot(c, e))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Independent jitter in every direction and offset stratum.
    StratifiedRandom,
    /// One random shift of a regular lattice per replicate.
    LowDiscrepancy,
    /// Unshifted midpoint lattice, a single deterministic replicate.
    Midpoint,
}

/// Sampling plan for line integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceQuadrature {
    /// Directions per replicate (planes for the two-plane route).
    pub directions: usize,
    /// Offset strata per transverse axis.
    pub offsets: usize,
    /// Independent randomizations; the spread gives the standard error.
    pub replicates: usize,
    pub mode: SamplingMode,
    pub seed: u64,
    /// Standard error above which a report is flagged.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Reach of a line slice beyond the window for unbounded shapes
    /// (default 16 window diameters).
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl SliceQuadrature {
    pub fn new(directions: usize, offsets: usize, replicates: usize, seed: u64) -> Self {
        SliceQuadrature { directions, offsets, replicates, mode: SamplingMode::LowDiscrepancy, seed, tolerance: None, horizon: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions == 0 || self.offsets == 0 {
            return Err(Error::config("slice quadrature needs at least one direction and offset"));
        }
        if self.replicates < 2 && self.mode != SamplingMode::Midpoint {
            return Err(Error::config("slice quadrature needs at least two replicates"));
        }
        Ok(())
    }

    pub fn replicate_count(&self) -> usize {
        if self.mode == SamplingMode::Midpoint {
            1
        } else {
            self.replicates
        }
    }

    /// Lines per replicate in dimension `d`.
    pub fn lines_per_replicate(&self, d: usize) -> usize {
        self.directions * self.offsets.pow(d.saturating_sub(1) as u32)
    }
}

/// Estimate of a line integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Lines dropped after repeated degenerate intersections.
    pub skipped: usize,
}

/// Generator for stream `(a, b)` of a master seed.
pub(crate) fn sub_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Orthonormal basis of `θ^⊥`.
pub(crate) fn perp_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    match theta.len() {
        1 => Vec::new(),
        2 => vec![vec![-theta[1], theta[0]]],
        _ => {
            let pick = if theta[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let a = dot(&pick, theta);
            let mut u: Vec<f64> = (0..3).map(|i| pick[i] - a * theta[i]).collect();
            let n = dot(&u, &u).sqrt();
            u.iter_mut().for_each(|x| *x /= n);
            let v = cross(theta, &u);
            vec![u, v]
        }
    }
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Generators of a two-dimensional Kronecker sequence (plastic number).
const LATTICE: [f64; 2] = [0.754_877_666_246_692_7, 0.569_840_290_998_053_2];

/// Direction `i` of `n` on the half-sphere (θ and −θ give the same line).
pub(crate) fn direction(d: usize, i: usize, n: usize, u: f64, v: f64) -> Vec<f64> {
    match d {
        2 => {
            let a = PI * (i as f64 + u) / n as f64;
            vec![a.cos(), a.sin()]
        }
        _ => {
            let z = (i as f64 + u) / n as f64;
            let phi = 2.0 * PI * (i as f64 * GOLDEN + v).fract();
            let s = (1.0 - z * z).max(0.0).sqrt();
            vec![s * phi.cos(), s * phi.sin(), z]
        }
    }
}

/// Stratified points of `[0,1)^k`, `m` strata per axis.
fn offset_grid(k: usize, m: usize, mode: SamplingMode, shift: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let total = m.pow(k as u32);
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            (0..k)
                .map(|a| {
                    let j = rem % m;
                    rem /= m;
                    let jitter = match mode {
                        SamplingMode::LowDiscrepancy => shift[a],
                        SamplingMode::StratifiedRandom => rng.gen::<f64>(),
                        SamplingMode::Midpoint => 0.5,
                    };
                    (j as f64 + jitter) / m as f64
                })
                .collect()
        })
        .collect()
}

/// Evaluates `f` on one line, jittering the offset on degeneracy.
fn eval_line<const K: usize, F>(
    f: &F,
    window: &Window,
    o: &mut [f64],
    dir: &[f64],
    basis: &[Vec<f64>],
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Option<[f64; K]>
where
    F: Fn(&[f64], &[f64], f64, f64) -> Option<[f64; K]>,
{
    for _ in 0..4 {
        let Some((ta, tb)) = window.segment(o, dir) else { return Some([0.0; K]) };
        if let Some(v) = f(o, dir, ta, tb) {
            return Some(v);
        }
        for e in basis {
            let j = 1e-9 * scale * (rng.gen::<f64>() - 0.5);
            o.iter_mut().zip(e).for_each(|(x, ei)| *x += j * ei);
        }
    }
    None
}

/// `∫_{S^{d-1}} ∫_{θ^⊥} f(line) dx dθ` for `K` integrands even under `θ → −θ`.
///
/// `f(o, θ, ta, tb)` receives the line `o + tθ` and its parameter range in
/// the window; it returns `None` for degenerate (tangent) lines.
pub(crate) fn integrate_lines<const K: usize, F>(d: usize, window: &Window, quad: &SliceQuadrature, f: F) -> [LineEstimate; K]
where
    F: Fn(&[f64], &[f64], f64, f64) -> Option<[f64; K]> + Sync,
{
    if d == 1 {
        let (ta, tb) = (window.lo[0], window.hi[0]);
        let v = f(&[0.0], &[1.0], ta, tb).unwrap_or([0.0; K]);
        return v.map(|x| LineEstimate { value: 2.0 * x, stderr: 0.0, samples: 1, skipped: 0 });
    }
    let n = quad.directions;
    let per_dir: Vec<([f64; K], usize)> = (0..quad.replicate_count() * n)
        .into_par_iter()
        .map(|job| {
            let (r, i) = (job / n, job % n);
            let mut shared = sub_rng(quad.seed, r as u64, u64::MAX);
            let (mut su, mut sv, mut s1, mut s2) =
                (shared.gen::<f64>(), shared.gen::<f64>(), shared.gen::<f64>(), shared.gen::<f64>());
            if quad.mode == SamplingMode::Midpoint {
                (su, sv, s1, s2) = (0.5, 0.5, 0.5, 0.5);
            }
            let mut rng = sub_rng(quad.seed, r as u64, i as u64);
            let u = match quad.mode {
                SamplingMode::StratifiedRandom => rng.gen(),
                _ => su,
            };
            let theta = direction(d, i, n, u, sv);
            let basis = perp_basis(&theta);
            let ranges: Vec<(f64, f64)> = basis.iter().map(|e| window.projection(e)).collect();
            let area: f64 = ranges.iter().map(|(a, b)| b - a).product();
            let scale = ranges.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
            // Rank-1 lattice in (direction, offset) decorrelates the strata.
            let shift = [(s1 + i as f64 * LATTICE[0]).fract(), (s2 + i as f64 * LATTICE[1]).fract()];
            let shift = if quad.mode == SamplingMode::Midpoint { [0.5, 0.5] } else { shift };
            let grid = offset_grid(d - 1, quad.offsets, quad.mode, &shift, &mut rng);
            let mut acc = [0.0; K];
            let mut skipped = 0;
            let mut o = vec![0.0; d];
            for g in &grid {
                o.iter_mut().for_each(|x| *x = 0.0);
                for (k, e) in basis.iter().enumerate() {
                    let c = ranges[k].0 + g[k] * (ranges[k].1 - ranges[k].0);
                    o.iter_mut().zip(e).for_each(|(x, ei)| *x += c * ei);
                }
                match eval_line(&f, window, &mut o, &theta, &basis, scale, &mut rng) {
                    Some(v) => acc.iter_mut().zip(v).for_each(|(a, x)| *a += x),
                    None => skipped += 1,
                }
            }
            (acc.map(|a| area * a / grid.len() as f64), skipped)
        })
        .collect();
    finish(&per_dir, n, quad, sphere_area(d), d)
}

fn finish<const K: usize>(per: &[([f64; K], usize)], n: usize, quad: &SliceQuadrature, weight: f64, d: usize) -> [LineEstimate; K] {
    let skipped = per.iter().map(|x| x.1).sum();
    let samples = quad.replicate_count() * quad.lines_per_replicate(d);
    std::array::from_fn(|k| {
        let reps: Vec<f64> = per.chunks(n).map(|c| weight * c.iter().map(|x| x.0[k]).sum::<f64>() / n as f64).collect();
        let (value, stderr) = if reps.len() == 1 { (reps[0], 0.0) } else { mean_stderr(&reps) };
        LineEstimate { value, stderr, samples, skipped }
    })
}

/// Same integral sampled through random 2-planes: a uniformly rotated
/// plane, an offset along its normal, then a line inside the plane.
/// Only `d = 3` has nontrivial planes.
pub(crate) fn integrate_plane_lines<const K: usize, F>(window: &Window, quad: &SliceQuadrature, f: F) -> [LineEstimate; K]
where
    F: Fn(&[f64], &[f64], f64, f64) -> Option<[f64; K]> + Sync,
{
    let n = quad.directions;
    let per_plane: Vec<([f64; K], usize)> = (0..quad.replicate_count() * n)
        .into_par_iter()
        .map(|job| {
            let (r, i) = (job / n, job % n);
            let mut rng = sub_rng(quad.seed, r as u64, i as u64 | 1 << 63);
            let (e1, e2) = gaussian_frame(&mut rng);
            let normal = cross(&e1, &e2);
            let a = PI * rng.gen::<f64>();
            let theta: Vec<f64> = (0..3).map(|k| a.cos() * e1[k] + a.sin() * e2[k]).collect();
            let inplane: Vec<f64> = (0..3).map(|k| -a.sin() * e1[k] + a.cos() * e2[k]).collect();
            let basis = vec![normal, inplane];
            let ranges: Vec<(f64, f64)> = basis.iter().map(|e| window.projection(e)).collect();
            let area: f64 = ranges.iter().map(|(a, b)| b - a).product();
            let scale = ranges.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
            let shift = [rng.gen::<f64>(), rng.gen::<f64>()];
            let grid = offset_grid(2, quad.offsets, quad.mode, &shift, &mut rng);
            let mut acc = [0.0; K];
            let mut skipped = 0;
            let mut o = vec![0.0; 3];
            for g in &grid {
                for k in 0..3 {
                    o[k] = (0..2).map(|b| (ranges[b].0 + g[b] * (ranges[b].1 - ranges[b].0)) * basis[b][k]).sum();
                }
                match eval_line(&f, window, &mut o, &theta, &basis, scale, &mut rng) {
                    Some(v) => acc.iter_mut().zip(v).for_each(|(a, x)| *a += x),
                    None => skipped += 1,
                }
            }
            (acc.map(|a| area * a / grid.len() as f64), skipped)
        })
        .collect();
    // μ(G(2,3))·|S¹| = |S²| by the defining property of the invariant measure.
    finish(&per_plane, n, quad, sphere_area(3), 3)
}

/// Orthonormalized pair of standard Gaussian vectors in `R^3`.
fn gaussian_frame(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut gauss = || {
        // Box–Muller.
        let (u, v): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    };
    let a: Vec<f64> = (0..3).map(|_| gauss()).collect();
    let b: Vec<f64> = (0..3).map(|_| gauss()).collect();
    let na = dot(&a, &a).sqrt();
    let e1: Vec<f64> = a.iter().map(|x| x / na).collect();
    let p = dot(&b, &e1);
    let c: Vec<f64> = b.iter().zip(&e1).map(|(x, e)| x - p * e).collect();
    let nc = dot(&c, &c).sqrt();
    (e1, c.iter().map(|x| x / nc).collect())
}
