//! Periodized pair weights of the far part of the kernel.
//!
//! The kernel is split as `K = K φ + K (1 − φ)` with a smooth cutoff `φ`
//! equal to 1 below `R/2` and 0 above `R`. The near part only sees the
//! boundary as locally flat and contributes `J_near · Per`; the far part is
//! summed over voxel pairs with weights
//!
//! ```text
//! W(m) = Σ_k ∫_{Q_0} ∫_{Q_{m+kN}} K_far(x − y) dx dy
//! ```
//!
//! tabulated once per orbit of the hyperoctahedral group, so that sums over
//! `m` are exactly invariant under quarter turns and reflections.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::fft::GridFft;
use crate::kernel::{sphere_area, surface_constant, KernelSpec};
use crate::num::{gauss7, integrate};

/// Pair evaluations allowed for the explicit translate sum.
const IMAGE_BUDGET: f64 = 4e8;

pub(crate) struct KernelTile {
    pub d: usize,
    pub n: usize,
    pub near_radius: f64,
    pub j_tau: f64,
    pub j_near: f64,
    /// `‖K_far‖₁`.
    pub far_mass: f64,
    /// Relative bound on the neglected translate tail.
    pub tail_bound: f64,
    /// Translate shells summed explicitly.
    pub shells: usize,
    orbit: Vec<f64>,
    full: Vec<f64>,
    pub total: f64,
    spectrum: OnceLock<Vec<f64>>,
}

/// `e^{-1/t}/(e^{-1/t} + e^{-1/(1-t)})`, a smooth step from 0 to 1 on `[0,1]`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Start of the cutoff transition as a fraction of the split radius.
pub(crate) const TRANSITION_START: f64 = 0.5;

/// Fraction of the kernel assigned to the far part at radius `r`; a zero
/// split radius assigns the whole kernel to the far part.
pub(crate) fn far_fraction(r: f64, radius: f64) -> f64 {
    if radius == 0.0 {
        return 1.0;
    }
    smooth_step((r / radius - TRANSITION_START) / (1.0 - TRANSITION_START))
}

/// Sub-intervals per tent half for offsets meeting the cutoff transition.
const TRANSITION_PIECES: usize = 6;
/// Sub-intervals per tent half for offsets whose pair region contains the
/// kink `‖ζ‖ = τ^{1/(p−d−1)}`, by dimension.
const KINK_PIECES: [usize; 4] = [0, 256, 96, 12];

/// Product-ready rule for `∫_{-1}^{1} (1 − |s|) f(s) ds`, each half split
/// into `pieces` Gauss–Legendre panels.
fn tent_rule(pieces: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..pieces {
        let (a, b) = (k as f64 / pieces as f64, (k + 1) as f64 / pieces as f64);
        for &(x, w) in gauss7().iter() {
            let s = a + 0.5 * (b - a) * (1.0 + x);
            let wt = 0.5 * (b - a) * w * (1.0 - s);
            out.push((s, wt));
            out.push((-s, wt));
        }
    }
    out
}

/// Orbit index of the offset `m` under sign changes and axis permutations.
#[inline]
pub(crate) fn orbit_key(n: usize, d: usize, m: [usize; 3]) -> usize {
    let mut c = [0usize; 3];
    for a in 0..d {
        let x = m[a] % n;
        c[a] = x.min(n - x);
    }
    c[..d].sort_unstable();
    let base = n / 2 + 1;
    c[..d].iter().rev().fold(0, |acc, &x| acc * base + x)
}

/// `∫_{S^{d-1}} ‖θ‖_∞^q dθ`.
fn cube_moment(d: usize, q: f64) -> f64 {
    match d {
        1 => 2.0,
        2 => 8.0 * integrate(|g: f64| g.cos().powf(q), 0.0, std::f64::consts::FRAC_PI_4, 1e-15, 1e-13).value,
        _ => {
            let inner = |a: f64| integrate(|b: f64| (1.0 + a * a + b * b).powf(-(q + 3.0) / 2.0), 0.0, 1.0, 1e-15, 1e-13).value;
            24.0 * integrate(inner, 0.0, 1.0, 1e-15, 1e-12).value
        }
    }
}

impl KernelTile {
    pub fn build(spec: &KernelSpec, n: usize, cell: f64, near_radius: f64, tail_tolerance: f64) -> Self {
        let d = spec.d();
        let p = spec.p();
        let h = cell / n as f64;
        let r = near_radius;
        let k = |x: f64| spec.at_radius(x).unwrap();
        let edge = |x: f64, pow: i32| x.powi(pow) * k(x);
        let j_near = surface_constant(d)
            * (spec.radial_moment(0.0, TRANSITION_START * r, 1)
                + integrate(|x| edge(x, d as i32) * (1.0 - far_fraction(x, r)), TRANSITION_START * r, r, 1e-300, 1e-13).value);
        let far_mass = sphere_area(d)
            * (spec.radial_moment(r, f64::INFINITY, 0)
                + integrate(|x| edge(x, d as i32 - 1) * far_fraction(x, r), TRANSITION_START * r, r, 1e-300, 1e-13).value);
        let j_tau = spec.j_tau().unwrap();

        let reps = orbit_representatives(n, d);
        // Translate shells: continuum tail beyond the cube of half-width (M+½)L.
        let a_d = cube_moment(d, p - d as f64);
        let tail = |m: usize| {
            let rho = (m as f64 + 0.5) * cell;
            rho.powf(d as f64 - p) / (p - d as f64) * a_d
        };
        let bound = |m: usize| {
            let rho = (m as f64 + 0.5) * cell;
            tail(m) * p * (p + 2.0) * (cell / rho).powi(2) / 8.0 / far_mass
        };
        let mut shells = 1;
        while bound(shells) > tail_tolerance
            && (reps.len() as f64) * ((2 * shells + 3) as f64).powi(d as i32) <= IMAGE_BUDGET
        {
            shells += 1;
        }
        let tail_bound = bound(shells);
        let h2d = h.powi(2 * d as i32);
        let tail_weight = h2d * tail(shells) / cell.powi(d as i32);

        let coarse = tent_rule(1);
        let fine = tent_rule(TRANSITION_PIECES);
        let rules = |pieces: &[(f64, f64)]| -> Vec<Vec<(f64, f64)>> {
            (0..3).map(|a| if a < d { pieces.to_vec() } else { vec![(0.0, 1.0)] }).collect()
        };
        let (coarse_rules, fine_rules) = (rules(&coarse), rules(&fine));
        let kink_rules = rules(&tent_rule(KINK_PIECES[d]));
        let lap = p * (p + 2.0 - d as f64);
        let c = spec.cutoff();
        let span = shells as isize;
        let images: Vec<[isize; 3]> = {
            let mut v = Vec::new();
            let range = |a: usize| if a < d { -span..=span } else { 0..=0 };
            for k2 in range(2) {
                for k1 in range(1) {
                    for k0 in range(0) {
                        if (k0, k1, k2) != (0, 0, 0) {
                            v.push([k0, k1, k2]);
                        }
                    }
                }
            }
            v
        };
        let weights: Vec<f64> = reps
            .par_iter()
            .map(|q| {
                let qf = [q[0] as f64, q[1] as f64, q[2] as f64];
                // Own cell: tent-weighted Gauss product rule, refined where
                // the pair region meets the cutoff transition or the kink of
                // the capped kernel.
                let near: f64 = (0..d).map(|a| (qf[a] - 1.0).max(0.0).powi(2)).sum::<f64>().sqrt() * h;
                let far_edge: f64 = (0..d).map(|a| (qf[a] + 1.0).powi(2)).sum::<f64>().sqrt() * h;
                let axis_rules = if near < c && far_edge > c {
                    &kink_rules
                } else if near < r.max(c).max(3.0 * h) && far_edge > TRANSITION_START * r {
                    &fine_rules
                } else {
                    &coarse_rules
                };
                let mut own = 0.0;
                for &(s2, w2) in &axis_rules[2] {
                    for &(s1, w1) in &axis_rules[1] {
                        for &(s0, w0) in &axis_rules[0] {
                            let x = [qf[0] + s0, qf[1] + s1, qf[2] + s2];
                            let dist = h * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                            own += w0 * w1 * w2 * k(dist) * far_fraction(dist, r);
                        }
                    }
                }
                // Translates: midpoint with the tent's second-moment correction.
                let mut far = 0.0;
                for img in &images {
                    let mut s2 = 0.0;
                    for a in 0..d {
                        let x = qf[a] + (img[a] * n as isize) as f64;
                        s2 += x * x;
                    }
                    let dist = h * s2.sqrt();
                    let corr = if dist > c { h * h / 12.0 * lap * dist.powf(-p - 2.0) } else { 0.0 };
                    far += k(dist) + corr;
                }
                h2d * (own + far) + tail_weight
            })
            .collect();

        let base = n / 2 + 1;
        let mut orbit = vec![0.0; base.pow(d as u32)];
        for (q, w) in reps.iter().zip(&weights) {
            orbit[orbit_key(n, d, *q)] = *w;
        }
        let len = n.pow(d as u32);
        let full: Vec<f64> = (0..len)
            .map(|i| {
                let m = [i % n, (i / n) % n, (i / n / n) % n];
                orbit[orbit_key(n, d, m)]
            })
            .collect();
        let total = full.iter().sum();
        KernelTile {
            d,
            n,
            near_radius: r,
            j_tau,
            j_near,
            far_mass,
            tail_bound,
            shells,
            orbit,
            full,
            total,
            spectrum: OnceLock::new(),
        }
    }

    /// Weight of orbit `key`.
    #[inline]
    pub fn orbit_weight(&self, key: usize) -> f64 {
        self.orbit[key]
    }

    pub fn orbit_len(&self) -> usize {
        self.orbit.len()
    }

    /// Weight between flat voxel indices `i` and `j`.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let mut m = 0;
        let mut stride = 1;
        let (mut a, mut b) = (i, j);
        for _ in 0..self.d {
            let x = (b % n + n - a % n) % n;
            m += x * stride;
            stride *= n;
            a /= n;
            b /= n;
        }
        self.full[m]
    }

    pub fn self_weight(&self) -> f64 {
        self.full[0]
    }

    pub fn spectrum(&self, fft: &GridFft) -> &[f64] {
        self.spectrum.get_or_init(|| fft.real_spectrum(&self.full))
    }

    /// Adds `sign · W(· − i)` to `field`.
    pub fn add_row(&self, field: &mut [f64], i: usize, sign: f64) {
        let n = self.n;
        let c = [i % n, (i / n) % n, (i / n / n) % n];
        let (n1, n2) = (if self.d > 1 { n } else { 1 }, if self.d > 2 { n } else { 1 });
        for j2 in 0..n2 {
            let m2 = (j2 + n - c[2]) % n;
            for j1 in 0..n1 {
                let m1 = (j1 + n - c[1]) % n;
                let row = (j2 * n1 + j1) * n;
                let mrow = (m2 * n1 + m1) * n;
                let split = n - c[0];
                // m0 = j0 − c0 mod n, in two contiguous runs.
                for (f, w) in field[row + c[0]..row + n].iter_mut().zip(&self.full[mrow..mrow + split]) {
                    *f += sign * w;
                }
                for (f, w) in field[row..row + c[0]].iter_mut().zip(&self.full[mrow + split..mrow + n]) {
                    *f += sign * w;
                }
            }
        }
    }
}

/// Sorted offsets `0 ≤ q₀ ≤ q₁ ≤ q₂ ≤ N/2`, one per orbit.
fn orbit_representatives(n: usize, d: usize) -> Vec<[usize; 3]> {
    let half = n / 2;
    let mut out = Vec::new();
    match d {
        1 => (0..=half).for_each(|a| out.push([a, 0, 0])),
        2 => {
            for b in 0..=half {
                for a in 0..=b {
                    out.push([a, b, 0]);
                }
            }
        }
        _ => {
            for c in 0..=half {
                for b in 0..=c {
                    for a in 0..=b {
                        out.push([a, b, c]);
                    }
                }
            }
        }
    }
    out
}

type TileKey = (u64, usize, u64, usize, u64, u64, u64);

/// Shared tile for `(spec, N, L, R)`; built on first use.
pub(crate) fn cached_tile(spec: &KernelSpec, n: usize, cell: f64, near_radius: f64, tail_tolerance: f64) -> Arc<KernelTile> {
    static CACHE: OnceLock<Mutex<HashMap<TileKey, Arc<KernelTile>>>> = OnceLock::new();
    let key = (
        spec.p().to_bits(),
        spec.d(),
        spec.tau().to_bits(),
        n,
        cell.to_bits(),
        near_radius.to_bits(),
        tail_tolerance.to_bits(),
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Arc::clone(t);
    }
    let tile = Arc::new(KernelTile::build(spec, n, cell, near_radius, tail_tolerance));
    let mut guard = cache.lock().unwrap();
    Arc::clone(guard.entry(key).or_insert(tile))
}
