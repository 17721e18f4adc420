//! Line slicing of exact shapes: energy, perimeter and the limit
//! functional `F̄₀` recovered from one-dimensional sections.
//!
//! All estimators integrate over lines `x_θ^⊥ + Rθ` meeting a box `Ω`:
//!
//! ```text
//! F(E)   = (2|Ω|)^{-1} ∫_S ∫_{θ^⊥} Σ_{s ∈ Ω} r(s) dx dθ
//! Per(E) = C_{1,d}^{-1} ∫_S ∫_{θ^⊥} #(∂E ∩ Ω ∩ line) dx dθ
//! F̄₀(E) = ∫_S ∫_{θ^⊥} Σ_{s ∈ Ω} |s − s⁺|^{-(p-d-1)} dx dθ
//! ```

mod sampler;
mod shape;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

pub use sampler::{LineEstimate, SamplingMode, SliceQuadrature, Window};
pub use shape::{Aabb, Face, Shape};

pub(crate) use sampler::{direction, sub_rng};
pub(crate) use shape::dot;

use crate::error::{Error, Result};
use crate::geometry1d::{periodic_charge, window_charge, ChargeMode, LineKernel, PeriodicProfile, WindowProfile};
use crate::kernel::{check_exponent, sine_cosine_moment, sphere_area, surface_constant, Extended, KernelSpec};
use crate::report::{EnergyReport, Route};

/// Interfaces of `E ∩ (o + [t0, t1]·dir)`.
pub fn line_slice(shape: &Shape, origin: &[f64], dir: &[f64], t0: f64, t1: f64) -> WindowProfile {
    profile_from_chord(&shape.chord(origin, dir, t0, t1), t0, t1, None)
}

fn profile_from_chord(chord: &[(f64, f64)], lo: f64, hi: f64, far: Option<f64>) -> WindowProfile {
    let mut boundary = Vec::with_capacity(2 * chord.len());
    for &(a, b) in chord {
        if a > lo {
            boundary.push(a);
        }
        if b < hi {
            boundary.push(b);
        }
    }
    let phase = if boundary.is_empty() { !chord.is_empty() } else { !chord.first().is_some_and(|c| c.0 <= lo) };
    WindowProfile { boundary, phase, lo, hi, far_fraction: far }
}

/// Slice used for charges and gaps: the whole line for shapes that are
/// constant outside a bounded region, otherwise `horizon` beyond the
/// window with the mean density of the slice as far field.
/// `None` flags a tangency.
fn full_slice(shape: &Shape, d: usize, o: &[f64], dir: &[f64], ta: f64, tb: f64, horizon: f64) -> Option<WindowProfile> {
    let (profile, span) = match shape.extent(d) {
        Some(ext) => {
            let (mut t0, mut t1) = (ta, tb);
            if !ext.is_empty() {
                for m in 0..1usize << d {
                    let t: f64 = (0..d)
                        .map(|i| (if m >> i & 1 == 1 { ext.hi[i] } else { ext.lo[i] } - o[i]) * dir[i])
                        .sum();
                    t0 = t0.min(t);
                    t1 = t1.max(t);
                }
            }
            let (t0, t1) = (t0 - 1.0, t1 + 1.0);
            let chord = shape.chord(o, dir, t0, t1);
            let mut w = profile_from_chord(&chord, t0, t1, None);
            (w.lo, w.hi) = (f64::NEG_INFINITY, f64::INFINITY);
            (w, t1 - t0)
        }
        None => {
            let (t0, t1) = (ta - horizon, tb + horizon);
            let chord = shape.chord(o, dir, t0, t1);
            let covered: f64 = chord.iter().map(|(a, b)| b - a).sum();
            (profile_from_chord(&chord, t0, t1, Some(covered / (t1 - t0))), t1 - t0)
        }
    };
    let tiny = 1e-13 * span;
    if profile.boundary.windows(2).any(|w| w[1] - w[0] <= tiny) {
        return None;
    }
    Some(profile)
}

/// Relative distance below which an interface counts as lying on a window face.
const FACE_SNAP: f64 = 1e-12;

/// Index range of interfaces on the part `[ta, tb]` of the line inside the
/// window, with interfaces on a window face kept only on `lo` faces.
fn in_window(b: &[f64], window: &Window, o: &[f64], dir: &[f64], ta: f64, tb: f64) -> std::ops::Range<usize> {
    let (closed_a, closed_b) = window.closed_ends(o, dir);
    let tol = FACE_SNAP * (tb - ta).max(1.0);
    let start = if closed_a { b.partition_point(|&s| s < ta - tol) } else { b.partition_point(|&s| s <= ta + tol) };
    let end = if closed_b { b.partition_point(|&s| s <= tb + tol) } else { b.partition_point(|&s| s < tb - tol) };
    start..end.max(start)
}

/// Number of integers in the range swept from `xa` to `xb`, with endpoints
/// kept according to `closed`.
fn lattice_crossings(xa: f64, xb: f64, closed: (bool, bool)) -> f64 {
    let ((lo, keep_lo), (hi, keep_hi)) = if xa <= xb { ((xa, closed.0), (xb, closed.1)) } else { ((xb, closed.1), (xa, closed.0)) };
    let tol = FACE_SNAP * (hi - lo).max(1.0);
    let interior = ((hi - tol).floor() - (lo + tol).ceil() + 1.0).max(0.0);
    let on = |x: f64, keep: bool| (keep && (x - x.round()).abs() <= tol) as u8 as f64;
    interior + on(lo, keep_lo) + on(hi, keep_hi)
}

fn check_inputs(shape: &Shape, window: &Window, d: usize, quad: &SliceQuadrature) -> Result<()> {
    if window.dim() != d {
        return Err(Error::config(format!("window has dimension {}, expected {d}", window.dim())));
    }
    shape.validate(d)?;
    quad.validate()
}

fn horizon(window: &Window, quad: &SliceQuadrature) -> f64 {
    quad.horizon.unwrap_or_else(|| 16.0 * window.lo.iter().zip(&window.hi).map(|(a, b)| b - a).fold(0.0, f64::max))
}

/// `∫_S ∫_{θ^⊥} Σ r` and `∫_S ∫_{θ^⊥} #` over interfaces in the window.
pub fn charge_integrals(
    shape: &Shape,
    window: &Window,
    spec: &KernelSpec,
    quad: &SliceQuadrature,
    mode: ChargeMode,
) -> Result<[LineEstimate; 2]> {
    let d = spec.d();
    check_inputs(shape, window, d, quad)?;
    let lk = LineKernel::new(spec, mode);
    let reach = horizon(window, quad);
    let est = match shape.as_stripes() {
        Some((normal, h, phase)) => sampler::integrate_lines(d, window, quad, |o, dir, ta, tb| {
            // Exact periodic slice: spacing h/|cos|, all charges equal.
            let cs = dot(normal, dir);
            if cs.abs() < 1e-14 {
                return Some([0.0, 0.0]);
            }
            let u0 = dot(normal, o) - phase;
            let (xa, xb) = ((u0 + cs * ta) / h, (u0 + cs * tb) / h);
            let count = lattice_crossings(xa, xb, window.closed_ends(o, dir));
            if count == 0.0 {
                return Some([0.0, 0.0]);
            }
            let simple = PeriodicProfile::simple(h / cs.abs()).ok()?;
            Some([count * periodic_charge(&simple, 0, &lk), count])
        }),
        None => sampler::integrate_lines(d, window, quad, |o, dir, ta, tb| {
            let w = full_slice(shape, d, o, dir, ta, tb, reach)?;
            let r = in_window(&w.boundary, window, o, dir, ta, tb);
            let count = r.len() as f64;
            let sum: f64 = r.map(|i| window_charge(&w, i, &lk)).sum();
            Some([sum, count])
        }),
    };
    Ok(est)
}

/// Energy per unit window volume by averaging line charges.
pub fn energy_by_slicing(shape: &Shape, window: &Window, spec: &KernelSpec, quad: &SliceQuadrature) -> Result<EnergyReport> {
    let [charges, counts] = charge_integrals(shape, window, spec, quad, ChargeMode::Tau)?;
    let vol = window.volume();
    let energy = charges.value / (2.0 * vol);
    let stderr = charges.stderr / (2.0 * vol);
    let perimeter = counts.value / surface_constant(spec.d());
    let perimeter_term = spec.j_tau().finite().map(|j| j * perimeter / vol);
    let flagged = charges.skipped > 0 || quad.tolerance.is_some_and(|t| stderr > t);
    Ok(EnergyReport {
        route: Route::Slicing,
        energy,
        perimeter_term,
        nonlocal_term: perimeter_term.map(|p| energy - p),
        perimeter: Some(perimeter),
        stderr,
        discretization: None,
        samples: charges.samples,
        seed: Some(quad.seed),
        order: None,
        flagged,
    })
}

/// Crofton estimate of `Per(E; Ω)` with its standard error.
pub fn perimeter_crofton(shape: &Shape, window: &Window, quad: &SliceQuadrature) -> Result<LineEstimate> {
    let d = window.dim();
    check_inputs(shape, window, d, quad)?;
    let [mut e] = sampler::integrate_lines(d, window, quad, |o, dir, ta, tb| {
        let w = line_slice(shape, o, dir, ta - 1.0, tb + 1.0);
        if w.boundary.windows(2).any(|p| p[1] - p[0] <= 1e-13 * (tb - ta + 2.0)) {
            return None;
        }
        Some([in_window(&w.boundary, window, o, dir, ta, tb).len() as f64])
    });
    let c = surface_constant(d);
    e.value /= c;
    e.stderr /= c;
    Ok(e)
}

/// How `F̄₀` integrates over lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F0Route {
    /// Directions on `S^{d-1}`, then offsets in `θ^⊥`.
    Directions,
    /// Random 2-planes, offsets along their normal, lines inside.
    TwoPlane,
}

/// Refinement protocol for detecting divergence of `F̄₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRule {
    /// Number of offset-grid doublings after the base level.
    pub doublings: usize,
    /// Ceiling as a multiple of the unit flat-stripe value in the window.
    pub ceiling_factor: f64,
    /// Minimal `log₂` growth per doubling that signals divergence.
    pub growth_threshold: f64,
}

impl Default for DivergenceRule {
    fn default() -> Self {
        DivergenceRule { doublings: 4, ceiling_factor: 1e6, growth_threshold: 0.25 }
    }
}

/// One level of the offset refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub offsets: usize,
    pub value: f64,
    /// `log₂(value / previous value)`.
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Report {
    /// Infinite when the refinement protocol signals divergence.
    pub value: Extended,
    /// Randomized estimate at the requested resolution.
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub ceiling: f64,
    pub trace: Vec<RefinementStep>,
}

impl F0Report {
    pub fn is_divergent(&self) -> bool {
        !self.value.is_finite()
    }
}

/// `F̄₀` of unit-spacing flat stripes per unit volume: `∫_S |θ₁|^{p-d} dθ`.
pub fn flat_reference(p: f64, d: usize) -> f64 {
    let e = p - d as f64;
    match d {
        1 => 2.0,
        _ => 2.0 * sphere_area(d - 1) * sine_cosine_moment(d as f64 - 2.0, e, 0.0, FRAC_PI_2),
    }
}

/// The limit functional `F̄₀(E, Ω)` with divergence detection.
pub fn f0bar(shape: &Shape, window: &Window, p: f64, quad: &SliceQuadrature, route: F0Route) -> Result<F0Report> {
    f0bar_with(shape, window, p, quad, route, DivergenceRule::default())
}

pub fn f0bar_with(
    shape: &Shape,
    window: &Window,
    p: f64,
    quad: &SliceQuadrature,
    route: F0Route,
    rule: DivergenceRule,
) -> Result<F0Report> {
    let d = window.dim();
    check_exponent(p, d)?;
    check_inputs(shape, window, d, quad)?;
    if route == F0Route::TwoPlane && d < 2 {
        return Err(Error::config("two-plane slicing needs d ≥ 2"));
    }
    let e = p - d as f64 - 1.0;
    let reach = horizon(window, quad);
    let line = |o: &[f64], dir: &[f64], ta: f64, tb: f64| -> Option<[f64; 1]> {
        let w = full_slice(shape, d, o, dir, ta, tb, reach)?;
        let b = &w.boundary;
        let mut acc = 0.0;
        for i in in_window(b, window, o, dir, ta, tb) {
            if i + 1 < b.len() {
                acc += (b[i + 1] - b[i]).powf(-e);
            }
            if i > 0 {
                acc += (b[i] - b[i - 1]).powf(-e);
            }
        }
        Some([0.5 * acc])
    };
    let run = |q: &SliceQuadrature| -> LineEstimate {
        let [est] = match (route, d) {
            (F0Route::TwoPlane, 3) => sampler::integrate_plane_lines(window, q, line),
            _ => sampler::integrate_lines(d, window, q, line),
        };
        est
    };

    let ceiling = rule.ceiling_factor * flat_reference(p, d) * window.volume();
    let mut trace = Vec::with_capacity(rule.doublings + 1);
    let mut divergent = false;
    for k in 0..=rule.doublings {
        let q = SliceQuadrature { offsets: quad.offsets << k, mode: SamplingMode::Midpoint, ..quad.clone() };
        let value = run(&q).value;
        let growth = trace.last().map(|prev: &RefinementStep| {
            if prev.value > 0.0 && value > 0.0 {
                (value / prev.value).log2()
            } else if value > prev.value {
                f64::INFINITY
            } else {
                0.0
            }
        });
        divergent |= value > ceiling;
        trace.push(RefinementStep { offsets: q.offsets, value, growth });
    }
    if let Some(g) = trace.last().and_then(|s| s.growth) {
        divergent |= g > rule.growth_threshold;
    }
    let est = if d == 1 { run(&SliceQuadrature { mode: SamplingMode::Midpoint, ..quad.clone() }) } else { run(quad) };
    Ok(F0Report {
        value: if divergent { Extended::Infinite } else { Extended::Finite(est.value) },
        estimate: est.value,
        stderr: est.stderr,
        samples: est.samples,
        ceiling,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_phases() {
        let ball = Shape::ball(vec![0.0, 0.0], 1.0);
        let w = line_slice(&ball, &[0.0, 0.0], &[1.0, 0.0], -3.0, 3.0);
        assert_eq!(w.boundary, vec![-1.0, 1.0]);
        assert!(w.phase);
        let w = line_slice(&ball.clone().complement(), &[0.0, 0.0], &[1.0, 0.0], -3.0, 3.0);
        assert_eq!(w.boundary, vec![-1.0, 1.0]);
        assert!(!w.phase);
        let w = line_slice(&Shape::Full, &[0.0], &[1.0], 0.0, 1.0);
        assert!(w.boundary.is_empty() && w.phase);
    }
}
