//! Excess, nonlocal curvature, direction-energy density and the stability
//! inequality sides.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boundary::{dist2, field_boundary, field_gap, shape_boundary, shape_gap, Element, Region};
use super::{BoundaryProbe, Source};
use crate::error::{Error, Result};
use crate::kernel::{check_exponent, sphere_area, KernelSpec};
use crate::num::{golden_section, mean_stderr, r_squared};
use crate::slicing::{direction, sub_rng, SamplingMode, SliceQuadrature, Window};

fn elements(source: &Source, region: &Region, mesh: Option<f64>) -> Result<Vec<Element>> {
    match source {
        Source::Shape { shape, .. } => shape_boundary(shape, region, mesh),
        Source::Field(v) => field_boundary(v, region),
    }
}

/// `(Per, ‖∫ν‖)` of a set of elements; a constant normal gives equality
/// without rounding.
fn perimeter_and_flux(el: &[Element]) -> (f64, f64) {
    let per: f64 = el.iter().map(|e| e.measure).sum();
    let flat = el.iter().all(|e| e.flux.iter().zip(&e.normal).all(|(f, n)| *f == n * e.measure));
    if flat && el.windows(2).all(|w| w[0].normal == w[1].normal) {
        return (per, per);
    }
    let d = el[0].flux.len();
    let sum: Vec<f64> = (0..d).map(|a| el.iter().map(|e| e.flux[a]).sum()).collect();
    (per, sum.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Spherical excess at a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excess {
    /// `r^{-(d-1)} (Per(E, B_r) − ‖∫_{∂E ∩ B_r} ν‖)`.
    pub value: f64,
    pub perimeter: f64,
    pub flux_norm: f64,
    pub elements: usize,
    /// Set when `B_r(x)` meets no boundary.
    pub no_boundary: bool,
}

/// Spherical excess of the probe's set in `B_r(x)`.
///
/// Exact for planar shapes (per-piece closed forms); for voxel fields the
/// boundary is the face set with fitted normals.
pub fn excess(probe: &BoundaryProbe) -> Result<Excess> {
    let el = elements(&probe.source, &probe.region(), None)?;
    if el.is_empty() {
        return Ok(Excess { value: 0.0, perimeter: 0.0, flux_norm: 0.0, elements: 0, no_boundary: true });
    }
    let (per, flux) = perimeter_and_flux(&el);
    let value = (per - flux).max(0.0) / probe.radius.powi(probe.dim() as i32 - 1);
    Ok(Excess { value, perimeter: per, flux_norm: flux, elements: el.len(), no_boundary: false })
}

/// `∫∫ ‖ν(x) − ν(y)‖² / ‖x − y‖^{p-2}` over `∂E ∩ B_r` discretized at
/// `mesh`, with pairs closer than `mesh` left out.
///
/// For voxel fields the elements are the faces and `mesh` only sets the
/// excluded diagonal.
pub fn nonlocal_curvature(probe: &BoundaryProbe, p: f64, mesh: f64) -> Result<f64> {
    if !(mesh.is_finite() && mesh > 0.0) {
        return Err(Error::config(format!("boundary mesh must be positive, got {mesh}")));
    }
    if !p.is_finite() {
        return Err(Error::config("curvature exponent p must be finite"));
    }
    let el = elements(&probe.source, &probe.region(), Some(mesh))?;
    Ok(pair_sum(&el, p, mesh))
}

fn pair_sum(el: &[Element], p: f64, mesh: f64) -> f64 {
    let m2 = mesh * mesh;
    let rows: Vec<f64> = (0..el.len())
        .into_par_iter()
        .map(|i| {
            let a = &el[i];
            let mut acc = 0.0;
            for b in &el[i + 1..] {
                let jump = dist2(&a.normal, &b.normal);
                if jump == 0.0 {
                    continue;
                }
                let r2 = dist2(&a.center, &b.center);
                if r2 < m2 {
                    continue;
                }
                acc += a.measure * b.measure * jump * r2.powf(-0.5 * (p - 2.0));
            }
            acc
        })
        .collect();
    2.0 * rows.iter().sum::<f64>()
}

/// One refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureStep {
    pub mesh: f64,
    pub value: f64,
    pub elements: usize,
}

/// Fit `value ≈ a·g(ε) + b` with `g = log(1/ε)` or `g = ε^{-β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `β` for the power law, 0 for the logarithm.
    pub exponent: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum CurvatureVerdict {
    /// Every level is exactly zero.
    Zero,
    /// The last refinement changed the value by less than the tolerance and
    /// changes are shrinking.
    Convergent { relative_change: f64 },
    /// Growth fitted by a logarithm in `1/ε`.
    Logarithmic { fit: GrowthFit },
    /// Growth fitted by a power of `1/ε`.
    Power { fit: GrowthFit },
}

impl CurvatureVerdict {
    pub fn is_divergent(&self) -> bool {
        matches!(self, CurvatureVerdict::Logarithmic { .. } | CurvatureVerdict::Power { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CurvatureVerdict::Zero => "zero",
            CurvatureVerdict::Convergent { .. } => "convergent",
            CurvatureVerdict::Logarithmic { .. } => "divergent-log",
            CurvatureVerdict::Power { .. } => "divergent-power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTrace {
    pub steps: Vec<CurvatureStep>,
    pub log_fit: GrowthFit,
    pub power_fit: GrowthFit,
    pub verdict: CurvatureVerdict,
}

/// Relative change below which a refinement counts as converged.
const CONVERGENCE_TOL: f64 = 0.02;
/// Smallest power exponent reported as a power law.
const MIN_POWER: f64 = 0.1;

fn fit_with(xs: &[f64], ys: &[f64], g: impl Fn(f64) -> f64, exponent: f64) -> (GrowthFit, f64) {
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let n = gs.len() as f64;
    let (mg, my) = (gs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = gs.iter().map(|x| (x - mg).powi(2)).sum();
    let sxy: f64 = gs.iter().zip(ys).map(|(x, y)| (x - mg) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mg;
    let fitted: Vec<f64> = gs.iter().map(|x| slope * x + intercept).collect();
    let sse = fitted.iter().zip(ys).map(|(f, y)| (f - y).powi(2)).sum();
    (GrowthFit { exponent, slope, intercept, r_squared: r_squared(ys, &fitted) }, sse)
}

/// Evaluates the curvature integral at `mesh, mesh/2, …` (`halvings`
/// halvings) and classifies its behaviour.
///
/// Both `a·log(1/ε) + b` and `a·ε^{-β} + b` are fitted; the power law is
/// preferred only when `β ≥ 0.1` and it cuts the squared residual tenfold,
/// since small `β` mimics the logarithm.
pub fn refine_curvature(probe: &BoundaryProbe, p: f64, mesh: f64, halvings: usize) -> Result<CurvatureTrace> {
    if halvings < 2 {
        return Err(Error::config("curvature refinement needs at least two halvings"));
    }
    let mut steps = Vec::with_capacity(halvings + 1);
    for k in 0..=halvings {
        let eps = mesh / (1u64 << k) as f64;
        let el = elements(&probe.source, &probe.region(), Some(eps))?;
        steps.push(CurvatureStep { mesh: eps, value: pair_sum(&el, p, eps), elements: el.len() });
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.mesh).collect();
    let ys: Vec<f64> = steps.iter().map(|s| s.value).collect();
    let (log_fit, log_sse) = fit_with(&xs, &ys, |e| -e.ln(), 0.0);
    let power_sse = |beta: f64| fit_with(&xs, &ys, |e| e.powf(-beta), beta).1;
    let grid_best = (1..=80).map(|k| 0.05 * k as f64).min_by(|a, b| power_sse(*a).total_cmp(&power_sse(*b))).unwrap();
    let beta = golden_section(power_sse, (grid_best - 0.05).max(1e-3), grid_best + 0.05, 1e-6).x;
    let (power_fit, power_sse) = fit_with(&xs, &ys, |e| e.powf(-beta), beta);

    let n = ys.len();
    let verdict = if ys.iter().all(|&y| y == 0.0) {
        CurvatureVerdict::Zero
    } else {
        let (last, prev) = (ys[n - 1] - ys[n - 2], ys[n - 2] - ys[n - 3]);
        let relative_change = (last / ys[n - 1]).abs();
        if relative_change < CONVERGENCE_TOL && last.abs() < 0.9 * prev.abs() {
            CurvatureVerdict::Convergent { relative_change }
        } else if beta >= MIN_POWER && power_sse < 0.1 * log_sse {
            CurvatureVerdict::Power { fit: power_fit }
        } else {
            CurvatureVerdict::Logarithmic { fit: log_fit }
        }
    };
    Ok(CurvatureTrace { steps, log_fit, power_fit, verdict })
}

/// The `(τ, δ)` truncation of the density: gaps at least `δ` are dropped
/// and `r^{p-d-1}` is capped below by `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub tau: f64,
    pub delta: f64,
}

impl Truncation {
    fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0 && self.delta > 0.0) {
            return Err(Error::config(format!("truncation needs τ ≥ 0 and δ > 0, got τ = {}, δ = {}", self.tau, self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Rays cast.
    pub samples: usize,
}

/// Default reach of a ray for exact shapes, and in cell lengths for fields.
const SHAPE_HORIZON: f64 = 1e4;
const FIELD_HORIZON_CELLS: f64 = 16.0;

/// Per-replicate estimates of `∫_S |⟨ν, θ⟩| f(r_θ) dθ`, with directions
/// paired with their antipodes.
fn density_replicates<G>(d: usize, normal: &[f64], quad: &SliceQuadrature, weight: impl Fn(f64) -> f64 + Sync, gap: G) -> Vec<f64>
where
    G: Fn(&[f64]) -> Option<f64> + Sync,
{
    let term = |theta: &[f64]| -> f64 {
        let c: f64 = theta.iter().zip(normal).map(|(a, b)| a * b).sum();
        match gap(theta) {
            Some(r) if c != 0.0 => c.abs() * weight(r),
            _ => 0.0,
        }
    };
    if d == 1 {
        return vec![term(&[1.0]) + term(&[-1.0])];
    }
    let n = quad.directions;
    (0..quad.replicate_count())
        .map(|rep| {
            let mut shared = sub_rng(quad.seed, rep as u64, u64::MAX);
            let (su, sv) = match quad.mode {
                SamplingMode::Midpoint => (0.5, 0.5),
                _ => (shared.gen::<f64>(), shared.gen::<f64>()),
            };
            let vals: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let u = match quad.mode {
                        SamplingMode::StratifiedRandom => sub_rng(quad.seed, rep as u64, i as u64).gen(),
                        _ => su,
                    };
                    let theta = direction(d, i, n, u, sv);
                    let back: Vec<f64> = theta.iter().map(|x| -x).collect();
                    term(&theta) + term(&back)
                })
                .collect();
            vals.iter().sum::<f64>() * sphere_area(d) / (2.0 * n as f64)
        })
        .collect()
}

fn weight_fn(p: f64, d: usize, trunc: Option<Truncation>) -> impl Fn(f64) -> f64 + Sync {
    let e = p - d as f64 - 1.0;
    move |r: f64| match trunc {
        None => r.powf(-e),
        Some(t) if r < t.delta => 1.0 / t.tau.max(r.powf(e)),
        Some(_) => 0.0,
    }
}

fn ray_gap<'a>(source: &'a Source, x: &'a [f64], face: Option<(usize, usize)>, horizon: Option<f64>) -> Result<impl Fn(&[f64]) -> Option<f64> + Sync + 'a> {
    let (shape, field) = match *source {
        Source::Shape { shape, .. } => (Some(shape), None),
        Source::Field(v) => (None, Some(v)),
    };
    if field.is_some() && face.is_none() {
        return Err(Error::config("voxel-field rays must start on a face"));
    }
    let reach = horizon.unwrap_or(match field {
        Some(v) => FIELD_HORIZON_CELLS * v.cell(),
        None => SHAPE_HORIZON,
    });
    Ok(move |theta: &[f64]| match (shape, field, face) {
        (Some(s), _, _) => shape_gap(s, x, theta, reach),
        (_, Some(v), Some((idx, axis))) => field_gap(v, idx, axis, theta, reach),
        _ => None,
    })
}

/// Direction-energy density at the probe point, untruncated or with the
/// `(τ, δ)` truncation. Rays without a forward crossing contribute 0.
pub fn e_density(probe: &BoundaryProbe, p: f64, quad: &SliceQuadrature, trunc: Option<Truncation>) -> Result<DensityEstimate> {
    let d = probe.dim();
    check_exponent(p, d)?;
    quad.validate()?;
    if let Some(t) = trunc {
        t.validate()?;
    }
    let gap = ray_gap(&probe.source, &probe.point, probe.face, quad.horizon)?;
    let reps = density_replicates(d, &probe.normal, quad, weight_fn(p, d, trunc), gap);
    let (value, stderr) = mean_stderr(&reps);
    let stderr = if reps.len() < 2 { 0.0 } else { stderr };
    Ok(DensityEstimate { value, stderr, samples: reps.len() * 2 * quad.directions.max(1) })
}

/// Inputs of the stability inequality on a slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySetup {
    /// Gap gate of the truncated density.
    pub delta: f64,
    /// The slab `[0,L)^{d-1} × (−δ, δ)` or any box.
    pub slab: Window,
    /// Caller-chosen constant in front of the deficit.
    pub m1: f64,
    /// Element length for exact shapes.
    pub mesh: f64,
    pub quad: SliceQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilitySides {
    /// `∫_{∂E ∩ slab} e_{τ,δ}`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub perimeter: f64,
    pub flux_norm: f64,
    /// `Per(E; slab) − ‖∫ ν‖`.
    pub deficit: f64,
    /// `m1 · deficit`.
    pub rhs: f64,
    pub elements: usize,
}

/// Both sides of `∫ e_{τ,δ} ≥ M₁ (Per − ‖∫ν‖)` on the slab, with `τ` and
/// `p` from `kspec`. No inequality is asserted.
pub fn stability_sides(source: &Source, kspec: &KernelSpec, setup: &StabilitySetup) -> Result<StabilitySides> {
    let d = source.dim();
    if kspec.d() != d || setup.slab.dim() != d {
        return Err(Error::config("kernel, slab and set dimensions differ"));
    }
    let trunc = Truncation { tau: kspec.tau(), delta: setup.delta };
    trunc.validate()?;
    setup.quad.validate()?;
    if !(setup.m1.is_finite() && setup.m1 >= 0.0) {
        return Err(Error::config(format!("M₁ must be nonnegative, got {}", setup.m1)));
    }
    let el = elements(source, &Region::Box(setup.slab.clone()), Some(setup.mesh))?;
    if el.is_empty() {
        return Ok(StabilitySides { lhs: 0.0, lhs_stderr: 0.0, perimeter: 0.0, flux_norm: 0.0, deficit: 0.0, rhs: 0.0, elements: 0 });
    }
    let (per, flux) = perimeter_and_flux(&el);
    let weight = weight_fn(kspec.p(), d, Some(trunc));
    let per_element = el
        .iter()
        .map(|e| {
            let gap = ray_gap(source, &e.center, e.face, setup.quad.horizon)?;
            Ok(density_replicates(d, &e.normal, &setup.quad, &weight, gap).into_iter().map(|v| v * e.measure).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let reps: Vec<f64> = (0..per_element[0].len()).map(|r| per_element.iter().map(|v| v[r]).sum()).collect();
    let (lhs, se) = mean_stderr(&reps);
    let deficit = (per - flux).max(0.0);
    Ok(StabilitySides {
        lhs,
        lhs_stderr: if reps.len() < 2 || lhs == 0.0 { 0.0 } else { se },
        perimeter: per,
        flux_norm: flux,
        deficit,
        rhs: setup.m1 * deficit,
        elements: el.len(),
    })
}
