//! Boundary elements of exact planar shapes and of voxel fields, and
//! forward gaps along rays.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::VoxelSet;
use crate::slicing::{Shape, Window};

/// A piece of `∂E` with its measure and the integral of the outward
/// normal over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub center: Vec<f64>,
    /// Outward unit normal at `center`.
    pub normal: Vec<f64>,
    pub measure: f64,
    /// `∫ ν dH^{d-1}` over the element.
    pub flux: Vec<f64>,
    /// `(voxel, axis)` of the face for voxel-field elements.
    pub(crate) face: Option<(usize, usize)>,
}

/// Where boundary elements are collected.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box(Window),
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(x, center) < radius * radius,
            Region::Box(w) => w.contains(x),
        }
    }

    fn bounding_ball(&self) -> (Vec<f64>, f64) {
        match self {
            Region::Ball { center, radius } => (center.clone(), *radius),
            Region::Box(w) => {
                let c: Vec<f64> = w.lo.iter().zip(&w.hi).map(|(a, b)| 0.5 * (a + b)).collect();
                (c, 0.5 * dist2(&w.lo, &w.hi).sqrt() * (1.0 + 1e-12))
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box(w) => w.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Region::Ball { center, radius } = self {
            if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("probe radius must be positive, got {radius}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Samples per curve when locating membership changes.
const CURVE_SAMPLES: usize = 1024;
/// Side offset for membership tests, relative to the curve scale.
const SIDE_STEP: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Curve {
    /// `{x : ⟨n, x⟩ = c}`, parametrized by `n·c + t·(−n₁, n₀)`.
    Line { n: [f64; 2], c: f64 },
    /// Parametrized by angle.
    Circle { center: [f64; 2], radius: f64 },
}

impl Curve {
    fn line(n: &[f64], c: f64) -> Curve {
        if n[0] > 0.0 || (n[0] == 0.0 && n[1] > 0.0) {
            Curve::Line { n: [n[0], n[1]], c }
        } else {
            Curve::Line { n: [-n[0], -n[1]], c: -c }
        }
    }

    /// Point and primitive unit normal at parameter `t`.
    fn at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        match *self {
            Curve::Line { n, c } => ([n[0] * c - t * n[1], n[1] * c + t * n[0]], n),
            Curve::Circle { center, radius } => {
                let (s, co) = t.sin_cos();
                ([center[0] + radius * co, center[1] + radius * s], [co, s])
            }
        }
    }

    /// Parameter range inside the ball `B_R(c)`, if any.
    fn range(&self, c: &[f64], r: f64) -> Option<(f64, f64)> {
        match *self {
            Curve::Line { n, c: off } => {
                let dist = n[0] * c[0] + n[1] * c[1] - off;
                if dist.abs() >= r {
                    return None;
                }
                let t = -n[1] * c[0] + n[0] * c[1];
                let half = (r * r - dist * dist).sqrt();
                Some((t - half, t + half))
            }
            Curve::Circle { center, radius } => {
                let dd = ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt();
                if dd + radius <= r {
                    return Some((0.0, 2.0 * PI));
                }
                if dd >= r + radius || dd + r <= radius {
                    return None;
                }
                let cos = ((radius * radius + dd * dd - r * r) / (2.0 * radius * dd)).clamp(-1.0, 1.0);
                let a = cos.acos();
                let phi = (c[1] - center[1]).atan2(c[0] - center[0]);
                Some((phi - a, phi + a))
            }
        }
    }

    fn key(&self) -> [f64; 4] {
        match *self {
            Curve::Line { n, c } => [0.0, n[0], n[1], c],
            Curve::Circle { center, radius } => [1.0, center[0], center[1], radius],
        }
    }
}

/// Primitive curves of a planar shape translated by `shift`, near `B_R(c)`.
fn collect_curves(shape: &Shape, shift: [f64; 2], c: &[f64], r: f64, out: &mut Vec<Curve>) -> Result<()> {
    let along = |n: &[f64]| n[0] * shift[0] + n[1] * shift[1];
    match shape {
        Shape::Empty | Shape::Full => {}
        Shape::HalfSpace { normal, offset } => out.push(Curve::line(normal, offset + along(normal))),
        Shape::Ball { center, radius } => {
            out.push(Curve::Circle { center: [center[0] + shift[0], center[1] + shift[1]], radius: *radius })
        }
        Shape::AxisBox { lo, hi } => {
            for a in 0..2 {
                let mut e = [0.0; 2];
                e[a] = 1.0;
                out.push(Curve::line(&e, lo[a] + shift[a]));
                out.push(Curve::line(&e, hi[a] + shift[a]));
            }
        }
        Shape::Stripes { normal, half_period, phase } => {
            let base = phase + along(normal);
            let at = normal[0] * c[0] + normal[1] * c[1];
            let k0 = ((at - r - base) / half_period).floor() as i64;
            let k1 = ((at + r - base) / half_period).ceil() as i64;
            if k1 - k0 > MAX_CURVES as i64 {
                return Err(Error::config("too many stripe interfaces in the probe region"));
            }
            for k in k0..=k1 {
                out.push(Curve::line(normal, base + k as f64 * half_period));
            }
        }
        Shape::Polytope { faces } => {
            for f in faces {
                out.push(Curve::line(&f.normal, f.offset + along(&f.normal)));
            }
        }
        Shape::Union { parts } | Shape::Intersection { parts } => {
            for s in parts {
                collect_curves(s, shift, c, r, out)?;
            }
        }
        Shape::Complement { inner } => collect_curves(inner, shift, c, r, out)?,
        Shape::Periodic { cell, inner } => {
            let Some(b) = inner.bounds(2) else {
                return Err(Error::config("periodic shape needs a bounded inner shape"));
            };
            if b.is_empty() {
                return Ok(());
            }
            let k = |i: usize| {
                (
                    ((c[i] - r - shift[i] - b.hi[i]) / cell).floor() as i64,
                    ((c[i] + r - shift[i] - b.lo[i]) / cell).ceil() as i64,
                )
            };
            let (kx, ky) = (k(0), k(1));
            if (kx.1 - kx.0 + 1) * (ky.1 - ky.0 + 1) > MAX_CURVES as i64 {
                return Err(Error::config("too many periodic copies in the probe region"));
            }
            for i in kx.0..=kx.1 {
                for j in ky.0..=ky.1 {
                    let s = [shift[0] + i as f64 * cell, shift[1] + j as f64 * cell];
                    // Skip copies whose box misses the ball.
                    let gap: f64 = (0..2)
                        .map(|a| (b.lo[a] + s[a] - c[a]).max(c[a] - b.hi[a] - s[a]).max(0.0).powi(2))
                        .sum();
                    if gap < r * r {
                        collect_curves(inner, s, c, r, out)?;
                    }
                }
            }
        }
    }
    if out.len() > MAX_CURVES {
        return Err(Error::config("too many boundary curves in the probe region"));
    }
    Ok(())
}

const MAX_CURVES: usize = 100_000;

/// A maximal arc of one curve on `∂E ∩ region` with constant orientation.
#[derive(Debug, Clone, Copy)]
struct Piece {
    curve: Curve,
    t0: f64,
    t1: f64,
    /// `+1` when the primitive normal points out of `E`.
    sign: f64,
}

impl Piece {
    fn measure(&self) -> f64 {
        match self.curve {
            Curve::Line { .. } => self.t1 - self.t0,
            Curve::Circle { radius, .. } => radius * (self.t1 - self.t0),
        }
    }

    fn element(&self, t0: f64, t1: f64) -> Element {
        let (x, m) = self.curve.at(0.5 * (t0 + t1));
        let normal = vec![self.sign * m[0], self.sign * m[1]];
        let (measure, flux) = match self.curve {
            Curve::Line { .. } => (t1 - t0, vec![(t1 - t0) * normal[0], (t1 - t0) * normal[1]]),
            Curve::Circle { radius, .. } => (
                radius * (t1 - t0),
                vec![self.sign * radius * (t1.sin() - t0.sin()), self.sign * radius * (t0.cos() - t1.cos())],
            ),
        };
        Element { center: x.to_vec(), normal, measure, flux, face: None }
    }
}

/// Orientation of `∂E` at a curve point: `±1`, or 0 off the boundary or
/// outside the region.
fn status(shape: &Shape, region: &Region, curve: &Curve, t: f64, eta: f64) -> i8 {
    let (x, m) = curve.at(t);
    if !region.contains(&x) {
        return 0;
    }
    let inner = shape.contains(&[x[0] - eta * m[0], x[1] - eta * m[1]]);
    let outer = shape.contains(&[x[0] + eta * m[0], x[1] + eta * m[1]]);
    match (inner, outer) {
        (true, false) => 1,
        (false, true) => -1,
        _ => 0,
    }
}

/// Pieces this many side steps long or shorter are artifacts of the side
/// test at curve crossings.
const MIN_PIECE: f64 = 8.0;

fn same_key(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())))
}

/// Drops curves equal to an earlier one up to rounding. After sorting,
/// near-equal keys are contiguous in their leading components, so each
/// curve is compared against the kept ones back to the first that differs
/// there.
fn dedup_curves(mut curves: Vec<Curve>) -> Vec<Curve> {
    curves.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<Curve> = Vec::with_capacity(curves.len());
    for c in curves {
        let k = c.key();
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|o| {
                let ko = o.key();
                ko[0] == k[0] && (ko[1] - k[1]).abs() <= 1e-12 * (1.0 + k[1].abs())
            })
            .any(|o| same_key(&o.key(), &k));
        if !duplicate {
            kept.push(c);
        }
    }
    kept
}

fn pieces(shape: &Shape, region: &Region) -> Result<Vec<Piece>> {
    if region.dim() != 2 {
        return Err(Error::config(
            "boundary extraction of exact shapes is planar (d = 2); rasterize higher-dimensional shapes",
        ));
    }
    shape.validate(2)?;
    region.validate()?;
    let (c, r) = region.bounding_ball();
    let mut curves = Vec::new();
    collect_curves(shape, [0.0, 0.0], &c, r, &mut curves)?;
    let mut out = Vec::new();
    for curve in dedup_curves(curves) {
        let Some((a, b)) = curve.range(&c, r) else { continue };
        let eta = SIDE_STEP
            * match curve {
                Curve::Line { .. } => r,
                Curve::Circle { radius, .. } => r.min(radius),
            };
        let step = (b - a) / CURVE_SAMPLES as f64;
        let ts: Vec<f64> = (0..=CURVE_SAMPLES).map(|k| a + k as f64 * step).collect();
        let ss: Vec<i8> = ts.iter().map(|&t| status(shape, region, &curve, t, eta)).collect();
        let mut start = a;
        for k in 0..CURVE_SAMPLES {
            if ss[k] == ss[k + 1] {
                continue;
            }
            // Bisect the membership change.
            let (mut lo, mut hi) = (ts[k], ts[k + 1]);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if status(shape, region, &curve, mid, eta) == ss[k] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cut = 0.5 * (lo + hi);
            if ss[k] != 0 && cut - start > MIN_PIECE * eta {
                out.push(Piece { curve, t0: start, t1: cut, sign: ss[k] as f64 });
            }
            start = cut;
        }
        if ss[CURVE_SAMPLES] != 0 && b - start > MIN_PIECE * eta {
            out.push(Piece { curve, t0: start, t1: b, sign: ss[CURVE_SAMPLES] as f64 });
        }
    }
    Ok(out)
}

/// `∂E ∩ region` of a planar exact shape as elements of length at most
/// `mesh`, or one element per smooth piece when `mesh` is `None`.
///
/// Pieces are located by sampling every primitive curve at 1024 points
/// and bisecting membership changes, so features shorter than one sample
/// spacing can be missed.
pub fn shape_boundary(shape: &Shape, region: &Region, mesh: Option<f64>) -> Result<Vec<Element>> {
    if let Some(h) = mesh {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("boundary mesh must be positive, got {h}")));
        }
    }
    let mut out = Vec::new();
    for p in pieces(shape, region)? {
        let k = mesh.map_or(1, |h| (p.measure() / h).ceil().max(1.0) as usize);
        let dt = (p.t1 - p.t0) / k as f64;
        for i in 0..k {
            let t1 = if i + 1 == k { p.t1 } else { p.t0 + (i + 1) as f64 * dt };
            out.push(p.element(p.t0 + i as f64 * dt, t1));
        }
    }
    Ok(out)
}

/// Exact outward normal of a planar shape at the boundary point nearest
/// to `x` within distance `reach`.
pub(crate) fn shape_normal(shape: &Shape, x: &[f64], reach: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let region = Region::Ball { center: x.to_vec(), radius: reach };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for p in pieces(shape, &region)? {
        // Nearest point of the piece.
        let t = match p.curve {
            Curve::Line { n, .. } => -n[1] * x[0] + n[0] * x[1],
            Curve::Circle { center, .. } => {
                let phi = (x[1] - center[1]).atan2(x[0] - center[0]);
                let k = ((0.5 * (p.t0 + p.t1) - phi) / (2.0 * PI)).round();
                phi + 2.0 * PI * k
            }
        }
        .clamp(p.t0, p.t1);
        let (y, m) = p.curve.at(t);
        let dd = dist2(&y, x);
        if best.as_ref().map_or(true, |b| dd < b.0) {
            best = Some((dd, y.to_vec(), vec![p.sign * m[0], p.sign * m[1]]));
        }
    }
    best.map(|(_, y, n)| (y, n))
        .ok_or_else(|| Error::config(format!("no boundary of the shape within {reach} of the probe point")))
}

/// Grid position (in voxel units) of the center of the face between voxel
/// `idx` and its upper neighbour along `axis`.
fn face_center_units(v: &VoxelSet, idx: usize, axis: usize) -> Vec<f64> {
    let c = v.coords(idx);
    (0..v.dim()).map(|a| c[a] as f64 + if a == axis { 1.0 } else { 0.5 }).collect()
}

/// Outward normal at a face from a least-squares plane fit of the
/// indicator over the 5^d patches of its two voxels.
///
/// On the symmetric patch the fitted gradient is `Σ o χ / Σ o²` per axis,
/// with offsets `o` measured from the face center.
pub fn fitted_normal(v: &VoxelSet, idx: usize, axis: usize) -> Vec<f64> {
    let d = v.dim();
    let upper = v.neighbor(idx, axis, 1);
    let mut g = vec![0.0; d];
    for (base, shift) in [(idx, -0.5), (upper, 0.5)] {
        for k in 0..5usize.pow(d as u32) {
            let mut j = base;
            let mut off = [0.0; 3];
            let mut rem = k;
            for a in 0..d {
                let o = (rem % 5) as isize - 2;
                rem /= 5;
                j = v.neighbor(j, a, o);
                off[a] = o as f64 + if a == axis { shift } else { 0.0 };
            }
            if v.get(j) {
                for a in 0..d {
                    g[a] += off[a];
                }
            }
        }
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; d];
        e[axis] = if v.get(idx) { 1.0 } else { -1.0 };
        return e;
    }
    g.iter().map(|x| -x / norm).collect()
}

/// Image of `x` under the period lattice nearest to `anchor`.
fn nearest_image(x: &mut [f64], anchor: &[f64], l: f64) {
    for (xi, a) in x.iter_mut().zip(anchor) {
        *xi -= ((*xi - a) / l).round() * l;
    }
}

/// Faces of a voxel field inside `region` (periodic images allowed), with
/// fitted normals and measure `h^{d-1}|ν_axis|`, so that a digital plane
/// recovers its true area.
pub fn field_boundary(v: &VoxelSet, region: &Region) -> Result<Vec<Element>> {
    if region.dim() != v.dim() {
        return Err(Error::config(format!("region has dimension {}, field has {}", region.dim(), v.dim())));
    }
    region.validate()?;
    let (anchor, r) = region.bounding_ball();
    if let Region::Ball { .. } = region {
        if r > 0.5 * v.cell() {
            return Err(Error::config(format!("probe radius {r} exceeds half the cell {}", v.cell())));
        }
    }
    let h = v.spacing();
    let area = h.powi(v.dim() as i32 - 1);
    let mut out = Vec::new();
    for idx in 0..v.len() {
        for axis in 0..v.dim() {
            if v.get(idx) == v.get(v.neighbor(idx, axis, 1)) {
                continue;
            }
            let mut x: Vec<f64> = face_center_units(v, idx, axis).iter().map(|u| u * h).collect();
            nearest_image(&mut x, &anchor, v.cell());
            if !region.contains(&x) {
                continue;
            }
            let normal = fitted_normal(v, idx, axis);
            let measure = area * normal[axis].abs();
            let flux = normal.iter().map(|n| n * measure).collect();
            out.push(Element { center: x, normal, measure, flux, face: Some((idx, axis)) });
        }
    }
    Ok(out)
}

/// Face of `v` nearest to `x` (periodic distance): `(voxel, axis, center)`
/// with the center taken in the image nearest to `x`.
pub(crate) fn nearest_face(v: &VoxelSet, x: &[f64]) -> Option<(usize, usize, Vec<f64>)> {
    let h = v.spacing();
    let mut best: Option<(f64, usize, usize, Vec<f64>)> = None;
    for idx in 0..v.len() {
        for axis in 0..v.dim() {
            if v.get(idx) == v.get(v.neighbor(idx, axis, 1)) {
                continue;
            }
            let mut y: Vec<f64> = face_center_units(v, idx, axis).iter().map(|u| u * h).collect();
            nearest_image(&mut y, x, v.cell());
            let dd = dist2(&y, x);
            if best.as_ref().map_or(true, |b| dd < b.0) {
                best = Some((dd, idx, axis, y));
            }
        }
    }
    best.map(|(_, i, a, y)| (i, a, y))
}

/// Tolerance below which a crossing counts as the starting point itself.
const GAP_FLOOR: f64 = 1e-10;

/// Distance from the boundary point `x` to the next boundary point of an
/// exact shape along `θ`, `None` if there is none within `horizon`.
pub(crate) fn shape_gap(shape: &Shape, x: &[f64], theta: &[f64], horizon: f64) -> Option<f64> {
    let floor = GAP_FLOOR * x.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    let mut reach = 0.25f64.min(horizon);
    loop {
        let chord = shape.chord(x, theta, 0.0, reach);
        let hit = chord.iter().flat_map(|&(a, b)| [a, b]).find(|&t| t > floor && t < reach);
        if hit.is_some() || reach >= horizon {
            return hit;
        }
        reach = (2.0 * reach).min(horizon);
    }
}

/// Distance from the face `(idx, axis)` to the next face crossed by the
/// ray along `θ` in the periodic field, `None` beyond `horizon`.
pub(crate) fn field_gap(v: &VoxelSet, idx: usize, axis: usize, theta: &[f64], horizon: f64) -> Option<f64> {
    let d = v.dim();
    let n = v.n() as i64;
    let h = v.spacing();
    let x = face_center_units(v, idx, axis);
    let start = if theta[axis] >= 0.0 { v.neighbor(idx, axis, 1) } else { idx };
    let state = v.get(start);
    let sc = v.coords(start);
    let mut cell = [0i64; 3];
    let mut next = [f64::INFINITY; 3];
    let mut step = [0.0; 3];
    for a in 0..d {
        // Unwrapped start cell consistent with the face position.
        cell[a] = if a == axis && theta[axis] < 0.0 { x[a] as i64 - 1 } else { x[a].floor() as i64 };
        if theta[a] != 0.0 {
            step[a] = 1.0 / theta[a].abs();
            let edge = if theta[a] > 0.0 { (cell[a] + 1) as f64 } else { cell[a] as f64 };
            next[a] = (edge - x[a]) / theta[a];
        }
    }
    debug_assert!((0..d).all(|a| cell[a].rem_euclid(n) as usize == sc[a]));
    let limit = horizon / h;
    loop {
        let a = (0..d).min_by(|&i, &j| next[i].total_cmp(&next[j])).unwrap();
        let t = next[a];
        if t > limit {
            return None;
        }
        cell[a] += if theta[a] > 0.0 { 1 } else { -1 };
        next[a] += step[a];
        let mut c = [0usize; 3];
        for b in 0..d {
            c[b] = cell[b].rem_euclid(n) as usize;
        }
        if v.get(v.index(c)) != state {
            return Some(t * h);
        }
    }
}
