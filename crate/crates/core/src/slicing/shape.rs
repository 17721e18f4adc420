//! Exact shapes in `R^d` with exact line intersection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::config("normal vector must be nonzero and finite"));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// One face `{x : ⟨n, x⟩ < offset}` of a polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Axis-aligned bounding box; empty when `lo > hi` on some axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    fn empty(d: usize) -> Self {
        Aabb { lo: vec![f64::INFINITY; d], hi: vec![f64::NEG_INFINITY; d] }
    }
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a > b)
    }
    fn union(mut self, o: &Aabb) -> Aabb {
        for i in 0..self.lo.len().min(o.lo.len()) {
            self.lo[i] = self.lo[i].min(o.lo[i]);
            self.hi[i] = self.hi[i].max(o.hi[i]);
        }
        self
    }
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
    pub fn radius(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.25 * (b - a) * (b - a)).sum::<f64>().sqrt()
    }
}

/// A set built from primitives by union, intersection, complement and
/// lattice periodization.
///
/// Primitives are open or half-open in a way that only matters on
/// boundaries (measure zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Empty,
    Full,
    /// `{x : ⟨normal, x⟩ < offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : ⌊(⟨normal, x⟩ − phase)/half_period⌋ even}`.
    Stripes { normal: Vec<f64>, half_period: f64, phase: f64 },
    /// Intersection of the open faces.
    Polytope { faces: Vec<Face> },
    Union { parts: Vec<Shape> },
    Intersection { parts: Vec<Shape> },
    Complement { inner: Box<Shape> },
    /// Union of the translates of a bounded `inner` by `cell·Z^d`.
    Periodic { cell: f64, inner: Box<Shape> },
}

impl Shape {
    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Shape> {
        Ok(Shape::HalfSpace { normal: unit(normal)?, offset })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Shape {
        Shape::Ball { center, radius }
    }

    pub fn stripes(normal: Vec<f64>, half_period: f64, phase: f64) -> Result<Shape> {
        if !(half_period > 0.0 && half_period.is_finite()) {
            return Err(Error::config(format!("stripe half-period must be positive, got {half_period}")));
        }
        Ok(Shape::Stripes { normal: unit(normal)?, half_period, phase })
    }

    /// Convex polygon/polytope from unnormalized outward face normals.
    pub fn polytope(faces: Vec<(Vec<f64>, f64)>) -> Result<Shape> {
        let faces = faces
            .into_iter()
            .map(|(n, o)| {
                let len = dot(&n, &n).sqrt();
                Ok(Face { normal: unit(n)?, offset: o / len })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Shape::Polytope { faces })
    }

    pub fn complement(self) -> Shape {
        match self {
            Shape::Complement { inner } => *inner,
            s => Shape::Complement { inner: Box::new(s) },
        }
    }

    pub fn periodic(cell: f64, inner: Shape) -> Shape {
        Shape::Periodic { cell, inner: Box::new(inner) }
    }

    /// Checks dimensions, normalization and boundedness requirements.
    pub fn validate(&self, d: usize) -> Result<()> {
        let dim = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != d || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("{what} must have {d} finite components")));
            }
            Ok(())
        };
        let normed = |v: &[f64]| -> Result<()> {
            if (dot(v, v) - 1.0).abs() > 1e-9 {
                return Err(Error::config("normals must be unit vectors"));
            }
            Ok(())
        };
        match self {
            Shape::Empty | Shape::Full => Ok(()),
            Shape::HalfSpace { normal, .. } => {
                dim(normal, "half-space normal")?;
                normed(normal)
            }
            Shape::Ball { center, radius } => {
                dim(center, "ball center")?;
                if !(*radius >= 0.0) {
                    return Err(Error::config("ball radius must be ≥ 0"));
                }
                Ok(())
            }
            Shape::AxisBox { lo, hi } => {
                dim(lo, "box corner")?;
                dim(hi, "box corner")
            }
            Shape::Stripes { normal, half_period, .. } => {
                dim(normal, "stripe normal")?;
                normed(normal)?;
                if !(*half_period > 0.0) {
                    return Err(Error::config("stripe half-period must be positive"));
                }
                Ok(())
            }
            Shape::Polytope { faces } => faces.iter().try_for_each(|f| {
                dim(&f.normal, "face normal")?;
                normed(&f.normal)
            }),
            Shape::Union { parts } | Shape::Intersection { parts } => parts.iter().try_for_each(|s| s.validate(d)),
            Shape::Complement { inner } => inner.validate(d),
            Shape::Periodic { cell, inner } => {
                if !(*cell > 0.0) {
                    return Err(Error::config("periodic cell must be positive"));
                }
                inner.validate(d)?;
                if inner.bounds(d).is_none() {
                    return Err(Error::config("periodized shape must be bounded"));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Empty => false,
            Shape::Full => true,
            Shape::HalfSpace { normal, offset } => dot(normal, x) < *offset,
            Shape::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < radius * radius
            }
            Shape::AxisBox { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v < *b),
            Shape::Stripes { normal, half_period, phase } => {
                ((dot(normal, x) - phase) / half_period).floor().rem_euclid(2.0) == 0.0
            }
            Shape::Polytope { faces } => faces.iter().all(|f| dot(&f.normal, x) < f.offset),
            Shape::Union { parts } => parts.iter().any(|s| s.contains(x)),
            Shape::Intersection { parts } => parts.iter().all(|s| s.contains(x)),
            Shape::Complement { inner } => !inner.contains(x),
            Shape::Periodic { cell, inner } => {
                let Some(b) = inner.bounds(x.len()) else { return false };
                if b.is_empty() {
                    return false;
                }
                let ranges: Vec<(i64, i64)> = (0..x.len())
                    .map(|i| (((x[i] - b.hi[i]) / cell).floor() as i64, ((x[i] - b.lo[i]) / cell).ceil() as i64))
                    .collect();
                let mut y = x.to_vec();
                for_each_index(&ranges, |k| {
                    for i in 0..x.len() {
                        y[i] = x[i] - k[i] as f64 * cell;
                    }
                    inner.contains(&y)
                })
            }
        }
    }

    /// Bounding box of a bounded shape; `None` when unbounded.
    pub fn bounds(&self, d: usize) -> Option<Aabb> {
        match self {
            Shape::Empty => Some(Aabb::empty(d)),
            Shape::Ball { center, radius } => Some(Aabb {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            }),
            Shape::AxisBox { lo, hi } => Some(Aabb { lo: lo.clone(), hi: hi.clone() }),
            Shape::Polytope { faces } => polytope_bounds(faces, d),
            Shape::Union { parts } => {
                parts.iter().try_fold(Aabb::empty(d), |acc, s| s.bounds(d).map(|b| acc.union(&b)))
            }
            Shape::Intersection { parts } => {
                let mut out: Option<Aabb> = None;
                for b in parts.iter().filter_map(|s| s.bounds(d)) {
                    out = Some(match out {
                        None => b,
                        Some(mut o) => {
                            for i in 0..d {
                                o.lo[i] = o.lo[i].max(b.lo[i]);
                                o.hi[i] = o.hi[i].min(b.hi[i]);
                            }
                            o
                        }
                    });
                }
                out
            }
            _ => None,
        }
    }

    /// Region outside of which the shape is constant (all in or all out).
    pub fn extent(&self, d: usize) -> Option<Aabb> {
        match self {
            Shape::Full => Some(Aabb::empty(d)),
            Shape::Complement { inner } => inner.extent(d),
            Shape::Union { parts } | Shape::Intersection { parts } => {
                parts.iter().try_fold(Aabb::empty(d), |acc, s| s.extent(d).map(|b| acc.union(&b)))
            }
            s => s.bounds(d),
        }
    }

    /// The stripe family when the shape is a stripe family or its
    /// complement: `(normal, half_period, phase)` with phase shifted by
    /// one half-period for the complement.
    pub fn as_stripes(&self) -> Option<(&[f64], f64, f64)> {
        match self {
            Shape::Stripes { normal, half_period, phase } => Some((normal, *half_period, *phase)),
            Shape::Complement { inner } => match inner.as_ref() {
                Shape::Stripes { normal, half_period, phase } => Some((normal, *half_period, phase + half_period)),
                _ => None,
            },
            _ => None,
        }
    }

    /// Sorted disjoint intervals of `{t ∈ [t0, t1] : o + t·dir ∈ E}`.
    pub fn chord(&self, o: &[f64], dir: &[f64], t0: f64, t1: f64) -> Vec<(f64, f64)> {
        if t1 <= t0 {
            return Vec::new();
        }
        let clip = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let (a, b) = (a.max(t0), b.min(t1));
            if b > a {
                vec![(a, b)]
            } else {
                Vec::new()
            }
        };
        match self {
            Shape::Empty => Vec::new(),
            Shape::Full => vec![(t0, t1)],
            Shape::HalfSpace { normal, offset } => {
                let (a, b) = half_line(dot(normal, o), dot(normal, dir), *offset);
                clip(a, b)
            }
            Shape::Ball { center, radius } => {
                let w: Vec<f64> = o.iter().zip(center).map(|(a, c)| a - c).collect();
                let bq = dot(&w, dir);
                let disc = bq * bq - (dot(&w, &w) - radius * radius);
                if disc <= 0.0 {
                    return Vec::new();
                }
                let s = disc.sqrt();
                clip(-bq - s, -bq + s)
            }
            Shape::AxisBox { lo, hi } => {
                let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..o.len() {
                    if dir[i] == 0.0 {
                        if o[i] < lo[i] || o[i] >= hi[i] {
                            return Vec::new();
                        }
                    } else {
                        let (u, v) = ((lo[i] - o[i]) / dir[i], (hi[i] - o[i]) / dir[i]);
                        a = a.max(u.min(v));
                        b = b.min(u.max(v));
                    }
                }
                clip(a, b)
            }
            Shape::Polytope { faces } => {
                let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
                for f in faces {
                    let (u, v) = half_line(dot(&f.normal, o), dot(&f.normal, dir), f.offset);
                    a = a.max(u);
                    b = b.min(v);
                }
                clip(a, b)
            }
            Shape::Stripes { normal, half_period, phase } => {
                stripe_chord(dot(normal, o) - phase, dot(normal, dir), *half_period, t0, t1)
            }
            Shape::Union { parts } => {
                let mut all: Vec<(f64, f64)> = parts.iter().flat_map(|s| s.chord(o, dir, t0, t1)).collect();
                merge(&mut all)
            }
            Shape::Intersection { parts } => {
                let mut acc = vec![(t0, t1)];
                for s in parts {
                    acc = intersect(&acc, &s.chord(o, dir, t0, t1));
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            Shape::Complement { inner } => complement(&inner.chord(o, dir, t0, t1), t0, t1),
            Shape::Periodic { cell, inner } => periodic_chord(inner, *cell, o, dir, t0, t1),
        }
    }
}

/// Parameter range of `{t : a + t·b < c}`.
fn half_line(a: f64, b: f64, c: f64) -> (f64, f64) {
    if b == 0.0 {
        if a < c {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, 0.0)
        }
    } else if b > 0.0 {
        (f64::NEG_INFINITY, (c - a) / b)
    } else {
        ((c - a) / b, f64::INFINITY)
    }
}

fn stripe_chord(u0: f64, cs: f64, h: f64, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    if cs == 0.0 {
        return if (u0 / h).floor().rem_euclid(2.0) == 0.0 { vec![(t0, t1)] } else { Vec::new() };
    }
    let (ua, ub) = {
        let (x, y) = (u0 + cs * t0, u0 + cs * t1);
        (x.min(y), x.max(y))
    };
    let mut out = Vec::new();
    let mut j = (ua / (2.0 * h)).floor() as i64;
    loop {
        let (lo, hi) = (2.0 * j as f64 * h, (2.0 * j as f64 + 1.0) * h);
        if lo >= ub {
            break;
        }
        let (a, b) = ((lo - u0) / cs, (hi - u0) / cs);
        let (a, b) = (a.min(b).max(t0), a.max(b).min(t1));
        if b > a {
            out.push((a, b));
        }
        j += 1;
    }
    if cs < 0.0 {
        out.reverse();
    }
    out
}

fn periodic_chord(inner: &Shape, cell: f64, o: &[f64], dir: &[f64], t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let d = o.len();
    let Some(b) = inner.bounds(d) else { return Vec::new() };
    if b.is_empty() {
        return Vec::new();
    }
    let (c, r) = (b.center(), b.radius());
    // Cells whose translated bounding ball may meet the segment.
    let step = 0.5 * cell;
    let n_steps = ((t1 - t0) / step).ceil().max(0.0) as usize;
    let reach = r + step;
    let mut cells = BTreeSet::new();
    let mut p = vec![0.0; d];
    for m in 0..=n_steps {
        let t = (t0 + m as f64 * step).min(t1);
        for i in 0..d {
            p[i] = o[i] + t * dir[i] - c[i];
        }
        let ranges: Vec<(i64, i64)> = p
            .iter()
            .map(|x| (((x - reach) / cell).floor() as i64, ((x + reach) / cell).ceil() as i64))
            .collect();
        for_each_index(&ranges, |k| {
            cells.insert(k.to_vec());
            false
        });
    }
    let mut all = Vec::new();
    let mut shifted = vec![0.0; d];
    for k in cells {
        for i in 0..d {
            shifted[i] = o[i] - k[i] as f64 * cell;
        }
        // Distance from the translated center to the line.
        let w: Vec<f64> = shifted.iter().zip(&c).map(|(a, b)| a - b).collect();
        let along = -dot(&w, dir);
        let dist2 = dot(&w, &w) - along * along;
        if dist2 > r * r * (1.0 + 1e-12) || along < t0 - r || along > t1 + r {
            continue;
        }
        all.extend(inner.chord(&shifted, dir, t0, t1));
    }
    merge(&mut all)
}

/// Calls `f` on every integer vector in the box of inclusive ranges until it returns true.
fn for_each_index(ranges: &[(i64, i64)], mut f: impl FnMut(&[i64]) -> bool) -> bool {
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.1 < r.0) {
        return false;
    }
    loop {
        if f(&k) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == k.len() {
                return false;
            }
            k[i] += 1;
            if k[i] <= ranges[i].1 {
                break;
            }
            k[i] = ranges[i].0;
            i += 1;
        }
    }
}

pub(crate) fn merge(v: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for &(a, b) in v.iter() {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn intersect(x: &[(f64, f64)], y: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < x.len() && j < y.len() {
        let (a, b) = (x[i].0.max(y[j].0), x[i].1.min(y[j].1));
        if b > a {
            out.push((a, b));
        }
        if x[i].1 < y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn complement(x: &[(f64, f64)], t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cur = t0;
    for &(a, b) in x {
        if a > cur {
            out.push((cur, a));
        }
        cur = cur.max(b);
    }
    if t1 > cur {
        out.push((cur, t1));
    }
    out
}

/// Bounding box of a polytope from its vertices, found inside a huge
/// clipping box; `None` if some vertex lies on the clipping box.
fn polytope_bounds(faces: &[Face], d: usize) -> Option<Aabb> {
    const BIG: f64 = 1e9;
    let mut all = faces.to_vec();
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut n = vec![0.0; d];
            n[i] = s;
            all.push(Face { normal: n, offset: BIG });
        }
    }
    let n = all.len();
    let mut combos: Vec<Vec<usize>> = Vec::new();
    match d {
        1 => (0..n).for_each(|i| combos.push(vec![i])),
        2 => (0..n).for_each(|i| (i + 1..n).for_each(|j| combos.push(vec![i, j]))),
        _ => (0..n).for_each(|i| (i + 1..n).for_each(|j| (j + 1..n).for_each(|k| combos.push(vec![i, j, k])))),
    }
    let mut out = Aabb::empty(d);
    for c in combos {
        let a: Vec<Vec<f64>> = c.iter().map(|&i| all[i].normal.clone()).collect();
        let b: Vec<f64> = c.iter().map(|&i| all[i].offset).collect();
        let Some(x) = solve(a, b) else { continue };
        if all.iter().all(|f| dot(&f.normal, &x) <= f.offset * (1.0 + 1e-12) + 1e-9) {
            if x.iter().any(|v| v.abs() > 0.5 * BIG) {
                return None;
            }
            for i in 0..d {
                out.lo[i] = out.lo[i].min(x[i]);
                out.hi[i] = out.hi[i].max(x[i]);
            }
        }
    }
    Some(out)
}

/// Gaussian elimination with partial pivoting for tiny systems.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}
