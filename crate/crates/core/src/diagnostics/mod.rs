//! Rigidity-side quantities at boundary points: spherical excess, the
//! nonlocal curvature double integral, the direction-energy density
//!
//! ```text
//! e(x)      = ∫_S |⟨ν(x), θ⟩| r_θ(x)^{-(p-d-1)} dθ
//! e_{τ,δ}(x) = ∫_S |⟨ν(x), θ⟩| 1[r_θ < δ] / max(τ, r_θ^{p-d-1}) dθ
//! ```
//!
//! with `r_θ(x)` the distance to the next boundary point along `θ`, and
//! both sides of the stability inequality on a slab.
//!
//! Exact shapes are handled in the plane through their primitive curves;
//! voxel fields through their faces with plane-fitted normals.

mod boundary;
mod measures;

pub use boundary::{field_boundary, fitted_normal, shape_boundary, Element, Region};
pub use measures::{
    e_density, excess, nonlocal_curvature, refine_curvature, stability_sides, CurvatureStep, CurvatureTrace,
    CurvatureVerdict, DensityEstimate, Excess, GrowthFit, StabilitySetup, StabilitySides, Truncation,
};

use crate::error::{Error, Result};
use crate::lattice::VoxelSet;
use crate::slicing::Shape;

/// The set a probe looks at.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Shape { shape: &'a Shape, d: usize },
    Field(&'a VoxelSet),
}

impl Source<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Source::Shape { d, .. } => *d,
            Source::Field(v) => v.dim(),
        }
    }
}

/// A boundary point with its outward normal and a probe radius.
#[derive(Debug, Clone)]
pub struct BoundaryProbe<'a> {
    pub source: Source<'a>,
    pub point: Vec<f64>,
    /// Outward unit normal.
    pub normal: Vec<f64>,
    pub radius: f64,
    face: Option<(usize, usize)>,
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::config(format!("probe radius must be positive, got {r}")));
    }
    Ok(())
}

impl<'a> BoundaryProbe<'a> {
    /// Probe of a planar shape at the boundary point nearest to `point`
    /// (within `radius`), with the exact normal there.
    pub fn on_shape(shape: &'a Shape, point: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let (x, normal) = boundary::shape_normal(shape, &point, radius)?;
        Ok(BoundaryProbe { source: Source::Shape { shape, d: 2 }, point: x, normal, radius, face: None })
    }

    /// Probe of a shape in any dimension with a caller-supplied normal.
    pub fn with_normal(shape: &'a Shape, point: Vec<f64>, normal: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let d = point.len();
        shape.validate(d)?;
        if normal.len() != d {
            return Err(Error::config(format!("probe normal needs {d} components, got {}", normal.len())));
        }
        let len = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::config("probe normal must be nonzero"));
        }
        let normal = normal.iter().map(|x| x / len).collect();
        Ok(BoundaryProbe { source: Source::Shape { shape, d }, point, normal, radius, face: None })
    }

    /// Probe of a voxel field at the face nearest to `point`, which must lie
    /// within one voxel of it; the normal is plane-fitted.
    pub fn on_field(field: &'a VoxelSet, point: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        if point.len() != field.dim() {
            return Err(Error::config(format!("probe point needs {} components", field.dim())));
        }
        let Some((idx, axis, x)) = boundary::nearest_face(field, &point) else {
            return Err(Error::config("field has no boundary"));
        };
        let h = field.spacing();
        if boundary::dist2(&x, &point) > h * h {
            return Err(Error::config(format!("probe point is farther than one voxel ({h}) from the boundary")));
        }
        let normal = fitted_normal(field, idx, axis);
        Ok(BoundaryProbe { source: Source::Field(field), point: x, normal, radius, face: Some((idx, axis)) })
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub(crate) fn region(&self) -> Region {
        Region::Ball { center: self.point.clone(), radius: self.radius }
    }
}
