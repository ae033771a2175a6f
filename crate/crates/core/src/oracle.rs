//! Exact viscosity solution for constant coefficients and nodal error norms.
//!
//! With constant `a_i`, the change of variables `y_i = x_i / a_i` turns
//! `a1sq u_1^2 + a2sq u_2^2 = 1` into `|grad u| = 1`, so the solution is the
//! Euclidean distance to the scaled boundary. Because the polygon is simply
//! connected, the unconstrained minimum over boundary segments is attained
//! by a segment visible from the point and no visibility test is needed.

use thiserror::Error;

use crate::fem::FeSpace;
use crate::mesh::{DomainSpec, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("field is undefined at DOF {0}")]
    UndefinedField(usize),
    #[error("coefficients must be positive constants (got a1sq={a1sq}, a2sq={a2sq})")]
    InvalidCoefficients { a1sq: f64, a2sq: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

const ON_BOUNDARY_TOL: f64 = 1e-12;

/// Closed polygon, counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolygon {
    pub vertices: Vec<Point2>,
}

impl BoundaryPolygon {
    pub fn new(vertices: Vec<Point2>) -> Self {
        assert!(vertices.len() >= 3, "polygon needs at least three vertices");
        Self { vertices }
    }

    pub fn from_domain(spec: &DomainSpec) -> Self {
        Self::new(spec.boundary_vertices())
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        0.5 * self
            .segments()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    /// Inside or on the boundary (within a small tolerance).
    pub fn contains(&self, p: Point2) -> bool {
        let on_edge = self
            .segments()
            .any(|(a, b)| point_segment_distance(p, a, b) <= ON_BOUNDARY_TOL);
        if on_edge {
            return true;
        }
        // Even-odd ray cast towards +x.
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn scaled(&self, s: [f64; 2]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * s[0], v[1] * s[1]])
                .collect(),
        }
    }
}

/// Euclidean distance from `p` to segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0].hypot(d[1])
}

fn check_coefficients(a1sq: f64, a2sq: f64) -> Result<[f64; 2], OracleError> {
    if !(a1sq > 0.0 && a2sq > 0.0 && a1sq.is_finite() && a2sq.is_finite()) {
        return Err(OracleError::InvalidCoefficients { a1sq, a2sq });
    }
    Ok([1.0 / a1sq.sqrt(), 1.0 / a2sq.sqrt()])
}

/// Anisotropic distance from `p` to the boundary of `poly`.
pub fn exact_u(
    p: Point2,
    poly: &BoundaryPolygon,
    a1sq: f64,
    a2sq: f64,
) -> Result<f64, OracleError> {
    let scale = check_coefficients(a1sq, a2sq)?;
    if !poly.contains(p) {
        return Err(OracleError::PointOutsideDomain { x: p[0], y: p[1] });
    }
    Ok(scaled_distance(p, poly, scale))
}

fn scaled_distance(p: Point2, poly: &BoundaryPolygon, scale: [f64; 2]) -> f64 {
    let q = [p[0] * scale[0], p[1] * scale[1]];
    poly.segments()
        .map(|(a, b)| {
            point_segment_distance(
                q,
                [a[0] * scale[0], a[1] * scale[1]],
                [b[0] * scale[0], b[1] * scale[1]],
            )
        })
        .fold(f64::INFINITY, f64::min)
}

/// The polygon in scaled coordinates `y_i = x_i / a_i`.
pub fn scaled_polygon(
    poly: &BoundaryPolygon,
    a1sq: f64,
    a2sq: f64,
) -> Result<BoundaryPolygon, OracleError> {
    Ok(poly.scaled(check_coefficients(a1sq, a2sq)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l_inf: f64,
    pub l2: f64,
    pub n_points: usize,
}

/// Nodal errors of `u` against the exact solution over the interior DOFs.
/// The discrete L2 norm weights each DOF by `∫ φ_i dx`.
pub fn error_norms(
    space: &FeSpace,
    u: &[Option<f64>],
    poly: &BoundaryPolygon,
    a1sq: f64,
    a2sq: f64,
) -> Result<ErrorReport, OracleError> {
    let scale = check_coefficients(a1sq, a2sq)?;
    let exact: Vec<f64> = space
        .dof_coords()
        .iter()
        .map(|&p| scaled_distance(p, poly, scale))
        .collect();
    nodal_errors(space, u, &exact)
}

/// Nodal errors of `u` against a reference field on another (usually finer)
/// space, sampled at this space's DOF coordinates.
pub fn error_norms_against(
    space: &FeSpace,
    u: &[Option<f64>],
    reference_space: &FeSpace,
    reference_u: &[f64],
) -> Result<ErrorReport, OracleError> {
    let reference = reference_space
        .evaluate_field(reference_u, space.dof_coords())
        .map_err(|e| match e {
            crate::fem::FemError::Mesh(crate::mesh::MeshError::PointOutsideDomain { x, y }) => {
                OracleError::PointOutsideDomain { x, y }
            }
            crate::fem::FemError::LengthMismatch { expected, got } => {
                OracleError::LengthMismatch { expected, got }
            }
            other => unreachable!("unexpected evaluation error: {other}"),
        })?;
    nodal_errors(space, u, &reference)
}

fn nodal_errors(
    space: &FeSpace,
    u: &[Option<f64>],
    exact: &[f64],
) -> Result<ErrorReport, OracleError> {
    if u.len() != space.num_dofs() {
        return Err(OracleError::LengthMismatch {
            expected: space.num_dofs(),
            got: u.len(),
        });
    }
    if let Some(i) = u.iter().position(Option::is_none) {
        return Err(OracleError::UndefinedField(i));
    }
    let weights = space.dof_integrals();
    let mut l_inf = 0.0f64;
    let mut sum = 0.0;
    let mut n_points = 0;
    for i in 0..space.num_dofs() {
        if space.is_boundary(i) {
            continue;
        }
        let e = u[i].unwrap() - exact[i];
        l_inf = l_inf.max(e.abs());
        sum += weights[i] * e * e;
        n_points += 1;
    }
    Ok(ErrorReport {
        l_inf,
        l2: sum.sqrt(),
        n_points,
    })
}
