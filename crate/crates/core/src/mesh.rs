//! Structured right-isosceles triangulations of the L-shaped domain and of
//! rectangles, plus point location.
//!
//! Every mesh is built on an integer lattice: vertex `(i, j)` sits at
//! `(i * hx, j * hy)` and each unit cell is split along its `(1, 1)` diagonal.
//! Boundary classification works on the integer indices, never on floating
//! point comparisons.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use thiserror::Error;

/// A point in the plane.
pub type Point2 = [f64; 2];

/// Cells per unit length on the coarsest L-shape grid.
pub const LSHAPE_BASE_CELLS: usize = 32;

/// Finest L-shape level accepted by [`build_lshape`].
pub const MAX_LSHAPE_LEVEL: u32 = 8;

const LOCATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("L-shape level {level} exceeds the supported maximum {max}")]
    ResourceLimit { level: u32, max: u32 },
    #[error("cell counts must be positive (got nx={nx}, ny={ny})")]
    ZeroCells { nx: usize, ny: usize },
    #[error("rectangle size must be positive and finite (got {width} x {height})")]
    InvalidSize { width: f64, height: f64 },
    #[error("at least one boundary side must be Dirichlet")]
    NoDirichletSide,
    #[error("the L-shaped domain only supports Dirichlet boundaries")]
    LShapeNeumann,
    #[error("domain shape and grid resolution do not match")]
    ResolutionMismatch,
    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
}

/// Boundary condition carried by a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Sides of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "bottom" => Ok(Side::Bottom),
            "top" => Ok(Side::Top),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape {
    /// `[0,1]x[0,1.5] U [1,2]x[0,1]`.
    LShape,
    /// `[0,width]x[0,height]`.
    Rect { width: f64, height: f64 },
}

/// Domain geometry plus boundary markers. Sides missing from
/// `boundary_markers` are Dirichlet.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: DomainShape,
    pub boundary_markers: BTreeMap<Side, BoundaryCondition>,
}

impl DomainSpec {
    pub fn lshape() -> Self {
        Self {
            shape: DomainShape::LShape,
            boundary_markers: BTreeMap::new(),
        }
    }

    pub fn rect(width: f64, height: f64) -> Self {
        Self {
            shape: DomainShape::Rect { width, height },
            boundary_markers: BTreeMap::new(),
        }
    }

    pub fn with_marker(mut self, side: Side, marker: BoundaryCondition) -> Self {
        self.boundary_markers.insert(side, marker);
        self
    }

    pub fn marker(&self, side: Side) -> BoundaryCondition {
        self.boundary_markers
            .get(&side)
            .copied()
            .unwrap_or(BoundaryCondition::Dirichlet)
    }

    /// True when every side carries a Dirichlet condition.
    pub fn all_dirichlet(&self) -> bool {
        Side::ALL
            .iter()
            .all(|&s| self.marker(s) == BoundaryCondition::Dirichlet)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        match self.shape {
            DomainShape::LShape => {
                if !self.all_dirichlet() {
                    return Err(MeshError::LShapeNeumann);
                }
            }
            DomainShape::Rect { width, height } => {
                if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
                    return Err(MeshError::InvalidSize { width, height });
                }
                if Side::ALL
                    .iter()
                    .all(|&s| self.marker(s) == BoundaryCondition::Neumann)
                {
                    return Err(MeshError::NoDirichletSide);
                }
            }
        }
        Ok(())
    }

    /// Area of the domain.
    pub fn area(&self) -> f64 {
        match self.shape {
            DomainShape::LShape => 2.5,
            DomainShape::Rect { width, height } => width * height,
        }
    }

    /// Counterclockwise boundary vertices.
    pub fn boundary_vertices(&self) -> Vec<Point2> {
        match self.shape {
            DomainShape::LShape => vec![
                [0.0, 0.0],
                [2.0, 0.0],
                [2.0, 1.0],
                [1.0, 1.0],
                [1.0, 1.5],
                [0.0, 1.5],
            ],
            DomainShape::Rect { width, height } => {
                vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]]
            }
        }
    }
}

/// How finely to grid a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// L-shape refinement level; `h = 1 / (32 * 2^level)`.
    Level(u32),
    /// Rectangle cell counts.
    Cells { nx: usize, ny: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: BoundaryCondition,
}

/// Conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Grid step (largest leg length).
    pub h: f64,
    locator: OnceLock<BucketGrid>,
}

/// Containing triangle and barycentric coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub triangle_index: usize,
    pub barycentric: [f64; 3],
}

impl Mesh {
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        h: f64,
    ) -> Self {
        Self {
            vertices,
            triangles,
            boundary_edges,
            h,
            locator: OnceLock::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counterclockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_coords(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Unique undirected edges, each as `(min, max)` vertex pair, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[a, b]| [a.min(b), a.max(b)])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        barycentric(&self.triangle_coords(t), p)
    }

    /// Finds the lowest-index triangle containing `p` (within a small
    /// tolerance) and the barycentric coordinates of `p` in it.
    pub fn locate_point(&self, p: Point2) -> Result<PointLocation, MeshError> {
        let grid = self.locator.get_or_init(|| BucketGrid::new(self));
        for &t in grid.candidates(p) {
            let lambda = barycentric(&self.triangle_coords(t), p);
            if lambda.iter().all(|&l| l >= -LOCATE_TOL) {
                return Ok(PointLocation {
                    triangle_index: t,
                    barycentric: lambda,
                });
            }
        }
        Err(MeshError::PointOutsideDomain { x: p[0], y: p[1] })
    }
}

/// Uniform bucket grid over the bounding box; each bucket lists, in
/// ascending order, the triangles whose padded bounding box overlaps it.
#[derive(Debug, Clone)]
struct BucketGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(mesh: &Mesh) -> Self {
        let (x0, x1) = min_max(mesh.vertices.iter().map(|v| v[0]));
        let (y0, y1) = min_max(mesh.vertices.iter().map(|v| v[1]));
        let cell = mesh.h.max(f64::MIN_POSITIVE);
        let nx = (((x1 - x0) / cell).ceil() as usize).max(1);
        let ny = (((y1 - y0) / cell).ceil() as usize).max(1);
        let mut grid = Self {
            origin: [x0, y0],
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        let pad = LOCATE_TOL * cell.max(1.0) * 16.0;
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangle_coords(t);
            let (lo_x, hi_x) = min_max(tri.iter().map(|q| q[0]));
            let (lo_y, hi_y) = min_max(tri.iter().map(|q| q[1]));
            let (i0, j0) = grid.index([lo_x - pad, lo_y - pad]);
            let (i1, j1) = grid.index([hi_x + pad, hi_y + pad]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * nx + i].push(t);
                }
            }
        }
        grid
    }

    fn index(&self, p: Point2) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp((p[0] - self.origin[0]) / self.cell, self.nx),
            clamp((p[1] - self.origin[1]) / self.cell, self.ny),
        )
    }

    fn candidates(&self, p: Point2) -> &[usize] {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return &[];
        }
        let (i, j) = self.index(p);
        &self.buckets[j * self.nx + i]
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Barycentric coordinates of `p` with respect to `tri`.
pub fn barycentric(tri: &[Point2; 3], p: Point2) -> [f64; 3] {
    let [p0, p1, p2] = *tri;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Builds the L-shaped mesh at refinement `level`.
pub fn build_lshape(level: u32) -> Result<Mesh, MeshError> {
    if level > MAX_LSHAPE_LEVEL {
        return Err(MeshError::ResourceLimit {
            level,
            max: MAX_LSHAPE_LEVEL,
        });
    }
    let n = LSHAPE_BASE_CELLS << level;
    let h = 1.0 / n as f64;
    let lattice = Lattice {
        nx: 2 * n,
        ny: 3 * n / 2,
        hx: h,
        hy: h,
    };
    // Cells to the upper right of (n, n) are outside.
    let mesh = lattice.triangulate(|i, j| i < n || j < n, |_, _| BoundaryCondition::Dirichlet);
    Ok(mesh)
}

/// Builds an `nx` by `ny` cell mesh of the rectangle in `spec`.
pub fn build_rect(nx: usize, ny: usize, spec: &DomainSpec) -> Result<Mesh, MeshError> {
    let DomainShape::Rect { width, height } = spec.shape else {
        return Err(MeshError::ResolutionMismatch);
    };
    spec.validate()?;
    if nx == 0 || ny == 0 {
        return Err(MeshError::ZeroCells { nx, ny });
    }
    let lattice = Lattice {
        nx,
        ny,
        hx: width / nx as f64,
        hy: height / ny as f64,
    };
    let mesh = lattice.triangulate(
        |_, _| true,
        |[i0, j0], [i1, j1]| {
            let side = if i0 == 0 && i1 == 0 {
                Side::Left
            } else if i0 == nx && i1 == nx {
                Side::Right
            } else if j0 == 0 && j1 == 0 {
                Side::Bottom
            } else {
                debug_assert!(j0 == ny && j1 == ny);
                Side::Top
            };
            spec.marker(side)
        },
    );
    Ok(mesh)
}

/// Builds the mesh for `spec` at the requested resolution.
pub fn build_mesh(spec: &DomainSpec, resolution: Resolution) -> Result<Mesh, MeshError> {
    spec.validate()?;
    match (spec.shape, resolution) {
        (DomainShape::LShape, Resolution::Level(level)) => build_lshape(level),
        (DomainShape::Rect { .. }, Resolution::Cells { nx, ny }) => build_rect(nx, ny, spec),
        _ => Err(MeshError::ResolutionMismatch),
    }
}

struct Lattice {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Lattice {
    /// Triangulates the cells accepted by `keep_cell`. `marker` classifies a
    /// boundary edge given its two lattice endpoints.
    fn triangulate(
        &self,
        keep_cell: impl Fn(usize, usize) -> bool,
        marker: impl Fn([usize; 2], [usize; 2]) -> BoundaryCondition,
    ) -> Mesh {
        let stride = self.nx + 1;
        let mut used = vec![false; stride * (self.ny + 1)];
        for j in 0..self.ny {
            for i in 0..self.nx {
                if keep_cell(i, j) {
                    for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                        used[(j + dj) * stride + i + di] = true;
                    }
                }
            }
        }

        let mut index = vec![usize::MAX; used.len()];
        let mut lattice_of = Vec::new();
        let mut vertices = Vec::new();
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                if used[j * stride + i] {
                    index[j * stride + i] = vertices.len();
                    lattice_of.push([i, j]);
                    vertices.push([i as f64 * self.hx, j as f64 * self.hy]);
                }
            }
        }

        let mut triangles = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !keep_cell(i, j) {
                    continue;
                }
                let a = index[j * stride + i];
                let b = index[j * stride + i + 1];
                let c = index[(j + 1) * stride + i + 1];
                let d = index[(j + 1) * stride + i];
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        // Boundary edges are those owned by a single triangle.
        let mut count: HashMap<[usize; 2], ([usize; 2], u32)> = HashMap::new();
        for &[a, b, c] in &triangles {
            for [p, q] in [[a, b], [b, c], [c, a]] {
                let entry = count.entry([p.min(q), p.max(q)]).or_insert(([p, q], 0));
                entry.1 += 1;
            }
        }
        let mut boundary_edges: Vec<BoundaryEdge> = count
            .into_values()
            .filter(|&(_, n)| n == 1)
            .map(|([p, q], _)| BoundaryEdge {
                vertices: [p, q],
                marker: marker(lattice_of[p], lattice_of[q]),
            })
            .collect();
        boundary_edges.sort_unstable_by_key(|e| e.vertices);

        Mesh::new(vertices, triangles, boundary_edges, self.hx.max(self.hy))
    }
}
