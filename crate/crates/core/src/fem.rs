//! Lagrange finite-element spaces and assembly of the diffusion-reaction
//! operator `alpha^2 K + M`, where
//!
//! ```text
//! K_ij = ∫ (a1sq ∂1φ_j ∂1φ_i + a2sq ∂2φ_j ∂2φ_i) dx,   M_ij = ∫ φ_j φ_i dx.
//! ```
//!
//! Dirichlet DOFs carry the value 1 and are eliminated; Neumann edges add
//! nothing.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::element::{AffineMap, LagrangeElement};
use crate::mesh::{BoundaryCondition, Mesh, MeshError, Point2};
use crate::quadrature::TriangleRule;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("unsupported element degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),
    #[error("mass lumping is only supported for degree 1 (got degree {degree})")]
    LumpingUnsupported { degree: usize },
    #[error("coefficient {value} at ({x}, {y}) is not strictly positive")]
    NonPositiveCoefficient { x: f64, y: f64, value: f64 },
    #[error("alpha must be positive and finite (got {0})")]
    InvalidAlpha(f64),
    #[error("expected {expected} DOF values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// One squared coefficient `a_i^2(x)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Variable(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn eval(&self, p: Point2) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Variable(f) => f(p),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Variable(_) => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Variable(_) => write!(f, "Variable(..)"),
        }
    }
}

/// Squared anisotropy coefficients of the eikonal and diffusion operators.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub a1sq: Coefficient,
    pub a2sq: Coefficient,
}

impl CoefficientField {
    pub fn constant(a1sq: f64, a2sq: f64) -> Self {
        Self {
            a1sq: Coefficient::Constant(a1sq),
            a2sq: Coefficient::Constant(a2sq),
        }
    }

    pub fn isotropic() -> Self {
        Self::constant(1.0, 1.0)
    }

    pub fn constant_values(&self) -> Option<(f64, f64)> {
        Some((self.a1sq.constant()?, self.a2sq.constant()?))
    }

    fn eval_checked(&self, p: Point2) -> Result<[f64; 2], FemError> {
        let values = [self.a1sq.eval(p), self.a2sq.eval(p)];
        for value in values {
            if !(value > 0.0 && value.is_finite()) {
                return Err(FemError::NonPositiveCoefficient {
                    x: p[0],
                    y: p[1],
                    value,
                });
            }
        }
        Ok(values)
    }
}

/// Lagrange space of degree 1..=3 over a mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    element: LagrangeElement,
    dof_coords: Vec<Point2>,
    cell_dofs: Vec<usize>,
    boundary: Vec<bool>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self, FemError> {
        if !(1..=3).contains(&degree) {
            return Err(FemError::UnsupportedDegree(degree));
        }
        let element = LagrangeElement::new(degree);
        let nv = mesh.num_vertices();
        let per_edge = element.edge_nodes_per_edge();
        let per_cell = element.num_interior_nodes();
        let nodes = element.num_nodes();

        let edges = mesh.edges();
        let edge_id: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        let ndofs = nv + per_edge * edges.len() + per_cell * mesh.num_triangles();

        let mut dof_coords = vec![[f64::NAN; 2]; ndofs];
        dof_coords[..nv].copy_from_slice(&mesh.vertices);
        let mut cell_dofs = Vec::with_capacity(nodes * mesh.num_triangles());

        for (t, tri) in mesh.triangles.iter().enumerate() {
            let coords = mesh.triangle_coords(t);
            let start = cell_dofs.len();
            cell_dofs.extend_from_slice(tri);
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                let (ga, gb) = (tri[a], tri[b]);
                let base = nv + per_edge * edge_id[&[ga.min(gb), ga.max(gb)]];
                for s in 1..=per_edge {
                    let offset = if ga < gb { s - 1 } else { per_edge - s };
                    cell_dofs.push(base + offset);
                }
            }
            let interior_base = nv + per_edge * edges.len() + per_cell * t;
            cell_dofs.extend(interior_base..interior_base + per_cell);

            for (local, &g) in cell_dofs[start..].iter().enumerate() {
                if dof_coords[g][0].is_nan() {
                    let l = element.node_barycentric(local);
                    dof_coords[g] = [
                        l[0] * coords[0][0] + l[1] * coords[1][0] + l[2] * coords[2][0],
                        l[0] * coords[0][1] + l[1] * coords[1][1] + l[2] * coords[2][1],
                    ];
                }
            }
        }

        let mut boundary = vec![false; ndofs];
        for edge in &mesh.boundary_edges {
            if edge.marker != BoundaryCondition::Dirichlet {
                continue;
            }
            let [p, q] = edge.vertices;
            boundary[p] = true;
            boundary[q] = true;
            let base = nv + per_edge * edge_id[&[p.min(q), p.max(q)]];
            for k in 0..per_edge {
                boundary[base + k] = true;
            }
        }

        Ok(Self {
            mesh,
            element,
            dof_coords,
            cell_dofs,
            boundary,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.element.num_nodes()
    }

    pub fn dof_coords(&self) -> &[Point2] {
        &self.dof_coords
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.dofs_per_cell();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    /// DOFs on Dirichlet edges, ascending.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs()).filter(|&i| self.boundary[i]).collect()
    }

    /// DOFs not on Dirichlet edges, ascending.
    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs())
            .filter(|&i| !self.boundary[i])
            .collect()
    }

    /// `∫ φ_i dx` for every DOF (the row sums of the consistent mass).
    pub fn dof_integrals(&self) -> Vec<f64> {
        let rule = TriangleRule::with_degree(self.degree());
        let mut reference = vec![0.0; self.dofs_per_cell()];
        for (&l, &w) in rule.points.iter().zip(&rule.weights) {
            for (r, phi) in reference.iter_mut().zip(self.element.values(l)) {
                *r += w * phi;
            }
        }
        let mut out = vec![0.0; self.num_dofs()];
        for t in 0..self.mesh.num_triangles() {
            let area = self.mesh.signed_area(t).abs();
            for (&d, r) in self.cell_dofs(t).iter().zip(&reference) {
                out[d] += area * r;
            }
        }
        out
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point2) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Evaluates the field with DOF values `values` at `points`.
    pub fn evaluate_field(&self, values: &[f64], points: &[Point2]) -> Result<Vec<f64>, FemError> {
        self.check_len(values.len())?;
        points
            .iter()
            .map(|&p| {
                let loc = self.mesh.locate_point(p)?;
                let basis = self.element.values(loc.barycentric);
                Ok(self
                    .cell_dofs(loc.triangle_index)
                    .iter()
                    .zip(basis)
                    .map(|(&d, phi)| values[d] * phi)
                    .sum())
            })
            .collect()
    }

    fn check_len(&self, got: usize) -> Result<(), FemError> {
        if got != self.num_dofs() {
            return Err(FemError::LengthMismatch {
                expected: self.num_dofs(),
                got,
            });
        }
        Ok(())
    }
}

/// Square dense block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseBlock {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }
}

/// Local stiffness (already scaled by `alpha^2`) and consistent mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub stiffness: DenseBlock,
    pub mass: DenseBlock,
}

/// Precomputed basis data on the reference element.
struct ElementIntegrator {
    element: LagrangeElement,
    rule: TriangleRule,
    gradients: Vec<Vec<[f64; 2]>>,
    /// `∫ ∂_a φ_i ∂_b φ_j` over the reference triangle divided by its area,
    /// for `(a, b)` in `{(0,0), (0,1), (1,0), (1,1)}`.
    grad_products: [DenseBlock; 4],
    reference_mass: DenseBlock,
}

impl ElementIntegrator {
    fn new(degree: usize) -> Self {
        let element = LagrangeElement::new(degree);
        // Exact for the mass integrand and for stiffness with linearly
        // varying coefficients.
        let rule = TriangleRule::with_degree(2 * degree + 1);
        let values: Vec<_> = rule.points.iter().map(|&l| element.values(l)).collect();
        let gradients: Vec<_> = rule
            .points
            .iter()
            .map(|&l| element.reference_gradients(l))
            .collect();
        let n = element.num_nodes();
        let mut grad_products = std::array::from_fn(|_| DenseBlock::zeros(n));
        let mut reference_mass = DenseBlock::zeros(n);
        for (q, &w) in rule.weights.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    reference_mass.add(i, j, w * values[q][i] * values[q][j]);
                    for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                        grad_products[k].add(i, j, w * gradients[q][i][a] * gradients[q][j][b]);
                    }
                }
            }
        }
        Self {
            element,
            rule,
            gradients,
            grad_products,
            reference_mass,
        }
    }

    /// Unscaled anisotropic stiffness and consistent mass on `tri`.
    fn integrate(
        &self,
        tri: &[Point2; 3],
        coeff: &CoefficientField,
    ) -> Result<(DenseBlock, DenseBlock), FemError> {
        let map = AffineMap::new(tri);
        let area = map.area();
        let n = self.element.num_nodes();
        let mut stiffness = DenseBlock::zeros(n);
        let mut mass = DenseBlock::zeros(n);
        for (m, r) in mass.data.iter_mut().zip(&self.reference_mass.data) {
            *m = area * r;
        }

        let g = map.inv_t;
        if coeff.constant_values().is_some() {
            let [c1, c2] = coeff.eval_checked(tri[0])?;
            // Physical gradient component d is sum_a g[d][a] * ref_grad[a].
            let mut weights = [0.0; 4];
            for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                weights[k] = area * (c1 * g[0][a] * g[0][b] + c2 * g[1][a] * g[1][b]);
            }
            for (k, block) in self.grad_products.iter().enumerate() {
                for (s, r) in stiffness.data.iter_mut().zip(&block.data) {
                    *s += weights[k] * r;
                }
            }
        } else {
            for (q, (&lambda, &w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                let [c1, c2] = coeff.eval_checked(map.to_physical(lambda))?;
                let phys: Vec<[f64; 2]> = self.gradients[q]
                    .iter()
                    .map(|&gr| map.gradient(gr))
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        let v = c1 * phys[i][0] * phys[j][0] + c2 * phys[i][1] * phys[j][1];
                        stiffness.add(i, j, area * w * v);
                    }
                }
            }
        }
        Ok((stiffness, mass))
    }
}

/// Local matrices of the bilinear form on one triangle: `alpha^2` times the
/// anisotropic stiffness, and the consistent mass.
pub fn element_matrices(
    tri: &[Point2; 3],
    coeff: &CoefficientField,
    alpha: f64,
    degree: usize,
) -> Result<ElementMatrices, FemError> {
    if !(1..=3).contains(&degree) {
        return Err(FemError::UnsupportedDegree(degree));
    }
    check_alpha(alpha)?;
    let (mut stiffness, mass) = ElementIntegrator::new(degree).integrate(tri, coeff)?;
    for s in &mut stiffness.data {
        *s *= alpha * alpha;
    }
    Ok(ElementMatrices { stiffness, mass })
}

fn check_alpha(alpha: f64) -> Result<(), FemError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FemError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Alpha-independent global operators on the full DOF set. Both matrices
/// share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct GlobalOperators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

impl GlobalOperators {
    pub fn assemble(space: &FeSpace, coeff: &CoefficientField) -> Result<Self, FemError> {
        let integrator = ElementIntegrator::new(space.degree());
        let n = space.dofs_per_cell();
        let ntri = space.mesh().num_triangles();
        let mut k_triplets = Vec::with_capacity(ntri * n * n);
        let mut m_triplets = Vec::with_capacity(ntri * n * n);
        for t in 0..ntri {
            let (k_local, m_local) =
                integrator.integrate(&space.mesh().triangle_coords(t), coeff)?;
            let dofs = space.cell_dofs(t);
            for i in 0..n {
                for j in 0..n {
                    k_triplets.push((dofs[i], dofs[j], k_local.get(i, j)));
                    m_triplets.push((dofs[i], dofs[j], m_local.get(i, j)));
                }
            }
        }
        let ndofs = space.num_dofs();
        Ok(Self {
            stiffness: CsrMatrix::from_triplets(ndofs, &k_triplets),
            mass: CsrMatrix::from_triplets(ndofs, &m_triplets),
        })
    }

    /// Row sums of the consistent mass, i.e. `∫ φ_i dx`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        self.mass.row_sums()
    }

    /// Full operator `alpha^2 K + M`, with `M` lumped on request.
    pub fn operator(&self, alpha: f64, lumping: bool) -> CsrMatrix {
        let a2 = alpha * alpha;
        if lumping {
            let diag = CsrMatrix::from_diagonal(&self.lumped_mass());
            self.stiffness.linear_combination(a2, &diag, 1.0)
        } else {
            self.stiffness.linear_combination(a2, &self.mass, 1.0)
        }
    }
}

/// The Dirichlet-reduced system for interior DOFs.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub full_dim: usize,
    /// Interior index -> global DOF.
    pub interior: Vec<usize>,
    /// Global DOF -> interior index, `None` on Dirichlet DOFs.
    pub global_to_interior: Vec<Option<usize>>,
    pub lumped: bool,
}

impl AssembledSystem {
    /// Builds the reduced system for boundary value 1 from the global
    /// operators.
    pub fn from_operators(
        space: &FeSpace,
        ops: &GlobalOperators,
        alpha: f64,
        lumping: bool,
    ) -> Result<Self, FemError> {
        check_alpha(alpha)?;
        if lumping && space.degree() > 1 {
            return Err(FemError::LumpingUnsupported {
                degree: space.degree(),
            });
        }
        let full = ops.operator(alpha, lumping);
        let interior = space.interior_dofs();
        let (matrix, dropped) = full.restrict(&interior);
        // Boundary value 1: rhs = -A_IB * 1.
        let rhs = dropped.iter().map(|s| -s).collect();
        let mut global_to_interior = vec![None; space.num_dofs()];
        for (k, &g) in interior.iter().enumerate() {
            global_to_interior[g] = Some(k);
        }
        Ok(Self {
            matrix,
            rhs,
            full_dim: space.num_dofs(),
            interior,
            global_to_interior,
            lumped: lumping,
        })
    }

    /// Full DOF vector: `x` on interior DOFs, 1 on Dirichlet DOFs.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.interior.len());
        let mut full = vec![1.0; self.full_dim];
        for (&g, &v) in self.interior.iter().zip(x) {
            full[g] = v;
        }
        full
    }
}

/// Assembles the Dirichlet-reduced system `(alpha^2 K + M) v = 0`, `v = 1`
/// on the Dirichlet boundary.
pub fn assemble(
    space: &FeSpace,
    coeff: &CoefficientField,
    alpha: f64,
    lumping: bool,
) -> Result<AssembledSystem, FemError> {
    check_alpha(alpha)?;
    if lumping && space.degree() > 1 {
        return Err(FemError::LumpingUnsupported {
            degree: space.degree(),
        });
    }
    let ops = GlobalOperators::assemble(space, coeff)?;
    AssembledSystem::from_operators(space, &ops, alpha, lumping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape, build_rect, DomainSpec};

    fn unit_square(n: usize) -> Arc<Mesh> {
        Arc::new(build_rect(n, n, &DomainSpec::rect(1.0, 1.0)).unwrap())
    }

    const UNIT_TRI: [Point2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn assert_block(block: &DenseBlock, expected: &[[f64; 3]; 3]) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (block.get(i, j) - expected[i][j]).abs() < 1e-14,
                    "({i},{j}): {} vs {}",
                    block.get(i, j),
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn dof_counts() {
        let mesh = unit_square(1);
        for (m, n) in [(1, 4), (2, 9), (3, 16)] {
            assert_eq!(FeSpace::new(mesh.clone(), m).unwrap().num_dofs(), n);
        }
        assert_eq!(
            FeSpace::new(mesh, 4).unwrap_err(),
            FemError::UnsupportedDegree(4)
        );
    }

    #[test]
    fn p1_unit_triangle_blocks() {
        let em = element_matrices(&UNIT_TRI, &CoefficientField::isotropic(), 1.0, 1).unwrap();
        // Hand integration of the P1 gradients (-1,-1), (1,0), (0,1) times area 1/2.
        assert_block(
            &em.stiffness,
            &[[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]],
        );
        let m = 1.0 / 24.0;
        assert_block(
            &em.mass,
            &[[2.0 * m, m, m], [m, 2.0 * m, m], [m, m, 2.0 * m]],
        );
    }

    #[test]
    fn p1_anisotropic_block() {
        let em =
            element_matrices(&UNIT_TRI, &CoefficientField::constant(1.0, 4.0), 1.0, 1).unwrap();
        // 1/2 * (g_x g_x^T + 4 g_y g_y^T) with g_x = (-1,1,0), g_y = (-1,0,1).
        assert_block(
            &em.stiffness,
            &[[2.5, -0.5, -2.0], [-0.5, 0.5, 0.0], [-2.0, 0.0, 2.0]],
        );
    }

    #[test]
    fn stiffness_scales_with_alpha_squared() {
        let c = CoefficientField::isotropic();
        let a = element_matrices(&UNIT_TRI, &c, 1.0, 2).unwrap();
        let b = element_matrices(&UNIT_TRI, &c, 0.25, 2).unwrap();
        for (x, y) in a.stiffness.data.iter().zip(&b.stiffness.data) {
            assert!((x / 16.0 - y).abs() < 1e-15);
        }
        assert_eq!(a.mass, b.mass);
    }

    #[test]
    fn variable_path_matches_constant_path() {
        let tri = [[0.3, 0.1], [0.9, 0.2], [0.4, 0.8]];
        let constant = CoefficientField::constant(1.5, 3.0);
        let variable = CoefficientField {
            a1sq: Coefficient::Variable(Arc::new(|_| 1.5)),
            a2sq: Coefficient::Variable(Arc::new(|_| 3.0)),
        };
        for m in 1..=3 {
            let a = element_matrices(&tri, &constant, 0.7, m).unwrap();
            let b = element_matrices(&tri, &variable, 0.7, m).unwrap();
            for (x, y) in a.stiffness.data.iter().zip(&b.stiffness.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_coefficient_integrated_exactly() {
        // a1sq = 1 + x on the unit triangle, P1: K_11 = ∫(1+x) dx * 1 = 1/2 + 1/6.
        let c = CoefficientField {
            a1sq: Coefficient::Variable(Arc::new(|p| 1.0 + p[0])),
            a2sq: Coefficient::Constant(1.0),
        };
        let em = element_matrices(&UNIT_TRI, &c, 1.0, 1).unwrap();
        assert!((em.stiffness.get(1, 1) - (0.5 + 1.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let c = CoefficientField::constant(1.0, 0.0);
        assert!(matches!(
            element_matrices(&UNIT_TRI, &c, 1.0, 1),
            Err(FemError::NonPositiveCoefficient { .. })
        ));
    }

    #[test]
    fn global_matrix_equals_hand_assembly() {
        let mesh = unit_square(1);
        let space = FeSpace::new(mesh.clone(), 1).unwrap();
        let ops = GlobalOperators::assemble(&space, &CoefficientField::isotropic()).unwrap();
        let a = ops.operator(1.0, false).to_dense();
        let mut expected = vec![vec![0.0; 4]; 4];
        for t in 0..2 {
            let em = element_matrices(
                &mesh.triangle_coords(t),
                &CoefficientField::isotropic(),
                1.0,
                1,
            )
            .unwrap();
            let tri = mesh.triangles[t];
            for i in 0..3 {
                for j in 0..3 {
                    expected[tri[i]][tri[j]] += em.stiffness.get(i, j) + em.mass.get(i, j);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lumped_mass_is_incident_area_over_three() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        let space = FeSpace::new(mesh.clone(), 1).unwrap();
        let ops = GlobalOperators::assemble(&space, &CoefficientField::isotropic()).unwrap();
        let lumped = ops.lumped_mass();
        let mut expected = vec![0.0; mesh.num_vertices()];
        for t in 0..mesh.num_triangles() {
            for &v in &mesh.triangles[t] {
                expected[v] += mesh.signed_area(t) / 3.0;
            }
        }
        for (a, b) in lumped.iter().zip(&expected) {
            assert!(*a > 0.0);
            assert!((a - b).abs() < 1e-15);
        }
        let total: f64 = lumped.iter().sum();
        assert!((total - 2.5).abs() < 1e-12);
    }

    #[test]
    fn mass_row_sums_integrate_to_area() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        for m in 1..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            let ops = GlobalOperators::assemble(&space, &CoefficientField::isotropic()).unwrap();
            let total: f64 = ops.lumped_mass().iter().sum();
            assert!((total - 2.5).abs() < 1e-12, "m={m}: {total}");
        }
    }

    #[test]
    fn p1_offdiagonal_stiffness_nonpositive() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        for coeff in [
            CoefficientField::isotropic(),
            CoefficientField::constant(1.0, 10.0),
        ] {
            let ops = GlobalOperators::assemble(&space, &coeff).unwrap();
            for i in 0..space.num_dofs() {
                for (j, v) in ops.stiffness.row(i) {
                    if i != j {
                        assert!(v <= 1e-15, "K[{i},{j}] = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn assembled_system_is_symmetric_with_positive_diagonal() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        for m in 1..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            let sys = assemble(&space, &CoefficientField::constant(1.0, 4.0), 0.05, false).unwrap();
            let (asym, max) = sys.matrix.asymmetry();
            assert!(asym <= 1e-14 * max);
            assert!(sys.matrix.diagonal().iter().all(|&d| d > 0.0));
            assert_eq!(sys.rhs.len(), sys.matrix.dim());
            assert_eq!(sys.interior.len(), sys.matrix.dim());
        }
    }

    #[test]
    fn lumping_rejected_above_degree_one() {
        let space = FeSpace::new(unit_square(2), 2).unwrap();
        assert_eq!(
            assemble(&space, &CoefficientField::isotropic(), 0.5, true).unwrap_err(),
            FemError::LumpingUnsupported { degree: 2 }
        );
    }

    #[test]
    fn boundary_dofs_lie_on_boundary() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        let on_boundary = |p: Point2| {
            let eq = |a: f64, b: f64| (a - b).abs() < 1e-12;
            eq(p[0], 0.0)
                || eq(p[1], 0.0)
                || eq(p[0], 2.0)
                || eq(p[1], 1.5)
                || (eq(p[1], 1.0) && p[0] >= 1.0 - 1e-12)
                || (eq(p[0], 1.0) && p[1] >= 1.0 - 1e-12)
        };
        for m in 1..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            for (i, &p) in space.dof_coords().iter().enumerate() {
                assert_eq!(
                    space.is_boundary(i),
                    on_boundary(p),
                    "m={m} dof {i} at {p:?}"
                );
            }
        }
    }

    #[test]
    fn shared_edge_dofs_coincide() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        for m in 2..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            let e = space.element();
            for t in 0..mesh.num_triangles() {
                let map = AffineMap::new(&mesh.triangle_coords(t));
                for (local, &g) in space.cell_dofs(t).iter().enumerate() {
                    let p = map.to_physical(e.node_barycentric(local));
                    let q = space.dof_coords()[g];
                    assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn evaluation_properties() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        let points = [[0.1234, 0.5678], [1.7, 0.3], [0.5, 1.4], [1.0, 1.0]];
        for m in 1..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            let ones = vec![1.0; space.num_dofs()];
            for v in space.evaluate_field(&ones, &points).unwrap() {
                assert!((v - 1.0).abs() < 1e-14);
            }
            let x = space.interpolate(|p| p[0]);
            for (v, p) in space
                .evaluate_field(&x, &points)
                .unwrap()
                .iter()
                .zip(&points)
            {
                assert!((v - p[0]).abs() < 1e-14);
            }
            let f = space.interpolate(|p| (3.0 * p[0]).sin() + p[1]);
            let at = &space.dof_coords()[..50];
            for (v, d) in space.evaluate_field(&f, at).unwrap().iter().zip(&f) {
                assert!((v - d).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn patch_test_polynomial_reproduction() {
        let mesh = Arc::new(build_lshape(0).unwrap());
        let points = [[0.0311, 0.777], [1.9, 0.05], [0.61, 1.33], [1.25, 0.4]];
        // Polynomials of degree m that equal 1 on x = 0 (a boundary side).
        let polys: [fn(Point2) -> f64; 3] = [
            |p| 1.0 + 2.0 * p[0],
            |p| 1.0 + p[0] * p[1] - 0.5 * p[0] * p[0],
            |p| 1.0 + p[0] * p[1] * p[1] - p[0].powi(3) + p[0] * p[0] * p[1],
        ];
        for m in 1..=3 {
            let space = FeSpace::new(mesh.clone(), m).unwrap();
            for f in &polys[..m] {
                let values = space.interpolate(f);
                for (v, p) in space
                    .evaluate_field(&values, &points)
                    .unwrap()
                    .iter()
                    .zip(&points)
                {
                    assert!((v - f(*p)).abs() < 1e-12, "m={m}");
                }
            }
        }
    }

    #[test]
    fn evaluation_outside_propagates() {
        let space = FeSpace::new(unit_square(2), 1).unwrap();
        let v = vec![0.0; space.num_dofs()];
        assert!(matches!(
            space.evaluate_field(&v, &[[2.0, 2.0]]),
            Err(FemError::Mesh(MeshError::PointOutsideDomain { .. }))
        ));
    }

    #[test]
    fn reaction_dominated_interior_decays() {
        let space = FeSpace::new(unit_square(16), 1).unwrap();
        let sys = assemble(&space, &CoefficientField::isotropic(), 1e-6, true).unwrap();
        // With alpha^2 K negligible and M diagonal, interior values vanish.
        let diag = sys.matrix.diagonal();
        for (r, d) in sys.rhs.iter().zip(&diag) {
            assert!((r / d).abs() < 1e-9);
        }
    }

    #[test]
    fn small_system_positive_definite() {
        use nalgebra::DMatrix;
        let space = FeSpace::new(unit_square(4), 2).unwrap();
        let sys = assemble(&space, &CoefficientField::constant(1.0, 4.0), 0.1, false).unwrap();
        let n = sys.matrix.dim();
        assert!(n <= 200);
        let dense = sys.matrix.to_dense();
        let m = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let eig = m.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
    }
}
