//! Lagrange elements of degree 1 to 3 on triangles.
//!
//! Nodes are the equispaced lattice `lambda = (i, j, k) / m` with
//! `i + j + k = m`. Local numbering: the three vertices, then the interior
//! points of edges `0->1`, `1->2`, `2->0` (each listed from its first vertex
//! towards its second), then interior nodes.

use crate::mesh::Point2;

/// Reference Lagrange element of a given degree.
#[derive(Debug, Clone)]
pub struct LagrangeElement {
    degree: usize,
    /// Barycentric lattice index of each local node.
    nodes: Vec<[usize; 3]>,
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Self {
        assert!((1..=3).contains(&degree), "unsupported degree {degree}");
        let m = degree;
        let mut nodes = vec![[m, 0, 0], [0, m, 0], [0, 0, m]];
        for s in 1..m {
            nodes.push([m - s, s, 0]);
        }
        for s in 1..m {
            nodes.push([0, m - s, s]);
        }
        for s in 1..m {
            nodes.push([s, 0, m - s]);
        }
        for i in 1..m {
            for j in 1..m - i {
                nodes.push([m - i - j, i, j]);
            }
        }
        debug_assert_eq!(nodes.len(), (m + 1) * (m + 2) / 2);
        Self { degree, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_nodes_per_edge(&self) -> usize {
        self.degree - 1
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.num_nodes() - 3 - 3 * self.edge_nodes_per_edge()
    }

    pub fn lattice(&self) -> &[[usize; 3]] {
        &self.nodes
    }

    /// Barycentric coordinates of local node `i`.
    pub fn node_barycentric(&self, i: usize) -> [f64; 3] {
        let m = self.degree as f64;
        self.nodes[i].map(|k| k as f64 / m)
    }

    /// Values of all basis functions at barycentric point `lambda`.
    pub fn values(&self, lambda: [f64; 3]) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|idx| (0..3).map(|r| self.factor(idx[r], lambda[r]).0).product())
            .collect()
    }

    /// Gradients of all basis functions with respect to the reference
    /// coordinates `(xi, eta) = (lambda_1, lambda_2)`.
    pub fn reference_gradients(&self, lambda: [f64; 3]) -> Vec<[f64; 2]> {
        self.nodes
            .iter()
            .map(|idx| {
                let f: [(f64, f64); 3] = [0, 1, 2].map(|r| self.factor(idx[r], lambda[r]));
                let d0 = f[0].1 * f[1].0 * f[2].0;
                let d1 = f[0].0 * f[1].1 * f[2].0;
                let d2 = f[0].0 * f[1].0 * f[2].1;
                [d1 - d0, d2 - d0]
            })
            .collect()
    }

    /// `prod_{l<k} (m*x - l) / (l + 1)` and its derivative in `x`.
    fn factor(&self, k: usize, x: f64) -> (f64, f64) {
        let m = self.degree as f64;
        let mut value = 1.0;
        let mut deriv = 0.0;
        for l in 0..k {
            let lf = l as f64;
            let term = (m * x - lf) / (lf + 1.0);
            let dterm = m / (lf + 1.0);
            deriv = deriv * term + value * dterm;
            value *= term;
        }
        (value, deriv)
    }

    /// Sub-triangles of the node lattice, as local node triples. Used to
    /// export higher-degree fields on a linear mesh.
    pub fn sub_triangles(&self) -> Vec<[usize; 3]> {
        let m = self.degree;
        let find = |i: usize, j: usize| {
            self.nodes
                .iter()
                .position(|n| n[1] == i && n[2] == j)
                .expect("lattice node")
        };
        let mut out = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m - j {
                out.push([find(i, j), find(i + 1, j), find(i, j + 1)]);
                if i + j + 2 <= m {
                    out.push([find(i + 1, j), find(i + 1, j + 1), find(i, j + 1)]);
                }
            }
        }
        out
    }
}

/// Affine map of the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point2,
    /// Columns are the edge vectors `p1 - p0` and `p2 - p0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// Inverse transpose, mapping reference gradients to physical ones.
    pub inv_t: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(tri: &[Point2; 3]) -> Self {
        let [p0, p1, p2] = *tri;
        let j = [
            [p1[0] - p0[0], p2[0] - p0[0]],
            [p1[1] - p0[1], p2[1] - p0[1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!(det.abs() > 0.0, "degenerate triangle");
        // inv(J)^T
        let inv_t = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        Self {
            origin: p0,
            jacobian: j,
            det,
            inv_t,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, lambda: [f64; 3]) -> Point2 {
        let (xi, eta) = (lambda[1], lambda[2]);
        [
            self.origin[0] + self.jacobian[0][0] * xi + self.jacobian[0][1] * eta,
            self.origin[1] + self.jacobian[1][0] * xi + self.jacobian[1][1] * eta,
        ]
    }

    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}
