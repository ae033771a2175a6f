//! Symmetric quadrature rules on the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Weights are normalized to sum to one, so an integral over a physical
//! triangle is `area * sum(w_q * f(x_q))`.

/// A quadrature rule in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this are integrated exactly.
    pub degree: usize,
}

impl TriangleRule {
    /// Returns a symmetric rule exact for polynomials of total degree
    /// `degree`.
    pub fn with_degree(degree: usize) -> Self {
        if degree <= 5 {
            radon7()
        } else {
            symmetrized_conical(degree)
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Radon's seven-point degree-5 rule.
fn radon7() -> TriangleRule {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    let mut points = vec![[third; 3]];
    let mut weights = vec![9.0 / 40.0];
    for (r, w) in [(a, wa), (b, wb)] {
        let q = 1.0 - 2.0 * r;
        points.extend([[q, r, r], [r, q, r], [r, r, q]]);
        weights.extend([w; 3]);
    }
    TriangleRule {
        points,
        weights,
        degree: 5,
    }
}

/// Collapsed Gauss-Legendre product rule averaged over the six vertex
/// permutations, which makes it fully symmetric without losing exactness.
fn symmetrized_conical(degree: usize) -> TriangleRule {
    // A degree-d integrand becomes degree d+1 in the collapsed direction.
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut base = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            // (u, v) in the unit square -> (xi, eta) = (u, (1-u) v).
            let xi = u;
            let eta = (1.0 - u) * v;
            // Jacobian (1-u), square measure 1/4, normalize by area 1/2.
            let weight = 0.25 * w[i] * w[j] * (1.0 - u) * 2.0;
            base.push(([1.0 - xi - eta, xi, eta], weight));
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut points = Vec::with_capacity(6 * base.len());
    let mut weights = Vec::with_capacity(6 * base.len());
    for perm in PERMS {
        for &(lambda, weight) in &base {
            points.push([lambda[perm[0]], lambda[perm[1]], lambda[perm[2]]]);
            weights.push(weight / 6.0);
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
