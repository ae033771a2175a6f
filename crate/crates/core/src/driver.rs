//! End-to-end pipeline: solve the diffusion-reaction problem for `v`, check
//! the discrete maximum principle `0 < v < 1` on interior DOFs, recover
//! `u = -alpha ln v`, and run the alpha-halving sweep.

use std::sync::Arc;

use thiserror::Error;

use crate::fem::{AssembledSystem, CoefficientField, FeSpace, FemError, GlobalOperators};
use crate::mesh::{build_mesh, DomainShape, DomainSpec, MeshError, Point2, Resolution};
use crate::oracle::{error_norms, BoundaryPolygon, ErrorReport, OracleError};
use crate::solver::{
    relative_residual, solve_spd, CholeskySolver, CholeskySymbolic, SolveStats, SolverConfig,
    SolverError,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no monotone solution even at the largest alpha of the sweep")]
    NoMonotoneAlpha { sweep: Box<SweepResult> },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    /// `alpha = 2^-k` for `k = k_min..=k_max`.
    Sweep {
        k_min: i32,
        k_max: i32,
    },
}

/// Linear solver used for the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    /// Sparse Cholesky. Resolves the exponentially small interior values
    /// with the correct sign, which the monotonicity verdict depends on.
    Direct,
    ConjugateGradient(SolverConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub resolution: Resolution,
    pub degree: usize,
    pub lumping: bool,
    pub coeff: CoefficientField,
    pub alpha_mode: AlphaMode,
    pub monotone_eps: f64,
    pub solver: LinearSolver,
}

impl RunConfig {
    /// Isotropic P1 run on the L-shape at `level` with a consistent mass.
    pub fn lshape(level: u32, alpha_mode: AlphaMode) -> Self {
        Self {
            domain: DomainSpec::lshape(),
            resolution: Resolution::Level(level),
            degree: 1,
            lumping: false,
            coeff: CoefficientField::isotropic(),
            alpha_mode,
            monotone_eps: 0.0,
            solver: LinearSolver::Direct,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        match self.alpha_mode {
            AlphaMode::Fixed(a) if !(a > 0.0 && a.is_finite()) => {
                return Err(DriverError::InvalidConfig(format!(
                    "alpha must be positive, got {a}"
                )))
            }
            AlphaMode::Sweep { k_min, k_max } if k_min > k_max => {
                return Err(DriverError::InvalidConfig(format!(
                    "sweep range {k_min}..{k_max} is empty"
                )))
            }
            _ => {}
        }
        if !(1..=3).contains(&self.degree) {
            return Err(FemError::UnsupportedDegree(self.degree).into());
        }
        if self.lumping && self.degree > 1 {
            return Err(FemError::LumpingUnsupported {
                degree: self.degree,
            }
            .into());
        }
        if let LinearSolver::ConjugateGradient(cfg) = &self.solver {
            cfg.validate()?;
        }
        self.domain.validate()?;
        Ok(())
    }
}

/// Outcome of one alpha.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub alpha: f64,
    /// Values of `v` at every DOF; Dirichlet DOFs are exactly 1.
    pub v: Vec<f64>,
    /// `-alpha ln v` per DOF, `None` where `v <= 0`. Unset until
    /// [`transform_u`] has been applied.
    pub u: Option<Vec<Option<f64>>>,
    pub monotone: bool,
    pub v_min_interior: f64,
    pub v_max_interior: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Results by decreasing alpha.
    pub per_alpha: Vec<SolveResult>,
    /// The exponent `k` of each entry in `per_alpha`.
    pub ks: Vec<i32>,
    /// Last entry of the leading run of monotone results.
    pub selected: Option<usize>,
}

impl SweepResult {
    pub fn selected_result(&self) -> Option<&SolveResult> {
        self.selected.map(|i| &self.per_alpha[i])
    }

    pub fn selected_alpha(&self) -> Option<f64> {
        self.selected_result().map(|r| r.alpha)
    }

    /// Exponent of the first non-monotone alpha, if any.
    pub fn first_non_monotone_k(&self) -> Option<i32> {
        self.per_alpha
            .iter()
            .zip(&self.ks)
            .find(|(r, _)| !r.monotone)
            .map(|(_, &k)| k)
    }
}

/// `2^-k`.
pub fn alpha_from_k(k: i32) -> f64 {
    2f64.powi(-k)
}

/// Mesh, space and alpha-independent operators for one configuration,
/// reused across the alphas of a sweep.
pub struct Problem {
    config: RunConfig,
    space: FeSpace,
    ops: GlobalOperators,
    symbolic: Option<CholeskySymbolic>,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self, DriverError> {
        config.validate()?;
        let mesh = Arc::new(build_mesh(&config.domain, config.resolution)?);
        let space = FeSpace::new(mesh, config.degree)?;
        let ops = GlobalOperators::assemble(&space, &config.coeff)?;
        Ok(Self {
            config: config.clone(),
            space,
            ops,
            symbolic: None,
        })
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Solves for `v` at `alpha`; `u` is left unset.
    pub fn solve(&mut self, alpha: f64) -> Result<SolveResult, DriverError> {
        let system =
            AssembledSystem::from_operators(&self.space, &self.ops, alpha, self.config.lumping)?;
        let (x, stats) = match self.config.solver {
            LinearSolver::Direct => {
                if self.symbolic.is_none() {
                    self.symbolic = Some(CholeskySymbolic::analyze(&system.matrix)?);
                }
                let symbolic = self.symbolic.as_ref().unwrap();
                let x =
                    CholeskySolver::factor_with(symbolic, &system.matrix)?.solve(&system.rhs)?;
                let stats = SolveStats {
                    iterations: 0,
                    final_relative_residual: relative_residual(&system.matrix, &x, &system.rhs),
                };
                (x, stats)
            }
            LinearSolver::ConjugateGradient(cfg) => solve_spd(&system.matrix, &system.rhs, &cfg)?,
        };
        let v = system.expand(&x);
        let (monotone, v_min_interior, v_max_interior) =
            check_monotone(&v, &system.interior, self.config.monotone_eps);
        Ok(SolveResult {
            alpha,
            v,
            u: None,
            monotone,
            v_min_interior,
            v_max_interior,
            stats,
        })
    }

    /// Solves every alpha of the sweep and selects the smallest alpha of the
    /// leading monotone run. `u` is populated on every result.
    pub fn sweep(&mut self, k_min: i32, k_max: i32) -> Result<SweepResult, DriverError> {
        if k_min > k_max {
            return Err(DriverError::InvalidConfig(format!(
                "sweep range {k_min}..{k_max} is empty"
            )));
        }
        let mut per_alpha = Vec::new();
        let mut ks = Vec::new();
        for k in k_min..=k_max {
            let alpha = alpha_from_k(k);
            let mut result = self.solve(alpha)?;
            result.u = Some(transform_u(&result.v, alpha));
            per_alpha.push(result);
            ks.push(k);
        }
        let leading = per_alpha.iter().take_while(|r| r.monotone).count();
        let sweep = SweepResult {
            per_alpha,
            ks,
            selected: leading.checked_sub(1),
        };
        if sweep.selected.is_none() {
            return Err(DriverError::NoMonotoneAlpha {
                sweep: Box::new(sweep),
            });
        }
        Ok(sweep)
    }

    /// Oracle errors of a result, when the configuration admits the exact
    /// solution (constant coefficients, all-Dirichlet boundary) and `u` is
    /// defined everywhere.
    pub fn oracle_errors(&self, result: &SolveResult) -> Option<ErrorReport> {
        let (a1sq, a2sq) = self.config.coeff.constant_values()?;
        if !self.config.domain.all_dirichlet() {
            return None;
        }
        let u = result.u.as_ref()?;
        let poly = BoundaryPolygon::from_domain(&self.config.domain);
        error_norms(&self.space, u, &poly, a1sq, a2sq).ok()
    }
}

/// Solves the problem of `config` at `alpha`.
pub fn solve_v(config: &RunConfig, alpha: f64) -> Result<SolveResult, DriverError> {
    Problem::new(config)?.solve(alpha)
}

/// Runs the sweep described by `config.alpha_mode`.
pub fn alpha_sweep(config: &RunConfig) -> Result<SweepResult, DriverError> {
    let AlphaMode::Sweep { k_min, k_max } = config.alpha_mode else {
        return Err(DriverError::InvalidConfig(
            "alpha_sweep requires a sweep alpha mode".into(),
        ));
    };
    Problem::new(config)?.sweep(k_min, k_max)
}

/// Verdict `eps < v_i < 1` over `interior` DOFs, with the observed extremes.
pub fn check_monotone(v: &[f64], interior: &[usize], eps: f64) -> (bool, f64, f64) {
    let (lo, hi) = interior
        .iter()
        .map(|&i| v[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    (lo > eps && hi < 1.0, lo, hi)
}

/// `u_i = -alpha ln v_i`, undefined where `v_i <= 0`.
pub fn transform_u(v: &[f64], alpha: f64) -> Vec<Option<f64>> {
    v.iter()
        .map(|&vi| {
            if vi > 0.0 {
                // ln(1) is exactly 0, so Dirichlet DOFs map to u = 0.
                Some(-alpha * vi.ln())
            } else {
                None
            }
        })
        .collect()
}

/// Samples `u` along the diagonal `(t, t)`, `t` in `[0, 1]`. A sample is
/// `None` if any DOF of its triangle is undefined.
pub fn cross_section(
    space: &FeSpace,
    u: &[Option<f64>],
    n_samples: usize,
) -> Result<Vec<(f64, Option<f64>)>, DriverError> {
    cross_section_to(space, u, n_samples, 1.0)
}

/// Largest `t` such that `(t, t)` stays in the domain, capped at 1.
pub fn diagonal_extent(domain: &DomainSpec) -> f64 {
    match domain.shape {
        DomainShape::LShape => 1.0,
        DomainShape::Rect { width, height } => width.min(height).min(1.0),
    }
}

/// As [`cross_section`], for `t` in `[0, t_max]`.
pub fn cross_section_to(
    space: &FeSpace,
    u: &[Option<f64>],
    n_samples: usize,
    t_max: f64,
) -> Result<Vec<(f64, Option<f64>)>, DriverError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(DriverError::InvalidConfig(format!(
            "cross section end must be positive, got {t_max}"
        )));
    }
    if n_samples < 2 {
        return Err(DriverError::InvalidConfig(format!(
            "cross section needs at least 2 samples, got {n_samples}"
        )));
    }
    if u.len() != space.num_dofs() {
        return Err(FemError::LengthMismatch {
            expected: space.num_dofs(),
            got: u.len(),
        }
        .into());
    }
    let mesh = space.mesh();
    let element = space.element();
    (0..n_samples)
        .map(|i| {
            let t = if i + 1 == n_samples {
                t_max
            } else {
                t_max * i as f64 / (n_samples - 1) as f64
            };
            let p: Point2 = [t, t];
            let loc = mesh.locate_point(p)?;
            let basis = element.values(loc.barycentric);
            let mut value = Some(0.0);
            for (&d, phi) in space.cell_dofs(loc.triangle_index).iter().zip(basis) {
                value = match (value, u[d]) {
                    (Some(acc), Some(ud)) => Some(acc + phi * ud),
                    _ => None,
                };
            }
            Ok((t, value))
        })
        .collect()
}
