//! Command-line front end: flag parsing, run orchestration and output files.
//!
//! Outputs for prefix `P`:
//! - `P.json`: run summary (`schema: 1`).
//! - `P_k<k>.csv` per swept alpha (`P.csv` for a fixed alpha): `u` along
//!   the diagonal `(t, t)`.
//! - `P_k<k>.vtk` / `P.vtk`: `v`, `u` and `u_defined` on the DOF points.
//!
//! Exit codes: 0 success, 2 no monotone alpha in the sweep (outputs are still
//! written), 1 any other error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::driver::{
    cross_section_to, diagonal_extent, transform_u, AlphaMode, DriverError, LinearSolver, Problem,
    RunConfig, SolveResult,
};
use crate::fem::CoefficientField;
use crate::mesh::{BoundaryCondition, DomainShape, DomainSpec, Resolution, Side, MAX_LSHAPE_LEVEL};
use crate::numfmt::{format_sig, round_sig};
use crate::solver::SolverConfig;
use crate::vtk::{write_fields, PointScalars};

const SIG_DIGITS: usize = 12;
const DEFAULT_RECT_CELLS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Lshape,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Direct,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emit {
    Csv,
    Vtk,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "eikonal-fem",
    version,
    about = "Anisotropic eikonal distance via an exponentially transformed diffusion-reaction FEM"
)]
struct Args {
    #[arg(long, value_enum, default_value = "lshape")]
    domain: DomainArg,
    /// Rectangle width and height.
    #[arg(long, num_args = 2, value_names = ["W", "H"])]
    rect_size: Option<Vec<f64>>,
    /// Rectangle cells in x.
    #[arg(long)]
    nx: Option<usize>,
    /// Rectangle cells in y.
    #[arg(long)]
    ny: Option<usize>,
    /// L-shape refinement level (0 coarse, 1 medium, 2 fine).
    #[arg(long)]
    level: Option<u32>,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Row-sum lumped mass (P1 only).
    #[arg(long, action = ArgAction::SetTrue)]
    lumping: bool,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a1sq: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a2sq: f64,
    #[arg(long, conflicts_with = "sweep", allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Sweep alpha = 2^-k for k = KMIN..=KMAX.
    #[arg(long, num_args = 2, value_names = ["KMIN", "KMAX"], allow_negative_numbers = true)]
    sweep: Option<Vec<i32>>,
    /// Cross-section sample count.
    #[arg(long, default_value_t = 257)]
    samples: usize,
    /// Relative residual tolerance of the CG solver.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "direct")]
    solver: SolverArg,
    /// Comma list of csv, vtk, json.
    #[arg(long, default_value = "json,csv")]
    emit: String,
    #[arg(long, default_value = "eikonal")]
    output: PathBuf,
    /// Neumann sides of a rectangle, comma list of left, right, top, bottom.
    #[arg(long)]
    neumann: Option<String>,
}

#[derive(Debug, Error)]
pub enum UsageError {
    #[error(transparent)]
    Parse(#[from] clap::Error),
    #[error("--degree: unsupported element degree {0} (expected 1, 2 or 3)")]
    UnsupportedDegree(usize),
    #[error("{flag}: {message}")]
    Invalid { flag: &'static str, message: String },
}

fn invalid(flag: &'static str, message: impl Into<String>) -> UsageError {
    UsageError::Invalid {
        flag,
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub run: RunConfig,
    pub output_prefix: PathBuf,
    pub emit: BTreeSet<Emit>,
    pub samples: usize,
}

fn positive(flag: &'static str, x: f64) -> Result<f64, UsageError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(flag, format!("must be a positive number, got {x}")))
    }
}

fn parse_emit(s: &str) -> Result<BTreeSet<Emit>, UsageError> {
    let mut set = BTreeSet::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        set.insert(match item {
            "csv" => Emit::Csv,
            "vtk" => Emit::Vtk,
            "json" => Emit::Json,
            other => return Err(invalid("--emit", format!("unknown output kind `{other}`"))),
        });
    }
    if set.is_empty() {
        return Err(invalid(
            "--emit",
            "at least one of csv, vtk, json is required",
        ));
    }
    Ok(set)
}

/// Parses and validates a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;

    let emit = parse_emit(&args.emit)?;
    if !(1..=3).contains(&args.degree) {
        return Err(UsageError::UnsupportedDegree(args.degree));
    }
    if args.lumping && args.degree > 1 {
        return Err(invalid("--lumping", "mass lumping requires --degree 1"));
    }
    let coeff = CoefficientField::constant(
        positive("--a1sq", args.a1sq)?,
        positive("--a2sq", args.a2sq)?,
    );

    let (domain, resolution) = match args.domain {
        DomainArg::Lshape => {
            for (flag, set) in [
                ("--rect-size", args.rect_size.is_some()),
                ("--nx", args.nx.is_some()),
                ("--ny", args.ny.is_some()),
                ("--neumann", args.neumann.is_some()),
            ] {
                if set {
                    return Err(invalid(flag, "only valid with --domain rect"));
                }
            }
            let level = args.level.unwrap_or(1);
            if level > MAX_LSHAPE_LEVEL {
                return Err(invalid(
                    "--level",
                    format!("at most {MAX_LSHAPE_LEVEL}, got {level}"),
                ));
            }
            (DomainSpec::lshape(), Resolution::Level(level))
        }
        DomainArg::Rect => {
            if args.level.is_some() {
                return Err(invalid("--level", "only valid with --domain lshape"));
            }
            let (w, h) = match args.rect_size.as_deref() {
                Some(&[w, h]) => (positive("--rect-size", w)?, positive("--rect-size", h)?),
                _ => (1.0, 1.0),
            };
            let nx = args.nx.unwrap_or(DEFAULT_RECT_CELLS);
            let ny = args.ny.unwrap_or(DEFAULT_RECT_CELLS);
            if nx == 0 {
                return Err(invalid("--nx", "must be at least 1"));
            }
            if ny == 0 {
                return Err(invalid("--ny", "must be at least 1"));
            }
            let mut spec = DomainSpec::rect(w, h);
            if let Some(sides) = &args.neumann {
                for s in sides.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let side: Side = s.parse().map_err(|e: String| invalid("--neumann", e))?;
                    spec = spec.with_marker(side, BoundaryCondition::Neumann);
                }
            }
            spec.validate()
                .map_err(|e| invalid("--neumann", e.to_string()))?;
            (spec, Resolution::Cells { nx, ny })
        }
    };

    let alpha_mode = match (args.alpha, args.sweep.as_deref()) {
        (Some(a), _) => AlphaMode::Fixed(positive("--alpha", a)?),
        (None, Some(&[k_min, k_max])) => {
            if k_min > k_max {
                return Err(invalid(
                    "--sweep",
                    format!("KMIN {k_min} exceeds KMAX {k_max}"),
                ));
            }
            AlphaMode::Sweep { k_min, k_max }
        }
        _ => AlphaMode::Sweep { k_min: 3, k_max: 8 },
    };

    let mut cg = SolverConfig::default();
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid("--tol", format!("must lie in (0, 1), got {tol}")));
        }
        cg.rel_tol = tol;
    }
    let solver = match args.solver {
        SolverArg::Direct => LinearSolver::Direct,
        SolverArg::Cg => LinearSolver::ConjugateGradient(cg),
    };

    if args.samples < 2 {
        return Err(invalid(
            "--samples",
            format!("at least 2 required, got {}", args.samples),
        ));
    }
    let parent = match args.output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !parent.is_dir() {
        return Err(invalid(
            "--output",
            format!("directory {} does not exist", parent.display()),
        ));
    }
    if args.output.file_name().is_none() {
        return Err(invalid("--output", "prefix must end in a file name"));
    }

    let run = RunConfig {
        domain,
        resolution,
        degree: args.degree,
        lumping: args.lumping,
        coeff,
        alpha_mode,
        monotone_eps: 0.0,
        solver,
    };
    run.validate()
        .map_err(|e| invalid("--domain", e.to_string()))?;
    Ok(CliConfig {
        run,
        output_prefix: args.output,
        emit,
        samples: args.samples,
    })
}

#[derive(Serialize)]
struct JsonConfig {
    domain: &'static str,
    rect_size: Option<[f64; 2]>,
    level: Option<u32>,
    nx: Option<usize>,
    ny: Option<usize>,
    neumann: Vec<&'static str>,
    degree: usize,
    lumping: bool,
    a1sq: f64,
    a2sq: f64,
    alpha: Option<f64>,
    sweep: Option<[i32; 2]>,
    solver: &'static str,
    tol: Option<f64>,
    samples: usize,
    num_dofs: usize,
    num_triangles: usize,
}

#[derive(Serialize)]
struct JsonAlpha {
    k: Option<i32>,
    alpha: f64,
    monotone: bool,
    v_min: f64,
    v_max: f64,
    iterations: usize,
    residual: f64,
    l_inf: Option<f64>,
    l2: Option<f64>,
}

#[derive(Serialize)]
struct JsonSummary {
    schema: u32,
    status: &'static str,
    config: JsonConfig,
    selected_alpha: Option<f64>,
    selected_k: Option<i32>,
    first_non_monotone_k: Option<i32>,
    results: Vec<JsonAlpha>,
}

fn r(x: f64) -> f64 {
    round_sig(x, SIG_DIGITS)
}

fn json_config(cfg: &CliConfig, problem: &Problem) -> JsonConfig {
    let run = &cfg.run;
    let (domain, rect_size) = match run.domain.shape {
        DomainShape::LShape => ("lshape", None),
        DomainShape::Rect { width, height } => ("rect", Some([r(width), r(height)])),
    };
    let (level, nx, ny) = match run.resolution {
        Resolution::Level(l) => (Some(l), None, None),
        Resolution::Cells { nx, ny } => (None, Some(nx), Some(ny)),
    };
    let (a1sq, a2sq) = run.coeff.constant_values().unwrap_or((f64::NAN, f64::NAN));
    let (alpha, sweep) = match run.alpha_mode {
        AlphaMode::Fixed(a) => (Some(r(a)), None),
        AlphaMode::Sweep { k_min, k_max } => (None, Some([k_min, k_max])),
    };
    let (solver, tol) = match run.solver {
        LinearSolver::Direct => ("direct", None),
        LinearSolver::ConjugateGradient(c) => ("cg", Some(r(c.rel_tol))),
    };
    JsonConfig {
        domain,
        rect_size,
        level,
        nx,
        ny,
        neumann: Side::ALL
            .into_iter()
            .filter(|&s| run.domain.marker(s) == BoundaryCondition::Neumann)
            .map(Side::name)
            .collect(),
        degree: run.degree,
        lumping: run.lumping,
        a1sq: r(a1sq),
        a2sq: r(a2sq),
        alpha,
        sweep,
        solver,
        tol,
        samples: cfg.samples,
        num_dofs: problem.space().num_dofs(),
        num_triangles: problem.space().mesh().num_triangles(),
    }
}

fn json_alpha(problem: &Problem, k: Option<i32>, res: &SolveResult) -> JsonAlpha {
    let errors = problem.oracle_errors(res);
    JsonAlpha {
        k,
        alpha: r(res.alpha),
        monotone: res.monotone,
        v_min: r(res.v_min_interior),
        v_max: r(res.v_max_interior),
        iterations: res.stats.iterations,
        residual: r(res.stats.final_relative_residual),
        l_inf: errors.map(|e| r(e.l_inf)),
        l2: errors.map(|e| r(e.l2)),
    }
}

fn with_suffix(prefix: &Path, suffix: &str, ext: &str) -> PathBuf {
    let mut name = prefix.file_name().expect("validated prefix").to_os_string();
    name.push(suffix);
    name.push(".");
    name.push(ext);
    prefix.with_file_name(name)
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_csv(path: &Path, samples: &[(f64, Option<f64>)]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,u")?;
    for &(t, u) in samples {
        let u = u.map_or_else(|| "nan".to_string(), |u| format_sig(u, SIG_DIGITS));
        writeln!(w, "{},{}", format_sig(t, SIG_DIGITS), u)?;
    }
    w.flush()
}

fn write_vtk(
    path: &Path,
    problem: &Problem,
    res: &SolveResult,
    u: &[Option<f64>],
) -> io::Result<()> {
    let u_values: Vec<f64> = u.iter().map(|x| x.unwrap_or(-1.0)).collect();
    let mask: Vec<f64> = u
        .iter()
        .map(|x| if x.is_some() { 1.0 } else { 0.0 })
        .collect();
    let mut w = create(path)?;
    write_fields(
        &mut w,
        &format!("alpha={}", format_sig(res.alpha, SIG_DIGITS)),
        problem.space(),
        &[
            PointScalars {
                name: "v",
                values: &res.v,
            },
            PointScalars {
                name: "u",
                values: &u_values,
            },
            PointScalars {
                name: "u_defined",
                values: &mask,
            },
        ],
    )?;
    w.flush()
}

#[derive(Debug, Error)]
enum RunError {
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("writing output failed: {0}")]
    Io(#[from] io::Error),
}

/// Runs the configured computation and writes the requested outputs.
/// Returns the process exit code.
pub fn run(cfg: &CliConfig) -> i32 {
    match run_inner(cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_inner(cfg: &CliConfig) -> Result<i32, RunError> {
    let mut problem = Problem::new(&cfg.run)?;
    eprintln!(
        "{} DOFs, {} triangles, degree {}",
        problem.space().num_dofs(),
        problem.space().mesh().num_triangles(),
        cfg.run.degree
    );

    // (k, result) pairs in sweep order.
    let mut results: Vec<(Option<i32>, SolveResult)> = Vec::new();
    let selected: Option<usize>;
    let mut first_non_monotone_k = None;
    let mut no_monotone = false;
    match cfg.run.alpha_mode {
        AlphaMode::Fixed(alpha) => {
            let mut res = problem.solve(alpha)?;
            res.u = Some(transform_u(&res.v, alpha));
            if !res.monotone {
                eprintln!("warning: solution at alpha={alpha} violates 0 < v < 1");
            }
            selected = res.monotone.then_some(0);
            results.push((None, res));
        }
        AlphaMode::Sweep { k_min, k_max } => {
            let sweep = match problem.sweep(k_min, k_max) {
                Ok(s) => s,
                Err(DriverError::NoMonotoneAlpha { sweep }) => {
                    no_monotone = true;
                    *sweep
                }
                Err(e) => return Err(e.into()),
            };
            selected = sweep.selected;
            first_non_monotone_k = sweep.first_non_monotone_k();
            results.extend(sweep.ks.iter().map(|&k| Some(k)).zip(sweep.per_alpha));
        }
    }

    for (k, res) in &results {
        let label = k.map_or_else(String::new, |k| format!("k={k} "));
        eprintln!(
            "{label}alpha={} monotone={} v_min={:e} v_max={}",
            format_sig(res.alpha, SIG_DIGITS),
            res.monotone,
            res.v_min_interior,
            format_sig(res.v_max_interior, SIG_DIGITS),
        );
    }

    let t_max = diagonal_extent(&cfg.run.domain);
    for (k, res) in &results {
        let u = res.u.as_deref().expect("u is set for every emitted result");
        let suffix = k.map_or_else(String::new, |k| format!("_k{k}"));
        if cfg.emit.contains(&Emit::Csv) {
            let samples = cross_section_to(problem.space(), u, cfg.samples, t_max)?;
            write_csv(&with_suffix(&cfg.output_prefix, &suffix, "csv"), &samples)?;
        }
        if cfg.emit.contains(&Emit::Vtk) {
            write_vtk(
                &with_suffix(&cfg.output_prefix, &suffix, "vtk"),
                &problem,
                res,
                u,
            )?;
        }
    }

    if cfg.emit.contains(&Emit::Json) {
        let summary = JsonSummary {
            schema: 1,
            status: if no_monotone {
                "no_monotone_alpha"
            } else {
                "ok"
            },
            config: json_config(cfg, &problem),
            selected_alpha: selected.map(|i| r(results[i].1.alpha)),
            selected_k: selected.and_then(|i| results[i].0),
            first_non_monotone_k,
            results: results
                .iter()
                .map(|(k, res)| json_alpha(&problem, *k, res))
                .collect(),
        };
        let mut w = create(&with_suffix(&cfg.output_prefix, "", "json"))?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
    }

    if no_monotone {
        eprintln!("error: no swept alpha satisfies 0 < v < 1");
        return Ok(2);
    }
    if let Some(i) = selected {
        eprintln!(
            "selected alpha={}",
            format_sig(results[i].1.alpha, SIG_DIGITS)
        );
    }
    Ok(0)
}

/// Entry point behind `main`.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    match parse_args(argv) {
        Ok(cfg) => run(&cfg),
        Err(UsageError::Parse(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<CliConfig, UsageError> {
        parse_args(std::iter::once("eikonal-fem").chain(args.iter().copied()))
    }

    fn flag_of(err: UsageError) -> String {
        err.to_string()
    }

    #[test]
    fn defaults() {
        let cfg = parse(&[]).unwrap();
        assert_eq!(cfg.run.domain, DomainSpec::lshape());
        assert_eq!(cfg.run.resolution, Resolution::Level(1));
        assert_eq!(cfg.run.degree, 1);
        assert!(!cfg.run.lumping);
        assert_eq!(cfg.run.alpha_mode, AlphaMode::Sweep { k_min: 3, k_max: 8 });
        assert_eq!(cfg.run.coeff.constant_values(), Some((1.0, 1.0)));
        assert_eq!(cfg.samples, 257);
        assert_eq!(cfg.run.solver, LinearSolver::Direct);
    }

    #[test]
    fn medium_grid_sweep() {
        let cfg = parse(&["--domain", "lshape", "--level", "1", "--sweep", "3", "8"]).unwrap();
        assert_eq!(cfg.run.resolution, Resolution::Level(1));
        assert_eq!(cfg.run.alpha_mode, AlphaMode::Sweep { k_min: 3, k_max: 8 });
    }

    #[test]
    fn anisotropic_fixed_alpha() {
        let cfg = parse(&["--a2sq", "4", "--alpha", "0.00390625"]).unwrap();
        assert_eq!(
            cfg.run.alpha_mode,
            AlphaMode::Fixed(crate::driver::alpha_from_k(8))
        );
        assert_eq!(cfg.run.coeff.constant_values(), Some((1.0, 4.0)));
    }

    #[test]
    fn unsupported_degree() {
        let err = parse(&["--degree", "5"]).unwrap_err();
        assert!(matches!(err, UsageError::UnsupportedDegree(5)));
        assert!(flag_of(err).contains("--degree"));
    }

    #[test]
    fn alpha_conflicts_with_sweep() {
        let err = parse(&["--alpha", "0.1", "--sweep", "3", "5"]).unwrap_err();
        assert!(matches!(err, UsageError::Parse(_)));
        let msg = flag_of(err);
        assert!(msg.contains("--alpha") && msg.contains("--sweep"), "{msg}");
    }

    #[test]
    fn emit_validation() {
        for bad in ["", ",", " "] {
            let msg = flag_of(parse(&["--emit", bad]).unwrap_err());
            assert!(msg.contains("--emit"), "{msg}");
        }
        assert!(flag_of(parse(&["--emit", "csv,png"]).unwrap_err()).contains("png"));
        let cfg = parse(&["--emit", "vtk,json,vtk"]).unwrap();
        assert_eq!(cfg.emit, BTreeSet::from([Emit::Vtk, Emit::Json]));
    }

    #[test]
    fn rect_options() {
        let cfg = parse(&[
            "--domain",
            "rect",
            "--rect-size",
            "1",
            "0.25",
            "--nx",
            "64",
            "--ny",
            "16",
            "--neumann",
            "top,bottom",
            "--alpha",
            "0.125",
        ])
        .unwrap();
        assert_eq!(cfg.run.resolution, Resolution::Cells { nx: 64, ny: 16 });
        assert_eq!(cfg.run.domain.marker(Side::Top), BoundaryCondition::Neumann);
        assert_eq!(
            cfg.run.domain.marker(Side::Left),
            BoundaryCondition::Dirichlet
        );
    }

    #[test]
    fn flag_misuse_names_the_flag() {
        let cases: &[(&[&str], &str)] = &[
            (&["--neumann", "top"], "--neumann"),
            (&["--domain", "rect", "--level", "2"], "--level"),
            (
                &["--domain", "rect", "--neumann", "left,right,top,bottom"],
                "--neumann",
            ),
            (&["--domain", "rect", "--neumann", "front"], "--neumann"),
            (&["--domain", "rect", "--nx", "0"], "--nx"),
            (&["--lumping", "--degree", "2"], "--lumping"),
            (&["--a1sq", "-1"], "--a1sq"),
            (&["--alpha", "0"], "--alpha"),
            (&["--sweep", "5", "3"], "--sweep"),
            (&["--samples", "1"], "--samples"),
            (&["--tol", "2"], "--tol"),
            (&["--level", "9"], "--level"),
            (&["--output", "/nonexistent-dir/x"], "--output"),
            (&["--bogus"], "--bogus"),
        ];
        for (args, flag) in cases {
            let msg = flag_of(parse(args).unwrap_err());
            assert!(msg.contains(flag), "{args:?}: {msg}");
        }
    }

    #[test]
    fn suffix_naming() {
        let p = Path::new("out/run");
        assert_eq!(
            with_suffix(p, "_k5", "csv"),
            PathBuf::from("out/run_k5.csv")
        );
        assert_eq!(with_suffix(p, "", "json"), PathBuf::from("out/run.json"));
    }
}
