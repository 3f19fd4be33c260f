//! Experiment runner behind the command line: configuration, checks, JSON
//! reports and data artifacts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::barriers::{
    barrier_csv, build_barriers, sign_check_grid, sign_refinement, BarrierKind, BarrierSearch, BarrierSpec,
    ReducedPoint,
};
use crate::cone_stability::{
    cone_report, exact_mu_min, minimize_form, simons_exponents, simons_instability_certificate, ConeSpec,
    OscillatingFunction, DEFAULT_ANNULUS,
};
use crate::error::{Error, Result};
use crate::foliation::{integrate_leaf, linear_analysis, verify_trapping_boundary_on, LeafProfile};
use crate::lagrangian::{
    known_witness, levelset_convexity_witness, rotate_eigenvalue, rotate_hessian, ConvexityOutcome, RotationAngle,
    WITNESS_TOL,
};
use crate::lawson_osserman::{
    equivariance_check, lawson_osserman_report, mss_residual_at, random_point, LoConeMap,
};
use crate::mse_solver::{dirichlet_solve, growth_exponent, verify_trapping, SolverConfig, SymmetricGrid};
use crate::mss2d::{
    expected_metric_density, generate_solution, jorgens_reduction, refinement_study, rotation_from_angle,
    scherk_height, HolomorphicPoly, MapGrid,
};
use crate::perturbed_leaf::PerturbedLeaf;
use crate::plot::{svg_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    Leaf,
    Perturb,
    Barrier,
    SolveMse,
    Simons,
    Slag,
    Mss2d,
    LawsonOsserman,
    FullReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    Count,
    Seed,
    Text,
}

/// A recognised parameter with its default.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: &'static str,
    pub kind: ParamKind,
    pub help: &'static str,
}

const fn p(key: &'static str, default: &'static str, kind: ParamKind, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, kind, help }
}

use ParamKind::{Count, Real, Seed, Text};

const LEAF_PARAMS: &[ParamSpec] = &[
    p("s_max", "200", Real, "outer radius of the leaf integration"),
    p("tol", "1e-12", Real, "relative integration tolerance"),
    p("boundary_samples", "10000", Count, "samples per trapping-boundary curve"),
];
const PERTURB_PARAMS: &[ParamSpec] = &[
    p("s_max", "200", Real, "outer radius of the leaf integration"),
    p("tol", "1e-12", Real, "relative integration tolerance"),
    p("margin_window", "50", Real, "curvature margin is checked on [0, margin_window]"),
];
const BARRIER_PARAMS: &[ParamSpec] = &[
    p("s_max", "200", Real, "outer radius of the leaf integration"),
    p("tol", "1e-12", Real, "relative integration tolerance"),
    p("a_start", "10", Real, "first supersolution constant tried"),
    p("b_start", "0.015625", Real, "first subsolution constant tried"),
    p("check_radius", "8", Real, "side of the sign-check square"),
    p("check_points", "16", Count, "grid points per side of the sign check"),
    p("check_h", "0.02", Real, "coarsest finite-difference step of the sign check"),
];
const MSE_PARAMS: &[ParamSpec] = &[
    p("s_max", "200", Real, "outer radius of the leaf integration"),
    p("tol", "1e-12", Real, "relative integration tolerance"),
    p("b_start", "0.015625", Real, "first subsolution constant tried"),
    p("radius", "8", Real, "disk radius R"),
    p("cells", "128", Count, "cells per side, h = R / cells"),
    p("solver_tol", "1e-8", Real, "nonlinear residual tolerance"),
    p("max_iter", "500", Count, "iteration cap"),
];
const SIMONS_PARAMS: &[ParamSpec] = &[
    p("n", "7", Count, "dimension of the cone"),
    p("kappa", "6", Real, "|A|^2 r^2 on the cone"),
    p("gamma", "1.9", Real, "constant in the Simons inequality"),
    p("nodes", "256", Count, "radial nodes of the test family on [1, 20]"),
];
const SLAG_PARAMS: &[ParamSpec] = &[
    p("n", "3", Count, "number of eigenvalues"),
    p("theta", "0", Real, "phase of the level set (accepts pi, pi/2, ...)"),
    p("samples", "100000", Count, "level-set samples"),
    p("identity_samples", "10000", Count, "random inputs for the rotation identities"),
    p("seed", "1", Seed, "random seed"),
];
const MSS2D_PARAMS: &[ParamSpec] = &[
    p("lambda", "2", Real, "eigenvalue of sqrt(det g) g^{-1}"),
    p("coeffs", "0,0,0.25", Text, "coefficients of H, comma separated, re or re:im"),
    p("angle", "0.3", Real, "rotation of the domain"),
    p("half_width", "2", Real, "half width of the sampled square"),
    p("nodes", "33", Count, "nodes per side on the coarsest grid"),
    p("refinements", "3", Count, "number of grid doublings"),
    p("density_constant", "10", Real, "C in the bound deviation <= C h^2"),
];
const LO_PARAMS: &[ParamSpec] = &[
    p("samples", "100", Count, "random points with |z| in [1/2, 2]"),
    p("seed", "1", Seed, "random seed"),
];

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Leaf,
        Experiment::Perturb,
        Experiment::Barrier,
        Experiment::SolveMse,
        Experiment::Simons,
        Experiment::Slag,
        Experiment::Mss2d,
        Experiment::LawsonOsserman,
        Experiment::FullReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Leaf => "leaf",
            Experiment::Perturb => "perturb",
            Experiment::Barrier => "barrier",
            Experiment::SolveMse => "solve-mse",
            Experiment::Simons => "simons",
            Experiment::Slag => "slag",
            Experiment::Mss2d => "mss2d",
            Experiment::LawsonOsserman => "lawson-osserman",
            Experiment::FullReport => "full-report",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{name}`")))
    }

    pub fn parameters(self) -> &'static [ParamSpec] {
        match self {
            Experiment::Leaf => LEAF_PARAMS,
            Experiment::Perturb => PERTURB_PARAMS,
            Experiment::Barrier => BARRIER_PARAMS,
            Experiment::SolveMse => MSE_PARAMS,
            Experiment::Simons => SIMONS_PARAMS,
            Experiment::Slag => SLAG_PARAMS,
            Experiment::Mss2d => MSS2D_PARAMS,
            Experiment::LawsonOsserman => LO_PARAMS,
            Experiment::FullReport => &[],
        }
    }
}

/// Reals also accept `pi`, `pi/k`, `k*pi` and `-pi/k`.
fn parse_real(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, t),
    };
    let v = if body == "pi" {
        PI
    } else if let Some(d) = body.strip_prefix("pi/") {
        PI / d.trim().parse::<f64>().ok()?
    } else if let Some(k) = body.strip_suffix("*pi") {
        k.trim().parse::<f64>().ok()? * PI
    } else {
        return None;
    };
    (v.is_finite()).then_some(sign * v)
}

fn canonical(kind: ParamKind, key: &str, value: &str) -> Result<String> {
    let bad = |what: &str| Error::Config(format!("parameter `{key}` expects {what}, got `{value}`"));
    Ok(match kind {
        ParamKind::Real => format!("{}", parse_real(value).ok_or_else(|| bad("a real number"))?),
        ParamKind::Count => format!("{}", value.trim().parse::<usize>().map_err(|_| bad("a non-negative integer"))?),
        ParamKind::Seed => format!("{}", value.trim().parse::<u64>().map_err(|_| bad("an unsigned integer"))?),
        ParamKind::Text => value.trim().to_string(),
    })
}

/// Experiment, parameters and output directory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Canonical parameter values, defaults filled in.
    pub params: BTreeMap<String, String>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(experiment: Experiment, output_dir: impl Into<PathBuf>) -> Self {
        let params = experiment
            .parameters()
            .iter()
            .map(|s| (s.key.to_string(), canonical(s.kind, s.key, s.default).expect("defaults parse")))
            .collect();
        Self { experiment, params, output_dir: output_dir.into() }
    }

    /// Sets a parameter; dashes in the key count as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let spec = self
            .experiment
            .parameters()
            .iter()
            .find(|s| s.key == key)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{key}` for `{}`", self.experiment.name())))?;
        let v = canonical(spec.kind, &key, value)?;
        self.params.insert(key, v);
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    fn get(&self, key: &str) -> &str {
        self.params.get(key).map(String::as_str).unwrap_or_else(|| panic!("undeclared parameter {key}"))
    }

    pub fn real(&self, key: &str) -> f64 {
        parse_real(self.get(key)).expect("validated on insert")
    }

    pub fn count(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated on insert")
    }

    pub fn seed(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated on insert")
    }

    pub fn text(&self, key: &str) -> &str {
        self.get(key)
    }

    /// `experiment = name` followed by the sorted `key = value` lines.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("experiment = {}\n", self.experiment.name());
        for (k, v) in &self.params {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn input_hash(&self) -> String {
        git_blob_hash(self.canonical_text().as_bytes())
    }
}

/// SHA-256 over `blob <len>\0<content>`, the framing git uses for objects.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// `value <= tolerance`.
    pub fn le(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance }
    }

    /// `value >= bound`.
    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value >= bound, value, tolerance: bound }
    }

    /// `value > bound`.
    pub fn gt(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value > bound, value, tolerance: bound }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub input_hash: String,
    pub checks: Vec<Check>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), names: vec![] })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

/// Runs the experiment, writes its artifacts and `report.json` into the
/// output directory and returns the report.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let mut art = Artifacts::new(&cfg.output_dir)?;
    let checks = match cfg.experiment {
        Experiment::Leaf => run_leaf(cfg, &mut art)?,
        Experiment::Perturb => run_perturb(cfg, &mut art)?,
        Experiment::Barrier => run_barrier(cfg, &mut art)?,
        Experiment::SolveMse => run_mse(cfg, &mut art)?,
        Experiment::Simons => run_simons(cfg, &mut art)?,
        Experiment::Slag => run_slag(cfg, &mut art)?,
        Experiment::Mss2d => run_mss2d(cfg, &mut art)?,
        Experiment::LawsonOsserman => run_lawson_osserman(cfg, &mut art)?,
        Experiment::FullReport => return run_full(cfg),
    };
    finish(cfg.experiment.name(), cfg.params.clone(), cfg.input_hash(), checks, art)
}

fn finish(
    name: &str,
    config: BTreeMap<String, String>,
    input_hash: String,
    checks: Vec<Check>,
    mut art: Artifacts,
) -> Result<Report> {
    art.names.push("report.json".into());
    let report = Report { experiment: name.into(), config, input_hash, checks, artifacts: art.names.clone() };
    fs::write(art.dir.join("report.json"), report.to_json()?)?;
    Ok(report)
}

fn run_full(cfg: &RunConfig) -> Result<Report> {
    let art = Artifacts::new(&cfg.output_dir)?;
    let mut checks = vec![];
    let mut artifacts = vec![];
    let mut hashes = String::new();
    for e in Experiment::ALL.into_iter().filter(|e| *e != Experiment::FullReport) {
        let sub = RunConfig::new(e, cfg.output_dir.join(e.name()));
        let r = run(&sub)?;
        hashes.push_str(&sub.canonical_text());
        for mut c in r.checks {
            c.name = format!("{}/{}", e.name(), c.name);
            checks.push(c);
        }
        artifacts.extend(r.artifacts.into_iter().map(|a| format!("{}/{a}", e.name())));
    }
    let mut art = art;
    art.names = artifacts;
    finish(cfg.experiment.name(), cfg.params.clone(), git_blob_hash(hashes.as_bytes()), checks, art)
}

fn leaf_from(cfg: &RunConfig) -> Result<LeafProfile> {
    integrate_leaf(cfg.real("s_max"), cfg.real("tol"))
}

fn run_leaf(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let leaf = leaf_from(cfg)?;
    let mut checks = vec![
        Check::le("sigma_pp_at_origin", (leaf.sigma_pp[0] - 0.75).abs(), 1e-6),
        Check::le("leaf_residual", leaf.max_residual(), 1e-8),
        Check::le("trapped_from_radius", leaf.trapping_entry().unwrap_or(f64::INFINITY), 5.0),
        Check::gt("asymptotic_a", leaf.a, 0.0),
        Check::le("expansion_constant", leaf.expansion_constant(10.0), 1.0),
    ];

    let b = verify_trapping_boundary_on(cfg.count("boundary_samples"), 1.001, 1e3)?;
    checks.push(Check::le("boundary_p_at_one", b.p_at_one.abs() as f64, 0.0));
    checks.push(Check::le("boundary_p_prime_at_one", (b.p_prime_at_one - 1).abs() as f64, 0.0));
    checks.push(Check::gt("boundary_inward_flux", b.top_min_margin.min(b.bottom_min_margin), 0.0));

    let lin = linear_analysis();
    let exact = [(-3.0, [1.0, -2.0]), (-4.0, [1.0, -3.0])];
    let eig_err = lin
        .eigenpairs
        .iter()
        .zip(&exact)
        .map(|((l, v), (le, ve))| (l - le).abs().max((v[0] - ve[0]).abs()).max((v[1] - ve[1]).abs()))
        .fold(0.0, f64::max);
    checks.push(Check::le("linearization_eigenpairs", eig_err, 0.0));
    checks.push(Check::le("slope_form_at_one", (lin.form_at_one - 2.0).abs(), 1e-12));
    checks.push(Check::le("slope_form_at_five_halves", (lin.form_at_five_halves - 208.0 / 29.0).abs(), 1e-12));

    art.write("leaf.csv", &leaf.to_csv())?;
    art.write("phase.csv", &leaf.phase_csv())?;
    art.json("trapping_boundary.json", &b)?;
    art.json("linearization.json", &lin)?;
    let dev: Vec<(f64, f64)> = leaf.s_grid.iter().zip(&leaf.sigma).map(|(s, g)| (*s, g - s)).collect();
    art.write("leaf.svg", &svg_plot("Leaf deviation from the cone", "s", "sigma - s", &[Series::new("sigma - s", dev)]))?;
    let traj: Vec<(f64, f64)> = leaf.phase().iter().map(|p| (p.x, p.y)).collect();
    let x_hi = traj.iter().map(|p| p.0).fold(1.0_f64, f64::max).min(10.0);
    let xs: Vec<f64> = (0..=200).map(|k| 1.0 + (x_hi - 1.0) * k as f64 / 200.0).collect();
    let traj: Vec<(f64, f64)> = traj.into_iter().filter(|p| p.0 <= x_hi).collect();
    art.write(
        "phase.svg",
        &svg_plot(
            "Phase trajectory and trapping region",
            "x",
            "y",
            &[
                Series::new("trajectory", traj),
                Series::new("y = 1/x", xs.iter().map(|&x| (x, 1.0 / x)).collect()),
                Series::new("y = x^-5/2", xs.iter().map(|&x| (x, x.powf(-2.5))).collect()),
            ],
        ),
    )?;
    Ok(checks)
}

fn perturbed_from(cfg: &RunConfig) -> Result<PerturbedLeaf> {
    PerturbedLeaf::new(leaf_from(cfg)?)
}

fn run_perturb(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let pl = perturbed_from(cfg)?;
    let window = cfg.real("margin_window");
    let min_margin = pl
        .s_grid()
        .iter()
        .zip(&pl.margin)
        .filter(|(s, _)| **s <= window)
        .map(|(_, m)| *m)
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::ge("eps0", pl.eps0, 1e-4),
        Check::ge("curvature_margin", min_margin, pl.eps0 / 2.0),
        Check::le("linearized_residual", pl.solution.max_residual, 1e-6),
        Check::gt("convexity", pl.min_convexity(), 0.0),
    ];
    art.write("perturbed_leaf.csv", &pl.to_csv())?;
    let f: Vec<(f64, f64)> = pl.s_grid().iter().zip(&pl.solution.f).map(|(s, f)| (*s, *f)).collect();
    art.write("perturbation.svg", &svg_plot("Solution of L f = sigma^-9/2", "s", "f", &[Series::new("f", f)]))?;
    Ok(checks)
}

fn barrier_search(cfg: &RunConfig) -> BarrierSearch {
    let mut search = BarrierSearch::default();
    search.b_start = cfg.real("b_start");
    if cfg.params.contains_key("a_start") {
        search.a_start = cfg.real("a_start");
        search.check_radius = cfg.real("check_radius");
        search.check_points = cfg.count("check_points");
        search.check_h = cfg.real("check_h");
    }
    search
}

#[derive(Serialize)]
struct BarrierArtifact<'a> {
    eps0: f64,
    a: f64,
    b: f64,
    d: f64,
    c_req: f64,
    final_margin: f64,
    report: &'a crate::barriers::BarrierReport,
    refinements: Vec<crate::barriers::SignRefinement>,
}

fn run_barrier(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let search = barrier_search(cfg);
    let (spec, rep) = build_barriers(perturbed_from(cfg)?, &search)?;
    let grid = sign_check_grid(search.check_radius, search.check_points);
    let sup = sign_refinement(&spec, BarrierKind::Supersolution, &grid, search.check_h)?;
    let sub = sign_refinement(&spec, BarrierKind::Subsolution, &grid, search.check_h)?;
    let checks = vec![
        Check::ge("final_inequality_margin", rep.final_margin, rep.constants.c_req),
        Check::flag("supersolution_sign_refinement", sup.passed),
        Check::flag("subsolution_sign_refinement", sub.passed),
        Check::le("ordering_violations", rep.ordering_violations as f64, 0.0),
        Check::flag("leaves_ordered", rep.leaves_ordered),
    ];
    art.write("barriers.csv", &barrier_csv(&spec, &grid, search.check_h)?)?;
    art.json(
        "barriers.json",
        &BarrierArtifact {
            eps0: rep.eps0,
            a: rep.a,
            b: rep.b,
            d: rep.d,
            c_req: rep.constants.c_req,
            final_margin: rep.final_margin,
            report: &rep,
            refinements: vec![sup, sub],
        },
    )?;
    let ray: Vec<f64> = (1..=120).map(|k| 0.05 * k as f64).collect();
    let upper: Vec<(f64, f64)> = ray
        .iter()
        .map(|&s| {
            let v = spec.supersolution_log_value(ReducedPoint { s, t: 2.0 * s }).ok();
            (s, v.map(|l| l.log_abs / std::f64::consts::LN_10).unwrap_or(f64::NAN))
        })
        .collect();
    let lower: Vec<(f64, f64)> = ray
        .iter()
        .map(|&s| {
            let v = spec.subsolution_value(ReducedPoint { s, t: 2.0 * s }).unwrap_or(f64::NAN);
            (s, v.log10())
        })
        .collect();
    art.write(
        "barriers.svg",
        &svg_plot(
            "Barriers along t = 2s",
            "s",
            "log10 u",
            &[Series::new("supersolution", upper), Series::new("subsolution", lower)],
        ),
    )?;
    Ok(checks)
}

fn solve_on(spec: &BarrierSpec, r: f64, cells: usize, scfg: &SolverConfig) -> Result<SymmetricGrid> {
    dirichlet_solve(r, r / cells as f64, |s, t| spec.subsolution_value(ReducedPoint { s, t }), scfg)
}

#[derive(Serialize)]
struct MseArtifact {
    radius: f64,
    h: f64,
    iterations: usize,
    newton_steps: usize,
    residual: f64,
    residual_history: Vec<f64>,
    violations: crate::mse_solver::TrappingReport,
    violations_refined: crate::mse_solver::TrappingReport,
    eps_h: f64,
    growth_radii: Vec<f64>,
    growth_maxima: Vec<f64>,
    growth: crate::mse_solver::GrowthFit,
}

fn run_mse(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let search = barrier_search(cfg);
    let (spec, _) = build_barriers(perturbed_from(cfg)?, &search)?;
    let r = cfg.real("radius");
    let cells = cfg.count("cells");
    let scfg = SolverConfig { tol: cfg.real("solver_tol"), max_iter: cfg.count("max_iter"), ..SolverConfig::default() };
    let sol = solve_on(&spec, r, cells, &scfg)?;
    let fine = solve_on(&spec, r, 2 * cells, &scfg)?;
    let eps_h = sol.refinement_difference(&fine)?;
    let trap = verify_trapping(&sol, &spec)?;
    let trap_fine = verify_trapping(&fine, &spec)?;
    let radii = vec![r / 2.0, r, 2.0 * r];
    let mut maxima = vec![];
    for &rr in &radii {
        maxima.push(if rr == r { sol.max_abs() } else { solve_on(&spec, rr, cells, &scfg)?.max_abs() });
    }
    let growth = growth_exponent(&radii, &maxima)?;
    let (v0, v1) = (trap.max_violation(), trap_fine.max_violation());
    let checks = vec![
        Check::le("nonlinear_residual", sol.residual, scfg.tol),
        Check::le("iterations", sol.iterations as f64, scfg.max_iter as f64),
        Check::le("trapping_violation", v0, eps_h),
        Check::flag("violation_shrinks", v1 == 0.0 || 3.0 * v1 <= v0),
        Check::le("growth_exponent_offset", (growth.exponent - 3.0).abs(), 0.5),
    ];
    art.write("mse.csv", &sol.to_csv())?;
    let hist: Vec<(f64, f64)> =
        sol.residual_history.iter().enumerate().map(|(k, v)| (k as f64, v.log10())).collect();
    art.json(
        "mse.json",
        &MseArtifact {
            radius: r,
            h: sol.h,
            iterations: sol.iterations,
            newton_steps: sol.newton_steps,
            residual: sol.residual,
            residual_history: sol.residual_history.clone(),
            violations: trap,
            violations_refined: trap_fine,
            eps_h,
            growth_radii: radii,
            growth_maxima: maxima,
            growth,
        },
    )?;
    art.write(
        "mse_residual.svg",
        &svg_plot("Nonlinear residual", "iteration", "log10 residual", &[Series::new("residual", hist)]),
    )?;
    Ok(checks)
}

fn run_simons(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let spec = ConeSpec::new(cfg.count("n"), cfg.real("kappa"))?;
    let gamma = cfg.real("gamma");
    let nodes = cfg.count("nodes");
    let report = cone_report(&spec, gamma, nodes)?;
    let fm = minimize_form(&spec, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1, nodes)?;
    let exact = exact_mu_min(spec.n, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1) - spec.kappa;
    let ex = simons_exponents(spec.n, gamma)?;
    let p = spec.n as f64 - 4.0;
    let mut checks = vec![
        Check::le("form_min_vs_exact", (fm.form_min - exact).abs(), 10.0 * fm.discretization_error),
        Check::flag("stability_matches_exact", report.stable == (exact >= 0.0)),
        Check::flag("oscillation_threshold", ex.oscillation == (p * p < 4.0 * gamma)),
    ];
    if ex.oscillation && spec.kappa > 0.0 {
        let cert = simons_instability_certificate(&spec, gamma)?;
        let predicted = gamma + spec.n as f64 - 3.0 - spec.kappa;
        checks.push(Check::le("certificate_margin", (cert.margin - predicted).abs(), 1e-6));
        let osc = OscillatingFunction::new(spec.n, gamma, DEFAULT_ANNULUS.0)?;
        let worst = (0..100)
            .map(|k| {
                let r = osc.a + (osc.b - osc.a) * (k as f64 + 0.5) / 100.0;
                osc.ode_residual(r).abs() / osc.eval(r)[0].abs().max(1.0)
            })
            .fold(0.0, f64::max);
        checks.push(Check::le("oscillating_solution_residual", worst, 1e-10));
        art.json("certificate.json", &cert)?;
    }
    art.json("cone.json", &report)?;
    Ok(checks)
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Random eigenvalue admissible for `theta`, kept away from the pole.
fn admissible_lambda<R: Rng>(rng: &mut R, theta: f64) -> f64 {
    let lo = theta - PI / 2.0 + 0.05;
    let hi = PI / 2.0 - 0.05;
    rng.random_range(lo..hi).tan()
}

#[derive(Serialize)]
struct SweepArtifact {
    theta: f64,
    n: usize,
    seed: u64,
    outcome: ConvexityOutcome,
}

fn run_slag(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let n = cfg.count("n");
    let big_theta = cfg.real("theta");
    let seed = cfg.seed("seed");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut identity = 0.0_f64;
    let mut spectral = 0.0_f64;
    for _ in 0..cfg.count("identity_samples") {
        let theta = rng.random_range(0.05..PI - 0.2);
        let angle = RotationAngle::new(theta)?;
        let l = admissible_lambda(&mut rng, theta);
        identity = identity.max((rotate_eigenvalue(l, angle)?.atan() - (l.atan() - theta)).abs());

        let dim = 4;
        let q = random_orthogonal(&mut rng, dim);
        let mut lambdas: Vec<f64> = (0..dim).map(|_| admissible_lambda(&mut rng, theta)).collect();
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas.clone())) * q.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let rot = rotate_hessian(&m, angle)?;
        let mut want: Vec<f64> =
            lambdas.drain(..).map(|l| rotate_eigenvalue(l, angle)).collect::<Result<Vec<_>>>()?;
        want.sort_by(|a, b| b.total_cmp(a));
        let mut got: Vec<f64> = SymmetricEigen::new(rot.matrix.clone()).eigenvalues.iter().copied().collect();
        got.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in got.iter().zip(&want) {
            spectral = spectral.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    let mut checks = vec![
        Check::le("arctan_rotation_identity", identity, 1e-10),
        Check::le("hessian_spectral_consistency", spectral, 1e-10),
    ];
    let outcome = levelset_convexity_witness(n, big_theta, cfg.count("samples"), seed)?;
    let threshold = (n as f64 - 2.0) * PI / 2.0;
    let expect_convex = big_theta >= threshold - 1e-12;
    let found = matches!(outcome, ConvexityOutcome::Witness { .. });
    checks.push(Check {
        name: "convexity_matches_threshold".into(),
        passed: found != expect_convex,
        value: outcome.min_value(),
        tolerance: -WITNESS_TOL,
    });
    if n == 3 && big_theta == 0.0 {
        let w = known_witness();
        checks.push(Check::le("known_witness_value", (w.value + 1.0).abs(), 0.0));
    }
    if let ConvexityOutcome::Witness { record, .. } = &outcome {
        art.json("witness.json", record)?;
    }
    art.json("levelset.json", &SweepArtifact { theta: big_theta, n, seed, outcome })?;
    Ok(checks)
}

fn parse_coeffs(text: &str) -> Result<HolomorphicPoly> {
    let mut out = vec![];
    for part in text.split(',') {
        let part = part.trim();
        let (re, im) = match part.split_once(':') {
            Some((a, b)) => (parse_real(a), parse_real(b)),
            None => (parse_real(part), Some(0.0)),
        };
        match (re, im) {
            (Some(re), Some(im)) => out.push(Complex64::new(re, im)),
            _ => return Err(Error::Config(format!("bad coefficient `{part}` in `{text}`"))),
        }
    }
    HolomorphicPoly::new(out).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Serialize)]
struct Mss2dArtifact {
    lambda: f64,
    half_width: f64,
    quadratic_defect: f64,
    quadratic_defect_relative: f64,
    path_discrepancy: f64,
    study: crate::mss2d::RefinementStudy,
    negative_control: crate::mss2d::RefinementStudy,
    jorgens: crate::mss2d::JorgensReduction,
    scalar_jorgens: crate::mss2d::JorgensReduction,
}

fn run_mss2d(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let poly = parse_coeffs(cfg.text("coeffs"))?;
    let lambda = cfg.real("lambda");
    let rot = rotation_from_angle(cfg.real("angle"));
    let base = cfg.count("nodes");
    let levels = cfg.count("refinements");
    if levels < 2 {
        return Err(Error::Config("refinements must be at least 2".into()));
    }
    let mut grids: Vec<MapGrid> = vec![];
    let (mut qd, mut qdr, mut path, mut half) = (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY);
    for k in 0..=levels {
        let nodes = (base - 1) * (1 << k) + 1;
        let s = generate_solution(&poly, lambda, rot, cfg.real("half_width"), nodes)?;
        qd = qd.max(s.quadratic_defect);
        qdr = qdr.max(s.quadratic_defect_relative);
        path = path.max(s.path_discrepancy);
        half = half.min(s.half_width);
        grids.push(s.grid);
    }
    let expected = expected_metric_density(lambda, &rot);
    let study = refinement_study(&grids, expected)?;
    let perturbed: Vec<MapGrid> = grids.iter().map(|g| g.perturbed(1e-2)).collect();
    let control = refinement_study(&perturbed, expected)?;
    let finest = grids.last().expect("at least two grids");
    let jorgens = jorgens_reduction(finest, 2.0 * grids[0].spacing(), 1e-6)?;
    let scherk = MapGrid::sample(1.2, 129, 1, |x| Ok(vec![scherk_height(x)?]))?;
    let scalar = jorgens_reduction(&scherk, 0.1, 1e-6)?;

    let order_gap = |o: &[f64]| o.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
    let density_ratio = study.density.iter().zip(&study.spacing).map(|(d, h)| d / (h * h)).fold(0.0, f64::max);
    let control_ratio = control.outer.last().unwrap() / control.outer[0];
    let checks = vec![
        Check::le("quadratic_identity", qdr, 1e-10),
        Check::le("path_independence", path, 1e-9),
        Check::le("outer_order_offset", order_gap(&study.outer_orders), 0.3),
        Check::le("inner_order_offset", order_gap(&study.inner_orders), 0.3),
        Check::le("density_constancy", density_ratio, cfg.real("density_constant")),
        Check::le("monge_ampere_det", jorgens.max_det_deviation, 1e-6),
        Check::gt("monge_ampere_positive", jorgens.min_eigenvalue, 0.0),
        Check::ge("negative_control_flagged", control_ratio, 0.5),
        Check::le("scalar_eigenvalues", scalar.scalar_eigen_mismatch.unwrap_or(f64::INFINITY), 1e-6),
    ];
    let shown = grids.iter().rev().find(|g| g.nodes <= 129).unwrap_or(&grids[0]);
    art.write("mss2d.csv", &shown.to_csv())?;
    art.json(
        "mss2d.json",
        &Mss2dArtifact {
            lambda,
            half_width: half,
            quadratic_defect: qd,
            quadratic_defect_relative: qdr,
            path_discrepancy: path,
            study,
            negative_control: control,
            jorgens,
            scalar_jorgens: scalar,
        },
    )?;
    Ok(checks)
}

fn run_lawson_osserman(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let seed = cfg.seed("seed");
    let rep = lawson_osserman_report(cfg.count("samples"), seed)?;
    let k = rep.k_star;
    let g = LoConeMap::new(k)?.metric([1.0, 0.0, 0.0, 0.0])?;
    let want = [1.0 + k * k, 1.0, 1.0 + 4.0 * k * k, 1.0 + 4.0 * k * k];
    let mut metric_err = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            let w = if i == j { want[i] } else { 0.0 };
            metric_err = metric_err.max((g[(i, j)] - w).abs());
        }
    }
    let axis = mss_residual_at([1.0, 0.0, 0.0, 0.0], k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut equiv = 0.0_f64;
    for _ in 0..20 {
        let x = random_point(&mut rng, 0.5, 2.0);
        equiv = equiv.max(equivariance_check(x, 1.0)?.difference);
    }
    let checks = vec![
        Check::le("k_star_error", (k - 5.0_f64.sqrt() / 2.0).abs(), 1e-10),
        Check::le("max_residual", rep.max_residual, 1e-6),
        Check::le("axis_metric", metric_err, 1e-14),
        Check::le("axis_transverse_components", axis[1].abs().max(axis[2].abs()), 0.0),
        Check::le("equivariance_unit_slope", equiv, 1e-6),
    ];
    art.json("lawson_osserman.json", &rep)?;
    Ok(checks)
}
