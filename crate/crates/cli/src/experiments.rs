//! The experiments behind each subcommand.
//!
//! Every experiment writes `<out>/<name>.json` (and CSV tables where noted)
//! and returns one summary line per result.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mclab_core::carriers::{
    density_bounds_check, direct_pushforward, disintegrate_with, toy_rho, toy_rho_at, verify_toy_identity,
    AdmissibilityConstants, Carrier, GridOptions, SimpleAdmissibleMeasure,
};
use mclab_core::hyperbolicity::{
    auto_aperture, boundary_exponent, central_lyapunov, check_cone_invariance, mostly_contracting_test,
    unstable_exponent, ConeField, HyperbolicityReport,
};
use mclab_core::measures::{
    basin_labels, cluster_samples, holonomy_probe_with, intermingling, sample_grid, weak_distance, EmpiricalMeasure,
    ExtractParams, GridSpec, HolonomyOptions, PhysicalMeasureReport, TestDictionary,
};
use mclab_core::pliss::{cocycle_lower_bound, detect_h, pliss_density, pliss_select, PlissInput};
use mclab_core::seed::{self, stream};
use mclab_core::stochastic::{kronecker_starts, zero_noise_test, ChainParams, ZeroNoiseRow};
use mclab_core::{Point, SkewProductMap};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carrier_csv;
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{write_csv, write_json, Cell, Envelope, SCHEMA};
use crate::sweep;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    VerifyPh,
    Lyapunov,
    MostlyContracting,
    Pliss,
    Disintegrate,
    ToyCheck,
    Physical,
    Basins,
    Holonomy,
    Stochastic,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::VerifyPh,
        Experiment::Lyapunov,
        Experiment::MostlyContracting,
        Experiment::Pliss,
        Experiment::Disintegrate,
        Experiment::ToyCheck,
        Experiment::Physical,
        Experiment::Basins,
        Experiment::Holonomy,
        Experiment::Stochastic,
        Experiment::Sweep,
    ];

    /// Subcommand name, also the stem of the JSON artifact.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyPh => "verify-ph",
            Experiment::Lyapunov => "lyapunov",
            Experiment::MostlyContracting => "mostly-contracting",
            Experiment::Pliss => "pliss",
            Experiment::Disintegrate => "disintegrate",
            Experiment::ToyCheck => "toy-check",
            Experiment::Physical => "physical",
            Experiment::Basins => "basins",
            Experiment::Holonomy => "holonomy",
            Experiment::Stochastic => "stochastic",
            Experiment::Sweep => "sweep",
        }
    }
}

/// Paths written and the summary lines to echo.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn check_degree(key: &str, degree: usize) -> Result<TestDictionary, ConfigError> {
    if !(1..=mclab_core::measures::dictionary::MAX_ACC_DEGREE).contains(&degree) {
        return Err(ConfigError(format!(
            "{key}: degree must lie in 1..={}",
            mclab_core::measures::dictionary::MAX_ACC_DEGREE
        )));
    }
    Ok(TestDictionary::new(degree))
}

fn emit<P: Serialize, R: Serialize>(
    out: &Path,
    exp: Experiment,
    cfg: &ExperimentConfig,
    map: Option<&SkewProductMap>,
    params: &P,
    result: &R,
    outcome: &mut Outcome,
) -> Result<()> {
    let path = out.join(format!("{}.json", exp.name()));
    let env = Envelope {
        schema: SCHEMA,
        experiment: exp.name(),
        seed: cfg.seed,
        map,
        params,
        result,
    };
    write_json(&path, &env)?;
    outcome.files.push(path);
    Ok(())
}

/// Runs `exp` and writes its artifacts under `out`.
pub fn run(exp: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    match exp {
        Experiment::ToyCheck => toy_check(cfg, out, &mut o)?,
        Experiment::Sweep => sweep::run(cfg, out, &mut o)?,
        _ => {
            let map = cfg.map.build()?;
            match exp {
                Experiment::VerifyPh => verify_ph(cfg, &map, out, &mut o)?,
                Experiment::Lyapunov => lyapunov(cfg, &map, out, &mut o)?,
                Experiment::MostlyContracting => mostly_contracting(cfg, &map, out, &mut o)?,
                Experiment::Pliss => pliss(cfg, &map, out, &mut o)?,
                Experiment::Disintegrate => disintegrate(cfg, &map, out, &mut o)?,
                Experiment::Physical => physical(cfg, &map, out, &mut o)?,
                Experiment::Basins => basins(cfg, &map, out, &mut o)?,
                Experiment::Holonomy => holonomy(cfg, &map, out, &mut o)?,
                Experiment::Stochastic => stochastic(cfg, &map, out, &mut o)?,
                Experiment::ToyCheck | Experiment::Sweep => unreachable!(),
            }
        }
    }
    Ok(o)
}

#[derive(Serialize)]
struct VerifyPhResult<'a> {
    #[serde(flatten)]
    report: &'a HyperbolicityReport,
    unstable_exponent: f64,
    domination_ratio: f64,
}

fn cone_for(cfg: &ExperimentConfig, map: &SkewProductMap) -> Result<ConeField, ConfigError> {
    match cfg.verify_ph.aperture {
        None => Ok(auto_aperture(map)),
        Some(a) => ConeField::new(a).map_err(|e| ConfigError(format!("verify_ph.aperture: {e}"))),
    }
}

fn verify_ph(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.verify_ph;
    let report = check_cone_invariance(map, cone_for(cfg, map)?, c.samples, cfg.seed)?;
    let result = VerifyPhResult {
        report: &report,
        unstable_exponent: unstable_exponent(map),
        domination_ratio: map.domination_ratio(),
    };
    emit(out, Experiment::VerifyPh, cfg, Some(map), c, &result, o)?;
    o.summary.push(format!(
        "verify-ph: tau_hat={:.6} n0_hat={} cone_invariant={} failures={}/{}",
        report.tau_hat, report.n0_hat, report.cone_invariant, report.failures, report.samples
    ));
    Ok(())
}

#[derive(Serialize)]
struct LyapunovResult {
    lambda_hat: f64,
    stderr: f64,
    n: usize,
    x0: Point,
    unstable_exponent: f64,
    /// Closed-form central exponent of Lebesgue measure on a boundary circle.
    boundary_exponent: f64,
}

fn lyapunov(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.lyapunov;
    let e = central_lyapunov(map, Point::new(c.theta, c.t), c.n)?;
    let result = LyapunovResult {
        lambda_hat: e.lambda_hat,
        stderr: e.stderr,
        n: e.n,
        x0: e.x0,
        unstable_exponent: unstable_exponent(map),
        boundary_exponent: boundary_exponent(map.coupling()),
    };
    emit(out, Experiment::Lyapunov, cfg, Some(map), c, &result, o)?;
    o.summary.push(format!(
        "lyapunov: lambda_hat={:.6} stderr={:.2e} n={} (boundary {:.6}, unstable {:.6})",
        result.lambda_hat, result.stderr, result.n, result.boundary_exponent, result.unstable_exponent
    ));
    Ok(())
}

#[derive(Serialize)]
struct CurveSummary {
    centre: Point,
    radius: f64,
    fraction_negative: f64,
    mean_lambda: f64,
    max_lambda: f64,
}

#[derive(Serialize)]
struct MostlyContractingResult {
    curves: Vec<CurveSummary>,
    min_fraction_negative: f64,
    tau_hat: f64,
    cone_invariant: bool,
    aperture: f64,
}

fn mostly_contracting(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.mostly_contracting;
    if c.curves == 0 {
        return Err(ConfigError("mostly_contracting.curves: need at least one curve".into()).into());
    }
    let consts = AdmissibilityConstants::for_map(map);
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for k in 0..c.curves {
        let mut rng = seed::derived_rng(cfg.seed, stream::CURVE_SHAPES, k as u64);
        let g = Carrier::random(&consts, c.radius, c.nodes_log2, &mut rng)?;
        let point_seed = seed::derive(cfg.seed, stream::CURVE_POINTS, k as u64);
        let r = mostly_contracting_test(map, &g, c.n, c.m_points, c.margin(), point_seed)?;
        for e in &r.estimates {
            rows.push(vec![
                Cell::from(k),
                Cell::F(e.x0.theta),
                Cell::F(e.x0.t),
                Cell::F(e.lambda_hat),
                Cell::F(e.stderr),
            ]);
        }
        curves.push(CurveSummary {
            centre: g.centre(),
            radius: g.radius(),
            fraction_negative: r.fraction_negative,
            mean_lambda: r.mean_lambda,
            max_lambda: r.max_lambda,
        });
    }
    let cone = check_cone_invariance(map, auto_aperture(map), cfg.verify_ph.samples, cfg.seed)?;
    let result = MostlyContractingResult {
        min_fraction_negative: curves.iter().map(|c| c.fraction_negative).fold(1.0, f64::min),
        curves,
        tau_hat: cone.tau_hat,
        cone_invariant: cone.cone_invariant,
        aperture: cone.aperture,
    };
    let csv = out.join("mostly-contracting.csv");
    write_csv(&csv, &["curve", "theta", "t", "lambda_hat", "stderr"], rows)?;
    o.files.push(csv);
    emit(out, Experiment::MostlyContracting, cfg, Some(map), c, &result, o)?;
    o.summary.push(format!(
        "mostly-contracting: min fraction_negative={:.4} over {} curves, tau_hat={:.6}",
        result.min_fraction_negative,
        result.curves.len(),
        result.tau_hat
    ));
    Ok(())
}

/// Membership statistics of `H` along typical orbits.
#[derive(Clone, Debug, Serialize)]
pub struct PlissResult {
    /// Measured central exponent `λ` along the tested orbits.
    pub lambda: f64,
    pub lambda_stderr: f64,
    /// Lower bound `h` of the block cocycle.
    pub h: f64,
    /// `δ = ε / (λ + 4ε − h)`.
    pub delta: f64,
    /// Guaranteed member density `δ / N`.
    pub density_bound: f64,
    pub tested: usize,
    pub members: usize,
    pub member_fraction: f64,
    /// Binomial standard error of `member_fraction`.
    pub stderr: f64,
    pub mean_passed_blocks: f64,
    /// Pliss times of the block-averaged cocycle along the first orbit.
    pub pliss_times: usize,
    pub pliss_blocks: usize,
    pub pliss_count_bound: f64,
}

/// Runs the `H` membership experiment; shared with the acceptance suite.
pub fn pliss_experiment(cfg: &ExperimentConfig, map: &SkewProductMap) -> Result<PlissResult> {
    let c = &cfg.pliss;
    if c.orbits == 0 || c.points < c.orbits || c.stride == 0 || c.burn == 0 {
        return Err(ConfigError("pliss: need orbits ≥ 1, points ≥ orbits, stride ≥ 1, burn ≥ 1".into()).into());
    }
    let starts = kronecker_starts(map, c.orbits);
    let per_orbit: Vec<(usize, usize, usize, f64, Vec<f64>)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, &x0)| -> Result<_> {
            let mut x = map.iterate(x0, c.burn);
            // exponent over the tested stretch of the orbit
            let count = (k + 1) * c.points / c.orbits - k * c.points / c.orbits;
            let lam = central_lyapunov(map, x, count * c.stride)?.lambda_hat;
            let (mut tested, mut members, mut passed) = (0, 0, 0);
            let mut blocks = Vec::new();
            for _ in 0..count {
                let m = detect_h(map, x, c.block, lam, c.eps, c.depth)?;
                tested += 1;
                members += usize::from(m.member);
                passed += m.passed_blocks;
                for _ in 0..c.stride {
                    x = map.step(x);
                }
            }
            if k == 0 {
                // block averages of log ∂_t h along the first orbit
                let mut y = map.iterate(x0, c.burn);
                for _ in 0..(count * c.stride / c.block).max(1) {
                    let mut s = 0.0;
                    for _ in 0..c.block {
                        let (next, dc) = map.step_with_dc(y);
                        s += dc.ln();
                        y = next;
                    }
                    blocks.push(s / c.block as f64);
                }
            }
            Ok((tested, members, passed, lam, blocks))
        })
        .collect::<Result<_>>()?;
    let tested: usize = per_orbit.iter().map(|r| r.0).sum();
    let members: usize = per_orbit.iter().map(|r| r.1).sum();
    let passed: usize = per_orbit.iter().map(|r| r.2).sum();
    let lams: Vec<f64> = per_orbit.iter().map(|r| r.3).collect();
    let lambda = lams.iter().sum::<f64>() / lams.len() as f64;
    let lambda_stderr = if lams.len() > 1 {
        let var = lams.iter().map(|l| (l - lambda).powi(2)).sum::<f64>() / (lams.len() - 1) as f64;
        (var / lams.len() as f64).sqrt()
    } else {
        0.0
    };
    let h = cocycle_lower_bound(map);
    let delta = pliss_density(lambda, c.eps, h);
    let p = members as f64 / tested as f64;

    let blocks = &per_orbit[0].4;
    let big_a = blocks.iter().sum::<f64>() / blocks.len() as f64;
    let selection = pliss_select(&PlissInput::new(blocks.clone(), h, big_a.max(h + 1e-12), c.eps))?;
    Ok(PlissResult {
        lambda,
        lambda_stderr,
        h,
        delta,
        density_bound: delta / c.block as f64,
        tested,
        members,
        member_fraction: p,
        stderr: (p * (1.0 - p) / tested as f64).sqrt(),
        mean_passed_blocks: passed as f64 / tested as f64,
        pliss_times: selection.indices.len(),
        pliss_blocks: blocks.len(),
        pliss_count_bound: selection.bound,
    })
}

fn pliss(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let r = pliss_experiment(cfg, map)?;
    emit(out, Experiment::Pliss, cfg, Some(map), &cfg.pliss, &r, o)?;
    o.summary.push(format!(
        "pliss: member_fraction={:.4}±{:.4} bound delta/N={:.3e} lambda={:.6} h={:.6} pliss_times={}/{} (≥ {:.1})",
        r.member_fraction, r.stderr, r.density_bound, r.lambda, r.h, r.pliss_times, r.pliss_blocks, r.pliss_count_bound
    ));
    Ok(())
}

/// The built-in source measure: a curved admissible arc with a wavy density.
pub fn default_source(k: u32) -> Result<SimpleAdmissibleMeasure> {
    let c = Carrier::from_graph(0.3, 0.09, k, |x| {
        let u = x - 0.3;
        (0.5 + 0.3 * u + 0.8 * u * u, 0.3 + 1.6 * u)
    })?;
    let n = c.len();
    let phi = (0..n).map(|i| 1.0 + 0.4 * (6.0 * i as f64 / n as f64).sin()).collect();
    Ok(SimpleAdmissibleMeasure::new(c, phi)?)
}

#[derive(Serialize)]
struct DisintegrateResult {
    n: usize,
    a: f64,
    source_nodes: usize,
    working_nodes: usize,
    resolved: bool,
    entries: usize,
    weight_mass: f64,
    full_radius_mass: f64,
    sandwich: mclab_core::carriers::lift::SandwichReport,
    density_bounds: mclab_core::carriers::lift::DensityBoundsReport,
    /// Weak distance between the evaluated lift and the direct pushforward.
    weak_distance: f64,
}

fn disintegrate(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.disintegrate;
    let dict = check_degree("disintegrate.degree", c.degree)?;
    let src = match &c.input {
        Some(p) => carrier_csv::read_measure(p)?,
        None => default_source(c.nodes_log2)?,
    };
    let opts = GridOptions {
        max_nodes: c.max_nodes,
        nodes_per_radius: c.nodes_per_radius,
    };
    let lift = disintegrate_with(&src, map, c.n, c.a, opts)?;
    let mu = lift.evaluate(&dict)?;
    let nu = direct_pushforward(&src, map, c.n, c.oracle_samples, &dict)?;
    let result = DisintegrateResult {
        n: lift.n(),
        a: lift.a(),
        source_nodes: src.carrier().len(),
        working_nodes: lift.working_nodes(),
        resolved: lift.resolved(),
        entries: lift.entries().len(),
        weight_mass: lift.weight_mass(),
        full_radius_mass: lift.full_radius_mass(),
        sandwich: lift.sandwich().clone(),
        density_bounds: density_bounds_check(&lift, c.density_bound)?,
        weak_distance: weak_distance(&mu, &nu, &dict)?,
    };

    let src_csv = out.join("disintegrate-source.csv");
    carrier_csv::write_measure(&src_csv, &src)?;
    o.files.push(src_csv);
    let lift_csv = out.join("disintegrate-lift.csv");
    write_csv(
        &lift_csv,
        &[
            "node",
            "theta",
            "t",
            "image_theta",
            "image_t",
            "rho",
            "radius",
            "child_nodes",
        ],
        lift.entries().iter().map(|e| {
            vec![
                Cell::from(e.node),
                Cell::F(e.x.theta),
                Cell::F(e.x.t),
                Cell::F(e.image.theta),
                Cell::F(e.image.t),
                Cell::F(e.rho),
                Cell::F(e.radius),
                Cell::from(e.child.as_ref().map_or(0, |m| m.carrier().len())),
            ]
        }),
    )?;
    o.files.push(lift_csv);
    // the input path is deliberately not echoed: artifacts must not depend on where inputs live
    let mut params = c.clone();
    params.input = None;
    emit(out, Experiment::Disintegrate, cfg, Some(map), &params, &result, o)?;
    o.summary.push(format!(
        "disintegrate: n={} a={} weak_distance={:.3e} weight_mass={:.12} full_radius_mass={:.4} sandwich_violations={} density_bounds={}",
        result.n,
        result.a,
        result.weak_distance,
        result.weight_mass,
        result.full_radius_mass,
        result.sandwich.violations,
        result.density_bounds.passed
    ));
    Ok(())
}

#[derive(Serialize)]
struct ToyRow {
    x: f64,
    rho: f64,
    error: f64,
}

#[derive(Serialize)]
struct ToyInterval {
    lo: f64,
    hi: f64,
    error: f64,
}

#[derive(Serialize)]
struct ToyResult {
    rho_closed_form: f64,
    max_rho_error: f64,
    max_identity_error: f64,
    rho: Vec<ToyRow>,
    intervals: Vec<ToyInterval>,
}

fn toy_check(cfg: &ExperimentConfig, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.toy_check;
    if !(c.lo > 0.0 && c.hi > c.lo && c.hi.is_finite()) || c.points < 2 {
        return Err(ConfigError("toy_check: need 0 < lo < hi < ∞ and points ≥ 2".into()).into());
    }
    let exact = toy_rho();
    let rho = (0..c.points)
        .map(|k| {
            // log-spaced sample of [lo, hi]
            let x = c.lo * (c.hi / c.lo).powf(k as f64 / (c.points - 1) as f64);
            let r = toy_rho_at(x)?;
            Ok(ToyRow {
                x,
                rho: r,
                error: (r - exact).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let intervals = (0..c.intervals)
        .map(|k| {
            let mut rng = seed::derived_rng(cfg.seed, stream::TOY_INTERVALS, k as u64);
            let (u, v): (f64, f64) = (rng.gen_range(c.lo..c.hi), rng.gen_range(c.lo..c.hi));
            let (lo, hi) = (u.min(v), u.max(v));
            Ok(ToyInterval {
                lo,
                hi,
                error: verify_toy_identity(lo, hi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = ToyResult {
        rho_closed_form: exact,
        max_rho_error: rho.iter().map(|r| r.error).fold(0.0, f64::max),
        max_identity_error: intervals.iter().map(|r| r.error).fold(0.0, f64::max),
        rho,
        intervals,
    };
    emit(out, Experiment::ToyCheck, cfg, None, c, &result, o)?;
    o.summary.push(format!(
        "toy-check: rho={:.10} max_rho_error={:.2e} max_identity_error={:.2e}",
        result.rho_closed_form, result.max_rho_error, result.max_identity_error
    ));
    Ok(())
}

/// Physical-measure report with distances to the boundary-circle moments.
#[derive(Serialize)]
pub struct PhysicalResult<'a> {
    pub n_measures: usize,
    /// Per centroid, weak distance to Lebesgue measure on `t = 0` and `t = 1`.
    pub circle_distances: Vec<[f64; 2]>,
    pub report: &'a PhysicalMeasureReport,
}

fn extract_params(cfg: &ExperimentConfig) -> Result<(GridSpec, TestDictionary), ConfigError> {
    let c = &cfg.physical;
    if c.grid == 0 || c.n < 2 {
        return Err(ConfigError("physical: need grid ≥ 1 and n ≥ 2".into()));
    }
    Ok((
        GridSpec::new(c.grid, cfg.seed),
        check_degree("physical.degree", c.degree)?,
    ))
}

pub fn circle_distances(report: &PhysicalMeasureReport, dict: &TestDictionary) -> Vec<[f64; 2]> {
    let circles = [dict.circle_moments(0.0), dict.circle_moments(1.0)];
    report
        .measures
        .iter()
        .map(|m| {
            [
                dict.distance(m.moments(), &circles[0]),
                dict.distance(m.moments(), &circles[1]),
            ]
        })
        .collect()
}

fn physical_summary(name: &str, r: &PhysicalMeasureReport) -> String {
    format!(
        "{name}: N={} fractions={:?} unresolved={:.4}",
        r.n_measures(),
        r.basin_fractions.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
        r.unresolved_fraction
    )
}

fn physical(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let (grid, dict) = extract_params(cfg)?;
    let c = &cfg.physical;
    let samples = sample_grid(map, &grid, c.n, &dict)?;
    let report = cluster_samples(&samples, params_of(cfg, grid), &dict)?;
    let result = PhysicalResult {
        n_measures: report.n_measures(),
        circle_distances: circle_distances(&report, &dict),
        report: &report,
    };
    emit(out, Experiment::Physical, cfg, Some(map), c, &result, o)?;
    o.summary.push(physical_summary("physical", &report));
    Ok(())
}

fn params_of(cfg: &ExperimentConfig, grid: GridSpec) -> ExtractParams {
    let c = &cfg.physical;
    ExtractParams {
        n: c.n,
        grid,
        tol_conv: c.tol_conv,
        delta_cluster: c.delta_cluster,
        degree: c.degree,
    }
}

#[derive(Serialize)]
struct BasinsResult<'a> {
    physical: PhysicalResult<'a>,
    intermingling: Option<mclab_core::measures::IntermingleReport>,
    threshold: f64,
    /// Whether the mixed-block fraction reaches the threshold.
    intermingled: bool,
}

fn basins(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let (grid, dict) = extract_params(cfg)?;
    let b = &cfg.basins;
    if b.block == 0 || b.block > grid.size {
        return Err(ConfigError(format!("basins.block: need 1 ≤ block ≤ physical.grid = {}", grid.size)).into());
    }
    let samples = sample_grid(map, &grid, cfg.physical.n, &dict)?;
    let report = cluster_samples(&samples, params_of(cfg, grid), &dict)?;
    let labels = basin_labels(&samples, &grid, &report, &dict);
    let mix = if report.n_measures() > 0 {
        Some(intermingling(&labels, b.block)?)
    } else {
        None
    };
    let csv = out.join("basins.csv");
    write_csv(
        &csv,
        &["i", "j", "theta", "t", "label", "lambda_hat", "converged"],
        labels.cells.iter().map(|c| {
            vec![
                Cell::from(c.i),
                Cell::from(c.j),
                Cell::F(c.theta),
                Cell::F(c.t),
                Cell::from(c.label),
                Cell::F(c.lambda_hat),
                Cell::B(c.converged),
            ]
        }),
    )?;
    o.files.push(csv);
    let result = BasinsResult {
        physical: PhysicalResult {
            n_measures: report.n_measures(),
            circle_distances: circle_distances(&report, &dict),
            report: &report,
        },
        intermingling: mix,
        threshold: b.threshold,
        intermingled: mix.is_some_and(|m| m.fraction >= b.threshold),
    };
    #[derive(Serialize)]
    struct Params<'a> {
        physical: &'a crate::config::PhysicalConfig,
        basins: &'a crate::config::BasinsConfig,
    }
    let params = Params {
        physical: &cfg.physical,
        basins: b,
    };
    emit(out, Experiment::Basins, cfg, Some(map), &params, &result, o)?;
    o.summary.push(physical_summary("basins", &report));
    match mix {
        Some(m) => o.summary.push(format!(
            "basins: mixed blocks {}/{} = {:.4} (threshold {}) intermingled={}",
            m.mixed, m.blocks, m.fraction, b.threshold, result.intermingled
        )),
        None => o
            .summary
            .push("basins: no physical measure found, intermingling not assessed".into()),
    }
    Ok(())
}

fn holonomy(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.holonomy;
    let line =
        |t: f64, m: f64| Carrier::from_graph(c.theta, c.radius, c.nodes_log2, move |x| (t + m * (x - c.theta), m));
    let g1 = line(c.t1, c.slope1)?;
    let g2 = line(c.t2, c.slope2)?;
    let opts = HolonomyOptions {
        samples: c.samples,
        windows: c.windows,
        contraction: c.contraction,
    };
    let r = holonomy_probe_with(&g1, &g2, map, c.n, opts)?;
    emit(out, Experiment::Holonomy, cfg, Some(map), c, &r, o)?;
    o.summary.push(format!(
        "holonomy: paired={:.4} max|Jac-1|={:.3e} curve_distance={:.3e} C_fit={}",
        r.paired_fraction,
        r.max_jacobian_deviation,
        r.curve_distance,
        r.c_fit.map_or("n/a".into(), |c| format!("{c:.4}"))
    ));
    Ok(())
}

/// Rebuilds the centroids of a physical (or basins) JSON artifact.
pub fn load_report(path: &Path, dict: &TestDictionary) -> Result<PhysicalMeasureReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}: not JSON", path.display()))?;
    if v["schema"] != SCHEMA {
        bail!("{}: expected schema {SCHEMA}", path.display());
    }
    let result = &v["result"];
    let report = if result["report"].is_object() {
        &result["report"]
    } else {
        &result["physical"]["report"]
    };
    let params: ExtractParamsJson = serde_json::from_value(report["params"].clone())
        .with_context(|| format!("{}: no physical-measure report", path.display()))?;
    if params.degree != dict.max_degree() {
        bail!(
            "{}: report uses dictionary degree {}, expected {}",
            path.display(),
            params.degree,
            dict.max_degree()
        );
    }
    let measures = report["measures"]
        .as_array()
        .context("report has no measures")?
        .iter()
        .map(|m| {
            let moments: Vec<f64> = serde_json::from_value(m["moments"].clone())?;
            Ok(EmpiricalMeasure::from_moments(moments, dict)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = serde_json::from_value(report["counts"].clone())?;
    Ok(PhysicalMeasureReport {
        basin_fractions: serde_json::from_value(report["basin_fractions"].clone())?,
        unresolved_count: serde_json::from_value(report["unresolved_count"].clone())?,
        unresolved_fraction: serde_json::from_value(report["unresolved_fraction"].clone())?,
        params: ExtractParams {
            n: params.n,
            grid: GridSpec::new(params.grid.size, params.grid.seed),
            tol_conv: params.tol_conv,
            delta_cluster: params.delta_cluster,
            degree: params.degree,
        },
        measures,
        counts,
    })
}

#[derive(serde::Deserialize)]
struct GridJson {
    size: usize,
    seed: u64,
}

#[derive(serde::Deserialize)]
struct ExtractParamsJson {
    n: usize,
    grid: GridJson,
    tol_conv: f64,
    delta_cluster: f64,
    degree: usize,
}

/// `r(ε)` is nonincreasing up to twice the pooled standard error.
pub fn residuals_nonincreasing(rows: &[ZeroNoiseRow]) -> bool {
    rows.windows(2).all(|w| {
        let pooled = w[0].stderr.unwrap_or(0.0).hypot(w[1].stderr.unwrap_or(0.0));
        w[1].residual <= w[0].residual + 2.0 * pooled
    })
}

#[derive(Serialize)]
struct StochasticResult {
    vertices: usize,
    /// `file` when read from a report, `extracted` otherwise.
    vertices_from: &'static str,
    rows: Vec<ZeroNoiseRow>,
    nonincreasing: bool,
}

fn stochastic(cfg: &ExperimentConfig, map: &SkewProductMap, out: &Path, o: &mut Outcome) -> Result<()> {
    let c = &cfg.stochastic;
    if c.eps_list.len() < 2 || c.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ConfigError("stochastic.eps_list: need at least two strictly decreasing levels".into()).into());
    }
    if c.chains == 0 || c.n_samp == 0 {
        return Err(ConfigError("stochastic: need chains ≥ 1 and n_samp ≥ 1".into()).into());
    }
    let dict = check_degree("physical.degree", cfg.physical.degree)?;
    let (report, from) = match &c.report {
        Some(p) => (load_report(p, &dict)?, "file"),
        None => {
            let (grid, _) = extract_params(cfg)?;
            let samples = sample_grid(map, &grid, cfg.physical.n, &dict)?;
            (cluster_samples(&samples, params_of(cfg, grid), &dict)?, "extracted")
        }
    };
    let params = ChainParams {
        kind: c.kind,
        n_burn: c.n_burn,
        n_samp: c.n_samp,
        n_chains: c.chains,
        seed: cfg.seed,
    };
    let rows = zero_noise_test(map, &c.eps_list, &report, &params, &dict)?;
    let result = StochasticResult {
        vertices: report.n_measures(),
        vertices_from: from,
        nonincreasing: residuals_nonincreasing(&rows),
        rows,
    };
    let mut p = c.clone();
    p.report = None;
    emit(out, Experiment::Stochastic, cfg, Some(map), &p, &result, o)?;
    for r in &result.rows {
        o.summary.push(format!(
            "stochastic: eps={} residual={:.4e} stderr={} alpha={:?}",
            r.eps,
            r.residual,
            r.stderr.map_or("n/a".into(), |s| format!("{s:.2e}")),
            r.alpha.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>()
        ));
    }
    o.summary
        .push(format!("stochastic: nonincreasing={}", result.nonincreasing));
    Ok(())
}
