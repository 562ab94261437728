//! The verification report: one check per acceptance criterion, each with
//! its measured values and the bounds they are held to.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::trace::TraceGrid;
use crate::covering::{
    arc_census, coincidence_study, covering_report, monodromy_report, sixteen_fold_check,
    CoincidenceStudy,
};
use crate::fiber::{invert_regular, invert_via_lambda};
use crate::locus::{d_circles_check, pencil_model, phi, phi_lines, Atlas};
use crate::plane::{
    crit_det_unchecked, grad_crit_det, jacobian_oracle, maps,
    random_segment, random_torus_points, sample_critical_points, validate_config,
    GenericityReport, PlaneConfig, TorusPoint,
};
use crate::projective::concurrency_residual;
use crate::render::{render, FigureKind, FigureSpec};
use crate::{AtlasError, Result};

pub const SCHEMA: &str = "coamoeba-atlas/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Quick,
    Full,
}

/// Sample sizes of one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub oracle_points: usize,
    pub oracle_segments: usize,
    pub values: usize,
    pub pencil_samples: usize,
    pub grid: TraceGrid,
}

impl Level {
    pub fn parse(s: &str) -> Option<Level> {
        match s {
            "quick" => Some(Level::Quick),
            "full" => Some(Level::Full),
            _ => None,
        }
    }

    pub fn sizes(self) -> Sizes {
        match self {
            Level::Quick => Sizes {
                oracle_points: 10_000,
                oracle_segments: 200,
                values: 1000,
                pencil_samples: 24,
                grid: TraceGrid::standard(),
            },
            Level::Full => Sizes {
                oracle_points: 100_000,
                oracle_segments: 2000,
                values: 10_000,
                pencil_samples: 48,
                grid: TraceGrid::fine(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

/// A measured quantity. Non-finite reals are stored as text so that every
/// report survives a JSON round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Real(f64),
    Integer(i64),
    Integers(Vec<i64>),
    Flag(bool),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Below(f64),
    Above(f64),
    Equals(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: Value,
    /// absent for report-only values
    pub bound: Option<Bound>,
}

impl Measurement {
    pub fn passes(&self) -> bool {
        match (&self.bound, &self.value) {
            (None, _) => true,
            (Some(Bound::Below(b)), Value::Real(v)) => v < b,
            (Some(Bound::Above(b)), Value::Real(v)) => v > b,
            (Some(Bound::Below(b)), Value::Integer(v)) => (*v as f64) < *b,
            (Some(Bound::Above(b)), Value::Integer(v)) => (*v as f64) > *b,
            (Some(Bound::Equals(want)), v) => want == v,
            _ => false,
        }
    }
}

fn real(x: f64) -> Value {
    if x.is_finite() {
        Value::Real(x)
    } else {
        Value::Text(format!("{x}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: u32,
    pub name: String,
    pub status: Status,
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub config: PlaneConfig,
    pub seed: u64,
    pub level: Level,
    pub sizes: Sizes,
    pub validation: GenericityReport,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AtlasError::Config(e.to_string()))
    }

    /// The report with every runtime removed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.runtime_ms = None;
        }
        r
    }
}

pub const CHECK_NAMES: [&str; 11] = [
    "criticality-oracle",
    "birational-inversion",
    "concurrency",
    "pencil-of-conics",
    "sections-and-coincidences",
    "covering",
    "euler-characteristics",
    "interval-fibers",
    "sixteen-fold",
    "regularity-of-z",
    "determinism",
];

/// Accumulates the measurements of one check.
struct CheckBuilder(Vec<Measurement>);

impl CheckBuilder {
    fn new() -> Self {
        CheckBuilder(Vec::new())
    }
    fn push(&mut self, name: &str, value: Value, bound: Option<Bound>) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            bound,
        });
    }
    fn below(&mut self, name: &str, v: f64, b: f64) {
        self.push(name, real(v), Some(Bound::Below(b)));
    }
    fn above(&mut self, name: &str, v: f64, b: f64) {
        self.push(name, real(v), Some(Bound::Above(b)));
    }
    fn equals(&mut self, name: &str, v: Value, want: Value) {
        self.push(name, v, Some(Bound::Equals(want)));
    }
    fn count(&mut self, name: &str, v: usize, want: usize) {
        self.equals(name, Value::Integer(v as i64), Value::Integer(want as i64));
    }
    fn flag(&mut self, name: &str, v: bool) {
        self.equals(name, Value::Flag(v), Value::Flag(true));
    }
    fn info(&mut self, name: &str, v: Value) {
        self.push(name, v, None);
    }
}

fn finish(id: u32, outcome: Result<CheckBuilder>, runtime_ms: f64) -> Check {
    let (measurements, error) = match outcome {
        Ok(b) => (b.0, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let bounded = measurements.iter().any(|m| m.bound.is_some());
    let status = if error.is_some() || measurements.iter().any(|m| !m.passes()) {
        Status::Fail
    } else if bounded {
        Status::Pass
    } else {
        Status::ReportOnly
    };
    Check {
        id,
        name: CHECK_NAMES[id as usize - 1].into(),
        status,
        measurements,
        error,
        runtime_ms: Some(runtime_ms),
    }
}

fn timed<F: FnOnce() -> Result<CheckBuilder>>(id: u32, f: F) -> Check {
    let t = Instant::now();
    let out = f();
    finish(id, out, t.elapsed().as_secs_f64() * 1e3)
}

/// Independent deterministic seed for check `id`.
fn sub_seed(seed: u64, id: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

const ORACLE_STEP: f64 = 1e-5;

/// Zero of `f` on [lo, hi] by bisection, given a sign change there.
fn bisect_param<F: Fn(f64) -> Option<f64>>(f: F, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo)?;
    if flo * f(hi)? >= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn check_oracle(cfg: &PlaneConfig, sizes: &Sizes, seed: u64) -> Result<CheckBuilder> {
    let r = cfg.box_radius();
    let scale = r.powi(4);
    let pts = random_torus_points(cfg, sizes.oracle_points, seed);
    let rows: Vec<(bool, bool)> = pts
        .par_iter()
        .map(|pt| {
            let d = crit_det_unchecked(cfg, pt);
            let o = jacobian_oracle(cfg, pt, ORACLE_STEP)?;
            let compared = (d / scale).abs() > 1e-6;
            Ok((compared, compared && d.signum() != o.signum()))
        })
        .collect::<Result<_>>()?;
    let compared = rows.iter().filter(|r| r.0).count();
    let mismatches = rows.iter().filter(|r| r.1).count();

    // zeros of D and of the oracle along random segments, bracketed by the
    // first sign change of D on a coarse subdivision
    let zeros: Vec<Option<f64>> = (0..sizes.oracle_segments as u64)
        .into_par_iter()
        .map(|i| {
            let (wa, wb) = random_segment(cfg, seed, i);
            let at = |s: f64| -> [f64; 4] { std::array::from_fn(|j| wa[j] + s * (wb[j] - wa[j])) };
            let exact = |s: f64| Some(crit_det_unchecked(cfg, &TorusPoint::from_real(at(s))));
            let oracle = |s: f64| jacobian_oracle(cfg, &TorusPoint::from_real(at(s)), ORACLE_STEP).ok();
            let n = 64;
            for k in 0..n {
                let (s0, s1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                let (Some(f0), Some(f1)) = (exact(s0), exact(s1)) else { continue };
                if f0 * f1 >= 0.0 {
                    continue;
                }
                let (Some(z1), Some(z2)) = (bisect_param(exact, s0, s1), bisect_param(oracle, s0, s1))
                else {
                    continue;
                };
                return Some(dist4(&at(z1), &at(z2)));
            }
            None
        })
        .collect();
    let gaps: Vec<f64> = zeros.into_iter().flatten().collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    // distances in the box rescaled to unit radius, like the D threshold
    let mut b = CheckBuilder::new();
    b.info("points", Value::Integer(pts.len() as i64));
    b.info("points_compared", Value::Integer(compared as i64));
    b.count("sign_mismatches", mismatches, 0);
    b.above("zero_pairs", gaps.len() as f64, 0.0);
    b.info("max_zero_distance_raw", real(max_gap));
    b.below("max_zero_distance", max_gap / r, 1e-8);
    Ok(b)
}

fn check_inversion(cfg: &PlaneConfig, sizes: &Sizes, seed: u64) -> Result<CheckBuilder> {
    let pts = random_torus_points(cfg, sizes.values, seed);
    let rows: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|pt| {
            let c = maps(cfg, pt)?.rolled;
            let w = pt.to_real();
            let lin = invert_regular(cfg, &c)?;
            let lam = invert_via_lambda(cfg, &c)?;
            let norm = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            Ok((
                dist4(&lin.to_real(), &w) / norm,
                dist4(&lam.to_real(), &lin.to_real()) / norm,
            ))
        })
        .collect::<Result<_>>()?;
    let mut b = CheckBuilder::new();
    b.info("values", Value::Integer(rows.len() as i64));
    b.below("max_inversion_error", rows.iter().map(|r| r.0).fold(0.0, f64::max), 1e-9);
    b.below("max_lambda_path_gap", rows.iter().map(|r| r.1).fold(0.0, f64::max), 1e-8);
    Ok(b)
}

fn check_concurrency(cfg: &PlaneConfig, crit: &[TorusPoint]) -> Result<CheckBuilder> {
    let rows: Vec<(f64, bool)> = crit
        .par_iter()
        .map(|pt| {
            let c = maps(cfg, pt)?.rolled;
            let [l0, l1, la] = phi_lines(cfg, &c)?;
            let res = concurrency_residual([&l0, &l1, &la]);
            let not_concurrent = matches!(phi(cfg, &c), Err(AtlasError::NotConcurrent(_)));
            Ok((res, not_concurrent))
        })
        .collect::<Result<_>>()?;
    let mut b = CheckBuilder::new();
    b.info("critical_points", Value::Integer(rows.len() as i64));
    b.below("max_concurrency_residual", rows.iter().map(|r| r.0).fold(0.0, f64::max), 1e-6);
    b.count("not_concurrent_events", rows.iter().filter(|r| r.1).count(), 0);
    Ok(b)
}

fn check_pencil(atlas: &Atlas, sizes: &Sizes) -> Result<CheckBuilder> {
    let p = pencil_model(atlas, sizes.pencil_samples)?;
    let mut b = CheckBuilder::new();
    b.info("samples", Value::Integer(sizes.pencil_samples as i64));
    b.below("sigma3_over_sigma1", p.sigma_ratio, 1e-8);
    b.below("base_point_0_distance", p.base_match[0], 1e-6);
    b.below("base_point_1_distance", p.base_match[1], 1e-6);
    b.below("base_point_a_distance", p.base_match[2], 1e-6);
    b.below("base_point_d_distance", p.base_match[3], 1e-6);
    b.count("base_points_found", p.base_points.len(), 4);
    b.info("max_fit_residual", real(p.max_fit_residual));
    b.info("cross_ratio_error", real(p.cross_ratio_error));
    let circles = d_circles_check(&atlas.cfg, atlas.d)?;
    b.info(
        "d_circle_residual",
        real(circles.residuals.iter().copied().fold(0.0, f64::max)),
    );
    Ok(b)
}

fn check_sections(study: &CoincidenceStudy, cov: &crate::covering::CoveringReport) -> CheckBuilder {
    let mut b = CheckBuilder::new();
    let five = cov
        .arc_histogram
        .iter()
        .filter(|(n, _)| *n == 5)
        .map(|e| e.1)
        .sum::<usize>();
    b.count("values_with_5_marked_points", five, cov.degree_samples);
    b.count("loci", study.loci.len(), 10);
    b.count(
        "single_closed_components",
        study.loci.iter().filter(|l| l.is_circle()).count(),
        10,
    );
    b.count("triple_coincidences", study.scan.triples.len(), 0);
    b.count("unexpected_identical_pairs", study.unexpected_identical.len(), 0);
    b.info(
        "max_locus_gap",
        real(study.loci.iter().map(|l| l.max_gap).fold(0.0, f64::max)),
    );
    b
}

fn check_covering(
    cov: &crate::covering::CoveringReport,
    mono: &crate::covering::MonodromyReport,
) -> CheckBuilder {
    let mut b = CheckBuilder::new();
    b.count("degree", cov.degree, 5);
    b.count("orbit_size", mono.orbit_size, 5);
    b.flag("transitive", mono.transitive);
    b.flag("groupoid_identities", mono.identities_hold);
    b.count("composition_failures", mono.compositions_failed, 0);
    b.info(
        "permutations",
        Value::Text(
            mono.results
                .iter()
                .map(|r| format!("{:?}", r.permutation.0))
                .collect::<Vec<_>>()
                .join(" "),
        ),
    );
    b.count("boundary_circles", cov.boundary_circles, 10);
    b
}

fn check_euler(cov: &crate::covering::CoveringReport) -> CheckBuilder {
    let a = cov.arrangement;
    let mut b = CheckBuilder::new();
    b.info("vertices", Value::Integer(a.vertices as i64));
    b.info("edges", Value::Integer(a.edges as i64));
    b.info("faces", Value::Integer(a.faces as i64));
    b.equals("arrangement_euler", Value::Integer(a.euler()), Value::Integer(1));
    b.count("graph_components", a.graph_components, 1);
    b.equals("euler_base", Value::Integer(cov.euler_base), Value::Integer(-3));
    b.equals("euler_cover", Value::Integer(cov.euler_cover), Value::Integer(-15));
    b.equals("euler_sixteen_blowups", Value::Integer(cov.euler_sixteen), Value::Integer(-15));
    b
}

fn check_intervals(atlas: &Atlas, study: &CoincidenceStudy, sizes: &Sizes, seed: u64) -> Result<CheckBuilder> {
    let census = arc_census(atlas, study, sizes.values, seed)?;
    let ints = |v: &[usize]| Value::Integers(v.iter().map(|&n| n as i64).collect());
    let mut b = CheckBuilder::new();
    b.info("values", Value::Integer(census.values as i64));
    b.info("labels_checked", Value::Integer(census.labels_checked as i64));
    b.count("multiple_arcs_events", census.multiple_arcs, 0);
    b.count("unmatched_labels", census.unmatched, 0);
    b.equals("generic_arc_counts", ints(&census.generic), Value::Integers(vec![5]));
    b.equals("on_circle_arc_counts", ints(&census.on_circle), Value::Integers(vec![4]));
    b.equals("at_vertex_arc_counts", ints(&census.at_vertex), Value::Integers(vec![3]));
    Ok(b)
}

fn check_sixteen(cfg: &PlaneConfig, sizes: &Sizes, seed: u64) -> Result<CheckBuilder> {
    let pts = random_torus_points(cfg, sizes.values, seed);
    let passed: Vec<bool> = pts
        .par_iter()
        .map(|pt| Ok(sixteen_fold_check(cfg, &maps(cfg, pt)?.rolled)?.passed))
        .collect::<Result<_>>()?;
    let mut b = CheckBuilder::new();
    b.info("values", Value::Integer(passed.len() as i64));
    b.count("exactly_one_lift_attained", passed.iter().filter(|&&p| p).count(), passed.len());
    Ok(b)
}

fn check_regularity(cfg: &PlaneConfig, crit: &[TorusPoint]) -> Result<CheckBuilder> {
    let scale = cfg.box_radius().powi(3);
    let norms: Vec<f64> = crit
        .par_iter()
        .map(|pt| Ok(grad_crit_det(cfg, pt)?.iter().map(|g| g * g).sum::<f64>().sqrt() / scale))
        .collect::<Result<_>>()?;
    let mut b = CheckBuilder::new();
    b.info("critical_points", Value::Integer(norms.len() as i64));
    b.above("min_rescaled_gradient", norms.iter().copied().fold(f64::INFINITY, f64::min), 1e-4);
    Ok(b)
}

/// Checks 1 through 10 and the rendered figures of one run.
fn run_checks(
    atlas: &Atlas,
    sizes: &Sizes,
    seed: u64,
) -> (Vec<Check>, Vec<(FigureKind, Result<String>)>) {
    let cfg = &atlas.cfg;
    let mut checks = vec![
        timed(1, || check_oracle(cfg, sizes, sub_seed(seed, 1))),
        timed(2, || check_inversion(cfg, sizes, sub_seed(seed, 2))),
    ];
    let crit = sample_critical_points(cfg, sizes.values, sub_seed(seed, 3));
    checks.push(timed(3, || check_concurrency(cfg, crit.as_ref().map_err(|e| e.clone())?)));
    checks.push(timed(4, || check_pencil(atlas, sizes)));

    let t = Instant::now();
    let study = coincidence_study(atlas, sizes.grid);
    let mono = monodromy_report(atlas);
    let cov = match (&study, &mono) {
        (Ok(s), Ok(m)) => covering_report(cfg, s, m, sizes.values, sub_seed(seed, 6)),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    // the shared topology run is charged to check 5
    let shared_ms = t.elapsed().as_secs_f64() * 1e3;
    let topo = |f: &dyn Fn(&CoincidenceStudy, &crate::covering::MonodromyReport, &crate::covering::CoveringReport) -> Result<CheckBuilder>| {
        match (&study, &mono, &cov) {
            (Ok(s), Ok(m), Ok(c)) => f(s, m, c),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e.clone()),
        }
    };
    let mut c5 = timed(5, || topo(&|s, _, c| Ok(check_sections(s, c))));
    c5.runtime_ms = c5.runtime_ms.map(|ms| ms + shared_ms);
    checks.push(c5);
    checks.push(timed(6, || topo(&|_, m, c| Ok(check_covering(c, m)))));
    checks.push(timed(7, || topo(&|_, _, c| Ok(check_euler(c)))));
    checks.push(timed(8, || {
        topo(&|s, _, _| check_intervals(atlas, s, sizes, sub_seed(seed, 8)))
    }));
    checks.push(timed(9, || check_sixteen(cfg, sizes, sub_seed(seed, 9))));
    checks.push(timed(10, || check_regularity(cfg, crit.as_ref().map_err(|e| e.clone())?)));

    let figures = FigureKind::ALL
        .iter()
        .map(|&k| {
            let svg = render(atlas, &FigureSpec::new(k), sub_seed(seed, 11), study.as_ref().ok());
            (k, svg)
        })
        .collect();
    (checks, figures)
}

/// A report together with the figures rendered from the same run.
#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerificationReport,
    pub figures: Vec<(FigureKind, String)>,
}

fn gated(validation: &GenericityReport) -> Vec<Check> {
    let why = format!("configuration failed validation: {}", validation.failures().join(", "));
    (1..=11)
        .map(|id| Check {
            id,
            name: CHECK_NAMES[id as usize - 1].into(),
            status: Status::Fail,
            measurements: Vec::new(),
            error: Some(why.clone()),
            runtime_ms: None,
        })
        .collect()
}

fn checks_json(checks: &[Check]) -> String {
    let stripped: Vec<Check> = checks
        .iter()
        .cloned()
        .map(|mut c| {
            c.runtime_ms = None;
            c
        })
        .collect();
    serde_json::to_string(&stripped).expect("checks serialize")
}

/// Runs the whole suite. Determinism is checked by repeating every
/// computation on a thread pool of a different size and comparing the
/// serialized checks and the figure bytes.
pub fn verify_all(cfg: &PlaneConfig, seed: u64, level: Level) -> Verification {
    let sizes = level.sizes();
    let validation = validate_config(cfg);
    let atlas = if validation.passed() { Atlas::new(*cfg).ok() } else { None };
    let Some(atlas) = atlas else {
        let report = VerificationReport {
            schema: SCHEMA.into(),
            config: *cfg,
            seed,
            level,
            sizes,
            checks: gated(&validation),
            validation,
            passed: false,
        };
        return Verification {
            report,
            figures: Vec::new(),
        };
    };
    let (mut checks, figures) = run_checks(&atlas, &sizes, seed);

    let t = Instant::now();
    let threads = rayon::current_num_threads();
    let other = if threads > 1 { threads / 2 } else { 2 };
    let rerun = rayon::ThreadPoolBuilder::new()
        .num_threads(other)
        .build()
        .map_err(|e| AtlasError::Config(e.to_string()))
        .map(|pool| pool.install(|| run_checks(&atlas, &sizes, seed)));
    let det = rerun.map(|(checks2, figures2)| {
        let (a, b) = (checks_json(&checks), checks_json(&checks2));
        let mut bld = CheckBuilder::new();
        bld.info("threads", Value::Integers(vec![threads as i64, other as i64]));
        bld.info("report_bytes", Value::Integer(a.len() as i64));
        bld.flag("report_identical", a == b);
        let mut svg_bytes = 0;
        let mut identical = 0;
        for ((k, s1), (_, s2)) in figures.iter().zip(figures2.iter()) {
            match (s1, s2) {
                (Ok(x), Ok(y)) => {
                    svg_bytes += x.len();
                    identical += usize::from(x == y);
                }
                _ => bld.info(&format!("{}_error", k.name()), Value::Flag(true)),
            }
        }
        bld.info("svg_bytes", Value::Integer(svg_bytes as i64));
        bld.count("figures_identical", identical, FigureKind::ALL.len());
        bld
    });
    checks.push(finish(11, det, t.elapsed().as_secs_f64() * 1e3));

    let passed = checks.iter().all(|c| c.status != Status::Fail);
    let figures = figures
        .into_iter()
        .filter_map(|(k, s)| s.ok().map(|s| (k, s)))
        .collect();
    Verification {
        report: VerificationReport {
            schema: SCHEMA.into(),
            config: *cfg,
            seed,
            level,
            sizes,
            validation,
            checks,
            passed,
        },
        figures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_bounds() {
        let m = |v: Value, b: Bound| Measurement {
            name: "m".into(),
            value: v,
            bound: Some(b),
        };
        assert!(m(Value::Real(1e-10), Bound::Below(1e-9)).passes());
        assert!(!m(Value::Real(1e-8), Bound::Below(1e-9)).passes());
        assert!(!m(real(f64::NAN), Bound::Below(1.0)).passes());
        assert!(m(Value::Integers(vec![5]), Bound::Equals(Value::Integers(vec![5]))).passes());
        assert!(!m(Value::Integer(4), Bound::Equals(Value::Integer(5))).passes());
    }

    #[test]
    fn gated_report_has_every_check_and_round_trips() {
        let cfg = PlaneConfig::new(num_complex::Complex64::new(1.6, 1.2), 0.5.into());
        let v = verify_all(&cfg, 3, Level::Quick);
        assert!(!v.report.passed);
        assert_eq!(v.report.checks.len(), 11);
        assert!(v.report.checks.iter().all(|c| c.status == Status::Fail));
        let back = VerificationReport::from_json(&v.report.to_json()).unwrap();
        assert_eq!(back, v.report);
    }

    #[test]
    fn non_finite_values_survive_round_trip() {
        let c = finish(1, Ok({
            let mut b = CheckBuilder::new();
            b.below("x", f64::INFINITY, 1.0);
            b
        }), 0.0);
        assert_eq!(c.status, Status::Fail);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Check>(&text).unwrap(), c);
    }
}
