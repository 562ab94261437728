//! Global structure of the fiber bundle of critical fibers over B_Z: the five
//! sections, their ten coincidence loci, cyclic orders, monodromy of the arc
//! covering, and the resulting Euler characteristics.

pub mod arrangement;
pub mod monodromy;
pub mod sweep;
pub mod trace;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fiber::{
    coamoeba_fiber_interval, fiber_model, invert_regular, lift_attained, lifts, model_arcs,
    RolledValue,
};
use crate::locus::{exceptional_value, rolled_value_at, Atlas, BasePoint};
use crate::plane::{maps, sample_critical_points, PlaneConfig};
use crate::projective::{Rp1Dir, Rp2Point};
use crate::{AtlasError, Result};
use arrangement::{arrangement_counts, ArrangementCounts};
use monodromy::{
    choose_base_point, generator_loops, min_marked_gap, monodromy, orbit_size, LoopSpec,
    Permutation, TransportResult,
};
use sweep::{degenerate_lap, sweep, LapReport, SweepReport, SweepSite};
use trace::{
    eval_point, locus_crossings, q_to_rp2, trace_all, unit_det,
    LocusCrossing, NodeEval, TraceGrid, TracedLocus,
};

/// The five distinguished sections of the fiber circle bundle: the
/// degenerate linkages with x = 0, y = 0, x + y = 1, x + ky = a, and the
/// triangle at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    Zero,
    P,
    One,
    A,
    Inf,
}

impl Section {
    pub const ALL: [Section; 5] = [Section::Zero, Section::P, Section::One, Section::A, Section::Inf];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Section::Zero => "s0",
            Section::P => "sp",
            Section::One => "s1",
            Section::A => "sa",
            Section::Inf => "sinf",
        }
    }

    /// The ten unordered pairs, in lexicographic index order.
    pub fn pairs() -> [(Section, Section); 10] {
        let mut out = [(Section::Zero, Section::Zero); 10];
        let mut n = 0;
        for i in 0..5 {
            for j in i + 1..5 {
                out[n] = (Section::ALL[i], Section::ALL[j]);
                n += 1;
            }
        }
        out
    }
}

/// How a coincidence locus is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocusKind {
    /// a curve traced in the affine chart and closed through infinity
    AffineTrace,
    /// the whole exceptional divisor over a base point
    ExceptionalDivisor(BasePoint),
    LineAtInfinity,
}

/// The circle of B_Z along which two sections coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceLocus {
    pub pair: (Section, Section),
    pub kind: LocusKind,
    pub components: usize,
    /// the closed curve in the disk model (affine traces only)
    pub polyline: Vec<Complex64>,
    /// largest chordal gap of the pair's marked points along the locus
    pub max_gap: f64,
    pub lap: LapReport,
}

impl CoincidenceLocus {
    pub fn is_circle(&self) -> bool {
        self.components == 1
    }
}

/// Where a triple coincidence was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TripleSite {
    /// crossing of two traced loci, disk-model point
    Chart(Complex64),
    /// parameter along a divisor or the line at infinity
    Sweep(SweepSite, f64),
}

/// Two index-sharing pairs coinciding at one point: three equal sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleCoincidence {
    pub pairs: [(Section, Section); 2],
    pub site: TripleSite,
    pub residual: f64,
}

/// Everything found by tracing and sweeping at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceScan {
    pub grid: TraceGrid,
    pub traced: Vec<TracedLocus>,
    pub sweeps: Vec<SweepReport>,
    /// crossings of index-disjoint traced loci: arrangement vertices
    pub vertices: Vec<LocusCrossing>,
    pub triples: Vec<TripleCoincidence>,
    pub base_q: [Complex64; 4],
}

/// Samples per sweep of a divisor or of the line at infinity.
pub const SWEEP_SAMPLES: usize = 720;

fn sweep_sites() -> [SweepSite; 5] {
    [
        SweepSite::Divisor(BasePoint::Zero),
        SweepSite::Divisor(BasePoint::One),
        SweepSite::Divisor(BasePoint::A),
        SweepSite::Divisor(BasePoint::D),
        SweepSite::Infinity,
    ]
}

/// Traces the six affine loci, sweeps the four divisors and the line at
/// infinity, and collects all pairwise crossings.
pub fn coincidence_scan(atlas: &Atlas, grid: TraceGrid) -> Result<CoincidenceScan> {
    let (field, traced) = trace_all(atlas, grid);
    let mut vertices = Vec::new();
    let mut triples = Vec::new();
    for i in 0..traced.len() {
        for j in i + 1..traced.len() {
            for c in locus_crossings(&field, &traced[i], &traced[j]) {
                if c.is_triple() {
                    triples.push(TripleCoincidence {
                        pairs: c.pairs,
                        site: TripleSite::Chart(c.q),
                        residual: c.residual,
                    });
                } else {
                    vertices.push(c);
                }
            }
        }
    }
    let sweeps: Vec<SweepReport> = sweep_sites()
        .par_iter()
        .map(|&s| sweep(atlas, s, SWEEP_SAMPLES))
        .collect::<Result<_>>()?;
    for r in &sweeps {
        for (param, pairs) in r.triples(1e-6) {
            triples.push(TripleCoincidence {
                pairs,
                site: TripleSite::Sweep(r.site, param),
                residual: 0.0,
            });
        }
    }
    Ok(CoincidenceScan {
        grid,
        traced,
        sweeps,
        vertices,
        triples,
        base_q: field.base_q,
    })
}

/// Triple coincidences found by a full scan (expected empty).
pub fn triple_coincidence_scan(atlas: &Atlas, grid: TraceGrid) -> Result<Vec<TripleCoincidence>> {
    Ok(coincidence_scan(atlas, grid)?.triples)
}

/// Coarse triple scan used when validating a configuration.
pub fn coarse_triple_scan(cfg: &PlaneConfig) -> Result<Vec<TripleCoincidence>> {
    triple_coincidence_scan(&Atlas::new(*cfg)?, TraceGrid::coarse())
}

/// The pair coinciding identically along each structural locus.
pub fn structural_pair(site: SweepSite) -> Option<(Section, Section)> {
    match site {
        SweepSite::Divisor(BasePoint::Zero) => Some((Section::Zero, Section::P)),
        SweepSite::Divisor(BasePoint::One) => Some((Section::P, Section::One)),
        SweepSite::Divisor(BasePoint::A) => Some((Section::P, Section::A)),
        SweepSite::Divisor(BasePoint::D) => None,
        SweepSite::Infinity => Some((Section::P, Section::Inf)),
    }
}

/// The coincidence loci together with the scan they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceStudy {
    pub scan: CoincidenceScan,
    /// one per section pair, in [`Section::pairs`] order
    pub loci: Vec<CoincidenceLocus>,
    /// identically coinciding pairs on a sweep other than the expected one
    pub unexpected_identical: Vec<(SweepSite, (Section, Section))>,
    pub arrangement: ArrangementCounts,
}

fn traced_locus(atlas: &Atlas, t: &TracedLocus) -> Result<CoincidenceLocus> {
    if t.polylines.is_empty() {
        return Err(AtlasError::MissingPair(t.pair));
    }
    if !t.is_closed() {
        return Err(AtlasError::OpenCurve(t.pair));
    }
    let polyline = t.ordered_loop();
    let nodes: Vec<NodeEval> = polyline
        .par_iter()
        .filter_map(|&q| eval_point(&atlas.cfg, &q_to_rp2(q)))
        .collect();
    let max_gap = nodes
        .iter()
        .map(|n| unit_det(n, &n.gauge, t.pair).abs())
        .fold(0.0, f64::max);
    Ok(CoincidenceLocus {
        pair: t.pair,
        kind: LocusKind::AffineTrace,
        components: t.components,
        lap: degenerate_lap(&nodes, t.pair),
        polyline,
        max_gap,
    })
}

/// The ten coincidence loci, their arrangement and their degenerate-arc laps.
pub fn coincidence_study(atlas: &Atlas, grid: TraceGrid) -> Result<CoincidenceStudy> {
    let scan = coincidence_scan(atlas, grid)?;
    let mut loci: Vec<CoincidenceLocus> = scan
        .traced
        .iter()
        .map(|t| traced_locus(atlas, t))
        .collect::<Result<_>>()?;
    let mut unexpected_identical = Vec::new();
    for r in &scan.sweeps {
        let expected = structural_pair(r.site);
        for &p in &r.identical {
            if Some(p) != expected {
                unexpected_identical.push((r.site, p));
            }
        }
        let Some(pair) = expected else { continue };
        let Some(k) = r.identical.iter().position(|&p| p == pair) else {
            return Err(AtlasError::MissingPair(pair));
        };
        loci.push(CoincidenceLocus {
            pair,
            kind: match r.site {
                SweepSite::Divisor(b) => LocusKind::ExceptionalDivisor(b),
                SweepSite::Infinity => LocusKind::LineAtInfinity,
            },
            // a divisor and the line at infinity are circles
            components: 1,
            polyline: Vec::new(),
            max_gap: r.identical_gap[k],
            lap: degenerate_lap(&r.nodes, pair),
        });
    }
    loci.sort_by_key(|l| l.pair);
    for (l, p) in loci.iter().zip(Section::pairs()) {
        if l.pair != p {
            return Err(AtlasError::MissingPair(p));
        }
    }
    if loci.len() != 10 {
        return Err(AtlasError::MissingPair(Section::pairs()[loci.len().min(9)]));
    }
    let arrangement =
        arrangement_counts(&scan.traced, &scan.vertices, &scan.base_q, scan.grid.cell_size());
    Ok(CoincidenceStudy {
        scan,
        loci,
        unexpected_identical,
        arrangement,
    })
}

/// The ten loci alone.
pub fn trace_coincidence_loci(atlas: &Atlas, grid: TraceGrid) -> Result<Vec<CoincidenceLocus>> {
    Ok(coincidence_study(atlas, grid)?.loci)
}

/// Sections in the cyclic order of their marked points on the fiber circle,
/// coinciding sections forming one block. The fiber circle has no preferred
/// orientation, so the word is normalized up to rotation and reversal: it
/// starts with the block of s₀ and runs in the direction whose second block
/// has the smaller leading section.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CyclicWord(pub Vec<Vec<Section>>);

impl CyclicWord {
    pub fn from_blocks(mut blocks: Vec<Vec<Section>>) -> Self {
        for b in blocks.iter_mut() {
            b.sort();
        }
        let n = blocks.len();
        let start = blocks.iter().position(|b| b.contains(&Section::Zero)).unwrap_or(0);
        blocks.rotate_left(start);
        if n > 2 && blocks[n - 1][0] < blocks[1][0] {
            blocks[1..].reverse();
        }
        CyclicWord(blocks)
    }

    pub fn letters(&self) -> usize {
        self.0.len()
    }
}

impl std::fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|b| {
                let names: Vec<&str> = b.iter().map(|s| s.name()).collect();
                if b.len() == 1 {
                    names[0].to_string()
                } else {
                    format!("({})", names.join(" "))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Cyclic order of the five sections over a critical value.
pub fn cyclic_order(cfg: &PlaneConfig, c: &RolledValue) -> Result<CyclicWord> {
    let model = fiber_model(cfg, c)?;
    Ok(CyclicWord::from_blocks(model.clusters(cfg.tol.coincidence)))
}

/// Transport of the arcs around the generator loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub base_point: Complex64,
    pub base_gap: f64,
    pub loops: Vec<LoopSpec>,
    pub results: Vec<TransportResult>,
    pub orbit_size: usize,
    pub transitive: bool,
    /// constant loop and each loop followed by its reverse give the identity
    pub identities_hold: bool,
    /// concatenations of ordered generator pairs checked against products
    pub compositions_checked: usize,
    pub compositions_failed: usize,
}

/// Monodromy of the generator loops around the exceptional divisors and
/// through infinity, with groupoid checks.
pub fn monodromy_report(atlas: &Atlas) -> Result<MonodromyReport> {
    let p = choose_base_point(atlas);
    let base_gap = min_marked_gap(atlas, p).ok_or(AtlasError::NotCritical)?;
    let loops = generator_loops(atlas, p);
    let results: Vec<TransportResult> = loops
        .par_iter()
        .map(|l| monodromy(atlas, l, p))
        .collect::<Result<_>>()?;
    let perms: Vec<Permutation> = results.iter().map(|r| r.permutation).collect();
    let orbit = orbit_size(&perms);

    let mut checks: Vec<(LoopSpec, Permutation)> =
        vec![(LoopSpec::constant(p), Permutation::identity())];
    for l in &loops {
        checks.push((l.then(&l.reversed()), Permutation::identity()));
    }
    let identity_count = checks.len();
    for i in 0..loops.len() {
        for j in 0..loops.len() {
            if i != j {
                checks.push((loops[i].then(&loops[j]), perms[i].then(&perms[j])));
            }
        }
    }
    let outcomes: Vec<bool> = checks
        .par_iter()
        .map(|(l, want)| monodromy(atlas, l, p).map(|r| r.permutation == *want))
        .collect::<Result<_>>()?;
    let identities_hold = outcomes[..identity_count].iter().all(|&ok| ok);
    let compositions_failed = outcomes[identity_count..].iter().filter(|&&ok| !ok).count();
    Ok(MonodromyReport {
        base_point: p,
        base_gap,
        loops,
        results,
        orbit_size: orbit,
        transitive: orbit == 5,
        identities_hold,
        compositions_checked: outcomes.len() - identity_count,
        compositions_failed,
    })
}

/// Critical values 2Arg(z) of `n` sampled points z of Z.
pub fn sampled_critical_values(cfg: &PlaneConfig, n: usize, seed: u64) -> Result<Vec<RolledValue>> {
    sample_critical_points(cfg, n, seed)?
        .iter()
        .map(|pt| Ok(maps(cfg, pt)?.rolled))
        .collect()
}

/// Degree, connectivity and Euler characteristics of the arc covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    /// most frequent arc count over the sampled critical values
    pub degree: usize,
    pub degree_samples: usize,
    /// (arc count, occurrences) over the samples
    pub arc_histogram: Vec<(usize, usize)>,
    pub connected: bool,
    /// χ(RP²) minus one per blown-up point
    pub euler_base: i64,
    pub euler_cover: i64,
    /// χ(RP²) minus sixteen
    pub euler_sixteen: i64,
    /// coincidence circles whose degenerate arc closes after one lap
    pub boundary_circles: usize,
    pub arrangement: ArrangementCounts,
}

pub fn covering_report(
    cfg: &PlaneConfig,
    study: &CoincidenceStudy,
    mono: &MonodromyReport,
    samples: usize,
    seed: u64,
) -> Result<CoveringReport> {
    let values = sampled_critical_values(cfg, samples, seed)?;
    let counts: Vec<usize> = values
        .par_iter()
        .map(|c| Ok(fiber_model(cfg, c)?.distinct_marked(cfg.tol.coincidence)))
        .collect::<Result<_>>()?;
    let mut histogram: Vec<(usize, usize)> = Vec::new();
    for n in counts {
        match histogram.iter_mut().find(|(k, _)| *k == n) {
            Some(e) => e.1 += 1,
            None => histogram.push((n, 1)),
        }
    }
    histogram.sort();
    let degree = histogram.iter().max_by_key(|(_, m)| *m).map_or(0, |e| e.0);
    let euler_base = 1 - BasePoint::ALL.len() as i64;
    Ok(CoveringReport {
        degree,
        degree_samples: samples,
        arc_histogram: histogram,
        connected: mono.transitive,
        euler_base,
        euler_cover: degree as i64 * euler_base,
        euler_sixteen: 1 - 16,
        boundary_circles: study
            .loci
            .iter()
            .filter(|l| l.is_circle() && l.lap.closed)
            .count(),
        arrangement: study.arrangement,
    })
}

/// Arc counts observed over generic values, on coincidence circles and at
/// arrangement vertices, with the label-uniqueness audit of every arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcCensus {
    pub generic: Vec<usize>,
    pub on_circle: Vec<usize>,
    pub at_vertex: Vec<usize>,
    pub values: usize,
    pub labels_checked: usize,
    pub multiple_arcs: usize,
    pub unmatched: usize,
}

fn distinct_sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

pub fn arc_census(atlas: &Atlas, study: &CoincidenceStudy, samples: usize, seed: u64) -> Result<ArcCensus> {
    let cfg = &atlas.cfg;
    let tol = cfg.tol.coincidence;
    let generic = sampled_critical_values(cfg, samples, seed)?;
    // points of the traced circles away from every vertex of the arrangement
    let scan = &study.scan;
    let mut vertex_q: Vec<Complex64> = scan.base_q.to_vec();
    vertex_q.extend(scan.vertices.iter().map(|v| v.q));
    for t in &scan.traced {
        vertex_q.extend(t.infinity_points().iter().flat_map(|&q| [q, -q]));
    }
    let clear = 10.0 * scan.grid.cell_size();
    let mut circle = Vec::new();
    for l in &study.loci {
        let stride = (l.polyline.len() / 40).max(1);
        for &q in l.polyline.iter().step_by(stride) {
            if vertex_q.iter().all(|v| (q - v).norm() > clear) {
                circle.push(rolled_value_at(cfg, &q_to_rp2(q))?);
            }
        }
    }
    let mut vertex = Vec::new();
    for v in &scan.vertices {
        vertex.push(rolled_value_at(cfg, &q_to_rp2(v.q))?);
    }
    // structural circles: sweep samples away from transient crossings, and
    // the transient crossings themselves
    for r in &scan.sweeps {
        if structural_pair(r.site).is_none() {
            continue;
        }
        let value = |t: f64| -> Result<RolledValue> {
            match r.site {
                SweepSite::Divisor(b) => exceptional_value(atlas, b, Rp1Dir::from_angle(t)),
                SweepSite::Infinity => rolled_value_at(cfg, &Rp2Point::at_infinity(t)),
            }
        };
        for i in (0..r.samples).step_by(r.samples / 24) {
            let t = PI * (i as f64 + 0.5) / r.samples as f64;
            let far = r.crossings.iter().all(|c| {
                let d = (c.param - t).rem_euclid(PI);
                d.min(PI - d) > 0.02
            });
            if far {
                circle.push(value(t)?);
            }
        }
        for c in &r.crossings {
            vertex.push(value(c.param)?);
        }
    }
    let audit = |values: &[RolledValue]| -> Result<(Vec<usize>, usize, usize, usize)> {
        let rows: Vec<(usize, usize, usize)> = values
            .par_iter()
            .map(|c| {
                let model = fiber_model(cfg, c)?;
                let arcs = model_arcs(&model, tol);
                let (mut multiple, mut unmatched) = (0, 0);
                for arc in &arcs {
                    match coamoeba_fiber_interval(cfg, &arc.label, 1e-9) {
                        Ok(_) => {}
                        Err(AtlasError::MultipleArcs(_)) => multiple += 1,
                        Err(_) => unmatched += 1,
                    }
                }
                Ok((arcs.len(), multiple, unmatched))
            })
            .collect::<Result<_>>()?;
        Ok((
            distinct_sorted(rows.iter().map(|r| r.0).collect()),
            rows.iter().map(|r| r.0).sum(),
            rows.iter().map(|r| r.1).sum(),
            rows.iter().map(|r| r.2).sum(),
        ))
    };
    let (g, gl, gm, gu) = audit(&generic)?;
    let (c, cl, cm, cu) = audit(&circle)?;
    let (v, vl, vm, vu) = audit(&vertex)?;
    Ok(ArcCensus {
        generic: g,
        on_circle: c,
        at_vertex: v,
        values: generic.len() + circle.len() + vertex.len(),
        labels_checked: gl + cl + vl,
        multiple_arcs: gm + cm + vm,
        unmatched: gu + cu + vu,
    })
}

/// Lifts of a regular value to (S¹)⁴ and which of them are attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SixteenFoldReport {
    /// indices (π-shift bit patterns) of the attained lifts
    pub attained: Vec<usize>,
    /// lift equal to the argument tuple of the preimage
    pub preimage_lift: Option<usize>,
    pub passed: bool,
}

pub fn sixteen_fold_check(cfg: &PlaneConfig, c: &RolledValue) -> Result<SixteenFoldReport> {
    let pt = invert_regular(cfg, c)?;
    let arg = maps(cfg, &pt)?.arg;
    let all = lifts(c);
    let preimage_lift = all.iter().position(|l| l.distance(&arg) < 1e-9);
    let mut attained = Vec::new();
    for (i, l) in all.iter().enumerate() {
        if lift_attained(cfg, l)? {
            attained.push(i);
        }
    }
    let passed = attained.len() == 1 && preimage_lift == Some(attained[0]);
    Ok(SixteenFoldReport {
        attained,
        preimage_lift,
        passed,
    })
}
