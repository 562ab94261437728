//! Tracing the affine coincidence loci on a disk model of RP².
//!
//! The closed unit disk |q| ≤ 1 maps onto RP² by q ↦ (Re q : Im q : 1 − |q|),
//! i.e. p = q/(1 − |q|); the boundary circle is the line at infinity with
//! antipodal points identified.
//!
//! The disk is covered by polar charts: one centered at 0 spanning the whole
//! disk, and a log-polar patch around each base point 0, 1, a, d, which the
//! disk chart leaves out. Near a base point the critical value depends on the
//! direction of approach, so the fiber turns quickly in the plane; in the
//! patch's (log r, θ) coordinates it varies slowly and converges to the
//! exceptional divisor as r → 0.
//!
//! At every node the critical fiber is built from scratch, and the
//! coincidence of sections sᵢ, sⱼ is the vanishing of det(mᵢ, mⱼ) for their
//! homogeneous marked points. The determinant depends on the fiber gauge
//! (kernel sign and line representatives), so every comparison between nodes
//! first expresses both in a common gauge. Zero crossings on grid edges are
//! refined by bisection and joined by marching squares. Polylines are then
//! stitched: disk ends to patch ends on the patch rim, patch ends through the
//! base point (opposite directions on the innermost ring), and boundary ends
//! to the antipodal boundary point.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Section;
use crate::fiber::{classify_with, FiberClassification, FiberModel};
use crate::locus::{rolled_value_at, Atlas, BasePoint};
use crate::plane::PlaneConfig;
use crate::projective::Rp2Point;

/// Resolution of the disk chart and of the base-point patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceGrid {
    /// rings of the disk chart
    pub radial: usize,
    /// nodes per ring of the disk chart
    pub angular: usize,
    pub patch_radial: usize,
    pub patch_angular: usize,
    /// largest patch radius
    pub patch_max: f64,
    /// innermost patch ring as a fraction of the patch radius
    pub patch_depth: f64,
}

impl TraceGrid {
    pub fn coarse() -> Self {
        TraceGrid {
            radial: 90,
            angular: 360,
            patch_radial: 40,
            patch_angular: 360,
            patch_max: 0.12,
            patch_depth: 1e-4,
        }
    }

    pub fn standard() -> Self {
        TraceGrid {
            radial: 200,
            angular: 800,
            patch_radial: 80,
            patch_angular: 720,
            patch_max: 0.12,
            patch_depth: 1e-4,
        }
    }

    pub fn fine() -> Self {
        TraceGrid {
            radial: 400,
            angular: 1600,
            patch_radial: 160,
            patch_angular: 1440,
            patch_max: 0.12,
            patch_depth: 1e-4,
        }
    }

    /// Largest side of a disk-chart cell.
    pub fn cell_size(&self) -> f64 {
        (1.0 / (self.radial - 1) as f64).max(TAU / self.angular as f64)
    }
}

/// Disk-model point of RP² for q in the closed unit disk.
pub fn q_to_rp2(q: Complex64) -> Rp2Point {
    let r = q.norm().min(1.0);
    Rp2Point::new(q.re, q.im, 1.0 - r).expect("nonzero homogeneous point")
}

pub fn p_to_q(p: Complex64) -> Complex64 {
    p / (1.0 + p.norm())
}

/// Affine point of a disk-model q with |q| < 1.
pub fn q_to_p(q: Complex64) -> Option<Complex64> {
    let w = 1.0 - q.norm();
    (w > 0.0).then(|| q / w)
}

/// Gauge of a fiber model: kernel direction and line representatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub u: [f64; 4],
    pub reps: [Complex64; 4],
}

/// Marked points of the critical fiber at one point, in its own gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEval {
    pub gauge: Gauge,
    /// homogeneous marked points [−c0 : c1], and [1 : 0] for s_∞
    pub m: [[f64; 2]; 5],
}

impl NodeEval {
    pub fn from_model(f: &FiberModel) -> Self {
        let mut m = [[1.0, 0.0]; 5];
        for (mj, c) in m.iter_mut().zip(&f.coords) {
            *mj = [-c.c0, c.c1];
        }
        NodeEval {
            gauge: Gauge {
                u: f.u,
                reps: f.value.reps(),
            },
            m,
        }
    }

    fn u_flip(&self, reference: &Gauge) -> bool {
        let dot: f64 = (0..4).map(|i| self.gauge.u[i] * reference.u[i]).sum();
        dot < 0.0
    }

    fn rep_flip(&self, reference: &Gauge, s: Section) -> bool {
        s != Section::Inf && {
            let j = s.index();
            (self.gauge.reps[j] * reference.reps[j].conj()).re < 0.0
        }
    }

    /// det(mᵢ, mⱼ) expressed in the gauge of `reference`.
    pub fn det(&self, reference: &Gauge, pair: (Section, Section)) -> f64 {
        let (a, b) = (self.m[pair.0.index()], self.m[pair.1.index()]);
        let mut d = a[0] * b[1] - a[1] * b[0];
        if self.u_flip(reference) {
            d = -d;
        }
        if self.rep_flip(reference, pair.0) {
            d = -d;
        }
        if self.rep_flip(reference, pair.1) {
            d = -d;
        }
        d
    }
}

/// det(mᵢ, mⱼ)/(|mᵢ||mⱼ|) in the gauge `g`: the signed RP¹ chordal distance.
pub fn unit_det(n: &NodeEval, g: &Gauge, pair: (Section, Section)) -> f64 {
    let (a, b) = (n.m[pair.0.index()], n.m[pair.1.index()]);
    let scale = (a[0].hypot(a[1]) * b[0].hypot(b[1])).max(1e-300);
    n.det(g, pair) / scale
}

/// Critical fiber at a disk-model point (None only at base points).
pub fn fiber_at_q(cfg: &PlaneConfig, q: Complex64) -> Option<FiberModel> {
    let c = rolled_value_at(cfg, &q_to_rp2(q)).ok()?;
    match classify_with(cfg, &c, &cfg.tol, None) {
        FiberClassification::Critical { fiber } => Some(fiber),
        _ => None,
    }
}

/// Fiber marked points at a point of RP², or None where the value is not
/// critical (only at base points).
pub fn eval_point(cfg: &PlaneConfig, p: &Rp2Point) -> Option<NodeEval> {
    let c = rolled_value_at(cfg, p).ok()?;
    match classify_with(cfg, &c, &cfg.tol, None) {
        FiberClassification::Critical { fiber } => Some(NodeEval::from_model(&fiber)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Edge {
    /// (i, j)–(i+1, j)
    Radial(usize, usize),
    /// (i, j)–(i, j+1)
    Angular(usize, usize),
}

/// Which chart a polyline was traced in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    Disk,
    Patch(BasePoint),
    /// fine square chart over a region where the fiber turns fast
    Zoom(usize),
}

enum Geometry {
    /// center + rᵢ·e^{2πij/n} with increasing radii, periodic in j
    Polar { radii: Vec<f64>, angular: usize },
    /// center + (−half + j·s) + i(−half + i·s), s = 2·half/(n − 1)
    Square { half: f64, n: usize },
}

struct Chart {
    kind: ChartKind,
    center: Complex64,
    geometry: Geometry,
    nodes: Vec<Option<NodeEval>>,
}

impl Chart {
    fn rows(&self) -> usize {
        match &self.geometry {
            Geometry::Polar { radii, .. } => radii.len(),
            Geometry::Square { n, .. } => *n,
        }
    }

    fn cols(&self) -> usize {
        match &self.geometry {
            Geometry::Polar { angular, .. } => *angular,
            Geometry::Square { n, .. } => *n,
        }
    }

    fn periodic(&self) -> bool {
        matches!(self.geometry, Geometry::Polar { .. })
    }

    /// Number of cells per row.
    fn cell_cols(&self) -> usize {
        if self.periodic() {
            self.cols()
        } else {
            self.cols() - 1
        }
    }

    fn next_col(&self, j: usize) -> usize {
        if self.periodic() {
            (j + 1) % self.cols()
        } else {
            j + 1
        }
    }

    /// Chart coordinates (row, column) as real numbers.
    fn point(&self, i: f64, j: f64) -> Complex64 {
        match &self.geometry {
            Geometry::Polar { radii, angular } => {
                let i0 = (i.floor() as usize).min(radii.len() - 2);
                let r = radii[i0] + (i - i0 as f64) * (radii[i0 + 1] - radii[i0]);
                self.center + Complex64::from_polar(r, TAU * j / *angular as f64)
            }
            Geometry::Square { half, n } => {
                let s = 2.0 * half / (*n - 1) as f64;
                self.center + Complex64::new(-half + j * s, -half + i * s)
            }
        }
    }

    fn node_q(&self, i: usize, j: usize) -> Complex64 {
        match &self.geometry {
            Geometry::Polar { radii, angular } => {
                self.center + Complex64::from_polar(radii[i], TAU * (j % angular) as f64 / *angular as f64)
            }
            Geometry::Square { .. } => self.point(i as f64, j as f64),
        }
    }

    fn node(&self, i: usize, j: usize) -> Option<&NodeEval> {
        self.nodes[i * self.cols() + j % self.cols()].as_ref()
    }

    fn cell_valid(&self, i: usize, j: usize) -> bool {
        self.cell_corners(i, j)
            .iter()
            .all(|&(a, b)| self.node(a, b).is_some())
    }

    /// Corners c0 = (i, j), c1 = (i, j+1), c2 = (i+1, j+1), c3 = (i+1, j).
    fn cell_corners(&self, i: usize, j: usize) -> [(usize, usize); 4] {
        let jn = self.next_col(j);
        [(i, j), (i, jn), (i + 1, jn), (i + 1, j)]
    }

    /// Edges e0 (inner), e1, e2 (outer), e3.
    fn cell_edges(&self, i: usize, j: usize) -> [Edge; 4] {
        let jn = self.next_col(j);
        [
            Edge::Angular(i, j),
            Edge::Radial(i, jn),
            Edge::Angular(i + 1, j),
            Edge::Radial(i, j),
        ]
    }

    fn cell_center(&self, i: usize, j: usize) -> Complex64 {
        self.point(i as f64 + 0.5, j as f64 + 0.5)
    }

    /// Longest side of a cell.
    fn cell_extent(&self, i: usize, j: usize) -> f64 {
        let [a, b, c, d] = self.cell_corners(i, j).map(|(x, y)| self.node_q(x, y));
        (a - b).norm().max((b - c).norm()).max((c - d).norm()).max((d - a).norm())
    }

    fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                if i + 1 < self.rows() {
                    out.push(Edge::Radial(i, j));
                }
                if j < self.cell_cols() {
                    out.push(Edge::Angular(i, j));
                }
            }
        }
        out
    }

    fn edge_nodes(&self, e: Edge) -> ((usize, usize), (usize, usize)) {
        match e {
            Edge::Radial(i, j) => ((i, j), (i + 1, j)),
            Edge::Angular(i, j) => ((i, j), (i, self.next_col(j))),
        }
    }

    /// Point at s ∈ [0, 1] along an edge; polar angular edges follow their
    /// circle, so points on the boundary stay on the line at infinity.
    fn edge_point(&self, e: Edge, s: f64) -> Complex64 {
        match e {
            Edge::Radial(i, j) => self.point(i as f64 + s, j as f64),
            Edge::Angular(i, j) => self.point(i as f64, j as f64 + s),
        }
    }

    /// Refined zero of the pair determinant on an edge.
    fn edge_crossing(&self, cfg: &PlaneConfig, e: Edge, pair: (Section, Section)) -> Option<Complex64> {
        let ((i0, j0), (i1, j1)) = self.edge_nodes(e);
        let n0 = self.node(i0, j0)?;
        let n1 = self.node(i1, j1)?;
        let g = n0.gauge;
        let f0 = n0.det(&g, pair);
        let f1 = n1.det(&g, pair);
        if !(f0 * f1 < 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let neg0 = f0 < 0.0;
        for _ in 0..44 {
            let mid = 0.5 * (lo + hi);
            let f = eval_point(cfg, &q_to_rp2(self.edge_point(e, mid)))?.det(&g, pair);
            if f == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (f < 0.0) == neg0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(self.edge_point(e, 0.5 * (lo + hi)))
    }

    /// Sign of the pair determinant at a cell center, in the gauge of its
    /// first corner.
    fn center_sign(&self, cfg: &PlaneConfig, i: usize, j: usize, pair: (Section, Section)) -> Option<bool> {
        let g0 = self.node(i, j)?.gauge;
        let qc = self.cell_center(i, j);
        Some(eval_point(cfg, &q_to_rp2(qc))?.det(&g0, pair) > 0.0)
    }

    /// Largest gauge turn between adjacent corners of a cell.
    fn cell_turn(&self, i: usize, j: usize) -> f64 {
        let c = self.cell_corners(i, j);
        (0..4)
            .filter_map(|k| Some(gauge_turn(self.node(c[k].0, c[k].1)?, self.node(c[(k + 1) % 4].0, c[(k + 1) % 4].1)?)))
            .fold(0.0, f64::max)
    }
}

/// Angle by which the kernel direction or a line representative turns
/// between two nodes, up to sign.
fn gauge_turn(a: &NodeEval, b: &NodeEval) -> f64 {
    let cos_u: f64 = (0..4).map(|k| a.gauge.u[k] * b.gauge.u[k]).sum::<f64>().abs();
    let mut worst = cos_u.min(1.0).acos();
    for j in 0..4 {
        let (x, y) = (a.gauge.reps[j], b.gauge.reps[j]);
        let c = ((x * y.conj()).re / (x.norm() * y.norm()).max(1e-300)).abs();
        worst = worst.max(c.min(1.0).acos());
    }
    worst
}

/// Cells whose gauge turns more than this are handed to a zoom chart.
const TURN_LIMIT: f64 = 0.35;
/// Zoom charts refine until no owned cell turns more than this.
const ZOOM_TURN: f64 = 0.2;
/// Node budget of one zoom chart.
const ZOOM_NODES: usize = 1 << 18;

/// A disc owned by a zoom chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomDisc {
    pub center: Complex64,
    pub radius: f64,
    /// node spacing of the zoom chart
    pub spacing: f64,
    /// largest cell turn left inside the disc
    pub residual_turn: f64,
}

/// Node evaluations over the disk chart, the four patches and the zoom
/// charts.
pub struct Field {
    pub grid: TraceGrid,
    pub base_q: [Complex64; 4],
    /// excision radius of the disk chart around each base point
    pub patch_radius: [f64; 4],
    /// radius of the disc each patch owns
    pub own_radius: [f64; 4],
    pub zooms: Vec<ZoomDisc>,
    charts: Vec<Chart>,
    cfg: PlaneConfig,
}

/// Excision radii around the base points. A patch chart reaches 3h past
/// its excision circle and owns the disc of radius r + 2h; the ownership
/// discs are disjoint and lie well inside the unit disk.
fn patch_radii(base_q: &[Complex64; 4], max: f64, h: f64) -> [f64; 4] {
    std::array::from_fn(|k| {
        let sep = (0..4)
            .filter(|&m| m != k)
            .map(|m| (base_q[k] - base_q[m]).norm())
            .fold(f64::INFINITY, f64::min);
        (0.45 * sep - 2.0 * h)
            .min(0.5 * (1.0 - base_q[k].norm()) - 3.0 * h)
            .min(max)
            .max(h)
    })
}

fn eval_chart(cfg: &PlaneConfig, chart: &mut Chart, excised: impl Fn(Complex64) -> bool + Sync) {
    let cols = chart.cols();
    let n = chart.rows() * cols;
    let c = &*chart;
    let nodes: Vec<Option<NodeEval>> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let q = c.node_q(idx / cols, idx % cols);
            if excised(q) {
                None
            } else {
                eval_point(cfg, &q_to_rp2(q))
            }
        })
        .collect();
    chart.nodes = nodes;
}

/// Merges overlapping discs (center, radius, cell extent) while the merged
/// disc stays within `max_radius`; a merged disc keeps the smaller extent.
/// Discs left overlapping are ordered by [`Field::region`].
fn merge_discs(mut discs: Vec<(Complex64, f64, f64)>, max_radius: f64) -> Vec<(Complex64, f64, f64)> {
    loop {
        let mut merged = false;
        'outer: for a in 0..discs.len() {
            for b in a + 1..discs.len() {
                let ((ca, ra, ea), (cb, rb, eb)) = (discs[a], discs[b]);
                let d = (ca - cb).norm();
                if d < ra + rb {
                    let (c, r) = if d + rb <= ra {
                        (ca, ra)
                    } else if d + ra <= rb {
                        (cb, rb)
                    } else {
                        let r = 0.5 * (d + ra + rb);
                        (ca + (cb - ca) * ((r - ra) / d), r)
                    };
                    if r > max_radius {
                        continue;
                    }
                    discs[a] = (c, r, ea.min(eb));
                    discs.swap_remove(b);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return discs;
        }
    }
}

impl Field {
    pub fn new(atlas: &Atlas, grid: TraceGrid) -> Self {
        let base_q = atlas.base_points().map(p_to_q);
        let h = grid.cell_size();
        let patch_radius = patch_radii(&base_q, grid.patch_max, h);
        let own_radius = patch_radius.map(|r| r + 2.0 * h);
        let cfg = atlas.cfg;
        let r0 = patch_radius[0];
        let mut disk = Chart {
            kind: ChartKind::Disk,
            center: Complex64::new(0.0, 0.0),
            geometry: Geometry::Polar {
                radii: (0..grid.radial)
                    .map(|i| r0 + (1.0 - r0) * i as f64 / (grid.radial - 1) as f64)
                    .collect(),
                angular: grid.angular,
            },
            nodes: Vec::new(),
        };
        eval_chart(&cfg, &mut disk, |q| {
            (1..4).any(|k| (q - base_q[k]).norm() < patch_radius[k])
        });
        let mut charts = vec![disk];
        for (k, &b) in BasePoint::ALL.iter().enumerate() {
            let (rb, outer) = (patch_radius[k], patch_radius[k] + 3.0 * h);
            let n = grid.patch_radial;
            let inner = rb * grid.patch_depth;
            let mut patch = Chart {
                kind: ChartKind::Patch(b),
                center: base_q[k],
                geometry: Geometry::Polar {
                    radii: (0..n)
                        .map(|i| inner * (outer / inner).powf(i as f64 / (n - 1) as f64))
                        .collect(),
                    angular: grid.patch_angular,
                },
                nodes: Vec::new(),
            };
            eval_chart(&cfg, &mut patch, |_| false);
            charts.push(patch);
        }
        let mut field = Field {
            grid,
            base_q,
            patch_radius,
            own_radius,
            zooms: Vec::new(),
            charts,
            cfg,
        };
        field.add_zooms();
        field
    }

    /// Covers the owned cells whose gauge turns too fast with fine square
    /// charts.
    fn add_zooms(&mut self) {
        let mut flagged: Vec<(Complex64, f64, f64)> = Vec::new();
        for chart in &self.charts {
            for i in 0..chart.rows() - 1 {
                for j in 0..chart.cell_cols() {
                    if !chart.cell_valid(i, j) || chart.cell_turn(i, j) <= TURN_LIMIT {
                        continue;
                    }
                    let c = chart.cell_center(i, j);
                    if self.region(c) == chart.kind {
                        let extent = chart.cell_extent(i, j);
                        flagged.push((c, 2.0 * extent, extent));
                    }
                }
            }
        }
        let discs = merge_discs(flagged, 4.0 * self.grid.cell_size());
        self.build_zooms(discs);
    }

    /// Adds zoom charts over the discs (center, radius, parent cell extent),
    /// each refined until its owned cells turn at most [`ZOOM_TURN`] or its
    /// node budget is spent.
    fn build_zooms(&mut self, discs: Vec<(Complex64, f64, f64)>) {
        for (center, radius, extent) in discs {
            // the inner part of a patch resolves its base point
            if (0..4).any(|k| (center - self.base_q[k]).norm() < radius + 0.25 * self.patch_radius[k]) {
                continue;
            }
            let mut spacing = extent / 4.0;
            let index = self.zooms.len();
            loop {
                let half = radius + 2.0 * spacing;
                let n = (2.0 * half / spacing).ceil() as usize + 1;
                let mut chart = Chart {
                    kind: ChartKind::Zoom(index),
                    center,
                    geometry: Geometry::Square { half, n },
                    nodes: Vec::new(),
                };
                eval_chart(&self.cfg, &mut chart, |q| q.norm() >= 1.0);
                let mut turn: f64 = 0.0;
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        if chart.cell_valid(i, j) && (chart.cell_center(i, j) - center).norm() < radius {
                            turn = turn.max(chart.cell_turn(i, j));
                        }
                    }
                }
                // turn per cell scales with the spacing
                let next = spacing * (0.8 * ZOOM_TURN / turn).clamp(0.1, 0.5);
                let finer = ((2.0 * (radius + 2.0 * next) / next).ceil() as usize + 1).pow(2);
                if turn <= ZOOM_TURN || finer > ZOOM_NODES {
                    self.zooms.push(ZoomDisc {
                        center,
                        radius,
                        spacing,
                        residual_turn: turn,
                    });
                    self.charts.push(chart);
                    break;
                }
                spacing = next;
            }
        }
    }

    /// Adds zoom charts around points where tracing failed. Returns the
    /// number of charts added.
    pub fn repair(&mut self, points: &[Complex64]) -> usize {
        let h = self.grid.cell_size();
        let before = self.zooms.len();
        let discs = merge_discs(points.iter().map(|&q| (q, 3.0 * h, h)).collect(), 6.0 * h);
        self.build_zooms(discs);
        self.zooms.len() - before
    }

    /// The chart that owns a point: the latest zoom disc containing it, else
    /// a patch disc, else the disk chart.
    fn region(&self, q: Complex64) -> ChartKind {
        if let Some(z) = self.zooms.iter().rposition(|z| (q - z.center).norm() < z.radius) {
            return ChartKind::Zoom(z);
        }
        match (0..4).find(|&k| (q - self.base_q[k]).norm() < self.own_radius[k]) {
            Some(k) => ChartKind::Patch(BasePoint::ALL[k]),
            None => ChartKind::Disk,
        }
    }

    /// Ownership circles: patches first, then zooms.
    fn circles(&self) -> Vec<(Complex64, f64, ChartKind)> {
        let mut out: Vec<_> = (0..4)
            .map(|k| (self.base_q[k], self.own_radius[k], ChartKind::Patch(BasePoint::ALL[k])))
            .collect();
        out.extend(
            self.zooms
                .iter()
                .enumerate()
                .map(|(k, z)| (z.center, z.radius, ChartKind::Zoom(k))),
        );
        out
    }

    fn eval_q(&self, q: Complex64) -> Option<NodeEval> {
        eval_point(&self.cfg, &q_to_rp2(q))
    }

    /// Radius of the innermost patch ring around base point k.
    fn inner_radius(&self, k: usize) -> f64 {
        self.patch_radius[k] * self.grid.patch_depth
    }
}

/// Where a polyline end sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndSite {
    /// on the boundary circle
    Infinity,
    /// on the innermost ring of a patch
    Base(BasePoint),
    /// on an ownership circle (patches 0..4, then zooms), from either side
    Rim(usize),
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolylineEnd {
    pub site: EndSite,
    pub point: Complex64,
    /// arg q on the boundary, arg(q − q_b) around a base point
    pub angle: f64,
    /// traced inside a patch
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub chart: ChartKind,
    /// disk-model points
    pub points: Vec<Complex64>,
    pub closed: bool,
    pub ends: Option<(PolylineEnd, PolylineEnd)>,
}

/// Two polyline ends stitched together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Join {
    pub site: EndSite,
    /// (polyline index, 0 = start / 1 = end) for both sides
    pub a: (usize, usize),
    pub b: (usize, usize),
    /// |Δangle − π| through a base point or infinity; distance at a rim
    pub mismatch: f64,
}

/// One traced affine coincidence locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedLocus {
    pub pair: (Section, Section),
    pub polylines: Vec<Polyline>,
    pub joins: Vec<Join>,
    pub components: usize,
    pub unmatched_ends: usize,
    /// corners of cells with an odd crossing count (gauge holonomy), skipped
    pub anomalies: Vec<Complex64>,
    pub base_q: [Complex64; 4],
}

impl TracedLocus {
    pub fn is_closed(&self) -> bool {
        self.unmatched_ends == 0 && self.components == 1
    }

    pub fn base_passes(&self, b: BasePoint) -> usize {
        self.joins
            .iter()
            .filter(|j| j.site == EndSite::Base(b))
            .count()
    }

    pub fn infinity_passes(&self) -> usize {
        self.joins
            .iter()
            .filter(|j| j.site == EndSite::Infinity)
            .count()
    }

    /// Points at which the locus meets the line at infinity (disk model).
    pub fn infinity_points(&self) -> Vec<Complex64> {
        self.joins
            .iter()
            .filter(|j| j.site == EndSite::Infinity)
            .map(|j| end_point(&self.polylines, j.a))
            .collect()
    }

    fn partners(&self) -> HashMap<(usize, usize), ((usize, usize), EndSite)> {
        self.joins
            .iter()
            .flat_map(|j| [(j.a, (j.b, j.site)), (j.b, (j.a, j.site))])
            .collect()
    }

    /// The stitched closed curve as one ordered point sequence starting and
    /// ending on polyline 0 (only meaningful for a closed single component).
    pub fn ordered_loop(&self) -> Vec<Complex64> {
        if self.polylines.is_empty() {
            return Vec::new();
        }
        if self.polylines[0].closed {
            let mut pts = self.polylines[0].points.clone();
            pts.push(pts[0]);
            return pts;
        }
        let partner = self.partners();
        let mut out = Vec::new();
        let (mut poly, mut forward) = (0usize, true);
        for _ in 0..=self.polylines.len() {
            let pts = &self.polylines[poly].points;
            if forward {
                out.extend(pts.iter().copied());
            } else {
                out.extend(pts.iter().rev().copied());
            }
            let exit = (poly, if forward { 1 } else { 0 });
            let Some(&((next, side), _)) = partner.get(&exit) else {
                break;
            };
            poly = next;
            forward = side == 0;
            if poly == 0 && forward {
                out.push(self.polylines[0].points[0]);
                break;
            }
        }
        out
    }

    /// The locus cut at the base points and the line at infinity, as point
    /// sequences joined across patch rims; a piece through a base point
    /// starts or ends exactly at it. Cycles meeting neither come back closed
    /// (first point repeated).
    pub fn pieces(&self) -> Vec<Vec<Complex64>> {
        let partner = self.partners();
        let n = self.polylines.len();
        let mut used = vec![false; n];
        let mut out = Vec::new();
        let site_point = |end: (usize, usize)| -> Option<Complex64> {
            match partner.get(&end) {
                Some((_, EndSite::Base(b))) => Some(self.base_q[*b as usize]),
                _ => None,
            }
        };
        let is_rim = |end: (usize, usize)| matches!(partner.get(&end), Some((_, EndSite::Rim(_))));
        let follow = |start: (usize, usize), used: &mut Vec<bool>| -> (Vec<Complex64>, (usize, usize)) {
            let mut pts = Vec::new();
            let (mut k, mut side) = start;
            loop {
                used[k] = true;
                let p = &self.polylines[k].points;
                if side == 0 {
                    pts.extend(p.iter().copied());
                } else {
                    pts.extend(p.iter().rev().copied());
                }
                let exit = (k, 1 - side);
                match partner.get(&exit) {
                    Some(&(next, EndSite::Rim(_))) if !used[next.0] => {
                        k = next.0;
                        side = next.1;
                    }
                    _ => return (pts, exit),
                }
            }
        };
        for k in 0..n {
            if self.polylines[k].closed || used[k] {
                continue;
            }
            for side in 0..2 {
                let start = (k, side);
                if used[k] || is_rim(start) {
                    continue;
                }
                let (mut pts, exit) = follow(start, &mut used);
                if let Some(q) = site_point(start) {
                    pts.insert(0, q);
                }
                if let Some(q) = site_point(exit) {
                    pts.push(q);
                }
                out.push(pts);
            }
        }
        for k in 0..n {
            if used[k] {
                continue;
            }
            let (mut pts, _) = follow((k, 0), &mut used);
            pts.push(pts[0]);
            out.push(pts);
        }
        out
    }
}

fn end_point(polys: &[Polyline], (k, side): (usize, usize)) -> Complex64 {
    let pts = &polys[k].points;
    if side == 0 {
        pts[0]
    } else {
        *pts.last().unwrap()
    }
}

/// The six section pairs whose coincidence loci are traced in the affine
/// chart; the four pairs with s_p are exceptional divisors or the line at
/// infinity.
pub fn traced_pairs() -> Vec<(Section, Section)> {
    Section::pairs()
        .into_iter()
        .filter(|(a, b)| *a != Section::P && *b != Section::P)
        .collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn classes(&mut self) -> usize {
        let n = self.0.len();
        (0..n).filter(|&i| self.find(i) == i).count()
    }
}

fn wrap_pi(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

/// Marching squares over one chart.
fn march(field: &Field, chart: &Chart, pair: (Section, Section)) -> (Vec<Polyline>, Vec<Complex64>) {
    let cfg = &field.cfg;
    let edges = chart.edges();
    let crossings: HashMap<Edge, Complex64> = edges
        .par_iter()
        .filter_map(|&e| chart.edge_crossing(cfg, e, pair).map(|q| (e, q)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let mut adjacency: HashMap<Edge, Vec<Edge>> = HashMap::new();
    let mut anomalies = Vec::new();
    for i in 0..chart.rows() - 1 {
        for j in 0..chart.cell_cols() {
            if !chart.cell_valid(i, j) {
                continue;
            }
            let es = chart.cell_edges(i, j);
            let hit: Vec<usize> = (0..4).filter(|&k| crossings.contains_key(&es[k])).collect();
            let segs: Vec<(usize, usize)> = match hit.len() {
                0 => continue,
                2 => vec![(hit[0], hit[1])],
                4 => {
                    let n0 = chart.node(i, j).unwrap();
                    let s0 = n0.det(&n0.gauge, pair) > 0.0;
                    match chart.center_sign(cfg, i, j, pair) {
                        Some(sc) if sc == s0 => vec![(0, 1), (2, 3)],
                        Some(_) => vec![(3, 0), (1, 2)],
                        None => {
                            anomalies.push(chart.cell_center(i, j));
                            continue;
                        }
                    }
                }
                _ => {
                    anomalies.push(chart.cell_center(i, j));
                    continue;
                }
            };
            for (a, b) in segs {
                adjacency.entry(es[a]).or_default().push(es[b]);
                adjacency.entry(es[b]).or_default().push(es[a]);
            }
        }
    }

    let mut keys: Vec<Edge> = adjacency.keys().copied().collect();
    keys.sort();
    let mut visited: HashMap<Edge, bool> = HashMap::new();
    let walk = |start: Edge, visited: &mut HashMap<Edge, bool>| -> (Vec<Edge>, bool) {
        let mut path = vec![start];
        visited.insert(start, true);
        let mut prev: Option<Edge> = None;
        let mut cur = start;
        loop {
            let next = adjacency[&cur]
                .iter()
                .copied()
                .find(|n| Some(*n) != prev && !visited.get(n).copied().unwrap_or(false));
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    path.push(n);
                    prev = Some(cur);
                    cur = n;
                }
                None => {
                    let closes = path.len() > 2 && adjacency[&cur].contains(&start);
                    return (path, closes);
                }
            }
        }
    };
    let mut polylines = Vec::new();
    for &k in &keys {
        if adjacency[&k].len() == 1 && !visited.contains_key(&k) {
            let (path, _) = walk(k, &mut visited);
            polylines.extend(to_polyline(field, chart, pair, &crossings, &path, false));
        }
    }
    for &k in &keys {
        if !visited.contains_key(&k) {
            let (path, closes) = walk(k, &mut visited);
            polylines.extend(to_polyline(field, chart, pair, &crossings, &path, closes));
        }
    }
    anomalies.retain(|q| field.region(*q) == chart.kind);
    (polylines, anomalies)
}

fn to_polyline(
    field: &Field,
    chart: &Chart,
    pair: (Section, Section),
    crossings: &HashMap<Edge, Complex64>,
    path: &[Edge],
    closed: bool,
) -> Vec<Polyline> {
    let points: Vec<Complex64> = path.iter().map(|e| crossings[e]).collect();
    let ends = (!closed).then(|| {
        (
            classify_end(chart, path[0], points[0]),
            classify_end(chart, *path.last().unwrap(), *points.last().unwrap()),
        )
    });
    clip(field, chart.kind, pair, points, closed, ends)
}

fn classify_end(chart: &Chart, e: Edge, q: Complex64) -> PolylineEnd {
    let last = chart.rows() - 1;
    let ring = match e {
        Edge::Angular(i, _) => Some(i),
        Edge::Radial(..) => None,
    };
    let (site, angle) = match (chart.kind, ring) {
        (ChartKind::Disk, Some(i)) if i == last => (EndSite::Infinity, q.arg()),
        (ChartKind::Patch(b), Some(0)) => (EndSite::Base(b), (q - chart.center).arg()),
        _ => (EndSite::Unresolved, 0.0),
    };
    PolylineEnd {
        site,
        point: q,
        angle,
        inside: chart.kind != ChartKind::Disk,
    }
}

/// Parameters in (0, 1) where the segment a→b meets the circle |q − c| = r.
fn circle_hits(a: Complex64, b: Complex64, c: Complex64, r: f64) -> Vec<f64> {
    let (d, w) = (b - a, a - c);
    let qa = d.norm_sqr();
    let qb = 2.0 * (w.re * d.re + w.im * d.im);
    let qc = w.norm_sqr() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc <= 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let mut t = vec![(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)];
    t.retain(|t| *t > 0.0 && *t < 1.0);
    t
}

/// Zero of the pair determinant on the circle |q − c| = r nearest to the
/// point p on it, searched within arc length `span` on either side.
fn circle_zero(
    field: &Field,
    pair: (Section, Section),
    c: Complex64,
    r: f64,
    p: Complex64,
    span: f64,
) -> Option<Complex64> {
    const STEPS: usize = 24;
    let theta = (p - c).arg();
    let dt = (2.0 * span / r).min(PI);
    let at = |t: f64| c + Complex64::from_polar(r, t);
    let ts: Vec<f64> = (0..=STEPS)
        .map(|i| theta - dt + 2.0 * dt * i as f64 / STEPS as f64)
        .collect();
    let nodes: Vec<NodeEval> = ts.iter().map(|&t| field.eval_q(at(t))).collect::<Option<_>>()?;
    // sign changes between neighbours, each in the gauge of its left end
    let bracket = (0..STEPS)
        .filter(|&i| nodes[i].det(&nodes[i].gauge, pair) * nodes[i + 1].det(&nodes[i].gauge, pair) < 0.0)
        .min_by(|&i, &j| {
            let d = |k: usize| (0.5 * (ts[k] + ts[k + 1]) - theta).abs();
            d(i).total_cmp(&d(j))
        })?;
    let g = nodes[bracket].gauge;
    let f = |t: f64| -> Option<f64> { Some(field.eval_q(at(t))?.det(&g, pair)) };
    let (mut lo, mut hi) = (ts[bracket], ts[bracket + 1]);
    let f_lo = nodes[bracket].det(&g, pair);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(at(0.5 * (lo + hi)))
}

/// Restricts a polyline to the part its chart owns (see [`Field::region`]).
/// Cut points become rim ends.
fn clip(
    field: &Field,
    kind: ChartKind,
    pair: (Section, Section),
    points: Vec<Complex64>,
    closed: bool,
    ends: Option<(PolylineEnd, PolylineEnd)>,
) -> Vec<Polyline> {
    let circles = field.circles();
    let owned = |q: Complex64| field.region(q) == kind;
    let mut chain = points;
    if closed {
        chain.push(chain[0]);
    }
    // refine the chain with every circle crossing, remembering which circle
    let mut pts: Vec<(Complex64, Option<usize>)> = vec![(chain[0], None)];
    for w in chain.windows(2) {
        let mut cuts: Vec<(f64, usize)> = circles
            .iter()
            .enumerate()
            .flat_map(|(k, &(c, r, _))| circle_hits(w[0], w[1], c, r).into_iter().map(move |t| (t, k)))
            .collect();
        cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (t, k) in cuts {
            pts.push((w[0] + (w[1] - w[0]) * t, Some(k)));
        }
        pts.push((w[1], None));
    }
    let keep: Vec<bool> = pts
        .windows(2)
        .map(|w| owned(0.5 * (w[0].0 + w[1].0)))
        .collect();
    if keep.iter().all(|k| *k) {
        let mut points: Vec<Complex64> = pts.into_iter().filter(|p| p.1.is_none()).map(|p| p.0).collect();
        if closed {
            points.pop();
        }
        return vec![Polyline {
            chart: kind,
            points,
            closed,
            ends,
        }];
    }
    // cut points are chord points; move them onto the curve along their circle
    let on_curve = |i: usize| -> Complex64 {
        let (q, k) = (pts[i].0, pts[i].1.unwrap());
        let span = [i.checked_sub(1), Some(i + 1)]
            .iter()
            .filter_map(|j| pts.get((*j)?))
            .map(|p| (p.0 - q).norm())
            .fold(0.0, f64::max);
        circle_zero(field, pair, circles[k].0, circles[k].1, q, span).unwrap_or(q)
    };
    let rim_end = |q: Complex64, k: usize| PolylineEnd {
        site: EndSite::Rim(k),
        point: q,
        angle: (q - circles[k].0).arg(),
        inside: kind == circles[k].2,
    };
    let end_at = |i: usize, q: Complex64, original: Option<PolylineEnd>| match pts[i].1 {
        Some(k) => rim_end(q, k),
        None => original.unwrap_or(PolylineEnd {
            site: EndSite::Unresolved,
            point: pts[i].0,
            angle: 0.0,
            inside: kind != ChartKind::Disk,
        }),
    };
    let nseg = keep.len();
    // for a closed chain start the scan at a dropped segment
    let offset = if closed { keep.iter().position(|k| !*k).unwrap() } else { 0 };
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    for step in 0..=nseg {
        let s = (offset + step) % nseg;
        let kept = step < nseg && keep[s];
        match (run, kept) {
            (None, true) => run = Some(s),
            (Some(first), false) => {
                let last = (offset + step + nseg - 1) % nseg;
                let idx: Vec<usize> = if last >= first {
                    (first..=last + 1).collect()
                } else {
                    (first..nseg).chain(0..=last + 1).collect()
                };
                let (i0, i1) = (idx[0], *idx.last().unwrap());
                let start_orig = (!closed && i0 == 0).then(|| ends.map(|e| e.0)).flatten();
                let end_orig = (!closed && i1 == pts.len() - 1).then(|| ends.map(|e| e.1)).flatten();
                let mut points: Vec<Complex64> = idx
                    .iter()
                    .filter(|&&i| pts[i].1.is_none() || i == i0 || i == i1)
                    .map(|&i| pts[i].0)
                    .collect();
                let (q0, q1) = (points[0], *points.last().unwrap());
                let q0 = if pts[i0].1.is_some() { on_curve(i0) } else { q0 };
                let q1 = if pts[i1].1.is_some() { on_curve(i1) } else { q1 };
                points[0] = q0;
                *points.last_mut().unwrap() = q1;
                out.push(Polyline {
                    chart: kind,
                    points,
                    closed: false,
                    ends: Some((end_at(i0, q0, start_orig), end_at(i1, q1, end_orig))),
                });
                run = None;
            }
            _ => {}
        }
    }
    out
}

/// Largest |Δangle − π| accepted through a base point or infinity.
const ANTIPODAL_LIMIT: f64 = 0.05;

/// Traces the coincidence locus of one section pair over all charts and
/// stitches the pieces.
pub fn trace_pair(field: &Field, pair: (Section, Section)) -> TracedLocus {
    let mut polylines = Vec::new();
    let mut anomalies = Vec::new();
    for chart in &field.charts {
        let (p, a) = march(field, chart, pair);
        polylines.extend(p);
        anomalies.extend(a);
    }
    let mut ends: Vec<((usize, usize), PolylineEnd)> = Vec::new();
    for (k, p) in polylines.iter().enumerate() {
        if let Some((s, e)) = p.ends {
            ends.push(((k, 0), s));
            ends.push(((k, 1), e));
        }
    }
    let rim_limit = 3.0 * field.grid.cell_size();
    // candidates scored relative to their acceptance limit
    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    for x in 0..ends.len() {
        for y in x + 1..ends.len() {
            let (ea, eb) = (ends[x].1, ends[y].1);
            if ea.site != eb.site || ea.site == EndSite::Unresolved || ends[x].0 == ends[y].0 {
                continue;
            }
            let (mismatch, limit) = match ea.site {
                EndSite::Rim(_) if ea.inside != eb.inside => {
                    ((ea.point - eb.point).norm(), rim_limit)
                }
                EndSite::Rim(_) => continue,
                _ => (wrap_pi(ea.angle - eb.angle - PI).abs(), ANTIPODAL_LIMIT),
            };
            if mismatch < limit {
                candidates.push((mismatch / limit, mismatch, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut used = vec![false; ends.len()];
    let mut joins = Vec::new();
    for (_, mismatch, x, y) in candidates {
        if used[x] || used[y] {
            continue;
        }
        used[x] = true;
        used[y] = true;
        joins.push(Join {
            site: ends[x].1.site,
            a: ends[x].0,
            b: ends[y].0,
            mismatch,
        });
    }
    let unmatched_ends = used.iter().filter(|u| !**u).count();
    let mut uf = UnionFind::new(polylines.len());
    for j in &joins {
        uf.union(j.a.0, j.b.0);
    }
    let components = uf.classes();
    TracedLocus {
        pair,
        polylines,
        joins,
        components,
        unmatched_ends,
        anomalies,
        base_q: field.base_q,
    }
}

impl TracedLocus {
    /// Points where tracing failed: unmatched polyline ends and anomalous
    /// cells.
    pub fn defects(&self) -> Vec<Complex64> {
        let mut matched = std::collections::HashSet::new();
        for j in &self.joins {
            matched.insert(j.a);
            matched.insert(j.b);
        }
        let mut out = self.anomalies.clone();
        for (k, p) in self.polylines.iter().enumerate() {
            if p.ends.is_some() {
                for side in 0..2 {
                    if !matched.contains(&(k, side)) {
                        out.push(end_point(&self.polylines, (k, side)));
                    }
                }
            }
        }
        out
    }
}

/// Rounds of zoom repair after the first trace.
const REPAIR_ROUNDS: usize = 2;

/// Builds the field and traces all six affine pairs, adding zoom charts
/// around defects and retracing while that helps.
pub fn trace_all(atlas: &Atlas, grid: TraceGrid) -> (Field, Vec<TracedLocus>) {
    let mut field = Field::new(atlas, grid);
    let trace = |f: &Field| -> Vec<TracedLocus> { traced_pairs().into_iter().map(|p| trace_pair(f, p)).collect() };
    let mut traced = trace(&field);
    for _ in 0..REPAIR_ROUNDS {
        let defects: Vec<Complex64> = traced.iter().flat_map(|t| t.defects()).collect();
        if defects.is_empty() || field.repair(&defects) == 0 {
            break;
        }
        traced = trace(&field);
    }
    (field, traced)
}

/// A point where two traced loci meet, refined by Newton's method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusCrossing {
    pub pairs: [(Section, Section); 2],
    /// disk-model point
    pub q: Complex64,
    /// affine point, if not at infinity
    pub p: Option<Complex64>,
    /// |f₁| + |f₂| after refinement, both determinants unit-scaled
    pub residual: f64,
    /// Newton step size at termination (disk-model units)
    pub last_step: f64,
}

impl LocusCrossing {
    /// Whether the two pairs share a section, which would make the crossing
    /// a triple coincidence.
    pub fn is_triple(&self) -> bool {
        let [(a, b), (c, d)] = self.pairs;
        a == c || a == d || b == c || b == d
    }
}

/// Newton refinement of a common zero of two pair determinants, starting at
/// q0 and working in the gauge of the fiber at q0.
fn refine_crossing(
    field: &Field,
    q0: Complex64,
    pairs: [(Section, Section); 2],
    max_travel: f64,
) -> Option<LocusCrossing> {
    let g = field.eval_q(q0)?.gauge;
    let f = |q: Complex64| -> Option<[f64; 2]> {
        if q.norm() > 1.0 {
            return None;
        }
        let n = field.eval_q(q)?;
        Some([unit_det(&n, &g, pairs[0]), unit_det(&n, &g, pairs[1])])
    };
    let h = (1e-3 * max_travel).min(1e-7);
    let mut q = q0;
    let mut last_step = f64::INFINITY;
    for _ in 0..40 {
        let f0 = f(q)?;
        let fx = f(q + h)?;
        let fy = f(q + Complex64::new(0.0, h))?;
        let j = [
            [(fx[0] - f0[0]) / h, (fy[0] - f0[0]) / h],
            [(fx[1] - f0[1]) / h, (fy[1] - f0[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = (j[1][1] * f0[0] - j[0][1] * f0[1]) / det;
        let dy = (j[0][0] * f0[1] - j[1][0] * f0[0]) / det;
        q -= Complex64::new(dx, dy);
        last_step = dx.hypot(dy);
        if (q - q0).norm() > max_travel {
            return None;
        }
        if last_step < 1e-14 {
            break;
        }
    }
    let fr = f(q)?;
    let residual = fr[0].abs() + fr[1].abs();
    (residual < 1e-9).then(|| LocusCrossing {
        pairs,
        q,
        p: q_to_p(q),
        residual,
        last_step,
    })
}

/// Intersection parameter of segments a0a1 and b0b1, if they cross.
fn segment_hit(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> Option<Complex64> {
    let (da, db) = (a1 - a0, b1 - b0);
    let den = da.re * db.im - da.im * db.re;
    if den == 0.0 {
        return None;
    }
    let w = b0 - a0;
    let s = (w.re * db.im - w.im * db.re) / den;
    let t = (w.re * da.im - w.im * da.re) / den;
    ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)).then(|| a0 + s * da)
}

/// All crossings between two traced loci, away from the base points (where
/// the loci pass through the blow-up rather than meeting).
pub fn locus_crossings(field: &Field, l1: &TracedLocus, l2: &TracedLocus) -> Vec<LocusCrossing> {
    let p1 = l1.pieces();
    let p2 = l2.pieces();
    let near_base = |q: Complex64| {
        (0..4).any(|k| (q - field.base_q[k]).norm() < 100.0 * field.inner_radius(k))
    };
    let mut seeds: Vec<(Complex64, f64)> = Vec::new();
    for a in &p1 {
        for b in &p2 {
            for sa in a.windows(2) {
                let (lo_a, hi_a) = bbox(sa[0], sa[1]);
                for sb in b.windows(2) {
                    let (lo_b, hi_b) = bbox(sb[0], sb[1]);
                    if lo_a.re > hi_b.re || lo_b.re > hi_a.re || lo_a.im > hi_b.im || lo_b.im > hi_a.im {
                        continue;
                    }
                    if let Some(q) = segment_hit(sa[0], sa[1], sb[0], sb[1]) {
                        if !near_base(q) {
                            let len = (sa[1] - sa[0]).norm().max((sb[1] - sb[0]).norm());
                            seeds.push((q, len));
                        }
                    }
                }
            }
        }
    }
    let found: Vec<LocusCrossing> = seeds
        .par_iter()
        .filter_map(|&(q, len)| refine_crossing(field, q, [l1.pair, l2.pair], 4.0 * len))
        .collect();
    let mut out: Vec<LocusCrossing> = Vec::new();
    for c in found {
        if !near_base(c.q) && out.iter().all(|o| (o.q - c.q).norm() > 1e-7) {
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.q.re.total_cmp(&b.q.re).then(a.q.im.total_cmp(&b.q.im)));
    out
}

fn bbox(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (
        Complex64::new(a.re.min(b.re), a.im.min(b.im)),
        Complex64::new(a.re.max(b.re), a.im.max(b.im)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_model_roundtrip() {
        for p in [Complex64::new(0.3, -2.0), Complex64::new(-7.5, 0.1), Complex64::new(0.0, 0.0)] {
            let q = p_to_q(p);
            assert!(q.norm() < 1.0);
            assert!((q_to_p(q).unwrap() - p).norm() < 1e-12 * (1.0 + p.norm()));
            let r = q_to_rp2(q).to_affine().unwrap();
            assert!((r - p).norm() < 1e-12 * (1.0 + p.norm()));
        }
        assert!(q_to_p(Complex64::new(0.6, 0.8)).is_none());
    }

    #[test]
    fn segments_cross_once() {
        let z = |a: f64, b: f64| Complex64::new(a, b);
        let hit = segment_hit(z(0.0, 0.0), z(2.0, 2.0), z(0.0, 2.0), z(2.0, 0.0)).unwrap();
        assert!((hit - z(1.0, 1.0)).norm() < 1e-15);
        assert!(segment_hit(z(0.0, 0.0), z(1.0, 0.0), z(0.0, 1.0), z(1.0, 1.0)).is_none());
        assert!(segment_hit(z(0.0, 0.0), z(1.0, 1.0), z(2.0, 0.0), z(1.5, 0.4)).is_none());
    }

    #[test]
    fn patches_are_disjoint_and_inside() {
        let q = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.52, 0.1),
            Complex64::new(0.0, 0.95),
        ];
        let h = 0.01;
        let r = patch_radii(&q, 0.12, h);
        for k in 0..4 {
            assert!(q[k].norm() + r[k] + 3.0 * h < 1.0);
            for m in k + 1..4 {
                assert!(r[k] + r[m] + 4.0 * h < (q[k] - q[m]).norm());
            }
        }
        assert_eq!(r[0], 0.12);
    }
}
