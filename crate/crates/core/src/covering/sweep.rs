//! Sweeps over the loci that are not visible as curves in the affine chart:
//! the four exceptional divisors (ψ ∈ [0, π)) and the line at infinity
//! (θ ∈ [0, π)); plus gauge-continuous tracking of the degenerate arc along
//! any closed sample sequence.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::trace::{Gauge, NodeEval};
use super::Section;
use crate::fiber::{classify_with, FiberClassification};
use crate::locus::{exceptional_value, rolled_value_at, Atlas, BasePoint};
use crate::projective::{Rp1Dir, Rp2Point};
use crate::Result;

/// A closed one-parameter family swept by a parameter in [0, π).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepSite {
    Divisor(BasePoint),
    Infinity,
}

/// A section pair that coincides at an isolated parameter of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCrossing {
    pub pair: (Section, Section),
    pub param: f64,
    /// unit-scaled determinant after refinement
    pub residual: f64,
}

/// Coincidence data along one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub site: SweepSite,
    pub samples: usize,
    /// pairs whose marked points agree at every sample (chordal gap < 1e−7)
    pub identical: Vec<(Section, Section)>,
    /// max chordal gap of each identical pair
    pub identical_gap: Vec<f64>,
    pub crossings: Vec<SweepCrossing>,
    /// fiber data at the samples, first and last describing the same point
    #[serde(skip)]
    pub nodes: Vec<NodeEval>,
}

pub fn sweep_eval(atlas: &Atlas, site: SweepSite, param: f64) -> Result<NodeEval> {
    let value = match site {
        SweepSite::Divisor(b) => exceptional_value(atlas, b, Rp1Dir::from_angle(param))?,
        SweepSite::Infinity => rolled_value_at(&atlas.cfg, &Rp2Point::at_infinity(param))?,
    };
    match classify_with(&atlas.cfg, &value, &atlas.cfg.tol, None) {
        FiberClassification::Critical { fiber } => Ok(NodeEval::from_model(&fiber)),
        _ => Err(crate::AtlasError::NotCritical),
    }
}

fn unit_det(n: &NodeEval, g: &Gauge, pair: (Section, Section)) -> f64 {
    super::trace::unit_det(n, g, pair)
}

/// Samples a sweep, identifies identically coinciding pairs and refines the
/// isolated coincidences by bisection on the gauge-aligned determinant.
pub fn sweep(atlas: &Atlas, site: SweepSite, samples: usize) -> Result<SweepReport> {
    let params: Vec<f64> = (0..=samples).map(|i| PI * i as f64 / samples as f64).collect();
    let nodes: Vec<NodeEval> = params
        .iter()
        .map(|&t| sweep_eval(atlas, site, t))
        .collect::<Result<_>>()?;
    let mut identical = Vec::new();
    let mut identical_gap = Vec::new();
    let mut crossings = Vec::new();
    for pair in Section::pairs() {
        let gaps: Vec<f64> = nodes
            .iter()
            .map(|n| unit_det(n, &n.gauge, pair).abs())
            .collect();
        let max_gap = gaps.iter().copied().fold(0.0, f64::max);
        if max_gap < 1e-7 {
            identical.push(pair);
            identical_gap.push(max_gap);
            continue;
        }
        for i in 0..samples {
            let g = nodes[i].gauge;
            let f0 = unit_det(&nodes[i], &g, pair);
            let f1 = unit_det(&nodes[i + 1], &g, pair);
            if f0 == 0.0 {
                crossings.push(SweepCrossing {
                    pair,
                    param: params[i],
                    residual: 0.0,
                });
                continue;
            }
            if f0 * f1 >= 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (params[i], params[i + 1]);
            let mut last = f0.abs();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let f = unit_det(&sweep_eval(atlas, site, mid)?, &g, pair);
                last = f.abs();
                if (f < 0.0) == (f0 < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            crossings.push(SweepCrossing {
                pair,
                param: 0.5 * (lo + hi),
                residual: last,
            });
        }
    }
    crossings.sort_by(|a, b| a.param.total_cmp(&b.param));
    Ok(SweepReport {
        site,
        samples,
        identical,
        identical_gap,
        crossings,
        nodes,
    })
}

fn shares_index(p: (Section, Section), q: (Section, Section)) -> bool {
    p != q && (p.0 == q.0 || p.0 == q.1 || p.1 == q.0 || p.1 == q.1)
}

impl SweepReport {
    /// Parameters where two index-sharing pairs coincide simultaneously,
    /// i.e. three sections agree.
    pub fn triples(&self, tol: f64) -> Vec<(f64, [(Section, Section); 2])> {
        let mut out = Vec::new();
        for c in &self.crossings {
            for &id in &self.identical {
                if shares_index(c.pair, id) {
                    out.push((c.param, [id, c.pair]));
                }
            }
        }
        for (i, c) in self.crossings.iter().enumerate() {
            for d in &self.crossings[i + 1..] {
                let dt = (c.param - d.param).abs();
                if shares_index(c.pair, d.pair) && dt.min(PI - dt) < tol {
                    out.push((c.param, [c.pair, d.pair]));
                }
            }
        }
        out
    }
}

/// Degenerate-arc tracking once around a closed coincidence circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapReport {
    pub pair: (Section, Section),
    pub samples: usize,
    /// partial label (args of the coordinates outside the pair) at the start
    pub start_label: [Option<f64>; 4],
    pub end_label: [Option<f64>; 4],
    /// largest chordal gap of the pair along the lap
    pub max_gap: f64,
    /// largest jump of the degenerate point between samples (RP¹ chordal)
    pub max_step: f64,
    /// end label differs from the start by π in every coordinate
    pub diagonal_flip: bool,
    pub closed: bool,
}

fn label_of(n: &NodeEval, h: [f64; 2], flip_t: bool, pair: (Section, Section)) -> [Option<f64>; 4] {
    let mut out = [None; 4];
    for (l, slot) in out.iter_mut().enumerate() {
        if pair.0.index() == l || pair.1.index() == l {
            continue;
        }
        // m = (−c0, c1), so c0 = −m0 and c1 = m1; a kernel flip negates c1
        let c0 = -n.m[l][0];
        let c1 = if flip_t { -n.m[l][1] } else { n.m[l][1] };
        let v = c0 * h[1] + c1 * h[0];
        let base = n.gauge.reps[l].arg();
        let ang = base + if v < 0.0 { PI } else { 0.0 };
        *slot = Some(ang.rem_euclid(2.0 * PI));
    }
    out
}

/// Follows the degenerate point of `pair` along the closed sample sequence
/// (first and last samples describe the same point of B_Z), carrying the
/// kernel orientation and the homogeneous degenerate point continuously, and
/// compares the partial arc label after one lap with the starting one.
pub fn degenerate_lap(nodes: &[NodeEval], pair: (Section, Section)) -> LapReport {
    let n = nodes.len();
    let mut u_run = nodes[0].gauge.u;
    let mut h_prev: Option<[f64; 2]> = None;
    let mut start = [None; 4];
    let mut end = [None; 4];
    let mut max_gap: f64 = 0.0;
    let mut max_step: f64 = 0.0;
    for (i, node) in nodes.iter().enumerate() {
        let dot: f64 = (0..4).map(|j| node.gauge.u[j] * u_run[j]).sum();
        let flip_t = dot < 0.0;
        u_run = if flip_t { node.gauge.u.map(|v| -v) } else { node.gauge.u };
        max_gap = max_gap.max(unit_det(node, &node.gauge, pair).abs());
        // degenerate point from the first section of the pair, in the
        // running orientation (a kernel flip maps t to −t)
        let m = node.m[pair.0.index()];
        let mut h = if flip_t { [-m[0], m[1]] } else { m };
        if pair.1 == Section::Inf {
            h = [1.0, 0.0];
        }
        let norm = h[0].hypot(h[1]);
        h = [h[0] / norm, h[1] / norm];
        if let Some(p) = h_prev {
            if h[0] * p[0] + h[1] * p[1] < 0.0 {
                h = [-h[0], -h[1]];
            }
            max_step = max_step.max((h[0] * p[1] - h[1] * p[0]).abs());
        }
        h_prev = Some(h);
        let label = label_of(node, h, flip_t, pair);
        if i == 0 {
            start = label;
        }
        if i + 1 == n {
            end = label;
        }
    }
    // the degenerate point of a pair with s_∞ is a triangle at infinity,
    // whose coordinate arguments are defined only up to a common sign; its
    // two one-sided limits differ by π in every coordinate
    let shifts: Vec<f64> = start
        .iter()
        .zip(end.iter())
        .filter_map(|(a, b)| Some((b.as_ref()? - a.as_ref()?).rem_euclid(2.0 * PI)))
        .collect();
    let near = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d) < 1e-6
    };
    let defined_match = start.iter().zip(end.iter()).all(|(a, b)| a.is_some() == b.is_some());
    let uniform = shifts.iter().all(|&d| near(d, shifts[0]));
    let diagonal_flip = uniform && !shifts.is_empty() && near(shifts[0], PI);
    let closed = defined_match
        && uniform
        && (shifts.is_empty() || near(shifts[0], 0.0) || (pair.1 == Section::Inf && diagonal_flip));
    LapReport {
        pair,
        samples: n,
        start_label: start,
        end_label: end,
        max_gap,
        max_step,
        diagonal_flip,
        closed,
    }
}
