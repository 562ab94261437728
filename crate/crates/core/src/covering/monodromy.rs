//! Monodromy of the five arcs of a critical fiber along loops in B_Z.
//!
//! An arc of the fiber circle is named by the two sections bounding it;
//! with five distinct marked points each adjacent pair bounds exactly one
//! arc. Transport follows the cyclic order of the marked points: when two
//! adjacent sections X, Y swap (the path crosses their coincidence locus),
//! the arcs {A, X} and {Y, B} on either side become {A, Y} and {X, B}, and
//! the degenerate arc {X, Y} keeps its name.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trace::NodeEval;
use super::Section;
use crate::fiber::{classify_with, FiberClassification};
use crate::locus::{exceptional_approach, exceptional_value, rolled_value_at, Atlas, BasePoint};
use crate::projective::{Rp1Dir, Rp2Point};
use crate::{AtlasError, Result};

/// Largest RP¹ chordal move of any marked point per accepted step.
pub const MAX_MOVE: f64 = 0.02;
/// Steps below this size abort the transport.
pub const MIN_STEP: f64 = 1e-6;
/// Initial step as a fraction of each segment.
pub const INITIAL_STEP: f64 = 1.0 / 400.0;
/// Marked points closer than this (chordal) are a tie resolved by the
/// previous order; exact coincidences along exceptional divisors sit here.
const TIE: f64 = 1e-10;
/// Innermost radius of rays into a base point.
const RAY_INNER: f64 = 1e-5;

/// One piece of a loop, parametrized by s ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathSegment {
    /// straight segment in the affine chart
    Affine { from: Complex64, to: Complex64 },
    /// P(s) = cos(πs)·(p, 1) + sin(πs)·(e^{iθ}, 0): the projective line
    /// through p in direction θ, closed through the line at infinity
    PseudoLine { p: Complex64, theta: f64 },
    /// b + r·u(ψ) with r moving geometrically from `from` to `to`
    Ray { base: BasePoint, psi: f64, from: f64, to: f64 },
    /// the exceptional divisor over a base point, ψ from `from` to `to`
    Divisor { base: BasePoint, from: f64, to: f64 },
}

impl PathSegment {
    /// Critical fiber at parameter s.
    pub fn point(&self, atlas: &Atlas, s: f64) -> Result<NodeEval> {
        let value = match *self {
            PathSegment::Affine { from, to } => {
                rolled_value_at(&atlas.cfg, &Rp2Point::affine(from + s * (to - from)))?
            }
            PathSegment::PseudoLine { p, theta } => {
                let (c, sn) = ((PI * s).cos(), (PI * s).sin());
                let z = c * p + sn * Complex64::from_polar(1.0, theta);
                rolled_value_at(&atlas.cfg, &Rp2Point::new(z.re, z.im, c)?)?
            }
            PathSegment::Ray { base, psi, from, to } => {
                let r = from * (to / from).powf(s);
                let u = exceptional_approach(atlas, base, Rp1Dir::from_angle(psi));
                rolled_value_at(&atlas.cfg, &Rp2Point::affine(atlas.base_point(base) + r * u))?
            }
            PathSegment::Divisor { base, from, to } => {
                exceptional_value(atlas, base, Rp1Dir::from_angle(from + s * (to - from)))?
            }
        };
        match classify_with(&atlas.cfg, &value, &atlas.cfg.tol, None) {
            FiberClassification::Critical { fiber } => Ok(NodeEval::from_model(&fiber)),
            _ => Err(AtlasError::NotCritical),
        }
    }
}

/// A closed loop based at p*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub name: String,
    pub segments: Vec<PathSegment>,
}

impl LoopSpec {
    pub fn constant(p: Complex64) -> Self {
        LoopSpec {
            name: "constant".into(),
            segments: vec![PathSegment::Affine { from: p, to: p }],
        }
    }

    /// The loop traversed backwards.
    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| match *s {
                PathSegment::Affine { from, to } => PathSegment::Affine { from: to, to: from },
                PathSegment::PseudoLine { p, theta } => PathSegment::PseudoLine {
                    p,
                    theta: theta + PI,
                },
                PathSegment::Ray { base, psi, from, to } => PathSegment::Ray {
                    base,
                    psi,
                    from: to,
                    to: from,
                },
                PathSegment::Divisor { base, from, to } => PathSegment::Divisor {
                    base,
                    from: to,
                    to: from,
                },
            })
            .collect();
        LoopSpec {
            name: format!("{}^-1", self.name),
            segments,
        }
    }

    /// This loop followed by `other`.
    pub fn then(&self, other: &LoopSpec) -> Self {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().copied());
        LoopSpec {
            name: format!("{}*{}", self.name, other.name),
            segments,
        }
    }
}

/// A permutation of the five arc slots: `map[i]` is where slot i ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(pub [usize; 5]);

impl Permutation {
    pub fn identity() -> Self {
        Permutation([0, 1, 2, 3, 4])
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = [false; 5];
        self.0.iter().all(|&j| j < 5 && !std::mem::replace(&mut seen[j], true))
    }

    /// First `self`, then `next`.
    pub fn then(&self, next: &Permutation) -> Self {
        Permutation(self.0.map(|j| next.0[j]))
    }

    pub fn inverse(&self) -> Self {
        let mut out = [0; 5];
        for (i, &j) in self.0.iter().enumerate() {
            out[j] = i;
        }
        Permutation(out)
    }
}

/// Size of the orbit of slot 0 under the group generated by `gens`.
pub fn orbit_size(gens: &[Permutation]) -> usize {
    let mut orbit = vec![0usize];
    let mut k = 0;
    while k < orbit.len() {
        let x = orbit[k];
        for g in gens {
            for y in [g.0[x], g.inverse().0[x]] {
                if !orbit.contains(&y) {
                    orbit.push(y);
                }
            }
        }
        k += 1;
    }
    orbit.len()
}

type Pair = (Section, Section);

fn norm_pair(a: Section, b: Section) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Marked points as RP¹ angles in [0, π).
fn angles(n: &NodeEval, reflect: bool) -> [f64; 5] {
    n.m.map(|m| {
        let a = m[1].atan2(m[0]);
        let a = if reflect { PI - a } else { a };
        a.rem_euclid(PI)
    })
}

fn chordal(a: f64, b: f64) -> f64 {
    (a - b).sin().abs()
}

/// Sections sorted by angle; near-ties keep their previous relative order.
fn cyclic_sequence(ang: &[f64; 5], prev: Option<&[Section; 5]>) -> [Section; 5] {
    let mut seq = Section::ALL;
    let rank = |s: Section| prev.map_or(s.index(), |p| p.iter().position(|&x| x == s).unwrap());
    seq.sort_by(|&x, &y| {
        let (ax, ay) = (ang[x.index()], ang[y.index()]);
        if chordal(ax, ay) < TIE && prev.is_some() {
            rank(x).cmp(&rank(y))
        } else {
            ax.total_cmp(&ay).then(rank(x).cmp(&rank(y)))
        }
    });
    seq
}

fn adjacency(seq: &[Section; 5]) -> Vec<Pair> {
    let mut v: Vec<Pair> = (0..5).map(|i| norm_pair(seq[i], seq[(i + 1) % 5])).collect();
    v.sort();
    v
}

/// If `new` differs from `old` by swapping one adjacent pair, returns
/// (A, X, Y, B) with X, Y the swapped sections and A, B their outer
/// neighbours in `old`.
fn single_swap(old: &[Section; 5], new_adj: &[Pair]) -> Option<(Section, Section, Section, Section)> {
    for i in 0..5 {
        let mut s = *old;
        s.swap(i, (i + 1) % 5);
        if adjacency(&s) == new_adj {
            return Some((old[(i + 4) % 5], old[i], old[(i + 1) % 5], old[(i + 2) % 5]));
        }
    }
    None
}

/// Outcome of transporting the five arcs around one loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub name: String,
    pub permutation: Permutation,
    /// arc names at the base point, indexing the slots
    pub slots: Vec<Pair>,
    pub steps: usize,
    pub swaps: Vec<Pair>,
    pub min_step: f64,
}

struct Tracker {
    seq: [Section; 5],
    ang: [f64; 5],
    u: [f64; 4],
    /// current name of the arc that started in each slot
    arcs: Vec<Pair>,
    swaps: Vec<Pair>,
}

impl Tracker {
    /// Tries to advance to `node`; returns false if the step is too coarse.
    fn advance(&mut self, node: &NodeEval) -> bool {
        let dot: f64 = (0..4).map(|i| node.gauge.u[i] * self.u[i]).sum();
        let reflect = dot < 0.0;
        let ang = angles(node, reflect);
        if (0..5).any(|j| chordal(ang[j], self.ang[j]) >= MAX_MOVE) {
            return false;
        }
        let seq = cyclic_sequence(&ang, Some(&self.seq));
        let adj = adjacency(&seq);
        if adj != adjacency(&self.seq) {
            let Some((a, x, y, b)) = single_swap(&self.seq, &adj) else {
                return false;
            };
            let (ax, yb) = (norm_pair(a, x), norm_pair(y, b));
            for arc in self.arcs.iter_mut() {
                if *arc == ax {
                    *arc = norm_pair(a, y);
                } else if *arc == yb {
                    *arc = norm_pair(x, b);
                }
            }
            self.swaps.push(norm_pair(x, y));
        }
        self.seq = seq;
        self.ang = ang;
        self.u = if reflect { node.gauge.u.map(|v| -v) } else { node.gauge.u };
        true
    }
}

/// Transports the five arcs around a loop based at p*, with adaptive step
/// halving, and returns the induced permutation of arc slots.
pub fn monodromy(atlas: &Atlas, spec: &LoopSpec, p_star: Complex64) -> Result<TransportResult> {
    let start = PathSegment::Affine { from: p_star, to: p_star }.point(atlas, 0.0)?;
    let ang0 = angles(&start, false);
    let seq0 = cyclic_sequence(&ang0, None);
    let slots = adjacency(&seq0);
    let mut tr = Tracker {
        seq: seq0,
        ang: ang0,
        u: start.gauge.u,
        arcs: slots.clone(),
        swaps: Vec::new(),
    };
    let mut steps = 0;
    let mut min_step: f64 = INITIAL_STEP;
    for (k, seg) in spec.segments.iter().enumerate() {
        let mut s = 0.0;
        let mut h = INITIAL_STEP;
        // the segment start must continue the previous one
        let first = seg.point(atlas, 0.0)?;
        if !tr.advance(&first) {
            return Err(AtlasError::AmbiguousTransport(k as f64));
        }
        while s < 1.0 {
            let t = (s + h).min(1.0);
            let node = seg.point(atlas, t)?;
            if tr.advance(&node) {
                s = t;
                steps += 1;
                h = (2.0 * h).min(INITIAL_STEP);
            } else {
                h *= 0.5;
                min_step = min_step.min(h);
                if h < MIN_STEP {
                    return Err(AtlasError::AmbiguousTransport(k as f64 + s));
                }
            }
        }
    }
    // back at p*: compare with the starting fiber
    let end = PathSegment::Affine { from: p_star, to: p_star }.point(atlas, 0.0)?;
    let gap = (0..5)
        .map(|j| chordal(angles(&end, false)[j], ang0[j]))
        .fold(0.0, f64::max);
    if !tr.advance(&end) || gap > 1e-9 {
        return Err(AtlasError::OpenLoop(gap));
    }
    let mut map = [0usize; 5];
    for (i, arc) in tr.arcs.iter().enumerate() {
        map[i] = slots
            .iter()
            .position(|s| s == arc)
            .ok_or(AtlasError::OpenLoop(f64::NAN))?;
    }
    Ok(TransportResult {
        name: spec.name.clone(),
        permutation: Permutation(map),
        slots,
        steps,
        swaps: tr.swaps,
        min_step,
    })
}

/// Smallest chordal gap between marked points of the fiber over p.
pub fn min_marked_gap(atlas: &Atlas, p: Complex64) -> Option<f64> {
    let n = PathSegment::Affine { from: p, to: p }.point(atlas, 0.0).ok()?;
    let a = angles(&n, false);
    let mut best = f64::INFINITY;
    for i in 0..5 {
        for j in i + 1..5 {
            best = best.min(chordal(a[i], a[j]));
        }
    }
    Some(best)
}

/// Base point for the loops: the grid point of [−1, 2.5]² (step 0.125) whose
/// fiber has the most separated marked points, away from the base points.
pub fn choose_base_point(atlas: &Atlas) -> Complex64 {
    let mut best = (f64::NEG_INFINITY, Complex64::new(0.5, -0.5));
    for i in 0..=28 {
        for j in 0..=28 {
            let p = Complex64::new(-1.0 + 0.125 * i as f64, -1.0 + 0.125 * j as f64);
            if atlas.base_points().iter().any(|b| (p - b).norm() < 0.3) {
                continue;
            }
            if let Some(g) = min_marked_gap(atlas, p) {
                if g > best.0 {
                    best = (g, p);
                }
            }
        }
    }
    best.1
}

fn segment_clearance(from: Complex64, to: Complex64, z: Complex64) -> f64 {
    let d = to - from;
    let t = if d.norm_sqr() > 0.0 {
        (((z - from) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (from + t * d - z).norm()
}

/// Loop around the exceptional divisor over `b`: in along a ray to the
/// divisor, once around it (ψ over a half-turn), and back out the same ray.
pub fn divisor_loop(atlas: &Atlas, b: BasePoint, p_star: Complex64) -> LoopSpec {
    let center = atlas.base_point(b);
    let others: Vec<Complex64> = BasePoint::ALL
        .iter()
        .filter(|&&x| x != b)
        .map(|&x| atlas.base_point(x))
        .collect();
    let radius = 0.05;
    let mut choice = (f64::NEG_INFINITY, 0.0);
    for k in 0..12 {
        let psi = PI * k as f64 / 12.0;
        let u = exceptional_approach(atlas, b, Rp1Dir::from_angle(psi));
        for (sign, angle) in [(1.0, psi), (-1.0, psi + PI)] {
            let tip = center + sign * radius * u;
            let clear = others
                .iter()
                .map(|&z| segment_clearance(p_star, tip, z))
                .fold(f64::INFINITY, f64::min);
            if clear > choice.0 + 1e-12 {
                choice = (clear, angle);
            }
        }
    }
    let psi = choice.1;
    let u = exceptional_approach(atlas, b, Rp1Dir::from_angle(psi));
    let tip = center + radius * u;
    LoopSpec {
        name: format!("E_{}", b.name()),
        segments: vec![
            PathSegment::Affine { from: p_star, to: tip },
            PathSegment::Ray { base: b, psi, from: radius, to: RAY_INNER },
            PathSegment::Divisor { base: b, from: psi, to: psi + PI },
            PathSegment::Ray { base: b, psi, from: RAY_INNER, to: radius },
            PathSegment::Affine { from: tip, to: p_star },
        ],
    }
}

/// The projective line through p* closed through infinity, in the direction
/// keeping farthest from the base points.
pub fn pseudo_line_loop(atlas: &Atlas, p_star: Complex64) -> LoopSpec {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..90 {
        let theta = PI * (k as f64 + 0.5) / 90.0;
        let dir = Complex64::from_polar(1.0, theta);
        let clear = atlas
            .base_points()
            .iter()
            .map(|&z| ((z - p_star) * dir.conj()).im.abs())
            .fold(f64::INFINITY, f64::min);
        if clear > best.0 {
            best = (clear, theta);
        }
    }
    LoopSpec {
        name: "pseudo-line".into(),
        segments: vec![PathSegment::PseudoLine { p: p_star, theta: best.1 }],
    }
}

/// The generator set: loops around the four exceptional divisors and one
/// pseudo-line through infinity.
pub fn generator_loops(atlas: &Atlas, p_star: Complex64) -> Vec<LoopSpec> {
    let mut out: Vec<LoopSpec> = BasePoint::ALL
        .iter()
        .map(|&b| divisor_loop(atlas, b, p_star))
        .collect();
    out.push(pseudo_line_loop(atlas, p_star));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_algebra() {
        let p = Permutation([1, 2, 0, 4, 3]);
        assert!(p.is_bijection());
        assert_eq!(p.then(&p.inverse()), Permutation::identity());
        assert!(!Permutation([0, 0, 1, 2, 3]).is_bijection());
        assert_eq!(orbit_size(&[p]), 3);
        assert_eq!(orbit_size(&[p, Permutation([0, 1, 2, 4, 3]), Permutation([3, 1, 2, 0, 4])]), 5);
    }

    #[test]
    fn swap_detection_renames_neighbouring_arcs() {
        use Section::*;
        let old = [Zero, P, One, A, Inf];
        let mut new = old;
        new.swap(1, 2);
        let (a, x, y, b) = single_swap(&old, &adjacency(&new)).unwrap();
        assert_eq!((a, x, y, b), (Zero, P, One, A));
        let mut two = old;
        two.swap(0, 1);
        two.swap(2, 3);
        assert!(single_swap(&old, &adjacency(&two)).is_none());
    }
}
