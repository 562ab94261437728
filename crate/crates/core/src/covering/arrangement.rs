//! The traced arrangement as an embedded graph in RP².
//!
//! Vertices are the four base points, crossings between index-disjoint loci,
//! and the points where loci meet the line at infinity. Edges are the pieces
//! of the traced curves between vertices, plus the arcs of the line at
//! infinity. Faces are counted by walking face boundaries in the rotation
//! system of the disk model, where the line at infinity is the boundary
//! circle with antipodal points identified: every face of RP² is a face of
//! the disk, and the one extra disk face is the outside.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trace::{LocusCrossing, TracedLocus};

/// V, E, F of the arrangement on RP².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrangementCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub base_points: usize,
    pub affine_crossings: usize,
    pub infinity_crossings: usize,
    /// connected components of the disk-model graph (must be 1)
    pub graph_components: usize,
}

impl ArrangementCounts {
    pub fn euler(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64
    }
}

struct Graph {
    pos: Vec<Complex64>,
    /// (from, to, departure angle at from, arrival angle at to)
    edges: Vec<(usize, usize, f64, f64)>,
    boundary: Vec<bool>,
}

impl Graph {
    fn vertex(&mut self, q: Complex64, on_boundary: bool) -> usize {
        if let Some(i) = self.pos.iter().position(|p| (p - q).norm() < 1e-9) {
            return i;
        }
        self.pos.push(q);
        self.boundary.push(on_boundary);
        self.pos.len() - 1
    }
}

/// Direction leaving the first point of a chain, along the chord to the
/// next distinct point. Chain points lie on the curve to near machine
/// precision, so short chords give the tangent.
fn leave_angle(chain: &[Complex64]) -> f64 {
    let o = chain[0];
    let far = chain[1..]
        .iter()
        .find(|p| (**p - o).norm() >= 1e-10)
        .unwrap_or(chain.last().unwrap());
    (far - o).arg()
}

/// Nearest (segment, parameter, distance) of a point on a chain.
fn locate(chain: &[Complex64], c: Complex64) -> (usize, f64, f64) {
    let mut best = (0usize, 0.0, f64::INFINITY);
    for i in 0..chain.len() - 1 {
        let (a, b) = (chain[i], chain[i + 1]);
        let d = b - a;
        let t = if d.norm_sqr() > 0.0 {
            (((c - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = (a + d * t - c).norm();
        if dist < best.2 {
            best = (i, t, dist);
        }
    }
    best
}

/// Splits a chain at cut points given by (segment index, parameter, point).
fn split_at(chain: &[Complex64], mut at: Vec<(usize, f64, Complex64)>) -> Vec<Vec<Complex64>> {
    at.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out = Vec::new();
    let mut cur = vec![chain[0]];
    let mut k = 0;
    for i in 0..chain.len() - 1 {
        while k < at.len() && at[k].0 == i {
            cur.push(at[k].2);
            out.push(std::mem::replace(&mut cur, vec![at[k].2]));
            k += 1;
        }
        cur.push(chain[i + 1]);
    }
    out.push(cur);
    out
}

/// Counts V, E, F for traced affine loci together with the line at infinity.
/// `base_q` are the disk-model base points, `crossings` the index-disjoint
/// locus crossings, `cell` the grid cell size (largest distance accepted
/// between a crossing and the polyline it cuts).
pub fn arrangement_counts(
    loci: &[TracedLocus],
    crossings: &[LocusCrossing],
    base_q: &[Complex64; 4],
    cell: f64,
) -> ArrangementCounts {
    let mut g = Graph {
        pos: Vec::new(),
        edges: Vec::new(),
        boundary: Vec::new(),
    };
    for &b in base_q {
        g.vertex(b, false);
    }
    let mut curve_edges = 0;
    for locus in loci {
        let pieces = locus.pieces();
        let mut cuts: Vec<Vec<(usize, f64, Complex64)>> = vec![Vec::new(); pieces.len()];
        for c in crossings.iter().filter(|c| c.pairs.contains(&locus.pair)) {
            let best = pieces
                .iter()
                .enumerate()
                .filter(|(_, p)| p.len() >= 2)
                .map(|(k, p)| (k, locate(p, c.q)))
                .min_by(|x, y| x.1 .2.total_cmp(&y.1 .2));
            if let Some((k, (i, t, d))) = best {
                if d < 2.0 * cell {
                    cuts[k].push((i, t, c.q));
                }
            }
        }
        for (chain, at) in pieces.iter().zip(cuts) {
            if chain.len() < 2 {
                continue;
            }
            for piece in split_at(chain, at) {
                if piece.len() < 2 {
                    continue;
                }
                let (a, b) = (piece[0], *piece.last().unwrap());
                let va = g.vertex(a, a.norm() > 1.0 - 1e-12);
                let vb = g.vertex(b, b.norm() > 1.0 - 1e-12);
                let rev: Vec<Complex64> = piece.iter().rev().copied().collect();
                g.edges.push((va, vb, leave_angle(&piece), leave_angle(&rev)));
                curve_edges += 1;
            }
        }
    }
    // boundary arcs between consecutive boundary vertices, counter-clockwise
    let mut bnd: Vec<usize> = (0..g.pos.len()).filter(|&i| g.boundary[i]).collect();
    bnd.sort_by(|&a, &b| g.pos[a].arg().total_cmp(&g.pos[b].arg()));
    for i in 0..bnd.len() {
        let (a, b) = (bnd[i], bnd[(i + 1) % bnd.len()]);
        let (ta, tb) = (g.pos[a].arg(), g.pos[b].arg());
        g.edges.push((a, b, ta + PI / 2.0, tb - PI / 2.0));
    }
    let infinity_crossings = bnd.len() / 2;

    // rotation system: outgoing half-edges sorted by angle at each vertex
    let nh = 2 * g.edges.len();
    let mut out_of: HashMap<usize, Vec<(f64, usize)>> = HashMap::new();
    for (e, &(a, b, da, db)) in g.edges.iter().enumerate() {
        out_of.entry(a).or_default().push((da.rem_euclid(TAU), 2 * e));
        out_of.entry(b).or_default().push((db.rem_euclid(TAU), 2 * e + 1));
    }
    let mut rank: Vec<(usize, usize)> = vec![(0, 0); nh];
    for (&v, list) in out_of.iter_mut() {
        list.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (k, &(_, h)) in list.iter().enumerate() {
            rank[h] = (v, k);
        }
    }
    let head = |h: usize| -> usize {
        let (a, b, _, _) = g.edges[h / 2];
        if h.is_multiple_of(2) {
            b
        } else {
            a
        }
    };
    let mut seen = vec![false; nh];
    let mut orbits = 0;
    let mut outer = 0;
    for start in 0..nh {
        if seen[start] {
            continue;
        }
        orbits += 1;
        let mut h = start;
        let mut all_boundary = true;
        loop {
            seen[h] = true;
            all_boundary &= h / 2 >= curve_edges;
            // at the head, turn to the next outgoing half-edge clockwise from
            // the reversed one
            let twin = h ^ 1;
            let v = head(h);
            let list = &out_of[&v];
            let k = rank[twin].1;
            h = list[(k + list.len() - 1) % list.len()].1;
            if h == start {
                break;
            }
        }
        if all_boundary {
            outer += 1;
        }
    }
    // connectivity of the disk graph
    let mut parent: Vec<usize> = (0..g.pos.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(a, b, _, _) in &g.edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let graph_components = (0..g.pos.len()).filter(|&i| find(&mut parent, i) == i).count();

    let affine_crossings = crossings.len();
    // vertices placed on vertex-free closed cycles add one edge each, so
    // they cancel in V − E
    ArrangementCounts {
        vertices: g.pos.len() - bnd.len() + infinity_crossings,
        edges: curve_edges + infinity_crossings,
        faces: orbits - outer.min(1),
        base_points: base_q.len(),
        affine_crossings,
        infinity_crossings,
        graph_components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_inserts_cut_points_in_order() {
        let chain: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let at = [Complex64::new(2.5, 0.0), Complex64::new(0.5, 0.0)]
            .iter()
            .map(|&c| {
                let (i, t, d) = locate(&chain, c);
                assert!(d < 1e-15);
                (i, t, c)
            })
            .collect();
        let pieces = split_at(&chain, at);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0].last().unwrap().re, 0.5);
        assert_eq!(pieces[1][0].re, 0.5);
        assert_eq!(pieces[2][0].re, 2.5);
        assert_eq!(pieces[2].last().unwrap().re, 4.0);
    }
}
