//! Real projective primitives: directions in RP¹, points and lines of RP²,
//! conics, and the handful of incidence computations built on them.
//!
//! All objects are stored unit-normalized with a canonical sign (first
//! coordinate whose magnitude exceeds [`NONZERO_EPS`] is positive), so two
//! representatives of the same projective object compare equal up to
//! rounding.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::linalg;

/// Coordinates with magnitude at or below this are treated as zero when
/// choosing the canonical sign.
pub const NONZERO_EPS: f64 = 1e-13;
/// Relative singular-value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-9;
/// Default incidence tolerance on unit-normalized data.
pub const DEFAULT_TOL: f64 = 1e-8;

const UNDERFLOW: f64 = 1e-300;

fn canonicalize<const N: usize>(mut c: [f64; N]) -> Option<[f64; N]> {
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > UNDERFLOW) || !norm.is_finite() {
        return None;
    }
    for x in c.iter_mut() {
        *x /= norm;
    }
    if let Some(lead) = c.iter().find(|x| x.abs() > NONZERO_EPS) {
        if *lead < 0.0 {
            for x in c.iter_mut() {
                *x = -*x;
            }
        }
    }
    Some(c)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// A point of RP¹, i.e. a real line through the origin of C = R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rp1Dir {
    u: f64,
    v: f64,
}

impl Rp1Dir {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        let [u, v] = canonicalize([u, v]).ok_or(AtlasError::ZeroInput(u.hypot(v)))?;
        Ok(Rp1Dir { u, v })
    }

    /// The direction at angle `theta` (taken mod π).
    pub fn from_angle(theta: f64) -> Self {
        Rp1Dir::new(theta.cos(), theta.sin()).expect("unit vector")
    }

    pub fn real_axis() -> Self {
        Rp1Dir { u: 1.0, v: 0.0 }
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.u, self.v)
    }

    /// Angular chart value in [0, π).
    pub fn angle(&self) -> f64 {
        let t = self.v.atan2(self.u);
        let t = if t < 0.0 { t + std::f64::consts::PI } else { t };
        if t >= std::f64::consts::PI {
            0.0
        } else {
            t
        }
    }

    /// The canonical unit representative as a complex number.
    pub fn unit(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    /// Chordal distance |sin(θ₁ − θ₂)|, a metric on RP¹.
    pub fn chordal(&self, other: &Rp1Dir) -> f64 {
        (self.u * other.v - self.v * other.u).abs()
    }
}

/// `2arg`: the real line through 0 spanned by `z`.
pub fn two_arg(z: Complex64) -> Result<Rp1Dir> {
    let r = z.norm();
    if !(r > UNDERFLOW) {
        return Err(AtlasError::ZeroInput(r));
    }
    Rp1Dir::new(z.re / r, z.im / r)
}

/// A point of RP² = C ∪ RP¹ in homogeneous coordinates (X, Y, W); affine
/// points have image (X + iY)/W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rp2Point {
    c: [f64; 3],
}

impl Rp2Point {
    pub fn new(x: f64, y: f64, w: f64) -> Result<Self> {
        let c = canonicalize([x, y, w]).ok_or(AtlasError::ZeroInput(norm3([x, y, w])))?;
        Ok(Rp2Point { c })
    }

    pub fn from_array(c: [f64; 3]) -> Result<Self> {
        Rp2Point::new(c[0], c[1], c[2])
    }

    pub fn affine(z: Complex64) -> Self {
        Rp2Point::new(z.re, z.im, 1.0).expect("W = 1")
    }

    /// The point at infinity in direction `theta`.
    pub fn at_infinity(theta: f64) -> Self {
        Rp2Point::new(theta.cos(), theta.sin(), 0.0).expect("unit vector")
    }

    pub fn coords(&self) -> [f64; 3] {
        self.c
    }

    pub fn w(&self) -> f64 {
        self.c[2]
    }

    pub fn is_at_infinity(&self, tol: f64) -> bool {
        self.c[2].abs() <= tol
    }

    /// Affine image, `None` on the line at infinity.
    pub fn to_affine(&self) -> Option<Complex64> {
        if self.c[2].abs() <= NONZERO_EPS {
            None
        } else {
            Some(Complex64::new(self.c[0] / self.c[2], self.c[1] / self.c[2]))
        }
    }

    /// Direction of a point at infinity (or of the affine image otherwise).
    pub fn direction(&self) -> Result<Rp1Dir> {
        Rp1Dir::new(self.c[0], self.c[1])
    }

    /// Sine of the angle between unit representatives; a metric on RP².
    pub fn distance(&self, other: &Rp2Point) -> f64 {
        norm3(cross(self.c, other.c))
    }
}

/// A line λX + μY + νW = 0 of RP².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjLine {
    c: [f64; 3],
}

impl ProjLine {
    pub fn new(l: f64, m: f64, n: f64) -> Result<Self> {
        let c = canonicalize([l, m, n]).ok_or(AtlasError::ZeroInput(norm3([l, m, n])))?;
        Ok(ProjLine { c })
    }

    /// Closure of the affine line `base + R·dir`.
    pub fn through_with_direction(base: Complex64, dir: Complex64) -> Result<Self> {
        // -dir.im * X + dir.re * Y + (dir.im * base.re - dir.re * base.im) W = 0
        ProjLine::new(-dir.im, dir.re, dir.im * base.re - dir.re * base.im)
    }

    pub fn line_at_infinity() -> Self {
        ProjLine { c: [0.0, 0.0, 1.0] }
    }

    pub fn coords(&self) -> [f64; 3] {
        self.c
    }

    pub fn incidence(&self, p: &Rp2Point) -> f64 {
        dot3(self.c, p.c)
    }
}

/// The line through two distinct points.
pub fn line_through(p: &Rp2Point, q: &Rp2Point) -> Result<ProjLine> {
    let l = cross(p.c, q.c);
    if norm3(l) <= DEFAULT_TOL {
        return Err(AtlasError::CoincidentPoints);
    }
    ProjLine::new(l[0], l[1], l[2])
}

/// Intersection of two distinct lines.
pub fn meet(l1: &ProjLine, l2: &ProjLine) -> Result<Rp2Point> {
    let p = cross(l1.c, l2.c);
    if norm3(p) <= DEFAULT_TOL {
        return Err(AtlasError::Indeterminate);
    }
    Rp2Point::from_array(p)
}

/// Smallest-to-largest singular value ratio of the stacked line matrix.
pub fn concurrency_residual(lines: [&ProjLine; 3]) -> f64 {
    let sv = linalg::singular_values(&DMatrix::from_fn(3, 3, |i, j| lines[i].c[j]));
    if sv[0] <= 0.0 {
        return 0.0;
    }
    sv[2] / sv[0]
}

/// The common point of three lines.
///
/// Accepts a repeated line (the answer is then the repeated line met with the
/// third) and parallel lines (the answer lies at infinity).
pub fn concurrency_point(l1: &ProjLine, l2: &ProjLine, l3: &ProjLine, tol: f64) -> Result<Rp2Point> {
    let lines = [l1, l2, l3];
    let svd = linalg::svd(&DMatrix::from_fn(3, 3, |i, j| lines[i].c[j]));
    let sv = &svd.s;
    if sv[1] <= RANK_RTOL * sv[0] {
        return Err(AtlasError::Indeterminate);
    }
    if sv[2] > tol * sv[0] {
        return Err(AtlasError::NotConcurrent(sv[2] / sv[0]));
    }
    let vt = &svd.v_t;
    let p = [vt[(2, 0)], vt[(2, 1)], vt[(2, 2)]];
    // every well-separated pairwise meet must lie on the remaining line
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let q = cross(lines[i].c, lines[j].c);
        let nq = norm3(q);
        if nq <= 1e-6 {
            continue;
        }
        let q = [q[0] / nq, q[1] / nq, q[2] / nq];
        let inc = dot3(lines[k].c, q).abs();
        if inc > tol.max(sv[2] / sv[0] / nq * 4.0) {
            return Err(AtlasError::NotConcurrent(inc));
        }
    }
    Rp2Point::from_array(p)
}

/// A conic AX² + BXY + CY² + DXW + EYW + FW² = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conic {
    c: [f64; 6],
}

impl Conic {
    pub fn new(c: [f64; 6]) -> Result<Self> {
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = canonicalize(c).ok_or(AtlasError::ZeroInput(n))?;
        Ok(Conic { c })
    }

    pub fn coeffs(&self) -> [f64; 6] {
        self.c
    }

    /// Symmetric matrix M with q(P) = Pᵀ M P.
    pub fn matrix(&self) -> Matrix3<f64> {
        let [a, b, c, d, e, f] = self.c;
        Matrix3::new(a, b / 2.0, d / 2.0, b / 2.0, c, e / 2.0, d / 2.0, e / 2.0, f)
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        Conic::new([
            m[(0, 0)],
            m[(0, 1)] + m[(1, 0)],
            m[(1, 1)],
            m[(0, 2)] + m[(2, 0)],
            m[(1, 2)] + m[(2, 1)],
            m[(2, 2)],
        ])
    }

    /// q evaluated at the unit representative of `p`.
    pub fn eval(&self, p: &Rp2Point) -> f64 {
        let [x, y, w] = p.c;
        let [a, b, c, d, e, f] = self.c;
        a * x * x + b * x * y + c * y * y + d * x * w + e * y * w + f * w * w
    }

    /// Sine of the angle between coefficient vectors (0 for equal conics).
    pub fn distance(&self, other: &Conic) -> f64 {
        let d: f64 = self.c.iter().zip(other.c.iter()).map(|(a, b)| a * b).sum();
        (1.0 - d * d).max(0.0).sqrt()
    }
}

/// Result of a least-squares conic fit.
#[derive(Debug, Clone)]
pub struct ConicFit {
    pub conic: Conic,
    /// max |q(pᵢ)| over the unit-normalized input points.
    pub max_residual: f64,
    /// σ₆/σ₁ of the design matrix.
    pub null_ratio: f64,
}

/// Least-squares conic through at least six points.
pub fn fit_conic(points: &[Rp2Point]) -> Result<ConicFit> {
    if points.len() < 6 {
        return Err(AtlasError::RankDeficient(format!(
            "{} points, need at least 6",
            points.len()
        )));
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 6, |i, j| {
        let [x, y, w] = points[i].c;
        match j {
            0 => x * x,
            1 => x * y,
            2 => y * y,
            3 => x * w,
            4 => y * w,
            _ => w * w,
        }
    });
    let svd = linalg::svd(&design);
    let sv = &svd.s;
    if sv[4] <= RANK_RTOL * sv[0] {
        return Err(AtlasError::RankDeficient(format!(
            "design matrix sigma5/sigma1 = {:e}",
            sv[4] / sv[0]
        )));
    }
    let vt = &svd.v_t;
    let coeffs: [f64; 6] = std::array::from_fn(|j| vt[(5, j)]);
    let conic = Conic::new(coeffs)?;
    let max_residual = points.iter().map(|p| conic.eval(p).abs()).fold(0.0, f64::max);
    Ok(ConicFit {
        conic,
        max_residual,
        null_ratio: sv[5] / sv[0],
    })
}

/// Real roots of c3 λ³ + c2 λ² + c1 λ + c0, closed form with one Newton
/// polish per root. Degree drops when leading coefficients vanish.
pub fn solve_cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if c3.abs() <= 1e-14 * scale {
        solve_quadratic(c2, c1, c0)
    } else {
        let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
        // depressed cubic t³ + p t + q with λ = t − a/3
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let shift = -a / 3.0;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if p.abs() < 1e-300 && q.abs() < 1e-300 {
            vec![shift]
        } else if disc > 0.0 {
            let sq = disc.sqrt();
            let u = (-q / 2.0 + sq).cbrt();
            let v = (-q / 2.0 - sq).cbrt();
            vec![u + v + shift]
        } else {
            let r = (-p / 3.0).sqrt();
            let arg = if r > 0.0 {
                (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let phi = arg.acos();
            (0..3)
                .map(|j| {
                    2.0 * r * ((phi + 2.0 * std::f64::consts::PI * j as f64) / 3.0).cos() + shift
                })
                .collect()
        }
    };
    for r in roots.iter_mut() {
        let f = ((c3 * *r + c2) * *r + c1) * *r + c0;
        let df = (3.0 * c3 * *r + 2.0 * c2) * *r + c1;
        if df != 0.0 {
            let step = f / df;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

fn adjugate(m: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        // cofactor of (j, i)
        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    })
}

fn cross_matrix(p: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, p[2], -p[1], -p[2], 0.0, p[0], p[1], -p[0], 0.0)
}

/// Splits a degenerate conic matrix into its two real lines, or `None` when
/// the lines are complex conjugate.
fn split_degenerate(m: &Matrix3<f64>) -> Option<[[f64; 3]; 2]> {
    let m = m / m.norm();
    let adj = adjugate(&m);
    let adj_norm = adj.norm();
    if adj_norm < 1e-10 {
        // double line
        let i = (0..3).max_by(|&a, &b| m[(a, a)].abs().total_cmp(&m[(b, b)].abs()))?;
        if m[(i, i)].abs() < 1e-14 {
            return None;
        }
        let g: [f64; 3] = std::array::from_fn(|j| m[(j, i)] / m[(i, i)].abs().sqrt());
        return Some([g, g]);
    }
    let i = (0..3).max_by(|&a, &b| adj[(a, a)].abs().total_cmp(&adj[(b, b)].abs()))?;
    if -adj[(i, i)] < -1e-12 * adj_norm {
        return None;
    }
    let beta = (-adj[(i, i)]).max(0.0).sqrt();
    if beta == 0.0 {
        return None;
    }
    let p = adj.column(i) / beta;
    let c = m + cross_matrix(&p);
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for r in 0..3 {
        for s in 0..3 {
            if c[(r, s)].abs() > best {
                best = c[(r, s)].abs();
                bi = r;
                bj = s;
            }
        }
    }
    let g = [c[(bi, 0)], c[(bi, 1)], c[(bi, 2)]];
    let h = [c[(0, bj)], c[(1, bj)], c[(2, bj)]];
    Some([g, h])
}

fn line_conic_points(line: [f64; 3], conic: &Matrix3<f64>) -> Vec<[f64; 3]> {
    let n = norm3(line);
    if n == 0.0 {
        return Vec::new();
    }
    let g = [line[0] / n, line[1] / n, line[2] / n];
    // orthonormal basis of the plane gᵀx = 0
    let axis = if g[0].abs() < 0.6 {
        [1.0, 0.0, 0.0]
    } else if g[1].abs() < 0.6 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let r1 = cross(g, axis);
    let n1 = norm3(r1);
    let r1 = [r1[0] / n1, r1[1] / n1, r1[2] / n1];
    let r2 = cross(g, r1);
    let v1 = Vector3::from(r1);
    let v2 = Vector3::from(r2);
    let a = v1.dot(&(conic * v1));
    let b = 2.0 * v1.dot(&(conic * v2));
    let c = v2.dot(&(conic * v2));
    let scale = a.abs().max(b.abs()).max(c.abs());
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 && disc > -1e-12 * scale * scale {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Vec::new();
    }
    // roots in (α : β) with a α² + b αβ + c β² = 0
    let sq = disc.sqrt();
    let mut out = Vec::new();
    if a.abs() >= c.abs() {
        // β = 1, α = (−b ± sq) / 2a
        for s in [1.0, -1.0] {
            let alpha = (-b + s * sq) / (2.0 * a);
            out.push([alpha * r1[0] + r2[0], alpha * r1[1] + r2[1], alpha * r1[2] + r2[2]]);
        }
    } else {
        for s in [1.0, -1.0] {
            let beta = (-b + s * sq) / (2.0 * c);
            out.push([r1[0] + beta * r2[0], r1[1] + beta * r2[1], r1[2] + beta * r2[2]]);
        }
    }
    out
}

/// Gauss–Newton polish of a common point of two conics on the unit sphere.
fn polish_intersection(p: [f64; 3], m1: &Matrix3<f64>, m2: &Matrix3<f64>) -> [f64; 3] {
    let mut x = Vector3::from(p).normalize();
    for _ in 0..6 {
        let f = nalgebra::Vector2::new(x.dot(&(m1 * x)), x.dot(&(m2 * x)));
        if f.norm() < 1e-17 {
            break;
        }
        // tangent basis to the sphere at x
        let seed = if x[0].abs() < 0.6 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let t1 = x.cross(&seed).normalize();
        let t2 = x.cross(&t1);
        let g1 = 2.0 * (m1 * x);
        let g2 = 2.0 * (m2 * x);
        let j = nalgebra::Matrix2::new(g1.dot(&t1), g1.dot(&t2), g2.dot(&t1), g2.dot(&t2));
        let Some(inv) = j.try_inverse() else { break };
        let step = inv * f;
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }
        x = (x - t1 * step[0] - t2 * step[1]).normalize();
    }
    [x[0], x[1], x[2]]
}

/// Real common points of two conics via the degenerate member of their
/// pencil. An empty list means no real intersections.
pub fn intersect_conics(c1: &Conic, c2: &Conic) -> Result<Vec<Rp2Point>> {
    if c1.distance(c2) <= DEFAULT_TOL {
        return Err(AtlasError::IdenticalConics);
    }
    let m1 = c1.matrix();
    let m2 = c2.matrix();
    let det_at = |lambda: f64| (m1 + m2 * lambda).determinant();
    let c0 = m1.determinant();
    let c3 = m2.determinant();
    let fp = det_at(1.0);
    let fm = det_at(-1.0);
    let c2c = (fp + fm) / 2.0 - c0;
    let c1c = (fp - fm) / 2.0 - c3;
    let mut members: Vec<Matrix3<f64>> = solve_cubic(c3, c2c, c1c, c0)
        .into_iter()
        .map(|l| m1 + m2 * l)
        .collect();
    let scale = c0.abs().max(c3.abs()).max(c1c.abs()).max(c2c.abs());
    if c3.abs() <= 1e-12 * scale {
        members.push(m2);
    }

    let mut found: Vec<[f64; 3]> = Vec::new();
    for member in &members {
        let Some(lines) = split_degenerate(member) else {
            continue;
        };
        // intersect with whichever input conic is farther from this member
        let mn = member / member.norm();
        let d1 = (m1 / m1.norm() - mn).norm().min((m1 / m1.norm() + mn).norm());
        let target = if d1 > 1e-6 { &m1 } else { &m2 };
        for line in lines {
            for p in line_conic_points(line, target) {
                let p = polish_intersection(p, &m1, &m2);
                let v = Vector3::from(p);
                let r1 = v.dot(&(m1 * v)).abs();
                let r2 = v.dot(&(m2 * v)).abs();
                if r1 > 1e-8 || r2 > 1e-8 {
                    continue;
                }
                if !found.iter().any(|q| norm3(cross(*q, p)) < 1e-7) {
                    found.push(p);
                }
            }
        }
    }
    found.into_iter().map(Rp2Point::from_array).collect()
}

/// Circle through three non-collinear points, as a conic with A = C, B = 0.
pub fn circumcircle(z1: Complex64, z2: Complex64, z3: Complex64) -> Result<Conic> {
    let (center, radius) = circumcenter(z1, z2, z3)?;
    Conic::new([
        1.0,
        0.0,
        1.0,
        -2.0 * center.re,
        -2.0 * center.im,
        center.norm_sqr() - radius * radius,
    ])
}

/// Center and radius of the circle through three points.
pub fn circumcenter(z1: Complex64, z2: Complex64, z3: Complex64) -> Result<(Complex64, f64)> {
    let u = z2 - z1;
    let v = z3 - z1;
    let area = (u.conj() * v).im;
    let scale = u.norm() * v.norm();
    if area.abs() <= 1e-12 * scale.max(1e-300) {
        return Err(AtlasError::CollinearPoints);
    }
    // circumcenter relative to z1
    let num = Complex64::i() * (u * v.norm_sqr() - v * u.norm_sqr());
    let c = num / (2.0 * area);
    let center = z1 + c;
    Ok((center, c.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn two_arg_examples() {
        assert_abs_diff_eq!(two_arg(Complex64::new(1.0, 0.0)).unwrap().angle(), 0.0);
        let up = two_arg(Complex64::i()).unwrap();
        let down = two_arg(-Complex64::i()).unwrap();
        assert_eq!(up, down);
        assert_abs_diff_eq!(up.angle(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            two_arg(Complex64::new(1.0, 1.0)).unwrap().angle(),
            FRAC_PI_4,
            epsilon = 1e-15
        );
        assert!(matches!(
            two_arg(Complex64::new(0.0, 0.0)),
            Err(AtlasError::ZeroInput(_))
        ));
    }

    #[test]
    fn line_through_examples() {
        let l = line_through(&Rp2Point::affine(0.0.into()), &Rp2Point::affine(1.0.into())).unwrap();
        assert_eq!(l.coords(), [0.0, 1.0, 0.0]);

        let theta = 0.7;
        let l = line_through(&Rp2Point::affine(0.0.into()), &Rp2Point::at_infinity(theta)).unwrap();
        let expected = ProjLine::new(-theta.sin(), theta.cos(), 0.0).unwrap();
        for (a, b) in l.coords().iter().zip(expected.coords()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }

        // i × (1+i) by hand: (0,1,1) × (1,1,1) = (0, 1, -1): Y = W
        let l = line_through(
            &Rp2Point::affine(Complex64::i()),
            &Rp2Point::affine(Complex64::new(1.0, 1.0)),
        )
        .unwrap();
        let s = 0.5f64.sqrt();
        for (a, b) in l.coords().iter().zip([0.0, s, -s]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let p = Rp2Point::affine(Complex64::new(2.0, 1.0));
        assert!(matches!(line_through(&p, &p), Err(AtlasError::CoincidentPoints)));
    }

    #[test]
    fn concurrency_examples() {
        let p = Complex64::new(2.0, 1.0);
        let lines: Vec<ProjLine> = [0.3, 1.2, 2.5]
            .iter()
            .map(|t| ProjLine::through_with_direction(p, Complex64::from_polar(1.0, *t)).unwrap())
            .collect();
        let q = concurrency_point(&lines[0], &lines[1], &lines[2], DEFAULT_TOL).unwrap();
        assert!(q.distance(&Rp2Point::affine(p)) < 1e-12);

        let theta = 0.9f64;
        let dir = Complex64::from_polar(1.0, theta);
        let par: Vec<ProjLine> = [0.0, 1.0, -2.5]
            .iter()
            .map(|s| ProjLine::through_with_direction(Complex64::new(*s, 0.3), dir).unwrap())
            .collect();
        let q = concurrency_point(&par[0], &par[1], &par[2], DEFAULT_TOL).unwrap();
        assert!(q.distance(&Rp2Point::at_infinity(theta)) < 1e-12);

        let g = [
            ProjLine::new(1.0, 0.2, 0.3).unwrap(),
            ProjLine::new(-0.4, 1.0, 0.7).unwrap(),
            ProjLine::new(0.5, 0.5, -1.0).unwrap(),
        ];
        assert!(matches!(
            concurrency_point(&g[0], &g[1], &g[2], DEFAULT_TOL),
            Err(AtlasError::NotConcurrent(_))
        ));

        // repeated line meets the third
        let q = concurrency_point(&lines[0], &lines[0], &lines[1], DEFAULT_TOL).unwrap();
        assert!(q.distance(&Rp2Point::affine(p)) < 1e-12);
        assert!(matches!(
            concurrency_point(&lines[0], &lines[0], &lines[0], DEFAULT_TOL),
            Err(AtlasError::Indeterminate)
        ));
    }

    /// Independent oracle: the circle x² + y² + Dx + Ey + F = 0 through three
    /// points from a 3×3 linear solve.
    fn circle_oracle(zs: [Complex64; 3]) -> (Complex64, f64) {
        let m = Matrix3::from_fn(|i, j| match j {
            0 => zs[i].re,
            1 => zs[i].im,
            _ => 1.0,
        });
        let rhs = Vector3::from_fn(|i, _| -zs[i].norm_sqr());
        let sol = m.lu().solve(&rhs).unwrap();
        let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
        let r = (center.norm_sqr() - sol[2]).sqrt();
        (center, r)
    }

    #[test]
    fn circumcircle_examples() {
        let i = Complex64::i();
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        for zs in [[zero, one, i], [zero, 2.0 * one, one + i]] {
            let (c_oracle, r_oracle) = circle_oracle(zs);
            let (c, r) = circumcenter(zs[0], zs[1], zs[2]).unwrap();
            assert_abs_diff_eq!((c - c_oracle).norm(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(r, r_oracle, epsilon = 1e-14);
            let conic = circumcircle(zs[0], zs[1], zs[2]).unwrap();
            let k = conic.coeffs();
            assert_abs_diff_eq!(k[0], k[2], epsilon = 1e-15);
            assert_abs_diff_eq!(k[1], 0.0, epsilon = 1e-15);
            for z in zs {
                assert!(conic.eval(&Rp2Point::affine(z)).abs() < 1e-14);
            }
        }
        let (c, r) = circumcenter(zero, one, i).unwrap();
        assert_abs_diff_eq!((c - Complex64::new(0.5, 0.5)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.5f64.sqrt(), epsilon = 1e-15);
        let (c, r) = circumcenter(zero, 2.0 * one, one + i).unwrap();
        assert_abs_diff_eq!((c - one).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);
        assert!(matches!(
            circumcircle(zero, one, 2.0 * one),
            Err(AtlasError::CollinearPoints)
        ));
    }

    #[test]
    fn cubic_roots() {
        // (λ−1)(λ+2)(λ−3) = λ³ − 2λ² − 5λ + 6
        let r = solve_cubic(1.0, -2.0, -5.0, 6.0);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
        // (λ−2)(λ² + 1)
        let r = solve_cubic(1.0, -2.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0], 2.0, epsilon = 1e-13);
        // degree drop
        let r = solve_cubic(0.0, 1.0, -3.0, 2.0);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn conic_fit_recovers_ellipse() {
        // 2X² + XY + 3Y² − XW + 0.5YW − 4W² = 0 sampled exactly
        let truth = Conic::new([2.0, 1.0, 3.0, -1.0, 0.5, -4.0]).unwrap();
        let m = truth.matrix();
        let mut pts = Vec::new();
        for i in 0..12 {
            let t = i as f64 * 0.5;
            // intersect the conic with a line through the origin
            let dir = [t.cos(), t.sin(), 0.0];
            for p in line_conic_points(cross(dir, [0.0, 0.0, 1.0]), &m) {
                pts.push(Rp2Point::from_array(p).unwrap());
            }
        }
        let fit = fit_conic(&pts).unwrap();
        let err = fit
            .conic
            .coeffs()
            .iter()
            .zip(truth.coeffs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "coefficient error {err}");
        assert!(fit.max_residual < 1e-12);

        let few: Vec<Rp2Point> = pts[..5].to_vec();
        assert!(matches!(fit_conic(&few), Err(AtlasError::RankDeficient(_))));
    }

    #[test]
    fn conic_intersections() {
        // unit circle and the circle of radius 1 about 1: two points
        let c1 = Conic::new([1.0, 0.0, 1.0, 0.0, 0.0, -1.0]).unwrap();
        let c2 = Conic::new([1.0, 0.0, 1.0, -2.0, 0.0, 0.0]).unwrap();
        let pts = intersect_conics(&c1, &c2).unwrap();
        assert_eq!(pts.len(), 2);
        for p in &pts {
            assert!(c1.eval(p).abs() < 1e-8 && c2.eval(p).abs() < 1e-8);
            let z = p.to_affine().unwrap();
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-12);
        }
        // four real points: ellipse against hyperbola through (±1, ±1)
        let e = Conic::new([1.0, 0.0, 2.0, 0.0, 0.0, -3.0]).unwrap();
        let h = Conic::new([2.0, 0.0, -1.0, 0.0, 0.0, -1.0]).unwrap();
        let pts = intersect_conics(&e, &h).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            let z = p.to_affine().unwrap();
            assert_abs_diff_eq!(z.re.abs(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(z.im.abs(), 1.0, epsilon = 1e-12);
        }
        // disjoint circles
        let far = Conic::new([1.0, 0.0, 1.0, -10.0, 0.0, 24.0]).unwrap();
        assert!(intersect_conics(&c1, &far).unwrap().is_empty());
        assert!(matches!(
            intersect_conics(&c1, &c1),
            Err(AtlasError::IdenticalConics)
        ));
    }
}
