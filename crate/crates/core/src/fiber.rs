//! Fibers of the rolled coamoeba map B = 2Arg|_V over a single value
//! c = (l₀, l, l₁, l_a) ∈ (RP¹)⁴.
//!
//! The fiber is cut out by four real linear equations on w = (Re x, Im x,
//! Re y, Im y), one per coordinate line. A critical fiber is a real line of
//! "triangles" (x, x+y, x+ky); along it each coordinate zⱼ moves on its fixed
//! line lⱼ, so zⱼ = (affine real function of t)·eⱼ. The fiber circle is the
//! projective completion t ∈ RP¹, and the five marked points are the zeros of
//! those four functions together with t = ∞.
//!
//! Fiber positions are encoded as angles α ∈ [0, π) of the homogeneous pair
//! (cos α : sin α) = (t : 1); t = ∞ sits at α = 0.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covering::Section;
use crate::error::{AtlasError, Result};
use crate::linalg::{self, Svd};
use crate::plane::{ArgTuple, PlaneConfig, Tolerances, TorusPoint};
use crate::projective::{two_arg, Rp1Dir};

/// A point of (RP¹)⁴ together with a unit representative for each line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolledValue {
    reps: [Complex64; 4],
}

impl RolledValue {
    pub fn from_reps(reps: [Complex64; 4]) -> Result<Self> {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (o, r) in out.iter_mut().zip(reps) {
            let n = r.norm();
            if !(n > 1e-300) || !n.is_finite() {
                return Err(AtlasError::ZeroInput(n));
            }
            *o = r / n;
        }
        Ok(RolledValue { reps: out })
    }

    pub fn from_dirs(dirs: [Rp1Dir; 4]) -> Self {
        RolledValue {
            reps: dirs.map(|d| d.unit()),
        }
    }

    pub fn from_angles(angles: [f64; 4]) -> Self {
        RolledValue::from_dirs(angles.map(Rp1Dir::from_angle))
    }

    pub fn reps(&self) -> [Complex64; 4] {
        self.reps
    }

    pub fn dirs(&self) -> [Rp1Dir; 4] {
        self.reps.map(|r| two_arg(r).expect("unit representative"))
    }

    /// Angles in [0, π).
    pub fn angles(&self) -> [f64; 4] {
        self.dirs().map(|d| d.angle())
    }

    /// The same point of (RP¹)⁴ with representative `i` negated.
    pub fn flipped(&self, i: usize) -> Self {
        let mut reps = self.reps;
        reps[i] = -reps[i];
        RolledValue { reps }
    }

    /// Largest chordal distance between corresponding lines.
    pub fn distance(&self, other: &RolledValue) -> f64 {
        self.reps
            .iter()
            .zip(other.reps.iter())
            .map(|(a, b)| (a * b.conj()).im.abs())
            .fold(0.0, f64::max)
    }

    /// Whether l₀ = l = l₁ = R, the stratum with a positive-dimensional
    /// family of degenerate linkages.
    pub fn is_real_stratum(&self, tol: f64) -> bool {
        self.reps[..3].iter().all(|r| r.im.abs() < tol)
    }
}

impl Serialize for RolledValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.angles().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RolledValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let angles = <[f64; 4]>::deserialize(d)?;
        Ok(RolledValue::from_angles(angles))
    }
}

/// The real linear system A w = b whose solutions are the points of V with
/// each coordinate on its prescribed line (or zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSystem {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
}

pub fn fiber_system(cfg: &PlaneConfig, c: &RolledValue) -> FiberSystem {
    let [e0, e, e1, ea] = c.reps;
    let kc = cfg.k * ea.conj();
    #[rustfmt::skip]
    let a = Matrix4::new(
        -e0.im, e0.re, 0.0, 0.0,
        0.0, 0.0, -e.im, e.re,
        -e1.im, e1.re, -e1.im, e1.re,
        -ea.im, ea.re, kc.im, kc.re,
    );
    let b = Vector4::new(0.0, 0.0, -e1.im, (cfg.a * ea.conj()).im);
    FiberSystem { a, b }
}

impl FiberSystem {
    /// Residual ‖A w − b‖ at a point of V.
    pub fn residual(&self, pt: &TorusPoint) -> f64 {
        let w = Vector4::from(pt.to_real());
        (self.a * w - self.b).norm()
    }
}

/// An affine real function c0 + c1·t of the fiber parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFn {
    pub c0: f64,
    pub c1: f64,
}

impl AffineFn {
    /// Value at the homogeneous fiber position (cos α : sin α), scaled by
    /// sin α > 0; its sign is the sign of the function at t = cot α.
    pub fn eval_angle(&self, alpha: f64) -> f64 {
        self.c0 * alpha.sin() + self.c1 * alpha.cos()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c0 + self.c1 * t
    }

    /// Projective root [−c0 : c1] as a fiber angle.
    fn root_angle(&self) -> Result<f64> {
        Ok(Rp1Dir::new(-self.c0, self.c1)
            .map_err(|_| AtlasError::DegenerateFiber)?
            .angle())
    }
}

/// The critical fiber over c: the line w₀ + t·u in R⁴, the four coordinate
/// functions, and the marked points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberModel {
    pub value: RolledValue,
    pub w0: [f64; 4],
    pub u: [f64; 4],
    /// ξ, η, ζ, ω with zⱼ(t) = fnⱼ(t)·eⱼ
    pub coords: [AffineFn; 4],
    /// fiber angles of m₀, m_p, m₁, m_a, m_∞, indexed by [`Section`]
    pub marked: [f64; 5],
    pub real_stratum: bool,
}

// kept Copy; the critical fiber is small enough to move by value
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiberClassification {
    Regular { preimage: TorusPoint },
    NonValue,
    Critical { fiber: FiberModel },
}

impl FiberClassification {
    pub fn kind(&self) -> &'static str {
        match self {
            FiberClassification::Regular { .. } => "regular",
            FiberClassification::NonValue => "non-value",
            FiberClassification::Critical { .. } => "critical",
        }
    }
}

fn decompose(sys: &FiberSystem) -> Svd {
    linalg::svd(&DMatrix::from_fn(4, 4, |i, j| sys.a[(i, j)]))
}

/// Classifies c by the rank and consistency of its fiber system.
pub fn classify_value(cfg: &PlaneConfig, c: &RolledValue) -> FiberClassification {
    classify_with(cfg, c, &cfg.tol, None)
}

/// [`classify_value`] with explicit tolerances and an optional previous
/// kernel direction for sign continuity.
pub fn classify_with(
    cfg: &PlaneConfig,
    c: &RolledValue,
    tol: &Tolerances,
    prev_u: Option<&[f64; 4]>,
) -> FiberClassification {
    let sys = fiber_system(cfg, c);
    let dec = decompose(&sys);
    let rank = dec.rank(tol.rank_rtol);
    let b = DVector::from_column_slice(sys.b.as_slice());
    if rank == 4 {
        let w = dec.solve(&b, 4);
        let pt = TorusPoint::from_real([w[0], w[1], w[2], w[3]]);
        return if pt.check(cfg).is_ok() {
            FiberClassification::Regular { preimage: pt }
        } else {
            FiberClassification::NonValue
        };
    }
    // consistency of b against the leading left singular frame
    let mut proj = DVector::zeros(4);
    for i in 0..rank {
        let col = dec.u.column(i);
        proj += col * col.dot(&b);
    }
    let defect = (&b - proj).norm();
    if defect >= tol.consistency * (1.0 + b.norm()) {
        return FiberClassification::NonValue;
    }
    // rank < 3 is only reachable on the real stratum; the line through the
    // three leading directions is then one representative of the fiber
    match build_model(cfg, c, &dec, &b, prev_u) {
        Ok(mut fiber) => {
            fiber.real_stratum |= rank < 3;
            FiberClassification::Critical { fiber }
        }
        Err(_) => FiberClassification::NonValue,
    }
}

fn build_model(
    cfg: &PlaneConfig,
    c: &RolledValue,
    dec: &Svd,
    b: &DVector<f64>,
    prev_u: Option<&[f64; 4]>,
) -> Result<FiberModel> {
    let w0 = dec.solve(b, 3);
    let mut u = dec.right(3);
    let flip = match prev_u {
        Some(p) => u.dot(&DVector::from_column_slice(p)) < 0.0,
        None => {
            let lead = u.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
            lead < 0.0
        }
    };
    if flip {
        u = -u;
    }
    let w0a = [w0[0], w0[1], w0[2], w0[3]];
    let ua = [u[0], u[1], u[2], u[3]];
    let coords = coordinate_functions(cfg, c, &w0a, &ua);
    let mut marked = [0.0; 5];
    for (m, f) in marked.iter_mut().zip(coords.iter()) {
        *m = f.root_angle()?;
    }
    marked[Section::Inf.index()] = 0.0;
    Ok(FiberModel {
        value: *c,
        w0: w0a,
        u: ua,
        coords,
        marked,
        real_stratum: c.is_real_stratum(1e-12),
    })
}

/// Real coordinates Re(zⱼ ēⱼ) of the four torus coordinates along the fiber
/// line w0 + t·u; each vanishes exactly where its coordinate does.
fn coordinate_functions(
    cfg: &PlaneConfig,
    c: &RolledValue,
    w0: &[f64; 4],
    u: &[f64; 4],
) -> [AffineFn; 4] {
    let [e0, e, e1, ea] = c.reps;
    let x0 = Complex64::new(w0[0], w0[1]);
    let y0 = Complex64::new(w0[2], w0[3]);
    let dx = Complex64::new(u[0], u[1]);
    let dy = Complex64::new(u[2], u[3]);
    let k_ea = cfg.k * ea.conj();
    // x + k y − a projected on e_a; the shift −a enters the constant term only
    let a_term = |x: Complex64, y: Complex64, shift: Complex64| -> f64 {
        ((x - shift) * ea.conj()).re + (y * k_ea).re
    };
    let xi = AffineFn {
        c0: (x0 * e0.conj()).re,
        c1: (dx * e0.conj()).re,
    };
    let eta = AffineFn {
        c0: (y0 * e.conj()).re,
        c1: (dy * e.conj()).re,
    };
    let zeta = AffineFn {
        c0: ((x0 + y0 - 1.0) * e1.conj()).re,
        c1: ((dx + dy) * e1.conj()).re,
    };
    let omega = AffineFn {
        c0: a_term(x0, y0, cfg.a),
        c1: a_term(dx, dy, Complex64::new(0.0, 0.0)),
    };
    [xi, eta, zeta, omega]
}

impl FiberModel {
    /// Torus-chart point at fiber angle α ∈ (0, π).
    pub fn point_at(&self, alpha: f64) -> TorusPoint {
        let t = alpha.cos() / alpha.sin();
        self.point_at_t(t)
    }

    pub fn point_at_t(&self, t: f64) -> TorusPoint {
        TorusPoint::from_real(std::array::from_fn(|i| self.w0[i] + t * self.u[i]))
    }

    pub fn marked_angle(&self, s: Section) -> f64 {
        self.marked[s.index()]
    }

    /// Marked point as a fiber parameter (None for t = ∞).
    pub fn marked_t(&self, s: Section) -> Option<f64> {
        let a = self.marked_angle(s);
        (a != 0.0).then(|| a.cos() / a.sin())
    }

    /// Chordal distance on the fiber circle between two marked points.
    pub fn marked_gap(&self, s1: Section, s2: Section) -> f64 {
        (self.marked_angle(s1) - self.marked_angle(s2)).sin().abs()
    }

    /// Clusters of coinciding marked points, in increasing angle order.
    pub fn clusters(&self, tol: f64) -> Vec<Vec<Section>> {
        let mut order: Vec<Section> = Section::ALL.to_vec();
        order.sort_by(|a, b| {
            self.marked_angle(*a)
                .total_cmp(&self.marked_angle(*b))
                .then(a.index().cmp(&b.index()))
        });
        let mut clusters: Vec<Vec<Section>> = Vec::new();
        for s in order {
            match clusters.last_mut() {
                Some(last) if self.marked_gap(*last.last().unwrap(), s) < tol => last.push(s),
                _ => clusters.push(vec![s]),
            }
        }
        // wrap-around merge across α = 0 ≡ π
        if clusters.len() > 1 {
            let first = clusters[0][0];
            let last = *clusters.last().unwrap().last().unwrap();
            if self.marked_gap(first, last) < tol {
                let mut tail = clusters.pop().unwrap();
                tail.append(&mut clusters[0]);
                clusters[0] = tail;
            }
        }
        clusters
    }

    pub fn distinct_marked(&self, tol: f64) -> usize {
        self.clusters(tol).len()
    }

    /// Argument tuple of the coordinates at fiber angle α ∈ (0, π).
    pub fn label_at(&self, alpha: f64) -> ArgTuple {
        let reps = self.value.reps();
        ArgTuple::new(std::array::from_fn(|j| {
            let flip = if self.coords[j].eval_angle(alpha) < 0.0 {
                PI
            } else {
                0.0
            };
            reps[j].arg() + flip
        }))
    }
}

/// An open arc of the fiber circle between two consecutive marked clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberArc {
    /// sections bounding the arc at its start and end (in increasing angle)
    pub bounds: (Section, Section),
    pub start: f64,
    /// end angle, possibly beyond π when the arc wraps through α = 0
    pub end: f64,
    pub rep_angle: f64,
    pub label: ArgTuple,
}

impl FiberArc {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Whether fiber angle α lies in the open arc.
    pub fn contains(&self, alpha: f64) -> bool {
        let a = alpha.rem_euclid(PI);
        let a = if a < self.start { a + PI } else { a };
        a > self.start && a < self.end
    }
}

/// The critical fiber over c, or NotCritical.
pub fn fiber_model(cfg: &PlaneConfig, c: &RolledValue) -> Result<FiberModel> {
    match classify_value(cfg, c) {
        FiberClassification::Critical { fiber } => Ok(fiber),
        _ => Err(AtlasError::NotCritical),
    }
}

/// Arcs of the fiber circle minus its distinct marked points.
pub fn fiber_arcs(cfg: &PlaneConfig, c: &RolledValue) -> Result<Vec<FiberArc>> {
    Ok(model_arcs(&fiber_model(cfg, c)?, cfg.tol.coincidence))
}

pub fn model_arcs(model: &FiberModel, tol: f64) -> Vec<FiberArc> {
    let clusters = model.clusters(tol);
    let n = clusters.len();
    let angle = |s: Section| model.marked_angle(s);
    (0..n)
        .map(|i| {
            let lo = *clusters[i].last().unwrap();
            let hi = clusters[(i + 1) % n][0];
            let start = angle(lo);
            let mut end = angle(hi);
            if end <= start {
                end += PI;
            }
            let rep = (0.5 * (start + end)).rem_euclid(PI);
            FiberArc {
                bounds: (lo, hi),
                start,
                end,
                rep_angle: rep,
                label: model.label_at(rep),
            }
        })
        .collect()
}

/// The arc of the critical fiber whose argument label is `t_arg`: the fiber
/// of Z → C_Z over a point of the coamoeba's critical values.
pub fn coamoeba_fiber_interval(cfg: &PlaneConfig, t_arg: &ArgTuple, tol: f64) -> Result<FiberArc> {
    let c = t_arg.rolled();
    let model = match classify_value(cfg, &c) {
        FiberClassification::Critical { fiber } => fiber,
        FiberClassification::NonValue => return Err(AtlasError::NotAttained),
        FiberClassification::Regular { .. } => return Err(AtlasError::NotCritical),
    };
    let mut hits: Vec<FiberArc> = model_arcs(&model, cfg.tol.coincidence)
        .into_iter()
        .filter(|arc| arc.label.distance(t_arg) < tol)
        .collect();
    match hits.len() {
        0 => Err(AtlasError::NotAttained),
        1 => Ok(hits.pop().unwrap()),
        n => Err(AtlasError::MultipleArcs(n)),
    }
}

/// The unique point of V^× with 2Arg = c.
pub fn invert_regular(cfg: &PlaneConfig, c: &RolledValue) -> Result<TorusPoint> {
    match classify_value(cfg, c) {
        FiberClassification::Regular { preimage } => Ok(preimage),
        _ => Err(AtlasError::NotRegular),
    }
}

/// The 16 argument tuples lying over c, indexed by the bit pattern of the
/// π-shifts.
pub fn lifts(c: &RolledValue) -> [ArgTuple; 16] {
    let reps = c.reps();
    std::array::from_fn(|bits| {
        ArgTuple::new(std::array::from_fn(|j| {
            reps[j].arg() + if bits >> j & 1 == 1 { PI } else { 0.0 }
        }))
    })
}

/// Whether some point of V^× has argument tuple exactly `lift`.
pub fn lift_attained(cfg: &PlaneConfig, lift: &ArgTuple) -> Result<bool> {
    let c = lift.rolled();
    match classify_value(cfg, &c) {
        FiberClassification::Regular { preimage } => {
            let z = preimage.coords(cfg);
            // zⱼ lies on the line of e^{iθⱼ}; attained iff on the positive ray
            Ok(z.iter()
                .zip(lift.0.iter())
                .all(|(zj, th)| (zj * Complex64::from_polar(1.0, -th)).re > 0.0))
        }
        FiberClassification::NonValue => Ok(false),
        FiberClassification::Critical { .. } => {
            match coamoeba_fiber_interval(cfg, lift, 1e-9) {
                Ok(_) => Ok(true),
                Err(AtlasError::NotAttained) => Ok(false),
                Err(e) => Err(e),
            }
        }
    }
}

/// The locus λ(l₀, l, l₁) of values x + k·y over linkages with x ∈ l₀,
/// x + y ∈ l₁ + 1 and (x + y) − x = y ∈ l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaLocus {
    EmptyLocus,
    PointLocus(Complex64),
    LineLocus { point: Complex64, dir: Complex64 },
    /// l₀ = l = l₁ = R: every real x, y is allowed and x + ky fills C.
    WholePlane,
}

/// Affine parametrization z(h) = z0 + h·dz over the lines L = {Im(z ē) = h}
/// parallel to l, valid when l differs from both l₀ and l₁.
fn lambda_param(
    cfg: &PlaneConfig,
    e0: Complex64,
    e: Complex64,
    e1: Complex64,
) -> ((Complex64, Complex64), (Complex64, Complex64)) {
    let k = cfg.k;
    let g0 = (e0 * e.conj()).im;
    let g1 = (e1 * e.conj()).im;
    // x(h) = h e₀ / g0, (x+y)(h) = 1 + (h − Im ē) e₁ / g1
    let x = (Complex64::new(0.0, 0.0), e0 / g0);
    let s = (1.0 - e.conj().im * e1 / g1, e1 / g1);
    let z0 = (1.0 - k) * x.0 + k * s.0;
    let dz = (1.0 - k) * x.1 + k * s.1;
    ((z0, dz), (x.1, s.0 - x.0))
}

pub fn lambda_locus(cfg: &PlaneConfig, l0: Rp1Dir, l: Rp1Dir, l1: Rp1Dir) -> LambdaLocus {
    const EPS: f64 = 1e-12;
    let (e0, e, e1) = (l0.unit(), l.unit(), l1.unit());
    let k = cfg.k;
    let one = Complex64::new(1.0, 0.0);
    let par0 = (e0 * e.conj()).im.abs() < EPS;
    let par1 = (e1 * e.conj()).im.abs() < EPS;
    match (par0, par1) {
        (true, true) => {
            if e.im.abs() < EPS {
                LambdaLocus::WholePlane
            } else {
                LambdaLocus::EmptyLocus
            }
        }
        (true, false) => {
            // L = l₀, x free on l₀, x + y pinned at l₀ ∩ (l₁ + 1)
            let p = line_meet(Complex64::new(0.0, 0.0), e0, one, e1);
            LambdaLocus::LineLocus {
                point: k * p,
                dir: unit((1.0 - k) * e0),
            }
        }
        (false, true) => {
            // L = l₁ + 1, x pinned at l₀ ∩ (l₁ + 1), x + y free on l₁ + 1
            let p = line_meet(Complex64::new(0.0, 0.0), e0, one, e1);
            LambdaLocus::LineLocus {
                point: p,
                dir: unit(k * e1),
            }
        }
        (false, false) => {
            let ((z0, dz), _) = lambda_param(cfg, e0, e, e1);
            if dz.norm() < 1e-9 * (1.0 + z0.norm()) {
                LambdaLocus::PointLocus(z0)
            } else {
                LambdaLocus::LineLocus {
                    point: z0,
                    dir: unit(dz),
                }
            }
        }
    }
}

fn unit(z: Complex64) -> Complex64 {
    z / z.norm()
}

// Intersection of p + s·u and q + r·v (non-parallel).
fn line_meet(p: Complex64, u: Complex64, q: Complex64, v: Complex64) -> Complex64 {
    let s = ((q - p) * v.conj()).im / (u * v.conj()).im;
    p + s * u
}

/// Inversion by the geometric construction: intersect λ(l₀, l, l₁) with
/// l_a + a to find z = x + ky, then read off the linkage. Defined for
/// regular values with l ∉ {l₀, l₁}.
pub fn invert_via_lambda(cfg: &PlaneConfig, c: &RolledValue) -> Result<TorusPoint> {
    let [e0, e, e1, ea] = c.reps();
    let g0 = (e0 * e.conj()).im;
    let g1 = (e1 * e.conj()).im;
    if g0.abs() < 1e-12 || g1.abs() < 1e-12 {
        return Err(AtlasError::NotGeneric("l coincides with l₀ or l₁".into()));
    }
    let ((z0, dz), (dx, s0)) = lambda_param(cfg, e0, e, e1);
    if (dz * ea.conj()).im.abs() < 1e-12 * dz.norm() {
        return Err(AtlasError::NotRegular);
    }
    // z0 + h dz ∈ a + R e_a
    let h = ((cfg.a - z0) * ea.conj()).im / (dz * ea.conj()).im;
    let x = h * dx;
    let sum = s0 + h * e1 / g1;
    let pt = TorusPoint {
        x,
        y: sum - x,
    };
    pt.check(cfg)?;
    Ok(pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::{maps, random_torus_points};
    use std::f64::consts::FRAC_PI_4;

    fn cfg() -> PlaneConfig {
        PlaneConfig::default()
    }

    fn b_of(c: &PlaneConfig, x: Complex64, y: Complex64) -> RolledValue {
        maps(c, &TorusPoint::new(c, x, y).unwrap()).unwrap().rolled
    }

    #[test]
    fn each_marked_point_zeroes_its_coordinate() {
        let c = cfg();
        let pts = crate::plane::sample_critical_points(&c, 20, 11).unwrap();
        for pt in pts {
            let fiber = fiber_model(&c, &maps(&c, &pt).unwrap().rolled).unwrap();
            let w = |t: f64| -> [Complex64; 4] {
                let r: [f64; 4] = std::array::from_fn(|i| fiber.w0[i] + t * fiber.u[i]);
                let (x, y) = (Complex64::new(r[0], r[1]), Complex64::new(r[2], r[3]));
                [x, y, x + y - 1.0, x + c.k * y - c.a]
            };
            for j in 0..4 {
                let m = fiber.marked[j];
                // the homogeneous root (cos m : sin m); use whichever chart is bounded
                let z = if m.sin().abs() > 1e-3 {
                    w(m.cos() / m.sin())[j]
                } else {
                    continue;
                };
                let scale = 1.0 + fiber.u.iter().map(|v| v.abs()).sum::<f64>() / m.sin().abs();
                assert!(z.norm() < 1e-9 * scale, "coordinate {j}: {z}");
            }
        }
    }

    #[test]
    fn system_rows_for_real_directions() {
        let c = cfg();
        let sys = fiber_system(&c, &RolledValue::from_angles([0.0; 4]));
        assert_eq!(sys.b[0], 0.0);
        assert_eq!(sys.b[1], 0.0);
        assert_eq!(sys.b[2], 0.0);
        assert_eq!(sys.b[3], c.a.im);
        // rows 1–3 read off imaginary parts
        assert_eq!(sys.a.row(0).iter().copied().collect::<Vec<_>>(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(sys.a.row(1).iter().copied().collect::<Vec<_>>(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(sys.a.row(2).iter().copied().collect::<Vec<_>>(), [0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn forward_point_satisfies_system() {
        let c = cfg();
        let x = Complex64::new(1.0, 1.0);
        let y = Complex64::new(2.0, -1.0);
        let val = b_of(&c, x, y);
        let sys = fiber_system(&c, &val);
        assert!(sys.residual(&TorusPoint { x, y }) < 1e-12);
    }

    #[test]
    fn sign_flip_negates_row_and_rhs() {
        let c = cfg();
        let val = b_of(&c, Complex64::new(1.0, 1.0), Complex64::new(2.0, -1.0));
        let s1 = fiber_system(&c, &val);
        let s2 = fiber_system(&c, &val.flipped(2));
        for j in 0..4 {
            assert_eq!(s1.a[(2, j)], -s2.a[(2, j)]);
        }
        assert_eq!(s1.b[2], -s2.b[2]);
        let p1 = invert_regular(&c, &val).unwrap();
        let p2 = invert_regular(&c, &val.flipped(2)).unwrap();
        assert!((p1.x - p2.x).norm() < 1e-12 && (p1.y - p2.y).norm() < 1e-12);
    }

    #[test]
    fn equal_nonreal_directions_are_not_values() {
        let c = cfg();
        for la in [0.0, 0.7, 2.0] {
            let v = RolledValue::from_angles([FRAC_PI_4, FRAC_PI_4, FRAC_PI_4, la]);
            assert_eq!(classify_value(&c, &v), FiberClassification::NonValue);
        }
    }

    #[test]
    fn real_stratum_is_critical() {
        let c = cfg();
        for la in [0.3, 1.0, 2.5] {
            let v = RolledValue::from_angles([0.0, 0.0, 0.0, la]);
            match classify_value(&c, &v) {
                FiberClassification::Critical { fiber } => assert!(fiber.real_stratum),
                other => panic!("expected critical, got {other:?}"),
            }
        }
    }

    #[test]
    fn regular_roundtrip() {
        let c = cfg();
        let x = Complex64::new(1.0, 1.0);
        let y = Complex64::new(2.0, -1.0);
        let back = invert_regular(&c, &b_of(&c, x, y)).unwrap();
        assert!((back.x - x).norm() < 1e-12 && (back.y - y).norm() < 1e-12);
        for pt in random_torus_points(&c, 200, 11) {
            let v = maps(&c, &pt).unwrap().rolled;
            let back = invert_regular(&c, &v).unwrap();
            let again = maps(&c, &back).unwrap().rolled;
            assert!(again.distance(&v) < 1e-9);
            let geo = invert_via_lambda(&c, &v).unwrap();
            assert!((geo.x - back.x).norm() + (geo.y - back.y).norm() < 1e-8);
        }
    }

    #[test]
    fn lambda_cases() {
        let c = cfg();
        let t = Rp1Dir::from_angle(std::f64::consts::FRAC_PI_3);
        assert_eq!(lambda_locus(&c, t, t, t), LambdaLocus::EmptyLocus);
        let r = Rp1Dir::real_axis();
        assert_eq!(lambda_locus(&c, r, r, r), LambdaLocus::WholePlane);

        // generic: three values of z(h) are collinear
        let (l0, l, l1) = (
            Rp1Dir::from_angle(0.3),
            Rp1Dir::from_angle(1.1),
            Rp1Dir::from_angle(2.0),
        );
        let LambdaLocus::LineLocus { point, dir } = lambda_locus(&c, l0, l, l1) else {
            panic!("expected a line");
        };
        let ((z0, dz), _) = lambda_param(&c, l0.unit(), l.unit(), l1.unit());
        for h in [-2.0, 0.5, 3.7] {
            let z = z0 + h * dz;
            assert!(((z - point) * dir.conj()).im.abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_point_locus_on_circumcircle() {
        let c = cfg();
        let (center, radius) = crate::projective::circumcenter(0.0.into(), 1.0.into(), c.k).unwrap();
        for theta in [0.4, 1.9, 4.0] {
            let p = center + Complex64::from_polar(radius, theta);
            let l0 = two_arg(p).unwrap();
            let l1 = two_arg(p - 1.0).unwrap();
            let l = two_arg(p / c.k).unwrap();
            match lambda_locus(&c, l0, l, l1) {
                LambdaLocus::PointLocus(q) => assert!((q - p).norm() < 1e-9),
                other => panic!("expected point locus, got {other:?}"),
            }
            // any other direction gives a line through p
            let other = Rp1Dir::from_angle(l.angle() + 0.5);
            match lambda_locus(&c, l0, other, l1) {
                LambdaLocus::LineLocus { point, dir } => {
                    assert!(((p - point) * dir.conj()).im.abs() < 1e-9)
                }
                o => panic!("expected line, got {o:?}"),
            }
        }
    }

    #[test]
    fn lifts_of_forward_value() {
        let c = cfg();
        let x = Complex64::new(1.0, 1.0);
        let y = Complex64::new(2.0, -1.0);
        let pt = TorusPoint { x, y };
        let m = maps(&c, &pt).unwrap();
        let attained: Vec<ArgTuple> = lifts(&m.rolled)
            .into_iter()
            .filter(|l| lift_attained(&c, l).unwrap())
            .collect();
        assert_eq!(attained.len(), 1);
        assert!(attained[0].distance(&m.arg) < 1e-12);
        let mut flipped = m.arg;
        flipped.0[0] += PI;
        assert!(!lift_attained(&c, &ArgTuple::new(flipped.0)).unwrap());
    }
}
