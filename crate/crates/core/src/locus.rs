//! The global model of the critical values B_Z of the rolled coamoeba map.
//!
//! A critical value c = (l₀, l, l₁, l_a) has concurrent lines l₀, l₁ + 1,
//! l_a + a, meeting at p = φ(c) ∈ RP². Conversely, for affine p the critical
//! fiber over p is the family of triangles with vertices x, x + y, x + ky on
//! those three lines, all homothetic with center p:
//!
//! x = p(1 + τs₀),  x + y = p + τs₁(p − 1),  x + ky = p + τs_a(p − a),
//!
//! where the real weights (s₀ : s₁ : s_a) solve
//! s₀·p(k − 1) − k·s₁·(p − 1) + s_a·(p − a) = 0. The remaining line l is the
//! direction of y = τ(s₁(p − 1) − s₀p). In homogeneous coordinates (P, W) with
//! p = P/W this direction is Ŷ = L·P − s₁ with L = Im(kP̄ + āP − kāW), which is
//! quadratic, so each level set C_l = {Im(Ŷ·ē_l) = 0} is a conic. All C_l pass
//! through 0, 1, a and the point d where the weight system drops to rank 1.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::fiber::{fiber_system, RolledValue};
use crate::linalg;
use crate::plane::PlaneConfig;
use crate::projective::{
    circumcenter, concurrency_point, fit_conic, intersect_conics, two_arg, Conic, ConicFit,
    ProjLine, Rp1Dir, Rp2Point,
};

/// Exclusion radius around base points in the affine chart.
pub const BASE_EPS: f64 = 1e-4;
/// Affine points beyond this modulus are evaluated in homogeneous form.
const FAR: f64 = 1e6;
/// Marching-squares resolution for conic tracing.
pub const CONIC_GRID: usize = 801;

/// Plane parameters together with the fourth base point d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atlas {
    pub cfg: PlaneConfig,
    pub d: Complex64,
}

impl Atlas {
    pub fn new(cfg: PlaneConfig) -> Result<Self> {
        let d = point_d_direct(&cfg)?;
        Ok(Atlas { cfg, d })
    }

    pub fn base_point(&self, q: BasePoint) -> Complex64 {
        match q {
            BasePoint::Zero => Complex64::new(0.0, 0.0),
            BasePoint::One => Complex64::new(1.0, 0.0),
            BasePoint::A => self.cfg.a,
            BasePoint::D => self.d,
        }
    }

    pub fn base_points(&self) -> [Complex64; 4] {
        BasePoint::ALL.map(|q| self.base_point(q))
    }

    /// The base point within `radius` of z, if any.
    pub fn near_base(&self, z: Complex64, radius: f64) -> Option<BasePoint> {
        BasePoint::ALL
            .into_iter()
            .find(|&q| (z - self.base_point(q)).norm() < radius)
    }
}

/// The four points blown up in RP² to obtain B_Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasePoint {
    Zero,
    One,
    A,
    D,
}

impl BasePoint {
    pub const ALL: [BasePoint; 4] = [BasePoint::Zero, BasePoint::One, BasePoint::A, BasePoint::D];

    pub fn name(self) -> &'static str {
        match self {
            BasePoint::Zero => "0",
            BasePoint::One => "1",
            BasePoint::A => "a",
            BasePoint::D => "d",
        }
    }
}

/// Coefficients (p(k − 1), −k(p − 1), p − a) of the weight relation, in
/// homogeneous form.
fn weight_row(cfg: &PlaneConfig, pc: Complex64, w: f64) -> [Complex64; 3] {
    let k = cfg.k;
    [pc * (k - 1.0), -k * (pc - w), pc - cfg.a * w]
}

/// Re v × Im v: the (unnormalized) weight vector.
fn weight_cross(v: &[Complex64; 3]) -> [f64; 3] {
    [
        (v[1].conj() * v[2]).im,
        (v[2].conj() * v[0]).im,
        (v[0].conj() * v[1]).im,
    ]
}

/// Homothety weights (s₀ : s₁ : s_a), unit-normalized with canonical sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomothetyWeights {
    pub s: [f64; 3],
}

impl HomothetyWeights {
    /// |s₀·p(k−1) − k·s₁·(p−1) + s_a·(p−a)| at affine p.
    pub fn relation_residual(&self, cfg: &PlaneConfig, p: Complex64) -> f64 {
        let v = weight_row(cfg, p, 1.0);
        (self.s[0] * v[0] + self.s[1] * v[1] + self.s[2] * v[2]).norm()
    }

    /// Homothety parameters τ of the degenerate triangles x = 0, x + y = 1,
    /// x + ky = a (None where the weight vanishes).
    pub fn marked_tau(&self) -> [Option<f64>; 3] {
        self.s.map(|s| (s != 0.0).then(|| -1.0 / s))
    }
}

pub fn homothety_weights(atlas: &Atlas, p: &Rp2Point) -> Result<HomothetyWeights> {
    let cfg = &atlas.cfg;
    let z = p
        .to_affine()
        .ok_or_else(|| AtlasError::NotGeneric("weights need an affine point".into()))?;
    for q in [BasePoint::Zero, BasePoint::One, BasePoint::A] {
        if (z - atlas.base_point(q)).norm() < BASE_EPS {
            return Err(AtlasError::NearBasePoint(q.name()));
        }
    }
    let v = weight_row(cfg, z, 1.0);
    let s = weight_cross(&v);
    let scale = v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-10 * scale {
        return Err(AtlasError::RankDeficient(format!(
            "weight system at p = {z} has rank 1"
        )));
    }
    let p3 = Rp2Point::new(s[0], s[1], s[2])?;
    Ok(HomothetyWeights { s: p3.coords() })
}

/// Ŷ(P, W) = L·P − s₁, the y-direction of the critical fiber over (P : W).
fn y_direction(cfg: &PlaneConfig, pc: Complex64, w: f64) -> Complex64 {
    let (a, k) = (cfg.a, cfg.k);
    let v = weight_row(cfg, pc, w);
    let s1 = (v[2].conj() * v[0]).im;
    let l = (k * pc.conj() + a.conj() * pc - k * a.conj() * w).im;
    l * pc - s1
}

/// Critical value over (P : W) without base-point guards. Errors with
/// ZeroInput exactly at base points, where some direction is undefined.
pub(crate) fn rolled_value_hom(cfg: &PlaneConfig, pc: Complex64, w: f64) -> Result<RolledValue> {
    let n = (pc.norm_sqr() + w * w).sqrt();
    let (pc, w) = (pc / n, w / n);
    RolledValue::from_reps([pc, y_direction(cfg, pc, w), pc - w, pc - cfg.a * w])
}

pub(crate) fn rolled_value_at(cfg: &PlaneConfig, p: &Rp2Point) -> Result<RolledValue> {
    let [x, y, w] = p.coords();
    rolled_value_hom(cfg, Complex64::new(x, y), w)
}

/// The critical value whose concurrency point is p, for p off the base
/// points.
pub fn critical_value_from_p(atlas: &Atlas, p: &Rp2Point) -> Result<RolledValue> {
    let cfg = &atlas.cfg;
    let Some(z) = p.to_affine().filter(|_| !p.is_at_infinity(1e-15)) else {
        let e = p.direction()?.unit();
        let delta = -((cfg.k - cfg.a) * e.conj()).im / cfg.k.im;
        return RolledValue::from_reps([e, 1.0 + delta * e, e, e]);
    };
    if z.norm() > FAR {
        return rolled_value_at(cfg, p);
    }
    if let Some(q) = atlas.near_base(z, BASE_EPS) {
        return Err(AtlasError::BasePointIndeterminate(q.name()));
    }
    let wts = homothety_weights(atlas, p)?;
    let [s0, s1, _] = wts.s;
    Ok(RolledValue::from_dirs([
        two_arg(z)?,
        two_arg(s1 * (z - 1.0) - s0 * z)?,
        two_arg(z - 1.0)?,
        two_arg(z - cfg.a)?,
    ]))
}

/// Smallest-to-largest singular value ratio of the fiber system of c.
pub fn fiber_rank_defect(cfg: &PlaneConfig, c: &RolledValue) -> f64 {
    let sys = fiber_system(cfg, c);
    let s = linalg::singular_values(&DMatrix::from_fn(4, 4, |i, j| sys.a[(i, j)]));
    s[3] / s[0]
}

/// Concurrency point of closure(l₀), closure(l₁ + 1), closure(l_a + a).
pub fn phi(cfg: &PlaneConfig, c: &RolledValue) -> Result<Rp2Point> {
    phi_with_tol(cfg, c, 1e-6)
}

pub fn phi_with_tol(cfg: &PlaneConfig, c: &RolledValue, tol: f64) -> Result<Rp2Point> {
    if fiber_rank_defect(cfg, c) > 1e-6 {
        return Err(AtlasError::NotCritical);
    }
    let [l0, l1, la] = phi_lines(cfg, c)?;
    concurrency_point(&l0, &l1, &la, tol)
}

/// The three lines whose concurrency characterizes criticality.
pub fn phi_lines(cfg: &PlaneConfig, c: &RolledValue) -> Result<[ProjLine; 3]> {
    let [e0, _, e1, ea] = c.reps();
    Ok([
        ProjLine::through_with_direction(Complex64::new(0.0, 0.0), e0)?,
        ProjLine::through_with_direction(Complex64::new(1.0, 0.0), e1)?,
        ProjLine::through_with_direction(cfg.a, ea)?,
    ])
}

/// Solves the real 2×2 system α·u + β·v = rhs for complex u, v.
fn solve_complex_pair(u: Complex64, v: Complex64, rhs: Complex64) -> Result<(f64, f64)> {
    let m = Matrix2::new(u.re, v.re, u.im, v.im);
    let x = m
        .try_inverse()
        .ok_or_else(|| AtlasError::RankDeficient("exceptional chart system".into()))?
        * Vector2::new(rhs.re, rhs.im);
    Ok((x[0], x[1]))
}

/// Orthonormal basis (n₁, n₂) of the weight kernel at d, the complex factor
/// ω with v(d) = ω·r, and κ = dv/dp.
struct DChart {
    n1: [f64; 3],
    n2: [f64; 3],
    omega: Complex64,
    kappa: [Complex64; 3],
}

fn d_chart(atlas: &Atlas) -> DChart {
    let cfg = &atlas.cfg;
    let v = weight_row(cfg, atlas.d, 1.0);
    // v(d) is a complex multiple of a real vector: take ω from the largest entry
    let i = (0..3).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap();
    let omega = v[i] / v[i].norm();
    let r: [f64; 3] = std::array::from_fn(|j| (v[j] * omega.conj()).re);
    let rn = Vector3::from(r).normalize();
    let helper = if rn[0].abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let n1 = rn.cross(&helper).normalize();
    let n2 = rn.cross(&n1).normalize();
    DChart {
        n1: [n1[0], n1[1], n1[2]],
        n2: [n2[0], n2[1], n2[2]],
        omega,
        kappa: [cfg.k - 1.0, -cfg.k, Complex64::new(1.0, 0.0)],
    }
}

impl DChart {
    fn weights(&self, psi: f64) -> [f64; 3] {
        let (c, s) = (psi.cos(), psi.sin());
        std::array::from_fn(|j| c * self.n1[j] + s * self.n2[j])
    }

    /// Approach direction u at d whose first-order weights are s(ψ).
    fn approach(&self, psi: f64) -> Complex64 {
        let s = self.weights(psi);
        let ks: Complex64 = (0..3).map(|j| self.kappa[j] * s[j]).sum();
        let u = self.omega * ks.conj();
        u / u.norm()
    }
}

/// Approach direction at q corresponding to the exceptional parameter ψ.
pub fn exceptional_approach(atlas: &Atlas, q: BasePoint, psi: Rp1Dir) -> Complex64 {
    match q {
        BasePoint::D => d_chart(atlas).approach(psi.angle()),
        _ => psi.unit(),
    }
}

fn exceptional_formula(atlas: &Atlas, q: BasePoint, psi: f64) -> Result<RolledValue> {
    let (a, k) = (atlas.cfg.a, atlas.cfg.k);
    let u = Complex64::from_polar(1.0, psi);
    let one = Complex64::new(1.0, 0.0);
    match q {
        BasePoint::Zero => {
            // k·s₁ − a·s_a = −u(k − 1)
            let (s1, _) = solve_complex_pair(k, -a, -u * (k - 1.0))?;
            RolledValue::from_reps([u, -(s1 + u), one, a])
        }
        BasePoint::One => {
            // s₀(k − 1) + s_a(1 − a) = k·u
            let (s0, _) = solve_complex_pair(k - 1.0, one - a, k * u)?;
            RolledValue::from_reps([one, u - s0, u, one - a])
        }
        BasePoint::A => {
            // s₀·a(k − 1) − k·s₁(a − 1) = −u
            let (s0, s1) = solve_complex_pair(a * (k - 1.0), -k * (a - 1.0), -u)?;
            RolledValue::from_reps([a, s1 * (a - 1.0) - s0 * a, a - 1.0, u])
        }
        BasePoint::D => {
            let d = atlas.d;
            let s = d_chart(atlas).weights(psi);
            RolledValue::from_reps([d, s[1] * (d - 1.0) - s[0] * d, d - 1.0, d - a])
        }
    }
}

/// Point ψ of the exceptional circle over the base point q.
pub fn exceptional_value(atlas: &Atlas, q: BasePoint, psi: Rp1Dir) -> Result<RolledValue> {
    let value = exceptional_formula(atlas, q, psi.angle())?;
    let u = exceptional_approach(atlas, q, psi);
    let center = atlas.base_point(q);
    let mut gap: f64 = 0.0;
    for eps in [1e-5, 1e-6] {
        let p = Rp2Point::affine(center + eps * u);
        let near = rolled_value_at(&atlas.cfg, &p)?;
        gap = gap.max(near.distance(&value));
    }
    if gap > 1e-4 {
        return Err(AtlasError::LimitInconsistent { q: q.name(), gap });
    }
    Ok(value)
}

/// sin 2Δ, with Δ the angle from l to l(p), and cos 2Δ.
fn angle_defect(cfg: &PlaneConfig, p: &Rp2Point, el: Complex64) -> Option<(f64, f64)> {
    let [x, y, w] = p.coords();
    let yd = y_direction(cfg, Complex64::new(x, y), w);
    let n = yd.norm_sqr();
    if !(n > 1e-280) {
        return None;
    }
    let r = yd * el.conj();
    let r2 = r * r / n;
    Some((r2.im, r2.re))
}

fn affine_defect(cfg: &PlaneConfig, z: Complex64, el: Complex64) -> f64 {
    angle_defect(cfg, &Rp2Point::affine(z), el).map_or(f64::NAN, |(s, _)| s)
}

/// Bisection for a sign change of f on [0, 1]; returns the root parameter.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Points of the level set {l(p) = l} on the edges of a square grid over
/// [−R, R]², plus its points on the line at infinity.
pub fn level_set_points(atlas: &Atlas, l: Rp1Dir, grid: usize) -> Vec<Rp2Point> {
    let cfg = &atlas.cfg;
    let el = l.unit();
    let r = cfg.box_radius();
    let h = 2.0 * r / (grid - 1) as f64;
    let node = |i: usize, j: usize| Complex64::new(-r + i as f64 * h, -r + j as f64 * h);
    let values: Vec<Vec<f64>> = (0..grid)
        .into_par_iter()
        .map(|j| (0..grid).map(|i| affine_defect(cfg, node(i, j), el)).collect())
        .collect();
    let exclusion = 4.0 * h;
    let mut pts: Vec<Rp2Point> = (0..grid)
        .into_par_iter()
        .flat_map_iter(|j| {
            let values = &values;
            let mut out = Vec::new();
            for i in 0..grid {
                let f0 = values[j][i];
                let mut edges = Vec::with_capacity(2);
                if i + 1 < grid {
                    edges.push((node(i + 1, j), values[j][i + 1]));
                }
                if j + 1 < grid {
                    edges.push((node(i, j + 1), values[j + 1][i]));
                }
                for (z1, f1) in edges {
                    if !(f0 * f1 < 0.0) {
                        continue;
                    }
                    let z0 = node(i, j);
                    let t = bisect(|t| affine_defect(cfg, z0 + t * (z1 - z0), el), 0.0, 1.0);
                    let z = z0 + t * (z1 - z0);
                    if atlas.near_base(z, exclusion).is_some() {
                        continue;
                    }
                    match angle_defect(cfg, &Rp2Point::affine(z), el) {
                        Some((s, c)) if c > 0.0 && s.abs() < 1e-9 => {
                            out.push(Rp2Point::affine(z))
                        }
                        _ => {}
                    }
                }
            }
            out
        })
        .collect();
    // on W = 0 the defect is a function of the direction angle alone
    let n = 3600;
    let at_inf = |th: f64| angle_defect(cfg, &Rp2Point::at_infinity(th), el);
    for i in 0..n {
        let (t0, t1) = (PI * i as f64 / n as f64, PI * (i + 1) as f64 / n as f64);
        let (Some((f0, _)), Some((f1, _))) = (at_inf(t0), at_inf(t1)) else {
            continue;
        };
        if f0 * f1 < 0.0 {
            let th = bisect(|t| at_inf(t).map_or(f64::NAN, |v| v.0), t0, t1);
            if let Some((s, c)) = at_inf(th) {
                if c > 0.0 && s.abs() < 1e-9 {
                    pts.push(Rp2Point::at_infinity(th));
                }
            }
        }
    }
    pts
}

/// Conic fitted to the traced level set {p : l(p) = l}.
pub fn conic_for_l(atlas: &Atlas, l: Rp1Dir) -> Result<ConicFit> {
    conic_for_l_grid(atlas, l, CONIC_GRID)
}

pub fn conic_for_l_grid(atlas: &Atlas, l: Rp1Dir, grid: usize) -> Result<ConicFit> {
    let pts = level_set_points(atlas, l, grid);
    if pts.len() < 12 {
        return Err(AtlasError::TraceFailed(format!(
            "{} level-set points for l = {:.6}",
            pts.len(),
            l.angle()
        )));
    }
    fit_conic(&pts)
}

/// Normalized evaluation |Q(p)| with Q and p unit-normalized.
pub fn conic_residual(q: &Conic, z: Complex64) -> f64 {
    q.eval(&Rp2Point::affine(z)).abs()
}

/// The pencil of conics {C_l} and its consistency data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilModel {
    pub basis: [Conic; 2],
    /// singular values of the stacked, normalized coefficient rows
    pub singular_values: Vec<f64>,
    pub sigma_ratio: f64,
    /// (angle of l, coordinates of C_l in the basis)
    pub samples: Vec<(f64, [f64; 2])>,
    pub max_fit_residual: f64,
    /// largest |C_l(q)| over sampled l and q ∈ {0, 1, a, d}
    pub max_base_residual: f64,
    pub base_points: Vec<Complex64>,
    /// distances from 0, 1, a, d to the nearest computed base point
    pub base_match: [f64; 4],
    pub cross_ratio_error: f64,
}

fn cross_ratio(p: [[f64; 2]; 4]) -> f64 {
    let d = |i: usize, j: usize| p[i][0] * p[j][1] - p[j][0] * p[i][1];
    (d(0, 2) * d(1, 3)) / (d(0, 3) * d(1, 2))
}

pub fn pencil_model(atlas: &Atlas, sample_count: usize) -> Result<PencilModel> {
    pencil_model_grid(atlas, sample_count, CONIC_GRID)
}

pub fn pencil_model_grid(atlas: &Atlas, sample_count: usize, grid: usize) -> Result<PencilModel> {
    let angles: Vec<f64> = (0..sample_count)
        .map(|i| PI * (i as f64 + 0.5) / sample_count as f64)
        .collect();
    let fits = angles
        .iter()
        .map(|&t| conic_for_l_grid(atlas, Rp1Dir::from_angle(t), grid))
        .collect::<Result<Vec<_>>>()?;
    let m = DMatrix::from_fn(sample_count, 6, |i, j| fits[i].conic.coeffs()[j]);
    let svd = linalg::svd(&m);
    let sv = svd.s.clone();
    let ratio = sv.get(2).copied().unwrap_or(0.0) / sv[0];
    if !(ratio < 1e-8) {
        return Err(AtlasError::NotAPencil(ratio));
    }
    let basis_row = |r: usize| -> Result<Conic> {
        Conic::new(std::array::from_fn(|j| svd.v_t[(r, j)]))
    };
    let basis = [basis_row(0)?, basis_row(1)?];
    let samples: Vec<(f64, [f64; 2])> = angles
        .iter()
        .zip(fits.iter())
        .map(|(&t, f)| {
            let c = f.conic.coeffs();
            let coord = |q: &Conic| q.coeffs().iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            (t, [coord(&basis[0]), coord(&basis[1])])
        })
        .collect();
    let base_points: Vec<Complex64> = intersect_conics(&basis[0], &basis[1])?
        .iter()
        .filter_map(|p| p.to_affine())
        .collect();
    let base_match = atlas.base_points().map(|q| {
        base_points
            .iter()
            .map(|b| (b - q).norm())
            .fold(f64::INFINITY, f64::min)
    });
    let max_fit_residual = fits.iter().map(|f| f.max_residual).fold(0.0, f64::max);
    let max_base_residual = fits
        .iter()
        .flat_map(|f| atlas.base_points().map(|q| conic_residual(&f.conic, q)))
        .fold(0.0, f64::max);
    // l ↦ C_l is projective-linear: cross-ratios of l and of basis coordinates agree
    let mut cross_ratio_error: f64 = 0.0;
    if samples.len() >= 4 {
        let step = samples.len() / 4;
        let pick: [usize; 4] = std::array::from_fn(|i| i * step);
        let ls = pick.map(|i| [samples[i].0.cos(), samples[i].0.sin()]);
        let cs = pick.map(|i| samples[i].1);
        let (a, b) = (cross_ratio(ls), cross_ratio(cs));
        cross_ratio_error = (a - b).abs() / (1.0 + a.abs());
    }
    Ok(PencilModel {
        basis,
        singular_values: sv,
        sigma_ratio: ratio,
        samples,
        max_fit_residual,
        max_base_residual,
        base_points,
        base_match,
        cross_ratio_error,
    })
}

/// The two real equations Im(v₁v̄₂) = 0, Im(v₁v̄₃) = 0 and their Jacobian in
/// (Re p, Im p).
fn d_equations(cfg: &PlaneConfig, z: Complex64) -> (Vector2<f64>, Matrix2<f64>) {
    let v = weight_row(cfg, z, 1.0);
    let kap = [cfg.k - 1.0, -cfg.k, Complex64::new(1.0, 0.0)];
    let f = |i: usize, j: usize| (v[i] * v[j].conj()).im;
    let dre = |i: usize, j: usize| (kap[i] * v[j].conj() + v[i] * kap[j].conj()).im;
    let dim = |i: usize, j: usize| (kap[i] * v[j].conj() - v[i] * kap[j].conj()).re;
    (
        Vector2::new(f(0, 1), f(0, 2)),
        Matrix2::new(dre(0, 1), dim(0, 1), dre(0, 2), dim(0, 2)),
    )
}

/// Condition number of the Jacobian of the d-equations at z.
pub fn d_condition(cfg: &PlaneConfig, z: Complex64) -> f64 {
    let (_, j) = d_equations(cfg, z);
    let s = j.singular_values();
    s.max() / s.min()
}

/// The fourth base point d, computed independently of any conic: the unique
/// p ∉ {0, 1, a} where the weight system drops to rank 1.
pub fn point_d_direct(cfg: &PlaneConfig) -> Result<Complex64> {
    let r = cfg.box_radius();
    let n = 21;
    let starts: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let step = 2.0 * r / (n - 1) as f64;
            Complex64::new(-r + i as f64 * step, -r + j as f64 * step)
        })
        .collect();
    let roots: Vec<Complex64> = starts
        .par_iter()
        .filter_map(|&z0| {
            let mut z = z0;
            for _ in 0..100 {
                let (f, j) = d_equations(cfg, z);
                let step = j.lu().solve(&f)?;
                z -= Complex64::new(step[0], step[1]);
                if !z.norm().is_finite() || z.norm() > 1e3 * r {
                    return None;
                }
                if step.norm() < 1e-15 * (1.0 + z.norm()) {
                    break;
                }
            }
            let (f, _) = d_equations(cfg, z);
            let scale = 1.0 + z.norm_sqr();
            (f.norm() < 1e-12 * scale).then_some(z)
        })
        .collect();
    let mut found: Vec<Complex64> = Vec::new();
    for z in roots {
        let v = weight_row(cfg, z, 1.0);
        let s = weight_cross(&v);
        let scale = v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let rank_one = s.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9 * scale;
        let excluded = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), cfg.a]
            .iter()
            .any(|q| (z - q).norm() < 1e-6);
        if rank_one && !excluded && found.iter().all(|f| (f - z).norm() > 1e-8) {
            found.push(z);
        }
    }
    match found.len() {
        0 => Err(AtlasError::NoSolution("no rank-1 point besides 0, 1, a".into())),
        1 => Ok(found[0]),
        n => Err(AtlasError::MultipleSolutions(n)),
    }
}

/// Residuals of d against the three circles through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DCirclesReport {
    pub d: Complex64,
    /// | |d − center| − radius | for circumcircle(0, 1, k),
    /// circumcircle(1, a, (k − a)/(k − 1)), circumcircle(0, a, a/k)
    pub residuals: [f64; 3],
    /// largest distance from d to the nearest pairwise circle intersection
    pub cluster_spread: f64,
}

pub fn d_circle_triples(cfg: &PlaneConfig) -> [[Complex64; 3]; 3] {
    let (a, k) = (cfg.a, cfg.k);
    let (zero, one) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    [
        [zero, one, k],
        [one, a, (k - a) / (k - 1.0)],
        [zero, a, a / k],
    ]
}

pub fn d_circles_check(cfg: &PlaneConfig, d: Complex64) -> Result<DCirclesReport> {
    let triples = d_circle_triples(cfg);
    let mut residuals = [0.0; 3];
    let mut circles = Vec::with_capacity(3);
    for (i, t) in triples.iter().enumerate() {
        let (center, radius) = circumcenter(t[0], t[1], t[2])?;
        residuals[i] = ((d - center).norm() - radius).abs();
        circles.push(crate::projective::circumcircle(t[0], t[1], t[2])?);
    }
    let mut spread: f64 = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let near = intersect_conics(&circles[i], &circles[j])?
            .iter()
            .filter_map(|p| p.to_affine())
            .map(|z| (z - d).norm())
            .fold(f64::INFINITY, f64::min);
        spread = spread.max(near);
    }
    Ok(DCirclesReport {
        d,
        residuals,
        cluster_spread: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{classify_value, FiberClassification};

    fn atlas() -> Atlas {
        Atlas::new(PlaneConfig::default()).unwrap()
    }

    fn is_critical(a: &Atlas, c: &RolledValue) -> bool {
        matches!(classify_value(&a.cfg, c), FiberClassification::Critical { .. })
    }

    #[test]
    fn weights_at_zero_and_d() {
        let a = atlas();
        // p = 0 is excluded, so approach along the ray: weights tend to (1 : 0 : 0)
        let w = homothety_weights(&a, &Rp2Point::affine(Complex64::new(2e-4, 0.0))).unwrap();
        assert!((w.s[0].abs() - 1.0).abs() < 1e-3);
        let v = weight_row(&a.cfg, Complex64::new(0.0, 0.0), 1.0);
        let s = weight_cross(&v);
        assert!(s[1] == 0.0 && s[2] == 0.0 && s[0] != 0.0);
        assert!(matches!(
            homothety_weights(&a, &Rp2Point::affine(a.d)),
            Err(AtlasError::RankDeficient(_))
        ));
        let p = Complex64::new(0.7, -1.3);
        let w = homothety_weights(&a, &Rp2Point::affine(p)).unwrap();
        assert!(w.relation_residual(&a.cfg, p) < 1e-12);
    }

    #[test]
    fn y_direction_matches_weights_formula() {
        let a = atlas();
        for p in [Complex64::new(0.7, -1.3), Complex64::new(-2.0, 3.5), Complex64::new(4.0, 0.2)] {
            let w = homothety_weights(&a, &Rp2Point::affine(p)).unwrap();
            let lit = w.s[1] * (p - 1.0) - w.s[0] * p;
            let hom = y_direction(&a.cfg, p, 1.0);
            assert!((lit * hom.conj()).im.abs() < 1e-12 * lit.norm() * hom.norm());
        }
    }

    #[test]
    fn value_from_p_roundtrip() {
        let a = atlas();
        for p in [Complex64::new(0.7, -1.3), Complex64::new(-2.0, 3.5), Complex64::new(1e7, 3e6)] {
            let pt = Rp2Point::affine(p);
            let c = critical_value_from_p(&a, &pt).unwrap();
            assert!(is_critical(&a, &c));
            let back = phi(&a.cfg, &c).unwrap();
            assert!(back.distance(&pt) < 1e-8);
        }
        for th in [0.0, 0.4, 2.2] {
            let pt = Rp2Point::at_infinity(th);
            let c = critical_value_from_p(&a, &pt).unwrap();
            assert!(is_critical(&a, &c));
            assert!(phi(&a.cfg, &c).unwrap().distance(&pt) < 1e-8);
        }
        let c = critical_value_from_p(&a, &Rp2Point::at_infinity(0.0)).unwrap();
        assert!(c.is_real_stratum(1e-15));
    }

    #[test]
    fn infinity_chart_matches_far_affine_points() {
        let a = atlas();
        for th in [0.3, 1.7, 2.9] {
            let inf = critical_value_from_p(&a, &Rp2Point::at_infinity(th)).unwrap();
            let far = critical_value_from_p(&a, &Rp2Point::affine(Complex64::from_polar(1e8, th)))
                .unwrap();
            assert!(inf.distance(&far) < 1e-7);
        }
    }

    #[test]
    fn base_points_are_guarded() {
        let a = atlas();
        for (z, name) in [
            (Complex64::new(0.0, 0.0), "0"),
            (Complex64::new(1.0, 5e-5), "1"),
            (a.cfg.a, "a"),
            (a.d, "d"),
        ] {
            assert_eq!(
                critical_value_from_p(&a, &Rp2Point::affine(z)),
                Err(AtlasError::BasePointIndeterminate(name))
            );
        }
    }

    #[test]
    fn exceptional_values_are_critical_and_lie_over_q() {
        let a = atlas();
        for q in BasePoint::ALL {
            for i in 0..12 {
                let psi = Rp1Dir::from_angle(PI * i as f64 / 12.0 + 0.05);
                let c = exceptional_value(&a, q, psi).unwrap();
                assert!(is_critical(&a, &c), "q = {}", q.name());
                let p = phi(&a.cfg, &c).unwrap();
                assert!(p.distance(&Rp2Point::affine(a.base_point(q))) < 1e-8);
            }
        }
        let c = exceptional_value(&a, BasePoint::Zero, Rp1Dir::from_angle(1.0)).unwrap();
        let dirs = c.dirs();
        assert_eq!(dirs[2], Rp1Dir::real_axis());
        assert!(dirs[3].chordal(&two_arg(a.cfg.a).unwrap()) < 1e-15);
    }

    #[test]
    fn exceptional_seam_between_eps_and_ten_eps() {
        let a = atlas();
        for q in BasePoint::ALL {
            for i in 0..8 {
                let psi = Rp1Dir::from_angle(PI * i as f64 / 8.0 + 0.1);
                let lim = exceptional_value(&a, q, psi).unwrap();
                let u = exceptional_approach(&a, q, psi);
                for r in [2.0 * BASE_EPS, 5.0 * BASE_EPS, 9.0 * BASE_EPS] {
                    let pt = Rp2Point::affine(a.base_point(q) + r * u);
                    let c = critical_value_from_p(&a, &pt).unwrap();
                    assert!(c.distance(&lim) < 50.0 * r, "q = {}, r = {r}", q.name());
                }
            }
        }
    }

    #[test]
    fn d_is_unique_simple_and_on_circles() {
        let a = atlas();
        for q in [0.0.into(), 1.0.into(), a.cfg.a] {
            let q: Complex64 = q;
            assert!((a.d - q).norm() > 1e-3);
        }
        assert!(d_condition(&a.cfg, a.d) < 1e6);
        let rep = d_circles_check(&a.cfg, a.d).unwrap();
        assert!(rep.residuals.iter().all(|r| *r < 1e-9), "{rep:?}");
        assert!(rep.cluster_spread < 1e-6);
    }

    #[test]
    fn phi_parallel_and_real_cases() {
        let a = atlas();
        let th = 0.8;
        let c = critical_value_from_p(&a, &Rp2Point::at_infinity(th)).unwrap();
        let p = phi(&a.cfg, &c).unwrap();
        assert!(p.distance(&Rp2Point::at_infinity(th)) < 1e-10);
        let la = 1.1;
        let c = RolledValue::from_angles([0.0, 0.0, 0.0, la]);
        let p = phi(&a.cfg, &c).unwrap().to_affine().unwrap();
        let expect = a.cfg.a.re - a.cfg.a.im / la.tan();
        assert!(p.im.abs() < 1e-12 && (p.re - expect).abs() < 1e-12);
    }

    #[test]
    fn coarse_conic_passes_through_base_points() {
        let a = atlas();
        let p_star = Complex64::new(-1.2, 0.9);
        let l = critical_value_from_p(&a, &Rp2Point::affine(p_star)).unwrap().dirs()[1];
        let fit = conic_for_l_grid(&a, l, 201).unwrap();
        for q in a.base_points().into_iter().chain([p_star]) {
            assert!(conic_residual(&fit.conic, q) < 1e-6);
        }
        let other = conic_for_l_grid(&a, Rp1Dir::from_angle(l.angle() + 0.4), 201).unwrap();
        assert!(fit.conic.distance(&other.conic) > 1e-6);
    }
}
