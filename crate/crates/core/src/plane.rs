//! The plane V(a, k) = {(x, y, x+y−1, x+ky−a)} ⊂ C⁴, its three argument-type
//! maps, and the critical locus Z.
//!
//! A point of V^× is critical for Log, 2Arg and Arg alike exactly when some
//! nonzero tangent (dx, dy) = (s·x, t·y), s, t real, keeps every dzⱼ/zⱼ real.
//! Eliminating s and t leaves the 2×2 determinant returned by [`crit_det`].

use std::f64::consts::TAU;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::fiber::RolledValue;

/// Numerical tolerances shared by every module. Defaults are the values the
/// acceptance suite is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// incidence tests on unit-normalized projective data
    pub incidence: f64,
    /// relative singular-value threshold for rank decisions
    pub rank_rtol: f64,
    /// scale-aware consistency threshold for rank-3 fiber systems
    pub consistency: f64,
    /// distance to a coordinate hyperplane below which a point is off-torus
    pub torus: f64,
    /// |D| accepted as "on Z" by the sampler
    pub crit: f64,
    /// exclusion radius around the base points 0, 1, a, d
    pub base_exclusion: f64,
    /// chordal distance below which two marked points coincide
    pub coincidence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            incidence: 1e-8,
            rank_rtol: 1e-9,
            consistency: 1e-8,
            torus: 1e-10,
            crit: 1e-10,
            base_exclusion: 1e-4,
            coincidence: 1e-7,
        }
    }
}

/// Generic parameters (a, k) of the plane, plus sampling seed and tolerances.
/// Serialized as `{"a": [re, im], "k": [re, im], "seed": n, "tol": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ConfigFile", into = "ConfigFile")]
pub struct PlaneConfig {
    pub a: Complex64,
    pub k: Complex64,
    pub seed: u64,
    pub tol: Tolerances,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct ConfigFile {
    a: [f64; 2],
    k: [f64; 2],
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    tol: Tolerances,
}

impl From<ConfigFile> for PlaneConfig {
    fn from(f: ConfigFile) -> Self {
        PlaneConfig {
            a: Complex64::new(f.a[0], f.a[1]),
            k: Complex64::new(f.k[0], f.k[1]),
            seed: f.seed,
            tol: f.tol,
        }
    }
}

impl From<PlaneConfig> for ConfigFile {
    fn from(c: PlaneConfig) -> Self {
        ConfigFile {
            a: [c.a.re, c.a.im],
            k: [c.k.re, c.k.im],
            seed: c.seed,
            tol: c.tol,
        }
    }
}

impl Default for PlaneConfig {
    fn default() -> Self {
        PlaneConfig {
            a: Complex64::new(1.6, 1.2),
            k: Complex64::new(0.45, 0.85),
            seed: 0,
            tol: Tolerances::default(),
        }
    }
}

impl PlaneConfig {
    pub fn new(a: Complex64, k: Complex64) -> Self {
        PlaneConfig {
            a,
            k,
            ..PlaneConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AtlasError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Radius R = 3·max(|a|, |k|, 1) of the sampling box.
    pub fn box_radius(&self) -> f64 {
        3.0 * self.a.norm().max(self.k.norm()).max(1.0)
    }
}

/// A point (x, y) of V; the four coordinates are (x, y, x+y−1, x+ky−a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: Complex64,
    pub y: Complex64,
}

impl TorusPoint {
    /// A point of V^×, rejecting points within `cfg.tol.torus` of a
    /// coordinate hyperplane.
    pub fn new(cfg: &PlaneConfig, x: Complex64, y: Complex64) -> Result<Self> {
        let pt = TorusPoint { x, y };
        pt.check(cfg)?;
        Ok(pt)
    }

    pub fn from_real(w: [f64; 4]) -> Self {
        TorusPoint {
            x: Complex64::new(w[0], w[1]),
            y: Complex64::new(w[2], w[3]),
        }
    }

    pub fn to_real(&self) -> [f64; 4] {
        [self.x.re, self.x.im, self.y.re, self.y.im]
    }

    pub fn coords(&self, cfg: &PlaneConfig) -> [Complex64; 4] {
        [
            self.x,
            self.y,
            self.x + self.y - 1.0,
            self.x + cfg.k * self.y - cfg.a,
        ]
    }

    pub fn min_modulus(&self, cfg: &PlaneConfig) -> f64 {
        self.coords(cfg)
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self, cfg: &PlaneConfig) -> Result<()> {
        let m = self.min_modulus(cfg);
        if !(m > cfg.tol.torus) {
            return Err(AtlasError::OffTorus(m));
        }
        Ok(())
    }
}

/// A point of (S¹)⁴, angles in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgTuple(pub [f64; 4]);

impl ArgTuple {
    pub fn new(angles: [f64; 4]) -> Self {
        ArgTuple(angles.map(|t| t.rem_euclid(TAU)))
    }

    /// Largest circular distance between components.
    pub fn distance(&self, other: &ArgTuple) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }

    /// Componentwise reduction mod π, with representatives e^{iθⱼ}.
    pub fn rolled(&self) -> RolledValue {
        RolledValue::from_reps(self.0.map(|t| Complex64::from_polar(1.0, t)))
            .expect("unit representatives")
    }
}

/// Images of a torus point under the amoeba, rolled coamoeba and coamoeba
/// maps.
#[derive(Debug, Clone, Copy)]
pub struct MapValues {
    pub amoeba: [f64; 4],
    pub rolled: RolledValue,
    pub arg: ArgTuple,
}

pub fn maps(cfg: &PlaneConfig, pt: &TorusPoint) -> Result<MapValues> {
    pt.check(cfg)?;
    let z = pt.coords(cfg);
    let rolled = RolledValue::from_reps(z.map(|zj| zj / zj.norm()))?;
    Ok(MapValues {
        amoeba: z.map(|zj| zj.norm().ln()),
        rolled,
        arg: ArgTuple::new(z.map(|zj| zj.arg())),
    })
}

/// D(x, y) = Im(x z̄₃)·Im(k y z̄₄) − Im(y z̄₃)·Im(x z̄₄); Z is its zero set.
pub fn crit_det(cfg: &PlaneConfig, pt: &TorusPoint) -> Result<f64> {
    pt.check(cfg)?;
    Ok(crit_det_unchecked(cfg, pt))
}

pub(crate) fn crit_det_unchecked(cfg: &PlaneConfig, pt: &TorusPoint) -> f64 {
    let [x, y, z3, z4] = pt.coords(cfg);
    let a11 = (x * z3.conj()).im;
    let a12 = (y * z3.conj()).im;
    let a21 = (x * z4.conj()).im;
    let a22 = (cfg.k * y * z4.conj()).im;
    a11 * a22 - a12 * a21
}

/// Gradient of D in (Re x, Im x, Re y, Im y).
pub fn grad_crit_det(cfg: &PlaneConfig, pt: &TorusPoint) -> Result<[f64; 4]> {
    pt.check(cfg)?;
    let k = cfg.k;
    let [x, y, z3, z4] = pt.coords(cfg);
    let im_fg = |f: Complex64, g: Complex64| (f * g.conj()).im;
    let a11 = im_fg(x, z3);
    let a12 = im_fg(y, z3);
    let a21 = im_fg(x, z4);
    let a22 = im_fg(k * y, z4);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    // derivatives of (x, y, z3, z4) along each real coordinate
    let dirs = [
        [one, 0.0 * one, one, one],
        [i, 0.0 * one, i, i],
        [0.0 * one, one, one, k],
        [0.0 * one, i, i, i * k],
    ];
    let d_im = |f: Complex64, df: Complex64, g: Complex64, dg: Complex64| {
        (df * g.conj() + f * dg.conj()).im
    };
    Ok(dirs.map(|[dx, dy, d3, d4]| {
        let d11 = d_im(x, dx, z3, d3);
        let d12 = d_im(y, dy, z3, d3);
        let d21 = d_im(x, dx, z4, d4);
        let d22 = d_im(k * y, k * dy, z4, d4);
        d11 * a22 + a11 * d22 - d12 * a21 - a12 * d21
    }))
}

/// Finite-difference verification oracle for [`crit_det`].
///
/// Builds the 4×4 real Jacobian of (x, y) ↦ (arg z₁, …, arg z₄) by central
/// differences (angle differences taken as arg of the ratio, so branch cuts
/// never enter) and returns −det(J)·∏|zⱼ|², which agrees with D to O(h²).
pub fn jacobian_oracle(cfg: &PlaneConfig, pt: &TorusPoint, h: f64) -> Result<f64> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(AtlasError::BadStep(h));
    }
    pt.check(cfg)?;
    let m = pt.min_modulus(cfg);
    if m < 10.0 * h {
        return Err(AtlasError::BranchJump(m));
    }
    let w = pt.to_real();
    let mut jac = Matrix4::zeros();
    for col in 0..4 {
        let mut wp = w;
        let mut wm = w;
        wp[col] += h;
        wm[col] -= h;
        let zp = TorusPoint::from_real(wp).coords(cfg);
        let zm = TorusPoint::from_real(wm).coords(cfg);
        for row in 0..4 {
            jac[(row, col)] = (zp[row] / zm[row]).arg() / (2.0 * h);
        }
    }
    let weight: f64 = pt.coords(cfg).iter().map(|z| z.norm_sqr()).product();
    Ok(-jac.determinant() * weight)
}

/// Bisection on a sign-changing function along w(s) = wa + s (wb − wa).
/// Returns the parameter and endpoint of the final bracket closest to zero.
pub(crate) fn bisect_segment<F: Fn(&[f64; 4]) -> f64>(
    f: F,
    wa: [f64; 4],
    wb: [f64; 4],
    target: f64,
) -> Option<(f64, [f64; 4], f64)> {
    let at = |s: f64| -> [f64; 4] { std::array::from_fn(|i| wa[i] + s * (wb[i] - wa[i])) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut flo = f(&wa);
    let fhi = f(&wb);
    if !(flo * fhi < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(&at(mid));
        if fm == 0.0 {
            return Some((mid, at(mid), 0.0));
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
        if fm.abs() < target * 1e-3 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let w = at(s);
    Some((s, w, f(&w)))
}

/// Deterministic random segment `index` of the sampling box for `seed`.
pub(crate) fn random_segment(cfg: &PlaneConfig, seed: u64, index: u64) -> ([f64; 4], [f64; 4]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let r = cfg.box_radius();
    let wa = std::array::from_fn(|_| rng.gen_range(-r..r));
    let wb = std::array::from_fn(|_| rng.gen_range(-r..r));
    (wa, wb)
}

/// `n` points of Z found by sign-change bisection of D along random segments
/// of the box of radius R in C².
pub fn sample_critical_points(cfg: &PlaneConfig, n: usize, seed: u64) -> Result<Vec<TorusPoint>> {
    let max_attempts = (n as u64).saturating_mul(40).max(1000);
    let batch = (2 * n as u64).max(256);
    let mut out = Vec::with_capacity(n);
    let mut start = 0u64;
    while out.len() < n && start < max_attempts {
        let end = (start + batch).min(max_attempts);
        let found: Vec<Option<TorusPoint>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let (wa, wb) = random_segment(cfg, seed, i);
                let (_, w, val) = bisect_segment(
                    |w| crit_det_unchecked(cfg, &TorusPoint::from_real(*w)),
                    wa,
                    wb,
                    cfg.tol.crit,
                )?;
                let pt = TorusPoint::from_real(w);
                (val.abs() < cfg.tol.crit && pt.check(cfg).is_ok()).then_some(pt)
            })
            .collect();
        out.extend(found.into_iter().flatten());
        start = end;
    }
    if out.len() < n {
        return Err(AtlasError::InsufficientHits {
            found: out.len(),
            wanted: n,
        });
    }
    out.truncate(n);
    Ok(out)
}

/// Uniform random torus points of the sampling box (off Z with probability 1).
pub fn random_torus_points(cfg: &PlaneConfig, n: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cfg.box_radius();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-r..r));
        let pt = TorusPoint::from_real(w);
        if pt.min_modulus(cfg) > 1e-3 {
            out.push(pt);
        }
    }
    out
}

/// One named pass/fail line of a [`GenericityReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub checks: Vec<GenericityCheck>,
}

impl GenericityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

const GENERIC_EPS: f64 = 1e-6;

/// Algebraic genericity conditions on (a, k) that need no geometry.
pub fn basic_genericity(cfg: &PlaneConfig) -> GenericityReport {
    let (a, k) = (cfg.a, cfg.k);
    let one = Complex64::new(1.0, 0.0);
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64| {
        checks.push(GenericityCheck {
            name: name.to_string(),
            passed: value.is_finite() && value > GENERIC_EPS,
            value,
        })
    };
    push("Im k ≠ 0", k.im.abs());
    push("Im a ≠ 0", a.im.abs());
    push("a ∉ {0}", a.norm());
    push("a ∉ {1}", (a - one).norm());
    push("a ∉ {k}", (a - k).norm());
    push("k ∉ {0}", k.norm());
    push("k ∉ {1}", (k - one).norm());
    push("Im(k·conj(a)) ≠ 0", (k * a.conj()).im.abs());
    GenericityReport { checks }
}

/// Full genericity validation: the algebraic conditions, separation of the
/// fourth base point d from {0, 1, a}, and an empty triple-coincidence scan
/// at coarse resolution.
pub fn validate_config(cfg: &PlaneConfig) -> GenericityReport {
    let mut report = basic_genericity(cfg);
    if !report.passed() {
        return report;
    }
    let d_sep = match crate::locus::point_d_direct(cfg) {
        Ok(d) => [0.0.into(), 1.0.into(), cfg.a]
            .iter()
            .map(|q: &Complex64| (d - q).norm())
            .fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    };
    report.checks.push(GenericityCheck {
        name: "d distinct from {0, 1, a}".into(),
        passed: d_sep > GENERIC_EPS,
        value: d_sep,
    });
    if !(d_sep > GENERIC_EPS) {
        return report;
    }
    let triples = crate::covering::coarse_triple_scan(cfg);
    let count = triples.map(|t| t.len() as f64).unwrap_or(f64::NAN);
    report.checks.push(GenericityCheck {
        name: "no triple coincidences (coarse scan)".into(),
        passed: count == 0.0,
        value: count,
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cfg() -> PlaneConfig {
        PlaneConfig::default()
    }

    #[test]
    fn maps_examples() {
        let c = cfg();
        let pt = TorusPoint::new(&c, 1.0.into(), 1.0.into()).unwrap();
        let m = maps(&c, &pt).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(m.amoeba[j], 0.0);
        }
        assert_abs_diff_eq!(
            m.amoeba[3],
            (Complex64::new(1.0, 0.0) + c.k - c.a).norm().ln()
        );

        let i = Complex64::i();
        let pt = TorusPoint::new(&c, i, i).unwrap();
        let dirs = maps(&c, &pt).unwrap().rolled.dirs();
        assert_abs_diff_eq!(dirs[0].angle(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(dirs[1].angle(), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn off_torus_rejected() {
        let c = cfg();
        let err = TorusPoint::new(&c, 0.0.into(), 1.0.into()).unwrap_err();
        assert!(matches!(err, AtlasError::OffTorus(_)));
        // x + y = 1
        assert!(TorusPoint::new(&c, Complex64::new(0.3, 0.2), Complex64::new(0.7, -0.2)).is_err());
        // x + ky = a
        let y = Complex64::new(0.5, 0.1);
        assert!(TorusPoint::new(&c, c.a - c.k * y, y).is_err());
    }

    #[test]
    fn real_plane_lies_in_z() {
        let c = cfg();
        for (x, y) in [(0.3, 2.0), (-1.5, 0.7), (4.0, -2.5)] {
            let pt = TorusPoint::new(&c, x.into(), y.into()).unwrap();
            assert_eq!(crit_det(&c, &pt).unwrap(), 0.0);
            let g = grad_crit_det(&c, &pt).unwrap();
            assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3);
        }
    }

    #[test]
    fn crit_det_matches_oracle_at_reference_points() {
        let c = cfg();
        let i = Complex64::i();
        for (x, y) in [
            (Complex64::new(1.0, 1.0), Complex64::new(2.0, -1.0)),
            (i, i),
        ] {
            let pt = TorusPoint::new(&c, x, y).unwrap();
            let d = crit_det(&c, &pt).unwrap();
            let o = jacobian_oracle(&c, &pt, 1e-5).unwrap();
            assert!(d.abs() > 1e-3);
            assert!(((d - o) / d).abs() < 1e-6, "D = {d}, oracle = {o}");
        }
        // hand evaluation at x = y = i
        let pt = TorusPoint { x: i, y: i };
        let (a, k) = (c.a, c.k);
        let z3 = 2.0 * i - 1.0;
        let z4 = i + k * i - a;
        let expect = (i * z3.conj()).im * (k * i * z4.conj()).im
            - (i * z3.conj()).im * (i * z4.conj()).im;
        assert_abs_diff_eq!(crit_det(&c, &pt).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn oracle_step_guards() {
        let c = cfg();
        let pt = TorusPoint::new(&c, Complex64::new(1.0, 1.0), 2.0.into()).unwrap();
        assert!(matches!(jacobian_oracle(&c, &pt, 1e-3), Err(AtlasError::BadStep(_))));
        let near = TorusPoint::new(&c, Complex64::new(5e-5, 0.0), 2.0.into()).unwrap();
        assert!(matches!(
            jacobian_oracle(&c, &near, 1e-5),
            Err(AtlasError::BranchJump(_))
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let c = cfg();
        let h = 1e-6;
        for pt in random_torus_points(&c, 200, 7) {
            let g = grad_crit_det(&c, &pt).unwrap();
            let w = pt.to_real();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..4 {
                let mut wp = w;
                let mut wm = w;
                wp[i] += h;
                wm[i] -= h;
                let fd = (crit_det_unchecked(&c, &TorusPoint::from_real(wp))
                    - crit_det_unchecked(&c, &TorusPoint::from_real(wm)))
                    / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * gn.max(1.0), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_on_z() {
        let c = cfg();
        let a = sample_critical_points(&c, 50, 3).unwrap();
        let b = sample_critical_points(&c, 50, 3).unwrap();
        assert_eq!(a, b);
        for pt in &a {
            assert!(crit_det(&c, pt).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn config_json_roundtrip() {
        let c = PlaneConfig {
            seed: 42,
            ..cfg()
        };
        let back = PlaneConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        let minimal = PlaneConfig::from_json(r#"{"a":[1.6,1.2],"k":[0.45,0.85]}"#).unwrap();
        assert_eq!(minimal, cfg());
        assert!(PlaneConfig::from_json("{").is_err());
    }

    #[test]
    fn basic_genericity_examples() {
        assert!(basic_genericity(&cfg()).passed());
        let real_k = PlaneConfig::new(Complex64::new(1.6, 1.2), 0.5.into());
        let r = basic_genericity(&real_k);
        assert!(r.failures().contains(&"Im k ≠ 0"));
        let a_eq_k = PlaneConfig::new(Complex64::new(0.45, 0.85), Complex64::new(0.45, 0.85));
        assert!(basic_genericity(&a_eq_k).failures().contains(&"a ∉ {k}"));
    }
}
