//! Static SVG figures: the pencil of conics, the coincidence loci, the
//! cyclic orders of the sections, and two-coordinate projections of the
//! critical values. Output bytes depend only on the config, the seed and
//! the figure spec.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covering::trace::{p_to_q, q_to_rp2, TraceGrid};
use crate::covering::{coincidence_study, CoincidenceStudy, CyclicWord, LocusKind, Section};
use crate::fiber::fiber_model;
use crate::locus::{
    critical_value_from_p, d_circle_triples, pencil_model_grid, Atlas, BasePoint,
};
use crate::plane::{maps, sample_critical_points};
use crate::projective::{circumcenter, Conic};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    Pencil,
    Coincidence,
    CyclicDiagram,
    CoamoebaProjection,
    AmoebaProjection,
}

impl FigureKind {
    pub const ALL: [FigureKind; 5] = [
        FigureKind::Pencil,
        FigureKind::Coincidence,
        FigureKind::CyclicDiagram,
        FigureKind::CoamoebaProjection,
        FigureKind::AmoebaProjection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Pencil => "pencil",
            FigureKind::Coincidence => "coincidence",
            FigureKind::CyclicDiagram => "cyclic-diagram",
            FigureKind::CoamoebaProjection => "coamoeba-projection",
            FigureKind::AmoebaProjection => "amoeba-projection",
        }
    }

    pub fn parse(s: &str) -> Option<FigureKind> {
        FigureKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub stroke_width: f64,
    pub point_radius: f64,
    pub font_size: f64,
    pub background: String,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            stroke_width: 1.5,
            point_radius: 3.0,
            font_size: 12.0,
            background: "#ffffff".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub width: u32,
    pub height: u32,
    /// world window [xmin, ymin, xmax, ymax]; chosen from the data when absent
    pub viewport: Option<[f64; 4]>,
    pub style: Style,
    /// coordinate indices (0..4) shown by the projections
    pub axes: [usize; 2],
    /// sampled critical points for the projections
    pub samples: usize,
}

impl FigureSpec {
    pub fn new(kind: FigureKind) -> Self {
        FigureSpec {
            kind,
            width: 640,
            height: 640,
            viewport: None,
            style: Style::default(),
            axes: [0, 1],
            samples: 4000,
        }
    }
}

const PAIR_COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn pair_name(p: (Section, Section)) -> String {
    format!("{}-{}", p.0.name(), p.1.name())
}

/// World-to-pixel map with equal scales on both axes, y pointing up.
struct Canvas {
    out: String,
    view: [f64; 4],
    width: f64,
    height: f64,
    scale: f64,
    style: Style,
}

impl Canvas {
    fn new(spec: &FigureSpec, view: [f64; 4], title: &str) -> Self {
        let (width, height) = (spec.width as f64, spec.height as f64);
        let scale = (width / (view[2] - view[0])).min(height / (view[3] - view[1]));
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            spec.width, spec.height, spec.width, spec.height
        );
        let _ = writeln!(out, "<title>{title}</title>");
        let _ = writeln!(
            out,
            r#"<rect x="0" y="0" width="{}" height="{}" fill="{}"/>"#,
            spec.width, spec.height, spec.style.background
        );
        Canvas {
            out,
            view,
            width,
            height,
            scale,
            style: spec.style.clone(),
        }
    }

    fn px(&self, z: Complex64) -> (f64, f64) {
        let cx = 0.5 * (self.view[0] + self.view[2]);
        let cy = 0.5 * (self.view[1] + self.view[3]);
        (
            0.5 * self.width + (z.re - cx) * self.scale,
            0.5 * self.height - (z.im - cy) * self.scale,
        )
    }

    fn inside(&self, z: Complex64, margin: f64) -> bool {
        let (w, h) = (self.view[2] - self.view[0], self.view[3] - self.view[1]);
        z.re > self.view[0] - margin * w
            && z.re < self.view[2] + margin * w
            && z.im > self.view[1] - margin * h
            && z.im < self.view[3] + margin * h
    }

    fn path(&mut self, pts: &[Complex64], closed: bool, attrs: &str) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (i, &z) in pts.iter().enumerate() {
            let (x, y) = self.px(z);
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        if closed {
            d.push_str(" Z");
        }
        let _ = writeln!(
            self.out,
            r#"<path {attrs} fill="none" stroke-width="{}" d="{d}"/>"#,
            self.style.stroke_width
        );
    }

    fn circle(&mut self, center: Complex64, radius_px: f64, attrs: &str) {
        let (x, y) = self.px(center);
        let _ = writeln!(
            self.out,
            r#"<circle {attrs} cx="{x:.2}" cy="{y:.2}" r="{radius_px:.2}"/>"#
        );
    }

    fn text(&mut self, at: Complex64, dx: f64, dy: f64, s: &str, attrs: &str) {
        let (x, y) = self.px(at);
        let _ = writeln!(
            self.out,
            r#"<text {attrs} x="{:.2}" y="{:.2}" font-size="{}" font-family="sans-serif">{s}</text>"#,
            x + dx,
            y + dy,
            self.style.font_size
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Renders one figure. The coincidence figure reuses `study` when given.
pub fn render(
    atlas: &Atlas,
    spec: &FigureSpec,
    seed: u64,
    study: Option<&CoincidenceStudy>,
) -> Result<String> {
    match spec.kind {
        FigureKind::Pencil => render_pencil(atlas, spec),
        FigureKind::Coincidence => match study {
            Some(s) => render_coincidence(spec, s),
            None => render_coincidence(spec, &coincidence_study(atlas, TraceGrid::standard())?),
        },
        FigureKind::CyclicDiagram => render_cyclic(atlas, spec),
        FigureKind::CoamoebaProjection | FigureKind::AmoebaProjection => {
            render_projection(atlas, spec, seed)
        }
    }
}

/// Points of a conic through the origin, one per line through the origin:
/// r·u with r = −(D uₓ + E u_y)/(A uₓ² + B uₓu_y + C u_y²).
fn conic_through_origin(q: &Conic, steps: usize) -> Vec<Option<Complex64>> {
    let [a, b, c, d, e, _] = q.coeffs();
    (0..=steps)
        .map(|i| {
            let t = PI * i as f64 / steps as f64;
            let u = Complex64::from_polar(1.0, t);
            let den = a * u.re * u.re + b * u.re * u.im + c * u.im * u.im;
            let r = -(d * u.re + e * u.im) / den;
            r.is_finite().then_some(r * u)
        })
        .collect()
}

fn render_pencil(atlas: &Atlas, spec: &FigureSpec) -> Result<String> {
    let base = atlas.base_points();
    let view = spec.viewport.unwrap_or_else(|| {
        let c: Complex64 = base.iter().sum::<Complex64>() / 4.0;
        let half = 1.5 * base.iter().map(|b| (b - c).norm()).fold(0.0, f64::max) + 0.5;
        [c.re - half, c.im - half, c.re + half, c.im + half]
    });
    let mut cv = Canvas::new(spec, view, "pencil of conics");
    let pencil = pencil_model_grid(atlas, 24, 401)?;
    for (n, (l, coord)) in pencil.samples.iter().enumerate().step_by(2) {
        let b0 = pencil.basis[0].coeffs();
        let b1 = pencil.basis[1].coeffs();
        let conic = Conic::new(std::array::from_fn(|j| coord[0] * b0[j] + coord[1] * b1[j]))?;
        let hue = (360.0 * n as f64 / pencil.samples.len() as f64).round();
        let attrs = format!(
            r#"class="conic" data-l="{l:.6}" stroke="hsl({hue},60%,45%)""#
        );
        // split where the curve leaves the window (hyperbola branches)
        let mut run: Vec<Complex64> = Vec::new();
        for p in conic_through_origin(&conic, 1440) {
            match p.filter(|z| cv.inside(*z, 0.5)) {
                Some(z) => run.push(z),
                None => {
                    cv.path(&run, false, &attrs);
                    run.clear();
                }
            }
        }
        cv.path(&run, false, &attrs);
    }
    for t in d_circle_triples(&atlas.cfg) {
        let (center, radius) = circumcenter(t[0], t[1], t[2])?;
        let (x, y) = cv.px(center);
        let _ = writeln!(
            cv.out,
            r#"<circle class="d-circle" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="none" stroke="black" stroke-dasharray="4 3" stroke-width="{}"/>"#,
            radius * cv.scale,
            0.5 * spec.style.stroke_width
        );
    }
    let r = spec.style.point_radius + 1.0;
    for (q, z) in BasePoint::ALL.iter().zip(base) {
        cv.circle(z, r, r#"class="base-point" fill="black""#);
        cv.text(z, r + 2.0, -r - 2.0, q.name(), r#"class="label""#);
    }
    Ok(cv.finish())
}

fn render_coincidence(spec: &FigureSpec, study: &CoincidenceStudy) -> Result<String> {
    let view = spec.viewport.unwrap_or([-1.15, -1.15, 1.15, 1.15]);
    let mut cv = Canvas::new(spec, view, "coincidence loci of the five sections");
    let base_q = study.scan.base_q;
    let divisor_radius = 0.035;
    for (i, l) in study.loci.iter().enumerate() {
        let attrs = format!(
            r#"class="locus" data-pair="{}" stroke="{}""#,
            pair_name(l.pair),
            PAIR_COLORS[i]
        );
        match l.kind {
            LocusKind::AffineTrace => cv.path(&l.polyline, true, &attrs),
            LocusKind::ExceptionalDivisor(b) => {
                let c = base_q[BasePoint::ALL.iter().position(|&x| x == b).unwrap()];
                let ring: Vec<Complex64> = (0..96)
                    .map(|k| c + Complex64::from_polar(divisor_radius, TAU * k as f64 / 96.0))
                    .collect();
                cv.path(&ring, true, &attrs);
            }
            LocusKind::LineAtInfinity => {
                let ring: Vec<Complex64> = (0..360)
                    .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 360.0))
                    .collect();
                cv.path(&ring, true, &attrs);
            }
        }
    }
    for v in &study.scan.vertices {
        cv.circle(v.q, spec.style.point_radius, r#"class="vertex" fill="black""#);
    }
    for (q, z) in BasePoint::ALL.iter().zip(base_q) {
        cv.circle(z, spec.style.point_radius, r#"class="base-point" fill="white" stroke="black""#);
        cv.text(z, 6.0, 14.0, q.name(), r#"class="label""#);
    }
    // legend
    for (i, l) in study.loci.iter().enumerate() {
        let at = Complex64::new(view[0], view[3]);
        let y = 4.0 + (i as f64 + 1.0) * (spec.style.font_size + 2.0);
        cv.text(
            at,
            4.0,
            y,
            &pair_name(l.pair),
            &format!(r#"class="legend" fill="{}""#, PAIR_COLORS[i]),
        );
    }
    Ok(cv.finish())
}

fn render_cyclic(atlas: &Atlas, spec: &FigureSpec) -> Result<String> {
    // distinct cyclic words over a grid of the disk model, in scan order
    let n = 25;
    let base_q = atlas.base_points().map(p_to_q);
    let mut found: Vec<(CyclicWord, [f64; 5], Complex64)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let q = Complex64::new(
                -0.95 + 1.9 * i as f64 / (n - 1) as f64,
                0.95 - 1.9 * j as f64 / (n - 1) as f64,
            );
            if q.norm() > 0.95 || base_q.iter().any(|b| (q - b).norm() < 0.03) {
                continue;
            }
            let Ok(c) = critical_value_from_p(atlas, &q_to_rp2(q)) else { continue };
            let Ok(model) = fiber_model(&atlas.cfg, &c) else { continue };
            let word = CyclicWord::from_blocks(model.clusters(atlas.cfg.tol.coincidence));
            if word.letters() == 5 && found.iter().all(|f| f.0 != word) {
                found.push((word, model.marked, q));
            }
        }
    }
    let cols = 4usize;
    let rows = found.len().div_ceil(cols).max(1);
    let view = spec
        .viewport
        .unwrap_or([0.0, -(3.0 * rows as f64), 3.0 * cols as f64, 0.0]);
    let mut cv = Canvas::new(spec, view, "cyclic orders of the five sections");
    for (idx, (word, marked, q)) in found.iter().enumerate() {
        let center = Complex64::new(
            3.0 * (idx % cols) as f64 + 1.5,
            -3.0 * (idx / cols) as f64 - 1.4,
        );
        let ring: Vec<Complex64> = (0..120)
            .map(|k| center + Complex64::from_polar(1.0, TAU * k as f64 / 120.0))
            .collect();
        cv.path(
            &ring,
            true,
            &format!(r#"class="fiber" data-q="{:.4},{:.4}" stroke="black""#, q.re, q.im),
        );
        for s in Section::ALL {
            // the fiber RP¹ drawn as a circle: angle α at 2α
            let z = center + Complex64::from_polar(1.0, 2.0 * marked[s.index()]);
            cv.circle(
                z,
                spec.style.point_radius,
                &format!(r#"class="marked" fill="{}""#, PAIR_COLORS[2 * s.index()]),
            );
            let label = center + Complex64::from_polar(1.25, 2.0 * marked[s.index()]);
            cv.text(label, -8.0, 4.0, s.name(), r#"class="label""#);
        }
        cv.text(
            center - Complex64::new(1.2, 1.35),
            0.0,
            0.0,
            &word.to_string(),
            r#"class="word""#,
        );
    }
    Ok(cv.finish())
}

fn render_projection(atlas: &Atlas, spec: &FigureSpec, seed: u64) -> Result<String> {
    let cfg = &atlas.cfg;
    let [i, j] = spec.axes.map(|a| a.min(3));
    let amoeba = spec.kind == FigureKind::AmoebaProjection;
    let pts = sample_critical_points(cfg, spec.samples, seed)?;
    let mut xy = Vec::with_capacity(pts.len());
    for pt in &pts {
        let m = maps(cfg, pt)?;
        xy.push(if amoeba {
            Complex64::new(m.amoeba[i], m.amoeba[j])
        } else {
            Complex64::new(m.arg.0[i], m.arg.0[j])
        });
    }
    let view = spec.viewport.unwrap_or(if amoeba {
        [-4.0, -4.0, 4.0, 4.0]
    } else {
        [0.0, 0.0, TAU, TAU]
    });
    let title = if amoeba {
        format!("amoeba critical values, coordinates {i} and {j}")
    } else {
        format!("coamoeba critical values, coordinates {i} and {j}")
    };
    let mut cv = Canvas::new(spec, view, &title);
    let frame = [
        Complex64::new(view[0], view[1]),
        Complex64::new(view[2], view[1]),
        Complex64::new(view[2], view[3]),
        Complex64::new(view[0], view[3]),
    ];
    cv.path(&frame, true, r#"class="frame" stroke="black""#);
    let r = 0.5 * spec.style.point_radius;
    for z in xy {
        if !cv.inside(z, 0.0) {
            continue;
        }
        cv.circle(z, r, r##"class="sample" fill="#1f77b4" fill-opacity="0.5""##);
    }
    Ok(cv.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::PlaneConfig;

    #[test]
    fn conic_parametrization_stays_on_the_conic() {
        // x² + y² − 2x = 0, the circle of radius 1 about 1
        let q = Conic::new([1.0, 0.0, 1.0, -2.0, 0.0, 0.0]).unwrap();
        for z in conic_through_origin(&q, 90).into_iter().flatten() {
            assert!(((z - 1.0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pencil_figure_marks_base_points_and_is_deterministic() {
        let atlas = Atlas::new(PlaneConfig::default()).unwrap();
        let spec = FigureSpec::new(FigureKind::Pencil);
        let a = render(&atlas, &spec, 1, None).unwrap();
        let b = render(&atlas, &spec, 1, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches(r#"class="base-point""#).count(), 4);
        assert_eq!(a.matches(r#"class="d-circle""#).count(), 3);
        assert!(a.matches(r#"class="conic""#).count() >= 12);
    }

    #[test]
    fn projections_are_deterministic() {
        let atlas = Atlas::new(PlaneConfig::default()).unwrap();
        let mut spec = FigureSpec::new(FigureKind::CoamoebaProjection);
        spec.samples = 200;
        let a = render(&atlas, &spec, 5, None).unwrap();
        assert_eq!(a, render(&atlas, &spec, 5, None).unwrap());
        assert_eq!(a.matches(r#"class="sample""#).count(), 200);
        assert_ne!(a, render(&atlas, &spec, 6, None).unwrap());
    }
}
