use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use coamoeba_atlas::covering::trace::TraceGrid;
use coamoeba_atlas::covering::{
    arc_census, coincidence_study, covering_report, cyclic_order, monodromy_report, CyclicWord,
    Section,
};
use coamoeba_atlas::fiber::{classify_value, model_arcs, FiberClassification, FiberModel, RolledValue};
use coamoeba_atlas::locus::{
    critical_value_from_p, d_circles_check, homothety_weights, pencil_model, Atlas,
};
use coamoeba_atlas::plane::{validate_config, PlaneConfig, TorusPoint};
use coamoeba_atlas::projective::Rp2Point;
use coamoeba_atlas::render::{render, FigureKind, FigureSpec};
use coamoeba_atlas::report::{verify_all, Level, Status};
use coamoeba_atlas::AtlasError;

#[derive(Parser)]
#[command(
    name = "coamoeba-atlas",
    version,
    about = "Critical loci and critical values of the argument maps of a generic plane in C^4"
)]
struct Cli {
    /// JSON config {"a": [re, im], "k": [re, im], "seed": n, "tol": {...}}
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// sampling seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output file (JSON report, or SVG for render)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// print JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Coarse,
    Standard,
    Fine,
}

impl GridArg {
    fn grid(self) -> TraceGrid {
        match self {
            GridArg::Coarse => TraceGrid::coarse(),
            GridArg::Standard => TraceGrid::standard(),
            GridArg::Fine => TraceGrid::fine(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Pencil,
    Coincidence,
    CyclicDiagram,
    CoamoebaProjection,
    AmoebaProjection,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the genericity conditions of the config
    Validate,
    /// Run every verification check and emit the report
    VerifyAll {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
        /// directory receiving the SVG figures of the run
        #[arg(long)]
        figures: Option<PathBuf>,
        /// keep per-check runtimes in the JSON report
        #[arg(long)]
        timings: bool,
    },
    /// Preimage of a value of (RP^1)^4 given by four angles (radians)
    Invert {
        #[arg(num_args = 4, allow_negative_numbers = true, required = true)]
        angles: Vec<f64>,
    },
    /// Classify a value of (RP^1)^4 and describe its fiber
    Classify {
        #[arg(num_args = 4, allow_negative_numbers = true, required = true)]
        angles: Vec<f64>,
    },
    /// Critical value whose concurrency point is p = [x : y : w]
    FromP {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        w: f64,
    },
    /// Fit the pencil of conics and locate its base points
    Pencil {
        #[arg(long, default_value_t = 24)]
        samples: usize,
    },
    /// Trace the ten coincidence loci and scan for triple coincidences
    Coincidence {
        #[arg(long, value_enum, default_value = "standard")]
        grid: GridArg,
    },
    /// Monodromy of the arc covering around the generator loops
    Monodromy,
    /// Degree, connectivity, Euler characteristics and boundary circles
    Covering {
        #[arg(long, value_enum, default_value = "standard")]
        grid: GridArg,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Write an SVG figure
    Render {
        #[arg(long, value_enum)]
        figure: FigureArg,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 640)]
        height: u32,
        /// coordinate indices of the projections, e.g. 0,2
        #[arg(long, value_delimiter = ',', num_args = 2, default_value = "0,1")]
        axes: Vec<usize>,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
    },
}

/// Failure with its exit code: 1 for failed verification or computation,
/// 2 for usage and configuration errors.
struct Failure(u8, String);

impl From<AtlasError> for Failure {
    fn from(e: AtlasError) -> Self {
        let code = if matches!(e, AtlasError::Config(_)) { 2 } else { 1 };
        Failure(code, e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<PlaneConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure(2, format!("cannot read {}: {e}", path.display())))?;
            PlaneConfig::from_json(&text).map_err(|e| Failure(2, e.to_string()))?
        }
        None => PlaneConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &str) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure(2, format!("cannot write {}: {e}", path.display())))
}

/// Prints `value` as JSON or `text`, and writes the JSON to --out if given.
fn emit(cli: &Cli, value: &Value, text: &str) -> Result<(), Failure> {
    let pretty = serde_json::to_string_pretty(value).expect("json value serializes");
    if let Some(path) = &cli.out {
        write_file(path, &(pretty.clone() + "\n"))?;
    }
    if cli.json {
        println!("{pretty}");
    } else {
        print!("{text}");
    }
    Ok(())
}

fn angles4(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn complex(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn point_json(pt: &TorusPoint) -> Value {
    json!({ "x": complex(pt.x), "y": complex(pt.y) })
}

fn fiber_json(cfg: &PlaneConfig, model: &FiberModel) -> Value {
    let arcs: Vec<Value> = model_arcs(model, cfg.tol.coincidence)
        .iter()
        .map(|a| {
            json!({
                "bounds": [a.bounds.0.name(), a.bounds.1.name()],
                "start": a.start,
                "end": a.end,
                "label": a.label.0,
            })
        })
        .collect();
    let marked: serde_json::Map<String, Value> = Section::ALL
        .iter()
        .map(|s| (s.name().to_string(), json!(model.marked_angle(*s))))
        .collect();
    json!({
        "marked": marked,
        "cyclic_order": CyclicWord::from_blocks(model.clusters(cfg.tol.coincidence)).to_string(),
        "arcs": arcs,
        "real_stratum": model.real_stratum,
    })
}

fn classification_json(cfg: &PlaneConfig, c: &RolledValue) -> (Value, String) {
    let class = classify_value(cfg, c);
    let mut v = json!({ "value": c.angles(), "classification": class.kind() });
    let mut text = format!("classification: {}\n", class.kind());
    match &class {
        FiberClassification::Regular { preimage } => {
            v["preimage"] = point_json(preimage);
            text += &format!("preimage: x = {}, y = {}\n", preimage.x, preimage.y);
        }
        FiberClassification::Critical { fiber } => {
            let f = fiber_json(cfg, fiber);
            text += &format!("cyclic order: {}\n", f["cyclic_order"].as_str().unwrap_or(""));
            v["fiber"] = f;
        }
        FiberClassification::NonValue => {}
    }
    (v, text)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let seed = cfg.seed;
    match &cli.cmd {
        Cmd::Validate => {
            let r = validate_config(&cfg);
            let mut text = String::new();
            for c in &r.checks {
                text += &format!("{} {} ({:e})\n", if c.passed { "pass" } else { "FAIL" }, c.name, c.value);
            }
            emit(cli, &json!({ "config": cfg, "validation": r, "passed": r.passed() }), &text)?;
            Ok(if r.passed() { 0 } else { 1 })
        }
        Cmd::VerifyAll {
            level,
            figures,
            timings,
        } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let v = verify_all(&cfg, seed, level);
            let report = if *timings {
                v.report.clone()
            } else {
                v.report.without_timings()
            };
            if let Some(dir) = figures {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Failure(2, format!("cannot create {}: {e}", dir.display())))?;
                for (k, svg) in &v.figures {
                    write_file(&dir.join(format!("{}.svg", k.name())), svg)?;
                }
            }
            let mut text = String::new();
            for c in &v.report.checks {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::ReportOnly => "report",
                };
                text += &format!(
                    "{status:6} {:2} {:28} {:>9.0} ms{}\n",
                    c.id,
                    c.name,
                    c.runtime_ms.unwrap_or(0.0),
                    c.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default()
                );
                for m in c.measurements.iter().filter(|m| !m.passes()) {
                    text += &format!("         {} = {:?}, bound {:?}\n", m.name, m.value, m.bound);
                }
            }
            text += &format!("{}\n", if report.passed { "all checks passed" } else { "verification FAILED" });
            let value = serde_json::to_value(&report).expect("report serializes");
            emit(cli, &value, &text)?;
            Ok(if report.passed { 0 } else { 1 })
        }
        Cmd::Invert { angles } => {
            let c = RolledValue::from_angles(angles4(angles));
            let (v, text) = classification_json(&cfg, &c);
            let mut out = json!({ "classification": v["classification"] });
            if let Some(p) = v.get("preimage") {
                out["preimage"] = p.clone();
            }
            emit(cli, &out, &text)?;
            Ok(0)
        }
        Cmd::Classify { angles } => {
            let c = RolledValue::from_angles(angles4(angles));
            let (v, text) = classification_json(&cfg, &c);
            emit(cli, &v, &text)?;
            Ok(0)
        }
        Cmd::FromP { x, y, w } => {
            let atlas = Atlas::new(cfg)?;
            let p = Rp2Point::new(*x, *y, *w)?;
            let c = critical_value_from_p(&atlas, &p)?;
            let (mut v, mut text) = classification_json(&cfg, &c);
            v["p"] = json!(p.coords());
            if p.to_affine().is_some() && !p.is_at_infinity(1e-15) {
                if let Ok(wts) = homothety_weights(&atlas, &p) {
                    v["homothety_weights"] = json!(wts.s);
                }
            }
            text = format!("value: {:?}\n{text}", c.angles());
            if let Ok(word) = cyclic_order(&cfg, &c) {
                v["cyclic_order"] = json!(word.to_string());
            }
            emit(cli, &v, &text)?;
            Ok(0)
        }
        Cmd::Pencil { samples } => {
            let atlas = Atlas::new(cfg)?;
            let p = pencil_model(&atlas, *samples)?;
            let circles = d_circles_check(&cfg, atlas.d)?;
            let pass = p.sigma_ratio < 1e-8 && p.base_match.iter().all(|&m| m < 1e-6);
            let text = format!(
                "sigma3/sigma1 = {:e}\nbase points: {}\nd = {}\nd circle residuals: {:?}\n",
                p.sigma_ratio,
                p.base_points.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(", "),
                atlas.d,
                circles.residuals
            );
            emit(cli, &json!({ "pencil": p, "d": complex(atlas.d), "d_circles": circles, "passed": pass }), &text)?;
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Coincidence { grid } => {
            let atlas = Atlas::new(cfg)?;
            let s = coincidence_study(&atlas, grid.grid())?;
            let loci: Vec<Value> = s
                .loci
                .iter()
                .map(|l| {
                    json!({
                        "pair": [l.pair.0.name(), l.pair.1.name()],
                        "kind": l.kind,
                        "components": l.components,
                        "max_gap": l.max_gap,
                        "lap_closed": l.lap.closed,
                        "points": l.polyline.len(),
                    })
                })
                .collect();
            let vertices: Vec<Value> = s
                .scan
                .vertices
                .iter()
                .map(|v| json!({ "pairs": v.pairs, "q": complex(v.q), "p": v.p.map(complex), "residual": v.residual }))
                .collect();
            let pass = s.loci.len() == 10
                && s.loci.iter().all(|l| l.is_circle())
                && s.scan.triples.is_empty();
            let mut text = String::new();
            for l in &s.loci {
                text += &format!(
                    "{}-{}: {:?}, {} component(s), gap {:.1e}\n",
                    l.pair.0.name(),
                    l.pair.1.name(),
                    l.kind,
                    l.components,
                    l.max_gap
                );
            }
            text += &format!("triple coincidences: {}\narrangement vertices: {}\n", s.scan.triples.len(), s.scan.vertices.len());
            emit(cli, &json!({ "loci": loci, "vertices": vertices, "triples": s.scan.triples, "arrangement": s.arrangement, "passed": pass }), &text)?;
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Monodromy => {
            let atlas = Atlas::new(cfg)?;
            let m = monodromy_report(&atlas)?;
            let mut text = format!("base point p* = {}\n", m.base_point);
            for r in &m.results {
                text += &format!("{}: {:?}\n", r.name, r.permutation.0);
            }
            text += &format!("orbit size {}, transitive {}\n", m.orbit_size, m.transitive);
            let pass = m.transitive && m.identities_hold && m.compositions_failed == 0;
            emit(cli, &serde_json::to_value(&m).expect("report serializes"), &text)?;
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Covering { grid, samples } => {
            let atlas = Atlas::new(cfg)?;
            let s = coincidence_study(&atlas, grid.grid())?;
            let m = monodromy_report(&atlas)?;
            let c = covering_report(&cfg, &s, &m, *samples, seed)?;
            let census = arc_census(&atlas, &s, *samples, seed)?;
            let pass = c.degree == 5
                && c.connected
                && c.boundary_circles == 10
                && c.arrangement.euler() == 1
                && c.euler_cover == c.euler_sixteen;
            let text = format!(
                "degree {}\nconnected {}\nchi(B_Z) = {}\nchi(cover) = {} (1 - 16 = {})\nboundary circles {}\narrangement V={} E={} F={}\narc counts: generic {:?}, on a circle {:?}, at a vertex {:?}\n",
                c.degree, c.connected, c.euler_base, c.euler_cover, c.euler_sixteen, c.boundary_circles,
                c.arrangement.vertices, c.arrangement.edges, c.arrangement.faces,
                census.generic, census.on_circle, census.at_vertex
            );
            emit(cli, &json!({ "covering": c, "arc_census": census, "passed": pass }), &text)?;
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Render {
            figure,
            width,
            height,
            axes,
            samples,
        } => {
            let atlas = Atlas::new(cfg)?;
            let kind = match figure {
                FigureArg::Pencil => FigureKind::Pencil,
                FigureArg::Coincidence => FigureKind::Coincidence,
                FigureArg::CyclicDiagram => FigureKind::CyclicDiagram,
                FigureArg::CoamoebaProjection => FigureKind::CoamoebaProjection,
                FigureArg::AmoebaProjection => FigureKind::AmoebaProjection,
            };
            if axes.iter().any(|&a| a > 3) {
                return Err(Failure(2, "axes must be coordinate indices 0..3".into()));
            }
            let mut spec = FigureSpec::new(kind);
            spec.width = *width;
            spec.height = *height;
            spec.axes = [axes[0], axes[1]];
            spec.samples = *samples;
            let svg = render(&atlas, &spec, seed, None)?;
            match &cli.out {
                Some(path) => write_file(path, &svg)?,
                None => print!("{svg}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("COAMOEBA_ATLAS_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: COAMOEBA_ATLAS_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
