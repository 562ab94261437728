//! One line per acceptance criterion, computed from a quick-level
//! `verify_all` run on the default configuration. Criterion 11 also
//! compares two independent runs byte for byte.

use coamoeba_atlas::plane::PlaneConfig;
use coamoeba_atlas::report::{verify_all, Check, Level, Status, Value};
use std::process::ExitCode;
use std::time::Instant;

fn show(v: &Value) -> String {
    match v {
        Value::Real(x) => format!("{x:.3e}"),
        Value::Integer(n) => n.to_string(),
        Value::Integers(ns) => format!("{ns:?}"),
        Value::Flag(b) => b.to_string(),
        Value::Text(s) => s.clone(),
    }
}

fn line(c: &Check, extra: Option<(bool, String)>) -> bool {
    let (ok_extra, note) = extra.unwrap_or((true, String::new()));
    let ok = c.status == Status::Pass && ok_extra;
    let ms: Vec<String> = c
        .measurements
        .iter()
        .filter(|m| m.bound.is_some())
        .map(|m| format!("{}={}", m.name, show(&m.value)))
        .collect();
    println!(
        "criterion {:2} {:<26} {}  [{}]{}{}",
        c.id,
        c.name,
        if ok { "PASS" } else { "FAIL" },
        ms.join(" "),
        note,
        c.error.as_ref().map(|e| format!(" error: {e}")).unwrap_or_default(),
    );
    ok
}

fn main() -> ExitCode {
    let cfg = PlaneConfig::default();
    let seed = cfg.seed;

    let t = Instant::now();
    let first = verify_all(&cfg, seed, Level::Quick);
    let elapsed = t.elapsed().as_secs_f64();
    let second = verify_all(&cfg, seed, Level::Quick);

    let json_same = first.report.without_timings().to_json() == second.report.without_timings().to_json();
    let svg_same = first.figures.len() == 5 && first.figures == second.figures;

    let mut all = true;
    for c in &first.report.checks {
        let extra = match c.id {
            1 => {
                let ms = c.runtime_ms.unwrap_or(f64::INFINITY);
                Some((ms < 5000.0, format!(" runtime={ms:.0}ms")))
            }
            11 => Some((
                json_same && svg_same,
                format!(" rerun_json_identical={json_same} rerun_svgs_identical={svg_same}"),
            )),
            _ => None,
        };
        all &= line(c, extra);
    }
    if first.report.checks.len() != 11 {
        println!("expected 11 checks, found {}", first.report.checks.len());
        all = false;
    }
    println!("quick suite wall time {elapsed:.1}s (includes the thread-pool rerun)");
    println!("acceptance: {}", if all { "all criteria pass" } else { "FAILURES" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
