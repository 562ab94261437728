use coamoeba_atlas::plane::PlaneConfig;
use coamoeba_atlas::report::{verify_all, Level, Status, VerificationReport};
use num_complex::Complex64;

// Nothing in the pipeline is tuned to the default plane: the whole quick
// suite must also pass on an unrelated generic choice of a and k.
#[test]
fn quick_suite_passes_on_another_generic_plane() {
    let cfg = PlaneConfig::new(Complex64::new(0.4, -1.1), Complex64::new(0.8, -0.9));
    let v = verify_all(&cfg, 11, Level::Quick);
    let failed: Vec<_> = v.report.checks.iter().filter(|c| c.status == Status::Fail).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert!(v.report.passed);
    assert_eq!(v.figures.len(), 5);
    let back = VerificationReport::from_json(&v.report.to_json()).unwrap();
    assert_eq!(back, v.report);
}
