use std::path::Path;

use landau::config::RunConfig;
use landau::run::run;

// Final-state values of configs/reference.toml, recorded at first build.
const MASS_T: f64 = 1.37362469114548507e1;
const SECOND_MOMENT_T: f64 = 3.04628299732612930e1;
const ENTROPY_T: f64 = -2.42379932031601726e1;
const DISSIPATION_T: f64 = 6.43930215764114910e-1;
const MAX_U_T: f64 = 6.27048376222114068e-1;
const SECOND_MOMENT_0: f64 = 2.83815425884561954e1;

#[test]
fn reference_configuration_is_stable() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { output_dir: tmp.path().to_path_buf(), ..RunConfig::load(&path).unwrap() };
    let s = run(&cfg, path.parent().unwrap()).unwrap();
    assert!(s.complete && s.all_audits_passed, "{:?}", s.failures);
    for name in ["entropy_scheme", "entropy_kernel", "entropy_chain"] {
        assert_eq!(s.audits[name].failures, 0, "{name}");
        assert_eq!(s.audits[name].passes, 16, "{name}");
    }
    let d = &s.final_diagnostics;
    let close = |a: f64, b: f64| (a / b - 1.0).abs() < 1e-8;
    assert!(close(d.mass, MASS_T), "{:.17e}", d.mass);
    assert!(close(d.second_moment, SECOND_MOMENT_T), "{:.17e}", d.second_moment);
    assert!(close(d.entropy, ENTROPY_T), "{:.17e}", d.entropy);
    assert!(close(d.dissipation, DISSIPATION_T), "{:.17e}", d.dissipation);
    assert!(close(d.max_u, MAX_U_T), "{:.17e}", d.max_u);
    assert!(close(s.max_second_moment_ratio * SECOND_MOMENT_0, SECOND_MOMENT_T));
    let m = s.moser.expect("moser report");
    assert!(m.measured_sup <= m.predicted);
    assert!(s.poincare.is_some());
}
