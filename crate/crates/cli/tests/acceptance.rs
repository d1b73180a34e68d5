//! The acceptance suite on the shipped configuration. Prints one line per
//! criterion to stderr.

use std::io::Write;

use bergeo_cli::acceptance::{run_suite, NAMES};
use bergeo_cli::commands::Ctx;
use bergeo_cli::config::Config;
use bergeo_cli::exec_from_env;

/// Criteria known to fail at the pinned tolerances. The global Harnack
/// bound with constant 1/8 is violated on the dilation and bump-bump
/// pairs; constant 1 holds with a margin of order 1e-3 on the dilation.
const EXPECTED_FAILURES: &[u8] = &[11];

#[test]
fn acceptance() {
    let cfg = Config::load(None).unwrap();
    cfg.validate().unwrap();
    let (exec, _) = exec_from_env().unwrap();
    let ctx = Ctx::new(&cfg, exec).unwrap();
    let results = run_suite(&ctx);
    assert_eq!(results.len(), NAMES.len());
    // straight to the stream so the lines survive libtest's capture
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for c in &results {
        writeln!(err, "{} ({:.1} s)", c.line(), c.seconds).unwrap();
    }
    let passed = results.iter().filter(|c| c.passed()).count();
    writeln!(err, "{passed}/{} criteria pass", results.len()).unwrap();
    drop(err);

    for c in &results {
        if EXPECTED_FAILURES.contains(&c.id) {
            assert!(!c.passed(), "criterion {} now passes; update the expected failures", c.id);
            assert!(c.error.is_none(), "criterion {} errored: {:?}", c.id, c.error);
        } else {
            assert!(c.passed(), "{}", c.line());
        }
    }
}
