//! Runs every acceptance criterion and prints one pass/fail line each.

use sbm_cli::validate::{Suite, CRITERIA};
use std::io::Write;

// Written to stderr directly so the lines survive libtest's output capture.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    let ids: Vec<u8> = CRITERIA.iter().map(|(id, _)| *id).collect();
    // libtest has already written "test acceptance ... " without a newline.
    report("");
    let results = Suite::new().run(&ids, |r| report(&r.line()));
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    report(&format!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
