//! Default table commands must reproduce the committed CSV files byte for byte.
//! Regenerate with `bcd <command> --out tests/golden/<file>` after an
//! intentional change.

use std::path::PathBuf;
use std::process::Command;

fn check(command: &str, file: &str) {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", file]
        .iter()
        .collect();
    let expected = std::fs::read(&path).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bcd"))
        .arg(command)
        .output()
        .unwrap();
    assert!(out.status.success());
    if out.stdout != expected {
        panic!(
            "{command} differs from {}:\n{}",
            path.display(),
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn table1_golden() {
    check("threshold", "table1.csv");
}

#[test]
fn table2_golden() {
    check("table2", "table2.csv");
}

#[test]
fn table3_golden() {
    check("table3", "table3.csv");
}
