#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BLESS_ENV: &str = "TRLLM_BLESS";

pub fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn bundled(rel: &str) -> PathBuf {
    repo("data/bundled").join(rel)
}

/// Runs the binary with `args`; logging is silenced so stderr carries only
/// errors and reports.
pub fn trllm<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_trllm"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("TRLLM_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn golden(name: &str, actual: &[u8]) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name);
    if std::env::var_os(BLESS_ENV).is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (run with {BLESS_ENV}=1 to create)", path.display()));
    assert!(
        expected == actual,
        "{} differs\n--- actual\n{}",
        path.display(),
        String::from_utf8_lossy(actual)
    );
}
