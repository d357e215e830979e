#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use trllm_core::scene::{load_scene, Scene};
use trllm_core::trajectory::Trajectory;

/// Set to rewrite golden files instead of comparing against them.
pub const BLESS_ENV: &str = "TRLLM_BLESS";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn scene(name: &str) -> Scene {
    load_scene(&fixture(name)).unwrap()
}

pub fn trajectory(name: &str) -> Trajectory {
    Trajectory::load_csv(&fixture(name)).unwrap()
}

/// Compares `actual` with `tests/fixtures/golden/<name>`.
pub fn golden(name: &str, actual: &[u8]) {
    let path = fixture("golden").join(name);
    if std::env::var_os(BLESS_ENV).is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (run with {BLESS_ENV}=1 to create)", path.display()));
    if expected != actual {
        match (std::str::from_utf8(&expected), std::str::from_utf8(actual)) {
            (Ok(e), Ok(a)) => panic!("{} differs\n--- expected\n{e}\n--- actual\n{a}", path.display()),
            _ => panic!("{} differs ({} vs {} bytes)", path.display(), expected.len(), actual.len()),
        }
    }
}
