use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Runs the binary against `run_dir` with the small fixture config.
pub fn semhash(run_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semhash"))
        .arg("--config")
        .arg(fixture("small.conf"))
        .arg("--set")
        .arg(format!("corpus.path={}", fixture("corpus40.jsonl").display()))
        .arg("--set")
        .arg(format!("run.dir={}", run_dir.display()))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
