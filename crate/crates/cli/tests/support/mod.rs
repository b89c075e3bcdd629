#![allow(dead_code)]

use std::path::{Path, PathBuf};

use timoslip_cli::{CliError, RunConfig};

pub fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load(name: &str) -> RunConfig {
    timoslip_cli::parse_config(&bundled(name)).unwrap()
}

pub fn write(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

pub fn parse_text(text: &str) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::from_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Numeric columns of a CSV by header name.
pub fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = head
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines
        .map(|l| l.split(',').nth(i).unwrap().parse().unwrap())
        .collect()
}

pub const MINIMAL: &str = "
[mesh]
interior = 10

[integrator]
dt = 0.01
steps = 20
";
