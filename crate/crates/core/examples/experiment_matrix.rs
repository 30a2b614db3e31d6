//! Runs every entry of a TOML experiment file, as `branchstop run` does.
//!
//! ```text
//! cargo run --example experiment_matrix -- crates/core/examples/experiments.toml
//! ```

use std::path::PathBuf;

use branchstop::cli::{run, ExperimentFile, OutputFormat};

fn main() -> branchstop::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/experiments.toml")));
    let file = ExperimentFile::load(&path)?;
    for spec in &file.run {
        let report = run(spec)?;
        println!("# {:?}: {} rows, passed {}", spec.command, report.rows.len(), report.passed());
        let text = report.render(OutputFormat::Csv)?;
        for line in String::from_utf8_lossy(&text).lines().take(4) {
            println!("  {line}");
        }
    }
    Ok(())
}
