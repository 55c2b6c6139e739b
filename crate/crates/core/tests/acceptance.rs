//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.
//!
//! Runs without the libtest harness so the per-criterion lines are always printed.
//! `ACCEPTANCE_SEED` overrides the default seed.

use std::process::ExitCode;
use std::time::Instant;

use cran_duplex::cli::DEFAULT_SEED;
use cran_duplex::validation::{run_criterion, ValidationConfig, CRITERIA};

fn main() -> ExitCode {
    let seed = std::env::var("ACCEPTANCE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED);
    let cfg = ValidationConfig::new(seed);
    println!("acceptance suite, seed {seed}, budget {}x{}", cfg.budget.n_spatial, cfg.budget.n_fading);
    let start = Instant::now();
    let mut failed = Vec::new();
    for id in CRITERIA {
        let report = run_criterion(id, &cfg);
        println!("{}", report.summary());
        if !report.passed() {
            for c in report.checks.iter().filter(|c| !c.passed) {
                println!("    failed check: {} observed {} reference {} ({})", c.name, c.observed, c.reference, c.rule);
            }
            if let Some(e) = &report.error {
                println!("    error: {e}");
            }
            failed.push(id);
        }
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        CRITERIA.len() - failed.len(),
        CRITERIA.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
