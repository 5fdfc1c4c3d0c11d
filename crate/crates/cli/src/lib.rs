//! Scenario runner for the jet-field verification suites.

pub mod config;
pub mod report;
pub mod suites;

use std::time::Instant;

use config::{ConfigError, ScenarioConfig};
use report::{Report, SuiteReport};
use suites::{run_suite, Context};

/// Run every suite of `cfg` on the current rayon pool.
pub fn run(cfg: &ScenarioConfig) -> Result<Report, ConfigError> {
    let ctx = Context::new(cfg)?;
    let mut suites = Vec::with_capacity(cfg.suites.len());
    for &suite in &cfg.suites {
        let start = Instant::now();
        let mut rep = SuiteReport::new(suite.name());
        if let Err(e) = run_suite(&ctx, suite, &mut rep) {
            rep.fail("error", format!("{e:#}"));
        }
        rep.summarize(cfg.grid.n);
        rep.wall_time = start.elapsed();
        suites.push(rep);
    }
    let pass = suites.iter().all(|s| s.pass);
    Ok(Report { config: cfg.clone(), suites, pass })
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ScenarioConfig, threads: usize) -> Result<Report, ConfigError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| run(cfg))
}
