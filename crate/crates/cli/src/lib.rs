//! Experiment runner behind the `fwlab` binary.

pub mod config;
pub mod pipelines;
pub mod report;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};

use config::ExperimentConfig;
use report::{Check, RunReport};

/// Directory used when neither the command line nor the config names one.
pub fn default_out(config_path: &Path) -> PathBuf {
    let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    PathBuf::from("fwlab-out").join(stem)
}

/// Runs one experiment document and writes `report.json` next to its
/// artifacts.
pub fn run(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(RunReport, PathBuf)> {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::load(config_path)?;
    let seed = seed.unwrap_or(cfg.seed);
    let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| default_out(config_path));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let fields = cfg.compile_fields()?;
    let ctx = pipelines::Ctx { seed, out: &out, fields: &fields };
    let mut outcome = pipelines::dispatch(&cfg, &ctx)?;
    for (i, e) in cfg.expect.iter().enumerate() {
        let m = outcome
            .metrics
            .get(&e.metric)
            .ok_or_else(|| anyhow!("config.expect[{i}].metric: run has no metric `{}`", e.metric))?;
        outcome.checks.push(Check::from_cmp(format!("expect:{}", e.metric), *m, e.value, e.tol, e.cmp));
    }
    outcome.artifacts.push("report.json".into());
    let report = RunReport::new(
        cfg.kind.name(),
        cfg.hash(seed)?,
        seed,
        t0.elapsed().as_secs_f64(),
        outcome.metrics,
        outcome.checks,
        outcome.artifacts,
    )?;
    report.write(&out.join("report.json"))?;
    Ok((report, out))
}

/// Sizes the global rayon pool; `FWLAB_THREADS` wins over the flag.
pub fn configure_threads(flag: Option<usize>) -> Result<()> {
    let env = match std::env::var("FWLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            Some(v.trim().parse::<usize>().map_err(|_| anyhow!("FWLAB_THREADS: not a thread count: {v:?}"))?)
        }
        _ => None,
    };
    if let Some(n) = env.or(flag) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    Ok(())
}
