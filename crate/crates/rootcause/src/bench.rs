//! Replicated synthetic benchmark.
//!
//! A benchmark is a grid of cells (latent fraction x sample size), each run
//! for a number of replicates. Every replicate derives its seeds from the
//! master seed and its `(cell, replicate)` index, so results do not depend on
//! the thread count or on scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rootcause_core::eval::{run_replicate, GroundTruthConfig, ReplicateConfig, GROUND_TRUTH_DRAWS};
use rootcause_core::extraction::{EelConfig, DEFAULT_BUDGET};
use rootcause_core::shapley::{
    AttributionConfig, EstimatorKind, Knn, DEFAULT_MC_SAMPLES, DEFAULT_MC_THRESHOLD,
    MAX_EXACT_NEIGHBORHOOD,
};
use rootcause_core::stats::IndependenceBackend;
use rootcause_core::synth::GenConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{format_real, write_json, write_text, FORMAT_VERSION};

/// Environment variable that overrides the configured thread count.
pub const PARALLELISM_ENV: &str = "ROOTCAUSE_PARALLELISM";

pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "table.csv";
pub const REPLICATES_FILE: &str = "replicates.csv";

/// Benchmark settings, read from a TOML file with these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub latent_fractions: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default = "default_mc_threshold")]
    pub mc_threshold: usize,
    #[serde(default)]
    pub max_cond: Option<usize>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_degree")]
    pub expected_degree: f64,
    #[serde(default = "default_ground_truth_draws")]
    pub ground_truth_draws: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_backend() -> String {
    "taustar".into()
}
fn default_estimator() -> String {
    "knn".into()
}
fn default_mc_threshold() -> usize {
    DEFAULT_MC_THRESHOLD
}
fn default_p() -> usize {
    GenConfig::default().p
}
fn default_degree() -> f64 {
    GenConfig::default().expected_degree
}
fn default_ground_truth_draws() -> usize {
    GROUND_TRUTH_DRAWS
}
fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

/// Parses an estimator name: `knn`, `knn:<k>` or `linear`.
pub fn parse_estimator(name: &str) -> Result<EstimatorKind> {
    match name {
        "knn" => Ok(EstimatorKind::Knn(Knn { k: None })),
        "linear" => Ok(EstimatorKind::Linear),
        _ => name
            .strip_prefix("knn:")
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k > 0)
            .map(|k| EstimatorKind::Knn(Knn { k: Some(k) }))
            .ok_or_else(|| Error::Usage(format!("unknown estimator '{name}'"))),
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| Error::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.latent_fractions.is_empty() || self.sample_sizes.is_empty() {
            return usage("latent_fractions and sample_sizes must be non-empty".into());
        }
        if self.replicates == 0 {
            return usage("replicates must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return usage(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.parallelism == Some(0) {
            return usage("parallelism must be positive".into());
        }
        if IndependenceBackend::from_name(&self.backend, 0).is_none() {
            return usage(format!("unknown backend '{}'", self.backend));
        }
        parse_estimator(&self.estimator)?;
        if self.ground_truth_draws == 0 || self.mc_samples == 0 {
            return usage("ground_truth_draws and mc_samples must be positive".into());
        }
        for &l in &self.latent_fractions {
            self.template(l, 1000)
                .generator
                .validate()
                .map_err(|e| Error::Usage(e.to_string()))?;
        }
        Ok(())
    }

    /// Replicate settings for one cell, before seeds are derived.
    pub fn template(&self, latent_fraction: f64, n: usize) -> ReplicateConfig {
        let estimator = parse_estimator(&self.estimator).unwrap_or_default();
        let attribution = AttributionConfig {
            mc_threshold: self.mc_threshold,
            mc_samples: self.mc_samples,
            seed: 0,
            estimator,
        };
        ReplicateConfig {
            generator: GenConfig {
                p: self.p,
                expected_degree: self.expected_degree,
                latent_fraction,
                seed: 0,
            },
            n,
            eel: EelConfig {
                alpha: self.alpha,
                max_cond: self.max_cond,
                budget: DEFAULT_BUDGET,
                backend: IndependenceBackend::from_name(&self.backend, 0).unwrap_or_default(),
            },
            attribution,
            ground_truth: GroundTruthConfig {
                draws: self.ground_truth_draws,
                seed: 0,
                attribution: AttributionConfig {
                    mc_threshold: MAX_EXACT_NEIGHBORHOOD,
                    ..attribution
                },
            },
        }
    }

    /// Cells in output order: latent fraction major, sample size minor.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        self.latent_fractions
            .iter()
            .flat_map(|&l| self.sample_sizes.iter().map(move |&n| (l, n)))
            .collect()
    }

    /// Thread count: the environment override, then the config, then all cores.
    pub fn threads(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(PARALLELISM_ENV) {
            return v
                .trim()
                .parse()
                .ok()
                .filter(|&t: &usize| t > 0)
                .ok_or_else(|| {
                    Error::Usage(format!("{PARALLELISM_ENV}='{v}' is not a positive integer"))
                });
        }
        Ok(self
            .parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
    }
}

/// One replicate's outcome. Metrics are absent when the replicate failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    /// Mean RBO over scored samples; absent when no sample had a true root cause.
    pub rbo: Option<f64>,
    pub mse: Option<f64>,
    pub rbo_scored: usize,
    pub rbo_skipped: usize,
    pub q: usize,
    pub m: usize,
    pub estimated_edges: usize,
    pub oracle_edges: usize,
    pub budget_exceeded: bool,
    pub error: Option<String>,
    /// Not serialized, so summaries of identical runs compare equal.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub latent_fraction: f64,
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    /// Means over replicates with a value.
    pub mean_rbo: Option<f64>,
    pub mean_mse: Option<f64>,
    #[serde(skip)]
    pub mean_runtime_seconds: f64,
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub format_version: u32,
    pub seed: u64,
    pub config: BenchConfig,
    pub cells: Vec<CellSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn run_one(cfg: &ReplicateConfig, replicate: usize) -> ReplicateRecord {
    let start = Instant::now();
    let outcome = run_replicate(cfg);
    let runtime_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => ReplicateRecord {
            replicate,
            rbo: (o.rbo.scored > 0).then_some(o.rbo.mean),
            mse: Some(o.mse),
            rbo_scored: o.rbo.scored,
            rbo_skipped: o.rbo.skipped,
            q: o.q,
            m: o.m,
            estimated_edges: o.estimated_edges,
            oracle_edges: o.oracle_edges,
            budget_exceeded: o.budget_exceeded,
            error: None,
            runtime_seconds,
        },
        Err(e) => ReplicateRecord {
            replicate,
            rbo: None,
            mse: None,
            rbo_scored: 0,
            rbo_skipped: 0,
            q: 0,
            m: 0,
            estimated_edges: 0,
            oracle_edges: 0,
            budget_exceeded: false,
            error: Some(e.to_string()),
            runtime_seconds,
        },
    }
}

/// Runs every replicate of every cell on a pool of `config.threads()` workers.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkSummary> {
    config.validate()?;
    let cells = config.cells();
    let jobs: Vec<(usize, usize, ReplicateConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &(l, n))| {
            let template = config.template(l, n);
            (0..config.replicates).map(move |r| {
                let cfg =
                    ReplicateConfig::for_replicate(&template, config.seed, &[c as u64, r as u64]);
                (c, r, cfg)
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads()?)
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    let records: Vec<(usize, ReplicateRecord)> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(c, r, cfg)| (*c, run_one(cfg, *r)))
            .collect()
    });
    let mut per_cell: Vec<Vec<ReplicateRecord>> = vec![Vec::new(); cells.len()];
    for (c, record) in records {
        per_cell[c].push(record);
    }
    let cells = cells
        .into_iter()
        .zip(per_cell)
        .map(|((latent_fraction, n), records)| CellSummary {
            latent_fraction,
            n,
            replicates: records.len(),
            failures: records.iter().filter(|r| r.error.is_some()).count(),
            mean_rbo: mean(records.iter().filter_map(|r| r.rbo)),
            mean_mse: mean(records.iter().filter_map(|r| r.mse)),
            mean_runtime_seconds: mean(records.iter().map(|r| r.runtime_seconds)).unwrap_or(0.0),
            records,
        })
        .collect();
    Ok(BenchmarkSummary {
        format_version: FORMAT_VERSION,
        seed: config.seed,
        config: config.clone(),
        cells,
    })
}

fn optional(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

/// Header of the per-cell table.
pub const TABLE_HEADER: &str =
    "latent_fraction,n,replicates,failures,mean_rbo,mean_mse,mean_runtime_seconds";

/// Header of the per-replicate table.
pub const REPLICATES_HEADER: &str = "latent_fraction,n,replicate,rbo,mse,rbo_scored,rbo_skipped,q,m,estimated_edges,oracle_edges,budget_exceeded,runtime_seconds,error";

pub fn table_csv(summary: &BenchmarkSummary) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for c in &summary.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_real(c.latent_fraction),
            c.n,
            c.replicates,
            c.failures,
            optional(c.mean_rbo),
            optional(c.mean_mse),
            format_real(c.mean_runtime_seconds)
        )
        .expect("writing to a string");
    }
    out
}

pub fn replicates_csv(summary: &BenchmarkSummary) -> String {
    let mut out = format!("{REPLICATES_HEADER}\n");
    for c in &summary.cells {
        for r in &c.records {
            let error = r.error.as_deref().unwrap_or("").replace('"', "'");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},\"{error}\"",
                format_real(c.latent_fraction),
                c.n,
                r.replicate,
                optional(r.rbo),
                optional(r.mse),
                r.rbo_scored,
                r.rbo_skipped,
                r.q,
                r.m,
                r.estimated_edges,
                r.oracle_edges,
                u8::from(r.budget_exceeded),
                format_real(r.runtime_seconds),
            )
            .expect("writing to a string");
        }
    }
    out
}

/// Writes the summary JSON and both tables into `dir`; returns the file names.
pub fn write_summary(dir: &Path, summary: &BenchmarkSummary) -> Result<Vec<String>> {
    write_json(&dir.join(SUMMARY_FILE), summary)?;
    write_text(&dir.join(TABLE_FILE), &table_csv(summary))?;
    write_text(&dir.join(REPLICATES_FILE), &replicates_csv(summary))?;
    Ok([SUMMARY_FILE, TABLE_FILE, REPLICATES_FILE]
        .map(str::to_owned)
        .to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = BenchConfig::from_toml(
            "latent_fractions = [0.1]\nsample_sizes = [500]\nreplicates = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.p, 15);
        assert_eq!(cfg.backend, "taustar");
        assert_eq!(cfg.cells(), [(0.1, 500)]);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for text in [
            "latent_fractions = [0.1]\nsample_sizes = [500]\nreplicates = 0\n",
            "latent_fractions = [0.1]\nsample_sizes = [500]\nreplicates = 1\nbogus = 3\n",
            "latent_fractions = [0.1]\nsample_sizes = [500]\nreplicates = 1\nbackend = \"x\"\n",
            "latent_fractions = [1.5]\nsample_sizes = [500]\nreplicates = 1\n",
        ] {
            let err = BenchConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Usage(_)), "{text}: {err}");
        }
    }

    #[test]
    fn estimator_names() {
        assert_eq!(parse_estimator("knn").unwrap().name(), "knn");
        assert_eq!(
            parse_estimator("knn:7").unwrap(),
            EstimatorKind::Knn(Knn { k: Some(7) })
        );
        assert_eq!(parse_estimator("linear").unwrap(), EstimatorKind::Linear);
        assert!(parse_estimator("knn:0").is_err());
        assert!(parse_estimator("tree").is_err());
    }
}
