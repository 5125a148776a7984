//! Command-line interface.
//!
//! Every command writes into its own output directory and leaves a
//! `manifest.json` there whose `args` reproduce the run. Exit codes are
//! listed in [`crate::error`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rootcause_core::extraction::{
    direct_lingam, eel, extract_errors, EelConfig, ExtractionResult, DEFAULT_BUDGET,
};
use rootcause_core::graph::UndirectedGraph;
use rootcause_core::shapley::{
    attribute, AttributionConfig, DEFAULT_MC_SAMPLES, DEFAULT_MC_THRESHOLD,
};
use rootcause_core::stats::{standardize, IndependenceBackend};
use rootcause_core::synth::{generate_model, sample_dataset, GenConfig};

use crate::bench::{parse_estimator, run_benchmark, write_summary, BenchConfig};
use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};
use crate::io::{
    read_dataset, read_json, read_matrix, write_dataset, write_edges, write_json, write_matrix,
    write_model, write_report, ExtractionDoc, PartialStepDoc, ReportDoc, FORMAT_VERSION,
    TARGET_COLUMN,
};
use crate::manifest::{absolute, RunManifest};

pub const MODEL_FILE: &str = "model.json";
pub const DATA_FILE: &str = "data.csv";
pub const HIDDEN_FILE: &str = "hidden_t.csv";
pub const ESTAR_FILE: &str = "estar.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const EXTRACTION_FILE: &str = "extraction.json";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_JSON_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(
    name = "rootcause",
    version,
    about = "Sample-specific root causal analysis with latent confounders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random model and sample a dataset from it.
    Generate(GenerateArgs),
    /// Recover inducing terms and the dependence graph from a dataset.
    Extract(ExtractArgs),
    /// Attribute each sample's diagnosis to the recovered terms.
    Attribute(AttributeArgs),
    /// Run the replicated synthetic benchmark.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    /// Vertices in the graph, counting the target and the latents.
    #[arg(long, default_value_t = 15)]
    pub p: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Fraction of the non-target vertices that are hidden.
    #[arg(long, default_value_t = 0.0)]
    pub latent: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Expected number of neighbours per vertex.
    #[arg(long, default_value_t = 2.0)]
    pub degree: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractMethod {
    /// Extract errors with latents.
    Eel,
    /// Extract errors, assuming no latent confounding.
    Ee,
    /// DirectLiNGAM.
    Dl,
}

impl ExtractMethod {
    fn name(self) -> &'static str {
        match self {
            ExtractMethod::Eel => "eel",
            ExtractMethod::Ee => "ee",
            ExtractMethod::Dl => "dl",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ExtractMethod::Eel)]
    pub method: ExtractMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Largest conditioning set; defaults to one less than the column count.
    #[arg(long)]
    pub max_cond: Option<usize>,
    /// `taustar` or `dcor`.
    #[arg(long, default_value = "taustar")]
    pub backend: String,
    /// Candidate subsets examined before giving up.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Seed for the permutation backend.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Column left out of the extraction.
    #[arg(long, default_value = TARGET_COLUMN)]
    pub target: String,
}

#[derive(Debug, clap::Args)]
pub struct AttributeArgs {
    /// Dataset holding the target column.
    #[arg(long)]
    pub data: PathBuf,
    /// `extraction.json` written by `extract`.
    #[arg(long)]
    pub extraction: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Neighbourhoods larger than this use Monte Carlo.
    #[arg(long, default_value_t = DEFAULT_MC_THRESHOLD)]
    pub mc_threshold: usize,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    /// `knn` or `linear`.
    #[arg(long, default_value = "knn")]
    pub estimator: String,
    /// Neighbours for `knn`; defaults to the square root of the sample size.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = TARGET_COLUMN)]
    pub target: String,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// TOML benchmark configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Extract(a) => extract(&a),
        Command::Attribute(a) => attribute_cmd(&a),
        Command::Bench(a) => bench(&a),
        Command::Replay(a) => replay(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| (*s).to_owned()).collect()
}

fn path_arg(p: &Path) -> String {
    p.display().to_string()
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let out = absolute(&a.out)?;
    let gen = GenConfig {
        p: a.p,
        expected_degree: a.degree,
        latent_fraction: a.latent,
        seed: a.seed,
    };
    gen.validate().map_err(|e| Error::Usage(e.to_string()))?;
    if a.n == 0 {
        return Err(Error::Usage("n must be positive".into()));
    }
    let model = generate_model(&gen)?;
    let data = sample_dataset(&model, a.n, a.seed)?;
    let hidden = data
        .hidden_t
        .as_ref()
        .expect("synthetic data keeps its hidden terms");
    create_dir(&out)?;
    write_model(&out.join(MODEL_FILE), &model)?;
    write_dataset(&out.join(DATA_FILE), &data)?;
    write_matrix(&out.join(HIDDEN_FILE), &model.term_names(), hidden)?;

    let mut m = RunManifest::new(
        "generate",
        [
            strings(["generate", "--p"]),
            vec![a.p.to_string(), "--n".into(), a.n.to_string()],
            vec![
                "--latent".into(),
                a.latent.to_string(),
                "--seed".into(),
                a.seed.to_string(),
            ],
            vec![
                "--degree".into(),
                a.degree.to_string(),
                "--out".into(),
                path_arg(&out),
            ],
        ]
        .concat(),
    );
    m.outputs = strings([MODEL_FILE, DATA_FILE, HIDDEN_FILE]);
    m.param("p", a.p);
    m.param("n", a.n);
    m.param("latent_fraction", a.latent);
    m.param("expected_degree", a.degree);
    m.param("seed", a.seed);
    m.param("q", model.q());
    m.param("m", model.m());
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write(&out)
}

fn parse_backend(name: &str, seed: u64) -> Result<IndependenceBackend> {
    IndependenceBackend::from_name(name, seed)
        .ok_or_else(|| Error::Usage(format!("unknown backend '{name}'")))
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let start = Instant::now();
    let data_path = absolute(&a.data)?;
    let out = absolute(&a.out)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!(
            "alpha must lie in (0, 1), got {}",
            a.alpha
        )));
    }
    let config = EelConfig {
        alpha: a.alpha,
        max_cond: a.max_cond,
        budget: a.budget,
        backend: parse_backend(&a.backend, a.seed)?,
    };
    let (names, observed, _) = read_dataset(&data_path, &a.target)?;
    let standardized = standardize(&observed)?;
    let result: ExtractionResult = match a.method {
        ExtractMethod::Eel => eel(&standardized.data, &config)?,
        ExtractMethod::Ee => extract_errors(&standardized.data, &config)?,
        ExtractMethod::Dl => direct_lingam(&standardized.data)?,
    };
    create_dir(&out)?;
    write_matrix(&out.join(ESTAR_FILE), &names, &result.estar)?;
    let edges = result.dep_graph.edges();
    write_edges(&out.join(EDGES_FILE), &names, &edges)?;
    let doc = ExtractionDoc {
        format_version: FORMAT_VERSION,
        method: a.method.name().into(),
        backend: a.backend.clone(),
        alpha: a.alpha,
        max_cond: a.max_cond,
        budget: a.budget,
        seed: a.seed,
        names,
        estar: ESTAR_FILE.into(),
        edges,
        partial_log: result
            .partial_log
            .iter()
            .map(PartialStepDoc::from)
            .collect(),
        max_cond_reached: result.max_cond_reached,
        budget_exceeded: result.budget_exceeded,
        candidates: result.candidates,
        tests: result.tests,
        standardization_means: standardized.means,
        standardization_scales: standardized.scales,
    };
    write_json(&out.join(EXTRACTION_FILE), &doc)?;

    let mut args = vec![
        "extract".into(),
        "--data".into(),
        path_arg(&data_path),
        "--out".into(),
        path_arg(&out),
        "--method".into(),
        a.method.name().into(),
        "--alpha".into(),
        a.alpha.to_string(),
    ];
    if let Some(c) = a.max_cond {
        args.extend(["--max-cond".into(), c.to_string()]);
    }
    args.extend(strings(["--backend", &a.backend, "--budget"]));
    args.extend([a.budget.to_string(), "--seed".into(), a.seed.to_string()]);
    args.extend(strings(["--target", &a.target]));
    let mut m = RunManifest::new("extract", args);
    m.input(&data_path)?;
    m.outputs = strings([ESTAR_FILE, EDGES_FILE, EXTRACTION_FILE]);
    m.param("method", a.method.name());
    m.param("alpha", a.alpha);
    m.param("max_cond", a.max_cond);
    m.param("backend", &a.backend);
    m.param("budget", a.budget);
    m.param("seed", a.seed);
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write(&out)?;
    if result.budget_exceeded {
        return Err(Error::Budget(format!(
            "candidate budget of {} exhausted; partial results written to {}",
            a.budget,
            out.display()
        )));
    }
    Ok(())
}

fn attribute_cmd(a: &AttributeArgs) -> Result<()> {
    let start = Instant::now();
    let data_path = absolute(&a.data)?;
    let extraction_path = absolute(&a.extraction)?;
    let out = absolute(&a.out)?;
    let mut estimator = parse_estimator(&a.estimator)?;
    if let Some(k) = a.k {
        match &mut estimator {
            rootcause_core::shapley::EstimatorKind::Knn(knn) if k > 0 => knn.k = Some(k),
            _ => {
                return Err(Error::Usage(
                    "--k needs a positive value and the knn estimator".into(),
                ))
            }
        }
    }
    if a.mc_samples == 0 {
        return Err(Error::Usage("mc-samples must be positive".into()));
    }
    let config = AttributionConfig {
        mc_threshold: a.mc_threshold,
        mc_samples: a.mc_samples,
        seed: a.seed,
        estimator,
    };

    let doc: ExtractionDoc = read_json(&extraction_path)?;
    let estar_path = extraction_path
        .parent()
        .map_or_else(|| PathBuf::from(&doc.estar), |d| d.join(&doc.estar));
    let (header, estar) = read_matrix(&estar_path)?;
    if header != doc.names {
        return Err(Error::format(
            &estar_path,
            "columns do not match the extraction metadata",
        ));
    }
    let q = estar.ncols();
    if let Some(&(i, j)) = doc.edges.iter().find(|&&(i, j)| i >= q || j >= q || i == j) {
        return Err(Error::format(
            &extraction_path,
            format!("edge ({i}, {j}) does not fit {q} columns"),
        ));
    }
    let graph = UndirectedGraph::from_edges(q, &doc.edges);
    let (_, _, target) = read_dataset(&data_path, &a.target)?;
    let target =
        target.ok_or_else(|| Error::format(&data_path, format!("no '{}' column", a.target)))?;
    if target.len() != estar.nrows() {
        return Err(Error::format(
            &data_path,
            format!(
                "{} rows but the extraction has {}",
                target.len(),
                estar.nrows()
            ),
        ));
    }
    let report = attribute(&estar, &target, &graph, &config)?;
    create_dir(&out)?;
    write_report(&out.join(REPORT_CSV_FILE), &doc.names, &report)?;
    write_json(
        &out.join(REPORT_JSON_FILE),
        &ReportDoc::new(&report, &doc.names, REPORT_CSV_FILE),
    )?;

    let mut args = vec![
        "attribute".into(),
        "--data".into(),
        path_arg(&data_path),
        "--extraction".into(),
        path_arg(&extraction_path),
        "--out".into(),
        path_arg(&out),
        "--mc-threshold".into(),
        a.mc_threshold.to_string(),
        "--mc-samples".into(),
        a.mc_samples.to_string(),
        "--estimator".into(),
        a.estimator.clone(),
    ];
    if let Some(k) = a.k {
        args.extend(["--k".into(), k.to_string()]);
    }
    args.extend([
        "--seed".into(),
        a.seed.to_string(),
        "--target".into(),
        a.target.clone(),
    ]);
    let mut m = RunManifest::new("attribute", args);
    m.input(&data_path)?;
    m.input(&extraction_path)?;
    m.input(&estar_path)?;
    m.outputs = strings([REPORT_CSV_FILE, REPORT_JSON_FILE]);
    m.param("mc_threshold", a.mc_threshold);
    m.param("mc_samples", a.mc_samples);
    m.param("estimator", config.estimator.name());
    m.param("k", a.k);
    m.param("seed", a.seed);
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write(&out)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let start = Instant::now();
    let config_path = absolute(&a.config)?;
    let out = absolute(&a.out)?;
    let config = BenchConfig::read(&config_path)?;
    let threads = config.threads()?;
    let summary = run_benchmark(&config)?;
    create_dir(&out)?;
    let outputs = write_summary(&out, &summary)?;
    let mut m = RunManifest::new(
        "bench",
        vec![
            "bench".into(),
            "--config".into(),
            path_arg(&config_path),
            "--out".into(),
            path_arg(&out),
        ],
    );
    m.input(&config_path)?;
    m.outputs = outputs;
    m.param("config", &config);
    m.param("parallelism", threads);
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write(&out)
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    let args = manifest.args_with_output(&absolute(&a.out)?)?;
    if args.first().map(String::as_str) == Some("replay") {
        return Err(Error::Usage("cannot replay a replay".into()));
    }
    let cli = Cli::try_parse_from(std::iter::once("rootcause".to_owned()).chain(args))
        .map_err(|e| Error::format(&a.manifest, e.to_string().trim()))?;
    execute(cli.command)
}
