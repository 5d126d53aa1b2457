//! Command-line surface: one subcommand per pipeline stage.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "epitau",
    version,
    about = "Stochastic SIR/SEIR outbreaks: simulation, pairwise-pressure estimation, \
             bootstrap-t intervals, and data-augmented MCMC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one outbreak and emit its case table (and optionally the
    /// full event log).
    Simulate(SimulateArgs),
    /// Mask endpoints of a fully observed case table at the given rates.
    Inject(InjectArgs),
    /// Point estimates of the transmission and removal rates.
    Estimate(EstimateArgs),
    /// Studentized double-bootstrap confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Data-augmented posterior sampling with missing endpoints.
    Mcmc(McmcArgs),
    /// Effective sample size and split R-hat for saved chain traces.
    Diagnose(DiagnoseArgs),
    /// Full simulation study: a (beta x p_missing) grid of coverage cells.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// No latency; infection is the infectious onset.
    Sir,
    /// Fixed incubation delay between exposure and onset.
    Seir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Epidemic model shape shared by every analysis command.
#[derive(Debug, Args)]
pub struct ModelOpts {
    /// Compartment model.
    #[arg(long, value_enum, default_value_t = ModelKind::Sir)]
    pub model: ModelKind,

    /// Erlang shape of the infectious period (1 = exponential).
    #[arg(long, default_value_t = 1)]
    pub m: u32,

    /// Fixed incubation delay; requires --model seir when nonzero.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta: f64,
}

/// Adjustments applied while reading a case table, before any analysis.
#[derive(Debug, Args)]
pub struct IngestOpts {
    /// Added to infection (and exposure) times on read; for example -1 turns
    /// day-of-first-symptoms data into infection times.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub infection_offset: f64,

    /// Added to removal times on read; for example 3 turns day-of-rash data
    /// into removal times.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub removal_offset: f64,

    /// Jitter integer-resolution times with Normal(0, SD) noise, redrawing a
    /// case (up to 100 times) until removal stays after infection. The bare
    /// flag uses SD 0.1.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.1")]
    pub dequantize_sd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Transmission rate (pairwise rate is beta / N).
    #[arg(long)]
    pub beta: f64,

    /// Removal rate of each of the m infectious stages.
    #[arg(long)]
    pub gamma: f64,

    /// Population size N.
    #[arg(long)]
    pub population: usize,

    #[command(flatten)]
    pub model: ModelOpts,

    /// Master seed; identical seeds reproduce the outbreak exactly.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also write the case table to this CSV file.
    #[arg(long)]
    pub cases_out: Option<PathBuf>,

    /// Also write the full event log to this JSON file.
    #[arg(long)]
    pub events_out: Option<PathBuf>,

    /// Stdout format: a JSON report, or the raw case table as CSV.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    /// Fully observed case table (CSV).
    #[arg(long)]
    pub data: PathBuf,

    /// Probability each case loses one endpoint.
    #[arg(long)]
    pub p_missing: f64,

    /// Probability a chosen case loses the infection time (else the removal).
    #[arg(long)]
    pub p_inf_missing: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub ingest: IngestOpts,

    /// Also write the masked table to this CSV file.
    #[arg(long)]
    pub table_out: Option<PathBuf>,

    /// Stdout format: a JSON report, or the masked table as CSV.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Complete-data maximum likelihood (needs every endpoint).
    Mle,
    /// Pairwise pressures replaced by their conditional expectations.
    Tilde,
    /// Missing endpoints filled with the estimated mean stage durations.
    Bar,
    /// Per-susceptible-group transmission rates.
    Group,
    /// Distance-kernel baseline transmission rate.
    Kernel,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Case table (CSV); endpoints may be missing except under --method mle.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, value_enum)]
    pub method: Method,

    /// Population size N (the table holds only the infected).
    #[arg(long)]
    pub population: usize,

    #[command(flatten)]
    pub model: ModelOpts,

    #[command(flatten)]
    pub ingest: IngestOpts,

    /// Seed (consumed only by --dequantize-sd).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Group sizes among the N-1 initially susceptible, as NAME=COUNT;
    /// repeat per group (--method group).
    #[arg(long = "group-size", value_name = "NAME=COUNT")]
    pub group_sizes: Vec<String>,

    /// Exponential distance-kernel decay rate; 0 means no spatial effect
    /// (--method kernel).
    #[arg(long, default_value_t = 0.0)]
    pub kernel_rate: f64,

    /// CSV of x,y coordinates for the N-n never-infected individuals
    /// (--method kernel).
    #[arg(long)]
    pub susceptibles: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Case table (CSV), possibly with missing endpoints.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub population: usize,

    #[command(flatten)]
    pub model: ModelOpts,

    #[command(flatten)]
    pub ingest: IngestOpts,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Outer replicates (the t-statistic sample).
    #[arg(long, default_value_t = 200)]
    pub b_out: usize,

    /// Inner replicates per outer replicate.
    #[arg(long, default_value_t = 20)]
    pub b_in: usize,

    /// Plain replicates for the point estimate's standard error.
    #[arg(long, default_value_t = 100)]
    pub se_reps: usize,

    /// Relative half-width of the replicate size window.
    #[arg(long, default_value_t = 0.1)]
    pub omega: f64,

    /// Interval level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Simulation attempts allowed per conditioned replicate.
    #[arg(long, default_value_t = 1000)]
    pub max_tries: u64,

    /// Masking probability for replicates; defaults to the fraction of
    /// partial cases observed in the input.
    #[arg(long)]
    pub p_missing: Option<f64>,

    /// Probability a masked replicate case loses the infection time;
    /// defaults to the observed fraction.
    #[arg(long)]
    pub p_inf_missing: Option<f64>,

    /// Reproduce the observed missingness counts exactly instead of
    /// redrawing them binomially.
    #[arg(long)]
    pub mirror: bool,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct McmcArgs {
    /// Case table (CSV); missing endpoints are sampled.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub population: usize,

    #[command(flatten)]
    pub model: ModelOpts,

    #[command(flatten)]
    pub ingest: IngestOpts,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Chain length, including burn-in.
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,

    /// Endpoint update attempts per iteration (default: one per missing
    /// endpoint).
    #[arg(long)]
    pub attempts: Option<usize>,

    /// Independent chains, each on its own derived stream.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,

    /// Draws discarded from the front of each chain before summarizing
    /// (default: half).
    #[arg(long)]
    pub burn_in: Option<usize>,

    /// Gamma prior shape on the pairwise transmission rate.
    #[arg(long, default_value_t = 1e-3)]
    pub prior_beta_shape: f64,

    /// Gamma prior rate on the pairwise transmission rate.
    #[arg(long, default_value_t = 1e-3)]
    pub prior_beta_rate: f64,

    /// Gamma prior shape on the removal rate.
    #[arg(long, default_value_t = 1e-3)]
    pub prior_gamma_shape: f64,

    /// Gamma prior rate on the removal rate.
    #[arg(long, default_value_t = 1e-3)]
    pub prior_gamma_rate: f64,

    /// Removal rate used to initialize augmented durations (default: prior
    /// mean).
    #[arg(long)]
    pub init_gamma: Option<f64>,

    /// Write the full chain traces to this JSON file (input to `diagnose`).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Chain trace file written by `mcmc --trace-out`.
    #[arg(long)]
    pub chains: PathBuf,

    /// Draws discarded from the front of each chain.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

/// Every scalar and grid value of the study config can be overridden from
/// the command line; omitted flags keep the file's values.
#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Study configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,

    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the config's output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    /// Override the config's replicate count per cell.
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Override the config's population size.
    #[arg(long)]
    pub population: Option<usize>,

    /// Override the config's true removal rate.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Override the config's Erlang shape.
    #[arg(long)]
    pub m: Option<u32>,

    /// Override the config's incubation delay.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,

    /// Override the config's retention threshold (minimum final size).
    #[arg(long)]
    pub min_size: Option<usize>,

    /// Override the config's per-replicate simulation attempt budget.
    #[arg(long)]
    pub retention_tries: Option<u64>,

    /// Replace the config's transmission-rate grid (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,

    /// Replace the config's masking-probability grid (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub p_missing: Vec<f64>,

    /// Override the config's infection-vs-removal masking split.
    #[arg(long)]
    pub p_inf_missing: Option<f64>,

    /// Override the bootstrap outer replicate count.
    #[arg(long)]
    pub b_out: Option<usize>,

    /// Override the bootstrap inner replicate count.
    #[arg(long)]
    pub b_in: Option<usize>,

    /// Override the bootstrap standard-error replicate count.
    #[arg(long)]
    pub se_reps: Option<usize>,

    /// Override the bootstrap size-window half-width.
    #[arg(long)]
    pub omega: Option<f64>,

    /// Override the bootstrap interval level (1 - alpha).
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Override the bootstrap conditioning attempt budget.
    #[arg(long)]
    pub max_tries: Option<u64>,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

impl StudyArgs {
    /// Fold the flag overrides into a loaded config.
    pub fn apply(&self, cfg: &mut crate::study::StudyConfig) {
        macro_rules! set {
            ($($field:ident => $slot:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $slot = v; })*
            };
        }
        set! {
            seed => cfg.seed,
            replicates => cfg.replicates,
            population => cfg.population,
            gamma => cfg.gamma,
            m => cfg.m,
            delta => cfg.delta,
            min_size => cfg.min_size,
            retention_tries => cfg.retention_tries,
            p_inf_missing => cfg.p_inf_missing,
            b_out => cfg.bootstrap.b_out,
            b_in => cfg.bootstrap.b_in,
            se_reps => cfg.bootstrap.se_reps,
            omega => cfg.bootstrap.omega,
            alpha => cfg.bootstrap.alpha,
            max_tries => cfg.bootstrap.max_tries,
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if !self.beta.is_empty() {
            cfg.beta = self.beta.clone();
        }
        if !self.p_missing.is_empty() {
            cfg.p_missing = self.p_missing.clone();
        }
    }
}
