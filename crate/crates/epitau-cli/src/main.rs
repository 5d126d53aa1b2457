//! `epitau`: simulate partially observed epidemics, estimate their rates,
//! and quantify uncertainty.
//!
//! Every command prints one document to stdout — a JSON envelope with the
//! configuration and seed baked in, or a CSV table under `--output csv` —
//! and reports failures as JSON on stderr with an exit code that separates
//! configuration mistakes (2), data problems (3), and conditional-simulation
//! failures (4).

mod args;
mod report;
mod study;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;
use epitau::bootstrap::{bootstrap_t, BootstrapConfig, Reinjection};
use epitau::diagnostics::{ess, split_rhat};
use epitau::error::Error;
use epitau::estimate::{
    complete_count, impute_beta_bar, impute_beta_tilde, impute_beta_tilde_group,
    impute_beta_tilde_kernel, mle_beta, mle_beta_group, mle_beta_kernel, mle_gamma, BetaEstimate,
};
use epitau::mcmc::{run_chains, Chain, McmcConfig, PriorSpec};
use epitau::model::{KernelSpec, RateModel};
use epitau::observe::{inject_missingness, realized_counts};
use epitau::simulate::{simulate_seir_het, HomogeneousRates};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    BootstrapArgs, Cli, Command, DiagnoseArgs, EstimateArgs, InjectArgs, IngestOpts, McmcArgs,
    Method, ModelKind, ModelOpts, OutputFormat, SimulateArgs, StudyArgs,
};
use crate::report::{csv_string, envelope, fmt, render_json};

/// Failures sorted by whose fault they are; drives the exit code and the
/// `kind` field of the stderr error JSON.
#[derive(Debug)]
enum CliError {
    /// Flags, config files, or unreadable/unwritable paths.
    Config(String),
    /// The data cannot support the request (malformed tables, impossible
    /// estimates, broken chains).
    Data(String),
    /// Conditioned resampling could not match the observed epidemic.
    Conditioning(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Conditioning(_) => "conditioning",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Conditioning(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Conditioning(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::InvalidInput(_) => CliError::Config(message),
            Error::Data(_) | Error::Estimation(_) | Error::NoClosedForm { .. } | Error::Mcmc(_) => {
                CliError::Data(message)
            }
            Error::ConditioningFailed { .. } | Error::Bootstrap(_) => {
                CliError::Conditioning(message)
            }
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    let doc = json!({"error": {"kind": e.kind(), "message": e.message()}});
    eprintln!("{doc}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == ClapErrorKind::DisplayHelp
                || e.kind() == ClapErrorKind::DisplayVersion =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Config(e.to_string())),
    };
    match run(cli) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Mcmc(a) => cmd_mcmc(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Study(a) => cmd_study(a),
    }
}

/// Validated model flags, in the shape they are echoed into reports.
#[derive(Debug, Serialize)]
struct ModelEcho {
    model: &'static str,
    m: u32,
    delta: f64,
}

fn checked_model(opts: &ModelOpts) -> Result<ModelEcho, CliError> {
    if opts.m < 1 {
        return Err(CliError::Config("--m must be at least 1".into()));
    }
    if !opts.delta.is_finite() || opts.delta < 0.0 {
        return Err(CliError::Config(format!(
            "--delta must be finite and non-negative, got {}",
            opts.delta
        )));
    }
    let model = match opts.model {
        ModelKind::Sir if opts.delta != 0.0 => {
            return Err(CliError::Config(
                "--model sir has no incubation period; use --model seir or drop --delta".into(),
            ))
        }
        ModelKind::Sir => "sir",
        ModelKind::Seir => "seir",
    };
    Ok(ModelEcho { model, m: opts.m, delta: opts.delta })
}

#[derive(Debug, Serialize)]
struct IngestEcho {
    infection_offset: f64,
    removal_offset: f64,
    dequantize_sd: Option<f64>,
}

fn ingest_echo(opts: &IngestOpts) -> IngestEcho {
    IngestEcho {
        infection_offset: opts.infection_offset,
        removal_offset: opts.removal_offset,
        dequantize_sd: opts.dequantize_sd,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn require_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<String, CliError> {
    let model_echo = checked_model(&a.model)?;
    require_positive("--beta", a.beta)?;
    require_positive("--gamma", a.gamma)?;
    if a.population < 1 {
        return Err(CliError::Config("--population must be at least 1".into()));
    }
    let model =
        RateModel::homogeneous(a.beta, a.gamma, model_echo.m, model_echo.delta, a.population);
    let rates = HomogeneousRates { beta: a.beta, gamma: a.gamma, population: a.population };
    let log = simulate_seir_het(&model, &rates, a.seed)?;

    let table_text = table::table_to_string(&log.cases);
    if let Some(path) = &a.cases_out {
        write_file(path, &table_text)?;
    }
    if let Some(path) = &a.events_out {
        // Data artifact: full float precision so downstream reads are exact.
        let mut text = serde_json::to_string_pretty(&log)
            .map_err(|e| CliError::Data(format!("cannot serialize event log: {e}")))?;
        text.push('\n');
        write_file(path, &text)?;
    }

    let config = json!({
        "beta": a.beta,
        "gamma": a.gamma,
        "population": a.population,
        "model": model_echo,
    });
    let duration = log.events.iter().map(|e| e.time).fold(0.0, f64::max);
    let results = json!({
        "final_size": log.final_size(),
        "events": log.events.len(),
        "duration": duration,
    });
    match a.output {
        OutputFormat::Csv => Ok(table_text),
        OutputFormat::Json => Ok(render_json(&envelope("simulate", Some(a.seed), &config, &results)?)),
    }
}

fn cmd_inject(a: InjectArgs) -> Result<String, CliError> {
    let cases = table::ingest(&a.data, &a.ingest, a.seed)?;
    let (masked, mask) = inject_missingness(&cases, a.p_missing, a.p_inf_missing, a.seed)?;
    let table_text = table::table_to_string(&masked);
    if let Some(path) = &a.table_out {
        write_file(path, &table_text)?;
    }
    let config = json!({
        "data": a.data,
        "p_missing": a.p_missing,
        "p_inf_missing": a.p_inf_missing,
        "ingest": ingest_echo(&a.ingest),
    });
    let results = json!({ "mask": mask });
    match a.output {
        OutputFormat::Csv => Ok(table_text),
        OutputFormat::Json => Ok(render_json(&envelope("inject", Some(a.seed), &config, &results)?)),
    }
}

/// `--group-size NAME=COUNT` flags into the sizes map.
fn parse_group_sizes(specs: &[String]) -> Result<BTreeMap<String, usize>, CliError> {
    if specs.is_empty() {
        return Err(CliError::Config(
            "--method group needs at least one --group-size NAME=COUNT".into(),
        ));
    }
    let mut sizes = BTreeMap::new();
    for spec in specs {
        let (name, count) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--group-size \"{spec}\" is not NAME=COUNT")))?;
        let count: usize = count
            .parse()
            .map_err(|e| CliError::Config(format!("--group-size \"{spec}\": bad count: {e}")))?;
        if sizes.insert(name.to_string(), count).is_some() {
            return Err(CliError::Config(format!("--group-size \"{name}\" given twice")));
        }
    }
    Ok(sizes)
}

enum EstimateOutcome {
    Single(BetaEstimate),
    Groups(BTreeMap<String, BetaEstimate>),
}

fn cmd_estimate(a: EstimateArgs) -> Result<String, CliError> {
    let model_echo = checked_model(&a.model)?;
    let cases = table::ingest(&a.data, &a.ingest, a.seed)?;
    let n = cases.len();
    let n_complete = complete_count(&cases);
    let complete = n_complete == n;
    let (m, delta) = (model_echo.m, model_echo.delta);

    let gamma = mle_gamma(&cases, m)?;
    let outcome = match a.method {
        Method::Mle => EstimateOutcome::Single(mle_beta(&cases, a.population, delta)?),
        Method::Tilde => {
            EstimateOutcome::Single(impute_beta_tilde(&cases, a.population, m, delta, gamma)?)
        }
        Method::Bar => {
            EstimateOutcome::Single(impute_beta_bar(&cases, a.population, m, delta, gamma)?)
        }
        Method::Group => {
            let sizes = parse_group_sizes(&a.group_sizes)?;
            EstimateOutcome::Groups(if complete {
                mle_beta_group(&cases, a.population, &sizes, delta)?
            } else {
                impute_beta_tilde_group(&cases, a.population, &sizes, m, delta, gamma)?
            })
        }
        Method::Kernel => {
            let kernel = if a.kernel_rate == 0.0 {
                KernelSpec::Constant
            } else {
                KernelSpec::ExpDecay { rate: a.kernel_rate }
            };
            let locations = match &a.susceptibles {
                Some(path) => table::read_locations(path)?,
                None => Vec::new(),
            };
            EstimateOutcome::Single(if complete {
                mle_beta_kernel(&cases, a.population, &kernel, &locations, delta)?
            } else {
                impute_beta_tilde_kernel(&cases, a.population, &kernel, &locations, m, delta, gamma)?
            })
        }
    };

    // One config schema for all methods, so estimators that coincide on a
    // dataset (the reduction identities) also serialize identically.
    let config = json!({
        "data": a.data,
        "population": a.population,
        "model": model_echo,
        "ingest": ingest_echo(&a.ingest),
        "group_sizes": a.group_sizes,
        "kernel_rate": a.kernel_rate,
        "susceptibles": a.susceptibles,
    });
    let mut results = json!({
        "population": a.population,
        "cases": n,
        "complete_cases": n_complete,
        "gamma": gamma,
    });
    match &outcome {
        EstimateOutcome::Single(est) => {
            results["beta"] = json!(est.value);
            results["r0"] = json!(est.value / gamma);
            results["no_secondary"] = json!(est.no_secondary());
        }
        EstimateOutcome::Groups(groups) => {
            results["beta_groups"] = json!(groups
                .iter()
                .map(|(g, est)| {
                    (g.clone(), json!({"beta": est.value, "infections": est.infections}))
                })
                .collect::<serde_json::Map<_, _>>());
        }
    }

    match a.output {
        OutputFormat::Json => {
            Ok(render_json(&envelope("estimate", Some(a.seed), &config, &results)?))
        }
        OutputFormat::Csv => {
            let mut rows = vec![
                vec!["gamma".into(), fmt(gamma)],
                vec!["cases".into(), n.to_string()],
                vec!["complete_cases".into(), n_complete.to_string()],
                vec!["population".into(), a.population.to_string()],
            ];
            match &outcome {
                EstimateOutcome::Single(est) => {
                    rows.insert(0, vec!["beta".into(), fmt(est.value)]);
                    rows.insert(1, vec!["r0".into(), fmt(est.value / gamma)]);
                }
                EstimateOutcome::Groups(groups) => {
                    for (g, est) in groups.iter().rev() {
                        rows.insert(0, vec![format!("beta_{g}"), fmt(est.value)]);
                    }
                }
            }
            Ok(csv_string(&["key", "value"], &rows))
        }
    }
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<String, CliError> {
    let model_echo = checked_model(&a.model)?;
    let cases = table::ingest(&a.data, &a.ingest, a.seed)?;
    let (m, delta) = (model_echo.m, model_echo.delta);

    let gamma_hat = mle_gamma(&cases, m)?;
    let beta_tilde = impute_beta_tilde(&cases, a.population, m, delta, gamma_hat)?;

    // Replicates re-lose endpoints at the observed rates unless overridden.
    let (n_partial, n_infection) = realized_counts(&cases);
    let p_missing = a.p_missing.unwrap_or(n_partial as f64 / cases.len() as f64);
    let p_inf_missing = a.p_inf_missing.unwrap_or(if n_partial > 0 {
        n_infection as f64 / n_partial as f64
    } else {
        0.0
    });
    let cfg = BootstrapConfig {
        b_out: a.b_out,
        b_in: a.b_in,
        se_reps: a.se_reps,
        omega: a.omega,
        alpha: a.alpha,
        p_missing,
        p_inf_missing,
        reinjection: if a.mirror { Reinjection::Mirror } else { Reinjection::Binomial },
        seed: a.seed,
        max_tries: a.max_tries,
    };
    let result =
        bootstrap_t(&cases, a.population, m, delta, beta_tilde.value, gamma_hat, &cfg)?;

    let config = json!({
        "data": a.data,
        "population": a.population,
        "model": model_echo,
        "ingest": ingest_echo(&a.ingest),
        "bootstrap": cfg,
    });
    let results = json!({
        "gamma_hat": gamma_hat,
        "beta_tilde": beta_tilde.value,
        "beta": result.beta,
        "r0": result.r0,
        "used": result.used,
        "failed_conditioning": result.failed_conditioning,
        "failed_estimation": result.failed_estimation,
        "dropped_degenerate_se": result.dropped_degenerate_se,
    });
    match a.output {
        OutputFormat::Json => {
            Ok(render_json(&envelope("bootstrap", Some(a.seed), &config, &results)?))
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = [("beta", &result.beta), ("r0", &result.r0)]
                .iter()
                .map(|(name, i)| {
                    vec![
                        name.to_string(),
                        fmt(i.point),
                        fmt(i.lower),
                        fmt(i.upper),
                        fmt(i.midpoint),
                        fmt(i.se),
                        fmt(i.t_lower),
                        fmt(i.t_upper),
                    ]
                })
                .collect();
            Ok(csv_string(
                &["parameter", "point", "lower", "upper", "midpoint", "se", "t_lower", "t_upper"],
                &rows,
            ))
        }
    }
}

fn sample_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64]) -> f64 {
    let mean = sample_mean(values);
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Post-burn-in posterior summaries shared by `mcmc` and `diagnose`, so a
/// saved trace diagnoses to exactly the numbers its own run reported.
fn summarize_chains(chains: &[Chain], burn_in: usize) -> Result<Value, CliError> {
    if chains.is_empty() {
        return Err(CliError::Data("trace holds no chains".into()));
    }
    let len = chains[0].beta.len();
    if chains.iter().any(|c| c.beta.len() != len || c.gamma.len() != len) {
        return Err(CliError::Data("trace chains have unequal lengths".into()));
    }
    if burn_in + 4 > len {
        return Err(CliError::Config(format!(
            "burn-in {burn_in} leaves fewer than 4 of the {len} draws per chain"
        )));
    }

    let series: [(&str, fn(&Chain) -> Vec<f64>); 3] =
        [("beta", |c| c.beta.clone()), ("gamma", |c| c.gamma.clone()), ("r0", Chain::r0)];
    let mut parameters = serde_json::Map::new();
    for (name, extract) in series {
        let post: Vec<Vec<f64>> = chains.iter().map(|c| extract(c)[burn_in..].to_vec()).collect();
        let pooled: Vec<f64> = post.iter().flatten().copied().collect();
        let mut ess_total = 0.0;
        for chain in &post {
            ess_total += ess(chain)?;
        }
        let rhat = if chains.len() >= 2 { Some(split_rhat(&post)?) } else { None };
        parameters.insert(
            name.into(),
            json!({
                "mean": sample_mean(&pooled),
                "sd": sample_sd(&pooled),
                "ess": ess_total,
                "rhat": rhat,
            }),
        );
    }

    let per_chain: Vec<Value> = chains
        .iter()
        .enumerate()
        .map(|(k, c)| {
            json!({
                "chain": k,
                "acceptance": c.acceptance_rate(),
                "beta_mean": sample_mean(&c.beta[burn_in..]),
                "gamma_mean": sample_mean(&c.gamma[burn_in..]),
            })
        })
        .collect();

    Ok(json!({
        "chains": chains.len(),
        "draws_per_chain": len,
        "burn_in": burn_in,
        "missing_endpoints": chains[0].missing_endpoints.len(),
        "parameters": parameters,
        "per_chain": per_chain,
    }))
}

/// CSV rows out of the `parameters` object of [`summarize_chains`].
fn parameter_csv(summary: &Value) -> String {
    let rows: Vec<Vec<String>> = ["beta", "gamma", "r0"]
        .into_iter()
        .map(|name| {
            let p = &summary["parameters"][name];
            let cell = |key: &str| p[key].as_f64().map(fmt).unwrap_or_default();
            vec![name.to_string(), cell("mean"), cell("sd"), cell("ess"), cell("rhat")]
        })
        .collect();
    csv_string(&["parameter", "mean", "sd", "ess", "rhat"], &rows)
}

fn cmd_mcmc(a: McmcArgs) -> Result<String, CliError> {
    let model_echo = checked_model(&a.model)?;
    let cases = table::ingest(&a.data, &a.ingest, a.seed)?;
    let burn_in = a.burn_in.unwrap_or(a.iterations / 2);
    let prior = PriorSpec {
        beta_shape: a.prior_beta_shape,
        beta_rate: a.prior_beta_rate,
        gamma_shape: a.prior_gamma_shape,
        gamma_rate: a.prior_gamma_rate,
    };
    let cfg = McmcConfig {
        iterations: a.iterations,
        attempts: a.attempts,
        init_gamma: a.init_gamma,
        fixed_gamma: None,
        seed: a.seed,
    };
    let chains =
        run_chains(&cases, a.population, &prior, model_echo.m, model_echo.delta, &cfg, a.chains)?;
    if let Some(path) = &a.trace_out {
        // Data artifact: full float precision so `diagnose` sees the chains
        // exactly as this run did.
        let mut text = serde_json::to_string_pretty(&chains)
            .map_err(|e| CliError::Data(format!("cannot serialize chains: {e}")))?;
        text.push('\n');
        write_file(path, &text)?;
    }
    let results = summarize_chains(&chains, burn_in)?;

    let config = json!({
        "data": a.data,
        "population": a.population,
        "model": model_echo,
        "ingest": ingest_echo(&a.ingest),
        "iterations": a.iterations,
        "burn_in": burn_in,
        "chains": a.chains,
        "attempts": a.attempts,
        "prior": prior,
        "init_gamma": a.init_gamma,
    });
    match a.output {
        OutputFormat::Json => Ok(render_json(&envelope("mcmc", Some(a.seed), &config, &results)?)),
        OutputFormat::Csv => Ok(parameter_csv(&results)),
    }
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(&a.chains)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", a.chains.display())))?;
    let chains: Vec<Chain> = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("bad chain trace {}: {e}", a.chains.display())))?;
    let results = summarize_chains(&chains, a.burn_in)?;
    let config = json!({ "chains": a.chains, "burn_in": a.burn_in });
    match a.output {
        OutputFormat::Json => Ok(render_json(&envelope("diagnose", None, &config, &results)?)),
        OutputFormat::Csv => Ok(parameter_csv(&results)),
    }
}

fn cmd_study(a: StudyArgs) -> Result<String, CliError> {
    let mut cfg = study::StudyConfig::load(&a.config)?;
    a.apply(&mut cfg);
    let out = study::run_study(&cfg)?;
    match a.output {
        OutputFormat::Json => Ok(render_json(&out.summary)),
        OutputFormat::Csv => Ok(out.cells_csv),
    }
}
