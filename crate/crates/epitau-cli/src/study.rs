//! Simulation study: a (beta x p_missing) grid of coverage cells.
//!
//! Each cell simulates `replicates` epidemics (retrying until the retention
//! size is met), masks endpoints, estimates rates, runs the bootstrap-t
//! interval for the transmission rate and the reproduction number, and —
//! when an `[mcmc]` section is present — also a posterior credible interval.
//! Every replicate's randomness descends from the master seed through the
//! `(cell, replicate)` path, so reruns are byte-identical no matter how the
//! worker pool schedules them.

use std::fs;
use std::path::{Path, PathBuf};

use epitau::bootstrap::{bootstrap_t, BootstrapConfig, IntervalResult};
use epitau::error::{Error, Result};
use epitau::estimate::{impute_beta_tilde, mle_gamma};
use epitau::mcmc::{run_damcmc, McmcConfig, PriorSpec};
use epitau::model::RateModel;
use epitau::numeric::quantile_sorted;
use epitau::observe::{inject_missingness, realized_counts};
use epitau::simulate::{simulate_seir_het, HomogeneousRates};
use epitau::stream::{stream_seed, tag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{fmt, fmt_opt};

fn default_m() -> u32 {
    1
}

fn default_retention_tries() -> u64 {
    1000
}

fn default_omega() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    0.05
}

fn default_max_tries() -> u64 {
    1000
}

fn default_prior() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    pub b_out: usize,
    pub b_in: usize,
    pub se_reps: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_tries")]
    pub max_tries: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: usize,
    pub burn_in: usize,
    /// Credible level is 1 - alpha.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Endpoint attempts per iteration (default: one per missing endpoint).
    #[serde(default)]
    pub attempts: Option<usize>,
    #[serde(default = "default_prior")]
    pub prior_beta_shape: f64,
    #[serde(default = "default_prior")]
    pub prior_beta_rate: f64,
    #[serde(default = "default_prior")]
    pub prior_gamma_shape: f64,
    #[serde(default = "default_prior")]
    pub prior_gamma_rate: f64,
}

/// The whole study, as read from TOML (command-line flags may override the
/// seed, output directory, and replicate count).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub population: usize,
    /// True removal rate of each infectious stage.
    pub gamma: f64,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default)]
    pub delta: f64,
    /// Retention threshold: replicates below this final size are resimulated.
    pub min_size: usize,
    /// Retained replicates per cell.
    pub replicates: usize,
    /// Simulation attempts allowed while seeking a retained epidemic.
    #[serde(default = "default_retention_tries")]
    pub retention_tries: u64,
    /// Grid axis 1: true transmission rates.
    pub beta: Vec<f64>,
    /// Grid axis 2: endpoint-masking probabilities.
    pub p_missing: Vec<f64>,
    /// Probability a masked case loses the infection time (else the removal).
    pub p_inf_missing: f64,
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub mcmc: Option<McmcSection>,
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<StudyConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let cfg: StudyConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("bad study config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() || self.p_missing.is_empty() {
            return Err(Error::InvalidInput("study grid is empty".into()));
        }
        for b in &self.beta {
            if !(b.is_finite() && *b > 0.0) {
                return Err(Error::InvalidInput(format!("grid beta {b} must be positive")));
            }
        }
        for p in self.p_missing.iter().chain([&self.p_inf_missing]) {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidInput(format!("probability {p} must lie in [0, 1]")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma {} must be positive", self.gamma)));
        }
        if self.m < 1 {
            return Err(Error::InvalidInput("m must be >= 1".into()));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidInput(format!("delta {} must be >= 0", self.delta)));
        }
        if self.min_size < 1 || self.min_size > self.population {
            return Err(Error::InvalidInput(format!(
                "min_size {} must lie in 1..={}",
                self.min_size, self.population
            )));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidInput("need at least one replicate per cell".into()));
        }
        if self.retention_tries < 1 {
            return Err(Error::InvalidInput("retention_tries must be >= 1".into()));
        }
        // Reuse the bootstrap validator for the section's numeric ranges.
        self.bootstrap_config(0.0, 0.0, 0).validate()?;
        if let Some(mcmc) = &self.mcmc {
            if mcmc.iterations < 4 || mcmc.burn_in + 4 > mcmc.iterations {
                return Err(Error::InvalidInput(format!(
                    "mcmc needs iterations ({}) to exceed burn_in ({}) by at least 4",
                    mcmc.iterations, mcmc.burn_in
                )));
            }
            if !(mcmc.alpha > 0.0 && mcmc.alpha < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "mcmc alpha {} must be in (0, 1)",
                    mcmc.alpha
                )));
            }
            self.prior(mcmc).validate()?;
        }
        Ok(())
    }

    fn bootstrap_config(&self, p_missing: f64, p_inf_missing: f64, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            b_out: self.bootstrap.b_out,
            b_in: self.bootstrap.b_in,
            se_reps: self.bootstrap.se_reps,
            omega: self.bootstrap.omega,
            alpha: self.bootstrap.alpha,
            p_missing,
            p_inf_missing,
            seed,
            max_tries: self.bootstrap.max_tries,
            ..BootstrapConfig::new(seed)
        }
    }

    fn prior(&self, mcmc: &McmcSection) -> PriorSpec {
        PriorSpec {
            beta_shape: mcmc.prior_beta_shape,
            beta_rate: mcmc.prior_beta_rate,
            gamma_shape: mcmc.prior_gamma_shape,
            gamma_rate: mcmc.prior_gamma_rate,
        }
    }

    /// Cells in reporting order: beta-major, then p_missing.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::new();
        for &beta in &self.beta {
            for &p in &self.p_missing {
                cells.push((beta, p));
            }
        }
        cells
    }
}

/// Central credible interval from posterior draws.
#[derive(Debug, Clone, Serialize)]
struct Credible {
    lower: f64,
    upper: f64,
}

impl Credible {
    fn from_draws(draws: &[f64], alpha: f64) -> Credible {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        Credible {
            lower: quantile_sorted(&sorted, alpha / 2.0),
            upper: quantile_sorted(&sorted, 1.0 - alpha / 2.0),
        }
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum RepStatus {
    Ok,
    /// No simulation reached the retention size within the allowed tries.
    NoRetainedEpidemic,
    /// Estimation impossible (e.g. no complete period, no secondary cases).
    EstimationFailed,
    BootstrapFailed,
    McmcFailed,
}

#[derive(Debug, Clone, Serialize)]
struct Replicate {
    cell: usize,
    replicate: usize,
    status: RepStatus,
    /// Human-readable reason when the status is a failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    sim_attempts: u64,
    cases: usize,
    gamma_hat: Option<f64>,
    beta_tilde: Option<f64>,
    beta: Option<IntervalResult>,
    r0: Option<IntervalResult>,
    beta_credible: Option<Credible>,
    r0_credible: Option<Credible>,
}

fn failed(cell: usize, replicate: usize, status: RepStatus, message: String) -> Replicate {
    Replicate {
        cell,
        replicate,
        status,
        message: Some(message),
        sim_attempts: 0,
        cases: 0,
        gamma_hat: None,
        beta_tilde: None,
        beta: None,
        r0: None,
        beta_credible: None,
        r0_credible: None,
    }
}

fn run_replicate(cfg: &StudyConfig, cell: usize, replicate: usize) -> Replicate {
    let (beta_true, p_missing) = cfg.cells()[cell];
    let rep_seed = stream_seed(cfg.seed, &[tag::STUDY, cell as u64, replicate as u64]);
    let model =
        RateModel::homogeneous(beta_true, cfg.gamma, cfg.m, cfg.delta, cfg.population);
    let rates = HomogeneousRates {
        beta: beta_true,
        gamma: cfg.gamma,
        population: cfg.population,
    };

    // Simulate until the retention rule is met.
    let mut log = None;
    let mut sim_attempts = 0;
    for attempt in 0..cfg.retention_tries {
        let sim_seed = stream_seed(rep_seed, &[tag::SIMULATE, attempt]);
        match simulate_seir_het(&model, &rates, sim_seed) {
            Ok(l) => {
                sim_attempts = attempt + 1;
                if l.final_size() >= cfg.min_size {
                    log = Some(l);
                    break;
                }
            }
            Err(e) => {
                return failed(cell, replicate, RepStatus::NoRetainedEpidemic, e.to_string())
            }
        }
    }
    let Some(log) = log else {
        return failed(
            cell,
            replicate,
            RepStatus::NoRetainedEpidemic,
            format!(
                "{} attempts without final size >= {}",
                cfg.retention_tries, cfg.min_size
            ),
        );
    };

    let masked = match inject_missingness(&log.cases, p_missing, cfg.p_inf_missing, rep_seed) {
        Ok((m, _)) => m,
        Err(e) => return failed(cell, replicate, RepStatus::EstimationFailed, e.to_string()),
    };

    let (gamma_hat, beta_tilde) = match mle_gamma(&masked, cfg.m).and_then(|g| {
        let b = impute_beta_tilde(&masked, cfg.population, cfg.m, cfg.delta, g)?;
        Ok((g, b))
    }) {
        Ok(pair) => pair,
        Err(e) => return failed(cell, replicate, RepStatus::EstimationFailed, e.to_string()),
    };
    if beta_tilde.no_secondary() {
        return failed(
            cell,
            replicate,
            RepStatus::EstimationFailed,
            "no secondary infections to estimate a transmission rate from".into(),
        );
    }

    // Re-injection probabilities as estimated from the masked table itself.
    let n = masked.len();
    let (n_partial, n_infection) = realized_counts(&masked);
    let p1_hat = n_partial as f64 / n as f64;
    let p2_hat = if n_partial > 0 { n_infection as f64 / n_partial as f64 } else { 0.0 };

    let bcfg = cfg.bootstrap_config(p1_hat, p2_hat, rep_seed);
    let boot = match bootstrap_t(
        &masked,
        cfg.population,
        cfg.m,
        cfg.delta,
        beta_tilde.value,
        gamma_hat,
        &bcfg,
    ) {
        Ok(r) => r,
        Err(e) => return failed(cell, replicate, RepStatus::BootstrapFailed, e.to_string()),
    };

    let mut rep = Replicate {
        cell,
        replicate,
        status: RepStatus::Ok,
        message: None,
        sim_attempts,
        cases: n,
        gamma_hat: Some(gamma_hat),
        beta_tilde: Some(beta_tilde.value),
        beta: Some(boot.beta),
        r0: Some(boot.r0),
        beta_credible: None,
        r0_credible: None,
    };

    if let Some(mcmc) = &cfg.mcmc {
        let mcfg = McmcConfig {
            iterations: mcmc.iterations,
            attempts: mcmc.attempts,
            init_gamma: None,
            fixed_gamma: None,
            seed: rep_seed,
        };
        match run_damcmc(&masked, cfg.population, &cfg.prior(mcmc), cfg.m, cfg.delta, &mcfg) {
            Ok(chain) => {
                let beta_draws = &chain.beta[mcmc.burn_in..];
                let r0_draws: Vec<f64> = chain.r0()[mcmc.burn_in..].to_vec();
                rep.beta_credible = Some(Credible::from_draws(beta_draws, mcmc.alpha));
                rep.r0_credible = Some(Credible::from_draws(&r0_draws, mcmc.alpha));
            }
            Err(e) => {
                rep.status = RepStatus::McmcFailed;
                rep.message = Some(e.to_string());
            }
        }
    }
    rep
}

/// Coverage/width aggregates for one interval family within a cell.
#[derive(Debug, Clone, Serialize)]
struct IntervalSummary {
    coverage: f64,
    width_mean: f64,
    /// Median of the interval midpoints (the bias-corrected estimates).
    midpoint_median: f64,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, 0.5)
}

fn summarize_intervals(
    items: &[(f64, f64, f64)], // (lower, upper, midpoint)
    truth: f64,
) -> Option<IntervalSummary> {
    if items.is_empty() {
        return None;
    }
    let covered = items.iter().filter(|(lo, hi, _)| *lo <= truth && truth <= *hi).count();
    let width_sum: f64 = items.iter().map(|(lo, hi, _)| hi - lo).sum();
    let mut midpoints: Vec<f64> = items.iter().map(|(_, _, m)| *m).collect();
    Some(IntervalSummary {
        coverage: covered as f64 / items.len() as f64,
        width_mean: width_sum / items.len() as f64,
        midpoint_median: median(&mut midpoints),
    })
}

#[derive(Debug, Clone, Serialize)]
struct CellSummary {
    cell: usize,
    beta_true: f64,
    r0_true: f64,
    p_missing: f64,
    replicates: usize,
    used: usize,
    no_retained_epidemic: usize,
    estimation_failed: usize,
    bootstrap_failed: usize,
    mcmc_failed: usize,
    beta_tilde_median: Option<f64>,
    beta: Option<IntervalSummary>,
    r0: Option<IntervalSummary>,
    beta_credible: Option<IntervalSummary>,
    r0_credible: Option<IntervalSummary>,
}

fn summarize_cell(cfg: &StudyConfig, cell: usize, reps: &[Replicate]) -> CellSummary {
    let (beta_true, p_missing) = cfg.cells()[cell];
    let r0_true = beta_true / cfg.gamma;
    let count = |s: RepStatus| reps.iter().filter(|r| r.status == s).count();

    let used: Vec<&Replicate> =
        reps.iter().filter(|r| matches!(r.status, RepStatus::Ok | RepStatus::McmcFailed)).collect();
    let mut beta_tildes: Vec<f64> = used.iter().filter_map(|r| r.beta_tilde).collect();

    let interval_triples = |pick: fn(&Replicate) -> Option<&IntervalResult>| -> Vec<(f64, f64, f64)> {
        used.iter()
            .filter_map(|r| pick(r).map(|i| (i.lower, i.upper, i.midpoint)))
            .collect()
    };
    let credible_triples = |pick: fn(&Replicate) -> Option<&Credible>| -> Vec<(f64, f64, f64)> {
        reps.iter()
            .filter(|r| r.status == RepStatus::Ok)
            .filter_map(|r| pick(r).map(|c| (c.lower, c.upper, 0.5 * (c.lower + c.upper))))
            .collect()
    };

    CellSummary {
        cell,
        beta_true,
        r0_true,
        p_missing,
        replicates: reps.len(),
        used: used.len(),
        no_retained_epidemic: count(RepStatus::NoRetainedEpidemic),
        estimation_failed: count(RepStatus::EstimationFailed),
        bootstrap_failed: count(RepStatus::BootstrapFailed),
        mcmc_failed: count(RepStatus::McmcFailed),
        beta_tilde_median: if beta_tildes.is_empty() { None } else { Some(median(&mut beta_tildes)) },
        beta: summarize_intervals(&interval_triples(|r| r.beta.as_ref()), beta_true),
        r0: summarize_intervals(&interval_triples(|r| r.r0.as_ref()), r0_true),
        beta_credible: summarize_intervals(&credible_triples(|r| r.beta_credible.as_ref()), beta_true),
        r0_credible: summarize_intervals(&credible_triples(|r| r.r0_credible.as_ref()), r0_true),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOutput {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
    /// cells.csv content (also written to disk) for `--output csv`.
    pub cells_csv: String,
}

fn replicate_row(r: &Replicate) -> Vec<String> {
    let interval = |i: &Option<IntervalResult>| -> [String; 3] {
        match i {
            Some(i) => [fmt(i.lower), fmt(i.upper), fmt(i.midpoint)],
            None => Default::default(),
        }
    };
    let credible = |c: &Option<Credible>| -> [String; 2] {
        match c {
            Some(c) => [fmt(c.lower), fmt(c.upper)],
            None => Default::default(),
        }
    };
    let status = serde_json::to_value(r.status).expect("plain enum");
    let [bl, bu, bm] = interval(&r.beta);
    let [rl, ru, rm] = interval(&r.r0);
    let [cbl, cbu] = credible(&r.beta_credible);
    let [crl, cru] = credible(&r.r0_credible);
    vec![
        r.cell.to_string(),
        r.replicate.to_string(),
        status.as_str().expect("snake_case tag").to_string(),
        r.sim_attempts.to_string(),
        r.cases.to_string(),
        fmt_opt(r.gamma_hat),
        fmt_opt(r.beta_tilde),
        bl,
        bu,
        bm,
        rl,
        ru,
        rm,
        cbl,
        cbu,
        crl,
        cru,
    ]
}

const REPLICATE_HEADER: [&str; 17] = [
    "cell",
    "replicate",
    "status",
    "sim_attempts",
    "cases",
    "gamma_hat",
    "beta_tilde",
    "beta_lower",
    "beta_upper",
    "beta_midpoint",
    "r0_lower",
    "r0_upper",
    "r0_midpoint",
    "beta_credible_lower",
    "beta_credible_upper",
    "r0_credible_lower",
    "r0_credible_upper",
];

fn cell_row(c: &CellSummary) -> Vec<String> {
    let summary = |s: &Option<IntervalSummary>| -> [String; 3] {
        match s {
            Some(s) => [fmt(s.coverage), fmt(s.width_mean), fmt(s.midpoint_median)],
            None => Default::default(),
        }
    };
    let [bc, bw, bm] = summary(&c.beta);
    let [rc, rw, rm] = summary(&c.r0);
    let [cbc, cbw, cbm] = summary(&c.beta_credible);
    let [crc, crw, crm] = summary(&c.r0_credible);
    vec![
        c.cell.to_string(),
        fmt(c.beta_true),
        fmt(c.r0_true),
        fmt(c.p_missing),
        c.replicates.to_string(),
        c.used.to_string(),
        c.no_retained_epidemic.to_string(),
        c.estimation_failed.to_string(),
        c.bootstrap_failed.to_string(),
        c.mcmc_failed.to_string(),
        fmt_opt(c.beta_tilde_median),
        bc,
        bw,
        bm,
        rc,
        rw,
        rm,
        cbc,
        cbw,
        cbm,
        crc,
        crw,
        crm,
    ]
}

const CELL_HEADER: [&str; 23] = [
    "cell",
    "beta_true",
    "r0_true",
    "p_missing",
    "replicates",
    "used",
    "no_retained_epidemic",
    "estimation_failed",
    "bootstrap_failed",
    "mcmc_failed",
    "beta_tilde_median",
    "beta_coverage",
    "beta_width_mean",
    "beta_midpoint_median",
    "r0_coverage",
    "r0_width_mean",
    "r0_midpoint_median",
    "beta_credible_coverage",
    "beta_credible_width_mean",
    "beta_credible_midpoint_median",
    "r0_credible_coverage",
    "r0_credible_width_mean",
    "r0_credible_midpoint_median",
];

/// Run the whole grid and write `replicates.csv`, `cells.csv`, and
/// `study_summary.json` under the output directory. Returns the summary for
/// stdout reporting. Purely a function of the config (including its seed):
/// no timestamps, no scheduling effects.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|cell| (0..cfg.replicates).map(move |rep| (cell, rep)))
        .collect();

    // Independent replicates across the worker pool; collect preserves the
    // (cell, replicate) order for the single-threaded reporting below.
    let replicates: Vec<Replicate> = jobs
        .par_iter()
        .map(|&(cell, rep)| run_replicate(cfg, cell, rep))
        .collect();

    let summaries: Vec<CellSummary> = (0..cells.len())
        .map(|cell| {
            let slice = &replicates[cell * cfg.replicates..(cell + 1) * cfg.replicates];
            summarize_cell(cfg, cell, slice)
        })
        .collect();

    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        Error::InvalidInput(format!("cannot create {}: {e}", cfg.output_dir.display()))
    })?;

    let replicates_csv = crate::report::csv_string(
        &REPLICATE_HEADER,
        &replicates.iter().map(replicate_row).collect::<Vec<_>>(),
    );
    let cells_csv =
        crate::report::csv_string(&CELL_HEADER, &summaries.iter().map(cell_row).collect::<Vec<_>>());

    let files: Vec<PathBuf> = ["replicates.csv", "cells.csv", "study_summary.json"]
        .iter()
        .map(|name| cfg.output_dir.join(name))
        .collect();
    let mut summary = serde_json::json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "command": "study",
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg)
            .map_err(|e| Error::InvalidInput(format!("cannot serialize study config: {e}")))?,
        "results": {
            "files": files,
            "cells": summaries,
        },
    });
    crate::report::round_floats(&mut summary);

    for (path, content) in files.iter().zip([
        replicates_csv,
        cells_csv.clone(),
        crate::report::render_json(&summary),
    ]) {
        fs::write(path, content)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?;
    }

    Ok(StudyOutput { files, summary, cells_csv })
}
