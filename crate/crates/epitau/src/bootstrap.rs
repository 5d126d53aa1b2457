//! Studentized double parametric bootstrap for the pressure-imputation
//! estimator and the reproduction number.
//!
//! Resampling observed epidemics directly breaks their dependency structure
//! (a resampled table can imply infections with nobody infectious), so
//! replicates are fresh simulations from the fitted rates, conditioned to land
//! near the observed epidemic size, degraded with the same missingness
//! process, and re-estimated. Each outer replicate is studentized by the
//! standard deviation of its own inner replicate estimates, and the interval
//! inverts the empirical t-quantiles. The interval midpoint doubles as a
//! bias-corrected point estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{impute_beta_tilde, mle_gamma};
use crate::model::{CaseRecord, RateModel};
use crate::numeric::{quantile_sorted, CompensatedSum};
use crate::observe::{inject_missingness, inject_missingness_counts, realized_counts};
use crate::simulate::{conditional_simulate, HomogeneousRates};
use crate::stream::{stream_seed, tag};

/// How replicates re-lose endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reinjection {
    /// Fresh Binomial draws from `(p_missing, p_inf_missing)` per replicate.
    #[default]
    Binomial,
    /// Reproduce the observed table's realized counts of partial cases and
    /// missing infection times (clamped to the replicate size).
    Mirror,
}

/// Tuning for [`bootstrap_t`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Outer replicates (t-statistic sample size).
    pub b_out: usize,
    /// Inner replicates per outer replicate (its standard-error sample).
    pub b_in: usize,
    /// Plain replicates behind the point estimate's standard error.
    pub se_reps: usize,
    /// Half-width of the relative size window for conditioned simulations.
    pub omega: f64,
    /// Interval level is `1 - alpha`.
    pub alpha: f64,
    /// Probability a simulated case loses one endpoint.
    pub p_missing: f64,
    /// Probability a partial case loses the infection time (else the removal).
    pub p_inf_missing: f64,
    /// Strategy for re-losing endpoints in replicates.
    pub reinjection: Reinjection,
    /// Master seed; the whole procedure is a pure function of it.
    pub seed: u64,
    /// Simulation attempts allowed per conditioned replicate.
    pub max_tries: u64,
}

impl BootstrapConfig {
    /// Defaults used in the coverage studies: 200 outer and 20 inner
    /// replicates, 100 replicates for the point standard error, a 10% size
    /// window, and 95% level.
    pub fn new(seed: u64) -> Self {
        BootstrapConfig {
            b_out: 200,
            b_in: 20,
            se_reps: 100,
            omega: 0.1,
            alpha: 0.05,
            p_missing: 0.0,
            p_inf_missing: 0.0,
            reinjection: Reinjection::Binomial,
            seed,
            max_tries: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_out < 2 || self.b_in < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 outer and 2 inner replicates, got {} and {}",
                self.b_out, self.b_in
            )));
        }
        if self.se_reps < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 standard-error replicates, got {}",
                self.se_reps
            )));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::InvalidInput(format!("omega {} must be in (0, 1)", self.omega)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} must be in (0, 1)", self.alpha)));
        }
        for (name, p) in [("p_missing", self.p_missing), ("p_inf_missing", self.p_inf_missing)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.max_tries < 1 {
            return Err(Error::InvalidInput("max_tries must be >= 1".into()));
        }
        Ok(())
    }
}

/// One bootstrap-t interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    /// The estimate the interval is for.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(lower + upper) / 2`; the bias-corrected point estimate.
    pub midpoint: f64,
    /// Standard error of the point estimate (from the plain replicate run).
    pub se: f64,
    /// Empirical `alpha/2` quantile of the studentized replicates.
    pub t_lower: f64,
    /// Empirical `1 - alpha/2` quantile.
    pub t_upper: f64,
}

/// Why an outer replicate did or did not contribute a t-statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateOutcome {
    Used,
    /// No simulation landed in the size window within `max_tries`.
    ConditioningFailed,
    /// The masked replicate could not be estimated (for example no complete
    /// infectious period survived to calibrate the removal rate).
    EstimationFailed,
    /// The inner replicates gave no usable spread to studentize with.
    DegenerateInnerSe,
}

/// Per-replicate record for the result's diagnostics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDiagnostics {
    pub replicate: usize,
    /// Replicate epidemic size, when a simulation was accepted.
    pub size: Option<usize>,
    /// Conditioning attempts consumed.
    pub attempts: u64,
    pub outcome: ReplicateOutcome,
}

/// Intervals for the infection rate and the reproduction number, with the
/// bookkeeping needed to judge them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub beta: IntervalResult,
    pub r0: IntervalResult,
    /// Outer replicates that contributed t-statistics.
    pub used: usize,
    pub failed_conditioning: usize,
    pub failed_estimation: usize,
    pub dropped_degenerate_se: usize,
    pub replicates: Vec<ReplicateDiagnostics>,
}

/// Order-statistic quantile with linear interpolation between the closest
/// ranks; `q = 0.5` on `[1, 2, 3, 4]` gives `2.5`.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level {q} must lie in [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    Ok(quantile_sorted(&sorted, q))
}

fn sample_sd(values: &[f64]) -> f64 {
    let mut sum = CompensatedSum::new();
    for v in values {
        sum.add(*v);
    }
    let mean = sum.value() / values.len() as f64;
    let mut ss = CompensatedSum::new();
    for v in values {
        ss.add((v - mean) * (v - mean));
    }
    (ss.value() / (values.len() - 1) as f64).sqrt()
}

/// Point estimates from one simulated-and-masked replicate.
struct ReplicateEstimate {
    beta: f64,
    gamma: f64,
    r0: f64,
    size: usize,
    attempts: u64,
}

enum ReplicateError {
    Conditioning { attempts: u64 },
    Estimation,
}

/// Masking parameters resolved once up front so replicates do not depend on
/// the original table (only on its realized counts under [`Reinjection::Mirror`]).
#[derive(Clone, Copy)]
struct MaskPlan {
    reinjection: Reinjection,
    p_missing: f64,
    p_inf_missing: f64,
    n_partial: usize,
    n_infection: usize,
}

impl MaskPlan {
    fn apply(&self, cases: &[CaseRecord], seed: u64) -> Result<Vec<CaseRecord>> {
        let masked = match self.reinjection {
            Reinjection::Binomial => {
                inject_missingness(cases, self.p_missing, self.p_inf_missing, seed)?.0
            }
            Reinjection::Mirror => {
                let n_partial = self.n_partial.min(cases.len());
                let n_infection = self.n_infection.min(n_partial);
                inject_missingness_counts(cases, n_partial, n_infection, seed)?.0
            }
        };
        Ok(masked)
    }
}

/// Simulate one conditioned replicate, mask it, and re-estimate both rates.
fn replicate_estimate(
    model: &RateModel,
    target_n: usize,
    omega: f64,
    max_tries: u64,
    plan: &MaskPlan,
    seed: u64,
) -> std::result::Result<ReplicateEstimate, ReplicateError> {
    let rates = match (&model.infection, &model.removal) {
        (
            crate::model::InfectionStructure::Homogeneous { beta },
            crate::model::RemovalStructure::Homogeneous { gamma },
        ) => HomogeneousRates { beta: *beta, gamma: *gamma, population: model.population },
        _ => unreachable!("bootstrap models are homogeneous by construction"),
    };
    let run = conditional_simulate(model, &rates, target_n, omega, max_tries, seed)
        .map_err(|err| match err {
            Error::ConditioningFailed { attempts, .. } => ReplicateError::Conditioning { attempts },
            _ => ReplicateError::Estimation,
        })?;
    let masked = plan
        .apply(&run.log.cases, stream_seed(seed, &[tag::INJECT]))
        .map_err(|_| ReplicateError::Estimation)?;
    let gamma_star = mle_gamma(&masked, model.shape).map_err(|_| ReplicateError::Estimation)?;
    let beta_star =
        impute_beta_tilde(&masked, model.population, model.shape, model.incubation, gamma_star)
            .map_err(|_| ReplicateError::Estimation)?;
    Ok(ReplicateEstimate {
        beta: beta_star.value,
        gamma: gamma_star,
        r0: beta_star.value / gamma_star,
        size: run.log.cases.len(),
        attempts: run.attempts,
    })
}

fn studentized_interval(point: f64, se: f64, sorted_t: &[f64], alpha: f64) -> IntervalResult {
    let t_lower = quantile_sorted(sorted_t, alpha / 2.0);
    let t_upper = quantile_sorted(sorted_t, 1.0 - alpha / 2.0);
    let lower = point - t_upper * se;
    let upper = point - t_lower * se;
    let interval = IntervalResult {
        point,
        lower,
        upper,
        midpoint: 0.5 * (lower + upper),
        se,
        t_lower,
        t_upper,
    };
    if t_lower <= 0.0 && 0.0 <= t_upper {
        assert!(
            interval.lower <= interval.point && interval.point <= interval.upper,
            "interval must contain the point estimate when the t-quantiles straddle zero"
        );
    }
    interval
}

/// Bootstrap-t confidence intervals for the infection rate estimate `beta`
/// and the reproduction number `beta / gamma`.
///
/// Every outer replicate simulates a fresh epidemic from `(beta, gamma)`
/// conditioned to land within `omega` of the observed epidemic size, re-loses
/// endpoints, re-estimates, and is studentized by the standard deviation of
/// `b_in` inner replicates built the same way from its own estimates. The
/// returned intervals are
/// `[point - t_{1-alpha/2} * se, point - t_{alpha/2} * se]`
/// with `se` taken from a dedicated run of `se_reps` plain replicates.
///
/// Replicates whose inner spread degenerates are dropped (counted in the
/// result); if conditioning fails in more than half of the outer replicates
/// the whole procedure errors out. Identical inputs produce identical results
/// regardless of thread scheduling.
pub fn bootstrap_t(
    data: &[CaseRecord],
    population: usize,
    shape: u32,
    incubation: f64,
    beta: f64,
    gamma: f64,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    cfg.validate()?;
    if !(beta.is_finite() && beta > 0.0 && gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs positive rate estimates, got beta {beta} and gamma {gamma}"
        )));
    }
    for case in data {
        case.validate()?;
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty case list".into()));
    }
    if population < n {
        return Err(Error::InvalidInput(format!(
            "population {population} smaller than case count {n}"
        )));
    }
    let model = RateModel::homogeneous(beta, gamma, shape, incubation, population);
    model.validate()?;

    let (n_partial, n_infection) = realized_counts(data);
    let plan = MaskPlan {
        reinjection: cfg.reinjection,
        p_missing: cfg.p_missing,
        p_inf_missing: cfg.p_inf_missing,
        n_partial,
        n_infection,
    };

    // Outer replicates: each produces a t-statistic pair or a diagnosis.
    struct OuterOutcome {
        t_beta: f64,
        t_r0: f64,
    }
    let outer: Vec<(ReplicateDiagnostics, Option<OuterOutcome>)> = (0..cfg.b_out)
        .into_par_iter()
        .map(|b| {
            let rep_seed = stream_seed(cfg.seed, &[tag::BOOT_OUTER, b as u64]);
            let star = match replicate_estimate(
                &model,
                n,
                cfg.omega,
                cfg.max_tries,
                &plan,
                rep_seed,
            ) {
                Ok(est) => est,
                Err(ReplicateError::Conditioning { attempts }) => {
                    return (
                        ReplicateDiagnostics {
                            replicate: b,
                            size: None,
                            attempts,
                            outcome: ReplicateOutcome::ConditioningFailed,
                        },
                        None,
                    )
                }
                Err(ReplicateError::Estimation) => {
                    return (
                        ReplicateDiagnostics {
                            replicate: b,
                            size: None,
                            attempts: 0,
                            outcome: ReplicateOutcome::EstimationFailed,
                        },
                        None,
                    )
                }
            };
            let diagnostics = ReplicateDiagnostics {
                replicate: b,
                size: Some(star.size),
                attempts: star.attempts,
                outcome: ReplicateOutcome::Used,
            };

            // Inner replicates around this replicate's own estimates.
            if star.beta <= 0.0 {
                return (
                    ReplicateDiagnostics {
                        outcome: ReplicateOutcome::EstimationFailed,
                        ..diagnostics
                    },
                    None,
                );
            }
            let inner_model =
                RateModel::homogeneous(star.beta, star.gamma, shape, incubation, population);
            let mut inner_beta = Vec::with_capacity(cfg.b_in);
            let mut inner_r0 = Vec::with_capacity(cfg.b_in);
            for i in 0..cfg.b_in {
                let inner_seed = stream_seed(rep_seed, &[tag::BOOT_INNER, i as u64]);
                if let Ok(est) = replicate_estimate(
                    &inner_model,
                    n,
                    cfg.omega,
                    cfg.max_tries,
                    &plan,
                    inner_seed,
                ) {
                    inner_beta.push(est.beta);
                    inner_r0.push(est.r0);
                }
            }
            if inner_beta.len() < 2 {
                return (
                    ReplicateDiagnostics {
                        outcome: ReplicateOutcome::DegenerateInnerSe,
                        ..diagnostics
                    },
                    None,
                );
            }
            let se_beta = sample_sd(&inner_beta);
            let se_r0 = sample_sd(&inner_r0);
            if !(se_beta > 0.0 && se_beta.is_finite() && se_r0 > 0.0 && se_r0.is_finite()) {
                return (
                    ReplicateDiagnostics {
                        outcome: ReplicateOutcome::DegenerateInnerSe,
                        ..diagnostics
                    },
                    None,
                );
            }
            (
                diagnostics,
                Some(OuterOutcome {
                    t_beta: (star.beta - beta) / se_beta,
                    t_r0: (star.r0 - beta / gamma) / se_r0,
                }),
            )
        })
        .collect();

    let mut replicates = Vec::with_capacity(cfg.b_out);
    let mut t_beta = Vec::new();
    let mut t_r0 = Vec::new();
    let (mut failed_conditioning, mut failed_estimation, mut dropped_degenerate_se) = (0, 0, 0);
    for (diag, outcome) in outer {
        match diag.outcome {
            ReplicateOutcome::Used => {
                let out = outcome.expect("used replicates carry statistics");
                t_beta.push(out.t_beta);
                t_r0.push(out.t_r0);
            }
            ReplicateOutcome::ConditioningFailed => failed_conditioning += 1,
            ReplicateOutcome::EstimationFailed => failed_estimation += 1,
            ReplicateOutcome::DegenerateInnerSe => dropped_degenerate_se += 1,
        }
        replicates.push(diag);
    }

    if 2 * failed_conditioning > cfg.b_out {
        return Err(Error::Bootstrap(format!(
            "conditioning failed in {failed_conditioning} of {} replicates \
             (target size {n}, window {}%, {} attempts each); the fitted rates \
             rarely reproduce an epidemic of the observed size",
            cfg.b_out,
            100.0 * cfg.omega,
            cfg.max_tries
        )));
    }
    if t_beta.len() < 2 {
        return Err(Error::Bootstrap(format!(
            "only {} of {} outer replicates were usable \
             ({failed_conditioning} conditioning failures, {failed_estimation} estimation \
             failures, {dropped_degenerate_se} degenerate inner spreads)",
            t_beta.len(),
            cfg.b_out
        )));
    }

    // Point standard errors from a dedicated plain replicate run.
    let se_samples: Vec<Option<(f64, f64)>> = (0..cfg.se_reps)
        .into_par_iter()
        .map(|r| {
            let seed = stream_seed(cfg.seed, &[tag::BOOT_SE, r as u64]);
            replicate_estimate(&model, n, cfg.omega, cfg.max_tries, &plan, seed)
                .ok()
                .map(|est| (est.beta, est.r0))
        })
        .collect();
    let se_beta_samples: Vec<f64> = se_samples.iter().flatten().map(|(b, _)| *b).collect();
    let se_r0_samples: Vec<f64> = se_samples.iter().flatten().map(|(_, r)| *r).collect();
    if se_beta_samples.len() < 2 {
        return Err(Error::Bootstrap(format!(
            "only {} of {} standard-error replicates were usable",
            se_beta_samples.len(),
            cfg.se_reps
        )));
    }
    let se_beta = sample_sd(&se_beta_samples);
    let se_r0 = sample_sd(&se_r0_samples);
    if !(se_beta > 0.0 && se_beta.is_finite() && se_r0 > 0.0 && se_r0.is_finite()) {
        return Err(Error::Bootstrap(
            "degenerate standard error for the point estimates".into(),
        ));
    }

    t_beta.sort_by(|a, b| a.partial_cmp(b).expect("finite t statistics"));
    t_r0.sort_by(|a, b| a.partial_cmp(b).expect("finite t statistics"));
    let used = t_beta.len();

    Ok(BootstrapResult {
        beta: studentized_interval(beta, se_beta, &t_beta, cfg.alpha),
        r0: studentized_interval(beta / gamma, se_r0, &t_r0, cfg.alpha),
        used,
        failed_conditioning,
        failed_estimation,
        dropped_degenerate_se,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::inject_missingness;
    use crate::simulate::simulate_sir;

    #[test]
    fn quantile_interpolates_between_closest_ranks() {
        let s = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(empirical_quantile(&s, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&s, 1.0).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&[3.0], 0.21).unwrap(), 3.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&s, 1.5).is_err());
    }

    #[test]
    fn symmetric_t_sample_centers_the_midpoint_on_the_point() {
        let t = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let interval = studentized_interval(3.0, 0.5, &t, 0.5);
        assert_eq!(interval.t_lower, -1.0);
        assert_eq!(interval.t_upper, 1.0);
        assert_eq!(interval.lower, 2.5);
        assert_eq!(interval.upper, 3.5);
        assert_eq!(interval.midpoint, 3.0);
    }

    #[test]
    fn config_validation_rejects_out_of_range_settings() {
        let ok = BootstrapConfig::new(1);
        assert!(ok.validate().is_ok());
        for bad in [
            BootstrapConfig { b_out: 1, ..ok.clone() },
            BootstrapConfig { b_in: 0, ..ok.clone() },
            BootstrapConfig { se_reps: 1, ..ok.clone() },
            BootstrapConfig { omega: 0.0, ..ok.clone() },
            BootstrapConfig { omega: 1.0, ..ok.clone() },
            BootstrapConfig { alpha: 0.0, ..ok.clone() },
            BootstrapConfig { p_missing: -0.1, ..ok.clone() },
            BootstrapConfig { p_inf_missing: 1.5, ..ok.clone() },
            BootstrapConfig { max_tries: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?} should not validate");
        }
    }

    /// A small masked outbreak plus its point estimates, shared by the
    /// end-to-end tests below.
    fn masked_outbreak() -> (Vec<CaseRecord>, usize, f64, f64) {
        let population = 60;
        let log = simulate_sir(2.0, 1.0, population, 61).unwrap();
        assert!(log.cases.len() >= 20, "seed must give a real outbreak, got {}", log.cases.len());
        let (masked, _) = inject_missingness(&log.cases, 0.2, 0.8, 11).unwrap();
        let gamma_hat = mle_gamma(&masked, 1).unwrap();
        let beta_tilde = impute_beta_tilde(&masked, population, 1, 0.0, gamma_hat).unwrap().value;
        (masked, population, beta_tilde, gamma_hat)
    }

    #[test]
    fn bootstrap_is_deterministic_and_accounts_for_every_replicate() {
        let (masked, population, beta_tilde, gamma_hat) = masked_outbreak();
        let cfg = BootstrapConfig {
            b_out: 12,
            b_in: 4,
            se_reps: 8,
            omega: 0.5,
            p_missing: 0.2,
            p_inf_missing: 0.8,
            max_tries: 300,
            ..BootstrapConfig::new(7)
        };
        let first = bootstrap_t(&masked, population, 1, 0.0, beta_tilde, gamma_hat, &cfg).unwrap();
        let second = bootstrap_t(&masked, population, 1, 0.0, beta_tilde, gamma_hat, &cfg).unwrap();
        assert_eq!(first, second);

        assert_eq!(
            first.used
                + first.failed_conditioning
                + first.failed_estimation
                + first.dropped_degenerate_se,
            cfg.b_out
        );
        assert_eq!(first.replicates.len(), cfg.b_out);
        for interval in [&first.beta, &first.r0] {
            assert!(interval.lower <= interval.midpoint && interval.midpoint <= interval.upper);
            assert!(interval.se > 0.0);
            assert!(interval.t_lower <= interval.t_upper);
        }
        assert_eq!(first.beta.point, beta_tilde);
        assert_eq!(first.r0.point, beta_tilde / gamma_hat);
        // Replicate sizes honor the conditioning window.
        let n = masked.len() as f64;
        for diag in first.replicates.iter().filter(|d| d.outcome == ReplicateOutcome::Used) {
            let size = diag.size.unwrap() as f64;
            assert!(size >= (1.0 - cfg.omega) * n - 1.0 && size <= (1.0 + cfg.omega) * n + 1.0);
        }
    }

    #[test]
    fn mirror_reinjection_is_deterministic_too() {
        let (masked, population, beta_tilde, gamma_hat) = masked_outbreak();
        let cfg = BootstrapConfig {
            b_out: 6,
            b_in: 3,
            se_reps: 4,
            omega: 0.5,
            reinjection: Reinjection::Mirror,
            max_tries: 300,
            ..BootstrapConfig::new(19)
        };
        let first = bootstrap_t(&masked, population, 1, 0.0, beta_tilde, gamma_hat, &cfg).unwrap();
        let second = bootstrap_t(&masked, population, 1, 0.0, beta_tilde, gamma_hat, &cfg).unwrap();
        assert_eq!(first, second);
        assert!(first.used >= 2);
    }

    #[test]
    fn hopeless_conditioning_is_reported_with_counts() {
        // Rates this subcritical essentially never reproduce a 30-case
        // epidemic, so every replicate exhausts its attempts.
        let data: Vec<CaseRecord> =
            (0..30).map(|j| CaseRecord::complete(j, j as f64 * 0.1, j as f64 * 0.1 + 1.0)).collect();
        let cfg = BootstrapConfig {
            b_out: 4,
            b_in: 2,
            se_reps: 2,
            max_tries: 3,
            ..BootstrapConfig::new(3)
        };
        let err = bootstrap_t(&data, 200, 1, 0.0, 0.05, 1.0, &cfg).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("conditioning failed in 4 of 4"), "unexpected message: {message}");
    }

    #[test]
    fn invalid_point_estimates_are_rejected() {
        let data = vec![CaseRecord::complete(1, 0.0, 1.0)];
        let cfg = BootstrapConfig::new(1);
        assert!(bootstrap_t(&data, 10, 1, 0.0, 0.0, 1.0, &cfg).is_err());
        assert!(bootstrap_t(&data, 10, 1, 0.0, 1.0, f64::NAN, &cfg).is_err());
        assert!(bootstrap_t(&data, 0, 1, 0.0, 1.0, 1.0, &cfg).is_err());
    }
}
