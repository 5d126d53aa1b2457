//! Point estimators for the transmission rate beta and removal rate gamma.
//!
//! Complete data give closed-form maximum-likelihood estimates. Under partial
//! endpoint observation the estimators here follow a plug-in strategy:
//! calibrate `gamma_hat` on the fully observed infectious periods only, then
//! rebuild the beta denominator either by imputing each pairwise pressure
//! `tau_kj` with its conditional expectation ([`impute_beta_tilde`]) or by
//! mean-filling the missing endpoints first ([`impute_beta_bar`]).
//!
//! Index-case convention: the denominator's pressure sum skips the index case
//! as an infectee — its infection was not generated by within-population
//! transmission. The index is the case with the smallest observed infection
//! time; when no infection time is observed anywhere, no case can be singled
//! out and every ordered pair enters the sum. That keeps the removal-only
//! pair sum at exactly `count*(count-1)/(2*gamma_hat)` (see
//! [`removal_only_pair_sum`]), which pins the full-outbreak reproduction
//! number at 2 regardless of the data — the degenerate behaviour the
//! interval machinery in [`crate::bootstrap`] is designed to flag.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::{expected_duration, expected_tau};
use crate::model::{index_case, pairwise_tau_cases, CaseRecord, KernelSpec, PairObservation};
use crate::numeric::CompensatedSum;

/// Which estimator produced a result (serialized tag for reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    GammaMle,
    BetaMle,
    BetaTilde,
    BetaBar,
    BetaGroup,
    BetaKernel,
    GammaGroup,
}

/// One reported estimate: a scalar or a per-group map, with the calibration
/// and population bookkeeping needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimator: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<String, f64>>,
    /// Reproduction number `beta / gamma` when a removal-rate estimate is
    /// paired with this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Number of fully observed infectious periods behind `gamma_hat`.
    pub calibration_count: usize,
    pub population: usize,
    pub cases: usize,
    /// True when a beta estimator had no secondary infections to learn from
    /// and pinned its value at 0.
    #[serde(default)]
    pub no_secondary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A transmission-rate estimate plus the number of infection events behind
/// its numerator. Zero infections (a single-case outbreak, or a group that
/// saw none) pins the value at 0 instead of erroring, so size-conditioned
/// resampling can observe the degenerate run and reject it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub value: f64,
    pub infections: usize,
}

impl BetaEstimate {
    /// No post-index (or in-group) infections: the value carries no signal.
    pub fn no_secondary(&self) -> bool {
        self.infections == 0
    }
}

/// How pressure and duration terms are produced: directly from fully
/// observed endpoints, or as conditional expectations under a calibrated
/// removal rate.
#[derive(Clone, Copy)]
enum Route {
    Observed,
    Expected { gamma: f64, shape: u32 },
}

impl Route {
    fn tau(&self, k: &CaseRecord, j: &CaseRecord, delta: f64) -> Result<f64> {
        match *self {
            Route::Observed => pairwise_tau_cases(k, j, delta),
            Route::Expected { gamma, shape } => expected_tau(&PairObservation {
                i_k: k.infection,
                r_k: k.removal,
                i_j: j.infection,
                r_j: j.removal,
                gamma_k: gamma,
                gamma_j: gamma,
                shape,
                incubation: delta,
            }),
        }
    }

    fn duration(&self, c: &CaseRecord) -> Result<f64> {
        match *self {
            Route::Observed => match (c.infection, c.removal) {
                (Some(i), Some(r)) => Ok(r - i),
                _ => Err(Error::Data(format!(
                    "case {}: both endpoints required for the complete-data estimator",
                    c.id
                ))),
            },
            Route::Expected { gamma, shape } => expected_duration(c, gamma, shape),
        }
    }
}

fn validate_data(data: &[CaseRecord], population: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty case list".into()));
    }
    if population < data.len() {
        return Err(Error::InvalidInput(format!(
            "population {population} smaller than case count {}",
            data.len()
        )));
    }
    for c in data {
        c.validate()?;
        if !c.has_endpoint() {
            return Err(Error::Data(format!("case {}: no observed endpoint", c.id)));
        }
    }
    Ok(())
}

fn validate_gamma(gamma_hat: f64) -> Result<()> {
    if gamma_hat.is_finite() && gamma_hat > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma_hat {gamma_hat} must be positive")))
    }
}

fn validate_shape(shape: u32) -> Result<()> {
    if shape >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidInput("Erlang shape must be >= 1".into()))
    }
}

/// The case position skipped as an infectee, when one can be identified.
fn identified_index(data: &[CaseRecord]) -> Result<Option<usize>> {
    if data.iter().any(|c| c.infection.is_some()) {
        Ok(Some(index_case(data)?))
    } else {
        Ok(None)
    }
}

/// Number of cases with both endpoints observed (the gamma calibration set).
pub fn complete_count(data: &[CaseRecord]) -> usize {
    data.iter().filter(|c| c.is_complete()).count()
}

/// Removal-rate MLE `m * n_C / sum of complete durations` over the cases with
/// both endpoints observed; partially observed cases never contribute.
pub fn mle_gamma(data: &[CaseRecord], shape: u32) -> Result<f64> {
    validate_shape(shape)?;
    let mut total = CompensatedSum::new();
    let mut n_c = 0usize;
    for c in data {
        c.validate()?;
        if let (Some(i), Some(r)) = (c.infection, c.removal) {
            total.add(r - i);
            n_c += 1;
        }
    }
    if n_c == 0 {
        return Err(Error::Estimation("no complete infectious periods".into()));
    }
    Ok(f64::from(shape) * n_c as f64 / total.value())
}

/// Per-removal-group removal-rate MLEs. Every case must carry a removal
/// group; a group whose periods are all incomplete cannot be calibrated.
pub fn mle_gamma_group(data: &[CaseRecord], shape: u32) -> Result<BTreeMap<String, f64>> {
    validate_shape(shape)?;
    let mut sums: BTreeMap<String, (CompensatedSum, usize)> = BTreeMap::new();
    for c in data {
        c.validate()?;
        let g = c.removal_group.clone().ok_or_else(|| {
            Error::Data(format!("case {}: no removal group for grouped estimation", c.id))
        })?;
        let entry = sums.entry(g).or_insert_with(|| (CompensatedSum::new(), 0));
        if let (Some(i), Some(r)) = (c.infection, c.removal) {
            entry.0.add(r - i);
            entry.1 += 1;
        }
    }
    let mut out = BTreeMap::new();
    for (g, (total, n_f)) in sums {
        if n_f == 0 {
            return Err(Error::Estimation(format!(
                "no complete infectious periods in removal group \"{g}\""
            )));
        }
        out.insert(g, f64::from(shape) * n_f as f64 / total.value());
    }
    Ok(out)
}

fn beta_core(
    data: &[CaseRecord],
    population: usize,
    delta: f64,
    route: Route,
) -> Result<BetaEstimate> {
    validate_data(data, population)?;
    let n = data.len();
    if n == 1 {
        return Ok(BetaEstimate { value: 0.0, infections: 0 });
    }
    let skip = identified_index(data)?;
    let mut pressure = CompensatedSum::new();
    for (jpos, j) in data.iter().enumerate() {
        if Some(jpos) == skip {
            continue;
        }
        for (kpos, k) in data.iter().enumerate() {
            if kpos != jpos {
                pressure.add(route.tau(k, j, delta)?);
            }
        }
    }
    let mut durations = CompensatedSum::new();
    for c in data {
        durations.add(route.duration(c)?);
    }
    let denom = pressure.value() + (population - n) as f64 * durations.value();
    if denom <= 0.0 {
        return Err(Error::Estimation(format!(
            "total infectious exposure {denom} is not positive"
        )));
    }
    Ok(BetaEstimate {
        value: (n - 1) as f64 * population as f64 / denom,
        infections: n - 1,
    })
}

/// Complete-data transmission-rate MLE
/// `(n-1) * N / [pair pressures + (N-n) * total infectious time]`.
///
/// Every case needs both endpoints. A single-case outbreak returns 0 with
/// [`BetaEstimate::no_secondary`] set; a zero denominator (no overlap at all
/// with `n = N`) is an error.
pub fn mle_beta(data: &[CaseRecord], population: usize, incubation: f64) -> Result<BetaEstimate> {
    beta_core(data, population, incubation, Route::Observed)
}

/// Pressure-imputation estimator: the complete-data formula with each
/// missing `tau_kj` and duration replaced by its conditional expectation
/// under `gamma_hat` (normally [`mle_gamma`] on the complete subset).
///
/// Exactly equals [`mle_beta`] when nothing is missing. Combinations without
/// a closed form ([`Error::NoClosedForm`]) propagate to the caller.
pub fn impute_beta_tilde(
    data: &[CaseRecord],
    population: usize,
    shape: u32,
    incubation: f64,
    gamma_hat: f64,
) -> Result<BetaEstimate> {
    validate_shape(shape)?;
    validate_gamma(gamma_hat)?;
    beta_core(data, population, incubation, Route::Expected { gamma: gamma_hat, shape })
}

/// Mean-duration baseline: fill each missing endpoint with the mean period
/// (`i = r - m/gamma_hat`, `r = i + m/gamma_hat`), then run [`mle_beta`] on
/// the filled records. Ignores the relative order of observed endpoints,
/// which is exactly the information [`impute_beta_tilde`] keeps.
pub fn impute_beta_bar(
    data: &[CaseRecord],
    population: usize,
    shape: u32,
    incubation: f64,
    gamma_hat: f64,
) -> Result<BetaEstimate> {
    validate_shape(shape)?;
    validate_gamma(gamma_hat)?;
    let mean = f64::from(shape) / gamma_hat;
    let filled: Vec<CaseRecord> = data
        .iter()
        .map(|c| {
            let mut c = c.clone();
            match (c.infection, c.removal) {
                (Some(_), Some(_)) => {}
                (Some(i), None) => c.removal = Some(i + mean),
                (None, Some(r)) => c.infection = Some(r - mean),
                (None, None) => {
                    return Err(Error::Data(format!("case {}: no observed endpoint", c.id)))
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    mle_beta(&filled, population, incubation)
}

/// Exact total of the imputed pressures over all ordered pairs of a
/// removal-only set with a shared rate: `count*(count-1) / (2*gamma_hat)`.
/// Each unordered pair's two directions sum to `1/gamma_hat` no matter how
/// far apart the removals are, so the total is pinned by the count alone.
pub fn removal_only_pair_sum(count: usize, gamma_hat: f64) -> f64 {
    (count * count.saturating_sub(1)) as f64 / (2.0 * gamma_hat)
}

fn beta_group_core(
    data: &[CaseRecord],
    population: usize,
    group_sizes: &BTreeMap<String, usize>,
    delta: f64,
    route: Route,
) -> Result<BTreeMap<String, BetaEstimate>> {
    validate_data(data, population)?;
    let sized: usize = group_sizes.values().sum();
    if sized != population - 1 {
        return Err(Error::InvalidInput(format!(
            "group sizes sum to {sized}, expected population - 1 = {}",
            population - 1
        )));
    }
    let skip = identified_index(data)?;

    // Total infectious time is shared: every group's never-infected members
    // feel pressure from all infectives.
    let mut durations = CompensatedSum::new();
    for c in data {
        durations.add(route.duration(c)?);
    }
    let total_duration = durations.value();

    let mut pressures: BTreeMap<&str, CompensatedSum> = BTreeMap::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (jpos, j) in data.iter().enumerate() {
        if Some(jpos) == skip {
            continue;
        }
        let g = j.infection_group.as_deref().ok_or_else(|| {
            Error::Data(format!("case {}: no infection group for grouped estimation", j.id))
        })?;
        if !group_sizes.contains_key(g) {
            return Err(Error::Data(format!(
                "case {}: infection group \"{g}\" has no declared size",
                j.id
            )));
        }
        *counts.entry(g).or_default() += 1;
        let sum = pressures.entry(g).or_insert_with(CompensatedSum::new);
        for (kpos, k) in data.iter().enumerate() {
            if kpos != jpos {
                sum.add(route.tau(k, j, delta)?);
            }
        }
    }

    let mut out = BTreeMap::new();
    for (g, &size) in group_sizes {
        let n_g = counts.get(g.as_str()).copied().unwrap_or(0);
        if n_g == 0 {
            out.insert(g.clone(), BetaEstimate { value: 0.0, infections: 0 });
            continue;
        }
        if size < n_g {
            return Err(Error::Data(format!(
                "group \"{g}\": size {size} smaller than its {n_g} infections"
            )));
        }
        let pair_sum = pressures.get(g.as_str()).map_or(0.0, CompensatedSum::value);
        let denom = pair_sum + (size - n_g) as f64 * total_duration;
        if denom <= 0.0 {
            return Err(Error::Estimation(format!(
                "group \"{g}\": total infectious exposure {denom} is not positive"
            )));
        }
        out.insert(
            g.clone(),
            BetaEstimate { value: n_g as f64 * population as f64 / denom, infections: n_g },
        );
    }
    Ok(out)
}

/// Group-specific transmission-rate MLEs, keyed by the susceptible's
/// infection group. `group_sizes` counts the population beyond the index
/// case (they must sum to `N - 1`); groups that saw no infection get value 0
/// with [`BetaEstimate::no_secondary`] set.
pub fn mle_beta_group(
    data: &[CaseRecord],
    population: usize,
    group_sizes: &BTreeMap<String, usize>,
    incubation: f64,
) -> Result<BTreeMap<String, BetaEstimate>> {
    beta_group_core(data, population, group_sizes, incubation, Route::Observed)
}

/// Group-specific pressure-imputation estimators; see [`impute_beta_tilde`]
/// and [`mle_beta_group`].
pub fn impute_beta_tilde_group(
    data: &[CaseRecord],
    population: usize,
    group_sizes: &BTreeMap<String, usize>,
    shape: u32,
    incubation: f64,
    gamma_hat: f64,
) -> Result<BTreeMap<String, BetaEstimate>> {
    validate_shape(shape)?;
    validate_gamma(gamma_hat)?;
    beta_group_core(
        data,
        population,
        group_sizes,
        incubation,
        Route::Expected { gamma: gamma_hat, shape },
    )
}

fn beta_kernel_core(
    data: &[CaseRecord],
    population: usize,
    kernel: &KernelSpec,
    susceptible_locations: &[[f64; 2]],
    delta: f64,
    route: Route,
) -> Result<BetaEstimate> {
    validate_data(data, population)?;
    kernel.validate()?;
    let n = data.len();
    if n + susceptible_locations.len() != population {
        return Err(Error::InvalidInput(format!(
            "{n} cases + {} susceptible locations != population {population}",
            susceptible_locations.len()
        )));
    }
    let mut located = Vec::with_capacity(n);
    for c in data {
        located.push(c.location.ok_or_else(|| {
            Error::Data(format!("case {}: missing location for kernel estimation", c.id))
        })?);
    }
    if n == 1 {
        return Ok(BetaEstimate { value: 0.0, infections: 0 });
    }
    let skip = identified_index(data)?;

    let mut pressure = CompensatedSum::new();
    for (jpos, j) in data.iter().enumerate() {
        if Some(jpos) == skip {
            continue;
        }
        for (kpos, k) in data.iter().enumerate() {
            if kpos != jpos {
                pressure.add(route.tau(k, j, delta)? * kernel.eval(located[kpos], located[jpos]));
            }
        }
    }
    let mut cross = CompensatedSum::new();
    for (jpos, j) in data.iter().enumerate() {
        let mut reach = CompensatedSum::new();
        for s in susceptible_locations {
            reach.add(kernel.eval(*s, located[jpos]));
        }
        cross.add(route.duration(j)? * reach.value());
    }
    let denom = pressure.value() + cross.value();
    if denom <= 0.0 {
        return Err(Error::Estimation(format!(
            "kernel-weighted infectious exposure {denom} is not positive"
        )));
    }
    Ok(BetaEstimate {
        value: (n - 1) as f64 * population as f64 / denom,
        infections: n - 1,
    })
}

/// Baseline transmission rate for a kernel model: the complete-data formula
/// with every pressure and cross term weighted by `h(x_k, x_j)`. Infected
/// cases carry their own coordinates; `susceptible_locations` lists the
/// `N - n` never-infected ones, so together all N individuals are located.
/// Reduces to [`mle_beta`] when the kernel is identically 1.
pub fn mle_beta_kernel(
    data: &[CaseRecord],
    population: usize,
    kernel: &KernelSpec,
    susceptible_locations: &[[f64; 2]],
    incubation: f64,
) -> Result<BetaEstimate> {
    beta_kernel_core(data, population, kernel, susceptible_locations, incubation, Route::Observed)
}

/// Kernel-weighted pressure-imputation estimator; see [`impute_beta_tilde`]
/// and [`mle_beta_kernel`].
pub fn impute_beta_tilde_kernel(
    data: &[CaseRecord],
    population: usize,
    kernel: &KernelSpec,
    susceptible_locations: &[[f64; 2]],
    shape: u32,
    incubation: f64,
    gamma_hat: f64,
) -> Result<BetaEstimate> {
    validate_shape(shape)?;
    validate_gamma(gamma_hat)?;
    beta_kernel_core(
        data,
        population,
        kernel,
        susceptible_locations,
        incubation,
        Route::Expected { gamma: gamma_hat, shape },
    )
}
