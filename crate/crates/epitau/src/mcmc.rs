//! Data-augmented Metropolis-within-Gibbs sampling for partially observed
//! outbreaks.
//!
//! With complete data the Gamma-family priors for the pairwise infection rate
//! and the removal rate are conjugate, so each iteration draws both rates in
//! closed form. Missing endpoints are treated as extra unknowns: every
//! iteration proposes fresh values for a few of them from the fitted duration
//! distribution and accepts with a Hastings ratio on the marginal density that
//! integrates the infection rate out (this keeps the augmented times and the
//! infection rate from dragging each other around). The duration density in
//! the target cancels against the proposal, leaving a ratio of feasibility
//! counts and integrated-pressure powers that does not involve the removal
//! rate at all.
//!
//! Proposals only redraw one case's endpoint, so the sampler keeps the pair
//! pressure row sums and per-case feasible-infector counts incrementally; one
//! attempt costs O(n) instead of O(n^2).

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pairwise_tau, CaseRecord};
use crate::numeric::CompensatedSum;
use crate::stream::{stream_rng, stream_seed, tag};

/// Gamma shape/rate pairs for the pairwise infection rate (`beta / N`) and
/// the removal rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta_shape: f64,
    pub beta_rate: f64,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl PriorSpec {
    /// A vague prior: shape and rate of 1e-3 for both rates, so posterior
    /// means sit next to the maximum likelihood estimates.
    pub fn vague() -> Self {
        PriorSpec { beta_shape: 1e-3, beta_rate: 1e-3, gamma_shape: 1e-3, gamma_rate: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_shape", self.beta_shape),
            ("beta_rate", self.beta_rate),
            ("gamma_shape", self.gamma_shape),
            ("gamma_rate", self.gamma_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("prior {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Prior mean of the removal rate; the default fill rate for
    /// initializing augmented durations.
    pub fn gamma_mean(&self) -> f64 {
        self.gamma_shape / self.gamma_rate
    }
}

/// Posterior parameters `(shape, rate)` of the removal rate given `n`
/// completed (possibly augmented) infectious periods summing to
/// `total_duration`, with Erlang shape `m` per period. With no cases the
/// prior comes back unchanged.
pub fn gamma_posterior(
    prior: &PriorSpec,
    shape: u32,
    n: usize,
    total_duration: f64,
) -> (f64, f64) {
    if n == 0 {
        return (prior.gamma_shape, prior.gamma_rate);
    }
    (prior.gamma_shape + shape as f64 * n as f64, prior.gamma_rate + total_duration)
}

/// Posterior parameters `(shape, rate)` of the pairwise infection rate given
/// `n` cases and integrated pressure `pressure`. A single case contributes no
/// infection events, so its posterior shape is the prior's.
pub fn beta_posterior(prior: &PriorSpec, n: usize, pressure: f64) -> (f64, f64) {
    if n == 0 {
        return (prior.beta_shape, prior.beta_rate);
    }
    (prior.beta_shape + (n - 1) as f64, prior.beta_rate + pressure)
}

/// Which endpoint of a case an augmented value stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Infection,
    Removal,
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Gibbs iterations (chain length; no burn-in is discarded here).
    pub iterations: usize,
    /// Endpoint update attempts per iteration. `None` means one per missing
    /// endpoint, an expected full sweep.
    pub attempts: Option<usize>,
    /// Removal rate used to initialize augmented durations; defaults to the
    /// prior mean.
    pub init_gamma: Option<f64>,
    /// Freeze the removal rate at this value instead of drawing it. The
    /// endpoint updates then target the augmented-time distribution
    /// conditional on this rate, which is handy for validating the sampler.
    pub fixed_gamma: Option<f64>,
    pub seed: u64,
}

impl McmcConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        McmcConfig { iterations, attempts: None, init_gamma: None, fixed_gamma: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidInput("need at least one iteration".into()));
        }
        if self.attempts == Some(0) {
            return Err(Error::InvalidInput("need at least one endpoint attempt".into()));
        }
        for (name, v) in [("init_gamma", self.init_gamma), ("fixed_gamma", self.fixed_gamma)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Raw sampler output. `beta` stores the population-scaled infection rate
/// (the pairwise draw times the population size). Burn-in and thinning are
/// the caller's choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub accepted_infection: u64,
    pub attempted_infection: u64,
    pub accepted_removal: u64,
    pub attempted_removal: u64,
    /// The endpoints that were augmented, as `(case id, endpoint)`, in the
    /// column order of `endpoint_trace`.
    pub missing_endpoints: Vec<(u64, Endpoint)>,
    /// Per-iteration values of the augmented endpoints.
    pub endpoint_trace: Vec<Vec<f64>>,
    /// The input cases completed with the final augmented endpoints.
    pub augmented: Vec<CaseRecord>,
}

impl Chain {
    /// Reproduction number draws, `beta / gamma` per iteration.
    pub fn r0(&self) -> Vec<f64> {
        self.beta.iter().zip(&self.gamma).map(|(b, g)| b / g).collect()
    }

    /// Fraction of endpoint proposals accepted (1 when there were none).
    pub fn acceptance_rate(&self) -> f64 {
        let attempted = self.attempted_infection + self.attempted_removal;
        if attempted == 0 {
            return 1.0;
        }
        (self.accepted_infection + self.accepted_removal) as f64 / attempted as f64
    }
}

/// Augmented-time state with incrementally maintained sufficient statistics.
///
/// `pressure_on[l]` is the pairwise pressure received by case `l` from all
/// other cases; `counts[l]` is its number of feasible infectors (cases whose
/// infectious window strictly covers `l`'s exposure). The integrated pressure
/// and the feasibility product skip the index case, whichever it currently is.
struct AugState {
    population: usize,
    delta: f64,
    /// Posterior shape of the pairwise infection rate (prior shape + n - 1).
    power: f64,
    /// Prior rate of the pairwise infection rate.
    beta_rate: f64,
    ids: Vec<u64>,
    i: Vec<f64>,
    r: Vec<f64>,
    pressure_on: Vec<f64>,
    counts: Vec<u32>,
    index: usize,
}

/// Candidate statistics for one proposal, filled by [`AugState::evaluate`].
struct Scratch {
    pressure: Vec<f64>,
    counts: Vec<u32>,
}

struct ProposalEval {
    log_h: f64,
    index: usize,
}

fn cover(i_k: f64, r_k: f64, e_l: f64) -> bool {
    i_k < e_l && e_l < r_k
}

impl AugState {
    fn build(
        ids: Vec<u64>,
        i: Vec<f64>,
        r: Vec<f64>,
        population: usize,
        delta: f64,
        prior: &PriorSpec,
    ) -> AugState {
        let n = i.len();
        let mut state = AugState {
            population,
            delta,
            power: prior.beta_shape + (n - 1) as f64,
            beta_rate: prior.beta_rate,
            ids,
            i,
            r,
            pressure_on: vec![0.0; n],
            counts: vec![0; n],
            index: 0,
        };
        let (pressure_on, counts, index) = state.recompute();
        state.pressure_on = pressure_on;
        state.counts = counts;
        state.index = index;
        state
    }

    /// Everything from scratch; the ground truth the incremental updates are
    /// checked against.
    fn recompute(&self) -> (Vec<f64>, Vec<u32>, usize) {
        let n = self.i.len();
        let mut pressure_on = vec![0.0; n];
        let mut counts = vec![0u32; n];
        for l in 0..n {
            let e_l = self.i[l] - self.delta;
            let mut sum = CompensatedSum::new();
            for k in 0..n {
                if k == l {
                    continue;
                }
                sum.add(pairwise_tau(self.i[k], self.r[k], e_l));
                if cover(self.i[k], self.r[k], e_l) {
                    counts[l] += 1;
                }
            }
            pressure_on[l] = sum.value();
        }
        (pressure_on, counts, self.argmin_index(None))
    }

    /// Position of the index case: smallest infection time, ties to the
    /// smallest id. `substitute` overrides one case's infection time, for
    /// evaluating proposals without committing them.
    fn argmin_index(&self, substitute: Option<(usize, f64)>) -> usize {
        let value = |l: usize| match substitute {
            Some((j, v)) if j == l => v,
            _ => self.i[l],
        };
        let mut best = 0usize;
        for l in 1..self.i.len() {
            let (v, b) = (value(l), value(best));
            if v < b || (v == b && self.ids[l] < self.ids[best]) {
                best = l;
            }
        }
        best
    }

    fn total_duration(&self) -> f64 {
        let mut sum = CompensatedSum::new();
        for (i, r) in self.i.iter().zip(&self.r) {
            sum.add(r - i);
        }
        sum.value()
    }

    /// Integrated pressure: pairwise pressure received by every non-index
    /// case plus what the never-infected absorb.
    fn pressure_b(&self) -> f64 {
        self.pressure_from(&self.pressure_on, self.index, self.total_duration())
    }

    fn pressure_from(&self, pressure_on: &[f64], index: usize, total_duration: f64) -> f64 {
        let mut sum = CompensatedSum::new();
        for (l, p) in pressure_on.iter().enumerate() {
            if l != index {
                sum.add(*p);
            }
        }
        sum.value() + (self.population - self.i.len()) as f64 * total_duration
    }

    /// Log feasibility product over non-index cases; `-inf` when some case
    /// has no feasible infector.
    fn log_c_from(counts: &[u32], index: usize) -> f64 {
        let mut log_c = 0.0;
        for (l, c) in counts.iter().enumerate() {
            if l == index {
                continue;
            }
            if *c == 0 {
                return f64::NEG_INFINITY;
            }
            log_c += (*c as f64).ln();
        }
        log_c
    }

    fn log_c(&self) -> f64 {
        Self::log_c_from(&self.counts, self.index)
    }

    /// Log Hastings ratio for moving case `j`'s `endpoint` to `value`,
    /// leaving the candidate statistics in `scratch` for [`AugState::commit`].
    fn evaluate(
        &self,
        j: usize,
        endpoint: Endpoint,
        value: f64,
        scratch: &mut Scratch,
    ) -> ProposalEval {
        let n = self.i.len();
        let (i_j_new, r_j_new) = match endpoint {
            Endpoint::Infection => (value, self.r[j]),
            Endpoint::Removal => (self.i[j], value),
        };
        let e_j_new = i_j_new - self.delta;

        scratch.pressure.clear();
        scratch.pressure.extend_from_slice(&self.pressure_on);
        scratch.counts.clear();
        scratch.counts.extend_from_slice(&self.counts);

        // Case j's outgoing pressure and coverage change for everyone else;
        // its own incoming row changes only if its exposure moved.
        for l in 0..n {
            if l == j {
                continue;
            }
            let e_l = self.i[l] - self.delta;
            let tau_old = pairwise_tau(self.i[j], self.r[j], e_l);
            let tau_new = pairwise_tau(i_j_new, r_j_new, e_l);
            scratch.pressure[l] += tau_new - tau_old;
            let covered_old = cover(self.i[j], self.r[j], e_l);
            let covered_new = cover(i_j_new, r_j_new, e_l);
            if covered_old != covered_new {
                if covered_new {
                    scratch.counts[l] += 1;
                } else {
                    scratch.counts[l] -= 1;
                }
            }
        }
        if matches!(endpoint, Endpoint::Infection) {
            let mut sum = CompensatedSum::new();
            let mut feasible = 0u32;
            for k in 0..n {
                if k == j {
                    continue;
                }
                sum.add(pairwise_tau(self.i[k], self.r[k], e_j_new));
                if cover(self.i[k], self.r[k], e_j_new) {
                    feasible += 1;
                }
            }
            scratch.pressure[j] = sum.value();
            scratch.counts[j] = feasible;
        }

        let index_new = self.argmin_index(Some((j, i_j_new)));
        let log_c_new = Self::log_c_from(&scratch.counts, index_new);
        if log_c_new == f64::NEG_INFINITY {
            return ProposalEval { log_h: f64::NEG_INFINITY, index: index_new };
        }

        let duration_new = self.total_duration() + (r_j_new - i_j_new) - (self.r[j] - self.i[j]);
        let b_old = self.pressure_b();
        let b_new = self.pressure_from(&scratch.pressure, index_new, duration_new);
        let log_h = (log_c_new - self.log_c())
            + self.power * ((self.beta_rate + b_old).ln() - (self.beta_rate + b_new).ln());
        ProposalEval { log_h, index: index_new }
    }

    /// Install an evaluated proposal.
    fn commit(&mut self, j: usize, endpoint: Endpoint, value: f64, eval: &ProposalEval, scratch: &mut Scratch) {
        match endpoint {
            Endpoint::Infection => self.i[j] = value,
            Endpoint::Removal => self.r[j] = value,
        }
        std::mem::swap(&mut self.pressure_on, &mut scratch.pressure);
        std::mem::swap(&mut self.counts, &mut scratch.counts);
        self.index = eval.index;
    }

    #[cfg(debug_assertions)]
    fn assert_consistent(&self) {
        let (pressure_on, counts, index) = self.recompute();
        assert_eq!(counts, self.counts, "feasibility counts drifted from a full recomputation");
        assert_eq!(index, self.index, "index case drifted from a full recomputation");
        for (maintained, fresh) in self.pressure_on.iter().zip(&pressure_on) {
            let scale = fresh.abs().max(1.0);
            assert!(
                (maintained - fresh).abs() <= 1e-9 * scale,
                "pressure row drifted: maintained {maintained}, recomputed {fresh}"
            );
        }
    }
}

/// Missing endpoints of `data`, as state-vector positions.
fn missing_endpoints(data: &[CaseRecord]) -> Vec<(usize, Endpoint)> {
    let mut missing = Vec::new();
    for (idx, case) in data.iter().enumerate() {
        if case.infection.is_none() {
            missing.push((idx, Endpoint::Infection));
        }
        if case.removal.is_none() {
            missing.push((idx, Endpoint::Removal));
        }
    }
    missing
}

/// Fill the missing endpoints with `fill_duration`-long periods anchored at
/// the observed endpoint.
fn fill_endpoints(data: &[CaseRecord], fill_duration: f64) -> (Vec<f64>, Vec<f64>) {
    let mut i = Vec::with_capacity(data.len());
    let mut r = Vec::with_capacity(data.len());
    for case in data {
        match (case.infection, case.removal) {
            (Some(inf), Some(rem)) => {
                i.push(inf);
                r.push(rem);
            }
            (Some(inf), None) => {
                i.push(inf);
                r.push(inf + fill_duration);
            }
            (None, Some(rem)) => {
                i.push(rem - fill_duration);
                r.push(rem);
            }
            (None, None) => unreachable!("validated: every case has an endpoint"),
        }
    }
    (i, r)
}

/// Doublings of the initial fill duration tried before giving up on a
/// feasible starting configuration.
const INIT_DOUBLINGS: u32 = 60;

/// Data-augmented Metropolis-within-Gibbs sampler.
///
/// Each iteration draws the pairwise infection rate and the removal rate from
/// their conjugate posteriors given the current augmented times, then makes
/// `attempts` endpoint updates: pick a missing endpoint uniformly (with
/// replacement), propose a fresh Erlang(m, gamma) duration anchored at the
/// observed endpoint, and accept by the marginal Hastings ratio. Augmented
/// durations are initialized at `m / init_gamma`, doubling the fill until
/// every case has a feasible infector.
///
/// Observed endpoints are never modified. With complete data the attempt loop
/// is empty and the chain is a plain conjugate Gibbs sampler. All draws come
/// from one stream seeded by `cfg.seed`.
pub fn run_damcmc(
    data: &[CaseRecord],
    population: usize,
    prior: &PriorSpec,
    shape: u32,
    incubation: f64,
    cfg: &McmcConfig,
) -> Result<Chain> {
    prior.validate()?;
    cfg.validate()?;
    if shape < 1 {
        return Err(Error::InvalidInput("Erlang shape must be >= 1".into()));
    }
    if !(incubation.is_finite() && incubation >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "incubation {incubation} must be finite and >= 0"
        )));
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
    for case in data {
        case.validate()?;
        if !case.has_endpoint() {
            return Err(Error::Data(format!(
                "case {}: augmentation needs at least one observed endpoint",
                case.id
            )));
        }
    }

    let missing = missing_endpoints(data);
    let attempts = cfg.attempts.unwrap_or_else(|| missing.len().max(1));
    let init_gamma = cfg.init_gamma.or(cfg.fixed_gamma).unwrap_or_else(|| prior.gamma_mean());
    if !(init_gamma.is_finite() && init_gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial removal rate must be positive, got {init_gamma}"
        )));
    }
    let ids: Vec<u64> = data.iter().map(|c| c.id).collect();

    // Mean-duration fill, doubled until the configuration can explain every
    // case. Complete data gets no such repair: an infeasible configuration is
    // then a property of the data.
    let mut state = None;
    for doubling in 0..=INIT_DOUBLINGS {
        let fill = 2f64.powi(doubling as i32) * shape as f64 / init_gamma;
        let (i, r) = fill_endpoints(data, fill);
        let candidate = AugState::build(ids.clone(), i, r, population, incubation, prior);
        if candidate.log_c().is_finite() {
            state = Some(candidate);
            break;
        }
        if missing.is_empty() {
            return Err(Error::Mcmc(
                "zero likelihood: some case's exposure falls outside every other case's \
                 infectious window, and there are no missing endpoints to adjust"
                    .into(),
            ));
        }
    }
    let mut state = state.ok_or_else(|| {
        Error::Mcmc(format!(
            "no feasible augmented starting configuration after {INIT_DOUBLINGS} fill doublings"
        ))
    })?;

    let mut rng = stream_rng(cfg.seed, &[tag::MCMC]);
    let proposal_shape = Gamma::new(shape as f64, 1.0).expect("valid Erlang shape");
    let mut scratch =
        Scratch { pressure: Vec::with_capacity(n), counts: Vec::with_capacity(n) };

    let mut chain = Chain {
        beta: Vec::with_capacity(cfg.iterations),
        gamma: Vec::with_capacity(cfg.iterations),
        accepted_infection: 0,
        attempted_infection: 0,
        accepted_removal: 0,
        attempted_removal: 0,
        missing_endpoints: missing.iter().map(|(idx, ep)| (data[*idx].id, *ep)).collect(),
        endpoint_trace: Vec::with_capacity(cfg.iterations),
        augmented: Vec::new(),
    };

    for _ in 0..cfg.iterations {
        // Conjugate draws from the current augmented times.
        let (beta_shape, beta_rate) = beta_posterior(
            &PriorSpec { beta_rate: state.beta_rate, ..*prior },
            n,
            state.pressure_b(),
        );
        let beta_n = Gamma::new(beta_shape, 1.0 / beta_rate)
            .expect("positive posterior parameters")
            .sample(&mut rng);
        chain.beta.push(beta_n * population as f64);

        let gamma_t = match cfg.fixed_gamma {
            Some(g) => g,
            None => {
                let (shape_g, rate_g) =
                    gamma_posterior(prior, shape, n, state.total_duration());
                Gamma::new(shape_g, 1.0 / rate_g)
                    .expect("positive posterior parameters")
                    .sample(&mut rng)
            }
        };
        chain.gamma.push(gamma_t);

        if !missing.is_empty() {
            for _ in 0..attempts {
                let (j, endpoint) = missing[rng.random_range(0..missing.len())];
                let duration = proposal_shape.sample(&mut rng) / gamma_t;
                let value = match endpoint {
                    Endpoint::Infection => state.r[j] - duration,
                    Endpoint::Removal => state.i[j] + duration,
                };
                match endpoint {
                    Endpoint::Infection => chain.attempted_infection += 1,
                    Endpoint::Removal => chain.attempted_removal += 1,
                }
                let eval = state.evaluate(j, endpoint, value, &mut scratch);
                if rng.random::<f64>().ln() < eval.log_h {
                    state.commit(j, endpoint, value, &eval, &mut scratch);
                    match endpoint {
                        Endpoint::Infection => chain.accepted_infection += 1,
                        Endpoint::Removal => chain.accepted_removal += 1,
                    }
                }
            }
        }

        chain.endpoint_trace.push(
            missing
                .iter()
                .map(|(idx, ep)| match ep {
                    Endpoint::Infection => state.i[*idx],
                    Endpoint::Removal => state.r[*idx],
                })
                .collect(),
        );

        #[cfg(debug_assertions)]
        for (idx, case) in data.iter().enumerate() {
            if let Some(inf) = case.infection {
                debug_assert_eq!(state.i[idx], inf, "observed infection time moved");
            }
            if let Some(rem) = case.removal {
                debug_assert_eq!(state.r[idx], rem, "observed removal time moved");
            }
        }
    }

    #[cfg(debug_assertions)]
    state.assert_consistent();

    chain.augmented = data
        .iter()
        .enumerate()
        .map(|(idx, case)| {
            let mut completed = case.clone();
            if case.infection.is_none() {
                completed.infection = Some(state.i[idx]);
                // A stale exposure would contradict the augmented onset.
                completed.exposure = None;
            }
            if case.removal.is_none() {
                completed.removal = Some(state.r[idx]);
            }
            completed
        })
        .collect();
    Ok(chain)
}

/// Run several independent chains in parallel, one derived seed per chain;
/// everything else matches [`run_damcmc`].
pub fn run_chains(
    data: &[CaseRecord],
    population: usize,
    prior: &PriorSpec,
    shape: u32,
    incubation: f64,
    cfg: &McmcConfig,
    n_chains: usize,
) -> Result<Vec<Chain>> {
    if n_chains == 0 {
        return Err(Error::InvalidInput("need at least one chain".into()));
    }
    (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let chain_cfg = McmcConfig {
                seed: stream_seed(cfg.seed, &[tag::MCMC, c as u64]),
                ..cfg.clone()
            };
            run_damcmc(data, population, prior, shape, incubation, &chain_cfg)
        })
        .collect()
}
