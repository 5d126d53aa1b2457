//! Core domain types: case records, rate models, observation patterns, and
//! the complete-data pairwise statistics.
//!
//! Conventions used throughout the crate:
//!
//! * An infected case `j` is exposed at `e_j`, becomes infectious at
//!   `i_j = e_j + delta` (fixed incubation `delta`, zero for SIR), and is
//!   removed at `r_j`. The infectious period `r_j - i_j` is Erlang(m, gamma_j).
//! * The pressure individual `k` exerts on `j` is
//!   `tau_kj = min(r_k, e_j) - min(e_j, i_k)`: zero if `j` was exposed before
//!   `k` turned infectious, and capped by `k`'s removal otherwise.
//! * Pairwise infection rates are `beta_kj / N` with `beta_kj` given by the
//!   model structure (shared, per-group-of-susceptible, or distance kernel).
//! * The index case is the earliest infection and is treated as exogenous: it
//!   contributes no infection-event factor and receives no pressure (every
//!   `tau_k,index` is zero since its exposure precedes all infections).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// One infected individual. `None` marks an unobserved quantity.
///
/// `exposure` is carried for round-tripping data files; computations always
/// derive exposure as `infection - delta` so that a single incubation
/// parameter governs the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: u64,
    pub exposure: Option<f64>,
    pub infection: Option<f64>,
    pub removal: Option<f64>,
    /// Group governing how susceptible this individual was (infection rate).
    pub infection_group: Option<String>,
    /// Group governing this individual's removal rate.
    pub removal_group: Option<String>,
    pub location: Option<[f64; 2]>,
}

impl CaseRecord {
    /// Fully observed case without group or location structure.
    pub fn complete(id: u64, infection: f64, removal: f64) -> Self {
        CaseRecord {
            id,
            exposure: None,
            infection: Some(infection),
            removal: Some(removal),
            infection_group: None,
            removal_group: None,
            location: None,
        }
    }

    /// Case with possibly missing endpoints.
    pub fn partial(id: u64, infection: Option<f64>, removal: Option<f64>) -> Self {
        CaseRecord {
            id,
            exposure: None,
            infection,
            removal,
            infection_group: None,
            removal_group: None,
            location: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.infection.is_some() && self.removal.is_some()
    }

    pub fn has_endpoint(&self) -> bool {
        self.infection.is_some() || self.removal.is_some()
    }

    /// Ordering sanity: removal strictly after infection, exposure not after
    /// infection, all finite.
    pub fn validate(&self) -> Result<()> {
        for t in [self.exposure, self.infection, self.removal].into_iter().flatten() {
            if !t.is_finite() {
                return Err(Error::Data(format!("case {}: non-finite time", self.id)));
            }
        }
        if let (Some(i), Some(r)) = (self.infection, self.removal) {
            if r <= i {
                return Err(Error::Data(format!(
                    "case {}: removal {} not after infection {}",
                    self.id, r, i
                )));
            }
        }
        if let (Some(e), Some(i)) = (self.exposure, self.infection) {
            if e > i {
                return Err(Error::Data(format!(
                    "case {}: exposure {} after infection {}",
                    self.id, e, i
                )));
            }
        }
        Ok(())
    }
}

/// Distance kernel scaling pairwise infection rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// `h == 1`: no spatial effect.
    Constant,
    /// `h(x_k, x_j) = exp(-rate * ||x_k - x_j||_2)`.
    ExpDecay { rate: f64 },
}

impl KernelSpec {
    pub fn eval(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            KernelSpec::Constant => 1.0,
            KernelSpec::ExpDecay { rate } => {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                (-rate * d).exp()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::ExpDecay { rate } = self {
            if !rate.is_finite() || *rate < 0.0 {
                return Err(Error::InvalidInput(format!("kernel rate {rate} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// How the unscaled infection rate `beta_kj` depends on the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InfectionStructure {
    Homogeneous { beta: f64 },
    /// Rate chosen by the susceptible's group.
    Groups { beta: BTreeMap<String, f64> },
    /// `beta0 * h(x_k, x_j)` with a distance kernel.
    Kernel { beta0: f64, kernel: KernelSpec },
}

/// How the removal rate `gamma_j` depends on the individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RemovalStructure {
    Homogeneous { gamma: f64 },
    Groups { gamma: BTreeMap<String, f64> },
}

/// Full generative model for one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub infection: InfectionStructure,
    pub removal: RemovalStructure,
    /// Erlang shape of the infectious period (1 = exponential).
    pub shape: u32,
    /// Fixed incubation delay between exposure and infectiousness (0 = SIR).
    pub incubation: f64,
    /// Population size N, including never-infected individuals.
    pub population: usize,
}

impl RateModel {
    /// Homogeneous SIR/SEIR model.
    pub fn homogeneous(beta: f64, gamma: f64, shape: u32, incubation: f64, population: usize) -> Self {
        RateModel {
            infection: InfectionStructure::Homogeneous { beta },
            removal: RemovalStructure::Homogeneous { gamma },
            shape,
            incubation,
            population,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape < 1 {
            return Err(Error::InvalidInput("Erlang shape must be >= 1".into()));
        }
        if !self.incubation.is_finite() || self.incubation < 0.0 {
            return Err(Error::InvalidInput(format!(
                "incubation {} must be finite and >= 0",
                self.incubation
            )));
        }
        if self.population < 1 {
            return Err(Error::InvalidInput("population must be >= 1".into()));
        }
        match &self.infection {
            InfectionStructure::Homogeneous { beta } => check_rate("beta", *beta, true)?,
            InfectionStructure::Groups { beta } => {
                if beta.is_empty() {
                    return Err(Error::InvalidInput("empty infection group map".into()));
                }
                for (g, b) in beta {
                    check_rate(&format!("beta[{g}]"), *b, true)?;
                }
            }
            InfectionStructure::Kernel { beta0, kernel } => {
                check_rate("beta0", *beta0, true)?;
                kernel.validate()?;
            }
        }
        match &self.removal {
            RemovalStructure::Homogeneous { gamma } => check_rate("gamma", *gamma, false)?,
            RemovalStructure::Groups { gamma } => {
                if gamma.is_empty() {
                    return Err(Error::InvalidInput("empty removal group map".into()));
                }
                for (g, v) in gamma {
                    check_rate(&format!("gamma[{g}]"), *v, false)?;
                }
            }
        }
        Ok(())
    }

    /// Removal rate for one case.
    pub fn gamma_for(&self, case: &CaseRecord) -> Result<f64> {
        match &self.removal {
            RemovalStructure::Homogeneous { gamma } => Ok(*gamma),
            RemovalStructure::Groups { gamma } => {
                let g = case.removal_group.as_deref().ok_or_else(|| {
                    Error::Data(format!("case {}: no removal group but model has group rates", case.id))
                })?;
                gamma.get(g).copied().ok_or_else(|| {
                    Error::Data(format!("case {}: unknown removal group \"{g}\"", case.id))
                })
            }
        }
    }

    /// Unscaled rate at which infectious `k` infects susceptible `j`
    /// (divide by N for the pairwise hazard).
    pub fn beta_pair(&self, k: &CaseRecord, j: &CaseRecord) -> Result<f64> {
        match &self.infection {
            InfectionStructure::Homogeneous { beta } => Ok(*beta),
            InfectionStructure::Groups { beta } => {
                let g = j.infection_group.as_deref().ok_or_else(|| {
                    Error::Data(format!("case {}: no infection group but model has group rates", j.id))
                })?;
                beta.get(g).copied().ok_or_else(|| {
                    Error::Data(format!("case {}: unknown infection group \"{g}\"", j.id))
                })
            }
            InfectionStructure::Kernel { beta0, kernel } => {
                let (xk, xj) = match (k.location, j.location) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::Data(format!(
                            "cases {} and {}: kernel model needs locations for both",
                            k.id, j.id
                        )))
                    }
                };
                Ok(beta0 * kernel.eval(xk, xj))
            }
        }
    }
}

fn check_rate(name: &str, value: f64, zero_ok: bool) -> Result<()> {
    let ok = value.is_finite() && (value > 0.0 || (zero_ok && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("rate {name} = {value} out of range")))
    }
}

/// Which endpoints of an ordered pair (potential infector `k`, infectee `j`)
/// are observed. Drives the choice of closed form for `E[tau_kj]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationPattern {
    /// `i_k`, `r_k`, and `i_j` observed: pressure is computed, not imputed.
    Complete,
    /// Only `r_k` and `r_j`.
    RemovalsOnly,
    /// Only `i_k` and `i_j`.
    InfectionsOnly,
    /// `r_k` and `i_j`.
    RemovalKInfectionJ,
    /// `i_k` and `r_j`; the one pattern with both endpoints latent on
    /// opposite sides.
    InfectionKRemovalJ,
    /// `r_k`, `r_j`, and `i_k`.
    RemovalsInfectionK,
    /// `r_k`, `r_j`, and `i_j`; equivalent to `RemovalKInfectionJ` because
    /// `r_j` carries no extra information about `tau_kj`.
    RemovalsInfectionJ,
    /// `i_k`, `i_j`, and `r_j`; equivalent to `InfectionsOnly`.
    InfectionsRemovalJ,
}

/// One ordered pair with observed endpoints and rate parameters, ready for
/// expected-pressure evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    pub i_k: Option<f64>,
    pub r_k: Option<f64>,
    pub i_j: Option<f64>,
    pub r_j: Option<f64>,
    pub gamma_k: f64,
    pub gamma_j: f64,
    /// Erlang shape of both infectious periods.
    pub shape: u32,
    /// Incubation delay: `j`'s exposure is `i_j - incubation`.
    pub incubation: f64,
}

impl PairObservation {
    /// Exponential-period pair with zero incubation.
    pub fn exponential(
        i_k: Option<f64>,
        r_k: Option<f64>,
        i_j: Option<f64>,
        r_j: Option<f64>,
        gamma_k: f64,
        gamma_j: f64,
    ) -> Self {
        PairObservation { i_k, r_k, i_j, r_j, gamma_k, gamma_j, shape: 1, incubation: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_k.is_finite() && self.gamma_k > 0.0)
            || !(self.gamma_j.is_finite() && self.gamma_j > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "pair removal rates ({}, {}) must be positive",
                self.gamma_k, self.gamma_j
            )));
        }
        if self.shape < 1 {
            return Err(Error::InvalidInput("Erlang shape must be >= 1".into()));
        }
        if !self.incubation.is_finite() || self.incubation < 0.0 {
            return Err(Error::InvalidInput("incubation must be finite and >= 0".into()));
        }
        for t in [self.i_k, self.r_k, self.i_j, self.r_j].into_iter().flatten() {
            if !t.is_finite() {
                return Err(Error::InvalidInput("non-finite pair endpoint".into()));
            }
        }
        if let (Some(i), Some(r)) = (self.i_k, self.r_k) {
            if r <= i {
                return Err(Error::InvalidInput(format!("r_k {r} not after i_k {i}")));
            }
        }
        if let (Some(i), Some(r)) = (self.i_j, self.r_j) {
            if r <= i {
                return Err(Error::InvalidInput(format!("r_j {r} not after i_j {i}")));
            }
        }
        Ok(())
    }

    /// Classify which closed form applies. Errors if either side has no
    /// observed endpoint at all.
    pub fn pattern(&self) -> Result<ObservationPattern> {
        let (ik, rk) = (self.i_k.is_some(), self.r_k.is_some());
        let (ij, rj) = (self.i_j.is_some(), self.r_j.is_some());
        if !ik && !rk {
            return Err(Error::InvalidInput("pair infector side has no observed endpoint".into()));
        }
        if !ij && !rj {
            return Err(Error::InvalidInput("pair infectee side has no observed endpoint".into()));
        }
        Ok(match (ik, rk, ij, rj) {
            (true, true, true, _) => ObservationPattern::Complete,
            (true, true, false, true) => ObservationPattern::RemovalsInfectionK,
            (true, false, true, false) => ObservationPattern::InfectionsOnly,
            (true, false, true, true) => ObservationPattern::InfectionsRemovalJ,
            (true, false, false, true) => ObservationPattern::InfectionKRemovalJ,
            (false, true, true, false) => ObservationPattern::RemovalKInfectionJ,
            (false, true, true, true) => ObservationPattern::RemovalsInfectionJ,
            (false, true, false, true) => ObservationPattern::RemovalsOnly,
            _ => unreachable!("both-side presence checked above"),
        })
    }

    /// Build the pair for infector `k` and infectee `j` under `model`.
    pub fn from_cases(k: &CaseRecord, j: &CaseRecord, model: &RateModel) -> Result<Self> {
        let pair = PairObservation {
            i_k: k.infection,
            r_k: k.removal,
            i_j: j.infection,
            r_j: j.removal,
            gamma_k: model.gamma_for(k)?,
            gamma_j: model.gamma_for(j)?,
            shape: model.shape,
            incubation: model.incubation,
        };
        pair.validate()?;
        Ok(pair)
    }
}

/// `tau_kj = min(r_k, e_j) - min(e_j, i_k)` for fully known times.
///
/// Zero when `e_j <= i_k` (j exposed before k was infectious), `e_j - i_k`
/// when j's exposure lands inside k's infectious window, and `r_k - i_k` when
/// j outlasts it. Never negative for `i_k < r_k`.
pub fn pairwise_tau(i_k: f64, r_k: f64, e_j: f64) -> f64 {
    r_k.min(e_j) - e_j.min(i_k)
}

/// Pairwise pressure from case records; needs `i_k`, `r_k`, `i_j`.
pub fn pairwise_tau_cases(k: &CaseRecord, j: &CaseRecord, delta: f64) -> Result<f64> {
    let (i_k, r_k) = match (k.infection, k.removal) {
        (Some(i), Some(r)) => (i, r),
        _ => {
            return Err(Error::Data(format!(
                "case {}: infector endpoints incomplete for exact pressure",
                k.id
            )))
        }
    };
    let i_j = j.infection.ok_or_else(|| {
        Error::Data(format!("case {}: infection time missing for exact pressure", j.id))
    })?;
    Ok(pairwise_tau(i_k, r_k, i_j - delta))
}

/// Timestamped transition in a simulated epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub case_id: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Susceptible -> exposed (omitted when incubation is zero; the onset
    /// doubles as the exposure).
    Exposure,
    /// Exposed/susceptible -> infectious.
    Onset,
    /// Intermediate Erlang stage of the infectious period (stages 1..m-1;
    /// the m-th stage is the removal itself).
    Stage { stage: u32 },
    /// Infectious -> removed.
    Removal,
}

/// Complete record of one simulated outbreak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    /// Fully observed case records: infection and removal always set;
    /// exposure set for transmission-acquired cases under positive incubation.
    pub cases: Vec<CaseRecord>,
    pub population: usize,
}

impl EventLog {
    pub fn final_size(&self) -> usize {
        self.cases.len()
    }
}

/// Complete-data sufficient statistics for homogeneous rate estimation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientStats {
    /// Number of infected cases.
    pub n: usize,
    /// Total infectious time `A = sum_j (r_j - i_j)`.
    pub a: f64,
    /// Total pressure `B = sum over infected ordered pairs of tau_kj +
    /// (N - n) * A` (never-infected individuals absorb each full period).
    pub b: f64,
    /// Log of the infector-count product `C = prod_{j != index} #{k : i_k <
    /// e_j < r_k}`; `-inf` when some case has no feasible infector.
    pub log_c: f64,
    /// Index (into the input slice) of the index case.
    pub index_case: usize,
    /// Nonzero pressures as `(k_id, j_id, tau_kj)`.
    pub pair_pressures: Vec<(u64, u64, f64)>,
}

/// Position of the index case: smallest infection time, falling back to
/// smallest removal time when no infection time is observed anywhere; ties
/// break on the smaller case id.
pub fn index_case(data: &[CaseRecord]) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty case list".into()));
    }
    let best = |key: fn(&CaseRecord) -> Option<f64>| {
        data.iter()
            .enumerate()
            .filter_map(|(pos, c)| key(c).map(|t| (pos, t, c.id)))
            .min_by(|a, b| (a.1, a.2).partial_cmp(&(b.1, b.2)).expect("finite times"))
            .map(|(pos, _, _)| pos)
    };
    best(|c| c.infection)
        .or_else(|| best(|c| c.removal))
        .ok_or_else(|| Error::InvalidInput("no case has any observed endpoint".into()))
}

/// Complete-data sufficient statistics `(n, A, B, log C, pressures)`.
///
/// Requires every case fully observed; `model` supplies N, the incubation
/// delay, and nothing else.
pub fn sufficient_stats(data: &[CaseRecord], model: &RateModel) -> Result<SufficientStats> {
    model.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty case list".into()));
    }
    if model.population < n {
        return Err(Error::InvalidInput(format!(
            "population {} smaller than case count {n}",
            model.population
        )));
    }
    let mut inf = Vec::with_capacity(n);
    let mut rem = Vec::with_capacity(n);
    for c in data {
        c.validate()?;
        match (c.infection, c.removal) {
            (Some(i), Some(r)) => {
                inf.push(i);
                rem.push(r);
            }
            _ => {
                return Err(Error::Data(format!(
                    "case {}: complete-data statistics need both endpoints",
                    c.id
                )))
            }
        }
    }
    let delta = model.incubation;
    let index = index_case(data)?;

    let mut a = CompensatedSum::new();
    for j in 0..n {
        a.add(rem[j] - inf[j]);
    }
    let a = a.value();

    let mut pair_sum = CompensatedSum::new();
    let mut pair_pressures = Vec::new();
    let mut log_c = 0.0;
    for j in 0..n {
        let e_j = inf[j] - delta;
        let mut feasible = 0u64;
        for k in 0..n {
            if k == j {
                continue;
            }
            if inf[k] < e_j && e_j < rem[k] {
                feasible += 1;
            }
            if j != index {
                let tau = pairwise_tau(inf[k], rem[k], e_j);
                if tau > 0.0 {
                    pair_sum.add(tau);
                    pair_pressures.push((data[k].id, data[j].id, tau));
                }
            }
        }
        if j != index {
            log_c += if feasible == 0 { f64::NEG_INFINITY } else { (feasible as f64).ln() };
        }
    }

    let b = pair_sum.value() + (model.population - n) as f64 * a;
    Ok(SufficientStats { n, a, b, log_c, index_case: index, pair_pressures })
}

/// Complete-data log likelihood for homogeneous infection rates.
///
/// The value is the log of: for each non-index case, the survival factor
/// `exp(-sum_k (beta/N) tau_kj)` times the infection hazard
/// `sum_k (beta/N) 1(i_k < e_j < r_k)`; for every case, the pressure spent on
/// the `N - n` never-infected individuals and the Erlang(m, gamma_j) density
/// of its infectious period. Returns `-inf` for data impossible under the
/// model (some case with no feasible infector, or `beta = 0` with more than
/// one case). Group and kernel infection structures need per-individual
/// features for the never-infected and are not supported here.
pub fn complete_loglik(data: &[CaseRecord], model: &RateModel) -> Result<f64> {
    let beta = match &model.infection {
        InfectionStructure::Homogeneous { beta } => *beta,
        _ => {
            return Err(Error::InvalidInput(
                "complete_loglik supports homogeneous infection structure only".into(),
            ))
        }
    };
    let stats = sufficient_stats(data, model)?;
    let n = stats.n;
    let nn = model.population as f64;
    let m = model.shape;
    let delta = model.incubation;

    // Removal-period densities.
    let mut ll = CompensatedSum::new();
    for c in data {
        let gamma = model.gamma_for(c)?;
        let d = c.removal.unwrap() - c.infection.unwrap();
        ll.add(f64::from(m) * gamma.ln() - gamma * d + f64::from(m - 1) * d.ln());
    }
    ll.add(-(n as f64) * crate::numeric::ln_factorial(m - 1));

    // Pressure on other infected cases and on the never-infected; the hazard
    // factor at each non-index infection. A zero hazard (no feasible infector,
    // or a zero rate with secondary cases) must short-circuit: compensated
    // summation turns ln(0) = -inf into NaN.
    ll.add(-(beta / nn) * stats.b);
    let index = stats.index_case;
    for (j, c) in data.iter().enumerate() {
        if j == index {
            continue;
        }
        let e_j = c.infection.unwrap() - delta;
        let feasible = data
            .iter()
            .enumerate()
            .filter(|(k, other)| {
                *k != j && other.infection.unwrap() < e_j && e_j < other.removal.unwrap()
            })
            .count();
        let hazard = beta / nn * feasible as f64;
        if hazard == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll.add(hazard.ln());
    }
    Ok(ll.value())
}
