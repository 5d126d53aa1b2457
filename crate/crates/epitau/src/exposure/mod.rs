//! Expected pairwise pressure under partial observation.
//!
//! For an ordered pair (infector `k`, infectee `j`) with some endpoints
//! missing, [`expected_tau`] returns `E[tau_kj | observed endpoints]` under
//! independent Erlang(m, gamma) infectious periods and the memorylessness of
//! the stage process: a missing removal is `observed onset + Erlang` forward
//! in time, a missing onset is `observed removal - Erlang` backward.
//!
//! Every pattern has an exponential (m = 1) closed form; most extend to
//! general Erlang shapes. The one exception is the onset/removal pattern
//! (`i_k`, `r_j` observed) with m > 1, which returns
//! [`Error::NoClosedForm`]; [`mc_tau_oracle`] serves as the fallback and as
//! the independent verification route for all the closed forms.

mod hard;

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{pairwise_tau, CaseRecord, ObservationPattern, PairObservation};
use crate::numeric::{binomial, erlang_cdf, erlang_sf, poisson_pmf, CompensatedSum};
use crate::stream::{stream_rng, tag};

/// Monte Carlo sample count used when a closed form is unavailable and the
/// caller did not choose one (see [`expected_tau_or_mc`]).
pub const MC_FALLBACK_SAMPLES: u64 = 100_000;

/// Expected pressure `E[tau_kj]` given the observed endpoints in `pair`.
///
/// Incubation is handled by shifting the infectee side: `e_j = i_j - delta`
/// when the onset is observed, and a latent `e_j = (r_j - delta) - Erlang`
/// otherwise. The infector's window `[i_k, r_k)` is never shifted.
///
/// Errors with [`Error::NoClosedForm`] for the onset/removal pattern with
/// Erlang shape m > 1.
pub fn expected_tau(pair: &PairObservation) -> Result<f64> {
    pair.validate()?;
    let m = pair.shape;
    let delta = pair.incubation;
    let pattern = pair.pattern()?;
    Ok(match pattern {
        ObservationPattern::Complete => {
            pairwise_tau(pair.i_k.unwrap(), pair.r_k.unwrap(), pair.i_j.unwrap() - delta)
        }
        ObservationPattern::InfectionsOnly | ObservationPattern::InfectionsRemovalJ => {
            expected_capped_period(pair.i_j.unwrap() - delta - pair.i_k.unwrap(), pair.gamma_k, m)
        }
        ObservationPattern::RemovalKInfectionJ | ObservationPattern::RemovalsInfectionJ => {
            expected_period_beyond(pair.r_k.unwrap() - (pair.i_j.unwrap() - delta), pair.gamma_k, m)
        }
        ObservationPattern::RemovalsInfectionK => removals_onset_k(
            pair.i_k.unwrap(),
            pair.r_k.unwrap(),
            pair.r_j.unwrap() - delta,
            pair.gamma_j,
            m,
        ),
        ObservationPattern::RemovalsOnly => removals_only(
            pair.r_k.unwrap(),
            pair.r_j.unwrap() - delta,
            pair.gamma_k,
            pair.gamma_j,
            m,
        ),
        ObservationPattern::InfectionKRemovalJ => {
            if m != 1 {
                return Err(Error::NoClosedForm { pattern, shape: m });
            }
            hard::expected_tau(
                pair.r_j.unwrap() - delta - pair.i_k.unwrap(),
                pair.gamma_k,
                pair.gamma_j,
            )
        }
    })
}

/// [`expected_tau`], falling back to the Monte Carlo oracle (with
/// `MC_FALLBACK_SAMPLES` draws when `samples` is `None`) for combinations
/// without a closed form. `seed` makes the fallback reproducible.
pub fn expected_tau_or_mc(pair: &PairObservation, samples: Option<u64>, seed: u64) -> Result<f64> {
    match expected_tau(pair) {
        Ok(v) => Ok(v),
        Err(Error::NoClosedForm { .. }) => {
            Ok(mc_tau_oracle(pair, samples.unwrap_or(MC_FALLBACK_SAMPLES), seed)?.mean)
        }
        Err(e) => Err(e),
    }
}

/// Expected infectious period for one case: the observed `r - i` when both
/// endpoints are present, the model mean `m / gamma` when exactly one is.
/// A case with no endpoint at all carries no information and is rejected.
pub fn expected_duration(case: &CaseRecord, gamma: f64, m: u32) -> Result<f64> {
    match (case.infection, case.removal) {
        (Some(i), Some(r)) => Ok(r - i),
        (None, None) => {
            Err(Error::Data(format!("case {}: no observed endpoint", case.id)))
        }
        _ => Ok(f64::from(m) / gamma),
    }
}

/// `E[min(X, t)]` for `X ~ Erlang(m, gamma)`: pressure when the infectee's
/// exposure is a known `t` after the infector's onset and the removal is
/// latent. Zero for `t <= 0`.
fn expected_capped_period(t: f64, gamma: f64, m: u32) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t * erlang_sf(t, gamma, m) + f64::from(m) / gamma * erlang_cdf(t, gamma, m + 1)
}

/// `E[(X - d)^+]` for `X ~ Erlang(m, gamma)`: pressure when the infector's
/// removal is a known `d` after the infectee's exposure and the onset is
/// latent. For `d <= 0` the full mean period `m / gamma`.
///
/// Conditioning on `l < m` stage events in the gap (Poisson-distributed by
/// memorylessness) leaves `m - l` mean waits of `1/gamma` each.
fn expected_period_beyond(d: f64, gamma: f64, m: u32) -> f64 {
    if d <= 0.0 {
        return f64::from(m) / gamma;
    }
    let mean = gamma * d;
    (0..m).map(|l| poisson_pmf(l, mean) * f64::from(m - l) / gamma).sum()
}

/// `int_a^b (c - x) f_{gamma,m}(x) dx` via Erlang partial moments,
/// for `0 <= a <= b`.
fn erlang_window_expect(c: f64, a: f64, b: f64, gamma: f64, m: u32) -> f64 {
    c * (erlang_cdf(b, gamma, m) - erlang_cdf(a, gamma, m))
        - f64::from(m) / gamma * (erlang_cdf(b, gamma, m + 1) - erlang_cdf(a, gamma, m + 1))
}

/// Pattern with `i_k`, `r_k`, `r_j` observed: the infectee's exposure is
/// `w_j - X_j` backward from its shifted removal `w_j`.
///
/// Splits on whether the exposure lands beyond the infector's removal (full
/// period `r_k - i_k`, probability `F_m(w_j - r_k)`) or inside the window
/// (partial moment of `e_j - i_k`).
fn removals_onset_k(i_k: f64, r_k: f64, w_j: f64, gamma_j: f64, m: u32) -> f64 {
    if w_j <= i_k {
        return 0.0;
    }
    let full = (r_k - i_k) * erlang_cdf(w_j - r_k, gamma_j, m);
    let a = (w_j - r_k).max(0.0);
    let b = w_j - i_k;
    full + erlang_window_expect(b, a, b, gamma_j, m)
}

/// Pattern with only the removals observed: both onsets are latent, reached
/// by the backward stage processes from `r_k` and the shifted `w_j`.
///
/// Conditioning walks backward from the later removal: first the number of
/// own-stage events before the earlier removal (Poisson), then a
/// negative-binomial race between the two stage processes decides whether the
/// infectee's exposure precedes the infector's onset and how many infector
/// stages (mean waits of `1/gamma_k`) remain.
fn removals_only(r_k: f64, w_j: f64, gamma_k: f64, gamma_j: f64, m: u32) -> f64 {
    let c = gamma_k / (gamma_k + gamma_j);
    let omc = gamma_j / (gamma_k + gamma_j);
    let mut total = 0.0;
    if w_j < r_k {
        let gap = gamma_k * (r_k - w_j);
        for l1 in 0..m {
            let mut inner = 0.0;
            for l2 in 0..=(m - 1 - l1) {
                inner += binomial(m + l2 - 1, l2)
                    * c.powi(l2 as i32)
                    * omc.powi(m as i32)
                    * f64::from(m - l1 - l2)
                    / gamma_k;
            }
            total += poisson_pmf(l1, gap) * inner;
        }
        total
    } else {
        let gap = w_j - r_k;
        for l1 in 0..m {
            let mut inner = 0.0;
            for l2 in 0..m {
                inner += binomial(m - l1 - 1 + l2, l2)
                    * c.powi(l2 as i32)
                    * omc.powi((m - l1) as i32)
                    * f64::from(m - l2)
                    / gamma_k;
            }
            total += poisson_pmf(l1, gamma_j * gap) * inner;
        }
        total + erlang_cdf(gap, gamma_j, m) * f64::from(m) / gamma_k
    }
}

/// Monte Carlo mean and standard error of `tau_kj`, drawing each missing
/// endpoint from its conditional law. The independent check on every closed
/// form, and the fallback where none exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

pub fn mc_tau_oracle(pair: &PairObservation, samples: u64, seed: u64) -> Result<TauEstimate> {
    pair.validate()?;
    pair.pattern()?;
    if samples == 0 {
        return Err(Error::InvalidInput("oracle needs at least one sample".into()));
    }
    let mut rng = stream_rng(seed, &[tag::ORACLE]);
    let delta = pair.incubation;
    let m = pair.shape;
    let exp_k = Exp::new(pair.gamma_k).expect("validated rate");
    let exp_j = Exp::new(pair.gamma_j).expect("validated rate");
    let erlang = |rng: &mut ChaCha12Rng, exp: &Exp<f64>| -> f64 {
        (0..m).map(|_| exp.sample(rng)).sum()
    };

    let mut sum = CompensatedSum::new();
    let mut sumsq = CompensatedSum::new();
    for _ in 0..samples {
        let (i_k, r_k) = match (pair.i_k, pair.r_k) {
            (Some(i), Some(r)) => (i, r),
            (Some(i), None) => (i, i + erlang(&mut rng, &exp_k)),
            (None, Some(r)) => (r - erlang(&mut rng, &exp_k), r),
            (None, None) => unreachable!("pattern() requires an endpoint per side"),
        };
        let e_j = match (pair.i_j, pair.r_j) {
            (Some(i), _) => i - delta,
            (None, Some(r)) => r - delta - erlang(&mut rng, &exp_j),
            (None, None) => unreachable!("pattern() requires an endpoint per side"),
        };
        let tau = pairwise_tau(i_k, r_k, e_j);
        sum.add(tau);
        sumsq.add(tau * tau);
    }
    let n = samples as f64;
    let mean = sum.value() / n;
    let var = ((sumsq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(TauEstimate { mean, std_error: (var / n).sqrt(), samples })
}
