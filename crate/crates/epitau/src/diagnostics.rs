//! Convergence diagnostics for sampler output.
//!
//! Effective sample size uses the initial-monotone-sequence truncation of the
//! autocorrelation sum; the potential scale reduction factor is the split-chain
//! variant, so a single long chain that drifts between halves is caught even
//! when several chains agree with each other.

use crate::error::{Error, Result};

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n - 1 denominator).
fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Biased autocovariance at `lag` (1/n normalization, the usual spectral
/// convention, so the truncated sum stays positive definite).
fn autocovariance(values: &[f64], center: f64, lag: usize) -> f64 {
    let n = values.len();
    values[..n - lag]
        .iter()
        .zip(&values[lag..])
        .map(|(a, b)| (a - center) * (b - center))
        .sum::<f64>()
        / n as f64
}

/// Effective sample size floor on the integrated autocorrelation time; keeps
/// the estimate finite (at most ten times the chain length) for chains with
/// strong negative autocorrelation.
const MIN_TAU: f64 = 0.1;

/// Effective sample size of one chain.
///
/// Autocorrelations are summed in Geyer pairs `rho[2k] + rho[2k+1]`: summation
/// stops before the first nonpositive pair and the pair sequence is forced
/// nonincreasing. A constant chain carries no autocorrelation information and
/// counts as fully independent (ESS = length). Negatively autocorrelated
/// chains can legitimately exceed their length; the estimate is capped at ten
/// times the length.
pub fn ess(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!("ess needs a chain of length >= 4, got {n}")));
    }
    let center = mean(values);
    let c0 = autocovariance(values, center, 0);
    if c0 <= 0.0 {
        return Ok(n as f64);
    }

    // Sum Geyer pairs lazily; chains mixing well stop after a few lags.
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocovariance(values, center, lag)
            + autocovariance(values, center, lag + 1))
            / c0;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair.min(prev_pair);
        prev_pair = pair;
        lag += 2;
    }

    let tau = (2.0 * sum_pairs - 1.0).max(MIN_TAU);
    Ok(n as f64 / tau)
}

/// Split-chain potential scale reduction factor.
///
/// Each chain is halved, and the usual between/within variance ratio is taken
/// over the half-chains. Values near 1 indicate the chains are sampling the
/// same distribution; common practice flags values above roughly 1.01-1.05.
///
/// Errors when fewer than two chains are given, when any chain is shorter
/// than 4, when chain lengths differ, or when the within-half variance is
/// zero (constant chains make the ratio undefined).
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "split_rhat needs >= 2 chains, got {}",
            chains.len()
        )));
    }
    let len = chains[0].len();
    if len < 4 {
        return Err(Error::InvalidInput(format!("split_rhat needs chains of length >= 4, got {len}")));
    }
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidInput("split_rhat needs equal-length chains".into()));
    }

    let half = len / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        // Odd lengths drop the middle draw so both halves match.
        halves.push(&chain[..half]);
        halves.push(&chain[chain.len() - half..]);
    }

    let within = mean(&halves.iter().map(|h| variance(h)).collect::<Vec<_>>());
    if within <= 0.0 {
        return Err(Error::Data("split_rhat undefined: zero within-chain variance".into()));
    }
    let half_means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let between_over_n = variance(&half_means);
    let pooled = (half - 1) as f64 / half as f64 * within + between_over_n;
    Ok((pooled / within).sqrt())
}
