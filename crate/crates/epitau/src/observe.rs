//! Observation models: masking endpoints and un-rounding day-resolution data.
//!
//! Study pipelines start from fully observed simulated outbreaks and degrade
//! them the way field data arrives: some cases lose their infection time, some
//! lose their removal time, and day-resolution records need a little noise
//! before continuous-time estimators can use them. Both transforms are
//! deterministic given a master seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CaseRecord;
use crate::stream::{stream_rng, tag};

/// What a masking pass did, for reporting next to the masked table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskReport {
    /// Cases in the input.
    pub total: usize,
    /// Cases that lost one endpoint.
    pub masked: usize,
    /// Of the masked cases, how many lost their infection time.
    pub infection_masked: usize,
    /// Of the masked cases, how many lost their removal time.
    pub removal_masked: usize,
    /// Ids that lost their infection time.
    pub infection_ids: Vec<u64>,
    /// Ids that lost their removal time.
    pub removal_ids: Vec<u64>,
}

fn check_probability(value: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

fn check_complete(data: &[CaseRecord]) -> Result<()> {
    for case in data {
        case.validate()?;
        if !case.is_complete() {
            return Err(Error::Data(format!(
                "case {}: masking starts from fully observed data",
                case.id
            )));
        }
    }
    Ok(())
}

/// Strips `case`'s infection time. The exposure time goes with it: leaving it
/// in place would let a consumer reconstruct the infection time exactly.
fn mask_infection(case: &mut CaseRecord) {
    case.infection = None;
    case.exposure = None;
}

/// Hide one endpoint of a random subset of cases.
///
/// Each case independently becomes partial with probability `p_missing`; a
/// partial case loses its infection time with probability `p_inf_missing` and
/// its removal time otherwise. No case ever loses both endpoints. The input
/// must be fully observed.
pub fn inject_missingness(
    data: &[CaseRecord],
    p_missing: f64,
    p_inf_missing: f64,
    seed: u64,
) -> Result<(Vec<CaseRecord>, MaskReport)> {
    check_probability(p_missing, "p_missing")?;
    check_probability(p_inf_missing, "p_inf_missing")?;
    check_complete(data)?;

    let mut rng = stream_rng(seed, &[tag::INJECT]);
    let mut masked = data.to_vec();
    let mut report = MaskReport {
        total: data.len(),
        masked: 0,
        infection_masked: 0,
        removal_masked: 0,
        infection_ids: Vec::new(),
        removal_ids: Vec::new(),
    };
    for case in &mut masked {
        if rng.random::<f64>() >= p_missing {
            continue;
        }
        report.masked += 1;
        if rng.random::<f64>() < p_inf_missing {
            mask_infection(case);
            report.infection_masked += 1;
            report.infection_ids.push(case.id);
        } else {
            case.removal = None;
            report.removal_masked += 1;
            report.removal_ids.push(case.id);
        }
    }
    Ok((masked, report))
}

/// Hide endpoints for exactly `n_partial` cases, `n_infection` of which lose
/// their infection time; the other `n_partial - n_infection` lose their
/// removal time. The partial cases are drawn uniformly without replacement.
///
/// This is the fixed-count sibling of [`inject_missingness`], for replicating
/// an observed table's realized masking pattern rather than its generating
/// probabilities.
pub fn inject_missingness_counts(
    data: &[CaseRecord],
    n_partial: usize,
    n_infection: usize,
    seed: u64,
) -> Result<(Vec<CaseRecord>, MaskReport)> {
    if n_infection > n_partial {
        return Err(Error::InvalidInput(format!(
            "cannot mask {n_infection} infection times among {n_partial} partial cases"
        )));
    }
    if n_partial > data.len() {
        return Err(Error::InvalidInput(format!(
            "cannot mask {n_partial} of {} cases",
            data.len()
        )));
    }
    check_complete(data)?;

    let mut rng = stream_rng(seed, &[tag::INJECT]);
    let mut masked = data.to_vec();
    let mut report = MaskReport {
        total: data.len(),
        masked: n_partial,
        infection_masked: n_infection,
        removal_masked: n_partial - n_infection,
        infection_ids: Vec::new(),
        removal_ids: Vec::new(),
    };
    // `sample` returns the chosen indices in random order, so the first
    // `n_infection` of them are themselves a uniform subset.
    let chosen = rand::seq::index::sample(&mut rng, data.len(), n_partial);
    for (slot, case_idx) in chosen.iter().enumerate() {
        let case = &mut masked[case_idx];
        if slot < n_infection {
            mask_infection(case);
            report.infection_ids.push(case.id);
        } else {
            case.removal = None;
            report.removal_ids.push(case.id);
        }
    }
    report.infection_ids.sort_unstable();
    report.removal_ids.sort_unstable();
    Ok((masked, report))
}

/// Realized masking pattern of a partially observed table: the number of
/// partial cases and, of those, the number missing their infection time.
pub fn realized_counts(data: &[CaseRecord]) -> (usize, usize) {
    let mut partial = 0;
    let mut infection_missing = 0;
    for case in data {
        if !case.is_complete() {
            partial += 1;
            if case.infection.is_none() {
                infection_missing += 1;
            }
        }
    }
    (partial, infection_missing)
}

/// Maximum per-case redraws before [`dequantize`] gives up on keeping the
/// removal after the infection.
pub const DEQUANTIZE_MAX_TRIES: u32 = 100;

/// Add independent Normal(0, `sigma`) noise to recorded times.
///
/// Day-resolution records put many events at identical clock times, which the
/// continuous-time estimators cannot tell apart; a small jitter breaks the
/// ties. A case's exposure time (when present) is shifted together with its
/// infection time so the incubation offset between them survives; the removal
/// time gets an independent draw. Draws for a case are redrawn (up to
/// [`DEQUANTIZE_MAX_TRIES`] times) until the noised removal still follows the
/// noised infection; a case whose gap cannot survive the noise is reported by
/// id. `sigma = 0` returns the input unchanged.
pub fn dequantize(data: &[CaseRecord], sigma: f64, seed: u64) -> Result<Vec<CaseRecord>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidInput(format!("noise sd must be finite and >= 0, got {sigma}")));
    }
    for case in data {
        case.validate()?;
    }
    if sigma == 0.0 {
        return Ok(data.to_vec());
    }
    let noise = Normal::new(0.0, sigma).expect("validated sd");
    let mut rng = stream_rng(seed, &[tag::DEQUANTIZE]);
    let mut out = data.to_vec();
    for case in &mut out {
        let mut accepted = false;
        for _ in 0..DEQUANTIZE_MAX_TRIES {
            let onset_shift = noise.sample(&mut rng);
            let removal_shift = noise.sample(&mut rng);
            let infection = case.infection.map(|t| t + onset_shift);
            let removal = case.removal.map(|t| t + removal_shift);
            if let (Some(i), Some(r)) = (infection, removal) {
                if r <= i {
                    continue;
                }
            }
            case.exposure = case.exposure.map(|t| t + onset_shift);
            case.infection = infection;
            case.removal = removal;
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::Data(format!(
                "case {}: could not keep removal after infection within {DEQUANTIZE_MAX_TRIES} \
                 noise redraws (period {:?} too short for sd {sigma})",
                case.id,
                case.removal.zip(case.infection).map(|(r, i)| r - i),
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outbreak(n: usize) -> Vec<CaseRecord> {
        (0..n)
            .map(|j| CaseRecord::complete(j as u64, j as f64 * 0.25, j as f64 * 0.25 + 1.5))
            .collect()
    }

    #[test]
    fn zero_probability_is_identity() {
        let data = outbreak(40);
        let (masked, report) = inject_missingness(&data, 0.0, 0.5, 7).unwrap();
        assert_eq!(masked, data);
        assert_eq!(report.masked, 0);
    }

    #[test]
    fn full_masking_leaves_removals_only() {
        let data = outbreak(40);
        let (masked, report) = inject_missingness(&data, 1.0, 1.0, 7).unwrap();
        assert_eq!(report.masked, 40);
        assert_eq!(report.infection_masked, 40);
        assert!(masked.iter().all(|c| c.infection.is_none() && c.removal.is_some()));
        // Exposure goes with the infection time.
        assert!(masked.iter().all(|c| c.exposure.is_none()));
    }

    #[test]
    fn masking_is_deterministic_and_never_strips_both() {
        let data = outbreak(200);
        let (a, ra) = inject_missingness(&data, 0.6, 0.8, 99).unwrap();
        let (b, rb) = inject_missingness(&data, 0.6, 0.8, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(a.iter().all(|c| c.infection.is_some() || c.removal.is_some()));
        assert_eq!(ra.masked, ra.infection_masked + ra.removal_masked);
        // Roughly 60% masked, 80% of those losing the infection time.
        assert!((ra.masked as f64 - 120.0).abs() < 40.0);
        assert!(ra.infection_masked > ra.removal_masked);
    }

    #[test]
    fn masking_rejects_partial_input_and_bad_probabilities() {
        let mut data = outbreak(3);
        assert!(inject_missingness(&data, 1.1, 0.5, 1).is_err());
        data[1].infection = None;
        assert!(matches!(inject_missingness(&data, 0.5, 0.5, 1), Err(Error::Data(_))));
    }

    #[test]
    fn count_masking_hits_exact_counts() {
        let data = outbreak(50);
        let (masked, report) = inject_missingness_counts(&data, 20, 15, 3).unwrap();
        let (partial, inf_missing) = realized_counts(&masked);
        assert_eq!((partial, inf_missing), (20, 15));
        assert_eq!(report.infection_ids.len(), 15);
        assert_eq!(report.removal_ids.len(), 5);
        assert!(inject_missingness_counts(&data, 51, 0, 3).is_err());
        assert!(inject_missingness_counts(&data, 10, 11, 3).is_err());
    }

    #[test]
    fn realized_counts_reads_the_pattern_back() {
        let data = outbreak(80);
        let (masked, report) = inject_missingness(&data, 0.4, 0.7, 11).unwrap();
        let (partial, inf_missing) = realized_counts(&masked);
        assert_eq!(partial, report.masked);
        assert_eq!(inf_missing, report.infection_masked);
    }

    #[test]
    fn zero_noise_is_identity() {
        let data = outbreak(10);
        assert_eq!(dequantize(&data, 0.0, 5).unwrap(), data);
    }

    #[test]
    fn noise_keeps_order_and_incubation_offset() {
        let data: Vec<CaseRecord> = (0..300)
            .map(|j| {
                let mut c = CaseRecord::complete(j, 10.0, 11.0);
                c.exposure = Some(8.5);
                c
            })
            .collect();
        let out = dequantize(&data, 0.33, 42).unwrap();
        for (before, after) in data.iter().zip(&out) {
            let (i, r) = (after.infection.unwrap(), after.removal.unwrap());
            assert!(r > i);
            // Exposure rides along with the infection shift.
            let shift = i - before.infection.unwrap();
            let e = after.exposure.unwrap();
            assert!((e - (before.exposure.unwrap() + shift)).abs() < 1e-12);
        }
        // The noise actually moved things.
        assert!(out.iter().any(|c| (c.infection.unwrap() - 10.0).abs() > 0.01));
        assert_eq!(out, dequantize(&data, 0.33, 42).unwrap());
    }

    #[test]
    fn degenerate_input_is_rejected_by_name() {
        let mut case = CaseRecord::complete(7, 2.0, 3.0);
        case.removal = Some(2.0); // r == i violates the record invariant
        let err = dequantize(&[case], 0.1, 1).unwrap_err();
        assert!(err.to_string().contains('7'), "error should name the case: {err}");
    }

    #[test]
    fn single_endpoint_cases_need_no_retry() {
        let mut case = CaseRecord::complete(1, 4.0, 6.0);
        case.infection = None;
        let out = dequantize(&[case], 0.5, 9).unwrap();
        assert!(out[0].infection.is_none());
        assert!(out[0].removal.is_some());
        assert_ne!(out[0].removal, Some(6.0));
    }
}
