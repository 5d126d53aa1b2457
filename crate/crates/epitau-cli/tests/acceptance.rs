//! Release gate: one test per quantitative guarantee the toolkit ships with.
//!
//! Every tolerance is pinned as a constant next to the test that uses it, and
//! every stochastic check runs from fixed seeds, so a failure here is a real
//! regression and not noise. The coverage and bias studies re-run reduced
//! versions of the calibration experiments and take a few minutes each on one
//! core; everything else is seconds.

use std::collections::BTreeMap;
use std::time::Instant;

use epitau::bootstrap::{bootstrap_t, BootstrapConfig};
use epitau::diagnostics::split_rhat;
use epitau::estimate::{
    impute_beta_bar, impute_beta_tilde, mle_beta, mle_beta_group, mle_beta_kernel, mle_gamma,
    removal_only_pair_sum,
};
use epitau::exposure::{expected_tau, mc_tau_oracle};
use epitau::mcmc::{run_chains, run_damcmc, Chain, McmcConfig, PriorSpec};
use epitau::observe::{inject_missingness, realized_counts};
use epitau::simulate::{simulate_seir_het, simulate_sir, HomogeneousRates};
use epitau::stream::{stream_seed, tag};
use epitau::{CaseRecord, EventLog, KernelSpec, ObservationPattern, PairObservation, RateModel};
use rayon::prelude::*;

/// Simulate under homogeneous rates until the outbreak reaches `min_size`.
fn retained_outbreak(
    beta: f64,
    gamma: f64,
    shape: u32,
    delta: f64,
    population: usize,
    min_size: usize,
    seed: u64,
) -> EventLog {
    let model = RateModel::homogeneous(beta, gamma, shape, delta, population);
    let rates = HomogeneousRates { beta, gamma, population };
    for attempt in 0..1000 {
        let log = simulate_seir_het(&model, &rates, stream_seed(seed, &[tag::SIMULATE, attempt]))
            .expect("valid simulation parameters");
        if log.final_size() >= min_size {
            return log;
        }
    }
    panic!("no outbreak of size >= {min_size} within 1000 attempts");
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn assert_rel_close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!((a - b).abs() <= tol * scale, "{what}: {a} vs {b} (rel tol {tol})");
}

/// 1. When every case of a full outbreak (`n == N`) is observed only through
/// its removal time, the imputed transmission-rate estimate is exactly twice
/// the removal rate it was computed under, whatever the removal times are.
#[test]
fn removal_only_full_outbreaks_estimate_a_rate_ratio_of_two() {
    const RATIO_TOL: f64 = 1e-9;
    let start = Instant::now();
    for population in [5usize, 50, 500] {
        for gamma_hat in [0.1f64, 1.0, 10.0] {
            let data: Vec<CaseRecord> = (0..population)
                .map(|i| {
                    let mut c = CaseRecord::complete(i as u64 + 1, 0.0, 1.0 + 0.37 * i as f64);
                    c.infection = None;
                    c
                })
                .collect();
            let est = impute_beta_tilde(&data, population, 1, 0.0, gamma_hat).unwrap();
            let ratio = est.value / gamma_hat;
            assert!(
                (ratio - 2.0).abs() < RATIO_TOL,
                "N={population}, gamma_hat={gamma_hat}: ratio {ratio}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "identity sweep took {elapsed:?}");
}

fn pair(
    i_k: Option<f64>,
    r_k: Option<f64>,
    i_j: Option<f64>,
    r_j: Option<f64>,
    gamma_k: f64,
    gamma_j: f64,
    shape: u32,
    incubation: f64,
) -> PairObservation {
    PairObservation { i_k, r_k, i_j, r_j, gamma_k, gamma_j, shape, incubation }
}

/// Exponential-period references for the closed forms, written directly from
/// the defining integrals so the shape-general code has something independent
/// to reduce to at `shape == 1`. `g` is the removal rate, `e_j` the exposure.
mod exponential_reference {
    /// Both infection times seen: `E[min(L, a)]` for `a = e_j - i_k`.
    pub fn capped(a: f64, g: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else {
            (1.0 - (-g * a).exp()) / g
        }
    }

    /// `r_k` and `e_j` seen, `i_k = r_k - L`: `E[(L - b)+]` for `b = r_k - e_j`.
    pub fn beyond(b: f64, g: f64) -> f64 {
        (-g * b.max(0.0)).exp() / g
    }

    /// `k` fully seen, `e_j = s - L_j`: pressure truncated by a backward
    /// exponential exposure.
    pub fn onset_k(i_k: f64, r_k: f64, s: f64, g: f64) -> f64 {
        if s <= i_k {
            0.0
        } else if s <= r_k {
            (s - i_k) - (1.0 - (-g * (s - i_k)).exp()) / g
        } else {
            (r_k - i_k) - (-g * (s - r_k)).exp() * (1.0 - (-g * (r_k - i_k)).exp()) / g
        }
    }

    /// Both onsets latent: average of `beyond` over `e_j = s - L_j`.
    pub fn removals_only(r_k: f64, s: f64, gk: f64, gj: f64) -> f64 {
        let d = r_k - s;
        if d >= 0.0 {
            gj * (-gk * d).exp() / (gk * (gj + gk))
        } else {
            (1.0 - (gj * d).exp() * gk / (gj + gk)) / gk
        }
    }
}

/// 2. Every closed-form expected pressure agrees with brute-force Monte Carlo
/// on a grid covering all observation patterns, Exponential and Erlang; the
/// two-sided-latency form is smooth across its equal-rate line; and the
/// shape-general formulas reduce to the exponential ones at `shape == 1`.
#[test]
fn closed_form_exposures_match_the_monte_carlo_oracle() {
    const MC_SAMPLES: u64 = 1_000_000;
    const MC_SIGMAS: f64 = 4.0;
    // Grid points whose pressure is deterministically zero have zero
    // standard error; give them an absolute floor instead of dividing by it.
    const MC_FLOOR: f64 = 1e-12;
    const EQUAL_RATE_REL_TOL: f64 = 1e-4;
    const REDUCTION_TOL: f64 = 1e-12;

    let mut grid: Vec<PairObservation> = Vec::new();

    // Exponential periods, all seven partial patterns, four points each.
    for (a, g, d) in [(0.3, 1.0, 0.0), (1.5, 0.7, 0.0), (4.0, 2.5, 0.5), (-0.5, 1.3, 1.0)] {
        grid.push(pair(Some(0.0), None, Some(a + d), None, g, 1.0, 1, d));
    }
    for (a, g, d) in [(0.6, 1.1, 0.0), (2.0, 0.6, 1.0), (0.15, 3.0, 0.0), (5.0, 1.0, 0.5)] {
        grid.push(pair(Some(0.0), None, Some(a + d), Some(a + d + 1.0), g, 1.0, 1, d));
    }
    for (b, g, d) in [(-1.0, 1.0, 0.0), (0.2, 0.8, 0.0), (1.0, 1.5, 0.5), (3.0, 0.5, 1.0)] {
        grid.push(pair(None, Some(1.0 + b), Some(1.0 + d), None, g, 1.0, 1, d));
    }
    for (b, g, d) in [(-0.4, 1.2, 0.0), (0.0, 1.0, 0.0), (0.7, 2.0, 1.0), (2.2, 0.9, 0.5)] {
        grid.push(pair(None, Some(1.0 + b), Some(1.0 + d), Some(1.8 + d), g, 1.0, 1, d));
    }
    for (dk, s, gj, d) in
        [(1.0, -0.5, 1.0, 0.0), (1.0, 0.5, 1.3, 0.0), (2.0, 1.2, 0.7, 0.5), (1.5, 3.0, 1.0, 1.0)]
    {
        grid.push(pair(Some(0.0), Some(dk), None, Some(s + d), 1.0, gj, 1, d));
    }
    for (rk, s, gk, gj, d) in [
        (2.0, 4.0, 1.0, 1.4, 0.0),
        (2.0, 2.0, 0.8, 0.8, 0.0),
        (3.0, 1.5, 1.5, 0.6, 0.5),
        (1.0, 0.2, 2.0, 1.0, 1.0),
    ] {
        grid.push(pair(None, Some(rk), None, Some(s + d), gk, gj, 1, d));
    }
    for (c, gk, gj, d) in [
        (-0.5, 1.0, 1.5, 0.0),
        (0.5, 1.0, 1.5, 0.0),
        (1.5, 0.7, 1.1, 0.5),
        (3.0, 1.8, 0.6, 1.0),
    ] {
        grid.push(pair(Some(0.0), None, None, Some(c + d), gk, gj, 1, d));
    }

    // Erlang periods for the six patterns that keep a closed form.
    for m in [2u32, 3] {
        let f = m as f64; // keep mean durations comparable across shapes
        for (a, g, d) in [(0.8, 1.0 * f, 0.0), (2.5, 1.5, 0.5)] {
            grid.push(pair(Some(0.0), None, Some(a + d), None, g, 1.0, m, d));
        }
        for (a, g, d) in [(0.5, 0.8 * f, 0.0), (3.0, 2.0, 1.0)] {
            grid.push(pair(Some(0.0), None, Some(a + d), Some(a + d + 1.0), g, 1.0, m, d));
        }
        for (b, g, d) in [(0.5, 1.0 * f, 0.0), (2.0, 1.2, 0.5)] {
            grid.push(pair(None, Some(1.0 + b), Some(1.0 + d), None, g, 1.0, m, d));
        }
        for (b, g, d) in [(-0.5, 0.9 * f, 0.0), (1.0, 1.5, 1.0)] {
            grid.push(pair(None, Some(1.0 + b), Some(1.0 + d), Some(1.9 + d), g, 1.0, m, d));
        }
        for (dk, s, gj, d) in [(1.5, 0.8, 1.0 * f, 0.0), (2.0, 2.6, 1.4, 0.5)] {
            grid.push(pair(Some(0.0), Some(dk), None, Some(s + d), 1.0, gj, m, d));
        }
        for (rk, s, gk, gj, d) in [(2.0, 3.0, 1.0 * f, 1.2, 0.0), (2.5, 1.0, 1.5, 0.7 * f, 1.0)] {
            grid.push(pair(None, Some(rk), None, Some(s + d), gk, gj, m, d));
        }
    }
    assert!(grid.len() >= 45, "grid has only {} points", grid.len());

    grid.par_iter().enumerate().for_each(|(idx, p)| {
        let closed = expected_tau(p).unwrap();
        let mc = mc_tau_oracle(p, MC_SAMPLES, 0xE00 + idx as u64).unwrap();
        assert_eq!(mc.samples, MC_SAMPLES);
        let err = (closed - mc.mean).abs();
        assert!(
            err <= MC_SIGMAS * mc.std_error + MC_FLOOR,
            "point {idx} ({:?}): closed {closed} vs mc {} +- {}",
            p.pattern().unwrap(),
            mc.mean,
            mc.std_error
        );
    });

    // The opposite-sided pattern switches formulas where the two removal
    // rates coincide; crossing that line must not move the value.
    for (c, g) in [(0.5, 0.8), (1.5, 1.0), (3.0, 1.3), (0.9, 2.0), (2.2, 0.6)] {
        let at = |gj: f64| {
            expected_tau(&pair(Some(0.0), None, None, Some(c), g, gj, 1, 0.0)).unwrap()
        };
        let base = at(g);
        assert!(base > 0.0);
        for eps in [1e-6, -1e-6] {
            let near = at(g * (1.0 + eps));
            assert!(
                (near - base).abs() <= EQUAL_RATE_REL_TOL * base,
                "c={c}, g={g}, eps={eps}: {near} vs {base}"
            );
        }
    }

    // Shape-general formulas at shape 1 against independently derived
    // exponential expressions.
    for p in grid.iter().filter(|p| p.shape == 1) {
        let reference = match p.pattern().unwrap() {
            ObservationPattern::InfectionsOnly | ObservationPattern::InfectionsRemovalJ => {
                exponential_reference::capped(
                    p.i_j.unwrap() - p.incubation - p.i_k.unwrap(),
                    p.gamma_k,
                )
            }
            ObservationPattern::RemovalKInfectionJ | ObservationPattern::RemovalsInfectionJ => {
                exponential_reference::beyond(
                    p.r_k.unwrap() - (p.i_j.unwrap() - p.incubation),
                    p.gamma_k,
                )
            }
            ObservationPattern::RemovalsInfectionK => exponential_reference::onset_k(
                p.i_k.unwrap(),
                p.r_k.unwrap(),
                p.r_j.unwrap() - p.incubation,
                p.gamma_j,
            ),
            ObservationPattern::RemovalsOnly => exponential_reference::removals_only(
                p.r_k.unwrap(),
                p.r_j.unwrap() - p.incubation,
                p.gamma_k,
                p.gamma_j,
            ),
            // Exponential-only pattern: nothing to reduce from.
            ObservationPattern::InfectionKRemovalJ => continue,
            ObservationPattern::Complete => unreachable!("grid holds partial pairs only"),
        };
        let closed = expected_tau(p).unwrap();
        assert!(
            (closed - reference).abs() <= REDUCTION_TOL * reference.abs().max(1.0),
            "{:?} ({p:?}): {closed} vs exponential reference {reference}",
            p.pattern().unwrap()
        );
    }
}

/// 3. With nothing missing, both imputation estimators, the single-group
/// estimator, and the flat-kernel estimator all collapse to the plain MLE.
#[test]
fn structured_estimators_collapse_to_the_plain_mle_on_complete_data() {
    const REL_TOL: f64 = 1e-12;
    let population = 60;
    let log = retained_outbreak(2.0, 1.0, 1, 0.0, population, 20, 0x03);
    let cases = log.cases;
    let n = cases.len();

    let gamma_hat = mle_gamma(&cases, 1).unwrap();
    let mle = mle_beta(&cases, population, 0.0).unwrap();
    let tilde = impute_beta_tilde(&cases, population, 1, 0.0, gamma_hat).unwrap();
    let bar = impute_beta_bar(&cases, population, 1, 0.0, gamma_hat).unwrap();
    assert_rel_close(tilde.value, mle.value, REL_TOL, "imputed vs mle");
    assert_rel_close(bar.value, mle.value, REL_TOL, "mean-filled vs mle");

    // One group holding the whole population beyond the index case.
    let mut grouped = cases.clone();
    for c in &mut grouped {
        c.infection_group = Some("all".into());
    }
    let sizes = BTreeMap::from([("all".to_string(), population - 1)]);
    let by_group = mle_beta_group(&grouped, population, &sizes, 0.0).unwrap();
    assert_eq!(by_group.len(), 1);
    assert_rel_close(by_group["all"].value, mle.value, REL_TOL, "single group vs mle");

    // A constant kernel weights every pair by one, wherever people stand.
    let mut located = cases.clone();
    for (i, c) in located.iter_mut().enumerate() {
        c.location = Some([i as f64, (i % 7) as f64]);
    }
    let susceptibles: Vec<[f64; 2]> =
        (0..population - n).map(|i| [100.0 + i as f64, 3.0]).collect();
    let flat =
        mle_beta_kernel(&located, population, &KernelSpec::Constant, &susceptibles, 0.0).unwrap();
    assert_rel_close(flat.value, mle.value, REL_TOL, "flat kernel vs mle");
}

/// 4. On fully observed outbreaks the complete-data MLEs center on the rates
/// that generated them.
#[test]
fn complete_data_estimates_center_on_the_true_rates() {
    const TRUE_BETA: f64 = 1.5;
    const TRUE_GAMMA: f64 = 1.0;
    const POPULATION: usize = 200;
    const MIN_SIZE: usize = 20;
    const RETAINED: usize = 500;
    let start = Instant::now();

    let estimates: Vec<(f64, f64)> = (0u64..2000)
        .into_par_iter()
        .filter_map(|i| {
            let seed = stream_seed(0x04, &[tag::SIMULATE, i]);
            let log = simulate_sir(TRUE_BETA, TRUE_GAMMA, POPULATION, seed).unwrap();
            if log.final_size() < MIN_SIZE {
                return None;
            }
            let beta = mle_beta(&log.cases, POPULATION, 0.0).unwrap().value;
            let gamma = mle_gamma(&log.cases, 1).unwrap();
            Some((beta, gamma))
        })
        .collect();
    assert!(estimates.len() >= RETAINED, "only {} retained outbreaks", estimates.len());

    let beta_median = median(estimates.iter().take(RETAINED).map(|e| e.0));
    let gamma_median = median(estimates.iter().take(RETAINED).map(|e| e.1));
    assert!((1.35..=1.65).contains(&beta_median), "median beta {beta_median}");
    assert!((0.9..=1.1).contains(&gamma_median), "median gamma {gamma_median}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "centering sweep took {elapsed:?}");
}

/// 5. Reduced rerun of a calibration cell: true rates (2, 1) with a one-unit
/// incubation delay, a fifth of the cases partially observed, infection times
/// lost four times out of five. The studentized intervals must land on the
/// reference empirical coverage 0.91 and mean width 0.91.
#[test]
fn bootstrap_intervals_reproduce_the_reference_coverage_and_width() {
    const TRUE_BETA: f64 = 2.0;
    const GAMMA: f64 = 1.0;
    const DELTA: f64 = 1.0;
    const P_MISSING: f64 = 0.2;
    const P_INF_MISSING: f64 = 0.8;
    const POPULATION: usize = 100;
    const MIN_SIZE: usize = 20;
    const REPS: u64 = 200;
    const TARGET_COVERAGE: f64 = 0.91;
    const COVERAGE_TOL: f64 = 0.06;
    const TARGET_WIDTH: f64 = 0.91;
    const WIDTH_TOL: f64 = 0.25;

    let intervals: Vec<Option<(bool, f64)>> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = stream_seed(0x05, &[tag::STUDY, rep]);
            let log =
                retained_outbreak(TRUE_BETA, GAMMA, 1, DELTA, POPULATION, MIN_SIZE, rep_seed);
            let (masked, _) =
                inject_missingness(&log.cases, P_MISSING, P_INF_MISSING, rep_seed).unwrap();
            let gamma_hat = mle_gamma(&masked, 1).unwrap();
            let tilde = impute_beta_tilde(&masked, POPULATION, 1, DELTA, gamma_hat).unwrap();

            let (n_partial, n_inf) = realized_counts(&masked);
            let mut cfg = BootstrapConfig::new(rep_seed);
            cfg.b_out = 200;
            cfg.b_in = 20;
            cfg.p_missing = n_partial as f64 / masked.len() as f64;
            cfg.p_inf_missing =
                if n_partial == 0 { 0.0 } else { n_inf as f64 / n_partial as f64 };

            bootstrap_t(&masked, POPULATION, 1, DELTA, tilde.value, gamma_hat, &cfg)
                .ok()
                .map(|res| {
                    let covered = res.beta.lower <= TRUE_BETA && TRUE_BETA <= res.beta.upper;
                    (covered, res.beta.upper - res.beta.lower)
                })
        })
        .collect();

    let usable: Vec<(bool, f64)> = intervals.iter().flatten().copied().collect();
    assert!(
        usable.len() as u64 * 100 >= REPS * 95,
        "only {}/{REPS} replicates produced intervals",
        usable.len()
    );
    let coverage = usable.iter().filter(|(covered, _)| *covered).count() as f64
        / usable.len() as f64;
    let mean_width = usable.iter().map(|(_, w)| w).sum::<f64>() / usable.len() as f64;
    assert!(
        (coverage - TARGET_COVERAGE).abs() <= COVERAGE_TOL,
        "coverage {coverage} vs {TARGET_COVERAGE} +- {COVERAGE_TOL}"
    );
    assert!(
        (mean_width - TARGET_WIDTH).abs() <= WIDTH_TOL,
        "mean width {mean_width} vs {TARGET_WIDTH} +- {WIDTH_TOL}"
    );
}

/// 6. Under heavy missingness at a high transmission rate the imputed point
/// estimate is biased low, and the interval midpoint must recover part of
/// that bias.
#[test]
fn bootstrap_midpoints_correct_the_downward_bias_of_heavy_missingness() {
    const TRUE_BETA: f64 = 5.0;
    const GAMMA: f64 = 1.0;
    const P_MISSING: f64 = 0.6;
    const P_INF_MISSING: f64 = 0.8;
    const POPULATION: usize = 100;
    const MIN_SIZE: usize = 20;
    const REPS: u64 = 200;

    let outcomes: Vec<Option<(f64, f64)>> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = stream_seed(0x06, &[tag::STUDY, rep]);
            let log = retained_outbreak(TRUE_BETA, GAMMA, 1, 0.0, POPULATION, MIN_SIZE, rep_seed);
            let (masked, _) =
                inject_missingness(&log.cases, P_MISSING, P_INF_MISSING, rep_seed).unwrap();
            let gamma_hat = mle_gamma(&masked, 1).ok()?;
            let tilde = impute_beta_tilde(&masked, POPULATION, 1, 0.0, gamma_hat).ok()?;

            let (n_partial, n_inf) = realized_counts(&masked);
            let mut cfg = BootstrapConfig::new(rep_seed);
            cfg.b_out = 100;
            cfg.b_in = 10;
            cfg.se_reps = 50;
            cfg.p_missing = n_partial as f64 / masked.len() as f64;
            cfg.p_inf_missing =
                if n_partial == 0 { 0.0 } else { n_inf as f64 / n_partial as f64 };

            let res = bootstrap_t(&masked, POPULATION, 1, 0.0, tilde.value, gamma_hat, &cfg).ok()?;
            Some((tilde.value, res.beta.midpoint))
        })
        .collect();

    let paired: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    assert!(
        paired.len() as u64 * 100 >= REPS * 90,
        "only {}/{REPS} replicates completed",
        paired.len()
    );
    let tilde_median = median(paired.iter().map(|p| p.0));
    let midpoint_median = median(paired.iter().map(|p| p.1));
    assert!(tilde_median < TRUE_BETA, "imputed median {tilde_median} is not biased low");
    assert!(
        (midpoint_median - TRUE_BETA).abs() < (tilde_median - TRUE_BETA).abs(),
        "midpoint median {midpoint_median} is no closer to {TRUE_BETA} than {tilde_median}"
    );
}

const CONJUGATE_SIGMAS: f64 = 3.0;

/// Sample mean and variance of `draws` against a Gamma(shape, rate) target,
/// each within `CONJUGATE_SIGMAS` standard errors of its Monte Carlo
/// estimator (`scale` converts the draws' unit, e.g. population scaling).
fn assert_gamma_moments(draws: &[f64], shape: f64, rate: f64, scale: f64, name: &str) {
    let n = draws.len() as f64;
    let mean = scale * shape / rate;
    let var = scale * scale * shape / (rate * rate);

    let m = draws.iter().sum::<f64>() / n;
    let s2 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);

    let se_mean = (var / n).sqrt();
    // Var(s^2) ~ (mu4 - sigma^4)/n, with mu4 = sigma^4 (3 + 6/shape) for a
    // Gamma distribution.
    let se_var = var * ((2.0 + 6.0 / shape) / n).sqrt();
    assert!(
        (m - mean).abs() <= CONJUGATE_SIGMAS * se_mean,
        "{name}: sample mean {m} vs {mean} (se {se_mean})"
    );
    assert!(
        (s2 - var).abs() <= CONJUGATE_SIGMAS * se_var,
        "{name}: sample variance {s2} vs {var} (se {se_var})"
    );
}

/// 7a. On complete data the sampler's rate draws are exact conjugate Gamma
/// posteriors; the chain must match their mean and variance.
#[test]
fn complete_data_chains_sample_the_conjugate_posterior() {
    const DRAWS: usize = 5000;
    let population = 50;
    let log = retained_outbreak(2.0, 1.0, 1, 0.0, population, 20, 0x7A);
    let cases = log.cases;
    let n = cases.len();

    // The exposure integral and total infectious time, straight from the
    // observed records.
    let mut pressure = 0.0;
    let mut total_duration = 0.0;
    for k in &cases {
        let (ik, rk) = (k.infection.unwrap(), k.removal.unwrap());
        total_duration += rk - ik;
        pressure += (population - n) as f64 * (rk - ik);
        for j in &cases {
            if j.id != k.id {
                pressure += (rk.min(j.infection.unwrap()) - ik).max(0.0);
            }
        }
    }

    let prior = PriorSpec::vague();
    let cfg = McmcConfig::new(DRAWS, 0x7A1);
    let chain = run_damcmc(&cases, population, &prior, 1, 0.0, &cfg).unwrap();
    assert!(chain.missing_endpoints.is_empty());
    assert_eq!(chain.acceptance_rate(), 1.0);

    // The traced transmission rate is the population-scaled pair rate.
    assert_gamma_moments(
        &chain.beta,
        prior.beta_shape + (n - 1) as f64,
        prior.beta_rate + pressure,
        population as f64,
        "beta",
    );
    assert_gamma_moments(
        &chain.gamma,
        prior.gamma_shape + n as f64,
        prior.gamma_rate + total_duration,
        1.0,
        "gamma",
    );
}

/// 7b. Two cases, one latent infection time: the long-run histogram of the
/// augmented endpoint must match the target marginal computed by direct
/// numerical integration.
#[test]
fn augmented_endpoint_sampler_matches_its_target_on_a_two_case_instance() {
    const TV_BOUND: f64 = 0.05;
    let case0 = CaseRecord::complete(1, 0.0, 1.2);
    let mut case1 = CaseRecord::complete(2, 1.0, 2.0);
    case1.infection = None;
    let population = 10usize;
    let prior = PriorSpec { beta_shape: 1.0, beta_rate: 1.0, gamma_shape: 1.0, gamma_rate: 1.0 };
    let mut cfg = McmcConfig::new(200_000, 0x7B2);
    cfg.fixed_gamma = Some(1.0);
    cfg.attempts = Some(4);
    let chain = run_damcmc(&[case0, case1], population, &prior, 1, 0.0, &cfg).unwrap();
    let draws: Vec<f64> = chain.endpoint_trace.iter().map(|row| row[0]).collect();

    // Unnormalized marginal of the latent infection time x at frozen removal
    // rate 1: feasibility x (prior rate + pressure)^-(prior shape + n - 1) x
    // the Erlang density of the implied duration 2 - x.
    let density = |x: f64| {
        let feasible = (0.0 < x && x < 1.2) || x < 0.0;
        if !feasible || x >= 2.0 {
            return 0.0;
        }
        let pair_pressure = x.abs();
        let b = pair_pressure + (population as f64 - 2.0) * (1.2 + (2.0 - x));
        (1.0 + b).powf(-2.0) * (-(2.0 - x)).exp()
    };

    let (lo, hi, width) = (-8.0f64, 2.0f64, 0.1f64);
    let bins = ((hi - lo) / width).round() as usize;
    let mut observed = vec![0.0; bins + 1]; // slot 0 catches x < lo
    for x in &draws {
        let slot = if *x < lo { 0 } else { 1 + (((x - lo) / width) as usize).min(bins - 1) };
        observed[slot] += 1.0;
    }
    for o in &mut observed {
        *o /= draws.len() as f64;
    }

    let mut expected = vec![0.0; bins + 1];
    let substeps = 32;
    for (bin, e) in expected.iter_mut().enumerate().skip(1) {
        let left = lo + (bin - 1) as f64 * width;
        for s in 0..substeps {
            let x = left + (s as f64 + 0.5) * width / substeps as f64;
            *e += density(x) * width / substeps as f64;
        }
    }
    for s in 0..4000 {
        expected[0] += density(lo - (s as f64 + 0.5) * 0.01) * 0.01;
    }
    let total: f64 = expected.iter().sum();
    for e in &mut expected {
        *e /= total;
    }

    let tv = 0.5 * observed.iter().zip(&expected).map(|(o, e)| (o - e).abs()).sum::<f64>();
    assert!(tv < TV_BOUND, "total variation {tv}");
    // Both support branches (index case on either side) must be visited.
    assert!(draws.iter().any(|x| *x < 0.0) && draws.iter().any(|x| *x > 0.0));
}

/// 7c. Ten independent chains on a partially observed outbreak agree with
/// each other: split R-hat below 1.05 for every traced parameter.
#[test]
fn parallel_chains_on_masked_data_pass_the_split_rhat_gate() {
    const CHAINS: usize = 10;
    const ITERATIONS: usize = 1000;
    const BURN_IN: usize = 200;
    const RHAT_BOUND: f64 = 1.05;
    let population = 100;

    let log = retained_outbreak(2.0, 1.0, 1, 0.0, population, 20, 0x7C);
    let (masked, report) = inject_missingness(&log.cases, 0.2, 0.8, 0x7C1).unwrap();
    assert!(report.masked > 0, "the mixing check needs latent endpoints");

    let cfg = McmcConfig::new(ITERATIONS, 0x7C2);
    let chains =
        run_chains(&masked, population, &PriorSpec::vague(), 1, 0.0, &cfg, CHAINS).unwrap();
    assert_eq!(chains.len(), CHAINS);

    let params: [(&str, fn(&Chain) -> Vec<f64>); 3] =
        [("beta", |c| c.beta.clone()), ("gamma", |c| c.gamma.clone()), ("r0", Chain::r0)];
    for (name, extract) in params {
        let kept: Vec<Vec<f64>> =
            chains.iter().map(|c| extract(c)[BURN_IN..].to_vec()).collect();
        let rhat = split_rhat(&kept).unwrap();
        assert!(rhat < RHAT_BOUND, "{name}: split R-hat {rhat}");
    }
}

/// 8. Summed over all ordered pairs of a removal-only set, the imputed
/// pressures collapse to `count * (count - 1) / (2 * gamma)` no matter where
/// the removal times sit.
#[test]
fn removal_only_pair_pressures_sum_to_the_count_identity() {
    const SUM_TOL: f64 = 1e-9;
    for count in [2usize, 3, 7, 25, 100, 200] {
        for gamma_hat in [0.5f64, 2.0] {
            let removals: Vec<f64> = (0..count).map(|i| 0.9 + 1.13 * i as f64).collect();
            // Kahan summation: the identity is sharper than a naive sum of
            // forty thousand terms.
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for (k, rk) in removals.iter().enumerate() {
                for (j, rj) in removals.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let p = PairObservation::exponential(
                        None,
                        Some(*rk),
                        None,
                        Some(*rj),
                        gamma_hat,
                        gamma_hat,
                    );
                    let y = expected_tau(&p).unwrap() - comp;
                    let t = sum + y;
                    comp = (t - sum) - y;
                    sum = t;
                }
            }
            let expected = removal_only_pair_sum(count, gamma_hat);
            assert!(
                (sum - expected).abs() <= SUM_TOL,
                "count {count}, gamma {gamma_hat}: {sum} vs {expected}"
            );
        }
    }
}

/// 9. The study pipeline is a pure function of its configuration and master
/// seed: rerunning the binary bit-reproduces every result file.
#[test]
fn study_runs_are_reproducible_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("study.toml");
    std::fs::write(
        &config_path,
        format!(
            r#"seed = 11
output_dir = "{}"
population = 70
gamma = 1.0
m = 1
delta = 0.0
min_size = 12
replicates = 3
retention_tries = 200
beta = [2.0]
p_missing = [0.3]
p_inf_missing = 0.8

[bootstrap]
b_out = 12
b_in = 4
se_reps = 6
omega = 0.2
alpha = 0.1
max_tries = 300

[mcmc]
iterations = 60
burn_in = 20
"#,
            out.display()
        ),
    )
    .unwrap();

    let run = || {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_epitau"))
            .arg("study")
            .arg("--config")
            .arg(&config_path)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "study failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let mut artifacts = vec![output.stdout];
        for name in ["replicates.csv", "cells.csv", "study_summary.json"] {
            artifacts.push(std::fs::read(out.join(name)).unwrap());
        }
        artifacts
    };

    let first = run();
    let second = run();
    assert_eq!(first, second, "rerun changed at least one artifact");
    // Stdout is the summary document itself.
    assert_eq!(first[0], first[3]);
}
