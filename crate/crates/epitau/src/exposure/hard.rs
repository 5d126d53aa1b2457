//! Expected pressure when only the infector's onset `i_k` and the infectee's
//! removal `r_j` are observed (exponential periods).
//!
//! With `r_k = i_k + X_k`, `X_k ~ Exp(gamma_k)` and `e_j = w' - X_j`,
//! `X_j ~ Exp(gamma_j)` independent (`w'` is the infectee's shifted removal),
//! the pressure `tau = min(r_k, e_j) - min(e_j, i_k)` decomposes over three
//! disjoint events:
//!
//! * `e_j < i_k`: no pressure;
//! * `e_j > r_k`: the full period, `T1 = E[(r_k - i_k) 1(e_j > r_k)]`;
//! * `i_k < e_j < r_k`, split on whether `r_k` lands beyond `w'` (`S9`) or
//!   inside (`S10`): partial pressure `e_j - i_k`.
//!
//! The expectation is invariant under time translation, so everything is
//! written in terms of the gap `w = w' - i_k` with `i_k` at the origin, which
//! zeroes the terms proportional to `i_k` in the raw expansion. All
//! rate-difference dependence (`a = gamma_j - gamma_k`) is routed through the
//! entire-function kernels `int_exp` and `int_x_exp`, so the equal-rate limit
//! is exact rather than a special-cased branch.

use crate::numeric::{int_exp, int_x_exp};

/// `e^{-gamma w} * int_0^w e^{a x} dx`, guarded against overflow of the
/// integral for large positive `a w` (where the product is still moderate).
fn weighted_int_exp(gamma: f64, a: f64, w: f64) -> f64 {
    if a * w > 500.0 {
        // e^{-gamma w} (e^{aw} - 1)/a with the e^{-(gamma - a) w} term dominant.
        ((-(gamma - a) * w).exp() - (-gamma * w).exp()) / a
    } else {
        (-gamma * w).exp() * int_exp(a, w)
    }
}

/// `e^{-gamma w} * int_0^w x e^{a x} dx`, same guard.
fn weighted_int_x_exp(gamma: f64, a: f64, w: f64) -> f64 {
    if a * w > 500.0 {
        ((-(gamma - a) * w).exp() * (a * w - 1.0) + (-gamma * w).exp()) / (a * a)
    } else {
        (-gamma * w).exp() * int_x_exp(a, w)
    }
}

/// `T1 = E[(r_k - i_k) 1(e_j > r_k)]`: expected full-period pressure.
pub(crate) fn full_period_term(w: f64, gamma_k: f64, gamma_j: f64) -> f64 {
    let a = gamma_j - gamma_k;
    let head = (-(-gamma_j * w).exp_m1()) / gamma_j;
    gamma_j / gamma_k
        * (head - weighted_int_exp(gamma_j, a, w) - gamma_k * weighted_int_x_exp(gamma_j, a, w))
}

/// `S9 = E[(e_j - i_k) 1(i_k < e_j < w' < r_k)]`: partial pressure with the
/// infector still infectious at `w'`.
pub(crate) fn partial_term_outer(w: f64, gamma_k: f64, gamma_j: f64) -> f64 {
    let u = gamma_j * w;
    (-gamma_k * w).exp() * ((-u).exp_m1() + u) / gamma_j
}

/// `S10 = E[(e_j - i_k) 1(i_k < e_j < r_k < w')]`: partial pressure with the
/// infector removed before `w'`.
pub(crate) fn partial_term_inner(w: f64, gamma_k: f64, gamma_j: f64) -> f64 {
    let a = gamma_j - gamma_k;
    gamma_j * weighted_int_x_exp(gamma_j, a, w) - partial_term_outer(w, gamma_k, gamma_j)
}

/// Expected pressure for the onset/removal pattern; `w` is the gap between
/// the infectee's shifted removal and the infector's onset.
pub(crate) fn expected_tau(w: f64, gamma_k: f64, gamma_j: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    full_period_term(w, gamma_k, gamma_j)
        + partial_term_outer(w, gamma_k, gamma_j)
        + partial_term_inner(w, gamma_k, gamma_j)
}
