//! Small numerical kernels used by the closed-form pressure expectations.
//!
//! The lemma formulas are riddled with expressions like `(e^z - 1)/z` and
//! `int_0^w x e^{ax} dx` whose naive evaluation loses all precision near the
//! equal-rate limit `a -> 0`. Everything here is written so that limit is
//! smooth to machine precision.

/// `(e^z - 1) / z`, continuous through `z = 0` where it equals 1.
pub fn exp_m1_ratio(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `int_0^w e^{a x} dx`, exact at `a = 0` (where it is `w`).
pub fn int_exp(a: f64, w: f64) -> f64 {
    w * exp_m1_ratio(a * w)
}

/// `int_0^w x e^{a x} dx`, an entire function of `a`.
///
/// For small `|a w|` the closed form `(e^{aw}(aw - 1) + 1)/a^2` cancels
/// catastrophically, so we switch to the power series
/// `sum_q a^q w^{q+2} / (q! (q+2))`.
pub fn int_x_exp(a: f64, w: f64) -> f64 {
    let z = a * w;
    if z.abs() < 0.5 {
        let mut sum = 0.0;
        let mut coeff = 1.0; // z^q / q!
        for q in 0..32u32 {
            let term = coeff / f64::from(q + 2);
            sum += term;
            if term.abs() <= f64::EPSILON * sum.abs() {
                break;
            }
            coeff *= z / f64::from(q + 1);
        }
        sum * w * w
    } else {
        // exp_m1 keeps the small difference accurate before the lone subtraction
        (z.exp_m1() * (z - 1.0) + z) / (a * a)
    }
}

/// Natural log of `k!`.
pub fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// Poisson probability mass `e^{-mean} mean^l / l!`.
pub fn poisson_pmf(l: u32, mean: f64) -> f64 {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    (f64::from(l) * mean.ln() - mean - ln_factorial(l)).exp()
}

/// Survival function of an Erlang(shape, rate) variable:
/// `P(X > t) = sum_{l < shape} e^{-rate t} (rate t)^l / l!`.
pub fn erlang_sf(t: f64, rate: f64, shape: u32) -> f64 {
    debug_assert!(rate > 0.0 && shape >= 1);
    if t <= 0.0 {
        return 1.0;
    }
    let mean = rate * t;
    (0..shape).map(|l| poisson_pmf(l, mean)).sum::<f64>().min(1.0)
}

/// CDF of an Erlang(shape, rate) variable.
pub fn erlang_cdf(t: f64, rate: f64, shape: u32) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (1.0 - erlang_sf(t, rate, shape)).max(0.0)
    }
}

/// Binomial coefficient as a float (inputs stay small here: negative-binomial
/// weights with n at most a few hundred).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

/// Neumaier compensated accumulator. Pair-pressure sums run to ~1e5 terms and
/// feed equality gates at 1e-12 relative, which plain `+=` only just meets.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Linear-interpolation quantile on a pre-sorted slice (the "type 7" rule:
/// `h = (n-1)q`, interpolate between the straddling order statistics).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must be in [0,1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = lo.min(n - 2) + 1;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Round to `digits` significant decimal digits (used for serialized output,
/// where reruns and algebraically-equal estimators must match byte for byte).
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}
