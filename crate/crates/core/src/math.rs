//! Small numerical helpers shared by the choice rule and the policies.

use libm::{exp, log};

/// `log Σ exp(x_i)` with max-shift. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + log(sum)
}

/// `x log x` with the convention `0 log 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * log(x)
    }
}

/// Inverse-CDF draw over categories given by their log-probabilities, in
/// order. `u` is a uniform draw in `[0, 1)`. Rounding leftovers fall on the
/// last category.
pub fn sample_log_categorical<I>(log_probs: I, u: f64) -> usize
where
    I: IntoIterator<Item = f64>,
{
    let mut cumulative = 0.0;
    let mut last = 0;
    for (i, lp) in log_probs.into_iter().enumerate() {
        cumulative += exp(lp);
        last = i;
        if u < cumulative {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_on_small_values() {
        let xs = [0.1, -0.4, 1.3];
        let naive = log(xs.iter().map(|&x| exp(x)).sum::<f64>());
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_is_stable_for_huge_values() {
        let v = log_sum_exp(&[1e6, 1e6]);
        assert!((v - (1e6 + core::f64::consts::LN_2)).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn categorical_edges() {
        let lp = [log(0.25), log(0.75)];
        assert_eq!(sample_log_categorical(lp, 0.0), 0);
        assert_eq!(sample_log_categorical(lp, 0.2499), 0);
        assert_eq!(sample_log_categorical(lp, 0.25), 1);
        assert_eq!(sample_log_categorical(lp, 0.999_999_999), 1);
    }

    #[test]
    fn xlogx_zero() {
        assert_eq!(xlogx(0.0), 0.0);
        assert!((xlogx(0.5) - 0.5 * log(0.5)).abs() < 1e-16);
    }
}
