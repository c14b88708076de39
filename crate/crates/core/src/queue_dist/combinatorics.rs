//! Binomial coefficients, factorials and Poisson terms.
//!
//! Small binomials are computed exactly in integer arithmetic; larger ones
//! go through log-factorials so that products with tiny Poisson terms can be
//! combined before exponentiation.

use std::sync::OnceLock;

const EXACT_BINOM_MAX_N: i64 = 60;
const LN_FACTORIAL_TABLE: usize = 2048;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        table.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACTORIAL_TABLE {
        return ln_factorial_table()[n as usize];
    }
    // Stirling series; the truncation error is far below f64 resolution here.
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
}

/// `C(n, k)` with the extended convention `C(n, k) = 0` for `k < 0`,
/// `k > n` or `n < 0`.
pub fn binom(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    if n <= EXACT_BINOM_MAX_N {
        let k = k.min(n - k) as u128;
        let n = n as u128;
        let mut acc: u128 = 1;
        for i in 0..k {
            // Exact: acc * (n - i) is divisible by (i + 1).
            acc = acc * (n - i) / (i + 1);
        }
        return acc as f64;
    }
    ln_binom(n, k).exp()
}

/// `ln C(n, k)`, `-inf` where the coefficient vanishes.
pub fn ln_binom(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return f64::NEG_INFINITY;
    }
    if n <= EXACT_BINOM_MAX_N {
        return binom(n, k).ln();
    }
    ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64)
}

/// `ln pi(k, mu)` for the Poisson law with mean `mu`.
pub fn ln_poisson(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

/// `pi(k, mu) = mu^k e^-mu / k!`.
pub fn poisson(k: u64, mu: f64) -> f64 {
    ln_poisson(k, mu).exp()
}

/// `ln(base^exp)` with `0^0 = 1`.
pub(crate) fn ln_pow(base: f64, exp: u64) -> f64 {
    if exp == 0 {
        0.0
    } else {
        exp as f64 * base.ln()
    }
}

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_examples() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(3, 5), 0.0);
        assert_eq!(binom(0, 0), 1.0);
        assert_eq!(binom(-1, 0), 0.0);
        assert_eq!(binom(4, -1), 0.0);
        assert_eq!(binom(60, 30), 118_264_581_564_861_424.0);
    }

    #[test]
    fn log_space_matches_exact_at_the_seam() {
        // C(61, k) via log-factorials against Pascal's rule on exact C(60, .).
        for k in 0..=61 {
            let pascal = binom(60, k - 1) + binom(60, k);
            let logged = binom(61, k);
            assert!((logged - pascal).abs() <= 1e-12 * pascal, "k = {k}");
        }
    }

    #[test]
    fn large_binomials_do_not_overflow() {
        let v = ln_binom(2000, 1000);
        // ln C(2n, n) ~ 2n ln 2 - 0.5 ln(pi n)
        let approx = 2000.0 * 2f64.ln() - 0.5 * (std::f64::consts::PI * 1000.0).ln();
        assert!((v - approx).abs() < 1e-3);
        assert!(binom(2000, 1000).is_infinite() || binom(2000, 1000) > 1e300);
    }

    #[test]
    fn stirling_tail_is_continuous() {
        let n = LN_FACTORIAL_TABLE as u64;
        let from_table = ln_factorial(n - 1) + (n as f64).ln();
        assert!((ln_factorial(n) - from_table).abs() < 1e-9);
    }

    #[test]
    fn poisson_closed_form() {
        let expected = 8.0 * (-2.0f64).exp() / 6.0;
        assert!((poisson(3, 2.0) - expected).abs() < 1e-15);
        assert!((poisson(3, 2.0) - 0.180447).abs() < 1e-6);
        assert_eq!(poisson(0, 0.0), 1.0);
        assert_eq!(poisson(1, 0.0), 0.0);
    }

    #[test]
    fn ln_add_handles_infinities() {
        assert_eq!(ln_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert!((ln_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(ln_add(1.0, f64::NEG_INFINITY), 1.0);
    }
}
