//! The three queue-length distributions.
//!
//! * [`prop1_pmf`]: the prior. Each lane's queue is Poisson with mean
//!   `mu_i = lambda_i r_i`, independently across lanes.
//! * [`prop2_joint`]: the joint law of `(A, B, C)` given the last-probe
//!   position `m` and the number of queued probes `x_p`.
//! * [`prop3_pmf`]: the law of one lane given `m` and that lane's estimated
//!   probe count.
//!
//! Weights are assembled in log space and exponentiated after subtracting
//! their maximum. Factors that are constant over the support (powers of `p`
//! and `(1 - p)^-x_p`) are dropped; at `p = 1` the joint law is restricted to
//! `a + b + c = x_p` directly.

use super::combinatorics::{binom, ln_add, ln_binom, ln_poisson, ln_pow};
use super::pmf::{truncation_bound, JointQueuePmf, QueuePmf};
use crate::{Error, Result};

/// Inputs of the queue distributions for one three-lane road.
#[derive(Debug, Clone, PartialEq)]
pub struct StockParams {
    /// Expected stocks `mu_i = lambda_i r_i`.
    pub mu: [f64; 3],
    /// Arrival rates `lambda_i` (veh/s).
    pub lambdas: [f64; 3],
    /// Penetration ratio.
    pub p: f64,
    /// Within-lane position of the most recently arrived queued probe, 0 if none.
    pub m: u32,
    /// Number of queued probes on the road.
    pub x_p: u32,
    /// Estimated probe counts per lane.
    pub probe_counts: [u32; 3],
}

impl StockParams {
    /// Stocks after `red_elapsed[i]` seconds of red on each lane.
    pub fn new(lambdas: [f64; 3], red_elapsed: [f64; 3], p: f64) -> Self {
        Self {
            mu: [0, 1, 2].map(|i| lambdas[i] * red_elapsed[i]),
            lambdas,
            p,
            m: 0,
            x_p: 0,
            probe_counts: [0; 3],
        }
    }

    pub fn with_observation(mut self, m: u32, x_p: u32, probe_counts: [u32; 3]) -> Self {
        self.m = m;
        self.x_p = x_p;
        self.probe_counts = probe_counts;
        self
    }

    pub fn mu_max(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    /// Support bound for the conditional laws under the truncation policy.
    pub fn n_max(&self) -> usize {
        truncation_bound(self.mu_max(), self.m, self.x_p)
    }

    /// Same parameters seen from `lane`: that lane moves to position 0, the
    /// other two keep their relative order.
    fn rotated_to(&self, lane: usize) -> Self {
        let order = match lane {
            0 => [0, 1, 2],
            1 => [1, 0, 2],
            _ => [2, 0, 1],
        };
        Self {
            mu: order.map(|i| self.mu[i]),
            lambdas: order.map(|i| self.lambdas[i]),
            probe_counts: order.map(|i| self.probe_counts[i]),
            ..self.clone()
        }
    }
}

/// `(j + k + l) - min - max`, the middle value of the triple.
pub fn tmid(j: u32, k: u32, l: u32) -> u32 {
    j + k + l - j.min(k).min(l) - j.max(k).max(l)
}

/// `sigma_{j,k,l} = C(m - 1 + min(m, j, k, l) + tmid(j, k, l), x_p - 1)`.
pub fn sigma(m: u32, x_p: u32, j: u32, k: u32, l: u32) -> f64 {
    let lo = m.min(j).min(k).min(l);
    binom(m as i64 - 1 + lo as i64 + tmid(j, k, l) as i64, x_p as i64 - 1)
}

/// Truncated Poisson(`mu`) law on `0..=n_max`.
pub fn prop1_pmf(mu: f64, n_max: usize) -> QueuePmf {
    let weights: Vec<f64> = (0..=n_max as u64).map(|k| ln_poisson(k, mu).exp()).collect();
    let tail = tail_sum(n_max, |k| ln_poisson(k, mu), 0.0);
    QueuePmf::from_weights(weights, tail).expect("Poisson mass at 0..=n_max is positive")
}

/// Joint law of `(A, B, C)` given `M = m`, `X_p = x_p`.
pub fn prop2_joint(params: &StockParams, n_max: usize) -> Result<JointQueuePmf> {
    let kernel = Prop2Kernel::new(params, n_max)?;
    let side = n_max + 1;
    let mut weights = vec![0.0; side.pow(3)];
    let total = kernel.visit(|a, b, c, w| weights[(a * side + b) * side + c] = w);
    let tail = kernel.tail_mass_bound(total);
    JointQueuePmf::from_weights(n_max, weights, tail)
}

/// Marginal means of a joint law.
pub fn prop2_expectations(joint: &JointQueuePmf) -> [f64; 3] {
    joint.means()
}

/// Marginal means of [`prop2_joint`] without materializing the cube.
pub fn prop2_means(params: &StockParams, n_max: usize) -> Result<[f64; 3]> {
    let kernel = Prop2Kernel::new(params, n_max)?;
    let mut sums = [0.0f64; 3];
    let total = kernel.visit(|a, b, c, w| {
        sums[0] += a as f64 * w;
        sums[1] += b as f64 * w;
        sums[2] += c as f64 * w;
    });
    if !(total > 0.0) {
        return Err(Error::EmptySupport);
    }
    Ok(sums.map(|s| s / total))
}

struct Prop2Kernel {
    m: usize,
    x_p: usize,
    n_max: usize,
    /// Scaled `(1 - p)^a pi(a, mu_i)` per lane.
    lane: [Vec<f64>; 3],
    lane_shift: [f64; 3],
    /// Scaled `sigma` indexed by `[min(m, lo)][mid]`.
    sigma: Vec<Vec<f64>>,
    sigma_shift: f64,
    ln_one_minus_p: f64,
    /// At `p = 1` every queued vehicle is a probe, so `a + b + c = x_p`.
    saturated: bool,
    mu: [f64; 3],
    p: f64,
}

impl Prop2Kernel {
    fn new(params: &StockParams, n_max: usize) -> Result<Self> {
        if params.m == 0 || params.x_p == 0 {
            return Err(Error::DegenerateObservation {
                m: params.m,
                x_p: params.x_p,
            });
        }
        let m = params.m as usize;
        let x_p = params.x_p as usize;
        let ln_q = (1.0 - params.p).ln();
        let saturated = params.p >= 1.0;
        let mut lane: [Vec<f64>; 3] = Default::default();
        let mut lane_shift = [0.0; 3];
        for i in 0..3 {
            let logs: Vec<f64> = (0..=n_max as u64)
                .map(|a| {
                    let thinning = if saturated { 0.0 } else { ln_pow(1.0 - params.p, a) };
                    thinning + ln_poisson(a, params.mu[i])
                })
                .collect();
            let (scaled, shift) = scale(logs);
            lane[i] = scaled;
            lane_shift[i] = shift;
        }
        let mut logs = Vec::with_capacity((m + 1) * (n_max + 1));
        for lo in 0..=m {
            for mid in 0..=n_max {
                logs.push(ln_binom((m - 1 + lo + mid) as i64, x_p as i64 - 1));
            }
        }
        let (flat, sigma_shift) = scale(logs);
        let sigma = flat.chunks(n_max + 1).map(<[f64]>::to_vec).collect();
        Ok(Self {
            m,
            x_p,
            n_max,
            lane,
            lane_shift,
            sigma,
            sigma_shift,
            ln_one_minus_p: ln_q,
            saturated,
            mu: params.mu,
            p: params.p,
        })
    }

    /// Calls `f(a, b, c, w)` for every supported cell with its scaled
    /// weight and returns the scaled total.
    #[inline]
    fn visit(&self, mut f: impl FnMut(usize, usize, usize, f64)) -> f64 {
        let [wa, wb, wc] = &self.lane;
        let mut total = 0.0;
        for (a, &pa) in wa.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (b, &pb) in wb.iter().enumerate() {
                let pab = pa * pb;
                if pab == 0.0 {
                    continue;
                }
                for (c, &pc) in wc.iter().enumerate() {
                    let hi = a.max(b).max(c);
                    let n = a + b + c;
                    if hi < self.m || n < self.x_p || (self.saturated && n != self.x_p) {
                        continue;
                    }
                    let lo = a.min(b).min(c);
                    let mid = n - lo - hi;
                    let w = pab * pc * self.sigma[lo.min(self.m)][mid];
                    if w > 0.0 {
                        f(a, b, c, w);
                        total += w;
                    }
                }
            }
        }
        total
    }

    /// Upper bound on the untruncated mass outside the cube relative to the
    /// truncated mass.
    ///
    /// `sigma <= C(2m - 1 + max(a, b, c), x_p - 1)`, and lanes other than the
    /// overflowing one contribute at most their full thinned Poisson mass
    /// `e^{-p mu}`.
    fn tail_mass_bound(&self, scaled_total: f64) -> f64 {
        if !(scaled_total > 0.0) {
            return f64::INFINITY;
        }
        if self.saturated {
            return if self.x_p <= self.n_max { 0.0 } else { f64::INFINITY };
        }
        let ln_total = scaled_total.ln() + self.lane_shift.iter().sum::<f64>() + self.sigma_shift;
        let ln_full: [f64; 3] = self.mu.map(|mu| -self.p * mu);
        let mut ln_tail = f64::NEG_INFINITY;
        for i in 0..3 {
            let others: f64 = (0..3).filter(|&k| k != i).map(|k| ln_full[k]).sum();
            let mu = self.mu[i];
            let (m, x_p, ln_q) = (self.m as i64, self.x_p as i64, self.ln_one_minus_p);
            let term = |a: u64| {
                let ln_q_pow = if a == 0 { 0.0 } else { a as f64 * ln_q };
                ln_binom(2 * m - 1 + a as i64, x_p - 1) + ln_q_pow + ln_poisson(a, mu) + others
            };
            ln_tail = ln_add(ln_tail, ln_tail_sum(self.n_max, term));
        }
        (ln_tail - ln_total).exp()
    }
}

/// `S_mu^{m,nu} = sum_{k >= max(m, nu)} sum_{1 <= j <= min(k, m)}
///  C(m-1, j-1) p^j (1-p)^(k-j) pi(k, mu)`, truncated at `k = n_max`.
pub fn s_term(mu: f64, m: u32, nu: u32, p: f64, n_max: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let start = m.max(nu) as usize;
    let mut total = 0.0;
    for k in start..=n_max {
        let ln_pk = ln_poisson(k as u64, mu);
        if ln_pk == f64::NEG_INFINITY {
            continue;
        }
        for j in 1..=k.min(m as usize) {
            let ln_term = ln_binom(m as i64 - 1, j as i64 - 1)
                + ln_pow(p, j as u64)
                + ln_pow(1.0 - p, (k - j) as u64)
                + ln_pk;
            total += ln_term.exp();
        }
    }
    total
}

/// Law of lane `lane`'s queue given the last-probe position `m` and the
/// lane's estimated probe count `params.probe_counts[lane]`.
///
/// With no probe on the lane this is the thinned prior
/// `(1 - p)^a pi(a, mu) / e^{-p mu}`, i.e. Poisson(`(1 - p) mu`).
/// Otherwise `m` must be at least the probe count, else
/// [`Error::InconsistentObservation`].
pub fn prop3_pmf(lane: usize, params: &StockParams, n_max: usize) -> Result<QueuePmf> {
    let local = params.rotated_to(lane);
    let probes = local.probe_counts[0];
    let mu = local.mu[0];
    let p = local.p;

    if probes == 0 {
        let term = |a: u64| ln_pow(1.0 - p, a) + ln_poisson(a, mu);
        return finish_1d(n_max, term);
    }
    let m = local.m;
    if m < probes {
        return Err(Error::InconsistentObservation { m, probes });
    }

    let ln_own = local.lambdas[0].ln() + ln_binom(m as i64 - 1, probes as i64 - 1);
    let s_b = s_term(local.mu[1], m, probes, p, n_max);
    let s_c = s_term(local.mu[2], m, probes, p, n_max);
    let ln_cross = (local.lambdas[1] * s_b + local.lambdas[2] * s_c).ln();
    let k = probes as u64;
    let term = |a: u64| {
        if a < k {
            return f64::NEG_INFINITY;
        }
        let mixing = ln_add(ln_own, ln_cross + ln_binom(a as i64, k as i64));
        mixing + ln_pow(1.0 - p, a - k) + ln_poisson(a, mu)
    };
    finish_1d(n_max, term)
}

/// Mean of a queue-length law.
pub fn prop3_expectation(pmf: &QueuePmf) -> f64 {
    pmf.mean()
}

fn finish_1d(n_max: usize, ln_term: impl Fn(u64) -> f64) -> Result<QueuePmf> {
    let logs: Vec<f64> = (0..=n_max as u64).map(&ln_term).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::EmptySupport);
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let tail = (ln_tail_sum(n_max, |a| ln_term(a) - max) - total.ln()).exp();
    QueuePmf::from_weights(weights, tail)
}

fn scale(logs: Vec<f64>) -> (Vec<f64>, f64) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (vec![0.0; logs.len()], 0.0);
    }
    (logs.into_iter().map(|l| (l - max).exp()).collect(), max)
}

/// `ln sum_{k > n_max} e^{ln_term(k)}`, summed until the terms are
/// negligible and decreasing.
fn ln_tail_sum(n_max: usize, ln_term: impl Fn(u64) -> f64) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    let mut prev = f64::INFINITY;
    let mut k = n_max as u64 + 1;
    loop {
        let t = ln_term(k);
        acc = ln_add(acc, t);
        let decreasing = t <= prev;
        if decreasing && (t == f64::NEG_INFINITY || t < acc - 40.0) {
            break;
        }
        if k > n_max as u64 + 100_000 {
            break;
        }
        prev = t;
        k += 1;
    }
    acc
}

fn tail_sum(n_max: usize, ln_term: impl Fn(u64) -> f64, shift: f64) -> f64 {
    ln_tail_sum(n_max, |k| ln_term(k) - shift).exp()
}
