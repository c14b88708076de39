//! Conditional Monte-Carlo oracles for the queue distributions.
//!
//! The generative model is the simulator's: lane `i` holds Poisson(`mu_i`)
//! vehicles at the end of red, each one a probe with probability `p`, and
//! arrivals across lanes interleave uniformly at random (equal red times).
//! `m` is the within-lane position of the most recently arrived probe.
//!
//! Conditioning uses Poisson thinning so that only the `M = m` event has to
//! be rejected: probe and non-probe counts per lane are independent
//! Poisson variables, and given `X_p = x` the probe lanes are multinomial.

use std::collections::HashMap;

use lanequeue::queue_dist::{binom, poisson, JointQueuePmf, QueuePmf};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use lanequeue::rng::SimRng;

/// Poisson sampler that also accepts a zero mean.
#[derive(Clone, Copy)]
struct Counts(Option<Poisson<f64>>);

impl Counts {
    fn new(mean: f64) -> Self {
        Self((mean > 0.0).then(|| Poisson::new(mean).expect("positive mean")))
    }

    fn draw(&self, rng: &mut SimRng) -> u32 {
        self.0.map_or(0, |d| d.sample(rng) as u32)
    }
}

/// Position of the last probe when `probes` probes and `others` non-probes
/// stand in uniformly random order.
fn last_probe_position(rng: &mut SimRng, probes: u32, others: u32) -> u32 {
    let mut remaining = others;
    let mut trailing = 0;
    while remaining > 0 && rng.random::<f64>() < remaining as f64 / (remaining + probes) as f64 {
        trailing += 1;
        remaining -= 1;
    }
    probes + others - trailing
}

/// Lane of the most recent probe: uniform over all probes.
fn last_probe_lane(rng: &mut SimRng, probes: [u32; 3]) -> usize {
    let total: u32 = probes.iter().sum();
    let mut u = rng.random_range(0..total);
    for (lane, &k) in probes.iter().enumerate() {
        if u < k {
            return lane;
        }
        u -= k;
    }
    unreachable!("u < total")
}

/// Returns `M` for the given per-lane probe and non-probe counts.
fn observe_m(rng: &mut SimRng, probes: [u32; 3], others: [u32; 3]) -> u32 {
    let lane = last_probe_lane(rng, probes);
    last_probe_position(rng, probes[lane], others[lane])
}

/// Accepted draws of `(A, B, C)` given `X_p = x_p` and `M = m`.
pub struct JointSample {
    pub counts: HashMap<[u32; 3], u64>,
    pub accepted: u64,
    pub attempts: u64,
}

pub fn sample_joint(rng: &mut SimRng, mu: [f64; 3], p: f64, m: u32, x_p: u32, accepted: u64) -> JointSample {
    let total_mu: f64 = mu.iter().sum();
    let others_dist = mu.map(|x| Counts::new((1.0 - p) * x));
    let mut counts = HashMap::new();
    let (mut n, mut attempts) = (0, 0);
    while n < accepted {
        attempts += 1;
        let mut probes = [0u32; 3];
        for _ in 0..x_p {
            let u = rng.random::<f64>() * total_mu;
            let lane = if u < mu[0] { 0 } else if u < mu[0] + mu[1] { 1 } else { 2 };
            probes[lane] += 1;
        }
        let others = others_dist.map(|d| d.draw(rng));
        if observe_m(rng, probes, others) != m {
            continue;
        }
        let cell = [0, 1, 2].map(|i| probes[i] + others[i]);
        *counts.entry(cell).or_insert(0) += 1;
        n += 1;
    }
    JointSample {
        counts,
        accepted: n,
        attempts,
    }
}

/// Accepted draws of lane 0's queue given its probe count `a_p` and `M = m`.
pub struct LaneSample {
    pub counts: Vec<u64>,
    pub accepted: u64,
    pub attempts: u64,
}

pub fn sample_lane(rng: &mut SimRng, mu: [f64; 3], p: f64, m: u32, a_p: u32, accepted: u64) -> LaneSample {
    let others_dist = mu.map(|x| Counts::new((1.0 - p) * x));
    let probe_dist = mu.map(|x| Counts::new(p * x));
    let mut counts = Vec::new();
    let (mut n, mut attempts) = (0, 0);
    while n < accepted {
        attempts += 1;
        let probes = [a_p, probe_dist[1].draw(rng), probe_dist[2].draw(rng)];
        let others = others_dist.map(|d| d.draw(rng));
        if probes.iter().sum::<u32>() == 0 || observe_m(rng, probes, others) != m {
            continue;
        }
        let a = (probes[0] + others[0]) as usize;
        if counts.len() <= a {
            counts.resize(a + 1, 0);
        }
        counts[a] += 1;
        n += 1;
    }
    LaneSample {
        counts,
        accepted: n,
        attempts,
    }
}

/// Exact `P(A = a, B = b, C = c | X_p = x_p, M = m)` of the same model on
/// `[0, n_max]^3`, by enumerating probe splits.
pub fn exact_joint(mu: [f64; 3], p: f64, m: u32, x_p: u32, n_max: usize) -> Vec<f64> {
    let side = n_max + 1;
    let mut w = vec![0.0; side * side * side];
    let thin = |n: u32, k: u32| binom(n as i64, k as i64) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
    // P(last of k probes among n vehicles stands at position m).
    let position = |n: u32, k: u32| {
        if k == 0 || m > n {
            0.0
        } else {
            binom(m as i64 - 1, k as i64 - 1) / binom(n as i64, k as i64)
        }
    };
    let mut total = 0.0;
    for a in 0..side as u32 {
        for b in 0..side as u32 {
            for c in 0..side as u32 {
                let n = [a, b, c];
                let prior = poisson(a as u64, mu[0]) * poisson(b as u64, mu[1]) * poisson(c as u64, mu[2]);
                let mut like = 0.0;
                for ka in 0..=x_p.min(a) {
                    for kb in 0..=(x_p - ka).min(b) {
                        let kc = x_p - ka - kb;
                        if kc > c {
                            continue;
                        }
                        let k = [ka, kb, kc];
                        let split = thin(a, ka) * thin(b, kb) * thin(c, kc);
                        let last: f64 = (0..3)
                            .map(|l| k[l] as f64 / x_p as f64 * position(n[l], k[l]))
                            .sum();
                        like += split * last;
                    }
                }
                let v = prior * like;
                w[((a as usize) * side + b as usize) * side + c as usize] = v;
                total += v;
            }
        }
    }
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Total-variation distance between a joint pmf and an empirical sample.
pub fn tv_joint(pmf: &JointQueuePmf, sample: &JointSample) -> f64 {
    let n = sample.accepted as f64;
    let n_max = pmf.n_max() as u32;
    let mut diff = 0.0;
    for ([a, b, c], q) in pmf.cells() {
        let e = sample.counts.get(&[a as u32, b as u32, c as u32]).copied().unwrap_or(0) as f64 / n;
        diff += (q - e).abs();
    }
    for (cell, &k) in &sample.counts {
        if cell.iter().any(|&x| x > n_max) {
            diff += k as f64 / n;
        }
    }
    0.5 * diff
}

/// Total-variation distance between an exact joint table and a sample.
pub fn tv_table(table: &[f64], n_max: usize, sample: &JointSample) -> f64 {
    let side = n_max + 1;
    let n = sample.accepted as f64;
    let mut diff = 0.0;
    for (idx, &q) in table.iter().enumerate() {
        let cell = [(idx / (side * side)) as u32, ((idx / side) % side) as u32, (idx % side) as u32];
        let e = sample.counts.get(&cell).copied().unwrap_or(0) as f64 / n;
        diff += (q - e).abs();
    }
    for (cell, &k) in &sample.counts {
        if cell.iter().any(|&x| x as usize > n_max) {
            diff += k as f64 / n;
        }
    }
    0.5 * diff
}

/// Total-variation distance between a one-lane pmf and a sample.
pub fn tv_lane(pmf: &QueuePmf, sample: &LaneSample) -> f64 {
    let n = sample.accepted as f64;
    let len = pmf.probs().len().max(sample.counts.len());
    let diff: f64 = (0..len)
        .map(|a| (pmf.prob(a) - sample.counts.get(a).copied().unwrap_or(0) as f64 / n).abs())
        .sum();
    0.5 * diff
}

/// Marginal means of a joint sample.
pub fn sample_means(sample: &JointSample) -> [f64; 3] {
    let mut sums = [0.0; 3];
    for (cell, &k) in &sample.counts {
        for i in 0..3 {
            sums[i] += cell[i] as f64 * k as f64;
        }
    }
    sums.map(|s| s / sample.accepted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lanequeue::rng::stream;

    #[test]
    fn rejection_sampler_agrees_with_exact_enumeration() {
        for (mu, p, m, x) in [(2.0, 0.5, 2, 2), (1.0, 0.3, 3, 1), (3.0, 0.5, 1, 3)] {
            let n = 40;
            let exact = exact_joint([mu; 3], p, m, x, n);
            assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let sample = sample_joint(&mut stream(21, m as u64), [mu; 3], p, m, x, 200_000);
            let tv = tv_table(&exact, n, &sample);
            // Noise floor of 2e5 draws over a few hundred effective cells.
            assert!(tv < 0.03, "mu={mu} p={p} m={m} x={x}: TV {tv}");
        }
    }

    #[test]
    fn exact_enumeration_of_a_single_probe() {
        // One probe, m = 1: the probe heads its lane. Check one cell by hand.
        let (mu, p) = (1.0, 0.5);
        let table = exact_joint([mu; 3], p, 1, 1, 20);
        let side = 21;
        let weight = |n: [u32; 3]| {
            let total: u32 = n.iter().sum();
            let prior: f64 = n.iter().map(|&k| poisson(k as u64, mu)).product();
            // P(one probe) * sum over lanes of P(probe in lane l) P(at the front).
            let one = total as f64 * p * (1.0 - p).powi(total as i32 - 1);
            let front: f64 = n.iter().filter(|&&k| k > 0).map(|&k| k as f64 / total as f64 / k as f64).sum();
            prior * one * front
        };
        let idx = |[a, b, c]: [usize; 3]| (a * side + b) * side + c;
        let ratio = table[idx([1, 2, 0])] / table[idx([0, 1, 0])];
        let want = weight([1, 2, 0]) / weight([0, 1, 0]);
        assert!((ratio - want).abs() < 1e-12 * want.abs().max(1.0), "{ratio} vs {want}");
    }
}
