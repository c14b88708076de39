use crate::{Error, Result};

/// Normalization tolerance of every emitted distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Support bound `N_max` for a distribution whose largest stock is `mu_max`
/// observed with last-probe position `m` and `x_p` probes.
///
/// Poisson tails decay super-exponentially beyond `mu + 10 sqrt(mu + 1)`;
/// the additive terms leave room for the combinatorial support constraints.
pub fn truncation_bound(mu_max: f64, m: u32, x_p: u32) -> usize {
    let mu = mu_max.max(0.0);
    (mu + 10.0 * (mu + 1.0).sqrt()).ceil() as usize + m as usize + x_p as usize + 20
}

/// Truncated distribution of one queue length on `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePmf {
    probs: Vec<f64>,
    tail_mass_bound: f64,
}

impl QueuePmf {
    /// Normalizes non-negative `weights`. `tail_mass_bound` is the fraction of
    /// mass the untruncated law puts beyond the support.
    pub(crate) fn from_weights(mut weights: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::EmptySupport);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            probs: weights,
            tail_mass_bound,
        })
    }

    /// Point mass at `k` on `0..=n_max`.
    pub fn point_mass(k: usize, n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max.max(k) + 1];
        probs[k] = 1.0;
        Self {
            probs,
            tail_mass_bound: 0.0,
        }
    }

    /// Uniform law on `0..=n_max`.
    pub fn uniform(n_max: usize) -> Self {
        let n = n_max + 1;
        Self {
            probs: vec![1.0 / n as f64; n],
            tail_mass_bound: 0.0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Truncated joint distribution of the three queue lengths on `[0, n_max]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointQueuePmf {
    n_max: usize,
    probs: Vec<f64>,
    tail_mass_bound: f64,
}

impl JointQueuePmf {
    pub(crate) fn from_weights(n_max: usize, mut weights: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        debug_assert_eq!(weights.len(), (n_max + 1).pow(3));
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::EmptySupport);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            n_max,
            probs: weights,
            tail_mass_bound,
        })
    }

    /// Point mass at `(a, b, c)`.
    pub fn point_mass(cell: [usize; 3], n_max: usize) -> Self {
        let n = n_max.max(cell[0]).max(cell[1]).max(cell[2]);
        let side = n + 1;
        let mut probs = vec![0.0; side.pow(3)];
        probs[(cell[0] * side + cell[1]) * side + cell[2]] = 1.0;
        Self {
            n_max: n,
            probs,
            tail_mass_bound: 0.0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let side = self.n_max + 1;
        if a >= side || b >= side || c >= side {
            return 0.0;
        }
        self.probs[(a * side + b) * side + c]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal of lane `lane` (0, 1 or 2).
    pub fn marginal(&self, lane: usize) -> Vec<f64> {
        let side = self.n_max + 1;
        let mut out = vec![0.0; side];
        for (idx, &p) in self.probs.iter().enumerate() {
            let cell = [idx / (side * side), (idx / side) % side, idx % side];
            out[cell[lane]] += p;
        }
        out
    }

    pub fn means(&self) -> [f64; 3] {
        let side = self.n_max + 1;
        let mut means = [0.0; 3];
        for (idx, &p) in self.probs.iter().enumerate() {
            means[0] += (idx / (side * side)) as f64 * p;
            means[1] += ((idx / side) % side) as f64 * p;
            means[2] += (idx % side) as f64 * p;
        }
        means
    }

    /// Iterates `((a, b, c), probability)` over the cube.
    pub fn cells(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        let side = self.n_max + 1;
        self.probs
            .iter()
            .enumerate()
            .map(move |(idx, &p)| ([idx / (side * side), (idx / side) % side, idx % side], p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_policy() {
        // ceil(15 + 10 * 4) + 0 + 0 + 20
        assert_eq!(truncation_bound(15.0, 0, 0), 75);
        assert_eq!(truncation_bound(0.0, 2, 3), 10 + 2 + 3 + 20);
    }

    #[test]
    fn basic_laws() {
        assert_eq!(QueuePmf::point_mass(4, 10).mean(), 4.0);
        assert!((QueuePmf::uniform(2).mean() - 1.0).abs() < 1e-15);
        let joint = JointQueuePmf::point_mass([3, 4, 5], 6);
        assert_eq!(joint.means(), [3.0, 4.0, 5.0]);
        assert_eq!(joint.marginal(2)[5], 1.0);
    }

    #[test]
    fn empty_weights_are_rejected() {
        assert_eq!(QueuePmf::from_weights(vec![0.0; 4], 0.0), Err(Error::EmptySupport));
    }
}
