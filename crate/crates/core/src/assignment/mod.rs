//! Lane-assignment matrix `W`.
//!
//! `w[i][j]` is the probability that an arriving vehicle uses incoming lane
//! `i` and leaves on outgoing road `j`. Column sums are the turn ratios,
//! row sums are the lane shares. `W` is chosen to balance the lane shares
//! as evenly as the junction topology allows:
//!
//! ```text
//!     minimize    |L w - v|^2 + eps |w|^2        v = (1/n, .., 1/n)
//!     subject to  sum_i w_ij = rho_j             for every road j
//!                 w_ij = 0                       on forbidden (lane, road) pairs
//!                 0 <= w_ij <= 1
//! ```
//!
//! where `L w` are the row sums. The balancing term alone is only
//! positive semi-definite (any split inside a row with the same row sum
//! ties), so a tiny ridge term `eps = 1e-10` makes the minimizer unique:
//! among the balancing optima the minimum-norm one is returned.

mod qp;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Ridge weight that selects the minimum-norm optimum.
pub const RIDGE: f64 = 1e-10;
/// Tolerance on `sum_j rho_j = 1`.
pub const RATIO_SUM_TOL: f64 = 1e-9;

/// Which (incoming lane, outgoing road) pairs are connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTopology {
    n_lanes: usize,
    n_roads: usize,
    forbidden: BTreeSet<(usize, usize)>,
}

impl JunctionTopology {
    /// `forbidden` lists zero-based `(lane, road)` pairs that are not connected.
    pub fn new(
        n_lanes: usize,
        n_roads: usize,
        forbidden: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if n_lanes == 0 || n_roads == 0 {
            return Err(Error::InvalidTopology(format!(
                "need at least one lane and one road, got {n_lanes} lanes and {n_roads} roads"
            )));
        }
        let forbidden: BTreeSet<_> = forbidden.into_iter().collect();
        if let Some(&(i, j)) = forbidden.iter().find(|&&(i, j)| i >= n_lanes || j >= n_roads) {
            return Err(Error::InvalidTopology(format!(
                "forbidden pair (lane {i}, road {j}) out of bounds for {n_lanes} lanes and {n_roads} roads"
            )));
        }
        Ok(Self {
            n_lanes,
            n_roads,
            forbidden,
        })
    }

    /// Three outgoing roads (left, straight, right): left turns only from the
    /// leftmost lane, right turns only from the rightmost lane, straight from
    /// any lane.
    pub fn turning_lanes(n_lanes: usize) -> Result<Self> {
        if n_lanes < 2 {
            return Err(Error::InvalidTopology(format!(
                "turning-lane layout needs two or more lanes, got {n_lanes}"
            )));
        }
        let last = n_lanes - 1;
        let forbidden = (1..n_lanes)
            .map(|i| (i, 0))
            .chain((0..last).map(|i| (i, 2)));
        Self::new(n_lanes, 3, forbidden)
    }

    pub fn n_lanes(&self) -> usize {
        self.n_lanes
    }

    pub fn n_roads(&self) -> usize {
        self.n_roads
    }

    pub fn forbidden(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forbidden.iter().copied()
    }

    pub fn is_permitted(&self, lane: usize, road: usize) -> bool {
        lane < self.n_lanes && road < self.n_roads && !self.forbidden.contains(&(lane, road))
    }

    pub fn permitted_lanes(&self, road: usize) -> Vec<usize> {
        (0..self.n_lanes).filter(|&i| self.is_permitted(i, road)).collect()
    }

    /// The lane a naive observer attributes road `road` to: the (lower)
    /// median of its permitted lanes. For the turning-lane layout this is
    /// left -> leftmost, straight -> middle, right -> rightmost.
    pub fn nominal_lane(&self, road: usize) -> Option<usize> {
        let lanes = self.permitted_lanes(road);
        if lanes.is_empty() {
            None
        } else {
            Some(lanes[(lanes.len() - 1) / 2])
        }
    }

    /// Same topology with lanes `a` and `b` exchanged.
    pub fn swap_lanes(&self, a: usize, b: usize) -> Self {
        let swap = |i: usize| if i == a { b } else if i == b { a } else { i };
        Self {
            n_lanes: self.n_lanes,
            n_roads: self.n_roads,
            forbidden: self.forbidden.iter().map(|&(i, j)| (swap(i), j)).collect(),
        }
    }
}

/// Turn ratios `rho_j`, one per outgoing road, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRatios(Vec<f64>);

impl TurnRatios {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidRatios("no outgoing roads".into()));
        }
        if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidRatios(format!("ratio {r} outside [0, 1]")));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > RATIO_SUM_TOL {
            return Err(Error::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(Self(rho))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row-major `n_lanes x n_roads` matrix of joint (lane, road) probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    n_lanes: usize,
    n_roads: usize,
    w: Vec<f64>,
}

impl AssignmentMatrix {
    /// Wraps raw entries. Only shape and non-negativity are checked; use
    /// [`solve_assignment`] to obtain a balanced matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_lanes = rows.len();
        let n_roads = rows.first().map_or(0, Vec::len);
        if n_lanes == 0 || n_roads == 0 || rows.iter().any(|r| r.len() != n_roads) {
            return Err(Error::InvalidTopology("assignment matrix must be rectangular and non-empty".into()));
        }
        let w: Vec<f64> = rows.iter().flatten().copied().collect();
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidRatios("assignment entries must lie in [0, 1]".into()));
        }
        Ok(Self { n_lanes, n_roads, w })
    }

    pub fn n_lanes(&self) -> usize {
        self.n_lanes
    }

    pub fn n_roads(&self) -> usize {
        self.n_roads
    }

    pub fn get(&self, lane: usize, road: usize) -> f64 {
        self.w[lane * self.n_roads + road]
    }

    pub fn row(&self, lane: usize) -> &[f64] {
        &self.w[lane * self.n_roads..(lane + 1) * self.n_roads]
    }

    pub fn entries(&self) -> &[f64] {
        &self.w
    }

    /// Lane shares `w_i = sum_j w_ij`.
    pub fn lane_weights(&self) -> Vec<f64> {
        (0..self.n_lanes).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Turn ratios `rho_j = sum_i w_ij`.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_roads)
            .map(|j| (0..self.n_lanes).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// `P(lane = i | road = j) = w_ij / rho_j`.
    pub fn lane_given_road(&self, lane: usize, road: usize) -> Result<f64> {
        let rho: f64 = (0..self.n_lanes).map(|i| self.get(i, road)).sum();
        if rho <= 0.0 {
            return Err(Error::ZeroColumn { road });
        }
        Ok(self.get(lane, road) / rho)
    }

    /// Balancing objective `sum_i (w_i - 1/n)^2`.
    pub fn balance_objective(&self) -> f64 {
        let target = 1.0 / self.n_lanes as f64;
        self.lane_weights().iter().map(|w| (w - target).powi(2)).sum()
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Balanced assignment matrix for `topology` and turn ratios `rho`.
pub fn solve_assignment(topology: &JunctionTopology, rho: &TurnRatios) -> Result<AssignmentMatrix> {
    solve_assignment_with_report(topology, rho).map(|(w, _)| w)
}

pub fn solve_assignment_with_report(
    topology: &JunctionTopology,
    rho: &TurnRatios,
) -> Result<(AssignmentMatrix, SolveReport)> {
    let n_lanes = topology.n_lanes();
    let n_roads = topology.n_roads();
    let rho = rho.as_slice();
    if rho.len() != n_roads {
        return Err(Error::InvalidRatios(format!(
            "{} ratios for {n_roads} outgoing roads",
            rho.len()
        )));
    }

    // Columns with rho_j = 0 are identically zero; forbidden pairs are fixed
    // at zero. Only the remaining entries are decision variables.
    let mut vars: Vec<(usize, usize)> = Vec::new();
    let mut roads: Vec<usize> = Vec::new();
    for (j, &r) in rho.iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        let lanes = topology.permitted_lanes(j);
        if lanes.is_empty() {
            return Err(Error::InfeasibleTopology { road: j });
        }
        roads.push(j);
        vars.extend(lanes.into_iter().map(|i| (i, j)));
    }
    // Row-major variable order so ties resolve lane by lane.
    vars.sort_unstable();

    let nv = vars.len();
    let target = 1.0 / n_lanes as f64;
    let mut hessian = DMatrix::<f64>::zeros(nv, nv);
    let mut linear = DVector::<f64>::zeros(nv);
    for (a, &(i, _)) in vars.iter().enumerate() {
        for (b, &(k, _)) in vars.iter().enumerate() {
            if i == k {
                hessian[(a, b)] = 2.0;
            }
        }
        hessian[(a, a)] += 2.0 * RIDGE;
        linear[a] = -2.0 * target;
    }
    let mut eq = DMatrix::<f64>::zeros(roads.len(), nv);
    let mut rhs = DVector::<f64>::zeros(roads.len());
    let mut start = DVector::<f64>::zeros(nv);
    for (r, &j) in roads.iter().enumerate() {
        let members: Vec<usize> = (0..nv).filter(|&a| vars[a].1 == j).collect();
        for &a in &members {
            eq[(r, a)] = 1.0;
            start[a] = rho[j] / members.len() as f64;
        }
        rhs[r] = rho[j];
    }

    let solution = qp::BoxEqQp {
        hessian: &hessian,
        linear: &linear,
        eq: &eq,
        rhs: &rhs,
        lower: 0.0,
        upper: 1.0,
    }
    .solve(start)?;

    let mut w = vec![0.0; n_lanes * n_roads];
    for (a, &(i, j)) in vars.iter().enumerate() {
        w[i * n_roads + j] = solution.x[a].clamp(0.0, 1.0);
    }
    Ok((
        AssignmentMatrix { n_lanes, n_roads, w },
        SolveReport {
            iterations: solution.iterations,
            kkt_residual: solution.kkt_residual,
        },
    ))
}

/// Lane shares `w_i` of `W`.
pub fn lane_weights(w: &AssignmentMatrix) -> Vec<f64> {
    w.lane_weights()
}

/// Per-lane arrival rates `lambda_i = lambda * w_i`.
pub fn lane_arrival_rates(w: &AssignmentMatrix, lambda: f64) -> Result<Vec<f64>> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::NegativeRate(lambda));
    }
    Ok(w.lane_weights().into_iter().map(|wi| lambda * wi).collect())
}
