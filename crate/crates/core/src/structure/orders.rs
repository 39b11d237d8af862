//! Stochastic orders on beliefs and total positivity of matrices.

use nalgebra::DMatrix;
use rand::RngExt;

use super::{OrderCheckReport, Witness, Worst};
use crate::costs::instantaneous_cost;
use crate::error::{Error, Result};
use crate::model::PomdpModel;
use crate::rng::{rng_for, sample_simplex};

/// Slack allowed in order comparisons and TP2 minors.
pub const ORDER_TOL: f64 = 1e-12;

const FOSD_STREAM: u64 = 0xF05D;

/// Checks that every 2×2 minor a_ik a_jl − a_il a_jk (i < j, k < l) is
/// nonnegative within [`ORDER_TOL`]. The witness is the most negative minor.
pub fn is_tp2(matrix: &DMatrix<f64>) -> OrderCheckReport {
    let (r, c) = matrix.shape();
    let mut worst = Worst::none();
    let mut samples = 0;
    for i in 0..r {
        for j in i + 1..r {
            for k in 0..c {
                for l in k + 1..c {
                    let minor = matrix[(i, k)] * matrix[(j, l)] - matrix[(i, l)] * matrix[(j, k)];
                    worst.offer(-minor, samples as u64, || Witness::Minor {
                        rows: (i + 1, j + 1),
                        cols: (k + 1, l + 1),
                        value: minor,
                    });
                    samples += 1;
                }
            }
        }
    }
    OrderCheckReport::new("tp2", worst.into_option(), ORDER_TOL, samples)
}

/// Monotone likelihood ratio dominance π₁ ≥_r π₂:
/// π₁(i)π₂(j) ≤ π₂(i)π₁(j) for all i < j, within [`ORDER_TOL`].
pub fn mlr_geq(first: &[f64], second: &[f64]) -> bool {
    debug_assert_eq!(first.len(), second.len());
    let x = first.len();
    for i in 0..x {
        for j in i + 1..x {
            if first[i] * second[j] > second[i] * first[j] + ORDER_TOL {
                return false;
            }
        }
    }
    true
}

/// First-order dominance: every upper tail of `first` is at least that of
/// `second`, within [`ORDER_TOL`].
pub fn fosd_geq(first: &[f64], second: &[f64]) -> bool {
    debug_assert_eq!(first.len(), second.len());
    let (mut a, mut b) = (0.0, 0.0);
    for i in (0..first.len()).rev() {
        a += first[i];
        b += second[i];
        if a < b - ORDER_TOL {
            return false;
        }
    }
    true
}

/// Samples first-order comparable pairs and checks that C(·,u) does not
/// increase when probability mass moves to higher states.
///
/// Each pair starts from a uniform belief π and moves a random fraction of
/// the mass of state i to a state j > i; the result dominates π.
pub fn fosd_decreasing_cost(
    model: &PomdpModel,
    u: usize,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> Result<OrderCheckReport> {
    if u == 0 || u > model.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: u,
            max: model.num_actions(),
        });
    }
    let x = model.num_states();
    let mut rng = rng_for(seed, FOSD_STREAM, u as u64);
    let mut worst = Worst::none();
    for s in 0..samples {
        let low = sample_simplex(&mut rng, x);
        let i = rng.random_range(0..x - 1);
        let j = rng.random_range(i + 1..x);
        let fraction: f64 = rng.random();
        let mut high = low.clone();
        let moved = fraction * low[i];
        high[i] -= moved;
        high[j] += moved;
        let defect = instantaneous_cost(model, &high, u) - instantaneous_cost(model, &low, u);
        worst.offer(defect, s as u64, || Witness::Beliefs {
            first: high.clone(),
            second: low.clone(),
        });
    }
    Ok(OrderCheckReport::new(
        format!("fosd_decreasing_cost[u={u}]"),
        worst.into_option(),
        tolerance,
        samples,
    ))
}

/// Searches column permutations of `b` for one that makes it TP2.
///
/// Returns the permutation as 1-indexed original column labels in their new
/// order, or `None` if no relabeling works. Exhaustive, so limited to 8
/// columns.
pub fn tp2_observation_permutation(b: &DMatrix<f64>) -> Result<Option<Vec<usize>>> {
    let y = b.ncols();
    if y > 8 {
        return Err(Error::InvalidParameter {
            field: "observations".into(),
            reason: format!("permutation search supports at most 8 columns, got {y}"),
        });
    }
    let mut perm: Vec<usize> = (0..y).collect();
    let mut counters = vec![0usize; y];
    let try_perm = |perm: &[usize]| {
        let permuted = DMatrix::from_fn(b.nrows(), y, |r, c| b[(r, perm[c])]);
        is_tp2(&permuted).holds
    };
    if try_perm(&perm) {
        return Ok(Some(perm.iter().map(|c| c + 1).collect()));
    }
    // Heap's algorithm.
    let mut i = 1;
    while i < y {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            if try_perm(&perm) {
                return Ok(Some(perm.iter().map(|c| c + 1).collect()));
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(None)
}
