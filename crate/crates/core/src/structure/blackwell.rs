//! Blackwell dominance between sensors and the myopic policy bound it
//! implies.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Serialize, Serializer};

use super::{OrderCheckReport, Witness, Worst};
use crate::costs::instantaneous_cost;
use crate::error::{Error, Result};
use crate::schema::matrix_to_rows;
use crate::solver::{continuation, Solution};

/// Residual below which a factorization counts as dominance.
pub const DOMINANCE_RESIDUAL: f64 = 1e-6;
/// Default margin defining the strict region Π^s = {C(π,2) < C(π,1) − margin}.
pub const STRICTNESS_MARGIN: f64 = 1e-9;

fn rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_rows(m).serialize(s)
}

/// Best row-stochastic R found for B1 ≈ B2·R.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlackwellFactorization {
    /// Y2 × Y1 garbling matrix.
    #[serde(serialize_with = "rows")]
    pub r: DMatrix<f64>,
    /// Frobenius norm of B1 − B2·R.
    pub residual: f64,
    pub dominates: bool,
    pub iterations: usize,
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        acc += s;
        let t = (acc - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for e in v.iter_mut() {
        *e = (*e - theta).max(0.0);
    }
}

fn project_rows(m: &mut DMatrix<f64>) {
    let mut row = vec![0.0; m.ncols()];
    for r in 0..m.nrows() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = m[(r, c)];
        }
        project_simplex(&mut row);
        for (c, e) in row.iter().enumerate() {
            m[(r, c)] = *e;
        }
    }
}

/// Solves min ‖B2·R − B1‖_F over row-stochastic R by accelerated projected
/// gradient with adaptive restart, projecting each row of R onto the
/// simplex. Stops once the residual is at most `tol` or after `max_iters`
/// steps and returns the best iterate seen.
pub fn blackwell_factorize(
    b1: &DMatrix<f64>,
    b2: &DMatrix<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<BlackwellFactorization> {
    if b1.nrows() != b2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "sensors have {} and {} state rows",
            b1.nrows(),
            b2.nrows()
        )));
    }
    let (y2, y1) = (b2.ncols(), b1.ncols());
    let gram = b2.transpose() * b2;
    let target = b2.transpose() * b1;
    let lipschitz = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let residual_of = |r: &DMatrix<f64>| (b2 * r - b1).norm();
    let mut r = DMatrix::from_element(y2, y1, 1.0 / y1 as f64);
    let mut best = (residual_of(&r), r.clone());
    let mut z = r.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    while iterations < max_iters && best.0 > tol {
        iterations += 1;
        let grad = &gram * &z - &target;
        let mut next = &z - grad * step;
        project_rows(&mut next);
        let residual = residual_of(&next);
        if residual < best.0 {
            best = (residual, next.clone());
        }
        let moved = &next - &r;
        if (&z - &next).dot(&moved) > 0.0 {
            // Momentum points uphill: restart the acceleration.
            t = 1.0;
            z = next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + moved * ((t - 1.0) / t_next);
            t = t_next;
        }
        r = next;
    }
    let (residual, r) = best;
    Ok(BlackwellFactorization {
        r,
        residual,
        dominates: residual <= DOMINANCE_RESIDUAL,
        iterations,
    })
}

/// The three parts of the myopic-bound certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MyopicBoundReport {
    pub factorization: BlackwellFactorization,
    /// Grid points in Π^s.
    pub strict_points: usize,
    /// Σ V(T(π,y,1))σ(π,y,1) ≥ Σ V(T(π,y,2))σ(π,y,2) at every grid point.
    pub jensen: OrderCheckReport,
    /// Q(π,2) ≤ Q(π,1) + tolerance on Π^s.
    pub strict_region: OrderCheckReport,
    /// μ*(π) ≥ μ̲(π) at every grid point, ties resolved by Q-values.
    pub policy_bound: OrderCheckReport,
}

impl MyopicBoundReport {
    pub fn holds(&self) -> bool {
        self.jensen.holds && self.strict_region.holds && self.policy_bound.holds
    }

    pub fn reports(&self) -> [&OrderCheckReport; 3] {
        [&self.jensen, &self.strict_region, &self.policy_bound]
    }
}

/// Certifies the myopic lower bound on the optimal policy for a two-sensor
/// model in which sensor 2 Blackwell dominates sensor 1.
///
/// `solution` must come from solving `model`. The Jensen check uses
/// tolerance `jensen_rel_tol · max|V|`; the Q-value comparison on the strict
/// region uses the absolute `q_tol`. Requires two actions sharing one
/// transition matrix.
pub fn verify_myopic_bound(
    model: &crate::model::PomdpModel,
    solution: &Solution,
    margin: f64,
    jensen_rel_tol: f64,
    q_tol: f64,
) -> Result<MyopicBoundReport> {
    if model.num_actions() != 2 {
        return Err(Error::PreconditionFailed(format!(
            "myopic bound needs exactly 2 sensors, model has {}",
            model.num_actions()
        )));
    }
    if !model.has_common_transition() {
        return Err(Error::PreconditionFailed(
            "myopic bound needs one transition matrix shared by both sensors".into(),
        ));
    }
    if solution.grid().dim() != model.num_states() || solution.num_actions != 2 {
        return Err(Error::DimensionMismatch("solution does not belong to this model".into()));
    }
    let factorization = blackwell_factorize(model.observation(1), model.observation(2), 100_000, 1e-12)?;
    if !factorization.dominates {
        return Err(Error::PreconditionFailed(format!(
            "sensor 2 does not Blackwell dominate sensor 1 (residual {:e})",
            factorization.residual
        )));
    }

    let grid = solution.grid();
    let values = solution.value.values();
    let jensen_tol = jensen_rel_tol * solution.value.max_abs();
    let point = |i: usize| Witness::GridPoint {
        index: i + 1,
        belief: grid.point(i).to_vec(),
    };

    let mut jensen = Worst::none();
    let mut strict = Worst::none();
    let mut bound = Worst::none();
    let mut strict_points = 0;
    for i in 0..grid.len() {
        let pi = grid.point(i);
        let cont1 = continuation(model, values, grid, pi, 1);
        let cont2 = continuation(model, values, grid, pi, 2);
        jensen.offer(cont2 - cont1, i as u64, || point(i));

        let in_strict = instantaneous_cost(model, pi, 2) < instantaneous_cost(model, pi, 1) - margin;
        let gap = solution.q(i, 2) - solution.q(i, 1);
        if in_strict {
            strict_points += 1;
            strict.offer(gap, i as u64, || point(i));
        }
        let optimal = if gap <= q_tol { 2 } else { 1 };
        let myopic = if in_strict { 2 } else { 1 };
        bound.offer(if optimal < myopic { 1.0 } else { 0.0 }, i as u64, || point(i));
    }
    let n = grid.len();
    Ok(MyopicBoundReport {
        factorization,
        strict_points,
        jensen: OrderCheckReport::new("myopic_jensen", jensen.into_option(), jensen_tol, n),
        strict_region: OrderCheckReport::new("myopic_strict_region", strict.into_option(), q_tol, strict_points),
        policy_bound: OrderCheckReport::new("myopic_policy_bound", bound.into_option(), 0.0, n),
    })
}
