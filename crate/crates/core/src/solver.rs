//! Value iteration on the belief grid.
//!
//! Three Bellman operators are supported:
//! - discounted: Q(π,u) = C(π,u) + ρ Σ_y V(T(π,y,u)) σ(π,y,u);
//! - stopping time: Q(π,1) = c_1'π, Q(π,2) = C(π,2) + ρ Σ_y V(T(π,y,2)) σ(π,y,2);
//! - relaxed (linear costs): Q(α,u) = c_u'α + ρ Σ_y W(B_y(u) P'(u) α) on the
//!   positive orthant, with W extended from the simplex by W(α) = ‖α‖₁ V(α/‖α‖₁).
//!
//! Every operator starts from V ≡ 0 and evaluates V off the grid by
//! barycentric interpolation. Observations with σ = 0 contribute nothing.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::costs::instantaneous_cost;
use crate::error::{Error, Result};
use crate::filter::{correct_into, predict_into, UNDERFLOW_THRESHOLD};
use crate::grid::{SimplexGrid, MAX_DIM};
use crate::model::{ModelKind, PomdpModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop when the sup-norm change between iterates falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters }
    }
}

/// Grid values with barycentric interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    grid: Arc<SimplexGrid>,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(grid: Arc<SimplexGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SimplexGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, pi: &[f64]) -> f64 {
        self.grid.interpolate(&self.values, pi)
    }

    /// Positively homogeneous extension ‖α‖₁ V(α/‖α‖₁); 0 at α = 0.
    pub fn evaluate_relaxed(&self, alpha: &[f64]) -> f64 {
        let mass: f64 = alpha.iter().sum();
        if mass <= 0.0 {
            return 0.0;
        }
        let mut pi = [0.0; MAX_DIM];
        for (p, a) in pi.iter_mut().zip(alpha) {
            *p = a / mass;
        }
        mass * self.evaluate(&pi[..alpha.len()])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Action (1-indexed) per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    grid: Arc<SimplexGrid>,
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(grid: Arc<SimplexGrid>, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} actions for {} grid points",
                actions.len(),
                grid.len()
            )));
        }
        if actions.contains(&0) {
            return Err(Error::InvalidParameter {
                field: "actions".into(),
                reason: "actions are 1-indexed".into(),
            });
        }
        Ok(Self { grid, actions })
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Action at the grid vertex nearest to `pi` within its cell.
    pub fn action_for(&self, pi: &[f64]) -> usize {
        self.actions[self.grid.locate(pi).nearest()]
    }

    /// Threshold π* when this is a single-switch X = 2 stopping policy.
    pub fn threshold(&self) -> Option<f64> {
        match extract_threshold(self) {
            Ok(Threshold::At(t)) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    /// Sup-norm change of each iterate.
    pub changes: Vec<f64>,
    pub converged: bool,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.changes.len()
    }

    pub fn final_change(&self) -> f64 {
        self.changes.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Converged (or flagged) value iteration output.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueFunction,
    pub policy: Policy,
    /// Q-values of the final backup, `num_actions` per grid point.
    pub q_values: Vec<f64>,
    pub num_actions: usize,
    pub log: IterationLog,
}

impl Solution {
    /// Q(π_i, u) from the final backup; `u` 1-indexed.
    pub fn q(&self, point: usize, u: usize) -> f64 {
        self.q_values[point * self.num_actions + u - 1]
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        self.value.grid()
    }

    /// Errors with [`Error::NonConvergence`] if the tolerance was not reached.
    pub fn ensure_converged(&self) -> Result<()> {
        if self.log.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.log.iterations(),
                change: self.log.final_change(),
            })
        }
    }
}

/// Q-values at one belief with min and argmin (smallest index on ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Backup {
    pub q: Vec<f64>,
    pub value: f64,
    pub action: usize,
}

fn argmin(q: &[f64]) -> (f64, usize) {
    let mut best = (q[0], 1);
    for (u, &v) in q.iter().enumerate().skip(1) {
        if v < best.0 {
            best = (v, u + 1);
        }
    }
    best
}

/// Σ_y V(T(π,y,u)) σ(π,y,u) with V interpolated on the grid.
pub fn continuation(model: &PomdpModel, values: &[f64], grid: &SimplexGrid, pi: &[f64], u: usize) -> f64 {
    let x = pi.len();
    let mut predicted = [0.0; MAX_DIM];
    let mut post = [0.0; MAX_DIM];
    predict_into(model.transition(u), pi, &mut predicted[..x]);
    let b = model.observation(u);
    let mut total = 0.0;
    for y in 0..b.ncols() {
        let sigma = correct_into(b, &predicted[..x], y, &mut post[..x]);
        if sigma <= UNDERFLOW_THRESHOLD {
            continue;
        }
        post[..x].iter_mut().for_each(|p| *p /= sigma);
        total += sigma * grid.interpolate(values, &post[..x]);
    }
    total
}

/// Σ_y W(B_y(u) P'(u) α) with W the homogeneous extension of the grid values.
pub fn relaxed_continuation(model: &PomdpModel, values: &[f64], grid: &SimplexGrid, alpha: &[f64], u: usize) -> f64 {
    let x = alpha.len();
    let mut predicted = [0.0; MAX_DIM];
    let mut next = [0.0; MAX_DIM];
    predict_into(model.transition(u), alpha, &mut predicted[..x]);
    let b = model.observation(u);
    let mut total = 0.0;
    for y in 0..b.ncols() {
        let mass = correct_into(b, &predicted[..x], y, &mut next[..x]);
        if mass <= 0.0 {
            continue;
        }
        next[..x].iter_mut().for_each(|p| *p /= mass);
        total += mass * grid.interpolate(values, &next[..x]);
    }
    total
}

fn has_continuation(model: &PomdpModel, u: usize) -> bool {
    !(model.kind() == ModelKind::StoppingTime && u == 1)
}

fn fill_q(model: &PomdpModel, values: &[f64], grid: &SimplexGrid, pi: &[f64], out: &mut [f64]) {
    let rho = model.discount();
    for (idx, q) in out.iter_mut().enumerate() {
        let u = idx + 1;
        let mut v = instantaneous_cost(model, pi, u);
        if rho != 0.0 && has_continuation(model, u) {
            v += rho * continuation(model, values, grid, pi, u);
        }
        *q = v;
    }
}

fn fill_relaxed_q(model: &PomdpModel, values: &[f64], grid: &SimplexGrid, alpha: &[f64], out: &mut [f64]) {
    let rho = model.discount();
    for (idx, q) in out.iter_mut().enumerate() {
        let u = idx + 1;
        let mut v: f64 = model.cost(u).iter().zip(alpha).map(|(c, a)| c * a).sum();
        if rho != 0.0 && has_continuation(model, u) {
            v += rho * relaxed_continuation(model, values, grid, alpha, u);
        }
        *q = v;
    }
}

/// One Bellman backup at `pi` against the value function `value`.
pub fn bellman_backup(model: &PomdpModel, value: &ValueFunction, pi: &[f64]) -> Backup {
    let mut q = vec![0.0; model.num_actions()];
    fill_q(model, value.values(), value.grid(), pi, &mut q);
    let (value, action) = argmin(&q);
    Backup { q, value, action }
}

/// Relaxed backup at an unnormalized `alpha` against the homogeneous
/// extension of `value`.
pub fn relaxed_backup(model: &PomdpModel, value: &ValueFunction, alpha: &[f64]) -> Backup {
    let mut q = vec![0.0; model.num_actions()];
    fill_relaxed_q(model, value.values(), value.grid(), alpha, &mut q);
    let (value, action) = argmin(&q);
    Backup { q, value, action }
}

type QFill = fn(&PomdpModel, &[f64], &SimplexGrid, &[f64], &mut [f64]);

fn iterate(model: &PomdpModel, grid: Arc<SimplexGrid>, config: SolverConfig, fill: QFill) -> Result<Solution> {
    if grid.dim() != model.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "grid dimension {} for a model with {} states",
            grid.dim(),
            model.num_states()
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidParameter {
            field: "max_iters".into(),
            reason: "must be at least 1".into(),
        });
    }
    let n = grid.len();
    let num_actions = model.num_actions();
    let mut values = vec![0.0; n];
    let mut q_values = vec![0.0; n * num_actions];
    let mut changes = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iters {
        {
            let g: &SimplexGrid = &grid;
            let current = &values;
            q_values
                .par_chunks_mut(num_actions)
                .enumerate()
                .for_each(|(i, q)| fill(model, current, g, g.point(i), q));
        }
        let next: Vec<f64> = q_values
            .par_chunks(num_actions)
            .map(|q| argmin(q).0)
            .collect();
        let change = next
            .iter()
            .zip(&values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        values = next;
        changes.push(change);
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let actions = q_values.chunks(num_actions).map(|q| argmin(q).1).collect();
    Ok(Solution {
        value: ValueFunction::new(grid.clone(), values)?,
        policy: Policy::new(grid, actions)?,
        q_values,
        num_actions,
        log: IterationLog { changes, converged },
    })
}

/// Value iteration for the discounted Bellman equation (requires ρ < 1).
///
/// A run that hits `max_iters` is returned with `log.converged = false`.
pub fn solve_discounted(model: &PomdpModel, grid: Arc<SimplexGrid>, config: SolverConfig) -> Result<Solution> {
    if !(model.discount() < 1.0) {
        return Err(Error::PreconditionFailed(format!(
            "discounted solver needs discount < 1, model has {}",
            model.discount()
        )));
    }
    iterate(model, grid, config, fill_q)
}

/// Value iteration for a stopping-time model (ρ ≤ 1).
///
/// With ρ = 1 and nonnegative costs the iterates increase monotonically from
/// V ≡ 0 and are bounded by the stopping cost c_1'π.
pub fn solve_stopping(model: &PomdpModel, grid: Arc<SimplexGrid>, config: SolverConfig) -> Result<Solution> {
    if model.kind() != ModelKind::StoppingTime {
        return Err(Error::PreconditionFailed(
            "stopping solver needs a stopping_time model".into(),
        ));
    }
    if !(model.discount() <= 1.0) {
        return Err(Error::PreconditionFailed(format!(
            "discount {} exceeds 1",
            model.discount()
        )));
    }
    iterate(model, grid, config, fill_q)
}

/// Relaxed value function W on the positive orthant.
#[derive(Debug, Clone)]
pub struct RelaxedValueFunction {
    pub solution: Solution,
}

impl RelaxedValueFunction {
    /// W(α) through the homogeneous extension of the grid values.
    pub fn evaluate(&self, alpha: &[f64]) -> f64 {
        self.solution.value.evaluate_relaxed(alpha)
    }

    pub fn value(&self) -> &ValueFunction {
        &self.solution.value
    }
}

/// Value iteration with the relaxed backup, for linear-cost models.
pub fn solve_relaxed(model: &PomdpModel, grid: Arc<SimplexGrid>, config: SolverConfig) -> Result<RelaxedValueFunction> {
    if !model.nonlinear_cost().is_linear() {
        return Err(Error::NonlinearCostUnsupported(
            model.nonlinear_cost().name().to_string(),
        ));
    }
    if !(model.discount() < 1.0) && model.kind() != ModelKind::StoppingTime {
        return Err(Error::PreconditionFailed(
            "relaxed solver needs discount < 1".into(),
        ));
    }
    Ok(RelaxedValueFunction {
        solution: iterate(model, grid, config, fill_relaxed_q)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Stop when π(2) < π*, continue when π(2) ≥ π*.
    At(f64),
    NotThreshold { switches: usize },
}

/// Reads a threshold off an X = 2 policy ordered by π(2).
///
/// A threshold exists only when the actions switch exactly once, from 1 to
/// 2; π* is then the midpoint between the last stop point and the first
/// continue point.
pub fn extract_threshold(policy: &Policy) -> Result<Threshold> {
    if policy.grid().dim() != 2 {
        return Err(Error::PreconditionFailed(format!(
            "threshold extraction needs X = 2, policy has X = {}",
            policy.grid().dim()
        )));
    }
    let a = policy.actions();
    let switches = a.windows(2).filter(|w| w[0] != w[1]).count();
    if switches != 1 {
        return Ok(Threshold::NotThreshold { switches });
    }
    let last_stop = a.windows(2).position(|w| w[0] != w[1]).unwrap();
    if a[last_stop] != 1 || a[last_stop + 1] != 2 {
        return Ok(Threshold::NotThreshold { switches });
    }
    let m = policy.grid().resolution() as f64;
    Ok(Threshold::At((last_stop as f64 + 0.5) / m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::NonlinearCost;
    use crate::grid::build_grid;
    use nalgebra::{dmatrix, DVector};

    fn linear_model(rho: f64) -> PomdpModel {
        PomdpModel::new(
            ModelKind::GeneralDiscounted,
            rho,
            vec![dmatrix![0.9, 0.1; 0.2, 0.8], dmatrix![0.7, 0.3; 0.4, 0.6]],
            vec![dmatrix![0.8, 0.2; 0.3, 0.7], dmatrix![0.6, 0.4; 0.1, 0.9]],
            vec![DVector::from_vec(vec![1.0, 3.0]), DVector::from_vec(vec![2.0, 1.5])],
            NonlinearCost::None,
        )
        .unwrap()
    }

    fn grid(x: usize, m: usize) -> Arc<SimplexGrid> {
        Arc::new(build_grid(x, m).unwrap())
    }

    #[test]
    fn myopic_backup_is_the_cost() {
        let model = linear_model(0.0);
        let g = grid(2, 10);
        let v = ValueFunction::new(g.clone(), (0..11).map(|i| i as f64).collect()).unwrap();
        let b = bellman_backup(&model, &v, &[0.3, 0.7]);
        assert!((b.q[0] - 2.4).abs() < 1e-15 && (b.q[1] - 1.65).abs() < 1e-15);
        let model = linear_model(0.9);
        let b = bellman_backup(&model, &ValueFunction::zeros(g), &[0.3, 0.7]);
        assert!((b.q[0] - 2.4).abs() < 1e-15 && (b.q[1] - 1.65).abs() < 1e-15);
        assert_eq!(b.action, 2);
    }

    #[test]
    fn backup_matches_hand_expansion() {
        // V linear on the grid: V(π) = 5π(1) + 2π(2), so interpolation is exact.
        let model = linear_model(0.9);
        let g = grid(2, 8);
        let v = ValueFunction::new(g.clone(), g.points().map(|p| 5.0 * p[0] + 2.0 * p[1]).collect()).unwrap();
        let pi = [0.5, 0.5];
        let b = bellman_backup(&model, &v, &pi);
        for u in 1..=2 {
            let p = model.transition(u);
            let bm = model.observation(u);
            let pred = [
                p[(0, 0)] * pi[0] + p[(1, 0)] * pi[1],
                p[(0, 1)] * pi[0] + p[(1, 1)] * pi[1],
            ];
            let mut expect = model.cost(u).dot(&DVector::from_vec(pi.to_vec()));
            for y in 0..2 {
                let un = [bm[(0, y)] * pred[0], bm[(1, y)] * pred[1]];
                let s = un[0] + un[1];
                let post = [un[0] / s, un[1] / s];
                expect += 0.9 * s * (5.0 * post[0] + 2.0 * post[1]);
            }
            assert!((b.q[u - 1] - expect).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn ties_go_to_smallest_action() {
        assert_eq!(argmin(&[1.0, 1.0, 0.5, 0.5]), (0.5, 3));
        assert_eq!(argmin(&[2.0, 2.0]), (2.0, 1));
    }

    #[test]
    fn zero_discount_converges_in_one_step() {
        let model = linear_model(0.0);
        let g = grid(2, 20);
        let s = solve_discounted(&model, g.clone(), SolverConfig::default()).unwrap();
        // second iterate repeats the first
        assert!(s.log.iterations() <= 2);
        assert_eq!(s.log.changes.last(), Some(&0.0));
        for (i, p) in g.points().enumerate() {
            let c1 = 1.0 * p[0] + 3.0 * p[1];
            let c2 = 2.0 * p[0] + 1.5 * p[1];
            assert_eq!(s.value.values()[i], c1.min(c2));
        }
    }

    #[test]
    fn absorbing_observed_state_closed_form() {
        // State 1 absorbing and revealed by observation 1, so e_1 stays put:
        // V(e_1) = min_u c(1,u) / (1 − ρ).
        let rho = 0.9;
        let model = PomdpModel::new(
            ModelKind::GeneralDiscounted,
            rho,
            vec![dmatrix![1.0, 0.0; 0.1, 0.9]; 2],
            vec![dmatrix![1.0, 0.0; 0.3, 0.7], dmatrix![1.0, 0.0; 0.5, 0.5]],
            vec![DVector::from_vec(vec![0.7, 0.0]), DVector::from_vec(vec![0.4, 0.2])],
            NonlinearCost::None,
        )
        .unwrap();
        let s = solve_discounted(&model, grid(2, 50), SolverConfig::new(1e-11, 100_000)).unwrap();
        s.ensure_converged().unwrap();
        let expect = 0.4 / (1.0 - rho);
        assert!((s.value.values()[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn changes_contract_by_discount() {
        let model = linear_model(0.8).with_nonlinear_cost(NonlinearCost::Entropy {
            alpha: vec![1.0, 0.4],
            beta: vec![0.0, 0.0],
        });
        let s = solve_discounted(&model, grid(3, 12), SolverConfig::new(1e-12, 10_000));
        // shapes mismatch: the model has two states
        assert!(s.is_err());
        let s = solve_discounted(&model, grid(2, 64), SolverConfig::new(1e-12, 10_000)).unwrap();
        let slack = 10.0 * f64::EPSILON * s.value.max_abs();
        for w in s.log.changes.windows(2) {
            assert!(w[1] <= 0.8 * w[0] + slack, "{w:?}");
        }
    }

    #[test]
    fn nonconvergence_is_flagged() {
        let s = solve_discounted(&linear_model(0.95), grid(2, 10), SolverConfig::new(1e-12, 3)).unwrap();
        assert!(!s.log.converged);
        assert_eq!(s.log.iterations(), 3);
        assert!(matches!(s.ensure_converged(), Err(Error::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn grid_points_evaluate_exactly() {
        let g = grid(3, 9);
        let vals: Vec<f64> = (0..g.len()).map(|i| (i as f64).sqrt()).collect();
        let v = ValueFunction::new(g.clone(), vals.clone()).unwrap();
        for i in 0..g.len() {
            assert_eq!(v.evaluate(g.point(i)), vals[i]);
        }
    }

    #[test]
    fn relaxed_rejects_nonlinear_costs() {
        let model = linear_model(0.5).with_nonlinear_cost(NonlinearCost::L1 {
            alpha: vec![1.0, 1.0],
            beta: vec![0.0, 0.0],
        });
        assert!(matches!(
            solve_relaxed(&model, grid(2, 10), SolverConfig::default()),
            Err(Error::NonlinearCostUnsupported(_))
        ));
    }

    #[test]
    fn relaxed_matches_discounted_on_simplex() {
        let model = linear_model(0.9);
        let g = grid(2, 100);
        let v = solve_discounted(&model, g.clone(), SolverConfig::new(1e-10, 10_000)).unwrap();
        let w = solve_relaxed(&model, g.clone(), SolverConfig::new(1e-10, 10_000)).unwrap();
        for i in 0..g.len() {
            assert!((v.value.values()[i] - w.value().values()[i]).abs() < 1e-9);
        }
        // small-scale limit W(εα)/ε is independent of ε
        let alpha = [0.4, 1.3];
        let base = w.evaluate(&alpha);
        for eps in [1e-3, 1e-6, 1e-9] {
            let scaled: Vec<f64> = alpha.iter().map(|a| a * eps).collect();
            assert!((w.evaluate(&scaled) / eps - base).abs() < 1e-9 * base.abs().max(1.0));
        }
    }

    #[test]
    fn threshold_extraction() {
        let g = grid(2, 4);
        let p = Policy::new(g.clone(), vec![1, 1, 2, 2, 2]).unwrap();
        assert_eq!(extract_threshold(&p).unwrap(), Threshold::At(0.375));
        let g3 = grid(2, 3);
        let p = Policy::new(g3, vec![1, 2, 1, 2]).unwrap();
        assert_eq!(extract_threshold(&p).unwrap(), Threshold::NotThreshold { switches: 3 });
        let p = Policy::new(g.clone(), vec![2, 2, 1, 1, 1]).unwrap();
        assert_eq!(extract_threshold(&p).unwrap(), Threshold::NotThreshold { switches: 1 });
        let p = Policy::new(g.clone(), vec![1; 5]).unwrap();
        assert_eq!(extract_threshold(&p).unwrap(), Threshold::NotThreshold { switches: 0 });
        let p = Policy::new(grid(3, 2), vec![1; 6]).unwrap();
        assert!(extract_threshold(&p).is_err());
        assert!(Policy::new(g, vec![0; 5]).is_err());
    }
}
