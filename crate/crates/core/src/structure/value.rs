//! Verifiers that sweep pairs of grid points of a solved value function or
//! policy: concavity, convex stopping sets, MLR monotonicity, plus the
//! homogeneity check on the relaxed value function and the conjecture probe.

use std::sync::Arc;

use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;

use super::orders::{fosd_decreasing_cost, is_tp2, mlr_geq};
use super::{OrderCheckReport, Witness, Worst};
use crate::error::{Error, Result};
use crate::grid::{build_grid, SimplexGrid, MAX_DIM};
use crate::model::{ModelKind, PomdpModel};
use crate::rng::{rng_for, sample_simplex, sample_stochastic};
use crate::schema::model_to_string;
use crate::solver::{
    relaxed_backup, solve_discounted, solve_stopping, Policy, RelaxedValueFunction, SolverConfig,
    ValueFunction,
};

/// Pair sweeps enumerate every pair up to this many and sample beyond it.
pub const MAX_PAIRS: usize = 1_000_000;

const SAMPLE_CHUNK: usize = 8192;
const CONCAVITY_STREAM: u64 = 0xC0_4C;
const STOPPING_STREAM: u64 = 0x5709;
const MLR_STREAM: u64 = 0x4D4C;
const HOMOGENEITY_STREAM: u64 = 0x4803;
const CONJECTURE_STREAM: u64 = 0xC0_9E;

type PairWorst = Worst<(usize, usize)>;

/// Outcome of a pair check: defect and the pair in the orientation it was
/// tested.
type PairDefect = Option<(f64, usize, usize)>;

/// Checks pairs (a, b) of grid indices drawn from within each group.
///
/// When the groups hold at most `cap` unordered pairs in total, every pair
/// is checked; otherwise `cap` pairs are drawn uniformly with a seeded
/// generator per chunk. The result does not depend on the thread count.
fn sweep_pairs<F>(groups: &[Vec<usize>], cap: usize, seed: u64, stream: u64, check: F) -> (PairWorst, usize)
where
    F: Fn(usize, usize) -> PairDefect + Sync,
{
    let pair_count = |s: usize| (s as u128) * (s.saturating_sub(1) as u128) / 2;
    let total: u128 = groups.iter().map(|g| pair_count(g.len())).sum();
    let key = |a: usize, b: usize| ((a.min(b) as u64) << 32) | b.max(a) as u64;
    let record = |acc: (PairWorst, usize), hit: PairDefect| match hit {
        Some((d, a, b)) => {
            let mut w = acc.0;
            w.offer(d, key(a, b), || (a, b));
            (w, acc.1 + 1)
        }
        None => acc,
    };
    let combine = |x: (PairWorst, usize), y: (PairWorst, usize)| (x.0.merge(y.0), x.1 + y.1);
    let identity = || (Worst::none(), 0usize);

    if total <= cap as u128 {
        let starts: Vec<(usize, usize)> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, members)| (0..members.len()).map(move |a| (g, a)))
            .collect();
        starts
            .par_iter()
            .map(|&(g, a)| {
                let members = &groups[g];
                members[a + 1..]
                    .iter()
                    .fold(identity(), |acc, &b| record(acc, check(members[a], b)))
            })
            .reduce(identity, combine)
    } else {
        let mut cumulative = Vec::with_capacity(groups.len());
        let mut acc = 0.0;
        for g in groups {
            acc += pair_count(g.len()) as f64;
            cumulative.push(acc);
        }
        let chunks = cap.div_ceil(SAMPLE_CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng_for(seed, stream, c as u64);
                let n = SAMPLE_CHUNK.min(cap - c * SAMPLE_CHUNK);
                let mut out = identity();
                for _ in 0..n {
                    let r = rng.random::<f64>() * acc;
                    let g = cumulative.partition_point(|&x| x <= r).min(groups.len() - 1);
                    let members = &groups[g];
                    let a = rng.random_range(0..members.len());
                    let mut b = rng.random_range(0..members.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    out = record(out, check(members[a], members[b]));
                }
                out
            })
            .reduce(identity, combine)
    }
}

/// Groups grid points by the parity of their lattice counts. Two points
/// have a grid-point midpoint exactly when they share a parity class.
fn parity_classes(grid: &SimplexGrid, include: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); 1 << grid.dim()];
    for i in (0..grid.len()).filter(|&i| include(i)) {
        let mask = grid
            .lattice(i)
            .iter()
            .enumerate()
            .fold(0usize, |m, (d, &k)| m | (((k & 1) as usize) << d));
        classes[mask].push(i);
    }
    classes.retain(|c| c.len() >= 2);
    classes
}

fn midpoint(grid: &SimplexGrid, a: usize, b: usize) -> Option<usize> {
    let x = grid.dim();
    let mut k = [0u32; MAX_DIM];
    for (d, (ka, kb)) in grid.lattice(a).iter().zip(grid.lattice(b)).enumerate() {
        k[d] = (ka + kb) / 2;
    }
    grid.index_of(&k[..x])
}

fn grid_pair(grid: &SimplexGrid, pair: Option<(f64, (usize, usize))>) -> Option<(f64, Witness)> {
    pair.map(|(d, (a, b))| {
        (
            d,
            Witness::GridPair {
                first: a + 1,
                second: b + 1,
                first_belief: grid.point(a).to_vec(),
                second_belief: grid.point(b).to_vec(),
            },
        )
    })
}

/// Midpoint concavity of the grid values: V(mid) ≥ ½V(π₁) + ½V(π₂) − tol
/// over pairs of grid points whose midpoint is also a grid point.
///
/// `num_trials` bounds the number of pairs; below it every such pair is
/// checked.
pub fn verify_concavity(value: &ValueFunction, num_trials: usize, tolerance: f64, seed: u64) -> OrderCheckReport {
    let grid = value.grid();
    let v = value.values();
    let classes = parity_classes(grid, |_| true);
    let (worst, samples) = sweep_pairs(&classes, num_trials, seed, CONCAVITY_STREAM, |a, b| {
        let m = midpoint(grid, a, b).expect("same-parity points have a lattice midpoint");
        Some((0.5 * (v[a] + v[b]) - v[m], a, b))
    });
    OrderCheckReport::new("concavity", grid_pair(grid, worst.into_option()), tolerance, samples)
}

/// Convexity of the stopping set R₁ = {π : action 1}: for stop points whose
/// midpoint is a grid point, the midpoint must also stop.
///
/// A violating pair has defect 1, a conforming pair 0.
pub fn verify_stopping_set_convex(policy: &Policy, seed: u64) -> OrderCheckReport {
    let grid = policy.grid();
    let actions = policy.actions();
    let classes = parity_classes(grid, |i| actions[i] == 1);
    let (worst, samples) = sweep_pairs(&classes, MAX_PAIRS, seed, STOPPING_STREAM, |a, b| {
        let m = midpoint(grid, a, b).expect("same-parity points have a lattice midpoint");
        Some((if actions[m] == 1 { 0.0 } else { 1.0 }, a, b))
    });
    OrderCheckReport::new("stopping_set_convex", grid_pair(grid, worst.into_option()), 0.0, samples)
}

/// MLR monotonicity of the value: π₁ ≥_r π₂ ⇒ V(π₁) ≤ V(π₂) + tol over
/// MLR-comparable pairs of grid points. The witness lists the dominating
/// point first.
pub fn verify_mlr_monotone_value(value: &ValueFunction, tolerance: f64, seed: u64) -> OrderCheckReport {
    let grid = value.grid();
    let v = value.values();
    let all = vec![(0..grid.len()).collect::<Vec<_>>()];
    let (worst, samples) = sweep_pairs(&all, MAX_PAIRS, seed, MLR_STREAM, |a, b| {
        let (pa, pb) = (grid.point(a), grid.point(b));
        let forward = mlr_geq(pa, pb).then(|| (v[a] - v[b], a, b));
        let backward = mlr_geq(pb, pa).then(|| (v[b] - v[a], b, a));
        match (forward, backward) {
            (Some(f), Some(r)) => Some(if r.0 > f.0 { r } else { f }),
            (f, r) => f.or(r),
        }
    });
    OrderCheckReport::new("mlr_monotone_value", grid_pair(grid, worst.into_option()), tolerance, samples)
}

/// Relative tolerance of the homogeneity check.
const HOMOGENEITY_TOL: f64 = 1e-10;
/// Largest number of leaves in the exact finite-horizon relaxed recursion.
const EXACT_LEAVES: usize = 4096;

/// W_n(α) = min_u c_u'α + ρ Σ_y W_{n−1}(B_y(u)P'(u)α), W_0 = 0, evaluated on
/// unnormalized vectors without any grid.
fn exact_relaxed(model: &PomdpModel, alpha: &[f64], horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let x = alpha.len();
    let rho = model.discount();
    let mut best = f64::INFINITY;
    for u in 1..=model.num_actions() {
        let mut q: f64 = model.cost(u).iter().zip(alpha).map(|(c, a)| c * a).sum();
        let stop = model.kind() == ModelKind::StoppingTime && u == 1;
        if !stop && rho != 0.0 {
            let p = model.transition(u);
            let b = model.observation(u);
            let predicted: Vec<f64> = (0..x).map(|j| (0..x).map(|i| p[(i, j)] * alpha[i]).sum()).collect();
            for y in 0..b.ncols() {
                let next: Vec<f64> = (0..x).map(|j| b[(j, y)] * predicted[j]).collect();
                q += rho * exact_relaxed(model, &next, horizon - 1);
            }
        }
        best = best.min(q);
    }
    best
}

/// Positive homogeneity W(κα) = κW(α) of the relaxed value function.
///
/// For `samples` random α (random direction and mass) and each κ, three
/// forms are compared, each normalized by max(1, κ‖W‖):
/// the homogeneous extension of the solved grid values, one relaxed Bellman
/// backup applied directly to κα and α, and an exact grid-free
/// finite-horizon relaxed recursion.
pub fn verify_homogeneity(
    model: &PomdpModel,
    relaxed: &RelaxedValueFunction,
    kappas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<OrderCheckReport> {
    if !model.nonlinear_cost().is_linear() {
        return Err(Error::NonlinearCostUnsupported(model.nonlinear_cost().name().to_string()));
    }
    if let Some(&k) = kappas.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidParameter {
            field: "kappa".into(),
            reason: format!("scales must be positive and finite, got {k}"),
        });
    }
    let x = model.num_states();
    let value = relaxed.value();
    let norm = value.max_abs();
    let branching = (1..=model.num_actions())
        .map(|u| model.num_observations(u))
        .sum::<usize>()
        .max(1);
    let mut horizon = 0;
    while horizon < 4 && branching.pow(horizon as u32 + 1) <= EXACT_LEAVES {
        horizon += 1;
    }

    let alphas: Vec<Vec<f64>> = (0..samples)
        .map(|s| {
            let mut rng = rng_for(seed, HOMOGENEITY_STREAM, s as u64);
            let mass = 0.1 + 9.9 * rng.random::<f64>();
            sample_simplex(&mut rng, x).into_iter().map(|p| p * mass).collect()
        })
        .collect();

    let worst = alphas
        .par_iter()
        .enumerate()
        .map(|(s, alpha)| {
            let mut worst = Worst::none();
            let base_ext = relaxed.evaluate(alpha);
            let base_backup = relaxed_backup(model, value, alpha).value;
            let base_exact = exact_relaxed(model, alpha, horizon);
            for (k, &kappa) in kappas.iter().enumerate() {
                let scaled: Vec<f64> = alpha.iter().map(|a| kappa * a).collect();
                let scale = 1f64.max(kappa * norm);
                let checks = [
                    ("extension", relaxed.evaluate(&scaled), base_ext, scale),
                    ("backup", relaxed_backup(model, value, &scaled).value, base_backup, scale),
                    (
                        "exact_recursion",
                        exact_relaxed(model, &scaled, horizon),
                        base_exact,
                        scale.max((kappa * base_exact).abs()),
                    ),
                ];
                for (c, (name, at_scaled, base, scale)) in checks.into_iter().enumerate() {
                    let defect = (at_scaled - kappa * base).abs() / scale;
                    let order = ((s * kappas.len() + k) * 3 + c) as u64;
                    worst.offer(defect, order, || Witness::Scaling {
                        check: name.to_string(),
                        alpha: alpha.clone(),
                        kappa,
                    });
                }
            }
            worst
        })
        .reduce(Worst::none, Worst::merge);
    Ok(OrderCheckReport::new(
        "homogeneity",
        worst.into_option(),
        HOMOGENEITY_TOL,
        samples * kappas.len() * 3,
    ))
}

/// Random two-state models with costs decreasing in the state and TP2
/// transitions, whose observation matrices are not TP2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjectureGenerator {
    pub num_actions: usize,
    /// Observation alphabets are drawn from 2..=max_observations.
    pub max_observations: usize,
    pub discount: f64,
    pub seed: u64,
}

impl Default for ConjectureGenerator {
    fn default() -> Self {
        Self {
            num_actions: 2,
            max_observations: 3,
            discount: 0.8,
            seed: 0,
        }
    }
}

impl ConjectureGenerator {
    pub fn model(&self, index: u64) -> Result<PomdpModel> {
        use nalgebra::{DMatrix, DVector};
        if self.max_observations < 2 {
            return Err(Error::InvalidParameter {
                field: "max_observations".into(),
                reason: "need at least 2 observations for a non-TP2 matrix".into(),
            });
        }
        let mut rng = rng_for(self.seed, CONJECTURE_STREAM, index);
        let mut transitions = Vec::new();
        let mut observations = Vec::new();
        let mut costs = Vec::new();
        for _ in 0..self.num_actions {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            transitions.push(DMatrix::from_row_slice(2, 2, &[hi, 1.0 - hi, lo, 1.0 - lo]));
            let y = rng.random_range(2..=self.max_observations);
            let obs = loop {
                let candidate = sample_stochastic(&mut rng, 2, y);
                if !is_tp2(&candidate).holds {
                    break candidate;
                }
            };
            observations.push(obs);
            let (c1, c2): (f64, f64) = (rng.random(), rng.random());
            costs.push(DVector::from_vec(vec![c1.max(c2), c1.min(c2)]));
        }
        PomdpModel::new(
            ModelKind::GeneralDiscounted,
            self.discount,
            transitions,
            observations,
            costs,
            Default::default(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Position of the model in the probed stream (0-based).
    pub index: usize,
    pub model: String,
    pub report: OrderCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureSummary {
    pub models_checked: usize,
    /// Models skipped because their costs were not decreasing or their
    /// transitions not TP2.
    pub skipped: Vec<usize>,
    /// Models whose observation matrices happened to be TP2.
    pub tp2_observation_models: usize,
    /// Largest normalized monotonicity defect over all checked models
    /// (negative when every comparison has slack; −∞ if none was checked).
    pub worst_violation: f64,
    pub counterexample: Option<Counterexample>,
}

impl ConjectureSummary {
    pub fn message(&self) -> String {
        match &self.counterexample {
            Some(c) => format!("counterexample: model {}", c.index),
            None => format!("no counterexample in {} models", self.models_checked),
        }
    }
}

/// Solves each model on a grid of the given resolution and looks for a
/// violation of MLR monotonicity of the value function, with tolerance
/// `relative_tol · max|V|`.
///
/// Models must have costs C(·,u) decreasing in the first-order stochastic
/// order (checked by sampling) and TP2 transitions; others are skipped and
/// listed. Observation matrices are not
/// required to be TP2.
pub fn conjecture_probe(
    models: &[PomdpModel],
    resolution: usize,
    config: SolverConfig,
    relative_tol: f64,
    seed: u64,
) -> Result<ConjectureSummary> {
    let mut summary = ConjectureSummary {
        models_checked: 0,
        skipped: Vec::new(),
        tp2_observation_models: 0,
        worst_violation: f64::NEG_INFINITY,
        counterexample: None,
    };
    let mut grids: Vec<Arc<SimplexGrid>> = Vec::new();
    for (index, model) in models.iter().enumerate() {
        let x = model.num_states();
        let grid = match grids.iter().find(|g| g.dim() == x) {
            Some(g) => g.clone(),
            None => {
                let g = Arc::new(build_grid(x, resolution)?);
                grids.push(g.clone());
                g
            }
        };
        let mut assumptions = true;
        for u in 1..=model.num_actions() {
            assumptions &= is_tp2(model.transition(u)).holds;
            assumptions &= fosd_decreasing_cost(model, u, 256, 1e-12, seed)?.holds;
        }
        if !assumptions {
            summary.skipped.push(index);
            continue;
        }
        if (1..=model.num_actions()).all(|u| is_tp2(model.observation(u)).holds) {
            summary.tp2_observation_models += 1;
        }
        let solution = match model.kind() {
            ModelKind::StoppingTime => solve_stopping(model, grid, config)?,
            ModelKind::GeneralDiscounted => solve_discounted(model, grid, config)?,
        };
        solution.ensure_converged()?;
        let scale = solution.value.max_abs().max(f64::MIN_POSITIVE);
        let report = verify_mlr_monotone_value(&solution.value, relative_tol * scale, seed);
        summary.models_checked += 1;
        summary.worst_violation = summary.worst_violation.max(report.worst_violation / scale);
        if !report.holds && summary.counterexample.is_none() {
            summary.counterexample = Some(Counterexample {
                index,
                model: model_to_string(model),
                report,
            });
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::NonlinearCost;
    use crate::grid::build_grid;
    use crate::solver::{solve_relaxed, Policy};
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn entropy_value(x: usize, m: usize, sign: f64) -> ValueFunction {
        let grid = Arc::new(build_grid(x, m).unwrap());
        let values = grid
            .points()
            .map(|p| {
                -sign
                    * p.iter()
                        .filter(|&&v| v > 0.0)
                        .map(|v| v * v.log2())
                        .sum::<f64>()
            })
            .collect();
        ValueFunction::new(grid, values).unwrap()
    }

    #[test]
    fn entropy_values_are_concave_and_negated_entropy_is_not() {
        for x in [2, 3] {
            let r = verify_concavity(&entropy_value(x, 40, 1.0), 100_000, 1e-12, 1);
            assert!(r.holds, "{r:?}");
            assert!(r.samples > 0);
            let neg = verify_concavity(&entropy_value(x, 40, -1.0), 100_000, 1e-12, 1);
            assert!(!neg.holds);
            assert!(matches!(neg.witness, Some(Witness::GridPair { .. })));
        }
    }

    #[test]
    fn sampled_concavity_is_deterministic() {
        let v = entropy_value(3, 60, 1.0);
        let a = verify_concavity(&v, 5000, 1e-12, 9);
        let b = verify_concavity(&v, 5000, 1e-12, 9);
        assert_eq!(a, b);
        assert_eq!(a.samples, 5000);
    }

    #[test]
    fn exhaustive_sweep_counts_same_parity_pairs() {
        // X = 2, M = 4: parities {even: 0,2,4}, {odd: 1,3} → 3 + 1 pairs.
        let v = entropy_value(2, 4, 1.0);
        assert_eq!(verify_concavity(&v, 100, 1e-12, 0).samples, 4);
    }

    fn policy(actions: Vec<usize>) -> Policy {
        let grid = Arc::new(build_grid(2, actions.len() - 1).unwrap());
        Policy::new(grid, actions).unwrap()
    }

    #[test]
    fn stopping_set_examples() {
        assert!(verify_stopping_set_convex(&policy(vec![1, 1, 2, 2]), 0).holds);
        let bad = verify_stopping_set_convex(&policy(vec![1, 2, 1]), 0);
        assert!(!bad.holds);
        assert_eq!(
            bad.witness,
            Some(Witness::GridPair {
                first: 1,
                second: 3,
                first_belief: vec![1.0, 0.0],
                second_belief: vec![0.0, 1.0],
            })
        );
    }

    #[test]
    fn mlr_monotone_examples() {
        let grid = Arc::new(build_grid(3, 12).unwrap());
        let constant = ValueFunction::new(grid.clone(), vec![2.5; grid.len()]).unwrap();
        assert!(verify_mlr_monotone_value(&constant, 0.0, 0).holds);
        // V(π) = c'π with c decreasing is MLR decreasing; increasing is not.
        let dec: Vec<f64> = grid.points().map(|p| 3.0 * p[0] + 2.0 * p[1] + p[2]).collect();
        let inc: Vec<f64> = grid.points().map(|p| p[0] + 2.0 * p[1] + 3.0 * p[2]).collect();
        assert!(verify_mlr_monotone_value(&ValueFunction::new(grid.clone(), dec).unwrap(), 1e-12, 0).holds);
        let r = verify_mlr_monotone_value(&ValueFunction::new(grid, inc).unwrap(), 1e-12, 0);
        assert!(!r.holds);
        assert!(r.worst_violation > 1.9);
    }

    fn linear_model() -> PomdpModel {
        PomdpModel::new(
            ModelKind::GeneralDiscounted,
            0.8,
            vec![dmatrix![0.9, 0.1; 0.3, 0.7], dmatrix![0.6, 0.4; 0.2, 0.8]],
            vec![dmatrix![0.7, 0.3; 0.4, 0.6], dmatrix![0.9, 0.05, 0.05; 0.1, 0.2, 0.7]],
            vec![dvector![1.0, 0.2], dvector![0.5, 0.6]],
            NonlinearCost::None,
        )
        .unwrap()
    }

    #[test]
    fn homogeneity_holds_for_a_solved_model() {
        let model = linear_model();
        let grid = Arc::new(build_grid(2, 100).unwrap());
        let w = solve_relaxed(&model, grid, SolverConfig::new(1e-10, 10_000)).unwrap();
        let r = verify_homogeneity(&model, &w, &[1.0, 2.0, 0.001, 7.3], 20, 4).unwrap();
        assert!(r.holds, "{r:?}");
        let exact = verify_homogeneity(&model, &w, &[1.0], 5, 4).unwrap();
        assert!(exact.worst_violation <= 1e-15);
    }

    #[test]
    fn homogeneity_rejects_bad_inputs() {
        let model = linear_model();
        let grid = Arc::new(build_grid(2, 10).unwrap());
        let w = solve_relaxed(&model, grid, SolverConfig::default()).unwrap();
        assert!(verify_homogeneity(&model, &w, &[0.0], 1, 0).is_err());
        let nonlinear = model.with_nonlinear_cost(NonlinearCost::L1 {
            alpha: vec![1.0, 1.0],
            beta: vec![0.0, 0.0],
        });
        assert!(matches!(
            verify_homogeneity(&nonlinear, &w, &[1.0], 1, 0),
            Err(Error::NonlinearCostUnsupported(_))
        ));
    }

    #[test]
    fn exact_recursion_is_linear_at_horizon_one() {
        let model = linear_model();
        let alpha = [0.3, 1.2];
        let expected = (1.0f64 * 0.3 + 0.2 * 1.2).min(0.5 * 0.3 + 0.6 * 1.2);
        assert!((exact_relaxed(&model, &alpha, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn generator_models_meet_the_probe_preconditions() {
        let generator = ConjectureGenerator::default();
        for i in 0..20 {
            let m = generator.model(i).unwrap();
            for u in 1..=2 {
                assert!(is_tp2(m.transition(u)).holds);
                assert!(!is_tp2(m.observation(u)).holds);
                assert!(m.cost(u)[0] >= m.cost(u)[1]);
            }
        }
    }

    #[test]
    fn conjecture_probe_is_vacuous_on_no_models() {
        let s = conjecture_probe(&[], 50, SolverConfig::default(), 1e-6, 0).unwrap();
        assert_eq!(s.models_checked, 0);
        assert!(s.counterexample.is_none());
        assert_eq!(s.message(), "no counterexample in 0 models");
    }

    #[test]
    fn conjecture_probe_skips_models_outside_the_assumptions() {
        let mut bad = linear_model();
        bad = PomdpModel::new(
            bad.kind(),
            bad.discount(),
            vec![dmatrix![0.2, 0.8; 0.9, 0.1], DMatrix::identity(2, 2)],
            bad.observations().to_vec(),
            bad.costs().to_vec(),
            NonlinearCost::None,
        )
        .unwrap();
        let s = conjecture_probe(&[bad], 20, SolverConfig::default(), 1e-6, 0).unwrap();
        assert_eq!(s.skipped, vec![0]);
        assert_eq!(s.models_checked, 0);
    }
}
