//! Monte Carlo evaluation of belief-feedback policies.
//!
//! A path draws the initial state from π₀, then at each step applies the
//! policy to the current belief, pays C(π_k, u_k) discounted by ρᵏ, moves
//! the hidden state, draws an observation and updates the belief. Every
//! step consumes exactly two uniforms (state, observation) whatever the
//! action, so two policies evaluated with the same seed see common random
//! numbers.

use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;

use crate::costs::{cost_bound, instantaneous_cost};
use crate::error::{Error, Result};
use crate::filter::{correct_into, predict_into, UNDERFLOW_THRESHOLD};
use crate::grid::MAX_DIM;
use crate::model::{unit_belief, Belief, ModelKind, PomdpModel};
use crate::rng::{inverse_cdf, rng_for};
use crate::solver::Policy;

/// Step cap for undiscounted stopping problems.
pub const STOPPING_STEP_CAP: usize = 100_000;

const EVAL_STREAM: u64 = 0xE7A1;
const Z_95: f64 = 1.959_963_984_540_054;

/// Sample mean with standard error and 95% normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci: (f64, f64),
}

impl Estimate {
    pub fn from_samples(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for s in samples.clone() {
            n += 1;
            sum += s;
        }
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                ci: (f64::NAN, f64::NAN),
            };
        }
        let mean = sum / n as f64;
        let ss: f64 = samples.map(|s| (s - mean) * (s - mean)).sum();
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        let std_error = (var / n as f64).sqrt();
        Self {
            mean,
            std_error,
            ci: (mean - Z_95 * std_error, mean + Z_95 * std_error),
        }
    }

    pub fn half_width(&self) -> f64 {
        Z_95 * self.std_error
    }
}

/// A rule mapping beliefs to 1-indexed actions.
pub trait BeliefPolicy: Sync {
    fn action(&self, pi: &[f64]) -> usize;
    fn name(&self) -> String;
}

impl BeliefPolicy for Policy {
    /// Action of the nearest grid vertex in the cell containing π.
    fn action(&self, pi: &[f64]) -> usize {
        self.action_for(pi)
    }

    fn name(&self) -> String {
        "grid".into()
    }
}

/// Two-state stopping rule: stop (1) when π(2) < threshold, else continue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy(pub f64);

impl BeliefPolicy for ThresholdPolicy {
    fn action(&self, pi: &[f64]) -> usize {
        if pi[1] < self.0 {
            1
        } else {
            2
        }
    }

    fn name(&self) -> String {
        format!("threshold({})", self.0)
    }
}

/// Always the same action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy(pub usize);

impl BeliefPolicy for ConstantPolicy {
    fn action(&self, _pi: &[f64]) -> usize {
        self.0
    }

    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Myopic rule: the cheapest immediate cost C(π,u). A later action replaces
/// an earlier one only if it is cheaper by more than `margin`, so with two
/// sensors it chooses 2 exactly on {C(π,2) < C(π,1) − margin}.
#[derive(Debug, Clone)]
pub struct MyopicPolicy<'a> {
    pub model: &'a PomdpModel,
    pub margin: f64,
}

impl BeliefPolicy for MyopicPolicy<'_> {
    fn action(&self, pi: &[f64]) -> usize {
        let mut best = (instantaneous_cost(self.model, pi, 1), 1);
        for u in 2..=self.model.num_actions() {
            let c = instantaneous_cost(self.model, pi, u);
            if c < best.0 - self.margin {
                best = (c, u);
            }
        }
        best.1
    }

    fn name(&self) -> String {
        "myopic".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    /// Steps simulated per path (the cap for stopping problems).
    pub horizon: usize,
    /// ρ^H · max|C| / (1 − ρ); zero for stopping problems.
    pub truncation_bound: f64,
}

/// How long to simulate.
#[derive(Debug, Clone, Copy)]
struct Horizon {
    steps: usize,
    truncation_bound: f64,
    stopping: bool,
}

fn horizon_for(model: &PomdpModel, policy: &dyn BeliefPolicy, tolerance: f64) -> Result<Horizon> {
    let rho = model.discount();
    if rho < 1.0 {
        let bound = cost_bound(model);
        if rho == 0.0 || bound == 0.0 {
            return Ok(Horizon {
                steps: 1,
                truncation_bound: 0.0,
                stopping: model.kind() == ModelKind::StoppingTime,
            });
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                field: "tol".into(),
                reason: "truncation tolerance must be positive".into(),
            });
        }
        let mut steps = ((tolerance * (1.0 - rho) / bound).ln() / rho.ln()).ceil().max(1.0) as usize;
        while rho.powi(steps as i32) * bound / (1.0 - rho) > tolerance {
            steps += 1;
        }
        return Ok(Horizon {
            steps,
            truncation_bound: rho.powi(steps as i32) * bound / (1.0 - rho),
            stopping: model.kind() == ModelKind::StoppingTime,
        });
    }
    // Undiscounted: the policy must stop, and must at least stop at some
    // state the continue dynamics cannot leave.
    if model.kind() != ModelKind::StoppingTime {
        return Err(Error::HorizonUnbounded);
    }
    let x = model.num_states();
    let p = model.transition(2);
    let stops_at_trap = (1..=x).any(|i| {
        p[(i - 1, i - 1)] == 1.0 && policy.action(unit_belief(i, x).expect("valid index").probs()) == 1
    });
    if !stops_at_trap {
        return Err(Error::HorizonUnbounded);
    }
    Ok(Horizon {
        steps: STOPPING_STEP_CAP,
        truncation_bound: 0.0,
        stopping: true,
    })
}

/// Discounted cost of one path, or `None` if a stopping path hit the cap.
fn simulate_path(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    prior: &[f64],
    horizon: Horizon,
    seed: u64,
    stream: u64,
    index: u64,
) -> Option<f64> {
    let x = model.num_states();
    let rho = model.discount();
    let mut rng = rng_for(seed, stream, index);
    let mut state = inverse_cdf(prior, rng.random());
    let mut pi = [0.0; MAX_DIM];
    pi[..x].copy_from_slice(prior);
    let mut predicted = [0.0; MAX_DIM];
    let mut post = [0.0; MAX_DIM];
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon.steps {
        let u = policy.action(&pi[..x]);
        total += weight * instantaneous_cost(model, &pi[..x], u);
        if horizon.stopping && u == 1 {
            return Some(total);
        }
        weight *= rho;
        let (us, uy): (f64, f64) = (rng.random(), rng.random());
        let p = model.transition(u);
        state = inverse_cdf((0..x).map(|j| &p[(state, j)]), us);
        let b = model.observation(u);
        let y = inverse_cdf((0..b.ncols()).map(|c| &b[(state, c)]), uy);
        predict_into(p, &pi[..x], &mut predicted[..x]);
        let sigma = correct_into(b, &predicted[..x], y, &mut post[..x]);
        if sigma > UNDERFLOW_THRESHOLD {
            for i in 0..x {
                pi[i] = post[i] / sigma;
            }
        } else {
            let mass: f64 = predicted[..x].iter().sum();
            for i in 0..x {
                pi[i] = predicted[i] / mass;
            }
        }
    }
    if horizon.stopping && rho == 1.0 {
        None
    } else {
        Some(total)
    }
}

fn simulate_all(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    prior: &Belief,
    num_paths: usize,
    horizon: Horizon,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    if prior.dim() != model.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} entries, model has {} states",
            prior.dim(),
            model.num_states()
        )));
    }
    if num_paths == 0 {
        return Err(Error::InvalidParameter {
            field: "paths".into(),
            reason: "need at least one path".into(),
        });
    }
    let costs: Vec<Option<f64>> = (0..num_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(model, policy, prior.probs(), horizon, seed, stream, i))
        .collect();
    costs.into_iter().collect::<Option<Vec<f64>>>().ok_or(Error::HorizonUnbounded)
}

/// Estimates J_μ(π₀) = E Σ ρᵏ C(π_k, μ(π_k)).
///
/// For ρ < 1 the horizon H is the smallest with ρ^H·max|C|/(1−ρ) ≤
/// `tolerance`. For ρ = 1 the model must be a stopping problem, the policy
/// must stop at some absorbing state, and every path must stop within
/// [`STOPPING_STEP_CAP`] steps; otherwise [`Error::HorizonUnbounded`].
pub fn evaluate_policy(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    prior: &Belief,
    num_paths: usize,
    tolerance: f64,
    seed: u64,
) -> Result<EvalResult> {
    let horizon = horizon_for(model, policy, tolerance)?;
    let costs = simulate_all(model, policy, prior, num_paths, horizon, seed, EVAL_STREAM)?;
    let est = Estimate::from_samples(costs.iter().copied());
    Ok(EvalResult {
        policy: policy.name(),
        mean: est.mean,
        std_error: est.std_error,
        paths: num_paths,
        horizon: horizon.steps,
        truncation_bound: horizon.truncation_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub prior: Vec<f64>,
    pub first: EvalResult,
    pub second: EvalResult,
    /// Mean of the path-by-path differences first − second.
    pub difference: f64,
    pub difference_se: f64,
    /// first ≤ second + 3 standard errors of the paired difference.
    pub first_not_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Priors at which the first policy is not worse within noise.
    pub first_not_worse: usize,
}

impl Comparison {
    pub fn all_not_worse(&self) -> bool {
        self.first_not_worse == self.rows.len()
    }
}

/// Paired comparison of two policies from several initial beliefs. Both
/// policies see the same random numbers on each path.
pub fn compare_policies(
    model: &PomdpModel,
    first: &dyn BeliefPolicy,
    second: &dyn BeliefPolicy,
    priors: &[Belief],
    num_paths: usize,
    tolerance: f64,
    seed: u64,
) -> Result<Comparison> {
    let horizon_a = horizon_for(model, first, tolerance)?;
    let horizon_b = horizon_for(model, second, tolerance)?;
    let mut rows = Vec::with_capacity(priors.len());
    for (k, prior) in priors.iter().enumerate() {
        let stream = EVAL_STREAM + 1 + k as u64;
        let a = simulate_all(model, first, prior, num_paths, horizon_a, seed, stream)?;
        let b = simulate_all(model, second, prior, num_paths, horizon_b, seed, stream)?;
        let ea = Estimate::from_samples(a.iter().copied());
        let eb = Estimate::from_samples(b.iter().copied());
        let diff = Estimate::from_samples(a.iter().zip(&b).map(|(x, y)| x - y));
        let result = |name: String, e: Estimate, h: Horizon| EvalResult {
            policy: name,
            mean: e.mean,
            std_error: e.std_error,
            paths: num_paths,
            horizon: h.steps,
            truncation_bound: h.truncation_bound,
        };
        rows.push(ComparisonRow {
            prior: prior.probs().to_vec(),
            first: result(first.name(), ea, horizon_a),
            second: result(second.name(), eb, horizon_b),
            difference: diff.mean,
            difference_se: diff.std_error,
            first_not_worse: diff.mean <= 3.0 * diff.std_error,
        });
    }
    let first_not_worse = rows.iter().filter(|r| r.first_not_worse).count();
    Ok(Comparison { rows, first_not_worse })
}
