//! Bayesian quickest change detection as a stopping-time POMDP.
//!
//! State 2 is the pre-change state and state 1 the absorbing post-change
//! state. The chain starts in state 2, so the change time τ⁰ is geometric
//! with P(τ⁰ > k) = P₂₂ᵏ and mean 1/(1 − P₂₂). Announcing (action 1) at time
//! τ costs 1 if the change has not happened yet; every step spent in state 1
//! before announcing costs d. The expected total is the
//! Kolmogorov–Shiryayev cost d·E(τ − τ⁰)⁺ + P(τ < τ⁰).

use std::sync::Arc;

use nalgebra::{dvector, DMatrix};
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::NonlinearCost;
use crate::error::{Error, Result};
use crate::grid::build_grid;
use crate::model::{Belief, ModelKind, PomdpModel};
use crate::rng::{inverse_cdf, rng_for};
use crate::schema::rows_to_matrix;
use crate::sim::Estimate;
use crate::solver::{extract_threshold, solve_stopping, Solution, SolverConfig, Threshold};

/// Default number of steps after which a simulated path is cut off.
pub const DEFAULT_HORIZON_CAP: u64 = 10_000;

const KS_STREAM: u64 = 0x4B53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QdSpec {
    /// Probability of staying in the pre-change state for one more step.
    pub p22: f64,
    /// Cost d of each step of detection delay.
    pub delay: f64,
    /// 2 × Y observation matrix, used by both actions.
    pub observation: Vec<Vec<f64>>,
    /// Optional concave loss added to the continue action only. Its `alpha`
    /// and `beta` have one entry per action; the stop entry is ignored.
    #[serde(default, skip_serializing_if = "NonlinearCost::is_linear")]
    pub continue_cost: NonlinearCost,
}

impl QdSpec {
    pub fn new(p22: f64, delay: f64, observation: &DMatrix<f64>) -> Self {
        Self {
            p22,
            delay,
            observation: observation.row_iter().map(|r| r.iter().copied().collect()).collect(),
            continue_cost: NonlinearCost::None,
        }
    }

    pub fn with_continue_cost(mut self, cost: NonlinearCost) -> Self {
        self.continue_cost = cost;
        self
    }

    pub fn observation_matrix(&self) -> Result<DMatrix<f64>> {
        let b = rows_to_matrix("observation", &self.observation, None)?;
        if b.nrows() != 2 {
            return Err(Error::InvalidParameter {
                field: "observation".into(),
                reason: format!("needs 2 rows, got {}", b.nrows()),
            });
        }
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p22) {
            return Err(Error::InvalidParameter {
                field: "p22".into(),
                reason: format!("{} is outside [0, 1); the change must eventually occur", self.p22),
            });
        }
        if !(self.delay > 0.0 && self.delay.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "delay".into(),
                reason: format!("{} must be positive", self.delay),
            });
        }
        Ok(())
    }

    /// Mean change time 1/(1 − P₂₂).
    pub fn mean_change_time(&self) -> f64 {
        1.0 / (1.0 - self.p22)
    }

    /// Parses a TOML document with keys `p22`, `delay`, `observation` and an
    /// optional `[continue_cost]` table, then checks the parameters.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: QdSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.check()?;
        spec.observation_matrix()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes to TOML")
    }
}

/// Belief at time 0: the change has not happened.
pub fn initial_belief() -> Belief {
    Belief::new(vec![0.0, 1.0]).expect("unit vector is a belief")
}

/// Stopping-time model with P = [[1, 0], [1 − P₂₂, P₂₂]] under continue,
/// c₁ = [0, 1]', c₂ = [d, 0]' and ρ = 1. The stop action's transition and
/// observation matrices are never used; they are set to the identity and B.
pub fn build_qd_model(spec: &QdSpec) -> Result<PomdpModel> {
    spec.check()?;
    let b = spec.observation_matrix()?;
    let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0 - spec.p22, spec.p22]);
    PomdpModel::new(
        ModelKind::StoppingTime,
        1.0,
        vec![DMatrix::identity(2, 2), p],
        vec![b.clone(), b],
        vec![dvector![0.0, 1.0], dvector![spec.delay, 0.0]],
        spec.continue_cost.clone(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QdThreshold {
    /// Announce when π(2) < threshold.
    pub threshold: f64,
    /// Optimal Kolmogorov–Shiryayev cost V(π₀) from the grid solution.
    pub value_at_prior: f64,
    pub resolution: usize,
    pub iterations: usize,
    pub final_change: f64,
}

/// Solves the stopping problem on an M-point grid and reads off the
/// threshold. The policy must switch once from stop to continue along π(2)
/// and stop at π(2) = 0; anything else is a [`Error::StructureViolation`].
pub fn qd_threshold(spec: &QdSpec, resolution: usize, config: SolverConfig) -> Result<(QdThreshold, Solution)> {
    let model = build_qd_model(spec)?;
    let grid = Arc::new(build_grid(2, resolution)?);
    let solution = solve_stopping(&model, grid, config)?;
    solution.ensure_converged()?;
    if solution.policy.actions()[0] != 1 {
        return Err(Error::StructureViolation(
            "policy continues at π(2) = 0, where stopping is free".into(),
        ));
    }
    let threshold = match extract_threshold(&solution.policy)? {
        Threshold::At(t) => t,
        Threshold::NotThreshold { switches } => {
            return Err(Error::StructureViolation(format!(
                "policy is not a threshold rule ({switches} action changes)"
            )))
        }
    };
    let prior = solution.value.evaluate(initial_belief().probs());
    Ok((
        QdThreshold {
            threshold,
            value_at_prior: prior,
            resolution,
            iterations: solution.log.iterations(),
            final_change: solution.log.final_change(),
        },
        solution,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsEstimate {
    pub threshold: f64,
    /// d·E(τ − τ⁰)⁺.
    pub delay_term: Estimate,
    /// P(τ < τ⁰).
    pub false_alarm: Estimate,
    /// Sum of both terms, estimated path by path.
    pub ks_cost: Estimate,
    /// Empirical change time, for checking the simulated prior.
    pub change_time: Estimate,
    pub paths: usize,
    pub seed: u64,
    pub horizon_cap: u64,
    /// Paths cut off at the horizon without an announcement; they are
    /// charged as if announced at the cap.
    pub cap_hits: usize,
}

struct PathOutcome {
    delay: f64,
    false_alarm: bool,
    change_time: u64,
    capped: bool,
}

/// τ⁰ with P(τ⁰ > k) = P₂₂ᵏ by inversion.
fn change_time(p22: f64, uniform: f64) -> u64 {
    if p22 == 0.0 {
        return 1;
    }
    let u = 1.0 - uniform; // (0, 1]
    let k = (u.ln() / p22.ln()).floor();
    if k >= (u64::MAX / 2) as f64 {
        u64::MAX / 2
    } else {
        1 + k as u64
    }
}

fn simulate_path(spec: &QdSpec, b: &DMatrix<f64>, threshold: f64, cap: u64, seed: u64, index: u64) -> PathOutcome {
    let mut rng = rng_for(seed, KS_STREAM, index);
    let tau0 = change_time(spec.p22, rng.random());
    let y_count = b.ncols();
    // π(2), the probability that the change has not yet happened.
    let mut pre = 1.0f64;
    let mut k = 0u64;
    let mut capped = false;
    while pre >= threshold {
        if k == cap {
            capped = true;
            break;
        }
        k += 1;
        let state = if k >= tau0 { 0 } else { 1 };
        let y = inverse_cdf((0..y_count).map(|c| &b[(state, c)]), rng.random());
        let predicted_pre = pre * spec.p22;
        let predicted_post = 1.0 - predicted_pre;
        let w_post = b[(0, y)] * predicted_post;
        let w_pre = b[(1, y)] * predicted_pre;
        let sigma = w_post + w_pre;
        if sigma > 0.0 {
            pre = w_pre / sigma;
        }
    }
    PathOutcome {
        delay: spec.delay * k.saturating_sub(tau0) as f64,
        false_alarm: k < tau0,
        change_time: tau0,
        capped,
    }
}

/// Monte Carlo estimate of the Kolmogorov–Shiryayev cost of the rule
/// "announce at the first k ≥ 0 with π_k(2) < threshold".
///
/// Paths are seeded individually from `seed`, so the estimate does not
/// depend on the number of worker threads.
pub fn ks_cost_estimate(spec: &QdSpec, threshold: f64, num_paths: usize, horizon_cap: u64, seed: u64) -> Result<KsEstimate> {
    spec.check()?;
    if num_paths == 0 {
        return Err(Error::InvalidParameter {
            field: "paths".into(),
            reason: "need at least one path".into(),
        });
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "threshold".into(),
            reason: format!("{threshold} must be nonnegative"),
        });
    }
    let b = spec.observation_matrix()?;
    let outcomes: Vec<PathOutcome> = (0..num_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(spec, &b, threshold, horizon_cap, seed, i))
        .collect();
    let fa = |o: &PathOutcome| if o.false_alarm { 1.0 } else { 0.0 };
    Ok(KsEstimate {
        threshold,
        delay_term: Estimate::from_samples(outcomes.iter().map(|o| o.delay)),
        false_alarm: Estimate::from_samples(outcomes.iter().map(fa)),
        ks_cost: Estimate::from_samples(outcomes.iter().map(|o| o.delay + fa(o))),
        change_time: Estimate::from_samples(outcomes.iter().map(|o| o.change_time as f64)),
        paths: num_paths,
        seed,
        horizon_cap,
        cap_hits: outcomes.iter().filter(|o| o.capped).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;
    use nalgebra::dmatrix;

    #[test]
    fn spec_toml_round_trip() {
        let s = spec().with_continue_cost(NonlinearCost::Entropy {
            alpha: vec![0.0, 0.1],
            beta: vec![0.0, 0.0],
        });
        assert_eq!(QdSpec::from_toml_str(&s.to_toml_string()).unwrap(), s);
        let text = "p22 = 0.9\ndelay = 0.05\nobservation = [[0.8, 0.2], [0.3, 0.7]]\n";
        assert_eq!(QdSpec::from_toml_str(text).unwrap(), spec());
        assert!(matches!(
            QdSpec::from_toml_str(&text.replace("0.9", "1.0")),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(QdSpec::from_toml_str(&format!("{text}extra = 1\n")), Err(Error::Parse(_))));
    }

    fn spec() -> QdSpec {
        QdSpec::new(0.9, 0.05, &dmatrix![0.8, 0.2; 0.3, 0.7])
    }

    #[test]
    fn builds_a_valid_stopping_model() {
        let m = build_qd_model(&spec()).unwrap();
        assert!(validate_model(&m).is_valid());
        assert_eq!(m.kind(), ModelKind::StoppingTime);
        assert_eq!(m.discount(), 1.0);
        assert!((m.transition(2) - dmatrix![1.0, 0.0; 0.1, 0.9]).amax() < 1e-15);
        assert_eq!(m.cost(1), &dvector![0.0, 1.0]);
        assert_eq!(m.cost(2), &dvector![0.05, 0.0]);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = spec();
        s.delay = 0.0;
        assert!(build_qd_model(&s).is_err());
        let mut s = spec();
        s.p22 = 1.0;
        assert!(build_qd_model(&s).is_err());
        let mut s = spec();
        s.observation = vec![vec![0.5, 0.5]];
        assert!(build_qd_model(&s).is_err());
    }

    #[test]
    fn change_time_inversion_matches_the_geometric_tail() {
        // P(τ⁰ > k) = 0.9^k ⇔ τ⁰ > k exactly when 1 − U ≤ 0.9^k.
        assert_eq!(change_time(0.9, 0.0), 1);
        assert_eq!(change_time(0.9, 1.0 - 0.9 - 1e-12), 1);
        assert_eq!(change_time(0.9, 1.0 - 0.9 + 1e-12), 2);
        assert_eq!(change_time(0.0, 0.7), 1);
    }

    #[test]
    fn threshold_solution_has_the_expected_shape() {
        let (t, sol) = qd_threshold(&spec(), 200, SolverConfig::new(1e-9, 100_000)).unwrap();
        assert!(t.threshold > 0.0 && t.threshold < 1.0);
        assert_eq!(sol.policy.actions()[0], 1);
        assert!(t.value_at_prior > 0.0 && t.value_at_prior < 1.0);
    }

    #[test]
    fn sentinel_thresholds_have_closed_forms() {
        let s = spec();
        // Above 1: announce at k = 0, always a false alarm.
        let now = ks_cost_estimate(&s, 1.5, 2000, 100, 3).unwrap();
        assert_eq!(now.false_alarm.mean, 1.0);
        assert_eq!(now.delay_term.mean, 0.0);
        // Zero: never announce; no false alarms, every path capped.
        let never = ks_cost_estimate(&s, 0.0, 500, 200, 3).unwrap();
        assert_eq!(never.false_alarm.mean, 0.0);
        assert_eq!(never.cap_hits, 500);
        assert!(never.delay_term.mean > 0.05 * 150.0);
    }

    #[test]
    fn uninformative_sensor_announces_after_one_step() {
        // π₁(2) = P₂₂ < π* ≤ 1, so the alarm is false exactly when τ⁰ > 1.
        let s = QdSpec::new(0.9, 0.05, &dmatrix![0.5, 0.5; 0.5, 0.5]);
        let e = ks_cost_estimate(&s, 0.95, 100_000, 100, 11).unwrap();
        assert!((e.false_alarm.mean - 0.9).abs() < 3.0 * e.false_alarm.std_error + 1e-12);
        assert!((e.change_time.mean - s.mean_change_time()).abs() < 3.0 * e.change_time.std_error);
    }
}
