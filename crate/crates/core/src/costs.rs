//! Belief-dependent performance losses D(π,u) and the instantaneous cost
//! C(π,u) = c_u'π + D(π,u).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ModelKind, PomdpModel, Violation};
use crate::rng::sample_simplex;

/// Family of the performance loss. Per-action weights `alpha` scale the loss
/// and `beta` translates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearCost {
    #[default]
    None,
    /// Three-level quantized estimation error with breakpoint `epsilon`.
    PiecewiseLinear { epsilon: f64 },
    /// Weighted squared error of the Bayesian estimate.
    MeanSquare {
        weight: Vec<Vec<f64>>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    },
    L1 { alpha: Vec<f64>, beta: Vec<f64> },
    Linf { alpha: Vec<f64>, beta: Vec<f64> },
    /// Shannon entropy of the belief, in bits.
    Entropy { alpha: Vec<f64>, beta: Vec<f64> },
}

impl NonlinearCost {
    pub fn name(&self) -> &'static str {
        match self {
            NonlinearCost::None => "none",
            NonlinearCost::PiecewiseLinear { .. } => "piecewise_linear",
            NonlinearCost::MeanSquare { .. } => "mean_square",
            NonlinearCost::L1 { .. } => "l1",
            NonlinearCost::Linf { .. } => "linf",
            NonlinearCost::Entropy { .. } => "entropy",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, NonlinearCost::None)
    }

    fn scales(&self) -> Option<(&[f64], &[f64])> {
        match self {
            NonlinearCost::MeanSquare { alpha, beta, .. }
            | NonlinearCost::L1 { alpha, beta }
            | NonlinearCost::Linf { alpha, beta }
            | NonlinearCost::Entropy { alpha, beta } => Some((alpha, beta)),
            _ => None,
        }
    }

    /// Invariant failures for a model with `x` states and `u` actions.
    pub fn violations(&self, x: usize, u: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |location: &str, message: String, magnitude: f64| {
            out.push(Violation {
                location: format!("nonlinear_cost.{location}"),
                message,
                magnitude,
            })
        };
        if let NonlinearCost::PiecewiseLinear { epsilon } = self {
            if !(0.0..=0.5).contains(epsilon) {
                let defect = if *epsilon < 0.0 { -epsilon } else { epsilon - 0.5 };
                push("epsilon", format!("epsilon {epsilon} outside [0, 0.5]"), defect);
            }
        }
        if let Some((alpha, beta)) = self.scales() {
            if alpha.len() != u {
                push(
                    "alpha",
                    format!("{} weights for {u} actions", alpha.len()),
                    (alpha.len() as f64 - u as f64).abs(),
                );
            }
            if beta.len() != u {
                push(
                    "beta",
                    format!("{} offsets for {u} actions", beta.len()),
                    (beta.len() as f64 - u as f64).abs(),
                );
            }
            for (i, a) in alpha.iter().enumerate() {
                if !(a.is_finite() && *a > 0.0) {
                    push(&format!("alpha[{}]", i + 1), format!("alpha {a} must be > 0"), -a);
                }
            }
            for (i, b) in beta.iter().enumerate() {
                if !(b.is_finite() && *b >= 0.0) {
                    push(&format!("beta[{}]", i + 1), format!("beta {b} must be >= 0"), -b);
                }
            }
        }
        if let NonlinearCost::MeanSquare { weight, .. } = self {
            if weight.len() != x || weight.iter().any(|r| r.len() != x) {
                push("weight", format!("weight matrix must be {x}x{x}"), 1.0);
            } else {
                let m = DMatrix::from_fn(x, x, |i, j| weight[i][j]);
                let asym = (0..x)
                    .flat_map(|i| (0..x).map(move |j| (i, j)))
                    .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
                    .fold(0.0, f64::max);
                if asym > 1e-12 {
                    push("weight", format!("weight matrix not symmetric (defect {asym:e})"), asym);
                } else {
                    let min_eig = SymmetricEigen::new(m).eigenvalues.min();
                    if min_eig < -1e-10 {
                        push(
                            "weight",
                            format!("weight matrix has eigenvalue {min_eig:e} < 0"),
                            -min_eig,
                        );
                    }
                }
            }
        }
        out
    }

    /// Upper bound on |D(π,u)| over the simplex, used for horizon selection.
    pub fn magnitude_bound(&self, x: usize) -> f64 {
        let scale = |alpha: &[f64], beta: &[f64], base: f64| {
            alpha
                .iter()
                .zip(beta)
                .map(|(a, b)| a.abs() * base + b.abs())
                .fold(0.0, f64::max)
        };
        match self {
            NonlinearCost::None => 0.0,
            NonlinearCost::PiecewiseLinear { .. } => 1.0,
            NonlinearCost::MeanSquare { weight, alpha, beta } => {
                let total: f64 = weight.iter().flatten().map(|w| w.abs()).sum();
                scale(alpha, beta, total)
            }
            NonlinearCost::L1 { alpha, beta } => scale(alpha, beta, 2.0),
            NonlinearCost::Linf { alpha, beta } => scale(alpha, beta, 1.0),
            NonlinearCost::Entropy { alpha, beta } => scale(alpha, beta, (x as f64).log2()),
        }
    }
}

/// Per-state loss d(e_i, π) of the piecewise-linear family.
///
/// The sup-norm distance between a vertex e_i and π is 1 − π(i). The middle
/// band [ε, 1 − ε] is closed, so a distance exactly at either breakpoint
/// costs ε. Breakpoint comparisons allow 1e-12 of rounding so that
/// 1 − (1 − ε) still counts as ε.
pub fn piecewise_state_loss(epsilon: f64, distance: f64) -> f64 {
    const BREAKPOINT_TOL: f64 = 1e-12;
    if distance < epsilon - BREAKPOINT_TOL {
        0.0
    } else if distance <= 1.0 - epsilon + BREAKPOINT_TOL {
        epsilon
    } else {
        1.0
    }
}

/// D(π,u) for action `u` (1-indexed).
pub fn performance_loss(cost: &NonlinearCost, pi: &[f64], u: usize) -> f64 {
    let idx = u - 1;
    let purity = || pi.iter().map(|p| p * p).sum::<f64>();
    match cost {
        NonlinearCost::None => 0.0,
        NonlinearCost::PiecewiseLinear { epsilon } => pi
            .iter()
            .map(|&p| piecewise_state_loss(*epsilon, 1.0 - p) * p)
            .sum(),
        NonlinearCost::MeanSquare { weight, alpha, beta } => {
            let diag: f64 = pi.iter().enumerate().map(|(i, p)| weight[i][i] * p).sum();
            let quad: f64 = pi
                .iter()
                .enumerate()
                .map(|(i, pi_i)| {
                    pi_i * pi
                        .iter()
                        .enumerate()
                        .map(|(j, pi_j)| weight[i][j] * pi_j)
                        .sum::<f64>()
                })
                .sum();
            alpha[idx] * (diag - quad) + beta[idx]
        }
        NonlinearCost::L1 { alpha, beta } => alpha[idx] * 2.0 * (1.0 - purity()) + beta[idx],
        NonlinearCost::Linf { alpha, beta } => alpha[idx] * (1.0 - purity()) + beta[idx],
        NonlinearCost::Entropy { alpha, beta } => {
            let h: f64 = pi
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| -p * p.log2())
                .sum();
            alpha[idx] * h + beta[idx]
        }
    }
}

/// C(π,u) = c_u'π + D(π,u).
///
/// In stopping-time models the stop action carries only its terminal cost
/// c_1'π; the performance loss applies to the continue action.
pub fn instantaneous_cost(model: &PomdpModel, pi: &[f64], u: usize) -> f64 {
    let linear: f64 = model.cost(u).iter().zip(pi).map(|(c, p)| c * p).sum();
    if model.kind() == ModelKind::StoppingTime && u == 1 {
        return linear;
    }
    linear + performance_loss(model.nonlinear_cost(), pi, u)
}

/// Largest |C(π,u)| over beliefs and actions, as a bound.
pub fn cost_bound(model: &PomdpModel) -> f64 {
    let linear = model
        .costs()
        .iter()
        .flat_map(|c| c.iter())
        .map(|c| c.abs())
        .fold(0.0, f64::max);
    linear + model.nonlinear_cost().magnitude_bound(model.num_states())
}

/// Outcome of a sampled midpoint-concavity test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityProbe {
    /// Largest λC(π₁)+(1−λ)C(π₂) − C(λπ₁+(1−λ)π₂) seen.
    pub worst_violation: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>, f64)>,
    pub trials: usize,
    pub tolerance: f64,
    pub concave: bool,
}

/// Samples random (π₁, π₂, λ) and records the worst concavity defect of
/// D(·,u) on the `num_states`-simplex. The linear part c_u'π cannot affect
/// concavity and is omitted.
pub fn concavity_probe(
    cost: &NonlinearCost,
    num_states: usize,
    u: usize,
    num_trials: usize,
    tolerance: f64,
    seed: u64,
) -> ConcavityProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut mid = vec![0.0; num_states];
    for _ in 0..num_trials.max(1) {
        let a = sample_simplex(&mut rng, num_states);
        let b = sample_simplex(&mut rng, num_states);
        let lambda: f64 = rng.random();
        for i in 0..num_states {
            mid[i] = lambda * a[i] + (1.0 - lambda) * b[i];
        }
        let chord = lambda * performance_loss(cost, &a, u)
            + (1.0 - lambda) * performance_loss(cost, &b, u);
        let defect = chord - performance_loss(cost, &mid, u);
        if defect > worst {
            worst = defect;
            witness = Some((a, b, lambda));
        }
    }
    ConcavityProbe {
        worst_violation: worst,
        witness,
        trials: num_trials.max(1),
        tolerance,
        concave: worst <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{uniform_belief, unit_belief};
    use crate::rng::sample_simplex;
    use nalgebra::{dmatrix, DVector};
    use proptest::prelude::*;

    fn entropy(alpha: f64, beta: f64) -> NonlinearCost {
        NonlinearCost::Entropy {
            alpha: vec![alpha],
            beta: vec![beta],
        }
    }

    fn mean_square_identity(x: usize) -> NonlinearCost {
        NonlinearCost::MeanSquare {
            weight: (0..x)
                .map(|i| (0..x).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            alpha: vec![1.0],
            beta: vec![0.0],
        }
    }

    /// Σ_i d(e_i, π) π(i) evaluated from the per-state losses directly.
    fn expected_state_loss(pi: &[f64], d: impl Fn(usize, &[f64]) -> f64) -> f64 {
        (0..pi.len()).map(|i| d(i, pi) * pi[i]).sum()
    }

    fn vertex_distance(i: usize, pi: &[f64], norm: impl Fn(&[f64]) -> f64) -> f64 {
        let diff: Vec<f64> = pi
            .iter()
            .enumerate()
            .map(|(j, p)| if i == j { 1.0 - p } else { -p })
            .collect();
        norm(&diff)
    }

    #[test]
    fn entropy_vanishes_at_vertices() {
        let e1 = unit_belief(1, 3).unwrap();
        assert_eq!(performance_loss(&entropy(1.0, 0.0), e1.probs(), 1), 0.0);
    }

    #[test]
    fn mean_square_identity_at_centroid() {
        let pi = [0.5, 0.5];
        assert!((performance_loss(&mean_square_identity(2), &pi, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_matches_direct_expectation() {
        let pi = [0.3, 0.7];
        let cost = NonlinearCost::L1 {
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        let oracle = expected_state_loss(&pi, |i, p| {
            vertex_distance(i, p, |v| v.iter().map(|x| x.abs()).sum())
        });
        assert!((oracle - 0.84).abs() < 1e-12);
        assert!((performance_loss(&cost, &pi, 1) - 0.84).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_vertex_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = vec![
            vec![2.0, 0.5, 0.1],
            vec![0.5, 1.0, 0.2],
            vec![0.1, 0.2, 1.5],
        ];
        let ms = NonlinearCost::MeanSquare {
            weight: m.clone(),
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        let l1 = NonlinearCost::L1 {
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        let linf = NonlinearCost::Linf {
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        for _ in 0..200 {
            let pi = sample_simplex(&mut rng, 3);
            let quad = |v: &[f64]| {
                (0..3)
                    .map(|i| (0..3).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>())
                    .sum::<f64>()
            };
            let ms_oracle = expected_state_loss(&pi, |i, p| vertex_distance(i, p, quad));
            assert!((performance_loss(&ms, &pi, 1) - ms_oracle).abs() < 1e-12);
            let l1_oracle = expected_state_loss(&pi, |i, p| {
                vertex_distance(i, p, |v| v.iter().map(|x| x.abs()).sum())
            });
            assert!((performance_loss(&l1, &pi, 1) - l1_oracle).abs() < 1e-12);
            let linf_oracle = expected_state_loss(&pi, |i, p| {
                vertex_distance(i, p, |v| v.iter().fold(0.0f64, |a, x| a.max(x.abs())))
            });
            assert!((performance_loss(&linf, &pi, 1) - linf_oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_breakpoints_fall_in_middle_band() {
        assert_eq!(piecewise_state_loss(0.2, 0.1), 0.0);
        assert_eq!(piecewise_state_loss(0.2, 0.2), 0.2);
        assert_eq!(piecewise_state_loss(0.2, 0.5), 0.2);
        assert_eq!(piecewise_state_loss(0.2, 0.8), 0.2);
        assert_eq!(piecewise_state_loss(0.2, 0.81), 1.0);
        assert_eq!(piecewise_state_loss(0.5, 0.5), 0.5);
        assert_eq!(piecewise_state_loss(0.0, 0.0), 0.0);
    }

    #[test]
    fn piecewise_two_state_closed_form() {
        // For X = 2 with p = π(1): D = p on [0, ε], ε on [ε, 1−ε], 1 − p above.
        let cost = NonlinearCost::PiecewiseLinear { epsilon: 0.2 };
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let expected = if p <= 0.2 {
                p
            } else if p <= 0.8 {
                0.2
            } else {
                1.0 - p
            };
            let got = performance_loss(&cost, &[p, 1.0 - p], 1);
            assert!((got - expected).abs() < 1e-12, "p={p}: {got} vs {expected}");
        }
    }

    #[test]
    fn piecewise_is_linear_away_from_kinks() {
        let cost = NonlinearCost::PiecewiseLinear { epsilon: 0.2 };
        // Segment inside the flat middle region of X = 2.
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        for k in 0..=10 {
            let l = k as f64 / 10.0;
            let mid = [l * a[0] + (1.0 - l) * b[0], l * a[1] + (1.0 - l) * b[1]];
            let chord =
                l * performance_loss(&cost, &a, 1) + (1.0 - l) * performance_loss(&cost, &b, 1);
            assert!((performance_loss(&cost, &mid, 1) - chord).abs() < 1e-12);
        }
        let probe = concavity_probe(&cost, 2, 1, 20_000, 1e-12, 3);
        assert!(probe.concave, "{probe:?}");
    }

    #[test]
    fn piecewise_is_not_concave_beyond_two_states() {
        let cost = NonlinearCost::PiecewiseLinear { epsilon: 0.2 };
        let probe = concavity_probe(&cost, 3, 1, 20_000, 1e-9, 3);
        assert!(!probe.concave);
        assert!(probe.worst_violation > 0.01);
    }

    #[test]
    fn instantaneous_cost_examples() {
        let model = PomdpModel::new(
            ModelKind::GeneralDiscounted,
            0.9,
            vec![dmatrix![1.0, 0.0; 0.0, 1.0]; 2],
            vec![dmatrix![1.0; 1.0]; 2],
            vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])],
            NonlinearCost::Entropy {
                alpha: vec![1.0, 0.5],
                beta: vec![0.0, 0.0],
            },
        )
        .unwrap();
        assert!((instantaneous_cost(&model, &[0.5, 0.5], 2) - 1.0).abs() < 1e-15);
        assert!((instantaneous_cost(&model, &[0.5, 0.5], 1) - 1.0).abs() < 1e-15);
        let linear = model.with_nonlinear_cost(NonlinearCost::None);
        assert_eq!(instantaneous_cost(&linear, &[0.25, 0.75], 2), 0.25);
    }

    #[test]
    fn concavity_probe_flags_indefinite_weight() {
        // diag(1, -1) is flat along the X = 2 simplex, so embed it in X = 3
        // where the negative direction is visible.
        let ms = NonlinearCost::MeanSquare {
            weight: vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]],
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        assert!(!ms.violations(3, 1).is_empty());
        let probe = concavity_probe(&ms, 3, 1, 1000, 1e-12, 5);
        assert!(!probe.concave);
        assert!(probe.worst_violation > 0.0);

        let good = mean_square_identity(3);
        assert!(concavity_probe(&good, 3, 1, 5000, 1e-12, 5).concave);
        assert!(concavity_probe(&entropy(1.0, 0.3), 4, 1, 5000, 1e-12, 5).concave);
    }

    #[test]
    fn spec_validation() {
        let bad = NonlinearCost::PiecewiseLinear { epsilon: 0.7 };
        assert_eq!(bad.violations(2, 2).len(), 1);
        let bad = NonlinearCost::Entropy {
            alpha: vec![0.0, 1.0],
            beta: vec![0.0, -1.0],
        };
        assert_eq!(bad.violations(2, 2).len(), 2);
        let asym = NonlinearCost::MeanSquare {
            weight: vec![vec![1.0, 0.2], vec![0.1, 1.0]],
            alpha: vec![1.0],
            beta: vec![0.0],
        };
        assert_eq!(asym.violations(2, 1).len(), 1);
    }

    fn families(x: usize) -> Vec<NonlinearCost> {
        vec![
            NonlinearCost::PiecewiseLinear { epsilon: 0.3 },
            mean_square_identity(x),
            NonlinearCost::L1 {
                alpha: vec![1.3],
                beta: vec![0.0],
            },
            NonlinearCost::Linf {
                alpha: vec![0.7],
                beta: vec![0.0],
            },
            entropy(2.0, 0.0),
        ]
    }

    proptest! {
        #[test]
        fn losses_vanish_at_vertices(x in 2usize..6, i in 0usize..6) {
            let i = i % x + 1;
            let e = unit_belief(i, x).unwrap();
            for f in families(x) {
                prop_assert!(performance_loss(&f, e.probs(), 1).abs() < 1e-15, "{}", f.name());
            }
        }

        #[test]
        fn centroid_is_maximal(seed in any::<u64>(), x in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pi = sample_simplex(&mut rng, x);
            let c = uniform_belief(x).unwrap();
            for f in [entropy(1.0, 0.0), mean_square_identity(x)] {
                prop_assert!(
                    performance_loss(&f, c.probs(), 1) >= performance_loss(&f, &pi, 1) - 1e-12
                );
            }
        }

        #[test]
        fn linf_is_half_of_l1(seed in any::<u64>(), x in 2usize..6, a in 0.1f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pi = sample_simplex(&mut rng, x);
            let l1 = NonlinearCost::L1 { alpha: vec![a], beta: vec![0.0] };
            let linf = NonlinearCost::Linf { alpha: vec![a], beta: vec![0.0] };
            prop_assert!(
                (performance_loss(&linf, &pi, 1) - 0.5 * performance_loss(&l1, &pi, 1)).abs() < 1e-12
            );
        }
    }
}
