//! Named model instances used by the test suites and shipped as the CLI
//! fixture corpus.
//!
//! Cost parameters of the two-sensor fixtures are fixture choices, picked so
//! that the cheaper-to-run sensor is not dominant everywhere and the strict
//! region of the myopic bound is nonempty.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::costs::NonlinearCost;
use crate::error::Result;
use crate::model::{ModelKind, PomdpModel};
use crate::quickest::{build_qd_model, QdSpec};
use crate::structure::matrix_root;

/// Concave loss families exercised by the concavity fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostFamily {
    Linear,
    Entropy,
    MeanSquare,
    PiecewiseLinear,
}

impl CostFamily {
    pub const ALL: [CostFamily; 4] = [
        CostFamily::Linear,
        CostFamily::Entropy,
        CostFamily::MeanSquare,
        CostFamily::PiecewiseLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostFamily::Linear => "linear",
            CostFamily::Entropy => "entropy",
            CostFamily::MeanSquare => "mean_square",
            CostFamily::PiecewiseLinear => "piecewise_linear",
        }
    }
}

/// Quickest detection with P₂₂ = 0.9, d = 0.05 and B = [[0.8, 0.2], [0.3, 0.7]].
pub fn qd_spec() -> QdSpec {
    QdSpec::new(0.9, 0.05, &dmatrix![0.8, 0.2; 0.3, 0.7])
}

pub fn qd_model() -> PomdpModel {
    build_qd_model(&qd_spec()).expect("fixture is valid")
}

/// Three-state detection problem: state 1 is the absorbing post-change
/// state, states 2 and 3 are two pre-change regimes.
pub fn qd_three_state_model() -> PomdpModel {
    let d = 0.05;
    let b = dmatrix![
        0.7, 0.2, 0.1;
        0.2, 0.5, 0.3;
        0.1, 0.3, 0.6
    ];
    PomdpModel::new(
        ModelKind::StoppingTime,
        1.0,
        vec![
            DMatrix::identity(3, 3),
            dmatrix![
                1.0, 0.0, 0.0;
                0.05, 0.9, 0.05;
                0.02, 0.08, 0.9
            ],
        ],
        vec![b.clone(), b],
        vec![dvector![0.0, 1.0, 1.0], dvector![d, 0.0, 0.0]],
        NonlinearCost::None,
    )
    .expect("fixture is valid")
}

fn base_two_state(nonlinear: NonlinearCost) -> PomdpModel {
    PomdpModel::new(
        ModelKind::GeneralDiscounted,
        0.9,
        vec![dmatrix![0.9, 0.1; 0.2, 0.8], dmatrix![0.6, 0.4; 0.3, 0.7]],
        vec![dmatrix![0.8, 0.2; 0.3, 0.7], dmatrix![0.6, 0.3, 0.1; 0.1, 0.3, 0.6]],
        vec![dvector![1.0, 0.4], dvector![0.6, 0.9]],
        nonlinear,
    )
    .expect("fixture is valid")
}

fn base_three_state(nonlinear: NonlinearCost) -> PomdpModel {
    PomdpModel::new(
        ModelKind::GeneralDiscounted,
        0.9,
        vec![
            dmatrix![0.8, 0.1, 0.1; 0.1, 0.8, 0.1; 0.2, 0.2, 0.6],
            dmatrix![0.6, 0.3, 0.1; 0.2, 0.6, 0.2; 0.1, 0.3, 0.6],
        ],
        vec![
            dmatrix![0.7, 0.3; 0.5, 0.5; 0.2, 0.8],
            dmatrix![0.8, 0.1, 0.1; 0.1, 0.8, 0.1; 0.1, 0.1, 0.8],
        ],
        vec![dvector![1.0, 0.5, 0.2], dvector![0.7, 0.8, 0.9]],
        nonlinear,
    )
    .expect("fixture is valid")
}

fn scales(alpha: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    (alpha.to_vec(), vec![0.0, 0.0])
}

/// Discounted two-action model with the given concave loss, on 2 or 3
/// states. The piecewise-linear family is concave only on 2 states.
pub fn concave_fixture(num_states: usize, family: CostFamily) -> PomdpModel {
    let (alpha, beta) = scales([1.0, 0.5]);
    let nonlinear = match family {
        CostFamily::Linear => NonlinearCost::None,
        CostFamily::Entropy => NonlinearCost::Entropy { alpha, beta },
        CostFamily::MeanSquare => NonlinearCost::MeanSquare {
            weight: if num_states == 2 {
                vec![vec![1.0, 0.2], vec![0.2, 0.5]]
            } else {
                vec![vec![1.0, 0.2, 0.0], vec![0.2, 0.8, 0.1], vec![0.0, 0.1, 0.6]]
            },
            alpha,
            beta,
        },
        CostFamily::PiecewiseLinear => NonlinearCost::PiecewiseLinear { epsilon: 0.2 },
    };
    match num_states {
        2 => base_two_state(nonlinear),
        3 => base_three_state(nonlinear),
        _ => panic!("concavity fixtures exist for 2 and 3 states"),
    }
}

/// Negative control: entropy with negative weight, i.e. a convex loss.
/// Bypasses validation.
pub fn negated_entropy_fixture(num_states: usize) -> PomdpModel {
    let model = concave_fixture(num_states, CostFamily::Linear);
    PomdpModel::from_parts(
        model.kind(),
        model.discount(),
        model.transitions().to_vec(),
        model.observations().to_vec(),
        model.costs().to_vec(),
        NonlinearCost::Entropy {
            alpha: vec![-1.0, -0.5],
            beta: vec![0.0, 0.0],
        },
    )
    .expect("shapes agree")
}

/// Sensor 1 is a predictor (uninformative), sensor 2 a filter. Using the
/// filter costs 0.3 per step but scales the entropy loss by 0.4.
pub fn filter_vs_predictor() -> PomdpModel {
    let p = dmatrix![0.8, 0.2; 0.3, 0.7];
    PomdpModel::new(
        ModelKind::GeneralDiscounted,
        0.9,
        vec![p.clone(), p],
        vec![DMatrix::from_element(2, 2, 0.5), dmatrix![0.9, 0.1; 0.2, 0.8]],
        vec![dvector![0.0, 0.0], dvector![0.3, 0.3]],
        NonlinearCost::Entropy {
            alpha: vec![1.0, 0.4],
            beta: vec![0.0, 0.0],
        },
    )
    .expect("fixture is valid")
}

/// Symmetric stochastic ultrametric matrix on two states.
pub fn ultrametric_two() -> DMatrix<f64> {
    dmatrix![0.6, 0.4; 0.4, 0.6]
}

/// Symmetric stochastic ultrametric matrix on three states.
pub fn ultrametric_three() -> DMatrix<f64> {
    dmatrix![0.6, 0.3, 0.1; 0.3, 0.6, 0.1; 0.1, 0.1, 0.8]
}

/// Two sensors B (action 1) and B^{1/2} (action 2) for B =
/// [[0.6, 0.4], [0.4, 0.6]]. The sharper sensor costs 0.2 per step and scales
/// the entropy loss by 0.6.
pub fn ultrametric_chain() -> Result<PomdpModel> {
    let b = ultrametric_two();
    let root = matrix_root(&b, 2)?;
    let p = dmatrix![0.9, 0.1; 0.2, 0.8];
    PomdpModel::new(
        ModelKind::GeneralDiscounted,
        0.9,
        vec![p.clone(), p],
        vec![b, root],
        vec![dvector![0.0, 0.0], dvector![0.2, 0.2]],
        NonlinearCost::Entropy {
            alpha: vec![1.0, 0.6],
            beta: vec![0.0, 0.0],
        },
    )
}

fn monotone_with_costs(c1: DVector<f64>, c2: DVector<f64>) -> PomdpModel {
    PomdpModel::new(
        ModelKind::GeneralDiscounted,
        0.9,
        vec![dmatrix![0.9, 0.1; 0.3, 0.7], dmatrix![0.7, 0.3; 0.2, 0.8]],
        vec![dmatrix![0.8, 0.2; 0.3, 0.7], dmatrix![0.6, 0.3, 0.1; 0.2, 0.3, 0.5]],
        vec![c1, c2],
        NonlinearCost::None,
    )
    .expect("fixture is valid")
}

/// TP2 transitions and observations with costs decreasing in the state.
pub fn monotone_fixture() -> PomdpModel {
    monotone_with_costs(dvector![2.0, 0.5], dvector![1.5, 1.0])
}

/// Same dynamics as [`monotone_fixture`] with costs increasing in the state.
pub fn increasing_cost_fixture() -> PomdpModel {
    monotone_with_costs(dvector![0.5, 2.0], dvector![1.0, 1.5])
}

/// Three-state linear-cost model for the homogeneity check.
pub fn linear_three_state() -> PomdpModel {
    concave_fixture(3, CostFamily::Linear)
}

/// Non-TP2 observation matrix for negative-control order checks.
pub fn non_tp2_observation() -> DMatrix<f64> {
    dmatrix![0.1, 0.9; 0.8, 0.2]
}

/// [`monotone_fixture`] with sensor 1 replaced by [`non_tp2_observation`].
pub fn non_tp2_model() -> PomdpModel {
    let m = monotone_fixture();
    let mut observations = m.observations().to_vec();
    observations[0] = non_tp2_observation();
    PomdpModel::new(
        m.kind(),
        m.discount(),
        m.transitions().to_vec(),
        observations,
        m.costs().to_vec(),
        NonlinearCost::None,
    )
    .expect("fixture is valid")
}

/// Every model in the shipped corpus, by file stem.
pub fn corpus() -> Result<Vec<(String, PomdpModel)>> {
    let mut all = vec![
        ("quickest_detection".to_string(), qd_model()),
        ("quickest_detection_3state".to_string(), qd_three_state_model()),
        ("filter_vs_predictor".to_string(), filter_vs_predictor()),
        ("ultrametric_chain".to_string(), ultrametric_chain()?),
        ("monotone".to_string(), monotone_fixture()),
        ("increasing_cost".to_string(), increasing_cost_fixture()),
        ("non_tp2".to_string(), non_tp2_model()),
        ("negated_entropy".to_string(), negated_entropy_fixture(2)),
    ];
    for x in [2, 3] {
        for f in CostFamily::ALL {
            if x == 3 && f == CostFamily::PiecewiseLinear {
                continue;
            }
            all.push((format!("concave_{}_x{x}", f.name()), concave_fixture(x, f)));
        }
    }
    Ok(all)
}
