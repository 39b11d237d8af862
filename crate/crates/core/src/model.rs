//! POMDP model instances and beliefs.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costs::NonlinearCost;
use crate::error::{Error, Result};

/// Absolute per-row tolerance for stochastic matrices and beliefs.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Infinite-horizon discounted cost, discount strictly below 1.
    GeneralDiscounted,
    /// Two actions: 1 stops with a terminal cost, 2 continues.
    StoppingTime,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GeneralDiscounted => write!(f, "general_discounted"),
            ModelKind::StoppingTime => write!(f, "stopping_time"),
        }
    }
}

/// A finite POMDP with per-action transition and observation matrices,
/// linear state costs and an optional belief-dependent performance loss.
///
/// Shapes are checked on construction; stochasticity and the discount rules
/// are checked by [`validate_model`]. [`PomdpModel::new`] does both.
#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    kind: ModelKind,
    discount: f64,
    transitions: Vec<DMatrix<f64>>,
    observations: Vec<DMatrix<f64>>,
    costs: Vec<DVector<f64>>,
    nonlinear: NonlinearCost,
}

impl PomdpModel {
    /// Builds a model and rejects it if any invariant fails.
    pub fn new(
        kind: ModelKind,
        discount: f64,
        transitions: Vec<DMatrix<f64>>,
        observations: Vec<DMatrix<f64>>,
        costs: Vec<DVector<f64>>,
        nonlinear: NonlinearCost,
    ) -> Result<Self> {
        let model = Self::from_parts(kind, discount, transitions, observations, costs, nonlinear)?;
        let report = validate_model(&model);
        if report.is_valid() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    /// Builds a model checking only that the shapes agree.
    ///
    /// Used for negative-control fixtures that deliberately violate the
    /// model invariants.
    pub fn from_parts(
        kind: ModelKind,
        discount: f64,
        transitions: Vec<DMatrix<f64>>,
        observations: Vec<DMatrix<f64>>,
        costs: Vec<DVector<f64>>,
        nonlinear: NonlinearCost,
    ) -> Result<Self> {
        let num_actions = transitions.len();
        if num_actions == 0 {
            return Err(Error::DimensionMismatch("model has no actions".into()));
        }
        if observations.len() != num_actions || costs.len() != num_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} transition matrices, {} observation matrices, {} cost vectors",
                num_actions,
                observations.len(),
                costs.len()
            )));
        }
        let x = transitions[0].nrows();
        if x < 2 {
            return Err(Error::DimensionMismatch(format!(
                "model needs at least 2 states, got {x}"
            )));
        }
        for (u, p) in transitions.iter().enumerate() {
            if p.nrows() != x || p.ncols() != x {
                return Err(Error::DimensionMismatch(format!(
                    "transition[{}] is {}x{}, expected {x}x{x}",
                    u + 1,
                    p.nrows(),
                    p.ncols()
                )));
            }
        }
        for (u, b) in observations.iter().enumerate() {
            if b.nrows() != x || b.ncols() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "observation[{}] is {}x{}, expected {x} rows and at least one column",
                    u + 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        for (u, c) in costs.iter().enumerate() {
            if c.len() != x {
                return Err(Error::DimensionMismatch(format!(
                    "cost[{}] has length {}, expected {x}",
                    u + 1,
                    c.len()
                )));
            }
        }
        Ok(Self {
            kind,
            discount,
            transitions,
            observations,
            costs,
            nonlinear,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn num_states(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.len()
    }

    /// Observation alphabet size for action `u` (1-indexed).
    pub fn num_observations(&self, u: usize) -> usize {
        self.observations[u - 1].ncols()
    }

    /// Transition matrix P(u), `u` 1-indexed.
    pub fn transition(&self, u: usize) -> &DMatrix<f64> {
        &self.transitions[u - 1]
    }

    /// Observation matrix B(u), `u` 1-indexed.
    pub fn observation(&self, u: usize) -> &DMatrix<f64> {
        &self.observations[u - 1]
    }

    /// Linear cost vector c_u, `u` 1-indexed.
    pub fn cost(&self, u: usize) -> &DVector<f64> {
        &self.costs[u - 1]
    }

    pub fn nonlinear_cost(&self) -> &NonlinearCost {
        &self.nonlinear
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    pub fn costs(&self) -> &[DVector<f64>] {
        &self.costs
    }

    /// Returns a copy with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Self {
        Self {
            discount,
            ..self.clone()
        }
    }

    /// Returns a copy with a different performance loss.
    pub fn with_nonlinear_cost(&self, nonlinear: NonlinearCost) -> Self {
        Self {
            nonlinear,
            ..self.clone()
        }
    }

    pub(crate) fn check_action(&self, u: usize) -> Result<()> {
        if u == 0 || u > self.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: u,
                max: self.num_actions(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_observation(&self, y: usize, u: usize) -> Result<()> {
        self.check_action(u)?;
        let max = self.num_observations(u);
        if y == 0 || y > max {
            return Err(Error::IndexOutOfRange {
                what: "observation",
                index: y,
                max,
            });
        }
        Ok(())
    }

    /// True when every action shares the same transition matrix.
    pub fn has_common_transition(&self) -> bool {
        self.transitions
            .iter()
            .all(|p| p == &self.transitions[0])
    }
}

/// One failed model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Which part of the model failed, e.g. `transition[1] row 2`.
    pub location: String,
    pub message: String,
    /// Size of the defect (absolute deviation from the rule).
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>, magnitude: f64) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
            magnitude,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {} (defect {:e})", v.location, v.message, v.magnitude)?;
        }
        Ok(())
    }
}

fn check_stochastic(report: &mut ValidationReport, name: &str, m: &DMatrix<f64>) {
    for (r, row) in m.row_iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                report.push(
                    format!("{name} row {} column {}", r + 1, c + 1),
                    format!("entry {v} is negative or not finite"),
                    if v.is_finite() { -v } else { f64::INFINITY },
                );
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || !sum.is_finite() {
            report.push(
                format!("{name} row {}", r + 1),
                format!("row sum {sum} ≠ 1"),
                (sum - 1.0).abs(),
            );
        }
    }
}

/// Checks every model invariant and lists the failures.
pub fn validate_model(model: &PomdpModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (u, p) in model.transitions.iter().enumerate() {
        check_stochastic(&mut report, &format!("transition[{}]", u + 1), p);
    }
    for (u, b) in model.observations.iter().enumerate() {
        check_stochastic(&mut report, &format!("observation[{}]", u + 1), b);
    }
    for (u, c) in model.costs.iter().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            report.push(format!("cost[{}]", u + 1), "cost entry not finite", f64::INFINITY);
        }
    }

    let rho = model.discount;
    if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
        report.push(
            "discount",
            format!("discount {rho} outside [0, 1]"),
            if rho < 0.0 { -rho } else { rho - 1.0 },
        );
    } else if rho >= 1.0 && model.kind == ModelKind::GeneralDiscounted {
        report.push(
            "discount",
            "discount 1 is only permitted for stopping_time models; general_discounted needs discount < 1",
            rho - 1.0 + f64::EPSILON,
        );
    }
    if model.kind == ModelKind::StoppingTime && model.num_actions() != 2 {
        report.push(
            "num_actions",
            format!(
                "stopping_time models need exactly 2 actions (1 = stop, 2 = continue), got {}",
                model.num_actions()
            ),
            (model.num_actions() as f64 - 2.0).abs(),
        );
    }

    for v in model
        .nonlinear
        .violations(model.num_states(), model.num_actions())
    {
        report.violations.push(v);
    }
    report
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidBelief(format!("entry {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Normalizes a nonnegative vector with positive mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidBelief("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidBelief("weights have zero mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self(weights))
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Belief {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A nonnegative, unnormalized belief on the positive orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedBelief(Vec<f64>);

impl RelaxedBelief {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidBelief("relaxed belief entries must be nonnegative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidBelief("relaxed belief needs a positive entry".into()));
        }
        Ok(Self(weights))
    }

    /// Wraps a possibly all-zero vector, as produced by the relaxed update.
    pub(crate) fn from_vec_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, kappa: f64) -> Self {
        Self(self.0.iter().map(|w| w * kappa).collect())
    }
}

impl From<Belief> for RelaxedBelief {
    fn from(b: Belief) -> Self {
        Self(b.0)
    }
}

/// The vertex e_i of the simplex, `i` 1-indexed.
pub fn unit_belief(i: usize, num_states: usize) -> Result<Belief> {
    if i == 0 || i > num_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: i,
            max: num_states,
        });
    }
    let mut probs = vec![0.0; num_states];
    probs[i - 1] = 1.0;
    Ok(Belief(probs))
}

/// The centroid of the simplex.
pub fn uniform_belief(num_states: usize) -> Result<Belief> {
    if num_states == 0 {
        return Err(Error::InvalidBelief("uniform belief over zero states".into()));
    }
    Ok(Belief(vec![1.0 / num_states as f64; num_states]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn two_state(p: DMatrix<f64>, rho: f64, kind: ModelKind) -> PomdpModel {
        let b = dmatrix![0.8, 0.2; 0.3, 0.7];
        let c = DVector::from_vec(vec![0.0, 1.0]);
        let (ps, bs, cs) = if kind == ModelKind::StoppingTime {
            (vec![p.clone(), p], vec![b.clone(), b], vec![c.clone(), c])
        } else {
            (vec![p], vec![b], vec![c])
        };
        PomdpModel::from_parts(kind, rho, ps, bs, cs, NonlinearCost::None).unwrap()
    }

    #[test]
    fn valid_model_has_empty_report() {
        let m = two_state(dmatrix![1.0, 0.0; 0.1, 0.9], 0.9, ModelKind::GeneralDiscounted);
        assert!(validate_model(&m).is_valid());
    }

    #[test]
    fn short_row_is_reported() {
        let m = two_state(dmatrix![0.5, 0.4; 0.1, 0.9], 0.9, ModelKind::GeneralDiscounted);
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.location, "transition[1] row 1");
        assert!(v.message.contains("row sum 0.9 ≠ 1"), "{}", v.message);
        assert!((v.magnitude - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unit_discount_needs_stopping_kind() {
        let m = two_state(dmatrix![1.0, 0.0; 0.1, 0.9], 1.0, ModelKind::GeneralDiscounted);
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].location, "discount");

        let m = two_state(dmatrix![1.0, 0.0; 0.1, 0.9], 1.0, ModelKind::StoppingTime);
        assert!(validate_model(&m).is_valid());
    }

    #[test]
    fn stopping_kind_needs_two_actions() {
        let p = dmatrix![1.0, 0.0; 0.1, 0.9];
        let b = dmatrix![1.0; 1.0];
        let c = DVector::from_vec(vec![0.0, 1.0]);
        let m = PomdpModel::from_parts(
            ModelKind::StoppingTime,
            1.0,
            vec![p],
            vec![b],
            vec![c],
            NonlinearCost::None,
        )
        .unwrap();
        let report = validate_model(&m);
        assert!(report.violations.iter().any(|v| v.location == "num_actions"));
    }

    #[test]
    fn row_within_tolerance_is_accepted() {
        let m = two_state(
            dmatrix![1.0, 0.0; 0.1 + 5e-13, 0.9],
            0.5,
            ModelKind::GeneralDiscounted,
        );
        assert!(validate_model(&m).is_valid());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = PomdpModel::from_parts(
            ModelKind::GeneralDiscounted,
            0.5,
            vec![dmatrix![1.0, 0.0; 0.0, 1.0]],
            vec![dmatrix![1.0; 1.0; 1.0]],
            vec![DVector::zeros(2)],
            NonlinearCost::None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn unit_and_uniform_beliefs() {
        assert_eq!(unit_belief(1, 2).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(unit_belief(2, 3).unwrap().probs(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            unit_belief(4, 3),
            Err(Error::IndexOutOfRange { index: 4, max: 3, .. })
        ));
        assert!(unit_belief(0, 3).is_err());
        assert_eq!(uniform_belief(2).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(uniform_belief(3).unwrap().probs(), &[1.0 / 3.0; 3]);
        assert!(uniform_belief(0).is_err());
        for x in 1..8 {
            let u = uniform_belief(x).unwrap();
            assert!(Belief::new(u.into_vec()).is_ok());
            for i in 1..=x {
                assert!(Belief::new(unit_belief(i, x).unwrap().into_vec()).is_ok());
            }
        }
    }

    #[test]
    fn belief_rejects_bad_vectors() {
        assert!(Belief::new(vec![0.5, 0.4]).is_err());
        assert!(Belief::new(vec![1.5, -0.5]).is_err());
        assert!(Belief::new(vec![]).is_err());
        assert!(RelaxedBelief::new(vec![0.0, 0.0]).is_err());
        assert!(RelaxedBelief::new(vec![0.0, 3.0]).is_ok());
    }
}
