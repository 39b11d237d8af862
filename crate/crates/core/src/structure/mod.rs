//! Numerical certificates for structural properties of solved models.
//!
//! Every verifier returns an [`OrderCheckReport`] carrying the worst margin it
//! saw, not just a verdict, so borderline instances can be audited. A report
//! holds exactly when its worst violation does not exceed its tolerance;
//! negative worst violations mean every checked instance had slack.

mod blackwell;
mod orders;
mod ultrametric;
mod value;

use serde::Serialize;

pub use blackwell::{
    blackwell_factorize, verify_myopic_bound, BlackwellFactorization, MyopicBoundReport,
    DOMINANCE_RESIDUAL, STRICTNESS_MARGIN,
};
pub use orders::{
    fosd_decreasing_cost, fosd_geq, is_tp2, mlr_geq, tp2_observation_permutation, ORDER_TOL,
};
pub use ultrametric::{is_ultrametric, matrix_power, matrix_root};
pub use value::{
    conjecture_probe, verify_concavity, verify_homogeneity, verify_mlr_monotone_value,
    verify_stopping_set_convex, ConjectureGenerator, ConjectureSummary, Counterexample,
    MAX_PAIRS,
};

/// Location of the worst violation found by a verifier. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A 2×2 minor a_ik a_jl − a_il a_jk.
    Minor {
        rows: (usize, usize),
        cols: (usize, usize),
        value: f64,
    },
    /// Two beliefs (or relaxed beliefs) that violate an ordering claim.
    Beliefs { first: Vec<f64>, second: Vec<f64> },
    /// Two grid points, with their coordinates.
    GridPair {
        first: usize,
        second: usize,
        first_belief: Vec<f64>,
        second_belief: Vec<f64>,
    },
    /// A single grid point.
    GridPoint { index: usize, belief: Vec<f64> },
    /// A relaxed belief and scale at which homogeneity was tested.
    Scaling {
        check: String,
        alpha: Vec<f64>,
        kappa: f64,
    },
    /// Matrix entries named by a condition, e.g. a row or an (i, j, k) triple.
    Entries {
        condition: String,
        indices: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderCheckReport {
    pub predicate: String,
    pub holds: bool,
    /// Largest defect seen; ≤ 0 means every instance had slack. Zero when
    /// nothing was checked.
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    /// Number of instances (pairs, points, minors, ...) checked.
    pub samples: usize,
}

impl OrderCheckReport {
    pub fn new(
        predicate: impl Into<String>,
        worst: Option<(f64, Witness)>,
        tolerance: f64,
        samples: usize,
    ) -> Self {
        let (worst_violation, witness) = match worst {
            Some((v, w)) => (v, Some(w)),
            None => (0.0, None),
        };
        Self {
            predicate: predicate.into(),
            holds: worst_violation <= tolerance,
            worst_violation,
            witness,
            tolerance,
            samples,
        }
    }
}

/// Running maximum of (defect, witness) that keeps the earliest index on
/// ties, so parallel reductions are independent of how work is split.
#[derive(Debug, Clone)]
pub(crate) struct Worst<W> {
    pub defect: f64,
    pub order: u64,
    pub witness: Option<W>,
}

impl<W> Worst<W> {
    pub fn none() -> Self {
        Self {
            defect: f64::NEG_INFINITY,
            order: u64::MAX,
            witness: None,
        }
    }

    #[cfg(test)]
    pub fn of(defect: f64, order: u64, witness: W) -> Self {
        Self {
            defect,
            order,
            witness: Some(witness),
        }
    }

    pub fn offer(&mut self, defect: f64, order: u64, witness: impl FnOnce() -> W) {
        if defect > self.defect || (defect == self.defect && order < self.order) {
            self.defect = defect;
            self.order = order;
            self.witness = Some(witness());
        }
    }

    pub fn merge(self, other: Self) -> Self {
        if other.defect > self.defect || (other.defect == self.defect && other.order < self.order) {
            other
        } else {
            self
        }
    }

    pub fn into_option(self) -> Option<(f64, W)> {
        self.witness.map(|w| (self.defect, w))
    }
}
