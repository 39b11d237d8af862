//! Model file format.
//!
//! Models are TOML documents. Unknown keys are rejected. Matrices are written
//! row-major as arrays of rows; the i-th row of `transition` is
//! P(x_{k+1} = · | x_k = i) and the i-th row of `observation` is
//! P(y = · | x = i).
//!
//! ```toml
//! kind = "stopping_time"        # or "general_discounted"
//! states = 2
//! num_actions = 2
//! discount = 1.0
//!
//! [[action]]                   # action 1 (stop, for stopping_time models)
//! observations = 2
//! transition = [[1.0, 0.0], [0.0, 1.0]]
//! observation = [[0.8, 0.2], [0.3, 0.7]]
//! cost = [0.0, 1.0]
//!
//! [[action]]                   # action 2 (continue)
//! observations = 2
//! transition = [[1.0, 0.0], [0.1, 0.9]]
//! observation = [[0.8, 0.2], [0.3, 0.7]]
//! cost = [0.05, 0.0]
//!
//! [nonlinear_cost]             # optional; default family = "none"
//! family = "entropy"           # none | piecewise_linear | mean_square | l1 | linf | entropy
//! alpha = [1.0, 1.0]
//! beta = [0.0, 0.0]
//! ```
//!
//! `piecewise_linear` takes `epsilon`; `mean_square` additionally takes a
//! symmetric `weight` matrix.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costs::NonlinearCost;
use crate::error::{Error, Result};
use crate::model::{ModelKind, PomdpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub action: Vec<ActionFile>,
    #[serde(default, skip_serializing_if = "NonlinearCost::is_linear")]
    pub nonlinear_cost: NonlinearCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    pub observations: usize,
    pub transition: Vec<Vec<f64>>,
    pub observation: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
}

/// Standalone matrix file, `matrix = [[...], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub matrix: Vec<Vec<f64>>,
}

pub(crate) fn rows_to_matrix(name: &str, rows: &[Vec<f64>], ncols: Option<usize>) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = ncols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{name} row {} has {} entries, expected {ncols}",
            r + 1,
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    /// Converts to a model, checking shapes but not stochasticity.
    pub fn to_model_unchecked(&self) -> Result<PomdpModel> {
        if self.action.len() != self.num_actions {
            return Err(Error::Parse(format!(
                "num_actions = {} but {} [[action]] tables given",
                self.num_actions,
                self.action.len()
            )));
        }
        let mut transitions = Vec::new();
        let mut observations = Vec::new();
        let mut costs = Vec::new();
        for (u, a) in self.action.iter().enumerate() {
            let name = |f: &str| format!("action[{}].{f}", u + 1);
            if a.transition.len() != self.states {
                return Err(Error::Parse(format!("{} needs {} rows", name("transition"), self.states)));
            }
            if a.observation.len() != self.states {
                return Err(Error::Parse(format!("{} needs {} rows", name("observation"), self.states)));
            }
            if a.cost.len() != self.states {
                return Err(Error::Parse(format!("{} needs {} entries", name("cost"), self.states)));
            }
            transitions.push(rows_to_matrix(&name("transition"), &a.transition, Some(self.states))?);
            observations.push(rows_to_matrix(&name("observation"), &a.observation, Some(a.observations))?);
            costs.push(DVector::from_vec(a.cost.clone()));
        }
        PomdpModel::from_parts(
            self.kind,
            self.discount,
            transitions,
            observations,
            costs,
            self.nonlinear_cost.clone(),
        )
    }

    pub fn to_model(&self) -> Result<PomdpModel> {
        let model = self.to_model_unchecked()?;
        let report = crate::model::validate_model(&model);
        if report.is_valid() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    pub fn from_model(model: &PomdpModel) -> Self {
        Self {
            kind: model.kind(),
            states: model.num_states(),
            num_actions: model.num_actions(),
            discount: model.discount(),
            action: (1..=model.num_actions())
                .map(|u| ActionFile {
                    observations: model.num_observations(u),
                    transition: matrix_to_rows(model.transition(u)),
                    observation: matrix_to_rows(model.observation(u)),
                    cost: model.cost(u).iter().copied().collect(),
                })
                .collect(),
            nonlinear_cost: model.nonlinear_cost().clone(),
        }
    }
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<PomdpModel> {
    parse_model_file(text)?.to_model()
}

pub fn model_to_string(model: &PomdpModel) -> String {
    toml::to_string(&ModelFile::from_model(model)).expect("model serializes to TOML")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PomdpModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let f: MatrixFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    rows_to_matrix("matrix", &f.matrix, None)
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    toml::to_string(&MatrixFile {
        matrix: matrix_to_rows(m),
    })
    .expect("matrix serializes to TOML")
}
