//! Command-line arguments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pomdp-sensing", version, about = "Solve controlled-sensing POMDPs and verify structural properties of their solutions")]
pub struct Cli {
    /// Directory for result artifacts.
    #[arg(long, global = true, env = "POMDP_SENSING_OUT", default_value = ".")]
    pub out: PathBuf,

    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check a model file and list every violated model invariant.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Value iteration on the belief grid; writes values, Q-values and policy.
    Solve(SolveArgs),
    /// Value iteration for the relaxed (unnormalized-belief) problem.
    SolveRelaxed(SolveArgs),
    /// Run structural verifiers on a model.
    Verify(VerifyArgs),
    /// Optimal threshold of a quickest-detection problem.
    QdThreshold(QdArgs),
    /// Monte Carlo estimate of the detection cost of a threshold rule.
    QdSimulate(QdSimulateArgs),
    /// Blackwell dominance between the two sensors and the myopic bound.
    Blackwell(BlackwellArgs),
    /// Root of a symmetric ultrametric stochastic matrix and its dominance chain.
    UltrametricRoot(RootArgs),
    /// Monte Carlo cost of one policy from one or more initial beliefs.
    Evaluate(EvaluateArgs),
    /// Paired comparison of two policies.
    Compare(CompareArgs),
    /// Search random non-TP2 models for a violation of MLR monotonicity.
    ConjectureProbe(ConjectureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// Model file (TOML).
    #[arg(long)]
    pub model: PathBuf,

    /// Grid resolution M.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,

    /// Value iteration stops when the sup-norm change falls below this.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    /// Midpoint concavity of V on the grid.
    Concavity,
    /// Convexity of the stop region.
    StoppingConvex,
    /// Single-switch threshold rule that stops at π(2) = 0 (two states).
    Threshold,
    /// V decreasing in the MLR order.
    MlrMonotone,
    /// Positive homogeneity of the relaxed value function.
    Homogeneity,
    /// TP2 transition and observation matrices.
    Tp2,
    /// Symmetric ultrametric observation matrices.
    Ultrametric,
    /// Costs decreasing in the first-order stochastic order.
    CostFosd,
    /// Blackwell dominance and the myopic policy bound.
    MyopicBound,
}

impl Predicate {
    pub fn name(self) -> &'static str {
        match self {
            Predicate::Concavity => "concavity",
            Predicate::StoppingConvex => "stopping-convex",
            Predicate::Threshold => "threshold",
            Predicate::MlrMonotone => "mlr-monotone",
            Predicate::Homogeneity => "homogeneity",
            Predicate::Tp2 => "tp2",
            Predicate::Ultrametric => "ultrametric",
            Predicate::CostFosd => "cost-fosd",
            Predicate::MyopicBound => "myopic-bound",
        }
    }

    pub fn needs_solution(self) -> bool {
        matches!(
            self,
            Predicate::Concavity
                | Predicate::StoppingConvex
                | Predicate::Threshold
                | Predicate::MlrMonotone
                | Predicate::MyopicBound
        )
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    /// Comma-separated predicates to check.
    #[arg(long, value_delimiter = ',', required = true)]
    pub predicates: Vec<Predicate>,

    /// Scales κ for the homogeneity check.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.5,1,2,7.3")]
    pub kappa: Vec<f64>,

    /// Tolerance for value-function checks, relative to max|V|.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,

    /// Random samples for the homogeneity and cost-order checks.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QdArgs {
    /// Quickest-detection spec (TOML with p22, delay, observation).
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long, default_value_t = 1000)]
    pub grid: usize,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QdSimulateArgs {
    #[command(flatten)]
    pub qd: QdArgs,

    /// Threshold π*; computed on the grid when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,

    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,

    /// Steps after which a path is charged as if it announced.
    #[arg(long, default_value_t = pomdp_sensing::quickest::DEFAULT_HORIZON_CAP)]
    pub horizon_cap: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BlackwellArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    /// Jensen-gap tolerance relative to max|V|.
    #[arg(long, default_value_t = 1e-8)]
    pub jensen_tol: f64,

    /// Absolute tolerance for Q(π,2) ≤ Q(π,1) on the strict region.
    #[arg(long, default_value_t = 1e-9)]
    pub q_tol: f64,

    /// Margin defining the strict region {C(π,2) < C(π,1) − margin}.
    #[arg(long, default_value_t = pomdp_sensing::structure::STRICTNESS_MARGIN)]
    pub margin: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RootArgs {
    /// Matrix file (TOML, `matrix = [[...], ...]`).
    #[arg(long)]
    pub matrix: PathBuf,

    /// Root degree U.
    #[arg(long, default_value_t = 2)]
    pub root_degree: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    /// Initial belief as comma-separated probabilities; repeat for several.
    /// Defaults to the uniform belief.
    #[arg(long = "prior")]
    pub priors: Vec<PriorArg>,

    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,

    /// Discount-truncation tolerance that sets the simulation horizon.
    #[arg(long, default_value_t = 1e-4)]
    pub sim_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    /// optimal, myopic, constant:U or threshold:P.
    #[arg(long, default_value = "optimal")]
    pub policy: PolicyArg,

    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    /// First policy; the check is that it is not worse than the second.
    #[arg(long, default_value = "optimal")]
    pub policy: PolicyArg,

    /// Second policy.
    #[arg(long, default_value = "myopic")]
    pub against: PolicyArg,

    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConjectureArgs {
    /// Number of random models.
    #[arg(long, default_value_t = 50)]
    pub models: usize,

    #[arg(long, default_value_t = 200)]
    pub grid: usize,

    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,

    /// Monotonicity tolerance relative to max|V|.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,

    #[arg(long, default_value_t = 2)]
    pub actions: usize,

    /// Largest observation alphabet of a generated sensor.
    #[arg(long, default_value_t = 3)]
    pub observations: usize,

    #[arg(long, default_value_t = 0.8)]
    pub discount: f64,
}

/// Policy selector for simulation commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Optimal,
    Myopic,
    Constant(usize),
    Threshold(f64),
}

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "optimal" => Ok(PolicyArg::Optimal),
            None if s == "myopic" => Ok(PolicyArg::Myopic),
            Some(("constant", u)) => u
                .parse()
                .ok()
                .filter(|&u| u >= 1)
                .map(PolicyArg::Constant)
                .ok_or_else(|| format!("constant:{u}: action must be an integer ≥ 1")),
            Some(("threshold", p)) => p
                .parse()
                .map(PolicyArg::Threshold)
                .map_err(|_| format!("threshold:{p}: not a number")),
            _ => Err(format!(
                "unknown policy `{s}`; expected optimal, myopic, constant:U or threshold:P"
            )),
        }
    }
}

impl fmt::Display for PolicyArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyArg::Optimal => write!(f, "optimal"),
            PolicyArg::Myopic => write!(f, "myopic"),
            PolicyArg::Constant(u) => write!(f, "constant:{u}"),
            PolicyArg::Threshold(p) => write!(f, "threshold:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PriorArg(pub Vec<f64>);

impl FromStr for PriorArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a probability")))
            .collect::<Result<Vec<_>, _>>()
            .map(PriorArg)
    }
}
