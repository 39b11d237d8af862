//! One function per subcommand. Each writes its artifacts and reports
//! whether every check it ran holds.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use pomdp_sensing::schema::{load_model, matrix_to_string, parse_matrix, parse_model_file};
use pomdp_sensing::sim::{ConstantPolicy, MyopicPolicy, ThresholdPolicy};
use pomdp_sensing::structure::{
    fosd_decreasing_cost, matrix_power, ConjectureGenerator, DOMINANCE_RESIDUAL, MAX_PAIRS, ORDER_TOL,
    STRICTNESS_MARGIN,
};
use pomdp_sensing::{
    blackwell_factorize, build_grid, compare_policies, conjecture_probe, evaluate_policy, extract_threshold,
    is_tp2, is_ultrametric, ks_cost_estimate, matrix_root, qd_threshold, solve_discounted, solve_relaxed,
    solve_stopping, uniform_belief, validate_model, verify_concavity, verify_homogeneity,
    verify_mlr_monotone_value, verify_myopic_bound, verify_stopping_set_convex, Belief, BeliefPolicy, Error,
    ModelKind, PomdpModel, QdSpec, Solution, SolverConfig, Threshold,
};

use crate::args::{
    BlackwellArgs, Cli, Command, CompareArgs, ConjectureArgs, EvaluateArgs, PolicyArg, Predicate,
    QdArgs, QdSimulateArgs, RootArgs, SimArgs, SolveArgs, VerifyArgs,
};
use crate::output::{Artifacts, Csv, Field};
use crate::{CliError, Status};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli, out: &mut Artifacts) -> Result<Status> {
    let seed = cli.seed;
    match &cli.command {
        Command::Validate { model } => validate(model, out),
        Command::Solve(args) => solve(args, out),
        Command::SolveRelaxed(args) => solve_relaxed_cmd(args, out),
        Command::Verify(args) => verify(args, seed, out),
        Command::QdThreshold(args) => qd_threshold_cmd(args, out),
        Command::QdSimulate(args) => qd_simulate(args, seed, out),
        Command::Blackwell(args) => blackwell(args, out),
        Command::UltrametricRoot(args) => ultrametric_root(args, out),
        Command::Evaluate(args) => evaluate(args, seed, out),
        Command::Compare(args) => compare(args, seed, out),
        Command::ConjectureProbe(args) => conjecture(args, seed, out),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn load(path: &Path) -> Result<PomdpModel> {
    read(path)?;
    load_model(path).map_err(|e| match e {
        Error::Parse(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn load_qd(path: &Path) -> Result<QdSpec> {
    QdSpec::from_toml_str(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn config(args: &SolveArgs) -> SolverConfig {
    SolverConfig::new(args.tol, args.max_iters)
}

/// Solves with the stopping or discounted solver according to the model kind.
fn solve_model(model: &PomdpModel, args: &SolveArgs) -> Result<Solution> {
    let grid = Arc::new(build_grid(model.num_states(), args.grid)?);
    let solution = match model.kind() {
        ModelKind::StoppingTime => solve_stopping(model, grid, config(args))?,
        ModelKind::GeneralDiscounted => solve_discounted(model, grid, config(args))?,
    };
    Ok(solution)
}

fn converged(model: &PomdpModel, args: &SolveArgs) -> Result<Solution> {
    let solution = solve_model(model, args)?;
    solution.ensure_converged()?;
    Ok(solution)
}

/// index, π(1..X), value, action, Q(·,1..U).
fn value_table(solution: &Solution) -> Csv {
    let grid = solution.grid();
    let x = grid.dim();
    let u = solution.num_actions;
    let header = std::iter::once("index".to_string())
        .chain((1..=x).map(|i| format!("pi_{i}")))
        .chain(["value".to_string(), "action".to_string()])
        .chain((1..=u).map(|a| format!("q_{a}")));
    let mut csv = Csv::new(header);
    let values = solution.value.values();
    let actions = solution.policy.actions();
    for i in 0..grid.len() {
        let mut row: Vec<Field> = vec![(i + 1).into()];
        row.extend(grid.point(i).iter().map(|&p| Field::from(p)));
        row.push(values[i].into());
        row.push(actions[i].into());
        row.extend((1..=u).map(|a| Field::from(solution.q(i, a))));
        csv.row(row);
    }
    csv
}

#[derive(Serialize)]
struct SolveSummary {
    kind: ModelKind,
    states: usize,
    actions: usize,
    resolution: usize,
    grid_points: usize,
    iterations: usize,
    final_change: f64,
    converged: bool,
    max_abs_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<Threshold>,
}

fn summary(model: &PomdpModel, solution: &Solution) -> Result<SolveSummary> {
    let threshold = if model.num_states() == 2 && model.kind() == ModelKind::StoppingTime {
        Some(extract_threshold(&solution.policy)?)
    } else {
        None
    };
    Ok(SolveSummary {
        kind: model.kind(),
        states: model.num_states(),
        actions: model.num_actions(),
        resolution: solution.grid().resolution(),
        grid_points: solution.grid().len(),
        iterations: solution.log.iterations(),
        final_change: solution.log.final_change(),
        converged: solution.log.converged,
        max_abs_value: solution.value.max_abs(),
        threshold,
    })
}

fn validate(path: &Path, out: &mut Artifacts) -> Result<Status> {
    let file = parse_model_file(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let model = file.to_model_unchecked()?;
    let report = validate_model(&model);
    out.json(
        "validation.json",
        &json!({ "valid": report.is_valid(), "violations": report.violations }),
    )?;
    Ok(Status::from_holds(report.is_valid()))
}

fn solve(args: &SolveArgs, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.model)?;
    let solution = solve_model(&model, args)?;
    out.csv("value.csv", value_table(&solution))?;
    let summary = summary(&model, &solution)?;
    out.json("solution.json", &summary)?;
    Ok(Status::from_holds(summary.converged))
}

fn solve_relaxed_cmd(args: &SolveArgs, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.model)?;
    let grid = Arc::new(build_grid(model.num_states(), args.grid)?);
    let relaxed = solve_relaxed(&model, grid, config(args))?;
    let solution = &relaxed.solution;
    out.csv("relaxed_value.csv", value_table(solution))?;
    let summary = summary(&model, solution)?;
    out.json("solution.json", &summary)?;
    Ok(Status::from_holds(summary.converged))
}

#[derive(Serialize)]
struct Check {
    predicate: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    holds: bool,
    report: Value,
}

impl Check {
    fn new<T: Serialize>(predicate: Predicate, target: Option<String>, holds: bool, report: &T) -> Self {
        Self {
            predicate: predicate.name(),
            target,
            holds,
            report: serde_json::to_value(report).expect("report serializes"),
        }
    }
}

/// Rejects predicates that cannot apply to the model before any solve runs.
fn check_applicable(model: &PomdpModel, predicates: &[Predicate]) -> Result<()> {
    for &p in predicates {
        let reason = match p {
            Predicate::StoppingConvex | Predicate::Threshold if model.kind() != ModelKind::StoppingTime => {
                Some("needs a stopping_time model")
            }
            Predicate::Threshold if model.num_states() != 2 => Some("needs a two-state model"),
            Predicate::Homogeneity if !model.nonlinear_cost().is_linear() => Some("needs linear costs"),
            Predicate::MyopicBound if model.num_actions() != 2 => Some("needs exactly two sensors"),
            _ => None,
        };
        if let Some(reason) = reason {
            return Err(CliError::Input(format!("predicate `{}` {reason}", p.name())));
        }
    }
    Ok(())
}

fn verify(args: &VerifyArgs, seed: u64, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.solve.model)?;
    check_applicable(&model, &args.predicates)?;
    let solution = if args.predicates.iter().any(|p| p.needs_solution()) {
        Some(converged(&model, &args.solve)?)
    } else {
        None
    };
    let sol = || solution.as_ref().expect("solved above");

    let mut checks = Vec::new();
    for &p in &args.predicates {
        match p {
            Predicate::Concavity => {
                let v = &sol().value;
                let r = verify_concavity(v, MAX_PAIRS, args.rel_tol * v.max_abs(), seed);
                checks.push(Check::new(p, None, r.holds, &r));
            }
            Predicate::StoppingConvex => {
                let r = verify_stopping_set_convex(&sol().policy, seed);
                checks.push(Check::new(p, None, r.holds, &r));
            }
            Predicate::Threshold => {
                let policy = &sol().policy;
                let threshold = extract_threshold(policy)?;
                let stops_at_zero = policy.actions()[0] == 1;
                let holds = matches!(threshold, Threshold::At(_)) && stops_at_zero;
                let report = json!({ "threshold": threshold, "stops_at_zero": stops_at_zero });
                checks.push(Check::new(p, None, holds, &report));
            }
            Predicate::MlrMonotone => {
                let v = &sol().value;
                let r = verify_mlr_monotone_value(v, args.rel_tol * v.max_abs(), seed);
                checks.push(Check::new(p, None, r.holds, &r));
            }
            Predicate::Homogeneity => {
                let grid = Arc::new(build_grid(model.num_states(), args.solve.grid)?);
                let relaxed = solve_relaxed(&model, grid, config(&args.solve))?;
                relaxed.solution.ensure_converged()?;
                let r = verify_homogeneity(&model, &relaxed, &args.kappa, args.samples, seed)?;
                checks.push(Check::new(p, None, r.holds, &r));
            }
            Predicate::Tp2 => {
                for u in 1..=model.num_actions() {
                    let r = is_tp2(model.transition(u));
                    checks.push(Check::new(p, Some(format!("transition[{u}]")), r.holds, &r));
                    let r = is_tp2(model.observation(u));
                    checks.push(Check::new(p, Some(format!("observation[{u}]")), r.holds, &r));
                }
            }
            Predicate::Ultrametric => {
                for u in 1..=model.num_actions() {
                    let r = is_ultrametric(model.observation(u));
                    checks.push(Check::new(p, Some(format!("observation[{u}]")), r.holds, &r));
                }
            }
            Predicate::CostFosd => {
                for u in 1..=model.num_actions() {
                    let r = fosd_decreasing_cost(&model, u, args.samples, ORDER_TOL, seed)?;
                    checks.push(Check::new(p, Some(format!("cost[{u}]")), r.holds, &r));
                }
            }
            Predicate::MyopicBound => {
                match verify_myopic_bound(&model, sol(), STRICTNESS_MARGIN, 1e-8, 1e-9) {
                    Ok(r) => checks.push(Check::new(p, None, r.holds(), &r)),
                    Err(Error::PreconditionFailed(reason)) => {
                        checks.push(Check::new(p, None, false, &json!({ "precondition": reason })))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    let holds = checks.iter().all(|c| c.holds);
    out.json(
        "verify.json",
        &json!({ "resolution": args.solve.grid, "holds": holds, "checks": checks }),
    )?;
    Ok(Status::from_holds(holds))
}

fn qd_solver(args: &QdArgs) -> SolverConfig {
    SolverConfig::new(args.tol, args.max_iters)
}

fn qd_threshold_cmd(args: &QdArgs, out: &mut Artifacts) -> Result<Status> {
    let spec = load_qd(&args.model)?;
    match qd_threshold(&spec, args.grid, qd_solver(args)) {
        Ok((threshold, solution)) => {
            out.csv("value.csv", value_table(&solution))?;
            out.json("qd_threshold.json", &json!({ "spec": spec, "holds": true, "result": threshold }))?;
            Ok(Status::Holds)
        }
        Err(Error::StructureViolation(reason)) => {
            out.json("qd_threshold.json", &json!({ "spec": spec, "holds": false, "violation": reason }))?;
            Ok(Status::Violation)
        }
        Err(e) => Err(e.into()),
    }
}

fn qd_simulate(args: &QdSimulateArgs, seed: u64, out: &mut Artifacts) -> Result<Status> {
    let spec = load_qd(&args.qd.model)?;
    let (threshold, value_at_prior) = match args.threshold {
        Some(t) => (t, None),
        None => {
            let (t, _) = qd_threshold(&spec, args.qd.grid, qd_solver(&args.qd))?;
            (t.threshold, Some(t.value_at_prior))
        }
    };
    let est = ks_cost_estimate(&spec, threshold, args.paths, args.horizon_cap, seed)?;
    let mut csv = Csv::new(["term", "mean", "std_error", "ci_low", "ci_high"]);
    for (name, e) in [
        ("delay_term", &est.delay_term),
        ("false_alarm", &est.false_alarm),
        ("ks_cost", &est.ks_cost),
        ("change_time", &est.change_time),
    ] {
        csv.row([name.into(), e.mean.into(), e.std_error.into(), e.ci.0.into(), e.ci.1.into()]);
    }
    out.csv("ks.csv", csv)?;
    out.json(
        "ks.json",
        &json!({
            "threshold": est.threshold,
            "delay_term": est.delay_term.mean,
            "false_alarm": est.false_alarm.mean,
            "ks_cost": est.ks_cost.mean,
            "ci": [est.ks_cost.ci.0, est.ks_cost.ci.1],
            "seeds": [est.seed],
            "cap_hits": est.cap_hits,
            "paths": est.paths,
            "horizon_cap": est.horizon_cap,
            "value_at_prior": value_at_prior,
            "estimates": est,
        }),
    )?;
    Ok(Status::Holds)
}

fn blackwell(args: &BlackwellArgs, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.solve.model)?;
    if model.num_actions() != 2 {
        return Err(CliError::Input(format!(
            "blackwell needs a model with exactly 2 sensors, got {}",
            model.num_actions()
        )));
    }
    let factorization = blackwell_factorize(model.observation(1), model.observation(2), 100_000, 1e-12)?;
    if !factorization.dominates || !model.has_common_transition() {
        out.json(
            "blackwell.json",
            &json!({
                "holds": false,
                "common_transition": model.has_common_transition(),
                "factorization": factorization,
            }),
        )?;
        return Ok(Status::Violation);
    }
    let solution = converged(&model, &args.solve)?;
    let report = verify_myopic_bound(&model, &solution, args.margin, args.jensen_tol, args.q_tol)?;
    out.csv("value.csv", value_table(&solution))?;
    out.json("blackwell.json", &json!({ "holds": report.holds(), "report": report }))?;
    Ok(Status::from_holds(report.holds()))
}

fn ultrametric_root(args: &RootArgs, out: &mut Artifacts) -> Result<Status> {
    let b = parse_matrix(&read(&args.matrix)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.matrix.display())))?;
    let ultrametric = is_ultrametric(&b);
    if !ultrametric.holds {
        out.json("root.json", &json!({ "holds": false, "ultrametric": ultrametric }))?;
        return Ok(Status::Violation);
    }
    let degree = args.root_degree;
    let root = match matrix_root(&b, degree) {
        Ok(r) => r,
        Err(Error::NegativeEigenvalue(lambda)) => {
            out.json("root.json", &json!({ "holds": false, "negative_eigenvalue": lambda }))?;
            return Ok(Status::Violation);
        }
        Err(e) => return Err(e.into()),
    };
    let power_residual = (matrix_power(&root, degree) - &b).amax();
    let row_sum_defect = root.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    // B^{k/U} ⪰ B^{(k+1)/U}: the coarser sensor is the finer one garbled.
    let mut chain = Vec::new();
    for k in 1..degree {
        let finer = matrix_power(&root, k);
        let coarser = matrix_power(&root, k + 1);
        let f = blackwell_factorize(&coarser, &finer, 100_000, 1e-12)?;
        chain.push(json!({ "finer": k, "coarser": k + 1, "residual": f.residual, "dominates": f.dominates }));
    }
    let holds = chain.iter().all(|c| c["dominates"] == true);
    out.write("root.toml", &matrix_to_string(&root))?;
    out.json(
        "root.json",
        &json!({
            "holds": holds,
            "degree": degree,
            "root": root.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "power_residual": power_residual,
            "row_sum_defect": row_sum_defect,
            "min_entry": root.min(),
            "dominance_residual": DOMINANCE_RESIDUAL,
            "chain": chain,
        }),
    )?;
    Ok(Status::from_holds(holds))
}

fn priors(model: &PomdpModel, sim: &SimArgs) -> Result<Vec<Belief>> {
    if sim.priors.is_empty() {
        return Ok(vec![uniform_belief(model.num_states())?]);
    }
    sim.priors
        .iter()
        .map(|p| {
            if p.0.len() != model.num_states() {
                return Err(CliError::Input(format!(
                    "prior {:?} has {} entries, model has {} states",
                    p.0,
                    p.0.len(),
                    model.num_states()
                )));
            }
            Belief::new(p.0.clone()).map_err(|e| CliError::Input(format!("prior {:?}: {e}", p.0)))
        })
        .collect()
}

/// Builds a policy, reusing the optimal solution when one is needed.
fn policy<'a>(
    arg: PolicyArg,
    model: &'a PomdpModel,
    solution: &'a Option<Solution>,
) -> Result<Box<dyn BeliefPolicy + 'a>> {
    Ok(match arg {
        PolicyArg::Optimal => Box::new(solution.as_ref().expect("solved").policy.clone()),
        PolicyArg::Myopic => Box::new(MyopicPolicy {
            model,
            margin: STRICTNESS_MARGIN,
        }),
        PolicyArg::Constant(u) if u <= model.num_actions() => Box::new(ConstantPolicy(u)),
        PolicyArg::Constant(u) => {
            return Err(CliError::Input(format!(
                "constant:{u}: model has {} actions",
                model.num_actions()
            )))
        }
        PolicyArg::Threshold(_) if model.num_states() != 2 => {
            return Err(CliError::Input("threshold policies need a two-state model".into()))
        }
        PolicyArg::Threshold(p) => Box::new(ThresholdPolicy(p)),
    })
}

fn solve_if(model: &PomdpModel, args: &SolveArgs, needed: bool) -> Result<Option<Solution>> {
    needed.then(|| converged(model, args)).transpose()
}

fn prior_fields(prior: &[f64]) -> impl Iterator<Item = Field> + '_ {
    prior.iter().map(|&p| Field::from(p))
}

fn sim_header(x: usize) -> Vec<String> {
    (1..=x)
        .map(|i| format!("pi_{i}"))
        .chain(
            ["policy", "mean", "std_error", "paths", "horizon", "truncation_bound"]
                .map(String::from),
        )
        .collect()
}

fn sim_row(csv: &mut Csv, prior: &[f64], r: &pomdp_sensing::EvalResult) {
    let mut row: Vec<Field> = prior_fields(prior).collect();
    row.extend([
        Field::from(r.policy.clone()),
        r.mean.into(),
        r.std_error.into(),
        r.paths.into(),
        r.horizon.into(),
        r.truncation_bound.into(),
    ]);
    csv.row(row);
}

fn evaluate(args: &EvaluateArgs, seed: u64, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.solve.model)?;
    let priors = priors(&model, &args.sim)?;
    let solution = solve_if(&model, &args.solve, args.policy == PolicyArg::Optimal)?;
    let policy = policy(args.policy, &model, &solution)?;
    let mut csv = Csv::new(sim_header(model.num_states()));
    let mut results = Vec::new();
    for prior in &priors {
        let r = evaluate_policy(&model, policy.as_ref(), prior, args.sim.paths, args.sim.sim_tol, seed)?;
        sim_row(&mut csv, prior.probs(), &r);
        results.push(json!({ "prior": prior.probs(), "result": r }));
    }
    out.csv("evaluate.csv", csv)?;
    out.json("evaluate.json", &results)?;
    Ok(Status::Holds)
}

fn compare(args: &CompareArgs, seed: u64, out: &mut Artifacts) -> Result<Status> {
    let model = load(&args.solve.model)?;
    let priors = priors(&model, &args.sim)?;
    let needs = args.policy == PolicyArg::Optimal || args.against == PolicyArg::Optimal;
    let solution = solve_if(&model, &args.solve, needs)?;
    let first = policy(args.policy, &model, &solution)?;
    let second = policy(args.against, &model, &solution)?;
    let comparison = compare_policies(
        &model,
        first.as_ref(),
        second.as_ref(),
        &priors,
        args.sim.paths,
        args.sim.sim_tol,
        seed,
    )?;
    let mut csv = Csv::new(sim_header(model.num_states()));
    for row in &comparison.rows {
        sim_row(&mut csv, &row.prior, &row.first);
        sim_row(&mut csv, &row.prior, &row.second);
    }
    out.csv("compare.csv", csv)?;
    let holds = comparison.all_not_worse();
    out.json("compare.json", &json!({ "holds": holds, "comparison": comparison }))?;
    Ok(Status::from_holds(holds))
}

fn conjecture(args: &ConjectureArgs, seed: u64, out: &mut Artifacts) -> Result<Status> {
    let generator = ConjectureGenerator {
        num_actions: args.actions,
        max_observations: args.observations,
        discount: args.discount,
        seed,
    };
    let models = (0..args.models as u64)
        .map(|i| generator.model(i))
        .collect::<pomdp_sensing::Result<Vec<_>>>()?;
    let summary = conjecture_probe(
        &models,
        args.grid,
        SolverConfig::new(args.tol, args.max_iters),
        args.rel_tol,
        seed,
    )?;
    if let Some(c) = &summary.counterexample {
        out.write("counterexample.toml", &c.model)?;
    }
    let holds = summary.counterexample.is_none();
    out.json(
        "conjecture.json",
        &json!({ "holds": holds, "message": summary.message(), "summary": summary }),
    )?;
    Ok(Status::from_holds(holds))
}
