//! End-to-end structural checks on the named fixtures at moderate grid
//! sizes. The acceptance suite repeats them at full resolution.

use std::sync::Arc;

use pomdp_sensing::fixtures::*;
use pomdp_sensing::sim::{ConstantPolicy, MyopicPolicy};
use pomdp_sensing::structure::{matrix_power, MAX_PAIRS, STRICTNESS_MARGIN};
use pomdp_sensing::*;

fn config() -> SolverConfig {
    SolverConfig::new(1e-10, 100_000)
}

fn solve(model: &PomdpModel, resolution: usize) -> Solution {
    let grid = Arc::new(build_grid(model.num_states(), resolution).unwrap());
    let s = match model.kind() {
        ModelKind::StoppingTime => solve_stopping(model, grid, config()),
        ModelKind::GeneralDiscounted => solve_discounted(model, grid, config()),
    }
    .unwrap();
    s.ensure_converged().unwrap();
    s
}

fn concavity(model: &PomdpModel, resolution: usize) -> OrderCheckReport {
    let s = solve(model, resolution);
    verify_concavity(&s.value, MAX_PAIRS, 1e-6 * s.value.max_abs(), 0)
}

#[test]
fn two_state_value_functions_are_concave() {
    for family in CostFamily::ALL {
        let r = concavity(&concave_fixture(2, family), 300);
        assert!(r.holds, "{}: {r:?}", family.name());
    }
    let r = concavity(&negated_entropy_fixture(2), 300);
    assert!(!r.holds);
    assert!(r.witness.is_some());
}

#[test]
fn quickest_detection_has_threshold_structure() {
    let s = solve(&qd_model(), 400);
    assert!(verify_stopping_set_convex(&s.policy, 0).holds);
    match extract_threshold(&s.policy).unwrap() {
        Threshold::At(t) => assert!(t > 0.0 && t < 1.0),
        other => panic!("{other:?}"),
    }
    assert_eq!(s.policy.actions()[0], 1, "π(2) = 0 must stop");

    let s = solve(&qd_three_state_model(), 30);
    assert!(verify_stopping_set_convex(&s.policy, 0).holds);
}

#[test]
fn monotone_fixture_value_decreases_in_mlr_order() {
    let s = solve(&monotone_fixture(), 300);
    assert!(verify_mlr_monotone_value(&s.value, 1e-6 * s.value.max_abs(), 0).holds);
    let s = solve(&increasing_cost_fixture(), 300);
    let r = verify_mlr_monotone_value(&s.value, 1e-6 * s.value.max_abs(), 0);
    assert!(!r.holds);
    assert!(r.witness.is_some());
}

#[test]
fn relaxed_value_is_homogeneous() {
    for model in [monotone_fixture(), linear_three_state()] {
        let grid = Arc::new(build_grid(model.num_states(), 20).unwrap());
        let w = solve_relaxed(&model, grid, config()).unwrap();
        let r = verify_homogeneity(&model, &w, &[0.001, 0.5, 1.0, 2.0, 7.3], 20, 1).unwrap();
        assert!(r.holds, "{r:?}");
    }
}

#[test]
fn myopic_bound_on_blackwell_fixtures() {
    for model in [filter_vs_predictor(), ultrametric_chain().unwrap()] {
        let s = solve(&model, 300);
        let r = verify_myopic_bound(&model, &s, STRICTNESS_MARGIN, 1e-8, 1e-9).unwrap();
        assert!(r.factorization.residual <= 1e-6);
        assert!(r.strict_points > 0);
        assert!(r.holds(), "{r:?}");

        let priors: Vec<Belief> = [0.2, 0.8]
            .iter()
            .map(|&p| Belief::new(vec![1.0 - p, p]).unwrap())
            .collect();
        let myopic = MyopicPolicy { model: &model, margin: STRICTNESS_MARGIN };
        let c = compare_policies(&model, &s.policy, &myopic, &priors, 4000, 1e-4, 5).unwrap();
        assert!(c.all_not_worse(), "{c:?}");
        let c = compare_policies(&model, &s.policy, &ConstantPolicy(1), &priors, 4000, 1e-4, 5).unwrap();
        assert!(c.all_not_worse(), "{c:?}");
    }
}

#[test]
fn ultrametric_roots_form_a_dominance_chain() {
    for b in [ultrametric_two(), ultrametric_three()] {
        for degree in 2..=4 {
            let root = matrix_root(&b, degree).unwrap();
            assert!((matrix_power(&root, degree) - &b).amax() <= 1e-8);
            for k in 1..degree {
                let f = blackwell_factorize(&matrix_power(&root, k + 1), &matrix_power(&root, k), 100_000, 1e-12)
                    .unwrap();
                assert!(f.dominates, "degree {degree} step {k}: {}", f.residual);
            }
        }
    }
}

#[test]
fn order_checks_on_fixture_matrices() {
    let m = monotone_fixture();
    for u in 1..=2 {
        assert!(structure::fosd_decreasing_cost(&m, u, 200, structure::ORDER_TOL, 0).unwrap().holds);
    }
    let r = is_tp2(non_tp2_model().observation(1));
    assert!(!r.holds);
    assert!(matches!(r.witness, Some(Witness::Minor { .. })));
}
