//! HMM belief filter T(π,y,u), its normalizer σ(π,y,u), and the unnormalized
//! update on the positive orthant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Belief, PomdpModel, RelaxedBelief};

/// Likelihoods at or below this value are treated as impossible observations.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

/// Longest observation sequence accepted by [`exact_posterior_oracle`].
pub const ORACLE_MAX_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub posterior: Belief,
    /// σ(π,y,u), the probability of observing `y` under action `u`.
    pub likelihood: f64,
}

/// Writes P'π into `out`.
#[inline]
pub(crate) fn predict_into(p: &DMatrix<f64>, pi: &[f64], out: &mut [f64]) {
    let x = pi.len();
    for (j, o) in out.iter_mut().enumerate().take(x) {
        let mut acc = 0.0;
        for (i, pi_i) in pi.iter().enumerate() {
            acc += p[(i, j)] * pi_i;
        }
        *o = acc;
    }
}

/// Writes B_y P'π (unnormalized) into `out` given the prediction P'π, and
/// returns its mass σ. `y` is 0-indexed.
#[inline]
pub(crate) fn correct_into(b: &DMatrix<f64>, predicted: &[f64], y: usize, out: &mut [f64]) -> f64 {
    let mut sigma = 0.0;
    for (j, (o, pred)) in out.iter_mut().zip(predicted).enumerate() {
        *o = b[(j, y)] * pred;
        sigma += *o;
    }
    sigma
}

/// One Bayes step: posterior = B_y(u) P'(u) π / σ, with σ = 1'B_y(u) P'(u) π.
pub fn filter_update(model: &PomdpModel, pi: &Belief, y: usize, u: usize) -> Result<FilterStep> {
    model.check_observation(y, u)?;
    let x = model.num_states();
    if pi.dim() != x {
        return Err(Error::DimensionMismatch(format!(
            "belief has {} entries, model has {x} states",
            pi.dim()
        )));
    }
    let mut predicted = vec![0.0; x];
    predict_into(model.transition(u), pi.probs(), &mut predicted);
    let mut post = vec![0.0; x];
    let sigma = correct_into(model.observation(u), &predicted, y - 1, &mut post);
    if !(sigma > UNDERFLOW_THRESHOLD) {
        return Err(Error::ZeroLikelihood {
            y,
            u,
            likelihood: sigma,
        });
    }
    post.iter_mut().for_each(|p| *p /= sigma);
    let total: f64 = post.iter().sum();
    post.iter_mut().for_each(|p| *p /= total);
    Ok(FilterStep {
        posterior: Belief::from_vec_unchecked(post),
        likelihood: sigma.min(1.0),
    })
}

/// B_y(u) P'(u) α without normalization.
pub fn relaxed_update(model: &PomdpModel, alpha: &RelaxedBelief, y: usize, u: usize) -> Result<RelaxedBelief> {
    model.check_observation(y, u)?;
    let x = model.num_states();
    if alpha.weights().len() != x {
        return Err(Error::DimensionMismatch(format!(
            "relaxed belief has {} entries, model has {x} states",
            alpha.weights().len()
        )));
    }
    let mut predicted = vec![0.0; x];
    predict_into(model.transition(u), alpha.weights(), &mut predicted);
    let mut out = vec![0.0; x];
    correct_into(model.observation(u), &predicted, y - 1, &mut out);
    Ok(RelaxedBelief::from_vec_unchecked(out))
}

/// Iterates [`filter_update`] over a sequence of (y, u) pairs.
pub fn filter_sequence(model: &PomdpModel, prior: &Belief, observations: &[(usize, usize)]) -> Result<Belief> {
    observations
        .iter()
        .try_fold(prior.clone(), |pi, &(y, u)| Ok(filter_update(model, &pi, y, u)?.posterior))
}

/// Posterior by brute-force summation of joint probabilities over every
/// state path. Exponential in the sequence length; used as a test oracle.
pub fn exact_posterior_oracle(model: &PomdpModel, prior: &Belief, observations: &[(usize, usize)]) -> Result<Belief> {
    let n = observations.len();
    if n > ORACLE_MAX_LEN {
        return Err(Error::SequenceTooLong {
            len: n,
            max: ORACLE_MAX_LEN,
        });
    }
    for &(y, u) in observations {
        model.check_observation(y, u)?;
    }
    if n == 0 {
        return Ok(prior.clone());
    }
    let x = model.num_states();
    let mut path = vec![0usize; n + 1];
    let mut mass = vec![0.0; x];
    loop {
        let mut w = prior.probs()[path[0]];
        for (k, &(y, u)) in observations.iter().enumerate() {
            if w == 0.0 {
                break;
            }
            w *= model.transition(u)[(path[k], path[k + 1])];
            w *= model.observation(u)[(path[k + 1], y - 1)];
        }
        mass[path[n]] += w;

        // odometer over state paths
        let mut pos = 0;
        loop {
            path[pos] += 1;
            if path[pos] < x {
                break;
            }
            path[pos] = 0;
            pos += 1;
            if pos > n {
                let total: f64 = mass.iter().sum();
                if !(total > UNDERFLOW_THRESHOLD) {
                    return Err(Error::ZeroLikelihood {
                        y: observations[n - 1].0,
                        u: observations[n - 1].1,
                        likelihood: total,
                    });
                }
                return Belief::normalized(mass);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::NonlinearCost;
    use crate::model::ModelKind;
    use crate::rng::{rng_for, sample_simplex, sample_stochastic};
    use nalgebra::{dmatrix, DVector};
    use proptest::prelude::*;
    use rand::RngExt;

    fn model(p: DMatrix<f64>, b: DMatrix<f64>) -> PomdpModel {
        let x = p.nrows();
        PomdpModel::new(
            ModelKind::GeneralDiscounted,
            0.9,
            vec![p],
            vec![b],
            vec![DVector::zeros(x)],
            NonlinearCost::None,
        )
        .unwrap()
    }

    fn qd_model() -> PomdpModel {
        model(dmatrix![1.0, 0.0; 0.2, 0.8], dmatrix![0.8, 0.2; 0.3, 0.7])
    }

    fn belief(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_observation_collapses_belief() {
        let m = model(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let step = filter_update(&m, &belief(&[0.5, 0.5]), 2, 1).unwrap();
        assert_eq!(step.posterior.probs(), &[0.0, 1.0]);
        assert_eq!(step.likelihood, 0.5);
    }

    #[test]
    fn uninformative_observation_keeps_belief() {
        let m = model(DMatrix::identity(2, 2), dmatrix![0.5, 0.5; 0.5, 0.5]);
        let step = filter_update(&m, &belief(&[0.3, 0.7]), 1, 1).unwrap();
        assert!((step.posterior.probs()[0] - 0.3).abs() < 1e-15);
        assert!((step.posterior.probs()[1] - 0.7).abs() < 1e-15);
        assert_eq!(step.likelihood, 0.5);
    }

    #[test]
    fn quickest_detection_step_by_hand() {
        // P'π = [0.2, 0.8]; B_1 = diag(0.8, 0.3) → [0.16, 0.24], σ = 0.4.
        let step = filter_update(&qd_model(), &belief(&[0.0, 1.0]), 1, 1).unwrap();
        assert!((step.likelihood - 0.4).abs() < 1e-15);
        assert!((step.posterior.probs()[0] - 0.4).abs() < 1e-15);
        assert!((step.posterior.probs()[1] - 0.6).abs() < 1e-15);
        let oracle = exact_posterior_oracle(&qd_model(), &belief(&[0.0, 1.0]), &[(1, 1)]).unwrap();
        assert!((oracle.probs()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let m = model(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let err = filter_update(&m, &belief(&[1.0, 0.0]), 2, 1).unwrap_err();
        assert!(matches!(err, Error::ZeroLikelihood { y: 2, u: 1, .. }));
        assert!(filter_update(&m, &belief(&[1.0, 0.0]), 3, 1).is_err());
        assert!(filter_update(&m, &belief(&[1.0, 0.0]), 1, 2).is_err());
    }

    #[test]
    fn relaxed_update_examples() {
        let m = model(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let a = RelaxedBelief::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(relaxed_update(&m, &a, 1, 1).unwrap().weights(), &[1.0, 0.0]);

        let qd = qd_model();
        let pi = belief(&[0.35, 0.65]);
        for y in 1..=2 {
            let step = filter_update(&qd, &pi, y, 1).unwrap();
            let rel = relaxed_update(&qd, &pi.clone().into(), y, 1).unwrap();
            let scaled = relaxed_update(&qd, &RelaxedBelief::from(pi.clone()).scaled(3.5), y, 1).unwrap();
            for j in 0..2 {
                let expected = step.posterior.probs()[j] * step.likelihood;
                assert!((rel.weights()[j] - expected).abs() < 1e-15);
                assert!((scaled.weights()[j] - 3.5 * rel.weights()[j]).abs() < 1e-14);
            }
        }
        // zero output is legal
        let dead = RelaxedBelief::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(relaxed_update(&m, &dead, 2, 1).unwrap().weights(), &[0.0, 0.0]);
    }

    #[test]
    fn oracle_edge_cases() {
        let qd = qd_model();
        let prior = belief(&[0.0, 1.0]);
        assert_eq!(exact_posterior_oracle(&qd, &prior, &[]).unwrap(), prior);
        let long = vec![(1, 1); ORACLE_MAX_LEN + 1];
        assert!(matches!(
            exact_posterior_oracle(&qd, &prior, &long),
            Err(Error::SequenceTooLong { .. })
        ));
        let seq = [(1, 1), (2, 1), (2, 1), (1, 1), (1, 1)];
        let oracle = exact_posterior_oracle(&qd, &prior, &seq).unwrap();
        let filtered = filter_sequence(&qd, &prior, &seq).unwrap();
        for j in 0..2 {
            assert!((oracle.probs()[j] - filtered.probs()[j]).abs() < 1e-10);
        }
    }

    fn random_model(seed: u64, x: usize, y: usize, u: usize) -> PomdpModel {
        let mut rng = rng_for(seed, 0, 0);
        PomdpModel::new(
            ModelKind::GeneralDiscounted,
            0.5,
            (0..u).map(|_| sample_stochastic(&mut rng, x, x)).collect(),
            (0..u).map(|_| sample_stochastic(&mut rng, x, y)).collect(),
            vec![DVector::zeros(x); u],
            NonlinearCost::None,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn likelihoods_sum_to_one(seed in any::<u64>(), x in 2usize..5, y in 1usize..4) {
            let m = random_model(seed, x, y, 2);
            let mut rng = rng_for(seed, 1, 0);
            let pi = Belief::new(sample_simplex(&mut rng, x)).unwrap();
            for u in 1..=2 {
                let total: f64 = (1..=y).map(|obs| filter_update(&m, &pi, obs, u).unwrap().likelihood).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_filter_is_scale_invariant(seed in any::<u64>(), kappa in 1e-3f64..1e3) {
            let m = random_model(seed, 3, 2, 1);
            let mut rng = rng_for(seed, 1, 0);
            let pi = Belief::new(sample_simplex(&mut rng, 3)).unwrap();
            let alpha = RelaxedBelief::from(pi.clone()).scaled(kappa);
            for y in 1..=2 {
                let t = filter_update(&m, &pi, y, 1).unwrap().posterior;
                let scaled = Belief::normalized(relaxed_update(&m, &alpha, y, 1).unwrap().weights().to_vec()).unwrap();
                for j in 0..3 {
                    prop_assert!((t.probs()[j] - scaled.probs()[j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn filter_matches_path_oracle(seed in any::<u64>(), x in 2usize..5, y in 1usize..4, len in 0usize..9) {
            let m = random_model(seed, x, y, 2);
            let mut rng = rng_for(seed, 2, 0);
            let prior = Belief::new(sample_simplex(&mut rng, x)).unwrap();
            let seq: Vec<(usize, usize)> = (0..len)
                .map(|_| (rng.random_range(1..=y), rng.random_range(1..=2)))
                .collect();
            let oracle = exact_posterior_oracle(&m, &prior, &seq).unwrap();
            let filtered = filter_sequence(&m, &prior, &seq).unwrap();
            for j in 0..x {
                prop_assert!((oracle.probs()[j] - filtered.probs()[j]).abs() < 1e-10);
            }
        }
    }
}
