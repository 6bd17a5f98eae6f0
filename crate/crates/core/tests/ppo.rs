mod common;

use common::gae_brute_force;
use lord_core::embedding::{BackendConfig, Modality};
use lord_core::obs::KinematicsObs;
use lord_core::ppo::{
    checkpoint_load, checkpoint_load_expecting, checkpoint_save, compute_gae, normalize_advantages, policy_forward,
    ppo_update, sample_action, train, PolicyOptimizer, PolicyParams, PpoConfig, PpoError, UpdateBatch,
    METRICS_HEADER,
};
use lord_core::reward::RewardSpec;
use lord_core::sim::{EnvConfig, MetaAction};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut ChaCha8Rng) -> KinematicsObs {
    KinematicsObs::from_flat(33, (0..264).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn tiny_config(total: usize) -> PpoConfig {
    PpoConfig {
        rollout_length: 256,
        total_env_steps: total,
        hidden_sizes: vec![16],
        num_workers: 2,
        epochs_per_update: 2,
        checkpoint_every: 1,
        seed: 5,
        ..PpoConfig::default()
    }
}

#[test]
fn zero_heads_give_uniform_probs() {
    let mut params = PolicyParams::driving(264, &[32, 32], 1);
    params.zero_heads();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (probs, value) = policy_forward(&params, &random_state(&mut rng)).unwrap();
    assert!(probs.iter().all(|p| (p - 0.2).abs() < 1e-15));
    assert_eq!(value, 0.0);
}

#[test]
fn forward_is_deterministic_and_checks_dims() {
    let params = PolicyParams::driving(264, &[32], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_state(&mut rng);
    assert_eq!(policy_forward(&params, &s).unwrap(), policy_forward(&params, &s).unwrap());
    let short = KinematicsObs::zeros(10);
    assert!(matches!(policy_forward(&params, &short), Err(PpoError::Input(_))));
}

#[test]
fn one_hot_always_samples_that_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let probs = [0.0, 1.0, 0.0, 0.0, 0.0];
    for _ in 0..1000 {
        let (a, lp) = sample_action(&probs, &mut rng);
        assert_eq!(a, MetaAction::Idle);
        assert_eq!(lp, 0.0);
    }
}

#[test]
fn uniform_sampling_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = [0usize; 5];
    let n = 100_000;
    for _ in 0..n {
        counts[sample_action(&[0.2; 5], &mut rng).0.index()] += 1;
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 0.2).abs() <= 0.01, "{counts:?}");
    }
    let draw = |seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| sample_action(&[0.1, 0.2, 0.3, 0.25, 0.15], &mut r).0).collect::<Vec<_>>()
    };
    assert_eq!(draw(4), draw(4));
}

#[test]
fn gae_examples() {
    let (adv, ret) = compute_gae(&[1.0, 1.0, 1.0], &[0.0; 3], &[false, false, true], 0.0, 1.0, 1.0);
    assert_eq!(adv, vec![3.0, 2.0, 1.0]);
    assert_eq!(ret, vec![3.0, 2.0, 1.0]);

    let (rewards, values) = ([0.5, -0.2, 1.0, 0.3], [0.1, 0.4, -0.3, 0.2]);
    let dones = [false, true, false, false];
    let (adv, _) = compute_gae(&rewards, &values, &dones, 0.7, 0.9, 0.0);
    let next = [0.4, 0.0, 0.2, 0.7];
    for t in 0..4 {
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + 0.9 * next[t] * nonterminal - values[t];
        assert!((adv[t] - delta).abs() < 1e-15);
    }
}

#[test]
fn checkpoint_round_trip_on_random_states() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    let params = PolicyParams::driving(264, &[24, 12], 9);
    checkpoint_save(&params, &path).unwrap();
    let loaded = checkpoint_load(&path).unwrap();
    assert_eq!(loaded, params);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let s = random_state(&mut rng);
        let (a, b) = (policy_forward(&params, &s).unwrap(), policy_forward(&loaded, &s).unwrap());
        assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }
}

#[test]
fn bad_checkpoints_are_persistence_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    checkpoint_save(&PolicyParams::driving(264, &[8], 1), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let cut = dir.path().join("cut.ckpt");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(checkpoint_load(&cut), Err(PpoError::Persistence(_))));

    let mut flipped = bytes.clone();
    flipped[bytes.len() / 2] ^= 0x10;
    let flip = dir.path().join("flip.ckpt");
    std::fs::write(&flip, flipped).unwrap();
    assert!(matches!(checkpoint_load(&flip), Err(PpoError::Persistence(_))));

    let err = checkpoint_load_expecting(&path, 264, &[16], 5).unwrap_err();
    assert!(matches!(err, PpoError::Persistence(_)));
    assert!(err.to_string().contains("8"), "{err}");
    assert!(checkpoint_load_expecting(&path, 264, &[8], 5).is_ok());
    assert!(matches!(checkpoint_load(&dir.path().join("missing.ckpt")), Err(PpoError::Persistence(_))));
}

#[test]
fn non_finite_update_leaves_params_untouched() {
    let mut params = PolicyParams::new(4, &[6], 3, 0);
    let before = params.clone();
    let mut opt = PolicyOptimizer::new(&params, 1e-3);
    let batch = UpdateBatch {
        states: Array2::from_elem((4, 4), 0.5),
        actions: vec![0, 1, 2, 0],
        old_log_probs: vec![-1.1; 4],
        advantages: vec![1.0, f64::NAN, -1.0, 0.0],
        returns: vec![0.0; 4],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = ppo_update(&mut params, &mut opt, &batch, &PpoConfig::default(), &mut rng).unwrap_err();
    assert!(matches!(err, PpoError::Numerical(_)));
    assert_eq!(params, before);
}

#[test]
fn training_is_reproducible_and_counts_updates() {
    let env = EnvConfig { lane_count: 3, vehicles_density: 1.0, duration: 15, ..EnvConfig::testing() };
    let run = |dir: &std::path::Path, total| {
        train(&env, &RewardSpec::lord(Modality::Text), &tiny_config(total), &BackendConfig::default(), dir, |_| {})
            .unwrap()
    };
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(a.path(), 512);
    let second = run(b.path(), 512);
    assert_eq!(first.metrics.len(), 2);
    let log_a = std::fs::read_to_string(a.path().join("metrics.csv")).unwrap();
    assert_eq!(log_a, std::fs::read_to_string(b.path().join("metrics.csv")).unwrap());
    assert_eq!(log_a.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(first.params, second.params);
    assert!(a.path().join("final.ckpt").exists());

    let single = run(c.path(), 256);
    assert_eq!(single.metrics.len(), 1);
    assert_eq!(single.metrics[0].step, 256);
}

#[test]
fn constant_reward_training_survives_longer() {
    let env = EnvConfig::for_setting("lane-3-density-1").unwrap();
    let ppo = PpoConfig {
        rollout_length: 2048,
        total_env_steps: 40_960,
        hidden_sizes: vec![64, 64],
        num_workers: 8,
        checkpoint_every: 100,
        seed: 2,
        ..PpoConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = train(&env, &RewardSpec::Constant, &ppo, &BackendConfig::default(), dir.path(), |_| {}).unwrap();
    let lens: Vec<f64> = out.metrics.iter().filter_map(|m| m.mean_episode_len).collect();
    assert_eq!(lens.len(), 20);
    let early = lens[..5].iter().sum::<f64>() / 5.0;
    let late = lens[15..].iter().sum::<f64>() / 5.0;
    assert!(late >= early, "episode length fell from {early:.2} to {late:.2}: {lens:?}");
}

proptest! {
    #[test]
    fn gae_matches_nested_sums(
        steps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, prop::bool::weighted(0.2)), 1..15),
        bootstrap in -1.0f64..1.0,
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let oracle = gae_brute_force(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..adv.len() {
            prop_assert!((adv[t] - oracle[t]).abs() < 1e-9);
            prop_assert!((ret[t] - adv[t] - values[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_advantages_are_standard(adv in prop::collection::vec(-50.0f64..50.0, 2..200)) {
        prop_assume!(adv.iter().any(|&a| (a - adv[0]).abs() > 1e-3));
        let mut a = adv.clone();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-6);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn updates_keep_a_valid_distribution(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = PolicyParams::new(264, &[16], 5, seed);
        let mut opt = PolicyOptimizer::new(&params, 1e-2);
        let states: Vec<KinematicsObs> = (0..32).map(|_| random_state(&mut rng)).collect();
        let flat: Vec<f64> = states.iter().flat_map(|s| s.as_slice().to_vec()).collect();
        let mut advantages: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
        normalize_advantages(&mut advantages);
        let batch = UpdateBatch {
            states: Array2::from_shape_vec((32, 264), flat).unwrap(),
            actions: (0..32).map(|_| rng.random_range(0..5)).collect(),
            old_log_probs: vec![-(5f64).ln(); 32],
            advantages,
            returns: (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let config = PpoConfig { minibatch_size: 8, epochs_per_update: 3, ..PpoConfig::default() };
        ppo_update(&mut params, &mut opt, &batch, &config, &mut rng).unwrap();
        prop_assert!(params.is_finite());
        for s in &states {
            let (probs, v) = policy_forward(&params, s).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(probs.iter().all(|&p| p >= 0.0) && v.is_finite());
        }
    }
}
