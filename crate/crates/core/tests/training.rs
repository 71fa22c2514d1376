use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sraal_core::alcore::{
    accuracy, init_pools, reconstructor_embeddings, run_experiment, run_experiment_with, select, train_sraal_from,
    train_target, AlConfig, InitMode, Models, Oracle, PoolState, Schedule, StateLabels, Strategy,
};
use sraal_core::data::{generate, Dataset, SyntheticSpec};
use sraal_core::diffcore::{OptimKind, OptimState, Tape, Tensor};
use sraal_core::gradsuite::{run_gradcheck, GRADCHECK_TOLERANCE};
use sraal_core::kcenter::greedy_kcenter;
use sraal_core::losses::{disc_loss, LossWeights};
use sraal_core::nets::{discriminate_vars, Architecture, Mlp, SraalParams, TargetParams};

fn small_arch() -> Architecture {
    Architecture {
        latent_dim: 4,
        trunk_hidden: vec![16],
        decoder_hidden: vec![16],
        stl_hidden: vec![],
        disc_hidden: vec![16],
        target_hidden: vec![16],
        ..Architecture::default()
    }
}

fn small_schedule() -> Schedule {
    Schedule {
        target_epochs: 20,
        sraal_epochs: 2,
        pretrain_epochs: 2,
        batch_size: 16,
        learning_rate: 1e-2,
    }
}

fn blobs(n: usize, classes: usize, radius: f64, seed: u64) -> Dataset {
    generate(&SyntheticSpec {
        n,
        d: 6,
        classes,
        radius,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn bits(ts: &[&Tensor]) -> Vec<u64> {
    ts.iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
}

fn first_labeled(ds: &Dataset, m: usize) -> PoolState {
    let train = ds.train_ids();
    PoolState::new(train, &train[..m]).unwrap()
}

#[test]
fn gradcheck_over_twenty_seeds() {
    for check in run_gradcheck(11, 20, false).unwrap() {
        assert!(check.max_rel_error < GRADCHECK_TOLERANCE, "{}: {}", check.name, check.max_rel_error);
    }
    assert!(run_gradcheck(11, 2, true).unwrap().iter().all(|c| !c.passed()));
}

#[test]
fn target_separates_blobs() {
    let ds = blobs(80, 2, 6.0, 1);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 50);
    let schedule = Schedule {
        target_epochs: 60,
        ..small_schedule()
    };
    let target = train_target(&oracle, &pool, &small_arch(), &schedule, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let ids = pool.labeled_ids();
    let labels: Vec<usize> = ids.iter().map(|&i| ds.labels().unwrap()[i]).collect();
    assert!(accuracy(&target, &ds, &ids, &labels).unwrap() >= 0.95);
}

#[test]
fn zero_target_epochs_keep_initialization() {
    let ds = blobs(60, 3, 3.0, 2);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 10);
    let schedule = Schedule {
        target_epochs: 0,
        ..small_schedule()
    };
    let got = train_target(&oracle, &pool, &small_arch(), &schedule, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let fresh = TargetParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(got, fresh);
}

/// Same features and labeled labels, scrambled unlabeled labels.
fn scramble_unlabeled(ds: &Dataset, pool: &PoolState) -> Dataset {
    let mut labels = ds.labels().unwrap().to_vec();
    for &id in pool.unlabeled() {
        labels[id] = (labels[id] + 1) % ds.classes();
    }
    let features: Vec<f64> = (0..ds.len()).flat_map(|i| ds.features(i).to_vec()).collect();
    Dataset::new(features, ds.dim(), Some(labels), ds.classes(), ds.train_ids().to_vec(), ds.test_ids().to_vec())
        .unwrap()
}

#[test]
fn unlabeled_labels_never_reach_training() {
    let ds = blobs(90, 3, 3.0, 3);
    let pool = first_labeled(&ds, 20);
    let other = scramble_unlabeled(&ds, &pool);
    let run = |d: &Dataset| {
        let oracle = Oracle::new(d).unwrap();
        let target = train_target(&oracle, &pool, &small_arch(), &small_schedule(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut params = SraalParams::new(&small_arch(), d.dim(), d.classes(), &mut ChaCha8Rng::seed_from_u64(2));
        let scores = pool.unlabeled_ids().into_iter().map(|id| (id, 0.5)).collect();
        train_sraal_from(
            &oracle,
            &pool,
            &StateLabels::Relabeled(scores),
            &LossWeights::default(),
            &small_schedule(),
            &mut params,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        (target, params)
    };
    let (ta, pa) = run(&ds);
    let (tb, pb) = run(&other);
    assert_eq!(bits(&ta.net.tensors()), bits(&tb.net.tensors()));
    assert_eq!(pa, pb);
}

#[test]
fn oracle_reads_stay_inside_the_labeled_pool() {
    let ds = blobs(100, 3, 3.0, 4);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 10);
    let outside = pool.unlabeled_ids()[0];
    assert!(oracle.labels(&pool, &[outside]).is_err());

    let config = AlConfig {
        arch: small_arch(),
        schedule: small_schedule(),
        initial_fraction: 0.1,
        step_fraction: 0.1,
        budget_fraction: 0.3,
        ..AlConfig::default()
    };
    let curve = run_experiment_with(&oracle, &config, Strategy::Sraal, 9).unwrap();
    assert_eq!(curve.records.len(), 3);
    // Every read is of a sample labeled by then; the final pool holds 30% of train.
    let reads = oracle.reads();
    let distinct: std::collections::BTreeSet<usize> = reads.iter().copied().collect();
    assert!(distinct.len() <= (0.3 * ds.train_ids().len() as f64).round() as usize);
    assert!(distinct.iter().all(|id| ds.train_ids().contains(id)));
}

#[test]
fn zero_sraal_epochs_keep_parameters() {
    let ds = blobs(60, 3, 3.0, 5);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 10);
    let mut params = SraalParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(0));
    let before = params.clone();
    let schedule = Schedule {
        sraal_epochs: 0,
        ..small_schedule()
    };
    let loss = train_sraal_from(
        &oracle,
        &pool,
        &StateLabels::Binary,
        &LossWeights::default(),
        &schedule,
        &mut params,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    assert_eq!(loss, None);
    assert_eq!(params, before);
}

#[test]
fn missing_indicator_scores_rejected() {
    let ds = blobs(60, 3, 3.0, 6);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 10);
    let mut params = SraalParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(0));
    let partial: BTreeMap<usize, f64> = pool.unlabeled_ids().into_iter().skip(1).map(|id| (id, 0.5)).collect();
    let res = train_sraal_from(
        &oracle,
        &pool,
        &StateLabels::Relabeled(partial),
        &LossWeights::default(),
        &small_schedule(),
        &mut params,
        &mut ChaCha8Rng::seed_from_u64(1),
    );
    assert!(res.is_err());
}

#[test]
fn without_adversarial_weight_generator_ignores_states() {
    let ds = blobs(80, 3, 3.0, 7);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 16);
    let weights = LossWeights::new(1.0, 1.0, 0.0).unwrap();
    let init = SraalParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(0));
    let train_with = |states: StateLabels, disc_seed: u64| {
        let mut params = init.clone();
        params.discriminator = Mlp::new(&[8, 16, 1], small_arch().activation, false, &mut ChaCha8Rng::seed_from_u64(disc_seed));
        train_sraal_from(&oracle, &pool, &states, &weights, &small_schedule(), &mut params, &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        params.generator
    };
    let low = pool.unlabeled_ids().into_iter().map(|id| (id, 0.1)).collect();
    let a = train_with(StateLabels::Relabeled(low), 1);
    let b = train_with(StateLabels::Binary, 2);
    assert_eq!(bits(&a.tensors()), bits(&b.tensors()));
}

#[test]
fn discriminator_loss_decreases_on_toy_batch() {
    let mut drops = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut disc = Mlp::new(&[4, 8, 1], small_arch().activation, false, &mut rng);
        // Labeled representations sit around +1, unlabeled around -1.
        let rep_l = Tensor::new(vec![8, 4], (0..32).map(|_| 1.0 + 0.3 * rng.random::<f64>()).collect()).unwrap();
        let rep_u = Tensor::new(vec![8, 4], (0..32).map(|_| -1.0 + 0.3 * rng.random::<f64>()).collect()).unwrap();
        let scores = vec![0.9; 8];
        let loss_at = |disc: &Mlp| {
            let mut tape = Tape::new();
            let b = disc.bind(&mut tape);
            let (l, u) = (tape.leaf(rep_l.clone()), tape.leaf(rep_u.clone()));
            let dl = discriminate_vars(&mut tape, &b, l).unwrap();
            let du = discriminate_vars(&mut tape, &b, u).unwrap();
            let loss = disc_loss(&mut tape, dl, du, &scores).unwrap();
            (tape.value(loss).item(), tape.backward(loss).unwrap().collect(&b.vars()))
        };
        let start = loss_at(&disc).0;
        let mut opt = OptimState::new(OptimKind::adam(1e-3));
        for _ in 0..200 {
            let (_, g) = loss_at(&disc);
            opt.step(&mut disc.tensors_mut(), &g).unwrap();
        }
        drops.push(start - loss_at(&disc).0);
    }
    drops.sort_by(f64::total_cmp);
    assert!(drops[2] > 0.0, "{drops:?}");
}

#[test]
fn selection_respects_the_partition() {
    let ds = blobs(120, 3, 3.0, 8);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 12);
    let target = train_target(&oracle, &pool, &small_arch(), &small_schedule(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let sraal = SraalParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(1));
    let models = Models {
        target: &target,
        sraal: Some(&sraal),
    };
    for strategy in Strategy::ALL {
        for k in [1, 7, 30] {
            let ids = select(strategy, &ds, &pool, models, k, &mut ChaCha8Rng::seed_from_u64(k as u64)).unwrap();
            let distinct: std::collections::BTreeSet<_> = ids.iter().collect();
            assert_eq!(distinct.len(), k, "{strategy}");
            assert!(ids.iter().all(|id| pool.unlabeled().contains(id)), "{strategy}");
        }
        let all = pool.unlabeled().len();
        let mut ids = select(strategy, &ds, &pool, models, all, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        ids.sort_unstable();
        assert_eq!(ids, pool.unlabeled_ids());
        assert!(select(strategy, &ds, &pool, models, all + 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}

#[test]
fn adversarial_selection_takes_smallest_outputs() {
    let ds = blobs(80, 3, 3.0, 9);
    let oracle = Oracle::new(&ds).unwrap();
    let pool = first_labeled(&ds, 10);
    let target = train_target(&oracle, &pool, &small_arch(), &small_schedule(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let sraal = SraalParams::new(&small_arch(), ds.dim(), ds.classes(), &mut ChaCha8Rng::seed_from_u64(1));
    let unl = pool.unlabeled_ids();
    let d = sraal.state_scores(&ds.batch(&unl)).unwrap();
    let mut order: Vec<usize> = (0..unl.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(unl[a].cmp(&unl[b])));
    let expected: Vec<usize> = order[..5].iter().map(|&i| unl[i]).collect();
    let models = Models {
        target: &target,
        sraal: Some(&sraal),
    };
    let got = select(Strategy::Sraal, &ds, &pool, models, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn kcenter_init_delegates_to_greedy_kcenter() {
    let ds = blobs(60, 3, 3.0, 10);
    let config = AlConfig {
        init: InitMode::Kcenter,
        arch: small_arch(),
        schedule: small_schedule(),
        ..AlConfig::default()
    };
    let pool = init_pools(&ds, 6, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    // Replay the same random stream by hand.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let emb = reconstructor_embeddings(&ds, &config, &mut rng).unwrap();
    let mut expected = greedy_kcenter(&emb, 6, 1, &mut rng).unwrap().ids;
    expected.sort_unstable();
    assert_eq!(pool.labeled_ids(), expected);

    let all = init_pools(&ds, ds.train_ids().len(), &AlConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(all.unlabeled().is_empty());
    assert!(init_pools(&ds, ds.train_ids().len() + 1, &AlConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn experiment_has_seven_points_and_is_deterministic() {
    let ds = blobs(200, 4, 3.0, 11);
    let config = AlConfig {
        arch: small_arch(),
        schedule: small_schedule(),
        ..AlConfig::default()
    };
    for strategy in [Strategy::Random, Strategy::SraalNoOui] {
        let a = run_experiment(&ds, &config, strategy, 1).unwrap();
        let b = run_experiment(&ds, &config, strategy, 1).unwrap();
        assert_eq!(a, b);
        let fractions: Vec<f64> = a.records.iter().map(|r| r.labeled_fraction).collect();
        assert_eq!(fractions.len(), 7);
        for (f, want) in fractions.iter().zip([0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]) {
            assert!((f - want).abs() < 1e-9, "{fractions:?}");
        }
        assert!(a.records.iter().all(|r| r.seconds == 0.0));
    }
}

#[test]
fn binary_and_unit_indicator_runs_match_bitwise() {
    let ds = blobs(160, 4, 3.0, 12);
    let config = AlConfig {
        arch: small_arch(),
        schedule: small_schedule(),
        ..AlConfig::default()
    };
    let relabeled = run_experiment(&ds, &config, Strategy::SraalNoOui, 2).unwrap();
    let binary = run_experiment(
        &ds,
        &AlConfig {
            binary_state_loss: true,
            ..config
        },
        Strategy::SraalNoOui,
        2,
    )
    .unwrap();
    assert_eq!(relabeled, binary);
}
