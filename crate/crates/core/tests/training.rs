use mosaic_core::data::user_blocks;
use mosaic_core::trainer::{read_trajectories, write_trajectories};
use mosaic_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log(seed: u64) -> InteractionLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for t in 0..3000 {
        let u = rng.random_range(0..25);
        let i = rng.random_range(0..60);
        let r = rng.random_range(1..=5);
        text.push_str(&format!("u{u}\ti{i}\t{r}\t{t}\n"));
    }
    parse_interactions(text.as_bytes(), &Schema::default()).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        dim_k: 5,
        learning_rate: 0.1,
        epochs,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn trajectory_lengths_count_blocks() {
    let log = log(1);
    let blocks = user_blocks(&log);
    for epochs in [1, 3] {
        let out = train_snape(&log, &cfg(epochs)).unwrap();
        for (u, traj) in out.trajectories.iter().enumerate() {
            assert_eq!(traj.user, u as UserId);
            assert_eq!(traj.len(), blocks[u].len() * epochs);
            assert!(traj.snapshots.iter().all(|s| s.len() == 5));
        }
        let total: usize = blocks.iter().map(Vec::len).sum();
        assert_eq!(out.blocks_per_epoch, vec![total; epochs]);
    }
    let sparse = train_snape(&log, &TrainConfig { snapshot_every: 3, ..cfg(1) }).unwrap();
    for (u, traj) in sparse.trajectories.iter().enumerate() {
        assert_eq!(traj.len(), blocks[u].len() / 3);
    }
}

#[test]
fn other_users_never_touch_a_user_row() {
    // one epoch: the final row of each user is its last snapshot
    let log = log(2);
    let out = train_snape(&log, &cfg(1)).unwrap();
    for traj in &out.trajectories {
        match traj.snapshots.last() {
            Some(last) => assert_eq!(out.model.user(traj.user), last.as_slice()),
            None => assert_eq!(
                out.model.user(traj.user),
                LatentModel::init(log.n_users(), log.n_items(), 5, 0.01, 9).user(traj.user)
            ),
        }
    }
}

#[test]
fn replaying_blocks_by_hand_reproduces_training() {
    let log = log(3);
    let c = cfg(2);
    let out = train_snape(&log, &c).unwrap();
    let mut m = LatentModel::init(log.n_users(), log.n_items(), c.dim_k, c.reg_lambda, c.seed);
    let blocks = user_blocks(&log);
    for _ in 0..c.epochs {
        for user_blocks in &blocks {
            for b in user_blocks {
                m.sgd_step(b, c.learning_rate).unwrap();
            }
        }
    }
    assert_eq!(m, out.model);
}

#[test]
fn training_is_deterministic_and_lowers_the_loss() {
    let log = log(4);
    let a = train_snape(&log, &cfg(3)).unwrap();
    let b = train_snape(&log, &cfg(3)).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.trajectories, b.trajectories);
    let blocks = user_blocks(&log);
    let init = LatentModel::init(log.n_users(), log.n_items(), 5, 0.01, 9);
    let before = trainer::mean_block_loss(&init, &blocks).unwrap();
    let after = trainer::mean_block_loss(&a.model, &blocks).unwrap();
    assert!(after < before, "{after} >= {before}");

    let p = train_bpr(&log, &cfg(1), 20_000).unwrap();
    assert_eq!(p, train_bpr(&log, &cfg(1), 20_000).unwrap());
    let before = trainer::sampled_triplet_loss(&init, &log, 5000, 1).unwrap();
    let after = trainer::sampled_triplet_loss(&p, &log, 5000, 1).unwrap();
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn exploding_learning_rate_reports_the_block() {
    let log = log(5);
    let c = TrainConfig {
        learning_rate: 1e300,
        ..cfg(1)
    };
    match train_snape(&log, &c) {
        Err(TrainError::NonFiniteUpdate { epoch, .. }) => assert_eq!(epoch, 1),
        other => panic!("expected NonFiniteUpdate, got {other:?}"),
    }
}

#[test]
fn checkpoint_and_trajectories_round_trip() {
    let log = log(6);
    let out = train_snape(&log, &cfg(1)).unwrap();
    let mut bytes = Vec::new();
    out.model.write_checkpoint(&mut bytes).unwrap();
    assert_eq!(bytes.len(), 7 + 4 * 8 + 8 * 5 * (log.n_users() + log.n_items()));
    assert_eq!(LatentModel::read_checkpoint(bytes.as_slice()).unwrap(), out.model);

    let mut jsonl = Vec::new();
    write_trajectories(&out.trajectories, &mut jsonl).unwrap();
    let back = read_trajectories(jsonl.as_slice()).unwrap();
    assert_eq!(back.len(), out.trajectories.len());
    for (a, b) in back.iter().zip(&out.trajectories) {
        assert_eq!((a.user, a.dim_k, &a.snapshots), (b.user, b.dim_k, &b.snapshots));
    }
}
