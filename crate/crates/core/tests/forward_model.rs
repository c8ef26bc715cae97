use foresight_core::datagen::{build_dataset, generate_sequence, Example};
use foresight_core::forward_model::{
    decode, encode, eval_prediction, grad_check, grad_check_with, latent_step, loss_and_grad,
    predict_delta, train, validation_loss, ActionCode, Backend, ChainContext, TrainBatch,
    TrainConfig,
};
use foresight_core::nn::{NetConfig, Network, ACTION_INPUTS};
use foresight_core::raster::{Raster, RasterState};
use foresight_core::AffordanceKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random states and actions covering every predictor module.
fn synthetic_batch(cfg: &NetConfig, batch: usize, steps: usize, seed: u64) -> TrainBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.resolution;
    let state = |rng: &mut ChaCha8Rng| {
        RasterState::new(
            Raster::from_vec(n, n, 4, (0..n * n * 4).map(|_| rng.gen::<f32>()).collect()).unwrap(),
        )
        .unwrap()
    };
    let examples: Vec<Example> = (0..batch)
        .map(|b| {
            let frames: Vec<RasterState> = (0..=steps).map(|_| state(&mut rng)).collect();
            let masks = frames
                .windows(2)
                .map(|w| w[0].changed_mask(&w[1]).unwrap())
                .collect();
            let actions = (0..steps)
                .map(|t| {
                    let kind = AffordanceKind::ALL[(b + t) % 3];
                    ActionCode {
                        kind,
                        values: [
                            rng.gen(),
                            rng.gen(),
                            rng.gen(),
                            rng.gen(),
                            if kind == AffordanceKind::Turn {
                                0.25
                            } else {
                                0.0
                            },
                        ],
                        pixel: (rng.gen_range(0..n), rng.gen_range(0..n)),
                        symmetric: false,
                    }
                })
                .collect();
            Example {
                frames,
                masks,
                actions,
            }
        })
        .collect();
    TrainBatch::from_examples(&examples).unwrap()
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let cfg = NetConfig::small();
    let net: Network<f64> = Network::init(cfg, 11).unwrap();
    let batch = synthetic_batch(&cfg, 3, 3, 5);
    let r = grad_check(&net, &batch, 1e-4, 16, 1).unwrap();
    assert!(r.samples.len() >= 64);
    let worst = r
        .samples
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .unwrap();
    assert!(r.max_rel_error <= 1e-3, "worst sample {worst:?}");
}

#[test]
fn corrupted_gradients_are_caught() {
    let cfg = NetConfig::small();
    let net: Network<f64> = Network::init(cfg, 11).unwrap();
    let batch = synthetic_batch(&cfg, 3, 3, 5);
    let dec = net.layout.decoder_range();
    let r = grad_check_with(&net, &batch, 1e-4, 16, 1, |n, b| {
        let mut g = n.zero_grads();
        loss_and_grad(n, b, Some(&mut g));
        for v in &mut g[dec.clone()] {
            *v *= 1.1;
        }
        g
    })
    .unwrap();
    assert!(r.max_rel_error > 0.05, "max rel err {}", r.max_rel_error);
    assert!(r
        .samples
        .iter()
        .filter(|s| s.module != "decoder")
        .all(|s| s.rel_error <= 1e-3));
}

fn neural_chain(net: &Network<f32>, seed: u64) -> (Vec<f32>, Vec<Vec<f32>>, Vec<f32>) {
    let s = (seed..)
        .map(|k| generate_sequence(k, net.config.resolution))
        .find(|s| s.len() >= 3)
        .unwrap();
    let b = Backend::Neural(net);
    let mut cur = b.start(&s.frames[0], None).unwrap();
    let ChainContext::Neural { latent: c0, .. } = cur.context.clone() else {
        unreachable!()
    };
    let mut deltas = Vec::new();
    for a in &s.actions {
        let ChainContext::Neural { latent, memory } = cur.context.clone() else {
            unreachable!()
        };
        let input = ActionCode::new(a, net.config.resolution).input(&cur.state);
        let (delta, _) = predict_delta(net, &latent, &input, &memory).unwrap();
        deltas.push(delta);
        cur = b.advance(&[(&cur, a)]).unwrap().pop().unwrap().1;
    }
    let ChainContext::Neural { latent: last, .. } = cur.context else {
        unreachable!()
    };
    (c0, deltas, last)
}

#[test]
fn chained_latents_are_the_root_plus_every_delta() {
    let net: Network<f32> = Network::init(NetConfig::default(), 3).unwrap();
    for seed in [0, 40, 80] {
        let (c0, deltas, last) = neural_chain(&net, seed);
        let forward = deltas
            .iter()
            .fold(c0.clone(), |c, d| latent_step(&c, d).unwrap());
        let backward = deltas
            .iter()
            .rev()
            .fold(c0.clone(), |c, d| latent_step(&c, d).unwrap());
        let total = deltas
            .iter()
            .skip(1)
            .fold(deltas[0].clone(), |c, d| latent_step(&c, d).unwrap());
        let grouped = latent_step(&c0, &total).unwrap();
        for v in [&forward, &backward, &grouped] {
            for (a, b) in v.iter().zip(&last) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
    }
    assert!(latent_step(&[0.0; 3], &[0.0; 2]).is_err());
}

#[test]
fn predictors_only_read_their_own_parameters() {
    let cfg = NetConfig::small();
    let net: Network<f32> = Network::init(cfg, 4).unwrap();
    let mut zeroed = net.clone();
    for v in &mut zeroed.params[net.layout.predictor_range(AffordanceKind::Grasp)] {
        *v = 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c: Vec<f32> = (0..cfg.latent).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let m: Vec<f32> = (0..cfg.memory).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let a: Vec<f32> = (0..ACTION_INPUTS).map(|_| rng.gen()).collect();
    let turn = |n: &Network<f32>| n.predict(AffordanceKind::Turn, &c, &a, &m, 1);
    let grasp = |n: &Network<f32>| n.predict(AffordanceKind::Grasp, &c, &a, &m, 1);
    assert_eq!(turn(&net).delta, turn(&zeroed).delta);
    assert_eq!(turn(&net).memory, turn(&zeroed).memory);
    assert_ne!(grasp(&net).delta, grasp(&zeroed).delta);
}

#[test]
fn outputs_stay_in_their_ranges() {
    let net: Network<f32> = Network::init(NetConfig::default(), 5).unwrap();
    let s = generate_sequence(3, 32);
    let c = encode(&net, &s.frames[0]).unwrap();
    assert!(c.iter().all(|v| v.abs() < 1.0));
    let input = ActionCode::new(&s.actions[0], 32).input(&s.frames[0]);
    let (delta, mem) = predict_delta(&net, &c, &input, &vec![0.0; net.config.memory]).unwrap();
    assert!(delta.iter().chain(&mem).all(|v| v.abs() < 1.0));
    // Even a latent far outside the trained range decodes to a valid diff.
    for scale in [1.0f32, 50.0, -50.0] {
        let d: Vec<f32> = delta.iter().map(|v| v * scale).collect();
        let diff = decode(&net, &d).unwrap();
        assert!(diff.raster().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(decode(&net, &[0.0; 3]).is_err());
    assert!(encode(&net, &generate_sequence(3, 16).frames[0]).is_err());
}

#[test]
fn oracle_predictions_have_zero_error() {
    let d = build_dataset(40, 2, 32).unwrap();
    let r = eval_prediction(Backend::Oracle, &d.test).unwrap();
    assert!(r.overall.frames > 0);
    assert_eq!(r.overall.all_area, 0.0);
    assert_eq!(r.overall.changed_area, 0.0);
    assert!(r
        .steps
        .iter()
        .all(|s| s.all_area == 0.0 && s.changed_area == 0.0));
}

#[test]
fn training_overfits_a_tiny_dataset() {
    let mut d = build_dataset(10, 6, 8).unwrap();
    d.train.append(&mut d.val);
    d.train.append(&mut d.test);
    d.val = d.train.clone();
    let cfg = TrainConfig {
        batches: 2000,
        batch_size: 8,
        learning_rate: 1e-3,
        eval_interval: 250,
        augment: false,
        net: NetConfig::small(),
        ..TrainConfig::default()
    };
    let before = validation_loss(&Network::init(cfg.net, cfg.init_seed).unwrap(), &d.train);
    let (net, report) = train(&d, &cfg, |_| {}).unwrap();
    let after = validation_loss(&net, &d.train);
    assert_eq!(after, report.best_val_loss);
    assert!(after <= 0.5 * before, "loss {before} -> {after}");
}
