use auvrl_core::nn::{gradient_check, Adam, AdamConfig, Checkpoint, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hundred_random_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inputs = rng.gen_range(1..=4);
        let outputs = rng.gen_range(2..=5);
        let mut sizes = vec![inputs];
        for _ in 0..rng.gen_range(1..=2) {
            sizes.push(rng.gen_range(2..=12));
        }
        sizes.push(outputs);
        let mut net = Mlp::random(&sizes, &mut rng).unwrap();
        for b in net.layers_mut().iter_mut().flat_map(|l| l.biases.iter_mut()) {
            *b = rng.gen_range(-0.1..0.1);
        }
        let obs: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let action = rng.gen_range(0..outputs);
        let target = rng.gen_range(-1.0..1.0);
        let report = gradient_check(&net, &obs, action, target, 1e-6).unwrap();
        assert_eq!(report.params_checked, net.param_count());
        worst = worst.max(report.max_relative_error);
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn five_hundred_updates_fit_a_random_teacher() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let teacher = Mlp::random(&[3, 8, 1], &mut rng).unwrap();
    let inputs: Vec<Vec<f64>> = (0..32).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<f64> = inputs.iter().map(|x| teacher.forward(x).unwrap()[0]).collect();
    let mut net = Mlp::random(&[3, 64, 64, 1], &mut rng).unwrap();
    let mut opt = Adam::new(AdamConfig::default(), &net);
    let mse = |net: &Mlp| {
        inputs
            .iter()
            .zip(&targets)
            .map(|(x, y)| (y - net.forward(x).unwrap()[0]).powi(2))
            .sum::<f64>()
            / 32.0
    };
    let before = mse(&net);
    for _ in 0..500 {
        let mut grads = net.zeros_like();
        for (x, &y) in inputs.iter().zip(&targets) {
            net.accumulate_gradient(x, 0, y, 1.0 / 32.0, &mut grads).unwrap();
        }
        opt.apply_update(&mut net, &grads).unwrap();
    }
    let after = mse(&net);
    assert!(after <= 0.1 * before, "mse {before} -> {after}");
}

#[test]
fn checkpoint_file_round_trip_reproduces_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Mlp::random(&[4, 16, 16, 5], &mut rng).unwrap();
    let mut opt = Adam::new(AdamConfig::default(), &net);
    let mut trained = net.clone();
    let grads = trained.backward(&[0.1, 0.2, 0.3, 0.4], 1, 2.0).unwrap();
    opt.apply_update(&mut trained, &grads).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let ckpt = Checkpoint {
        network: trained.clone(),
        optimizer: Some(opt.clone()),
        step: 42,
    };
    std::fs::write(&path, ckpt.to_json_bytes()).unwrap();
    let back = Checkpoint::from_json_bytes(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(back.step, 42);
    assert_eq!(back.network, trained);
    assert_eq!(back.optimizer.as_ref(), Some(&opt));
    let obs = [0.3, -1.2, 0.7, 2.5];
    let a = trained.forward(&obs).unwrap();
    let b = back.network.forward(&obs).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn corrupted_checkpoint_names_the_field() {
    let net = Mlp::zeros(&[2, 3, 2]).unwrap();
    let text = String::from_utf8(Checkpoint {
        network: net,
        optimizer: None,
        step: 0,
    }
    .to_json_bytes())
    .unwrap();
    let broken = text.replacen("0000000000000000", "zz", 1);
    let err = Checkpoint::from_json_bytes(broken.as_bytes()).unwrap_err().to_string();
    // Object keys serialize in sorted order, so the biases come first.
    assert!(err.contains("biases[0][0]"), "{err}");
}
