use std::collections::BTreeMap;

use ndarray::{array, Array1, Array2};
use privleak_core::neural::{
    from_text, joint_gradients, to_text, train_cgt, train_joint, train_plain, Attacker, AttackerTopology, Dense,
    HeadSpec, JointData, JointMode, Labeled, Mlp, MlpGrads, Network, TrainConfig,
};
use privleak_core::{Error, RandomSource};

fn small_net(seed: u64) -> Network {
    let heads = [
        HeadSpec {
            name: "base".into(),
            classes: 3,
            hidden: vec![4],
        },
        HeadSpec {
            name: "adv".into(),
            classes: 2,
            hidden: vec![3],
        },
    ];
    Network::new(5, &[4, 3], &heads, &mut RandomSource::new(seed)).unwrap()
}

fn random_batch(rng: &mut RandomSource, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |_| rng.uniform(-1.5, 1.5))
}

fn random_labels(rng: &mut RandomSource, rows: usize, classes: usize) -> Vec<usize> {
    (0..rows).map(|_| rng.below(classes)).collect()
}

/// Smallest |pre-activation| of any ReLU unit on `x`. Central differences are
/// only meaningful when every unit is farther than the step from its kink.
fn relu_margin(net: &Network, x: &Array2<f64>) -> f64 {
    fn walk(mlp: &Mlp, x: Array2<f64>, margin: &mut f64) -> Array2<f64> {
        let mut h = x;
        for (k, l) in mlp.layers.iter().enumerate() {
            let z = h.dot(&l.weights) + &l.bias;
            if k + 1 < mlp.layers.len() || mlp.relu_output {
                *margin = z.iter().fold(*margin, |m, v| m.min(v.abs()));
                h = z.mapv(|v| v.max(0.0));
            } else {
                h = z;
            }
        }
        h
    }
    let mut margin = f64::INFINITY;
    let rep = walk(&net.trunk, x.clone(), &mut margin);
    for head in net.heads.values() {
        walk(head, rep.clone(), &mut margin);
    }
    margin
}

/// Random batch on which every ReLU is differentiable with room to spare.
fn smooth_batch(net: &Network, rng: &mut RandomSource, rows: usize) -> Array2<f64> {
    loop {
        let x = random_batch(rng, rows, net.input_dim());
        if relu_margin(net, &x) > 1e-3 {
            return x;
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-7)
}

/// Central differences of `loss` w.r.t. every parameter of the MLP selected
/// by `pick`, compared with `analytic`.
fn check_fd(net: &Network, pick: impl Fn(&mut Network) -> &mut Mlp, analytic: &MlpGrads, loss: impl Fn(&Network) -> f64) {
    const H: f64 = 1e-5;
    let expected: Vec<f64> = analytic.flat().collect();
    let mut probe = net.clone();
    let count = pick(&mut probe).param_count();
    assert_eq!(count, expected.len());
    for k in 0..count {
        let orig = *pick(&mut probe).params_mut().nth(k).unwrap();
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig + H;
        let up = loss(&probe);
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig - H;
        let down = loss(&probe);
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig;
        let numeric = (up - down) / (2.0 * H);
        let err = rel_err(expected[k], numeric);
        assert!(
            err < 1e-4,
            "param {k}: analytic {} vs numeric {numeric} (rel {err})",
            expected[k]
        );
    }
}

#[test]
fn zero_weights_give_uniform_output_and_log_k_loss() {
    let mut net = small_net(1);
    for p in net.trunk.params_mut() {
        *p = 0.0;
    }
    for head in net.heads.values_mut() {
        for p in head.params_mut() {
            *p = 0.0;
        }
    }
    let p = net.forward(&[0.3, -1.0, 2.0, 0.0, 5.0], "base").unwrap();
    for v in &p {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let mut rng = RandomSource::new(2);
    let x = random_batch(&mut rng, 7, 5);
    let y = random_labels(&mut rng, 7, 3);
    assert!((net.loss(x.view(), &y, "base").unwrap() - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn probabilities_are_normalized() {
    let net = small_net(3);
    let mut rng = RandomSource::new(4);
    let x = random_batch(&mut rng, 1000, 5);
    for head in ["base", "adv"] {
        let p = net.predict_proba(x.view(), head).unwrap();
        for row in p.rows() {
            assert!(row.iter().all(|&v| v > 0.0));
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn two_by_two_toy_network_matches_hand_arithmetic() {
    // z = x W1 + b1 = [0.1, -1.8], relu -> [0.1, 0]; logits = [0.1, 0.7].
    let trunk = Mlp {
        layers: vec![Dense {
            weights: array![[0.5, -1.0], [0.25, 0.5]],
            bias: array![0.1, 0.2],
        }],
        relu_output: true,
    };
    let head = Mlp {
        layers: vec![Dense {
            weights: array![[1.0, 2.0], [3.0, 4.0]],
            bias: array![0.0, 0.5],
        }],
        relu_output: false,
    };
    let net = Network {
        trunk,
        heads: BTreeMap::from([("t".to_string(), head)]),
    };
    let p = net.forward(&[1.0, -2.0], "t").unwrap();
    assert!((p[0] - 0.3543436937742045).abs() < 1e-12);
    assert!((p[1] - 0.6456563062257954).abs() < 1e-12);
    let x = array![[1.0, -2.0]];
    assert!((net.loss(x.view(), &[1], "t").unwrap() - 0.43748795048588573).abs() < 1e-12);
}

#[test]
fn gradients_match_finite_differences_for_each_head() {
    let mut rng = RandomSource::new(5);
    for seed in 0..3 {
        let net = small_net(10 + seed);
        let x = smooth_batch(&net, &mut rng, 6);
        for (head, k) in [("base", 3), ("adv", 2)] {
            let y = random_labels(&mut rng, 6, k);
            let g = net.backward(x.view(), &y, head).unwrap();
            let loss = |n: &Network| n.loss(x.view(), &y, head).unwrap();
            check_fd(&net, |n| &mut n.trunk, &g.trunk, loss);
            check_fd(&net, |n| n.heads.get_mut(head).unwrap(), &g.head, loss);

            // Input gradient.
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    let mut up = x.clone();
                    up[[i, j]] += 1e-5;
                    let mut down = x.clone();
                    down[[i, j]] -= 1e-5;
                    let numeric =
                        (net.loss(up.view(), &y, head).unwrap() - net.loss(down.view(), &y, head).unwrap()) / 2e-5;
                    assert!(rel_err(g.input[[i, j]], numeric) < 1e-4);
                }
            }
        }
    }
}

#[test]
fn gradient_reversal_gradients_match_finite_differences() {
    let mut rng = RandomSource::new(6);
    let net = small_net(20);
    let x = smooth_batch(&net, &mut rng, 8);
    let y = random_labels(&mut rng, 8, 3);
    let z = random_labels(&mut rng, 8, 2);
    for lambda in [0.0, 0.7, 2.0] {
        let g = joint_gradients(&net, x.view(), "base", &y, "adv", &z, JointMode::GradientReversal, lambda).unwrap();
        let trunk_objective =
            |n: &Network| n.loss(x.view(), &y, "base").unwrap() - lambda * n.loss(x.view(), &z, "adv").unwrap();
        check_fd(&net, |n| &mut n.trunk, &g.trunk, trunk_objective);
        check_fd(&net, |n| n.heads.get_mut("base").unwrap(), &g.base_head, |n| {
            n.loss(x.view(), &y, "base").unwrap()
        });
        check_fd(&net, |n| n.heads.get_mut("adv").unwrap(), &g.adversary_head, |n| {
            n.loss(x.view(), &z, "adv").unwrap()
        });
    }
    // Baseline: the trunk sees only the base loss.
    let g = joint_gradients(&net, x.view(), "base", &y, "adv", &z, JointMode::Baseline, 1.0).unwrap();
    check_fd(&net, |n| &mut n.trunk, &g.trunk, |n| n.loss(x.view(), &y, "base").unwrap());
}

#[test]
fn reversal_trunk_gradient_is_base_minus_lambda_adversary() {
    let mut rng = RandomSource::new(7);
    let net = small_net(30);
    for _ in 0..10 {
        let x = random_batch(&mut rng, 16, 5);
        let y = random_labels(&mut rng, 16, 3);
        let z = random_labels(&mut rng, 16, 2);
        let lambda = rng.uniform(0.0, 3.0);
        let gr = joint_gradients(&net, x.view(), "base", &y, "adv", &z, JointMode::GradientReversal, lambda).unwrap();
        let base = joint_gradients(&net, x.view(), "base", &y, "adv", &z, JointMode::Baseline, lambda).unwrap();
        let adv = net.backward(x.view(), &z, "adv").unwrap();
        let mut expected = base.trunk.clone();
        expected.blend(1.0, &adv.trunk, -lambda);
        for (a, b) in gr.trunk.flat().zip(expected.flat()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert_eq!(gr.base_head, base.base_head);
        assert_eq!(gr.adversary_head, base.adversary_head);
    }
}

#[test]
fn duplicated_rows_leave_gradients_unchanged() {
    let mut rng = RandomSource::new(8);
    let net = small_net(40);
    let x = random_batch(&mut rng, 5, 5);
    let y = random_labels(&mut rng, 5, 3);
    let x2 = ndarray::concatenate![ndarray::Axis(0), x, x];
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let a = net.backward(x.view(), &y, "base").unwrap();
    let b = net.backward(x2.view(), &y2, "base").unwrap();
    assert!((a.loss - b.loss).abs() < 1e-14);
    for (u, v) in a.trunk.flat().chain(a.head.flat()).zip(b.trunk.flat().chain(b.head.flat())) {
        assert!((u - v).abs() < 1e-14 * (1.0 + u.abs()));
    }
}

#[test]
fn errors_on_bad_heads_labels_and_dims() {
    let net = small_net(1);
    let x = Array2::zeros((2, 5));
    assert!(matches!(net.backward(x.view(), &[0, 1], "nope"), Err(Error::UnknownHead(_))));
    assert!(matches!(
        net.backward(x.view(), &[0, 3], "base"),
        Err(Error::LabelOutOfRange { label: 3, classes: 3 })
    ));
    assert!(net.backward(x.view(), &[0], "base").is_err());
    assert!(matches!(net.forward(&[0.0; 4], "base"), Err(Error::DimMismatch { .. })));
}

/// Three well-separated Gaussian clusters and an unrelated binary label.
fn clusters(seed: u64, n: usize) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let mut rng = RandomSource::new(seed);
    let mut x = Array2::zeros((n, 8));
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        for j in 0..8 {
            x[[i, j]] = rng.standard_normal() * 0.5 + if j == c { 3.0 } else { 0.0 };
        }
        y.push(c);
        z.push(rng.below(2));
    }
    (x, y, z)
}

fn standard_pair(seed: u64) -> Network {
    Network::standard(8, &[("base", 3), ("adv", 2)], &mut RandomSource::new(seed)).unwrap()
}

#[test]
fn baseline_learns_separable_data() {
    let (x, y, z) = clusters(9, 600);
    let mut net = standard_pair(1);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let curve = train_joint(&mut net, data, &TrainConfig::default(), JointMode::Baseline).unwrap();
    let pred = net.predict(x.view(), "base").unwrap();
    let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
    assert_eq!(curve.task("base").len(), 50);
    assert!(net.is_finite());
}

#[test]
fn reversal_with_zero_lambda_is_bitwise_baseline() {
    let (x, y, z) = clusters(10, 300);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let cfg = TrainConfig {
        lambda: 0.0,
        epochs: 5,
        ..TrainConfig::default()
    };
    let mut a = standard_pair(2);
    let mut b = standard_pair(2);
    let ca = train_joint(&mut a, data, &cfg, JointMode::Baseline).unwrap();
    let cb = train_joint(&mut b, data, &cfg, JointMode::GradientReversal).unwrap();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}

#[test]
fn training_is_deterministic() {
    let (x, y, z) = clusters(11, 200);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let run = || {
        let mut n = standard_pair(3);
        train_joint(&mut n, data, &cfg, JointMode::GradientReversal).unwrap();
        n
    };
    assert_eq!(run(), run());
    let mut other = standard_pair(3);
    train_joint(&mut other, data, &TrainConfig { seed: 99, ..cfg }, JointMode::GradientReversal).unwrap();
    assert_ne!(run(), other);
}

fn cgt_nets() -> (Network, Network) {
    let b = Network::standard(8, &[("base", 3)], &mut RandomSource::new(4)).unwrap();
    let p = Network::standard(8, &[("adv", 2)], &mut RandomSource::new(5)).unwrap();
    (b, p)
}

#[test]
fn cgt_without_mixing_matches_plain_training() {
    let (x, y, z) = clusters(12, 250);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let base_cfg = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let (mut plain_b, mut plain_p) = cgt_nets();
    train_plain(&mut plain_b, x.view(), &y, "base", &base_cfg).unwrap();
    train_plain(&mut plain_p, x.view(), &z, "adv", &base_cfg).unwrap();

    for cfg in [
        TrainConfig {
            alpha: 0.0,
            ..base_cfg
        },
        TrainConfig {
            cgt_step: 0.0,
            ..base_cfg
        },
    ] {
        let (mut b, mut p) = cgt_nets();
        train_cgt(&mut b, &mut p, data, &cfg).unwrap();
        assert_eq!(b, plain_b);
        assert_eq!(p, plain_p);
    }

    let (mut b, mut p) = cgt_nets();
    train_cgt(&mut b, &mut p, data, &base_cfg).unwrap();
    assert_ne!(b, plain_b);
}

#[test]
fn cgt_with_default_step_and_mix_reduces_training_loss() {
    let (x, y, z) = clusters(13, 600);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let cfg = TrainConfig::default();
    assert_eq!((cfg.cgt_step, cfg.alpha), (5.0, 0.5));
    let (mut b, mut p) = cgt_nets();
    let curve = train_cgt(&mut b, &mut p, data, &cfg).unwrap();
    let base = curve.task("base");
    assert!(base[base.len() - 1] < 0.5 * base[0], "{:?}", base);
    assert!(b.is_finite() && p.is_finite());
}

#[test]
fn cgt_rejects_alpha_outside_unit_interval() {
    let (x, y, z) = clusters(14, 30);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let (mut b, mut p) = cgt_nets();
    for alpha in [-0.1, 1.5, f64::NAN] {
        let cfg = TrainConfig {
            alpha,
            ..TrainConfig::default()
        };
        assert!(matches!(train_cgt(&mut b, &mut p, data, &cfg), Err(Error::Parameter { .. })));
    }
}

#[test]
fn non_finite_inputs_abort_with_diagnostics() {
    let (mut x, y, z) = clusters(15, 64);
    x[[0, 0]] = f64::INFINITY;
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let mut net = standard_pair(1);
    let err = train_joint(&mut net, data, &TrainConfig::default(), JointMode::Baseline).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }), "{err}");
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let (x, y, z) = clusters(16, 100);
    let mut net = standard_pair(6);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    train_joint(&mut net, data, &TrainConfig { epochs: 2, ..TrainConfig::default() }, JointMode::Baseline).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.txt");
    privleak_core::neural::save_network(&net, &path).unwrap();
    assert_eq!(privleak_core::neural::load_network(&path).unwrap(), net);

    let text = to_text(&net);
    let broken = text.replacen("dense 8 64", "dense 8 63", 1);
    let err = from_text(&broken, "mem").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
}

#[test]
fn fresh_attacker_recovers_cluster_labels() {
    let (x, y, _) = clusters(17, 600);
    let (xv, yv, _) = clusters(18, 150);
    let cfg = TrainConfig::default();
    let attacker = Attacker::fit(
        Labeled { x: x.view(), labels: &y },
        Some(Labeled { x: xv.view(), labels: &yv }),
        3,
        AttackerTopology { depth: 2, width: 50 },
        &cfg,
        &RandomSource::new(1),
    )
    .unwrap();
    let pred = attacker.predict(xv.view()).unwrap();
    let acc = pred.iter().zip(&yv).filter(|(a, b)| a == b).count() as f64 / yv.len() as f64;
    assert!(acc >= 0.95, "{acc}");
    assert_eq!(attacker.model.layers.len(), 3);
}

#[test]
fn dense_layer_shapes() {
    let d = Dense::init(3, 7, &mut RandomSource::new(1));
    assert_eq!((d.inputs(), d.outputs()), (3, 7));
    let limit = (6.0f64 / 10.0).sqrt();
    assert!(d.weights.iter().all(|w| w.abs() <= limit));
    assert_eq!(d.bias, Array1::<f64>::zeros(7));
}

