mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsekit::gen::{gen_cloud, CloudKind};
use sparsekit::tuner::{
    default_assignment, partition_groups, run_network, toy_unet, train_step, GroupConfig, LayerKind, LayerSpec, NetworkSpec, Phases,
    WallClock, INPUT,
};
use sparsekit::{
    default_space, quantize, tune_inference, DataflowConfig, DedupRule, Dense, ExecOptions, Reorder, SparseTensor, TilePreset, VoxelParams,
    WeightTensor,
};

fn cloud_tensor(n: usize, seed: u64, channels: usize) -> SparseTensor<f64> {
    let pts = gen_cloud(CloudKind::PlanarPatches, n, seed, 2.0);
    let raw: Vec<f64> = pts.iter().flatten().copied().collect();
    let t = quantize::<f64>(&raw, None, &VoxelParams::uniform(3, 0.05).unwrap(), DedupRule::First).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    t.with_features(features(t.len(), channels, || r.random_range(-3..=3) as f64)).unwrap()
}

/// Integer weights in {-1, 0, 1}. With integer features every intermediate
/// value of these small networks is an integer well below 2^53, so f64
/// results are exact whatever the summation order.
fn net_weights(net: &NetworkSpec, seed: u64) -> Vec<WeightTensor<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..net.layers.len())
        .map(|i| {
            let l = &net.layers[i];
            WeightTensor::from_fn(net.volume(i), l.c_in, l.c_out, |_, _, _| r.random_range(-1..=1) as f64)
        })
        .collect()
}

#[test]
fn every_config_gives_identical_network_output() {
    let net = toy_unet(2, 4, 3);
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let w: Vec<WeightTensor<f64>> = (0..net.layers.len())
        .map(|i| {
            let l = &net.layers[i];
            WeightTensor::from_fn(net.volume(i), l.c_in, l.c_out, |_, _, _| uniform(&mut r) * 0.2)
        })
        .collect();
    let x = cloud_tensor(3000, 12, 2);
    let x = x.with_features(features(x.len(), 2, || uniform(&mut r))).unwrap();
    let base = run_network(&net, &w, &x, &default_assignment(3), &ExecOptions::default()).unwrap();
    let want = to_f64(base.output.features());
    for c in default_space() {
        let out = run_network(&net, &w, &x, &[GroupConfig::uniform(c); 3], &ExecOptions::default()).unwrap();
        let err = max_rel_err(&to_f64(out.output.features()), &want);
        assert_eq!(err, 0.0, "{}", c.label());
        assert_eq!(out.output.features(), base.output.features(), "{}", c.label());
    }
}

#[test]
fn consecutive_submanifold_layers_share_one_group() {
    let conv = |name: &str, input: &str| LayerSpec {
        name: name.into(),
        kind: LayerKind::Conv,
        c_in: 2,
        c_out: 2,
        kernel_size: 3,
        stride: 1,
        inputs: vec![input.into()],
        transpose_of: None,
    };
    let net = NetworkSpec {
        dim: 3,
        layers: vec![conv("a", INPUT), conv("b", "a"), conv("c", "b")],
    };
    let x = cloud_tensor(500, 1, 2);
    let groups = partition_groups(&net, x.coord_set()).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].layers, vec![0, 1, 2]);
}

#[test]
fn unet_groups_follow_map_keys() {
    let net = toy_unet(1, 4, 2);
    let x = cloud_tensor(2000, 2, 1);
    let plan = sparsekit::tuner::plan(&net, x.coord_set()).unwrap();
    let groups: Vec<Vec<usize>> = plan.groups.iter().map(|g| g.layers.clone()).collect();
    assert_eq!(groups, vec![vec![0, 1, 5], vec![2, 4], vec![3]]);
    assert_eq!(plan.layers[2].key.canonical(), plan.layers[4].key.canonical());
    assert_ne!(plan.layers[2].key, plan.layers[4].key);
    assert_ne!(plan.layers[2].key, plan.layers[3].key);
}

#[test]
fn outputs_do_not_depend_on_the_assignment() {
    let net = toy_unet(2, 4, 3);
    let w = net_weights(&net, 3);
    let x = cloud_tensor(3000, 3, 2);
    let base = run_network(&net, &w, &x, &default_assignment(3), &ExecOptions::default()).unwrap();
    let space = default_space();
    for (i, c) in space.iter().enumerate() {
        let other = space[(i + 5) % space.len()];
        let a = vec![GroupConfig::uniform(*c), GroupConfig::uniform(other), GroupConfig::uniform(*c)];
        let out = run_network(&net, &w, &x, &a, &ExecOptions::with_workers(2)).unwrap();
        assert_eq!(out.output.features(), base.output.features(), "{}", c.label());
        assert_eq!(out.output.coords(), base.output.coords());
    }
    let online = DataflowConfig::implicit_gemm(2, TilePreset::LARGE).with_reorder(Reorder::Online);
    let out = run_network(&net, &w, &x, &[GroupConfig::uniform(online); 3], &ExecOptions::default()).unwrap();
    assert_eq!(out.output.features(), base.output.features());
}

#[test]
fn training_gradients_do_not_depend_on_the_assignment() {
    let net = toy_unet(1, 2, 2);
    let w = net_weights(&net, 4);
    let x = cloud_tensor(800, 4, 1);
    let base = train_step(&net, &w, &x, &default_assignment(3), Phases::ALL, &ExecOptions::default()).unwrap();
    for c in default_space() {
        let a = vec![
            GroupConfig {
                forward: c,
                dgrad: DataflowConfig::fetch_on_demand(),
                wgrad: c,
            };
            3
        ];
        let t = train_step(&net, &w, &x, &a, Phases::ALL, &ExecOptions::default()).unwrap();
        assert_eq!(t.input_grad, base.input_grad, "{}", c.label());
        assert_eq!(t.weight_grads, base.weight_grads, "{}", c.label());
    }
}

fn loss(net: &NetworkSpec, w: &[WeightTensor<f64>], x: &SparseTensor<f64>) -> f64 {
    let y = run_network(net, w, x, &default_assignment(3), &ExecOptions::default()).unwrap();
    0.5 * y.output.features().as_slice().iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn network_gradients_match_central_differences() {
    let net = toy_unet(1, 2, 2);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let w: Vec<WeightTensor<f64>> = (0..net.layers.len())
        .map(|i| {
            let l = &net.layers[i];
            WeightTensor::from_fn(net.volume(i), l.c_in, l.c_out, |_, _, _| uniform(&mut r) * 0.3)
        })
        .collect();
    let x = cloud_tensor(60, 5, 1);
    let x = x.with_features(features(x.len(), 1, || uniform(&mut r))).unwrap();
    let t = train_step(&net, &w, &x, &default_assignment(3), Phases::ALL, &ExecOptions::default()).unwrap();
    let eps = 1e-6;
    let dx = t.input_grad.unwrap();
    let (mut num, mut ana) = (Vec::new(), Vec::new());
    for j in 0..x.len() {
        let shifted = |d: f64| {
            let mut f = x.features().clone();
            f.row_mut(j)[0] += d;
            x.with_features(f).unwrap()
        };
        num.push((loss(&net, &w, &shifted(eps)) - loss(&net, &w, &shifted(-eps))) / (2.0 * eps));
        ana.push(dx.get(j, 0));
    }
    for (li, k) in [(0usize, 13usize), (2, 0), (4, 26), (5, 13)] {
        for idx in 0..w[li].c_in() * w[li].c_out() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[li].offset_mut(k)[idx] += eps;
            wm[li].offset_mut(k)[idx] -= eps;
            num.push((loss(&net, &wp, &x) - loss(&net, &wm, &x)) / (2.0 * eps));
            ana.push(t.weight_grads[li].offset(k)[idx]);
        }
    }
    let err = max_rel_err(&ana, &num);
    assert!(err <= 1e-5, "max relative error {err}");
}

#[test]
fn skipped_phases_use_stand_ins() {
    let net = toy_unet(1, 2, 2);
    let w = net_weights(&net, 6);
    let x = cloud_tensor(500, 6, 1);
    let a = default_assignment(3);
    let only_w = train_step(&net, &w, &x, &a, Phases { forward: false, dgrad: false, wgrad: true }, &ExecOptions::default()).unwrap();
    assert!(only_w.output.is_none() && only_w.input_grad.is_none());
    assert_eq!(only_w.weight_grads.len(), 6);
    let only_d = train_step(&net, &w, &x, &a, Phases { forward: false, dgrad: true, wgrad: false }, &ExecOptions::default()).unwrap();
    assert!(only_d.weight_grads.is_empty());
    assert_eq!(only_d.input_grad.unwrap().rows(), x.len());
}

#[test]
fn weight_shape_mismatch_is_descriptive() {
    let net = toy_unet(1, 2, 2);
    let mut w = net_weights(&net, 7);
    w[3] = WeightTensor::zeros(27, 1, 1);
    let x = cloud_tensor(200, 7, 1);
    let err = run_network(&net, &w, &x, &default_assignment(3), &ExecOptions::default()).unwrap_err();
    assert!(err.to_string().contains("mid"), "{err}");
}

#[test]
fn wall_clock_tuning_with_one_config() {
    let net = toy_unet(1, 4, 2);
    let w = net_weights(&net, 8);
    let samples = vec![cloud_tensor(1500, 8, 1), cloud_tensor(1500, 9, 1)];
    let mut m = WallClock::new(&net, &w, &samples, ExecOptions::default()).unwrap();
    m.warmup = 1;
    m.runs = 3;
    let only = DataflowConfig::implicit_gemm(1, TilePreset::SMALL);
    let r = tune_inference(&mut m, &[only], 11).unwrap();
    assert_eq!(r.log.len(), 3);
    assert!(r.groups.iter().all(|g| g.forward == only));
    assert_eq!(r.groups[1].layers, vec!["down".to_string(), "up".to_string()]);
    assert!(r.latency_ms > 0.0);
}

#[test]
fn two_dimensional_networks_run() {
    let net = NetworkSpec {
        dim: 2,
        layers: vec![
            LayerSpec {
                name: "a".into(),
                kind: LayerKind::Conv,
                c_in: 1,
                c_out: 2,
                kernel_size: 3,
                stride: 2,
                inputs: vec![INPUT.into()],
                transpose_of: None,
            },
            LayerSpec {
                name: "b".into(),
                kind: LayerKind::ConvTransposed,
                c_in: 2,
                c_out: 1,
                kernel_size: 3,
                stride: 2,
                inputs: vec!["a".into()],
                transpose_of: Some("a".into()),
            },
        ],
    };
    net.validate().unwrap();
    let raw: Vec<f64> = (0..40).flat_map(|i| [(i % 7) as f64, (i / 7) as f64]).collect();
    let x = quantize::<f64>(&raw, None, &VoxelParams::uniform(2, 1.0).unwrap(), DedupRule::First).unwrap();
    let w = vec![WeightTensor::from_fn(9, 1, 2, |k, _, o| (k + o) as f64), WeightTensor::from_fn(9, 2, 1, |k, c, _| (k * c) as f64)];
    let base = run_network(&net, &w, &x, &default_assignment(1), &ExecOptions::default()).unwrap();
    assert_eq!(base.output.len(), x.len());
    for c in default_space() {
        let out = run_network(&net, &w, &x, &[GroupConfig::uniform(c)], &ExecOptions::default()).unwrap();
        assert_eq!(out.output.features(), base.output.features());
    }
    let _ = Dense::<f64>::zeros(0, 0);
}
