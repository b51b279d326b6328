mod common;

use std::sync::Arc;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsekit::exec::{conv_fetch_on_demand, conv_gather_scatter, conv_implicit_gemm, prepare_os, reduce_partials};
use sparsekit::kmap::{build_kmap_ws_transposed, transpose_ws, Pair};
use sparsekit::{
    conv_dgrad, conv_forward, conv_ref, conv_wgrad, default_space, toy, DataflowConfig, Dense, Error, ExecOptions, KernelMapWS, LayerMap,
    TilePreset, WeightTensor,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn reference_matches_definition() {
    let mut r = rng(1);
    for _ in 0..25 {
        let inst = random_instance(&mut r, 150, &[1, 3], &[1, 2], 3);
        let x = features::<f64>(inst.input.len(), inst.c_in, || uniform(&mut r));
        let w = weights::<f64>(&inst, || uniform(&mut r));
        let y = conv_ref(&x, &w, &inst.ws()).unwrap();
        assert!(max_rel_err(&to_f64(&y), &to_f64(&brute_force(&inst, &x, &w))) < 1e-12);
    }
}

#[test]
fn deterministic_dataflows_are_bit_exact_on_continuous_values() {
    let mut r = rng(2);
    let space = default_space();
    for _ in 0..20 {
        let inst = random_instance(&mut r, 400, &[1, 4, 16], &[1, 2], 3);
        let ws = inst.ws();
        let x = features::<f64>(inst.input.len(), inst.c_in, || uniform(&mut r));
        let w = weights::<f64>(&inst, || uniform(&mut r));
        let want = bits(&conv_ref(&x, &w, &ws).unwrap());
        for c in &space {
            let y = conv_forward(&x, &w, &layer_map(&ws, c), c, &ExecOptions::default()).unwrap();
            assert_eq!(bits(&y), want, "{}", c.label());
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let mut r = rng(3);
    let inst = random_instance(&mut r, 1500, &[4], &[1], 3);
    let ws = inst.ws();
    let x = features::<f64>(inst.input.len(), inst.c_in, || uniform(&mut r));
    let w = weights::<f64>(&inst, || uniform(&mut r));
    for c in default_space() {
        let map = layer_map(&ws, &c);
        let one = bits(&conv_forward(&x, &w, &map, &c, &ExecOptions::default()).unwrap());
        for workers in [2, 3, 8] {
            let y = conv_forward(&x, &w, &map, &c, &ExecOptions::with_workers(workers)).unwrap();
            assert_eq!(bits(&y), one, "{} with {workers} workers", c.label());
        }
    }
}

#[test]
fn nondeterministic_fetch_stays_within_tolerance() {
    let mut r = rng(4);
    let inst = random_instance(&mut r, 1000, &[4], &[1], 3);
    let ws = inst.ws();
    let x = features::<f64>(inst.input.len(), inst.c_in, || uniform(&mut r));
    let w = weights::<f64>(&inst, || uniform(&mut r));
    let c = DataflowConfig::fetch_on_demand().with_deterministic(false);
    let y = conv_fetch_on_demand(&x, &w, &ws, &c, &ExecOptions::with_workers(4)).unwrap();
    let want = conv_ref(&x, &w, &ws).unwrap();
    assert!(max_rel_err(&to_f64(&y), &to_f64(&want)) < 1e-12);
}

#[test]
fn nondeterministic_splits_stay_within_tolerance() {
    let mut r = rng(14);
    let inst = random_instance(&mut r, 1000, &[4], &[1], 3);
    let raw = inst.os();
    let x = features::<f64>(inst.input.len(), inst.c_in, || uniform(&mut r));
    let w = weights::<f64>(&inst, || uniform(&mut r));
    let want = to_f64(&conv_ref(&x, &w, &inst.ws()).unwrap());
    for s in 2..=4 {
        let c = DataflowConfig::implicit_gemm(s, TilePreset::SMALL).with_deterministic(false);
        let y = conv_implicit_gemm(&x, &w, &prepare_os(&raw, &c).unwrap(), &c, &ExecOptions::with_workers(3)).unwrap();
        assert!(max_rel_err(&to_f64(&y), &want) < 1e-12, "splits {s}");
    }
}

#[test]
fn identity_weights_reproduce_input() {
    let mut r = rng(5);
    let inst = random_instance(&mut r, 300, &[3], &[1], 3);
    let ws = inst.ws();
    let x = features::<f32>(inst.input.len(), 3, || uniform(&mut r));
    let w = WeightTensor::<f32>::identity(27, 3, inst.offsets.center());
    for c in default_space() {
        let y = conv_forward(&x, &w, &layer_map(&ws, &c), &c, &ExecOptions::default()).unwrap();
        assert_eq!(y, x, "{}", c.label());
    }
}

#[test]
fn single_pair_is_a_rank_one_update() {
    let map = KernelMapWS::new(2, 1, vec![vec![], vec![Pair::new(1, 0)]]).unwrap();
    let x = Dense::from_vec(2, 2, vec![9.0, 9.0, 2.0, 3.0]).unwrap();
    let w = WeightTensor::new(2, 2, 1, vec![0.0, 0.0, 5.0, 7.0]).unwrap();
    let c = DataflowConfig::fetch_on_demand();
    let y = conv_fetch_on_demand(&x, &w, &map, &c, &ExecOptions::default()).unwrap();
    assert_eq!(y.as_slice(), &[2.0 * 5.0 + 3.0 * 7.0]);
    let y = conv_gather_scatter(&x, &w, &map, &c, &ExecOptions::default()).unwrap();
    assert_eq!(y.as_slice(), &[31.0]);
}

#[test]
fn toy_instance_splits_agree() {
    let toy = toy::instance();
    let ws = toy.map_ws();
    let x = Dense::from_fn(ws.n_in(), 1, |r, _| (1u32 << r) as f64);
    let w = WeightTensor::from_fn(9, 1, 1, |_, _, _| 1.0);
    let run = |s| {
        let c = DataflowConfig::implicit_gemm(s, TilePreset::SMALL);
        conv_forward(&x, &w, &layer_map(&ws, &c), &c, &ExecOptions::default()).unwrap()
    };
    assert_eq!(run(3), run(1));
    assert_eq!(run(1).get(1, 0), 1.0 + 2.0 + 4.0 + 8.0);
}

#[test]
fn offline_contract_is_enforced() {
    let toy = toy::instance();
    let raw = toy.map_os();
    let x = Dense::<f64>::zeros(raw.n_in(), 1);
    let w = WeightTensor::zeros(9, 1, 1);
    let c = DataflowConfig::implicit_gemm(2, TilePreset::SMALL);
    let err = conv_implicit_gemm(&x, &w, &raw, &c, &ExecOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
    let c = DataflowConfig::gather_gemm_scatter();
    assert!(conv_forward(&x, &w, &LayerMap::Os(Arc::new(raw)), &c, &ExecOptions::default()).is_err());
}

#[test]
fn reduce_partials_is_a_naive_sum() {
    let mut r = rng(6);
    let bufs: Vec<Dense<f64>> = (0..4).map(|_| features(5, 3, || uniform(&mut r))).collect();
    let sum = reduce_partials(&bufs).unwrap();
    for i in 0..5 {
        for j in 0..3 {
            let naive = ((0.0 + bufs[0].get(i, j)) + bufs[1].get(i, j) + bufs[2].get(i, j)) + bufs[3].get(i, j);
            assert_eq!(sum.get(i, j), naive);
        }
    }
    assert_eq!(reduce_partials(&bufs[..1]).unwrap(), bufs[0]);
    assert!(reduce_partials::<f64>(&[]).is_err());
}

#[test]
fn linearity_is_exact_on_dyadic_values() {
    let mut r = rng(7);
    for _ in 0..10 {
        let inst = random_instance(&mut r, 300, &[1, 4], &[1, 2], 3);
        let ws = inst.ws();
        let x1 = features::<f64>(inst.input.len(), inst.c_in, || dyadic(&mut r));
        let x2 = features::<f64>(inst.input.len(), inst.c_in, || dyadic(&mut r));
        let w = weights::<f64>(&inst, || dyadic(&mut r));
        let mix = Dense::from_fn(x1.rows(), x1.cols(), |i, j| 2.0 * x1.get(i, j) - 0.5 * x2.get(i, j));
        for c in default_space() {
            let m = layer_map(&ws, &c);
            let f = |x: &Dense<f64>| conv_forward(x, &w, &m, &c, &ExecOptions::default()).unwrap();
            let (y1, y2, ym) = (f(&x1), f(&x2), f(&mix));
            let lin = Dense::from_fn(y1.rows(), y1.cols(), |i, j| 2.0 * y1.get(i, j) - 0.5 * y2.get(i, j));
            assert_eq!(ym, lin, "{}", c.label());
        }
    }
}

#[test]
fn dgrad_matches_reference_on_transposed_problem() {
    let mut r = rng(8);
    for _ in 0..15 {
        let inst = random_instance(&mut r, 300, &[1, 4, 16], &[1, 2], 3);
        let ws = inst.ws();
        let dy = features::<f64>(inst.output.len(), inst.c_out, || uniform(&mut r));
        let w = weights::<f64>(&inst, || uniform(&mut r));
        let want = conv_ref(&dy, &w.transposed(), &transpose_ws(&ws)).unwrap();
        for c in default_space() {
            let dx = conv_dgrad(&dy, &w, &layer_map(&ws, &c), &c, &ExecOptions::default()).unwrap();
            assert_eq!(bits(&dx), bits(&want), "{}", c.label());
        }
    }
}

#[test]
fn transposed_map_matches_direct_construction() {
    let mut r = rng(9);
    for _ in 0..10 {
        let inst = random_instance(&mut r, 400, &[1], &[2], 3);
        let down = inst.ws();
        let up = build_kmap_ws_transposed(&inst.output, &inst.input, inst.stride, &inst.offsets).unwrap();
        let sorted = |m: &KernelMapWS| {
            (0..m.volume())
                .map(|k| {
                    let mut p = m.pairs(k).to_vec();
                    p.sort_by_key(|p| (p.output, p.input));
                    p
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(sorted(&transpose_ws(&down)), sorted(&up));
    }
}

#[test]
fn wgrad_layouts_agree_and_match_definition() {
    let mut r = rng(10);
    for _ in 0..10 {
        let inst = random_instance(&mut r, 200, &[1, 4], &[1, 2], 3);
        let ws = inst.ws();
        let x = features::<f64>(inst.input.len(), inst.c_in, || dyadic(&mut r));
        let dy = features::<f64>(inst.output.len(), inst.c_out, || dyadic(&mut r));
        let mut want = WeightTensor::<f64>::zeros(27, inst.c_in, inst.c_out);
        for k in 0..27 {
            for p in ws.pairs(k) {
                for c in 0..inst.c_in {
                    for o in 0..inst.c_out {
                        want.offset_mut(k)[c * inst.c_out + o] += x.get(p.input as usize, c) * dy.get(p.output as usize, o);
                    }
                }
            }
        }
        for c in default_space() {
            let dw = conv_wgrad(&x, &dy, &layer_map(&ws, &c), &c, &ExecOptions::with_workers(3)).unwrap();
            assert_eq!(dw, want, "{}", c.label());
        }
    }
    let zero = Dense::<f64>::zeros(1, 1);
    let single = KernelMapWS::new(1, 1, vec![vec![Pair::new(0, 0)]]).unwrap();
    let x = Dense::from_vec(1, 2, vec![2.0, 3.0]).unwrap();
    let dy = Dense::from_vec(1, 2, vec![5.0, 7.0]).unwrap();
    let c = DataflowConfig::default();
    let m = LayerMap::Ws(Arc::new(single));
    let dw = conv_wgrad(&x, &dy, &m, &c, &ExecOptions::default()).unwrap();
    assert_eq!(dw.as_slice(), &[10.0, 14.0, 15.0, 21.0]);
    let m1 = LayerMap::Ws(Arc::new(KernelMapWS::new(1, 1, vec![vec![Pair::new(0, 0)]]).unwrap()));
    let dz = conv_wgrad(&Dense::from_vec(1, 1, vec![4.0]).unwrap(), &zero, &m1, &c, &ExecOptions::default()).unwrap();
    assert_eq!(dz.as_slice(), &[0.0]);
}

#[test]
fn identity_dgrad_returns_dy() {
    let mut r = rng(11);
    let inst = random_instance(&mut r, 100, &[2], &[1], 3);
    let ws = inst.ws();
    let dy = features::<f64>(inst.output.len(), 2, || uniform(&mut r));
    let w = WeightTensor::identity(27, 2, inst.offsets.center());
    for c in default_space() {
        assert_eq!(conv_dgrad(&dy, &w, &layer_map(&ws, &c), &c, &ExecOptions::default()).unwrap(), dy);
    }
}

#[test]
fn graph_maps_run_on_pair_list_dataflows() {
    use sparsekit::kmap::{kmap_from_edges, Edge};
    let edges = [
        Edge { src: 0, dst: 1, relation: 0 },
        Edge { src: 2, dst: 1, relation: 0 },
        Edge { src: 1, dst: 0, relation: 1 },
        Edge { src: 2, dst: 0, relation: 1 },
    ];
    let map = kmap_from_edges(&edges, 2, 3).unwrap();
    let x = Dense::from_vec(3, 1, vec![1.0, 2.0, 4.0]).unwrap();
    let w = WeightTensor::new(2, 1, 1, vec![10.0, 100.0]).unwrap();
    let want = [600.0, 50.0, 0.0];
    for c in [DataflowConfig::gather_gemm_scatter(), DataflowConfig::fetch_on_demand()] {
        let m = LayerMap::Ws(Arc::new(map.clone()));
        assert_eq!(conv_forward(&x, &w, &m, &c, &ExecOptions::default()).unwrap().as_slice(), &want[..]);
        let dy = Dense::from_vec(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let dx = conv_dgrad(&dy, &w, &m, &c, &ExecOptions::default()).unwrap();
        assert_eq!(dx.as_slice(), &[10.0, 100.0, 110.0]);
    }
}
