#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use sparsekit::kmap::{build_kmap_ws, build_out_coords, ws_to_os, KernelMapOS, KernelMapWS, OffsetSet};
use sparsekit::tensor::{Coord, CoordSet};
use sparsekit::{Dense, Real, WeightTensor};

pub struct Instance {
    pub input: Arc<CoordSet>,
    pub output: Arc<CoordSet>,
    pub stride: [u32; 3],
    pub offsets: OffsetSet,
    pub c_in: usize,
    pub c_out: usize,
}

impl Instance {
    pub fn ws(&self) -> KernelMapWS {
        build_kmap_ws(&self.input, &self.output, self.stride, &self.offsets).unwrap()
    }

    pub fn os(&self) -> KernelMapOS {
        ws_to_os(&self.ws(), self.output.len()).unwrap()
    }
}

/// Random 3-D instance: up to `max_n` distinct points at density about 0.3
/// around the origin (negative coordinates included).
pub fn random_instance(rng: &mut impl Rng, max_n: usize, channels: &[usize], strides: &[u32], kernel: usize) -> Instance {
    let n = rng.random_range(1..=max_n);
    let side = ((n as f64 / 0.3).cbrt().ceil() as i32).max(2);
    let coords: Vec<Coord> = (0..n).map(|_| Coord::new([0, 1, 2].map(|_| rng.random_range(-side / 2..side - side / 2)))).collect();
    let input = CoordSet::from_unsorted(3, [1; 3], coords).unwrap();
    let s = strides[rng.random_range(0..strides.len())];
    let stride = [s; 3];
    let output = build_out_coords(&input, stride).unwrap();
    Instance {
        input,
        output,
        stride,
        offsets: OffsetSet::new(3, kernel).unwrap(),
        c_in: channels[rng.random_range(0..channels.len())],
        c_out: channels[rng.random_range(0..channels.len())],
    }
}

/// Multiples of 1/16 in [-4, 4]. Sums of a few thousand products of such
/// values are exact in both f32 and f64, so every summation order agrees.
pub fn dyadic(rng: &mut impl Rng) -> f64 {
    rng.random_range(-64..=64) as f64 / 16.0
}

pub fn uniform(rng: &mut impl Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

pub fn features<T: Real>(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Dense<T> {
    Dense::from_fn(rows, cols, |_, _| T::from_f64(f()))
}

pub fn weights<T: Real>(inst: &Instance, mut f: impl FnMut() -> f64) -> WeightTensor<T> {
    WeightTensor::from_fn(inst.offsets.len(), inst.c_in, inst.c_out, |_, _, _| T::from_f64(f()))
}

/// The convolution straight from its definition, by linear scan over inputs
/// and without any kernel map.
pub fn brute_force(inst: &Instance, x: &Dense<f64>, w: &WeightTensor<f64>) -> Dense<f64> {
    let mut y = Dense::zeros(inst.output.len(), inst.c_out);
    for (k, q) in inst.output.coords().iter().enumerate() {
        for (d, off) in inst.offsets.offsets().iter().enumerate() {
            let target = [0, 1, 2].map(|a| q.xyz[a] * inst.stride[a] as i32 + off[a]);
            for (j, p) in inst.input.coords().iter().enumerate() {
                if p.xyz == target && p.batch == q.batch {
                    for o in 0..inst.c_out {
                        let t: f64 = (0..inst.c_in).map(|c| x.get(j, c) * w.get(d, c, o)).sum();
                        y.row_mut(k)[o] += t;
                    }
                }
            }
        }
    }
    y
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest per-element relative error `|a - b| / max(|b|, floor)` where the
/// floor is `1e-3` of the largest reference magnitude; elements near zero
/// through cancellation are measured against the output scale instead.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let floor = (1e-3 * max_abs(b)).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs() / y.abs().max(floor)))
}

pub fn to_f64<T: Real>(d: &Dense<T>) -> Vec<f64> {
    d.as_slice().iter().map(|&v| Real::to_f64(v)).collect()
}

pub fn bits(d: &Dense<f64>) -> Vec<u64> {
    d.as_slice().iter().map(|v| v.to_bits()).collect()
}

/// The map `config` consumes: pair lists, or the output-stationary map
/// prepared ahead of time (offline) or left raw (online).
pub fn layer_map(ws: &KernelMapWS, config: &sparsekit::DataflowConfig) -> sparsekit::LayerMap {
    use sparsekit::exec::prepare_os;
    use sparsekit::{LayerMap, Reorder};
    if config.kind.uses_ws_map() {
        return LayerMap::Ws(Arc::new(ws.clone()));
    }
    let raw = ws_to_os(ws, ws.n_out()).unwrap();
    match config.reorder {
        Reorder::Offline => LayerMap::Os(Arc::new(prepare_os(&raw, config).unwrap())),
        Reorder::Online => LayerMap::Os(Arc::new(raw)),
    }
}
