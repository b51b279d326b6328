use std::sync::Arc;

use crate::error::invalid;
use crate::exec::parallel::map_ranges;
use crate::exec::{conv_forward, prepare_os, DataflowConfig, ExecOptions, LayerMap, WeightTensor};
use crate::kmap::{transpose_os, transpose_ws, SENTINEL};
use crate::real::{Dense, Real};
use crate::Result;

/// Map and weights of the transposed problem: running the forward dataflow on
/// them yields the input-feature gradient.
pub(crate) fn transposed_problem<T: Real>(
    w: &WeightTensor<T>,
    map: &LayerMap,
    config: &DataflowConfig,
) -> Result<(LayerMap, WeightTensor<T>)> {
    match map {
        LayerMap::Ws(m) => {
            let wt = if m.relational() { w.transposed_blocks() } else { w.transposed() };
            let t = transpose_ws(m);
            Ok((LayerMap::Ws(Arc::new(t)), wt))
        }
        LayerMap::Os(m) => {
            let raw = transpose_os(m)?;
            let prepared = match config.reorder {
                crate::exec::Reorder::Offline => prepare_os(&raw, config)?,
                crate::exec::Reorder::Online => raw,
            };
            Ok((LayerMap::Os(Arc::new(prepared)), w.transposed()))
        }
    }
}

/// Input-feature gradient `dx_j = Σ_δ Σ_k [p_j = s q_k + δ] dy_k W_δᵀ`,
/// computed by running `config`'s dataflow on the transposed map with
/// transposed weights. `map` must be in the layout `config` consumes.
pub fn conv_dgrad<T: Real>(
    dy: &Dense<T>,
    w: &WeightTensor<T>,
    map: &LayerMap,
    config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<Dense<T>> {
    let (tmap, wt) = transposed_problem(w, map, config)?;
    conv_forward(dy, &wt, &tmap, config, opts)
}

/// Weight gradient `dW_δ = Σ_{(j,k) ∈ M_δ} x_jᵀ dy_k`.
///
/// Pair lists accumulate in pair order. Output-stationary maps accumulate in
/// the map's row order, so a sorted map visits pairs in a different order
/// than the pair lists do. Offsets are independent and may run on different
/// workers; the result does not depend on the worker count.
pub fn conv_wgrad<T: Real>(
    x: &Dense<T>,
    dy: &Dense<T>,
    map: &LayerMap,
    _config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<WeightTensor<T>> {
    if x.rows() != map.n_in() || dy.rows() != map.n_out() {
        return Err(invalid!(
            "wgrad shapes: x {} rows, dy {} rows, map {}x{}",
            x.rows(),
            dy.rows(),
            map.n_in(),
            map.n_out()
        ));
    }
    let (c_in, c_out) = (x.cols(), dy.cols());
    let volume = map.volume();

    let blocks: Vec<Vec<T>> = match map {
        LayerMap::Ws(m) => map_ranges(volume, opts.workers, |ks| {
            ks.map(|k| {
                let mut block = vec![T::zero(); c_in * c_out];
                for p in m.pairs(k) {
                    outer_acc(&mut block, x.row(p.input as usize), dy.row(p.output as usize));
                }
                block
            })
            .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect(),
        LayerMap::Os(m) => map_ranges(volume, opts.workers, |ks| {
            ks.map(|k| {
                let mut block = vec![T::zero(); c_in * c_out];
                let split = m
                    .splits()
                    .iter()
                    .find(|s| s.offsets().contains(&k))
                    .expect("splits cover every offset");
                let lk = k - split.offsets().start;
                for r in 0..split.rows() {
                    let (e, o) = (split.entry(r, lk), split.out_row(r));
                    if e != SENTINEL && o != SENTINEL {
                        outer_acc(&mut block, x.row(e as usize), dy.row(o as usize));
                    }
                }
                block
            })
            .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect(),
    };
    WeightTensor::new(volume, c_in, c_out, blocks.concat())
}

#[inline]
fn outer_acc<T: Real>(block: &mut [T], x: &[T], dy: &[T]) {
    let c_out = dy.len();
    for (c, &xv) in x.iter().enumerate() {
        for (b, &g) in block[c * c_out..(c + 1) * c_out].iter_mut().zip(dy) {
            *b = *b + xv * g;
        }
    }
}
