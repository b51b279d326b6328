//! Sparse convolution executors.
//!
//! Every dataflow computes the same sum. For output row `k` and output
//! channel `o` the canonical evaluation order is: start from zero, visit
//! offsets in ascending order (pairs in list order within an offset), form
//! the inner product over input channels left to right starting from zero,
//! and add it to the running sum. Executors that keep to this order agree
//! bit for bit; implicit GEMM with two or more splits reassociates the offset
//! sum into per-split partials and agrees exactly only when the arithmetic is
//! exact.

mod backward;
mod config;
mod fetch;
mod gather_scatter;
mod implicit;
mod parallel;
mod reference;
mod weights;

pub use backward::{conv_dgrad, conv_wgrad};
pub use config::{DataflowConfig, DataflowKind, Reorder, TilePreset};
pub use fetch::conv_fetch_on_demand;
pub use gather_scatter::conv_gather_scatter;
pub use implicit::{conv_implicit_gemm, prepare_os, reduce_partials};
pub use reference::conv_ref;
pub use weights::WeightTensor;

use std::sync::Arc;

use crate::error::{contract, invalid};
use crate::kmap::{KernelMapOS, KernelMapWS};
use crate::real::{Dense, Real};
use crate::Result;

/// Worker count for executors. Deterministic configs give identical results
/// for every worker count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    pub workers: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

impl ExecOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }
}

/// A kernel map in the layout some dataflow consumes.
#[derive(Clone, Debug)]
pub enum LayerMap {
    Ws(Arc<KernelMapWS>),
    Os(Arc<KernelMapOS>),
}

impl LayerMap {
    pub fn n_in(&self) -> usize {
        match self {
            LayerMap::Ws(m) => m.n_in(),
            LayerMap::Os(m) => m.n_in(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            LayerMap::Ws(m) => m.n_out(),
            LayerMap::Os(m) => m.n_out(),
        }
    }

    pub fn volume(&self) -> usize {
        match self {
            LayerMap::Ws(m) => m.volume(),
            LayerMap::Os(m) => m.volume(),
        }
    }
}

/// Runs the dataflow selected by `config`. The map layout must match: pair
/// lists for gather-GEMM-scatter and fetch-on-demand, the output-stationary
/// matrix for implicit GEMM.
pub fn conv_forward<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    map: &LayerMap,
    config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<Dense<T>> {
    match (config.kind, map) {
        (DataflowKind::GatherGemmScatter, LayerMap::Ws(m)) => conv_gather_scatter(x, w, m, config, opts),
        (DataflowKind::FetchOnDemand, LayerMap::Ws(m)) => conv_fetch_on_demand(x, w, m, config, opts),
        (DataflowKind::ImplicitGemm, LayerMap::Os(m)) => conv_implicit_gemm(x, w, m, config, opts),
        (kind, _) => Err(contract!("{kind:?} cannot run on this map layout")),
    }
}

pub(crate) fn check_shapes<T: Real>(x: &Dense<T>, w: &WeightTensor<T>, n_in: usize, volume: usize) -> Result<()> {
    if x.rows() != n_in {
        return Err(invalid!("input has {} rows, map expects {n_in}", x.rows()));
    }
    if x.cols() != w.c_in() {
        return Err(invalid!("input has {} channels, weights expect {}", x.cols(), w.c_in()));
    }
    if w.volume() != volume {
        return Err(invalid!("weights cover {} offsets, map has {volume}", w.volume()));
    }
    Ok(())
}

/// `y[row] += t` where `t[o]` is the canonical inner product of `x_row` with
/// column `o` of `w_k`.
#[inline]
pub(crate) fn accumulate_row<T: Real>(y_row: &mut [T], x_row: &[T], w_k: &[T], c_out: usize) {
    for (o, y) in y_row.iter_mut().enumerate() {
        *y = *y + crate::real::dot_strided(x_row, &w_k[o..], c_out);
    }
}

/// Same result as [`accumulate_row`], computed with contiguous inner loops.
#[inline]
pub(crate) fn accumulate_products<T: Real>(y_row: &mut [T], x_row: &[T], w_k: &[T], c_out: usize) {
    crate::real::row_products(x_row, w_k, c_out, |o0, t| {
        for (y, &v) in y_row[o0..o0 + t.len()].iter_mut().zip(t) {
            *y = *y + v;
        }
    });
}
