use crate::exec::parallel::map_ranges;
use crate::exec::{accumulate_products, check_shapes, DataflowConfig, ExecOptions, WeightTensor};
use crate::kmap::KernelMapWS;
use crate::real::{Dense, Real};
use crate::Result;

/// Fused dataflow: for every pair, multiply the input row by `W_δ` and add it
/// straight into the output row. No gather or product buffers exist.
///
/// Deterministic mode partitions output rows across workers; each worker
/// walks every offset in order and keeps only its own rows, so every output
/// sees the same operation sequence regardless of worker count. Otherwise the
/// offsets are partitioned, each worker accumulates into a private buffer and
/// the buffers are summed in worker order (the CPU stand-in for atomic
/// write-back).
pub fn conv_fetch_on_demand<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    map: &KernelMapWS,
    config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<Dense<T>> {
    check_shapes(x, w, map.n_in(), map.volume())?;
    let c_out = w.c_out();
    let n_out = map.n_out();
    if opts.workers <= 1 {
        let mut y = Dense::zeros(n_out, c_out);
        for k in 0..map.volume() {
            let w_k = w.offset(k);
            for p in map.pairs(k) {
                accumulate_products(y.row_mut(p.output as usize), x.row(p.input as usize), w_k, c_out);
            }
        }
        return Ok(y);
    }

    if config.deterministic {
        let blocks = map_ranges(n_out, opts.workers, |rows| {
            let mut part = Dense::zeros(rows.len(), c_out);
            for k in 0..map.volume() {
                let w_k = w.offset(k);
                for p in map.pairs(k) {
                    let o = p.output as usize;
                    if rows.contains(&o) {
                        accumulate_products(part.row_mut(o - rows.start), x.row(p.input as usize), w_k, c_out);
                    }
                }
            }
            part
        });
        let data: Vec<T> = blocks.into_iter().flat_map(Dense::into_vec).collect();
        return Dense::from_vec(n_out, c_out, data);
    }

    let partials = map_ranges(map.volume(), opts.workers, |offsets| {
        let mut part = Dense::zeros(n_out, c_out);
        for k in offsets {
            let w_k = w.offset(k);
            for p in map.pairs(k) {
                accumulate_products(part.row_mut(p.output as usize), x.row(p.input as usize), w_k, c_out);
            }
        }
        part
    });
    super::reduce_partials(&partials)
}
