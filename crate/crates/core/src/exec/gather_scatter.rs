use crate::exec::parallel::map_ranges;
use crate::exec::{check_shapes, DataflowConfig, ExecOptions, WeightTensor};
use crate::kmap::KernelMapWS;
use crate::real::{row_products, Dense, Real};
use crate::Result;

/// Gathers `|M_δ| x C_in` rows into a buffer.
fn gather<T: Real>(x: &Dense<T>, map: &KernelMapWS, k: usize) -> Dense<T> {
    let pairs = map.pairs(k);
    let mut buf = Dense::zeros(pairs.len(), x.cols());
    for (i, p) in pairs.iter().enumerate() {
        buf.row_mut(i).copy_from_slice(x.row(p.input as usize));
    }
    buf
}

/// Dense `rows x C_in` times `C_in x C_out`.
fn gemm<T: Real>(a: &Dense<T>, w_k: &[T], c_out: usize) -> Dense<T> {
    let mut out = Dense::zeros(a.rows(), c_out);
    for i in 0..a.rows() {
        let row = out.row_mut(i);
        row_products(a.row(i), w_k, c_out, |o0, t| row[o0..o0 + t.len()].copy_from_slice(t));
    }
    out
}

fn offset_product<T: Real>(x: &Dense<T>, w: &WeightTensor<T>, map: &KernelMapWS, k: usize) -> Option<Dense<T>> {
    if map.pairs(k).is_empty() {
        return None;
    }
    Some(gemm(&gather(x, map, k), w.offset(k), w.c_out()))
}

fn scatter<T: Real>(y: &mut Dense<T>, prod: &Dense<T>, map: &KernelMapWS, k: usize) {
    for (i, p) in map.pairs(k).iter().enumerate() {
        for (dst, &v) in y.row_mut(p.output as usize).iter_mut().zip(prod.row(i)) {
            *dst = *dst + v;
        }
    }
}

/// Weight-stationary dataflow: per offset, gather the neighbor rows, run a
/// dense GEMM against `W_δ`, scatter-add the products. Products of different
/// offsets may be computed by different workers; the scatter runs in offset
/// order so the result does not depend on the worker count.
pub fn conv_gather_scatter<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    map: &KernelMapWS,
    _config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<Dense<T>> {
    check_shapes(x, w, map.n_in(), map.volume())?;
    let mut y = Dense::zeros(map.n_out(), w.c_out());
    if opts.workers <= 1 {
        for k in 0..map.volume() {
            if let Some(prod) = offset_product(x, w, map, k) {
                scatter(&mut y, &prod, map, k);
            }
        }
        return Ok(y);
    }
    let products = map_ranges(map.volume(), opts.workers, |range| {
        range.map(|k| offset_product(x, w, map, k)).collect::<Vec<_>>()
    });
    for (k, prod) in products.into_iter().flatten().enumerate() {
        if let Some(prod) = prod {
            scatter(&mut y, &prod, map, k);
        }
    }
    Ok(y)
}
