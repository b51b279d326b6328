use crate::error::{contract, invalid};
use crate::exec::parallel::map_ranges;
use crate::exec::{check_shapes, DataflowConfig, ExecOptions, Reorder, WeightTensor};
use crate::kmap::{pad_map, split_and_sort, KernelMapOS, MapSplit, SENTINEL};
use crate::real::{madd_columns, Dense, Real};
use crate::Result;

/// Splits, sorts and pads a raw output-stationary map the way `config`
/// expects to consume it.
pub fn prepare_os(raw: &KernelMapOS, config: &DataflowConfig) -> Result<KernelMapOS> {
    config.validate()?;
    let split = split_and_sort(raw, config.splits as usize)?;
    pad_map(&split, config.tile.cta_m)
}

fn check_prepared(map: &KernelMapOS, config: &DataflowConfig) -> Result<()> {
    let want = config.effective_splits();
    if map.num_splits() != want || map.is_sorted() != (config.splits > 0) {
        return Err(contract!(
            "offline reorder needs a map prepared for {} split(s) (sorted: {}), got {} split(s) (sorted: {})",
            want,
            config.splits > 0,
            map.num_splits(),
            map.is_sorted()
        ));
    }
    Ok(())
}

/// Elementwise sum of equally shaped buffers, in buffer order.
pub fn reduce_partials<T: Real>(buffers: &[Dense<T>]) -> Result<Dense<T>> {
    let first = buffers.first().ok_or_else(|| invalid!("no partial buffers to reduce"))?;
    let mut out = Dense::zeros(first.rows(), first.cols());
    for b in buffers {
        if (b.rows(), b.cols()) != (first.rows(), first.cols()) {
            return Err(invalid!("partial buffers differ in shape"));
        }
        for (o, &v) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *o = *o + v;
        }
    }
    Ok(out)
}

/// Output-stationary dataflow. Each split is a GEMM whose left operand is
/// addressed through the map: rows are tiled by `cta_m`, output channels by
/// `cta_n`, and the reduction dimension walks the split's offsets with the
/// input channels of each offset consumed `cta_k` at a time. A sentinel entry
/// reads as a zero row. Offsets with no neighbor in any row of a tile are
/// skipped for that tile.
///
/// Each split produces an `N_out x C_out` partial buffer. In deterministic
/// mode split `s` starts from the buffer of split `s - 1` instead of zeros,
/// so every output accumulates its offsets in ascending order exactly as the
/// reference does, whatever the split count. Otherwise the splits start from
/// zero independently and [`reduce_partials`] sums the buffers.
///
/// With [`Reorder::Online`] the raw map is split, sorted and padded inside
/// the call.
pub fn conv_implicit_gemm<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    map: &KernelMapOS,
    config: &DataflowConfig,
    opts: &ExecOptions,
) -> Result<Dense<T>> {
    check_shapes(x, w, map.n_in(), map.volume())?;
    config.validate()?;
    let online;
    let map = match config.reorder {
        Reorder::Offline => {
            check_prepared(map, config)?;
            map
        }
        Reorder::Online => {
            if !map.is_raw() {
                return Err(contract!("online reorder expects a raw map"));
            }
            online = prepare_os(map, config)?;
            &online
        }
    };

    if config.deterministic {
        let mut y = Dense::zeros(map.n_out(), w.c_out());
        for split in map.splits() {
            y = run_split(x, w, &y, split, config, opts);
        }
        return Ok(y);
    }
    let zeros = Dense::zeros(map.n_out(), w.c_out());
    let partials: Vec<Dense<T>> = map.splits().iter().map(|split| run_split(x, w, &zeros, split, config, opts)).collect();
    if partials.len() == 1 {
        return Ok(partials.into_iter().next().expect("one partial"));
    }
    reduce_partials(&partials)
}

struct TileOut<T> {
    out_rows: Vec<i32>,
    values: Vec<T>,
}

/// One split's GEMM. Each output row's accumulator starts from its row in
/// `init`.
fn run_split<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    init: &Dense<T>,
    split: &MapSplit,
    config: &DataflowConfig,
    opts: &ExecOptions,
) -> Dense<T> {
    let c_out = w.c_out();
    let cta_m = config.tile.cta_m;
    let n_tiles = split.rows().div_ceil(cta_m);
    let chunks = map_ranges(n_tiles, opts.workers, |tiles| {
        tiles
            .map(|t| {
                let rows = t * cta_m..((t + 1) * cta_m).min(split.rows());
                tile(x, w, init, split, rows, config)
            })
            .collect::<Vec<_>>()
    });
    let mut partial = Dense::zeros(init.rows(), c_out);
    for out in chunks.into_iter().flatten() {
        for (m, &o) in out.out_rows.iter().enumerate() {
            if o != SENTINEL {
                partial.row_mut(o as usize).copy_from_slice(&out.values[m * c_out..(m + 1) * c_out]);
            }
        }
    }
    partial
}

fn tile<T: Real>(
    x: &Dense<T>,
    w: &WeightTensor<T>,
    init: &Dense<T>,
    split: &MapSplit,
    rows: std::ops::Range<usize>,
    config: &DataflowConfig,
) -> TileOut<T> {
    let c_in = w.c_in();
    let c_out = w.c_out();
    let cta_n = config.tile.cta_n;
    let cta_k = config.tile.cta_k;
    let m_len = rows.len();
    let width = split.width();
    let base = split.offsets().start;

    // Addressing that does not depend on the reduction loop: the tile's
    // neighbor indices and which offsets have any work.
    let idx: Vec<i32> = rows.clone().flat_map(|r| split.row(r).iter().copied()).collect();
    let active: Vec<bool> = (0..width).map(|lk| (0..m_len).any(|m| idx[m * width + lk] != SENTINEL)).collect();

    let zero_row = vec![T::zero(); c_in];
    let mut values = vec![T::zero(); m_len * c_out];
    let mut dot = vec![T::zero(); m_len * cta_n];
    let mut acc = vec![T::zero(); m_len * cta_n];

    for n0 in (0..c_out).step_by(cta_n) {
        let n_len = cta_n.min(c_out - n0);
        for m in 0..m_len {
            let a = &mut acc[m * cta_n..m * cta_n + n_len];
            match split.out_row(rows.start + m) {
                SENTINEL => a.fill(T::zero()),
                o => a.copy_from_slice(&init.row(o as usize)[n0..n0 + n_len]),
            }
        }
        for lk in (0..width).filter(|&lk| active[lk]) {
            let w_k = w.offset(base + lk);
            dot.iter_mut().for_each(|v| *v = T::zero());
            for c0 in (0..c_in).step_by(cta_k) {
                let k_len = cta_k.min(c_in - c0);
                // A tile: k_len channels of each row's neighbor, read in
                // place; sentinel rows read zeros and still pay their MACs.
                let b = &w_k[c0 * c_out + n0..];
                for m in 0..m_len {
                    let e = idx[m * width + lk];
                    let src = if e == SENTINEL { &zero_row[..] } else { x.row(e as usize) };
                    madd_columns(&mut dot[m * cta_n..m * cta_n + n_len], &src[c0..c0 + k_len], b, c_out);
                }
            }
            for (a, &d) in acc.iter_mut().zip(&dot) {
                *a = *a + d;
            }
        }
        for m in 0..m_len {
            values[m * c_out + n0..m * c_out + n0 + n_len].copy_from_slice(&acc[m * cta_n..m * cta_n + n_len]);
        }
    }
    TileOut {
        out_rows: split.out_rows()[rows].to_vec(),
        values,
    }
}
