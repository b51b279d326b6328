//! Lockstep MAC accounting and a DRAM-traffic model per dataflow.
//!
//! MACs are counted in scalar units: one input-channel by output-channel
//! multiply-accumulate. For implicit GEMM, rows of a split are grouped into
//! warps of `warp_rows` consecutive rows; whenever any row of a warp has a
//! neighbor at some offset, every lane of the warp is charged for that offset.
//! Lanes past the last row of a split count as idle lanes of the final warp.
//!
//! Traffic is counted in bytes. Feature and weight elements cost `elem_bytes`
//! each; map indices are 4-byte integers.
//!
//! | dataflow | writes | reads |
//! |---|---|---|
//! | gather-GEMM-scatter | `(P·Cin + P·Cout + N_out·Cout)·e` | `(2P·Cin + V·Cin·Cout + 2P·Cout)·e + 16P` |
//! | fetch-on-demand | `P·Cout·e` | `(P·Cin + V·Cin·Cout + P·Cout)·e + 8P` |
//! | implicit GEMM, s splits | `(s·N_out + [s>1]·N_out)·Cout·e` | `(P·Cin + V·Cin·Cout + [s>1]·s·N_out·Cout)·e + 4·N_out·(V + s)` |
//!
//! `P = Σ_δ |M_δ|`, `V = K^D`, `e = elem_bytes`. Gather-GEMM-scatter reads
//! each gathered row twice (gather, GEMM) and each product twice (scatter
//! source, read-modify-write target); its pair indices are read by both the
//! gather and the scatter.

use std::fmt::Write as _;

use serde::Serialize;

use crate::exec::{DataflowConfig, DataflowKind, TilePreset};
use crate::kmap::{pad_map, split_and_sort, KernelMapOS, KernelMapWS, SENTINEL};
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub effective_macs: u64,
    pub redundant_macs: u64,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub mapping_ops: u64,
}

impl CostReport {
    pub fn charged_macs(&self) -> u64 {
        self.effective_macs + self.redundant_macs
    }
}

impl std::ops::Add for CostReport {
    type Output = CostReport;

    fn add(self, o: CostReport) -> CostReport {
        CostReport {
            effective_macs: self.effective_macs + o.effective_macs,
            redundant_macs: self.redundant_macs + o.redundant_macs,
            dram_read_bytes: self.dram_read_bytes + o.dram_read_bytes,
            dram_write_bytes: self.dram_write_bytes + o.dram_write_bytes,
            mapping_ops: self.mapping_ops + o.mapping_ops,
        }
    }
}

/// Sizes of one convolution layer instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayerShape {
    pub n_in: u64,
    pub n_out: u64,
    pub c_in: u64,
    pub c_out: u64,
    pub volume: u64,
    /// Σ_δ |M_δ|.
    pub pairs: u64,
}

impl LayerShape {
    pub fn from_ws(map: &KernelMapWS, c_in: usize, c_out: usize) -> Self {
        Self {
            n_in: map.n_in() as u64,
            n_out: map.n_out() as u64,
            c_in: c_in as u64,
            c_out: c_out as u64,
            volume: map.volume() as u64,
            pairs: map.total_pairs() as u64,
        }
    }

    pub fn from_os(map: &KernelMapOS, c_in: usize, c_out: usize) -> Self {
        Self {
            n_in: map.n_in() as u64,
            n_out: map.n_out() as u64,
            c_in: c_in as u64,
            c_out: c_out as u64,
            volume: map.volume() as u64,
            pairs: map.neighbor_count() as u64,
        }
    }

    /// Average neighbors per output, Σ_δ |M_δ| / N_out.
    pub fn neighbor_ratio(&self) -> f64 {
        if self.n_out == 0 {
            0.0
        } else {
            self.pairs as f64 / self.n_out as f64
        }
    }

    pub fn effective_macs(&self) -> u64 {
        self.pairs * self.c_in * self.c_out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MacCount {
    pub effective: u64,
    pub redundant: u64,
}

/// Lockstep MAC count of a prepared output-stationary map.
pub fn count_macs(map: &KernelMapOS, warp_rows: usize, c_in: usize, c_out: usize) -> MacCount {
    let warp = warp_rows.max(1);
    let per_lane = (c_in * c_out) as u64;
    let mut effective = 0u64;
    let mut charged = 0u64;
    for split in map.splits() {
        for start in (0..split.rows()).step_by(warp) {
            let end = (start + warp).min(split.rows());
            for lk in 0..split.width() {
                let live = (start..end).filter(|&r| split.entry(r, lk) != SENTINEL).count() as u64;
                if live > 0 {
                    effective += live * per_lane;
                    charged += warp as u64 * per_lane;
                }
            }
        }
    }
    MacCount {
        effective,
        redundant: charged - effective,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub read_bytes: u64,
    pub write_bytes: u64,
}

/// Modeled DRAM traffic (see the module table).
pub fn traffic_model(shape: &LayerShape, config: &DataflowConfig, elem_bytes: u64) -> Traffic {
    let LayerShape {
        n_out,
        c_in,
        c_out,
        volume,
        pairs,
        ..
    } = *shape;
    let weights = volume * c_in * c_out;
    match config.kind {
        DataflowKind::GatherGemmScatter => Traffic {
            write_bytes: (pairs * c_in + pairs * c_out + n_out * c_out) * elem_bytes,
            read_bytes: (2 * pairs * c_in + weights + 2 * pairs * c_out) * elem_bytes + 16 * pairs,
        },
        DataflowKind::FetchOnDemand => Traffic {
            write_bytes: pairs * c_out * elem_bytes,
            read_bytes: (pairs * c_in + weights + pairs * c_out) * elem_bytes + 8 * pairs,
        },
        DataflowKind::ImplicitGemm => {
            let s = config.effective_splits() as u64;
            let reduce = u64::from(s > 1);
            Traffic {
                write_bytes: (s * n_out + reduce * n_out) * c_out * elem_bytes,
                read_bytes: (pairs * c_in + weights + reduce * s * n_out * c_out) * elem_bytes + 4 * n_out * (volume + s),
            }
        }
    }
}

/// Element touches spent building and preparing the map a config consumes:
/// one lookup per (output, offset); for sorted implicit GEMM also the bitmask
/// pass, the argsort comparisons and the row permutation of every split, and
/// pad-row fills.
pub fn mapping_ops(shape: &LayerShape, config: &DataflowConfig) -> u64 {
    let build = shape.n_out * shape.volume;
    if config.kind != DataflowKind::ImplicitGemm || config.splits == 0 {
        return build;
    }
    let n = shape.n_out;
    let s = config.splits as u64;
    let log = if n > 1 { 64 - (n - 1).leading_zeros() as u64 } else { 0 };
    let cta_m = config.tile.cta_m as u64;
    let pad_rows = n.div_ceil(cta_m) * cta_m - n;
    build + n * shape.volume + s * n * log + n * shape.volume + pad_rows * shape.volume
}

/// Full report for one layer under one config. `raw_os` must be the raw
/// output-stationary map when `config` is implicit GEMM. A layer with no
/// outputs launches nothing and costs nothing.
pub fn cost_report(
    shape: &LayerShape,
    raw_os: Option<&KernelMapOS>,
    config: &DataflowConfig,
    warp_rows: usize,
    elem_bytes: u64,
) -> Result<CostReport> {
    if shape.n_out == 0 {
        return Ok(CostReport::default());
    }
    let traffic = traffic_model(shape, config, elem_bytes);
    let redundant = match (config.kind, raw_os) {
        (DataflowKind::ImplicitGemm, Some(raw)) => {
            let prepared = pad_map(&split_and_sort(raw, config.splits as usize)?, config.tile.cta_m)?;
            count_macs(&prepared, warp_rows, shape.c_in as usize, shape.c_out as usize).redundant
        }
        (DataflowKind::ImplicitGemm, None) => {
            return Err(crate::error::contract!("implicit GEMM cost needs the output-stationary map"))
        }
        _ => 0,
    };
    Ok(CostReport {
        effective_macs: shape.effective_macs(),
        redundant_macs: redundant,
        dram_read_bytes: traffic.read_bytes,
        dram_write_bytes: traffic.write_bytes,
        mapping_ops: mapping_ops(shape, config),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub splits: usize,
    pub report: CostReport,
}

/// Implicit GEMM cost for each split count, each on a freshly split, sorted
/// and padded copy of `raw`.
pub fn split_sweep(
    raw: &KernelMapOS,
    splits: impl IntoIterator<Item = usize>,
    tile: &TilePreset,
    c_in: usize,
    c_out: usize,
    elem_bytes: u64,
) -> Result<Vec<SweepRow>> {
    let shape = LayerShape::from_os(raw, c_in, c_out);
    splits
        .into_iter()
        .map(|s| {
            let config = DataflowConfig::implicit_gemm(s as u32, *tile);
            let report = cost_report(&shape, Some(raw), &config, tile.warp_rows, elem_bytes)?;
            Ok(SweepRow { splits: s, report })
        })
        .collect()
}

pub const CSV_HEADER: &str = "layer,dataflow,splits,effective_macs,redundant_macs,read_bytes,write_bytes,mapping_ops";

/// One CSV line (no trailing newline) in [`CSV_HEADER`] order.
pub fn csv_row(layer: &str, config: &DataflowConfig, report: &CostReport) -> String {
    let mut s = String::new();
    let splits = if config.kind == DataflowKind::ImplicitGemm { config.splits } else { 0 };
    let _ = write!(
        s,
        "{layer},{},{splits},{},{},{},{},{}",
        config.kind, report.effective_macs, report.redundant_macs, report.dram_read_bytes, report.dram_write_bytes, report.mapping_ops
    );
    s
}
