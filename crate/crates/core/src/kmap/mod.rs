//! Kernel maps: which input row feeds which output row under which kernel
//! offset.
//!
//! Two layouts are kept. The weight-stationary layout ([`KernelMapWS`]) stores
//! one pair list per offset and drives gather-GEMM-scatter and
//! fetch-on-demand. The output-stationary layout ([`KernelMapOS`]) stores, for
//! every output row, the input row of each neighbor (or [`SENTINEL`]) and
//! drives implicit GEMM. The output-stationary map can be split along the
//! offset axis and each split reordered by neighbor bitmask.

mod cache;
mod os;
mod transpose;
mod ws;

pub use cache::MapCache;
pub use os::{build_kmap_os, os_to_ws, pad_map, split_and_sort, ws_to_os, KernelMapOS, MapSplit};
pub use transpose::{transpose_os, transpose_ws};
pub use ws::{build_kmap_ws, build_kmap_ws_transposed, build_out_coords, kmap_from_edges, Edge, KernelMapWS, Pair};

use crate::error::invalid;
use crate::tensor::{check_dim, CoordSetId};
use crate::Result;

/// Marks "no neighbor" in the output-stationary matrix and pad rows.
pub const SENTINEL: i32 = -1;

/// The neighborhood `{-(K/2)..=K/2}^D`, listed lexicographically with the
/// first axis most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetSet {
    dim: usize,
    kernel_size: usize,
    offsets: Vec<[i32; 3]>,
}

impl OffsetSet {
    pub fn new(dim: usize, kernel_size: usize) -> Result<Self> {
        check_dim(dim)?;
        if kernel_size == 0 || kernel_size.is_multiple_of(2) {
            return Err(invalid!("kernel size must be odd, got {kernel_size}"));
        }
        let r = (kernel_size / 2) as i32;
        let mut offsets = Vec::with_capacity(kernel_size.pow(dim as u32));
        for a in -r..=r {
            for b in -r..=r {
                if dim == 2 {
                    offsets.push([a, b, 0]);
                } else {
                    for c in -r..=r {
                        offsets.push([a, b, c]);
                    }
                }
            }
        }
        Ok(Self { dim, kernel_size, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[[i32; 3]] {
        &self.offsets
    }

    pub fn get(&self, k: usize) -> [i32; 3] {
        self.offsets[k]
    }

    pub fn center(&self) -> usize {
        self.offsets.len() / 2
    }

    /// Index of `-offset(k)`. The lexicographic listing is symmetric.
    pub fn mirror(&self, k: usize) -> usize {
        self.offsets.len() - 1 - k
    }

    pub fn index_of(&self, off: [i32; 3]) -> Option<usize> {
        self.offsets.iter().position(|&o| o == off)
    }
}

/// Identity of a kernel map. Layers with equal keys can share one map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MapKey {
    pub input: CoordSetId,
    pub output: CoordSetId,
    pub kernel_size: usize,
    pub stride: [u32; 3],
    pub transposed: bool,
}

impl MapKey {
    /// The key of the forward (non-transposed) map this key derives from. A
    /// transposed layer and the downsampling layer it mirrors share it.
    pub fn canonical(&self) -> MapKey {
        if self.transposed {
            MapKey {
                input: self.output,
                output: self.input,
                transposed: false,
                ..*self
            }
        } else {
            *self
        }
    }
}
