//! Sparse convolution on CPU: kernel-map construction, three interchangeable
//! dataflows (gather-GEMM-scatter, fetch-on-demand, implicit GEMM with
//! bitmask-sorted mask splits), a warp-level MAC and DRAM-traffic model, and
//! a group-based dataflow autotuner for inference and training.

pub mod bench;
pub mod cost;
pub mod error;
pub mod exec;
pub mod gen;
pub mod io;
pub mod kmap;
pub mod real;
pub mod tensor;
pub mod toy;
pub mod tuner;

pub use cost::{count_macs, split_sweep, traffic_model, CostReport, LayerShape};
pub use error::{Error, Result};
pub use exec::{conv_dgrad, conv_forward, conv_ref, conv_wgrad, DataflowConfig, DataflowKind, ExecOptions, LayerMap, Reorder, TilePreset, WeightTensor};
pub use kmap::{KernelMapOS, KernelMapWS, OffsetSet};
pub use real::{Dense, Precision, Real};
pub use tensor::{coord_index, quantize, Coord, CoordSet, DedupRule, SparseTensor, VoxelParams};
pub use tuner::{default_space, tune_inference, tune_training, NetworkSpec, TuneResult};
