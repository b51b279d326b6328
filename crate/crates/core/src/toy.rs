//! The six-output, 2-D, 3x3 worked example used throughout the docs, tests,
//! the `cost --toy` report and the browser demo.
//!
//! Pinned properties (input rows `p*`, output rows `q*`, offsets listed
//! lexicographically so `(-1,-1)` is offset 0 and `(0,-1)` is offset 3):
//!
//! - offset `(-1,-1)` pairs exactly `(p0,q1)` and `(p4,q5)`;
//! - `q1` has four neighbors, `p0..p3`;
//! - the neighbor of `q2` at offset 3 is `p1`;
//! - 22 neighbor pairs in total; with 4-row warps the lockstep model charges
//!   34 redundant MACs unsorted, 26 after one sorted split and 22 with three
//!   sorted splits (`C_in = C_out = 1`).

use std::sync::Arc;

use crate::kmap::{build_kmap_os, build_kmap_ws, KernelMapOS, KernelMapWS, OffsetSet};
use crate::tensor::{Coord, CoordSet};

pub const INPUTS: [(i32, i32); 8] = [(1, 1), (1, 2), (3, 2), (2, 1), (1, 0), (2, 0), (3, 0), (0, 3)];
pub const OUTPUTS: [(i32, i32); 6] = [(0, 3), (2, 2), (1, 3), (0, 2), (1, 2), (2, 1)];
pub const WARP: usize = 4;

pub struct ToyInstance {
    pub input: Arc<CoordSet>,
    pub output: Arc<CoordSet>,
    pub offsets: OffsetSet,
}

impl ToyInstance {
    pub fn map_ws(&self) -> KernelMapWS {
        build_kmap_ws(&self.input, &self.output, [1; 3], &self.offsets).expect("toy instance is valid")
    }

    pub fn map_os(&self) -> KernelMapOS {
        build_kmap_os(&self.input, &self.output, [1; 3], &self.offsets).expect("toy instance is valid")
    }
}

pub fn instance() -> ToyInstance {
    let set = |pts: &[(i32, i32)]| {
        CoordSet::new(2, [1; 3], pts.iter().map(|&(x, y)| Coord::new2(x, y)).collect()).expect("toy coordinates are unique")
    };
    ToyInstance {
        input: set(&INPUTS),
        output: set(&OUTPUTS),
        offsets: OffsetSet::new(2, 3).expect("3x3 kernel"),
    }
}
