use std::sync::Arc;

use crate::error::{invalid, structural};
use crate::kmap::OffsetSet;
use crate::tensor::{Coord, CoordSet};
use crate::Result;

/// One input-row -> output-row correspondence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub input: u32,
    pub output: u32,
}

impl Pair {
    pub const fn new(input: u32, output: u32) -> Self {
        Self { input, output }
    }
}

/// Weight-stationary map: one pair list per kernel offset (or per relation
/// for graph maps).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelMapWS {
    n_in: usize,
    n_out: usize,
    pairs: Vec<Vec<Pair>>,
    relational: bool,
}

impl KernelMapWS {
    /// Validates pair ranges and, for spatial maps, that each output appears
    /// at most once per offset.
    pub fn new(n_in: usize, n_out: usize, pairs: Vec<Vec<Pair>>) -> Result<Self> {
        let map = Self {
            n_in,
            n_out,
            pairs,
            relational: false,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn empty(volume: usize, n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            pairs: vec![Vec::new(); volume],
            relational: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![u32::MAX; self.n_out];
        for (k, list) in self.pairs.iter().enumerate() {
            for p in list {
                if p.input as usize >= self.n_in || p.output as usize >= self.n_out {
                    return Err(structural!("pair {p:?} at offset {k} out of range"));
                }
                if !self.relational {
                    if seen[p.output as usize] == k as u32 {
                        return Err(structural!("output {} has two neighbors at offset {k}", p.output));
                    }
                    seen[p.output as usize] = k as u32;
                }
            }
        }
        Ok(())
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Number of offsets (K^D) or relations.
    pub fn volume(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self, k: usize) -> &[Pair] {
        &self.pairs[k]
    }

    pub fn all_pairs(&self) -> &[Vec<Pair>] {
        &self.pairs
    }

    /// Whether the offsets are graph relations rather than spatial offsets.
    /// Relational maps allow several inputs per (output, relation) and are
    /// not mirrored on transpose.
    pub fn relational(&self) -> bool {
        self.relational
    }

    /// Σ_δ |M_δ|.
    pub fn total_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    pub(crate) fn from_parts(n_in: usize, n_out: usize, pairs: Vec<Vec<Pair>>, relational: bool) -> Self {
        Self {
            n_in,
            n_out,
            pairs,
            relational,
        }
    }
}

fn check_compat(input: &CoordSet, output: &CoordSet, offsets: &OffsetSet, stride: [u32; 3]) -> Result<()> {
    if input.dim() != output.dim() || input.dim() != offsets.dim() {
        return Err(invalid!(
            "dimension mismatch: input {}, output {}, kernel {}",
            input.dim(),
            output.dim(),
            offsets.dim()
        ));
    }
    if stride.contains(&0) {
        return Err(invalid!("stride components must be positive"));
    }
    if input.dim() == 2 && stride[2] != 1 {
        return Err(invalid!("2-D layers must use stride 1 on the unused third axis"));
    }
    Ok(())
}

/// Output coordinates of a convolution with the given stride. Stride 1 keeps
/// the input set itself (submanifold); larger strides take
/// `unique(floor(p / s))` in first-appearance order.
pub fn build_out_coords(input: &Arc<CoordSet>, stride: [u32; 3]) -> Result<Arc<CoordSet>> {
    if stride.contains(&0) {
        return Err(invalid!("stride components must be positive"));
    }
    if stride == [1; 3] {
        return Ok(input.clone());
    }
    let mut s = stride;
    if input.dim() == 2 {
        s[2] = 1;
    }
    let tag = [0, 1, 2].map(|a| input.stride()[a] * s[a]);
    CoordSet::from_unsorted(input.dim(), tag, input.coords().iter().map(|c| c.floor_div(s)))
}

/// Pairs `(j, k)` with `p_j = s * q_k + δ` for every offset δ, ordered by
/// ascending output row within each offset.
pub fn build_kmap_ws(input: &CoordSet, output: &CoordSet, stride: [u32; 3], offsets: &OffsetSet) -> Result<KernelMapWS> {
    check_compat(input, output, offsets, stride)?;
    let mut pairs = vec![Vec::new(); offsets.len()];
    for (k, q) in output.coords().iter().enumerate() {
        for (d, &off) in offsets.offsets().iter().enumerate() {
            if let Some(j) = input.index_of(&q.scale_add(stride, off)) {
                pairs[d].push(Pair::new(j as u32, k as u32));
            }
        }
    }
    Ok(KernelMapWS::from_parts(input.len(), output.len(), pairs, false))
}

/// Map of the transposed convolution that scatters a coarse set back onto a
/// fine one: pairs `(k, j)` stored under the mirrored offset `-δ` whenever
/// `p_j = s * q_k + δ`. `input` is the coarse set, `output` the fine one.
pub fn build_kmap_ws_transposed(
    input: &CoordSet,
    output: &CoordSet,
    stride: [u32; 3],
    offsets: &OffsetSet,
) -> Result<KernelMapWS> {
    check_compat(input, output, offsets, stride)?;
    let mut pairs = vec![Vec::new(); offsets.len()];
    for (j, p) in output.coords().iter().enumerate() {
        for (d, &off) in offsets.offsets().iter().enumerate() {
            let shifted = Coord {
                batch: p.batch,
                xyz: [p.xyz[0] + off[0], p.xyz[1] + off[1], p.xyz[2] + off[2]],
            };
            let Some(q) = shifted.exact_div(stride) else { continue };
            if let Some(k) = input.index_of(&q) {
                pairs[d].push(Pair::new(k as u32, j as u32));
            }
        }
    }
    Ok(KernelMapWS::from_parts(input.len(), output.len(), pairs, false))
}

/// A typed graph edge. Relations take the place of kernel offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub relation: u32,
}

/// Groups edges by relation, keeping edge order within each relation.
pub fn kmap_from_edges(edges: &[Edge], num_relations: usize, num_nodes: usize) -> Result<KernelMapWS> {
    let mut pairs = vec![Vec::new(); num_relations];
    for e in edges {
        if e.relation as usize >= num_relations {
            return Err(invalid!("edge relation {} >= {num_relations}", e.relation));
        }
        if e.src as usize >= num_nodes || e.dst as usize >= num_nodes {
            return Err(invalid!("edge {}->{} references a node >= {num_nodes}", e.src, e.dst));
        }
        pairs[e.relation as usize].push(Pair::new(e.src, e.dst));
    }
    Ok(KernelMapWS::from_parts(num_nodes, num_nodes, pairs, true))
}
