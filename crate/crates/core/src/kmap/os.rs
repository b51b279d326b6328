use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{contract, invalid, structural};
use crate::kmap::{KernelMapWS, OffsetSet, Pair, SENTINEL};
use crate::tensor::CoordSet;
use crate::Result;

/// One split of an output-stationary map: a contiguous offset range and the
/// rows that execute it, in execution order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapSplit {
    offsets: Range<usize>,
    /// Output row each matrix row scatters to; `SENTINEL` for pad rows.
    out_row: Vec<i32>,
    /// `rows x width` input-row indices, `SENTINEL` where there is no neighbor.
    nbr: Vec<i32>,
    /// Per-row neighbor bitmask, `words` big-endian words per row. Empty for
    /// unsorted maps.
    masks: Vec<u64>,
    words: usize,
}

impl MapSplit {
    pub fn offsets(&self) -> Range<usize> {
        self.offsets.clone()
    }

    pub fn width(&self) -> usize {
        self.offsets.len()
    }

    pub fn rows(&self) -> usize {
        self.out_row.len()
    }

    pub fn out_rows(&self) -> &[i32] {
        &self.out_row
    }

    #[inline]
    pub fn out_row(&self, r: usize) -> i32 {
        self.out_row[r]
    }

    /// Neighbors of row `r`, indexed by offset relative to the split start.
    #[inline]
    pub fn row(&self, r: usize) -> &[i32] {
        let w = self.width();
        &self.nbr[r * w..(r + 1) * w]
    }

    #[inline]
    pub fn entry(&self, r: usize, local_k: usize) -> i32 {
        self.nbr[r * self.width() + local_k]
    }

    /// Bitmask words of row `r`, most significant first. Empty when the map
    /// has not been sorted.
    pub fn mask(&self, r: usize) -> &[u64] {
        if self.masks.is_empty() {
            &[]
        } else {
            &self.masks[r * self.words..(r + 1) * self.words]
        }
    }

    pub fn mask_words(&self) -> usize {
        self.words
    }

    pub fn real_rows(&self) -> usize {
        self.out_row.iter().filter(|&&o| o != SENTINEL).count()
    }
}

/// Output-stationary kernel map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelMapOS {
    volume: usize,
    n_in: usize,
    n_out: usize,
    sorted: bool,
    pad_multiple: usize,
    splits: Vec<MapSplit>,
}

impl KernelMapOS {
    fn raw(volume: usize, n_in: usize, n_out: usize, nbr: Vec<i32>) -> Self {
        Self {
            volume,
            n_in,
            n_out,
            sorted: false,
            pad_multiple: 1,
            splits: vec![MapSplit {
                offsets: 0..volume,
                out_row: (0..n_out as i32).collect(),
                nbr,
                masks: Vec::new(),
                words: 0,
            }],
        }
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    /// Pad multiple, 1 when unpadded.
    pub fn pad_multiple(&self) -> usize {
        self.pad_multiple
    }

    pub fn is_padded(&self) -> bool {
        self.pad_multiple > 1
    }

    pub fn splits(&self) -> &[MapSplit] {
        &self.splits
    }

    pub fn num_splits(&self) -> usize {
        self.splits.len()
    }

    /// Whether the map is in the state `build_kmap_os` produces.
    pub fn is_raw(&self) -> bool {
        !self.sorted && self.splits.len() == 1 && !self.is_padded()
    }

    /// Number of non-sentinel entries, i.e. Σ_δ |M_δ|.
    pub fn neighbor_count(&self) -> usize {
        self.splits.iter().map(|s| s.nbr.iter().filter(|&&e| e != SENTINEL).count()).sum()
    }

    /// Debug dump: `row,out_row,k0..k{V-1}` with `-1` sentinels. Rows of later
    /// splits follow earlier ones; offsets outside a row's split print `-1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,out_row");
        for k in 0..self.volume {
            let _ = write!(out, ",k{k}");
        }
        out.push('\n');
        let mut row = 0;
        for split in &self.splits {
            for r in 0..split.rows() {
                let _ = write!(out, "{row},{}", split.out_row(r));
                for k in 0..self.volume {
                    let v = if split.offsets.contains(&k) {
                        split.entry(r, k - split.offsets.start)
                    } else {
                        SENTINEL
                    };
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
                row += 1;
            }
        }
        out
    }

    /// Checks every structural invariant. Used by tests and after
    /// deserialization-like construction paths.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for split in &self.splits {
            if split.offsets.start != next {
                return Err(structural!("split offset ranges are not contiguous"));
            }
            next = split.offsets.end;
            if split.nbr.len() != split.rows() * split.width() {
                return Err(structural!("split matrix has the wrong size"));
            }
            let mut seen = vec![false; self.n_out];
            for r in 0..split.rows() {
                let o = split.out_row(r);
                if o == SENTINEL {
                    if split.row(r).iter().any(|&e| e != SENTINEL) {
                        return Err(structural!("pad row {r} carries neighbors"));
                    }
                    continue;
                }
                let o = o as usize;
                if o >= self.n_out || std::mem::replace(&mut seen[o], true) {
                    return Err(structural!("out_row {o} is out of range or repeated"));
                }
                if split.row(r).iter().any(|&e| e != SENTINEL && (e < 0 || e as usize >= self.n_in)) {
                    return Err(structural!("row {r} references an input out of range"));
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(structural!("split does not cover every output row"));
            }
        }
        if next != self.volume {
            return Err(structural!("splits do not cover all offsets"));
        }
        Ok(())
    }
}

/// Output-stationary map in output-row order: entry `(n, k)` is the input row
/// at `s * q_n + δ_k` or `SENTINEL`.
pub fn build_kmap_os(input: &CoordSet, output: &CoordSet, stride: [u32; 3], offsets: &OffsetSet) -> Result<KernelMapOS> {
    if input.dim() != output.dim() || input.dim() != offsets.dim() {
        return Err(invalid!("dimension mismatch between coordinate sets and kernel"));
    }
    if stride.contains(&0) {
        return Err(invalid!("stride components must be positive"));
    }
    let v = offsets.len();
    let mut nbr = vec![SENTINEL; output.len() * v];
    for (n, q) in output.coords().iter().enumerate() {
        let row = &mut nbr[n * v..(n + 1) * v];
        for (k, &off) in offsets.offsets().iter().enumerate() {
            if let Some(j) = input.index_of(&q.scale_add(stride, off)) {
                row[k] = j as i32;
            }
        }
    }
    Ok(KernelMapOS::raw(v, input.len(), output.len(), nbr))
}

/// Re-layouts a weight-stationary map. Fails when some output has two
/// neighbors under one offset, which the output-stationary layout cannot hold.
pub fn ws_to_os(ws: &KernelMapWS, n_out: usize) -> Result<KernelMapOS> {
    if n_out < ws.n_out() {
        return Err(invalid!("n_out {n_out} smaller than the map's {}", ws.n_out()));
    }
    let v = ws.volume();
    let mut nbr = vec![SENTINEL; n_out * v];
    for (k, list) in ws.all_pairs().iter().enumerate() {
        for p in list {
            let slot = &mut nbr[p.output as usize * v + k];
            if *slot != SENTINEL {
                return Err(structural!("output {} has more than one neighbor at offset {k}", p.output));
            }
            *slot = p.input as i32;
        }
    }
    Ok(KernelMapOS::raw(v, ws.n_in(), n_out, nbr))
}

/// Collects pairs from any prepared map. Each offset's list comes out
/// ordered by output row.
pub fn os_to_ws(os: &KernelMapOS) -> KernelMapWS {
    let mut pairs: Vec<Vec<Pair>> = vec![Vec::new(); os.volume()];
    for split in os.splits() {
        for r in 0..split.rows() {
            let o = split.out_row(r);
            if o == SENTINEL {
                continue;
            }
            for (lk, &e) in split.row(r).iter().enumerate() {
                if e != SENTINEL {
                    pairs[split.offsets.start + lk].push(Pair::new(e as u32, o as u32));
                }
            }
        }
    }
    for list in &mut pairs {
        list.sort_unstable_by_key(|p| (p.output, p.input));
    }
    KernelMapWS::from_parts(os.n_in(), os.n_out(), pairs, false)
}

/// Chunk boundaries: `volume` offsets in `splits` contiguous pieces whose
/// sizes differ by at most one, larger pieces first.
pub(crate) fn chunk_ranges(volume: usize, splits: usize) -> Vec<Range<usize>> {
    let base = volume / splits;
    let extra = volume % splits;
    let mut start = 0;
    (0..splits)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn row_mask(row: &[i32], words: usize, out: &mut [u64]) {
    let w = row.len();
    out.fill(0);
    for (i, &e) in row.iter().enumerate() {
        if e != SENTINEL {
            let bit = w - 1 - i;
            out[words - 1 - bit / 64] |= 1u64 << (bit % 64);
        }
    }
}

/// Splits the offset axis into `splits` chunks and, per chunk, reorders rows
/// by descending neighbor bitmask (earlier offsets more significant, ties
/// keep the previous order). `splits == 0` returns the map unchanged.
pub fn split_and_sort(map: &KernelMapOS, splits: usize) -> Result<KernelMapOS> {
    if !map.is_raw() {
        return Err(contract!("split_and_sort expects an unsplit, unsorted, unpadded map"));
    }
    if splits > map.volume() {
        return Err(invalid!("{splits} splits requested for {} offsets", map.volume()));
    }
    if splits == 0 {
        return Ok(map.clone());
    }
    let base = &map.splits[0];
    let v = map.volume();
    let n = base.rows();
    let mut out = Vec::with_capacity(splits);
    for range in chunk_ranges(v, splits) {
        let w = range.len();
        let words = w.div_ceil(64).max(1);
        let mut sub = Vec::with_capacity(n * w);
        for r in 0..n {
            sub.extend_from_slice(&base.row(r)[range.clone()]);
        }
        let mut masks = vec![0u64; n * words];
        for r in 0..n {
            row_mask(&sub[r * w..(r + 1) * w], words, &mut masks[r * words..(r + 1) * words]);
        }
        let mut order: Vec<usize> = (0..n).collect();
        // Stable sort, descending by mask.
        order.sort_by(|&a, &b| {
            let ma = &masks[a * words..(a + 1) * words];
            let mb = &masks[b * words..(b + 1) * words];
            mb.cmp(ma)
        });
        let mut nbr = Vec::with_capacity(n * w);
        let mut sorted_masks = Vec::with_capacity(n * words);
        let mut out_row = Vec::with_capacity(n);
        for &r in &order {
            nbr.extend_from_slice(&sub[r * w..(r + 1) * w]);
            sorted_masks.extend_from_slice(&masks[r * words..(r + 1) * words]);
            out_row.push(base.out_row(r));
        }
        out.push(MapSplit {
            offsets: range,
            out_row,
            nbr,
            masks: sorted_masks,
            words,
        });
    }
    Ok(KernelMapOS {
        sorted: true,
        splits: out,
        ..map.clone_header()
    })
}

impl KernelMapOS {
    fn clone_header(&self) -> KernelMapOS {
        KernelMapOS {
            volume: self.volume,
            n_in: self.n_in,
            n_out: self.n_out,
            sorted: self.sorted,
            pad_multiple: self.pad_multiple,
            splits: Vec::new(),
        }
    }
}

/// Rounds every split's row count up to a multiple of `multiple` with
/// all-sentinel rows. Existing pad rows are replaced.
pub fn pad_map(map: &KernelMapOS, multiple: usize) -> Result<KernelMapOS> {
    if multiple == 0 {
        return Err(invalid!("pad multiple must be at least 1"));
    }
    let mut out = map.clone();
    for split in &mut out.splits {
        let real = split.out_row.iter().rposition(|&o| o != SENTINEL).map_or(0, |p| p + 1);
        let target = real.div_ceil(multiple) * multiple;
        let w = split.width();
        split.out_row.truncate(real);
        split.nbr.truncate(real * w);
        if !split.masks.is_empty() {
            split.masks.truncate(real * split.words);
        }
        split.out_row.resize(target, SENTINEL);
        split.nbr.resize(target * w, SENTINEL);
        if !split.masks.is_empty() {
            split.masks.resize(target * split.words, 0);
        }
    }
    out.pad_multiple = multiple;
    Ok(out)
}
