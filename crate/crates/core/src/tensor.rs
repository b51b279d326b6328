//! Sparse tensor data model: quantized coordinates, coordinate lookup and
//! feature storage.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::invalid;
use crate::real::{Dense, Real};
use crate::Result;

/// Integer voxel coordinate with a batch index. 2-D coordinates keep the
/// third component at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub batch: u32,
    pub xyz: [i32; 3],
}

impl Coord {
    pub const fn new(xyz: [i32; 3]) -> Self {
        Self { batch: 0, xyz }
    }

    pub const fn new2(x: i32, y: i32) -> Self {
        Self { batch: 0, xyz: [x, y, 0] }
    }

    pub const fn with_batch(mut self, batch: u32) -> Self {
        self.batch = batch;
        self
    }

    /// `self * stride + offset`, component-wise.
    #[inline]
    pub fn scale_add(&self, stride: [u32; 3], offset: [i32; 3]) -> Coord {
        let mut xyz = [0; 3];
        for a in 0..3 {
            xyz[a] = self.xyz[a] * stride[a] as i32 + offset[a];
        }
        Coord { batch: self.batch, xyz }
    }

    /// Floor division by a per-axis stride. Negative coordinates round toward
    /// negative infinity.
    #[inline]
    pub fn floor_div(&self, stride: [u32; 3]) -> Coord {
        let mut xyz = [0; 3];
        for a in 0..3 {
            xyz[a] = self.xyz[a].div_euclid(stride[a] as i32);
        }
        Coord { batch: self.batch, xyz }
    }

    /// Exact division, or `None` if some component is not a multiple of the stride.
    #[inline]
    pub fn exact_div(&self, stride: [u32; 3]) -> Option<Coord> {
        let mut xyz = [0; 3];
        for a in 0..3 {
            let s = stride[a] as i32;
            if self.xyz[a].rem_euclid(s) != 0 {
                return None;
            }
            xyz[a] = self.xyz[a].div_euclid(s);
        }
        Some(Coord { batch: self.batch, xyz })
    }

    /// 64-bit mixing hash over `(batch, x, y, z)`.
    #[inline]
    pub fn mix64(&self) -> u64 {
        let mut h = (self.batch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for &c in &self.xyz {
            h = splitmix64(h ^ (c as u32 as u64));
        }
        h
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hasher that defers to [`Coord::mix64`]. Only `write_u64` carries data.
#[derive(Default)]
pub struct CoordHasher(u64);

impl Hasher for CoordHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = splitmix64(self.0 ^ b as u64);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct CoordKey(Coord);

impl Hash for CoordKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.mix64());
    }
}

/// Coordinate -> row lookup. Collisions of the mixing hash fall back to the
/// map's equality check, so distinct coordinates are never merged.
#[derive(Clone, Default)]
pub struct CoordLookup {
    map: HashMap<CoordKey, usize, BuildHasherDefault<CoordHasher>>,
}

impl CoordLookup {
    pub fn new(coords: &[Coord]) -> Self {
        let mut map = HashMap::with_capacity_and_hasher(coords.len(), Default::default());
        for (i, &c) in coords.iter().enumerate() {
            map.entry(CoordKey(c)).or_insert(i);
        }
        Self { map }
    }

    #[inline]
    pub fn get(&self, c: &Coord) -> Option<usize> {
        self.map.get(&CoordKey(*c)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

static NEXT_SET_ID: AtomicU64 = AtomicU64::new(1);

/// Stable identity of a coordinate set. Used as the map-cache key; two sets
/// with equal contents but separate construction have distinct ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoordSetId(pub u64);

/// A deduplicated coordinate list together with its lookup table.
pub struct CoordSet {
    id: CoordSetId,
    dim: usize,
    stride: [u32; 3],
    coords: Vec<Coord>,
    lookup: CoordLookup,
}

impl std::fmt::Debug for CoordSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoordSet")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("stride", &self.stride)
            .field("len", &self.coords.len())
            .finish()
    }
}

impl CoordSet {
    /// Builds a set from coordinates that must already be unique.
    pub fn new(dim: usize, stride: [u32; 3], coords: Vec<Coord>) -> Result<Arc<Self>> {
        check_dim(dim)?;
        if stride.contains(&0) {
            return Err(invalid!("stride components must be positive"));
        }
        if dim == 2 && coords.iter().any(|c| c.xyz[2] != 0) {
            return Err(invalid!("2-D coordinates must have a zero third component"));
        }
        let lookup = CoordLookup::new(&coords);
        if lookup.len() != coords.len() {
            return Err(invalid!("coordinate list contains duplicates"));
        }
        Ok(Arc::new(Self {
            id: CoordSetId(NEXT_SET_ID.fetch_add(1, Ordering::Relaxed)),
            dim,
            stride,
            coords,
            lookup,
        }))
    }

    /// Keeps the first occurrence of each coordinate.
    pub fn from_unsorted(dim: usize, stride: [u32; 3], coords: impl IntoIterator<Item = Coord>) -> Result<Arc<Self>> {
        let mut seen = CoordLookup::default();
        let mut unique = Vec::new();
        for c in coords {
            if seen.get(&c).is_none() {
                seen.map.insert(CoordKey(c), unique.len());
                unique.push(c);
            }
        }
        Self::new(dim, stride, unique)
    }

    pub fn id(&self) -> CoordSetId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> [u32; 3] {
        self.stride
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn lookup(&self) -> &CoordLookup {
        &self.lookup
    }

    #[inline]
    pub fn index_of(&self, c: &Coord) -> Option<usize> {
        self.lookup.get(c)
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(invalid!("dimension must be 2 or 3, got {dim}"))
    }
}

/// Coordinates plus one feature row per coordinate.
#[derive(Clone, Debug)]
pub struct SparseTensor<T> {
    coords: Arc<CoordSet>,
    features: Dense<T>,
}

impl<T: Real> SparseTensor<T> {
    pub fn new(coords: Arc<CoordSet>, features: Dense<T>) -> Result<Self> {
        if features.rows() != coords.len() {
            return Err(invalid!(
                "feature rows ({}) do not match coordinate count ({})",
                features.rows(),
                coords.len()
            ));
        }
        if features.cols() == 0 {
            return Err(invalid!("feature width must be at least 1"));
        }
        Ok(Self { coords, features })
    }

    pub fn coord_set(&self) -> &Arc<CoordSet> {
        &self.coords
    }

    pub fn coords(&self) -> &[Coord] {
        self.coords.coords()
    }

    pub fn features(&self) -> &Dense<T> {
        &self.features
    }

    pub fn into_features(self) -> Dense<T> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.features.cols()
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    pub fn with_features(&self, features: Dense<T>) -> Result<Self> {
        Self::new(self.coords.clone(), features)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelParams {
    pub voxel_size: Vec<f64>,
}

impl VoxelParams {
    pub fn new(voxel_size: Vec<f64>) -> Result<Self> {
        check_dim(voxel_size.len())?;
        if voxel_size.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid!("voxel sizes must be positive and finite"));
        }
        Ok(Self { voxel_size })
    }

    pub fn uniform(dim: usize, size: f64) -> Result<Self> {
        Self::new(vec![size; dim])
    }

    pub fn dim(&self) -> usize {
        self.voxel_size.len()
    }
}

/// How features of raw points that land in the same voxel are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DedupRule {
    #[default]
    First,
    Mean,
}

/// Floor-quantizes `raw` (row-major `M x D`) and keeps one row per voxel.
/// Output order follows first appearance. Without features every point gets
/// a single feature of 1.
pub fn quantize<T: Real>(
    raw: &[f64],
    features: Option<&Dense<T>>,
    params: &VoxelParams,
    rule: DedupRule,
) -> Result<SparseTensor<T>> {
    let dim = params.dim();
    if raw.is_empty() || !raw.len().is_multiple_of(dim) {
        return Err(invalid!("raw coordinates must be a non-empty M x {dim} array"));
    }
    let m = raw.len() / dim;
    if let Some(f) = features {
        if f.rows() != m {
            return Err(invalid!("feature rows ({}) do not match point count ({m})", f.rows()));
        }
    }
    let mut keys = Vec::with_capacity(m);
    for (i, p) in raw.chunks_exact(dim).enumerate() {
        let mut xyz = [0i32; 3];
        for a in 0..dim {
            if !p[a].is_finite() {
                return Err(invalid!("point {i} has a non-finite coordinate"));
            }
            let q = (p[a] / params.voxel_size[a]).floor();
            if q < i32::MIN as f64 || q > i32::MAX as f64 {
                return Err(invalid!("point {i} quantizes outside the 32-bit grid"));
            }
            xyz[a] = q as i32;
        }
        keys.push(Coord::new(xyz));
    }

    let mut index = CoordLookup::default();
    let mut coords = Vec::new();
    let mut assign = Vec::with_capacity(m);
    for &c in &keys {
        let row = match index.get(&c) {
            Some(r) => r,
            None => {
                index.map.insert(CoordKey(c), coords.len());
                coords.push(c);
                coords.len() - 1
            }
        };
        assign.push(row);
    }

    let n = coords.len();
    let feats = match features {
        None => Dense::from_fn(n, 1, |_, _| T::one()),
        Some(f) => {
            let cols = f.cols();
            let mut out = Dense::zeros(n, cols);
            match rule {
                DedupRule::First => {
                    let mut filled = vec![false; n];
                    for (i, &r) in assign.iter().enumerate() {
                        if !filled[r] {
                            filled[r] = true;
                            out.row_mut(r).copy_from_slice(f.row(i));
                        }
                    }
                }
                DedupRule::Mean => {
                    let mut counts = vec![0usize; n];
                    for (i, &r) in assign.iter().enumerate() {
                        counts[r] += 1;
                        for (o, &v) in out.row_mut(r).iter_mut().zip(f.row(i)) {
                            *o = *o + v;
                        }
                    }
                    for (r, &cnt) in counts.iter().enumerate() {
                        let inv = T::from_f64(cnt as f64);
                        for v in out.row_mut(r) {
                            *v = *v / inv;
                        }
                    }
                }
            }
            out
        }
    };
    SparseTensor::new(CoordSet::new(dim, [1; 3], coords)?, feats)
}

/// Row lookup for a tensor's coordinates.
pub fn coord_index<T: Real>(tensor: &SparseTensor<T>) -> &CoordLookup {
    tensor.coord_set().lookup()
}
