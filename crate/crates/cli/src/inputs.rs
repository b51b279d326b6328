//! Loading and validating the files a subcommand works on.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsekit::io::{decode_tspw, read_file, read_points, PointCloud};
use sparsekit::kmap::{build_kmap_ws, transpose_ws};
use sparsekit::tuner::{GroupConfig, Plan};
use sparsekit::{quantize, CoordSet, DedupRule, KernelMapWS, NetworkSpec, OffsetSet, Real, SparseTensor, TuneResult, VoxelParams, WeightTensor};

/// A numeric check failed. Exits with status 2 rather than 1.
#[derive(Debug)]
pub struct Mismatch(pub String);

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Mismatch {}

/// Worker count: `--threads` wins over `SPARSEKIT_THREADS`, default 1.
#[derive(Args, Clone, Debug)]
pub struct ThreadArgs {
    #[arg(long, env = "SPARSEKIT_THREADS")]
    pub threads: Option<usize>,
}

impl ThreadArgs {
    pub fn workers(&self) -> Result<usize> {
        match self.threads {
            Some(0) => bail!("--threads must be at least 1"),
            Some(n) => Ok(n),
            None => Ok(1),
        }
    }
}

pub fn load_net(path: &Path) -> Result<NetworkSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading network spec {}", path.display()))?;
    NetworkSpec::from_json(&text).with_context(|| format!("parsing network spec {}", path.display()))
}

/// Weights from a TSPW file, checked against the network's layer shapes.
pub fn load_weights<T: Real>(path: &Path, net: &NetworkSpec) -> Result<Vec<WeightTensor<T>>> {
    let bytes = read_file(path).with_context(|| format!("reading weights {}", path.display()))?;
    let w = decode_tspw::<T>(&bytes).with_context(|| format!("parsing weights {}", path.display()))?;
    check_weights(net, &w).with_context(|| format!("weights {} do not fit the network", path.display()))?;
    Ok(w)
}

fn check_weights<T: Real>(net: &NetworkSpec, w: &[WeightTensor<T>]) -> Result<()> {
    ensure!(w.len() == net.layers.len(), "{} weight tensors for {} layers", w.len(), net.layers.len());
    for (i, (l, t)) in net.layers.iter().zip(w).enumerate() {
        let want = (net.volume(i), l.c_in, l.c_out);
        let got = (t.volume(), t.c_in(), t.c_out());
        ensure!(want == got, "layer `{}` expects {}x{}x{}, file has {}x{}x{}", l.name, want.0, want.1, want.2, got.0, got.1, got.2);
    }
    Ok(())
}

/// Seeded He-style weights with scale `1/sqrt(V * C_in)`, drawn in f32 so the
/// same seed gives the same values as `gen weights`.
pub fn seeded_weights(net: &NetworkSpec, seed: u64) -> Vec<WeightTensor<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..net.layers.len())
        .map(|i| {
            let l = &net.layers[i];
            let v = net.volume(i);
            WeightTensor::random(v, l.c_in, l.c_out, 1.0 / ((v * l.c_in) as f64).sqrt(), &mut rng)
        })
        .collect()
}

/// Weights from `path`, or seeded ones with a warning.
pub fn weights_or_seeded<T: Real>(path: Option<&PathBuf>, net: &NetworkSpec, seed: u64) -> Result<Vec<WeightTensor<T>>> {
    match path {
        Some(p) => load_weights(p, net),
        None => {
            eprintln!("warning: no --weights given; using seeded random weights (seed {seed})");
            Ok(seeded_weights(net, seed).iter().map(WeightTensor::cast).collect())
        }
    }
}

/// Voxelizes a cloud for a network with `channels` input channels. Clouds
/// without features get a constant 1, which only fits single-channel inputs.
pub fn voxelize<T: Real>(cloud: &PointCloud, voxel: f64, dim: usize, channels: usize) -> Result<SparseTensor<T>> {
    ensure!(cloud.dim == dim, "cloud is {}-D, network is {dim}-D", cloud.dim);
    ensure!(!cloud.is_empty(), "cloud has no points");
    let features = cloud.feature_matrix::<T>();
    match &features {
        Some(f) => ensure!(f.cols() == channels, "cloud has {} feature channels, network expects {channels}", f.cols()),
        None => ensure!(channels == 1, "cloud has no features, network expects {channels} input channels"),
    }
    let params = VoxelParams::uniform(dim, voxel)?;
    Ok(quantize(&cloud.coords, features.as_ref(), &params, DedupRule::First)?)
}

pub fn load_input<T: Real>(path: &Path, voxel: f64, net: &NetworkSpec) -> Result<SparseTensor<T>> {
    let cloud = read_points(path).with_context(|| format!("reading points {}", path.display()))?;
    let channels = net.input_channels().context("network has no layer reading `input`")?;
    voxelize(&cloud, voxel, net.dim, channels).with_context(|| format!("voxelizing {}", path.display()))
}

/// Voxel coordinates only; an empty cloud gives an empty set.
pub fn voxel_coords(cloud: &PointCloud, voxel: f64, dim: usize) -> Result<Arc<CoordSet>> {
    ensure!(cloud.dim == dim, "cloud is {}-D, expected {dim}-D", cloud.dim);
    if cloud.is_empty() {
        return Ok(CoordSet::new(dim, [1; 3], Vec::new())?);
    }
    let t = quantize::<f32>(&cloud.coords, None, &VoxelParams::uniform(dim, voxel)?, DedupRule::First)?;
    Ok(t.coord_set().clone())
}

/// Pair-list map of every layer, in the orientation the layer runs.
pub fn layer_maps(net: &NetworkSpec, plan: &Plan) -> Result<Vec<KernelMapWS>> {
    let mut group_maps = Vec::with_capacity(plan.groups.len());
    for g in &plan.groups {
        let offsets = OffsetSet::new(net.dim, g.kernel_size)?;
        group_maps.push(build_kmap_ws(&g.input, &g.output, g.stride, &offsets)?);
    }
    Ok(plan
        .layers
        .iter()
        .map(|l| {
            let m = &group_maps[l.group];
            if l.transposed() {
                transpose_ws(m)
            } else {
                m.clone()
            }
        })
        .collect())
}

/// Assignment from a tune result whose groups must match the plan.
pub fn assignment_from(result: &TuneResult, net: &NetworkSpec, plan: &Plan) -> Result<Vec<GroupConfig>> {
    ensure!(
        result.groups.len() == plan.groups.len(),
        "tune result has {} groups, network has {} for this input",
        result.groups.len(),
        plan.groups.len()
    );
    for (r, g) in result.groups.iter().zip(&plan.groups) {
        let names: Vec<&str> = g.layers.iter().map(|&l| net.layers[l].name.as_str()).collect();
        ensure!(r.layers == names, "tune result group {} covers {:?}, network group covers {:?}", r.id, r.layers, names);
    }
    Ok(result.assignment())
}

pub fn load_tune_result(path: &Path) -> Result<TuneResult> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading tune result {}", path.display()))?;
    TuneResult::from_json(&text).with_context(|| format!("parsing tune result {}", path.display()))
}

pub fn write_text(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
