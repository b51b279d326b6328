//! Seeded synthetic point clouds in the cube `[0, extent)³`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudKind {
    Uniform,
    /// Points on randomly oriented rectangular patches with small normal
    /// jitter; surface-like sparsity.
    PlanarPatches,
    GaussianClusters,
}

impl CloudKind {
    pub fn name(self) -> &'static str {
        match self {
            CloudKind::Uniform => "uniform",
            CloudKind::PlanarPatches => "planar_patches",
            CloudKind::GaussianClusters => "gaussian_clusters",
        }
    }
}

impl fmt::Display for CloudKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CloudKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(CloudKind::Uniform),
            "planar_patches" => Ok(CloudKind::PlanarPatches),
            "gaussian_clusters" => Ok(CloudKind::GaussianClusters),
            o => Err(format!("unknown cloud kind `{o}` (uniform, planar_patches, gaussian_clusters)")),
        }
    }
}

/// Patch count and size for planar clouds: one patch per `POINTS_PER_PATCH`
/// points, half-widths drawn from `PATCH_HALF` times the extent.
const POINTS_PER_PATCH: usize = 2000;
const PATCH_HALF: (f64, f64) = (0.08, 0.2);
const PATCH_JITTER: f64 = 0.002;
const CLUSTER_SIGMA: f64 = 0.04;

pub fn gen_cloud(kind: CloudKind, n: usize, seed: u64, extent: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || rng.random::<f64>();
    match kind {
        CloudKind::Uniform => (0..n).map(|_| [unit() * extent, unit() * extent, unit() * extent]).collect(),
        CloudKind::PlanarPatches => planar(n, seed, extent),
        CloudKind::GaussianClusters => clusters(n, seed, extent),
    }
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [0, 1, 2].map(|_| StandardNormal.sample(rng));
        let n = norm(v);
        if n > 1e-9 {
            return v.map(|x| x / n);
        }
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn wrap(x: f64, extent: f64) -> f64 {
    let r = x.rem_euclid(extent);
    if r >= extent {
        0.0
    } else {
        r
    }
}

fn planar(n: usize, seed: u64, extent: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_5a5a);
    let patches = n.div_ceil(POINTS_PER_PATCH).max(1);
    let frames: Vec<_> = (0..patches)
        .map(|_| {
            let center = [0, 1, 2].map(|_| rng.random::<f64>() * extent);
            let normal = unit_vector(&mut rng);
            let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u = cross(normal, helper);
            let u = u.map(|x| x / norm(u));
            let v = cross(normal, u);
            let hu = rng.random_range(PATCH_HALF.0..PATCH_HALF.1) * extent;
            let hv = rng.random_range(PATCH_HALF.0..PATCH_HALF.1) * extent;
            (center, normal, u, v, hu, hv)
        })
        .collect();
    let jitter = Normal::new(0.0, PATCH_JITTER * extent).unwrap();
    (0..n)
        .map(|i| {
            let (c, nrm, u, v, hu, hv) = frames[i % patches];
            let a = rng.random_range(-hu..hu);
            let b = rng.random_range(-hv..hv);
            let h = jitter.sample(&mut rng);
            [0, 1, 2].map(|d| wrap(c[d] + a * u[d] + b * v[d] + h * nrm[d], extent))
        })
        .collect()
}

fn clusters(n: usize, seed: u64, extent: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1c1_c1c1);
    let k = n.div_ceil(POINTS_PER_PATCH).max(1);
    let centers: Vec<[f64; 3]> = (0..k).map(|_| [0, 1, 2].map(|_| rng.random::<f64>() * extent)).collect();
    let spread = Normal::new(0.0, CLUSTER_SIGMA * extent).unwrap();
    (0..n)
        .map(|i| {
            let c = centers[i % k];
            [0, 1, 2].map(|d| wrap(c[d] + spread.sample(&mut rng), extent))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_bounds() {
        for kind in [CloudKind::Uniform, CloudKind::PlanarPatches, CloudKind::GaussianClusters] {
            let a = gen_cloud(kind, 500, 9, 2.0);
            assert_eq!(a, gen_cloud(kind, 500, 9, 2.0));
            assert_ne!(a, gen_cloud(kind, 500, 10, 2.0));
            assert!(a.iter().flatten().all(|&x| (0.0..2.0).contains(&x)));
        }
        assert!(gen_cloud(CloudKind::PlanarPatches, 0, 1, 1.0).is_empty());
    }

    #[test]
    fn kind_names_parse() {
        for kind in [CloudKind::Uniform, CloudKind::PlanarPatches, CloudKind::GaussianClusters] {
            assert_eq!(kind.name().parse::<CloudKind>().unwrap(), kind);
        }
    }
}
