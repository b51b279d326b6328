use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use sparsekit::gen::{gen_cloud, CloudKind};
use sparsekit::io::{encode_tspt, encode_tspw, write_file, write_points_text, PointCloud};
use sparsekit::tuner::toy_unet;

use crate::inputs::{load_net, seeded_weights, write_text};

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Synthetic point cloud.
    Cloud(CloudArgs),
    /// Seeded random weights for a network (TSPW).
    Weights(WeightArgs),
    /// The six-layer toy U-Net spec (JSON).
    Unet(UnetArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Uniform,
    PlanarPatches,
    GaussianClusters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PointFormat {
    Text,
    Tspt,
}

#[derive(Args, Debug)]
pub struct CloudArgs {
    #[arg(long, value_enum, default_value_t = Kind::PlanarPatches)]
    pub kind: Kind,
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the cube the points fill.
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    #[arg(long, value_enum, default_value_t = PointFormat::Text)]
    pub format: PointFormat,
    /// Output file; stdout when omitted (text only).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WeightArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct UnetArgs {
    #[arg(long, default_value_t = 1)]
    pub c_in: usize,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 4)]
    pub c_out: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_gen(cmd: &GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Cloud(a) => gen_cloud_file(a),
        GenCommand::Weights(a) => {
            let net = load_net(&a.net)?;
            let bytes = encode_tspw(&seeded_weights(&net, a.seed))?;
            write_file(&a.out, &bytes).with_context(|| format!("writing {}", a.out.display()))
        }
        GenCommand::Unet(a) => {
            ensure!(a.c_in > 0 && a.width > 0 && a.c_out > 0, "channel counts must be positive");
            write_text(a.out.as_ref(), &(toy_unet(a.c_in, a.width, a.c_out).to_json() + "\n"))
        }
    }
}

fn gen_cloud_file(a: &CloudArgs) -> Result<()> {
    ensure!(a.extent.is_finite() && a.extent > 0.0, "--extent must be positive");
    let kind = match a.kind {
        Kind::Uniform => CloudKind::Uniform,
        Kind::PlanarPatches => CloudKind::PlanarPatches,
        Kind::GaussianClusters => CloudKind::GaussianClusters,
    };
    let cloud = PointCloud::from_points(&gen_cloud(kind, a.n, a.seed, a.extent));
    match a.format {
        PointFormat::Text => {
            let header = vec![format!("sparsekit cloud kind={kind} n={} seed={} extent={}", a.n, a.seed, a.extent), "x y z".to_string()];
            write_text(a.out.as_ref(), &write_points_text(&cloud, &header)?)
        }
        PointFormat::Tspt => {
            let out = a.out.as_ref().context("--format tspt needs --out")?;
            write_file(out, &encode_tspt(&cloud)?).with_context(|| format!("writing {}", out.display()))
        }
    }
}
