use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use sparsekit::cost::{cost_report, csv_row, CSV_HEADER};
use sparsekit::io::read_points;
use sparsekit::kmap::ws_to_os;
use sparsekit::tuner::{plan, LayerKind, LayerSpec, INPUT};
use sparsekit::{toy, DataflowConfig, KernelMapWS, LayerShape, NetworkSpec, TilePreset};

use crate::inputs::{layer_maps, load_net, voxel_coords, write_text};
use crate::Prec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tile {
    Small,
    Large,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    /// Network spec (JSON). A single 3x3x3 submanifold layer when omitted.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Input points (text or TSPT).
    #[arg(long, required_unless_present = "toy", conflicts_with = "toy")]
    pub input: Option<PathBuf>,
    /// Cost the six-output 2-D worked example instead of a cloud.
    #[arg(long)]
    pub toy: bool,
    /// Implicit GEMM split counts, inclusive (`0..4`, or a single value).
    #[arg(long, default_value = "0..4", value_parser = parse_range)]
    pub splits: RangeInclusive<usize>,
    /// Lockstep rows of the cost model. Defaults to 4 for the toy, 32 otherwise.
    #[arg(long)]
    pub warp: Option<usize>,
    #[arg(long, value_enum, default_value_t = Tile::Small)]
    pub tile: Tile,
    #[arg(long, default_value_t = 0.05)]
    pub voxel: f64,
    /// Channels of the default single layer.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Element size for traffic.
    #[arg(long, value_enum, default_value_t = Prec::F32)]
    pub precision: Prec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").unwrap_or((s, s));
    let lo: usize = a.trim().parse().map_err(|_| format!("bad split count `{a}`"))?;
    let hi: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad split count `{b}`"))?;
    if lo > hi {
        return Err(format!("empty split range {s}"));
    }
    Ok(lo..=hi)
}

pub const HEADER_EXTRA: &str = ",charged_macs,neighbor_ratio";

fn single_layer(channels: usize) -> NetworkSpec {
    NetworkSpec {
        dim: 3,
        layers: vec![LayerSpec {
            name: "subm".into(),
            kind: LayerKind::Conv,
            c_in: channels,
            c_out: channels,
            kernel_size: 3,
            stride: 1,
            inputs: vec![INPUT.into()],
            transpose_of: None,
        }],
    }
}

pub fn cmd_cost(args: &CostArgs) -> Result<()> {
    ensure!(args.warp != Some(0), "--warp must be positive");
    let tile = match args.tile {
        Tile::Small => TilePreset::SMALL,
        Tile::Large => TilePreset::LARGE,
    };
    let e = args.precision.elem_bytes();
    let mut out = format!("{CSV_HEADER}{HEADER_EXTRA}\n");
    if args.toy {
        if args.net.is_some() {
            bail!("--toy and --net cannot be combined");
        }
        let map = toy::instance().map_ws();
        layer_rows(&mut out, "toy", &map, 1, 1, args, tile, args.warp.unwrap_or(toy::WARP), e)?;
    } else {
        let net = match &args.net {
            Some(p) => load_net(p)?,
            None => single_layer(args.channels),
        };
        let path = args.input.as_ref().expect("clap requires --input without --toy");
        let cloud = read_points(path).with_context(|| format!("reading points {}", path.display()))?;
        let coords = voxel_coords(&cloud, args.voxel, net.dim)?;
        let p = plan(&net, &coords)?;
        for (l, map) in net.layers.iter().zip(layer_maps(&net, &p)?) {
            layer_rows(&mut out, &l.name, &map, l.c_in, l.c_out, args, tile, args.warp.unwrap_or(32), e)?;
        }
    }
    write_text(args.out.as_ref(), &out)
}

#[allow(clippy::too_many_arguments)]
fn layer_rows(
    out: &mut String,
    name: &str,
    map: &KernelMapWS,
    c_in: usize,
    c_out: usize,
    args: &CostArgs,
    tile: TilePreset,
    warp: usize,
    elem_bytes: u64,
) -> Result<()> {
    let shape = LayerShape::from_ws(map, c_in, c_out);
    let raw = ws_to_os(map, map.n_out())?;
    let mut configs = vec![DataflowConfig::gather_gemm_scatter(), DataflowConfig::fetch_on_demand()];
    configs.extend(args.splits.clone().map(|s| DataflowConfig::implicit_gemm(s as u32, tile)));
    for c in configs {
        let r = cost_report(&shape, Some(&raw), &c, warp, elem_bytes)?;
        writeln!(out, "{},{},{:.4}", csv_row(name, &c, &r), r.charged_macs(), shape.neighbor_ratio())?;
    }
    Ok(())
}
