use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use sparsekit::io::{encode_tspt, write_file, PointCloud};
use sparsekit::tuner::{default_assignment, plan, run_network, GroupConfig};
use sparsekit::{ExecOptions, NetworkSpec, Real, TuneResult};

use crate::inputs::{assignment_from, load_input, load_net, load_tune_result, weights_or_seeded, ThreadArgs};
use crate::Prec;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Network spec (JSON).
    #[arg(long)]
    pub net: PathBuf,
    /// Weights (TSPW). Seeded random weights when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Input points (text or TSPT).
    #[arg(long)]
    pub input: PathBuf,
    /// Output features (TSPT).
    #[arg(long)]
    pub out: PathBuf,
    /// Timing summary (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub voxel: f64,
    #[arg(long, value_enum, default_value_t = Prec::F32)]
    pub precision: Prec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Force the deterministic variant of every dataflow.
    #[arg(long)]
    pub deterministic: bool,
    #[command(flatten)]
    pub threads: ThreadArgs,
    /// Per-group configs from `tune`. Gather-GEMM-scatter everywhere when omitted.
    #[arg(long)]
    pub tune_result: Option<PathBuf>,
}

/// Everything `run` needs, validated before any work starts.
struct RunManifest<'a> {
    args: &'a RunArgs,
    net: NetworkSpec,
    tune: Option<TuneResult>,
    workers: usize,
}

impl<'a> RunManifest<'a> {
    fn load(args: &'a RunArgs) -> Result<Self> {
        anyhow::ensure!(args.voxel.is_finite() && args.voxel > 0.0, "--voxel must be positive");
        let net = load_net(&args.net)?;
        let tune = args.tune_result.as_deref().map(load_tune_result).transpose()?;
        Ok(Self {
            args,
            net,
            tune,
            workers: args.threads.workers()?,
        })
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let m = RunManifest::load(args)?;
    match args.precision {
        Prec::F32 => run_typed::<f32>(&m),
        Prec::F64 => run_typed::<f64>(&m),
    }
}

fn run_typed<T: Real>(m: &RunManifest) -> Result<()> {
    let args = m.args;
    let net = &m.net;
    let weights = weights_or_seeded::<T>(args.weights.as_ref(), net, args.seed)?;
    let x = load_input::<T>(&args.input, args.voxel, net)?;
    let p = plan(net, x.coord_set())?;
    let mut assignment = match &m.tune {
        Some(t) => assignment_from(t, net, &p)?,
        None => {
            eprintln!("warning: no --tune-result given; using gather_gemm_scatter for every group");
            default_assignment(p.groups.len())
        }
    };
    if args.deterministic {
        for g in &mut assignment {
            *g = GroupConfig {
                forward: g.forward.with_deterministic(true),
                dgrad: g.dgrad.with_deterministic(true),
                wgrad: g.wgrad.with_deterministic(true),
            };
        }
    }
    let out = run_network(net, &weights, &x, &assignment, &ExecOptions::with_workers(m.workers)).context("running network")?;

    let y = &out.output;
    let dim = net.dim;
    let cloud = PointCloud::new(
        dim,
        y.coords().iter().flat_map(|c| c.xyz[..dim].iter().map(|&v| f64::from(v))).collect(),
        y.channels(),
        y.features().as_slice().iter().map(|&v| Real::to_f64(v)).collect(),
    )?;
    write_file(&args.out, &encode_tspt(&cloud)?).with_context(|| format!("writing {}", args.out.display()))?;

    let groups: Vec<_> = p
        .groups
        .iter()
        .zip(&assignment)
        .map(|(g, a)| {
            json!({
                "id": g.id,
                "layers": g.layers.iter().map(|&l| net.layers[l].name.as_str()).collect::<Vec<_>>(),
                "config": a.forward.label(),
            })
        })
        .collect();
    let summary = json!({
        "precision": args.precision.name(),
        "workers": m.workers,
        "points_in": x.len(),
        "points_out": y.len(),
        "channels_out": y.channels(),
        "groups": groups,
        "timing": {
            "plan_ms": out.timing.plan_ms,
            "total_ms": out.timing.total_ms(),
            "groups": out.timing.groups,
        },
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    crate::inputs::write_text(args.timing.as_ref(), &text)
}
