use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsekit::gen::{gen_cloud, CloudKind};
use sparsekit::io::PointCloud;
use sparsekit::tuner::{Scheme, WallClock};
use sparsekit::{default_space, tune_inference, tune_training, DataflowConfig, DataflowKind, ExecOptions, NetworkSpec, Real, SparseTensor, TuneResult};

use crate::inputs::{load_input, load_net, voxelize, weights_or_seeded, ThreadArgs};
use crate::Prec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Inference,
    Training,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Sample inputs (repeatable). Generated planar clouds when omitted.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Inference)]
    pub mode: Mode,
    /// Phase binding for training: `workload` or `mapping`.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Number of generated sample clouds.
    #[arg(long, default_value_t = 4)]
    pub tune_samples: usize,
    /// Points per generated sample.
    #[arg(long, default_value_t = 20_000)]
    pub points: usize,
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 0.05)]
    pub voxel: f64,
    #[arg(long, value_enum, default_value_t = Prec::F32)]
    pub precision: Prec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Restrict the design space to these dataflows (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub space: Option<Vec<String>>,
    #[command(flatten)]
    pub threads: ThreadArgs,
    /// Tune result (JSON). Printed to stdout when omitted, with the table on stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn space(filter: Option<&[String]>) -> Result<Vec<DataflowConfig>> {
    let all = default_space();
    let Some(names) = filter else { return Ok(all) };
    let mut kinds = Vec::new();
    for n in names.iter().filter(|n| !n.is_empty()) {
        kinds.push(match n.as_str() {
            "gather_gemm_scatter" | "ggs" => DataflowKind::GatherGemmScatter,
            "fetch_on_demand" | "fod" => DataflowKind::FetchOnDemand,
            "implicit_gemm" | "igemm" => DataflowKind::ImplicitGemm,
            o => bail!("unknown dataflow `{o}` in --space"),
        });
    }
    Ok(all.into_iter().filter(|c| kinds.contains(&c.kind)).collect())
}

pub fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let net = load_net(&args.net)?;
    let space = space(args.space.as_deref())?;
    let result = match args.precision {
        Prec::F32 => tune_typed::<f32>(args, &net, &space)?,
        Prec::F64 => tune_typed::<f64>(args, &net, &space)?,
    };
    let table = table(&result);
    match &args.out {
        Some(p) => {
            print!("{table}");
            std::fs::write(p, result.to_json() + "\n").with_context(|| format!("writing {}", p.display()))?;
        }
        None => {
            eprint!("{table}");
            println!("{}", result.to_json());
        }
    }
    Ok(())
}

fn samples<T: Real>(args: &TuneArgs, net: &NetworkSpec) -> Result<Vec<SparseTensor<T>>> {
    if !args.input.is_empty() {
        return args.input.iter().map(|p| load_input(p, args.voxel, net)).collect();
    }
    ensure!(args.tune_samples > 0, "--tune-samples must be at least 1");
    ensure!(net.dim == 3, "generated samples are 3-D; pass --input for a {}-D network", net.dim);
    let channels = net.input_channels().context("network has no layer reading `input`")?;
    (0..args.tune_samples as u64)
        .map(|i| {
            let seed = args.seed.wrapping_add(i);
            let mut cloud = PointCloud::from_points(&gen_cloud(CloudKind::PlanarPatches, args.points, seed, args.extent));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            cloud.channels = channels;
            cloud.features = (0..cloud.len() * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
            voxelize(&cloud, args.voxel, 3, channels)
        })
        .collect()
}

fn tune_typed<T: Real>(args: &TuneArgs, net: &NetworkSpec, space: &[DataflowConfig]) -> Result<TuneResult> {
    let weights = weights_or_seeded::<T>(args.weights.as_ref(), net, args.seed)?;
    let samples = samples::<T>(args, net)?;
    let mut m = WallClock::new(net, &weights, &samples, ExecOptions::with_workers(args.threads.workers()?))?;
    m.warmup = args.warmup;
    m.runs = args.runs.max(1);
    let r = match args.mode {
        Mode::Inference => tune_inference(&mut m, space, args.seed)?,
        Mode::Training => {
            let scheme = args.scheme.unwrap_or_else(|| {
                eprintln!("note: no --scheme given; using sparse_mapping");
                Scheme::SparseMapping
            });
            tune_training(&mut m, space, scheme, args.seed)?
        }
    };
    Ok(r)
}

fn table(r: &TuneResult) -> String {
    let mut rows = vec![["group".to_string(), "layers".into(), "forward".into(), "dgrad".into(), "wgrad".into()]];
    for g in &r.groups {
        let opt = |c: Option<DataflowConfig>| c.map_or_else(|| "-".to_string(), |c| c.label());
        rows.push([g.id.to_string(), g.layers.join(","), g.forward.label(), opt(g.dgrad), opt(g.wgrad)]);
    }
    let widths: Vec<usize> = (0..5).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for row in &rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        s += cells.join("  ").trim_end();
        s.push('\n');
    }
    let scheme = r.scheme.map(|s| format!(", scheme {s}")).unwrap_or_default();
    s += &format!(
        "latency {:.3} ms, {} measurements{scheme}, tuning took {:.1} s\n",
        r.latency_ms,
        r.log.len(),
        r.tuning_wall_ms / 1e3
    );
    s
}
