use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{ensure, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsekit::exec::prepare_os;
use sparsekit::kmap::{build_kmap_ws, build_out_coords, ws_to_os};
use sparsekit::tuner::{plan, INPUT};
use sparsekit::{
    conv_forward, conv_ref, default_space, Coord, CoordSet, DataflowConfig, Dense, ExecOptions, KernelMapWS, LayerMap, OffsetSet, Real, Reorder,
    WeightTensor,
};

use crate::inputs::{layer_maps, load_input, load_net, weights_or_seeded, Mismatch, ThreadArgs};
use crate::Prec;

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Network spec (JSON) whose layers are checked on `--input`.
    #[arg(long, requires = "input")]
    pub net: Option<PathBuf>,
    #[arg(long, requires = "net")]
    pub weights: Option<PathBuf>,
    #[arg(long, requires = "net")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub voxel: f64,
    /// Precision to check; both when omitted.
    #[arg(long, value_enum)]
    pub precision: Option<Prec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seeded random instances checked in addition to the manifest.
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[command(flatten)]
    pub threads: ThreadArgs,
    /// One line per config instead of one per case.
    #[arg(long)]
    pub verbose: bool,
}

/// Relative tolerance for configs that may reorder the sum (non-deterministic
/// ones) on values that are not exact.
fn tolerance(p: Prec) -> f64 {
    match p {
        Prec::F32 => 1e-4,
        Prec::F64 => 1e-10,
    }
}

/// One convolution to compare. `exact` cases use values whose every partial
/// sum is representable, so all dataflows must agree bit for bit.
struct Case<T> {
    name: String,
    x: Dense<T>,
    w: WeightTensor<T>,
    map: KernelMapWS,
    exact: bool,
}

#[derive(Default)]
struct Tally {
    compared: usize,
    failed: usize,
}

pub fn cmd_check(args: &CheckArgs) -> Result<()> {
    ensure!(args.voxel.is_finite() && args.voxel > 0.0, "--voxel must be positive");
    let opts = ExecOptions::with_workers(args.threads.workers()?);
    let precisions = match args.precision {
        Some(p) => vec![p],
        None => vec![Prec::F32, Prec::F64],
    };
    let mut tally = Tally::default();
    for p in precisions {
        match p {
            Prec::F32 => check_typed::<f32>(args, p, &opts, &mut tally)?,
            Prec::F64 => check_typed::<f64>(args, p, &opts, &mut tally)?,
        }
    }
    if tally.failed > 0 {
        return Err(Mismatch(format!("{} of {} comparisons differ from the reference", tally.failed, tally.compared)).into());
    }
    println!("check passed: {} comparisons", tally.compared);
    Ok(())
}

fn check_typed<T: Real>(args: &CheckArgs, p: Prec, opts: &ExecOptions, tally: &mut Tally) -> Result<()> {
    let mut cases = Vec::new();
    if let Some(path) = &args.net {
        cases.extend(manifest_cases::<T>(args, path)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.instances {
        cases.push(random_case(&mut rng, format!("random{i}"))?);
    }
    let space = default_space();
    for case in &cases {
        let want = conv_ref(&case.x, &case.w, &case.map)?;
        let mut worst = (0.0f64, String::new());
        let mut bad = Vec::new();
        for c in &space {
            let got = conv_forward(&case.x, &case.w, &layer_map(&case.map, c)?, c, opts)?;
            let err = rel_err(&got, &want);
            let exact = case.exact || c.deterministic;
            let ok = if exact { got == want } else { err <= tolerance(p) };
            tally.compared += 1;
            if !ok {
                tally.failed += 1;
                bad.push(c.label());
            }
            if args.verbose {
                let rule = if exact { "exact".to_string() } else { format!("tol {:.0e}", tolerance(p)) };
                println!("{} {} {} {} max rel err {err:.3e} ({rule})", pass(ok), p.name(), case.name, c.label());
            }
            if worst.1.is_empty() || err > worst.0 {
                worst = (err, c.label());
            }
        }
        if !args.verbose {
            let kind = if case.exact { "exact values" } else { "continuous values" };
            println!(
                "{} {} {} ({}x{}x{}, {} pairs, {kind}): {} configs, worst {} at {:.3e}",
                pass(bad.is_empty()),
                p.name(),
                case.name,
                case.map.n_out(),
                case.w.c_in(),
                case.w.c_out(),
                case.map.total_pairs(),
                space.len(),
                worst.1,
                worst.0
            );
        }
        for b in bad {
            println!("  mismatch: {b}");
        }
    }
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Largest `|a - b| / max(|b|, 1e-3 * max|b|)`.
fn rel_err<T: Real>(a: &Dense<T>, b: &Dense<T>) -> f64 {
    let scale = b.as_slice().iter().fold(0.0f64, |m, &v| m.max(Real::to_f64(v).abs()));
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    a.as_slice().iter().zip(b.as_slice()).fold(0.0, |m, (&x, &y)| {
        let (x, y) = (Real::to_f64(x), Real::to_f64(y));
        m.max((x - y).abs() / y.abs().max(floor))
    })
}

fn layer_map(ws: &KernelMapWS, config: &DataflowConfig) -> Result<LayerMap> {
    if config.kind.uses_ws_map() {
        return Ok(LayerMap::Ws(Arc::new(ws.clone())));
    }
    let raw = ws_to_os(ws, ws.n_out())?;
    Ok(LayerMap::Os(Arc::new(match config.reorder {
        Reorder::Offline => prepare_os(&raw, config)?,
        Reorder::Online => raw,
    })))
}

/// Every layer of the manifest network on its real input, with activations
/// propagated through the reference convolution.
fn manifest_cases<T: Real>(args: &CheckArgs, net_path: &Path) -> Result<Vec<Case<T>>> {
    let net = load_net(net_path)?;
    let weights = weights_or_seeded::<T>(args.weights.as_ref(), &net, args.seed)?;
    let input = load_input::<T>(args.input.as_ref().expect("clap requires --input with --net"), args.voxel, &net)?;
    let p = plan(&net, input.coord_set())?;
    let maps = layer_maps(&net, &p)?;
    let mut acts: HashMap<&str, Dense<T>> = HashMap::new();
    acts.insert(INPUT, input.features().clone());
    let mut cases = Vec::new();
    for ((l, w), map) in net.layers.iter().zip(&weights).zip(maps) {
        let parts: Vec<&Dense<T>> = l.inputs.iter().map(|s| &acts[s.as_str()]).collect();
        let x = if parts.len() == 1 { parts[0].clone() } else { Dense::hcat(&parts)? };
        let y = conv_ref(&x, w, &map)?;
        acts.insert(&l.name, y);
        cases.push(Case {
            name: format!("layer {}", l.name),
            x,
            w: w.clone(),
            map,
            exact: false,
        });
    }
    Ok(cases)
}

/// Multiples of 1/16 in [-4, 4]: exact in f32 for every summation order at
/// these sizes.
fn dyadic(rng: &mut impl Rng) -> f64 {
    rng.random_range(-64..=64) as f64 / 16.0
}

fn random_case<T: Real>(rng: &mut impl Rng, name: String) -> Result<Case<T>> {
    let n = rng.random_range(1..=2000usize);
    let side = ((n as f64 / 0.3).cbrt().ceil() as i32).max(2);
    let coords: Vec<Coord> = (0..n).map(|_| Coord::new([0, 1, 2].map(|_| rng.random_range(-side / 2..side - side / 2)))).collect();
    let input = CoordSet::from_unsorted(3, [1; 3], coords)?;
    let s = [1u32, 2][rng.random_range(0..2)];
    let output = build_out_coords(&input, [s; 3])?;
    let offsets = OffsetSet::new(3, 3)?;
    let map = build_kmap_ws(&input, &output, [s; 3], &offsets)?;
    let ch = [1usize, 4, 16];
    let (c_in, c_out) = (ch[rng.random_range(0..3)], ch[rng.random_range(0..3)]);
    let x = Dense::from_fn(input.len(), c_in, |_, _| T::from_f64(dyadic(rng)));
    let w = WeightTensor::from_fn(offsets.len(), c_in, c_out, |_, _, _| T::from_f64(dyadic(rng)));
    Ok(Case {
        name: format!("{name} stride {s}"),
        x,
        w,
        map,
        exact: true,
    })
}
