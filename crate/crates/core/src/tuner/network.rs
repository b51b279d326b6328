use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench::Clock;
use crate::error::invalid;
use crate::exec::{conv_forward, conv_wgrad, prepare_os, DataflowConfig, ExecOptions, LayerMap, Reorder, WeightTensor};
use crate::kmap::{build_kmap_ws, build_out_coords, transpose_ws, ws_to_os, MapKey, OffsetSet};
use crate::real::{Dense, Real};
use crate::tensor::{CoordSet, CoordSetId, SparseTensor};
use crate::Result;

/// Name of the network input tensor in `inputs` lists.
pub const INPUT: &str = "input";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    ConvTransposed,
}

fn default_inputs() -> Vec<String> {
    vec![INPUT.to_string()]
}

fn default_stride() -> u32 {
    1
}

fn default_dim() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel_size: usize,
    #[serde(default = "default_stride")]
    pub stride: u32,
    /// Producer tensors, concatenated along channels. Every entry is a
    /// previous layer's name or [`INPUT`].
    #[serde(default = "default_inputs")]
    pub inputs: Vec<String>,
    /// For transposed layers: the strided layer whose map is mirrored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transpose_of: Option<String>,
}

/// Layer graph in topological order. The last layer's output is the network
/// output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: NetworkSpec = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn volume(&self, layer: usize) -> usize {
        self.layers[layer].kernel_size.pow(self.dim as u32)
    }

    pub fn stride(&self, layer: usize) -> [u32; 3] {
        let s = self.layers[layer].stride;
        if self.dim == 2 {
            [s, s, 1]
        } else {
            [s; 3]
        }
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Input channels of the network.
    pub fn input_channels(&self) -> Option<usize> {
        self.layers.iter().find(|l| l.inputs == [INPUT]).map(|l| l.c_in)
    }

    /// Checks names, references, channel chaining, and that transposed layers
    /// mirror an earlier strided layer with matching kernel and stride. Each
    /// tensor is tracked symbolically by the coordinate set it lives on.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(invalid!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.layers.is_empty() {
            return Err(invalid!("network has no layers"));
        }
        // tensor name -> (coordinate symbol, channels)
        let mut tensors: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut input_ch: Option<usize> = None;
        let mut strided: HashMap<(usize, u32), usize> = HashMap::new();
        // layer -> (input symbol, output symbol)
        let mut syms: Vec<(usize, usize)> = Vec::new();
        let mut next_sym = 1;
        for (i, l) in self.layers.iter().enumerate() {
            let ctx = |msg: String| invalid!("layer `{}`: {msg}", l.name);
            if l.name == INPUT || l.name.is_empty() {
                return Err(ctx("reserved or empty name".into()));
            }
            if self.layers[..i].iter().any(|p| p.name == l.name) {
                return Err(ctx("duplicate name".into()));
            }
            if l.c_in == 0 || l.c_out == 0 || l.stride == 0 {
                return Err(ctx("channels and stride must be positive".into()));
            }
            if l.kernel_size % 2 == 0 {
                return Err(ctx(format!("kernel size {} must be odd", l.kernel_size)));
            }
            if l.inputs.is_empty() {
                return Err(ctx("no inputs".into()));
            }
            let mut sym = None;
            let mut ch = 0;
            for src in &l.inputs {
                let (s, c) = if src == INPUT {
                    let c = *input_ch.get_or_insert(l.c_in);
                    (0, c)
                } else {
                    *tensors.get(src.as_str()).ok_or_else(|| ctx(format!("unknown input `{src}`")))?
                };
                if sym.is_some_and(|p| p != s) {
                    return Err(ctx("inputs live on different coordinate sets".into()));
                }
                sym = Some(s);
                ch += c;
            }
            if ch != l.c_in {
                return Err(ctx(format!("inputs provide {ch} channels, layer expects {}", l.c_in)));
            }
            let in_sym = sym.unwrap();
            let out_sym = match l.kind {
                LayerKind::Conv => {
                    if l.transpose_of.is_some() {
                        return Err(ctx("transpose_of is only valid on conv_transposed layers".into()));
                    }
                    if l.stride == 1 {
                        in_sym
                    } else {
                        *strided.entry((in_sym, l.stride)).or_insert_with(|| {
                            next_sym += 1;
                            next_sym - 1
                        })
                    }
                }
                LayerKind::ConvTransposed => {
                    let target = l.transpose_of.as_deref().ok_or_else(|| ctx("conv_transposed needs transpose_of".into()))?;
                    let t = self.layers[..i]
                        .iter()
                        .position(|p| p.name == target)
                        .ok_or_else(|| ctx(format!("transpose_of `{target}` is not an earlier layer")))?;
                    let tl = &self.layers[t];
                    if tl.kind != LayerKind::Conv || tl.stride != l.stride || tl.kernel_size != l.kernel_size {
                        return Err(ctx(format!("`{target}` is not a conv with the same kernel and stride")));
                    }
                    if syms[t].1 != in_sym {
                        return Err(ctx(format!("input does not live on the output coordinates of `{target}`")));
                    }
                    syms[t].0
                }
            };
            syms.push((in_sym, out_sym));
            tensors.insert(&l.name, (out_sym, l.c_out));
        }
        Ok(())
    }
}

/// Layers that share one kernel map. `key` is the canonical (forward) key.
#[derive(Clone, Debug)]
pub struct LayerGroup {
    pub id: usize,
    pub layers: Vec<usize>,
    pub key: MapKey,
    pub input: Arc<CoordSet>,
    pub output: Arc<CoordSet>,
    pub stride: [u32; 3],
    pub kernel_size: usize,
}

#[derive(Clone, Debug)]
pub struct PlannedLayer {
    pub input: Arc<CoordSet>,
    pub output: Arc<CoordSet>,
    pub key: MapKey,
    pub group: usize,
}

impl PlannedLayer {
    pub fn transposed(&self) -> bool {
        self.key.transposed
    }
}

/// Coordinate sets and map keys of every layer for one input.
#[derive(Clone, Debug)]
pub struct Plan {
    pub layers: Vec<PlannedLayer>,
    pub groups: Vec<LayerGroup>,
}

/// Propagates coordinates through the network and groups layers by the
/// canonical key of the map they use, in order of first appearance. Strided
/// layers reading the same tensor coordinates share output coordinates.
pub fn plan(net: &NetworkSpec, input: &Arc<CoordSet>) -> Result<Plan> {
    if input.dim() != net.dim {
        return Err(invalid!("input is {}-D, network is {}-D", input.dim(), net.dim));
    }
    let mut tensors: HashMap<&str, Arc<CoordSet>> = HashMap::new();
    tensors.insert(INPUT, input.clone());
    let mut strided: HashMap<(CoordSetId, [u32; 3]), Arc<CoordSet>> = HashMap::new();
    let mut layers: Vec<PlannedLayer> = Vec::with_capacity(net.layers.len());
    let mut groups: Vec<LayerGroup> = Vec::new();
    for (i, l) in net.layers.iter().enumerate() {
        let src = tensors
            .get(l.inputs[0].as_str())
            .cloned()
            .ok_or_else(|| invalid!("layer `{}`: unknown input `{}`", l.name, l.inputs[0]))?;
        let stride = net.stride(i);
        let (output, transposed) = match l.kind {
            LayerKind::Conv if l.stride == 1 => (src.clone(), false),
            LayerKind::Conv => {
                let out = match strided.get(&(src.id(), stride)) {
                    Some(o) => o.clone(),
                    None => {
                        let o = build_out_coords(&src, stride)?;
                        strided.insert((src.id(), stride), o.clone());
                        o
                    }
                };
                (out, false)
            }
            LayerKind::ConvTransposed => {
                let t = l.transpose_of.as_deref().and_then(|n| net.layer_index(n));
                let t = t.ok_or_else(|| invalid!("layer `{}`: missing transpose_of", l.name))?;
                (layers[t].input.clone(), true)
            }
        };
        let key = MapKey {
            input: src.id(),
            output: output.id(),
            kernel_size: l.kernel_size,
            stride,
            transposed,
        };
        let canon = key.canonical();
        let group = match groups.iter().position(|g| g.key == canon) {
            Some(g) => g,
            None => {
                let (gi, go) = if transposed { (output.clone(), src.clone()) } else { (src.clone(), output.clone()) };
                groups.push(LayerGroup {
                    id: groups.len(),
                    layers: Vec::new(),
                    key: canon,
                    input: gi,
                    output: go,
                    stride,
                    kernel_size: l.kernel_size,
                });
                groups.len() - 1
            }
        };
        groups[group].layers.push(i);
        layers.push(PlannedLayer {
            input: src,
            output: output.clone(),
            key,
            group,
        });
        tensors.insert(&l.name, output);
    }
    Ok(Plan { layers, groups })
}

/// Groups of `net` for the given input coordinates.
pub fn partition_groups(net: &NetworkSpec, input: &Arc<CoordSet>) -> Result<Vec<LayerGroup>> {
    Ok(plan(net, input)?.groups)
}

/// Dataflow per phase for one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub forward: DataflowConfig,
    pub dgrad: DataflowConfig,
    pub wgrad: DataflowConfig,
}

impl GroupConfig {
    pub fn uniform(config: DataflowConfig) -> Self {
        Self {
            forward: config,
            dgrad: config,
            wgrad: config,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Forward,
    Dgrad,
    Wgrad,
}

/// Which training phases run for real. Skipped phases are replaced by
/// all-ones stand-ins of the right shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phases {
    pub forward: bool,
    pub dgrad: bool,
    pub wgrad: bool,
}

impl Phases {
    pub const INFERENCE: Phases = Phases {
        forward: true,
        dgrad: false,
        wgrad: false,
    };
    pub const ALL: Phases = Phases {
        forward: true,
        dgrad: true,
        wgrad: true,
    };

    pub fn only(list: &[Phase]) -> Phases {
        Phases {
            forward: list.contains(&Phase::Forward),
            dgrad: list.contains(&Phase::Dgrad),
            wgrad: list.contains(&Phase::Wgrad),
        }
    }

    pub fn contains(&self, p: Phase) -> bool {
        match p {
            Phase::Forward => self.forward,
            Phase::Dgrad => self.dgrad,
            Phase::Wgrad => self.wgrad,
        }
    }

    pub fn list(&self) -> Vec<Phase> {
        [Phase::Forward, Phase::Dgrad, Phase::Wgrad].into_iter().filter(|&p| self.contains(p)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GroupTiming {
    pub mapping_ms: f64,
    pub kernel_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunTiming {
    /// Coordinate propagation and grouping.
    pub plan_ms: f64,
    pub groups: Vec<GroupTiming>,
}

impl RunTiming {
    pub fn total_ms(&self) -> f64 {
        self.plan_ms + self.groups.iter().map(|g| g.mapping_ms + g.kernel_ms).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub output: SparseTensor<T>,
    pub timing: RunTiming,
}

#[derive(Clone, Debug)]
pub struct TrainOutput<T> {
    /// `None` when the forward phase was skipped.
    pub output: Option<SparseTensor<T>>,
    /// Gradient of `½‖y‖²` with respect to the network input; `None` unless
    /// dgrad ran.
    pub input_grad: Option<Dense<T>>,
    /// Per-layer weight gradients; empty unless wgrad ran.
    pub weight_grads: Vec<WeightTensor<T>>,
    pub timing: RunTiming,
}

/// Lazily built maps of one plan, keyed by group, orientation and the
/// preparation a config needs.
struct MapStore<'a> {
    plan: &'a Plan,
    ws: HashMap<(usize, bool), Arc<crate::kmap::KernelMapWS>>,
    prepared: HashMap<(usize, bool, Option<(u32, usize)>), LayerMap>,
    timing: Vec<GroupTiming>,
}

impl<'a> MapStore<'a> {
    fn new(plan: &'a Plan) -> Self {
        Self {
            plan,
            ws: HashMap::new(),
            prepared: HashMap::new(),
            timing: vec![GroupTiming::default(); plan.groups.len()],
        }
    }

    fn ws(&mut self, group: usize, transposed: bool) -> Result<Arc<crate::kmap::KernelMapWS>> {
        if let Some(m) = self.ws.get(&(group, transposed)) {
            return Ok(m.clone());
        }
        let m = if transposed {
            let fwd = self.ws(group, false)?;
            let t = Clock::start();
            let m = Arc::new(transpose_ws(&fwd));
            self.timing[group].mapping_ms += t.elapsed_ms();
            m
        } else {
            let g = &self.plan.groups[group];
            let dim = g.input.dim();
            let t = Clock::start();
            let offsets = OffsetSet::new(dim, g.kernel_size)?;
            let m = Arc::new(build_kmap_ws(&g.input, &g.output, g.stride, &offsets)?);
            self.timing[group].mapping_ms += t.elapsed_ms();
            m
        };
        self.ws.insert((group, transposed), m.clone());
        Ok(m)
    }

    /// Map of `group` in the orientation and layout `config` consumes.
    fn map(&mut self, group: usize, transposed: bool, config: &DataflowConfig) -> Result<LayerMap> {
        let prep = (!config.kind.uses_ws_map()).then(|| {
            let pad = if config.reorder == Reorder::Offline { config.tile.cta_m } else { 0 };
            let splits = if config.reorder == Reorder::Offline { config.splits } else { u32::MAX };
            (splits, pad)
        });
        if let Some(m) = self.prepared.get(&(group, transposed, prep)) {
            return Ok(m.clone());
        }
        let ws = self.ws(group, transposed)?;
        let m = match prep {
            None => LayerMap::Ws(ws),
            Some(_) => {
                let t = Clock::start();
                let raw = ws_to_os(&ws, ws.n_out())?;
                let os = match config.reorder {
                    Reorder::Offline => prepare_os(&raw, config)?,
                    Reorder::Online => raw,
                };
                self.timing[group].mapping_ms += t.elapsed_ms();
                LayerMap::Os(Arc::new(os))
            }
        };
        self.prepared.insert((group, transposed, prep), m.clone());
        Ok(m)
    }
}

fn check_weights<T: Real>(net: &NetworkSpec, weights: &[WeightTensor<T>]) -> Result<()> {
    if weights.len() != net.layers.len() {
        return Err(invalid!("{} weight tensors for {} layers", weights.len(), net.layers.len()));
    }
    for (i, (l, w)) in net.layers.iter().zip(weights).enumerate() {
        let v = net.volume(i);
        if (w.volume(), w.c_in(), w.c_out()) != (v, l.c_in, l.c_out) {
            return Err(invalid!(
                "layer `{}` expects weights {v}x{}x{}, file has {}x{}x{}",
                l.name,
                l.c_in,
                l.c_out,
                w.volume(),
                w.c_in(),
                w.c_out()
            ));
        }
    }
    Ok(())
}

fn check_assignment(plan: &Plan, assignment: &[GroupConfig]) -> Result<()> {
    if assignment.len() != plan.groups.len() {
        return Err(invalid!("assignment covers {} groups, network has {}", assignment.len(), plan.groups.len()));
    }
    for g in assignment {
        g.forward.validate()?;
        g.dgrad.validate()?;
        g.wgrad.validate()?;
    }
    Ok(())
}

fn concat_inputs<T: Real>(net: &NetworkSpec, layer: usize, acts: &HashMap<String, Dense<T>>) -> Result<Dense<T>> {
    let srcs = &net.layers[layer].inputs;
    if srcs.len() == 1 {
        return Ok(acts[&srcs[0]].clone());
    }
    let parts: Vec<&Dense<T>> = srcs.iter().map(|s| &acts[s]).collect();
    Dense::hcat(&parts)
}

fn ones<T: Real>(rows: usize, cols: usize) -> Dense<T> {
    Dense::from_fn(rows, cols, |_, _| T::one())
}

/// Forward pass of `net` with per-group dataflows.
pub fn run_network<T: Real>(
    net: &NetworkSpec,
    weights: &[WeightTensor<T>],
    input: &SparseTensor<T>,
    assignment: &[GroupConfig],
    opts: &ExecOptions,
) -> Result<RunOutput<T>> {
    let out = train_step(net, weights, input, assignment, Phases::INFERENCE, opts)?;
    Ok(RunOutput {
        output: out.output.expect("forward phase ran"),
        timing: out.timing,
    })
}

/// One training step with loss `½‖y‖²`. Phases not in `phases` are skipped
/// and their results replaced by all-ones stand-ins, so each phase can be
/// timed on its own.
pub fn train_step<T: Real>(
    net: &NetworkSpec,
    weights: &[WeightTensor<T>],
    input: &SparseTensor<T>,
    assignment: &[GroupConfig],
    phases: Phases,
    opts: &ExecOptions,
) -> Result<TrainOutput<T>> {
    check_weights(net, weights)?;
    if input.channels() != net.input_channels().unwrap_or(input.channels()) {
        return Err(invalid!(
            "input has {} channels, network expects {}",
            input.channels(),
            net.input_channels().unwrap_or(0)
        ));
    }
    let t = Clock::start();
    let plan = plan(net, input.coord_set())?;
    let plan_ms = t.elapsed_ms();
    check_assignment(&plan, assignment)?;
    let mut store = MapStore::new(&plan);

    let mut acts: HashMap<String, Dense<T>> = HashMap::new();
    acts.insert(INPUT.to_string(), input.features().clone());
    for (i, l) in net.layers.iter().enumerate() {
        let pl = &plan.layers[i];
        let y = if phases.forward {
            let x = concat_inputs(net, i, &acts)?;
            let cfg = assignment[pl.group].forward;
            let map = store.map(pl.group, pl.transposed(), &cfg)?;
            let t = Clock::start();
            let y = conv_forward(&x, &weights[i], &map, &cfg, opts)?;
            store.timing[pl.group].kernel_ms += t.elapsed_ms();
            y
        } else {
            ones(pl.output.len(), l.c_out)
        };
        acts.insert(l.name.clone(), y);
    }
    let last = &net.layers.last().unwrap().name;
    let y = acts[last].clone();

    let mut input_grad = None;
    let mut weight_grads = Vec::new();
    if phases.dgrad || phases.wgrad {
        let mut grads: HashMap<String, Dense<T>> = HashMap::new();
        grads.insert(last.clone(), y.clone());
        let mut wgrads: Vec<Option<WeightTensor<T>>> = vec![None; net.layers.len()];
        for (i, l) in net.layers.iter().enumerate().rev() {
            let pl = &plan.layers[i];
            let dy = if phases.dgrad {
                grads.remove(&l.name).unwrap_or_else(|| Dense::zeros(pl.output.len(), l.c_out))
            } else {
                ones(pl.output.len(), l.c_out)
            };
            let gc = assignment[pl.group];
            if phases.wgrad {
                let x = concat_inputs(net, i, &acts)?;
                let map = store.map(pl.group, pl.transposed(), &gc.wgrad)?;
                let t = Clock::start();
                wgrads[i] = Some(conv_wgrad(&x, &dy, &map, &gc.wgrad, opts)?);
                store.timing[pl.group].kernel_ms += t.elapsed_ms();
            }
            if phases.dgrad {
                let map = store.map(pl.group, !pl.transposed(), &gc.dgrad)?;
                let t = Clock::start();
                let dx = conv_forward(&dy, &weights[i].transposed(), &map, &gc.dgrad, opts)?;
                store.timing[pl.group].kernel_ms += t.elapsed_ms();
                let mut col = 0;
                for src in &l.inputs {
                    let width = acts[src].cols();
                    let part = if l.inputs.len() == 1 { dx.clone() } else { dx.column_block(col, width) };
                    col += width;
                    match grads.get_mut(src) {
                        Some(g) => g.as_mut_slice().iter_mut().zip(part.as_slice()).for_each(|(a, &b)| *a = *a + b),
                        None => {
                            grads.insert(src.clone(), part);
                        }
                    }
                }
            }
        }
        if phases.dgrad {
            input_grad = Some(grads.remove(INPUT).unwrap_or_else(|| Dense::zeros(input.len(), input.channels())));
        }
        if phases.wgrad {
            weight_grads = wgrads.into_iter().map(|w| w.expect("every layer has a weight gradient")).collect();
        }
    }

    let output = phases.forward.then(|| SparseTensor::new(plan.layers.last().unwrap().output.clone(), y)).transpose()?;
    Ok(TrainOutput {
        output,
        input_grad,
        weight_grads,
        timing: RunTiming {
            plan_ms,
            groups: store.timing,
        },
    })
}

/// A six-layer 3-D U-Net: two submanifold layers, a strided encoder layer, a
/// submanifold layer at the coarse level, a transposed decoder layer and a
/// fusing layer over the skip concatenation.
pub fn toy_unet(c_in: usize, width: usize, c_out: usize) -> NetworkSpec {
    let conv = |name: &str, c_in, c_out, k, stride, inputs: &[&str]| LayerSpec {
        name: name.into(),
        kind: LayerKind::Conv,
        c_in,
        c_out,
        kernel_size: k,
        stride,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        transpose_of: None,
    };
    NetworkSpec {
        dim: 3,
        layers: vec![
            conv("stem", c_in, width, 3, 1, &[INPUT]),
            conv("enc0", width, width, 3, 1, &["stem"]),
            conv("down", width, 2 * width, 3, 2, &["enc0"]),
            conv("mid", 2 * width, 2 * width, 3, 1, &["down"]),
            LayerSpec {
                name: "up".into(),
                kind: LayerKind::ConvTransposed,
                c_in: 2 * width,
                c_out: width,
                kernel_size: 3,
                stride: 2,
                inputs: vec!["mid".into()],
                transpose_of: Some("down".into()),
            },
            conv("head", 2 * width, c_out, 3, 1, &["up", "enc0"]),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Coord;

    fn cube(n: i32) -> Arc<CoordSet> {
        let coords = (0..n).flat_map(|x| (0..n).flat_map(move |y| (0..n).map(move |z| Coord::new([x, y, z])))).collect();
        CoordSet::new(3, [1; 3], coords).unwrap()
    }

    #[test]
    fn unet_groups() {
        let net = toy_unet(1, 4, 2);
        net.validate().unwrap();
        let groups = partition_groups(&net, &cube(4)).unwrap();
        let members: Vec<Vec<usize>> = groups.iter().map(|g| g.layers.clone()).collect();
        assert_eq!(members, vec![vec![0, 1, 5], vec![2, 4], vec![3]]);
    }

    #[test]
    fn validation_errors() {
        let mut net = toy_unet(1, 4, 2);
        net.layers[5].c_in = 5;
        assert!(net.validate().is_err());
        let mut net = toy_unet(1, 4, 2);
        net.layers[4].transpose_of = Some("mid".into());
        assert!(net.validate().is_err());
        let mut net = toy_unet(1, 4, 2);
        net.layers[1].inputs = vec!["down".into()];
        assert!(net.validate().is_err());
        let mut net = toy_unet(1, 4, 2);
        net.layers[5].inputs = vec!["up".into(), "mid".into()];
        net.layers[5].c_in = 12;
        assert!(net.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = toy_unet(2, 8, 3);
        assert_eq!(NetworkSpec::from_json(&net.to_json()).unwrap(), net);
        let min = r#"{"layers":[{"name":"a","kind":"conv","c_in":1,"c_out":1,"kernel_size":3}]}"#;
        let n = NetworkSpec::from_json(min).unwrap();
        assert_eq!((n.dim, n.layers[0].stride, n.layers[0].inputs.clone()), (3, 1, vec![INPUT.to_string()]));
    }
}
