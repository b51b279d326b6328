use crate::bench::{median_ms, Clock};
use crate::cost::{traffic_model, LayerShape};
use crate::error::invalid;
use crate::exec::{DataflowConfig, ExecOptions, WeightTensor};
use crate::kmap::{build_kmap_ws, OffsetSet};
use crate::real::Real;
use crate::tensor::SparseTensor;
use crate::Result;

use super::network::{plan, train_step, GroupConfig, NetworkSpec, Phase, Phases};
use super::Measure;

/// Latency oracle that sums a per-(group, phase, config) cost over the timed
/// phases. Counts its calls.
pub struct AdditiveOracle<F> {
    layers: Vec<Vec<String>>,
    cost: F,
    calls: usize,
}

impl<F: Fn(usize, Phase, &DataflowConfig) -> f64> AdditiveOracle<F> {
    pub fn new(layers: Vec<Vec<String>>, cost: F) -> Self {
        Self { layers, cost, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    /// Latency of an assignment without counting a call.
    pub fn evaluate(&self, assignment: &[GroupConfig], phases: Phases) -> f64 {
        let mut total = 0.0;
        for (g, a) in assignment.iter().enumerate() {
            for p in phases.list() {
                let c = match p {
                    Phase::Forward => &a.forward,
                    Phase::Dgrad => &a.dgrad,
                    Phase::Wgrad => &a.wgrad,
                };
                total += (self.cost)(g, p, c);
            }
        }
        total
    }
}

impl<F: Fn(usize, Phase, &DataflowConfig) -> f64> Measure for AdditiveOracle<F> {
    fn group_layers(&self) -> Vec<Vec<String>> {
        self.layers.clone()
    }

    fn measure(&mut self, assignment: &[GroupConfig], phases: Phases) -> Result<f64> {
        self.calls += 1;
        Ok(self.evaluate(assignment, phases))
    }
}

/// Wall-clock measurement on sample inputs: for each sample the median of
/// `runs` timed runs after `warmup` untimed ones, averaged over samples.
/// Every run rebuilds coordinates and maps, so mapping time is included.
pub struct WallClock<'a, T> {
    net: &'a NetworkSpec,
    weights: &'a [WeightTensor<T>],
    samples: &'a [SparseTensor<T>],
    opts: ExecOptions,
    pub warmup: usize,
    pub runs: usize,
    names: Vec<Vec<String>>,
    shapes: Vec<Vec<LayerShape>>,
}

impl<'a, T: Real> WallClock<'a, T> {
    pub fn new(net: &'a NetworkSpec, weights: &'a [WeightTensor<T>], samples: &'a [SparseTensor<T>], opts: ExecOptions) -> Result<Self> {
        let first = samples.first().ok_or_else(|| invalid!("tuning needs at least one sample input"))?;
        let p = plan(net, first.coord_set())?;
        let names = p.groups.iter().map(|g| g.layers.iter().map(|&l| net.layers[l].name.clone()).collect()).collect();
        let mut shapes = Vec::with_capacity(p.groups.len());
        for g in &p.groups {
            let offsets = OffsetSet::new(net.dim, g.kernel_size)?;
            let m = build_kmap_ws(&g.input, &g.output, g.stride, &offsets)?;
            shapes.push(
                g.layers
                    .iter()
                    .map(|&l| {
                        let spec = &net.layers[l];
                        let mut s = LayerShape::from_ws(&m, spec.c_in, spec.c_out);
                        if p.layers[l].transposed() {
                            std::mem::swap(&mut s.n_in, &mut s.n_out);
                        }
                        s
                    })
                    .collect(),
            );
        }
        Ok(Self {
            net,
            weights,
            samples,
            opts,
            warmup: 2,
            runs: 5,
            names,
            shapes,
        })
    }
}

impl<T: Real> Measure for WallClock<'_, T> {
    fn group_layers(&self) -> Vec<Vec<String>> {
        self.names.clone()
    }

    fn measure(&mut self, assignment: &[GroupConfig], phases: Phases) -> Result<f64> {
        let mut total = 0.0;
        for s in self.samples {
            total += median_ms(self.warmup, self.runs, || {
                let t = Clock::start();
                train_step(self.net, self.weights, s, assignment, phases, &self.opts)?;
                Ok::<_, crate::Error>(t.elapsed_ms())
            })?;
        }
        Ok(total / self.samples.len() as f64)
    }

    /// Forward-pass traffic of the group's layers on the first sample.
    fn traffic(&self, group: usize, config: &DataflowConfig) -> u64 {
        self.shapes[group]
            .iter()
            .map(|s| {
                let t = traffic_model(s, config, T::PRECISION.elem_bytes());
                t.read_bytes + t.write_bytes
            })
            .sum()
    }
}
