//! Fully connected spiking MLP over discrete time.
//!
//! Layers propagate within a step: layer `l` consumes the spikes layer
//! `l - 1` emitted in the same step, with the input raster driving layer 0.
//! Each simulated neuron runs its membrane step against the threshold its
//! policy currently holds, then the policy updates from that step's
//! pre-reset potential and spike counts.
//!
//! LIF layers receive input through a synaptic current trace decaying with
//! `tau1` between steps; SRM layers feed weighted spikes straight into
//! their response kernel.

pub mod checkpoint;
pub mod train;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::SpikeRaster;
use crate::neuron::{lif_step, srm_step, LifParams, NeuronState, SrmParams};
use crate::threshold::{PolicyState, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronModel {
    Lif(LifParams),
    Srm(SrmParams),
}

/// One fully connected layer: `in_size` presynaptic sources feeding
/// `out_size` simulated neurons.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub in_size: usize,
    pub out_size: usize,
    pub model: NeuronModel,
    pub policy: ThresholdPolicy,
}

/// How class scores are read from the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Total output spikes per neuron.
    SpikeCount,
    /// Sum of output membrane potentials per neuron.
    MembraneIntegral,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub layers: Vec<LayerSpec>,
    /// Simulation step, ms.
    pub dt_ms: f64,
    pub num_steps: usize,
    pub readout: Readout,
    /// Synaptic current trace decay constant, ms.
    pub tau1_ms: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if self.dt_ms <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.num_steps == 0 {
            return Err(Error::Config("num_steps must be positive".into()));
        }
        if self.tau1_ms <= 0.0 {
            return Err(Error::Config("tau1 must be positive".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_size != pair[1].in_size {
                return Err(Error::Shape(format!(
                    "layer {} emits {} but layer {} expects {}",
                    i,
                    pair[0].out_size,
                    i + 1,
                    pair[1].in_size
                )));
            }
        }
        for (i, spec) in self.layers.iter().enumerate() {
            if spec.in_size == 0 || spec.out_size == 0 {
                return Err(Error::Shape(format!("layer {i} has a zero dimension")));
            }
            match &spec.model {
                NeuronModel::Lif(p) => p.validate(self.dt_ms).map_err(|e| {
                    Error::Config(format!("layer {i}: {e}"))
                })?,
                NeuronModel::Srm(p) => p.validate()?,
            }
        }
        Ok(())
    }
}

/// A layer with materialized weights, row-major `[in][out]`.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub dt_ms: f64,
    pub num_steps: usize,
    pub readout: Readout,
    pub tau1_ms: f64,
    pub seed: u64,
}

/// Draw initial weights from a zero-mean uniform distribution scaled by
/// `1 / sqrt(in_size)`, deterministically from the seed.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = config
        .layers
        .iter()
        .map(|spec| {
            let scale = 1.0 / (spec.in_size as f64).sqrt();
            let weights = (0..spec.in_size * spec.out_size)
                .map(|_| rng.gen_range(-scale..scale))
                .collect();
            Layer {
                spec: spec.clone(),
                weights,
            }
        })
        .collect();
    Ok(Network {
        layers,
        dt_ms: config.dt_ms,
        num_steps: config.num_steps,
        readout: config.readout,
        tau1_ms: config.tau1_ms,
        seed,
    })
}

/// Whether spikes are emitted as hard indicators or as their smooth
/// surrogate ramp (verification mode for gradient checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Hard,
    Smooth,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOpts {
    pub mode: SpikeMode,
    /// Width of the rectangular surrogate window (also the smooth ramp).
    pub surrogate_width: f64,
    pub record_theta: bool,
    pub record_trains: bool,
}

impl Default for ForwardOpts {
    fn default() -> Self {
        ForwardOpts {
            mode: SpikeMode::Hard,
            surrogate_width: 1.0,
            record_theta: false,
            record_trains: false,
        }
    }
}

/// Per-run activity record, sufficient for firing statistics and synaptic
/// operation counts without re-simulation.
#[derive(Debug, Clone)]
pub struct Telemetry {
    pub num_steps: usize,
    /// Simulated layer widths.
    pub layer_sizes: Vec<usize>,
    /// Presynaptic spike count entering each layer, `[layer][step]`.
    pub presyn_spikes: Vec<Vec<u32>>,
    /// Output spike count of each layer, `[layer][step]`.
    pub layer_out_spikes: Vec<Vec<u32>>,
    /// Total output spikes per neuron, `[layer][neuron]`.
    pub out_counts: Vec<Vec<u32>>,
    /// Spike-driven accumulate operations counted during the run.
    pub ac_count: u64,
    /// Dense multiply-accumulate operations (readout stage).
    pub mac_count: u64,
    /// Threshold traces `[layer][step][neuron]`, when recorded.
    pub theta_traces: Option<Vec<Vec<Vec<f64>>>>,
    /// Raw spike trains `[layer][step] -> spiking neuron ids`, when recorded.
    pub spike_trains: Option<Vec<Vec<Vec<u32>>>>,
}

impl Telemetry {
    /// All simulated neurons' spike totals, concatenated across layers.
    pub fn flat_out_counts(&self) -> Vec<u32> {
        self.out_counts.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Raw readout sums per output neuron (spike counts or potential sums).
    pub class_scores: Vec<f64>,
    pub telemetry: Telemetry,
}

/// Step-level cache of everything the backward pass reads.
#[derive(Debug, Clone, Default)]
pub(crate) struct ForwardCache {
    /// Pre-reset potentials `[layer][step * out + j]`.
    pub u: Vec<Vec<f64>>,
    /// Spike values (0/1 hard, fractional smooth).
    pub s: Vec<Vec<f64>>,
    /// Thresholds seen by each neuron step.
    pub theta: Vec<Vec<f64>>,
    /// Steps where the neuron was refractory (input blocked).
    pub refractory: Vec<Vec<bool>>,
}

impl ForwardCache {
    fn for_network(net: &Network) -> Self {
        let alloc = |fill: f64| {
            net.layers
                .iter()
                .map(|l| vec![fill; l.spec.out_size * net.num_steps])
                .collect::<Vec<_>>()
        };
        ForwardCache {
            u: alloc(0.0),
            s: alloc(0.0),
            theta: alloc(0.0),
            refractory: net
                .layers
                .iter()
                .map(|l| vec![false; l.spec.out_size * net.num_steps])
                .collect(),
        }
    }
}

/// Mutable per-layer simulation state for one sample.
struct LayerState {
    neurons: Vec<NeuronState>,
    policy: Vec<PolicyState>,
    syn_trace: Vec<f64>,
}

pub(crate) fn surrogate_derivative(x: f64, width: f64) -> f64 {
    if x.abs() <= width / 2.0 {
        1.0 / width
    } else {
        0.0
    }
}

fn smooth_spike(x: f64, width: f64) -> f64 {
    (x / width + 0.5).clamp(0.0, 1.0)
}

impl Network {
    pub fn input_size(&self) -> usize {
        self.layers[0].spec.in_size
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().spec.out_size
    }

    fn fresh_states(&self) -> Vec<LayerState> {
        self.layers
            .iter()
            .map(|layer| {
                let v0 = match &layer.spec.model {
                    NeuronModel::Lif(p) => p.e_l,
                    NeuronModel::Srm(_) => 0.0,
                };
                LayerState {
                    neurons: vec![NeuronState::new(v0); layer.spec.out_size],
                    policy: (0..layer.spec.out_size)
                        .map(|_| layer.spec.policy.init_state())
                        .collect(),
                    syn_trace: vec![0.0; layer.spec.out_size],
                }
            })
            .collect()
    }

    fn validate_forward(&self, raster: &SpikeRaster, opts: &ForwardOpts) -> Result<()> {
        if raster.num_neurons != self.input_size() {
            return Err(Error::Shape(format!(
                "layer 0 expects {} inputs, raster has {}",
                self.input_size(),
                raster.num_neurons
            )));
        }
        if opts.surrogate_width <= 0.0 {
            return Err(Error::Config("surrogate width must be positive".into()));
        }
        if opts.mode == SpikeMode::Smooth {
            for (i, layer) in self.layers.iter().enumerate() {
                if layer.spec.policy.kind() != crate::threshold::PolicyKind::Fixed {
                    return Err(Error::Config(format!(
                        "smooth spike mode requires a fixed threshold policy (layer {i})"
                    )));
                }
                if let NeuronModel::Lif(p) = &layer.spec.model {
                    if p.t_ref != 0.0 {
                        return Err(Error::Config(format!(
                            "smooth spike mode requires t_ref = 0 (layer {i})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Simulate one sample, producing readout scores and telemetry.
    pub fn forward(&self, raster: &SpikeRaster, opts: &ForwardOpts) -> Result<ForwardOutput> {
        self.run(raster, opts, None)
    }

    pub(crate) fn run(
        &self,
        raster: &SpikeRaster,
        opts: &ForwardOpts,
        mut cache: Option<&mut ForwardCache>,
    ) -> Result<ForwardOutput> {
        self.validate_forward(raster, opts)?;
        let num_layers = self.layers.len();
        let mut states = self.fresh_states();

        let mut telemetry = Telemetry {
            num_steps: self.num_steps,
            layer_sizes: self.layers.iter().map(|l| l.spec.out_size).collect(),
            presyn_spikes: self
                .layers
                .iter()
                .map(|_| vec![0; self.num_steps])
                .collect(),
            layer_out_spikes: self
                .layers
                .iter()
                .map(|_| vec![0; self.num_steps])
                .collect(),
            out_counts: self
                .layers
                .iter()
                .map(|l| vec![0; l.spec.out_size])
                .collect(),
            ac_count: 0,
            mac_count: 0,
            theta_traces: opts.record_theta.then(|| {
                self.layers
                    .iter()
                    .map(|l| vec![vec![0.0; l.spec.out_size]; self.num_steps])
                    .collect()
            }),
            spike_trains: opts
                .record_trains
                .then(|| vec![vec![Vec::new(); self.num_steps]; num_layers]),
        };

        let mut scores = vec![0.0; self.output_size()];
        // Scratch buffers reused across steps.
        let mut drives: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.spec.out_size])
            .collect();
        let mut sparse_out: Vec<Vec<u32>> = vec![Vec::new(); num_layers];
        let mut dense_out: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.spec.out_size])
            .collect();

        for t in 0..self.num_steps {
            let input_ids = if t < raster.num_steps {
                raster.neurons_at(t)
            } else {
                Vec::new()
            };
            for l in 0..num_layers {
                let layer = &self.layers[l];
                let (in_size, out_size) = (layer.spec.in_size, layer.spec.out_size);

                // Synaptic drive: weighted sum of presynaptic spikes.
                let drive = &mut drives[l];
                drive.iter_mut().for_each(|d| *d = 0.0);
                let presyn_count: u32;
                match opts.mode {
                    SpikeMode::Hard => {
                        let ids: &[u32] = if l == 0 {
                            &input_ids
                        } else {
                            &sparse_out[l - 1]
                        };
                        presyn_count = ids.len() as u32;
                        for &i in ids {
                            let row = &layer.weights[i as usize * out_size..][..out_size];
                            for (d, w) in drive.iter_mut().zip(row) {
                                *d += w;
                            }
                        }
                    }
                    SpikeMode::Smooth => {
                        let dense_input: Vec<f64>;
                        let values: &[f64] = if l == 0 {
                            let mut v = vec![0.0; in_size];
                            for &i in &input_ids {
                                v[i as usize] = 1.0;
                            }
                            dense_input = v;
                            &dense_input
                        } else {
                            &dense_out[l - 1]
                        };
                        presyn_count = values.iter().filter(|&&v| v > 0.0).count() as u32;
                        for (i, &x) in values.iter().enumerate() {
                            if x != 0.0 {
                                let row = &layer.weights[i * out_size..][..out_size];
                                for (d, w) in drive.iter_mut().zip(row) {
                                    *d += w * x;
                                }
                            }
                        }
                    }
                }
                telemetry.presyn_spikes[l][t] = presyn_count;
                telemetry.ac_count += presyn_count as u64 * out_size as u64;

                // Neuron updates.
                sparse_out[l].clear();
                let st = &mut states[l];
                for j in 0..out_size {
                    let theta = st.policy[j].theta();
                    let v_prev_pre = st.neurons[j].last_v;
                    let (u, s_val, was_refractory) = match (&layer.spec.model, opts.mode) {
                        (NeuronModel::Lif(p), SpikeMode::Hard) => {
                            let was_ref = st.neurons[j].refractory_remaining > 0.0;
                            st.syn_trace[j] =
                                st.syn_trace[j] * (-self.dt_ms / self.tau1_ms).exp() + drive[j];
                            let spiked =
                                lif_step(&mut st.neurons[j], p, st.syn_trace[j], theta, self.dt_ms)
                                    .map_err(|_| Error::NonFiniteInput { layer: l, neuron: j })?;
                            (st.neurons[j].last_v, spiked as u8 as f64, was_ref)
                        }
                        (NeuronModel::Lif(p), SpikeMode::Smooth) => {
                            st.syn_trace[j] =
                                st.syn_trace[j] * (-self.dt_ms / self.tau1_ms).exp() + drive[j];
                            let ns = &mut st.neurons[j];
                            let gamma = self.dt_ms / p.tau_m;
                            let u = ns.v + gamma * (-(ns.v - p.e_l) + p.r_m * st.syn_trace[j]);
                            let s = smooth_spike(u - theta, opts.surrogate_width);
                            ns.v = u - s * (u - p.v_reset);
                            ns.last_v = u;
                            (u, s, false)
                        }
                        (NeuronModel::Srm(p), SpikeMode::Hard) => {
                            let spiked =
                                srm_step(&mut st.neurons[j], p, drive[j], theta, self.dt_ms)
                                    .map_err(|_| Error::NonFiniteInput { layer: l, neuron: j })?;
                            (st.neurons[j].last_v, spiked as u8 as f64, false)
                        }
                        (NeuronModel::Srm(p), SpikeMode::Smooth) => {
                            let ns = &mut st.neurons[j];
                            ns.exc_trace =
                                ns.exc_trace * (-self.dt_ms / p.tau_eps).exp() + drive[j];
                            ns.ref_trace *= (-self.dt_ms / p.tau_zeta).exp();
                            let u = ns.exc_trace + ns.ref_trace;
                            let s = smooth_spike(u - theta, opts.surrogate_width);
                            ns.ref_trace += p.zeta_amp * s;
                            ns.v = u;
                            ns.last_v = u;
                            (u, s, false)
                        }
                    };
                    if !u.is_finite() {
                        return Err(Error::NonFiniteInput { layer: l, neuron: j });
                    }
                    if let Some(cache) = cache.as_deref_mut() {
                        let idx = t * out_size + j;
                        cache.u[l][idx] = u;
                        cache.s[l][idx] = s_val;
                        cache.theta[l][idx] = theta;
                        cache.refractory[l][idx] = was_refractory;
                    }
                    let spiked_hard = opts.mode == SpikeMode::Hard && s_val == 1.0;
                    if spiked_hard {
                        sparse_out[l].push(j as u32);
                        telemetry.out_counts[l][j] += 1;
                    }
                    if opts.mode == SpikeMode::Smooth {
                        dense_out[l][j] = s_val;
                    }
                    // Threshold update from this step's pre-reset potential.
                    layer
                        .spec
                        .policy
                        .step(
                            &mut st.policy[j],
                            st.neurons[j].last_v,
                            v_prev_pre,
                            presyn_count,
                            spiked_hard as u32,
                        )
                        .map_err(|_| Error::NonFiniteThreshold { neuron: j })?;
                    if let Some(traces) = telemetry.theta_traces.as_mut() {
                        traces[l][t][j] = st.policy[j].theta();
                    }
                    if l == num_layers - 1 {
                        match self.readout {
                            Readout::SpikeCount => scores[j] += s_val,
                            Readout::MembraneIntegral => scores[j] += st.neurons[j].v,
                        }
                    }
                }
                telemetry.layer_out_spikes[l][t] = sparse_out[l].len() as u32;
                if let Some(trains) = telemetry.spike_trains.as_mut() {
                    trains[l][t] = sparse_out[l].clone();
                }
            }
        }

        // Readout argmax is the one dense arithmetic stage.
        telemetry.mac_count += self.output_size() as u64;
        if self.readout == Readout::MembraneIntegral {
            telemetry.mac_count += self.output_size() as u64 * self.num_steps as u64;
        }

        Ok(ForwardOutput {
            class_scores: scores,
            telemetry,
        })
    }
}

/// Argmax with ties broken by the lowest class index.
pub fn predict(scores: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best as u32
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub accuracy: f64,
    pub predictions: Vec<u32>,
    pub telemetries: Vec<Telemetry>,
}

/// Evaluate a labeled dataset; telemetry is collected per sample in dataset
/// order regardless of worker scheduling.
pub fn evaluate(
    net: &Network,
    dataset: &[(SpikeRaster, u32)],
    opts: &ForwardOpts,
) -> Result<EvalResult> {
    use rayon::prelude::*;
    let outputs: Vec<Result<ForwardOutput>> = dataset
        .par_iter()
        .map(|(raster, _)| net.forward(raster, opts))
        .collect();
    let mut predictions = Vec::with_capacity(dataset.len());
    let mut telemetries = Vec::with_capacity(dataset.len());
    let mut correct = 0usize;
    for (out, (_, label)) in outputs.into_iter().zip(dataset) {
        let out = out?;
        let pred = predict(&out.class_scores);
        if pred == *label {
            correct += 1;
        }
        predictions.push(pred);
        telemetries.push(out.telemetry);
    }
    let accuracy = if dataset.is_empty() {
        0.0
    } else {
        correct as f64 / dataset.len() as f64
    };
    Ok(EvalResult {
        accuracy,
        predictions,
        telemetries,
    })
}
