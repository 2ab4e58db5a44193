//! Surrogate-gradient training through the time-unrolled network.
//!
//! The forward pass runs the ordinary spiking dynamics; the backward pass
//! replaces the spike indicator's derivative with a rectangular window of
//! `surrogate_width` around the threshold. Thresholds are constants in the
//! backward pass: no gradient flows through the adaptive update or its
//! sliding windows. The reset path is differentiated, so in smooth spike
//! mode the analytic gradients match finite differences of the forward
//! loss exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::SpikeRaster;
use crate::network::{
    surrogate_derivative, ForwardCache, ForwardOpts, Network, NeuronModel, Readout, SpikeMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Softmax cross-entropy over per-neuron output rates.
    CrossEntropyOnRates,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub surrogate_width: f64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            epochs: 30,
            batch_size: 16,
            surrogate_width: 1.0,
            loss: Loss::CrossEntropyOnRates,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        if self.surrogate_width <= 0.0 {
            return Err(Error::Config("surrogate width must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-layer weight gradients, same layout as `Layer::weights`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    pub loss: f64,
    pub correct: bool,
    pub grads: Gradients,
}

/// Forward-only loss of one sample (used by finite-difference checks).
pub fn sample_loss(
    net: &Network,
    raster: &SpikeRaster,
    label: u32,
    opts: &ForwardOpts,
) -> Result<f64> {
    let out = net.forward(raster, opts)?;
    let rates: Vec<f64> = out
        .class_scores
        .iter()
        .map(|s| s / net.num_steps as f64)
        .collect();
    let probs = softmax(&rates);
    Ok(-probs[label as usize].max(f64::MIN_POSITIVE).ln())
}

/// Run forward with caching and backpropagate through time, returning the
/// sample loss and weight gradients.
pub fn sample_grads(
    net: &Network,
    raster: &SpikeRaster,
    label: u32,
    opts: &ForwardOpts,
) -> Result<SampleResult> {
    if label as usize >= net.output_size() {
        return Err(Error::Config(format!(
            "label {label} outside {} classes",
            net.output_size()
        )));
    }
    let mut cache = ForwardCache::for_network(net);
    let out = net.run(raster, opts, Some(&mut cache))?;
    let num_steps = net.num_steps;
    let rates: Vec<f64> = out
        .class_scores
        .iter()
        .map(|s| s / num_steps as f64)
        .collect();
    let probs = softmax(&rates);
    let loss = -probs[label as usize].max(f64::MIN_POSITIVE).ln();
    let correct = crate::network::predict(&out.class_scores) == label;

    // d loss / d score_k, for score = sum over steps (rate = score / T).
    let dscore: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let y = if k as u32 == label { 1.0 } else { 0.0 };
            (p - y) / num_steps as f64
        })
        .collect();

    let num_layers = net.layers.len();
    let mut grads = Gradients::zeros_like(net);

    // Carried adjoints between steps, per layer per neuron.
    let mut dv_carry: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.spec.out_size]).collect();
    let mut dc_carry: Vec<Vec<f64>> = dv_carry.clone();
    let mut de_carry: Vec<Vec<f64>> = dv_carry.clone();
    let mut dr_carry: Vec<Vec<f64>> = dv_carry.clone();
    // Within-step spike adjoints handed down from the next layer.
    let mut ds_ext: Vec<Vec<f64>> = dv_carry.clone();
    // Scratch: d loss / d drive for the layer being processed.
    let mut dd: Vec<Vec<f64>> = dv_carry.clone();

    let width = opts.surrogate_width;
    let dt = net.dt_ms;
    let lambda1 = (-dt / net.tau1_ms).exp();

    for t in (0..num_steps).rev() {
        for l in (0..num_layers).rev() {
            let layer = &net.layers[l];
            let out_size = layer.spec.out_size;
            let in_size = layer.spec.in_size;
            let last = l == num_layers - 1;

            for j in 0..out_size {
                let idx = t * out_size + j;
                let s = cache.s[l][idx];
                let u = cache.u[l][idx];
                let theta = cache.theta[l][idx];
                let mut ds = ds_ext[l][j];
                if last && net.readout == Readout::SpikeCount {
                    ds += dscore[j];
                }
                match &layer.spec.model {
                    NeuronModel::Lif(p) => {
                        if cache.refractory[l][idx] {
                            // v held at reset: nothing flows through u or v,
                            // but the synaptic trace still decays.
                            dd[l][j] = lambda1 * dc_carry[l][j];
                            dc_carry[l][j] = dd[l][j];
                            dv_carry[l][j] = 0.0;
                        } else {
                            let mut dv = dv_carry[l][j];
                            if last && net.readout == Readout::MembraneIntegral {
                                dv += dscore[j];
                            }
                            // v = u - s * (u - v_reset)
                            let ds_total = ds + dv * (p.v_reset - u);
                            let g = surrogate_derivative(u - theta, width);
                            let du = dv * (1.0 - s) + ds_total * g;
                            let gamma = dt / p.tau_m;
                            let dc = lambda1 * dc_carry[l][j] + gamma * p.r_m * du;
                            dd[l][j] = dc;
                            dc_carry[l][j] = dc;
                            dv_carry[l][j] = (1.0 - gamma) * du;
                        }
                    }
                    NeuronModel::Srm(p) => {
                        let lambda_eps = (-dt / p.tau_eps).exp();
                        let lambda_zeta = (-dt / p.tau_zeta).exp();
                        // The own-spike jump reaches the next step's
                        // refractory value through one decay factor.
                        let ds_total = ds + p.zeta_amp * lambda_zeta * dr_carry[l][j];
                        let g = surrogate_derivative(u - theta, width);
                        let mut du = ds_total * g;
                        if last && net.readout == Readout::MembraneIntegral {
                            du += dscore[j];
                        }
                        let de = du + lambda_eps * de_carry[l][j];
                        let dr = du + lambda_zeta * dr_carry[l][j];
                        dd[l][j] = de;
                        de_carry[l][j] = de;
                        dr_carry[l][j] = dr;
                    }
                }
            }

            // Weight gradients and upstream spike adjoints.
            if l > 0 {
                ds_ext[l - 1].iter_mut().for_each(|x| *x = 0.0);
            }
            if l == 0 {
                if t < raster.num_steps {
                    for i in raster.neurons_at(t) {
                        let row = &mut grads.layers[0][i as usize * out_size..][..out_size];
                        for (gw, d) in row.iter_mut().zip(&dd[0]) {
                            *gw += d;
                        }
                    }
                }
            } else {
                let prev_out = in_size;
                for i in 0..prev_out {
                    let s_pre = cache.s[l - 1][t * prev_out + i];
                    let w_row = &layer.weights[i * out_size..][..out_size];
                    let mut acc = 0.0;
                    for (j, (w, d)) in w_row.iter().zip(&dd[l]).enumerate() {
                        acc += w * d;
                        if s_pre != 0.0 {
                            grads.layers[l][i * out_size + j] += d * s_pre;
                        }
                    }
                    ds_ext[l - 1][i] = acc;
                }
            }
        }
    }

    Ok(SampleResult {
        loss,
        correct,
        grads,
    })
}

/// One pass over the dataset: per-batch gradient means applied by plain
/// gradient descent. Sample order is the dataset order; gradients are
/// reduced in that order, so results do not depend on worker count.
pub fn train_epoch(
    net: &mut Network,
    dataset: &[(SpikeRaster, u32)],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let opts = ForwardOpts {
        mode: SpikeMode::Hard,
        surrogate_width: cfg.surrogate_width,
        ..Default::default()
    };
    let mut total_loss = 0.0;
    let mut total_correct = 0usize;
    for (batch_idx, batch) in dataset.chunks(cfg.batch_size).enumerate() {
        let results: Vec<Result<SampleResult>> = batch
            .par_iter()
            .map(|(raster, label)| sample_grads(net, raster, *label, &opts))
            .collect();
        let mut batch_grads = Gradients::zeros_like(net);
        for res in results {
            let res = res?;
            if !res.loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            total_loss += res.loss;
            total_correct += res.correct as usize;
            batch_grads.add_assign(&res.grads);
        }
        let scale = cfg.learning_rate / batch.len() as f64;
        for (layer, grad) in net.layers.iter_mut().zip(&batch_grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(grad) {
                *w -= scale * g;
            }
        }
    }
    Ok((
        total_loss / dataset.len() as f64,
        total_correct as f64 / dataset.len() as f64,
    ))
}
