//! Discrete-time LIF and SRM membrane dynamics.
//!
//! Both models expose a per-step update taking the current threshold from a
//! threshold policy. `last_v` always holds the step's pre-reset potential so
//! threshold policies can read membrane gradients unpolluted by resets.

use crate::error::{Error, Result};

/// Leaky integrate-and-fire parameters. Time constants are milliseconds;
/// potentials are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    pub tau_m: f64,
    pub e_l: f64,
    pub r_m: f64,
    pub v_reset: f64,
    pub t_ref: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_m: 10.0,
            e_l: 0.0,
            r_m: 1.0,
            v_reset: 0.0,
            t_ref: 2.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if self.tau_m <= 0.0 {
            return Err(Error::Config("tau_m must be positive".into()));
        }
        if self.t_ref < 0.0 {
            return Err(Error::Config("t_ref must be non-negative".into()));
        }
        // Explicit Euler accuracy bound.
        if dt > self.tau_m / 10.0 {
            return Err(Error::Config(format!(
                "dt = {dt} ms exceeds tau_m / 10 = {} ms",
                self.tau_m / 10.0
            )));
        }
        Ok(())
    }
}

/// Spike-response-model parameters: causal exponential kernels for the
/// synaptic response and the (negative) refractory potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrmParams {
    pub tau_eps: f64,
    pub tau_zeta: f64,
    pub zeta_amp: f64,
}

impl Default for SrmParams {
    fn default() -> Self {
        SrmParams {
            tau_eps: 5.0,
            tau_zeta: 10.0,
            zeta_amp: -2.0,
        }
    }
}

impl SrmParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau_eps <= 0.0 || self.tau_zeta <= 0.0 {
            return Err(Error::Config("SRM kernel time constants must be positive".into()));
        }
        if self.zeta_amp > 0.0 {
            return Err(Error::Config("zeta_amp must be non-positive".into()));
        }
        Ok(())
    }
}

/// Per-neuron dynamic state. LIF uses `v` and `refractory_remaining`; SRM
/// uses the two kernel traces with `v` as their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    /// Remaining refractory time, ms.
    pub refractory_remaining: f64,
    /// Pre-reset potential of the most recent step.
    pub last_v: f64,
    pub exc_trace: f64,
    pub ref_trace: f64,
}

impl NeuronState {
    pub fn new(v: f64) -> Self {
        NeuronState {
            v,
            refractory_remaining: 0.0,
            last_v: v,
            exc_trace: 0.0,
            ref_trace: 0.0,
        }
    }
}

/// One explicit-Euler LIF step.
///
/// During the refractory window the input is ignored and `v` is held at
/// `v_reset`. Otherwise `v += (dt / tau_m) * (-(v - e_l) + r_m * input)`,
/// spiking and resetting when the pre-reset potential reaches `theta`.
pub fn lif_step(
    state: &mut NeuronState,
    params: &LifParams,
    input: f64,
    theta: f64,
    dt: f64,
) -> Result<bool> {
    if !input.is_finite() {
        return Err(Error::NonFiniteInput { layer: 0, neuron: 0 });
    }
    if state.refractory_remaining > 0.0 {
        state.refractory_remaining = (state.refractory_remaining - dt).max(0.0);
        state.v = params.v_reset;
        state.last_v = params.v_reset;
        return Ok(false);
    }
    let u = state.v + (dt / params.tau_m) * (-(state.v - params.e_l) + params.r_m * input);
    state.last_v = u;
    let spiked = u >= theta;
    if spiked {
        state.v = params.v_reset;
        state.refractory_remaining = params.t_ref;
    } else {
        state.v = u;
    }
    Ok(spiked)
}

/// One SRM step over exponential trace accumulators.
///
/// The excitatory trace decays by `exp(-dt / tau_eps)` and collects the
/// summed weighted input spikes; the refractory trace decays by
/// `exp(-dt / tau_zeta)` and jumps by `zeta_amp` after an own spike, so the
/// hyperpolarization acts from the following step onward.
pub fn srm_step(
    state: &mut NeuronState,
    params: &SrmParams,
    weighted_input: f64,
    theta: f64,
    dt: f64,
) -> Result<bool> {
    if !weighted_input.is_finite() {
        return Err(Error::NonFiniteInput { layer: 0, neuron: 0 });
    }
    state.exc_trace = state.exc_trace * (-dt / params.tau_eps).exp() + weighted_input;
    state.ref_trace *= (-dt / params.tau_zeta).exp();
    let u = state.exc_trace + state.ref_trace;
    state.v = u;
    state.last_v = u;
    let spiked = u >= theta;
    if spiked {
        state.ref_trace += params.zeta_amp;
    }
    Ok(spiked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lif_at_rest_with_no_input_stays_put() {
        let p = LifParams::default();
        let mut s = NeuronState::new(p.e_l);
        let spiked = lif_step(&mut s, &p, 0.0, 1.0, 1.0).unwrap();
        assert!(!spiked);
        assert_eq!(s.v, p.e_l);
    }

    #[test]
    fn lif_one_step_euler_arithmetic() {
        // tau_m = 10, E_L = 0, R_m = 1, v = 0, I = 1, dt = 1
        // -> v = 0 + (1/10) * (0 + 1) = 0.1
        let p = LifParams::default();
        let mut s = NeuronState::new(0.0);
        let spiked = lif_step(&mut s, &p, 1.0, 1.0, 1.0).unwrap();
        assert!(!spiked);
        assert!((s.v - 0.1).abs() < 1e-15);
        assert!((s.last_v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn lif_crossing_resets_and_engages_refractory() {
        let p = LifParams::default();
        let mut s = NeuronState::new(0.99);
        let spiked = lif_step(&mut s, &p, 50.0, 1.0, 1.0).unwrap();
        assert!(spiked);
        assert_eq!(s.v, p.v_reset);
        assert_eq!(s.refractory_remaining, p.t_ref);
        // last_v keeps the pre-reset value.
        assert!(s.last_v > 1.0);

        // Held at reset while refractory, input ignored.
        let spiked = lif_step(&mut s, &p, 50.0, 1.0, 1.0).unwrap();
        assert!(!spiked);
        assert_eq!(s.v, p.v_reset);
        assert_eq!(s.refractory_remaining, 1.0);
    }

    #[test]
    fn lif_never_fires_twice_within_t_ref() {
        let p = LifParams::default();
        let dt = 1.0;
        let mut s = NeuronState::new(0.0);
        let mut spike_steps = Vec::new();
        for step in 0..200 {
            if lif_step(&mut s, &p, 30.0, 1.0, dt).unwrap() {
                spike_steps.push(step);
            }
        }
        assert!(spike_steps.len() >= 2);
        for w in spike_steps.windows(2) {
            assert!((w[1] - w[0]) as f64 * dt > p.t_ref);
        }
    }

    #[test]
    fn lif_step_is_deterministic() {
        let p = LifParams::default();
        let run = || {
            let mut s = NeuronState::new(0.3);
            let mut out = Vec::new();
            for i in 0..50 {
                let spiked = lif_step(&mut s, &p, (i % 7) as f64 * 0.4, 1.0, 1.0).unwrap();
                out.push((s.v.to_bits(), spiked));
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let p = LifParams::default();
        let mut s = NeuronState::new(0.0);
        assert!(lif_step(&mut s, &p, f64::NAN, 1.0, 1.0).is_err());
        assert!(srm_step(&mut s, &SrmParams::default(), f64::INFINITY, 1.0, 1.0).is_err());
    }

    proptest! {
        // Leak term drives v monotonically toward E_L from any start, and
        // never overshoots, for dt within the validated Euler bound.
        #[test]
        fn lif_leak_converges_monotonically(v0 in -20.0f64..20.0) {
            let p = LifParams { e_l: 0.7, ..Default::default() };
            prop_assume!((v0 - p.e_l).abs() > 1e-9);
            let mut s = NeuronState::new(v0);
            let mut dist = (v0 - p.e_l).abs();
            for _ in 0..500 {
                // Threshold far above any reachable potential: no spikes.
                lif_step(&mut s, &p, 0.0, 1e6, 1.0).unwrap();
                let d = (s.v - p.e_l).abs();
                prop_assert!(d <= dist + 1e-12);
                prop_assert!((s.v - p.e_l).signum() == (v0 - p.e_l).signum() || d < 1e-12);
                dist = d;
            }
            prop_assert!(dist < 1e-9 * (1.0 + v0.abs()));
        }
    }

    #[test]
    fn srm_silent_without_input() {
        let p = SrmParams::default();
        let mut s = NeuronState::new(0.0);
        for _ in 0..100 {
            let spiked = srm_step(&mut s, &p, 0.0, 1.0, 1.0).unwrap();
            assert!(!spiked);
            assert_eq!(s.v, 0.0);
        }
    }

    #[test]
    fn srm_trace_decays_as_closed_form_exponential() {
        let p = SrmParams {
            tau_eps: 5.0,
            ..Default::default()
        };
        let mut s = NeuronState::new(0.0);
        srm_step(&mut s, &p, 1.0, 10.0, 1.0).unwrap();
        assert!((s.v - 1.0).abs() < 1e-15);
        for k in 1..10 {
            srm_step(&mut s, &p, 0.0, 10.0, 1.0).unwrap();
            let expect = (-0.2 * k as f64).exp();
            assert!((s.v - expect).abs() < 1e-12, "step {k}: {} vs {expect}", s.v);
        }
    }

    #[test]
    fn srm_own_spike_hyperpolarizes_following_steps() {
        let p = SrmParams::default();
        let mut s = NeuronState::new(0.0);
        let spiked = srm_step(&mut s, &p, 1.5, 1.0, 1.0).unwrap();
        assert!(spiked);
        assert_eq!(s.ref_trace, p.zeta_amp);
        // Next step carries the decayed negative kernel.
        srm_step(&mut s, &p, 0.0, 1.0, 1.0).unwrap();
        let expect = 1.5 * (-0.2f64).exp() + p.zeta_amp * (-0.1f64).exp();
        assert!((s.v - expect).abs() < 1e-12);
        assert!(s.v < 1.5 * (-0.2f64).exp());
    }

    // Brute-force kernel convolution: the trace implementation must equal
    // summing eps(s) = exp(-s/tau_eps) H(s) over all past inputs plus
    // zeta(s) = zeta_amp exp(-s/tau_zeta) over all strictly-past own spikes.
    fn srm_convolution_oracle(
        inputs: &[f64],
        params: &SrmParams,
        theta: f64,
        dt: f64,
    ) -> (Vec<f64>, Vec<bool>) {
        let mut vs = Vec::new();
        let mut spikes: Vec<bool> = Vec::new();
        for t in 0..inputs.len() {
            let mut v = 0.0;
            for s in 0..=t {
                v += inputs[s] * (-((t - s) as f64) * dt / params.tau_eps).exp();
            }
            for f in 0..t {
                if spikes[f] {
                    v += params.zeta_amp * (-((t - f) as f64) * dt / params.tau_zeta).exp();
                }
            }
            vs.push(v);
            spikes.push(v >= theta);
        }
        (vs, spikes)
    }

    #[test]
    fn srm_traces_match_brute_force_convolution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let p = SrmParams::default();
        let dt = 1.0;
        let theta = 1.2;
        for _case in 0..20 {
            let inputs: Vec<f64> = (0..100)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        rng.gen_range(0.0..1.5)
                    } else {
                        0.0
                    }
                })
                .collect();
            let (oracle_v, oracle_spikes) = srm_convolution_oracle(&inputs, &p, theta, dt);
            let mut s = NeuronState::new(0.0);
            for (t, &inp) in inputs.iter().enumerate() {
                let spiked = srm_step(&mut s, &p, inp, theta, dt).unwrap();
                assert!(
                    (s.v - oracle_v[t]).abs() < 1e-9,
                    "step {t}: {} vs {}",
                    s.v,
                    oracle_v[t]
                );
                assert_eq!(spiked, oracle_spikes[t], "spike mismatch at {t}");
            }
        }
    }
}
