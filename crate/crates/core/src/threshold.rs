//! Per-neuron dynamic firing thresholds.
//!
//! The adaptive rule combines three signals once per step:
//!
//! * membrane gradient (MG) — scaled rate of change of the membrane
//!   potential, raising the threshold under input bursts;
//! * threshold retrospective gradient (TRG) — decayed windowed average of
//!   the threshold's own recent rate of change, damping runaway trends
//!   through its negative weight;
//! * spike efficiency (SE) — windowed output/input spike ratio, pushing an
//!   overactive neuron toward a harder-to-reach threshold.
//!
//! `theta(t+1) = clamp(theta(t) + k1*MG - k2*TRG + k3*SE)`. A fixed policy
//! and component-masked variants (masks zero the excluded weights) cover the
//! baselines and ablations.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Weights, time constants, and bounds of the adaptive threshold rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbnParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// MG scaling factor, must be below 1 so the threshold changes slower
    /// than the potential.
    pub eta: f64,
    /// TRG decay factor, in (0, 1).
    pub alpha: f64,
    /// Sliding-window length in steps for TRG and SE.
    pub window_n: usize,
    /// Step size in ms.
    pub dt: f64,
    pub theta_init: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for AbnParams {
    fn default() -> Self {
        AbnParams {
            k1: 0.25,
            k2: 0.5,
            k3: 0.25,
            eta: 0.5,
            alpha: 0.9,
            window_n: 10,
            dt: 1.0,
            theta_init: 1.0,
            theta_min: 0.05,
            theta_max: 10.0,
        }
    }
}

impl AbnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        if self.window_n == 0 {
            return Err(Error::Config("window_n must be at least 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.k1 < 0.0 || self.k2 < 0.0 || self.k3 < 0.0 {
            return Err(Error::Config("component weights must be non-negative".into()));
        }
        if !(self.theta_min <= self.theta_init && self.theta_init <= self.theta_max) {
            return Err(Error::Config(format!(
                "need theta_min <= theta_init <= theta_max, got [{}, {}, {}]",
                self.theta_min, self.theta_init, self.theta_max
            )));
        }
        Ok(())
    }
}

/// Per-neuron adaptive threshold state: the current and previous threshold
/// plus the sliding windows feeding TRG and SE.
#[derive(Debug, Clone, PartialEq)]
pub struct AbnState {
    pub theta: f64,
    pub prev_theta: f64,
    g_history: VecDeque<f64>,
    c_in_history: VecDeque<u32>,
    c_out_history: VecDeque<u32>,
}

impl AbnState {
    pub fn new(theta_init: f64) -> Self {
        AbnState {
            theta: theta_init,
            prev_theta: theta_init,
            g_history: VecDeque::new(),
            c_in_history: VecDeque::new(),
            c_out_history: VecDeque::new(),
        }
    }

    /// Newest-first threshold-rate samples.
    pub fn g_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.g_history.iter().copied()
    }

    fn push_counts(&mut self, c_in: u32, c_out: u32, window_n: usize) {
        self.c_in_history.push_front(c_in);
        self.c_in_history.truncate(window_n);
        self.c_out_history.push_front(c_out);
        self.c_out_history.truncate(window_n);
    }
}

/// Scaled finite-difference rate of change of the membrane potential.
pub fn membrane_gradient(v_now: f64, v_prev: f64, dt: f64, eta: f64) -> f64 {
    eta * (v_now - v_prev) / dt
}

/// Rate of change of the threshold between consecutive steps.
pub fn threshold_rate(theta_now: f64, theta_prev: f64, dt: f64) -> f64 {
    (theta_now - theta_prev) / dt
}

/// Decay-weighted window average of threshold rates, newest first. The
/// divisor is always `window_n`, also while the window is still filling.
pub fn trg(g_history: impl Iterator<Item = f64>, alpha: f64, window_n: usize) -> f64 {
    let mut acc = 0.0;
    let mut weight = 1.0;
    for (j, g) in g_history.enumerate() {
        if j >= window_n {
            break;
        }
        acc += weight * g;
        weight *= alpha;
    }
    acc / window_n as f64
}

/// Windowed output/input spike ratio; 0 when no input spikes arrived.
pub fn spike_efficiency<'a>(
    c_in_history: impl Iterator<Item = &'a u32>,
    c_out_history: impl Iterator<Item = &'a u32>,
) -> f64 {
    let c_in: u64 = c_in_history.map(|&c| c as u64).sum();
    let c_out: u64 = c_out_history.map(|&c| c as u64).sum();
    if c_in == 0 {
        0.0
    } else {
        c_out as f64 / c_in as f64
    }
}

/// Apply one threshold update from precomputed MG, TRG, and SE values.
///
/// The threshold is clamped to its bounds, and the rate sample pushed into
/// the history reflects the clamped value actually applied.
pub fn abn_update(state: &mut AbnState, params: &AbnParams, mg: f64, trg: f64, se: f64) -> Result<()> {
    let raw = state.theta + params.k1 * mg - params.k2 * trg + params.k3 * se;
    if !raw.is_finite() {
        return Err(Error::NonFiniteThreshold { neuron: 0 });
    }
    let old = state.theta;
    state.theta = raw.clamp(params.theta_min, params.theta_max);
    state.prev_theta = old;
    let g = threshold_rate(state.theta, old, params.dt);
    state.g_history.push_front(g);
    state.g_history.truncate(params.window_n);
    Ok(())
}

/// Which threshold rule a layer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Fixed,
    Abn,
    AbnMasked {
        use_mg: bool,
        use_trg: bool,
        use_se: bool,
    },
}

/// A resolved threshold policy: masked variants are realized by zeroing the
/// excluded component weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    kind: PolicyKind,
    params: AbnParams,
}

/// Per-neuron policy state.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyState {
    Fixed { theta: f64 },
    Abn(AbnState),
}

impl PolicyState {
    pub fn theta(&self) -> f64 {
        match self {
            PolicyState::Fixed { theta } => *theta,
            PolicyState::Abn(s) => s.theta,
        }
    }
}

pub fn make_policy(kind: PolicyKind, params: AbnParams) -> Result<ThresholdPolicy> {
    params.validate()?;
    let params = match kind {
        PolicyKind::Fixed | PolicyKind::Abn => params,
        PolicyKind::AbnMasked {
            use_mg,
            use_trg,
            use_se,
        } => {
            if !(use_mg || use_trg || use_se) {
                return Err(Error::Config(
                    "masked policy must enable at least one component".into(),
                ));
            }
            AbnParams {
                k1: if use_mg { params.k1 } else { 0.0 },
                k2: if use_trg { params.k2 } else { 0.0 },
                k3: if use_se { params.k3 } else { 0.0 },
                ..params
            }
        }
    };
    Ok(ThresholdPolicy { kind, params })
}

impl ThresholdPolicy {
    pub fn fixed(params: AbnParams) -> Result<Self> {
        make_policy(PolicyKind::Fixed, params)
    }

    pub fn abn(params: AbnParams) -> Result<Self> {
        make_policy(PolicyKind::Abn, params)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// Effective parameters after mask resolution.
    pub fn params(&self) -> &AbnParams {
        &self.params
    }

    pub fn init_state(&self) -> PolicyState {
        match self.kind {
            PolicyKind::Fixed => PolicyState::Fixed {
                theta: self.params.theta_init,
            },
            _ => PolicyState::Abn(AbnState::new(self.params.theta_init)),
        }
    }

    /// Per-step hook, run after the membrane step with that step's pre-reset
    /// potential and spike counts.
    pub fn step(
        &self,
        state: &mut PolicyState,
        v_pre_now: f64,
        v_pre_prev: f64,
        c_in: u32,
        c_out: u32,
    ) -> Result<()> {
        match state {
            PolicyState::Fixed { .. } => Ok(()),
            PolicyState::Abn(s) => {
                s.push_counts(c_in, c_out, self.params.window_n);
                let mg = membrane_gradient(v_pre_now, v_pre_prev, self.params.dt, self.params.eta);
                let trg_val = trg(s.g_history(), self.params.alpha, self.params.window_n);
                let se = spike_efficiency(s.c_in_history.iter(), s.c_out_history.iter());
                abn_update(s, &self.params, mg, trg_val, se)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn membrane_gradient_hand_arithmetic() {
        assert_eq!(membrane_gradient(0.4, 0.4, 1.0, 0.5), 0.0);
        assert!((membrane_gradient(0.5, 0.3, 1.0, 0.5) - 0.1).abs() < TOL);
        // Positive eta preserves the sign of the potential change.
        for (a, b) in [(0.9, 0.1), (0.1, 0.9), (-0.3, 0.2)] {
            let mg = membrane_gradient(a, b, 2.0, 0.7);
            assert_eq!(mg.signum(), (a - b).signum());
        }
    }

    #[test]
    fn threshold_rate_hand_arithmetic() {
        assert_eq!(threshold_rate(1.0, 1.0, 1.0), 0.0);
        assert!((threshold_rate(1.3, 1.2, 1.0) - 0.1).abs() < TOL);
        assert!((threshold_rate(1.2, 1.3, 1.0) + threshold_rate(1.3, 1.2, 1.0)).abs() < TOL);
    }

    #[test]
    fn trg_hand_arithmetic() {
        assert_eq!(trg([].into_iter(), 0.5, 3), 0.0);
        // (0.1 + 0.05 + 0.025) / 3
        let v = trg([0.1, 0.1, 0.1].into_iter(), 0.5, 3);
        assert!((v - 0.175 / 3.0).abs() < TOL);
        // Warm-up keeps the fixed divisor.
        let v = trg([0.3].into_iter(), 0.5, 3);
        assert!((v - 0.1).abs() < TOL);
    }

    #[test]
    fn trg_alpha_to_one_reduces_to_plain_mean() {
        let g = [0.2, -0.1, 0.4, 0.05, -0.3];
        let mean: f64 = g.iter().sum::<f64>() / g.len() as f64;
        let v = trg(g.iter().copied(), 1.0, g.len());
        assert!((v - mean).abs() < TOL);
    }

    #[test]
    fn spike_efficiency_hand_arithmetic() {
        let c_in = [4u32, 3, 3];
        let c_out = [2u32, 2, 1];
        assert!((spike_efficiency(c_in.iter(), c_out.iter()) - 0.5).abs() < TOL);
        let zeros = [0u32, 0];
        assert_eq!(spike_efficiency(zeros.iter(), [1u32, 2].iter()), 0.0);
        let same = [3u32, 1, 2];
        assert_eq!(spike_efficiency(same.iter(), same.iter()), 1.0);
    }

    #[test]
    fn abn_update_hand_arithmetic() {
        let params = AbnParams::default();
        let mut s = AbnState::new(1.0);
        abn_update(&mut s, &params, 0.2, 0.1, 0.5).unwrap();
        // 1.0 + 0.25*0.2 - 0.5*0.1 + 0.25*0.5 = 1.125
        assert!((s.theta - 1.125).abs() < TOL);
        assert_eq!(s.prev_theta, 1.0);
        assert!((s.g_history().next().unwrap() - 0.125).abs() < TOL);
    }

    #[test]
    fn zero_weights_freeze_threshold() {
        let params = AbnParams {
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            ..Default::default()
        };
        let mut s = AbnState::new(1.0);
        for i in 0..50 {
            abn_update(&mut s, &params, i as f64, -(i as f64), 0.3).unwrap();
            assert_eq!(s.theta, 1.0);
        }
    }

    #[test]
    fn zero_components_leave_threshold_unchanged() {
        let params = AbnParams::default();
        let mut s = AbnState::new(1.3);
        abn_update(&mut s, &params, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(s.theta, 1.3);
    }

    #[test]
    fn non_finite_update_is_an_error() {
        let params = AbnParams::default();
        let mut s = AbnState::new(1.0);
        assert!(abn_update(&mut s, &params, f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn sustained_positive_rate_history_gives_positive_trg() {
        // A historical trend of rapid threshold increases must push the
        // -k2 * TRG term negative.
        let g = [0.2, 0.15, 0.3, 0.25];
        assert!(trg(g.iter().copied(), 0.9, 10) > 0.0);
    }

    #[test]
    fn se_monotone_in_output_counts() {
        let c_in = [5u32, 5, 5];
        let low = [1u32, 0, 1];
        let high = [2u32, 1, 1];
        assert!(
            spike_efficiency(c_in.iter(), high.iter())
                > spike_efficiency(c_in.iter(), low.iter())
        );
    }

    #[test]
    fn masked_single_component_equals_zeroed_weights() {
        let base = AbnParams::default();
        let masked = make_policy(
            PolicyKind::AbnMasked {
                use_mg: true,
                use_trg: false,
                use_se: false,
            },
            base,
        )
        .unwrap();
        let manual = make_policy(
            PolicyKind::Abn,
            AbnParams {
                k2: 0.0,
                k3: 0.0,
                ..base
            },
        )
        .unwrap();
        let mut a = masked.init_state();
        let mut b = manual.init_state();
        for i in 0..200u32 {
            let v_now = (i as f64 * 0.37).sin();
            let v_prev = ((i as f64 - 1.0) * 0.37).sin();
            masked.step(&mut a, v_now, v_prev, i % 5, i % 3).unwrap();
            manual.step(&mut b, v_now, v_prev, i % 5, i % 3).unwrap();
            assert_eq!(a.theta().to_bits(), b.theta().to_bits());
        }
    }

    #[test]
    fn fixed_policy_is_constant() {
        let policy = ThresholdPolicy::fixed(AbnParams::default()).unwrap();
        let mut s = policy.init_state();
        for i in 0..100 {
            policy.step(&mut s, i as f64, 0.0, 10, 10).unwrap();
            assert_eq!(s.theta(), 1.0);
        }
    }

    #[test]
    fn all_components_disabled_is_an_error() {
        let r = make_policy(
            PolicyKind::AbnMasked {
                use_mg: false,
                use_trg: false,
                use_se: false,
            },
            AbnParams::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn replay_reproduces_theta_trace_bitwise() {
        let policy = ThresholdPolicy::abn(AbnParams::default()).unwrap();
        let run = || {
            let mut s = policy.init_state();
            let mut trace = Vec::new();
            for i in 0..500u32 {
                let v = ((i * 7919) % 100) as f64 / 25.0;
                let vp = ((i * 104729) % 100) as f64 / 25.0;
                policy.step(&mut s, v, vp, i % 9, i % 2).unwrap();
                trace.push(s.theta().to_bits());
            }
            trace
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn theta_stays_within_bounds(
            updates in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0), 1..200)
        ) {
            let params = AbnParams { theta_min: 0.5, theta_max: 2.0, theta_init: 1.0, ..Default::default() };
            let mut s = AbnState::new(params.theta_init);
            for (mg, trg_v, se) in updates {
                abn_update(&mut s, &params, mg, trg_v, se).unwrap();
                prop_assert!(s.theta >= params.theta_min && s.theta <= params.theta_max);
            }
        }

        // Holding TRG and SE fixed, a larger MG never yields a smaller
        // next threshold.
        #[test]
        fn monotone_response_in_mg(
            mg_lo in -2.0f64..2.0,
            bump in 0.0f64..2.0,
            trg_v in -1.0f64..1.0,
            se in 0.0f64..1.0,
            theta0 in 0.5f64..2.0,
        ) {
            let params = AbnParams::default();
            let mut a = AbnState::new(theta0);
            let mut b = AbnState::new(theta0);
            abn_update(&mut a, &params, mg_lo, trg_v, se).unwrap();
            abn_update(&mut b, &params, mg_lo + bump, trg_v, se).unwrap();
            prop_assert!(b.theta >= a.theta - 1e-15);
        }
    }
}
