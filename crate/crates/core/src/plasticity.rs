//! STDP with an alpha-shaped timing kernel and a per-neuron learning rate
//! that decays with the neuron's lifetime spike count.
//!
//! Every post-synaptic spike of neuron `k` moves each incoming weight by
//! `eta_k * (alpha(t_diff) * c * exp(-w) - 1)`. Inputs without a recent
//! pre-synaptic spike get `alpha = 0` and are depressed by `eta_k`.

use crate::circuit::{WeightDomain, WeightMatrix};
use crate::error::{Result, WtaError};

#[derive(Clone, Debug, PartialEq)]
pub struct StdpParams {
    /// Fast time constant, in timesteps.
    pub tau_fast: f64,
    /// Slow time constant, in timesteps.
    pub tau_slow: f64,
    pub c: f64,
    /// Width of the log-weight domain below `ln c`.
    pub weight_range: f64,
    /// Exponent of the adaptive learning rate `N^-exponent`.
    pub rate_exponent: f64,
    /// Largest `t_diff` with a non-zero kernel, in timesteps.
    pub window: u64,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            tau_fast: 2.0,
            tau_slow: 8.0,
            c: crate::circuit::DEFAULT_C,
            weight_range: crate::circuit::DEFAULT_WEIGHT_RANGE,
            rate_exponent: 0.8,
            window: 40,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_fast > 0.0 && self.tau_slow > 0.0) || self.tau_fast == self.tau_slow {
            return Err(WtaError::config("STDP time constants must be positive and distinct"));
        }
        if (self.window as f64) < self.tau_slow {
            return Err(WtaError::config("STDP window must be at least tau_slow"));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(WtaError::config("c must lie in (0, 1)"));
        }
        if !(self.weight_range > 0.0 && self.weight_range.is_finite()) {
            return Err(WtaError::config("weight_range must be positive"));
        }
        if !(self.rate_exponent > 0.0) {
            return Err(WtaError::config("learning-rate exponent must be positive"));
        }
        Ok(())
    }

    pub fn domain(&self) -> WeightDomain {
        WeightDomain::new(self.c, self.weight_range)
    }
}

/// Alpha kernel; zero for `t_diff <= 0` and beyond the window.
pub fn alpha_kernel(t_diff: i64, params: &StdpParams) -> f64 {
    if t_diff <= 0 || t_diff as u64 > params.window {
        return 0.0;
    }
    let t = t_diff as f64;
    ((-t / params.tau_fast).exp() - (-t / params.tau_slow).exp()) / (params.tau_fast - params.tau_slow)
}

/// One STDP step for a single synapse. `t_diff = None` means no pre-synaptic
/// spike since the last reset.
pub fn stdp_update(w: f64, t_diff: Option<i64>, eta: f64, params: &StdpParams) -> f64 {
    let alpha = t_diff.map_or(0.0, |d| alpha_kernel(d, params));
    let delta = if alpha > 0.0 {
        alpha * params.c * (-w).exp() - 1.0
    } else {
        -1.0
    };
    params.domain().clamp(w + eta * delta)
}

/// `eta = N^-exponent`. The count includes the spike that triggers the update.
pub fn learning_rate(spike_count: u64, params: &StdpParams) -> f64 {
    assert!(spike_count >= 1, "learning rate requested for a neuron that never fired");
    (spike_count as f64).powf(-params.rate_exponent)
}

/// Per-input time of the most recent pre-synaptic spike since the last
/// lateral-inhibition reset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrace {
    last: Vec<Option<u64>>,
}

impl SpikeTrace {
    pub fn new(inputs: usize) -> Self {
        SpikeTrace {
            last: vec![None; inputs],
        }
    }

    pub fn len(&self) -> usize {
        self.last.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_empty()
    }

    pub fn record(&mut self, fired: &[usize], t: u64) {
        for &n in fired {
            self.last[n] = Some(t);
        }
    }

    pub fn clear(&mut self) {
        self.last.iter_mut().for_each(|s| *s = None);
    }

    pub fn last_spike(&self, input: usize) -> Option<u64> {
        self.last[input]
    }

    pub fn t_diff(&self, input: usize, t: u64) -> Option<i64> {
        self.last[input].map(|s| t as i64 - s as i64)
    }
}

/// Kernel values tabulated over `0..=window`, used on the hot path.
#[derive(Clone, Debug)]
pub struct AlphaTable {
    values: Vec<f64>,
    c: f64,
    domain: WeightDomain,
}

impl AlphaTable {
    pub fn new(params: &StdpParams) -> Self {
        let values = (0..=params.window as i64).map(|d| alpha_kernel(d, params)).collect();
        AlphaTable {
            values,
            c: params.c,
            domain: params.domain(),
        }
    }

    #[inline]
    fn alpha(&self, t_diff: i64) -> f64 {
        if t_diff <= 0 {
            0.0
        } else {
            self.values.get(t_diff as usize).copied().unwrap_or(0.0)
        }
    }

    #[inline]
    fn update(&self, w: f64, t_diff: Option<i64>, eta: f64) -> f64 {
        let alpha = t_diff.map_or(0.0, |d| self.alpha(d));
        let delta = if alpha > 0.0 { alpha * self.c * (-w).exp() - 1.0 } else { -1.0 };
        self.domain.clamp(w + eta * delta)
    }
}

/// Applies STDP to the rows of `weights` belonging to the neurons in `fired`.
///
/// `spike_counts` must already include the spikes at `t`; each row uses its
/// own learning rate. Rows of silent neurons are untouched.
pub fn apply_post_spike(
    weights: &mut WeightMatrix,
    trace: &SpikeTrace,
    fired: &[usize],
    spike_counts: &[u64],
    t: u64,
    params: &StdpParams,
    table: &AlphaTable,
) {
    debug_assert_eq!(trace.len(), weights.cols());
    for &k in fired {
        let eta = learning_rate(spike_counts[k], params);
        let row = weights.row_mut(k);
        for (n, w) in row.iter_mut().enumerate() {
            *w = table.update(*w, trace.t_diff(n, t), eta);
        }
    }
}
