//! Discrete-time dynamics of a single winner-take-all circuit.
//!
//! A circuit holds `K` excitatory neurons. Each timestep the neurons integrate
//! weighted input spikes into their membrane potentials, receive a shared
//! inhibition signal, and fire independently with probability
//! `exp(mu_k - mu_max)`. Any output spike resets the whole circuit on the
//! following timestep.
//!
//! Weights are stored in the log domain `[ln c - r, ln c]`, which contains
//! the STDP fixed point `ln(alpha * c)`. Excitation uses the shifted value
//! `w - (ln c - r)`, which lies in `[0, r]`.

use rand::Rng;

use crate::error::{Result, WtaError};
use crate::network::TdPolicy;
use crate::plasticity::SpikeTrace;
use crate::spike::SpikeVector;

/// Table 2 value of the maximum membrane potential.
pub const DEFAULT_MU_MAX: f64 = 19.2558;
/// Weight constant `c`.
pub const DEFAULT_C: f64 = 1e-8;
/// Width of the log-weight domain, `ln 1000`.
pub const DEFAULT_WEIGHT_RANGE: f64 = 6.907_755_278_982_137;

/// Role of a neuron population.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationRole {
    Sensory,
    Excitatory,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeuronPopulation {
    pub size: usize,
    pub role: PopulationRole,
}

impl NeuronPopulation {
    pub fn new(size: usize, role: PopulationRole) -> Result<Self> {
        if size == 0 {
            return Err(WtaError::config("population size must be at least 1"));
        }
        Ok(NeuronPopulation { size, role })
    }
}

/// Bounds of the stored log-weights and the offset applied in excitation.
///
/// The ceiling is `ln c`; the floor sits `range` below it. A synapse at the
/// floor contributes nothing, one at the ceiling contributes `range`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightDomain {
    ln_c: f64,
    range: f64,
}

impl WeightDomain {
    pub fn new(c: f64, range: f64) -> Self {
        WeightDomain { ln_c: c.ln(), range }
    }

    /// The widest domain, `[2 ln c, ln c]`.
    pub fn full(c: f64) -> Self {
        Self::new(c, -c.ln())
    }

    /// Lowest stored weight: an effectively silent synapse.
    pub fn floor(&self) -> f64 {
        self.ln_c - self.range
    }

    /// Highest stored weight, `ln c`.
    pub fn ceiling(&self) -> f64 {
        self.ln_c
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.floor(), self.ceiling())
    }

    /// Non-negative excitation contributed by one spike through weight `w`.
    #[inline]
    pub fn effective(&self, w: f64) -> f64 {
        w - self.floor()
    }

    /// Inverse of [`WeightDomain::effective`].
    pub fn stored(&self, effective: f64) -> f64 {
        effective + self.floor()
    }

    /// Maximum effective strength.
    pub fn max_strength(&self) -> f64 {
        self.range
    }
}

/// Dense `rows x cols` matrix of log-domain weights, row-major.
///
/// Rows are post-synaptic circuit neurons, columns pre-synaptic inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        WeightMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(WtaError::config(format!(
                "weight matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(WeightMatrix { rows, cols, data })
    }

    /// Uniform random entries in `[lo, hi]`, drawn row by row.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        WeightMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Order-sensitive checksum of the raw bit patterns.
    pub fn checksum(&self) -> u64 {
        self.data.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// Constants of one circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitParams {
    /// Number of excitatory neurons.
    pub k: usize,
    pub mu_max: f64,
    pub c: f64,
    /// Width of the log-weight domain below `ln c`.
    pub weight_range: f64,
    /// Desired circuit output rate in spikes per timestep.
    pub target_rate: f64,
    /// Multiplicative step of the inhibition controller.
    pub psi_gain: f64,
    pub psi_initial: f64,
    pub psi_max: f64,
    /// Decay of the exponential moving average of the output rate.
    pub rate_decay: f64,
    /// Scaling applied to the top-down input this circuit receives.
    pub td: TdPolicy,
}

impl CircuitParams {
    pub fn new(k: usize) -> Self {
        CircuitParams {
            k,
            mu_max: DEFAULT_MU_MAX,
            c: DEFAULT_C,
            weight_range: DEFAULT_WEIGHT_RANGE,
            target_rate: 0.1,
            psi_gain: 0.003,
            psi_initial: -DEFAULT_C.ln(),
            psi_max: -10.0 * DEFAULT_C.ln(),
            rate_decay: 0.9,
            td: TdPolicy::Off,
        }
    }

    pub fn domain(&self) -> WeightDomain {
        WeightDomain::new(self.c, self.weight_range)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(WtaError::config("circuit needs at least one neuron"));
        }
        if !(self.mu_max > 0.0) {
            return Err(WtaError::config("mu_max must be positive"));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(WtaError::config("c must lie in (0, 1)"));
        }
        if !(self.weight_range > 0.0 && self.weight_range.is_finite()) {
            return Err(WtaError::config("weight_range must be positive"));
        }
        if !(self.target_rate > 0.0 && self.target_rate <= 1.0) {
            return Err(WtaError::config("target_rate must lie in (0, 1]"));
        }
        if !(self.psi_gain > 0.0) || !(self.psi_initial >= 0.0) || !(self.psi_max >= self.psi_initial) {
            return Err(WtaError::config("psi controller constants are inconsistent"));
        }
        if !(self.rate_decay > 0.0 && self.rate_decay < 1.0) {
            return Err(WtaError::config("rate_decay must lie in (0, 1)"));
        }
        self.td.validate()
    }
}

/// Mutable state of one circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitState {
    pub mu: Vec<f64>,
    pub psi: f64,
    /// Moving average of output spikes per timestep.
    pub rate_ema: f64,
    /// Lifetime post-synaptic spike counts `N(z_k)`.
    pub spike_counts: Vec<u64>,
    pub up_trace: SpikeTrace,
    pub down_trace: Option<SpikeTrace>,
}

impl CircuitState {
    pub fn new(params: &CircuitParams, up_inputs: usize, down_inputs: Option<usize>) -> Self {
        CircuitState {
            mu: vec![0.0; params.k],
            psi: params.psi_initial,
            rate_ema: params.target_rate,
            spike_counts: vec![0; params.k],
            up_trace: SpikeTrace::new(up_inputs),
            down_trace: down_inputs.map(SpikeTrace::new),
        }
    }

    /// Clears everything that belongs to a single stimulus presentation.
    pub fn begin_stimulus(&mut self, params: &CircuitParams) {
        self.mu.iter_mut().for_each(|m| *m = 0.0);
        self.rate_ema = params.target_rate;
        self.up_trace.clear();
        if let Some(trace) = &mut self.down_trace {
            trace.clear();
        }
    }
}

/// Inhibition delivered to every neuron of a circuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inhibition {
    /// Unbounded lateral inhibition: all potentials drop to zero.
    Reset,
    Level(f64),
}

impl Inhibition {
    pub fn plus(self, control: f64) -> Inhibition {
        match self {
            Inhibition::Reset => Inhibition::Reset,
            Inhibition::Level(v) => Inhibition::Level(v + control),
        }
    }
}

/// Top-down input to [`accumulate_excitation`]; `factors[i]` scales the
/// spike `fired[i]`.
#[derive(Clone, Copy, Debug)]
pub struct TopDownInput<'a> {
    pub weights: &'a WeightMatrix,
    pub fired: &'a [usize],
    pub factors: &'a [f64],
}

fn check_spikes(fired: &[usize], cols: usize, what: &str) -> Result<()> {
    match fired.iter().find(|&&n| n >= cols) {
        Some(n) => Err(WtaError::config(format!(
            "{what} spike index {n} out of range for {cols} inputs"
        ))),
        None => Ok(()),
    }
}

/// Writes the excitation `u` of every neuron into `out`.
pub fn accumulate_excitation(
    domain: WeightDomain,
    w_up: &WeightMatrix,
    up_fired: &[usize],
    top_down: Option<TopDownInput<'_>>,
    out: &mut [f64],
) -> Result<()> {
    if out.len() != w_up.rows() {
        return Err(WtaError::config(format!(
            "excitation buffer has {} entries for {} neurons",
            out.len(),
            w_up.rows()
        )));
    }
    check_spikes(up_fired, w_up.cols(), "bottom-up")?;
    out.iter_mut().for_each(|u| *u = 0.0);
    let offset = -domain.floor();
    for (k, u) in out.iter_mut().enumerate() {
        let row = w_up.row(k);
        let mut acc = 0.0;
        for &m in up_fired {
            acc += row[m] + offset;
        }
        *u = acc;
    }
    if let Some(td) = top_down {
        if td.weights.rows() != w_up.rows() {
            return Err(WtaError::config("top-down matrix row count differs from bottom-up"));
        }
        if td.factors.len() != td.fired.len() {
            return Err(WtaError::config("one top-down factor per spike required"));
        }
        check_spikes(td.fired, td.weights.cols(), "top-down")?;
        for (k, u) in out.iter_mut().enumerate() {
            let row = td.weights.row(k);
            let mut acc = 0.0;
            for (&n, &f) in td.fired.iter().zip(td.factors) {
                acc += f * (row[n] + offset);
            }
            *u += acc;
        }
    }
    Ok(())
}

/// Excitation for a circuit receiving bottom-up spikes and, optionally,
/// top-down spikes scaled uniformly by `td_factor`.
pub fn compute_excitation(
    domain: WeightDomain,
    w_up: &WeightMatrix,
    w_down: Option<&WeightMatrix>,
    y_up: &SpikeVector,
    y_down: Option<&SpikeVector>,
    td_factor: f64,
) -> Result<Vec<f64>> {
    if td_factor < 0.0 {
        return Err(WtaError::config("top-down factor must be non-negative"));
    }
    let mut out = vec![0.0; w_up.rows()];
    let factors;
    let top_down = match (w_down, y_down) {
        (Some(weights), Some(spikes)) => {
            factors = vec![td_factor; spikes.len()];
            Some(TopDownInput {
                weights,
                fired: spikes.fired(),
                factors: &factors,
            })
        }
        (None, Some(spikes)) if !spikes.is_empty() => {
            return Err(WtaError::config("top-down spikes without a top-down matrix"));
        }
        _ => None,
    };
    accumulate_excitation(domain, w_up, y_up.fired(), top_down, &mut out)?;
    Ok(out)
}

/// Lateral inhibition at `t` given the circuit's own output at `t - 1`.
pub fn lateral_inhibition(z_prev: &SpikeVector) -> Inhibition {
    if z_prev.is_empty() {
        Inhibition::Level(0.0)
    } else {
        Inhibition::Reset
    }
}

/// Homeostatic inhibition `psi * |y(t)|`.
pub fn control_inhibition(state: &CircuitState, y_count: f64) -> f64 {
    state.psi * y_count
}

/// One step of the multiplicative inhibition controller.
pub fn update_psi(psi: f64, observed_rate: f64, params: &CircuitParams) -> f64 {
    let next = if observed_rate > params.target_rate {
        psi * (1.0 + params.psi_gain)
    } else if observed_rate < params.target_rate {
        psi / (1.0 + params.psi_gain)
    } else {
        psi
    };
    next.clamp(0.0, params.psi_max)
}

/// `mu_k <- min(mu_max, max(0, mu_k + u_k - I))`, or zero on reset.
pub fn update_membrane(mu: &mut [f64], u: &[f64], inhibition: Inhibition, mu_max: f64) {
    debug_assert_eq!(mu.len(), u.len());
    match inhibition {
        Inhibition::Reset => mu.iter_mut().for_each(|m| *m = 0.0),
        Inhibition::Level(i) => {
            for (m, &x) in mu.iter_mut().zip(u) {
                *m = (*m + x - i).clamp(0.0, mu_max);
            }
        }
    }
}

/// Firing probability of a neuron at potential `mu`.
#[inline]
pub fn firing_probability(mu: f64, mu_max: f64) -> f64 {
    (mu - mu_max).exp().min(1.0)
}

/// Draws one uniform per neuron, in index order, so the stream position only
/// depends on the number of timesteps simulated.
pub fn sample_spikes<R: Rng + ?Sized>(mu: &[f64], mu_max: f64, rng: &mut R, out: &mut SpikeVector, t: u64) {
    out.reset(t);
    let floor_p = (-mu_max).exp();
    for (k, &m) in mu.iter().enumerate() {
        let draw: f64 = rng.random();
        let p = if m == 0.0 { floor_p } else { firing_probability(m, mu_max) };
        if draw < p {
            out.push(k);
        }
    }
}

/// Softmax of the membrane potentials: the posterior over the circuit's
/// hidden causes.
pub fn posterior_snapshot(mu: &[f64]) -> Vec<f64> {
    let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / mu.len() as f64; mu.len()];
    }
    let mut q: Vec<f64> = mu.iter().map(|&m| (m - max).exp()).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    q
}
