//! Lockstep simulation of a network of circuits.
//!
//! All circuits advance together. At step `t` a layer-1 circuit sees the
//! sensory spikes of `t`, every other input (child outputs bottom-up, parent
//! output top-down, its own output for lateral inhibition) is read from the
//! spike board of `t - 1`. The board is double-buffered, so the order in which
//! circuits are updated within a step does not matter.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::circuit::{
    accumulate_excitation, control_inhibition, lateral_inhibition, posterior_snapshot, sample_spikes,
    update_membrane, update_psi, CircuitParams, CircuitState, Inhibition, TopDownInput, WeightDomain, WeightMatrix,
};
use crate::error::{Result, WtaError};
use crate::network::topdown::td_factor;
use crate::network::topology::{NetworkTopology, Source};
use crate::plasticity::{apply_post_spike, AlphaTable, StdpParams};
use crate::rng::named_rng;
use crate::spike::{PopulationId, SpikeVector};

/// Construction constants of a [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub stdp: StdpParams,
    /// Initial weights are uniform over the top `init_fraction` of the
    /// effective weight range.
    pub init_fraction: f64,
    pub seed: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            stdp: StdpParams::default(),
            init_fraction: 0.25,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
struct CircuitRuntime {
    params: CircuitParams,
    domain: WeightDomain,
    state: CircuitState,
    w_up: WeightMatrix,
    w_down: Option<WeightMatrix>,
    /// Bottom-up sources with the first weight column each one occupies.
    sources: Vec<(Source, usize)>,
    /// Sender of top-down input, present only with a down-edge.
    parent: Option<usize>,
    rng: ChaCha8Rng,
    up_fired: Vec<usize>,
    down_fired: Vec<usize>,
    down_factors: Vec<f64>,
    u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Network {
    topology: NetworkTopology,
    stdp: StdpParams,
    table: AlphaTable,
    seed: u64,
    circuits: Vec<CircuitRuntime>,
    prev: Vec<SpikeVector>,
    next: Vec<SpikeVector>,
    /// Spikes per circuit neuron since the current stimulus began.
    stimulus_counts: Vec<Vec<u32>>,
    t: u64,
    learning: bool,
}

fn sample_label(phase: &str, circuit: &str) -> String {
    format!("{phase}:sample:{circuit}")
}

impl Network {
    /// Builds a network with freshly initialized weights, plasticity on, and
    /// sampling streams of the `train` phase.
    pub fn new(topology: NetworkTopology, params: &NetworkParams) -> Result<Network> {
        topology.validate()?;
        params.stdp.validate()?;
        if !(params.init_fraction > 0.0 && params.init_fraction <= 1.0) {
            return Err(WtaError::config("init_fraction must lie in (0, 1]"));
        }
        let n_sensory = topology.sensory.len();
        let mut circuits = Vec::with_capacity(topology.circuits.len());
        for (ci, spec) in topology.circuits.iter().enumerate() {
            let p = spec.params.clone();
            if p.domain() != params.stdp.domain() {
                return Err(WtaError::config(format!(
                    "circuit '{}' weight domain (c = {}, range {}) differs from the STDP one (c = {}, range {})",
                    spec.name, p.c, p.weight_range, params.stdp.c, params.stdp.weight_range
                )));
            }
            let domain = p.domain();
            let lo = domain.stored((1.0 - params.init_fraction) * domain.max_strength());
            let hi = domain.ceiling();

            let mut sources = Vec::new();
            let mut cols = 0;
            if let Some(edge) = topology.up_edge(ci) {
                for &s in &edge.sources {
                    sources.push((s, cols));
                    cols += topology.source_size(s);
                }
            }
            let mut init = named_rng(params.seed, &format!("init:w_up:{}", spec.name));
            let w_up = WeightMatrix::random(p.k, cols, lo, hi, &mut init);

            let down = topology.down_edge_into(ci).copied();
            let w_down = down.map(|e| {
                let (rows, cols) = topology.down_shape(&e);
                let mut init = named_rng(params.seed, &format!("init:w_down:{}", spec.name));
                WeightMatrix::random(rows, cols, lo, hi, &mut init)
            });
            let state = CircuitState::new(&p, cols, w_down.as_ref().map(WeightMatrix::cols));
            circuits.push(CircuitRuntime {
                domain,
                state,
                w_up,
                w_down,
                sources,
                parent: down.map(|e| e.parent),
                rng: named_rng(params.seed, &sample_label("train", &spec.name)),
                up_fired: Vec::new(),
                down_fired: Vec::new(),
                down_factors: Vec::new(),
                u: vec![0.0; p.k],
                params: p,
            });
        }
        let board: Vec<SpikeVector> = (0..circuits.len())
            .map(|ci| SpikeVector::empty(PopulationId(n_sensory + ci), 0))
            .collect();
        Ok(Network {
            stimulus_counts: topology.circuits.iter().map(|c| vec![0; c.params.k]).collect(),
            table: AlphaTable::new(&params.stdp),
            stdp: params.stdp.clone(),
            seed: params.seed,
            prev: board.clone(),
            next: board,
            circuits,
            topology,
            t: 0,
            learning: true,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn stdp(&self) -> &StdpParams {
        &self.stdp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Global timestep of the next call to [`Network::step`].
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn set_time(&mut self, t: u64) {
        self.t = t;
    }

    pub fn learning(&self) -> bool {
        self.learning
    }

    /// Turns plasticity (weight updates and lifetime spike counting) on or off.
    pub fn set_learning(&mut self, on: bool) {
        self.learning = on;
    }

    /// Restarts every sampling stream on the substream of `phase`.
    pub fn set_phase(&mut self, phase: &str) {
        for (c, spec) in self.circuits.iter_mut().zip(&self.topology.circuits) {
            c.rng = named_rng(self.seed, &sample_label(phase, &spec.name));
        }
    }

    /// Word positions of the sampling streams, one per circuit.
    pub fn rng_positions(&self) -> Vec<u128> {
        self.circuits.iter().map(|c| c.rng.get_word_pos()).collect()
    }

    pub fn set_rng_positions(&mut self, positions: &[u128]) -> Result<()> {
        if positions.len() != self.circuits.len() {
            return Err(WtaError::Checkpoint(format!(
                "{} stream positions for {} circuits",
                positions.len(),
                self.circuits.len()
            )));
        }
        for (c, &pos) in self.circuits.iter_mut().zip(positions) {
            c.rng.set_word_pos(pos);
        }
        Ok(())
    }

    /// Clears potentials, traces, the rate average, per-stimulus spike counts
    /// and the spike board. Weights, `psi` and lifetime counts are kept.
    pub fn begin_stimulus(&mut self) {
        for c in &mut self.circuits {
            c.state.begin_stimulus(&c.params);
        }
        for (z, counts) in self.prev.iter_mut().zip(&mut self.stimulus_counts) {
            z.reset(self.t);
            counts.iter_mut().for_each(|s| *s = 0);
        }
        for z in &mut self.next {
            z.reset(self.t);
        }
    }

    /// Advances one timestep. `sensory[i]` holds the spikes of sensory
    /// population `i` at this step. Returns the output of every circuit.
    pub fn step(&mut self, sensory: &[SpikeVector]) -> Result<&[SpikeVector]> {
        if sensory.len() != self.topology.sensory.len() {
            return Err(WtaError::config(format!(
                "{} sensory spike vectors for {} populations",
                sensory.len(),
                self.topology.sensory.len()
            )));
        }
        for (s, spec) in sensory.iter().zip(&self.topology.sensory) {
            if !s.fits(spec.size) {
                return Err(WtaError::config(format!("spike index out of range for '{}'", spec.name)));
            }
        }
        let t = self.t;
        let learning = self.learning;
        let Network {
            circuits,
            prev,
            next,
            stimulus_counts,
            stdp,
            table,
            ..
        } = self;

        for (ci, c) in circuits.iter_mut().enumerate() {
            c.up_fired.clear();
            for &(src, offset) in &c.sources {
                let fired = match src {
                    Source::Sensory(i) => sensory[i].fired(),
                    Source::Circuit(j) => prev[j].fired(),
                };
                c.up_fired.extend(fired.iter().map(|&n| n + offset));
            }
            c.down_fired.clear();
            c.down_factors.clear();
            if let Some(p) = c.parent {
                for &n in prev[p].fired() {
                    c.down_fired.push(n);
                    c.down_factors.push(td_factor(&c.params.td, stimulus_counts[p][n]));
                }
            }

            let reset = lateral_inhibition(&prev[ci]) == Inhibition::Reset;
            if reset {
                c.state.up_trace.clear();
                if let Some(trace) = &mut c.state.down_trace {
                    trace.clear();
                }
                update_membrane(&mut c.state.mu, &c.u, Inhibition::Reset, c.params.mu_max);
            } else {
                let y_count = c.up_fired.len() as f64 + c.down_factors.iter().sum::<f64>();
                let level = control_inhibition(&c.state, y_count);
                let top_down = c.w_down.as_ref().map(|weights| TopDownInput {
                    weights,
                    fired: &c.down_fired,
                    factors: &c.down_factors,
                });
                accumulate_excitation(c.domain, &c.w_up, &c.up_fired, top_down, &mut c.u)?;
                update_membrane(&mut c.state.mu, &c.u, Inhibition::Level(level), c.params.mu_max);
            }

            let out = &mut next[ci];
            sample_spikes(&c.state.mu, c.params.mu_max, &mut c.rng, out, t);
            let fired = out.fired();
            if learning && !fired.is_empty() {
                for &k in fired {
                    c.state.spike_counts[k] += 1;
                }
                apply_post_spike(&mut c.w_up, &c.state.up_trace, fired, &c.state.spike_counts, t, stdp, table);
                if let (Some(w), Some(trace)) = (&mut c.w_down, &c.state.down_trace) {
                    apply_post_spike(w, trace, fired, &c.state.spike_counts, t, stdp, table);
                }
            }
            if !reset {
                c.state.up_trace.record(&c.up_fired, t);
                if let Some(trace) = &mut c.state.down_trace {
                    trace.record(&c.down_fired, t);
                }
            }
            let decay = c.params.rate_decay;
            c.state.rate_ema = decay * c.state.rate_ema + (1.0 - decay) * fired.len() as f64;
            c.state.psi = update_psi(c.state.psi, c.state.rate_ema, &c.params);
        }

        for (z, counts) in next.iter().zip(stimulus_counts.iter_mut()) {
            for &k in z.fired() {
                counts[k] += 1;
            }
        }
        std::mem::swap(prev, next);
        self.t += 1;
        Ok(&self.prev)
    }

    /// Output of every circuit at the most recent step.
    pub fn outputs(&self) -> &[SpikeVector] {
        &self.prev
    }

    pub fn circuit_count(&self) -> usize {
        self.circuits.len()
    }

    pub fn circuit_index(&self, name: &str) -> Option<usize> {
        self.topology.circuit_index(name)
    }

    pub fn params(&self, circuit: usize) -> &CircuitParams {
        &self.circuits[circuit].params
    }

    pub fn state(&self, circuit: usize) -> &CircuitState {
        &self.circuits[circuit].state
    }

    pub fn state_mut(&mut self, circuit: usize) -> &mut CircuitState {
        &mut self.circuits[circuit].state
    }

    pub fn w_up(&self, circuit: usize) -> &WeightMatrix {
        &self.circuits[circuit].w_up
    }

    pub fn w_up_mut(&mut self, circuit: usize) -> &mut WeightMatrix {
        &mut self.circuits[circuit].w_up
    }

    pub fn w_down(&self, circuit: usize) -> Option<&WeightMatrix> {
        self.circuits[circuit].w_down.as_ref()
    }

    pub fn w_down_mut(&mut self, circuit: usize) -> Option<&mut WeightMatrix> {
        self.circuits[circuit].w_down.as_mut()
    }

    /// `S(z_k)` for every neuron of a circuit during the current stimulus.
    pub fn stimulus_counts(&self, circuit: usize) -> &[u32] {
        &self.stimulus_counts[circuit]
    }

    /// Combined checksum of every weight matrix.
    pub fn weights_checksum(&self) -> u64 {
        self.circuits.iter().fold(0u64, |h, c| {
            let down = c.w_down.as_ref().map_or(0, WeightMatrix::checksum);
            h.rotate_left(7) ^ c.w_up.checksum() ^ down.rotate_left(31)
        })
    }

    /// Posterior of every circuit, keyed by circuit name. The joint over all
    /// hidden causes is their product.
    pub fn joint_posterior(&self) -> BTreeMap<String, Vec<f64>> {
        self.topology
            .circuits
            .iter()
            .zip(&self.circuits)
            .map(|(spec, c)| (spec.name.clone(), posterior_snapshot(&c.state.mu)))
            .collect()
    }

    /// Joint probability of one value per circuit, in circuit order.
    pub fn joint_probability(&self, values: &[usize]) -> Result<f64> {
        if values.len() != self.circuits.len() {
            return Err(WtaError::config("one value per circuit required"));
        }
        let mut p = 1.0;
        for (c, &v) in self.circuits.iter().zip(values) {
            let q = posterior_snapshot(&c.state.mu);
            p *= *q
                .get(v)
                .ok_or_else(|| WtaError::config(format!("value {v} out of range for K = {}", q.len())))?;
        }
        Ok(p)
    }
}
