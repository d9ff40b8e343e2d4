#![allow(dead_code)]

pub mod props;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wta_core::circuit::CircuitParams;
use wta_core::encoding::{MnistImage, IMAGE_PIXELS, IMAGE_SIDE};
use wta_core::network::{CircuitSpec, Network, NetworkParams, NetworkTopology, SensorySpec, Source, UpEdge};
use wta_core::rng::named_rng;
use wta_core::{PopulationId, SpikeVector};

/// One circuit of `k` neurons fed by a single sensory population.
pub fn single_circuit(k: usize, inputs: usize, params: CircuitParams) -> NetworkTopology {
    NetworkTopology {
        sensory: vec![SensorySpec {
            name: "in".into(),
            size: inputs,
            cube: None,
        }],
        circuits: vec![CircuitSpec {
            name: "c".into(),
            params: CircuitParams { k, ..params },
        }],
        up_edges: vec![UpEdge {
            target: 0,
            sources: vec![Source::Sensory(0)],
        }],
        down_edges: vec![],
    }
}

pub fn network(topology: NetworkTopology, seed: u64) -> Network {
    Network::new(
        topology,
        &NetworkParams {
            seed,
            ..NetworkParams::default()
        },
    )
    .unwrap()
}

/// Bernoulli draws with probability `p` for every index of `active`.
pub fn poisson_step(active: &[usize], p: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    active.iter().copied().filter(|_| rng.random::<f64>() < p).collect()
}

/// Presents `active` (indices of sensory population 0) for `steps` timesteps
/// at per-step probability `p`; returns the circuit 0 spike counts.
pub fn present_pattern(net: &mut Network, active: &[usize], steps: u64, p: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    net.begin_stimulus();
    for _ in 0..steps {
        let fired = poisson_step(active, p, rng);
        let input = [SpikeVector::new(PopulationId(0), net.time(), fired)];
        net.step(&input).unwrap();
    }
    net.stimulus_counts(0).to_vec()
}

/// Class prototypes of synthetic "digits": each class draws a thick bar at
/// its own angle, so classes overlap partially like real strokes do.
pub fn synthetic_digits(n: usize, seed: u64) -> Vec<MnistImage> {
    let mut rng = named_rng(seed, "synthetic-digits");
    (0..n)
        .map(|i| {
            let label = (i % 10) as u8;
            let angle = std::f64::consts::PI * label as f64 / 10.0;
            let (s, c) = angle.sin_cos();
            let mut pixels = vec![0u8; IMAGE_PIXELS];
            let jitter: f64 = rng.random_range(-1.0..1.0);
            for r in 0..IMAGE_SIDE {
                for col in 0..IMAGE_SIDE {
                    let y = r as f64 - 13.5;
                    let x = col as f64 - 13.5;
                    let dist = (x * s - y * c).abs();
                    let along = (x * c + y * s).abs();
                    if dist < 2.5 + jitter && along < 10.0 && rng.random::<f64>() > 0.05 {
                        pixels[r * IMAGE_SIDE + col] = 200;
                    }
                }
            }
            MnistImage { pixels, label }
        })
        .collect()
}

pub const PATTERNS: usize = 10;
const PATTERN_SIZE: usize = 10;

fn pattern(i: usize) -> Vec<usize> {
    (i * PATTERN_SIZE..(i + 1) * PATTERN_SIZE).collect()
}

/// Trains a K = 10 circuit on 10 disjoint patterns and returns the most
/// responsive neuron of each pattern afterwards (`None` for a silent one).
///
/// Sparse input (p = 0.1 per step), a low target rate and initial weights
/// close to the ceiling keep the early, large-eta updates from depressing
/// patterns that no neuron has claimed yet.
pub fn selectivity_winners(seed: u64) -> Vec<Option<usize>> {
    let params = CircuitParams {
        target_rate: 0.005,
        ..CircuitParams::new(10)
    };
    let mut net = Network::new(
        single_circuit(10, PATTERNS * PATTERN_SIZE, params),
        &NetworkParams {
            seed,
            init_fraction: 0.1,
            ..NetworkParams::default()
        },
    )
    .unwrap();
    let mut rng = named_rng(seed, "selectivity-input");
    let mut order: Vec<usize> = (0..PATTERNS).collect();
    for _ in 0..120 {
        order.shuffle(&mut rng);
        for &i in &order {
            present_pattern(&mut net, &pattern(i), 150, 0.1, &mut rng);
        }
    }
    net.set_learning(false);
    (0..PATTERNS)
        .map(|i| {
            let mut total = [0u32; 10];
            for _ in 0..5 {
                let counts = present_pattern(&mut net, &pattern(i), 150, 0.1, &mut rng);
                total.iter_mut().zip(counts).for_each(|(t, c)| *t += c);
            }
            let best = (0..10).max_by_key(|&k| (total[k], std::cmp::Reverse(k))).unwrap();
            (total[best] > 0).then_some(best)
        })
        .collect()
}

/// Every pattern has a responsive winner and no two share one.
pub fn one_to_one(winners: &[Option<usize>]) -> bool {
    let mut seen: Vec<usize> = winners.iter().flatten().copied().collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len() == winners.len()
}
