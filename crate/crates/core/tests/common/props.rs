//! Randomized property checks shared by the property tests and the
//! acceptance report. Each returns `Err` with the minimal failing case.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wta_core::circuit::{
    accumulate_excitation, posterior_snapshot, update_membrane, CircuitParams, Inhibition, WeightDomain, WeightMatrix,
};
use wta_core::encoding::{binarize, encode, EncodingParams, MnistImage, IMAGE_PIXELS};
use wta_core::evaluation::{classify, summarize, LabelAssignment, RunMeta, StimulusVerdict, DIGITS};
use wta_core::network::{build_hierarchical, Network, NetworkParams, SensoryGrid, TdPolicy};
use wta_core::plasticity::{apply_post_spike, learning_rate, stdp_update, AlphaTable, SpikeTrace, StdpParams};
use wta_core::runner::{Checkpoint, Design, RunConfig, Session, TopDown};
use wta_core::{PopulationId, SpikeVector};

pub const CASES: u32 = 1000;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, case) => format!("{why} for {case:?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

fn domain_strategy() -> impl Strategy<Value = (f64, f64)> {
    (1e-10f64..0.5, 0.5f64..30.0).prop_map(|(c, r)| (c, r.min(-c.ln() * 2.0)))
}

fn stdp_for(c: f64, r: f64) -> StdpParams {
    StdpParams {
        c,
        weight_range: r,
        ..StdpParams::default()
    }
}

/// Arbitrary update sequences never leave `[floor, ceiling]`.
pub fn weight_bounds(cases: u32) -> Result<(), String> {
    let updates = prop::collection::vec((prop::option::of(-5i64..80), 1e-6f64..=1.0), 1..60);
    run(cases, (domain_strategy(), 0.0f64..=1.0, updates), |((c, r), start, updates)| {
        let p = stdp_for(c, r);
        let d = p.domain();
        let mut w = d.floor() + start * r;
        for (t_diff, eta) in updates {
            w = stdp_update(w, t_diff, eta, &p);
            prop_assert!(w >= d.floor() && w <= d.ceiling(), "w = {w}");
        }
        Ok(())
    })?;
    // Whole matrices under post-spike updates with random traces.
    let events = prop::collection::vec((prop::collection::vec(0usize..6, 0..4), 1u64..500), 1..30);
    run(cases, (domain_strategy(), any::<u64>(), events), |((c, r), seed, events)| {
        let p = stdp_for(c, r);
        let d = p.domain();
        let table = AlphaTable::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = WeightMatrix::random(4, 6, d.floor(), d.ceiling(), &mut rng);
        let mut trace = SpikeTrace::new(6);
        let mut t = 1;
        for (pre, n) in events {
            trace.record(&pre, t);
            t += 1 + n % 7;
            apply_post_spike(&mut w, &trace, &[(n % 4) as usize], &[n; 4], t, &p, &table);
            prop_assert!(w.as_slice().iter().all(|&v| v >= d.floor() && v <= d.ceiling()));
        }
        Ok(())
    })
}

/// Without a usable pre-spike every update strictly depresses, except at the floor.
pub fn depression_default(cases: u32) -> Result<(), String> {
    let t_diff = prop_oneof![Just(None), (-20i64..=0).prop_map(Some), (41i64..1000).prop_map(Some)];
    run(cases, (domain_strategy(), 0.0f64..=1.0, t_diff, 1e-6f64..=1.0), |((c, r), x, t_diff, eta)| {
        let p = stdp_for(c, r);
        let d = p.domain();
        let w = d.floor() + x * r;
        let next = stdp_update(w, t_diff, eta, &p);
        if w == d.floor() {
            prop_assert_eq!(next, d.floor());
        } else {
            prop_assert!(next < w);
        }
        Ok(())
    })
}

pub fn learning_rate_monotone(cases: u32) -> Result<(), String> {
    run(cases, (1u64..10_000_000, 1u64..1000, 0.05f64..3.0), |(n, dn, exponent)| {
        let p = StdpParams {
            rate_exponent: exponent,
            ..StdpParams::default()
        };
        prop_assert!(learning_rate(n + dn, &p) < learning_rate(n, &p));
        Ok(())
    })
}

/// Random membrane updates and whole-network runs keep `0 <= mu <= mu_max`.
pub fn membrane_bounds(cases: u32) -> Result<(), String> {
    let k = 1usize..8;
    run(
        cases,
        (k, 1.0f64..40.0, any::<u64>(), prop::bool::ANY, 0.0f64..50.0),
        |(k, mu_max, seed, reset, level)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            let mut mu: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=mu_max)).collect();
            for _ in 0..20 {
                let u: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..30.0)).collect();
                let inh = if reset { Inhibition::Reset } else { Inhibition::Level(level) };
                update_membrane(&mut mu, &u, inh, mu_max);
                prop_assert!(mu.iter().all(|&m| (0.0..=mu_max).contains(&m)));
            }
            Ok(())
        },
    )?;
    run(cases, small_network_case(), |case| {
        let mut sim = case.build();
        for _ in 0..case.steps {
            sim.step();
            for ci in 0..sim.net.circuit_count() {
                let mu_max = sim.net.params(ci).mu_max;
                prop_assert!(sim.net.state(ci).mu.iter().all(|&m| (0.0..=mu_max).contains(&m)));
            }
        }
        Ok(())
    })
}

/// The step after any circuit spike leaves that circuit at zero potential.
pub fn reset_completeness(cases: u32) -> Result<(), String> {
    run(cases, small_network_case(), |case| {
        let mut sim = case.build();
        let mut fired_before = vec![false; sim.net.circuit_count()];
        for _ in 0..case.steps {
            let out = sim.step().to_vec();
            for (ci, was) in fired_before.iter_mut().enumerate() {
                if *was {
                    prop_assert!(sim.net.state(ci).mu.iter().all(|&m| m == 0.0), "circuit {ci}");
                }
                *was = !out[ci].is_empty();
            }
        }
        Ok(())
    })
}

/// Excitation is non-negative for any weights inside the domain.
pub fn excitation_nonnegative(cases: u32) -> Result<(), String> {
    let fired = prop::collection::btree_set(0usize..12, 0..12);
    run(cases, (domain_strategy(), any::<u64>(), fired), |((c, r), seed, fired)| {
        let d = WeightDomain::new(c, r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = WeightMatrix::random(5, 12, d.floor(), d.ceiling(), &mut rng);
        let fired: Vec<usize> = fired.into_iter().collect();
        let mut u = vec![0.0; 5];
        accumulate_excitation(d, &w, &fired, None, &mut u).unwrap();
        prop_assert!(u.iter().all(|&x| x >= 0.0));
        Ok(())
    })
}

/// Exactly one of each pixel's two sensory neurons is active, and every
/// emitted spike comes from an active neuron.
pub fn population_code_exclusivity(cases: u32) -> Result<(), String> {
    let pixels = prop::collection::vec(any::<u8>(), IMAGE_PIXELS);
    run(cases, (pixels, 1u8..=255, any::<u64>()), |(pixels, threshold, seed)| {
        let img = MnistImage { pixels, label: 0 };
        let mask = binarize(&img, threshold);
        let params = EncodingParams {
            duration: 5,
            ..EncodingParams::default()
        };
        let mut stream = encode(&mask, &params).unwrap();
        prop_assert_eq!(stream.active().len(), IMAGE_PIXELS);
        for (i, &n) in stream.active().iter().enumerate() {
            prop_assert_eq!(n / 2, i);
            prop_assert_eq!(n % 2 == 1, img.pixels[i] >= threshold);
        }
        let active = stream.active().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while stream.next_step(&mut rng, &mut out) {
            prop_assert!(out.iter().all(|n| active.binary_search(n).is_ok()));
        }
        Ok(())
    })
}

pub fn softmax_shift_invariance(cases: u32) -> Result<(), String> {
    let mu = prop::collection::vec(0.0f64..40.0, 1..20);
    run(cases, (mu, -100.0f64..100.0), |(mu, a)| {
        let q = posterior_snapshot(&mu);
        let shifted: Vec<f64> = mu.iter().map(|m| m + a).collect();
        let q2 = posterior_snapshot(&shifted);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in q.iter().zip(&q2) {
            prop_assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        Ok(())
    })
}

/// Identical (topology, seed, stimulus stream, policy) give bit-identical
/// spike trains and weights.
pub fn determinism(cases: u32) -> Result<(), String> {
    run(cases, small_network_case(), |case| {
        let mut a = case.build();
        let mut b = case.build();
        for _ in 0..case.steps {
            let sa = a.step().to_vec();
            let sb = b.step().to_vec();
            prop_assert_eq!(sa, sb);
        }
        prop_assert_eq!(a.net.weights_checksum(), b.net.weights_checksum());
        for ci in 0..a.net.circuit_count() {
            prop_assert_eq!(a.net.w_up(ci), b.net.w_up(ci));
            prop_assert_eq!(&a.net.state(ci).mu, &b.net.state(ci).mu);
        }
        Ok(())
    })
}

/// Checkpoints survive serialization byte for byte and restore the exact
/// network state.
pub fn checkpoint_round_trip(cases: u32) -> Result<(), String> {
    let strat = (1u64..1000, 2usize..4, 2usize..4, prop::bool::ANY, prop::collection::vec(any::<u8>(), IMAGE_PIXELS));
    run(cases, strat, |(seed, k_h, k_o, td, pixels)| {
        let config = RunConfig {
            design: Design::Hierarchical,
            top_down: TopDown(td.then_some(TdPolicy::Constant(2.0))),
            seed,
            k_h,
            k_o,
            duration: 4,
            ..RunConfig::default()
        };
        let mut session = Session::new(&config).unwrap();
        let img = MnistImage { pixels, label: 3 };
        session.present(&[&img]).unwrap();
        let cp = Checkpoint::capture(&config, &session, 1);
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &cp);
        prop_assert_eq!(back.to_bytes(), bytes);
        let restored = back.restore(&config).unwrap();
        prop_assert_eq!(restored.network.weights_checksum(), session.network.weights_checksum());
        prop_assert_eq!(restored.network.time(), session.network.time());
        prop_assert_eq!(restored.network.rng_positions(), session.network.rng_positions());
        for ci in 0..session.network.circuit_count() {
            prop_assert_eq!(restored.network.state(ci).psi, session.network.state(ci).psi);
            prop_assert_eq!(&restored.network.state(ci).spike_counts, &session.network.state(ci).spike_counts);
        }
        Ok(())
    })
}

fn verdicts_strategy() -> impl Strategy<Value = (Vec<Option<u8>>, Vec<(Vec<u32>, u8)>)> {
    (3usize..12).prop_flat_map(|k| {
        (
            prop::collection::vec(prop::option::weighted(0.9, 0u8..10), k),
            prop::collection::vec((prop::collection::vec(0u32..6, k), 0u8..10), 1..40),
        )
    })
}

fn verdicts_for(labels: &[Option<u8>], stimuli: &[(Vec<u32>, u8)]) -> Vec<StimulusVerdict> {
    let assignment = LabelAssignment {
        labels: labels.to_vec(),
        responses: vec![[0; DIGITS]; labels.len()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    stimuli
        .iter()
        .map(|(counts, label)| classify(counts, &assignment, *label, &mut rng).unwrap())
        .collect()
}

/// Confidence bounds, permutation invariance and confusion-row consistency.
pub fn evaluation_properties(cases: u32) -> Result<(), String> {
    run(cases, (verdicts_strategy(), any::<u64>()), |((labels, stimuli), seed)| {
        let v = verdicts_for(&labels, &stimuli);
        for x in &v {
            prop_assert!((0.0..=1.0).contains(&x.confidence));
            let nonzero = x.histogram.iter().filter(|&&h| h > 0).count();
            prop_assert_eq!(x.confidence == 1.0, nonzero == 1 && !x.abstained());
        }
        let report = summarize(&v, RunMeta::default());
        prop_assert!((0.0..=1.0).contains(&report.accuracy));
        prop_assert!((0.0..=1.0).contains(&report.confidence));
        prop_assert!((0.0..=1.0).contains(&report.confidence_error));
        for d in 0..DIGITS {
            let row: u64 = report.confusion[d].iter().sum();
            let n = stimuli.iter().filter(|(_, l)| *l as usize == d).count() as u64;
            prop_assert_eq!(row, n);
        }
        // Relabel neurons: permute labels and counts together.
        let mut perm: Vec<usize> = (0..labels.len()).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let labels_p: Vec<Option<u8>> = perm.iter().map(|&i| labels[i]).collect();
        let stimuli_p: Vec<(Vec<u32>, u8)> = stimuli
            .iter()
            .map(|(c, l)| (perm.iter().map(|&i| c[i]).collect(), *l))
            .collect();
        let report_p = summarize(&verdicts_for(&labels_p, &stimuli_p), RunMeta::default());
        // The histograms are unchanged, so even tie-breaks draw identically.
        prop_assert_eq!(report.confusion, report_p.confusion);
        prop_assert_eq!(report.accuracy, report_p.accuracy);
        prop_assert!((report.confidence - report_p.confidence).abs() < 1e-12);
        prop_assert!((report.confidence_error - report_p.confidence_error).abs() < 1e-12);
        Ok(())
    })
}

/// A small random hierarchy driven by a random stimulus stream.
#[derive(Clone, Debug)]
pub struct NetworkCase {
    pub k_h: usize,
    pub k_o: usize,
    pub seed: u64,
    pub input_seed: u64,
    pub p: f64,
    pub td: Option<TdPolicy>,
    pub learning: bool,
    pub steps: usize,
    pub psi0: f64,
}

pub struct Sim {
    pub net: Network,
    rng: ChaCha8Rng,
    p: f64,
}

impl Sim {
    pub fn step(&mut self) -> &[SpikeVector] {
        use rand::Rng;
        let t = self.net.time();
        let input: Vec<SpikeVector> = self
            .net
            .topology()
            .sensory
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let fired = (0..s.size).filter(|_| self.rng.random::<f64>() < self.p).collect();
                SpikeVector::new(PopulationId(i), t, fired)
            })
            .collect();
        self.net.step(&input).unwrap()
    }
}

impl NetworkCase {
    pub fn build(&self) -> Sim {
        let grid = SensoryGrid {
            prefix: "h".into(),
            field: 0,
            height: 4,
            width: 4,
            block_height: 2,
            block_width: 2,
        };
        let template = CircuitParams {
            psi_initial: self.psi0,
            td: self.td.unwrap_or_default(),
            ..CircuitParams::new(1)
        };
        let mut topo = build_hierarchical(&grid, self.k_h, self.k_o, &template).unwrap();
        if self.td.is_some() {
            topo = topo.with_top_down();
        }
        let mut net = Network::new(
            topo,
            &NetworkParams {
                seed: self.seed,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        net.set_learning(self.learning);
        net.begin_stimulus();
        Sim {
            net,
            rng: ChaCha8Rng::seed_from_u64(self.input_seed),
            p: self.p,
        }
    }
}

pub fn small_network_case() -> impl Strategy<Value = NetworkCase> {
    let td = prop_oneof![
        Just(None),
        Just(Some(TdPolicy::Off)),
        (0.0f64..3.0).prop_map(|k| Some(TdPolicy::Constant(k))),
        Just(Some(TdPolicy::Adaptive(Default::default()))),
    ];
    (1usize..5, 1usize..5, any::<u64>(), any::<u64>(), 0.0f64..0.6, td, prop::bool::ANY, 5usize..60, 0.0f64..20.0)
        .prop_map(|(k_h, k_o, seed, input_seed, p, td, learning, steps, psi0)| NetworkCase {
            k_h,
            k_o,
            seed,
            input_seed,
            p,
            td,
            learning,
            steps,
            psi0,
        })
}

/// Frozen potentials, many sampling steps: the distribution of the firing
/// neuron over single-spike steps against the softmax. Returns the
/// chi-square p-value and the number of single-spike events.
pub fn sampling_matches_softmax(min_events: u64, seed: u64) -> (f64, u64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use wta_core::circuit::sample_spikes;
    let mu_max = wta_core::circuit::DEFAULT_MU_MAX;
    // Low total rate so simultaneous spikes are rare and the single-spike
    // conditional is the softmax up to a (1 - p_k)^-1 factor below 0.2%.
    let weights = [1.0, 2.0, 3.0, 5.0, 9.0];
    let total: f64 = weights.iter().sum();
    let rate = 0.004;
    let mu: Vec<f64> = weights.iter().map(|w| mu_max + (rate * w / total).ln()).collect();
    let q = posterior_snapshot(&mu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpikeVector::empty(PopulationId(0), 0);
    let mut counts = vec![0u64; mu.len()];
    let mut events = 0u64;
    let mut t = 0;
    while events < min_events {
        sample_spikes(&mu, mu_max, &mut rng, &mut out, t);
        if out.len() == 1 {
            counts[out.fired()[0]] += 1;
            events += 1;
        }
        t += 1;
    }
    let n = events as f64;
    let stat: f64 = counts
        .iter()
        .zip(&q)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum();
    let dist = ChiSquared::new((mu.len() - 1) as f64).unwrap();
    (1.0 - dist.cdf(stat), events)
}
