mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wta_core::circuit::CircuitParams;
use wta_core::network::{build_hierarchical, build_integration, Network, NetworkParams, NetworkTopology, SensoryGrid, TdPolicy};
use wta_core::{PopulationId, SpikeVector};

fn grid(prefix: &str, field: usize) -> SensoryGrid {
    SensoryGrid {
        prefix: prefix.into(),
        field,
        height: 4,
        width: 4,
        block_height: 2,
        block_width: 2,
    }
}

fn hierarchy(prefix: &str, field: usize, td: Option<TdPolicy>) -> NetworkTopology {
    let template = CircuitParams {
        td: td.unwrap_or_default(),
        ..CircuitParams::new(1)
    };
    let t = build_hierarchical(&grid(prefix, field), 3, 4, &template).unwrap();
    if td.is_some() {
        t.with_top_down()
    } else {
        t
    }
}

fn integration(td: Option<TdPolicy>) -> NetworkTopology {
    let template = CircuitParams {
        td: td.unwrap_or_default(),
        ..CircuitParams::new(1)
    };
    let t = build_integration(&hierarchy("a", 0, td), &hierarchy("b", 1, td), 5, &template, "top").unwrap();
    if td.is_some() {
        t.with_top_down()
    } else {
        t
    }
}

fn net(topology: NetworkTopology, seed: u64) -> Network {
    Network::new(
        topology,
        &NetworkParams {
            seed,
            ..NetworkParams::default()
        },
    )
    .unwrap()
}

fn random_input(net: &Network, p: f64, rng: &mut ChaCha8Rng) -> Vec<SpikeVector> {
    net.topology()
        .sensory
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let fired = (0..s.size).filter(|_| rng.random::<f64>() < p).collect();
            SpikeVector::new(PopulationId(i), net.time(), fired)
        })
        .collect()
}

fn mu_snapshot(net: &Network) -> Vec<Vec<f64>> {
    (0..net.circuit_count()).map(|ci| net.state(ci).mu.clone()).collect()
}

#[test]
fn sensory_change_reaches_layer_l_after_l_minus_1_steps() {
    let topo = integration(None);
    let layer1 = topo.circuit_index("a.l1.0").unwrap();
    let out_a = topo.circuit_index("a.out").unwrap();
    let top = topo.circuit_index("top").unwrap();
    let mut a = net(topo.clone(), 5);
    let mut b = net(topo, 5);
    for n in [&mut a, &mut b] {
        n.set_learning(false);
        n.begin_stimulus();
        for ci in 0..n.circuit_count() {
            n.state_mut(ci).psi = 0.0;
        }
    }
    let silent = |n: &Network| {
        (0..n.topology().sensory.len())
            .map(|i| SpikeVector::empty(PopulationId(i), n.time()))
            .collect::<Vec<_>>()
    };
    // Network b sees every sensory neuron of the first cube fire once, at t0.
    let mut first_diff = vec![None; a.circuit_count()];
    for step in 0..6u64 {
        let ia = silent(&a);
        let mut ib = silent(&b);
        if step == 0 {
            ib[0] = SpikeVector::new(PopulationId(0), b.time(), (0..8).collect());
        }
        a.step(&ia).unwrap();
        b.step(&ib).unwrap();
        for (ci, (x, y)) in mu_snapshot(&a).iter().zip(mu_snapshot(&b)).enumerate() {
            if *x != y && first_diff[ci].is_none() {
                first_diff[ci] = Some(step);
            }
        }
    }
    assert_eq!(first_diff[layer1], Some(0));
    // With psi = 0 the excited layer-1 circuit reaches mu_max and fires at
    // once; each further layer sees it one step later.
    assert_eq!(first_diff[out_a], Some(1));
    assert_eq!(first_diff[top], Some(2));
}

#[test]
fn zero_feedback_factor_is_neutral() {
    for seed in 1..=5 {
        let mut plain = net(integration(None), seed);
        let mut fed = net(integration(Some(TdPolicy::Constant(0.0))), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for stim in 0..4 {
            plain.begin_stimulus();
            fed.begin_stimulus();
            for _ in 0..150 {
                let input = random_input(&plain, 0.2, &mut rng);
                let x = plain.step(&input).unwrap().to_vec();
                let y = fed.step(&input).unwrap().to_vec();
                assert_eq!(x, y, "seed {seed}, stimulus {stim}");
            }
        }
        for ci in 0..plain.circuit_count() {
            assert_eq!(plain.w_up(ci), fed.w_up(ci));
        }
    }
}

#[test]
fn feedback_changes_nothing_before_the_first_parent_spike() {
    for seed in 1..=5 {
        let mut plain = net(hierarchy("h", 0, None), seed);
        let mut fed = net(hierarchy("h", 0, Some(TdPolicy::Constant(2.0))), seed);
        let out = plain.topology().circuit_index("h.out").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        plain.begin_stimulus();
        fed.begin_stimulus();
        let mut parent_fired = false;
        let mut diverged = false;
        for _ in 0..600 {
            let input = random_input(&plain, 0.2, &mut rng);
            let x = plain.step(&input).unwrap().to_vec();
            let y = fed.step(&input).unwrap().to_vec();
            if !parent_fired {
                assert_eq!(x, y, "seed {seed}: outputs differ before any feedback");
            }
            diverged |= x != y;
            parent_fired |= !y[out].is_empty();
        }
        assert!(parent_fired, "seed {seed}: output circuit never fired");
        assert!(diverged, "seed {seed}: feedback had no effect at all");
    }
}
