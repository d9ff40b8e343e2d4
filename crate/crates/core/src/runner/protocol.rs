//! Train, freeze, test.

use std::path::{Path, PathBuf};

use log::info;

use crate::encoding::{load_idx, MnistImage};
use crate::error::{Result, WtaError};
use crate::evaluation::{assign_labels, classify, summarize, EvalReport, RunMeta, DIGITS};
use crate::rng::named_rng;
use crate::runner::checkpoint::Checkpoint;
use crate::runner::config::{Assignment, Pairing, RunConfig};
use crate::runner::session::Session;
use crate::runner::weights::{export_weight_maps, LayerSelector};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<MnistImage>,
    pub test: Vec<MnistImage>,
}

fn find(dir: &Path, stem: &str) -> PathBuf {
    let plain = dir.join(stem);
    let gz = dir.join(format!("{stem}.gz"));
    if !plain.exists() && gz.exists() {
        gz
    } else {
        plain
    }
}

impl Dataset {
    /// Loads the four standard MNIST files (optionally gzipped) from `dir`.
    pub fn load_mnist(dir: &Path) -> Result<Dataset> {
        let train = load_idx(&find(dir, "train-images-idx3-ubyte"), &find(dir, "train-labels-idx1-ubyte"))?;
        let test = load_idx(&find(dir, "t10k-images-idx3-ubyte"), &find(dir, "t10k-labels-idx1-ubyte"))?;
        Ok(Dataset { train, test })
    }
}

/// Images shown to each input field for stimulus `i` of `set`.
fn inputs<'a>(config: &RunConfig, set: &'a [MnistImage], i: usize, fields: usize) -> Vec<&'a MnistImage> {
    let first = &set[i];
    let mut out = vec![first];
    for f in 1..fields {
        let img = match config.pairing {
            Pairing::Same => first,
            Pairing::SameLabel => (1..set.len())
                .map(|d| &set[(i + d * f) % set.len()])
                .find(|img| img.label == first.label)
                .unwrap_or(first),
        };
        out.push(img);
    }
    out
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WtaError::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| WtaError::io(format!("writing {}", path.display()), e))
}

/// Trains on the first `train_count` images of `train`, resuming from
/// `<output_dir>/checkpoint.bin` when one exists. Weight maps are exported
/// after the stimulus counts listed in `snapshots`.
pub fn train(config: &RunConfig, train: &[MnistImage]) -> Result<Checkpoint> {
    if config.train_count > train.len() {
        return Err(WtaError::config(format!(
            "train_count {} exceeds the {} available images",
            config.train_count,
            train.len()
        )));
    }
    let dir = &config.output_dir;
    create_dir(dir)?;
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let (mut session, start) = if ckpt_path.exists() {
        let cp = Checkpoint::read(&ckpt_path)?;
        let session = cp.restore(config)?;
        info!("resuming {} at stimulus {}", dir.display(), cp.stimuli_seen);
        (session, cp.stimuli_seen as usize)
    } else {
        write_text(&dir.join("config.toml"), &config.to_toml())?;
        let session = Session::new(config)?;
        write_text(
            &dir.join("topology.txt"),
            &crate::network::write_topology(session.network.topology()),
        )?;
        (session, 0)
    };
    if start > config.train_count {
        return Err(WtaError::Checkpoint(format!(
            "checkpoint has seen {start} stimuli, more than train_count {}",
            config.train_count
        )));
    }
    session.network.set_learning(true);
    if start == 0 && config.snapshots.contains(&0) {
        snapshot(&session, dir, 0)?;
    }
    let fields = session.fields();
    for i in start..config.train_count {
        session.present(&inputs(config, train, i, fields))?;
        let seen = i + 1;
        if config.snapshots.contains(&seen) {
            snapshot(&session, dir, seen)?;
        }
        if config.checkpoint_every > 0 && seen % config.checkpoint_every == 0 && seen < config.train_count {
            Checkpoint::capture(config, &session, seen as u64).write(&ckpt_path)?;
        }
        if seen % 1000 == 0 {
            info!("{}: {seen}/{} stimuli", dir.display(), config.train_count);
        }
    }
    let cp = Checkpoint::capture(config, &session, config.train_count as u64);
    cp.write(&ckpt_path)?;
    Ok(cp)
}

fn snapshot(session: &Session, dir: &Path, seen: usize) -> Result<()> {
    export_weight_maps(&session.network, &LayerSelector::All, &dir.join(format!("weights/after_{seen}")))?;
    Ok(())
}

/// Per-stimulus spike counts of each readout circuit.
fn record(
    session: &mut Session,
    config: &RunConfig,
    set: &[MnistImage],
    count: usize,
    readouts: &[usize],
) -> Result<Vec<Vec<Vec<u32>>>> {
    let fields = session.fields();
    let mut out = vec![Vec::with_capacity(count); readouts.len()];
    for i in 0..count {
        session.present(&inputs(config, set, i, fields))?;
        for (r, &ci) in readouts.iter().enumerate() {
            out[r].push(session.network.stimulus_counts(ci).to_vec());
        }
    }
    Ok(out)
}

fn responses(counts: &[Vec<u32>], labels: impl Iterator<Item = u8>) -> Vec<[u64; DIGITS]> {
    let k = counts.first().map_or(0, Vec::len);
    let mut resp = vec![[0u64; DIGITS]; k];
    for (stim, label) in counts.iter().zip(labels) {
        for (n, &c) in stim.iter().enumerate() {
            resp[n][label as usize] += u64::from(c);
        }
    }
    resp
}

/// Evaluates a trained checkpoint with plasticity off. Returns one report per
/// readout network (the integration design also reports its two embedded
/// hierarchies).
pub fn test(config: &RunConfig, checkpoint: &Checkpoint, data: &Dataset) -> Result<Vec<EvalReport>> {
    let count = config.test_count;
    if count > data.test.len() {
        return Err(WtaError::config(format!(
            "test_count {count} exceeds the {} available images",
            data.test.len()
        )));
    }
    let mut session = checkpoint.restore(config)?;
    session.network.set_learning(false);
    let before = session.network.weights_checksum();

    let names = config.readouts();
    let readouts = names
        .iter()
        .map(|(_, c)| {
            session
                .network
                .circuit_index(c)
                .ok_or_else(|| WtaError::Runtime(format!("readout circuit '{c}' missing")))
        })
        .collect::<Result<Vec<_>>>()?;

    let assign_counts = match config.assignment {
        Assignment::Test => None,
        Assignment::Train => {
            let n = config.assignment_count;
            if n > data.train.len() {
                return Err(WtaError::config(format!("assignment_count {n} exceeds the training set")));
            }
            session.set_phase("assign");
            Some(record(&mut session, config, &data.train, n, &readouts)?)
        }
    };
    session.set_phase("test");
    let test_counts = record(&mut session, config, &data.test, count, &readouts)?;

    if session.network.weights_checksum() != before {
        return Err(WtaError::Runtime("weights changed during a frozen test pass".into()));
    }

    let mut reports = Vec::new();
    for (r, (network, _)) in names.iter().enumerate() {
        let resp = match &assign_counts {
            Some(a) => responses(&a[r], data.train.iter().map(|i| i.label)),
            None => responses(&test_counts[r], data.test.iter().map(|i| i.label)),
        };
        let labels = assign_labels(&resp, &mut named_rng(config.seed, &format!("tiebreak:assign:{network}")));
        let mut rng = named_rng(config.seed, &format!("tiebreak:classify:{network}"));
        let verdicts = test_counts[r]
            .iter()
            .zip(&data.test)
            .map(|(counts, img)| classify(counts, &labels, img.label, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        reports.push(summarize(
            &verdicts,
            RunMeta {
                seed: config.seed,
                design: config.design.to_string(),
                top_down: config.top_down.to_string(),
                network: network.to_string(),
                config_hash: config.hash_hex(),
            },
        ));
    }
    Ok(reports)
}

/// Writes `report.csv` and `per_class.csv` into `dir`.
pub fn write_reports(reports: &[EvalReport], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| WtaError::io(format!("creating {}", p.display()), e))
    };
    crate::evaluation::write_reports_csv(reports, open("report.csv")?)?;
    crate::evaluation::write_per_class_csv(reports, open("per_class.csv")?)
}
