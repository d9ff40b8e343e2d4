//! Binary checkpoints, little-endian throughout.
//!
//! ```text
//! magic        8 bytes  "WTACKPT1"
//! version      u32
//! config hash  32 bytes (SHA-256)
//! config       u64 length + UTF-8 TOML
//! stimuli_seen u64
//! time         u64      global timestep
//! sample pos   u32 count + u128 each (one per circuit)
//! encode pos   u32 count + u128 each (one per input field)
//! circuits     u32 count, then per circuit in topology order:
//!   name       u32 length + UTF-8
//!   psi        f64
//!   counts     u64 K + u64 each
//!   w_up       u64 rows, u64 cols, rows*cols f64 row-major
//!   w_down     u8 flag, then as w_up when the flag is 1
//! ```

use std::path::Path;

use crate::circuit::WeightMatrix;
use crate::error::{Result, WtaError};
use crate::runner::config::{hex, RunConfig};
use crate::runner::session::Session;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WTACKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitRecord {
    pub name: String,
    pub psi: f64,
    pub spike_counts: Vec<u64>,
    pub w_up: WeightMatrix,
    pub w_down: Option<WeightMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub config_text: String,
    pub stimuli_seen: u64,
    pub time: u64,
    pub sample_positions: Vec<u128>,
    pub encode_positions: Vec<u128>,
    pub circuits: Vec<CircuitRecord>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(WtaError::Checkpoint(format!("truncated at byte {}", self.at)));
        };
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.bytes.len() - self.at) as u64 {
            return Err(WtaError::Checkpoint(format!("implausible {what} length {n}")));
        }
        Ok(n as usize)
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| WtaError::Checkpoint("invalid UTF-8".into()))
    }

    fn matrix(&mut self) -> Result<WeightMatrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n.saturating_mul(8) <= self.bytes.len() - self.at)
            .ok_or_else(|| WtaError::Checkpoint(format!("implausible matrix shape {rows}x{cols}")))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        WeightMatrix::from_vec(rows, cols, data).map_err(|e| WtaError::Checkpoint(e.to_string()))
    }
}

fn put_matrix(out: &mut Vec<u8>, w: &WeightMatrix) {
    out.extend_from_slice(&(w.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(w.cols() as u64).to_le_bytes());
    for v in w.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn capture(config: &RunConfig, session: &Session, stimuli_seen: u64) -> Checkpoint {
        let net = &session.network;
        let circuits = (0..net.circuit_count())
            .map(|ci| CircuitRecord {
                name: net.topology().circuits[ci].name.clone(),
                psi: net.state(ci).psi,
                spike_counts: net.state(ci).spike_counts.clone(),
                w_up: net.w_up(ci).clone(),
                w_down: net.w_down(ci).cloned(),
            })
            .collect();
        Checkpoint {
            config_hash: config.hash(),
            config_text: config.to_toml(),
            stimuli_seen,
            time: net.time(),
            sample_positions: net.rng_positions(),
            encode_positions: session.encode_positions(),
            circuits,
        }
    }

    pub fn check_hash(&self, config: &RunConfig) -> Result<()> {
        if self.config_hash != config.hash() {
            return Err(WtaError::HashMismatch {
                stored: hex(&self.config_hash),
                current: config.hash_hex(),
            });
        }
        Ok(())
    }

    /// Rebuilds the session of `config` in the state this checkpoint holds.
    pub fn restore(&self, config: &RunConfig) -> Result<Session> {
        self.check_hash(config)?;
        let mut session = Session::new(config)?;
        let net = &mut session.network;
        if self.circuits.len() != net.circuit_count() {
            return Err(WtaError::Checkpoint(format!(
                "{} circuits stored, topology has {}",
                self.circuits.len(),
                net.circuit_count()
            )));
        }
        for (ci, rec) in self.circuits.iter().enumerate() {
            if rec.name != net.topology().circuits[ci].name {
                return Err(WtaError::Checkpoint(format!("circuit {ci} is '{}' in the checkpoint", rec.name)));
            }
            let shape_ok = rec.w_up.shape() == net.w_up(ci).shape()
                && rec.w_down.as_ref().map(WeightMatrix::shape) == net.w_down(ci).map(WeightMatrix::shape)
                && rec.spike_counts.len() == net.params(ci).k;
            if !shape_ok {
                return Err(WtaError::Checkpoint(format!("shape mismatch in circuit '{}'", rec.name)));
            }
            *net.w_up_mut(ci) = rec.w_up.clone();
            if let (Some(dst), Some(src)) = (net.w_down_mut(ci), &rec.w_down) {
                *dst = src.clone();
            }
            let state = net.state_mut(ci);
            state.psi = rec.psi;
            state.spike_counts = rec.spike_counts.clone();
        }
        net.set_time(self.time);
        net.set_rng_positions(&self.sample_positions)?;
        session.set_encode_positions(&self.encode_positions)?;
        Ok(session)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&(self.config_text.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config_text.as_bytes());
        out.extend_from_slice(&self.stimuli_seen.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for positions in [&self.sample_positions, &self.encode_positions] {
            out.extend_from_slice(&(positions.len() as u32).to_le_bytes());
            for p in positions {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.circuits.len() as u32).to_le_bytes());
        for c in &self.circuits {
            out.extend_from_slice(&(c.name.len() as u32).to_le_bytes());
            out.extend_from_slice(c.name.as_bytes());
            out.extend_from_slice(&c.psi.to_le_bytes());
            out.extend_from_slice(&(c.spike_counts.len() as u64).to_le_bytes());
            for n in &c.spike_counts {
                out.extend_from_slice(&n.to_le_bytes());
            }
            put_matrix(&mut out, &c.w_up);
            match &c.w_down {
                Some(w) => {
                    out.push(1);
                    put_matrix(&mut out, w);
                }
                None => out.push(0),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(WtaError::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(WtaError::Checkpoint(format!("unsupported version {version}")));
        }
        let config_hash = r.array()?;
        let n = r.len("config")?;
        let config_text = r.string(n)?;
        let stimuli_seen = r.u64()?;
        let time = r.u64()?;
        let mut positions = || -> Result<Vec<u128>> {
            let n = r.u32()?;
            (0..n).map(|_| r.u128()).collect()
        };
        let sample_positions = positions()?;
        let encode_positions = positions()?;
        let n = r.u32()?;
        let mut circuits = Vec::new();
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name = r.string(len)?;
            let psi = r.f64()?;
            let k = r.len("spike count")?;
            let spike_counts = (0..k).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let w_up = r.matrix()?;
            let w_down = match r.u8()? {
                0 => None,
                1 => Some(r.matrix()?),
                other => return Err(WtaError::Checkpoint(format!("bad top-down flag {other}"))),
            };
            circuits.push(CircuitRecord {
                name,
                psi,
                spike_counts,
                w_up,
                w_down,
            });
        }
        if r.at != bytes.len() {
            return Err(WtaError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        Ok(Checkpoint {
            config_hash,
            config_text,
            stimuli_seen,
            time,
            sample_positions,
            encode_positions,
            circuits,
        })
    }

    /// Writes atomically (temporary file, then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| WtaError::io(format!("writing {}", tmp.display()), e))?;
        std::fs::rename(&tmp, path).map_err(|e| WtaError::io(format!("renaming to {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| WtaError::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }

    /// The configuration the checkpoint was written with.
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_toml(&self.config_text)
    }
}
