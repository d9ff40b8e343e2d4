//! MNIST loading and Poisson population coding of binarized images.
//!
//! Pixel `i` of a field is represented by two sensory neurons: `2i` fires for
//! background and `2i + 1` for stroke. Exactly one of the pair is active per
//! stimulus, and an active neuron spikes independently each timestep with
//! probability `rate * dt`.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::Rng;

use crate::error::{LoadError, Result, WtaError};
use crate::network::NetworkTopology;
use crate::spike::{PopulationId, SpikeVector};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MnistImage {
    /// Row-major 8-bit intensities, 0 = background.
    pub pixels: Vec<u8>,
    pub label: u8,
}

fn read_file(path: &Path) -> Result<Vec<u8>, LoadError> {
    let io = |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(BufReader::new(file)).read_to_end(&mut bytes).map_err(io)?;
    } else {
        BufReader::new(file).read_to_end(&mut bytes).map_err(io)?;
    }
    Ok(bytes)
}

fn header(bytes: &[u8], path: &Path, words: usize, magic: u32) -> Result<Vec<u32>, LoadError> {
    if bytes.len() < 4 * words {
        return Err(LoadError::Truncated {
            path: path.to_path_buf(),
            expected: 4 * words,
            found: bytes.len(),
        });
    }
    let values: Vec<u32> = bytes[..4 * words]
        .chunks_exact(4)
        .map(|w| u32::from_be_bytes([w[0], w[1], w[2], w[3]]))
        .collect();
    if values[0] != magic {
        return Err(LoadError::BadMagic {
            path: path.to_path_buf(),
            found: values[0],
            expected: magic,
        });
    }
    Ok(values)
}

fn payload<'a>(bytes: &'a [u8], path: &Path, offset: usize, len: usize) -> Result<&'a [u8], LoadError> {
    bytes.get(offset..offset + len).ok_or_else(|| LoadError::Truncated {
        path: path.to_path_buf(),
        expected: offset + len,
        found: bytes.len(),
    })
}

/// Reads an IDX image/label pair. Files ending in `.gz` are decompressed.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Vec<MnistImage>, LoadError> {
    let img_bytes = read_file(images)?;
    let lbl_bytes = read_file(labels)?;
    let ih = header(&img_bytes, images, 4, IMAGE_MAGIC)?;
    let lh = header(&lbl_bytes, labels, 2, LABEL_MAGIC)?;
    let (count, rows, cols) = (ih[1] as usize, ih[2] as usize, ih[3] as usize);
    if lh[1] as usize != count {
        return Err(LoadError::CountMismatch {
            images: count,
            labels: lh[1] as usize,
        });
    }
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(LoadError::BadDimensions {
            path: images.to_path_buf(),
            rows,
            cols,
        });
    }
    let pixels = payload(&img_bytes, images, 16, count * IMAGE_PIXELS)?;
    let label_bytes = payload(&lbl_bytes, labels, 8, count)?;
    pixels
        .chunks_exact(IMAGE_PIXELS)
        .zip(label_bytes)
        .map(|(px, &label)| {
            if label > 9 {
                return Err(LoadError::BadLabel {
                    path: labels.to_path_buf(),
                    label,
                });
            }
            Ok(MnistImage {
                pixels: px.to_vec(),
                label,
            })
        })
        .collect()
}

/// Stroke mask: a pixel is stroke iff its intensity is at least `threshold`
/// (thresholds below 1 behave as 1).
pub fn binarize(img: &MnistImage, threshold: u8) -> Vec<bool> {
    let threshold = threshold.max(1);
    img.pixels.iter().map(|&v| v >= threshold).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingParams {
    /// Stimulus length in timesteps.
    pub duration: u64,
    pub rate_hz: f64,
    /// Timestep length in milliseconds.
    pub dt_ms: f64,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams {
            duration: 150,
            rate_hz: 200.0,
            dt_ms: 1.0,
        }
    }
}

impl EncodingParams {
    /// Per-step firing probability of an active neuron.
    pub fn spike_probability(&self) -> Result<f64> {
        let p = self.rate_hz * self.dt_ms / 1000.0;
        if !(0.0..=1.0).contains(&p) {
            return Err(WtaError::config(format!(
                "rate {} Hz at dt {} ms gives spike probability {p}",
                self.rate_hz, self.dt_ms
            )));
        }
        if self.duration == 0 {
            return Err(WtaError::config("stimulus duration must be positive"));
        }
        Ok(p)
    }
}

/// Spike generator for one encoded image over a two-neurons-per-pixel code.
#[derive(Clone, Debug)]
pub struct StimulusStream {
    duration: u64,
    probability: f64,
    active: Vec<usize>,
    elapsed: u64,
}

/// Starts a stimulus for `mask` (one entry per pixel).
pub fn encode(mask: &[bool], params: &EncodingParams) -> Result<StimulusStream> {
    let probability = params.spike_probability()?;
    let active = mask
        .iter()
        .enumerate()
        .map(|(i, &stroke)| 2 * i + usize::from(stroke))
        .collect();
    Ok(StimulusStream {
        duration: params.duration,
        probability,
        active,
        elapsed: 0,
    })
}

impl StimulusStream {
    /// Active neuron indices, one per pixel, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn is_finished(&self) -> bool {
        self.elapsed >= self.duration
    }

    /// Writes the next step's spikes (ascending indices) into `out`; returns
    /// `false` once the stimulus is over. One uniform draw per active neuron.
    pub fn next_step<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<usize>) -> bool {
        out.clear();
        if self.is_finished() {
            return false;
        }
        for &n in &self.active {
            if rng.random::<f64>() < self.probability {
                out.push(n);
            }
        }
        self.elapsed += 1;
        true
    }
}

/// Maps field-level spike indices onto the sensory populations of a topology
/// whose populations carry cube coordinates.
#[derive(Clone, Debug)]
pub struct SensoryRouter {
    /// Per field, per field neuron: `(population, local index)`.
    routes: Vec<Vec<Option<(usize, usize)>>>,
    populations: usize,
}

impl SensoryRouter {
    /// Fields are numbered `0..fields`; every pixel of a `height x width`
    /// field may be covered by at most one population.
    pub fn new(topology: &NetworkTopology, height: usize, width: usize) -> Result<SensoryRouter> {
        let fields = topology
            .sensory
            .iter()
            .filter_map(|s| s.cube.map(|c| c.field + 1))
            .max()
            .unwrap_or(0);
        let mut routes = vec![vec![None; 2 * height * width]; fields];
        for (pi, spec) in topology.sensory.iter().enumerate() {
            let Some(cube) = spec.cube else { continue };
            if cube.row + cube.height > height || cube.col + cube.width > width {
                return Err(WtaError::config(format!("cube of '{}' exceeds the input field", spec.name)));
            }
            for r in 0..cube.height {
                for c in 0..cube.width {
                    let local = r * cube.width + c;
                    let pixel = (cube.row + r) * width + cube.col + c;
                    for side in 0..2 {
                        let slot = &mut routes[cube.field][2 * pixel + side];
                        if slot.is_some() {
                            return Err(WtaError::config(format!("pixel {pixel} covered twice in field {}", cube.field)));
                        }
                        *slot = Some((pi, 2 * local + side));
                    }
                }
            }
        }
        Ok(SensoryRouter {
            routes,
            populations: topology.sensory.len(),
        })
    }

    pub fn fields(&self) -> usize {
        self.routes.len()
    }

    pub fn populations(&self) -> usize {
        self.populations
    }

    /// Empty spike vectors for every sensory population.
    pub fn blank(&self, t: u64) -> Vec<SpikeVector> {
        (0..self.populations).map(|i| SpikeVector::empty(PopulationId(i), t)).collect()
    }

    /// Clears `out` for timestep `t`.
    pub fn reset(&self, out: &mut [SpikeVector], t: u64) {
        for s in out.iter_mut() {
            s.reset(t);
        }
    }

    /// Adds the field-level `fired` indices (ascending) of `field` to `out`.
    pub fn route(&self, field: usize, fired: &[usize], out: &mut [SpikeVector]) {
        let table = &self.routes[field];
        for &n in fired {
            if let Some((pop, local)) = table[n] {
                out[pop].push(local);
            }
        }
    }
}
