//! Receptive-field images of the bottom-up weights.
//!
//! A layer-1 neuron's map holds, per pixel of its cube, the effective weight
//! from the stroke-side neuron minus that from the background-side neuron.
//! A higher neuron's map is the sum over its child circuits of the child
//! neurons' maps weighted by the softmax of its effective weights to them.
//! Each circuit is written as one 8-bit PGM mosaic (one tile per neuron)
//! with a text sidecar giving the linear scale.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::circuit::posterior_snapshot;
use crate::encoding::IMAGE_SIDE;
use crate::error::{Result, WtaError};
use crate::network::{Network, Source};

/// Which circuits to export.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSelector {
    All,
    /// Circuits at this depth (1 = fed by sensory populations).
    Depth(usize),
    Circuit(String),
}

impl FromStr for LayerSelector {
    type Err = WtaError;

    /// `all`, `layer<N>`, or a circuit name.
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(LayerSelector::All);
        }
        if let Some(n) = s.strip_prefix("layer") {
            return n
                .parse()
                .ok()
                .filter(|&d| d >= 1)
                .map(LayerSelector::Depth)
                .ok_or_else(|| WtaError::config(format!("bad layer selector '{s}'")));
        }
        Ok(LayerSelector::Circuit(s.to_string()))
    }
}

/// Maps of every neuron of one circuit, over `fields` input fields of
/// `IMAGE_SIDE x IMAGE_SIDE` pixels each (field-major, row-major).
#[derive(Clone, Debug)]
struct CircuitMaps {
    maps: Vec<Vec<f64>>,
    /// Pixels (field, row, col) with non-zero support.
    support: Vec<bool>,
}

fn field_pixels() -> usize {
    IMAGE_SIDE * IMAGE_SIDE
}

fn compute_maps(net: &Network, circuit: usize, fields: usize, cache: &mut Vec<Option<CircuitMaps>>) -> Result<()> {
    if cache[circuit].is_some() {
        return Ok(());
    }
    let topo = net.topology();
    let k = net.params(circuit).k;
    let size = fields * field_pixels();
    let mut maps = vec![vec![0.0; size]; k];
    let mut support = vec![false; size];
    let domain = net.params(circuit).domain();
    let w = net.w_up(circuit);
    if let Some(edge) = topo.up_edge(circuit) {
        let mut offset = 0;
        for &src in &edge.sources {
            let width = topo.source_size(src);
            match src {
                Source::Sensory(s) => {
                    let Some(cube) = topo.sensory[s].cube else {
                        offset += width;
                        continue;
                    };
                    for r in 0..cube.height {
                        for c in 0..cube.width {
                            let p = r * cube.width + c;
                            let px = cube.field * field_pixels() + (cube.row + r) * IMAGE_SIDE + cube.col + c;
                            support[px] = true;
                            for (n, map) in maps.iter_mut().enumerate() {
                                let bg = domain.effective(w.get(n, offset + 2 * p));
                                let stroke = domain.effective(w.get(n, offset + 2 * p + 1));
                                map[px] += stroke - bg;
                            }
                        }
                    }
                }
                Source::Circuit(child) => {
                    compute_maps(net, child, fields, cache)?;
                    let below = cache[child].as_ref().expect("computed above");
                    for (px, s) in below.support.iter().enumerate() {
                        support[px] |= s;
                    }
                    for (n, map) in maps.iter_mut().enumerate() {
                        let eff: Vec<f64> = w.row(n)[offset..offset + width]
                            .iter()
                            .map(|&v| domain.effective(v))
                            .collect();
                        for (j, share) in posterior_snapshot(&eff).into_iter().enumerate() {
                            for (m, &v) in map.iter_mut().zip(&below.maps[j]) {
                                *m += share * v;
                            }
                        }
                    }
                }
            }
            offset += width;
        }
    }
    cache[circuit] = Some(CircuitMaps { maps, support });
    Ok(())
}

/// Bounding box `(row0, col0, height, width)` of the support, with all
/// supported fields placed side by side.
fn tile_geometry(support: &[bool], fields: usize) -> Option<(Vec<usize>, usize, usize, usize, usize)> {
    let mut used_fields = Vec::new();
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
    for f in 0..fields {
        let mut any = false;
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                if support[f * field_pixels() + r * IMAGE_SIDE + c] {
                    any = true;
                    r0 = r0.min(r);
                    c0 = c0.min(c);
                    r1 = r1.max(r + 1);
                    c1 = c1.max(c + 1);
                }
            }
        }
        if any {
            used_fields.push(f);
        }
    }
    if used_fields.is_empty() {
        return None;
    }
    Some((used_fields, r0, c0, r1 - r0, c1 - c0))
}

/// Grayscale image with its value range.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub min: f64,
    pub max: f64,
}

impl WeightImage {
    /// Linear map of `values` onto 0..=255; a constant image is mid-gray.
    pub fn from_values(width: usize, height: usize, values: &[f64], mask: &[bool]) -> WeightImage {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (&v, &m) in values.iter().zip(mask) {
            if m {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !min.is_finite() {
            (min, max) = (0.0, 0.0);
        }
        let pixels = values
            .iter()
            .zip(mask)
            .map(|(&v, &m)| {
                if !m {
                    0
                } else if max > min {
                    ((v - min) / (max - min) * 255.0).round() as u8
                } else {
                    128
                }
            })
            .collect();
        WeightImage {
            width,
            height,
            pixels,
            min,
            max,
        }
    }

    /// Value represented by a pixel byte.
    pub fn value(&self, byte: u8) -> f64 {
        if self.max > self.min {
            self.min + byte as f64 / 255.0 * (self.max - self.min)
        } else {
            self.min
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Mosaic of every neuron's map of one circuit, tiles separated by a
/// one-pixel gap.
pub fn circuit_image(net: &Network, circuit: usize) -> Result<(WeightImage, String)> {
    let fields = net
        .topology()
        .sensory
        .iter()
        .filter_map(|s| s.cube.map(|c| c.field + 1))
        .max()
        .unwrap_or(0);
    let mut cache = vec![None; net.circuit_count()];
    compute_maps(net, circuit, fields, &mut cache)?;
    let maps = cache[circuit].take().expect("computed");
    let name = &net.topology().circuits[circuit].name;
    let Some((used, r0, c0, th, tw_field)) = tile_geometry(&maps.support, fields) else {
        return Err(WtaError::config(format!("circuit '{name}' has no sensory receptive field")));
    };
    let tw = tw_field * used.len();
    let k = maps.maps.len();
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let width = cols * (tw + 1) - 1;
    let height = rows * (th + 1) - 1;
    let mut values = vec![0.0; width * height];
    let mut mask = vec![false; width * height];
    for (n, map) in maps.maps.iter().enumerate() {
        let (ty, tx) = (n / cols * (th + 1), n % cols * (tw + 1));
        for (fi, &f) in used.iter().enumerate() {
            for r in 0..th {
                for c in 0..tw_field {
                    let src = f * field_pixels() + (r0 + r) * IMAGE_SIDE + c0 + c;
                    let dst = (ty + r) * width + tx + fi * tw_field + c;
                    values[dst] = map[src];
                    mask[dst] = true;
                }
            }
        }
    }
    let image = WeightImage::from_values(width, height, &values, &mask);
    let mut sidecar = String::new();
    writeln!(sidecar, "circuit {name}").unwrap();
    writeln!(sidecar, "min {}", image.min).unwrap();
    writeln!(sidecar, "max {}", image.max).unwrap();
    writeln!(sidecar, "neurons {k}").unwrap();
    writeln!(sidecar, "grid {cols}x{rows}").unwrap();
    writeln!(sidecar, "tile {tw}x{th}").unwrap();
    writeln!(sidecar, "gap 1").unwrap();
    writeln!(sidecar, "value = min + pixel / 255 * (max - min)").unwrap();
    Ok((image, sidecar))
}

fn selected(net: &Network, selector: &LayerSelector) -> Result<Vec<usize>> {
    let topo = net.topology();
    let all = 0..topo.circuits.len();
    let picked: Vec<usize> = match selector {
        LayerSelector::All => all.collect(),
        LayerSelector::Depth(d) => all.filter(|&c| topo.depth(c) == *d).collect(),
        LayerSelector::Circuit(name) => topo.circuit_index(name).into_iter().collect(),
    };
    if picked.is_empty() {
        return Err(WtaError::config(format!("selector {selector:?} matches no circuit")));
    }
    Ok(picked)
}

/// Writes `<circuit>.pgm` and `<circuit>.txt` for every selected circuit.
pub fn export_weight_maps(net: &Network, selector: &LayerSelector, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| WtaError::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for c in selected(net, selector)? {
        let (image, sidecar) = circuit_image(net, c)?;
        let name = &net.topology().circuits[c].name;
        let pgm = dir.join(format!("{name}.pgm"));
        let txt = dir.join(format!("{name}.txt"));
        std::fs::write(&pgm, image.to_pgm()).map_err(|e| WtaError::io(format!("writing {}", pgm.display()), e))?;
        std::fs::write(&txt, sidecar).map_err(|e| WtaError::io(format!("writing {}", txt.display()), e))?;
        written.push(pgm);
    }
    Ok(written)
}
