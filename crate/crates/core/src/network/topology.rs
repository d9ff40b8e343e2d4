//! Tree-shaped arrangements of circuits and sensory populations.

use std::collections::{BTreeMap, BTreeSet};

use crate::circuit::CircuitParams;
use crate::error::{Result, WtaError};

/// Rectangle of pixels of one input field covered by a sensory population.
///
/// Pixel `(r, c)` of the rectangle owns neurons `2p` (background side) and
/// `2p + 1` (stroke side) with `p = (r - row) * width + (c - col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cube {
    pub field: usize,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Cube {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Neuron count of the two-neurons-per-pixel population code.
    pub fn neurons(&self) -> usize {
        2 * self.pixels()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorySpec {
    pub name: String,
    pub size: usize,
    pub cube: Option<Cube>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub name: String,
    pub params: CircuitParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Sensory(usize),
    Circuit(usize),
}

/// All bottom-up input of one circuit; the sources are concatenated, in
/// order, into the columns of its weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UpEdge {
    pub target: usize,
    pub sources: Vec<Source>,
}

/// Feedback from `parent` to `child`, mirroring the bottom-up edge between
/// them with its own `K_child x K_parent` weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DownEdge {
    pub parent: usize,
    pub child: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NetworkTopology {
    pub sensory: Vec<SensorySpec>,
    pub circuits: Vec<CircuitSpec>,
    pub up_edges: Vec<UpEdge>,
    pub down_edges: Vec<DownEdge>,
}

impl NetworkTopology {
    pub fn source_size(&self, source: Source) -> usize {
        match source {
            Source::Sensory(i) => self.sensory[i].size,
            Source::Circuit(i) => self.circuits[i].params.k,
        }
    }

    pub fn source_name(&self, source: Source) -> &str {
        match source {
            Source::Sensory(i) => &self.sensory[i].name,
            Source::Circuit(i) => &self.circuits[i].name,
        }
    }

    pub fn up_edge(&self, circuit: usize) -> Option<&UpEdge> {
        self.up_edges.iter().find(|e| e.target == circuit)
    }

    /// Shape `(K, M)` of a circuit's bottom-up matrix; `M = 0` without inputs.
    pub fn up_shape(&self, circuit: usize) -> (usize, usize) {
        let cols = self
            .up_edge(circuit)
            .map_or(0, |e| e.sources.iter().map(|&s| self.source_size(s)).sum());
        (self.circuits[circuit].params.k, cols)
    }

    pub fn down_shape(&self, edge: &DownEdge) -> (usize, usize) {
        (self.circuits[edge.child].params.k, self.circuits[edge.parent].params.k)
    }

    /// The circuit a given circuit feeds into, if any.
    pub fn parent_of(&self, circuit: usize) -> Option<usize> {
        self.up_edges
            .iter()
            .find(|e| e.sources.contains(&Source::Circuit(circuit)))
            .map(|e| e.target)
    }

    pub fn down_edge_into(&self, child: usize) -> Option<&DownEdge> {
        self.down_edges.iter().find(|e| e.child == child)
    }

    pub fn circuit_index(&self, name: &str) -> Option<usize> {
        self.circuits.iter().position(|c| c.name == name)
    }

    pub fn sensory_index(&self, name: &str) -> Option<usize> {
        self.sensory.iter().position(|s| s.name == name)
    }

    /// Circuits that feed no other circuit.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.circuits.len()).filter(|&c| self.parent_of(c).is_none()).collect()
    }

    /// Number of circuits between `circuit` and the sensory layer, counting
    /// itself (layer-1 circuits have depth 1).
    pub fn depth(&self, circuit: usize) -> usize {
        let below = self.up_edge(circuit).map_or(0, |e| {
            e.sources
                .iter()
                .map(|&s| match s {
                    Source::Circuit(c) => self.depth(c),
                    Source::Sensory(_) => 0,
                })
                .max()
                .unwrap_or(0)
        });
        below + 1
    }

    /// Adds a feedback edge mirroring every circuit-to-circuit bottom-up link.
    pub fn with_top_down(mut self) -> Self {
        self.down_edges.clear();
        for edge in &self.up_edges {
            for &src in &edge.sources {
                if let Source::Circuit(child) = src {
                    self.down_edges.push(DownEdge {
                        parent: edge.target,
                        child,
                    });
                }
            }
        }
        self.down_edges.sort_by_key(|e| (e.child, e.parent));
        self
    }

    /// Checks names, the forest shape, mirrored feedback, and parameters.
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for name in self
            .sensory
            .iter()
            .map(|s| &s.name)
            .chain(self.circuits.iter().map(|c| &c.name))
        {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(WtaError::config(format!("invalid population name '{name}'")));
            }
            if !names.insert(name.as_str()) {
                return Err(WtaError::config(format!("duplicate population name '{name}'")));
            }
        }
        for s in &self.sensory {
            if s.size == 0 {
                return Err(WtaError::config(format!("sensory population '{}' is empty", s.name)));
            }
            if let Some(cube) = s.cube {
                if cube.neurons() != s.size {
                    return Err(WtaError::config(format!(
                        "sensory population '{}' has {} neurons but its cube needs {}",
                        s.name,
                        s.size,
                        cube.neurons()
                    )));
                }
            }
        }
        for c in &self.circuits {
            c.params.validate()?;
        }

        let mut targets = BTreeSet::new();
        let mut used = BTreeSet::new();
        for edge in &self.up_edges {
            if edge.target >= self.circuits.len() {
                return Err(WtaError::config("up-edge targets an unknown circuit"));
            }
            if !targets.insert(edge.target) {
                return Err(WtaError::config(format!(
                    "circuit '{}' has more than one up-edge",
                    self.circuits[edge.target].name
                )));
            }
            if edge.sources.is_empty() {
                return Err(WtaError::config("up-edge without sources"));
            }
            for &src in &edge.sources {
                let in_range = match src {
                    Source::Sensory(i) => i < self.sensory.len(),
                    Source::Circuit(i) => i < self.circuits.len() && i != edge.target,
                };
                if !in_range {
                    return Err(WtaError::config("up-edge references an unknown or self source"));
                }
                if !used.insert(src) {
                    return Err(WtaError::config(format!(
                        "'{}' feeds forward into more than one circuit",
                        self.source_name(src)
                    )));
                }
            }
        }
        // Every circuit has at most one parent (checked above), so walking
        // parent links from each circuit must terminate within n steps.
        for start in 0..self.circuits.len() {
            let mut at = start;
            for _ in 0..=self.circuits.len() {
                match self.parent_of(at) {
                    Some(p) => at = p,
                    None => break,
                }
                if at == start {
                    return Err(WtaError::config("bottom-up edges contain a cycle"));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for edge in &self.down_edges {
            if edge.parent >= self.circuits.len() || edge.child >= self.circuits.len() {
                return Err(WtaError::config("down-edge references an unknown circuit"));
            }
            if self.parent_of(edge.child) != Some(edge.parent) {
                return Err(WtaError::config(format!(
                    "down-edge {} -> {} does not mirror a bottom-up edge",
                    self.circuits[edge.parent].name, self.circuits[edge.child].name
                )));
            }
            if !seen.insert(edge.child) {
                return Err(WtaError::config("duplicate down-edge"));
            }
        }
        Ok(())
    }

    /// Keeps only the circuits and sensory populations selected by `keep`,
    /// dropping edges that cross the boundary.
    pub fn subset(&self, keep: impl Fn(&str) -> bool) -> Result<NetworkTopology> {
        let sensory_map: BTreeMap<usize, usize> = self
            .sensory
            .iter()
            .enumerate()
            .filter(|(_, s)| keep(&s.name))
            .enumerate()
            .map(|(new, (old, _))| (old, new))
            .collect();
        let circuit_map: BTreeMap<usize, usize> = self
            .circuits
            .iter()
            .enumerate()
            .filter(|(_, c)| keep(&c.name))
            .enumerate()
            .map(|(new, (old, _))| (old, new))
            .collect();
        let map_src = |s: &Source| match *s {
            Source::Sensory(i) => sensory_map.get(&i).map(|&j| Source::Sensory(j)),
            Source::Circuit(i) => circuit_map.get(&i).map(|&j| Source::Circuit(j)),
        };
        let mut up_edges = Vec::new();
        for edge in &self.up_edges {
            let Some(&target) = circuit_map.get(&edge.target) else {
                continue;
            };
            let sources: Option<Vec<Source>> = edge.sources.iter().map(map_src).collect();
            match sources {
                Some(sources) => up_edges.push(UpEdge { target, sources }),
                None => {
                    return Err(WtaError::config(format!(
                        "subset keeps '{}' but not all of its inputs",
                        self.circuits[edge.target].name
                    )))
                }
            }
        }
        let down_edges = self
            .down_edges
            .iter()
            .filter_map(|e| {
                Some(DownEdge {
                    parent: *circuit_map.get(&e.parent)?,
                    child: *circuit_map.get(&e.child)?,
                })
            })
            .collect();
        let topo = NetworkTopology {
            sensory: sensory_map.keys().map(|&i| self.sensory[i].clone()).collect(),
            circuits: circuit_map.keys().map(|&i| self.circuits[i].clone()).collect(),
            up_edges,
            down_edges,
        };
        topo.validate()?;
        Ok(topo)
    }
}

/// Partition of one input field into rectangular blocks, each feeding its
/// own first-layer circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct SensoryGrid {
    pub prefix: String,
    pub field: usize,
    pub height: usize,
    pub width: usize,
    pub block_height: usize,
    pub block_width: usize,
}

impl SensoryGrid {
    /// 28x28 MNIST field split into 16 blocks of 7x7.
    pub fn mnist(prefix: &str, field: usize) -> Self {
        SensoryGrid {
            prefix: prefix.to_string(),
            field,
            height: 28,
            width: 28,
            block_height: 7,
            block_width: 7,
        }
    }

    /// Blocks in row-major order.
    pub fn cubes(&self) -> Result<Vec<Cube>> {
        if self.block_height == 0
            || self.block_width == 0
            || !self.height.is_multiple_of(self.block_height)
            || !self.width.is_multiple_of(self.block_width)
        {
            return Err(WtaError::config(format!(
                "{}x{} field is not divisible into {}x{} blocks",
                self.height, self.width, self.block_height, self.block_width
            )));
        }
        let mut cubes = Vec::new();
        for by in 0..self.height / self.block_height {
            for bx in 0..self.width / self.block_width {
                cubes.push(Cube {
                    field: self.field,
                    row: by * self.block_height,
                    col: bx * self.block_width,
                    height: self.block_height,
                    width: self.block_width,
                });
            }
        }
        Ok(cubes)
    }

    pub fn sensory_name(&self, i: usize) -> String {
        format!("{}.s{i}", self.prefix)
    }

    pub fn layer1_name(&self, i: usize) -> String {
        format!("{}.l1.{i}", self.prefix)
    }

    pub fn output_name(&self) -> String {
        format!("{}.out", self.prefix)
    }
}

fn with_k(template: &CircuitParams, k: usize) -> CircuitParams {
    CircuitParams {
        k,
        ..template.clone()
    }
}

/// Two-layer network: one circuit per block of `grid`, all feeding a single
/// output circuit.
pub fn build_hierarchical(
    grid: &SensoryGrid,
    k_h: usize,
    k_o: usize,
    template: &CircuitParams,
) -> Result<NetworkTopology> {
    let cubes = grid.cubes()?;
    let mut topo = NetworkTopology::default();
    for (i, cube) in cubes.iter().enumerate() {
        topo.sensory.push(SensorySpec {
            name: grid.sensory_name(i),
            size: cube.neurons(),
            cube: Some(*cube),
        });
        topo.circuits.push(CircuitSpec {
            name: grid.layer1_name(i),
            params: with_k(template, k_h),
        });
        topo.up_edges.push(UpEdge {
            target: i,
            sources: vec![Source::Sensory(i)],
        });
    }
    let out = topo.circuits.len();
    topo.circuits.push(CircuitSpec {
        name: grid.output_name(),
        params: with_k(template, k_o),
    });
    topo.up_edges.push(UpEdge {
        target: out,
        sources: (0..cubes.len()).map(Source::Circuit).collect(),
    });
    topo.validate()?;
    Ok(topo)
}

/// Joins the output circuits of two disjoint networks with one extra circuit
/// of `k_f` neurons. Feedback edges of the inputs are kept.
pub fn build_integration(
    h_a: &NetworkTopology,
    h_b: &NetworkTopology,
    k_f: usize,
    template: &CircuitParams,
    top_name: &str,
) -> Result<NetworkTopology> {
    let names_a: BTreeSet<&str> = h_a
        .sensory
        .iter()
        .map(|s| s.name.as_str())
        .chain(h_a.circuits.iter().map(|c| c.name.as_str()))
        .collect();
    if let Some(clash) = h_b
        .sensory
        .iter()
        .map(|s| s.name.as_str())
        .chain(h_b.circuits.iter().map(|c| c.name.as_str()))
        .find(|n| names_a.contains(n))
    {
        return Err(WtaError::config(format!("networks overlap in '{clash}'")));
    }
    let root = |t: &NetworkTopology| -> Result<usize> {
        match t.roots().as_slice() {
            [r] => Ok(*r),
            _ => Err(WtaError::config("each integrated network needs exactly one output circuit")),
        }
    };
    let (root_a, root_b) = (root(h_a)?, root(h_b)?);

    let so = h_a.sensory.len();
    let co = h_a.circuits.len();
    let shift = |s: &Source| match *s {
        Source::Sensory(i) => Source::Sensory(i + so),
        Source::Circuit(i) => Source::Circuit(i + co),
    };
    let mut topo = h_a.clone();
    topo.sensory.extend(h_b.sensory.iter().cloned());
    topo.circuits.extend(h_b.circuits.iter().cloned());
    topo.up_edges.extend(h_b.up_edges.iter().map(|e| UpEdge {
        target: e.target + co,
        sources: e.sources.iter().map(shift).collect(),
    }));
    topo.down_edges.extend(h_b.down_edges.iter().map(|e| DownEdge {
        parent: e.parent + co,
        child: e.child + co,
    }));
    let top = topo.circuits.len();
    topo.circuits.push(CircuitSpec {
        name: top_name.to_string(),
        params: with_k(template, k_f),
    });
    topo.up_edges.push(UpEdge {
        target: top,
        sources: vec![Source::Circuit(root_a), Source::Circuit(root_b + co)],
    });
    if !h_a.down_edges.is_empty() || !h_b.down_edges.is_empty() {
        topo = topo.with_top_down();
    }
    topo.validate()?;
    Ok(topo)
}
