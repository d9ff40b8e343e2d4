//! Tree-structured generative models and their translation into circuits.
//!
//! Each hidden variable becomes a circuit with one neuron per value; each
//! observed variable is a population code of `cardinality` sensory neurons.
//! Children feed their parent, so evidence flows from the leaves upward.

use std::collections::{BTreeMap, BTreeSet};

use crate::circuit::CircuitParams;
use crate::error::{Result, WtaError};
use crate::network::topology::{CircuitSpec, Cube, NetworkTopology, SensoryGrid, SensorySpec, Source, UpEdge};

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    pub observed: bool,
}

/// Observed variables whose population codes are concatenated, in order,
/// into one sensory population.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub population: String,
    pub variables: Vec<String>,
    pub cube: Option<Cube>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelSpec {
    pub variables: Vec<Variable>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(String, String)>,
    pub bindings: Vec<Binding>,
}

impl ModelSpec {
    pub fn hidden(&mut self, name: &str, cardinality: usize) -> &mut Self {
        self.variables.push(Variable {
            name: name.to_string(),
            cardinality,
            observed: false,
        });
        self
    }

    pub fn observed(&mut self, name: &str, cardinality: usize) -> &mut Self {
        self.variables.push(Variable {
            name: name.to_string(),
            cardinality,
            observed: true,
        });
        self
    }

    pub fn edge(&mut self, parent: &str, child: &str) -> &mut Self {
        self.edges.push((parent.to_string(), child.to_string()));
        self
    }

    pub fn bind(&mut self, population: &str, variables: &[&str], cube: Option<Cube>) -> &mut Self {
        self.bindings.push(Binding {
            population: population.to_string(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            cube,
        });
        self
    }

    /// MNIST model: one digit variable over 16 patch variables, each patch
    /// over its 49 binary pixels.
    pub fn mnist(grid: &SensoryGrid, k_h: usize, k_o: usize) -> Result<ModelSpec> {
        let mut spec = ModelSpec::default();
        spec.hidden(&grid.output_name(), k_o);
        for (i, cube) in grid.cubes()?.into_iter().enumerate() {
            let patch = grid.layer1_name(i);
            spec.hidden(&patch, k_h).edge(&grid.output_name(), &patch);
            let pixels: Vec<String> = (0..cube.pixels()).map(|p| format!("{patch}.x{p}")).collect();
            for px in &pixels {
                spec.observed(px, 2).edge(&patch, px);
            }
            let refs: Vec<&str> = pixels.iter().map(String::as_str).collect();
            spec.bind(&grid.sensory_name(i), &refs, Some(cube));
        }
        Ok(spec)
    }
}

/// One circuit per hidden variable (sized by `neurons_per_variable`, or its
/// cardinality when absent), in post-order so children precede parents.
pub fn build_from_model(
    spec: &ModelSpec,
    neurons_per_variable: &BTreeMap<String, usize>,
    template: &CircuitParams,
) -> Result<NetworkTopology> {
    let mut vars: BTreeMap<&str, &Variable> = BTreeMap::new();
    for v in &spec.variables {
        if vars.insert(&v.name, v).is_some() {
            return Err(WtaError::config(format!("duplicate variable '{}'", v.name)));
        }
        if v.cardinality == 0 {
            return Err(WtaError::config(format!("variable '{}' has no values", v.name)));
        }
    }
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    for (p, c) in &spec.edges {
        let (Some(pv), Some(_)) = (vars.get(p.as_str()), vars.get(c.as_str())) else {
            return Err(WtaError::config(format!("edge {p} -> {c} names an unknown variable")));
        };
        if pv.observed {
            return Err(WtaError::config(format!("observed variable '{p}' cannot have children")));
        }
        if parent.insert(c, p).is_some() {
            return Err(WtaError::config(format!("variable '{c}' has more than one parent")));
        }
        children.entry(p).or_default().push(c);
    }
    for v in &spec.variables {
        let mut seen = BTreeSet::new();
        let mut at = v.name.as_str();
        while let Some(&p) = parent.get(at) {
            if !seen.insert(at) {
                return Err(WtaError::config("model graph contains a cycle"));
            }
            at = p;
        }
        if !v.observed && children.contains_key(v.name.as_str()) && v.cardinality < 2 {
            return Err(WtaError::config(format!("hidden variable '{}' needs at least two values", v.name)));
        }
    }

    let mut binding_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, b) in spec.bindings.iter().enumerate() {
        for v in &b.variables {
            match vars.get(v.as_str()) {
                Some(var) if var.observed => {}
                _ => return Err(WtaError::config(format!("binding '{}' names non-observed '{v}'", b.population))),
            }
            if binding_of.insert(v, i).is_some() {
                return Err(WtaError::config(format!("variable '{v}' bound twice")));
            }
        }
    }

    fn post_order<'a>(v: &'a str, children: &BTreeMap<&'a str, Vec<&'a str>>, out: &mut Vec<&'a str>) {
        for &c in children.get(v).map(Vec::as_slice).unwrap_or(&[]) {
            post_order(c, children, out);
        }
        out.push(v);
    }
    let mut order = Vec::new();
    for v in &spec.variables {
        if !parent.contains_key(v.name.as_str()) {
            post_order(&v.name, &children, &mut order);
        }
    }
    let hidden: Vec<&str> = order.into_iter().filter(|v| !vars[v].observed).collect();
    let circuit_of: BTreeMap<&str, usize> = hidden.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let mut topo = NetworkTopology::default();
    let mut sensory_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &h in &hidden {
        let k = neurons_per_variable.get(h).copied().unwrap_or(vars[h].cardinality);
        topo.circuits.push(CircuitSpec {
            name: h.to_string(),
            params: CircuitParams {
                k,
                ..template.clone()
            },
        });
    }
    for (ci, &h) in hidden.iter().enumerate() {
        let mut sources = Vec::new();
        for &c in children.get(h).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(&idx) = circuit_of.get(c) {
                sources.push(Source::Circuit(idx));
                continue;
            }
            let Some(&b) = binding_of.get(c) else {
                return Err(WtaError::config(format!("observed variable '{c}' is not bound")));
            };
            let idx = match sensory_of.get(&b) {
                Some(&idx) => idx,
                None => {
                    let binding = &spec.bindings[b];
                    let size = binding.variables.iter().map(|v| vars[v.as_str()].cardinality).sum();
                    topo.sensory.push(SensorySpec {
                        name: binding.population.clone(),
                        size,
                        cube: binding.cube,
                    });
                    sensory_of.insert(b, topo.sensory.len() - 1);
                    topo.sensory.len() - 1
                }
            };
            if !sources.contains(&Source::Sensory(idx)) {
                sources.push(Source::Sensory(idx));
            }
        }
        if !sources.is_empty() {
            topo.up_edges.push(UpEdge { target: ci, sources });
        }
    }
    topo.validate()?;
    Ok(topo)
}
