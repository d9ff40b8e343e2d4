//! Line-oriented text format for [`NetworkTopology`].
//!
//! ```text
//! wta-topology 1
//! sensory <name> <size> [cube=<field>,<row>,<col>,<height>,<width>]
//! circuit <name> k=<K> mu_max=<f> c=<f> weight_range=<f> target_rate=<f> psi_gain=<f> psi_initial=<f> psi_max=<f> rate_decay=<f> td=<policy>
//! up <target> <rows>x<cols> <source> [<source> ...]
//! down <parent> <child> <rows>x<cols>
//! ```
//!
//! Populations are referenced by name and must be declared before use.
//! Blank lines and lines starting with `#` are ignored on input. Writing the
//! result of a parse reproduces the input byte for byte when the input was
//! itself produced by [`write_topology`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::CircuitParams;
use crate::error::{Result, WtaError};
use crate::network::topology::{CircuitSpec, Cube, DownEdge, NetworkTopology, SensorySpec, Source, UpEdge};

pub const TOPOLOGY_FORMAT_VERSION: u32 = 1;

pub fn write_topology(topo: &NetworkTopology) -> String {
    let mut out = String::new();
    writeln!(out, "wta-topology {TOPOLOGY_FORMAT_VERSION}").unwrap();
    for s in &topo.sensory {
        write!(out, "sensory {} {}", s.name, s.size).unwrap();
        if let Some(c) = s.cube {
            write!(out, " cube={},{},{},{},{}", c.field, c.row, c.col, c.height, c.width).unwrap();
        }
        out.push('\n');
    }
    for c in &topo.circuits {
        let p = &c.params;
        writeln!(
            out,
            "circuit {} k={} mu_max={} c={} weight_range={} target_rate={} psi_gain={} psi_initial={} psi_max={} rate_decay={} td={}",
            c.name, p.k, p.mu_max, p.c, p.weight_range, p.target_rate, p.psi_gain, p.psi_initial, p.psi_max, p.rate_decay, p.td
        )
        .unwrap();
    }
    for e in &topo.up_edges {
        let (rows, cols) = topo.up_shape(e.target);
        write!(out, "up {} {rows}x{cols}", topo.circuits[e.target].name).unwrap();
        for &s in &e.sources {
            write!(out, " {}", topo.source_name(s)).unwrap();
        }
        out.push('\n');
    }
    for e in &topo.down_edges {
        let (rows, cols) = topo.down_shape(e);
        writeln!(
            out,
            "down {} {} {rows}x{cols}",
            topo.circuits[e.parent].name, topo.circuits[e.child].name
        )
        .unwrap();
    }
    out
}

fn err(line: usize, msg: impl std::fmt::Display) -> WtaError {
    WtaError::config(format!("topology line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| err(line, format!("bad {what} '{s}'")))
}

fn parse_shape(line: usize, s: &str) -> Result<(usize, usize)> {
    let (r, c) = s.split_once('x').ok_or_else(|| err(line, format!("bad shape '{s}'")))?;
    Ok((parse_num(line, "rows", r)?, parse_num(line, "cols", c)?))
}

pub fn read_topology(text: &str) -> Result<NetworkTopology> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, header)) if header == format!("wta-topology {TOPOLOGY_FORMAT_VERSION}") => {}
        Some((n, header)) => return Err(err(n, format!("unsupported header '{header}'"))),
        None => return Err(WtaError::config("empty topology")),
    }

    let mut topo = NetworkTopology::default();
    let mut names: BTreeMap<String, Source> = BTreeMap::new();
    let mut shapes = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "sensory" => {
                if !(3..=4).contains(&fields.len()) {
                    return Err(err(n, "expected: sensory <name> <size> [cube=...]"));
                }
                let cube = match fields.get(3) {
                    Some(spec) => {
                        let body = spec.strip_prefix("cube=").ok_or_else(|| err(n, "expected cube=..."))?;
                        let v: Vec<usize> = body
                            .split(',')
                            .map(|x| parse_num(n, "cube coordinate", x))
                            .collect::<Result<_>>()?;
                        let [field, row, col, height, width] = v[..] else {
                            return Err(err(n, "cube needs five coordinates"));
                        };
                        Some(Cube {
                            field,
                            row,
                            col,
                            height,
                            width,
                        })
                    }
                    None => None,
                };
                let name = fields[1].to_string();
                names.insert(name.clone(), Source::Sensory(topo.sensory.len()));
                topo.sensory.push(SensorySpec {
                    name,
                    size: parse_num(n, "size", fields[2])?,
                    cube,
                });
            }
            "circuit" => {
                if fields.len() < 2 {
                    return Err(err(n, "circuit without a name"));
                }
                let mut kv = BTreeMap::new();
                for f in &fields[2..] {
                    let (k, v) = f.split_once('=').ok_or_else(|| err(n, format!("expected key=value, got '{f}'")))?;
                    kv.insert(k, v);
                }
                let mut take = |key: &str| kv.remove(key).ok_or_else(|| err(n, format!("missing {key}")));
                let params = CircuitParams {
                    k: parse_num(n, "k", take("k")?)?,
                    mu_max: parse_num(n, "mu_max", take("mu_max")?)?,
                    c: parse_num(n, "c", take("c")?)?,
                    weight_range: parse_num(n, "weight_range", take("weight_range")?)?,
                    target_rate: parse_num(n, "target_rate", take("target_rate")?)?,
                    psi_gain: parse_num(n, "psi_gain", take("psi_gain")?)?,
                    psi_initial: parse_num(n, "psi_initial", take("psi_initial")?)?,
                    psi_max: parse_num(n, "psi_max", take("psi_max")?)?,
                    rate_decay: parse_num(n, "rate_decay", take("rate_decay")?)?,
                    td: take("td")?.parse().map_err(|e| err(n, e))?,
                };
                if let Some(extra) = kv.keys().next() {
                    return Err(err(n, format!("unknown key '{extra}'")));
                }
                let name = fields[1].to_string();
                names.insert(name.clone(), Source::Circuit(topo.circuits.len()));
                topo.circuits.push(CircuitSpec { name, params });
            }
            "up" => {
                if fields.len() < 4 {
                    return Err(err(n, "expected: up <target> <rows>x<cols> <source>..."));
                }
                let target = match names.get(fields[1]) {
                    Some(Source::Circuit(i)) => *i,
                    _ => return Err(err(n, format!("unknown circuit '{}'", fields[1]))),
                };
                let sources = fields[3..]
                    .iter()
                    .map(|s| names.get(*s).copied().ok_or_else(|| err(n, format!("unknown source '{s}'"))))
                    .collect::<Result<Vec<_>>>()?;
                shapes.push((n, Some(target), None, parse_shape(n, fields[2])?));
                topo.up_edges.push(UpEdge { target, sources });
            }
            "down" => {
                if fields.len() != 4 {
                    return Err(err(n, "expected: down <parent> <child> <rows>x<cols>"));
                }
                let circuit = |s: &str| match names.get(s) {
                    Some(Source::Circuit(i)) => Ok(*i),
                    _ => Err(err(n, format!("unknown circuit '{s}'"))),
                };
                let edge = DownEdge {
                    parent: circuit(fields[1])?,
                    child: circuit(fields[2])?,
                };
                shapes.push((n, None, Some(edge), parse_shape(n, fields[3])?));
                topo.down_edges.push(edge);
            }
            other => return Err(err(n, format!("unknown record '{other}'"))),
        }
    }
    topo.validate()?;
    for (n, up, down, shape) in shapes {
        let actual = match (up, down) {
            (Some(t), _) => topo.up_shape(t),
            (_, Some(e)) => topo.down_shape(&e),
            _ => unreachable!(),
        };
        if actual != shape {
            return Err(err(n, format!("declared shape {shape:?} but populations give {actual:?}")));
        }
    }
    Ok(topo)
}
