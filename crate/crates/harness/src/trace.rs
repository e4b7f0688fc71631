// SPDX-License-Identifier: Apache-2.0

//! VCD dump and reload. Net names are split on `.` into nested module scopes under a
//! single `top` module; the timescale is 1 fs. Initial levels go into `$dumpvars`, so a
//! transition at time zero survives a round trip.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use droopsim_core::{Logic, Ticks, Waveform};
use vcd::{Command, IdCode, ScopeItem, SimulationCommand, TimescaleUnit, Value};

const TOP: &str = "top";

fn value(l: Logic) -> Value {
    match l {
        Logic::L0 => Value::V0,
        Logic::L1 => Value::V1,
        Logic::X => Value::X,
    }
}

fn logic(v: Value) -> Logic {
    match v {
        Value::V0 => Logic::L0,
        Value::V1 => Logic::L1,
        Value::X | Value::Z => Logic::X,
    }
}

#[derive(Default)]
struct Node<'a> {
    vars: Vec<(&'a str, usize)>,
    scopes: BTreeMap<&'a str, Node<'a>>,
}

fn declare<W: Write>(w: &mut vcd::Writer<W>, node: &Node<'_>, codes: &mut [Option<IdCode>]) -> io::Result<()> {
    for &(leaf, i) in &node.vars {
        codes[i] = Some(w.add_wire(1, leaf)?);
    }
    for (name, child) in &node.scopes {
        w.add_module(name)?;
        declare(w, child, codes)?;
        w.upscope()?;
    }
    Ok(())
}

/// Writes `waves` as a VCD document.
pub fn write_vcd<'a, W: Write>(out: W, waves: impl IntoIterator<Item = (&'a str, &'a Waveform)>) -> io::Result<()> {
    let waves: Vec<(&str, &Waveform)> = waves.into_iter().collect();
    let mut root = Node::default();
    for (i, (name, _)) in waves.iter().enumerate() {
        let mut parts: Vec<&str> = name.split('.').collect();
        let leaf = parts.pop().expect("split yields one part");
        let mut n = &mut root;
        for p in parts {
            n = n.scopes.entry(p).or_default();
        }
        n.vars.push((leaf, i));
    }
    let mut w = vcd::Writer::new(out);
    w.version("droopsim")?;
    w.timescale(1, TimescaleUnit::FS)?;
    w.add_module(TOP)?;
    let mut codes = vec![None; waves.len()];
    declare(&mut w, &root, &mut codes)?;
    w.upscope()?;
    w.enddefinitions()?;

    let codes: Vec<IdCode> = codes.into_iter().map(|c| c.expect("every net declared")).collect();
    w.timestamp(0)?;
    w.begin(SimulationCommand::Dumpvars)?;
    for (i, (_, wave)) in waves.iter().enumerate() {
        w.change_scalar(codes[i], value(wave.initial()))?;
    }
    w.end()?;
    let mut changes: Vec<(Ticks, usize, Logic)> =
        waves.iter().enumerate().flat_map(|(i, (_, wave))| wave.transitions().iter().map(move |&(t, l)| (t, i, l))).collect();
    changes.sort_by_key(|&(t, i, _)| (t, i));
    let mut now = Ticks::ZERO;
    for (t, i, l) in changes {
        if t != now {
            w.timestamp(t.0)?;
            now = t;
        }
        w.change_scalar(codes[i], value(l))?;
    }
    w.flush()
}

fn collect(items: &[ScopeItem], prefix: &str, out: &mut BTreeMap<IdCode, Vec<String>>) {
    for item in items {
        match item {
            ScopeItem::Var(v) => {
                let name = if prefix.is_empty() { v.reference.clone() } else { format!("{prefix}.{}", v.reference) };
                out.entry(v.code).or_default().push(name);
            }
            ScopeItem::Scope(s) => {
                let p = if prefix.is_empty() { s.identifier.clone() } else { format!("{prefix}.{}", s.identifier) };
                collect(&s.items, &p, out);
            }
            _ => {}
        }
    }
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a VCD document back into named waveforms (scalar wires only).
pub fn read_vcd<R: BufRead>(input: R) -> io::Result<BTreeMap<String, Waveform>> {
    let mut p = vcd::Parser::new(input);
    let header = p.parse_header()?;
    if let Some((n, unit)) = header.timescale {
        if (n, unit) != (1, TimescaleUnit::FS) {
            return Err(bad(format!("timescale {n} {unit} is not 1 fs")));
        }
    }
    let mut names = BTreeMap::new();
    for item in &header.items {
        match item {
            ScopeItem::Scope(s) if s.identifier == TOP => collect(&s.items, "", &mut names),
            other => collect(std::slice::from_ref(other), "", &mut names),
        }
    }
    let mut waves: BTreeMap<IdCode, Waveform> = BTreeMap::new();
    let mut now = 0u64;
    let mut in_dumpvars = false;
    for cmd in p {
        match cmd? {
            Command::Timestamp(t) => now = t,
            Command::Begin(SimulationCommand::Dumpvars) => in_dumpvars = true,
            Command::End(SimulationCommand::Dumpvars) => in_dumpvars = false,
            Command::ChangeScalar(id, v) => {
                let l = logic(v);
                if in_dumpvars || !waves.contains_key(&id) {
                    waves.insert(id, Waveform::new(l));
                } else {
                    let w = waves.get_mut(&id).expect("checked");
                    if w.last_level() != l {
                        w.push(Ticks(now), l).map_err(|e| bad(e.to_string()))?;
                    }
                }
            }
            _ => {}
        }
    }
    let mut out = BTreeMap::new();
    for (id, ns) in names {
        let w = waves.get(&id).cloned().unwrap_or_else(|| Waveform::new(Logic::X));
        for n in ns {
            out.insert(n, w.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_is_written_as_x() {
        let w = Waveform::from_transitions(Logic::X, [(Ticks(5), Logic::L1)]).unwrap();
        let mut buf = Vec::new();
        write_vcd(&mut buf, [("a.b", &w)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$timescale 1 fs $end"), "{text}");
        assert!(text.lines().any(|l| l.starts_with('x')), "{text}");
        assert_eq!(read_vcd(text.as_bytes()).unwrap()["a.b"], w);
    }

    #[test]
    fn time_zero_transition_survives() {
        let w = Waveform::from_transitions(Logic::L0, [(Ticks(0), Logic::L1), (Ticks(9), Logic::L0)]).unwrap();
        let c = Waveform::constant(Logic::L1);
        let mut buf = Vec::new();
        write_vcd(&mut buf, [("w", &w), ("de0.master.q0", &c)]).unwrap();
        let back = read_vcd(buf.as_slice()).unwrap();
        assert_eq!(back["w"], w);
        assert_eq!(back["de0.master.q0"], c);
    }
}
