//! CSV and binary forms of solver artifacts.
//!
//! The binary container is
//! `magic(8) version(u16) kind(u8) fleet(u32) horizon(u32) hash(32)
//! solver_len(u16) solver payload_len(u64) payload`, little endian.

use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Error, Result};
use crate::exact::{PolicyTable, ValueTable};
use crate::flat::{FlatPolicyTable, FlatValueTable};
use crate::mdp::{Action, State, StateSpace};
use crate::rl::ApproxValueTable;

pub const MAGIC: &[u8; 8] = b"SWAPDP\0\x01";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ArtifactKind {
    Values = 1,
    Policy = 2,
    FlatPolicy = 3,
}

impl ArtifactKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(ArtifactKind::Values),
            2 => Ok(ArtifactKind::Policy),
            3 => Ok(ArtifactKind::FlatPolicy),
            other => Err(Error::invalid(format!("unknown artifact kind {other}"))),
        }
    }
}

pub fn value_csv(v: &ValueTable) -> String {
    let mut out = String::from("t,s1,s2,value\n");
    for t in 1..=v.horizon() {
        for s in v.space().iter() {
            let _ = writeln!(out, "{},{},{},{}", t, s.s1, s.s2, v.get(t, s));
        }
    }
    out
}

pub fn policy_csv(p: &PolicyTable) -> String {
    let mut out = String::from("t,s1,s2,a01,a02,a12\n");
    for t in 1..p.horizon() {
        for s in p.space().iter() {
            let a = p.get(t, s);
            let _ = writeln!(out, "{},{},{},{},{},{}", t, s.s1, s.s2, a.a01, a.a02, a.a12);
        }
    }
    out
}

pub fn approx_csv(table: &ApproxValueTable) -> String {
    let v = &table.values;
    let mut out = String::from("t,s1,s2,value,visits\n");
    for t in 1..=v.horizon() {
        for s in v.space().iter() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t,
                s.s1,
                s.s2,
                v.get(t, s),
                table.visits(t, s)
            );
        }
    }
    out
}

pub fn trace_csv(table: &ApproxValueTable) -> String {
    let mut out = String::from("iteration,value\n");
    for (i, v) in &table.trace {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// Flat tables use the classified layout with `s2 = 0`.
pub fn flat_value_csv(v: &FlatValueTable) -> String {
    let mut out = String::from("t,s1,s2,value\n");
    for t in 1..=v.horizon {
        for s in 0..=v.fleet {
            let _ = writeln!(out, "{},{},0,{}", t, s, v.get(t, s));
        }
    }
    out
}

pub fn flat_policy_csv(p: &FlatPolicyTable) -> String {
    let mut out = String::from("t,s1,s2,a01,a02,a12\n");
    for t in 1..p.horizon {
        for s in 0..=p.fleet {
            let _ = writeln!(out, "{},{},0,0,{},0", t, s, p.get(t, s));
        }
    }
    out
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    row: usize,
    headers: &[&str],
    col: usize,
) -> Result<T> {
    rec.get(col)
        .and_then(|x| x.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            row,
            column: headers[col].to_string(),
            message: format!("cannot parse '{}'", rec.get(col).unwrap_or("")),
        })
}

fn read_rows<R: Read>(input: R, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::invalid(format!(
            "expected CSV header '{}'",
            expected.join(",")
        )));
    }
    Ok(reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Infers `(fleet, horizon)` from `(t, s1, s2)` triples and checks coverage.
fn dimensions(keys: &[(usize, State)], t_offset: usize) -> Result<(usize, usize)> {
    let fleet = keys.iter().map(|(_, s)| s.s1 + s.s2).max().unwrap_or(0);
    let t_max = keys.iter().map(|(t, _)| *t).max().unwrap_or(0);
    let space = StateSpace::new(fleet);
    if t_max == 0 || keys.len() != space.len() * t_max || keys.iter().any(|(t, _)| *t == 0) {
        return Err(Error::invalid(
            "table rows do not cover every (t, s) exactly once",
        ));
    }
    let mut seen = vec![false; keys.len()];
    for (t, s) in keys {
        let i = (t - 1) * space.len() + space.index(*s);
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!(
                "duplicate row for t={t}, s=({}, {})",
                s.s1, s.s2
            )));
        }
    }
    Ok((fleet, t_max + t_offset))
}

pub fn read_value_csv<R: Read>(input: R, scenario_hash: &str, solver: &str) -> Result<ValueTable> {
    let headers = ["t", "s1", "s2", "value"];
    let rows = read_rows(input, &headers)?;
    let mut keys = Vec::with_capacity(rows.len());
    let mut vals = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let t: usize = parse_field(rec, i + 1, &headers, 0)?;
        let s = State::new(
            parse_field(rec, i + 1, &headers, 1)?,
            parse_field(rec, i + 1, &headers, 2)?,
        );
        keys.push((t, s));
        vals.push(parse_field::<f64>(rec, i + 1, &headers, 3)?);
    }
    let (fleet, horizon) = dimensions(&keys, 0)?;
    let space = StateSpace::new(fleet);
    let mut raw = vec![0.0; vals.len()];
    for ((t, s), v) in keys.into_iter().zip(vals) {
        raw[(t - 1) * space.len() + space.index(s)] = v;
    }
    ValueTable::from_raw(
        fleet,
        horizon,
        raw,
        scenario_hash.to_string(),
        solver.to_string(),
    )
}

pub fn read_policy_csv<R: Read>(
    input: R,
    scenario_hash: &str,
    solver: &str,
) -> Result<PolicyTable> {
    let headers = ["t", "s1", "s2", "a01", "a02", "a12"];
    let rows = read_rows(input, &headers)?;
    let mut keys = Vec::with_capacity(rows.len());
    let mut acts = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let f = |c| parse_field::<usize>(rec, i + 1, &headers, c);
        keys.push((f(0)?, State::new(f(1)?, f(2)?)));
        acts.push(Action::new(f(3)?, f(4)?, f(5)?));
    }
    let (fleet, horizon) = dimensions(&keys, 1)?;
    let space = StateSpace::new(fleet);
    let mut raw = vec![Action::IDLE; acts.len()];
    for ((t, s), a) in keys.into_iter().zip(acts) {
        raw[(t - 1) * space.len() + space.index(s)] = a;
    }
    PolicyTable::from_raw(
        fleet,
        horizon,
        raw,
        scenario_hash.to_string(),
        solver.to_string(),
    )
}

fn hash_to_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = hex
            .get(2 * i..2 * i + 2)
            .and_then(|h| u8::from_str_radix(h, 16).ok())
            .unwrap_or(0);
    }
    out
}

fn bytes_to_hash(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn container(
    kind: ArtifactKind,
    fleet: usize,
    horizon: usize,
    hash: &str,
    solver: &str,
    payload: &[u8],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + solver.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(fleet as u32).to_le_bytes());
    out.extend_from_slice(&(horizon as u32).to_le_bytes());
    out.extend_from_slice(&hash_to_bytes(hash));
    out.extend_from_slice(&(solver.len() as u16).to_le_bytes());
    out.extend_from_slice(solver.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Decoded container header plus payload.
#[derive(Debug, Clone)]
pub struct Container<'a> {
    pub kind: ArtifactKind,
    pub fleet: usize,
    pub horizon: usize,
    pub scenario_hash: String,
    pub solver: String,
    pub payload: &'a [u8],
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::invalid("truncated artifact container"))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn is_container(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

pub fn decode_container(bytes: &[u8]) -> Result<Container<'_>> {
    let mut c = Cursor {
        data: bytes,
        pos: 0,
    };
    if c.take(8)? != MAGIC {
        return Err(Error::invalid("not an artifact container"));
    }
    let version = u16::from_le_bytes(c.array()?);
    if version != FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "container version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let kind = ArtifactKind::from_byte(c.take(1)?[0])?;
    let fleet = u32::from_le_bytes(c.array()?) as usize;
    let horizon = u32::from_le_bytes(c.array()?) as usize;
    let scenario_hash = bytes_to_hash(c.take(32)?);
    let solver_len = u16::from_le_bytes(c.array()?) as usize;
    let solver = String::from_utf8(c.take(solver_len)?.to_vec())
        .map_err(|_| Error::invalid("solver id is not UTF-8"))?;
    let payload_len = u64::from_le_bytes(c.array()?) as usize;
    let payload = c.take(payload_len)?;
    if c.pos != bytes.len() {
        return Err(Error::invalid("trailing bytes after artifact payload"));
    }
    Ok(Container {
        kind,
        fleet,
        horizon,
        scenario_hash,
        solver,
        payload,
    })
}

pub fn value_bin(v: &ValueTable) -> Vec<u8> {
    let payload: Vec<u8> = v.raw().iter().flat_map(|x| x.to_le_bytes()).collect();
    container(
        ArtifactKind::Values,
        v.fleet(),
        v.horizon(),
        &v.scenario_hash,
        &v.solver,
        &payload,
    )
}

pub fn policy_bin(p: &PolicyTable) -> Vec<u8> {
    let payload: Vec<u8> = p
        .raw()
        .iter()
        .flat_map(|a| [a.a01, a.a02, a.a12])
        .flat_map(|x| (x as u32).to_le_bytes())
        .collect();
    container(
        ArtifactKind::Policy,
        p.fleet(),
        p.horizon(),
        &p.scenario_hash,
        &p.solver,
        &payload,
    )
}

pub fn flat_policy_bin(p: &FlatPolicyTable) -> Vec<u8> {
    let n = (p.fleet + 1) * (p.horizon - 1);
    let payload: Vec<u8> = (0..n)
        .map(|i| p.get(i / (p.fleet + 1) + 1, i % (p.fleet + 1)))
        .flat_map(|a| (a as u32).to_le_bytes())
        .collect();
    container(
        ArtifactKind::FlatPolicy,
        p.fleet,
        p.horizon,
        &p.scenario_hash,
        "flat",
        &payload,
    )
}

fn expect_kind(c: &Container, kind: ArtifactKind) -> Result<()> {
    if c.kind != kind {
        return Err(Error::Incompatible(format!(
            "expected a {kind:?} artifact, found {:?}",
            c.kind
        )));
    }
    Ok(())
}

fn words(payload: &[u8]) -> Vec<usize> {
    payload
        .chunks_exact(4)
        .map(|w| u32::from_le_bytes(w.try_into().expect("chunk of 4")) as usize)
        .collect()
}

pub fn read_value_bin(bytes: &[u8]) -> Result<ValueTable> {
    let c = decode_container(bytes)?;
    expect_kind(&c, ArtifactKind::Values)?;
    if c.payload.len() % 8 != 0 {
        return Err(Error::invalid("value payload is not a whole number of f64"));
    }
    let raw = c
        .payload
        .chunks_exact(8)
        .map(|w| f64::from_le_bytes(w.try_into().expect("chunk of 8")))
        .collect();
    ValueTable::from_raw(c.fleet, c.horizon, raw, c.scenario_hash, c.solver)
}

pub fn read_policy_bin(bytes: &[u8]) -> Result<PolicyTable> {
    let c = decode_container(bytes)?;
    expect_kind(&c, ArtifactKind::Policy)?;
    let w = words(c.payload);
    if c.payload.len() % 12 != 0 {
        return Err(Error::invalid(
            "policy payload is not a whole number of actions",
        ));
    }
    let raw = w
        .chunks_exact(3)
        .map(|a| Action::new(a[0], a[1], a[2]))
        .collect();
    PolicyTable::from_raw(c.fleet, c.horizon, raw, c.scenario_hash, c.solver)
}

pub fn read_flat_policy_bin(bytes: &[u8]) -> Result<FlatPolicyTable> {
    let c = decode_container(bytes)?;
    expect_kind(&c, ArtifactKind::FlatPolicy)?;
    if c.payload.len() % 4 != 0 {
        return Err(Error::invalid(
            "flat policy payload is not a whole number of actions",
        ));
    }
    FlatPolicyTable::from_raw(c.fleet, c.horizon, words(c.payload), c.scenario_hash)
}

/// Refuses artifacts built from a different scenario.
pub fn check_hash(artifact_hash: &str, scenario_hash: &str) -> Result<()> {
    if artifact_hash != scenario_hash {
        return Err(Error::Incompatible(format!(
            "artifact was built for scenario {artifact_hash}, but the given scenario hashes to {scenario_hash}; \
             re-run the solver on this scenario"
        )));
    }
    Ok(())
}
