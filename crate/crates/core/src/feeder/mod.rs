//! Unbalanced three-phase feeder description.
//!
//! A [`FeederModel`] is parsed from a JSON feeder file, validated once and
//! then treated as immutable. Topology handling lives in [`topology`], the
//! nodal admittance matrix in [`ybus`].

pub mod topology;
pub mod ybus;

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use topology::{
    apply_switch_config, check_connectivity, enumerate_feasible_topologies, FeasibilityRule,
    SwitchConfig, TopologyCatalog, TopologyView,
};
pub use ybus::{build_ybus, BranchPrimitive, NodeIndex, Ybus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'a',
            Phase::B => 'b',
            Phase::C => 'c',
        }
    }

    fn from_letter(c: char) -> Option<Phase> {
        match c.to_ascii_lowercase() {
            'a' => Some(Phase::A),
            'b' => Some(Phase::B),
            'c' => Some(Phase::C),
            _ => None,
        }
    }

    /// Nominal angle of the positive-sequence set: 0, -120, +120 degrees.
    pub fn nominal_angle_deg(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -120.0,
            Phase::C => 120.0,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Subset of {a, b, c}, serialized as a string such as `"abc"` or `"b"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn from_phases(phases: impl IntoIterator<Item = Phase>) -> Self {
        PhaseSet(phases.into_iter().fold(0, |m, p| m | (1 << p.index())))
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut mask = 0u8;
        for c in s.chars() {
            let p = Phase::from_letter(c)?;
            if mask & (1 << p.index()) != 0 {
                return None;
            }
            mask |= 1 << p.index();
        }
        Some(PhaseSet(mask))
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `p` among the members of this set.
    pub fn position(self, p: Phase) -> Option<usize> {
        self.iter().position(|q| q == p)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PhaseSet::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid phase set `{s}`")))
    }
}

/// Phase or phase pair a load component is connected to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadTerminal {
    Phase(Phase),
    Pair(Phase, Phase),
}

impl LoadTerminal {
    pub fn phases(self) -> PhaseSet {
        match self {
            LoadTerminal::Phase(p) => PhaseSet::from_phases([p]),
            LoadTerminal::Pair(p, q) => PhaseSet::from_phases([p, q]),
        }
    }
}

impl fmt::Display for LoadTerminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadTerminal::Phase(p) => write!(f, "{p}"),
            LoadTerminal::Pair(p, q) => write!(f, "{p}{q}"),
        }
    }
}

impl Serialize for LoadTerminal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LoadTerminal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let phases: Option<Vec<Phase>> = s.chars().map(Phase::from_letter).collect();
        match phases.as_deref() {
            Some([p]) => Ok(LoadTerminal::Phase(*p)),
            Some([p, q]) if p != q => Ok(LoadTerminal::Pair(*p, *q)),
            _ => Err(serde::de::Error::custom(format!("invalid load terminal `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-line base voltage in kV.
    pub base_kv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Line,
    Transformer,
    Regulator,
    Switch,
}

/// Dense complex matrix stored as rows, serialized as `[[[re, im], ...], ...]`.
pub type CMatrix = Vec<Vec<Complex64>>;

fn is_true(b: &bool) -> bool {
    *b
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: String,
    #[serde(rename = "from")]
    pub from_bus: String,
    #[serde(rename = "to")]
    pub to_bus: String,
    pub phases: PhaseSet,
    pub kind: BranchKind,
    /// Series impedance in ohms. Transformers and regulators refer it to the
    /// `to` side.
    pub z: CMatrix,
    /// Total shunt admittance in siemens, split equally between both ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<CMatrix>,
    /// Per-phase off-nominal ratio for transformers and regulators,
    /// `V_to / V_from` at no load.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taps: Vec<f64>,
    /// Normal status for switches (base topology).
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connection {
    Wye,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadComponent {
    pub phase: LoadTerminal,
    pub p_kw: f64,
    pub q_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub connection: Connection,
    pub per_phase: Vec<LoadComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meter_group: Option<String>,
}

impl Load {
    pub fn nominal_p_kw(&self) -> f64 {
        self.per_phase.iter().map(|c| c.p_kw).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dg {
    pub id: String,
    pub bus: String,
    pub rating_kw: f64,
    pub phases: PhaseSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacitor {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    /// Rating per phase at nominal voltage.
    pub kvar_per_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub bus: String,
    pub voltage_pu: f64,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bases {
    /// Three-phase power base in kVA.
    pub kva: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeederFile {
    #[serde(default)]
    name: String,
    bases: Bases,
    source: Option<Source>,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    #[serde(default)]
    loads: Vec<Load>,
    #[serde(default)]
    dgs: Vec<Dg>,
    #[serde(default)]
    capacitors: Vec<Capacitor>,
}

/// Validated feeder. Buses are kept sorted by id, which fixes the canonical
/// node-phase order (bus id, then phase a < b < c) used by every vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederModel {
    pub name: String,
    pub bases: Bases,
    pub source: Source,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<Load>,
    pub dgs: Vec<Dg>,
    pub capacitors: Vec<Capacitor>,
    switch_branches: Vec<usize>,
    bus_lookup: HashMap<String, usize>,
    branch_lookup: HashMap<String, usize>,
}

/// Parses and validates a feeder file.
pub fn parse_feeder(text: &str) -> Result<FeederModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: FeederFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Schema { path, detail: format!("{inner} (line {}, column {})", inner.line(), inner.column()) }
    })?;
    FeederModel::from_file(file)
}

impl FeederModel {
    fn from_file(file: FeederFile) -> Result<Self> {
        let source = file.source.ok_or(Error::MissingSource)?;
        let mut buses = file.buses;
        buses.sort_by(|a, b| a.id.cmp(&b.id));
        let mut model = FeederModel {
            name: file.name,
            bases: file.bases,
            source,
            buses,
            branches: file.branches,
            loads: file.loads,
            dgs: file.dgs,
            capacitors: file.capacitors,
            switch_branches: Vec::new(),
            bus_lookup: HashMap::new(),
            branch_lookup: HashMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let file = FeederFile {
            name: self.name.clone(),
            bases: self.bases.clone(),
            source: Some(self.source.clone()),
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            loads: self.loads.clone(),
            dgs: self.dgs.clone(),
            capacitors: self.capacitors.clone(),
        };
        serde_json::to_string_pretty(&file).expect("feeder serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_lookup.get(id).copied()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.bus_index(id).map(|i| &self.buses[i])
    }

    pub fn branch_index(&self, id: &str) -> Option<usize> {
        self.branch_lookup.get(id).copied()
    }

    pub fn branch(&self, id: &str) -> Option<&Branch> {
        self.branch_index(id).map(|i| &self.branches[i])
    }

    pub fn source_bus_index(&self) -> usize {
        self.bus_lookup[&self.source.bus]
    }

    /// Branch indices of the switches, in file order.
    pub fn switch_branches(&self) -> &[usize] {
        &self.switch_branches
    }

    pub fn switch_ids(&self) -> Vec<String> {
        self.switch_branches.iter().map(|&i| self.branches[i].id.clone()).collect()
    }

    pub fn num_switches(&self) -> usize {
        self.switch_branches.len()
    }

    /// Normal switch statuses from the file.
    pub fn base_config(&self) -> SwitchConfig {
        SwitchConfig::new(self.switch_branches.iter().map(|&i| self.branches[i].closed).collect())
    }

    /// Per-phase power base in kVA.
    pub fn phase_kva(&self) -> f64 {
        self.bases.kva / 3.0
    }

    /// Impedance base in ohms for a bus: kV_LL^2 / MVA_3ph.
    pub fn z_base(&self, bus: usize) -> f64 {
        let kv = self.buses[bus].base_kv;
        kv * kv / (self.bases.kva / 1000.0)
    }

    /// Buses that carry a load or DG; these must stay connected to the source.
    pub fn served_buses(&self) -> Vec<usize> {
        let mut set: Vec<usize> = self
            .loads
            .iter()
            .map(|l| self.bus_lookup[&l.bus])
            .chain(self.dgs.iter().map(|d| self.bus_lookup[&d.bus]))
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    fn validate(&mut self) -> Result<()> {
        if !(self.bases.kva > 0.0) {
            return Err(Error::Schema { path: "bases.kva".into(), detail: "must be positive".into() });
        }
        let mut ids = HashSet::new();
        for (i, bus) in self.buses.iter().enumerate() {
            if !ids.insert(bus.id.as_str()) {
                return Err(Error::DuplicateId { section: "buses".into(), id: bus.id.clone() });
            }
            if bus.phases.is_empty() {
                return Err(Error::Schema { path: format!("buses[{}].phases", bus.id), detail: "empty phase set".into() });
            }
            if !(bus.base_kv > 0.0) {
                return Err(Error::Schema { path: format!("buses[{}].base_kv", bus.id), detail: "must be positive".into() });
            }
            self.bus_lookup.insert(bus.id.clone(), i);
        }

        let mut ids = HashSet::new();
        self.switch_branches.clear();
        for (i, br) in self.branches.iter().enumerate() {
            let el = format!("branch `{}`", br.id);
            if !ids.insert(br.id.as_str()) {
                return Err(Error::DuplicateId { section: "branches".into(), id: br.id.clone() });
            }
            for end in [&br.from_bus, &br.to_bus] {
                let bus = self.bus(end).ok_or_else(|| Error::DanglingReference {
                    element: el.clone(),
                    detail: format!("bus `{end}` does not exist"),
                })?;
                if !br.phases.is_subset_of(bus.phases) {
                    return Err(Error::DanglingReference {
                        element: el.clone(),
                        detail: format!("phases `{}` not present on bus `{end}` (`{}`)", br.phases, bus.phases),
                    });
                }
            }
            if br.from_bus == br.to_bus {
                return Err(Error::Schema { path: format!("branches[{}]", br.id), detail: "from and to bus are equal".into() });
            }
            if br.phases.is_empty() {
                return Err(Error::Schema { path: format!("branches[{}].phases", br.id), detail: "empty phase set".into() });
            }
            let n = br.phases.len();
            check_matrix(&br.z, n, &format!("branches[{}].z", br.id))?;
            if let Some(y) = &br.y {
                check_matrix(y, n, &format!("branches[{}].y", br.id))?;
            }
            match br.kind {
                BranchKind::Transformer | BranchKind::Regulator => {
                    if !br.taps.is_empty() && br.taps.len() != n {
                        return Err(Error::Schema {
                            path: format!("branches[{}].taps", br.id),
                            detail: format!("expected {n} taps, got {}", br.taps.len()),
                        });
                    }
                    if br.taps.iter().any(|t| !(*t > 0.0)) {
                        return Err(Error::Schema { path: format!("branches[{}].taps", br.id), detail: "taps must be positive".into() });
                    }
                }
                _ if !br.taps.is_empty() => {
                    return Err(Error::Schema { path: format!("branches[{}].taps", br.id), detail: "taps only apply to transformers and regulators".into() });
                }
                _ => {}
            }
            if br.kind == BranchKind::Switch {
                self.switch_branches.push(i);
            } else if !br.closed {
                return Err(Error::Schema { path: format!("branches[{}].closed", br.id), detail: "only switches may be open".into() });
            }
            self.branch_lookup.insert(br.id.clone(), i);
        }

        let mut ids = HashSet::new();
        for load in &self.loads {
            let el = format!("load `{}`", load.id);
            if !ids.insert(load.id.as_str()) {
                return Err(Error::DuplicateId { section: "loads".into(), id: load.id.clone() });
            }
            let bus = self.bus(&load.bus).ok_or_else(|| Error::DanglingReference {
                element: el.clone(),
                detail: format!("bus `{}` does not exist", load.bus),
            })?;
            if load.per_phase.is_empty() {
                return Err(Error::Schema { path: format!("loads[{}].per_phase", load.id), detail: "no components".into() });
            }
            if load.connection == Connection::Delta && bus.phases.len() < 2 {
                return Err(Error::Schema { path: format!("loads[{}].connection", load.id), detail: "delta load on a single-phase bus".into() });
            }
            for c in &load.per_phase {
                if !c.phase.phases().is_subset_of(bus.phases) {
                    return Err(Error::DanglingReference {
                        element: el.clone(),
                        detail: format!("phase `{}` not present on bus `{}`", c.phase, load.bus),
                    });
                }
                match (load.connection, c.phase) {
                    (Connection::Wye, LoadTerminal::Pair(..)) | (Connection::Delta, LoadTerminal::Phase(_)) => {
                        return Err(Error::Schema {
                            path: format!("loads[{}].per_phase", load.id),
                            detail: format!("terminal `{}` does not match {:?} connection", c.phase, load.connection),
                        })
                    }
                    _ => {}
                }
                if c.p_kw < 0.0 || !c.p_kw.is_finite() || !c.q_kvar.is_finite() {
                    return Err(Error::Schema { path: format!("loads[{}].per_phase.p_kw", load.id), detail: "load power must be finite and P >= 0".into() });
                }
            }
        }

        let mut ids = HashSet::new();
        for dg in &self.dgs {
            if !ids.insert(dg.id.as_str()) {
                return Err(Error::DuplicateId { section: "dgs".into(), id: dg.id.clone() });
            }
            let bus = self.bus(&dg.bus).ok_or_else(|| Error::DanglingReference {
                element: format!("dg `{}`", dg.id),
                detail: format!("bus `{}` does not exist", dg.bus),
            })?;
            if !dg.phases.is_subset_of(bus.phases) || dg.phases.is_empty() {
                return Err(Error::DanglingReference { element: format!("dg `{}`", dg.id), detail: format!("phases `{}` invalid on bus `{}`", dg.phases, dg.bus) });
            }
            if !(dg.rating_kw > 0.0) {
                return Err(Error::Schema { path: format!("dgs[{}].rating_kw", dg.id), detail: "must be positive".into() });
            }
        }

        let mut ids = HashSet::new();
        for cap in &self.capacitors {
            if !ids.insert(cap.id.as_str()) {
                return Err(Error::DuplicateId { section: "capacitors".into(), id: cap.id.clone() });
            }
            let bus = self.bus(&cap.bus).ok_or_else(|| Error::DanglingReference {
                element: format!("capacitor `{}`", cap.id),
                detail: format!("bus `{}` does not exist", cap.bus),
            })?;
            if !cap.phases.is_subset_of(bus.phases) {
                return Err(Error::DanglingReference { element: format!("capacitor `{}`", cap.id), detail: format!("phases `{}` not present on bus `{}`", cap.phases, cap.bus) });
            }
        }

        if self.bus(&self.source.bus).is_none() {
            return Err(Error::DanglingReference { element: "source".into(), detail: format!("bus `{}` does not exist", self.source.bus) });
        }
        if !(self.source.voltage_pu > 0.0) {
            return Err(Error::Schema { path: "source.voltage_pu".into(), detail: "must be positive".into() });
        }

        let all_closed = SwitchConfig::new(vec![true; self.num_switches()]);
        let islanded = topology::islanded_served_buses(self, &all_closed);
        if !islanded.is_empty() {
            return Err(Error::Infeasible(islanded));
        }
        Ok(())
    }
}

fn check_matrix(m: &CMatrix, n: usize, path: &str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(Error::Schema { path: path.into(), detail: format!("expected a {n}x{n} matrix") });
    }
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..i {
            if (m[i][j] - m[j][i]).norm() > 1e-9 * scale {
                return Err(Error::Schema { path: path.into(), detail: format!("matrix not symmetric at ({i},{j})") });
            }
        }
    }
    if m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Schema { path: path.into(), detail: "non-finite entry".into() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_BUS: &str = r#"{
        "bases": {"kva": 3000},
        "source": {"bus": "1", "voltage_pu": 1.0},
        "buses": [{"id": "1", "phases": "a", "base_kv": 1.7320508075688772},
                  {"id": "2", "phases": "a", "base_kv": 1.7320508075688772}],
        "branches": [{"id": "L12", "from": "1", "to": "2", "phases": "a", "kind": "line",
                      "z": [[[0.01, 0.02]]]}],
        "loads": [{"id": "LD2", "bus": "2", "connection": "wye",
                   "per_phase": [{"phase": "a", "p_kw": 1000, "q_kvar": 500}]}]
    }"#;

    #[test]
    fn minimal_two_bus() {
        let m = parse_feeder(TWO_BUS).unwrap();
        assert_eq!((m.buses.len(), m.branches.len(), m.loads.len()), (2, 1, 1));
        assert!((m.z_base(0) - 1.0).abs() < 1e-12);
        assert_eq!(m.num_switches(), 0);
    }

    #[test]
    fn load_on_missing_phase_is_dangling() {
        let text = TWO_BUS.replace(r#"{"phase": "a", "p_kw""#, r#"{"phase": "b", "p_kw""#);
        match parse_feeder(&text) {
            Err(Error::DanglingReference { element, .. }) => assert!(element.contains("LD2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_bus_rejected() {
        let text = TWO_BUS.replace(r#"{"id": "2", "phases""#, r#"{"id": "1", "phases""#);
        assert!(matches!(parse_feeder(&text), Err(Error::DuplicateId { .. })));
    }

    #[test]
    fn missing_source_rejected() {
        let text = TWO_BUS.replace(r#""source": {"bus": "1", "voltage_pu": 1.0},"#, "");
        assert!(matches!(parse_feeder(&text), Err(Error::MissingSource)));
    }

    #[test]
    fn schema_error_carries_path() {
        let text = TWO_BUS.replace(r#""kind": "line""#, r#""kind": "cable""#);
        match parse_feeder(&text) {
            Err(Error::Schema { path, .. }) => assert!(path.contains("branches[0].kind"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_impedance_rejected() {
        let text = TWO_BUS
            .replace(r#""phases": "a", "base_kv""#, r#""phases": "ab", "base_kv""#)
            .replace(r#""phases": "a", "kind""#, r#""phases": "ab", "kind""#)
            .replace(r#"[[[0.01, 0.02]]]"#, r#"[[[0.01, 0.02], [0.0, 0.01]], [[0.0, 0.02], [0.01, 0.02]]]"#);
        assert!(matches!(parse_feeder(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn delta_on_single_phase_rejected() {
        let text = TWO_BUS.replace(r#""connection": "wye""#, r#""connection": "delta""#);
        assert!(parse_feeder(&text).is_err());
    }

    #[test]
    fn islanded_load_rejected() {
        let text = TWO_BUS.replace(r#""bus": "2", "connection""#, r#""bus": "3", "connection""#);
        assert!(matches!(parse_feeder(&text), Err(Error::DanglingReference { .. })));
    }

    #[test]
    fn round_trip_is_identity() {
        let m = parse_feeder(TWO_BUS).unwrap();
        let again = parse_feeder(&m.to_json()).unwrap();
        assert_eq!(m, again);
        assert_eq!(m.fingerprint(), again.fingerprint());
    }
}
