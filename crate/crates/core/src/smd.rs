//! Synchrophasor device sites and the phasors they report.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::feeder::{BranchKind, FeederModel, Phase, PhaseSet};
use crate::measerr::Quantity;
use crate::powerflow::PowerFlowSolution;
use crate::{Error, Result};

/// A device at `bus` measuring its voltages and the currents leaving `bus`
/// into `branch`. Its id is `"<bus>-<far bus>"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmdLocation {
    pub bus: String,
    pub branch: String,
    pub voltage_phases: PhaseSet,
    pub current_phases: PhaseSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Ti,
    Dsse,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedSmd {
    pub location: SmdLocation,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PlacementPlan {
    pub smds: Vec<PlacedSmd>,
    /// One human-readable line per selection step.
    #[serde(default)]
    pub trace: Vec<String>,
    /// False when a target could not be met within budget.
    #[serde(default = "yes")]
    pub target_met: bool,
}

fn yes() -> bool {
    true
}

impl SmdLocation {
    /// Full-channel device: every bus phase and every branch phase.
    pub fn new(model: &FeederModel, bus: &str, branch: &str) -> Result<Self> {
        let b = model.bus(bus).ok_or_else(|| Error::Unknown { kind: "bus", id: bus.into() })?;
        let br = model.branch(branch).ok_or_else(|| Error::Unknown { kind: "branch", id: branch.into() })?;
        if br.from_bus != bus && br.to_bus != bus {
            return Err(Error::Invalid(format!("branch {branch} is not incident to bus {bus}")));
        }
        Ok(Self { bus: bus.into(), branch: branch.into(), voltage_phases: b.phases, current_phases: br.phases })
    }

    /// Looks up a site by `"<bus>-<far bus>"`.
    pub fn parse(model: &FeederModel, id: &str) -> Result<Self> {
        for br in &model.branches {
            for (near, far) in [(&br.from_bus, &br.to_bus), (&br.to_bus, &br.from_bus)] {
                if format!("{near}-{far}") == id {
                    return Self::new(model, near, &br.id);
                }
            }
        }
        Err(Error::Unknown { kind: "SMD location", id: id.into() })
    }

    pub fn far_bus<'a>(&self, model: &'a FeederModel) -> &'a str {
        let br = model.branch(&self.branch).expect("validated branch");
        if br.from_bus == self.bus { &br.to_bus } else { &br.from_bus }
    }

    pub fn id(&self, model: &FeederModel) -> String {
        format!("{}-{}", self.bus, self.far_bus(model))
    }

    pub fn validate(&self, model: &FeederModel) -> Result<()> {
        let full = Self::new(model, &self.bus, &self.branch)?;
        if !self.voltage_phases.is_subset_of(full.voltage_phases) || !self.current_phases.is_subset_of(full.current_phases) {
            return Err(Error::Invalid(format!("SMD {} lists phases the equipment does not have", self.id(model))));
        }
        Ok(())
    }

    /// Own bus phases plus the branch phases whose far-end voltages follow
    /// from the measured currents.
    pub fn poi(&self) -> usize {
        self.voltage_phases.len() + self.current_phases.len()
    }
}

/// Every (bus, incident branch) pair, excluding transformers and regulators,
/// sorted by id.
pub fn candidate_locations(model: &FeederModel) -> Vec<SmdLocation> {
    let mut out: Vec<(String, SmdLocation)> = Vec::new();
    for br in &model.branches {
        if matches!(br.kind, BranchKind::Transformer | BranchKind::Regulator) {
            continue;
        }
        for bus in [&br.from_bus, &br.to_bus] {
            let loc = SmdLocation::new(model, bus, &br.id).expect("incident by construction");
            out.push((loc.id(model), loc));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, l)| l).collect()
}

impl PlacementPlan {
    pub fn from_locations(locs: Vec<SmdLocation>, purpose: Purpose) -> Self {
        Self { smds: locs.into_iter().map(|location| PlacedSmd { location, purpose }).collect(), trace: vec![], target_met: true }
    }

    pub fn from_ids(model: &FeederModel, ids: &[&str], purpose: Purpose) -> Result<Self> {
        Ok(Self::from_locations(ids.iter().map(|i| SmdLocation::parse(model, i)).collect::<Result<_>>()?, purpose))
    }

    pub fn len(&self) -> usize {
        self.smds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smds.is_empty()
    }

    pub fn ids(&self, model: &FeederModel) -> Vec<String> {
        self.smds.iter().map(|s| s.location.id(model)).collect()
    }

    /// Devices sorted by location id, the feature order.
    pub fn sorted(&self, model: &FeederModel) -> Vec<SmdLocation> {
        let mut v: Vec<(String, SmdLocation)> = self.smds.iter().map(|s| (s.location.id(model), s.location.clone())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(_, l)| l).collect()
    }

    pub fn validate(&self, model: &FeederModel) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.smds {
            s.location.validate(model)?;
            if !seen.insert(s.location.id(model)) {
                return Err(Error::DuplicateId { section: "placement".into(), id: s.location.id(model) });
            }
        }
        Ok(())
    }

    pub fn contains(&self, model: &FeederModel, id: &str) -> bool {
        self.smds.iter().any(|s| s.location.id(model) == id)
    }
}

/// One reported phasor; `None` when the bus is de-energized or the branch
/// is out of service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelValue {
    pub quantity: Quantity,
    pub phase: Phase,
    pub value: Option<Complex64>,
}

/// Voltages (bus phase order) then currents (branch phase order).
pub fn read_channels(model: &FeederModel, loc: &SmdLocation, sol: &PowerFlowSolution) -> Vec<ChannelValue> {
    let bus = model.bus_index(&loc.bus).expect("validated bus");
    let bi = model.branch_index(&loc.branch).expect("validated branch");
    let br = &model.branches[bi];
    let mut out = Vec::with_capacity(loc.poi());
    for p in loc.voltage_phases.iter() {
        out.push(ChannelValue { quantity: Quantity::Voltage, phase: p, value: sol.voltage(bus, p) });
    }
    let cur = sol.branch_current(bi);
    for p in loc.current_phases.iter() {
        let value = cur.and_then(|c| {
            let k = br.phases.position(p)?;
            Some(if br.from_bus == loc.bus { c.from_end[k] } else { c.to_end[k] })
        });
        out.push(ChannelValue { quantity: Quantity::Current, phase: p, value });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ids_and_poi() {
        let m = fixtures::ieee34();
        let l = SmdLocation::parse(&m, "808-812").unwrap();
        assert_eq!(l.poi(), 6);
        assert_eq!(l.id(&m), "808-812");
        let lat = SmdLocation::parse(&m, "808-810").unwrap();
        assert_eq!(lat.current_phases.len(), 1);
        assert_eq!(SmdLocation::parse(&m, "810-808").unwrap().poi(), 2);
        assert!(SmdLocation::parse(&m, "800-890").is_err());
    }

    #[test]
    fn candidates_skip_transformers_and_regulators() {
        let m = fixtures::ieee34();
        let c = candidate_locations(&m);
        assert!(c.iter().all(|l| !matches!(m.branch(&l.branch).unwrap().kind, BranchKind::Transformer | BranchKind::Regulator)));
        let ids: Vec<_> = c.iter().map(|l| l.id(&m)).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert!(ids.contains(&"888-890".to_string()));
    }

    #[test]
    fn duplicate_sites_rejected() {
        let m = fixtures::ieee34();
        let p = PlacementPlan::from_ids(&m, &["808-812", "808-812"], Purpose::Dsse).unwrap();
        assert!(p.validate(&m).is_err());
    }
}
