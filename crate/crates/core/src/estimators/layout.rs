//! Fixed orderings of network inputs (device channels) and outputs (states).

use serde::{Deserialize, Serialize};

use crate::feeder::{apply_switch_config, FeederModel, Phase, SwitchConfig};
use crate::measerr::{apply_two_level_error, ErrorModelConfig, PhasorMeasurement, Quantity};
use crate::phasor::Phasor;
use crate::powerflow::PowerFlowSolution;
use crate::rng::Rng;
use crate::smd::{read_channels, PlacementPlan, SmdLocation};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChannel {
    pub smd: String,
    pub quantity: Quantity,
    pub phase: Phase,
    /// The channel is dead under some topology and carries a validity flag.
    pub flagged: bool,
}

/// Per device (sorted by id), per channel: magnitude then angle in degrees;
/// validity flags, when any, follow all phasor features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub smds: Vec<SmdLocation>,
    pub channels: Vec<FeatureChannel>,
    pub include_voltages: bool,
}

fn quantity_letter(q: Quantity) -> char {
    match q {
        Quantity::Voltage => 'V',
        Quantity::Current => 'I',
    }
}

impl FeatureLayout {
    /// `topologies` are all configurations the layout must cover.
    pub fn new(model: &FeederModel, plan: &PlacementPlan, topologies: &[SwitchConfig], include_voltages: bool) -> Result<Self> {
        plan.validate(model)?;
        let views = topologies.iter().map(|c| apply_switch_config(model, c)).collect::<Result<Vec<_>>>()?;
        let smds = plan.sorted(model);
        let mut channels = Vec::new();
        for loc in &smds {
            let id = loc.id(model);
            let bus = model.bus_index(&loc.bus).expect("validated");
            let br = model.branch_index(&loc.branch).expect("validated");
            if include_voltages {
                for p in loc.voltage_phases.iter() {
                    let flagged = views.iter().any(|v| !v.energized[bus]);
                    channels.push(FeatureChannel { smd: id.clone(), quantity: Quantity::Voltage, phase: p, flagged });
                }
            }
            for p in loc.current_phases.iter() {
                let flagged = views.iter().any(|v| !v.is_branch_active(br));
                channels.push(FeatureChannel { smd: id.clone(), quantity: Quantity::Current, phase: p, flagged });
            }
        }
        Ok(Self { smds, channels, include_voltages })
    }

    pub fn width(&self) -> usize {
        2 * self.channels.len() + self.channels.iter().filter(|c| c.flagged).count()
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.channels {
            let q = quantity_letter(c.quantity);
            out.push(format!("{}.{q}{}.mag", c.smd, c.phase));
            out.push(format!("{}.{q}{}.ang", c.smd, c.phase));
        }
        for c in self.channels.iter().filter(|c| c.flagged) {
            out.push(format!("{}.{}{}.valid", c.smd, quantity_letter(c.quantity), c.phase));
        }
        out
    }

    pub fn phasor_count(&self) -> usize {
        self.channels.len()
    }

    /// Reads the devices from a solved network, corrupts the live channels
    /// and flattens them into a feature row.
    pub fn measure(&self, model: &FeederModel, sol: &PowerFlowSolution, err: &ErrorModelConfig, rng: &mut Rng) -> Vec<f64> {
        let mut raw = Vec::with_capacity(self.channels.len());
        for loc in &self.smds {
            for ch in read_channels(model, loc, sol) {
                if ch.quantity == Quantity::Voltage && !self.include_voltages {
                    continue;
                }
                raw.push(ch);
            }
        }
        let live: Vec<PhasorMeasurement> =
            raw.iter().filter_map(|c| c.value.map(|value| PhasorMeasurement { quantity: c.quantity, value })).collect();
        let mut noisy = apply_two_level_error(&live, err, rng).into_iter();
        let mut feats = Vec::with_capacity(self.width());
        let mut flags = Vec::new();
        for (c, spec) in raw.iter().zip(&self.channels) {
            match c.value {
                Some(_) => {
                    let p = Phasor::from_complex(noisy.next().expect("one noisy value per live channel").value);
                    feats.push(p.magnitude);
                    feats.push(p.angle_deg);
                }
                None => feats.extend([0.0, 0.0]),
            }
            if spec.flagged {
                flags.push(if c.value.is_some() { 1.0 } else { 0.0 });
            }
        }
        feats.extend(flags);
        feats
    }
}

/// Every node-phase of the feeder with all switches closed, canonical
/// order; per node magnitude (pu) then angle (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub nodes: Vec<(String, Phase)>,
}

impl StateLayout {
    pub fn new(model: &FeederModel) -> Result<Self> {
        let closed = SwitchConfig::new(vec![true; model.num_switches()]);
        let view = apply_switch_config(model, &closed)?;
        Ok(Self { nodes: view.nodes.iter().map(|(b, p)| (model.buses[b].id.clone(), p)).collect() })
    }

    pub fn width(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.nodes.iter().flat_map(|(b, p)| [format!("{b}.{p}.mag"), format!("{b}.{p}.ang")]).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.nodes.iter().map(|(b, p)| format!("{b}.{p}")).collect()
    }

    /// De-energized nodes read as zero magnitude and angle.
    pub fn state(&self, model: &FeederModel, sol: &PowerFlowSolution) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (b, p) in &self.nodes {
            match model.bus_index(b).and_then(|i| sol.voltage(i, *p)) {
                Some(v) => {
                    let ph = Phasor::from_complex(v);
                    out.push(ph.magnitude);
                    out.push(ph.angle_deg);
                }
                None => out.extend([0.0, 0.0]),
            }
        }
        out
    }
}
