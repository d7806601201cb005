use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{FeederModel, NodeIndex};
use crate::error::{Error, Result};

/// Switch statuses aligned with [`FeederModel::switch_ids`]; `true` = closed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub statuses: Vec<bool>,
}

impl SwitchConfig {
    pub fn new(statuses: Vec<bool>) -> Self {
        Self { statuses }
    }

    /// Parses a bit string such as `"1100"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        bits.chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(Error::Invalid(format!("bad switch status `{c}` in `{bits}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn bits(&self) -> String {
        self.statuses.iter().map(|&s| if s { '1' } else { '0' }).collect()
    }

    fn check_len(&self, model: &FeederModel) -> Result<()> {
        if self.statuses.len() != model.num_switches() {
            return Err(Error::SwitchCountMismatch { expected: model.num_switches(), got: self.statuses.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityRule {
    /// Additionally reject configurations whose energized graph has a loop.
    pub forbid_loops: bool,
}

/// Feasible switch configurations; the position is the TI class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyCatalog {
    pub switch_ids: Vec<String>,
    pub configs: Vec<SwitchConfig>,
}

impl TopologyCatalog {
    pub fn single(model: &FeederModel, config: SwitchConfig) -> Self {
        Self { switch_ids: model.switch_ids(), configs: vec![config] }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn index_of(&self, config: &SwitchConfig) -> Option<usize> {
        self.configs.iter().position(|c| c == config)
    }
}

/// Energized part of the feeder under one switch configuration.
#[derive(Debug, Clone)]
pub struct TopologyView {
    pub config: SwitchConfig,
    /// Per bus, in model order.
    pub energized: Vec<bool>,
    /// Branches in service: non-switch branches and closed switches with
    /// both ends energized.
    pub active_branches: Vec<usize>,
    pub nodes: NodeIndex,
}

impl TopologyView {
    pub fn is_branch_active(&self, branch: usize) -> bool {
        self.active_branches.binary_search(&branch).is_ok()
    }
}

fn in_service(model: &FeederModel, config: &SwitchConfig) -> Vec<bool> {
    let mut on = vec![true; model.branches.len()];
    for (k, &b) in model.switch_branches().iter().enumerate() {
        on[b] = config.statuses[k];
    }
    on
}

/// Buses reachable from the source through in-service branches.
fn reachable(model: &FeederModel, on: &[bool]) -> Vec<bool> {
    let n = model.buses.len();
    let mut adj = vec![Vec::new(); n];
    for (i, br) in model.branches.iter().enumerate() {
        if on[i] {
            let f = model.bus_lookup[&br.from_bus];
            let t = model.bus_lookup[&br.to_bus];
            adj[f].push(t);
            adj[t].push(f);
        }
    }
    let mut seen = vec![false; n];
    let src = model.source_bus_index();
    seen[src] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

pub(crate) fn islanded_served_buses(model: &FeederModel, config: &SwitchConfig) -> Vec<String> {
    let seen = reachable(model, &in_service(model, config));
    model.served_buses().into_iter().filter(|&b| !seen[b]).map(|b| model.buses[b].id.clone()).collect()
}

fn has_loop(model: &FeederModel, on: &[bool], energized: &[bool]) -> bool {
    let mut parent: Vec<usize> = (0..model.buses.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, br) in model.branches.iter().enumerate() {
        let f = model.bus_lookup[&br.from_bus];
        let t = model.bus_lookup[&br.to_bus];
        if !on[i] || !energized[f] {
            continue;
        }
        let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
        if rf == rt {
            return true;
        }
        parent[rf] = rt;
    }
    false
}

/// True iff every bus carrying a load or DG is connected to the source.
pub fn check_connectivity(model: &FeederModel, config: &SwitchConfig) -> Result<bool> {
    config.check_len(model)?;
    Ok(islanded_served_buses(model, config).is_empty())
}

fn is_feasible(model: &FeederModel, config: &SwitchConfig, rule: FeasibilityRule) -> bool {
    let on = in_service(model, config);
    let seen = reachable(model, &on);
    if model.served_buses().iter().any(|&b| !seen[b]) {
        return false;
    }
    !(rule.forbid_loops && has_loop(model, &on, &seen))
}

/// All feasible configurations in lexicographic order of the status vector
/// (open < closed, first switch most significant).
pub fn enumerate_feasible_topologies(model: &FeederModel, rule: FeasibilityRule) -> Result<TopologyCatalog> {
    let s = model.num_switches();
    if s > 20 {
        return Err(Error::TooManySwitches(s));
    }
    let configs = (0u32..(1 << s))
        .map(|k| SwitchConfig::new((0..s).map(|i| k >> (s - 1 - i) & 1 == 1).collect()))
        .filter(|c| is_feasible(model, c, rule))
        .collect();
    Ok(TopologyCatalog { switch_ids: model.switch_ids(), configs })
}

/// Removes open switches and marks buses cut off from the source as
/// de-energized; those are excluded from the node index.
pub fn apply_switch_config(model: &FeederModel, config: &SwitchConfig) -> Result<TopologyView> {
    config.check_len(model)?;
    let islanded = islanded_served_buses(model, config);
    if !islanded.is_empty() {
        return Err(Error::Infeasible(islanded));
    }
    let on = in_service(model, config);
    let energized = reachable(model, &on);
    let active_branches = (0..model.branches.len())
        .filter(|&i| on[i] && energized[model.bus_lookup[&model.branches[i].from_bus]])
        .collect();
    let nodes = NodeIndex::new(model, &energized);
    Ok(TopologyView { config: config.clone(), energized, active_branches, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::parse_feeder;

    fn chain(switch_closed: bool, load_far: bool) -> String {
        let load_bus = if load_far { "3" } else { "2" };
        format!(
            r#"{{"bases": {{"kva": 1000}}, "source": {{"bus": "1", "voltage_pu": 1.0}},
            "buses": [{{"id": "1", "phases": "a", "base_kv": 12.47}}, {{"id": "2", "phases": "a", "base_kv": 12.47}},
                      {{"id": "3", "phases": "a", "base_kv": 12.47}}],
            "branches": [{{"id": "L12", "from": "1", "to": "2", "phases": "a", "kind": "line", "z": [[[0.1, 0.2]]]}},
                         {{"id": "S23", "from": "2", "to": "3", "phases": "a", "kind": "switch", "z": [[[0.0001, 0.0]]], "closed": {switch_closed}}}],
            "loads": [{{"id": "LD", "bus": "{load_bus}", "connection": "wye", "per_phase": [{{"phase": "a", "p_kw": 10, "q_kvar": 2}}]}}]}}"#
        )
    }

    #[test]
    fn open_switch_islands_far_load() {
        let m = parse_feeder(&chain(true, true)).unwrap();
        assert!(!check_connectivity(&m, &SwitchConfig::new(vec![false])).unwrap());
        assert!(check_connectivity(&m, &SwitchConfig::new(vec![true])).unwrap());
        let cat = enumerate_feasible_topologies(&m, FeasibilityRule::default()).unwrap();
        assert_eq!(cat.len(), 1);
        assert!(matches!(apply_switch_config(&m, &SwitchConfig::new(vec![false])), Err(Error::Infeasible(_))));
    }

    #[test]
    fn length_mismatch_is_error() {
        let m = parse_feeder(&chain(true, true)).unwrap();
        assert!(matches!(check_connectivity(&m, &SwitchConfig::new(vec![])), Err(Error::SwitchCountMismatch { .. })));
    }

    #[test]
    fn unloaded_lateral_deenergizes() {
        let m = parse_feeder(&chain(false, false)).unwrap();
        let view = apply_switch_config(&m, &m.base_config()).unwrap();
        assert_eq!(view.energized, vec![true, true, false]);
        assert_eq!(view.nodes.len(), 2);
        assert_eq!(view.active_branches, vec![0]);
        let all = apply_switch_config(&m, &SwitchConfig::new(vec![true])).unwrap();
        assert_eq!(all.energized, vec![true; 3]);
    }

    #[test]
    fn bits_round_trip() {
        let c = SwitchConfig::from_bits("1010").unwrap();
        assert_eq!(c.bits(), "1010");
        assert!(SwitchConfig::from_bits("10x").is_err());
    }
}
