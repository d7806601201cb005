//! Bundled feeder fixtures.

use crate::feeder::{parse_feeder, FeederModel};

/// Radial 34-bus feeder modeled after the IEEE 34-node test feeder, with
/// three DG units.
pub const IEEE34_JSON: &str = include_str!("../fixtures/ieee34.json");

/// The same feeder with two sectionalizing and two tie switches.
pub const IEEE34_SWITCHABLE_JSON: &str = include_str!("../fixtures/ieee34_switchable.json");

pub fn ieee34() -> FeederModel {
    parse_feeder(IEEE34_JSON).expect("bundled fixture is valid")
}

pub fn ieee34_switchable() -> FeederModel {
    parse_feeder(IEEE34_SWITCHABLE_JSON).expect("bundled fixture is valid")
}
