//! Smart-meter energy series and their reduction to transformer demand.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub interval_hours: f64,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartMeterSeries {
    pub meter_id: String,
    pub transformer_group: String,
    pub readings: Vec<Reading>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    meter_id: String,
    transformer_group: String,
    interval_hours: f64,
    energy_kwh: f64,
}

impl SmartMeterSeries {
    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.readings.iter().enumerate() {
            if !(r.interval_hours > 0.0) || !(r.energy_kwh >= 0.0) || !r.energy_kwh.is_finite() {
                return Err(Error::Invalid(format!("meter {} reading {k}: interval must be > 0 and energy >= 0", self.meter_id)));
            }
        }
        Ok(())
    }

    pub fn average_kw(&self) -> Vec<f64> {
        self.readings.iter().map(|r| r.energy_kwh / r.interval_hours).collect()
    }
}

/// Rows keep file order; a meter's readings are its rows in sequence.
pub fn read_meter_csv<R: Read>(input: R) -> Result<Vec<SmartMeterSeries>> {
    let mut out: Vec<SmartMeterSeries> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize::<Row>() {
        let row = row?;
        let k = *pos.entry(row.meter_id.clone()).or_insert_with(|| {
            out.push(SmartMeterSeries { meter_id: row.meter_id.clone(), transformer_group: row.transformer_group.clone(), readings: vec![] });
            out.len() - 1
        });
        if out[k].transformer_group != row.transformer_group {
            return Err(Error::Invalid(format!("meter {} appears in two groups", row.meter_id)));
        }
        out[k].readings.push(Reading { interval_hours: row.interval_hours, energy_kwh: row.energy_kwh });
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

pub fn write_meter_csv<W: Write>(series: &[SmartMeterSeries], output: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    for s in series {
        for r in &s.readings {
            w.serialize(Row {
                meter_id: s.meter_id.clone(),
                transformer_group: s.transformer_group.clone(),
                interval_hours: r.interval_hours,
                energy_kwh: r.energy_kwh,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per group and time slot, the sum over meters of energy / interval (kW).
pub fn aggregate_to_transformer(series: &[SmartMeterSeries]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut groups: BTreeMap<&str, Vec<&SmartMeterSeries>> = BTreeMap::new();
    for s in series {
        s.validate()?;
        groups.entry(&s.transformer_group).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (g, members) in groups {
        let base = &members[0].readings;
        if base.is_empty() {
            return Err(Error::Invalid(format!("group {g} has no readings")));
        }
        let mut total = vec![0.0; base.len()];
        for m in &members {
            let same = m.readings.len() == base.len()
                && m.readings.iter().zip(base).all(|(a, b)| (a.interval_hours - b.interval_hours).abs() <= 1e-9);
            if !same {
                return Err(Error::Invalid(format!("group {g}: meter {} has a different time base", m.meter_id)));
            }
            for (t, r) in total.iter_mut().zip(&m.readings) {
                *t += r.energy_kwh / r.interval_hours;
            }
        }
        out.insert(g.to_string(), total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(id: &str, g: &str, r: &[(f64, f64)]) -> SmartMeterSeries {
        SmartMeterSeries {
            meter_id: id.into(),
            transformer_group: g.into(),
            readings: r.iter().map(|&(h, e)| Reading { interval_hours: h, energy_kwh: e }).collect(),
        }
    }

    #[test]
    fn quarter_hour_energy_to_power() {
        let g = aggregate_to_transformer(&[series("m", "T", &[(0.25, 2.5)])]).unwrap();
        assert_eq!(g["T"], vec![10.0]);
    }

    #[test]
    fn meters_add_up() {
        let g = aggregate_to_transformer(&[series("m1", "T", &[(1.0, 1.0)]), series("m2", "T", &[(1.0, 2.0)])]).unwrap();
        assert_eq!(g["T"], vec![3.0]);
    }

    #[test]
    fn empty_group_is_named() {
        let e = aggregate_to_transformer(&[series("m", "T9", &[])]).unwrap_err();
        assert!(e.to_string().contains("T9"));
    }

    #[test]
    fn mismatched_time_base() {
        let e = aggregate_to_transformer(&[series("m1", "T", &[(1.0, 1.0)]), series("m2", "T", &[(0.25, 1.0)])]);
        assert!(e.is_err());
        assert!(aggregate_to_transformer(&[series("m1", "T", &[(-1.0, 1.0)])]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = vec![series("m1", "T1", &[(1.0, 1.5), (1.0, 2.0)]), series("m2", "T2", &[(0.25, 0.1)])];
        let mut buf = Vec::new();
        write_meter_csv(&s, &mut buf).unwrap();
        assert_eq!(read_meter_csv(buf.as_slice()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn permutation_invariant(e in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 4), 1..6), rot in 0usize..6) {
            let s: Vec<_> = e.iter().enumerate()
                .map(|(k, v)| series(&format!("m{k}"), "T", &v.iter().map(|x| (1.0, *x)).collect::<Vec<_>>()))
                .collect();
            let mut r = s.clone();
            r.rotate_left(rot % s.len());
            r.reverse();
            let a = &aggregate_to_transformer(&s).unwrap()["T"];
            let b = &aggregate_to_transformer(&r).unwrap()["T"];
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
