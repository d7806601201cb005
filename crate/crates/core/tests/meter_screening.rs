use sparsegrid::fixtures;
use sparsegrid::loadmodel::{aggregate_to_transformer, ks_two_sample, synth_meter_data, SmartMeterSeries, SynthConfig};
use sparsegrid::measerr::perturb_smart_meter;
use sparsegrid::rng;

#[test]
fn ten_percent_meter_noise_is_not_rejected() {
    let m = fixtures::ieee34();
    let meters = synth_meter_data(&m, &SynthConfig::default()).unwrap();
    let noisy: Vec<SmartMeterSeries> = meters
        .iter()
        .enumerate()
        .map(|(i, s)| SmartMeterSeries { readings: perturb_smart_meter(&s.readings, 10.0, &mut rng::stream(4, rng::tags::METER, i as u64)), ..s.clone() })
        .collect();
    let clean = aggregate_to_transformer(&meters).unwrap();
    let dirty = aggregate_to_transformer(&noisy).unwrap();
    assert_eq!(clean.len(), 25);
    for (g, x) in &clean {
        let out = ks_two_sample(x, &dirty[g], 0.05).unwrap();
        assert!(!out.reject, "group {g}: D {} p {}", out.statistic, out.p_value);
    }
}
