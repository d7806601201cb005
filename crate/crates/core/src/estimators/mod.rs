//! Learned state estimation and topology identification.

mod dataset;
mod layout;
mod metrics;
mod models;
mod scenario;

pub use dataset::{build_dataset, manifest_path, Dataset, DatasetManifest, DatasetSpec, TaskKind};
pub use layout::{FeatureChannel, FeatureLayout, StateLayout};
pub use metrics::{
    angle_errors, class_metrics, mae_per_node, mae_phase, mape_magnitude, min_tolerance_samples, state_metrics, tolerance_upper_bound,
    ClassMetrics, MetricsReport, StateMetrics, ToleranceBound,
};
pub use models::{
    argmax, estimate_states, fine_tune, identify_topology, train_dsse, train_ti, EstimatorConfig, FineTuneConfig, NetworkConfig, Trained,
};
pub use scenario::{run_scenario, ScenarioContext, ScenarioReport, StepReport};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{enumerate_feasible_topologies, FeasibilityRule};
    use crate::fixtures;
    use crate::loadmodel::nominal_pdfs;
    use crate::measerr::{ErrorMode, ErrorModelConfig};
    use crate::nn::LossKind;
    use crate::smd::{PlacementPlan, Purpose};

    fn small(loss: LossKind, epochs: usize, width: usize) -> EstimatorConfig {
        let mut c = EstimatorConfig { network: NetworkConfig { hidden_layers: 2, width }, train: crate::nn::TrainConfig::new(loss, epochs) };
        c.train.lr_init = 1e-3;
        c.train.dropout_rate = 0.0;
        c
    }

    fn s1_dataset(rows: usize, seed: u64, mode: ErrorMode) -> Dataset {
        let m = fixtures::ieee34();
        let plan = PlacementPlan::from_ids(&m, &["808-812", "888-890"], Purpose::Dsse).unwrap();
        let spec = DatasetSpec::dsse(m.base_config(), rows, seed, ErrorModelConfig::with_mode(mode));
        build_dataset(&m, &nominal_pdfs(&m, 0.3), &plan, &spec).unwrap()
    }

    #[test]
    fn feature_and_state_widths() {
        let ds = s1_dataset(5, 1, ErrorMode::None);
        // two three-phase devices, three voltages and three currents each
        assert_eq!(ds.x.cols, 24);
        assert_eq!(ds.manifest.feature_names[0], "808-812.Va.mag");
        assert_eq!(ds.y.cols, 2 * 86);
        let m = fixtures::ieee34_switchable();
        let cat = enumerate_feasible_topologies(&m, FeasibilityRule::default()).unwrap();
        let plan = PlacementPlan::from_ids(&m, &["844-846", "860-834"], Purpose::Ti).unwrap();
        let layout = FeatureLayout::new(&m, &plan, &cat.configs, false).unwrap();
        assert!(layout.channels.iter().all(|c| c.quantity == crate::measerr::Quantity::Current));
        assert_eq!(layout.width(), 2 * layout.channels.len() + layout.channels.iter().filter(|c| c.flagged).count());
    }

    #[test]
    fn dataset_is_deterministic_across_workers() {
        let m = fixtures::ieee34();
        let plan = PlacementPlan::from_ids(&m, &["808-812"], Purpose::Dsse).unwrap();
        let mut spec = DatasetSpec::dsse(m.base_config(), 12, 9, ErrorModelConfig::default());
        let pdfs = nominal_pdfs(&m, 0.3);
        let a = build_dataset(&m, &pdfs, &plan, &spec).unwrap();
        spec.workers = 3;
        let b = build_dataset(&m, &pdfs, &plan, &spec).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        spec.seed = 10;
        assert_ne!(build_dataset(&m, &pdfs, &plan, &spec).unwrap().x, a.x);
    }

    #[test]
    fn dataset_file_roundtrip() {
        let ds = s1_dataset(4, 2, ErrorMode::TwoLevel);
        let path = std::env::temp_dir().join(format!("sparsegrid-ds-{}.csv", std::process::id()));
        ds.write(&path).unwrap();
        let back = Dataset::read(&fixtures::ieee34(), &path).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.manifest, ds.manifest);
        let _ = std::fs::remove_file(manifest_path(&path));
        let _ = std::fs::remove_file(&path);
    }

    #[test]
    fn overfits_a_small_set_and_batches_match_rows() {
        use crate::nn::{init_he_normal, train, LayerSpec, TrainData};
        let ds = s1_dataset(50, 3, ErrorMode::None);
        let mut cfg = small(LossKind::Mse, 800, 128).train;
        cfg.batch_size = 10;
        let specs = [LayerSpec::relu(128), LayerSpec::relu(128), LayerSpec::linear(ds.y.cols)];
        let params = init_he_normal(&specs, ds.x.cols, 0).unwrap();
        let data = TrainData { train_x: &ds.x, train_y: &ds.y, val_x: &ds.x, val_y: &ds.y };
        let (params, _) = train(params, &data, &cfg).unwrap();
        let est = params.predict(&ds.x).unwrap();
        let mae = mae_phase(&est, &ds.y).unwrap();
        assert!(mae < 0.02, "training MAE {mae}");
        for r in 0..ds.len() {
            let one = params.predict_one(ds.x.row(r)).unwrap();
            for (a, b) in one.iter().zip(est.row(r)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_scaler_refit_preserves_the_function() {
        let ds = s1_dataset(40, 4, ErrorMode::None);
        let t = train_dsse(&ds, &small(LossKind::Mse, 5, 16)).unwrap();
        let other = s1_dataset(40, 5, ErrorMode::None);
        let mut params = t.checkpoint.params.clone();
        models::refit_output_scaler(&mut params, &other.y);
        let a = t.checkpoint.params.predict(&other.x).unwrap();
        let b = params.predict(&other.x).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        let fp = fixtures::ieee34().fingerprint();
        assert!(estimate_states(&t.checkpoint, "other", &other.x).is_err());
        let (ck, h, _) = fine_tune(&t.checkpoint, &other, &FineTuneConfig { epochs: 2, ..Default::default() }).unwrap();
        assert_eq!(h.epochs.len(), 2);
        assert_ne!(ck.params.input_scaler, t.checkpoint.params.input_scaler);
        assert!(estimate_states(&ck, &fp, &other.x).is_ok());
    }

    fn ti_setup() -> (crate::feeder::FeederModel, crate::feeder::TopologyCatalog, PlacementPlan) {
        let m = fixtures::ieee34_switchable();
        let cat = enumerate_feasible_topologies(&m, FeasibilityRule::default()).unwrap();
        let plan = PlacementPlan::from_ids(&m, &["844-846", "860-834"], Purpose::Ti).unwrap();
        (m, cat, plan)
    }

    #[test]
    fn topologies_are_separable_from_currents() {
        let (m, cat, plan) = ti_setup();
        let spec = DatasetSpec::ti(cat.configs.clone(), 60, 6, ErrorModelConfig::with_mode(ErrorMode::GaussianTveOnly));
        let ds = build_dataset(&m, &nominal_pdfs(&m, 0.3), &plan, &spec).unwrap();
        let t = train_ti(&ds, &small(LossKind::CategoricalCrossEntropy, 60, 64)).unwrap();
        let test = ds.select(&t.test_rows);
        let ids: Vec<usize> = identify_topology(&t.checkpoint, &m.fingerprint(), &test.x).unwrap().into_iter().map(|p| p.0).collect();
        let acc = class_metrics(&ids, &test.topology, &ds.manifest.label_map).accuracy_pct;
        assert!(acc >= 90.0, "accuracy {acc}");
    }

    #[test]
    fn steady_topology_never_fine_tunes() {
        let (m, cat, plan) = ti_setup();
        let pdfs = nominal_pdfs(&m, 0.3);
        let err = ErrorModelConfig::with_mode(ErrorMode::None);
        let ti_ds = build_dataset(&m, &pdfs, &plan, &DatasetSpec::ti(cat.configs.clone(), 40, 7, err.clone())).unwrap();
        let ti = train_ti(&ti_ds, &small(LossKind::CategoricalCrossEntropy, 40, 64)).unwrap();
        let base = cat.configs[0].clone();
        let mut spec = DatasetSpec::dsse(base.clone(), 60, 8, err.clone());
        spec.layout_topologies = cat.configs.clone();
        let ds = build_dataset(&m, &pdfs, &plan, &spec).unwrap();
        let dsse = train_dsse(&ds, &small(LossKind::Mse, 5, 16)).unwrap();
        let ctx = ScenarioContext {
            model: &m,
            catalog: &cat,
            pdfs: &pdfs,
            dsse_plan: &plan,
            ti_plan: &plan,
            ti: &ti.checkpoint,
            dsse: &dsse.checkpoint,
            error: err,
            sampler: Default::default(),
            snapshots: 9,
            fine_tune_rows: 20,
            fine_tune: FineTuneConfig { epochs: 1, ..Default::default() },
            seed: 1,
        };
        let report = run_scenario(&[base.clone(), base], &ctx).unwrap();
        assert!(report.steps.iter().all(|s| s.ti_correct));
        assert_eq!(report.fine_tune_count(), 0);
        for s in &report.steps {
            assert_eq!(s.angle_mae_adaptive_deg, s.angle_mae_frozen_deg);
        }
    }
}
