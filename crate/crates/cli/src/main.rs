//! `sparsegrid`: offline learning and replayed real-time operation over
//! files on disk.
//!
//! Exit codes: 0 success, 1 pipeline error (one `error: <class>: <detail>`
//! line on stderr), 2 usage error.

mod artifact;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sparsegrid::estimators::{
    build_dataset, class_metrics, estimate_states, identify_topology, manifest_path, run_scenario, state_metrics, train_dsse, train_ti,
    Dataset, DatasetSpec, MetricsReport, ScenarioContext,
};
use sparsegrid::feeder::{check_connectivity, enumerate_feasible_topologies, FeasibilityRule, FeederModel, SwitchConfig, TopologyCatalog};
use sparsegrid::loadmodel::{
    aggregate_to_transformer, fit_group_pdfs, read_meter_csv, sample_loads, synth_meter_data, write_meter_csv, KdeFitOptions, LoadPdf,
    SamplerConfig,
};
use sparsegrid::lse::{build_h, estimate_with_noise, greedy_observability_placement};
use sparsegrid::measerr::ErrorMode;
use sparsegrid::nn::{load_checkpoint, save_checkpoint, Checkpoint, Mat};
use sparsegrid::placement::{integrated_placement, IntegratedPlacement};
use sparsegrid::phasor::Phasor;
use sparsegrid::powerflow::{PowerFlowOptions, PowerFlowSolver};
use sparsegrid::rng::{derive_seed, stream, tags};
use sparsegrid::smd::{PlacementPlan, Purpose};
use sparsegrid::{Error, Result};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sparsegrid", version, about = "Topology identification and state estimation from sparse synchrophasors")]
struct Cli {
    /// JSON run configuration merged over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for dataset generation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feeder description checks.
    Feeder {
        #[command(subcommand)]
        op: FeederOp,
    },
    /// Switch configurations.
    Topo {
        #[command(subcommand)]
        op: TopoOp,
    },
    /// Smart-meter data and load distributions.
    Loads {
        #[command(subcommand)]
        op: LoadsOp,
    },
    /// Training and test sets.
    Dataset {
        #[command(subcommand)]
        op: DatasetOp,
    },
    /// Fit a network on a dataset.
    Train {
        task: Task,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Device placement.
    Place {
        #[command(subcommand)]
        op: PlaceOp,
    },
    /// Held-out metrics.
    Eval {
        #[command(subcommand)]
        op: EvalOp,
    },
    /// Replay switching events.
    Scenario {
        #[command(subcommand)]
        op: ScenarioOp,
    },
}

#[derive(Subcommand)]
enum FeederOp {
    /// Parse a feeder file and report its contents.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum TopoOp {
    /// All feasible switch configurations.
    Enumerate {
        /// Reject configurations with closed loops.
        #[arg(long)]
        radial: bool,
    },
}

#[derive(Subcommand)]
enum LoadsOp {
    /// Synthetic smart-meter readings for every load.
    Synth,
    /// Kernel density per transformer group.
    Fit {
        #[arg(long)]
        meters: Option<PathBuf>,
    },
    /// Draw load scenarios.
    Sample {
        #[arg(long)]
        pdfs: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Dsse,
    Ti,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseMode {
    None,
    Tve,
    TwoLevel,
}

#[derive(Subcommand)]
enum DatasetOp {
    Generate {
        #[arg(long, value_enum)]
        kind: Task,
        #[arg(long)]
        pdfs: PathBuf,
        /// Placement artifact.
        #[arg(long)]
        plan: PathBuf,
        /// Rows (per topology for `ti`); the configuration value when absent.
        #[arg(long)]
        rows: Option<usize>,
        /// Switch statuses for `dsse`, e.g. `1101`; all closed-as-given when absent.
        #[arg(long)]
        topology: Option<String>,
        /// Measurement noise; the configuration value when absent.
        #[arg(long, value_enum)]
        noise: Option<NoiseMode>,
        /// Independent stream index, e.g. 1 for a test set.
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
}

#[derive(Subcommand)]
enum PlaceOp {
    /// Forward selection for topology identification plus one device per voltage cluster.
    Integrated {
        #[arg(long)]
        pdfs: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalOp {
    Dsse {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    Ti {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Linear state estimation with a full-observability placement.
    Lse {
        #[arg(long)]
        pdfs: PathBuf,
        /// Placement artifact; a greedy observable placement when absent.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
    },
}

#[derive(Subcommand)]
enum ScenarioOp {
    Run {
        /// Script name from the configuration, or a JSON file with a list of bit strings.
        script: String,
        #[arg(long)]
        pdfs: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        ti: PathBuf,
        #[arg(long)]
        dsse: PathBuf,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
}

impl Ctx {
    fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn json<T: serde::Serialize>(&self, kind: &str, body: &T) -> Result<PathBuf> {
        artifact::write_json(self.out(), kind, &self.hash, self.cfg.seed, body)
    }

    fn catalog(&self, model: &FeederModel) -> Result<TopologyCatalog> {
        if model.num_switches() == 0 {
            return Ok(TopologyCatalog::single(model, model.base_config()));
        }
        enumerate_feasible_topologies(model, FeasibilityRule::default())
    }
}

fn announce(path: &Path) {
    println!("{}", path.display());
}

fn read_pdfs(path: &Path) -> Result<BTreeMap<String, LoadPdf>> {
    artifact::read_json(path, "pdfs")
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(&std::fs::read(path)?)
}

fn write_checkpoint(ctx: &Ctx, kind: &str, mut ck: Checkpoint) -> Result<PathBuf> {
    ck.meta.notes["config_hash"] = serde_json::Value::String(ctx.hash.clone());
    ck.meta.notes["seed"] = ctx.cfg.seed.into();
    artifact::write_bytes(ctx.out(), kind, "json", save_checkpoint(&ck).as_bytes())
}

fn write_dataset(ctx: &Ctx, mut ds: Dataset) -> Result<PathBuf> {
    ds.manifest.config_hash = ctx.hash.clone();
    std::fs::create_dir_all(ctx.out())?;
    let tmp = ctx.out().join(format!(".dataset-{}.csv", std::process::id()));
    ds.write(&tmp)?;
    let (data, side) = (std::fs::read(&tmp)?, std::fs::read(manifest_path(&tmp))?);
    std::fs::remove_file(manifest_path(&tmp))?;
    std::fs::remove_file(&tmp)?;
    artifact::write_pair(ctx.out(), "dataset", "csv", &data, ".manifest.json", &side)
}

/// Devices feeding the topology classifier.
fn ti_plan(p: &PlacementPlan) -> PlacementPlan {
    PlacementPlan { smds: p.smds.iter().filter(|s| s.purpose != Purpose::Dsse).cloned().collect(), ..p.clone() }
}

fn state_report(title: &str, smds: usize, est: &Mat, truth: &Mat, labels: &[String]) -> Result<MetricsReport> {
    Ok(MetricsReport { title: title.into(), smd_count: smds, state: Some(state_metrics(est, truth, labels)?), topology: None, timings_s: vec![] })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    cfg.dsse.train.seed = cfg.seed;
    cfg.ti.train.seed = cfg.seed;
    cfg.placement.sfs.seed = cfg.seed;
    cfg.sampler.master_seed = derive_seed(cfg.seed, tags::LOADS, 0);
    let ctx = Ctx { hash: cfg.hash(), cfg };
    let cfg = &ctx.cfg;

    match cli.command {
        Command::Feeder { op: FeederOp::Validate { file } } => {
            let model = sparsegrid::feeder::parse_feeder(&std::fs::read_to_string(&file)?)?;
            if !check_connectivity(&model, &model.base_config())? {
                return Err(Error::Infeasible(vec!["base configuration".into()]));
            }
            let nodes = PowerFlowSolver::new(&model, &model.base_config(), PowerFlowOptions::default())?.nodes().len();
            println!("feeder       {}", model.name);
            println!("fingerprint  {}", model.fingerprint());
            println!("buses        {}", model.buses.len());
            println!("branches     {}", model.branches.len());
            println!("switches     {}", model.num_switches());
            println!("loads        {}", model.loads.len());
            println!("DGs          {}", model.dgs.len());
            println!("capacitors   {}", model.capacitors.len());
            println!("node-phases  {nodes}");
            println!("valid");
        }
        Command::Topo { op: TopoOp::Enumerate { radial } } => {
            let model = cfg.model()?;
            let cat = enumerate_feasible_topologies(&model, FeasibilityRule { forbid_loops: radial })?;
            eprintln!("{} feasible configurations of switches {:?}", cat.len(), cat.switch_ids);
            announce(&ctx.json("catalog", &cat)?);
        }
        Command::Loads { op } => {
            let model = cfg.model()?;
            match op {
                LoadsOp::Synth => {
                    let series = synth_meter_data(&model, &sparsegrid::loadmodel::SynthConfig { seed: cfg.seed, ..cfg.synth })?;
                    let mut bytes = Vec::new();
                    write_meter_csv(&series, &mut bytes)?;
                    announce(&artifact::write_bytes(ctx.out(), "meters", "csv", &bytes)?);
                }
                LoadsOp::Fit { meters } => {
                    let series = match meters.or_else(|| cfg.meters.clone()) {
                        Some(p) => read_meter_csv(std::fs::File::open(p)?)?,
                        None => synth_meter_data(&model, &sparsegrid::loadmodel::SynthConfig { seed: cfg.seed, ..cfg.synth })?,
                    };
                    let opts = KdeFitOptions { seed: cfg.seed, ..Default::default() };
                    let pdfs = fit_group_pdfs(&aggregate_to_transformer(&series)?, &opts)?;
                    for p in pdfs.values() {
                        eprintln!("{:<12} bandwidth {:>10.3} kW  scale {:.2}  accepted {}", p.group, p.bandwidth, p.scale, p.accepted);
                    }
                    announce(&ctx.json("pdfs", &pdfs)?);
                }
                LoadsOp::Sample { pdfs, count } => {
                    let scen = sample_loads(&read_pdfs(&pdfs)?, &model, &cfg.sampler, count)?;
                    announce(&ctx.json("scenarios", &scen)?);
                }
            }
        }
        Command::Place { op: PlaceOp::Integrated { pdfs } } => {
            let model = cfg.model()?;
            let out = integrated_placement(&model, &ctx.catalog(&model)?, &read_pdfs(&pdfs)?, &cfg.placement, &cfg.sampler)?;
            out.plan.trace.iter().for_each(|t| eprintln!("{t}"));
            eprintln!("plan {:?}", out.plan.ids(&model));
            announce(&ctx.json("placement", &out)?);
        }
        Command::Dataset { op: DatasetOp::Generate { kind, pdfs, plan, rows, topology, noise, stream: idx } } => {
            let model = cfg.model()?;
            let placement: IntegratedPlacement = artifact::read_json(&plan, "placement")?;
            let catalog = ctx.catalog(&model)?;
            let mut error = cfg.error.clone();
            if let Some(n) = noise {
                error.mode = match n {
                    NoiseMode::None => ErrorMode::None,
                    NoiseMode::Tve => ErrorMode::GaussianTveOnly,
                    NoiseMode::TwoLevel => ErrorMode::TwoLevel,
                };
            }
            let seed = derive_seed(cfg.seed, tags::LOADS, 100 + idx);
            let (mut spec, plan) = match kind {
                Task::Dsse => {
                    let config = match topology {
                        Some(bits) => SwitchConfig::from_bits(&bits)?,
                        None => model.base_config(),
                    };
                    (DatasetSpec::dsse(config, rows.unwrap_or(cfg.dsse_rows), seed, error), placement.plan)
                }
                Task::Ti => {
                    if catalog.len() < 2 {
                        return Err(Error::Invalid("topology identification needs at least two feasible topologies".into()));
                    }
                    (DatasetSpec::ti(catalog.configs.clone(), rows.unwrap_or(cfg.ti_rows_per_topology), seed, error), ti_plan(&placement.plan))
                }
            };
            spec.layout_topologies = catalog.configs.clone();
            spec.sampler = SamplerConfig { master_seed: seed, ..cfg.sampler };
            spec.workers = cfg.workers;
            let ds = build_dataset(&model, &read_pdfs(&pdfs)?, &plan, &spec)?;
            eprintln!("{} rows, {} features, {} outputs, {} redrawn", ds.len(), ds.x.cols, ds.y.cols, ds.manifest.resampled);
            announce(&write_dataset(&ctx, ds)?);
        }
        Command::Train { task, dataset } => {
            let model = cfg.model()?;
            let ds = Dataset::read(&model, &dataset)?;
            let (tr, kind) = match task {
                Task::Dsse => (train_dsse(&ds, &cfg.dsse)?, "dsse"),
                Task::Ti => (train_ti(&ds, &cfg.ti)?, "ti"),
            };
            eprintln!("trained in {:.1} s, best epoch {} (validation loss {:.3e})", tr.seconds, tr.history.best_epoch, tr.history.best_val_loss);
            announce(&write_checkpoint(&ctx, &format!("{kind}-checkpoint"), tr.checkpoint)?);
            eprintln!("history {}", ctx.json(&format!("{kind}-history"), &tr.history)?.display());
        }
        Command::Eval { op } => {
            let model = cfg.model()?;
            let report = match op {
                EvalOp::Dsse { checkpoint, dataset } => {
                    let ck = read_checkpoint(&checkpoint)?;
                    let ds = Dataset::read(&model, &dataset)?;
                    let est = estimate_states(&ck, &model.fingerprint(), &ds.x)?;
                    state_report("DNN state estimation", ds.manifest.placement.len(), &est, &ds.y, &ds.states.labels())?
                }
                EvalOp::Ti { checkpoint, dataset } => {
                    let ck = read_checkpoint(&checkpoint)?;
                    let ds = Dataset::read(&model, &dataset)?;
                    let pred: Vec<usize> = identify_topology(&ck, &model.fingerprint(), &ds.x)?.into_iter().map(|(i, _)| i).collect();
                    MetricsReport {
                        title: "DNN topology identification".into(),
                        smd_count: ds.manifest.placement.len(),
                        state: None,
                        topology: Some(class_metrics(&pred, &ds.topology, &ds.manifest.label_map)),
                        timings_s: vec![],
                    }
                }
                EvalOp::Lse { pdfs, plan, scenarios } => eval_lse(&ctx, &model, &read_pdfs(&pdfs)?, plan.as_deref(), scenarios)?,
            };
            print!("{}", report.table());
            eprintln!("report {}", ctx.json("report", &report)?.display());
        }
        Command::Scenario { op: ScenarioOp::Run { script, pdfs, plan, ti, dsse } } => {
            let model = cfg.model()?;
            let bits: Vec<String> = match cfg.scenarios.get(&script) {
                Some(s) => s.clone(),
                None if Path::new(&script).exists() => serde_json::from_str(&std::fs::read_to_string(&script)?)?,
                None => return Err(Error::Unknown { kind: "scenario script", id: script }),
            };
            let steps = bits.iter().map(|b| SwitchConfig::from_bits(b)).collect::<Result<Vec<_>>>()?;
            let catalog = ctx.catalog(&model)?;
            let placement: IntegratedPlacement = artifact::read_json(&plan, "placement")?;
            let (ti_ck, dsse_ck) = (read_checkpoint(&ti)?, read_checkpoint(&dsse)?);
            let pdfs = read_pdfs(&pdfs)?;
            let ctxs = ScenarioContext {
                model: &model,
                catalog: &catalog,
                pdfs: &pdfs,
                dsse_plan: &placement.plan,
                ti_plan: &ti_plan(&placement.plan),
                ti: &ti_ck,
                dsse: &dsse_ck,
                error: cfg.error.clone(),
                sampler: cfg.sampler,
                snapshots: cfg.snapshots,
                fine_tune_rows: cfg.fine_tune_rows,
                fine_tune: cfg.fine_tune.clone(),
                seed: cfg.seed,
            };
            let report = run_scenario(&steps, &ctxs)?;
            print!("{}", report.table());
            println!("fine-tune events: {}", report.fine_tune_count());
            eprintln!("report {}", ctx.json("scenario", &report)?.display());
        }
    }
    Ok(())
}

fn eval_lse(ctx: &Ctx, model: &FeederModel, pdfs: &BTreeMap<String, LoadPdf>, plan: Option<&Path>, scenarios: usize) -> Result<MetricsReport> {
    let cfg = &ctx.cfg;
    let config = model.base_config();
    let plan = match plan {
        Some(p) => artifact::read_json::<IntegratedPlacement>(p, "placement")?.plan,
        None => greedy_observability_placement(model, &config)?,
    };
    let lmm = build_h(model, &config, &plan)?;
    let solver = PowerFlowSolver::new(model, &config, PowerFlowOptions::default())?;
    let width = lmm.state_width();
    let (mut est, mut truth) = (Mat::zeros(scenarios, width), Mat::zeros(scenarios, width));
    let sampler = SamplerConfig { master_seed: derive_seed(cfg.seed, tags::LOADS, 1), ..cfg.sampler };
    let mut row = 0;
    let mut draw = 0u64;
    while row < scenarios {
        let scen = sparsegrid::loadmodel::sample_scenario(pdfs, model, &sampler, draw)?;
        draw += 1;
        let sol = solver.solve(&scen.injections)?;
        if !sol.converged {
            continue;
        }
        let e = estimate_with_noise(model, &lmm, &sol, &cfg.error.tve, &mut stream(cfg.seed, tags::NOISE, draw))?;
        let pack = |ph: Vec<Phasor>| ph.into_iter().flat_map(|p| [p.magnitude, p.angle_deg]).collect::<Vec<_>>();
        est.row_mut(row).copy_from_slice(&pack(e.phasors()));
        truth.row_mut(row).copy_from_slice(&pack(sol.voltages()));
        row += 1;
    }
    let labels: Vec<String> = (0..lmm.nodes.len())
        .map(|k| {
            let (b, p) = lmm.nodes.node(k);
            format!("{}.{p}", model.buses[b].id)
        })
        .collect();
    state_report(&format!("linear state estimation ({}% TVE)", 100.0 * cfg.error.tve.tve_limit), plan.len(), &est, &truth, &labels)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
