//! Implementations of the six subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use dyntransync::diagnostics::diagnose;
use dyntransync::estimators::{choose_lambda, choose_tau, SolverConfig};
use dyntransync::evalmetrics::{cross_validate, rate_experiment, run_estimator, CvReport};
use dyntransync::graphseq::{GraphSequence, ObservationSet};
use dyntransync::ingest::{
    build_observations_matches, build_observations_ratings, connectivity_summary, filter_top_items,
    plan_merge_until_connected, read_matches_csv, read_ratings_csv, ItemMap, MergePlan,
    MergeWindow, ScoreRecord,
};
use dyntransync::spectral::SpectralBasis;
use dyntransync::synth::{
    exponentiate, generate_btl_observations, generate_er_sequence, generate_ground_truth,
    generate_observations,
};

use crate::config::{
    load_toml, BenchFile, CvFile, DiagnoseFile, IngestFile, IngestMode, MethodArg, PlanChoice,
    RegimeArg, SynthFile, SynthModel,
};
use crate::manifest::{read_text, write_text, Manifest};
use crate::{CliError, CliResult, CommonArgs};

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    manifest: &mut Manifest,
) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
    write_text(&path, &text)?;
    manifest.record_output(&path);
    Ok(path)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub(crate) fn run_synth(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let mut file: SynthFile = load_toml(config_path)?;
    if let Some(seed) = common.seed {
        file.seed = seed;
    }
    let cfg = file.to_synth_config();
    cfg.validate()?;
    ensure_out_dir(&common.out_dir)?;

    let basis = SpectralBasis::new(cfg.n, cfg.horizon)?;
    let truth = generate_ground_truth(&cfg, &basis)?;
    let graphs = generate_er_sequence(&cfg)?;
    let obs = match file.model {
        SynthModel::Transync => generate_observations(&truth, &graphs, cfg.noise_sigma, cfg.seed)?,
        SynthModel::Btl => {
            generate_btl_observations(&exponentiate(&truth), &graphs, cfg.btl_trials, cfg.seed)?
        }
    };

    let threads = common.threads.unwrap_or(1);
    let mut manifest = Manifest::new("synth", &file, Some(cfg.seed), threads)?;

    let graphs_path = common.out_dir.join("graphs.json");
    write_text(&graphs_path, &graphs.to_json()?)?;
    manifest.record_output(&graphs_path);

    let truth_path = common.out_dir.join("truth.json");
    write_text(&truth_path, &truth.to_json()?)?;
    manifest.record_output(&truth_path);

    let obs_path = common.out_dir.join("observations.json");
    write_text(&obs_path, &obs.to_json()?)?;
    manifest.record_output(&obs_path);

    let csv_path = common.out_dir.join("observations.csv");
    let mut buf = Vec::new();
    obs.write_csv(&mut buf)?;
    std::fs::write(&csv_path, &buf)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
    manifest.record_output(&csv_path);

    manifest.write(&common.out_dir)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

pub(crate) struct EstimateArgs {
    pub obs: PathBuf,
    pub method: MethodArg,
    pub param: Option<f64>,
    pub auto: bool,
    pub smoothness: Option<f64>,
    pub regime: RegimeArg,
    pub rel_tolerance: f64,
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct EstimateRunReport {
    method: &'static str,
    auto: bool,
    regime: Option<&'static str>,
    parameter: Option<f64>,
    iterations: usize,
    final_residual: f64,
    n: usize,
    horizon: usize,
    wall_time_ms: f64,
}

#[derive(Serialize)]
struct EstimateResolved<'a> {
    obs: &'a Path,
    method: MethodArg,
    parameter: Option<f64>,
    auto: bool,
    smoothness: Option<f64>,
    regime: RegimeArg,
    rel_tolerance: f64,
}

pub(crate) fn run_estimate(args: EstimateArgs) -> CliResult<()> {
    let obs = ObservationSet::from_json(&read_text(&args.obs)?)?;
    let horizon = obs.graph().horizon();

    let parameter = match (args.method, args.auto) {
        (MethodArg::Ls, _) => None,
        (_, true) => {
            let smoothness = args
                .smoothness
                .expect("clap enforces --smoothness with --auto");
            Some(match args.method {
                MethodArg::Dls => choose_lambda(horizon, smoothness, args.regime.regime())?,
                MethodArg::Dproj => choose_tau(horizon, smoothness)?,
                MethodArg::Ls => unreachable!(),
            })
        }
        (_, false) => Some(args.param.ok_or_else(|| {
            CliError::Config("this method needs --param <value> or --auto".into())
        })?),
    };

    let solver = SolverConfig {
        rel_tolerance: args.rel_tolerance,
        max_iterations: None,
    };
    let started = Instant::now();
    let fit = run_estimator(args.method.kind(), &obs, parameter, &solver)?;
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    ensure_out_dir(&args.common.out_dir)?;
    let resolved = EstimateResolved {
        obs: &args.obs,
        method: args.method,
        parameter,
        auto: args.auto,
        smoothness: args.smoothness,
        regime: args.regime,
        rel_tolerance: args.rel_tolerance,
    };
    let threads = args.common.threads.unwrap_or(1);
    let mut manifest = Manifest::new("estimate", &resolved, args.common.seed, threads)?;

    let traj_path = args.common.out_dir.join("estimate.json");
    write_text(&traj_path, &fit.trajectory.to_json()?)?;
    manifest.record_output(&traj_path);

    let report = EstimateRunReport {
        method: args.method.kind().name(),
        auto: args.auto,
        regime: args.auto.then_some(match args.regime {
            RegimeArg::FixedGraph => "fixed-graph",
            RegimeArg::Evolving => "evolving",
            RegimeArg::EvolvingWithMargin => "evolving-with-margin",
        }),
        parameter: fit.parameter.or(parameter),
        iterations: fit.iterations_used,
        final_residual: fit.final_residual,
        n: obs.graph().item_count(),
        horizon,
        wall_time_ms,
    };
    write_json(&args.common.out_dir, "report.json", &report, &mut manifest)?;
    manifest.write(&args.common.out_dir)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

pub(crate) fn run_bench(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let mut cfg: BenchFile = load_toml(config_path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    let table = rate_experiment(&cfg)?;

    ensure_out_dir(&common.out_dir)?;
    let mut manifest = Manifest::new("bench", &cfg, Some(cfg.seed), cfg.threads)?;

    let csv_path = common.out_dir.join("results.csv");
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    std::fs::write(&csv_path, &buf)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
    manifest.record_output(&csv_path);

    write_json(&common.out_dir, "results.json", &table, &mut manifest)?;
    manifest.write(&common.out_dir)
}

// ---------------------------------------------------------------------------
// cv
// ---------------------------------------------------------------------------

pub(crate) fn run_cv(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let mut cfg: CvFile = load_toml(config_path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let obs = ObservationSet::from_json(&read_text(&cfg.observations)?)?;
    let report = cross_validate(
        &obs,
        cfg.method.kind(),
        &cfg.grid,
        cfg.criterion.criterion(),
        cfg.repeats,
        cfg.seed,
        &cfg.solver,
    )?;

    ensure_out_dir(&common.out_dir)?;
    let threads = common.threads.unwrap_or(1);
    let mut manifest = Manifest::new("cv", &cfg, Some(cfg.seed), threads)?;
    write_json(&common.out_dir, "cv.json", &report, &mut manifest)?;

    let csv_path = common.out_dir.join("cv.csv");
    write_text(&csv_path, &cv_entries_csv(&report))?;
    manifest.record_output(&csv_path);
    manifest.write(&common.out_dir)
}

fn cv_entries_csv(report: &CvReport) -> String {
    let mut out = String::from("parameter,mean_error,repeats_used\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{:.17e},{:.17e},{}\n",
            e.parameter, e.mean_error, e.repeats_used
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct IngestSummary {
    mode: IngestMode,
    items: usize,
    records: usize,
    windows: usize,
    per_window_connected: Vec<bool>,
    union_connected: bool,
}

pub(crate) fn run_ingest(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let cfg: IngestFile = load_toml(config_path)?;
    let raw = std::fs::File::open(&cfg.input)
        .map_err(|e| CliError::Io(format!("opening {}: {e}", cfg.input.display())))?;
    let (mut records, mut map): (Vec<ScoreRecord>, ItemMap) = match cfg.mode {
        IngestMode::Ratings => read_ratings_csv(raw)?,
        IngestMode::Matches => read_matches_csv(raw)?,
    };
    if let Some(keep) = cfg.top_items {
        let (filtered, new_map) = filter_top_items(&records, &map, keep);
        records = filtered;
        map = new_map;
    }
    if records.is_empty() {
        return Err(CliError::Config("no records left to ingest".into()));
    }
    let n_items = map.len();

    let data_range = {
        let lo = records.iter().map(|r| r.time_unit).min().unwrap();
        let hi = records.iter().map(|r| r.time_unit).max().unwrap();
        (lo, hi)
    };
    let range = cfg.range.unwrap_or(data_range);
    let mut plan = match cfg.plan {
        PlanChoice::Auto => {
            if cfg.mode == IngestMode::Matches {
                return Err(CliError::Config(
                    "plan kind \"auto\" applies to ratings data; use one-per-unit or fixed-size"
                        .into(),
                ));
            }
            plan_merge_until_connected(&records, n_items, cfg.range)?
        }
        PlanChoice::OnePerUnit => MergePlan::one_per_unit(range),
        PlanChoice::FixedSize { size } => {
            if size == 0 {
                return Err(CliError::Config("fixed-size plan needs size >= 1".into()));
            }
            let mut windows = Vec::new();
            let mut start = range.0;
            while start <= range.1 {
                let end = (start + size - 1).min(range.1);
                windows.push(MergeWindow {
                    start,
                    end,
                    connected: false,
                });
                start = end + 1;
            }
            MergePlan { windows }
        }
    };

    let obs = match cfg.mode {
        IngestMode::Ratings => build_observations_ratings(&records, n_items, &plan)?,
        IngestMode::Matches => build_observations_matches(&records, n_items, &plan)?,
    };
    let (per_window, union_connected) = connectivity_summary(&obs);
    for (window, connected) in plan.windows.iter_mut().zip(&per_window) {
        window.connected = *connected;
    }

    ensure_out_dir(&common.out_dir)?;
    let threads = common.threads.unwrap_or(1);
    let mut manifest = Manifest::new("ingest", &cfg, common.seed, threads)?;

    let obs_path = common.out_dir.join("observations.json");
    write_text(&obs_path, &obs.to_json()?)?;
    manifest.record_output(&obs_path);

    let csv_path = common.out_dir.join("observations.csv");
    let mut buf = Vec::new();
    obs.write_csv(&mut buf)?;
    std::fs::write(&csv_path, &buf)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
    manifest.record_output(&csv_path);

    let graphs_path = common.out_dir.join("graphs.json");
    write_text(&graphs_path, &obs.graph().to_json()?)?;
    manifest.record_output(&graphs_path);

    let items_path = common.out_dir.join("items.csv");
    let mut buf = Vec::new();
    map.write_csv(&mut buf).map_err(CliError::from)?;
    std::fs::write(&items_path, &buf)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", items_path.display())))?;
    manifest.record_output(&items_path);

    write_json(&common.out_dir, "plan.json", &plan, &mut manifest)?;
    let summary = IngestSummary {
        mode: cfg.mode,
        items: n_items,
        records: records.len(),
        windows: plan.windows.len(),
        per_window_connected: per_window,
        union_connected,
    };
    write_json(&common.out_dir, "summary.json", &summary, &mut manifest)?;
    manifest.write(&common.out_dir)
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

pub(crate) fn run_diagnose(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let cfg: DiagnoseFile = load_toml(config_path)?;
    let text = read_text(&cfg.graphs)?;
    let graph = GraphSequence::from_json(&text)
        .or_else(|_| ObservationSet::from_json(&text).map(|obs| obs.graph().clone()))
        .map_err(|_| {
            CliError::Config(format!(
                "{} is neither a graph sequence nor an observation set",
                cfg.graphs.display()
            ))
        })?;
    let report = diagnose(&graph, cfg.lambda, &cfg.kappas)?;

    ensure_out_dir(&common.out_dir)?;
    let threads = common.threads.unwrap_or(1);
    let mut manifest = Manifest::new("diagnose", &cfg, common.seed, threads)?;
    write_json(&common.out_dir, "diagnostics.json", &report, &mut manifest)?;
    manifest.write(&common.out_dir)
}
