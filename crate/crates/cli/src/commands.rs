//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gdm_core::data_io::{
    export_metrics, generate_synthetic, write_dataset, MetricsFormat, SyntheticSpec,
};
use gdm_core::dual_memory::{GdmModel, TestContext};
use gdm_core::harness::{self, MetricsReport, ScenarioKind, TcMode, TrialOutcome};

use crate::config::RunConfig;
use crate::{EvalArgs, RunArgs, SynthArgs};

const DEFAULT_OUTPUT: &str = "gdm-out";

fn run_config(args: RunArgs, default_scenario: ScenarioKind) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.dataset.is_some() {
        c.dataset = args.dataset;
    }
    if args.output.is_some() {
        c.output = args.output;
    }
    if let Some(s) = args.scenario {
        c.scenario = Some(s.into());
    }
    if args.epochs.is_some() {
        c.epochs = args.epochs;
    }
    if args.trials.is_some() {
        c.trials = args.trials;
        if args.seeds.is_none() {
            c.seeds.clear();
        }
    }
    if let Some(s) = args.seeds {
        c.seeds = s;
    }
    if args.replay {
        c.replay = Some(true);
    }
    if args.no_replay {
        c.replay = Some(false);
    }
    if let Some(t) = args.tc {
        c.tc = t.into();
    }
    if let Some(t) = args.test_sessions {
        c.test_sessions = t;
    }
    if let Some(j) = args.jobs {
        c.jobs = j;
    }
    if c.output.is_none() {
        c.output = Some(PathBuf::from(DEFAULT_OUTPUT));
    }
    c.resolve(default_scenario)
}

fn write_outputs(dir: &Path, outcome: &TrialOutcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, model) in outcome.models.iter().enumerate() {
        let p = dir.join(format!("model-{:02}.gdm", i + 1));
        fs::write(&p, model.to_bytes()).with_context(|| format!("writing {}", p.display()))?;
    }
    export_metrics(&outcome.report, dir.join("metrics.tsv"), MetricsFormat::Tsv)?;
    export_metrics(
        &outcome.report,
        dir.join("summary.json"),
        MetricsFormat::Json,
    )?;
    Ok(())
}

fn echo_config(dir: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    Ok(())
}

fn print_report(label: &str, report: &MetricsReport) {
    let agg = &report.aggregate;
    println!(
        "{label}instance_accuracy\t{} ± {}",
        agg.final_instance_accuracy.mean, agg.final_instance_accuracy.std
    );
    println!(
        "{label}category_accuracy\t{} ± {}",
        agg.final_category_accuracy.mean, agg.final_category_accuracy.std
    );
}

pub fn train(args: RunArgs) -> Result<()> {
    let config = run_config(args, ScenarioKind::Batch)?;
    let dir = config.output.clone().expect("resolved");
    let dataset = config.dataset()?;
    let split = config.split(&dataset)?;
    echo_config(&dir, &config)?;
    let outcome = harness::run_trials(
        &dataset,
        &split,
        &config.experiment(),
        &config.seeds,
        config.jobs,
    )?;
    write_outputs(&dir, &outcome)?;
    print_report("", &outcome.report);
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.dataset.is_some() {
        config.dataset = args.dataset;
    }
    if let Some(t) = args.test_sessions {
        config.test_sessions = t;
    }
    if let Some(t) = args.tc {
        config.tc = t.into();
    }
    let bytes =
        fs::read(&args.model).with_context(|| format!("reading model {}", args.model.display()))?;
    let model = GdmModel::from_bytes(&bytes)
        .with_context(|| format!("decoding model {}", args.model.display()))?;
    let dataset = config.dataset()?;
    let sequences: Vec<usize> = if args.all_sessions {
        (0..dataset.sequences().len()).collect()
    } else {
        config.split(&dataset)?.test
    };
    let mode = match config.tc {
        TcMode::Full => TestContext::Full,
        TcMode::None | TcMode::TestNone => TestContext::None,
    };
    let e = harness::evaluate(&model, &dataset, &sequences, mode)?;
    println!("frames\t{}", e.overall.frames);
    println!("instance_accuracy\t{}", e.instance_accuracy());
    println!("category_accuracy\t{}", e.category_accuracy());
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SyntheticSpec::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag { spec.$field = v; })*
        };
    }
    set!(
        seed => seed,
        categories => n_categories,
        instances => instances_per_category,
        sequences => sequences_per_instance,
        frames => frames_per_sequence,
        dim => dim,
        instance_spread => instance_spread,
        category_spread => category_spread,
        drift => drift,
        persistence => persistence,
        noise => noise
    );
    let dataset = generate_synthetic(&spec)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_dataset(&dataset, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    let mut echo = args.output.clone().into_os_string();
    echo.push(".toml");
    fs::write(&echo, toml::to_string(&spec)?)?;
    println!(
        "{} frames, {} sequences, {} categories, dim {}",
        dataset.len(),
        dataset.sequences().len(),
        dataset.categories().len(),
        dataset.dim()
    );
    Ok(())
}

fn curves(with: &MetricsReport, without: &MetricsReport) -> String {
    const METRICS: [&str; 3] = [
        "instance_accuracy",
        "category_accuracy",
        "first_category_accuracy",
    ];
    let mut header = vec!["batch".to_string(), "epoch".to_string()];
    for arm in ["replay", "no_replay"] {
        for m in METRICS {
            header.push(format!("{arm}_{m}_mean"));
            header.push(format!("{arm}_{m}_std"));
        }
    }
    let mut out = format!("# gdm-curves 1\n{}\n", header.join("\t"));
    for (a, b) in with
        .aggregate
        .records
        .iter()
        .zip(&without.aggregate.records)
    {
        let mut row = vec![a.batch.to_string(), a.epoch.to_string()];
        for rec in [a, b] {
            for m in METRICS {
                match rec.metrics.get(m) {
                    Some(s) => {
                        row.push(s.mean.to_string());
                        row.push(s.std.to_string());
                    }
                    None => row.extend(["NA".to_string(), "NA".to_string()]),
                }
            }
        }
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn replay_ablation(args: RunArgs) -> Result<()> {
    let config = run_config(args, ScenarioKind::IncrementalCategory)?;
    let dir = config.output.clone().expect("resolved");
    let dataset = config.dataset()?;
    let split = config.split(&dataset)?;
    echo_config(&dir, &config)?;
    let ab = harness::replay_ablation(
        &dataset,
        &split,
        &config.experiment(),
        &config.seeds,
        config.jobs,
    )?;
    write_outputs(&dir.join("with-replay"), &ab.with_replay)?;
    write_outputs(&dir.join("without-replay"), &ab.without_replay)?;
    fs::write(
        dir.join("curves.tsv"),
        curves(&ab.with_replay.report, &ab.without_replay.report),
    )?;
    print_report("replay\t", &ab.with_replay.report);
    print_report("no_replay\t", &ab.without_replay.report);
    Ok(())
}
