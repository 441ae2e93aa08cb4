use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mcr_core::config::StackConfig;
use mcr_core::harness::{
    export_report, run_trial, Autopilot, AutopilotParams, InputSource, LiveSource, ReplaySource,
    ReportSummary, ScenarioSpec, TrialOutcome,
};
use mcr_core::service::Endpoints;
use mcr_core::vio::{
    absolute_position_error, calibration_target, estimate_stream, fit_preset,
    generate_test_trajectory, mean_average_error, shipped_preset, uncalibrated_shape, PresetFile,
    TrajectorySpec, VioPreset, PRESET_NAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    /// Scripted synthetic operator seen through a simulated VIO preset.
    Autopilot,
    /// Frames recorded by an earlier trial.
    Replay,
    /// Frames from network clients, paced to wall-clock time.
    Live,
}

#[derive(Parser)]
#[command(name = "mcr", version, about = "Mobile cobot teleoperation stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo accuracy of a VIO preset on the default test trajectory.
    VioBench {
        #[arg(long, default_value = "wired-stereo")]
        preset: String,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Optional preset file overriding the built-in presets.
        #[arg(long)]
        presets: Option<PathBuf>,
        /// Write the first seed's error series as CSV (t,error).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit preset noise/drift scales to the target average errors.
    FitPresets {
        #[arg(long, default_value_t = 200)]
        seeds: u64,
        /// First seed of the fitting set.
        #[arg(long, default_value_t = 10_000)]
        seed_base: u64,
        #[arg(long, default_value = "config/vio_presets.toml")]
        out: PathBuf,
    },
    /// Run home-care trials and write per-trial CSV logs plus a JSON summary.
    /// Exits non-zero unless every subtask of every trial succeeded.
    RunTrial {
        /// Scenario file; built-in defaults if absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Stack configuration file; built-in defaults if absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SourceKind::Autopilot)]
        source: SourceKind,
        /// VIO preset seen by the autopilot, or `ideal` for a perfect tracker.
        #[arg(long, default_value = "wired-stereo")]
        preset: String,
        #[arg(long)]
        presets: Option<PathBuf>,
        /// Recording to replay (with `--source replay`).
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of trials, with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value = "trial-out")]
        out: PathBuf,
    },
}

fn load_preset(name: &str, file: Option<&PathBuf>) -> Result<mcr_core::vio::VioPreset> {
    match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(PresetFile::from_toml(&text)?.get(name)?)
        }
        None => Ok(shipped_preset(name)?),
    }
}

fn vio_bench(name: &str, seeds: u64, file: Option<&PathBuf>, csv: Option<&PathBuf>) -> Result<()> {
    let preset = load_preset(name, file)?;
    let gt = generate_test_trajectory(&TrajectorySpec::default())?;
    let mean = mean_average_error(&preset, &gt, 0..seeds)?;
    if let Some(path) = csv {
        let est = estimate_stream(&gt, &preset, 0)?;
        let series = absolute_position_error(&est, &gt)?;
        let mut out = String::from("t,error\n");
        for (t, e) in &series.series {
            out.push_str(&format!("{t},{e}\n"));
        }
        std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = serde_json::json!({
        "setup": preset.name,
        "average_error": mean,
        "rate": preset.rate,
        "seeds": seeds,
    });
    println!("{summary}");
    Ok(())
}

fn fit_presets(seeds: u64, seed_base: u64, out: &PathBuf) -> Result<()> {
    let gt = generate_test_trajectory(&TrajectorySpec::default())?;
    let seed_list: Vec<u64> = (seed_base..seed_base + seeds).collect();
    let mut fitted = Vec::new();
    for name in PRESET_NAMES {
        let shape = uncalibrated_shape(name).expect("shipped shape");
        let target = calibration_target(name).expect("shipped target");
        let fit = fit_preset(&shape, target, &gt, &seed_list)?;
        log::info!("{name}: scale {:.6}, mean error {:.5} (target {target})", fit.scale, fit.achieved);
        println!("{name}: scale {:.6} achieved {:.5} target {target}", fit.scale, fit.achieved);
        fitted.push(fit.preset);
    }
    let header = format!(
        "# Fitted by `mcr fit-presets --seeds {seeds} --seed-base {seed_base}` on the default test trajectory.\n\n"
    );
    let body = PresetFile { preset: fitted }.to_toml();
    std::fs::write(out, header + &body).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

struct TrialArgs {
    scenario: Option<PathBuf>,
    config: Option<PathBuf>,
    source: SourceKind,
    preset: String,
    presets: Option<PathBuf>,
    replay: Option<PathBuf>,
    seed: u64,
    trials: u64,
    out: PathBuf,
}

fn autopilot_preset(name: &str, file: Option<&PathBuf>) -> Result<VioPreset> {
    if name == "ideal" {
        return Ok(VioPreset::ideal(30.0));
    }
    load_preset(name, file)
}

fn run_trials(args: TrialArgs) -> Result<bool> {
    let spec = match &args.scenario {
        Some(p) => ScenarioSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioSpec::default(),
    };
    let config = match &args.config {
        Some(p) => StackConfig::load(p)?,
        None => StackConfig::default(),
    };
    let mut outcomes: Vec<TrialOutcome> = Vec::new();
    for seed in args.seed..args.seed + args.trials.max(1) {
        let mut source: Box<dyn InputSource> = match args.source {
            SourceKind::Autopilot => Box::new(Autopilot::new(
                AutopilotParams::default(),
                config.mapper,
                spec.environment(),
                autopilot_preset(&args.preset, args.presets.as_ref())?,
                seed,
            )?),
            SourceKind::Replay => {
                let path = args.replay.as_ref().context("--replay is required with --source replay")?;
                Box::new(ReplaySource::load(path)?)
            }
            SourceKind::Live => {
                let svc = &config.service;
                Box::new(LiveSource::new(Endpoints {
                    udp: Some(svc.resolve(&svc.udp_bind)?),
                    tcp: Some(svc.resolve(&svc.tcp_bind)?),
                    ws: Some(svc.resolve(&svc.ws_bind)?),
                }))
            }
        };
        let outcome = run_trial(&spec, source.as_mut(), &config, seed)?;
        let m = &outcome.metrics;
        let flags: Vec<String> = m
            .subtasks
            .iter()
            .map(|r| format!("{}={}({:.2}s)", r.kind.label(), if r.success { "ok" } else { "fail" }, r.duration))
            .collect();
        eprintln!("seed {seed}: {} T_c {:.2} s", flags.join(" "), m.completion_time);
        outcomes.push(outcome);
    }
    let files = export_report(&outcomes, &args.out)?;
    for (i, o) in outcomes.iter().enumerate() {
        let path = args.out.join(format!("trial_{i:03}.rec"));
        std::fs::write(&path, o.recording.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let metrics: Vec<_> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    let summary = ReportSummary::from_metrics(&metrics)?;
    println!(
        "{}",
        serde_json::json!({
            "success_rate": summary.success_rate,
            "median_completion_time": summary.median_completion_time,
            "trials": summary.trials,
            "summary": files.summary,
        })
    );
    Ok(metrics.iter().all(|m| m.all_succeeded()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::VioBench {
            preset,
            seeds,
            presets,
            csv,
        } => vio_bench(&preset, seeds, presets.as_ref(), csv.as_ref()),
        Command::FitPresets {
            seeds,
            seed_base,
            out,
        } => fit_presets(seeds, seed_base, &out),
        Command::RunTrial {
            scenario,
            config,
            source,
            preset,
            presets,
            replay,
            seed,
            trials,
            out,
        } => {
            let ok = run_trials(TrialArgs {
                scenario,
                config,
                source,
                preset,
                presets,
                replay,
                seed,
                trials,
                out,
            })?;
            if !ok {
                std::process::exit(1);
            }
            Ok(())
        }
    }
}
