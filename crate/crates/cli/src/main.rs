//! Command-line front door: design validation, calibration, simulation,
//! sample-size search and single-dataset interim decisions.
//!
//! Exit codes: 0 success/continue, 2 invalid input, 3 declare non-inferior,
//! 4 stop for inferiority, 5 stop for toxicity, 6 close without rejection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use deintensify::calibration::{calibrate, CalibrationFile};
use deintensify::design::{Decision, DesignConfig, ResolvedDesign, ScaleSet, TrialScenario};
use deintensify::oc::{oc_to_csv, sample_size_search, scenario_records, simulate_oc, ScenarioSet};
use deintensify::replay::{parse_patient_csv, replay_decisions};
use deintensify::rng::StreamKey;

#[derive(Parser)]
#[command(name = "deintensify", version, about = "Bayesian multi-arm de-intensification trial designs: calibrate, simulate, decide")]
struct Cli {
    /// Worker threads for Monte-Carlo runs (0 = rayon default).
    #[arg(long, global = true, env = "DEINTENSIFY_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Bayesian,
    Comparator,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design document against every structural invariant.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Calibrate boundary scales by Monte-Carlo simulation.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Simulated trials per scenario.
        #[arg(long, default_value_t = 2000)]
        sims: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Skip the fresh-seed re-simulation summary.
        #[arg(long)]
        skip_self_check: bool,
    },
    /// Simulate operating characteristics over a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Calibration file (required for the Bayesian engine).
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 2000)]
        sims: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path; a CSV twin is written beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineKind::Bayesian)]
        engine: EngineKind,
        /// Also write one CSV row per simulated arm outcome.
        #[arg(long)]
        records_out: Option<PathBuf>,
    },
    /// Evaluate the interim decision for a patient data file at a given time.
    Decide {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Analysis clock in months since first enrollment.
        #[arg(long)]
        time: f64,
        /// Trial base seed: decision streams derive from it per interim.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every interim look, not just the last.
        #[arg(long)]
        trace: bool,
        /// Export posterior RMST draws per arm as CSV.
        #[arg(long)]
        draws_out: Option<PathBuf>,
    },
    /// Search a grid of per-arm caps for a target power.
    Samplesize {
        #[arg(long)]
        config: PathBuf,
        /// Scenario file holding a single scenario; its first arm is searched.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        target_power: f64,
        /// Ascending per-arm caps, e.g. --grid 100,150,200.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<u32>,
        /// Calibration simulations per grid point.
        #[arg(long, default_value_t = 1000)]
        cal_sims: u32,
        /// Power-estimation simulations per grid point.
        #[arg(long, default_value_t = 1000)]
        sims: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Power-curve CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path) -> Result<DesignConfig> {
    let json = read_to_string(path)?;
    DesignConfig::from_json(&json).with_context(|| format!("parsing {}", path.display()))
}

fn load_calibration(path: &Path, config: &DesignConfig) -> Result<CalibrationFile> {
    let json = read_to_string(path)?;
    let file =
        CalibrationFile::from_json(&json).with_context(|| format!("parsing {}", path.display()))?;
    file.verify_digest(config)?;
    Ok(file)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let mut violations = cfg.violations();
            if let Some(c) = &cfg.comparator {
                if let Err(e) = c.validate() {
                    violations.push(e.to_string());
                }
            }
            if violations.is_empty() {
                println!("{}: ok (digest {})", config.display(), cfg.digest());
                Ok(0)
            } else {
                for v in &violations {
                    eprintln!("{}: {v}", config.display());
                }
                Ok(2)
            }
        }
        Command::Calibrate {
            config,
            sims,
            seed,
            out,
            skip_self_check,
        } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            let file = calibrate(&cfg, sims, seed, cli.workers, !skip_self_check)?;
            print_calibration(&file);
            write_file(&out, &file.to_json())?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Simulate {
            config,
            calib,
            scenarios,
            sims,
            seed,
            out,
            engine,
            records_out,
        } => {
            let cfg = load_config(&config)?;
            let scenario_set = ScenarioSet::from_json(&read_to_string(&scenarios)?)
                .with_context(|| format!("parsing {}", scenarios.display()))?;
            let (resolved, comparator) = match engine {
                EngineKind::Bayesian => {
                    let calib_path = calib
                        .as_ref()
                        .context("--calib is required for the Bayesian engine")?;
                    let calibration = load_calibration(calib_path, &cfg)?;
                    (
                        ResolvedDesign::from_calibrated(cfg.clone(), calibration.scales())?,
                        None,
                    )
                }
                EngineKind::Comparator => {
                    let comparator = cfg
                        .comparator
                        .context("config has no `comparator` section")?;
                    let scales = match calib {
                        Some(path) => load_calibration(&path, &cfg)?.scales(),
                        None => ScaleSet {
                            ni: 0.0,
                            inferiority: 0.0,
                            toxicity: cfg.is_coprimary().then_some(0.0),
                            toxicity_cap: cfg.is_coprimary().then_some(0.5),
                        },
                    };
                    (
                        ResolvedDesign::from_calibrated(cfg.clone(), scales)?,
                        Some(comparator),
                    )
                }
            };
            let report = simulate_oc(&resolved, comparator, &scenario_set, sims, seed, cli.workers)?;
            write_file(&out, &serde_json::to_string_pretty(&report)?)?;
            let csv_path = out.with_extension("csv");
            write_file(&csv_path, &oc_to_csv(&report))?;
            if let Some(records_path) = records_out {
                let mut rows =
                    String::from("scenario,replicate,arm,verdict,decision_time,enrolled,duration\n");
                for (s_idx, scenario) in scenario_set.scenarios.iter().enumerate() {
                    let records = scenario_records(
                        &resolved,
                        comparator,
                        scenario,
                        s_idx as u64,
                        sims,
                        seed,
                        cli.workers,
                    );
                    for (rep, record) in records.iter().enumerate() {
                        for line in record.csv_rows().lines() {
                            rows.push_str(&format!("{},{},{}\n", scenario.label, rep, line));
                        }
                    }
                }
                write_file(&records_path, &rows)?;
            }
            for s in &report.scenarios {
                let power: Vec<String> = s
                    .per_arm
                    .iter()
                    .map(|a| format!("arm {} power {:.3}±{:.3}", a.arm, a.power.value, a.power.mc_se))
                    .collect();
                println!(
                    "{}: {} | duration {:.1} mo",
                    s.label,
                    power.join(", "),
                    s.avg_duration.value
                );
            }
            println!("wrote {} and {}", out.display(), csv_path.display());
            Ok(0)
        }
        Command::Decide {
            config,
            calib,
            data,
            time,
            seed,
            trace,
            draws_out,
        } => {
            let cfg = load_config(&config)?;
            let calibration = load_calibration(&calib, &cfg)?;
            let resolved = ResolvedDesign::from_calibrated(cfg.clone(), calibration.scales())?;
            let rows = parse_patient_csv(&read_to_string(&data)?, &data.display().to_string())?;
            let outcome = replay_decisions(&resolved, &rows, time, seed)?;
            if trace {
                for log in &outcome.interims {
                    println!("{}", interim_line(log));
                }
            } else if let Some(last) = outcome.interims.last() {
                println!("{}", interim_line(last));
            }
            let decision = outcome.final_decision();
            println!(
                "t = {time} months | active arm {} | decision: {}",
                outcome.active_arm,
                decision_name(decision)
            );
            if let Some(path) = draws_out {
                write_file(&path, &posterior_draws_csv(&resolved, &rows, time, seed, &outcome)?)?;
                println!("wrote {}", path.display());
            }
            Ok(match decision {
                Decision::Continue | Decision::Pause => 0,
                Decision::DeclareNonInferior => 3,
                Decision::StopInferior => 4,
                Decision::StopToxicity => 5,
                Decision::CloseNotRejected => 6,
            })
        }
        Command::Samplesize {
            config,
            scenario,
            target_power,
            grid,
            cal_sims,
            sims,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let scenario_set = ScenarioSet::from_json(&read_to_string(&scenario)?)
                .with_context(|| format!("parsing {}", scenario.display()))?;
            if scenario_set.scenarios.len() != 1 {
                bail!("the sample-size search expects exactly one scenario");
            }
            let scenario: &TrialScenario = &scenario_set.scenarios[0];
            let search = sample_size_search(
                &cfg,
                scenario,
                target_power,
                &grid,
                cal_sims,
                sims,
                seed,
                cli.workers,
            )?;
            let csv = search.to_csv();
            match &out {
                Some(path) => {
                    write_file(path, &csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            match search.recommended {
                Some(m) => println!("recommended m_max = {m} for power {target_power}"),
                None => println!(
                    "warning: no grid point reached power {target_power}; largest estimate {:.3}",
                    search.curve.last().map(|p| p.power.value).unwrap_or(0.0)
                ),
            }
            Ok(0)
        }
    }
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Continue => "continue",
        Decision::Pause => "pause",
        Decision::DeclareNonInferior => "declare-non-inferior",
        Decision::StopInferior => "stop-inferior",
        Decision::StopToxicity => "stop-toxicity",
        Decision::CloseNotRejected => "close-not-rejected",
    }
}

fn interim_line(log: &deintensify::design::InterimLog) -> String {
    let a = &log.assessment;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let mut line = format!(
        "t={:>5.1} arm={} n={:>4} | P(NI)={} vs b_NI={:.4} | P(inf)={} vs b_I={:.4} | margin={}",
        log.clock,
        log.arm,
        log.n_arm,
        fmt_opt(a.p_ni),
        a.boundary_ni,
        fmt_opt(a.p_inferior),
        a.boundary_inferior,
        a.margin,
    );
    if let (Some(p_tox), Some(b_tox)) = (a.p_toxicity, a.boundary_toxicity) {
        line.push_str(&format!(" | P(tox)={p_tox:.4} vs b_T={b_tox:.4}"));
    }
    line.push_str(&format!(" -> {}", decision_name(a.decision)));
    line
}

/// Posterior RMST draws per arm with data, at the final analysis clock.
fn posterior_draws_csv(
    design: &ResolvedDesign,
    rows: &[deintensify::replay::PatientRow],
    time: f64,
    seed: u64,
    outcome: &deintensify::replay::ReplayOutcome,
) -> Result<String> {
    use deintensify::betastacy::draws_to_csv;
    use deintensify::survival::CensoredObservation;
    let r = design.config.posterior_draws as usize;
    let horizon = design.config.t_e;
    let last_ia = outcome.interims.last().map(|l| l.interim_index).unwrap_or(0);
    let export_key = StreamKey::new(seed).child(1).child(last_ia).child(9);
    let mut per_arm: Vec<(u32, Vec<f64>)> = Vec::new();
    for arm in 1..=outcome.active_arm {
        let sample: Vec<CensoredObservation> = rows
            .iter()
            .filter(|row| row.arm == arm && row.enroll_month <= time)
            .map(|row| {
                let follow = time - row.enroll_month;
                if row.pfs_event && row.pfs_months <= follow {
                    CensoredObservation::event(row.pfs_months)
                } else {
                    CensoredObservation::censored(row.pfs_months.min(follow))
                }
            })
            .collect();
        if sample.is_empty() {
            continue;
        }
        let model = design.prior_efficacy.update(&sample)?;
        let mut rng = export_key.child(arm as u64).rng();
        per_arm.push((arm, model.sample_rmsts(r, horizon, &mut rng)));
    }
    let borrowed: Vec<(u32, &[f64])> = per_arm.iter().map(|(a, v)| (*a, v.as_slice())).collect();
    Ok(draws_to_csv(&borrowed))
}

fn print_calibration(file: &CalibrationFile) {
    println!("calibration (seed {}, {} sims, config {})", file.seed, file.sims, file.config_digest);
    if let Some(s) = file.scale_i {
        println!(
            "  inferiority scale: {:.6} (target early-stop {:.2}{})",
            s.value,
            s.target,
            if s.clamped { ", clamped" } else { "" }
        );
    }
    if let Some(s) = file.scale_t {
        println!(
            "  toxicity scale:    {:.6} (target early-stop {:.2}{})",
            s.value,
            s.target,
            if s.clamped { ", clamped" } else { "" }
        );
    }
    if let Some(cap) = file.scale_t_cap {
        println!("  margin-switch scale: {cap:.6}");
    }
    println!("  non-inferiority scale per scenario:");
    for s in &file.ni.per_scenario {
        println!("    {:<32} {:.6}", s.label, s.scale);
    }
    println!("  final non-inferiority scale: {:.6} (minimum over scenarios)", file.ni.scale);
    if let Some(check) = &file.self_check {
        println!("  self-check (fresh seed):");
        for r in &check.ni_rejection {
            println!(
                "    rejection under {:<28} {:.4} (bound {:.4}) {}",
                r.label,
                r.rate,
                r.bound,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
        if let Some(f) = &check.futility_rate {
            println!(
                "    futility stop rate {:.4} (band [{:.4}, {:.4}]) {}",
                f.rate,
                f.lo,
                f.hi,
                if f.pass { "ok" } else { "FAIL" }
            );
        }
        if let Some(t) = &check.toxicity_rate {
            println!(
                "    toxicity stop rate {:.4} (band [{:.4}, {:.4}]) {}",
                t.rate,
                t.lo,
                t.hi,
                if t.pass { "ok" } else { "FAIL" }
            );
        }
        if let Some(i) = &check.interior_null {
            println!(
                "    rejection under interior null {:.4} (bound {:.4}) {}",
                i.rate,
                i.bound,
                if i.pass { "ok" } else { "FAIL" }
            );
        }
        println!("    overall: {}", if check.pass { "ok" } else { "FAIL" });
    }
}
