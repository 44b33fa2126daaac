//! `tactile-twin`: run sensor scenarios, fit calibrations, estimate forces
//! from logs and verify the model against its acceptance criteria.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use tactile_core::acceptance::{self, CriterionResult};
use tactile_core::csvio::{read_columns, write_sim_record, write_sweep, write_table};
use tactile_core::experiments::{
    cyclic_repeatability, grasp_trial, loading_speeds, pigment_sweep, RepeatabilityReport,
};
use tactile_core::{
    fit_force_voltage, force_from_curve, format_sig9, load_config, make_profile, simulate,
    CalibrationCurve, Config, Error, ProfileSpec, SimRecord,
};

#[derive(Parser)]
#[command(
    name = "tactile-twin",
    version,
    about = "Photoreflective tactile sensor digital twin"
)]
struct Cli {
    /// Config JSON; `default` selects the built-in defaults.
    #[arg(long, global = true, default_value = "default")]
    config: PathBuf,
    /// Override the noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit machine-readable JSON reports.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Ramp,
    Cyclic,
    Hold,
}

#[derive(Subcommand)]
enum Command {
    /// Run one motion profile and write the SimRecord CSV (stdout by default).
    Simulate {
        #[arg(long, value_enum, default_value = "ramp")]
        profile: Profile,
        /// Indentation speed (mm/s).
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance-voltage sweep for each configured pigment mix.
    Sweep {
        /// Directory receiving one `w<percent>.csv` per mix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cyclic loading protocol; reports peak-output repeatability.
    Cycle {
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        cycles: Option<usize>,
        /// Also write the full SimRecord CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Output lag behind force at several loading speeds.
    Speeds {
        /// Speeds to run (mm/s); repeat for several.
        #[arg(long)]
        speed: Vec<f64>,
    },
    /// Grasp-hold-release trial; prints detected events.
    Grasp {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an output-vs-force polynomial from a CSV with `force_n` and `output_v`.
    Calibrate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Calibration JSON destination (stdout by default).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map a voltage log (`voltage_v`, optional `time_s`) to force estimates.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Use a calibration JSON on the `output_v` column instead of the model.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every acceptance criterion; exit 1 if any fails.
    Verify,
    /// Print the effective configuration.
    Config,
}

/// Failure classes and their exit statuses.
enum Failure {
    Config(anyhow::Error),
    Io(anyhow::Error),
    Verify(Vec<String>),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Other(_) => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        for cause in e.chain() {
            if let Some(core) = cause.downcast_ref::<Error>() {
                return match core {
                    Error::Config { .. } | Error::ConfigParse(_) => Failure::Config(e),
                    Error::Io { .. } | Error::Csv(_) => Failure::Io(e),
                    _ => Failure::Other(e),
                };
            }
            if cause.is::<io::Error>() {
                return Failure::Io(e);
            }
        }
        Failure::Other(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed early, e.g. `| head`
        Err(Failure::Io(e)) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify(failed) => {
                    eprintln!(
                        "verify: {} criteria failed: {}",
                        failed.len(),
                        failed.join(", ")
                    )
                }
                Failure::Config(e) | Failure::Io(e) | Failure::Other(e) => {
                    eprintln!("error: {e:#}")
                }
            }
            ExitCode::from(f.code())
        }
    }
}

fn effective_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = load_config(&cli.config)
        .with_context(|| format!("loading config {}", cli.config.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = effective_config(cli)?;
    match &cli.command {
        Command::Simulate {
            profile,
            speed,
            cycles,
            out,
        } => {
            let s = &mut cfg.scenarios;
            if let Some(v) = speed {
                s.ramp.speed_mm_s = *v;
                s.cyclic.speed_mm_s = *v;
                s.grasp.speed_mm_s = *v;
            }
            if let Some(n) = cycles {
                s.cyclic.cycles = *n;
            }
            cfg.validate()?;
            let spec = match profile {
                Profile::Ramp => cfg.ramp_spec(),
                Profile::Cyclic => cfg.cyclic_spec(),
                Profile::Hold => cfg.hold_spec(),
            };
            let rec = run_profile(&cfg, &spec)?;
            write_record(&rec, out.as_deref())?;
            let report = json!({
                "samples": rec.len(),
                "duration_s": rec.time.samples[rec.len() - 1] - rec.time.t0,
                "peak_force_n": rec.force.max(),
                "peak_output_v": rec.output.max(),
                "clamped_samples": rec.clamped_samples,
                "noise_rms": rec.noise_rms,
                "seed": rec.seed,
            });
            // the CSV may own stdout
            if let Some(path) = out {
                emit(cli, &report, || {
                    format!(
                        "wrote {} samples to {}\npeak force {} N, peak output {} V, {} clamped",
                        rec.len(),
                        path.display(),
                        format_sig9(rec.force.max()),
                        format_sig9(rec.output.max()),
                        rec.clamped_samples
                    )
                })?;
            }
        }
        Command::Sweep { out } => {
            let sw = pigment_sweep(&cfg)?;
            let mut files = Vec::new();
            if let Some(dir) = out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for (w, pts) in sw.white_fractions.iter().zip(&sw.sweeps) {
                    let path = dir.join(format!("w{:03}.csv", (w * 100.0).round() as i64));
                    let f = create(&path)?;
                    write_sweep(pts, io::BufWriter::new(f))?;
                    files.push(path);
                }
            }
            let mixes: Vec<_> = sw
                .white_fractions
                .iter()
                .zip(&sw.selection.scores)
                .map(|(w, s)| json!({"white_fraction": w, "slope_v_per_mm": s.slope, "intercept_v": s.intercept, "r2": s.r2}))
                .collect();
            let chosen = sw.white_fractions[sw.selection.chosen];
            let report = json!({
                "mixes": mixes,
                "chosen_white_fraction": chosen,
                "no_qualifier": sw.selection.no_qualifier,
                "files": files,
            });
            emit(cli, &report, || {
                let mut s = String::from("white  slope_V/mm  intercept_V  r2\n");
                for (w, f) in sw.white_fractions.iter().zip(&sw.selection.scores) {
                    s += &format!(
                        "{:>5}  {:>10}  {:>11}  {}\n",
                        format_sig9(*w),
                        format_sig9(f.slope),
                        format_sig9(f.intercept),
                        format_sig9(f.r2)
                    );
                }
                s += &format!("chosen white fraction: {}", format_sig9(chosen));
                if sw.selection.no_qualifier {
                    s += " (no mix met the linearity threshold)";
                }
                s
            })?;
        }
        Command::Cycle { speed, cycles, out } => {
            let c = &mut cfg.scenarios.cyclic;
            if let Some(v) = speed {
                c.speed_mm_s = *v;
            }
            if let Some(n) = cycles {
                c.cycles = *n;
            }
            cfg.validate()?;
            let (rec, rep) = cyclic_repeatability(&cfg)?;
            if let Some(path) = out {
                write_record(&rec, Some(path))?;
            }
            emit(cli, &rep, || cycle_text(&rep))?;
        }
        Command::Speeds { speed } => {
            if !speed.is_empty() {
                cfg.scenarios.speeds.speeds_mm_s = speed.clone();
            }
            cfg.validate()?;
            let res = loading_speeds(&cfg)?;
            emit(cli, &res, || {
                let mut s = format!(
                    "optical lag {} mm\nspeed_mm_s  lag_s  peak_force_n  peak_output_v\n",
                    format_sig9(cfg.scenarios.speeds.lag_mm)
                );
                for r in &res {
                    s += &format!(
                        "{}  {}  {}  {}\n",
                        format_sig9(r.speed_mm_s),
                        format_sig9(r.lag_s),
                        format_sig9(r.peak_force_n),
                        format_sig9(r.peak_output_v)
                    );
                }
                s.trim_end().to_string()
            })?;
        }
        Command::Grasp { out } => {
            let t = grasp_trial(&cfg, cfg.seed)?;
            if let Some(path) = out {
                write_record(&t.record, Some(path))?;
            }
            emit(cli, &json!({"seed": cfg.seed, "events": t.events}), || {
                let mut s = format!("{} events\n", t.events.len());
                for e in &t.events {
                    s += &format!(
                        "{:?} at {} s (output {} V)\n",
                        e.kind,
                        format_sig9(e.time_s),
                        format_sig9(e.output_level)
                    );
                }
                s.trim_end().to_string()
            })?;
        }
        Command::Calibrate { input, degree, out } => {
            let cols = read_columns(input, &["force_n", "output_v"])?;
            let pairs: Vec<(f64, f64)> = cols[0]
                .iter()
                .copied()
                .zip(cols[1].iter().copied())
                .collect();
            let curve = fit_force_voltage(&pairs, *degree)?;
            let text = serde_json::to_string_pretty(&curve).context("serializing calibration")?;
            match out {
                Some(path) => {
                    write_file(path, format!("{text}\n").as_bytes())?;
                    emit(cli, &curve, || {
                        format!(
                            "degree {} fit over [{}, {}] N, residual rms {} V, monotone {}\nwrote {}",
                            curve.degree(),
                            format_sig9(curve.domain[0]),
                            format_sig9(curve.domain[1]),
                            format_sig9(curve.residual_rms),
                            curve.monotone,
                            path.display()
                        )
                    })?;
                }
                None => print_out(&text)?,
            }
        }
        Command::Estimate { input, curve, out } => {
            let rows = estimate_rows(&cfg, input, curve.as_deref())?;
            let mut buf = Vec::new();
            write_table(&["time_s", "voltage_v", "force_n"], &rows.rows, &mut buf)?;
            match out {
                Some(path) => {
                    write_file(path, &buf)?;
                    let report = json!({"rows": rows.rows.len(), "clamped": rows.clamped});
                    emit(cli, &report, || {
                        format!(
                            "wrote {} estimates to {} ({} voltages clamped to the model range)",
                            rows.rows.len(),
                            path.display(),
                            rows.clamped
                        )
                    })?;
                }
                None => io::stdout().write_all(&buf).context("writing stdout")?,
            }
        }
        Command::Verify => {
            let results = acceptance::evaluate(&cfg);
            let failed: Vec<String> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| format!("{} ({})", r.id, r.name))
                .collect();
            emit(
                cli,
                &json!({"passed": failed.is_empty(), "criteria": results}),
                || verify_text(&results),
            )?;
            if !failed.is_empty() {
                return Err(Failure::Verify(failed));
            }
        }
        Command::Config => print_out(&cfg.to_json())?,
    }
    Ok(())
}

fn run_profile(cfg: &Config, spec: &ProfileSpec) -> Result<SimRecord> {
    let model = cfg.sensor_model()?;
    Ok(simulate(
        &make_profile(spec)?,
        &model,
        cfg.noise_rms,
        cfg.seed,
    )?)
}

struct Estimates {
    rows: Vec<[f64; 3]>,
    clamped: usize,
}

/// Voltages outside the model's range are clamped to it, so rest-level
/// noise reads as zero force rather than failing the whole log.
fn estimate_rows(cfg: &Config, input: &Path, curve: Option<&Path>) -> Result<Estimates> {
    let header = fs::read_to_string(input)
        .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", input.display())))?;
    let has_time = header
        .lines()
        .next()
        .is_some_and(|h| h.split(',').any(|c| c.trim() == "time_s"));
    let column = if curve.is_some() {
        "output_v"
    } else {
        "voltage_v"
    };
    let mut names = vec![column];
    if has_time {
        names.push("time_s");
    }
    let cols = read_columns(input, &names)?;
    let n = cols[0].len();
    let time = if has_time {
        cols[1].clone()
    } else {
        (0..n).map(|i| i as f64 * 1e-3).collect()
    };
    let mut clamped = 0;
    let rows = match curve {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                anyhow::Error::new(e).context(format!("reading {}", path.display()))
            })?;
            let c: CalibrationCurve = serde_json::from_str(&text)
                .with_context(|| format!("parsing calibration {}", path.display()))?;
            let (lo, hi) = c.image();
            cols[0]
                .iter()
                .zip(&time)
                .map(|(&v, &t)| {
                    let vc = v.clamp(lo, hi);
                    clamped += (vc != v) as usize;
                    Ok([t, v, force_from_curve(vc, &c)?])
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let model = cfg.sensor_model()?;
            let (a, b) = model.optics.image();
            let (lo, hi) = (a.min(b), a.max(b));
            cols[0]
                .iter()
                .zip(&time)
                .map(|(&v, &t)| {
                    let vc = v.clamp(lo, hi);
                    clamped += (vc != v) as usize;
                    Ok([t, v, model.force_from_voltage(vc)?.force_n])
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Estimates { rows, clamped })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_record(rec: &SimRecord, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let f = create(path)?;
            write_sim_record(rec, io::BufWriter::new(f))?;
        }
        None => {
            let mut buf = Vec::new();
            write_sim_record(rec, &mut buf)?;
            io::stdout()
                .lock()
                .write_all(&buf)
                .context("writing stdout")?;
        }
    }
    Ok(())
}

fn emit<T: Serialize>(cli: &Cli, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let s = if cli.json {
        serde_json::to_string_pretty(value).context("serializing report")?
    } else {
        text()
    };
    print_out(&s)
}

fn print_out(s: &str) -> Result<()> {
    writeln!(io::stdout().lock(), "{s}").context("writing stdout")
}

fn cycle_text(r: &RepeatabilityReport) -> String {
    format!(
        "{} cycles\npeak output CV {}\nfirst-10 mean peak {} V, last-10 mean peak {} V, drift {}",
        r.cycles,
        format_sig9(r.cv),
        format_sig9(r.first10_mean_v),
        format_sig9(r.last10_mean_v),
        format_sig9(r.drift)
    )
}

fn verify_text(results: &[CriterionResult]) -> String {
    let passed = results.iter().filter(|r| r.passed).count();
    let mut s: Vec<String> = results.iter().map(CriterionResult::summary).collect();
    s.push(format!("{passed}/{} criteria passed", results.len()));
    s.join("\n")
}
