use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stirflow::acceptance::Suite;
use stirflow::config::{ExperimentConfig, ProtocolSpec};
use stirflow::output::{ensure_dir, write_csv, write_json};
use stirflow::run::{
    default_circulation, default_curve, default_gradient, run, BraidSummary, Experiment,
};
use stirflow::Error;
use stirflow_core::braid::parse_braid;
use stirflow_core::transport::advect;
use stirflow_core::Vec2;

#[derive(Parser)]
#[command(
    name = "stirflow",
    version,
    about = "Topological stirring experiments in a disk with three stirrers"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a braid word such as "1 -2".
    Classify { word: String },
    /// Check or read back a stirring protocol.
    Protocol {
        #[command(subcommand)]
        action: ProtocolAction,
    },
    /// Solve for the stream function at one instant.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// Advect tracers read from a CSV of `x,y` rows.
    Advect {
        #[command(flatten)]
        io: ConfigIo,
        #[arg(long)]
        tracers: PathBuf,
        #[arg(long, default_value_t = 1)]
        periods: usize,
    },
    /// Run one stretching diagnostic.
    Measure {
        kind: Measure,
        #[command(flatten)]
        io: ConfigIo,
    },
    /// Run every diagnostic the config selects and check its thresholds.
    Run {
        #[command(flatten)]
        io: ConfigIo,
    },
    /// Run the acceptance suite.
    Accept {
        /// Criteria to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum ProtocolAction {
    /// Admissibility report.
    Validate { file: PathBuf },
    /// Braid word read off the stirrer world-lines.
    Extract { file: PathBuf },
}

#[derive(Subcommand)]
enum FieldAction {
    Solve {
        #[command(flatten)]
        io: ConfigIo,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Side of the Ψ / speed sample grid written with `--out`.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Curve,
    Gradient,
    Circulation,
}

#[derive(Args)]
struct ConfigIo {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigIo {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let config = ExperimentConfig::load(&self.config)?;
        let out = self
            .out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((config, out))
    }
}

/// Protocol files may be a whole experiment config or just its protocol.
fn load_protocol(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match ExperimentConfig::from_json(&text) {
        Ok(c) => Ok(c),
        Err(full) => {
            let protocol: ProtocolSpec = serde_json::from_str(&text).map_err(|_| full)?;
            let mut c = ExperimentConfig::for_word("");
            c.protocol = protocol;
            Ok(c)
        }
    }
}

fn print<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("serializes")
        );
    } else {
        println!("{}", text());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Error> {
    let json = cli.json;
    match &cli.command {
        Command::Classify { word } => {
            let w = parse_braid(word)?;
            let s = BraidSummary::new(&w)?;
            print(json, &s, || {
                format!(
                    "word {}\nreduced {}\ntrace {}\nclass {}\nlambda {}\nlog lambda {}",
                    s.word,
                    s.reduced,
                    s.trace,
                    s.class,
                    s.lambda.map_or("-".into(), |x| x.to_string()),
                    s.log_lambda.map_or("-".into(), |x| x.to_string()),
                )
            });
            Ok(0)
        }
        Command::Protocol { action } => match action {
            ProtocolAction::Validate { file } => {
                let r = load_protocol(file)?.resolve()?;
                let report = stirflow_core::protocol::validate(&r.protocol, 1000);
                #[derive(Serialize)]
                struct Out {
                    word: String,
                    period: f64,
                    passed: bool,
                    min_pair_gap: f64,
                    min_wall_clearance: f64,
                    max_velocity_jump: f64,
                    closure_error: f64,
                }
                let out = Out {
                    word: r.word.to_string(),
                    period: r.protocol.period(),
                    passed: report.passed(),
                    min_pair_gap: report.min_pair_gap,
                    min_wall_clearance: report.min_wall_clearance,
                    max_velocity_jump: report.max_velocity_jump,
                    closure_error: report.closure_error,
                };
                print(json, &out, || {
                    format!(
                        "{} protocol \"{}\", period {}: pair gap {:.4}, wall clearance {:.4}",
                        if out.passed {
                            "admissible"
                        } else {
                            "inadmissible"
                        },
                        out.word,
                        out.period,
                        out.min_pair_gap,
                        out.min_wall_clearance
                    )
                });
                Ok(if out.passed { 0 } else { 2 })
            }
            ProtocolAction::Extract { file } => {
                let r = load_protocol(file)?.resolve()?;
                let w = r.protocol.extract_braid(4000)?;
                let s = BraidSummary::new(&w)?;
                print(json, &s, || s.reduced.clone());
                Ok(0)
            }
        },
        Command::Field {
            action: FieldAction::Solve { io, time, grid },
        } => {
            let (config, out) = io.load()?;
            let exp = Experiment::new(config)?;
            let m = exp.provider.solve_at(*time)?;
            #[derive(Serialize)]
            struct Out {
                time: f64,
                vorticity: f64,
                centers: Vec<[f64; 2]>,
                log_strengths: Vec<f64>,
                taylor: Vec<[f64; 2]>,
                laurent: Vec<Vec<[f64; 2]>>,
                boundary_constants: Vec<f64>,
                max_normal_residual: f64,
                circulation_errors: Vec<f64>,
                condition_number: f64,
            }
            let holes = m.centers().count();
            let report = Out {
                time: *time,
                vorticity: m.vorticity(),
                centers: m.centers().map(|p| [p.x, p.y]).collect(),
                log_strengths: m.log_strengths().collect(),
                taylor: m
                    .taylor_coefficients()
                    .iter()
                    .map(|z| [z.re, z.im])
                    .collect(),
                laurent: (0..holes)
                    .map(|h| {
                        m.laurent_coefficients(h)
                            .iter()
                            .map(|z| [z.re, z.im])
                            .collect()
                    })
                    .collect(),
                boundary_constants: m.boundary_constants().to_vec(),
                max_normal_residual: m.residual().max_normal_residual,
                circulation_errors: m.residual().circulation_errors.clone(),
                condition_number: m.residual().condition_number,
            };
            if io.out.is_some() || exp.config.output.is_some() {
                ensure_dir(&out)?;
                write_json(&out.join("field.json"), &report)?;
                let n = (*grid).max(2);
                let step = 2.0 / (n - 1) as f64;
                let mut rows = Vec::new();
                for j in 0..n {
                    for i in 0..n {
                        let z = Vec2::new(-1.0 + i as f64 * step, -1.0 + j as f64 * step);
                        let (psi, speed) = match (m.stream_function(z), m.velocity(z)) {
                            (Ok(p), Ok(v)) => (p.to_string(), v.norm().to_string()),
                            _ => (String::new(), String::new()),
                        };
                        rows.push(vec![z.x.to_string(), z.y.to_string(), psi, speed]);
                    }
                }
                write_csv(
                    &out.join("field_grid.csv"),
                    &["x", "y", "psi", "speed"],
                    rows,
                )?;
            }
            print(json, &report, || {
                format!(
                    "t = {}: normal residual {:.3e}, max circulation error {:.3e}, condition {:.3e}",
                    report.time,
                    report.max_normal_residual,
                    report.circulation_errors.iter().fold(0.0f64, |a, &b| a.max(b)),
                    report.condition_number
                )
            });
            Ok(0)
        }
        Command::Advect {
            io,
            tracers,
            periods,
        } => {
            let (config, out) = io.load()?;
            let exp = Experiment::new(config)?;
            let points = read_tracers(tracers)?;
            let period = exp.provider.period();
            let mut rows = Vec::new();
            let mut current = points.clone();
            let record = |rows: &mut Vec<Vec<String>>, n: usize, pts: &[Vec2]| {
                for (i, p) in pts.iter().enumerate() {
                    rows.push(vec![
                        n.to_string(),
                        i.to_string(),
                        p.x.to_string(),
                        p.y.to_string(),
                    ]);
                }
            };
            record(&mut rows, 0, &current);
            for n in 1..=*periods {
                current = advect(
                    &current,
                    (n - 1) as f64 * period,
                    n as f64 * period,
                    &exp.provider,
                    &exp.resolved.integrator,
                )?;
                record(&mut rows, n, &current);
            }
            let header = ["period", "index", "x", "y"];
            if io.out.is_some() || exp.config.output.is_some() {
                ensure_dir(&out)?;
                write_csv(&out.join("tracers.csv"), &header, rows)?;
            } else {
                let mut w = csv::Writer::from_writer(std::io::stdout());
                let io_err = |e: csv::Error| Error::Write {
                    path: PathBuf::from("<stdout>"),
                    source: e.into(),
                };
                w.write_record(header).map_err(io_err)?;
                for r in rows {
                    w.write_record(r).map_err(io_err)?;
                }
                w.flush().map_err(|source| Error::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
            }
            Ok(0)
        }
        Command::Measure { kind, io } => {
            let (mut config, out) = io.load()?;
            let curve = config.diagnostics.curve.take();
            let gradient = config.diagnostics.gradient.take();
            let circulation = config.diagnostics.circulation.take();
            match kind {
                Measure::Curve => {
                    let c = curve.unwrap_or_else(|| default_curve(&config));
                    config.diagnostics.curve = Some(c);
                }
                Measure::Gradient => {
                    config.diagnostics.gradient = Some(gradient.unwrap_or_else(default_gradient));
                }
                Measure::Circulation => {
                    let c = circulation.unwrap_or_else(|| default_circulation(&config));
                    config.diagnostics.circulation = Some(c);
                }
            }
            finish(json, run(config, &out)?)
        }
        Command::Run { io } => {
            let (config, out) = io.load()?;
            finish(json, run(config, &out)?)
        }
        Command::Accept { only } => {
            let suite = Suite::new();
            let ids: Vec<usize> = if only.is_empty() {
                (1..=stirflow::acceptance::TITLES.len()).collect()
            } else {
                only.clone()
            };
            let mut failed = 0;
            for id in ids {
                let o = suite.run(id);
                println!("{o}");
                let _ = std::io::stdout().flush();
                failed += usize::from(!o.passed);
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn finish(json: bool, summary: stirflow::run::Summary) -> Result<u8, Error> {
    print(json, &summary, || {
        let mut lines = vec![format!(
            "{} \"{}\" ({}), config {}",
            summary.braid.class,
            summary.braid.reduced,
            summary.periods,
            summary.provenance.config_hash
        )];
        if let Some(f) = summary.curve.as_ref().and_then(|c| c.fit.as_ref()) {
            lines.push(format!("curve rate {:.4}", f.slope));
        }
        if let Some(f) = summary.gradient.as_ref().and_then(|c| c.fit.as_ref()) {
            lines.push(format!("gradient rate {:.4}", f.slope));
        }
        if let Some(c) = &summary.circulation {
            lines.push(format!("circulation drift {:.3e}", c.drift));
        }
        if let Some(l) = summary.braid.log_lambda {
            lines.push(format!("log lambda {l:.4}"));
        }
        for c in &summary.checks {
            lines.push(format!(
                "{} {} (threshold {}, margin {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.threshold,
                c.margin.map_or("-".into(), |m| format!("{m:.4}"))
            ));
        }
        lines.join("\n")
    });
    summary.verdict()?;
    Ok(0)
}

fn read_tracers(path: &Path) -> Result<Vec<Vec2>, Error> {
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let x = rec.get(0).and_then(|s| s.parse::<f64>().ok());
        let y = rec.get(1).and_then(|s| s.parse::<f64>().ok());
        match (x, y) {
            (Some(x), Some(y)) => points.push(Vec2::new(x, y)),
            // A non-numeric first row is a header.
            _ if i == 0 => {}
            _ => return Err(bad(format!("row {} is not `x,y`", i + 1))),
        }
    }
    if points.is_empty() {
        return Err(bad("no tracers".into()));
    }
    Ok(points)
}
