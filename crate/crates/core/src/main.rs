use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use fshape::fem::Element;
use fshape::io::table::{trace_rows, TRACE_HEADER};
use fshape::io::{load_fshape, save_csv, save_fshape, Cell, Expr, FShapeFile, RunConfig, SurfaceSpec};
use fshape::matching::{gamma_experiment, minimize, GammaSetup, GammaTable, MatchProblem};
use fshape::surface::{
    admissibility_report, builtin_surface, discretize_signal, sample_triangulation, AdmissibilityThresholds,
};
use fshape::{Error, Result};

#[derive(Parser)]
#[command(name = "fshape", version, about = "Signal matching on triangulated surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ElementArg {
    P0,
    P1,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the matching energy of the source signal against the target.
    Match {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory for optimal.off and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the energy breakdown of an fshape against a target.
    Energy {
        #[arg(long)]
        fshape: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the refinement study described by a config file.
    Gamma {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// CSV path; defaults to <output.dir>/gamma.csv, or stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a mesh against a builtin surface at step h.
    Meshcheck {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        surface: String,
        /// Surface parameter as key=value; repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        h: f64,
    },
    /// Triangulate a builtin surface and sample a signal expression on it.
    Discretize {
        #[arg(long)]
        surface: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        signal: String,
        #[arg(long)]
        h: f64,
        #[arg(long, value_enum)]
        element: ElementArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    eprintln!();
                    let _ = Cli::command().print_help();
                }
                _ => {
                    let _ = e.print();
                }
            }
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}

fn parse_params(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut params = BTreeMap::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::BadParams(format!("--param '{item}' is not KEY=VALUE")))?;
        let value = v
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::BadParams(format!("--param {}: '{}' is not a number", k.trim(), v.trim())))?;
        params.insert(k.trim().to_string(), value);
    }
    Ok(params)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Match {
            source,
            target,
            config,
            out,
        } => {
            let cfg = with_path(&config, RunConfig::load(&config))?;
            let src = with_path(&source, load_fshape(&source))?;
            let tgt = with_path(&target, load_fshape(&target))?;
            let element = cfg.model.element();
            let initial = match &src.signal {
                Some(_) => Some(src.signal_as(element)?),
                None => None,
            };
            let target_signal = tgt.signal_as(Element::P0)?;
            let problem = MatchProblem::from_fshapes(src.mesh.clone(), &tgt.mesh, &target_signal, cfg.model, initial)?;
            let trace = minimize(&problem, &cfg.descent)?;
            std::fs::create_dir_all(&out)?;
            let result = FShapeFile {
                mesh: src.mesh,
                signal: Some(trace.signal.clone()),
            };
            save_fshape(&result, out.join("optimal.off"))?;
            save_csv(out.join("trace.csv"), &TRACE_HEADER, &trace_rows(&trace))?;
            println!(
                "{:?} after {} iterations: E = {:.16e}",
                trace.termination,
                trace.records.len() - 1,
                trace.energy.total
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Energy { fshape, target, config } => {
            let cfg = with_path(&config, RunConfig::load(&config))?;
            let src = with_path(&fshape, load_fshape(&fshape))?;
            let tgt = with_path(&target, load_fshape(&target))?;
            let element = cfg.model.element();
            let signal = match &src.signal {
                Some(_) => src.signal_as(element)?,
                None => fshape::fem::Signal::zeros(element, &src.mesh),
            };
            let target_signal = tgt.signal_as(Element::P0)?;
            let problem = MatchProblem::from_fshapes(src.mesh, &tgt.mesh, &target_signal, cfg.model, None)?;
            let e = problem.energy(&signal)?;
            println!("model {}", cfg.model.name());
            println!("signal_penalty {:.16e}", e.signal_penalty);
            println!("gradient_penalty {:.16e}", e.gradient_penalty);
            println!("attachment {:.16e}", e.attachment);
            println!("total {:.16e}", e.total);
            Ok(ExitCode::SUCCESS)
        }
        Command::Gamma { config, threads, out } => {
            let cfg = with_path(&config, RunConfig::load(&config))?;
            let csv = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::BadParams(format!("--threads: {e}")))?
                    .install(|| gamma_csv(&cfg))?,
                None => gamma_csv(&cfg)?,
            };
            let path = out.or_else(|| cfg.output_dir.as_ref().map(|d| d.join("gamma.csv")));
            match path {
                Some(p) => {
                    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                        std::fs::create_dir_all(parent)?;
                    }
                    std::fs::write(&p, csv)?;
                    eprintln!("wrote {}", p.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Meshcheck { mesh, surface, params, h } => {
            let surface = builtin_surface(&surface, &parse_params(&params)?)?;
            let file = with_path(&mesh, load_fshape(&mesh))?;
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::BadStep(h));
            }
            let report = admissibility_report(&file.mesh, &surface, h, &AdmissibilityThresholds::default());
            println!("h {}", report.h);
            for c in &report.checks {
                println!(
                    "{:<24} {:>14.6e} {:>14.6e} {}",
                    c.name,
                    c.value,
                    c.threshold,
                    if c.passed { "ok" } else { "FAIL" }
                );
            }
            println!("alpha_max {:.6e}", report.alpha_max);
            println!("hausdorff_estimate {:.6e}", report.hausdorff_estimate);
            println!("{}", if report.passed { "admissible" } else { "not admissible" });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Discretize {
            surface,
            params,
            signal,
            h,
            element,
            out,
        } => {
            let surface = builtin_surface(&surface, &parse_params(&params)?)?;
            let expr = Expr::parse(&signal)?;
            let mesh = sample_triangulation(&surface, h)?;
            let element = match element {
                ElementArg::P0 => Element::P0,
                ElementArg::P1 => Element::P1,
            };
            let values = discretize_signal(&surface, &expr, &mesh, element)?;
            save_fshape(
                &FShapeFile {
                    mesh,
                    signal: Some(values),
                },
                &out,
            )?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn surface_pair(cfg: &RunConfig) -> Result<(&SurfaceSpec, &SurfaceSpec)> {
    let source = cfg
        .source
        .as_ref()
        .ok_or_else(|| Error::Config("missing required field source.surface".into()))?;
    let target = cfg
        .target
        .as_ref()
        .ok_or_else(|| Error::Config("missing required field target.surface".into()))?;
    Ok((source, target))
}

fn gamma_csv(cfg: &RunConfig) -> Result<String> {
    let (source, target) = surface_pair(cfg)?;
    let source_surface = source.build()?;
    let target_surface = target.build()?;
    let f0 = source.signal_or_zero();
    let g = target.signal_or_zero();
    let table = gamma_experiment(&GammaSetup {
        source: &source_surface,
        source_signal: &f0,
        target: &target_surface,
        target_signal: &g,
        model: cfg.model,
        descent: cfg.descent,
        levels: cfg.levels.clone(),
        lift_cells: cfg.lift_cells,
        lift_order: cfg.lift_order,
        oracle: cfg.oracle,
    })?;
    let rows: Vec<Vec<Cell>> = table
        .csv_rows()
        .into_iter()
        .map(|r| r.into_iter().map(Cell::Float).collect())
        .collect();
    fshape::io::format_csv(&GammaTable::csv_header(), &rows)
}
