use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nearfield_crb::io::{
    load_scenario, render_comparison, render_plan, render_sweep, write_sweep_csv, RunReport, Setting, SettingSource,
};
use nearfield_crb::optimizer::{
    compare_report, grid_search, sweep, Region, Summary, SweepMode, SweepSpec, SweepVariable,
};
use nearfield_crb::reposition::{
    analytic_reposition, apply_reposition, line_search_reposition, DisplacementGrid, MSelection, Objective,
};
use nearfield_crb::signal_model::received_power;
use nearfield_crb::validation::validate;
use nearfield_crb::{Error, Result};

// a closed pipe (e.g. `| head`) is not an error worth a panic
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

const DEFAULT_GRID: &str = "-200:200:2001";

#[derive(Parser)]
#[command(
    name = "nfcrb",
    version,
    about = "Near-field bearing/range CRB and single-element repositioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (JSON)
    #[arg(long)]
    scenario: PathBuf,
    /// Noise variance, overrides the file
    #[arg(long)]
    eta: Option<f64>,
    /// Snapshot count, overrides the file
    #[arg(long)]
    snapshots: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Analytic,
    Linesearch,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// det(R_x) and CRBs of a scenario
    Compute {
        #[command(flatten)]
        common: Common,
        /// Also write the figures as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Move one element and compare before/after
    Reposition {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// `auto` (strongest element) or a 1-based index
        #[arg(long, default_value = "auto")]
        element: String,
        /// gf, power, det, crb_theta or crb_r (search modes; default det)
        #[arg(long)]
        objective: Option<Objective>,
        /// `auto` or a positive integer (analytic mode)
        #[arg(long)]
        m: Option<String>,
        /// x displacements `min:max:steps` (search modes)
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// y displacements `min:max:steps`; turns grid mode into a 2-D search
        #[arg(long, allow_hyphen_values = true)]
        grid_y: Option<String>,
    },
    /// Frequency or velocity sweep, one CSV row per point and mode
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `frequency:<source>:<start>:<stop>:<steps>` or `velocity:<start>:<stop>:<steps>`
        #[arg(long)]
        vary: String,
        /// Comma-separated subset of primary,reposition
        #[arg(long, default_value = "primary,reposition")]
        modes: String,
        #[arg(long)]
        out: PathBuf,
        /// `auto` or a positive integer for the analytic plan
        #[arg(long)]
        m: Option<String>,
    },
    /// Derivative, closed-form and bound self-checks; nonzero exit on failure
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_m(text: Option<&str>) -> Result<(MSelection, Setting)> {
    let (m, src) = match text {
        None => (MSelection::Auto, SettingSource::Default),
        Some("auto") => (MSelection::Auto, SettingSource::CommandLine),
        Some(v) => match v.parse::<u32>() {
            Ok(k) if k > 0 => (MSelection::Fixed(k), SettingSource::CommandLine),
            _ => {
                return Err(Error::Validation(format!(
                    "--m must be `auto` or a positive integer, got {v:?}"
                )))
            }
        },
    };
    let shown = match m {
        MSelection::Auto => "auto".to_string(),
        MSelection::Fixed(k) => k.to_string(),
    };
    Ok((m, Setting::new("m", shown, src)))
}

fn parse_grid(text: &str) -> Result<DisplacementGrid<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Validation(format!("grid must look like min:max:steps, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].parse().map_err(|_| bad())?;
    let max: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    DisplacementGrid::new(min, max, steps)
}

fn parse_vary(text: &str) -> Result<(SweepVariable, f64, f64, usize)> {
    let bad = || {
        Error::Validation(format!(
            "--vary must be frequency:<source>:<start>:<stop>:<steps> or velocity:<start>:<stop>:<steps>, got {text:?}"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let (var, rest) = match parts.first().copied() {
        Some("frequency") if parts.len() == 5 => {
            let source: usize = parts[1].parse().map_err(|_| bad())?;
            if source == 0 {
                return Err(bad());
            }
            (SweepVariable::Frequency { source: source - 1 }, &parts[2..])
        }
        Some("velocity") if parts.len() == 4 => (SweepVariable::Velocity, &parts[1..]),
        _ => return Err(bad()),
    };
    let start: f64 = rest[0].parse().map_err(|_| bad())?;
    let stop: f64 = rest[1].parse().map_err(|_| bad())?;
    let steps: usize = rest[2].parse().map_err(|_| bad())?;
    Ok((var, start, stop, steps))
}

fn name_of(path: &Path, file_name: &Option<String>) -> String {
    file_name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Compute { common, csv } => {
            let file = load_scenario(&common.scenario)?;
            let (c, settings) = file.build(common.eta, common.snapshots)?;
            let report = RunReport::new(&name_of(&common.scenario, &file.name), file.encoding(), &c, settings)?;
            say!("{}", report.render());
            if let Some(path) = csv {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
        }
        Command::Reposition {
            common,
            mode,
            element,
            objective,
            m,
            grid,
            grid_y,
        } => {
            let file = load_scenario(&common.scenario)?;
            let (c, settings) = file.build(common.eta, common.snapshots)?;
            let name = name_of(&common.scenario, &file.name);
            let s = &c.scenario;
            let k = if element == "auto" {
                received_power(&s.steering()?, &s.signals).strongest
            } else {
                match element.parse::<usize>() {
                    Ok(k) if (1..=s.num_sensors()).contains(&k) => k - 1,
                    _ => {
                        return Err(Error::Validation(format!(
                            "--element must be `auto` or 1..={}, got {element:?}",
                            s.num_sensors()
                        )))
                    }
                }
            };
            let mut plan_settings = vec![Setting::new(
                "element",
                (k + 1).to_string(),
                if element == "auto" {
                    SettingSource::Default
                } else {
                    SettingSource::CommandLine
                },
            )];
            let plan = match mode {
                Mode::Analytic => {
                    if objective.is_some_and(|o| o != Objective::Gf) {
                        return Err(Error::Validation("analytic mode always minimizes gf".into()));
                    }
                    let (m, setting) = parse_m(m.as_deref())?;
                    plan_settings.push(setting);
                    analytic_reposition(&c, k, m)?
                }
                Mode::Linesearch | Mode::Grid => {
                    let obj = objective.unwrap_or(Objective::Det);
                    plan_settings.push(Setting::new(
                        "objective",
                        obj.name(),
                        if objective.is_some() {
                            SettingSource::CommandLine
                        } else {
                            SettingSource::Default
                        },
                    ));
                    plan_settings.push(Setting::new(
                        "grid",
                        grid.clone().unwrap_or(DEFAULT_GRID.into()),
                        if grid.is_some() {
                            SettingSource::CommandLine
                        } else {
                            SettingSource::Default
                        },
                    ));
                    let g = parse_grid(grid.as_deref().unwrap_or(DEFAULT_GRID))?;
                    match (mode, grid_y) {
                        (Mode::Linesearch, None) => line_search_reposition(&c, k, obj, &g)?,
                        (Mode::Linesearch, Some(_)) => {
                            return Err(Error::Validation("--grid-y needs --mode grid".into()))
                        }
                        (_, None) => grid_search(&c, k, obj, &Region::Line(g))?,
                        (_, Some(y)) => {
                            plan_settings.push(Setting::new("grid_y", y.clone(), SettingSource::CommandLine));
                            grid_search(
                                &c,
                                k,
                                obj,
                                &Region::Box {
                                    x: g,
                                    y: parse_grid(&y)?,
                                },
                            )?
                        }
                    }
                }
            };
            let after = apply_reposition(&c, &plan)?;
            let before_report = RunReport::new(&name, file.encoding(), &c, settings.clone())?;
            let after_report = RunReport::new(&format!("{name} (after move)"), file.encoding(), &after, settings)?;
            say!("{}", render_plan(&plan, &plan_settings));
            say!("\n--- before ---\n");
            say!("{}", before_report.render());
            say!("\n--- after ---\n");
            say!("{}", after_report.render());
            say!("\n");
            let cmp = compare_report(&Summary::of(&c)?, &Summary::of(&after)?)?;
            say!("{}", render_comparison(&cmp));
        }
        Command::Sweep {
            common,
            vary,
            modes,
            out,
            m,
        } => {
            let file = load_scenario(&common.scenario)?;
            let (c, settings) = file.build(common.eta, common.snapshots)?;
            let (var, start, stop, steps) = parse_vary(&vary)?;
            let modes = modes
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<SweepMode>())
                .collect::<Result<Vec<_>>>()?;
            let mut spec = SweepSpec::new(var, start, stop, steps, modes)?;
            let (m, m_setting) = parse_m(m.as_deref())?;
            spec.m = m;
            for s in settings.iter().chain(std::iter::once(&m_setting)) {
                let tag = if s.source == SettingSource::Default {
                    "  [default]"
                } else {
                    ""
                };
                say!("{:<16} {}{}\n", s.name, s.value, tag);
            }
            let rows = sweep(&c, &spec)?;
            say!("{}", render_sweep(&rows));
            write_sweep_csv(&rows, BufWriter::new(File::create(&out)?))?;
            say!("wrote {} rows to {}\n", rows.len(), out.display());
        }
        Command::Validate { common } => {
            let file = load_scenario(&common.scenario)?;
            let (c, _) = file.build(common.eta, common.snapshots)?;
            let report = validate(&c)?;
            say!("{}", report.render());
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
