use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use ressim::analysis::{emit_csv, verify_eiss, verify_mass_balance, write_report, EissParams, RunSummary};
use ressim::control::design_gains;
use ressim::diffusion::BoundaryKind;
use ressim::scenario::{self, fixtures, ControlMode, Overrides, RunRecord, Scenario};
use ressim::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Convergence threshold on ‖σ‖ used in run reports.
const REPORT_THRESHOLD: f64 = 1e-2;

#[derive(Parser)]
#[command(
    name = "res-sim",
    version,
    about = "Closed-loop reservoir pressure and seismicity simulator"
)]
struct Cli {
    /// Worker threads for the data-parallel kernels (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ClosedLoop,
    DemandOnly,
    Off,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation time step [yr].
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Grid resolution as NXxNY, e.g. 40x40.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long, value_enum)]
    bc: Option<Bc>,
    /// End time [yr].
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV outputs and report.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Skip the uncontrolled baseline run.
        #[arg(long)]
        no_baseline: bool,
    },
    /// Check the modelling assumptions of a scenario without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Print controller gains and the stability inequality.
    Gains {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        k_bar2: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        b: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        delta_b: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        margin: Option<f64>,
    },
    /// Run a scenario and check discrete conservation of the mean pressure.
    MassBalanceCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Write the bundled fixtures and run a reduced Scenario 1.
    Demo {
        #[arg(long, default_value = "demo-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let nx: usize = a.trim().parse().map_err(|e| format!("bad NX `{a}`: {e}"))?;
    let ny: usize = b.trim().parse().map_err(|e| format!("bad NY `{b}`: {e}"))?;
    if nx == 0 || ny == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((nx, ny))
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
            grid: self.grid,
            bc: self.bc.map(|b| match b {
                Bc::Neumann => BoundaryKind::Neumann,
                Bc::Dirichlet => BoundaryKind::Dirichlet,
            }),
            t_end: self.t_end,
            mode: None,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Assumption { .. } => EXIT_VALIDATION,
        Error::Aborted { .. } | Error::SolverDiverged { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn setup_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        warn!("built without the `parallel` feature; --threads {threads} ignored");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RES_SIM_LOG", "warn")).init();
    let cli = Cli::parse();
    setup_threads(cli.threads);
    match cli.cmd {
        Command::Run {
            common,
            out,
            mode,
            no_baseline,
        } => {
            let mut o = common.overrides();
            o.mode = mode.map(|m| match m {
                Mode::ClosedLoop => ControlMode::ClosedLoop,
                Mode::DemandOnly => ControlMode::DemandOnly,
                Mode::Off => ControlMode::Off,
            });
            cmd_run(&common.config, &o, &out, !no_baseline)
        }
        Command::Validate { common } => cmd_validate(&common.config, &common.overrides()),
        Command::Gains {
            config,
            k_bar2,
            l,
            b,
            delta_b,
            margin,
        } => cmd_gains(config.as_deref(), k_bar2, l, b, delta_b, margin),
        Command::MassBalanceCheck { common } => cmd_mass_balance(&common.config, &common.overrides()),
        Command::Demo { out, seed } => cmd_demo(&out, seed),
    }
}

fn load(path: &Path, o: &Overrides) -> Result<Scenario, Error> {
    let sc = scenario::load_scenario_with(path, o)?;
    info!(
        "loaded `{}`: {} active cells, {} wells, {} outputs, {} periods of {} yr",
        sc.name,
        sc.grid.n_active(),
        sc.wells.len(),
        sc.map.m(),
        sc.schedule.periods,
        sc.schedule.dt_c
    );
    Ok(sc)
}

fn baseline_mode(sc: &Scenario) -> ControlMode {
    if sc.demand.is_some() {
        ControlMode::DemandOnly
    } else {
        ControlMode::Off
    }
}

fn run_and_write(sc: &Scenario, out: &Path, with_baseline: bool) -> Result<(RunRecord, Option<RunRecord>), Error> {
    let mode = sc.controller.mode;
    let base = baseline_mode(sc);
    let (rec, baseline) = if with_baseline && mode != base {
        let mut runs = scenario::run_many(sc, &[mode, base]).into_iter();
        let rec = runs.next().expect("two runs")?;
        let baseline = runs.next().expect("two runs")?;
        (rec, Some(baseline))
    } else {
        (scenario::run(sc)?, None)
    };
    emit_csv(&rec, baseline.as_ref(), out)?;
    let mut summary = RunSummary::new(&rec, baseline.as_ref(), REPORT_THRESHOLD);
    summary.assumptions = sc
        .report
        .checks
        .iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail.clone()))
        .collect();
    write_report(&out.join("report.json"), &summary)?;
    Ok((rec, baseline))
}

fn print_summary(rec: &RunRecord, baseline: Option<&RunRecord>) {
    let events = rec.events.last().copied().unwrap_or(0.0);
    let background = rec.background_events().last().copied().unwrap_or(0.0);
    println!(
        "scenario {} ({}), t_end = {:.3} yr",
        rec.meta.name,
        rec.meta.mode,
        rec.last_time()
    );
    println!("events: controlled {events:.4}, background {background:.4}");
    if let Some(b) = baseline {
        println!(
            "events: baseline ({}) {:.4}",
            b.meta.mode,
            b.events.last().copied().unwrap_or(0.0)
        );
    }
    println!("demand mismatch: {:.3e}", rec.demand_mismatch());
    for b in std::iter::once(verify_mass_balance(rec)).chain(verify_eiss(rec, &EissParams::default())) {
        println!(
            "{:<14} measured {:.4e} bound {:.4e} {:?}",
            b.quantity, b.measured_max, b.bound, b.status
        );
    }
}

fn cmd_run(config: &Path, o: &Overrides, out: &Path, with_baseline: bool) -> ExitCode {
    let sc = match load(config, o) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match run_and_write(&sc, out, with_baseline) {
        Ok((rec, baseline)) => {
            print_summary(&rec, baseline.as_ref());
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn cmd_validate(config: &Path, o: &Overrides) -> ExitCode {
    match scenario::validate_scenario(config, o) {
        Ok((_, report)) => {
            print!("{report}");
            if report.passed() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                let f = report.first_failure().expect("failing check");
                eprintln!("validation failed: {} {}", f.name, f.detail);
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Err(e) => fail(e),
    }
}

fn cmd_gains(
    config: Option<&Path>,
    k_bar2: Option<f64>,
    l: Option<f64>,
    b: Option<f64>,
    delta_b: Option<f64>,
    margin: Option<f64>,
) -> ExitCode {
    let spec = match config {
        Some(p) => match scenario::read_scenario_file(p) {
            Ok(f) => Some(f.controller),
            Err(e) => return fail(e),
        },
        None => None,
    };
    let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
        flag.or(from)
            .ok_or_else(|| Error::InvalidParameter(format!("--{name} is required without --config")))
    };
    let s = spec.as_ref();
    let values = (|| {
        Ok::<_, Error>((
            pick(k_bar2, s.map(|c| c.k_bar2), "k-bar2")?,
            pick(l, s.map(|c| c.l), "l")?,
            pick(b, s.map(|c| c.b), "b")?,
            delta_b.or(s.map(|c| c.delta_b)).unwrap_or(0.0),
            margin
                .or(s.map(|c| c.margin))
                .unwrap_or(ressim::control::DEFAULT_GAIN_MARGIN),
        ))
    })();
    let (k_bar2, l, b, delta_b, margin) = match values {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    if (0.9..1.0).contains(&delta_b) {
        eprintln!("warning: delta_b = {delta_b} is close to 1; gains become very large");
    }
    match design_gains(k_bar2, l, b, delta_b, margin) {
        Ok(g) => {
            println!("k1 = {:.6e}", g.k1);
            println!("k2 = {:.6e}", g.k2);
            println!("k_bar1 = {:.6e}, k_bar2 = {:.6e}, l = {:.6e}", g.k_bar1, g.k_bar2, g.l);
            println!(
                "k_bar1 = {:.6e} > sqrt(b k_bar2 / (1 - delta_b)) = {:.6e}: {}",
                g.k_bar1,
                g.k_bar1_limit(),
                if g.k_bar1 > g.k_bar1_limit() {
                    "holds"
                } else {
                    "violated"
                }
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn cmd_mass_balance(config: &Path, o: &Overrides) -> ExitCode {
    let sc = match load(config, o) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let rec = match scenario::run(&sc) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let rep = verify_mass_balance(&rec);
    println!(
        "mass balance: max relative residual {:.3e} (tolerance {:.0e}) {:?}",
        rep.measured_max, rep.bound, rep.status
    );
    if !rep.note.is_empty() {
        println!("{}", rep.note);
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    }
}

fn cmd_demo(out: &Path, seed: Option<u64>) -> ExitCode {
    let inputs = out.join("inputs");
    if let Err(e) = fixtures::write_all(&inputs) {
        return fail(e);
    }
    let o = Overrides {
        seed,
        dt: Some(2e-3),
        grid: Some((20, 20)),
        ..Overrides::default()
    };
    let sc = match load(&inputs.join("scenario1.toml"), &o) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    print!("{}", sc.report);
    match run_and_write(&sc, out, true) {
        Ok((rec, baseline)) => {
            print_summary(&rec, baseline.as_ref());
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
