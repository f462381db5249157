//! `inpipe` — scenario runner for the in-pipe robot simulator.
//!
//! One TOML file describes the pipe run, the route, and every tuning knob;
//! subcommands execute a mission, synthesize the stabilizer gain, budget the
//! battery, benchmark the localizer, or dump the drag surface.  Everything
//! is seeded, so the same scenario file and seed reproduce output byte for
//! byte.  Exit codes: 0 success, 2 configuration, 3 mission fault, 4 time
//! budget exceeded.

mod config;

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use inpipe_core::control::{linearize, solve_care, GainReport, REFERENCE_GAIN_D018};
use inpipe_core::dynamics::drag_force;
use inpipe_core::energy::range_estimate;
use inpipe_core::estimation::{pf_estimate, pf_init, pf_update, ultrasonic_measure, GridFilter};
use inpipe_core::navigation::{mission_run, MissionError, MissionReport};
use inpipe_core::pipe_map::{single_feature_map, DesiredTurn, FeatureKind};
use inpipe_core::units::to_deg;

use config::{parse_config, parse_length_arg, ConfigError, Scenario};

#[derive(Parser)]
#[command(
    name = "inpipe",
    version,
    about = "Deterministic simulator for a wall-press pipe inspection robot"
)]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the scenario's random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Directory for generated files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Reject unknown configuration keys instead of ignoring them.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured mission and write its trace.
    Mission,
    /// Print the tilt model and the synthesized stabilizer gain.
    Lqr {
        /// Bore diameter to linearize at; defaults to the map's first segment.
        #[arg(long, value_name = "LENGTH")]
        diameter: Option<String>,
    },
    /// Battery budget at the configured operating point.
    Energy,
    /// Localization benchmark: particle filter against a dense grid filter.
    PfBench {
        /// Seeded trials to run.
        #[arg(long, default_value_t = 100)]
        trials: u32,
    },
    /// Dump the drag surface as CSV on stdout.
    DragTable,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Fault(String),
    Timeout(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fault(_) => 3,
            CliError::Timeout(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Fault(s) => write!(f, "fault: {s}"),
            CliError::Timeout(s) => write!(f, "timeout: {s}"),
            CliError::Other(s) => write!(f, "{s}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn main() -> ExitCode {
    // Die quietly when a pager or `head` closes the pipe early, like any
    // other line-oriented tool, instead of panicking on the failed print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Mission => cmd_mission(cli),
        Command::Lqr { diameter } => cmd_lqr(cli, diameter.as_deref()),
        Command::Energy => cmd_energy(cli),
        Command::PfBench { trials } => cmd_pf_bench(cli, *trials),
        Command::DragTable => cmd_drag_table(),
    }
}

/// Load the scenario, command-line overrides applied.
fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| {
            CliError::Config(ConfigError::Parse(format!("{}: {e}", path.display())))
        })?,
        None => String::new(),
    };
    let mut sc = parse_config(&text, cli.strict)?;
    if let Some(seed) = cli.seed {
        sc.setup.config.seed = seed;
    }
    if let Some(out) = &cli.out {
        sc.out_dir = Some(out.display().to_string());
    }
    Ok(sc)
}

/// Where generated files go; created on demand.
fn out_dir(sc: &Scenario) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(sc.out_dir.as_deref().unwrap_or("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn kind_label(kind: FeatureKind) -> &'static str {
    match kind {
        FeatureKind::Bend => "bend",
        FeatureKind::TJunction => "tee",
    }
}

fn turn_label(turn: DesiredTurn) -> &'static str {
    match turn {
        DesiredTurn::PhiPositive => "phi+",
        DesiredTurn::PhiNegative => "phi-",
        DesiredTurn::PsiPositive => "psi+",
        DesiredTurn::PsiNegative => "psi-",
        DesiredTurn::StraightThrough => "straight-through",
    }
}

// --- mission ---------------------------------------------------------------

fn cmd_mission(cli: &Cli) -> Result<(), CliError> {
    let sc = load_scenario(cli)?;
    let dir = out_dir(&sc)?;
    log::info!("scenario: {sc}");

    let (mut report, failure): (MissionReport, Option<CliError>) = match mission_run(&sc.setup) {
        Ok(r) => (r, None),
        Err(MissionError::Fault { reason, report }) => {
            (*report, Some(CliError::Fault(reason.to_string())))
        }
        Err(MissionError::Timeout { limit, report }) => (
            *report,
            Some(CliError::Timeout(format!(
                "mission exceeded the {limit} s budget"
            ))),
        ),
        // Anything else means the setup itself was unusable.
        Err(e) => return Err(CliError::Config(ConfigError::Parse(e.to_string()))),
    };

    // The trace is sampled at 100 Hz; thin it to the configured cadence.
    let stride = sc.trace_stride();
    if stride > 1 {
        report.trace = std::mem::take(&mut report.trace)
            .into_iter()
            .step_by(stride)
            .collect();
    }
    let path = dir.join("trace.csv");
    fs::write(&path, report.to_csv())
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;

    println!("route: {sc}");
    println!(
        "outcome: {} after {:.1} s sim time, {:.2} m travelled (final s = {:.2} m)",
        report.outcome.as_str(),
        report.duration,
        report.distance_travelled,
        report.final_s
    );
    for ev in &report.features {
        let mut line = format!(
            "  [{}] {} {}: stopped {:.3} m short (error {:+.1} mm)",
            ev.entry,
            kind_label(ev.kind),
            turn_label(ev.turn),
            ev.trigger_gap,
            ev.stop_error * 1e3
        );
        if let (Some(dur), Some(on), Some(off)) =
            (ev.turn_duration, ev.residual_on_axis, ev.residual_off_axis)
        {
            write!(
                line,
                "; turn {:.2} s, residual on {:+.2} deg / off {:+.2} deg",
                dur,
                to_deg(on),
                to_deg(off)
            )
            .unwrap();
        }
        if ev.retries > 0 {
            write!(line, "; {} retries", ev.retries).unwrap();
        }
        println!("{line}");
    }
    println!(
        "charge drawn: {:.4} Ah; final belief {:.2} m \u{b1} {:.3} m ({} localization resets)",
        report.charge_ah,
        report.final_summary.mean,
        report.final_summary.std,
        report.pf_degenerate_resets
    );
    println!("trace: {} ({} rows)", path.display(), report.trace.len());

    match failure {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

// --- gain synthesis --------------------------------------------------------

fn cmd_lqr(cli: &Cli, diameter: Option<&str>) -> Result<(), CliError> {
    let sc = load_scenario(cli)?;
    let d = match diameter {
        Some(text) => parse_length_arg(text, "--diameter")?,
        None => sc.setup.map.segments()[0].diameter,
    };
    let model = linearize(&sc.setup.params, d)
        .map_err(|e| CliError::Config(ConfigError::Parse(e.to_string())))?;
    let gain = solve_care(&model, &sc.setup.config.lqr_weights)
        .map_err(|e| CliError::Config(ConfigError::Parse(e.to_string())))?;

    println!("tilt model at {:.4} m bore", d);
    println!("state: x = [phi, phi_dot, psi, psi_dot], input: per-wheel torque");
    println!("A = {:.4}", model.a);
    println!("B = {:.4}", model.b);
    println!("Riccati solution P = {:.4}", gain.p);

    if (d - 0.18).abs() < 1e-12 {
        // The tabulated reference gain exists only for the 0.18 m bore.
        print!(
            "{}",
            GainReport::against_reference(gain, REFERENCE_GAIN_D018)
        );
    } else {
        println!("synthesized gain K (u = -K x_s) = {:.4}", gain.k);
        println!("CARE residual: {:.3e}", gain.care_residual);
        print!("closed-loop eigenvalues:");
        for l in &gain.closed_loop_eigenvalues {
            print!(" {:.3}{:+.3}i", l.re, l.im);
        }
        println!();
    }
    Ok(())
}

// --- battery budget --------------------------------------------------------

fn cmd_energy(cli: &Cli) -> Result<(), CliError> {
    let sc = load_scenario(cli)?;
    let op = &sc.operating_point;
    let report = range_estimate(op, &sc.setup.params, sc.avionics_current);

    println!(
        "operating point: ground {:+.2} m/s, flow {:+.2} m/s, line pressure {:.0} kPa, grade {:.1} deg",
        op.ground_speed,
        op.flow_velocity,
        op.line_pressure,
        to_deg(op.inclination)
    );
    println!(
        "relative water speed: {:.2} m/s; avionics draw {:.3} A",
        op.relative_water_speed(),
        sc.avionics_current
    );
    if report.clamped {
        println!("note: outside the measured drag envelope; loads clamped to its hull");
    }
    println!("per-motor load: {:.2} N", report.per_motor_force);
    println!("per-motor current: {:.3} A", report.per_motor_current);
    println!("total draw: {:.3} A", report.total_current);
    if report.infinite {
        println!("endurance: unbounded (nothing draws current)");
    } else {
        println!("endurance: {:.2} h", report.discharge_hours);
        println!("range: {:.0} m", report.range_meters);
    }
    Ok(())
}

// --- localization benchmark ------------------------------------------------

fn cmd_pf_bench(cli: &Cli, trials: u32) -> Result<(), CliError> {
    let sc = load_scenario(cli)?;
    let dir = out_dir(&sc)?;
    // A map without features gives the rangefinder nothing to see; fall back
    // to the reference course (one bend, ~8 m).
    let map = if sc.default_map || sc.setup.map.ct().is_empty() {
        single_feature_map(6.0, FeatureKind::Bend, DesiredTurn::PhiNegative, 1.5)
    } else {
        sc.setup.map.clone()
    };
    let model = sc.setup.sensors.ultrasonic;
    let pf_cfg = sc.setup.sensors.pf;
    let total = map.total_arclength();
    let s0: f64 = (0.2 * total).min(1.4);
    let u = 0.1;
    let steps = (((total - s0 - 0.5) / u) as usize).clamp(10, 100);
    let bin = (total / 10_000.0).max(0.002);
    let base = cli.seed.unwrap_or(0);

    let mut csv = String::from("seed,mean_error_m,grid_std_m,ratio\n");
    let mut hits = 0u32;
    let mut worst = 0.0f64;
    let mut sum_abs = 0.0;
    let mut sum_std = 0.0;
    for trial in 0..trials as u64 {
        let seed = base + trial;
        let mut meas_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5049_4e47);
        let mut belief = pf_init(&map, pf_cfg.particle_count, seed)
            .map_err(|e| CliError::Config(ConfigError::Parse(e.to_string())))?;
        let mut grid = GridFilter::uniform(total, bin);
        let mut truth = s0;
        for _ in 0..steps {
            truth += u;
            let z = ultrasonic_measure(&model, &map, truth, &mut meas_rng);
            let sigma = pf_cfg.odometry_sigma(u);
            grid.predict(u, sigma);
            grid.update(&z, &map, &model);
            pf_update(&mut belief, u, sigma, &z, &map, &model)
                .map_err(|e| CliError::Other(e.to_string()))?;
        }
        let err = pf_estimate(&belief).mean - grid.mean();
        let std = grid.std();
        let ratio = err.abs() / std;
        if ratio <= 3.0 {
            hits += 1;
        }
        worst = worst.max(ratio);
        sum_abs += err.abs();
        sum_std += std;
        writeln!(csv, "{seed},{err:.6},{std:.6},{ratio:.4}").unwrap();
    }

    let path = dir.join("pf_bench.csv");
    fs::write(&path, csv).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    println!(
        "localization benchmark: {} particles vs {:.3} m grid over {:.1} m of pipe, {} steps per trial",
        pf_cfg.particle_count, bin, total, steps
    );
    println!("within 3 grid sigma: {hits}/{trials} trials (worst {worst:.2} sigma)");
    println!(
        "mean |particle - grid| {:.1} mm; mean grid sigma {:.1} mm",
        sum_abs / trials as f64 * 1e3,
        sum_std / trials as f64 * 1e3
    );
    println!("per-trial results: {}", path.display());
    Ok(())
}

// --- drag surface ----------------------------------------------------------

fn cmd_drag_table() -> Result<(), CliError> {
    println!("v_mps,p100kpa,p200kpa,p300kpa,p400kpa,p500kpa");
    // The measured envelope: -0.2..1.2 m/s by 0.02, five line pressures.
    for i in 0..=70 {
        let v = -0.2 + 0.02 * i as f64;
        print!("{v:.2}");
        for p in [100.0, 200.0, 300.0, 400.0, 500.0] {
            print!(",{:.6}", drag_force(v, p));
        }
        println!();
    }
    Ok(())
}
