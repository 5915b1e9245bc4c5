use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polycreep::dataio::{self, presets, DataError, Preset, SyntheticSpec};
use polycreep::evolution::{
    drive, relax, DriveOptions, EvolutionError, EvolutionState, Trajectory,
};
use polycreep::fitting::{fit_dataset, holdout_error, initial_guess, FitConfig, FitError};
use polycreep::kinematics::MotionProtocol;
use polycreep::material::celsius_to_kelvin;
use polycreep::uniaxial::{
    simulate_creep, CreepOptions, CreepSegment, StrainMeasure, UniaxialError,
};
use polycreep::validate::{run_suite, SuiteConfig};
use polycreep::{Execution, MaterialParams};

/// Finite-strain creep, recovery and relaxation of polyimides.
///
/// Units are SI throughout: stresses and moduli in Pa, viscosity in Pa·s,
/// times in s, temperatures in °C. Numbers accept scientific notation.
#[derive(Debug, Parser)]
#[command(name = "polycreep", version, about, long_about)]
struct Cli {
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Uniaxial creep under a piecewise-constant stress program.
    Simulate(SimulateArgs),
    /// Fit (μ̄_p, μ̄_G, η) to a creep/recovery dataset.
    Fit(FitArgs),
    /// Drive the tensor model through a strain-controlled motion.
    Drive(DriveArgs),
    /// Stress relaxation after an instantaneous stretch.
    Relax(RelaxArgs),
    /// Print the built-in parameter table.
    Presets,
    /// Run the invariant and consistency checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Built-in parameter set (see `presets`).
    #[arg(long, conflicts_with_all = ["mu_p", "mu_g", "eta", "params"])]
    preset: Option<String>,
    /// μ̄_p (Pa).
    #[arg(long, requires_all = ["mu_g", "eta"], conflicts_with = "params")]
    mu_p: Option<f64>,
    /// μ̄_G (Pa); 0 gives the Maxwell fluid.
    #[arg(long, requires_all = ["mu_p", "eta"], conflicts_with = "params")]
    mu_g: Option<f64>,
    /// η (Pa·s).
    #[arg(long, requires_all = ["mu_p", "mu_g"], conflicts_with = "params")]
    eta: Option<f64>,
    /// Parameter JSON file, optionally with a thermal block.
    #[arg(long, value_name = "JSON")]
    params: Option<PathBuf>,
    /// Temperature (°C) for parameter files with a thermal block.
    #[arg(
        long,
        value_name = "CELSIUS",
        requires = "params",
        allow_hyphen_values = true
    )]
    temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrainArg {
    Log,
    Engineering,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Stress segment `<stress_pa>:<duration_s>`; repeat for a program.
    #[arg(
        long = "segment",
        value_name = "STRESS:DURATION",
        allow_hyphen_values = true
    )]
    segments: Vec<String>,
    /// Load at this fraction of the preset's UTS, then unload.
    #[arg(long, conflicts_with = "segments")]
    load_fraction: Option<f64>,
    /// Load duration (s) for a load/unload test [default: 5τ, τ = η/(2μ̄_G)].
    #[arg(long, conflicts_with = "segments")]
    t_load: Option<f64>,
    /// Unload duration (s) for a load/unload test [default: 5τ].
    #[arg(long, conflicts_with = "segments")]
    t_unload: Option<f64>,
    /// Curve CSV output.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
    /// SVG plot output.
    #[arg(long, value_name = "SVG")]
    plot: Option<PathBuf>,
    /// Also write a sampled dataset file of the load/unload test.
    #[arg(long, value_name = "CSV")]
    dataset_out: Option<PathBuf>,
    /// Relative Gaussian noise on the dataset strains.
    #[arg(long, default_value_t = 0.0, requires = "dataset_out")]
    noise: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0, requires = "dataset_out")]
    seed: u64,
    /// Strain measure of the curve output.
    #[arg(long, value_enum, default_value_t = StrainArg::Log)]
    strain: StrainArg,
    /// Integrator relative tolerance.
    #[arg(long, default_value = "1e-8")]
    rtol: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset CSV to fit.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Load-phase weight w in [0, 1].
    #[arg(long, default_value_t = polycreep::fitting::DEFAULT_WEIGHT)]
    weight: f64,
    /// Starting point: a preset name or `mu_p,mu_g,eta` [default: estimated from the data].
    #[arg(long, value_name = "PRESET|TRIPLE")]
    init: Option<String>,
    /// Held-out dataset to score the fitted parameters on; repeatable.
    #[arg(long, value_name = "CSV")]
    holdout: Vec<PathBuf>,
    /// Result JSON output.
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("motion").required(true))]
struct DriveArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Uniaxial extension at this logarithmic strain rate (1/s).
    #[arg(long, group = "motion", allow_hyphen_values = true)]
    strain_rate: Option<f64>,
    /// Simple shear at this shear rate (1/s).
    #[arg(long, group = "motion", allow_hyphen_values = true)]
    shear_rate: Option<f64>,
    /// Duration (s).
    #[arg(long)]
    duration: f64,
    /// Rescale B_p to unit determinant after each step.
    #[arg(long)]
    project: bool,
    /// Integrator relative tolerance.
    #[arg(long, default_value = "1e-8")]
    rtol: f64,
    /// Trajectory CSV output.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RelaxArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Axial stretch held after the step.
    #[arg(long)]
    stretch: f64,
    /// Hold time (s) [default: 5τ].
    #[arg(long)]
    hold: Option<f64>,
    /// Integrator relative tolerance.
    #[arg(long, default_value = "1e-8")]
    rtol: f64,
    /// Trajectory CSV output.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Only the sub-second checks.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const NUMERICAL: u8 = 3;
const VALIDATION: u8 = 4;

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            error: anyhow!(msg.into()),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let code = match &e {
            DataError::UnknownPreset(_) => USAGE,
            DataError::Simulation(u) => uniaxial_code(u),
            _ => DATA,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn uniaxial_code(e: &UniaxialError) -> u8 {
    match e {
        UniaxialError::NonPositive { .. }
        | UniaxialError::NonFinite(_)
        | UniaxialError::InvalidProgram(_) => USAGE,
        UniaxialError::Material(_) | UniaxialError::Integration { .. } => NUMERICAL,
    }
}

impl From<UniaxialError> for Failure {
    fn from(e: UniaxialError) -> Self {
        Self {
            code: uniaxial_code(&e),
            error: e.into(),
        }
    }
}

impl From<EvolutionError> for Failure {
    fn from(e: EvolutionError) -> Self {
        let code = match e {
            EvolutionError::InitialState(_) | EvolutionError::Kinematics(_) => USAGE,
            _ => NUMERICAL,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        let code = match e {
            FitError::Dataset(_) => DATA,
            FitError::Config(_) => USAGE,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure {
        code: DATA,
        error: anyhow::Error::new(e).context(format!("writing {}", path.display())),
    }
}

type Outcome = Result<(), Failure>;

struct Resolved {
    mp: MaterialParams,
    preset: Option<Preset>,
}

fn resolve_params(args: &ParamArgs) -> Result<Resolved, Failure> {
    if let Some(name) = &args.preset {
        let p = presets().get(name)?.clone();
        return Ok(Resolved {
            mp: p.params(),
            preset: Some(p),
        });
    }
    if let Some(path) = &args.params {
        let mut mp = dataio::load_params(path)?;
        if let Some(c) = args.temperature {
            if mp.thermal.is_none() {
                return Err(Failure::usage(
                    "--temperature needs a parameter file with a thermal block",
                ));
            }
            mp = mp
                .at_temperature(celsius_to_kelvin(c))
                .map_err(|e| Failure {
                    code: DATA,
                    error: e.into(),
                })?;
        }
        return Ok(Resolved { mp, preset: None });
    }
    match (args.mu_p, args.mu_g, args.eta) {
        (Some(p), Some(g), Some(e)) => {
            let mp = MaterialParams::new(p, g, e).map_err(|e| Failure::usage(e.to_string()))?;
            Ok(Resolved { mp, preset: None })
        }
        _ => Err(Failure::usage(
            "material parameters required: --preset, --params, or --mu-p/--mu-g/--eta",
        )),
    }
}

fn parse_segment(s: &str) -> Result<CreepSegment, Failure> {
    let (stress, duration) = s
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("segment `{s}` is not <stress_pa>:<duration_s>")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| Failure::usage(format!("segment `{s}`: {e}")))
    };
    Ok(CreepSegment::new(num(stress)?, num(duration)?)?)
}

fn default_duration(mp: &MaterialParams, given: Option<f64>, flag: &str) -> Result<f64, Failure> {
    match given {
        Some(t) => Ok(t),
        None if mp.mu_g_bar > 0.0 => Ok(5.0 * mp.retardation_time()),
        None => Err(Failure::usage(format!("{flag} is required when mu_G = 0"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(io_failure(path))
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let Resolved { mp, preset } = resolve_params(&args.params)?;
    let mut load_unload = None;
    let segments = if !args.segments.is_empty() {
        args.segments
            .iter()
            .map(|s| parse_segment(s))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let stress = match (args.load_fraction, &preset) {
            (Some(f), Some(p)) => p.stress_at_fraction(f).ok_or_else(|| {
                Failure::usage(format!("preset {} has no UTS for --load-fraction", p.name))
            })?,
            (Some(_), None) => return Err(Failure::usage("--load-fraction needs --preset")),
            (None, Some(p)) => p.reference_stress().ok_or_else(|| {
                Failure::usage(format!(
                    "preset {} has no reference stress; give --segment",
                    p.name
                ))
            })?,
            (None, None) => return Err(Failure::usage("give --segment or --load-fraction")),
        };
        let t_load = default_duration(&mp, args.t_load, "--t-load")?;
        let t_unload = default_duration(&mp, args.t_unload, "--t-unload")?;
        load_unload = Some((stress, t_load, t_unload));
        vec![
            CreepSegment::new(stress, t_load)?,
            CreepSegment::new(0.0, t_unload)?,
        ]
    };
    if load_unload.is_none() && segments.len() == 2 && segments[1].stress == 0.0 {
        load_unload = Some((
            segments[0].stress,
            segments[0].duration,
            segments[1].duration,
        ));
    }

    let strain = match args.strain {
        StrainArg::Log => StrainMeasure::Logarithmic,
        StrainArg::Engineering => StrainMeasure::Engineering,
    };
    let opts = CreepOptions {
        strain,
        ..CreepOptions::default().with_rtol(args.rtol)
    };
    let sol = simulate_creep(&segments, &mp, &opts)?;
    let label = preset.as_ref().map_or_else(
        || {
            format!(
                "mu_p={:e} mu_G={:e} eta={:e}",
                mp.mu_p_bar, mp.mu_g_bar, mp.eta
            )
        },
        |p| p.name.to_string(),
    );
    let curve = sol.curve().with_label(label);

    let eps0 = sol.strain_at(0.0).unwrap_or(f64::NAN);
    println!("eps(0+) = {eps0:.6e}");
    println!(
        "eps_end = {:.6e} at t = {:.6e} s",
        sol.final_strain(),
        sol.t_end()
    );
    for (k, seg) in sol.segments.iter().enumerate() {
        println!(
            "segment {k}: stress {:.4e} Pa, t = [{:.4e}, {:.4e}] s, eps {:.6e} -> {:.6e}",
            seg.stress,
            seg.start,
            seg.end,
            sol.strain_in_segment(k, seg.start).unwrap_or(f64::NAN),
            sol.segment_end_strain(k).unwrap_or(f64::NAN)
        );
    }

    if let Some(path) = &args.out {
        let mut w = create(path)?;
        curve
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(io_failure(path))?;
    }
    if let Some(path) = &args.plot {
        let svg = dataio::render_svg(std::slice::from_ref(&curve))?;
        fs::write(path, svg).map_err(io_failure(path))?;
    }
    if let Some(path) = &args.dataset_out {
        let (stress, t_load, t_unload) = load_unload.ok_or_else(|| {
            Failure::usage("--dataset-out needs a load/unload program (stress then 0)")
        })?;
        let mut spec = SyntheticSpec::new(mp, stress, t_load, t_unload);
        spec.noise = args.noise;
        spec.seed = args.seed;
        spec.creep = opts;
        let mut ds = dataio::synthetic_dataset(&spec)?;
        ds.temperature_c = preset.as_ref().map(|p| p.temperature_c);
        dataio::save_dataset(&ds, path)?;
    }
    Ok(())
}

fn parse_init(s: &str) -> Result<MaterialParams, Failure> {
    if s.contains(',') {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::usage(format!("--init `{s}`: {e}")))?;
        if v.len() != 3 {
            return Err(Failure::usage("--init triple needs mu_p,mu_g,eta"));
        }
        return MaterialParams::new(v[0], v[1], v[2]).map_err(|e| Failure::usage(e.to_string()));
    }
    Ok(presets().get(s)?.params())
}

fn fit(args: &FitArgs, execution: Execution) -> Outcome {
    let ds = dataio::load_dataset(&args.data)?;
    let initial = match &args.init {
        Some(s) => parse_init(s)?,
        None => initial_guess(&ds)?,
    };
    let mut cfg = FitConfig::new(initial).with_weight(args.weight);
    cfg.simplex.execution = execution;
    cfg.validate()?;
    let result = fit_dataset(&ds, &cfg)?;
    if !result.converged {
        log::warn!("simplex stopped at the iteration cap");
    }
    println!(
        "error = {:.6e} (w = {}, {} iterations)",
        result.error, result.w, result.iterations
    );
    println!("mu_p_bar = {:.6e} Pa", result.mu_p_bar);
    println!("mu_g_bar = {:.6e} Pa", result.mu_g_bar);
    println!("eta = {:.6e} Pa.s", result.eta);

    let mut holdout = Vec::new();
    for path in &args.holdout {
        let h = dataio::load_dataset(path)?;
        let err = holdout_error(&result, &h, &cfg.creep)?;
        println!("holdout {}: error = {err:.6e}", path.display());
        holdout.push(serde_json::json!({ "data": path.display().to_string(), "error": err }));
    }

    if let Some(path) = &args.out {
        let mut value = serde_json::to_value(&result)
            .context("serializing fit result")
            .map_err(|e| Failure {
                code: NUMERICAL,
                error: e,
            })?;
        value["data"] = args.data.display().to_string().into();
        if !holdout.is_empty() {
            value["holdout"] = holdout.into();
        }
        dataio::write_json(&value, path)?;
    }
    Ok(())
}

fn write_trajectory(traj: &Trajectory, out: Option<&PathBuf>) -> Outcome {
    let last = traj.final_sample().ok_or_else(|| Failure {
        code: NUMERICAL,
        error: anyhow!("empty trajectory"),
    })?;
    println!(
        "t_end = {:.6e} s: eps_axial = {:.6e}, T11 = {:.6e} Pa, xi_m = {:.6e} W/m^3",
        last.t, last.eps_axial, last.axial_stress, last.xi_m
    );
    println!(
        "max |det B_p - 1| = {:.3e}, max identity residual = {:.3e}, min xi_m = {:.3e}",
        traj.max_det_drift(),
        traj.max_identity_residual(),
        traj.min_dissipation()
    );
    if let Some(path) = out {
        let mut w = create(path)?;
        traj.write_csv(&mut w).map_err(|e| Failure {
            code: DATA,
            error: anyhow::Error::new(e).context(format!("writing {}", path.display())),
        })?;
        w.flush().map_err(io_failure(path))?;
    }
    Ok(())
}

fn drive_options(rtol: f64) -> DriveOptions {
    DriveOptions::default().with_rtol(rtol)
}

fn run_drive(args: &DriveArgs) -> Outcome {
    let Resolved { mp, .. } = resolve_params(&args.params)?;
    let span = (0.0, args.duration);
    let protocol = match (args.strain_rate, args.shear_rate) {
        (Some(r), None) => MotionProtocol::constant_strain_rate(r, span),
        (None, Some(g)) => MotionProtocol::simple_shear(move |t| (g * t, g), span),
        _ => {
            return Err(Failure::usage(
                "give exactly one of --strain-rate, --shear-rate",
            ))
        }
    };
    let opts = DriveOptions {
        project_unimodular: args.project,
        ..drive_options(args.rtol)
    };
    let traj = drive(&protocol, &mp, EvolutionState::rest(), &opts)?;
    write_trajectory(&traj, args.out.as_ref())
}

fn run_relax(args: &RelaxArgs) -> Outcome {
    let Resolved { mp, .. } = resolve_params(&args.params)?;
    let hold = default_duration(&mp, args.hold, "--hold")?;
    let traj = relax(args.stretch, &mp, hold, &drive_options(args.rtol))?;
    println!("T11(0+) = {:.6e} Pa", traj.samples[0].axial_stress);
    write_trajectory(&traj, args.out.as_ref())
}

fn run_validate(args: &ValidateArgs, execution: Execution) -> Outcome {
    let cfg = SuiteConfig {
        quick: args.quick,
        execution,
        ..SuiteConfig::default()
    };
    let results = run_suite(&cfg);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<_> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(Failure {
            code: VALIDATION,
            error: anyhow!("failed checks: {}", failed.join(", ")),
        })
    }
}

fn run(cli: Cli) -> Outcome {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a, execution),
        Command::Drive(a) => run_drive(a),
        Command::Relax(a) => run_relax(a),
        Command::Presets => {
            print!("{}", presets().render());
            Ok(())
        }
        Command::Validate(a) => run_validate(a, execution),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
