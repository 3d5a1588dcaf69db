mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use commands::Ctx;
use config::*;
use output::{Output, OUTPUT_ENV};

/// Kink–antikink interaction toolkit.
#[derive(Parser, Debug)]
#[command(name = "kinklab", version, about)]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $KINKLAB_OUTPUT/<command>, else ./kinklab-out/<command>].
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Builtin model name (sine_gordon, phi4).
    #[arg(long, global = true)]
    model: Option<String>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Tail and energy constants of the model's kink as JSON.
    Constants,
    /// Kink profile and its derivatives as CSV.
    Profile(ProfileArgs),
    /// Interaction force against its asymptote as CSV.
    Force(ForceArgs),
    /// Discrete spectrum of the linearized operator as JSON.
    Spectrum(SpectrumArgs),
    /// Field evolution: energy series and snapshots as CSV.
    Evolve(EvolveArgs),
    /// Evolution with modulation tracking of both kinks.
    Modulate(EvolveArgs),
    /// Reduced separation ODE z'' = -2F(z) + v.
    ReducedOde(ReducedArgs),
    /// Log-law fit of a trajectory CSV.
    Fit(FitArgs),
    /// Closed-form sine-Gordon verification report.
    VerifySg(VerifyArgs),
    /// Runs the command named in the config file.
    Run,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    /// Sample the physical instead of the normalized kink.
    #[arg(long)]
    physical: bool,
}

#[derive(Args, Debug)]
struct ForceArgs {
    #[arg(long)]
    zmin: Option<f64>,
    #[arg(long)]
    zmax: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    dx: Option<f64>,
    /// Interval as two numbers: --domain -40 40.
    #[arg(long, num_args = 2, allow_hyphen_values = true)]
    domain: Option<Vec<f64>>,
    #[arg(long)]
    stencil: Option<u8>,
    #[arg(long)]
    k: Option<usize>,
    /// Pair background with kinks at ±z/2 instead of a single kink.
    #[arg(long)]
    pair_separation: Option<f64>,
    #[arg(long)]
    coercivity_trials: Option<usize>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    stencil: Option<u8>,
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct ReducedArgs {
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dz0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Trajectory CSV with a `t` column.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    curvature: Option<f64>,
    #[arg(long, num_args = 2, allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

fn pair(v: Vec<f64>) -> (f64, f64) {
    (v[0], v[1])
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_evolve(p: &mut EvolveParams, a: &EvolveArgs) {
    set(&mut p.grid.dx, a.dx);
    if a.dt.is_some() {
        p.dt = a.dt;
    }
    set(&mut p.t_end, a.t_end);
    set(&mut p.stencil, a.stencil);
    set(&mut p.stride, a.stride);
}

/// Loads the config, applies flag overrides, validates, dispatches and
/// writes the manifest.
fn execute(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let command = match (&cli.command, cfg.command) {
        (Cmd::Run, Some(c)) => c,
        (Cmd::Run, None) => return Err(invalid("`run` needs a config file with a `command` field")),
        (cmd, from_file) => {
            let c = command_of(cmd);
            if let Some(f) = from_file {
                if f != c {
                    return Err(invalid(format!("config is for `{}`, not `{}`", f.name(), c.name())));
                }
            }
            c
        }
    };
    let explicit_model = cli.model.is_some() || cfg.model.is_some();
    let spec = match &cli.model {
        Some(name) => ModelSpec::Builtin(name.clone()),
        None => cfg.model.clone().unwrap_or_default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(42);
    let threads = cli.threads.or(cfg.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(invalid("threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let dir = cli.output.clone().or(cfg.output_dir.clone()).unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("kinklab-out"), PathBuf::from);
        root.join(command.name())
    });
    let args = if matches!(cli.command, Cmd::Run) { None } else { Some(&cli.command) };

    // resolve parameters before any work so bad input exits early
    let params = resolve(command, &cfg, args)?;
    let echo = RunConfig {
        command: Some(command),
        model: Some(spec.clone()),
        output_dir: None,
        seed: Some(seed),
        threads,
        params: Some(params.to_value()?),
    };

    let ctx = Ctx::new(spec, seed);
    if command != Command::Fit || explicit_model {
        ctx.model()?;
    }
    let mut out = Output::create(dir)?;
    let start = Instant::now();
    let result = match &params {
        Params::Constants => commands::constants(&ctx, &mut out).map(|v| (v, true)),
        Params::Profile(p) => commands::profile(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Force(p) => commands::force_table(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Spectrum(p) => commands::spectrum(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Evolve(p) => commands::evolve(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Modulate(p) => commands::modulate(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Reduced(p) => commands::reduced_ode(&ctx, p, &mut out).map(|v| (v, true)),
        Params::Fit(p) => commands::fit(&ctx, p, explicit_model, &mut out).map(|v| (v, true)),
        Params::Verify(p) => commands::verify_sg(&ctx, p, &mut out),
    };
    let status = match &result {
        Ok((_, true)) => "ok".to_string(),
        Ok((_, false)) => "failed checks".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let dir = out.finish(&serde_json::to_value(&echo)?, start.elapsed(), &status)?;
    let (report, pass) = result?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("wrote {}", dir.display());
    Ok(pass)
}

fn command_of(cmd: &Cmd) -> Command {
    match cmd {
        Cmd::Constants => Command::Constants,
        Cmd::Profile(_) => Command::Profile,
        Cmd::Force(_) => Command::Force,
        Cmd::Spectrum(_) => Command::Spectrum,
        Cmd::Evolve(_) => Command::Evolve,
        Cmd::Modulate(_) => Command::Modulate,
        Cmd::ReducedOde(_) => Command::ReducedOde,
        Cmd::Fit(_) => Command::Fit,
        Cmd::VerifySg(_) => Command::VerifySg,
        Cmd::Run => unreachable!("resolved from the config"),
    }
}

enum Params {
    Constants,
    Profile(ProfileParams),
    Force(ForceParams),
    Spectrum(SpectrumParams),
    Evolve(EvolveParams),
    Modulate(ModulateParams),
    Reduced(ReducedParams),
    Fit(FitParams),
    Verify(VerifyParams),
}

impl Params {
    fn to_value(&self) -> Result<Value> {
        fn v<T: Serialize>(t: &T) -> Result<Value> {
            Ok(serde_json::to_value(t)?)
        }
        match self {
            Params::Constants => v(&NoParams {}),
            Params::Profile(p) => v(p),
            Params::Force(p) => v(p),
            Params::Spectrum(p) => v(p),
            Params::Evolve(p) => v(p),
            Params::Modulate(p) => v(p),
            Params::Reduced(p) => v(p),
            Params::Fit(p) => v(p),
            Params::Verify(p) => v(p),
        }
    }
}

fn resolve(command: Command, cfg: &RunConfig, args: Option<&Cmd>) -> Result<Params> {
    Ok(match command {
        Command::Constants => {
            cfg.params::<NoParams>()?;
            Params::Constants
        }
        Command::Profile => {
            let mut p: ProfileParams = cfg.params()?;
            if let Some(Cmd::Profile(a)) = args {
                set(&mut p.x_min, a.x_min);
                set(&mut p.x_max, a.x_max);
                set(&mut p.dx, a.dx);
                if a.physical {
                    p.units = Units::Physical;
                }
            }
            p.validate()?;
            Params::Profile(p)
        }
        Command::Force => {
            let mut p: ForceParams = cfg.params()?;
            if let Some(Cmd::Force(a)) = args {
                set(&mut p.z_min, a.zmin);
                set(&mut p.z_max, a.zmax);
                set(&mut p.nodes, a.nodes);
            }
            p.validate()?;
            Params::Force(p)
        }
        Command::Spectrum => {
            let mut p: SpectrumParams = cfg.params()?;
            if let Some(Cmd::Spectrum(a)) = args {
                set(&mut p.dx, a.dx);
                set(&mut p.domain, a.domain.clone().map(pair));
                set(&mut p.stencil, a.stencil);
                set(&mut p.k, a.k);
                if let Some(z) = a.pair_separation {
                    p.background = BackgroundSpec::Pair { x1: -0.5 * z, x2: 0.5 * z };
                }
                set(&mut p.coercivity_trials, a.coercivity_trials);
            }
            p.validate()?;
            Params::Spectrum(p)
        }
        Command::Evolve => {
            let mut p: EvolveParams = cfg.params()?;
            if let Some(Cmd::Evolve(a)) = args {
                apply_evolve(&mut p, a);
            }
            p.validate()?;
            Params::Evolve(p)
        }
        Command::Modulate => {
            let mut p: ModulateParams = cfg.params()?;
            if let Some(Cmd::Modulate(a)) = args {
                apply_evolve(&mut p.evolve, a);
            }
            p.validate()?;
            Params::Modulate(p)
        }
        Command::ReducedOde => {
            let mut p: ReducedParams = cfg.params()?;
            if let Some(Cmd::ReducedOde(a)) = args {
                set(&mut p.z0, a.z0);
                if a.dz0.is_some() {
                    p.dz0 = a.dz0;
                }
                set(&mut p.t_end, a.t_end);
                set(&mut p.dt, a.dt);
            }
            p.validate()?;
            Params::Reduced(p)
        }
        Command::Fit => {
            let mut p: FitParams = cfg.params()?;
            if let Some(Cmd::Fit(a)) = args {
                if a.input.is_some() {
                    p.input = a.input.clone();
                }
                set(&mut p.column, a.column.clone());
                if a.curvature.is_some() {
                    p.curvature = a.curvature;
                }
                if let Some(w) = &a.window {
                    p.window = Some(pair(w.clone()));
                }
            }
            p.validate()?;
            Params::Fit(p)
        }
        Command::VerifySg => {
            let mut p: VerifyParams = cfg.params()?;
            if let Some(Cmd::VerifySg(a)) = args {
                set(&mut p.dx, a.dx);
                set(&mut p.dt, a.dt);
            }
            p.validate()?;
            Params::Verify(p)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("kinklab: verification failed");
            ExitCode::FAILURE
        }
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("kinklab: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("kinklab: {e:#}");
            ExitCode::FAILURE
        }
    }
}
