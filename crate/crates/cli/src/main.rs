//! `kpo`: run configured KPO simulations and write their outputs.

mod config;
mod error;
mod output;
mod runner;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Experiment, ModelSource, Overrides, RunConfig, WignerSource};
use error::CliError;
use output::Meta;

#[derive(Parser, Debug)]
#[command(name = "kpo", version, about = "Three-photon Kerr parametric oscillator simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; a numeric suffix is appended if it exists.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces numerics.dim.
    #[arg(long)]
    dim_override: Option<usize>,
    /// Root for output directories not given explicitly.
    #[arg(long, env = "KPO_OUTPUT_ROOT", default_value = "runs")]
    output_root: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StateArg {
    Prepared,
    Steady,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment named in the config.
    Run(Common),
    /// Validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dim_override: Option<usize>,
    },
    /// Quasienergy spectrum of the configured model.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Number of levels written, from the top of the spectrum.
        #[arg(long, default_value_t = 12)]
        levels: usize,
    },
    /// Wigner function of the prepared or steady state.
    Wigner {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "prepared")]
        state: StateArg,
        /// Half-width of the square grid.
        #[arg(long, default_value_t = 3.0)]
        extent: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
    /// Steady state of the configured master equation.
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3.0)]
        extent: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { config, dim_override } => {
            let cfg = config::load(&config, &Overrides { dim: dim_override, experiment: None })?;
            print!("{}", report(&cfg).render());
            println!("ok");
            Ok(())
        }
        Command::Run(common) => run(&common, None),
        Command::Spectrum { common, levels } => run(&common, Some(Experiment::Spectrum { levels })),
        Command::Wigner { common, state, extent, points } => {
            let source = match state {
                StateArg::Prepared => WignerSource::Prepared,
                StateArg::Steady => WignerSource::Steady,
            };
            run(&common, Some(Experiment::Wigner { source, extent, points, noise: 0.0, window: None }))
        }
        Command::Steady { common, extent, points } => {
            run(&common, Some(Experiment::Wigner { source: WignerSource::Steady, extent, points, noise: 0.0, window: None }))
        }
    }
}

fn run(common: &Common, experiment: Option<Experiment>) -> Result<(), CliError> {
    let cfg = config::load(&common.config, &Overrides { dim: common.dim_override, experiment })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} workers: {e}", common.workers)))?;
    let base = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| if d.is_absolute() { d.clone() } else { common.output_root.join(d) }))
        .unwrap_or_else(|| common.output_root.join(cfg.experiment.name()));
    let dir = output::create_run_dir(&base)?;
    output::write(&dir, "config.snapshot", &snapshot(&cfg, common))?;

    let start = Instant::now();
    let results = pool.install(|| runner::execute(&cfg, &dir))?;
    let mut meta = report(&cfg);
    meta.push("workers", pool.current_num_threads());
    meta.push("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    for (k, v) in results.entries() {
        meta.push(k, v);
    }
    output::write(&dir, "meta.txt", &meta.render())?;
    println!("{}", dir.display());
    Ok(())
}

fn snapshot(cfg: &RunConfig, common: &Common) -> String {
    let mut text = cfg.text.clone();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if let Some(d) = common.dim_override {
        text.push_str(&format!("# --dim-override {d}\n"));
    }
    text.push_str(&format!("# experiment run: {}\n", cfg.experiment.name()));
    text
}

/// Resolved configuration in SI units (angular frequencies in rad/s).
fn report(cfg: &RunConfig) -> Meta {
    let mut m = Meta::default();
    m.push("code_version", env!("KPO_GIT_DESCRIBE"));
    m.push("experiment", cfg.experiment.name());
    let p = &cfg.params;
    m.push("kerr_rad_s", p.kerr);
    m.push("delta_rad_s", p.delta);
    m.push("pump_rad_s", p.pump);
    m.push("delta_over_k", p.delta_over_k());
    m.push("pump_over_k", p.pump_over_k());
    m.push("eta", p.eta);
    let s = &cfg.schedule;
    m.push("ramp_s", s.tau_ramp);
    m.push("hold_s", s.tau_hold);
    m.push("cd_fraction", s.cd_fraction);
    m.push("ramp_shape", format!("{:?}", s.ramp_shape).to_lowercase());
    m.push("t1_s", cfg.dissipation.t1);
    m.push("n_th", cfg.dissipation.n_th);
    m.push("t_phi_s", cfg.dissipation.t_phi.map_or("none".to_string(), |t| t.to_string()));
    m.push("dim", cfg.numerics.dim);
    m.push("dt_max_s", cfg.numerics.dt_max);
    m.push("rtol", cfg.numerics.rtol);
    m.push("atol", cfg.numerics.atol);
    m.push("tail_limit", kpo_core::fock::TAIL_LIMIT);
    m.push("seed", cfg.seed);
    if let ModelSource::Circuit { circuit, derived } = &cfg.source {
        m.push("circuit_cs_f", circuit.cs);
        m.push("circuit_ej1a_hz", circuit.ej1a);
        m.push("circuit_ej1b_hz", circuit.ej1b);
        m.push("circuit_ej2_hz", circuit.ej2);
        m.push("circuit_ra", circuit.ra);
        m.push("circuit_rb", circuit.rb);
        for (k, v) in [
            ("ec_hz", derived.ec),
            ("ek_hz", derived.ek),
            ("xi", derived.xi),
            ("omega_k0_hz", derived.omega_k0),
            ("omega_k_hz", derived.omega_k),
            ("kerr_hz", derived.kerr),
            ("pump_rate_hz", derived.pump_rate),
            ("eta", derived.eta),
            ("zpf_n", derived.zpf_n),
            ("zpf_phi", derived.zpf_phi),
            ("lambda_ac", derived.lambda_ac),
            ("pump_hz", derived.pump),
            ("ej1_hz", derived.ej1),
            ("ej1_linear_hz", derived.ej1_linear),
        ] {
            m.push(&format!("derived_{k}"), v);
        }
    }
    m
}
