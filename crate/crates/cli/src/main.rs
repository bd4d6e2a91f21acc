use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qce_cli::config::{ExperimentConfig, Model, RunType};
use qce_cli::presets::{preset, PRESET_NAMES};
use qce_cli::{run, CliError, CliResult};

#[derive(Parser)]
#[command(name = "qce", version, about = "Entanglement dynamics of a lattice atom and the quantum kicked top")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file, optionally overridden by flags.
    Run(RunArgs),
    /// Run a named preset.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List preset names.
    ListPresets,
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    #[arg(long = "type", value_parser = parse_run_type)]
    run_type: Option<RunType>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    p_rot: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    v1: Option<f64>,
    #[arg(long)]
    theta_l_deg: Option<f64>,
    #[arg(long)]
    mu_b_bx: Option<f64>,
    #[arg(long)]
    spin_scale: Option<String>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown model `{s}` (amol, qkt)"))
}

fn parse_run_type(s: &str) -> Result<RunType, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown run type `{s}` (spectrum, entropy, classical_section, lyapunov, analyze)"))
}

fn build_config(a: RunArgs) -> CliResult<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(
            a.model.ok_or_else(|| CliError::Config("--model is required without --config".into()))?,
            a.run_type.ok_or_else(|| CliError::Config("--type is required without --config".into()))?,
        ),
    };
    if let Some(m) = a.model {
        c.model = m;
    }
    if let Some(t) = a.run_type {
        c.run_type = t;
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {$(
            if let Some(v) = a.$flag { c.$($field).+ = v.into(); }
        )*};
    }
    set!(kappa => qkt.kappa, p_rot => qkt.p_rot, tau => qkt.tau, j => qkt.j,
         v1 => amol.v1, theta_l_deg => amol.theta_l_deg, mu_b_bx => amol.mu_b_bx, spin_scale => amol.spin_scale,
         n_points => grid.n_points, t_end => time.t_end, dt => time.dt, out => output_dir);
    if a.z0.is_some() || a.p0.is_some() || a.theta.is_some() || a.phi.is_some() {
        let mut s = c.resolved_states().into_iter().next().expect("a default state");
        s.fixed_point = None;
        s.label = "cli".into();
        s.z0 = a.z0.unwrap_or(s.z0);
        s.p0 = a.p0.unwrap_or(s.p0);
        s.theta = a.theta.unwrap_or(s.theta);
        s.phi = a.phi.unwrap_or(s.phi);
        c.states = vec![s];
    }
    Ok(c)
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run(args) => report(run(&build_config(args)?)?),
        Command::Preset { name, out } => {
            let mut c = preset(&name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
            c.output_dir = out.unwrap_or_else(|| PathBuf::from(&name));
            report(run(&c)?)
        }
        Command::ListPresets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let c = ExperimentConfig::load(&config)?;
            c.validate()?;
            println!("{}", c.hash());
            Ok(())
        }
    }
}

fn report(manifest: qce_cli::RunManifest) -> CliResult<()> {
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    for f in &manifest.outputs {
        println!("{f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = std::env::var("QCE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("QCE_THREADS ignored: {e}");
        }
    }
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
