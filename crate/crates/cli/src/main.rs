use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use squid_qkd::report::{
    run_contour, run_figures, run_protocol_experiment, run_sweep, run_validate, ConfigError,
    ExperimentConfig, FigureId, ReportError,
};

#[derive(Parser)]
#[command(name = "squid-qkd", version, about = "Coherent-state QKD on dc-SQUID storage: simulation and plot data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulate every round in the Fock basis, even at revival times.
    #[arg(long, global = true)]
    full_numeric: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Plot data for one figure, or all of them.
    Figures {
        #[arg(long)]
        id: Option<FigureId>,
    },
    /// Simulate the protocol and distil a key.
    RunProtocol,
    /// Security margin against channel transmittance.
    SweepEta,
    /// Cat-state squeezing surfaces and level sets.
    Contour,
    /// Analytic-versus-numeric self-checks.
    Validate,
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.engine.full_numeric |= common.full_numeric;
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), ReportError> {
    let config = load(&cli.common)?;
    let dir = config.output_dir.clone();
    match &cli.command {
        Command::Figures { id } => {
            for path in run_figures(&config, *id, &dir)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Contour => {
            for path in run_contour(&config, &dir)? {
                println!("wrote {}", path.display());
            }
        }
        Command::SweepEta => {
            let (result, path) = run_sweep(&config, &dir)?;
            println!("{:>8} {:>10} {:>10} {:>10} {:>10}  secure", "eta", "chi", "i_ab", "i_ae", "delta_i");
            let stride = (result.rows.len() / 10).max(1);
            for row in result.rows.iter().step_by(stride) {
                println!(
                    "{:>8.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}  {}",
                    row.eta, row.chi, row.i_ab, row.i_ae, row.delta_i, row.secure
                );
            }
            match result.crossing {
                Some(eta) => println!("delta_i changes sign at eta = {eta:.6}"),
                None => println!("delta_i keeps its sign on the grid"),
            }
            println!("wrote {}", path.display());
        }
        Command::RunProtocol => {
            let r = run_protocol_experiment(&config, &dir)?;
            println!("rounds          {}", r.n_rounds);
            println!("c_ab            {:.4} ± {:.4}", r.noise.c_ab, r.noise.c_ab_std_error);
            println!("chi (upper)     {:.4} ({:.4})", r.noise.chi, r.noise.chi_upper);
            println!("i_ab            {:.4}", r.i_ab);
            println!("i_ae bound      {:.4}", r.i_ae);
            println!("delta_i         {:.4}", r.delta_i);
            println!("secure          {}", r.secure);
            println!("kept rounds     {}", r.kept_rounds);
            println!("leaked bits     {}", r.leaked_bits);
            println!("final key bits  {}", r.final_key_bits);
            println!("net rate        {:.4}", r.net_rate);
            println!("wrote {}", dir.join("trials.csv").display());
            println!("wrote {}", dir.join("report.json").display());
        }
        Command::Validate => {
            let checks = match run_validate(&config, &dir) {
                Ok(checks) => checks,
                Err(e) => {
                    eprintln!("see {}", dir.join("validation.json").display());
                    return Err(e);
                }
            };
            for c in checks {
                println!("PASS  {:<50} {}", c.name, c.detail);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
