use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use hypdyn::experiments::{list_experiments, parse_assignments, run, ExperimentConfig, OUTPUT_DIR_ENV};
use hypdyn::systems::SystemDescriptor;
use hypdyn::{Error, Result};

#[derive(Parser)]
#[command(name = "hypdyn", version, about = "Numerical experiments on hyperbolic model systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dini test and ω̃ transforms of a modulus (`-p modulus={"kind":"log_power","params":{"beta":2},"t_max":0.5}`)
    AuditModulus(Common),
    /// Hyperbolic splitting at a point
    Splitting(Common),
    /// Randomized check of one of the Grassmannian lemmas
    VerifyLemma {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        lemma: u8,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer-operator eigen-data on a subshift of finite type
    Rpf(Common),
    /// Topological pressure from separated sets
    Pressure(Common),
    /// Attractor verdict from the pressure of the geometric potential
    Attractor(Common),
    /// Bowen-ball volumes against the unstable Jacobian
    Volume(Common),
    /// Birkhoff averages from random initial points
    Basin(Common),
    /// Gibbs integral against time averages on the coded baker map
    GibbsVsBirkhoff(Common),
    /// Build the C¹ horseshoe with a positive-measure invariant Cantor set
    Horseshoe(Common),
    /// Certificate that the modulus of g′ is not Dini summable
    DiniCert(Common),
    /// Fit of the constants in the main inequality along stable leaves
    MainInequality(Common),
    /// Run a JSON config, e.g. a manifest written by an earlier run
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        deterministic: bool,
    },
    /// List the available experiments
    List {
        /// Print the catalog as JSON
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Common {
    /// System name, or a JSON descriptor such as '{"name":"baker","params":{"p":0.3}}'
    #[arg(long)]
    system: Option<String>,
    /// System parameter `key=value`, repeatable
    #[arg(long = "system-param", value_name = "KEY=VALUE")]
    system_params: Vec<String>,
    /// Experiment parameter `key=value` with a JSON or plain-string value, repeatable
    #[arg(long = "param", short = 'p', value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to `hypdyn-output/<experiment>`
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Single-threaded, fixed summation order
    #[arg(long)]
    deterministic: bool,
}

impl Common {
    fn config(self, experiment: &str) -> Result<ExperimentConfig> {
        let system = match self.system {
            None if self.system_params.is_empty() => None,
            None => return Err(Error::Config("--system-param needs --system".into())),
            Some(s) => {
                let mut d = if s.trim_start().starts_with('{') {
                    serde_json::from_str::<SystemDescriptor>(&s).map_err(|e| Error::Config(format!("--system: {e}")))?
                } else {
                    SystemDescriptor::named(&s)
                };
                d.params.extend(parse_assignments(&self.system_params)?);
                Some(d)
            }
        };
        let mut cfg = ExperimentConfig::new(experiment).with_seed(self.seed).deterministic(self.deterministic);
        cfg.system = system;
        cfg.parameters = parse_assignments(&self.params)?;
        cfg.output_dir = Some(self.out.unwrap_or_else(|| default_out(experiment)));
        Ok(cfg)
    }
}

fn default_out(experiment: &str) -> PathBuf {
    PathBuf::from("hypdyn-output").join(experiment)
}

fn execute(command: Command) -> Result<Option<Value>> {
    let config = match command {
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(list_experiments())?);
            } else {
                for e in list_experiments() {
                    println!("{:<20} {}", e.name, e.description);
                    println!("{:<20} exercises: {}", "", e.exercises);
                    if !e.required.is_empty() {
                        println!("{:<20} required: {}", "", e.required.join(", "));
                    }
                    println!("{:<20} parameters: {}", "", e.parameters.join(", "));
                }
            }
            return Ok(None);
        }
        Command::Run { config, out, deterministic } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(out) = out {
                cfg.output_dir = Some(out);
            }
            if cfg.output_dir.is_none() {
                cfg.output_dir = Some(default_out(&cfg.experiment));
            }
            cfg.deterministic |= deterministic;
            cfg
        }
        Command::VerifyLemma { lemma, common } => {
            let mut cfg = common.config("lemma-verify")?;
            cfg.parameters.insert("lemma".into(), lemma.into());
            cfg
        }
        Command::AuditModulus(c) => c.config("modulus-audit")?,
        Command::Splitting(c) => c.config("splitting")?,
        Command::Rpf(c) => c.config("rpf")?,
        Command::Pressure(c) => c.config("pressure")?,
        Command::Attractor(c) => c.config("attractor-criterion")?,
        Command::Volume(c) => c.config("volume-lemma")?,
        Command::Basin(c) => c.config("basin")?,
        Command::GibbsVsBirkhoff(c) => c.config("gibbs-vs-birkhoff")?,
        Command::Horseshoe(c) => c.config("horseshoe-build")?,
        Command::DiniCert(c) => c.config("dini-certificate")?,
        Command::MainInequality(c) => c.config("main-inequality")?,
    };
    let report = run(&config)?;
    if let Some(dir) = &report.output_dir {
        eprintln!("wrote {} ({:.3} s)", dir.display(), report.wall_time);
    }
    Ok(Some(report.summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(summary) => {
            if let Some(s) = summary {
                // A closed pipe (e.g. `| head`) is not an error for the run.
                let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
