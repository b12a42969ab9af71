use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qdenoise_cli::config::{ExperimentConfig, Overrides, OUTPUT_DIR_ENV};
use qdenoise_cli::validate::{self, Fault};
use qdenoise_cli::{experiments, oracle, table};

#[derive(Parser)]
#[command(name = "qdenoise", version, about = "Qudit autoencoder denoising experiments")]
struct Cli {
    /// Worker threads for grid points and optimizer restarts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write <output>.csv and <output>.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Output stem, overriding the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Directory for relative output stems.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Run the invariant suite and print a pass/fail table.
    Validate {
        /// Inject a defect to exercise the failure path.
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Evaluate a closed-form formula: `oracle subspace-avg n=4 k=2 p=0.3 c=0.5`.
    Oracle {
        #[arg(required_unless_present = "list")]
        formula: Option<String>,
        params: Vec<String>,
        /// List formulas and their parameters.
        #[arg(long)]
        list: bool,
    },
    /// Train the denoiser for one grid point of a config and write it as JSON.
    ExportDenoiser {
        path: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Grid index.
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the encoder and decoder MZI-mesh settings here.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FaultArg {
    Completeness,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Run { config, seed, samples, output, output_dir } => {
            let ov = Overrides { seed, samples, output, output_dir };
            let cfg = ExperimentConfig::load(&config)?.resolve(&ov)?;
            let result = experiments::run(&cfg)?;
            table::write_outputs(&cfg, &result)?;
            println!(
                "wrote {} rows to {}",
                result.rows.len(),
                cfg.csv_path().context("no output path")?.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { inject_fault } => {
            let fault = inject_fault.map(|FaultArg::Completeness| Fault::BrokenCompleteness);
            let results = validate::run_checks(fault);
            print!("{}", validate::report(&results));
            let ok = results.iter().all(|r| r.passed);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Oracle { formula, params, list } => {
            if list {
                for (name, args) in oracle::FORMULAS {
                    println!("{name:<24} {args}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let formula = formula.context("formula required")?;
            let v = oracle::evaluate(&formula, &oracle::parse_params(&params)?)?;
            match v.in_regime {
                None => println!("{:.16e}", v.value),
                Some(r) => println!("{:.16e} in_regime={r}", v.value),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportDenoiser { path, config, point, seed, mesh } => {
            let ov = Overrides { seed, ..Default::default() };
            let cfg = ExperimentConfig::load(&config)?.resolve(&ov)?;
            let d = experiments::denoiser_at(&cfg, point)?;
            std::fs::write(&path, d.to_json()?)
                .with_context(|| format!("writing {}", path.display()))?;
            if let Some(mesh_path) = mesh {
                let doc = serde_json::json!({
                    "encoder": qdenoise::mesh::mesh_from_unitary(d.encoder())?,
                    "decoder": qdenoise::mesh::mesh_from_unitary(d.decoder())?,
                });
                std::fs::write(&mesh_path, serde_json::to_string_pretty(&doc)?)
                    .with_context(|| format!("writing {}", mesh_path.display()))?;
            }
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
