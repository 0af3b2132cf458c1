//! Command line front end. Four verbs:
//!   train            run the configured experiment over all seeds
//!   eval             re-score a finished run's checkpoints, optionally
//!                    under a different noise preset
//!   table            summarize finished runs (model comparison or noise
//!                    mitigation)
//!   inspect-dataset  describe a dataset, optionally exporting it as TU
//!                    text files
//!
//! Settings resolve in order: built-in defaults, the QUANGCN_DATA_ROOT
//! environment variable (data root only), --config file keys, then explicit
//! flags. Exit codes: 0 success, 1 bad usage or configuration, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quangcn::error::Error;
use quangcn::experiment::{
    cmd_eval, cmd_table, cmd_train, describe_dataset, resolve_dataset, RunConfig, TableKind,
};

#[derive(Parser)]
#[command(
    name = "quangcn",
    version,
    about = "Train and evaluate hybrid quantum-classical graph classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by verbs that assemble a run configuration. Every flag
/// mirrors a config-file key; flags win over file keys.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// Key=value config file applied before any flags
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Data root directory holding TU dataset subdirectories
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Dataset name (subdirectory of the data root, or SYNTH)
    #[arg(long, value_name = "NAME")]
    name: Option<String>,
    /// Model family: mlp, sgc, gcn, quanmlp, quansgc, quangcn
    #[arg(long, value_name = "NAME")]
    model: Option<String>,
    /// Qubit count (quantum models)
    #[arg(long, value_name = "N")]
    qubits: Option<usize>,
    /// Trainable-layer count (quantum models)
    #[arg(long, value_name = "N")]
    layers: Option<usize>,
    /// Hidden width of the classical encoders
    #[arg(long, value_name = "N")]
    hidden: Option<usize>,
    /// Concatenate noise-immune classical features with the measurements
    #[arg(long, value_name = "BOOL")]
    skip: Option<String>,
    /// Entropy penalty weight on the pooled edge distribution (quangcn)
    #[arg(long, value_name = "F")]
    sparse_lambda: Option<String>,
    /// Edge-probability threshold below which crossing gates are elided
    #[arg(long, value_name = "F")]
    mask_threshold: Option<String>,
    /// Measurement noise: none, default, or p1q,p2q,readout,trajectories
    #[arg(long, value_name = "SPEC")]
    noise: Option<String>,
    /// Stream seed for noise trajectories
    #[arg(long, value_name = "N")]
    noise_seed: Option<u64>,
    /// Train with random fixed-rotation gates injected into the circuit
    #[arg(long, value_name = "BOOL")]
    inject: Option<String>,
    /// Per-slot probability of injecting a rotation
    #[arg(long, value_name = "F")]
    inject_prob: Option<String>,
    /// Angle half-width of injected rotations
    #[arg(long, value_name = "F")]
    inject_spread: Option<String>,
    /// Training epochs per seed
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Adam learning rate
    #[arg(long, value_name = "F")]
    lr: Option<String>,
    /// Seeds: comma list (0,1,2) or inclusive range (0..9)
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,
}

impl ConfigFlags {
    fn build(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::default_with_env();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = &self.dataset {
            cfg.data_root = v.clone();
        }
        if let Some(v) = &self.name {
            cfg.apply("dataset", v)?;
        }
        let mut flag = |key: &str, value: &Option<String>| -> Result<(), Error> {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
            Ok(())
        };
        flag("model", &self.model)?;
        flag("skip", &self.skip)?;
        flag("sparse_lambda", &self.sparse_lambda)?;
        flag("mask_threshold", &self.mask_threshold)?;
        flag("noise", &self.noise)?;
        flag("inject", &self.inject)?;
        flag("inject_prob", &self.inject_prob)?;
        flag("inject_spread", &self.inject_spread)?;
        flag("lr", &self.lr)?;
        flag("seeds", &self.seeds)?;
        if let Some(v) = self.qubits {
            cfg.qubits = v;
        }
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.noise_seed {
            cfg.noise_seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model over all seeds and write a run directory
    Train {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Output directory for result.txt, seeds.csv, and checkpoints
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overwrite an existing result in the output directory
        #[arg(long)]
        force: bool,
        /// Train seeds concurrently (results identical to sequential)
        #[arg(long)]
        parallel_seeds: bool,
    },
    /// Re-score a finished run's checkpoints against its dataset
    Eval {
        /// Run directory written by train
        #[arg(value_name = "RUN_DIR")]
        run: PathBuf,
        /// Override the run's noise preset: none, default, or
        /// p1q,p2q,readout,trajectories
        #[arg(long, value_name = "SPEC")]
        noise: Option<String>,
    },
    /// Summarize finished runs found under a results root
    Table {
        /// Which table: models (one row per family) or mitigation
        /// (quangcn robustness variants)
        #[arg(value_name = "KIND")]
        kind: String,
        /// Directory whose subdirectories are finished runs
        #[arg(value_name = "RESULTS_ROOT")]
        results_root: PathBuf,
        /// Also write the table as CSV into this directory
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
    },
    /// Describe a dataset; optionally export it as TU text files
    InspectDataset {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Write the dataset as TU text files into DIR/<name>
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            flags,
            out,
            force,
            parallel_seeds,
        } => {
            let cfg = flags.build()?;
            cmd_train(&cfg, &out, force, parallel_seeds)
        }
        Command::Eval { run, noise } => {
            let report = cmd_eval(&run, noise.as_deref())?;
            print!("{report}");
            Ok(())
        }
        Command::Table {
            kind,
            results_root,
            csv_dir,
        } => {
            let kind = TableKind::parse(&kind)?;
            let text = cmd_table(kind, &results_root, csv_dir.as_deref())?;
            print!("{text}");
            Ok(())
        }
        Command::InspectDataset { flags, export } => {
            let cfg = flags.build()?;
            let (dataset, source) = resolve_dataset(&cfg.data_root, &cfg.dataset)?;
            print!("{}", describe_dataset(&dataset, &source));
            if let Some(root) = export {
                let dir = root.join(&dataset.name);
                std::fs::create_dir_all(&dir)
                    .map_err(|e| Error::io(dir.display().to_string(), e))?;
                quangcn::data::tu::serialize_tu_dataset(&dataset, &dir)?;
                println!("exported TU files to {}", dir.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Exit contract: 0 success (including --help/--version), 1 usage or
    // configuration error, 2 runtime failure. Clap defaults to 2 for bad
    // invocations, so its errors are remapped here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_usage() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
