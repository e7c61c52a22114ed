use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fnde_core::extraction::{extract_density, extract_hamiltonian, self_consistency};
use fnde_core::theory::generate_dataset;
use fnde_core::training::{evaluate, fractional_loss, train};
use fnde_core::{Dataset, ModelKind, Theory};
use serde_json::json;

use fnde::checkpoint::{load_checkpoint, save_checkpoint};
use fnde::config::RunConfig;
use fnde::dataset::{read_dataset, write_dataset, write_matrix_csv};
use fnde::experiments::{ratio_sweep, run_experiment, ExperimentName, ExperimentSpec};
use fnde::plot::emit_plot;
use fnde::report::{emit_csv, write_history_csv, RunRecord};
use fnde::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fnde", version, about = "Train and analyse neural differential equations for scattering matrices")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "FNDE_OUT_DIR", default_value = "fnde-out")]
    out: PathBuf,
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an analytic S-matrix dataset as CSV plus a TOML provenance sidecar.
    Generate {
        #[command(flatten)]
        opts: RunOpts,
        /// Shift the grid by half a spacing.
        #[arg(long)]
        validation: bool,
        /// Stretch the grid range by this factor.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Train one model and save its checkpoint and loss history.
    Train {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a checkpoint on a dataset CSV.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = fnde_core::models::DEFAULT_STEPS)]
        steps: usize,
    },
    /// Recover the Hamiltonian (NODE) or Hamiltonian density (FNDE_MOD) from a checkpoint.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long, default_value_t = 0.4)]
        coupling: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Integration time at which a NODE Hamiltonian is read off.
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
    /// Run one of the experiment sweeps and write CSV reports and an SVG plot.
    Experiment {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
        /// 10 epochs, 1 seed, n_p = 6.
        #[arg(long)]
        smoke: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
struct RunOpts {
    /// phi4, scalar_yukawa, scalar_qed (comma separated).
    #[arg(long, value_delimiter = ',')]
    theory: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    order: Vec<usize>,
    /// FNDE, FNDE_MOD, FNO, NODE (comma separated).
    #[arg(long, value_delimiter = ',')]
    model: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    np: Vec<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    ratio_max: Option<f64>,
}

impl RunOpts {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if !self.theory.is_empty() {
            spec.theories = self.theory.iter().map(|t| t.parse::<Theory>()).collect::<std::result::Result<_, _>>()?;
        }
        if !self.order.is_empty() {
            spec.orders = self.order.clone();
        }
        if !self.model.is_empty() {
            spec.models = self.model.iter().map(|m| m.parse::<ModelKind>()).collect::<std::result::Result<_, _>>()?;
        }
        if !self.np.is_empty() {
            spec.grid_sizes = self.np.clone();
        }
        if let Some(epochs) = self.epochs {
            spec.train = spec.train.with_epochs(epochs);
        }
        if let Some(seeds) = self.seeds {
            spec.train.seeds = seeds;
        }
        if let Some(ratio_max) = self.ratio_max {
            spec.ratios = ratio_sweep(ratio_max);
        }
        Ok(())
    }
}

/// Defaults, then the config file, then flags.
fn resolve(base: ExperimentSpec, config: Option<&Path>, opts: &RunOpts) -> Result<ExperimentSpec> {
    let mut spec = base;
    if let Some(path) = config {
        RunConfig::load(path)?.apply(&mut spec)?;
    }
    opts.apply(&mut spec)?;
    spec.validate()?;
    Ok(spec)
}

/// Single-run commands use the first entry of each list.
fn single_run_spec(config: Option<&Path>, opts: &RunOpts) -> Result<ExperimentSpec> {
    let mut base = ExperimentSpec::new(ExperimentName::Validation);
    base.models = vec![ModelKind::Fnde];
    resolve(base, config, opts)
}

fn dataset_stem(dataset: &Dataset) -> String {
    let p = &dataset.provenance;
    format!("{}_o{}_np{}", p.theory, p.order, p.grid.n_p)
}

fn print_json(value: serde_json::Value) {
    println!("{value}");
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Generate { opts, validation, ratio } => {
            let spec = single_run_spec(config, &opts)?;
            let grid = spec.grid(spec.grid_sizes[0])?;
            let mut dataset = generate_dataset(spec.theories[0], spec.orders[0], grid, &spec.couplings, &spec.masses)?;
            let mut stem = dataset_stem(&dataset);
            if let Some(ratio) = ratio {
                dataset = dataset.regenerate_on(grid.scaled(ratio)?);
                stem.push_str(&format!("_x{ratio}"));
            }
            if validation {
                let mut shifted = dataset.provenance.grid;
                shifted.offset += spec.val_offset;
                dataset = dataset.regenerate_on(shifted);
                stem.push_str("_val");
            }
            let path = cli.out.join(format!("{stem}.csv"));
            let record = write_dataset(&dataset, &path)?;
            print_json(json!({ "dataset": path, "samples": record.samples, "sha256": record.sha256 }));
        }
        Command::Train { opts, seed } => {
            let spec = single_run_spec(config, &opts)?;
            let model = spec.models[0];
            let grid = spec.grid(spec.grid_sizes[0])?;
            let data = generate_dataset(spec.theories[0], spec.orders[0], grid, &spec.couplings, &spec.masses)?;
            let mut val_grid = grid;
            val_grid.offset += spec.val_offset;
            let val = data.regenerate_on(val_grid);
            let (params, history) = train(model, &data, &val, &spec.train, seed)?;
            let stem = format!("{}_{}_s{seed}", model, dataset_stem(&data));
            let checkpoint = cli.out.join(format!("{stem}.ckpt"));
            let history_path = cli.out.join(format!("{stem}_history.csv"));
            save_checkpoint(&params, &checkpoint)?;
            let final_train = history.final_train();
            let final_val = history.final_val();
            write_history_csv(
                &[RunRecord {
                    model,
                    theory: spec.theories[0],
                    order: spec.orders[0],
                    n_p: grid.n_p,
                    seed,
                    history,
                }],
                &history_path,
            )?;
            print_json(json!({
                "checkpoint": checkpoint,
                "history": history_path,
                "final_train_loss": final_train,
                "final_val_loss": final_val,
            }));
        }
        Command::Evaluate { checkpoint, data, steps } => {
            let params = load_checkpoint(&checkpoint)?;
            let dataset = read_dataset(&data)?;
            let mse = evaluate(&params, &dataset, steps)?;
            let fractional = fractional_loss(&params, &dataset, steps)?;
            print_json(json!({ "mse": mse, "fractional_loss": fractional }));
        }
        Command::Extract {
            checkpoint,
            opts,
            coupling,
            mass,
            time,
        } => {
            let params = load_checkpoint(&checkpoint)?;
            let mut spec = single_run_spec(config, &opts)?;
            if opts.np.is_empty() {
                spec.grid_sizes = vec![params.shape.n_p];
            }
            let mut grid = spec.grid(spec.grid_sizes[0])?;
            grid.p_max = params.momentum_scale;
            let stem = checkpoint
                .file_stem()
                .map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
            match params.kind {
                ModelKind::Node => {
                    let data = generate_dataset(spec.theories[0], spec.orders[0], grid, &[coupling], &[mass])?;
                    let sample = &data.samples[0];
                    let extracted = extract_hamiltonian(&params, sample, time)?;
                    let (s, r) = fnde_core::extraction::node_state_at(&params, sample, time)?;
                    let residual = self_consistency(&extracted.h, &s, &r)?;
                    let path = cli.out.join(format!("{stem}_hamiltonian.csv"));
                    write_matrix_csv(&extracted.h, &path)?;
                    print_json(json!({
                        "hamiltonian": path,
                        "frobenius_norm": extracted.h.frobenius_norm(),
                        "self_consistency": residual,
                    }));
                }
                ModelKind::FndeMod => {
                    let density = extract_density(&params, &grid)?;
                    let path = cli.out.join(format!("{stem}_density.csv"));
                    write_matrix_csv(&density.kernel, &path)?;
                    print_json(json!({
                        "density": path,
                        "rows": density.kernel.rows(),
                        "cols": density.kernel.cols(),
                        "frobenius_norm": density.kernel.frobenius_norm(),
                    }));
                }
                kind => {
                    return Err(Error::Config(format!(
                        "extraction needs a NODE or FNDE_MOD checkpoint, got {kind}"
                    )))
                }
            }
        }
        Command::Experiment {
            name,
            opts,
            smoke,
            threads,
        } => {
            let name: ExperimentName = name.parse()?;
            let base = if smoke {
                ExperimentSpec::smoke(name)
            } else {
                ExperimentSpec::new(name)
            };
            let mut spec = resolve(base, config, &opts)?;
            if let Some(threads) = threads {
                spec.threads = threads.max(1);
            }
            let report = run_experiment(&spec)?;
            let files = emit_csv(&report, &cli.out)?;
            let plot = cli.out.join(format!("{}_losses.svg", report.name));
            emit_plot(&report, &plot)?;
            print_json(json!({
                "experiment": report.name,
                "runs": report.runs.len(),
                "failures": report.failures.len(),
                "summary": files.summary,
                "plot": plot,
                "runtime_seconds": report.runtime_seconds,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) if !error.use_stderr() => {
            let _ = error.print();
            return ExitCode::SUCCESS;
        }
        Err(error) => {
            let message = error.render().to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", json!({ "error": error.kind(), "message": error.to_string() }));
            ExitCode::FAILURE
        }
    }
}
