use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpmd::compress::DEFAULT_INTERVAL;
use dpmd::fused::DEFAULT_R_MIN;
use dpmd::io::model_file::Provenance;
use dpmd::io::thermo_csv::write_thermo;
use dpmd::io::xyz::XyzFrame;
use dpmd::io::{self, ModelFile};
use dpmd::md::{run_md, MDConfig, MDOutcome};
use dpmd::pipeline::{self, DEFAULT_VALIDATION_CONFIGS};
use dpmd::{AtomicConfig, CompressedModel, DPModel, Error};

#[derive(Parser, Debug)]
#[command(name = "dpmd", version, about = "Deep Potential MD with tabulated embedding nets")]
struct Cli {
    /// Random seed for generators and initial velocities.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of force-evaluation workers.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic model.
    GenModel {
        #[arg(long, default_value = "copper-like")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a jittered FCC configuration as extended XYZ.
    GenConfig {
        #[arg(long, default_value = "copper-like")]
        preset: String,
        /// Lattice repetitions, e.g. 3,3,3.
        #[arg(long, value_delimiter = ',', default_value = "3,3,3")]
        reps: Vec<usize>,
        /// Uniform jitter amplitude per coordinate (A).
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Override the preset lattice constant (A).
        #[arg(long)]
        lattice_constant: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the embedding nets of a model.
    Compress {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
        /// Smallest pair distance the table covers (A).
        #[arg(long, default_value_t = DEFAULT_R_MIN)]
        r_min: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// RMSE of tabulated models against the exact one on jittered configs.
    Validate {
        #[arg(long)]
        model: PathBuf,
        /// Descending list of intervals.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        intervals: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_VALIDATION_CONFIGS)]
        n_configs: usize,
        /// Preset providing the lattice (defaults to the model's provenance).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "3,3,3")]
        reps: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        jitter: f64,
        #[arg(long, default_value_t = DEFAULT_R_MIN)]
        r_min: f64,
    },
    /// NVE molecular dynamics.
    Run(RunArgs),
    /// Time exact against fused force evaluation.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    /// Table file; without it the model is tabulated with --interval.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    interval: f64,
    /// Use the exact networks instead of tables.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 99)]
    steps: u64,
    /// Timestep (fs).
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Initial temperature (K).
    #[arg(long, default_value_t = 330.0)]
    temperature: f64,
    /// Neighbor-list buffer (A).
    #[arg(long, default_value_t = 2.0)]
    buffer: f64,
    #[arg(long, default_value_t = 50)]
    rebuild_every: u64,
    #[arg(long, default_value_t = 50)]
    thermo_every: u64,
    /// Thermo CSV output.
    #[arg(long)]
    thermo: Option<PathBuf>,
    /// Extended XYZ trajectory output.
    #[arg(long)]
    traj: Option<PathBuf>,
}

fn species_names(model: &DPModel) -> Vec<String> {
    model.hyper.species.iter().map(|s| s.name.clone()).collect()
}

fn load_model(path: &PathBuf) -> anyhow::Result<ModelFile> {
    io::read_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn load_config(path: &PathBuf, model: &DPModel) -> anyhow::Result<(AtomicConfig, Option<String>)> {
    let mut frames = io::read_xyz(path, &species_names(model))
        .with_context(|| format!("reading configuration {}", path.display()))?;
    if frames.is_empty() {
        return Err(Error::Usage(format!("{} holds no frames", path.display())).into());
    }
    let frame = frames.swap_remove(0);
    let seed = frame.get("seed").map(str::to_string);
    Ok((frame.config, seed))
}

fn load_compressed(model: &DPModel, table: Option<&PathBuf>, interval: f64) -> anyhow::Result<CompressedModel> {
    Ok(match table {
        Some(path) => {
            let tables = io::read_tables(path).with_context(|| format!("reading tables {}", path.display()))?;
            CompressedModel::new(model.clone(), tables)?
        }
        None => CompressedModel::compress(model, interval, DEFAULT_R_MIN)?,
    })
}

fn reps3(v: &[usize]) -> Result<[usize; 3], Error> {
    match v {
        &[a, b, c] => Ok([a, b, c]),
        _ => Err(Error::Usage(format!("--reps takes three comma-separated counts, got {}", v.len()))),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let json_out = cli.format == Format::Json;
    match cli.command {
        Command::GenModel { preset, out } => {
            let p = io::preset(&preset)?;
            let model = io::gen_model(&p, cli.seed)?;
            let file = ModelFile {
                model,
                provenance: Some(Provenance {
                    preset: p.name.to_string(),
                    seed: cli.seed,
                    generator: format!("dpmd {}", env!("CARGO_PKG_VERSION")),
                }),
            };
            io::write_model(&out, &file)?;
            if json_out {
                println!("{}", json!({"model": out, "preset": p.name, "seed": cli.seed}));
            } else {
                println!("wrote {} model (seed {}) to {}", p.name, cli.seed, out.display());
            }
        }
        Command::GenConfig { preset, reps, jitter, lattice_constant, out } => {
            let mut p = io::preset(&preset)?;
            if let Some(a) = lattice_constant {
                if !(a > 0.0) {
                    bail!(Error::Usage(format!("lattice constant must be positive, got {a}")));
                }
                p.lattice_constant = a;
            }
            if !(jitter >= 0.0) {
                bail!(Error::Usage(format!("jitter must be nonnegative, got {jitter}")));
            }
            let config = io::gen_config(&p, reps3(&reps)?, jitter, cli.seed)?;
            let names: Vec<String> = p.hyper.species.iter().map(|s| s.name.clone()).collect();
            let frame = XyzFrame::new(config).with("preset", p.name).with("seed", cli.seed).with("jitter", jitter);
            io::write_xyz(&out, std::slice::from_ref(&frame), &names)?;
            if json_out {
                println!("{}", json!({"config": out, "atoms": frame.config.n_atoms(), "seed": cli.seed}));
            } else {
                println!("wrote {} atoms to {}", frame.config.n_atoms(), out.display());
            }
        }
        Command::Compress { model, interval, r_min, out } => {
            let file = load_model(&model)?;
            if !(interval > 0.0) {
                bail!(Error::Usage(format!("interval must be positive, got {interval}")));
            }
            let compressed = CompressedModel::compress(&file.model, interval, r_min)?;
            io::write_tables(&out, compressed.tables())?;
            let bytes: usize = compressed.tables().iter().map(|t| t.payload_bytes()).sum();
            if json_out {
                println!("{}", json!({"tables": out, "interval": interval, "payload_bytes": bytes}));
            } else {
                println!(
                    "wrote {} table(s), h = {interval}, {} intervals, {bytes} payload bytes to {}",
                    compressed.tables().len(),
                    compressed.tables()[0].n_intervals(),
                    out.display()
                );
            }
        }
        Command::Validate { model, intervals, n_configs, preset, reps, jitter, r_min } => {
            let file = load_model(&model)?;
            let name = preset
                .or_else(|| file.provenance.as_ref().map(|p| p.preset.clone()))
                .ok_or_else(|| Error::Usage("model has no provenance; pass --preset".into()))?;
            let p = io::preset(&name)?;
            let configs = pipeline::jittered_configs(&p, n_configs, reps3(&reps)?, jitter, cli.seed)?;
            let report = pipeline::validate(&file.model, &intervals, &configs, r_min)?;
            if json_out {
                let rows: Vec<_> = report
                    .rows
                    .iter()
                    .map(|(h, r)| json!({"h": h, "rmse_e": r.rmse_e, "rmse_f": r.rmse_f}))
                    .collect();
                println!(
                    "{}",
                    json!({"configs": n_configs, "seed": cli.seed, "rows": rows,
                           "slope_e": report.slope_e, "slope_f": report.slope_f})
                );
            } else {
                println!("{n_configs} configurations of {} atoms, config seed {}", configs[0].n_atoms(), cli.seed);
                println!("{report}");
            }
        }
        Command::Run(args) => {
            let file = load_model(&args.model)?;
            let (config, config_seed) = load_config(&args.config, &file.model)?;
            let md = MDConfig {
                dt: args.dt,
                n_steps: args.steps,
                t_init: args.temperature,
                buffer: args.buffer,
                rebuild_every: args.rebuild_every,
                thermo_every: args.thermo_every,
                seed: cli.seed,
                n_workers: cli.workers,
            };
            let model_seed = file.provenance.as_ref().map(|p| p.seed.to_string()).unwrap_or_else(|| "none".into());
            let config_seed = config_seed.unwrap_or_else(|| "none".into());
            let outcome = if args.exact {
                run_md(config, &md, &file.model)?
            } else {
                let compressed = load_compressed(&file.model, args.table.as_ref(), args.interval)?;
                let out = run_md(config, &md, &compressed)?;
                if compressed.extrapolations() > 0 {
                    log::warn!("{} table inputs fell beyond the tabulated range", compressed.extrapolations());
                }
                out
            };
            if let Some(path) = &args.thermo {
                write_thermo(BufWriter::new(File::create(path)?), &outcome.thermo)?;
            }
            if let Some(path) = &args.traj {
                let frames: Vec<XyzFrame> = outcome
                    .frames
                    .iter()
                    .map(|f| {
                        XyzFrame::new(f.config.clone())
                            .with("step", f.step)
                            .with("model_seed", &model_seed)
                            .with("config_seed", &config_seed)
                            .with("md_seed", cli.seed)
                            .with("workers", cli.workers)
                    })
                    .collect();
                io::write_xyz(path, &frames, &species_names(&file.model))?;
            }
            report_run(&outcome, &md, &model_seed, &config_seed, json_out);
        }
        Command::Bench { model, table, config, repeats } => {
            let file = load_model(&model)?;
            let (config, _) = load_config(&config, &file.model)?;
            let compressed = load_compressed(&file.model, table.as_ref(), DEFAULT_INTERVAL)?;
            let report = pipeline::bench(&file.model, &compressed, &config, cli.workers, repeats)?;
            if json_out {
                println!(
                    "{}",
                    json!({
                        "atoms": report.n_atoms, "n_max": report.n_max, "workers": report.n_workers,
                        "tts_exact_s_per_step_per_atom": report.tts_exact,
                        "tts_fused_s_per_step_per_atom": report.tts_fused,
                        "flops_original": report.flops.original.to_string(),
                        "flops_tabulated": report.flops.tabulated.to_string(),
                        "flop_savings_percent": 100.0 * report.flops.savings(),
                        "table_evals": report.fused_stats.table_evals,
                        "table_evals_backward": report.fused_stats.table_evals_backward,
                        "padded_rows": report.padded_rows(),
                    })
                );
            } else {
                println!("{report}");
            }
        }
    }
    Ok(())
}

fn report_run(out: &MDOutcome, md: &MDConfig, model_seed: &str, config_seed: &str, json_out: bool) {
    if json_out {
        let thermo: Vec<_> = out
            .thermo
            .iter()
            .map(|r| json!({"step": r.step, "ke": r.ke, "pe": r.pe, "T": r.temperature, "P": r.pressure}))
            .collect();
        println!(
            "{}",
            json!({
                "model_seed": model_seed, "config_seed": config_seed, "md_seed": md.seed,
                "workers": md.n_workers, "steps": md.n_steps, "evaluations": out.evaluations,
                "rebuilds": out.rebuilds, "max_displacement": out.max_displacement,
                "final_energy": out.final_energy, "thermo": thermo,
            })
        );
        return;
    }
    println!(
        "# model_seed {model_seed} config_seed {config_seed} md_seed {} workers {}",
        md.seed, md.n_workers
    );
    println!("{:>8} {:>16} {:>16} {:>10} {:>14}", "step", "KE[eV]", "PE[eV]", "T[K]", "P[bar]");
    for r in &out.thermo {
        println!("{:>8} {:>16.8} {:>16.8} {:>10.3} {:>14.4}", r.step, r.ke, r.pe, r.temperature, r.pressure);
    }
    println!("{} evaluations performed", out.evaluations);
    println!(
        "{} neighbor-list builds, largest displacement between builds {:.4} A",
        out.rebuilds, out.max_displacement
    );
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_usage() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
