//! `gie`: command-line front end for the experiment registry.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gie_core::runner::{self, ExperimentConfig, ResultRecord, RunError};

#[derive(Parser)]
#[command(name = "gie", version, about = "Numerical laboratory for gravitationally induced entanglement")]
struct Cli {
    /// Worker threads (overridden by GIE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Config file: a flat `key = value` list or a sectioned experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; `.json` writes the result record, anything else the CSV table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Result record path (JSON).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List registered experiments.
    List,
    /// Run an experiment config (`experiment = <name>` plus sections).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Branch phases, negativity and witness for one interferometer configuration.
    Phases(Common),
    /// Entanglement scan over time.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// quantum or mean-field.
        #[arg(long)]
        model: Option<String>,
    },
    /// Time of maximal entanglement.
    MaxEntanglementTime(Common),
    /// Witness values on entangled and product branch states.
    Witness(Common),
    /// Lorentz-gauge vs Coulomb-gauge entanglement amplitude.
    GaugeEquiv {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid presets: coarse, medium, fine.
        #[arg(long)]
        grids: Option<String>,
        #[arg(long)]
        drop_scalar_photons: bool,
        #[arg(long)]
        include_transverse: bool,
    },
    /// Gravitational analogue of the Coulomb amplitude.
    AnalogCoupling(Common),
    /// Projector and solver suite, or decomposition of a field file.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Field file base path (`<base>.bin` + `<base>.json`).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        fields: Option<usize>,
    },
    /// Newtonian limit of the assembled interaction at n and 2n.
    NewtonCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m1: Option<f64>,
        #[arg(long)]
        m2: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Box side.
        #[arg(long = "box")]
        side: Option<f64>,
    },
    /// Branch phases of a protocol file or a built-in protocol.
    BranchPhase {
        #[command(flatten)]
        common: Common,
        /// Protocol JSON file, or one of static, adiabatic, spacelike.
        #[arg(long)]
        protocol: Option<String>,
        /// retarded, instantaneous or symmetric.
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Static equality, (v/c)^2 scaling and spacelike causality of the kernels.
    KernelCausality(Common),
    /// Primordial spectra from Mukhanov-Sasaki modes.
    CosmoSpectrum {
        #[command(flatten)]
        common: Common,
        /// desitter or powerlaw.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        kmin: Option<f64>,
        #[arg(long)]
        kmax: Option<f64>,
        #[arg(long)]
        nk: Option<usize>,
    },
}

fn set<T: ToString>(cfg: &mut ExperimentConfig, key: &str, value: Option<T>) {
    if let Some(v) = value {
        cfg.set(key, v);
    }
}

fn build(name: &str, common: Common, flags: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load_for(path, name)?,
        None => ExperimentConfig::new(name),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for kv in &common.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| RunError::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim());
    }
    flags(&mut cfg);
    if let Some(out) = common.out {
        if out.extension().is_some_and(|e| e == "json") {
            cfg.json = Some(out);
        } else {
            cfg.csv = Some(out);
        }
    }
    if let Some(json) = common.json {
        cfg.json = Some(json);
    }
    Ok(cfg)
}

fn config_for(command: Command) -> Result<Option<ExperimentConfig>, RunError> {
    let cfg = match command {
        Command::List => return Ok(None),
        Command::Run { config } => ExperimentConfig::load(&config)?,
        Command::Phases(c) => build("gie-phases", c, |_| {})?,
        Command::Scan { common, t_min, t_max, steps, model } => build("gie-scan", common, |cfg| {
            set(cfg, "t_min", t_min);
            set(cfg, "t_max", t_max);
            set(cfg, "steps", steps);
            set(cfg, "model", model);
        })?,
        Command::MaxEntanglementTime(c) => build("max-entanglement-time", c, |_| {})?,
        Command::Witness(c) => build("witness", c, |_| {})?,
        Command::GaugeEquiv { common, grids, drop_scalar_photons, include_transverse } => {
            build("gauge-equiv", common, |cfg| {
                set(cfg, "grids", grids);
                if drop_scalar_photons {
                    cfg.set("drop_scalar_photons", true);
                }
                if include_transverse {
                    cfg.set("include_transverse", true);
                }
            })?
        }
        Command::AnalogCoupling(c) => build("analog-coupling", c, |_| {})?,
        Command::Decompose { common, input, output_dir, n, fields } => build("decompose", common, |cfg| {
            set(cfg, "input", input.map(|p| p.display().to_string()));
            set(cfg, "output_dir", output_dir.map(|p| p.display().to_string()));
            set(cfg, "n", n);
            set(cfg, "fields", fields);
        })?,
        Command::NewtonCheck { common, m1, m2, d, n, sigma, side } => build("newton-check", common, |cfg| {
            set(cfg, "m1", m1);
            set(cfg, "m2", m2);
            set(cfg, "d", d);
            set(cfg, "n", n);
            set(cfg, "sigma", sigma);
            set(cfg, "L", side);
        })?,
        Command::BranchPhase { common, protocol, kernel } => build("branch-phase", common, |cfg| {
            if let Some(p) = protocol {
                let key = if matches!(p.as_str(), "static" | "adiabatic" | "spacelike") {
                    "protocol"
                } else {
                    "protocol_file"
                };
                cfg.set(key, p);
            }
            set(cfg, "kernel", kernel);
        })?,
        Command::KernelCausality(c) => build("kernel-causality", c, |_| {})?,
        Command::CosmoSpectrum { common, model, eps, kmin, kmax, nk } => build("cosmo-spectrum", common, |cfg| {
            set(cfg, "model", model);
            set(cfg, "eps", eps);
            set(cfg, "kmin", kmin);
            set(cfg, "kmax", kmax);
            set(cfg, "nk", nk);
        })?,
    };
    Ok(Some(cfg))
}

fn print_record(r: &ResultRecord) {
    println!("{} ({}) seed {}", r.experiment, r.module, r.seed);
    for (k, v) in &r.scalars {
        println!("  {k} = {v:.10e}");
    }
    for c in &r.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{mark} {}", c.name);
        if let Some(m) = c.measured {
            line.push_str(&format!(" measured={m:.3e}"));
        }
        if let Some(t) = c.tolerance {
            line.push_str(&format!(" tol={t:.3e}"));
        }
        println!("{line}  {}", c.detail);
    }
    println!("{}", if r.passed { "all checks passed" } else { "check failure" });
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config_for(cli.command) {
        Ok(Some(cfg)) => cfg,
        Ok(None) => {
            for (name, module, description) in runner::list_experiments() {
                println!("{name:<24} {module:<15} {description}");
            }
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("gie: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = runner::resolve_threads(cli.threads)
        .and_then(|threads| runner::with_threads(threads, || runner::execute(&cfg)))
        .and_then(|r| r);
    match &result {
        Ok(r) => print_record(r),
        Err(e) => eprintln!("gie: {e}"),
    }
    ExitCode::from(runner::exit_code(&result) as u8)
}
