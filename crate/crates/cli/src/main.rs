//! `mgnet`: build multigrade networks, check their layer-wise error bounds,
//! estimate moduli of continuity and run parameter sweeps.
//!
//! Exit status: 0 when every check passes, 1 when a bound check fails,
//! 2 for usage errors, 3 when a build or I/O step fails.

mod config;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mgnet::analysis::estimate_modulus;
use mgnet::multigrade::MultigradeNet;

use config::{ConfigArgs, UsageError};
use run::{
    build, json_bytes, modulus_csv, run_experiment, write_bundle, ModulusRow, ParamsReport,
    RunError,
};

#[derive(Parser)]
#[command(
    name = "mgnet",
    version,
    about = "Multigrade mixed-activation network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the net and write net.json and params.json
    Build(ConfigArgs),
    /// Build, check every level against its bound and write the artifact bundle
    Verify(ConfigArgs),
    /// Sampled modulus of continuity of the target
    Modulus {
        #[command(flatten)]
        config: ConfigArgs,
        /// Scales; defaults to N^-l for l = 0..=L
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Norm exponents, `inf` for the classical modulus; defaults to p
        #[arg(long, value_delimiter = ',')]
        norm: Vec<f64>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross product of targets, N, L and p into sweep.csv
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Vec<u64>,
        #[arg(long = "depth-list", value_delimiter = ',')]
        depth_list: Vec<usize>,
        #[arg(long = "p-list", value_delimiter = ',')]
        p_list: Vec<f64>,
    },
    /// Write the realized layer stack as JSON (sine decoders only)
    ExportWeights {
        #[command(flatten)]
        config: ConfigArgs,
        /// Read this net.json instead of building from the config
        #[arg(long)]
        net: Option<PathBuf>,
        /// Defaults to <out>/weights.json
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<RunError>(), Some(RunError::Usage(_)));
            eprintln!("mgnet: {e:#}");
            ExitCode::from(if usage { 2 } else { 3 })
        }
    }
}

/// `Ok(pass)` when the command ran to completion.
fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Build(args) => cmd_build(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Modulus {
            config,
            t,
            norm,
            output,
        } => cmd_modulus(&config, t, norm, output),
        Command::Sweep {
            config,
            targets,
            n_list,
            depth_list,
            p_list,
        } => cmd_sweep(&config, targets, n_list, depth_list, p_list),
        Command::ExportWeights {
            config,
            net,
            output,
        } => cmd_export(&config, net, output),
    }
}

fn cmd_build(args: &ConfigArgs) -> anyhow::Result<bool> {
    let cfg = args.resolve()?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let built = match build(&cfg) {
        Ok(b) => b,
        Err(RunError::Build {
            error,
            partial: Some(net),
        }) => {
            let path = cfg.out.join("net.partial.json");
            std::fs::write(&path, net.to_json()?)?;
            anyhow::bail!("{error}; finished grades written to {}", path.display());
        }
        Err(e) => return Err(e.into()),
    };
    let net = &built.net;
    std::fs::write(cfg.out.join("net.json"), net.to_json()? + "\n")?;
    std::fs::write(
        cfg.out.join("params.json"),
        json_bytes(&ParamsReport::new(net))?,
    )?;
    println!(
        "built {} levels, d={} N={} delta={:e} ({})",
        net.grades.len(),
        built.partition.d,
        built.partition.n,
        built.delta.value,
        built.delta.policy
    );
    if let Some(note) = &built.delta.note {
        println!("note: {note}");
    }
    for g in &net.grades {
        println!(
            "  level {:>2}: {} cells, decoder eps {:.3e}",
            g.level,
            g.cell_values.len(),
            g.decoder.eps()
        );
    }
    Ok(true)
}

fn cmd_verify(args: &ConfigArgs) -> anyhow::Result<bool> {
    let cfg = args.resolve()?;
    let bundle = run_experiment(&cfg)?;
    write_bundle(&cfg.out, &bundle)?;
    let s = &bundle.summary;
    if let Some(e) = &s.error {
        anyhow::bail!("{e} (partial artifacts in {})", cfg.out.display());
    }
    println!(
        "{:>5}  {:>12}  {:>12}  {:>10}  result",
        "level", "error", "bound", "tolerance"
    );
    for l in &s.levels {
        println!(
            "{:>5}  {:>12.5e}  {:>12.5e}  {:>10.3e}  {}",
            l.level,
            l.measured_error,
            l.bound,
            l.tolerance,
            if l.pass { "pass" } else { "FAIL" }
        );
    }
    for n in &s.notes {
        println!("note: {n}");
    }
    println!(
        "{} -> {}",
        if s.all_pass { "all pass" } else { "FAILED" },
        cfg.out.display()
    );
    Ok(bundle.all_pass())
}

fn cmd_modulus(
    args: &ConfigArgs,
    t: Vec<f64>,
    norm: Vec<f64>,
    output: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let cfg = args.resolve()?;
    let spec = cfg.target_spec()?;
    let mut f = spec.function;
    if cfg.domain.is_some() {
        f = f.with_domain(cfg.domain_box())?;
    }
    let scales: Vec<(usize, f64)> = if t.is_empty() {
        (0..=cfg.depth)
            .map(|l| (l, (cfg.n as f64).powi(-(l as i32))))
            .collect()
    } else {
        t.into_iter().enumerate().collect()
    };
    let norms = if norm.is_empty() { vec![cfg.p] } else { norm };
    let plan = cfg.sampling_plan();
    let mut rows = Vec::new();
    for &p in &norms {
        for &(i, s) in &scales {
            rows.push(ModulusRow::new(i, &estimate_modulus(&f, s, p, &plan)?));
        }
    }
    let bytes = modulus_csv(&rows)?;
    match output {
        Some(path) => {
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(true)
}

fn cmd_sweep(
    args: &ConfigArgs,
    targets: Vec<String>,
    n_list: Vec<u64>,
    depth_list: Vec<usize>,
    p_list: Vec<f64>,
) -> anyhow::Result<bool> {
    let merged = args.merged()?;
    let mut grid = merged.sweep.clone().unwrap_or_default();
    if !targets.is_empty() {
        grid.targets = targets;
    }
    if !n_list.is_empty() {
        grid.n = n_list;
    }
    if !depth_list.is_empty() {
        grid.depth = depth_list;
    }
    if !p_list.is_empty() {
        grid.p = p_list;
    }
    let runs = grid.expand(&merged)?;
    let out = runs[0].out.clone();
    let rows = sweep::run_sweep(&runs);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("sweep.csv");
    std::fs::write(&path, sweep::sweep_csv(&rows)?)
        .with_context(|| format!("writing {}", path.display()))?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!(
        "{} runs, {} rows, {} failing -> {}",
        runs.len(),
        rows.len(),
        failed,
        path.display()
    );
    Ok(failed == 0)
}

fn cmd_export(
    args: &ConfigArgs,
    net: Option<PathBuf>,
    output: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let (net, out_dir) = match net {
        Some(path) => {
            let net = MultigradeNet::read(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let dir = args
                .merged()?
                .out
                .unwrap_or_else(|| PathBuf::from("mgnet-out"));
            (net, dir)
        }
        None => {
            let cfg = args.resolve()?;
            (build(&cfg)?.net, cfg.out)
        }
    };
    let stack = net.export_weights()?;
    let path = output.unwrap_or_else(|| out_dir.join("weights.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    stack.write(&path)?;
    println!(
        "width {}, {} layers, {} parameters -> {}",
        stack.width,
        stack.layers.len(),
        stack.parameter_count(),
        path.display()
    );
    Ok(true)
}
