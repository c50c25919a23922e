mod commands;
mod config;
mod error;
mod output;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{load, RunConfig};
use crate::error::CliError;
use crate::output::Outputs;

#[derive(Parser, Debug)]
#[command(name = "normsol", version, about = "Mass-constrained minimizers of -Δu = f(u) - μu")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file with flat dotted keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set flow.max_iter=5000
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long = "N", global = true)]
    dim: Option<usize>,
    #[arg(long = "M", global = true)]
    block: Option<usize>,
    /// x2 or radial
    #[arg(long, global = true)]
    sector: Option<String>,
    /// pure_power or power_difference
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Points per reduced axis
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Box length
    #[arg(long = "L", global = true)]
    len: Option<f64>,
    #[arg(long, global = true)]
    dt0: Option<f64>,
    #[arg(long = "tol-grad", global = true)]
    tol_grad: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// sobolev or l2
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// json, csv or both
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long = "rng-seed", global = true)]
    rng_seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize on one mass sphere and certify the result
    Solve {
        #[arg(long)]
        m: Option<f64>,
        /// builtin:default, builtin:bump, builtin:random or a field file
        #[arg(long)]
        seed: Option<String>,
    },
    /// Sweep the curve m -> E_m
    Sweep {
        #[arg(long = "m-from")]
        m_from: Option<f64>,
        #[arg(long = "m-to")]
        m_to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Geometric spacing
        #[arg(long)]
        log: bool,
    },
    /// Bisect for the threshold mass
    Mstar {
        #[arg(long = "m-lo")]
        m_lo: Option<f64>,
        #[arg(long = "m-hi")]
        m_hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Test-map upper bounds for the minimax levels
    Emk {
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Audit a calibrated test-map family
    VerifyTestmap {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Certify a stored field
    Certify {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        m: Option<f64>,
    },
    /// Run the built-in invariant suite
    Selfcheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Mstar { .. } => "mstar",
            Command::Emk { .. } => "emk",
            Command::VerifyTestmap { .. } => "verify-testmap",
            Command::Certify { .. } => "certify",
            Command::Selfcheck => "selfcheck",
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, CliError> {
    let mut ov: Vec<(String, String)> = Vec::new();
    let mut errors = Vec::new();
    for s in &cli.common.set {
        match s.split_once('=') {
            Some((k, v)) => ov.push((k.trim().to_string(), v.trim().to_string())),
            None => errors.push(format!("--set expects KEY=VALUE, got '{s}'")),
        }
    }
    let c = &cli.common;
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            ov.push((k.to_string(), v));
        }
    };
    let quoted = |s: &Option<String>| s.as_ref().map(|s| format!("{s:?}"));
    let num = |x: Option<f64>| x.map(|x| format!("{x:?}"));
    let int = |x: Option<usize>| x.map(|x| x.to_string());
    put("dimension.N", int(c.dim));
    put("dimension.M", int(c.block));
    put("sector", quoted(&c.sector));
    put("nonlinearity.kind", quoted(&c.kind));
    put("nonlinearity.p", num(c.p));
    put("nonlinearity.q", num(c.q));
    put("grid.n", int(c.n));
    put("grid.L", num(c.len));
    put("flow.dt0", num(c.dt0));
    put("flow.tol_grad", num(c.tol_grad));
    put("flow.max_iter", int(c.max_iter));
    put("flow.metric", quoted(&c.metric));
    put(
        "output.dir",
        c.out.as_ref().map(|p| format!("{:?}", p.display().to_string())),
    );
    put("output.format", quoted(&c.format));
    put("rng_seed", c.rng_seed.map(|x| x.to_string()));
    put("threads", int(c.threads));
    match &cli.command {
        Command::Solve { m, seed } => {
            put("m", num(*m));
            put("seed", quoted(seed));
        }
        Command::Sweep {
            m_from,
            m_to,
            points,
            log,
        } => {
            put("m_from", num(*m_from));
            put("m_to", num(*m_to));
            put("points", int(*points));
            if *log {
                put("log", Some("true".into()));
            }
        }
        Command::Mstar { m_lo, m_hi, tol } => {
            put("m_lo", num(*m_lo));
            put("m_hi", num(*m_hi));
            put("tol", num(*tol));
        }
        Command::Emk { m, kmax } => {
            put("m", num(*m));
            put("kmax", int(*kmax));
        }
        Command::VerifyTestmap { k, m, samples } => {
            put("k", int(*k));
            put("m", num(*m));
            put("samples", int(*samples));
        }
        Command::Certify { input, m } => {
            put(
                "input",
                input.as_ref().map(|p| format!("{:?}", p.display().to_string())),
            );
            put("m", num(*m));
        }
        Command::Selfcheck => {}
    }
    if errors.is_empty() {
        Ok(ov)
    } else {
        Err(CliError::Config(errors))
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    match command {
        Command::Solve { .. } => commands::solve(cfg, out),
        Command::Sweep { .. } => commands::sweep(cfg, out),
        Command::Mstar { .. } => commands::mstar(cfg, out),
        Command::Emk { .. } => commands::emk(cfg, out),
        Command::VerifyTestmap { .. } => commands::verify_testmap(cfg, out),
        Command::Certify { .. } => commands::certify_cmd(cfg, out),
        Command::Selfcheck => {
            let report = selfcheck::run(cfg.rng_seed);
            out.json("selfcheck.json", &report)?;
            for c in &report.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                println!("{mark} {:<34} {:.3e} (tol {:.1e})", c.name, c.value, c.tol);
            }
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(CliError::Selfcheck(failed.join(", ")))
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let ov = overrides(&cli)?;
    let cfg = load(cli.common.config.as_deref(), &ov)?;
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    // Fails only if a pool already exists, which keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let mut out = Outputs::create(&cfg.out_dir)?;
    let name = cli.command.name();
    let res = dispatch(&cli.command, &cfg, &mut out);
    out.finish(
        name,
        &cfg,
        threads,
        start.elapsed().as_secs_f64(),
        res.as_ref().map(|_| ()),
    )?;
    res
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
