use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mbeq::cli::{error_line, exit_code, run, Status, EXIT_CONFIG, EXIT_NOT_CONVERGED};
use mbeq::config::{Command, RunConfig};
use mbeq::Error;

/// Equilibrium measures, vector problems, oracles, curves and sampling from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "mbeq", version)]
struct Args {
    /// Command; overrides the one in the config.
    /// One of solve-scalar, solve-vector, analytic-check, balayage, spectral-curve, sample, compare.
    command: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "tol-var")]
    tol_var: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
            let mut v: serde_json::Value = serde_json::from_str(&s).map_err(|e| Error::Parse(e.to_string()))?;
            if let (Some(c), Some(obj)) = (&args.command, v.as_object_mut()) {
                obj.insert("command".into(), serde_json::Value::String(c.clone()));
            }
            serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?
        }
        None => {
            let c = args.command.as_deref().ok_or_else(|| Error::InvalidArgument("give a command or --config".into()))?;
            RunConfig::from_json(&serde_json::json!({ "command": Command::parse(c)?.name() }).to_string())?
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tol_var {
        cfg.tolerances.tol_var = t;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.display().to_string());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_line("config", &e.to_string()));
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into()));
    match run(&cfg, &out) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged(m)) => {
            eprintln!("{}", error_line("not-converged", &m));
            ExitCode::from(EXIT_NOT_CONVERGED as u8)
        }
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_CONFIG { "config" } else { "numerical" };
            eprintln!("{}", error_line(kind, &e.to_string()));
            ExitCode::from(code as u8)
        }
    }
}
