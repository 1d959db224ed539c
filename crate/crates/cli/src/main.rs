use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fundsol_core::util::write_json;
use fundsol_core::Error;
use serde_json::json;

mod commands;
mod config;

use commands::{DecayCheck, KernelCheck, LpqCheck, Outcome, RegimeArg, Sink};
use config::RunConfig;

/// Bad input from the user: configuration, flags or files. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Parser)]
#[command(
    name = "fundsol",
    version,
    about = "Fundamental solutions of e^{itP(D)}: kernels, decay audits and L^p-L^q estimates"
)]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Symbol file, overriding the configuration and the command's default.
    #[arg(long, global = true)]
    symbol: Option<PathBuf>,
    #[arg(long, global = true, default_value = "fundsol-out")]
    output_dir: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ellipticity and Hessian non-degeneracy of the principal part.
    Certify,
    /// Threshold a and the symbol-class audit of the level-set correction.
    RhoAudit,
    /// Radial phase inequalities over an s grid.
    PhaseAudit,
    /// Stationary-phase decomposition of the sphere integral.
    SphereDecomp,
    /// Kernel evaluation and its self-checks.
    Kernel {
        #[arg(long, value_enum, default_value = "points")]
        check: KernelCheck,
    },
    /// Pointwise decay of the kernel against its envelopes.
    Decay {
        #[arg(long, value_enum, default_value = "both")]
        regime: RegimeArg,
        #[arg(long, value_enum, default_value = "envelope")]
        check: DecayCheck,
    },
    /// Spatial decay rate of I(1, x) for |xi|^m.
    Sharpness,
    /// Time exponent of the L^p -> L^q norm of e^{itP(D)}.
    Lpq {
        /// Exponent pair "p,q"; "inf" is accepted.
        #[arg(long, value_parser = commands::parse_pair)]
        pair: Option<[f64; 2]>,
        #[arg(long, value_enum, default_value = "small-t")]
        regime: RegimeArg,
        #[arg(long, value_enum, default_value = "exponent")]
        check: LpqCheck,
    },
    /// Small-time exponent for data with no low frequencies.
    Highfreq {
        #[arg(long, value_parser = commands::parse_pair)]
        pair: Option<[f64; 2]>,
    },
}

impl Command {
    fn tag(&self) -> String {
        fn name<T: ValueEnum>(v: &T) -> String {
            v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
        }
        match self {
            Command::Certify => "certify".into(),
            Command::RhoAudit => "rho-audit".into(),
            Command::PhaseAudit => "phase-audit".into(),
            Command::SphereDecomp => "sphere-decomp".into(),
            Command::Kernel { check } => format!("kernel-{}", name(check)),
            Command::Decay { regime, check } => format!("decay-{}-{}", name(check), name(regime)),
            Command::Sharpness => "sharpness".into(),
            Command::Lpq { check, regime, .. } => match check {
                LpqCheck::Exponent => format!("lpq-{}", name(regime)),
                LpqCheck::Unitarity => "lpq-unitarity".into(),
            },
            Command::Highfreq { .. } => "highfreq".into(),
        }
    }
}

/// Errors caused by the request rather than by the numerics.
fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidSymbol(_)
            | Error::SymbolFile(_)
            | Error::EndpointPair { .. }
            | Error::Io(_)
    )
}

fn resolve(cli: &Cli) -> Result<RunConfig, UsageError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.symbol {
        config.symbol = Some(s.clone());
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(command: &Command, config: &RunConfig, sink: &mut Sink) -> fundsol_core::Result<Outcome> {
    match command {
        Command::Certify => commands::certify_cmd(config),
        Command::RhoAudit => commands::rho_audit_cmd(config, sink),
        Command::PhaseAudit => commands::phase_audit_cmd(config, sink),
        Command::SphereDecomp => commands::sphere_decomp_cmd(config, sink),
        Command::Kernel { check } => commands::kernel_cmd(config, *check, sink),
        Command::Decay { regime, check } => commands::decay_cmd(config, *regime, *check, sink),
        Command::Sharpness => commands::sharpness_cmd(config, sink),
        Command::Lpq {
            pair,
            regime,
            check,
        } => commands::lpq_cmd(config, *pair, *regime, *check, sink),
        Command::Highfreq { pair } => commands::highfreq_cmd(config, *pair, sink),
    }
}

fn summary_path(dir: &Path, tag: &str) -> PathBuf {
    dir.join(format!("{tag}.json"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("fundsol: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("fundsol: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.output_dir) {
        eprintln!("fundsol: cannot create {}: {e}", cli.output_dir.display());
        return ExitCode::from(2);
    }
    let tag = cli.command.tag();
    let mut sink = Sink::new(&cli.output_dir, &tag);
    let result = run(&cli.command, &config, &mut sink);
    let symbol = config.symbol.as_ref().map(|p| p.display().to_string());
    let (summary, code) = match result {
        Ok(outcome) => {
            let pass = outcome.failures.is_empty();
            for f in &outcome.failures {
                eprintln!("FAIL {f}");
            }
            let summary = json!({
                "command": tag,
                "symbol_file": symbol,
                "seed": config.seed,
                "config": config,
                "pass": pass,
                "failures": outcome.failures,
                "artifacts": sink.files,
                "report": outcome.report,
            });
            (summary, if pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("fundsol: {e}");
            let code = if is_usage(&e) { 2 } else { 1 };
            let summary = json!({
                "command": tag,
                "symbol_file": symbol,
                "seed": config.seed,
                "config": config,
                "pass": false,
                "error": e.to_string(),
                "artifacts": sink.files,
            });
            (summary, code)
        }
    };
    let path = summary_path(&cli.output_dir, &tag);
    if let Err(e) = write_json(&path, &summary) {
        eprintln!("fundsol: cannot write {}: {e}", path.display());
        return ExitCode::from(2);
    }
    println!(
        "{} {}",
        if code == 0 { "PASS" } else { "FAIL" },
        path.display()
    );
    ExitCode::from(code)
}
