use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waitent::config::{Config, OracleReport, Overrides};
use waitent::estimators;
use waitent::model::{self, CtmcModel, ModelSpec};
use waitent::scgf;
use waitent::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_STRICT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "waitent", version, about = "Waiting-time estimators of relative entropy for finite CTMCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every model and plan in a config file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact oracles for a model, or a pair of models.
    Exact {
        /// Model name from --config, or a model JSON file without --config.
        model: String,
        /// Second model; omit together with --reversed to compare against the reversal.
        model2: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "model2")]
        reversed: bool,
        /// Steps for the discretized generating functions (repeatable).
        #[arg(long)]
        delta: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named plan and write its report files.
    Run {
        plan: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 when |z| > 3.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// List models and plans in a config file.
    List {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_numeric() {
        ExitCode::from(EXIT_NUMERIC)
    } else {
        ExitCode::from(EXIT_USAGE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::List { config } => list(&config),
        Command::Exact {
            model,
            model2,
            config,
            reversed,
            delta,
            out,
        } => exact(&model, model2.as_deref(), config.as_deref(), reversed, delta, out),
        Command::Run {
            plan,
            config,
            seed,
            replicas,
            out,
            strict,
            delta,
            n,
            budget,
        } => run(
            &plan,
            &config,
            Overrides {
                seed,
                replicas,
                delta,
                n,
                budget,
            },
            out,
            strict,
        ),
    };
    res.unwrap_or_else(|e| fail(&e))
}

fn validate(path: &Path) -> Result<ExitCode, Error> {
    let cfg = Config::load(path)?;
    let checks = cfg.check_all();
    let mut ok = true;
    for c in &checks {
        match &c.error {
            None => println!("ok    {}", c.path),
            Some(e) => {
                ok = false;
                println!("FAIL  {}: {e}", c.path);
            }
        }
    }
    println!("{} item(s), {}", checks.len(), if ok { "all valid" } else { "invalid" });
    Ok(ExitCode::from(if ok { 0 } else { EXIT_USAGE }))
}

fn list(path: &Path) -> Result<ExitCode, Error> {
    let cfg = Config::load(path)?;
    println!("models:");
    for (name, m) in &cfg.models {
        println!("  {name} ({} states)", m.states.len());
    }
    println!("plans:");
    for (name, p) in &cfg.plans {
        let y = p.model_y.as_deref().unwrap_or(waitent::config::REVERSED);
        println!("  {name}: {} {} vs {y}", p.kind.name(), p.model_x);
    }
    Ok(ExitCode::SUCCESS)
}

fn load_model(name: &str, cfg: Option<&Config>) -> Result<CtmcModel, Error> {
    match cfg {
        Some(c) => c.model(name),
        None => {
            let text = std::fs::read_to_string(name)?;
            let spec: ModelSpec = serde_json::from_str(&text)?;
            CtmcModel::try_from(spec)
        }
    }
}

fn exact(
    model: &str,
    model2: Option<&str>,
    config: Option<&Path>,
    reversed: bool,
    mut deltas: Vec<f64>,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let cfg = config.map(Config::load).transpose()?;
    let x = load_model(model, cfg.as_ref())?;
    let y = match model2 {
        Some(m) => load_model(m, cfg.as_ref())?,
        None => {
            if !reversed {
                eprintln!("note: no second model given, comparing against the time reversal");
            }
            model::reversed(&x)?
        }
    };
    if deltas.is_empty() {
        deltas.push(0.1);
    }
    let rep = OracleReport::compute(&x, &y, &deltas, &scgf::default_p_grid())?;
    let mu: Vec<String> = rep
        .states
        .iter()
        .zip(&rep.stationary)
        .map(|(s, p)| format!("{s}={p:.12}"))
        .collect();
    println!("stationary: {}", mu.join(" "));
    println!("relative_entropy_rate: {:.12}", rep.relative_entropy);
    println!("entropy_production_rate: {:.12}", rep.entropy_production);
    println!("spectral_gap: {:.12}", rep.spectral_gap);
    println!("theta2: {:.12}", rep.theta2);
    let dir = out.unwrap_or_else(|| cfg.as_ref().map_or_else(|| PathBuf::from("out"), Config::output_dir).join("exact"));
    for p in rep.write(&dir)? {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(plan: &str, config: &Path, ov: Overrides, out: Option<PathBuf>, strict: bool) -> Result<ExitCode, Error> {
    let cfg = Config::load(config)?;
    let plan = cfg.plan(plan, &ov)?;
    let output = estimators::run(&plan)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir());
    waitent::config::write_output(&output, &dir)?;
    println!("{}", output.report.summary_line());
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    if strict && output.report.z.is_some_and(|z| z.abs() > 3.0) {
        return Ok(ExitCode::from(EXIT_STRICT));
    }
    Ok(ExitCode::SUCCESS)
}
