use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varcontrib::config::{Config, RunManifest};
use varcontrib::estimators::{
    delta_allocation, empirical_quantiles, malliavin_allocation, tail_mean, AllocationEstimate,
};
use varcontrib::experiments::{
    run_grid_detailed, var_table, write_atomic, write_csv, ExperimentConfig,
};
use varcontrib::models::Model;
use varcontrib::selfcheck::{run_checks, CheckOptions};
use varcontrib::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNDEFINED: u8 = 3;
const EXIT_CHECK: u8 = 4;

/// Monte Carlo VaR contributions by δ-band and Malliavin-weight estimators.
#[derive(Parser)]
#[command(name = "varcontrib", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Portfolio VaR at one confidence level.
    Var(SampleArgs),
    /// Per-asset VaR allocations on one sample.
    Allocate {
        #[command(flatten)]
        sample: SampleArgs,
        /// Half-width of the δ-band; omit to skip the δ estimator.
        #[arg(long)]
        delta: Option<f64>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the replicate study over the configured grid and write CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use α ∈ {0.5, 0.9, 0.99}, δ ∈ {1e-3..1e-6}, N up to 10⁶.
        #[arg(long)]
        paper_grid: bool,
    },
    /// Numerical self-checks of the configured model.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Bound on the structural residual.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Defaults to the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_FAILURE,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path) -> Result<Config, Failure> {
    Config::from_path(path).map_err(Failure::from)
}

fn check_alpha(alpha: f64) -> CmdResult {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CONFIG,
            message: format!("--alpha must lie in (0, 1), got {alpha}"),
        })
    }
}

fn cmd_var(args: &SampleArgs) -> CmdResult {
    check_alpha(args.alpha)?;
    let config = load(&args.config)?;
    let model = config.build_model()?;
    let seed = args.seed.unwrap_or(config.estimation.base_seed);
    let batch = model.sample(args.n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let var = empirical_quantiles(batch.totals(), &[args.alpha])?[0];
    println!("model     {}", config.model_tag()?);
    println!("alpha     {}", args.alpha);
    println!("N         {}", args.n);
    println!("VaR       {var:.6}");
    if let Some(g) = model.as_gaussian() {
        println!("VaR exact {:.6}", g.closed_form(args.alpha)?.var);
    }
    Ok(())
}

fn cell(e: Option<&AllocationEstimate>) -> String {
    match e {
        None => String::new(),
        Some(e) => match e.value {
            Some(v) => format!("{v:.6}"),
            None => "undefined".into(),
        },
    }
}

fn cmd_allocate(args: &SampleArgs, delta: Option<f64>, out: Option<&Path>) -> CmdResult {
    check_alpha(args.alpha)?;
    if let Some(d) = delta {
        if !(d > 0.0 && args.alpha - d > 0.0 && args.alpha + d < 1.0) {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: format!("--delta {d} must be positive with alpha ± delta inside (0, 1)"),
            });
        }
    }
    let config = load(&args.config)?;
    let model = config.build_model()?;
    let seed = args.seed.unwrap_or(config.estimation.base_seed);
    let closed = match model.as_gaussian() {
        Some(g) => Some(g.closed_form(args.alpha)?),
        None => None,
    };
    let mut pre = ExperimentConfig::new(model.clone());
    pre.alphas = vec![args.alpha];
    pre.deltas = delta.into_iter().collect();
    pre.base_seed = seed;
    pre.n_pre = config.estimation.n_pre;
    let levels = var_table(&pre)?.remove(0);
    let var = levels.var;
    let batch = model.sample(args.n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let sample_var = empirical_quantiles(batch.totals(), &[args.alpha])?[0];

    let mut rows = Vec::new();
    for i in 0..model.dim() {
        let d = match delta {
            Some(_) => {
                let (lo, hi) = levels.bands[0];
                Some(delta_allocation(&batch, i, lo, hi)?)
            }
            None => None,
        };
        let m = malliavin_allocation(&batch, &model, i, var)?;
        let t = tail_mean(&batch, i, var)?;
        rows.push((d, m, t));
    }

    println!(
        "model {}  alpha {}  N {}  seed {seed}",
        config.model_tag()?,
        args.alpha,
        args.n
    );
    match &closed {
        Some(_) => println!("VaR {var:.6} (exact), sample quantile {sample_var:.6}"),
        None => println!(
            "VaR {var:.6} (pre-run of {} draws), sample quantile {sample_var:.6}",
            pre.n_pre
        ),
    }
    println!(
        "N*_alpha {}",
        batch.totals().iter().filter(|&&x| x >= var).count()
    );
    if delta.is_some() {
        println!(
            "N*_alpha,delta {}",
            rows[0].0.as_ref().map_or(0, |e| e.tail_count)
        );
    }
    println!(
        "{:>5} {:>14} {:>14} {:>14} {:>14} {:>9}",
        "asset", "delta", "malliavin", "tail_mean", "closed_form", "excluded"
    );
    let mut csv = String::from("asset,estimator,value,tail_count,excluded\n");
    let mut undefined = false;
    let mut degenerate = false;
    for (i, (d, m, t)) in rows.iter().enumerate() {
        let cf = closed
            .as_ref()
            .map(|c| format!("{:.6}", c.allocations[i]))
            .unwrap_or_default();
        println!(
            "{:>5} {:>14} {:>14} {:>14} {:>14} {:>9}",
            i + 1,
            cell(d.as_ref()),
            cell(Some(m)),
            cell(Some(t)),
            cf,
            m.excluded
        );
        for e in d.iter().chain([m, t]) {
            undefined |= !e.is_defined();
            let v = e.value.map_or("NaN".into(), |v| format!("{v:.16e}"));
            let _ = writeln!(
                csv,
                "{},{},{v},{},{}",
                i + 1,
                e.kind,
                e.tail_count,
                e.excluded
            );
        }
        if let Some(c) = &closed {
            let _ = writeln!(csv, "{},closed_form,{:.16e},,", i + 1, c.allocations[i]);
        }
        degenerate |= m.degenerate_weight;
    }
    if degenerate {
        eprintln!(
            "warning: Malliavin weights are constant over the tail; \
             the Malliavin estimate equals the tail conditional mean"
        );
    }
    if let Some(path) = out {
        write_atomic(path, csv.as_bytes())?;
    }
    if undefined {
        return Err(Failure {
            code: EXIT_UNDEFINED,
            message: "some estimates are undefined (empty or ill-conditioned conditioning set)"
                .into(),
        });
    }
    Ok(())
}

fn cmd_experiment(config_path: &Path, out: &Path, paper_grid: bool) -> CmdResult {
    let config = load(config_path)?;
    let mut cfg = config.experiment_config()?;
    if paper_grid {
        cfg = cfg.with_paper_grid();
    }
    let mut manifest = RunManifest::start(&config);
    let run = run_grid_detailed(&cfg)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let degenerate = run.degenerate_weight_count();
    if degenerate > 0 {
        eprintln!(
            "warning: constant Malliavin weights in {degenerate} estimates; \
             those equal the tail conditional mean"
        );
    }
    write_csv(out, &run.rows)?;
    manifest.finish();
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    manifest.write(PathBuf::from(manifest_path))?;

    let undefined: usize = run.rows.iter().map(|r| r.undefined).sum();
    let excluded: usize = run.rows.iter().map(|r| r.excluded).sum();
    println!(
        "{}: {} rows, {} grid cells x {} replicates -> {}",
        cfg.model_tag,
        run.rows.len(),
        cfg.alphas.len() * cfg.deltas.len() * cfg.sample_sizes.len(),
        cfg.replicates,
        out.display()
    );
    println!("undefined estimates {undefined}, excluded weights {excluded}");
    Ok(())
}

fn cmd_check(config_path: &Path, points: usize, tol: f64) -> CmdResult {
    let config = load(config_path)?;
    let model = config.build_model()?;
    let opts = CheckOptions {
        points,
        tolerance: tol,
        seed: config.estimation.base_seed,
        ..CheckOptions::default()
    };
    let report = run_checks(&model, &opts);
    println!("model {}  points {points}", config.model_tag()?);
    for item in &report.items {
        println!("{item}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CHECK,
            message: "self-check failed".into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Var(args) => cmd_var(args),
        Command::Allocate { sample, delta, out } => cmd_allocate(sample, *delta, out.as_deref()),
        Command::Experiment {
            config,
            out,
            paper_grid,
        } => cmd_experiment(config, out, *paper_grid),
        Command::Check {
            config,
            points,
            tol,
        } => cmd_check(config, *points, *tol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
