use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neograd::{Algorithm, OptimizerConfig};
use neograd_harness::commands::{self, Verdict};
use neograd_harness::csvio::{self, fmt_f64};
use neograd_harness::reproduce::{self, ReproduceOptions, MANIFEST_FILE};
use neograd_harness::selector::DEFAULT_DIGITS_PATH;
use neograd_harness::spec::default_alpha_grid;
use neograd_harness::{
    AlphaPolicy, CfSelector, ExperimentSpec, HarnessError, OptimizerSpec, Result,
};

#[derive(Parser, Debug)]
#[command(
    name = "neograd",
    version,
    about = "Runs neograd experiments and writes CSV artifacts"
)]
struct Cli {
    /// Seed for random starting points and run headers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: the spec's out_dir, else `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Experiment spec file (flat key = value lines), used by `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every optimizer of a spec file and write one trace per optimizer.
    Run,
    /// Grid-search a fixed learning rate by final cost.
    AlphaSearch(AlphaSearchArgs),
    /// Iterations to reach each cost level, baseline against NeogradM.
    Speedup(SpeedupArgs),
    /// Cost along the line through two parameter vectors.
    Basin(BasinArgs),
    /// Angle between two runs' parameter snapshots.
    Angle(AngleArgs),
    /// Repeated learning-rate adaptation at a fixed point, plus its ρ-map.
    Stability(StabilityArgs),
    /// Run the whole experiment set and write a manifest.
    ReproduceAll(ReproduceArgs),
}

#[derive(Args, Debug)]
struct AlphaSearchArgs {
    #[arg(long)]
    cf: CfSelector,
    /// Comma-separated θ₀, or `random`.
    #[arg(long, default_value = "random")]
    theta0: String,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value = "adam")]
    algorithm: Algorithm,
    /// Comma-separated α values (default: 13 points from 1e-6 to 1).
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct SpeedupArgs {
    #[arg(long, default_value_t = format!("digits:path={DEFAULT_DIGITS_PATH}"))]
    cf: String,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Comma-separated log₁₀ cost levels, nonincreasing.
    #[arg(long)]
    levels: Option<String>,
    /// Adam learning rate, or `search` to grid-search it on the first seed.
    #[arg(long, default_value = "search")]
    baseline_alpha: String,
    /// Iteration cap per run.
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
}

#[derive(Args, Debug)]
struct BasinArgs {
    #[arg(long)]
    cf: CfSelector,
    /// θ CSV (`index,value`) at s = 0.
    #[arg(long)]
    a: PathBuf,
    /// θ CSV at s = 1.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    s_max: f64,
    #[arg(long, default_value_t = 301)]
    points: usize,
}

#[derive(Args, Debug)]
struct AngleArgs {
    /// Snapshot CSV (`iter,theta_0,…`) of the first run.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[arg(long, default_value = "sigmoid-well")]
    cf: CfSelector,
    /// Comma-separated probe point.
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
    #[arg(long)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.1)]
    rho_targ: f64,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// `lo,hi,n` for the ρ-map α scan.
    #[arg(long, default_value = "1e-3,10,200")]
    scan: String,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, default_value = DEFAULT_DIGITS_PATH)]
    data: PathBuf,
    /// Use only the first rows of the dataset.
    #[arg(long)]
    digits_rows: Option<usize>,
    #[arg(long, default_value_t = 3500)]
    digits_iters: usize,
    #[arg(long, default_value_t = 5)]
    speedup_runs: usize,
    #[arg(long, default_value_t = 20_000)]
    speedup_budget: usize,
    /// Fixed Adam α on digits instead of a grid search.
    #[arg(long)]
    adam_alpha: Option<f64>,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| HarnessError::Usage(format!("{what}: `{}` is not a number", x.trim())))
        })
        .collect()
}

fn theta0(cf: &CfSelector, text: &str, seed: u64) -> Result<Vec<f64>> {
    if text == "random" {
        Ok(cf.random_theta0(seed))
    } else {
        parse_list(text, "theta0")
    }
}

fn header(cli: &Cli, what: &str, detail: String) -> Vec<String> {
    vec![
        format!("experiment: {what}"),
        format!("seed: {}", cli.seed),
        detail,
    ]
}

fn execute(cli: &Cli) -> Result<()> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = |name: &str| out_dir.join(name);
    match &cli.command {
        Command::Run => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| HarnessError::Usage("run needs --config <file>".into()))?;
            let spec = ExperimentSpec::from_file(path)?;
            let dir = cli
                .out_dir
                .clone()
                .or_else(|| spec.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = commands::cmd_run(&spec, cli.seed, &dir)?;
            for r in &report.runs {
                println!(
                    "{}: {} steps, final f {}, stop {}",
                    r.label,
                    r.trace.steps.len(),
                    fmt_f64(r.trace.final_f()),
                    r.trace.stop
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::AlphaSearch(a) => {
            let cf = a.cf.build()?;
            let t0 = theta0(&a.cf, &a.theta0, cli.seed)?;
            cf.check_dim(t0.len())?;
            let grid = match &a.grid {
                Some(g) => parse_list(g, "grid")?,
                None => default_alpha_grid(),
            };
            let base = OptimizerConfig::new(a.algorithm, 1e-3, a.iters);
            let s = commands::cmd_alpha_search(cf.as_ref(), &t0, &grid, &base)?;
            let p = out("alpha_search.csv");
            let detail = format!(
                "cf: {}\nalgorithm: {}\niters: {}",
                a.cf, a.algorithm, a.iters
            );
            commands::write_alpha_search(&p, &header(cli, "alpha_search", detail), &s)?;
            println!(
                "best α {} (final f {})",
                fmt_f64(s.best_alpha),
                fmt_f64(s.best_f)
            );
            println!("wrote {}", p.display());
        }
        Command::Speedup(a) => {
            let selector: CfSelector = a.cf.parse()?;
            let cf = selector.build()?;
            let levels = match &a.levels {
                Some(l) => parse_list(l, "levels")?,
                None => commands::default_levels(),
            };
            let mut adam = OptimizerSpec::new(
                "adam",
                OptimizerConfig::new(Algorithm::Adam, 1e-3, a.budget),
                AlphaPolicy::Search,
            );
            if a.baseline_alpha == "search" {
                let mut short = adam.config.clone();
                short.max_iters = a.budget.min(3500);
                let s = commands::cmd_alpha_search(
                    cf.as_ref(),
                    &selector.random_theta0(cli.seed),
                    &adam.grid,
                    &short,
                )?;
                adam.alpha = AlphaPolicy::Fixed(s.best_alpha);
            } else {
                adam.alpha = a.baseline_alpha.parse().map_err(HarnessError::Usage)?;
            }
            let neo = OptimizerSpec::new(
                "neogradm",
                OptimizerConfig::neogradm(1e-3, a.budget),
                AlphaPolicy::Start,
            );
            let seeds: Vec<u64> = (0..a.runs as u64).map(|k| cli.seed + k).collect();
            let curve = commands::cmd_speedup(
                cf.as_ref(),
                &|s| selector.random_theta0(s),
                &seeds,
                &adam,
                &neo,
                &levels,
            )?;
            let p = out("speedup.csv");
            let detail = format!(
                "cf: {selector}\nbaseline:\n{}candidate:\n{}",
                adam.render(),
                neo.render()
            );
            commands::write_speedup(&p, &header(cli, "speedup", detail), &curve)?;
            for r in &curve.rows {
                let sp = r
                    .speedup()
                    .map_or("unreachable".into(), |s| format!("{s:.2}"));
                println!("level {:>4}: speedup {sp}", r.level);
            }
            println!("wrote {}", p.display());
        }
        Command::Basin(a) => {
            let cf = a.cf.build()?;
            let ta = csvio::read_theta(&a.a)?;
            let tb = csvio::read_theta(&a.b)?;
            let profile = commands::cmd_basin(cf.as_ref(), &ta, &tb, (a.s_min, a.s_max), a.points)?;
            let maxima = commands::local_maxima(&profile);
            let p = out("basin.csv");
            let detail = format!("cf: {}\na: {}\nb: {}", a.cf, a.a.display(), a.b.display());
            commands::write_basin(&p, &header(cli, "basin", detail), &profile)?;
            for i in maxima {
                println!("local maximum at s = {}", profile[i].0);
            }
            println!("wrote {}", p.display());
        }
        Command::Angle(a) => {
            let sa = csvio::read_snapshots(&a.a)?;
            let sb = csvio::read_snapshots(&a.b)?;
            let rows = commands::cmd_angle(&sa, &sb)?;
            let p = out("angle.csv");
            let detail = format!("a: {}\nb: {}", a.a.display(), a.b.display());
            commands::write_angle(&p, &header(cli, "angle", detail), &rows)?;
            println!("wrote {}", p.display());
        }
        Command::Stability(a) => {
            let cf = a.cf.build()?;
            let theta = parse_list(&a.theta, "theta")?;
            cf.check_dim(theta.len())?;
            let scan = parse_list(&a.scan, "scan")?;
            let [lo, hi, n] = scan[..] else {
                return Err(HarnessError::Usage("scan must be lo,hi,n".into()));
            };
            let (it, map) = commands::cmd_stability(
                cf.as_ref(),
                &theta,
                a.alpha0,
                a.rho_targ,
                a.iters,
                (lo, hi, n as usize),
            )?;
            let detail = format!("cf: {}\ntheta: {}\nalpha0: {}", a.cf, a.theta, a.alpha0);
            let h = header(cli, "stability", detail);
            let p = out("stability.csv");
            let q = out("stability_rho_map.csv");
            commands::write_stability(&p, &h, &it)?;
            commands::write_rho_map(&q, &h, &map)?;
            for (k, (alpha, rho)) in it.iterates.iter().enumerate() {
                println!("{k:>3}  α = {alpha:.6}  ρ = {rho:.6}");
            }
            println!("verdict: {}", it.verdict);
            println!("wrote {} and {}", p.display(), q.display());
            if it.verdict == Verdict::MaxIters {
                eprintln!("note: no verdict within {} iterations", a.iters);
            }
        }
        Command::ReproduceAll(a) => {
            let opts = ReproduceOptions {
                data: a.data.clone(),
                digits_rows: a.digits_rows,
                digits_iters: a.digits_iters,
                speedup_runs: a.speedup_runs,
                speedup_budget: a.speedup_budget,
                digits_adam_alpha: a.adam_alpha,
                ..ReproduceOptions::default()
            };
            let m = reproduce::cmd_reproduce_all(&out_dir, cli.seed, &opts)?;
            println!(
                "{} artifacts, manifest at {}",
                m.entries.len(),
                out_dir.join(MANIFEST_FILE).display()
            );
            for (name, why) in &m.skipped {
                eprintln!("skipped {name}: {why}");
            }
            for (name, why) in &m.failures {
                eprintln!("failed {name}: {why}");
            }
            if !m.failures.is_empty() {
                return Err(HarnessError::Experiment(format!(
                    "{} sub-experiments failed",
                    m.failures.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
