//! The canonical experiment set, written to one directory with a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use neograd::{Algorithm, CostFunction, OptimizerConfig};
use sha2::{Digest, Sha256};

use crate::commands::{self, RunReport};
use crate::error::{HarnessError, Result};
use crate::selector::{CfSelector, DEFAULT_DIGITS_PATH};
use crate::spec::{AlphaPolicy, ExperimentSpec, OptimizerSpec};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub data: PathBuf,
    /// Use only the first rows of the dataset.
    pub digits_rows: Option<usize>,
    pub digits_iters: usize,
    pub speedup_runs: usize,
    pub speedup_levels: Vec<f64>,
    /// Iteration cap per speedup run.
    pub speedup_budget: usize,
    /// Fixed Adam α on digits instead of a grid search.
    pub digits_adam_alpha: Option<f64>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            data: DEFAULT_DIGITS_PATH.into(),
            digits_rows: None,
            digits_iters: 3500,
            speedup_runs: 5,
            speedup_levels: commands::default_levels(),
            speedup_budget: 20_000,
            digits_adam_alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub failures: Vec<(String, String)>,
    pub skipped: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::from("# path\tname\tseed\tconfig_hash\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.path.display(),
                e.name,
                e.seed,
                e.config_hash
            ));
        }
        for (name, why) in &self.skipped {
            s.push_str(&format!("# skipped {name}: {why}\n"));
        }
        for (name, why) in &self.failures {
            s.push_str(&format!("# failed {name}: {why}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Vec<ManifestEntry> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let mut parts = l.split('\t');
                Some(ManifestEntry {
                    path: parts.next()?.into(),
                    name: parts.next()?.into(),
                    seed: parts.next()?.parse().ok()?,
                    config_hash: parts.next()?.into(),
                })
            })
            .collect()
    }

    fn record(&mut self, out_dir: &Path, name: &str, seed: u64, config: &str, files: &[PathBuf]) {
        let hash = config_hash(config);
        for f in files {
            let path = f.strip_prefix(out_dir).unwrap_or(f).to_path_buf();
            self.entries.push(ManifestEntry {
                path,
                name: name.to_string(),
                seed,
                config_hash: hash.clone(),
            });
        }
    }
}

/// First 16 hex digits of the SHA-256 of a config text.
pub fn config_hash(config: &str) -> String {
    hex::encode(Sha256::digest(config.as_bytes()))[..16].to_string()
}

fn spec_text(lines: &[&str]) -> String {
    lines.join("\n") + "\n"
}

struct Ctx<'a> {
    out_dir: &'a Path,
    seed: u64,
    manifest: Manifest,
}

impl Ctx<'_> {
    /// Parses and runs a spec, recording its files; failures are logged.
    fn run_spec(&mut self, text: &str) -> Option<RunReport> {
        let spec: ExperimentSpec = match text.parse() {
            Ok(s) => s,
            Err(e) => {
                self.manifest.failures.push(("spec".into(), e.to_string()));
                return None;
            }
        };
        match commands::cmd_run(&spec, self.seed, self.out_dir) {
            Ok(report) => {
                self.manifest.record(
                    self.out_dir,
                    &spec.name,
                    self.seed,
                    &spec.render(),
                    &report.files,
                );
                Some(report)
            }
            Err(e) => {
                self.manifest
                    .failures
                    .push((spec.name.clone(), e.to_string()));
                None
            }
        }
    }

    fn attempt(&mut self, name: &str, config: &str, f: impl FnOnce(&Path) -> Result<Vec<PathBuf>>) {
        match f(self.out_dir) {
            Ok(files) => self
                .manifest
                .record(self.out_dir, name, self.seed, config, &files),
            Err(e) => self.manifest.failures.push((name.into(), e.to_string())),
        }
    }
}

/// Runs the canonical experiments into `out_dir` and writes
/// [`MANIFEST_FILE`]. Sub-experiment failures are recorded, not fatal; the
/// digits experiments are skipped with a notice when the dataset is absent.
pub fn cmd_reproduce_all(out_dir: &Path, seed: u64, opts: &ReproduceOptions) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let mut ctx = Ctx {
        out_dir,
        seed,
        manifest: Manifest::default(),
    };

    ctx.run_spec(&spec_text(&[
        "name = quartic",
        "cf = quartic:c=1,n=1",
        "theta0 = 1",
        "iters = 500",
        "optimizers = ideal_gd, basic_gd",
        "alpha0 = ideal",
        "rho_targ = 0.1",
        "stall_tol = none",
    ]));
    ctx.run_spec(&spec_text(&[
        "name = sigmoid_well",
        "cf = sigmoid-well:s=10,a=2",
        "theta0 = -3",
        "iters = 400",
        "optimizers = neogradm",
    ]));
    ctx.run_spec(&spec_text(&[
        "name = beale",
        "cf = beale",
        "theta0 = 4, 3",
        "iters = 500",
        "optimizers = neogradm, adam, neograd_v1",
        "snapshots = true",
        "snapshot_stride = 1",
    ]));
    stability(&mut ctx, "stability_convergent", -2.5, 0.8);
    stability(&mut ctx, "stability_divergent", -2.04, 0.085);

    if opts.data.exists() {
        digits(&mut ctx, opts);
    } else {
        let why = format!("dataset not found at {}", opts.data.display());
        for name in [
            "digits",
            "digits_fest2",
            "digits_basin",
            "digits_angle",
            "digits_speedup",
        ] {
            ctx.manifest.skipped.push((name.into(), why.clone()));
        }
    }

    let mut manifest = ctx.manifest;
    let missing: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| !out_dir.join(&e.path).exists())
        .map(|e| e.path.display().to_string())
        .collect();
    for m in missing {
        manifest
            .failures
            .push(("manifest".into(), format!("missing file {m}")));
    }
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.render()).map_err(HarnessError::io(&path))?;
    Ok(manifest)
}

fn stability(ctx: &mut Ctx<'_>, name: &str, theta: f64, alpha0: f64) {
    let config = format!(
        "cf = sigmoid-well:s=10,a=2\ntheta = {theta:?}\nalpha0 = {alpha0:?}\nrho_targ = 0.1\niters = 50\nscan = 1e-3, 10, 200\n"
    );
    let header = vec![
        format!("experiment: {name}"),
        "config:".into(),
        config.clone(),
    ];
    let cf = neograd::SigmoidWell::new(10.0, 2.0);
    ctx.attempt(name, &config, |dir| {
        let (it, map) = commands::cmd_stability(&cf, &[theta], alpha0, 0.1, 50, (1e-3, 10.0, 200))?;
        let a = dir.join(format!("{name}.csv"));
        let b = dir.join(format!("{name}_rho_map.csv"));
        commands::write_stability(&a, &header, &it)?;
        commands::write_rho_map(&b, &header, &map)?;
        Ok(vec![a, b])
    });
}

fn digits(ctx: &mut Ctx<'_>, opts: &ReproduceOptions) {
    let selector = CfSelector::Digits {
        path: opts.data.clone(),
        rows: opts.digits_rows,
    };
    let adam_alpha = opts
        .digits_adam_alpha
        .map_or("search".to_string(), |a| format!("{a:?}"));
    let iters = opts.digits_iters;
    let Some(main) = ctx.run_spec(&spec_text(&[
        "name = digits",
        &format!("cf = {selector}"),
        "theta0 = random",
        &format!("iters = {iters}"),
        "optimizers = neogradm, adam, neograd_v1",
        &format!("adam.alpha0 = {adam_alpha}"),
    ])) else {
        return;
    };
    ctx.run_spec(&spec_text(&[
        "name = digits_fest2",
        &format!("cf = {selector}"),
        "theta0 = random",
        &format!("iters = {iters}"),
        "optimizers = neogradm",
        "fest = 2",
    ]));

    let cf = match selector.build() {
        Ok(cf) => cf,
        Err(e) => {
            ctx.manifest.failures.push(("digits".into(), e.to_string()));
            return;
        }
    };
    let (Some(neo), Some(adam)) = (main.get("neogradm"), main.get("adam")) else {
        return;
    };
    let pair = format!(
        "cf = {selector}\nseed = {}\na = adam\nb = neogradm\niters = {iters}\n",
        ctx.seed
    );

    let basin_config = format!("{pair}s_range = -1, 2\npoints = 301\n");
    ctx.attempt("digits_basin", &basin_config, |dir| {
        let profile = commands::cmd_basin(
            cf.as_ref(),
            &adam.trace.final_theta,
            &neo.trace.final_theta,
            (-1.0, 2.0),
            301,
        )?;
        let p = dir.join("digits_basin.csv");
        let maxima: Vec<String> = commands::local_maxima(&profile)
            .iter()
            .map(|&i| format!("{}", profile[i].0))
            .collect();
        let header = vec![
            "experiment: digits_basin".into(),
            format!("interior local maxima at s: {}", maxima.join(" ")),
            "config:".into(),
            basin_config.clone(),
        ];
        commands::write_basin(&p, &header, &profile)?;
        Ok(vec![p])
    });

    ctx.attempt("digits_angle", &pair, |dir| {
        let (a, b) = commands::common_snapshots(&adam.trace.snapshots, &neo.trace.snapshots);
        let rows = commands::cmd_angle(&a, &b)?;
        let p = dir.join("digits_angle.csv");
        let header = vec![
            "experiment: digits_angle".into(),
            "config:".into(),
            pair.clone(),
        ];
        commands::write_angle(&p, &header, &rows)?;
        Ok(vec![p])
    });

    speedup(ctx, cf.as_ref(), &selector, opts, adam.config.alpha0);
}

fn speedup(
    ctx: &mut Ctx<'_>,
    cf: &dyn CostFunction,
    selector: &CfSelector,
    opts: &ReproduceOptions,
    adam_alpha: f64,
) {
    let seeds: Vec<u64> = (0..opts.speedup_runs as u64)
        .map(|k| ctx.seed + k)
        .collect();
    let budget = opts.speedup_budget;
    let baseline = OptimizerSpec::new(
        "adam",
        OptimizerConfig::new(Algorithm::Adam, adam_alpha, budget),
        AlphaPolicy::Fixed(adam_alpha),
    );
    let candidate = OptimizerSpec::new(
        "neogradm",
        OptimizerConfig::neogradm(1e-3, budget),
        AlphaPolicy::Start,
    );
    let levels: Vec<String> = opts
        .speedup_levels
        .iter()
        .map(|l| format!("{l:?}"))
        .collect();
    let config = format!(
        "cf = {selector}\nseeds = {seeds:?}\nlevels = {}\nbaseline:\n{}candidate:\n{}",
        levels.join(", "),
        baseline.render(),
        candidate.render()
    );
    ctx.attempt("digits_speedup", &config.clone(), |dir| {
        let curve = commands::cmd_speedup(
            cf,
            &|s| selector.random_theta0(s),
            &seeds,
            &baseline,
            &candidate,
            &opts.speedup_levels,
        )?;
        let p = dir.join("digits_speedup.csv");
        let header = vec![
            "experiment: digits_speedup".into(),
            "config:".into(),
            config,
        ];
        commands::write_speedup(&p, &header, &curve)?;
        Ok(vec![p])
    });
}
