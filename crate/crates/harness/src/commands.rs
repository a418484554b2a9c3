//! Experiment commands. Each `cmd_*` computes its result in memory; the
//! matching `write_*` helper turns it into a CSV artifact.

use std::fmt;
use std::path::{Path, PathBuf};

use neograd::optim::run_until;
use neograd::rho::{compute_rho, get_starting_alpha, RhoError, RhoTriple};
use neograd::{run, CostFunction, ExperimentTrace, OptimizerConfig, StopReason};

use crate::csvio::{self, fmt_f64};
use crate::error::{HarnessError, Result};
use crate::spec::{AlphaPolicy, ExperimentSpec, OptimizerSpec};

pub const ALPHA_SEED: f64 = 1e-8;
pub const START_TRIALS: usize = 20;

// ---------------------------------------------------------------- alpha search

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub final_f: f64,
    /// Finite final cost no higher than the starting cost.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSearch {
    pub best_alpha: f64,
    pub best_f: f64,
    pub points: Vec<AlphaPoint>,
}

/// Runs `base` once per grid α and returns the α with the lowest final cost.
/// Ties go to the smaller α; runs that blow up or end above `f(θ₀)` are
/// excluded.
pub fn cmd_alpha_search(
    cf: &dyn CostFunction,
    theta0: &[f64],
    grid: &[f64],
    base: &OptimizerConfig,
) -> Result<AlphaSearch> {
    if grid.is_empty() {
        return Err(HarnessError::Usage("α grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let f0 = cf.eval(theta0);
    let mut points = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for alpha in sorted {
        let trace = run(
            cf,
            &OptimizerConfig {
                alpha0: alpha,
                ..base.clone()
            },
            theta0,
        )?;
        let final_f = trace.final_f();
        let stable = final_f.is_finite() && trace.stop != StopReason::NonFinite && final_f <= f0;
        if stable && best.map_or(true, |(_, f)| final_f < f) {
            best = Some((alpha, final_f));
        }
        points.push(AlphaPoint {
            alpha,
            final_f,
            stable,
        });
    }
    let (best_alpha, best_f) = best.ok_or(HarnessError::NoStableAlpha)?;
    Ok(AlphaSearch {
        best_alpha,
        best_f,
        points,
    })
}

pub fn write_alpha_search(path: &Path, comments: &[String], s: &AlphaSearch) -> Result<()> {
    let mut comments = comments.to_vec();
    comments.push(format!("best_alpha: {}", fmt_f64(s.best_alpha)));
    csvio::write_table(
        path,
        &comments,
        &["alpha", "final_f", "log10_final_f", "stable"],
        s.points.iter().map(|p| {
            vec![
                fmt_f64(p.alpha),
                fmt_f64(p.final_f),
                fmt_f64(p.final_f.log10()),
                u8::from(p.stable).to_string(),
            ]
        }),
    )
}

// ---------------------------------------------------------------- runs

/// The concrete starting α for an optimizer spec at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAlpha {
    pub alpha: f64,
    pub note: String,
    pub search: Option<AlphaSearch>,
}

pub fn resolve_alpha(
    cf: &dyn CostFunction,
    theta0: &[f64],
    spec: &OptimizerSpec,
) -> Result<ResolvedAlpha> {
    let plain = |alpha, note: String| ResolvedAlpha {
        alpha,
        note,
        search: None,
    };
    Ok(match spec.alpha {
        AlphaPolicy::Fixed(a) => plain(a, "fixed".into()),
        AlphaPolicy::Start => {
            let s = get_starting_alpha(cf, theta0, ALPHA_SEED, &spec.config.targets, START_TRIALS)?;
            plain(
                s.alpha,
                format!(
                    "starting search: accepted={} rho={} trials={}",
                    s.accepted,
                    fmt_f64(s.rho),
                    s.trials
                ),
            )
        }
        AlphaPolicy::Ideal => {
            let form = cf
                .closed_form()
                .ok_or_else(|| neograd::OptimError::NotClosedForm(cf.name()))?;
            let a = form.ideal_alpha(
                theta0,
                spec.config.targets.rho_targ,
                spec.config.quartic_rule,
            )?;
            plain(a, format!("ideal at theta0 for {form}"))
        }
        AlphaPolicy::Search => {
            let s = cmd_alpha_search(cf, theta0, &spec.grid, &spec.config)?;
            ResolvedAlpha {
                alpha: s.best_alpha,
                note: format!("grid search: best final f {}", fmt_f64(s.best_f)),
                search: Some(s),
            }
        }
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub config: OptimizerConfig,
    pub alpha_note: String,
    pub search: Option<AlphaSearch>,
    pub trace: ExperimentTrace,
}

pub fn run_optimizer(
    cf: &dyn CostFunction,
    theta0: &[f64],
    spec: &OptimizerSpec,
    seed: u64,
    stop: impl FnMut(&neograd::StepDiagnostics) -> bool,
) -> Result<RunOutput> {
    let resolved = resolve_alpha(cf, theta0, spec)?;
    let config = OptimizerConfig {
        alpha0: resolved.alpha,
        seed,
        ..spec.config.clone()
    };
    let trace = run_until(cf, &config, theta0, stop)?;
    Ok(RunOutput {
        label: spec.label.clone(),
        config,
        alpha_note: resolved.note,
        search: resolved.search,
        trace,
    })
}

/// Comment lines written above every trace.
pub fn run_header(spec: &ExperimentSpec, seed: u64, out: &RunOutput) -> Vec<String> {
    let c = &out.config;
    vec![
        format!("experiment: {}", spec.name),
        format!("seed: {seed}"),
        format!("cf: {}", spec.cf),
        format!("theta0: {}", spec.theta0),
        format!("optimizer: {}", out.label),
        format!("algorithm: {}", c.algorithm),
        format!("alpha0: {} ({})", fmt_f64(c.alpha0), out.alpha_note),
        format!("max_iters: {}", c.max_iters),
        format!("f0: {}", fmt_f64(out.trace.f0)),
        format!("stop: {}", out.trace.stop),
        "config:".into(),
        spec.render(),
    ]
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub theta0: Vec<f64>,
    pub runs: Vec<RunOutput>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn get(&self, label: &str) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// Runs every optimizer of `spec` from a shared `θ₀` and writes, per
/// optimizer, `<name>_<label>.csv` (the trace), `<name>_<label>_theta.csv`
/// (final θ), and when requested the snapshot and α-search tables.
pub fn cmd_run(spec: &ExperimentSpec, seed: u64, out_dir: &Path) -> Result<RunReport> {
    let seed = spec.seed.unwrap_or(seed);
    let cf = spec.cf.build()?;
    let theta0 = spec.theta0.resolve(&spec.cf, seed);
    cf.check_dim(theta0.len())?;
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for o in &spec.optimizers {
        let out = run_optimizer(cf.as_ref(), &theta0, o, seed, |_| false)?;
        let header = run_header(spec, seed, &out);
        let stem = format!("{}_{}", spec.name, out.label);
        let mut write = |suffix: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
            let path = out_dir.join(format!("{stem}{suffix}.csv"));
            f(&path)?;
            files.push(path);
            Ok(())
        };
        write("", &|p| csvio::write_trace(p, &header, &out.trace))?;
        write("_theta", &|p| {
            csvio::write_theta(p, &header, &out.trace.final_theta)
        })?;
        if spec.snapshots {
            write("_snapshots", &|p| {
                csvio::write_snapshots(p, &header, &out.trace.snapshots)
            })?;
        }
        if let Some(s) = &out.search {
            write("_alpha_search", &|p| write_alpha_search(p, &header, s))?;
        }
        runs.push(out);
    }
    Ok(RunReport {
        theta0,
        runs,
        files,
    })
}

// ---------------------------------------------------------------- speedup

/// Speedup per level, `t1` for the baseline and `t2` for the candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    /// log₁₀ of the cost level.
    pub level: f64,
    /// Mean first-crossing iteration over the runs that reached the level.
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub reached1: usize,
    pub reached2: usize,
}

impl SpeedupRow {
    /// `t1/t2`, baseline iterations per candidate iteration.
    pub fn speedup(&self) -> Option<f64> {
        Some(self.t1? / self.t2?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupCurve {
    pub rows: Vec<SpeedupRow>,
    /// Per seed, the crossing iterations of baseline and candidate per level.
    pub crossings: Vec<(u64, Vec<Option<usize>>, Vec<Option<usize>>)>,
}

/// Log₁₀ levels −2, −3, …, −12.
pub fn default_levels() -> Vec<f64> {
    (2..=12).map(|k| -(k as f64)).collect()
}

fn crossings(
    cf: &dyn CostFunction,
    theta0: &[f64],
    spec: &OptimizerSpec,
    seed: u64,
    levels: &[f64],
) -> Result<Vec<Option<usize>>> {
    let deepest = 10f64.powf(levels.iter().copied().fold(f64::INFINITY, f64::min));
    let out = run_optimizer(cf, theta0, spec, seed, |d| d.f_new < deepest)?;
    Ok(levels
        .iter()
        .map(|l| out.trace.first_below(10f64.powf(*l)))
        .collect())
}

/// First iteration strictly below each level, for baseline and candidate,
/// averaged over one run per seed. Each run stops once it passes the deepest
/// level.
pub fn cmd_speedup(
    cf: &dyn CostFunction,
    theta0: &dyn Fn(u64) -> Vec<f64>,
    seeds: &[u64],
    baseline: &OptimizerSpec,
    candidate: &OptimizerSpec,
    levels: &[f64],
) -> Result<SpeedupCurve> {
    if seeds.is_empty() {
        return Err(HarnessError::Usage("speedup needs at least one run".into()));
    }
    if levels.is_empty()
        || levels.windows(2).any(|w| w[1] > w[0])
        || levels.iter().any(|l| !l.is_finite())
    {
        return Err(HarnessError::Usage(
            "levels must be finite and nonincreasing".into(),
        ));
    }
    let mut per_seed = Vec::new();
    for &seed in seeds {
        let t0 = theta0(seed);
        let b = crossings(cf, &t0, baseline, seed, levels)?;
        let c = crossings(cf, &t0, candidate, seed, levels)?;
        per_seed.push((seed, b, c));
    }
    let mean = |xs: Vec<usize>| {
        (!xs.is_empty()).then(|| xs.iter().sum::<usize>() as f64 / xs.len() as f64)
    };
    let rows = levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let b: Vec<usize> = per_seed.iter().filter_map(|(_, b, _)| b[j]).collect();
            let c: Vec<usize> = per_seed.iter().filter_map(|(_, _, c)| c[j]).collect();
            SpeedupRow {
                level,
                reached1: b.len(),
                reached2: c.len(),
                t1: mean(b),
                t2: mean(c),
            }
        })
        .collect();
    Ok(SpeedupCurve {
        rows,
        crossings: per_seed,
    })
}

pub fn write_speedup(path: &Path, comments: &[String], curve: &SpeedupCurve) -> Result<()> {
    let opt = |x: Option<f64>| x.map_or("unreachable".to_string(), fmt_f64);
    csvio::write_table(
        path,
        comments,
        &[
            "level",
            "t1",
            "t2",
            "speedup",
            "runs_reached_1",
            "runs_reached_2",
        ],
        curve.rows.iter().map(|r| {
            vec![
                fmt_f64(r.level),
                opt(r.t1),
                opt(r.t2),
                opt(r.speedup()),
                r.reached1.to_string(),
                r.reached2.to_string(),
            ]
        }),
    )
}

// ---------------------------------------------------------------- basin

/// `f((1−s)·θ_a + s·θ_b)` at `n_points` uniform values of `s` over `s_range`.
pub fn cmd_basin(
    cf: &dyn CostFunction,
    theta_a: &[f64],
    theta_b: &[f64],
    s_range: (f64, f64),
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if theta_a.len() != theta_b.len() {
        return Err(neograd::CostError::DimensionMismatch {
            name: "basin endpoints".into(),
            expected: theta_a.len(),
            got: theta_b.len(),
        }
        .into());
    }
    cf.check_dim(theta_a.len())?;
    if n_points < 2 {
        return Err(HarnessError::Usage("basin needs at least 2 points".into()));
    }
    let (lo, hi) = s_range;
    let mut phi = vec![0.0; theta_a.len()];
    Ok((0..n_points)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
            for ((p, a), b) in phi.iter_mut().zip(theta_a).zip(theta_b) {
                *p = (1.0 - s) * a + s * b;
            }
            (s, cf.eval(&phi))
        })
        .collect())
}

/// Indices of strict interior local maxima of a profile.
pub fn local_maxima(profile: &[(f64, f64)]) -> Vec<usize> {
    (1..profile.len().saturating_sub(1))
        .filter(|&i| profile[i].1 > profile[i - 1].1 && profile[i].1 > profile[i + 1].1)
        .collect()
}

pub fn write_basin(path: &Path, comments: &[String], profile: &[(f64, f64)]) -> Result<()> {
    csvio::write_table(
        path,
        comments,
        &["s", "f", "log10_f"],
        profile
            .iter()
            .map(|(s, f)| vec![fmt_f64(*s), fmt_f64(*f), fmt_f64(f.log10())]),
    )
}

// ---------------------------------------------------------------- angle

/// Angle between two vectors in degrees; `None` if either has zero norm.
pub fn angle_degrees(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 == 0.0 || nb2 == 0.0 {
        return None;
    }
    // sqrt of the product keeps cos exactly 1 for identical vectors
    Some(
        (dot / (na2 * nb2).sqrt())
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees(),
    )
}

pub fn cmd_angle(
    a: &[(usize, Vec<f64>)],
    b: &[(usize, Vec<f64>)],
) -> Result<Vec<(usize, Option<f64>)>> {
    if a.len() != b.len() || a.iter().zip(b).any(|((i, _), (j, _))| i != j) {
        return Err(HarnessError::Usage(
            "angle needs snapshots at matching iterations".into(),
        ));
    }
    a.iter()
        .zip(b)
        .map(|((it, ta), (_, tb))| {
            if ta.len() != tb.len() {
                return Err(HarnessError::Usage(format!(
                    "snapshot {it}: dimensions {} and {} differ",
                    ta.len(),
                    tb.len()
                )));
            }
            Ok((*it, angle_degrees(ta, tb)))
        })
        .collect()
}

/// Snapshot pairs at the iterations both sequences share.
pub fn common_snapshots(
    a: &[(usize, Vec<f64>)],
    b: &[(usize, Vec<f64>)],
) -> (Vec<(usize, Vec<f64>)>, Vec<(usize, Vec<f64>)>) {
    a.iter()
        .filter_map(|(i, ta)| {
            b.iter()
                .find(|(j, _)| j == i)
                .map(|(_, tb)| ((*i, ta.clone()), (*i, tb.clone())))
        })
        .unzip()
}

pub fn write_angle(path: &Path, comments: &[String], rows: &[(usize, Option<f64>)]) -> Result<()> {
    csvio::write_table(
        path,
        comments,
        &["iter", "angle_deg"],
        rows.iter()
            .map(|(i, a)| vec![i.to_string(), a.map_or("undefined".to_string(), fmt_f64)]),
    )
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Convergent,
    Divergent,
    MaxIters,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Convergent => "convergent",
            Verdict::Divergent => "divergent",
            Verdict::MaxIters => "max-iters",
        })
    }
}

/// Distance below which `|ρ − ρ_targ|/ρ_targ` counts as converged outright.
pub const CONVERGED_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityIterates {
    pub theta_probe: Vec<f64>,
    pub rho_targ: f64,
    /// `(α_k, ρ_k)`, with `α_{k+1} = α_k·ρ_targ/ρ_k`.
    pub iterates: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoMapPoint {
    pub alpha: f64,
    pub rho: f64,
    pub rho_next: f64,
}

/// ρ of a plain gradient step of size `alpha` from a fixed point.
pub fn probe_rho(cf: &dyn CostFunction, theta: &[f64], alpha: f64) -> Result<f64, RhoError> {
    let (f0, g) = cf.eval_grad(theta);
    probe_rho_with(cf, theta, f0, &g, alpha)
}

fn probe_rho_with(
    cf: &dyn CostFunction,
    theta: &[f64],
    f0: f64,
    g: &[f64],
    alpha: f64,
) -> Result<f64, RhoError> {
    let step: Vec<f64> = g.iter().map(|gi| -alpha * gi).collect();
    let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, d)| t + d).collect();
    compute_rho(&RhoTriple::from_step(f0, cf.eval(&trial), g, &step))
}

/// Repeated adaptation-formula updates at a fixed θ, using `ρ_targ` directly.
///
/// Divergent once `|ρ − ρ_targ|` grows three times in a row or ρ becomes
/// non-finite. Convergent once it falls below [`CONVERGED_RTOL`] relative, or
/// if the last three iterates shrink and end within 10% of the target.
pub fn stability_iterates(
    cf: &dyn CostFunction,
    theta: &[f64],
    alpha0: f64,
    rho_targ: f64,
    n_iter: usize,
) -> Result<StabilityIterates> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(RhoError::BadAlpha(alpha0).into());
    }
    if !(rho_targ > 0.0 && rho_targ.is_finite()) {
        return Err(RhoError::BadTarget(rho_targ).into());
    }
    let (f0, g) = cf.eval_grad(theta);
    if g.iter().all(|&x| x == 0.0) {
        return Err(RhoError::StationaryStart.into());
    }
    let mut iterates = Vec::new();
    let mut dist: Vec<f64> = Vec::new();
    let mut alpha = alpha0;
    let mut verdict = None;
    for _ in 0..n_iter {
        let rho = match probe_rho_with(cf, theta, f0, &g, alpha) {
            Ok(r) => r,
            Err(RhoError::NonFinite) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        iterates.push((alpha, rho));
        let d = (rho - rho_targ).abs();
        dist.push(d);
        let k = dist.len();
        if !d.is_finite() {
            verdict = Some(Verdict::Divergent);
        } else if d <= CONVERGED_RTOL * rho_targ {
            verdict = Some(Verdict::Convergent);
        } else if k >= 4
            && dist[k - 4] < dist[k - 3]
            && dist[k - 3] < dist[k - 2]
            && dist[k - 2] < d
        {
            verdict = Some(Verdict::Divergent);
        }
        if verdict.is_some() {
            break;
        }
        if rho == 0.0 {
            return Err(RhoError::DegenerateStep { denominator: 0.0 }.into());
        }
        alpha *= rho_targ / rho;
    }
    let verdict = verdict.unwrap_or_else(|| {
        let k = dist.len();
        if k >= 3
            && dist[k - 3] > dist[k - 2]
            && dist[k - 2] > dist[k - 1]
            && dist[k - 1] <= 0.1 * rho_targ
        {
            Verdict::Convergent
        } else {
            Verdict::MaxIters
        }
    });
    Ok(StabilityIterates {
        theta_probe: theta.to_vec(),
        rho_targ,
        iterates,
        verdict,
    })
}

/// `ρ_next` against `ρ` for `n` log-spaced α over `alpha_range`, where
/// `ρ_next` is measured at `α·ρ_targ/ρ`.
pub fn rho_map(
    cf: &dyn CostFunction,
    theta: &[f64],
    rho_targ: f64,
    alpha_range: (f64, f64),
    n: usize,
) -> Result<Vec<RhoMapPoint>> {
    let (lo, hi) = alpha_range;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(HarnessError::Usage(
            "α scan needs 0 < lo < hi and at least 2 points".into(),
        ));
    }
    let (f0, g) = cf.eval_grad(theta);
    let (llo, lhi) = (lo.log10(), hi.log10());
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = 10f64.powf(llo + (lhi - llo) * i as f64 / (n - 1) as f64);
        let rho = probe_rho_with(cf, theta, f0, &g, alpha).unwrap_or(f64::NAN);
        let rho_next = if rho > 0.0 && rho.is_finite() {
            probe_rho_with(cf, theta, f0, &g, alpha * rho_targ / rho).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        points.push(RhoMapPoint {
            alpha,
            rho,
            rho_next,
        });
    }
    Ok(points)
}

pub fn cmd_stability(
    cf: &dyn CostFunction,
    theta: &[f64],
    alpha0: f64,
    rho_targ: f64,
    n_iter: usize,
    alpha_scan: (f64, f64, usize),
) -> Result<(StabilityIterates, Vec<RhoMapPoint>)> {
    let it = stability_iterates(cf, theta, alpha0, rho_targ, n_iter)?;
    let map = rho_map(
        cf,
        theta,
        rho_targ,
        (alpha_scan.0, alpha_scan.1),
        alpha_scan.2,
    )?;
    Ok((it, map))
}

pub fn write_stability(path: &Path, comments: &[String], s: &StabilityIterates) -> Result<()> {
    let mut comments = comments.to_vec();
    comments.push(format!("verdict: {}", s.verdict));
    comments.push(format!("rho_targ: {}", fmt_f64(s.rho_targ)));
    csvio::write_table(
        path,
        &comments,
        &["k", "alpha", "rho", "abs_rho_minus_targ"],
        s.iterates.iter().enumerate().map(|(k, (a, r))| {
            vec![
                k.to_string(),
                fmt_f64(*a),
                fmt_f64(*r),
                fmt_f64((r - s.rho_targ).abs()),
            ]
        }),
    )
}

pub fn write_rho_map(path: &Path, comments: &[String], map: &[RhoMapPoint]) -> Result<()> {
    csvio::write_table(
        path,
        comments,
        &["alpha", "rho", "rho_next"],
        map.iter()
            .map(|p| vec![fmt_f64(p.alpha), fmt_f64(p.rho), fmt_f64(p.rho_next)]),
    )
}
