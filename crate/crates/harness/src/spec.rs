//! Experiment specifications and their flat `key = value` text form.
//!
//! ```text
//! name = beale
//! cf = beale
//! theta0 = 4, 3
//! iters = 500
//! optimizers = neogradm, adam
//! alpha0 = start          # applies to every optimizer
//! adam.alpha0 = search    # per-optimizer override
//! ```
//!
//! An optimizer entry is either an algorithm name or `label:algorithm`, so
//! two variants of one algorithm can run side by side.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use neograd::{Algorithm, OptimizerConfig, QuarticRule, RhoTargets};

use crate::error::{HarnessError, Result};
use crate::selector::CfSelector;

/// How an optimizer's initial learning rate is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPolicy {
    Fixed(f64),
    /// Starting-α search from `θ₀` (seed 1e-8, 20 trials).
    Start,
    /// Grid search over final cost at the run's own budget.
    Search,
    /// Closed-form ideal α at `θ₀`.
    Ideal,
}

impl fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaPolicy::Fixed(a) => write!(f, "{a:?}"),
            AlphaPolicy::Start => f.write_str("start"),
            AlphaPolicy::Search => f.write_str("search"),
            AlphaPolicy::Ideal => f.write_str("ideal"),
        }
    }
}

impl FromStr for AlphaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "start" => Ok(AlphaPolicy::Start),
            "search" => Ok(AlphaPolicy::Search),
            "ideal" => Ok(AlphaPolicy::Ideal),
            v => match v.parse::<f64>() {
                Ok(a) if a > 0.0 && a.is_finite() => Ok(AlphaPolicy::Fixed(a)),
                _ => Err(format!(
                    "alpha0 must be a positive number, start, search or ideal, got `{v}`"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Theta0Policy {
    Explicit(Vec<f64>),
    /// Drawn from the run seed, see [`CfSelector::random_theta0`].
    Seeded,
}

impl Theta0Policy {
    pub fn resolve(&self, cf: &CfSelector, seed: u64) -> Vec<f64> {
        match self {
            Theta0Policy::Explicit(t) => t.clone(),
            Theta0Policy::Seeded => cf.random_theta0(seed),
        }
    }
}

impl fmt::Display for Theta0Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta0Policy::Seeded => f.write_str("random"),
            Theta0Policy::Explicit(t) => f.write_str(&join_f64(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub label: String,
    pub config: OptimizerConfig,
    pub alpha: AlphaPolicy,
    /// Grid for [`AlphaPolicy::Search`].
    pub grid: Vec<f64>,
}

impl OptimizerSpec {
    pub fn new(label: impl Into<String>, config: OptimizerConfig, alpha: AlphaPolicy) -> Self {
        Self {
            label: label.into(),
            config,
            alpha,
            grid: default_alpha_grid(),
        }
    }

    /// `key = value` lines for every setting, prefixed with the label.
    pub fn render(&self) -> String {
        let c = &self.config;
        let l = &self.label;
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{l}.{k} = {v}\n"));
        line("alpha0", self.alpha.to_string());
        line("engine", c.engine.to_string());
        line("beta", format!("{:?}", c.beta));
        line("beta1", format!("{:?}", c.beta1));
        line("beta2", format!("{:?}", c.beta2));
        line("eps", format!("{:?}", c.eps));
        line("fest", c.fest.to_string());
        line("rho_min", format!("{:?}", c.targets.rho_min));
        line("rho_targ", format!("{:?}", c.targets.rho_targ));
        line("rho_max", format!("{:?}", c.targets.rho_max));
        line("quartic_rule", quartic_rule_str(c.quartic_rule).into());
        line(
            "stall_tol",
            c.stall_tol.map_or("none".into(), |t| format!("{t:?}")),
        );
        line("snapshot_stride", c.snapshot_stride.to_string());
        if self.alpha == AlphaPolicy::Search {
            line("grid", join_f64(&self.grid));
        }
        s
    }
}

/// 13 points, log-spaced by half decades from 1e-6 to 1.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..13)
        .map(|k: i32| {
            let half = if k % 2 == 1 { 10f64.sqrt() } else { 1.0 };
            10f64.powi(-6 + k / 2) * half
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub cf: CfSelector,
    pub theta0: Theta0Policy,
    pub iters: usize,
    pub optimizers: Vec<OptimizerSpec>,
    /// Overrides the command-line seed when set.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Also write θ snapshots per optimizer.
    pub snapshots: bool,
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        text.parse()
    }

    /// Canonical text; parses back to an equal spec.
    pub fn render(&self) -> String {
        let mut s = format!(
            "name = {}\ncf = {}\ntheta0 = {}\niters = {}\n",
            self.name, self.cf, self.theta0, self.iters
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed = {seed}\n"));
        }
        if let Some(dir) = &self.out_dir {
            s.push_str(&format!("out_dir = {}\n", dir.display()));
        }
        s.push_str(&format!("snapshots = {}\n", self.snapshots));
        let entries: Vec<String> = self
            .optimizers
            .iter()
            .map(|o| format!("{}:{}", o.label, o.config.algorithm))
            .collect();
        s.push_str(&format!("optimizers = {}\n", entries.join(", ")));
        for o in &self.optimizers {
            s.push_str(&o.render());
        }
        s
    }
}

const OPTIMIZER_KEYS: [&str; 14] = [
    "alpha0",
    "engine",
    "beta",
    "beta1",
    "beta2",
    "eps",
    "fest",
    "rho_min",
    "rho_targ",
    "rho_max",
    "quartic_rule",
    "stall_tol",
    "snapshot_stride",
    "grid",
];

fn quartic_rule_str(r: QuarticRule) -> &'static str {
    match r {
        QuarticRule::Exact => "exact",
        QuarticRule::LeadingOrder => "leading_order",
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", x.trim()))
        })
        .collect()
}

fn apply_optimizer_key(
    o: &mut OptimizerSpec,
    key: &str,
    v: &str,
) -> std::result::Result<(), String> {
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| format!("`{v}` is not a number"))
    };
    let c = &mut o.config;
    match key {
        "alpha0" => o.alpha = v.parse()?,
        "engine" => c.engine = v.parse().map_err(|e: neograd::OptimError| e.to_string())?,
        "beta" => c.beta = num(v)?,
        "beta1" => c.beta1 = num(v)?,
        "beta2" => c.beta2 = num(v)?,
        "eps" => c.eps = num(v)?,
        "fest" => c.fest = v.parse().map_err(|e: neograd::OptimError| e.to_string())?,
        "rho_min" => c.targets.rho_min = num(v)?,
        "rho_targ" => c.targets.rho_targ = num(v)?,
        "rho_max" => c.targets.rho_max = num(v)?,
        "quartic_rule" => {
            c.quartic_rule = match v {
                "exact" => QuarticRule::Exact,
                "leading_order" => QuarticRule::LeadingOrder,
                _ => {
                    return Err(format!(
                        "quartic_rule must be exact or leading_order, got `{v}`"
                    ))
                }
            }
        }
        "stall_tol" => {
            c.stall_tol = match v {
                "none" => None,
                _ => Some(num(v)?),
            }
        }
        "snapshot_stride" => {
            c.snapshot_stride = v
                .parse()
                .map_err(|_| format!("snapshot_stride must be a positive count, got `{v}`"))?
        }
        "grid" => {
            let grid = parse_list(v)?;
            if grid.is_empty() || grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err("grid must be a nonempty list of positive numbers".into());
            }
            o.grid = grid;
        }
        _ => return Err(format!("unknown optimizer setting `{key}`")),
    }
    Ok(())
}

impl FromStr for ExperimentSpec {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| HarnessError::Spec { line, msg };
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key = value, got `{content}`")))?;
            let k = k.trim().to_string();
            if entries
                .insert(k.clone(), (line, v.trim().to_string()))
                .is_some()
            {
                return Err(err(line, format!("duplicate key `{k}`")));
            }
        }
        let mut take = |k: &str| entries.remove(k);
        let required = |k: &str, e: Option<(usize, String)>| {
            e.ok_or_else(|| err(0, format!("missing required key `{k}`")))
        };

        let name = required("name", take("name"))?.1;
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(err(
                0,
                format!("name `{name}` must be a nonempty file-name stem"),
            ));
        }
        let (cf_line, cf_text) = required("cf", take("cf"))?;
        let cf: CfSelector = cf_text
            .parse()
            .map_err(|e: HarnessError| err(cf_line, e.to_string()))?;
        let theta0 = match take("theta0") {
            None => Theta0Policy::Seeded,
            Some((_, v)) if v == "random" => Theta0Policy::Seeded,
            Some((line, v)) => {
                let t = parse_list(&v).map_err(|m| err(line, format!("theta0: {m}")))?;
                if t.len() != cf.dim() {
                    return Err(err(
                        line,
                        format!(
                            "theta0 has {} entries but {cf} has dimension {}",
                            t.len(),
                            cf.dim()
                        ),
                    ));
                }
                Theta0Policy::Explicit(t)
            }
        };
        let (iters_line, iters_text) = required("iters", take("iters"))?;
        let iters = iters_text.parse().map_err(|_| {
            err(
                iters_line,
                format!("iters must be a count, got `{iters_text}`"),
            )
        })?;
        let seed = take("seed")
            .map(|(line, v)| {
                v.parse()
                    .map_err(|_| err(line, format!("seed must be an integer, got `{v}`")))
            })
            .transpose()?;
        let out_dir = take("out_dir").map(|(_, v)| PathBuf::from(v));
        let snapshots = match take("snapshots") {
            None => false,
            Some((_, v)) if v == "true" => true,
            Some((_, v)) if v == "false" => false,
            Some((line, v)) => {
                return Err(err(
                    line,
                    format!("snapshots must be true or false, got `{v}`"),
                ))
            }
        };

        let (opt_line, opt_text) = required("optimizers", take("optimizers"))?;
        let mut optimizers = Vec::new();
        for entry in opt_text.split(',').map(str::trim) {
            let (label, alg) = entry.split_once(':').unwrap_or((entry, entry));
            let algorithm: Algorithm = alg
                .trim()
                .parse()
                .map_err(|e: neograd::OptimError| err(opt_line, e.to_string()))?;
            let label = label.trim().to_string();
            if label.is_empty() || label.contains(['.', '/', '\\']) {
                return Err(err(opt_line, format!("bad optimizer label `{label}`")));
            }
            if optimizers.iter().any(|o: &OptimizerSpec| o.label == label) {
                return Err(err(
                    opt_line,
                    format!("duplicate optimizer label `{label}`"),
                ));
            }
            let mut config = OptimizerConfig::new(algorithm, 1e-3, iters);
            config.targets = RhoTargets::default();
            let alpha = match algorithm {
                Algorithm::IdealGd => AlphaPolicy::Ideal,
                a if a.is_adaptive() => AlphaPolicy::Start,
                _ => AlphaPolicy::Search,
            };
            optimizers.push(OptimizerSpec::new(label, config, alpha));
        }

        // global optimizer settings first, then per-label overrides
        for key in OPTIMIZER_KEYS {
            if let Some((line, v)) = take(key) {
                for o in optimizers.iter_mut() {
                    apply_optimizer_key(o, key, &v).map_err(|m| err(line, m))?;
                }
            }
        }
        for (key, (line, v)) in std::mem::take(&mut entries) {
            let Some((label, k)) = key.split_once('.') else {
                return Err(err(line, format!("unknown key `{key}`")));
            };
            let o = optimizers
                .iter_mut()
                .find(|o| o.label == label)
                .ok_or_else(|| err(line, format!("`{key}` names no listed optimizer")))?;
            apply_optimizer_key(o, k, &v).map_err(|m| err(line, m))?;
        }
        for o in &optimizers {
            o.config
                .validate()
                .map_err(|e| err(opt_line, format!("{}: {e}", o.label)))?;
        }
        Ok(ExperimentSpec {
            name,
            cf,
            theta0,
            iters,
            optimizers,
            seed,
            out_dir,
            snapshots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use neograd::FestOption;

    const BEALE: &str = "
        # a comment
        name = beale
        cf = beale
        theta0 = 4, 3
        iters = 500
        optimizers = neogradm, adam, fest2:neogradm
        beta = 0.8
        adam.alpha0 = 0.01
        fest2.fest = 2
        neogradm.beta = 0.9
    ";

    #[test]
    fn parses_globals_and_overrides() {
        let spec: ExperimentSpec = BEALE.parse().unwrap();
        assert_eq!(spec.theta0, Theta0Policy::Explicit(vec![4.0, 3.0]));
        let [neo, adam, fest2] = &spec.optimizers[..] else {
            panic!()
        };
        assert_eq!(neo.config.beta, 0.9);
        assert_eq!(fest2.config.beta, 0.8);
        assert_eq!(neo.alpha, AlphaPolicy::Start);
        assert_eq!(adam.alpha, AlphaPolicy::Fixed(0.01));
        assert_eq!(fest2.config.fest, FestOption::NegAlphaMSquared);
        assert_eq!(fest2.config.algorithm, Algorithm::NeogradHybrid);
        assert!(spec.optimizers.iter().all(|o| o.config.max_iters == 500));
    }

    #[test]
    fn render_roundtrips() {
        let spec: ExperimentSpec = BEALE.parse().unwrap();
        let again: ExperimentSpec = spec.render().parse().unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.render(), spec.render());
    }

    #[test]
    fn default_grid() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[12], 1.0);
        assert!(g
            .windows(2)
            .all(|w| (w[1] / w[0] - 10f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            (
                "name = x\ncf = beale\niters = 5\noptimizers = adam\nbogus = 1\n",
                5,
            ),
            ("name = x\ncf = beale\niters = q\noptimizers = adam\n", 3),
            (
                "name = x\ncf = beale\ntheta0 = 1\niters = 5\noptimizers = adam\n",
                3,
            ),
            (
                "name = x\ncf = beale\niters = 5\noptimizers = adam\nadam.alpha0 = -1\n",
                5,
            ),
            ("name = x\ncf = beale\niters = 5\noptimizers = sgd\n", 4),
            (
                "name = x\ncf = beale\niters = 5\noptimizers = adam\nneogradm.beta = 0.5\n",
                5,
            ),
            (
                "name = x\ncf = beale\niters = 5\noptimizers = adam\nbeta1 = 1.5\n",
                4,
            ),
        ];
        for (text, want) in cases {
            match text.parse::<ExperimentSpec>() {
                Err(HarnessError::Spec { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_keys() {
        let e = "cf = beale\niters = 1\noptimizers = adam"
            .parse::<ExperimentSpec>()
            .unwrap_err();
        assert!(e.to_string().contains("name"));
        assert_eq!(e.exit_code(), 1);
    }
}
