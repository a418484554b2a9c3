//! Textual cost-function selectors such as `quartic:c=1,n=1` or
//! `digits:path=data/digits_train.csv`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use neograd::mlp::{self, CrossEntropy, InitScale, MlpArchitecture};
use neograd::{Beale, CostFunction, Ellipse, Quadratic, Quartic, SigmoidWell};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

pub const DEFAULT_DIGITS_PATH: &str = "data/digits_train.csv";

#[derive(Debug, Clone, PartialEq)]
pub enum CfSelector {
    Quadratic {
        c: f64,
        n: usize,
    },
    Quartic {
        c: f64,
        n: usize,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    SigmoidWell {
        s: f64,
        a: f64,
    },
    Beale,
    /// Cross entropy of the digits MLP; `rows` keeps only the first rows.
    Digits {
        path: PathBuf,
        rows: Option<usize>,
    },
}

impl CfSelector {
    pub fn build(&self) -> Result<Box<dyn CostFunction>> {
        Ok(match self {
            CfSelector::Quadratic { c, .. } => Box::new(Quadratic::new(*c)?),
            CfSelector::Quartic { c, .. } => Box::new(Quartic::new(*c)?),
            CfSelector::Ellipse { a, b } => Box::new(Ellipse::new(*a, *b)?),
            CfSelector::SigmoidWell { s, a } => Box::new(SigmoidWell::new(*s, *a)),
            CfSelector::Beale => Box::new(Beale),
            CfSelector::Digits { path, rows } => {
                if !path.exists() {
                    return Err(HarnessError::MissingDataset(path.clone()));
                }
                let mut data = mlp::load_digits_csv(path)?;
                if let Some(n) = rows {
                    data = mlp::head(&data, *n)?;
                }
                Box::new(CrossEntropy::digits(data))
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CfSelector::Quadratic { n, .. } | CfSelector::Quartic { n, .. } => *n,
            CfSelector::Ellipse { .. } | CfSelector::Beale => 2,
            CfSelector::SigmoidWell { .. } => 1,
            CfSelector::Digits { .. } => MlpArchitecture::DIGITS.param_count(),
        }
    }

    /// Seeded starting point: Glorot weights for the digits network, uniform
    /// in `[-1, 1]` per coordinate otherwise.
    pub fn random_theta0(&self, seed: u64) -> Vec<f64> {
        match self {
            CfSelector::Digits { .. } => {
                mlp::init_params(&MlpArchitecture::DIGITS, seed, InitScale::Glorot)
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = Uniform::new_inclusive(-1.0, 1.0);
                (0..self.dim()).map(|_| u.sample(&mut rng)).collect()
            }
        }
    }
}

impl fmt::Display for CfSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfSelector::Quadratic { c, n } => write!(f, "quadratic:c={c},n={n}"),
            CfSelector::Quartic { c, n } => write!(f, "quartic:c={c},n={n}"),
            CfSelector::Ellipse { a, b } => write!(f, "ellipse:a={a},b={b}"),
            CfSelector::SigmoidWell { s, a } => write!(f, "sigmoid-well:s={s},a={a}"),
            CfSelector::Beale => f.write_str("beale"),
            CfSelector::Digits { path, rows } => {
                write!(f, "digits:path={}", path.display())?;
                match rows {
                    Some(r) => write!(f, ",rows={r}"),
                    None => Ok(()),
                }
            }
        }
    }
}

impl FromStr for CfSelector {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let usage = |msg: String| HarnessError::Usage(msg);
        let (name, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut params = BTreeMap::new();
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("cost function parameter `{kv}` is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| params.remove(key);
        let num = |key: &str, v: Option<String>, default: f64| -> Result<f64> {
            v.map_or(Ok(default), |v| {
                v.parse().map_err(|_| {
                    usage(format!(
                        "cost function parameter {key}=`{v}` is not a number"
                    ))
                })
            })
        };
        let count = |key: &str, v: Option<String>, default: usize| -> Result<usize> {
            v.map_or(Ok(default), |v| {
                v.parse().map_err(|_| {
                    usage(format!(
                        "cost function parameter {key}=`{v}` is not a count"
                    ))
                })
            })
        };
        let sel = match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "quadratic" => CfSelector::Quadratic {
                c: num("c", take("c"), 1.0)?,
                n: count("n", take("n"), 1)?,
            },
            "quartic" => CfSelector::Quartic {
                c: num("c", take("c"), 1.0)?,
                n: count("n", take("n"), 1)?,
            },
            "ellipse" => CfSelector::Ellipse {
                a: num("a", take("a"), 1.0)?,
                b: num("b", take("b"), 1.0)?,
            },
            "sigmoid-well" => CfSelector::SigmoidWell {
                s: num("s", take("s"), 10.0)?,
                a: num("a", take("a"), 2.0)?,
            },
            "beale" => CfSelector::Beale,
            "digits" => CfSelector::Digits {
                path: take("path")
                    .unwrap_or_else(|| DEFAULT_DIGITS_PATH.into())
                    .into(),
                rows: take("rows")
                    .map(|r| count("rows", Some(r), 0))
                    .transpose()?,
            },
            other => return Err(usage(format!("unknown cost function `{other}`"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(usage(format!(
                "unknown parameter `{k}` for cost function `{name}`"
            )));
        }
        if matches!(
            sel,
            CfSelector::Quadratic { n: 0, .. } | CfSelector::Quartic { n: 0, .. }
        ) {
            return Err(usage("cost function dimension n must be at least 1".into()));
        }
        Ok(sel)
    }
}
