//! Single-hidden-layer classifier for the 8×8 optical digits, exposed as a
//! [`CostFunction`] over its flattened weights.
//!
//! The network is `softmax(W2·tanh(W1·x + b1) + b2)` and the cost is the mean
//! cross entropy over the training set, with no regularization. The parameter
//! vector is laid out as `[W1 (row-major, hidden × in), b1, W2 (row-major,
//! out × hidden), b2]`.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::CostFunction;

pub const N_FEATURES: usize = 64;
pub const N_CLASSES: usize = 10;
/// Pixel intensities run from 0 to this value.
pub const PIXEL_MAX: f64 = 16.0;
/// Floor applied to probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no samples")]
    NoSamples,
    #[error("line {line}: expected {expected} columns, found {found}")]
    Width {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: `{cell}` is not a number")]
    NotNumeric {
        line: u64,
        column: usize,
        cell: String,
    },
    #[error("line {line}: label {label} is outside 0..{classes}")]
    LabelRange {
        line: u64,
        label: String,
        classes: usize,
    },
    #[error("feature matrix has {rows} rows but {labels} labels")]
    Shape { rows: usize, labels: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
}

impl MlpArchitecture {
    /// 64 inputs, 30 tanh hidden units, 10 softmax outputs.
    pub const DIGITS: MlpArchitecture = MlpArchitecture {
        n_in: N_FEATURES,
        n_hidden: 30,
        n_out: N_CLASSES,
    };

    pub fn param_count(&self) -> usize {
        self.n_in * self.n_hidden + self.n_hidden + self.n_hidden * self.n_out + self.n_out
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = self.n_in * self.n_hidden;
        let b1 = w1 + self.n_hidden;
        let w2 = b1 + self.n_hidden * self.n_out;
        [w1, b1, w2, w2 + self.n_out]
    }
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self::DIGITS
    }
}

/// Borrowed views of the four parameter blocks inside a flat vector.
#[derive(Debug, Clone, Copy)]
pub struct ParamViews<'a> {
    pub w1: ArrayView2<'a, f64>,
    pub b1: ArrayView1<'a, f64>,
    pub w2: ArrayView2<'a, f64>,
    pub b2: ArrayView1<'a, f64>,
}

/// Owned weights, the unflattened form of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }
}

pub fn views<'a>(arch: &MlpArchitecture, theta: &'a [f64]) -> ParamViews<'a> {
    assert_eq!(theta.len(), arch.param_count(), "parameter vector length");
    let [w1, b1, w2, b2] = arch.offsets();
    ParamViews {
        w1: ArrayView2::from_shape((arch.n_hidden, arch.n_in), &theta[..w1]).unwrap(),
        b1: ArrayView1::from(&theta[w1..b1]),
        w2: ArrayView2::from_shape((arch.n_out, arch.n_hidden), &theta[b1..w2]).unwrap(),
        b2: ArrayView1::from(&theta[w2..b2]),
    }
}

pub fn unflatten(arch: &MlpArchitecture, theta: &[f64]) -> MlpParams {
    let v = views(arch, theta);
    MlpParams {
        w1: v.w1.to_owned(),
        b1: v.b1.to_owned(),
        w2: v.w2.to_owned(),
        b2: v.b2.to_owned(),
    }
}

/// Labeled digit images, features scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitsDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl DigitsDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self, DatasetError> {
        if labels.is_empty() {
            return Err(DatasetError::NoSamples);
        }
        if features.nrows() != labels.len() {
            return Err(DatasetError::Shape {
                rows: features.nrows(),
                labels: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        Self::new(
            self.features.select(Axis(0), indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

pub fn load_digits_csv(path: impl AsRef<Path>) -> Result<DigitsDataset, DatasetError> {
    read_digits_csv(File::open(path)?)
}

/// Parses rows of 64 pixel values followed by an integer label. A first row
/// whose first cell is not numeric is treated as a header.
pub fn read_digits_csv(reader: impl Read) -> Result<DigitsDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != N_FEATURES + 1 {
            return Err(DatasetError::Width {
                line,
                expected: N_FEATURES + 1,
                found: record.len(),
            });
        }
        for (column, cell) in record.iter().take(N_FEATURES).enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v / PIXEL_MAX),
                _ => {
                    return Err(DatasetError::NotNumeric {
                        line,
                        column: column + 1,
                        cell: cell.to_string(),
                    })
                }
            }
        }
        let cell = &record[N_FEATURES];
        let label = match cell.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && (0.0..N_CLASSES as f64).contains(&v) => v as usize,
            Ok(_) => {
                return Err(DatasetError::LabelRange {
                    line,
                    label: cell.to_string(),
                    classes: N_CLASSES,
                })
            }
            Err(_) => {
                return Err(DatasetError::NotNumeric {
                    line,
                    column: N_FEATURES + 1,
                    cell: cell.to_string(),
                })
            }
        };
        labels.push(label);
    }
    let features = Array2::from_shape_vec((labels.len(), N_FEATURES), values)
        .expect("row width checked above");
    DigitsDataset::new(features, labels)
}

/// Weight initialization.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum InitScale {
    /// Uniform in `±sqrt(6/(fan_in + fan_out))` per layer.
    #[default]
    Glorot,
    /// Uniform in `±r` for every weight.
    Uniform(f64),
}

/// Random weights, zero biases; deterministic per seed.
pub fn init_params(arch: &MlpArchitecture, seed: u64, scale: InitScale) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = |fan_in: usize, fan_out: usize| match scale {
        InitScale::Glorot => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        InitScale::Uniform(r) => r,
    };
    let r1 = radius(arch.n_in, arch.n_hidden);
    let r2 = radius(arch.n_hidden, arch.n_out);
    let mut theta = Vec::with_capacity(arch.param_count());
    let d1 = Uniform::new_inclusive(-r1, r1);
    theta.extend((0..arch.n_in * arch.n_hidden).map(|_| d1.sample(&mut rng)));
    theta.extend(std::iter::repeat(0.0).take(arch.n_hidden));
    let d2 = Uniform::new_inclusive(-r2, r2);
    theta.extend((0..arch.n_hidden * arch.n_out).map(|_| d2.sample(&mut rng)));
    theta.extend(std::iter::repeat(0.0).take(arch.n_out));
    theta
}

struct Forward {
    hidden: Array2<f64>,
    log_probs: Array2<f64>,
}

fn forward(arch: &MlpArchitecture, x: &Array2<f64>, theta: &[f64]) -> Forward {
    let p = views(arch, theta);
    let mut hidden = x.dot(&p.w1.t());
    hidden += &p.b1;
    hidden.mapv_inplace(f64::tanh);
    let mut z = hidden.dot(&p.w2.t());
    z += &p.b2;
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - lse);
    }
    Forward {
        hidden,
        log_probs: z,
    }
}

/// Softmax probabilities, one row per sample.
pub fn predict_proba(arch: &MlpArchitecture, x: &Array2<f64>, theta: &[f64]) -> Array2<f64> {
    forward(arch, x, theta).log_probs.mapv(f64::exp)
}

/// Fraction of samples whose most probable class is the label; ties go to the
/// lowest class index.
pub fn accuracy(theta: &[f64], data: &DigitsDataset, arch: &MlpArchitecture) -> f64 {
    let probs = forward(arch, &data.features, theta).log_probs;
    let correct = probs
        .rows()
        .into_iter()
        .zip(&data.labels)
        .filter(|(row, &label)| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best == label
        })
        .count();
    correct as f64 / data.len() as f64
}

/// Mean cross entropy of the classifier over a dataset.
#[derive(Debug, Clone)]
pub struct CrossEntropy {
    data: DigitsDataset,
    arch: MlpArchitecture,
}

impl CrossEntropy {
    pub fn new(data: DigitsDataset, arch: MlpArchitecture) -> Self {
        assert_eq!(arch.n_in, N_FEATURES, "digits features are 64 wide");
        assert!(arch.n_out >= N_CLASSES, "need an output per class");
        Self { data, arch }
    }

    pub fn digits(data: DigitsDataset) -> Self {
        Self::new(data, MlpArchitecture::DIGITS)
    }

    pub fn data(&self) -> &DigitsDataset {
        &self.data
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    fn loss(&self, log_probs: &Array2<f64>) -> f64 {
        let floor = PROB_FLOOR.ln();
        let total: f64 = self
            .data
            .labels
            .iter()
            .enumerate()
            .map(|(i, &y)| log_probs[[i, y]].max(floor))
            .sum();
        -total / self.data.len() as f64
    }
}

impl CostFunction for CrossEntropy {
    fn name(&self) -> String {
        format!(
            "cross_entropy(mlp {}-{}-{}, m={})",
            self.arch.n_in,
            self.arch.n_hidden,
            self.arch.n_out,
            self.data.len()
        )
    }

    fn dim(&self) -> Option<usize> {
        Some(self.arch.param_count())
    }

    fn eval(&self, theta: &[f64]) -> f64 {
        self.loss(&forward(&self.arch, &self.data.features, theta).log_probs)
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.eval_grad(theta).1
    }

    fn eval_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let arch = &self.arch;
        let x = &self.data.features;
        let Forward { hidden, log_probs } = forward(arch, x, theta);
        let f = self.loss(&log_probs);

        let m = self.data.len() as f64;
        // dL/dz = (softmax − onehot)/m
        let mut dz = log_probs.mapv(f64::exp);
        for (i, &y) in self.data.labels.iter().enumerate() {
            dz[[i, y]] -= 1.0;
        }
        dz /= m;

        let p = views(arch, theta);
        let g_w2 = dz.t().dot(&hidden);
        let g_b2 = dz.sum_axis(Axis(0));
        let mut dh = dz.dot(&p.w2);
        dh.zip_mut_with(&hidden, |d, &h| *d *= 1.0 - h * h);
        let g_w1 = dh.t().dot(x);
        let g_b1 = dh.sum_axis(Axis(0));

        let grad = MlpParams {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
        }
        .flatten();
        (f, grad)
    }
}

/// First `n` rows of a dataset, convenient for small checks.
pub fn head(data: &DigitsDataset, n: usize) -> Result<DigitsDataset, DatasetError> {
    let n = n.min(data.len());
    DigitsDataset::new(
        data.features.slice(s![..n, ..]).to_owned(),
        data.labels[..n].to_vec(),
    )
}
