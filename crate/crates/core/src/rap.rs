//! Reference forward pass of the relation-augmented projector:
//!
//! ```text
//! X     = concat(l2norm(X_uni3d), l2norm(X_mask3d))
//! X_rap = MLP(X) + MLP_pos(X_pos)
//! ```
//!
//! Everything is a per-row map, computed one object at a time so batched,
//! row-wise and chunked-parallel evaluation agree bit for bit.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::rng::stream;

#[derive(Debug, Error, PartialEq)]
pub enum RapError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("row {row} of {matrix} has zero norm")]
    ZeroRow { matrix: &'static str, row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gelu {
    #[default]
    Exact,
    Tanh,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

impl Gelu {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Gelu::Exact => 0.5 * x * (1.0 + erf(x / SQRT_2)),
            Gelu::Tanh => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
            }
        }
    }
}

/// d/dx of the exact GELU: `Phi(x) + x * phi(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self, RapError> {
        if weight.ncols() != bias.len() {
            return Err(RapError::DimMismatch(format!(
                "weight has {} outputs, bias has {}",
                weight.ncols(),
                bias.len()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(RapError::NonFinite("layer parameters"));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                out.scaled_add(*xi, &self.weight.row(i));
            }
        }
        out
    }
}

/// Linear layers with GELU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    #[serde(default)]
    pub activation: Gelu,
}

impl Mlp {
    pub fn new(layers: Vec<Linear>, activation: Gelu) -> Result<Self, RapError> {
        if layers.is_empty() {
            return Err(RapError::DimMismatch("MLP has no layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(RapError::DimMismatch(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, activation })
    }

    /// Uniform init in `[-1/sqrt(in), 1/sqrt(in)]` from a seeded stream.
    /// `dims` lists every width, e.g. `[64, 64, 64]` for two layers.
    pub fn seeded(dims: &[usize], seed: u64, label: &str) -> Result<Self, RapError> {
        if dims.len() < 2 {
            return Err(RapError::DimMismatch("need at least input and output width".into()));
        }
        let mut rng = stream(seed, "rap-init", label, 0);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weight = Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..=bound));
                let bias = Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..=bound));
                Linear { weight, bias }
            })
            .collect();
        Self::new(layers, Gelu::Exact)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn forward_row(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut h = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(|v| self.activation.apply(v));
            h = layer.apply(h.view());
        }
        h
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, RapError> {
        if x.ncols() != self.in_dim() {
            return Err(RapError::DimMismatch(format!(
                "MLP takes {} inputs, got {}",
                self.in_dim(),
                x.ncols()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.out_dim()));
        for (i, row) in x.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.forward_row(row));
        }
        Ok(out)
    }
}

fn row_norm(row: ArrayView1<'_, f64>) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn normalize_row(
    row: ArrayView1<'_, f64>,
    epsilon: Option<f64>,
    matrix: &'static str,
    index: usize,
) -> Result<Array1<f64>, RapError> {
    let n = row_norm(row);
    let denom = match epsilon {
        Some(e) => n + e,
        None if n == 0.0 => return Err(RapError::ZeroRow { matrix, row: index }),
        None => n,
    };
    Ok(row.mapv(|v| v / denom))
}

/// Scale each row to unit Euclidean norm. With `epsilon`, it is added to the
/// norm so zero rows map to zero instead of failing.
pub fn l2_normalize_rows(m: &Array2<f64>, epsilon: Option<f64>) -> Result<Array2<f64>, RapError> {
    let mut out = m.clone();
    for (i, row) in m.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&normalize_row(row, epsilon, "matrix", i)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBatch {
    pub uni3d: Array2<f64>,
    pub mask3d: Array2<f64>,
    pub pos: Array2<f64>,
}

impl FeatureBatch {
    pub fn new(uni3d: Array2<f64>, mask3d: Array2<f64>, pos: Array2<f64>) -> Result<Self, RapError> {
        let b = Self { uni3d, mask3d, pos };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), RapError> {
        let n = self.uni3d.nrows();
        if self.mask3d.nrows() != n || self.pos.nrows() != n {
            return Err(RapError::DimMismatch(format!(
                "row counts differ: uni3d {n}, mask3d {}, pos {}",
                self.mask3d.nrows(),
                self.pos.nrows()
            )));
        }
        for (name, m) in [("uni3d", &self.uni3d), ("mask3d", &self.mask3d), ("pos", &self.pos)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(RapError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.uni3d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Seeded standard-uniform batch in `[-1, 1)`.
    pub fn random(n: usize, dims: RapDims, seed: u64) -> Self {
        let mut rng = stream(seed, "rap-batch", "", n as u64);
        let mut m = |d: usize| Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let uni3d = m(dims.uni3d);
        let mask3d = m(dims.mask3d);
        let pos = m(dims.pos);
        Self { uni3d, mask3d, pos }
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            uni3d: self.uni3d.select(Axis(0), perm),
            mask3d: self.mask3d.select(Axis(0), perm),
            pos: self.pos.select(Axis(0), perm),
        }
    }

    fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            uni3d: self.uni3d.slice(s![start..end, ..]).to_owned(),
            mask3d: self.mask3d.slice(s![start..end, ..]).to_owned(),
            pos: self.pos.slice(s![start..end, ..]).to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RapDims {
    pub uni3d: usize,
    pub mask3d: usize,
    pub pos: usize,
    pub hidden: usize,
}

impl Default for RapDims {
    fn default() -> Self {
        Self {
            uni3d: 32,
            mask3d: 32,
            pos: 16,
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rap {
    pub main: Mlp,
    pub pos: Mlp,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl Rap {
    pub fn new(main: Mlp, pos: Mlp, epsilon: Option<f64>) -> Result<Self, RapError> {
        if main.out_dim() != pos.out_dim() {
            return Err(RapError::DimMismatch(format!(
                "main MLP outputs {}, position MLP outputs {}",
                main.out_dim(),
                pos.out_dim()
            )));
        }
        Ok(Self { main, pos, epsilon })
    }

    /// Seeded projector with `depth` layers per branch and hidden width
    /// `dims.hidden` throughout.
    pub fn seeded(dims: RapDims, depth: usize, seed: u64) -> Result<Self, RapError> {
        let depth = depth.max(1);
        let mut main_dims = vec![dims.uni3d + dims.mask3d];
        let mut pos_dims = vec![dims.pos];
        main_dims.extend(std::iter::repeat_n(dims.hidden, depth));
        pos_dims.extend(std::iter::repeat_n(dims.hidden, depth));
        Self::new(
            Mlp::seeded(&main_dims, seed, "main")?,
            Mlp::seeded(&pos_dims, seed, "pos")?,
            None,
        )
    }

    pub fn out_dim(&self) -> usize {
        self.main.out_dim()
    }

    fn check(&self, batch: &FeatureBatch) -> Result<(), RapError> {
        batch.validate()?;
        let joint = batch.uni3d.ncols() + batch.mask3d.ncols();
        if joint != self.main.in_dim() {
            return Err(RapError::DimMismatch(format!(
                "main MLP takes {}, uni3d + mask3d give {joint}",
                self.main.in_dim()
            )));
        }
        if batch.pos.ncols() != self.pos.in_dim() {
            return Err(RapError::DimMismatch(format!(
                "position MLP takes {}, pos gives {}",
                self.pos.in_dim(),
                batch.pos.ncols()
            )));
        }
        Ok(())
    }

    /// Output for object `i` of the batch.
    pub fn forward_one(&self, batch: &FeatureBatch, i: usize) -> Result<Array1<f64>, RapError> {
        let u = normalize_row(batch.uni3d.row(i), self.epsilon, "uni3d", i)?;
        let m = normalize_row(batch.mask3d.row(i), self.epsilon, "mask3d", i)?;
        let x = concatenate(Axis(0), &[u.view(), m.view()]).expect("1-d concat");
        Ok(self.main.forward_row(x.view()) + self.pos.forward_row(batch.pos.row(i)))
    }

    pub fn forward(&self, batch: &FeatureBatch) -> Result<Array2<f64>, RapError> {
        self.check(batch)?;
        let mut out = Array2::zeros((batch.len(), self.out_dim()));
        for i in 0..batch.len() {
            out.row_mut(i).assign(&self.forward_one(batch, i)?);
        }
        Ok(out)
    }

    /// Same result as [`Rap::forward`], computed in parallel chunks.
    pub fn forward_par(&self, batch: &FeatureBatch, chunk: usize) -> Result<Array2<f64>, RapError> {
        self.check(batch)?;
        let chunk = chunk.max(1);
        let starts: Vec<usize> = (0..batch.len()).step_by(chunk).collect();
        let parts = starts
            .par_iter()
            .map(|&s| self.forward(&batch.slice(s, (s + chunk).min(batch.len()))))
            .collect::<Result<Vec<_>, _>>()?;
        if parts.is_empty() {
            return Ok(Array2::zeros((0, self.out_dim())));
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        Ok(concatenate(Axis(0), &views).expect("matching widths"))
    }
}

// ---------------------------------------------------------------------------
// property checks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub rows: usize,
    /// Max |norm - 1| over the normalized uni3d and mask3d rows.
    pub max_norm_deviation: f64,
    pub permutation_max_abs: f64,
    pub scale_invariance_max_abs: f64,
    pub chunked_bitwise_equal: bool,
    pub gelu_derivative_max_abs: f64,
    pub gelu_points: usize,
}

impl PropertyReport {
    pub fn passes(&self) -> bool {
        self.max_norm_deviation <= 1e-9
            && self.permutation_max_abs < 1e-12
            && self.scale_invariance_max_abs <= 1e-9
            && self.chunked_bitwise_equal
            && self.gelu_derivative_max_abs <= 1e-6
    }
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst central-difference error of [`gelu_derivative`] at `points` seeded
/// locations in `[-6, 6]`.
pub fn gelu_fd_check(points: usize, step: f64, seed: u64) -> f64 {
    let mut rng = stream(seed, "gelu-fd", "", 0);
    (0..points)
        .map(|_| {
            let x: f64 = rng.gen_range(-6.0..6.0);
            let fd = (Gelu::Exact.apply(x + step) - Gelu::Exact.apply(x - step)) / (2.0 * step);
            (fd - gelu_derivative(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Run the numerical property checks on `batch`.
pub fn property_report(rap: &Rap, batch: &FeatureBatch, seed: u64) -> Result<PropertyReport, RapError> {
    let n = batch.len();
    let base = rap.forward(batch)?;

    let mut max_norm_deviation: f64 = 0.0;
    for m in [&batch.uni3d, &batch.mask3d] {
        let normed = l2_normalize_rows(m, rap.epsilon)?;
        for row in normed.rows() {
            max_norm_deviation = max_norm_deviation.max((row_norm(row) - 1.0).abs());
        }
    }

    let mut rng = stream(seed, "rap-props", "", n as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
    let permuted = rap.forward(&batch.permuted(&perm))?;
    let permutation_max_abs = max_abs_diff(&permuted, &base.select(Axis(0), &perm));

    let mut scaled = batch.clone();
    for mut row in scaled.uni3d.rows_mut() {
        let c: f64 = rng.gen_range(0.01..100.0);
        row.mapv_inplace(|v| v * c);
    }
    let scale_invariance_max_abs = max_abs_diff(&rap.forward(&scaled)?, &base);

    let chunked = rap.forward_par(batch, 7)?;
    Ok(PropertyReport {
        rows: n,
        max_norm_deviation,
        permutation_max_abs,
        scale_invariance_max_abs,
        chunked_bitwise_equal: chunked == base,
        gelu_derivative_max_abs: gelu_fd_check(1000, 1e-5, seed),
        gelu_points: 1000,
    })
}
