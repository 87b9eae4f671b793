//! Synthetic 2D Gaussian mixtures and latent noise.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmSpec {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub labeled: bool,
}

/// A batch of points, `2 × n`, plus mode labels when the mixture is labeled.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub points: Tensor,
    pub labels: Option<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.points.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.cols() == 0
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.points.get(0, i), self.points.get(1, i)]
    }
}

pub const RING_RADIUS: f64 = 2.0;
pub const RING_SIGMA: f64 = 0.05;

impl GmmSpec {
    pub fn new(centers: Vec<[f64; 2]>, sigma: f64, weights: Vec<f64>, labeled: bool) -> Result<Self> {
        let spec = GmmSpec {
            centers,
            sigma,
            weights,
            labeled,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Domain("mixture needs at least one mode".into()));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::Domain(format!(
                "{} centers but {} weights",
                self.centers.len(),
                self.weights.len()
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Domain(format!("mixture weights sum to {total}")));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Eight equal-weight modes on a circle of radius 2 at angles `2πk/8`, σ = 0.05.
    pub fn ring8() -> Self {
        Self::ring(8, RING_RADIUS, RING_SIGMA, false)
    }

    pub fn ring(k: usize, radius: f64, sigma: f64, labeled: bool) -> Self {
        let centers = (0..k)
            .map(|i| {
                let angle = std::f64::consts::TAU * i as f64 / k as f64;
                [radius * angle.cos(), radius * angle.sin()]
            })
            .collect();
        GmmSpec {
            centers,
            sigma,
            weights: vec![1.0 / k as f64; k],
            labeled,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.centers.len()
    }

    /// `n` points: mode index from the weights, then `center + σ·(Box–Muller pair)`.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Batch {
        let mut points = Tensor::zeros(2, n);
        let mut labels = Vec::with_capacity(n);
        for j in 0..n {
            let k = rng.categorical(&self.weights);
            let (z0, z1) = rng.normal_pair();
            let c = self.centers[k];
            points.set(0, j, c[0] + self.sigma * z0);
            points.set(1, j, c[1] + self.sigma * z1);
            labels.push(k);
        }
        Batch {
            points,
            labels: self.labeled.then_some(labels),
        }
    }

    /// Conditioning labels drawn from the mixture weights.
    pub fn sample_labels(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        (0..n).map(|_| rng.categorical(&self.weights)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentSpec {
    pub dim: usize,
}

impl LatentSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("latent dimension must be at least 1".into()));
        }
        Ok(LatentSpec { dim })
    }

    /// `dim × n` standard normal matrix, filled column by column.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Tensor {
        let mut z = Tensor::zeros(self.dim, n);
        for j in 0..n {
            for k in 0..self.dim {
                z.set(k, j, rng.normal());
            }
        }
        z
    }
}

/// Writes `x,y[,label]` rows.
pub fn write_csv<W: Write>(mut out: W, batch: &Batch) -> Result<()> {
    match &batch.labels {
        Some(_) => writeln!(out, "x,y,label")?,
        None => writeln!(out, "x,y")?,
    }
    for j in 0..batch.len() {
        let [x, y] = batch.point(j);
        match &batch.labels {
            Some(labels) => writeln!(out, "{x},{y},{}", labels[j])?,
            None => writeln!(out, "{x},{y}")?,
        }
    }
    Ok(())
}

/// Reads what [`write_csv`] wrote. Values round-trip exactly.
pub fn read_csv<R: BufRead>(input: R) -> Result<Batch> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Domain("empty csv".into()))??;
    let labeled = match header.trim() {
        "x,y" => false,
        "x,y,label" => true,
        other => return Err(Error::Domain(format!("unexpected csv header `{other}`"))),
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Domain(format!("bad csv row {}: `{line}`", lineno + 2));
        let mut fields = line.split(',');
        let x: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let y: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        if labeled {
            let l: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            labels.push(l);
        }
        xs.push(x);
        ys.push(y);
    }
    let n = xs.len();
    xs.extend(ys);
    Ok(Batch {
        points: Tensor::from_vec(2, n, xs)?,
        labels: labeled.then_some(labels),
    })
}
