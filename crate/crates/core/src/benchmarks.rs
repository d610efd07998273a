//! Benchmark objectives, the map between the normalized box `[−0.5, 0.5]^D`
//! and native coordinates, and regret metrics.

use std::f64::consts::{E, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Offset added before taking the base-10 logarithm of a regret.
pub const LOG_REGRET_OFFSET: f64 = 1e-8;

/// Ackley function, minimum 0 at the origin.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let mean_cos = x.iter().map(|v| (TAU * v).cos()).sum::<f64>() / n;
    // grouped so that the origin evaluates to exactly zero
    (20.0 - 20.0 * (-0.2 * mean_sq.sqrt()).exp()) + (E - mean_cos.exp())
}

/// Rosenbrock function, minimum 0 at `(1, …, 1)`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Ackley,
    Rosenbrock,
}

/// A benchmark on its native box with known optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub optimum_value: f64,
    pub optimizer: Vec<f64>,
}

impl Benchmark {
    /// Ackley on `[−32.768, 32.768]^dim`.
    pub fn ackley(dim: usize) -> Self {
        Benchmark {
            kind: BenchmarkKind::Ackley,
            lower: vec![-32.768; dim],
            upper: vec![32.768; dim],
            optimum_value: 0.0,
            optimizer: vec![0.0; dim],
        }
    }

    /// Rosenbrock on `[−5, 10]^dim`.
    pub fn rosenbrock(dim: usize) -> Self {
        Benchmark {
            kind: BenchmarkKind::Rosenbrock,
            lower: vec![-5.0; dim],
            upper: vec![10.0; dim],
            optimum_value: 0.0,
            optimizer: vec![1.0; dim],
        }
    }

    pub fn new(kind: BenchmarkKind, dim: usize) -> Result<Self> {
        match kind {
            BenchmarkKind::Ackley if dim >= 1 => Ok(Benchmark::ackley(dim)),
            BenchmarkKind::Rosenbrock if dim >= 2 => Ok(Benchmark::rosenbrock(dim)),
            _ => Err(Error::InvalidInput(format!("{kind:?} is not defined in {dim} dimensions"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            BenchmarkKind::Ackley => "ackley",
            BenchmarkKind::Rosenbrock => "rosenbrock",
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Value at a native point.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.kind {
            BenchmarkKind::Ackley => ackley(x),
            BenchmarkKind::Rosenbrock => rosenbrock(x),
        }
    }

    /// Value at a point of the normalized box.
    pub fn evaluate_normalized(&self, x: &[f64]) -> f64 {
        self.evaluate(&self.to_native_unchecked(x))
    }

    /// `native = lower + (x + 0.5)·(upper − lower)`.
    pub fn to_native(&self, x_norm: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x_norm.len())?;
        if x_norm.iter().any(|v| !(*v >= -0.5 - 1e-12 && *v <= 0.5 + 1e-12)) {
            return Err(Error::InvalidInput("point lies outside the normalized box".into()));
        }
        Ok(self.to_native_unchecked(x_norm))
    }

    fn to_native_unchecked(&self, x_norm: &[f64]) -> Vec<f64> {
        x_norm
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| l + (v + 0.5) * (u - l))
            .collect()
    }

    /// Inverse of [`Benchmark::to_native`].
    pub fn to_normalized(&self, native: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), native.len())?;
        Ok(native
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l) - 0.5)
            .collect())
    }
}

/// `f(x̂) − f(x_opt)` for a native point `x̂`.
pub fn simple_regret(bench: &Benchmark, x_hat: &[f64]) -> Result<f64> {
    check_dim(bench.dim(), x_hat.len())?;
    Ok(bench.evaluate(x_hat) - bench.optimum_value)
}

/// `log10(r + 1e-8)`.
pub fn log_regret(r: f64) -> f64 {
    (r + LOG_REGRET_OFFSET).log10()
}
