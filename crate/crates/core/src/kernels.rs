//! Stationary kernels whose similarity decreases strictly with distance.
//!
//! Only the squared exponential and Matérn 5/2 kernels are provided. Both are
//! functions of the (optionally per-dimension scaled) Euclidean distance, so
//! a distance threshold and a similarity threshold select the same points.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::sq_dist;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

impl KernelFamily {
    /// Similarity at unit signal variance for a length-scaled distance `s = r / θ_l`.
    #[inline]
    pub fn profile(self, s: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * s * s).exp(),
            KernelFamily::Matern52 => {
                let a = SQRT5 * s;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }

    #[inline]
    fn profile_sq(self, s2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * s2).exp(),
            KernelFamily::Matern52 => self.profile(s2.sqrt()),
        }
    }
}

/// Length scale: one value for every dimension, or one per dimension (ARD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LengthScale {
    Isotropic(f64),
    Ard(Vec<f64>),
}

/// Kernel family and hyperparameters `θ = (θ_σ, θ_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    family: KernelFamily,
    signal_std: f64,
    length_scale: LengthScale,
}

impl KernelConfig {
    pub fn isotropic(family: KernelFamily, signal_std: f64, length_scale: f64) -> Result<Self> {
        let cfg = KernelConfig {
            family,
            signal_std,
            length_scale: LengthScale::Isotropic(length_scale),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ard(family: KernelFamily, signal_std: f64, length_scales: Vec<f64>) -> Result<Self> {
        let cfg = KernelConfig {
            family,
            signal_std,
            length_scale: LengthScale::Ard(length_scales),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Squared exponential with `θ_σ = 1`, `θ_l = 1`.
    pub fn se() -> Self {
        KernelConfig {
            family: KernelFamily::SquaredExponential,
            signal_std: 1.0,
            length_scale: LengthScale::Isotropic(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_std > 0.0 && self.signal_std.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "signal std must be positive, got {}",
                self.signal_std
            )));
        }
        let ok = match &self.length_scale {
            LengthScale::Isotropic(l) => *l > 0.0 && l.is_finite(),
            LengthScale::Ard(ls) => !ls.is_empty() && ls.iter().all(|l| *l > 0.0 && l.is_finite()),
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "length scales must be positive, got {:?}",
                self.length_scale
            )));
        }
        Ok(())
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn signal_std(&self) -> f64 {
        self.signal_std
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_std * self.signal_std
    }

    pub fn length_scale(&self) -> &LengthScale {
        &self.length_scale
    }

    pub fn is_ard(&self) -> bool {
        matches!(self.length_scale, LengthScale::Ard(_))
    }

    /// The isotropic length scale, or the geometric mean of the ARD scales.
    pub fn mean_length_scale(&self) -> f64 {
        match &self.length_scale {
            LengthScale::Isotropic(l) => *l,
            LengthScale::Ard(ls) => {
                (ls.iter().map(|l| l.ln()).sum::<f64>() / ls.len() as f64).exp()
            }
        }
    }

    pub fn with_signal_std(&self, signal_std: f64) -> Result<Self> {
        let mut c = self.clone();
        c.signal_std = signal_std;
        c.validate()?;
        Ok(c)
    }

    pub fn with_length_scale(&self, length_scale: LengthScale) -> Result<Self> {
        let mut c = self.clone();
        c.length_scale = length_scale;
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn check_input_dim(&self, dim: usize) -> Result<()> {
        match &self.length_scale {
            LengthScale::Ard(ls) => check_dim(ls.len(), dim),
            LengthScale::Isotropic(_) => Ok(()),
        }
    }

    /// Squared distance after dividing every coordinate by its length scale.
    #[inline]
    pub(crate) fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.length_scale {
            LengthScale::Isotropic(l) => sq_dist(a, b) / (l * l),
            LengthScale::Ard(ls) => a
                .iter()
                .zip(b)
                .zip(ls)
                .map(|((x, y), l)| {
                    let d = (x - y) / l;
                    d * d
                })
                .sum(),
        }
    }

    /// Kernel value from a length-scaled squared distance.
    #[inline]
    pub(crate) fn from_scaled_sq(&self, s2: f64) -> f64 {
        self.signal_variance() * self.family.profile_sq(s2)
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        self.from_scaled_sq(self.scaled_sq_dist(a, b))
    }
}

/// Evaluates `k(xi, xj)`.
pub fn eval_kernel(cfg: &KernelConfig, xi: &[f64], xj: &[f64]) -> Result<f64> {
    check_dim(xi.len(), xj.len())?;
    cfg.check_input_dim(xi.len())?;
    Ok(cfg.eval_unchecked(xi, xj))
}

/// Gram matrix `K_ij = k(x_i, x_j)` as rows.
pub fn kernel_matrix(cfg: &KernelConfig, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidInput("kernel matrix of an empty point set".into()))?;
    let dim = first.len();
    cfg.check_input_dim(dim)?;
    for x in xs {
        check_dim(dim, x.len())?;
    }
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = cfg.signal_variance();
        for j in 0..i {
            let v = cfg.eval_unchecked(&xs[i], &xs[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    Ok(k)
}

/// Isotropic similarity as a function of the Euclidean distance `r`.
///
/// Strictly decreasing in `r`; not defined for ARD kernels.
pub fn distance_to_similarity(cfg: &KernelConfig, r: f64) -> Result<f64> {
    let l = match cfg.length_scale {
        LengthScale::Isotropic(l) => l,
        LengthScale::Ard(_) => {
            return Err(Error::Unsupported(
                "no isotropic distance map for an ARD kernel".into(),
            ))
        }
    };
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("distance must be nonnegative, got {r}")));
    }
    Ok(cfg.signal_variance() * cfg.family.profile(r / l))
}
