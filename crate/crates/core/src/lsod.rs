//! Local subset of data (LSoD): the observations that contribute to the
//! prediction on the current search region.
//!
//! The contribution of an observation is the largest kernel similarity it
//! has with any point of the search region. Replacing the clipped region
//! `S ∩ χ` by the whole subspace `S`, and using a kernel that decreases with
//! distance, the contribution becomes `k(P_S(x), x)`: ranking by contribution
//! is ranking by orthogonal distance to `S`. All extraction strategies below
//! sort by that distance.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gpr::Dataset;
use crate::kernels::{KernelConfig, LengthScale};
use crate::linalg::dot;
use crate::subspace::{Domain, Subspace};

/// Grid resolution per local axis for the clipped (non-approximated) contribution.
pub const CLIPPED_GRID_POINTS: usize = 201;

/// How the training subset is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Train on every observation.
    None,
    /// Keep the `M` observations with the highest contribution.
    TopM(usize),
    /// Keep observations within distance `τ` of the subspace, with
    /// `τ = tau · decay^epoch`.
    Tau { tau: f64, decay: f64 },
    /// Keep the shortest prefix (by contribution) whose share of the total
    /// contribution reaches the given rate.
    Cumulative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsodConfig {
    pub strategy: Strategy,
    /// Use `k(P_S(x), x)` instead of the maximum over the clipped region.
    pub use_approximation: bool,
}

impl Default for LsodConfig {
    fn default() -> Self {
        LsodConfig::new(Strategy::None)
    }
}

impl LsodConfig {
    pub fn new(strategy: Strategy) -> Self {
        LsodConfig {
            strategy,
            use_approximation: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::TopM(0) => Err(Error::InvalidInput("TopM needs M >= 1".into())),
            Strategy::Tau { tau, decay } if !(tau >= 0.0) || !(decay > 0.0 && decay <= 1.0) => {
                Err(Error::InvalidInput(format!(
                    "Tau needs tau >= 0 and decay in (0, 1], got tau={tau}, decay={decay}"
                )))
            }
            Strategy::Cumulative(c) if !(0.0..=1.0).contains(&c) => Err(Error::InvalidInput(
                format!("cumulative contribution rate must be in [0, 1], got {c}"),
            )),
            _ => Ok(()),
        }
    }

    /// Distance threshold for epoch `epoch` under the `Tau` strategy.
    pub fn tau_at(&self, epoch: u64) -> Option<f64> {
        match self.strategy {
            Strategy::Tau { tau, decay } => Some(tau * decay.powi(epoch.min(i32::MAX as u64) as i32)),
            _ => None,
        }
    }
}

/// Subspace, kernel and point scaling in which the kernel is isotropic.
struct Frame {
    sub: Subspace,
    cfg: KernelConfig,
    inv_scale: Option<Vec<f64>>,
}

impl Frame {
    fn new(sub: &Subspace, cfg: &KernelConfig) -> Result<Self> {
        let ls = match cfg.length_scale() {
            LengthScale::Isotropic(_) => {
                return Ok(Frame {
                    sub: sub.clone(),
                    cfg: cfg.clone(),
                    inv_scale: None,
                })
            }
            LengthScale::Ard(ls) => ls,
        };
        check_dim(ls.len(), sub.ambient_dim())?;
        let inv: Vec<f64> = ls.iter().map(|l| 1.0 / l).collect();
        let scale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv).map(|(a, b)| a * b).collect() };
        // Gram–Schmidt on the scaled basis
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(sub.dim());
        for u in sub.basis() {
            let mut v = scale(u);
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|vi| *vi /= norm);
            basis.push(v);
        }
        let sub = Subspace::new(scale(sub.anchor()), basis, sub.id())?;
        let cfg = cfg.with_length_scale(LengthScale::Isotropic(1.0))?;
        Ok(Frame {
            sub,
            cfg,
            inv_scale: Some(inv),
        })
    }

    fn distance(&self, x: &[f64]) -> f64 {
        match &self.inv_scale {
            None => self.sub.projection_distance_unchecked(x),
            Some(inv) => {
                let xs: Vec<f64> = x.iter().zip(inv).map(|(a, b)| a * b).collect();
                self.sub.projection_distance_unchecked(&xs)
            }
        }
    }

    fn similarity(&self, distance: f64) -> f64 {
        let l = self.cfg.mean_length_scale();
        self.cfg.signal_variance() * self.cfg.family().profile(distance / l)
    }
}

/// Contribution of `x` to the search region under the projection shortcut:
/// `k(P_S(x), x)`.
pub fn contribution(sub: &Subspace, domain: &Domain, cfg: &KernelConfig, x: &[f64]) -> Result<f64> {
    check_dim(sub.ambient_dim(), x.len())?;
    check_dim(domain.dim(), x.len())?;
    let frame = Frame::new(sub, cfg)?;
    Ok(frame.similarity(frame.distance(x)))
}

/// Largest `k(s, x)` over a uniform grid of `S ∩ χ` with `points_per_axis`
/// points along every local axis.
pub fn clipped_contribution(
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    x: &[f64],
    points_per_axis: usize,
) -> Result<f64> {
    check_dim(sub.ambient_dim(), x.len())?;
    check_dim(domain.dim(), x.len())?;
    cfg.check_input_dim(x.len())?;
    if points_per_axis < 2 {
        return Err(Error::InvalidInput("clipped contribution needs >= 2 grid points".into()));
    }
    let bounds = if sub.dim() == 1 {
        vec![sub.feasible_line_interval(domain)?]
    } else {
        sub.local_bounds(domain)
    };
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; sub.dim()];
    let mut local = vec![0.0; sub.dim()];
    'grid: loop {
        for (k, i) in idx.iter().enumerate() {
            let (lo, hi) = bounds[k];
            local[k] = lo + (hi - lo) * (*i as f64) / (points_per_axis - 1) as f64;
        }
        let s = sub.embed_unchecked(&local);
        if domain.contains(&s, 0.0) {
            best = best.max(cfg.eval_unchecked(&s, x));
        }
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < points_per_axis {
                continue 'grid;
            }
            idx[k] = 0;
        }
        break;
    }
    // the anchor is always feasible
    Ok(best.max(cfg.eval_unchecked(sub.anchor(), x)))
}

/// Per-observation ranking data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub index: usize,
    /// Orthogonal distance to the subspace (length-scaled for ARD kernels).
    pub distance: f64,
    pub contribution: f64,
}

/// Scores every observation, sorted by descending contribution.
///
/// Ties go to the lower observation index. With the projection shortcut
/// the order is by ascending distance, which is the same order for
/// distance-monotone kernels but stays strict where similarities underflow.
pub fn rank(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    use_approximation: bool,
) -> Result<Vec<Scored>> {
    check_dim(sub.ambient_dim(), data.dim())?;
    check_dim(domain.dim(), data.dim())?;
    let frame = Frame::new(sub, cfg)?;
    let mut scored: Vec<Scored> = data
        .points()
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let distance = frame.distance(x);
            let contribution = if use_approximation {
                frame.similarity(distance)
            } else {
                clipped_contribution(sub, domain, cfg, x, CLIPPED_GRID_POINTS).unwrap_or(0.0)
            };
            Scored {
                index,
                distance,
                contribution,
            }
        })
        .collect();
    let order = |a: &Scored, b: &Scored| -> Ordering {
        if use_approximation {
            a.distance.total_cmp(&b.distance)
        } else {
            b.contribution
                .total_cmp(&a.contribution)
                .then(a.distance.total_cmp(&b.distance))
        }
        .then(a.index.cmp(&b.index))
    };
    scored.sort_by(order);
    Ok(scored)
}

fn sorted_indices(scored: &[Scored]) -> Vec<usize> {
    let mut idx: Vec<usize> = scored.iter().map(|s| s.index).collect();
    idx.sort_unstable();
    idx
}

/// Indices of the `m` highest-contribution observations, in observation order.
pub fn top_m_indices(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    m: usize,
    use_approximation: bool,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidInput("TopM needs M >= 1".into()));
    }
    if m >= data.len() {
        return Ok((0..data.len()).collect());
    }
    let scored = rank(data, sub, domain, cfg, use_approximation)?;
    Ok(sorted_indices(&scored[..m]))
}

/// Keeps the `m` observations with the highest contribution. If `m` is at
/// least the dataset size the dataset is returned unchanged.
pub fn extract_top_m(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    m: usize,
) -> Result<Dataset> {
    Ok(data.subset(&top_m_indices(data, sub, domain, cfg, m, true)?))
}

/// Indices of observations within Euclidean distance `tau` of the subspace.
pub fn tau_indices(data: &Dataset, sub: &Subspace, tau: f64) -> Result<Vec<usize>> {
    check_dim(sub.ambient_dim(), data.dim())?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tau must be >= 0, got {tau}")));
    }
    Ok(data
        .points()
        .iter()
        .enumerate()
        .filter(|(_, x)| sub.projection_distance_unchecked(x) <= tau)
        .map(|(i, _)| i)
        .collect())
}

/// Keeps the observations inside the ribbon of half-width `tau` around the subspace.
pub fn extract_tau(data: &Dataset, sub: &Subspace, tau: f64) -> Result<Dataset> {
    Ok(data.subset(&tau_indices(data, sub, tau)?))
}

/// Smallest `h ≥ 1` whose prefix of `sorted` (descending contributions)
/// holds at least a fraction `rate` of the total. `None` if the total is
/// not positive.
pub fn cumulative_count(sorted: &[f64], rate: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    if rate >= 1.0 {
        return Some(sorted.len());
    }
    let total: f64 = sorted.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut prefix = 0.0;
    for (h, c) in sorted.iter().enumerate() {
        prefix += c;
        if prefix / total >= rate {
            return Some(h + 1);
        }
    }
    Some(sorted.len())
}

/// Indices selected by the cumulative contribution rate `rate`, in observation order.
pub fn cumulative_indices(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    rate: f64,
    use_approximation: bool,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidInput(format!(
            "cumulative contribution rate must be in [0, 1], got {rate}"
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("cumulative extraction on an empty dataset".into()));
    }
    let scored = rank(data, sub, domain, cfg, use_approximation)?;
    let contributions: Vec<f64> = scored.iter().map(|s| s.contribution).collect();
    let h = match cumulative_count(&contributions, rate) {
        Some(h) => h,
        None => {
            log::warn!("all contributions vanish; keeping only the nearest observation");
            let nearest = scored
                .iter()
                .min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)))
                .map(|s| s.index)
                .unwrap_or(0);
            return Ok(vec![nearest]);
        }
    };
    Ok(sorted_indices(&scored[..h]))
}

/// Keeps the shortest prefix (by contribution) whose cumulative contribution
/// rate reaches `rate`. Always returns at least one observation; `rate = 1`
/// returns every observation.
pub fn extract_cumulative(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    rate: f64,
) -> Result<Dataset> {
    Ok(data.subset(&cumulative_indices(data, sub, domain, cfg, rate, true)?))
}

/// Applies the configured strategy; returns the selected observation indices
/// in ascending order. `epoch` is the subspace counter used by the `Tau`
/// decay schedule.
pub fn extract_indices(
    data: &Dataset,
    sub: &Subspace,
    domain: &Domain,
    cfg: &KernelConfig,
    lsod: &LsodConfig,
    epoch: u64,
) -> Result<Vec<usize>> {
    lsod.validate()?;
    match lsod.strategy {
        Strategy::None => Ok((0..data.len()).collect()),
        Strategy::TopM(m) => top_m_indices(data, sub, domain, cfg, m, lsod.use_approximation),
        Strategy::Tau { .. } => {
            let tau = lsod.tau_at(epoch).unwrap_or(0.0);
            if cfg.is_ard() {
                // distances measured in length-scaled coordinates
                let scored = rank(data, sub, domain, cfg, true)?;
                let mut idx: Vec<usize> =
                    scored.iter().filter(|s| s.distance <= tau).map(|s| s.index).collect();
                idx.sort_unstable();
                Ok(idx)
            } else {
                tau_indices(data, sub, tau)
            }
        }
        Strategy::Cumulative(c) => cumulative_indices(data, sub, domain, cfg, c, lsod.use_approximation),
    }
}

/// Hyperparameters available for choosing the next local subset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionHistory {
    initial: Option<KernelConfig>,
    last_local: Option<KernelConfig>,
}

impl ExtractionHistory {
    /// Records the hyperparameters estimated from the initial design.
    pub fn set_initial(&mut self, cfg: KernelConfig) {
        self.initial = Some(cfg);
    }

    /// Records the hyperparameters of the latest local fit.
    pub fn record_local_fit(&mut self, cfg: KernelConfig) {
        self.last_local = Some(cfg);
    }
}

/// Hyperparameters used to extract the next subset: those of the previous
/// local fit, or those estimated on the initial design before any local fit.
pub fn select_extraction_hyperparams(history: &ExtractionHistory) -> Result<KernelConfig> {
    history
        .last_local
        .as_ref()
        .or(history.initial.as_ref())
        .cloned()
        .ok_or_else(|| Error::InvalidState("no hyperparameters recorded for extraction".into()))
}
