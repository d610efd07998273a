//! Lower-confidence-bound acquisition and its maximization over a clipped
//! search subspace (or, for the standard loop, over the whole box).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gpr::Predictive;
use crate::neldermead;
use crate::subspace::{Domain, Subspace};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Exploration weight `κ`.
    pub kappa: f64,
    /// Grid size along a line.
    pub grid_points_1d: usize,
    /// Grid size per axis on a plane.
    pub grid_points_2d: usize,
    /// Golden-section iterations per refinement.
    pub refine_iters: usize,
    /// Random candidates for full-space maximization.
    pub full_space_samples: usize,
    /// Simplex refinements started from the best random candidates.
    pub full_space_starts: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            kappa: 2.0,
            grid_points_1d: 1001,
            grid_points_2d: 64,
            refine_iters: 40,
            full_space_samples: 1024,
            full_space_starts: 4,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidInput(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.grid_points_1d < 3 || self.grid_points_2d < 3 {
            return Err(Error::InvalidInput("acquisition grids need at least 3 points".into()));
        }
        if self.full_space_samples == 0 {
            return Err(Error::InvalidInput("full-space search needs at least one sample".into()));
        }
        Ok(())
    }
}

/// `−(μ − κ√v)`; larger is better.
#[inline]
pub fn lcb_value(mean: f64, variance: f64, kappa: f64) -> f64 {
    -(mean - kappa * variance.max(0.0).sqrt())
}

/// LCB acquisition of `model` at `x`.
pub fn lcb<P: Predictive + ?Sized>(model: &P, x: &[f64], kappa: f64) -> Result<f64> {
    let (m, v) = model.predict(x)?;
    Ok(lcb_value(m, v, kappa))
}

/// Maximizer of the acquisition and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Golden-section maximization of `f` on `[a, b]`. Returns the best point
/// seen; only strict improvements over `incumbent` replace it.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, iters: usize, incumbent: (f64, f64)) -> (f64, f64) {
    let mut best = incumbent;
    if !(b > a) {
        return best;
    }
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Maximizes the LCB over `S ∩ χ`.
///
/// Lines: uniform grid over the feasible interval, then golden-section
/// refinement inside the best grid cell. Planes: uniform grid over a box
/// enclosing the feasible region (infeasible nodes skipped), then
/// coordinate-wise golden-section refinement clipped to the domain.
/// Ties keep the lowest grid index. The result never scores below the best
/// grid node.
pub fn maximize_over_region<P: Predictive + ?Sized>(
    model: &P,
    sub: &Subspace,
    domain: &Domain,
    acq: &AcquisitionConfig,
) -> Result<Suggestion> {
    acq.validate()?;
    check_dim(domain.dim(), sub.ambient_dim())?;
    check_dim(model.input_dim(), sub.ambient_dim())?;
    if !domain.contains(sub.anchor(), 0.0) {
        return Err(Error::InvalidInput("subspace anchor lies outside the domain".into()));
    }
    let score = |local: &[f64]| {
        let x = sub.embed_unchecked(local);
        let (m, v) = model.predict_unchecked(&x);
        lcb_value(m, v, acq.kappa)
    };
    let local = match sub.dim() {
        1 => maximize_line(&score, sub, domain, acq)?,
        2 => maximize_plane(&score, sub, domain, acq),
        d => {
            return Err(Error::Unsupported(format!(
                "acquisition search on {d}-dimensional subspaces"
            )))
        }
    };
    let mut point = sub.embed_unchecked(&local.0);
    domain.clamp(&mut point);
    Ok(Suggestion {
        point,
        value: local.1,
    })
}

fn maximize_line<F: Fn(&[f64]) -> f64>(
    score: &F,
    sub: &Subspace,
    domain: &Domain,
    acq: &AcquisitionConfig,
) -> Result<(Vec<f64>, f64)> {
    let (lo, hi) = sub.feasible_line_interval(domain)?;
    let n = acq.grid_points_1d;
    let step = (hi - lo) / (n - 1) as f64;
    let at = |i: usize| if i + 1 == n { hi } else { lo + step * i as f64 };
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        let v = score(&[at(i)]);
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        // every node scored NaN; fall back to the anchor
        return Ok((vec![0.0], score(&[0.0])));
    }
    let (i, v) = best;
    let a = at(i.saturating_sub(1));
    let b = at((i + 1).min(n - 1));
    let (alpha, value) = golden_max(|t| score(&[t]), a, b, acq.refine_iters, (at(i), v));
    Ok((vec![alpha], value))
}

fn maximize_plane<F: Fn(&[f64]) -> f64>(
    score: &F,
    sub: &Subspace,
    domain: &Domain,
    acq: &AcquisitionConfig,
) -> (Vec<f64>, f64) {
    let bounds = sub.local_bounds(domain);
    let n = acq.grid_points_2d;
    let steps: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) / (n - 1) as f64).collect();
    let mut best: (Vec<f64>, f64) = (vec![0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let local = [bounds[0].0 + steps[0] * i as f64, bounds[1].0 + steps[1] * j as f64];
            if !sub.is_feasible(domain, &local) {
                continue;
            }
            let v = score(&local);
            if v > best.1 {
                best = (local.to_vec(), v);
            }
        }
    }
    // the anchor is always feasible, even when the grid misses a thin region
    let anchor_value = score(&[0.0, 0.0]);
    if anchor_value > best.1 {
        best = (vec![0.0, 0.0], anchor_value);
    }

    let per_line = (acq.refine_iters / 2).max(1);
    for _sweep in 0..2 {
        for k in 0..2 {
            let here = sub.embed_unchecked(&best.0);
            let (lo, hi) = domain.line_interval(&here, &sub.basis()[k]);
            let a = lo.max(-steps[k]);
            let b = hi.min(steps[k]);
            let origin = best.0.clone();
            let (t, v) = golden_max(
                |t| {
                    let mut c = origin.clone();
                    c[k] += t;
                    score(&c)
                },
                a,
                b,
                per_line,
                (0.0, best.1),
            );
            if v > best.1 {
                best.0[k] += t;
                best.1 = v;
            }
        }
    }
    best
}

/// Maximizes the LCB over the whole box: random candidates, then bounded
/// simplex refinement from the best few.
pub fn maximize_over_domain<P: Predictive + ?Sized, R: Rng + ?Sized>(
    model: &P,
    domain: &Domain,
    acq: &AcquisitionConfig,
    rng: &mut R,
) -> Result<Suggestion> {
    acq.validate()?;
    check_dim(model.input_dim(), domain.dim())?;
    let dim = domain.dim();
    let score = |x: &[f64]| {
        let (m, v) = model.predict_unchecked(x);
        lcb_value(m, v, acq.kappa)
    };
    let mut candidates: Vec<(Vec<f64>, f64)> = (0..acq.full_space_samples)
        .map(|_| {
            let x: Vec<f64> = (0..dim)
                .map(|d| rng.gen_range(domain.lower()[d]..=domain.upper()[d]))
                .collect();
            let v = score(&x);
            (x, v)
        })
        .collect();
    // stable sort keeps sampling order among ties
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = candidates[0].clone();
    let opts = neldermead::Options {
        max_evals: 50 * (dim + 1),
        initial_step: 0.05 * domain.diameter() / (dim as f64).sqrt(),
        f_tol: 1e-10,
        x_tol: 1e-7,
    };
    for (x0, _) in candidates.iter().take(acq.full_space_starts.max(1)) {
        let m = neldermead::minimize(|x| -score(x), x0, domain.lower(), domain.upper(), &opts);
        if -m.value > best.1 {
            best = (m.x, -m.value);
        }
    }
    Ok(Suggestion {
        point: best.0,
        value: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::{fit_posterior, Dataset};
    use crate::kernels::{KernelConfig, KernelFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A model with a fixed mean and variance everywhere.
    struct Flat(usize);
    impl Predictive for Flat {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn predict_unchecked(&self, _: &[f64]) -> (f64, f64) {
            (1.0, 0.25)
        }
    }

    #[test]
    fn lcb_values() {
        assert_eq!(lcb_value(1.0, 4.0, 2.0), 3.0);
        assert_eq!(lcb_value(1.5, 4.0, 0.0), -1.5);
        assert_eq!(lcb_value(1.5, 0.0, 7.0), -1.5);
        assert_eq!(lcb(&Flat(1), &[0.0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn flat_model_returns_first_grid_point() {
        let dom = Domain::unit_centered(3);
        let sub = Subspace::coordinate_line(vec![0.1, 0.0, 0.0], 0, 0).unwrap();
        let s = maximize_over_region(&Flat(3), &sub, &dom, &AcquisitionConfig::default()).unwrap();
        assert_eq!(s.point, vec![-0.5, 0.0, 0.0]);
    }

    #[test]
    fn line_suggestion_moves_only_along_the_line() {
        let dom = Domain::unit_centered(4);
        let data = Dataset::from_parts(vec![vec![0.2, -0.1, 0.3, 0.0], vec![0.0, 0.1, -0.2, 0.4]], vec![1.0, -1.0])
            .unwrap();
        let post = fit_posterior(&data, &KernelConfig::se(), 1e-3).unwrap();
        let sub = Subspace::coordinate_line(vec![0.1, 0.1, 0.1, 0.1], 2, 0).unwrap();
        let s = maximize_over_region(&post, &sub, &dom, &AcquisitionConfig::default()).unwrap();
        for d in [0, 1, 3] {
            assert_eq!(s.point[d], 0.1);
        }
        assert!(dom.contains(&s.point, 0.0));
    }

    #[test]
    fn bad_observation_pushes_query_to_far_end() {
        let dom = Domain::unit_centered(2);
        let anchor = vec![0.2, 0.0];
        let data = Dataset::from_parts(vec![anchor.clone()], vec![10.0]).unwrap();
        let cfg = KernelConfig::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2).unwrap();
        let post = fit_posterior(&data, &cfg, 0.0).unwrap();
        let sub = Subspace::coordinate_line(anchor, 0, 0).unwrap();
        let s = maximize_over_region(&post, &sub, &dom, &AcquisitionConfig::default()).unwrap();
        // dense oracle over the feasible interval [-0.7, 0.3]
        let (mut best_a, mut best_v) = (0.0, f64::NEG_INFINITY);
        for i in 0..100_000 {
            let a = -0.7 + 1.0 * i as f64 / 99_999.0;
            let v = lcb(&post, &[0.2 + a, 0.0], 2.0).unwrap();
            if v > best_v {
                best_a = a;
                best_v = v;
            }
        }
        assert!((s.point[0] - (0.2 + best_a)).abs() < 1e-5);
        assert!((s.point[0] + 0.5).abs() < 1e-12);
        assert!(s.value >= best_v - 1e-12);
    }

    #[test]
    fn plane_suggestion_is_feasible_and_beats_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dom = Domain::unit_centered(5);
        let pts: Vec<Vec<f64>> = (0..15).map(|_| (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
        let post = fit_posterior(&Dataset::from_parts(pts, vals).unwrap(), &KernelConfig::se(), 1e-3).unwrap();
        let sub = Subspace::random_plane(vec![0.3, -0.2, 0.1, 0.0, 0.4], 1, &mut rng, 0).unwrap();
        let acq = AcquisitionConfig::default();
        let s = maximize_over_region(&post, &sub, &dom, &acq).unwrap();
        assert!(dom.contains(&s.point, 0.0));
        assert!(sub.projection_distance(&s.point).unwrap() <= 1e-9);
        let bounds = sub.local_bounds(&dom);
        let n = acq.grid_points_2d;
        for i in 0..n {
            for j in 0..n {
                let c = [
                    bounds[0].0 + (bounds[0].1 - bounds[0].0) * i as f64 / (n - 1) as f64,
                    bounds[1].0 + (bounds[1].1 - bounds[1].0) * j as f64 / (n - 1) as f64,
                ];
                if sub.is_feasible(&dom, &c) {
                    let v = lcb(&post, &sub.embed(&c).unwrap(), acq.kappa).unwrap();
                    assert!(s.value >= v);
                }
            }
        }
    }

    #[test]
    fn full_space_search_stays_in_box() {
        let dom = Domain::unit_centered(3);
        let data = Dataset::from_parts(vec![vec![0.0; 3]], vec![1.0]).unwrap();
        let post = fit_posterior(&data, &KernelConfig::se(), 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = maximize_over_domain(&post, &dom, &AcquisitionConfig::default(), &mut rng).unwrap();
        assert!(dom.contains(&s.point, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let again = maximize_over_domain(&post, &dom, &AcquisitionConfig::default(), &mut rng).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn config_validation() {
        let mut acq = AcquisitionConfig::default();
        acq.kappa = -1.0;
        assert!(acq.validate().is_err());
        let mut acq = AcquisitionConfig::default();
        acq.grid_points_1d = 2;
        assert!(acq.validate().is_err());
    }

    #[test]
    fn larger_kappa_does_not_reduce_variance_at_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dom = Domain::unit_centered(3);
        let mut exceptions = 0;
        for _ in 0..30 {
            let pts: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
            let vals: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = KernelConfig::isotropic(KernelFamily::SquaredExponential, 1.0, 0.3).unwrap();
            let post = fit_posterior(&Dataset::from_parts(pts, vals).unwrap(), &cfg, 1e-3).unwrap();
            let sub = Subspace::coordinate_line(vec![0.0; 3], rng.gen_range(0..3), 0).unwrap();
            let var_at = |kappa: f64| {
                let acq = AcquisitionConfig { kappa, ..Default::default() };
                let s = maximize_over_region(&post, &sub, &dom, &acq).unwrap();
                post.predict(&s.point).unwrap().1
            };
            if var_at(4.0) < var_at(1.0) - 1e-9 {
                exceptions += 1;
            }
        }
        // argmax of -μ + κσ: the σ at the maximizer is nondecreasing in κ
        assert_eq!(exceptions, 0);
    }
}
