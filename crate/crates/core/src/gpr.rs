//! Gaussian-process regression: posterior mean/variance, log marginal
//! likelihood and derivative-free hyperparameter estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::kernels::{KernelConfig, LengthScale};
use crate::linalg::{sq_dist, Cholesky};
use crate::neldermead;

/// Noise standard deviation used when none is given (standardized-y units).
pub const DEFAULT_NOISE_STD: f64 = 1e-6;

/// Each jitter escalation multiplies the noise variance by ten, at most this many times.
const MAX_JITTER_ESCALATIONS: i32 = 6;

/// Ordered, append-only observation set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            points: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_parts(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points.first().map_or(0, Vec::len);
        let mut data = Dataset::new(dim);
        for (x, y) in points.into_iter().zip(values) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    /// Appends an observation and returns its index.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("observed value must be finite, got {y}")));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Observations at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }

    fn with_values(&self, values: Vec<f64>) -> Dataset {
        Dataset {
            dim: self.dim,
            points: self.points.clone(),
            values,
        }
    }
}

/// Anything that yields a predictive mean and variance.
pub trait Predictive {
    fn input_dim(&self) -> usize;

    /// Mean and variance at `x`; `x` must have dimension [`Predictive::input_dim`].
    fn predict_unchecked(&self, x: &[f64]) -> (f64, f64);

    fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.predict_unchecked(x))
    }
}

/// Gram matrix plus `noise_var` on the diagonal, row-major, lower triangle filled.
fn noisy_gram(points: &[Vec<f64>], cfg: &KernelConfig, noise_var: f64) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            k[i * n + j] = cfg.eval_unchecked(&points[i], &points[j]);
        }
        k[i * n + i] = cfg.signal_variance() + noise_var;
    }
    k
}

/// Factorizes `K + σ²I`, escalating the diagonal when `σ > 0` and the
/// factorization fails. With `σ = 0` a single exact attempt is made.
fn factorize<F>(n: usize, noise_var: f64, build: F) -> Result<(Cholesky, f64)>
where
    F: Fn(f64) -> Vec<f64>,
{
    let attempts = if noise_var > 0.0 { MAX_JITTER_ESCALATIONS + 1 } else { 1 };
    let mut var = noise_var;
    for _ in 0..attempts {
        if let Some(c) = Cholesky::factor(build(var), n) {
            return Ok((c, var));
        }
        var *= 10.0;
    }
    Err(Error::Degenerate(format!(
        "Cholesky factorization of {n}x{n} kernel matrix failed (noise variance {noise_var:e})"
    )))
}

fn validate_fit_inputs(data: &Dataset, cfg: &KernelConfig, noise_std: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot fit a GP to an empty dataset".into()));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidInput(format!("noise std must be >= 0, got {noise_std}")));
    }
    cfg.validate()?;
    cfg.check_input_dim(data.dim())
}

/// A fitted GP: training data, Cholesky factor of `K + σ²I` and weights
/// `(K + σ²I)⁻¹ y`.
#[derive(Debug, Clone)]
pub struct Posterior {
    data: Dataset,
    cfg: KernelConfig,
    noise_std: f64,
    noise_var: f64,
    chol: Cholesky,
    weights: Vec<f64>,
}

/// Fits the GP posterior on `data`.
pub fn fit_posterior(data: &Dataset, cfg: &KernelConfig, noise_std: f64) -> Result<Posterior> {
    validate_fit_inputs(data, cfg, noise_std)?;
    let (chol, noise_var) = factorize(data.len(), noise_std * noise_std, |v| {
        noisy_gram(data.points(), cfg, v)
    })?;
    let mut weights = data.values().to_vec();
    chol.solve(&mut weights);
    Ok(Posterior {
        data: data.clone(),
        cfg: cfg.clone(),
        noise_std,
        noise_var,
        chol,
        weights,
    })
}

impl Posterior {
    pub fn training_data(&self) -> &Dataset {
        &self.data
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Diagonal noise variance actually used, after any jitter escalation.
    pub fn effective_noise_variance(&self) -> f64 {
        self.noise_var
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Log marginal likelihood of the training data (constant dropped).
    pub fn log_marginal_likelihood(&self) -> f64 {
        let fit: f64 = self.data.values().iter().zip(&self.weights).map(|(y, w)| y * w).sum();
        -self.chol.log_det() - fit
    }

    /// Entry `(i, j)` of the lower Cholesky factor of `K + σ²I`.
    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        self.chol.get(i, j)
    }
}

impl Predictive for Posterior {
    fn input_dim(&self) -> usize {
        self.data.dim()
    }

    fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let mut k: Vec<f64> = self
            .data
            .points()
            .iter()
            .map(|p| self.cfg.eval_unchecked(x, p))
            .collect();
        let mean = k.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        self.chol.forward(&mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        let var = (self.cfg.signal_variance() - explained).max(0.0);
        (mean, var)
    }
}

/// `−log|K + σ²I| − yᵀ(K + σ²I)⁻¹y`.
pub fn log_marginal_likelihood(data: &Dataset, cfg: &KernelConfig, noise_std: f64) -> Result<f64> {
    Ok(fit_posterior(data, cfg, noise_std)?.log_marginal_likelihood())
}

/// Box constraints for hyperparameter search, in natural-log space.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    pub log_signal_std: (f64, f64),
    pub log_length_scale: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            log_signal_std: (1e-3f64.ln(), 1e3f64.ln()),
            log_length_scale: (1e-3f64.ln(), 10f64.ln()),
        }
    }
}

impl HyperBounds {
    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if ok(self.log_signal_std) && ok(self.log_length_scale) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid hyperparameter bounds {self:?}")))
        }
    }
}

/// Options for [`estimate_hyperparams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub bounds: HyperBounds,
    /// Number of simplex starts: the template plus `n_starts − 1` perturbations.
    pub n_starts: usize,
    pub max_evals_per_start: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            bounds: HyperBounds::default(),
            n_starts: 3,
            max_evals_per_start: 200,
            noise_std: DEFAULT_NOISE_STD,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperEstimate {
    pub config: KernelConfig,
    /// Log marginal likelihood at `config`; `None` when every start failed.
    pub log_likelihood: Option<f64>,
    pub evaluations: usize,
    /// Set when estimation fell back to the template.
    pub warning: Option<String>,
}

/// Precomputed geometry for repeated likelihood evaluations on fixed inputs.
struct LikelihoodSurface<'a> {
    data: &'a Dataset,
    template: &'a KernelConfig,
    // isotropic only: lower-triangular squared distances
    sq: Option<Vec<f64>>,
    noise_var: f64,
}

impl<'a> LikelihoodSurface<'a> {
    fn new(data: &'a Dataset, template: &'a KernelConfig, noise_std: f64) -> Self {
        let n = data.len();
        let sq = (!template.is_ard()).then(|| {
            let mut sq = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..i {
                    sq[i * n + j] = sq_dist(data.point(i), data.point(j));
                }
            }
            sq
        });
        LikelihoodSurface {
            data,
            template,
            sq,
            noise_var: noise_std * noise_std,
        }
    }

    fn config_at(&self, params: &[f64]) -> Result<KernelConfig> {
        let ls = match self.template.length_scale() {
            LengthScale::Isotropic(_) => LengthScale::Isotropic(params[1].exp()),
            LengthScale::Ard(_) => LengthScale::Ard(params[1..].iter().map(|p| p.exp()).collect()),
        };
        self.template.with_signal_std(params[0].exp())?.with_length_scale(ls)
    }

    fn evaluate(&self, params: &[f64]) -> Option<f64> {
        let cfg = self.config_at(params).ok()?;
        let n = self.data.len();
        let (chol, _) = match &self.sq {
            Some(sq) => factorize(n, self.noise_var, |v| {
                let l = cfg.mean_length_scale();
                let inv = 1.0 / (l * l);
                let mut k = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        k[i * n + j] = cfg.from_scaled_sq(sq[i * n + j] * inv);
                    }
                    k[i * n + i] = cfg.signal_variance() + v;
                }
                k
            }),
            None => factorize(n, self.noise_var, |v| noisy_gram(self.data.points(), &cfg, v)),
        }
        .ok()?;
        let mut w = self.data.values().to_vec();
        chol.solve(&mut w);
        let fit: f64 = self.data.values().iter().zip(&w).map(|(y, w)| y * w).sum();
        let lml = -chol.log_det() - fit;
        lml.is_finite().then_some(lml)
    }
}

/// Maximizes the log marginal likelihood over `(log θ_σ, log θ_l)` with a
/// bounded simplex search from the template and seeded perturbations of it.
pub fn estimate_hyperparams(
    data: &Dataset,
    template: &KernelConfig,
    opts: &EstimateOptions,
) -> Result<HyperEstimate> {
    if data.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "hyperparameter estimation needs at least 2 observations, got {}",
            data.len()
        )));
    }
    validate_fit_inputs(data, template, opts.noise_std)?;
    opts.bounds.validate()?;
    if opts.n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be >= 1".into()));
    }

    let surface = LikelihoodSurface::new(data, template, opts.noise_std);
    let mut start = vec![template.signal_std().ln()];
    match template.length_scale() {
        LengthScale::Isotropic(l) => start.push(l.ln()),
        LengthScale::Ard(ls) => start.extend(ls.iter().map(|l| l.ln())),
    }
    let (s_lo, s_hi) = opts.bounds.log_signal_std;
    let (l_lo, l_hi) = opts.bounds.log_length_scale;
    let mut lower = vec![l_lo; start.len()];
    let mut upper = vec![l_hi; start.len()];
    lower[0] = s_lo;
    upper[0] = s_hi;
    for ((v, lo), hi) in start.iter_mut().zip(&lower).zip(&upper) {
        *v = v.clamp(*lo, *hi);
    }

    let nm = neldermead::Options {
        max_evals: opts.max_evals_per_start,
        initial_step: 0.5,
        f_tol: 1e-7,
        x_tol: 1e-4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    for s in 0..opts.n_starts {
        let x0: Vec<f64> = if s == 0 {
            start.clone()
        } else {
            start
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(v, (lo, hi))| (v + rng.gen_range(-1.5..1.5)).clamp(*lo, *hi))
                .collect()
        };
        let m = neldermead::minimize(
            |p| surface.evaluate(p).map_or(f64::INFINITY, |v| -v),
            &x0,
            &lower,
            &upper,
            &nm,
        );
        evaluations += m.evals;
        if m.value.is_finite() && best.as_ref().map_or(true, |(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }

    match best {
        Some((params, neg)) => Ok(HyperEstimate {
            config: surface.config_at(&params)?,
            log_likelihood: Some(-neg),
            evaluations,
            warning: None,
        }),
        None => {
            let warning = format!(
                "hyperparameter estimation failed on all {} starts; keeping template",
                opts.n_starts
            );
            log::warn!("{warning}");
            Ok(HyperEstimate {
                config: template.clone(),
                log_likelihood: None,
                evaluations,
                warning: Some(warning),
            })
        }
    }
}

/// Affine map of targets to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub offset: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Population mean and standard deviation of `values`; a zero spread
    /// keeps unit scale.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let offset = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - offset) * (v - offset)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 * offset.abs().max(1.0) { sd } else { 1.0 };
        Standardizer { offset, scale }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        data.with_values(
            data.values().iter().map(|v| (v - self.offset) / self.scale).collect(),
        )
    }
}

/// A posterior fitted on standardized targets; predictions are reported in
/// the original units.
#[derive(Debug, Clone)]
pub struct Surrogate {
    posterior: Posterior,
    standardizer: Standardizer,
}

impl Surrogate {
    pub fn fit(data: &Dataset, cfg: &KernelConfig, noise_std: f64) -> Result<Self> {
        let standardizer = Standardizer::fit(data.values());
        let posterior = fit_posterior(&standardizer.apply(data), cfg, noise_std)?;
        Ok(Surrogate {
            posterior,
            standardizer,
        })
    }

    /// The posterior in standardized units.
    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn standardizer(&self) -> Standardizer {
        self.standardizer
    }
}

impl Predictive for Surrogate {
    fn input_dim(&self) -> usize {
        self.posterior.input_dim()
    }

    fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.posterior.predict_unchecked(x);
        let s = self.standardizer;
        (m * s.scale + s.offset, v * s.scale * s.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    fn one_point(y: f64) -> Dataset {
        Dataset::from_parts(vec![vec![0.0]], vec![y]).unwrap()
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::from_parts(vec![vec![0.0]], vec![]).is_err());
        let mut d = Dataset::new(2);
        assert_eq!(d.push(vec![0.0, 1.0], 3.0).unwrap(), 0);
        assert_eq!(d.push(vec![1.0, 1.0], 4.0).unwrap(), 1);
        assert!(d.push(vec![1.0], 4.0).is_err());
        assert!(d.push(vec![1.0, 2.0], f64::NAN).is_err());
        let s = d.subset(&[1]);
        assert_eq!(s.values(), &[4.0]);
        assert_eq!(s.point(0), &[1.0, 1.0]);
    }

    #[test]
    fn noiseless_single_point() {
        let post = fit_posterior(&one_point(2.0), &KernelConfig::se(), 0.0).unwrap();
        assert_eq!(post.predict(&[0.0]).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn unit_noise_single_point() {
        let post = fit_posterior(&one_point(2.0), &KernelConfig::se(), 1.0).unwrap();
        let (m, v) = post.predict(&[0.0]).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_point_at_unit_distance() {
        let post = fit_posterior(&one_point(2.0), &KernelConfig::se(), 0.0).unwrap();
        let (m, v) = post.predict(&[1.0]).unwrap();
        assert!((m - 2.0 * (-0.5f64).exp()).abs() < 1e-14);
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn prior_recovered_far_from_data() {
        let data = Dataset::from_parts(vec![vec![0.0], vec![0.1]], vec![1.0, -2.0]).unwrap();
        let cfg = KernelConfig::isotropic(KernelFamily::SquaredExponential, 1.5, 0.1).unwrap();
        let post = fit_posterior(&data, &cfg, 1e-3).unwrap();
        let (m, v) = post.predict(&[10.0]).unwrap();
        assert!(m.abs() < 1e-6);
        assert!((v - 2.25).abs() < 1e-6);
    }

    #[test]
    fn interpolates_training_points() {
        let data =
            Dataset::from_parts(vec![vec![0.0], vec![0.5], vec![1.0]], vec![1.0, -1.0, 0.5]).unwrap();
        let post = fit_posterior(&data, &KernelConfig::se(), 0.0).unwrap();
        for i in 0..3 {
            let (m, v) = post.predict(data.point(i)).unwrap();
            assert!((m - data.value(i)).abs() < 1e-8);
            assert!(v <= 1e-8);
        }
    }

    #[test]
    fn duplicate_points_without_noise_are_degenerate() {
        let data = Dataset::from_parts(vec![vec![0.3], vec![0.3]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            fit_posterior(&data, &KernelConfig::se(), 0.0),
            Err(Error::Degenerate(_))
        ));
        // with a noise floor the same data factorizes
        assert!(fit_posterior(&data, &KernelConfig::se(), 1e-6).is_ok());
    }

    #[test]
    fn fit_errors() {
        assert!(fit_posterior(&Dataset::new(1), &KernelConfig::se(), 0.0).is_err());
        assert!(fit_posterior(&one_point(1.0), &KernelConfig::se(), -1.0).is_err());
        let post = fit_posterior(&one_point(1.0), &KernelConfig::se(), 0.0).unwrap();
        assert!(matches!(post.predict(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lml_closed_forms() {
        assert_eq!(log_marginal_likelihood(&one_point(0.0), &KernelConfig::se(), 0.0).unwrap(), 0.0);
        // θ_σ² + σ² = 2
        let v = log_marginal_likelihood(&one_point(1.0), &KernelConfig::se(), 1.0).unwrap();
        assert!((v - (-(2f64.ln()) - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn estimate_needs_two_points() {
        assert!(estimate_hyperparams(&one_point(1.0), &KernelConfig::se(), &EstimateOptions::default())
            .is_err());
    }

    #[test]
    fn zero_signal_drives_signal_std_to_lower_bound() {
        let data = Dataset::from_parts(vec![vec![0.0], vec![0.5]], vec![0.0, 0.0]).unwrap();
        let est = estimate_hyperparams(&data, &KernelConfig::se(), &EstimateOptions::default()).unwrap();
        let lo = HyperBounds::default().log_signal_std.0;
        assert!((est.config.signal_std().ln() - lo).abs() < 1e-3, "{:?}", est.config);
    }

    #[test]
    fn estimate_never_worse_than_template() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let data = Dataset::from_parts(xs, ys).unwrap();
        let template = KernelConfig::isotropic(KernelFamily::Matern52, 0.5, 2.0).unwrap();
        let opts = EstimateOptions::default();
        let est = estimate_hyperparams(&data, &template, &opts).unwrap();
        let at_template = log_marginal_likelihood(&data, &template, opts.noise_std).unwrap();
        assert!(est.log_likelihood.unwrap() >= at_template);
        let check = log_marginal_likelihood(&data, &est.config, opts.noise_std).unwrap();
        assert!((check - est.log_likelihood.unwrap()).abs() < 1e-8);
        assert!(est.evaluations <= opts.n_starts * (opts.max_evals_per_start + 3));
    }

    #[test]
    fn standardized_surrogate_reports_original_units() {
        let data = Dataset::from_parts(vec![vec![0.0], vec![1.0]], vec![10.0, 14.0]).unwrap();
        let s = Surrogate::fit(&data, &KernelConfig::se(), 1e-6).unwrap();
        assert_eq!(s.standardizer(), Standardizer { offset: 12.0, scale: 2.0 });
        let (m, _) = s.predict(&[1.0]).unwrap();
        assert!((m - 14.0).abs() < 1e-6);
        let (m_far, v_far) = s.predict(&[100.0]).unwrap();
        assert!((m_far - 12.0).abs() < 1e-9);
        assert!((v_far - 4.0).abs() < 1e-9);
    }

    #[test]
    fn constant_targets_keep_unit_scale() {
        assert_eq!(Standardizer::fit(&[3.0, 3.0]), Standardizer { offset: 3.0, scale: 1.0 });
    }
}
