//! Optimization loops: standard BO over the whole box, BOLD (subspace search
//! with a global surrogate) and BOLDUC (subspace search with a local
//! surrogate trained on the local subset of data).
//!
//! All three share one loop. Per iteration it defines the search subspace,
//! picks the training set, re-estimates hyperparameters, fits the
//! surrogate, maximizes the LCB, then observes and records.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_over_domain, maximize_over_region, AcquisitionConfig};
use crate::design::{init_design, InitScheme};
use crate::error::{Error, Result};
use crate::gpr::{estimate_hyperparams, Dataset, EstimateOptions, HyperBounds, Standardizer, Surrogate, DEFAULT_NOISE_STD};
use crate::kernels::{KernelConfig, KernelFamily};
use crate::linalg::sq_dist;
use crate::lsod::{extract_indices, select_extraction_hyperparams, ExtractionHistory, LsodConfig, Strategy};
use crate::subspace::{Domain, Subspace};

/// A black-box objective on the optimizer's domain.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;
}

impl<F: FnMut(&[f64]) -> f64> Objective for F {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// Adapts a closure that can fail.
pub struct Fallible<F>(pub F);

impl<F: FnMut(&[f64]) -> Result<f64>> Objective for Fallible<F> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// Hyperparameter re-estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    /// When false, the kernel template is used unchanged at every iteration.
    pub estimate: bool,
    pub n_starts: usize,
    pub max_evals_per_start: usize,
    pub log_signal_std: (f64, f64),
    pub log_length_scale: (f64, f64),
}

impl Default for HyperConfig {
    fn default() -> Self {
        let b = HyperBounds::default();
        HyperConfig {
            estimate: true,
            n_starts: 3,
            max_evals_per_start: 200,
            log_signal_std: b.log_signal_std,
            log_length_scale: b.log_length_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Total number of observations `N`, initial design included.
    pub budget: usize,
    /// Size of the initial design `N₀`.
    pub n_init: usize,
    /// `d_t`; 0 searches the whole box.
    pub subspace_dim: usize,
    /// The subspace is replaced after `switch_multiplier · d_t` observations.
    pub switch_multiplier: usize,
    /// Kernel family and the starting point for hyperparameter estimation.
    pub kernel: KernelConfig,
    /// Noise standard deviation in standardized-target units.
    pub noise_std: f64,
    pub hyper: HyperConfig,
    pub lsod: LsodConfig,
    pub acq: AcquisitionConfig,
    pub seed: u64,
    pub init_scheme: InitScheme,
    /// A query closer than this to the incumbent triggers a switch.
    pub stagnation_eps: f64,
}

impl RunConfig {
    pub fn new(budget: usize, n_init: usize) -> Self {
        RunConfig {
            budget,
            n_init,
            subspace_dim: 1,
            switch_multiplier: 5,
            kernel: KernelConfig::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2)
                .expect("valid default kernel"),
            noise_std: DEFAULT_NOISE_STD,
            hyper: HyperConfig::default(),
            lsod: LsodConfig::default(),
            acq: AcquisitionConfig::default(),
            seed: 0,
            init_scheme: InitScheme::Random,
            stagnation_eps: 1e-3,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_init < 1 || self.budget < self.n_init {
            return Err(Error::InvalidInput(format!(
                "need budget >= n_init >= 1, got budget={} n_init={}",
                self.budget, self.n_init
            )));
        }
        if self.subspace_dim >= dim {
            return Err(Error::InvalidInput(format!(
                "subspace dimension {} must be below the domain dimension {dim}",
                self.subspace_dim
            )));
        }
        if self.subspace_dim > 2 {
            return Err(Error::Unsupported(format!(
                "only line and plane subspaces are generated, got d_t={}",
                self.subspace_dim
            )));
        }
        if self.subspace_dim > 0 && self.switch_multiplier == 0 {
            return Err(Error::InvalidInput("switch multiplier must be >= 1".into()));
        }
        if !(self.noise_std >= 0.0) || !(self.stagnation_eps >= 0.0) {
            return Err(Error::InvalidInput("noise std and stagnation eps must be >= 0".into()));
        }
        self.kernel.validate()?;
        self.kernel.check_input_dim(dim)?;
        self.lsod.validate()?;
        self.acq.validate()
    }

    fn estimate_options(&self, seed: u64) -> EstimateOptions {
        EstimateOptions {
            bounds: HyperBounds {
                log_signal_std: self.hyper.log_signal_std,
                log_length_scale: self.hyper.log_length_scale,
            },
            n_starts: self.hyper.n_starts,
            max_evals_per_start: self.hyper.max_evals_per_start,
            noise_std: self.noise_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    /// Wall time of the whole iteration.
    pub elapsed_ms: f64,
    /// Wall time of subset extraction, hyperparameter estimation and fitting.
    pub fit_ms: f64,
}

/// One observation and the state that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of observations after this one (1-based).
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_y: f64,
    pub best_index: usize,
    /// Training-set size of the surrogate that proposed `x` (0 for the initial design).
    pub lsod_size: usize,
    /// Mean length scale of the proposing surrogate (`None` for the initial design).
    pub theta_l: Option<f64>,
    pub theta_sigma: Option<f64>,
    /// Active subspace when `x` was proposed.
    pub subspace_id: Option<u64>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    /// Every subspace used, indexed by id.
    pub subspaces: Vec<Subspace>,
    pub best_index: usize,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Set when the run stopped early.
    pub failure: Option<String>,
}

impl Trace {
    fn new() -> Self {
        Trace {
            records: Vec::new(),
            subspaces: Vec::new(),
            best_index: 0,
            best_point: Vec::new(),
            best_value: f64::NAN,
            failure: None,
        }
    }

    /// Copy with all wall-clock fields zeroed, for outcome comparisons.
    pub fn without_timing(&self) -> Trace {
        let mut t = self.clone();
        t.records.iter_mut().for_each(|r| r.timing = Timing::default());
        t
    }
}

/// Index, point and value of the smallest observation; ties go to the lowest index.
pub fn best_point(data: &Dataset) -> Result<(usize, &[f64], f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &y) in data.values().iter().enumerate() {
        if best.map_or(true, |(_, b)| y < b) {
            best = Some((i, y));
        }
    }
    let (i, y) = best.ok_or_else(|| Error::InvalidInput("best point of an empty dataset".into()))?;
    Ok((i, data.point(i), y))
}

/// Loop state used to decide subspace switches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwitchState {
    pub observations_since_switch: usize,
    pub last_query: Option<Vec<f64>>,
    /// Incumbent when `last_query` was proposed.
    pub incumbent_at_query: Option<Vec<f64>>,
}

/// True after `switch_multiplier · d_t` observations on the current
/// subspace, or when the latest query collapsed onto the incumbent.
pub fn should_switch(state: &SwitchState, cfg: &RunConfig) -> bool {
    if state.observations_since_switch >= cfg.switch_multiplier * cfg.subspace_dim {
        return true;
    }
    match (&state.last_query, &state.incumbent_at_query) {
        (Some(q), Some(inc)) => sq_dist(q, inc).sqrt() < cfg.stagnation_eps,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Standard,
    Bold,
    Bolduc,
}

// SplitMix64 finalizer for per-iteration seeds.
fn derive_seed(seed: u64, tag: u64, t: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ t.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_HYPER: u64 = 1;
const TAG_PLANE: u64 = 2;
const TAG_FULL_SPACE: u64 = 3;
const TAG_INITIAL_HYPER: u64 = 4;

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Estimates hyperparameters on standardized targets (falling back to
/// `template` when there is too little data), then fits the surrogate.
fn fit_surrogate(data: &Dataset, template: &KernelConfig, cfg: &RunConfig, seed: u64) -> Result<(KernelConfig, Surrogate)> {
    let theta = if cfg.hyper.estimate && data.len() >= 2 {
        let standardized = Standardizer::fit(data.values()).apply(data);
        estimate_hyperparams(&standardized, template, &cfg.estimate_options(seed))?.config
    } else {
        template.clone()
    };
    let surrogate = Surrogate::fit(data, &theta, cfg.noise_std)?;
    Ok((theta, surrogate))
}

fn run_loop<O: Objective + ?Sized>(objective: &mut O, domain: &Domain, cfg: &RunConfig, method: Method) -> Result<Trace> {
    let dim = domain.dim();
    cfg.validate(dim)?;
    match method {
        Method::Standard if cfg.subspace_dim != 0 => {
            return Err(Error::InvalidInput("standard BO searches the full space; set subspace_dim = 0".into()))
        }
        Method::Bold | Method::Bolduc if cfg.subspace_dim == 0 => {
            return Err(Error::InvalidInput("subspace methods need subspace_dim >= 1".into()))
        }
        Method::Bolduc if cfg.lsod.strategy == Strategy::None => {
            return Err(Error::InvalidInput("BOLDUC needs an extraction strategy".into()))
        }
        _ => {}
    }

    let mut trace = Trace::new();
    let mut data = Dataset::new(dim);
    let mut incumbent: Option<(usize, f64)> = None;

    let observe = |data: &mut Dataset,
                       trace: &mut Trace,
                       incumbent: &mut Option<(usize, f64)>,
                       x: Vec<f64>,
                       y: f64,
                       meta: (usize, Option<f64>, Option<f64>, Option<u64>, Timing)|
     -> Result<()> {
        let idx = data.push(x.clone(), y)?;
        if incumbent.map_or(true, |(_, b)| y < b) {
            *incumbent = Some((idx, y));
        }
        let (best_index, best_y) = incumbent.expect("set above");
        trace.records.push(IterationRecord {
            t: data.len(),
            x,
            y,
            best_y,
            best_index,
            lsod_size: meta.0,
            theta_l: meta.1,
            theta_sigma: meta.2,
            subspace_id: meta.3,
            timing: meta.4,
        });
        Ok(())
    };

    for x in init_design(domain, cfg.n_init, cfg.init_scheme, cfg.seed)? {
        let start = Instant::now();
        let y = match objective.evaluate(&x) {
            Ok(y) if y.is_finite() => y,
            Ok(y) => return Ok(finish(trace, &data, Some(format!("objective returned non-finite value {y}")))),
            Err(e) => return Ok(finish(trace, &data, Some(e.to_string()))),
        };
        let timing = Timing {
            elapsed_ms: ms_since(start),
            fit_ms: 0.0,
        };
        observe(&mut data, &mut trace, &mut incumbent, x, y, (0, None, None, None, timing))?;
    }

    let mut history = ExtractionHistory::default();
    if method == Method::Bolduc {
        let seed = derive_seed(cfg.seed, TAG_INITIAL_HYPER, 0);
        let (theta, _) = fit_surrogate(&data, &cfg.kernel, cfg, seed)?;
        history.set_initial(theta);
    }

    let mut template = cfg.kernel.clone();
    let mut plane_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_PLANE, 0));
    let mut switch = SwitchState::default();
    let mut subspace: Option<Subspace> = None;

    for t in cfg.n_init..cfg.budget {
        let start = Instant::now();
        let (best_idx, _) = incumbent.expect("initial design is nonempty");

        if method != Method::Standard && (subspace.is_none() || should_switch(&switch, cfg)) {
            let id = trace.subspaces.len() as u64;
            let anchor = data.point(best_idx).to_vec();
            let axis = (id % dim as u64) as usize;
            let s = match cfg.subspace_dim {
                1 => Subspace::coordinate_line(anchor, axis, id)?,
                _ => Subspace::random_plane(anchor, axis, &mut plane_rng, id)?,
            };
            trace.subspaces.push(s.clone());
            subspace = Some(s);
            switch = SwitchState::default();
        }

        let fit_start = Instant::now();
        let training = match (&subspace, method) {
            (Some(s), Method::Bolduc) => {
                let theta = select_extraction_hyperparams(&history)?;
                let idx = extract_indices(&data, s, domain, &theta, &cfg.lsod, s.id())?;
                if idx.len() == data.len() {
                    data.clone()
                } else {
                    data.subset(&idx)
                }
            }
            _ => data.clone(),
        };
        let fitted = fit_surrogate(&training, &template, cfg, derive_seed(cfg.seed, TAG_HYPER, t as u64));
        let (theta, surrogate) = match fitted {
            Ok(v) => v,
            Err(e) => return Ok(finish(trace, &data, Some(format!("surrogate fit failed: {e}")))),
        };
        let fit_ms = ms_since(fit_start);
        if method == Method::Bolduc {
            history.record_local_fit(theta.clone());
        }
        template = theta.clone();

        let suggestion = match &subspace {
            Some(s) => maximize_over_region(&surrogate, s, domain, &cfg.acq)?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_FULL_SPACE, t as u64));
                maximize_over_domain(&surrogate, domain, &cfg.acq, &mut rng)?
            }
        };
        let x = suggestion.point;

        let y = match objective.evaluate(&x) {
            Ok(y) if y.is_finite() => y,
            Ok(y) => return Ok(finish(trace, &data, Some(format!("objective returned non-finite value {y}")))),
            Err(e) => return Ok(finish(trace, &data, Some(e.to_string()))),
        };
        switch.observations_since_switch += 1;
        switch.incumbent_at_query = Some(data.point(best_idx).to_vec());
        switch.last_query = Some(x.clone());

        let timing = Timing {
            elapsed_ms: ms_since(start),
            fit_ms,
        };
        let meta = (
            training.len(),
            Some(theta.mean_length_scale()),
            Some(theta.signal_std()),
            subspace.as_ref().map(Subspace::id),
            timing,
        );
        observe(&mut data, &mut trace, &mut incumbent, x, y, meta)?;
    }
    Ok(finish(trace, &data, None))
}

fn finish(mut trace: Trace, data: &Dataset, failure: Option<String>) -> Trace {
    if let Ok((i, x, y)) = best_point(data) {
        trace.best_index = i;
        trace.best_point = x.to_vec();
        trace.best_value = y;
    }
    trace.failure = failure;
    trace
}

/// Standard BO: global surrogate, acquisition maximized over the whole box.
pub fn run_standard_bo<O: Objective + ?Sized>(mut objective: O, domain: &Domain, cfg: &RunConfig) -> Result<Trace>
where
    O: Sized,
{
    run_loop(&mut objective, domain, cfg, Method::Standard)
}

/// BOLD: global surrogate, acquisition maximized over the current subspace.
pub fn run_bold<O: Objective>(mut objective: O, domain: &Domain, cfg: &RunConfig) -> Result<Trace> {
    run_loop(&mut objective, domain, cfg, Method::Bold)
}

/// BOLDUC: local surrogate on the extracted subset, acquisition maximized
/// over the current subspace.
pub fn run_bolduc<O: Objective>(mut objective: O, domain: &Domain, cfg: &RunConfig) -> Result<Trace> {
    run_loop(&mut objective, domain, cfg, Method::Bolduc)
}

/// Runs with a borrowed objective, choosing the method from the config and `local`.
pub fn run_with<O: Objective + ?Sized>(objective: &mut O, domain: &Domain, cfg: &RunConfig, local: bool) -> Result<Trace> {
    let method = match (cfg.subspace_dim, local) {
        (0, _) => Method::Standard,
        (_, false) => Method::Bold,
        (_, true) => Method::Bolduc,
    };
    run_loop(objective, domain, cfg, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Benchmark;
    use rand::Rng;

    fn quick(budget: usize, n_init: usize, d_t: usize) -> RunConfig {
        let mut cfg = RunConfig::new(budget, n_init);
        cfg.subspace_dim = d_t;
        cfg.acq.grid_points_1d = 201;
        cfg.acq.full_space_samples = 256;
        cfg.hyper.max_evals_per_start = 60;
        cfg
    }

    #[test]
    fn best_point_ties_and_order() {
        let d = Dataset::from_parts(vec![vec![0.0], vec![1.0], vec![2.0]], vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(best_point(&d).unwrap().0, 1);
        let d = Dataset::from_parts(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(best_point(&d).unwrap().0, 0);
        assert!(best_point(&Dataset::new(1)).is_err());
    }

    #[test]
    fn best_point_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = Dataset::from_parts(vals.iter().map(|_| vec![0.0]).collect(), vals.clone()).unwrap();
        let mut scan = 0;
        for i in 1..vals.len() {
            if vals[i] < vals[scan] {
                scan = i;
            }
        }
        assert_eq!(best_point(&d).unwrap().0, scan);
    }

    #[test]
    fn switch_rules() {
        let mut cfg = RunConfig::new(10, 2);
        cfg.subspace_dim = 1;
        let mut s = SwitchState {
            observations_since_switch: 5,
            ..Default::default()
        };
        assert!(should_switch(&s, &cfg));
        s.observations_since_switch = 2;
        s.last_query = Some(vec![0.3, 0.0]);
        s.incumbent_at_query = Some(vec![0.0, 0.0]);
        assert!(!should_switch(&s, &cfg));
        s.last_query = Some(vec![1e-4, 0.0]);
        assert!(should_switch(&s, &cfg));
    }

    #[test]
    fn standard_bo_minimizes_quadratic() {
        let dom = Domain::unit_centered(1);
        let cfg = quick(30, 5, 0);
        let trace = run_standard_bo(|x: &[f64]| x[0] * x[0], &dom, &cfg).unwrap();
        assert_eq!(trace.records.len(), 30);
        assert!(trace.best_point[0].abs() <= 0.05, "{:?}", trace.best_point);
    }

    #[test]
    fn no_acquisitions_when_budget_equals_init() {
        let dom = Domain::unit_centered(2);
        let cfg = quick(4, 4, 0);
        let trace = run_standard_bo(|x: &[f64]| x[0] + x[1], &dom, &cfg).unwrap();
        assert_eq!(trace.records.len(), 4);
        let best = trace.records.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
        assert_eq!(trace.best_value, best);
        assert!(trace.records.iter().all(|r| r.lsod_size == 0));
    }

    #[test]
    fn constant_objective_keeps_constant_incumbent() {
        let dom = Domain::unit_centered(2);
        let trace = run_standard_bo(|_: &[f64]| 4.5, &dom, &quick(10, 3, 0)).unwrap();
        assert!(trace.records.iter().all(|r| r.best_y == 4.5 && r.best_index == 0));
    }

    #[test]
    fn bold_switches_on_schedule_and_cycles_axes() {
        let dom = Domain::unit_centered(3);
        let mut cfg = quick(3 + 20, 3, 1);
        cfg.stagnation_eps = 0.0;
        let f = |x: &[f64]| (x[0] - 0.1).powi(2) + (x[1] + 0.2).powi(2) + x[2].powi(2);
        let trace = run_bold(f, &dom, &cfg).unwrap();
        let ids: Vec<u64> = trace.records[3..].iter().map(|r| r.subspace_id.unwrap()).collect();
        let expect: Vec<u64> = (0..20).map(|i| i / 5).collect();
        assert_eq!(ids, expect);
        for (k, s) in trace.subspaces.iter().enumerate() {
            let mut e = vec![0.0; 3];
            e[k % 3] = 1.0;
            assert_eq!(s.basis()[0], e);
            // anchored at the incumbent when created
            let created_at = 3 + 5 * k;
            let inc = trace.records[created_at - 1].best_index;
            assert_eq!(s.anchor(), trace.records[inc].x.as_slice());
        }
    }

    #[test]
    fn queries_stay_on_active_subspace() {
        let dom = Domain::unit_centered(4);
        let bench = Benchmark::rosenbrock(4);
        for d_t in [1, 2] {
            let cfg = quick(25, 4, d_t);
            let trace = run_bold(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
            for r in &trace.records[4..] {
                let s = &trace.subspaces[r.subspace_id.unwrap() as usize];
                assert!(dom.contains(&r.x, 0.0));
                assert!(s.projection_distance(&r.x).unwrap() <= 1e-9);
            }
            assert!(trace.records.windows(2).all(|w| w[1].best_y <= w[0].best_y));
        }
    }

    #[test]
    fn bolduc_with_large_m_reduces_to_bold() {
        let dom = Domain::unit_centered(3);
        let bench = Benchmark::ackley(3);
        let mut cfg = quick(20, 3, 1);
        cfg.lsod = LsodConfig::new(Strategy::TopM(100));
        let a = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        let b = run_bold(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn full_cumulative_rate_trains_on_everything() {
        let dom = Domain::unit_centered(3);
        let bench = Benchmark::rosenbrock(3);
        let mut cfg = quick(15, 3, 1);
        cfg.lsod = LsodConfig::new(Strategy::Cumulative(1.0));
        let trace = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        for r in &trace.records[3..] {
            assert_eq!(r.lsod_size, r.t - 1);
        }
    }

    #[test]
    fn top_m_caps_training_size() {
        let dom = Domain::unit_centered(3);
        let bench = Benchmark::rosenbrock(3);
        let mut cfg = quick(20, 3, 1);
        cfg.lsod = LsodConfig::new(Strategy::TopM(8));
        let trace = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        for r in &trace.records[3..] {
            assert_eq!(r.lsod_size, (r.t - 1).min(8));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let dom = Domain::unit_centered(4);
        let bench = Benchmark::ackley(4);
        let mut cfg = quick(18, 4, 2);
        cfg.seed = 77;
        cfg.lsod = LsodConfig::new(Strategy::Tau { tau: 0.3, decay: 1.0 });
        let a = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        let b = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &dom, &cfg).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn objective_failure_keeps_partial_trace() {
        let dom = Domain::unit_centered(2);
        let mut calls = 0;
        let f = Fallible(|x: &[f64]| {
            calls += 1;
            if calls > 5 {
                Err(Error::Objective("simulator crashed".into()))
            } else {
                Ok(x[0])
            }
        });
        let trace = run_bold(f, &dom, &quick(12, 3, 1)).unwrap();
        assert_eq!(trace.records.len(), 5);
        assert!(trace.failure.as_deref().unwrap().contains("simulator crashed"));
    }

    #[test]
    fn config_errors() {
        let dom = Domain::unit_centered(3);
        let f = |x: &[f64]| x[0];
        assert!(run_bold(f, &dom, &quick(10, 3, 0)).is_err());
        assert!(run_standard_bo(f, &dom, &quick(10, 3, 1)).is_err());
        assert!(run_bolduc(f, &dom, &quick(10, 3, 1)).is_err());
        assert!(run_bold(f, &dom, &quick(10, 3, 3)).is_err());
        assert!(run_bold(f, &dom, &quick(2, 3, 1)).is_err());
    }
}
