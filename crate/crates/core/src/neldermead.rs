//! Box-constrained Nelder–Mead simplex search (minimization).
//!
//! Trial points are clamped onto the box. Non-finite objective values are
//! treated as `+∞`, so a failed evaluation never becomes the incumbent.

pub(crate) struct Options {
    pub max_evals: usize,
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter (max-norm) falls below this.
    pub x_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_evals: 200,
            initial_step: 0.5,
            f_tol: 1e-8,
            x_tol: 1e-6,
        }
    }
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &Options) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    clamp_into(&mut start, lower, upper);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut p = start.clone();
        let step = opts.initial_step.min(upper[i] - lower[i]);
        p[i] = if p[i] + step <= upper[i] { p[i] + step } else { p[i] - step };
        clamp_into(&mut p, lower, upper);
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }

    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    while evals < opts.max_evals {
        simplex.sort_by(by_value);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && diameter <= opts.x_tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let toward = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp_into(&mut p, lower, upper);
            p
        };

        let reflected = toward(1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = toward(2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let contracted = if fr < simplex[n].1 { toward(0.5) } else { toward(-0.5) };
        let fc = eval(&contracted, &mut evals);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_point = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            for (v, b) in vertex.0.iter_mut().zip(&best_point) {
                *v = b + 0.5 * (*v - b);
            }
            vertex.1 = eval(&vertex.0, &mut evals);
        }
    }
    simplex.sort_by(by_value);
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}
