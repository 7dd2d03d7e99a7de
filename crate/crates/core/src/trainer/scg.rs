use super::{stalled, OptimResult};

/// A smooth scalar function of a parameter vector.
pub trait Objective {
    fn value(&self, w: &[f64]) -> f64;
    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const SIGMA0: f64 = 1e-4;
const LAMBDA_INIT: f64 = 1e-6;
const LAMBDA_MIN: f64 = 1e-15;
const LAMBDA_MAX: f64 = 1e100;

/// Møller's scaled conjugate gradient.
///
/// Curvature along the search direction comes from a finite difference of
/// gradients; a Levenberg-style scale `lambda` keeps the local quadratic
/// model positive definite and is adapted from the ratio of actual to
/// predicted reduction. Only steps that do not raise the objective are taken.
pub fn scaled_conjugate_gradient<F: Objective + ?Sized>(
    f: &F,
    w0: &[f64],
    max_epochs: usize,
    tolerance: f64,
) -> OptimResult {
    let n = w0.len();
    let mut w = w0.to_vec();
    let mut grad = vec![0.0; n];
    let mut current = f.value_and_gradient(&w, &mut grad);
    let mut history = vec![current];
    if !current.is_finite() {
        return OptimResult {
            params: w,
            history,
            epochs: 0,
            diverged: true,
        };
    }
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut p = r.clone();
    let mut lambda = LAMBDA_INIT;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;
    let mut since_restart = 0;
    let mut probe = vec![0.0; n];
    let mut probe_grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut epochs = 0;

    while epochs < max_epochs {
        epochs += 1;
        let p2 = dot(&p, &p);
        if p2 == 0.0 {
            history.push(current);
            break;
        }
        if success {
            let sigma = SIGMA0 / p2.sqrt();
            for i in 0..n {
                probe[i] = w[i] + sigma * p[i];
            }
            f.value_and_gradient(&probe, &mut probe_grad);
            // s = (g(w + sigma p) - g(w)) / sigma
            delta = (0..n).map(|i| p[i] * (probe_grad[i] - grad[i]) / sigma).sum();
        }
        delta += (lambda - lambda_bar) * p2;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        let mu = dot(&p, &r);
        if mu <= 0.0 {
            // not a descent direction: restart from steepest descent
            p.copy_from_slice(&r);
            since_restart = 0;
            success = true;
            lambda_bar = 0.0;
            history.push(current);
            continue;
        }
        let alpha = mu / delta;
        for i in 0..n {
            trial[i] = w[i] + alpha * p[i];
        }
        let value = f.value(&trial);
        let ratio = 2.0 * delta * (current - value) / (mu * mu);
        if value.is_finite() && ratio >= 0.0 && value <= current {
            w.copy_from_slice(&trial);
            current = f.value_and_gradient(&w, &mut grad);
            let r_new: Vec<f64> = grad.iter().map(|g| -g).collect();
            lambda_bar = 0.0;
            success = true;
            since_restart += 1;
            if since_restart >= n {
                p.copy_from_slice(&r_new);
                since_restart = 0;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                for i in 0..n {
                    p[i] = r_new[i] + beta * p[i];
                }
            }
            r = r_new;
            if ratio >= 0.75 {
                lambda = (lambda / 4.0).max(LAMBDA_MIN);
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if ratio < 0.25 || !value.is_finite() {
            let inc = if value.is_finite() { delta * (1.0 - ratio) / p2 } else { lambda * 4.0 };
            lambda = (lambda + inc).min(LAMBDA_MAX);
        }
        history.push(current);
        if dot(&r, &r) == 0.0 || stalled(&history, tolerance) || lambda >= LAMBDA_MAX {
            break;
        }
    }
    OptimResult {
        params: w,
        history,
        epochs,
        diverged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&self, w: &[f64]) -> f64 {
            (1.0 - w[0]).powi(2) + 100.0 * (w[1] - w[0] * w[0]).powi(2)
        }
        fn value_and_gradient(&self, w: &[f64], g: &mut [f64]) -> f64 {
            g[0] = -2.0 * (1.0 - w[0]) - 400.0 * w[0] * (w[1] - w[0] * w[0]);
            g[1] = 200.0 * (w[1] - w[0] * w[0]);
            self.value(w)
        }
    }

    #[test]
    fn minimises_rosenbrock_monotonically() {
        let res = scaled_conjugate_gradient(&Rosenbrock, &[-1.2, 1.0], 2000, 1e-14);
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((res.params[0] - 1.0).abs() < 1e-3, "{:?}", res.params);
        assert!((res.params[1] - 1.0).abs() < 1e-3);
    }
}
