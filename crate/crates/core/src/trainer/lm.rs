use nalgebra::{DMatrix, DVector};

use super::{stalled, OptimResult};

/// A residual vector and its Jacobian as functions of a parameter vector.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, w: &[f64], r: &mut DVector<f64>);
    fn residuals_and_jacobian(&self, w: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_epochs: usize,
    pub tolerance: f64,
    pub damping_init: f64,
    /// Weight of the `|w|^2` penalty added to the mean squared residual.
    pub l2: f64,
}

const DAMPING_FACTOR: f64 = 10.0;
const DAMPING_MAX: f64 = 1e10;

fn objective(r: &DVector<f64>, w: &[f64], l2: f64) -> f64 {
    let data = r.norm_squared() / r.len() as f64;
    if l2 > 0.0 {
        data + l2 * w.iter().map(|v| v * v).sum::<f64>()
    } else {
        data
    }
}

/// Minimises `|r(w)|^2 / n + l2 |w|^2` by damped Gauss-Newton steps.
///
/// A step that lowers the objective is accepted and the damping divided by
/// ten; otherwise the damping is multiplied by ten and the step retried.
/// Each epoch ends with one accepted step, or with the damping exceeding its
/// ceiling, which ends training.
pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(problem: &P, w0: &[f64], opts: &LmOptions) -> OptimResult {
    let n = problem.n_residuals();
    let p = problem.n_params();
    let scale = 1.0 / n as f64;
    let mut w = w0.to_vec();
    let mut r = DVector::zeros(n);
    let mut r_trial = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, p);
    let mut mu = opts.damping_init;
    let mut trial = vec![0.0; p];

    problem.residuals_and_jacobian(&w, &mut r, &mut j);
    let mut current = objective(&r, &w, opts.l2);
    let mut history = vec![current];
    if !current.is_finite() {
        return OptimResult {
            params: w,
            history,
            epochs: 0,
            diverged: true,
        };
    }
    let mut epochs = 0;

    'epochs: while epochs < opts.max_epochs {
        epochs += 1;
        let mut a = j.tr_mul(&j) * scale;
        let mut g = j.tr_mul(&r) * scale;
        if opts.l2 > 0.0 {
            for i in 0..p {
                a[(i, i)] += opts.l2;
                g[i] += opts.l2 * w[i];
            }
        }
        loop {
            let mut damped = a.clone();
            for i in 0..p {
                damped[(i, i)] += mu;
            }
            let accepted = match damped.cholesky() {
                Some(ch) => {
                    let step = ch.solve(&(-&g));
                    for i in 0..p {
                        trial[i] = w[i] + step[i];
                    }
                    problem.residuals(&trial, &mut r_trial);
                    // false for a non-finite trial as well
                    objective(&r_trial, &trial, opts.l2) < current
                }
                None => false,
            };
            if accepted {
                w.copy_from_slice(&trial);
                mu = (mu / DAMPING_FACTOR).max(1e-20);
                problem.residuals_and_jacobian(&w, &mut r, &mut j);
                current = objective(&r, &w, opts.l2);
                history.push(current);
                break;
            }
            mu *= DAMPING_FACTOR;
            if mu > DAMPING_MAX {
                history.push(current);
                break 'epochs;
            }
        }
        if stalled(&history, opts.tolerance) {
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

    /// Residuals of `y = a u + b` on fixed samples.
    struct Line {
        u: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.u.len()
        }
        fn residuals(&self, w: &[f64], r: &mut DVector<f64>) {
            for k in 0..self.u.len() {
                r[k] = w[0] * self.u[k] + w[1] - self.y[k];
            }
        }
        fn residuals_and_jacobian(&self, w: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) {
            self.residuals(w, r);
            for k in 0..self.u.len() {
                j[(k, 0)] = self.u[k];
                j[(k, 1)] = 1.0;
            }
        }
    }

    #[test]
    fn accepted_losses_never_rise() {
        let u: Vec<f64> = (0..20).map(|k| (k as f64 * 0.37).sin()).collect();
        let y = u.iter().map(|u| (3.0 * u).tanh()).collect();
        let line = Line { u, y };
        let opts = LmOptions {
            max_epochs: 50,
            tolerance: 1e-12,
            damping_init: 1.0,
            l2: 0.0,
        };
        let res = levenberg_marquardt(&line, &[5.0, -4.0], &opts);
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(!res.diverged);
    }
}
