//! Minimal BFGS minimizer with backtracking line search.
//!
//! Internal building block for hyperparameter fitting; deterministic given
//! its starting point.

use nalgebra::{DMatrix, DVector};

/// Search-space box: log-domain parameters are clamped to this interval to
/// keep exponentials representable.
const PARAM_CLAMP: f64 = 30.0;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

pub(crate) struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 200,
            grad_tol: 1e-6,
        }
    }
}

pub(crate) struct Minimum {
    pub point: DVector<f64>,
    pub value: f64,
}

fn clamp(mut x: DVector<f64>) -> DVector<f64> {
    for v in x.iter_mut() {
        *v = v.clamp(-PARAM_CLAMP, PARAM_CLAMP);
    }
    x
}

/// Minimizes `f` starting from `x0`. The objective returns the value and
/// gradient, or `None` where it is undefined; undefined points are treated
/// as +inf by the line search.
pub(crate) fn minimize<F>(f: F, x0: &DVector<f64>, opts: &MinimizeOptions) -> Option<Minimum>
where
    F: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let mut x = clamp(x0.clone());
    let (mut fx, mut grad) = f(&x)?;
    if !fx.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return None;
    }
    let mut h = DMatrix::<f64>::identity(n, n);

    for _ in 0..opts.max_iters {
        if grad.amax() < opts.grad_tol * fx.abs().max(1.0) {
            break;
        }
        let mut dir = -(&h * &grad);
        let mut slope = grad.dot(&dir);
        if slope >= 0.0 {
            // curvature estimate went bad; restart from steepest descent
            h = DMatrix::identity(n, n);
            dir = -grad.clone();
            slope = grad.dot(&dir);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = clamp(&x + alpha * &dir);
            if let Some((fc, gc)) = f(&candidate) {
                if fc.is_finite() && fc <= fx + ARMIJO_C1 * alpha * slope {
                    accepted = Some((candidate, fc, gc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };

        let s = &x_new - &x;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // BFGS inverse-Hessian update
            h += (sy + yhy) * rho * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = x_new;
        fx = f_new;
        grad = g_new;
    }
    Some(Minimum { point: x, value: fx })
}
