//! Quantitative comparison of exact and memory-bounded predictors, plus the
//! moment-boundedness certificate.

use nalgebra::DVector;

use crate::dynamics::{GpdmModel, MemoryBuffer, MemoryLength, Trajectory};
use crate::error::{Error, Result};
use crate::gp::TrainingSet;
use crate::kernels::{KernelSpec, MeanSpec};
use crate::numerics::{abs_moment_quadrature, chol_solve_pd, DiagGaussian};

/// Variances at or below this are treated as degenerate for KL purposes.
const DEGENERATE_VAR: f64 = 1e-300;

/// Pairwise distance below which history regressors count as repeated.
const DISTINCT_TOL: f64 = 1e-9;

/// KL divergence of the exact step distribution from the approximated one,
/// for diagonal Gaussians:
/// `1/2 sum_i [ (F_inf_i + d_i^2)/F_m_i + ln(F_m_i / F_inf_i) - 1 ]`.
///
/// Both variances must be strictly positive, which holds whenever the
/// current regressor differs from every remembered one.
pub fn kl_step(true_d: &DiagGaussian, approx_d: &DiagGaussian) -> Result<f64> {
    if true_d.dim() != approx_d.dim() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have {} and {} dimensions",
            true_d.dim(),
            approx_d.dim()
        )));
    }
    let mut total = 0.0;
    for i in 0..true_d.dim() {
        let f_inf = true_d.var()[i];
        let f_m = approx_d.var()[i];
        if f_inf <= DEGENERATE_VAR || f_m <= DEGENERATE_VAR {
            return Err(Error::DegenerateVariance(format!(
                "dimension {i} has variances {f_inf} and {f_m}"
            )));
        }
        let delta = approx_d.mean()[i] - true_d.mean()[i];
        total += 0.5 * ((f_inf + delta * delta) / f_m + (f_m / f_inf).ln() - 1.0);
    }
    Ok(total)
}

/// Mean square prediction error between independent draws of the two step
/// distributions: `||f_inf - f_m||^2 + tr(F_inf) + tr(F_m)`.
pub fn mspe_step(true_d: &DiagGaussian, approx_d: &DiagGaussian) -> Result<f64> {
    if true_d.dim() != approx_d.dim() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have {} and {} dimensions",
            true_d.dim(),
            approx_d.dim()
        )));
    }
    let diff = approx_d.mean() - true_d.mean();
    Ok(diff.norm_squared() + true_d.trace_var() + approx_d.trace_var())
}

/// One row of an [`ErrorReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub t: usize,
    pub m_bar: MemoryLength,
    pub kl: f64,
    pub mspe: f64,
    pub trace_var: f64,
}

/// Per-step error measures of memory-bounded predictors against the exact
/// one, over a recorded history.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub m_bars: Vec<MemoryLength>,
    pub seed: Option<u64>,
    pub trajectory_id: String,
    /// False when some pair of history regressors is closer than 1e-9; the
    /// strict variance ordering is only guaranteed without repeats.
    pub regressors_distinct: bool,
}

fn regressors_pairwise_distinct(history: &[(DVector<f64>, DVector<f64>)]) -> bool {
    for i in 0..history.len() {
        for j in (i + 1)..history.len() {
            if (&history[i].0 - &history[j].0).norm() <= DISTINCT_TOL {
                return false;
            }
        }
    }
    true
}

/// Replays `history` and, at every step, compares the prediction of each
/// requested memory length against the unbounded one.
pub fn compare_memories(
    model: &GpdmModel,
    history: &[(DVector<f64>, DVector<f64>)],
    m_bars: &[MemoryLength],
) -> Result<ErrorReport> {
    let distinct = regressors_pairwise_distinct(history);
    let mut rows = Vec::with_capacity(history.len() * m_bars.len());
    for (t, (regressor, _)) in history.iter().enumerate() {
        let exact_buf = MemoryBuffer::from_history(MemoryLength::Unbounded, &history[..t])?;
        let exact = model.predict(regressor, &exact_buf)?;
        for &m_bar in m_bars {
            let buf = MemoryBuffer::from_history(m_bar, &history[..t])?;
            let approx = model.predict(regressor, &buf)?;
            rows.push(ErrorRow {
                t,
                m_bar,
                kl: kl_step(&exact.dist, &approx.dist)?,
                mspe: mspe_step(&exact.dist, &approx.dist)?,
                trace_var: approx.trace_var(),
            });
        }
    }
    Ok(ErrorReport {
        rows,
        m_bars: m_bars.to_vec(),
        seed: None,
        trajectory_id: String::new(),
        regressors_distinct: distinct,
    })
}

/// Certificate that every trajectory moment of order `p` stays finite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessBound {
    pub c1: f64,
    pub c2: f64,
    pub p: u32,
    pub bound: f64,
}

/// Moment bound for bounded kernels: with `k <= k_max` and `|m| <= m_max`,
/// every state moment `E||x_t||^p` is bounded by
/// `n_x * E|Z|^p` with `Z ~ N(c1, 1/c2)`,
/// `c1 = m_max + n_D k_max max_i ||(K + sigma_n^2 I)^{-1} Y_i||` and
/// `c2 = k_max - k_max^2 / (k_max + sigma_n^2)`.
pub fn boundedness_bound(
    ds: &TrainingSet,
    kernel: &KernelSpec,
    mean: &MeanSpec,
    p: u32,
) -> Result<BoundednessBound> {
    let Some(k_max) = kernel.max_value() else {
        return Err(Error::UnboundedKernel);
    };
    if !(ds.noise_var() > 0.0) {
        return Err(Error::InvalidArgument(
            "the certificate needs a positive noise variance".into(),
        ));
    }
    let m_max = mean.sup_abs();
    let gram_n = crate::gp::regularized_gram(kernel, ds.x(), ds.noise_var())?;
    let alpha = chol_solve_pd(&gram_n, ds.y())?;
    let max_alpha_norm = (0..alpha.ncols())
        .map(|i| alpha.column(i).norm())
        .fold(0.0_f64, f64::max);
    let c1 = m_max + ds.n_points() as f64 * k_max * max_alpha_norm;
    let c2 = k_max - k_max * k_max / (k_max + ds.noise_var());
    let bound = ds.output_dim() as f64 * abs_moment_quadrature(p, c1, c2)?;
    Ok(BoundednessBound { c1, c2, p, bound })
}

/// Probability that the memoryless linear-kernel counterexample produces an
/// expanding slope, `P(|x_1/x_0| > 1)`, with `dy = Y_1 - Y_2`:
/// `1 + cdf((-3|x0| + dy)/x0^2) - cdf((3|x0| + dy)/x0^2)`.
pub fn unbounded_probability(x0: f64, dy: f64) -> Result<f64> {
    if x0 == 0.0 {
        return Err(Error::ZeroInitialState);
    }
    if !x0.is_finite() || !dy.is_finite() {
        return Err(Error::NonFinite("counterexample parameters"));
    }
    let ax = x0.abs();
    let denom = x0 * x0;
    Ok(1.0 + std_normal_cdf((-3.0 * ax + dy) / denom) - std_normal_cdf((3.0 * ax + dy) / denom))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Per-step average of `||x_t||^p` across trajectories, including the
/// initial states at t = 0. Trajectories of different lengths are cut to
/// the shortest.
pub fn empirical_moment(trajectories: &[Trajectory], p: u32) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one trajectory is required".into(),
        ));
    }
    let horizon = trajectories.iter().map(|tr| tr.len() + 1).min().unwrap_or(0);
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut acc = 0.0;
        for tr in trajectories {
            let states = tr.states();
            acc += states[t].norm().powi(p as i32);
        }
        out.push(acc / trajectories.len() as f64);
    }
    Ok(out)
}
