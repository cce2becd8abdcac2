//! Ground-truth reference systems, training-data generation, and the
//! timing harness used by the case studies.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{GpdmModel, InputPolicy, MemoryLength, SimInit, SimMode};
use crate::error::{Error, Result};
use crate::gp::TrainingSet;
use crate::numerics::RngStream;

/// Prey/predator populations, taken to be continuous.
pub type PredPreyState = Vector2<f64>;

/// State of the cyclically symmetric attractor.
pub type ThomasState = Vector3<f64>;

/// Damping constant of the attractor.
pub const THOMAS_B: f64 = 0.2;

/// One step of the discrete-time predator-prey system.
pub fn pp_step(x: &PredPreyState, u: &Vector2<f64>) -> Result<PredPreyState> {
    if !(x[0] > 0.0) {
        return Err(Error::DomainError(format!(
            "prey population must be positive, got {}",
            x[0]
        )));
    }
    let x1 = x[0] * (1.0 - 0.4 * x[0] - (2.0 + 1.2 * u[0]) * x[1] / (1.0 + x[0] * x[0])).exp();
    let x2 = x[1] * (1.0 + 0.5 * u[0] - (1.5 - u[1]) * x[1] / x[0]).exp();
    Ok(Vector2::new(x1, x2))
}

/// The sinusoidal excitation driving the predator-prey study.
pub fn pp_input(t: usize) -> Vector2<f64> {
    let phase = 0.02 * std::f64::consts::PI * t as f64;
    Vector2::new(phase.cos(), phase.sin())
}

/// The excitation as an open-loop input schedule.
pub fn pp_input_sequence(steps: usize) -> Vec<DVector<f64>> {
    (0..steps)
        .map(|t| {
            let u = pp_input(t);
            DVector::from_column_slice(&[u[0], u[1]])
        })
        .collect()
}

/// Knobs for [`generate_pp_training`].
#[derive(Debug, Clone)]
pub struct PpTrainingOptions {
    /// Standard deviation of the measurement noise on recorded outputs.
    pub noise_std: f64,
    /// Use noisy measurements instead of the true states inside the
    /// regressor columns.
    pub noisy_regressors: bool,
}

impl Default for PpTrainingOptions {
    fn default() -> Self {
        PpTrainingOptions {
            noise_std: 0.05,
            noisy_regressors: false,
        }
    }
}

/// Records every third transition of the predator-prey system between
/// t = 1 and t = 97 (33 points) from x0 = [0.3, 0.8]. Targets are the
/// next-state measurements; regressors hold the true states by default.
pub fn generate_pp_training(rng: &mut RngStream) -> Result<TrainingSet> {
    generate_pp_training_with(&PpTrainingOptions::default(), rng)
}

pub fn generate_pp_training_with(
    opts: &PpTrainingOptions,
    rng: &mut RngStream,
) -> Result<TrainingSet> {
    let horizon = 99;
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(Vector2::new(0.3, 0.8));
    for t in 0..horizon {
        let next = pp_step(&states[t], &pp_input(t))?;
        states.push(next);
    }

    let recorded: Vec<usize> = (1..=97).step_by(3).collect();
    let n = recorded.len();
    let mut x = DMatrix::zeros(4, n);
    let mut y = DMatrix::zeros(n, 2);
    let noise = |rng: &mut RngStream| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        opts.noise_std * z
    };
    for (j, &t) in recorded.iter().enumerate() {
        let u = pp_input(t);
        let (r0, r1) = if opts.noisy_regressors {
            (states[t][0] + noise(rng), states[t][1] + noise(rng))
        } else {
            (states[t][0], states[t][1])
        };
        x[(0, j)] = r0;
        x[(1, j)] = r1;
        x[(2, j)] = u[0];
        x[(3, j)] = u[1];
        y[(j, 0)] = states[t + 1][0] + noise(rng);
        y[(j, 1)] = states[t + 1][1] + noise(rng);
    }
    TrainingSet::new(x, y, opts.noise_std * opts.noise_std)
}

/// Right-hand side of the Thomas attractor with the input on the first
/// coordinate.
pub fn thomas_rhs(x: &ThomasState, u: f64) -> Vector3<f64> {
    Vector3::new(
        x[1].sin() - THOMAS_B * x[0] + u,
        x[2].sin() - THOMAS_B * x[1],
        x[0].sin() - THOMAS_B * x[2],
    )
}

/// Classical fourth-order Runge-Kutta step with zero-order-hold input.
pub fn rk4_step(x: &ThomasState, u: f64, dt: f64) -> ThomasState {
    debug_assert!(dt > 0.0);
    let k1 = thomas_rhs(x, u);
    let k2 = thomas_rhs(&(x + 0.5 * dt * k1), u);
    let k3 = thomas_rhs(&(x + 0.5 * dt * k2), u);
    let k4 = thomas_rhs(&(x + dt * k3), u);
    x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Sample time of the Thomas case study.
pub const THOMAS_DT: f64 = 0.01;

/// Measurement-noise standard deviation of the Thomas study.
pub const THOMAS_NOISE_STD: f64 = 0.006;

/// A 5 x 5 x 5 state lattice on [-1,1]^3 crossed with inputs {-2, 0, 2}:
/// 375 points, targets one RK4 step ahead plus measurement noise.
pub fn generate_thomas_training(rng: &mut RngStream) -> Result<TrainingSet> {
    generate_thomas_training_with(THOMAS_NOISE_STD, rng)
}

pub fn generate_thomas_training_with(noise_std: f64, rng: &mut RngStream) -> Result<TrainingSet> {
    let state_levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let input_levels = [-2.0, 0.0, 2.0];
    let n = state_levels.len().pow(3) * input_levels.len();
    let mut x = DMatrix::zeros(4, n);
    let mut y = DMatrix::zeros(n, 3);
    let mut j = 0;
    for &a in &state_levels {
        for &b in &state_levels {
            for &c in &state_levels {
                for &u in &input_levels {
                    let state = Vector3::new(a, b, c);
                    let next = rk4_step(&state, u, THOMAS_DT);
                    x[(0, j)] = a;
                    x[(1, j)] = b;
                    x[(2, j)] = c;
                    x[(3, j)] = u;
                    for d in 0..3 {
                        let z: f64 = StandardNormal.sample(rng);
                        y[(j, d)] = next[d] + noise_std * z;
                    }
                    j += 1;
                }
            }
        }
    }
    TrainingSet::new(x, y, noise_std * noise_std)
}

/// The set-point control law of the closed-loop study, u = -[2,2,2] x.
pub fn thomas_control(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_element(1, -2.0 * (x[0] + x[1] + x[2]))
}

/// Rolls the true attractor forward under a feedback law.
pub fn thomas_closed_loop_rollout<F>(x0: &ThomasState, steps: usize, control: F) -> Vec<ThomasState>
where
    F: Fn(&ThomasState) -> f64,
{
    let mut states = Vec::with_capacity(steps + 1);
    states.push(*x0);
    for t in 0..steps {
        let u = control(&states[t]);
        states.push(rk4_step(&states[t], u, THOMAS_DT));
    }
    states
}

/// One timing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub t: usize,
    pub m_bar: MemoryLength,
    pub step_seconds: f64,
    pub total_seconds: f64,
}

/// Per-step and cumulative prediction cost for each memory length.
#[derive(Debug, Clone)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    /// Average step time over a half-open window of steps.
    pub fn window_average(&self, m_bar: MemoryLength, lo: usize, hi: usize) -> Option<f64> {
        let times: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.m_bar == m_bar && r.t >= lo && r.t < hi)
            .map(|r| r.step_seconds)
            .collect();
        if times.is_empty() {
            None
        } else {
            Some(times.iter().sum::<f64>() / times.len() as f64)
        }
    }
}

/// Runs one sampled trajectory per memory length and records wall time per
/// step. Runs strictly sequentially; keep the process otherwise idle for
/// meaningful numbers.
pub fn timing_harness<P: InputPolicy + ?Sized>(
    model: &GpdmModel,
    init: &SimInit,
    policy: &P,
    steps: usize,
    m_bars: &[MemoryLength],
    seed: u64,
) -> Result<TimingTable> {
    let mut rows = Vec::with_capacity(steps * m_bars.len());
    for &m_bar in m_bars {
        let mut rng = crate::numerics::seed_stream(seed);
        let traj = model.simulate(init, policy, steps, m_bar, &mut rng, SimMode::Sample)?;
        let mut total = 0.0;
        for s in &traj.steps {
            total += s.step_seconds;
            rows.push(TimingRow {
                t: s.t,
                m_bar,
                step_seconds: s.step_seconds,
                total_seconds: total,
            });
        }
    }
    Ok(TimingTable { rows })
}
