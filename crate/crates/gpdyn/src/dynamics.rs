//! Gaussian-process dynamical models and their sampling.
//!
//! Exact multi-step prediction conditions on the entire realized history by
//! appending every sampled transition to the conditioning set as noise-free
//! data, which grows the Gram matrix each step and makes the dynamics
//! non-Markovian. Capping the record at a maximum memory length recovers a
//! Markov chain of finite order; the cap is the only difference between the
//! exact and approximated predictors.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{predict_parts, TrainingSet};
use crate::kernels::{KernelSpec, MeanSpec};
use crate::numerics::{mvn_sample, trajectory_stream, DiagGaussian, RngStream, SymMatrix};

/// Maximum number of past transitions kept for prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemoryLength {
    Bounded(usize),
    Unbounded,
}

impl MemoryLength {
    pub fn cap(&self) -> Option<usize> {
        match self {
            MemoryLength::Bounded(m) => Some(*m),
            MemoryLength::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, MemoryLength::Unbounded)
    }
}

impl fmt::Display for MemoryLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryLength::Bounded(m) => write!(f, "{m}"),
            MemoryLength::Unbounded => write!(f, "inf"),
        }
    }
}

impl FromStr for MemoryLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(MemoryLength::Unbounded);
        }
        s.parse::<usize>()
            .map(MemoryLength::Bounded)
            .map_err(|_| Error::InvalidArgument(format!("memory length must be `inf` or an integer, got `{s}`")))
    }
}

/// How the conditioning regressor is assembled from past values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorLayout {
    /// State-space form: the regressor is the current state stacked with
    /// the current input.
    Ssm { n_x: usize, n_u: usize },
    /// Output-error form: the regressor is a window of the last `n_out`
    /// model outputs and the last `n_in` inputs.
    Noe {
        n_y: usize,
        n_u: usize,
        n_out: usize,
        n_in: usize,
    },
}

impl RegressorLayout {
    pub fn ssm(n_x: usize, n_u: usize) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::InvalidArgument("state dimension must be at least 1".into()));
        }
        Ok(RegressorLayout::Ssm { n_x, n_u })
    }

    pub fn noe(n_y: usize, n_u: usize, n_out: usize, n_in: usize) -> Result<Self> {
        if n_y == 0 {
            return Err(Error::InvalidArgument("output dimension must be at least 1".into()));
        }
        if n_out == 0 || n_in == 0 {
            return Err(Error::InvalidArgument(
                "output and input history lengths must be at least 1".into(),
            ));
        }
        Ok(RegressorLayout::Noe {
            n_y,
            n_u,
            n_out,
            n_in,
        })
    }

    pub fn regressor_dim(&self) -> usize {
        match self {
            RegressorLayout::Ssm { n_x, n_u } => n_x + n_u,
            RegressorLayout::Noe {
                n_y,
                n_u,
                n_out,
                n_in,
            } => n_out * n_y + n_in * n_u,
        }
    }

    /// Dimension of the predicted quantity (state or output).
    pub fn target_dim(&self) -> usize {
        match self {
            RegressorLayout::Ssm { n_x, .. } => *n_x,
            RegressorLayout::Noe { n_y, .. } => *n_y,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            RegressorLayout::Ssm { n_u, .. } | RegressorLayout::Noe { n_u, .. } => *n_u,
        }
    }
}

fn stack(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(*p);
        at += p.len();
    }
    out
}

/// Builds the conditioning regressor from recorded histories, newest entry
/// last. NOE layouts need `n_out` outputs and `n_in` inputs; shorter
/// histories are an error, the caller seeds the initial window.
pub fn build_regressor(
    layout: &RegressorLayout,
    target_hist: &[DVector<f64>],
    input_hist: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let check_dim = |v: &DVector<f64>, want: usize, what: &str| -> Result<()> {
        if v.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {} entries, layout expects {want}",
                v.len()
            )));
        }
        Ok(())
    };
    match layout {
        RegressorLayout::Ssm { n_x, n_u } => {
            let x = target_hist.last().ok_or_else(|| {
                Error::InsufficientHistory("state-space regressor needs the current state".into())
            })?;
            check_dim(x, *n_x, "state")?;
            if *n_u == 0 {
                return Ok(x.clone());
            }
            let u = input_hist.last().ok_or_else(|| {
                Error::InsufficientHistory("state-space regressor needs the current input".into())
            })?;
            check_dim(u, *n_u, "input")?;
            Ok(stack(&[x, u]))
        }
        RegressorLayout::Noe {
            n_y,
            n_u,
            n_out,
            n_in,
        } => {
            if target_hist.len() < *n_out {
                return Err(Error::InsufficientHistory(format!(
                    "output-error regressor needs {n_out} past outputs, got {}",
                    target_hist.len()
                )));
            }
            let needed_inputs = if *n_u == 0 { 0 } else { *n_in };
            if input_hist.len() < needed_inputs {
                return Err(Error::InsufficientHistory(format!(
                    "output-error regressor needs {n_in} past inputs, got {}",
                    input_hist.len()
                )));
            }
            let mut parts: Vec<&DVector<f64>> = Vec::with_capacity(n_out + n_in);
            for y in &target_hist[target_hist.len() - n_out..] {
                check_dim(y, *n_y, "output")?;
                parts.push(y);
            }
            if *n_u > 0 {
                for u in &input_hist[input_hist.len() - n_in..] {
                    check_dim(u, *n_u, "input")?;
                    parts.push(u);
                }
            }
            Ok(stack(&parts))
        }
    }
}

/// FIFO record of past (regressor, sampled target) pairs, capped at the
/// maximum memory length. The step counter keeps running even when the cap
/// is zero and nothing is stored.
#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    max_len: MemoryLength,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    t: usize,
}

impl MemoryBuffer {
    pub fn new(max_len: MemoryLength) -> Self {
        MemoryBuffer {
            max_len,
            pairs: VecDeque::new(),
            t: 0,
        }
    }

    /// Rebuilds a buffer by replaying a recorded history in order.
    pub fn from_history(
        max_len: MemoryLength,
        history: &[(DVector<f64>, DVector<f64>)],
    ) -> Result<Self> {
        let mut buf = MemoryBuffer::new(max_len);
        for (reg, target) in history {
            buf.push(reg.clone(), target.clone())?;
        }
        Ok(buf)
    }

    /// Appends one transition, evicting the oldest pair when full.
    pub fn push(&mut self, regressor: DVector<f64>, target: DVector<f64>) -> Result<()> {
        if let Some((reg0, tgt0)) = self.pairs.front() {
            if reg0.len() != regressor.len() || tgt0.len() != target.len() {
                return Err(Error::DimensionMismatch(format!(
                    "pair ({}, {}) pushed into buffer holding ({}, {})",
                    regressor.len(),
                    target.len(),
                    reg0.len(),
                    tgt0.len()
                )));
            }
        }
        self.t += 1;
        match self.max_len {
            MemoryLength::Bounded(0) => {}
            MemoryLength::Bounded(m) => {
                self.pairs.push_back((regressor, target));
                if self.pairs.len() > m {
                    self.pairs.pop_front();
                }
            }
            MemoryLength::Unbounded => self.pairs.push_back((regressor, target)),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Steps taken so far (not the stored count).
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn max_len(&self) -> MemoryLength {
        self.max_len
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = &(DVector<f64>, DVector<f64>)> {
        self.pairs.iter()
    }
}

/// Known mapping from the latent state to the measured output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMap {
    Identity,
    AdditiveGaussian { noise_var: f64 },
}

impl OutputMap {
    pub fn apply(&self, x: &DVector<f64>, rng: &mut RngStream) -> DVector<f64> {
        match self {
            OutputMap::Identity => x.clone(),
            OutputMap::AdditiveGaussian { noise_var } => {
                let d = DiagGaussian::new(x.clone(), DVector::from_element(x.len(), *noise_var))
                    .expect("nonnegative noise variance");
                mvn_sample(&d, rng)
            }
        }
    }
}

/// Gaussian over the next state or output, tagged with the regressor that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub regressor: DVector<f64>,
    pub dist: DiagGaussian,
}

impl StepDistribution {
    pub fn trace_var(&self) -> f64 {
        self.dist.trace_var()
    }
}

/// One recorded transition of a simulation.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub dist: StepDistribution,
    /// Sampled (or mean-propagated) next state/output.
    pub value: DVector<f64>,
    pub step_seconds: f64,
}

/// A simulated path with its per-step distributions and wall times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub init: DVector<f64>,
    pub steps: Vec<StepRecord>,
    /// Mapped outputs, present only for non-identity output maps.
    pub outputs: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Initial value followed by every sampled value.
    pub fn states(&self) -> Vec<&DVector<f64>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(&self.init);
        out.extend(self.steps.iter().map(|s| &s.value));
        out
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.steps.last().map_or(&self.init, |s| &s.value)
    }

    /// The (regressor, sampled target) record of the run, the exact content
    /// an unbounded memory would hold.
    pub fn history(&self) -> Vec<(DVector<f64>, DVector<f64>)> {
        self.steps
            .iter()
            .map(|s| (s.dist.regressor.clone(), s.value.clone()))
            .collect()
    }
}

/// Input schedule for a simulation.
pub trait InputPolicy {
    /// Input at step `t`; `feedback` is the current state (SSM) or latest
    /// output (NOE).
    fn input(&self, t: usize, feedback: &DVector<f64>) -> Result<DVector<f64>>;
}

/// A fixed input sequence; simulation beyond its end is an error.
pub struct OpenLoop(pub Vec<DVector<f64>>);

impl InputPolicy for OpenLoop {
    fn input(&self, t: usize, _feedback: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.get(t).cloned().ok_or_else(|| {
            Error::InsufficientHistory(format!(
                "open-loop schedule has {} inputs but step {t} was requested",
                self.0.len()
            ))
        })
    }
}

/// The same input at every step. An empty vector drives input-free models.
pub struct ConstantInput(pub DVector<f64>);

impl InputPolicy for ConstantInput {
    fn input(&self, _t: usize, _feedback: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0.clone())
    }
}

/// State-feedback law `u_t = g(x_t)`.
pub struct Feedback<F>(pub F);

impl<F> InputPolicy for Feedback<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn input(&self, _t: usize, feedback: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0(feedback))
    }
}

/// Whether a simulation draws samples or propagates the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Sample,
    MeanPropagate,
}

/// Initial condition of a simulation.
#[derive(Debug, Clone)]
pub enum SimInit {
    /// Initial state of a state-space model.
    Ssm(DVector<f64>),
    /// Full seed window of an output-error model: the last `n_out` outputs
    /// (oldest first, last entry is y_0) and the `n_in - 1` inputs before
    /// step 0. Nothing is zero-padded.
    Noe {
        outputs: Vec<DVector<f64>>,
        past_inputs: Vec<DVector<f64>>,
    },
}

impl SimInit {
    pub fn ssm(state: DVector<f64>) -> Self {
        SimInit::Ssm(state)
    }

    pub fn noe(outputs: Vec<DVector<f64>>, past_inputs: Vec<DVector<f64>>) -> Self {
        SimInit::Noe {
            outputs,
            past_inputs,
        }
    }
}

/// A dynamical model: regressor layout, conditioning data, one shared GP
/// prior per output dimension, and the output mapping.
#[derive(Debug, Clone)]
pub struct GpdmModel {
    layout: RegressorLayout,
    ds: TrainingSet,
    kernel: KernelSpec,
    mean: MeanSpec,
    output_map: OutputMap,
}

impl GpdmModel {
    pub fn new(
        layout: RegressorLayout,
        ds: TrainingSet,
        kernel: KernelSpec,
        mean: MeanSpec,
        output_map: OutputMap,
    ) -> Result<Self> {
        if layout.regressor_dim() != ds.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "layout regressor dimension {} does not match training input dimension {}",
                layout.regressor_dim(),
                ds.input_dim()
            )));
        }
        if layout.target_dim() != ds.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "layout target dimension {} does not match training output dimension {}",
                layout.target_dim(),
                ds.output_dim()
            )));
        }
        if let OutputMap::AdditiveGaussian { noise_var } = output_map {
            if !(noise_var >= 0.0) {
                return Err(Error::InvalidArgument(
                    "output noise variance must be nonnegative".into(),
                ));
            }
        }
        Ok(GpdmModel {
            layout,
            ds,
            kernel,
            mean,
            output_map,
        })
    }

    /// Fits hyperparameters on `ds` and assembles the model with the
    /// fitted kernel and noise level.
    pub fn fit(
        layout: RegressorLayout,
        ds: TrainingSet,
        family: crate::kernels::KernelFamily,
        mean: MeanSpec,
        output_map: OutputMap,
        opts: &crate::gp::FitOptions,
    ) -> Result<(Self, crate::gp::FitResult)> {
        let fit = crate::gp::fit_hyperparameters(&ds, family, &mean, opts)?;
        let kernel = fit.params.kernel_spec(family, ds.input_dim())?;
        let ds = ds.with_noise_var(fit.params.noise_var())?;
        let model = GpdmModel::new(layout, ds, kernel, mean, output_map)?;
        Ok((model, fit))
    }

    pub fn layout(&self) -> &RegressorLayout {
        &self.layout
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.ds
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn mean(&self) -> &MeanSpec {
        &self.mean
    }

    pub fn output_map(&self) -> &OutputMap {
        &self.output_map
    }

    fn check_buffer(&self, buf: &MemoryBuffer) -> Result<()> {
        if let Some((reg, tgt)) = buf.pairs().next() {
            if reg.len() != self.layout.regressor_dim() || tgt.len() != self.layout.target_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "buffer pairs are ({}, {}), model expects ({}, {})",
                    reg.len(),
                    tgt.len(),
                    self.layout.regressor_dim(),
                    self.layout.target_dim()
                )));
            }
        }
        Ok(())
    }

    /// Training data extended by the memory record: memory regressors are
    /// appended as the last columns, newest last.
    pub fn extended_dataset(&self, buf: &MemoryBuffer) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_buffer(buf)?;
        let n_d = self.ds.n_points();
        let m = buf.len();
        let mut x = DMatrix::zeros(self.ds.input_dim(), n_d + m);
        x.columns_mut(0, n_d).copy_from(self.ds.x());
        let mut y = DMatrix::zeros(n_d + m, self.ds.output_dim());
        y.rows_mut(0, n_d).copy_from(self.ds.y());
        for (i, (reg, target)) in buf.pairs().enumerate() {
            x.column_mut(n_d + i).copy_from(reg);
            y.row_mut(n_d + i).copy_from(&target.transpose());
        }
        Ok((x, y))
    }

    /// Covariance of the extended dataset. Measurement noise is added only
    /// on the diagonal of the training-data block; memory entries are past
    /// samples conditioned on exactly, so their rows stay noise-free.
    pub fn gram_extended(&self, buf: &MemoryBuffer) -> Result<SymMatrix> {
        let (x, _) = self.extended_dataset(buf)?;
        self.gram_of_extended(&x)
    }

    fn gram_of_extended(&self, x_ext: &DMatrix<f64>) -> Result<SymMatrix> {
        let mut g = self.kernel.gram_self(x_ext)?.into_matrix();
        for i in 0..self.ds.n_points() {
            g[(i, i)] += self.ds.noise_var();
        }
        SymMatrix::new(g)
    }

    /// Distribution of the next state/output given the regressor and the
    /// memory record. An unbounded buffer realizes the exact non-Markovian
    /// prediction; an empty one reduces to plain GP regression.
    pub fn predict(&self, regressor: &DVector<f64>, buf: &MemoryBuffer) -> Result<StepDistribution> {
        if regressor.len() != self.layout.regressor_dim() {
            return Err(Error::DimensionMismatch(format!(
                "regressor has {} entries, layout expects {}",
                regressor.len(),
                self.layout.regressor_dim()
            )));
        }
        let (x_ext, y_ext) = self.extended_dataset(buf)?;
        let gram = self.gram_of_extended(&x_ext)?;
        let (means, var) = predict_parts(&gram, &x_ext, &y_ext, &self.kernel, &self.mean, regressor)?;
        let n = means.len();
        Ok(StepDistribution {
            regressor: regressor.clone(),
            dist: DiagGaussian::new(means, DVector::from_element(n, var))?,
        })
    }

    /// Predicts, samples the next value, and appends the transition to the
    /// memory. The push happens after sampling, so a prediction at time t
    /// sees exactly the transitions up to t-1.
    pub fn step(
        &self,
        buf: &mut MemoryBuffer,
        regressor: &DVector<f64>,
        rng: &mut RngStream,
    ) -> Result<(DVector<f64>, StepDistribution)> {
        let dist = self.predict(regressor, buf)?;
        let value = mvn_sample(&dist.dist, rng);
        buf.push(regressor.clone(), value.clone())?;
        Ok((value, dist))
    }

    /// Rolls the model forward `steps` times from `init` under `policy`.
    pub fn simulate<P: InputPolicy + ?Sized>(
        &self,
        init: &SimInit,
        policy: &P,
        steps: usize,
        max_memory: MemoryLength,
        rng: &mut RngStream,
        mode: SimMode,
    ) -> Result<Trajectory> {
        match (&self.layout, init) {
            (RegressorLayout::Ssm { .. }, SimInit::Ssm(x0)) => {
                self.simulate_ssm(x0, policy, steps, max_memory, rng, mode)
            }
            (RegressorLayout::Noe { .. }, SimInit::Noe {
                outputs,
                past_inputs,
            }) => self.simulate_noe(outputs, past_inputs, policy, steps, max_memory, rng, mode),
            _ => Err(Error::InvalidArgument(
                "initial condition kind does not match the model layout".into(),
            )),
        }
    }

    fn advance<P: InputPolicy + ?Sized>(
        &self,
        regressor: DVector<f64>,
        buf: &mut MemoryBuffer,
        rng: &mut RngStream,
        mode: SimMode,
        _policy: &P,
    ) -> Result<(DVector<f64>, StepDistribution, f64)> {
        let start = Instant::now();
        let dist = self.predict(&regressor, buf)?;
        let value = match mode {
            SimMode::Sample => mvn_sample(&dist.dist, rng),
            SimMode::MeanPropagate => dist.dist.mean().clone(),
        };
        buf.push(regressor, value.clone())?;
        Ok((value, dist, start.elapsed().as_secs_f64()))
    }

    fn simulate_ssm<P: InputPolicy + ?Sized>(
        &self,
        x0: &DVector<f64>,
        policy: &P,
        steps: usize,
        max_memory: MemoryLength,
        rng: &mut RngStream,
        mode: SimMode,
    ) -> Result<Trajectory> {
        let RegressorLayout::Ssm { n_x, n_u } = self.layout else {
            unreachable!()
        };
        if x0.len() != n_x {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} entries, model has {n_x}",
                x0.len()
            )));
        }
        let mut buf = MemoryBuffer::new(max_memory);
        let mut records = Vec::with_capacity(steps);
        let mut outputs: Option<Vec<DVector<f64>>> = match self.output_map {
            OutputMap::Identity => None,
            _ => Some(Vec::with_capacity(steps)),
        };
        let mut x = x0.clone();
        for t in 0..steps {
            let u = policy.input(t, &x)?;
            if u.len() != n_u {
                return Err(Error::DimensionMismatch(format!(
                    "policy produced a {}-dim input, model takes {n_u}",
                    u.len()
                )));
            }
            let regressor = if n_u == 0 { x.clone() } else { stack(&[&x, &u]) };
            let (value, dist, secs) = self.advance(regressor, &mut buf, rng, mode, policy)?;
            if let Some(outs) = outputs.as_mut() {
                outs.push(self.output_map.apply(&value, rng));
            }
            records.push(StepRecord {
                t,
                dist,
                value: value.clone(),
                step_seconds: secs,
            });
            x = value;
        }
        Ok(Trajectory {
            init: x0.clone(),
            steps: records,
            outputs,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn simulate_noe<P: InputPolicy + ?Sized>(
        &self,
        seed_outputs: &[DVector<f64>],
        past_inputs: &[DVector<f64>],
        policy: &P,
        steps: usize,
        max_memory: MemoryLength,
        rng: &mut RngStream,
        mode: SimMode,
    ) -> Result<Trajectory> {
        let RegressorLayout::Noe {
            n_y,
            n_u,
            n_out,
            n_in,
        } = self.layout
        else {
            unreachable!()
        };
        if seed_outputs.len() != n_out {
            return Err(Error::InsufficientHistory(format!(
                "output-error seed needs exactly {n_out} outputs, got {}",
                seed_outputs.len()
            )));
        }
        let needed_past = if n_u == 0 { 0 } else { n_in - 1 };
        if past_inputs.len() != needed_past {
            return Err(Error::InsufficientHistory(format!(
                "output-error seed needs exactly {needed_past} past inputs, got {}",
                past_inputs.len()
            )));
        }
        for y in seed_outputs {
            if y.len() != n_y {
                return Err(Error::DimensionMismatch(format!(
                    "seed output has {} entries, model has {n_y}",
                    y.len()
                )));
            }
        }
        let mut y_hist: VecDeque<DVector<f64>> = seed_outputs.iter().cloned().collect();
        let mut u_hist: VecDeque<DVector<f64>> = past_inputs.iter().cloned().collect();
        let init = seed_outputs[n_out - 1].clone();
        let mut buf = MemoryBuffer::new(max_memory);
        let mut records = Vec::with_capacity(steps);
        for t in 0..steps {
            let y_now = y_hist.back().expect("seed output window is nonempty");
            let u = policy.input(t, y_now)?;
            if u.len() != n_u {
                return Err(Error::DimensionMismatch(format!(
                    "policy produced a {}-dim input, model takes {n_u}",
                    u.len()
                )));
            }
            if n_u > 0 {
                u_hist.push_back(u);
                if u_hist.len() > n_in {
                    u_hist.pop_front();
                }
            }
            let y_slice: Vec<DVector<f64>> = y_hist.iter().cloned().collect();
            let u_slice: Vec<DVector<f64>> = u_hist.iter().cloned().collect();
            let regressor = build_regressor(&self.layout, &y_slice, &u_slice)?;
            let (value, dist, secs) = self.advance(regressor, &mut buf, rng, mode, policy)?;
            y_hist.push_back(value.clone());
            if y_hist.len() > n_out {
                y_hist.pop_front();
            }
            records.push(StepRecord {
                t,
                dist,
                value,
                step_seconds: secs,
            });
        }
        Ok(Trajectory {
            init,
            steps: records,
            outputs: None,
        })
    }

    /// Simulates one trajectory per initial condition in parallel. Each
    /// trajectory gets the stream `(seed, index)`, so the result does not
    /// depend on the number of worker threads.
    pub fn simulate_many<P: InputPolicy + Sync + ?Sized>(
        &self,
        inits: &[SimInit],
        policy: &P,
        steps: usize,
        max_memory: MemoryLength,
        seed: u64,
        mode: SimMode,
    ) -> Result<Vec<Trajectory>> {
        inits
            .par_iter()
            .enumerate()
            .map(|(i, init)| {
                let mut rng = trajectory_stream(seed, i as u64);
                self.simulate(init, policy, steps, max_memory, &mut rng, mode)
            })
            .collect()
    }
}
