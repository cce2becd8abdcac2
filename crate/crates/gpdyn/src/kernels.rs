//! Covariance and mean function families with log-domain hyperparameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::SymMatrix;

/// Kernel family tag, used when fitting or deserializing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    SquaredExponentialArd,
    SquaredExponentialIso,
    Linear,
}

/// Covariance function with its hyperparameters.
///
/// The squared-exponential families use the convention
/// `k(a,b) = signal^2 * exp(-(a-b)^T P^{-1} (a-b))` with
/// `P = diag(l_1^2, ..., l_n^2)` — note there is no 1/2 factor in the
/// exponent. Cross-checks against the halved convention must rescale the
/// lengthscales by sqrt(2).
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    SquaredExponentialArd {
        signal: f64,
        lengthscales: DVector<f64>,
    },
    SquaredExponentialIso {
        signal: f64,
        lengthscale: f64,
    },
    Linear,
}

impl KernelSpec {
    pub fn se_ard(signal: f64, lengthscales: DVector<f64>) -> Result<Self> {
        if !(signal > 0.0) || !signal.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "signal parameter must be positive and finite, got {signal}"
            )));
        }
        if lengthscales.is_empty() || lengthscales.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "lengthscales must be positive and finite".into(),
            ));
        }
        Ok(KernelSpec::SquaredExponentialArd {
            signal,
            lengthscales,
        })
    }

    pub fn se_iso(signal: f64, lengthscale: f64) -> Result<Self> {
        if !(signal > 0.0) || !signal.is_finite() || !(lengthscale > 0.0) || !lengthscale.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "parameters must be positive and finite, got signal={signal}, lengthscale={lengthscale}"
            )));
        }
        Ok(KernelSpec::SquaredExponentialIso {
            signal,
            lengthscale,
        })
    }

    pub fn linear() -> Self {
        KernelSpec::Linear
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            KernelSpec::SquaredExponentialArd { .. } => KernelFamily::SquaredExponentialArd,
            KernelSpec::SquaredExponentialIso { .. } => KernelFamily::SquaredExponentialIso,
            KernelSpec::Linear => KernelFamily::Linear,
        }
    }

    /// Hyperparameters in the natural domain: signal first, then
    /// lengthscales. Empty for the linear kernel.
    pub fn params(&self) -> Vec<f64> {
        match self {
            KernelSpec::SquaredExponentialArd {
                signal,
                lengthscales,
            } => {
                let mut p = vec![*signal];
                p.extend(lengthscales.iter());
                p
            }
            KernelSpec::SquaredExponentialIso {
                signal,
                lengthscale,
            } => vec![*signal, *lengthscale],
            KernelSpec::Linear => vec![],
        }
    }

    /// Number of hyperparameters for `family` on `input_dim`-dimensional
    /// inputs.
    pub fn param_count(family: KernelFamily, input_dim: usize) -> usize {
        match family {
            KernelFamily::SquaredExponentialArd => 1 + input_dim,
            KernelFamily::SquaredExponentialIso => 2,
            KernelFamily::Linear => 0,
        }
    }

    /// Rebuilds a spec from natural-domain parameters.
    pub fn from_params(family: KernelFamily, input_dim: usize, params: &[f64]) -> Result<Self> {
        if params.len() != Self::param_count(family, input_dim) {
            return Err(Error::DimensionMismatch(format!(
                "{:?} on {input_dim}-dim inputs takes {} parameters, got {}",
                family,
                Self::param_count(family, input_dim),
                params.len()
            )));
        }
        match family {
            KernelFamily::SquaredExponentialArd => Self::se_ard(
                params[0],
                DVector::from_column_slice(&params[1..]),
            ),
            KernelFamily::SquaredExponentialIso => Self::se_iso(params[0], params[1]),
            KernelFamily::Linear => Ok(Self::linear()),
        }
    }

    fn check_dims(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel inputs have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        if let KernelSpec::SquaredExponentialArd { lengthscales, .. } = self {
            if lengthscales.len() != a.len() {
                return Err(Error::DimensionMismatch(format!(
                    "ARD kernel has {} lengthscales but inputs have {} dimensions",
                    lengthscales.len(),
                    a.len()
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the covariance of two points.
    pub fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        self.check_dims(a, b)?;
        Ok(match self {
            KernelSpec::SquaredExponentialArd {
                signal,
                lengthscales,
            } => {
                let mut q = 0.0;
                for i in 0..a.len() {
                    let d = a[i] - b[i];
                    q += d * d / (lengthscales[i] * lengthscales[i]);
                }
                signal * signal * (-q).exp()
            }
            KernelSpec::SquaredExponentialIso {
                signal,
                lengthscale,
            } => {
                let d = a - b;
                signal * signal * (-d.norm_squared() / (lengthscale * lengthscale)).exp()
            }
            KernelSpec::Linear => a.dot(b),
        })
    }

    /// Covariance matrix between two column sets: entry (j, l) is
    /// `k(A_j, B_l)`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "column sets have point dimensions {} and {}",
                a.nrows(),
                b.nrows()
            )));
        }
        let mut g = DMatrix::zeros(a.ncols(), b.ncols());
        for j in 0..a.ncols() {
            let aj = a.column(j).into_owned();
            for l in 0..b.ncols() {
                g[(j, l)] = self.eval(&aj, &b.column(l).into_owned())?;
            }
        }
        Ok(g)
    }

    /// Gram matrix of one column set, exactly symmetric by construction.
    pub fn gram_self(&self, a: &DMatrix<f64>) -> Result<SymMatrix> {
        let n = a.ncols();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let aj = a.column(j).into_owned();
            for l in j..n {
                let v = self.eval(&aj, &a.column(l).into_owned())?;
                g[(j, l)] = v;
                g[(l, j)] = v;
            }
        }
        SymMatrix::new(g)
    }

    /// Covariances between a test point and every column of `x`.
    pub fn kvec(&self, z: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut k = DVector::zeros(x.ncols());
        for j in 0..x.ncols() {
            k[j] = self.eval(z, &x.column(j).into_owned())?;
        }
        Ok(k)
    }

    /// Partial derivatives of [`eval`](Self::eval) with respect to the
    /// log-domain hyperparameters, in [`params`](Self::params) order.
    pub fn grad_log_params(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(a, b)?;
        let k = self.eval(a, b)?;
        Ok(match self {
            KernelSpec::SquaredExponentialArd { lengthscales, .. } => {
                let mut g = DVector::zeros(1 + lengthscales.len());
                g[0] = 2.0 * k;
                for i in 0..lengthscales.len() {
                    let d = a[i] - b[i];
                    g[1 + i] = 2.0 * k * d * d / (lengthscales[i] * lengthscales[i]);
                }
                g
            }
            KernelSpec::SquaredExponentialIso { lengthscale, .. } => {
                let d = (a - b).norm_squared();
                DVector::from_column_slice(&[2.0 * k, 2.0 * k * d / (lengthscale * lengthscale)])
            }
            KernelSpec::Linear => DVector::zeros(0),
        })
    }

    /// Supremum of the kernel over all input pairs, if one exists.
    pub fn max_value(&self) -> Option<f64> {
        match self {
            KernelSpec::SquaredExponentialArd { signal, .. }
            | KernelSpec::SquaredExponentialIso { signal, .. } => Some(signal * signal),
            KernelSpec::Linear => None,
        }
    }
}

/// Mean function family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanSpec {
    Zero,
    Constant(f64),
}

impl MeanSpec {
    pub fn eval(&self, _z: &DVector<f64>) -> f64 {
        match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant(c) => *c,
        }
    }

    /// Stacked mean values over the columns of `x`.
    pub fn eval_columns(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let v = match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant(c) => *c,
        };
        DVector::from_element(x.ncols(), v)
    }

    /// Supremum of |m(z)|.
    pub fn sup_abs(&self) -> f64 {
        match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant(c) => c.abs(),
        }
    }
}

/// All fitted quantities in the log domain: kernel parameters followed by
/// the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    log_kernel: Vec<f64>,
    log_noise_var: f64,
}

impl HyperParams {
    pub fn new(log_kernel: Vec<f64>, log_noise_var: f64) -> Result<Self> {
        if log_kernel.iter().any(|v| !v.is_finite()) || !log_noise_var.is_finite() {
            return Err(Error::NonFinite("hyperparameters"));
        }
        Ok(HyperParams {
            log_kernel,
            log_noise_var,
        })
    }

    pub fn from_spec(kernel: &KernelSpec, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::InvalidArgument(
                "noise variance must be positive in log-domain storage".into(),
            ));
        }
        Self::new(
            kernel.params().iter().map(|p| p.ln()).collect(),
            noise_var.ln(),
        )
    }

    pub fn log_kernel(&self) -> &[f64] {
        &self.log_kernel
    }

    pub fn log_noise_var(&self) -> f64 {
        self.log_noise_var
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise_var.exp()
    }

    pub fn kernel_spec(&self, family: KernelFamily, input_dim: usize) -> Result<KernelSpec> {
        let params: Vec<f64> = self.log_kernel.iter().map(|v| v.exp()).collect();
        KernelSpec::from_params(family, input_dim, &params)
    }

    /// Flat vector [log kernel params..., log noise var] for optimizers.
    pub fn as_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.log_kernel.len() + 1);
        for (i, &p) in self.log_kernel.iter().enumerate() {
            v[i] = p;
        }
        v[self.log_kernel.len()] = self.log_noise_var;
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidArgument(
                "hyperparameter vector must at least hold the noise term".into(),
            ));
        }
        Self::new(
            v.iter().take(v.len() - 1).copied().collect(),
            v[v.len() - 1],
        )
    }
}
