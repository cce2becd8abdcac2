//! Deterministic linear-algebra and probability primitives.
//!
//! Everything in here is pure: solvers never mutate their inputs and the
//! random sampler is a function of the distribution and the stream state.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seedable, reproducible random stream used everywhere in the crate.
pub type RngStream = ChaCha8Rng;

/// A stream derived from a bare seed.
pub fn seed_stream(seed: u64) -> RngStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent stream for one trajectory of a Monte-Carlo run.
///
/// Streams for different indices never overlap, so parallel runs produce
/// the same draws regardless of scheduling.
pub fn trajectory_stream(seed: u64, index: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Relative asymmetry tolerated by [`SymMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;

/// Jitter escalation schedule for failed Cholesky factorizations, as a
/// fraction of the mean diagonal entry.
const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Dense symmetric real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates squareness, finiteness and symmetry (to 1e-12 relative).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        for r in 0..m.nrows() {
            for c in (r + 1)..m.ncols() {
                let a = m[(r, c)];
                let b = m[(c, r)];
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({r},{c}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Gaussian with independent components, stored as mean and per-dimension
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: DVector<f64>,
    var: DVector<f64>,
}

impl DiagGaussian {
    pub fn new(mean: DVector<f64>, var: DVector<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries but variance has {}",
                mean.len(),
                var.len()
            )));
        }
        if !mean.iter().all(|v| v.is_finite()) || !var.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("diagonal Gaussian"));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "variance entries must be nonnegative".into(),
            ));
        }
        Ok(DiagGaussian { mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn var(&self) -> &DVector<f64> {
        &self.var
    }

    /// Sum of the per-dimension variances.
    pub fn trace_var(&self) -> f64 {
        self.var.sum()
    }
}

fn ensure_finite(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// Sampled memory states can make a Gram matrix numerically singular even
/// though it is positive semi-definite in exact arithmetic, so a failed
/// factorization is retried with jitter eps * trace/dim on the diagonal,
/// eps running from 1e-10 up to 1e-4 by factors of ten.
pub(crate) fn chol_pd(a: &SymMatrix) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = Cholesky::new(a.0.clone()) {
        return Some((ch, 0.0));
    }
    let scale = a.0.trace() / a.dim() as f64;
    for eps in JITTER_LADDER {
        let jitter = eps * scale;
        if jitter <= 0.0 {
            continue;
        }
        let mut m = a.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Some((ch, jitter));
        }
    }
    None
}

/// Solves `A X = B` for symmetric positive-definite `A`.
///
/// Falls back to the jitter ladder and finally to
/// [`pseudo_inverse_solve`] when the matrix is singular.
pub fn chol_solve_pd(a: &SymMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite("right-hand side", b)?;
    if b.nrows() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but right-hand side has {} rows",
            a.dim(),
            a.dim(),
            b.nrows()
        )));
    }
    match chol_pd(a) {
        Some((ch, _)) => Ok(ch.solve(b)),
        None => pseudo_inverse_solve(a, b),
    }
}

/// Minimum-norm least-squares solution of `A X = B` via SVD.
///
/// Singular values below dim * machine-epsilon * sigma_max are treated as
/// zero.
pub fn pseudo_inverse_solve(a: &SymMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite("right-hand side", b)?;
    if b.nrows() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but right-hand side has {} rows",
            a.dim(),
            a.dim(),
            b.nrows()
        )));
    }
    let svd = a.0.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = a.dim() as f64 * f64::EPSILON * sigma_max;
    svd.solve(b, tol)
        .map_err(|e| Error::NumericalBreakdown(format!("SVD solve failed: {e}")))
}

/// Draws one sample from a diagonal Gaussian.
///
/// Zero-variance dimensions return the mean exactly. One standard normal is
/// consumed per dimension regardless of the variance, so the stream position
/// after the call depends only on the dimension.
pub fn mvn_sample(d: &DiagGaussian, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_iterator(
        d.dim(),
        d.mean.iter().zip(d.var.iter()).map(|(&m, &v)| {
            let z: f64 = StandardNormal.sample(rng);
            if v > 0.0 {
                m + v.sqrt() * z
            } else {
                m
            }
        }),
    )
}

/// Default node count for [`abs_moment_quadrature`].
const GH_DEFAULT_NODES: usize = 64;
/// Node budget before the quadrature gives up.
const GH_MAX_NODES: usize = 1024;
/// Relative agreement between successive node doublings.
const GH_REL_TOL: f64 = 1e-10;

/// Orthonormal-Hermite recurrence at `x` for weight exp(-x^2): returns
/// `(p_n, p_n', sum_{k<n} p_k^2, rescales)` where every value carries the
/// common factor 1e150^rescales. Low-degree polynomials explode at the
/// extreme nodes of a large rule, so the running values are renormalized;
/// the matching weights then underflow to zero instead of breaking.
fn hermite_ortho(n: usize, x: f64) -> (f64, f64, f64, u32) {
    const BIG: f64 = 1e140;
    const SHRINK: f64 = 1e-140;
    let mut p1 = std::f64::consts::PI.powf(-0.25); // p_0
    let mut p2 = 0.0; // p_{-1}
    let mut sumsq = 0.0;
    let mut rescales = 0u32;
    for j in 1..=n {
        sumsq += p1 * p1;
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
        if p1.abs() > BIG {
            p1 *= SHRINK;
            p2 *= SHRINK;
            sumsq *= SHRINK * SHRINK;
            rescales += 1;
        }
    }
    let dpn = (2.0 * n as f64).sqrt() * p2;
    (p1, dpn, sumsq, rescales)
}

/// Gauss-Hermite nodes and weights for `int f(x) exp(-x^2) dx`.
///
/// Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix
/// (Golub-Welsch), polished by two Newton steps; weights come from the
/// Christoffel function `w_i = 1 / sum_{k<n} p_k(x_i)^2`.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut x: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    x.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    for i in 0..n / 2 {
        let m = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -m;
        x[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let mut w = vec![0.0; n];
    for i in 0..n {
        for _ in 0..2 {
            let (pn, dpn, _, _) = hermite_ortho(n, x[i]);
            if dpn != 0.0 && (pn / dpn).is_finite() {
                x[i] -= pn / dpn;
            }
        }
        let (_, _, sumsq, rescales) = hermite_ortho(n, x[i]);
        let mut wi = 1.0 / sumsq;
        for _ in 0..rescales {
            wi *= 1e-280;
        }
        w[i] = wi;
    }
    (x, w)
}

/// `int_0^inf t^p exp(-(t-a)^2/2) dt` by the stable two-term recursion.
fn half_gaussian_poly(p: u32, a: f64) -> f64 {
    // I_0 = sqrt(pi/2) erfc(-a/sqrt2), I_1 = exp(-a^2/2) + a I_0,
    // I_p = (p-1) I_{p-2} + a I_{p-1}.
    let i0 = (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(-a / std::f64::consts::SQRT_2);
    if p == 0 {
        return i0;
    }
    let i1 = (-0.5 * a * a).exp() + a * i0;
    let (mut prev, mut cur) = (i0, i1);
    for k in 2..=p {
        let next = (k as f64 - 1.0) * prev + a * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// The p-th absolute moment of a scalar Gaussian with mean `c1` and
/// precision `c2` (variance 1/c2).
///
/// The smooth polynomial part is integrated by Gauss-Hermite quadrature
/// (64 nodes by default) with node doubling until successive estimates
/// agree to 1e-10 relative. The kink of |z|^p at the origin (odd p) is a
/// half-Gaussian polynomial integral and is added in closed form; plain
/// quadrature of the kink stalls near 1e-3 relative accuracy, far outside
/// the doubling tolerance.
pub fn abs_moment_quadrature(p: u32, c1: f64, c2: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("moment order must be positive".into()));
    }
    if !(c2 > 0.0) || !c2.is_finite() || !c1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite c1 and positive finite c2, got c1={c1}, c2={c2}"
        )));
    }
    let sigma = c2.sqrt().recip();
    // E|Z|^p = E[Z^p] + correction, where the correction vanishes for even
    // p and equals 2 int_{-inf}^0 (-z)^p N(z; c1, sigma^2) dz for odd p.
    let correction = if p % 2 == 0 {
        0.0
    } else {
        2.0 * sigma.powi(p as i32) / (2.0 * std::f64::consts::PI).sqrt()
            * half_gaussian_poly(p, -c1 / sigma)
    };

    let scale = std::f64::consts::SQRT_2 * sigma;
    let signed_moment = |n: usize| -> f64 {
        let (x, w) = gauss_hermite(n);
        let sum: f64 = x
            .iter()
            .zip(w.iter())
            .map(|(&u, &wi)| wi * (c1 + scale * u).powi(p as i32))
            .sum();
        sum / std::f64::consts::PI.sqrt()
    };

    let mut nodes = GH_DEFAULT_NODES;
    let mut est = signed_moment(nodes);
    while nodes < GH_MAX_NODES {
        nodes *= 2;
        let refined = signed_moment(nodes);
        let scale_ref = (refined.abs() + correction.abs()).max(f64::MIN_POSITIVE);
        if (refined - est).abs() <= GH_REL_TOL * scale_ref {
            return Ok(refined + correction);
        }
        est = refined;
    }
    Err(Error::NoConvergence {
        max_nodes: GH_MAX_NODES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        SymMatrix::new(DMatrix::from_fn(n, n, |r, c| rows[r][c])).unwrap()
    }

    #[test]
    fn chol_solve_identity() {
        let a = sym(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let x = chol_solve_pd(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 3.0);
        assert_abs_diff_eq!(x[(1, 0)], 4.0);
    }

    #[test]
    fn chol_solve_two_by_two() {
        // inverse of [[2,-1],[-1,2]] is (1/3)[[2,1],[1,2]]
        let a = sym(&[&[2.0, -1.0], &[-1.0, 2.0]]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x = chol_solve_pd(&a, &b).unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(x[(1, 0)], 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn singular_matrix_returns_minimum_norm_solution() {
        let a = sym(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let x = chol_solve_pd(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(x[(1, 0)], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn chol_solve_rejects_non_finite() {
        let a = sym(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = DMatrix::from_column_slice(2, 1, &[f64::NAN, 0.0]);
        assert!(matches!(chol_solve_pd(&a, &b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn pseudo_inverse_identity_is_exact() {
        let a = sym(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let x = pseudo_inverse_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(x[(i, 0)], b[(i, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn pseudo_inverse_zero_map_gives_zero() {
        let a = sym(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let x = pseudo_inverse_solve(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 0.0);
        assert_abs_diff_eq!(x[(1, 0)], 0.0);
    }

    #[test]
    fn pseudo_inverse_rank_one_residual_matches_projection() {
        // A = s u u^T. The least-squares residual of A x = b equals the
        // component of b orthogonal to u, which we can write down directly.
        let u = DVector::from_column_slice(&[3.0, 4.0]).normalize();
        let s = 2.5;
        let a = SymMatrix::new(s * &u * u.transpose()).unwrap();
        let b = DMatrix::from_column_slice(2, 1, &[1.0, -2.0]);
        let x = pseudo_inverse_solve(&a, &b).unwrap();
        let residual = (&b - a.matrix() * &x).norm();
        let bvec = DVector::from_column_slice(&[1.0, -2.0]);
        let expected = (&bvec - &u * u.dot(&bvec)).norm();
        assert_relative_eq!(residual, expected, max_relative = 1e-12);
    }

    #[test]
    fn mvn_sample_zero_variance_returns_mean() {
        let d = DiagGaussian::new(
            DVector::from_column_slice(&[1.0, -2.0]),
            DVector::from_column_slice(&[0.0, 0.0]),
        )
        .unwrap();
        let mut rng = seed_stream(7);
        let s = mvn_sample(&d, &mut rng);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], -2.0);
    }

    #[test]
    fn mvn_sample_is_deterministic_for_cloned_stream() {
        let d = DiagGaussian::new(
            DVector::from_column_slice(&[0.0, 1.0, 2.0]),
            DVector::from_column_slice(&[1.0, 0.5, 2.0]),
        )
        .unwrap();
        let mut a = seed_stream(42);
        let mut b = a.clone();
        assert_eq!(mvn_sample(&d, &mut a), mvn_sample(&d, &mut b));
    }

    #[test]
    fn mvn_sample_standard_normal_moments() {
        let d = DiagGaussian::new(DVector::zeros(1), DVector::from_element(1, 1.0)).unwrap();
        let mut rng = seed_stream(3);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = mvn_sample(&d, &mut rng)[0];
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean = {mean}");
        assert!((var - 1.0).abs() < 0.05, "var = {var}");
    }

    #[test]
    fn abs_moment_second_of_standard_normal() {
        let m = abs_moment_quadrature(2, 0.0, 1.0).unwrap();
        assert_relative_eq!(m, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn abs_moment_half_normal_mean() {
        let m = abs_moment_quadrature(1, 0.0, 1.0).unwrap();
        assert_relative_eq!(m, (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn abs_moment_mean_dominates_against_monte_carlo() {
        // oracle: 10^6 draws of |N(5,1)|, 3-sigma band
        let mut rng = seed_stream(11);
        let d = DiagGaussian::new(DVector::from_element(1, 5.0), DVector::from_element(1, 1.0))
            .unwrap();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let v = mvn_sample(&d, &mut rng)[0].abs();
            sum += v;
            sumsq += v * v;
        }
        let mc_mean = sum / n as f64;
        let mc_var = sumsq / n as f64 - mc_mean * mc_mean;
        let se = (mc_var / n as f64).sqrt();
        let m = abs_moment_quadrature(1, 5.0, 1.0).unwrap();
        assert!((m - mc_mean).abs() < 3.0 * se, "quadrature {m} vs MC {mc_mean} (se {se})");
        assert_relative_eq!(m, 5.0, max_relative = 1e-5);
    }

    #[test]
    fn abs_moment_monotone_in_center_magnitude() {
        for p in [1u32, 2, 3, 4] {
            let mut prev = 0.0;
            for k in 0..20 {
                let c1 = 0.25 * k as f64;
                let m = abs_moment_quadrature(p, c1, 0.7).unwrap();
                assert!(m >= prev - 1e-12, "p={p}, c1={c1}: {m} < {prev}");
                prev = m;
            }
        }
    }

    #[test]
    fn abs_moment_rejects_bad_precision() {
        assert!(abs_moment_quadrature(1, 0.0, 0.0).is_err());
        assert!(abs_moment_quadrature(1, 0.0, -1.0).is_err());
        assert!(abs_moment_quadrature(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gauss_hermite_weights_integrate_constants() {
        for n in [16usize, 64, 256, 1024] {
            let (_, w) = gauss_hermite(n);
            let total: f64 = w.iter().sum();
            assert_relative_eq!(total, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        }
    }

    proptest! {
        // chol and pseudo-inverse agree on well-conditioned SPD systems
        #[test]
        fn chol_and_pinv_agree_on_spd(seed in 0u64..200, dim in 1usize..12) {
            let mut rng = seed_stream(seed);
            let m = DMatrix::from_fn(dim, dim, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let spd = &m * m.transpose() + DMatrix::<f64>::identity(dim, dim) * dim as f64;
            let a = SymMatrix::new((&spd + spd.transpose()) * 0.5).unwrap();
            let b = DMatrix::from_fn(dim, 1, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let x1 = chol_solve_pd(&a, &b).unwrap();
            let x2 = pseudo_inverse_solve(&a, &b).unwrap();
            let denom = x1.norm().max(1e-12);
            prop_assert!((&x1 - &x2).norm() / denom < 1e-8);
        }

        // replaying the stream replays the draw
        #[test]
        fn mvn_sample_replays(seed in 0u64..1000) {
            let d = DiagGaussian::new(
                DVector::from_column_slice(&[0.3, -1.0]),
                DVector::from_column_slice(&[0.8, 0.0]),
            ).unwrap();
            let mut a = seed_stream(seed);
            let mut b = seed_stream(seed);
            prop_assert_eq!(mvn_sample(&d, &mut a), mvn_sample(&d, &mut b));
        }
    }
}

