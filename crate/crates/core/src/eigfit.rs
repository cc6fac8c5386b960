//! Koopman eigenfunction regression over a polynomial dictionary.
//!
//! For a prescribed continuous-time eigenvalue `mu` the eigenfunction
//! `phi = G^T beta` should satisfy `phi(x+) = e^{mu dt} phi(x)` on every
//! snapshot pair. Stacking the residual rows `gamma_i = G(x_i+) - e^{mu dt} G(x_i)`
//! turns the search for `beta` into the minimum-eigenvalue problem of the
//! Hermitian Gram matrix `Gamma = sum_i conj(gamma_i) gamma_i^T` under
//! `|beta| = 1`.

use ndarray::{Array1, Array2, ArrayView2};
use num_traits::Zero;

use crate::basis::PolyBasis;
use crate::dataset::SnapshotPairs;
use crate::error::{Error, Result};
use crate::numerics::{hermitian_min_eigvec, HermitianMatrix};
use crate::scalar::{cexp, cplx, rms, Cplx, Real};

/// Relative spectral gap below which the minimizer is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// A fitted eigenfunction `phi(x) = G(x)^T beta / rms_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction<T> {
    /// Continuous-time (Lie) eigenvalue.
    pub mu: Cplx<T>,
    /// Unit-norm, phase-fixed coefficients over `basis`.
    pub beta: Array1<Cplx<T>>,
    pub basis: PolyBasis,
    /// RMS of `|G^T beta|` over the training states; dividing by it gives
    /// unit data-RMS.
    pub rms_scale: T,
    /// `sqrt(lambda_min / d) / rms_scale`.
    pub defect: T,
    /// Smallest eigenvalue of `Gamma` (the attained cost).
    pub lambda_min: T,
    /// Gap to the second-smallest eigenvalue of `Gamma`.
    pub gap: T,
}

impl<T: Real> Eigenfunction<T> {
    /// The constant function, exact for `mu = 0`.
    pub fn constant(basis: &PolyBasis) -> Self {
        let mut beta = Array1::zeros(basis.len());
        beta[0] = Cplx::from(T::one());
        Self {
            mu: Cplx::zero(),
            beta,
            basis: basis.clone(),
            rms_scale: T::one(),
            defect: T::zero(),
            lambda_min: T::zero(),
            gap: T::infinity(),
        }
    }

    /// Complex conjugate eigenfunction, with eigenvalue `conj(mu)`.
    pub fn conj(&self) -> Self {
        Self {
            mu: self.mu.conj(),
            beta: self.beta.mapv(|z| z.conj()),
            ..self.clone()
        }
    }

    /// `G^T beta` without the RMS normalization.
    pub fn eval_raw(&self, x: ArrayView2<'_, T>) -> Result<Array1<Cplx<T>>> {
        let g = self.basis.eval(x)?;
        Ok(combine(&g, &self.beta))
    }

    /// Normalized values `phi(x_i)` for each row of `x`.
    pub fn eval(&self, x: ArrayView2<'_, T>) -> Result<Array1<Cplx<T>>> {
        let s = self.rms_scale;
        Ok(self.eval_raw(x)?.mapv(|z| z.unscale(s)))
    }

    /// Discrete-time multiplier `e^{mu dt}`.
    pub fn multiplier(&self, dt: T) -> Cplx<T> {
        cexp(self.mu.scale(dt))
    }
}

fn combine<T: Real>(g: &Array2<T>, beta: &Array1<Cplx<T>>) -> Array1<Cplx<T>> {
    g.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(beta.iter())
                .fold(Cplx::zero(), |acc, (&gv, &b)| acc + b.scale(gv))
        })
        .collect()
}

/// Residual rows `gamma_i = G(x_i+) - e^{mu dt} G(x_i)`.
pub fn residual_rows<T: Real>(basis: &PolyBasis, pairs: &SnapshotPairs<T>, mu: Cplx<T>) -> Result<Array2<Cplx<T>>> {
    let g = basis.eval(pairs.x.view())?;
    let gp = basis.eval(pairs.x_plus.view())?;
    let rho = cexp(mu.scale(pairs.dt));
    Ok(Array2::from_shape_fn(g.dim(), |(i, j)| cplx(gp[[i, j]], T::zero()) - rho.scale(g[[i, j]])))
}

/// `Gamma = sum_i conj(gamma_i) gamma_i^T`.
pub fn gram<T: Real>(gamma: &Array2<Cplx<T>>) -> Result<HermitianMatrix<T>> {
    let gh = gamma.t().mapv(|z| z.conj());
    HermitianMatrix::new(gh.dot(gamma))
}

/// Fits the eigenfunction of `mu` on `pairs`. `mu = 0` returns the constant
/// function directly.
pub fn fit_eigenfunction<T: Real>(basis: &PolyBasis, pairs: &SnapshotPairs<T>, mu: Cplx<T>) -> Result<Eigenfunction<T>> {
    let d = pairs.len();
    if d == 0 {
        return Err(Error::Precondition("no snapshot pairs".into()));
    }
    if pairs.n_x() != basis.n_vars() {
        return Err(Error::Dimension(format!(
            "pairs have {} state columns, basis has {} variables",
            pairs.n_x(),
            basis.n_vars()
        )));
    }
    if mu.is_zero() {
        return Ok(Eigenfunction::constant(basis));
    }
    if d < basis.len() {
        log::warn!(
            "under-determined eigenfunction fit: {d} pairs for {} basis functions",
            basis.len()
        );
    }

    let gamma = residual_rows(basis, pairs, mu)?;
    let big_gamma = gram(&gamma)?;
    let min = hermitian_min_eigvec(&big_gamma)?;
    let norm = big_gamma.norm();
    if min.gap < T::lit(DEGENERACY_TOL) * norm {
        log::warn!(
            "near-degenerate minimum eigenvalue for mu = {}{:+}i: gap {:e} (|Gamma| = {:e})",
            mu.re,
            mu.im,
            min.gap,
            norm
        );
    }

    let raw = combine(&basis.eval(pairs.x.view())?, &min.vector);
    let scale = rms(raw.iter().map(|z| z.norm()));
    if !(scale >= T::lit(1e-14)) {
        return Err(Error::DegenerateEigenfunction { rms: scale.as_f64() });
    }
    let cost = min.value.max(T::zero());
    let defect = (cost / T::from_usize_lossy(d)).sqrt() / scale;

    Ok(Eigenfunction {
        mu,
        beta: min.vector,
        basis: basis.clone(),
        rms_scale: scale,
        defect,
        lambda_min: min.value,
        gap: min.gap,
    })
}

/// `rms_i |phi(x_i+) - e^{mu dt} phi(x_i)| / rms_i |phi(x_i)|` on `pairs`.
pub fn eigen_defect<T: Real>(phi: &Eigenfunction<T>, pairs: &SnapshotPairs<T>) -> Result<T> {
    let now = phi.eval(pairs.x.view())?;
    let next = phi.eval(pairs.x_plus.view())?;
    let rho = phi.multiplier(pairs.dt);
    let denom = rms(now.iter().map(|z| z.norm()));
    if !(denom >= T::lit(1e-14)) {
        return Err(Error::DegenerateEigenfunction { rms: denom.as_f64() });
    }
    let num = rms(now.iter().zip(next.iter()).map(|(&a, &b)| (b - rho * a).norm()));
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SnapshotPairs;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact-flow pairs of `x' = -x` on a uniform grid.
    fn decay_pairs(n: usize, lo: f64, hi: f64, dt: f64) -> SnapshotPairs<f64> {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| lo + (hi - lo) * i as f64 / (n - 1) as f64);
        let xp = x.mapv(|v| v * (-dt).exp());
        let y = x.column(0).to_owned();
        SnapshotPairs::new(dt, x, xp, y, vec![0; n], (0..n).collect()).unwrap()
    }

    /// Pairs of the rotation-plus-contraction `r' = -r, theta' = 1`.
    fn spiral_pairs(n: usize, seed: u64) -> SnapshotPairs<f64> {
        let dt: f64 = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, s, e) = (dt.cos(), dt.sin(), (-dt).exp());
        let mut x = Array2::zeros((n, 2));
        let mut xp = Array2::zeros((n, 2));
        for i in 0..n {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            xp[[i, 0]] = e * (c * a - s * b);
            xp[[i, 1]] = e * (s * a + c * b);
        }
        let y = x.column(0).to_owned();
        SnapshotPairs::new(dt, x, xp, y, vec![0; n], (0..n).collect()).unwrap()
    }

    fn overlap(beta: &Array1<Cplx<f64>>, k: usize) -> f64 {
        beta[k].norm()
    }

    #[test]
    fn zero_mu_is_constant() {
        let pairs = decay_pairs(50, 0.1, 2.0, 0.1);
        let basis = PolyBasis::new(1, 3).unwrap();
        let phi = fit_eigenfunction(&basis, &pairs, Cplx::zero()).unwrap();
        assert!(phi.defect < 1e-10);
        let vals = phi.eval(pairs.x.view()).unwrap();
        assert!(vals.iter().all(|z| (*z - Cplx::from(1.0)).norm() < 1e-15));
        assert_eq!(eigen_defect(&phi, &pairs).unwrap(), 0.0);
    }

    #[test]
    fn linear_decay_recovers_x_and_x_squared() {
        let pairs = decay_pairs(200, 0.1, 2.0, 0.1);
        let basis = PolyBasis::new(1, 2).unwrap();
        let phi = fit_eigenfunction(&basis, &pairs, cplx(-1.0, 0.0)).unwrap();
        assert!(overlap(&phi.beta, 1) > 1.0 - 1e-10, "{:?}", phi.beta);
        assert!(phi.defect < 1e-8);
        assert!(eigen_defect(&phi, &pairs).unwrap() < 1e-8);

        let phi2 = fit_eigenfunction(&basis, &pairs, cplx(-2.0, 0.0)).unwrap();
        assert!(overlap(&phi2.beta, 2) > 1.0 - 1e-10, "{:?}", phi2.beta);
        assert!(phi2.defect < 1e-8);
    }

    #[test]
    fn rms_normalization() {
        let pairs = spiral_pairs(300, 1);
        let basis = PolyBasis::new(2, 3).unwrap();
        let phi = fit_eigenfunction(&basis, &pairs, cplx(-1.0, 1.0)).unwrap();
        let vals = phi.eval(pairs.x.view()).unwrap();
        let r = rms(vals.iter().map(|z| z.norm()));
        assert!((r - 1.0).abs() < 1e-9);
        let norm: f64 = phi.beta.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        // x1 + i x2 is the exact eigenfunction for mu = -1 + i
        assert!(phi.defect < 1e-8, "{}", phi.defect);
    }

    #[test]
    fn constant_with_wrong_mu_has_known_defect() {
        let pairs = decay_pairs(20, 0.1, 2.0, 0.1);
        let basis = PolyBasis::new(1, 2).unwrap();
        let phi = Eigenfunction {
            mu: cplx(-1.0, 0.0),
            ..Eigenfunction::constant(&basis)
        };
        let d = eigen_defect(&phi, &pairs).unwrap();
        assert!((d - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((d - 0.09516).abs() < 1e-5);
    }

    #[test]
    fn degenerate_eigenfunction_rejected() {
        let pairs = decay_pairs(20, 0.1, 2.0, 0.1);
        let basis = PolyBasis::new(1, 2).unwrap();
        let phi = Eigenfunction {
            beta: Array1::zeros(3),
            ..Eigenfunction::constant(&basis)
        };
        assert!(matches!(eigen_defect(&phi, &pairs), Err(Error::DegenerateEigenfunction { .. })));
    }

    #[test]
    fn cost_identity_and_optimality() {
        let pairs = spiral_pairs(200, 4);
        let basis = PolyBasis::new(2, 3).unwrap();
        let mu = cplx(-0.5, 2.0);
        let phi = fit_eigenfunction(&basis, &pairs, mu).unwrap();
        let gamma = residual_rows(&basis, &pairs, mu).unwrap();
        let cost = |beta: &Array1<Cplx<f64>>| -> f64 { gamma.dot(beta).iter().map(|z| z.norm_sqr()).sum() };
        let g = gram(&gamma).unwrap();
        let attained = cost(&phi.beta);
        assert!((attained - phi.lambda_min).abs() <= 1e-9 * g.norm().max(attained));
        assert!(phi.lambda_min >= -1e-9 * g.norm());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v = Array1::from_shape_fn(basis.len(), |_| cplx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v = v.mapv(|z| z / n);
            assert!(cost(&v) >= phi.lambda_min - 1e-9);
        }
    }

    #[test]
    fn conjugate_mu_gives_conjugate_beta() {
        let pairs = spiral_pairs(200, 8);
        let basis = PolyBasis::new(2, 4).unwrap();
        let a = fit_eigenfunction(&basis, &pairs, cplx(-0.3, 0.7)).unwrap();
        let b = fit_eigenfunction(&basis, &pairs, cplx(-0.3, -0.7)).unwrap();
        let diff = a.beta.iter().zip(b.beta.iter()).map(|(x, y)| (x.conj() - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }
}
