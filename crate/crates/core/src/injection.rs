//! Injective map `T` of the KKL observer as a linear combination of product
//! Koopman eigenfunctions.
//!
//! With diagonal filter dynamics `z_j' = -lambda_j z_j + y`, each component
//! satisfies `L_f T_j = -lambda_j T_j + h`. Sampled along snapshot pairs with
//! a forward difference this becomes
//! `[T_j(x+) - (1 - lambda_j dt) T_j(x)] / dt = h(x)`, linear in the
//! coefficients of `T_j` over the eigenfunction dictionary.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::basis::PolyBasis;
use crate::dataset::SnapshotPairs;
use crate::eigfit::{fit_eigenfunction, Eigenfunction};
use crate::error::{Error, Result};
use crate::numerics::complex_least_squares;
use crate::scalar::{cplx, rms, Cplx, Real};

/// Default Tikhonov weight for the coefficient regression.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Tolerance of the `lambda_j != -mu_i` admissibility check.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeNode<T> {
    pub m: usize,
    pub n: i64,
    /// `m * mu_real + i n omega`
    pub mu: Cplx<T>,
}

/// Eigenvalues `m * mu_real + i n omega` of a planar limit cycle for
/// `0 <= m <= M`, `-N <= n <= N`, enumerated m-major then ascending `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenLattice<T> {
    pub mu_real: T,
    pub omega: T,
    pub m_max: usize,
    pub n_max: usize,
    pub nodes: Vec<LatticeNode<T>>,
}

pub fn build_lattice<T: Real>(mu_real: T, omega: T, m_max: usize, n_max: usize) -> Result<EigenLattice<T>> {
    if !(mu_real < T::zero()) {
        return Err(Error::Precondition(format!("mu_real must be negative, got {mu_real}")));
    }
    if !(omega > T::zero()) {
        return Err(Error::Precondition(format!("omega must be positive, got {omega}")));
    }
    let n_max_i = n_max as i64;
    let mut nodes = Vec::with_capacity((m_max + 1) * (2 * n_max + 1));
    for m in 0..=m_max {
        for n in -n_max_i..=n_max_i {
            let mu = cplx(
                mu_real * T::from_usize_lossy(m),
                omega * T::lit(n as f64),
            );
            nodes.push(LatticeNode { m, n, mu });
        }
    }
    Ok(EigenLattice {
        mu_real,
        omega,
        m_max,
        n_max,
        nodes,
    })
}

impl<T: Real> EigenLattice<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of node `(m, n)`.
    pub fn index_of(&self, m: usize, n: i64) -> Option<usize> {
        if m > self.m_max || n.unsigned_abs() as usize > self.n_max {
            return None;
        }
        Some(m * (2 * self.n_max + 1) + (n + self.n_max as i64) as usize)
    }

    /// Rejects any rate with `|lambda + mu| < ADMISSIBILITY_TOL` for a lattice
    /// eigenvalue `mu`, and any non-positive rate.
    pub fn check_admissible(&self, lambdas: &[T]) -> Result<()> {
        let tol = T::lit(ADMISSIBILITY_TOL);
        for &lambda in lambdas {
            if !(lambda > T::zero()) {
                return Err(Error::Precondition(format!("filter rate must be positive, got {lambda}")));
            }
            for node in &self.nodes {
                if (node.mu + Cplx::from(lambda)).norm() < tol {
                    return Err(Error::InvalidLambda {
                        lambda: lambda.as_f64(),
                        m: node.m,
                        n: node.n,
                        mu: node.mu.re.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Eigenfunction factors: `real[m]` for `mu = m mu_real` and `imag[n]` for
/// `mu = i n omega`, `n >= 0`. Negative `n` is the conjugate of `imag[|n|]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors<T> {
    pub real: Vec<Eigenfunction<T>>,
    pub imag: Vec<Eigenfunction<T>>,
}

impl<T: Real> Factors<T> {
    pub fn basis(&self) -> &PolyBasis {
        &self.real[0].basis
    }

    pub fn imag_factor(&self, n: i64) -> Eigenfunction<T> {
        let f = &self.imag[n.unsigned_abs() as usize];
        if n < 0 {
            f.conj()
        } else {
            f.clone()
        }
    }
}

/// Runs the eigenfunction regression for every lattice generator.
pub fn fit_factors<T: Real>(basis: &PolyBasis, pairs: &SnapshotPairs<T>, lattice: &EigenLattice<T>) -> Result<Factors<T>> {
    let mut jobs: Vec<Cplx<T>> = (0..=lattice.m_max)
        .map(|m| cplx(lattice.mu_real * T::from_usize_lossy(m), T::zero()))
        .collect();
    jobs.extend((0..=lattice.n_max).map(|n| cplx(T::zero(), lattice.omega * T::from_usize_lossy(n))));
    let fitted: Vec<Result<Eigenfunction<T>>> = jobs
        .par_iter()
        .map(|&mu| fit_eigenfunction(basis, pairs, mu))
        .collect();
    let mut fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let imag = fitted.split_off(lattice.m_max + 1);
    Ok(Factors { real: fitted, imag })
}

/// Product dictionary: column `k` holds `phi_real,m(x) * phi_imag,n(x)` for
/// lattice node `k = (m, n)`.
pub fn eval_dictionary<T: Real>(factors: &Factors<T>, lattice: &EigenLattice<T>, x: ArrayView2<'_, T>) -> Result<Array2<Cplx<T>>> {
    let real: Vec<Array1<Cplx<T>>> = factors
        .real
        .iter()
        .take(lattice.m_max + 1)
        .map(|f| f.eval(x))
        .collect::<Result<_>>()?;
    let imag: Vec<Array1<Cplx<T>>> = factors
        .imag
        .iter()
        .take(lattice.n_max + 1)
        .map(|f| f.eval(x))
        .collect::<Result<_>>()?;
    if real.len() != lattice.m_max + 1 || imag.len() != lattice.n_max + 1 {
        return Err(Error::Dimension("factor set does not cover the lattice".into()));
    }
    let d = x.nrows();
    let mut out = Array2::zeros((d, lattice.len()));
    for (k, node) in lattice.nodes.iter().enumerate() {
        let r = &real[node.m];
        let im = &imag[node.n.unsigned_abs() as usize];
        let conj = node.n < 0;
        for i in 0..d {
            let b = if conj { im[i].conj() } else { im[i] };
            out[[i, k]] = r[i] * b;
        }
    }
    Ok(out)
}

/// Fitted injective map with one coefficient row per filter rate.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionModel<T> {
    pub lattice: EigenLattice<T>,
    pub factors: Factors<T>,
    pub lambdas: Vec<T>,
    /// `n_z x nodes`; row `j` holds `b_j` in the RMS-normalized factor convention.
    pub coeffs: Array2<Cplx<T>>,
    /// Per-component RMS residual of the regression.
    pub fit_rmse: Vec<T>,
    pub dt: T,
}

/// Design rows `[phi(x+) - (1 - lambda dt) phi(x)] / dt`.
fn design<T: Real>(phi: &Array2<Cplx<T>>, phi_plus: &Array2<Cplx<T>>, lambda: T, dt: T) -> Array2<Cplx<T>> {
    let keep = T::one() - lambda * dt;
    let inv_dt = T::one() / dt;
    let mut v = phi_plus.clone();
    v.zip_mut_with(phi, |a, &b| *a = (*a - b.scale(keep)).scale(inv_dt));
    v
}

/// Fits every injection component by least squares on `pairs`.
pub fn fit_injection<T: Real>(
    basis: &PolyBasis,
    pairs: &SnapshotPairs<T>,
    lattice: &EigenLattice<T>,
    lambdas: &[T],
    ridge: T,
) -> Result<InjectionModel<T>> {
    lattice.check_admissible(lambdas)?;
    let factors = fit_factors(basis, pairs, lattice)?;
    fit_injection_with_factors(factors, pairs, lattice, lambdas, ridge)
}

/// Same as [`fit_injection`] but reuses already fitted factors.
pub fn fit_injection_with_factors<T: Real>(
    factors: Factors<T>,
    pairs: &SnapshotPairs<T>,
    lattice: &EigenLattice<T>,
    lambdas: &[T],
    ridge: T,
) -> Result<InjectionModel<T>> {
    lattice.check_admissible(lambdas)?;
    if lambdas.is_empty() {
        return Err(Error::Precondition("at least one filter rate is required".into()));
    }
    let phi = eval_dictionary(&factors, lattice, pairs.x.view())?;
    let phi_plus = eval_dictionary(&factors, lattice, pairs.x_plus.view())?;

    let solved: Vec<Result<(Array1<Cplx<T>>, T)>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let v = design(&phi, &phi_plus, lambda, pairs.dt);
            // columns are scaled to unit norm so the ridge is measured against a unit-diagonal
            // normal matrix; the product dictionary is exactly rank deficient and an absolute
            // ridge would otherwise lose to rounding in the Cholesky pivots
            let norms: Vec<T> = v
                .columns()
                .into_iter()
                .map(|c| {
                    let n = c.iter().map(|e| e.norm_sqr()).sum::<T>().sqrt();
                    if n > T::zero() { n } else { T::one() }
                })
                .collect();
            let mut scaled = v.clone();
            for (mut c, &n) in scaled.columns_mut().into_iter().zip(&norms) {
                c.mapv_inplace(|e| e.unscale(n));
            }
            let mut b = complex_least_squares(scaled.view(), pairs.y.view(), ridge)?;
            b.iter_mut().zip(&norms).for_each(|(e, &n)| *e = e.unscale(n));
            let pred = v.dot(&b);
            let rmse = rms(pred.iter().zip(pairs.y.iter()).map(|(p, &y)| (*p - Cplx::from(y)).norm()));
            Ok((b, rmse))
        })
        .collect();

    let mut coeffs = Array2::zeros((lambdas.len(), lattice.len()));
    let mut fit_rmse = Vec::with_capacity(lambdas.len());
    for (j, res) in solved.into_iter().enumerate() {
        let (b, rmse) = res?;
        coeffs.row_mut(j).assign(&b);
        fit_rmse.push(rmse);
    }
    Ok(InjectionModel {
        lattice: lattice.clone(),
        factors,
        lambdas: lambdas.to_vec(),
        coeffs,
        fit_rmse,
        dt: pairs.dt,
    })
}

impl<T: Real> InjectionModel<T> {
    pub fn n_z(&self) -> usize {
        self.lambdas.len()
    }

    /// Complex values `b_j^T phi(x)`, one column per component.
    pub fn eval_t_complex(&self, x: ArrayView2<'_, T>) -> Result<Array2<Cplx<T>>> {
        let phi = eval_dictionary(&self.factors, &self.lattice, x)?;
        Ok(phi.dot(&self.coeffs.t()))
    }

    /// `T(x)`: real part of [`eval_t_complex`](Self::eval_t_complex).
    pub fn eval_t(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self.eval_t_complex(x)?.mapv(|z| z.re))
    }

    /// Per component, `max_i |Im T_j(x_i)| / rms_i |T_j(x_i)|`.
    pub fn imag_residue(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>> {
        let t = self.eval_t_complex(x)?;
        Ok(t.columns()
            .into_iter()
            .map(|col| {
                let scale = rms(col.iter().map(|z| z.norm()));
                let worst = col.iter().fold(T::zero(), |m, z| m.max(z.im.abs()));
                if scale.is_zero() {
                    worst
                } else {
                    worst / scale
                }
            })
            .collect())
    }

    /// Per component, `rms_i |(T_j(x_i+) - T_j(x_i)) / dt + lambda_j T_j(x_i) - y_i|`
    /// using the real part of `T`.
    pub fn pde_residual(&self, pairs: &SnapshotPairs<T>) -> Result<Vec<T>> {
        let t = self.eval_t(pairs.x.view())?;
        let tp = self.eval_t(pairs.x_plus.view())?;
        Ok((0..self.n_z())
            .map(|j| {
                let lambda = self.lambdas[j];
                rms((0..pairs.len()).map(|i| {
                    ((tp[[i, j]] - t[[i, j]]) / pairs.dt + lambda * t[[i, j]] - pairs.y[i]).abs()
                }))
            })
            .collect())
    }
}
