//! Left pseudo-inverse `T^+` of the injective map by kernel ridge regression.
//!
//! Given states `x_i` and their images `z_i = T(x_i)`, the dual coefficients
//! are `alpha = (Q + p xi I)^{-1} X` with `Q_ij = k(z_i, z_j)`, and
//! `T^+(z) = sum_i alpha_i k(z_i, z)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::injection::InjectionModel;
use crate::numerics::{spd_residual, Cholesky};
use crate::scalar::{rms, Real};

/// Default regularization; exactly zero risks a failed factorization when
/// two training images nearly coincide.
pub const DEFAULT_XI: f64 = 1e-8;

/// Training images closer than this are reported.
const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    /// `exp(-|a - b| / l)`
    #[default]
    Laplace,
    /// `exp(-|a - b|^2 / (2 l^2))`
    Gaussian,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Laplace => "laplace",
            KernelKind::Gaussian => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "laplace" => Some(KernelKind::Laplace),
            "gaussian" => Some(KernelKind::Gaussian),
            _ => None,
        }
    }

    #[inline]
    pub fn eval<T: Real>(self, a: ArrayView1<'_, T>, b: ArrayView1<'_, T>, l: T) -> T {
        let d2 = sq_dist(a, b);
        match self {
            KernelKind::Laplace => (-d2.sqrt() / l).exp(),
            KernelKind::Gaussian => (-d2 / (T::lit(2.0) * l * l)).exp(),
        }
    }
}

#[inline]
fn sq_dist<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&u, &v)| (u - v) * (u - v)).sum()
}

/// `exp(-|zi - zj| / l)`.
pub fn laplace_kernel<T: Real>(zi: ArrayView1<'_, T>, zj: ArrayView1<'_, T>, l: T) -> T {
    KernelKind::Laplace.eval(zi, zj, l)
}

/// Gram matrix `Q_ij = k(z_i, z_j)`.
pub fn kernel_matrix<T: Real>(z: ArrayView2<'_, T>, l: T, kind: KernelKind) -> Array2<T> {
    let p = z.nrows();
    let mut q = Array2::zeros((p, p));
    q.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let zi = z.row(i);
            for j in 0..p {
                row[j] = kind.eval(zi, z.row(j), l);
            }
        });
    q
}

/// Fitted kernel ridge regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel<T> {
    pub z_points: Array2<T>,
    pub alpha: Array2<T>,
    pub length_scale: T,
    pub xi: T,
    pub kernel: KernelKind,
}

/// Fits `T^+` on the pairs `(z_i, x_i)`.
pub fn fit_krr<T: Real>(z: ArrayView2<'_, T>, x: ArrayView2<'_, T>, l: T, xi: T, kernel: KernelKind) -> Result<KrrModel<T>> {
    let p = z.nrows();
    if p == 0 {
        return Err(Error::Precondition("kernel regression needs at least one point".into()));
    }
    if x.nrows() != p {
        return Err(Error::Dimension(format!("{p} inputs but {} targets", x.nrows())));
    }
    if !(l > T::zero()) {
        return Err(Error::Precondition(format!("length scale must be positive, got {l}")));
    }
    if !(xi >= T::zero()) {
        return Err(Error::Precondition(format!("xi must be non-negative, got {xi}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite observer-state training point".into()));
    }
    let close = closest_pair(z);
    if let Some((i, j, dist)) = close {
        if dist < T::lit(DUPLICATE_TOL) {
            log::warn!("training images {i} and {j} nearly coincide (distance {dist:e})");
        }
    }

    let q = kernel_matrix(z, l, kernel);
    let shift = T::from_usize_lossy(p) * xi;
    let chol = Cholesky::factor(q.view(), shift).map_err(|e| match e {
        Error::NotPositiveDefinite { column, pivot, .. } => Error::NotPositiveDefinite {
            column,
            pivot,
            hint: "; increase xi",
        },
        other => other,
    })?;
    let alpha = chol.solve(x)?;
    Ok(KrrModel {
        z_points: z.to_owned(),
        alpha,
        length_scale: l,
        xi,
        kernel,
    })
}

fn closest_pair<T: Real>(z: ArrayView2<'_, T>) -> Option<(usize, usize, T)> {
    let p = z.nrows();
    let mut best: Option<(usize, usize, T)> = None;
    for i in 0..p {
        for j in i + 1..p {
            let d = sq_dist(z.row(i), z.row(j));
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((i, j, d));
            }
        }
    }
    best.map(|(i, j, d)| (i, j, d.sqrt()))
}

/// Computes `z_i = T(x_i)` with the fitted injection and regresses back.
pub fn fit_inverse<T: Real>(
    injection: &InjectionModel<T>,
    x_points: ArrayView2<'_, T>,
    l: T,
    xi: T,
    kernel: KernelKind,
) -> Result<KrrModel<T>> {
    let z = injection.eval_t(x_points)?;
    fit_krr(z.view(), x_points, l, xi, kernel)
}

impl<T: Real> KrrModel<T> {
    pub fn n_points(&self) -> usize {
        self.z_points.nrows()
    }

    fn check_width(&self, z: ArrayView2<'_, T>) -> Result<()> {
        if z.ncols() != self.z_points.ncols() {
            return Err(Error::Dimension(format!(
                "query has {} columns, model expects {}",
                z.ncols(),
                self.z_points.ncols()
            )));
        }
        Ok(())
    }

    /// `T^+(z_k)` for each row of `z`.
    pub fn eval(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_width(z)?;
        let n_x = self.alpha.ncols();
        let mut out = Array2::zeros((z.nrows(), n_x));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(k, mut dst)| {
                let zk = z.row(k);
                for (i, zi) in self.z_points.rows().into_iter().enumerate() {
                    let w = self.kernel.eval(zi, zk, self.length_scale);
                    for c in 0..n_x {
                        dst[c] += w * self.alpha[[i, c]];
                    }
                }
            });
        Ok(out)
    }

    /// Distance from each query row to its nearest training image.
    pub fn nearest_distance(&self, z: ArrayView2<'_, T>) -> Result<Array1<T>> {
        self.check_width(z)?;
        Ok(z.rows()
            .into_iter()
            .map(|zk| {
                self.z_points
                    .rows()
                    .into_iter()
                    .map(|zi| sq_dist(zi, zk))
                    .fold(T::infinity(), T::min)
                    .sqrt()
            })
            .collect())
    }

    /// `sqrt(mean_i |T^+(z_i) - x_i|^2)` on the training set.
    pub fn training_rmse(&self, x: ArrayView2<'_, T>) -> Result<T> {
        let pred = self.eval(self.z_points.view())?;
        if pred.dim() != x.dim() {
            return Err(Error::Dimension("targets do not match the training set".into()));
        }
        Ok(rms(pred
            .rows()
            .into_iter()
            .zip(x.rows())
            .map(|(a, b)| sq_dist(a, b).sqrt())))
    }

    /// `max|(Q + p xi I) alpha - X| / max|X|`.
    pub fn first_order_residual(&self, x: ArrayView2<'_, T>) -> T {
        let q = kernel_matrix(self.z_points.view(), self.length_scale, self.kernel);
        let shift = T::from_usize_lossy(self.n_points()) * self.xi;
        let r = spd_residual(q.view(), self.alpha.view(), x, shift);
        let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale > T::zero() {
            r / scale
        } else {
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(p: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Array2::from_shape_fn((p, 2), |_| rng.random_range(-3.0..3.0));
        let x = Array2::from_shape_fn((p, 2), |(i, c)| (z[[i, 0]] * (c as f64 + 1.0)).sin() + z[[i, 1]]);
        (z, x)
    }

    #[test]
    fn laplace_values() {
        let a = array![0.3, -1.2];
        assert_eq!(laplace_kernel(a.view(), a.view(), 2.0), 1.0);
        let b = array![0.3 + 2.0, -1.2];
        assert!((laplace_kernel(a.view(), b.view(), 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        let c = array![1.7, 0.4];
        assert_eq!(laplace_kernel(a.view(), c.view(), 0.7), laplace_kernel(c.view(), a.view(), 0.7));
    }

    #[test]
    fn single_point_closed_form() {
        let z = array![[0.5, -0.5]];
        let x = array![[2.0, 3.0]];
        let xi = 0.25;
        let m = fit_krr(z.view(), x.view(), 2.0, xi, KernelKind::Laplace).unwrap();
        assert!((m.alpha[[0, 0]] - 2.0f64 / 1.25).abs() < 1e-15);
        let q = array![[1.5, 0.7]];
        let dist = ((1.0f64).powi(2) + 1.2f64.powi(2)).sqrt();
        let out = m.eval(q.view()).unwrap();
        assert!((out[[0, 1]] - 3.0 * (-dist / 2.0).exp() / 1.25).abs() < 1e-14);
    }

    #[test]
    fn ridgeless_interpolates() {
        let (z, x) = random_points(80, 1);
        let m = fit_krr(z.view(), x.view(), 2.0, 0.0, KernelKind::Laplace).unwrap();
        let out = m.eval(z.view()).unwrap();
        let err = (&out - &x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let (z, x) = random_points(20, 2);
        let m = fit_krr(z.view(), x.view(), 2.0, 1e12, KernelKind::Laplace).unwrap();
        assert!(m.alpha.iter().all(|a| a.abs() < 1e-10));
    }

    #[test]
    fn far_field_decays() {
        let (z, x) = random_points(50, 3);
        let m = fit_krr(z.view(), x.view(), 0.5, DEFAULT_XI, KernelKind::Laplace).unwrap();
        let far = array![[100.0, 100.0]];
        let out = m.eval(far.view()).unwrap();
        let amax = m.alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(out.iter().all(|v| v.abs() < 1e-6 * amax * 50.0));
        assert!(m.nearest_distance(far.view()).unwrap()[0] > 90.0);
    }

    #[test]
    fn first_order_condition_and_monotone_ridge() {
        let (z, x) = random_points(120, 4);
        let mut last = -1.0;
        for &xi in &[0.0, 1e-8, 1e-4, 1e-2] {
            let m = fit_krr(z.view(), x.view(), 2.0, xi, KernelKind::Laplace).unwrap();
            assert!(m.first_order_residual(x.view()) < 1e-8);
            let rmse = m.training_rmse(x.view()).unwrap();
            assert!(rmse + 1e-12 >= last, "xi {xi}: {rmse} < {last}");
            last = rmse;
        }
    }

    #[test]
    fn laplace_gram_is_positive_definite() {
        let (z, _) = random_points(40, 5);
        let q = kernel_matrix(z.view(), 2.0, KernelKind::Laplace);
        assert_eq!(q, q.t());
        let h = crate::numerics::HermitianMatrix::from_real(q.view()).unwrap();
        let min = crate::numerics::hermitian_min_eigvec(&h).unwrap();
        assert!(min.value > -1e-10);
    }

    #[test]
    fn duplicate_points_fail_without_ridge() {
        let z = array![[1.0, 1.0], [1.0, 1.0]];
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        match fit_krr(z.view(), x.view(), 2.0, 0.0, KernelKind::Laplace) {
            Err(Error::NotPositiveDefinite { hint, .. }) => assert!(hint.contains("xi")),
            other => panic!("{other:?}"),
        }
        assert!(fit_krr(z.view(), x.view(), 2.0, 1e-3, KernelKind::Laplace).is_ok());
    }

    #[test]
    fn gaussian_kernel_option() {
        let (z, x) = random_points(30, 6);
        let m = fit_krr(z.view(), x.view(), 1.0, 1e-6, KernelKind::Gaussian).unwrap();
        assert!(m.training_rmse(x.view()).unwrap() < 1e-2);
    }
}
