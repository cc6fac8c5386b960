//! Dense linear algebra kernels: cyclic Jacobi for Hermitian matrices,
//! complex ridge least squares through the normal equations, and a real
//! Cholesky solver.
//!
//! Problem sizes are small (eigenproblems of a few dozen, least squares with
//! at most a few hundred unknowns, one SPD system of order ~1000), so
//! everything is written directly against row-major `ndarray` storage.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T> {
    data: Array2<Cplx<T>>,
}

impl<T: Real> HermitianMatrix<T> {
    /// Symmetrizes `m` as `(m + m^*) / 2`.
    pub fn new(m: Array2<Cplx<T>>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", n, m.ncols())));
        }
        let half = T::lit(0.5);
        let mut data = m;
        for i in 0..n {
            data[[i, i]] = Complex::new(data[[i, i]].re, T::zero());
            for j in i + 1..n {
                let avg = (data[[i, j]] + data[[j, i]].conj()).scale(half);
                data[[i, j]] = avg;
                data[[j, i]] = avg.conj();
            }
        }
        Ok(Self { data })
    }

    pub fn from_real(m: ArrayView2<'_, T>) -> Result<Self> {
        Self::new(m.mapv(|v| Complex::new(v, T::zero())))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<Cplx<T>> {
        &self.data
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `v^* H v` (real for Hermitian `H`).
    pub fn quadratic_form(&self, v: ArrayView1<'_, Cplx<T>>) -> T {
        let hv = self.data.dot(&v);
        v.iter().zip(hv.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Full spectral decomposition `H = U diag(values) U^*`.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Array2<Cplx<T>>,
}

/// Smallest eigenpair with the gap to the next eigenvalue.
#[derive(Debug, Clone)]
pub struct MinEigenpair<T> {
    pub value: T,
    /// Unit norm; its largest-magnitude entry is real and positive.
    pub vector: Array1<Cplx<T>>,
    /// `lambda_2 - lambda_min`, or `+inf` for a 1x1 matrix.
    pub gap: T,
}

const MAX_SWEEPS: usize = 80;

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn hermitian_eigen<T: Real>(h: &HermitianMatrix<T>) -> Result<HermitianEigen<T>> {
    let n = h.dim();
    if h.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    let mut a = h.data.clone();
    let mut v = Array2::<Cplx<T>>::eye(n);
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let two = T::lit(2.0);

    let mut converged = n <= 1;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                let r = apq.norm();
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                if r <= tiny || r <= eps * (app.abs() * aqq.abs()).sqrt() {
                    a[[p, q]] = Cplx::zero();
                    a[[q, p]] = Cplx::zero();
                    continue;
                }
                rotated = true;
                // phase e^{-i theta} makes the (p, q) entry real and positive
                let phase = apq.conj().unscale(r);
                let tau = (aqq - app) / (two * r);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // G = [[c, s], [-s e^{-i theta}, c e^{-i theta}]] on (p, q)
                let g_qp = phase.scale(-s);
                let g_qq = phase.scale(c);
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp.scale(c) + akq * g_qp;
                    a[[k, q]] = akp.scale(s) + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = apk.scale(c) + aqk * g_qp.conj();
                    a[[q, k]] = apk.scale(s) + aqk * g_qq.conj();
                }
                a[[p, q]] = Cplx::zero();
                a[[q, p]] = Cplx::zero();
                a[[p, p]] = Complex::new(a[[p, p]].re, T::zero());
                a[[q, q]] = Complex::new(a[[q, q]].re, T::zero());
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp.scale(c) + vkq * g_qp;
                    v[[k, q]] = vkp.scale(s) + vkq * g_qq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        let off = off_diagonal_norm(&a);
        return Err(Error::NoConvergence {
            sweeps,
            residual: off.as_f64(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: ties keep the lower index first
    order.sort_by(|&i, &j| a[[i, i]].re.partial_cmp(&a[[j, j]].re).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[[i, i]].re).collect();
    let vectors = v.select(Axis(1), &order);
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm<T: Real>(a: &Array2<Cplx<T>>) -> T {
    let mut s = T::zero();
    for ((i, j), z) in a.indexed_iter() {
        if i != j {
            s += z.norm_sqr();
        }
    }
    s.sqrt()
}

/// Rotates `v` so its largest-magnitude entry (lowest index on ties) is real
/// and positive.
pub fn fix_phase<T: Real>(v: &mut Array1<Cplx<T>>) {
    let mut best = 0;
    let mut best_mag = T::neg_infinity();
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > T::zero() {
        let rot = v[best].conj().unscale(best_mag);
        v.mapv_inplace(|z| z * rot);
        v[best] = Complex::new(best_mag, T::zero());
    }
}

/// Smallest eigenvalue of `h` and a phase-normalized unit eigenvector.
pub fn hermitian_min_eigvec<T: Real>(h: &HermitianMatrix<T>) -> Result<MinEigenpair<T>> {
    if h.dim() == 0 {
        return Err(Error::Precondition("empty matrix".into()));
    }
    let eig = hermitian_eigen(h)?;
    let mut vector = eig.vectors.column(0).to_owned();
    let norm = vector.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    vector.mapv_inplace(|z| z.unscale(norm));
    fix_phase(&mut vector);
    let gap = if eig.values.len() > 1 {
        eig.values[1] - eig.values[0]
    } else {
        T::infinity()
    };
    Ok(MinEigenpair {
        value: eig.values[0],
        vector,
        gap,
    })
}

/// In-place lower Cholesky factor of a Hermitian positive-definite matrix.
/// Returns the failing column and pivot when a pivot is `<= floor`.
fn complex_cholesky<T: Real>(a: &mut Array2<Cplx<T>>, floor: T) -> std::result::Result<(), (usize, T)> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for k in 0..j {
            d -= a[[j, k]].norm_sqr();
        }
        if !(d > floor) {
            return Err((j, d));
        }
        let ljj = d.sqrt();
        a[[j, j]] = Complex::new(ljj, T::zero());
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]].conj();
            }
            a[[i, j]] = s.unscale(ljj);
        }
    }
    Ok(())
}

/// Ridge-regularized complex least squares:
/// solves `(V^* V + ridge I) b = V^* t`.
pub fn complex_least_squares<T: Real>(
    v: ArrayView2<'_, Cplx<T>>,
    t: ArrayView1<'_, T>,
    ridge: T,
) -> Result<Array1<Cplx<T>>> {
    let (d, p) = v.dim();
    if d == 0 || p == 0 {
        return Err(Error::Precondition(format!("empty design matrix ({d}x{p})")));
    }
    if t.len() != d {
        return Err(Error::Dimension(format!("{} targets for {d} design rows", t.len())));
    }
    if ridge < T::zero() {
        return Err(Error::Precondition(format!("ridge must be non-negative, got {ridge}")));
    }

    // normal matrix N = V^* V + ridge I, lower triangle is all the factor reads
    let vh = v.t().mapv(|z| z.conj());
    let mut normal = vh.dot(&v);
    for i in 0..p {
        normal[[i, i]] += Cplx::from(ridge);
    }
    let mut rhs: Array1<Cplx<T>> = Array1::zeros(p);
    for (i, row) in v.rows().into_iter().enumerate() {
        let ti = t[i];
        for (r, z) in rhs.iter_mut().zip(row.iter()) {
            *r += z.conj().scale(ti);
        }
    }

    let floor = if ridge > T::zero() {
        T::zero()
    } else {
        let max_diag = (0..p).map(|i| normal[[i, i]].re).fold(T::zero(), T::max);
        T::from_usize_lossy(p) * T::epsilon() * max_diag
    };
    complex_cholesky(&mut normal, floor).map_err(|(column, pivot)| Error::RankDeficient {
        column,
        pivot: pivot.as_f64(),
    })?;

    // forward: L y = rhs
    let mut y = rhs;
    for i in 0..p {
        let mut s = y[i];
        for k in 0..i {
            s -= normal[[i, k]] * y[k];
        }
        y[i] = s.unscale(normal[[i, i]].re);
    }
    // backward: L^* b = y
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= normal[[k, i]].conj() * y[k];
        }
        y[i] = s.unscale(normal[[i, i]].re);
    }
    Ok(y)
}

/// Lower Cholesky factor `L L^T = Q + shift I` of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Array2<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(q: ArrayView2<'_, T>, shift: T) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", n, q.ncols())));
        }
        let mut l = q.to_owned();
        for i in 0..n {
            l[[i, i]] += shift;
        }
        let data = l.as_slice_mut().expect("standard layout");
        for j in 0..n {
            let (row_j, below) = data[j * n..].split_at_mut(n);
            let mut d = row_j[j];
            for k in 0..j {
                d -= row_j[k] * row_j[k];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite {
                    column: j,
                    pivot: d.as_f64(),
                    hint: "; increase the regularization",
                });
            }
            let ljj = d.sqrt();
            row_j[j] = ljj;
            for row_i in below.chunks_exact_mut(n) {
                let mut s = row_i[j];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / ljj;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                l[[i, j]] = T::zero();
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `(Q + shift I) X = rhs` column by column.
    pub fn solve(&self, rhs: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let n = self.dim();
        if rhs.nrows() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {n}",
                rhs.nrows()
            )));
        }
        let l = &self.lower;
        let mut out = rhs.to_owned();
        for mut col in out.columns_mut() {
            for i in 0..n {
                let mut s = col[i];
                for k in 0..i {
                    s -= l[[i, k]] * col[k];
                }
                col[i] = s / l[[i, i]];
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in i + 1..n {
                    s -= l[[k, i]] * col[k];
                }
                col[i] = s / l[[i, i]];
            }
        }
        Ok(out)
    }
}

/// Solves `(Q + shift I) A = rhs` for symmetric `Q` by Cholesky.
pub fn spd_solve<T: Real>(q: ArrayView2<'_, T>, rhs: ArrayView2<'_, T>, shift: T) -> Result<Array2<T>> {
    Cholesky::factor(q, shift)?.solve(rhs)
}

/// Identity check used by tests and diagnostics: `max |(Q + shift I) A - rhs|`.
pub fn spd_residual<T: Real>(q: ArrayView2<'_, T>, a: ArrayView2<'_, T>, rhs: ArrayView2<'_, T>, shift: T) -> T {
    let mut r = q.dot(&a);
    r.scaled_add(shift, &a);
    r -= &rhs;
    r.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix<f64> {
        let m = Array2::from_shape_fn((n, n), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        HermitianMatrix::new(m).unwrap()
    }

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Array1<C> {
        let v = Array1::from_shape_fn(n, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv(|z| z / norm)
    }

    #[test]
    fn construction_symmetrizes() {
        let h = HermitianMatrix::new(array![[c(1.0, 0.3), c(2.0, 1.0)], [c(2.0, 0.0), c(3.0, 0.0)]]).unwrap();
        let a = h.as_array();
        assert_eq!(a[[0, 0]].im, 0.0);
        assert_eq!(a[[0, 1]], a[[1, 0]].conj());
        assert_eq!(a[[0, 1]], c(2.0, 0.5));
    }

    #[test]
    fn identity_min_eig() {
        let h = HermitianMatrix::<f64>::from_real(Array2::eye(3).view()).unwrap();
        let m = hermitian_min_eigvec(&h).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.vector.to_vec(), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn diagonal_min_eig() {
        let h = HermitianMatrix::<f64>::from_real(array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]].view())
            .unwrap();
        let m = hermitian_min_eigvec(&h).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.vector.to_vec(), vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(m.gap, 1.0);
    }

    #[test]
    fn two_by_two_complex() {
        // eigenpairs of [[2, i], [-i, 2]]: 1 with (1, i)/sqrt2, 3 with (1, -i)/sqrt2
        let h = HermitianMatrix::new(array![[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]]).unwrap();
        let m = hermitian_min_eigvec(&h).unwrap();
        assert!((m.value - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // ties in magnitude resolve to index 0, so the phase rule gives (1, i)/sqrt2 exactly
        assert!((m.vector[0] - c(s, 0.0)).norm() < 1e-14);
        assert!((m.vector[1] - c(0.0, s)).norm() < 1e-14);
    }

    #[test]
    fn full_decomposition_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(9, &mut rng);
        let eig = hermitian_eigen(&h).unwrap();
        let u = &eig.vectors;
        let lam = Array2::from_diag(&Array1::from(eig.values.clone()).mapv(|v| c(v, 0.0)));
        let rec = u.dot(&lam).dot(&u.t().mapv(|z| z.conj()));
        let err = (&rec - h.as_array()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn min_eig_residual_and_variational_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 21] {
            let h = random_hermitian(n, &mut rng);
            let m = hermitian_min_eigvec(&h).unwrap();
            let hv = h.as_array().dot(&m.vector);
            let res = (&hv - &m.vector.mapv(|z| z * m.value)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-9 * h.norm(), "n={n} residual {res}");
            let norm = m.vector.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            for _ in 0..100 {
                let v = random_unit(n, &mut rng);
                assert!(m.value <= h.quadratic_form(v.view()) + 1e-9);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let h = HermitianMatrix::new(array![[c(f64::NAN, 0.0)]]).unwrap();
        assert!(hermitian_min_eigvec(&h).is_err());
    }

    #[test]
    fn least_squares_examples() {
        let eye = Array2::<C>::eye(2);
        let b = complex_least_squares(eye.view(), array![3.0, 4.0].view(), 0.0).unwrap();
        assert_eq!(b.to_vec(), vec![c(3.0, 0.0), c(4.0, 0.0)]);

        let ones = array![[c(1.0, 0.0)], [c(1.0, 0.0)]];
        let b = complex_least_squares(ones.view(), array![1.0, 3.0].view(), 0.0).unwrap();
        assert!((b[0] - c(2.0, 0.0)).norm() < 1e-15);

        let b = complex_least_squares(ones.view(), array![1.0, 3.0].view(), 1e12).unwrap();
        assert!(b[0].norm() < 1e-10);
    }

    #[test]
    fn least_squares_rank_deficiency() {
        let v = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)]];
        let t = array![1.0, 2.0];
        assert!(matches!(
            complex_least_squares(v.view(), t.view(), 0.0),
            Err(Error::RankDeficient { .. })
        ));
        assert!(complex_least_squares(v.view(), t.view(), 1e-6).is_ok());
    }

    #[test]
    fn least_squares_square_is_inverse() {
        let v = array![[c(2.0, 1.0), c(0.0, -1.0)], [c(1.0, 0.0), c(3.0, 0.5)]];
        let t = array![1.0, -2.0];
        let b = complex_least_squares(v.view(), t.view(), 0.0).unwrap();
        let r = v.dot(&b);
        assert!((r[0] - c(1.0, 0.0)).norm() < 1e-12 && (r[1] - c(-2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn spd_examples() {
        let rhs = array![[1.0, 2.0], [3.0, 4.0]];
        let a = spd_solve(Array2::<f64>::eye(2).view(), rhs.view(), 0.0).unwrap();
        assert_eq!(a, rhs);

        let q = array![[2.0, 0.0], [0.0, 4.0]];
        let a = spd_solve(q.view(), array![[2.0], [4.0]].view(), 0.0).unwrap();
        assert!(a.iter().all(|&v| (v - 1.0f64).abs() < 1e-15), "{a}");

        let a = spd_solve(Array2::<f64>::eye(2).view(), rhs.view(), 1.0).unwrap();
        let half = rhs.mapv(|v| v / 2.0);
        assert!(a.iter().zip(half.iter()).all(|(u, v)| (u - v).abs() < 1e-15), "{a}");
    }

    #[test]
    fn spd_rejects_indefinite() {
        let q = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            spd_solve(q.view(), Array2::eye(2).view(), 0.0),
            Err(Error::NotPositiveDefinite { column: 1, .. })
        ));
    }

    #[test]
    fn spd_inverse_of_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Array2::from_shape_fn((30, 30), |_| rng.random_range(-1.0..1.0));
        let q = m.t().dot(&m) + Array2::<f64>::eye(30);
        let a = spd_solve(q.view(), q.view(), 0.0).unwrap();
        let err = (&a - &Array2::<f64>::eye(30)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-8, "{err}");
        let rhs = Array2::from_shape_fn((30, 3), |_| rng.random_range(-5.0..5.0));
        let x = spd_solve(q.view(), rhs.view(), 0.5).unwrap();
        let res = spd_residual(q.view(), x.view(), rhs.view(), 0.5);
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(res < 1e-9 * scale);
    }

    #[test]
    fn f32_path_runs() {
        let h = HermitianMatrix::<f32>::from_real(array![[2.0f32, 1.0], [1.0, 2.0]].view()).unwrap();
        let m = hermitian_min_eigvec(&h).unwrap();
        assert!((m.value - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn least_squares_residual_orthogonal(seed in 0u64..500, d in 4usize..30, p in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Array2::from_shape_fn((d, p), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let t = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
            let b = complex_least_squares(v.view(), t.view(), 0.0).unwrap();
            let r = v.dot(&b) - t.mapv(|x| c(x, 0.0));
            let g = v.t().mapv(|z| z.conj()).dot(&r);
            let gnorm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let tnorm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(gnorm < 1e-8 * tnorm);
        }
    }
}
