//! Multivariate monomial dictionary.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// All monomials in `n_vars` variables of total degree `<= max_degree`,
/// in graded-lexicographic order: constant first, then by degree, and
/// within a degree by descending exponent of the first variable
/// (`1, x1, x2, x1^2, x1 x2, x2^2, ...`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    n_vars: usize,
    max_degree: u32,
    exponents: Vec<Vec<u32>>,
}

/// Exponent tuples of total degree exactly `degree`, first variable descending.
fn exponents_of_degree(n_vars: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if n_vars == 1 {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=degree).rev() {
        prefix.push(e);
        exponents_of_degree(n_vars - 1, degree - e, prefix, out);
        prefix.pop();
    }
}

impl PolyBasis {
    pub fn new(n_vars: usize, max_degree: u32) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Precondition("basis needs at least one variable".into()));
        }
        let mut exponents = Vec::new();
        for degree in 0..=max_degree {
            exponents_of_degree(n_vars, degree, &mut Vec::with_capacity(n_vars), &mut exponents);
        }
        Ok(Self {
            n_vars,
            max_degree,
            exponents,
        })
    }

    /// Rebuilds a basis from a serialized exponent list, checking that it is
    /// exactly the canonical ordering.
    pub fn from_exponents(exponents: Vec<Vec<u32>>) -> Result<Self> {
        let n_vars = exponents.first().map(Vec::len).unwrap_or(0);
        let max_degree = exponents
            .iter()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0);
        let canonical = Self::new(n_vars, max_degree)?;
        if canonical.exponents != exponents {
            return Err(Error::Schema(
                "exponent list is not a complete graded-lex monomial basis".into(),
            ));
        }
        Ok(canonical)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Short identifier used to check that fitted objects share a basis.
    pub fn id(&self) -> String {
        format!("poly(vars={},deg={})", self.n_vars, self.max_degree)
    }

    /// Evaluates every monomial at one point.
    pub fn eval_point<T: Real>(&self, x: &[T], out: &mut [T]) {
        // powers[v][k] = x[v]^k
        let deg = self.max_degree as usize;
        let mut powers = vec![T::one(); self.n_vars * (deg + 1)];
        for v in 0..self.n_vars {
            for k in 1..=deg {
                powers[v * (deg + 1) + k] = powers[v * (deg + 1) + k - 1] * x[v];
            }
        }
        for (slot, exps) in out.iter_mut().zip(&self.exponents) {
            let mut acc = T::one();
            for (v, &e) in exps.iter().enumerate() {
                acc *= powers[v * (deg + 1) + e as usize];
            }
            *slot = acc;
        }
    }

    /// `d x n_G` matrix whose entry `(i, j)` is monomial `j` at row `i`.
    pub fn eval<T: Real>(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.n_vars {
            return Err(Error::Dimension(format!(
                "data has {} columns, basis has {} variables",
                x.ncols(),
                self.n_vars
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.len()));
        let mut point = vec![T::zero(); self.n_vars];
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            point.iter_mut().zip(row.iter()).for_each(|(p, &v)| *p = v);
            self.eval_point(&point, dst.as_slice_mut().expect("row-major output"));
        }
        Ok(out)
    }
}
