//! Hermitian Cholesky factorization with an explicit definiteness check.
//!
//! `nalgebra`'s `Cholesky` never verifies positive definiteness over the
//! complex field — every diagonal entry has a complex square root, so the
//! factorization "succeeds" on indefinite and singular matrices and the
//! subsequent solves are silently wrong. The precoders need the opposite
//! behavior: factorization failure *is* the signal that a channel is rank
//! deficient or that a system matrix needs diagonal loading. [`llt`]
//! therefore rejects any elimination pivot that is not strictly positive
//! and finite, and keeps the accepted pivots around for conditioning
//! checks and log-determinants.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Lower-triangular factor of a Hermitian positive-definite matrix,
/// `A = L L^H`, together with the Schur-complement pivots (`L[j,j]^2`)
/// accepted while eliminating each column.
#[derive(Debug, Clone)]
pub(crate) struct LltFactor {
    l: DMatrix<Complex64>,
    pivots: Vec<f64>,
}

/// Factorizes a Hermitian matrix, reading only its lower triangle.
/// Returns `None` as soon as a pivot fails to be strictly positive and
/// finite, which is exactly the numerical positive-definiteness test.
pub(crate) fn llt(a: &DMatrix<Complex64>) -> Option<LltFactor> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols(), "factorization needs a square matrix");
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    let mut pivots = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        pivots.push(d);
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(LltFactor { l, pivots })
}

impl LltFactor {
    /// Solves `A X = B` column by column (forward then back substitution).
    pub(crate) fn solve(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.l.nrows();
        assert_eq!(b.nrows(), n, "right-hand side row count mismatch");
        let mut x = b.clone();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Smallest accepted pivot; an exact-arithmetic singular matrix drives
    /// this to roundoff level relative to [`Self::max_pivot`].
    pub(crate) fn min_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest accepted pivot.
    pub(crate) fn max_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(0.0, f64::max)
    }

    /// Base-2 log-determinant, summed from the pivots so it stays finite
    /// even when the determinant itself would overflow.
    pub(crate) fn log2_det(&self) -> f64 {
        self.pivots.iter().map(|d| d.log2()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_complex(m: usize, n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_hpd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let x = random_complex(n, n + 2, seed);
        let mut a = &x * x.adjoint();
        for i in 0..n {
            a[(i, i)] += Complex64::new(0.5, 0.0);
        }
        a
    }

    #[test]
    fn factor_reconstructs_and_solves() {
        let a = random_hpd(7, 11);
        let f = llt(&a).expect("positive definite input");
        let rebuilt = &f.l * f.l.adjoint();
        assert!((&rebuilt - &a).norm() / a.norm() < 1e-12);

        let b = random_complex(7, 3, 12);
        let x = f.solve(&b);
        assert!((&a * &x - &b).norm() / b.norm() < 1e-10);
    }

    #[test]
    fn log2_det_matches_the_eigenvalue_sum() {
        let a = random_hpd(6, 13);
        let f = llt(&a).unwrap();
        let eig = nalgebra::SymmetricEigen::new(a);
        let oracle: f64 = eig.eigenvalues.iter().map(|&l| l.log2()).sum();
        assert!((f.log2_det() - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn rejects_indefinite_matrices() {
        let neg = DMatrix::from_element(1, 1, Complex64::new(-3.0, 0.0));
        assert!(llt(&neg).is_none());

        // Eigenvalues 4 and -2: indefinite despite a positive diagonal.
        let c = |v: f64| Complex64::new(v, 0.0);
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0), c(3.0), c(3.0), c(1.0)]);
        assert!(llt(&a).is_none());

        let nan = DMatrix::from_element(2, 2, Complex64::new(f64::NAN, 0.0));
        assert!(llt(&nan).is_none());
    }

    #[test]
    fn singular_gram_is_flagged_by_the_pivot_ratio() {
        // Gram of a matrix with duplicated columns: singular in exact
        // arithmetic. Roundoff may leave a positive last pivot, but only
        // at machine-epsilon scale relative to the largest one.
        let mut g = random_complex(5, 3, 14);
        let dup = g.column(0).into_owned();
        g.set_column(2, &dup);
        let gram = g.adjoint() * &g;
        match llt(&gram) {
            None => {}
            Some(f) => assert!(
                f.min_pivot() < 1e-12 * f.max_pivot(),
                "min pivot {} vs max {}",
                f.min_pivot(),
                f.max_pivot()
            ),
        }
    }
}
